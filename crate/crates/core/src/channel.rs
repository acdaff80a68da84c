//! Parties, quantum channels and the hook points an adversary attaches to.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::statevector::{PureState, StateError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
    Trent,
    Eve,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Party::Alice => "alice",
            Party::Bob => "bob",
            Party::Trent => "trent",
            Party::Eve => "eve",
        };
        f.write_str(s)
    }
}

impl FromStr for Party {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alice" => Ok(Party::Alice),
            "bob" => Ok(Party::Bob),
            "trent" => Ok(Party::Trent),
            "eve" => Ok(Party::Eve),
            _ => Err(format!("unknown party {s:?}")),
        }
    }
}

/// A one-way quantum link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    TrentAlice,
    TrentBob,
    AliceBob,
    AliceTrent,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::TrentAlice, Channel::TrentBob, Channel::AliceBob, Channel::AliceTrent];

    pub fn name(self) -> &'static str {
        match self {
            Channel::TrentAlice => "trent-alice",
            Channel::TrentBob => "trent-bob",
            Channel::AliceBob => "alice-bob",
            Channel::AliceTrent => "alice-trent",
        }
    }

    /// Channels that carry qubits during authentication.
    pub fn is_distribution(self) -> bool {
        matches!(self, Channel::TrentAlice | Channel::TrentBob)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown channel {s:?}; expected one of trent-alice, trent-bob, alice-bob, alice-trent"))
    }
}

/// Interception points on the quantum channels.
///
/// `on_transit` fires for every qubit sent over a channel; `on_measure` fires
/// when the honest parties measure the triple at `position`, so the adversary
/// can measure whatever ancillas it attached to that triple.
pub trait ChannelHook {
    fn on_transit(
        &mut self,
        channel: Channel,
        position: usize,
        state: &mut PureState,
        qubit: usize,
    ) -> Result<(), StateError>;

    fn on_measure(&mut self, position: usize, state: &mut PureState) -> Result<(), StateError>;
}

/// The honest channel.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoAttack;

impl ChannelHook for NoAttack {
    fn on_transit(&mut self, _: Channel, _: usize, _: &mut PureState, _: usize) -> Result<(), StateError> {
        Ok(())
    }

    fn on_measure(&mut self, _: usize, _: &mut PureState) -> Result<(), StateError> {
        Ok(())
    }
}
