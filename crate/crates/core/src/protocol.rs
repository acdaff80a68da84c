//! Three-party state machines: authentication, then one of the two direct
//! communication variants.
//!
//! Every GHZ triple is simulated as its own register `(A, T, B)` plus any
//! ancillas the adversary attaches. Sending a qubit is a transfer of ownership
//! inside that register; channel hooks fire at the moment of transfer.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::authkeys::{derive_key, AuthKey, Counter, HashContract, KeyError, UserIdentity, UserRole};
use crate::bits;
use crate::channel::{Channel, ChannelHook, Party};
use crate::ecc::{self, Codec};
use crate::statevector::{BellOutcome, Gate1Q, PureState, StateError, XOutcome, ZOutcome};
use crate::transcript::{Announcement, EventKind, MeasureBasis, Phase, Transcript, Verdict};

const ALICE: usize = 0;
const TRENT: usize = 1;
const BOB: usize = 2;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{role:?} key covers {have} positions, {need} needed")]
    InsufficientKey { role: UserRole, have: usize, need: usize },
    #[error("counter {requested} for {role:?} was already consumed (next fresh counter is {next})")]
    ReplayedCounter { role: UserRole, requested: u64, next: u64 },
    #[error("{needed} message and check positions requested but only {available} triples survived authentication")]
    CapacityExceeded { needed: usize, available: usize },
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolVariant {
    /// Alice sends her qubits to Bob, who Bell-measures; Trent measures x.
    Qdc1,
    /// Alice sends her qubits to Trent, who Bell-measures and publishes one bit; Bob measures x.
    Qdc2,
}

impl ProtocolVariant {
    pub fn message_channel(self) -> Channel {
        match self {
            ProtocolVariant::Qdc1 => Channel::AliceBob,
            ProtocolVariant::Qdc2 => Channel::AliceTrent,
        }
    }
}

impl fmt::Display for ProtocolVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolVariant::Qdc1 => "qdc1",
            ProtocolVariant::Qdc2 => "qdc2",
        })
    }
}

impl FromStr for ProtocolVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qdc1" => Ok(ProtocolVariant::Qdc1),
            "qdc2" => Ok(ProtocolVariant::Qdc2),
            _ => Err(format!("unknown protocol {s:?}")),
        }
    }
}

/// Order in which Bob, Trent and Eve measure during the message phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementOrder([Party; 3]);

impl MeasurementOrder {
    pub fn new(order: [Party; 3]) -> Result<Self, ProtocolError> {
        let mut sorted = order;
        sorted.sort();
        if sorted != [Party::Bob, Party::Trent, Party::Eve] {
            return Err(ProtocolError::Config(format!(
                "measurement order must be a permutation of bob, trent, eve; got {order:?}"
            )));
        }
        Ok(Self(order))
    }

    pub fn parties(&self) -> [Party; 3] {
        self.0
    }

    /// All six orderings.
    pub fn all() -> Vec<Self> {
        let p = [Party::Bob, Party::Trent, Party::Eve];
        let mut out = Vec::with_capacity(6);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    if i != j && j != k && i != k {
                        out.push(Self([p[i], p[j], p[k]]));
                    }
                }
            }
        }
        out
    }
}

impl Default for MeasurementOrder {
    fn default() -> Self {
        Self([Party::Bob, Party::Trent, Party::Eve])
    }
}

impl fmt::Display for MeasurementOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.0[0], self.0[1], self.0[2])
    }
}

impl FromStr for MeasurementOrder {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<Party> = s
            .split(',')
            .map(|p| p.trim().parse::<Party>())
            .collect::<Result<_, _>>()
            .map_err(ProtocolError::Config)?;
        let arr: [Party; 3] = parts
            .try_into()
            .map_err(|_| ProtocolError::Config(format!("measurement order needs three parties: {s:?}")))?;
        Self::new(arr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Number of GHZ triples `N`.
    pub n_ghz: usize,
    /// Number of authentication check positions `m`.
    pub m_auth_check: usize,
    /// Fraction of surviving triples sacrificed as message-phase check bits.
    pub check_fraction_msg: f64,
    pub error_threshold_auth: f64,
    pub error_threshold_msg: f64,
    pub codec: Codec,
    pub variant: ProtocolVariant,
    pub order: MeasurementOrder,
    /// QDC2 only: Bob measures his qubits before Alice encodes.
    pub bob_measures_early: bool,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            n_ghz: 256,
            m_auth_check: 32,
            check_fraction_msg: 0.25,
            error_threshold_auth: 0.0,
            error_threshold_msg: 0.0,
            codec: Codec::None,
            variant: ProtocolVariant::Qdc1,
            order: MeasurementOrder::default(),
            bob_measures_early: false,
            seed: 0,
        }
    }
}

impl SessionConfig {
    pub fn survivors(&self) -> usize {
        self.n_ghz.saturating_sub(self.m_auth_check)
    }

    pub fn message_check_count(&self) -> usize {
        (self.check_fraction_msg * self.survivors() as f64 - 1e-9).ceil().max(0.0) as usize
    }

    /// Largest frame (header plus coded body) that fits next to the check bits.
    pub fn frame_capacity(&self) -> usize {
        self.survivors().saturating_sub(self.message_check_count())
    }

    pub fn validate(&self, message_len: usize) -> Result<(), ProtocolError> {
        let bad = |m: String| Err(ProtocolError::Config(m));
        if self.n_ghz == 0 {
            return bad("n_ghz must be positive".into());
        }
        if self.m_auth_check == 0 || self.m_auth_check >= self.n_ghz {
            return bad(format!(
                "m_auth_check must satisfy 1 <= m < N, got m = {} and N = {}",
                self.m_auth_check, self.n_ghz
            ));
        }
        for (name, v) in [
            ("check_fraction_msg", self.check_fraction_msg),
            ("error_threshold_auth", self.error_threshold_auth),
            ("error_threshold_msg", self.error_threshold_msg),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        let needed = self.codec.frame_len(message_len) + self.message_check_count();
        if needed > self.survivors() {
            return Err(ProtocolError::CapacityExceeded {
                needed,
                available: self.survivors(),
            });
        }
        Ok(())
    }
}

/// Keys Trent shares with Alice and Bob for one session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionKeys {
    pub alice: AuthKey,
    pub bob: AuthKey,
}

#[derive(Debug, Clone)]
struct Registration {
    identity: UserIdentity,
    /// Next fresh counter value; may run past the counter width, in which case issuing fails.
    next: u64,
}

/// Trent's record of registered users and their next fresh counters.
/// Counters advance in lockstep for Trent and the user.
#[derive(Clone)]
pub struct KeyRegistry {
    hash: Arc<dyn HashContract>,
    width: u8,
    alice: Registration,
    bob: Registration,
}

impl KeyRegistry {
    pub fn new(hash: Arc<dyn HashContract>, alice: UserIdentity, bob: UserIdentity, start: Counter) -> Self {
        Self {
            hash,
            width: start.width(),
            alice: Registration { identity: alice, next: start.value() },
            bob: Registration { identity: bob, next: start.value() },
        }
    }

    fn entry(&mut self, role: UserRole) -> &mut Registration {
        match role {
            UserRole::Alice => &mut self.alice,
            UserRole::Bob => &mut self.bob,
        }
    }

    pub fn next_counter(&self, role: UserRole) -> Result<Counter, ProtocolError> {
        let next = match role {
            UserRole::Alice => self.alice.next,
            UserRole::Bob => self.bob.next,
        };
        Ok(Counter::new(next, self.width)?)
    }

    /// Derive a key from `start`, refusing counters that were already used.
    pub fn issue_from(&mut self, role: UserRole, start: Counter, needed: usize) -> Result<AuthKey, ProtocolError> {
        let hash = Arc::clone(&self.hash);
        let entry = self.entry(role);
        if start.value() < entry.next {
            return Err(ProtocolError::ReplayedCounter {
                role,
                requested: start.value(),
                next: entry.next,
            });
        }
        let key = derive_key(&entry.identity, hash.as_ref(), start, needed)?;
        let last = key.provenance().last().map_or(start.value(), |s| s.counter);
        entry.next = last.saturating_add(1);
        Ok(key)
    }

    pub fn issue(&mut self, role: UserRole, needed: usize) -> Result<AuthKey, ProtocolError> {
        let start = self.next_counter(role)?;
        self.issue_from(role, start, needed)
    }

    pub fn issue_session(&mut self, needed: usize) -> Result<SessionKeys, ProtocolError> {
        Ok(SessionKeys {
            alice: self.issue(UserRole::Alice, needed)?,
            bob: self.issue(UserRole::Bob, needed)?,
        })
    }
}

/// One GHZ triple and its index among the `N` prepared by Trent.
#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub position: usize,
    pub state: PureState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthCheck {
    pub position: usize,
    pub key_alice: bool,
    pub key_bob: bool,
    pub alice: ZOutcome,
    pub trent: ZOutcome,
    pub bob: ZOutcome,
}

impl AuthCheck {
    /// The GHZ correlation demands all three z outcomes agree.
    pub fn is_error(&self) -> bool {
        !(self.alice == self.trent && self.trent == self.bob)
    }
}

#[derive(Debug, Clone)]
pub struct AuthOutcome {
    pub verdict: Verdict,
    pub error_rate: f64,
    pub checks: Vec<AuthCheck>,
    pub survivors: Vec<Triple>,
}

fn fraction(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Trent prepares `n` triples, encodes the A and B qubits with the key bits,
/// sends them out, and Alice and Bob undo the encoding.
pub fn distribute_and_decode(
    n: usize,
    keys: &SessionKeys,
    hook: &mut dyn ChannelHook,
    transcript: &mut Transcript,
) -> Result<Vec<Triple>, ProtocolError> {
    for (role, key) in [(UserRole::Alice, &keys.alice), (UserRole::Bob, &keys.bob)] {
        if key.len() < n {
            return Err(ProtocolError::InsufficientKey { role, have: key.len(), need: n });
        }
    }
    let key_bit = |key: &AuthKey, i: usize| key.bits()[i];
    let mut triples: Vec<Triple> = (0..n)
        .map(|position| Triple {
            position,
            state: PureState::ghz3(),
        })
        .collect();
    transcript.push(Party::Trent, EventKind::PrepareGhz { count: n });

    for (owner, qubit, key) in [(Party::Alice, ALICE, &keys.alice), (Party::Bob, BOB, &keys.bob)] {
        for t in &mut triples {
            let gate = crate::authkeys::unitary_for_key_bit(key_bit(key, t.position));
            t.state.apply_gate(&gate, qubit)?;
        }
        transcript.push(
            Party::Trent,
            EventKind::KeyEncode {
                owner,
                count: n,
                counters: key.counters(),
            },
        );
    }

    for (channel, qubit) in [(Channel::TrentAlice, ALICE), (Channel::TrentBob, BOB)] {
        for t in &mut triples {
            hook.on_transit(channel, t.position, &mut t.state, qubit)?;
        }
        transcript.push(Party::Trent, EventKind::Transmit { channel, count: n });
    }

    for (party, qubit, key) in [(Party::Alice, ALICE, &keys.alice), (Party::Bob, BOB, &keys.bob)] {
        for t in &mut triples {
            let gate = crate::authkeys::unitary_for_key_bit(key_bit(key, t.position));
            t.state.apply_gate(&gate, qubit)?;
        }
        transcript.push(
            party,
            EventKind::KeyDecode {
                count: n,
                counters: key.counters(),
            },
        );
    }
    Ok(triples)
}

fn z_string(values: &[ZOutcome]) -> String {
    values.iter().map(|v| if v.bit() { '1' } else { '0' }).collect()
}

fn x_string(values: &[XOutcome]) -> String {
    values.iter().map(|v| if v.bit() { '-' } else { '+' }).collect()
}

/// Authentication: distribute, decode, and compare z outcomes on `m` random positions.
pub fn auth_phase<R: Rng + ?Sized>(
    config: &SessionConfig,
    keys: &SessionKeys,
    hook: &mut dyn ChannelHook,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<AuthOutcome, ProtocolError> {
    let mut triples = distribute_and_decode(config.n_ghz, keys, hook, transcript)?;

    let mut positions = sample(rng, config.n_ghz, config.m_auth_check).into_vec();
    positions.sort_unstable();
    transcript.push(
        Party::Alice,
        EventKind::Announce(Announcement::CheckPositions {
            phase: Phase::Auth,
            positions: positions.clone(),
        }),
    );

    let mut outcomes = vec![[ZOutcome::Zero; 3]; positions.len()];
    for (party, qubit) in [(Party::Alice, ALICE), (Party::Bob, BOB), (Party::Trent, TRENT)] {
        let mut values = Vec::with_capacity(positions.len());
        for (slot, &p) in positions.iter().enumerate() {
            let z = triples[p].state.measure_z(qubit, rng)?;
            outcomes[slot][qubit] = z;
            values.push(z);
        }
        transcript.push(
            party,
            EventKind::Measure {
                basis: MeasureBasis::Z,
                count: positions.len(),
            },
        );
        transcript.push(
            party,
            EventKind::Announce(Announcement::ZOutcomes {
                positions: positions.clone(),
                values: z_string(&values),
            }),
        );
    }
    for &p in &positions {
        hook.on_measure(p, &mut triples[p].state)?;
    }

    let checks: Vec<AuthCheck> = positions
        .iter()
        .zip(&outcomes)
        .map(|(&position, o)| AuthCheck {
            position,
            key_alice: keys.alice.bits()[position],
            key_bob: keys.bob.bits()[position],
            alice: o[ALICE],
            trent: o[TRENT],
            bob: o[BOB],
        })
        .collect();
    let errors = checks.iter().filter(|c| c.is_error()).count();
    let error_rate = fraction(errors, checks.len());
    transcript.push(
        Party::Alice,
        EventKind::ErrorRate {
            phase: Phase::Auth,
            errors,
            checked: checks.len(),
            rate: error_rate,
        },
    );
    let verdict = if error_rate > config.error_threshold_auth {
        Verdict::AuthAborted
    } else {
        Verdict::Authenticated
    };
    transcript.push(
        Party::Alice,
        EventKind::Verdict {
            verdict,
            error_rate,
            detail: None,
        },
    );

    let mut is_check = vec![false; config.n_ghz];
    for &p in &positions {
        is_check[p] = true;
    }
    let survivors = triples.into_iter().filter(|t| !is_check[t.position]).collect();
    Ok(AuthOutcome {
        verdict,
        error_rate,
        checks,
        survivors,
    })
}

/// Alice's encoding gate for one bit: `H` for 0, `H X` for 1.
pub fn message_gate(bit: bool) -> Gate1Q {
    if bit {
        Gate1Q::hadamard_after_x()
    } else {
        Gate1Q::hadamard()
    }
}

/// Alice encodes `bits[i]` onto the A qubit of `triples[i]` (skipping `None`)
/// and sends every encoded qubit over `channel`.
fn encode_and_send(
    channel: Channel,
    triples: &mut [Triple],
    bits: &[Option<bool>],
    hook: &mut dyn ChannelHook,
    transcript: &mut Transcript,
) -> Result<(), ProtocolError> {
    if bits.len() > triples.len() {
        return Err(ProtocolError::CapacityExceeded {
            needed: bits.len(),
            available: triples.len(),
        });
    }
    let mut sent = 0;
    for (t, bit) in triples.iter_mut().zip(bits) {
        if let Some(b) = bit {
            t.state.apply_gate(&message_gate(*b), ALICE)?;
        }
    }
    for (t, bit) in triples.iter_mut().zip(bits) {
        if bit.is_some() {
            hook.on_transit(channel, t.position, &mut t.state, ALICE)?;
            sent += 1;
        }
    }
    transcript.push(Party::Alice, EventKind::Transmit { channel, count: sent });
    Ok(())
}

pub fn qdc1_encode_and_send(
    triples: &mut [Triple],
    bits: &[Option<bool>],
    hook: &mut dyn ChannelHook,
    transcript: &mut Transcript,
) -> Result<(), ProtocolError> {
    encode_and_send(Channel::AliceBob, triples, bits, hook, transcript)
}

pub fn qdc2_encode_and_send(
    triples: &mut [Triple],
    bits: &[Option<bool>],
    hook: &mut dyn ChannelHook,
    transcript: &mut Transcript,
) -> Result<(), ProtocolError> {
    encode_and_send(Channel::AliceTrent, triples, bits, hook, transcript)
}

fn bell_parity(bell: BellOutcome) -> bool {
    matches!(bell, BellOutcome::PhiMinus | BellOutcome::PsiPlus)
}

/// Bob's decoder for the first protocol: `1 xor f(bell) xor g(x)` with
/// `f = 0` on `{phi+, psi-}` and `g = 0` on `plus`.
pub fn qdc1_decode(bell: BellOutcome, x: XOutcome) -> bool {
    !(bell_parity(bell) ^ x.bit())
}

/// The bit Trent publishes after his Bell measurement: 0 for `{phi+, psi-}`, 1 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrentBit(pub bool);

pub fn trent_publish(bell: BellOutcome) -> TrentBit {
    TrentBit(bell_parity(bell))
}

/// Bob's decoder for the second protocol: `1 xor t xor g(x)`.
pub fn qdc2_decode(t: TrentBit, x: XOutcome) -> bool {
    !(t.0 ^ x.bit())
}

/// Public and private results of the message-phase measurements at one position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Readout {
    Qdc1 { bob_bell: BellOutcome, trent_x: XOutcome },
    Qdc2 { trent_bell: BellOutcome, bob_x: XOutcome },
}

impl Readout {
    pub fn decode(&self) -> bool {
        match *self {
            Readout::Qdc1 { bob_bell, trent_x } => qdc1_decode(bob_bell, trent_x),
            Readout::Qdc2 { trent_bell, bob_x } => qdc2_decode(trent_publish(trent_bell), bob_x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub verdict: Verdict,
    pub errors: usize,
    pub checked: usize,
    pub error_rate: f64,
    pub message: Option<Vec<bool>>,
    pub corrected: usize,
    pub detail: Option<String>,
}

/// Compare the check slots against Alice's announced values and, if the error
/// rate is acceptable, ECC-decode the remaining slots.
pub fn message_check_and_deliver(
    decoded: &[bool],
    check_slots: &[usize],
    check_values: &[bool],
    threshold: f64,
    codec: Codec,
) -> Result<CheckResult, ProtocolError> {
    if check_slots.len() != check_values.len() {
        return Err(ProtocolError::Config("check positions and values differ in length".into()));
    }
    let mut is_check = vec![false; decoded.len()];
    for &s in check_slots {
        if s >= decoded.len() {
            return Err(ProtocolError::Config(format!("check slot {s} out of range")));
        }
        if is_check[s] {
            return Err(ProtocolError::Config(format!("check slot {s} listed twice")));
        }
        is_check[s] = true;
    }
    let errors = check_slots
        .iter()
        .zip(check_values)
        .filter(|(&s, &v)| decoded[s] != v)
        .count();
    let error_rate = fraction(errors, check_slots.len());
    let discarded = |detail: Option<String>| CheckResult {
        verdict: Verdict::MessageDiscarded,
        errors,
        checked: check_slots.len(),
        error_rate,
        message: None,
        corrected: 0,
        detail,
    };
    if error_rate > threshold {
        return Ok(discarded(None));
    }
    let frame: Vec<bool> = decoded
        .iter()
        .zip(&is_check)
        .filter(|(_, &c)| !c)
        .map(|(&b, _)| b)
        .collect();
    match ecc::decode(codec, &frame) {
        Ok(d) => Ok(CheckResult {
            verdict: Verdict::MessageDelivered,
            errors,
            checked: check_slots.len(),
            error_rate,
            message: Some(d.data),
            corrected: d.corrected_errors,
            detail: None,
        }),
        Err(e) => Ok(discarded(Some(e.to_string()))),
    }
}

#[derive(Debug, Clone)]
pub struct MessageOutcome {
    /// Global positions of the used triples, in slot order.
    pub positions: Vec<usize>,
    /// Bit Alice encoded in each slot.
    pub sent: Vec<bool>,
    /// Bit Bob decoded in each slot.
    pub decoded: Vec<bool>,
    pub check_slots: Vec<usize>,
    pub readouts: Vec<Readout>,
    pub frame_sent: Vec<bool>,
    pub frame_received: Vec<bool>,
    pub result: CheckResult,
}

fn measure_message_slots<R: Rng + ?Sized>(
    config: &SessionConfig,
    used: &mut [Triple],
    early_bob: &[Option<XOutcome>],
    hook: &mut dyn ChannelHook,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<Vec<Readout>, ProtocolError> {
    let n = used.len();
    let mut bells = vec![BellOutcome::PhiPlus; n];
    let mut xs: Vec<XOutcome> = early_bob.iter().map(|x| x.unwrap_or(XOutcome::Plus)).collect();
    for party in config.order.parties() {
        match (party, config.variant) {
            (Party::Bob, ProtocolVariant::Qdc1) => {
                for (t, b) in used.iter_mut().zip(bells.iter_mut()) {
                    *b = t.state.measure_bell(ALICE, BOB, rng)?;
                }
                transcript.push(Party::Bob, EventKind::Measure { basis: MeasureBasis::Bell, count: n });
            }
            (Party::Trent, ProtocolVariant::Qdc1) => {
                for (t, x) in used.iter_mut().zip(xs.iter_mut()) {
                    *x = t.state.measure_x(TRENT, rng)?;
                }
                transcript.push(Party::Trent, EventKind::Measure { basis: MeasureBasis::X, count: n });
            }
            (Party::Trent, ProtocolVariant::Qdc2) => {
                for (t, b) in used.iter_mut().zip(bells.iter_mut()) {
                    *b = t.state.measure_bell(ALICE, TRENT, rng)?;
                }
                transcript.push(Party::Trent, EventKind::Measure { basis: MeasureBasis::Bell, count: n });
            }
            (Party::Bob, ProtocolVariant::Qdc2) => {
                if !config.bob_measures_early {
                    for (t, x) in used.iter_mut().zip(xs.iter_mut()) {
                        *x = t.state.measure_x(BOB, rng)?;
                    }
                    transcript.push(Party::Bob, EventKind::Measure { basis: MeasureBasis::X, count: n });
                }
            }
            (Party::Eve, _) => {
                for t in used.iter_mut() {
                    hook.on_measure(t.position, &mut t.state)?;
                }
            }
            (Party::Alice, _) => unreachable!("measurement order never contains alice"),
        }
    }
    Ok(bells
        .into_iter()
        .zip(xs)
        .map(|(bell, x)| match config.variant {
            ProtocolVariant::Qdc1 => Readout::Qdc1 { bob_bell: bell, trent_x: x },
            ProtocolVariant::Qdc2 => Readout::Qdc2 { trent_bell: bell, bob_x: x },
        })
        .collect())
}

/// Message phase on the triples that survived authentication.
pub fn message_phase<R: Rng + ?Sized>(
    config: &SessionConfig,
    mut survivors: Vec<Triple>,
    message: &[bool],
    hook: &mut dyn ChannelHook,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<MessageOutcome, ProtocolError> {
    let frame_sent = ecc::encode(config.codec, message);
    let check_count = config.message_check_count();
    let used_len = frame_sent.len() + check_count;
    if used_len > survivors.len() {
        return Err(ProtocolError::CapacityExceeded {
            needed: used_len,
            available: survivors.len(),
        });
    }

    let mut early_bob = vec![None; used_len];
    if config.variant == ProtocolVariant::Qdc2 && config.bob_measures_early {
        for (t, x) in survivors.iter_mut().zip(early_bob.iter_mut()) {
            *x = Some(t.state.measure_x(BOB, rng)?);
        }
        transcript.push(Party::Bob, EventKind::Measure { basis: MeasureBasis::X, count: used_len });
    }

    // Alice picks check slots among the used triples and fresh random check bits.
    let mut check_slots = sample(rng, used_len, check_count).into_vec();
    check_slots.sort_unstable();
    let check_values: Vec<bool> = (0..check_count).map(|_| rng.random::<bool>()).collect();
    let mut sent = vec![false; used_len];
    let mut is_check = vec![false; used_len];
    for (&s, &v) in check_slots.iter().zip(&check_values) {
        sent[s] = v;
        is_check[s] = true;
    }
    let mut frame_iter = frame_sent.iter();
    for (slot, bit) in sent.iter_mut().enumerate() {
        if !is_check[slot] {
            *bit = *frame_iter.next().expect("frame fits the non-check slots");
        }
    }

    let mut idle = survivors.split_off(used_len);
    let mut used = survivors;
    transcript.push(
        Party::Alice,
        EventKind::MessageEncode {
            data: frame_sent.len(),
            check: check_count,
        },
    );
    let assignment: Vec<Option<bool>> = sent.iter().map(|&b| Some(b)).collect();
    encode_and_send(config.variant.message_channel(), &mut used, &assignment, hook, transcript)?;

    let readouts = measure_message_slots(config, &mut used, &early_bob, hook, rng, transcript)?;
    for t in &mut idle {
        hook.on_measure(t.position, &mut t.state)?;
    }
    let positions: Vec<usize> = used.iter().map(|t| t.position).collect();

    match config.variant {
        ProtocolVariant::Qdc1 => {
            let xs: Vec<XOutcome> = readouts
                .iter()
                .map(|r| match r {
                    Readout::Qdc1 { trent_x, .. } => *trent_x,
                    Readout::Qdc2 { .. } => unreachable!(),
                })
                .collect();
            transcript.push(
                Party::Trent,
                EventKind::Announce(Announcement::XOutcomes {
                    positions: positions.clone(),
                    values: x_string(&xs),
                }),
            );
        }
        ProtocolVariant::Qdc2 => {
            let ts: Vec<bool> = readouts
                .iter()
                .map(|r| match r {
                    Readout::Qdc2 { trent_bell, .. } => trent_publish(*trent_bell).0,
                    Readout::Qdc1 { .. } => unreachable!(),
                })
                .collect();
            transcript.push(
                Party::Trent,
                EventKind::Announce(Announcement::TrentBits {
                    positions: positions.clone(),
                    values: bits::to_string(&ts),
                }),
            );
        }
    }

    let decoded: Vec<bool> = readouts.iter().map(Readout::decode).collect();
    transcript.push(Party::Bob, EventKind::CompletionNotice { received: used_len });
    let check_positions: Vec<usize> = check_slots.iter().map(|&s| positions[s]).collect();
    transcript.push(
        Party::Alice,
        EventKind::Announce(Announcement::CheckPositions {
            phase: Phase::Message,
            positions: check_positions.clone(),
        }),
    );
    transcript.push(
        Party::Alice,
        EventKind::Announce(Announcement::CheckValues {
            positions: check_positions,
            values: bits::to_string(&check_values),
        }),
    );

    let result = message_check_and_deliver(
        &decoded,
        &check_slots,
        &check_values,
        config.error_threshold_msg,
        config.codec,
    )?;
    transcript.push(
        Party::Bob,
        EventKind::ErrorRate {
            phase: Phase::Message,
            errors: result.errors,
            checked: result.checked,
            rate: result.error_rate,
        },
    );
    if result.error_rate <= config.error_threshold_msg {
        transcript.push(
            Party::Bob,
            EventKind::EccDecode {
                corrected: result.corrected,
                ok: result.message.is_some(),
            },
        );
    }
    transcript.push(
        Party::Bob,
        EventKind::Verdict {
            verdict: result.verdict,
            error_rate: result.error_rate,
            detail: result.detail.clone(),
        },
    );

    let frame_received = decoded
        .iter()
        .zip(&is_check)
        .filter(|(_, &c)| !c)
        .map(|(&b, _)| b)
        .collect();
    Ok(MessageOutcome {
        positions,
        sent,
        decoded,
        check_slots,
        readouts,
        frame_sent,
        frame_received,
        result,
    })
}

#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub verdict: Verdict,
    pub transcript: Transcript,
    pub auth_error_rate: f64,
    pub auth_checks: Vec<AuthCheck>,
    pub message: Option<MessageOutcome>,
}

/// Run authentication and, if it passes, the configured message protocol.
pub fn run_session(
    config: &SessionConfig,
    message: &[bool],
    keys: &SessionKeys,
    hook: &mut dyn ChannelHook,
) -> Result<SessionOutcome, ProtocolError> {
    config.validate(message.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut transcript = Transcript::new();
    let auth = auth_phase(config, keys, hook, &mut rng, &mut transcript)?;
    if auth.verdict == Verdict::AuthAborted {
        // Eve still reads out whatever she holds.
        let mut survivors = auth.survivors;
        for t in &mut survivors {
            hook.on_measure(t.position, &mut t.state)?;
        }
        return Ok(SessionOutcome {
            verdict: Verdict::AuthAborted,
            transcript,
            auth_error_rate: auth.error_rate,
            auth_checks: auth.checks,
            message: None,
        });
    }
    let outcome = message_phase(config, auth.survivors, message, hook, &mut rng, &mut transcript)?;
    Ok(SessionOutcome {
        verdict: outcome.result.verdict,
        transcript,
        auth_error_rate: auth.error_rate,
        auth_checks: auth.checks,
        message: Some(outcome),
    })
}
