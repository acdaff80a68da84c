//! Simulation of GHZ-based quantum direct communication with a trusted
//! authenticator.
//!
//! Trent distributes key-encoded GHZ triples to Alice and Bob, checks the
//! correlations to authenticate both users, and then assists one of two
//! message protocols. Every stage is exposed so that eavesdropping strategies
//! can be inserted on any quantum channel and their effect measured.

pub mod adversary;
pub mod analysis;
pub mod authkeys;
pub mod bits;
pub mod channel;
pub mod ecc;
pub mod harness;
pub mod protocol;
pub mod statevector;
pub mod transcript;
