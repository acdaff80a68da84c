//! Authentication keys: `h(ID, c) || h(ID, c+1) || ...` and the I/H mapping.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bits;
use crate::statevector::Gate1Q;

/// Default counter width in bits.
pub const DEFAULT_COUNTER_BITS: u8 = 32;
/// Default hash output length in bits.
pub const DEFAULT_KEY_BLOCK_BITS: usize = 128;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyError {
    #[error("identity must contain at least one bit")]
    EmptyIdentity,
    #[error("requested key length must be positive")]
    ZeroLength,
    #[error("counter width {0} must be between 1 and 64")]
    BadCounterWidth(u8),
    #[error("counter value {value} does not fit in {width} bits")]
    CounterOverflow { value: u64, width: u8 },
    #[error("hash output length must be positive")]
    EmptyHashOutput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UserRole {
    Alice,
    Bob,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserIdentity {
    bits: Vec<bool>,
    role: UserRole,
}

impl UserIdentity {
    pub fn new(bits: Vec<bool>, role: UserRole) -> Result<Self, KeyError> {
        if bits.is_empty() {
            return Err(KeyError::EmptyIdentity);
        }
        Ok(Self { bits, role })
    }

    /// Identity taken from the bytes of a UTF-8 name.
    pub fn from_name(name: &str, role: UserRole) -> Result<Self, KeyError> {
        Self::new(bits::unpack(name.as_bytes()), role)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn role(&self) -> UserRole {
        self.role
    }
}

/// A hash-call counter rendered as a fixed-width bit string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counter {
    value: u64,
    width: u8,
}

impl Counter {
    pub fn new(value: u64, width: u8) -> Result<Self, KeyError> {
        if width == 0 || width > 64 {
            return Err(KeyError::BadCounterWidth(width));
        }
        if width < 64 && value >> width != 0 {
            return Err(KeyError::CounterOverflow { value, width });
        }
        Ok(Self { value, width })
    }

    pub fn with_default_width(value: u64) -> Result<Self, KeyError> {
        Self::new(value, DEFAULT_COUNTER_BITS)
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn width(&self) -> u8 {
        self.width
    }

    pub fn to_bits(&self) -> Vec<bool> {
        bits::from_uint(self.value, self.width as usize)
    }

    pub fn next(&self) -> Result<Self, KeyError> {
        let value = self.value.checked_add(1).ok_or(KeyError::CounterOverflow {
            value: u64::MAX,
            width: self.width,
        })?;
        Self::new(value, self.width)
    }
}

/// A deterministic one-way function `h: {0,1}* x {0,1}^c -> {0,1}^l`.
pub trait HashContract: Send + Sync {
    /// Output length `l`.
    fn output_bits(&self) -> usize;

    /// Must return exactly `output_bits()` bits.
    fn hash(&self, identity: &[bool], counter: &Counter) -> Vec<bool>;
}

/// SHA-256 in counter mode, truncated or extended to `l` bits.
#[derive(Debug, Clone)]
pub struct Sha256Hash {
    output_bits: usize,
}

impl Sha256Hash {
    pub fn new(output_bits: usize) -> Result<Self, KeyError> {
        if output_bits == 0 {
            return Err(KeyError::EmptyHashOutput);
        }
        Ok(Self { output_bits })
    }
}

impl Default for Sha256Hash {
    fn default() -> Self {
        Self {
            output_bits: DEFAULT_KEY_BLOCK_BITS,
        }
    }
}

impl HashContract for Sha256Hash {
    fn output_bits(&self) -> usize {
        self.output_bits
    }

    fn hash(&self, identity: &[bool], counter: &Counter) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.output_bits);
        let mut block = 0u32;
        while out.len() < self.output_bits {
            let mut hasher = Sha256::new();
            hasher.update(b"ghz-qdc/auth-key/v1");
            hasher.update((identity.len() as u64).to_be_bytes());
            hasher.update(bits::pack(identity));
            hasher.update([counter.width()]);
            hasher.update(counter.value().to_be_bytes());
            hasher.update(block.to_be_bytes());
            out.extend(bits::unpack(&hasher.finalize()));
            block += 1;
        }
        out.truncate(self.output_bits);
        out
    }
}

/// Test stub: output bit `j` is `pattern[(j + c) mod len]`, independent of the identity.
#[derive(Debug, Clone)]
pub struct PatternHash {
    pattern: Vec<bool>,
    output_bits: usize,
}

impl PatternHash {
    pub fn new(pattern: Vec<bool>, output_bits: usize) -> Result<Self, KeyError> {
        if pattern.is_empty() || output_bits == 0 {
            return Err(KeyError::EmptyHashOutput);
        }
        Ok(Self { pattern, output_bits })
    }
}

impl HashContract for PatternHash {
    fn output_bits(&self) -> usize {
        self.output_bits
    }

    fn hash(&self, _identity: &[bool], counter: &Counter) -> Vec<bool> {
        let len = self.pattern.len() as u64;
        let start = counter.value() % len;
        (0..self.output_bits as u64)
            .map(|j| self.pattern[((start + j % len) % len) as usize])
            .collect()
    }
}

/// Where a slice of key bits came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeySegment {
    pub counter: u64,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthKey {
    bits: Vec<bool>,
    provenance: Vec<KeySegment>,
}

impl AuthKey {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, index: usize) -> Option<bool> {
        self.bits.get(index).copied()
    }

    pub fn provenance(&self) -> &[KeySegment] {
        &self.provenance
    }

    /// Counter values consumed, in order.
    pub fn counters(&self) -> Vec<u64> {
        self.provenance.iter().map(|s| s.counter).collect()
    }
}

/// Concatenate `h(ID, c), h(ID, c+1), ...` until at least `needed` bits exist.
pub fn derive_key(
    identity: &UserIdentity,
    hash: &dyn HashContract,
    start: Counter,
    needed: usize,
) -> Result<AuthKey, KeyError> {
    if needed == 0 {
        return Err(KeyError::ZeroLength);
    }
    let mut bits = Vec::with_capacity(needed + hash.output_bits());
    let mut provenance = Vec::new();
    let mut counter = start;
    loop {
        let block = hash.hash(identity.bits(), &counter);
        if block.is_empty() {
            return Err(KeyError::EmptyHashOutput);
        }
        provenance.push(KeySegment {
            counter: counter.value(),
            offset: bits.len(),
            len: block.len(),
        });
        bits.extend(block);
        if bits.len() >= needed {
            break;
        }
        counter = counter.next()?;
    }
    Ok(AuthKey { bits, provenance })
}

/// Number of hash blocks needed to cover `needed` bits.
pub fn blocks_for(needed: usize, block_bits: usize) -> usize {
    needed.div_ceil(block_bits.max(1))
}

/// `0 -> I`, `1 -> H`.
pub fn unitary_for_key_bit(bit: bool) -> Gate1Q {
    if bit {
        Gate1Q::hadamard()
    } else {
        Gate1Q::identity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::{GateName, PureState, TOLERANCE};
    use proptest::prelude::*;

    fn alice() -> UserIdentity {
        UserIdentity::from_name("alice", UserRole::Alice).unwrap()
    }

    #[test]
    fn single_block_when_needed_equals_l() {
        let h = Sha256Hash::default();
        let start = Counter::with_default_width(7).unwrap();
        let key = derive_key(&alice(), &h, start, 128).unwrap();
        assert_eq!(key.len(), 128);
        assert_eq!(key.counters(), vec![7]);
        assert_eq!(key.bits(), &h.hash(alice().bits(), &start)[..]);
    }

    #[test]
    fn one_more_bit_needs_second_block() {
        let h = Sha256Hash::default();
        let key = derive_key(&alice(), &h, Counter::with_default_width(7).unwrap(), 129).unwrap();
        assert_eq!(key.len(), 256);
        assert_eq!(key.counters(), vec![7, 8]);
    }

    #[test]
    fn stub_concatenation_by_hand() {
        // pattern 1,1,0 with l = 4; counter 2 starts at pattern[2].
        let h = PatternHash::new(vec![true, true, false], 4).unwrap();
        let key = derive_key(&alice(), &h, Counter::new(2, 8).unwrap(), 6).unwrap();
        // c=2: 0,1,1,0   c=3: 1,1,0,1
        assert_eq!(bits::to_string(key.bits()), "01101101");
        assert_eq!(
            key.provenance(),
            &[
                KeySegment { counter: 2, offset: 0, len: 4 },
                KeySegment { counter: 3, offset: 4, len: 4 }
            ]
        );
    }

    #[test]
    fn counter_overflow_is_reported() {
        let h = PatternHash::new(vec![true], 4).unwrap();
        let start = Counter::new(255, 8).unwrap();
        assert_eq!(derive_key(&alice(), &h, start, 4).unwrap().counters(), vec![255]);
        assert!(matches!(
            derive_key(&alice(), &h, start, 5),
            Err(KeyError::CounterOverflow { value: 256, width: 8 })
        ));
        assert!(Counter::new(256, 8).is_err());
        assert!(Counter::new(1, 0).is_err());
    }

    #[test]
    fn argument_validation() {
        assert_eq!(UserIdentity::new(vec![], UserRole::Bob), Err(KeyError::EmptyIdentity));
        let h = Sha256Hash::default();
        assert_eq!(
            derive_key(&alice(), &h, Counter::with_default_width(0).unwrap(), 0),
            Err(KeyError::ZeroLength)
        );
    }

    #[test]
    fn identities_give_different_keys() {
        let h = Sha256Hash::default();
        let bob = UserIdentity::from_name("bob", UserRole::Bob).unwrap();
        let c = Counter::with_default_width(0).unwrap();
        assert_ne!(h.hash(alice().bits(), &c), h.hash(bob.bits(), &c));
    }

    #[test]
    fn key_bit_gates() {
        assert_eq!(unitary_for_key_bit(false).name, GateName::I);
        assert_eq!(unitary_for_key_bit(true).name, GateName::H);
    }

    proptest! {
        #[test]
        fn coverage_bounds(needed in 1usize..1000, l in 1usize..300, start in 0u64..1000) {
            let h = Sha256Hash::new(l).unwrap();
            let key = derive_key(&alice(), &h, Counter::with_default_width(start).unwrap(), needed).unwrap();
            prop_assert!(key.len() >= needed);
            prop_assert!(key.len() < needed + l);
            prop_assert_eq!(key.provenance().len(), blocks_for(needed, l));
            let again = derive_key(&alice(), &h, Counter::with_default_width(start).unwrap(), needed).unwrap();
            prop_assert_eq!(key, again);
        }

        #[test]
        fn encode_then_decode_is_identity(key in proptest::collection::vec(any::<bool>(), 3)) {
            let mut s = PureState::ghz3();
            for (q, &k) in key.iter().enumerate() {
                s.apply_gate(&unitary_for_key_bit(k), q).unwrap();
            }
            for (q, &k) in key.iter().enumerate() {
                s.apply_gate(&unitary_for_key_bit(k), q).unwrap();
            }
            prop_assert!(s.distance_up_to_phase(&PureState::ghz3()) < TOLERANCE);
        }
    }
}
