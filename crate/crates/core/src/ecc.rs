//! Classical codecs applied to the message around the quantum channel.
//!
//! A frame is the payload `pad length ++ data ++ zero padding`, cut into
//! `k`-bit blocks and encoded block by block. The pad length takes just enough
//! bits to hold `k - 1` (none for the single-bit codes) and is protected by
//! the code like everything else.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EccError {
    #[error("repetition length {0} must be odd and at least 1")]
    BadRepetition(usize),
    #[error("decoded payload of {len} bits is shorter than the {header}-bit pad header")]
    MissingHeader { len: usize, header: usize },
    #[error("frame of {len} bits is not a multiple of the block length {n}")]
    RaggedBody { len: usize, n: usize },
    #[error("header announces {pad} pad bits, which is not below k = {k} or exceeds the body")]
    BadPad { pad: usize, k: usize },
    #[error("unknown codec {0:?}")]
    UnknownCodec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Codec {
    None,
    Repetition { r: usize },
    Hamming74,
}

impl Codec {
    pub fn repetition(r: usize) -> Result<Self, EccError> {
        if r == 0 || r % 2 == 0 {
            return Err(EccError::BadRepetition(r));
        }
        Ok(Codec::Repetition { r })
    }

    /// Codeword length.
    pub fn n(&self) -> usize {
        match self {
            Codec::None => 1,
            Codec::Repetition { r } => *r,
            Codec::Hamming74 => 7,
        }
    }

    /// Data bits per block.
    pub fn k(&self) -> usize {
        match self {
            Codec::None | Codec::Repetition { .. } => 1,
            Codec::Hamming74 => 4,
        }
    }

    /// Minimum distance.
    pub fn d(&self) -> usize {
        match self {
            Codec::None => 1,
            Codec::Repetition { r } => *r,
            Codec::Hamming74 => 3,
        }
    }

    /// Errors correctable per block.
    pub fn correctable(&self) -> usize {
        (self.d() - 1) / 2
    }

    /// Bits used to record the pad length, enough to hold `k - 1`.
    pub fn header_bits(&self) -> usize {
        (usize::BITS - (self.k() - 1).leading_zeros()) as usize
    }

    /// Frame length for `data_len` data bits.
    pub fn frame_len(&self, data_len: usize) -> usize {
        (self.header_bits() + data_len).div_ceil(self.k()) * self.n()
    }
}

impl fmt::Display for Codec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Codec::None => f.write_str("none"),
            Codec::Repetition { r } => write!(f, "rep{r}"),
            Codec::Hamming74 => f.write_str("hamming74"),
        }
    }
}

impl FromStr for Codec {
    type Err = EccError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Codec::None),
            "hamming74" => Ok(Codec::Hamming74),
            _ => match s.strip_prefix("rep").and_then(|r| r.parse::<usize>().ok()) {
                Some(r) => Codec::repetition(r),
                None => Err(EccError::UnknownCodec(s.to_string())),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub data: Vec<bool>,
    pub corrected_errors: usize,
}

// Systematic [7,4] code: codeword = d1 d2 d3 d4 p1 p2 p3 with
// p1 = d1^d2^d4, p2 = d1^d3^d4, p3 = d2^d3^d4.
const PARITY: [[bool; 4]; 3] = [
    [true, true, false, true],
    [true, false, true, true],
    [false, true, true, true],
];

fn hamming_encode_block(d: &[bool]) -> [bool; 7] {
    let mut out = [false; 7];
    out[..4].copy_from_slice(d);
    for (row, p) in PARITY.iter().zip(out[4..].iter_mut()) {
        *p = row.iter().zip(d).fold(false, |acc, (&h, &b)| acc ^ (h & b));
    }
    out
}

fn hamming_syndrome(block: &[bool]) -> [bool; 3] {
    let mut s = [false; 3];
    for (i, row) in PARITY.iter().enumerate() {
        let mut acc = block[4 + i];
        for (&h, &b) in row.iter().zip(&block[..4]) {
            acc ^= h & b;
        }
        s[i] = acc;
    }
    s
}

/// Position flagged by a syndrome, i.e. the column of the parity-check matrix.
fn hamming_error_position(s: [bool; 3]) -> Option<usize> {
    if s == [false; 3] {
        return None;
    }
    (0..7).find(|&col| {
        let column = if col < 4 {
            [PARITY[0][col], PARITY[1][col], PARITY[2][col]]
        } else {
            let mut e = [false; 3];
            e[col - 4] = true;
            e
        };
        column == s
    })
}

/// Encode one block of exactly `k` data bits.
pub fn encode_block(codec: Codec, block: &[bool]) -> Vec<bool> {
    assert_eq!(block.len(), codec.k(), "block length must equal k");
    match codec {
        Codec::None => block.to_vec(),
        Codec::Repetition { r } => vec![block[0]; r],
        Codec::Hamming74 => hamming_encode_block(block).to_vec(),
    }
}

/// Decode one block of exactly `n` bits; returns the data and the number of bits corrected.
pub fn decode_block(codec: Codec, block: &[bool]) -> (Vec<bool>, usize) {
    assert_eq!(block.len(), codec.n(), "block length must equal n");
    match codec {
        Codec::None => (block.to_vec(), 0),
        Codec::Repetition { r } => {
            let ones = block.iter().filter(|&&b| b).count();
            let bit = ones * 2 > r;
            (vec![bit], if bit { r - ones } else { ones })
        }
        Codec::Hamming74 => {
            let mut word = [false; 7];
            word.copy_from_slice(block);
            // Every nonzero syndrome names a column, so decoding always lands on a codeword.
            let corrected = match hamming_error_position(hamming_syndrome(&word)) {
                None => 0,
                Some(pos) => {
                    word[pos] = !word[pos];
                    1
                }
            };
            (word[..4].to_vec(), corrected)
        }
    }
}

pub fn encode(codec: Codec, data: &[bool]) -> Vec<bool> {
    let k = codec.k();
    let header = codec.header_bits();
    let pad = (k - (header + data.len()) % k) % k;
    let mut payload = bits::from_uint(pad as u64, header);
    payload.extend_from_slice(data);
    payload.resize(payload.len() + pad, false);
    let mut out = Vec::with_capacity(codec.frame_len(data.len()));
    for block in payload.chunks(k) {
        out.extend(encode_block(codec, block));
    }
    out
}

pub fn decode(codec: Codec, received: &[bool]) -> Result<Decoded, EccError> {
    let n = codec.n();
    let k = codec.k();
    if received.len() % n != 0 {
        return Err(EccError::RaggedBody { len: received.len(), n });
    }
    let mut payload = Vec::with_capacity(received.len() / n * k);
    let mut corrected_errors = 0;
    for block in received.chunks(n) {
        let (data, corrected) = decode_block(codec, block);
        payload.extend(data);
        corrected_errors += corrected;
    }
    let header = codec.header_bits();
    if payload.len() < header {
        return Err(EccError::MissingHeader { len: payload.len(), header });
    }
    let pad = bits::to_uint(&payload[..header]) as usize;
    if pad >= k || pad > payload.len() - header {
        return Err(EccError::BadPad { pad, k });
    }
    payload.truncate(payload.len() - pad);
    payload.drain(..header);
    Ok(Decoded {
        data: payload,
        corrected_errors,
    })
}

/// Advisory check `d > floor(2 * error_rate * n) + 1`.
pub fn check_distance_rule(error_rate: f64, n: usize, d: usize) -> bool {
    let bound = (2.0 * error_rate * n as f64 + 1e-9).floor() as usize + 1;
    d > bound
}
