//! Bit-string helpers and the text parsers used at the command line.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty input")]
    Empty,
    #[error("invalid character {ch:?} at offset {offset}")]
    InvalidChar { ch: char, offset: usize },
    #[error("expected \"re,im\", got {0:?}")]
    BadComplex(String),
    #[error("number {0:?} is not finite")]
    NotFinite(String),
}

/// Render bits as a string of `0`/`1`.
pub fn to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Big-endian bits of `value`, `width` long.
pub fn from_uint(value: u64, width: usize) -> Vec<bool> {
    (0..width).rev().map(|i| i < 64 && (value >> i) & 1 == 1).collect()
}

/// Big-endian value of up to 64 bits.
pub fn to_uint(bits: &[bool]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
}

/// Pack bits MSB-first into bytes; the last byte is zero padded.
pub fn pack(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i))))
        .collect()
}

pub fn unpack(bytes: &[u8]) -> Vec<bool> {
    bytes.iter().flat_map(|&byte| (0..8).rev().map(move |i| (byte >> i) & 1 == 1)).collect()
}

/// Parse a message given either as `0x`-prefixed hex or as a plain string of
/// `0`/`1`. Underscores and ASCII whitespace are ignored in both forms.
pub fn parse_message(input: &str) -> Result<Vec<bool>, ParseError> {
    let trimmed = input.trim();
    let (body, hex, base) = match trimmed.strip_prefix("0x").or_else(|| trimmed.strip_prefix("0X")) {
        Some(rest) => (rest, true, trimmed.len() - rest.len()),
        None => (trimmed, false, 0),
    };
    let lead = input.len() - input.trim_start().len();
    let mut bits = Vec::new();
    for (offset, ch) in body.char_indices() {
        if ch == '_' || ch.is_ascii_whitespace() {
            continue;
        }
        let at = lead + base + offset;
        if hex {
            let nibble = ch.to_digit(16).ok_or(ParseError::InvalidChar { ch, offset: at })?;
            bits.extend(from_uint(nibble as u64, 4));
        } else {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err(ParseError::InvalidChar { ch, offset: at }),
            }
        }
    }
    if bits.is_empty() {
        return Err(ParseError::Empty);
    }
    Ok(bits)
}

/// Parse a complex number written as `re,im` (or a bare real `re`).
pub fn parse_complex(input: &str) -> Result<Complex64, ParseError> {
    let trimmed = input.trim();
    if trimmed.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut parts = trimmed.split(',');
    let re_text = parts.next().unwrap_or_default().trim();
    let im_text = parts.next().map(str::trim);
    if parts.next().is_some() {
        return Err(ParseError::BadComplex(trimmed.to_string()));
    }
    let parse = |s: &str| -> Result<f64, ParseError> {
        let v: f64 = s.parse().map_err(|_| ParseError::BadComplex(trimmed.to_string()))?;
        if !v.is_finite() {
            return Err(ParseError::NotFinite(s.to_string()));
        }
        Ok(v)
    };
    let re = parse(re_text)?;
    let im = match im_text {
        Some(s) => parse(s)?,
        None => 0.0,
    };
    Ok(Complex64::new(re, im))
}
