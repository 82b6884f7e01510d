//! Golomb codes for geometrically distributed Lehmer coordinates.
//!
//! Offline codec only: variable-length codewords do not fit the fixed-ring
//! masking used by the secure protocol.

use serde::Serialize;

use crate::error::{FraError, Result};
use crate::fra_lehmer::ceil_log2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GolombCodeword {
    pub bits: Vec<bool>,
    pub k: u64,
}

impl GolombCodeword {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

impl std::fmt::Display for GolombCodeword {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Smallest `K ≥ 1` with `r^K + r^{K+1} ≤ 1`.
pub fn golomb_parameter(ratio: f64) -> Result<u64> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(FraError::InvalidParameter(format!("Golomb ratio must lie in (0,1), got {ratio}")));
    }
    let mut k = 1u64;
    let mut power = ratio;
    while power + power * ratio > 1.0 {
        k += 1;
        power *= ratio;
    }
    Ok(k)
}

fn remainder_width(k: u64) -> Result<u32> {
    if k == 0 {
        return Err(FraError::InvalidParameter("Golomb parameter K must be at least 1".into()));
    }
    Ok(ceil_log2(k as usize))
}

pub fn golomb_encode(value: u64, k: u64) -> Result<GolombCodeword> {
    let width = remainder_width(k)?;
    let (quotient, remainder) = (value / k, value % k);
    let mut bits = Vec::with_capacity(quotient as usize + 1 + width as usize);
    bits.extend(std::iter::repeat_n(false, quotient as usize));
    bits.push(true);
    bits.extend((0..width).rev().map(|b| remainder >> b & 1 == 1));
    Ok(GolombCodeword { bits, k })
}

/// Decodes one codeword from the front of `bits`, returning the value and bits consumed.
pub fn golomb_decode_prefix(bits: &[bool], k: u64) -> Result<(u64, usize)> {
    let width = remainder_width(k)? as usize;
    let quotient = bits
        .iter()
        .position(|&b| b)
        .ok_or_else(|| FraError::MalformedBitstream("unary quotient has no terminator".into()))?;
    let start = quotient + 1;
    let tail = bits
        .get(start..start + width)
        .ok_or_else(|| FraError::MalformedBitstream(format!("remainder needs {width} bits")))?;
    let remainder = tail.iter().fold(0u64, |acc, &b| acc << 1 | b as u64);
    if remainder >= k {
        return Err(FraError::MalformedBitstream(format!("remainder {remainder} not below K = {k}")));
    }
    Ok((quotient as u64 * k + remainder, start + width))
}

/// Decodes exactly one codeword; trailing bits are an error.
pub fn golomb_decode(bits: &[bool], k: u64) -> Result<u64> {
    let (value, used) = golomb_decode_prefix(bits, k)?;
    if used != bits.len() {
        return Err(FraError::MalformedBitstream(format!("{} trailing bits", bits.len() - used)));
    }
    Ok(value)
}

/// Concatenated codewords, one per value.
pub fn golomb_encode_all(values: &[u64], k: u64) -> Result<Vec<bool>> {
    let mut out = Vec::new();
    for &v in values {
        out.extend(golomb_encode(v, k)?.bits);
    }
    Ok(out)
}

pub fn golomb_decode_all(mut bits: &[bool], k: u64) -> Result<Vec<u64>> {
    let mut values = Vec::new();
    while !bits.is_empty() {
        let (v, used) = golomb_decode_prefix(bits, k)?;
        values.push(v);
        bits = &bits[used..];
    }
    Ok(values)
}

/// Upper bound on the mean codeword length for a geometric source with decay `φ`:
/// `K′/(1−φ) + log₂K′ + 1`, where `K′ = golomb_parameter(φ)` and the `+1`
/// accounts for the terminator bit.
pub fn mean_length_bound(phi: f64) -> Result<f64> {
    let k = golomb_parameter(phi)? as f64;
    Ok(k / (1.0 - phi) + k.log2() + 1.0)
}
