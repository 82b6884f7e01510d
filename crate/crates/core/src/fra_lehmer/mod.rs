//! Federated Lehmer-majority aggregation.
//!
//! Each client takes the coordinate-wise majority `v(i)` of its local Lehmer
//! codes and splits it at `I` bits: the high part `v(i) >> I` travels as a
//! ring element the server averages, the low part travels as a one-hot
//! histogram of width `2^I` the server sums and takes the mode of.
//!
//! Wire layout per client, coordinate by coordinate (`i = 1..=N`): the high
//! element when its width is non-zero, then the `2^I` histogram entries.
//! High elements live in `Z_{L·2^w}` so the masked sum unmasks to the exact
//! integer sum; histogram entries live in `Z_{L+1}`.

pub mod golomb;

use rand::Rng;
use serde::Serialize;

use crate::error::{FraError, Result};
use crate::perm::{LehmerCode, Permutation};
use crate::secure_agg::RingLayout;

/// Default concentration budget `ε`.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// `⌈log₂ x⌉` for `x ≥ 1`.
pub fn ceil_log2(x: usize) -> u32 {
    debug_assert!(x >= 1);
    usize::BITS - (x - 1).leading_zeros()
}

/// `I = ⌈log₂(2·log₂(M·N²/ε)/log₂(1/p) + 1)⌉`, floored at 1.
pub fn truncation_bits_unclamped(total_samples: usize, n: usize, epsilon: f64, p: f64) -> Result<u32> {
    if total_samples == 0 || n == 0 {
        return Err(FraError::InvalidParameter("M and N must be at least 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(FraError::InvalidParameter(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(FraError::InvalidParameter(format!(
            "displacement ratio p = {p} must lie in (0,1) (needs phi + phi^2 < 1 + phi^N)"
        )));
    }
    let spread = 2.0 * (total_samples as f64 * (n * n) as f64 / epsilon).log2() / (1.0 / p).log2() + 1.0;
    let raw = spread.log2().ceil();
    Ok(if raw < 1.0 { 1 } else { raw as u32 })
}

/// Truncation bits clamped to `max(⌈log₂ N⌉, 1)`; beyond that every
/// coordinate fits entirely in the histogram.
pub fn truncation_bits(total_samples: usize, n: usize, epsilon: f64, p: f64) -> Result<u32> {
    Ok(truncation_bits_unclamped(total_samples, n, epsilon, p)?.min(ceil_log2(n).max(1)))
}

/// Width of the high part of 1-based coordinate `i`: `max(⌈log₂ i⌉ − I, 0)`.
pub fn high_width(i: usize, i_bits: u32) -> u32 {
    ceil_log2(i).saturating_sub(i_bits)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplitCoordinate {
    pub high: u64,
    pub high_width: u32,
    /// One-hot (before masking) of the low `I` bits, length `2^I`.
    pub low_hist: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LehmerSplitMessage {
    pub i_bits: u32,
    pub coords: Vec<SplitCoordinate>,
}

impl LehmerSplitMessage {
    pub fn from_code(code: &LehmerCode, i_bits: u32) -> Self {
        let hist_len = 1usize << i_bits;
        let low_mask = (hist_len - 1) as u64;
        let coords = code
            .coords()
            .iter()
            .enumerate()
            .map(|(idx, &v)| {
                let v = v as u64;
                let mut low_hist = vec![0; hist_len];
                low_hist[(v & low_mask) as usize] = 1;
                SplitCoordinate { high: v >> i_bits, high_width: high_width(idx + 1, i_bits), low_hist }
            })
            .collect();
        Self { i_bits, coords }
    }

    /// Flattened in wire order (see module docs).
    pub fn to_wire(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for c in &self.coords {
            if c.high_width > 0 {
                out.push(c.high);
            }
            out.extend_from_slice(&c.low_hist);
        }
        out
    }

    /// The value this message encodes at 0-based coordinate `idx`.
    pub fn value(&self, idx: usize) -> u64 {
        let c = &self.coords[idx];
        let low = c.low_hist.iter().position(|&x| x == 1).expect("one-hot") as u64;
        (c.high << self.i_bits) + low
    }
}

pub fn high_modulus(width: u32, num_clients: usize) -> u64 {
    (num_clients as u64) << width
}

pub fn lehmer_layout(n: usize, i_bits: u32, num_clients: usize) -> RingLayout {
    let hist_len = 1usize << i_bits;
    let mut moduli = Vec::new();
    for i in 1..=n {
        let w = high_width(i, i_bits);
        if w > 0 {
            moduli.push(high_modulus(w, num_clients));
        }
        moduli.extend(std::iter::repeat_n(num_clients as u64 + 1, hist_len));
    }
    RingLayout::new(moduli).expect("moduli >= 2 for L >= 1")
}

/// High-part and histogram-part layouts separately, for the cost ledger.
pub fn lehmer_part_layouts(n: usize, i_bits: u32, num_clients: usize) -> (RingLayout, RingLayout) {
    let high = (1..=n)
        .map(|i| high_width(i, i_bits))
        .filter(|&w| w > 0)
        .map(|w| high_modulus(w, num_clients))
        .collect();
    let hist = RingLayout::uniform(n << i_bits, num_clients as u64 + 1).expect("L + 1 >= 2");
    (RingLayout::new(high).expect("moduli >= 2"), hist)
}

/// Splits an unmasked wire-order sum into per-coordinate high sums and histograms.
pub fn split_aggregate(sum: &[u64], n: usize, i_bits: u32) -> Result<(Vec<u64>, Vec<Vec<u64>>)> {
    let hist_len = 1usize << i_bits;
    let mut high = Vec::with_capacity(n);
    let mut hists = Vec::with_capacity(n);
    let mut at = 0;
    for i in 1..=n {
        if high_width(i, i_bits) > 0 {
            high.push(*sum.get(at).ok_or(FraError::LengthMismatch { expected: at + 1, got: sum.len() })?);
            at += 1;
        } else {
            high.push(0);
        }
        let hist = sum
            .get(at..at + hist_len)
            .ok_or(FraError::LengthMismatch { expected: at + hist_len, got: sum.len() })?;
        hists.push(hist.to_vec());
        at += hist_len;
    }
    if at != sum.len() {
        return Err(FraError::LengthMismatch { expected: at, got: sum.len() });
    }
    Ok((high, hists))
}

/// How equal-count candidates are resolved when taking a majority.
pub enum MajorityTies<'a, R: ?Sized> {
    Smallest,
    Random(&'a mut R),
}

/// Coordinate-wise most frequent Lehmer value.
pub fn coordinate_majority<R: Rng + ?Sized>(
    codes: &[LehmerCode],
    mut ties: MajorityTies<'_, R>,
) -> Result<LehmerCode> {
    let first = codes.first().ok_or(FraError::EmptyInput("local rankings"))?;
    let n = first.len();
    if let Some(c) = codes.iter().find(|c| c.len() != n) {
        return Err(FraError::LengthMismatch { expected: n, got: c.len() });
    }
    let mut majority = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    for idx in 0..n {
        counts.clear();
        counts.resize(idx + 1, 0usize);
        for c in codes {
            counts[c.coords()[idx]] += 1;
        }
        let best = *counts.iter().max().expect("non-empty");
        let winner = match &mut ties {
            MajorityTies::Smallest => counts.iter().position(|&c| c == best).expect("max exists"),
            MajorityTies::Random(rng) => {
                let tied: Vec<usize> = (0..=idx).filter(|&v| counts[v] == best).collect();
                if tied.len() == 1 {
                    tied[0]
                } else {
                    tied[rng.random_range(0..tied.len())]
                }
            }
        };
        majority.push(winner);
    }
    LehmerCode::new(majority)
}

/// Centralized Lehmer aggregation on pooled data: majority with ties to the smaller value.
pub fn central_lehmer(rankings: &[Permutation]) -> Result<Permutation> {
    let codes: Vec<LehmerCode> = rankings.iter().map(Permutation::lehmer).collect();
    Ok(coordinate_majority::<rand_chacha::ChaCha8Rng>(&codes, MajorityTies::Smallest)?.decode())
}

pub fn client_lehmer_message<R: Rng + ?Sized>(
    local: &[Permutation],
    i_bits: u32,
    rng_for_ties: &mut R,
) -> Result<LehmerSplitMessage> {
    let codes: Vec<LehmerCode> = local.iter().map(Permutation::lehmer).collect();
    let majority = coordinate_majority(&codes, MajorityTies::Random(rng_for_ties))?;
    Ok(LehmerSplitMessage::from_code(&majority, i_bits))
}

pub fn server_lehmer_aggregate(
    summed_high: &[u64],
    summed_hist: &[Vec<u64>],
    num_clients: usize,
    i_bits: u32,
) -> Result<Permutation> {
    let n = summed_hist.len();
    if n == 0 {
        return Err(FraError::EmptyInput("histograms"));
    }
    if summed_high.len() != n {
        return Err(FraError::LengthMismatch { expected: n, got: summed_high.len() });
    }
    if num_clients == 0 {
        return Err(FraError::InvalidParameter("L must be at least 1".into()));
    }
    let l = num_clients as u64;
    let hist_len = 1usize << i_bits;
    let mut coords = Vec::with_capacity(n);
    for (idx, (hist, &high_sum)) in summed_hist.iter().zip(summed_high).enumerate() {
        if hist.len() != hist_len {
            return Err(FraError::LengthMismatch { expected: hist_len, got: hist.len() });
        }
        let total: u64 = hist.iter().sum();
        if total != l {
            return Err(FraError::CorruptedAggregate(format!(
                "histogram of coordinate {} sums to {total}, expected L = {l}",
                idx + 1
            )));
        }
        // Closest integer to high_sum / L, halves rounded up.
        let high = (2 * high_sum + l) / (2 * l);
        let best = *hist.iter().max().expect("non-empty");
        let low = hist.iter().position(|&c| c == best).expect("max exists") as u64;
        let value = (high << i_bits) + low;
        coords.push((value as usize).min(idx));
    }
    Ok(LehmerCode::new(coords)?.decode())
}
