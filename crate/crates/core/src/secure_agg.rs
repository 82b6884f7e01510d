//! Zero-sum masking over explicit integer rings, plus the communication ledger.
//!
//! Masks come from a single trusted dealer stream: the first `L − 1` clients
//! receive uniform masks and the last receives the negated sum, so the masks
//! cancel coordinate-wise modulo each ring. The layout (one modulus per
//! coordinate) is owned by the calling protocol.

use rand::Rng;
use serde::Serialize;

use crate::error::{FraError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RingLayout {
    moduli: Vec<u64>,
}

impl RingLayout {
    pub fn new(moduli: Vec<u64>) -> Result<Self> {
        if let Some(i) = moduli.iter().position(|&q| q < 2) {
            return Err(FraError::InvalidParameter(format!("ring modulus at coordinate {i} must be >= 2")));
        }
        Ok(Self { moduli })
    }

    pub fn uniform(len: usize, modulus: u64) -> Result<Self> {
        Self::new(vec![modulus; len])
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    /// Bits on the wire for one message in this layout.
    pub fn message_bits(&self) -> u64 {
        self.moduli.iter().map(|&q| ring_bits(q)).sum()
    }

    fn check(&self, v: &[u64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(FraError::LengthMismatch { expected: self.len(), got: v.len() });
        }
        for (coord, (&value, &modulus)) in v.iter().zip(&self.moduli).enumerate() {
            if value >= modulus {
                return Err(FraError::OutOfRing { coord, value, modulus });
            }
        }
        Ok(())
    }
}

/// `⌈log₂ q⌉`: bits needed for one element of `Z_q`.
pub fn ring_bits(q: u64) -> u64 {
    debug_assert!(q >= 1);
    u64::from(64 - (q - 1).leading_zeros())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskSet {
    layout: RingLayout,
    masks: Vec<Vec<u64>>,
}

impl MaskSet {
    pub fn layout(&self) -> &RingLayout {
        &self.layout
    }

    pub fn masks(&self) -> &[Vec<u64>] {
        &self.masks
    }

    pub fn for_client(&self, client: usize) -> &[u64] {
        &self.masks[client]
    }

    pub fn num_clients(&self) -> usize {
        self.masks.len()
    }
}

pub fn deal_masks<R: Rng + ?Sized>(num_clients: usize, layout: &RingLayout, rng: &mut R) -> Result<MaskSet> {
    if num_clients < 2 {
        return Err(FraError::InvalidParameter(format!(
            "masking needs at least 2 clients, got {num_clients}"
        )));
    }
    let mut masks: Vec<Vec<u64>> = (0..num_clients - 1)
        .map(|_| layout.moduli.iter().map(|&q| rng.random_range(0..q)).collect())
        .collect();
    let last = layout
        .moduli
        .iter()
        .enumerate()
        .map(|(c, &q)| {
            let s = masks.iter().fold(0u64, |acc, m| add_mod(acc, m[c], q));
            (q - s) % q
        })
        .collect();
    masks.push(last);
    Ok(MaskSet { layout: layout.clone(), masks })
}

fn add_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 + b as u128) % q as u128) as u64
}

pub fn mask(message: &[u64], mask: &[u64], layout: &RingLayout) -> Result<Vec<u64>> {
    layout.check(message)?;
    layout.check(mask)?;
    Ok(message.iter().zip(mask).zip(&layout.moduli).map(|((&m, &z), &q)| add_mod(m, z, q)).collect())
}

/// Coordinate-wise `Σ masked mod q`.
pub fn unmask_sum(masked: &[Vec<u64>], layout: &RingLayout) -> Result<Vec<u64>> {
    if masked.is_empty() {
        return Err(FraError::EmptyInput("masked messages"));
    }
    let mut acc = vec![0u64; layout.len()];
    for (client, msg) in masked.iter().enumerate() {
        layout.check(msg).map_err(|e| e.in_client(client))?;
        for ((a, &x), &q) in acc.iter_mut().zip(msg).zip(&layout.moduli) {
            *a = add_mod(*a, x, q);
        }
    }
    Ok(acc)
}

/// Plain integer sum, used by the mask-free debug path.
pub fn plain_sum(messages: &[Vec<u64>], layout: &RingLayout) -> Result<Vec<u64>> {
    if messages.is_empty() {
        return Err(FraError::EmptyInput("messages"));
    }
    let mut acc = vec![0u64; layout.len()];
    for (client, msg) in messages.iter().enumerate() {
        layout.check(msg).map_err(|e| e.in_client(client))?;
        for (a, &x) in acc.iter_mut().zip(msg) {
            *a += x;
        }
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Borda,
    Lehmer,
}

/// Inputs for the closed-form communication expressions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostParams {
    pub protocol: Protocol,
    pub n: usize,
    pub num_clients: usize,
    /// Truncation bits (Lehmer only).
    pub truncation_bits: u32,
    /// Total sample count and concentration budget feeding the Lehmer closed form.
    pub total_samples: usize,
    pub epsilon: f64,
    pub displacement_p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostPart {
    pub name: String,
    pub bits_per_client: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostLedger {
    pub protocol: Protocol,
    pub per_client_bits: Vec<u64>,
    pub total_bits: u64,
    /// Per-client breakdown by message part.
    pub parts: Vec<CostPart>,
    /// Closed form of the implemented rings; equals `total_bits`.
    pub implemented_closed_form_bits: u64,
    /// The asymptotic expression as stated for the protocol, evaluated numerically.
    pub reference_formula_bits: f64,
}

/// Bit count of `L` messages laid out as `parts`, each part a ring layout.
pub fn tally_cost(params: &CostParams, parts: &[(String, RingLayout)]) -> CostLedger {
    let parts: Vec<CostPart> = parts
        .iter()
        .map(|(name, layout)| CostPart { name: name.clone(), bits_per_client: layout.message_bits() })
        .collect();
    let per_client: u64 = parts.iter().map(|p| p.bits_per_client).sum();
    let per_client_bits = vec![per_client; params.num_clients];
    CostLedger {
        protocol: params.protocol,
        total_bits: per_client_bits.iter().sum(),
        per_client_bits,
        parts,
        implemented_closed_form_bits: implemented_closed_form(params),
        reference_formula_bits: reference_formula(params),
    }
}

fn ceil_log2(x: u64) -> u64 {
    ring_bits(x)
}

/// Borda: `L·N·⌈log₂(N·L+1)⌉`. Lehmer: `L·(Σ_i [w_i>0](w_i + ⌈log₂ L⌉) + N·2^I·⌈log₂(L+1)⌉)`
/// with `w_i = max(⌈log₂ i⌉ − I, 0)`.
pub fn implemented_closed_form(params: &CostParams) -> u64 {
    let n = params.n as u64;
    let l = params.num_clients as u64;
    match params.protocol {
        Protocol::Borda => l * n * ceil_log2(n * l + 1),
        Protocol::Lehmer => {
            let i_bits = u64::from(params.truncation_bits);
            let high: u64 = (1..=n)
                .map(|i| ceil_log2(i).saturating_sub(i_bits))
                .filter(|&w| w > 0)
                .map(|w| w + ceil_log2(l))
                .sum();
            l * (high + n * (1u64 << i_bits) * ceil_log2(l + 1))
        }
    }
}

/// Borda: `N·L·log₂ N`. Lehmer: `L·(N·(log₂N − log₂X) + X·log₂L)` with
/// `X = 2·log₂(M·N²/ε)/log₂(1/p) + 1`.
pub fn reference_formula(params: &CostParams) -> f64 {
    let n = params.n as f64;
    let l = params.num_clients as f64;
    match params.protocol {
        Protocol::Borda => n * l * n.log2(),
        Protocol::Lehmer => {
            let m = params.total_samples as f64;
            let x = 2.0 * (m * n * n / params.epsilon).log2() / (1.0 / params.displacement_p).log2() + 1.0;
            l * (n * (n.log2() - x.log2()) + x * l.log2())
        }
    }
}
