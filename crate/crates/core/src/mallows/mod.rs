//! Exact Mallows model: normalizer, pmf, repeated-insertion sampling and the
//! displacement ratio governing Lehmer-coordinate concentration.
//!
//! Under `σ ~ φ^{Kτ(σ₀,σ)} / Z` the displacement coordinates
//! `f_{σ₀,σ}(i)` are independent truncated geometrics on `{0,…,i−1}`, which
//! gives both the closed-form normalizer and an exact sampler.

mod quant;

pub use quant::{
    expected_positions_exact, expected_positions_mc, expected_positions_recursive, pairwise_disorder_recursive,
    quantize, recursive_centroids_unchecked, QuantCache, QuantTable, TableSource, DEFAULT_MC_SAMPLES,
    EXACT_ENUMERATION_LIMIT,
};

use rand::Rng;
use serde::Serialize;

use crate::error::{FraError, Result};
use crate::perm::{kendall_tau, LehmerCode, Permutation};
use crate::scalar::Real;

/// Above this size Z and the pmf are evaluated in log space.
const LOG_SPACE_THRESHOLD: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MallowsParams<T> {
    phi: T,
    centroid: Permutation,
}

impl<T: Real> MallowsParams<T> {
    pub fn new(phi: T, centroid: Permutation) -> Result<Self> {
        check_phi(phi)?;
        Ok(Self { phi, centroid })
    }

    pub fn n(&self) -> usize {
        self.centroid.len()
    }

    pub fn phi(&self) -> T {
        self.phi
    }

    pub fn centroid(&self) -> &Permutation {
        &self.centroid
    }
}

pub(crate) fn check_phi<T: Real>(phi: T) -> Result<()> {
    if !(phi > T::zero() && phi < T::one()) {
        return Err(FraError::InvalidParameter(format!("phi must lie in (0,1), got {phi}")));
    }
    Ok(())
}

/// `Σ_{j=0}^{len−1} φ^j`.
fn geometric_sum<T: Real>(phi: T, len: usize) -> T {
    (0..len).fold((T::zero(), T::one()), |(s, term), _| (s + term, term * phi)).0
}

/// `Z = ∏_{i=1}^{N} Σ_{j=0}^{i−1} φ^j`.
pub fn normalization_z<T: Real>(n: usize, phi: T) -> Result<T> {
    check_phi(phi)?;
    if n > LOG_SPACE_THRESHOLD {
        return Ok(log_normalization_z(n, phi)?.exp());
    }
    Ok((1..=n).map(|i| geometric_sum(phi, i)).fold(T::one(), |acc, s| acc * s))
}

pub fn log_normalization_z<T: Real>(n: usize, phi: T) -> Result<T> {
    check_phi(phi)?;
    Ok((1..=n).map(|i| geometric_sum(phi, i).ln()).sum())
}

pub fn pmf<T: Real>(params: &MallowsParams<T>, sigma: &Permutation) -> Result<T> {
    let d = kendall_tau(params.centroid(), sigma)?;
    let n = params.n();
    if n > LOG_SPACE_THRESHOLD {
        let log_p = T::of_usize(d as usize) * params.phi.ln() - log_normalization_z(n, params.phi)?;
        return Ok(log_p.exp());
    }
    let exponent = i32::try_from(d).expect("small N keeps Kτ in range");
    Ok(params.phi.powi(exponent) / normalization_z(n, params.phi)?)
}

/// Inverse-CDF draw from `P(j) ∝ φ^j` on `{0,…,support−1}`.
pub fn sample_truncated_geometric<T: Real, R: Rng + ?Sized>(support: usize, phi: T, rng: &mut R) -> Result<usize> {
    if support < 1 {
        return Err(FraError::InvalidParameter("truncated geometric needs support >= 1".into()));
    }
    check_phi(phi)?;
    Ok(truncated_geometric_unchecked(support, phi, rng))
}

fn truncated_geometric_unchecked<T: Real, R: Rng + ?Sized>(support: usize, phi: T, rng: &mut R) -> usize {
    if support == 1 {
        return 0;
    }
    // CDF(j) = (1 − φ^{j+1}) / (1 − φ^support); solve for the first j with CDF(j) > u.
    let u = T::of_f64(rng.random::<f64>());
    let tail = phi.powi(support.min(i32::MAX as usize) as i32);
    let target = T::one() - u * (T::one() - tail);
    if target <= T::zero() {
        return support - 1;
    }
    let j = (target.ln() / phi.ln()).floor();
    j.to_usize().map_or(support - 1, |j| j.min(support - 1))
}

/// Independent truncated-geometric displacement coordinates.
pub fn sample_displacements<T: Real, R: Rng + ?Sized>(n: usize, phi: T, rng: &mut R) -> LehmerCode {
    let coords = (1..=n).map(|i| truncated_geometric_unchecked(i, phi, rng)).collect();
    LehmerCode::new(coords).expect("each draw lies in its support")
}

/// Exact draw: displacement vector → Lehmer decode → relabel by the centroid.
pub fn sample<T: Real, R: Rng + ?Sized>(params: &MallowsParams<T>, rng: &mut R) -> Permutation {
    let relative = sample_displacements(params.n(), params.phi, rng).decode();
    // σ(x) = τ(σ₀(x)), so that f_{σ₀,σ} = Lehmer(σ ∘ σ₀⁻¹) = Lehmer(τ).
    relative.compose(params.centroid()).expect("lengths agree")
}

pub fn sample_many<T: Real, R: Rng + ?Sized>(params: &MallowsParams<T>, count: usize, rng: &mut R) -> Vec<Permutation> {
    (0..count).map(|_| sample(params, rng)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DisplacementRatio<T> {
    pub p: T,
    /// `φ + φ² < 1 + φ^N`, equivalently `p < 1`.
    pub condition_holds: bool,
}

/// `p = (Σ_{u=1}^{N−1} φ^u) / (1 + Σ_{u=3}^{N} φ^u)`.
pub fn displacement_p<T: Real>(n: usize, phi: T) -> Result<DisplacementRatio<T>> {
    if n < 2 {
        return Err(FraError::InvalidParameter("displacement ratio needs N >= 2".into()));
    }
    check_phi(phi)?;
    let power = |u: usize| phi.powi(u as i32);
    let numerator: T = (1..n).map(power).sum();
    let denominator = T::one() + (3..=n).map(power).sum::<T>();
    let condition_holds = phi + phi * phi < T::one() + power(n);
    Ok(DisplacementRatio { p: numerator / denominator, condition_holds })
}
