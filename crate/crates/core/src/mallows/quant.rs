//! Expected-position centroids `E_i = E[σ(σ₀⁻¹(i))]` used as Borda quantization levels.
//!
//! Three routes compute them: exhaustive enumeration (N ≤ 8), Monte Carlo,
//! and a closed recursion over pairwise disorder probabilities. The
//! recursion is only trusted after it reproduces enumeration; otherwise
//! [`QuantTable::for_model`] falls back to Monte Carlo.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::Serialize;

use super::{check_phi, sample_displacements};
use crate::error::{FraError, Result};
use crate::perm::{all_permutations, Permutation};
use crate::scalar::Real;
use crate::seeds;

pub const EXACT_ENUMERATION_LIMIT: usize = 8;
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum TableSource {
    Exact,
    Recursive,
    MonteCarlo { num_samples: usize },
}

impl TableSource {
    fn method_name(&self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Recursive => "recursive",
            Self::MonteCarlo { .. } => "monte_carlo",
        }
    }

    fn num_samples(&self) -> usize {
        match self {
            Self::MonteCarlo { num_samples } => *num_samples,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantTable<T> {
    phi: T,
    centroids: Vec<T>,
    thresholds: Vec<T>,
    source: TableSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    std_errors: Option<Vec<T>>,
    /// Why a cheaper route was rejected, if one was.
    #[serde(skip_serializing_if = "Option::is_none")]
    fallback_reason: Option<String>,
}

impl<T: Real> QuantTable<T> {
    pub fn from_centroids(phi: T, centroids: Vec<T>, source: TableSource) -> Result<Self> {
        check_phi(phi)?;
        if centroids.is_empty() {
            return Err(FraError::EmptyInput("centroids"));
        }
        if centroids.iter().any(|c| !c.is_finite()) {
            return Err(FraError::InvalidParameter("non-finite centroid".into()));
        }
        if let Some(j) = centroids.windows(2).position(|w| w[0] >= w[1]) {
            return Err(FraError::InvalidParameter(format!(
                "centroids not strictly increasing at {}: {} >= {}",
                j + 1,
                centroids[j],
                centroids[j + 1]
            )));
        }
        let two = T::one() + T::one();
        let thresholds = centroids.windows(2).map(|w| (w[0] + w[1]) / two).collect();
        Ok(Self { phi, centroids, thresholds, source, std_errors: None, fallback_reason: None })
    }

    /// Table for a Mallows model of size `n`: enumeration when `n` is small,
    /// otherwise the recursion if it validates, otherwise Monte Carlo with a
    /// stream that depends only on `(n, φ)`.
    pub fn for_model(n: usize, phi: T, mc_samples: usize) -> Result<Self> {
        if n <= EXACT_ENUMERATION_LIMIT {
            return expected_positions_exact(n, phi);
        }
        match expected_positions_recursive(n, phi) {
            Ok(table) => Ok(table),
            Err(err @ FraError::RecursionMismatch { .. }) => {
                let mut rng = seeds::stream(0, &[seeds::tag::QUANT, n as u64, phi.as_f64().to_bits()]);
                let mut table = expected_positions_mc(n, phi, mc_samples, &mut rng)?;
                table.fallback_reason = Some(err.to_string());
                Ok(table)
            }
            Err(other) => Err(other),
        }
    }

    pub fn n(&self) -> usize {
        self.centroids.len()
    }

    pub fn phi(&self) -> T {
        self.phi
    }

    pub fn centroids(&self) -> &[T] {
        &self.centroids
    }

    pub fn thresholds(&self) -> &[T] {
        &self.thresholds
    }

    pub fn source(&self) -> TableSource {
        self.source
    }

    pub fn std_errors(&self) -> Option<&[T]> {
        self.std_errors.as_deref()
    }

    pub fn fallback_reason(&self) -> Option<&str> {
        self.fallback_reason.as_deref()
    }

    pub fn min_gap(&self) -> Option<T> {
        self.centroids.windows(2).map(|w| w[1] - w[0]).reduce(T::min)
    }

    /// `(1 − φ)/(1 + φ)`, the guaranteed separation of consecutive exact centroids.
    pub fn gap_lower_bound(&self) -> T {
        (T::one() - self.phi) / (T::one() + self.phi)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut text = format!(
            "{} {} {} {}\n",
            self.n(),
            self.phi,
            self.source.method_name(),
            self.source.num_samples()
        );
        for c in &self.centroids {
            text.push_str(&format!("{c}\n"));
        }
        fs::write(path, text).map_err(|e| FraError::io(path, e))
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| FraError::io(path, e))?;
        let parse_err = |line: usize, detail: String| FraError::Parse { path: path.to_path_buf(), line, detail };
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or_default().split_whitespace().collect();
        let [n, phi, method, samples] = header[..] else {
            return Err(parse_err(1, "expected header `N phi method num_samples`".into()));
        };
        let n: usize = n.parse().map_err(|e| parse_err(1, format!("N: {e}")))?;
        let phi: f64 = phi.parse().map_err(|e| parse_err(1, format!("phi: {e}")))?;
        let num_samples: usize = samples.parse().map_err(|e| parse_err(1, format!("num_samples: {e}")))?;
        let source = match method {
            "exact" => TableSource::Exact,
            "recursive" => TableSource::Recursive,
            "monte_carlo" => TableSource::MonteCarlo { num_samples },
            other => return Err(parse_err(1, format!("unknown method `{other}`"))),
        };
        let centroids = lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map(T::of_f64)
                    .map_err(|e| parse_err(i + 2, format!("centroid: {e}")))
            })
            .collect::<Result<Vec<T>>>()?;
        if centroids.len() != n {
            return Err(parse_err(1, format!("header declares N = {n} but {} centroids follow", centroids.len())));
        }
        Self::from_centroids(T::of_f64(phi), centroids, source)
    }
}

/// Nearest centroid, 1-based; a value exactly on a threshold goes to the smaller index.
pub fn quantize<T: Real>(table: &QuantTable<T>, value: T) -> Result<usize> {
    if !value.is_finite() {
        return Err(FraError::InvalidParameter(format!("cannot quantize {value}")));
    }
    Ok(table.thresholds.partition_point(|&t| t < value) + 1)
}

/// `E_i = Σ_σ P(σ) σ(i)` with `σ₀ = e`, by enumerating `S_N`.
pub fn expected_positions_exact<T: Real>(n: usize, phi: T) -> Result<QuantTable<T>> {
    check_phi(phi)?;
    if n == 0 {
        return Err(FraError::EmptyInput("N = 0"));
    }
    if n > EXACT_ENUMERATION_LIMIT {
        return Err(FraError::TooLarge { n, limit: EXACT_ENUMERATION_LIMIT });
    }
    let mut z = T::zero();
    let mut weighted = vec![T::zero(); n];
    for sigma in all_permutations(n) {
        let w = phi.powi(sigma.lehmer().total() as i32);
        z += w;
        for (acc, &p) in weighted.iter_mut().zip(sigma.positions()) {
            *acc += w * T::of_usize(p + 1);
        }
    }
    let centroids = weighted.into_iter().map(|s| s / z).collect();
    QuantTable::from_centroids(phi, centroids, TableSource::Exact)
}

/// Empirical mean positions over `num_samples` draws with identity centroid.
pub fn expected_positions_mc<T: Real, R: Rng + ?Sized>(
    n: usize,
    phi: T,
    num_samples: usize,
    rng: &mut R,
) -> Result<QuantTable<T>> {
    check_phi(phi)?;
    if num_samples == 0 {
        return Err(FraError::InvalidParameter("num_samples must be at least 1".into()));
    }
    if n == 0 {
        return Err(FraError::EmptyInput("N = 0"));
    }
    let mut sum = vec![0u64; n];
    let mut sum_sq = vec![0u64; n];
    for _ in 0..num_samples {
        let sigma: Permutation = sample_displacements(n, phi, rng).decode();
        for ((s, q), &p) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(sigma.positions()) {
            let r = (p + 1) as u64;
            *s += r;
            *q += r * r;
        }
    }
    let count = num_samples as f64;
    let mut centroids = Vec::with_capacity(n);
    let mut std_errors = Vec::with_capacity(n);
    for (&s, &q) in sum.iter().zip(&sum_sq) {
        let mean = s as f64 / count;
        let var = if num_samples > 1 { (q as f64 - count * mean * mean).max(0.0) / (count - 1.0) } else { 0.0 };
        centroids.push(T::of_f64(mean));
        std_errors.push(T::of_f64((var / count).sqrt()));
    }
    let mut table = QuantTable::from_centroids(phi, centroids, TableSource::MonteCarlo { num_samples })?;
    table.std_errors = Some(std_errors);
    Ok(table)
}

/// The disorder term `E[T^i_{(i+1)1}]`: starts at `φ/(1+φ)` for `i = 1` and
/// follows `(φ^i + Σ_{j=1}^{i−1} φ^j · prev) / Σ_{j=1}^{i} φ^j`.
pub fn pairwise_disorder_recursive<T: Real>(i: usize, phi: T) -> Result<T> {
    check_phi(phi)?;
    if i == 0 {
        return Err(FraError::InvalidParameter("disorder index starts at 1".into()));
    }
    Ok(disorder_terms(i, phi)[i])
}

/// `terms[0] = 0` (an item is never inverted with itself), `terms[i]` as above.
fn disorder_terms<T: Real>(upto: usize, phi: T) -> Vec<T> {
    let mut terms = vec![T::zero(); upto + 1];
    if upto == 0 {
        return terms;
    }
    terms[1] = phi / (T::one() + phi);
    let mut partial = phi; // Σ_{j=1}^{i−1} φ^j
    for i in 2..=upto {
        let phi_i = phi.powi(i as i32);
        terms[i] = (phi_i + partial * terms[i - 1]) / (partial + phi_i);
        partial += phi_i;
    }
    terms
}

/// Assembles `E_i = Σ_{j=1}^{i} (E[T^j_{(j+1)1}] − E[T^{N−j}_{(N−j+1)1}])` from the recursion
/// without any validation.
pub fn recursive_centroids_unchecked<T: Real>(n: usize, phi: T) -> Result<Vec<T>> {
    check_phi(phi)?;
    if n == 0 {
        return Err(FraError::EmptyInput("N = 0"));
    }
    if n == 1 {
        return Ok(vec![T::one()]);
    }
    let terms = disorder_terms(n, phi);
    let mut acc = T::zero();
    Ok((1..=n)
        .map(|i| {
            acc += terms[i] - terms[n - i];
            acc
        })
        .collect())
}

fn recursion_tolerance<T: Real>() -> f64 {
    (1e3 * T::epsilon().as_f64()).max(1e-12)
}

/// Recursive centroids, accepted only if the recursion reproduces
/// enumeration at `min(N, 8)` within `1e-12`.
pub fn expected_positions_recursive<T: Real>(n: usize, phi: T) -> Result<QuantTable<T>> {
    let check_n = n.min(EXACT_ENUMERATION_LIMIT);
    let exact = expected_positions_exact(check_n, phi)?;
    let candidate = recursive_centroids_unchecked(check_n, phi)?;
    let max_abs_diff = exact
        .centroids()
        .iter()
        .zip(&candidate)
        .map(|(a, b)| (*a - *b).abs().as_f64())
        .fold(0.0, f64::max);
    if max_abs_diff > recursion_tolerance::<T>() {
        return Err(FraError::RecursionMismatch { n: check_n, max_abs_diff });
    }
    let centroids = if check_n == n { candidate } else { recursive_centroids_unchecked(n, phi)? };
    QuantTable::from_centroids(phi, centroids, TableSource::Recursive)
}

/// On-disk cache of tables keyed by `(N, φ)`.
#[derive(Clone, Debug)]
pub struct QuantCache {
    dir: PathBuf,
}

impl QuantCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, n: usize, phi: f64) -> PathBuf {
        self.dir.join(format!("quant_n{n}_phi{phi}.txt"))
    }

    pub fn get_or_build(&self, n: usize, phi: f64, mc_samples: usize) -> Result<QuantTable<f64>> {
        let path = self.path_for(n, phi);
        if path.exists() {
            let table = QuantTable::read_from(&path)?;
            if table.n() == n && table.phi() == phi {
                return Ok(table);
            }
        }
        let table = QuantTable::for_model(n, phi, mc_samples)?;
        fs::create_dir_all(&self.dir).map_err(|e| FraError::io(&self.dir, e))?;
        table.write_to(&path)?;
        Ok(table)
    }
}
