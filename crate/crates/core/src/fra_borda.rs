//! Borda aggregation by mean positions, centralized and federated.
//!
//! In the federated variant each client quantizes its local mean positions to
//! the nearest expected-position centroid and only those indices travel, so
//! the local sample count never reaches the server.

use serde::Serialize;

use crate::error::{FraError, Result};
use crate::mallows::{quantize, QuantTable};
use crate::perm::Permutation;
use crate::scalar::Real;
use crate::secure_agg::RingLayout;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BordaClientMessage {
    /// 1-based centroid indices, one per item; repeats allowed.
    pub quantized: Vec<u64>,
    pub ring_modulus: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BordaEstimate<T> {
    pub estimate: Permutation,
    pub averages: Vec<T>,
}

/// Smallest power of two strictly above `N·L`, the largest possible coordinate sum.
pub fn borda_ring_modulus(n: usize, num_clients: usize) -> u64 {
    ((n * num_clients) as u64 + 1).next_power_of_two()
}

pub fn borda_layout(n: usize, num_clients: usize) -> RingLayout {
    RingLayout::uniform(n, borda_ring_modulus(n, num_clients)).expect("modulus >= 2")
}

pub(crate) fn column_sums(rankings: &[Permutation]) -> Result<Vec<u64>> {
    let first = rankings.first().ok_or(FraError::EmptyInput("rankings"))?;
    let n = first.len();
    let mut sums = vec![0u64; n];
    for r in rankings {
        if r.len() != n {
            return Err(FraError::LengthMismatch { expected: n, got: r.len() });
        }
        for (s, &p) in sums.iter_mut().zip(r.positions()) {
            *s += (p + 1) as u64;
        }
    }
    Ok(sums)
}

/// Ranks items by increasing key, ties to the smaller item index.
pub(crate) fn argsort_ranking(keys: &[u64]) -> Permutation {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by_key(|&i| (keys[i], i));
    Permutation::from_order(&order).expect("argsort yields a bijection")
}

fn averages<T: Real>(sums: &[u64], count: usize) -> Vec<T> {
    let c = T::of_usize(count);
    sums.iter().map(|&s| T::of_usize(s as usize) / c).collect()
}

pub fn central_borda<T: Real>(rankings: &[Permutation]) -> Result<BordaEstimate<T>> {
    let sums = column_sums(rankings)?;
    // Equal denominators: ordering the integer sums orders the means exactly.
    Ok(BordaEstimate { estimate: argsort_ranking(&sums), averages: averages(&sums, rankings.len()) })
}

pub fn client_borda_message<T: Real>(
    local: &[Permutation],
    table: &QuantTable<T>,
    ring_modulus: u64,
) -> Result<BordaClientMessage> {
    let sums = column_sums(local)?;
    if sums.len() != table.n() {
        return Err(FraError::LengthMismatch { expected: table.n(), got: sums.len() });
    }
    let quantized = averages::<T>(&sums, local.len())
        .into_iter()
        .map(|a| quantize(table, a).map(|q| q as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(BordaClientMessage { quantized, ring_modulus })
}

pub fn server_borda_aggregate<T: Real>(unmasked_sum: &[u64], num_clients: usize) -> Result<BordaEstimate<T>> {
    if num_clients == 0 {
        return Err(FraError::InvalidParameter("L must be at least 1".into()));
    }
    if unmasked_sum.is_empty() {
        return Err(FraError::EmptyInput("aggregate"));
    }
    let n = unmasked_sum.len() as u64;
    let l = num_clients as u64;
    if let Some(i) = unmasked_sum.iter().position(|&s| s < l || s > n * l) {
        return Err(FraError::CorruptedAggregate(format!(
            "coordinate {} sums to {}, outside [{l}, {}]",
            i + 1,
            unmasked_sum[i],
            n * l
        )));
    }
    Ok(BordaEstimate { estimate: argsort_ranking(unmasked_sum), averages: averages(unmasked_sum, num_clients) })
}
