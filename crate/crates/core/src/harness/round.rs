//! One end-to-end aggregation round over a client dataset.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{footrule_aggregate, kemeny_bruteforce, kemeny_objective};
use crate::data_ingest::ClientDataset;
use crate::error::{FraError, Result};
use crate::fra_borda::{borda_layout, central_borda, client_borda_message, server_borda_aggregate};
use crate::fra_lehmer::{
    central_lehmer, client_lehmer_message, lehmer_layout, lehmer_part_layouts, server_lehmer_aggregate,
    split_aggregate, truncation_bits,
};
use crate::harness::config::Method;
use crate::mallows::{displacement_p, QuantTable, TableSource};
use crate::perm::{kendall_tau, Permutation};
use crate::secure_agg::{
    deal_masks, mask, plain_sum, tally_cost, unmask_sum, CostLedger, CostParams, Protocol, RingLayout,
};
use crate::seeds::{self, tag};

#[derive(Clone, Debug)]
pub struct RoundParams {
    pub method: Method,
    /// Model φ: drives the Lehmer displacement ratio.
    pub phi: Option<f64>,
    /// Required for `borda_fra`.
    pub table: Option<Arc<QuantTable<f64>>>,
    pub epsilon: f64,
    /// Upper bound on `M` known to clients; the true `M` when absent.
    pub declared_total: Option<usize>,
    /// `false` sums plain messages instead of masked ones.
    pub mask: bool,
    /// Keys the dealer and client tie-breaking streams.
    pub seed: u64,
    /// Known ground truth, if any.
    pub truth: Option<Permutation>,
}

impl RoundParams {
    pub fn new(method: Method, seed: u64) -> Self {
        Self {
            method,
            phi: None,
            table: None,
            epsilon: crate::fra_lehmer::DEFAULT_EPSILON,
            declared_total: None,
            mask: true,
            seed,
            truth: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FraReport {
    pub method: Method,
    pub estimate: Permutation,
    pub num_clients: usize,
    pub total_samples: usize,
    pub kendall_to_truth: Option<u64>,
    pub exact_recovery: Option<bool>,
    /// Mean Kendall τ to the pooled rankings, divided by `N`.
    pub normalized_kemeny: f64,
    pub ledger: Option<CostLedger>,
    /// Whether the sum went through the masked path.
    pub masked: bool,
    pub truncation_bits: Option<u32>,
    /// Ring choices and table provenance.
    pub notes: Vec<String>,
}

struct Outcome {
    estimate: Permutation,
    ledger: Option<CostLedger>,
    masked: bool,
    truncation_bits: Option<u32>,
    notes: Vec<String>,
}

impl Outcome {
    fn central(estimate: Permutation) -> Self {
        Self { estimate, ledger: None, masked: false, truncation_bits: None, notes: Vec::new() }
    }
}

/// Secure-sums client messages. Returns the sum and whether masking was applied;
/// a single client has no one to hide from and is summed directly.
fn aggregate(messages: &[Vec<u64>], layout: &RingLayout, use_mask: bool, seed: u64) -> Result<(Vec<u64>, bool)> {
    if !use_mask || messages.len() < 2 {
        return Ok((plain_sum(messages, layout)?, false));
    }
    let masks = deal_masks(messages.len(), layout, &mut seeds::stream(seed, &[tag::DEALER]))?;
    let masked = messages
        .iter()
        .enumerate()
        .map(|(c, m)| mask(m, masks.for_client(c), layout).map_err(|e| e.in_client(c)))
        .collect::<Result<Vec<_>>>()?;
    Ok((unmask_sum(&masked, layout)?, true))
}

fn borda_round(data: &ClientDataset, params: &RoundParams) -> Result<Outcome> {
    let table = params
        .table
        .as_deref()
        .ok_or_else(|| FraError::InvalidParameter("borda_fra needs a quantization table".into()))?;
    let (n, l) = (data.n(), data.num_clients());
    let layout = borda_layout(n, l);
    let q = layout.moduli()[0];
    let messages = data
        .clients()
        .par_iter()
        .enumerate()
        .map(|(c, client)| {
            client_borda_message(&client.rankings, table, q).map(|m| m.quantized).map_err(|e| e.in_client(c))
        })
        .collect::<Result<Vec<_>>>()?;
    let (sum, masked) = aggregate(&messages, &layout, params.mask, params.seed)?;
    let estimate = server_borda_aggregate::<f64>(&sum, l)?.estimate;

    let cost = CostParams {
        protocol: Protocol::Borda,
        n,
        num_clients: l,
        truncation_bits: 0,
        total_samples: data.total(),
        epsilon: params.epsilon,
        displacement_p: 0.0,
    };
    let ledger = tally_cost(&cost, &[("quantized positions".to_string(), layout)]);
    let mut notes = vec![format!("borda ring: Z_{q}, smallest power of two above N*L = {}", n * l)];
    notes.push(format!("quantization table: {:?}", table.source()));
    if let Some(reason) = table.fallback_reason() {
        notes.push(format!("table fallback: {reason}"));
    }
    Ok(Outcome { estimate, ledger: Some(ledger), masked, truncation_bits: None, notes })
}

fn lehmer_round(data: &ClientDataset, params: &RoundParams) -> Result<Outcome> {
    let (n, l) = (data.n(), data.num_clients());
    let total = params.declared_total.unwrap_or(data.total());
    let (i_bits, p) = if n < 2 {
        (1, 0.0)
    } else {
        let phi = params.phi.ok_or_else(|| FraError::InvalidParameter("lehmer_fra needs the model phi".into()))?;
        let p = displacement_p(n, phi)?.p;
        (truncation_bits(total, n, params.epsilon, p)?, p)
    };
    let layout = lehmer_layout(n, i_bits, l);
    let messages = data
        .clients()
        .par_iter()
        .enumerate()
        .map(|(c, client)| {
            let mut ties = seeds::stream(params.seed, &[tag::TIES, c as u64]);
            client_lehmer_message(&client.rankings, i_bits, &mut ties)
                .map(|m| m.to_wire())
                .map_err(|e| e.in_client(c))
        })
        .collect::<Result<Vec<_>>>()?;
    let (sum, masked) = aggregate(&messages, &layout, params.mask, params.seed)?;
    let (high, hist) = split_aggregate(&sum, n, i_bits)?;
    let estimate = server_lehmer_aggregate(&high, &hist, l, i_bits)?;

    let cost = CostParams {
        protocol: Protocol::Lehmer,
        n,
        num_clients: l,
        truncation_bits: i_bits,
        total_samples: total,
        epsilon: params.epsilon,
        displacement_p: p,
    };
    let (high_layout, hist_layout) = lehmer_part_layouts(n, i_bits, l);
    let ledger = tally_cost(
        &cost,
        &[("high parts".to_string(), high_layout), ("low-bit histograms".to_string(), hist_layout)],
    );
    let notes = vec![
        format!("lehmer truncation: I = {i_bits} from M = {total}, p = {p:.6}"),
        format!("lehmer rings: high parts in Z_(L*2^w) with L = {l}, histograms in Z_{}", l + 1),
    ];
    Ok(Outcome { estimate, ledger: Some(ledger), masked, truncation_bits: Some(i_bits), notes })
}

pub fn run_federated_round(data: &ClientDataset, params: &RoundParams) -> Result<FraReport> {
    let pooled = data.pooled();
    let outcome = match params.method {
        Method::BordaCentral => Outcome::central(central_borda::<f64>(&pooled)?.estimate),
        Method::LehmerCentral => Outcome::central(central_lehmer(&pooled)?),
        Method::Footrule => Outcome::central(footrule_aggregate(&pooled)?.estimate),
        Method::KemenyBruteforce => Outcome::central(kemeny_bruteforce(&pooled)?),
        Method::BordaFra => borda_round(data, params)?,
        Method::LehmerFra => lehmer_round(data, params)?,
    };
    let kendall_to_truth = params.truth.as_ref().map(|t| kendall_tau(t, &outcome.estimate)).transpose()?;
    let normalized_kemeny = kemeny_objective::<f64>(&outcome.estimate, &pooled)?;
    Ok(FraReport {
        method: params.method,
        num_clients: data.num_clients(),
        total_samples: data.total(),
        exact_recovery: kendall_to_truth.map(|d| d == 0),
        kendall_to_truth,
        normalized_kemeny,
        estimate: outcome.estimate,
        ledger: outcome.ledger,
        masked: outcome.masked,
        truncation_bits: outcome.truncation_bits,
        notes: outcome.notes,
    })
}

/// Quantization table provenance for reports.
pub fn describe_table(table: &QuantTable<f64>) -> String {
    match table.source() {
        TableSource::Exact => format!("exact enumeration, N = {}", table.n()),
        TableSource::Recursive => format!("recursion, N = {}", table.n()),
        TableSource::MonteCarlo { num_samples } => format!("Monte Carlo, N = {}, {num_samples} samples", table.n()),
    }
}
