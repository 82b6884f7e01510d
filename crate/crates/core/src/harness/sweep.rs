//! Parameter sweeps: one row per grid point and method, averaged over trials.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::data_ingest::{load_dataset, Client, ClientDataset, LoadReport};
use crate::error::{FraError, Result};
use crate::harness::config::{AxisName, ExperimentConfig, Method, SourceConfig, SyntheticSource};
use crate::harness::round::{describe_table, run_federated_round, RoundParams};
use crate::mallows::{sample_many, MallowsParams, QuantTable};
use crate::perm::Permutation;
use crate::seeds::{self, tag};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub value: usize,
    pub trial: usize,
    pub method: Method,
    pub kendall_to_truth: Option<u64>,
    pub exact_recovery: Option<bool>,
    pub normalized_kemeny: f64,
    pub total_bits: Option<u64>,
    pub truncation_bits: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: AxisName,
    pub value: usize,
    pub method: Method,
    pub trials: usize,
    pub num_clients: usize,
    pub total_samples: usize,
    pub mean_kendall: Option<f64>,
    pub exact_recovery_rate: Option<f64>,
    pub mean_normalized_kemeny: f64,
    pub bits_per_round: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub truth: Option<Permutation>,
    pub notes: Vec<String>,
    pub load: Option<LoadReport>,
    pub rows: Vec<SweepRow>,
    pub records: Vec<TrialRecord>,
}

const CSV_HEADER: [&str; 10] = [
    "axis",
    "value",
    "method",
    "trials",
    "num_clients",
    "total_samples",
    "mean_kendall",
    "exact_recovery_rate",
    "mean_normalized_kemeny",
    "bits_per_round",
];

fn fixed(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.6}"))
}

impl SweepReport {
    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.axis.name().to_string(),
                r.value.to_string(),
                r.method.name().to_string(),
                r.trials.to_string(),
                r.num_clients.to_string(),
                r.total_samples.to_string(),
                fixed(r.mean_kendall),
                fixed(r.exact_recovery_rate),
                fixed(Some(r.mean_normalized_kemeny)),
                r.bits_per_round.map_or_else(String::new, |b| b.to_string()),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| FraError::io(path, e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()).map_err(|e| FraError::io(path, e))
    }
}

/// Client data for one synthetic trial. Streams are keyed by `(trial, client)`
/// only, so a client's first `m` samples are shared by every larger `m`.
pub fn synthetic_clients(
    source: &SyntheticSource,
    model: &MallowsParams<f64>,
    num_clients: usize,
    samples_per_client: usize,
    master_seed: u64,
    trial: usize,
) -> Result<ClientDataset> {
    debug_assert_eq!(model.n(), source.n);
    ClientDataset::new(
        (0..num_clients)
            .map(|c| {
                let mut rng = seeds::stream(master_seed, &[tag::DATA, trial as u64, c as u64]);
                Client { label: format!("client-{c}"), rankings: sample_many(model, samples_per_client, &mut rng) }
            })
            .collect(),
    )
}

enum Prepared {
    Synthetic { source: SyntheticSource, model: MallowsParams<f64> },
    Dataset { full: ClientDataset },
}

pub fn run_experiment_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let values = config.axis.resolve()?;
    let mut notes = Vec::new();
    let mut load = None;
    let (prepared, n, truth) = match &config.source {
        SourceConfig::Synthetic(source) => {
            let truth = source.centroid.resolve(source.n, config.seed)?;
            let model = MallowsParams::new(source.phi, truth.clone())?;
            (Prepared::Synthetic { source: source.clone(), model }, source.n, Some(truth))
        }
        SourceConfig::Dataset(spec) => {
            let (full, report) = load_dataset(spec, config.seed)?;
            let n = full.n();
            notes.push("kemeny objective is measured against the full pooled dataset".to_string());
            load = Some(report);
            (Prepared::Dataset { full }, n, None)
        }
    };

    let table = if config.methods.contains(&Method::BordaFra) {
        let phi = config.model_phi().ok_or_else(|| FraError::Config("borda_fra needs quant_phi".into()))?;
        let table = QuantTable::for_model(n, phi, config.mc_samples)?;
        notes.push(format!("quantization table: {}", describe_table(&table)));
        if let Some(reason) = table.fallback_reason() {
            notes.push(format!("quantization fallback: {reason}"));
        }
        Some(Arc::new(table))
    } else {
        None
    };

    let jobs: Vec<(usize, usize)> =
        values.iter().flat_map(|&v| (0..config.trials).map(move |t| (v, t))).collect();
    let per_job: Vec<(usize, usize, Vec<TrialRecord>)> = jobs
        .par_iter()
        .map(|&(value, trial)| -> Result<(usize, usize, Vec<TrialRecord>)> {
            let (data, eval_against) = match &prepared {
                Prepared::Synthetic { source, model } => {
                    let (l, m) = match config.axis.name {
                        AxisName::SamplesPerClient => (source.num_clients, value),
                        AxisName::NumClients => (value, source.samples_per_client),
                        AxisName::PrefixSamples => unreachable!("validated"),
                    };
                    (synthetic_clients(source, model, l, m, config.seed, trial)?, None)
                }
                Prepared::Dataset { full } => (full.truncate_each(value)?, Some(full.pooled())),
            };
            let round_seed = seeds::derive_seed(config.seed, &[trial as u64, value as u64]);
            let mut records = Vec::with_capacity(config.methods.len());
            let mut shape = (0, 0);
            for &method in &config.methods {
                let params = RoundParams {
                    method,
                    phi: config.model_phi(),
                    table: table.clone(),
                    epsilon: config.epsilon,
                    declared_total: config.declared_total,
                    mask: config.mask,
                    seed: round_seed,
                    truth: truth.clone(),
                };
                let report = run_federated_round(&data, &params)?;
                let normalized_kemeny = match &eval_against {
                    Some(all) => crate::baselines::kemeny_objective(&report.estimate, all)?,
                    None => report.normalized_kemeny,
                };
                shape = (report.num_clients, report.total_samples);
                records.push(TrialRecord {
                    value,
                    trial,
                    method,
                    kendall_to_truth: report.kendall_to_truth,
                    exact_recovery: report.exact_recovery,
                    normalized_kemeny,
                    total_bits: report.ledger.map(|l| l.total_bits),
                    truncation_bits: report.truncation_bits,
                });
            }
            Ok((shape.0, shape.1, records))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (vi, &value) in values.iter().enumerate() {
        let block = &per_job[vi * config.trials..(vi + 1) * config.trials];
        let (num_clients, total_samples) = (block[0].0, block[0].1);
        for (mi, &method) in config.methods.iter().enumerate() {
            let recs: Vec<&TrialRecord> = block.iter().map(|(_, _, r)| &r[mi]).collect();
            let count = recs.len() as f64;
            let mean_kendall = truth
                .as_ref()
                .map(|_| recs.iter().map(|r| r.kendall_to_truth.unwrap_or(0) as f64).sum::<f64>() / count);
            let exact_recovery_rate = truth
                .as_ref()
                .map(|_| recs.iter().filter(|r| r.exact_recovery == Some(true)).count() as f64 / count);
            rows.push(SweepRow {
                axis: config.axis.name,
                value,
                method,
                trials: config.trials,
                num_clients,
                total_samples,
                mean_kendall,
                exact_recovery_rate,
                mean_normalized_kemeny: recs.iter().map(|r| r.normalized_kemeny).sum::<f64>() / count,
                bits_per_round: recs[0].total_bits,
            });
        }
    }
    let records = per_job.into_iter().flat_map(|(_, _, r)| r).collect();
    Ok(SweepReport { config: config.clone(), truth, notes, load, rows, records })
}
