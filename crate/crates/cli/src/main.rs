use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fra_core::baselines::kemeny_objective;
use fra_core::data_ingest::{load_dataset, DatasetFormat, DatasetSpec, PartitionStrategy};
use fra_core::harness::{
    run_experiment_sweep, run_federated_round, synthetic_clients, CentroidSpec, ExperimentConfig, Method,
    RoundParams, SyntheticSource,
};
use fra_core::mallows::{QuantTable, DEFAULT_MC_SAMPLES};
use fra_core::perm::{kendall_tau, spearman_footrule};
use fra_core::{MallowsParams64, Permutation};

/// Federated rank aggregation toolkit.
#[derive(Parser)]
#[command(name = "fra", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample Mallows rankings for L clients and write them as a labeled rankings CSV.
    Synth(SynthArgs),
    /// Write the quantization table (expected positions) for N and phi.
    Centroids(CentroidArgs),
    /// Run one aggregation round on a dataset.
    Aggregate(AggregateArgs),
    /// Run a sweep described by a TOML config.
    Experiment(ExperimentArgs),
    /// Score a candidate ranking against a dataset.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    phi: f64,
    /// identity, reverse, random, or a comma-separated 1-based rank list.
    #[arg(long, default_value = "identity")]
    centroid: String,
    #[arg(long, default_value_t = 1)]
    clients: usize,
    #[arg(long)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CentroidArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    phi: f64,
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    mc_samples: usize,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Rankings,
    Scores,
    Ballots,
}

impl From<Format> for DatasetFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Rankings => DatasetFormat::Rankings,
            Format::Scores => DatasetFormat::Scores,
            Format::Ballots => DatasetFormat::Ballots,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "rankings")]
    format: Format,
    /// Rows are ordered item lists rather than per-item positions.
    #[arg(long)]
    invert: bool,
    /// Number of candidates (ballot files).
    #[arg(long)]
    items: Option<usize>,
    /// Score value meaning "not rated".
    #[arg(long)]
    missing: Option<f64>,
}

impl DataArgs {
    fn spec(&self, partition: PartitionStrategy) -> DatasetSpec {
        DatasetSpec {
            path: self.input.clone(),
            format: self.format.into(),
            invert: self.invert,
            n: self.items,
            missing_sentinel: self.missing,
            partition,
        }
    }
}

#[derive(Args)]
struct AggregateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Model phi for quantization tables and Lehmer truncation.
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long, default_value_t = fra_core::fra_lehmer::DEFAULT_EPSILON)]
    epsilon: f64,
    /// Split the rankings into this many random shards.
    #[arg(long, conflicts_with = "partition")]
    clients: Option<usize>,
    /// `group`, `group:<min_size>` or `shards:<L>`; a single client by default.
    #[arg(long)]
    partition: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sum plain messages instead of masked ones.
    #[arg(long)]
    no_mask: bool,
    /// Known ground truth (comma-separated ranks) for distance reporting.
    #[arg(long)]
    truth: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    mc_samples: usize,
    /// Write the full report as JSON here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Candidate ranking, comma-separated 1-based ranks.
    #[arg(long)]
    candidate: String,
    #[arg(long)]
    truth: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: fra_core::FraError| e.to_string())
}

fn parse_ranks(s: &str) -> Result<Permutation> {
    let ranks = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad rank {t:?}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Permutation::from_ranks(&ranks)?)
}

fn parse_partition(spec: Option<&str>, clients: Option<usize>, seed: u64) -> Result<PartitionStrategy> {
    if let Some(l) = clients {
        return Ok(PartitionStrategy::RandomShards { num_clients: l, seed });
    }
    let Some(spec) = spec else {
        return Ok(PartitionStrategy::RandomShards { num_clients: 1, seed });
    };
    let (kind, arg) = spec.split_once(':').map_or((spec, None), |(k, a)| (k, Some(a)));
    let number = |a: Option<&str>, default: usize| -> Result<usize> {
        a.map_or(Ok(default), |a| a.parse().with_context(|| format!("bad partition size {a:?}")))
    };
    match kind {
        "group" => Ok(PartitionStrategy::ByGroup { min_size: number(arg, 1)? }),
        "shards" => Ok(PartitionStrategy::RandomShards { num_clients: number(arg, 1)?, seed }),
        other => bail!("unknown partition {other:?}; use group[:min_size] or shards:<L>"),
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn synth(args: SynthArgs) -> Result<()> {
    let centroid = match args.centroid.as_str() {
        "identity" | "reverse" | "random" => CentroidSpec::Named(args.centroid.clone()),
        list => CentroidSpec::Explicit(parse_ranks(list)?.ranks()),
    };
    let source = SyntheticSource {
        n: args.n,
        phi: args.phi,
        centroid: centroid.clone(),
        num_clients: args.clients,
        samples_per_client: args.samples,
    };
    let truth = centroid.resolve(args.n, args.seed)?;
    let model = MallowsParams64::new(args.phi, truth.clone())?;
    let data = synthetic_clients(&source, &model, args.clients, args.samples, args.seed, 0)?;
    data.write_labeled_csv(&args.out)?;
    eprintln!("wrote {} rankings around {truth} to {}", data.total(), args.out.display());
    Ok(())
}

fn centroids(args: CentroidArgs) -> Result<()> {
    let table = QuantTable::<f64>::for_model(args.n, args.phi, args.mc_samples)?;
    if let Some(reason) = table.fallback_reason() {
        eprintln!("note: {reason}; using Monte Carlo estimates");
    }
    match &args.out {
        Some(path) => table.write_to(path)?,
        None => {
            for c in table.centroids() {
                println!("{c}");
            }
        }
    }
    Ok(())
}

fn aggregate(args: AggregateArgs) -> Result<()> {
    let partition = parse_partition(args.partition.as_deref(), args.clients, args.seed)?;
    let (data, load) = load_dataset(&args.data.spec(partition), args.seed)?;
    let table = match (args.method, args.phi) {
        (Method::BordaFra, Some(phi)) => Some(Arc::new(QuantTable::for_model(data.n(), phi, args.mc_samples)?)),
        (Method::BordaFra | Method::LehmerFra, None) => bail!("--phi is required for {}", args.method),
        _ => None,
    };
    let params = RoundParams {
        method: args.method,
        phi: args.phi,
        table,
        epsilon: args.epsilon,
        declared_total: None,
        mask: !args.no_mask,
        seed: args.seed,
        truth: args.truth.as_deref().map(parse_ranks).transpose()?,
    };
    let report = run_federated_round(&data, &params)?;
    eprintln!("estimate: {}", report.estimate);
    let json = serde_json::json!({ "load": load, "report": report });
    write_or_print(args.report.as_deref(), &serde_json::to_string_pretty(&json)?)
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let config = ExperimentConfig::load(&args.config)?;
    let report = run_experiment_sweep(&config)?;
    report.write_csv(&args.csv)?;
    if let Some(json) = &args.json {
        report.write_json(json)?;
    }
    eprintln!("{} rows written to {}", report.rows.len(), args.csv.display());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let (data, _) = load_dataset(
        &args.data.spec(PartitionStrategy::RandomShards { num_clients: 1, seed: args.seed }),
        args.seed,
    )?;
    let pooled = data.pooled();
    let candidate = parse_ranks(&args.candidate)?;
    let mut kendall_total = 0u64;
    let mut footrule_total = 0u64;
    for r in &pooled {
        kendall_total += kendall_tau(&candidate, r)?;
        footrule_total += spearman_footrule(&candidate, r)?;
    }
    let truth = args.truth.as_deref().map(parse_ranks).transpose()?;
    let kendall_to_truth = truth.as_ref().map(|t| kendall_tau(t, &candidate)).transpose()?;
    let out = serde_json::json!({
        "rankings": pooled.len(),
        "n": data.n(),
        "normalized_kemeny": kemeny_objective::<f64>(&candidate, &pooled)?,
        "mean_kendall": kendall_total as f64 / pooled.len() as f64,
        "mean_footrule": footrule_total as f64 / pooled.len() as f64,
        "kendall_to_truth": kendall_to_truth,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Centroids(a) => centroids(a),
        Command::Aggregate(a) => aggregate(a),
        Command::Experiment(a) => experiment(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
