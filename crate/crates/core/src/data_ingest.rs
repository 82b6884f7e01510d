//! Loading ranking datasets from text files and splitting them into clients.
//!
//! Three input formats are understood, all comma separated and 1-based:
//!
//! * **rankings**: one permutation per line, column `i` holding the position
//!   of item `i`. A leading non-integer field is taken as a group label.
//! * **scores**: a header of item names, then one row of reals per individual
//!   (higher is better). Rows with a missing cell are dropped and counted.
//! * **ballots**: one ordered list of item ids per line, best first; unranked
//!   items are appended in seeded random order.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{FraError, Result};
use crate::perm::{partial_to_full, scores_to_ranking, Permutation, TieRule};
use crate::seeds::{self, tag};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Client {
    pub label: String,
    pub rankings: Vec<Permutation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClientDataset {
    n: usize,
    clients: Vec<Client>,
}

impl ClientDataset {
    pub fn new(clients: Vec<Client>) -> Result<Self> {
        let n = clients
            .iter()
            .flat_map(|c| c.rankings.first())
            .map(Permutation::len)
            .next()
            .ok_or(FraError::EmptyInput("clients"))?;
        for (idx, c) in clients.iter().enumerate() {
            if c.rankings.is_empty() {
                return Err(FraError::EmptyInput("client ranking set").in_client(idx));
            }
            if let Some(r) = c.rankings.iter().find(|r| r.len() != n) {
                return Err(FraError::LengthMismatch { expected: n, got: r.len() }.in_client(idx));
            }
        }
        Ok(Self { n, clients })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn clients(&self) -> &[Client] {
        &self.clients
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    /// `M`, the total number of rankings.
    pub fn total(&self) -> usize {
        self.clients.iter().map(|c| c.rankings.len()).sum()
    }

    pub fn pooled(&self) -> Vec<Permutation> {
        self.clients.iter().flat_map(|c| c.rankings.iter().cloned()).collect()
    }

    /// Keeps only the first `k` rankings of every client.
    pub fn truncate_each(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(FraError::InvalidParameter("every client needs at least one ranking".into()));
        }
        Self::new(
            self.clients
                .iter()
                .map(|c| Client { label: c.label.clone(), rankings: c.rankings.iter().take(k).cloned().collect() })
                .collect(),
        )
    }

    /// Writes `label,σ(1),…,σ(N)` lines, readable by [`load_rankings_csv`].
    pub fn write_labeled_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        for c in &self.clients {
            for r in &c.rankings {
                let mut row = vec![c.label.clone()];
                row.extend(r.ranks().iter().map(usize::to_string));
                w.write_record(&row).map_err(|e| csv_error(path, e))?;
            }
        }
        w.flush().map_err(|e| FraError::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> FraError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => FraError::io(path, io),
        other => FraError::Parse { path: path.to_path_buf(), line, detail: format!("{other:?}") },
    }
}

fn parse_error(path: &Path, line: usize, detail: impl Into<String>) -> FraError {
    FraError::Parse { path: path.to_path_buf(), line, detail: detail.into() }
}

fn open_csv(path: &Path, has_headers: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| FraError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LoadedRankings {
    pub rankings: Vec<Permutation>,
    /// Present when every row starts with a label field.
    pub labels: Option<Vec<String>>,
}

/// Loads a rankings CSV. With `invert`, each row is read as an ordered list
/// (column `j` holds the item at position `j`) and converted.
pub fn load_rankings_csv(path: &Path, invert: bool) -> Result<LoadedRankings> {
    let mut reader = open_csv(path, false)?;
    let mut rankings = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut labeled: Option<bool> = None;
    let mut n: Option<usize> = None;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut fields = record.iter();
        let first = fields.clone().next().unwrap_or("");
        let has_label = first.parse::<usize>().is_err();
        match labeled {
            None => labeled = Some(has_label),
            Some(prev) if prev != has_label => {
                return Err(parse_error(path, line, "label column present on some rows only"));
            }
            _ => {}
        }
        if has_label {
            labels.push(fields.next().unwrap_or_default().to_string());
        }
        let values = fields
            .map(|f| f.parse::<usize>().map_err(|_| parse_error(path, line, format!("not a positive integer: {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if *n.get_or_insert(values.len()) != values.len() {
            return Err(parse_error(
                path,
                line,
                format!("expected {} entries, found {}", n.unwrap_or_default(), values.len()),
            ));
        }
        let parsed = if invert {
            if values.contains(&0) {
                Err(FraError::InvalidParameter("item ids are 1-based".into()))
            } else {
                Permutation::from_order(&values.iter().map(|v| v - 1).collect::<Vec<_>>())
            }
        } else {
            Permutation::from_ranks(&values)
        };
        rankings.push(parsed.map_err(|e| parse_error(path, line, e.to_string()))?);
    }
    if rankings.is_empty() {
        return Err(FraError::EmptyInput("rankings file"));
    }
    Ok(LoadedRankings { rankings, labels: labeled.unwrap_or(false).then_some(labels) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoadedScores {
    pub items: Vec<String>,
    pub rankings: Vec<Permutation>,
    /// 1-based data row numbers (header excluded) that were dropped as incomplete.
    pub dropped_rows: Vec<usize>,
}

fn is_missing(cell: &str, sentinel: Option<f64>) -> Option<f64> {
    if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
        return None;
    }
    match (cell.parse::<f64>(), sentinel) {
        (Ok(v), Some(s)) if v == s => None,
        (Ok(v), _) if v.is_nan() => None,
        (Ok(v), _) => Some(v),
        (Err(_), _) => Some(f64::NAN),
    }
}

/// Loads a scores CSV. Empty, `NA`, `NaN` and `missing_sentinel` cells mark
/// the whole row as incomplete.
pub fn load_scores_csv(path: &Path, tie_rule: TieRule, missing_sentinel: Option<f64>) -> Result<LoadedScores> {
    let mut reader = open_csv(path, true)?;
    let items: Vec<String> = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
    if items.is_empty() {
        return Err(FraError::EmptyInput("scores header"));
    }
    let mut rankings = Vec::new();
    let mut dropped_rows = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != items.len() {
            return Err(parse_error(path, line, format!("expected {} cells, found {}", items.len(), record.len())));
        }
        let mut scores = Vec::with_capacity(items.len());
        let mut complete = true;
        for cell in record.iter() {
            match is_missing(cell, missing_sentinel) {
                None => complete = false,
                Some(v) if v.is_nan() => {
                    return Err(parse_error(path, line, format!("non-numeric cell {cell:?}")));
                }
                Some(v) => scores.push(v),
            }
        }
        if !complete {
            dropped_rows.push(row_idx + 1);
            continue;
        }
        let tie = match tie_rule {
            TieRule::ByIndex => TieRule::ByIndex,
            TieRule::SeededRandom(seed) => TieRule::SeededRandom(seeds::derive_seed(seed, &[row_idx as u64])),
        };
        rankings.push(scores_to_ranking(&scores, tie).map_err(|e| parse_error(path, line, e.to_string()))?);
    }
    Ok(LoadedScores { items, rankings, dropped_rows })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LoadedBallots {
    pub rankings: Vec<Permutation>,
    /// Repeated marks removed across all ballots.
    pub duplicate_marks: usize,
}

/// Loads ballots over items `1..=n`. Blank lines are empty ballots; repeated
/// marks keep their first occurrence; unranked items are completed with the
/// stream keyed by `(seed, ballot index)`.
pub fn load_ballots(path: &Path, n: usize, seed: u64) -> Result<LoadedBallots> {
    let file = File::open(path).map_err(|e| FraError::io(path, e))?;
    let mut rankings = Vec::new();
    let mut duplicate_marks = 0;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| FraError::io(path, e))?;
        if line.trim_start().starts_with('#') {
            continue;
        }
        let mut seen = vec![false; n];
        let mut prefix = Vec::new();
        for field in line.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            let item: usize = field
                .parse()
                .map_err(|_| parse_error(path, idx + 1, format!("not an item id: {field:?}")))?;
            if item == 0 || item > n {
                return Err(parse_error(path, idx + 1, format!("item {item} outside 1..={n}")));
            }
            if std::mem::replace(&mut seen[item - 1], true) {
                duplicate_marks += 1;
            } else {
                prefix.push(item);
            }
        }
        let mut rng = seeds::stream(seed, &[tag::BALLOT, rankings.len() as u64]);
        rankings.push(partial_to_full(&prefix, n, &mut rng)?);
    }
    if rankings.is_empty() {
        return Err(FraError::EmptyInput("ballot file"));
    }
    Ok(LoadedBallots { rankings, duplicate_marks })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionStrategy {
    ByGroup { min_size: usize },
    RandomShards { num_clients: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DroppedGroup {
    pub label: String,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub dataset: ClientDataset,
    pub dropped: Vec<DroppedGroup>,
}

impl Partition {
    pub fn dropped_rankings(&self) -> usize {
        self.dropped.iter().map(|d| d.size).sum()
    }
}

pub fn partition_clients(
    rankings: &[Permutation],
    labels: Option<&[String]>,
    strategy: &PartitionStrategy,
) -> Result<Partition> {
    if rankings.is_empty() {
        return Err(FraError::EmptyInput("rankings"));
    }
    match *strategy {
        PartitionStrategy::ByGroup { min_size } => {
            let labels = labels.ok_or_else(|| FraError::InvalidParameter("by_group needs a label column".into()))?;
            if labels.len() != rankings.len() {
                return Err(FraError::LengthMismatch { expected: rankings.len(), got: labels.len() });
            }
            let mut groups: Vec<Client> = Vec::new();
            for (label, r) in labels.iter().zip(rankings) {
                match groups.iter_mut().find(|g| &g.label == label) {
                    Some(g) => g.rankings.push(r.clone()),
                    None => groups.push(Client { label: label.clone(), rankings: vec![r.clone()] }),
                }
            }
            let (kept, small): (Vec<Client>, Vec<Client>) =
                groups.into_iter().partition(|g| g.rankings.len() >= min_size.max(1));
            let dropped = small.into_iter().map(|g| DroppedGroup { size: g.rankings.len(), label: g.label }).collect();
            Ok(Partition { dataset: ClientDataset::new(kept)?, dropped })
        }
        PartitionStrategy::RandomShards { num_clients, seed } => {
            if num_clients == 0 || num_clients > rankings.len() {
                return Err(FraError::InvalidParameter(format!(
                    "cannot split {} rankings into {num_clients} non-empty shards",
                    rankings.len()
                )));
            }
            let mut order: Vec<usize> = (0..rankings.len()).collect();
            order.shuffle(&mut seeds::stream(seed, &[tag::PARTITION]));
            let mut clients: Vec<Client> = (0..num_clients)
                .map(|k| Client { label: format!("shard-{k}"), rankings: Vec::new() })
                .collect();
            for (slot, &idx) in order.iter().enumerate() {
                clients[slot % num_clients].rankings.push(rankings[idx].clone());
            }
            Ok(Partition { dataset: ClientDataset::new(clients)?, dropped: Vec::new() })
        }
    }
}

/// Dataset file formats accepted by the harness and CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Rankings,
    Scores,
    Ballots,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub format: DatasetFormat,
    #[serde(default)]
    pub invert: bool,
    /// Number of candidates; required for ballots.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub missing_sentinel: Option<f64>,
    pub partition: PartitionStrategy,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub incomplete_rows_dropped: usize,
    pub duplicate_marks: usize,
    pub dropped_groups: Vec<DroppedGroup>,
}

/// Loads and partitions a dataset in one step; `seed` drives ballot completion.
pub fn load_dataset(spec: &DatasetSpec, seed: u64) -> Result<(ClientDataset, LoadReport)> {
    let (rankings, labels, incomplete, duplicates) = match spec.format {
        DatasetFormat::Rankings => {
            let loaded = load_rankings_csv(&spec.path, spec.invert)?;
            (loaded.rankings, loaded.labels, 0, 0)
        }
        DatasetFormat::Scores => {
            let loaded = load_scores_csv(&spec.path, TieRule::ByIndex, spec.missing_sentinel)?;
            (loaded.rankings, None, loaded.dropped_rows.len(), 0)
        }
        DatasetFormat::Ballots => {
            let n = spec.n.ok_or_else(|| FraError::Config("ballot datasets need `n`".into()))?;
            let loaded = load_ballots(&spec.path, n, seed)?;
            (loaded.rankings, None, 0, loaded.duplicate_marks)
        }
    };
    let partition = partition_clients(&rankings, labels.as_deref(), &spec.partition)?;
    let report = LoadReport {
        rows_read: rankings.len() + incomplete,
        incomplete_rows_dropped: incomplete,
        duplicate_marks: duplicates,
        dropped_groups: partition.dropped.clone(),
    };
    Ok((partition.dataset, report))
}
