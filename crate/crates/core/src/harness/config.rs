//! TOML experiment configuration.
//!
//! ```toml
//! methods = ["borda_central", "borda_fra", "lehmer_central", "lehmer_fra"]
//! trials = 100
//! seed = 7
//! epsilon = 0.05          # Lehmer concentration budget
//! mask = true             # false runs the unmasked debug path
//! # quant_phi = 0.3       # φ for quantization tables and I; defaults to source.phi
//! # declared_total = 5000 # upper bound on M known to clients; defaults to the true M
//! # mc_samples = 100000
//!
//! [source]
//! kind = "synthetic"
//! n = 10
//! phi = 0.3
//! centroid = "identity"   # "identity", "reverse", "random" or an explicit 1-based list
//! num_clients = 10
//! samples_per_client = 10
//!
//! [axis]
//! name = "samples_per_client" # or "num_clients"; datasets use "prefix_samples"
//! start = 1
//! stop = 50
//! step = 1                    # or: values = [1, 5, 20]
//! ```
//!
//! A dataset source replaces `[source]` with
//! `kind = "dataset"`, `path`, `format` (`rankings`, `scores`, `ballots`),
//! optional `invert`, `n` (ballots) and `missing_sentinel`, and a
//! `partition = { kind = "by_group", min_size = 20 }` or
//! `partition = { kind = "random_shards", num_clients = 50, seed = 1 }`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data_ingest::DatasetSpec;
use crate::error::{FraError, Result};
use crate::fra_lehmer::DEFAULT_EPSILON;
use crate::mallows::DEFAULT_MC_SAMPLES;
use crate::perm::Permutation;
use crate::seeds::{self, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BordaCentral,
    BordaFra,
    LehmerCentral,
    LehmerFra,
    Footrule,
    KemenyBruteforce,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::BordaCentral,
        Method::BordaFra,
        Method::LehmerCentral,
        Method::LehmerFra,
        Method::Footrule,
        Method::KemenyBruteforce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::BordaCentral => "borda_central",
            Method::BordaFra => "borda_fra",
            Method::LehmerCentral => "lehmer_central",
            Method::LehmerFra => "lehmer_fra",
            Method::Footrule => "footrule",
            Method::KemenyBruteforce => "kemeny_bruteforce",
        }
    }

    pub fn is_federated(self) -> bool {
        matches!(self, Method::BordaFra | Method::LehmerFra)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = FraError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| FraError::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CentroidSpec {
    Named(String),
    Explicit(Vec<usize>),
}

impl CentroidSpec {
    /// `"random"` draws once from the master seed, so every trial and grid
    /// point shares the same centroid.
    pub fn resolve(&self, n: usize, master_seed: u64) -> Result<Permutation> {
        match self {
            CentroidSpec::Named(name) => match name.as_str() {
                "identity" => Ok(Permutation::identity(n)),
                "reverse" => Ok(Permutation::reversal(n)),
                "random" => {
                    use rand::seq::SliceRandom;
                    let mut pos: Vec<usize> = (0..n).collect();
                    pos.shuffle(&mut seeds::stream(master_seed, &[tag::CENTROID]));
                    Permutation::from_zero_based(pos)
                }
                other => Err(FraError::Config(format!("unknown centroid {other:?}"))),
            },
            CentroidSpec::Explicit(ranks) => {
                if ranks.len() != n {
                    return Err(FraError::Config(format!("centroid has {} entries, n = {n}", ranks.len())));
                }
                Permutation::from_ranks(ranks)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSource {
    pub n: usize,
    pub phi: f64,
    pub centroid: CentroidSpec,
    pub num_clients: usize,
    pub samples_per_client: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceConfig {
    Synthetic(SyntheticSource),
    Dataset(DatasetSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    SamplesPerClient,
    NumClients,
    PrefixSamples,
}

impl AxisName {
    pub fn name(self) -> &'static str {
        match self {
            AxisName::SamplesPerClient => "samples_per_client",
            AxisName::NumClients => "num_clients",
            AxisName::PrefixSamples => "prefix_samples",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub name: AxisName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
}

impl AxisConfig {
    pub fn resolve(&self) -> Result<Vec<usize>> {
        let values = match (&self.values, self.start, self.stop) {
            (Some(v), None, None) => v.clone(),
            (None, Some(start), Some(stop)) => {
                let step = self.step.unwrap_or(1);
                if step == 0 || start > stop {
                    return Err(FraError::Config(format!("empty axis range {start}..={stop} step {step}")));
                }
                (start..=stop).step_by(step).collect()
            }
            _ => return Err(FraError::Config("axis needs either `values` or `start` and `stop`".into())),
        };
        if values.is_empty() || values.contains(&0) {
            return Err(FraError::Config("axis values must be non-empty and at least 1".into()));
        }
        Ok(values)
    }
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_true() -> bool {
    true
}

fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_true")]
    pub mask: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quant_phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_total: Option<usize>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    pub source: SourceConfig,
    pub axis: AxisConfig,
}

impl Default for ExperimentConfig {
    /// `N = 10`, `φ = 0.3`, identity centroid, `L = 10`, `m_ℓ` from 1 to 50,
    /// 100 trials, Borda and Lehmer in both centralized and federated form.
    fn default() -> Self {
        Self {
            methods: vec![Method::BordaCentral, Method::BordaFra, Method::LehmerCentral, Method::LehmerFra],
            trials: 100,
            seed: 20_240_601,
            epsilon: DEFAULT_EPSILON,
            mask: true,
            quant_phi: None,
            declared_total: None,
            mc_samples: DEFAULT_MC_SAMPLES,
            source: SourceConfig::Synthetic(SyntheticSource {
                n: 10,
                phi: 0.3,
                centroid: CentroidSpec::Named("identity".into()),
                num_clients: 10,
                samples_per_client: 10,
            }),
            axis: AxisConfig {
                name: AxisName::SamplesPerClient,
                values: None,
                start: Some(1),
                stop: Some(50),
                step: Some(1),
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| FraError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FraError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// φ used for quantization tables and the Lehmer displacement ratio.
    pub fn model_phi(&self) -> Option<f64> {
        self.quant_phi.or(match &self.source {
            SourceConfig::Synthetic(s) => Some(s.phi),
            SourceConfig::Dataset(_) => None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(FraError::Config("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(FraError::Config("no methods selected".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(FraError::Config(format!("epsilon must lie in (0,1), got {}", self.epsilon)));
        }
        self.axis.resolve()?;
        let needs_phi = self.methods.iter().any(|m| m.is_federated());
        match (&self.source, self.axis.name) {
            (SourceConfig::Synthetic(s), AxisName::SamplesPerClient | AxisName::NumClients) => {
                if s.n == 0 || s.num_clients == 0 || s.samples_per_client == 0 {
                    return Err(FraError::Config("n, num_clients and samples_per_client must be at least 1".into()));
                }
                if !(s.phi > 0.0 && s.phi < 1.0) {
                    return Err(FraError::Config(format!("phi must lie in (0,1), got {}", s.phi)));
                }
            }
            (SourceConfig::Dataset(_), AxisName::PrefixSamples) => {
                if needs_phi && self.quant_phi.is_none() {
                    return Err(FraError::Config("dataset sources need quant_phi for federated methods".into()));
                }
            }
            (_, axis) => {
                return Err(FraError::Config(format!("axis {} does not apply to this source", axis.name())));
            }
        }
        if let Some(phi) = self.quant_phi {
            if !(phi > 0.0 && phi < 1.0) {
                return Err(FraError::Config(format!("quant_phi must lie in (0,1), got {phi}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrips_through_toml() {
        let config = ExperimentConfig::default();
        config.validate().unwrap();
        let text = config.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), config);
        assert_eq!(config.axis.resolve().unwrap(), (1..=50).collect::<Vec<_>>());
    }

    #[test]
    fn shipped_default_file_matches() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
        assert_eq!(ExperimentConfig::load(&path).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn rejects_bad_configs() {
        let c = ExperimentConfig { trials: 0, ..ExperimentConfig::default() };
        assert!(c.validate().is_err());

        let mut c = ExperimentConfig::default();
        c.axis.name = AxisName::PrefixSamples;
        assert!(c.validate().is_err());

        let c = ExperimentConfig {
            axis: AxisConfig { name: AxisName::NumClients, values: None, start: Some(5), stop: Some(1), step: None },
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());

        assert!(ExperimentConfig::from_toml_str("trials = 1").is_err());
        assert!("borda".parse::<Method>().is_err());
        assert_eq!("lehmer_fra".parse::<Method>().unwrap(), Method::LehmerFra);
    }

    #[test]
    fn dataset_source_parses() {
        let text = r#"
            methods = ["borda_fra", "footrule"]
            trials = 2
            seed = 1
            quant_phi = 0.5

            [source]
            kind = "dataset"
            path = "sushi.csv"
            format = "rankings"
            partition = { kind = "by_group", min_size = 20 }

            [axis]
            name = "prefix_samples"
            values = [1, 2, 4]
        "#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert!(matches!(c.source, SourceConfig::Dataset(_)));
        assert_eq!(c.model_phi(), Some(0.5));
    }

    #[test]
    fn centroids() {
        assert!(CentroidSpec::Named("identity".into()).resolve(4, 0).unwrap().is_identity());
        let r = CentroidSpec::Named("random".into()).resolve(10, 3).unwrap();
        assert_eq!(r, CentroidSpec::Named("random".into()).resolve(10, 3).unwrap());
        assert!(CentroidSpec::Explicit(vec![2, 1]).resolve(3, 0).is_err());
        assert!(CentroidSpec::Named("nope".into()).resolve(3, 0).is_err());
    }
}
