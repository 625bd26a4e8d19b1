//! Run configuration, read from TOML.
//!
//! ```toml
//! name = "low"
//! seed = 1
//!
//! [model]
//! g0 = 0.2
//! gamma = 0.4
//! kappa = 0.04
//!
//! [bench]
//! n_fock = 14
//! dt = 0.02
//!
//! [rbm]
//! n_bits = 5
//! n_hidden = 6
//! n_mixing = 6
//!
//! [train]
//! learning_rate = 0.01
//! n_samples = 5000
//! max_iters = 4000
//!
//! [stats]
//! n_max_stat = 14
//!
//! [scaling]
//! anchors = [{ kappa = 0.04, n_bits = 5, n_fock = 14 }]
//! ```
//!
//! Unknown keys are rejected. Sections a subcommand does not use may be absent.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exact::{PropagationOptions, DEFAULT_TOL};
use crate::model::ModelParams;
use crate::rbm::RbmShape;
use crate::trainer::{EstimatorMode, TrainConfig, DEFAULT_CHAINS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub model: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rbm: Option<RbmShape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<StatsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSection>,
}

fn default_name() -> String {
    "run".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub n_fock: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_time")]
    pub max_time: f64,
    /// Also propagate in time and cross-check against the direct solve.
    #[serde(default = "yes")]
    pub propagate: bool,
}

fn default_dt() -> f64 {
    0.02
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_max_time() -> f64 {
    1.0e5
}
fn yes() -> bool {
    true
}

impl BenchSection {
    pub fn propagation_options(&self) -> PropagationOptions {
        PropagationOptions {
            dt: self.dt,
            tol: self.tol,
            max_time: self.max_time,
            ..PropagationOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub n_samples: usize,
    pub max_iters: usize,
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default = "default_chains")]
    pub n_chains: usize,
    #[serde(default)]
    pub mode: EstimatorMode,
    /// Fill the `seconds` column; off keeps reruns byte-identical.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_chains() -> usize {
    DEFAULT_CHAINS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsSection {
    #[serde(default = "default_n_max_stat")]
    pub n_max_stat: usize,
    /// Diagonal samples drawn with frozen parameters.
    #[serde(default = "default_stat_samples")]
    pub n_samples: usize,
    /// Benchmark table; defaults to `bench_pn.csv` in the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<String>,
}

fn default_n_max_stat() -> usize {
    14
}
fn default_stat_samples() -> usize {
    5000
}

impl Default for StatsSection {
    fn default() -> Self {
        StatsSection {
            n_max_stat: default_n_max_stat(),
            n_samples: default_stat_samples(),
            benchmark: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub anchors: Vec<Anchor>,
    /// Largest occupation on the stepwise curve.
    #[serde(default = "default_curve_max")]
    pub curve_max: u64,
}

fn default_curve_max() -> u64 {
    512
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchor {
    pub kappa: f64,
    pub n_bits: usize,
    pub n_fock: usize,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(mut self, o: &Overrides) -> Self {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        self.model.validate().map_err(cfg_err)?;
        if let Some(b) = &self.bench {
            if b.n_fock < 2 {
                return Err(Error::Config("bench.n_fock must be at least 2".into()));
            }
            if !(b.dt > 0.0 && b.tol > 0.0 && b.max_time > 0.0) {
                return Err(Error::Config(
                    "bench.dt, bench.tol and bench.max_time must be positive".into(),
                ));
            }
        }
        if let Some(r) = &self.rbm {
            r.validate().map_err(cfg_err)?;
        }
        if let Some(s) = &self.scaling {
            if s.anchors.is_empty() {
                return Err(Error::Config("scaling.anchors is empty".into()));
            }
            for a in &s.anchors {
                if a.n_bits == 0
                    || a.n_bits > crate::bits::MAX_BITS
                    || a.n_fock < 2
                    || a.kappa.is_nan()
                    || a.kappa < 0.0
                {
                    return Err(Error::Config(format!("invalid scaling anchor {a:?}")));
                }
            }
        }
        if let Some(s) = &self.stats {
            if s.n_samples == 0 {
                return Err(Error::Config("stats.n_samples must be positive".into()));
            }
        }
        if let Some(t) = &self.train {
            if let Some(shape) = self.rbm {
                self.train_config_from(shape, t, self.seed.unwrap_or(0))
                    .validate()
                    .map_err(cfg_err)?;
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn bench(&self) -> Result<&BenchSection> {
        self.bench
            .as_ref()
            .ok_or_else(|| Error::Config("missing [bench] section".into()))
    }

    pub fn rbm(&self) -> Result<RbmShape> {
        self.rbm
            .ok_or_else(|| Error::Config("missing [rbm] section".into()))
    }

    pub fn train_section(&self) -> Result<&TrainSection> {
        self.train
            .as_ref()
            .ok_or_else(|| Error::Config("missing [train] section".into()))
    }

    pub fn stats(&self) -> StatsSection {
        self.stats.clone().unwrap_or_default()
    }

    pub fn scaling(&self) -> Result<&ScalingSection> {
        self.scaling
            .as_ref()
            .ok_or_else(|| Error::Config("missing [scaling] section".into()))
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = self.train_section()?;
        Ok(self.train_config_from(self.rbm()?, t, self.seed()))
    }

    fn train_config_from(&self, shape: RbmShape, t: &TrainSection, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: t.learning_rate,
            n_samples: t.n_samples,
            max_iters: t.max_iters,
            shape,
            model: self.model,
            seed,
            checkpoint_every: t.checkpoint_every,
            n_chains: t.n_chains,
            mode: t.mode,
        }
    }

    /// `# fockrbm config_hash=<hex> seed=<seed>` for CSV outputs.
    pub fn provenance_line(&self) -> String {
        format!("# fockrbm config_hash={} seed={}", self.hash(), self.seed())
    }
}
