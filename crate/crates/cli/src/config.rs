//! Run configuration: defaults, optionally overridden by a TOML file,
//! overridden in turn by command-line flags.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tabpat::metalearn::{CnnConfig, DEFAULT_L1, DEFAULT_THRESHOLD};
use tabpat::nn::AdamConfig;
use tabpat::{CanonSpec, CanonStrategy, CorpusSpec};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CanonSection {
    pub rows: usize,
    pub cols: usize,
    pub strategy: CanonStrategy,
}

impl Default for CanonSection {
    fn default() -> Self {
        let d = CanonSpec::desk();
        Self { rows: d.rows, cols: d.cols, strategy: d.strategy }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub per_class: usize,
    pub m_min: usize,
    pub m_max: usize,
    pub noise_dims_min: usize,
    pub noise_dims_max: usize,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self { per_class: 600, m_min: 100, m_max: 200, noise_dims_min: 0, noise_dims_max: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l1_lambda: f64,
}

impl Default for CnnSection {
    fn default() -> Self {
        let d = CnnConfig::desk();
        Self { epochs: d.epochs, batch_size: d.batch_size, learning_rate: d.adam.lr, l1_lambda: DEFAULT_L1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSection {
    pub folds: usize,
    pub tie_epsilon: f64,
    pub exclude_undecided: bool,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self { folds: 5, tie_epsilon: tabpat::baselines::DEFAULT_TIE_EPSILON, exclude_undecided: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every random stream.
    pub seed: u64,
    pub threshold: f64,
    pub canon: CanonSection,
    pub corpus: CorpusSection,
    pub cnn: CnnSection,
    pub benchmark: BenchmarkSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            threshold: DEFAULT_THRESHOLD,
            canon: CanonSection::default(),
            corpus: CorpusSection::default(),
            cnn: CnnSection::default(),
            benchmark: BenchmarkSection::default(),
        }
    }
}

/// Values given on the command line; `None` leaves the configured value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub canon_rows: Option<usize>,
    pub canon_strategy: Option<CanonStrategy>,
    pub per_class: Option<usize>,
    pub epochs: Option<usize>,
    pub folds: Option<usize>,
    pub exclude_undecided: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Defaults, then the file at `path` if any, then `overrides`.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_toml(&fs::read_to_string(p).map_err(|e| CliError::io(p, e))?)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.threshold {
            self.threshold = v;
        }
        if let Some(v) = o.canon_rows {
            self.canon.rows = v;
        }
        if let Some(v) = o.canon_strategy {
            self.canon.strategy = v;
        }
        if let Some(v) = o.per_class {
            self.corpus.per_class = v;
        }
        if let Some(v) = o.epochs {
            self.cnn.epochs = v;
        }
        if let Some(v) = o.folds {
            self.benchmark.folds = v;
        }
        if o.exclude_undecided {
            self.benchmark.exclude_undecided = true;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let usage = |m: String| Err(CliError::Usage(m));
        if !(0.0..=1.0).contains(&self.threshold) {
            return usage(format!("threshold must lie in [0, 1], got {}", self.threshold));
        }
        if self.benchmark.folds < 2 {
            return usage(format!("need at least 2 folds, got {}", self.benchmark.folds));
        }
        if self.cnn.batch_size == 0 {
            return usage("batch size must be positive".into());
        }
        if !(self.cnn.learning_rate > 0.0) {
            return usage(format!("learning rate must be positive, got {}", self.cnn.learning_rate));
        }
        self.canon_spec().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.corpus_spec().validate().map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn canon_spec(&self) -> CanonSpec {
        CanonSpec::new(self.canon.rows, self.canon.cols, self.canon.strategy)
    }

    pub fn corpus_spec(&self) -> CorpusSpec {
        let c = &self.corpus;
        CorpusSpec::new(c.per_class, (c.m_min, c.m_max), (c.noise_dims_min, c.noise_dims_max), self.seed)
    }

    pub fn cnn_config(&self) -> CnnConfig {
        CnnConfig {
            canon: self.canon_spec(),
            l1_lambda: self.cnn.l1_lambda,
            batch_size: self.cnn.batch_size,
            epochs: self.cnn.epochs,
            adam: AdamConfig { lr: self.cnn.learning_rate, ..AdamConfig::default() },
        }
    }
}
