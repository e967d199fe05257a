//! Classifier recommendation for binary tabular datasets by pattern recognition.
//!
//! A dataset is rendered as a fixed-size image, a convolutional network
//! identifies which of five synthetic geometries it resembles, and the two
//! classifier families that perform best on that geometry are recommended.
//! A meta-feature + decision-tree baseline is included for comparison.

pub mod baselines;
pub mod canonicalize;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod matrix;
pub mod metafeatures;
pub mod metalearn;
pub mod nn;
pub mod pattern_sim;
pub mod rng;

pub use canonicalize::{canonicalize, pca_project, CanonSpec, CanonStrategy, CanonicalImage, PcaResult};
pub use dataset::{PatternClass, TabularDataset};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use pattern_sim::{gen_corpus, gen_pattern, CorpusSpec, PatternSpec};
