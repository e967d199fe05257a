use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

/// The five synthetic geometries a dataset can follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PatternClass {
    /// Linear: two Gaussian blobs.
    C1,
    /// XOR / checkerboard.
    C2,
    /// Two moons.
    C3,
    /// Sandwich: one band between two bands of the other class.
    C4,
    /// Quadratic: two opposed parabolas.
    C5,
}

impl PatternClass {
    pub const ALL: [PatternClass; 5] =
        [PatternClass::C1, PatternClass::C2, PatternClass::C3, PatternClass::C4, PatternClass::C5];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            PatternClass::C1 => "C1",
            PatternClass::C2 => "C2",
            PatternClass::C3 => "C3",
            PatternClass::C4 => "C4",
            PatternClass::C5 => "C5",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            PatternClass::C1 => "linear",
            PatternClass::C2 => "xor",
            PatternClass::C3 => "two-moons",
            PatternClass::C4 => "sandwich",
            PatternClass::C5 => "quadratic",
        }
    }
}

impl fmt::Display for PatternClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatternClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(t) || p.description().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::Validation(format!("unknown pattern class '{t}'")))
    }
}

/// An m x n feature matrix with a +/-1 label per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularDataset {
    pub name: String,
    pub features: Matrix,
    pub labels: Vec<i8>,
    pub pattern: Option<PatternClass>,
}

impl TabularDataset {
    pub fn new(name: impl Into<String>, features: Matrix, labels: Vec<i8>) -> Result<Self> {
        let ds = Self { name: name.into(), features, labels, pattern: None };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_pattern(mut self, pattern: PatternClass) -> Self {
        self.pattern = Some(pattern);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.features.rows() {
            return Err(Error::Shape(format!(
                "{} labels for {} rows",
                self.labels.len(),
                self.features.rows()
            )));
        }
        if let Some(bad) = self.labels.iter().find(|&&y| y != 1 && y != -1) {
            return invalid(format!("label {bad} is not -1 or +1"));
        }
        if !self.features.is_finite() {
            return invalid("features contain non-finite values");
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.features.rows()
    }

    pub fn n(&self) -> usize {
        self.features.cols()
    }

    /// (negatives, positives)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y > 0).count();
        (self.labels.len() - pos, pos)
    }

    pub fn has_both_classes(&self) -> bool {
        let (neg, pos) = self.class_counts();
        neg > 0 && pos > 0
    }

    pub fn require_both_classes(&self) -> Result<()> {
        if self.has_both_classes() {
            Ok(())
        } else {
            invalid(format!("dataset '{}' contains a single class", self.name))
        }
    }

    pub fn subset(&self, idx: &[usize]) -> TabularDataset {
        TabularDataset {
            name: self.name.clone(),
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            pattern: self.pattern,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_labels() {
        let x = Matrix::zeros(2, 1);
        assert!(TabularDataset::new("a", x.clone(), vec![1, 0]).is_err());
        assert!(TabularDataset::new("a", x.clone(), vec![1]).is_err());
        assert!(TabularDataset::new("a", x, vec![1, -1]).is_ok());
    }

    #[test]
    fn rejects_non_finite() {
        let x = Matrix::from_vec(1, 1, vec![f64::NAN]).unwrap();
        assert!(TabularDataset::new("a", x, vec![1]).is_err());
    }

    #[test]
    fn pattern_names_round_trip() {
        for p in PatternClass::ALL {
            assert_eq!(p.name().parse::<PatternClass>().unwrap(), p);
            assert_eq!(PatternClass::from_index(p.index()), Some(p));
        }
        assert!(PatternClass::C1 < PatternClass::C5);
    }
}
