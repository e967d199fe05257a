//! Machine-readable report tables. Column names and order are part of the
//! report format; any change bumps [`REPORT_VERSION`].

use std::path::Path;

use tabpat::baselines::ClassifierFamily;
use tabpat::metafeatures::{MetaFeatureVector, SCHEMA};
use tabpat::metalearn::{HitRecord, HitSummary, Recommendation};
use tabpat::PatternClass;

use crate::error::{CliError, CliResult};

pub const REPORT_VERSION: u32 = 1;

pub const AUC_COLUMNS: [&str; 10] = ["dataset", "m", "n", "Logit", "DT", "kNN", "RF", "ANN", "SVM", "best"];
pub const RECOMMENDATION_COLUMNS: [&str; 11] =
    ["dataset", "p_C1", "p_C2", "p_C3", "p_C4", "p_C5", "predicted", "first", "second", "confidence", "status"];
pub const HIT_COLUMNS: [&str; 8] = ["dataset", "predicted", "first", "second", "best", "hit", "rank", "status"];
pub const SUMMARY_COLUMNS: [&str; 8] = ["meta_learner", "hits", "total", "rate", "rank1", "rank2", "excluded", "random_baseline"];

/// A header plus string rows, written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| CliError::io(path, e))
    }

    /// Space-aligned rendering for terminals.
    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|j| self.rows.iter().map(|r| r[j].len()).chain([self.header[j].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = line(&self.header);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

pub fn fmt3(v: f64) -> String {
    format!("{v:.3}")
}

pub fn families(list: &[ClassifierFamily]) -> String {
    list.iter().map(|f| f.name()).collect::<Vec<_>>().join("/")
}

pub fn auc_row(dataset: &str, m: usize, n: usize, aucs: &[(ClassifierFamily, f64)], best: &[ClassifierFamily]) -> Vec<String> {
    let mut row = vec![dataset.to_string(), m.to_string(), n.to_string()];
    for f in ClassifierFamily::ALL {
        let v = aucs.iter().find(|(g, _)| *g == f).map(|p| p.1);
        row.push(v.map(fmt3).unwrap_or_default());
    }
    row.push(families(best));
    row
}

pub fn recommendation_row(dataset: &str, r: &Recommendation) -> Vec<String> {
    let mut row = vec![dataset.to_string()];
    row.extend(r.probs.iter().map(|p| fmt3(*p)));
    row.push(r.predicted.to_string());
    row.push(r.ranked_classifiers[0].to_string());
    row.push(r.ranked_classifiers[1].to_string());
    row.push(fmt3(r.confidence));
    row.push(r.status.to_string());
    row
}

pub fn hit_row(h: &HitRecord) -> Vec<String> {
    vec![
        h.dataset.clone(),
        h.predicted.to_string(),
        h.recommended[0].to_string(),
        h.recommended[1].to_string(),
        families(&h.best_set),
        if h.hit { "1" } else { "0" }.to_string(),
        h.rank.map(|r| r.to_string()).unwrap_or_default(),
        h.status.to_string(),
    ]
}

pub fn summary_row(name: &str, s: &HitSummary) -> Vec<String> {
    vec![
        name.to_string(),
        s.hits.to_string(),
        s.total.to_string(),
        fmt3(s.rate),
        s.rank1.to_string(),
        s.rank2.to_string(),
        s.excluded.to_string(),
        fmt3(1.0 / 3.0),
    ]
}

pub fn metafeature_header() -> Vec<String> {
    let mut h = vec!["dataset".to_string(), "pattern".to_string()];
    h.extend(SCHEMA.iter().map(|s| s.to_string()));
    h.push("invalid".to_string());
    h
}

pub fn metafeature_row(dataset: &str, pattern: Option<PatternClass>, v: &MetaFeatureVector) -> Vec<String> {
    let mut row = vec![dataset.to_string(), pattern.map(|p| p.to_string()).unwrap_or_default()];
    row.extend(v.values.iter().map(|x| x.to_string()));
    let invalid: Vec<&str> = SCHEMA.iter().zip(&v.valid).filter(|(_, ok)| !**ok).map(|(s, _)| *s).collect();
    row.push(invalid.join(";"));
    row
}
