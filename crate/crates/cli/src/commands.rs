use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::Serialize;
use tabpat::baselines::{best_classifiers, cross_validate, ClassifierFamily};
use tabpat::metafeatures::{extract, extract_all};
use tabpat::metalearn::{
    fit_mf_meta, hit_eval, hit_rate, meta_features, recommend, train_cnn_meta, EvalReport, HitRecord, HitSummary,
    MetaOutcome, MfMetaModel, Recommendation,
};
use tabpat::nn::{ConvNet, EpochStats};
use tabpat::{gen_corpus, CanonSpec, PatternClass, TabularDataset};

use crate::artifact::{load_mf_model, load_model, save_mf_model, save_model, Fingerprint};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{
    create_dir, dataset_files, load_dataset_csv, read_corpus, write_dataset_csv, write_manifest, write_text, ManifestEntry,
    MANIFEST,
};
use crate::reports::{
    auc_row, hit_row, metafeature_header, metafeature_row, recommendation_row, summary_row, Table, AUC_COLUMNS,
    HIT_COLUMNS, RECOMMENDATION_COLUMNS, SUMMARY_COLUMNS,
};

pub const CONFIG_ECHO: &str = "config.toml";

/// Writes `count` datasets plus the manifest into `out`.
pub fn simulate(cfg: &RunConfig, out: &Path) -> CliResult<Vec<ManifestEntry>> {
    let spec = cfg.corpus_spec();
    let corpus = gen_corpus(&spec)?;
    create_dir(out)?;
    let entries: Vec<ManifestEntry> = corpus
        .iter()
        .zip(spec.specs())
        .map(|(ds, s)| ManifestEntry { id: ds.name.clone(), pattern: s.pattern, m: ds.m(), n: ds.n(), seed: s.seed })
        .collect();
    corpus
        .par_iter()
        .map(|ds| write_dataset_csv(ds, &out.join(format!("{}.csv", ds.name))))
        .collect::<CliResult<Vec<()>>>()?;
    write_manifest(out, &entries)?;
    write_text(&out.join(CONFIG_ECHO), &cfg.to_toml())?;
    info!("wrote {} datasets and {MANIFEST} to {}", entries.len(), out.display());
    Ok(entries)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport<'a> {
    pub config: &'a RunConfig,
    pub meta_learner: &'static str,
    pub train_datasets: usize,
    pub test_datasets: usize,
    pub report: &'a EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<&'a [EpochStats]>,
}

fn report_text(name: &str, r: &EvalReport) -> String {
    let mut confusion = Table::new(&["truth", "C1", "C2", "C3", "C4", "C5"]);
    for (p, row) in PatternClass::ALL.iter().zip(&r.confusion) {
        let mut cells = vec![p.to_string()];
        cells.extend(row.iter().map(|c| c.to_string()));
        confusion.push(cells);
    }
    format!(
        "{name} held-out report\n  precision micro {:.3} macro {:.3}\n  recall    micro {:.3} macro {:.3}\n  f1        micro {:.3} macro {:.3}\n{}",
        r.precision_micro,
        r.precision_macro,
        r.recall_micro,
        r.recall_macro,
        r.f1_micro,
        r.f1_macro,
        confusion.to_text()
    )
}

fn json_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".report.json");
    PathBuf::from(s)
}

pub fn train_cnn(cfg: &RunConfig, corpus_dir: &Path, out: &Path) -> CliResult<MetaOutcome<tabpat::metalearn::CnnMetaModel>> {
    let corpus = read_corpus(corpus_dir)?;
    info!("training on {} datasets from {}", corpus.len(), corpus_dir.display());
    let outcome = train_cnn_meta(&corpus, &cfg.cnn_config(), cfg.seed)?;
    for e in &outcome.model.history {
        info!("epoch {:>3}  loss {:.4}  accuracy {:.4}", e.epoch + 1, e.loss, e.accuracy);
    }
    let fingerprint = Fingerprint {
        corpus_seed: read_corpus_seed(corpus_dir),
        train_seed: cfg.seed,
        epochs: cfg.cnn.epochs,
        datasets: outcome.train_idx.len(),
    };
    save_model(&outcome.model.net, &outcome.model.canon, fingerprint, out)?;
    let report = TrainReport {
        config: cfg,
        meta_learner: "cnn",
        train_datasets: outcome.train_idx.len(),
        test_datasets: outcome.test_idx.len(),
        report: &outcome.report,
        history: Some(&outcome.model.history),
    };
    write_text(&json_path(out), &serde_json::to_string_pretty(&report).expect("report serialises"))?;
    println!("{}", report_text("cnn", &outcome.report));
    Ok(outcome)
}

fn read_corpus_seed(dir: &Path) -> u64 {
    std::fs::read_to_string(dir.join(CONFIG_ECHO))
        .ok()
        .and_then(|t| RunConfig::from_toml(&t).ok())
        .map(|c| c.seed)
        .unwrap_or_default()
}

pub fn train_mf(cfg: &RunConfig, corpus_dir: &Path, out: &Path) -> CliResult<MetaOutcome<MfMetaModel>> {
    let corpus = read_corpus(corpus_dir)?;
    let (vectors, labels) = meta_features(&corpus)?;
    let (train_idx, test_idx) = tabpat::metalearn::stratified_pattern_split(&labels, tabpat::metalearn::HOLDOUT_FRACTION, cfg.seed)?;
    let pick = |idx: &[usize]| -> (Vec<_>, Vec<_>) { idx.iter().map(|&i| (vectors[i].clone(), labels[i])).unzip() };
    let (tv, tl) = pick(&train_idx);
    let (sv, sl) = pick(&test_idx);
    let model = fit_mf_meta(&tv, &tl, cfg.seed)?;
    let report = model.evaluate(&sv, &sl)?;
    save_mf_model(&model, cfg.seed, out)?;
    let tr = TrainReport {
        config: cfg,
        meta_learner: "mf-dt",
        train_datasets: train_idx.len(),
        test_datasets: test_idx.len(),
        report: &report,
        history: None,
    };
    write_text(&json_path(out), &serde_json::to_string_pretty(&tr).expect("report serialises"))?;
    println!("{}", report_text("mf-dt", &report));
    Ok(MetaOutcome { model, report, train_idx, test_idx })
}

/// Datasets under `path`: a corpus (manifest present), a directory of CSVs, or one CSV.
pub fn load_inputs(path: &Path, label_column: Option<&str>) -> CliResult<Vec<TabularDataset>> {
    if path.is_dir() {
        if path.join(MANIFEST).is_file() {
            return read_corpus(path);
        }
        let files = dataset_files(path)?;
        if files.is_empty() {
            return Err(CliError::Validation(format!("no datasets found in {}", path.display())));
        }
        files.iter().map(|f| load_dataset_csv(f, label_column)).collect()
    } else {
        Ok(vec![load_dataset_csv(path, label_column)?])
    }
}

pub fn extract_mf(inputs: &Path, label_column: Option<&str>, out: &Path) -> CliResult<Table> {
    let datasets = load_inputs(inputs, label_column)?;
    let vectors = extract_all(&datasets);
    let header = metafeature_header();
    let mut table = Table { header, rows: Vec::new() };
    for (ds, v) in datasets.iter().zip(vectors) {
        table.push(metafeature_row(&ds.name, ds.pattern, &v?));
    }
    table.write(out)?;
    info!("wrote meta-features of {} datasets to {}", datasets.len(), out.display());
    Ok(table)
}

/// Which meta-model produces recommendations.
pub enum MetaModel {
    Cnn { net: ConvNet, canon: CanonSpec },
    Mf(MfMetaModel),
}

impl MetaModel {
    /// The canonical image shape is part of the trained network, so the
    /// artifact's spec is used regardless of configuration.
    pub fn load_cnn(path: &Path) -> CliResult<Self> {
        let (net, header) = load_model(path)?;
        Ok(MetaModel::Cnn { net, canon: header.canon })
    }

    pub fn load_mf(path: &Path) -> CliResult<Self> {
        Ok(MetaModel::Mf(load_mf_model(path)?))
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetaModel::Cnn { .. } => "cnn",
            MetaModel::Mf(_) => "mf-dt",
        }
    }

    pub fn recommend(&self, ds: &TabularDataset, threshold: f64) -> CliResult<Recommendation> {
        Ok(match self {
            MetaModel::Cnn { net, canon } => recommend(net, ds, canon, threshold)?,
            MetaModel::Mf(m) => Recommendation::from_probs(&m.probs(&extract(ds)?), threshold)?,
        })
    }
}

pub fn recommend_one(cfg: &RunConfig, model: &MetaModel, data: &Path, label_column: Option<&str>) -> CliResult<(Recommendation, Table)> {
    let ds = load_dataset_csv(data, label_column)?;
    let rec = model.recommend(&ds, cfg.threshold)?;
    let mut table = Table::new(&RECOMMENDATION_COLUMNS);
    table.push(recommendation_row(&ds.name, &rec));
    Ok((rec, table))
}

#[derive(Debug, Clone)]
pub struct DatasetResult {
    pub name: String,
    pub m: usize,
    pub n: usize,
    pub aucs: Vec<(ClassifierFamily, f64)>,
    pub best: Vec<ClassifierFamily>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub datasets: Vec<DatasetResult>,
    /// Per meta-model: recommendations, hit records and the hit summary.
    pub meta: Vec<(String, Vec<Recommendation>, Vec<HitRecord>, HitSummary)>,
}

/// Cross-validated AUC of every family on every dataset in `dir`, then the
/// recommendations and hits of each meta-model.
pub fn benchmark(cfg: &RunConfig, dir: &Path, label_column: Option<&str>, models: &[MetaModel], out: &Path) -> CliResult<BenchmarkOutcome> {
    let files = dataset_files(dir)?;
    if files.is_empty() {
        return Err(CliError::Validation(format!("no datasets found in {}", dir.display())));
    }
    let datasets: Vec<TabularDataset> = files.iter().map(|f| load_dataset_csv(f, label_column)).collect::<CliResult<_>>()?;
    info!("benchmarking {} datasets with {}-fold cross-validation", datasets.len(), cfg.benchmark.folds);

    let results: Vec<DatasetResult> = datasets
        .par_iter()
        .map(|ds| {
            let aucs = cross_validate(ds, cfg.benchmark.folds, cfg.seed)?;
            let best = best_classifiers(&aucs, cfg.benchmark.tie_epsilon).best;
            info!("{}: best {}", ds.name, crate::reports::families(&best));
            Ok(DatasetResult { name: ds.name.clone(), m: ds.m(), n: ds.n(), aucs, best })
        })
        .collect::<CliResult<_>>()?;

    create_dir(out)?;
    write_text(&out.join(CONFIG_ECHO), &cfg.to_toml())?;
    let mut auc_table = Table::new(&AUC_COLUMNS);
    for r in &results {
        auc_table.push(auc_row(&r.name, r.m, r.n, &r.aucs, &r.best));
    }
    auc_table.write(&out.join("auc.csv"))?;
    println!("{}", auc_table.to_text());

    let mut summary = Table::new(&SUMMARY_COLUMNS);
    let mut meta = Vec::new();
    for model in models {
        let name = model.name();
        let recs: Vec<Recommendation> = datasets.iter().map(|d| model.recommend(d, cfg.threshold)).collect::<CliResult<_>>()?;
        let mut rec_table = Table::new(&RECOMMENDATION_COLUMNS);
        let mut hit_table = Table::new(&HIT_COLUMNS);
        let mut hits = Vec::new();
        for ((ds, rec), res) in datasets.iter().zip(&recs).zip(&results) {
            rec_table.push(recommendation_row(&ds.name, rec));
            let h = hit_eval(&ds.name, rec, &res.best)?;
            hit_table.push(hit_row(&h));
            hits.push(h);
        }
        let s = hit_rate(&hits, cfg.benchmark.exclude_undecided)?;
        rec_table.write(&out.join(format!("recommendations-{name}.csv")))?;
        hit_table.write(&out.join(format!("hits-{name}.csv")))?;
        println!("{}", hit_table.to_text());
        summary.push(summary_row(name, &s));
        meta.push((name.to_string(), recs, hits, s));
    }
    summary.write(&out.join("summary.csv"))?;
    println!("{}", summary.to_text());
    Ok(BenchmarkOutcome { datasets: results, meta })
}
