use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};
use tabpat::CanonStrategy;
use tabpat_cli::commands::{self, MetaModel};
use tabpat_cli::config::{Overrides, RunConfig};
use tabpat_cli::{selftest, CliError, CliResult};

/// Recommend classifiers for binary tabular datasets by recognising their pattern.
#[derive(Debug, Parser)]
#[command(name = "tabpat", version)]
struct Cli {
    /// TOML configuration file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Confidence below which a recommendation is flagged undecided.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Rows of the canonical image.
    #[arg(long, global = true)]
    canon_rows: Option<usize>,
    /// Canonicalisation strategy: sort-resample or pca-compact.
    #[arg(long, global = true, value_parser = parse_strategy)]
    canon_strategy: Option<CanonStrategy>,
    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labelled corpus of synthetic datasets.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        per_class: Option<usize>,
    },
    /// Train the convolutional meta-learner on a corpus.
    TrainCnn {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Train the meta-feature decision tree on a corpus.
    TrainMf {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the meta-feature vector of every dataset as CSV.
    ExtractMf {
        /// A CSV file, a directory of CSVs, or a corpus directory.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        label_column: Option<String>,
    },
    /// Recommend two classifier families for one dataset.
    Recommend {
        /// CNN model artifact.
        #[arg(long, required_unless_present = "mf_model")]
        model: Option<PathBuf>,
        /// Meta-feature tree model, used instead of the CNN.
        #[arg(long, conflicts_with = "model")]
        mf_model: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        label_column: Option<String>,
        /// Also write the recommendation row to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate every classifier family on a directory of datasets and score the recommendations.
    Benchmark {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, required_unless_present = "mf_model")]
        model: Option<PathBuf>,
        #[arg(long)]
        mf_model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        label_column: Option<String>,
        /// Leave undecided recommendations out of the hit rate.
        #[arg(long)]
        exclude_undecided: bool,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

fn parse_strategy(s: &str) -> Result<CanonStrategy, String> {
    s.parse().map_err(|e: tabpat::Error| e.to_string())
}

fn run(cli: Cli) -> CliResult<()> {
    let mut o = Overrides {
        seed: cli.seed,
        threshold: cli.threshold,
        canon_rows: cli.canon_rows,
        canon_strategy: cli.canon_strategy,
        ..Overrides::default()
    };
    match &cli.command {
        Command::Simulate { per_class, .. } => o.per_class = *per_class,
        Command::TrainCnn { epochs, .. } => o.epochs = *epochs,
        Command::Benchmark { folds, exclude_undecided, .. } => {
            o.folds = *folds;
            o.exclude_undecided = *exclude_undecided;
        }
        _ => {}
    }
    let cfg = RunConfig::resolve(cli.config.as_deref(), &o)?;
    info!("resolved configuration:\n{}", cfg.to_toml());

    match cli.command {
        Command::Simulate { out, .. } => commands::simulate(&cfg, &out).map(drop),
        Command::TrainCnn { corpus, out, .. } => commands::train_cnn(&cfg, &corpus, &out).map(drop),
        Command::TrainMf { corpus, out } => commands::train_mf(&cfg, &corpus, &out).map(drop),
        Command::ExtractMf { data, out, label_column } => commands::extract_mf(&data, label_column.as_deref(), &out).map(drop),
        Command::Recommend { model, mf_model, data, label_column, out } => {
            let meta = match (model, mf_model) {
                (_, Some(p)) => MetaModel::load_mf(&p)?,
                (Some(p), None) => MetaModel::load_cnn(&p)?,
                (None, None) => return Err(CliError::Usage("--model or --mf-model is required".into())),
            };
            let (rec, table) = commands::recommend_one(&cfg, &meta, &data, label_column.as_deref())?;
            print!("{}", table.to_csv());
            eprintln!(
                "{}: pattern {} ({:.3}, {}); try {} then {}",
                data.display(),
                rec.predicted,
                rec.confidence,
                rec.status,
                rec.ranked_classifiers[0],
                rec.ranked_classifiers[1]
            );
            if let Some(path) = out {
                table.write(&path)?;
            }
            Ok(())
        }
        Command::Benchmark { data, model, mf_model, out, label_column, .. } => {
            let mut models = Vec::new();
            if let Some(p) = model {
                models.push(MetaModel::load_cnn(&p)?);
            }
            if let Some(p) = mf_model {
                models.push(MetaModel::load_mf(&p)?);
            }
            commands::benchmark(&cfg, &data, label_column.as_deref(), &models, &out).map(drop)
        }
        Command::Selftest => {
            let failures = selftest::run();
            if failures.is_empty() {
                Ok(())
            } else {
                let names: Vec<&str> = failures.iter().map(|f| f.0).collect();
                Err(CliError::Selftest(names.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            e.exit()
        }
    }
}
