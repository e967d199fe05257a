//! Trains both meta-learners on a desk-scale corpus and prints held-out reports.
//!
//! Usage: cargo run --release --example meta_desk -- [per_class] [epochs] [seed]

use std::time::Instant;

use tabpat::metalearn::{fit_cnn_meta, fit_mf_meta, meta_features, CnnConfig};
use tabpat::{gen_corpus, CorpusSpec};

fn main() -> Result<(), tabpat::Error> {
    let args: Vec<String> = std::env::args().collect();
    let per_class: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(600);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);

    let start = Instant::now();
    let train = gen_corpus(&CorpusSpec::new(per_class, (100, 200), (0, 4), seed))?;
    let test = gen_corpus(&CorpusSpec::new((per_class / 6).max(2), (100, 200), (0, 4), seed + 1))?;
    eprintln!("corpus: {} train, {} test ({:.1?})", train.len(), test.len(), start.elapsed());

    let cfg = CnnConfig { epochs, ..CnnConfig::desk() };
    let t = Instant::now();
    let cnn = fit_cnn_meta(&train, &cfg, seed)?;
    for e in &cnn.history {
        eprintln!("epoch {:>2}  loss {:.4}  acc {:.4}", e.epoch, e.loss, e.accuracy);
    }
    let report = cnn.evaluate(&test)?;
    println!("cnn   macro-f1 {:.4}  accuracy {:.4}  ({:.1?})", report.f1_macro, report.accuracy(), t.elapsed());
    println!("      confusion {:?}", report.confusion);

    let t = Instant::now();
    let (tv, tl) = meta_features(&train)?;
    let (sv, sl) = meta_features(&test)?;
    let mf = fit_mf_meta(&tv, &tl, seed)?;
    let report = mf.evaluate(&sv, &sl)?;
    println!("mf+dt macro-f1 {:.4}  accuracy {:.4}  cp grid {:?}  ({:.1?})", report.f1_macro, report.accuracy(), mf.validation_f1, t.elapsed());
    println!("      confusion {:?}", report.confusion);
    Ok(())
}
