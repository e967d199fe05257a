//! Prints test AUC of every classifier family on every pattern.
//!
//! Usage: cargo run --release --example family_auc -- [m] [seed]

use std::time::Instant;

use tabpat::baselines::{grid_evaluate, ClassifierFamily};
use tabpat::{gen_pattern, PatternClass, PatternSpec};

fn main() -> Result<(), tabpat::Error> {
    let args: Vec<String> = std::env::args().collect();
    let m: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    print!("{:<6}", "");
    for p in PatternClass::ALL {
        print!("{:>8}", p.name());
    }
    println!();
    let mut rows = vec![vec![0.0; 5]; 6];
    let start = Instant::now();
    for p in PatternClass::ALL {
        let train = gen_pattern(&PatternSpec::reference(p, m, seed))?;
        let test = gen_pattern(&PatternSpec::reference(p, m, seed + 1000))?;
        for f in ClassifierFamily::ALL {
            let out = grid_evaluate(f, &train, &test, seed)?;
            rows[f.index()][p.index()] = out.test_auc;
        }
    }
    for f in ClassifierFamily::ALL {
        print!("{:<6}", f.name());
        for v in &rows[f.index()] {
            print!("{v:>8.4}");
        }
        println!();
    }
    eprintln!("{:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
