//! Nested cross-validation: every outer training fold picks λ₀ by inner CV
//! before the held-out fold is scored.
//!
//! cargo run --release --example nested_cv

use glrm::datatable::{load_csv, target_mode};
use glrm::evaluate::{nested_cross_validate, Criterion};
use glrm::{Family, TrainConfig, Variant};

fn main() -> glrm::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/tic-tac-toe.csv");
    let (table, target) = load_csv(path, "class")?;
    let targets = target_mode(&target, Family::Logistic)?;
    let cfg = TrainConfig {
        family: Family::Logistic,
        variant: Variant::LRR,
        ..TrainConfig::default()
    };
    let grid = [3e-4, 1e-3, 3e-3, 1e-2];
    let res = nested_cross_validate(&table, &targets, &cfg, &grid, 5, 3, Criterion::Accuracy, 0)?;
    for (f, (fold, l)) in res.metrics.folds.iter().zip(&res.chosen).enumerate() {
        println!(
            "fold {f}: λ₀ {l:.0e}  accuracy {:.4}  rules {}",
            fold.accuracy.unwrap_or(f64::NAN),
            fold.n_rules
        );
    }
    let acc = res.metrics.accuracy.expect("logistic family");
    println!("accuracy {:.4} ± {:.4}", acc.mean, acc.se);
    Ok(())
}
