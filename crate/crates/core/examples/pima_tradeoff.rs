//! Sweeps the penalty on pima with single-literal rules plus raw numeric
//! terms, then prints the accuracy/complexity trade-off and its frontier.
//!
//! cargo run --release --example pima_tradeoff

use glrm::datatable::{load_csv, target_mode};
use glrm::evaluate::{log_grid, pareto_indices, sweep, write_sweep_csv, Criterion};
use glrm::{Family, TrainConfig, Variant};

fn main() -> glrm::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/pima.csv");
    let (table, target) = load_csv(path, "class")?;
    let targets = target_mode(&target, Family::Logistic)?;
    let cfg = TrainConfig {
        family: Family::Logistic,
        variant: Variant::LR1N,
        ..TrainConfig::default()
    };
    let points = sweep(&table, &targets, &cfg, &log_grid(1e-3, 0.3, 8), 5, 0)?;
    write_sweep_csv(std::io::stdout().lock(), &points, Criterion::Brier)?;

    println!("\nfrontier:");
    for i in pareto_indices(&points, Criterion::Brier) {
        let p = &points[i];
        println!(
            "  λ₀ {:.2e}  Brier {:.4}  weighted rules {:.1}",
            p.lambda0, p.metrics.brier.mean, p.metrics.weighted_rules.mean
        );
    }
    Ok(())
}
