//! Learns a rule ensemble for tic-tac-toe endgames and cross-validates it.
//!
//! cargo run --release --example tic_tac_toe_rules -- [lambda0]

use glrm::datatable::{load_csv, target_mode};
use glrm::evaluate::cross_validate;
use glrm::model::DEFAULT_LITERAL_WEIGHT;
use glrm::trainer::train_table;
use glrm::{Family, TrainConfig, Variant};

fn main() -> glrm::Result<()> {
    let lambda0 = std::env::args().nth(1).map_or(Ok(1e-3), |s| s.parse()).expect("lambda0 must be a number");
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/tic-tac-toe.csv");
    let (table, target) = load_csv(path, "class")?;
    let targets = target_mode(&target, Family::Logistic)?;
    let cfg = TrainConfig {
        family: Family::Logistic,
        variant: Variant::LRR,
        lambda0,
        ..TrainConfig::default()
    };

    let (model, trace) = train_table(&table, &targets, &cfg)?;
    println!(
        "{} column-generation iterations, {:?}, complexity {:.1}",
        trace.iterations.len(),
        trace.termination,
        model.complexity(DEFAULT_LITERAL_WEIGHT)
    );
    print!("{}", model.render());

    let m = cross_validate(&table, &targets, &cfg, 10, 0)?;
    let acc = m.accuracy.expect("logistic family");
    println!(
        "10-fold CV: accuracy {:.4} ± {:.4}, Brier {:.4} ± {:.4}",
        acc.mean, acc.se, m.brier.mean, m.brier.se
    );
    Ok(())
}
