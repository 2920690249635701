//! Trains on part of pima, saves the model as JSON, reloads it and scores
//! the held-out rows.
//!
//! cargo run --release --example save_and_predict

use glrm::datatable::{load_csv, target_mode};
use glrm::evaluate::{accuracy, brier};
use glrm::trainer::train_table;
use glrm::{Family, RuleEnsemble, TrainConfig, Variant};

fn main() -> glrm::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/pima.csv");
    let (table, target) = load_csv(path, "class")?;
    let targets = target_mode(&target, Family::Logistic)?;
    let (train_rows, test_rows): (Vec<usize>, Vec<usize>) = (0..table.n_rows()).partition(|i| i % 4 != 0);

    let cfg = TrainConfig {
        family: Family::Logistic,
        variant: Variant::LRR,
        lambda0: 5e-3,
        ..TrainConfig::default()
    };
    let (model, _) = train_table(&table.select_rows(&train_rows), &targets.select(&train_rows), &cfg)?;

    let file = std::env::temp_dir().join("glrm-pima-model.json");
    model.save(&file)?;
    let loaded = RuleEnsemble::load(&file)?;
    assert_eq!(loaded, model);
    println!("saved {} rules to {}", loaded.n_rules(), file.display());
    print!("{}", loaded.render());

    let preds = loaded.predict(&table.select_rows(&test_rows))?;
    let y = targets.select(&test_rows).values;
    println!("held-out accuracy {:.4}, Brier {:.4}", accuracy(&preds, &y)?, brier(&preds, &y)?);
    if let Some(map) = &loaded.label_map {
        println!("probabilities refer to {:?}", map.positive);
    }
    Ok(())
}
