//! Rule ensembles for a real-valued target: a step function of two inputs
//! is recovered as a handful of threshold conjunctions.
//!
//! cargo run --release --example linear_rules

use glrm::datatable::{RawColumn, RawTable, Targets};
use glrm::evaluate::cross_validate;
use glrm::trainer::train_table;
use glrm::{Family, TrainConfig, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> glrm::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 400;
    let u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let y: Vec<f64> = u
        .iter()
        .zip(&v)
        .map(|(&u, &v)| {
            let step = if u > 0.5 && v <= 0.3 { 3.0 } else { 0.0 } + if v > 0.7 { -1.0 } else { 0.0 };
            step + rng.gen_range(-0.2..0.2)
        })
        .collect();
    let table = RawTable::new(vec!["u".into(), "v".into()], vec![RawColumn::numeric(&u), RawColumn::numeric(&v)])?;
    let targets = Targets {
        values: y,
        label_map: None,
    };
    let cfg = TrainConfig {
        family: Family::Linear,
        variant: Variant::LRR,
        lambda0: 1e-3,
        ..TrainConfig::default()
    };
    let (model, _) = train_table(&table, &targets, &cfg)?;
    print!("{}", model.render());
    let m = cross_validate(&table, &targets, &cfg, 5, 0)?;
    println!("5-fold CV R² {:.4} ± {:.4}", m.r2.mean, m.r2.se);
    Ok(())
}
