//! XOR cannot be fit by single literals. Column generation finds the
//! degree-2 conjunctions that separate it.
//!
//! cargo run --example xor_column_generation

use glrm::trainer::train;
use glrm::{BinarizedDataset, BitSet, Family, PricingConfig, PricingMode, TrainConfig, Variant};

fn main() -> glrm::Result<()> {
    let n = 40;
    let x1: Vec<bool> = (0..n).map(|i| i % 2 == 1).collect();
    let x2: Vec<bool> = (0..n).map(|i| (i / 2) % 2 == 1).collect();
    let y: Vec<f64> = (0..n).map(|i| f64::from(u8::from(x1[i] != x2[i]))).collect();
    let not = |v: &[bool]| v.iter().map(|b| !b).collect::<Vec<_>>();
    let data = BinarizedDataset::from_binary_columns(
        vec![
            BitSet::from_bools(&x1),
            BitSet::from_bools(&x2),
            BitSet::from_bools(&not(&x1)),
            BitSet::from_bools(&not(&x2)),
        ],
        y,
    );

    for variant in [Variant::LR1, Variant::LRR] {
        let cfg = TrainConfig {
            family: Family::Logistic,
            variant,
            lambda0: 1e-3,
            pricing: PricingConfig {
                mode: PricingMode::Exact,
                ..PricingConfig::default()
            },
            ..TrainConfig::default()
        };
        let (model, trace) = train(&data, &cfg)?;
        println!("== {variant} ({:?})", trace.termination);
        for rec in &trace.iterations {
            let added: Vec<String> = rec
                .added
                .iter()
                .map(|c| format!("{:?}{:+.4}", c.literals, c.reduced_cost))
                .collect();
            println!(
                "  iter {:>2}  objective {:.6}  columns {:>2}  added {}",
                rec.iteration,
                rec.objective,
                rec.total_columns,
                added.join(" ")
            );
        }
        print!("{}", model.render());
    }
    Ok(())
}
