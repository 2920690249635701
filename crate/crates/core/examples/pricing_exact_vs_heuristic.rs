//! Prices one column-generation step on tic-tac-toe three ways: the beam
//! heuristic at two widths and the exact branch-and-bound.
//!
//! cargo run --release --example pricing_exact_vs_heuristic

use std::time::Instant;

use glrm::binarizer::{binarize, build_dictionary};
use glrm::datatable::{load_csv, target_mode};
use glrm::glm::{self, FitOptions};
use glrm::pricing::{price_exact, price_heuristic, FeatureSpace, LiteralPool};
use glrm::trainer::init_restricted_set;
use glrm::{Family, PricingConfig, PricingMode, PricingProblem, Sign, TrainConfig};

fn main() -> glrm::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/tic-tac-toe.csv");
    let (table, target) = load_csv(path, "class")?;
    let targets = target_mode(&target, Family::Logistic)?;
    let dict = build_dictionary(&table, 9)?;
    let data = binarize(&table, &dict, &targets, false)?;

    // Residuals of the single-literal model are what the first pricing round sees.
    let cfg = TrainConfig::default();
    let set = init_restricted_set(&data, &cfg);
    let fit = glm::fit_weighted_l1(Family::Logistic, &set.design, data.targets(), None, &FitOptions::default());
    let r = glm::residuals(Family::Logistic, &set.design, data.targets(), &fit.coefficients);
    let space = FeatureSpace::from_dataset(&data, LiteralPool::All);

    for sign in [Sign::Plus, Sign::Minus] {
        println!("sign {sign:?}");
        let problem = |config: PricingConfig| PricingProblem {
            space: &space,
            residuals: &r,
            lambda0: cfg.lambda0,
            lambda1: cfg.lambda1(),
            sign,
            config,
            exclude: None,
        };
        for beam in [1, 8] {
            let t = Instant::now();
            let cols = price_heuristic(&problem(PricingConfig {
                beam_width: beam,
                ..PricingConfig::default()
            }));
            if let Some(c) = cols.first() {
                println!(
                    "  heuristic B={beam}  {:+.6}  {}  ({:.1} ms)",
                    c.objective,
                    describe(&data, c.conjunction.literals()),
                    t.elapsed().as_secs_f64() * 1e3
                );
            }
        }
        let t = Instant::now();
        let out = price_exact(&problem(PricingConfig {
            mode: PricingMode::Exact,
            d_max: 4,
            ..PricingConfig::default()
        }));
        if let Some(c) = &out.column {
            println!(
                "  exact d_max=4    {:+.6}  {}  ({} nodes, certified {}, {:.1} ms)",
                c.objective,
                describe(&data, c.conjunction.literals()),
                out.nodes,
                out.certified,
                t.elapsed().as_secs_f64() * 1e3
            );
        }
    }
    Ok(())
}

fn describe(data: &glrm::BinarizedDataset, literals: &[usize]) -> String {
    let parts: Vec<&str> = literals
        .iter()
        .map(|&j| data.dictionary().features[j].display.as_str())
        .collect();
    format!("[{}]", parts.join(" AND "))
}
