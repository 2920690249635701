mod common;

use std::collections::HashSet;

use common::{enumerate, random_dataset, solve_dense, value_of, xor_dataset};
use glrm::binarizer::BinarizedDataset;
use glrm::glm::{self, Coefficients, DesignMatrix, Family, FitOptions};
use glrm::pricing::{reduced_cost, FeatureSpace, LiteralPool, PricingConfig, PricingMode};
use glrm::trainer::{debias, init_restricted_set, train, Term, TerminationReason, EPSILON};
use glrm::{BitSet, RuleEnsemble, Sign, TrainConfig, Variant};
use proptest::prelude::*;

fn config(family: Family, variant: Variant, lambda0: f64, exact: bool) -> TrainConfig {
    TrainConfig {
        family,
        variant,
        lambda0,
        pricing: PricingConfig {
            mode: if exact { PricingMode::Exact } else { PricingMode::Heuristic },
            d_max: if exact { 10 } else { 3 },
            ..PricingConfig::default()
        },
        max_cg_iters: 30,
        ..TrainConfig::default()
    }
}

fn binary_row(data: &BinarizedDataset, i: usize) -> Vec<Option<&'static str>> {
    (0..data.n_features()).map(|j| Some(if data.bit(i, j) { "1" } else { "0" })).collect()
}

fn training_accuracy(model: &RuleEnsemble, data: &BinarizedDataset) -> f64 {
    let hits = (0..data.n_rows())
        .filter(|&i| {
            let p = model.predict_row(&binary_row(data, i)).unwrap();
            (p >= 0.5) == (data.targets()[i] == 1.0)
        })
        .count();
    hits as f64 / data.n_rows() as f64
}

fn family_of(b: bool) -> Family {
    if b {
        Family::Logistic
    } else {
        Family::Linear
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn restricted_objective_never_increases(seed in any::<u64>(), logistic in any::<bool>(), exact in any::<bool>()) {
        let family = family_of(logistic);
        let data = random_dataset(seed, family);
        let (_, trace) = train(&data, &config(family, Variant::LRR, 0.01, exact)).unwrap();
        for w in trace.iterations.windows(2) {
            prop_assert!(w[1].objective <= w[0].objective + 1e-8, "{} -> {}", w[0].objective, w[1].objective);
        }
    }

    #[test]
    fn added_columns_replay_with_negative_reduced_cost(seed in any::<u64>(), logistic in any::<bool>(), exact in any::<bool>()) {
        let family = family_of(logistic);
        let data = random_dataset(seed, family);
        let cfg = config(family, Variant::LRR, 0.01, exact);
        let (_, trace) = train(&data, &cfg).unwrap();
        let mut design = init_restricted_set(&data, &cfg).design;
        let mut seen: HashSet<Vec<usize>> = (0..data.n_features()).map(|j| vec![j]).collect();
        for rec in &trace.iterations {
            prop_assert_eq!(rec.coefficients.len(), design.n_cols());
            let beta = Coefficients(rec.coefficients.clone());
            let r = glm::residuals(family, &design, data.targets(), &beta);
            for col in &rec.added {
                let rows = data.conjunction_rows(&col.literals);
                let rc = reduced_cost(&rows, &r, cfg.lambda0, cfg.lambda1(), col.literals.len(), col.sign);
                prop_assert!(rc < -EPSILON, "replayed reduced cost {}", rc);
                prop_assert!((rc - col.reduced_cost).abs() <= 1e-12);
                prop_assert!(seen.insert(col.literals.clone()), "duplicate {:?}", col.literals);
            }
            for col in &rec.added {
                let rows = data.conjunction_rows(&col.literals);
                design.push_binary(&rows, cfg.lambda0 + cfg.lambda1() * col.literals.len() as f64);
            }
        }
    }

    #[test]
    fn certified_runs_survive_enumeration(seed in any::<u64>(), logistic in any::<bool>()) {
        let family = family_of(logistic);
        let data = random_dataset(seed, family);
        let mut cfg = config(family, Variant::LRR, 0.02, true);
        cfg.max_cg_iters = 100;
        let (_, trace) = train(&data, &cfg).unwrap();
        prop_assert!(trace.termination == TerminationReason::CertifiedOptimal, "{:?}", trace.termination);
        if trace.termination == TerminationReason::CertifiedOptimal {
            let mut design = init_restricted_set(&data, &cfg).design;
            for rec in &trace.iterations {
                for col in &rec.added {
                    design.push_binary(&data.conjunction_rows(&col.literals), 0.0);
                }
            }
            let last = trace.iterations.last().unwrap();
            let r = glm::residuals(family, &design, data.targets(), &Coefficients(last.coefficients.clone()));
            let space = FeatureSpace::from_dataset(&data, LiteralPool::All);
            for c in enumerate(&space, data.n_features()) {
                for sign in [Sign::Plus, Sign::Minus] {
                    let v = value_of(&space, &c, &r, cfg.lambda0, cfg.lambda1(), sign);
                    prop_assert!(v >= -EPSILON, "{:?} {:?} {}", c, sign, v);
                }
            }
        }
    }

    #[test]
    fn final_design_has_no_duplicate_conjunctions(seed in any::<u64>(), exact in any::<bool>()) {
        let data = random_dataset(seed, Family::Logistic);
        let mut cfg = config(Family::Logistic, Variant::LRR, 0.005, exact);
        cfg.pricing.k_best = 3;
        let (model, _) = train(&data, &cfg).unwrap();
        let mut seen = HashSet::new();
        for (c, _) in &model.rules {
            prop_assert!(seen.insert(c.clone()));
        }
    }

    #[test]
    fn lr1_columns_are_contained_in_lrr_initial_columns(seed in any::<u64>()) {
        let data = random_dataset(seed, Family::Logistic);
        let lr1 = init_restricted_set(&data, &config(Family::Logistic, Variant::LR1, 0.01, false));
        let lrr = init_restricted_set(&data, &config(Family::Logistic, Variant::LRR, 0.01, false));
        let terms: HashSet<&Term> = lrr.terms.iter().collect();
        prop_assert!(lr1.terms.iter().all(|t| terms.contains(t)));
    }

    #[test]
    fn debias_refit_does_not_increase_the_unpenalized_loss(seed in any::<u64>(), logistic in any::<bool>()) {
        let family = family_of(logistic);
        let data = random_dataset(seed, family);
        let cfg = config(family, Variant::LR1, 0.02, false);
        let set = init_restricted_set(&data, &cfg);
        let y = data.targets();
        let fit = glm::fit_weighted_l1(family, &set.design, y, None, &FitOptions { tol: 1e-9, ..FitOptions::default() });
        let out = debias(family, &set.design, y, &fit.coefficients, 1e-5, &FitOptions { tol: 1e-9, ..FitOptions::default() });
        prop_assert_eq!(out.support[0], 0);
        for k in 1..set.design.n_cols() {
            let kept = out.support.contains(&k);
            prop_assert_eq!(kept, fit.coefficients[k].abs() > 1e-5);
            if !kept {
                prop_assert_eq!(out.coefficients[k], 0.0);
            }
        }
        let sub = set.design.select(&out.support);
        let mut sub0 = sub.clone();
        for k in 0..sub0.n_cols() {
            sub0.set_penalty(k, 0.0);
        }
        let before = Coefficients(out.support.iter().map(|&k| fit.coefficients[k]).collect());
        let after = Coefficients(out.support.iter().map(|&k| out.coefficients[k]).collect());
        prop_assert!(glm::objective(family, &sub0, y, &after) <= glm::objective(family, &sub0, y, &before) + 1e-12);
    }
}

#[test]
fn singleton_columns_carry_the_degree_one_penalty() {
    let data = xor_dataset(3);
    let cfg = config(Family::Logistic, Variant::LR1, 0.05, false);
    let set = init_restricted_set(&data, &cfg);
    assert_eq!(set.design.n_cols(), 1 + 4);
    assert_eq!(set.design.penalties()[0], 0.0);
    for &l in &set.design.penalties()[1..] {
        assert!((l - 0.06).abs() < 1e-15);
    }
}

#[test]
fn huge_penalty_leaves_the_base_rate_intercept() {
    let data = random_dataset(3, Family::Logistic);
    let (model, _) = train(&data, &config(Family::Logistic, Variant::LRR, 1e3, true)).unwrap();
    assert_eq!(model.n_rules(), 0);
    let p = data.targets().iter().sum::<f64>() / data.n_rows() as f64;
    assert!((model.intercept - (p / (1.0 - p)).ln()).abs() < 1e-6);
}

#[test]
fn linear_debias_matches_least_squares_on_the_support() {
    let data = random_dataset(9, Family::Linear);
    let cfg = config(Family::Linear, Variant::LR1, 0.05, false);
    let set = init_restricted_set(&data, &cfg);
    let y = data.targets();
    let opts = FitOptions { tol: 1e-12, ..FitOptions::default() };
    let fit = glm::fit_weighted_l1(Family::Linear, &set.design, y, None, &opts);
    let out = debias(Family::Linear, &set.design, y, &fit.coefficients, 1e-5, &opts);
    let cols: Vec<Vec<f64>> = out
        .support
        .iter()
        .map(|&k| (0..data.n_rows()).map(|i| set.design.column(k).value(i)).collect())
        .collect();
    let gram = cols.iter().map(|a| cols.iter().map(|b| dot(a, b)).collect()).collect();
    let rhs = cols.iter().map(|a| dot(a, y)).collect();
    let ols = solve_dense(gram, rhs);
    for (&k, o) in out.support.iter().zip(&ols) {
        assert!((out.coefficients[k] - o).abs() < 1e-6);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

#[test]
fn xor_needs_an_interaction() {
    let data = xor_dataset(10);
    let (lr1, lr1_trace) = train(&data, &config(Family::Logistic, Variant::LR1, 1e-3, true)).unwrap();
    assert_eq!(lr1_trace.termination, TerminationReason::NoColumnGeneration);
    assert!(training_accuracy(&lr1, &data) <= 0.75);

    let (lrr, trace) = train(&data, &config(Family::Logistic, Variant::LRR, 1e-3, true)).unwrap();
    let entered = trace
        .iterations
        .iter()
        .flat_map(|r| &r.added)
        .find(|c| c.literals.len() == 2)
        .expect("a degree-2 conjunction enters");
    assert!(entered.reduced_cost < -EPSILON);
    assert_eq!(training_accuracy(&lrr, &data), 1.0);
}

#[test]
fn intercept_only_design_fit_is_the_base_rate() {
    let mut x = DesignMatrix::new(5, 0.0);
    x.push_binary(&BitSet::new(5), 0.1);
    let y = [1.0, 0.0, 0.0, 1.0, 1.0];
    let out = debias(Family::Logistic, &x, &y, &Coefficients(vec![0.2, 0.0]), 1e-5, &FitOptions::default());
    assert_eq!(out.support, vec![0]);
    assert!((out.coefficients[0] - 1.5f64.ln()).abs() < 1e-6);
}
