mod common;

use common::rng;
use glrm::binarizer::build_dictionary;
use glrm::datatable::{RawColumn, RawTable, Targets};
use glrm::evaluate::{
    accuracy, brier, cross_validate, evaluate_split, pareto, r_squared, select_lambda, stratified_folds, sweep,
    Criterion, FoldResult, MetricSet, TradeoffPoint,
};
use glrm::glm::Family;
use glrm::pricing::{PricingConfig, PricingMode};
use glrm::trainer::train_table;
use glrm::{TrainConfig, Variant};
use proptest::prelude::*;
use rand::Rng;

fn cfg(variant: Variant, lambda0: f64) -> TrainConfig {
    TrainConfig {
        family: Family::Logistic,
        variant,
        lambda0,
        max_cg_iters: 20,
        pricing: PricingConfig {
            mode: PricingMode::Exact,
            d_max: 3,
            ..PricingConfig::default()
        },
        ..TrainConfig::default()
    }
}

/// `reps` copies of the XOR truth table over two 0/1 numeric columns.
fn xor_table(reps: usize) -> (RawTable, Targets) {
    let n = 4 * reps;
    let x1: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let x2: Vec<f64> = (0..n).map(|i| ((i / 2) % 2) as f64).collect();
    let y = x1.iter().zip(&x2).map(|(a, b)| if a != b { 1.0 } else { 0.0 }).collect();
    let table = RawTable::new(
        vec!["x1".into(), "x2".into()],
        vec![RawColumn::numeric(&x1), RawColumn::numeric(&x2)],
    )
    .unwrap();
    (table, Targets { values: y, label_map: None })
}

fn noisy_table(seed: u64, n: usize) -> (RawTable, Targets) {
    let mut g = rng(seed);
    let a: Vec<f64> = (0..n).map(|_| g.gen_range(0.0..10.0)).collect();
    let b: Vec<String> = (0..n).map(|_| ["u", "v", "w"][g.gen_range(0..3)].to_string()).collect();
    let y = a
        .iter()
        .zip(&b)
        .map(|(a, b)| f64::from(u8::from((*a > 5.0 && b != "w") != g.gen_bool(0.1))))
        .collect();
    let table = RawTable::new(
        vec!["a".into(), "b".into()],
        vec![RawColumn::numeric(&a), RawColumn::categorical(&b)],
    )
    .unwrap();
    (table, Targets { values: y, label_map: None })
}

#[test]
fn metric_examples() {
    assert_eq!(brier(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
    assert_eq!(brier(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.25);
    assert!((brier(&[0.8, 0.3], &[1.0, 0.0]).unwrap() - 0.065).abs() < 1e-15);
    assert_eq!(accuracy(&[0.5, 0.5], &[1.0, 1.0]).unwrap(), 1.0);
    assert_eq!(accuracy(&[0.4, 0.9], &[1.0, 1.0]).unwrap(), 0.5);
    let y = [1.0, 2.0, 4.0, 7.0];
    assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
    assert_eq!(r_squared(&[3.5; 4], &y).unwrap(), 0.0);
    let p = [1.5, 2.5, 3.0, 6.0];
    let sse: f64 = p.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
    assert!((r_squared(&p, &y).unwrap() - (1.0 - sse / 21.0)).abs() < 1e-15);
}

#[test]
fn cross_validation_is_deterministic() {
    let (table, targets) = noisy_table(1, 60);
    let c = cfg(Variant::LRR, 0.01);
    assert_eq!(
        cross_validate(&table, &targets, &c, 5, 42).unwrap(),
        cross_validate(&table, &targets, &c, 5, 42).unwrap()
    );
}

#[test]
fn leave_one_out_returns_finite_metrics() {
    let (table, targets) = noisy_table(2, 10);
    let m = cross_validate(&table, &targets, &cfg(Variant::LR1, 0.01), 10, 3).unwrap();
    assert_eq!(m.folds.len(), 10);
    assert!(m.brier.mean.is_finite() && m.brier.se.is_finite());
    assert!(m.accuracy.unwrap().mean.is_finite());
}

#[test]
fn too_many_folds_is_an_error() {
    let (table, targets) = noisy_table(2, 5);
    assert!(cross_validate(&table, &targets, &cfg(Variant::LR1, 0.01), 6, 3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stratified_folds_keep_label_proportions(labels in prop::collection::vec(any::<bool>(), 4..80), k in 2usize..6, seed in any::<u64>()) {
        prop_assume!(k <= labels.len());
        let y: Vec<f64> = labels.iter().map(|&b| f64::from(u8::from(b))).collect();
        let fold = stratified_folds(&y, k, seed).unwrap();
        let p = y.iter().sum::<f64>() / y.len() as f64;
        for f in 0..k {
            let members: Vec<usize> = (0..y.len()).filter(|&i| fold[i] == f).collect();
            prop_assert!(!members.is_empty());
            let pos = members.iter().filter(|&&i| y[i] == 1.0).count() as f64;
            prop_assert!((pos - p * members.len() as f64).abs() <= 1.0);
        }
    }
}

#[test]
fn test_rows_never_reach_the_dictionary() {
    let (table, targets) = noisy_table(4, 40);
    let train_rows: Vec<usize> = (0..30).collect();
    let test_rows: Vec<usize> = (30..40).collect();
    // Push the test rows far outside the training range.
    let mut a: Vec<f64> = table.column(0).numbers().iter().map(|v| v.unwrap()).collect();
    for v in &mut a[30..] {
        *v += 1000.0;
    }
    let shifted = RawTable::new(table.column_names().to_vec(), vec![RawColumn::numeric(&a), table.column(1).clone()]).unwrap();
    let full = build_dictionary(&shifted, 9).unwrap();
    let fold = build_dictionary(&shifted.select_rows(&train_rows), 9).unwrap();
    assert_ne!(full.features, fold.features);

    let c = cfg(Variant::LRR, 0.01);
    let got = evaluate_split(&shifted, &targets, &c, &train_rows, &test_rows).unwrap();
    let (model, _) = train_table(&table.select_rows(&train_rows), &targets.select(&train_rows), &c).unwrap();
    let preds = model.predict(&shifted.select_rows(&test_rows)).unwrap();
    assert_eq!(got.brier, brier(&preds, &targets.select(&test_rows).values).unwrap());
}

#[test]
fn select_lambda_cases() {
    let (table, targets) = xor_table(8);
    let c = cfg(Variant::LRR, 1.0);
    assert_eq!(select_lambda(&table, &targets, &c, &[0.3], 4, Criterion::Brier, 1).unwrap(), 0.3);
    // A tiny penalty fits XOR; a huge one leaves the intercept.
    assert_eq!(select_lambda(&table, &targets, &c, &[10.0, 1e-3], 4, Criterion::Brier, 1).unwrap(), 1e-3);
    // Both values shrink everything away and tie.
    assert_eq!(select_lambda(&table, &targets, &c, &[5.0, 10.0], 4, Criterion::Brier, 1).unwrap(), 10.0);
}

#[test]
fn sweep_cases() {
    let (table, targets) = xor_table(8);
    let c = cfg(Variant::LRR, 1.0);
    let one = sweep(&table, &targets, &c, &[0.01], 4, 5).unwrap();
    assert_eq!(one.len(), 1);
    assert!((one[0].lambda1 - 0.002).abs() < 1e-15);

    let points = sweep(&table, &targets, &c, &[1e-3, 1.0, 10.0, 100.0], 4, 5).unwrap();
    assert_eq!(points.iter().map(|p| p.lambda0).collect::<Vec<_>>(), vec![1e-3, 1.0, 10.0, 100.0]);
    assert_eq!(points[0].metrics.accuracy.unwrap().mean, 1.0);
    for p in &points[1..] {
        assert_eq!(p.metrics.weighted_rules.mean, 0.0);
        assert_eq!(p.metrics.accuracy.unwrap().mean, 0.5);
    }
}

fn point(lambda0: f64, brier: f64, weighted_rules: f64) -> TradeoffPoint {
    TradeoffPoint {
        lambda0,
        lambda1: 0.2 * lambda0,
        metrics: MetricSet::from_folds(vec![FoldResult {
            brier,
            accuracy: None,
            r2: 0.0,
            weighted_rules,
            n_rules: weighted_rules as usize,
        }]),
    }
}

#[test]
fn pareto_frontier_of_five_points() {
    let pts = vec![
        point(0.1, 0.10, 5.0),
        point(0.2, 0.12, 3.0),
        point(0.3, 0.11, 6.0),
        point(0.4, 0.20, 1.0),
        point(0.5, 0.15, 4.0),
    ];
    // Enumeration oracle over the same dominance rule.
    let oracle: Vec<f64> = pts
        .iter()
        .filter(|p| {
            !pts.iter().any(|q| {
                q.metrics.brier.mean < p.metrics.brier.mean && q.metrics.weighted_rules.mean < p.metrics.weighted_rules.mean
            })
        })
        .map(|p| p.lambda0)
        .collect();
    assert_eq!(oracle, vec![0.1, 0.2, 0.4]);
    let front: Vec<f64> = pareto(&pts, Criterion::Brier).iter().map(|p| p.lambda0).collect();
    assert_eq!(front, vec![0.4, 0.2, 0.1]);
    assert_eq!(pareto(&pts[..1], Criterion::Brier).len(), 1);
    assert_eq!(pareto(&pts[..2], Criterion::Brier).len(), 2);
    assert_eq!(pareto(&[pts[0].clone(), pts[2].clone()], Criterion::Brier).len(), 1);
}
