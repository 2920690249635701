//! Metrics, k-fold and nested cross-validation, penalty sweeps and Pareto
//! fronts.
//!
//! Every fold rebuilds the binarization dictionary from its training rows, so
//! thresholds and standardization constants never see test data. Folds and
//! grid points run in parallel on the current rayon pool; results are
//! gathered in fold order, so output does not depend on scheduling.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datatable::{RawTable, Targets};
use crate::glm::Family;
use crate::model::DEFAULT_LITERAL_WEIGHT;
use crate::trainer::{train_table, TrainConfig};
use crate::{Error, Result};

const STREAM_FOLDS: u64 = 1;
const STREAM_INNER_FOLDS: u64 = 2;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::SchemaMismatch(format!("{a} predictions for {b} targets")));
    }
    if a == 0 {
        return Err(Error::EmptyTable);
    }
    Ok(())
}

/// Mean squared error of probabilities against 0/1 labels.
pub fn brier(probs: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(probs.len(), labels.len())?;
    Ok(probs.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / probs.len() as f64)
}

/// Fraction of rows where `p ≥ 0.5` agrees with the label.
pub fn accuracy(probs: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(probs.len(), labels.len())?;
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(p, y)| (**p >= 0.5) == (**y >= 0.5))
        .count();
    Ok(hits as f64 / probs.len() as f64)
}

/// `1 − SSE/SST`, with SST about the mean of `targets`; 0 when SST is 0.
pub fn r_squared(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_lengths(preds.len(), targets.len())?;
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let sst: f64 = targets.iter().map(|y| (y - mean) * (y - mean)).sum();
    if sst == 0.0 {
        return Ok(0.0);
    }
    let sse: f64 = preds.iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok(1.0 - sse / sst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over folds divided by √k.
    pub se: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let se = if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            0.0
        };
        Estimate { mean, se }
    }
}

/// Test metrics of one fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// Mean squared error of the predictions (Brier score for logistic).
    pub brier: f64,
    pub accuracy: Option<f64>,
    pub r2: f64,
    pub weighted_rules: f64,
    pub n_rules: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub brier: Estimate,
    /// Logistic family only.
    pub accuracy: Option<Estimate>,
    pub r2: Estimate,
    pub weighted_rules: Estimate,
    pub n_rules: Estimate,
    pub folds: Vec<FoldResult>,
}

impl MetricSet {
    pub fn from_folds(folds: Vec<FoldResult>) -> MetricSet {
        let col = |f: &dyn Fn(&FoldResult) -> f64| Estimate::from_samples(&folds.iter().map(f).collect::<Vec<_>>());
        let accuracy = folds
            .iter()
            .map(|f| f.accuracy)
            .collect::<Option<Vec<f64>>>()
            .map(|xs| Estimate::from_samples(&xs));
        MetricSet {
            brier: col(&|f| f.brier),
            accuracy,
            r2: col(&|f| f.r2),
            weighted_rules: col(&|f| f.weighted_rules),
            n_rules: col(&|f| f.n_rules as f64),
            folds,
        }
    }

    pub fn get(&self, criterion: Criterion) -> Option<Estimate> {
        match criterion {
            Criterion::Brier => Some(self.brier),
            Criterion::Accuracy => self.accuracy,
            Criterion::R2 => Some(self.r2),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Brier,
    Accuracy,
    R2,
}

impl Criterion {
    pub fn default_for(family: Family) -> Criterion {
        match family {
            Family::Logistic => Criterion::Brier,
            Family::Linear => Criterion::R2,
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Criterion::Brier)
    }

    /// True if `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        if self.higher_is_better() {
            a > b
        } else {
            a < b
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "brier" | "mse" => Ok(Criterion::Brier),
            "accuracy" => Ok(Criterion::Accuracy),
            "r2" => Ok(Criterion::R2),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Criterion::Brier => "brier",
            Criterion::Accuracy => "accuracy",
            Criterion::R2 => "r2",
        })
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::Config(format!("{k} folds for {n} rows leaves an empty fold")));
    }
    Ok(())
}

/// Fold index per row for a shuffled split into `k` near-equal folds.
pub fn shuffled_folds(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    check_k(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(seed, STREAM_FOLDS));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    Ok(fold)
}

/// Fold index per row, dealing each class out in turn so that every fold's
/// class counts are within one of the global proportion.
pub fn stratified_folds(labels: &[f64], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = labels.len();
    check_k(n, k)?;
    let mut r = rng(seed, STREAM_FOLDS);
    let mut fold = vec![0; n];
    let mut next = 0;
    for class in [0.0, 1.0] {
        let mut members: Vec<usize> = (0..n).filter(|&i| (labels[i] >= 0.5) == (class >= 0.5)).collect();
        members.shuffle(&mut r);
        for i in members {
            fold[i] = next % k;
            next += 1;
        }
    }
    Ok(fold)
}

fn make_folds(targets: &Targets, family: Family, k: usize, seed: u64) -> Result<Vec<usize>> {
    match family {
        Family::Logistic => stratified_folds(&targets.values, k, seed),
        Family::Linear => shuffled_folds(targets.len(), k, seed),
    }
}

fn split(fold: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    (0..fold.len()).partition(|&i| fold[i] != f)
}

/// Trains on `train_rows` and scores on `test_rows`.
pub fn evaluate_split(
    table: &RawTable,
    targets: &Targets,
    cfg: &TrainConfig,
    train_rows: &[usize],
    test_rows: &[usize],
) -> Result<FoldResult> {
    let (model, _) = train_table(&table.select_rows(train_rows), &targets.select(train_rows), cfg)?;
    let test = table.select_rows(test_rows);
    let y = targets.select(test_rows).values;
    let preds = model.predict(&test)?;
    Ok(FoldResult {
        brier: brier(&preds, &y)?,
        accuracy: match cfg.family {
            Family::Logistic => Some(accuracy(&preds, &y)?),
            Family::Linear => None,
        },
        r2: r_squared(&preds, &y)?,
        weighted_rules: model.complexity(DEFAULT_LITERAL_WEIGHT),
        n_rules: model.n_rules(),
    })
}

fn cv_with_folds(table: &RawTable, targets: &Targets, cfg: &TrainConfig, fold: &[usize], k: usize) -> Result<MetricSet> {
    let results = (0..k)
        .into_par_iter()
        .map(|f| {
            let (train_rows, test_rows) = split(fold, f);
            evaluate_split(table, targets, cfg, &train_rows, &test_rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricSet::from_folds(results))
}

/// k-fold cross-validation; stratified for the logistic family.
pub fn cross_validate(table: &RawTable, targets: &Targets, cfg: &TrainConfig, k: usize, seed: u64) -> Result<MetricSet> {
    let fold = make_folds(targets, cfg.family, k, seed)?;
    cv_with_folds(table, targets, cfg, &fold, k)
}

/// `cfg` at a grid point: λ₁ follows λ₀ at the default ratio.
fn with_lambda(cfg: &TrainConfig, lambda0: f64) -> TrainConfig {
    TrainConfig {
        lambda0,
        lambda1: None,
        ..cfg.clone()
    }
}

/// Grid value with the best inner-CV mean criterion; ties go to the larger λ₀.
pub fn select_lambda(
    table: &RawTable,
    targets: &Targets,
    cfg: &TrainConfig,
    grid: &[f64],
    inner_k: usize,
    criterion: Criterion,
    seed: u64,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let scores = grid
        .par_iter()
        .map(|&l| {
            let m = cross_validate(table, targets, &with_lambda(cfg, l), inner_k, seed)?;
            m.get(criterion)
                .map(|e| e.mean)
                .ok_or_else(|| Error::Config(format!("metric {criterion} is not defined for this family")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for i in 1..grid.len() {
        let (a, b) = (scores[i], scores[best]);
        if criterion.better(a, b) || (a == b && grid[i] > grid[best]) {
            best = i;
        }
    }
    Ok(grid[best])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedResult {
    pub metrics: MetricSet,
    /// λ₀ chosen on each outer training fold.
    pub chosen: Vec<f64>,
}

/// Outer k-fold CV where each training fold picks λ₀ by inner CV.
#[allow(clippy::too_many_arguments)]
pub fn nested_cross_validate(
    table: &RawTable,
    targets: &Targets,
    cfg: &TrainConfig,
    grid: &[f64],
    k: usize,
    inner_k: usize,
    criterion: Criterion,
    seed: u64,
) -> Result<NestedResult> {
    let fold = make_folds(targets, cfg.family, k, seed)?;
    let per_fold = (0..k)
        .into_par_iter()
        .map(|f| {
            let (train_rows, test_rows) = split(&fold, f);
            let inner_table = table.select_rows(&train_rows);
            let inner_targets = targets.select(&train_rows);
            let inner_seed: u64 = rng(seed, STREAM_INNER_FOLDS + f as u64).gen();
            let lambda0 = select_lambda(&inner_table, &inner_targets, cfg, grid, inner_k, criterion, inner_seed)?;
            let r = evaluate_split(table, targets, &with_lambda(cfg, lambda0), &train_rows, &test_rows)?;
            Ok((r, lambda0))
        })
        .collect::<Result<Vec<_>>>()?;
    let (folds, chosen): (Vec<_>, Vec<_>) = per_fold.into_iter().unzip();
    Ok(NestedResult {
        metrics: MetricSet::from_folds(folds),
        chosen,
    })
}

/// `count` values log-spaced from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > 0.0 && count >= 1);
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Twelve λ₀ values log-spaced over `[1e-4, 1]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-4, 1.0, 12)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub lambda0: f64,
    pub lambda1: f64,
    pub metrics: MetricSet,
}

/// One full k-fold CV per grid value, with λ₁ = 0.2·λ₀. All points share
/// the same folds and come back in grid order.
pub fn sweep(
    table: &RawTable,
    targets: &Targets,
    cfg: &TrainConfig,
    grid: &[f64],
    k: usize,
    seed: u64,
) -> Result<Vec<TradeoffPoint>> {
    let fold = make_folds(targets, cfg.family, k, seed)?;
    grid.par_iter()
        .map(|&l| {
            let c = with_lambda(cfg, l);
            Ok(TradeoffPoint {
                lambda0: l,
                lambda1: c.lambda1(),
                metrics: cv_with_folds(table, targets, &c, &fold, k)?,
            })
        })
        .collect()
}

/// Indices of points not dominated by another point that is strictly better
/// on `criterion` and strictly lower in weighted rules, sorted by weighted
/// rules ascending (ties by index).
pub fn pareto_indices(points: &[TradeoffPoint], criterion: Criterion) -> Vec<usize> {
    let perf = |p: &TradeoffPoint| p.metrics.get(criterion).map_or(f64::NAN, |e| e.mean);
    let mut keep: Vec<usize> = (0..points.len())
        .filter(|&i| {
            let (pi, ci) = (perf(&points[i]), points[i].metrics.weighted_rules.mean);
            !points
                .iter()
                .any(|q| criterion.better(perf(q), pi) && q.metrics.weighted_rules.mean < ci)
        })
        .collect();
    keep.sort_by(|&a, &b| {
        points[a]
            .metrics
            .weighted_rules
            .mean
            .total_cmp(&points[b].metrics.weighted_rules.mean)
            .then(a.cmp(&b))
    });
    keep
}

pub fn pareto(points: &[TradeoffPoint], criterion: Criterion) -> Vec<TradeoffPoint> {
    pareto_indices(points, criterion)
        .into_iter()
        .map(|i| points[i].clone())
        .collect()
}

/// Writes the sweep table: one row per point, in input order.
pub fn write_sweep_csv<W: Write>(w: W, points: &[TradeoffPoint], criterion: Criterion) -> Result<()> {
    let front: std::collections::HashSet<usize> = pareto_indices(points, criterion).into_iter().collect();
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "lambda0",
        "lambda1",
        "metric",
        "metric_se",
        "weighted_rules",
        "weighted_rules_se",
        "n_rules",
        "pareto",
    ])?;
    for (i, p) in points.iter().enumerate() {
        let m = p.metrics.get(criterion).unwrap_or(Estimate {
            mean: f64::NAN,
            se: f64::NAN,
        });
        out.write_record([
            p.lambda0.to_string(),
            p.lambda1.to_string(),
            m.mean.to_string(),
            m.se.to_string(),
            p.metrics.weighted_rules.mean.to_string(),
            p.metrics.weighted_rules.se.to_string(),
            p.metrics.n_rules.mean.to_string(),
            u8::from(front.contains(&i)).to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
