//! Exponential-family losses and the weighted-L1 solver.
//!
//! The fitted objective is
//! `(1/n) Σ_i [Φ(η_i) − y_i η_i] + Σ_k λ_k |β_k|` with `η = Σ_k β_k a_·k`.
//! The linear family uses the shifted bracket `½ (y_i − η_i)²`.

use serde::{Deserialize, Serialize};

use crate::bitset::BitSet;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Logistic,
    Linear,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logistic" => Ok(Family::Logistic),
            "linear" => Ok(Family::Linear),
            other => Err(Error::Config(format!("unknown family {other:?}"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Logistic => "logistic",
            Family::Linear => "linear",
        })
    }
}

/// Log-partition function Φ.
#[inline]
pub fn log_partition(family: Family, eta: f64) -> f64 {
    match family {
        Family::Logistic => eta.max(0.0) + (-eta.abs()).exp().ln_1p(),
        Family::Linear => 0.5 * eta * eta,
    }
}

/// Conditional mean Φ′(η).
#[inline]
pub fn predict_mean(family: Family, eta: f64) -> f64 {
    match family {
        Family::Logistic => {
            let p = if eta >= 0.0 {
                1.0 / (1.0 + (-eta).exp())
            } else {
                let e = eta.exp();
                e / (1.0 + e)
            };
            // Keep probabilities strictly inside (0, 1) after saturation.
            p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
        }
        Family::Linear => eta,
    }
}

/// Per-instance loss `Φ(η) − yη`, shifted by `y²/2` for the linear family.
#[inline]
fn loss(family: Family, eta: f64, y: f64) -> f64 {
    match family {
        Family::Logistic => log_partition(family, eta) - y * eta,
        Family::Linear => 0.5 * (y - eta) * (y - eta),
    }
}

/// A column of the design matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    /// The all-ones intercept column.
    Ones,
    /// A 0/1 column, stored as the ascending rows where it is 1.
    Binary(Vec<u32>),
    Dense(Vec<f64>),
}

impl Column {
    pub fn binary(rows: &BitSet) -> Self {
        Column::Binary(rows.iter().map(|i| i as u32).collect())
    }

    /// Calls `f(i, a_ik)` for every row with a nonzero entry.
    #[inline]
    fn for_each(&self, n: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            Column::Ones => (0..n).for_each(|i| f(i, 1.0)),
            Column::Binary(rows) => rows.iter().for_each(|&i| f(i as usize, 1.0)),
            Column::Dense(v) => v.iter().enumerate().filter(|(_, a)| **a != 0.0).for_each(|(i, &a)| f(i, a)),
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        match self {
            Column::Ones => 1.0,
            Column::Binary(rows) => {
                if rows.binary_search(&(i as u32)).is_ok() {
                    1.0
                } else {
                    0.0
                }
            }
            Column::Dense(v) => v[i],
        }
    }
}

/// Columns `a_·k` with per-column penalties `λ_k`. Column 0 is the intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    columns: Vec<Column>,
    penalties: Vec<f64>,
}

impl DesignMatrix {
    /// Intercept-only design; the intercept carries `intercept_penalty`.
    pub fn new(n_rows: usize, intercept_penalty: f64) -> Self {
        assert!(intercept_penalty.is_finite() && intercept_penalty >= 0.0);
        DesignMatrix {
            n_rows,
            columns: vec![Column::Ones],
            penalties: vec![intercept_penalty],
        }
    }

    pub fn push(&mut self, column: Column, penalty: f64) -> usize {
        assert!(penalty.is_finite() && penalty >= 0.0, "penalty must be finite and non-negative");
        match &column {
            Column::Ones => {}
            Column::Binary(rows) => assert!(rows.last().is_none_or(|&i| (i as usize) < self.n_rows)),
            Column::Dense(v) => assert_eq!(v.len(), self.n_rows),
        }
        self.columns.push(column);
        self.penalties.push(penalty);
        self.columns.len() - 1
    }

    pub fn push_binary(&mut self, rows: &BitSet, penalty: f64) -> usize {
        assert_eq!(rows.len(), self.n_rows);
        self.push(Column::binary(rows), penalty)
    }

    pub fn push_dense(&mut self, values: Vec<f64>, penalty: f64) -> usize {
        self.push(Column::Dense(values), penalty)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, k: usize) -> &Column {
        &self.columns[k]
    }

    pub fn penalties(&self) -> &[f64] {
        &self.penalties
    }

    pub fn set_penalty(&mut self, k: usize, penalty: f64) {
        assert!(penalty.is_finite() && penalty >= 0.0);
        self.penalties[k] = penalty;
    }

    /// Sub-design with the given columns, in order. Index 0 must be included
    /// first so that the intercept stays at position 0.
    pub fn select(&self, keep: &[usize]) -> DesignMatrix {
        assert_eq!(keep.first(), Some(&0), "intercept must stay first");
        DesignMatrix {
            n_rows: self.n_rows,
            columns: keep.iter().map(|&k| self.columns[k].clone()).collect(),
            penalties: keep.iter().map(|&k| self.penalties[k]).collect(),
        }
    }

    pub fn linear_predictor(&self, beta: &Coefficients) -> Vec<f64> {
        assert_eq!(beta.len(), self.n_cols());
        let mut eta = vec![0.0; self.n_rows];
        for (col, &b) in self.columns.iter().zip(beta.iter()) {
            if b != 0.0 {
                col.for_each(self.n_rows, |i, a| eta[i] += b * a);
            }
        }
        eta
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Coefficients(pub Vec<f64>);

impl Coefficients {
    pub fn zeros(p: usize) -> Self {
        Coefficients(vec![0.0; p])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }
}

impl std::ops::Index<usize> for Coefficients {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

pub fn objective(family: Family, x: &DesignMatrix, y: &[f64], beta: &Coefficients) -> f64 {
    let eta = x.linear_predictor(beta);
    smooth_value(family, &eta, y) + penalty_value(x, beta)
}

/// `(1/n) Σ_i loss(η_i, y_i)` without the penalty.
pub fn smooth_objective(family: Family, x: &DesignMatrix, y: &[f64], beta: &Coefficients) -> f64 {
    smooth_value(family, &x.linear_predictor(beta), y)
}

fn smooth_value(family: Family, eta: &[f64], y: &[f64]) -> f64 {
    assert_eq!(eta.len(), y.len());
    let n = y.len() as f64;
    eta.iter().zip(y).map(|(&e, &yi)| loss(family, e, yi)).sum::<f64>() / n
}

fn penalty_value(x: &DesignMatrix, beta: &Coefficients) -> f64 {
    x.penalties.iter().zip(beta.iter()).map(|(l, b)| l * b.abs()).sum()
}

/// `r_i = Φ′(η_i) − y_i`.
pub fn residuals(family: Family, x: &DesignMatrix, y: &[f64], beta: &Coefficients) -> Vec<f64> {
    let eta = x.linear_predictor(beta);
    eta.iter().zip(y).map(|(&e, &yi)| predict_mean(family, e) - yi).collect()
}

/// Gradient of the smooth part: `g_k = (1/n) Σ_i r_i a_ik`.
pub fn gradient_smooth(family: Family, x: &DesignMatrix, y: &[f64], beta: &Coefficients) -> Vec<f64> {
    let r = residuals(family, x, y, beta);
    column_gradients(x, &r)
}

fn column_gradients(x: &DesignMatrix, r: &[f64]) -> Vec<f64> {
    let n = x.n_rows as f64;
    x.columns
        .iter()
        .map(|col| {
            let mut g = 0.0;
            col.for_each(x.n_rows, |i, a| g += r[i] * a);
            g / n
        })
        .collect()
}

/// Largest violation of the weighted-L1 optimality conditions.
pub fn kkt_residual(x: &DesignMatrix, gradient: &[f64], beta: &Coefficients) -> f64 {
    gradient
        .iter()
        .zip(beta.iter())
        .zip(&x.penalties)
        .map(|((&g, &b), &lambda)| {
            if b == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g + lambda * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    /// Target KKT residual.
    pub tol: f64,
    /// Budget in coordinate sweeps.
    pub max_iter: usize,
    /// Abort when some |β_k| exceeds this (used to detect unpenalized
    /// divergence under separation).
    pub divergence_bound: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-7,
            max_iter: 10_000,
            divergence_bound: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub coefficients: Coefficients,
    pub kkt_residual: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub diverged: bool,
    /// Objective after each sweep, starting with the initial point.
    pub objective_trace: Vec<f64>,
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Curvature floor for logistic weights near saturation.
const MIN_WEIGHT: f64 = 1e-5;
/// Sufficient-decrease constant of the backtracking line search.
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;
/// Coordinate sweeps allowed on one quadratic model.
const MAX_INNER_SWEEPS: usize = 1000;

/// Coordinate descent on the penalized quadratic model
/// `gᵀδ + ½ δᵀ (AᵀWA/n) δ + Σ λ_k |β_k + δ_k|`. Returns `δ`, `Aδ` and the
/// number of sweeps used.
fn solve_model(
    x: &DesignMatrix,
    beta: &[f64],
    g: &[f64],
    w: &[f64],
    tol: f64,
    budget: usize,
) -> (Vec<f64>, Vec<f64>, usize) {
    let n = x.n_rows;
    let nf = n as f64;
    let p = x.n_cols();
    let h: Vec<f64> = x
        .columns
        .iter()
        .map(|c| {
            let mut acc = 0.0;
            c.for_each(n, |i, a| acc += w[i] * a * a);
            acc / nf
        })
        .collect();
    let mut delta = vec![0.0; p];
    let mut q = vec![0.0; n];
    let mut sweeps = 0;
    let step = |k: usize, delta: &mut [f64], q: &mut [f64]| -> f64 {
        if h[k] <= 0.0 {
            return 0.0;
        }
        let mut curv = 0.0;
        x.columns[k].for_each(n, |i, a| curv += w[i] * a * q[i]);
        let grad = g[k] + curv / nf;
        let cur = beta[k] + delta[k];
        let lambda = x.penalties[k];
        let next = soft_threshold(cur - grad / h[k], lambda / h[k]);
        let d = next - cur;
        if d != 0.0 {
            delta[k] += d;
            x.columns[k].for_each(n, |i, a| q[i] += d * a);
        }
        (h[k] * d).abs()
    };
    while sweeps < budget {
        let mut full_change = 0.0f64;
        for k in 0..p {
            full_change = full_change.max(step(k, &mut delta, &mut q));
        }
        sweeps += 1;
        if full_change <= tol {
            break;
        }
        let active: Vec<usize> = (0..p).filter(|&k| beta[k] + delta[k] != 0.0).collect();
        while sweeps < budget {
            let mut change = 0.0f64;
            for &k in &active {
                change = change.max(step(k, &mut delta, &mut q));
            }
            sweeps += 1;
            if change <= tol {
                break;
            }
        }
    }
    (delta, q, sweeps)
}

/// Minimizes the weighted-L1 objective by proximal Newton iterations: each
/// outer step solves a penalized quadratic model by cyclic coordinate
/// descent with soft-thresholding, then backtracks along the step until the
/// true objective decreases sufficiently. The linear family's model is
/// exact, so one outer step suffices up to the inner tolerance.
/// Non-convergence is reported through [`FitResult::converged`], not as an
/// error.
pub fn fit_weighted_l1(
    family: Family,
    x: &DesignMatrix,
    y: &[f64],
    warm: Option<&Coefficients>,
    options: &FitOptions,
) -> FitResult {
    assert_eq!(x.n_rows, y.len(), "design and targets disagree on n");
    assert!(options.tol > 0.0, "tol must be positive");
    let n = x.n_rows;
    let p = x.n_cols();
    let mut beta = vec![0.0; p];
    if let Some(w) = warm {
        for (b, &w) in beta.iter_mut().zip(w.iter()) {
            *b = w;
        }
    }
    let mut eta = x.linear_predictor(&Coefficients(beta.clone()));
    let penalty = |beta: &[f64]| -> f64 { x.penalties.iter().zip(beta).map(|(l, b)| l * b.abs()).sum() };
    let mut obj = smooth_value(family, &eta, y) + penalty(&beta);
    let mut trace = vec![obj];
    let mut sweeps = 0;
    let mut diverged = false;
    let exceeds = |beta: &[f64]| options.divergence_bound.is_some_and(|bound| beta.iter().any(|b| b.abs() > bound));
    let mut kkt;
    loop {
        let mu: Vec<f64> = eta.iter().map(|&e| predict_mean(family, e)).collect();
        let r: Vec<f64> = mu.iter().zip(y).map(|(m, yi)| m - yi).collect();
        let g = column_gradients(x, &r);
        kkt = kkt_residual(x, &g, &Coefficients(beta.clone()));
        if kkt <= options.tol || sweeps >= options.max_iter {
            break;
        }
        let w: Vec<f64> = match family {
            Family::Linear => vec![1.0; n],
            Family::Logistic => mu.iter().map(|m| (m * (1.0 - m)).max(MIN_WEIGHT)).collect(),
        };
        let inner_tol = (0.1 * kkt).max(0.25 * options.tol);
        let budget = MAX_INNER_SWEEPS.min(options.max_iter - sweeps);
        let (delta, q, used) = solve_model(x, &beta, &g, &w, inner_tol, budget);
        sweeps += used;
        let pen_old = penalty(&beta);
        let trial = |t: f64| -> Vec<f64> { beta.iter().zip(&delta).map(|(b, d)| b + t * d).collect() };
        let decrease = g.iter().zip(&delta).map(|(gk, d)| gk * d).sum::<f64>() + penalty(&trial(1.0)) - pen_old;
        if decrease >= 0.0 {
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let nb = trial(t);
            let ne: Vec<f64> = eta.iter().zip(&q).map(|(e, qi)| e + t * qi).collect();
            let nobj = smooth_value(family, &ne, y) + penalty(&nb);
            if nobj <= obj + ARMIJO * t * decrease {
                accepted = Some((nb, ne, nobj));
                break;
            }
            t *= 0.5;
        }
        let Some((nb, ne, nobj)) = accepted else {
            break;
        };
        beta = nb;
        eta = ne;
        obj = nobj;
        trace.push(obj);
        if exceeds(&beta) {
            diverged = true;
            break;
        }
    }
    FitResult {
        coefficients: Coefficients(beta),
        kkt_residual: kkt,
        sweeps,
        converged: !diverged && kkt <= options.tol,
        diverged,
        objective_trace: trace,
    }
}
