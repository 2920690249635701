//! Column-generation training loop and the final unpenalized refit.

use std::collections::HashSet;
use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::binarizer::{binarize, build_dictionary, BinarizedDataset, DEFAULT_QUANTILES};
use crate::datatable::{RawTable, Targets};
use crate::glm::{self, Coefficients, DesignMatrix, Family, FitOptions};
use crate::model::{NumericTerm, RuleEnsemble};
use crate::pricing::{
    price_exact, price_heuristic, Conjunction, FeatureSpace, PricedColumn, PricingConfig, PricingMode,
    PricingProblem, Sign,
};
use crate::{Error, Result};

/// Reduced-cost tolerance for adding a column.
pub const EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// First-degree rules only.
    LR1,
    /// First-degree rules plus standardized raw numeric columns.
    LR1N,
    /// Rules of any degree by column generation.
    LRR,
    /// Column generation plus raw numeric columns.
    LRRN,
}

impl Variant {
    pub fn uses_pricing(self) -> bool {
        matches!(self, Variant::LRR | Variant::LRRN)
    }

    pub fn uses_numeric(self) -> bool {
        matches!(self, Variant::LR1N | Variant::LRRN)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LR1" => Ok(Variant::LR1),
            "LR1N" => Ok(Variant::LR1N),
            "LRR" => Ok(Variant::LRR),
            "LRRN" => Ok(Variant::LRRN),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub family: Family,
    pub variant: Variant,
    pub lambda0: f64,
    /// Per-literal penalty; `None` means `0.2 · lambda0`.
    pub lambda1: Option<f64>,
    pub penalize_intercept: bool,
    pub max_cg_iters: usize,
    pub time_budget: Duration,
    pub pricing: PricingConfig,
    pub debias: bool,
    pub debias_threshold: f64,
    /// KKT tolerance of the restricted fits.
    pub fit_tol: f64,
    pub max_sweeps: usize,
    /// Quantile thresholds per numeric column when binarizing a table.
    pub quantiles: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            family: Family::Logistic,
            variant: Variant::LRR,
            lambda0: 1e-3,
            lambda1: None,
            penalize_intercept: false,
            max_cg_iters: 100,
            time_budget: Duration::from_secs(300),
            pricing: PricingConfig::default(),
            debias: true,
            debias_threshold: 1e-5,
            fit_tol: 1e-9,
            max_sweeps: 10_000,
            quantiles: DEFAULT_QUANTILES,
        }
    }
}

impl TrainConfig {
    pub fn lambda1(&self) -> f64 {
        self.lambda1.unwrap_or(0.2 * self.lambda0)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lambda0) || !ok(self.lambda1()) {
            return Err(Error::Config("lambda0 and lambda1 must be finite and non-negative".into()));
        }
        if self.fit_tol.is_nan() || self.fit_tol <= 0.0 || self.debias_threshold.is_nan() || self.debias_threshold < 0.0 {
            return Err(Error::Config("fit_tol must be positive and debias_threshold non-negative".into()));
        }
        if self.quantiles == 0 {
            return Err(Error::Config("quantiles must be at least 1".into()));
        }
        self.pricing.validate()
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            tol: self.fit_tol,
            max_iter: self.max_sweeps,
            divergence_bound: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    CertifiedOptimal,
    MaxIters,
    TimeBudget,
    NoImprovingColumn,
    /// First-degree variants fit once without pricing.
    NoColumnGeneration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AddedColumn {
    pub literals: Vec<usize>,
    pub sign: Sign,
    pub reduced_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Restricted objective at the fitted coefficients.
    pub objective: f64,
    pub kkt_residual: f64,
    pub converged: bool,
    pub best_reduced_cost_plus: Option<f64>,
    pub best_reduced_cost_minus: Option<f64>,
    pub added: Vec<AddedColumn>,
    /// Columns with nonzero coefficients, intercept included.
    pub active_columns: usize,
    pub total_columns: usize,
    pub elapsed_secs: f64,
    /// Fitted coefficients, aligned with the restricted set at this iteration.
    pub coefficients: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub iterations: Vec<IterationRecord>,
    pub termination: TerminationReason,
    pub warnings: Vec<String>,
}

impl TrainTrace {
    /// One JSON object per iteration, then a summary line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for rec in &self.iterations {
            serde_json::to_writer(&mut w, rec)?;
            writeln!(w)?;
        }
        let summary = serde_json::json!({
            "termination": self.termination,
            "warnings": self.warnings,
        });
        serde_json::to_writer(&mut w, &summary)?;
        writeln!(w)
    }
}

/// What a restricted-set column represents.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Intercept,
    Rule(Conjunction),
    /// Index into the dataset's numeric block.
    Numeric(usize),
}

#[derive(Clone, Debug)]
pub struct RestrictedSet {
    pub design: DesignMatrix,
    pub terms: Vec<Term>,
}

impl RestrictedSet {
    fn push_rule(&mut self, data: &BinarizedDataset, conjunction: Conjunction, lambda0: f64, lambda1: f64) {
        let rows = data.conjunction_rows(conjunction.literals());
        let penalty = lambda0 + lambda1 * conjunction.degree() as f64;
        self.design.push_binary(&rows, penalty);
        self.terms.push(Term::Rule(conjunction));
    }

    fn rules(&self) -> HashSet<Conjunction> {
        self.terms
            .iter()
            .filter_map(|t| match t {
                Term::Rule(c) => Some(c.clone()),
                _ => None,
            })
            .collect()
    }
}

/// Intercept, one column per singleton-basis feature, and the raw numeric
/// columns for the `N` variants.
pub fn init_restricted_set(data: &BinarizedDataset, cfg: &TrainConfig) -> RestrictedSet {
    let lambda0 = cfg.lambda0;
    let lambda1 = cfg.lambda1();
    let intercept_penalty = if cfg.penalize_intercept { lambda0 } else { 0.0 };
    let mut set = RestrictedSet {
        design: DesignMatrix::new(data.n_rows(), intercept_penalty),
        terms: vec![Term::Intercept],
    };
    for &j in &data.dictionary().singleton_basis {
        set.push_rule(data, Conjunction::new(vec![j]), lambda0, lambda1);
    }
    if cfg.variant.uses_numeric() {
        if let Some(block) = data.numeric_raw() {
            for (m, values) in block.values.iter().enumerate() {
                set.design.push_dense(values.clone(), lambda0);
                set.terms.push(Term::Numeric(m));
            }
        }
    }
    set
}

fn best_objective(cols: &[PricedColumn]) -> Option<f64> {
    cols.first().map(|c| c.objective)
}

/// Trains a rule ensemble on a binarized dataset.
pub fn train(data: &BinarizedDataset, cfg: &TrainConfig) -> Result<(RuleEnsemble, TrainTrace)> {
    cfg.validate()?;
    let start = Instant::now();
    let y = data.targets();
    let family = cfg.family;
    let lambda0 = cfg.lambda0;
    let lambda1 = cfg.lambda1();
    let opts = cfg.fit_options();
    let mut set = init_restricted_set(data, cfg);
    let space = FeatureSpace::from_dataset(data, cfg.pricing.literal_pool);
    let certifiable = cfg.pricing.mode == PricingMode::Exact && cfg.pricing.d_max >= space.candidates().len();

    let mut beta = Coefficients::zeros(set.design.n_cols());
    let mut iterations = Vec::new();
    let mut warnings = Vec::new();
    let termination;
    let mut iteration = 0;
    loop {
        let fit = glm::fit_weighted_l1(family, &set.design, y, Some(&beta), &opts);
        if !fit.converged {
            warnings.push(format!(
                "restricted fit {iteration} did not converge (KKT residual {:.3e})",
                fit.kkt_residual
            ));
        }
        beta = fit.coefficients;
        let objective = glm::objective(family, &set.design, y, &beta);
        let mut record = IterationRecord {
            iteration,
            objective,
            kkt_residual: fit.kkt_residual,
            converged: fit.converged,
            best_reduced_cost_plus: None,
            best_reduced_cost_minus: None,
            added: Vec::new(),
            active_columns: beta.iter().filter(|b| **b != 0.0).count(),
            total_columns: set.design.n_cols(),
            elapsed_secs: 0.0,
            coefficients: beta.0.clone(),
        };

        if !cfg.variant.uses_pricing() {
            record.elapsed_secs = start.elapsed().as_secs_f64();
            iterations.push(record);
            termination = TerminationReason::NoColumnGeneration;
            break;
        }
        if iteration >= cfg.max_cg_iters {
            record.elapsed_secs = start.elapsed().as_secs_f64();
            iterations.push(record);
            termination = TerminationReason::MaxIters;
            break;
        }
        if start.elapsed() > cfg.time_budget {
            record.elapsed_secs = start.elapsed().as_secs_f64();
            iterations.push(record);
            termination = TerminationReason::TimeBudget;
            break;
        }

        let r = glm::residuals(family, &set.design, y, &beta);
        let present = set.rules();
        let price = |sign: Sign| -> (Vec<PricedColumn>, bool) {
            let problem = PricingProblem {
                space: &space,
                residuals: &r,
                lambda0,
                lambda1,
                sign,
                config: cfg.pricing.clone(),
                exclude: Some(&present),
            };
            match cfg.pricing.mode {
                PricingMode::Heuristic => (price_heuristic(&problem), false),
                PricingMode::Exact => {
                    let out = price_exact(&problem);
                    (out.column.into_iter().collect(), out.certified)
                }
            }
        };
        let ((plus, cert_plus), (minus, cert_minus)) = rayon::join(|| price(Sign::Plus), || price(Sign::Minus));
        record.best_reduced_cost_plus = best_objective(&plus);
        record.best_reduced_cost_minus = best_objective(&minus);
        let best = plus.iter().chain(&minus).map(|c| c.objective).fold(f64::INFINITY, f64::min);

        if best >= -EPSILON {
            record.elapsed_secs = start.elapsed().as_secs_f64();
            iterations.push(record);
            termination = if certifiable && cert_plus && cert_minus {
                TerminationReason::CertifiedOptimal
            } else {
                TerminationReason::NoImprovingColumn
            };
            break;
        }

        let mut seen = present;
        for (sign, cols) in [(Sign::Plus, plus), (Sign::Minus, minus)] {
            for col in cols.into_iter().take(cfg.pricing.k_best) {
                if col.objective >= -EPSILON || !seen.insert(col.conjunction.clone()) {
                    continue;
                }
                record.added.push(AddedColumn {
                    literals: col.conjunction.literals().to_vec(),
                    sign,
                    reduced_cost: col.objective,
                });
                set.design.push_binary(&col.column_bits, lambda0 + lambda1 * col.conjunction.degree() as f64);
                set.terms.push(Term::Rule(col.conjunction));
                beta.0.push(0.0);
            }
        }
        let added_any = !record.added.is_empty();
        record.elapsed_secs = start.elapsed().as_secs_f64();
        iterations.push(record);
        if !added_any {
            termination = TerminationReason::NoImprovingColumn;
            break;
        }
        iteration += 1;
    }

    if cfg.debias {
        let out = debias(family, &set.design, y, &beta, cfg.debias_threshold, &opts);
        if let Some(w) = out.warning {
            warnings.push(w);
        }
        beta = out.coefficients;
    }
    let ensemble = assemble(data, &set, &beta, family);
    Ok((
        ensemble,
        TrainTrace {
            iterations,
            termination,
            warnings,
        },
    ))
}

fn assemble(
    data: &BinarizedDataset,
    set: &RestrictedSet,
    beta: &Coefficients,
    family: Family,
) -> RuleEnsemble {
    let mut intercept = 0.0;
    let mut rules = Vec::new();
    let mut numeric = Vec::new();
    for (term, &b) in set.terms.iter().zip(beta.iter()) {
        match term {
            Term::Intercept => intercept = b,
            _ if b == 0.0 => {}
            Term::Rule(c) => rules.push((c.clone(), b)),
            Term::Numeric(m) => {
                let block = data.numeric_raw().expect("numeric block");
                let column = block.source_columns[*m];
                let schema = &data.dictionary().columns[column];
                numeric.push(NumericTerm {
                    column: schema.name.clone(),
                    mean: schema.mean.unwrap_or(0.0),
                    scale: schema.scale.unwrap_or(1.0),
                    coef: b,
                });
            }
        }
    }
    RuleEnsemble::new(family, intercept, rules, numeric, data.dictionary(), None)
}

#[derive(Clone, Debug)]
pub struct DebiasOutcome {
    /// Full-length coefficients; dropped columns are zero.
    pub coefficients: Coefficients,
    /// Columns kept for the refit, intercept first.
    pub support: Vec<usize>,
    pub warning: Option<String>,
}

/// Bound on |β| beyond which an unpenalized logistic refit is treated as
/// diverging under separation. A separated fit meets the KKT tolerance only
/// at margins around 20, which puts some coefficient well past this.
pub const DIVERGENCE_BOUND: f64 = 30.0;

/// Keeps the intercept and every column with `|β_k| > threshold`, then refits
/// those columns with all penalties set to zero, starting from `beta`.
pub fn debias(
    family: Family,
    x: &DesignMatrix,
    y: &[f64],
    beta: &Coefficients,
    threshold: f64,
    opts: &FitOptions,
) -> DebiasOutcome {
    let support: Vec<usize> = std::iter::once(0)
        .chain((1..x.n_cols()).filter(|&k| beta[k].abs() > threshold))
        .collect();
    let mut sub = x.select(&support);
    for k in 0..sub.n_cols() {
        sub.set_penalty(k, 0.0);
    }
    let warm = Coefficients(support.iter().map(|&k| beta[k]).collect());
    let refit_opts = FitOptions {
        divergence_bound: (family == Family::Logistic).then_some(DIVERGENCE_BOUND),
        ..opts.clone()
    };
    let fit = glm::fit_weighted_l1(family, &sub, y, Some(&warm), &refit_opts);
    let mut warning = None;
    let refit = if fit.diverged {
        warning = Some("unpenalized refit diverged (separable support); keeping penalized coefficients".to_string());
        warm
    } else {
        if !fit.converged {
            warning = Some(format!(
                "unpenalized refit did not converge (KKT residual {:.3e})",
                fit.kkt_residual
            ));
        }
        fit.coefficients
    };
    let mut full = vec![0.0; x.n_cols()];
    for (&k, &b) in support.iter().zip(refit.iter()) {
        full[k] = b;
    }
    DebiasOutcome {
        coefficients: Coefficients(full),
        support,
        warning,
    }
}

/// Builds the dictionary on `table`, binarizes it and trains. The returned
/// ensemble carries the label map of `targets`.
pub fn train_table(table: &RawTable, targets: &Targets, cfg: &TrainConfig) -> Result<(RuleEnsemble, TrainTrace)> {
    cfg.validate()?;
    let dict = build_dictionary(table, cfg.quantiles)?;
    let data = binarize(table, &dict, targets, cfg.variant.uses_numeric())?;
    let (mut model, trace) = train(&data, cfg)?;
    model.label_map = targets.label_map.clone();
    Ok((model, trace))
}
