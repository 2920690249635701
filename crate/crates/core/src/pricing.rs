//! Pricing: search for conjunctions with negative reduced cost.
//!
//! For residuals `r` and sign `±`, a conjunction with row set `A` and degree
//! `D` has reduced cost `±(1/n) Σ_{i∈A} r_i + λ0 + λ1·D`. Writing
//! `s_i = ±r_i / n`, adding literal `j` to a parent with active rows `A`
//! changes the value by `Δv(j) = λ1 − Σ_{i∈A, x_ij=0} s_i`, and every strict
//! descendant of that child is bounded below (relative to the parent) by
//! `LB(j) = 2λ1 − Σ_{i∈A, s_i>0} s_i − Σ_{i∈A, x_ij=0, s_i<0} s_i`.
//!
//! [`price_heuristic`] walks one parent per degree (or a beam of them),
//! choosing the child with the smallest `(Δv + LB) / 2`. [`price_exact`] is a
//! depth-first branch-and-bound over the same literal space.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::binarizer::BinarizedDataset;
use crate::bitset::BitSet;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Sorted, duplicate-free set of feature indices read as a logical AND.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Conjunction(Vec<usize>);

impl Conjunction {
    pub fn new(mut literals: Vec<usize>) -> Self {
        literals.sort_unstable();
        literals.dedup();
        Conjunction(literals)
    }

    pub fn literals(&self) -> &[usize] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PricingMode {
    Heuristic,
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EarlyStop {
    None,
    /// Return as soon as a negative objective is seen.
    Immediate,
    /// Finish the current degree, then return if a negative objective was seen.
    AfterDegree,
}

impl std::str::FromStr for PricingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heuristic" => Ok(PricingMode::Heuristic),
            "exact" => Ok(PricingMode::Exact),
            other => Err(Error::Config(format!("unknown pricing mode {other:?}"))),
        }
    }
}

impl std::str::FromStr for EarlyStop {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(EarlyStop::None),
            "immediate" => Ok(EarlyStop::Immediate),
            "after_degree" => Ok(EarlyStop::AfterDegree),
            other => Err(Error::Config(format!("unknown early-stop rule {other:?}"))),
        }
    }
}

impl std::str::FromStr for LiteralPool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(LiteralPool::All),
            "basis" => Ok(LiteralPool::Basis),
            other => Err(Error::Config(format!("unknown literal pool {other:?}"))),
        }
    }
}

/// Which features may appear as literals in generated conjunctions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiteralPool {
    /// Every binarized feature, including `>` and `≠` literals.
    All,
    /// Only the singleton basis (`≤` and `=` literals).
    Basis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PricingConfig {
    pub mode: PricingMode,
    pub d_max: usize,
    #[serde(rename = "beam")]
    pub beam_width: usize,
    pub k_best: usize,
    pub early_stop: EarlyStop,
    pub node_budget: u64,
    pub literal_pool: LiteralPool,
}

impl Default for PricingConfig {
    fn default() -> Self {
        PricingConfig {
            mode: PricingMode::Heuristic,
            d_max: 5,
            beam_width: 1,
            k_best: 1,
            early_stop: EarlyStop::None,
            node_budget: 10_000_000,
            literal_pool: LiteralPool::All,
        }
    }
}

impl PricingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_max == 0 {
            return Err(Error::Config("pricing.d_max must be at least 1".into()));
        }
        if self.beam_width == 0 || self.k_best == 0 {
            return Err(Error::Config("pricing.beam and pricing.k_best must be at least 1".into()));
        }
        Ok(())
    }
}

/// Feature columns, pairwise conflicts and the candidate literals.
#[derive(Clone, Debug)]
pub struct FeatureSpace<'a> {
    bits: &'a [BitSet],
    conflicts: Vec<BitSet>,
    candidates: Vec<usize>,
    n_rows: usize,
}

impl<'a> FeatureSpace<'a> {
    pub fn from_dataset(data: &'a BinarizedDataset, pool: LiteralPool) -> Self {
        let dict = data.dictionary();
        let candidates = match pool {
            LiteralPool::All => (0..data.n_features()).collect(),
            LiteralPool::Basis => dict.singleton_basis.clone(),
        };
        FeatureSpace {
            bits: data.features(),
            conflicts: dict.conflicts(),
            candidates,
            n_rows: data.n_rows(),
        }
    }

    /// Features with no conflicts other than themselves.
    pub fn unconstrained(bits: &'a [BitSet]) -> Self {
        let d = bits.len();
        FeatureSpace {
            bits,
            conflicts: (0..d).map(|j| BitSet::from_indices(d, [j])).collect(),
            candidates: (0..d).collect(),
            n_rows: bits.first().map_or(0, BitSet::len),
        }
    }

    pub fn with_conflicts(bits: &'a [BitSet], pairs: &[(usize, usize)]) -> Self {
        let mut s = FeatureSpace::unconstrained(bits);
        for &(a, b) in pairs {
            s.conflicts[a].insert(b);
            s.conflicts[b].insert(a);
        }
        s
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.bits.len()
    }

    pub fn feature(&self, j: usize) -> &BitSet {
        &self.bits[j]
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn conflict(&self, a: usize, b: usize) -> bool {
        self.conflicts[a].contains(b)
    }

    pub fn conflicts_of(&self, j: usize) -> &BitSet {
        &self.conflicts[j]
    }

    /// True if no two literals conflict.
    pub fn admissible(&self, literals: &[usize]) -> bool {
        literals
            .iter()
            .enumerate()
            .all(|(a, &x)| literals[a + 1..].iter().all(|&y| !self.conflict(x, y)))
    }

    pub fn rows_of(&self, literals: &[usize]) -> BitSet {
        let mut rows = BitSet::full(self.n_rows);
        for &j in literals {
            rows.intersect_with(&self.bits[j]);
        }
        rows
    }
}

pub struct PricingProblem<'a> {
    pub space: &'a FeatureSpace<'a>,
    pub residuals: &'a [f64],
    pub lambda0: f64,
    pub lambda1: f64,
    pub sign: Sign,
    pub config: PricingConfig,
    /// Conjunctions that may not be returned (already in the model).
    pub exclude: Option<&'a HashSet<Conjunction>>,
}

impl PricingProblem<'_> {
    fn scaled(&self) -> Vec<f64> {
        let n = self.residuals.len() as f64;
        let sg = self.sign.value();
        self.residuals.iter().map(|r| sg * r / n).collect()
    }

    fn value(&self, support_sum: f64, degree: usize) -> f64 {
        conjunction_value(support_sum, self.residuals.len(), self.lambda0, self.lambda1, degree, self.sign)
    }

    fn excluded(&self, literals: &[usize]) -> bool {
        self.exclude.is_some_and(|ex| ex.contains(&Conjunction(literals.to_vec())))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PricedColumn {
    pub conjunction: Conjunction,
    pub objective: f64,
    pub column_bits: BitSet,
}

#[inline]
fn conjunction_value(support_sum: f64, n: usize, lambda0: f64, lambda1: f64, degree: usize, sign: Sign) -> f64 {
    sign.value() * support_sum / n as f64 + lambda0 + lambda1 * degree as f64
}

/// `±(1/n) Σ_i r_i a_i + λ0 + λ1·degree`.
pub fn reduced_cost(column_bits: &BitSet, r: &[f64], lambda0: f64, lambda1: f64, degree: usize, sign: Sign) -> f64 {
    assert_eq!(column_bits.len(), r.len());
    conjunction_value(column_bits.sum_over(r), r.len(), lambda0, lambda1, degree, sign)
}

/// Change in objective from adding `feature` to a parent with `active` rows.
pub fn delta_v(feature: &BitSet, active: &BitSet, r: &[f64], lambda1: f64, sign: Sign) -> f64 {
    let n = r.len() as f64;
    lambda1 - sign.value() * active.sum_over_difference(feature, r) / n
}

/// Lower bound, relative to the parent, on every strict descendant of the
/// child obtained by adding `feature`.
pub fn lower_bound(feature: &BitSet, active: &BitSet, r: &[f64], lambda1: f64, sign: Sign) -> f64 {
    let n = r.len() as f64;
    let sg = sign.value();
    let mut pos = 0.0;
    for i in active.iter() {
        let s = sg * r[i] / n;
        if s > 0.0 {
            pos += s;
        }
    }
    let mut neg_removed = 0.0;
    for (w, (&a, &f)) in active.words().iter().zip(feature.words()).enumerate() {
        let mut bits = a & !f;
        while bits != 0 {
            let i = w * 64 + bits.trailing_zeros() as usize;
            let s = sg * r[i] / n;
            if s < 0.0 {
                neg_removed += s;
            }
            bits &= bits - 1;
        }
    }
    2.0 * lambda1 - pos - neg_removed
}

fn sum_positive(active: &BitSet, s: &[f64]) -> f64 {
    active.iter().map(|i| s[i]).filter(|&v| v > 0.0).sum()
}

fn sum_negative_difference(active: &BitSet, feature: &BitSet, s: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (w, (&a, &f)) in active.words().iter().zip(feature.words()).enumerate() {
        let mut bits = a & !f;
        while bits != 0 {
            let v = s[w * 64 + bits.trailing_zeros() as usize];
            if v < 0.0 {
                acc += v;
            }
            bits &= bits - 1;
        }
    }
    acc
}

fn sum_negative_intersection(active: &BitSet, feature: &BitSet, s: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (w, (&a, &f)) in active.words().iter().zip(feature.words()).enumerate() {
        let mut bits = a & f;
        while bits != 0 {
            let v = s[w * 64 + bits.trailing_zeros() as usize];
            if v < 0.0 {
                acc += v;
            }
            bits &= bits - 1;
        }
    }
    acc
}

fn cmp_candidate(a: &(f64, Vec<usize>), b: &(f64, Vec<usize>)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1))
}

/// Best `k` distinct conjunctions seen so far, ordered by (value, literals).
struct Incumbents {
    k: usize,
    items: Vec<(f64, Vec<usize>)>,
}

impl Incumbents {
    fn new(k: usize) -> Self {
        Incumbents { k, items: Vec::new() }
    }

    fn threshold(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].0
        }
    }

    fn best(&self) -> f64 {
        self.items.first().map_or(f64::INFINITY, |c| c.0)
    }

    fn offer(&mut self, value: f64, literals: Vec<usize>) {
        let cand = (value, literals);
        if self.items.len() == self.k && cmp_candidate(&cand, &self.items[self.k - 1]) != Ordering::Less {
            return;
        }
        if self.items.iter().any(|c| c.1 == cand.1) {
            return;
        }
        let pos = self.items.partition_point(|c| cmp_candidate(c, &cand) == Ordering::Less);
        self.items.insert(pos, cand);
        self.items.truncate(self.k);
    }
}

fn finish(p: &PricingProblem<'_>, items: Vec<(f64, Vec<usize>)>) -> Vec<PricedColumn> {
    let mut out: Vec<PricedColumn> = items
        .into_iter()
        .map(|(_, literals)| {
            let rows = p.space.rows_of(&literals);
            let objective = reduced_cost(&rows, p.residuals, p.lambda0, p.lambda1, literals.len(), p.sign);
            PricedColumn {
                conjunction: Conjunction(literals),
                objective,
                column_bits: rows,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.objective
            .total_cmp(&b.objective)
            .then_with(|| a.conjunction.cmp(&b.conjunction))
    });
    out
}

struct Parent {
    literals: Vec<usize>,
    active: BitSet,
    value: f64,
    /// Features that may not be added: chosen literals and their conflicts.
    blocked: BitSet,
}

/// Expanded children recorded for inspection by tests.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpandedChild {
    pub parent: Vec<usize>,
    pub parent_value: f64,
    pub feature: usize,
    pub delta_v: f64,
    pub lower_bound: f64,
}

/// Heuristic pricing. Returns up to `k_best` conjunctions sorted by
/// objective; each objective is recomputed from the column bits.
pub fn price_heuristic(p: &PricingProblem<'_>) -> Vec<PricedColumn> {
    price_heuristic_traced(p, None)
}

pub fn price_heuristic_traced(p: &PricingProblem<'_>, mut log: Option<&mut Vec<ExpandedChild>>) -> Vec<PricedColumn> {
    let cfg = &p.config;
    let space = p.space;
    let n = space.n_rows();
    let d = space.n_features();
    assert_eq!(p.residuals.len(), n, "residuals and rows disagree");
    assert!(cfg.d_max >= 1);
    let s = p.scaled();
    let mut inc = Incumbents::new(cfg.k_best);

    let root_active = BitSet::full(n);
    let root_value = p.value(root_active.sum_over(p.residuals), 0);
    let mut beam = vec![Parent {
        literals: Vec::new(),
        active: root_active,
        value: root_value,
        blocked: BitSet::new(d),
    }];

    for degree in 1..=cfg.d_max {
        // (score, parent index, feature, delta_v, lb)
        let mut children: Vec<(f64, usize, usize, f64, f64)> = Vec::new();
        for (pi, parent) in beam.iter().enumerate() {
            let pos = sum_positive(&parent.active, &s);
            let active_count = parent.active.count();
            for &j in space.candidates() {
                if parent.blocked.contains(j) {
                    continue;
                }
                let x = space.feature(j);
                let removed_sum = parent.active.sum_over_difference(x, &s);
                let dv = p.lambda1 - removed_sum;
                let lb = 2.0 * p.lambda1 - pos - sum_negative_difference(&parent.active, x, &s);

                let mut literals = parent.literals.clone();
                literals.push(j);
                literals.sort_unstable();
                if !p.excluded(&literals) {
                    let value = p.value(parent.active.sum_over_intersection(x, p.residuals), degree);
                    inc.offer(value, literals);
                }
                if let Some(log) = log.as_deref_mut() {
                    log.push(ExpandedChild {
                        parent: parent.literals.clone(),
                        parent_value: parent.value,
                        feature: j,
                        delta_v: dv,
                        lower_bound: lb,
                    });
                }
                if cfg.early_stop == EarlyStop::Immediate && inc.best() < 0.0 {
                    return finish(p, inc.items);
                }
                // Features constant on the active rows make degenerate parents.
                let kept = parent.active.intersection(x).count();
                if kept == 0 || kept == active_count {
                    continue;
                }
                children.push(((dv + lb) / 2.0, pi, j, dv, lb));
            }
        }
        if cfg.early_stop == EarlyStop::AfterDegree && inc.best() < 0.0 {
            break;
        }
        if degree == cfg.d_max {
            break;
        }
        let threshold = inc.threshold();
        children.retain(|&(_, pi, _, _, lb)| beam[pi].value + lb < threshold);
        if children.is_empty() {
            break;
        }
        children.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut next = Vec::with_capacity(cfg.beam_width);
        for &(_, pi, j, dv, _) in children.iter().take(cfg.beam_width) {
            let parent = &beam[pi];
            let mut literals = parent.literals.clone();
            literals.push(j);
            literals.sort_unstable();
            let mut blocked = parent.blocked.clone();
            blocked.union_with(space.conflicts_of(j));
            next.push(Parent {
                literals,
                active: parent.active.intersection(space.feature(j)),
                value: parent.value + dv,
                blocked,
            });
        }
        beam = next;
    }
    finish(p, inc.items)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactOutcome {
    /// Best admissible conjunction, if any literal exists at all.
    pub column: Option<PricedColumn>,
    /// False when the node budget ran out before the search completed.
    pub certified: bool,
    pub nodes: u64,
}

struct BranchAndBound<'p, 'a> {
    p: &'p PricingProblem<'a>,
    s: Vec<f64>,
    best: Option<(f64, Vec<usize>)>,
    nodes: u64,
    exhausted: bool,
}

impl BranchAndBound<'_, '_> {
    fn best_value(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.0)
    }

    fn offer(&mut self, value: f64, literals: &[usize]) {
        if self.p.excluded(literals) {
            return;
        }
        let better = match &self.best {
            None => true,
            Some(b) => cmp_candidate(&(value, literals.to_vec()), b) == Ordering::Less,
        };
        if better {
            self.best = Some((value, literals.to_vec()));
        }
    }

    fn expand(&mut self, literals: &mut Vec<usize>, active: &BitSet, remaining: &[usize], parent_excluded: bool) {
        let p = self.p;
        let depth = literals.len();
        let space = p.space;
        let active_count = active.count();
        // (delta_v, feature, support)
        let mut children: Vec<(f64, usize, BitSet)> = Vec::with_capacity(remaining.len());
        let mut empties: Vec<usize> = Vec::new();
        for &j in remaining {
            let support = active.intersection(space.feature(j));
            let kept = support.count();
            if kept == 0 {
                empties.push(j);
                continue;
            }
            // Same rows as the parent with a larger penalty: dominated by the
            // parent and so are all its descendants.
            if depth > 0 && kept == active_count && !parent_excluded && p.lambda1 >= 0.0 {
                continue;
            }
            let dv = p.lambda1 - active.sum_over_difference(space.feature(j), &self.s);
            children.push((dv, j, support));
        }
        // A conjunction with empty support is a leaf; one representative
        // suffices since all share the value λ0 + λ1·(depth + 1).
        if let Some(&j) = empties.first() {
            self.nodes += 1;
            literals.push(j);
            let mut sorted = literals.clone();
            sorted.sort_unstable();
            literals.pop();
            let value = p.value(0.0, depth + 1);
            self.offer(value, &sorted);
            // Other empty children tie on value; keep the lexicographically
            // smallest admissible one.
            for &k in &empties[1..] {
                literals.push(k);
                let mut s2 = literals.clone();
                s2.sort_unstable();
                literals.pop();
                self.offer(value, &s2);
            }
        }
        children.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let order: Vec<usize> = children.iter().map(|c| c.1).collect();
        for (idx, (_, j, support)) in children.iter().enumerate() {
            self.nodes += 1;
            if self.nodes > p.config.node_budget {
                self.exhausted = true;
                return;
            }
            literals.push(*j);
            let mut sorted = literals.clone();
            sorted.sort_unstable();
            let value = p.value(support.sum_over(p.residuals), depth + 1);
            self.offer(value, &sorted);
            let child_excluded = p.excluded(&sorted);
            if depth + 1 < p.config.d_max {
                let neg = sum_negative_intersection(support, support, &self.s);
                let bound = p.lambda0 + p.lambda1 * (depth + 2) as f64 + neg;
                let best = self.best_value();
                let prune = bound > best + 1e-12 * best.abs().max(1.0);
                if !prune {
                    let conflicts = space.conflicts_of(*j);
                    let rest: Vec<usize> = order[idx + 1..]
                        .iter()
                        .copied()
                        .filter(|&k| !conflicts.contains(k))
                        .collect();
                    if !rest.is_empty() {
                        self.expand(literals, support, &rest, child_excluded);
                    }
                }
            }
            literals.pop();
            if self.exhausted {
                return;
            }
        }
    }
}

/// Exact pricing by depth-first branch-and-bound over admissible
/// conjunctions of degree `1..=d_max`.
pub fn price_exact(p: &PricingProblem<'_>) -> ExactOutcome {
    let n = p.space.n_rows();
    assert_eq!(p.residuals.len(), n, "residuals and rows disagree");
    assert!(p.config.d_max >= 1);
    let mut bb = BranchAndBound {
        p,
        s: p.scaled(),
        best: None,
        nodes: 0,
        exhausted: false,
    };
    let root = BitSet::full(n);
    let mut literals = Vec::new();
    bb.expand(&mut literals, &root, p.space.candidates(), false);
    let certified = !bb.exhausted;
    let nodes = bb.nodes;
    let column = bb.best.map(|b| finish(p, vec![b]).remove(0));
    ExactOutcome {
        column,
        certified,
        nodes,
    }
}
