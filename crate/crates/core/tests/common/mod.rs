//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use glrm::pricing::{reduced_cost, FeatureSpace, PricingConfig, PricingProblem};
use glrm::binarizer::BinarizedDataset;
use glrm::datatable::{RawColumn, RawTable};
use glrm::glm::{Coefficients, DesignMatrix, Family};
use glrm::{BitSet, Sign};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random pricing instance: binary features, conflict pairs and residuals.
#[derive(Clone, Debug)]
pub struct Instance {
    pub bits: Vec<BitSet>,
    pub pairs: Vec<(usize, usize)>,
    pub r: Vec<f64>,
    pub lambda0: f64,
    pub lambda1: f64,
    pub sign: Sign,
    pub d_max: usize,
}

impl Instance {
    pub fn random(seed: u64, max_n: usize, max_d: usize, max_depth: usize) -> Instance {
        let mut g = rng(seed);
        let n = g.gen_range(1..=max_n);
        let d = g.gen_range(1..=max_d);
        let mut bits: Vec<BitSet> = Vec::with_capacity(d);
        let mut pairs = Vec::new();
        while bits.len() < d {
            let kind = g.gen_range(0..10);
            let col = match kind {
                0 => BitSet::new(n),
                1 => BitSet::full(n),
                2 if !bits.is_empty() => {
                    let k = g.gen_range(0..bits.len());
                    bits[k].clone()
                }
                _ => {
                    let p = g.gen_range(0.15..0.85);
                    BitSet::from_bools(&(0..n).map(|_| g.gen_bool(p)).collect::<Vec<_>>())
                }
            };
            if bits.len() + 1 < d && g.gen_bool(0.4) {
                let comp = BitSet::full(n).difference(&col);
                pairs.push((bits.len(), bits.len() + 1));
                bits.push(col);
                bits.push(comp);
            } else {
                bits.push(col);
            }
        }
        let coarse = g.gen_bool(0.3);
        let r = (0..n)
            .map(|_| {
                let v: f64 = g.gen_range(-1.0..1.0);
                if coarse {
                    (v * 4.0).round() / 4.0
                } else {
                    v
                }
            })
            .collect();
        let lambda0 = if g.gen_bool(0.2) { 0.0 } else { g.gen_range(0.0..0.05) };
        let lambda1 = if g.gen_bool(0.2) { 0.0 } else { g.gen_range(0.0..0.02) };
        Instance {
            bits,
            pairs,
            r,
            lambda0,
            lambda1,
            sign: if g.gen_bool(0.5) { Sign::Plus } else { Sign::Minus },
            d_max: g.gen_range(1..=max_depth),
        }
    }

    pub fn space(&self) -> FeatureSpace<'_> {
        FeatureSpace::with_conflicts(&self.bits, &self.pairs)
    }

    pub fn problem<'a>(&'a self, space: &'a FeatureSpace<'a>, config: PricingConfig) -> PricingProblem<'a> {
        PricingProblem {
            space,
            residuals: &self.r,
            lambda0: self.lambda0,
            lambda1: self.lambda1,
            sign: self.sign,
            config: PricingConfig {
                d_max: self.d_max,
                ..config
            },
            exclude: None,
        }
    }
}

/// All admissible literal sets of size `1..=d_max` over the candidates, in
/// lexicographic order.
pub fn enumerate(space: &FeatureSpace<'_>, d_max: usize) -> Vec<Vec<usize>> {
    fn rec(space: &FeatureSpace<'_>, cands: &[usize], start: usize, cur: &mut Vec<usize>, d_max: usize, out: &mut Vec<Vec<usize>>) {
        for idx in start..cands.len() {
            let j = cands[idx];
            if cur.iter().any(|&k| space.conflict(k, j)) {
                continue;
            }
            cur.push(j);
            out.push(cur.clone());
            if cur.len() < d_max {
                rec(space, cands, idx + 1, cur, d_max, out);
            }
            cur.pop();
        }
    }
    let mut cands = space.candidates().to_vec();
    cands.sort_unstable();
    let mut out = Vec::new();
    rec(space, &cands, 0, &mut Vec::new(), d_max, &mut out);
    out
}

/// Reduced cost of a literal set evaluated from scratch on all rows.
pub fn value_of(space: &FeatureSpace<'_>, literals: &[usize], r: &[f64], l0: f64, l1: f64, sign: Sign) -> f64 {
    reduced_cost(&space.rows_of(literals), r, l0, l1, literals.len(), sign)
}

/// Minimum reduced cost over every admissible conjunction, with the
/// lexicographically smallest minimizer.
pub fn brute_force_min(space: &FeatureSpace<'_>, r: &[f64], l0: f64, l1: f64, sign: Sign, d_max: usize) -> Option<(f64, Vec<usize>)> {
    enumerate(space, d_max)
        .into_iter()
        .map(|c| (value_of(space, &c, r, l0, l1, sign), c))
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
}

/// Scalar re-derivation of the reduced cost from a 0/1 vector.
pub fn scalar_reduced_cost(a: &[bool], r: &[f64], l0: f64, l1: f64, degree: usize, sign: Sign) -> f64 {
    let s = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    let n = r.len() as f64;
    let mut acc = 0.0;
    for (ai, ri) in a.iter().zip(r) {
        if *ai {
            acc += s * ri / n;
        }
    }
    acc + l0 + l1 * degree as f64
}

/// Dense solve of `M x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let p = b.len();
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..p {
            let f = m[row][col] / m[col][col];
            for k in col..p {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; p];
    for row in (0..p).rev() {
        let s: f64 = (row + 1..p).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / m[row][row];
    }
    x
}

/// Binary features `x1`, `x2` and their complements over `reps` copies of
/// the four combinations, with `y = x1 XOR x2`.
pub fn xor_dataset(reps: usize) -> glrm::BinarizedDataset {
    let n = 4 * reps;
    let x1: Vec<bool> = (0..n).map(|i| i % 4 == 1 || i % 4 == 3).collect();
    let x2: Vec<bool> = (0..n).map(|i| i % 4 >= 2).collect();
    let y: Vec<f64> = (0..n).map(|i| if x1[i] != x2[i] { 1.0 } else { 0.0 }).collect();
    let not = |v: &[bool]| v.iter().map(|b| !b).collect::<Vec<_>>();
    glrm::BinarizedDataset::from_binary_columns(
        vec![
            BitSet::from_bools(&x1),
            BitSet::from_bools(&x2),
            BitSet::from_bools(&not(&x1)),
            BitSet::from_bools(&not(&x2)),
        ],
        y,
    )
}

/// Random table mixing numeric and categorical columns, some with missing
/// cells.
pub fn random_table(seed: u64, max_rows: usize, max_cols: usize) -> RawTable {
    let mut g = rng(seed);
    let n = g.gen_range(2..=max_rows);
    let m = g.gen_range(1..=max_cols);
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for j in 0..m {
        names.push(format!("c{j}"));
        let missing = g.gen_bool(0.3);
        let cells: Vec<Option<String>> = if g.gen_bool(0.5) {
            let levels = g.gen_range(1..12);
            (0..n)
                .map(|_| {
                    if missing && g.gen_bool(0.1) {
                        None
                    } else {
                        Some(format!("{}", g.gen_range(0..levels) as f64 * 0.5))
                    }
                })
                .collect()
        } else {
            let levels = ["red", "green", "blue", "grey"];
            let k = g.gen_range(1..=levels.len());
            (0..n)
                .map(|_| {
                    if missing && g.gen_bool(0.1) {
                        None
                    } else {
                        Some(levels[g.gen_range(0..k)].to_string())
                    }
                })
                .collect()
        };
        cols.push(RawColumn::infer(cells));
    }
    RawTable::new(names, cols).unwrap()
}

/// Random design with an intercept, `p` dense columns and a penalty per column.
pub fn random_problem(seed: u64, n: usize, p: usize, family: Family) -> (DesignMatrix, Vec<f64>) {
    let mut g = rng(seed);
    let mut x = DesignMatrix::new(n, 0.0);
    for _ in 0..p {
        let col: Vec<f64> = (0..n)
            .map(|_| if g.gen_bool(0.3) { 0.0 } else { g.gen_range(-2.0..2.0) })
            .collect();
        x.push_dense(col, g.gen_range(0.0..0.05));
    }
    let y = (0..n)
        .map(|_| match family {
            Family::Logistic => f64::from(u8::from(g.gen_bool(0.4))),
            Family::Linear => g.gen_range(-3.0..3.0),
        })
        .collect();
    (x, y)
}

pub fn random_beta(seed: u64, p: usize) -> Coefficients {
    let mut g = rng(seed);
    Coefficients((0..p).map(|_| g.gen_range(-1.5..1.5)).collect())
}

/// Small binary dataset whose targets depend on a random degree-2 rule.
pub fn random_dataset(seed: u64, family: Family) -> BinarizedDataset {
    let mut g = rng(seed);
    let n = g.gen_range(12..40);
    let d = g.gen_range(2..7);
    let cols: Vec<BitSet> = (0..d)
        .map(|_| BitSet::from_bools(&(0..n).map(|_| g.gen_bool(0.5)).collect::<Vec<_>>()))
        .collect();
    let (a, b) = (g.gen_range(0..d), g.gen_range(0..d));
    let y = (0..n)
        .map(|i| {
            let rule = cols[a].contains(i) && !cols[b].contains(i);
            match family {
                Family::Logistic => f64::from(u8::from(rule != g.gen_bool(0.15))),
                Family::Linear => f64::from(u8::from(rule)) * 2.0 + g.gen_range(-0.5..0.5),
            }
        })
        .collect();
    BinarizedDataset::from_binary_columns(cols, y)
}
