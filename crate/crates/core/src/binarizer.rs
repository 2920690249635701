//! Binarization of raw columns into threshold and category literals.
//!
//! Numeric columns yield `x <= t` / `x > t` pairs at interior sample
//! quantiles. Categorical columns yield `x = v` / `x != v` pairs for every
//! observed category. One member of each complementary pair (the `<=` or `=`
//! side) forms the singleton basis used to seed the restricted model.

use serde::{Deserialize, Serialize};

use crate::bitset::BitSet;
use crate::datatable::{parse_finite, ColumnKind, RawTable, Targets, MISSING_CATEGORY};
use crate::{Error, Result};

/// Default number of interior quantiles (the sample deciles).
pub const DEFAULT_QUANTILES: usize = 9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value", rename_all = "snake_case")]
pub enum Predicate {
    Equals(String),
    NotEquals(String),
    Leq(f64),
    Gt(f64),
}

impl Predicate {
    pub fn holds_numeric(&self, x: f64) -> bool {
        match self {
            Predicate::Leq(t) => x <= *t,
            Predicate::Gt(t) => x > *t,
            Predicate::Equals(_) | Predicate::NotEquals(_) => false,
        }
    }

    pub fn holds_category(&self, v: &str) -> bool {
        match self {
            Predicate::Equals(c) => v == c,
            Predicate::NotEquals(c) => v != c,
            Predicate::Leq(_) | Predicate::Gt(_) => false,
        }
    }

    pub fn complement(&self) -> Predicate {
        match self {
            Predicate::Equals(c) => Predicate::NotEquals(c.clone()),
            Predicate::NotEquals(c) => Predicate::Equals(c.clone()),
            Predicate::Leq(t) => Predicate::Gt(*t),
            Predicate::Gt(t) => Predicate::Leq(*t),
        }
    }

    pub fn render(&self, column: &str) -> String {
        match self {
            Predicate::Equals(c) => format!("{column} = {c}"),
            Predicate::NotEquals(c) => format!("{column} ≠ {c}"),
            Predicate::Leq(t) => format!("{column} ≤ {t}"),
            Predicate::Gt(t) => format!("{column} > {t}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryFeature {
    pub source_column: usize,
    pub column_name: String,
    pub predicate: Predicate,
    pub display: String,
}

/// Per-column facts learned from the training table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    /// Imputation value for missing numeric cells.
    pub median: Option<f64>,
    /// Standardization constants for raw numeric terms.
    pub mean: Option<f64>,
    pub scale: Option<f64>,
}

impl ColumnSchema {
    /// Numeric value of a cell, with missing and unparsable cells imputed.
    pub fn numeric_value(&self, cell: Option<&str>) -> Option<f64> {
        match cell {
            None => self.median,
            Some(s) => parse_finite(s),
        }
    }

    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.mean.unwrap_or(0.0)) / self.scale.unwrap_or(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDictionary {
    pub columns: Vec<ColumnSchema>,
    pub features: Vec<BinaryFeature>,
    pub complement_of: Vec<Option<usize>>,
    pub exclusion_groups: Vec<Vec<usize>>,
    pub singleton_basis: Vec<usize>,
}

impl FeatureDictionary {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn numeric_columns(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == ColumnKind::Numeric)
            .map(|(j, _)| j)
            .collect()
    }

    /// For each feature, the set of features that may not share a conjunction
    /// with it: itself, its complement, the rest of its exclusion group, and
    /// same-column literals that it implies, is implied by, or contradicts.
    pub fn conflicts(&self) -> Vec<BitSet> {
        let d = self.features.len();
        let mut out: Vec<BitSet> = (0..d).map(|j| BitSet::from_indices(d, [j])).collect();
        for a in 0..d {
            for b in a + 1..d {
                let (fa, fb) = (&self.features[a], &self.features[b]);
                if fa.source_column == fb.source_column && redundant_pair(&fa.predicate, &fb.predicate) {
                    out[a].insert(b);
                    out[b].insert(a);
                }
            }
        }
        for (j, c) in self.complement_of.iter().enumerate() {
            if let Some(c) = c {
                out[j].insert(*c);
            }
        }
        for group in &self.exclusion_groups {
            for &a in group {
                for &b in group {
                    out[a].insert(b);
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dictionary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// True when a conjunction of the two literals on one column always equals
/// one of them or is always empty.
fn redundant_pair(a: &Predicate, b: &Predicate) -> bool {
    use Predicate::*;
    match (a, b) {
        (Leq(_), Leq(_)) | (Gt(_), Gt(_)) => true,
        (Leq(t), Gt(u)) | (Gt(u), Leq(t)) => u >= t,
        (Equals(c), NotEquals(e)) | (NotEquals(e), Equals(c)) => c != e,
        _ => false,
    }
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n - 1) p`). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Thresholds at levels `k / (n_quantiles + 1)`, keeping one threshold per
/// distinct induced split of `sorted` and dropping splits that leave one side
/// empty. The result is strictly increasing.
pub fn thresholds(sorted: &[f64], n_quantiles: usize) -> Vec<f64> {
    if sorted.is_empty() {
        return Vec::new();
    }
    let max = sorted[sorted.len() - 1];
    let mut out: Vec<f64> = Vec::new();
    let mut last_split: Option<usize> = None;
    for k in 1..=n_quantiles {
        let t = quantile(sorted, k as f64 / (n_quantiles + 1) as f64);
        if t >= max {
            continue;
        }
        // Number of sample values <= t identifies the split.
        let split = sorted.partition_point(|&x| x <= t);
        if split == 0 || last_split == Some(split) {
            continue;
        }
        last_split = Some(split);
        out.push(t);
    }
    out
}

fn sample_mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub fn build_dictionary(table: &RawTable, n_quantiles: usize) -> Result<FeatureDictionary> {
    if table.n_cols() == 0 {
        return Err(Error::NoColumns);
    }
    if n_quantiles == 0 {
        return Err(Error::Config("n_quantiles must be at least 1".into()));
    }
    let mut columns = Vec::with_capacity(table.n_cols());
    let mut features = Vec::new();
    let mut complement_of = Vec::new();
    let mut exclusion_groups = Vec::new();
    let mut singleton_basis = Vec::new();

    let mut push_pair = |features: &mut Vec<BinaryFeature>, col: usize, name: &str, p: Predicate| {
        let a = features.len();
        let q = p.complement();
        features.push(BinaryFeature {
            source_column: col,
            column_name: name.to_string(),
            display: p.render(name),
            predicate: p,
        });
        features.push(BinaryFeature {
            source_column: col,
            column_name: name.to_string(),
            display: q.render(name),
            predicate: q,
        });
        complement_of.push(Some(a + 1));
        complement_of.push(Some(a));
        singleton_basis.push(a);
        a
    };

    for (col, (name, column)) in table.column_names().iter().zip(table.columns()).enumerate() {
        match column.kind() {
            ColumnKind::Numeric => {
                let mut observed: Vec<f64> = column.numbers().iter().flatten().copied().collect();
                observed.sort_by(f64::total_cmp);
                let median = if observed.is_empty() {
                    0.0
                } else {
                    quantile(&observed, 0.5)
                };
                let imputed: Vec<f64> = column.numbers().iter().map(|v| v.unwrap_or(median)).collect();
                let (mean, sd) = sample_mean_sd(&imputed);
                columns.push(ColumnSchema {
                    name: name.clone(),
                    kind: ColumnKind::Numeric,
                    median: Some(median),
                    mean: Some(mean),
                    scale: Some(if sd > 0.0 { sd } else { 1.0 }),
                });
                let mut sorted = imputed;
                sorted.sort_by(f64::total_cmp);
                for t in thresholds(&sorted, n_quantiles) {
                    push_pair(&mut features, col, name, Predicate::Leq(t));
                }
            }
            ColumnKind::Categorical => {
                columns.push(ColumnSchema {
                    name: name.clone(),
                    kind: ColumnKind::Categorical,
                    median: None,
                    mean: None,
                    scale: None,
                });
                let mut cats: Vec<&str> = column
                    .cells()
                    .iter()
                    .map(|c| c.as_deref().unwrap_or(MISSING_CATEGORY))
                    .collect();
                cats.sort_unstable();
                cats.dedup();
                if cats.len() < 2 {
                    continue;
                }
                let mut group = Vec::with_capacity(cats.len());
                for c in cats {
                    group.push(push_pair(&mut features, col, name, Predicate::Equals(c.to_string())));
                }
                exclusion_groups.push(group);
            }
        }
    }
    Ok(FeatureDictionary {
        columns,
        features,
        complement_of,
        exclusion_groups,
        singleton_basis,
    })
}

/// Standardized raw numeric columns (n × m, column-major).
#[derive(Clone, Debug, PartialEq)]
pub struct NumericBlock {
    pub source_columns: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

/// Binary feature matrix plus targets, immutable after construction.
#[derive(Clone, Debug)]
pub struct BinarizedDataset {
    bits: Vec<BitSet>,
    n_rows: usize,
    targets: Vec<f64>,
    numeric_raw: Option<NumericBlock>,
    dictionary: FeatureDictionary,
}

impl BinarizedDataset {
    /// Dataset over arbitrary binary features with no complement or exclusion
    /// structure; every feature is its own singleton. Feature `j` is named
    /// `f{j}` and reads as the literal `f{j} = 1`.
    pub fn from_binary_columns(columns: Vec<BitSet>, targets: Vec<f64>) -> Self {
        let n_rows = targets.len();
        assert!(columns.iter().all(|c| c.len() == n_rows));
        let d = columns.len();
        let schema = (0..d)
            .map(|j| ColumnSchema {
                name: format!("f{j}"),
                kind: ColumnKind::Categorical,
                median: None,
                mean: None,
                scale: None,
            })
            .collect();
        let features = (0..d)
            .map(|j| {
                let p = Predicate::Equals("1".into());
                BinaryFeature {
                    source_column: j,
                    column_name: format!("f{j}"),
                    display: p.render(&format!("f{j}")),
                    predicate: p,
                }
            })
            .collect();
        BinarizedDataset {
            bits: columns,
            n_rows,
            targets,
            numeric_raw: None,
            dictionary: FeatureDictionary {
                columns: schema,
                features,
                complement_of: vec![None; d],
                exclusion_groups: Vec::new(),
                singleton_basis: (0..d).collect(),
            },
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.bits.len()
    }

    /// Column of feature `j` as a row set.
    pub fn feature(&self, j: usize) -> &BitSet {
        &self.bits[j]
    }

    pub fn features(&self) -> &[BitSet] {
        &self.bits
    }

    pub fn bit(&self, i: usize, j: usize) -> bool {
        self.bits[j].contains(i)
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn numeric_raw(&self) -> Option<&NumericBlock> {
        self.numeric_raw.as_ref()
    }

    pub fn dictionary(&self) -> &FeatureDictionary {
        &self.dictionary
    }

    /// Row set of the conjunction of the given features (all rows when empty).
    pub fn conjunction_rows(&self, literals: &[usize]) -> BitSet {
        let mut rows = BitSet::full(self.n_rows);
        for &j in literals {
            rows.intersect_with(&self.bits[j]);
        }
        rows
    }
}

pub fn binarize(
    table: &RawTable,
    dict: &FeatureDictionary,
    targets: &Targets,
    include_numeric: bool,
) -> Result<BinarizedDataset> {
    check_schema(table, dict)?;
    if targets.len() != table.n_rows() {
        return Err(Error::SchemaMismatch(format!(
            "{} targets for {} rows",
            targets.len(),
            table.n_rows()
        )));
    }
    let n = table.n_rows();
    let numeric = numeric_values(table, dict)?;
    let mut bits = Vec::with_capacity(dict.len());
    for f in &dict.features {
        let mut col = BitSet::new(n);
        match &numeric[f.source_column] {
            Some(values) => {
                for (i, &x) in values.iter().enumerate() {
                    if f.predicate.holds_numeric(x) {
                        col.insert(i);
                    }
                }
            }
            None => {
                for (i, cell) in table.column(f.source_column).cells().iter().enumerate() {
                    let v = cell.as_deref().unwrap_or(MISSING_CATEGORY);
                    if f.predicate.holds_category(v) {
                        col.insert(i);
                    }
                }
            }
        }
        bits.push(col);
    }
    let numeric_raw = include_numeric.then(|| {
        let source_columns = dict.numeric_columns();
        let values = source_columns
            .iter()
            .map(|&c| {
                let schema = &dict.columns[c];
                numeric[c]
                    .as_ref()
                    .expect("numeric column")
                    .iter()
                    .map(|&x| schema.standardize(x))
                    .collect()
            })
            .collect();
        NumericBlock {
            source_columns,
            values,
        }
    });
    Ok(BinarizedDataset {
        bits,
        n_rows: n,
        targets: targets.values.clone(),
        numeric_raw,
        dictionary: dict.clone(),
    })
}

fn check_schema(table: &RawTable, dict: &FeatureDictionary) -> Result<()> {
    let names: Vec<&str> = dict.columns.iter().map(|c| c.name.as_str()).collect();
    let have: Vec<&str> = table.column_names().iter().map(String::as_str).collect();
    if names != have {
        return Err(Error::SchemaMismatch(format!(
            "table columns {have:?} do not match dictionary columns {names:?}"
        )));
    }
    Ok(())
}

/// Imputed values of every numeric column; `None` for categorical columns.
fn numeric_values(table: &RawTable, dict: &FeatureDictionary) -> Result<Vec<Option<Vec<f64>>>> {
    dict.columns
        .iter()
        .enumerate()
        .map(|(c, schema)| {
            if schema.kind != ColumnKind::Numeric {
                return Ok(None);
            }
            table
                .column(c)
                .cells()
                .iter()
                .map(|cell| {
                    schema.numeric_value(cell.as_deref()).ok_or_else(|| {
                        Error::SchemaMismatch(format!(
                            "non-numeric value {:?} in numeric column {}",
                            cell.as_deref().unwrap_or(""),
                            schema.name
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some)
        })
        .collect()
}
