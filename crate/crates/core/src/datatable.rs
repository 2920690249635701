//! CSV loading and column-kind inference.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::glm::Family;
use crate::{Error, Result};

/// Cell texts treated as missing.
pub const MISSING_MARKERS: [&str; 4] = ["", "?", "NA", "NaN"];

/// Category that replaces missing categorical cells.
pub const MISSING_CATEGORY: &str = "⟨missing⟩";

pub fn is_missing(cell: &str) -> bool {
    MISSING_MARKERS.contains(&cell)
}

/// Parses a finite real; infinities and NaN are rejected.
pub fn parse_finite(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawColumn {
    kind: ColumnKind,
    cells: Vec<Option<String>>,
    numbers: Vec<Option<f64>>,
}

impl RawColumn {
    /// Builds a column, inferring its kind: numeric iff every non-missing cell
    /// parses as a finite real.
    pub fn infer(cells: Vec<Option<String>>) -> Self {
        let numbers: Option<Vec<Option<f64>>> = cells
            .iter()
            .map(|c| match c {
                None => Some(None),
                Some(s) => parse_finite(s).map(Some),
            })
            .collect();
        match numbers {
            Some(numbers) => RawColumn {
                kind: ColumnKind::Numeric,
                cells,
                numbers,
            },
            None => RawColumn {
                kind: ColumnKind::Categorical,
                cells,
                numbers: Vec::new(),
            },
        }
    }

    pub fn numeric(values: &[f64]) -> Self {
        RawColumn::infer(values.iter().map(|v| Some(v.to_string())).collect())
    }

    pub fn categorical<S: AsRef<str>>(values: &[S]) -> Self {
        RawColumn {
            kind: ColumnKind::Categorical,
            cells: values.iter().map(|v| Some(v.as_ref().to_string())).collect(),
            numbers: Vec::new(),
        }
    }

    pub fn kind(&self) -> ColumnKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Option<String>] {
        &self.cells
    }

    /// Parsed values of a numeric column, `None` for missing cells. Empty for
    /// categorical columns.
    pub fn numbers(&self) -> &[Option<f64>] {
        &self.numbers
    }

    fn select(&self, rows: &[usize]) -> RawColumn {
        RawColumn {
            kind: self.kind,
            cells: rows.iter().map(|&i| self.cells[i].clone()).collect(),
            numbers: if self.numbers.is_empty() {
                Vec::new()
            } else {
                rows.iter().map(|&i| self.numbers[i]).collect()
            },
        }
    }
}

/// Immutable table of feature columns.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    column_names: Vec<String>,
    columns: Vec<RawColumn>,
    n_rows: usize,
}

impl RawTable {
    pub fn new(column_names: Vec<String>, columns: Vec<RawColumn>) -> Result<Self> {
        if column_names.len() != columns.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} names for {} columns",
                column_names.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        let n_rows = columns.first().map_or(0, RawColumn::len);
        if let Some((i, _)) = columns.iter().enumerate().find(|(_, c)| c.len() != n_rows) {
            return Err(Error::SchemaMismatch(format!(
                "column {} has {} rows, expected {n_rows}",
                column_names[i],
                columns[i].len()
            )));
        }
        Ok(RawTable {
            column_names,
            columns,
            n_rows,
        })
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn columns(&self) -> &[RawColumn] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &RawColumn {
        &self.columns[j]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|n| n == name)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// Cell texts of row `i`, `None` where missing.
    pub fn row(&self, i: usize) -> Vec<Option<&str>> {
        self.columns.iter().map(|c| c.cells[i].as_deref()).collect()
    }

    /// Sub-table of the given rows, in the given order. Column kinds are kept
    /// as inferred on the full table.
    pub fn select_rows(&self, rows: &[usize]) -> RawTable {
        RawTable {
            column_names: self.column_names.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    /// Re-serializes the table as CSV text. Missing cells are written empty.
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.column_names).expect("in-memory write");
        for i in 0..self.n_rows {
            w.write_record(self.columns.iter().map(|c| c.cells[i].as_deref().unwrap_or("")))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

/// Raw target cells, as read from the label column.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetVector {
    pub name: String,
    pub values: Vec<Option<String>>,
}

impl TargetVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Mapping between the two raw class labels and {0, 1}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    /// Raw label coded as 0.
    pub negative: String,
    /// Raw label coded as 1; predicted probabilities refer to this label.
    pub positive: String,
}

/// Numeric targets ready for fitting.
#[derive(Clone, Debug, PartialEq)]
pub struct Targets {
    pub values: Vec<f64>,
    pub label_map: Option<LabelMap>,
}

impl Targets {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Targets {
        Targets {
            values: rows.iter().map(|&i| self.values[i]).collect(),
            label_map: self.label_map.clone(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, target_name: &str) -> Result<(RawTable, TargetVector)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, target_name)
}

/// Reads a header-first CSV and splits off the target column.
pub fn read_csv<R: Read>(reader: R, target_name: &str) -> Result<(RawTable, TargetVector)> {
    let (names, mut columns) = read_cells(reader)?;
    let t = names
        .iter()
        .position(|n| n == target_name)
        .ok_or_else(|| Error::MissingTarget(target_name.to_string()))?;
    let mut names = names;
    let target_name = names.remove(t);
    let target = TargetVector {
        name: target_name,
        values: columns.remove(t),
    };
    if names.is_empty() {
        return Err(Error::NoColumns);
    }
    let table = RawTable::new(names, columns.into_iter().map(RawColumn::infer).collect())?;
    Ok((table, target))
}

/// Reads a header-first CSV without a target column.
pub fn read_table<R: Read>(reader: R) -> Result<RawTable> {
    let (names, columns) = read_cells(reader)?;
    RawTable::new(names, columns.into_iter().map(RawColumn::infer).collect())
}

pub fn load_table(path: impl AsRef<Path>) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(file)
}

type Cells = (Vec<String>, Vec<Vec<Option<String>>>);

fn read_cells<R: Read>(reader: R) -> Result<Cells> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut columns: Vec<Vec<Option<String>>> = vec![Vec::new(); names.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != names.len() {
            return Err(Error::RaggedRow {
                row: row + 1,
                expected: names.len(),
                found: record.len(),
            });
        }
        for (col, cell) in columns.iter_mut().zip(record.iter()) {
            col.push((!is_missing(cell)).then(|| cell.to_string()));
        }
    }
    if columns.first().is_none_or(Vec::is_empty) {
        return Err(Error::EmptyTable);
    }
    Ok((names, columns))
}

/// Coerces raw target cells for the given family.
///
/// Logistic targets need exactly two distinct labels; they are sorted
/// (numerically when both parse as numbers, else as text) and the first maps
/// to 0. Linear targets must all be finite reals.
pub fn target_mode(targets: &TargetVector, family: Family) -> Result<Targets> {
    if let Some(i) = targets.values.iter().position(Option::is_none) {
        return Err(Error::InvalidTarget(format!("missing target in row {}", i + 1)));
    }
    let cells: Vec<&str> = targets.values.iter().map(|v| v.as_deref().unwrap()).collect();
    match family {
        Family::Linear => {
            let values = cells
                .iter()
                .map(|c| {
                    parse_finite(c).ok_or_else(|| {
                        Error::InvalidTarget(format!("non-numeric target {c:?} for linear family"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Targets {
                values,
                label_map: None,
            })
        }
        Family::Logistic => {
            let mut labels: Vec<&str> = cells.clone();
            labels.sort_by(|a, b| compare_labels(a, b));
            labels.dedup();
            if labels.len() != 2 {
                return Err(Error::InvalidTarget(format!(
                    "logistic family needs exactly 2 distinct labels, found {}",
                    labels.len()
                )));
            }
            let map = LabelMap {
                negative: labels[0].to_string(),
                positive: labels[1].to_string(),
            };
            let values = cells
                .iter()
                .map(|&c| if c == map.positive { 1.0 } else { 0.0 })
                .collect();
            Ok(Targets {
                values,
                label_map: Some(map),
            })
        }
    }
}

fn compare_labels(a: &str, b: &str) -> Ordering {
    match (parse_finite(a), parse_finite(b)) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "a,b,y\n1,red,0\n2.5,blue,1\n3,red,1\n";

    #[test]
    fn loads_and_splits_target() {
        let (t, y) = read_csv(SMALL.as_bytes(), "y").unwrap();
        assert_eq!(t.n_cols(), 2);
        assert_eq!(t.n_rows(), 3);
        assert_eq!(y.len(), 3);
        assert_eq!(t.column(0).kind(), ColumnKind::Numeric);
        assert_eq!(t.column(1).kind(), ColumnKind::Categorical);
    }

    #[test]
    fn unparsable_value_makes_column_categorical() {
        let (t, _) = read_csv("a,y\n1,0\n2,1\nx,0\n".as_bytes(), "y").unwrap();
        assert_eq!(t.column(0).kind(), ColumnKind::Categorical);
    }

    #[test]
    fn missing_target_is_an_error() {
        let err = read_csv(SMALL.as_bytes(), "label").unwrap_err();
        assert!(matches!(err, Error::MissingTarget(_)));
        assert!(err.to_string().contains("target column not found"));
    }

    #[test]
    fn ragged_and_empty_inputs_are_rejected() {
        let err = read_csv("a,y\n1,0\n2\n".as_bytes(), "y").unwrap_err();
        assert!(matches!(err, Error::RaggedRow { row: 2, .. }));
        let err = read_csv("a,y\n".as_bytes(), "y").unwrap_err();
        assert!(matches!(err, Error::EmptyTable));
        assert!(load_csv("/nonexistent/file.csv", "y").is_err());
    }

    #[test]
    fn missing_cells_do_not_change_numeric_kind() {
        let (t, _) = read_csv("a,y\n1,0\n?,1\n,0\n4,1\n".as_bytes(), "y").unwrap();
        assert_eq!(t.column(0).kind(), ColumnKind::Numeric);
        assert_eq!(t.column(0).numbers(), &[Some(1.0), None, None, Some(4.0)]);
    }

    #[test]
    fn round_trips_non_missing_text() {
        let (t, _) = read_csv(SMALL.as_bytes(), "y").unwrap();
        let text = t.to_csv_string();
        let again = read_table(text.as_bytes()).unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn binary_labels_map_in_sorted_order() {
        let tv = TargetVector {
            name: "y".into(),
            values: ["yes", "no", "no"].iter().map(|s| Some(s.to_string())).collect(),
        };
        let t = target_mode(&tv, Family::Logistic).unwrap();
        assert_eq!(t.values, vec![1.0, 0.0, 0.0]);
        assert_eq!(t.label_map.unwrap().negative, "no");

        let tv = TargetVector {
            name: "y".into(),
            values: ["0", "1", "1", "0"].iter().map(|s| Some(s.to_string())).collect(),
        };
        let t = target_mode(&tv, Family::Logistic).unwrap();
        assert_eq!(t.values, vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn label_count_and_numeric_checks() {
        let tv = TargetVector {
            name: "y".into(),
            values: ["a", "b", "c"].iter().map(|s| Some(s.to_string())).collect(),
        };
        assert!(target_mode(&tv, Family::Logistic).is_err());
        assert!(target_mode(&tv, Family::Linear).is_err());
        let tv = TargetVector {
            name: "y".into(),
            values: ["1.5", "-2"].iter().map(|s| Some(s.to_string())).collect(),
        };
        assert_eq!(target_mode(&tv, Family::Linear).unwrap().values, vec![1.5, -2.0]);
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let err = read_csv("a,a,y\n1,2,0\n".as_bytes(), "y").unwrap_err();
        assert!(matches!(err, Error::DuplicateColumn(_)));
    }
}
