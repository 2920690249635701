//! Fitted rule ensembles: prediction, complexity, rendering and JSON storage.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binarizer::{BinaryFeature, ColumnSchema, FeatureDictionary, Predicate};
use crate::datatable::{ColumnKind, LabelMap, RawTable, MISSING_CATEGORY};
use crate::glm::{predict_mean, Family};
use crate::pricing::Conjunction;
use crate::{Error, Result};

pub const MODEL_VERSION: &str = "1";

/// Default literal weight in the rule complexity measure.
pub const DEFAULT_LITERAL_WEIGHT: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericTerm {
    pub column: String,
    pub mean: f64,
    pub scale: f64,
    pub coef: f64,
}

/// Intercept plus weighted conjunctions and numeric terms.
///
/// `dictionary` holds only the literals the rules use, in order of first
/// appearance, so that a saved and reloaded ensemble compares equal.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleEnsemble {
    pub family: Family,
    pub intercept: f64,
    pub rules: Vec<(Conjunction, f64)>,
    pub numeric_terms: Vec<NumericTerm>,
    pub dictionary: FeatureDictionary,
    pub label_map: Option<LabelMap>,
}

impl RuleEnsemble {
    /// Builds an ensemble from rules indexed into `dictionary`. Rules with a
    /// zero coefficient and numeric terms with a zero coefficient are dropped.
    pub fn new(
        family: Family,
        intercept: f64,
        rules: Vec<(Conjunction, f64)>,
        numeric_terms: Vec<NumericTerm>,
        dictionary: &FeatureDictionary,
        label_map: Option<LabelMap>,
    ) -> Self {
        let mut remap: HashMap<usize, usize> = HashMap::new();
        let mut features: Vec<BinaryFeature> = Vec::new();
        let mut out_rules = Vec::new();
        for (conj, coef) in rules {
            if coef == 0.0 {
                continue;
            }
            let literals = conj
                .literals()
                .iter()
                .map(|&j| {
                    *remap.entry(j).or_insert_with(|| {
                        features.push(dictionary.features[j].clone());
                        features.len() - 1
                    })
                })
                .collect();
            out_rules.push((Conjunction::new(literals), coef));
        }
        let d = features.len();
        RuleEnsemble {
            family,
            intercept,
            rules: out_rules,
            numeric_terms: numeric_terms.into_iter().filter(|t| t.coef != 0.0).collect(),
            dictionary: FeatureDictionary {
                columns: dictionary.columns.clone(),
                features,
                complement_of: vec![None; d],
                exclusion_groups: Vec::new(),
                singleton_basis: Vec::new(),
            },
            label_map,
        }
    }

    /// Sum over rules of `1 + w·degree`, plus one per numeric term.
    pub fn complexity(&self, w: f64) -> f64 {
        let literals: usize = self.rules.iter().map(|(c, _)| c.degree()).sum();
        (self.rules.len() + self.numeric_terms.len()) as f64 + w * literals as f64
    }

    pub fn n_rules(&self) -> usize {
        self.rules.len()
    }

    fn literal_holds(&self, j: usize, row: &[Option<&str>]) -> Result<bool> {
        let f = &self.dictionary.features[j];
        let schema = &self.dictionary.columns[f.source_column];
        let cell = row[f.source_column];
        Ok(match schema.kind {
            ColumnKind::Numeric => {
                let x = schema.numeric_value(cell).ok_or_else(|| non_numeric(cell, &schema.name))?;
                f.predicate.holds_numeric(x)
            }
            ColumnKind::Categorical => f.predicate.holds_category(cell.unwrap_or(MISSING_CATEGORY)),
        })
    }

    /// Canonical parameter for a row whose cells follow `dictionary.columns`.
    pub fn linear_predictor_row(&self, row: &[Option<&str>]) -> Result<f64> {
        if row.len() != self.dictionary.columns.len() {
            return Err(Error::SchemaMismatch(format!(
                "row has {} cells, model expects {}",
                row.len(),
                self.dictionary.columns.len()
            )));
        }
        let mut eta = self.intercept;
        for (conj, coef) in &self.rules {
            let mut fires = true;
            for &j in conj.literals() {
                if !self.literal_holds(j, row)? {
                    fires = false;
                    break;
                }
            }
            if fires {
                eta += coef;
            }
        }
        for t in &self.numeric_terms {
            let c = self.column_position(&t.column)?;
            let schema = &self.dictionary.columns[c];
            let x = schema.numeric_value(row[c]).ok_or_else(|| non_numeric(row[c], &schema.name))?;
            eta += t.coef * (x - t.mean) / t.scale;
        }
        Ok(eta)
    }

    pub fn predict_row(&self, row: &[Option<&str>]) -> Result<f64> {
        Ok(predict_mean(self.family, self.linear_predictor_row(row)?))
    }

    /// Predictions for every row of `table`. Columns are matched by name;
    /// extra columns are ignored.
    pub fn predict(&self, table: &RawTable) -> Result<Vec<f64>> {
        let positions = self
            .dictionary
            .columns
            .iter()
            .map(|c| {
                table
                    .column_index(&c.name)
                    .ok_or_else(|| Error::SchemaMismatch(format!("missing column {}", c.name)))
            })
            .collect::<Result<Vec<usize>>>()?;
        (0..table.n_rows())
            .map(|i| {
                let row: Vec<Option<&str>> = positions
                    .iter()
                    .map(|&c| table.column(c).cells()[i].as_deref())
                    .collect();
                self.predict_row(&row)
            })
            .collect()
    }

    fn column_position(&self, name: &str) -> Result<usize> {
        self.dictionary
            .columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::SchemaMismatch(format!("numeric term refers to unknown column {name}")))
    }

    fn rule_text(&self, conj: &Conjunction) -> String {
        let parts: Vec<&str> = conj
            .literals()
            .iter()
            .map(|&j| self.dictionary.features[j].display.as_str())
            .collect();
        format!("[{}]", parts.join(" AND "))
    }

    /// One line per term: the intercept first, then rules and numeric terms by
    /// decreasing |coefficient|, ties broken by text.
    pub fn render(&self) -> String {
        let mut terms: Vec<(f64, String)> = self
            .rules
            .iter()
            .map(|(c, coef)| (*coef, self.rule_text(c)))
            .chain(self.numeric_terms.iter().map(|t| (t.coef, format!("z({})", t.column))))
            .collect();
        terms.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()).then_with(|| a.1.cmp(&b.1)));
        let mut out = format!("{} · intercept\n", format_coef(self.intercept));
        for (coef, text) in terms {
            out.push_str(&format!("{} · {}\n", format_coef(coef), text));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = match value.get("version") {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(other) => other.to_string(),
            None => "none".to_string(),
        };
        if version != MODEL_VERSION {
            return Err(Error::ModelVersion {
                found: version,
                expected: MODEL_VERSION.to_string(),
            });
        }
        let doc: ModelDocument = serde_json::from_value(value)?;
        Self::from_document(doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn to_document(&self) -> ModelDocument {
        ModelDocument {
            version: MODEL_VERSION.to_string(),
            family: self.family,
            intercept: self.intercept,
            label_map: self.label_map.clone(),
            columns: self.dictionary.columns.clone(),
            rules: self
                .rules
                .iter()
                .map(|(c, coef)| RuleDocument {
                    literals: c
                        .literals()
                        .iter()
                        .map(|&j| {
                            let f = &self.dictionary.features[j];
                            LiteralDocument {
                                column: f.column_name.clone(),
                                predicate: f.predicate.clone(),
                            }
                        })
                        .collect(),
                    coef: *coef,
                })
                .collect(),
            numeric_terms: self.numeric_terms.clone(),
        }
    }

    fn from_document(doc: ModelDocument) -> Result<Self> {
        let mut features: Vec<BinaryFeature> = Vec::new();
        let mut rules = Vec::new();
        for rule in doc.rules {
            let mut literals = Vec::new();
            for lit in rule.literals {
                let source_column = doc
                    .columns
                    .iter()
                    .position(|c| c.name == lit.column)
                    .ok_or_else(|| Error::SchemaMismatch(format!("rule refers to unknown column {}", lit.column)))?;
                let idx = match features
                    .iter()
                    .position(|f| f.source_column == source_column && f.predicate == lit.predicate)
                {
                    Some(i) => i,
                    None => {
                        features.push(BinaryFeature {
                            source_column,
                            display: lit.predicate.render(&lit.column),
                            column_name: lit.column,
                            predicate: lit.predicate,
                        });
                        features.len() - 1
                    }
                };
                literals.push(idx);
            }
            rules.push((Conjunction::new(literals), rule.coef));
        }
        let dictionary = FeatureDictionary {
            columns: doc.columns,
            complement_of: vec![None; features.len()],
            features,
            exclusion_groups: Vec::new(),
            singleton_basis: Vec::new(),
        };
        let m = RuleEnsemble {
            family: doc.family,
            intercept: doc.intercept,
            rules,
            numeric_terms: doc.numeric_terms,
            dictionary,
            label_map: doc.label_map,
        };
        for t in &m.numeric_terms {
            m.column_position(&t.column)?;
        }
        Ok(m)
    }
}

fn non_numeric(cell: Option<&str>, column: &str) -> Error {
    Error::SchemaMismatch(format!(
        "non-numeric value {:?} in numeric column {column}",
        cell.unwrap_or("")
    ))
}

/// Fixed three-decimal coefficient with a typographic minus sign.
pub fn format_coef(c: f64) -> String {
    if c < 0.0 {
        format!("\u{2212}{:.3}", -c)
    } else {
        format!("{c:.3}")
    }
}

#[derive(Serialize, Deserialize)]
struct LiteralDocument {
    column: String,
    #[serde(flatten)]
    predicate: Predicate,
}

#[derive(Serialize, Deserialize)]
struct RuleDocument {
    literals: Vec<LiteralDocument>,
    coef: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    version: String,
    family: Family,
    intercept: f64,
    label_map: Option<LabelMap>,
    columns: Vec<ColumnSchema>,
    rules: Vec<RuleDocument>,
    numeric_terms: Vec<NumericTerm>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(name: &str, kind: ColumnKind) -> ColumnSchema {
        ColumnSchema {
            name: name.into(),
            kind,
            median: (kind == ColumnKind::Numeric).then_some(2.0),
            mean: (kind == ColumnKind::Numeric).then_some(2.0),
            scale: (kind == ColumnKind::Numeric).then_some(1.0),
        }
    }

    fn feature(col: usize, name: &str, p: Predicate) -> BinaryFeature {
        BinaryFeature {
            source_column: col,
            column_name: name.into(),
            display: p.render(name),
            predicate: p,
        }
    }

    fn dict() -> FeatureDictionary {
        FeatureDictionary {
            columns: vec![schema("X₁", ColumnKind::Numeric), schema("X₂", ColumnKind::Categorical)],
            features: vec![
                feature(0, "X₁", Predicate::Leq(3.0)),
                feature(0, "X₁", Predicate::Gt(3.0)),
                feature(1, "X₂", Predicate::Equals("red".into())),
            ],
            complement_of: vec![Some(1), Some(0), None],
            exclusion_groups: vec![vec![2]],
            singleton_basis: vec![0, 2],
        }
    }

    #[test]
    fn single_rule_linear_prediction() {
        let m = RuleEnsemble::new(Family::Linear, 0.0, vec![(Conjunction::new(vec![0]), 2.0)], vec![], &dict(), None);
        assert_eq!(m.predict_row(&[Some("1"), Some("red")]).unwrap(), 2.0);
        assert_eq!(m.predict_row(&[Some("5"), Some("red")]).unwrap(), 0.0);
    }

    #[test]
    fn empty_logistic_ensemble_predicts_half() {
        let m = RuleEnsemble::new(Family::Logistic, 0.0, vec![], vec![], &dict(), None);
        assert_eq!(m.predict_row(&[Some("1"), None]).unwrap(), 0.5);
        assert_eq!(m.complexity(0.2), 0.0);
    }

    #[test]
    fn complexity_formula() {
        let d = dict();
        let m = RuleEnsemble::new(
            Family::Linear,
            0.0,
            vec![(Conjunction::new(vec![0]), 1.0), (Conjunction::new(vec![0, 2]), -1.0)],
            vec![NumericTerm {
                column: "X₁".into(),
                mean: 0.0,
                scale: 1.0,
                coef: 0.5,
            }],
            &d,
            None,
        );
        assert!((m.complexity(0.2) - (1.2 + 1.4 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn render_uses_minus_sign_and_and() {
        let m = RuleEnsemble::new(Family::Linear, 0.25, vec![(Conjunction::new(vec![0, 2]), -1.5)], vec![], &dict(), None);
        let text = m.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "0.250 · intercept");
        assert_eq!(lines[1], "−1.500 · [X₁ ≤ 3 AND X₂ = red]");
    }

    #[test]
    fn render_ties_break_by_text() {
        let m = RuleEnsemble::new(
            Family::Linear,
            0.0,
            vec![(Conjunction::new(vec![2]), 1.0), (Conjunction::new(vec![0]), -1.0)],
            vec![],
            &dict(),
            None,
        );
        let lines: Vec<String> = m.render().lines().map(String::from).collect();
        assert_eq!(lines[1], "−1.000 · [X₁ ≤ 3]");
        assert_eq!(lines[2], "1.000 · [X₂ = red]");
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let m = RuleEnsemble::new(
            Family::Logistic,
            -0.1,
            vec![(Conjunction::new(vec![2, 1]), 0.7), (Conjunction::new(vec![0]), 1.0 / 3.0)],
            vec![NumericTerm {
                column: "X₁".into(),
                mean: 2.5,
                scale: 0.7,
                coef: 0.1,
            }],
            &dict(),
            Some(LabelMap {
                negative: "no".into(),
                positive: "yes".into(),
            }),
        );
        let back = RuleEnsemble::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let bumped = m.to_json().replace("\"version\": \"1\"", "\"version\": \"0\"");
        assert!(matches!(RuleEnsemble::from_json(&bumped), Err(Error::ModelVersion { .. })));
        let text = m.to_json();
        assert!(matches!(RuleEnsemble::from_json(&text[..text.len() / 2]), Err(Error::Model(_))));
    }
}
