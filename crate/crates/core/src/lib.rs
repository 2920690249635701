//! Generalized linear rule models.
//!
//! A rule ensemble is a GLM whose canonical parameter is a linear
//! combination of conjunctions over binarized features. Training alternates
//! between a weighted-L1 fit over a restricted set of conjunctions and a
//! pricing search for conjunctions with negative reduced cost (column
//! generation), then refits the surviving support without penalty.
//!
//! The pipeline, in order of use:
//!
//! * [`datatable`] loads a CSV into a typed [`RawTable`].
//! * [`binarizer`] turns raw columns into threshold and category literals.
//! * [`glm`] holds the exponential-family losses and the weighted-L1 solver.
//! * [`pricing`] searches for new conjunctions, heuristically or exactly.
//! * [`trainer`] runs the column-generation loop and the final refit.
//! * [`model`] is the fitted [`RuleEnsemble`]: prediction, complexity, JSON.
//! * [`evaluate`] has metrics, cross-validation, penalty sweeps and Pareto fronts.
//! * [`cli`] is the `glrm` command line.

mod bitset;
pub mod binarizer;
pub mod cli;
pub mod datatable;
mod error;
pub mod evaluate;
pub mod glm;
pub mod model;
pub mod pricing;
pub mod trainer;

pub use binarizer::{BinarizedDataset, BinaryFeature, FeatureDictionary, Predicate};
pub use bitset::BitSet;
pub use datatable::{RawColumn, RawTable, TargetVector, Targets};
pub use error::{Error, Result};
pub use glm::{Coefficients, DesignMatrix, Family};
pub use model::RuleEnsemble;
pub use pricing::{Conjunction, PricedColumn, PricingConfig, PricingMode, PricingProblem, Sign};
pub use trainer::{TrainConfig, TrainTrace, Variant};
