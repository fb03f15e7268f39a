//! Evaluation statistics: accuracy, bootstrap intervals, win-rate
//! correlation, the data-adequacy curve and two-sample tests.

mod adequacy;
mod correlation;
mod subgroup;
mod summary;
mod welch;

use thiserror::Error;

use crate::error::CoreError;
use crate::model::Attribute;

pub use adequacy::{adequacy_curve, fit_rational, AdequacyPoint, RationalFit};
pub use correlation::{pearson_r2, spearman, winrate_r2, winrate_vectors};
pub use subgroup::{
    subgroup_accuracy_analysis, AccuracyReport, SubgroupAnalysis, SubgroupComparison,
};
pub use summary::{
    accuracy, bootstrap_ci, mean, quantile, ConfidenceInterval, ScoredPrediction,
    DEFAULT_BOOTSTRAP_ITERATIONS, LEVEL_95, LEVEL_99,
};
pub use welch::{welch_t_test, WelchTest};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("input is empty")]
    EmptyInput,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("confidence level {0} is outside (0, 1)")]
    InvalidLevel(f64),
    #[error("sample size {requested} is too large for two disjoint samples from {population} participants")]
    SizeTooLarge { requested: usize, population: usize },
    #[error("attribute {attribute} has no participants in category {category}")]
    EmptyCategory {
        attribute: Attribute,
        category: String,
    },
    #[error(transparent)]
    Core(CoreError),
}

impl From<CoreError> for StatsError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::SizeTooLarge {
                requested,
                population,
            } => StatsError::SizeTooLarge {
                requested,
                population,
            },
            CoreError::EmptyCategory {
                attribute,
                category,
            } => StatsError::EmptyCategory {
                attribute,
                category,
            },
            other => StatsError::Core(other),
        }
    }
}
