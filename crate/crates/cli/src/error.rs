use augdem_core::augment::AugmentError;
use augdem_core::data::DataError;
use augdem_core::predictor::PredictError;
use augdem_core::stats::StatsError;
use augdem_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("statistics: {0}")]
    Stats(#[from] StatsError),
    #[error("prediction: {0}")]
    Predict(PredictError),
    #[error("backend: {0}")]
    Backend(PredictError),
    #[error("augmentation: {0}")]
    Augment(AugmentError),
    #[error("output: {0}")]
    Output(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> Self {
        match e {
            PredictError::BackendUnavailable(_)
            | PredictError::UnparseableResponse(_)
            | PredictError::Auth(_) => CliError::Backend(e),
            other => CliError::Predict(other),
        }
    }
}

impl From<AugmentError> for CliError {
    fn from(e: AugmentError) -> Self {
        match e {
            AugmentError::Predict(p) => p.into(),
            AugmentError::Stats(s) => s.into(),
            AugmentError::Core(c) => c.into(),
            other => CliError::Augment(other),
        }
    }
}

impl CliError {
    /// 2 for backend failures, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Backend(_) => 2,
            _ => 1,
        }
    }
}
