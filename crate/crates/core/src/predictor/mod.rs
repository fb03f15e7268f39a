//! From demographics and a proposal pair to a predicted choice.

mod backend;
mod finetune;
mod mock;
mod parse;
mod prompt;
mod remote;

use thiserror::Error;

pub use backend::{
    dual_order_predict, predict, predict_many, BackendResponse, InferenceMode, PredictedChoice,
    PredictionQuery, PredictorBackend,
};
pub use finetune::{
    emit_finetune_job_spec, export_finetune_dataset, finetune_profile, parse_finetune_export,
    to_chat_lines, to_index_table, FineTuneProfile, FineTuneRecord, FinetuneJobFiles, HyperValue,
    RecordOrder, FINETUNE_BACKENDS,
};
pub use mock::{AlwaysFirst, NearestNeighbor, Oracle, NEAREST_NEIGHBOR_K};
pub use parse::parse_model_output;
pub use prompt::{build_prompt, PromptLanguage, PromptTemplate};
pub use remote::{remote_complete, RemoteBackend, RemoteEndpointConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredictError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("unparseable model response: {0:?}")]
    UnparseableResponse(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("unknown fine-tune backend {0:?}")]
    UnknownBackend(String),
    #[error("malformed fine-tune export: {0}")]
    MalformedExport(String),
}
