//! Dataset ingestion, serialization and synthetic populations.
//!
//! On disk a dataset is three comma-separated tables with header rows:
//!
//! * proposals: `id,text,candidate`
//! * choices: `participant_id,proposal_a,proposal_b,chosen` with `chosen` in `{A, B}`
//! * demographics: `participant_id,age_band,ideology,zone,education,sex,city,state`,
//!   empty cells meaning "not reported"
//!
//! Demographic cells accept English or Brazilian Portuguese labels.

mod labels;
mod manifest;
mod synthetic;
mod tables;

use thiserror::Error;

use crate::error::CoreError;

pub use labels::{parse_age_band, parse_education, parse_ideology, parse_sex, parse_zone};
pub use manifest::DatasetManifest;
pub use synthetic::{
    generate_synthetic, generate_synthetic_population, SyntheticPopulation, SyntheticPopulationSpec,
};
pub use tables::{
    load_dataset, load_dataset_with, load_proposals, load_proposals_with, write_choices,
    write_demographics, write_proposals, ColumnMapping,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{table} row {row}: {message}")]
    Parse {
        table: &'static str,
        row: u64,
        message: String,
    },
    #[error("proposals row {row}: duplicate proposal id {id}")]
    DuplicateId { row: u64, id: u32 },
    #[error("{table} row {row}: unknown proposal id {id}")]
    UnknownProposal {
        table: &'static str,
        row: u64,
        id: u32,
    },
    #[error("{table} row {row}: unknown participant {id}")]
    UnknownParticipant {
        table: &'static str,
        row: u64,
        id: String,
    },
    #[error("demographics row {row}: value {value:?} is not a valid {column}")]
    MalformedDemographic {
        row: u64,
        column: &'static str,
        value: String,
    },
    #[error("invalid synthetic population spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Dataset(#[from] CoreError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
