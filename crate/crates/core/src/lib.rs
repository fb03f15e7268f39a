//! Pairwise policy-preference aggregation and predictor-based augmentation.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`], [`aggregate`] and [`sampling`] hold the domain types, win-rate
//!   aggregation and the participant-level sampling protocols.
//! * [`data`] reads and writes the tabular dataset format and generates
//!   seeded synthetic populations with known generating utilities.
//! * [`predictor`] turns demographics plus a proposal pair into a predicted
//!   choice: prompt templates, fine-tune exports, mock backends and a remote
//!   chat-completion client.
//! * [`augment`] extends a participant sample with predicted choices for
//!   additional, demographically described participants.
//! * [`stats`] contains every evaluation statistic used by the experiments.

pub mod aggregate;
pub mod augment;
pub mod data;
pub mod model;
pub mod predictor;
pub mod rng;
pub mod sampling;
pub mod stats;

mod error;

pub use aggregate::{rank, tally, win_rates, PairwiseTally, WinRateEntry, WinRateTable};
pub use error::CoreError;
pub use model::{
    AgeBand, Attribute, Choice, Demographics, Education, Ideology, PairwiseChoice, Participant,
    ParticipantId, PreferenceDataset, Proposal, ProposalId, Sex, Zone,
};
pub use sampling::{
    balance_by_attribute, disjoint_pair, round_half_up, sample_participants, split_train_test,
    SampleSpec,
};
