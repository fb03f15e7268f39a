use thiserror::Error;

use crate::model::{Attribute, ParticipantId, ProposalId};

/// Errors raised by dataset construction, aggregation and sampling.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("duplicate proposal id {0}")]
    DuplicateProposal(ProposalId),
    #[error("duplicate participant id {0}")]
    DuplicateParticipant(ParticipantId),
    #[error("proposal text for id {0} is empty")]
    EmptyProposalText(ProposalId),
    #[error("choice {index} references unknown proposal {id}")]
    UnknownProposal { index: usize, id: ProposalId },
    #[error("choice {index} references unknown participant {id}")]
    UnknownParticipant { index: usize, id: ParticipantId },
    #[error("choice {index} pairs proposal {id} with itself")]
    SelfPair { index: usize, id: ProposalId },
    #[error("proposal {0} has no appearances, its win rate is undefined")]
    UndefinedWinRate(ProposalId),
    #[error("fraction {0} is outside its allowed range")]
    InvalidFraction(f64),
    #[error("sample size {requested} is too large for two disjoint samples from {population} participants")]
    SizeTooLarge { requested: usize, population: usize },
    #[error("attribute {attribute} has no participants in category {category}")]
    EmptyCategory {
        attribute: Attribute,
        category: String,
    },
}
