use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Attribute, PreferenceDataset};

/// Summary counts of a loaded dataset, always recomputed from the data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub participant_count: usize,
    pub proposal_count: usize,
    pub choice_count: usize,
    /// Participants per `attribute=category`, for every reported category.
    pub category_counts: BTreeMap<String, usize>,
}

impl DatasetManifest {
    pub fn from_dataset(dataset: &PreferenceDataset) -> Self {
        let mut category_counts = BTreeMap::new();
        for p in dataset.participants() {
            for attribute in Attribute::ALL {
                if let Some(cat) = p.demographics.category(attribute) {
                    *category_counts
                        .entry(format!("{}={}", attribute.name(), cat))
                        .or_insert(0) += 1;
                }
            }
        }
        Self {
            participant_count: dataset.participants().len(),
            proposal_count: dataset.proposals().len(),
            choice_count: dataset.choices().len(),
            category_counts,
        }
    }
}

impl fmt::Display for DatasetManifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} participants, {} proposals, {} choices",
            self.participant_count, self.proposal_count, self.choice_count
        )
    }
}
