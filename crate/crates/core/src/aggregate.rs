//! Win-rate aggregation.
//!
//! `w_ij` counts how often proposal `i` was selected over proposal `j`,
//! regardless of which one was displayed first. The win rate of `i` is
//! `Σ_j w_ij / Σ_j (w_ij + w_ji)`: the share of its appearances in which it
//! was chosen.

use std::collections::BTreeMap;

use crate::error::CoreError;
use crate::model::{PairwiseChoice, PreferenceDataset, ProposalId};

/// Ordered-pair win counts over a fixed proposal universe.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairwiseTally {
    proposals: Vec<ProposalId>,
    counts: BTreeMap<(ProposalId, ProposalId), u64>,
}

impl PairwiseTally {
    /// Empty tally over `proposals`.
    pub fn with_proposals(proposals: impl IntoIterator<Item = ProposalId>) -> Self {
        let mut proposals: Vec<ProposalId> = proposals.into_iter().collect();
        proposals.sort_unstable();
        proposals.dedup();
        Self {
            proposals,
            counts: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, choice: &PairwiseChoice) {
        *self
            .counts
            .entry((choice.winner(), choice.loser()))
            .or_insert(0) += 1;
    }

    /// `w_ij`: times `winner` was selected over `loser`.
    pub fn count(&self, winner: ProposalId, loser: ProposalId) -> u64 {
        self.counts.get(&(winner, loser)).copied().unwrap_or(0)
    }

    /// Non-zero counts, keyed by (winner, loser).
    pub fn counts(&self) -> &BTreeMap<(ProposalId, ProposalId), u64> {
        &self.counts
    }

    pub fn proposals(&self) -> &[ProposalId] {
        &self.proposals
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Counts every choice of `dataset` into `w_ij`.
pub fn tally(dataset: &PreferenceDataset) -> PairwiseTally {
    tally_choices(dataset.proposal_ids(), dataset.choices())
}

pub fn tally_choices<'a>(
    proposals: impl IntoIterator<Item = ProposalId>,
    choices: impl IntoIterator<Item = &'a PairwiseChoice>,
) -> PairwiseTally {
    let mut t = PairwiseTally::with_proposals(proposals);
    for c in choices {
        t.record(c);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WinRateEntry {
    pub wins: u64,
    pub appearances: u64,
}

impl WinRateEntry {
    /// `None` when the proposal never appeared.
    pub fn win_rate(&self) -> Option<f64> {
        (self.appearances > 0).then(|| self.wins as f64 / self.appearances as f64)
    }

    pub fn losses(&self) -> u64 {
        self.appearances - self.wins
    }
}

/// Per-proposal wins, appearances and win rate.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WinRateTable {
    entries: BTreeMap<ProposalId, WinRateEntry>,
}

impl WinRateTable {
    pub fn from_entries(entries: impl IntoIterator<Item = (ProposalId, WinRateEntry)>) -> Self {
        Self {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn entries(&self) -> &BTreeMap<ProposalId, WinRateEntry> {
        &self.entries
    }

    pub fn get(&self, id: ProposalId) -> Option<&WinRateEntry> {
        self.entries.get(&id)
    }

    pub fn win_rate(&self, id: ProposalId) -> Option<f64> {
        self.entries.get(&id).and_then(WinRateEntry::win_rate)
    }

    /// Proposals with a defined win rate, ascending by id.
    pub fn defined(&self) -> impl Iterator<Item = (ProposalId, f64)> + '_ {
        self.entries
            .iter()
            .filter_map(|(&id, e)| e.win_rate().map(|w| (id, w)))
    }

    pub fn undefined(&self) -> impl Iterator<Item = ProposalId> + '_ {
        self.entries
            .iter()
            .filter(|(_, e)| e.appearances == 0)
            .map(|(&id, _)| id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn win_rates(tally: &PairwiseTally) -> WinRateTable {
    let mut entries: BTreeMap<ProposalId, WinRateEntry> = tally
        .proposals()
        .iter()
        .map(|&id| {
            (
                id,
                WinRateEntry {
                    wins: 0,
                    appearances: 0,
                },
            )
        })
        .collect();
    for (&(winner, loser), &n) in tally.counts() {
        let w = entries.entry(winner).or_insert(WinRateEntry {
            wins: 0,
            appearances: 0,
        });
        w.wins += n;
        w.appearances += n;
        entries
            .entry(loser)
            .or_insert(WinRateEntry {
                wins: 0,
                appearances: 0,
            })
            .appearances += n;
    }
    WinRateTable { entries }
}

/// Proposal ids by descending win rate, ties by ascending id.
pub fn rank(table: &WinRateTable) -> Result<Vec<ProposalId>, CoreError> {
    if let Some(id) = table.undefined().next() {
        return Err(CoreError::UndefinedWinRate(id));
    }
    Ok(rank_defined(table))
}

/// Like [`rank`] but silently skips proposals without appearances.
pub fn rank_defined(table: &WinRateTable) -> Vec<ProposalId> {
    let mut rows: Vec<(ProposalId, f64)> = table.defined().collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    rows.into_iter().map(|(id, _)| id).collect()
}
