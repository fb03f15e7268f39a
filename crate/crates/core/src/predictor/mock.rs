//! Deterministic in-process predictors used to exercise the pipeline.

use std::collections::{BTreeMap, HashMap};

use super::backend::{BackendResponse, PredictionQuery, PredictorBackend};
use super::PredictError;
use crate::aggregate::{tally, win_rates};
use crate::model::{unordered, Choice, Demographics, ParticipantId, PreferenceDataset, ProposalId};

fn parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Always answers A: the positional bias of an untuned model at zero
/// temperature.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysFirst;

impl PredictorBackend for AlwaysFirst {
    fn name(&self) -> String {
        "always-first".into()
    }

    fn respond(&self, _query: &PredictionQuery) -> Result<BackendResponse, PredictError> {
        Ok(BackendResponse::bare(Choice::A))
    }

    fn max_concurrency(&self) -> usize {
        parallelism()
    }
}

/// Answers with the subject's recorded choice from a held-out dataset.
///
/// Repeated elicitations of one pair resolve to the majority winner, the
/// earliest recorded winner on a tie.
#[derive(Debug, Clone)]
pub struct Oracle {
    answers: HashMap<(ParticipantId, (ProposalId, ProposalId)), ProposalId>,
}

impl Oracle {
    pub fn from_dataset(dataset: &PreferenceDataset) -> Self {
        let mut votes: HashMap<(ParticipantId, (ProposalId, ProposalId)), Vec<ProposalId>> =
            HashMap::new();
        for c in dataset.choices() {
            votes
                .entry((c.participant.clone(), c.unordered_pair()))
                .or_default()
                .push(c.winner());
        }
        let answers = votes
            .into_iter()
            .map(|(key, winners)| {
                let (a, b) = key.1;
                let wins_a = winners.iter().filter(|&&w| w == a).count();
                let wins_b = winners.len() - wins_a;
                let pick = match wins_a.cmp(&wins_b) {
                    std::cmp::Ordering::Greater => a,
                    std::cmp::Ordering::Less => b,
                    std::cmp::Ordering::Equal => winners[0],
                };
                (key, pick)
            })
            .collect();
        Self { answers }
    }
}

impl PredictorBackend for Oracle {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn respond(&self, query: &PredictionQuery) -> Result<BackendResponse, PredictError> {
        let subject = query.subject.clone().ok_or_else(|| {
            PredictError::BackendUnavailable("oracle queries need a subject id".into())
        })?;
        let key = (subject, unordered(query.first.id, query.second.id));
        let winner = self.answers.get(&key).ok_or_else(|| {
            PredictError::BackendUnavailable(format!(
                "oracle has no record of {} on ({}, {})",
                key.0, key.1 .0, key.1 .1
            ))
        })?;
        Ok(BackendResponse::bare(query.choice_for(*winner)))
    }

    fn max_concurrency(&self) -> usize {
        parallelism()
    }
}

pub const NEAREST_NEIGHBOR_K: usize = 5;

/// Majority vote of demographically similar training participants.
///
/// Among training participants who were shown the queried pair, the `k`
/// sharing the most populated demographic fields with the query (ties by
/// dataset order) vote with every recorded choice on that pair. With no
/// such participant, or a tied vote, the proposal with the higher training
/// win rate wins, then the lower id. The rule never looks at display order.
#[derive(Debug, Clone)]
pub struct NearestNeighbor {
    k: usize,
    demographics: Vec<Demographics>,
    /// Per unordered pair: (participant index, winner) in dataset order.
    pair_votes: HashMap<(ProposalId, ProposalId), Vec<(usize, ProposalId)>>,
    global_rate: BTreeMap<ProposalId, f64>,
}

impl NearestNeighbor {
    pub fn fit(train: &PreferenceDataset) -> Self {
        Self::fit_with_k(train, NEAREST_NEIGHBOR_K)
    }

    pub fn fit_with_k(train: &PreferenceDataset, k: usize) -> Self {
        let position: HashMap<&ParticipantId, usize> = train
            .participants()
            .iter()
            .enumerate()
            .map(|(i, p)| (&p.id, i))
            .collect();
        let mut pair_votes: HashMap<_, Vec<(usize, ProposalId)>> = HashMap::new();
        for c in train.choices() {
            pair_votes
                .entry(c.unordered_pair())
                .or_default()
                .push((position[&c.participant], c.winner()));
        }
        let global_rate = win_rates(&tally(train)).defined().collect();
        Self {
            k: k.max(1),
            demographics: train
                .participants()
                .iter()
                .map(|p| p.demographics.clone())
                .collect(),
            pair_votes,
            global_rate,
        }
    }

    fn global_pick(&self, a: ProposalId, b: ProposalId) -> ProposalId {
        let ra = self.global_rate.get(&a).copied().unwrap_or(0.5);
        let rb = self.global_rate.get(&b).copied().unwrap_or(0.5);
        if ra > rb {
            a
        } else if rb > ra {
            b
        } else {
            a.min(b)
        }
    }

    /// The preferred proposal of the pair, independent of display order.
    pub fn preferred(
        &self,
        demographics: &Demographics,
        a: ProposalId,
        b: ProposalId,
    ) -> ProposalId {
        let key = unordered(a, b);
        let Some(votes) = self.pair_votes.get(&key) else {
            return self.global_pick(a, b);
        };
        let mut candidates: Vec<usize> = votes.iter().map(|&(p, _)| p).collect();
        candidates.sort_unstable();
        candidates.dedup();
        candidates.sort_by_key(|&p| {
            (
                std::cmp::Reverse(self.demographics[p].matching_fields(demographics)),
                p,
            )
        });
        candidates.truncate(self.k);
        let (mut for_low, mut for_high) = (0usize, 0usize);
        for &(p, winner) in votes {
            if candidates.contains(&p) {
                if winner == key.0 {
                    for_low += 1;
                } else {
                    for_high += 1;
                }
            }
        }
        match for_low.cmp(&for_high) {
            std::cmp::Ordering::Greater => key.0,
            std::cmp::Ordering::Less => key.1,
            std::cmp::Ordering::Equal => self.global_pick(a, b),
        }
    }
}

impl PredictorBackend for NearestNeighbor {
    fn name(&self) -> String {
        format!("nearest-neighbor(k={})", self.k)
    }

    fn respond(&self, query: &PredictionQuery) -> Result<BackendResponse, PredictError> {
        let winner = self.preferred(&query.demographics, query.first.id, query.second.id);
        Ok(BackendResponse::bare(query.choice_for(winner)))
    }

    fn max_concurrency(&self) -> usize {
        parallelism()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Ideology, PairwiseChoice, Participant, Proposal};
    use crate::predictor::{dual_order_predict, predict};

    fn dataset() -> PreferenceDataset {
        let people = ["a", "b", "c"]
            .iter()
            .map(|id| Participant {
                id: ParticipantId::new(*id),
                demographics: Demographics {
                    ideology: Some(if *id == "c" {
                        Ideology::Conservative
                    } else {
                        Ideology::Liberal
                    }),
                    ..Default::default()
                },
            })
            .collect();
        PreferenceDataset::new(
            (1..=3)
                .map(|i| Proposal::new(i, format!("p{i}"), None))
                .collect(),
            people,
            vec![
                PairwiseChoice::new(ParticipantId::new("a"), 1, 2, Choice::A),
                PairwiseChoice::new(ParticipantId::new("b"), 2, 1, Choice::A),
                PairwiseChoice::new(ParticipantId::new("c"), 3, 1, Choice::B),
            ],
        )
        .unwrap()
    }

    fn query(d: &PreferenceDataset, who: &str, a: u32, b: u32) -> PredictionQuery {
        let p = d.participant(&ParticipantId::new(who)).unwrap();
        PredictionQuery::new(
            Some(p.id.clone()),
            p.demographics.clone(),
            d.proposal(ProposalId(a)).unwrap().clone(),
            d.proposal(ProposalId(b)).unwrap().clone(),
        )
        .unwrap()
    }

    #[test]
    fn oracle_returns_recorded_choice() {
        let d = dataset();
        let oracle = Oracle::from_dataset(&d);
        assert_eq!(predict(&oracle, &query(&d, "a", 1, 2)).unwrap(), Choice::A);
        assert_eq!(predict(&oracle, &query(&d, "a", 2, 1)).unwrap(), Choice::B);
        assert_eq!(predict(&oracle, &query(&d, "b", 1, 2)).unwrap(), Choice::B);
        assert!(predict(&oracle, &query(&d, "c", 1, 2)).is_err());
    }

    #[test]
    fn nearest_neighbor_is_order_insensitive() {
        let d = dataset();
        let nn = NearestNeighbor::fit(&d);
        for (a, b) in [(1, 2), (2, 1), (1, 3), (3, 2)] {
            let r = dual_order_predict(&nn, &query(&d, "c", a, b), 0).unwrap();
            assert!(r.consistent_across_orders);
        }
    }

    #[test]
    fn nearest_neighbor_falls_back_to_global_rate() {
        let d = dataset();
        let nn = NearestNeighbor::fit(&d);
        // pair (2,3) was never shown: W_2 = 1/2, W_3 = 0/1
        assert_eq!(
            nn.preferred(&Demographics::default(), ProposalId(3), ProposalId(2)),
            ProposalId(2)
        );
        // pair (1,2): a votes 1, b votes 2 → tie → global W_1 = 2/3 beats W_2
        assert_eq!(
            nn.preferred(&Demographics::default(), ProposalId(1), ProposalId(2)),
            ProposalId(1)
        );
        // k = 1 picks the first most-similar participant
        let nn1 = NearestNeighbor::fit_with_k(&d, 1);
        let liberal = Demographics {
            ideology: Some(Ideology::Liberal),
            ..Default::default()
        };
        assert_eq!(
            nn1.preferred(&liberal, ProposalId(2), ProposalId(1)),
            ProposalId(1)
        );
    }
}
