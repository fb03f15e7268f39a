use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PredictError;
use crate::model::{Choice, Demographics, ParticipantId, Proposal, ProposalId};
use crate::rng::{derive_seed, rng_from_seed};

/// One prediction request: which of two proposals would a person with these
/// demographics choose, with `first` displayed as A.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionQuery {
    /// Identity of the person being predicted. Only lookup-style mocks use it;
    /// real predictors see nothing but the demographics.
    pub subject: Option<ParticipantId>,
    pub demographics: Demographics,
    pub first: Proposal,
    pub second: Proposal,
}

impl PredictionQuery {
    pub fn new(
        subject: Option<ParticipantId>,
        demographics: Demographics,
        first: Proposal,
        second: Proposal,
    ) -> Result<Self, PredictError> {
        if first.id == second.id {
            return Err(PredictError::InvalidQuery(format!(
                "proposal {} paired with itself",
                first.id
            )));
        }
        Ok(Self {
            subject,
            demographics,
            first,
            second,
        })
    }

    /// The same query with display order reversed.
    pub fn swapped(&self) -> Self {
        Self {
            subject: self.subject.clone(),
            demographics: self.demographics.clone(),
            first: self.second.clone(),
            second: self.first.clone(),
        }
    }

    pub fn proposal_for(&self, choice: Choice) -> ProposalId {
        match choice {
            Choice::A => self.first.id,
            Choice::B => self.second.id,
        }
    }

    pub fn choice_for(&self, proposal: ProposalId) -> Choice {
        if proposal == self.first.id {
            Choice::A
        } else {
            Choice::B
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendResponse {
    pub choice: Choice,
    pub raw: Option<String>,
}

impl BackendResponse {
    pub fn bare(choice: Choice) -> Self {
        Self { choice, raw: None }
    }
}

/// Anything that can answer a single-order prediction query.
pub trait PredictorBackend: Send + Sync {
    fn name(&self) -> String;

    fn respond(&self, query: &PredictionQuery) -> Result<BackendResponse, PredictError>;

    /// Number of queries that may be in flight at once.
    fn max_concurrency(&self) -> usize {
        1
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

pub fn predict(
    backend: &dyn PredictorBackend,
    query: &PredictionQuery,
) -> Result<Choice, PredictError> {
    backend.respond(query).map(|r| r.choice)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedChoice {
    /// Relative to the query's display order.
    pub chosen: Choice,
    /// `false` when the two display orders named different proposals. Always
    /// `true` for single-order predictions.
    pub consistent_across_orders: bool,
    /// The choice came from the seeded coin flip.
    pub tie_broken: bool,
    pub raw_responses: Vec<String>,
}

impl PredictedChoice {
    pub fn proposal(&self, query: &PredictionQuery) -> ProposalId {
        query.proposal_for(self.chosen)
    }
}

/// Queries both display orders. If they name the same proposal that is the
/// answer; otherwise a coin flip seeded by `tie_break_seed` decides.
pub fn dual_order_predict(
    backend: &dyn PredictorBackend,
    query: &PredictionQuery,
    tie_break_seed: u64,
) -> Result<PredictedChoice, PredictError> {
    let forward = backend.respond(query)?;
    let reversed_query = query.swapped();
    let backward = backend.respond(&reversed_query)?;
    let forward_pick = query.proposal_for(forward.choice);
    let backward_pick = reversed_query.proposal_for(backward.choice);
    let raw_responses = forward.raw.into_iter().chain(backward.raw).collect();
    if forward_pick == backward_pick {
        Ok(PredictedChoice {
            chosen: query.choice_for(forward_pick),
            consistent_across_orders: true,
            tie_broken: false,
            raw_responses,
        })
    } else {
        let heads: bool = rng_from_seed(tie_break_seed).random();
        Ok(PredictedChoice {
            chosen: if heads { Choice::A } else { Choice::B },
            consistent_across_orders: false,
            tie_broken: true,
            raw_responses,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InferenceMode {
    SingleOrder,
    DualOrder,
}

fn predict_one(
    backend: &dyn PredictorBackend,
    query: &PredictionQuery,
    mode: InferenceMode,
    seed: u64,
) -> Result<PredictedChoice, PredictError> {
    match mode {
        InferenceMode::DualOrder => dual_order_predict(backend, query, seed),
        InferenceMode::SingleOrder => backend.respond(query).map(|r| PredictedChoice {
            chosen: r.choice,
            consistent_across_orders: true,
            tie_broken: false,
            raw_responses: r.raw.into_iter().collect(),
        }),
    }
}

/// Predicts every query, fanning out up to `backend.max_concurrency()`
/// workers. Query `i` uses tie-break seed `derive_seed(seed, i)`, and results
/// are returned in query order, so the output does not depend on scheduling.
pub fn predict_many(
    backend: &dyn PredictorBackend,
    queries: &[PredictionQuery],
    mode: InferenceMode,
    seed: u64,
) -> Vec<Result<PredictedChoice, PredictError>> {
    let workers = backend.max_concurrency().max(1).min(queries.len());
    if workers <= 1 {
        return queries
            .iter()
            .enumerate()
            .map(|(i, q)| predict_one(backend, q, mode, derive_seed(seed, i as u64)))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<PredictedChoice, PredictError>>>> =
        Mutex::new(vec![None; queries.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(q) = queries.get(i) else { break };
                let result = predict_one(backend, q, mode, derive_seed(seed, i as u64));
                slots.lock().expect("result slots poisoned")[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|r| r.expect("every query was predicted"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::AlwaysFirst;

    struct PrefersLowerId;

    impl PredictorBackend for PrefersLowerId {
        fn name(&self) -> String {
            "lower-id".into()
        }

        fn respond(&self, q: &PredictionQuery) -> Result<BackendResponse, PredictError> {
            Ok(BackendResponse::bare(
                q.choice_for(q.first.id.min(q.second.id)),
            ))
        }

        fn max_concurrency(&self) -> usize {
            4
        }
    }

    fn q(a: u32, b: u32) -> PredictionQuery {
        PredictionQuery::new(
            None,
            Demographics::default(),
            Proposal::new(a, format!("p{a}"), None),
            Proposal::new(b, format!("p{b}"), None),
        )
        .unwrap()
    }

    #[test]
    fn rejects_self_pair() {
        let p = Proposal::new(1, "x", None);
        assert!(PredictionQuery::new(None, Demographics::default(), p.clone(), p).is_err());
    }

    #[test]
    fn consistent_backend() {
        let r = dual_order_predict(&PrefersLowerId, &q(5, 2), 0).unwrap();
        assert!(r.consistent_across_orders);
        assert_eq!(r.chosen, Choice::B);
    }

    #[test]
    fn always_first_is_inconsistent() {
        let r = dual_order_predict(&AlwaysFirst, &q(5, 2), 0).unwrap();
        assert!(!r.consistent_across_orders);
        assert!(r.tie_broken);
        assert_eq!(predict(&AlwaysFirst, &q(5, 2)).unwrap(), Choice::A);
    }

    #[test]
    fn fan_out_matches_sequential() {
        let queries: Vec<_> = (1..40).map(|i| q(i, i + 1)).collect();
        let parallel = predict_many(&AlwaysFirstParallel, &queries, InferenceMode::DualOrder, 9);
        let sequential = predict_many(&AlwaysFirst, &queries, InferenceMode::DualOrder, 9);
        assert_eq!(parallel, sequential);
    }

    struct AlwaysFirstParallel;

    impl PredictorBackend for AlwaysFirstParallel {
        fn name(&self) -> String {
            "always-first".into()
        }

        fn respond(&self, q: &PredictionQuery) -> Result<BackendResponse, PredictError> {
            AlwaysFirst.respond(q)
        }

        fn max_concurrency(&self) -> usize {
            8
        }
    }
}
