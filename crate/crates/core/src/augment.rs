//! Sample augmentation with predicted choices.
//!
//! A participant sample is extended with additional participants drawn from
//! outside it, known only by their demographics, whose choices are predicted
//! by a backend conditioned on the sample. Only augmentation of the
//! participant set with a predictor trained on the sample itself (type I B)
//! is executable; the other types are named so that requests for them fail
//! loudly.

use std::collections::HashMap;
use std::fmt;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{tally_choices, PairwiseTally};
use crate::error::CoreError;
use crate::model::{
    Attribute, PairwiseChoice, Participant, ParticipantId, PreferenceDataset, ProposalId,
};
use crate::predictor::{
    predict_many, AlwaysFirst, InferenceMode, NearestNeighbor, Oracle, PredictError,
    PredictionQuery, PredictorBackend, PromptTemplate, RemoteBackend, RemoteEndpointConfig,
};
use crate::rng::{derive_path, derive_seed, label_stream, rng_from_seed};
use crate::sampling::{round_half_up, sample_participants, SampleSpec};
use crate::stats::{bootstrap_ci, winrate_r2, ConfidenceInterval, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AugmentationType {
    #[serde(rename = "I_A")]
    IA,
    #[serde(rename = "I_B")]
    IB,
    #[serde(rename = "II_A")]
    IIA,
    #[serde(rename = "II_B")]
    IIB,
    #[serde(rename = "II_C")]
    IIC,
    #[serde(rename = "III")]
    III,
}

impl AugmentationType {
    pub const ALL: [AugmentationType; 6] = [
        AugmentationType::IA,
        AugmentationType::IB,
        AugmentationType::IIA,
        AugmentationType::IIB,
        AugmentationType::IIC,
        AugmentationType::III,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugmentationType::IA => "I_A",
            AugmentationType::IB => "I_B",
            AugmentationType::IIA => "II_A",
            AugmentationType::IIB => "II_B",
            AugmentationType::IIC => "II_C",
            AugmentationType::III => "III",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let key: String = name
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|t| t.name().replace('_', "") == key)
    }

    pub fn is_executable(self) -> bool {
        self == AugmentationType::IB
    }
}

impl fmt::Display for AugmentationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("augmentation type {0} is not implemented")]
    NotImplemented(AugmentationType),
    #[error("extra fraction {0} is outside [0, 1]")]
    InvalidExtraFraction(f64),
    #[error("no pair schedule for participant {0}")]
    MissingSchedule(ParticipantId),
    #[error("participant {0} is already in the sample")]
    ExtraInSample(ParticipantId),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub kind: AugmentationType,
    /// Share of the population outside the sample to add as extras.
    pub extra_fraction: f64,
    pub seed: u64,
    /// Draw extras within each category of this attribute separately.
    pub stratify_by: Option<Attribute>,
}

impl AugmentationPlan {
    pub fn new(
        kind: AugmentationType,
        extra_fraction: f64,
        seed: u64,
    ) -> Result<Self, AugmentError> {
        if !(0.0..=1.0).contains(&extra_fraction) {
            return Err(AugmentError::InvalidExtraFraction(extra_fraction));
        }
        Ok(Self {
            kind,
            extra_fraction,
            seed,
            stratify_by: None,
        })
    }

    pub fn ensure_executable(&self) -> Result<(), AugmentError> {
        if self.kind.is_executable() {
            Ok(())
        } else {
            Err(AugmentError::NotImplemented(self.kind))
        }
    }
}

/// Uniformly draws `round(extra_fraction × |population ∖ sample|)` participants
/// from outside the sample, returned in population order. With stratification
/// each category (and the group lacking the attribute) is drawn separately
/// with the same rounding rule.
pub fn select_extras(
    population: &PreferenceDataset,
    sample: &PreferenceDataset,
    plan: &AugmentationPlan,
) -> Vec<Participant> {
    let outside: Vec<usize> = population
        .participants()
        .iter()
        .enumerate()
        .filter(|(_, p)| !sample.contains_participant(&p.id))
        .map(|(i, _)| i)
        .collect();
    let mut groups: Vec<(u64, Vec<usize>)> = match plan.stratify_by {
        None => vec![(0, outside)],
        Some(attr) => {
            let mut by_cat: HashMap<String, Vec<usize>> = HashMap::new();
            for i in outside {
                let cat = population.participants()[i]
                    .demographics
                    .category(attr)
                    .unwrap_or_default();
                by_cat.entry(cat).or_default().push(i);
            }
            by_cat
                .into_iter()
                .map(|(cat, members)| (label_stream(&cat), members))
                .collect()
        }
    };
    groups.sort();
    let mut picked: Vec<usize> = Vec::new();
    for (stream, members) in groups {
        let k = round_half_up(plan.extra_fraction * members.len() as f64).min(members.len());
        let mut rng = rng_from_seed(derive_seed(plan.seed, stream));
        picked.extend(
            index::sample(&mut rng, members.len(), k)
                .into_iter()
                .map(|j| members[j]),
        );
    }
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| population.participants()[i].clone())
        .collect()
}

/// Which proposal pairs to predict for each extra participant.
#[derive(Debug, Clone, PartialEq)]
pub enum PairSchedule {
    /// The pairs each participant was actually shown, in display order.
    Elicited(HashMap<ParticipantId, Vec<(ProposalId, ProposalId)>>),
    /// Distinct pairs drawn uniformly per participant, in random display
    /// order. More pairs than exist are capped at all pairs.
    Random {
        proposals: Vec<ProposalId>,
        pairs_per_participant: usize,
        seed: u64,
    },
}

impl PairSchedule {
    pub fn elicited(population: &PreferenceDataset) -> Self {
        PairSchedule::Elicited(population.elicited_pairs())
    }

    pub fn random(proposals: Vec<ProposalId>, pairs_per_participant: usize, seed: u64) -> Self {
        PairSchedule::Random {
            proposals,
            pairs_per_participant,
            seed,
        }
    }

    pub fn pairs_for(
        &self,
        participant: &ParticipantId,
    ) -> Result<Vec<(ProposalId, ProposalId)>, AugmentError> {
        match self {
            PairSchedule::Elicited(map) => map
                .get(participant)
                .cloned()
                .ok_or_else(|| AugmentError::MissingSchedule(participant.clone())),
            PairSchedule::Random {
                proposals,
                pairs_per_participant,
                seed,
            } => {
                let n = proposals.len();
                let all: Vec<(usize, usize)> = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .collect();
                let k = (*pairs_per_participant).min(all.len());
                let mut rng = rng_from_seed(derive_seed(*seed, label_stream(participant.as_str())));
                let drawn = index::sample(&mut rng, all.len(), k).into_vec();
                Ok(drawn
                    .into_iter()
                    .map(|m| {
                        let (i, j) = all[m];
                        if rand::Rng::random::<bool>(&mut rng) {
                            (proposals[i], proposals[j])
                        } else {
                            (proposals[j], proposals[i])
                        }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailurePolicy {
    #[default]
    FailFast,
    SkipAndLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Elicited,
    Synthetic,
}

/// A sample with predicted choices for extra participants kept apart from
/// the elicited ones.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    pub base: PreferenceDataset,
    pub extra_participants: Vec<Participant>,
    pub synthetic_choices: Vec<PairwiseChoice>,
    /// Queries dropped under [`FailurePolicy::SkipAndLog`].
    pub skipped_queries: usize,
    /// Predictions whose two display orders disagreed.
    pub inconsistent_predictions: usize,
}

impl AugmentedDataset {
    pub fn choices(&self) -> impl Iterator<Item = (Provenance, &PairwiseChoice)> {
        self.base
            .choices()
            .iter()
            .map(|c| (Provenance::Elicited, c))
            .chain(
                self.synthetic_choices
                    .iter()
                    .map(|c| (Provenance::Synthetic, c)),
            )
    }

    /// Elicited and synthetic choices counted alike.
    pub fn tally(&self) -> PairwiseTally {
        tally_choices(
            self.base.proposals().iter().map(|p| p.id),
            self.choices().map(|(_, c)| c),
        )
    }

    /// Base sample plus extras and their predicted choices as one dataset.
    pub fn combined(&self) -> Result<PreferenceDataset, CoreError> {
        self.base.extended(
            self.extra_participants.iter().cloned(),
            self.synthetic_choices.iter().cloned(),
        )
    }
}

/// Predicts every scheduled pair of every extra with both display orders and
/// records the results as synthetic choices. Query `i` breaks order ties with
/// `derive_seed(seed, i)`.
pub fn augment_type_ib(
    sample: &PreferenceDataset,
    extras: &[Participant],
    schedule: &PairSchedule,
    backend: &dyn PredictorBackend,
    policy: FailurePolicy,
    seed: u64,
) -> Result<AugmentedDataset, AugmentError> {
    let mut queries = Vec::new();
    for extra in extras {
        if sample.contains_participant(&extra.id) {
            return Err(AugmentError::ExtraInSample(extra.id.clone()));
        }
        for (a, b) in schedule.pairs_for(&extra.id)? {
            let first = sample.proposal(a).ok_or(CoreError::UnknownProposal {
                index: queries.len(),
                id: a,
            })?;
            let second = sample.proposal(b).ok_or(CoreError::UnknownProposal {
                index: queries.len(),
                id: b,
            })?;
            queries.push(PredictionQuery::new(
                Some(extra.id.clone()),
                extra.demographics.clone(),
                first.clone(),
                second.clone(),
            )?);
        }
    }
    let results = predict_many(backend, &queries, InferenceMode::DualOrder, seed);
    let mut synthetic_choices = Vec::with_capacity(queries.len());
    let mut skipped_queries = 0;
    let mut inconsistent_predictions = 0;
    for (query, result) in queries.iter().zip(results) {
        match result {
            Ok(p) => {
                if !p.consistent_across_orders {
                    inconsistent_predictions += 1;
                }
                synthetic_choices.push(PairwiseChoice::new(
                    query
                        .subject
                        .clone()
                        .expect("augmentation queries carry a subject"),
                    query.first.id.0,
                    query.second.id.0,
                    p.chosen,
                ));
            }
            Err(e) => match policy {
                FailurePolicy::FailFast => return Err(e.into()),
                FailurePolicy::SkipAndLog => {
                    log::warn!(
                        "skipping prediction for {} on ({}, {}): {e}",
                        query.subject.as_ref().map_or("?", |s| s.as_str()),
                        query.first.id,
                        query.second.id
                    );
                    skipped_queries += 1;
                }
            },
        }
    }
    Ok(AugmentedDataset {
        base: sample.clone(),
        extra_participants: extras.to_vec(),
        synthetic_choices,
        skipped_queries,
        inconsistent_predictions,
    })
}

/// Selects extras per `plan` and runs the augmentation it names.
pub fn augment(
    population: &PreferenceDataset,
    sample: &PreferenceDataset,
    plan: &AugmentationPlan,
    schedule: &PairSchedule,
    backend: &dyn PredictorBackend,
    policy: FailurePolicy,
) -> Result<AugmentedDataset, AugmentError> {
    plan.ensure_executable()?;
    let extras = select_extras(population, sample, plan);
    augment_type_ib(
        sample,
        &extras,
        schedule,
        backend,
        policy,
        derive_seed(plan.seed, 1),
    )
}

/// Produces a backend conditioned on one sample. `full` is passed so that
/// lookup mocks can answer for participants outside the sample.
pub trait BackendFactory: Sync {
    fn name(&self) -> String;

    fn build(
        &self,
        sample: &PreferenceDataset,
        full: &PreferenceDataset,
    ) -> Result<Box<dyn PredictorBackend>, PredictError>;
}

#[derive(Debug, Clone, Copy)]
pub struct NearestNeighborFactory {
    pub k: usize,
}

impl BackendFactory for NearestNeighborFactory {
    fn name(&self) -> String {
        format!("nearest-neighbor(k={})", self.k)
    }

    fn build(
        &self,
        sample: &PreferenceDataset,
        _full: &PreferenceDataset,
    ) -> Result<Box<dyn PredictorBackend>, PredictError> {
        Ok(Box::new(NearestNeighbor::fit_with_k(sample, self.k)))
    }
}

/// Answers from the full dataset's recorded choices.
#[derive(Debug, Clone, Copy)]
pub struct OracleFactory;

impl BackendFactory for OracleFactory {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn build(
        &self,
        _sample: &PreferenceDataset,
        full: &PreferenceDataset,
    ) -> Result<Box<dyn PredictorBackend>, PredictError> {
        Ok(Box::new(Oracle::from_dataset(full)))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AlwaysFirstFactory;

impl BackendFactory for AlwaysFirstFactory {
    fn name(&self) -> String {
        "always-first".into()
    }

    fn build(
        &self,
        _sample: &PreferenceDataset,
        _full: &PreferenceDataset,
    ) -> Result<Box<dyn PredictorBackend>, PredictError> {
        Ok(Box::new(AlwaysFirst))
    }
}

/// A served model fine-tuned offline on the sample's export. The same
/// endpoint is returned for every sample, so the operator is responsible for
/// serving the model that matches each repetition.
#[derive(Debug, Clone)]
pub struct RemoteFactory {
    pub config: RemoteEndpointConfig,
    pub template: PromptTemplate,
}

impl BackendFactory for RemoteFactory {
    fn name(&self) -> String {
        format!("remote:{}", self.config.model)
    }

    fn build(
        &self,
        _sample: &PreferenceDataset,
        _full: &PreferenceDataset,
    ) -> Result<Box<dyn PredictorBackend>, PredictError> {
        Ok(Box::new(RemoteBackend::new(
            self.config.clone(),
            self.template.clone(),
        )))
    }
}

/// How pairs are scheduled for extras during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ScheduleKind {
    Elicited,
    Random { pairs_per_participant: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSettings {
    pub fractions: Vec<f64>,
    pub repetitions: usize,
    pub schedule: ScheduleKind,
    pub policy: FailurePolicy,
    pub ci_level: f64,
    pub bootstrap_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub fraction: f64,
    pub repetition: usize,
    pub plain_r2: f64,
    pub augmented_r2: f64,
    pub synthetic_choice_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub fraction: f64,
    pub repetitions: usize,
    pub plain: ConfidenceInterval,
    pub augmented: ConfidenceInterval,
    /// Repetitions in which the augmented R² exceeded the plain one.
    pub augmented_wins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationEvaluation {
    pub backend: String,
    pub records: Vec<CurveRecord>,
    pub summaries: Vec<CurveSummary>,
}

/// For every fraction and repetition: draws a sample, builds a backend on it,
/// augments it per `plan` and compares the win rates of the plain and the
/// augmented sample with those of the full population.
///
/// Repetition `r` of fraction index `f` draws its sample with
/// `derive_path(seed, [f, r, 0])`, its extras with
/// `derive_path(plan.seed, [f, r])` and breaks order ties with
/// `derive_path(seed, [f, r, 1])`.
pub fn evaluate_augmentation(
    full: &PreferenceDataset,
    plan: &AugmentationPlan,
    factory: &dyn BackendFactory,
    settings: &EvaluationSettings,
    seed: u64,
) -> Result<AugmentationEvaluation, AugmentError> {
    plan.ensure_executable()?;
    let schedule_base = match settings.schedule {
        ScheduleKind::Elicited => Some(PairSchedule::elicited(full)),
        ScheduleKind::Random { .. } => None,
    };
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for (f, &fraction) in settings.fractions.iter().enumerate() {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(CoreError::InvalidFraction(fraction).into());
        }
        let mut plain = Vec::with_capacity(settings.repetitions);
        let mut augmented = Vec::with_capacity(settings.repetitions);
        let mut wins = 0;
        for r in 0..settings.repetitions {
            let path = [f as u64, r as u64];
            let spec = SampleSpec::new(fraction, derive_path(seed, &[path[0], path[1], 0]))?;
            let sample = sample_participants(full, &spec);
            let backend = factory.build(&sample, full)?;
            let rep_plan = AugmentationPlan {
                seed: derive_path(plan.seed, &path),
                ..*plan
            };
            let extras = select_extras(full, &sample, &rep_plan);
            let random_schedule;
            let schedule = match (&schedule_base, settings.schedule) {
                (Some(s), _) => s,
                (
                    None,
                    ScheduleKind::Random {
                        pairs_per_participant,
                    },
                ) => {
                    random_schedule = PairSchedule::random(
                        full.proposal_ids(),
                        pairs_per_participant,
                        derive_path(seed, &[path[0], path[1], 2]),
                    );
                    &random_schedule
                }
                (None, ScheduleKind::Elicited) => {
                    unreachable!("elicited schedule is built up front")
                }
            };
            let aug = augment_type_ib(
                &sample,
                &extras,
                schedule,
                backend.as_ref(),
                settings.policy,
                derive_path(seed, &[path[0], path[1], 1]),
            )?;
            let plain_r2 = winrate_r2(full, &sample)?;
            let augmented_r2 = winrate_r2(full, &aug.combined()?)?;
            if augmented_r2 > plain_r2 {
                wins += 1;
            }
            plain.push(plain_r2);
            augmented.push(augmented_r2);
            records.push(CurveRecord {
                fraction,
                repetition: r,
                plain_r2,
                augmented_r2,
                synthetic_choice_count: aug.synthetic_choices.len(),
            });
        }
        let ci_seed = derive_path(seed, &[f as u64, u64::MAX]);
        summaries.push(CurveSummary {
            fraction,
            repetitions: settings.repetitions,
            plain: bootstrap_ci(
                &plain,
                settings.ci_level,
                settings.bootstrap_iterations,
                ci_seed,
            )?,
            augmented: bootstrap_ci(
                &augmented,
                settings.ci_level,
                settings.bootstrap_iterations,
                derive_seed(ci_seed, 1),
            )?,
            augmented_wins: wins,
        });
    }
    Ok(AugmentationEvaluation {
        backend: factory.name(),
        records,
        summaries,
    })
}
