use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::summary::{bootstrap_ci, ConfidenceInterval, ScoredPrediction};
use super::welch::welch_t_test;
use super::StatsError;
use crate::model::{Attribute, ParticipantId, PreferenceDataset};
use crate::rng::{derive_seed, label_stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub subgroup: String,
    pub n_predictions: usize,
    pub n_participants: usize,
    pub accuracy: f64,
    pub interval: ConfidenceInterval,
}

impl AccuracyReport {
    /// Accuracy of `predictions` with a bootstrap interval over the per-prediction
    /// correctness indicators.
    pub fn new(
        subgroup: impl Into<String>,
        predictions: &[ScoredPrediction],
        level: f64,
        iterations: usize,
        seed: u64,
    ) -> Result<Self, StatsError> {
        let indicators: Vec<f64> = predictions
            .iter()
            .map(ScoredPrediction::indicator)
            .collect();
        let interval = bootstrap_ci(&indicators, level, iterations, seed)?;
        let mut people: Vec<&ParticipantId> = predictions.iter().map(|p| &p.participant).collect();
        people.sort();
        people.dedup();
        Ok(Self {
            subgroup: subgroup.into(),
            n_predictions: predictions.len(),
            n_participants: people.len(),
            accuracy: interval.point_estimate,
            interval,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupComparison {
    pub group_a: String,
    pub group_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
}

impl SubgroupComparison {
    pub fn label(&self) -> String {
        format!("{} vs. {}", self.group_a, self.group_b)
    }

    /// `***` below 1%, `**` below 2%, `*` below 5%.
    pub fn stars(&self) -> &'static str {
        match self.p_value {
            p if p < 0.01 => "***",
            p if p < 0.02 => "**",
            p if p < 0.05 => "*",
            _ => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupAnalysis {
    pub attribute: Attribute,
    pub reports: Vec<AccuracyReport>,
    pub comparisons: Vec<SubgroupComparison>,
}

fn per_participant_means(predictions: &[&ScoredPrediction]) -> Vec<f64> {
    let mut by_person: BTreeMap<&ParticipantId, (f64, f64)> = BTreeMap::new();
    for p in predictions {
        let e = by_person.entry(&p.participant).or_default();
        e.0 += p.indicator();
        e.1 += 1.0;
    }
    by_person.values().map(|(c, n)| c / n).collect()
}

/// Accuracy per category of `attribute`, plus a Welch test of per-participant
/// mean correctness for every pair of categories.
///
/// Pairs are ordered so the first category is compared against the later
/// ones from last to first, which for ideology gives Liberal vs. Conservative,
/// Liberal vs. Centrist, Centrist vs. Conservative. Predictions of
/// participants without the attribute are ignored.
pub fn subgroup_accuracy_analysis(
    test: &PreferenceDataset,
    predictions: &[ScoredPrediction],
    attribute: Attribute,
    level: f64,
    iterations: usize,
    seed: u64,
) -> Result<SubgroupAnalysis, StatsError> {
    let mut groups: BTreeMap<String, Vec<&ScoredPrediction>> = BTreeMap::new();
    for p in predictions {
        let person = test.participant(&p.participant).ok_or_else(|| {
            StatsError::DegenerateInput(format!(
                "prediction for unknown participant {}",
                p.participant
            ))
        })?;
        if let Some(cat) = person.demographics.category(attribute) {
            groups.entry(cat).or_default().push(p);
        }
    }
    let order: Vec<String> = match attribute.levels() {
        Some(levels) => levels
            .iter()
            .filter(|l| groups.contains_key(**l))
            .map(|l| l.to_string())
            .collect(),
        None => groups.keys().cloned().collect(),
    };
    if order.is_empty() {
        return Err(StatsError::EmptyCategory {
            attribute,
            category: "any".into(),
        });
    }

    let mut reports = Vec::with_capacity(order.len());
    for cat in &order {
        let owned: Vec<ScoredPrediction> = groups[cat].iter().map(|p| (*p).clone()).collect();
        reports.push(AccuracyReport::new(
            attribute.comparison_label(cat),
            &owned,
            level,
            iterations,
            derive_seed(seed, label_stream(cat)),
        )?);
    }

    let means: Vec<Vec<f64>> = order
        .iter()
        .map(|c| per_participant_means(&groups[c]))
        .collect();
    let mut comparisons = Vec::new();
    for i in 0..order.len() {
        for j in (i + 1..order.len()).rev() {
            let w = welch_t_test(&means[i], &means[j])?;
            comparisons.push(SubgroupComparison {
                group_a: attribute.comparison_label(&order[i]),
                group_b: attribute.comparison_label(&order[j]),
                n_a: means[i].len(),
                n_b: means[j].len(),
                t_statistic: w.t_statistic,
                degrees_of_freedom: w.degrees_of_freedom,
                p_value: w.p_value,
            });
        }
    }
    Ok(SubgroupAnalysis {
        attribute,
        reports,
        comparisons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        Choice, Demographics, Ideology, PairwiseChoice, Participant, Proposal, ProposalId,
    };

    fn setup(correct: impl Fn(Ideology) -> bool) -> (PreferenceDataset, Vec<ScoredPrediction>) {
        let mut people = Vec::new();
        let mut choices = Vec::new();
        let mut preds = Vec::new();
        for (k, ideology) in Ideology::ALL.iter().enumerate() {
            for i in 0..4 {
                let id = ParticipantId::new(format!("{k}-{i}"));
                people.push(Participant {
                    id: id.clone(),
                    demographics: Demographics {
                        ideology: Some(*ideology),
                        ..Default::default()
                    },
                });
                choices.push(PairwiseChoice::new(id.clone(), 1, 2, Choice::A));
                preds.push(ScoredPrediction {
                    participant: id,
                    predicted: ProposalId(if correct(*ideology) { 1 } else { 2 }),
                    truth: ProposalId(1),
                });
            }
        }
        let props = vec![Proposal::new(1, "one", None), Proposal::new(2, "two", None)];
        (
            PreferenceDataset::new(props, people, choices).unwrap(),
            preds,
        )
    }

    #[test]
    fn ideology_pairings_and_extremes() {
        let (d, preds) = setup(|i| i == Ideology::Liberal);
        let r = subgroup_accuracy_analysis(&d, &preds, Attribute::Ideology, 0.95, 50, 1).unwrap();
        let labels: Vec<String> = r
            .comparisons
            .iter()
            .map(SubgroupComparison::label)
            .collect();
        assert_eq!(
            labels,
            [
                "Liberal vs. Conservative",
                "Liberal vs. Centrist",
                "Centrist vs. Conservative"
            ]
        );
        assert_eq!(r.reports[0].accuracy, 1.0);
        assert_eq!(r.reports[2].accuracy, 0.0);
        assert_eq!(r.comparisons[0].p_value, 0.0);
        assert_eq!(r.comparisons[0].stars(), "***");
        assert_eq!(r.comparisons[2].p_value, 1.0);
    }

    #[test]
    fn missing_attribute() {
        let (d, preds) = setup(|_| true);
        assert!(matches!(
            subgroup_accuracy_analysis(&d, &preds, Attribute::Sex, 0.95, 10, 1),
            Err(StatsError::EmptyCategory { .. })
        ));
    }
}
