//! Participants, proposals and the pairwise choices linking them.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Proposal identifier, taken verbatim from the source data. Ids are not
/// assumed to be contiguous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProposalId(pub u32);

impl fmt::Display for ProposalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticipantId(pub String);

impl ParticipantId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: ProposalId,
    pub text: String,
    pub candidate_tag: Option<String>,
}

impl Proposal {
    pub fn new(id: u32, text: impl Into<String>, candidate_tag: Option<&str>) -> Self {
        Self {
            id: ProposalId(id),
            text: text.into(),
            candidate_tag: candidate_tag.map(str::to_owned),
        }
    }
}

/// Age band with the boundary at 50 years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBand {
    Young,
    Old,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ideology {
    Liberal,
    Centrist,
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Zone {
    Urban,
    Rural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Education {
    CollegeEducated,
    NonCollegeEducated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
}

impl AgeBand {
    pub const ALL: [AgeBand; 2] = [AgeBand::Young, AgeBand::Old];

    pub fn label(self) -> &'static str {
        match self {
            AgeBand::Young => "Young",
            AgeBand::Old => "Old",
        }
    }
}

impl Ideology {
    pub const ALL: [Ideology; 3] = [
        Ideology::Liberal,
        Ideology::Centrist,
        Ideology::Conservative,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Ideology::Liberal => "Liberal",
            Ideology::Centrist => "Centrist",
            Ideology::Conservative => "Conservative",
        }
    }
}

impl Zone {
    pub const ALL: [Zone; 2] = [Zone::Urban, Zone::Rural];

    pub fn label(self) -> &'static str {
        match self {
            Zone::Urban => "Urban",
            Zone::Rural => "Rural",
        }
    }
}

impl Education {
    pub const ALL: [Education; 2] = [Education::CollegeEducated, Education::NonCollegeEducated];

    pub fn label(self) -> &'static str {
        match self {
            Education::CollegeEducated => "College educated",
            Education::NonCollegeEducated => "Non-college educated",
        }
    }
}

impl Sex {
    pub const ALL: [Sex; 2] = [Sex::Male, Sex::Female];

    pub fn label(self) -> &'static str {
        match self {
            Sex::Male => "Male",
            Sex::Female => "Female",
        }
    }
}

/// Self-reported demographics. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Demographics {
    pub age_band: Option<AgeBand>,
    pub ideology: Option<Ideology>,
    pub zone: Option<Zone>,
    pub education: Option<Education>,
    pub sex: Option<Sex>,
    pub city: Option<String>,
    pub state: Option<String>,
}

/// A demographic field, used to select, group and balance participants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    AgeBand,
    Ideology,
    Zone,
    Education,
    Sex,
    City,
    State,
}

impl Attribute {
    pub const ALL: [Attribute; 7] = [
        Attribute::AgeBand,
        Attribute::Ideology,
        Attribute::Zone,
        Attribute::Education,
        Attribute::Sex,
        Attribute::City,
        Attribute::State,
    ];

    /// Column / config name.
    pub fn name(self) -> &'static str {
        match self {
            Attribute::AgeBand => "age_band",
            Attribute::Ideology => "ideology",
            Attribute::Zone => "zone",
            Attribute::Education => "education",
            Attribute::Sex => "sex",
            Attribute::City => "city",
            Attribute::State => "state",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let normalized = name.trim().to_ascii_lowercase().replace('-', "_");
        let normalized = match normalized.as_str() {
            "age" => "age_band",
            "gender" => "sex",
            other => other,
        };
        Self::ALL.into_iter().find(|a| a.name() == normalized)
    }

    /// Enumerated categories in comparison order, or `None` for free-text
    /// fields whose categories are whatever values are observed.
    pub fn levels(self) -> Option<&'static [&'static str]> {
        match self {
            Attribute::AgeBand => Some(&["Young", "Old"]),
            Attribute::Ideology => Some(&["Liberal", "Centrist", "Conservative"]),
            Attribute::Zone => Some(&["Urban", "Rural"]),
            Attribute::Education => Some(&["College educated", "Non-college educated"]),
            // Female first so comparisons read "Female vs. Male".
            Attribute::Sex => Some(&["Female", "Male"]),
            Attribute::City | Attribute::State => None,
        }
    }

    /// Short label used in subgroup comparison rows.
    pub fn comparison_label(self, category: &str) -> String {
        match (self, category) {
            (Attribute::Education, "College educated") => "College-educated".to_owned(),
            (Attribute::Education, "Non-college educated") => "non-College ed.".to_owned(),
            (_, other) => other.to_owned(),
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Demographics {
    /// Canonical category label of `attribute`, if populated.
    pub fn category(&self, attribute: Attribute) -> Option<String> {
        match attribute {
            Attribute::AgeBand => self.age_band.map(|v| v.label().to_owned()),
            Attribute::Ideology => self.ideology.map(|v| v.label().to_owned()),
            Attribute::Zone => self.zone.map(|v| v.label().to_owned()),
            Attribute::Education => self.education.map(|v| v.label().to_owned()),
            Attribute::Sex => self.sex.map(|v| v.label().to_owned()),
            Attribute::City => self.city.clone(),
            Attribute::State => self.state.clone(),
        }
    }

    /// Number of fields populated on both sides with equal values.
    pub fn matching_fields(&self, other: &Demographics) -> usize {
        Attribute::ALL
            .iter()
            .filter(|&&a| match (self.category(a), other.category(a)) {
                (Some(x), Some(y)) => x == y,
                _ => false,
            })
            .count()
    }

    pub fn is_empty(&self) -> bool {
        Attribute::ALL.iter().all(|&a| self.category(a).is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub id: ParticipantId,
    pub demographics: Demographics,
}

/// Which displayed proposal was selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

impl Choice {
    pub fn flipped(self) -> Self {
        match self {
            Choice::A => Choice::B,
            Choice::B => Choice::A,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Choice::A => "A",
            Choice::B => "B",
        }
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One elicitation: `first` was displayed as A, `second` as B.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairwiseChoice {
    pub participant: ParticipantId,
    pub first: ProposalId,
    pub second: ProposalId,
    pub chosen: Choice,
}

impl PairwiseChoice {
    pub fn new(participant: ParticipantId, first: u32, second: u32, chosen: Choice) -> Self {
        Self {
            participant,
            first: ProposalId(first),
            second: ProposalId(second),
            chosen,
        }
    }

    pub fn winner(&self) -> ProposalId {
        match self.chosen {
            Choice::A => self.first,
            Choice::B => self.second,
        }
    }

    pub fn loser(&self) -> ProposalId {
        match self.chosen {
            Choice::A => self.second,
            Choice::B => self.first,
        }
    }

    /// The same elicitation with display order reversed.
    pub fn reversed(&self) -> Self {
        Self {
            participant: self.participant.clone(),
            first: self.second,
            second: self.first,
            chosen: self.chosen.flipped(),
        }
    }

    /// Pair key independent of display order.
    pub fn unordered_pair(&self) -> (ProposalId, ProposalId) {
        unordered(self.first, self.second)
    }
}

pub fn unordered(a: ProposalId, b: ProposalId) -> (ProposalId, ProposalId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Proposals, participants and their choices, with every reference checked.
///
/// Choice order is preserved exactly as given. Repeated elicitations of the
/// same pair by the same participant are kept as separate events.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceDataset {
    proposals: Vec<Proposal>,
    participants: Vec<Participant>,
    choices: Vec<PairwiseChoice>,
    proposal_index: BTreeMap<ProposalId, usize>,
    participant_index: HashMap<ParticipantId, usize>,
}

impl PreferenceDataset {
    pub fn new(
        proposals: Vec<Proposal>,
        participants: Vec<Participant>,
        choices: Vec<PairwiseChoice>,
    ) -> Result<Self, CoreError> {
        let mut proposal_index = BTreeMap::new();
        for (i, p) in proposals.iter().enumerate() {
            if p.text.trim().is_empty() {
                return Err(CoreError::EmptyProposalText(p.id));
            }
            if proposal_index.insert(p.id, i).is_some() {
                return Err(CoreError::DuplicateProposal(p.id));
            }
        }
        let mut participant_index = HashMap::with_capacity(participants.len());
        for (i, p) in participants.iter().enumerate() {
            if participant_index.insert(p.id.clone(), i).is_some() {
                return Err(CoreError::DuplicateParticipant(p.id.clone()));
            }
        }
        for (index, c) in choices.iter().enumerate() {
            if c.first == c.second {
                return Err(CoreError::SelfPair { index, id: c.first });
            }
            for id in [c.first, c.second] {
                if !proposal_index.contains_key(&id) {
                    return Err(CoreError::UnknownProposal { index, id });
                }
            }
            if !participant_index.contains_key(&c.participant) {
                return Err(CoreError::UnknownParticipant {
                    index,
                    id: c.participant.clone(),
                });
            }
        }
        Ok(Self {
            proposals,
            participants,
            choices,
            proposal_index,
            participant_index,
        })
    }

    pub fn proposals(&self) -> &[Proposal] {
        &self.proposals
    }

    pub fn participants(&self) -> &[Participant] {
        &self.participants
    }

    pub fn choices(&self) -> &[PairwiseChoice] {
        &self.choices
    }

    pub fn proposal(&self, id: ProposalId) -> Option<&Proposal> {
        self.proposal_index.get(&id).map(|&i| &self.proposals[i])
    }

    pub fn participant(&self, id: &ParticipantId) -> Option<&Participant> {
        self.participant_index
            .get(id)
            .map(|&i| &self.participants[i])
    }

    pub fn contains_participant(&self, id: &ParticipantId) -> bool {
        self.participant_index.contains_key(id)
    }

    /// Proposal ids in ascending order.
    pub fn proposal_ids(&self) -> Vec<ProposalId> {
        self.proposal_index.keys().copied().collect()
    }

    /// Sub-dataset holding the participants at `indices` (into
    /// [`participants`](Self::participants)) and all of their choices. Dataset
    /// order is kept regardless of the order of `indices`.
    pub fn restrict_to_indices(&self, indices: &[usize]) -> Self {
        let mut keep = vec![false; self.participants.len()];
        for &i in indices {
            keep[i] = true;
        }
        let participants: Vec<Participant> = self
            .participants
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(p, _)| p.clone())
            .collect();
        let kept: HashSet<&ParticipantId> = participants.iter().map(|p| &p.id).collect();
        let choices = self
            .choices
            .iter()
            .filter(|c| kept.contains(&c.participant))
            .cloned()
            .collect();
        let participant_index = participants
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.clone(), i))
            .collect();
        Self {
            proposals: self.proposals.clone(),
            participants,
            choices,
            proposal_index: self.proposal_index.clone(),
            participant_index,
        }
    }

    /// Sub-dataset restricted to the given participant ids.
    pub fn restrict_to(&self, ids: &HashSet<ParticipantId>) -> Self {
        let indices: Vec<usize> = self
            .participants
            .iter()
            .enumerate()
            .filter(|(_, p)| ids.contains(&p.id))
            .map(|(i, _)| i)
            .collect();
        self.restrict_to_indices(&indices)
    }

    /// Choices of one participant, in dataset order.
    pub fn choices_of<'a>(
        &'a self,
        id: &'a ParticipantId,
    ) -> impl Iterator<Item = &'a PairwiseChoice> + 'a {
        self.choices.iter().filter(move |c| &c.participant == id)
    }

    /// Pairs elicited from each participant, keyed by participant id.
    pub fn elicited_pairs(&self) -> HashMap<ParticipantId, Vec<(ProposalId, ProposalId)>> {
        let mut out: HashMap<ParticipantId, Vec<(ProposalId, ProposalId)>> = HashMap::new();
        for c in &self.choices {
            out.entry(c.participant.clone())
                .or_default()
                .push((c.first, c.second));
        }
        out
    }

    /// Copy of this dataset with additional participants and choices.
    pub fn extended(
        &self,
        participants: impl IntoIterator<Item = Participant>,
        choices: impl IntoIterator<Item = PairwiseChoice>,
    ) -> Result<Self, CoreError> {
        let mut all_participants = self.participants.clone();
        all_participants.extend(participants);
        let mut all_choices = self.choices.clone();
        all_choices.extend(choices);
        Self::new(self.proposals.clone(), all_participants, all_choices)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pid(s: &str) -> ParticipantId {
        ParticipantId::new(s)
    }

    fn tiny() -> PreferenceDataset {
        PreferenceDataset::new(
            vec![Proposal::new(1, "one", None), Proposal::new(2, "two", None)],
            vec![
                Participant {
                    id: pid("a"),
                    demographics: Demographics::default(),
                },
                Participant {
                    id: pid("b"),
                    demographics: Demographics::default(),
                },
            ],
            vec![
                PairwiseChoice::new(pid("a"), 1, 2, Choice::A),
                PairwiseChoice::new(pid("b"), 2, 1, Choice::A),
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_broken_references() {
        let props = vec![Proposal::new(1, "one", None), Proposal::new(2, "two", None)];
        let people = vec![Participant {
            id: pid("a"),
            demographics: Demographics::default(),
        }];
        let err = PreferenceDataset::new(
            props.clone(),
            people.clone(),
            vec![PairwiseChoice::new(pid("a"), 1, 1, Choice::A)],
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::SelfPair { index: 0, .. }));

        let err = PreferenceDataset::new(
            props.clone(),
            people.clone(),
            vec![PairwiseChoice::new(pid("a"), 1, 9, Choice::A)],
        )
        .unwrap_err();
        assert_eq!(
            err,
            CoreError::UnknownProposal {
                index: 0,
                id: ProposalId(9)
            }
        );

        let err = PreferenceDataset::new(
            props.clone(),
            people,
            vec![PairwiseChoice::new(pid("z"), 1, 2, Choice::A)],
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::UnknownParticipant { .. }));

        let err = PreferenceDataset::new(
            vec![Proposal::new(1, "one", None), Proposal::new(1, "uno", None)],
            vec![],
            vec![],
        )
        .unwrap_err();
        assert_eq!(err, CoreError::DuplicateProposal(ProposalId(1)));

        let err =
            PreferenceDataset::new(vec![Proposal::new(3, "  ", None)], vec![], vec![]).unwrap_err();
        assert_eq!(err, CoreError::EmptyProposalText(ProposalId(3)));
    }

    #[test]
    fn restrict_keeps_dataset_order() {
        let d = tiny();
        let sub = d.restrict_to_indices(&[1]);
        assert_eq!(sub.participants().len(), 1);
        assert_eq!(sub.choices().len(), 1);
        assert_eq!(sub.choices()[0].participant, pid("b"));
        assert_eq!(sub.proposals().len(), 2);
    }

    #[test]
    fn reversal_keeps_winner() {
        let c = PairwiseChoice::new(pid("a"), 4, 7, Choice::B);
        assert_eq!(c.winner(), ProposalId(7));
        assert_eq!(c.reversed().winner(), ProposalId(7));
        assert_eq!(c.reversed().reversed(), c);
    }

    #[test]
    fn attribute_names_round_trip() {
        for a in Attribute::ALL {
            assert_eq!(Attribute::from_name(a.name()), Some(a));
        }
        assert_eq!(Attribute::from_name("Age"), Some(Attribute::AgeBand));
        assert_eq!(Attribute::from_name("income"), None);
    }

    #[test]
    fn matching_fields_ignores_absent() {
        let a = Demographics {
            ideology: Some(Ideology::Liberal),
            sex: Some(Sex::Male),
            ..Default::default()
        };
        let b = Demographics {
            ideology: Some(Ideology::Liberal),
            sex: Some(Sex::Female),
            zone: Some(Zone::Urban),
            ..Default::default()
        };
        assert_eq!(a.matching_fields(&b), 1);
        assert_eq!(
            Demographics::default().matching_fields(&Demographics::default()),
            0
        );
    }
}
