//! "Mad-libs" prompt templates.
//!
//! A skeleton is plain text with `{name}` placeholders. Demographic
//! placeholders (`age_band`, `ideology`, `zone`, `education`, `sex`, `city`,
//! `state`) must sit inside an optional segment `[[ ... ]]`; the whole segment
//! is dropped when any field it references is not reported. `{proposal_a}`
//! and `{proposal_b}` must each appear exactly once, outside optional
//! segments.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::backend::PredictionQuery;
use super::PredictError;
use crate::model::{AgeBand, Attribute, Demographics, Education, Ideology, Sex, Zone};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptLanguage {
    English,
    BrazilianPortuguese,
}

impl PromptLanguage {
    pub fn from_name(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "english" | "en" => Some(Self::English),
            "brazilian-portuguese" | "portuguese" | "pt" | "pt-br" => {
                Some(Self::BrazilianPortuguese)
            }
            _ => None,
        }
    }

    fn age(self, v: AgeBand) -> &'static str {
        match (self, v) {
            (Self::English, AgeBand::Young) => "Young (under 50 years old)",
            (Self::English, AgeBand::Old) => "Old (50 years old or more)",
            (Self::BrazilianPortuguese, AgeBand::Young) => "Jovem",
            (Self::BrazilianPortuguese, AgeBand::Old) => "De terceira idade",
        }
    }

    fn ideology(self, v: Ideology) -> &'static str {
        match (self, v) {
            (Self::English, v) => v.label(),
            (Self::BrazilianPortuguese, Ideology::Liberal) => "Esquerdista",
            (Self::BrazilianPortuguese, Ideology::Centrist) => "Centrista",
            (Self::BrazilianPortuguese, Ideology::Conservative) => "Conservador",
        }
    }

    fn zone(self, v: Zone) -> &'static str {
        match (self, v) {
            (Self::English, v) => v.label(),
            (Self::BrazilianPortuguese, Zone::Urban) => "Urbana",
            (Self::BrazilianPortuguese, Zone::Rural) => "Rural",
        }
    }

    fn education(self, v: Education) -> &'static str {
        match (self, v) {
            (Self::English, v) => v.label(),
            (Self::BrazilianPortuguese, Education::CollegeEducated) => "Com curso superior",
            (Self::BrazilianPortuguese, Education::NonCollegeEducated) => "Sem curso superior",
        }
    }

    fn sex(self, v: Sex) -> &'static str {
        match (self, v) {
            (Self::English, v) => v.label(),
            (Self::BrazilianPortuguese, Sex::Male) => "Masculino",
            (Self::BrazilianPortuguese, Sex::Female) => "Feminino",
        }
    }

    fn render(self, d: &Demographics, attribute: Attribute) -> Option<String> {
        match attribute {
            Attribute::AgeBand => d.age_band.map(|v| self.age(v).to_owned()),
            Attribute::Ideology => d.ideology.map(|v| self.ideology(v).to_owned()),
            Attribute::Zone => d.zone.map(|v| self.zone(v).to_owned()),
            Attribute::Education => d.education.map(|v| self.education(v).to_owned()),
            Attribute::Sex => d.sex.map(|v| self.sex(v).to_owned()),
            Attribute::City => d.city.clone(),
            Attribute::State => d.state.clone(),
        }
    }
}

impl fmt::Display for PromptLanguage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::English => "english",
            Self::BrazilianPortuguese => "brazilian-portuguese",
        })
    }
}

const ENGLISH_SKELETON: &str = "\
The following participant took part in a policy prioritization survey during Brazil's 2022 presidential election.[[
Age group: {age_band}.]][[
Political ideology: {ideology}.]][[
Zone: {zone}.]][[
Education: {education}.]][[
Sex: {sex}.]][[
City: {city}.]][[
State: {state}.]]
Which of the following two policy proposals does this participant prefer?
A: {proposal_a}
B: {proposal_b}
Answer with A or B.";

const PORTUGUESE_SKELETON: &str = "\
O participante a seguir participou de uma pesquisa de priorização de políticas públicas durante a eleição presidencial de 2022 no Brasil.[[
Faixa etária: {age_band}.]][[
Ideologia política: {ideology}.]][[
Zona: {zone}.]][[
Escolaridade: {education}.]][[
Sexo: {sex}.]][[
Cidade: {city}.]][[
Estado: {state}.]]
Qual das duas propostas a seguir este participante prefere?
A: {proposal_a}
B: {proposal_b}
Responda com A ou B.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Field(Attribute),
    ProposalA,
    ProposalB,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot(Slot),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Segment {
    optional: bool,
    pieces: Vec<Piece>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    language: PromptLanguage,
    skeleton: String,
    segments: Vec<Segment>,
}

fn slot_for(name: &str) -> Option<Slot> {
    match name {
        "proposal_a" => Some(Slot::ProposalA),
        "proposal_b" => Some(Slot::ProposalB),
        other => Attribute::ALL
            .into_iter()
            .find(|a| a.name() == other)
            .map(Slot::Field),
    }
}

fn parse_segment(text: &str, optional: bool) -> Result<Segment, PredictError> {
    let mut pieces = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            pieces.push(Piece::Text(rest[..open].to_owned()));
        }
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| PredictError::Template("unclosed '{' placeholder".into()))?;
        let name = &after[..close];
        let slot = slot_for(name)
            .ok_or_else(|| PredictError::Template(format!("unknown placeholder {{{name}}}")))?;
        pieces.push(Piece::Slot(slot));
        rest = &after[close + 1..];
    }
    if rest.contains('}') {
        return Err(PredictError::Template("stray '}' in skeleton".into()));
    }
    if !rest.is_empty() {
        pieces.push(Piece::Text(rest.to_owned()));
    }
    Ok(Segment { optional, pieces })
}

impl PromptTemplate {
    pub fn new(
        language: PromptLanguage,
        skeleton: impl Into<String>,
    ) -> Result<Self, PredictError> {
        let skeleton = skeleton.into();
        let mut segments = Vec::new();
        let mut rest = skeleton.as_str();
        while let Some(open) = rest.find("[[") {
            if rest[..open].contains("]]") {
                return Err(PredictError::Template("']]' without matching '[['".into()));
            }
            segments.push(parse_segment(&rest[..open], false)?);
            let after = &rest[open + 2..];
            let close = after
                .find("]]")
                .ok_or_else(|| PredictError::Template("unclosed '[[' segment".into()))?;
            if after[..close].contains("[[") {
                return Err(PredictError::Template("nested optional segments".into()));
            }
            segments.push(parse_segment(&after[..close], true)?);
            rest = &after[close + 2..];
        }
        if rest.contains("]]") {
            return Err(PredictError::Template("']]' without matching '[['".into()));
        }
        segments.push(parse_segment(rest, false)?);

        let mut count_a = 0;
        let mut count_b = 0;
        for seg in &segments {
            for piece in &seg.pieces {
                match piece {
                    Piece::Slot(Slot::ProposalA) | Piece::Slot(Slot::ProposalB) if seg.optional => {
                        return Err(PredictError::Template(
                            "proposal placeholders cannot be optional".into(),
                        ))
                    }
                    Piece::Slot(Slot::ProposalA) => count_a += 1,
                    Piece::Slot(Slot::ProposalB) => count_b += 1,
                    Piece::Slot(Slot::Field(a)) if !seg.optional => {
                        return Err(PredictError::Template(format!(
                            "{{{}}} must be inside an optional [[...]] segment",
                            a.name()
                        )))
                    }
                    _ => {}
                }
            }
        }
        if count_a != 1 || count_b != 1 {
            return Err(PredictError::Template(
                "{proposal_a} and {proposal_b} must each appear exactly once".into(),
            ));
        }
        Ok(Self {
            language,
            skeleton,
            segments,
        })
    }

    pub fn default_for(language: PromptLanguage) -> Self {
        let skeleton = match language {
            PromptLanguage::English => ENGLISH_SKELETON,
            PromptLanguage::BrazilianPortuguese => PORTUGUESE_SKELETON,
        };
        Self::new(language, skeleton).expect("built-in template is valid")
    }

    pub fn language(&self) -> PromptLanguage {
        self.language
    }

    pub fn skeleton(&self) -> &str {
        &self.skeleton
    }

    /// SHA-256 of language and skeleton, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.language.to_string().as_bytes());
        h.update([0u8]);
        h.update(self.skeleton.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Renders the prompt for `query`: the first proposal is labelled A, the
/// second B.
pub fn build_prompt(
    query: &PredictionQuery,
    template: &PromptTemplate,
) -> Result<String, PredictError> {
    let mut out = String::new();
    'segments: for seg in &template.segments {
        let mut rendered = String::new();
        for piece in &seg.pieces {
            match piece {
                Piece::Text(t) => rendered.push_str(t),
                Piece::Slot(Slot::ProposalA) => rendered.push_str(&query.first.text),
                Piece::Slot(Slot::ProposalB) => rendered.push_str(&query.second.text),
                Piece::Slot(Slot::Field(a)) => {
                    match template.language.render(&query.demographics, *a) {
                        Some(v) => rendered.push_str(&v),
                        None if seg.optional => continue 'segments,
                        None => {
                            return Err(PredictError::Template(format!(
                                "unresolved placeholder {{{}}}",
                                a.name()
                            )))
                        }
                    }
                }
            }
        }
        out.push_str(&rendered);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ParticipantId, Proposal};

    fn example_participant() -> Demographics {
        Demographics {
            age_band: Some(AgeBand::Young),
            ideology: Some(Ideology::Liberal),
            zone: None,
            education: Some(Education::CollegeEducated),
            sex: Some(Sex::Male),
            city: Some("Rio de Janeiro".into()),
            state: None,
        }
    }

    fn query(d: Demographics) -> PredictionQuery {
        PredictionQuery::new(
            Some(ParticipantId::new("u1")),
            d,
            Proposal::new(39, "Actions to curb tax evasion", Some("Lula")),
            Proposal::new(
                32,
                "Expand the privatization of state-owned companies and national infrastructure concessions",
                Some("Bolsonaro"),
            ),
        )
        .unwrap()
    }

    #[test]
    fn full_example_prompt() {
        let t = PromptTemplate::default_for(PromptLanguage::English);
        let p = build_prompt(&query(example_participant()), &t).unwrap();
        assert!(p.contains("A: Actions to curb tax evasion\n"));
        assert!(p.contains("B: Expand the privatization"));
        for clause in [
            "Age group: Young",
            "Political ideology: Liberal.",
            "Education: College educated.",
            "Sex: Male.",
            "City: Rio de Janeiro.",
        ] {
            assert!(p.contains(clause), "missing {clause:?} in\n{p}");
        }
        assert!(!p.contains("Zone:"));
        assert!(!p.contains('{') && !p.contains("[["));
    }

    #[test]
    fn all_absent_keeps_only_pair_and_instruction() {
        let t = PromptTemplate::default_for(PromptLanguage::English);
        let p = build_prompt(&query(Demographics::default()), &t).unwrap();
        assert_eq!(
            p,
            "The following participant took part in a policy prioritization survey during Brazil's 2022 presidential election.\n\
             Which of the following two policy proposals does this participant prefer?\n\
             A: Actions to curb tax evasion\n\
             B: Expand the privatization of state-owned companies and national infrastructure concessions\n\
             Answer with A or B."
        );
    }

    #[test]
    fn swapped_query_differs_only_in_labels() {
        let t = PromptTemplate::default_for(PromptLanguage::English);
        let q = query(example_participant());
        let p = build_prompt(&q, &t).unwrap();
        let s = build_prompt(&q.swapped(), &t).unwrap();
        assert_ne!(p, s);
        let diff: Vec<(&str, &str)> = p.lines().zip(s.lines()).filter(|(a, b)| a != b).collect();
        assert_eq!(diff.len(), 2);
        assert_eq!(diff[0].0.strip_prefix("A: "), diff[1].1.strip_prefix("B: "));
        assert_eq!(diff[0].1.strip_prefix("A: "), diff[1].0.strip_prefix("B: "));
    }

    #[test]
    fn portuguese_labels() {
        let t = PromptTemplate::default_for(PromptLanguage::BrazilianPortuguese);
        let p = build_prompt(&query(example_participant()), &t).unwrap();
        assert!(p.contains("Ideologia política: Esquerdista."));
        assert!(p.contains("Escolaridade: Com curso superior."));
        assert!(p.contains("Sexo: Masculino."));
        assert!(p.contains("Faixa etária: Jovem."));
    }

    #[test]
    fn template_validation() {
        let en = PromptLanguage::English;
        assert!(PromptTemplate::new(en, "{proposal_a} {proposal_b}").is_ok());
        assert!(PromptTemplate::new(en, "{proposal_a}").is_err());
        assert!(PromptTemplate::new(en, "{proposal_a} {proposal_a} {proposal_b}").is_err());
        assert!(PromptTemplate::new(en, "{proposal_a} {proposal_b} {income}").is_err());
        assert!(PromptTemplate::new(en, "{proposal_a} {proposal_b} {sex}").is_err());
        assert!(PromptTemplate::new(en, "{proposal_a} {proposal_b} [[{sex}").is_err());
        assert!(PromptTemplate::new(en, "[[{proposal_a}]] {proposal_b}").is_err());
        assert!(PromptTemplate::new(en, "{proposal_a} {proposal_b} [[ [[{sex}]] ]]").is_err());
        assert!(PromptTemplate::new(en, "{proposal_a} {proposal_b} {sex").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = PromptTemplate::default_for(PromptLanguage::English);
        let b = PromptTemplate::default_for(PromptLanguage::BrazilianPortuguese);
        assert_eq!(a.content_hash(), a.clone().content_hash());
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }
}
