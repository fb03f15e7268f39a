//! Demographic label parsing. English and Brazilian Portuguese spellings map
//! to the same language-neutral values; matching ignores case, whitespace
//! and punctuation.

use crate::model::{AgeBand, Education, Ideology, Sex, Zone};

fn normalize(raw: &str) -> String {
    raw.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

pub fn parse_age_band(raw: &str) -> Option<AgeBand> {
    match normalize(raw).as_str() {
        "young" | "jovem" => Some(AgeBand::Young),
        "old" | "deterceiraidade" | "terceiraidade" => Some(AgeBand::Old),
        _ => None,
    }
}

pub fn parse_ideology(raw: &str) -> Option<Ideology> {
    match normalize(raw).as_str() {
        "liberal" | "esquerdista" => Some(Ideology::Liberal),
        "centrist" | "centrista" => Some(Ideology::Centrist),
        "conservative" | "conservador" => Some(Ideology::Conservative),
        _ => None,
    }
}

pub fn parse_zone(raw: &str) -> Option<Zone> {
    match normalize(raw).as_str() {
        "urban" | "urbana" | "urbano" => Some(Zone::Urban),
        "rural" => Some(Zone::Rural),
        _ => None,
    }
}

pub fn parse_education(raw: &str) -> Option<Education> {
    match normalize(raw).as_str() {
        "collegeeducated" | "comcursosuperior" => Some(Education::CollegeEducated),
        "noncollegeeducated" | "semcursosuperior" => Some(Education::NonCollegeEducated),
        _ => None,
    }
}

pub fn parse_sex(raw: &str) -> Option<Sex> {
    match normalize(raw).as_str() {
        "male" | "masculino" => Some(Sex::Male),
        "female" | "feminino" => Some(Sex::Female),
        _ => None,
    }
}
