use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};
use serde::{Deserialize, Serialize};

use super::labels;
use super::{DataError, DatasetManifest};
use crate::model::{
    Choice, Demographics, PairwiseChoice, Participant, ParticipantId, PreferenceDataset, Proposal,
};

/// Column names of the input tables. The defaults are the canonical layout;
/// other exports can be read by renaming columns here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub proposal_id: String,
    pub proposal_text: String,
    pub proposal_candidate: String,
    pub participant_id: String,
    pub proposal_a: String,
    pub proposal_b: String,
    pub chosen: String,
    pub age_band: String,
    pub ideology: String,
    pub zone: String,
    pub education: String,
    pub sex: String,
    pub city: String,
    pub state: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            proposal_id: "id".into(),
            proposal_text: "text".into(),
            proposal_candidate: "candidate".into(),
            participant_id: "participant_id".into(),
            proposal_a: "proposal_a".into(),
            proposal_b: "proposal_b".into(),
            chosen: "chosen".into(),
            age_band: "age_band".into(),
            ideology: "ideology".into(),
            zone: "zone".into(),
            education: "education".into(),
            sex: "sex".into(),
            city: "city".into(),
            state: "state".into(),
        }
    }
}

struct Table<R: Read> {
    name: &'static str,
    reader: csv::Reader<R>,
    columns: HashMap<String, usize>,
}

impl<R: Read> Table<R> {
    fn open(name: &'static str, source: R) -> Result<Self, DataError> {
        let mut reader = ReaderBuilder::new()
            .trim(Trim::All)
            .has_headers(true)
            .comment(Some(b'#'))
            .from_reader(source);
        let headers = reader.headers().map_err(|e| csv_error(name, e))?.clone();
        let columns = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim_start_matches('\u{feff}').to_owned(), i))
            .collect();
        Ok(Self {
            name,
            reader,
            columns,
        })
    }

    fn is_empty_header(&self) -> bool {
        self.columns.is_empty() || (self.columns.len() == 1 && self.columns.contains_key(""))
    }

    fn column(&self, name: &str) -> Result<usize, DataError> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| DataError::Parse {
                table: self.name,
                row: 1,
                message: format!("missing column {name:?}"),
            })
    }

    fn optional_column(&self, name: &str) -> Option<usize> {
        self.columns.get(name).copied()
    }

    fn rows(&mut self) -> impl Iterator<Item = Result<(u64, StringRecord), DataError>> + '_ {
        let name = self.name;
        self.reader.records().map(move |r| {
            let record = r.map_err(|e| csv_error(name, e))?;
            let row = record.position().map_or(0, |p| p.line());
            Ok((row, record))
        })
    }
}

fn csv_error(table: &'static str, e: csv::Error) -> DataError {
    let row = e.position().map_or(0, |p| p.line());
    DataError::Parse {
        table,
        row,
        message: e.to_string(),
    }
}

fn cell(record: &StringRecord, index: usize) -> &str {
    record.get(index).unwrap_or("")
}

fn parse_id(table: &'static str, row: u64, column: &str, raw: &str) -> Result<u32, DataError> {
    raw.parse::<u32>().map_err(|_| DataError::Parse {
        table,
        row,
        message: format!("{column} {raw:?} is not a proposal id"),
    })
}

/// Reads a proposals table (`id,text,candidate`). An empty source yields no
/// proposals.
pub fn load_proposals<R: Read>(source: R) -> Result<Vec<Proposal>, DataError> {
    load_proposals_with(source, &ColumnMapping::default())
}

pub fn load_proposals_with<R: Read>(
    source: R,
    columns: &ColumnMapping,
) -> Result<Vec<Proposal>, DataError> {
    let mut table = Table::open("proposals", source)?;
    if table.is_empty_header() {
        return Ok(Vec::new());
    }
    let id_col = table.column(&columns.proposal_id)?;
    let text_col = table.column(&columns.proposal_text)?;
    let tag_col = table.optional_column(&columns.proposal_candidate);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in table.rows() {
        let (row, record) = row?;
        let id = parse_id("proposals", row, "id", cell(&record, id_col))?;
        let text = cell(&record, text_col);
        if text.is_empty() {
            return Err(DataError::Parse {
                table: "proposals",
                row,
                message: "empty proposal text".into(),
            });
        }
        if !seen.insert(id) {
            return Err(DataError::DuplicateId { row, id });
        }
        let tag = tag_col.map(|c| cell(&record, c)).filter(|t| !t.is_empty());
        out.push(Proposal::new(id, text, tag));
    }
    Ok(out)
}

fn load_demographics<R: Read>(
    source: R,
    columns: &ColumnMapping,
) -> Result<Vec<Participant>, DataError> {
    let mut table = Table::open("demographics", source)?;
    if table.is_empty_header() {
        return Ok(Vec::new());
    }
    let id_col = table.column(&columns.participant_id)?;
    let age = table.optional_column(&columns.age_band);
    let ideology = table.optional_column(&columns.ideology);
    let zone = table.optional_column(&columns.zone);
    let education = table.optional_column(&columns.education);
    let sex = table.optional_column(&columns.sex);
    let city = table.optional_column(&columns.city);
    let state = table.optional_column(&columns.state);

    fn field<T>(
        record: &StringRecord,
        row: u64,
        col: Option<usize>,
        column: &'static str,
        parse: fn(&str) -> Option<T>,
    ) -> Result<Option<T>, DataError> {
        let Some(c) = col else { return Ok(None) };
        let raw = cell(record, c);
        if raw.is_empty() {
            return Ok(None);
        }
        parse(raw)
            .map(Some)
            .ok_or_else(|| DataError::MalformedDemographic {
                row,
                column,
                value: raw.to_owned(),
            })
    }

    let text = |record: &StringRecord, col: Option<usize>| {
        col.map(|c| cell(record, c))
            .filter(|v| !v.is_empty())
            .map(str::to_owned)
    };

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in table.rows() {
        let (row, record) = row?;
        let id = cell(&record, id_col);
        if id.is_empty() {
            return Err(DataError::Parse {
                table: "demographics",
                row,
                message: "empty participant id".into(),
            });
        }
        if !seen.insert(id.to_owned()) {
            return Err(DataError::Parse {
                table: "demographics",
                row,
                message: format!("duplicate participant id {id:?}"),
            });
        }
        let demographics = Demographics {
            age_band: field(&record, row, age, "age_band", labels::parse_age_band)?,
            ideology: field(&record, row, ideology, "ideology", labels::parse_ideology)?,
            zone: field(&record, row, zone, "zone", labels::parse_zone)?,
            education: field(
                &record,
                row,
                education,
                "education",
                labels::parse_education,
            )?,
            sex: field(&record, row, sex, "sex", labels::parse_sex)?,
            city: text(&record, city),
            state: text(&record, state),
        };
        out.push(Participant {
            id: ParticipantId::new(id),
            demographics,
        });
    }
    Ok(out)
}

fn load_choices<R: Read>(
    source: R,
    columns: &ColumnMapping,
    proposals: &HashSet<u32>,
    participants: &HashSet<&str>,
) -> Result<Vec<PairwiseChoice>, DataError> {
    let mut table = Table::open("choices", source)?;
    if table.is_empty_header() {
        return Ok(Vec::new());
    }
    let who = table.column(&columns.participant_id)?;
    let a_col = table.column(&columns.proposal_a)?;
    let b_col = table.column(&columns.proposal_b)?;
    let chosen_col = table.column(&columns.chosen)?;
    let mut out = Vec::new();
    for row in table.rows() {
        let (row, record) = row?;
        let participant = cell(&record, who);
        let a = parse_id("choices", row, "proposal_a", cell(&record, a_col))?;
        let b = parse_id("choices", row, "proposal_b", cell(&record, b_col))?;
        let chosen = match cell(&record, chosen_col) {
            "A" => Choice::A,
            "B" => Choice::B,
            other => {
                return Err(DataError::Parse {
                    table: "choices",
                    row,
                    message: format!("chosen must be A or B, found {other:?}"),
                })
            }
        };
        if a == b {
            return Err(DataError::Parse {
                table: "choices",
                row,
                message: format!("proposal {a} paired with itself"),
            });
        }
        for id in [a, b] {
            if !proposals.contains(&id) {
                return Err(DataError::UnknownProposal {
                    table: "choices",
                    row,
                    id,
                });
            }
        }
        if !participants.contains(participant) {
            return Err(DataError::UnknownParticipant {
                table: "choices",
                row,
                id: participant.to_owned(),
            });
        }
        out.push(PairwiseChoice::new(
            ParticipantId::new(participant),
            a,
            b,
            chosen,
        ));
    }
    Ok(out)
}

/// Links proposals, choices and demographics into a validated dataset.
/// Every participant must appear in the demographics table (with possibly
/// all fields empty).
pub fn load_dataset<C: Read, D: Read>(
    proposals: Vec<Proposal>,
    choices: C,
    demographics: D,
) -> Result<(PreferenceDataset, DatasetManifest), DataError> {
    load_dataset_with(proposals, choices, demographics, &ColumnMapping::default())
}

pub fn load_dataset_with<C: Read, D: Read>(
    proposals: Vec<Proposal>,
    choices: C,
    demographics: D,
    columns: &ColumnMapping,
) -> Result<(PreferenceDataset, DatasetManifest), DataError> {
    let participants = load_demographics(demographics, columns)?;
    let proposal_ids: HashSet<u32> = proposals.iter().map(|p| p.id.0).collect();
    let participant_ids: HashSet<&str> = participants.iter().map(|p| p.id.as_str()).collect();
    let choices = load_choices(choices, columns, &proposal_ids, &participant_ids)?;
    let dataset = PreferenceDataset::new(proposals, participants, choices)?;
    let manifest = DatasetManifest::from_dataset(&dataset);
    Ok((dataset, manifest))
}

fn writer<W: Write>(sink: W) -> csv::Writer<W> {
    WriterBuilder::new().from_writer(sink)
}

fn io(e: csv::Error) -> DataError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => DataError::Io(e),
        other => DataError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn write_proposals<W: Write>(proposals: &[Proposal], sink: W) -> Result<(), DataError> {
    let mut w = writer(sink);
    w.write_record(["id", "text", "candidate"]).map_err(io)?;
    for p in proposals {
        w.write_record([
            p.id.0.to_string().as_str(),
            p.text.as_str(),
            p.candidate_tag.as_deref().unwrap_or(""),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_choices<W: Write>(choices: &[PairwiseChoice], sink: W) -> Result<(), DataError> {
    let mut w = writer(sink);
    w.write_record(["participant_id", "proposal_a", "proposal_b", "chosen"])
        .map_err(io)?;
    for c in choices {
        w.write_record([
            c.participant.as_str(),
            &c.first.0.to_string(),
            &c.second.0.to_string(),
            c.chosen.as_str(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_demographics<W: Write>(
    participants: &[Participant],
    sink: W,
) -> Result<(), DataError> {
    let mut w = writer(sink);
    w.write_record([
        "participant_id",
        "age_band",
        "ideology",
        "zone",
        "education",
        "sex",
        "city",
        "state",
    ])
    .map_err(io)?;
    for p in participants {
        let d = &p.demographics;
        w.write_record([
            p.id.as_str(),
            d.age_band.map_or("", |v| v.label()),
            d.ideology.map_or("", |v| v.label()),
            d.zone.map_or("", |v| v.label()),
            d.education.map_or("", |v| v.label()),
            d.sex.map_or("", |v| v.label()),
            d.city.as_deref().unwrap_or(""),
            d.state.as_deref().unwrap_or(""),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
