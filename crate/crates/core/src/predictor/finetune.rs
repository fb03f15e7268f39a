//! Fine-tuning data export.
//!
//! Every elicited choice becomes two records: the original display order and
//! the reversed one, whose label is flipped so both encode the same
//! preference. The training file is chat-record lines (one JSON object per
//! line with `user` and `assistant` messages). A companion index table keeps
//! participant, pair and order for each line, and a sidecar holds the
//! hyperparameters of the target model family.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::backend::PredictionQuery;
use super::prompt::{build_prompt, PromptTemplate};
use super::PredictError;
use crate::model::{Choice, ParticipantId, PreferenceDataset, ProposalId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordOrder {
    Original,
    Reversed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FineTuneRecord {
    pub prompt: String,
    pub label: Choice,
    pub participant: ParticipantId,
    /// Proposal displayed as A in this record.
    pub first: ProposalId,
    pub second: ProposalId,
    pub order: RecordOrder,
}

impl FineTuneRecord {
    pub fn preferred(&self) -> ProposalId {
        match self.label {
            Choice::A => self.first,
            Choice::B => self.second,
        }
    }
}

/// Two records per choice, in dataset order, original before reversed.
pub fn export_finetune_dataset(
    train: &PreferenceDataset,
    template: &PromptTemplate,
) -> Result<Vec<FineTuneRecord>, PredictError> {
    let mut out = Vec::with_capacity(2 * train.choices().len());
    for c in train.choices() {
        let participant = train
            .participant(&c.participant)
            .expect("dataset references are validated");
        let first = train.proposal(c.first).expect("validated").clone();
        let second = train.proposal(c.second).expect("validated").clone();
        let query = PredictionQuery::new(
            Some(participant.id.clone()),
            participant.demographics.clone(),
            first,
            second,
        )?;
        out.push(FineTuneRecord {
            prompt: build_prompt(&query, template)?,
            label: c.chosen,
            participant: c.participant.clone(),
            first: c.first,
            second: c.second,
            order: RecordOrder::Original,
        });
        out.push(FineTuneRecord {
            prompt: build_prompt(&query.swapped(), template)?,
            label: c.chosen.flipped(),
            participant: c.participant.clone(),
            first: c.second,
            second: c.first,
            order: RecordOrder::Reversed,
        });
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct ChatMessage {
    role: String,
    content: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChatRecord {
    messages: Vec<ChatMessage>,
}

/// Chat-record lines; `system` adds a leading system message to each line.
pub fn to_chat_lines(records: &[FineTuneRecord], system: Option<&str>) -> String {
    let mut out = String::new();
    for r in records {
        let mut messages = Vec::with_capacity(3);
        if let Some(s) = system {
            messages.push(ChatMessage {
                role: "system".into(),
                content: s.to_owned(),
            });
        }
        messages.push(ChatMessage {
            role: "user".into(),
            content: r.prompt.clone(),
        });
        messages.push(ChatMessage {
            role: "assistant".into(),
            content: r.label.to_string(),
        });
        let line =
            serde_json::to_string(&ChatRecord { messages }).expect("plain strings serialize");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// `participant_id,proposal_a,proposal_b,order,label`, one row per record.
pub fn to_index_table(records: &[FineTuneRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "participant_id",
        "proposal_a",
        "proposal_b",
        "order",
        "label",
    ])
    .expect("in-memory write");
    for r in records {
        let order = match r.order {
            RecordOrder::Original => "original",
            RecordOrder::Reversed => "reversed",
        };
        w.write_record([
            r.participant.as_str(),
            &r.first.0.to_string(),
            &r.second.0.to_string(),
            order,
            r.label.as_str(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn malformed(msg: impl Into<String>) -> PredictError {
    PredictError::MalformedExport(msg.into())
}

fn parse_label(raw: &str) -> Result<Choice, PredictError> {
    match raw {
        "A" => Ok(Choice::A),
        "B" => Ok(Choice::B),
        other => Err(malformed(format!("label {other:?} is not A or B"))),
    }
}

/// Reads a training file and its index table back into records.
pub fn parse_finetune_export(
    chat_lines: &str,
    index: &str,
) -> Result<Vec<FineTuneRecord>, PredictError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(index.as_bytes());
    let rows: Vec<csv::StringRecord> = reader
        .records()
        .collect::<Result<_, _>>()
        .map_err(|e| malformed(e.to_string()))?;
    let lines: Vec<&str> = chat_lines
        .lines()
        .filter(|l| !l.trim().is_empty())
        .collect();
    if lines.len() != rows.len() {
        return Err(malformed(format!(
            "{} training lines but {} index rows",
            lines.len(),
            rows.len()
        )));
    }
    let mut out = Vec::with_capacity(rows.len());
    for (n, (line, row)) in lines.iter().zip(&rows).enumerate() {
        let chat: ChatRecord =
            serde_json::from_str(line).map_err(|e| malformed(format!("line {}: {e}", n + 1)))?;
        let user = chat
            .messages
            .iter()
            .find(|m| m.role == "user")
            .ok_or_else(|| malformed(format!("line {}: no user message", n + 1)))?;
        let assistant = chat
            .messages
            .iter()
            .find(|m| m.role == "assistant")
            .ok_or_else(|| malformed(format!("line {}: no assistant message", n + 1)))?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let id = |i: usize| {
            field(i)
                .parse::<u32>()
                .map(ProposalId)
                .map_err(|_| malformed(format!("index row {}: bad proposal id", n + 1)))
        };
        let label = parse_label(field(4))?;
        if parse_label(&assistant.content)? != label {
            return Err(malformed(format!(
                "line {}: label disagrees with index",
                n + 1
            )));
        }
        let order = match field(3) {
            "original" => RecordOrder::Original,
            "reversed" => RecordOrder::Reversed,
            other => return Err(malformed(format!("unknown order {other:?}"))),
        };
        out.push(FineTuneRecord {
            prompt: user.content.clone(),
            label,
            participant: ParticipantId::new(field(0)),
            first: id(1)?,
            second: id(2)?,
            order,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum HyperValue {
    Int(i64),
    Float(&'static str),
    Text(&'static str),
}

impl std::fmt::Display for HyperValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HyperValue::Int(v) => write!(f, "{v}"),
            // kept as written so values are reproduced verbatim
            HyperValue::Float(v) => f.write_str(v),
            HyperValue::Text(v) => write!(f, "\"{v}\""),
        }
    }
}

/// Fine-tuning settings for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneProfile {
    pub name: &'static str,
    pub family: &'static str,
    pub base_model: &'static str,
    pub hyperparameters: Vec<(&'static str, HyperValue)>,
}

pub const FINETUNE_BACKENDS: [&str; 4] = ["gpt-3.5-turbo", "llama-2-7b", "falcon-7b", "mistral-7b"];

fn adapter(
    name: &'static str,
    base_model: &'static str,
    epochs: i64,
    scheduler: &'static str,
    max_steps: i64,
) -> FineTuneProfile {
    use HyperValue::*;
    FineTuneProfile {
        name,
        family: "adapter",
        base_model,
        hyperparameters: vec![
            ("r", Int(64)),
            ("alpha", Int(16)),
            ("dropout", Float("0.1")),
            ("epochs", Int(epochs)),
            ("learning_rate", Float("0.0002")),
            ("weight_decay", Float("0.001")),
            ("max_grad_norm", Float("0.3")),
            ("warmup_ratio", Float("0.03")),
            ("lr_scheduler", Text(scheduler)),
            ("max_steps", Int(max_steps)),
            ("precision", Text("fp16")),
        ],
    }
}

pub fn finetune_profile(name: &str) -> Result<FineTuneProfile, PredictError> {
    match name {
        "gpt-3.5-turbo" => Ok(FineTuneProfile {
            name: "gpt-3.5-turbo",
            family: "hosted-chat",
            base_model: "gpt-3.5-turbo",
            hyperparameters: vec![("epochs", HyperValue::Int(3))],
        }),
        "llama-2-7b" => Ok(adapter(
            "llama-2-7b",
            "NousResearch/Llama-2-7b-chat-hf",
            3,
            "cosine",
            3000,
        )),
        "falcon-7b" => Ok(adapter(
            "falcon-7b",
            "vilsonrodrigues/falcon-7b-instruct-sharded",
            3,
            "cosine",
            3000,
        )),
        "mistral-7b" => Ok(adapter(
            "mistral-7b",
            "mistralai/Mistral-7B-Instruct-v0.2",
            2,
            "constant",
            8250,
        )),
        other => Err(PredictError::UnknownBackend(other.to_owned())),
    }
}

impl FineTuneProfile {
    pub fn sidecar(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "backend = \"{}\"", self.name);
        let _ = writeln!(s, "family = \"{}\"", self.family);
        let _ = writeln!(s, "base_model = \"{}\"", self.base_model);
        let _ = writeln!(s, "temperature = 0");
        for (k, v) in &self.hyperparameters {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Contents of the files handed to an external fine-tuning job.
#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneJobFiles {
    pub profile: FineTuneProfile,
    pub training: String,
    pub index: String,
    pub hyperparameters: String,
}

pub fn emit_finetune_job_spec(
    backend_name: &str,
    records: &[FineTuneRecord],
    system: Option<&str>,
) -> Result<FinetuneJobFiles, PredictError> {
    let profile = finetune_profile(backend_name)?;
    Ok(FinetuneJobFiles {
        training: to_chat_lines(records, system),
        index: to_index_table(records),
        hyperparameters: profile.sidecar(),
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Demographics, PairwiseChoice, Participant, Proposal};
    use crate::predictor::PromptLanguage;

    fn one_choice() -> PreferenceDataset {
        PreferenceDataset::new(
            vec![Proposal::new(1, "One", None), Proposal::new(2, "Two", None)],
            vec![Participant {
                id: ParticipantId::new("x"),
                demographics: Demographics::default(),
            }],
            vec![PairwiseChoice::new(
                ParticipantId::new("x"),
                1,
                2,
                Choice::A,
            )],
        )
        .unwrap()
    }

    #[test]
    fn one_choice_two_records() {
        let t = PromptTemplate::default_for(PromptLanguage::English);
        let r = export_finetune_dataset(&one_choice(), &t).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].label, Choice::A);
        assert_eq!(r[1].label, Choice::B);
        assert_eq!(r[0].preferred(), r[1].preferred());
        assert_eq!(r[1].order, RecordOrder::Reversed);
        assert!(r[1].prompt.contains("A: Two"));
    }

    #[test]
    fn chat_lines_shape() {
        let t = PromptTemplate::default_for(PromptLanguage::English);
        let r = export_finetune_dataset(&one_choice(), &t).unwrap();
        let text = to_chat_lines(&r, None);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        let msgs = first["messages"].as_array().unwrap();
        assert_eq!(msgs.len(), 2);
        assert_eq!(msgs[0]["role"], "user");
        assert_eq!(msgs[1]["role"], "assistant");
        assert_eq!(msgs[1]["content"], "A");
        let with_system = to_chat_lines(&r, Some("You predict survey answers."));
        assert!(with_system.starts_with("{\"messages\":[{\"role\":\"system\""));
        assert_eq!(
            parse_finetune_export(&with_system, &to_index_table(&r)).unwrap(),
            r
        );
    }

    #[test]
    fn sidecars_reproduce_settings() {
        let hosted = finetune_profile("gpt-3.5-turbo").unwrap().sidecar();
        assert!(hosted.contains("epochs = 3\n"));
        let llama = finetune_profile("llama-2-7b").unwrap().sidecar();
        for line in [
            "r = 64\n",
            "alpha = 16\n",
            "dropout = 0.1\n",
            "epochs = 3\n",
            "learning_rate = 0.0002\n",
        ] {
            assert!(llama.contains(line), "{line:?} missing from\n{llama}");
        }
        let mistral = finetune_profile("mistral-7b").unwrap().sidecar();
        assert!(mistral.contains("epochs = 2\n") && mistral.contains("max_steps = 8250\n"));
        assert_eq!(
            finetune_profile("bert").unwrap_err(),
            PredictError::UnknownBackend("bert".into())
        );
    }

    #[test]
    fn empty_export_is_valid() {
        let files = emit_finetune_job_spec("falcon-7b", &[], None).unwrap();
        assert_eq!(files.training, "");
        assert!(parse_finetune_export(&files.training, &files.index)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn parse_rejects_mismatch() {
        let t = PromptTemplate::default_for(PromptLanguage::English);
        let r = export_finetune_dataset(&one_choice(), &t).unwrap();
        let chat = to_chat_lines(&r, None);
        let index = to_index_table(&r).replace(",original,A", ",original,B");
        assert!(parse_finetune_export(&chat, &index).is_err());
        assert!(parse_finetune_export(chat.lines().next().unwrap(), &to_index_table(&r)).is_err());
    }
}
