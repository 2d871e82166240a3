//! Evaluation sentences, benchmark items and corpus generation.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{DatasetError, ParseError, ScoreError};
use crate::gateway::backend::Backend;
use crate::gateway::json::json_arrays;
use crate::gateway::prompts::{GenerationKind, PromptTemplates, GENERATION_TARGET_COUNT};
use crate::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    CultureSpecific,
    General,
}

impl Label {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "culture-specific" => Some(Self::CultureSpecific),
            "general" => Some(Self::General),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::CultureSpecific => "culture-specific",
            Self::General => "general",
        }
    }
}

impl From<GenerationKind> for Label {
    fn from(kind: GenerationKind) -> Self {
        match kind {
            GenerationKind::General => Label::General,
            GenerationKind::Cultural => Label::CultureSpecific,
        }
    }
}

/// Where a generated record came from. Generated corpora are never reviewed by this tool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator_model: String,
    pub prompt_sha256: String,
    pub generated_at: String,
    pub reviewed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub id: String,
    pub text: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// Non-fatal findings while loading or generating.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "warning", rename_all = "kebab-case")]
pub enum DatasetWarning {
    DuplicateText { line: usize, first_line: usize },
    Dropped { index: usize, reason: String },
    ShortOutput { requested: usize, received: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub warnings: Vec<DatasetWarning>,
}

#[derive(Deserialize)]
struct RawLabeled {
    #[serde(default)]
    id: Option<Value>,
    text: String,
    label: String,
    #[serde(default)]
    provenance: Option<Provenance>,
}

/// Reads a JSON-lines file of `{id?, text, label}`.
///
/// Missing ids become the 1-based line number. Repeated texts are reported as warnings.
pub fn load_labeled_sentences(path: &Path) -> Result<Loaded<LabeledSentence>, DatasetError> {
    read_labeled_sentences(BufReader::new(File::open(path)?))
}

pub fn read_labeled_sentences(reader: impl BufRead) -> Result<Loaded<LabeledSentence>, DatasetError> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut ids = HashSet::new();
    let mut texts: HashMap<String, usize> = HashMap::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawLabeled = serde_json::from_str(&line).map_err(|e| DatasetError::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        let label = Label::parse(&raw.label).ok_or_else(|| DatasetError::UnknownLabel {
            line: line_no,
            label: raw.label.clone(),
        })?;
        if raw.text.trim().is_empty() {
            return Err(DatasetError::MalformedLine {
                line: line_no,
                message: "text is empty".into(),
            });
        }
        let id = id_or_line(raw.id, line_no)?;
        if !ids.insert(id.clone()) {
            return Err(DatasetError::DuplicateId { line: line_no, id });
        }
        match texts.get(&raw.text) {
            Some(&first_line) => {
                tracing::warn!(line = line_no, first_line, "duplicate sentence text");
                warnings.push(DatasetWarning::DuplicateText {
                    line: line_no,
                    first_line,
                });
            }
            None => {
                texts.insert(raw.text.clone(), line_no);
            }
        }
        records.push(LabeledSentence {
            id,
            text: raw.text,
            label,
            provenance: raw.provenance,
        });
    }
    Ok(Loaded { records, warnings })
}

fn id_or_line(id: Option<Value>, line: usize) -> Result<String, DatasetError> {
    match id {
        None | Some(Value::Null) => Ok(line.to_string()),
        Some(Value::String(s)) if !s.is_empty() => Ok(s),
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(other) => Err(DatasetError::MalformedLine {
            line,
            message: format!("id must be a non-empty string or number, got {other}"),
        }),
    }
}

/// Writes records as JSON lines.
pub fn write_jsonl<T: Serialize>(out: &mut impl Write, records: &[T]) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut *out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    pub id: String,
    pub question: String,
    pub choices: Vec<String>,
    pub gold_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoralLabel {
    Acceptable,
    Unacceptable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoralItem {
    pub id: String,
    pub sentence: String,
    pub gold_label: MoralLabel,
}

/// Field names of a multiple-choice dataset. Defaults follow the JGLUE
/// JCommonsenseQA release (`q_id`, `question`, `choice0`..`choice4`, `label`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McqFields {
    pub id: String,
    pub question: String,
    /// Individual choice fields, in order. Ignored when `choices_array` is set.
    pub choices: Vec<String>,
    /// A single field holding all choices as an array.
    pub choices_array: Option<String>,
    pub gold: String,
}

impl Default for McqFields {
    fn default() -> Self {
        Self {
            id: "q_id".into(),
            question: "question".into(),
            choices: (0..5).map(|i| format!("choice{i}")).collect(),
            choices_array: None,
            gold: "label".into(),
        }
    }
}

/// Field names and label values of a moral-judgment dataset.
///
/// Label values are compared as JSON values, so `1` and `"1"` are distinct
/// unless both are listed. By default `0` means acceptable and `1` wrong.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoralFields {
    pub id: String,
    pub sentence: String,
    pub label: String,
    pub acceptable_values: Vec<Value>,
    pub unacceptable_values: Vec<Value>,
}

impl Default for MoralFields {
    fn default() -> Self {
        Self {
            id: "id".into(),
            sentence: "sentence".into(),
            label: "label".into(),
            acceptable_values: vec![Value::from(0), Value::from("0"), Value::from("acceptable")],
            unacceptable_values: vec![
                Value::from(1),
                Value::from("1"),
                Value::from("unacceptable"),
            ],
        }
    }
}

/// JSON objects paired with their 1-based line (or array position).
type NumberedObjects = Vec<(usize, Map<String, Value>)>;

fn read_objects(path: &Path) -> Result<NumberedObjects, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    let trimmed = text.trim_start();
    // Whole-file JSON array, or JSON lines.
    if trimmed.starts_with('[') {
        let values: Vec<Value> = serde_json::from_str(trimmed).map_err(|e| DatasetError::MalformedLine {
            line: e.line(),
            message: e.to_string(),
        })?;
        return values
            .into_iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::Object(m) => Ok((i + 1, m)),
                other => Err(DatasetError::MalformedLine {
                    line: i + 1,
                    message: format!("expected an object, got {other}"),
                }),
            })
            .collect();
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Value>(line) {
            Ok(Value::Object(m)) => out.push((i + 1, m)),
            Ok(other) => {
                return Err(DatasetError::MalformedLine {
                    line: i + 1,
                    message: format!("expected an object, got {other}"),
                })
            }
            Err(e) => {
                return Err(DatasetError::MalformedLine {
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

fn text_field(obj: &Map<String, Value>, field: &str, line: usize) -> Result<String, DatasetError> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(other) => Err(DatasetError::MalformedLine {
            line,
            message: format!("field {field:?} is not text: {other}"),
        }),
        None => Err(DatasetError::MalformedLine {
            line,
            message: format!("missing field {field:?}"),
        }),
    }
}

pub fn load_mcq_items(path: &Path, fields: &McqFields) -> Result<Vec<McqItem>, DatasetError> {
    let mut items = Vec::new();
    let mut ids = HashSet::new();
    for (line, obj) in read_objects(path)? {
        let id = id_or_line(obj.get(&fields.id).cloned(), line)?;
        let question = text_field(&obj, &fields.question, line)?;
        let choices = match &fields.choices_array {
            Some(f) => match obj.get(f) {
                Some(Value::Array(a)) => a
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => Ok(s.clone()),
                        other => Err(DatasetError::MalformedLine {
                            line,
                            message: format!("choice is not text: {other}"),
                        }),
                    })
                    .collect::<Result<Vec<_>, _>>()?,
                _ => {
                    return Err(DatasetError::MalformedLine {
                        line,
                        message: format!("field {f:?} is not an array"),
                    })
                }
            },
            None => fields
                .choices
                .iter()
                .map(|f| text_field(&obj, f, line))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let gold_index = match obj.get(&fields.gold) {
            Some(Value::Number(n)) => n.as_u64().map(|n| n as usize),
            Some(Value::String(s)) => s.trim().parse().ok(),
            _ => None,
        }
        .filter(|&g| g < choices.len())
        .ok_or_else(|| DatasetError::MalformedLine {
            line,
            message: format!("field {:?} is not a valid choice index", fields.gold),
        })?;
        if !ids.insert(id.clone()) {
            return Err(DatasetError::DuplicateId { line, id });
        }
        items.push(McqItem {
            id,
            question,
            choices,
            gold_index,
        });
    }
    Ok(items)
}

pub fn load_moral_items(path: &Path, fields: &MoralFields) -> Result<Vec<MoralItem>, DatasetError> {
    let mut items = Vec::new();
    let mut ids = HashSet::new();
    for (line, obj) in read_objects(path)? {
        let id = id_or_line(obj.get(&fields.id).cloned(), line)?;
        let sentence = text_field(&obj, &fields.sentence, line)?;
        if sentence.trim().is_empty() {
            return Err(DatasetError::MalformedLine {
                line,
                message: "sentence is empty".into(),
            });
        }
        let raw_label = obj.get(&fields.label).cloned().unwrap_or(Value::Null);
        let gold_label = if fields.acceptable_values.contains(&raw_label) {
            MoralLabel::Acceptable
        } else if fields.unacceptable_values.contains(&raw_label) {
            MoralLabel::Unacceptable
        } else {
            return Err(DatasetError::UnknownLabel {
                line,
                label: raw_label.to_string(),
            });
        };
        if !ids.insert(id.clone()) {
            return Err(DatasetError::DuplicateId { line, id });
        }
        items.push(MoralItem {
            id,
            sentence,
            gold_label,
        });
    }
    Ok(items)
}

pub const JCQA_SEPARATOR: &str = " ";

/// Scoring input for a multiple-choice item: question, one space, gold choice.
pub fn build_jcqa_input(item: &McqItem) -> String {
    format!(
        "{}{}{}",
        item.question, JCQA_SEPARATOR, item.choices[item.gold_index]
    )
}

/// How a moral-judgment gold label is verbalized inside the scoring input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JcmLabelText {
    pub acceptable: String,
    pub unacceptable: String,
}

impl Default for JcmLabelText {
    fn default() -> Self {
        Self {
            acceptable: "judgment: acceptable".into(),
            unacceptable: "judgment: unacceptable".into(),
        }
    }
}

impl JcmLabelText {
    pub fn validate(&self) -> Result<(), DatasetError> {
        for (name, text) in [("acceptable", &self.acceptable), ("unacceptable", &self.unacceptable)] {
            if text.trim().is_empty() {
                return Err(DatasetError::Config(format!("label text for {name} is empty")));
            }
        }
        Ok(())
    }

    pub fn get(&self, label: MoralLabel) -> &str {
        match label {
            MoralLabel::Acceptable => &self.acceptable,
            MoralLabel::Unacceptable => &self.unacceptable,
        }
    }
}

/// Scoring input for a moral item: `"<sentence> (<label text>)"`.
pub fn build_jcm_input(item: &MoralItem, labels: &JcmLabelText) -> String {
    format!("{} ({})", item.sentence, labels.get(item.gold_label))
}

/// Asks the backend for a corpus of `kind` sentences and labels what comes back.
///
/// The requested count is not enforced; a shortfall is reported as a warning and
/// unusable elements are dropped with a reason.
pub fn generate_corpus(
    kind: GenerationKind,
    backend: &dyn Backend,
    templates: &PromptTemplates,
    model_id: &str,
) -> Result<Loaded<LabeledSentence>, ScoreError> {
    let prompt = templates.render_generation(kind);
    let raw = backend.complete(&prompt, 1)?;
    let (texts, warnings) = parse_corpus_response(&raw.text).map_err(|source| ScoreError::Parse {
        run_index: 1,
        attempts: 1,
        source,
    })?;
    let generated_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let mut loaded = corpus_from_texts(kind, &prompt, texts, model_id, generated_at);
    loaded.warnings.splice(0..0, warnings);
    Ok(loaded)
}

/// Labels generated sentences and attaches provenance.
pub fn corpus_from_texts(
    kind: GenerationKind,
    prompt: &str,
    texts: Vec<String>,
    model_id: &str,
    generated_at: String,
) -> Loaded<LabeledSentence> {
    let mut warnings = Vec::new();
    let provenance = Provenance {
        generator_model: model_id.to_owned(),
        prompt_sha256: sha256_hex(prompt.as_bytes()),
        generated_at,
        reviewed: false,
    };
    let prefix = match kind {
        GenerationKind::General => "gen-general",
        GenerationKind::Cultural => "gen-cultural",
    };
    let records: Vec<LabeledSentence> = texts
        .into_iter()
        .enumerate()
        .map(|(i, text)| LabeledSentence {
            id: format!("{prefix}-{:04}", i + 1),
            text,
            label: kind.into(),
            provenance: Some(provenance.clone()),
        })
        .collect();

    if records.len() < GENERATION_TARGET_COUNT {
        tracing::warn!(received = records.len(), "generated fewer sentences than requested");
        warnings.push(DatasetWarning::ShortOutput {
            requested: GENERATION_TARGET_COUNT,
            received: records.len(),
        });
    }
    Loaded { records, warnings }
}

/// Pulls `[{"text": ...}, ...]` out of model output.
pub fn parse_corpus_response(text: &str) -> Result<(Vec<String>, Vec<DatasetWarning>), ParseError> {
    let mut saw_array = false;
    let array = json_arrays(text)
        .find(|v| {
            saw_array = true;
            v.as_array()
                .is_some_and(|a| a.iter().any(|e| e.get("text").is_some()))
        })
        .ok_or(if saw_array {
            ParseError::SchemaMismatch("no array of {\"text\": ...} objects".into())
        } else {
            ParseError::NoJsonFound
        })?;

    let mut texts = Vec::new();
    let mut warnings = Vec::new();
    for (index, element) in array.as_array().expect("checked above").iter().enumerate() {
        match element.get("text").and_then(Value::as_str).map(str::trim) {
            Some(t) if !t.is_empty() => texts.push(t.to_owned()),
            Some(_) => warnings.push(DatasetWarning::Dropped {
                index,
                reason: "empty text".into(),
            }),
            None => warnings.push(DatasetWarning::Dropped {
                index,
                reason: "no string \"text\" field".into(),
            }),
        }
    }
    Ok((texts, warnings))
}
