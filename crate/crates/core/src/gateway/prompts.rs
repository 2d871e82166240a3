//! Prompt templates and rendering.
//!
//! Built-in templates are kept byte-for-byte; fixtures and cache keys hash the
//! rendered text, so any edit here invalidates them.

use std::fs;
use std::path::Path;

use crate::cci::CultureSet;
use crate::error::PromptError;

pub const GENERALITY_TEMPLATE: &str = r#"Task:
Rate how COMMON/FAMILIAR the following item is in each country (0.00 = not common, 1.00 = very common). Treat countries independently. Be language-agnostic: interpret the statement regardless of its language.

Statement: {sentence}
Countries: {cultures}

Rules:
- Use general knowledge; avoid stereotypes.
- If similarly common across many countries, use similar (even identical) scores.
- If unsure, use mid values (e.g., 0.50).
- Do NOT normalize across countries.

Output JSON ONLY (no prose):
Schema: {"scores": {"<country>": <float>}}
Constraints: use the country names exactly as provided; floats in [0.00, 1.00], rounded to two decimals."#;

pub const BASELINE_TEMPLATE: &str = r#"Task:
Decide whether the following item is culturally specific to the TARGET country, and output a numeric specificity score only
(0.00 = globally common; 1.00 = unique to the target).

Statement: {sentence}
Target country: {target_culture}

Rules:
- Use general knowledge; avoid stereotypes.
- Be language-agnostic; interpret the statement regardless of its language.
- If unsure, use mid values (e.g., 0.50).

Output JSON ONLY (no prose):
{"score": <float in [0.00,1.00] rounded to two decimals>}"#;

pub const GENERATE_GENERAL_TEMPLATE: &str = r#"You are an assistant for creating a short-sentence corpus.
Strictly satisfy the requirements below.

Goal:
- Collect very ordinary events that could occur in any region of the world.

Output:
- Exactly one natural Japanese sentence, short in length (about 10-20 characters).
- Describe facts plainly without evaluations, impressions, or subjectivity.
- Avoid place names, specific store names, and personal names. Avoid excessive stereotypes.
- Vary expressions, vocabulary, and scenes so that the same sentence endings and the same constructions do not appear consecutively.

Strict requirements:
- The output must be a JSON array. Each element must have the form { "text": "<one sentence>" }.
- The number of items must be exactly 300.
- Do not include any additional explanations, labels, or numbering (do not output any strings other than JSON).

Example (format only):
[
  { "text": "Turn off the alarm in the morning." },
  { "text": "Wait for the train at the station." }
]"#;

pub const GENERATE_CULTURAL_TEMPLATE: &str = r#"You are an assistant for creating a short-sentence corpus.
Strictly satisfy the requirements below.

Goal:
- Broadly collect, in short sentences, Japan-specific customs, daily life culture, annual events, food culture, public manners, etc.

Output:
- Exactly one natural Japanese sentence, short in length (about 10-20 characters).
- Describe events plainly without evaluations or impressions.
- Avoid place names, specific store names, and personal names. Avoid excessive stereotypes.
- Vary expressions, vocabulary, and scenes so that the same sentence endings and the same constructions do not appear consecutively.

Strict requirements:
- The output must be a JSON array. Each element must have the form { "text": "<one sentence>" }.
- The number of items must be exactly 300.
- Do not include any additional explanations, labels, or numbering (do not output any strings other than JSON).

Example (format only):
[
  { "text": "Take off your shoes at the entrance." },
  { "text": "Use the purification basin at a shrine." }
]"#;

/// Extra rule for the baseline prompt when neighboring cultures should not count as specific.
pub const NEIGHBOR_INSTRUCTION: &str = "If the practice is also common in neighboring or culturally adjacent countries, do not consider it specific to the target.";

/// Requested number of generated sentences, as stated in the generation templates.
pub const GENERATION_TARGET_COUNT: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerationKind {
    General,
    Cultural,
}

/// Which template a prompt was rendered from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptKind {
    Generality,
    Baseline,
    GenerateGeneral,
    GenerateCultural,
}

impl PromptKind {
    pub const ALL: [PromptKind; 4] = [
        PromptKind::Generality,
        PromptKind::Baseline,
        PromptKind::GenerateGeneral,
        PromptKind::GenerateCultural,
    ];

    /// File name looked up in a templates directory.
    pub fn file_name(self) -> &'static str {
        match self {
            PromptKind::Generality => "generality.txt",
            PromptKind::Baseline => "baseline.txt",
            PromptKind::GenerateGeneral => "generate_general.txt",
            PromptKind::GenerateCultural => "generate_cultural.txt",
        }
    }
}

/// The four templates in use. Defaults to the built-in English texts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub generality: String,
    pub baseline: String,
    pub generate_general: String,
    pub generate_cultural: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            generality: GENERALITY_TEMPLATE.to_owned(),
            baseline: BASELINE_TEMPLATE.to_owned(),
            generate_general: GENERATE_GENERAL_TEMPLATE.to_owned(),
            generate_cultural: GENERATE_CULTURAL_TEMPLATE.to_owned(),
        }
    }
}

impl PromptTemplates {
    /// Built-in templates, with any of `generality.txt`, `baseline.txt`,
    /// `generate_general.txt`, `generate_cultural.txt` found in `dir` taking
    /// precedence. A single trailing newline in a file is ignored.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut templates = Self::default();
        for kind in PromptKind::ALL {
            let path = dir.join(kind.file_name());
            if !path.exists() {
                continue;
            }
            let mut text = fs::read_to_string(&path).map_err(|e| PromptError::TemplateIo {
                path: path.clone(),
                message: e.to_string(),
            })?;
            if text.ends_with('\n') {
                text.pop();
                if text.ends_with('\r') {
                    text.pop();
                }
            }
            *templates.get_mut(kind) = text;
        }
        Ok(templates)
    }

    pub fn get(&self, kind: PromptKind) -> &str {
        match kind {
            PromptKind::Generality => &self.generality,
            PromptKind::Baseline => &self.baseline,
            PromptKind::GenerateGeneral => &self.generate_general,
            PromptKind::GenerateCultural => &self.generate_cultural,
        }
    }

    fn get_mut(&mut self, kind: PromptKind) -> &mut String {
        match kind {
            PromptKind::Generality => &mut self.generality,
            PromptKind::Baseline => &mut self.baseline,
            PromptKind::GenerateGeneral => &mut self.generate_general,
            PromptKind::GenerateCultural => &mut self.generate_cultural,
        }
    }

    pub fn render_generality(
        &self,
        sentence: &str,
        cultures: &CultureSet,
    ) -> Result<String, PromptError> {
        check_sentence(sentence)?;
        let list = format_culture_list(cultures.cultures());
        Ok(substitute(
            &self.generality,
            &[("sentence", sentence), ("cultures", &list)],
        ))
    }

    pub fn render_baseline(
        &self,
        sentence: &str,
        target: &str,
        neighbor_instruction: bool,
    ) -> Result<String, PromptError> {
        check_sentence(sentence)?;
        let template = if neighbor_instruction {
            insert_rule(&self.baseline, NEIGHBOR_INSTRUCTION)
        } else {
            self.baseline.clone()
        };
        Ok(substitute(
            &template,
            &[("sentence", sentence), ("target_culture", target)],
        ))
    }

    pub fn render_generation(&self, kind: GenerationKind) -> String {
        match kind {
            GenerationKind::General => self.generate_general.clone(),
            GenerationKind::Cultural => self.generate_cultural.clone(),
        }
    }
}

pub fn render_generality_prompt(sentence: &str, cultures: &CultureSet) -> Result<String, PromptError> {
    PromptTemplates::default().render_generality(sentence, cultures)
}

pub fn render_baseline_prompt(
    sentence: &str,
    target: &str,
    neighbor_instruction: bool,
) -> Result<String, PromptError> {
    PromptTemplates::default().render_baseline(sentence, target, neighbor_instruction)
}

pub fn render_generation_prompt(kind: GenerationKind) -> String {
    PromptTemplates::default().render_generation(kind)
}

fn check_sentence(sentence: &str) -> Result<(), PromptError> {
    if sentence.trim().is_empty() {
        Err(PromptError::EmptySentence)
    } else {
        Ok(())
    }
}

/// `["Japan", "United States of America"]`: names JSON-quoted, in set order.
pub fn format_culture_list(cultures: &[String]) -> String {
    let quoted: Vec<String> = cultures
        .iter()
        .map(|c| serde_json::Value::String(c.clone()).to_string())
        .collect();
    format!("[{}]", quoted.join(", "))
}

/// Single left-to-right pass, so substituted values are never rescanned for placeholders.
fn substitute(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 128);
    let mut rest = template;
    'scan: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open + 1..];
        for (name, value) in vars {
            if let Some(after) = tail.strip_prefix(name).and_then(|t| t.strip_prefix('}')) {
                out.push_str(value);
                rest = after;
                continue 'scan;
            }
        }
        out.push('{');
        rest = tail;
    }
    out.push_str(rest);
    out
}

/// Appends `rule` as a bullet at the end of the `Rules:` block, or at the end
/// of the text when there is no such block.
fn insert_rule(template: &str, rule: &str) -> String {
    let lines: Vec<&str> = template.split('\n').collect();
    let Some(header) = lines.iter().position(|l| l.trim_end() == "Rules:") else {
        return format!("{template}\n- {rule}");
    };
    let mut last = header;
    while last + 1 < lines.len() && lines[last + 1].starts_with("- ") {
        last += 1;
    }
    let bullet = format!("- {rule}");
    let mut out: Vec<&str> = Vec::with_capacity(lines.len() + 1);
    out.extend_from_slice(&lines[..=last]);
    out.push(&bullet);
    out.extend_from_slice(&lines[last + 1..]);
    out.join("\n")
}
