//! Typed parsing of generality and baseline responses.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{Map, Value};

use super::json::json_objects;
use super::RawResponse;
use crate::cci::{CultureSet, GeneralityVector};
use crate::error::ParseError;

/// Scores this far outside `[0, 1]` are clamped with a warning; further out is a failure.
pub const CLAMP_TOLERANCE: f64 = 0.05;

// Absorbs the representation error of literals like 1.05.
const CLAMP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "warning", rename_all = "kebab-case")]
pub enum ParseWarning {
    Clamped { field: String, from: f64, to: f64 },
    ExtraCulture { culture: String },
}

/// A parsed value along with the non-fatal issues noticed on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<ParseWarning>,
}

/// Applies the clamp policy to one score.
pub fn clamp_score(field: &str, value: f64) -> Result<(f64, Option<ParseWarning>), ParseError> {
    if (0.0..=1.0).contains(&value) {
        return Ok((value, None));
    }
    let limit = CLAMP_TOLERANCE + CLAMP_SLACK;
    let clamped = if value < 0.0 && value >= -limit {
        0.0
    } else if value > 1.0 && value <= 1.0 + limit {
        1.0
    } else {
        return Err(ParseError::OutOfRangeScore {
            field: field.to_owned(),
            value,
        });
    };
    tracing::warn!(field, from = value, to = clamped, "clamped out-of-range score");
    Ok((
        clamped,
        Some(ParseWarning::Clamped {
            field: field.to_owned(),
            from: value,
            to: clamped,
        }),
    ))
}

fn number(field: &str, value: &Value) -> Result<f64, ParseError> {
    value
        .as_f64()
        .ok_or_else(|| ParseError::SchemaMismatch(format!("{field:?} is not a number: {value}")))
}

/// First JSON object in `text` carrying `key`, or the matching error.
fn object_with_key(text: &str, key: &str) -> Result<Map<String, Value>, ParseError> {
    let mut saw_object = false;
    for value in json_objects(text) {
        if let Value::Object(map) = value {
            if map.contains_key(key) {
                return Ok(map);
            }
            saw_object = true;
        }
    }
    if saw_object {
        Err(ParseError::SchemaMismatch(format!("no {key:?} key")))
    } else {
        Err(ParseError::NoJsonFound)
    }
}

/// Reads `{"scores": {"<culture>": <float>, ...}}` and checks it against the culture set.
pub fn parse_generality_response(
    raw: &RawResponse,
    cultures: &CultureSet,
) -> Result<Parsed<GeneralityVector>, ParseError> {
    let map = object_with_key(&raw.text, "scores")?;
    let Value::Object(scores) = &map["scores"] else {
        return Err(ParseError::SchemaMismatch("\"scores\" is not an object".into()));
    };

    let mut warnings = Vec::new();
    let mut values = BTreeMap::new();
    for culture in cultures.cultures() {
        let value = scores
            .get(culture)
            .ok_or_else(|| ParseError::MissingCulture(culture.clone()))?;
        let (score, warning) = clamp_score(culture, number(culture, value)?)?;
        warnings.extend(warning);
        values.insert(culture.clone(), score);
    }
    for key in scores.keys() {
        if !cultures.contains(key) {
            tracing::warn!(culture = %key, "dropping score for unrequested culture");
            warnings.push(ParseWarning::ExtraCulture {
                culture: key.clone(),
            });
        }
    }

    let vector = GeneralityVector::single_run(values)
        .expect("scores were clamped into [0, 1] above");
    Ok(Parsed {
        value: vector,
        warnings,
    })
}

/// Reads `{"score": <float>}`.
pub fn parse_baseline_response(raw: &RawResponse) -> Result<Parsed<f64>, ParseError> {
    let map = object_with_key(&raw.text, "score")?;
    let (score, warning) = clamp_score("score", number("score", &map["score"])?)?;
    Ok(Parsed {
        value: score,
        warnings: warning.into_iter().collect(),
    })
}
