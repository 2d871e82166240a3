//! Locating JSON values inside free-form model output.
//!
//! Models wrap JSON in prose, code fences or `<think>` blocks, and sometimes
//! stop mid-object. The scanner walks candidate openers left to right, finds the
//! bracket that balances each one (string- and escape-aware), and keeps the
//! slices that actually parse.

use serde_json::Value;

/// Byte offset of the bracket closing the one at `start`, if it balances.
fn balanced_end(text: &str, start: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut stack: Vec<u8> = Vec::new();
    let mut in_string = false;
    let mut escaped = false;

    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' | b'[' => stack.push(b),
            b'}' | b']' => {
                let open = stack.pop()?;
                if (open == b'{') != (b == b'}') {
                    return None;
                }
                if stack.is_empty() {
                    return Some(start + offset);
                }
            }
            _ => {}
        }
    }
    None
}

/// Iterator over the well-formed JSON values that start with `open`, in order of appearance.
///
/// Once a value is found the scan resumes after it, so nested values are not
/// reported separately.
pub struct JsonValues<'a> {
    text: &'a str,
    pos: usize,
    open: u8,
}

impl Iterator for JsonValues<'_> {
    type Item = Value;

    fn next(&mut self) -> Option<Value> {
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len() {
            let rel = bytes[self.pos..].iter().position(|&b| b == self.open)?;
            let start = self.pos + rel;
            if let Some(end) = balanced_end(self.text, start) {
                if let Ok(value) = serde_json::from_str::<Value>(&self.text[start..=end]) {
                    self.pos = end + 1;
                    return Some(value);
                }
            }
            self.pos = start + 1;
        }
        None
    }
}

/// All well-formed JSON objects in `text`.
pub fn json_objects(text: &str) -> JsonValues<'_> {
    JsonValues {
        text,
        pos: 0,
        open: b'{',
    }
}

/// All well-formed JSON arrays in `text`.
pub fn json_arrays(text: &str) -> JsonValues<'_> {
    JsonValues {
        text,
        pos: 0,
        open: b'[',
    }
}

/// First well-formed JSON object in `text`.
pub fn extract_first_object(text: &str) -> Option<Value> {
    json_objects(text).next()
}
