#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cci_core::gateway::{
    render_baseline_prompt, render_generality_prompt, write_fixture, FixtureRecord,
};
use cci_core::CultureSet;
use serde_json::{json, Value};

pub const CULTURES: [&str; 4] = ["China", "Republic of Korea", "United States of America", "Japan"];

pub fn custom_set() -> CultureSet {
    CultureSet::new(CULTURES, "Japan").unwrap()
}

pub fn cci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cci"))
        .args(args)
        .output()
        .expect("run cci")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// The `backend calls: N` figure from a score summary.
pub fn backend_calls(out: &Output) -> usize {
    let err = stderr(out);
    let tail = err
        .rsplit("backend calls: ")
        .next()
        .filter(|_| err.contains("backend calls: "))
        .unwrap_or_else(|| panic!("no summary in stderr: {err}"));
    tail.trim().parse().unwrap()
}

pub fn write_lines(path: &Path, values: &[Value]) {
    let text: String = values.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(path, text).unwrap();
}

pub fn read_lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

pub fn scores_json(set: &CultureSet, values: &[f64]) -> String {
    let scores: serde_json::Map<String, Value> = set
        .cultures()
        .iter()
        .zip(values)
        .map(|(c, v)| (c.clone(), json!(v)))
        .collect();
    json!({ "scores": scores }).to_string()
}

/// Fixture record answering every run of the generality prompt for `sentence`.
pub fn generality_fixture(sentence: &str, set: &CultureSet, response: &str, run: Option<u32>) -> FixtureRecord {
    FixtureRecord::for_prompt(&render_generality_prompt(sentence, set).unwrap(), run, response)
}

pub fn baseline_fixture(sentence: &str, target: &str, neighbor: bool, response: &str) -> FixtureRecord {
    FixtureRecord::for_prompt(
        &render_baseline_prompt(sentence, target, neighbor).unwrap(),
        None,
        response,
    )
}

pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_owned()
    }

    pub fn sentences(&self, name: &str, rows: &[(&str, &str, &str)]) -> String {
        let values: Vec<Value> = rows
            .iter()
            .map(|(id, text, label)| json!({"id": id, "text": text, "label": label}))
            .collect();
        write_lines(&self.path(name), &values);
        self.arg(name)
    }

    pub fn fixture(&self, name: &str, records: &[FixtureRecord]) -> String {
        write_fixture(&self.path(name), records).unwrap();
        self.arg(name)
    }
}
