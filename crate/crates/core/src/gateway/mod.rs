//! Prompt rendering, scoring backends and response parsing.

pub mod backend;
pub mod http;
pub mod json;
pub mod parse;
pub mod prompts;
pub mod scoring;

pub use backend::{
    build_backend, complete, write_fixture, Backend, BackendConfig, BackendKind, FixtureRecord,
    RawResponse, ScriptedBackend,
};
pub use http::HttpChatBackend;
pub use parse::{parse_baseline_response, parse_generality_response, Parsed, ParseWarning};
pub use prompts::{
    render_baseline_prompt, render_generality_prompt, render_generation_prompt, GenerationKind,
    PromptKind, PromptTemplates,
};
pub use scoring::{run_bounded, score_sentence, BaselineResult, Scorer, ScorerSettings};
