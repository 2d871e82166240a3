//! Conceptual Cultural Index: sentence-level cultural specificity from
//! per-culture generality estimates.
//!
//! A sentence is scored by asking a model how common it is in every culture of
//! a comparison set, averaging several runs, and taking the target culture's
//! generality minus the mean of the others. The crate also carries the
//! evaluation side: ROC/AUC against a direct-scoring baseline, class medians,
//! and accuracy stratified by score bins.

pub mod cache;
pub mod cci;
pub mod cultures;
pub mod datasets;
pub mod error;
pub mod gateway;
pub mod metrics;
pub mod report;

pub use cache::{CacheKey, ScoreCache, ScoreRecord};
pub use cci::{
    aggregate_runs, compute_cci, compute_cci_log, compute_cci_with_log, validate_culture_set,
    CciResult, CultureSet, GeneralityVector, VectorKind,
};
pub use error::{
    BackendError, CacheError, CciError, DatasetError, MetricsError, ParseError, PromptError,
    ScoreError,
};
pub use gateway::{BackendConfig, PromptTemplates, Scorer};
pub use metrics::{
    bin_by_cci, class_medians, roc_auc, roc_curve, stratified_accuracy, ScoreBin, ScoredItem,
    SeparabilityReport, StratificationTable,
};

/// Lowercase hex sha256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
