//! Culture sets, generality vectors and the CCI arithmetic.
//!
//! Everything here is pure: no I/O, no rounding, double precision throughout.
//! Upstream scores outside `[0, 1]` are rejected rather than clamped; clamping
//! is a parsing concern and lives in [`crate::gateway::parse`].

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::CciError;

/// Ordered comparison scope `C` with a designated target culture `t`.
///
/// Culture names compare by exact string equality; there is no case folding
/// or whitespace normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CultureSet {
    cultures: Vec<String>,
    target: String,
}

impl CultureSet {
    /// Validates and builds a culture set.
    ///
    /// Requires at least two unique names and a target that is one of them.
    pub fn new<I, S>(cultures: I, target: impl Into<String>) -> Result<Self, CciError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let cultures: Vec<String> = cultures.into_iter().map(Into::into).collect();
        let target = target.into();

        let mut seen = HashSet::with_capacity(cultures.len());
        for name in &cultures {
            if !seen.insert(name.as_str()) {
                return Err(CciError::DuplicateCulture(name.clone()));
            }
        }
        if cultures.len() < 2 {
            return Err(CciError::TooFewCultures(cultures.len()));
        }
        if !seen.contains(target.as_str()) {
            return Err(CciError::TargetNotInSet(target));
        }
        Ok(Self { cultures, target })
    }

    pub fn cultures(&self) -> &[String] {
        &self.cultures
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.cultures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cultures.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.cultures.iter().any(|c| c == name)
    }

    /// Non-target cultures in their configured order.
    pub fn others(&self) -> impl Iterator<Item = &str> {
        self.cultures
            .iter()
            .map(String::as_str)
            .filter(move |c| *c != self.target)
    }
}

/// Free-function form of [`CultureSet::new`].
pub fn validate_culture_set<S: AsRef<str>>(
    cultures: &[S],
    target: &str,
) -> Result<CultureSet, CciError> {
    CultureSet::new(cultures.iter().map(|c| c.as_ref().to_owned()), target)
}

/// Whether a vector is one elicitation or an N-run mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VectorKind {
    SingleRun,
    Aggregated { n_runs: u32 },
}

/// Per-culture generality scores `p_c(x)` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralityVector {
    scores: BTreeMap<String, f64>,
    kind: VectorKind,
}

impl GeneralityVector {
    /// Builds a single-run vector, rejecting any score outside `[0, 1]` (and NaN).
    pub fn single_run(scores: BTreeMap<String, f64>) -> Result<Self, CciError> {
        Self::with_kind(scores, VectorKind::SingleRun)
    }

    pub fn with_kind(scores: BTreeMap<String, f64>, kind: VectorKind) -> Result<Self, CciError> {
        for (culture, &value) in &scores {
            if !(0.0..=1.0).contains(&value) {
                return Err(CciError::OutOfRangeScore {
                    culture: culture.clone(),
                    value,
                });
            }
        }
        Ok(Self { scores, kind })
    }

    pub fn scores(&self) -> &BTreeMap<String, f64> {
        &self.scores
    }

    pub fn get(&self, culture: &str) -> Option<f64> {
        self.scores.get(culture).copied()
    }

    pub fn kind(&self) -> VectorKind {
        self.kind
    }

    /// Number of runs behind this vector (1 for a single run).
    pub fn n_runs(&self) -> u32 {
        match self.kind {
            VectorKind::SingleRun => 1,
            VectorKind::Aggregated { n_runs } => n_runs,
        }
    }

    /// Checks the key set equals the culture set exactly.
    pub fn check_coverage(&self, set: &CultureSet) -> Result<(), CciError> {
        let missing: Vec<String> = set
            .cultures()
            .iter()
            .filter(|c| !self.scores.contains_key(*c))
            .cloned()
            .collect();
        let extra: Vec<String> = self
            .scores
            .keys()
            .filter(|k| !set.contains(k))
            .cloned()
            .collect();
        if missing.is_empty() && extra.is_empty() {
            Ok(())
        } else {
            Err(CciError::CultureMismatch { missing, extra })
        }
    }
}

/// Final CCI score together with the aggregated generality breakdown it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CciResult {
    pub cci: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cci_log: Option<f64>,
    pub target: String,
    pub breakdown: GeneralityVector,
    pub n_runs: u32,
}

/// Per-culture arithmetic mean over `N` runs.
pub fn aggregate_runs(
    runs: &[GeneralityVector],
    set: &CultureSet,
) -> Result<GeneralityVector, CciError> {
    if runs.is_empty() {
        return Err(CciError::EmptyRunList);
    }
    for run in runs {
        run.check_coverage(set)?;
        for (culture, &value) in run.scores() {
            if !(0.0..=1.0).contains(&value) {
                return Err(CciError::OutOfRangeScore {
                    culture: culture.clone(),
                    value,
                });
            }
        }
    }

    // Mean as an offset from the first run: identical runs aggregate to
    // themselves bit for bit.
    let n = runs.len() as f64;
    let means = set
        .cultures()
        .iter()
        .map(|c| {
            let first = runs[0].scores[c];
            let offset: f64 = runs.iter().map(|r| r.scores[c] - first).sum();
            (c.clone(), (first + offset / n).clamp(0.0, 1.0))
        })
        .collect();
    let n_runs = u32::try_from(runs.len()).unwrap_or(u32::MAX);
    GeneralityVector::with_kind(means, VectorKind::Aggregated { n_runs })
}

fn check_inputs(aggregated: &GeneralityVector, set: &CultureSet) -> Result<(), CciError> {
    if set.len() < 2 {
        return Err(CciError::DegenerateCultureSet(set.len()));
    }
    aggregated.check_coverage(set)
}

/// Target generality minus the mean generality of the other cultures.
pub fn compute_cci(aggregated: &GeneralityVector, set: &CultureSet) -> Result<CciResult, CciError> {
    check_inputs(aggregated, set)?;
    // Mean of pairwise gaps; equal scores give exactly 0 and the extremes exactly ±1.
    let target = aggregated.scores[set.target()];
    let gaps: f64 = set.others().map(|c| target - aggregated.scores[c]).sum();
    let cci = gaps / (set.len() - 1) as f64;
    Ok(CciResult {
        cci,
        cci_log: None,
        target: set.target().to_owned(),
        breakdown: aggregated.clone(),
        n_runs: aggregated.n_runs(),
    })
}

/// Log-softmax weighted variant: `(1 + ln q_t / ln |C|) * p_t` with
/// `q_t = exp(p_t) / sum_c exp(p_c)`.
pub fn compute_cci_log(aggregated: &GeneralityVector, set: &CultureSet) -> Result<f64, CciError> {
    check_inputs(aggregated, set)?;
    let target = aggregated.scores[set.target()];
    // ln q_t = -ln sum_c exp(p_c - p_t); with all scores equal the sum is exactly |C|.
    let partition: f64 = set
        .cultures()
        .iter()
        .map(|c| (aggregated.scores[c] - target).exp())
        .sum();
    let log_q = -partition.ln();
    Ok((1.0 + log_q / (set.len() as f64).ln()) * target)
}

/// [`compute_cci`] with the log variant filled in.
pub fn compute_cci_with_log(
    aggregated: &GeneralityVector,
    set: &CultureSet,
) -> Result<CciResult, CciError> {
    let mut result = compute_cci(aggregated, set)?;
    result.cci_log = Some(compute_cci_log(aggregated, set)?);
    Ok(result)
}
