//! JSONL score files: one preference pair per line.
//!
//! Required keys are `pair_id` and `label` (`"A"` or `"B"`). Optional keys are
//! `features_a`, `features_b`, `s_h_a`, `s_h_b`, `s_m_a`, `s_m_b`, `s_a_a`, `s_a_b` and `truth`.
//! At least one score channel must be present on both sides. Blank lines are skipped.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HbiError, Result};
use crate::supervision::PreferencePair;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestedScores {
    pub pairs: Vec<PreferencePair>,
    /// sha256 of the file bytes.
    pub source_digest: String,
    /// Number of pairs carrying each optional field.
    pub counts: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub scores: IngestedScores,
    /// Rejected lines; always empty in strict mode.
    pub errors: Vec<LineError>,
}

fn check_pair(p: &PreferencePair) -> std::result::Result<(), String> {
    p.validate().map_err(|e| e.to_string())?;
    let both = |a: Option<f64>, b: Option<f64>| a.is_some() && b.is_some();
    if !(both(p.s_h_a, p.s_h_b) || both(p.s_m_a, p.s_m_b) || both(p.s_a_a, p.s_a_b)) {
        return Err(format!("pair `{}` has no score channel on both sides", p.pair_id));
    }
    let scores = [p.s_h_a, p.s_h_b, p.s_m_a, p.s_m_b, p.s_a_a, p.s_a_b];
    if scores.iter().flatten().any(|v| !v.is_finite()) {
        return Err(format!("pair `{}` has a non-finite score", p.pair_id));
    }
    Ok(())
}

fn field_counts(pairs: &[PreferencePair]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    let mut bump = |k: &str, present: bool| {
        *counts.entry(k.to_string()).or_insert(0) += usize::from(present);
    };
    for p in pairs {
        bump("features", !p.features_a.is_empty());
        bump("s_h_a", p.s_h_a.is_some());
        bump("s_h_b", p.s_h_b.is_some());
        bump("s_m_a", p.s_m_a.is_some());
        bump("s_m_b", p.s_m_b.is_some());
        bump("s_a_a", p.s_a_a.is_some());
        bump("s_a_b", p.s_a_b.is_some());
        bump("truth", p.truth.is_some());
    }
    counts
}

/// Parses and validates a score file.
///
/// In strict mode the first malformed line aborts with [`HbiError::Schema`]; otherwise
/// malformed lines are reported and skipped. Duplicate ids always abort.
pub fn ingest_scores(path: &Path, strict: bool) -> Result<IngestReport> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| HbiError::Schema {
        line: 0,
        message: e.to_string(),
    })?;
    let mut pairs: Vec<PreferencePair> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<PreferencePair>(raw)
            .map_err(|e| e.to_string())
            .and_then(|p| check_pair(&p).map(|_| p));
        match parsed {
            Ok(p) => {
                if seen.insert(p.pair_id.clone(), line).is_some() {
                    return Err(HbiError::DuplicateId { id: p.pair_id, line });
                }
                pairs.push(p);
            }
            Err(message) if strict => return Err(HbiError::Schema { line, message }),
            Err(message) => errors.push(LineError { line, message }),
        }
    }
    let counts = field_counts(&pairs);
    Ok(IngestReport {
        scores: IngestedScores {
            pairs,
            source_digest: hex::encode(Sha256::digest(&bytes)),
            counts,
        },
        errors,
    })
}

/// One JSON object per line, in the ingest format.
pub fn to_jsonl(pairs: &[PreferencePair]) -> Result<String> {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&serde_json::to_string(p)?);
        out.push('\n');
    }
    Ok(out)
}
