//! Pairs with an objective correct side: the sufficiency proxy and the z-score normalization study.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::preference::target_of;
use super::{AuxIndicator, BatchMode, Cell, CorrectSide, ExperimentConfig, Primary, STREAM_TASK};
use crate::error::{HbiError, Result};
use crate::learners::pairwise_accuracy_by;
use crate::probcore::derive_stream;
use crate::supervision::{hybrid_score_binary, zscore_normalize, PreferencePair, Side};

pub(super) const NORMALIZATION_PLOTS: [&str; 3] = ["accuracy_human", "accuracy_aux", "accuracy_hybrid"];

/// Human scores are two uniforms per pair; the correct side gets the larger one with
/// probability `1 − human_error`. The auxiliary score is a correctness indicator.
fn objective_pairs(cfg: &ExperimentConfig, seed: u64) -> Vec<PreferencePair> {
    let mut rng = derive_stream(seed, STREAM_TASK);
    let o = &cfg.options;
    (0..cfg.n_test)
        .map(|i| {
            let correct = match o.correct_side {
                CorrectSide::A => Side::A,
                CorrectSide::Random if rng.random::<bool>() => Side::A,
                CorrectSide::Random => Side::B,
            };
            let (u1, u2): (f64, f64) = (rng.random(), rng.random());
            let hit = rng.random::<f64>() >= o.human_error;
            let (hi, lo) = (u1.max(u2), u1.min(u2));
            let (s_right, s_wrong) = if hit { (hi, lo) } else { (lo, hi) };
            let (a_right, a_wrong) = match o.aux_indicator {
                AuxIndicator::Correctness => (1.0, 0.0),
                AuxIndicator::Constant => (1.0, 1.0),
            };
            let human = if hit { correct } else { correct.flipped() };
            let mut p = PreferencePair::new(format!("pair-{i}"), human);
            p.truth = Some(correct);
            let (h, a) = match correct {
                Side::A => ((s_right, s_wrong), (a_right, a_wrong)),
                Side::B => ((s_wrong, s_right), (a_wrong, a_right)),
            };
            p.s_h_a = Some(h.0);
            p.s_h_b = Some(h.1);
            p.s_a_a = Some(a.0);
            p.s_a_b = Some(a.1);
            p
        })
        .collect()
}

fn accuracy_of(pairs: &[PreferencePair], diffs: &[f64]) -> Result<f64> {
    let by_id: BTreeMap<&str, f64> = pairs.iter().map(|p| p.pair_id.as_str()).zip(diffs.iter().copied()).collect();
    pairwise_accuracy_by(|p| by_id[p.pair_id.as_str()], pairs, target_of(pairs))
}

pub(super) fn sufficiency_cell(cfg: &ExperimentConfig, p: usize, seed: u64) -> Result<Cell> {
    let alpha = cfg.grid[p];
    let pairs = objective_pairs(cfg, seed);
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|q| {
            let a = hybrid_score_binary(alpha, q.s_h_a.unwrap_or(0.0), q.s_a_a.unwrap_or(0.0))?;
            let b = hybrid_score_binary(alpha, q.s_h_b.unwrap_or(0.0), q.s_a_b.unwrap_or(0.0))?;
            Ok(a - b)
        })
        .collect::<Result<_>>()?;
    Ok(Cell {
        param: alpha,
        param_index: p,
        seed,
        metrics: BTreeMap::from([("accuracy".to_string(), accuracy_of(&pairs, &diffs)?)]),
    })
}

/// Z-scores of per-pair `(a, b)` scores under a batch mode, returned as `(z_a, z_b)` and a
/// flag set when any batch had zero variance.
pub fn batch_zscores(a: &[f64], b: &[f64], mode: BatchMode) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    match mode {
        BatchMode::Global => {
            let all: Vec<f64> = a.iter().chain(b).copied().collect();
            let z = zscore_normalize(&all)?;
            let (za, zb) = z.values.split_at(a.len());
            Ok((za.to_vec(), zb.to_vec(), z.degenerate))
        }
        BatchMode::PerSide => {
            let za = zscore_normalize(a)?;
            let zb = zscore_normalize(b)?;
            Ok((za.values, zb.values, za.degenerate || zb.degenerate))
        }
        BatchMode::Pair => {
            let mut za = Vec::with_capacity(a.len());
            let mut zb = Vec::with_capacity(b.len());
            let mut degenerate = false;
            for (x, y) in a.iter().zip(b) {
                let z = zscore_normalize(&[*x, *y])?;
                degenerate |= z.degenerate;
                za.push(z.values[0]);
                zb.push(z.values[1]);
            }
            Ok((za, zb, degenerate))
        }
    }
}

/// Per-pair scores, z-scores and gaps under the headline batch mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub param: f64,
    pub seed: u64,
    pub pair_id: String,
    pub s_h_a: f64,
    pub s_h_b: f64,
    pub s_a_a: f64,
    pub s_a_b: f64,
    pub z_h_a: f64,
    pub z_h_b: f64,
    pub z_a_a: f64,
    pub z_a_b: f64,
    pub human_gap: f64,
    pub hybrid_gap: f64,
    pub truth: Option<Side>,
}

pub(super) fn audit_csv(rows: &[AuditRow]) -> String {
    let mut out =
        String::from("param,seed,pair_id,s_h_a,s_h_b,s_a_a,s_a_b,z_h_a,z_h_b,z_a_a,z_a_b,human_gap,hybrid_gap,truth\n");
    for r in rows {
        let truth = match r.truth {
            Some(Side::A) => "A",
            Some(Side::B) => "B",
            None => "",
        };
        let nums = [
            r.s_h_a, r.s_h_b, r.s_a_a, r.s_a_b, r.z_h_a, r.z_h_b, r.z_a_a, r.z_a_b, r.human_gap, r.hybrid_gap,
        ]
        .map(|v| format!("{v:.6}"))
        .join(",");
        let _ = writeln!(out, "{:.6},{},{},{},{}", r.param, r.seed, r.pair_id, nums, truth);
    }
    out
}

fn mode_name(mode: BatchMode) -> &'static str {
    match mode {
        BatchMode::Global => "global",
        BatchMode::PerSide => "per_side",
        BatchMode::Pair => "pair",
    }
}

fn channel(pairs: &[PreferencePair], pick: impl Fn(&PreferencePair) -> (Option<f64>, Option<f64>), name: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut a = Vec::with_capacity(pairs.len());
    let mut b = Vec::with_capacity(pairs.len());
    for p in pairs {
        match pick(p) {
            (Some(x), Some(y)) => {
                a.push(x);
                b.push(y);
            }
            _ => return Err(HbiError::MissingSignal(name.to_string())),
        }
    }
    Ok((a, b))
}

/// Raw human, raw auxiliary and z-scored hybrid accuracies, plus how often the hybrid
/// ranking agrees with the raw human ranking, for every batch mode.
pub(super) fn normalization_metrics(
    cfg: &ExperimentConfig,
    pairs: &[PreferencePair],
    primary: Primary,
    alpha: f64,
    seed: u64,
) -> Result<(BTreeMap<String, f64>, Vec<AuditRow>)> {
    let (h_a, h_b) = match primary {
        Primary::H => channel(pairs, |p| (p.s_h_a, p.s_h_b), "s_h")?,
        Primary::M => channel(pairs, |p| (p.s_m_a, p.s_m_b), "s_m")?,
    };
    let (a_a, a_b) = channel(pairs, |p| (p.s_a_a, p.s_a_b), "s_a")?;
    let human_gap: Vec<f64> = h_a.iter().zip(&h_b).map(|(x, y)| x - y).collect();
    let aux_gap: Vec<f64> = a_a.iter().zip(&a_b).map(|(x, y)| x - y).collect();
    let mut metrics = BTreeMap::from([
        ("accuracy_human".to_string(), accuracy_of(pairs, &human_gap)?),
        ("accuracy_aux".to_string(), accuracy_of(pairs, &aux_gap)?),
    ]);
    let mut audit = Vec::new();
    for mode in [BatchMode::Global, BatchMode::PerSide, BatchMode::Pair] {
        let (zh_a, zh_b, _) = batch_zscores(&h_a, &h_b, mode)?;
        let (za_a, za_b, aux_degenerate) = batch_zscores(&a_a, &a_b, mode)?;
        let gap: Vec<f64> = (0..pairs.len())
            .map(|i| (alpha * zh_a[i] + (1.0 - alpha) * za_a[i]) - (alpha * zh_b[i] + (1.0 - alpha) * za_b[i]))
            .collect();
        let agree = gap
            .iter()
            .zip(&human_gap)
            .filter(|(g, h)| Side::from_diff(**g) == Side::from_diff(**h))
            .count() as f64
            / pairs.len() as f64;
        let acc = accuracy_of(pairs, &gap)?;
        let name = mode_name(mode);
        metrics.insert(format!("accuracy_hybrid_{name}"), acc);
        metrics.insert(format!("agreement_{name}"), agree);
        metrics.insert(format!("aux_degenerate_{name}"), f64::from(u8::from(aux_degenerate)));
        if mode == cfg.options.batch_mode {
            metrics.insert("accuracy_hybrid".to_string(), acc);
            metrics.insert("hybrid_human_agreement".to_string(), agree);
            audit = (0..pairs.len())
                .map(|i| AuditRow {
                    param: alpha,
                    seed,
                    pair_id: pairs[i].pair_id.clone(),
                    s_h_a: h_a[i],
                    s_h_b: h_b[i],
                    s_a_a: a_a[i],
                    s_a_b: a_b[i],
                    z_h_a: zh_a[i],
                    z_h_b: zh_b[i],
                    z_a_a: za_a[i],
                    z_a_b: za_b[i],
                    human_gap: human_gap[i],
                    hybrid_gap: gap[i],
                    truth: pairs[i].truth,
                })
                .collect();
        }
    }
    Ok((metrics, audit))
}

pub(super) fn normalization_cell(cfg: &ExperimentConfig, p: usize, seed: u64) -> Result<(Cell, Vec<AuditRow>)> {
    let alpha = cfg.grid[p];
    let pairs = objective_pairs(cfg, seed);
    let (metrics, audit) = normalization_metrics(cfg, &pairs, Primary::H, alpha, seed)?;
    Ok((
        Cell {
            param: alpha,
            param_index: p,
            seed,
            metrics,
        },
        audit,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ExperimentKind;

    #[test]
    fn pair_mode_maps_each_pair_to_plus_minus_one() {
        let (za, zb, deg) = batch_zscores(&[3.0, 1.0], &[1.0, 1.0], BatchMode::Pair).unwrap();
        assert_eq!(za, vec![1.0, 0.0]);
        assert_eq!(zb, vec![-1.0, 0.0]);
        assert!(deg);
    }

    #[test]
    fn constant_aux_collapses_hybrid_to_human_under_global_batches() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::NormalizationDegeneracy);
        cfg.options.aux_indicator = AuxIndicator::Constant;
        cfg.options.batch_mode = BatchMode::Global;
        let (c, audit) = normalization_cell(&cfg, 0, 9).unwrap();
        assert_eq!(c.metrics["hybrid_human_agreement"], 1.0);
        assert_eq!(c.metrics["accuracy_hybrid"], c.metrics["accuracy_human"]);
        assert!(audit.iter().all(|r| r.z_a_a == 0.0 && r.z_a_b == 0.0));
    }
}
