//! Least squares, Bradley–Terry preference fitting, Gibbs posteriors over
//! finite classes and exact Bayes predictors.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{HbiError, Result};
use crate::probcore::{Distribution, JointDistribution, RngStream, Symbol};
use crate::supervision::{PreferencePair, Side};

/// A linear scorer `x ↦ wᵀx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(HbiError::InvalidSpec("model weights must be finite".into()));
        }
        Ok(LinearModel { weights })
    }

    pub fn zeros(dim: usize) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Ridge regression `(XᵀX + l2·I) w = Xᵀy` by Cholesky factorization.
pub fn fit_least_squares(features: &[Vec<f64>], targets: &[f64], l2: f64) -> Result<LinearModel> {
    if features.len() != targets.len() {
        return Err(HbiError::Shape(format!(
            "{} feature rows for {} targets",
            features.len(),
            targets.len()
        )));
    }
    if !(l2 >= 0.0) {
        return Err(HbiError::InvalidSpec(format!("l2 {l2} must be nonnegative")));
    }
    let d = features.first().map(Vec::len).unwrap_or(0);
    if d == 0 || features.iter().any(|r| r.len() != d) {
        return Err(HbiError::Shape("feature rows must be nonempty and of equal length".into()));
    }
    let x = DMatrix::from_fn(features.len(), d, |i, j| features[i][j]);
    let y = DVector::from_column_slice(targets);
    let mut gram = x.transpose() * &x;
    for k in 0..d {
        gram[(k, k)] += l2;
    }
    let rhs = x.transpose() * &y;
    let chol = gram.clone().cholesky().ok_or(HbiError::SingularSystem)?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
    if l2 == 0.0 && lo <= 1e-7 * hi {
        return Err(HbiError::SingularSystem);
    }
    let mut w = chol.solve(&rhs);
    // One step of iterative refinement tightens the normal-equation residual.
    let residual = &rhs - &gram * &w;
    w += chol.solve(&residual);
    LinearModel::new(w.iter().copied().collect())
}

/// Numerically stable `ln(1 + e^z)`.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Bradley–Terry negative log-likelihood of `label` given `score_a − score_b`.
pub fn bt_loss(score_diff: f64, label: Side) -> f64 {
    softplus(-label.sign() * score_diff)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Mini-batch size; `0` or anything at least the number of pairs means full batch.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.5,
            epochs: 300,
            l2: 0.0,
            batch_size: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.epochs == 0 || !(self.l2 >= 0.0) {
            return Err(HbiError::InvalidSpec(
                "learning_rate must be positive, epochs at least 1, l2 nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// One row of a training trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BtFit {
    pub model: LinearModel,
    pub trace: Vec<TraceRow>,
    pub final_grad_norm: f64,
}

/// Mean Bradley–Terry loss plus `l2/2 ‖w‖²` over `(φ_a − φ_b, label)` rows.
pub fn bt_objective(w: &[f64], diffs: &[Vec<f64>], labels: &[Side], l2: f64) -> f64 {
    let n = diffs.len() as f64;
    let data: f64 = diffs
        .iter()
        .zip(labels)
        .map(|(z, l)| bt_loss(dot(w, z), *l))
        .sum::<f64>();
    data / n + 0.5 * l2 * dot(w, w)
}

fn bt_gradient(w: &[f64], diffs: &[Vec<f64>], labels: &[Side], idx: &[usize], l2: f64) -> Vec<f64> {
    let mut g = vec![0.0; w.len()];
    for &i in idx {
        let y = labels[i].sign();
        let coef = -y * sigmoid(-y * dot(w, &diffs[i]));
        for (gk, zk) in g.iter_mut().zip(&diffs[i]) {
            *gk += coef * zk;
        }
    }
    let m = idx.len() as f64;
    g.iter_mut().zip(w).for_each(|(gk, wk)| *gk = *gk / m + l2 * wk);
    g
}

/// Consecutive loss increases that count as divergence.
pub const DIVERGENCE_WINDOW: usize = 10;

/// Gradient descent on the mean Bradley–Terry loss over `wᵀ(φ_a − φ_b)`.
pub fn fit_bradley_terry(pairs: &[PreferencePair], cfg: &TrainConfig) -> Result<BtFit> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(HbiError::EmptyEval);
    }
    let d = pairs[0].features_a.len();
    for p in pairs {
        p.validate()?;
        if p.features_a.len() != d || d == 0 {
            return Err(HbiError::MissingSignal(format!("features on pair `{}`", p.pair_id)));
        }
    }
    let diffs: Vec<Vec<f64>> = pairs.iter().map(PreferencePair::feature_diff).collect();
    let labels: Vec<Side> = pairs.iter().map(|p| p.label).collect();
    let n = pairs.len();
    let full_batch = cfg.batch_size == 0 || cfg.batch_size >= n;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = RngStream::new(cfg.seed, 0);

    let mut w = vec![0.0; d];
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut prev = bt_objective(&w, &diffs, &labels, cfg.l2);
    let mut rising = 0;
    for epoch in 1..=cfg.epochs {
        if full_batch {
            let g = bt_gradient(&w, &diffs, &labels, &order, cfg.l2);
            w.iter_mut().zip(&g).for_each(|(wk, gk)| *wk -= cfg.learning_rate * gk);
        } else {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.batch_size) {
                let g = bt_gradient(&w, &diffs, &labels, chunk, cfg.l2);
                w.iter_mut().zip(&g).for_each(|(wk, gk)| *wk -= cfg.learning_rate * gk);
            }
        }
        let all: Vec<usize> = (0..n).collect();
        let grad_norm = norm(&bt_gradient(&w, &diffs, &labels, &all, cfg.l2));
        let loss = bt_objective(&w, &diffs, &labels, cfg.l2);
        trace.push(TraceRow {
            epoch,
            loss,
            grad_norm,
        });
        if !loss.is_finite() || loss > prev {
            rising += 1;
            if rising >= DIVERGENCE_WINDOW || !loss.is_finite() {
                return Err(HbiError::Divergence {
                    epoch,
                    trace: trace.iter().map(|r| r.loss).collect(),
                });
            }
        } else {
            rising = 0;
        }
        prev = loss;
    }
    let final_grad_norm = trace.last().map(|r| r.grad_norm).unwrap_or(0.0);
    Ok(BtFit {
        model: LinearModel::new(w)?,
        trace,
        final_grad_norm,
    })
}

/// What pairwise accuracy is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Against {
    Label,
    Truth,
}

/// Accuracy of a scorer over feature vectors; exact ties count one half.
pub fn pairwise_accuracy<F: Fn(&[f64]) -> f64>(
    scorer: F,
    pairs: &[PreferencePair],
    against: Against,
) -> Result<f64> {
    pairwise_accuracy_by(|p| scorer(&p.features_a) - scorer(&p.features_b), pairs, against)
}

/// Accuracy given the per-pair score difference `score_a − score_b`.
pub fn pairwise_accuracy_by<F: Fn(&PreferencePair) -> f64>(
    diff: F,
    pairs: &[PreferencePair],
    against: Against,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(HbiError::EmptyEval);
    }
    let mut hits = 0.0;
    for p in pairs {
        let target = match against {
            Against::Label => p.label,
            Against::Truth => p
                .truth
                .ok_or_else(|| HbiError::MissingSignal(format!("truth on pair `{}`", p.pair_id)))?,
        };
        hits += match Side::from_diff(diff(p)) {
            None => 0.5,
            Some(s) if s == target => 1.0,
            Some(_) => 0.0,
        };
    }
    Ok(hits / pairs.len() as f64)
}

/// A finite class with human-proxy and true losses per member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteHypothesisClass {
    pub members: Vec<String>,
    pub losses_h: Vec<f64>,
    pub losses_star: Vec<f64>,
}

impl FiniteHypothesisClass {
    pub fn new(members: Vec<String>, losses_h: Vec<f64>, losses_star: Vec<f64>) -> Result<Self> {
        if members.is_empty() || members.len() != losses_h.len() || members.len() != losses_star.len() {
            return Err(HbiError::Shape(format!(
                "{} members, {} human losses, {} true losses",
                members.len(),
                losses_h.len(),
                losses_star.len()
            )));
        }
        if losses_h.iter().chain(&losses_star).any(|l| !l.is_finite()) {
            return Err(HbiError::InvalidSpec("losses must be finite".into()));
        }
        Ok(FiniteHypothesisClass {
            members,
            losses_h,
            losses_star,
        })
    }

    /// Members named `f0, f1, …`.
    pub fn indexed(losses_h: Vec<f64>, losses_star: Vec<f64>) -> Result<Self> {
        let members = (0..losses_h.len()).map(|i| format!("f{i}")).collect();
        Self::new(members, losses_h, losses_star)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn support(&self) -> Vec<Symbol> {
        self.members.iter().map(Symbol::new).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsPosterior {
    pub weights: Distribution,
    pub beta: f64,
    pub prior: Distribution,
}

/// `Q(f) ∝ prior(f)·exp(−β·L_H(f))`, normalized in log-space.
pub fn gibbs_posterior(
    class: &FiniteHypothesisClass,
    beta: f64,
    prior: &Distribution,
) -> Result<GibbsPosterior> {
    if !(beta >= 0.0) {
        return Err(HbiError::InvalidSpec(format!("beta {beta} must be nonnegative")));
    }
    if prior.len() != class.len() {
        return Err(HbiError::Shape(format!(
            "prior over {} members for a class of {}",
            prior.len(),
            class.len()
        )));
    }
    let logw: Vec<f64> = prior
        .probs()
        .iter()
        .zip(&class.losses_h)
        .map(|(p, l)| if *p > 0.0 { p.ln() - beta * l } else { f64::NEG_INFINITY })
        .collect();
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = logw.iter().map(|lw| (lw - top).exp()).collect();
    let z: f64 = unnorm.iter().sum();
    let weights = Distribution::new(class.support(), unnorm.iter().map(|u| u / z).collect())?;
    Ok(GibbsPosterior {
        weights,
        beta,
        prior: prior.clone(),
    })
}

/// `E_{f∼Q}[losses(f)]`.
pub fn expected_risk(post: &GibbsPosterior, losses: &[f64]) -> Result<f64> {
    if losses.len() != post.weights.len() {
        return Err(HbiError::Shape(format!(
            "{} losses for a posterior over {} members",
            losses.len(),
            post.weights.len()
        )));
    }
    Ok(dot(post.weights.probs(), losses))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    ZeroOne,
    Squared,
}

/// Per-signal optimal actions and the risk they achieve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesOptimal {
    /// `(signal value, action)`; actions are target symbols under 0-1 loss and
    /// numeric conditional means under squared loss.
    pub table: Vec<(Symbol, Symbol)>,
    pub bayes_risk: f64,
}

/// Exact Bayes predictor of `y_axis` from `s_axis`.
///
/// Under 0-1 loss ties go to the lowest-index target. Signal values of zero
/// probability map to the first target (0-1) or the marginal mean (squared).
pub fn bayes_optimal_from_joint(
    j: &JointDistribution,
    s_axis: &str,
    y_axis: &str,
    loss: Loss,
) -> Result<BayesOptimal> {
    let m = j.marginal(&[s_axis, y_axis])?;
    let s_sup = m.axes()[0].support.clone();
    let y_sup = m.axes()[1].support.clone();
    let ny = y_sup.len();
    let y_vals: Option<Vec<f64>> = y_sup.iter().map(Symbol::value).collect();
    if loss == Loss::Squared && y_vals.is_none() {
        return Err(HbiError::InvalidSpec(format!("axis `{y_axis}` is not numeric")));
    }
    let y_marg = j.axis_distribution(y_axis)?;
    let mut table = Vec::with_capacity(s_sup.len());
    let mut risk = 0.0;
    for (si, s) in s_sup.iter().enumerate() {
        let row = &m.table()[si * ny..(si + 1) * ny];
        let ps: f64 = row.iter().sum();
        let action = match loss {
            Loss::ZeroOne => {
                let mut best = 0;
                for k in 1..ny {
                    if row[k] > row[best] {
                        best = k;
                    }
                }
                risk += ps - row[best];
                y_sup[best].clone()
            }
            Loss::Squared => {
                let vals = y_vals.as_ref().expect("numeric");
                let mean = if ps > 0.0 {
                    dot(row, vals) / ps
                } else {
                    dot(y_marg.probs(), vals)
                };
                risk += row.iter().zip(vals).map(|(p, v)| p * (v - mean).powi(2)).sum::<f64>();
                Symbol::num(mean)
            }
        };
        table.push((s.clone(), action));
    }
    Ok(BayesOptimal {
        table,
        bayes_risk: risk.max(0.0),
    })
}
