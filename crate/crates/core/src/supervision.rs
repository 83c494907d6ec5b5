//! Supervision channels built from the noise / bias / quantizer decomposition,
//! label corruption, and hybrid score mixing.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{HbiError, Result};
use crate::probcore::{numeric_symbols, Axis, Channel, JointDistribution, RngStream, Symbol};

/// Fraction of each row's mass the output grid must capture.
pub const GRID_COVERAGE: f64 = 0.999;

/// Stochastic part of the human signal.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    #[default]
    None,
    /// Zero-mean Gaussian with standard deviation `scale`.
    Gaussian { scale: f64 },
    /// With probability `rate` the quantized value moves to a uniformly chosen other level.
    Flip { rate: f64 },
    /// Explicit row-stochastic transition matrix over quantizer levels.
    FlipMatrix { matrix: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasEntry {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Deterministic preference distortion `b(x)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BiasSpec {
    #[default]
    None,
    /// `δᵀx`.
    Linear { delta: Vec<f64> },
    /// Lookup on exact feature vectors.
    Table { entries: Vec<BiasEntry> },
}

impl BiasSpec {
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        match self {
            BiasSpec::None => Ok(0.0),
            BiasSpec::Linear { delta } => {
                if delta.len() != x.len() {
                    return Err(HbiError::Shape(format!(
                        "bias vector has {} entries, features have {}",
                        delta.len(),
                        x.len()
                    )));
                }
                Ok(delta.iter().zip(x).map(|(d, v)| d * v).sum())
            }
            BiasSpec::Table { entries } => entries
                .iter()
                .find(|e| e.x == x)
                .map(|e| e.value)
                .ok_or_else(|| HbiError::InvalidSpec(format!("no bias entry for x = {x:?}"))),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            BiasSpec::None => true,
            BiasSpec::Linear { delta } => delta.iter().all(|d| *d == 0.0),
            BiasSpec::Table { entries } => entries.iter().all(|e| e.value == 0.0),
        }
    }
}

/// Semantic compression. No edges means the identity map.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    #[serde(default)]
    pub edges: Vec<f64>,
}

impl QuantizerSpec {
    pub fn identity() -> Self {
        QuantizerSpec { edges: Vec::new() }
    }

    pub fn with_edges(edges: Vec<f64>) -> Self {
        QuantizerSpec { edges }
    }

    pub fn is_identity(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len().saturating_sub(1)
    }

    /// Bin midpoints in order.
    pub fn representatives(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Bin index of `y` and whether it had to be clamped into range.
    /// Bins are half-open `[e_i, e_{i+1})` except the last, which is closed.
    pub fn bin_of(&self, y: f64) -> (usize, bool) {
        let n = self.n_bins();
        let first = self.edges[0];
        let last = self.edges[n];
        if y < first {
            return (0, true);
        }
        if y > last {
            return (n - 1, true);
        }
        let pos = self.edges[1..n].partition_point(|e| *e <= y);
        (pos, false)
    }

    /// `q(y)` and the clamp flag. Identity quantizers never clamp.
    pub fn quantize(&self, y: f64) -> (f64, bool) {
        if self.is_identity() {
            return (y, false);
        }
        let (bin, clamped) = self.bin_of(y);
        (0.5 * (self.edges[bin] + self.edges[bin + 1]), clamped)
    }
}

/// The three-part human signal model `S = q(Y*) + ε + b(X)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SupervisionSpec {
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub bias: BiasSpec,
    #[serde(default)]
    pub quantizer: QuantizerSpec,
}

impl SupervisionSpec {
    pub fn identity() -> Self {
        SupervisionSpec::default()
    }

    pub fn validate(&self) -> Result<()> {
        let edges = &self.quantizer.edges;
        if edges.len() == 1 {
            return Err(HbiError::InvalidSpec("a quantizer needs at least two edges".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HbiError::InvalidSpec(
                "quantizer edges must be finite and strictly increasing".into(),
            ));
        }
        match &self.noise {
            NoiseSpec::None => {}
            NoiseSpec::Gaussian { scale } => {
                if !scale.is_finite() || *scale < 0.0 {
                    return Err(HbiError::InvalidSpec(format!("noise scale {scale} < 0")));
                }
            }
            NoiseSpec::Flip { rate } => {
                if !(0.0..=1.0).contains(rate) {
                    return Err(HbiError::InvalidSpec(format!("flip rate {rate} outside [0, 1]")));
                }
            }
            NoiseSpec::FlipMatrix { matrix } => {
                let m = matrix.len();
                for row in matrix {
                    let total: f64 = row.iter().sum();
                    if row.len() != m
                        || row.iter().any(|p| !p.is_finite() || *p < 0.0)
                        || (total - 1.0).abs() > 1e-12
                    {
                        return Err(HbiError::InvalidSpec(
                            "flip matrix must be square and row-stochastic".into(),
                        ));
                    }
                }
            }
        }
        if let BiasSpec::Linear { delta } = &self.bias {
            if delta.iter().any(|d| !d.is_finite()) {
                return Err(HbiError::InvalidSpec("bias vector must be finite".into()));
            }
        }
        Ok(())
    }

    /// Same spec with only the noise mechanism active.
    pub fn noise_only(&self) -> Self {
        SupervisionSpec {
            noise: self.noise.clone(),
            ..SupervisionSpec::default()
        }
    }

    pub fn bias_only(&self) -> Self {
        SupervisionSpec {
            bias: self.bias.clone(),
            ..SupervisionSpec::default()
        }
    }

    pub fn quantizer_only(&self) -> Self {
        SupervisionSpec {
            quantizer: self.quantizer.clone(),
            ..SupervisionSpec::default()
        }
    }
}

/// Output of [`apply_decomposition`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decomposed {
    pub value: f64,
    /// `y*` fell outside the quantizer range and was clamped to the outer bin.
    pub clamped: bool,
}

/// Draws one human signal for a latent value `y_star` at features `x`.
pub fn apply_decomposition(
    y_star: f64,
    x: &[f64],
    spec: &SupervisionSpec,
    rng: &mut RngStream,
) -> Result<Decomposed> {
    let (mut level, clamped) = spec.quantizer.quantize(y_star);
    let mut noise = 0.0;
    match &spec.noise {
        NoiseSpec::None => {}
        NoiseSpec::Gaussian { scale } => {
            let z: f64 = StandardNormal.sample(rng);
            noise = scale * z;
        }
        NoiseSpec::Flip { rate } => {
            let reps = discrete_levels(spec)?;
            let (bin, _) = spec.quantizer.bin_of(y_star);
            if reps.len() > 1 && rng.random_bool(*rate) {
                let mut other = rng.random_range(0..reps.len() - 1);
                if other >= bin {
                    other += 1;
                }
                level = reps[other];
            }
        }
        NoiseSpec::FlipMatrix { matrix } => {
            let reps = discrete_levels(spec)?;
            if matrix.len() != reps.len() {
                return Err(HbiError::Shape(format!(
                    "flip matrix is {0}x{0} but the quantizer has {1} levels",
                    matrix.len(),
                    reps.len()
                )));
            }
            let (bin, _) = spec.quantizer.bin_of(y_star);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = reps.len() - 1;
            for (k, p) in matrix[bin].iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            level = reps[pick];
        }
    }
    let bias = spec.bias.evaluate(x)?;
    Ok(Decomposed {
        value: level + noise + bias,
        clamped,
    })
}

fn discrete_levels(spec: &SupervisionSpec) -> Result<Vec<f64>> {
    if spec.quantizer.is_identity() {
        return Err(HbiError::InvalidSpec(
            "flip noise on a scalar signal needs a quantizer to define its levels".into(),
        ));
    }
    Ok(spec.quantizer.representatives())
}

fn std_normal_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        1.0
    } else if z == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-z / std::f64::consts::SQRT_2)
    }
}

fn point_row(grid: &[f64], value: f64) -> Option<Vec<f64>> {
    let k = grid_index(grid, value)?;
    let mut r = vec![0.0; grid.len()];
    r[k] = 1.0;
    Some(r)
}

fn grid_index(grid: &[f64], value: f64) -> Option<usize> {
    grid.iter().position(|g| (g - value).abs() <= 1e-9)
}

/// Channel `P(S | Y*)` at a fixed feature context `x`.
///
/// Discrete mechanisms give exact rows over `s_grid`; Gaussian noise is
/// discretized into cells whose boundaries are the midpoints between grid
/// points, with the outer cells extending half a spacing past the ends.
pub fn build_human_channel(
    spec: &SupervisionSpec,
    y_support: &[f64],
    s_grid: &[f64],
    x: &[f64],
) -> Result<Channel> {
    spec.validate()?;
    if s_grid.is_empty() || s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HbiError::Shape("output grid must be nonempty and strictly increasing".into()));
    }
    let bias = spec.bias.evaluate(x)?;
    let m = s_grid.len();
    let mut rows = Vec::with_capacity(y_support.len());
    for &y in y_support {
        let (level, _) = spec.quantizer.quantize(y);
        let base = level + bias;
        let missing = |coverage: f64| HbiError::GridCoverage {
            input: format!("{y}"),
            coverage,
            required: GRID_COVERAGE,
        };
        let row = match &spec.noise {
            NoiseSpec::None => point_row(s_grid, base).ok_or_else(|| missing(0.0))?,
            NoiseSpec::Gaussian { scale } if *scale == 0.0 => {
                point_row(s_grid, base).ok_or_else(|| missing(0.0))?
            }
            NoiseSpec::Gaussian { scale } => {
                let mut bounds = Vec::with_capacity(m + 1);
                let lo_step = if m > 1 { s_grid[1] - s_grid[0] } else { 1.0 };
                let hi_step = if m > 1 { s_grid[m - 1] - s_grid[m - 2] } else { 1.0 };
                bounds.push(s_grid[0] - 0.5 * lo_step);
                for w in s_grid.windows(2) {
                    bounds.push(0.5 * (w[0] + w[1]));
                }
                bounds.push(s_grid[m - 1] + 0.5 * hi_step);
                let cdf: Vec<f64> = bounds
                    .iter()
                    .map(|b| std_normal_cdf((b - base) / scale))
                    .collect();
                let mass: Vec<f64> = cdf.windows(2).map(|c| (c[1] - c[0]).max(0.0)).collect();
                let coverage: f64 = mass.iter().sum();
                if coverage < GRID_COVERAGE {
                    return Err(missing(coverage));
                }
                mass.iter().map(|p| p / coverage).collect()
            }
            NoiseSpec::Flip { rate } => {
                let k = grid_index(s_grid, base).ok_or_else(|| missing(0.0))?;
                if m == 1 {
                    vec![1.0]
                } else {
                    let off = rate / (m - 1) as f64;
                    (0..m).map(|j| if j == k { 1.0 - rate } else { off }).collect()
                }
            }
            NoiseSpec::FlipMatrix { matrix } => {
                if matrix.len() != m {
                    return Err(HbiError::Shape(format!(
                        "flip matrix is {0}x{0} but the grid has {m} points",
                        matrix.len()
                    )));
                }
                let k = grid_index(s_grid, base).ok_or_else(|| missing(0.0))?;
                matrix[k].clone()
            }
        };
        rows.push(row);
    }
    Channel::from_weights(numeric_symbols(y_support), numeric_symbols(s_grid), rows)
}

/// Which candidate of a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn flipped(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    /// `A` when `diff = score_a − score_b > 0`, `B` when negative, `None` on a tie.
    pub fn from_diff(diff: f64) -> Option<Side> {
        if diff > 0.0 {
            Some(Side::A)
        } else if diff < 0.0 {
            Some(Side::B)
        } else {
            None
        }
    }

    /// `+1` for `A`, `−1` for `B`.
    pub fn sign(self) -> f64 {
        match self {
            Side::A => 1.0,
            Side::B => -1.0,
        }
    }
}

/// One comparison between two candidates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub pair_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features_a: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features_b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_h_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_h_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_m_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_m_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_a_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_a_b: Option<f64>,
    pub label: Side,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Side>,
}

impl PreferencePair {
    pub fn new(pair_id: impl Into<String>, label: Side) -> Self {
        PreferencePair {
            pair_id: pair_id.into(),
            features_a: Vec::new(),
            features_b: Vec::new(),
            s_h_a: None,
            s_h_b: None,
            s_m_a: None,
            s_m_b: None,
            s_a_a: None,
            s_a_b: None,
            label,
            truth: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.features_a.len() != self.features_b.len() {
            return Err(HbiError::Shape(format!(
                "pair `{}` has feature vectors of length {} and {}",
                self.pair_id,
                self.features_a.len(),
                self.features_b.len()
            )));
        }
        Ok(())
    }

    /// Feature difference `φ_a − φ_b`.
    pub fn feature_diff(&self) -> Vec<f64> {
        self.features_a
            .iter()
            .zip(&self.features_b)
            .map(|(a, b)| a - b)
            .collect()
    }
}

/// Symmetric label noise on preference labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub flip_rate: f64,
}

impl CorruptionSpec {
    pub fn new(flip_rate: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&flip_rate) {
            return Err(HbiError::InvalidSpec(format!(
                "flip rate {flip_rate} outside [0, 0.5]"
            )));
        }
        Ok(CorruptionSpec { flip_rate })
    }
}

/// Swaps each label independently with probability `flip_rate`.
/// One uniform draw is consumed per pair regardless of the rate.
pub fn corrupt_labels(
    pairs: &[PreferencePair],
    spec: CorruptionSpec,
    rng: &mut RngStream,
) -> Vec<PreferencePair> {
    pairs
        .iter()
        .map(|p| {
            let u: f64 = rng.random();
            let mut out = p.clone();
            if u < spec.flip_rate {
                out.label = p.label.flipped();
            }
            out
        })
        .collect()
}

/// Mixing weights over the human, model and auxiliary channels plus the
/// auxiliary scale `lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_mix: f64,
    pub lambda: f64,
}

impl HybridWeights {
    pub fn new(alpha: f64, beta: f64, gamma_mix: f64, lambda: f64) -> Result<Self> {
        let w = HybridWeights {
            alpha,
            beta,
            gamma_mix,
            lambda,
        };
        w.validate()?;
        Ok(w)
    }

    /// Two-channel convention: `beta = 0`, `gamma_mix = 1 − alpha`.
    pub fn two_channel(alpha: f64, lambda: f64) -> Result<Self> {
        HybridWeights::new(alpha, 0.0, 1.0 - alpha, lambda)
    }

    pub fn human_only() -> Self {
        HybridWeights {
            alpha: 1.0,
            beta: 0.0,
            gamma_mix: 0.0,
            lambda: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma_mix", self.gamma_mix)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(HbiError::InvalidSpec(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if ((self.alpha + self.beta + self.gamma_mix) - 1.0).abs() > 1e-12 {
            return Err(HbiError::InvalidSpec("mixing weights must sum to 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(HbiError::InvalidSpec(format!("lambda = {} must be positive", self.lambda)));
        }
        Ok(())
    }
}

/// `α·s_m + (1 − α)·λ·s_a`.
pub fn hybrid_score(weights: &HybridWeights, s_m: f64, s_a: f64) -> f64 {
    weights.alpha * s_m + (1.0 - weights.alpha) * weights.lambda * s_a
}

/// `α·s_h + (1 − α)·s_a` for a binary auxiliary indicator.
pub fn hybrid_score_binary(alpha: f64, s_h: f64, s_a: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(HbiError::InvalidSpec(format!("alpha = {alpha} outside [0, 1]")));
    }
    if s_a != 0.0 && s_a != 1.0 {
        return Err(HbiError::InvalidSpec(format!("auxiliary indicator {s_a} not in {{0, 1}}")));
    }
    Ok(alpha * s_h + (1.0 - alpha) * s_a)
}

/// Batch z-scores.
#[derive(Clone, Debug, PartialEq)]
pub struct ZScores {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Population std fell below `1e-12`; every value was mapped to zero.
    pub degenerate: bool,
}

/// `(x − mean) / std` with the population standard deviation.
pub fn zscore_normalize(scores: &[f64]) -> Result<ZScores> {
    if scores.len() < 2 {
        return Err(HbiError::BatchTooSmall(scores.len()));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return Ok(ZScores {
            values: vec![0.0; scores.len()],
            mean,
            std,
            degenerate: true,
        });
    }
    Ok(ZScores {
        values: scores.iter().map(|x| (x - mean) / std).collect(),
        mean,
        std,
        degenerate: false,
    })
}

/// Combination rule for [`combine_signals`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombineRule {
    WeightedSum,
    /// Lossless tuple of the active signals.
    Concatenation,
    /// A single joint symbol of the active signals.
    ProductChannel,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MixedSignal {
    Scalar(f64),
    Tuple(Vec<f64>),
    Symbol(Symbol),
}

fn active_signals(
    weights: &HybridWeights,
    s_h: Option<f64>,
    s_m: Option<f64>,
    s_a: Option<f64>,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (name, w, s) in [
        ("s_h", weights.alpha, s_h),
        ("s_m", weights.beta, s_m),
        ("s_a", weights.gamma_mix, s_a),
    ] {
        if w != 0.0 {
            let v = s.ok_or_else(|| HbiError::MissingSignal(name.to_string()))?;
            out.push((w, v));
        }
    }
    Ok(out)
}

/// Mixes up to three signals. Signals with zero weight are dropped by every rule.
pub fn combine_signals(
    rule: CombineRule,
    weights: &HybridWeights,
    s_h: Option<f64>,
    s_m: Option<f64>,
    s_a: Option<f64>,
) -> Result<MixedSignal> {
    let active = active_signals(weights, s_h, s_m, s_a)?;
    Ok(match rule {
        CombineRule::WeightedSum => MixedSignal::Scalar(active.iter().map(|(w, v)| w * v).sum()),
        CombineRule::Concatenation => MixedSignal::Tuple(active.iter().map(|(_, v)| *v).collect()),
        CombineRule::ProductChannel => MixedSignal::Symbol(Symbol::new(
            active
                .iter()
                .map(|(_, v)| format!("{v}"))
                .collect::<Vec<_>>()
                .join("|"),
        )),
    })
}

/// Law of `(Y*, S_mix)` when the three signal axes of `joint` are combined.
///
/// `axes` names the `(h, m, a)` signal axes; absent axes must carry zero weight.
/// Weighted sums need numeric symbols; the other rules merge the active axes.
pub fn combine_joint(
    joint: &JointDistribution,
    rule: CombineRule,
    weights: &HybridWeights,
    y_axis: &str,
    axes: [Option<&str>; 3],
    out_name: &str,
) -> Result<JointDistribution> {
    let names = ["s_h", "s_m", "s_a"];
    let ws = [weights.alpha, weights.beta, weights.gamma_mix];
    let mut active = Vec::new();
    for k in 0..3 {
        if ws[k] != 0.0 {
            let axis = axes[k].ok_or_else(|| HbiError::MissingSignal(names[k].to_string()))?;
            if !joint.has_axis(axis) {
                return Err(HbiError::MissingSignal(names[k].to_string()));
            }
            active.push((ws[k], axis));
        }
    }
    if active.is_empty() {
        return Err(HbiError::InvalidSpec("no active signal".into()));
    }
    let mut order = vec![y_axis];
    order.extend(active.iter().map(|(_, a)| *a));
    let sub = joint.marginal(&order)?;
    match rule {
        CombineRule::Concatenation | CombineRule::ProductChannel => {
            let merge: Vec<&str> = active.iter().map(|(_, a)| *a).collect();
            sub.merge_axes(&merge, out_name)
        }
        CombineRule::WeightedSum => {
            let values: Vec<Vec<f64>> = sub.axes()[1..]
                .iter()
                .map(|ax| {
                    ax.support
                        .iter()
                        .map(|s| {
                            s.value().ok_or_else(|| {
                                HbiError::InvalidSpec(format!(
                                    "weighted sum needs numeric symbols, got `{s}`"
                                ))
                            })
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            let y_support = sub.axes()[0].support.clone();
            let mut mass: Vec<BTreeMap<String, f64>> = vec![BTreeMap::new(); y_support.len()];
            let mut keys: BTreeMap<String, f64> = BTreeMap::new();
            for (flat, &p) in sub.table().iter().enumerate() {
                let idx = sub.unravel(flat);
                let mixed: f64 = active
                    .iter()
                    .enumerate()
                    .map(|(k, (w, _))| w * values[k][idx[k + 1]])
                    .sum();
                // Round to 12 significant decimals so equal mixes share a symbol.
                let key = format!("{:.12}", mixed);
                keys.insert(key.clone(), mixed);
                *mass[idx[0]].entry(key).or_insert(0.0) += p;
            }
            let mut ordered: Vec<(f64, String)> = keys.into_iter().map(|(k, v)| (v, k)).collect();
            ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
            let support: Vec<Symbol> = ordered.iter().map(|(v, _)| Symbol::num(*v)).collect();
            let mut table = Vec::with_capacity(y_support.len() * support.len());
            for row in &mass {
                for (_, key) in &ordered {
                    table.push(row.get(key).copied().unwrap_or(0.0));
                }
            }
            JointDistribution::from_weights(
                vec![Axis::new(y_axis, y_support), Axis::new(out_name, support)],
                table,
            )
        }
    }
}
