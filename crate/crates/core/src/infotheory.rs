//! Exact discrete information measures and Blahut–Arimoto solvers.
//!
//! Everything is reported in bits. Solvers work in nats internally and convert
//! on the way out; Lagrange slopes of rate–distortion curves are in nats per
//! unit distortion.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HbiError, Result};
use crate::probcore::{joint_from_chain, ChainStructure, Channel, Distribution, JointDistribution};

/// Values this close below zero are treated as zero information.
pub const MI_CLAMP: f64 = 1e-12;

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn digest_of<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable input");
    hex::encode(Sha256::digest(&bytes))
}

fn plogp_bits(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits, `0·log 0 = 0`.
pub fn entropy(d: &Distribution) -> f64 {
    d.probs().iter().map(|&p| plogp_bits(p)).sum()
}

/// Binary entropy function in bits.
pub fn binary_entropy(p: f64) -> f64 {
    plogp_bits(p) + plogp_bits(1.0 - p)
}

/// Joint entropy of a set of axes. The empty set has entropy zero.
pub fn entropy_of(j: &JointDistribution, axes: &[&str]) -> Result<f64> {
    if axes.is_empty() {
        return Ok(0.0);
    }
    let m = j.marginal(axes)?;
    Ok(m.table().iter().map(|&p| plogp_bits(p)).sum())
}

fn clamp_information(v: f64) -> f64 {
    if (-MI_CLAMP..0.0).contains(&v) {
        0.0
    } else {
        v.max(0.0)
    }
}

/// `I(A; B)` between two axes.
pub fn mutual_information(j: &JointDistribution, a: &str, b: &str) -> Result<f64> {
    mutual_information_sets(j, &[a], &[b])
}

/// `I(A; B)` between two sets of axes.
pub fn mutual_information_sets(j: &JointDistribution, a: &[&str], b: &[&str]) -> Result<f64> {
    let mut ab: Vec<&str> = a.to_vec();
    ab.extend_from_slice(b);
    let v = entropy_of(j, a)? + entropy_of(j, b)? - entropy_of(j, &ab)?;
    Ok(clamp_information(v))
}

/// `I(A; B | C)` for sets of axes.
pub fn conditional_mi(j: &JointDistribution, a: &[&str], b: &[&str], given: &[&str]) -> Result<f64> {
    let ag = [a, given].concat();
    let bg = [b, given].concat();
    let abg = [a, b, given].concat();
    let v = entropy_of(j, &ag)? + entropy_of(j, &bg)? - entropy_of(j, &abg)?
        - entropy_of(j, given)?;
    Ok(clamp_information(v))
}

/// Chain-rule split of the hybrid capacity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MIDecomposition {
    pub i_h: f64,
    pub i_m_given_h: f64,
    pub i_a_given_hm: f64,
    /// Sum of the three terms.
    pub c_mix: f64,
    /// `I(Y*; S_H, S_M, S_A)` computed from the full joint.
    pub c_mix_direct: f64,
}

/// `I(Y*; S_H) + I(Y*; S_M | S_H) + I(Y*; S_A | S_H, S_M)`.
pub fn chain_rule_decomposition(
    j: &JointDistribution,
    y: &str,
    h: &str,
    m: &str,
    a: &str,
) -> Result<MIDecomposition> {
    let i_h = mutual_information(j, y, h)?;
    let i_m_given_h = conditional_mi(j, &[y], &[m], &[h])?;
    let i_a_given_hm = conditional_mi(j, &[y], &[a], &[h, m])?;
    let c_mix_direct = mutual_information_sets(j, &[y], &[h, m, a])?;
    Ok(MIDecomposition {
        i_h,
        i_m_given_h,
        i_a_given_hm,
        c_mix: i_h + i_m_given_h + i_a_given_hm,
        c_mix_direct,
    })
}

/// `I(Y*; S) − I(Y*; Θ)` on a joint built as the chain `Y* → S → Θ`.
pub fn verify_dpi(j: &JointDistribution, y: &str, s: &str, theta: &str) -> Result<f64> {
    Ok(mutual_information(j, y, s)? - mutual_information(j, y, theta)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub capacity_bits: f64,
    pub optimal_input: Distribution,
    pub iterations: usize,
    /// Width of the final capacity bracket, in bits.
    pub gap: f64,
}

/// Channel capacity by Blahut–Arimoto alternating maximization.
///
/// Each iteration brackets the capacity between `log Σ p(x) c(x)` and
/// `log max c(x)`, where `c(x) = exp D(W(·|x) ‖ q)`; the solver stops once the
/// bracket is at most `tol` bits wide and reports its midpoint.
pub fn channel_capacity_ba(ch: &Channel, tol: f64, max_iter: usize) -> Result<CapacityResult> {
    if !(tol > 0.0) {
        return Err(HbiError::InvalidSpec(format!("tolerance {tol} must be positive")));
    }
    let n = ch.n_inputs();
    let mut p = vec![1.0 / n as f64; n];
    let mut lower = 0.0;
    let mut upper = f64::INFINITY;
    for iter in 1..=max_iter {
        let mut q = vec![0.0; ch.n_outputs()];
        for (px, row) in p.iter().zip(ch.rows()) {
            for (qy, w) in q.iter_mut().zip(row) {
                *qy += px * w;
            }
        }
        let div: Vec<f64> = ch
            .rows()
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&q)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, qy)| w * (w / qy).ln())
                    .sum::<f64>()
            })
            .collect();
        let dmax = div.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // Scale by exp(-dmax) to keep the weights bounded.
        let c: Vec<f64> = div.iter().map(|d| (d - dmax).exp()).collect();
        let total: f64 = p.iter().zip(&c).map(|(a, b)| a * b).sum();
        lower = (total.ln() + dmax) / LN_2;
        upper = dmax / LN_2;
        if upper - lower <= tol {
            let input = Distribution::new(ch.input_support().to_vec(), normalized(&p))?;
            return Ok(CapacityResult {
                capacity_bits: (0.5 * (lower + upper)).max(0.0),
                optimal_input: input,
                iterations: iter,
                gap: upper - lower,
            });
        }
        for (px, cx) in p.iter_mut().zip(&c) {
            *px *= cx / total;
        }
    }
    Err(HbiError::NonConvergence {
        iterations: max_iter,
        lower,
        upper,
    })
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

/// A nonnegative distortion `d(y, ŷ)`, rows indexed by source symbol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionMatrix {
    pub name: String,
    pub rows: Vec<Vec<f64>>,
}

impl DistortionMatrix {
    pub fn new(name: impl Into<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(HbiError::InvalidDistortion("matrix must be rectangular and nonempty".into()));
        }
        if rows.iter().flatten().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(HbiError::InvalidDistortion("entries must be finite and nonnegative".into()));
        }
        Ok(DistortionMatrix {
            name: name.into(),
            rows,
        })
    }

    pub fn hamming(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        DistortionMatrix {
            name: "hamming".into(),
            rows,
        }
    }

    /// `(y − ŷ)²` between numeric source and reproduction points.
    pub fn squared(source: &[f64], reproduction: &[f64]) -> Self {
        DistortionMatrix {
            name: "squared".into(),
            rows: source
                .iter()
                .map(|y| reproduction.iter().map(|r| (y - r).powi(2)).collect())
                .collect(),
        }
    }

    /// `|y − ŷ|` between numeric source and reproduction points.
    pub fn absolute(source: &[f64], reproduction: &[f64]) -> Self {
        DistortionMatrix {
            name: "absolute".into(),
            rows: source
                .iter()
                .map(|y| reproduction.iter().map(|r| (y - r).abs()).collect())
                .collect(),
        }
    }

    pub fn n_source(&self) -> usize {
        self.rows.len()
    }

    pub fn n_reproduction(&self) -> usize {
        self.rows[0].len()
    }

    /// Bayes distortion at unbounded rate, `Σ_y p(y) min_ŷ d(y, ŷ)`.
    pub fn d_star(&self, source: &Distribution) -> f64 {
        source
            .probs()
            .iter()
            .zip(&self.rows)
            .map(|(p, row)| p * row.iter().cloned().fold(f64::INFINITY, f64::min))
            .sum()
    }

    /// Distortion of the best constant reproduction, `min_ŷ Σ_y p(y) d(y, ŷ)`.
    pub fn d_max(&self, source: &Distribution) -> f64 {
        (0..self.n_reproduction())
            .map(|k| {
                source
                    .probs()
                    .iter()
                    .zip(&self.rows)
                    .map(|(p, row)| p * row[k])
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn check_against(&self, source: &Distribution) -> Result<()> {
        if self.n_source() != source.len() {
            return Err(HbiError::Shape(format!(
                "distortion matrix has {} rows for a source of size {}",
                self.n_source(),
                source.len()
            )));
        }
        if self.rows.iter().flatten().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(HbiError::InvalidDistortion("entries must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// One point on a rate–distortion curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    /// Lagrange slope in nats per unit distortion (tangent of the curve).
    pub slope: f64,
    pub distortion: f64,
    pub rate_bits: f64,
}

impl RdPoint {
    /// Tangent slope in bits per unit distortion.
    pub fn slope_bits(&self) -> f64 {
        self.slope / LN_2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateDistortionCurve {
    pub points: Vec<RdPoint>,
    pub source: Distribution,
    pub distortion_name: String,
    pub d_star: f64,
    pub d_max: f64,
}

/// Convergence tolerance of each slope solve, in nats.
pub const RD_TOL: f64 = 1e-9;
pub const RD_MAX_ITER: usize = 5_000_000;

/// Solves one Lagrange-slope point by Blahut's alternating minimization.
///
/// Stops when the gap between Blahut's lower and upper bounds on `R(D_s)`
/// falls under `tol` nats.
pub fn rd_point_at_slope(
    source: &Distribution,
    dist: &DistortionMatrix,
    slope: f64,
    tol: f64,
    max_iter: usize,
) -> Result<RdPoint> {
    dist.check_against(source)?;
    if !(slope < 0.0) {
        return Err(HbiError::InvalidSpec(format!("slope {slope} must be negative")));
    }
    let p = source.probs();
    let m = dist.n_reproduction();
    // Shift each row by its minimum so the exponentials never all underflow.
    let kernel: Vec<Vec<f64>> = dist
        .rows
        .iter()
        .map(|row| {
            let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
            row.iter().map(|d| (slope * (d - lo)).exp()).collect()
        })
        .collect();
    let mut q = vec![1.0 / m as f64; m];
    let mut converged = false;
    let mut gap = f64::INFINITY;
    for _ in 0..max_iter {
        let z: Vec<f64> = kernel
            .iter()
            .map(|row| row.iter().zip(&q).map(|(k, qk)| k * qk).sum())
            .collect();
        let mut c = vec![0.0; m];
        for ((py, row), zy) in p.iter().zip(&kernel).zip(&z) {
            if *py == 0.0 {
                continue;
            }
            for (ck, k) in c.iter_mut().zip(row) {
                *ck += py * k / zy;
            }
        }
        let max_log_c = c
            .iter()
            .filter(|ck| **ck > 0.0)
            .map(|ck| ck.ln())
            .fold(f64::NEG_INFINITY, f64::max);
        let mean_log_c: f64 = q
            .iter()
            .zip(&c)
            .filter(|(qk, ck)| **qk > 0.0 && **ck > 0.0)
            .map(|(qk, ck)| qk * ck * ck.ln())
            .sum();
        gap = max_log_c - mean_log_c;
        for (qk, ck) in q.iter_mut().zip(&c) {
            *qk *= ck;
        }
        let total: f64 = q.iter().sum();
        q.iter_mut().for_each(|qk| *qk /= total);
        if gap <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(HbiError::NonConvergence {
            iterations: max_iter,
            lower: 0.0,
            upper: gap,
        });
    }

    // Test channel Q(ŷ|y) ∝ q(ŷ) e^{s d(y, ŷ)} and its rate / distortion.
    let mut distortion = 0.0;
    let mut rate = 0.0;
    for ((py, row), drow) in p.iter().zip(&kernel).zip(&dist.rows) {
        if *py == 0.0 {
            continue;
        }
        let zy: f64 = row.iter().zip(&q).map(|(k, qk)| k * qk).sum();
        for k in 0..m {
            let cond = q[k] * row[k] / zy;
            if cond > 0.0 {
                distortion += py * cond * drow[k];
                rate += py * cond * (cond / q[k]).ln();
            }
        }
    }
    Ok(RdPoint {
        slope,
        distortion,
        rate_bits: (rate / LN_2).max(0.0),
    })
}

/// A geometric grid of slopes from `−50` to `−0.01`, most negative first.
pub fn default_slopes() -> Vec<f64> {
    let n = 160;
    let (lo, hi) = (0.01f64.ln(), 50f64.ln());
    (0..n)
        .rev()
        .map(|i| -(lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Traces `R(D)` with one alternating minimization per slope.
pub fn rate_distortion_ba(
    source: &Distribution,
    dist: &DistortionMatrix,
    slopes: &[f64],
) -> Result<RateDistortionCurve> {
    dist.check_against(source)?;
    if slopes.is_empty() || slopes.iter().any(|s| !(*s < 0.0)) {
        return Err(HbiError::InvalidSpec("slopes must be nonempty and strictly negative".into()));
    }
    let mut sorted = slopes.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.dedup();

    let mut points: Vec<RdPoint> = Vec::with_capacity(sorted.len());
    for &s in &sorted {
        let pt = rd_point_at_slope(source, dist, s, RD_TOL, RD_MAX_ITER)?;
        match points.last() {
            Some(prev) if pt.distortion <= prev.distortion => {}
            _ => points.push(pt),
        }
    }
    // Enforce the monotone envelope against solver jitter at the 1e-9 level.
    for k in 1..points.len() {
        if points[k].rate_bits > points[k - 1].rate_bits {
            points[k].rate_bits = points[k - 1].rate_bits;
        }
    }
    Ok(RateDistortionCurve {
        points,
        source: source.clone(),
        distortion_name: dist.name.clone(),
        d_star: dist.d_star(source),
        d_max: dist.d_max(source),
    })
}

/// Solves for the curve point whose distortion equals `target` by bisection on
/// `ln(−slope)`. Targets outside `[D(−1e4), D(−1e-6)]` return the end point.
pub fn rd_point_at_distortion(
    source: &Distribution,
    dist: &DistortionMatrix,
    target: f64,
) -> Result<RdPoint> {
    let solve = |t: f64| rd_point_at_slope(source, dist, -t.exp(), RD_TOL, RD_MAX_ITER);
    let (mut lo, mut hi) = (1e-6f64.ln(), 1e4f64.ln());
    // lo ↔ large distortion, hi ↔ small distortion.
    let at_hi = solve(hi)?;
    if target <= at_hi.distortion {
        return Ok(at_hi);
    }
    let at_lo = solve(lo)?;
    if target >= at_lo.distortion {
        return Ok(at_lo);
    }
    let mut best = at_hi;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let pt = solve(mid)?;
        best = pt;
        if (pt.distortion - target).abs() <= 1e-13 {
            break;
        }
        if pt.distortion > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Solves for the curve point whose rate equals `c_bits` by slope bisection.
pub fn rd_point_at_rate(
    source: &Distribution,
    dist: &DistortionMatrix,
    c_bits: f64,
) -> Result<RdPoint> {
    let solve = |t: f64| rd_point_at_slope(source, dist, -t.exp(), RD_TOL, RD_MAX_ITER);
    let (mut lo, mut hi) = (1e-6f64.ln(), 1e4f64.ln());
    let at_hi = solve(hi)?;
    if c_bits >= at_hi.rate_bits {
        return Ok(at_hi);
    }
    let at_lo = solve(lo)?;
    if c_bits <= at_lo.rate_bits {
        return Ok(at_lo);
    }
    let mut best = at_hi;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let pt = solve(mid)?;
        best = pt;
        if (pt.rate_bits - c_bits).abs() <= 1e-12 {
            break;
        }
        if pt.rate_bits > c_bits {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InverseRegime {
    /// The rate lies on the traced curve.
    Interpolated,
    /// The rate exceeds every traced point; the constraint does not bind.
    NonBinding,
    /// Zero rate forces the best constant reproduction.
    ZeroRate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdInverse {
    pub distortion: f64,
    /// The true inverse lies in `[distortion − error_bound, distortion]`.
    pub error_bound: f64,
    pub regime: InverseRegime,
}

/// Monotone piecewise-linear inverse of a traced curve at rate `c_bits`.
///
/// Chords of a convex curve lie above it, so the interpolated distortion
/// overestimates the true inverse; the tangent lines at the segment's end
/// points give the lower end of the reported error bound.
pub fn invert_rate_distortion(curve: &RateDistortionCurve, c_bits: f64) -> Result<RdInverse> {
    if c_bits <= 0.0 {
        return Ok(RdInverse {
            distortion: curve.d_max,
            error_bound: 0.0,
            regime: InverseRegime::ZeroRate,
        });
    }
    let mut pts = curve.points.clone();
    if let Some(last) = pts.last() {
        if last.rate_bits > 0.0 && last.distortion < curve.d_max {
            pts.push(RdPoint {
                slope: 0.0,
                distortion: curve.d_max,
                rate_bits: 0.0,
            });
        }
    }
    if pts.len() < 2 {
        return Err(HbiError::Shape("curve needs at least two points to invert".into()));
    }
    if c_bits >= pts[0].rate_bits - RD_TOL {
        return Ok(RdInverse {
            distortion: curve.d_star,
            error_bound: 0.0,
            regime: InverseRegime::NonBinding,
        });
    }
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.rate_bits >= c_bits && c_bits >= b.rate_bits {
            if a.rate_bits == b.rate_bits {
                return Ok(RdInverse {
                    distortion: a.distortion,
                    error_bound: 0.0,
                    regime: InverseRegime::Interpolated,
                });
            }
            let t = (c_bits - a.rate_bits) / (b.rate_bits - a.rate_bits);
            let d = a.distortion + t * (b.distortion - a.distortion);
            let mut lower = a.distortion;
            for p in [a, b] {
                let g = p.slope_bits();
                if g < 0.0 {
                    lower = lower.max(p.distortion + (c_bits - p.rate_bits) / g);
                }
            }
            return Ok(RdInverse {
                distortion: d,
                error_bound: (d - lower).max(0.0),
                regime: InverseRegime::Interpolated,
            });
        }
    }
    // c is below the last traced rate but positive: the terminal point has rate 0.
    Ok(RdInverse {
        distortion: curve.d_max,
        error_bound: 0.0,
        regime: InverseRegime::ZeroRate,
    })
}

/// Which bound a certificate carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FloorKind {
    Info,
    Operator,
    Pacbayes,
    Causal,
    Categorical,
    RlhfGap,
    HbiGamma,
}

/// The noise / preference / semantic split of a floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorComponents {
    pub noise: f64,
    pub pref: f64,
    pub sem: f64,
}

impl FloorComponents {
    pub fn total(&self) -> f64 {
        self.noise + self.pref + self.sem
    }
}

/// A computed lower bound on excess risk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorCertificate {
    pub kind: FloorKind,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<FloorComponents>,
    /// Unrescaled ablation measurements, when the components were rescaled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_components: Option<FloorComponents>,
    pub inputs_digest: String,
    /// Intermediate quantities behind the value.
    #[serde(default)]
    pub details: BTreeMap<String, f64>,
}

impl FloorCertificate {
    pub fn new(kind: FloorKind, value: f64, inputs_digest: String) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(HbiError::InvalidSpec(format!("certificate value {value} is negative")));
        }
        Ok(FloorCertificate {
            kind,
            value,
            components: None,
            raw_components: None,
            inputs_digest,
            details: BTreeMap::new(),
        })
    }

    pub fn with_components(mut self, components: FloorComponents) -> Result<Self> {
        if (components.total() - self.value).abs() > 1e-9 {
            return Err(HbiError::InvalidSpec(format!(
                "components sum to {} but the value is {}",
                components.total(),
                self.value
            )));
        }
        self.components = Some(components);
        Ok(self)
    }

    pub fn with_detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }
}

/// Error bound above which the inverse is re-solved by bisection.
pub const REFINE_THRESHOLD: f64 = 1e-3;

/// `c · max(0, R⁻¹(I(Y*; S)) − D*)` for the given source and human channel.
pub fn info_floor_certificate(
    source: &Distribution,
    ch: &Channel,
    dist: &DistortionMatrix,
    c_link: f64,
) -> Result<FloorCertificate> {
    if !(c_link > 0.0) {
        return Err(HbiError::InvalidSpec(format!("link constant {c_link} must be positive")));
    }
    let joint = joint_from_chain(source, std::slice::from_ref(ch), ChainStructure::Chain, &["y", "s"])?;
    let capacity = mutual_information(&joint, "y", "s")?;
    let curve = rate_distortion_ba(source, dist, &default_slopes())?;
    let mut inv = invert_rate_distortion(&curve, capacity)?;
    if inv.regime == InverseRegime::Interpolated && inv.error_bound > REFINE_THRESHOLD {
        let pt = rd_point_at_rate(source, dist, capacity)?;
        inv.distortion = pt.distortion;
        inv.error_bound = 0.0;
    }
    let d_h = inv.distortion;
    let value = c_link * (d_h - curve.d_star).max(0.0);
    let digest = digest_of(&(source, ch, dist, c_link));
    Ok(FloorCertificate::new(FloorKind::Info, value, digest)?
        .with_detail("capacity_bits", capacity)
        .with_detail("d_h", d_h)
        .with_detail("d_star", curve.d_star)
        .with_detail("d_max", curve.d_max)
        .with_detail("inverse_error_bound", inv.error_bound))
}
