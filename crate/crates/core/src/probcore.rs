//! Finite-support probability objects.
//!
//! Distributions, channels (row-stochastic matrices) and joint tables over
//! named axes, plus the seeded random streams every experiment draws from.
//! All mass lives in linear space as `f64`; validation uses [`MASS_TOL`].

use std::collections::HashSet;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{HbiError, Result};

/// Tolerance on total mass and row sums.
pub const MASS_TOL: f64 = 1e-12;

/// A support point. Numeric symbols keep their shortest round-trip text form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Symbol(String);

impl Symbol {
    pub fn new(name: impl Into<String>) -> Self {
        Symbol(name.into())
    }

    pub fn num(value: f64) -> Self {
        Symbol(format!("{value}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Numeric value of the symbol, when it parses as a number.
    pub fn value(&self) -> Option<f64> {
        self.0.parse().ok()
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol(s.to_string())
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Str(String),
            Int(i64),
            Num(f64),
        }
        Ok(match Raw::deserialize(deserializer)? {
            Raw::Str(s) => Symbol(s),
            Raw::Int(i) => Symbol(i.to_string()),
            Raw::Num(v) => Symbol::num(v),
        })
    }
}

/// Symbols `0..n` named by their index.
pub fn index_symbols(n: usize) -> Vec<Symbol> {
    (0..n).map(|i| Symbol(i.to_string())).collect()
}

/// Symbols for a list of numeric support points.
pub fn numeric_symbols(values: &[f64]) -> Vec<Symbol> {
    values.iter().map(|&v| Symbol::num(v)).collect()
}

fn check_unique(support: &[Symbol], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(support.len());
    for s in support {
        if !seen.insert(s) {
            return Err(HbiError::InvalidDistribution(format!(
                "duplicate symbol `{s}` in {what}"
            )));
        }
    }
    Ok(())
}

fn check_probability_row(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(HbiError::InvalidDistribution(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(HbiError::InvalidDistribution(format!(
            "{what} sums to {total} instead of 1"
        )));
    }
    Ok(())
}

/// A probability distribution over a finite, ordered support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct Distribution {
    support: Vec<Symbol>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    support: Vec<Symbol>,
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for Distribution {
    type Error = HbiError;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        Distribution::new(raw.support, raw.probs)
    }
}

impl Distribution {
    /// Validating constructor; `probs` must already sum to one.
    pub fn new(support: Vec<Symbol>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(HbiError::InvalidDistribution("empty support".into()));
        }
        if support.len() != probs.len() {
            return Err(HbiError::InvalidDistribution(format!(
                "{} symbols but {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        check_unique(&support, "support")?;
        check_probability_row(&probs, "distribution")?;
        Ok(Distribution { support, probs })
    }

    pub fn uniform(support: Vec<Symbol>) -> Result<Self> {
        let n = support.len();
        make_distribution(&vec![1.0; n], support)
    }

    pub fn point_mass(support: Vec<Symbol>, index: usize) -> Result<Self> {
        let mut w = vec![0.0; support.len()];
        if index >= w.len() {
            return Err(HbiError::Shape(format!(
                "point mass index {index} outside support of size {}",
                w.len()
            )));
        }
        w[index] = 1.0;
        make_distribution(&w, support)
    }

    /// Bernoulli law on symbols `0`, `1` with `P(1) = p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        make_distribution(&[1.0 - p, p], index_symbols(2))
    }

    pub fn support(&self) -> &[Symbol] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob_of(&self, symbol: &Symbol) -> Option<f64> {
        self.support
            .iter()
            .position(|s| s == symbol)
            .map(|i| self.probs[i])
    }
}

/// Normalizes nonnegative weights into a distribution over `support`.
pub fn make_distribution(weights: &[f64], support: Vec<Symbol>) -> Result<Distribution> {
    if weights.is_empty() {
        return Err(HbiError::InvalidDistribution("no weights".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(HbiError::InvalidDistribution(
            "weights must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(HbiError::InvalidDistribution("all weights are zero".into()));
    }
    let probs = weights.iter().map(|w| w / total).collect();
    Distribution::new(support, probs)
}

/// A row-stochastic conditional law `P(output | input)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel")]
pub struct Channel {
    input_support: Vec<Symbol>,
    output_support: Vec<Symbol>,
    rows: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawChannel {
    input_support: Vec<Symbol>,
    output_support: Vec<Symbol>,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<RawChannel> for Channel {
    type Error = HbiError;

    fn try_from(raw: RawChannel) -> Result<Self> {
        Channel::new(raw.input_support, raw.output_support, raw.rows)
    }
}

impl Channel {
    pub fn new(
        input_support: Vec<Symbol>,
        output_support: Vec<Symbol>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if input_support.is_empty() || output_support.is_empty() {
            return Err(HbiError::Shape("channel supports must be nonempty".into()));
        }
        if rows.len() != input_support.len() {
            return Err(HbiError::Shape(format!(
                "{} rows for {} inputs",
                rows.len(),
                input_support.len()
            )));
        }
        check_unique(&input_support, "channel input support")?;
        check_unique(&output_support, "channel output support")?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != output_support.len() {
                return Err(HbiError::Shape(format!(
                    "row {i} has {} entries for {} outputs",
                    row.len(),
                    output_support.len()
                )));
            }
            check_probability_row(row, &format!("channel row {i}"))?;
        }
        Ok(Channel {
            input_support,
            output_support,
            rows,
        })
    }

    /// Builds a channel from nonnegative row weights, normalizing each row.
    pub fn from_weights(
        input_support: Vec<Symbol>,
        output_support: Vec<Symbol>,
        weights: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mut rows = Vec::with_capacity(weights.len());
        for w in &weights {
            let d = make_distribution(w, output_support.clone())?;
            rows.push(d.probs);
        }
        Channel::new(input_support, output_support, rows)
    }

    pub fn identity(support: Vec<Symbol>) -> Result<Self> {
        let n = support.len();
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Channel::new(support.clone(), support, rows)
    }

    /// Binary symmetric channel on symbols `0`, `1`.
    pub fn bsc(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(HbiError::InvalidDistribution(format!(
                "crossover probability {p} outside [0, 1]"
            )));
        }
        Channel::new(
            index_symbols(2),
            index_symbols(2),
            vec![vec![1.0 - p, p], vec![p, 1.0 - p]],
        )
    }

    /// Every input maps to the same output law.
    pub fn constant(input_support: Vec<Symbol>, output: &Distribution) -> Result<Self> {
        let rows = vec![output.probs.clone(); input_support.len()];
        Channel::new(input_support, output.support.clone(), rows)
    }

    pub fn input_support(&self) -> &[Symbol] {
        &self.input_support
    }

    pub fn output_support(&self) -> &[Symbol] {
        &self.output_support
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, input: usize) -> &[f64] {
        &self.rows[input]
    }

    pub fn n_inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_support.len()
    }

    /// Groups of input indices whose rows coincide within `tol` (singletons omitted).
    pub fn merged_row_groups(&self, tol: f64) -> Vec<Vec<usize>> {
        let mut assigned = vec![false; self.rows.len()];
        let mut groups = Vec::new();
        for i in 0..self.rows.len() {
            if assigned[i] {
                continue;
            }
            let mut group = vec![i];
            for j in (i + 1)..self.rows.len() {
                if !assigned[j]
                    && self.rows[i]
                        .iter()
                        .zip(&self.rows[j])
                        .all(|(a, b)| (a - b).abs() <= tol)
                {
                    assigned[j] = true;
                    group.push(j);
                }
            }
            if group.len() > 1 {
                groups.push(group);
            }
        }
        groups
    }
}

/// Marginal law of the channel output: `dᵀ · rows`.
pub fn push_forward(d: &Distribution, ch: &Channel) -> Result<Distribution> {
    if d.support != ch.input_support {
        return Err(HbiError::Shape(
            "distribution support differs from channel input support".into(),
        ));
    }
    let mut out = vec![0.0; ch.n_outputs()];
    for (p, row) in d.probs.iter().zip(&ch.rows) {
        for (o, r) in out.iter_mut().zip(row) {
            *o += p * r;
        }
    }
    // Renormalize away accumulated rounding; the sum is already 1 within ~1e-15.
    make_distribution(&out, ch.output_support.clone())
}

/// A named variable in a joint table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub support: Vec<Symbol>,
}

impl Axis {
    pub fn new(name: impl Into<String>, support: Vec<Symbol>) -> Self {
        Axis {
            name: name.into(),
            support,
        }
    }
}

/// How channels attach to the source in [`joint_from_chain`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainStructure {
    /// `source → ch₁ → ch₂ → …`, each channel reading the previous output.
    Chain,
    /// Every channel reads the source; branches independent given the source.
    FanOut,
}

/// Joint law over named finite axes, row-major with the first axis slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    axes: Vec<Axis>,
    table: Vec<f64>,
}

impl JointDistribution {
    pub fn new(axes: Vec<Axis>, table: Vec<f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(HbiError::Shape("joint needs at least one axis".into()));
        }
        let size: usize = axes.iter().map(|a| a.support.len()).product();
        if size != table.len() {
            return Err(HbiError::Shape(format!(
                "table has {} cells, axes imply {size}",
                table.len()
            )));
        }
        let mut names = HashSet::new();
        for a in &axes {
            if !names.insert(a.name.as_str()) {
                return Err(HbiError::Shape(format!("duplicate axis `{}`", a.name)));
            }
            check_unique(&a.support, &format!("axis `{}`", a.name))?;
        }
        check_probability_row(&table, "joint table")?;
        Ok(JointDistribution { axes, table })
    }

    /// Normalizes a nonnegative table into a joint.
    pub fn from_weights(axes: Vec<Axis>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || total <= 0.0 {
            return Err(HbiError::InvalidDistribution(
                "joint weights must be nonnegative with positive total".into(),
            ));
        }
        JointDistribution::new(axes, weights.iter().map(|w| w / total).collect())
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| HbiError::Axis(name.to_string()))
    }

    pub fn has_axis(&self, name: &str) -> bool {
        self.axes.iter().any(|a| a.name == name)
    }

    fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.support.len()).collect()
    }

    /// Multi-index of a flat cell position.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut idx = vec![0; shape.len()];
        for k in (0..shape.len()).rev() {
            idx[k] = flat % shape[k];
            flat /= shape[k];
        }
        idx
    }

    pub fn prob_at(&self, index: &[usize]) -> f64 {
        let shape = self.shape();
        let flat = index
            .iter()
            .zip(&shape)
            .fold(0usize, |acc, (&i, &n)| acc * n + i);
        self.table[flat]
    }

    /// Marginal over the named axes, in the order given.
    pub fn marginal(&self, names: &[&str]) -> Result<JointDistribution> {
        if names.is_empty() {
            return Err(HbiError::Shape("marginal needs at least one axis".into()));
        }
        let picks: Vec<usize> = names
            .iter()
            .map(|n| self.axis_index(n))
            .collect::<Result<_>>()?;
        let mut seen = HashSet::new();
        for p in &picks {
            if !seen.insert(*p) {
                return Err(HbiError::Shape("axis named twice in marginal".into()));
            }
        }
        let axes: Vec<Axis> = picks.iter().map(|&p| self.axes[p].clone()).collect();
        let out_shape: Vec<usize> = axes.iter().map(|a| a.support.len()).collect();
        let mut out = vec![0.0; out_shape.iter().product()];
        for (flat, &p) in self.table.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let idx = self.unravel(flat);
            let target = picks
                .iter()
                .zip(&out_shape)
                .fold(0usize, |acc, (&k, &n)| acc * n + idx[k]);
            out[target] += p;
        }
        JointDistribution::from_weights(axes, out)
    }

    /// One-axis marginal as a [`Distribution`].
    pub fn axis_distribution(&self, name: &str) -> Result<Distribution> {
        let m = self.marginal(&[name])?;
        make_distribution(&m.table, m.axes[0].support.clone())
    }

    /// Replaces the named axes by a single tuple-valued axis `new_name`,
    /// appended last. Symbols of the new axis join components with `|`.
    pub fn merge_axes(&self, names: &[&str], new_name: &str) -> Result<JointDistribution> {
        let merged: Vec<usize> = names
            .iter()
            .map(|n| self.axis_index(n))
            .collect::<Result<_>>()?;
        let kept: Vec<usize> = (0..self.axes.len())
            .filter(|k| !merged.contains(k))
            .collect();
        let mut order: Vec<&str> = kept.iter().map(|&k| self.axes[k].name.as_str()).collect();
        order.extend_from_slice(names);
        let reordered = self.marginal(&order)?;

        let mut tuples: Vec<Vec<String>> = vec![Vec::new()];
        for &k in &merged {
            let mut next = Vec::new();
            for t in &tuples {
                for s in &self.axes[k].support {
                    let mut t2 = t.clone();
                    t2.push(s.to_string());
                    next.push(t2);
                }
            }
            tuples = next;
        }
        let mut axes: Vec<Axis> = kept.iter().map(|&k| self.axes[k].clone()).collect();
        axes.push(Axis::new(
            new_name,
            tuples.iter().map(|t| Symbol::new(t.join("|"))).collect(),
        ));
        JointDistribution::new(axes, reordered.table)
    }
}

fn same_support(a: &[Symbol], b: &[Symbol]) -> bool {
    a == b
}

/// Joint law of a source and channels attached as a chain or fan-out.
///
/// `names[0]` names the source axis and `names[k + 1]` the output of `channels[k]`.
pub fn joint_from_chain(
    source: &Distribution,
    channels: &[Channel],
    structure: ChainStructure,
    names: &[&str],
) -> Result<JointDistribution> {
    if names.len() != channels.len() + 1 {
        return Err(HbiError::Shape(format!(
            "{} axis names for {} channels",
            names.len(),
            channels.len()
        )));
    }
    for (k, ch) in channels.iter().enumerate() {
        let expected = match structure {
            ChainStructure::FanOut => source.support(),
            ChainStructure::Chain if k == 0 => source.support(),
            ChainStructure::Chain => channels[k - 1].output_support(),
        };
        if !same_support(expected, ch.input_support()) {
            return Err(HbiError::Shape(format!(
                "channel {k} input support does not match its parent"
            )));
        }
    }

    let mut axes = vec![Axis::new(names[0], source.support().to_vec())];
    for (k, ch) in channels.iter().enumerate() {
        axes.push(Axis::new(names[k + 1], ch.output_support().to_vec()));
    }

    let mut table = source.probs().to_vec();
    let mut parent_sizes = vec![source.len()];
    for (k, ch) in channels.iter().enumerate() {
        let m = ch.n_outputs();
        let mut next = Vec::with_capacity(table.len() * m);
        for (flat, &p) in table.iter().enumerate() {
            let parent = match structure {
                ChainStructure::Chain => flat % parent_sizes[k],
                ChainStructure::FanOut => {
                    // Source index is the slowest axis.
                    flat / (table.len() / source.len())
                }
            };
            for &r in ch.row(parent) {
                next.push(p * r);
            }
        }
        table = next;
        parent_sizes.push(m);
    }
    JointDistribution::from_weights(axes, table)
}

/// A seeded random stream: ChaCha8 keyed by `base_seed`, on stream `stream_id`.
#[derive(Clone, Debug)]
pub struct RngStream {
    base_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(base_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream(stream_id);
        RngStream {
            base_seed,
            stream_id,
            rng,
        }
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// SplitMix64 output mixer.
pub fn splitmix64_mix(x: u64) -> u64 {
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-cell stream: `stream_id = mix(base_seed ^ cell_index)`.
pub fn derive_stream(base_seed: u64, cell_index: u64) -> RngStream {
    RngStream::new(base_seed, splitmix64_mix(base_seed ^ cell_index))
}

/// Draws `n` symbols from `d`.
pub fn sample(d: &Distribution, rng: &mut RngStream, n: usize) -> Vec<Symbol> {
    sample_indices(d, rng, n)
        .into_iter()
        .map(|i| d.support[i].clone())
        .collect()
}

/// Draws `n` support indices from `d`.
pub fn sample_indices(d: &Distribution, rng: &mut RngStream, n: usize) -> Vec<usize> {
    // A valid Distribution always has positive total weight.
    let index = WeightedIndex::new(&d.probs).expect("validated distribution");
    (0..n).map(|_| index.sample(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn syms(names: &[&str]) -> Vec<Symbol> {
        names.iter().map(|s| Symbol::from(*s)).collect()
    }

    #[test]
    fn make_distribution_normalizes() {
        let d = make_distribution(&[1.0, 1.0], syms(&["a", "b"])).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.5]);
        let d = make_distribution(&[2.0, 0.0, 2.0], syms(&["a", "b", "c"])).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.0, 0.5]);
    }

    #[test]
    fn make_distribution_rejects_degenerate_weights() {
        assert!(matches!(
            make_distribution(&[0.0, 0.0], syms(&["a", "b"])),
            Err(HbiError::InvalidDistribution(_))
        ));
        assert!(matches!(
            make_distribution(&[1.0, -0.5], syms(&["a", "b"])),
            Err(HbiError::InvalidDistribution(_))
        ));
        assert!(Distribution::new(syms(&["a", "a"]), vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn push_forward_cases() {
        let u = Distribution::uniform(index_symbols(2)).unwrap();
        let id = Channel::identity(index_symbols(2)).unwrap();
        assert_eq!(push_forward(&u, &id).unwrap().probs(), u.probs());

        let ch = Channel::bsc(0.1).unwrap();
        let pm = Distribution::point_mass(index_symbols(2), 1).unwrap();
        assert_eq!(push_forward(&pm, &ch).unwrap().probs(), ch.row(1));

        // 0.5·[0.9, 0.1] + 0.5·[0.1, 0.9]
        let out = push_forward(&u, &ch).unwrap();
        assert!((out.probs()[0] - 0.5).abs() < 1e-15);
        assert!((out.probs()[1] - 0.5).abs() < 1e-15);

        let three = Distribution::uniform(index_symbols(3)).unwrap();
        assert!(matches!(push_forward(&three, &ch), Err(HbiError::Shape(_))));
    }

    #[test]
    fn chain_of_identities_is_diagonal() {
        let u = Distribution::uniform(index_symbols(2)).unwrap();
        let id = Channel::identity(index_symbols(2)).unwrap();
        let j = joint_from_chain(
            &u,
            &[id.clone(), id],
            ChainStructure::Chain,
            &["y", "s", "t"],
        )
        .unwrap();
        for flat in 0..8 {
            let idx = j.unravel(flat);
            let diag = idx[0] == idx[1] && idx[1] == idx[2];
            assert_eq!(j.table()[flat] > 0.0, diag, "cell {idx:?}");
        }
    }

    #[test]
    fn fan_out_product_cell() {
        let u = Distribution::uniform(index_symbols(2)).unwrap();
        let j = joint_from_chain(
            &u,
            &[
                Channel::bsc(0.1).unwrap(),
                Channel::identity(index_symbols(2)).unwrap(),
            ],
            ChainStructure::FanOut,
            &["y", "sh", "sa"],
        )
        .unwrap();
        assert!((j.prob_at(&[0, 0, 0]) - 0.45).abs() < 1e-15);
        assert!((j.prob_at(&[0, 1, 0]) - 0.05).abs() < 1e-15);
        assert_eq!(j.prob_at(&[0, 0, 1]), 0.0);
    }

    #[test]
    fn constant_channel_decouples_downstream() {
        let src = make_distribution(&[0.2, 0.8], index_symbols(2)).unwrap();
        let out = make_distribution(&[0.3, 0.7], syms(&["u", "v"])).unwrap();
        let ch = Channel::constant(index_symbols(2), &out).unwrap();
        let j = joint_from_chain(&src, &[ch], ChainStructure::Chain, &["y", "s"]).unwrap();
        for y in 0..2 {
            for s in 0..2 {
                let expected = src.probs()[y] * out.probs()[s];
                assert!((j.prob_at(&[y, s]) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn chain_rejects_incompatible_supports() {
        let u = Distribution::uniform(index_symbols(2)).unwrap();
        let ch3 = Channel::identity(index_symbols(3)).unwrap();
        assert!(matches!(
            joint_from_chain(&u, &[ch3], ChainStructure::Chain, &["y", "s"]),
            Err(HbiError::Shape(_))
        ));
    }

    #[test]
    fn sample_point_mass_and_determinism() {
        let pm = Distribution::point_mass(syms(&["a", "b"]), 1).unwrap();
        let mut rng = derive_stream(7, 0);
        assert_eq!(sample(&pm, &mut rng, 5), vec![Symbol::from("b"); 5]);

        let u = Distribution::uniform(syms(&["a", "b"])).unwrap();
        let a = sample(&u, &mut derive_stream(11, 3), 200);
        let b = sample(&u, &mut derive_stream(11, 3), 200);
        assert_eq!(a, b);
        assert!(sample(&u, &mut derive_stream(11, 3), 0).is_empty());
    }

    #[test]
    fn sample_frequencies_in_binomial_band() {
        let u = Distribution::uniform(syms(&["a", "b"])).unwrap();
        let draws = sample(&u, &mut derive_stream(2024, 1), 10_000);
        let freq = draws.iter().filter(|s| s.as_str() == "a").count() as f64 / 10_000.0;
        // 3σ = 3·sqrt(0.25 / 10000) = 0.015
        assert!((0.47..=0.53).contains(&freq), "freq {freq}");
    }

    #[test]
    fn derive_stream_contract() {
        let s = 0xDEAD_BEEF_u64;
        assert_eq!(derive_stream(s, 4).stream_id(), derive_stream(s, 4).stream_id());
        assert_ne!(derive_stream(s, 4).stream_id(), derive_stream(s, 5).stream_id());
        assert_eq!(derive_stream(s, 0).stream_id(), splitmix64_mix(s));
        // Reference SplitMix64 output for state 0x9E3779B97F4A7C15 (first draw from seed 0).
        assert_eq!(splitmix64_mix(0x9E37_79B9_7F4A_7C15), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let ch = Channel::bsc(0.1).unwrap();
        let text = serde_json::to_string(&ch).unwrap();
        assert!(text.contains("\"input_support\""));
        let back: Channel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ch);

        let d: Distribution =
            serde_json::from_str(r#"{"support": [0, 1, "x"], "probs": [0.25, 0.25, 0.5]}"#)
                .unwrap();
        assert_eq!(d.support()[0].as_str(), "0");
        assert!(serde_json::from_str::<Distribution>(r#"{"support": [0], "probs": [0.9]}"#).is_err());
        assert!(serde_json::from_str::<Channel>(
            r#"{"input_support": [0], "output_support": [0, 1], "rows": [[0.5, 0.6]]}"#
        )
        .is_err());
    }

    #[test]
    fn merged_rows_found() {
        let ch = Channel::new(
            index_symbols(3),
            index_symbols(2),
            vec![vec![1.0, 0.0], vec![0.2, 0.8], vec![1.0, 0.0]],
        )
        .unwrap();
        assert_eq!(ch.merged_row_groups(1e-12), vec![vec![0, 2]]);
    }

    fn random_channel(n_in: usize, n_out: usize, raw: &[f64]) -> Channel {
        let weights = (0..n_in)
            .map(|i| (0..n_out).map(|j| raw[(i * n_out + j) % raw.len()] + 1e-3).collect())
            .collect();
        Channel::from_weights(index_symbols(n_in), index_symbols(n_out), weights).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn push_forward_preserves_mass(
            n_in in 1usize..8,
            n_out in 1usize..8,
            raw in proptest::collection::vec(0.0f64..1.0, 64),
            src in proptest::collection::vec(0.0f64..1.0, 8),
        ) {
            let ch = random_channel(n_in, n_out, &raw);
            let mut w: Vec<f64> = src[..n_in].to_vec();
            w[0] += 1e-3;
            let d = make_distribution(&w, index_symbols(n_in)).unwrap();
            let out = push_forward(&d, &ch).unwrap();
            let total: f64 = out.probs().iter().sum();
            prop_assert!((total - 1.0).abs() <= MASS_TOL);
        }

        #[test]
        fn joint_marginals_match_push_forwards(
            n in 1usize..5,
            m1 in 1usize..5,
            m2 in 1usize..5,
            raw in proptest::collection::vec(0.0f64..1.0, 64),
        ) {
            let mut w: Vec<f64> = raw[..n].to_vec();
            w[0] += 1e-3;
            let src = make_distribution(&w, index_symbols(n)).unwrap();
            let c1 = random_channel(n, m1, &raw[5..]);
            let c2 = random_channel(m1, m2, &raw[11..]);
            let j = joint_from_chain(&src, &[c1.clone(), c2.clone()], ChainStructure::Chain, &["y", "s", "t"]).unwrap();
            let s = push_forward(&src, &c1).unwrap();
            let t = push_forward(&s, &c2).unwrap();
            let js = j.axis_distribution("s").unwrap();
            let jt = j.axis_distribution("t").unwrap();
            for (a, b) in js.probs().iter().zip(s.probs()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in jt.probs().iter().zip(t.probs()) {
                prop_assert!((a - b).abs() < 1e-12);
            }

            let c3 = random_channel(n, m2, &raw[17..]);
            let f = joint_from_chain(&src, &[c1.clone(), c3.clone()], ChainStructure::FanOut, &["y", "a", "b"]).unwrap();
            let fb = f.axis_distribution("b").unwrap();
            let pb = push_forward(&src, &c3).unwrap();
            for (a, b) in fb.probs().iter().zip(pb.probs()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn sample_is_pure(seed in any::<u64>(), cell in any::<u64>()) {
            let d = make_distribution(&[0.2, 0.3, 0.5], index_symbols(3)).unwrap();
            let a = sample_indices(&d, &mut derive_stream(seed, cell), 32);
            let b = sample_indices(&d, &mut derive_stream(seed, cell), 32);
            prop_assert_eq!(a, b);
        }
    }
}
