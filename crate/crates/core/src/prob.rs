//! Finite probability: explicit distributions, dense joints, and the exact
//! entropy / mutual-information kernels everything else is built on.
//!
//! Conventions: all logs are base 2, `0 * log(1/0) = 0`, and cells with less
//! than [`crate::tol::ZERO_MASS_TOL`] mass are treated as exact zeros.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num::bigint::BigUint;
use num::rational::Ratio;
use num::traits::{One, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::tol::{CONSTRUCTION_TOL, MAX_ENUMERATED_SAMPLES, ZERO_MASS_TOL};

/// Shannon entropy in bits of an arbitrary collection of probabilities.
/// Entries below the zero-mass cutoff contribute nothing.
pub fn entropy_bits<I: IntoIterator<Item = f64>>(probs: I) -> f64 {
    let mut h = 0.0;
    for p in probs {
        if p > ZERO_MASS_TOL {
            h -= p * p.log2();
        }
    }
    h
}

/// A probability distribution over an explicit, ordered support.
///
/// Invariants enforced at construction: ids are pairwise distinct, every
/// probability is strictly positive, and the total is 1 within
/// [`CONSTRUCTION_TOL`]. Zero-probability elements are simply not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution<T> {
    support: Vec<(T, f64)>,
}

impl<T: Ord + Clone> FiniteDistribution<T> {
    /// Builds a distribution from `(element, probability)` pairs, keeping the
    /// given order.
    pub fn new(support: Vec<(T, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::contract("distribution must have nonempty support"));
        }
        let mut seen = BTreeSet::new();
        let mut total = 0.0;
        for (t, p) in &support {
            if !seen.insert(t.clone()) {
                return Err(Error::contract("distribution support has a repeated element"));
            }
            if !p.is_finite() || *p <= 0.0 {
                return Err(Error::contract(format!(
                    "distribution probabilities must be positive and finite, got {p}"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > CONSTRUCTION_TOL {
            return Err(Error::contract(format!(
                "distribution probabilities sum to {total}, expected 1"
            )));
        }
        Ok(FiniteDistribution { support })
    }

    /// The distribution putting all mass on one element.
    pub fn point_mass(t: T) -> Self {
        FiniteDistribution { support: vec![(t, 1.0)] }
    }

    /// The uniform distribution over distinct elements.
    pub fn uniform(items: Vec<T>) -> Result<Self> {
        let n = items.len();
        if n == 0 {
            return Err(Error::contract("uniform distribution over empty set"));
        }
        Self::new(items.into_iter().map(|t| (t, 1.0 / n as f64)).collect())
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, f64)> {
        self.support.iter().map(|(t, p)| (t, *p))
    }

    /// Probability of `t`; zero when `t` is outside the support.
    pub fn prob(&self, t: &T) -> f64 {
        self.support
            .iter()
            .find(|(s, _)| s == t)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    /// Entropy in bits.
    pub fn entropy(&self) -> f64 {
        entropy_bits(self.support.iter().map(|(_, p)| *p))
    }

    /// Convex combination of distributions. Weights must be nonnegative and
    /// sum to 1 within tolerance; the result's support is the union of the
    /// parts' supports in first-appearance order.
    pub fn mixture(parts: &[(f64, &FiniteDistribution<T>)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::contract("mixture of zero distributions"));
        }
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if (total - 1.0).abs() > CONSTRUCTION_TOL {
            return Err(Error::contract(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        let mut order: Vec<T> = Vec::new();
        let mut seen = BTreeSet::new();
        for (_, d) in parts {
            for (t, _) in d.iter() {
                if seen.insert(t.clone()) {
                    order.push(t.clone());
                }
            }
        }
        let support = order
            .into_iter()
            .map(|t| {
                let p = parts.iter().map(|(w, d)| w * d.prob(&t)).sum::<f64>();
                (t, p)
            })
            .filter(|(_, p)| *p > 0.0)
            .collect();
        FiniteDistribution::new(support)
    }

    /// Relabels the support, keeping probabilities. The map must stay
    /// injective on the support.
    pub fn map_ids<U: Ord + Clone>(&self, f: impl Fn(&T) -> U) -> Result<FiniteDistribution<U>> {
        FiniteDistribution::new(self.support.iter().map(|(t, p)| (f(t), *p)).collect())
    }

    /// Serializes to the `{"support":[{"id":<string>,"p":<number>},...]}` wire
    /// form, stringifying ids with `id_of`.
    pub fn to_json_with(&self, id_of: impl Fn(&T) -> String) -> Value {
        let support: Vec<Value> = self
            .support
            .iter()
            .map(|(t, p)| json!({"id": id_of(t), "p": p}))
            .collect();
        json!({ "support": support })
    }

    /// Parses the wire form, decoding ids with `parse_id`.
    pub fn from_json_with(
        v: &Value,
        parse_id: impl Fn(&str) -> Result<T>,
    ) -> Result<Self> {
        let support = v
            .get("support")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("distribution JSON lacks a \"support\" array".into()))?;
        let mut pairs = Vec::with_capacity(support.len());
        for entry in support {
            let id = entry
                .get("id")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Parse("support entry lacks a string \"id\"".into()))?;
            let p = entry
                .get("p")
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::Parse("support entry lacks a numeric \"p\"".into()))?;
            pairs.push((parse_id(id)?, p));
        }
        FiniteDistribution::new(pairs)
    }
}

/// The m-fold i.i.d. product of `p`: mass `prod_i p(x_i)` on each ordered
/// m-tuple of support elements, tuples enumerated lexicographically in
/// support order.
pub fn iid_product<T: Ord + Clone>(
    p: &FiniteDistribution<T>,
    m: usize,
) -> Result<FiniteDistribution<Vec<T>>> {
    if m == 0 {
        return Err(Error::contract("iid_product needs m >= 1"));
    }
    let n = p.len();
    let count = n
        .checked_pow(m as u32)
        .filter(|c| *c <= MAX_ENUMERATED_SAMPLES)
        .ok_or_else(|| {
            Error::resource(format!(
                "iid_product would enumerate {n}^{m} tuples (cap {MAX_ENUMERATED_SAMPLES})"
            ))
        })?;
    let base: Vec<(&T, f64)> = p.iter().collect();
    let mut support = Vec::with_capacity(count);
    let mut idx = vec![0usize; m];
    loop {
        let mut tuple = Vec::with_capacity(m);
        let mut mass = 1.0;
        for &i in &idx {
            tuple.push(base[i].0.clone());
            mass *= base[i].1;
        }
        support.push((tuple, mass));
        // Odometer with the last coordinate fastest = lexicographic order.
        let mut pos = m;
        loop {
            if pos == 0 {
                return FiniteDistribution::new(support);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Axis {
    name: String,
    size: usize,
}

/// A dense joint distribution over two or three named axes.
///
/// Cells are indexed positionally per axis; zero cells are permitted. The
/// total mass must be 1 within [`CONSTRUCTION_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    axes: Vec<Axis>,
    cells: Vec<f64>,
}

impl JointDistribution {
    /// Builds a joint from axis `(name, size)` pairs and a row-major cell
    /// vector (last axis fastest).
    pub fn new(axes: Vec<(&str, usize)>, cells: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&axes.len()) {
            return Err(Error::contract(format!(
                "joint distributions have 2 or 3 axes, got {}",
                axes.len()
            )));
        }
        let mut size = 1usize;
        for (name, s) in &axes {
            if *s == 0 {
                return Err(Error::contract(format!("axis {name} has size 0")));
            }
            size = size
                .checked_mul(*s)
                .filter(|c| *c <= crate::tol::MAX_JOINT_CELLS)
                .ok_or_else(|| Error::resource("joint distribution too large".to_string()))?;
        }
        if cells.len() != size {
            return Err(Error::contract(format!(
                "joint has {} cells, axes require {size}",
                cells.len()
            )));
        }
        let mut total = 0.0;
        let mut clean = cells;
        for c in &mut clean {
            if !c.is_finite() || *c < -ZERO_MASS_TOL {
                return Err(Error::contract(format!("joint cell has invalid mass {c}")));
            }
            if c.abs() < ZERO_MASS_TOL {
                *c = 0.0;
            }
            total += *c;
        }
        if (total - 1.0).abs() > CONSTRUCTION_TOL {
            return Err(Error::contract(format!(
                "joint cells sum to {total}, expected 1"
            )));
        }
        Ok(JointDistribution {
            axes: axes
                .into_iter()
                .map(|(name, size)| Axis { name: name.to_string(), size })
                .collect(),
            cells: clean,
        })
    }

    /// Builds a joint by evaluating `f` on every index tuple.
    pub fn from_fn(axes: Vec<(&str, usize)>, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let sizes: Vec<usize> = axes.iter().map(|(_, s)| *s).collect();
        let total: usize = sizes.iter().product();
        let mut cells = Vec::with_capacity(total);
        let mut idx = vec![0usize; sizes.len()];
        for _ in 0..total {
            cells.push(f(&idx));
            let mut pos = sizes.len();
            while pos > 0 {
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < sizes[pos] {
                    break;
                }
                idx[pos] = 0;
            }
        }
        Self::new(axes, cells)
    }

    /// Convenience constructor for a two-axis joint from nested rows.
    pub fn from_rows(name_x: &str, name_y: &str, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::contract("joint needs at least one row"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::contract("joint rows have unequal lengths"));
        }
        let cells = rows.iter().flatten().copied().collect();
        Self::new(vec![(name_x, rows.len()), (name_y, cols)], cells)
    }

    pub fn num_axes(&self) -> usize {
        self.axes.len()
    }

    pub fn axis_size(&self, axis: usize) -> usize {
        self.axes[axis].size
    }

    pub fn axis_name(&self, axis: usize) -> &str {
        &self.axes[axis].name
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.axes.len());
        let mut off = 0;
        for (i, &x) in idx.iter().enumerate() {
            debug_assert!(x < self.axes[i].size);
            off = off * self.axes[i].size + x;
        }
        off
    }

    /// Mass of one cell.
    pub fn prob(&self, idx: &[usize]) -> f64 {
        self.cells[self.offset(idx)]
    }

    /// Entropy in bits of the whole joint.
    pub fn entropy(&self) -> f64 {
        entropy_bits(self.cells.iter().copied())
    }

    fn for_each_cell(&self, mut f: impl FnMut(&[usize], f64)) {
        let sizes: Vec<usize> = self.axes.iter().map(|a| a.size).collect();
        let mut idx = vec![0usize; sizes.len()];
        for &c in &self.cells {
            f(&idx, c);
            let mut pos = sizes.len();
            while pos > 0 {
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < sizes[pos] {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    /// Marginal probability vector of one axis.
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes[axis].size];
        self.for_each_cell(|idx, c| out[idx[axis]] += c);
        out
    }

    /// Two-axis marginal joint over `(a, b)`, in that order.
    pub fn pair_marginal(&self, a: usize, b: usize) -> Result<JointDistribution> {
        if a == b || a >= self.axes.len() || b >= self.axes.len() {
            return Err(Error::contract("pair_marginal needs two distinct axes"));
        }
        let (sa, sb) = (self.axes[a].size, self.axes[b].size);
        let mut cells = vec![0.0; sa * sb];
        self.for_each_cell(|idx, c| cells[idx[a] * sb + idx[b]] += c);
        JointDistribution::new(
            vec![(&self.axes[a].name.clone(), sa), (&self.axes[b].name.clone(), sb)],
            cells,
        )
    }

    /// Collapses a three-axis joint to two axes by fusing axes `b1` and `b2`
    /// into a single product axis; used to evaluate quantities like
    /// I(X; (Y,Z)).
    pub fn fuse_last_two(&self, kept: usize, b1: usize, b2: usize) -> Result<JointDistribution> {
        if self.axes.len() != 3 {
            return Err(Error::contract("fuse_last_two needs a three-axis joint"));
        }
        let mut axes = [kept, b1, b2];
        axes.sort_unstable();
        if axes != [0, 1, 2] {
            return Err(Error::contract("fuse_last_two needs a permutation of the axes"));
        }
        let (sk, s1, s2) = (self.axes[kept].size, self.axes[b1].size, self.axes[b2].size);
        let fused = s1 * s2;
        let mut cells = vec![0.0; sk * fused];
        self.for_each_cell(|idx, c| {
            cells[idx[kept] * fused + (idx[b1] * s2 + idx[b2])] += c;
        });
        let mut fused_name = String::new();
        let _ = write!(fused_name, "({},{})", self.axes[b1].name, self.axes[b2].name);
        JointDistribution::new(
            vec![(&self.axes[kept].name.clone(), sk), (&fused_name, fused)],
            cells,
        )
    }

    /// Pushes axis `axis` through a deterministic map onto `new_size` values,
    /// summing merged cells. Used for data-processing checks.
    pub fn apply_map(&self, axis: usize, map: &[usize], new_size: usize) -> Result<JointDistribution> {
        if axis >= self.axes.len() {
            return Err(Error::contract("apply_map axis out of range"));
        }
        if map.len() != self.axes[axis].size || map.iter().any(|&v| v >= new_size) {
            return Err(Error::contract("apply_map table does not match the axis"));
        }
        let new_sizes: Vec<usize> = self
            .axes
            .iter()
            .enumerate()
            .map(|(i, a)| if i == axis { new_size } else { a.size })
            .collect();
        let total: usize = new_sizes.iter().product();
        let mut cells = vec![0.0; total];
        self.for_each_cell(|idx, c| {
            let mut off = 0;
            for (i, &x) in idx.iter().enumerate() {
                let v = if i == axis { map[x] } else { x };
                off = off * new_sizes[i] + v;
            }
            cells[off] += c;
        });
        let axes: Vec<(&str, usize)> = self
            .axes
            .iter()
            .zip(&new_sizes)
            .map(|(a, &s)| (a.name.as_str(), s))
            .collect();
        JointDistribution::new(axes, cells)
    }

    /// Signed mutual information `H(X) + H(Y) - H(X,Y)` of a two-axis joint.
    /// Can be a hair negative from rounding; see [`Self::mutual_information`].
    pub fn mutual_information_signed(&self) -> Result<f64> {
        if self.axes.len() != 2 {
            return Err(Error::contract("mutual information needs exactly two axes"));
        }
        let hx = entropy_bits(self.marginal(0));
        let hy = entropy_bits(self.marginal(1));
        Ok(hx + hy - self.entropy())
    }

    /// Mutual information in bits, clamped to zero when rounding pushes the
    /// three-entropy formula a few ulps negative.
    pub fn mutual_information(&self) -> Result<f64> {
        Ok(self.mutual_information_signed()?.max(0.0))
    }

    /// Conditions a three-axis joint on `last = z`; returns the event mass and
    /// the renormalized two-axis joint, or `None` when the event has no mass.
    pub fn condition_on_last(&self, z: usize) -> Result<Option<(f64, JointDistribution)>> {
        if self.axes.len() != 3 {
            return Err(Error::contract("condition_on_last needs a three-axis joint"));
        }
        let (sx, sy) = (self.axes[0].size, self.axes[1].size);
        let mut cells = vec![0.0; sx * sy];
        let mut mass = 0.0;
        self.for_each_cell(|idx, c| {
            if idx[2] == z {
                cells[idx[0] * sy + idx[1]] += c;
                mass += c;
            }
        });
        if mass <= ZERO_MASS_TOL {
            return Ok(None);
        }
        for c in &mut cells {
            *c /= mass;
        }
        let joint = JointDistribution::new(
            vec![(&self.axes[0].name.clone(), sx), (&self.axes[1].name.clone(), sy)],
            cells,
        )?;
        Ok(Some((mass, joint)))
    }

    /// Conditional mutual information `I(X; Y | Z)` of a three-axis joint,
    /// with Z the last axis: the Z-weighted average of per-slice MI values.
    pub fn conditional_mutual_information(&self) -> Result<f64> {
        if self.axes.len() != 3 {
            return Err(Error::contract(
                "conditional mutual information needs exactly three axes",
            ));
        }
        let mut total = 0.0;
        for z in 0..self.axes[2].size {
            if let Some((mass, slice)) = self.condition_on_last(z)? {
                total += mass * slice.mutual_information()?;
            }
        }
        Ok(total)
    }

    /// Sum of the negative pointwise mutual-information terms
    /// `p(x,y) * log2(p(x,y) / (p(x) p(y)))` of a two-axis joint. Zero cells
    /// contribute nothing. Bounded below by [`MI_NEGATIVE_PART_FLOOR`].
    pub fn mi_negative_part(&self) -> Result<f64> {
        if self.axes.len() != 2 {
            return Err(Error::contract("mi_negative_part needs exactly two axes"));
        }
        let px = self.marginal(0);
        let py = self.marginal(1);
        let mut total = 0.0;
        self.for_each_cell(|idx, c| {
            if c > ZERO_MASS_TOL {
                let indep = px[idx[0]] * py[idx[1]];
                let term = c * (c / indep).log2();
                if term < 0.0 {
                    total += term;
                }
            }
        });
        Ok(total)
    }
}

/// Floor for [`JointDistribution::mi_negative_part`]. By the log-sum
/// inequality the negative cells satisfy
/// `sum >= q * log2(q / s) >= q * log2(q)` where `q` is their total joint
/// mass and `s <= 1` their total product mass, and
/// `min over q in [0,1] of q * log2(q) = -log2(e) / e`, attained at
/// `q = 1/e`. (In nats the same minimum reads `-1/e`.)
pub const MI_NEGATIVE_PART_FLOOR: f64 = -std::f64::consts::LOG2_E / std::f64::consts::E;

fn big_binomial(n: usize, k: usize) -> BigUint {
    let mut acc = BigUint::one();
    for i in 0..k.min(n - k) {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    if k > n {
        BigUint::zero()
    } else {
        acc
    }
}

/// Exact probability that `Binomial(trials, 1/d)` lands in `[lo, hi]`,
/// computed with integer arithmetic and rounded once at the end.
pub fn binomial_window_probability(trials: usize, d: usize, lo: usize, hi: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::contract("binomial success probability 1/d needs d >= 1"));
    }
    if trials > 4096 {
        return Err(Error::resource(format!(
            "binomial window probability capped at 4096 trials, got {trials}"
        )));
    }
    let hi = hi.min(trials);
    if lo > hi {
        return Ok(0.0);
    }
    let dm1 = BigUint::from(d - 1);
    let mut num = BigUint::zero();
    for t in lo..=hi {
        num += big_binomial(trials, t) * dm1.pow((trials - t) as u32);
    }
    let den = BigUint::from(d).pow(trials as u32);
    Ratio::new(num, den)
        .to_f64()
        .ok_or_else(|| Error::contract("binomial window probability overflowed f64"))
}

/// `Binomial(d*m, 1/d)` conditioned on the window `[m/2, 3m/2]`.
///
/// This is the sample-size law a product-class learner sees per block: `d*m`
/// draws each landing in a given block with probability `1/d`, restricted to
/// the window the direct-sum accounting keeps.
#[derive(Debug, Clone)]
pub struct ConditionedBinomial {
    d: usize,
    m: usize,
    lo: usize,
    hi: usize,
    window_probability: f64,
    dist: FiniteDistribution<usize>,
}

/// Constructs the window-conditioned binomial for `d` blocks and per-block
/// budget `m`. Weights are computed with exact integer arithmetic.
pub fn conditioned_binomial(d: usize, m: usize) -> Result<ConditionedBinomial> {
    if d < 1 || m < 2 {
        return Err(Error::contract(format!(
            "conditioned_binomial needs d >= 1 and m >= 2, got d={d}, m={m}"
        )));
    }
    let trials = d
        .checked_mul(m)
        .filter(|t| *t <= 4096)
        .ok_or_else(|| Error::resource("conditioned_binomial capped at 4096 trials".to_string()))?;
    let lo = m.div_ceil(2);
    let hi = ((3 * m) / 2).min(trials);
    let dm1 = BigUint::from(d - 1);
    let weights: Vec<(usize, BigUint)> = (lo..=hi)
        .map(|t| (t, big_binomial(trials, t) * dm1.pow((trials - t) as u32)))
        .filter(|(_, w)| !w.is_zero())
        .collect();
    let total: BigUint = weights.iter().map(|(_, w)| w.clone()).sum();
    if total.is_zero() {
        return Err(Error::contract("conditioning window has zero mass"));
    }
    let support = weights
        .iter()
        .map(|(t, w)| {
            let p = Ratio::new(w.clone(), total.clone())
                .to_f64()
                .ok_or_else(|| Error::contract("conditioned weight overflowed f64"))?;
            Ok((*t, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionedBinomial {
        d,
        m,
        lo,
        hi,
        window_probability: binomial_window_probability(trials, d, lo, hi)?,
        dist: FiniteDistribution::new(support)?,
    })
}

impl ConditionedBinomial {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Inclusive window `[m/2, 3m/2]` intersected with the possible counts.
    pub fn window(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    /// Exact probability the unconditioned binomial lands in the window.
    pub fn window_probability(&self) -> f64 {
        self.window_probability
    }

    /// Conditioned probability of count `t` (zero outside the window).
    pub fn pmf(&self, t: usize) -> f64 {
        self.dist.prob(&t)
    }

    /// The conditioned law as a plain distribution over counts.
    pub fn distribution(&self) -> &FiniteDistribution<usize> {
        &self.dist
    }
}
