//! Learners as explicit channels: each realizable sample over a declared
//! support universe maps to a distribution over hypothesis indices. The
//! module provides the admissibility predicates (consistency; properness is
//! structural since outputs are class indices), order-symmetrization, and the
//! exact information cost I(S; A(S)) of a channel under a realizable
//! distribution.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use serde_json::{json, Value};

use crate::classes::{HypothesisClass, LabeledDistribution, LabeledExample};
use crate::error::{Error, Result};
use crate::prob::{iid_product, FiniteDistribution, JointDistribution};
use crate::tol::MAX_ENUMERATED_SAMPLES;

/// An ordered sample of labeled examples realizable by the ambient class.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RealizableSample {
    examples: Vec<LabeledExample>,
}

impl RealizableSample {
    /// Validates that some hypothesis of `class` agrees with every example.
    /// The empty sample is realizable by any hypothesis.
    pub fn new(class: &HypothesisClass, examples: Vec<LabeledExample>) -> Result<Self> {
        let s = RealizableSample { examples };
        if s.consistent_hypotheses(class)?.is_empty() {
            return Err(Error::contract(format!(
                "sample {:?} is not realizable by the class",
                s.examples
            )));
        }
        Ok(s)
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Indices of all hypotheses agreeing with every example, ascending.
    pub fn consistent_hypotheses(&self, class: &HypothesisClass) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        'hyp: for h in 0..class.num_hypotheses() {
            for e in &self.examples {
                if class.label(h, e.x)? != e.y {
                    continue 'hyp;
                }
            }
            out.push(h);
        }
        Ok(out)
    }

    /// All distinct orderings of this sample's multiset of examples, in
    /// ascending order. A sample with repeated examples has fewer than `m!`.
    pub fn distinct_arrangements(&self) -> Vec<RealizableSample> {
        let m = self.examples.len();
        let set: BTreeSet<Vec<LabeledExample>> = (0..m)
            .permutations(m)
            .map(|perm| perm.into_iter().map(|i| self.examples[i]).collect())
            .collect();
        set.into_iter()
            .map(|examples| RealizableSample { examples })
            .collect()
    }

    /// The sample's multiset signature: examples in sorted order.
    pub fn multiset_key(&self) -> Vec<LabeledExample> {
        let mut key = self.examples.clone();
        key.sort_unstable();
        key
    }
}

/// All realizable ordered `m`-tuples over `support`, lexicographic in support
/// order. Each support point must itself be realizable as a singleton.
pub fn enumerate_realizable_samples(
    class: &HypothesisClass,
    support: &[LabeledExample],
    m: usize,
) -> Result<Vec<RealizableSample>> {
    if m == 0 {
        return Ok(vec![RealizableSample { examples: Vec::new() }]);
    }
    let distinct: BTreeSet<&LabeledExample> = support.iter().collect();
    if distinct.len() != support.len() || support.is_empty() {
        return Err(Error::contract("support must be a nonempty set of distinct points"));
    }
    support
        .len()
        .checked_pow(m as u32)
        .filter(|c| *c <= MAX_ENUMERATED_SAMPLES)
        .ok_or_else(|| {
            Error::resource(format!(
                "sample enumeration would scan {}^{m} tuples (cap {MAX_ENUMERATED_SAMPLES})",
                support.len()
            ))
        })?;
    // Consistent hypothesis sets per support point, for pruned DFS.
    let mut point_sets = Vec::with_capacity(support.len());
    for e in support {
        let set = RealizableSample { examples: vec![*e] }.consistent_hypotheses(class)?;
        if set.is_empty() {
            return Err(Error::contract(format!(
                "support point ({}, {}) is not realizable",
                e.x, e.y
            )));
        }
        point_sets.push(set);
    }
    fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }
    fn dfs(
        support: &[LabeledExample],
        point_sets: &[Vec<usize>],
        m: usize,
        prefix: &mut Vec<LabeledExample>,
        consistent: Vec<usize>,
        out: &mut Vec<RealizableSample>,
    ) {
        if prefix.len() == m {
            out.push(RealizableSample { examples: prefix.clone() });
            return;
        }
        for (idx, e) in support.iter().enumerate() {
            let next = intersect(&consistent, &point_sets[idx]);
            if next.is_empty() {
                continue;
            }
            prefix.push(*e);
            dfs(support, point_sets, m, prefix, next, out);
            prefix.pop();
        }
    }
    let all: Vec<usize> = (0..class.num_hypotheses()).collect();
    let mut out = Vec::new();
    dfs(support, &point_sets, m, &mut Vec::new(), all, &mut out);
    Ok(out)
}

/// A learner with a fixed sample size, stored extensionally: one output
/// distribution over hypothesis indices per realizable sample in its
/// universe. Outputs are class indices, so every channel is proper by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerChannel {
    class: HypothesisClass,
    m: usize,
    rows: BTreeMap<RealizableSample, FiniteDistribution<usize>>,
}

impl LearnerChannel {
    /// Builds a channel from explicit rows. Every sample must have length
    /// `m`, be realizable, and its distribution must range over valid
    /// hypothesis indices.
    pub fn new(
        class: HypothesisClass,
        m: usize,
        rows: Vec<(RealizableSample, FiniteDistribution<usize>)>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::contract("channel needs at least one row"));
        }
        let mut map = BTreeMap::new();
        for (s, dist) in rows {
            if s.len() != m {
                return Err(Error::contract(format!(
                    "row sample has length {}, channel expects {m}",
                    s.len()
                )));
            }
            if s.consistent_hypotheses(&class)?.is_empty() {
                return Err(Error::contract("row sample is not realizable"));
            }
            for (&h, _) in dist.iter() {
                if h >= class.num_hypotheses() {
                    return Err(Error::contract(format!(
                        "row places mass on hypothesis index {h}, class has {}",
                        class.num_hypotheses()
                    )));
                }
            }
            if map.insert(s, dist).is_some() {
                return Err(Error::contract("duplicate row sample"));
            }
        }
        Ok(LearnerChannel { class, m, rows: map })
    }

    pub fn class(&self) -> &HypothesisClass {
        &self.class
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn samples(&self) -> impl Iterator<Item = &RealizableSample> {
        self.rows.keys()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&RealizableSample, &FiniteDistribution<usize>)> {
        self.rows.iter()
    }

    /// The output law at `s`; missing rows are a contract violation.
    pub fn row(&self, s: &RealizableSample) -> Result<&FiniteDistribution<usize>> {
        self.rows.get(s).ok_or_else(|| {
            Error::contract(format!("channel has no row for sample {:?}", s.examples()))
        })
    }

    pub fn has_row(&self, s: &RealizableSample) -> bool {
        self.rows.contains_key(s)
    }

    /// True iff no row places mass on a hypothesis disagreeing with any
    /// example of its sample.
    pub fn is_consistent(&self) -> Result<bool> {
        for (s, dist) in &self.rows {
            for (&h, _) in dist.iter() {
                for e in s.examples() {
                    if self.class.label(h, e.x)? != e.y {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Uniform average of this channel's rows over all distinct orderings of
    /// each sample. Every arrangement of a stored sample must itself have a
    /// row; the result's row at `s` depends only on the multiset of `s`.
    pub fn symmetrize(&self) -> Result<LearnerChannel> {
        let mut by_multiset: BTreeMap<Vec<LabeledExample>, FiniteDistribution<usize>> =
            BTreeMap::new();
        let mut rows = Vec::with_capacity(self.rows.len());
        for s in self.rows.keys() {
            let key = s.multiset_key();
            if !by_multiset.contains_key(&key) {
                let arrangements = s.distinct_arrangements();
                let mut parts = Vec::with_capacity(arrangements.len());
                for a in &arrangements {
                    parts.push(self.row(a)?);
                }
                let w = 1.0 / parts.len() as f64;
                let avg = FiniteDistribution::mixture(
                    &parts.iter().map(|d| (w, *d)).collect::<Vec<_>>(),
                )?;
                by_multiset.insert(key.clone(), avg);
            }
            rows.push((s.clone(), by_multiset[&key].clone()));
        }
        LearnerChannel::new(self.class.clone(), self.m, rows)
    }

    /// The exact joint law of (sample index, hypothesis index) when samples
    /// are drawn i.i.d. from `p` and passed through this channel. Returns the
    /// sample list indexing the first axis alongside the joint.
    pub fn output_joint(
        &self,
        p: &LabeledDistribution,
    ) -> Result<(Vec<RealizableSample>, JointDistribution)> {
        if !self.class.is_realizable(p)? {
            return Err(Error::contract(
                "information cost is defined for realizable distributions only",
            ));
        }
        let tuples = iid_product(p.distribution(), self.m)?;
        let num_h = self.class.num_hypotheses();
        let mut samples = Vec::with_capacity(tuples.len());
        let mut cells = Vec::with_capacity(tuples.len() * num_h);
        for (tuple, w) in tuples.iter() {
            let s = RealizableSample { examples: tuple.clone() };
            let row = self.row(&s)?;
            for h in 0..num_h {
                cells.push(w * row.prob(&h));
            }
            samples.push(s);
        }
        let joint = JointDistribution::new(
            vec![("sample", samples.len()), ("hypothesis", num_h)],
            cells,
        )?;
        Ok((samples, joint))
    }

    /// Exact information cost I(S; A(S)) in bits with S ~ p^m.
    pub fn info_cost(&self, p: &LabeledDistribution) -> Result<f64> {
        let (_, joint) = self.output_joint(p)?;
        joint.mutual_information()
    }

    /// Serializes to
    /// `{"m":int,"rows":[{"sample":[[x,y],...],"dist":[{"h":i,"p":num},...]},...]}`.
    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|(s, dist)| {
                let sample: Vec<Value> = s
                    .examples()
                    .iter()
                    .map(|e| json!([e.x, e.y]))
                    .collect();
                let dist: Vec<Value> =
                    dist.iter().map(|(&h, p)| json!({"h": h, "p": p})).collect();
                json!({"sample": sample, "dist": dist})
            })
            .collect();
        json!({"m": self.m, "rows": rows})
    }

    /// Parses the [`Self::to_json`] wire form against a known class.
    pub fn from_json(class: &HypothesisClass, v: &Value) -> Result<Self> {
        let m = v
            .get("m")
            .and_then(Value::as_u64)
            .and_then(|m| usize::try_from(m).ok())
            .ok_or_else(|| Error::Parse("channel JSON lacks an integer \"m\"".into()))?;
        let rows_json = v
            .get("rows")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("channel JSON lacks a \"rows\" array".into()))?;
        let mut rows = Vec::with_capacity(rows_json.len());
        for row in rows_json {
            let sample_json = row
                .get("sample")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Parse("row lacks a \"sample\" array".into()))?;
            let mut examples = Vec::with_capacity(sample_json.len());
            for e in sample_json {
                let pair = e
                    .as_array()
                    .filter(|p| p.len() == 2)
                    .ok_or_else(|| Error::Parse("sample entry is not an [x,y] pair".into()))?;
                let x = pair[0]
                    .as_u64()
                    .and_then(|x| u32::try_from(x).ok())
                    .ok_or_else(|| Error::Parse("bad sample x".into()))?;
                let y = pair[1]
                    .as_u64()
                    .and_then(|y| u8::try_from(y).ok())
                    .ok_or_else(|| Error::Parse("bad sample y".into()))?;
                examples.push(LabeledExample::new(x, y)?);
            }
            let dist_json = row
                .get("dist")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Parse("row lacks a \"dist\" array".into()))?;
            let mut support = Vec::with_capacity(dist_json.len());
            for d in dist_json {
                let h = d
                    .get("h")
                    .and_then(Value::as_u64)
                    .and_then(|h| usize::try_from(h).ok())
                    .ok_or_else(|| Error::Parse("dist entry lacks an \"h\" index".into()))?;
                let p = d
                    .get("p")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| Error::Parse("dist entry lacks a numeric \"p\"".into()))?;
                support.push((h, p));
            }
            rows.push((
                RealizableSample::new(class, examples)?,
                FiniteDistribution::new(support)?,
            ));
        }
        LearnerChannel::new(class.clone(), m, rows)
    }
}

fn deterministic_channel(
    class: &HypothesisClass,
    m: usize,
    support: &[LabeledExample],
    pick: impl Fn(&[usize]) -> usize,
) -> Result<LearnerChannel> {
    let samples = enumerate_realizable_samples(class, support, m)?;
    let rows = samples
        .into_iter()
        .map(|s| {
            let consistent = s.consistent_hypotheses(class)?;
            Ok((s, FiniteDistribution::point_mass(pick(&consistent))))
        })
        .collect::<Result<Vec<_>>>()?;
    LearnerChannel::new(class.clone(), m, rows)
}

/// The canonical deterministic learner: each sample maps to a point mass on
/// the smallest-index consistent hypothesis.
pub fn leftmost_learner(
    class: &HypothesisClass,
    m: usize,
    support: &[LabeledExample],
) -> Result<LearnerChannel> {
    deterministic_channel(class, m, support, |c| c[0])
}

/// Mirror of [`leftmost_learner`]: point mass on the largest-index consistent
/// hypothesis.
pub fn rightmost_learner(
    class: &HypothesisClass,
    m: usize,
    support: &[LabeledExample],
) -> Result<LearnerChannel> {
    deterministic_channel(class, m, support, |c| *c.last().expect("nonempty"))
}

/// The maximally randomized admissible learner: each row is uniform over the
/// sample's consistent hypotheses.
pub fn uniform_consistent_learner(
    class: &HypothesisClass,
    m: usize,
    support: &[LabeledExample],
) -> Result<LearnerChannel> {
    let samples = enumerate_realizable_samples(class, support, m)?;
    let rows = samples
        .into_iter()
        .map(|s| {
            let consistent = s.consistent_hypotheses(class)?;
            Ok((s, FiniteDistribution::uniform(consistent)?))
        })
        .collect::<Result<Vec<_>>>()?;
    LearnerChannel::new(class.clone(), m, rows)
}

/// One channel per sample size, all over the same class.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerFamily {
    channels: BTreeMap<usize, LearnerChannel>,
}

impl LearnerFamily {
    pub fn new(channels: Vec<LearnerChannel>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::contract("learner family needs at least one channel"));
        }
        let class = channels[0].class().clone();
        let mut map = BTreeMap::new();
        for c in channels {
            if *c.class() != class {
                return Err(Error::contract("family channels must share one class"));
            }
            let m = c.m();
            if map.insert(m, c).is_some() {
                return Err(Error::contract(format!("family has two channels for m={m}")));
            }
        }
        Ok(LearnerFamily { channels: map })
    }

    pub fn class(&self) -> &HypothesisClass {
        self.channels.values().next().expect("nonempty").class()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.channels.keys().copied().collect()
    }

    pub fn channel(&self, m: usize) -> Result<&LearnerChannel> {
        self.channels
            .get(&m)
            .ok_or_else(|| Error::contract(format!("family has no channel for m={m}")))
    }

    pub fn channels(&self) -> impl Iterator<Item = (usize, &LearnerChannel)> {
        self.channels.iter().map(|(&m, c)| (m, c))
    }

    /// True iff every member channel is consistent.
    pub fn is_consistent(&self) -> Result<bool> {
        for c in self.channels.values() {
            if !c.is_consistent()? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Expected information cost over a size distribution:
    /// sum over m of mu(m) * I(S; A_m(S)) with S ~ p^m.
    pub fn expected_info_cost(
        &self,
        p: &LabeledDistribution,
        mu: &FiniteDistribution<usize>,
    ) -> Result<f64> {
        let mut total = 0.0;
        for (m, w) in mu.iter() {
            total += w * self.channel(*m)?.info_cost(p)?;
        }
        Ok(total)
    }
}
