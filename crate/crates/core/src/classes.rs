//! Finite hypothesis classes over explicit integer domains: threshold
//! classes, block products, shattering, exact VC dimension, realizability.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::prob::FiniteDistribution;
use crate::tol::{MAX_SHATTER_POINTS, MAX_THRESHOLD_BITS, MAX_VC_DOMAIN};

/// A domain point together with a binary label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabeledExample {
    pub x: u32,
    pub y: u8,
}

impl LabeledExample {
    pub fn new(x: u32, y: u8) -> Result<Self> {
        if y > 1 {
            return Err(Error::contract(format!("label must be 0 or 1, got {y}")));
        }
        Ok(LabeledExample { x, y })
    }
}

/// One factor's slice of a product domain: the inclusive id range `[lo, hi]`
/// it occupies and the offset that recovers original factor coordinates
/// (`original = relabeled - offset`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockInfo {
    pub lo: u32,
    pub hi: u32,
    pub factor: usize,
    pub offset: u32,
}

/// A finite hypothesis class: an ordered domain of integer ids and a list of
/// pairwise-distinct total 0/1 label rows. Product classes additionally carry
/// the block layout of their factors.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisClass {
    domain: Vec<u32>,
    hypotheses: Vec<Vec<u8>>,
    blocks: Vec<BlockInfo>,
    position: BTreeMap<u32, usize>,
}

impl HypothesisClass {
    /// Builds a class from an explicit domain and label rows.
    pub fn new(domain: Vec<u32>, hypotheses: Vec<Vec<u8>>) -> Result<Self> {
        Self::with_blocks(domain, hypotheses, Vec::new())
    }

    fn with_blocks(
        domain: Vec<u32>,
        hypotheses: Vec<Vec<u8>>,
        blocks: Vec<BlockInfo>,
    ) -> Result<Self> {
        if domain.is_empty() {
            return Err(Error::contract("hypothesis class needs a nonempty domain"));
        }
        if hypotheses.is_empty() {
            return Err(Error::contract("hypothesis class needs at least one hypothesis"));
        }
        let mut position = BTreeMap::new();
        for (i, &x) in domain.iter().enumerate() {
            if position.insert(x, i).is_some() {
                return Err(Error::contract(format!("domain id {x} repeats")));
            }
        }
        let mut seen = BTreeSet::new();
        for row in &hypotheses {
            if row.len() != domain.len() {
                return Err(Error::contract(format!(
                    "hypothesis row has {} labels for a domain of {}",
                    row.len(),
                    domain.len()
                )));
            }
            if row.iter().any(|&y| y > 1) {
                return Err(Error::contract("hypothesis labels must be 0 or 1"));
            }
            if !seen.insert(row.clone()) {
                return Err(Error::contract("hypothesis rows must be pairwise distinct"));
            }
        }
        Ok(HypothesisClass { domain, hypotheses, blocks, position })
    }

    pub fn domain(&self) -> &[u32] {
        &self.domain
    }

    pub fn num_points(&self) -> usize {
        self.domain.len()
    }

    pub fn hypotheses(&self) -> &[Vec<u8>] {
        &self.hypotheses
    }

    pub fn num_hypotheses(&self) -> usize {
        self.hypotheses.len()
    }

    /// Product-block layout; empty for classes not built by [`product`].
    pub fn blocks(&self) -> &[BlockInfo] {
        &self.blocks
    }

    /// Index of a domain id in the ordered domain.
    pub fn position_of(&self, x: u32) -> Option<usize> {
        self.position.get(&x).copied()
    }

    /// Label assigned by hypothesis `h` to domain id `x`.
    pub fn label(&self, h: usize, x: u32) -> Result<u8> {
        let pos = self
            .position_of(x)
            .ok_or_else(|| Error::contract(format!("{x} is not in the domain")))?;
        self.hypotheses
            .get(h)
            .map(|row| row[pos])
            .ok_or_else(|| Error::contract(format!("hypothesis index {h} out of range")))
    }

    /// The block containing `x` as `(factor index, original coordinate)`,
    /// when the class has product structure.
    pub fn block_of(&self, x: u32) -> Option<(usize, u32)> {
        self.blocks
            .iter()
            .find(|b| b.lo <= x && x <= b.hi)
            .map(|b| (b.factor, x - b.offset))
    }

    /// Distinct label patterns of the class restricted to `points`, in first
    /// appearance order.
    pub fn restriction(&self, points: &[u32]) -> Result<Vec<Vec<u8>>> {
        let positions: Vec<usize> = points
            .iter()
            .map(|&x| {
                self.position_of(x)
                    .ok_or_else(|| Error::contract(format!("{x} is not in the domain")))
            })
            .collect::<Result<_>>()?;
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for row in &self.hypotheses {
            let pat: Vec<u8> = positions.iter().map(|&p| row[p]).collect();
            if seen.insert(pat.clone()) {
                out.push(pat);
            }
        }
        Ok(out)
    }

    /// Whether the class realizes every 0/1 pattern on `points`.
    pub fn shatters(&self, points: &[u32]) -> Result<bool> {
        if points.len() > MAX_SHATTER_POINTS {
            return Err(Error::resource(format!(
                "shattering checks capped at {MAX_SHATTER_POINTS} points, got {}",
                points.len()
            )));
        }
        let distinct: BTreeSet<&u32> = points.iter().collect();
        if distinct.len() != points.len() {
            return Err(Error::contract("shattering set has repeated points"));
        }
        let want = 1usize << points.len();
        if self.hypotheses.len() < want {
            return Ok(false);
        }
        Ok(self.restriction(points)?.len() == want)
    }

    /// Exact VC dimension by exhaustive shattering search, largest sizes
    /// pruned by the hypothesis count.
    pub fn vc_dimension(&self) -> Result<usize> {
        if self.domain.len() > MAX_VC_DOMAIN {
            return Err(Error::resource(format!(
                "exact VC dimension capped at domain size {MAX_VC_DOMAIN}, got {}",
                self.domain.len()
            )));
        }
        // A class with H hypotheses shatters at most log2(H) points.
        let cap = (usize::BITS - 1 - self.hypotheses.len().leading_zeros()) as usize;
        let cap = cap.min(self.domain.len());
        let mut vc = 0;
        for size in 1..=cap {
            let mut found = false;
            for subset in self.domain.iter().copied().combinations(size) {
                if self.shatters(&subset)? {
                    found = true;
                    break;
                }
            }
            if !found {
                break;
            }
            vc = size;
        }
        Ok(vc)
    }

    /// First hypothesis consistent with every support point of `p`, if any.
    pub fn realizing_hypothesis(&self, p: &LabeledDistribution) -> Result<Option<usize>> {
        let support: Vec<(usize, u8)> = p
            .distribution()
            .iter()
            .map(|(e, _)| {
                let pos = self
                    .position_of(e.x)
                    .ok_or_else(|| Error::contract(format!("{} is not in the domain", e.x)))?;
                Ok((pos, e.y))
            })
            .collect::<Result<_>>()?;
        Ok(self
            .hypotheses
            .iter()
            .position(|row| support.iter().all(|&(pos, y)| row[pos] == y)))
    }

    /// Whether some hypothesis agrees with every support point of `p`.
    pub fn is_realizable(&self, p: &LabeledDistribution) -> Result<bool> {
        Ok(self.realizing_hypothesis(p)?.is_some())
    }

    /// Serializes to `{"domain":[...],"hypotheses":[[...],...],"blocks":...}`.
    pub fn to_json(&self) -> Value {
        let mut obj = json!({
            "domain": self.domain,
            "hypotheses": self.hypotheses,
        });
        if !self.blocks.is_empty() {
            let blocks: Vec<Value> = self
                .blocks
                .iter()
                .map(|b| json!([b.lo, b.hi, b.factor]))
                .collect();
            obj["blocks"] = Value::Array(blocks);
        }
        obj
    }

    /// Parses the [`Self::to_json`] wire form.
    pub fn from_json(v: &Value) -> Result<Self> {
        let domain: Vec<u32> = v
            .get("domain")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("class JSON lacks a \"domain\" array".into()))?
            .iter()
            .map(|x| {
                x.as_u64()
                    .and_then(|x| u32::try_from(x).ok())
                    .ok_or_else(|| Error::Parse(format!("bad domain id {x}")))
            })
            .collect::<Result<_>>()?;
        let hypotheses: Vec<Vec<u8>> = v
            .get("hypotheses")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("class JSON lacks a \"hypotheses\" array".into()))?
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| Error::Parse("hypothesis row is not an array".into()))?
                    .iter()
                    .map(|y| {
                        y.as_u64()
                            .and_then(|y| u8::try_from(y).ok())
                            .ok_or_else(|| Error::Parse(format!("bad label {y}")))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let mut blocks = Vec::new();
        if let Some(arr) = v.get("blocks").and_then(Value::as_array) {
            for b in arr {
                let trip = b
                    .as_array()
                    .filter(|t| t.len() == 3)
                    .ok_or_else(|| Error::Parse("block entry is not a [lo,hi,factor] triple".into()))?;
                let lo = trip[0]
                    .as_u64()
                    .and_then(|x| u32::try_from(x).ok())
                    .ok_or_else(|| Error::Parse("bad block lo".into()))?;
                let hi = trip[1]
                    .as_u64()
                    .and_then(|x| u32::try_from(x).ok())
                    .ok_or_else(|| Error::Parse("bad block hi".into()))?;
                let factor = trip[2]
                    .as_u64()
                    .and_then(|x| usize::try_from(x).ok())
                    .ok_or_else(|| Error::Parse("bad block factor".into()))?;
                // Offsets are reconstructible for 1-based consecutive factor
                // domains, the only kind the product constructor emits.
                blocks.push(BlockInfo { lo, hi, factor, offset: lo.saturating_sub(1) });
            }
        }
        Self::with_blocks(domain, hypotheses, blocks)
    }
}

/// The threshold class on a `2^n`-point domain: hypotheses `f_k` for
/// `k in [2^n + 1]`, where `f_k(x) = 1` iff `x >= k`. `f_1` is all-ones and
/// `f_{2^n+1}` all-zeros; rows are ordered by `k`.
pub fn make_thresholds(n: u32) -> Result<HypothesisClass> {
    if n < 1 {
        return Err(Error::contract("threshold class needs n >= 1"));
    }
    if n > MAX_THRESHOLD_BITS {
        return Err(Error::resource(format!(
            "threshold domains capped at 2^{MAX_THRESHOLD_BITS}, got 2^{n}"
        )));
    }
    let size = 1u32 << n;
    let domain: Vec<u32> = (1..=size).collect();
    let hypotheses = (1..=size + 1)
        .map(|k| domain.iter().map(|&x| u8::from(x >= k)).collect())
        .collect();
    HypothesisClass::new(domain, hypotheses)
}

/// The product class of the given factors: domains are relabeled onto
/// consecutive id blocks, and the hypotheses are all ways of picking one
/// hypothesis per factor (first factor slowest). Each point keeps its factor
/// and original coordinate via [`HypothesisClass::block_of`].
pub fn product(factors: &[HypothesisClass]) -> Result<HypothesisClass> {
    if factors.is_empty() {
        return Err(Error::contract("product of zero classes"));
    }
    let total_hyps: usize = factors
        .iter()
        .map(|f| f.num_hypotheses())
        .try_fold(1usize, |acc, n| acc.checked_mul(n))
        .filter(|&t| t <= 1_000_000)
        .ok_or_else(|| Error::resource("product class would exceed 1e6 hypotheses".to_string()))?;
    let mut domain = Vec::new();
    let mut blocks = Vec::new();
    let mut offset = 0u32;
    for (i, f) in factors.iter().enumerate() {
        let lo = offset + 1;
        let max_orig = *f.domain().iter().max().expect("nonempty domain");
        let min_orig = *f.domain().iter().min().expect("nonempty domain");
        if min_orig == 0 {
            return Err(Error::contract("factor domains must use positive ids"));
        }
        for &x in f.domain() {
            domain.push(offset + x);
        }
        blocks.push(BlockInfo { lo: offset + min_orig, hi: offset + max_orig, factor: i, offset });
        let _ = lo;
        offset += max_orig;
    }
    let mut hypotheses = Vec::with_capacity(total_hyps);
    let mut choice = vec![0usize; factors.len()];
    loop {
        let mut row = Vec::with_capacity(domain.len());
        for (f, &c) in factors.iter().zip(&choice) {
            row.extend_from_slice(&f.hypotheses()[c]);
        }
        hypotheses.push(row);
        let mut pos = factors.len();
        loop {
            if pos == 0 {
                return HypothesisClass::with_blocks(domain, hypotheses, blocks);
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < factors[pos].num_hypotheses() {
                break;
            }
            choice[pos] = 0;
        }
    }
}

/// A distribution over labeled examples; realizability against a class is
/// checked on demand via [`HypothesisClass::is_realizable`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDistribution {
    dist: FiniteDistribution<LabeledExample>,
}

impl LabeledDistribution {
    pub fn new(dist: FiniteDistribution<LabeledExample>) -> Self {
        LabeledDistribution { dist }
    }

    /// Builds from `((x, y), probability)` triples.
    pub fn from_points(points: Vec<((u32, u8), f64)>) -> Result<Self> {
        let support = points
            .into_iter()
            .map(|((x, y), p)| Ok((LabeledExample::new(x, y)?, p)))
            .collect::<Result<Vec<_>>>()?;
        Ok(LabeledDistribution { dist: FiniteDistribution::new(support)? })
    }

    pub fn distribution(&self) -> &FiniteDistribution<LabeledExample> {
        &self.dist
    }

    /// Serializes to `{"points":[{"x":id,"y":0/1,"p":num},...]}`.
    pub fn to_json(&self) -> Value {
        let points: Vec<Value> = self
            .dist
            .iter()
            .map(|(e, p)| json!({"x": e.x, "y": e.y, "p": p}))
            .collect();
        json!({ "points": points })
    }

    /// Parses the [`Self::to_json`] wire form.
    pub fn from_json(v: &Value) -> Result<Self> {
        let points = v
            .get("points")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("labeled distribution lacks a \"points\" array".into()))?;
        let mut support = Vec::with_capacity(points.len());
        for pt in points {
            let x = pt
                .get("x")
                .and_then(Value::as_u64)
                .and_then(|x| u32::try_from(x).ok())
                .ok_or_else(|| Error::Parse("point lacks a valid \"x\"".into()))?;
            let y = pt
                .get("y")
                .and_then(Value::as_u64)
                .and_then(|y| u8::try_from(y).ok())
                .ok_or_else(|| Error::Parse("point lacks a valid \"y\"".into()))?;
            let p = pt
                .get("p")
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::Parse("point lacks a numeric \"p\"".into()))?;
            support.push((LabeledExample::new(x, y)?, p));
        }
        Ok(LabeledDistribution { dist: FiniteDistribution::new(support)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_n1_rows() {
        let t = make_thresholds(1).unwrap();
        assert_eq!(t.domain(), &[1, 2]);
        assert_eq!(t.hypotheses(), &[vec![1, 1], vec![0, 1], vec![0, 0]]);
    }

    #[test]
    fn thresholds_count_is_domain_plus_one() {
        assert_eq!(make_thresholds(3).unwrap().num_hypotheses(), 9);
        assert_eq!(make_thresholds(2).unwrap().num_hypotheses(), 5);
    }

    #[test]
    fn first_threshold_row_is_all_ones() {
        let t = make_thresholds(2).unwrap();
        assert!(t.hypotheses()[0].iter().all(|&y| y == 1));
        assert!(t.hypotheses()[4].iter().all(|&y| y == 0));
    }

    #[test]
    fn threshold_rows_are_monotone_in_x() {
        let t = make_thresholds(3).unwrap();
        for row in t.hypotheses() {
            for w in row.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn thresholds_reject_bad_n() {
        assert!(make_thresholds(0).is_err());
        assert!(make_thresholds(MAX_THRESHOLD_BITS + 1).is_err());
    }

    #[test]
    fn product_of_two_unit_thresholds() {
        let t1 = make_thresholds(1).unwrap();
        let p = product(&[t1.clone(), t1]).unwrap();
        assert_eq!(p.num_hypotheses(), 9);
        assert_eq!(p.domain(), &[1, 2, 3, 4]);
        assert_eq!(p.blocks().len(), 2);
        assert_eq!(p.block_of(1), Some((0, 1)));
        assert_eq!(p.block_of(2), Some((0, 2)));
        assert_eq!(p.block_of(3), Some((1, 1)));
        assert_eq!(p.block_of(4), Some((1, 2)));
    }

    #[test]
    fn product_restriction_recovers_each_factor() {
        let t1 = make_thresholds(1).unwrap();
        let t2 = make_thresholds(2).unwrap();
        let p = product(&[t1.clone(), t2.clone()]).unwrap();
        let b0: Vec<u32> = (1..=2).collect();
        let b1: Vec<u32> = (3..=6).collect();
        let mut r0 = p.restriction(&b0).unwrap();
        let mut r1 = p.restriction(&b1).unwrap();
        r0.sort();
        r1.sort();
        let mut f0 = t1.hypotheses().to_vec();
        let mut f1 = t2.hypotheses().to_vec();
        f0.sort();
        f1.sort();
        assert_eq!(r0, f0);
        assert_eq!(r1, f1);
    }

    #[test]
    fn product_of_single_factor_is_the_factor() {
        let t = make_thresholds(2).unwrap();
        let p = product(std::slice::from_ref(&t)).unwrap();
        assert_eq!(p.domain(), t.domain());
        assert_eq!(p.hypotheses(), t.hypotheses());
    }

    #[test]
    fn empty_set_is_shattered() {
        let t = make_thresholds(1).unwrap();
        assert!(t.shatters(&[]).unwrap());
    }

    #[test]
    fn thresholds_shatter_no_pair() {
        // No monotone row can produce the pattern (1, 0) on an ordered pair.
        let t = make_thresholds(2).unwrap();
        for pair in t.domain().iter().copied().combinations(2) {
            assert!(!t.shatters(&pair).unwrap());
        }
    }

    #[test]
    fn full_cube_shatters_everything() {
        let rows: Vec<Vec<u8>> = (0..8u8)
            .map(|b| (0..3).map(|i| (b >> i) & 1).collect())
            .collect();
        let cube = HypothesisClass::new(vec![1, 2, 3], rows).unwrap();
        assert!(cube.shatters(&[1, 2, 3]).unwrap());
        assert_eq!(cube.vc_dimension().unwrap(), 3);
    }

    #[test]
    fn threshold_vc_dimension_is_one() {
        for n in 1..=3 {
            assert_eq!(make_thresholds(n).unwrap().vc_dimension().unwrap(), 1);
        }
    }

    #[test]
    fn product_threshold_vc_dimension_adds_up() {
        for (n, d) in [(1u32, 1usize), (1, 2), (2, 2), (1, 3)] {
            let t = make_thresholds(n).unwrap();
            let p = product(&vec![t; d]).unwrap();
            assert_eq!(p.vc_dimension().unwrap(), d, "n={n} d={d}");
        }
    }

    #[test]
    fn realizability_on_unit_thresholds() {
        let t = make_thresholds(1).unwrap();
        // (1,1) forces the all-ones row, which labels 2 with 1, not 0.
        let bad = LabeledDistribution::from_points(vec![((1, 1), 0.5), ((2, 0), 0.5)]).unwrap();
        assert!(!t.is_realizable(&bad).unwrap());
        // (1,0),(2,1) is exactly the middle threshold row.
        let good = LabeledDistribution::from_points(vec![((1, 0), 0.5), ((2, 1), 0.5)]).unwrap();
        assert_eq!(t.realizing_hypothesis(&good).unwrap(), Some(1));
    }

    #[test]
    fn point_mass_on_a_hypothesis_label_is_realizable() {
        let t = make_thresholds(2).unwrap();
        for (k, row) in t.hypotheses().iter().enumerate() {
            let x = 3u32;
            let y = row[t.position_of(x).unwrap()];
            let p = LabeledDistribution::from_points(vec![((x, y), 1.0)]).unwrap();
            assert!(t.is_realizable(&p).unwrap(), "k={k}");
        }
    }

    #[test]
    fn realizability_rejects_foreign_points() {
        let t = make_thresholds(1).unwrap();
        let p = LabeledDistribution::from_points(vec![((9, 1), 1.0)]).unwrap();
        assert!(t.is_realizable(&p).is_err());
    }

    #[test]
    fn labeled_example_rejects_bad_label() {
        assert!(LabeledExample::new(1, 2).is_err());
    }

    #[test]
    fn class_json_round_trip() {
        let t1 = make_thresholds(1).unwrap();
        let p = product(&[t1.clone(), t1]).unwrap();
        let back = HypothesisClass::from_json(&p.to_json()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn labeled_distribution_json_round_trip() {
        let d = LabeledDistribution::from_points(vec![((1, 0), 0.25), ((2, 1), 0.75)]).unwrap();
        let back = LabeledDistribution::from_json(&d.to_json()).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn class_validation_rejects_malformed_inputs() {
        assert!(HypothesisClass::new(vec![], vec![vec![]]).is_err());
        assert!(HypothesisClass::new(vec![1, 1], vec![vec![0, 1]]).is_err());
        assert!(HypothesisClass::new(vec![1, 2], vec![vec![0]]).is_err());
        assert!(HypothesisClass::new(vec![1, 2], vec![vec![0, 2]]).is_err());
        assert!(HypothesisClass::new(vec![1, 2], vec![vec![0, 1], vec![0, 1]]).is_err());
    }
}
