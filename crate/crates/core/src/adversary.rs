//! Adversarial lower-bound machinery for threshold classes: the symmetrized
//! output matrix of a consistent learner, packings of disjoint half-mass sets
//! along its lines, hard realizable distributions concentrated near one line,
//! and certified information lower bounds built from them, both for a single
//! sample size and for a random size drawn from a learner family.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use crate::cert::Certificate;
use crate::classes::{make_thresholds, LabeledDistribution, LabeledExample};
use crate::error::{Error, Result};
use crate::learners::{
    enumerate_realizable_samples, LearnerChannel, LearnerFamily, RealizableSample,
};
use crate::prob::{iid_product, FiniteDistribution, JointDistribution};
use crate::tol::{CONSTRUCTION_TOL, IDENTITY_TOL, INEQUALITY_TOL};

/// Certified floor on the event probability of a hard distribution whose
/// weight parameter equals the sample size: 1/(16e).
pub const EVENT_PROBABILITY_FLOOR: f64 = 1.0 / (16.0 * std::f64::consts::E);

/// Which line of the output matrix a packing lives on: entries read along a
/// row (the column index varies) or along a column (the row index varies).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Row,
    Column,
}

/// The symmetrized output law of a learner on canonical two-point samples.
///
/// Entry (i,j) with i != j is the learner's output distribution, as a law
/// over threshold values in 1..=size, on the sample with one 0-labeled
/// example at min(i,j), one 1-labeled example at max(i,j), and all remaining
/// examples anchored at (1,0). The diagonal entry (i,i) is the point mass at
/// i. Consistency confines entry (i,j) to (min(i,j), max(i,j)].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputMatrix {
    n: u32,
    size: u32,
    cells: Vec<FiniteDistribution<u32>>,
}

impl OutputMatrix {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    /// Entry at 1-based coordinates; panics out of range.
    pub fn cell(&self, i: u32, j: u32) -> &FiniteDistribution<u32> {
        assert!(
            (1..=self.size).contains(&i) && (1..=self.size).contains(&j),
            "matrix coordinates ({i},{j}) out of range 1..={}",
            self.size
        );
        &self.cells[((i - 1) * self.size + (j - 1)) as usize]
    }

    /// Checks the structural facts every entry must satisfy: point mass on
    /// the diagonal, support confined to (min(i,j), max(i,j)] elsewhere.
    pub fn verify_invariants(&self) -> Result<()> {
        for i in 1..=self.size {
            for j in 1..=self.size {
                let cell = self.cell(i, j);
                if i == j {
                    if cell.len() != 1 || cell.prob(&i) < 1.0 - CONSTRUCTION_TOL {
                        return Err(Error::falsified(format!(
                            "diagonal entry ({i},{i}) is not a point mass at {i}"
                        )));
                    }
                    continue;
                }
                let (lo, hi) = (i.min(j), i.max(j));
                for (&k, _) in cell.iter() {
                    if k <= lo || k > hi {
                        return Err(Error::falsified(format!(
                            "entry ({i},{j}) puts mass on {k} outside ({lo},{hi}]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = (1..=self.size)
            .map(|i| {
                Value::Array(
                    (1..=self.size)
                        .map(|j| self.cell(i, j).to_json_with(u32::to_string))
                        .collect(),
                )
            })
            .collect();
        json!({ "n": self.n, "size": self.size, "cells": rows })
    }
}

/// Builds the output matrix of a consistent learner over a threshold class
/// on 1..=2^n, symmetrizing the channel first so entries depend only on the
/// sample multiset.
pub fn build_output_matrix(a: &LearnerChannel) -> Result<OutputMatrix> {
    let class = a.class();
    let s = class.num_points();
    if s < 2 || !s.is_power_of_two() {
        return Err(Error::contract("output matrix needs a domain of size 2^n, n >= 1"));
    }
    let n = s.trailing_zeros();
    let thresholds = make_thresholds(n)?;
    if class.domain() != thresholds.domain() || class.hypotheses() != thresholds.hypotheses() {
        return Err(Error::contract("output matrix needs the threshold class on 1..=2^n"));
    }
    if a.m() < 2 {
        return Err(Error::contract("output matrix needs sample size at least 2"));
    }
    if !a.is_consistent()? {
        return Err(Error::contract("output matrix is defined for consistent learners"));
    }
    let sym = a.symmetrize()?;
    let size = s as u32;
    let mut cells = Vec::with_capacity(s * s);
    for i in 1..=size {
        for j in 1..=size {
            if i == j {
                cells.push(FiniteDistribution::point_mass(i));
                continue;
            }
            let (lo, hi) = (i.min(j), i.max(j));
            let mut examples = vec![LabeledExample::new(1, 0)?; a.m() - 2];
            examples.push(LabeledExample::new(lo, 0)?);
            examples.push(LabeledExample::new(hi, 1)?);
            let sample = RealizableSample::new(class, examples)?;
            let row = sym.row(&sample)?;
            cells.push(row.map_ids(|&h| h as u32 + 1)?);
        }
    }
    let q = OutputMatrix { n, size, cells };
    q.verify_invariants()?;
    Ok(q)
}

/// A line of the matrix together with pairwise-disjoint sets of threshold
/// values, one per chosen entry, each carrying at least half the entry's
/// mass. `entries` pairs the varying index with its set.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodRow {
    pub line: u32,
    pub orientation: Orientation,
    pub entries: Vec<(u32, Vec<u32>)>,
}

impl GoodRow {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The varying indices, in entry order.
    pub fn columns(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.0).collect()
    }

    /// Checks every claimed property against the matrix: distinct in-range
    /// indices, nonempty pairwise-disjoint sets, and at least half the
    /// entry's mass inside each set.
    pub fn validate(&self, q: &OutputMatrix) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::contract("a good row needs at least one entry"));
        }
        if !(1..=q.size()).contains(&self.line) {
            return Err(Error::contract("good row line index out of range"));
        }
        let mut seen = BTreeSet::new();
        let mut used = BTreeSet::new();
        for (k, set) in &self.entries {
            if !(1..=q.size()).contains(k) || !seen.insert(*k) {
                return Err(Error::contract(format!("bad or repeated entry index {k}")));
            }
            if set.is_empty() {
                return Err(Error::contract(format!("entry {k} has an empty set")));
            }
            let cell = match self.orientation {
                Orientation::Row => q.cell(self.line, *k),
                Orientation::Column => q.cell(*k, self.line),
            };
            let mut mass = 0.0;
            for v in set {
                if !(1..=q.size()).contains(v) || !used.insert(*v) {
                    return Err(Error::falsified(format!(
                        "set for entry {k} reuses or exceeds range at {v}"
                    )));
                }
                mass += cell.prob(v);
            }
            if mass + INEQUALITY_TOL < 0.5 {
                return Err(Error::falsified(format!(
                    "set for entry {k} carries mass {mass} < 1/2"
                )));
            }
        }
        Ok(())
    }
}

/// One matrix entry in scan order together with the interval of threshold
/// values its packing set may draw from.
struct PackCell<'a> {
    k: u32,
    dist: &'a FiniteDistribution<u32>,
    lo: u32,
    hi: u32,
}

/// Frontier greedy over one side of a line: accept an entry as soon as the
/// unconsumed part of its interval holds half its mass, then consume that
/// whole interval. Scans move away from the diagonal, so consumed intervals
/// never block later entries more than the accepted sets require.
fn greedy_pack(cells: &[PackCell], ascending: bool) -> Vec<(u32, Vec<u32>)> {
    let mut picked = Vec::new();
    let mut frontier: i64 = match cells.first() {
        Some(c) if ascending => c.lo as i64 - 1,
        Some(c) => c.hi as i64 + 1,
        None => return picked,
    };
    for c in cells {
        let (set_lo, set_hi) = if ascending {
            ((frontier + 1).max(c.lo as i64), c.hi as i64)
        } else {
            (c.lo as i64, (frontier - 1).min(c.hi as i64))
        };
        if set_lo > set_hi {
            continue;
        }
        let mut mass = 0.0;
        let mut set = Vec::new();
        for (&v, p) in c.dist.iter() {
            if (set_lo..=set_hi).contains(&(v as i64)) {
                mass += p;
                set.push(v);
            }
        }
        if mass + INEQUALITY_TOL >= 0.5 {
            picked.push((c.k, set));
            frontier = if ascending { c.hi as i64 } else { c.lo as i64 };
        }
    }
    picked
}

/// Exhaustive packing over point bitmasks, feasible for sizes up to 8:
/// every entry may take any half-mass subset of its admissible support,
/// disjointness tracked exactly.
fn dp_pack(cells: &[PackCell], num_points: u32) -> Vec<(u32, Vec<u32>)> {
    debug_assert!(num_points <= 8);
    let masks = 1usize << num_points;
    let num = cells.len();
    let mut best = vec![vec![0usize; masks]; num + 1];
    let mut choice = vec![vec![None::<usize>; masks]; num];
    for idx in (0..num).rev() {
        let c = &cells[idx];
        let mut supp_mask = 0usize;
        let mut mass_of = vec![0.0; masks];
        for (&v, p) in c.dist.iter() {
            if (c.lo..=c.hi).contains(&v) {
                let bit = 1usize << (v - 1);
                supp_mask |= bit;
                mass_of[bit] = p;
            }
        }
        for s in 1..masks {
            let low = s & s.wrapping_neg();
            if s != low {
                mass_of[s] = mass_of[s ^ low] + mass_of[low];
            }
        }
        for used in 0..masks {
            let mut b = best[idx + 1][used];
            let mut ch = None;
            let avail = supp_mask & !used;
            let mut s = avail;
            loop {
                if s != 0 && mass_of[s] + INEQUALITY_TOL >= 0.5 {
                    let cand = 1 + best[idx + 1][used | s];
                    if cand > b {
                        b = cand;
                        ch = Some(s);
                    }
                }
                if s == 0 {
                    break;
                }
                s = (s - 1) & avail;
            }
            best[idx][used] = b;
            choice[idx][used] = ch;
        }
    }
    let mut picked = Vec::new();
    let mut used = 0usize;
    for (idx, c) in cells.iter().enumerate() {
        if let Some(s) = choice[idx][used] {
            let set = (0..num_points).filter(|b| s >> b & 1 == 1).map(|b| b + 1).collect();
            picked.push((c.k, set));
            used |= s;
        }
    }
    picked
}

/// The entries of one side of a line in scan order (away from the diagonal),
/// each with its admissible interval.
fn side_cells(
    q: &OutputMatrix,
    line: u32,
    orientation: Orientation,
    include_diag: bool,
    exclude_one: bool,
) -> Vec<PackCell<'_>> {
    let mut cells = Vec::new();
    match orientation {
        Orientation::Row => {
            let start = if include_diag { line } else { line + 1 };
            for k in start..=q.size() {
                let (lo, hi) = if k == line { (line, line) } else { (line + 1, k) };
                cells.push(PackCell { k, dist: q.cell(line, k), lo, hi });
            }
        }
        Orientation::Column => {
            let start = if include_diag { line } else { line.saturating_sub(1) };
            let stop = if exclude_one { 2 } else { 1 };
            let mut k = start;
            while k >= stop && k >= 1 {
                let (lo, hi) = if k == line { (line, line) } else { (k + 1, line) };
                cells.push(PackCell { k, dist: q.cell(k, line), lo, hi });
                k -= 1;
            }
        }
    }
    cells
}

/// Best packing of one side of a line: greedy always, exhaustive refinement
/// when the matrix is small enough.
fn pack_side(
    q: &OutputMatrix,
    line: u32,
    orientation: Orientation,
    include_diag: bool,
    exclude_one: bool,
) -> Vec<(u32, Vec<u32>)> {
    let cells = side_cells(q, line, orientation, include_diag, exclude_one);
    let greedy = greedy_pack(&cells, orientation == Orientation::Row);
    if q.size() <= 8 {
        let dp = dp_pack(&cells, q.size());
        if dp.len() > greedy.len() {
            return dp;
        }
    }
    greedy
}

/// Finds a line holding at least `t` disjoint half-mass sets on one side of
/// (and including) the diagonal, scanning rows before columns.
pub fn find_good_row(q: &OutputMatrix, t: usize) -> Result<GoodRow> {
    if t == 0 {
        return Err(Error::contract("a good row needs t >= 1 entries"));
    }
    for line in 1..=q.size() {
        for orientation in [Orientation::Row, Orientation::Column] {
            let entries = pack_side(q, line, orientation, true, false);
            if entries.len() >= t {
                let g = GoodRow { line, orientation, entries };
                g.validate(q)?;
                return Ok(g);
            }
        }
    }
    Err(Error::falsified(format!(
        "no line of the matrix packs {t} disjoint half-mass sets"
    )))
}

/// Checks the packing guarantee behind the matrix construction: some whole
/// row (diagonal included) packs at least n+1 disjoint half-mass sets.
/// Entries left of the diagonal confine their sets to values at most the
/// line index and entries right of it to larger values, so the two sides
/// pack independently.
pub fn verify_row_guarantee(q: &OutputMatrix) -> Result<GoodRow> {
    let target = q.n() as usize + 1;
    let mut best: Option<GoodRow> = None;
    for line in 1..=q.size() {
        let mut entries = pack_side(q, line, Orientation::Column, true, false);
        entries.reverse();
        entries.extend(pack_side(q, line, Orientation::Row, false, false));
        if best.as_ref().map_or(true, |b| entries.len() > b.entries.len()) {
            best = Some(GoodRow { line, orientation: Orientation::Row, entries });
        }
    }
    let best = best.expect("matrix has at least one line");
    best.validate(q)?;
    if best.len() < target {
        return Err(Error::falsified(format!(
            "best row packs {} disjoint half-mass sets, below the guarantee {}",
            best.len(),
            target
        )));
    }
    Ok(best)
}

/// Best strictly-off-diagonal one-side packing across all lines. Column
/// scans stop above index 1 so the packing can anchor a hard distribution.
fn best_offdiag_side(q: &OutputMatrix) -> GoodRow {
    let mut best: Option<GoodRow> = None;
    for line in 1..=q.size() {
        for orientation in [Orientation::Row, Orientation::Column] {
            let mut entries = pack_side(q, line, orientation, false, true);
            if orientation == Orientation::Column {
                entries.reverse();
            }
            let better = match &best {
                None => !entries.is_empty(),
                Some(b) => entries.len() > b.entries.len(),
            };
            if better {
                best = Some(GoodRow { line, orientation, entries });
            }
        }
    }
    best.expect("a matrix of size >= 2 always packs one off-diagonal entry")
}

/// A realizable distribution splitting its mass between an anchor example
/// (1,0), one fixed example on the packing line, and a uniformly weighted
/// set of varying examples. With weight parameter t the anchor holds
/// 1 - 1/t, the fixed example 1/(2t), and the varying set 1/(2t) in total;
/// when the fixed example coincides with the anchor the two weights merge.
#[derive(Debug, Clone, PartialEq)]
pub struct HardDistribution {
    distribution: LabeledDistribution,
    t: usize,
    r: u32,
    varying: Vec<u32>,
    orientation: Orientation,
}

/// Hard distribution for a row packing: fixed example (r,0), varying
/// examples (k,1) for k in `varying`, all above r.
pub fn hard_distribution(r: u32, varying: &[u32], t: usize) -> Result<HardDistribution> {
    build_hard(r, varying, t, Orientation::Row)
}

/// Hard distribution for a column packing: fixed example (r,1), varying
/// examples (k,0) for k in `varying`, all strictly between 1 and r.
pub fn hard_distribution_mirrored(r: u32, varying: &[u32], t: usize) -> Result<HardDistribution> {
    build_hard(r, varying, t, Orientation::Column)
}

fn build_hard(r: u32, varying: &[u32], t: usize, orientation: Orientation) -> Result<HardDistribution> {
    if t < 2 {
        return Err(Error::contract("hard distribution needs weight parameter t >= 2"));
    }
    if r < 1 {
        return Err(Error::contract("hard distribution needs a fixed index r >= 1"));
    }
    let mut ks = varying.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks.len() != varying.len() {
        return Err(Error::contract("varying indices must be nonempty and distinct"));
    }
    match orientation {
        Orientation::Row if ks[0] <= r => {
            return Err(Error::contract("varying indices must exceed the fixed index"));
        }
        Orientation::Column if ks[0] < 2 || *ks.last().expect("nonempty") >= r => {
            return Err(Error::contract(
                "varying indices must lie strictly between 1 and the fixed index",
            ));
        }
        _ => {}
    }
    let tf = t as f64;
    let unit = 1.0 / (2.0 * tf * ks.len() as f64);
    let mut points = Vec::with_capacity(ks.len() + 2);
    match orientation {
        Orientation::Row => {
            if r == 1 {
                points.push(((1, 0), 1.0 - 1.0 / (2.0 * tf)));
            } else {
                points.push(((1, 0), 1.0 - 1.0 / tf));
                points.push(((r, 0), 1.0 / (2.0 * tf)));
            }
            points.extend(ks.iter().map(|&k| ((k, 1), unit)));
        }
        Orientation::Column => {
            points.push(((1, 0), 1.0 - 1.0 / tf));
            points.extend(ks.iter().map(|&k| ((k, 0), unit)));
            points.push(((r, 1), 1.0 / (2.0 * tf)));
        }
    }
    let distribution = LabeledDistribution::from_points(points)?;
    Ok(HardDistribution { distribution, t, r, varying: ks, orientation })
}

impl HardDistribution {
    pub fn distribution(&self) -> &LabeledDistribution {
        &self.distribution
    }

    pub fn weight_parameter(&self) -> usize {
        self.t
    }

    pub fn fixed_index(&self) -> u32 {
        self.r
    }

    pub fn varying(&self) -> &[u32] {
        &self.varying
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Position in `varying` of the single varying example, if the sample
    /// matches the event pattern: exactly one varying example, the fixed
    /// example once (absent when merged with the anchor), anchors elsewhere.
    pub fn varying_index(&self, examples: &[LabeledExample]) -> Option<usize> {
        let m = examples.len();
        if m < 2 {
            return None;
        }
        let fixed = match self.orientation {
            Orientation::Row if self.r == 1 => None,
            Orientation::Row => Some((self.r, 0u8)),
            Orientation::Column => Some((self.r, 1u8)),
        };
        let varying_label = match self.orientation {
            Orientation::Row => 1u8,
            Orientation::Column => 0u8,
        };
        let mut anchors = 0usize;
        let mut fixed_seen = 0usize;
        let mut varying_at = None;
        for e in examples {
            if (e.x, e.y) == (1, 0) {
                anchors += 1;
                continue;
            }
            if fixed == Some((e.x, e.y)) {
                fixed_seen += 1;
                continue;
            }
            if e.y == varying_label {
                if let Some(pos) = self.varying.iter().position(|&k| k == e.x) {
                    if varying_at.is_some() {
                        return None;
                    }
                    varying_at = Some(pos);
                    continue;
                }
            }
            return None;
        }
        let fixed_count = usize::from(fixed.is_some());
        if fixed_seen != fixed_count || anchors != m - 1 - fixed_count {
            return None;
        }
        varying_at
    }

    /// Whether the sample matches the event pattern.
    pub fn is_event(&self, examples: &[LabeledExample]) -> bool {
        self.varying_index(examples).is_some()
    }

    /// Exact probability that an i.i.d. sample of size m matches the event
    /// pattern: per varying index, the pattern's arrangement count times the
    /// product of member masses.
    pub fn event_probability(&self, m: usize) -> Result<f64> {
        if m < 2 {
            return Err(Error::contract("the event needs sample size at least 2"));
        }
        let p = self.distribution.distribution();
        let anchor = p.prob(&LabeledExample::new(1, 0)?);
        let varying_total = 1.0 / (2.0 * self.t as f64);
        let mf = m as f64;
        if self.orientation == Orientation::Row && self.r == 1 {
            return Ok(mf * anchor.powi(m as i32 - 1) * varying_total);
        }
        let fixed_label = if self.orientation == Orientation::Row { 0 } else { 1 };
        let fixed = p.prob(&LabeledExample::new(self.r, fixed_label)?);
        Ok(mf * (mf - 1.0) * anchor.powi(m as i32 - 2) * fixed * varying_total)
    }
}

/// Exact conditional quantities of a channel against a hard distribution at
/// one sample size, computed by full enumeration of the i.i.d. product.
struct EventAnalysis {
    full_mi: f64,
    cond: f64,
    conditional_on_event: f64,
    index_mi: f64,
    event_probability: f64,
    per_index_mass: Vec<f64>,
}

fn normalized_joint(axes: Vec<(&str, usize)>, mut cells: Vec<f64>) -> Result<JointDistribution> {
    let total: f64 = cells.iter().sum();
    if total <= 0.0 {
        return Err(Error::contract("cannot normalize an empty joint"));
    }
    for c in &mut cells {
        *c /= total;
    }
    JointDistribution::new(axes, cells)
}

fn analyze_event(a: &LearnerChannel, hard: &HardDistribution, m: usize) -> Result<EventAnalysis> {
    if a.m() != m {
        return Err(Error::contract("channel sample size does not match the analysis size"));
    }
    let class = a.class();
    let p = hard.distribution();
    if !class.is_realizable(p)? {
        return Err(Error::contract("hard distribution is not realizable for the class"));
    }
    let tuples = iid_product(p.distribution(), m)?;
    let num_h = class.num_hypotheses();
    let t = hard.varying().len();
    let mut weights = Vec::with_capacity(tuples.len());
    let mut rows = Vec::with_capacity(tuples.len());
    let mut index_of = Vec::with_capacity(tuples.len());
    for (tuple, w) in tuples.iter() {
        let sample = RealizableSample::new(class, tuple.clone())?;
        rows.push(a.row(&sample)?.clone());
        weights.push(w);
        index_of.push(hard.varying_index(tuple));
    }
    let mut full_cells = Vec::with_capacity(rows.len() * num_h);
    for (w, row) in weights.iter().zip(&rows) {
        for h in 0..num_h {
            full_cells.push(w * row.prob(&h));
        }
    }
    let full = normalized_joint(vec![("sample", rows.len()), ("hypothesis", num_h)], full_cells)?;
    let full_mi = full.mutual_information()?;

    let mut slices: [Vec<(f64, usize)>; 2] = [Vec::new(), Vec::new()];
    let mut per_index_mass = vec![0.0; t];
    for (i, u) in index_of.iter().enumerate() {
        match u {
            Some(pos) => {
                per_index_mass[*pos] += weights[i];
                slices[1].push((weights[i], i));
            }
            None => slices[0].push((weights[i], i)),
        }
    }
    let event_probability: f64 = per_index_mass.iter().sum();
    if event_probability <= 0.0 {
        return Err(Error::falsified("the event has zero probability"));
    }
    let mut slice_mi = [0.0; 2];
    for (e, members) in slices.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let mut cells = Vec::with_capacity(members.len() * num_h);
        for (w, i) in members {
            for h in 0..num_h {
                cells.push(w * rows[*i].prob(&h));
            }
        }
        let joint = normalized_joint(vec![("sample", members.len()), ("hypothesis", num_h)], cells)?;
        slice_mi[e] = joint.mutual_information()?;
    }
    let conditional_on_event = slice_mi[1];
    let cond = event_probability * slice_mi[1] + (1.0 - event_probability) * slice_mi[0];

    let mut index_cells = vec![0.0; t * num_h];
    for (w, i) in &slices[1] {
        let u = index_of[*i].expect("event slice members carry an index");
        for h in 0..num_h {
            index_cells[u * num_h + h] += w * rows[*i].prob(&h);
        }
    }
    let index_joint = normalized_joint(vec![("index", t), ("hypothesis", num_h)], index_cells)?;
    let index_mi = index_joint.mutual_information()?;

    Ok(EventAnalysis {
        full_mi,
        cond,
        conditional_on_event,
        index_mi,
        event_probability,
        per_index_mass,
    })
}

/// Mutual information between a uniform index and the output of the indexed
/// row distributions.
fn uniform_mixture_mi(rows: &[FiniteDistribution<usize>], num_h: usize) -> Result<f64> {
    let t = rows.len();
    let cells: Vec<f64> = rows
        .iter()
        .flat_map(|row| (0..num_h).map(move |h| row.prob(&h) / t as f64))
        .collect();
    normalized_joint(vec![("index", t), ("hypothesis", num_h)], cells)?.mutual_information()
}

/// Average of the channel's rows over all distinct arrangements of the event
/// sample whose varying example sits at k.
fn averaged_event_row(
    a: &LearnerChannel,
    hard: &HardDistribution,
    m: usize,
    k: u32,
) -> Result<FiniteDistribution<usize>> {
    let mut examples;
    match hard.orientation() {
        Orientation::Row => {
            let pad = if hard.fixed_index() == 1 { m - 1 } else { m - 2 };
            examples = vec![LabeledExample::new(1, 0)?; pad];
            if hard.fixed_index() != 1 {
                examples.push(LabeledExample::new(hard.fixed_index(), 0)?);
            }
            examples.push(LabeledExample::new(k, 1)?);
        }
        Orientation::Column => {
            examples = vec![LabeledExample::new(1, 0)?; m - 2];
            examples.push(LabeledExample::new(k, 0)?);
            examples.push(LabeledExample::new(hard.fixed_index(), 1)?);
        }
    }
    let sample = RealizableSample::new(a.class(), examples)?;
    let arrangements = sample.distinct_arrangements();
    let mut parts = Vec::with_capacity(arrangements.len());
    for arr in &arrangements {
        parts.push(a.row(arr)?);
    }
    let w = 1.0 / parts.len() as f64;
    FiniteDistribution::mixture(&parts.iter().map(|d| (w, *d)).collect::<Vec<_>>())
}

/// A certified single-size lower bound: against the returned hard
/// distribution the channel's information cost is at least
/// `event_probability * conditional_mi`, with `event_probability >= 1/(16e)`.
#[derive(Debug, Clone)]
pub struct ThresholdBound {
    pub hard: HardDistribution,
    pub good_row: GoodRow,
    pub mi: f64,
    pub conditional_mi: f64,
    pub event_probability: f64,
    pub certificate: Certificate,
}

/// Builds the adversarial distribution for a consistent learner over a
/// threshold class and certifies the induced information lower bound.
pub fn threshold_lower_bound(a: &LearnerChannel) -> Result<ThresholdBound> {
    let q = build_output_matrix(a)?;
    let good = best_offdiag_side(&q);
    bound_for_good_set(a, &q, good)
}

fn bound_for_good_set(a: &LearnerChannel, q: &OutputMatrix, good: GoodRow) -> Result<ThresholdBound> {
    good.validate(q)?;
    let m = a.m();
    let ks = good.columns();
    let hard = match good.orientation {
        Orientation::Row => hard_distribution(good.line, &ks, m)?,
        Orientation::Column => hard_distribution_mirrored(good.line, &ks, m)?,
    };
    let analysis = analyze_event(a, &hard, m)?;
    let mi = a.info_cost(hard.distribution())?;
    let num_h = a.class().num_hypotheses();
    let mut rows = Vec::with_capacity(ks.len());
    for &k in hard.varying() {
        rows.push(averaged_event_row(a, &hard, m, k)?);
    }
    let conditional_mi = uniform_mixture_mi(&rows, num_h)?;
    let pr = hard.event_probability(m)?;

    let mut cert = Certificate::new();
    cert.equality("cost-accounting", mi, analysis.full_mi, IDENTITY_TOL);
    cert.lower_bound("drop-indicator", analysis.full_mi, analysis.cond, INEQUALITY_TOL);
    cert.lower_bound(
        "conditioning-on-event",
        analysis.cond,
        pr * analysis.conditional_on_event,
        INEQUALITY_TOL,
    );
    cert.lower_bound(
        "index-data-processing",
        analysis.conditional_on_event,
        analysis.index_mi,
        INEQUALITY_TOL,
    );
    cert.equality("event-match", analysis.index_mi, conditional_mi, IDENTITY_TOL);
    cert.equality("event-probability-match", pr, analysis.event_probability, CONSTRUCTION_TOL);
    cert.lower_bound("event-probability-floor", pr, EVENT_PROBABILITY_FLOOR, CONSTRUCTION_TOL);
    let hi_u = per_mass_extreme(&analysis.per_index_mass, true);
    let lo_u = per_mass_extreme(&analysis.per_index_mass, false);
    cert.equality("uniform-on-event", hi_u, lo_u, CONSTRUCTION_TOL);
    cert.lower_bound("chain-total", mi, pr * conditional_mi, INEQUALITY_TOL);
    cert.verify()?;

    Ok(ThresholdBound {
        hard,
        good_row: good,
        mi,
        conditional_mi,
        event_probability: pr,
        certificate: cert,
    })
}

fn per_mass_extreme(masses: &[f64], max: bool) -> f64 {
    let fold = if max { f64::max } else { f64::min };
    masses.iter().copied().fold(if max { f64::MIN } else { f64::MAX }, fold)
}

/// Collapses a learner family into a single two-sample learner: on a sample
/// with one 0-labeled example at x0 and one 1-labeled at x1 it draws a size
/// from `mu`, pads the pair with anchors (1,0) up to that size, applies the
/// family member at a uniformly random arrangement, and returns its output;
/// on every other sample it returns the smallest consistent hypothesis.
pub fn build_two_sample_learner(
    family: &LearnerFamily,
    mu: &FiniteDistribution<usize>,
    support: &[LabeledExample],
) -> Result<LearnerChannel> {
    let sizes = family.sizes();
    for (&m, _) in mu.iter() {
        if m < 2 {
            return Err(Error::contract("the size distribution needs every size >= 2"));
        }
        if !sizes.contains(&m) {
            return Err(Error::contract(format!("the family has no channel for size {m}")));
        }
    }
    if !family.is_consistent()? {
        return Err(Error::contract("the family must be consistent"));
    }
    let class = family.class().clone();
    let samples = enumerate_realizable_samples(&class, support, 2)?;
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let zeros: Vec<_> = s.examples().iter().filter(|e| e.y == 0).collect();
        let ones: Vec<_> = s.examples().iter().filter(|e| e.y == 1).collect();
        let row = if zeros.len() == 1 && ones.len() == 1 {
            let mut weighted: Vec<(f64, FiniteDistribution<usize>)> = Vec::new();
            for (&m, w) in mu.iter() {
                let mut padded = vec![LabeledExample::new(1, 0)?; m - 2];
                padded.push(*zeros[0]);
                padded.push(*ones[0]);
                let base = RealizableSample::new(&class, padded)?;
                let arrangements = base.distinct_arrangements();
                let channel = family.channel(m)?;
                let aw = w / arrangements.len() as f64;
                for arr in &arrangements {
                    weighted.push((aw, channel.row(arr)?.clone()));
                }
            }
            let parts: Vec<(f64, &FiniteDistribution<usize>)> =
                weighted.iter().map(|(w, d)| (*w, d)).collect();
            FiniteDistribution::mixture(&parts)?
        } else {
            let consistent = s.consistent_hypotheses(&class)?;
            FiniteDistribution::point_mass(consistent[0])
        };
        rows.push((s, row));
    }
    LearnerChannel::new(class, 2, rows)
}

/// A certified lower bound on the expected information cost of a family
/// under a random sample size, chained through the two-sample collapse.
#[derive(Debug, Clone)]
pub struct RandomSizeBound {
    pub hard: HardDistribution,
    pub two_sample: LearnerChannel,
    pub good_row: GoodRow,
    pub expected_mi: f64,
    pub two_sample_conditional: f64,
    pub certificate: Certificate,
}

/// Certifies `expected_mi >= (1/(16e)) * (a/b)^2 * (two_sample_conditional - 1)`
/// for a consistent family over sizes in [a,b] weighted by `mu`, where
/// `two_sample_conditional` is the collapsed learner's conditional
/// information on the two-point event. Every chain step is verified as a
/// numbered certificate link.
pub fn random_size_lower_bound(
    family: &LearnerFamily,
    mu: &FiniteDistribution<usize>,
) -> Result<RandomSizeBound> {
    let mut used: Vec<usize> = mu.iter().map(|(&m, _)| m).collect();
    used.sort_unstable();
    let (a_min, b_max) = (used[0], *used.last().expect("nonempty distribution"));
    let class = family.class();
    let mut support = Vec::with_capacity(2 * class.num_points());
    for &x in class.domain() {
        support.push(LabeledExample::new(x, 0)?);
        support.push(LabeledExample::new(x, 1)?);
    }
    let two_sample = build_two_sample_learner(family, mu, &support)?;
    let q_matrix = build_output_matrix(&two_sample)?;
    let good = best_offdiag_side(&q_matrix);
    good.validate(&q_matrix)?;
    let ks = good.columns();
    let (q_hard, p_hard) = match good.orientation {
        Orientation::Row => {
            (hard_distribution(good.line, &ks, 2)?, hard_distribution(good.line, &ks, b_max)?)
        }
        Orientation::Column => (
            hard_distribution_mirrored(good.line, &ks, 2)?,
            hard_distribution_mirrored(good.line, &ks, b_max)?,
        ),
    };
    let floor = EVENT_PROBABILITY_FLOOR * (a_min as f64 / b_max as f64).powi(2);
    let num_h = class.num_hypotheses();
    let t = ks.len();

    let mut cert = Certificate::new();
    let mut expected_full = 0.0;
    let mut route_rows: Vec<(f64, Vec<FiniteDistribution<usize>>)> = Vec::new();
    let mut route_values = Vec::new();
    for (&m, w) in mu.iter() {
        let channel = family.channel(m)?;
        let analysis = analyze_event(channel, &p_hard, m)?;
        let mut rows = Vec::with_capacity(t);
        for &k in p_hard.varying() {
            rows.push(averaged_event_row(channel, &p_hard, m, k)?);
        }
        let route2 = uniform_mixture_mi(&rows, num_h)?;
        let pr = p_hard.event_probability(m)?;
        cert.lower_bound(format!("drop-indicator@m={m}"), analysis.full_mi, analysis.cond, INEQUALITY_TOL);
        cert.lower_bound(
            format!("conditioning-on-event@m={m}"),
            analysis.cond,
            pr * analysis.conditional_on_event,
            INEQUALITY_TOL,
        );
        cert.lower_bound(
            format!("index-data-processing@m={m}"),
            analysis.conditional_on_event,
            analysis.index_mi,
            INEQUALITY_TOL,
        );
        cert.equality(format!("event-match@m={m}"), analysis.index_mi, route2, IDENTITY_TOL);
        cert.equality(
            format!("event-probability-match@m={m}"),
            pr,
            analysis.event_probability,
            CONSTRUCTION_TOL,
        );
        cert.lower_bound(format!("event-probability-floor@m={m}"), pr, floor, CONSTRUCTION_TOL);
        let hi_u = per_mass_extreme(&analysis.per_index_mass, true);
        let lo_u = per_mass_extreme(&analysis.per_index_mass, false);
        cert.equality(format!("uniform-on-event@m={m}"), hi_u, lo_u, CONSTRUCTION_TOL);
        expected_full += w * analysis.full_mi;
        route_rows.push((w, rows));
        route_values.push((w, route2));
    }
    let expected_mi = family.expected_info_cost(p_hard.distribution(), mu)?;
    cert.equality("cost-accounting", expected_mi, expected_full, IDENTITY_TOL);

    // Joint of (index, hypothesis, size) with the index uniform and
    // independent of the size; conditioning on the size recovers the per-size
    // mixtures, marginalizing it recovers the collapsed learner's mixture.
    let num_sizes = route_rows.len();
    let mut bridge_cells = vec![0.0; t * num_h * num_sizes];
    for (si, (w, rows)) in route_rows.iter().enumerate() {
        for (u, row) in rows.iter().enumerate() {
            for h in 0..num_h {
                bridge_cells[(u * num_h + h) * num_sizes + si] = w * row.prob(&h) / t as f64;
            }
        }
    }
    let bridge = normalized_joint(
        vec![("index", t), ("hypothesis", num_h), ("size", num_sizes)],
        bridge_cells,
    )?;
    let index_given_size = bridge.conditional_mutual_information()?;
    let index_marginal = bridge.pair_marginal(0, 1)?.mutual_information()?;
    let mix_sum: f64 = route_values.iter().map(|(w, v)| w * v).sum();
    cert.equality("per-size-mixture", index_given_size, mix_sum, IDENTITY_TOL);
    cert.lower_bound("independence", index_given_size, index_marginal, INEQUALITY_TOL);

    let l_analysis = analyze_event(&two_sample, &q_hard, 2)?;
    let mut l_rows = Vec::with_capacity(t);
    for &k in q_hard.varying() {
        l_rows.push(averaged_event_row(&two_sample, &q_hard, 2, k)?);
    }
    let l_route2 = uniform_mixture_mi(&l_rows, num_h)?;
    cert.equality("family-bridge", index_marginal, l_route2, IDENTITY_TOL);
    cert.equality("two-sample-event-match", l_analysis.index_mi, l_route2, IDENTITY_TOL);
    cert.lower_bound(
        "order-bit",
        l_analysis.index_mi + 1.0,
        l_analysis.conditional_on_event,
        INEQUALITY_TOL,
    );
    let q_pr = q_hard.event_probability(2)?;
    cert.equality(
        "two-sample-event-probability-match",
        q_pr,
        l_analysis.event_probability,
        CONSTRUCTION_TOL,
    );
    cert.lower_bound("two-sample-event-floor", q_pr, EVENT_PROBABILITY_FLOOR, CONSTRUCTION_TOL);
    cert.lower_bound("two-sample-drop-indicator", l_analysis.full_mi, l_analysis.cond, INEQUALITY_TOL);
    cert.lower_bound(
        "two-sample-conditioning",
        l_analysis.cond,
        q_pr * l_analysis.conditional_on_event,
        INEQUALITY_TOL,
    );

    let two_sample_conditional = l_analysis.conditional_on_event;
    cert.lower_bound(
        "chain-final",
        expected_mi,
        floor * (two_sample_conditional - 1.0),
        INEQUALITY_TOL,
    );
    cert.verify()?;

    Ok(RandomSizeBound {
        hard: p_hard,
        two_sample,
        good_row: good,
        expected_mi,
        two_sample_conditional,
        certificate: cert,
    })
}
