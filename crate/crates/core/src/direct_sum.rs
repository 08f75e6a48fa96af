//! Information accounting across the blocks of a product class: splitting a
//! sample into per-factor subsamples, the superadditivity of information cost
//! over factors, and a certified reduction that turns one learner for a
//! product class into a per-factor learner whose sample size is binomially
//! distributed and window-conditioned.
//!
//! Everything here is exhaustive enumeration over finite supports; the only
//! approximations are the tolerances of the emitted certificate links.

use std::collections::BTreeMap;

use itertools::Itertools;
use serde_json::{json, Value};

use crate::cert::Certificate;
use crate::classes::{HypothesisClass, LabeledDistribution, LabeledExample};
use crate::error::{Error, Result};
use crate::game::MetaDistribution;
use crate::learners::{
    enumerate_realizable_samples, LearnerChannel, LearnerFamily, RealizableSample,
};
use crate::prob::{conditioned_binomial, iid_product, FiniteDistribution, JointDistribution};
use crate::tol::{CONSTRUCTION_TOL, IDENTITY_TOL, INEQUALITY_TOL};

/// Assemblies of one coin-channel row are capped at this many filler
/// sequences; beyond it the off-block enumeration is refused as a resource
/// error rather than silently subsampled.
const MAX_FILLER_SEQUENCES: u64 = 100_000;

/// Induced mixtures enumerate one atom per factor; the combination count is
/// capped here.
const MAX_ATOM_COMBINATIONS: usize = 10_000;

// ---------------------------------------------------------------------------
// Sample splitting.

/// A sample routed to the blocks of a product class: part `i` holds the
/// subsequence of examples that landed in block `i`, rewritten to the
/// factor's own coordinates and keeping their original order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSplit {
    parts: Vec<Vec<LabeledExample>>,
}

impl SampleSplit {
    pub fn parts(&self) -> &[Vec<LabeledExample>] {
        &self.parts
    }

    /// Examples per block, summing to the sample size.
    pub fn counts(&self) -> Vec<usize> {
        self.parts.iter().map(Vec::len).collect()
    }

    pub fn num_blocks(&self) -> usize {
        self.parts.len()
    }
}

/// Splits a sample along the block structure of `class`. Fails on classes
/// without blocks and on examples outside every block.
pub fn split_sample(class: &HypothesisClass, sample: &RealizableSample) -> Result<SampleSplit> {
    let blocks = class.blocks();
    if blocks.is_empty() {
        return Err(Error::contract(
            "sample splitting needs a class with block structure",
        ));
    }
    let mut parts = vec![Vec::new(); blocks.len()];
    for e in sample.examples() {
        let (factor, original) = class.block_of(e.x).ok_or_else(|| {
            Error::contract(format!("example id {} lies outside every block", e.x))
        })?;
        parts[factor].push(LabeledExample::new(original, e.y)?);
    }
    Ok(SampleSplit { parts })
}

// ---------------------------------------------------------------------------
// Superadditivity of information cost.

/// Per-factor view of a channel under one data distribution: the information
/// the output carries about the block-`i` subsample given its size, together
/// with the size distribution and the per-size slice values.
struct FactorTable {
    cmi: f64,
    /// Conditional mutual information with the conditioner re-encoded as the
    /// pair (size, size-in-window indicator); equal to `cmi` up to rounding.
    regrouped_cmi: f64,
    /// `Pr[count = t]` for `t` in `0..=m`.
    slice_mass: Vec<f64>,
    /// Mutual information between output and subsample on the `count = t`
    /// slice; zero where the slice has no mass.
    slice_mi: Vec<f64>,
}

/// Enumerates `S ~ p^m` through `channel` once and tabulates, for every
/// factor, the joint of (subsample, projected output, subsample size).
/// `factor_h_of[i][h]` projects output `h` to factor `i` and takes values in
/// `0..widths[i]`. Returns the full sample/output mutual information and one
/// table per factor.
fn block_tables(
    channel: &LearnerChannel,
    p: &LabeledDistribution,
    window: (usize, usize),
    factor_h_of: &[Vec<usize>],
    widths: &[usize],
) -> Result<(f64, Vec<FactorTable>)> {
    let class = channel.class();
    let d = class.blocks().len();
    let m = channel.m();
    let nh = class.num_hypotheses();
    let iid = iid_product(p.distribution(), m)?;

    let mut rows = Vec::new();
    for (examples, mass) in iid.iter() {
        let s = RealizableSample::new(class, examples.clone())?;
        let split = split_sample(class, &s)?;
        rows.push((split, channel.row(&s)?, mass));
    }

    let mut full_cells = vec![0.0; rows.len() * nh];
    for (ti, (_, row, mass)) in rows.iter().enumerate() {
        for (&h, pr) in row.iter() {
            full_cells[ti * nh + h] += mass * pr;
        }
    }
    let full = JointDistribution::new(vec![("sample", rows.len()), ("hypothesis", nh)], full_cells)?
        .mutual_information()?;

    let mut tables = Vec::with_capacity(d);
    for i in 0..d {
        let mut keys: BTreeMap<&[LabeledExample], usize> = BTreeMap::new();
        for (split, _, _) in &rows {
            let next = keys.len();
            keys.entry(&split.parts()[i]).or_insert(next);
        }
        let (ns, w) = (keys.len(), widths[i]);
        let mut cells = vec![0.0; ns * w * (m + 1)];
        for (split, row, mass) in &rows {
            let si = keys[split.parts()[i].as_slice()];
            let count = split.parts()[i].len();
            for (&h, pr) in row.iter() {
                cells[(si * w + factor_h_of[i][h]) * (m + 1) + count] += mass * pr;
            }
        }
        let joint = JointDistribution::new(
            vec![("subsample", ns), ("hypothesis", w), ("count", m + 1)],
            cells.clone(),
        )?;
        let cmi = joint.conditional_mutual_information()?;

        // Re-encode the conditioner as the pair (count, in-window indicator):
        // the pair determines and is determined by the count, so conditioning
        // on it must not change the value.
        let in_window = |t: usize| usize::from(t >= window.0 && t <= window.1);
        let mut pair_cells = vec![0.0; ns * w * 2 * (m + 1)];
        for si in 0..ns {
            for h in 0..w {
                for t in 0..=m {
                    pair_cells[(si * w + h) * 2 * (m + 1) + in_window(t) * (m + 1) + t] +=
                        cells[(si * w + h) * (m + 1) + t];
                }
            }
        }
        let regrouped_cmi = JointDistribution::new(
            vec![("subsample", ns), ("hypothesis", w), ("count-and-window", 2 * (m + 1))],
            pair_cells,
        )?
        .conditional_mutual_information()?;

        let mut slice_mass = vec![0.0; m + 1];
        let mut slice_mi = vec![0.0; m + 1];
        for t in 0..=m {
            if let Some((mass, slice)) = joint.condition_on_last(t)? {
                slice_mass[t] = mass;
                slice_mi[t] = slice.mutual_information()?;
            }
        }
        tables.push(FactorTable { cmi, regrouped_cmi, slice_mass, slice_mi });
    }
    Ok((full, tables))
}

/// Interns each hypothesis's restriction to every block, so outputs that
/// label a block identically collapse to one value. Returns the projection
/// table and the number of distinct restrictions per block.
fn block_label_projection(class: &HypothesisClass) -> Result<(Vec<Vec<usize>>, Vec<usize>)> {
    let d = class.blocks().len();
    let mut block_domain = vec![Vec::new(); d];
    for &x in class.domain() {
        let (factor, _) = class
            .block_of(x)
            .ok_or_else(|| Error::contract(format!("domain id {x} lies outside every block")))?;
        block_domain[factor].push(x);
    }
    let mut projection = Vec::with_capacity(d);
    let mut widths = Vec::with_capacity(d);
    for dom in &block_domain {
        let mut seen: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
        let mut h_of = Vec::with_capacity(class.num_hypotheses());
        for h in 0..class.num_hypotheses() {
            let labels: Vec<u8> =
                dom.iter().map(|&x| class.label(h, x)).collect::<Result<_>>()?;
            let next = seen.len();
            h_of.push(*seen.entry(labels).or_insert(next));
        }
        projection.push(h_of);
        widths.push(seen.len());
    }
    Ok((projection, widths))
}

/// Slack of the superadditivity inequality for one channel and one data
/// distribution: `I(S; A(S)) - sum_i I(A_i(S); S_i | |S_i|)`, where `S_i` is
/// the block-`i` subsample and `A_i` the output's block-`i` labeling. The
/// slack is nonnegative for every channel on a blocked class; a value below
/// `-INEQUALITY_TOL` is reported as a falsified property.
pub fn superadditivity_gap(a: &LearnerChannel, p: &LabeledDistribution, m: usize) -> Result<f64> {
    if a.m() != m {
        return Err(Error::contract(format!(
            "channel draws {} examples, gap requested for {m}",
            a.m()
        )));
    }
    let class = a.class();
    if class.blocks().is_empty() {
        return Err(Error::contract(
            "superadditivity needs a class with block structure",
        ));
    }
    if !class.is_realizable(p)? {
        return Err(Error::contract(
            "superadditivity gap needs a realizable distribution",
        ));
    }
    let (projection, widths) = block_label_projection(class)?;
    let (full, tables) = block_tables(a, p, (0, m), &projection, &widths)?;
    let gap = full - tables.iter().map(|t| t.cmi).sum::<f64>();
    if gap < -INEQUALITY_TOL {
        return Err(Error::falsified(format!(
            "information cost {full} fell below its per-factor accounting by {gap}"
        )));
    }
    Ok(gap)
}

// ---------------------------------------------------------------------------
// Induced mixtures over a product class.

/// Per-factor adversaries combined into one adversary for the product class:
/// each combination of one atom per factor induces the distribution that
/// picks a factor uniformly and then draws from that factor's atom,
/// relabeled onto the product domain.
#[derive(Debug, Clone)]
pub struct MixtureMeta {
    factors: Vec<MetaDistribution>,
    induced: MetaDistribution,
    combos: Vec<Vec<usize>>,
}

impl MixtureMeta {
    pub fn factors(&self) -> &[MetaDistribution] {
        &self.factors
    }

    pub fn induced(&self) -> &MetaDistribution {
        &self.induced
    }

    /// Atom indices per factor, aligned with the induced atoms: combination
    /// `k` picks atom `combos()[k][i]` from factor `i`.
    pub fn combos(&self) -> &[Vec<usize>] {
        &self.combos
    }

    pub fn to_json(&self) -> Value {
        json!({
            "factors": self.factors.iter().map(MetaDistribution::to_json).collect::<Vec<_>>(),
            "induced": self.induced.to_json(),
            "combos": self.combos,
        })
    }
}

/// Builds the induced adversary on a product class from one adversary per
/// factor. Combination weights are the products of the atom weights; the
/// first factor varies slowest, matching the hypothesis order of the class.
pub fn mixture_meta(class: &HypothesisClass, metas: &[MetaDistribution]) -> Result<MixtureMeta> {
    let blocks = class.blocks();
    if blocks.is_empty() || blocks.len() != metas.len() {
        return Err(Error::contract(format!(
            "class has {} blocks but {} factor adversaries were supplied",
            blocks.len(),
            metas.len()
        )));
    }
    let d = metas.len();
    let sizes: Vec<usize> = metas.iter().map(MetaDistribution::len).collect();
    let total: usize = sizes.iter().product();
    if total > MAX_ATOM_COMBINATIONS {
        return Err(Error::resource(format!(
            "induced mixture would enumerate {total} atom combinations"
        )));
    }
    let mut combos = Vec::with_capacity(total);
    let mut atoms = Vec::with_capacity(total);
    for k in 0..total {
        let mut combo = vec![0usize; d];
        let mut rest = k;
        for i in (0..d).rev() {
            combo[i] = rest % sizes[i];
            rest /= sizes[i];
        }
        let mut weight = 1.0;
        let mut points = Vec::new();
        for (i, meta) in metas.iter().enumerate() {
            let (atom, w) = &meta.atoms()[combo[i]];
            weight *= w;
            for (e, mass) in atom.distribution().iter() {
                points.push(((e.x + blocks[i].offset, e.y), mass / d as f64));
            }
        }
        atoms.push((LabeledDistribution::from_points(points)?, weight));
        combos.push(combo);
    }
    let induced = MetaDistribution::new(class, atoms)?;
    Ok(MixtureMeta { factors: metas.to_vec(), induced, combos })
}

/// The window retention floor `1 - 2 exp(-m / (2d))`: a lower bound on the
/// probability that a binomial count of `d * m` trials at rate `1/d` lands
/// within `[m/2, 3m/2]`. Negative for small `m / d`, in which case the
/// headline bound it feeds is vacuous but still checked.
pub fn alpha_factor(m: usize, d: usize) -> Result<f64> {
    if m == 0 || d == 0 {
        return Err(Error::contract("window floor needs positive m and d"));
    }
    Ok(1.0 - 2.0 * (-(m as f64) / (2.0 * d as f64)).exp())
}

// ---------------------------------------------------------------------------
// The certified product-to-factor reduction.

/// Verified decomposition of a product class: hypothesis strides for
/// extracting factor components, and the block offsets for relabeling.
struct ProductLayout {
    strides: Vec<usize>,
    sizes: Vec<usize>,
}

impl ProductLayout {
    fn component(&self, h: usize, factor: usize) -> usize {
        (h / self.strides[factor]) % self.sizes[factor]
    }
}

/// Checks exhaustively that `class` is the product of `factors` in order:
/// block count, hypothesis count, and every label of every hypothesis.
fn product_layout(class: &HypothesisClass, factors: &[HypothesisClass]) -> Result<ProductLayout> {
    let blocks = class.blocks();
    if blocks.is_empty() || blocks.len() != factors.len() {
        return Err(Error::contract(format!(
            "class has {} blocks but {} factors were supplied",
            blocks.len(),
            factors.len()
        )));
    }
    let sizes: Vec<usize> = factors.iter().map(HypothesisClass::num_hypotheses).collect();
    if sizes.iter().product::<usize>() != class.num_hypotheses() {
        return Err(Error::contract(
            "hypothesis count does not match the product of the factors",
        ));
    }
    let mut strides = vec![1usize; factors.len()];
    for i in (0..factors.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * sizes[i + 1];
    }
    let layout = ProductLayout { strides, sizes };
    for h in 0..class.num_hypotheses() {
        for (i, factor) in factors.iter().enumerate() {
            let c = layout.component(h, i);
            for &x in factor.domain() {
                if class.label(h, x + blocks[i].offset)? != factor.label(c, x)? {
                    return Err(Error::contract(
                        "class labels are not the product of the supplied factors",
                    ));
                }
            }
        }
    }
    Ok(layout)
}

/// All weighted off-block filler sequences of length `r` over `points`.
fn filler_sequences(
    points: &[(LabeledExample, f64)],
    r: usize,
) -> Vec<(Vec<LabeledExample>, f64)> {
    let mut seqs = vec![(Vec::new(), 1.0)];
    for _ in 0..r {
        let mut next = Vec::with_capacity(seqs.len() * points.len());
        for (seq, w) in &seqs {
            for (e, q) in points {
                let mut longer = seq.clone();
                longer.push(*e);
                next.push((longer, w * q));
            }
        }
        seqs = next;
    }
    seqs
}

/// Outcome of [`direct_sum_check`]: the certificate chain, the expected
/// information cost of the product channel under the induced adversary, and
/// the constants the headline bound was assembled from.
#[derive(Debug, Clone)]
pub struct DirectSumCheck {
    pub certificate: Certificate,
    pub mixture: MixtureMeta,
    pub expected_cost: f64,
    pub alpha: f64,
    pub window_probability: f64,
    pub factor_values: Vec<f64>,
}

impl DirectSumCheck {
    pub fn to_json(&self) -> Value {
        json!({
            "certificate": self.certificate.to_json(),
            "meta": self.mixture.to_json(),
            "expected_cost": self.expected_cost,
            "alpha": self.alpha,
            "window_probability": self.window_probability,
            "factor_values": self.factor_values,
        })
    }
}

/// Certifies, link by link, that one channel for a product class pays at
/// least `alpha * sum_i factor_values[i]` bits of expected information cost
/// under the adversary induced by the per-factor adversaries `metas`.
///
/// `factor_values[i]` must be a sound lower bound on the factor-`i` game at
/// adversary `metas[i]` with the window-conditioned binomial size mixture,
/// over consistent learners; lower bounds above zero therefore require
/// `product_channel` to be consistent. The certificate rebuilds the chain
/// numerically: per induced atom it re-derives the channel's cost and the
/// per-factor conditional informations, drops the out-of-window sizes, and
/// re-expresses the retained slices as the cost of an explicitly assembled
/// per-factor channel (position subsets plus off-block fillers); those costs
/// are then averaged and compared against the supplied factor values.
pub fn direct_sum_check(
    product_channel: &LearnerChannel,
    factor_classes: &[HypothesisClass],
    metas: &[MetaDistribution],
    budget: usize,
    factor_values: &[f64],
) -> Result<DirectSumCheck> {
    let class = product_channel.class();
    let d = factor_classes.len();
    if metas.len() != d || factor_values.len() != d {
        return Err(Error::contract(format!(
            "{d} factors but {} adversaries and {} factor values",
            metas.len(),
            factor_values.len()
        )));
    }
    if d > 2 || budget > 2 {
        return Err(Error::resource(format!(
            "reduction check enumerates full joints; capped at 2 factors and \
             per-factor budget 2, got {d} and {budget}"
        )));
    }
    for meta in metas {
        for (atom, _) in meta.atoms() {
            if atom.distribution().len() > 3 {
                return Err(Error::resource(
                    "factor atoms are capped at 3 support points".to_string(),
                ));
            }
        }
    }
    let layout = product_layout(class, factor_classes)?;
    let dm = d * budget;
    if product_channel.m() != dm {
        return Err(Error::contract(format!(
            "channel draws {} examples, the reduction needs {d} * {budget}",
            product_channel.m()
        )));
    }
    if factor_values.iter().any(|&c| c > 0.0) && !product_channel.is_consistent()? {
        return Err(Error::contract(
            "factor values above zero assume a consistent channel",
        ));
    }

    let mixture = mixture_meta(class, metas)?;
    let cb = conditioned_binomial(d, budget)?;
    let mu = cb.distribution();
    let window = cb.window();
    let pr_window = cb.window_probability();
    let alpha = alpha_factor(budget, d)?;

    let factor_h_of: Vec<Vec<usize>> = (0..d)
        .map(|i| (0..class.num_hypotheses()).map(|h| layout.component(h, i)).collect())
        .collect();

    let mut cert = Certificate::new();
    cert.lower_bound("window-floor", pr_window, alpha, 0.0);

    // Phase 1: per induced atom, account the channel's cost into per-factor
    // window-conditioned slice informations.
    let mut expected_cost = 0.0;
    let mut mixes = vec![Vec::new(); d];
    let mut all_tables = Vec::new();
    for (k, (p, _)) in mixture.induced().atoms().iter().enumerate() {
        let cost = product_channel.info_cost(p)?;
        let (full, tables) = block_tables(product_channel, p, window, &factor_h_of, &layout.sizes)?;
        cert.equality(format!("product-cost@atom={k}"), cost, full, IDENTITY_TOL);
        for (i, t) in tables.iter().enumerate() {
            cert.equality(
                format!("indicator-regroup@atom={k},factor={i}"),
                t.cmi,
                t.regrouped_cmi,
                IDENTITY_TOL,
            );
            let pr_e: f64 = (window.0..=window.1).map(|s| t.slice_mass[s]).sum();
            cert.equality(
                format!("window-mass@atom={k},factor={i}"),
                pr_e,
                pr_window,
                CONSTRUCTION_TOL,
            );
            let retained: f64 =
                (window.0..=window.1).map(|s| t.slice_mass[s] * t.slice_mi[s]).sum();
            cert.lower_bound(
                format!("drop-off-window@atom={k},factor={i}"),
                t.cmi,
                retained,
                INEQUALITY_TOL,
            );
            let mix: f64 = mu.iter().map(|(&s, w)| w * t.slice_mi[s]).sum();
            cert.equality(
                format!("size-mixture@atom={k},factor={i}"),
                retained / pr_e,
                mix,
                IDENTITY_TOL,
            );
            mixes[i].push(mix);
        }
        cert.lower_bound(
            format!("superadditivity@atom={k}"),
            cost,
            tables.iter().map(|t| t.cmi).sum(),
            INEQUALITY_TOL,
        );
        expected_cost += mixture.induced().atoms()[k].1 * cost;
        all_tables.push(tables);
    }

    // Phase 2: per factor and per assignment of the other factors' atoms,
    // assemble the coin channel, equate its per-size costs with the slice
    // informations from phase 1, and bound its game value by the supplied
    // factor value.
    let sizes: Vec<usize> = metas.iter().map(MetaDistribution::len).collect();
    let combo_index = |combo: &[usize]| -> usize {
        combo.iter().zip(&sizes).fold(0, |acc, (&c, &s)| acc * s + c)
    };
    for i in 0..d {
        let factor_support: Vec<LabeledExample> = {
            let mut pts: Vec<LabeledExample> = metas[i]
                .atoms()
                .iter()
                .flat_map(|(a, _)| a.distribution().iter().map(|(e, _)| *e))
                .collect();
            pts.sort();
            pts.dedup();
            pts
        };
        let mut others = vec![Vec::new()];
        for (j, meta) in metas.iter().enumerate() {
            if j == i {
                continue;
            }
            let mut next = Vec::new();
            for prefix in &others {
                for a in 0..meta.len() {
                    let mut longer: Vec<usize> = prefix.clone();
                    longer.push(a);
                    next.push(longer);
                }
            }
            others = next;
        }

        let mut expected_value = 0.0;
        for (gi, g) in others.iter().enumerate() {
            let mut filler_points = Vec::new();
            let mut g_weight = 1.0;
            {
                let mut pos = 0;
                for (j, meta) in metas.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let (atom, w) = &meta.atoms()[g[pos]];
                    g_weight *= w;
                    for (e, mass) in atom.distribution().iter() {
                        filler_points.push((
                            LabeledExample::new(e.x + class.blocks()[j].offset, e.y)?,
                            mass / (d - 1) as f64,
                        ));
                    }
                    pos += 1;
                }
            }

            let mut channels = Vec::new();
            for (&t, _) in mu.iter() {
                let r = dm - t;
                let seq_count = (filler_points.len() as u64).pow(r as u32);
                if r > 0 && seq_count > MAX_FILLER_SEQUENCES {
                    return Err(Error::resource(format!(
                        "coin channel would enumerate {seq_count} filler sequences"
                    )));
                }
                let fillers = filler_sequences(&filler_points, r);
                let positions: Vec<Vec<usize>> = (0..dm).combinations(t).collect();
                let pos_weight = 1.0 / positions.len() as f64;
                let mut rows = Vec::new();
                for s in enumerate_realizable_samples(&factor_classes[i], &factor_support, t)? {
                    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
                    for pos_set in &positions {
                        for (filler, fw) in &fillers {
                            let mut examples = Vec::with_capacity(dm);
                            let (mut si, mut oi) = (0, 0);
                            for pos in 0..dm {
                                if si < pos_set.len() && pos_set[si] == pos {
                                    let e = s.examples()[si];
                                    examples.push(LabeledExample::new(
                                        e.x + class.blocks()[i].offset,
                                        e.y,
                                    )?);
                                    si += 1;
                                } else {
                                    examples.push(filler[oi]);
                                    oi += 1;
                                }
                            }
                            let assembled = RealizableSample::new(class, examples)?;
                            for (&h, pr) in product_channel.row(&assembled)?.iter() {
                                *acc.entry(layout.component(h, i)).or_insert(0.0) +=
                                    pos_weight * fw * pr;
                            }
                        }
                    }
                    let dist = FiniteDistribution::new(
                        acc.into_iter().filter(|&(_, p)| p > 0.0).collect(),
                    )?;
                    rows.push((s, dist));
                }
                channels.push(LearnerChannel::new(factor_classes[i].clone(), t, rows)?);
            }
            let family = LearnerFamily::new(channels)?;
            if factor_values[i] > 0.0 && !family.is_consistent()? {
                return Err(Error::falsified(format!(
                    "assembled factor-{i} channel is inconsistent, so the factor \
                     value does not apply"
                )));
            }

            let mut value = 0.0;
            for (a, (atom, w)) in metas[i].atoms().iter().enumerate() {
                let mut combo = g.clone();
                combo.insert(i, a);
                let k = combo_index(&combo);
                for (&t, _) in mu.iter() {
                    cert.equality(
                        format!("coin-reduction@atom={k},factor={i},size={t}"),
                        all_tables[k][i].slice_mi[t],
                        family.channel(t)?.info_cost(atom)?,
                        IDENTITY_TOL,
                    );
                }
                value += w * family.expected_info_cost(atom, mu)?;
            }
            cert.lower_bound(
                format!("factor-game@factor={i},others={gi}"),
                value,
                factor_values[i],
                INEQUALITY_TOL,
            );
            expected_value += g_weight * value;
        }

        let mixed: f64 = mixture
            .induced()
            .atoms()
            .iter()
            .zip(&mixes[i])
            .map(|((_, w), mix)| w * mix)
            .sum();
        cert.equality(
            format!("expected-factor-cost@factor={i}"),
            mixed,
            expected_value,
            IDENTITY_TOL,
        );
        cert.lower_bound(format!("factor-floor@factor={i}"), mixed, factor_values[i], INEQUALITY_TOL);
    }

    // Headline assembly across atoms and factors.
    let weights: Vec<f64> = mixture.induced().atoms().iter().map(|(_, w)| *w).collect();
    let agg_cmi: f64 = all_tables
        .iter()
        .zip(&weights)
        .map(|(tables, w)| w * tables.iter().map(|t| t.cmi).sum::<f64>())
        .sum();
    let agg_mix: f64 = (0..d)
        .map(|i| mixes[i].iter().zip(&weights).map(|(mix, w)| w * mix).sum::<f64>())
        .sum();
    cert.lower_bound("expected-superadditivity", expected_cost, agg_cmi, INEQUALITY_TOL);
    cert.lower_bound("expected-window-drop", agg_cmi, pr_window * agg_mix, INEQUALITY_TOL);
    cert.lower_bound(
        "headline",
        expected_cost,
        alpha * factor_values.iter().sum::<f64>(),
        INEQUALITY_TOL,
    );
    cert.verify()?;

    Ok(DirectSumCheck {
        certificate: cert,
        mixture,
        expected_cost,
        alpha,
        window_probability: pr_window,
        factor_values: factor_values.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{make_thresholds, product};
    use crate::game::solve_game;
    use crate::learners::leftmost_learner;

    fn ex(x: u32, y: u8) -> LabeledExample {
        LabeledExample::new(x, y).unwrap()
    }

    fn atom(points: Vec<((u32, u8), f64)>) -> LabeledDistribution {
        LabeledDistribution::from_points(points).unwrap()
    }

    fn two_block_class() -> HypothesisClass {
        let t1 = make_thresholds(1).unwrap();
        product(&[t1.clone(), t1]).unwrap()
    }

    /// The adversary atoms used throughout: the three realizable uniform
    /// pairs on the two-point threshold class.
    fn conflicting_pool() -> Vec<LabeledDistribution> {
        vec![
            atom(vec![((1, 0), 0.5), ((2, 0), 0.5)]),
            atom(vec![((1, 0), 0.5), ((2, 1), 0.5)]),
            atom(vec![((1, 1), 0.5), ((2, 1), 0.5)]),
        ]
    }

    fn t1_support() -> Vec<LabeledExample> {
        vec![ex(1, 0), ex(1, 1), ex(2, 0), ex(2, 1)]
    }

    #[test]
    fn splitting_routes_examples_to_their_factors() {
        let class = two_block_class();
        let sample = RealizableSample::new(
            &class,
            vec![ex(1, 0), ex(3, 1), ex(2, 1), ex(1, 0)],
        )
        .unwrap();
        let split = split_sample(&class, &sample).unwrap();
        assert_eq!(split.num_blocks(), 2);
        assert_eq!(split.counts(), vec![3, 1]);
        assert_eq!(split.parts()[0], vec![ex(1, 0), ex(2, 1), ex(1, 0)]);
        assert_eq!(split.parts()[1], vec![ex(1, 1)]);
    }

    #[test]
    fn splitting_requires_block_structure() {
        let class = make_thresholds(1).unwrap();
        let sample = RealizableSample::new(&class, vec![ex(1, 0)]).unwrap();
        assert!(split_sample(&class, &sample).is_err());
    }

    #[test]
    fn single_factor_split_keeps_the_whole_sample() {
        let class = product(&[make_thresholds(1).unwrap()]).unwrap();
        let sample = RealizableSample::new(&class, vec![ex(2, 1), ex(1, 0)]).unwrap();
        let split = split_sample(&class, &sample).unwrap();
        assert_eq!(split.counts(), vec![2]);
        assert_eq!(split.parts()[0], vec![ex(2, 1), ex(1, 0)]);
    }

    #[test]
    fn superadditivity_gap_vanishes_for_a_single_block() {
        let class = product(&[make_thresholds(1).unwrap()]).unwrap();
        let p = atom(vec![((1, 0), 0.5), ((2, 1), 0.5)]);
        let a = leftmost_learner(&class, 2, &[ex(1, 0), ex(2, 1)]).unwrap();
        let gap = superadditivity_gap(&a, &p, 2).unwrap();
        assert!(gap.abs() <= 1e-10, "single-block gap {gap}");
    }

    #[test]
    fn superadditivity_gap_is_zero_for_a_constant_channel() {
        let class = two_block_class();
        let support = vec![ex(1, 0), ex(3, 1)];
        let rows = enumerate_realizable_samples(&class, &support, 2)
            .unwrap()
            .into_iter()
            .map(|s| (s, FiniteDistribution::point_mass(0usize)))
            .collect();
        let a = LearnerChannel::new(class.clone(), 2, rows).unwrap();
        let p = atom(vec![((1, 0), 0.5), ((3, 1), 0.5)]);
        let gap = superadditivity_gap(&a, &p, 2).unwrap();
        assert_eq!(gap, 0.0);
    }

    #[test]
    fn superadditivity_holds_for_a_two_block_learner() {
        let class = two_block_class();
        let support = vec![ex(1, 0), ex(2, 1), ex(3, 0), ex(4, 1)];
        let a = leftmost_learner(&class, 2, &support).unwrap();
        let p = atom(vec![((1, 0), 0.25), ((2, 1), 0.25), ((3, 0), 0.25), ((4, 1), 0.25)]);
        let gap = superadditivity_gap(&a, &p, 2).unwrap();
        assert!(gap >= -1e-12, "gap {gap}");
        assert!(gap < 2.0, "gap {gap}");
    }

    #[test]
    fn mixture_arithmetic_matches_by_hand() {
        let t1 = make_thresholds(1).unwrap();
        let class = two_block_class();
        let d0 = MetaDistribution::new(
            &t1,
            vec![(atom(vec![((1, 0), 1.0)]), 0.25), (atom(vec![((1, 1), 1.0)]), 0.75)],
        )
        .unwrap();
        let d1 =
            MetaDistribution::new(&t1, vec![(atom(vec![((1, 0), 0.5), ((2, 1), 0.5)]), 1.0)])
                .unwrap();
        let mix = mixture_meta(&class, &[d0, d1]).unwrap();
        assert_eq!(mix.combos(), &[vec![0, 0], vec![1, 0]]);
        let atoms = mix.induced().atoms();
        assert_eq!(atoms.len(), 2);
        assert!((atoms[0].1 - 0.25).abs() < 1e-15);
        assert!((atoms[1].1 - 0.75).abs() < 1e-15);
        let first = atoms[0].0.distribution();
        assert!((first.prob(&ex(1, 0)) - 0.5).abs() < 1e-15);
        assert!((first.prob(&ex(3, 0)) - 0.25).abs() < 1e-15);
        assert!((first.prob(&ex(4, 1)) - 0.25).abs() < 1e-15);
        let second = atoms[1].0.distribution();
        assert!((second.prob(&ex(1, 1)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mixture_rejects_mismatched_factor_counts() {
        let t1 = make_thresholds(1).unwrap();
        let class = two_block_class();
        let d0 = MetaDistribution::new(&t1, vec![(atom(vec![((1, 0), 1.0)]), 1.0)]).unwrap();
        assert!(mixture_meta(&class, &[d0.clone()]).is_err());
        assert!(mixture_meta(&t1, &[d0]).is_err());
    }

    #[test]
    fn alpha_matches_the_closed_form() {
        let a = alpha_factor(2, 1).unwrap();
        assert!((a - (1.0 - 2.0 * (-1.0f64).exp())).abs() < 1e-15);
        assert!((a - 0.264_241_117_657_115_3).abs() < 1e-15);
        assert!(alpha_factor(2, 2).unwrap() < 0.0);
        let balanced = alpha_factor(4, 2).unwrap();
        assert!((balanced - a).abs() < 1e-15);
        assert!(alpha_factor(0, 1).is_err());
        assert!(alpha_factor(1, 0).is_err());
    }

    #[test]
    fn window_mass_dominates_its_floor_on_small_cases() {
        for d in 1..=4usize {
            for m in [2usize, 4, 8] {
                let cb = conditioned_binomial(d, m).unwrap();
                let floor = alpha_factor(m, d).unwrap();
                assert!(
                    cb.window_probability() >= floor,
                    "window mass {} below floor {floor} at d={d} m={m}",
                    cb.window_probability()
                );
            }
        }
    }

    #[test]
    fn single_factor_reduction_matches_the_plain_game() {
        let t1 = make_thresholds(1).unwrap();
        let class = product(&[t1.clone()]).unwrap();
        let mu = conditioned_binomial(1, 2).unwrap();
        let game = solve_game(
            &t1,
            &t1_support(),
            mu.distribution(),
            &conflicting_pool(),
            1e-2,
            2000,
        )
        .unwrap();
        assert!(game.lower > 0.0);
        let a = leftmost_learner(&class, 2, &t1_support()).unwrap();
        let check =
            direct_sum_check(&a, &[t1], &[game.meta.clone()], 2, &[game.lower]).unwrap();
        assert!(check.certificate.holds());
        assert_eq!(check.window_probability, 1.0);
        assert!((check.alpha - alpha_factor(2, 1).unwrap()).abs() < 1e-15);
        assert!(check.expected_cost >= check.alpha * game.lower - 1e-9);
    }

    #[test]
    fn inflated_factor_values_are_rejected() {
        let t1 = make_thresholds(1).unwrap();
        let class = product(&[t1.clone()]).unwrap();
        let mu = conditioned_binomial(1, 2).unwrap();
        let game = solve_game(
            &t1,
            &t1_support(),
            mu.distribution(),
            &conflicting_pool(),
            1e-2,
            2000,
        )
        .unwrap();
        let a = leftmost_learner(&class, 2, &t1_support()).unwrap();
        let err = direct_sum_check(&a, &[t1], &[game.meta.clone()], 2, &[game.lower + 10.0])
            .unwrap_err();
        assert!(err.to_string().contains("factor-game"), "{err}");
    }

    #[test]
    fn two_factor_reduction_certifies_the_product_bound() {
        let t1 = make_thresholds(1).unwrap();
        let class = two_block_class();
        let cb = conditioned_binomial(2, 2).unwrap();
        let game = solve_game(
            &t1,
            &t1_support(),
            cb.distribution(),
            &conflicting_pool(),
            2e-2,
            2000,
        )
        .unwrap();
        assert!(game.lower > 0.0);
        let metas = vec![game.meta.clone(), game.meta.clone()];
        let support: Vec<LabeledExample> = mixture_meta(&class, &metas)
            .unwrap()
            .induced()
            .atoms()
            .iter()
            .flat_map(|(p, _)| p.distribution().iter().map(|(e, _)| *e))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let a = leftmost_learner(&class, 4, &support).unwrap();
        let values = [game.lower, game.lower];
        let check = direct_sum_check(&a, &[t1.clone(), t1], &metas, 2, &values).unwrap();
        assert!(check.certificate.holds());
        assert!((check.window_probability - 14.0 / 16.0).abs() < 1e-15);
        assert!((check.alpha - (1.0 - 2.0 * (-0.5f64).exp())).abs() < 1e-15);
        assert!(check.alpha < 0.0);
        assert!(check.expected_cost > 0.0);
        assert!(check.expected_cost >= check.alpha * (values[0] + values[1]) - 1e-9);
        let json = check.to_json();
        assert!(json["certificate"]["holds"].as_bool().unwrap());
        assert!(json["window_probability"].as_f64().unwrap() > 0.8);
    }

    #[test]
    fn constant_channels_pass_with_zero_factor_floors() {
        let t1 = make_thresholds(1).unwrap();
        let class = two_block_class();
        let meta = MetaDistribution::new(
            &t1,
            vec![
                (atom(vec![((1, 0), 0.5), ((2, 0), 0.5)]), 0.5),
                (atom(vec![((1, 1), 0.5), ((2, 1), 0.5)]), 0.5),
            ],
        )
        .unwrap();
        let metas = vec![meta.clone(), meta];
        let support: Vec<LabeledExample> =
            vec![ex(1, 0), ex(1, 1), ex(2, 0), ex(2, 1), ex(3, 0), ex(3, 1), ex(4, 0), ex(4, 1)];
        let rows = enumerate_realizable_samples(&class, &support, 4)
            .unwrap()
            .into_iter()
            .map(|s| (s, FiniteDistribution::point_mass(0usize)))
            .collect();
        let a = LearnerChannel::new(class.clone(), 4, rows).unwrap();
        assert!(!a.is_consistent().unwrap());
        let check =
            direct_sum_check(&a, &[make_thresholds(1).unwrap(), make_thresholds(1).unwrap()], &metas, 2, &[0.0, 0.0])
                .unwrap();
        assert!(check.certificate.holds());
        assert_eq!(check.expected_cost, 0.0);
    }

    #[test]
    fn reduction_rejects_structural_mismatches() {
        let t1 = make_thresholds(1).unwrap();
        let class = two_block_class();
        let meta = MetaDistribution::new(&t1, vec![(atom(vec![((1, 0), 1.0)]), 1.0)]).unwrap();
        let a = leftmost_learner(&class, 4, &[ex(1, 0), ex(3, 0)]).unwrap();
        let err = direct_sum_check(&a, &[t1.clone()], &[meta.clone()], 2, &[0.0]).unwrap_err();
        assert!(err.to_string().contains("blocks"), "{err}");
        let wrong_m = leftmost_learner(&class, 2, &[ex(1, 0), ex(3, 0)]).unwrap();
        assert!(direct_sum_check(&wrong_m, &[t1.clone(), t1], &[meta.clone(), meta], 2, &[0.0, 0.0])
            .is_err());
    }
}
