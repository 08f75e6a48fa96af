//! The min-max information game between a consistent proper learner and a
//! finite pool of realizable distributions: exact payoff evaluation, a
//! certified best-response channel solver (alternating minimization over the
//! channel polytope with a linearization lower bound), a pool-side
//! exponentiated-gradient outer loop, and a brute-force grid oracle for tiny
//! instances.

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::classes::{HypothesisClass, LabeledDistribution, LabeledExample};
use crate::error::{Error, Result};
use crate::learners::{enumerate_realizable_samples, LearnerChannel, LearnerFamily};
use crate::prob::FiniteDistribution;
use crate::tol::{CONSTRUCTION_TOL, MAX_ORACLE_CHANNELS, MAX_ORACLE_GRID};

/// Interior floor mixed into every updated channel row, keeping gradients
/// finite; perturbs the objective by far less than any reported tolerance.
const ROW_FLOOR: f64 = 1e-14;

/// A finite-support distribution over realizable distributions: the
/// adversary side of the game.
#[derive(Debug, Clone)]
pub struct MetaDistribution {
    atoms: Vec<(LabeledDistribution, f64)>,
}

impl MetaDistribution {
    /// Validates positivity, normalization, and per-atom realizability.
    pub fn new(class: &HypothesisClass, atoms: Vec<(LabeledDistribution, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::contract("a meta distribution needs at least one atom"));
        }
        let mut total = 0.0;
        for (p, w) in &atoms {
            if !w.is_finite() || *w <= 0.0 {
                return Err(Error::contract("meta weights must be positive and finite"));
            }
            if !class.is_realizable(p)? {
                return Err(Error::contract("every meta atom must be realizable"));
            }
            total += w;
        }
        if (total - 1.0).abs() > CONSTRUCTION_TOL {
            return Err(Error::contract(format!("meta weights sum to {total}, not 1")));
        }
        Ok(MetaDistribution { atoms })
    }

    /// Uniform weights over a pool of realizable distributions.
    pub fn uniform(class: &HypothesisClass, pool: &[LabeledDistribution]) -> Result<Self> {
        let w = 1.0 / pool.len().max(1) as f64;
        MetaDistribution::new(class, pool.iter().map(|p| (p.clone(), w)).collect())
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[(LabeledDistribution, f64)] {
        &self.atoms
    }

    pub fn to_json(&self) -> Value {
        let atoms: Vec<Value> = self
            .atoms
            .iter()
            .map(|(p, w)| json!({"weight": w, "distribution": p.to_json()}))
            .collect();
        json!({ "atoms": atoms })
    }
}

/// Exact game payoff: the meta-weighted expected information cost of the
/// family, sizes weighted by `mu`.
pub fn game_value(
    a: &LearnerFamily,
    d: &MetaDistribution,
    mu: &FiniteDistribution<usize>,
) -> Result<f64> {
    let mut total = 0.0;
    for (p, w) in d.atoms() {
        total += w * a.expected_info_cost(p, mu)?;
    }
    Ok(total)
}

/// Exact argmax of the family's expected information cost over a pool;
/// ties break toward the lowest index.
pub fn best_response_meta(
    a: &LearnerFamily,
    pool: &[LabeledDistribution],
    mu: &FiniteDistribution<usize>,
) -> Result<(usize, f64)> {
    if pool.is_empty() {
        return Err(Error::contract("the candidate pool must be nonempty"));
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for (j, p) in pool.iter().enumerate() {
        let v = a.expected_info_cost(p, mu)?;
        if v > best.1 {
            best = (j, v);
        }
    }
    Ok(best)
}

/// The fixed combinatorial data of the inner minimization: per sample size,
/// the realizable-sample universe, per-row consistent hypothesis sets, and
/// the per-atom sample masses, stored both by atom and by row.
struct InnerProblem {
    num_h: usize,
    sizes: Vec<(usize, f64)>,
    universes: Vec<Vec<crate::learners::RealizableSample>>,
    consistent: Vec<Vec<Vec<usize>>>,
    atom_masses: Vec<Vec<Vec<(usize, f64)>>>,
    row_masses: Vec<Vec<Vec<(usize, f64)>>>,
    num_atoms: usize,
}

/// One inner solve: the final row state, the exact objective value, the best
/// certified lower bound on the constrained minimum, the per-atom payoffs of
/// the final channel, and whether the gap tolerance was met.
struct InnerSolution {
    rows: Vec<Vec<Vec<f64>>>,
    value: f64,
    lower_bound: f64,
    payoffs: Vec<f64>,
    converged: bool,
}

impl InnerProblem {
    fn build(
        class: &HypothesisClass,
        support: &[LabeledExample],
        mu: &FiniteDistribution<usize>,
        pool: &[LabeledDistribution],
    ) -> Result<InnerProblem> {
        if pool.is_empty() {
            return Err(Error::contract("the candidate pool must be nonempty"));
        }
        let mut sizes: Vec<(usize, f64)> = mu.iter().map(|(&m, w)| (m, w)).collect();
        sizes.sort_unstable_by_key(|&(m, _)| m);
        if sizes.first().is_some_and(|&(m, _)| m == 0) {
            return Err(Error::contract("game sample sizes must be at least 1"));
        }
        for p in pool {
            if !class.is_realizable(p)? {
                return Err(Error::contract("every pool atom must be realizable"));
            }
            for (e, _) in p.distribution().iter() {
                if !support.contains(e) {
                    return Err(Error::contract(
                        "every pool atom must be supported inside the game support",
                    ));
                }
            }
        }
        let num_h = class.num_hypotheses();
        let mut universes = Vec::with_capacity(sizes.len());
        let mut consistent = Vec::with_capacity(sizes.len());
        let mut atom_masses = Vec::with_capacity(sizes.len());
        let mut row_masses = Vec::with_capacity(sizes.len());
        for &(m, _) in &sizes {
            let universe = enumerate_realizable_samples(class, support, m)?;
            let index: std::collections::BTreeMap<_, _> =
                universe.iter().cloned().zip(0usize..).collect();
            let cons = universe
                .iter()
                .map(|s| s.consistent_hypotheses(class))
                .collect::<Result<Vec<_>>>()?;
            let mut by_atom = Vec::with_capacity(pool.len());
            let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); universe.len()];
            for (j, p) in pool.iter().enumerate() {
                let tuples = crate::prob::iid_product(p.distribution(), m)?;
                let mut rows = Vec::with_capacity(tuples.len());
                for (tuple, w) in tuples.iter() {
                    let s = crate::learners::RealizableSample::new(class, tuple.clone())?;
                    let row = *index
                        .get(&s)
                        .ok_or_else(|| Error::contract("pool sample missing from the universe"))?;
                    rows.push((row, w));
                    by_row[row].push((j, w));
                }
                by_atom.push(rows);
            }
            universes.push(universe);
            consistent.push(cons);
            atom_masses.push(by_atom);
            row_masses.push(by_row);
        }
        Ok(InnerProblem {
            num_h,
            sizes,
            universes,
            consistent,
            atom_masses,
            row_masses,
            num_atoms: pool.len(),
        })
    }

    fn uniform_rows(&self) -> Vec<Vec<Vec<f64>>> {
        self.consistent
            .iter()
            .map(|cons| cons.iter().map(|c| vec![1.0 / c.len() as f64; c.len()]).collect())
            .collect()
    }

    /// Alternating minimization of the weighted information cost over the
    /// channel polytope. Each round recomputes the per-atom output marginals
    /// and resets every visible row to the normalized geometric mean of
    /// those marginals; the objective is monotone nonincreasing and the
    /// linearized bound certifies distance from the constrained minimum.
    fn minimize(&self, lambda: &[f64], tol: f64, max_iter: usize) -> InnerSolution {
        let mut rows = self.uniform_rows();
        let mut best_lb = f64::NEG_INFINITY;
        let mut value = f64::INFINITY;
        let mut payoffs = vec![0.0; self.num_atoms];
        let mut converged = false;
        let mut marginals: Vec<Vec<Vec<f64>>> = Vec::new();
        for iter in 0..max_iter.max(1) {
            // Output marginals per size and atom.
            marginals.clear();
            for (si, by_atom) in self.atom_masses.iter().enumerate() {
                let mut per_atom = Vec::with_capacity(self.num_atoms);
                for atom_rows in by_atom {
                    let mut q = vec![0.0; self.num_h];
                    for &(row, w) in atom_rows {
                        for (idx, &h) in self.consistent[si][row].iter().enumerate() {
                            q[h] += w * rows[si][row][idx];
                        }
                    }
                    per_atom.push(q);
                }
                marginals.push(per_atom);
            }
            // Exact per-atom payoffs and the weighted objective.
            for (j, payoff) in payoffs.iter_mut().enumerate() {
                let mut total = 0.0;
                for (si, &(_, mu_w)) in self.sizes.iter().enumerate() {
                    let q = &marginals[si][j];
                    let mut mi = 0.0;
                    for &(row, w) in &self.atom_masses[si][j] {
                        for (idx, &h) in self.consistent[si][row].iter().enumerate() {
                            let a = rows[si][row][idx];
                            if a > 0.0 && w > 0.0 {
                                mi += w * a * (a / q[h]).log2();
                            }
                        }
                    }
                    total += mu_w * mi.max(0.0);
                }
                *payoff = total;
            }
            let objective: f64 =
                lambda.iter().zip(&payoffs).map(|(l, p)| l * p).sum();
            // Linearization bound: the constrained minimum is at least the
            // objective plus the sum over rows of the best vertex drop.
            let mut lb = objective;
            for (si, &(_, mu_w)) in self.sizes.iter().enumerate() {
                for (row, contributions) in self.row_masses[si].iter().enumerate() {
                    let cons = &self.consistent[si][row];
                    let mut rho = 0.0;
                    let mut gamma = vec![0.0; cons.len()];
                    for &(j, w) in contributions {
                        let c = lambda[j] * mu_w * w;
                        if c <= 0.0 {
                            continue;
                        }
                        rho += c;
                        for (idx, &h) in cons.iter().enumerate() {
                            gamma[idx] += c * marginals[si][j][h].log2();
                        }
                    }
                    if rho <= 0.0 {
                        continue;
                    }
                    let mut min_g = f64::INFINITY;
                    let mut avg_g = 0.0;
                    for (idx, g) in gamma.iter().enumerate() {
                        let a = rows[si][row][idx];
                        let grad = rho * a.log2() - g;
                        min_g = min_g.min(grad);
                        avg_g += a * grad;
                    }
                    lb += min_g - avg_g;
                }
            }
            best_lb = best_lb.max(lb);
            value = objective;
            if objective - best_lb <= tol {
                converged = true;
                break;
            }
            if iter + 1 == max_iter.max(1) {
                break;
            }
            // Row reset to the weighted geometric mean of the marginals.
            for (si, &(_, mu_w)) in self.sizes.iter().enumerate() {
                for (row, contributions) in self.row_masses[si].iter().enumerate() {
                    let cons = &self.consistent[si][row];
                    let mut rho = 0.0;
                    let mut gamma = vec![0.0; cons.len()];
                    for &(j, w) in contributions {
                        let c = lambda[j] * mu_w * w;
                        if c <= 0.0 {
                            continue;
                        }
                        rho += c;
                        for (idx, &h) in cons.iter().enumerate() {
                            gamma[idx] += c * marginals[si][j][h].log2();
                        }
                    }
                    if rho <= 0.0 {
                        continue;
                    }
                    let max_x = gamma.iter().map(|g| g / rho).fold(f64::NEG_INFINITY, f64::max);
                    let mut total = 0.0;
                    for (idx, g) in gamma.iter().enumerate() {
                        let v = (g / rho - max_x).exp2();
                        rows[si][row][idx] = v;
                        total += v;
                    }
                    let floor = ROW_FLOOR / cons.len() as f64;
                    for v in rows[si][row].iter_mut() {
                        *v = (1.0 - ROW_FLOOR) * (*v / total) + floor;
                    }
                }
            }
        }
        InnerSolution { rows, value, lower_bound: best_lb, payoffs, converged }
    }

    /// Materializes a row state as a learner family, dropping vanishing
    /// probabilities.
    fn family(&self, class: &HypothesisClass, rows: &[Vec<Vec<f64>>]) -> Result<LearnerFamily> {
        let mut channels = Vec::with_capacity(self.sizes.len());
        for (si, &(m, _)) in self.sizes.iter().enumerate() {
            let mut out = Vec::with_capacity(self.universes[si].len());
            for (row, sample) in self.universes[si].iter().enumerate() {
                let cons = &self.consistent[si][row];
                let total: f64 = rows[si][row].iter().filter(|p| **p > 1e-15).sum();
                let support: Vec<(usize, f64)> = cons
                    .iter()
                    .zip(&rows[si][row])
                    .filter(|(_, p)| **p > 1e-15)
                    .map(|(&h, &p)| (h, p / total))
                    .collect();
                out.push((sample.clone(), FiniteDistribution::new(support)?));
            }
            channels.push(LearnerChannel::new(class.clone(), m, out)?);
        }
        LearnerFamily::new(channels)
    }
}

/// Minimizes the game payoff against a fixed meta distribution over
/// consistent proper channels with rows for every realizable sample on
/// `support`. Returns the channel family, its exact payoff, and whether the
/// linearization gap reached `tol` within `max_iter` rounds.
pub fn best_response_channel(
    d: &MetaDistribution,
    class: &HypothesisClass,
    support: &[LabeledExample],
    mu: &FiniteDistribution<usize>,
    tol: f64,
    max_iter: usize,
) -> Result<(LearnerFamily, f64, bool)> {
    if tol <= 0.0 {
        return Err(Error::contract("the tolerance must be positive"));
    }
    let pool: Vec<LabeledDistribution> = d.atoms().iter().map(|(p, _)| p.clone()).collect();
    let lambda: Vec<f64> = d.atoms().iter().map(|(_, w)| *w).collect();
    let problem = InnerProblem::build(class, support, mu, &pool)?;
    let sol = problem.minimize(&lambda, tol, max_iter);
    let family = problem.family(class, &sol.rows)?;
    Ok((family, sol.value, sol.converged))
}

/// Outcome of the outer saddle solver: a channel certifying the upper end of
/// the interval, a meta distribution certifying the lower end, and the full
/// per-round trace.
#[derive(Debug, Clone)]
pub struct GameResult {
    pub channel: LearnerFamily,
    pub meta: MetaDistribution,
    /// Certified lower bound on the pool-restricted game value.
    pub lower: f64,
    /// Payoff guarantee of `channel`: the pool value is at most this.
    pub upper: f64,
    /// Synonym for `lower`; the pool value lies in [value, value + gap].
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Per-round (certified lower bound of the round's meta, running gap).
    pub trace: Vec<(f64, f64)>,
}

impl GameResult {
    pub fn to_json(&self) -> Value {
        let channels: Vec<Value> = self
            .channel
            .channels()
            .map(|(m, c)| json!({"m": m, "channel": c.to_json()}))
            .collect();
        json!({
            "value": self.value,
            "lower": self.lower,
            "upper": self.upper,
            "gap": self.gap,
            "iterations": self.iterations,
            "converged": self.converged,
            "trace": self.trace.iter().map(|(v, g)| json!([v, g])).collect::<Vec<_>>(),
            "meta": self.meta.to_json(),
            "channels": channels,
        })
    }
}

/// Solves the pool-restricted game to a certified interval: exponentiated
/// gradient ascent with step line search on the pool side, the alternating
/// channel solver on the learner side. Every round's inner solve yields a
/// sound lower bound (its linearization bound) and a sound upper bound (the
/// returned channel's worst pool payoff); the interval is their running
/// best. `converged` reports whether the gap reached `tol`.
pub fn solve_game(
    class: &HypothesisClass,
    support: &[LabeledExample],
    mu: &FiniteDistribution<usize>,
    pool: &[LabeledDistribution],
    tol: f64,
    max_iter: usize,
) -> Result<GameResult> {
    if tol <= 0.0 || max_iter == 0 {
        return Err(Error::contract("need a positive tolerance and at least one iteration"));
    }
    let problem = InnerProblem::build(class, support, mu, pool)?;
    let inner_tol = (tol * 1e-2).max(1e-12);
    let inner_cap = 1200;
    let n = pool.len();
    let mut lambda = vec![1.0 / n as f64; n];
    let mut sol = problem.minimize(&lambda, inner_tol, inner_cap);

    let mut lower = sol.lower_bound;
    let mut best_lambda = lambda.clone();
    let mut upper = sol.payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut best_rows = sol.rows.clone();
    let mut trace = vec![(sol.lower_bound, upper - lower)];
    let mut eta = 1.0;
    let mut converged = upper - lower <= tol;
    let mut iterations = 1;

    while !converged && iterations < max_iter {
        let payoffs = sol.payoffs.clone();
        let max_payoff = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Step line search: each candidate solve is independent, so they run
        // concurrently; the pick is a fixed-order fold, so the result does
        // not depend on scheduling.
        let candidates: Vec<(f64, Vec<f64>, InnerSolution)> = [eta * 2.0, eta, eta * 0.5]
            .into_par_iter()
            .map(|step| {
                let mut cand: Vec<f64> = lambda
                    .iter()
                    .zip(&payoffs)
                    .map(|(l, p)| (l * ((p - max_payoff) * step).exp()).max(1e-300))
                    .collect();
                let total: f64 = cand.iter().sum();
                for c in &mut cand {
                    *c /= total;
                }
                let cand_sol = problem.minimize(&cand, inner_tol, inner_cap);
                (step, cand, cand_sol)
            })
            .collect();
        let (step, cand, cand_sol) = candidates
            .into_iter()
            .reduce(|best, cur| if cur.2.value > best.2.value { cur } else { best })
            .expect("three candidates evaluated");
        eta = step.clamp(1e-3, 1e3);
        lambda = cand;
        sol = cand_sol;
        if sol.lower_bound > lower {
            lower = sol.lower_bound;
            best_lambda = lambda.clone();
        }
        let round_upper = sol.payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if round_upper < upper {
            upper = round_upper;
            best_rows = sol.rows.clone();
        }
        trace.push((sol.lower_bound, upper - lower));
        iterations += 1;
        converged = upper - lower <= tol;
    }

    let channel = problem.family(class, &best_rows)?;
    let atoms: Vec<(LabeledDistribution, f64)> = pool
        .iter()
        .zip(&best_lambda)
        .filter(|(_, w)| **w > 0.0)
        .map(|(p, w)| (p.clone(), *w))
        .collect();
    let total: f64 = atoms.iter().map(|(_, w)| w).sum();
    let atoms = atoms.into_iter().map(|(p, w)| (p, w / total)).collect();
    let meta = MetaDistribution::new(class, atoms)?;
    Ok(GameResult {
        channel,
        meta,
        lower,
        upper,
        value: lower,
        gap: upper - lower,
        iterations,
        converged,
        trace,
    })
}

fn composition_count(total: usize, parts: usize) -> Option<u128> {
    // C(total + parts - 1, parts - 1)
    let n = (total + parts - 1) as u128;
    let k = (parts - 1) as u128;
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul(n - i)?.checked_div(i + 1)?;
    }
    Some(c)
}

fn weak_compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; parts];
    fn rec(rest: usize, idx: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if idx + 1 == current.len() {
            current[idx] = rest;
            out.push(current.clone());
            return;
        }
        for v in 0..=rest {
            current[idx] = v;
            rec(rest - v, idx + 1, current, out);
        }
    }
    rec(total, 0, &mut current, &mut out);
    out
}

/// All grid distributions over `support` with masses in multiples of 1/g
/// that are realizable by the class, enumerated deterministically.
pub fn realizable_grid_net(
    class: &HypothesisClass,
    support: &[LabeledExample],
    g: usize,
) -> Result<Vec<LabeledDistribution>> {
    if g == 0 || g > MAX_ORACLE_GRID as usize {
        return Err(Error::contract(format!("grid resolution must be in 1..={MAX_ORACLE_GRID}")));
    }
    if support.is_empty() {
        return Err(Error::contract("the support must be nonempty"));
    }
    let count = composition_count(g, support.len())
        .filter(|&c| c <= 2_000_000)
        .ok_or_else(|| Error::resource("grid net too large to enumerate"))?;
    let mut net = Vec::new();
    let mut seen = 0u128;
    for comp in weak_compositions(g, support.len()) {
        seen += 1;
        let points: Vec<((u32, u8), f64)> = support
            .iter()
            .zip(&comp)
            .filter(|(_, &c)| c > 0)
            .map(|(e, &c)| ((e.x, e.y), c as f64 / g as f64))
            .collect();
        let p = LabeledDistribution::from_points(points)?;
        if class.is_realizable(&p)? {
            net.push(p);
        }
    }
    debug_assert_eq!(seen, count);
    Ok(net)
}

/// Rounds every row of a family onto the probability grid {0, 1/g, ..., 1}
/// by largest-remainder apportionment, preserving exact normalization and
/// the row's support. The result lives in the brute-force oracle's channel
/// space, so its worst pool payoff upper-bounds the oracle value.
pub fn grid_round_family(family: &LearnerFamily, g: usize) -> Result<LearnerFamily> {
    if g == 0 || g > MAX_ORACLE_GRID as usize {
        return Err(Error::contract(format!("grid resolution must be in 1..={MAX_ORACLE_GRID}")));
    }
    let mut channels = Vec::new();
    for (m, channel) in family.channels() {
        let mut rows = Vec::new();
        for (sample, dist) in channel.rows() {
            let entries: Vec<(usize, f64)> = dist.iter().map(|(&h, p)| (h, p * g as f64)).collect();
            let mut units: Vec<(usize, usize, f64)> = entries
                .iter()
                .map(|&(h, scaled)| (h, scaled.floor() as usize, scaled - scaled.floor()))
                .collect();
            let assigned: usize = units.iter().map(|&(_, u, _)| u).sum();
            let mut order: Vec<usize> = (0..units.len()).collect();
            order.sort_by(|&a, &b| {
                units[b].2.partial_cmp(&units[a].2).unwrap().then(units[a].0.cmp(&units[b].0))
            });
            for &i in order.iter().take(g - assigned) {
                units[i].1 += 1;
            }
            let support: Vec<(usize, f64)> = units
                .iter()
                .filter(|&&(_, u, _)| u > 0)
                .map(|&(h, u, _)| (h, u as f64 / g as f64))
                .collect();
            rows.push((sample.clone(), FiniteDistribution::new(support)?));
        }
        channels.push(LearnerChannel::new(channel.class().clone(), m, rows)?);
    }
    LearnerFamily::new(channels)
}

/// Brute-force oracle for tiny instances: minimum over all channels with
/// grid rows (restricted to consistent hypotheses) of the maximum exact
/// information cost over the realizable grid net. Deterministic.
pub fn brute_force_ic(
    class: &HypothesisClass,
    m: usize,
    support: &[LabeledExample],
    g: usize,
) -> Result<f64> {
    if g == 0 || g > MAX_ORACLE_GRID as usize {
        return Err(Error::contract(format!("grid resolution must be in 1..={MAX_ORACLE_GRID}")));
    }
    let samples = enumerate_realizable_samples(class, support, m)?;
    if samples.len() > 8 {
        return Err(Error::resource("brute force caps at 8 realizable samples"));
    }
    let consistent: Vec<Vec<usize>> = samples
        .iter()
        .map(|s| s.consistent_hypotheses(class))
        .collect::<Result<_>>()?;
    if consistent.iter().any(|c| c.len() > 3) {
        return Err(Error::resource("brute force caps consistent sets at 3 hypotheses"));
    }
    let num_h = class.num_hypotheses();
    let net = realizable_grid_net(class, support, g)?;
    // Per atom, the sample masses over the universe.
    let mut atom_masses: Vec<Vec<f64>> = Vec::with_capacity(net.len());
    for p in &net {
        let mut masses = vec![0.0; samples.len()];
        for (i, s) in samples.iter().enumerate() {
            let mut w = 1.0;
            for e in s.examples() {
                w *= p.distribution().prob(e);
            }
            masses[i] = w;
        }
        atom_masses.push(masses);
    }
    // Per row, the grid options.
    let row_options: Vec<Vec<Vec<f64>>> = consistent
        .iter()
        .map(|c| {
            weak_compositions(g, c.len())
                .into_iter()
                .map(|comp| comp.into_iter().map(|v| v as f64 / g as f64).collect())
                .collect()
        })
        .collect();
    let mut channels: u128 = 1;
    for opts in &row_options {
        channels = channels
            .checked_mul(opts.len() as u128)
            .filter(|&c| c <= MAX_ORACLE_CHANNELS as u128)
            .ok_or_else(|| Error::resource("brute-force channel grid too large"))?;
    }
    let mut idx = vec![0usize; samples.len()];
    let mut best = f64::INFINITY;
    let mut q = vec![0.0; num_h];
    loop {
        let mut worst = 0.0f64;
        for masses in &atom_masses {
            q.iter_mut().for_each(|v| *v = 0.0);
            for (row, c) in consistent.iter().enumerate() {
                let probs = &row_options[row][idx[row]];
                for (k, &h) in c.iter().enumerate() {
                    q[h] += masses[row] * probs[k];
                }
            }
            let mut mi = 0.0;
            for (row, c) in consistent.iter().enumerate() {
                if masses[row] == 0.0 {
                    continue;
                }
                let probs = &row_options[row][idx[row]];
                for (k, &h) in c.iter().enumerate() {
                    if probs[k] > 0.0 {
                        mi += masses[row] * probs[k] * (probs[k] / q[h]).log2();
                    }
                }
            }
            worst = worst.max(mi.max(0.0));
            if worst >= best {
                break;
            }
        }
        best = best.min(worst);
        // Odometer over row options, last row fastest.
        let mut pos = samples.len();
        loop {
            if pos == 0 {
                return Ok(best);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < row_options[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}
