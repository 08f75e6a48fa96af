//! Property tests for the public API: information kernels, class algebra,
//! learner costs, and the game solver's certified interval.

use iclab_core::prob::{entropy_bits, MI_NEGATIVE_PART_FLOOR};
use iclab_core::{
    best_response_channel, best_response_meta, game_value, grid_round_family, iid_product,
    leftmost_learner, make_thresholds, mixture_meta, product, solve_game,
    enumerate_realizable_samples, uniform_consistent_learner, FiniteDistribution,
    HypothesisClass, JointDistribution, LabeledDistribution, LabeledExample, LearnerChannel,
    LearnerFamily, MetaDistribution, RealizableSample,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ex(x: u32, y: u8) -> LabeledExample {
    LabeledExample::new(x, y).expect("valid example")
}

/// Nonempty class over domain {1, 2} picked by a 4-bit row mask.
fn mask_class(mask: u8) -> HypothesisClass {
    let rows: Vec<Vec<u8>> = (0..4u8)
        .filter(|r| mask & (1 << r) != 0)
        .map(|r| vec![r >> 1, r & 1])
        .collect();
    HypothesisClass::new(vec![1, 2], rows).expect("valid class")
}

/// Nonempty class over domain {1, 2, 3} picked by an 8-bit row mask.
fn three_point_class(mask: u8) -> HypothesisClass {
    let rows: Vec<Vec<u8>> = (0..8u8)
        .filter(|r| mask & (1 << r) != 0)
        .map(|r| vec![(r >> 2) & 1, (r >> 1) & 1, r & 1])
        .collect();
    HypothesisClass::new(vec![1, 2, 3], rows).expect("valid class")
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    for v in &mut w {
        *v /= s;
    }
    w
}

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3..1.0f64, n).prop_map(normalize)
}

/// Dense two-axis joint with every cell strictly positive.
fn joint2() -> impl Strategy<Value = JointDistribution> {
    (2usize..=4, 2usize..=4).prop_flat_map(|(nx, ny)| {
        simplex(nx * ny).prop_map(move |cells| {
            JointDistribution::new(vec![("x", nx), ("y", ny)], cells).expect("valid joint")
        })
    })
}

/// Dense three-axis joint; the last axis is the conditioner.
fn joint3() -> impl Strategy<Value = JointDistribution> {
    (2usize..=3, 2usize..=3, 2usize..=3).prop_flat_map(|(nx, ny, nz)| {
        simplex(nx * ny * nz).prop_map(move |cells| {
            JointDistribution::new(vec![("x", nx), ("y", ny), ("z", nz)], cells)
                .expect("valid joint")
        })
    })
}

/// A realizable distribution: a hypothesis, a nonempty domain subset, and
/// weights on the labeled points it induces.
fn random_realizable(rng: &mut ChaCha8Rng, class: &HypothesisClass) -> LabeledDistribution {
    let h = rng.gen_range(0..class.num_hypotheses());
    let domain = class.domain().to_vec();
    let mask = rng.gen_range(1..(1usize << domain.len()));
    let points: Vec<u32> = domain
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, &x)| x)
        .collect();
    let raw: Vec<f64> = points.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
    let weights = normalize(raw);
    let pts = points
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| ((x, class.label(h, x).expect("in domain")), w))
        .collect();
    LabeledDistribution::from_points(pts).expect("realizable points")
}

/// Random channel with one row per realizable sample on `p`'s support.
/// Consistent channels spread mass over consistent hypotheses only.
fn random_channel_on(
    rng: &mut ChaCha8Rng,
    class: &HypothesisClass,
    p: &LabeledDistribution,
    m: usize,
    consistent: bool,
) -> LearnerChannel {
    let support: Vec<LabeledExample> = p.distribution().iter().map(|(e, _)| *e).collect();
    let samples = enumerate_realizable_samples(class, &support, m).expect("enumerable");
    let rows = samples
        .into_iter()
        .map(|s| {
            let mut cands = if consistent {
                s.consistent_hypotheses(class).expect("realizable row")
            } else {
                (0..class.num_hypotheses()).collect()
            };
            for i in (1..cands.len()).rev() {
                cands.swap(i, rng.gen_range(0..=i));
            }
            cands.truncate(rng.gen_range(1..=cands.len()));
            let weights = normalize(cands.iter().map(|_| rng.gen_range(0.05..1.0)).collect());
            let dist = FiniteDistribution::new(cands.into_iter().zip(weights).collect())
                .expect("valid row");
            (s, dist)
        })
        .collect();
    LearnerChannel::new(class.clone(), m, rows).expect("valid channel")
}

fn seeded_instance(
    seed: u64,
    m: usize,
    consistent: bool,
) -> (HypothesisClass, LabeledDistribution, LearnerChannel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class = mask_class(rng.gen_range(1..16));
    let p = random_realizable(&mut rng, &class);
    let channel = random_channel_on(&mut rng, &class, &p, m, consistent);
    (class, p, channel)
}

/// The three pairwise-conflicting uniform pairs realizable for thresholds
/// over {1, 2}: all-zero, split, and all-one labelings.
fn conflicting_pool() -> Vec<LabeledDistribution> {
    [[(1, 0), (2, 0)], [(1, 0), (2, 1)], [(1, 1), (2, 1)]]
        .iter()
        .map(|pair| {
            LabeledDistribution::from_points(vec![(pair[0], 0.5), (pair[1], 0.5)])
                .expect("realizable pair")
        })
        .collect()
}

fn t1_support() -> Vec<LabeledExample> {
    vec![ex(1, 0), ex(1, 1), ex(2, 0), ex(2, 1)]
}

/// Exact output marginal of a channel under i.i.d. sampling from `p`.
fn output_marginal(channel: &LearnerChannel, p: &LabeledDistribution) -> Vec<f64> {
    let class = channel.class();
    let iid = iid_product(p.distribution(), channel.m()).expect("iid product");
    let mut out = vec![0.0; class.num_hypotheses()];
    for (seq, mass) in iid.iter() {
        let s = RealizableSample::new(class, seq.clone()).expect("realizable draw");
        for (&h, q) in channel.row(&s).expect("row present").iter() {
            out[h] += mass * q;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn signed_mutual_information_is_nonnegative(j in joint2()) {
        let signed = j.mutual_information_signed().unwrap();
        prop_assert!(signed >= -1e-10, "signed MI {signed} below zero");
        let clamped = j.mutual_information().unwrap();
        prop_assert!((clamped - signed.max(0.0)).abs() <= 1e-15);
    }

    #[test]
    fn conditional_information_and_every_slice_are_nonnegative(j in joint3()) {
        let cmi = j.conditional_mutual_information().unwrap();
        prop_assert!(cmi >= -1e-10, "CMI {cmi} below zero");
        for z in 0..j.marginal(2).len() {
            if let Some((_, slice)) = j.condition_on_last(z).unwrap() {
                let s = slice.mutual_information_signed().unwrap();
                prop_assert!(s >= -1e-10, "slice {z} signed MI {s} below zero");
            }
        }
    }

    #[test]
    fn chain_rule_splits_joint_information(j in joint3()) {
        let full = j.fuse_last_two(0, 1, 2).unwrap().mutual_information_signed().unwrap();
        let base = j.pair_marginal(0, 2).unwrap().mutual_information_signed().unwrap();
        let cond = j.conditional_mutual_information().unwrap();
        prop_assert!(
            (full - base - cond).abs() <= 1e-10,
            "I(X;YZ)={full} vs I(X;Z)+I(X;Y|Z)={}",
            base + cond
        );
    }

    #[test]
    fn coarsening_an_axis_never_raises_information(
        j in joint2(),
        raw_map in prop::collection::vec(0usize..4, 4),
    ) {
        let ny = j.marginal(1).len();
        let map: Vec<usize> = raw_map.iter().take(ny).map(|&v| v % ny).collect();
        let new_size = map.iter().max().unwrap() + 1;
        let coarse = j.apply_map(1, &map, new_size).unwrap();
        let fine = j.mutual_information_signed().unwrap();
        let dropped = coarse.mutual_information_signed().unwrap();
        prop_assert!(dropped <= fine + 1e-10, "coarse MI {dropped} above fine MI {fine}");
    }

    #[test]
    fn independent_conditioners_only_add_information(
        (nx, ny, nz) in (2usize..=3, 2usize..=3, 2usize..=3),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let px = normalize((0..nx).map(|_| rng.gen_range(0.05..1.0)).collect());
        let pz = normalize((0..nz).map(|_| rng.gen_range(0.05..1.0)).collect());
        let mut cells = vec![0.0; nx * ny * nz];
        for x in 0..nx {
            for z in 0..nz {
                let py = normalize((0..ny).map(|_| rng.gen_range(0.05..1.0)).collect());
                for y in 0..ny {
                    cells[(x * ny + y) * nz + z] = px[x] * pz[z] * py[y];
                }
            }
        }
        let j = JointDistribution::new(vec![("x", nx), ("y", ny), ("z", nz)], cells).unwrap();
        let mi = j.pair_marginal(0, 1).unwrap().mutual_information().unwrap();
        let cmi = j.conditional_mutual_information().unwrap();
        prop_assert!(cmi >= mi - 1e-9, "CMI {cmi} below MI {mi} despite X independent of Z");
    }

    #[test]
    fn mediated_conditioners_only_remove_information(
        (nx, ny, nz) in (2usize..=3, 2usize..=3, 2usize..=3),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let py = normalize((0..ny).map(|_| rng.gen_range(0.05..1.0)).collect());
        // X and Z drawn independently given Y, with Y on the last axis.
        let mut cells = vec![0.0; nx * nz * ny];
        for y in 0..ny {
            let px = normalize((0..nx).map(|_| rng.gen_range(0.05..1.0)).collect());
            let pz = normalize((0..nz).map(|_| rng.gen_range(0.05..1.0)).collect());
            for x in 0..nx {
                for z in 0..nz {
                    cells[(x * nz + z) * ny + y] = py[y] * px[x] * pz[z];
                }
            }
        }
        let j = JointDistribution::new(vec![("x", nx), ("z", nz), ("y", ny)], cells).unwrap();
        let mi = j.pair_marginal(0, 1).unwrap().mutual_information().unwrap();
        let cmi = j.conditional_mutual_information().unwrap();
        prop_assert!(mi >= cmi - 1e-9, "MI {mi} below CMI {cmi} despite Y mediating X and Z");
    }

    #[test]
    fn negative_part_respects_the_certified_floor(j in joint2()) {
        let v = j.mi_negative_part().unwrap();
        prop_assert!(v <= 1e-15, "negative part {v} is positive");
        prop_assert!(v >= MI_NEGATIVE_PART_FLOOR - 1e-12, "negative part {v} below floor");
    }

    #[test]
    fn iid_products_scale_entropy_linearly(
        weights in simplex(4),
        k in 2usize..=4,
        m in 1usize..=4,
    ) {
        let kept = normalize(weights.into_iter().take(k).collect());
        let items: Vec<(u32, f64)> = (0..k as u32).zip(kept).collect();
        let p = FiniteDistribution::new(items).unwrap();
        let prod = iid_product(&p, m).unwrap();
        prop_assert!(
            (prod.entropy() - m as f64 * p.entropy()).abs() <= 1e-9,
            "iid entropy is not additive"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn information_cost_stays_under_both_entropy_bounds(
        seed in any::<u64>(),
        m in 1usize..=3,
        consistent in any::<bool>(),
    ) {
        let (_, p, channel) = seeded_instance(seed, m, consistent);
        let cost = channel.info_cost(&p).unwrap();
        let h_out = entropy_bits(output_marginal(&channel, &p));
        let h_sample = m as f64 * p.distribution().entropy();
        prop_assert!(cost >= -1e-12, "cost {cost} negative");
        prop_assert!(cost <= h_out + 1e-9, "cost {cost} above output entropy {h_out}");
        prop_assert!(cost <= h_sample + 1e-9, "cost {cost} above sample entropy {h_sample}");
    }

    #[test]
    fn deterministic_channels_pay_exactly_the_output_entropy(
        seed in any::<u64>(),
        m in 1usize..=3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let class = mask_class(rng.gen_range(1..16));
        let p = random_realizable(&mut rng, &class);
        let support: Vec<LabeledExample> = p.distribution().iter().map(|(e, _)| *e).collect();
        let channel = leftmost_learner(&class, m, &support).unwrap();
        let cost = channel.info_cost(&p).unwrap();
        let h_out = entropy_bits(output_marginal(&channel, &p));
        prop_assert!(
            (cost - h_out).abs() <= 1e-10,
            "deterministic cost {cost} differs from output entropy {h_out}"
        );
    }

    #[test]
    fn symmetrizing_never_costs_more_and_is_idempotent(
        seed in any::<u64>(),
        m in 1usize..=3,
        consistent in any::<bool>(),
    ) {
        let (_, p, channel) = seeded_instance(seed, m, consistent);
        let sym = channel.symmetrize().unwrap();
        let orig_cost = channel.info_cost(&p).unwrap();
        let sym_cost = sym.info_cost(&p).unwrap();
        prop_assert!(sym_cost <= orig_cost + 1e-9, "symmetrizing raised the cost");
        if consistent {
            prop_assert!(sym.is_consistent().unwrap(), "symmetrizing broke consistency");
        }
        let twice = sym.symmetrize().unwrap();
        for ((s1, d1), (s2, d2)) in sym.rows().zip(twice.rows()) {
            prop_assert_eq!(s1, s2);
            for (&h, q) in d1.iter() {
                prop_assert!((q - d2.prob(&h)).abs() <= 1e-12, "symmetrize is not idempotent");
            }
        }
    }

    #[test]
    fn classes_and_channels_survive_json_round_trips(
        seed in any::<u64>(),
        m in 1usize..=2,
    ) {
        let (class, p, channel) = seeded_instance(seed, m, true);
        let class_json = class.to_json();
        prop_assert_eq!(HypothesisClass::from_json(&class_json).unwrap().to_json(), class_json);

        let p_json = p.to_json();
        prop_assert_eq!(LabeledDistribution::from_json(&p_json).unwrap().to_json(), p_json);

        let ch_json = channel.to_json();
        let reread = LearnerChannel::from_json(&class, &ch_json).unwrap();
        prop_assert_eq!(reread.to_json(), ch_json);

        let prod = product(&[class.clone(), mask_class(0b1001)]).unwrap();
        let prod_json = prod.to_json();
        prop_assert_eq!(HypothesisClass::from_json(&prod_json).unwrap().to_json(), prod_json);
    }

    #[test]
    fn vc_dimension_adds_over_random_products(a_mask in 1u8..16, b_mask in 1u8..=255) {
        let a = mask_class(a_mask);
        let b = three_point_class(b_mask);
        let prod = product(&[a.clone(), b.clone()]).unwrap();
        prop_assert_eq!(
            prod.vc_dimension().unwrap(),
            a.vc_dimension().unwrap() + b.vc_dimension().unwrap()
        );
    }

    #[test]
    fn restricting_a_product_to_a_block_recovers_the_factor(
        a_mask in 1u8..16,
        b_mask in 1u8..=255,
    ) {
        let factors = [mask_class(a_mask), three_point_class(b_mask)];
        let prod = product(&factors).unwrap();
        for (i, block) in prod.blocks().iter().enumerate() {
            let points: Vec<u32> = (block.lo..=block.hi).collect();
            let restricted = prod.restriction(&points).unwrap();
            prop_assert_eq!(
                restricted,
                factors[i].hypotheses().to_vec(),
                "block {} does not restrict back to its factor",
                i
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn game_value_is_linear_in_the_adversary(
        w1 in simplex(3),
        w2 in simplex(3),
        lam in 0.05f64..0.95,
        mu_w in 0.05f64..0.95,
    ) {
        let class = make_thresholds(1).unwrap();
        let support = t1_support();
        let family = LearnerFamily::new(vec![
            leftmost_learner(&class, 1, &support).unwrap(),
            uniform_consistent_learner(&class, 2, &support).unwrap(),
        ])
        .unwrap();
        let mu = FiniteDistribution::new(vec![(1usize, mu_w), (2usize, 1.0 - mu_w)]).unwrap();
        let pool = conflicting_pool();
        let meta = |w: &[f64]| {
            MetaDistribution::new(
                &class,
                pool.iter().cloned().zip(w.iter().copied()).collect(),
            )
            .unwrap()
        };
        let mixed: Vec<f64> =
            w1.iter().zip(&w2).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
        let v1 = game_value(&family, &meta(&w1), &mu).unwrap();
        let v2 = game_value(&family, &meta(&w2), &mu).unwrap();
        let vm = game_value(&family, &meta(&mixed), &mu).unwrap();
        prop_assert!(
            (vm - (lam * v1 + (1.0 - lam) * v2)).abs() <= 1e-10,
            "game value is not linear in the adversary"
        );
    }

    #[test]
    fn game_value_is_convex_in_the_learner(
        seed in any::<u64>(),
        sub_seed in any::<u64>(),
        m in 1usize..=2,
        lam in 0.05f64..0.95,
    ) {
        let (class, p, ch1) = seeded_instance(seed, m, true);
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed);
        let ch2 = random_channel_on(&mut rng, &class, &p, m, true);
        let mixed_rows = ch1
            .rows()
            .map(|(s, r1)| {
                let r2 = ch2.row(s).unwrap();
                let mixed =
                    FiniteDistribution::mixture(&[(lam, r1), (1.0 - lam, r2)]).unwrap();
                (RealizableSample::new(&class, s.examples().to_vec()).unwrap(), mixed)
            })
            .collect();
        let mix = LearnerChannel::new(class.clone(), m, mixed_rows).unwrap();
        let meta = MetaDistribution::new(&class, vec![(p.clone(), 1.0)]).unwrap();
        let mu = FiniteDistribution::point_mass(m);
        let value = |ch: LearnerChannel| {
            game_value(&LearnerFamily::new(vec![ch]).unwrap(), &meta, &mu).unwrap()
        };
        let (v1, v2, vm) = (value(ch1), value(ch2), value(mix));
        prop_assert!(
            vm <= lam * v1 + (1.0 - lam) * v2 + 1e-9,
            "mixing channels raised the payoff: {vm} vs {v1}/{v2}"
        );
    }

    #[test]
    fn grid_rounding_keeps_rows_on_the_grid(
        seed in any::<u64>(),
        m in 1usize..=2,
        g in prop::sample::select(vec![4usize, 8, 16, 64]),
    ) {
        let (_, _, channel) = seeded_instance(seed, m, true);
        let family = LearnerFamily::new(vec![channel]).unwrap();
        let rounded = grid_round_family(&family, g).unwrap();
        prop_assert!(rounded.is_consistent().unwrap(), "rounding broke consistency");
        for (_, ch) in rounded.channels() {
            for (_, dist) in ch.rows() {
                let mut total = 0.0;
                for (_, q) in dist.iter() {
                    let scaled = q * g as f64;
                    prop_assert!(
                        (scaled - scaled.round()).abs() <= 1e-9,
                        "probability {q} is off the 1/{g} grid"
                    );
                    total += q;
                }
                prop_assert!((total - 1.0).abs() <= 1e-12, "rounded row sums to {total}");
            }
        }
    }

    #[test]
    fn mixture_metas_multiply_weights_and_halve_masses(
        w1 in simplex(3),
        w2 in simplex(3),
    ) {
        let t1 = make_thresholds(1).unwrap();
        let prod = product(&[t1.clone(), t1.clone()]).unwrap();
        let pool = conflicting_pool();
        let meta = |w: &[f64]| {
            MetaDistribution::new(&t1, pool.iter().cloned().zip(w.iter().copied()).collect())
                .unwrap()
        };
        let mm = mixture_meta(&prod, &[meta(&w1), meta(&w2)]).unwrap();
        prop_assert_eq!(mm.combos().len(), 9);
        for (combo, (induced, weight)) in mm.combos().iter().zip(mm.induced().atoms()) {
            let expect = w1[combo[0]] * w2[combo[1]];
            prop_assert!((weight - expect).abs() <= 1e-12, "combo weight mismatch");
            for (pt, mass) in induced.distribution().iter() {
                let (factor, local) = prod.block_of(pt.x).unwrap();
                let atom = &mm.factors()[factor].atoms()[combo[factor]].0;
                let orig = atom.distribution().prob(&ex(local, pt.y));
                prop_assert!(
                    (mass - orig / 2.0).abs() <= 1e-12,
                    "induced mass {mass} is not half of {orig}"
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn the_solver_interval_is_sound(pool_mask in 1usize..8, seed in any::<u64>()) {
        let _ = seed;
        let class = make_thresholds(1).unwrap();
        let support = t1_support();
        let mu = FiniteDistribution::point_mass(2usize);
        let pool: Vec<LabeledDistribution> = conflicting_pool()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| pool_mask & (1 << i) != 0)
            .map(|(_, p)| p)
            .collect();
        let result = solve_game(&class, &support, &mu, &pool, 3e-2, 400).unwrap();

        prop_assert!(result.lower <= result.upper + 1e-12, "interval is inverted");
        prop_assert!((result.gap - (result.upper - result.lower)).abs() <= 1e-12);
        if result.converged {
            prop_assert!(result.gap <= 3e-2 + 1e-12, "converged with a wide gap");
        }

        // The returned channel's worst pool payoff realizes the upper end.
        let (_, worst) = best_response_meta(&result.channel, &pool, &mu).unwrap();
        prop_assert!(worst <= result.upper + 1e-9, "upper end does not cover the channel");

        // No channel beats the certified lower end against the returned meta.
        let (_, resist, _) =
            best_response_channel(&result.meta, &class, &support, &mu, 1e-5, 2000).unwrap();
        prop_assert!(resist >= result.lower - 1e-9, "lower end is not certified");

        // Restriction bound: each atom alone is no harder than the pool.
        for p in &pool {
            let singleton = MetaDistribution::new(&class, vec![(p.clone(), 1.0)]).unwrap();
            let (_, alone, conv) =
                best_response_channel(&singleton, &class, &support, &mu, 1e-5, 2000).unwrap();
            if conv {
                prop_assert!(
                    alone <= result.upper + 1e-5 + 1e-9,
                    "single atom {alone} beats the pool value {}",
                    result.upper
                );
            }
        }
    }
}

#[test]
fn vc_dimension_adds_over_all_two_point_products() {
    for a_mask in 1u8..16 {
        for b_mask in 1u8..16 {
            let a = mask_class(a_mask);
            let b = mask_class(b_mask);
            let prod = product(&[a.clone(), b.clone()]).unwrap();
            assert_eq!(
                prod.vc_dimension().unwrap(),
                a.vc_dimension().unwrap() + b.vc_dimension().unwrap(),
                "masks {a_mask}/{b_mask}"
            );
        }
    }
}

#[test]
fn threshold_rows_sweep_every_cut_exactly_once() {
    for n in 1u32..=4 {
        let class = make_thresholds(n).unwrap();
        let width = 1usize << n;
        assert_eq!(class.num_hypotheses(), width + 1);
        let mut seen = Vec::new();
        for row in class.hypotheses() {
            assert!(row.windows(2).all(|w| w[0] <= w[1]), "row is not a step function");
            seen.push(row.iter().filter(|&&y| y == 1).count());
        }
        let expected: Vec<usize> = (0..=width).rev().collect();
        assert_eq!(seen, expected, "cut counts for n={n}");
    }
}
