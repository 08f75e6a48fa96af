//! Microbenchmarks for the hot kernels (information quantities, the output
//! matrix and row search, the game solver loop, and the grid oracle).

use criterion::{criterion_group, criterion_main, Criterion};
use iclab_core::prob::{iid_product, FiniteDistribution, JointDistribution};
use iclab_core::{
    build_output_matrix, brute_force_ic, find_good_row, leftmost_learner, make_thresholds,
    product, solve_game, superadditivity_gap, threshold_lower_bound, uniform_consistent_learner,
    HypothesisClass, LabeledDistribution, LabeledExample,
};

fn full_support(class: &HypothesisClass) -> Vec<LabeledExample> {
    class
        .domain()
        .iter()
        .flat_map(|&x| {
            [LabeledExample::new(x, 0).unwrap(), LabeledExample::new(x, 1).unwrap()]
        })
        .collect()
}

fn patterned_joint(axes: Vec<(&str, usize)>) -> JointDistribution {
    let cells: usize = axes.iter().map(|&(_, k)| k).product();
    let weights: Vec<f64> = (0..cells).map(|i| 1.0 + ((i * 31 + 7) % 11) as f64).collect();
    let total: f64 = weights.iter().sum();
    JointDistribution::new(axes, weights.into_iter().map(|w| w / total).collect()).unwrap()
}

fn bench_information_kernels(c: &mut Criterion) {
    let pair = patterned_joint(vec![("x", 16), ("y", 16)]);
    c.bench_function("mutual_information_16x16", |b| b.iter(|| pair.mutual_information()));

    let triple = patterned_joint(vec![("x", 8), ("y", 8), ("z", 8)]);
    c.bench_function("conditional_mi_8x8x8", |b| {
        b.iter(|| triple.conditional_mutual_information())
    });

    let p = FiniteDistribution::uniform((0u32..8).collect()).unwrap();
    c.bench_function("iid_product_8pt_m5", |b| {
        b.iter(|| iid_product(&p, 5).unwrap().entropy())
    });

    let t1 = make_thresholds(1).unwrap();
    let support = full_support(&t1);
    c.bench_function("grid_oracle_n1_m1_g8", |b| {
        b.iter(|| brute_force_ic(&t1, 1, &support, 8).unwrap())
    });
}

fn bench_pipelines(c: &mut Criterion) {
    let mut group = c.benchmark_group("pipelines");
    group.sample_size(10);

    let t4 = make_thresholds(4).unwrap();
    let left4 = leftmost_learner(&t4, 2, &full_support(&t4)).unwrap();
    group.bench_function("output_matrix_and_good_row_n4", |b| {
        b.iter(|| {
            let q = build_output_matrix(&left4).unwrap();
            find_good_row(&q, 5).unwrap()
        })
    });

    let t3 = make_thresholds(3).unwrap();
    let left3 = leftmost_learner(&t3, 2, &full_support(&t3)).unwrap();
    group.bench_function("threshold_certificate_n3", |b| {
        b.iter(|| threshold_lower_bound(&left3).unwrap())
    });

    let t1 = make_thresholds(1).unwrap();
    let support = full_support(&t1);
    let pool: Vec<LabeledDistribution> = [[(1, 0), (2, 0)], [(1, 0), (2, 1)], [(1, 1), (2, 1)]]
        .iter()
        .map(|pair| {
            LabeledDistribution::from_points(pair.iter().map(|&xy| (xy, 0.5)).collect()).unwrap()
        })
        .collect();
    let mu = FiniteDistribution::point_mass(1usize);
    group.bench_function("solve_game_two_point_class", |b| {
        b.iter(|| solve_game(&t1, &support, &mu, &pool, 5e-2, 60).unwrap())
    });

    let blocked = product(&[make_thresholds(1).unwrap(), make_thresholds(1).unwrap()]).unwrap();
    let pair_support = vec![
        LabeledExample::new(1, 0).unwrap(),
        LabeledExample::new(3, 1).unwrap(),
    ];
    let channel = uniform_consistent_learner(&blocked, 2, &pair_support).unwrap();
    let p = LabeledDistribution::from_points(vec![((1, 0), 0.5), ((3, 1), 0.5)]).unwrap();
    group.bench_function("superadditivity_gap_two_blocks", |b| {
        b.iter(|| superadditivity_gap(&channel, &p, 2).unwrap())
    });

    group.finish();
}

criterion_group!(benches, bench_information_kernels, bench_pipelines);
criterion_main!(benches);
