//! Exact information-complexity toolkit for finite hypothesis classes.
//!
//! The crate computes, certifies, and adversarially lower-bounds the
//! sample-to-output mutual information of consistent proper learners:
//!
//! - [`prob`]: finite distributions, dense joints, entropy / MI / CMI kernels,
//!   i.i.d. products, and window-conditioned binomial laws.
//! - [`classes`]: finite hypothesis classes over integer domains, threshold
//!   classes, block products, VC dimension.
//! - [`learners`]: explicit learner channels, consistency and properness
//!   checks, symmetrization, and the exact information cost of a channel.
//! - [`adversary`]: output matrices, good-row search, hard distributions,
//!   and the per-class mutual-information lower bounds they certify.
//! - [`game`]: the min-max game between a learner channel and a distribution
//!   over realizable distributions, solved numerically with certificates.
//! - [`direct_sum`]: product-class accounting, superadditivity checks, and
//!   the mixture construction that transfers per-factor bounds to products.
//! - [`cert`]: machine-checkable certificate chains linking every reported
//!   bound back to exact identities and inequalities.
//! - [`suites`]: deterministic randomized invariant suites over the kernels.
//!
//! All logarithms are base 2; every reported quantity is in bits.

pub mod adversary;
pub mod cert;
pub mod classes;
pub mod direct_sum;
pub mod error;
pub mod game;
pub mod learners;
pub mod prob;
pub mod suites;
pub mod tol;

pub use adversary::{
    build_output_matrix, build_two_sample_learner, find_good_row, hard_distribution,
    hard_distribution_mirrored, random_size_lower_bound, threshold_lower_bound,
    verify_row_guarantee, GoodRow, HardDistribution, Orientation, OutputMatrix, RandomSizeBound,
    ThresholdBound, EVENT_PROBABILITY_FLOOR,
};
pub use cert::{Certificate, Link, LinkKind};
pub use classes::{
    make_thresholds, product, BlockInfo, HypothesisClass, LabeledDistribution, LabeledExample,
};
pub use direct_sum::{
    alpha_factor, direct_sum_check, mixture_meta, split_sample, superadditivity_gap,
    DirectSumCheck, MixtureMeta, SampleSplit,
};
pub use error::{Error, Result};
pub use game::{
    best_response_channel, best_response_meta, brute_force_ic, game_value, grid_round_family,
    realizable_grid_net, solve_game, GameResult, MetaDistribution,
};
pub use learners::{
    enumerate_realizable_samples, leftmost_learner, rightmost_learner,
    uniform_consistent_learner, LearnerChannel, LearnerFamily, RealizableSample,
};
pub use prob::{
    conditioned_binomial, iid_product, ConditionedBinomial, FiniteDistribution, JointDistribution,
};
pub use suites::{run_all_suites, run_suite, SuiteReport, SUITE_NAMES};

/// Crate version, surfaced in CLI run records.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
