//! Numeric tolerances used across the crate.
//!
//! Three tiers, loosening with the amount of floating-point work behind a
//! number: constructed tables must be near-exact, algebraic identities may
//! accumulate a few rounding steps, and certified inequalities get the loosest
//! slack because both sides are full computations.

/// Constructed distributions and tables: sums to one, product weights, etc.
pub const CONSTRUCTION_TOL: f64 = 1e-12;

/// Exact identities between independently computed quantities (chain rule,
/// dual-route evaluations).
pub const IDENTITY_TOL: f64 = 1e-10;

/// Inequality links in certificates: `lhs >= rhs - INEQUALITY_TOL`.
pub const INEQUALITY_TOL: f64 = 1e-9;

/// Cells with less mass than this are treated as exact zeros.
pub const ZERO_MASS_TOL: f64 = 1e-15;

/// Largest sample enumeration (|support|^m) any operation will attempt.
pub const MAX_ENUMERATED_SAMPLES: usize = 10_000_000;

/// Largest dense joint (in cells) any operation will materialize.
pub const MAX_JOINT_CELLS: usize = 50_000_000;

/// Largest exponent for threshold-class domains (domain size 2^n).
pub const MAX_THRESHOLD_BITS: u32 = 20;

/// Largest point set `shatters` will test (2^25 label patterns).
pub const MAX_SHATTER_POINTS: usize = 25;

/// Largest domain `vc_dimension` will search exhaustively.
pub const MAX_VC_DOMAIN: usize = 32;

/// Channel/distribution grids finer than this are rejected by the brute-force
/// oracle.
pub const MAX_ORACLE_GRID: u32 = 64;

/// Total channels the brute-force oracle will enumerate.
pub const MAX_ORACLE_CHANNELS: u64 = 20_000_000;
