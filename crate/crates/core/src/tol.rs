//! Numerical tolerances used across the engine, each with its origin.
//!
//! These are fixed here rather than scattered as magic numbers so that the
//! acceptance thresholds and the library agree on one set of constants.

/// Probability mass bookkeeping (sums to one, parent/child mass, simplex sums).
pub const MASS: f64 = 1e-12;

/// Equality of means when deciding convex order.
pub const MEAN_EQ: f64 = 1e-10;

/// Slack allowed in the stop-loss comparison deciding convex order.
pub const STOP_LOSS: f64 = 1e-10;

/// Values closer than this are merged into one support point when a
/// distribution is extracted from a random variable, and into one layer in
/// Choquet evaluation. Collapses float noise before strictness decisions.
pub const MERGE: f64 = 1e-9;

/// Atomwise nonnegativity slack for jackpot checks and improvement inputs.
pub const NONNEG: f64 = 1e-12;

/// Slack on the log-space difference constraints in the Pareto witness search.
pub const LAMBDA_FEAS: f64 = 1e-9;

/// Budget residuals at least this negative invalidate an equilibrium certificate.
pub const BUDGET: f64 = 1e-9;

/// Market clearance residual allowed in a valid certificate.
pub const CLEARANCE: f64 = 1e-9;

/// Best-deviation gap allowed in a valid certificate.
pub const DEVIATION: f64 = 1e-7;

/// Agreement between an envelope value and the weighting function when
/// locating the coincidence interval.
pub const ENVELOPE_TOUCH: f64 = 1e-9;

/// Strictness margin for dominance verdicts in the RDU analysis.
pub const DOMINANCE: f64 = 1e-10;
