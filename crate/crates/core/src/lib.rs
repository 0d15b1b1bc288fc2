//! Risk-sharing computation engine on finite probability spaces.
//!
//! Builds and verifies winner-take-all (jackpot) allocations,
//! weighted-optimal and Pareto-optimal allocations for risk-seeking,
//! risk-averse, and mixed expected-utility groups, competitive equilibria
//! with certificate-based verification, and dominance analysis for
//! homogeneous probability-weighting agents. Randomization devices are
//! realized by exact atom splitting, never Monte Carlo, so stochastic-order
//! checks stay exact.
//!
//! Equilibrium constructions are runtime-selectable strategies behind
//! [`methods::EquilibriumMethod`], registered by name in
//! [`methods::registry`].

pub mod agent;
pub mod dependence;
pub mod equilibrium;
pub mod error;
pub mod improve;
pub mod lambda_opt;
pub mod methods;
pub mod oracle;
pub mod order;
pub mod rdu;
pub mod space;
pub mod tol;
pub mod utility;
pub mod weighting;

pub use agent::{choquet, rdu_utility, Agent, RiskAttitude};
pub use equilibrium::{
    price_from_lambda, verify_equilibrium, EquilibriumCertificate, EquilibriumOutcome,
    PriceMeasure,
};
pub use error::{Error, Result};
pub use improve::{counter_monotonic_improve, shifted_improve, ImprovementResult};
pub use lambda_opt::{
    mixed_lambda_optimal, pareto_check_rs, ra_lambda_optimal, rs_lambda_optimal, upf_trace,
    v_lambda, NegishiWeights,
};
pub use order::{convex_order_leq, stop_loss, OrderVerdict};
pub use space::{
    expectation, extend_with_independent_categorical, extend_with_uniform_cuts, Allocation,
    FiniteProbSpace, PartitionVector, RandomVariable,
};
pub use utility::{Curvature, Side, UtilityFunction};
pub use weighting::{check_cavexity, concave_envelope, EnvelopeResult, WeightingFunction};
