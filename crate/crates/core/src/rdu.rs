//! Winner-take-all versus proportional sharing for homogeneous weighted
//! agents: dominance comparison, the sum-optimal value bound, the payoff
//! threshold beyond which proportional sharing wins, and the small-stake
//! perturbation of a safe allocation.

use serde::Serialize;

use crate::agent::{
    check_tech_con, choquet_from_distribution, default_small_t_grid, rdu_utility, Agent,
    TechConReport,
};
use crate::error::{Error, Result};
use crate::space::{extend_with_independent_categorical, RandomVariable};
use crate::tol;
use crate::utility::Side;
use crate::weighting::{check_cavexity, concave_envelope, EnvelopeResult};

/// A homogeneous weighted-agent scenario with its envelope and the audit of
/// the structural assumptions: utility linear up to `x0` and vanishing at
/// zero, cavex weighting, and weighting equal to its concave envelope below
/// `1/n` (equivalently `n >= 1/beta_w`).
#[derive(Debug, Clone, Serialize)]
pub struct RduScenario {
    pub n: usize,
    pub agent: Agent,
    pub payoff: RandomVariable,
    /// Upper end of the utility's exactly-linear initial segment.
    pub x0: f64,
    pub envelope: EnvelopeResult,
    pub audit_passed: bool,
    pub audit_messages: Vec<String>,
}

impl RduScenario {
    /// Envelope value through the closed cavex form: the weighting itself up
    /// to the coincidence bound, the tangent line into `(1, 1)` beyond it.
    /// Exact for concave-then-convex weightings, unlike chord interpolation
    /// of the sampled hull.
    pub fn envelope_value(&self, t: f64) -> f64 {
        let b = self.envelope.beta_w;
        if t <= b {
            self.agent.weighting.eval(t)
        } else {
            self.agent.weighting.eval(b) + self.envelope.tangent_slope * (t - b)
        }
    }

    pub fn new(n: usize, agent: Agent, payoff: RandomVariable, grid_size: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("need at least one agent".into()));
        }
        if payoff.values.iter().any(|&v| v < -tol::NONNEG) {
            return Err(Error::Domain("payoff must be nonnegative".into()));
        }
        let envelope = concave_envelope(&agent.weighting, grid_size.max(1024))?;
        let mut messages = Vec::new();
        let x0 = match agent.utility.linear_bound() {
            Some(x0) => x0,
            None => {
                messages.push("utility has no exactly-linear initial segment".into());
                0.0
            }
        };
        if agent.utility.eval(0.0)?.abs() > 1e-12 {
            messages.push("utility does not vanish at zero".into());
        }
        if check_cavexity(&agent.weighting, grid_size.max(1024))?.is_none() {
            messages.push("weighting is not concave-then-convex".into());
        }
        if n >= 2 {
            let threshold = 1.0 / n as f64;
            let mut worst: f64 = 0.0;
            for k in 0..=128 {
                let t = threshold * k as f64 / 128.0;
                worst =
                    worst.max((envelope.eval(t) - agent.weighting.eval(t)).abs());
            }
            if worst > 1e-6 {
                messages.push(format!(
                    "weighting departs from its concave envelope below 1/n by {worst:.2e} \
                     (need n >= {:.2})",
                    1.0 / envelope.beta_w.max(1e-12)
                ));
            }
        }
        Ok(Self {
            n,
            agent,
            payoff,
            x0,
            envelope,
            audit_passed: messages.is_empty(),
            audit_messages: messages,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DominanceVerdict {
    JackpotStrictlyDominates,
    ProportionalStrictlyDominates,
    Incomparable,
}

/// Comparison of the fair winner-take-all allocation against the equal
/// proportional one, for one representative agent (all agents are
/// exchangeable here).
#[derive(Debug, Clone, Serialize)]
pub struct DominanceReport {
    pub jackpot_utility: f64,
    pub proportional_utility: f64,
    pub verdict: DominanceVerdict,
    pub margin: f64,
    pub warnings: Vec<String>,
}

/// Utility of the fair winner-take-all allocation, computed two ways: by an
/// explicit independent winner extension, and by the closed-form layer
/// integral with survival probabilities scaled down by `n`. The two must
/// agree to float accuracy.
fn jackpot_utility_both_ways(scenario: &RduScenario) -> Result<(f64, f64)> {
    let n = scenario.n;
    let theta = vec![1.0 / n as f64; n];
    let (ext, part) = extend_with_independent_categorical(&scenario.payoff.space, &theta)?;
    let lifted = scenario.payoff.lift_to(&ext)?;
    let winner_payoff = RandomVariable::new(
        ext.clone(),
        lifted
            .values
            .iter()
            .zip(&part.owner)
            .map(|(&v, &o)| if o == 0 { v } else { 0.0 })
            .collect(),
    )?;
    let by_extension = rdu_utility(&scenario.agent, &winner_payoff)?;
    // Closed form: layers of u(X) with survival P(u(X) > x) / n.
    let udist: Vec<(f64, f64)> = {
        let mut pairs = Vec::with_capacity(scenario.payoff.len());
        for (s, &v) in scenario.payoff.values.iter().enumerate() {
            pairs.push((scenario.agent.utility.eval(v.max(0.0))?, scenario.payoff.space.prob(s)));
        }
        pairs
    };
    let scaled: Vec<(f64, f64)> = udist
        .iter()
        .map(|&(v, p)| (v, p / n as f64))
        .chain(std::iter::once((0.0, 1.0 - 1.0 / n as f64)))
        .collect();
    let closed_form = choquet_from_distribution(&scaled, &scenario.agent.weighting)?;
    Ok((by_extension, closed_form))
}

/// Compares the fair winner-take-all allocation against equal proportional
/// sharing for the scenario's agents.
pub fn jackpot_vs_proportional(scenario: &RduScenario) -> Result<DominanceReport> {
    let mut warnings = scenario.audit_messages.clone();
    let (jackpot, closed_form) = jackpot_utility_both_ways(scenario)?;
    if (jackpot - closed_form).abs() > 1e-10 * (1.0 + jackpot.abs()) {
        warnings.push(format!(
            "extension and layer-integral values disagree: {jackpot} vs {closed_form}"
        ));
    }
    let proportional =
        rdu_utility(&scenario.agent, &scenario.payoff.map(|v| v.max(0.0) / scenario.n as f64))?;
    let margin = jackpot - proportional;
    let verdict = if margin > tol::DOMINANCE {
        DominanceVerdict::JackpotStrictlyDominates
    } else if margin < -tol::DOMINANCE {
        DominanceVerdict::ProportionalStrictlyDominates
    } else {
        DominanceVerdict::Incomparable
    };
    Ok(DominanceReport {
        jackpot_utility: jackpot,
        proportional_utility: proportional,
        verdict,
        margin: margin.abs(),
        warnings,
    })
}

/// The maximal total preference value any allocation can reach when the
/// payoff stays in the utility's linear range: `n` times the layer integral
/// of the envelope at survival over `n`, scaled by the linear slope. Equals
/// the winner-take-all sum when the weighting matches its envelope below
/// `1/n`.
pub fn rdu_sum_optimal_value(scenario: &RduScenario) -> Result<f64> {
    let hi = scenario.payoff.max();
    if hi > scenario.x0 + 1e-12 {
        return Err(Error::Precondition(format!(
            "payoff reaches {hi}, beyond the linear range [0, {}]",
            scenario.x0
        )));
    }
    let slope = scenario.agent.utility.origin_slope();
    let n = scenario.n as f64;
    // Layer integral of X with distorted survival: distinct values sorted
    // descending, sum (x_k - x_{k+1}) * envelope(survival_k / n).
    let dist = scenario.payoff.map(|v| v.max(0.0)).distribution();
    let mut total = 0.0;
    let mut survival = 0.0;
    let mut prev: Option<f64> = None;
    for &(v, p) in dist.iter().rev() {
        if let Some(upper) = prev {
            total += (upper - v) * scenario.envelope_value(survival / n);
        }
        survival += p;
        prev = Some(v);
    }
    if let Some(lowest) = prev {
        if lowest > 0.0 {
            total += lowest * scenario.envelope_value(survival.min(1.0) / n);
        }
    }
    Ok(scenario.n as f64 * slope * total)
}

/// Search report for the payoff threshold of the dominance
/// reversal.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub y0: Option<f64>,
    pub theta: f64,
    pub tech_con: TechConReport,
}

/// Finds the smallest grid payoff beyond which proportional sharing beats
/// the winner-take-all allocation for sure: the ratio bound `theta` comes
/// from the weighting, and the threshold is where `u(x/n) > theta u(x)`
/// holds from there on. Uses a geometric grid of 64 points per decade.
pub fn find_y0(
    scenario: &RduScenario,
    theta_margin: f64,
    x_search_range: (f64, f64),
) -> Result<ThresholdReport> {
    let n = scenario.n;
    let (lo, hi) = x_search_range;
    if !(0.0 < lo && lo < hi) {
        return Err(Error::Validation("search range must satisfy 0 < lo < hi".into()));
    }
    let decades = (hi / lo).log10();
    let points = ((decades * 64.0).ceil() as usize).max(2);
    let grid: Vec<f64> = (0..=points)
        .map(|k| lo * (hi / lo).powf(k as f64 / points as f64))
        .collect();
    let tech_con = check_tech_con(
        &scenario.agent.weighting,
        &scenario.agent.utility,
        n,
        &default_small_t_grid(),
        &grid,
    )?;
    if !tech_con.satisfied {
        return Ok(ThresholdReport { y0: None, theta: 1.0, tech_con });
    }
    let theta = (tech_con.sup_ratio_estimate + theta_margin).min(1.0 - 1e-9);
    // Smallest grid point from which the utility-ratio condition holds
    // through the end of the range.
    let nf = n as f64;
    let mut y0 = None;
    for (k, &x) in grid.iter().enumerate().rev() {
        let ok = scenario.agent.utility.eval(x / nf)? > theta * scenario.agent.utility.eval(x)?;
        if !ok {
            break;
        }
        y0 = Some(grid[k]);
    }
    Ok(ThresholdReport { y0, theta, tech_con })
}

/// Utility of the small-stake gamble around a safe level `y`: each agent
/// pays `epsilon` for an `n epsilon` prize on an independent `1/n` event.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    pub utility: f64,
    /// Central finite difference of the utility in epsilon at zero, step 1e-5.
    pub derivative_at_zero: f64,
    /// Whether the perturbed allocation beats the safe level at this epsilon.
    pub dominates: bool,
}

pub fn epsilon_perturbation(
    y: f64,
    scenario: &RduScenario,
    epsilon: f64,
) -> Result<PerturbationReport> {
    if epsilon >= y {
        return Err(Error::Domain(format!("epsilon = {epsilon} must stay below y = {y}")));
    }
    if epsilon < 0.0 {
        return Err(Error::Domain("epsilon must be nonnegative".into()));
    }
    let n = scenario.n as f64;
    let w_at = scenario.agent.weighting.eval(1.0 / n);
    let value = |eps: f64| -> Result<f64> {
        let low = scenario.agent.utility.eval(y - eps)?;
        let high = scenario.agent.utility.eval(y + (n - 1.0) * eps)?;
        Ok(low + (high - low) * w_at)
    };
    let utility = value(epsilon)?;
    let h = 1e-5;
    let derivative_at_zero = (value(2.0 * h)? - value(0.0)?) / (2.0 * h);
    let dominates = utility > scenario.agent.utility.eval(y)? + tol::DOMINANCE;
    Ok(PerturbationReport { utility, derivative_at_zero, dominates })
}

/// Closed-form limit slope of the perturbation at zero:
/// `n u'(y) (w(1/n) - 1/n)`.
pub fn perturbation_limit_slope(y: f64, scenario: &RduScenario) -> Result<f64> {
    let n = scenario.n as f64;
    let w_at = scenario.agent.weighting.eval(1.0 / n);
    let du = scenario.agent.utility.derivative(y, Side::Right)?;
    Ok(n * du * (w_at - 1.0 / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::FiniteProbSpace;
    use crate::utility::UtilityFunction;
    use crate::weighting::WeightingFunction;
    use std::sync::Arc;

    fn tk_scenario(n: usize, payoff: RandomVariable) -> RduScenario {
        let agent = Agent::rdu(
            UtilityFunction::LinearLog { a: 1.8, x0: 1.0 },
            WeightingFunction::Tk { gamma: 0.71 },
        );
        RduScenario::new(n, agent, payoff, 4096).unwrap()
    }

    #[test]
    fn audit_passes_for_eight_agents_and_fails_for_two() {
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        let x = RandomVariable::constant(Arc::clone(&sp), 1.0);
        assert!(tk_scenario(8, x.clone()).audit_passed);
        let two = tk_scenario(2, x);
        assert!(!two.audit_passed, "{:?}", two.audit_messages);
    }

    #[test]
    fn small_payoff_jackpot_dominates() {
        let sp = FiniteProbSpace::uniform(4);
        let x = RandomVariable::new(sp, vec![0.2, 0.5, 0.8, 1.0]).unwrap();
        let scenario = tk_scenario(8, x);
        let report = jackpot_vs_proportional(&scenario).unwrap();
        assert_eq!(report.verdict, DominanceVerdict::JackpotStrictlyDominates);
        assert!(report.margin > 0.0);
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    }

    #[test]
    fn single_agent_is_incomparable() {
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        let x = RandomVariable::constant(sp, 0.5);
        let scenario = tk_scenario(1, x);
        let report = jackpot_vs_proportional(&scenario).unwrap();
        assert_eq!(report.verdict, DominanceVerdict::Incomparable);
        assert!(report.margin < 1e-12);
    }

    #[test]
    fn satiation_large_payoff_prefers_proportional() {
        // Utility flat beyond the satiation point: splitting gives everyone
        // the maximum, gambling wastes probability.
        let agent = Agent::rdu(
            UtilityFunction::Satiation { x0: 1.0, y0: 2.0 },
            WeightingFunction::Tk { gamma: 0.71 },
        );
        let n = 8;
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        let x = RandomVariable::constant(sp, 2.0 * n as f64);
        let scenario = RduScenario::new(n, agent, x, 4096).unwrap();
        let report = jackpot_vs_proportional(&scenario).unwrap();
        assert_eq!(report.verdict, DominanceVerdict::ProportionalStrictlyDominates);
    }

    #[test]
    fn sum_optimal_identity_weighting_is_expectation() {
        let agent = Agent::rdu(
            UtilityFunction::LinearLog { a: 2.0, x0: 1.0 },
            WeightingFunction::Identity,
        );
        let sp = FiniteProbSpace::uniform(2);
        let x = RandomVariable::new(sp, vec![0.5, 1.0]).unwrap();
        let scenario = RduScenario::new(4, agent, x, 2048).unwrap();
        let v = rdu_sum_optimal_value(&scenario).unwrap();
        // Identity envelope: n * E[X]/n * slope = slope * E[X].
        assert!((v - 2.0 * 0.75).abs() < 1e-9, "v = {v}");
    }

    #[test]
    fn sum_optimal_constant_payoff_closed_form() {
        // Constant payoff at the linearity edge: the bound is
        // n * envelope(1/n) * x0 * slope, strictly above u(x0) because the
        // envelope exceeds the diagonal.
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        let x = RandomVariable::constant(sp, 1.0);
        let scenario = tk_scenario(8, x);
        let v = rdu_sum_optimal_value(&scenario).unwrap();
        let expected = 8.0 * scenario.envelope_value(0.125) * 1.0 * 1.8;
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
        let u_x0 = scenario.agent.utility.eval(1.0).unwrap();
        assert!(v > u_x0, "no gain from gambling: {v} <= {u_x0}");
    }

    #[test]
    fn sum_optimal_rejects_payoff_beyond_linear_range() {
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        let x = RandomVariable::constant(sp, 3.0);
        let scenario = tk_scenario(8, x);
        assert!(rdu_sum_optimal_value(&scenario).is_err());
    }

    #[test]
    fn threshold_found_for_log_utility_and_absent_for_linear() {
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        let x = RandomVariable::constant(Arc::clone(&sp), 1.0);
        let scenario = tk_scenario(8, x.clone());
        let rep = find_y0(&scenario, 1e-3, (1e-2, 1e6)).unwrap();
        let y0 = rep.y0.expect("threshold must exist for log utility");
        assert!(y0 > 1.0 && y0 < 1e3, "y0 = {y0}");
        // Dominance flips above the threshold.
        let above = RandomVariable::constant(Arc::clone(&sp), y0 * 2.0);
        let report = jackpot_vs_proportional(&tk_scenario(8, above)).unwrap();
        assert_eq!(report.verdict, DominanceVerdict::ProportionalStrictlyDominates);

        let linear_agent = Agent::rdu(
            UtilityFunction::Power { alpha: 1.0, coeff: 1.0 },
            WeightingFunction::Tk { gamma: 0.71 },
        );
        let linear = RduScenario::new(8, linear_agent, x, 2048).unwrap();
        let rep = find_y0(&linear, 1e-3, (1e-2, 1e6)).unwrap();
        assert!(rep.y0.is_none());
        assert!(!rep.tech_con.satisfied);
    }

    #[test]
    fn bounded_utility_has_threshold() {
        let agent = Agent::rdu(
            UtilityFunction::Exponential { rate: 1.0 },
            WeightingFunction::Tk { gamma: 0.71 },
        );
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        let x = RandomVariable::constant(sp, 1.0);
        let scenario = RduScenario::new(8, agent, x, 2048).unwrap();
        let rep = find_y0(&scenario, 1e-3, (1e-2, 1e4)).unwrap();
        assert!(rep.y0.is_some());
    }

    #[test]
    fn perturbation_matches_limit_slope() {
        let agent = Agent::rdu(
            UtilityFunction::LinearLog { a: 1.8, x0: 1.0 },
            WeightingFunction::Tk { gamma: 0.71 },
        );
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        let n = 8usize;
        let y = 0.5;
        let x = RandomVariable::constant(sp, y * n as f64);
        let scenario = RduScenario::new(n, agent, x, 2048).unwrap();
        let rep = epsilon_perturbation(y, &scenario, 0.0).unwrap();
        assert!((rep.utility - scenario.agent.utility.eval(y).unwrap()).abs() < 1e-12);
        let slope = perturbation_limit_slope(y, &scenario).unwrap();
        assert!(
            (rep.derivative_at_zero - slope).abs() < 1e-4,
            "fd {} vs limit {}",
            rep.derivative_at_zero,
            slope
        );
        assert!(slope > 0.0);
        // A small positive stake beats the safe level.
        let small = epsilon_perturbation(y, &scenario, 1e-3).unwrap();
        assert!(small.dominates);
        // Identity weighting removes the gain.
        let flat = Agent::rdu(
            UtilityFunction::LinearLog { a: 1.8, x0: 1.0 },
            WeightingFunction::Identity,
        );
        let sp2 = FiniteProbSpace::new(vec![1.0]).unwrap();
        let x2 = RandomVariable::constant(sp2, y * n as f64);
        let flat_scenario = RduScenario::new(n, flat, x2, 2048).unwrap();
        let flat_slope = perturbation_limit_slope(y, &flat_scenario).unwrap();
        assert!(flat_slope.abs() < 1e-12);
    }

    #[test]
    fn perturbation_rejects_oversized_epsilon() {
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        let x = RandomVariable::constant(sp, 4.0);
        let scenario = tk_scenario(8, x);
        assert!(epsilon_perturbation(0.5, &scenario, 0.6).is_err());
    }
}
