//! Equilibrium prices, certificate-based verification of competitive
//! equilibria, and the constructive existence algorithms: homogeneous
//! risk seekers, two-agent tail events, the simplex fixed point, and the
//! two-point mixed group, plus the constant-payoff weighted-agent case.

use std::sync::Arc;

use serde::Serialize;

use crate::agent::{choquet_from_distribution, rdu_utility, Agent, RiskAttitude};
use crate::error::{Error, Result};
use crate::lambda_opt::v_lambda;
use crate::space::{
    expectation, extend_with_independent_categorical, extend_with_uniform_cuts, Allocation,
    FiniteProbSpace, RandomVariable,
};
use crate::tol;
use crate::utility::{Curvature, Side};
use crate::weighting::concave_envelope;

/// A pricing measure given by its density with respect to the physical one.
#[derive(Debug, Clone, Serialize)]
pub struct PriceMeasure {
    pub space: Arc<FiniteProbSpace>,
    pub density: Vec<f64>,
}

impl PriceMeasure {
    pub fn new(space: Arc<FiniteProbSpace>, density: Vec<f64>) -> Result<Self> {
        if density.len() != space.len() {
            return Err(Error::Validation("density must cover every atom".into()));
        }
        if density.iter().any(|&d| d < 0.0 || !d.is_finite()) {
            return Err(Error::Validation("density must be nonnegative".into()));
        }
        let mass: f64 = density.iter().zip(space.probs()).map(|(&d, &p)| d * p).sum();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(format!(
                "density integrates to {mass}, expected 1"
            )));
        }
        // Absorb accumulated rounding so the unit-mass invariant holds to
        // machine precision.
        let mut density = density;
        if mass != 1.0 {
            for d in &mut density {
                *d /= mass;
            }
        }
        Ok(Self { space, density })
    }

    /// The physical measure itself.
    pub fn physical(space: Arc<FiniteProbSpace>) -> Self {
        let n = space.len();
        Self { space, density: vec![1.0; n] }
    }

    pub fn as_rv(&self) -> RandomVariable {
        RandomVariable { space: Arc::clone(&self.space), values: self.density.clone() }
    }

    pub fn lift_to(&self, extended: &Arc<FiniteProbSpace>) -> Result<Self> {
        let rv = self.as_rv().lift_to(extended)?;
        PriceMeasure::new(Arc::clone(extended), rv.values)
    }

    /// Expectation under this measure.
    pub fn price_of(&self, x: &RandomVariable) -> Result<f64> {
        expectation(x, Some(&self.as_rv()))
    }
}

/// Equilibrium price density for risk seekers: proportional to the
/// representative utility per unit of payoff, `V_lambda(X)/X`, with the
/// 0/0 = 0 convention on null-payoff atoms.
pub fn price_from_lambda(
    lambda: &[f64],
    agents: &[Agent],
    x: &RandomVariable,
) -> Result<PriceMeasure> {
    let mut raw = Vec::with_capacity(x.len());
    for &xs in &x.values {
        let xs = xs.max(0.0);
        if xs > 0.0 {
            let (v, _) = v_lambda(lambda, agents, xs)?;
            raw.push(v / xs);
        } else {
            raw.push(0.0);
        }
    }
    let z: f64 = raw.iter().zip(x.space.probs()).map(|(&r, &p)| r * p).sum();
    if z <= 0.0 {
        return Err(Error::Numeric(
            "degenerate price: weighted utility density vanishes everywhere".into(),
        ));
    }
    PriceMeasure::new(Arc::clone(&x.space), raw.into_iter().map(|r| r / z).collect())
}

/// How a per-agent individual-optimality bound was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationMethod {
    ExactVertex,
    WaterFilling,
    Heuristic,
}

/// Per-agent verification row.
#[derive(Debug, Clone, Serialize)]
pub struct AgentCheck {
    pub budget_residual: f64,
    pub achieved: f64,
    pub best_deviation: f64,
    pub deviation_gap: f64,
    pub method: VerificationMethod,
}

/// A verification certificate: the allocation is an equilibrium for the
/// price and endowments iff every budget holds, markets clear, and no agent
/// has a profitable affordable deviation.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumCertificate {
    pub per_agent: Vec<AgentCheck>,
    pub clearance_residual: f64,
    pub valid: bool,
    pub warnings: Vec<String>,
}

/// Exact optimum of a convex (or ratio-increasing) agent's budget problem by
/// enumerating payoff supports: the payoff is the full total on a set of
/// atoms plus a probability fraction of one budget-binding atom, realized by
/// splitting that atom. Ratios of utility to cost are linear in the
/// probability fraction, so these supports carry the optimum.
fn convex_exact_best(
    agent: &Agent,
    x: &RandomVariable,
    density: &[f64],
    budget: f64,
) -> Result<f64> {
    let m = x.len();
    let probs = x.space.probs();
    let mut free_util = 0.0;
    let mut costly: Vec<(f64, f64)> = Vec::new(); // (cost, util)
    for s in 0..m {
        let xs = x.values[s].max(0.0);
        let cost = probs[s] * density[s] * xs;
        let util = probs[s] * agent.utility.eval(xs)?;
        if cost <= 0.0 {
            free_util += util;
        } else {
            costly.push((cost, util));
        }
    }
    let k = costly.len();
    debug_assert!(k <= 18);
    let mut best = 0.0f64;
    for mask in 0u64..(1u64 << k) {
        let mut c = 0.0;
        let mut u = 0.0;
        for (t, &(cost, util)) in costly.iter().enumerate() {
            if mask >> t & 1 == 1 {
                c += cost;
                u += util;
            }
        }
        if c > budget + 1e-12 * (1.0 + budget.abs()) {
            continue;
        }
        if u > best {
            best = u;
        }
        let slack = budget - c;
        if slack > 0.0 {
            for (t, &(cost, util)) in costly.iter().enumerate() {
                if mask >> t & 1 == 0 {
                    let f = (slack / cost).min(1.0);
                    if u + f * util > best {
                        best = u + f * util;
                    }
                }
            }
        }
    }
    Ok(best + free_util)
}

/// Budget-filling by efficiency ratio with one probability-fractional atom.
/// Used above the enumeration cap and flagged as heuristic.
fn convex_greedy_best(
    agent: &Agent,
    x: &RandomVariable,
    density: &[f64],
    budget: f64,
) -> Result<f64> {
    let m = x.len();
    let probs = x.space.probs();
    let mut items: Vec<(f64, f64)> = Vec::new();
    let mut total = 0.0;
    for s in 0..m {
        let xs = x.values[s].max(0.0);
        let cost = probs[s] * density[s] * xs;
        let util = probs[s] * agent.utility.eval(xs)?;
        if cost <= 0.0 {
            total += util;
        } else {
            items.push((cost, util));
        }
    }
    items.sort_by(|a, b| (b.1 / b.0).total_cmp(&(a.1 / a.0)));
    let mut left = budget;
    for (cost, util) in items {
        if left <= 0.0 {
            break;
        }
        let f = (left / cost).min(1.0);
        total += f * util;
        left -= f * cost;
    }
    Ok(total)
}

/// Optimum of a concave agent's budget problem by bisection on the budget
/// multiplier: atomwise the payoff equalizes marginal utility against the
/// price density.
fn concave_best(
    agent: &Agent,
    x: &RandomVariable,
    density: &[f64],
    budget: f64,
) -> Result<f64> {
    let m = x.len();
    let probs = x.space.probs();
    let caps: Vec<f64> = x.values.iter().map(|&v| v.max(0.0)).collect();
    // Largest payoff on atom s with marginal utility at least mu * density.
    let y_at = |s: usize, mu: f64| -> Result<f64> {
        let target = mu * density[s];
        if caps[s] <= 0.0 {
            return Ok(0.0);
        }
        if agent.utility.derivative(caps[s], Side::Left)? >= target {
            return Ok(caps[s]);
        }
        if agent.utility.derivative(0.0, Side::Right)? <= target {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, caps[s]);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if agent.utility.derivative(mid, Side::Left)? >= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    let cost_at = |mu: f64| -> Result<f64> {
        let mut c = 0.0;
        for s in 0..m {
            c += probs[s] * density[s] * y_at(s, mu)?;
        }
        Ok(c)
    };
    let utility_at = |mu: f64| -> Result<f64> {
        let mut u = 0.0;
        for s in 0..m {
            u += probs[s] * agent.utility.eval(y_at(s, mu)?)?;
        }
        Ok(u)
    };
    if cost_at(0.0)? <= budget + 1e-12 {
        return utility_at(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while cost_at(hi)? > budget && hi < 1e12 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cost_at(mid)? > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Flat marginal stretches make the cost jump across the budget; blend
    // the two bracket solutions to exhaust it exactly. On the flat part the
    // utility is linear in the blend, so this is still the optimum.
    let mut y_feasible = Vec::with_capacity(m);
    let mut y_over = Vec::with_capacity(m);
    for s in 0..m {
        y_feasible.push(y_at(s, hi)?);
        y_over.push(y_at(s, lo)?);
    }
    let cost_of = |y: &[f64]| -> f64 {
        (0..m).map(|s| probs[s] * density[s] * y[s]).sum()
    };
    let c_lo = cost_of(&y_feasible);
    let c_hi = cost_of(&y_over);
    let t = if c_hi > c_lo + 1e-300 {
        ((budget - c_lo) / (c_hi - c_lo)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut u = 0.0;
    for s in 0..m {
        let y = y_feasible[s] + t * (y_over[s] - y_feasible[s]);
        u += probs[s] * agent.utility.eval(y)?;
    }
    Ok(u)
}

/// Heuristic optimum of a weighted (rank-dependent) agent's budget problem:
/// winner-take-all supports with a probability-fractional boundary atom,
/// scaled-proportional and constant candidates, and a budget-neutral
/// pairwise transfer sweep on the best atomwise candidate.
fn rdu_heuristic_best(
    agent: &Agent,
    x: &RandomVariable,
    density: &[f64],
    budget: f64,
) -> Result<f64> {
    let m = x.len();
    let probs = x.space.probs();
    let caps: Vec<f64> = x.values.iter().map(|&v| v.max(0.0)).collect();
    let cost: Vec<f64> = (0..m).map(|s| probs[s] * density[s] * caps[s]).collect();
    let mut best = 0.0f64;

    // Winner-take-all supports: full payoff on a prefix of the
    // efficiency-sorted atoms plus a fractional boundary atom.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        let ra = if cost[a] > 0.0 { agent.utility.eval(caps[a]).unwrap_or(0.0) * probs[a] / cost[a] } else { f64::INFINITY };
        let rb = if cost[b] > 0.0 { agent.utility.eval(caps[b]).unwrap_or(0.0) * probs[b] / cost[b] } else { f64::INFINITY };
        rb.total_cmp(&ra)
    });
    let eval_support = |take: &[(usize, f64)]| -> Result<f64> {
        // Distribution of the candidate: full value on a probability share
        // of each taken atom, zero elsewhere.
        let mut dist: Vec<(f64, f64)> = Vec::with_capacity(take.len() + 1);
        let mut mass = 0.0;
        for &(s, f) in take {
            let u = agent.utility.eval(caps[s])?;
            dist.push((u, f * probs[s]));
            mass += f * probs[s];
        }
        dist.push((0.0, (1.0 - mass).max(0.0)));
        choquet_from_distribution(&dist, &agent.weighting)
    };
    if m <= 14 {
        // Full support enumeration with a fractional boundary.
        for mask in 0u64..(1u64 << m) {
            let mut c = 0.0;
            let mut take: Vec<(usize, f64)> = Vec::new();
            for s in 0..m {
                if mask >> s & 1 == 1 {
                    c += cost[s];
                    take.push((s, 1.0));
                }
            }
            if c > budget + 1e-12 {
                continue;
            }
            best = best.max(eval_support(&take)?);
            let slack = budget - c;
            for t in 0..m {
                if mask >> t & 1 == 0 && cost[t] > 0.0 && slack > 0.0 {
                    let f = (slack / cost[t]).min(1.0);
                    let mut with = take.clone();
                    with.push((t, f));
                    best = best.max(eval_support(&with)?);
                }
            }
        }
    } else {
        let mut left = budget;
        let mut take: Vec<(usize, f64)> = Vec::new();
        for &s in &order {
            if cost[s] <= 0.0 {
                take.push((s, 1.0));
                continue;
            }
            if left <= 0.0 {
                break;
            }
            let f = (left / cost[s]).min(1.0);
            take.push((s, f));
            left -= f * cost[s];
            best = best.max(eval_support(&take)?);
        }
        best = best.max(eval_support(&take)?);
    }

    // Scaled-proportional and constant candidates.
    let qx: f64 = (0..m).map(|s| probs[s] * density[s] * caps[s]).sum();
    if qx > 0.0 {
        let c = (budget / qx).min(1.0);
        let y = RandomVariable::new(x.space.clone(), caps.iter().map(|&v| c * v).collect())?;
        best = best.max(rdu_utility(agent, &y)?);
        // Pairwise budget-neutral transfer sweep on the proportional start.
        let mut y_vals: Vec<f64> = y.values.clone();
        for _ in 0..2 {
            for a in 0..m {
                for b in 0..m {
                    if a == b || density[a] <= 0.0 || density[b] <= 0.0 {
                        continue;
                    }
                    let step = caps[a] / 4.0;
                    if step <= 0.0 {
                        continue;
                    }
                    let da = step.min(caps[a] - y_vals[a]);
                    let db = da * probs[a] * density[a] / (probs[b] * density[b]);
                    if da <= 0.0 || y_vals[b] < db {
                        continue;
                    }
                    let mut cand = y_vals.clone();
                    cand[a] += da;
                    cand[b] -= db;
                    let rv = RandomVariable::new(x.space.clone(), cand.clone())?;
                    let v = rdu_utility(agent, &rv)?;
                    if v > best {
                        best = v;
                        y_vals = cand;
                    }
                }
            }
        }
    }
    let qconst: f64 = (0..m).map(|s| probs[s] * density[s]).sum();
    if qconst > 0.0 {
        let c = (budget / qconst).min(caps.iter().copied().fold(f64::INFINITY, f64::min));
        if c > 0.0 {
            best = best.max(agent.utility.eval(c)?);
        }
    }
    Ok(best)
}

/// Verifies a tuple `(allocation, price)` against endowments: budget
/// residuals, market clearance, and each agent's best affordable deviation,
/// solved exactly for expected-utility agents (vertex enumeration for the
/// convex, marginal equalization for the concave) and heuristically for
/// weighted agents, with an explicit method tag per agent.
pub fn verify_equilibrium(
    alloc: &Allocation,
    price: &PriceMeasure,
    endowments: &[RandomVariable],
    agents: &[Agent],
) -> Result<EquilibriumCertificate> {
    let n = agents.len();
    if alloc.n_agents() != n || endowments.len() != n {
        return Err(Error::Validation("allocation, endowments, agents must agree on n".into()));
    }
    if !alloc.space.same_as(&price.space) {
        return Err(Error::SpaceMismatch("allocation and price on different spaces".into()));
    }
    for e in endowments {
        if !e.space.same_as(&alloc.space) {
            return Err(Error::SpaceMismatch("endowment on a different space".into()));
        }
    }
    let m = alloc.space.len();
    let x = RandomVariable::new(
        Arc::clone(&alloc.space),
        (0..m).map(|s| endowments.iter().map(|e| e.values[s]).sum()).collect(),
    )?;
    let mut clearance = 0.0f64;
    for s in 0..m {
        let total: f64 = alloc.components.iter().map(|c| c[s]).sum();
        clearance = clearance.max((total - x.values[s]).abs());
    }
    let mut per_agent = Vec::with_capacity(n);
    let mut warnings = Vec::new();
    for i in 0..n {
        let budget = price.price_of(&endowments[i])?;
        let cost = price.price_of(&alloc.component(i))?;
        let achieved = rdu_utility(&agents[i], &alloc.component(i).map(|v| v.max(0.0)))?;
        let (best, method) = if agents[i].is_eu() {
            match agents[i].curvature {
                Curvature::StrictlyConvex | Curvature::RatioIncreasing => {
                    let costly = (0..m)
                        .filter(|&s| {
                            alloc.space.prob(s) * price.density[s] * x.values[s].max(0.0) > 0.0
                        })
                        .count();
                    if costly <= 18 {
                        (convex_exact_best(&agents[i], &x, &price.density, budget)?, VerificationMethod::ExactVertex)
                    } else {
                        warnings.push(format!(
                            "agent {i}: {costly} priced atoms exceed the enumeration cap; ratio-greedy bound used"
                        ));
                        (convex_greedy_best(&agents[i], &x, &price.density, budget)?, VerificationMethod::Heuristic)
                    }
                }
                Curvature::StrictlyConcave => {
                    (concave_best(&agents[i], &x, &price.density, budget)?, VerificationMethod::WaterFilling)
                }
                Curvature::None => {
                    warnings.push(format!(
                        "agent {i}: untagged curvature; heuristic deviation search used"
                    ));
                    (rdu_heuristic_best(&agents[i], &x, &price.density, budget)?, VerificationMethod::Heuristic)
                }
            }
        } else {
            warnings.push(format!(
                "agent {i}: weighted preferences; heuristic deviation search used"
            ));
            (rdu_heuristic_best(&agents[i], &x, &price.density, budget)?, VerificationMethod::Heuristic)
        };
        per_agent.push(AgentCheck {
            budget_residual: budget - cost,
            achieved,
            best_deviation: best,
            deviation_gap: best - achieved,
            method,
        });
    }
    let valid = per_agent.iter().all(|c| c.budget_residual >= -tol::BUDGET)
        && clearance <= tol::CLEARANCE
        && per_agent.iter().all(|c| c.deviation_gap <= tol::DEVIATION);
    Ok(EquilibriumCertificate { per_agent, clearance_residual: clearance, valid, warnings })
}

/// A constructed equilibrium with its certificate. The allocation, price,
/// and endowments all live on `space`, which may extend the input space.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumOutcome {
    pub method: String,
    pub space: Arc<FiniteProbSpace>,
    pub allocation: Allocation,
    pub price: PriceMeasure,
    pub endowments: Vec<RandomVariable>,
    pub theta: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    /// Fixed-point residual, when the method is iterative.
    pub residual: Option<f64>,
    pub certificate: Option<EquilibriumCertificate>,
    pub notes: Vec<String>,
}

fn nontrivial(endowments: &[RandomVariable]) -> bool {
    endowments
        .iter()
        .filter(|e| e.values.iter().any(|&v| v.abs() > tol::NONNEG))
        .count()
        >= 2
}

/// Equilibrium for homogeneous strictly risk-seeking expected-utility
/// agents: the price density is proportional to `u(X)/X` (independent of the
/// endowments), purchase powers are the endowment values at that price, and
/// the allocation is the total payoff times an independent winner vector
/// with those probabilities.
pub fn homogeneous_equilibrium(
    agents: &[Agent],
    x: &RandomVariable,
    endowments: &[RandomVariable],
) -> Result<EquilibriumOutcome> {
    let n = agents.len();
    if n == 0 || endowments.len() != n {
        return Err(Error::Validation("one endowment per agent required".into()));
    }
    for a in agents {
        if !a.is_eu() || a.attitude != RiskAttitude::RiskSeeking {
            return Err(Error::Precondition(
                "homogeneous method needs strictly risk-seeking expected-utility agents".into(),
            ));
        }
        if a.utility != agents[0].utility {
            return Err(Error::Precondition("agents must share one utility function".into()));
        }
    }
    if !nontrivial(endowments) {
        // One agent holds everything: the endowment is the equilibrium and
        // any price supports it.
        let alloc = Allocation::from_components(
            Arc::clone(&x.space),
            endowments.iter().map(|e| e.values.clone()).collect(),
        )?;
        let price = PriceMeasure::physical(Arc::clone(&x.space));
        let cert = verify_equilibrium(&alloc, &price, endowments, agents)?;
        return Ok(EquilibriumOutcome {
            method: "homogeneous".into(),
            space: Arc::clone(&x.space),
            allocation: alloc,
            price,
            endowments: endowments.to_vec(),
            theta: None,
            lambda: None,
            residual: None,
            certificate: Some(cert),
            notes: vec!["trivial endowment: the equilibrium price is arbitrary".into()],
        });
    }
    let lambda = vec![1.0 / n as f64; n];
    let price = price_from_lambda(&lambda, agents, x)?;
    let qx = price.price_of(x)?;
    if qx <= 0.0 {
        return Err(Error::Numeric("total payoff has zero price".into()));
    }
    let mut theta = Vec::with_capacity(n);
    for e in endowments {
        theta.push((price.price_of(e)? / qx).max(0.0));
    }
    let tsum: f64 = theta.iter().sum();
    for t in &mut theta {
        *t /= tsum;
    }
    let (ext, part) = extend_with_independent_categorical(&x.space, &theta)?;
    let lifted_x = x.lift_to(&ext)?;
    let components: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            lifted_x
                .values
                .iter()
                .zip(&part.owner)
                .map(|(&v, &o)| if o == i { v } else { 0.0 })
                .collect()
        })
        .collect();
    let allocation = Allocation::new(Arc::clone(&ext), components, &lifted_x)?;
    let lifted_price = price.lift_to(&ext)?;
    let lifted_endowments: Vec<RandomVariable> = endowments
        .iter()
        .map(|e| e.lift_to(&ext))
        .collect::<Result<_>>()?;
    let cert = verify_equilibrium(&allocation, &lifted_price, &lifted_endowments, agents)?;
    Ok(EquilibriumOutcome {
        method: "homogeneous".into(),
        space: ext,
        allocation,
        price: lifted_price,
        endowments: lifted_endowments,
        theta: Some(theta),
        lambda: Some(lambda),
        residual: None,
        certificate: Some(cert),
        notes: Vec::new(),
    })
}

/// Equilibrium for two strictly risk-seeking expected-utility agents with
/// arbitrary endowments: price the payoff by agent 1's utility density, sort
/// atoms by the utility ratio, and grow agent 1's winning event until its
/// price equals agent 1's budget, splitting the boundary atom exactly.
pub fn two_agent_equilibrium(
    agents: &[Agent],
    x: &RandomVariable,
    endowments: &[RandomVariable],
) -> Result<EquilibriumOutcome> {
    if agents.len() != 2 || endowments.len() != 2 {
        return Err(Error::Precondition("the tail-event method is for exactly two agents".into()));
    }
    for a in agents {
        if !a.is_eu() || a.attitude != RiskAttitude::RiskSeeking {
            return Err(Error::Precondition(
                "the tail-event method needs strictly risk-seeking expected-utility agents".into(),
            ));
        }
    }
    let price = price_from_lambda(&[1.0, 0.0], agents, x)?;
    let qx = price.price_of(x)?;
    let budget1 = price.price_of(&endowments[0])?;
    let m = x.len();

    // Corner endowments: the owner keeps everything.
    if budget1 <= tol::NONNEG * (1.0 + qx) || budget1 >= qx - tol::NONNEG * (1.0 + qx) {
        let owner = usize::from(budget1 <= tol::NONNEG * (1.0 + qx));
        let mut components = vec![vec![0.0; m]; 2];
        components[owner] = x.values.clone();
        let allocation = Allocation::new(Arc::clone(&x.space), components, x)?;
        let cert = verify_equilibrium(&allocation, &price, endowments, agents)?;
        return Ok(EquilibriumOutcome {
            method: "two_agent".into(),
            space: Arc::clone(&x.space),
            allocation,
            price,
            endowments: endowments.to_vec(),
            theta: None,
            lambda: Some(vec![1.0, 0.0]),
            residual: None,
            certificate: Some(cert),
            notes: vec!["corner endowment: one agent keeps the whole payoff".into()],
        });
    }

    // Sort positive-payoff atoms by the utility ratio, descending: agent 1
    // wins where their utility per unit of agent 2's is highest.
    let mut order: Vec<usize> = (0..m).filter(|&s| x.values[s] > tol::NONNEG).collect();
    let mut ratio = vec![0.0; m];
    for &s in &order {
        let u1 = agents[0].utility.eval(x.values[s])?;
        let u2 = agents[1].utility.eval(x.values[s])?;
        ratio[s] = if u2 > 0.0 { u1 / u2 } else { f64::INFINITY };
    }
    order.sort_by(|&a, &b| ratio[b].total_cmp(&ratio[a]));

    // Grow the winning event; split the boundary atom so the budget binds.
    let mut cuts: Vec<Vec<f64>> = vec![vec![0.0, 0.0, 1.0]; m];
    let mut acc = 0.0;
    for &s in &order {
        let c = x.space.prob(s) * price.density[s] * x.values[s];
        if acc + c <= budget1 {
            acc += c;
            cuts[s] = vec![0.0, 1.0, 1.0];
        } else {
            let f = ((budget1 - acc) / c).clamp(0.0, 1.0);
            cuts[s] = vec![0.0, f, 1.0];
            break;
        }
    }
    let (ext, part) = extend_with_uniform_cuts(&x.space, &cuts)?;
    let lifted_x = x.lift_to(&ext)?;
    let components: Vec<Vec<f64>> = (0..2)
        .map(|i| {
            lifted_x
                .values
                .iter()
                .zip(&part.owner)
                .map(|(&v, &o)| if o == i { v } else { 0.0 })
                .collect()
        })
        .collect();
    let allocation = Allocation::new(Arc::clone(&ext), components, &lifted_x)?;
    let lifted_price = price.lift_to(&ext)?;
    let lifted_endowments: Vec<RandomVariable> = endowments
        .iter()
        .map(|e| e.lift_to(&ext))
        .collect::<Result<_>>()?;
    let cert = verify_equilibrium(&allocation, &lifted_price, &lifted_endowments, agents)?;
    Ok(EquilibriumOutcome {
        method: "two_agent".into(),
        space: ext,
        allocation,
        price: lifted_price,
        endowments: lifted_endowments,
        theta: None,
        lambda: Some(vec![1.0, 0.0]),
        residual: None,
        certificate: Some(cert),
        notes: Vec::new(),
    })
}

/// Atom assignment with optional fractional boundary atoms: for each atom a
/// list of `(agent, weight)` summing to one.
type FractionalAssignment = Vec<Vec<(usize, f64)>>;

fn winner_assignment(lambda: &[f64], agents: &[Agent], x: &RandomVariable) -> Result<FractionalAssignment> {
    let mut out = Vec::with_capacity(x.len());
    for &xs in &x.values {
        let (_, w) = v_lambda(lambda, agents, xs.max(0.0))?;
        out.push(vec![(w, 1.0)]);
    }
    Ok(out)
}

/// Purchase-power shares `f` and endowment shares `g` at the given weights,
/// under the weighted-utility price. Excluded (pinned-zero) agents keep
/// zero shares.
fn shares_at(
    lambda: &[f64],
    agents: &[Agent],
    x: &RandomVariable,
    endowments: &[RandomVariable],
    assign: &FractionalAssignment,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = agents.len();
    let probs = x.space.probs();
    let mut vx = vec![0.0; x.len()];
    for (s, &xs) in x.values.iter().enumerate() {
        let xs = xs.max(0.0);
        if xs > 0.0 {
            vx[s] = v_lambda(lambda, agents, xs)?.0;
        }
    }
    let denom: f64 = vx.iter().zip(probs).map(|(&v, &p)| v * p).sum();
    if denom <= 0.0 {
        return Err(Error::Numeric("weighted utility vanishes everywhere".into()));
    }
    let mut f = vec![0.0; n];
    for (s, parts) in assign.iter().enumerate() {
        for &(i, w) in parts {
            f[i] += w * probs[s] * vx[s];
        }
    }
    for v in &mut f {
        *v /= denom;
    }
    // Endowment shares under the same price: density ~ V(X)/X with 0/0 = 0.
    let mut g = vec![0.0; n];
    for (i, e) in endowments.iter().enumerate() {
        let mut num = 0.0;
        for (s, &xs) in x.values.iter().enumerate() {
            let xs = xs.max(0.0);
            if xs > 0.0 {
                num += probs[s] * (vx[s] / xs) * e.values[s];
            }
        }
        g[i] = num / denom;
    }
    Ok((f, g))
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Searches for weights equalizing purchase-power shares with endowment
/// shares: damped multiplicative fixed-point iteration with simplex restarts
/// and local refinement, then a boundary-repair pass that re-tunes one
/// weight to create an exact tie at a boundary atom and splits that atom so
/// the shares match. Residual at or under `tol` yields a certified
/// equilibrium on the (possibly split) space; otherwise the best effort is
/// returned without a certificate.
pub fn fixed_point_search(
    agents: &[Agent],
    x: &RandomVariable,
    endowments: &[RandomVariable],
    max_iters: usize,
    tolerance: f64,
    seed: u64,
) -> Result<EquilibriumOutcome> {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let n = agents.len();
    for a in agents {
        if !a.is_eu() || a.attitude != RiskAttitude::RiskSeeking {
            return Err(Error::Precondition(
                "the fixed-point method needs strictly risk-seeking expected-utility agents".into(),
            ));
        }
    }
    let mut notes = Vec::new();
    // Crossing audit: weighted utilities should cross finitely often.
    {
        let mut values: Vec<f64> = x.values.iter().map(|&v| v.max(0.0)).filter(|&v| v > 0.0).collect();
        values.sort_by(f64::total_cmp);
        values.dedup_by(|a, b| (*a - *b).abs() <= tol::MERGE);
        for i in 0..n {
            for j in (i + 1)..n {
                let mut flips = 0;
                let mut prev = 0i8;
                for &v in &values {
                    let d = agents[i].utility.eval(v)? - agents[j].utility.eval(v)?;
                    let sgn = if d > 1e-12 { 1 } else if d < -1e-12 { -1 } else { 0 };
                    if sgn != 0 && prev != 0 && sgn != prev {
                        flips += 1;
                    }
                    if sgn != 0 {
                        prev = sgn;
                    }
                }
                if flips > 32 {
                    notes.push(format!(
                        "agents {i} and {j}: utilities cross {flips} times on the payoff grid; \
                         the no-ties audit is doubtful"
                    ));
                }
            }
        }
    }
    // Agents with zero endowment value get weight zero throughout.
    let pinned: Vec<bool> = endowments
        .iter()
        .map(|e| e.values.iter().all(|&v| v.abs() <= tol::NONNEG))
        .collect();
    let normalize = |mut l: Vec<f64>| -> Vec<f64> {
        for (i, flag) in pinned.iter().enumerate() {
            if *flag {
                l[i] = 0.0;
            }
        }
        let s: f64 = l.iter().sum();
        if s > 0.0 {
            for v in &mut l {
                *v /= s;
            }
        }
        l
    };
    let residual_of = |lambda: &[f64]| -> Result<f64> {
        let assign = winner_assignment(lambda, agents, x)?;
        let (f, g) = shares_at(lambda, agents, x, endowments, &assign)?;
        Ok(l1(&f, &g))
    };

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let start = normalize(vec![1.0; n]);
    let mut best_res = residual_of(&start)?;
    let mut best_lambda = start;
    let mut best_assign = winner_assignment(&best_lambda, agents, x)?;
    let consider = |lambda: &[f64],
                        assign: &FractionalAssignment,
                        best_res: &mut f64,
                        best_lambda: &mut Vec<f64>,
                        best_assign: &mut FractionalAssignment|
     -> Result<f64> {
        let (f, g) = shares_at(lambda, agents, x, endowments, assign)?;
        let res = l1(&f, &g);
        if res < *best_res {
            *best_res = res;
            *best_lambda = lambda.to_vec();
            *best_assign = assign.clone();
        }
        Ok(res)
    };
    let restarts = 10usize;
    for r in 0..restarts {
        let mut lambda = if r == 0 {
            normalize(vec![1.0; n])
        } else {
            normalize((0..n).map(|_| rng.gen_range(0.05..1.0f64)).collect())
        };
        for _ in 0..max_iters.max(50) {
            let assign = winner_assignment(&lambda, agents, x)?;
            let (f, g) = shares_at(&lambda, agents, x, endowments, &assign)?;
            let res = l1(&f, &g);
            if res < best_res {
                best_res = res;
                best_lambda = lambda.clone();
                best_assign = assign.clone();
            }
            if res <= tolerance {
                break;
            }
            // Damped multiplicative update toward matching shares.
            let mut next = lambda.clone();
            for i in 0..n {
                if pinned[i] {
                    continue;
                }
                let ratio = if f[i] > 1e-300 {
                    (g[i] / f[i]).clamp(0.25, 4.0)
                } else if g[i] > 0.0 {
                    4.0
                } else {
                    1.0
                };
                next[i] = lambda[i] * ratio.sqrt();
            }
            let next = normalize(next);
            if l1(&next, &lambda) < 1e-15 {
                break;
            }
            lambda = next;
        }
        if best_res <= tolerance {
            break;
        }
    }
    // Local multiplicative coordinate refinement.
    let mut step = 0.25f64;
    while step > 1e-12 && best_res > tolerance {
        let mut improved = false;
        for i in 0..n {
            if pinned[i] {
                continue;
            }
            for dir in [1.0 + step, 1.0 / (1.0 + step)] {
                let cand = normalize({
                    let mut c = best_lambda.clone();
                    c[i] *= dir;
                    c
                });
                let cand_assign = winner_assignment(&cand, agents, x)?;
                let before = best_res;
                consider(&cand, &cand_assign, &mut best_res, &mut best_lambda, &mut best_assign)?;
                improved |= best_res < before;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    // Boundary repair: make the crossing exact by re-tuning one weight to
    // tie at a boundary atom, then split that atom so the shares match on
    // the nose. Whole-atom winner sets are step functions of the weights on
    // a finite space; the split realizes the intermediate shares.
    let mut lambda = best_lambda.clone();
    let mut assign = best_assign.clone();
    for _ in 0..(8 * n).max(16) {
        if best_res <= tolerance {
            break;
        }
        let (f, g) = shares_at(&lambda, agents, x, endowments, &assign)?;
        let over = (0..n)
            .filter(|&i| !pinned[i])
            .max_by(|&a, &b| (f[a] - g[a]).total_cmp(&(f[b] - g[b])));
        let under = (0..n)
            .filter(|&i| !pinned[i])
            .min_by(|&a, &b| (f[a] - g[a]).total_cmp(&(f[b] - g[b])));
        let (i, j) = match (over, under) {
            (Some(i), Some(j)) if f[i] - g[i] > 0.0 && f[j] - g[j] < 0.0 => (i, j),
            _ => break,
        };
        // Cheapest atom of i to tie with j: the smallest required raise of
        // lambda_j.
        let mut best_atom = None;
        let mut best_mult = f64::INFINITY;
        for (s, parts) in assign.iter().enumerate() {
            if !parts.iter().any(|&(a, w)| a == i && w > 0.0) {
                continue;
            }
            let xs = x.values[s].max(0.0);
            if xs <= 0.0 {
                continue;
            }
            let ui = agents[i].utility.eval(xs)?;
            let uj = agents[j].utility.eval(xs)?;
            if ui <= 0.0 || uj <= 0.0 {
                continue;
            }
            let needed = lambda[i] * ui / uj;
            if needed < best_mult {
                best_mult = needed;
                best_atom = Some(s);
            }
        }
        let s_star = match best_atom {
            Some(s) if best_mult.is_finite() && best_mult > 0.0 => s,
            _ => break,
        };
        lambda[j] = best_mult;
        lambda = normalize(lambda);
        // Rebuild whole-atom assignment at the new weights, then split the
        // tied atom between i and j to zero the pair residual.
        assign = winner_assignment(&lambda, agents, x)?;
        assign[s_star] = vec![(i, 1.0)];
        let (f0, g0) = shares_at(&lambda, agents, x, endowments, &assign)?;
        assign[s_star] = vec![(i, 0.0), (j, 1.0)];
        let (f1, _) = shares_at(&lambda, agents, x, endowments, &assign)?;
        // f_j is affine in the fraction handed to j.
        let slope = f1[j] - f0[j];
        let phi = if slope.abs() > 1e-300 {
            ((g0[j] - f0[j]) / slope).clamp(0.0, 1.0)
        } else {
            0.0
        };
        assign[s_star] = vec![(i, 1.0 - phi), (j, phi)];
        consider(&lambda, &assign, &mut best_res, &mut best_lambda, &mut best_assign)?;
    }
    let assign = best_assign;
    let lambda = best_lambda.clone();

    if best_res > tolerance {
        return Ok(EquilibriumOutcome {
            method: "fixed_point".into(),
            space: Arc::clone(&x.space),
            allocation: Allocation::from_components(
                Arc::clone(&x.space),
                {
                    let mut comps = vec![vec![0.0; x.len()]; n];
                    for (s, parts) in assign.iter().enumerate() {
                        for &(a, w) in parts {
                            comps[a][s] += w * x.values[s];
                        }
                    }
                    comps
                },
            )?,
            price: price_from_lambda(&lambda, agents, x)?,
            endowments: endowments.to_vec(),
            theta: None,
            lambda: Some(lambda),
            residual: Some(best_res),
            certificate: None,
            notes: {
                let mut nn = notes;
                nn.push(format!(
                    "no certificate: share residual {best_res:.3e} exceeds tolerance {tolerance:.1e}"
                ));
                nn
            },
        });
    }

    // Build the (possibly split) space from the fractional assignment.
    let m = x.len();
    let mut cuts: Vec<Vec<f64>> = Vec::with_capacity(m);
    for parts in &assign {
        let mut weights = vec![0.0; n];
        for &(a, w) in parts {
            weights[a] += w;
        }
        let mut list = Vec::with_capacity(n + 1);
        list.push(0.0);
        let mut acc = 0.0;
        for (k, &w) in weights.iter().enumerate() {
            acc += w;
            list.push(if k + 1 == n { 1.0 } else { acc.min(1.0) });
        }
        cuts.push(list);
    }
    let (ext, part) = extend_with_uniform_cuts(&x.space, &cuts)?;
    let lifted_x = x.lift_to(&ext)?;
    let components: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            lifted_x
                .values
                .iter()
                .zip(&part.owner)
                .map(|(&v, &o)| if o == i { v } else { 0.0 })
                .collect()
        })
        .collect();
    let allocation = Allocation::new(Arc::clone(&ext), components, &lifted_x)?;
    let price = price_from_lambda(&lambda, agents, x)?.lift_to(&ext)?;
    let lifted_endowments: Vec<RandomVariable> = endowments
        .iter()
        .map(|e| e.lift_to(&ext))
        .collect::<Result<_>>()?;
    let cert = verify_equilibrium(&allocation, &price, &lifted_endowments, agents)?;
    Ok(EquilibriumOutcome {
        method: "fixed_point".into(),
        space: ext,
        allocation,
        price,
        endowments: lifted_endowments,
        theta: None,
        lambda: Some(lambda),
        residual: Some(best_res),
        certificate: Some(cert),
        notes,
    })
}

/// Feasibility report for the two-point mixed equilibrium: the averse-side
/// derivative bound `L`, the seeking-side value bound `R`, and the shares of
/// the low state among the averse agents.
#[derive(Debug, Clone, Serialize)]
pub struct TwoPointReport {
    pub a_shares: Vec<f64>,
    pub l_bound: f64,
    pub r_bound: f64,
    pub feasible: bool,
    /// Admissible interval for the price ratio `alpha/beta`, when nonempty.
    pub ratio_interval: Option<(f64, f64)>,
    /// Left side of the necessary condition at the equal split `a/n`.
    pub necessity_lhs: f64,
    pub necessity_rhs: f64,
}

/// Candidate equilibrium with a two-valued total payoff: the averse agents
/// share the low value, the seekers gamble for the high one, and a two-level
/// price supports it iff the derivative bound exceeds the value bound.
pub fn two_point_mixed_equilibrium(
    a: f64,
    b: f64,
    seekers: &[Agent],
    averse: &[Agent],
) -> Result<TwoPointReport> {
    if !(0.0 < a && a < b) {
        return Err(Error::Precondition(format!("need 0 < a < b, got a = {a}, b = {b}")));
    }
    if seekers.is_empty() || averse.is_empty() {
        return Err(Error::Precondition("both groups must be nonempty".into()));
    }
    for s in seekers {
        if !s.is_eu() || s.attitude != RiskAttitude::RiskSeeking {
            return Err(Error::Precondition("seeking group must be strictly convex".into()));
        }
    }
    for t in averse {
        if !t.is_eu() || t.attitude != RiskAttitude::RiskAverse {
            return Err(Error::Precondition("averse group must be strictly concave".into()));
        }
    }
    let weights = vec![1.0; averse.len()];
    let a_shares = crate::lambda_opt::water_fill(&weights, averse, a)?;
    let mut l_bound = f64::INFINITY;
    for (i, t) in averse.iter().enumerate() {
        let num = t.utility.derivative(a_shares[i], Side::Left)?;
        let den = t.utility.derivative(0.0, Side::Right)?;
        if den > 0.0 {
            l_bound = l_bound.min(num / den);
        }
    }
    let mut r_bound = f64::NEG_INFINITY;
    for s in seekers {
        r_bound = r_bound.max(b * s.utility.eval(a)? / (a * s.utility.eval(b)?));
    }
    let n = seekers.len() + averse.len();
    let mut necessity_lhs = f64::NEG_INFINITY;
    for t in averse {
        let num = t.utility.derivative(a / n as f64, Side::Left)?;
        let den = t.utility.derivative(0.0, Side::Right)?;
        if den > 0.0 {
            necessity_lhs = necessity_lhs.max(num / den);
        }
    }
    let feasible = l_bound >= r_bound;
    Ok(TwoPointReport {
        a_shares,
        l_bound,
        r_bound,
        feasible,
        ratio_interval: if feasible { Some((r_bound, l_bound)) } else { None },
        necessity_lhs,
        necessity_rhs: r_bound,
    })
}

/// Realizes the two-point candidate as a concrete tuple on the two-atom
/// space (split across seekers when there are several), for a price ratio
/// `alpha/beta` taken from the admissible interval.
#[allow(clippy::too_many_arguments)]
pub fn two_point_instance(
    a: f64,
    b: f64,
    p_low: f64,
    seekers: &[Agent],
    averse: &[Agent],
    a_shares: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<(Allocation, PriceMeasure, Vec<RandomVariable>, Vec<Agent>)> {
    if !(0.0 < p_low && p_low < 1.0) {
        return Err(Error::Validation("low-state probability must be interior".into()));
    }
    let mass = alpha * p_low + beta * (1.0 - p_low);
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "price levels integrate to {mass}, expected 1: scale alpha and beta"
        )));
    }
    let s_count = seekers.len();
    let base = FiniteProbSpace::new(vec![p_low, 1.0 - p_low])?;
    // Seekers split the high atom evenly by probability.
    let mut cuts_high = Vec::with_capacity(s_count + 1);
    for k in 0..=s_count {
        cuts_high.push(k as f64 / s_count as f64);
    }
    let (space, part) = extend_with_uniform_cuts(&base, &[vec![0.0, 1.0], cuts_high])?;
    let links = space.parent_links().unwrap().to_vec();
    let m = space.len();
    let n = s_count + averse.len();
    let mut components = vec![vec![0.0; m]; n];
    let mut density = vec![0.0; m];
    for s in 0..m {
        if links[s] == 0 {
            density[s] = alpha;
            for (i, &share) in a_shares.iter().enumerate() {
                components[s_count + i][s] = share;
            }
        } else {
            density[s] = beta;
            components[part.owner[s]][s] = b;
        }
    }
    let x = RandomVariable::new(
        Arc::clone(&space),
        links.iter().map(|&pl| if pl == 0 { a } else { b }).collect(),
    )?;
    let allocation = Allocation::new(Arc::clone(&space), components, &x)?;
    let price = PriceMeasure::new(Arc::clone(&space), density)?;
    let endowments: Vec<RandomVariable> = allocation
        .components
        .iter()
        .map(|c| RandomVariable::new(Arc::clone(&space), c.clone()))
        .collect::<Result<_>>()?;
    let mut agents: Vec<Agent> = seekers.to_vec();
    agents.extend_from_slice(averse);
    Ok((allocation, price, endowments, agents))
}

/// Equilibrium for homogeneous weighted agents sharing a constant payoff:
/// the physical measure prices it, every agent stakes their endowment value
/// on an independent winner event. Requires the utility to be linear up to
/// the payoff and the weighting to match its concave envelope below `1/n`,
/// and refuses when an endowment is too large for gambling to stay optimal.
pub fn rdu_constant_equilibrium(
    agent: &Agent,
    n: usize,
    x_const: f64,
    endowments: &[RandomVariable],
) -> Result<EquilibriumOutcome> {
    if endowments.len() != n || n == 0 {
        return Err(Error::Validation("one endowment per agent required".into()));
    }
    if x_const <= 0.0 {
        return Err(Error::Precondition("the constant payoff must be positive".into()));
    }
    if let Some(x0) = agent.utility.linear_bound() {
        if x_const > x0 + 1e-12 {
            return Err(Error::Precondition(format!(
                "payoff {x_const} exceeds the linear range [0, {x0}] of the utility"
            )));
        }
    } else {
        return Err(Error::Precondition(
            "utility is not linear near zero; the constant-payoff method does not apply".into(),
        ));
    }
    let envelope = concave_envelope(&agent.weighting, 4096)?;
    let threshold = 1.0 / n as f64;
    for k in 0..=64 {
        let t = threshold * k as f64 / 64.0;
        if (envelope.eval(t) - agent.weighting.eval(t)).abs() > 1e-6 {
            return Err(Error::Precondition(format!(
                "weighting departs from its concave envelope at {t:.4} below 1/n; \
                 the winner-event construction is not supported"
            )));
        }
    }
    let space = endowments[0].space.clone();
    let mut theta = Vec::with_capacity(n);
    for e in endowments {
        if !e.space.same_as(&space) {
            return Err(Error::SpaceMismatch("endowments on different spaces".into()));
        }
        let mean = expectation(e, None)?;
        if mean > x_const * envelope.beta_w + 1e-12 {
            return Err(Error::Precondition(format!(
                "endowment mean {mean:.6} exceeds x * beta_w = {:.6}: whether an equilibrium \
                 exists here is not settled; the winner-event construction refuses",
                x_const * envelope.beta_w
            )));
        }
        theta.push(mean / x_const);
    }
    let tsum: f64 = theta.iter().sum();
    if (tsum - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "endowment means sum to {:.9}, expected the full payoff {x_const}",
            tsum * x_const
        )));
    }
    for t in &mut theta {
        *t /= tsum;
    }
    let (ext, part) = extend_with_independent_categorical(&space, &theta)?;
    let m = ext.len();
    let components: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|s| if part.owner[s] == i { x_const } else { 0.0 })
                .collect()
        })
        .collect();
    let x_ext = RandomVariable::constant(Arc::clone(&ext), x_const);
    let allocation = Allocation::new(Arc::clone(&ext), components, &x_ext)?;
    let price = PriceMeasure::physical(Arc::clone(&ext));
    let lifted_endowments: Vec<RandomVariable> = endowments
        .iter()
        .map(|e| e.lift_to(&ext))
        .collect::<Result<_>>()?;
    let agents = vec![agent.clone(); n];
    let cert = verify_equilibrium(&allocation, &price, &lifted_endowments, &agents)?;
    Ok(EquilibriumOutcome {
        method: "rdu_constant".into(),
        space: ext,
        allocation,
        price,
        endowments: lifted_endowments,
        theta: Some(theta),
        lambda: None,
        residual: None,
        certificate: Some(cert),
        notes: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::UtilityFunction;
    use crate::weighting::WeightingFunction;

    fn power_seeker(alpha: f64) -> Agent {
        Agent::eu(UtilityFunction::Power { alpha, coeff: 1.0 }, Curvature::StrictlyConvex)
    }

    #[test]
    fn price_from_lambda_square_utility() {
        // u(x) = x^2: density proportional to X.
        let sp = FiniteProbSpace::uniform(2);
        let x = RandomVariable::new(sp, vec![1.0, 2.0]).unwrap();
        let agents = vec![power_seeker(2.0), power_seeker(2.0)];
        let q = price_from_lambda(&[0.5, 0.5], &agents, &x).unwrap();
        assert!((q.density[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((q.density[1] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_square_proportional_endowments() {
        let sp = FiniteProbSpace::uniform(2);
        let x = RandomVariable::new(Arc::clone(&sp), vec![1.0, 2.0]).unwrap();
        let agents = vec![power_seeker(2.0), power_seeker(2.0)];
        let endowments = vec![x.map(|v| v / 2.0), x.map(|v| v / 2.0)];
        let out = homogeneous_equilibrium(&agents, &x, &endowments).unwrap();
        let theta = out.theta.unwrap();
        assert!((theta[0] - 0.5).abs() < 1e-12);
        let cert = out.certificate.unwrap();
        assert!(cert.valid, "{cert:?}");
        assert!(cert
            .per_agent
            .iter()
            .all(|c| c.method == VerificationMethod::ExactVertex));
        // Utility vector is E[u(X)] * theta = 2.5 * (0.5, 0.5).
        for c in &cert.per_agent {
            assert!((c.achieved - 1.25).abs() < 1e-9);
        }
    }

    #[test]
    fn homogeneous_trivial_endowment_passes_through() {
        let sp = FiniteProbSpace::uniform(2);
        let x = RandomVariable::new(Arc::clone(&sp), vec![1.0, 2.0]).unwrap();
        let agents = vec![power_seeker(2.0), power_seeker(2.0)];
        let endowments = vec![x.clone(), RandomVariable::constant(Arc::clone(&sp), 0.0)];
        let out = homogeneous_equilibrium(&agents, &x, &endowments).unwrap();
        assert!(!out.notes.is_empty());
        assert!(out.certificate.unwrap().valid);
    }

    #[test]
    fn two_agent_matches_homogeneous_on_constant_payoff() {
        let sp = FiniteProbSpace::uniform(2);
        let x = RandomVariable::constant(Arc::clone(&sp), 1.0);
        let agents = vec![power_seeker(2.0), power_seeker(2.0)];
        let endowments = vec![
            RandomVariable::constant(Arc::clone(&sp), 0.5),
            RandomVariable::constant(Arc::clone(&sp), 0.5),
        ];
        let out = two_agent_equilibrium(&agents, &x, &endowments).unwrap();
        let cert = out.certificate.unwrap();
        assert!(cert.valid, "{cert:?}");
        // Winning probability of agent 1 is one half.
        let p1: f64 = out
            .allocation
            .components[0]
            .iter()
            .zip(out.space.probs())
            .filter(|(&v, _)| v > 0.5)
            .map(|(_, &p)| p)
            .sum();
        assert!((p1 - 0.5).abs() < 1e-9);
        // Price is uniform.
        assert!(out.price.density.iter().all(|&d| (d - 1.0).abs() < 1e-9));
    }

    #[test]
    fn two_agent_heterogeneous_certificate() {
        let sp = FiniteProbSpace::new(vec![0.25, 0.35, 0.4]).unwrap();
        let x = RandomVariable::new(Arc::clone(&sp), vec![0.5, 1.0, 2.0]).unwrap();
        let agents = vec![power_seeker(2.0), power_seeker(3.0)];
        let endowments = vec![x.map(|v| 0.4 * v), x.map(|v| 0.6 * v)];
        let out = two_agent_equilibrium(&agents, &x, &endowments).unwrap();
        let cert = out.certificate.unwrap();
        assert!(cert.valid, "{cert:?}");
        for c in &cert.per_agent {
            assert!(c.deviation_gap <= 1e-7, "{c:?}");
        }
    }

    #[test]
    fn two_agent_corner_endowment() {
        let sp = FiniteProbSpace::uniform(2);
        let x = RandomVariable::new(Arc::clone(&sp), vec![1.0, 2.0]).unwrap();
        let agents = vec![power_seeker(2.0), power_seeker(3.0)];
        let endowments = vec![x.clone(), RandomVariable::constant(Arc::clone(&sp), 0.0)];
        let out = two_agent_equilibrium(&agents, &x, &endowments).unwrap();
        assert_eq!(out.allocation.components[0], x.values);
        assert!(out.certificate.unwrap().valid);
    }

    #[test]
    fn fixed_point_two_heterogeneous_agents() {
        // 40-point discretized continuous payoff keeps boundary atoms small.
        let m = 40;
        let sp = FiniteProbSpace::uniform(m);
        let x = RandomVariable::new(
            Arc::clone(&sp),
            (0..m).map(|k| 0.2 + (k as f64 + 0.5) / m as f64).collect(),
        )
        .unwrap();
        let agents = vec![power_seeker(2.0), power_seeker(3.0)];
        let endowments = vec![x.map(|v| 0.5 * v), x.map(|v| 0.5 * v)];
        let out = fixed_point_search(&agents, &x, &endowments, 200, 1e-6, 42).unwrap();
        assert!(out.residual.unwrap() <= 1e-6, "residual {:?}", out.residual);
        let cert = out.certificate.expect("certificate at tolerance");
        assert!(cert.valid, "{cert:?}");
    }

    #[test]
    fn fixed_point_single_agent() {
        let sp = FiniteProbSpace::uniform(2);
        let x = RandomVariable::new(Arc::clone(&sp), vec![1.0, 2.0]).unwrap();
        let agents = vec![power_seeker(2.0)];
        let endowments = vec![x.clone()];
        let out = fixed_point_search(&agents, &x, &endowments, 50, 1e-6, 1).unwrap();
        assert!(out.residual.unwrap() <= 1e-9);
        assert_eq!(out.allocation.components[0], x.values);
    }

    #[test]
    fn fixed_point_and_two_agent_cross_method() {
        // The two constructions solve the same market; prices need not
        // agree, but both must certify and deliver winner-take-all
        // structure.
        let m = 20;
        let sp = FiniteProbSpace::uniform(m);
        let x = RandomVariable::new(
            Arc::clone(&sp),
            (0..m).map(|k| 0.3 + (k as f64 + 0.5) / m as f64).collect(),
        )
        .unwrap();
        let agents = vec![power_seeker(2.0), power_seeker(3.0)];
        let endowments = vec![x.map(|v| 0.5 * v), x.map(|v| 0.5 * v)];
        let fp = fixed_point_search(&agents, &x, &endowments, 200, 1e-6, 21).unwrap();
        let ta = two_agent_equilibrium(&agents, &x, &endowments).unwrap();
        assert!(fp.certificate.unwrap().valid);
        assert!(ta.certificate.unwrap().valid);
        for out in [&fp.allocation, &ta.allocation] {
            assert!(crate::dependence::check_dependence(
                out,
                crate::dependence::DependenceMode::Jackpot
            )
            .holds);
        }
    }

    #[test]
    fn two_point_bounds_for_worked_example() {
        // Seekers 3x + x^2, averse 5x - x^2, a = 1/2, b = 3/2.
        let seekers = vec![Agent::eu(
            UtilityFunction::Quadratic { a: 3.0, b: 1.0 },
            Curvature::StrictlyConvex,
        )];
        let averse = vec![Agent::eu(
            UtilityFunction::CappedQuadratic { a: 5.0, t: 1.0 },
            Curvature::StrictlyConcave,
        )];
        let rep = two_point_mixed_equilibrium(0.5, 1.5, &seekers, &averse).unwrap();
        assert!((rep.l_bound - 0.8).abs() < 1e-12, "L = {}", rep.l_bound);
        assert!((rep.r_bound - 7.0 / 9.0).abs() < 1e-12, "R = {}", rep.r_bound);
        assert!(rep.feasible);
    }

    #[test]
    fn two_point_quadratic_pair_verifies_at_interval_endpoints() {
        // One seeker x^2 against one averse agent x - x^2/4 on a small
        // range: the candidate verifies at both ends of the supporting
        // ratio interval.
        let seekers = vec![power_seeker(2.0)];
        let averse = vec![Agent::eu(
            UtilityFunction::Quadratic { a: 1.0, b: -0.25 },
            Curvature::StrictlyConcave,
        )];
        let (a, b, p_low) = (0.5, 1.5, 0.4);
        let rep = two_point_mixed_equilibrium(a, b, &seekers, &averse).unwrap();
        assert!(rep.feasible, "{rep:?}");
        let (r, l) = rep.ratio_interval.unwrap();
        assert!((l - 0.75).abs() < 1e-12);
        assert!((r - 1.0 / 3.0).abs() < 1e-12);
        for ratio in [r, l] {
            let beta = 1.0 / (ratio * p_low + (1.0 - p_low));
            let alpha = ratio * beta;
            let (alloc, price, endowments, agents) =
                two_point_instance(a, b, p_low, &seekers, &averse, &rep.a_shares, alpha, beta)
                    .unwrap();
            let cert = verify_equilibrium(&alloc, &price, &endowments, &agents).unwrap();
            assert!(cert.valid, "ratio {ratio}: {cert:?}");
        }
    }

    #[test]
    fn two_point_degenerates_when_states_merge() {
        let seekers = vec![Agent::eu(
            UtilityFunction::Quadratic { a: 3.0, b: 1.0 },
            Curvature::StrictlyConvex,
        )];
        let averse = vec![Agent::eu(
            UtilityFunction::CappedQuadratic { a: 5.0, t: 1.0 },
            Curvature::StrictlyConcave,
        )];
        let rep = two_point_mixed_equilibrium(0.5, 0.5 + 1e-6, &seekers, &averse).unwrap();
        assert!(!rep.feasible);
        assert!(rep.r_bound > rep.l_bound);
        assert!(rep.necessity_lhs < rep.necessity_rhs);
    }

    #[test]
    fn rdu_constant_equal_endowments() {
        let agent = Agent::rdu(
            UtilityFunction::LinearLog { a: 1.0, x0: 1.0 },
            WeightingFunction::Tk { gamma: 0.71 },
        );
        let n = 8;
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        let endowments: Vec<RandomVariable> =
            (0..n).map(|_| RandomVariable::constant(Arc::clone(&sp), 1.0 / n as f64)).collect();
        let out = rdu_constant_equilibrium(&agent, n, 1.0, &endowments).unwrap();
        let theta = out.theta.unwrap();
        assert!(theta.iter().all(|&t| (t - 0.125).abs() < 1e-12));
        let cert = out.certificate.unwrap();
        assert!(cert.valid, "{cert:?}");
        assert!(!cert.warnings.is_empty(), "weighted verification must carry a warning");
    }

    #[test]
    fn price_density_comonotonic_with_payoff() {
        let sp = FiniteProbSpace::new(vec![0.2, 0.3, 0.5]).unwrap();
        let x = RandomVariable::new(Arc::clone(&sp), vec![0.5, 2.0, 1.0]).unwrap();
        let agents = vec![power_seeker(2.0), power_seeker(3.0)];
        let q = price_from_lambda(&[0.4, 0.6], &agents, &x).unwrap();
        let pair = Allocation::from_components(
            Arc::clone(&sp),
            vec![q.density.clone(), x.values.clone()],
        )
        .unwrap();
        assert!(crate::dependence::check_dependence(
            &pair,
            crate::dependence::DependenceMode::Comonotonic
        )
        .holds);
    }

    #[test]
    fn concave_solver_handles_linear_utility() {
        // Linear utility with a uniform price: any budget-exhausting payoff
        // is optimal, and the optimum equals the budget itself.
        let sp = FiniteProbSpace::uniform(2);
        let x = RandomVariable::new(Arc::clone(&sp), vec![1.0, 2.0]).unwrap();
        let agent = Agent::eu(
            UtilityFunction::Power { alpha: 1.0, coeff: 1.0 },
            Curvature::StrictlyConcave,
        );
        let budget = 0.7;
        let best = concave_best(&agent, &x, &[1.0, 1.0], budget).unwrap();
        assert!((best - budget).abs() < 1e-10, "best = {best}");
    }

    #[test]
    fn two_point_outcome_has_jackpot_structure() {
        // Seeking payoffs plus the residual form a winner-take-all vector.
        let seekers = vec![
            Agent::eu(UtilityFunction::Quadratic { a: 3.0, b: 1.0 }, Curvature::StrictlyConvex),
            Agent::eu(UtilityFunction::Power { alpha: 2.0, coeff: 1.0 }, Curvature::StrictlyConvex),
        ];
        let averse = vec![Agent::eu(
            UtilityFunction::CappedQuadratic { a: 5.0, t: 1.0 },
            Curvature::StrictlyConcave,
        )];
        let rep = two_point_mixed_equilibrium(0.5, 1.5, &seekers, &averse).unwrap();
        assert!(rep.feasible);
        let (r, l) = rep.ratio_interval.unwrap();
        let ratio = 0.5 * (r + l);
        let beta = 1.0 / (ratio * 0.5 + 0.5);
        let alpha = ratio * beta;
        let (alloc, price, endowments, agents) =
            two_point_instance(0.5, 1.5, 0.5, &seekers, &averse, &rep.a_shares, alpha, beta)
                .unwrap();
        let cert = verify_equilibrium(&alloc, &price, &endowments, &agents).unwrap();
        assert!(cert.valid, "{cert:?}");
        // Sub-vector of the seekers plus the residual.
        let total = alloc.total();
        let m = alloc.space.len();
        let residual: Vec<f64> = (0..m)
            .map(|s| total.values[s] - alloc.components[0][s] - alloc.components[1][s])
            .collect();
        let sub = Allocation::from_components(
            alloc.space.clone(),
            vec![alloc.components[0].clone(), alloc.components[1].clone(), residual],
        )
        .unwrap();
        assert!(crate::dependence::check_dependence(
            &sub,
            crate::dependence::DependenceMode::Jackpot
        )
        .holds);
    }

    #[test]
    fn homogeneous_single_agent() {
        let sp = FiniteProbSpace::uniform(2);
        let x = RandomVariable::new(Arc::clone(&sp), vec![1.0, 2.0]).unwrap();
        let agents = vec![power_seeker(2.0)];
        let endowments = vec![x.clone()];
        let out = homogeneous_equilibrium(&agents, &x, &endowments).unwrap();
        assert_eq!(out.allocation.components[0], x.values);
        assert!(out.certificate.unwrap().valid);
    }

    #[test]
    fn rdu_constant_single_agent_with_concave_weighting() {
        // One agent needs the weighting to match its envelope on all of
        // [0, 1]; a concave weighting qualifies and the agent keeps the
        // payoff at the physical price.
        let agent = Agent::rdu(
            UtilityFunction::LinearLog { a: 1.0, x0: 1.0 },
            WeightingFunction::Power { gamma: 0.5 },
        );
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        let endowments = vec![RandomVariable::constant(Arc::clone(&sp), 1.0)];
        let out = rdu_constant_equilibrium(&agent, 1, 1.0, &endowments).unwrap();
        assert_eq!(out.allocation.components[0], vec![1.0]);
        assert!(out.price.density.iter().all(|&d| (d - 1.0).abs() < 1e-12));
        assert!(out.certificate.unwrap().valid);
    }

    #[test]
    fn rdu_constant_refuses_large_endowment() {
        let agent = Agent::rdu(
            UtilityFunction::LinearLog { a: 1.0, x0: 1.0 },
            WeightingFunction::Tk { gamma: 0.71 },
        );
        let sp = FiniteProbSpace::new(vec![1.0]).unwrap();
        // One agent holds 0.3 > beta_w of the total; the rest share equally.
        let mut endowments = vec![RandomVariable::constant(Arc::clone(&sp), 0.3)];
        for _ in 0..7 {
            endowments.push(RandomVariable::constant(Arc::clone(&sp), 0.1));
        }
        let err = rdu_constant_equilibrium(&agent, 8, 1.0, &endowments);
        match err {
            Err(crate::error::Error::Precondition(msg)) => {
                assert!(msg.contains("beta_w"), "unexpected message: {msg}");
            }
            other => panic!("expected a precondition refusal, got {other:?}"),
        }
    }
}
