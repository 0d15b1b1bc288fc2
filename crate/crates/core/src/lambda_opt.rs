//! Weighted-optimal allocation solvers: winner-take-all for risk seekers,
//! marginal-equalizing shares for risk averters, and the grid-plus-refinement
//! split for mixed groups, together with the Pareto certificate for jackpot
//! allocations.

use std::sync::Arc;

use serde::Serialize;

use crate::agent::{Agent, RiskAttitude};
use crate::dependence::{check_dependence, DependenceMode, DependenceVerdict};
use crate::error::{Error, Result};
use crate::space::{Allocation, FiniteProbSpace, RandomVariable};
use crate::tol;
use crate::utility::Side;

/// Nonnegative agent weights, not all zero.
#[derive(Debug, Clone, Serialize)]
pub struct NegishiWeights {
    pub weights: Vec<f64>,
    pub normalized: bool,
}

impl NegishiWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&l| l < 0.0 || !l.is_finite()) {
            return Err(Error::Validation("weights must be nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Validation("weights must not all vanish".into()));
        }
        Ok(Self { weights, normalized: false })
    }

    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let mut w = Self::new(weights)?;
        let sum: f64 = w.weights.iter().sum();
        for l in &mut w.weights {
            *l /= sum;
        }
        w.normalized = true;
        Ok(w)
    }
}

/// Pointwise maximum of weighted utilities, the representative-agent utility
/// for risk seekers. Ties break to the lowest agent index.
pub fn v_lambda(lambda: &[f64], agents: &[Agent], x: f64) -> Result<(f64, usize)> {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0usize;
    for (i, (l, a)) in lambda.iter().zip(agents).enumerate() {
        let v = l * a.utility.eval(x)?;
        if v > best {
            best = v;
            arg = i;
        }
    }
    Ok((best, arg))
}

fn require_eu(agents: &[Agent], what: &str) -> Result<()> {
    if agents.iter().any(|a| !a.is_eu()) {
        return Err(Error::Precondition(format!(
            "{what} requires expected-utility agents (identity weighting)"
        )));
    }
    Ok(())
}

fn expected_utility(agent: &Agent, values: &[f64], probs: &[f64]) -> Result<f64> {
    let mut e = 0.0;
    for (&v, &p) in values.iter().zip(probs) {
        e += p * agent.utility.eval(v.max(0.0))?;
    }
    Ok(e)
}

/// Winner-take-all solver for strictly risk-seeking (or ratio-increasing)
/// expected-utility agents: on each atom the whole payoff goes to the agent
/// maximizing the weighted utility of the total. The value equals the
/// expectation of the pointwise maximum.
pub fn rs_lambda_optimal(
    lambda: &[f64],
    agents: &[Agent],
    x: &RandomVariable,
) -> Result<(Allocation, f64)> {
    require_eu(agents, "the winner-take-all solver")?;
    if let Some(bad) = agents.iter().position(|a| a.attitude != RiskAttitude::RiskSeeking) {
        return Err(Error::Precondition(format!(
            "agent {bad} is not risk seeking; use the mixed-group solver"
        )));
    }
    if lambda.len() != agents.len() {
        return Err(Error::Validation("one weight per agent required".into()));
    }
    let n = agents.len();
    let mut components = vec![vec![0.0; x.len()]; n];
    let mut value = 0.0;
    for (s, (&xs, &p)) in x.values.iter().zip(x.space.probs()).enumerate() {
        let (v, winner) = v_lambda(lambda, agents, xs.max(0.0))?;
        components[winner][s] = xs;
        value += p * v;
    }
    let alloc = Allocation::new(Arc::clone(&x.space), components, x)?;
    Ok((alloc, value))
}

/// Shares a scalar `x` among concave agents by equalizing weighted marginal
/// utilities: finds the common marginal `mu` with
/// `sum_i clip((lambda_i u_i')^(-1)(mu), 0, x) = x` by bisection.
pub fn water_fill(lambda: &[f64], agents: &[Agent], x: f64) -> Result<Vec<f64>> {
    let n = agents.len();
    if x <= 0.0 {
        return Ok(vec![0.0; n]);
    }
    // Largest share whose weighted marginal is still at least mu.
    let share = |i: usize, mu: f64| -> Result<f64> {
        let l = lambda[i];
        if l <= 0.0 {
            return Ok(0.0);
        }
        if l * agents[i].utility.derivative(0.0, Side::Right)? <= mu {
            return Ok(0.0);
        }
        if l * agents[i].utility.derivative(x, Side::Left)? >= mu {
            return Ok(x);
        }
        let (mut lo, mut hi) = (0.0, x);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if l * agents[i].utility.derivative(mid, Side::Left)? >= mu {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    let total = |mu: f64| -> Result<f64> {
        let mut t = 0.0;
        for i in 0..n {
            t += share(i, mu)?;
        }
        Ok(t)
    };
    let mut mu_hi = 1.0f64;
    let mu_lo = 0.0f64;
    for (i, a) in agents.iter().enumerate() {
        let top = lambda[i] * a.utility.derivative(0.0, Side::Right)?;
        mu_hi = mu_hi.max(if top.is_finite() { top } else { 1e12 });
    }
    if total(mu_lo)? < x - 1e-9 * (1.0 + x) {
        return Err(Error::Numeric(format!(
            "weighted marginals cannot absorb x = {x}: derivative not invertible on the range"
        )));
    }
    let (mut lo, mut hi) = (mu_lo, mu_hi);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if total(mid)? >= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    let mut shares: Vec<f64> = (0..n).map(|i| share(i, mu)).collect::<Result<_>>()?;
    let residual = x - shares.iter().sum::<f64>();
    if residual.abs() > 1e-6 * (1.0 + x) {
        return Err(Error::Numeric(format!(
            "marginal equalization left residual {residual} at x = {x}"
        )));
    }
    if residual != 0.0 {
        // Assign the leftover to the agent with the most slack.
        let i = (0..n)
            .max_by(|&a, &b| {
                let sa = if residual > 0.0 { x - shares[a] } else { shares[a] };
                let sb = if residual > 0.0 { x - shares[b] } else { shares[b] };
                sa.total_cmp(&sb)
            })
            .unwrap();
        shares[i] = (shares[i] + residual).clamp(0.0, x);
    }
    Ok(shares)
}

/// Marginal-equalizing solver for strictly risk-averse agents: for each
/// distinct value of the total payoff, shares are the water-filled split.
/// The shares increase with the total, so the allocation is comonotonic.
pub fn ra_lambda_optimal(
    lambda: &[f64],
    agents: &[Agent],
    x: &RandomVariable,
) -> Result<(Allocation, f64)> {
    require_eu(agents, "the concave-group solver")?;
    if let Some(bad) = agents.iter().position(|a| a.attitude != RiskAttitude::RiskAverse) {
        return Err(Error::Precondition(format!(
            "agent {bad} is not risk averse; use the mixed-group solver"
        )));
    }
    let n = agents.len();
    let mut components = vec![vec![0.0; x.len()]; n];
    let mut cache: Vec<(f64, Vec<f64>)> = Vec::new();
    for (s, &xs) in x.values.iter().enumerate() {
        let xs = xs.max(0.0);
        let cached = cache.iter().find(|(v, _)| (v - xs).abs() <= tol::MERGE).cloned();
        let shares = match cached {
            Some((_, sh)) => sh,
            None => {
                let sh = water_fill(lambda, agents, xs)?;
                cache.push((xs, sh.clone()));
                sh
            }
        };
        let sum: f64 = shares.iter().sum();
        for i in 0..n {
            components[i][s] = shares[i];
        }
        // Absorb bisection rounding into the largest share.
        if n > 0 {
            let imax = (0..n).max_by(|&a, &b| shares[a].total_cmp(&shares[b])).unwrap();
            components[imax][s] += x.values[s] - sum;
        }
    }
    let alloc = Allocation::new(Arc::clone(&x.space), components, x)?;
    let mut value = 0.0;
    for (i, a) in agents.iter().enumerate() {
        value += lambda[i] * expected_utility(a, &alloc.components[i], x.space.probs())?;
    }
    Ok((alloc, value))
}

fn group_value_seeking(lambda: &[f64], idx: &[usize], agents: &[Agent], y: f64) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for &i in idx {
        best = best.max(lambda[i] * agents[i].utility.eval(y)?);
    }
    Ok(best)
}

fn group_value_averse(lambda: &[f64], idx: &[usize], agents: &[Agent], z: f64) -> Result<f64> {
    let sub_lambda: Vec<f64> = idx.iter().map(|&i| lambda[i]).collect();
    let sub_agents: Vec<Agent> = idx.iter().map(|&i| agents[i].clone()).collect();
    let shares = water_fill(&sub_lambda, &sub_agents, z)?;
    let mut v = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        v += lambda[i] * agents[i].utility.eval(shares[k])?;
    }
    Ok(v)
}

/// Outcome of the mixed-group solver.
#[derive(Debug, Clone, Serialize)]
pub struct MixedOptimum {
    pub allocation: Allocation,
    pub value: f64,
    /// `(total value x, amount routed to the risk-seeking group)` per
    /// distinct value of the total payoff, sorted by x.
    pub split: Vec<(f64, f64)>,
}

/// Two-group solver: for each distinct total value `x`, maximizes
/// `W_S(y) + W_T(x - y)` over `y in [0, x]` on a dense grid with
/// golden-section refinement around the best cell, then routes the seeking
/// share to its best single winner and water-fills the rest. The objective
/// is a convex plus a concave part, so the grid stage guards against the
/// non-unimodal cases and the exact endpoints are always candidates.
pub fn mixed_lambda_optimal(
    lambda: &[f64],
    seeking: &[usize],
    averse: &[usize],
    agents: &[Agent],
    x: &RandomVariable,
    outer_grid: usize,
    refine_iters: usize,
) -> Result<MixedOptimum> {
    require_eu(agents, "the mixed-group solver")?;
    if seeking.is_empty() || averse.is_empty() {
        return Err(Error::Precondition(
            "mixed solver needs both groups nonempty; use the pure-group solver".into(),
        ));
    }
    for &i in seeking {
        if agents[i].attitude != RiskAttitude::RiskSeeking {
            return Err(Error::Precondition(format!(
                "agent {i} routed to the seeking group is not risk seeking"
            )));
        }
    }
    for &i in averse {
        if agents[i].attitude != RiskAttitude::RiskAverse {
            return Err(Error::Precondition(format!(
                "agent {i} routed to the averse group is not risk averse"
            )));
        }
    }
    let grid = outer_grid.max(8);
    let objective = |xval: f64, y: f64| -> Result<f64> {
        Ok(group_value_seeking(lambda, seeking, agents, y)?
            + group_value_averse(lambda, averse, agents, xval - y)?)
    };
    let mut split_cache: Vec<(f64, f64)> = Vec::new();
    let n = agents.len();
    let mut components = vec![vec![0.0; x.len()]; n];
    let mut value = 0.0;
    for (s, (&xs_raw, &p)) in x.values.iter().zip(x.space.probs()).enumerate() {
        let xs = xs_raw.max(0.0);
        let y = match split_cache.iter().find(|(v, _)| (v - xs).abs() <= tol::MERGE) {
            Some((_, y)) => *y,
            None => {
                let y = if xs <= 0.0 {
                    0.0
                } else {
                    let mut best_k = 0usize;
                    let mut best_v = f64::NEG_INFINITY;
                    for k in 0..=grid {
                        let yk = xs * k as f64 / grid as f64;
                        let v = objective(xs, yk)?;
                        if v > best_v {
                            best_v = v;
                            best_k = k;
                        }
                    }
                    let lo = xs * best_k.saturating_sub(1) as f64 / grid as f64;
                    let hi = xs * (best_k + 1).min(grid) as f64 / grid as f64;
                    let refined = golden_section_max(|y| objective(xs, y), lo, hi, refine_iters)?;
                    // The exact endpoints stay in contention so bang-bang
                    // optima come out exactly 0 or x.
                    let mut cands = vec![refined, 0.0, xs];
                    cands.sort_by(f64::total_cmp);
                    let mut best_y = refined;
                    let mut best = f64::NEG_INFINITY;
                    for c in cands {
                        let v = objective(xs, c)?;
                        if v > best {
                            best = v;
                            best_y = c;
                        }
                    }
                    best_y
                };
                split_cache.push((xs, y));
                y
            }
        };
        // Winner inside the seeking group.
        let mut winner = seeking[0];
        let mut wv = f64::NEG_INFINITY;
        for &i in seeking {
            let v = lambda[i] * agents[i].utility.eval(y)?;
            if v > wv {
                wv = v;
                winner = i;
            }
        }
        components[winner][s] = y;
        let sub_lambda: Vec<f64> = averse.iter().map(|&i| lambda[i]).collect();
        let sub_agents: Vec<Agent> = averse.iter().map(|&i| agents[i].clone()).collect();
        let shares = water_fill(&sub_lambda, &sub_agents, xs - y)?;
        for (k, &i) in averse.iter().enumerate() {
            components[i][s] = shares[k];
        }
        // Absorb rounding so the atom sums exactly to the total.
        let sum: f64 = components.iter().map(|c| c[s]).sum();
        components[winner][s] += xs_raw - sum;
        let mut averse_value = 0.0;
        for (k, &i) in averse.iter().enumerate() {
            averse_value += lambda[i] * agents[i].utility.eval(shares[k].max(0.0))?;
        }
        value += p * (wv + averse_value);
    }
    let allocation = Allocation::new(Arc::clone(&x.space), components, x)?;
    split_cache.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(MixedOptimum { allocation, value, split: split_cache })
}

fn golden_section_max(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    iters: usize,
) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    if hi <= lo {
        return Ok(lo);
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Verdict of the Pareto certificate for jackpot allocations of risk seekers.
#[derive(Debug, Clone, Serialize)]
pub struct ParetoVerdict {
    pub optimal: bool,
    /// Feasible weight vector certifying optimality.
    pub witness_lambda: Option<Vec<f64>>,
    pub violation: Option<ParetoViolation>,
}

#[derive(Debug, Clone, Serialize)]
pub enum ParetoViolation {
    NotJackpot(DependenceVerdict),
    /// Agents forming an infeasible cycle in the weight constraints.
    InfeasibleCycle(Vec<usize>),
}

/// Decides Pareto optimality of an allocation among strictly risk-seeking
/// expected-utility agents: it must be a jackpot allocation, and some weight
/// vector must make each owner's weighted utility pointwise maximal on their
/// atoms. The weight search is a difference-constraint system in log space,
/// solved by shortest paths with negative-cycle detection.
pub fn pareto_check_rs(alloc: &Allocation, agents: &[Agent]) -> Result<ParetoVerdict> {
    require_eu(agents, "the Pareto certificate")?;
    let dep = check_dependence(alloc, DependenceMode::Jackpot);
    if !dep.holds {
        return Ok(ParetoVerdict {
            optimal: false,
            witness_lambda: None,
            violation: Some(ParetoViolation::NotJackpot(dep)),
        });
    }
    let n = agents.len();
    let total = alloc.total();
    let scale = 1.0 + total.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // For every atom owned by i with positive payoff and every other agent j:
    // log l_i - log l_j >= log u_j(x) - log u_i(x). Keep the tightest bound
    // per ordered pair.
    let mut need = vec![vec![f64::NEG_INFINITY; n]; n];
    for (s, &xs) in total.values.iter().enumerate() {
        if xs <= tol::NONNEG * scale {
            continue;
        }
        let owner = match alloc.components.iter().position(|c| c[s] > tol::NONNEG * scale) {
            Some(i) => i,
            None => continue,
        };
        let u_owner = agents[owner].utility.eval(xs)?;
        if u_owner <= 0.0 {
            // Zero utility at positive payoff: excluded under the
            // zero-utility normalization.
            continue;
        }
        for (j, aj) in agents.iter().enumerate() {
            if j == owner {
                continue;
            }
            let uj = aj.utility.eval(xs)?;
            if uj <= 0.0 {
                continue;
            }
            let c = uj.ln() - u_owner.ln();
            if c > need[owner][j] {
                need[owner][j] = c;
            }
        }
    }
    // l_i - l_j >= c becomes the shortest-path edge i -> j of weight -c
    // (slackened): feasible potentials exist unless a negative cycle does.
    let mut dist = vec![0.0f64; n];
    let mut pred = vec![usize::MAX; n];
    let mut changed_node = None;
    for round in 0..n {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if need[i][j] == f64::NEG_INFINITY {
                    continue;
                }
                let w = -need[i][j] + tol::LAMBDA_FEAS;
                if dist[i] + w < dist[j] - 1e-15 {
                    dist[j] = dist[i] + w;
                    pred[j] = i;
                    changed = true;
                    if round == n - 1 {
                        changed_node = Some(j);
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    if let Some(start) = changed_node {
        let mut node = start;
        for _ in 0..n {
            node = pred[node];
        }
        let mut cycle = vec![node];
        let mut cur = pred[node];
        while cur != node && cycle.len() <= n {
            cycle.push(cur);
            cur = pred[cur];
        }
        cycle.reverse();
        return Ok(ParetoVerdict {
            optimal: false,
            witness_lambda: None,
            violation: Some(ParetoViolation::InfeasibleCycle(cycle)),
        });
    }
    // Potentials are log-weights; exponentiate and normalize onto the simplex.
    let max_d = dist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lambda: Vec<f64> = dist.iter().map(|&d| (d - max_d).exp()).collect();
    let sum: f64 = lambda.iter().sum();
    for l in &mut lambda {
        *l /= sum;
    }
    Ok(ParetoVerdict { optimal: true, witness_lambda: Some(lambda), violation: None })
}

/// One frontier point per weight vector, solved with the solver matching the
/// agents' attitude tags.
pub fn upf_trace(
    agents: &[Agent],
    x: &RandomVariable,
    lambda_grid: &[Vec<f64>],
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let seeking: Vec<usize> = agents
        .iter()
        .enumerate()
        .filter(|(_, a)| a.attitude == RiskAttitude::RiskSeeking)
        .map(|(i, _)| i)
        .collect();
    let averse: Vec<usize> = agents
        .iter()
        .enumerate()
        .filter(|(_, a)| a.attitude == RiskAttitude::RiskAverse)
        .map(|(i, _)| i)
        .collect();
    let mut out = Vec::with_capacity(lambda_grid.len());
    for lambda in lambda_grid {
        let alloc = if averse.is_empty() {
            rs_lambda_optimal(lambda, agents, x)?.0
        } else if seeking.is_empty() {
            ra_lambda_optimal(lambda, agents, x)?.0
        } else {
            mixed_lambda_optimal(lambda, &seeking, &averse, agents, x, 2048, 60)?.allocation
        };
        let mut utilities = Vec::with_capacity(agents.len());
        for (i, a) in agents.iter().enumerate() {
            utilities.push(expected_utility(a, &alloc.components[i], x.space.probs())?);
        }
        out.push((lambda.clone(), utilities));
    }
    Ok(out)
}

/// Keeps the frontier points that weakly dominate the endowment utilities:
/// the individually rational slice of the frontier.
pub fn individually_rational_filter(
    trace: &[(Vec<f64>, Vec<f64>)],
    endowment_utilities: &[f64],
) -> Vec<(Vec<f64>, Vec<f64>)> {
    trace
        .iter()
        .filter(|(_, utils)| {
            utils.iter().zip(endowment_utilities).all(|(u, e)| *u >= e - 1e-9)
        })
        .cloned()
        .collect()
}

/// Locates the total-payoff value at which the mixed-group optimal split
/// switches from all-to-averse to all-to-seeking, by bisection on the
/// routed fraction. Returns the switch point when the split is bang-bang on
/// the probed range, `None` otherwise.
pub fn mixed_split_threshold(
    lambda: &[f64],
    seeking: &[usize],
    averse: &[usize],
    agents: &[Agent],
    x_lo: f64,
    x_hi: f64,
) -> Result<Option<f64>> {
    let frac = |xval: f64| -> Result<f64> {
        let sp = FiniteProbSpace::new(vec![1.0])?;
        let xv = RandomVariable::new(sp, vec![xval])?;
        let res = mixed_lambda_optimal(lambda, seeking, averse, agents, &xv, 4096, 80)?;
        Ok(res.split[0].1 / xval.max(1e-300))
    };
    let (mut lo, mut hi) = (x_lo.max(1e-9), x_hi);
    if !(frac(lo)? < 0.5 && frac(hi)? > 0.5) {
        return Ok(None);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if frac(mid)? > 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}
