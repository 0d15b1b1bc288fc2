//! Brute-force verifiers, independent of the engine's solver paths. They
//! exist for correctness at desk scale, not speed, and refuse work beyond a
//! fixed combinatorial budget.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agent::{rdu_utility, Agent};
use crate::error::{Error, Result};
use crate::space::{Allocation, FiniteProbSpace, RandomVariable};

const COMBINATION_BUDGET: f64 = 1e7;

/// Outcome of a brute-force search.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub method: String,
    /// Grid spacing or enumeration granularity of the search.
    pub resolution: f64,
    pub best_value: f64,
    /// Best allocation found, agent-major, when one applies.
    pub witness: Option<Vec<Vec<f64>>>,
    /// `engine_value - best_value`, when an engine value was supplied.
    pub engine_gap: Option<f64>,
}

/// Exhaustive grid search for the maximal weighted expected utility over
/// allocations. The expected-utility objective separates across atoms, so
/// each atom's split is searched independently on a uniform grid of
/// `[0, X_s]` with the last agent taking the remainder; the combination
/// count is `atoms * grid^(agents-1)`.
pub fn brute_force_weighted_max(
    lambda: &[f64],
    agents: &[Agent],
    x: &RandomVariable,
    per_atom_grid: usize,
    engine_value: Option<f64>,
) -> Result<OracleReport> {
    let n = agents.len();
    let m = x.len();
    if n == 0 || per_atom_grid < 2 {
        return Err(Error::Validation("need agents and a grid of at least 2 points".into()));
    }
    let combos = m as f64 * (per_atom_grid as f64).powi(n as i32 - 1);
    if combos > COMBINATION_BUDGET {
        return Err(Error::BudgetExceeded(format!(
            "{m} atoms x {per_atom_grid}^{} splits = {combos:.3e} combinations",
            n - 1
        )));
    }
    let mut best_alloc = vec![vec![0.0; m]; n];
    let mut best_value = 0.0;
    let mut resolution = 0.0f64;
    for s in 0..m {
        let xs = x.values[s].max(0.0);
        let p = x.space.prob(s);
        resolution = resolution.max(xs / (per_atom_grid - 1) as f64);
        let mut split = vec![0usize; n - 1];
        let mut best_split = vec![0.0; n];
        let mut best_here = f64::NEG_INFINITY;
        loop {
            let mut shares = Vec::with_capacity(n);
            let mut used = 0.0;
            let mut feasible = true;
            for &k in &split {
                let y = xs * k as f64 / (per_atom_grid - 1) as f64;
                if used + y > xs + 1e-12 {
                    feasible = false;
                    break;
                }
                shares.push(y);
                used += y;
            }
            if feasible {
                shares.push((xs - used).max(0.0));
                let mut v = 0.0;
                for (i, a) in agents.iter().enumerate() {
                    v += lambda[i] * a.utility.eval(shares[i])?;
                }
                if v > best_here {
                    best_here = v;
                    best_split = shares;
                }
            }
            // Advance the multi-index.
            let mut done = true;
            for d in split.iter_mut() {
                *d += 1;
                if *d < per_atom_grid {
                    done = false;
                    break;
                }
                *d = 0;
            }
            if done {
                break;
            }
        }
        for i in 0..n {
            best_alloc[i][s] = best_split[i];
        }
        best_value += p * best_here;
    }
    Ok(OracleReport {
        method: "weighted_max_grid".into(),
        resolution,
        best_value,
        witness: Some(best_alloc),
        engine_gap: engine_value.map(|e| e - best_value),
    })
}

/// Searches grid and random feasible allocations for a strict dominator of
/// the given allocation. Finding none is consistency at the stated
/// resolution, never a proof; finding one is a disproof witness.
pub fn brute_force_pareto_probe(
    alloc: &Allocation,
    agents: &[Agent],
    per_atom_grid: usize,
    samples: usize,
    seed: u64,
) -> Result<OracleReport> {
    let n = agents.len();
    let m = alloc.space.len();
    let combos = (per_atom_grid as f64).powi((m * (n - 1)) as i32);
    if combos > COMBINATION_BUDGET {
        return Err(Error::BudgetExceeded(format!(
            "{per_atom_grid}^{} = {combos:.3e} joint grid combinations",
            m * (n - 1)
        )));
    }
    let x = alloc.total();
    let base: Vec<f64> = {
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            v.push(utility_of(&agents[i], &alloc.components[i], &x)?);
        }
        v
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let check = |cand: &[Vec<f64>]| -> Result<Option<Vec<Vec<f64>>>> {
        let mut strict = false;
        for i in 0..n {
            let u = utility_of(&agents[i], &cand[i], &x)?;
            if u < base[i] - 1e-12 {
                return Ok(None);
            }
            if u > base[i] + 1e-9 {
                strict = true;
            }
        }
        Ok(if strict { Some(cand.to_vec()) } else { None })
    };

    // Joint grid enumeration.
    let dims = m * (n - 1);
    let mut index = vec![0usize; dims];
    let mut cand = vec![vec![0.0; m]; n];
    'outer: loop {
        let mut feasible = true;
        for s in 0..m {
            let xs = x.values[s].max(0.0);
            let mut used = 0.0;
            for i in 0..(n - 1) {
                let y = xs * index[s * (n - 1) + i] as f64 / (per_atom_grid - 1) as f64;
                cand[i][s] = y;
                used += y;
            }
            if used > xs + 1e-12 {
                feasible = false;
            } else {
                cand[n - 1][s] = xs - used;
            }
        }
        if feasible {
            if let Some(w) = check(&cand)? {
                return Ok(OracleReport {
                    method: "pareto_probe".into(),
                    resolution: 1.0 / (per_atom_grid - 1) as f64,
                    best_value: 1.0,
                    witness: Some(w),
                    engine_gap: None,
                });
            }
        }
        let mut done = true;
        for d in index.iter_mut() {
            *d += 1;
            if *d < per_atom_grid {
                done = false;
                break;
            }
            *d = 0;
        }
        if done {
            break 'outer;
        }
    }

    // Random feasible allocations: per atom, a uniform simplex split.
    for _ in 0..samples {
        for s in 0..m {
            let xs = x.values[s].max(0.0);
            let mut knots: Vec<f64> = (0..n - 1).map(|_| rng.gen::<f64>()).collect();
            knots.push(0.0);
            knots.push(1.0);
            knots.sort_by(f64::total_cmp);
            for i in 0..n {
                cand[i][s] = xs * (knots[i + 1] - knots[i]);
            }
        }
        if let Some(w) = check(&cand)? {
            return Ok(OracleReport {
                method: "pareto_probe".into(),
                resolution: 1.0 / (per_atom_grid - 1) as f64,
                best_value: 1.0,
                witness: Some(w),
                engine_gap: None,
            });
        }
    }
    Ok(OracleReport {
        method: "pareto_probe".into(),
        resolution: 1.0 / (per_atom_grid - 1) as f64,
        best_value: 0.0,
        witness: None,
        engine_gap: None,
    })
}

fn utility_of(agent: &Agent, values: &[f64], x: &RandomVariable) -> Result<f64> {
    let rv = RandomVariable::new(x.space.clone(), values.iter().map(|&v| v.max(0.0)).collect())?;
    rdu_utility(agent, &rv)
}

/// Enumerates every owner map of the atoms among `n` agents, evaluating each
/// agent's preference value of their winner-take-all payoff, and returns the
/// maximal sum with its partition.
pub fn enumerate_jackpot_partitions(
    space: &std::sync::Arc<FiniteProbSpace>,
    n: usize,
    agents: &[Agent],
    x: &RandomVariable,
) -> Result<OracleReport> {
    let m = space.len();
    let combos = (n as f64).powi(m as i32);
    if combos > COMBINATION_BUDGET {
        return Err(Error::BudgetExceeded(format!(
            "{n}^{m} = {combos:.3e} owner maps"
        )));
    }
    let mut owner = vec![0usize; m];
    let mut best_sum = f64::NEG_INFINITY;
    let mut best_owner = owner.clone();
    loop {
        let mut sum = 0.0;
        for (i, agent) in agents.iter().enumerate() {
            let values: Vec<f64> = x
                .values
                .iter()
                .zip(&owner)
                .map(|(&v, &o)| if o == i { v.max(0.0) } else { 0.0 })
                .collect();
            let rv = RandomVariable::new(std::sync::Arc::clone(space), values)?;
            sum += rdu_utility(agent, &rv)?;
        }
        if sum > best_sum {
            best_sum = sum;
            best_owner.copy_from_slice(&owner);
        }
        let mut done = true;
        for d in owner.iter_mut() {
            *d += 1;
            if *d < n {
                done = false;
                break;
            }
            *d = 0;
        }
        if done {
            break;
        }
    }
    let witness: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            x.values
                .iter()
                .zip(&best_owner)
                .map(|(&v, &o)| if o == i { v } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(OracleReport {
        method: "jackpot_enumeration".into(),
        resolution: 0.0,
        best_value: best_sum,
        witness: Some(witness),
        engine_gap: None,
    })
}

/// Exact optimum of a convex agent's individual problem
/// `max E[u(Y)], 0 <= Y <= X, E^Q[Y] <= budget` by enumerating the extreme
/// solutions: the payoff is the full total on a set of atoms plus a
/// probability fraction of one budget-binding boundary atom.
pub fn vertex_individual_opt(
    agent: &Agent,
    x: &RandomVariable,
    density: &RandomVariable,
    budget: f64,
) -> Result<OracleReport> {
    let m = x.len();
    if m > 18 {
        return Err(Error::BudgetExceeded(format!(
            "{m} atoms exceed the 18-atom vertex enumeration cap"
        )));
    }
    if !x.space.same_as(&density.space) {
        return Err(Error::SpaceMismatch("payoff and price on different spaces".into()));
    }
    let probs = x.space.probs();
    let cost: Vec<f64> = (0..m)
        .map(|s| probs[s] * density.values[s] * x.values[s].max(0.0))
        .collect();
    let util: Vec<f64> = {
        let mut v = Vec::with_capacity(m);
        for s in 0..m {
            v.push(probs[s] * agent.utility.eval(x.values[s].max(0.0))?);
        }
        v
    };
    let mut best = f64::NEG_INFINITY;
    let mut best_y: Vec<f64> = vec![0.0; m];
    for mask in 0u32..(1u32 << m) {
        let mut c = 0.0;
        let mut u = 0.0;
        for s in 0..m {
            if mask >> s & 1 == 1 {
                c += cost[s];
                u += util[s];
            }
        }
        if c > budget + 1e-12 {
            continue;
        }
        if u > best {
            best = u;
            best_y = (0..m)
                .map(|s| if mask >> s & 1 == 1 { x.values[s] } else { 0.0 })
                .collect();
        }
        // One probability-fractional atom exhausting the budget: the agent
        // takes the full payoff on a sub-event of that atom.
        let slack = budget - c;
        for t in 0..m {
            if mask >> t & 1 == 1 || cost[t] <= 0.0 {
                continue;
            }
            let f = (slack / cost[t]).min(1.0);
            if f <= 0.0 {
                continue;
            }
            let v = u + f * util[t];
            if v > best {
                best = v;
                let mut y: Vec<f64> = (0..m)
                    .map(|s| if mask >> s & 1 == 1 { x.values[s] } else { 0.0 })
                    .collect();
                // Marked by the fractional probability share on atom t.
                y[t] = f * x.values[t];
                best_y = y;
            }
        }
    }
    Ok(OracleReport {
        method: "vertex_enumeration".into(),
        resolution: 0.0,
        best_value: best,
        witness: Some(vec![best_y]),
        engine_gap: None,
    })
}
