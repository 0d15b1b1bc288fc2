//! The counter-monotonic improvement construction: cumulative-share cuts of
//! each atom turn any nonnegative allocation into a jackpot allocation whose
//! components dominate the originals in convex order, with the conditional
//! mean given the base space preserved exactly.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::{
    extend_with_uniform_cuts, Allocation, FiniteProbSpace, PartitionVector,
};
use crate::tol;

/// Result of an improvement: the extended space, the jackpot allocation on
/// it, and the cut points used per base atom.
#[derive(Debug, Clone, Serialize)]
pub struct ImprovementResult {
    pub space: Arc<FiniteProbSpace>,
    pub jackpot: Allocation,
    pub partition: PartitionVector,
    /// Cumulative-share cut list per base atom.
    pub cuts: Vec<Vec<f64>>,
}

/// Improves a nonnegative allocation to a jackpot allocation of the same
/// total. Each base atom is split at the cumulative shares of the agents;
/// the winner of interval `i` is agent `i`. Atoms where the total vanishes
/// collapse to a single child owned by agent 0.
pub fn counter_monotonic_improve(alloc: &Allocation) -> Result<ImprovementResult> {
    let n = alloc.n_agents();
    let m = alloc.space.len();
    let scale = 1.0
        + alloc
            .components
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
    for c in &alloc.components {
        if let Some(&bad) = c.iter().find(|v| **v < -tol::NONNEG * scale) {
            return Err(Error::Domain(format!(
                "improvement requires components bounded below by 0, found {bad}; \
                 shift bounded allocations first"
            )));
        }
    }
    let total = alloc.total();
    let mut cuts = Vec::with_capacity(m);
    for s in 0..m {
        let x = total.values[s];
        let mut list = Vec::with_capacity(n + 1);
        list.push(0.0);
        if x > tol::NONNEG * scale {
            let mut acc = 0.0;
            for i in 0..n {
                acc += alloc.components[i][s].max(0.0) / x;
                list.push(if i + 1 == n { 1.0 } else { acc.min(1.0) });
            }
        } else {
            // Zero total: the share ratios are 0/0 = 0, the whole interval
            // goes to agent 0.
            list.push(1.0);
            list.resize(n + 1, 1.0);
        }
        cuts.push(list);
    }
    let (extended, partition) = extend_with_uniform_cuts(&alloc.space, &cuts)?;
    let lifted_total = total.lift_to(&extended)?;
    let components: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            lifted_total
                .values
                .iter()
                .zip(&partition.owner)
                .map(|(&x, &o)| if o == i { x } else { 0.0 })
                .collect()
        })
        .collect();
    let jackpot = Allocation::new(Arc::clone(&extended), components, &lifted_total)?;
    Ok(ImprovementResult { space: extended, jackpot, partition, cuts })
}

/// Improvement for allocations bounded on one side: shift every component to
/// the nonnegative half-line, improve, and shift back. The output is
/// counter-monotonic and dominates the input componentwise in convex order.
///
/// Nonnegative inputs improve directly; all-nonpositive inputs use the
/// supremum shifts (the loser-lose-all mirror); mixed-sign inputs use the
/// infimum shifts.
pub fn shifted_improve(alloc: &Allocation) -> Result<Allocation> {
    let scale = 1.0
        + alloc
            .components
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let all_nonneg = alloc
        .components
        .iter()
        .all(|c| c.iter().all(|&v| v >= -tol::NONNEG * scale));
    if all_nonneg {
        return Ok(counter_monotonic_improve(alloc)?.jackpot);
    }
    let all_nonpos = alloc
        .components
        .iter()
        .all(|c| c.iter().all(|&v| v <= tol::NONNEG * scale));
    if all_nonpos {
        // Work on the negated allocation and mirror back.
        let negated: Vec<Vec<f64>> = alloc
            .components
            .iter()
            .map(|c| c.iter().map(|&v| -v).collect())
            .collect();
        let neg_alloc = Allocation::from_components(alloc.space.clone(), negated)?;
        let improved = shifted_improve(&neg_alloc)?;
        let back: Vec<Vec<f64>> = improved
            .components
            .iter()
            .map(|c| c.iter().map(|&v| -v).collect())
            .collect();
        return Allocation::from_components(improved.space.clone(), back);
    }
    // Mixed signs: shift by the essential infima.
    let shifts: Vec<f64> = alloc
        .components
        .iter()
        .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min).min(0.0))
        .collect();
    let shifted: Vec<Vec<f64>> = alloc
        .components
        .iter()
        .zip(&shifts)
        .map(|(c, &m)| c.iter().map(|&v| v - m).collect())
        .collect();
    let shifted_alloc = Allocation::from_components(alloc.space.clone(), shifted)?;
    let improved = counter_monotonic_improve(&shifted_alloc)?;
    let back: Vec<Vec<f64>> = improved
        .jackpot
        .components
        .iter()
        .zip(&shifts)
        .map(|(c, &m)| c.iter().map(|&v| v + m).collect())
        .collect();
    Allocation::from_components(improved.space.clone(), back)
}
