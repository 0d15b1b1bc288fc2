//! Convex order decided through the stop-loss transform.
//!
//! Both stop-loss functions are piecewise linear with kinks only at atom
//! values, so comparing them at every atom value of either variable is a
//! complete test once the means agree.

use serde::Serialize;

use crate::space::{expectation, RandomVariable};
use crate::tol;

/// Outcome of an order comparison, with a witness where it fails or where
/// strictness is decided.
#[derive(Debug, Clone, Serialize)]
pub struct OrderVerdict {
    pub holds: bool,
    pub strict: bool,
    /// `(threshold, stop-loss gap)` at a failing threshold, or at the mean
    /// comparison when the means differ.
    pub witness: Option<(f64, f64)>,
}

/// `E[(X - t)+]`.
pub fn stop_loss(x: &RandomVariable, t: f64) -> f64 {
    x.values
        .iter()
        .zip(x.space.probs())
        .map(|(&v, &p)| p * (v - t).max(0.0))
        .sum()
}

/// Decides whether `x` precedes `y` in convex order: equal means and a
/// stop-loss transform nowhere larger. Strictness means the two
/// distributions differ after merging nearby support points.
pub fn convex_order_leq(x: &RandomVariable, y: &RandomVariable) -> OrderVerdict {
    let ex = expectation(x, None).expect("physical expectation cannot fail");
    let ey = expectation(y, None).expect("physical expectation cannot fail");
    let scale = 1.0 + x.max().abs().max(y.max().abs()).max(x.min().abs()).max(y.min().abs());
    if (ex - ey).abs() > tol::MEAN_EQ * scale {
        // Below the joint minimum the stop-loss gap equals the mean gap.
        let t = x.min().min(y.min()) - 1.0;
        return OrderVerdict { holds: false, strict: false, witness: Some((t, ex - ey)) };
    }
    let mut thresholds: Vec<f64> = x.values.iter().chain(y.values.iter()).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    for &t in &thresholds {
        let gap = stop_loss(x, t) - stop_loss(y, t);
        if gap > tol::STOP_LOSS * scale {
            return OrderVerdict { holds: false, strict: false, witness: Some((t, gap)) };
        }
    }
    let strict = !same_distribution(x, y);
    OrderVerdict { holds: true, strict, witness: None }
}

/// Distribution equality after merging support points within [`tol::MERGE`].
pub fn same_distribution(x: &RandomVariable, y: &RandomVariable) -> bool {
    let dx = x.distribution();
    let dy = y.distribution();
    dx.len() == dy.len()
        && dx
            .iter()
            .zip(&dy)
            .all(|((vx, px), (vy, py))| (vx - vy).abs() <= tol::MERGE && (px - py).abs() <= tol::MERGE)
}
