//! Agents: a utility function plus a probability weighting function, with the
//! Choquet-integral preference functional and its expected-utility special
//! case under identity weighting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::RandomVariable;
use crate::tol;
use crate::utility::{Curvature, UtilityFunction};
use crate::weighting::WeightingFunction;

/// Declared risk attitude of an agent, audited against the component tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskAttitude {
    RiskSeeking,
    RiskAverse,
    /// Neither globally seeking nor globally averse (the weighted case).
    Other,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Agent {
    pub utility: UtilityFunction,
    /// Identity weighting makes this an expected-utility agent.
    pub weighting: WeightingFunction,
    pub attitude: RiskAttitude,
    /// Curvature tag of the utility function, audited on validation.
    pub curvature: Curvature,
}

impl Agent {
    pub fn eu(utility: UtilityFunction, curvature: Curvature) -> Self {
        let attitude = match curvature {
            Curvature::StrictlyConvex | Curvature::RatioIncreasing => RiskAttitude::RiskSeeking,
            Curvature::StrictlyConcave => RiskAttitude::RiskAverse,
            Curvature::None => RiskAttitude::Other,
        };
        Self { utility, weighting: WeightingFunction::Identity, attitude, curvature }
    }

    pub fn rdu(utility: UtilityFunction, weighting: WeightingFunction) -> Self {
        Self { utility, weighting, attitude: RiskAttitude::Other, curvature: Curvature::None }
    }

    pub fn is_eu(&self) -> bool {
        matches!(self.weighting, WeightingFunction::Identity)
    }

    /// Audits the component functions and the consistency of the declared
    /// attitude with the curvature tag.
    pub fn validate(&self, working_max: f64) -> Result<()> {
        self.utility.validate(self.curvature, working_max)?;
        self.weighting.validate()?;
        if self.is_eu() {
            let consistent = match self.attitude {
                RiskAttitude::RiskSeeking => matches!(
                    self.curvature,
                    Curvature::StrictlyConvex | Curvature::RatioIncreasing
                ),
                RiskAttitude::RiskAverse => self.curvature == Curvature::StrictlyConcave,
                RiskAttitude::Other => true,
            };
            if !consistent {
                return Err(Error::Validation(format!(
                    "attitude {:?} inconsistent with curvature {:?} under expected utility",
                    self.attitude, self.curvature
                )));
            }
        }
        Ok(())
    }
}

/// Choquet integral of a nonnegative variable under a weighting function:
/// the layer-cake sum over distinct values `y_1 > ... > y_r >= 0`,
/// `sum_k (y_k - y_{k+1}) w(P(Y >= y_k))`. Values closer than the merge
/// tolerance form one layer.
pub fn choquet(y: &RandomVariable, w: &WeightingFunction) -> Result<f64> {
    if let Some(&bad) = y.values.iter().find(|v| **v < -tol::NONNEG) {
        return Err(Error::Domain(format!(
            "Choquet integral requires nonnegative values, found {bad}"
        )));
    }
    choquet_from_distribution(&y.map(|v| v.max(0.0)).distribution(), w)
}

/// Layer-cake sum over an explicit `(value, probability)` support. The
/// support need not be sorted or merged.
pub fn choquet_from_distribution(dist: &[(f64, f64)], w: &WeightingFunction) -> Result<f64> {
    if let Some(&(bad, _)) = dist.iter().find(|(v, _)| *v < -tol::NONNEG) {
        return Err(Error::Domain(format!(
            "Choquet integral requires nonnegative values, found {bad}"
        )));
    }
    let mut pairs: Vec<(f64, f64)> = dist
        .iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|&(v, p)| (v.max(0.0), p))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (v, p) in pairs {
        match merged.last_mut() {
            Some((mv, mp)) if (v - *mv).abs() <= tol::MERGE => *mp += p,
            _ => merged.push((v, p)),
        }
    }
    let mut total = 0.0;
    let mut survival: f64 = 0.0; // P(Y >= current layer value), built from the top
    let mut prev_value: Option<f64> = None;
    for &(v, p) in merged.iter().rev() {
        if let Some(upper) = prev_value {
            total += (upper - v) * w.eval(survival.min(1.0));
        }
        survival += p;
        prev_value = Some(v);
    }
    if let Some(lowest) = prev_value {
        if lowest > 0.0 {
            total += lowest * w.eval(survival.min(1.0));
        }
    }
    Ok(total)
}

/// Rank-dependent utility `rho_w(u(Y))`; plain expected utility under
/// identity weighting.
pub fn rdu_utility(agent: &Agent, y: &RandomVariable) -> Result<f64> {
    let mut uy = Vec::with_capacity(y.len());
    for &v in &y.values {
        if v < -tol::NONNEG {
            return Err(Error::Domain(format!(
                "rank-dependent utility is defined on gains, found payoff {v}"
            )));
        }
        uy.push(agent.utility.eval(v.max(0.0))?);
    }
    let transformed = RandomVariable::new(y.space.clone(), uy)?;
    choquet(&transformed, &agent.weighting)
}

/// Report of the large-payoff conditions: the small-probability ratio bound
/// on `w`, the value `w(1/n)`, and the limit of `u(x/n)/u(x)`.
#[derive(Debug, Clone, Serialize)]
pub struct TechConReport {
    pub sup_ratio_estimate: f64,
    pub w_at_1_over_n: f64,
    pub utility_ratio_limit_estimate: f64,
    pub satisfied: bool,
}

/// Estimates the three large-payoff conditions. The `w` ratio is a maximum
/// over the supplied small-`t` grid (a logarithmic grid over `[1e-8, 1]` by
/// default); the utility ratio limit uses the family's closed form, checked
/// against the largest grid point, since log-family convergence outruns the
/// float range.
pub fn check_tech_con(
    w: &WeightingFunction,
    u: &UtilityFunction,
    n: usize,
    small_t_grid: &[f64],
    large_x_grid: &[f64],
) -> Result<TechConReport> {
    if n < 2 {
        return Err(Error::Precondition(format!("need at least two agents, got {n}")));
    }
    if small_t_grid.is_empty() || large_x_grid.is_empty() {
        return Err(Error::Precondition("grids must be nonempty".into()));
    }
    let nf = n as f64;
    let mut sup_ratio = f64::NEG_INFINITY;
    for &t in small_t_grid {
        let denom = w.eval(t);
        if denom > 0.0 {
            sup_ratio = sup_ratio.max(w.eval(t / nf) / denom);
        }
    }
    for &x in large_x_grid {
        if x > 0.0 && u.eval(x)? == 0.0 {
            return Err(Error::Domain(format!("u({x}) = 0 on the audit grid")));
        }
    }
    let x_end = large_x_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let grid_end_ratio = u.eval(x_end / nf)? / u.eval(x_end)?;
    let limit = u.large_x_ratio_limit(n);
    // The grid can only approach the limit from below for concave u; take
    // the better-informed of the two.
    let utility_ratio_limit_estimate = if limit.is_finite() { limit } else { grid_end_ratio };
    let w_at_1_over_n = w.eval(1.0 / nf);
    let satisfied = sup_ratio < 1.0 - 1e-6
        && w_at_1_over_n < 1.0 - 1e-9
        && utility_ratio_limit_estimate >= 1.0 - 1e-3;
    Ok(TechConReport {
        sup_ratio_estimate: sup_ratio,
        w_at_1_over_n,
        utility_ratio_limit_estimate,
        satisfied,
    })
}

/// Logarithmic grid over `[1e-8, 1]`, the default small-probability audit grid.
pub fn default_small_t_grid() -> Vec<f64> {
    let points = 512;
    (0..=points)
        .map(|k| 10f64.powf(-8.0 + 8.0 * k as f64 / points as f64))
        .collect()
}

/// Geometric grid spanning `[1, 1e8]`, the default large-payoff audit grid.
pub fn default_large_x_grid() -> Vec<f64> {
    let points = 512;
    (0..=points)
        .map(|k| 10f64.powf(8.0 * k as f64 / points as f64))
        .collect()
}
