//! Probability weighting functions, their upper concave envelopes, and the
//! concave-then-convex shape test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

/// Supported weighting families: increasing with `w(0) = 0`, `w(1) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WeightingFunction {
    Identity,
    /// `t^gamma / (t^gamma + (1-t)^gamma)^(1/gamma)`, the inverse-S family.
    Tk { gamma: f64 },
    /// `t^gamma`.
    Power { gamma: f64 },
    /// Piecewise linear through `(0,0)`, the knots, and `(1,1)`.
    PiecewiseLinear { points: Vec<(f64, f64)> },
    /// Values sampled on a uniform grid over `[0,1]`, linearly interpolated.
    Grid { values: Vec<f64> },
}

impl WeightingFunction {
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match self {
            Self::Identity => t,
            Self::Tk { gamma } => {
                if t == 0.0 {
                    0.0
                } else if t == 1.0 {
                    1.0
                } else {
                    let num = t.powf(*gamma);
                    let den = (t.powf(*gamma) + (1.0 - t).powf(*gamma)).powf(1.0 / gamma);
                    num / den
                }
            }
            Self::Power { gamma } => t.powf(*gamma),
            Self::PiecewiseLinear { points } => {
                let mut prev = (0.0, 0.0);
                for &(px, py) in points.iter().chain(std::iter::once(&(1.0, 1.0))) {
                    if t <= px {
                        let w = px - prev.0;
                        if w <= 0.0 {
                            return py;
                        }
                        return prev.1 + (py - prev.1) * (t - prev.0) / w;
                    }
                    prev = (px, py);
                }
                1.0
            }
            Self::Grid { values } => {
                if values.len() < 2 {
                    return t;
                }
                let m = values.len() - 1;
                let pos = t * m as f64;
                let k = (pos.floor() as usize).min(m - 1);
                let frac = pos - k as f64;
                values[k] * (1.0 - frac) + values[k + 1] * frac
            }
        }
    }

    /// Central-difference derivative for smooth families, secant at kinks.
    pub fn derivative(&self, t: f64) -> f64 {
        let h = 1e-7;
        let lo = (t - h).max(0.0);
        let hi = (t + h).min(1.0);
        (self.eval(hi) - self.eval(lo)) / (hi - lo)
    }

    /// Whether the family is smooth enough for tangency root-finding.
    pub fn is_smooth(&self) -> bool {
        matches!(self, Self::Identity | Self::Tk { .. } | Self::Power { .. })
    }

    /// Audits the weighting-function axioms on a grid.
    pub fn validate(&self) -> Result<()> {
        if self.eval(0.0).abs() > 1e-12 || (self.eval(1.0) - 1.0).abs() > 1e-12 {
            return Err(Error::Validation("weighting must satisfy w(0)=0 and w(1)=1".into()));
        }
        let grid = 1000;
        let mut prev = 0.0;
        for k in 1..=grid {
            let v = self.eval(k as f64 / grid as f64);
            if v < prev - 1e-12 {
                return Err(Error::Validation("weighting must be nondecreasing".into()));
            }
            prev = v;
        }
        Ok(())
    }
}

/// Upper concave envelope of a weighting function: the hull vertices, the
/// coincidence bound, and the slope of the linear tail into `(1, 1)`.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeResult {
    /// Envelope values on the sampling grid (including both endpoints).
    pub grid_values: Vec<f64>,
    /// Hull vertices `(t, value)` for exact interpolation between grid points.
    pub hull: Vec<(f64, f64)>,
    /// Largest probability up to which the envelope coincides with `w`.
    pub beta_w: f64,
    /// Slope of the linear hull piece ending at `(1, 1)`.
    pub tangent_slope: f64,
}

impl EnvelopeResult {
    /// Envelope value by interpolation between hull vertices.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match self.hull.binary_search_by(|&(x, _)| x.total_cmp(&t)) {
            Ok(i) => self.hull[i].1,
            Err(i) => {
                if i == 0 {
                    self.hull[0].1
                } else if i >= self.hull.len() {
                    self.hull[self.hull.len() - 1].1
                } else {
                    let (x0, y0) = self.hull[i - 1];
                    let (x1, y1) = self.hull[i];
                    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
                }
            }
        }
    }
}

/// Computes the upper concave hull of `w` sampled on a uniform grid, the
/// coincidence bound `beta_w`, and the tail slope. For smooth families the
/// bound is refined by root-finding the tangency of the line into `(1, 1)`.
pub fn concave_envelope(w: &WeightingFunction, grid_size: usize) -> Result<EnvelopeResult> {
    if grid_size < 100 {
        return Err(Error::Precondition(format!(
            "envelope grid must have at least 100 points, got {grid_size}"
        )));
    }
    let n = grid_size;
    let ts: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    let ws: Vec<f64> = ts.iter().map(|&t| w.eval(t)).collect();

    // Monotone-chain upper hull: keep only right turns.
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for (&t, &v) in ts.iter().zip(&ws) {
        while hull.len() >= 2 {
            let (x1, y1) = hull[hull.len() - 2];
            let (x2, y2) = hull[hull.len() - 1];
            let cross = (x2 - x1) * (v - y1) - (t - x1) * (y2 - y1);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((t, v));
    }

    let env = EnvelopeResult {
        grid_values: Vec::new(),
        hull,
        beta_w: 0.0,
        tangent_slope: 0.0,
    };
    let grid_values: Vec<f64> = ts.iter().map(|&t| env.eval(t)).collect();

    // beta_w: last grid point of the initial segment on which the hull
    // still touches w.
    let mut beta = 0.0;
    for (k, &t) in ts.iter().enumerate() {
        if grid_values[k] - ws[k] <= tol::ENVELOPE_TOUCH {
            beta = t;
        } else {
            break;
        }
    }

    // Tangency refinement for smooth families: the linear tail is the lowest
    // line from (1,1) touching the graph, so w(b) + w'(b)(1 - b) = 1 at the
    // touch point. Bisect inside a bracket around the grid estimate.
    if w.is_smooth() && beta > 0.0 && beta < 1.0 {
        let g = |b: f64| w.eval(b) + w.derivative(b) * (1.0 - b) - 1.0;
        let h = 2.0 / n as f64;
        let (mut lo, mut hi) = ((beta - h).max(1e-9), (beta + h).min(1.0 - 1e-9));
        if g(lo) * g(hi) < 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(lo) * g(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            beta = 0.5 * (lo + hi);
        }
    }

    let tangent_slope = if beta < 1.0 {
        (1.0 - w.eval(beta)) / (1.0 - beta)
    } else {
        w.derivative(1.0)
    };

    Ok(EnvelopeResult { grid_values, hull: env.hull, beta_w: beta, tangent_slope })
}

/// Locates the single concave-to-convex inflection of `w` on a grid, or
/// reports `None` when the curvature changes sign more than once.
/// Fully concave (or linear) functions report the convention value 1,
/// fully convex ones report 0.
pub fn check_cavexity(w: &WeightingFunction, grid_size: usize) -> Result<Option<f64>> {
    if grid_size < 100 {
        return Err(Error::Precondition(format!(
            "cavexity grid must have at least 100 points, got {grid_size}"
        )));
    }
    let n = grid_size;
    let h = 1.0 / n as f64;
    let ws: Vec<f64> = (0..=n).map(|k| w.eval(k as f64 * h)).collect();
    let d2_tol = 1e-12;
    // Signs of second differences: -1 concave, +1 convex, 0 flat.
    let signs: Vec<i8> = ws
        .windows(3)
        .map(|w3| {
            let d2 = w3[2] - 2.0 * w3[1] + w3[0];
            if d2 > d2_tol {
                1
            } else if d2 < -d2_tol {
                -1
            } else {
                0
            }
        })
        .collect();
    let mut turned_convex: Option<usize> = None;
    for (k, &s) in signs.iter().enumerate() {
        match s {
            1 if turned_convex.is_none() => turned_convex = Some(k),
            -1 if turned_convex.is_some() => return Ok(None),
            _ => {}
        }
    }
    Ok(Some(match turned_convex {
        // Never convex: concave (or linear) throughout.
        None => 1.0,
        Some(k) => (k + 1) as f64 * h,
    }))
}
