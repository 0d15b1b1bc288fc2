//! Utility-function families on the nonnegative half-line, normalized to
//! vanish at zero, with closed-form evaluation and one-sided derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Curvature declared for a utility function, audited on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curvature {
    StrictlyConvex,
    StrictlyConcave,
    /// `x -> u(x)/x` nondecreasing; weaker than convexity with `u(0) = 0`
    /// but enough for the winner-take-all results.
    RatioIncreasing,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Left,
    Right,
}

/// Supported utility families. All satisfy `u(0) = 0` and are nondecreasing
/// on their working range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UtilityFunction {
    /// `coeff * x^alpha`.
    Power {
        alpha: f64,
        #[serde(default = "default_coeff")]
        coeff: f64,
    },
    /// `a x + b x^2`.
    Quadratic { a: f64, b: f64 },
    /// Linear with slope `a` up to `x0`, then `a x0 (1 + ln(x/x0))`.
    LinearLog { a: f64, x0: f64 },
    /// `1 - exp(-rate x)`.
    Exponential { rate: f64 },
    /// Slope-one linear on `[0, x0]`, parabolic blend on `[x0, y0]`,
    /// constant after the satiation point `y0`.
    Satiation { x0: f64, y0: f64 },
    /// Piecewise-linear through `(0, 0)` and the given knots; the last
    /// segment's slope extends beyond the last knot.
    PiecewiseLinear { points: Vec<(f64, f64)> },
    /// `a x - t x^2` on `[0, 2/t]`, extended linearly with slope `a - 4`.
    CappedQuadratic { a: f64, t: f64 },
}

impl UtilityFunction {
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::Domain(format!("utility evaluated at negative x = {x}")));
        }
        Ok(match self {
            Self::Power { alpha, coeff } => coeff * x.powf(*alpha),
            Self::Quadratic { a, b } => a * x + b * x * x,
            Self::LinearLog { a, x0 } => {
                if x <= *x0 {
                    a * x
                } else {
                    a * x0 * (1.0 + (x / x0).ln())
                }
            }
            Self::Exponential { rate } => 1.0 - (-rate * x).exp(),
            Self::Satiation { x0, y0 } => {
                let c = 1.0 / (2.0 * (y0 - x0));
                if x <= *x0 {
                    x
                } else if x < *y0 {
                    x0 + (y0 - x0) / 2.0 - c * (y0 - x) * (y0 - x)
                } else {
                    x0 + (y0 - x0) / 2.0
                }
            }
            Self::PiecewiseLinear { points } => piecewise_eval(points, x),
            Self::CappedQuadratic { a, t } => {
                let cap = 2.0 / t;
                if x <= cap {
                    a * x - t * x * x
                } else {
                    (a * cap - t * cap * cap) + (a - 4.0) * (x - cap)
                }
            }
        })
    }

    /// One-sided derivative; the sides differ only at kinks.
    pub fn derivative(&self, x: f64, side: Side) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::Domain(format!("derivative requested at negative x = {x}")));
        }
        Ok(match self {
            Self::Power { alpha, coeff } => {
                if x == 0.0 && *alpha < 1.0 {
                    f64::INFINITY
                } else if x == 0.0 && *alpha > 1.0 {
                    0.0
                } else if x == 0.0 {
                    *coeff
                } else {
                    coeff * alpha * x.powf(alpha - 1.0)
                }
            }
            Self::Quadratic { a, b } => a + 2.0 * b * x,
            Self::LinearLog { a, x0 } => {
                let in_linear = match side {
                    Side::Left => x <= *x0,
                    Side::Right => x < *x0,
                };
                if in_linear {
                    *a
                } else {
                    a * x0 / x
                }
            }
            Self::Exponential { rate } => rate * (-rate * x).exp(),
            Self::Satiation { x0, y0 } => {
                let c = 1.0 / (2.0 * (y0 - x0));
                let below_kink = match side {
                    Side::Left => x <= *x0,
                    Side::Right => x < *x0,
                };
                let below_sat = match side {
                    Side::Left => x <= *y0,
                    Side::Right => x < *y0,
                };
                if below_kink {
                    1.0
                } else if below_sat {
                    2.0 * c * (y0 - x)
                } else {
                    0.0
                }
            }
            Self::PiecewiseLinear { points } => piecewise_slope(points, x, side),
            Self::CappedQuadratic { a, t } => {
                let cap = 2.0 / t;
                let in_quad = match side {
                    Side::Left => x <= cap,
                    Side::Right => x < cap,
                };
                if in_quad {
                    a - 2.0 * t * x
                } else {
                    a - 4.0
                }
            }
        })
    }

    /// Upper end of the interval `[0, x0]` on which the function is exactly
    /// linear through the origin, when the family has one.
    pub fn linear_bound(&self) -> Option<f64> {
        match self {
            Self::Power { alpha, .. } if *alpha == 1.0 => Some(f64::INFINITY),
            Self::Quadratic { b, .. } if *b == 0.0 => Some(f64::INFINITY),
            Self::LinearLog { x0, .. } => Some(*x0),
            Self::Satiation { x0, .. } => Some(*x0),
            Self::PiecewiseLinear { points } => points.first().map(|&(x, _)| x),
            _ => None,
        }
    }

    /// Slope at the origin (right derivative).
    pub fn origin_slope(&self) -> f64 {
        self.derivative(0.0, Side::Right).expect("derivative at 0 exists")
    }

    /// Closed-form limit of `u(x/n)/u(x)` as `x` grows, used by the
    /// large-payoff condition. Derived per family; grid sampling cannot
    /// certify a limit and log-family convergence outruns the float range.
    pub fn large_x_ratio_limit(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            Self::Power { alpha, .. } => nf.powf(-alpha),
            Self::Quadratic { b, .. } if *b != 0.0 => 1.0 / (nf * nf),
            Self::Quadratic { .. } => 1.0 / nf,
            Self::LinearLog { .. } => 1.0,
            Self::Exponential { .. } => 1.0,
            Self::Satiation { .. } => 1.0,
            Self::PiecewiseLinear { points } => {
                let slope = last_slope(points);
                if slope == 0.0 {
                    1.0
                } else {
                    1.0 / nf
                }
            }
            Self::CappedQuadratic { a, .. } => {
                if *a == 4.0 {
                    1.0
                } else {
                    1.0 / nf
                }
            }
        }
    }

    /// Audits `u(0) = 0`, monotonicity, and the declared curvature on a
    /// 1000-point grid over `[0, working_max]`.
    pub fn validate(&self, declared: Curvature, working_max: f64) -> Result<()> {
        const GRID: usize = 1000;
        let h = working_max / GRID as f64;
        let mut vals = Vec::with_capacity(GRID + 1);
        for k in 0..=GRID {
            vals.push(self.eval(k as f64 * h)?);
        }
        if vals[0].abs() > 1e-12 {
            return Err(Error::Validation(format!("u(0) = {}, expected 0", vals[0])));
        }
        let scale = 1.0 + vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for w in vals.windows(2) {
            if w[1] < w[0] - 1e-12 * scale {
                return Err(Error::Validation(
                    "utility is decreasing on the audit grid".into(),
                ));
            }
        }
        let d2_tol = 1e-12 * scale;
        match declared {
            Curvature::StrictlyConvex => {
                for w in vals.windows(3) {
                    if w[2] - 2.0 * w[1] + w[0] < -d2_tol {
                        return Err(Error::Validation(
                            "declared strictly convex but second differences turn negative".into(),
                        ));
                    }
                }
                if !vals.windows(3).any(|w| w[2] - 2.0 * w[1] + w[0] > d2_tol) {
                    return Err(Error::Validation(
                        "declared strictly convex but no positive curvature found".into(),
                    ));
                }
            }
            Curvature::StrictlyConcave => {
                for w in vals.windows(3) {
                    if w[2] - 2.0 * w[1] + w[0] > d2_tol {
                        return Err(Error::Validation(
                            "declared strictly concave but second differences turn positive".into(),
                        ));
                    }
                }
                if !vals.windows(3).any(|w| w[2] - 2.0 * w[1] + w[0] < -d2_tol) {
                    return Err(Error::Validation(
                        "declared strictly concave but no negative curvature found".into(),
                    ));
                }
            }
            Curvature::RatioIncreasing => {
                let mut prev = f64::NEG_INFINITY;
                for k in 1..=GRID {
                    let x = k as f64 * h;
                    let r = vals[k] / x;
                    if r < prev - 1e-10 * scale {
                        return Err(Error::Validation(
                            "declared ratio-increasing but u(x)/x decreases on the grid".into(),
                        ));
                    }
                    prev = r;
                }
            }
            Curvature::None => {}
        }
        Ok(())
    }
}

fn default_coeff() -> f64 {
    1.0
}

fn piecewise_eval(points: &[(f64, f64)], x: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut prev = (0.0, 0.0);
    for &(px, py) in points {
        if x <= px {
            let w = px - prev.0;
            if w <= 0.0 {
                return py;
            }
            return prev.1 + (py - prev.1) * (x - prev.0) / w;
        }
        prev = (px, py);
    }
    prev.1 + last_slope(points) * (x - prev.0)
}

fn piecewise_slope(points: &[(f64, f64)], x: f64, side: Side) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut prev = (0.0, 0.0);
    for &(px, py) in points {
        let inside = match side {
            Side::Left => x <= px,
            Side::Right => x < px,
        };
        if inside {
            let w = px - prev.0;
            return if w <= 0.0 { 0.0 } else { (py - prev.1) / w };
        }
        prev = (px, py);
    }
    last_slope(points)
}

fn last_slope(points: &[(f64, f64)]) -> f64 {
    match points.len() {
        0 => 0.0,
        1 => {
            let (x, y) = points[0];
            if x > 0.0 {
                y / x
            } else {
                0.0
            }
        }
        _ => {
            let (x1, y1) = points[points.len() - 2];
            let (x2, y2) = points[points.len() - 1];
            if x2 > x1 {
                (y2 - y1) / (x2 - x1)
            } else {
                0.0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_eval() {
        let u = UtilityFunction::Power { alpha: 2.0, coeff: 1.0 };
        assert!((u.eval(3.0).unwrap() - 9.0).abs() < 1e-15);
        assert!(u.eval(-1.0).is_err());
    }

    #[test]
    fn capped_quadratic_matches_worked_value() {
        let u = UtilityFunction::CappedQuadratic { a: 5.0, t: 2.0 };
        assert!((u.eval(0.5).unwrap() - 2.0).abs() < 1e-15);
        // Beyond the cap 2/t = 1 the slope is a - 4 = 1.
        assert!((u.derivative(1.5, Side::Left).unwrap() - 1.0).abs() < 1e-15);
        assert!((u.eval(2.0).unwrap() - (3.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn linear_log_derivative_continuous_at_kink() {
        let u = UtilityFunction::LinearLog { a: 1.8, x0: 1.0 };
        let left = u.derivative(1.0, Side::Left).unwrap();
        let right = u.derivative(1.0, Side::Right).unwrap();
        assert!((left - 1.8).abs() < 1e-15);
        assert!((right - 1.8).abs() < 1e-15);
        assert!((u.eval(1.0).unwrap() - 1.8).abs() < 1e-15);
        assert!((u.eval(std::f64::consts::E).unwrap() - 3.6).abs() < 1e-12);
    }

    #[test]
    fn satiation_flat_after_y0() {
        let u = UtilityFunction::Satiation { x0: 1.0, y0: 2.0 };
        assert!((u.eval(0.5).unwrap() - 0.5).abs() < 1e-15);
        let top = u.eval(2.0).unwrap();
        assert!((u.eval(5.0).unwrap() - top).abs() < 1e-15);
        assert_eq!(u.derivative(3.0, Side::Left).unwrap(), 0.0);
        u.validate(Curvature::None, 5.0).unwrap();
    }

    #[test]
    fn curvature_audit_catches_mismatch() {
        let convex = UtilityFunction::Power { alpha: 2.0, coeff: 1.0 };
        convex.validate(Curvature::StrictlyConvex, 10.0).unwrap();
        assert!(convex.validate(Curvature::StrictlyConcave, 10.0).is_err());
        let concave = UtilityFunction::Power { alpha: 0.5, coeff: 1.0 };
        concave.validate(Curvature::StrictlyConcave, 10.0).unwrap();
        assert!(concave.validate(Curvature::StrictlyConvex, 10.0).is_err());
    }

    #[test]
    fn ratio_increasing_audit() {
        // Linear-then-steeper piecewise function: u/x increases.
        let u = UtilityFunction::PiecewiseLinear { points: vec![(1.0, 1.0), (2.0, 3.0)] };
        u.validate(Curvature::RatioIncreasing, 3.0).unwrap();
    }

    #[test]
    fn large_x_limits() {
        assert!((UtilityFunction::Power { alpha: 1.0, coeff: 1.0 }.large_x_ratio_limit(8) - 0.125).abs() < 1e-15);
        assert!((UtilityFunction::LinearLog { a: 1.8, x0: 1.0 }.large_x_ratio_limit(8) - 1.0).abs() < 1e-15);
        assert!((UtilityFunction::Exponential { rate: 1.0 }.large_x_ratio_limit(8) - 1.0).abs() < 1e-15);
    }
}
