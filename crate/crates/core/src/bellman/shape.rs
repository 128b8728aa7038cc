//! Curvature diagnostics of a converged `F`.
//!
//! Expected shape: linear on `[0, U_I]`, strictly increasing and strictly
//! concave on `(U_I, U_R]`, strictly decreasing and affine on `[U_R, U_bar]`.

use serde::Serialize;

use super::ValueFunction;
use crate::model::DerivedQuantities;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeTolerances {
    /// Allowed spread of slopes on the linear and affine segments.
    pub slope_variation: f64,
    /// Allowed positive second difference anywhere.
    pub concavity_slack: f64,
    /// Required negative second difference on the strictly concave part.
    pub strict_margin: f64,
}

impl ShapeTolerances {
    pub fn for_model(dq: &DerivedQuantities) -> Self {
        ShapeTolerances {
            slope_variation: 1e-6,
            concavity_slack: 1e-9,
            strict_margin: 1e-9 * dq.v_bar,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeReport {
    pub tolerances: ShapeTolerances,
    /// Smallest slope over intervals inside `(0, U_R)`.
    pub min_slope_below_restart: f64,
    /// Largest slope over intervals inside `(U_R, U_bar)`.
    pub max_slope_above_restart: f64,
    /// `max - min` slope on `[U_R, U_bar]`.
    pub top_slope_variation: f64,
    /// `max - min` slope on `[0, U_I]`.
    pub bottom_slope_variation: f64,
    pub max_second_difference: f64,
    /// Largest second difference on `(U_I + 2h, U_R - 2h)`.
    pub max_second_difference_concave: f64,
    pub violations: Vec<String>,
}

impl ShapeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn spread(xs: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        (lo.min(s), hi.max(s))
    });
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

pub fn check_shape(dq: &DerivedQuantities, f: &ValueFunction, tol: ShapeTolerances) -> ShapeReport {
    let slopes = f.slopes();
    let h = f.grid.step();
    let eps = 1e-12 * dq.u_bar;
    let within = |a: f64, b: f64, lo: f64, hi: f64| a >= lo - eps && b <= hi + eps;

    let min_below = slopes
        .iter()
        .filter(|s| within(s.0, s.1, 0.0, dq.u_r))
        .map(|s| s.2)
        .fold(f64::INFINITY, f64::min);
    let max_above = slopes
        .iter()
        .filter(|s| within(s.0, s.1, dq.u_r, dq.u_bar))
        .map(|s| s.2)
        .fold(f64::NEG_INFINITY, f64::max);
    let top_var = spread(
        slopes
            .iter()
            .filter(|s| within(s.0, s.1, dq.u_r, dq.u_bar))
            .map(|s| s.2),
    );
    let bottom_var = spread(
        slopes
            .iter()
            .filter(|s| within(s.0, s.1, 0.0, dq.u_i))
            .map(|s| s.2),
    );
    let sd = f.second_differences();
    let max_sd = sd.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = (dq.u_i + 2.0 * h, dq.u_r - 2.0 * h);
    let max_sd_concave = sd
        .iter()
        .filter(|s| s.0 > lo && s.0 < hi)
        .map(|s| s.1)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut violations = Vec::new();
    if !(min_below > 0.0) {
        violations.push(format!("slope {min_below:e} <= 0 below U_R"));
    }
    if !(max_above < 0.0) {
        violations.push(format!("slope {max_above:e} >= 0 above U_R"));
    }
    if top_var > tol.slope_variation {
        violations.push(format!("top segment slope spread {top_var:e}"));
    }
    if bottom_var > tol.slope_variation {
        violations.push(format!("bottom segment slope spread {bottom_var:e}"));
    }
    if max_sd > tol.concavity_slack {
        violations.push(format!("second difference {max_sd:e} > 0"));
    }
    if max_sd_concave.is_finite() && max_sd_concave > -tol.strict_margin {
        violations.push(format!(
            "second difference {max_sd_concave:e} not strictly negative on (U_I, U_R)"
        ));
    }
    ShapeReport {
        tolerances: tol,
        min_slope_below_restart: min_below,
        max_slope_above_restart: max_above,
        top_slope_variation: top_var,
        bottom_slope_variation: bottom_var,
        max_second_difference: max_sd,
        max_second_difference_concave: max_sd_concave,
        violations,
    }
}
