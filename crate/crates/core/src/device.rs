//! The optimal communication device as a state machine on promised worker
//! utility.
//!
//! Each period the device draws a recommendation profile from the mixture
//! of [`PolicyStep`], the players obey, and the state moves to the
//! continuation utility attached to the realized (recommendation, output).

use serde::Serialize;

use crate::bellman::{self, ValueFunction};
use crate::error::{Error, Result};
use crate::model::{ActionProfile, DerivedQuantities, Output, Regime};

/// A private action recommendation: the client is told accept/reject, the
/// worker effort/shirk. `(reject, effort)` is never emitted.
pub type Recommendation = ActionProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    /// `(U_R, U_bar]`: secret randomization between effort and shirking.
    HighSecret,
    /// `(U_I, U_R]`: effort with output-contingent rewards and punishments.
    Effort,
    /// `(0, U_I]` when the benchmark is degenerate: effort or rejection,
    /// punishment to zero.
    Rationed,
    /// `[0, U_I]` when the benchmark sustains effort (forward invariant,
    /// reproducible by a public equilibrium), and `U = 0` otherwise.
    Absorbing,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::HighSecret => "high_secret",
            Region::Effort => "effort",
            Region::Rationed => "rationed",
            Region::Absorbing => "absorbing",
        }
    }
}

/// One period of the device at promised utility `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyStep {
    #[serde(rename = "U")]
    pub u: f64,
    pub region: Region,
    pub mu_effort: f64,
    pub mu_shirk: f64,
    pub mu_reject: f64,
    /// Continuation after (accept, effort) and good output.
    pub effort_good: f64,
    pub effort_bad: f64,
    pub shirk_good: f64,
    pub shirk_bad: f64,
    pub reject: f64,
}

impl PolicyStep {
    pub fn mixture(&self) -> [(Recommendation, f64); 3] {
        [
            (ActionProfile::ACCEPT_EFFORT, self.mu_effort),
            (ActionProfile::ACCEPT_SHIRK, self.mu_shirk),
            (ActionProfile::REJECT_SHIRK, self.mu_reject),
        ]
    }

    pub fn continuation(&self, rec: Recommendation, z: Output) -> f64 {
        use crate::model::{ClientAction::*, WorkerAction::*};
        match (rec.client, rec.worker, z) {
            (Reject, _, _) => self.reject,
            (Accept, Effort, Output::Bad) => self.effort_bad,
            (Accept, Effort, _) => self.effort_good,
            (Accept, Shirk, Output::Bad) => self.shirk_bad,
            (Accept, Shirk, _) => self.shirk_good,
        }
    }

    /// `(1 - d) E[u_t] + d E[U_{t+1}]` under obedient play.
    pub fn promised_utility(&self, dq: &DerivedQuantities) -> f64 {
        let m = &dq.params;
        let d = m.delta;
        let effort = (1.0 - d) * m.w + d * (m.p * self.effort_good + (1.0 - m.p) * self.effort_bad);
        let shirk =
            (1.0 - d) * (m.w + m.r) + d * (m.q * self.shirk_good + (1.0 - m.q) * self.shirk_bad);
        let reject = d * self.reject;
        self.mu_effort * effort + self.mu_shirk * shirk + self.mu_reject * reject
    }

    /// Expected client stage payoff.
    pub fn client_stage_value(&self, dq: &DerivedQuantities) -> f64 {
        self.mu_effort * dq.v_bar + self.mu_shirk * dq.v_lo
    }
}

/// Closed-form device. `F` is kept for the client-value side (initial
/// utility, bias cutoff); transitions do not depend on it.
#[derive(Debug, Clone)]
pub struct Device {
    pub dq: DerivedQuantities,
    pub f: ValueFunction,
}

/// Source of per-state policies for simulation and audits.
pub trait Policy: Sync {
    fn derived(&self) -> &DerivedQuantities;
    fn step(&self, u: f64) -> Result<PolicyStep>;
}

impl Device {
    pub fn new(dq: DerivedQuantities, f: ValueFunction) -> Result<Self> {
        dq.require_nontrivial()?;
        Ok(Device { dq, f })
    }

    pub fn policy_at(&self, u: f64) -> Result<PolicyStep> {
        policy_at(&self.dq, u)
    }

    pub fn beta_bar(&self) -> Result<f64> {
        compute_beta_bar(&self.dq, &self.f)
    }

    pub fn initial_utility(&self) -> Result<f64> {
        initial_utility(&self.dq, &self.f)
    }
}

impl Policy for Device {
    fn derived(&self) -> &DerivedQuantities {
        &self.dq
    }

    fn step(&self, u: f64) -> Result<PolicyStep> {
        policy_at(&self.dq, u)
    }
}

pub fn region_of(dq: &DerivedQuantities, u: f64) -> Region {
    if u > dq.u_r {
        Region::HighSecret
    } else if u > dq.u_i {
        Region::Effort
    } else if dq.regime == Regime::LowCost || u == 0.0 {
        Region::Absorbing
    } else {
        Region::Rationed
    }
}

/// The device's one-period rule at `u`.
pub fn policy_at(dq: &DerivedQuantities, u: f64) -> Result<PolicyStep> {
    let sol = bellman::closed_form_policy(dq, u)?;
    let u = dq.check_utility(u)?;
    // recommendations drawn with zero probability get the off-path
    // continuation 0
    let on = |mass: f64, v: f64| if mass > 0.0 { v } else { 0.0 };
    let (effort_good, effort_bad) = (on(sol.mu_e, sol.u_g), on(sol.mu_e, sol.u_b));
    Ok(PolicyStep {
        u,
        region: region_of(dq, u),
        mu_effort: sol.mu_e,
        mu_shirk: sol.mu_s,
        mu_reject: sol.mu_o,
        effort_good,
        effort_bad,
        shirk_good: on(sol.mu_s, sol.u_hat),
        shirk_bad: on(sol.mu_s, sol.u_hat),
        reject: on(sol.mu_o, sol.u_hat),
    })
}

/// Firm bias at which `beta U + (1 - beta) F(U)` is flat on `[U_R, U_bar]`.
pub fn compute_beta_bar(dq: &DerivedQuantities, f: &ValueFunction) -> Result<f64> {
    let s = (f.eval(dq.u_bar) - f.eval(dq.u_r)) / (dq.u_bar - dq.u_r);
    beta_bar_from_slope(s)
}

/// `-s / (1 - s)` for a negative top-segment slope `s`.
pub fn beta_bar_from_slope(s: f64) -> Result<f64> {
    if !(s < 0.0) {
        return Err(Error::SlopeSign(s));
    }
    Ok(-s / (1.0 - s))
}

/// Firm objective `beta U + (1 - beta) F(U)`.
pub fn firm_objective(beta: f64, f: &ValueFunction, u: f64) -> f64 {
    beta * u + (1.0 - beta) * f.eval(u)
}

/// Smallest maximizer of the firm objective over grid nodes in `[lo, hi]`.
pub(crate) fn argmax_objective(beta: f64, f: &ValueFunction, lo: f64, hi: f64) -> (f64, f64) {
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for (&u, &v) in f.nodes().iter().zip(&f.values) {
        if u < lo || u > hi {
            continue;
        }
        let obj = beta * u + (1.0 - beta) * v;
        // strict improvement beyond rounding keeps the smallest maximizer
        if obj > best.1 + 1e-14 {
            best = (u, obj);
        }
    }
    best
}

/// Initial promised utility of the optimal device.
///
/// On `[U_R, U_bar]` the firm objective is affine, so the top candidate is
/// `U_bar` when `beta > beta_bar`. Below `U_R` the best grid node is taken,
/// which is `U_R` itself while `F` still rises to its left. Ties go to the
/// lower candidate, so `beta = beta_bar` gives `U_R`.
pub fn initial_utility(dq: &DerivedQuantities, f: &ValueFunction) -> Result<f64> {
    dq.require_nontrivial()?;
    let beta = dq.params.beta;
    let beta_bar = compute_beta_bar(dq, f)?;
    let (low, low_value) = argmax_objective(beta, f, 0.0, dq.u_r);
    if beta > beta_bar && firm_objective(beta, f, dq.u_bar) > low_value {
        Ok(dq.u_bar)
    } else {
        Ok(low)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Constraint {
    /// `U_g - U_b >= x_delta` after an effort recommendation.
    EffortEnforceability,
    /// `U_{s,g} - U_{s,b} <= x_delta` after a shirk recommendation.
    ShirkEnforceability,
    /// Conditional effort probability at least the Stackelberg level.
    ClientAcceptance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObedienceReport {
    pub passed: bool,
    pub violated: Vec<Constraint>,
    /// Constraints holding with equality (to rounding).
    pub binding: Vec<Constraint>,
    pub effort_wedge: Option<f64>,
    pub shirk_wedge: Option<f64>,
    pub conditional_effort: Option<f64>,
}

/// Checks the worker's and the client's obedience constraints of `step`
/// from the closed forms.
pub fn check_obedience(dq: &DerivedQuantities, step: &PolicyStep) -> ObedienceReport {
    let x = dq.x_delta;
    let tol = 1e-12 * x.max(1.0);
    let mut violated = Vec::new();
    let mut binding = Vec::new();

    let effort_wedge = (step.mu_effort > 0.0).then_some(step.effort_good - step.effort_bad);
    if let Some(gap) = effort_wedge {
        if gap < x - tol {
            violated.push(Constraint::EffortEnforceability);
        } else if gap <= x + tol {
            binding.push(Constraint::EffortEnforceability);
        }
    }
    let shirk_wedge = (step.mu_shirk > 0.0).then_some(step.shirk_good - step.shirk_bad);
    if let Some(gap) = shirk_wedge {
        if gap > x + tol {
            violated.push(Constraint::ShirkEnforceability);
        } else if gap >= x - tol {
            binding.push(Constraint::ShirkEnforceability);
        }
    }
    let accept = step.mu_effort + step.mu_shirk;
    let conditional_effort = (accept > 0.0).then(|| step.mu_effort / accept);
    if let Some(a) = conditional_effort {
        if a < dq.alpha_lo - 1e-12 {
            violated.push(Constraint::ClientAcceptance);
        } else if a <= dq.alpha_lo + 1e-12 {
            binding.push(Constraint::ClientAcceptance);
        }
    }
    ObedienceReport {
        passed: violated.is_empty(),
        violated,
        binding,
        effort_wedge,
        shirk_wedge,
        conditional_effort,
    }
}
