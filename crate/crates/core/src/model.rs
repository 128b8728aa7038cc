//! Stage-game primitives and the closed-form constants derived from them.
//!
//! Outputs: effort yields good output `g` with probability `p`, shirking with
//! probability `q < p`; otherwise output is `b`. An accepted worker earns `w`,
//! plus the rent `r` when shirking. Rejection yields zero for everyone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for knife-edge comparisons between closed forms.
pub const KNIFE_EDGE_RTOL: f64 = 1e-12;

/// `a >= b` up to [`KNIFE_EDGE_RTOL`] relative to the operands' magnitude.
pub fn ge_tol(a: f64, b: f64) -> bool {
    a >= b - KNIFE_EDGE_RTOL * a.abs().max(b.abs())
}

/// Unvalidated parameter record, as read from JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub p: f64,
    pub q: f64,
    pub g: f64,
    pub b: f64,
    pub w: f64,
    pub r: f64,
    pub delta: f64,
    pub beta: f64,
}

impl RawParams {
    /// p=0.75, q=0.25, g=1, b=-1, w=1, r=1, delta=0.9, beta=0.5.
    pub const CANONICAL: RawParams = RawParams {
        p: 0.75,
        q: 0.25,
        g: 1.0,
        b: -1.0,
        w: 1.0,
        r: 1.0,
        delta: 0.9,
        beta: 0.5,
    };

    pub fn with_delta(self, delta: f64) -> Self {
        RawParams { delta, ..self }
    }

    pub fn with_beta(self, beta: f64) -> Self {
        RawParams { beta, ..self }
    }

    pub fn validate(self) -> Result<ModelParams> {
        ModelParams::validate(self)
    }
}

/// Validated primitives. Dereferences to the underlying [`RawParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ModelParams(RawParams);

impl std::ops::Deref for ModelParams {
    type Target = RawParams;

    fn deref(&self) -> &RawParams {
        &self.0
    }
}

impl ModelParams {
    pub fn validate(raw: RawParams) -> Result<Self> {
        let RawParams {
            p,
            q,
            g,
            b,
            w,
            r,
            delta,
            beta,
        } = raw;
        for (name, v) in [
            ("p", p),
            ("q", q),
            ("g", g),
            ("b", b),
            ("w", w),
            ("r", r),
            ("delta", delta),
            ("beta", beta),
        ] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} = {v} is not finite")));
            }
        }
        if q <= 0.0 {
            return Err(Error::OrderViolation(format!("need 0 < q, got q = {q}")));
        }
        if q >= p {
            return Err(Error::OrderViolation(format!(
                "need q < p, got q = {q}, p = {p}"
            )));
        }
        if p >= 1.0 {
            return Err(Error::OrderViolation(format!("need p < 1, got p = {p}")));
        }
        if w <= 0.0 {
            return Err(Error::SignViolation(format!("need w > 0, got w = {w}")));
        }
        if r <= 0.0 {
            return Err(Error::SignViolation(format!("need r > 0, got r = {r}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::SignViolation(format!(
                "need 0 < delta < 1, got delta = {delta}"
            )));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::SignViolation(format!(
                "need 0 <= beta <= 1, got beta = {beta}"
            )));
        }
        let v_lo = q * g + (1.0 - q) * b;
        let v_bar = p * g + (1.0 - p) * b;
        if v_lo >= 0.0 {
            return Err(Error::OutputValueViolation(format!(
                "need v_lo = q g + (1-q) b < 0, got {v_lo}"
            )));
        }
        if v_bar <= 0.0 {
            return Err(Error::OutputValueViolation(format!(
                "need v_bar = p g + (1-p) b > 0, got {v_bar}"
            )));
        }
        Ok(ModelParams(raw))
    }

    pub fn raw(&self) -> RawParams {
        self.0
    }

    /// Expected client payoff from an accepted worker who exerts effort.
    pub fn v_bar(&self) -> f64 {
        self.p * self.g + (1.0 - self.p) * self.b
    }

    /// Expected client payoff from an accepted worker who shirks.
    pub fn v_lo(&self) -> f64 {
        self.q * self.g + (1.0 - self.q) * self.b
    }

    /// Moral-hazard cost: the minimal expected punishment that makes effort
    /// incentive compatible.
    pub fn moral_hazard_cost(&self) -> f64 {
        self.r / ((1.0 - self.q) / (1.0 - self.p) - 1.0)
    }

    /// Minimal continuation gap between good and bad output that enforces
    /// effort at discount factor `delta`.
    pub fn wedge(&self, delta: f64) -> f64 {
        (1.0 - delta) * self.r / (delta * (self.p - self.q))
    }

    /// Smallest effort probability for which acceptance is a best reply.
    pub fn stackelberg_effort(&self) -> f64 {
        let (hi, lo) = (self.v_bar(), self.v_lo());
        -lo / (hi - lo)
    }

    /// Worker's Stackelberg payoff net of the expected moral-hazard cost.
    /// Equals the top promised utility whenever mediation is nontrivial.
    pub fn stackelberg_net_payoff(&self) -> f64 {
        let a = self.stackelberg_effort();
        a * (self.w - self.moral_hazard_cost()) + (1.0 - a) * (self.w + self.r)
    }

    /// Discount cutoff above which the mediated payoff set is nondegenerate.
    pub fn delta_lo(&self) -> f64 {
        self.r / (self.r + (self.p - self.q) * self.stackelberg_net_payoff())
    }
}

/// Which side of `w - c >= x_delta` the parameters fall on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `w - c >= x_delta`: the no-mediation benchmark sustains effort.
    LowCost,
    /// `w - c < x_delta`: the benchmark is degenerate at (0, 0).
    HighCost,
}

/// Every closed-form constant of the model, together with the primitives.
///
/// When mediation is trivial (`delta < delta_lo`) the top utility `U_bar` is
/// zero and the remaining utility levels are the formal closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedQuantities {
    pub params: ModelParams,
    pub v_bar: f64,
    pub v_lo: f64,
    pub c: f64,
    pub x_delta: f64,
    pub alpha_lo: f64,
    pub delta_lo: f64,
    #[serde(rename = "U_bar")]
    pub u_bar: f64,
    #[serde(rename = "U_P")]
    pub u_p: f64,
    #[serde(rename = "U_R")]
    pub u_r: f64,
    #[serde(rename = "U_R_lo")]
    pub u_r_lo: f64,
    #[serde(rename = "U_I")]
    pub u_i: f64,
    /// Benchmark punishment probability; only defined in the low-cost regime.
    pub gamma: Option<f64>,
    pub regime: Regime,
    pub mediation_nontrivial: bool,
}

impl DerivedQuantities {
    pub fn derive(params: &ModelParams) -> Self {
        let ModelParams(RawParams {
            p, q, w, r, delta, ..
        }) = *params;
        let v_bar = params.v_bar();
        let v_lo = params.v_lo();
        let c = params.moral_hazard_cost();
        let x_delta = params.wedge(delta);
        let alpha_lo = params.stackelberg_effort();
        let delta_lo = params.delta_lo();
        let mediation_nontrivial = ge_tol(delta, delta_lo);
        let u_bar = if mediation_nontrivial {
            params.stackelberg_net_payoff()
        } else {
            0.0
        };
        let regime = if ge_tol(w - c, x_delta) {
            Regime::LowCost
        } else {
            Regime::HighCost
        };
        let u_p = (1.0 - delta) * (w - c) + delta * x_delta;
        let u_r = (1.0 - delta) * (w - c) + delta * u_bar;
        let u_r_lo = (1.0 - delta) * (w - c) + delta * u_r;
        let u_i = match regime {
            Regime::LowCost => w - c,
            Regime::HighCost => u_p,
        };
        let gamma = match regime {
            Regime::LowCost => {
                let g = (1.0 - delta) * r / (delta * (w + r) * (p - q) - delta * (1.0 - q) * r);
                Some(g.min(1.0))
            }
            Regime::HighCost => None,
        };
        DerivedQuantities {
            params: *params,
            v_bar,
            v_lo,
            c,
            x_delta,
            alpha_lo,
            delta_lo,
            u_bar,
            u_p,
            u_r,
            u_r_lo,
            u_i,
            gamma,
            regime,
            mediation_nontrivial,
        }
    }

    pub fn delta(&self) -> f64 {
        self.params.delta
    }

    /// `w - c`, the worker's best benchmark payoff when positive.
    pub fn w_minus_c(&self) -> f64 {
        self.params.w - self.c
    }

    /// Errors unless the mediated program is nontrivial.
    pub fn require_nontrivial(&self) -> Result<()> {
        if self.mediation_nontrivial {
            Ok(())
        } else {
            Err(Error::Regime(format!(
                "mediation is trivial: delta = {} < delta_lo = {}",
                self.delta(),
                self.delta_lo
            )))
        }
    }

    /// Checks `0 <= u <= U_bar` (with rounding slack) and clamps.
    pub fn check_utility(&self, u: f64) -> Result<f64> {
        let slack = 1e-12 * self.u_bar.max(1.0);
        if !u.is_finite() || u < -slack || u > self.u_bar + slack {
            return Err(Error::Domain(format!(
                "utility {u} outside [0, {}]",
                self.u_bar
            )));
        }
        Ok(u.clamp(0.0, self.u_bar))
    }
}

pub fn derive(params: &ModelParams) -> DerivedQuantities {
    DerivedQuantities::derive(params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientAction {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkerAction {
    Effort,
    Shirk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionProfile {
    pub client: ClientAction,
    pub worker: WorkerAction,
}

impl ActionProfile {
    pub const ACCEPT_EFFORT: Self = Self::new(ClientAction::Accept, WorkerAction::Effort);
    pub const ACCEPT_SHIRK: Self = Self::new(ClientAction::Accept, WorkerAction::Shirk);
    pub const REJECT_SHIRK: Self = Self::new(ClientAction::Reject, WorkerAction::Shirk);

    pub const fn new(client: ClientAction, worker: WorkerAction) -> Self {
        Self { client, worker }
    }

    pub fn accepted(&self) -> bool {
        self.client == ClientAction::Accept
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Good,
    Bad,
    /// No output: the worker was rejected.
    None,
}

impl Output {
    pub fn as_str(&self) -> &'static str {
        match self {
            Output::Good => "g",
            Output::Bad => "b",
            Output::None => "0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputDistribution {
    pub good: f64,
    pub bad: f64,
    pub none: f64,
}

impl OutputDistribution {
    pub fn prob(&self, z: Output) -> f64 {
        match z {
            Output::Good => self.good,
            Output::Bad => self.bad,
            Output::None => self.none,
        }
    }
}

pub fn output_distribution(params: &ModelParams, a: ActionProfile) -> OutputDistribution {
    match (a.client, a.worker) {
        (ClientAction::Reject, _) => OutputDistribution {
            good: 0.0,
            bad: 0.0,
            none: 1.0,
        },
        (ClientAction::Accept, WorkerAction::Effort) => OutputDistribution {
            good: params.p,
            bad: 1.0 - params.p,
            none: 0.0,
        },
        (ClientAction::Accept, WorkerAction::Shirk) => OutputDistribution {
            good: params.q,
            bad: 1.0 - params.q,
            none: 0.0,
        },
    }
}

/// `(worker payoff, expected client payoff)` of a stage action profile.
pub fn stage_payoffs(params: &ModelParams, a: ActionProfile) -> (f64, f64) {
    match (a.client, a.worker) {
        (ClientAction::Reject, _) => (0.0, 0.0),
        (ClientAction::Accept, WorkerAction::Effort) => (params.w, params.v_bar()),
        (ClientAction::Accept, WorkerAction::Shirk) => (params.w + params.r, params.v_lo()),
    }
}

/// Realized client payoff: the output value when accepted, zero otherwise.
pub fn realized_client_payoff(params: &ModelParams, z: Output) -> f64 {
    match z {
        Output::Good => params.g,
        Output::Bad => params.b,
        Output::None => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> ModelParams {
        RawParams::CANONICAL.validate().unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn canonical_is_valid() {
        let m = canonical();
        assert!(close(m.v_bar(), 0.5));
        assert!(close(m.v_lo(), -0.5));
    }

    #[test]
    fn rejects_reversed_probabilities() {
        let raw = RawParams {
            p: 0.25,
            q: 0.75,
            ..RawParams::CANONICAL
        };
        assert!(matches!(raw.validate(), Err(Error::OrderViolation(_))));
        let raw = RawParams {
            q: 0.75,
            p: 0.75,
            ..RawParams::CANONICAL
        };
        assert!(matches!(raw.validate(), Err(Error::OrderViolation(_))));
        let raw = RawParams {
            p: 1.0,
            ..RawParams::CANONICAL
        };
        assert!(matches!(raw.validate(), Err(Error::OrderViolation(_))));
        let raw = RawParams {
            q: 0.0,
            ..RawParams::CANONICAL
        };
        assert!(matches!(raw.validate(), Err(Error::OrderViolation(_))));
    }

    #[test]
    fn rejects_sign_violations() {
        for raw in [
            RawParams {
                w: 0.0,
                ..RawParams::CANONICAL
            },
            RawParams {
                r: -1.0,
                ..RawParams::CANONICAL
            },
            RawParams::CANONICAL.with_delta(1.0),
            RawParams::CANONICAL.with_delta(0.0),
            RawParams::CANONICAL.with_beta(1.5),
            RawParams::CANONICAL.with_beta(-0.1),
        ] {
            assert!(
                matches!(raw.validate(), Err(Error::SignViolation(_))),
                "{raw:?}"
            );
        }
    }

    #[test]
    fn rejects_positive_shirk_value() {
        let raw = RawParams {
            b: 1.0,
            ..RawParams::CANONICAL
        };
        assert!(matches!(
            raw.validate(),
            Err(Error::OutputValueViolation(_))
        ));
    }

    #[test]
    fn canonical_derived_constants() {
        let dq = derive(&canonical());
        assert!(close(dq.c, 0.5));
        assert!(close(dq.x_delta, 2.0 / 9.0));
        assert!(close(dq.alpha_lo, 0.5));
        assert!(close(dq.u_bar, 1.25));
        assert!(close(dq.delta_lo, 8.0 / 13.0));
        assert!(close(dq.u_p, 0.25));
        assert!(close(dq.u_r, 1.175));
        assert!(close(dq.u_r_lo, 1.1075));
        assert!(close(dq.u_i, 0.5));
        assert!(close(dq.gamma.unwrap(), 4.0 / 9.0));
        assert_eq!(dq.regime, Regime::LowCost);
        assert!(dq.mediation_nontrivial);
    }

    #[test]
    fn second_parameter_set() {
        let m = RawParams {
            p: 0.9,
            q: 0.5,
            g: 1.0,
            b: -2.0,
            w: 1.0,
            r: 0.5,
            delta: 0.95,
            beta: 0.5,
        }
        .validate()
        .unwrap();
        let dq = derive(&m);
        assert!(close(dq.v_bar, 0.7));
        assert!(close(dq.v_lo, -0.5));
        assert!(close(dq.c, 0.125));
        assert!((dq.x_delta - 0.025 / 0.38).abs() < 1e-15);
        assert!(close(dq.alpha_lo, 5.0 / 12.0));
        // 5/12 * 0.875 + 7/12 * 1.5
        assert!(close(dq.u_bar, (5.0 * 0.875 + 7.0 * 1.5) / 12.0));
        assert!((dq.u_bar - 1.23958).abs() < 1e-5);
        assert_eq!(dq.regime, Regime::LowCost);
    }

    #[test]
    fn symmetric_outputs_give_one_half() {
        for p in [0.6, 0.7, 0.9] {
            let m = RawParams {
                p,
                q: 1.0 - p,
                ..RawParams::CANONICAL
            }
            .validate()
            .unwrap();
            assert!(close(m.stackelberg_effort(), 0.5));
        }
    }

    #[test]
    fn trivial_mediation_below_cutoff() {
        let dq = derive(&RawParams::CANONICAL.with_delta(0.5).validate().unwrap());
        assert!(!dq.mediation_nontrivial);
        assert_eq!(dq.u_bar, 0.0);
        assert!(dq.require_nontrivial().is_err());
    }

    #[test]
    fn knife_edge_delta_is_nontrivial() {
        let m = canonical();
        let dq = derive(
            &RawParams::CANONICAL
                .with_delta(m.delta_lo())
                .validate()
                .unwrap(),
        );
        assert!(dq.mediation_nontrivial);
        assert!((dq.x_delta - dq.u_bar).abs() < 1e-12);
    }

    #[test]
    fn high_cost_regime_has_no_gamma() {
        let dq = derive(&RawParams::CANONICAL.with_delta(0.65).validate().unwrap());
        assert_eq!(dq.regime, Regime::HighCost);
        assert_eq!(dq.gamma, None);
        assert_eq!(dq.u_i, dq.u_p);
    }

    #[test]
    fn stage_game_tables() {
        let m = canonical();
        let d = output_distribution(&m, ActionProfile::ACCEPT_EFFORT);
        assert_eq!((d.good, d.bad, d.none), (0.75, 0.25, 0.0));
        let d = output_distribution(&m, ActionProfile::ACCEPT_SHIRK);
        assert_eq!((d.good, d.bad, d.none), (0.25, 0.75, 0.0));
        for worker in [WorkerAction::Effort, WorkerAction::Shirk] {
            let a = ActionProfile::new(ClientAction::Reject, worker);
            assert_eq!(output_distribution(&m, a).none, 1.0);
            assert_eq!(stage_payoffs(&m, a), (0.0, 0.0));
        }
        assert_eq!(stage_payoffs(&m, ActionProfile::ACCEPT_SHIRK), (2.0, -0.5));
        assert_eq!(stage_payoffs(&m, ActionProfile::ACCEPT_EFFORT), (1.0, 0.5));
    }

    #[test]
    fn json_ingestion() {
        let raw: RawParams = serde_json::from_str(
            r#"{"p":0.75,"q":0.25,"g":1,"b":-1,"w":1,"r":1,"delta":0.9,"beta":0.5}"#,
        )
        .unwrap();
        assert_eq!(raw, RawParams::CANONICAL);
        assert!(serde_json::from_str::<RawParams>(r#"{"p":0.75}"#).is_err());
        let json = serde_json::to_value(derive(&canonical())).unwrap();
        for key in [
            "v_bar",
            "v_lo",
            "c",
            "x_delta",
            "alpha_lo",
            "delta_lo",
            "U_bar",
            "U_P",
            "U_R",
            "U_R_lo",
            "U_I",
            "gamma",
            "regime",
            "mediation_nontrivial",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }
}
