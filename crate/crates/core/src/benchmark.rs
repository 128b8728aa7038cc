//! No-mediation benchmark: the perfect-public-equilibrium payoff set, its upper
//! boundary, and the two-state grim-trigger automata that attain its
//! Pareto-optimal vertices.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ActionProfile, DerivedQuantities, Output, Regime};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PpeSet {
    pub degenerate: bool,
    pub worker_interval: (f64, f64),
    /// Extreme points `(U, V)` of the payoff set.
    pub vertices: Vec<(f64, f64)>,
}

pub fn ppe_payoff_set(dq: &DerivedQuantities) -> PpeSet {
    match dq.regime {
        Regime::HighCost => PpeSet {
            degenerate: true,
            worker_interval: (0.0, 0.0),
            vertices: vec![(0.0, 0.0)],
        },
        Regime::LowCost => {
            let top = dq.w_minus_c();
            PpeSet {
                degenerate: false,
                worker_interval: (0.0, top),
                vertices: vec![(0.0, 0.0), (top, 0.0), (top, dq.v_bar * top / dq.params.w)],
            }
        }
    }
}

/// Upper boundary `G(U) = (v_bar / w) U` of the benchmark payoff set.
pub fn upper_boundary_g(dq: &DerivedQuantities, u: f64) -> Result<f64> {
    if dq.regime == Regime::HighCost {
        return Err(Error::Domain(
            "benchmark payoff set is degenerate at (0, 0)".into(),
        ));
    }
    let top = dq.w_minus_c();
    if !(0.0..=top).contains(&u) {
        return Err(Error::Domain(format!("U = {u} outside [0, {top}]")));
    }
    Ok(dq.v_bar / dq.params.w * u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AutomatonVariant {
    /// Effort in the normal state; attains `(w - c, v_bar (w - c) / w)`.
    Pure,
    /// Effort with the Stackelberg probability; attains `(w - c, 0)`.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AutomatonState {
    /// Normal: accept, worker works (or mixes).
    N,
    /// Punishment: reject, worker would shirk. Absorbing.
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateSpec {
    pub state: AutomatonState,
    pub action: ActionProfile,
    pub worker_value: f64,
    pub client_stage_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkAutomaton {
    pub variant: AutomatonVariant,
    pub effort_prob_in_n: f64,
    /// Probability of moving N -> P after a bad output.
    pub gamma: f64,
    pub states: [StateSpec; 2],
    #[serde(rename = "W_N")]
    pub w_n: f64,
    #[serde(rename = "W_P")]
    pub w_p: f64,
    /// Discounted frequency of the normal state, `W_N / w`.
    pub discounted_frequency_n: f64,
    /// Ex-ante payoff vector `(U, V)` starting from N.
    pub payoffs: (f64, f64),
}

impl BenchmarkAutomaton {
    /// Public-randomization transition; `draw` is uniform on [0, 1).
    pub fn next_state(&self, state: AutomatonState, z: Output, draw: f64) -> AutomatonState {
        match (state, z) {
            (AutomatonState::P, _) => AutomatonState::P,
            (AutomatonState::N, Output::Bad) if draw < self.gamma => AutomatonState::P,
            (AutomatonState::N, _) => AutomatonState::N,
        }
    }

    pub fn spec(&self, state: AutomatonState) -> &StateSpec {
        match state {
            AutomatonState::N => &self.states[0],
            AutomatonState::P => &self.states[1],
        }
    }
}

pub fn build_automaton(
    dq: &DerivedQuantities,
    variant: AutomatonVariant,
) -> Result<BenchmarkAutomaton> {
    let gamma = dq.gamma.ok_or_else(|| {
        Error::Regime(format!(
            "w - c = {} < x_delta = {}: no effort is sustainable without mediation",
            dq.w_minus_c(),
            dq.x_delta
        ))
    })?;
    let m = &dq.params;
    let delta = m.delta;
    let w_n = (1.0 - delta) * m.w / (1.0 - delta * (1.0 - gamma * (1.0 - m.p)));
    let freq = w_n / m.w;
    let (effort_prob, client_stage) = match variant {
        AutomatonVariant::Pure => (1.0, dq.v_bar),
        AutomatonVariant::Mixed => {
            let a = dq.alpha_lo;
            (a, a * dq.v_bar + (1.0 - a) * dq.v_lo)
        }
    };
    let n_action = match variant {
        AutomatonVariant::Pure => ActionProfile::ACCEPT_EFFORT,
        // the normal state mixes; report the effort branch
        AutomatonVariant::Mixed => ActionProfile::ACCEPT_EFFORT,
    };
    Ok(BenchmarkAutomaton {
        variant,
        effort_prob_in_n: effort_prob,
        gamma,
        states: [
            StateSpec {
                state: AutomatonState::N,
                action: n_action,
                worker_value: w_n,
                client_stage_value: client_stage,
            },
            StateSpec {
                state: AutomatonState::P,
                action: ActionProfile::REJECT_SHIRK,
                worker_value: 0.0,
                client_stage_value: 0.0,
            },
        ],
        w_n,
        w_p: 0.0,
        discounted_frequency_n: freq,
        payoffs: (w_n, freq * client_stage),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RawParams;

    fn dq(raw: RawParams) -> DerivedQuantities {
        DerivedQuantities::derive(&raw.validate().unwrap())
    }

    #[test]
    fn canonical_ppe_set() {
        let s = ppe_payoff_set(&dq(RawParams::CANONICAL));
        assert!(!s.degenerate);
        assert_eq!(s.worker_interval, (0.0, 0.5));
        assert_eq!(s.vertices, vec![(0.0, 0.0), (0.5, 0.0), (0.5, 0.25)]);
    }

    #[test]
    fn impatient_worker_gives_degenerate_set() {
        let d = dq(RawParams::CANONICAL.with_delta(0.65));
        assert!(d.x_delta > 1.07 && d.x_delta < 1.08);
        let s = ppe_payoff_set(&d);
        assert!(s.degenerate);
        assert_eq!(s.vertices, vec![(0.0, 0.0)]);
        assert!(upper_boundary_g(&d, 0.0).is_err());
        assert!(build_automaton(&d, AutomatonVariant::Pure).is_err());
    }

    /// Discount factor at which `w - c = x_delta` exactly.
    fn knife_edge() -> RawParams {
        // x_delta = (1-d) r / (d (p-q)) = 0.5  =>  d = r / (r + 0.5 (p-q))
        RawParams::CANONICAL.with_delta(1.0 / 1.25)
    }

    #[test]
    fn knife_edge_is_nondegenerate_with_maximal_punishment() {
        let d = dq(knife_edge());
        assert_eq!(d.regime, Regime::LowCost);
        assert!(!ppe_payoff_set(&d).degenerate);
        let a = build_automaton(&d, AutomatonVariant::Pure).unwrap();
        assert!((a.gamma - 1.0).abs() < 1e-12);
        assert!((a.w_n - 0.5).abs() < 1e-12);
    }

    #[test]
    fn boundary_g() {
        let d = dq(RawParams::CANONICAL);
        assert_eq!(upper_boundary_g(&d, 0.0).unwrap(), 0.0);
        assert!((upper_boundary_g(&d, 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!((upper_boundary_g(&d, 0.3).unwrap() - 0.15).abs() < 1e-15);
        assert!(upper_boundary_g(&d, 0.6).is_err());
        assert!(upper_boundary_g(&d, -0.1).is_err());
    }

    #[test]
    fn pure_automaton() {
        let d = dq(RawParams::CANONICAL);
        let a = build_automaton(&d, AutomatonVariant::Pure).unwrap();
        assert!((a.gamma - 4.0 / 9.0).abs() < 1e-15);
        assert!((a.w_n - 0.5).abs() < 1e-15);
        assert!((a.payoffs.1 - 0.25).abs() < 1e-15);
        let m = &d.params;
        let lhs = m.delta * a.gamma * (m.p - m.q) * a.w_n;
        assert!((lhs - (1.0 - m.delta) * m.r).abs() < 1e-15);
        assert!((a.discounted_frequency_n - d.w_minus_c() / m.w).abs() < 1e-15);
    }

    #[test]
    fn mixed_automaton() {
        let d = dq(RawParams::CANONICAL);
        let a = build_automaton(&d, AutomatonVariant::Mixed).unwrap();
        assert_eq!(a.effort_prob_in_n, 0.5);
        assert!((a.payoffs.0 - 0.5).abs() < 1e-15);
        assert_eq!(a.payoffs.1, 0.0);
    }

    #[test]
    fn transitions() {
        let d = dq(RawParams::CANONICAL);
        let a = build_automaton(&d, AutomatonVariant::Pure).unwrap();
        use AutomatonState::*;
        assert_eq!(a.next_state(N, Output::Good, 0.0), N);
        assert_eq!(a.next_state(N, Output::Bad, 0.1), P);
        assert_eq!(a.next_state(N, Output::Bad, 0.9), N);
        assert_eq!(a.next_state(P, Output::None, 0.9), P);
    }

    #[test]
    fn vertices_inside_feasible_triangle() {
        // co{(0,0), (w, v_bar), (w+r, v_lo)} in the nonnegative quadrant
        for delta in [0.8, 0.85, 0.9, 0.95, 0.99] {
            let d = dq(RawParams::CANONICAL.with_delta(delta));
            let m = &d.params;
            let tri = [(0.0, 0.0), (m.w, d.v_bar), (m.w + m.r, d.v_lo)];
            for &(u, v) in &ppe_payoff_set(&d).vertices {
                assert!(u >= 0.0 && v >= 0.0);
                assert!(in_triangle((u, v), tri), "({u}, {v}) at delta {delta}");
            }
        }
    }

    fn in_triangle(pt: (f64, f64), t: [(f64, f64); 3]) -> bool {
        let cross = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
            (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
        };
        let s = [
            cross(t[0], t[1], pt),
            cross(t[1], t[2], pt),
            cross(t[2], t[0], pt),
        ];
        s.iter().all(|&x| x >= -1e-12) || s.iter().all(|&x| x <= 1e-12)
    }
}
