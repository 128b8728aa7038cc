//! Brute-force Bellman oracle.
//!
//! Enumerates `(mu_e, mu_s)` on a probability lattice and `U_g` on a utility
//! lattice, solves promise keeping for the remaining continuation, and keeps
//! the best feasible objective under a given `F`. It shares no code with the
//! closed-form policy beyond the objective and promise-keeping formulas.

use serde::Serialize;

use super::{closed_form_policy, BellmanSolution, ValueFunction};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::DerivedQuantities;

/// Lattice resolutions of the exhaustive search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchSpec {
    pub prob_step: f64,
    pub utility_step: f64,
}

impl Default for SearchSpec {
    fn default() -> Self {
        SearchSpec {
            prob_step: 1e-2,
            utility_step: 1e-2,
        }
    }
}

impl SearchSpec {
    pub fn uniform(step: f64) -> Self {
        SearchSpec {
            prob_step: step,
            utility_step: step,
        }
    }
}

struct Lattice {
    probs: Vec<f64>,
    u_g: Vec<f64>,
}

impl Lattice {
    fn new(dq: &DerivedQuantities, search: SearchSpec) -> Result<Self> {
        if !(search.prob_step > 0.0 && search.prob_step <= 1.0 && search.utility_step > 0.0) {
            return Err(Error::Domain(format!("invalid search spec {search:?}")));
        }
        let m = (1.0 / search.prob_step).round().max(1.0) as usize;
        let probs = (0..=m).map(|i| i as f64 / m as f64).collect();
        let lo = dq.x_delta.min(dq.u_bar);
        let span = dq.u_bar - lo;
        let k = (span / search.utility_step).ceil().max(1.0) as usize;
        let mut u_g: Vec<f64> = (0..=k).map(|i| lo + span * i as f64 / k as f64).collect();
        u_g[k] = dq.u_bar;
        Ok(Lattice { probs, u_g })
    }
}

fn search(
    dq: &DerivedQuantities,
    f: &ValueFunction,
    u: f64,
    lattice: &Lattice,
) -> Option<BellmanSolution> {
    let m = &dq.params;
    let d = m.delta;
    let x = dq.x_delta;
    let top = dq.u_bar;
    let slack = 1e-9 * top.max(1.0);
    let inside = |v: f64, lo: f64| v >= lo - slack && v <= top + slack;
    let effort_flow = |u_g: f64| (1.0 - d) * m.w + d * (u_g - (1.0 - m.p) * x);
    let shirk_flow = (1.0 - d) * (m.w + m.r);

    let mut best: Option<BellmanSolution> = None;
    let mut consider = |mu_e: f64, mu_s: f64, u_g: f64, u_hat: f64| {
        let cand = BellmanSolution {
            mu_e,
            mu_s,
            mu_o: (1.0 - mu_e - mu_s).max(0.0),
            u_g,
            u_b: u_g - x,
            u_hat,
            value: None,
        };
        let value = cand.objective(dq, |v| f.eval(v));
        if best.is_none_or(|b| value > b.value.unwrap()) {
            best = Some(BellmanSolution {
                value: Some(value),
                ..cand
            });
        }
    };

    let n = lattice.probs.len();
    for (i, &mu_e) in lattice.probs.iter().enumerate() {
        for &mu_s in &lattice.probs[..n - i] {
            if mu_e + mu_s > 0.0 && mu_e * dq.v_bar + mu_s * dq.v_lo < -1e-12 {
                continue;
            }
            if i == n - 1 {
                // mu_e = 1: promise keeping pins U_g
                let u_g = (u - (1.0 - d) * m.w) / d + (1.0 - m.p) * x;
                if inside(u_g, x) {
                    let u_g = u_g.clamp(x, top);
                    consider(1.0, 0.0, u_g, u_g);
                }
            } else if i == 0 {
                let u_hat = (u - mu_s * shirk_flow) / d;
                if inside(u_hat, 0.0) {
                    consider(0.0, mu_s, x, u_hat.clamp(0.0, top));
                }
            } else {
                let denom = d * (1.0 - mu_e);
                for &u_g in &lattice.u_g {
                    let u_hat = (u - mu_e * effort_flow(u_g) - mu_s * shirk_flow) / denom;
                    if inside(u_hat, 0.0) {
                        consider(mu_e, mu_s, u_g, u_hat.clamp(0.0, top));
                    }
                }
            }
        }
    }
    best
}

/// Best feasible point of the program at `u` under continuation values `f`,
/// found by exhaustive lattice search.
pub fn bellman_optimality_step(
    dq: &DerivedQuantities,
    f: &ValueFunction,
    u: f64,
    spec: SearchSpec,
) -> Result<BellmanSolution> {
    dq.require_nontrivial()?;
    let u = dq.check_utility(u)?;
    let lattice = Lattice::new(dq, spec)?;
    search(dq, f, u, &lattice).ok_or(Error::Infeasible(u))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeGap {
    pub node: usize,
    #[serde(rename = "U")]
    pub u: f64,
    /// One-step value of the closed-form policy under `F`.
    pub policy_value: f64,
    pub oracle_value: f64,
    /// `oracle_value - policy_value`.
    pub gap: f64,
    /// `F(U) - policy_value`: how far the stored value is from its own
    /// Bellman image.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityReport {
    pub search: SearchSpec,
    pub nodes: Vec<NodeGap>,
    pub worst_node: usize,
    pub max_gap: f64,
    pub max_abs_residual: f64,
}

impl OptimalityReport {
    /// First node whose gap or residual exceeds `tol_gap`.
    pub fn first_violation(&self, tol_gap: f64) -> Option<&NodeGap> {
        self.nodes
            .iter()
            .find(|n| n.gap > tol_gap || n.residual.abs() > tol_gap)
    }
}

/// Runs the oracle at every grid node of `f`.
pub fn optimality_report(
    dq: &DerivedQuantities,
    f: &ValueFunction,
    spec: SearchSpec,
    exec: Execution,
) -> Result<OptimalityReport> {
    dq.require_nontrivial()?;
    let lattice = Lattice::new(dq, spec)?;
    let nodes = f.nodes();
    let rows = exec.map_range(nodes.len(), |i| -> Result<NodeGap> {
        let u = nodes[i];
        let policy_value = closed_form_policy(dq, u)?.objective(dq, |v| f.eval(v));
        let oracle = search(dq, f, u, &lattice).ok_or(Error::Infeasible(u))?;
        let oracle_value = oracle.value.unwrap();
        Ok(NodeGap {
            node: i,
            u,
            policy_value,
            oracle_value,
            gap: oracle_value - policy_value,
            residual: f.values[i] - policy_value,
        })
    });
    let nodes = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let worst = nodes
        .iter()
        .max_by(|a, b| a.gap.total_cmp(&b.gap))
        .copied()
        .expect("grid is nonempty");
    let max_abs_residual = nodes.iter().map(|n| n.residual.abs()).fold(0.0, f64::max);
    Ok(OptimalityReport {
        search: spec,
        worst_node: worst.node,
        max_gap: worst.gap,
        max_abs_residual,
        nodes,
    })
}

/// Fails with [`Error::OptimalityViolation`] if, at some node, the oracle beats
/// the closed-form policy by more than `tol_gap`, or `F` differs from the
/// policy's one-step value by more than `tol_gap`.
pub fn verify_policy_optimality(
    dq: &DerivedQuantities,
    f: &ValueFunction,
    tol_gap: f64,
    spec: SearchSpec,
    exec: Execution,
) -> Result<OptimalityReport> {
    let report = optimality_report(dq, f, spec, exec)?;
    if let Some(bad) = report.first_violation(tol_gap) {
        let gap = if bad.gap > tol_gap {
            bad.gap
        } else {
            bad.residual.abs()
        };
        return Err(Error::OptimalityViolation {
            node: bad.node,
            u: bad.u,
            gap,
            tol: tol_gap,
        });
    }
    Ok(report)
}
