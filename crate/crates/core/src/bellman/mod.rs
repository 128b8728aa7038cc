//! The upper boundary `F` of the mediated payoff set.
//!
//! At promised worker utility `U`, the firm picks a recommendation mixture
//! (`mu_e` accept+effort, `mu_s` accept+shirk, `mu_o` reject) and
//! continuation utilities: `U_g` / `U_b = U_g - x_delta` after effort and good
//! / bad output, and a common `U_hat` after shirking or rejection. `F(U)` is
//! the best average-client payoff subject to promise keeping
//!
//! ```text
//! U = mu_e [(1-d) w + d (p U_g + (1-p) U_b)] + mu_s [(1-d)(w+r) + d U_hat] + mu_o d U_hat
//! ```
//!
//! and the client's willingness to accept (`mu_e v_bar + mu_s v_lo >= 0`).
//! The optimal policy has a closed form with three branches; [`policy_evaluate`]
//! computes `F` as the fixed point of that policy on a grid, and [`oracle`]
//! checks optimality by brute force.

pub mod grid;
pub mod oracle;
pub mod shape;
pub mod value;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{DerivedQuantities, ModelParams};
pub use grid::UtilityGrid;
pub use value::ValueFunction;

pub const DEFAULT_GRID_N: usize = 2001;
pub const DEFAULT_TOL: f64 = 1e-8;

/// One feasible point of the recursive program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellmanSolution {
    pub mu_e: f64,
    pub mu_s: f64,
    pub mu_o: f64,
    #[serde(rename = "U_g")]
    pub u_g: f64,
    #[serde(rename = "U_b")]
    pub u_b: f64,
    #[serde(rename = "U_hat")]
    pub u_hat: f64,
    pub value: Option<f64>,
}

impl BellmanSolution {
    fn new(dq: &DerivedQuantities, mu_e: f64, mu_s: f64, u_g: f64, u_hat: f64) -> Self {
        BellmanSolution {
            mu_e,
            mu_s,
            mu_o: (1.0 - mu_e - mu_s).max(0.0),
            u_g,
            u_b: u_g - dq.x_delta,
            u_hat,
            value: None,
        }
    }

    /// Right-hand side of promise keeping: the worker utility this point
    /// delivers.
    pub fn promised_utility(&self, dq: &DerivedQuantities) -> f64 {
        let m = &dq.params;
        let d = m.delta;
        self.mu_e * ((1.0 - d) * m.w + d * (m.p * self.u_g + (1.0 - m.p) * self.u_b))
            + self.mu_s * ((1.0 - d) * (m.w + m.r) + d * self.u_hat)
            + self.mu_o * d * self.u_hat
    }

    /// Objective of the program under continuation values `f`.
    pub fn objective(&self, dq: &DerivedQuantities, f: impl Fn(f64) -> f64) -> f64 {
        let m = &dq.params;
        let d = m.delta;
        let mut v = 0.0;
        if self.mu_e > 0.0 {
            v += self.mu_e
                * ((1.0 - d) * dq.v_bar + d * (m.p * f(self.u_g) + (1.0 - m.p) * f(self.u_b)));
        }
        if self.mu_s + self.mu_o > 0.0 {
            v += self.mu_s * (1.0 - d) * dq.v_lo + (self.mu_s + self.mu_o) * d * f(self.u_hat);
        }
        v
    }
}

/// Effort probability on the top segment `(U_R, U_bar]`.
pub fn alpha(dq: &DerivedQuantities, u: f64) -> f64 {
    let m = &dq.params;
    let d = m.delta;
    let num = (1.0 - d) * (m.w + m.r - u);
    num / (num + u - dq.u_r)
}

/// The optimal policy at `u`:
///
/// * `[0, U_P)`: effort with probability `U / U_P`, `U_g = x_delta`, otherwise
///   reject and continue at 0;
/// * `[U_P, U_R]`: effort, `U_g = (U - (1-d)(w-c)) / d`;
/// * `(U_R, U_bar]`: effort with probability `alpha(U)` and `U_g = U_bar`,
///   otherwise shirk and stay at `U`.
pub fn closed_form_policy(dq: &DerivedQuantities, u: f64) -> Result<BellmanSolution> {
    dq.require_nontrivial()?;
    let u = dq.check_utility(u)?;
    let d = dq.delta();
    Ok(if u < dq.u_p {
        BellmanSolution::new(dq, u / dq.u_p, 0.0, dq.x_delta, 0.0)
    } else if u <= dq.u_r {
        let u_g = ((u - (1.0 - d) * dq.w_minus_c()) / d).min(dq.u_bar);
        BellmanSolution::new(dq, 1.0, 0.0, u_g, u_g)
    } else {
        let a = alpha(dq, u);
        BellmanSolution::new(dq, a, 1.0 - a, dq.u_bar, u)
    })
}

/// A row of the linear policy-evaluation operator:
/// `F[i] <- constant + sum coeff * F[j]`, with the self-referential part
/// already solved out.
#[derive(Debug, Clone)]
struct Stencil {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

impl Stencil {
    fn build(dq: &DerivedQuantities, grid: &UtilityGrid, i: usize) -> Result<Stencil> {
        let u = grid.nodes()[i];
        let sol = closed_form_policy(dq, u)?;
        let m = &dq.params;
        let d = m.delta;
        let mut constant = 0.0;
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(6);
        let push = |target: f64, weight: f64, terms: &mut Vec<(usize, f64)>| {
            if weight == 0.0 {
                return;
            }
            let (j, t) = grid.locate(target);
            terms.push((j, weight * (1.0 - t)));
            if t > 0.0 {
                terms.push((j + 1, weight * t));
            }
        };
        if sol.mu_e > 0.0 {
            constant += sol.mu_e * (1.0 - d) * dq.v_bar;
            push(sol.u_g, sol.mu_e * d * m.p, &mut terms);
            push(sol.u_b, sol.mu_e * d * (1.0 - m.p), &mut terms);
        }
        constant += sol.mu_s * (1.0 - d) * dq.v_lo;
        push(sol.u_hat, (sol.mu_s + sol.mu_o) * d, &mut terms);

        let self_weight: f64 = terms.iter().filter(|t| t.0 == i).map(|t| t.1).sum();
        terms.retain(|t| t.0 != i && t.1 != 0.0);
        let scale = 1.0 / (1.0 - self_weight);
        constant *= scale;
        for t in &mut terms {
            t.1 *= scale;
        }
        Ok(Stencil { constant, terms })
    }

    fn apply(&self, f: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(j, c)| acc + c * f[j])
    }
}

/// Default iteration cap `10 log(tol) / log(delta)`.
pub fn default_max_iterations(tol: f64, delta: f64) -> usize {
    (10.0 * tol.ln() / delta.ln()).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, Copy)]
pub struct EvaluateOptions {
    pub tol: f64,
    pub max_iterations: Option<usize>,
    pub exec: Execution,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        EvaluateOptions {
            tol: DEFAULT_TOL,
            max_iterations: None,
            exec: Execution::default(),
        }
    }
}

impl EvaluateOptions {
    pub fn with_tol(tol: f64) -> Self {
        EvaluateOptions {
            tol,
            ..Default::default()
        }
    }
}

/// Value of the closed-form policy on `grid`, by Jacobi iteration from
/// `F = 0` until the sup-norm change is at most `tol (1 - delta) / delta`.
pub fn policy_evaluate(
    dq: &DerivedQuantities,
    grid: &UtilityGrid,
    opts: EvaluateOptions,
) -> Result<ValueFunction> {
    dq.require_nontrivial()?;
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let d = dq.delta();
    let stencils = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, _)| Stencil::build(dq, grid, i))
        .collect::<Result<Vec<_>>>()?;
    let threshold = opts.tol * (1.0 - d) / d;
    let cap = opts
        .max_iterations
        .unwrap_or_else(|| default_max_iterations(opts.tol, d));
    let mut f = vec![0.0; grid.len()];
    let mut change = f64::INFINITY;
    for k in 1..=cap {
        let next = opts.exec.map_slice(&stencils, |s| s.apply(&f));
        change = next
            .iter()
            .zip(&f)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        f = next;
        if change <= threshold {
            let mut vf = ValueFunction::new(grid.clone(), f);
            vf.iterations = k;
            vf.error_bound = change * d / (1.0 - d);
            return Ok(vf);
        }
    }
    Err(Error::NonConvergence {
        iterations: cap,
        last_change: change,
    })
}

/// One sweep of the policy-evaluation operator applied to `f`.
pub fn policy_sweep(
    dq: &DerivedQuantities,
    f: &ValueFunction,
    exec: Execution,
) -> Result<Vec<f64>> {
    let stencils = (0..f.grid.len())
        .map(|i| Stencil::build(dq, &f.grid, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(exec.map_slice(&stencils, |s| s.apply(&f.values)))
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub grid_n: usize,
    pub evaluate: EvaluateOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            grid_n: DEFAULT_GRID_N,
            evaluate: EvaluateOptions::default(),
        }
    }
}

/// Derived constants plus the converged upper boundary.
#[derive(Debug, Clone)]
pub struct Solution {
    pub dq: DerivedQuantities,
    pub f: ValueFunction,
}

/// Derives, builds the model grid and evaluates the optimal policy.
pub fn solve(params: &ModelParams, opts: SolveOptions) -> Result<Solution> {
    let dq = DerivedQuantities::derive(params);
    let grid = UtilityGrid::for_model(&dq, opts.grid_n)?;
    let f = policy_evaluate(&dq, &grid, opts.evaluate)?;
    Ok(Solution { dq, f })
}

pub use oracle::{bellman_optimality_step, optimality_report, verify_policy_optimality};
