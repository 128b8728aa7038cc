//! First-best and mediated welfare, the anti-folk gap, and the discount
//! cutoff above which mediation improves on the benchmark for both sides.
//!
//! Welfare is the firm objective `beta U + (1 - beta) V`.

use serde::Serialize;

use crate::bellman::{solve, SolveOptions, ValueFunction};
use crate::benchmark::ppe_payoff_set;
use crate::device::{compute_beta_bar, firm_objective, initial_utility};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{DerivedQuantities, ModelParams};
use crate::numfmt::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstBest {
    #[serde(rename = "W_star")]
    pub w_star: f64,
    /// Pareto frontier of the feasible individually rational set: the
    /// segment from `(w, v_bar)` to where the shirking edge meets `V = 0`.
    pub frontier_l: [(f64, f64); 2],
    /// First-best payoff vector (the lower-`U` end when `W` is constant
    /// along the frontier).
    pub argmax: (f64, f64),
    pub constant_along_frontier: bool,
}

/// Vertices of `co{(0,0), (w, v_bar), (w+r, v_lo)}` clipped to the
/// nonnegative quadrant.
pub fn feasible_ir_vertices(params: &ModelParams) -> [(f64, f64); 3] {
    let (v_bar, v_lo) = (params.v_bar(), params.v_lo());
    let cross = params.w + params.r * v_bar / (v_bar - v_lo);
    [(0.0, 0.0), (params.w, v_bar), (cross, 0.0)]
}

pub fn first_best(params: &ModelParams) -> FirstBest {
    let beta = params.beta;
    let [_, top, right] = feasible_ir_vertices(params);
    let w = |(u, v): (f64, f64)| beta * u + (1.0 - beta) * v;
    let (wt, wr) = (w(top), w(right));
    FirstBest {
        w_star: wt.max(wr),
        frontier_l: [top, right],
        argmax: if wr > wt { right } else { top },
        constant_along_frontier: (wt - wr).abs() <= 1e-12 * wt.abs().max(1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MediatedValue {
    #[serde(rename = "W_mediated")]
    pub w_mediated: f64,
    #[serde(rename = "U0")]
    pub u0: f64,
    /// Firm objective at `U_R` and at `U_bar`.
    pub at_u_r: f64,
    pub at_u_bar: f64,
}

/// Optimal firm objective over the mediated payoff set and the initial
/// utility attaining it.
pub fn mediated_value(dq: &DerivedQuantities, f: &ValueFunction) -> Result<MediatedValue> {
    let beta = dq.params.beta;
    let u0 = initial_utility(dq, f)?;
    Ok(MediatedValue {
        w_mediated: firm_objective(beta, f, u0),
        u0,
        at_u_r: firm_objective(beta, f, dq.u_r),
        at_u_bar: firm_objective(beta, f, dq.u_bar),
    })
}

/// Best firm objective over the benchmark (public equilibrium) payoff set.
pub fn benchmark_value(dq: &DerivedQuantities) -> f64 {
    let beta = dq.params.beta;
    ppe_payoff_set(dq)
        .vertices
        .iter()
        .map(|&(u, v)| beta * u + (1.0 - beta) * v)
        .fold(0.0, f64::max)
}

/// Client payoff at the Pareto-optimal benchmark vector, `v_bar (w - c) / w`
/// (zero when effort cannot be sustained at all).
pub fn benchmark_client_value(params: &ModelParams) -> f64 {
    params.v_bar() * (params.w - params.moral_hazard_cost()).max(0.0) / params.w
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WelfareReport {
    pub delta: f64,
    pub beta: f64,
    pub mediation_nontrivial: bool,
    #[serde(rename = "W_star")]
    pub w_star: f64,
    #[serde(rename = "W_mediated")]
    pub w_mediated: f64,
    #[serde(rename = "W_benchmark")]
    pub w_benchmark: f64,
    pub gap: f64,
    #[serde(rename = "U0")]
    pub u0: f64,
    pub beta_bar: Option<f64>,
    pub frontier_l: [(f64, f64); 2],
    pub mediated: Option<MediatedValue>,
}

/// Welfare comparison at the parameters of `dq`. `f` is required when
/// mediation is nontrivial.
pub fn welfare_report(dq: &DerivedQuantities, f: Option<&ValueFunction>) -> Result<WelfareReport> {
    let fb = first_best(&dq.params);
    let (mediated, beta_bar) = match (dq.mediation_nontrivial, f) {
        (false, _) => (None, None),
        (true, Some(f)) => (Some(mediated_value(dq, f)?), Some(compute_beta_bar(dq, f)?)),
        (true, None) => {
            return Err(Error::Usage(
                "a solved F is required for nontrivial mediation".into(),
            ))
        }
    };
    let w_mediated = mediated.map_or(0.0, |m| m.w_mediated);
    Ok(WelfareReport {
        delta: dq.params.delta,
        beta: dq.params.beta,
        mediation_nontrivial: dq.mediation_nontrivial,
        w_star: fb.w_star,
        w_mediated,
        w_benchmark: benchmark_value(dq),
        gap: fb.w_star - w_mediated,
        u0: mediated.map_or(0.0, |m| m.u0),
        beta_bar,
        frontier_l: fb.frontier_l,
        mediated,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct DeltaStarOptions {
    /// Target bracket width.
    pub tol: f64,
    /// Largest discount factor probed when looking for an upper bracket.
    pub delta_max: f64,
    /// Allowed decrease of `F_delta(U_bar)` between probes before a
    /// monotonicity warning is raised.
    pub monotone_tol: f64,
    pub solve: SolveOptions,
}

impl Default for DeltaStarOptions {
    fn default() -> Self {
        DeltaStarOptions {
            tol: 1e-4,
            delta_max: 0.9999,
            monotone_tol: 1e-7,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasBranch {
    /// The firm starts the worker below `U_bar`.
    Low,
    /// The firm starts the worker at `U_bar`.
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaProbe {
    pub delta: f64,
    #[serde(rename = "U_bar")]
    pub u_bar: f64,
    #[serde(rename = "F_at_Ubar")]
    pub f_at_u_bar: f64,
    pub beta_bar: f64,
    #[serde(rename = "U0")]
    pub u0: f64,
    #[serde(rename = "F_at_U0")]
    pub f_at_u0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaStar {
    pub delta_star: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub threshold: f64,
    pub branch: BiasBranch,
    /// Probes in evaluation order.
    pub probes: Vec<DeltaProbe>,
    pub warnings: Vec<String>,
}

fn probe(params: &ModelParams, delta: f64, solve_opts: SolveOptions) -> Result<DeltaProbe> {
    let m = params.raw().with_delta(delta).validate()?;
    let sol = solve(&m, solve_opts)?;
    let u0 = initial_utility(&sol.dq, &sol.f)?;
    Ok(DeltaProbe {
        delta,
        u_bar: sol.dq.u_bar,
        f_at_u_bar: sol.f.eval(sol.dq.u_bar),
        beta_bar: compute_beta_bar(&sol.dq, &sol.f)?,
        u0,
        f_at_u0: sol.f.eval(u0),
    })
}

/// Smallest discount factor at which the optimal device gives the client
/// at least the benchmark payoff.
///
/// If at `delta_lo` the firm already starts the worker below `U_bar` and the
/// client gains there, the answer is `delta_lo`. Otherwise bisects
/// `delta -> F_delta(U_bar)` against `v_bar (w - c) / w`, re-solving `F` at
/// every probe.
pub fn find_delta_star(params: &ModelParams, opts: DeltaStarOptions) -> Result<DeltaStar> {
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let lo0 = params.delta_lo();
    if !(lo0 < opts.delta_max && opts.delta_max < 1.0) {
        return Err(Error::Domain(format!(
            "need delta_lo = {lo0} < delta_max = {} < 1",
            opts.delta_max
        )));
    }
    let threshold = benchmark_client_value(params);
    let mut probes = Vec::new();
    let mut warnings = Vec::new();
    let mut record = |p: DeltaProbe, probes: &mut Vec<DeltaProbe>| {
        for q in probes.iter() {
            let (a, b) = if q.delta < p.delta { (q, &p) } else { (&p, q) };
            if a.f_at_u_bar > b.f_at_u_bar + opts.monotone_tol {
                warnings.push(format!(
                    "non-monotone: F(U_bar) = {} at delta = {} but {} at delta = {}",
                    a.f_at_u_bar, a.delta, b.f_at_u_bar, b.delta
                ));
            }
        }
        probes.push(p);
    };

    let first = probe(params, lo0, opts.solve)?;
    record(first, &mut probes);
    let branch = if first.u0 < first.u_bar {
        BiasBranch::Low
    } else {
        BiasBranch::High
    };
    let low_gain = branch == BiasBranch::Low && first.f_at_u0 >= threshold;
    if low_gain || first.f_at_u_bar >= threshold {
        return Ok(DeltaStar {
            delta_star: lo0,
            bracket: (lo0, lo0),
            iterations: 0,
            threshold,
            branch,
            probes,
            warnings,
        });
    }

    // upper bracket: halve the distance to 1 until F reaches the threshold
    let mut lo = lo0;
    let mut hi = None;
    let mut gap = 1.0 - lo0;
    while hi.is_none() {
        gap *= 0.5;
        let d = (1.0 - gap).min(opts.delta_max);
        let p = probe(params, d, opts.solve)?;
        record(p, &mut probes);
        if p.f_at_u_bar >= threshold {
            hi = Some(d);
        } else {
            lo = d;
            if d >= opts.delta_max {
                let best = probes
                    .iter()
                    .max_by(|a, b| a.f_at_u_bar.total_cmp(&b.f_at_u_bar))
                    .expect("at least one probe");
                return Err(Error::NoCrossing {
                    threshold,
                    delta_max: opts.delta_max,
                    best: best.f_at_u_bar,
                    best_delta: best.delta,
                });
            }
        }
    }
    let mut hi = hi.unwrap();
    let mut iterations = 0;
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        let p = probe(params, mid, opts.solve)?;
        record(p, &mut probes);
        if p.f_at_u_bar >= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(DeltaStar {
        delta_star: hi,
        bracket: (lo, hi),
        iterations,
        threshold,
        branch,
        probes,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    #[serde(rename = "U_bar")]
    pub u_bar: f64,
    #[serde(rename = "F_at_Ubar")]
    pub f_at_u_bar: f64,
    #[serde(rename = "W_star")]
    pub w_star: f64,
    #[serde(rename = "W_mediated")]
    pub w_mediated: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Smallest gap over the sweep: an empirical lower-bound witness for the
    /// anti-folk constant, not the constant itself.
    pub min_gap: f64,
    /// `F_delta(U_bar)` never decreases along the sweep in increasing delta.
    pub f_at_u_bar_nondecreasing: bool,
}

/// Welfare gap at each discount factor of `deltas`.
pub fn antifolk_sweep(
    params: &ModelParams,
    deltas: &[f64],
    solve_opts: SolveOptions,
    exec: Execution,
) -> Result<SweepReport> {
    if deltas.is_empty() {
        return Err(Error::Usage("the delta list is empty".into()));
    }
    let rows = exec.map_slice(deltas, |&d| -> Result<SweepRow> {
        let m = params.raw().with_delta(d).validate()?;
        let dq = DerivedQuantities::derive(&m);
        let f = if dq.mediation_nontrivial {
            Some(solve(&m, solve_opts)?.f)
        } else {
            None
        };
        let rep = welfare_report(&dq, f.as_ref())?;
        Ok(SweepRow {
            delta: d,
            u_bar: dq.u_bar,
            f_at_u_bar: f.as_ref().map_or(0.0, |f| f.eval(dq.u_bar)),
            w_star: rep.w_star,
            w_mediated: rep.w_mediated,
            gap: rep.gap,
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let min_gap = rows.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let tol = 10.0 * solve_opts.evaluate.tol;
    let nondecreasing = sorted
        .windows(2)
        .all(|w| w[1].f_at_u_bar >= w[0].f_at_u_bar - tol);
    Ok(SweepReport {
        rows,
        min_gap,
        f_at_u_bar_nondecreasing: nondecreasing,
    })
}

pub const SWEEP_HEADER: &str = "delta,U_bar,F_at_Ubar,W_star,W_mediated,gap";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt(r.delta),
            fmt(r.u_bar),
            fmt(r.f_at_u_bar),
            fmt(r.w_star),
            fmt(r.w_mediated),
            fmt(r.gap)
        ));
    }
    out
}
