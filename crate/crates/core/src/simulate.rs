//! Monte Carlo simulation of the device and of the benchmark automaton.
//!
//! Path `i` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to stream
//! `i`, so every path has its own generator and results do not depend on
//! how paths are scheduled. Per-path results are reduced in path order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::benchmark::{AutomatonState, BenchmarkAutomaton};
use crate::device::{Policy, PolicyStep, Recommendation};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{
    output_distribution, realized_client_payoff, stage_payoffs, ActionProfile, DerivedQuantities,
    ModelParams, Output, Regime, WorkerAction,
};
use crate::numfmt::fmt;

/// Target bound on the truncated tail of discounted sums.
pub const TRUNCATION_TOL: f64 = 1e-6;

/// Smallest `t` with `delta^t (w + r) < TRUNCATION_TOL`.
pub fn default_horizon(params: &ModelParams) -> usize {
    let scale = params.w + params.r;
    let t = ((TRUNCATION_TOL / scale).ln() / params.delta.ln()).floor() as usize + 1;
    // guard against rounding in the logarithms
    (t.saturating_sub(1)..t + 2)
        .find(|&t| params.delta.powi(t as i32) * scale < TRUNCATION_TOL)
        .unwrap_or(t)
}

/// Bound on the part of a normalized discounted sum beyond `horizon`.
pub fn tail_bound(params: &ModelParams, horizon: usize) -> f64 {
    (params.w + params.r) * params.delta.powi(horizon as i32)
}

#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub u0: f64,
    /// Defaults to [`default_horizon`].
    pub horizon: Option<usize>,
    pub n_paths: usize,
    pub seed: u64,
    /// Record the trajectory of path 0.
    pub dump: bool,
    pub exec: Execution,
}

impl SimConfig {
    pub fn new(u0: f64, n_paths: usize, seed: u64) -> Self {
        SimConfig {
            u0,
            horizon: None,
            n_paths,
            seed,
            dump: false,
            exec: Execution::default(),
        }
    }

    pub fn with_horizon(self, horizon: usize) -> Self {
        SimConfig {
            horizon: Some(horizon),
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    #[serde(rename = "U")]
    pub state: f64,
    pub recommendation: Recommendation,
    pub action: WorkerAction,
    pub output: Output,
    pub u: f64,
    pub v: f64,
}

pub const TRAJECTORY_HEADER: &str = "t,U,rec_client,rec_worker,action,output,u,v";

fn client_str(a: ActionProfile) -> &'static str {
    if a.accepted() {
        "accept"
    } else {
        "reject"
    }
}

fn worker_str(w: WorkerAction) -> &'static str {
    match w {
        WorkerAction::Effort => "effort",
        WorkerAction::Shirk => "shirk",
    }
}

pub fn trajectory_csv(records: &[TrajectoryRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.t,
            fmt(r.state),
            client_str(r.recommendation),
            worker_str(r.recommendation.worker),
            worker_str(r.action),
            r.output.as_str(),
            fmt(r.u),
            fmt(r.v)
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Absorption {
    At(usize),
    NotAbsorbed,
}

/// Whether `u` lies in the region from which play is reproducible by a
/// public equilibrium.
pub fn is_absorbing(dq: &DerivedQuantities, u: f64) -> bool {
    match dq.regime {
        Regime::LowCost => u <= dq.u_i + 1e-12 * dq.u_bar.max(1.0),
        Regime::HighCost => u == 0.0,
    }
}

/// First period whose state is absorbing.
pub fn absorption_time(trajectory: &[TrajectoryRecord], dq: &DerivedQuantities) -> Absorption {
    trajectory
        .iter()
        .find(|r| is_absorbing(dq, r.state))
        .map_or(Absorption::NotAbsorbed, |r| Absorption::At(r.t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub std_error: f64,
}

impl Moments {
    fn of(xs: impl Iterator<Item = f64> + Clone) -> Moments {
        let n = xs.clone().count();
        if n == 0 {
            return Moments {
                mean: f64::NAN,
                std_error: f64::NAN,
            };
        }
        let mean = xs.clone().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Moments { mean, std_error }
    }

    /// `|mean - target|` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Empirical distribution of absorption times. Paths not absorbed within
/// the horizon are counted separately.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorptionTimes {
    /// Sorted absorption periods of absorbed paths.
    #[serde(skip)]
    pub times: Vec<usize>,
    pub absorbed: usize,
    pub not_absorbed: usize,
    pub median: Option<usize>,
}

impl AbsorptionTimes {
    fn new(mut times: Vec<usize>, n_paths: usize) -> Self {
        times.sort_unstable();
        let absorbed = times.len();
        let half = n_paths.div_ceil(2);
        let median = (absorbed >= half && half > 0).then(|| times[half - 1]);
        AbsorptionTimes {
            times,
            absorbed,
            not_absorbed: n_paths - absorbed,
            median,
        }
    }

    fn n_paths(&self) -> usize {
        self.absorbed + self.not_absorbed
    }

    /// Fraction of paths absorbed at some period `t < h`.
    pub fn fraction_by(&self, h: usize) -> f64 {
        let k = self.times.partition_point(|&t| t < h);
        k as f64 / self.n_paths() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationStats {
    pub n_paths: usize,
    pub horizon: usize,
    pub seed: u64,
    #[serde(rename = "U0")]
    pub u0: f64,
    /// Normalized discounted worker payoff.
    pub worker_payoff: Moments,
    /// Normalized discounted realized client payoff.
    pub client_payoff: Moments,
    /// Discounted frequency of acceptance.
    pub acceptance_frequency: Moments,
    pub absorption: AbsorptionTimes,
    /// Accept+shirk recommendations drawn after absorption.
    pub post_absorption_shirk: usize,
    /// Largest promise-keeping error over visited states.
    pub max_promise_keeping_error: f64,
    pub tail_bound: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub stats: SimulationStats,
    pub trajectory: Option<Vec<TrajectoryRecord>>,
}

struct PathOutcome {
    worker: f64,
    client: f64,
    accept: f64,
    absorbed_at: Option<usize>,
    post_absorption_shirk: usize,
    max_pk_error: f64,
    trajectory: Option<Vec<TrajectoryRecord>>,
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

fn draw_recommendation(step: &PolicyStep, x: f64) -> Recommendation {
    let mut acc = 0.0;
    let mut last = ActionProfile::REJECT_SHIRK;
    for (rec, prob) in step.mixture() {
        if prob <= 0.0 {
            continue;
        }
        acc += prob;
        last = rec;
        if x < acc {
            return rec;
        }
    }
    last
}

fn draw_output(params: &ModelParams, rec: Recommendation, x: f64) -> Output {
    let dist = output_distribution(params, rec);
    if dist.none == 1.0 {
        Output::None
    } else if x < dist.good {
        Output::Good
    } else {
        Output::Bad
    }
}

/// Runs one path, calling `visit` with every visited step and drawn
/// recommendation.
fn run_path<P: Policy + ?Sized>(
    policy: &P,
    u0: f64,
    horizon: usize,
    rng: &mut ChaCha8Rng,
    record: bool,
    mut visit: impl FnMut(usize, &PolicyStep, Recommendation),
) -> Result<PathOutcome> {
    let dq = policy.derived();
    let params = &dq.params;
    let d = params.delta;
    let mut u_state = u0;
    let mut disc = 1.0;
    let mut out = PathOutcome {
        worker: 0.0,
        client: 0.0,
        accept: 0.0,
        absorbed_at: None,
        post_absorption_shirk: 0,
        max_pk_error: 0.0,
        trajectory: record.then(|| Vec::with_capacity(horizon)),
    };
    for t in 0..horizon {
        let step = policy.step(u_state)?;
        let pk = (step.promised_utility(dq) - step.u).abs();
        out.max_pk_error = out.max_pk_error.max(pk);
        if out.absorbed_at.is_none() && is_absorbing(dq, step.u) {
            out.absorbed_at = Some(t);
        }
        let rec = draw_recommendation(&step, rng.random::<f64>());
        let z = draw_output(params, rec, rng.random::<f64>());
        visit(t, &step, rec);
        if out.absorbed_at.is_some() && rec == ActionProfile::ACCEPT_SHIRK {
            out.post_absorption_shirk += 1;
        }
        let u = stage_payoffs(params, rec).0;
        let v = realized_client_payoff(params, z);
        out.worker += disc * u;
        out.client += disc * v;
        if rec.accepted() {
            out.accept += disc;
        }
        if let Some(tr) = out.trajectory.as_mut() {
            tr.push(TrajectoryRecord {
                t,
                state: step.u,
                recommendation: rec,
                action: rec.worker,
                output: z,
                u,
                v,
            });
        }
        u_state = step.continuation(rec, z);
        disc *= d;
    }
    out.worker *= 1.0 - d;
    out.client *= 1.0 - d;
    out.accept *= 1.0 - d;
    Ok(out)
}

fn check_run(dq: &DerivedQuantities, u0: f64, n_paths: usize) -> Result<f64> {
    dq.require_nontrivial()?;
    if n_paths == 0 {
        return Err(Error::Domain("n_paths must be at least 1".into()));
    }
    dq.check_utility(u0)
}

/// Simulates the device from `cfg.u0` under obedient play.
pub fn simulate<P: Policy + ?Sized>(policy: &P, cfg: &SimConfig) -> Result<Simulation> {
    let dq = policy.derived();
    let u0 = check_run(dq, cfg.u0, cfg.n_paths)?;
    let horizon = cfg.horizon.unwrap_or_else(|| default_horizon(&dq.params));
    let outcomes = cfg.exec.map_range(cfg.n_paths, |i| {
        let mut rng = path_rng(cfg.seed, i);
        run_path(
            policy,
            u0,
            horizon,
            &mut rng,
            cfg.dump && i == 0,
            |_, _, _| {},
        )
    });
    let mut outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let tail = tail_bound(&dq.params, horizon);
    let mut warnings = Vec::new();
    if dq.params.delta.powi(horizon as i32) > TRUNCATION_TOL {
        warnings.push(format!(
            "truncation: delta^horizon = {:e} exceeds {TRUNCATION_TOL:e}",
            dq.params.delta.powi(horizon as i32)
        ));
    }
    let trajectory = outcomes.first_mut().and_then(|o| o.trajectory.take());
    let stats = SimulationStats {
        n_paths: cfg.n_paths,
        horizon,
        seed: cfg.seed,
        u0,
        worker_payoff: Moments::of(outcomes.iter().map(|o| o.worker)),
        client_payoff: Moments::of(outcomes.iter().map(|o| o.client)),
        acceptance_frequency: Moments::of(outcomes.iter().map(|o| o.accept)),
        absorption: AbsorptionTimes::new(
            outcomes.iter().filter_map(|o| o.absorbed_at).collect(),
            cfg.n_paths,
        ),
        post_absorption_shirk: outcomes.iter().map(|o| o.post_absorption_shirk).sum(),
        max_promise_keeping_error: outcomes.iter().map(|o| o.max_pk_error).fold(0.0, f64::max),
        tail_bound: tail,
        warnings,
    };
    Ok(Simulation { stats, trajectory })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DeviationKind {
    /// Shirk after an effort recommendation.
    WorkerShirk,
    /// Effort after a shirk recommendation.
    WorkerEffort,
    /// Reject after an accept recommendation.
    ClientReject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationRecord {
    pub path: usize,
    pub t: usize,
    #[serde(rename = "U")]
    pub state: f64,
    pub kind: DeviationKind,
    /// Deviation value minus obedient value.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub checks: usize,
    /// Largest one-shot deviation gain; `None` when nothing was checked.
    pub max_violation: Option<f64>,
    pub worst: Option<DeviationRecord>,
}

/// One-shot deviation gains at a step, for the drawn recommendation.
pub fn deviation_gains(
    dq: &DerivedQuantities,
    step: &PolicyStep,
    rec: Recommendation,
) -> Vec<(DeviationKind, f64)> {
    if !rec.accepted() {
        return Vec::new();
    }
    let m = &dq.params;
    let d = m.delta;
    let value = |flow: f64, prob_good: f64, good: f64, bad: f64| {
        (1.0 - d) * flow + d * (prob_good * good + (1.0 - prob_good) * bad)
    };
    let worker = match rec.worker {
        WorkerAction::Effort => {
            let (g, b) = (step.effort_good, step.effort_bad);
            let obey = value(m.w, m.p, g, b);
            let dev = value(m.w + m.r, m.q, g, b);
            (DeviationKind::WorkerShirk, dev - obey)
        }
        WorkerAction::Shirk => {
            let (g, b) = (step.shirk_good, step.shirk_bad);
            let obey = value(m.w + m.r, m.q, g, b);
            let dev = value(m.w, m.p, g, b);
            (DeviationKind::WorkerEffort, dev - obey)
        }
    };
    // the client is short-lived: rejecting yields 0, accepting the
    // conditional expected output
    let accept = step.mu_effort + step.mu_shirk;
    let client = -(step.mu_effort * dq.v_bar + step.mu_shirk * dq.v_lo) / accept;
    vec![worker, (DeviationKind::ClientReject, client)]
}

/// Checks one-shot deviations at every recommendation drawn along simulated
/// paths.
pub fn deviation_audit<P: Policy + ?Sized>(policy: &P, cfg: &SimConfig) -> Result<AuditReport> {
    let dq = policy.derived();
    let u0 = check_run(dq, cfg.u0, cfg.n_paths)?;
    let horizon = cfg.horizon.unwrap_or_else(|| default_horizon(&dq.params));
    let per_path = cfg.exec.map_range(
        cfg.n_paths,
        |i| -> Result<(usize, Option<DeviationRecord>)> {
            let mut rng = path_rng(cfg.seed, i);
            let mut checks = 0;
            let mut worst: Option<DeviationRecord> = None;
            run_path(policy, u0, horizon, &mut rng, false, |t, step, rec| {
                for (kind, gain) in deviation_gains(dq, step, rec) {
                    checks += 1;
                    if worst.is_none_or(|w| gain > w.gain) {
                        worst = Some(DeviationRecord {
                            path: i,
                            t,
                            state: step.u,
                            kind,
                            gain,
                        });
                    }
                }
            })?;
            Ok((checks, worst))
        },
    );
    let mut checks = 0;
    let mut worst: Option<DeviationRecord> = None;
    for r in per_path {
        let (c, w) = r?;
        checks += c;
        if let Some(w) = w {
            if worst.is_none_or(|b| w.gain > b.gain) {
                worst = Some(w);
            }
        }
    }
    Ok(AuditReport {
        checks,
        max_violation: worst.map(|w| w.gain),
        worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutomatonStats {
    pub n_paths: usize,
    pub horizon: usize,
    pub seed: u64,
    pub worker_payoff: Moments,
    pub client_payoff: Moments,
    pub tail_bound: f64,
}

/// Simulates the benchmark automaton from the normal state.
pub fn simulate_automaton(
    params: &ModelParams,
    automaton: &BenchmarkAutomaton,
    horizon: usize,
    n_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<AutomatonStats> {
    if n_paths == 0 {
        return Err(Error::Domain("n_paths must be at least 1".into()));
    }
    let d = params.delta;
    let payoffs = exec.map_range(n_paths, |i| {
        let mut rng = path_rng(seed, i);
        let mut state = AutomatonState::N;
        let (mut u_sum, mut v_sum, mut disc) = (0.0, 0.0, 1.0);
        for _ in 0..horizon {
            let a = match state {
                AutomatonState::P => ActionProfile::REJECT_SHIRK,
                AutomatonState::N => {
                    if rng.random::<f64>() < automaton.effort_prob_in_n {
                        ActionProfile::ACCEPT_EFFORT
                    } else {
                        ActionProfile::ACCEPT_SHIRK
                    }
                }
            };
            let z = draw_output(params, a, rng.random::<f64>());
            u_sum += disc * stage_payoffs(params, a).0;
            v_sum += disc * realized_client_payoff(params, z);
            state = automaton.next_state(state, z, rng.random::<f64>());
            disc *= d;
        }
        ((1.0 - d) * u_sum, (1.0 - d) * v_sum)
    });
    Ok(AutomatonStats {
        n_paths,
        horizon,
        seed,
        worker_payoff: Moments::of(payoffs.iter().map(|p| p.0)),
        client_payoff: Moments::of(payoffs.iter().map(|p| p.1)),
        tail_bound: tail_bound(params, horizon),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::{solve, SolveOptions};
    use crate::benchmark::{build_automaton, AutomatonVariant};
    use crate::device::Device;
    use crate::model::RawParams;

    fn device(raw: RawParams) -> Device {
        let sol = solve(
            &raw.validate().unwrap(),
            SolveOptions {
                grid_n: 401,
                ..Default::default()
            },
        )
        .unwrap();
        Device::new(sol.dq, sol.f).unwrap()
    }

    #[test]
    fn horizon_default() {
        let m = RawParams::CANONICAL.validate().unwrap();
        let h = default_horizon(&m);
        assert!(tail_bound(&m, h) < TRUNCATION_TOL);
        assert!(tail_bound(&m, h - 1) >= TRUNCATION_TOL);
    }

    #[test]
    fn moments() {
        let m = Moments::of([1.0, 2.0, 3.0].into_iter());
        assert_eq!(m.mean, 2.0);
        assert!((m.std_error - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Moments::of([4.0].into_iter()).std_error, 0.0);
    }

    #[test]
    fn absorption_fractions() {
        let a = AbsorptionTimes::new(vec![5, 0, 3], 4);
        assert_eq!(a.times, vec![0, 3, 5]);
        assert_eq!(a.fraction_by(0), 0.0);
        assert_eq!(a.fraction_by(1), 0.25);
        assert_eq!(a.fraction_by(6), 0.75);
        assert_eq!(a.median, Some(3));
        assert_eq!(AbsorptionTimes::new(vec![1], 4).median, None);
    }

    #[test]
    fn starts_inside_absorbing_region() {
        let dev = device(RawParams::CANONICAL);
        let cfg = SimConfig {
            dump: true,
            ..SimConfig::new(0.3, 10, 1).with_horizon(50)
        };
        let sim = simulate(&dev, &cfg).unwrap();
        assert_eq!(sim.stats.absorption.times, vec![0; 10]);
        let tr = sim.trajectory.unwrap();
        assert_eq!(tr.len(), 50);
        assert_eq!(absorption_time(&tr, &dev.dq), Absorption::At(0));
        assert_eq!(sim.stats.post_absorption_shirk, 0);
        for r in &tr {
            assert_eq!(r.output == Output::None, !r.recommendation.accepted());
            assert_eq!(r.action, r.recommendation.worker);
        }
    }

    #[test]
    fn high_cost_absorbs_at_zero() {
        let dq =
            DerivedQuantities::derive(&RawParams::CANONICAL.with_delta(0.65).validate().unwrap());
        assert_eq!(dq.regime, Regime::HighCost);
        let rec = |t, state| TrajectoryRecord {
            t,
            state,
            recommendation: ActionProfile::ACCEPT_EFFORT,
            action: WorkerAction::Effort,
            output: Output::Bad,
            u: 1.0,
            v: -1.0,
        };
        let tr = [rec(0, dq.u_i), rec(1, dq.x_delta), rec(2, 0.0), rec(3, 0.0)];
        assert_eq!(absorption_time(&tr, &dq), Absorption::At(2));
        assert_eq!(absorption_time(&tr[..2], &dq), Absorption::NotAbsorbed);
    }

    #[test]
    fn deterministic_and_schedule_free() {
        let dev = device(RawParams::CANONICAL);
        let cfg = SimConfig::new(dev.dq.u_r, 200, 42);
        let a = simulate(
            &dev,
            &SimConfig {
                exec: Execution::Sequential,
                ..cfg
            },
        )
        .unwrap();
        let b = simulate(
            &dev,
            &SimConfig {
                exec: Execution::Parallel,
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(a.stats, b.stats);
        let c = simulate(&dev, &SimConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.stats.worker_payoff, c.stats.worker_payoff);
    }

    #[test]
    fn rejects_bad_inputs() {
        let dev = device(RawParams::CANONICAL);
        assert!(matches!(
            simulate(&dev, &SimConfig::new(2.0, 10, 0)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            simulate(&dev, &SimConfig::new(0.5, 0, 0)),
            Err(Error::Domain(_))
        ));
        let short = simulate(&dev, &SimConfig::new(0.5, 2, 0).with_horizon(10)).unwrap();
        assert_eq!(short.stats.warnings.len(), 1);
    }

    #[test]
    fn csv_layout() {
        let r = TrajectoryRecord {
            t: 3,
            state: 1.175,
            recommendation: ActionProfile::ACCEPT_SHIRK,
            action: WorkerAction::Shirk,
            output: Output::Good,
            u: 2.0,
            v: 1.0,
        };
        assert_eq!(
            trajectory_csv(&[r]),
            "t,U,rec_client,rec_worker,action,output,u,v\n3,1.175,accept,shirk,shirk,g,2,1\n"
        );
    }

    #[test]
    fn audit_is_vacuous_at_zero() {
        let dev = device(RawParams::CANONICAL);
        let rep = deviation_audit(&dev, &SimConfig::new(0.0, 20, 5).with_horizon(30)).unwrap();
        assert_eq!(rep.checks, 0);
        assert_eq!(rep.max_violation, None);
    }

    #[test]
    fn automaton_payoff() {
        let m = RawParams::CANONICAL.validate().unwrap();
        let dq = DerivedQuantities::derive(&m);
        let a = build_automaton(&dq, AutomatonVariant::Pure).unwrap();
        let s = simulate_automaton(&m, &a, 300, 2000, 3, Execution::default()).unwrap();
        assert!(s.worker_payoff.z_score(a.w_n) < 4.0, "{s:?}");
        assert!(s.client_payoff.z_score(a.payoffs.1) < 4.0, "{s:?}");
    }
}
