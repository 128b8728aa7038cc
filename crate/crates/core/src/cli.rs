//! Command-line front end.
//!
//! Every subcommand resolves a [`RunConfig`], writes its artifacts and a
//! `manifest.json` into the output directory, and prints its main JSON
//! result to stdout. Passing a previous `manifest.json` as `--params`
//! replays that run's configuration; flags given on the command line take
//! precedence.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bellman::{
    self, oracle::SearchSpec, shape, solve, verify_policy_optimality, EvaluateOptions,
    SolveOptions, DEFAULT_GRID_N, DEFAULT_TOL,
};
use crate::benchmark::{build_automaton, ppe_payoff_set, AutomatonVariant};
use crate::device::{compute_beta_bar, initial_utility, policy_at, Device};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{DerivedQuantities, RawParams};
use crate::numfmt::{fmt, round_json};
use crate::simulate::{simulate, simulate_automaton, trajectory_csv, SimConfig};
use crate::welfare::{
    antifolk_sweep, find_delta_star, sweep_csv, welfare_report, DeltaStarOptions,
};

pub const MIN_GRID_N: usize = 101;
pub const DEFAULT_OUT: &str = "mediation-out";
pub const DEFAULT_PATHS: usize = 10_000;
pub const DEFAULT_ORACLE_STEP: f64 = 1e-2;
pub const DEFAULT_TOL_GAP: f64 = 5e-3;
pub const DEFAULT_DELTA_STAR_TOL: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(
    name = "mediation",
    version,
    about = "Optimal mediation in a repeated worker-client game"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the derived constants and regime flags.
    Derive(CommonArgs),
    /// Benchmark public-equilibrium set and grim-trigger automaton.
    Benchmark(BenchmarkArgs),
    /// Compute the upper boundary F by value iteration.
    Solve(SolveArgs),
    /// Dump the optimal device's policy table over the grid.
    Policy(CommonArgs),
    /// Simulate the device.
    Simulate(SimulateArgs),
    /// First-best versus mediated welfare.
    Welfare(WelfareArgs),
    /// Welfare gap across discount factors.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Parameter JSON: a flat parameter record, an object with a "params"
    /// key, or a manifest.json from a previous run.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Utility grid size (at least 101).
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Value-iteration tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Pure,
    Mixed,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Also simulate the automaton with this many paths.
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Cross-check the closed-form policy with the brute-force oracle.
    #[arg(long)]
    pub verify: bool,
    #[arg(long)]
    pub oracle_step: Option<f64>,
    #[arg(long)]
    pub tol_gap: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Initial promised utility; defaults to the optimal one.
    #[arg(long)]
    pub u0: Option<f64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub paths: Option<usize>,
    /// Write the trajectory of the first path to trajectories.csv.
    #[arg(long)]
    pub dump: bool,
}

#[derive(Debug, Clone, Args)]
pub struct WelfareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Also search for the Pareto-improvement discount cutoff.
    #[arg(long)]
    pub delta_star: bool,
    #[arg(long)]
    pub delta_star_tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated discount factors.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub deltas: Option<Vec<f64>>,
}

/// Fully resolved configuration of one run; hashed into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub params: RawParams,
    pub grid_n: usize,
    pub tol: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_star: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_star_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
}

impl RunConfig {
    fn new(command: &str) -> Self {
        RunConfig {
            command: command.to_string(),
            params: RawParams::CANONICAL,
            grid_n: DEFAULT_GRID_N,
            tol: DEFAULT_TOL,
            seed: 0,
            variant: None,
            verify: None,
            oracle_step: None,
            tol_gap: None,
            u0: None,
            horizon: None,
            paths: None,
            dump: None,
            delta_star: None,
            delta_star_tol: None,
            deltas: None,
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            grid_n: self.grid_n,
            evaluate: EvaluateOptions::with_tol(self.tol),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.grid_n < MIN_GRID_N {
            return Err(Error::Usage(format!(
                "--grid-n must be at least {MIN_GRID_N}, got {}",
                self.grid_n
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Usage(format!(
                "--tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub outputs: Vec<String>,
}

/// Base configuration from a `--params` file.
fn load_base(path: &Path, command: &str) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    let mut cfg = RunConfig::new(command);
    if let Some(c) = value.get("config") {
        let prev: RunConfig = serde_json::from_value(c.clone())?;
        if prev.command == command {
            cfg = prev;
        } else {
            cfg.params = prev.params;
            cfg.grid_n = prev.grid_n;
            cfg.tol = prev.tol;
            cfg.seed = prev.seed;
        }
    } else if let Some(p) = value.get("params") {
        cfg.params = serde_json::from_value(p.clone())?;
    } else {
        cfg.params = serde_json::from_value(value)?;
    }
    Ok(cfg)
}

fn resolve(common: &CommonArgs, command: &str) -> Result<RunConfig> {
    let mut cfg = match &common.params {
        Some(path) => load_base(path, command)?,
        None => RunConfig::new(command),
    };
    let p = &mut cfg.params;
    let overrides = [
        (&mut p.p, common.p),
        (&mut p.q, common.q),
        (&mut p.g, common.g),
        (&mut p.b, common.b),
        (&mut p.w, common.w),
        (&mut p.r, common.r),
        (&mut p.delta, common.delta),
        (&mut p.beta, common.beta),
    ];
    for (slot, v) in overrides {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if let Some(n) = common.grid_n {
        cfg.grid_n = n;
    }
    if let Some(t) = common.tol {
        cfg.tol = t;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn set<T>(slot: &mut Option<T>, flag: Option<T>, default: T) {
    if let Some(v) = flag {
        *slot = Some(v);
    } else if slot.is_none() {
        *slot = Some(default);
    }
}

/// Serializes with every float rounded to the output precision.
fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_json(&mut v);
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn new(common: &CommonArgs) -> Result<Self> {
        let dir = common
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        fs::create_dir_all(&dir)?;
        Ok(Output {
            dir,
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, cfg: &RunConfig) -> Result<()> {
        self.files.push("manifest.json".into());
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            config_hash: cfg.hash(),
            outputs: self.files.clone(),
        };
        // the config is stored unrounded so that replaying it is exact
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}

/// Writes `name` and prints the same JSON to stdout.
fn emit(out: &mut Output, name: &str, json: &str) -> Result<()> {
    out.write(name, json)?;
    print!("{json}");
    Ok(())
}

fn cmd_derive(common: &CommonArgs) -> Result<()> {
    let cfg = resolve(common, "derive")?;
    let dq = DerivedQuantities::derive(&cfg.params.validate()?);
    let mut out = Output::new(common)?;
    emit(&mut out, "derived.json", &to_json(&dq)?)?;
    out.finish(&cfg)
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<()> {
    let mut cfg = resolve(&args.common, "benchmark")?;
    set(&mut cfg.variant, args.variant, VariantArg::Pure);
    if args.paths.is_some() {
        cfg.paths = args.paths;
    }
    if args.horizon.is_some() {
        cfg.horizon = args.horizon;
    }
    let m = cfg.params.validate()?;
    let dq = DerivedQuantities::derive(&m);
    let variant = match cfg.variant.unwrap() {
        VariantArg::Pure => AutomatonVariant::Pure,
        VariantArg::Mixed => AutomatonVariant::Mixed,
    };
    let ppe = ppe_payoff_set(&dq);
    let result = match build_automaton(&dq, variant) {
        Ok(a) => {
            let mut v = serde_json::to_value(&a)?;
            v["ppe_set"] = serde_json::to_value(&ppe)?;
            if let Some(paths) = cfg.paths {
                let horizon = cfg.horizon.unwrap_or(crate::simulate::default_horizon(&m));
                let stats =
                    simulate_automaton(&m, &a, horizon, paths, cfg.seed, Execution::default())?;
                v["simulation"] = serde_json::to_value(&stats)?;
            }
            v
        }
        Err(Error::Regime(note)) => json!({ "ppe_set": ppe, "automaton": null, "note": note }),
        Err(e) => return Err(e),
    };
    let mut out = Output::new(&args.common)?;
    emit(&mut out, "benchmark.json", &to_json(&result)?)?;
    out.finish(&cfg)
}

fn f_csv(nodes: &[f64], values: &[f64]) -> String {
    let mut s = String::from("U,F\n");
    for (u, v) in nodes.iter().zip(values) {
        s.push_str(&format!("{},{}\n", fmt(*u), fmt(*v)));
    }
    s
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let mut cfg = resolve(&args.common, "solve")?;
    if args.verify {
        cfg.verify = Some(true);
    }
    if cfg.verify == Some(true) {
        set(&mut cfg.oracle_step, args.oracle_step, DEFAULT_ORACLE_STEP);
        set(&mut cfg.tol_gap, args.tol_gap, DEFAULT_TOL_GAP);
    }
    let m = cfg.params.validate()?;
    let dq = DerivedQuantities::derive(&m);
    let mut out = Output::new(&args.common)?;
    if !dq.mediation_nontrivial {
        out.write("F.csv", &f_csv(&[0.0], &[0.0]))?;
        let report = json!({
            "degenerate_note": format!(
                "delta = {} < delta_lo = {}: the mediated payoff set is {{(0, 0)}}, F = 0 on {{0}}",
                m.delta, dq.delta_lo
            ),
            "derived": dq,
        });
        emit(&mut out, "report.json", &to_json(&report)?)?;
        return out.finish(&cfg);
    }
    let sol = solve(&m, cfg.solve_options())?;
    let f = &sol.f;
    out.write("F.csv", &f_csv(f.nodes(), &f.values))?;

    let linear_err = f
        .nodes()
        .iter()
        .zip(&f.values)
        .filter(|(u, _)| **u <= dq.u_i)
        .map(|(&u, &v)| {
            let slope = f.eval(dq.u_i) / dq.u_i;
            (v - slope * u).abs()
        })
        .fold(0.0, f64::max);
    let shape = shape::check_shape(&dq, f, shape::ShapeTolerances::for_model(&dq));
    let mut report = json!({
        "grid_n": f.grid.len(),
        "tol": cfg.tol,
        "iterations": f.iterations,
        "error_bound": f.error_bound,
        "derived": dq,
        "F_at_U_I": f.eval(dq.u_i),
        "F_at_U_R": f.eval(dq.u_r),
        "F_at_U_bar": f.eval(dq.u_bar),
        "bottom_linearity_error": linear_err,
        "shape": shape,
    });
    let mut failure = None;
    if cfg.verify == Some(true) {
        let spec = SearchSpec::uniform(cfg.oracle_step.unwrap());
        let tol_gap = cfg.tol_gap.unwrap();
        let rep = bellman::optimality_report(&dq, f, spec, Execution::default())?;
        report["max_gap"] = json!(rep.max_gap);
        report["worst_node"] = json!(rep.worst_node);
        report["max_abs_residual"] = json!(rep.max_abs_residual);
        report["oracle_step"] = json!(spec.prob_step);
        report["tol_gap"] = json!(tol_gap);
        let verdict = verify_policy_optimality(&dq, f, tol_gap, spec, Execution::default());
        report["verified"] = json!(verdict.is_ok());
        failure = verdict.err();
        out.write("oracle.json", &to_json(&rep.nodes)?)?;
    }
    emit(&mut out, "report.json", &to_json(&report)?)?;
    out.finish(&cfg)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_policy(common: &CommonArgs) -> Result<()> {
    let cfg = resolve(common, "policy")?;
    let m = cfg.params.validate()?;
    let sol = solve(&m, cfg.solve_options())?;
    let dq = &sol.dq;
    let mut csv = String::from("U,region,mu_e,mu_s,mu_o,U_g,U_b,U_hat\n");
    for &u in sol.f.nodes() {
        let s = policy_at(dq, u)?;
        let u_hat = if s.mu_shirk > 0.0 {
            s.shirk_good
        } else {
            s.reject
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt(u),
            s.region.as_str(),
            fmt(s.mu_effort),
            fmt(s.mu_shirk),
            fmt(s.mu_reject),
            fmt(s.effort_good),
            fmt(s.effort_bad),
            fmt(u_hat)
        ));
    }
    let summary = json!({
        "beta": m.beta,
        "beta_bar": compute_beta_bar(dq, &sol.f)?,
        "U0": initial_utility(dq, &sol.f)?,
        "U_I": dq.u_i,
        "U_R": dq.u_r,
        "U_bar": dq.u_bar,
        "regime": dq.regime,
    });
    let mut out = Output::new(common)?;
    out.write("policy.csv", &csv)?;
    emit(&mut out, "policy.json", &to_json(&summary)?)?;
    out.finish(&cfg)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg = resolve(&args.common, "simulate")?;
    set(&mut cfg.paths, args.paths, DEFAULT_PATHS);
    if args.horizon.is_some() {
        cfg.horizon = args.horizon;
    }
    if args.u0.is_some() {
        cfg.u0 = args.u0;
    }
    if args.dump {
        cfg.dump = Some(true);
    }
    let m = cfg.params.validate()?;
    let sol = solve(&m, cfg.solve_options())?;
    let device = Device::new(sol.dq, sol.f)?;
    let u0 = match cfg.u0 {
        Some(u) => u,
        None => device.initial_utility()?,
    };
    let sim_cfg = SimConfig {
        u0,
        horizon: cfg.horizon,
        n_paths: cfg.paths.unwrap(),
        seed: cfg.seed,
        dump: cfg.dump == Some(true),
        exec: Execution::default(),
    };
    let sim = simulate(&device, &sim_cfg)?;
    let mut stats = serde_json::to_value(&sim.stats)?;
    stats["F_at_U0"] = json!(device.f.eval(u0));
    let mut out = Output::new(&args.common)?;
    if let Some(tr) = &sim.trajectory {
        out.write("trajectories.csv", &trajectory_csv(tr))?;
    }
    emit(&mut out, "stats.json", &to_json(&stats)?)?;
    out.finish(&cfg)
}

fn cmd_welfare(args: &WelfareArgs) -> Result<()> {
    let mut cfg = resolve(&args.common, "welfare")?;
    if args.delta_star {
        cfg.delta_star = Some(true);
    }
    if cfg.delta_star == Some(true) {
        set(
            &mut cfg.delta_star_tol,
            args.delta_star_tol,
            DEFAULT_DELTA_STAR_TOL,
        );
    }
    let m = cfg.params.validate()?;
    let dq = DerivedQuantities::derive(&m);
    let f = if dq.mediation_nontrivial {
        Some(solve(&m, cfg.solve_options())?.f)
    } else {
        None
    };
    let report = welfare_report(&dq, f.as_ref())?;
    let mut v = serde_json::to_value(&report)?;
    let mut out = Output::new(&args.common)?;
    if cfg.delta_star == Some(true) {
        let opts = DeltaStarOptions {
            tol: cfg.delta_star_tol.unwrap(),
            solve: cfg.solve_options(),
            ..Default::default()
        };
        match find_delta_star(&m, opts) {
            Ok(ds) => {
                out.write("delta_star.json", &to_json(&ds)?)?;
                v["delta_star"] = json!(ds.delta_star);
            }
            Err(e @ Error::NoCrossing { .. }) => {
                v["delta_star"] = Value::Null;
                v["delta_star_note"] = json!(e.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    emit(&mut out, "welfare.json", &to_json(&v)?)?;
    out.finish(&cfg)
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let mut cfg = resolve(&args.common, "sweep")?;
    if args.deltas.is_some() {
        cfg.deltas = args.deltas.clone();
    }
    let deltas = cfg.deltas.clone().unwrap_or_default();
    if deltas.is_empty() {
        return Err(Error::Usage("sweep needs a nonempty --deltas list".into()));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
        return Err(Error::Usage(format!("discount factor {d} outside (0, 1)")));
    }
    let m = cfg.params.validate()?;
    let rep = antifolk_sweep(&m, &deltas, cfg.solve_options(), Execution::default())?;
    let mut out = Output::new(&args.common)?;
    out.write("sweep.csv", &sweep_csv(&rep.rows))?;
    emit(&mut out, "sweep.json", &to_json(&rep)?)?;
    out.finish(&cfg)
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Derive(a) => cmd_derive(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Policy(a) => cmd_policy(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Welfare(a) => cmd_welfare(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
