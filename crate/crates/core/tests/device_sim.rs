use mediation::bellman::{solve, SolveOptions};
use mediation::device::{Device, Policy, PolicyStep};
use mediation::error::Result;
use mediation::simulate::{absorption_time, deviation_audit, simulate, Absorption, SimConfig};
use mediation::{DerivedQuantities, RawParams};

fn canonical_device() -> Device {
    let sol = solve(
        &RawParams::CANONICAL.validate().unwrap(),
        SolveOptions::default(),
    )
    .unwrap();
    Device::new(sol.dq, sol.f).unwrap()
}

/// Lowers the reward for good output after effort at one state.
struct ShrunkReward<'a> {
    inner: &'a Device,
    at: f64,
}

impl Policy for ShrunkReward<'_> {
    fn derived(&self) -> &DerivedQuantities {
        &self.inner.dq
    }

    fn step(&self, u: f64) -> Result<PolicyStep> {
        let mut s = self.inner.policy_at(u)?;
        if u == self.at {
            s.effort_good -= 0.01;
        }
        Ok(s)
    }
}

#[test]
fn obedient_play_has_no_profitable_deviation() {
    let device = canonical_device();
    for u0 in [device.dq.u_r, device.dq.u_bar, 0.8] {
        let rep = deviation_audit(&device, &SimConfig::new(u0, 500, 3)).unwrap();
        assert!(rep.checks > 0);
        assert!(rep.max_violation.unwrap() <= 1e-12, "{rep:?}");
    }
}

#[test]
fn injected_fault_is_reported() {
    let device = canonical_device();
    let faulty = ShrunkReward {
        inner: &device,
        at: device.dq.u_r,
    };
    let rep = deviation_audit(&faulty, &SimConfig::new(device.dq.u_r, 50, 3)).unwrap();
    let worst = rep.worst.unwrap();
    assert!(worst.gain > 0.0);
    assert_eq!(worst.state, device.dq.u_r);
    let d = device.dq.delta();
    let expected = d * (device.dq.params.p - device.dq.params.q) * 0.01;
    assert!((worst.gain - expected).abs() < 1e-12);
}

#[test]
fn absorption_is_monotone_in_horizon() {
    let device = canonical_device();
    let sim = simulate(
        &device,
        &SimConfig::new(device.dq.u_r, 2000, 8).with_horizon(1000),
    )
    .unwrap();
    let a = &sim.stats.absorption;
    let mut prev = 0.0;
    for h in (0..=1000).step_by(10) {
        let frac = a.fraction_by(h);
        assert!(frac >= prev);
        prev = frac;
    }
    assert!(a.median.is_some());
    assert_eq!(sim.stats.post_absorption_shirk, 0);
}

#[test]
fn trajectory_absorption_matches_stats() {
    let device = canonical_device();
    let cfg = SimConfig {
        dump: true,
        ..SimConfig::new(device.dq.u_bar, 1, 21).with_horizon(2000)
    };
    let sim = simulate(&device, &cfg).unwrap();
    let tr = sim.trajectory.unwrap();
    match absorption_time(&tr, &device.dq) {
        Absorption::At(t) => assert_eq!(sim.stats.absorption.times, vec![t]),
        Absorption::NotAbsorbed => assert_eq!(sim.stats.absorption.not_absorbed, 1),
    }
    for w in tr.windows(2) {
        if w[0].state <= device.dq.u_i {
            assert!(w[1].state <= device.dq.u_i + 1e-12);
        }
    }
}

#[test]
fn acceptance_frequency_below_one() {
    for delta in [0.7, 0.9, 0.97] {
        let m = RawParams::CANONICAL.with_delta(delta).validate().unwrap();
        let sol = solve(&m, SolveOptions::default()).unwrap();
        let device = Device::new(sol.dq, sol.f).unwrap();
        let sim = simulate(&device, &SimConfig::new(device.dq.u_r, 2000, 5)).unwrap();
        let acc = sim.stats.acceptance_frequency;
        assert!(
            acc.mean > 0.0 && acc.mean + 3.0 * acc.std_error < 1.0,
            "{delta}: {acc:?}"
        );
    }
}
