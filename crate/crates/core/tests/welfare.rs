use mediation::bellman::{solve, SolveOptions};
use mediation::error::Error;
use mediation::welfare::{
    antifolk_sweep, benchmark_value, find_delta_star, first_best, mediated_value, sweep_csv,
    welfare_report, BiasBranch, DeltaStarOptions,
};
use mediation::{DerivedQuantities, Execution, RawParams};

#[test]
fn first_best_examples() {
    let fb = |beta| first_best(&RawParams::CANONICAL.with_beta(beta).validate().unwrap());
    assert_eq!(fb(1.0).w_star, 1.5);
    assert_eq!(fb(0.0).w_star, 0.5);
    let half = fb(0.5);
    assert_eq!(half.w_star, 0.75);
    assert!(half.constant_along_frontier);
    assert_eq!(half.frontier_l, [(1.0, 0.5), (1.5, 0.0)]);
}

#[test]
fn mediated_value_examples() {
    let sol = solve(
        &RawParams::CANONICAL.with_beta(1.0).validate().unwrap(),
        SolveOptions::default(),
    )
    .unwrap();
    let mv = mediated_value(&sol.dq, &sol.f).unwrap();
    assert_eq!(mv.u0, 1.25);
    assert_eq!(mv.w_mediated, 1.25);
    let rep = welfare_report(&sol.dq, Some(&sol.f)).unwrap();
    assert!((rep.gap - 0.25).abs() < 1e-12);
    assert!(rep.w_mediated >= rep.w_benchmark);
}

#[test]
fn client_oriented_firm_takes_the_peak() {
    let sol = solve(
        &RawParams::CANONICAL.with_beta(0.0).validate().unwrap(),
        SolveOptions::default(),
    )
    .unwrap();
    let mv = mediated_value(&sol.dq, &sol.f).unwrap();
    let peak = sol.f.values.iter().cloned().fold(f64::MIN, f64::max);
    assert_eq!(mv.w_mediated, peak);
    assert!(mv.w_mediated > mv.at_u_r && mv.at_u_r > mv.at_u_bar);
    assert!(mv.w_mediated >= benchmark_value(&sol.dq));
}

#[test]
fn degenerate_welfare() {
    let dq = DerivedQuantities::derive(&RawParams::CANONICAL.with_delta(0.5).validate().unwrap());
    let rep = welfare_report(&dq, None).unwrap();
    assert_eq!(rep.w_mediated, 0.0);
    assert_eq!(rep.gap, rep.w_star);
}

#[test]
fn sweep_gaps() {
    let deltas = [0.5, 0.62, 0.7, 0.8, 0.9, 0.99];
    for beta in [0.0, 0.5, 1.0] {
        let m = RawParams::CANONICAL.with_beta(beta).validate().unwrap();
        let rep =
            antifolk_sweep(&m, &deltas, SolveOptions::default(), Execution::default()).unwrap();
        assert!(rep.f_at_u_bar_nondecreasing);
        assert!(rep.min_gap > 0.0);
        assert_eq!(rep.rows[0].w_mediated, 0.0);
        if beta == 1.0 {
            for row in &rep.rows[1..] {
                assert!((row.gap - 0.25).abs() < 1e-12);
            }
        }
    }
    let m = RawParams::CANONICAL.validate().unwrap();
    assert!(matches!(
        antifolk_sweep(&m, &[], SolveOptions::default(), Execution::default()),
        Err(Error::Usage(_))
    ));
}

#[test]
fn sweep_csv_header() {
    let m = RawParams::CANONICAL.with_beta(1.0).validate().unwrap();
    let rep = antifolk_sweep(&m, &[0.5], SolveOptions::default(), Execution::default()).unwrap();
    assert_eq!(
        sweep_csv(&rep.rows),
        "delta,U_bar,F_at_Ubar,W_star,W_mediated,gap\n0.5,0,0,1.5,0,1.5\n"
    );
}

#[test]
fn delta_star_with_interior_crossing() {
    // with r = 1.5 the benchmark client payoff is below the frontier at U_bar
    let raw = RawParams {
        r: 1.5,
        ..RawParams::CANONICAL
    };
    let m = raw.with_beta(1.0).validate().unwrap();
    let opts = DeltaStarOptions {
        tol: 1e-4,
        ..Default::default()
    };
    let ds = find_delta_star(&m, opts).unwrap();
    assert_eq!(ds.branch, BiasBranch::High);
    assert!(ds.bracket.1 - ds.bracket.0 <= 1e-4);
    assert!(ds.delta_star > m.delta_lo() && ds.delta_star < 1.0);
    assert!(ds.warnings.is_empty());
    let at = |d: f64| {
        let sol = solve(
            &m.raw().with_delta(d).validate().unwrap(),
            SolveOptions::default(),
        )
        .unwrap();
        sol.f.eval(sol.dq.u_bar)
    };
    assert!(at(ds.bracket.0) < ds.threshold);
    assert!(at(ds.bracket.1) >= ds.threshold);
    assert!((at(ds.delta_star) - ds.threshold).abs() < 1e-3);

    let low = find_delta_star(&raw.with_beta(0.0).validate().unwrap(), opts).unwrap();
    assert_eq!(low.branch, BiasBranch::Low);
    assert_eq!(low.delta_star, m.delta_lo());
}

#[test]
fn delta_star_threshold_on_frontier() {
    // canonical threshold v_bar (w - c) / w = 0.25 equals the frontier value
    // at U_bar, which F only approaches as delta -> 1
    let m = RawParams::CANONICAL.with_beta(1.0).validate().unwrap();
    let opts = DeltaStarOptions {
        delta_max: 0.995,
        ..Default::default()
    };
    match find_delta_star(&m, opts) {
        Err(Error::NoCrossing { best, .. }) => assert!(best < 0.25 && best > 0.2499),
        other => panic!("{other:?}"),
    }
}
