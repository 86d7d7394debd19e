use gammaflow::flow_solver::{
    ordering_violation, read_support_csv, run_graph, run_lockstep, run_to_extinction, write_support_csv,
    Geometry, GraphPatch, RunOptions, SupportProfile, Trajectory,
};
use gammaflow::speed_calculus::{catalog, Speed};

fn opts(stop_radius: f64) -> RunOptions {
    RunOptions {
        stop_radius,
        stride: 20,
        ..RunOptions::default()
    }
}

/// Largest |h − (r(t) + offset·cos θ)| over a run, r(t)² = r0² − 2t/c₀.
fn offset_sphere_error(traj: &Trajectory<f64>, speed: &Speed<f64>, r0: f64, offset: f64) -> f64 {
    let c0 = speed.cylinder_constant(0).unwrap();
    let mut worst = 0.0f64;
    for s in traj.snapshots() {
        let p = s.support().unwrap();
        let r = (r0 * r0 - 2.0 * s.time / c0).sqrt();
        for j in 0..=p.grid() {
            worst = worst.max((p.values()[j] - r - offset * p.theta(j).cos()).abs());
        }
    }
    worst
}

#[test]
fn sphere_follows_the_exact_radius() {
    for speed in [Speed::<f64>::mean(2), Speed::two_harmonic(3).unwrap()] {
        let p = SupportProfile::sphere(speed.dim(), 128, 1.0).unwrap();
        let traj = run_to_extinction(&p, &speed, &opts(0.4)).unwrap();
        assert!(!traj.meta.truncated);
        let err = offset_sphere_error(&traj, &speed, 1.0, 0.0);
        assert!(err < 1e-8, "{}: {err}", speed.id());
    }
}

#[test]
fn extinction_estimate_matches_the_sphere() {
    let speed = Speed::<f64>::mean(2);
    let p = SupportProfile::sphere(2, 64, 1.0).unwrap();
    let traj = run_to_extinction(&p, &speed, &opts(0.2)).unwrap();
    assert!((traj.meta.extinction_estimate.unwrap() - 0.25).abs() < 1e-6);
}

#[test]
fn bodies_move_inward() {
    let speed = Speed::<f64>::two_harmonic(2).unwrap();
    let p = SupportProfile::ellipsoid(2, 64, 2.0, 1.0).unwrap();
    let traj = run_to_extinction(&p, &speed, &opts(0.3)).unwrap();
    for w in traj.snapshots().windows(2) {
        let (a, b) = (w[0].support().unwrap(), w[1].support().unwrap());
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| y < x));
    }
}

#[test]
fn translated_sphere_converges_at_second_order_or_better() {
    let speed = Speed::<f64>::mean(2);
    let errs: Vec<f64> = [32, 64]
        .iter()
        .map(|&n| {
            let p = SupportProfile::offset_sphere(2, n, 1.0, 0.5).unwrap();
            let traj = run_to_extinction(&p, &speed, &opts(0.5)).unwrap();
            offset_sphere_error(&traj, &speed, 1.0, 0.5)
        })
        .collect();
    let order = (errs[0] / errs[1]).log2();
    assert!(order >= 1.9, "errors {errs:?}, order {order}");
}

#[test]
fn nested_bodies_stay_ordered() {
    for speed in catalog::<f64>(2) {
        let eps: Vec<f64> = [32, 64]
            .iter()
            .map(|&n| {
                let inner = SupportProfile::offset_sphere(2, n, 1.0, 0.5).unwrap();
                let outer = SupportProfile::sphere(2, n, 2.0).unwrap();
                let runs = run_lockstep(&[inner, outer], &speed, &opts(0.5)).unwrap();
                let violation = ordering_violation(&runs[0], &runs[1]);
                let eps = offset_sphere_error(&runs[0], &speed, 1.0, 0.5)
                    .max(offset_sphere_error(&runs[1], &speed, 2.0, 0.0));
                assert!(violation <= eps, "{}: {violation} > {eps}", speed.id());
                eps
            })
            .collect();
        assert!(eps[0] / eps[1] >= 3.5, "{}: {eps:?}", speed.id());
    }
}

#[test]
fn reflection_through_the_equator_is_exact() {
    let speed = Speed::<f64>::two_harmonic(3).unwrap();
    let up = SupportProfile::offset_sphere(3, 48, 1.0, 0.3).unwrap();
    let down = SupportProfile::offset_sphere(3, 48, 1.0, -0.3).unwrap();
    let a = run_to_extinction(&up, &speed, &opts(0.6)).unwrap();
    let b = run_to_extinction(&down, &speed, &opts(0.6)).unwrap();
    let (pa, pb) = (a.last().unwrap().support().unwrap(), b.last().unwrap().support().unwrap());
    let g = pa.grid();
    for j in 0..=g {
        assert!((pa.values()[j] - pb.values()[g - j]).abs() < 1e-12);
    }
}

#[test]
fn graph_cap_agrees_with_the_support_sphere() {
    let speed = Speed::<f64>::mean(2);
    let t_end = 2e-3;
    let exact = (1.0f64 - 4.0 * t_end).sqrt();
    let center = |points: usize| {
        let cap = |x: &[f64]| -(1.0 - x[0] * x[0] - x[1] * x[1]).sqrt();
        let patch = GraphPatch::from_fn(2, -0.6, 0.6, points, cap).unwrap();
        let traj = run_graph(&patch, &speed, t_end, 0.2, 1000).unwrap();
        let Some(Geometry::Graph(g)) = traj.last().map(|s| s.geometry.clone()) else {
            panic!("graph snapshot expected");
        };
        assert!((g.time() - t_end).abs() < 1e-15);
        let mid = (points - 1) / 2;
        g.value(mid, mid)
    };
    let (coarse, fine) = (center(25), center(49));
    let graph_err = (coarse - fine).abs();
    let p = SupportProfile::sphere(2, 64, 1.0).unwrap();
    let traj = run_to_extinction(&p, &speed, &opts(exact - 0.01)).unwrap();
    let support_err = offset_sphere_error(&traj, &speed, 1.0, 0.0);
    let gap = (fine + exact).abs();
    assert!(gap <= 2.0 * (graph_err + support_err), "gap {gap}, errors {graph_err} {support_err}");
}

#[test]
fn support_csv_round_trips() {
    let p = SupportProfile::<f64>::ellipsoid(2, 32, 1.5, 1.0).unwrap();
    let back = read_support_csv::<f64>(&write_support_csv(&p), 2).unwrap();
    assert_eq!(back.values(), p.values());
    assert!(read_support_csv::<f64>("theta,h\n0,1\n0.1,1\n", 2).is_err());
}

#[test]
fn solver_runs_in_f32() {
    let speed = Speed::<f32>::mean(2);
    let p = SupportProfile::sphere(2, 32, 1.0f32).unwrap();
    let mut o = opts(0.5);
    o.stride = 50;
    let traj = run_to_extinction(&p, &speed, &o).unwrap();
    let last = traj.last().unwrap();
    let r = (1.0 - 4.0 * last.time).sqrt();
    assert!((last.support().unwrap().values()[0] - r).abs() < 1e-3);
}
