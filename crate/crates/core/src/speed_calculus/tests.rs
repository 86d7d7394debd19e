use super::*;
use crate::linalg::SymMatrix;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn catalog_values() {
    let h = Speed::<f64>::mean(3);
    assert_eq!(h.eval(&[1.0, 2.0, 3.0]).unwrap(), 6.0);
    let t = Speed::<f64>::two_harmonic(3).unwrap();
    assert!(close(t.eval(&[1.0, 1.0, 1.0]).unwrap(), 2.0 / 3.0, 1e-15));
    assert!(close(t.eval(&[0.0, 1.0, 1.0]).unwrap(), 0.4, 1e-15));
    let p = Speed::<f64>::power_mean(2, 2.0).unwrap();
    assert!(close(p.eval(&[1.0, 1.0]).unwrap(), 2.0, 1e-15));
}

#[test]
fn ids_round_trip() {
    for id in ["mean", "two-harmonic", "harmonic-k:1", "power-mean:-2", "restrict:two-harmonic:1"] {
        let s = Speed::<f64>::from_id(id, 2).unwrap();
        assert_eq!(s.id(), id);
        assert_eq!(s.dim(), 2);
    }
    assert!(matches!(
        Speed::<f64>::from_id("gauss", 2),
        Err(FlowError::UnknownSpeed(_))
    ));
    assert!(Speed::<f64>::from_id("restrict:power-mean:2:1", 2).is_err());
}

#[test]
fn restriction_matches_padded_parent() {
    let t = Speed::<f64>::two_harmonic(3).unwrap();
    let r = t.restrict(1).unwrap();
    assert!(close(r.eval(&[1.0, 1.0]).unwrap(), 0.4, 1e-15));
    let l = [0.7, 1.9];
    let closed = 1.0 / (1.0 / l[0] + 1.0 / l[1] + 1.0 / (l[0] + l[1]));
    assert!(close(r.eval(&l).unwrap(), closed, 1e-14));
    assert!(t.restrict(2).is_err());
}

#[test]
fn structural_constants() {
    assert_eq!(Speed::<f64>::mean(4).mbar(), 3);
    assert_eq!(Speed::<f64>::two_harmonic(3).unwrap().mbar(), 1);
    assert_eq!(Speed::<f64>::power_mean(3, 0.5).unwrap().mbar(), 0);
    assert!(close(Speed::<f64>::mean(3).cylinder_constant(1).unwrap(), 0.5, 1e-15));
    assert!(close(
        Speed::<f64>::two_harmonic(3).unwrap().cylinder_constant(1).unwrap(),
        2.5,
        1e-14
    ));
    assert!(Speed::<f64>::two_harmonic(3).unwrap().cylinder_constant(2).is_err());
}

#[test]
fn star_and_dagger() {
    let h = Speed::<f64>::mean(2);
    assert!(close(h.gamma_star(&[1.0, 1.0]).unwrap(), 0.5, 1e-15));
    assert!(close(h.gamma_dagger(&[2.0, 2.0]).unwrap(), -1.0, 1e-15));
    assert!(h.gamma_star(&[1.0, 0.0]).is_err());
}

#[test]
fn cone_distance_examples() {
    let h = Speed::<f64>::mean(2);
    let p = ConeSpec::positive(2);
    assert!(close(cone_distance(&p, &h, &[1.0, 1.0]).distance, 0.5, 1e-15));
    let t = Speed::<f64>::two_harmonic(3).unwrap();
    let d = t.cone_distance(&[0.0, 1.0, 1.0]);
    assert!(close(d.distance, 1.0 / (2f64.sqrt() * 0.4), 1e-14));
    assert!(h.cone_distance(&[1.0, 1.0]).distance.is_infinite());
    let out = t.cone_distance(&[-1.0, 1.0, 1.0]);
    assert!(out.on_boundary && out.distance == 0.0);
}

#[test]
fn analytic_jets_match_finite_differences() {
    let points: [&[f64]; 3] = [&[1.0, 2.0, 3.0], &[0.3, 1.1, 0.9], &[-0.2, 1.0, 2.0]];
    for s in catalog::<f64>(3) {
        for &l in &points {
            if !s.cone().contains(l) {
                continue;
            }
            let jet = s.jet(l).unwrap();
            let fd = finite_difference_jet(|x| s.eval(x).unwrap(), l);
            for i in 0..3 {
                assert!(close(jet.gradient[i], fd.gradient[i], 1e-6), "{} grad", s.id());
                for j in 0..3 {
                    assert!(
                        close(jet.hessian[(i, j)], fd.hessian[(i, j)], 1e-4),
                        "{} hess {i}{j}: {} vs {}",
                        s.id(),
                        jet.hessian[(i, j)],
                        fd.hessian[(i, j)]
                    );
                }
            }
        }
    }
}

#[test]
fn star_jet_witness_at_unit_point() {
    let r = Speed::<f64>::two_harmonic(3).unwrap().restrict(1).unwrap();
    let jet = r.gamma_star_jet(&[1.0, 1.0]).unwrap();
    let ev = SymMatrix::from_dense(&jet.hessian).eigenvalues().unwrap();
    assert!(close(ev[0], -0.5, 1e-12));
    assert!(ev[1].abs() < 1e-12);
}

#[test]
fn matrix_quadform_degenerate_and_radial() {
    let t = Speed::<f64>::two_harmonic(3).unwrap();
    let a = SymMatrix::identity(3);
    assert!(matrix_hessian_quadform(&t, &a, &a).unwrap().abs() < 1e-12);
    let b = SymMatrix::from_fn(3, |i, j| if i == j { 0.0 } else { 1.0 });
    let q = matrix_hessian_quadform(&t, &a, &b).unwrap();
    let h = 1e-4;
    let f = |s: f64| matrix_speed(&t, &a.axpy(s, &b)).unwrap();
    let fd = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
    assert!(close(q, fd, 1e-5), "{q} vs {fd}");
}

#[test]
fn f32_evaluation() {
    let t = Speed::<f32>::from_id("two-harmonic", 3).unwrap();
    assert!((t.eval(&[1.0, 1.0, 1.0]).unwrap() - 2.0 / 3.0).abs() < 1e-6);
}
