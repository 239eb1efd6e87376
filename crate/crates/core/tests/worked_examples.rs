mod common;

use horizon_core::balance::{equilibrium_to_root, BalanceLaw, RootSearch};
use horizon_core::correspondence::{analyze, transversal_pair, transversal_vector_k1};
use horizon_core::desing::DesingField;
use horizon_core::flow::{integrate, kappa_growth_residual, rate_check, t_max, FitStatus, FlowOptions};
use horizon_core::linalg::{self, C64};
use horizon_core::nalgebra::{DMatrix, DVector};
use horizon_core::system::SystemDef;
use horizon_core::Error;

fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!((got - want).abs() <= tol, "{what}: got {got}, want {want}");
}

#[test]
fn wwl_k1_transversal_pair_is_an_eigenpair() {
    let sys = common::wwl_k1();
    let df = DesingField::build(&sys);
    let traj = integrate(&df, 0.02, &[0.7, 0.1, 0.1, 0.1], &FlowOptions::default());
    assert!(traj.converged(), "{:?}", traj.status);
    let tm = t_max(&df, &traj).unwrap();
    assert!(tm.consistent);
    let last = traj.last();
    let dec = df.decompose_at_equilibrium(last.t, &last.x).unwrap();
    let tp = transversal_pair(&dec, 1.0, df.c()).unwrap();
    assert!(tp.residual < 1e-10);
    assert_eq!(tp.vector[0], 1.0);
    // The closed form agrees with a numerically computed eigenvector.
    let w = linalg::eigenvector(&dec.dg, C64::new(-dec.c_star, 0.0));
    let w = &w / w[0];
    for i in 0..w.len() {
        assert!((w[i].re - tp.vector[i]).abs() < 1e-8 && w[i].im.abs() < 1e-8, "{w} vs {}", tp.vector);
    }
}

#[test]
fn painleve_rates_from_a_finite_start() {
    let sys = common::painleve1();
    let df = DesingField::build(&sys);
    let bl = BalanceLaw::new(&sys);
    let x0 = df.spec.embed(0.0, &[3.0, 5.0]).x;
    let traj = integrate(&df, 0.0, &x0, &FlowOptions::default());
    let tm = t_max(&df, &traj).unwrap();
    let roots = bl.find_roots(tm.value, &RootSearch::default());
    let fit = rate_check(&df, &traj, &tm, &roots[0].y0);
    assert_eq!(fit.status, FitStatus::Pass);
    for c in &fit.components {
        assert_close(c.slope, c.expected_slope, 1e-3, "slope");
        assert_close(c.coefficient, c.expected_coefficient, 1e-3 * c.expected_coefficient, "coefficient");
    }
    assert!(kappa_growth_residual(&traj, 1e-6).unwrap() < 1e-5);
}

#[test]
fn wwl_k2_rates() {
    let sys = common::wwl_k2();
    let df = DesingField::build(&sys);
    let bl = BalanceLaw::new(&sys);
    let traj = integrate(&df, 0.02, &[0.7, 0.1, 0.1, 0.1], &FlowOptions::default());
    let tm = t_max(&df, &traj).unwrap();
    let l = traj.last();
    let roots = bl.find_roots(tm.value, &RootSearch::default());
    let root = roots
        .iter()
        .find(|r| r.y0[0].signum() == l.x[0].signum() && r.y0[2].signum() == l.x[2].signum())
        .unwrap();
    let fit = rate_check(&df, &traj, &tm, &root.y0);
    assert_eq!(fit.status, FitStatus::Pass, "{fit:?}");
    for c in &fit.components {
        assert_close(c.slope, -sys.sig.alpha_f(c.index) / sys.k(), 1e-2, "slope");
    }
}

#[test]
fn correspondence_holds_on_every_system() {
    for sys in common::all() {
        let (lo, hi) = common::t_window(&sys.name);
        let df = DesingField::build(&sys);
        let bl = BalanceLaw::new(&sys);
        for t in [lo, 0.5 * (lo + hi), hi] {
            let roots = bl.find_roots(t, &RootSearch::default());
            assert!(!roots.is_empty(), "{} t = {t}", sys.name);
            for r in &roots {
                let rep = analyze(&bl, &df, r).unwrap();
                assert!(rep.spectrum_mismatch < 1e-10, "{} t = {t}", sys.name);
                assert!(rep.max_vector_residual() < 1e-9, "{} t = {t}: {}", sys.name, rep.max_vector_residual());
                assert!(rep.stability_gap_holds(), "{} t = {t}", sys.name);
            }
        }
    }
}

#[test]
fn repeated_transversal_eigenvalue_maps_back() {
    // m = −1 makes the x-block of Dg a multiple of the identity.
    let sys = common::selfsimilar();
    let df = DesingField::build(&sys);
    let bl = BalanceLaw::new(&sys);
    for t in [0.5, 1.0, 2.0, 3.0] {
        for r in bl.find_roots(t, &RootSearch::default()) {
            let rep = analyze(&bl, &df, &r).unwrap();
            for m in &rep.tangential {
                assert!(m.reverse_residual.unwrap_or(0.0) < 1e-9, "t = {t}: {m:?}");
            }
        }
    }
}

#[test]
fn wwl_k2_has_no_roots_where_the_driver_is_positive() {
    let sys = common::wwl_k2();
    let bl = BalanceLaw::new(&sys);
    for t in [0.2, std::f64::consts::PI, 3.3] {
        let roots = bl.find_roots(t, &RootSearch::default());
        assert!(roots.iter().all(|r| r.y0.iter().all(|v| v.abs() < 1e-8)) || roots.is_empty(), "t = {t}: {roots:?}");
    }
}

#[test]
fn vanishing_c_star_is_degenerate() {
    let flat = SystemDef::parse("flat", &["u", "v"], vec![1, 1], 1.0, &["0", "0"], &["0", "0"], &[]).unwrap();
    let df = DesingField::build(&flat);
    let bl = BalanceLaw::new(&flat);
    let err = equilibrium_to_root(&bl, &df, 0.0, &[1.0, 0.0]).unwrap_err();
    assert!(matches!(err, Error::DegenerateEquilibrium { .. }), "{err}");
}

#[test]
fn vanishing_d_denominator_is_reported() {
    let a_g = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
    let v = DVector::from_vec(vec![1.0, 0.0]);
    let grad_p = DVector::from_vec(vec![0.0, 1.0]);
    let dtg = DVector::from_vec(vec![0.3, 0.4]);
    let err = transversal_vector_k1(&a_g, 3.0, 1.0, &v, &grad_p, &dtg).unwrap_err();
    assert!(matches!(err, Error::FormulaDegenerate { .. }), "{err}");
}
