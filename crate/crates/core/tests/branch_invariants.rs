use std::sync::OnceLock;

use nlks_core::bifurcation::{detect_singularities, seed_from_bifurcation};
use nlks_core::continuation::{steady_state_at, trace_branch, BranchSeed, KsProblem, Termination};
use nlks_core::diagnostics::{check_apriori_hs, check_energy_identity, diagnose_branch};
use nlks_core::steady::{newton_solve, residual};
use nlks_core::{BifurcationPoint, Branch, BranchPoint, ContinuationConfig, Field, NewtonConfig, Params};
use proptest::prelude::*;

const R: f64 = 0.5;
const S: f64 = 1.5;
const MODES: usize = 64;

fn config() -> ContinuationConfig {
    ContinuationConfig {
        modes: MODES,
        newton: NewtonConfig::with_tol(1e-10),
        eps_floor: 0.3,
        ..ContinuationConfig::default()
    }
}

fn trace(k: usize, t0: f64) -> Branch {
    let cfg = config();
    let bp = BifurcationPoint::new(k, R, S).unwrap();
    let seed = seed_from_bifurcation(&bp, t0, MODES);
    let p = Params::new(R, S, seed.eps).unwrap();
    let u = newton_solve(&p, &seed.u, &cfg.newton).unwrap().u;
    trace_branch(R, S, &BranchSeed { u, ..seed }, Some(bp), &cfg).unwrap()
}

fn c1() -> &'static (Branch, Branch) {
    static C1: OnceLock<(Branch, Branch)> = OnceLock::new();
    C1.get_or_init(|| (trace(1, 0.05), trace(1, -0.05)))
}

#[test]
fn branch_structure() {
    let (b, _) = c1();
    let cfg = config();
    assert_eq!(b.termination, Termination::LeftDomain);
    assert!(b.points.len() > 10);
    for w in b.points.windows(2) {
        assert!(w[1].arclength > w[0].arclength);
        let jump = (&w[1].u - &w[0].u).l2_norm() + (w[1].eps - w[0].eps).abs();
        assert!(jump <= 2.0 * cfg.ds_max, "jump {jump}");
    }
    for pt in &b.points {
        let p = Params::new(R, S, pt.eps).unwrap();
        assert!(residual(&p, &pt.u).inf_norm < 1e-10);
        assert!((pt.l2 - pt.u.l2_norm()).abs() < 1e-10);
        assert_eq!(pt.zero_count, 2);
    }
    // only the final point may leave the domain
    let n = b.points.len();
    assert!(b.points[..n - 1].iter().all(|p| p.eps >= cfg.eps_floor));
}

#[test]
fn diagnostics_pass_on_traced_branch() {
    let (b, _) = c1();
    let d = diagnose_branch(b).unwrap();
    assert!(d.pass(), "{d:?}");
    // eps_floor = 0.3 still lies below 0.52, so the coverage check applies
    assert!(d.eps_window.coverage.as_ref().is_some_and(|c| c.pass));
}

#[test]
fn half_period_shift_maps_half_branches() {
    let (plus, minus) = c1();
    assert_eq!(plus.points.len(), minus.points.len());
    for (a, b) in plus.points.iter().zip(&minus.points) {
        assert!((a.eps - b.eps).abs() < 1e-9);
        assert!((&a.u.half_period_shift() - &b.u).l2_norm() < 1e-8);
    }
}

#[test]
fn higher_branches_are_rescaled_first_branch() {
    // w(x) = k^{r−1} u(kx) solves the problem at ε k^{r−s}
    let m = 32;
    let bp = BifurcationPoint::new(1, R, S).unwrap();
    let t = (-0.4 / bp.ddot_omega).sqrt();
    let p = Params::new(R, S, 0.8).unwrap();
    let u = newton_solve(&p, &seed_from_bifurcation(&bp, t, m).u, &NewtonConfig::with_tol(1e-12)).unwrap().u;
    for k in 2..=4usize {
        let mut w = vec![0.0; k * m];
        for (j, a) in u.coeffs().iter().enumerate() {
            w[k * (j + 1) - 1] = (k as f64).powf(R - 1.0) * a;
        }
        let w = Field::new(w).unwrap();
        let pk = Params::new(R, S, 0.8 * (k as f64).powf(R - S)).unwrap();
        assert!(residual(&pk, &w).inf_norm < 1e-11);
        assert!(check_energy_identity(&pk, &w).unwrap().pass);
    }
}

#[test]
fn trivial_branch_flags_first_two_bifurcations() {
    let problem = KsProblem::new(R, S, 16).unwrap();
    let points: Vec<BranchPoint> = (0..40)
        .map(|i| {
            let eps = 1.23 - 0.02 * i as f64;
            BranchPoint::measure(&problem, eps, Field::zeros(16), 0.02 * i as f64)
        })
        .collect();
    let b = Branch { r: R, s: S, seed: None, points, termination: Termination::LeftDomain };
    let flagged = detect_singularities(&b);
    let eps: Vec<f64> = flagged.iter().map(|&i| b.points[i].eps).collect();
    assert_eq!(flagged.len(), 2, "{eps:?}");
    // each flag sits on the first point past σ_k
    assert!(eps[0] < 1.0 && eps[0] > 0.98);
    assert!(eps[1] < 0.5 && eps[1] > 0.48);
}

#[test]
fn steady_state_at_matches_direct_newton() {
    let (b, _) = c1();
    let u = steady_state_at(b, 0.75, &NewtonConfig::with_tol(1e-12)).unwrap();
    let p = Params::new(R, S, 0.75).unwrap();
    assert!(residual(&p, &u).inf_norm < 1e-12);
    assert_eq!(nlks_core::bifurcation::count_zeros(&u).unwrap(), 2);
    assert!(steady_state_at(b, 0.1, &NewtonConfig::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Newton roots seeded anywhere along the local C_1 parabola are
    /// certified by the energy identity and satisfy the a priori bound.
    #[test]
    fn converged_roots_are_certified(eps in 0.6f64..0.995, sign in prop::bool::ANY) {
        let bp = BifurcationPoint::new(1, R, S).unwrap();
        let t = (2.0 * (eps - 1.0) / bp.ddot_omega).sqrt() * if sign { 1.0 } else { -1.0 };
        let guess = seed_from_bifurcation(&bp, t, 32).u;
        let p = Params::new(R, S, eps).unwrap();
        let out = newton_solve(&p, &guess, &NewtonConfig::with_tol(1e-10)).unwrap();
        prop_assert!(out.u.l2_norm() > 1e-8);
        prop_assert!(check_energy_identity(&p, &out.u).unwrap().pass);
        prop_assert!(check_apriori_hs(&p, &out.u).pass);
    }
}
