//! Runtime checks of the a priori identities and bounds satisfied by steady
//! states, plus an observational report on the small-`ε` end of a branch.

use crate::continuation::{Branch, BranchPoint, Termination};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{linf_norm, sobolev_seminorm, ModelParams, SpectralField};

pub const ENERGY_IDENTITY_TOL: f64 = 1e-6;
pub const EPS_WINDOW_TOL: f64 = 1e-8;
pub const APRIORI_SLACK: f64 = 1e-8;
/// Margin inside `(2^{r−s}, 1)` that a complete `C_1` trace must cover.
pub const COVERAGE_MARGIN: f64 = 0.02;
/// Allowed growth of `‖u‖_{Ḣ^s}` over the median of its ε-window.
pub const WINDOW_GROWTH: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport<T> {
    pub name: String,
    pub lhs: T,
    pub rhs: T,
    pub rel_error: T,
    pub pass: bool,
    /// Set when the check had nothing to inspect.
    pub vacuous: bool,
}

impl<T: Real> IdentityReport<T> {
    fn relative(lhs: T, rhs: T) -> T {
        (lhs - rhs).abs() / rhs.abs().max(T::min_positive_value())
    }

    /// Equality check at relative tolerance `tol`.
    pub fn equality(name: &str, lhs: T, rhs: T, tol: T) -> Self {
        let rel_error = Self::relative(lhs, rhs);
        Self { name: name.into(), lhs, rhs, rel_error, pass: rel_error < tol, vacuous: false }
    }

    /// One-sided check `lhs ≤ rhs (1 + slack)`.
    pub fn bound(name: &str, lhs: T, rhs: T, slack: T) -> Self {
        let rel_error = Self::relative(lhs, rhs);
        let pass = lhs <= rhs * (T::one() + slack);
        Self { name: name.into(), lhs, rhs, rel_error, pass, vacuous: false }
    }

    fn vacuous(name: &str) -> Self {
        Self {
            name: name.into(),
            lhs: T::zero(),
            rhs: T::zero(),
            rel_error: T::zero(),
            pass: true,
            vacuous: true,
        }
    }
}

/// `‖u‖²_{Ḣ^{r/2}} / ‖u‖²_{Ḣ^{s/2}}` against `ε`.
pub fn check_energy_identity<T: Real>(p: &ModelParams<T>, u: &SpectralField<T>) -> Result<IdentityReport<T>> {
    let half = T::lit(0.5);
    let hs = sobolev_seminorm(u, p.s * half);
    if hs < T::lit(1e-12) {
        return Err(Error::DegenerateField);
    }
    let hr = sobolev_seminorm(u, p.r * half);
    let ratio = hr / hs;
    Ok(IdentityReport::equality("energy_identity", ratio * ratio, p.eps, T::lit(ENERGY_IDENTITY_TOL)))
}

/// Worst energy-identity defect over the nontrivial points of a branch.
pub fn check_branch_energy_identity<T: Real>(branch: &Branch<T>) -> Result<IdentityReport<T>> {
    let mut worst: Option<IdentityReport<T>> = None;
    for pt in branch.points.iter().filter(|p| p.is_nontrivial()) {
        let p = ModelParams::new(branch.r, branch.s, pt.eps)?;
        let rep = check_energy_identity(&p, &pt.u)?;
        if worst.as_ref().is_none_or(|w| rep.rel_error > w.rel_error) {
            worst = Some(rep);
        }
    }
    Ok(worst.unwrap_or_else(|| IdentityReport::vacuous("energy_identity")))
}

/// Result of [`check_eps_window`].
#[derive(Clone, Debug, PartialEq)]
pub struct EpsWindowReport<T> {
    /// Largest nontrivial `ε` against the bound 1.
    pub window: IdentityReport<T>,
    /// Coverage of `(2^{r−s} + margin, 1 − margin)` for complete `C_1`
    /// traces; `None` when not applicable.
    pub coverage: Option<IdentityReport<T>>,
    pub min_eps: Option<T>,
    pub max_eps: Option<T>,
}

impl<T: Real> EpsWindowReport<T> {
    pub fn pass(&self) -> bool {
        self.window.pass && self.coverage.as_ref().is_none_or(|c| c.pass)
    }
}

/// Every nontrivial point must have `ε ∈ (0, 1)` (up to [`EPS_WINDOW_TOL`]).
/// A `C_1` branch whose trace ran to completion must also reach from near
/// `1` down to near `2^{r−s}`.
pub fn check_eps_window<T: Real>(branch: &Branch<T>) -> EpsWindowReport<T> {
    let eps: Vec<T> = branch.points.iter().filter(|p| p.is_nontrivial()).map(|p| p.eps).collect();
    if eps.is_empty() {
        return EpsWindowReport {
            window: IdentityReport::vacuous("eps_window"),
            coverage: None,
            min_eps: None,
            max_eps: None,
        };
    }
    let lo = eps.iter().copied().fold(T::infinity(), T::min);
    let hi = eps.iter().copied().fold(T::neg_infinity(), T::max);
    let mut window = IdentityReport::bound("eps_window", hi, T::one(), T::zero());
    window.pass = lo > T::zero() && hi < T::one() + T::lit(EPS_WINDOW_TOL);

    let complete = !matches!(branch.termination, Termination::MaxSteps | Termination::StepUnderflow);
    let coverage = match &branch.seed {
        Some(bp) if bp.k == 1 && complete => {
            let margin = T::lit(COVERAGE_MARGIN);
            let target_lo = T::lit(2.0).powf(branch.r - branch.s) + margin;
            let target_hi = T::one() - margin;
            let mut rep = IdentityReport::bound("c1_coverage", lo, target_lo, T::zero());
            rep.pass = lo <= target_lo && hi >= target_hi;
            Some(rep)
        }
        _ => None,
    };
    EpsWindowReport { window, coverage, min_eps: Some(lo), max_eps: Some(hi) }
}

/// `ε ‖u‖_{Ḣ^s} ≤ ‖u‖_{Ḣ^r} + ‖u‖_{Ḣ^1} ‖u‖_{L^∞}`.
pub fn check_apriori_hs<T: Real>(p: &ModelParams<T>, u: &SpectralField<T>) -> IdentityReport<T> {
    let lhs = p.eps * sobolev_seminorm(u, p.s);
    let rhs = sobolev_seminorm(u, p.r) + sobolev_seminorm(u, T::one()) * linf_norm(u);
    IdentityReport::bound("apriori_hs", lhs, rhs, T::lit(APRIORI_SLACK))
}

/// Worst ratio `lhs / rhs` of [`check_apriori_hs`] over all points of a branch.
pub fn check_branch_apriori_hs<T: Real>(branch: &Branch<T>) -> Result<IdentityReport<T>> {
    let score = |r: &IdentityReport<T>| {
        if r.pass {
            if r.rhs > T::zero() { r.lhs / r.rhs } else { T::zero() }
        } else {
            T::infinity()
        }
    };
    let mut worst: Option<IdentityReport<T>> = None;
    for pt in &branch.points {
        let p = ModelParams::new(branch.r, branch.s, pt.eps)?;
        let rep = check_apriori_hs(&p, &pt.u);
        if worst.as_ref().is_none_or(|w| score(&rep) > score(w)) {
            worst = Some(rep);
        }
    }
    Ok(worst.unwrap_or_else(|| IdentityReport::vacuous("apriori_hs")))
}

/// Surrogate for the `ε ≥ δ ⇒ ‖u‖_{H^s} ≤ C(δ)` bound: bin the points into
/// ε-windows of the given width and require every `‖u‖_{Ḣ^s}` to stay within
/// [`WINDOW_GROWTH`] times the median of its window.
pub fn check_hs_window_bound<T: Real>(branch: &Branch<T>, width: T) -> IdentityReport<T> {
    let mut bins: Vec<(i64, Vec<T>)> = Vec::new();
    for pt in branch.points.iter().filter(|p| p.is_nontrivial()) {
        let bin = (pt.eps / width).floor().to_i64().unwrap_or(i64::MIN);
        let norm = sobolev_seminorm(&pt.u, branch.s);
        match bins.iter_mut().find(|(b, _)| *b == bin) {
            Some((_, v)) => v.push(norm),
            None => bins.push((bin, vec![norm])),
        }
    }
    if bins.is_empty() {
        return IdentityReport::vacuous("hs_window_bound");
    }
    let mut worst = T::zero();
    for (_, mut v) in bins {
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite norms"));
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) * T::lit(0.5) };
        let ratio = v[n - 1] / median;
        if ratio > worst {
            worst = ratio;
        }
    }
    IdentityReport::bound("hs_window_bound", worst, T::lit(WINDOW_GROWTH), T::zero())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trend {
    Increasing,
    Decreasing,
    Constant,
    Mixed,
}

impl Trend {
    fn of<T: Real>(values: &[T]) -> Self {
        let (mut up, mut down) = (false, false);
        for w in values.windows(2) {
            if w[1] > w[0] {
                up = true;
            } else if w[1] < w[0] {
                down = true;
            }
        }
        match (up, down) {
            (false, false) => Trend::Constant,
            (true, false) => Trend::Increasing,
            (false, true) => Trend::Decreasing,
            (true, true) => Trend::Mixed,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Trend::Increasing => "increasing",
            Trend::Decreasing => "decreasing",
            Trend::Constant => "constant",
            Trend::Mixed => "mixed",
        }
    }
}

/// Which small-`ε` alternative the tail of a branch looks like: (i) the
/// `Ḣ^{s/2}` seminorm grows, (ii) the sup norm decays.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alternative {
    SeminormGrowth,
    SupDecay,
    Both,
    Neither,
}

impl Alternative {
    pub fn as_str(&self) -> &'static str {
        match self {
            Alternative::SeminormGrowth => "seminorm_growth",
            Alternative::SupDecay => "sup_decay",
            Alternative::Both => "both",
            Alternative::Neither => "neither",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmallEpsReport<T> {
    /// Points inspected (the last ten, or fewer).
    pub window: usize,
    pub eps_range: (T, T),
    pub seminorm: Vec<T>,
    pub sup: Vec<T>,
    pub seminorm_trend: Trend,
    pub sup_trend: Trend,
    pub consistent_with: Alternative,
}

/// Trend report over the last ten points of a sequence ordered by
/// decreasing `ε`. Observational only.
pub fn check_small_eps_alternative<T: Real>(s: T, points: &[BranchPoint<T>]) -> Option<SmallEpsReport<T>> {
    if points.is_empty() {
        return None;
    }
    let tail = &points[points.len().saturating_sub(10)..];
    let half = T::lit(0.5);
    let seminorm: Vec<T> = tail.iter().map(|p| sobolev_seminorm(&p.u, s * half)).collect();
    let sup: Vec<T> = tail.iter().map(|p| linf_norm(&p.u)).collect();
    let seminorm_trend = Trend::of(&seminorm);
    let sup_trend = Trend::of(&sup);
    let consistent_with = match (seminorm_trend == Trend::Increasing, sup_trend == Trend::Decreasing) {
        (true, true) => Alternative::Both,
        (true, false) => Alternative::SeminormGrowth,
        (false, true) => Alternative::SupDecay,
        (false, false) => Alternative::Neither,
    };
    Some(SmallEpsReport {
        window: tail.len(),
        eps_range: (tail[0].eps, tail[tail.len() - 1].eps),
        seminorm,
        sup,
        seminorm_trend,
        sup_trend,
        consistent_with,
    })
}

/// Every check for one branch. The small-ε report never affects `pass`.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchDiagnostics<T> {
    pub energy_identity: IdentityReport<T>,
    pub eps_window: EpsWindowReport<T>,
    pub apriori_hs: IdentityReport<T>,
    pub hs_window: IdentityReport<T>,
    pub small_eps: Option<SmallEpsReport<T>>,
}

impl<T: Real> BranchDiagnostics<T> {
    pub fn pass(&self) -> bool {
        self.energy_identity.pass && self.eps_window.pass() && self.apriori_hs.pass && self.hs_window.pass
    }
}

pub fn diagnose_branch<T: Real>(branch: &Branch<T>) -> Result<BranchDiagnostics<T>> {
    let mut ordered: Vec<BranchPoint<T>> = branch.points.iter().filter(|p| p.is_nontrivial()).cloned().collect();
    ordered.sort_by(|a, b| b.eps.partial_cmp(&a.eps).expect("finite eps"));
    Ok(BranchDiagnostics {
        energy_identity: check_branch_energy_identity(branch)?,
        eps_window: check_eps_window(branch),
        apriori_hs: check_branch_apriori_hs(branch)?,
        hs_window: check_hs_window_bound(branch, T::lit(0.1)),
        small_eps: check_small_eps_alternative(branch.s, &ordered),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifurcation::{seed_from_bifurcation, BifurcationPoint};
    use crate::steady::{newton_solve, NewtonConfig};
    use approx::assert_relative_eq;

    fn point(eps: f64, u: SpectralField<f64>) -> BranchPoint<f64> {
        let l2 = u.l2_norm();
        BranchPoint { eps, u, arclength: 0.0, l2, jac_min_sv: 1.0, det_sign: 1, zero_count: 0 }
    }

    fn branch(points: Vec<BranchPoint<f64>>, k: Option<usize>, termination: Termination) -> Branch<f64> {
        Branch {
            r: 0.5,
            s: 1.5,
            seed: k.map(|k| BifurcationPoint::new(k, 0.5, 1.5).unwrap()),
            points,
            termination,
        }
    }

    #[test]
    fn single_mode_ratio_is_exact() {
        for k in 1..6usize {
            let sigma = (k as f64).powf(-1.0);
            let p = ModelParams::new(0.5, 1.5, sigma).unwrap();
            let rep = check_energy_identity(&p, &SpectralField::mode(8, k, 0.3)).unwrap();
            assert_relative_eq!(rep.lhs, sigma, max_relative = 1e-14);
            assert!(rep.pass);
        }
    }

    #[test]
    fn two_mode_field_fails() {
        let p = ModelParams::new(0.5, 1.5, 0.7).unwrap();
        let u = SpectralField::new(vec![1.0, 0.5]).unwrap();
        let rep = check_energy_identity(&p, &u).unwrap();
        // direct: Σ k^r a_k² / Σ k^s a_k²
        let expected = (1.0 + 0.25 * 2f64.sqrt()) / (1.0 + 0.25 * 2f64.powf(1.5));
        assert_relative_eq!(rep.lhs, expected, max_relative = 1e-14);
        assert!(!rep.pass);
    }

    #[test]
    fn zero_field_is_degenerate() {
        let p = ModelParams::new(0.5, 1.5, 0.7).unwrap();
        assert!(matches!(check_energy_identity(&p, &SpectralField::zeros(4)), Err(Error::DegenerateField)));
    }

    #[test]
    fn converged_root_satisfies_identity() {
        let bp = BifurcationPoint::new(1, 0.5, 1.5).unwrap();
        let t = (-0.2f64 / bp.ddot_omega).sqrt();
        let seed = seed_from_bifurcation(&bp, t, 32);
        let p = ModelParams::new(0.5, 1.5, 0.8).unwrap();
        let out = newton_solve(&p, &seed.u, &NewtonConfig::with_tol(1e-10)).unwrap();
        let rep = check_energy_identity(&p, &out.u).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!((rep.lhs - 0.8f64).abs() < 1e-6);
        assert!(check_apriori_hs(&p, &out.u).pass);
    }

    #[test]
    fn apriori_zero_passes() {
        let p = ModelParams::new(0.5, 1.5, 0.3).unwrap();
        let rep = check_apriori_hs(&p, &SpectralField::zeros(8));
        assert!(rep.pass);
        assert_eq!(rep.lhs, 0.0);
    }

    #[test]
    fn apriori_negative_control() {
        // a rough non-solution with ε large violates the bound
        let p = ModelParams::new(0.5, 1.5, 5.0).unwrap();
        let u = SpectralField::mode(32, 30, 1e-3);
        assert!(!check_apriori_hs(&p, &u).pass);
    }

    #[test]
    fn eps_window_cases() {
        let empty = branch(vec![point(0.5, SpectralField::zeros(4))], Some(1), Termination::LeftDomain);
        let rep = check_eps_window(&empty);
        assert!(rep.pass() && rep.window.vacuous);

        let bad = branch(vec![point(1.01, SpectralField::mode(4, 1, 0.1))], Some(2), Termination::LeftDomain);
        assert!(!check_eps_window(&bad).pass());

        let edge = branch(vec![point(1.0 - 1e-9, SpectralField::mode(4, 1, 0.1))], None, Termination::LeftDomain);
        assert!(check_eps_window(&edge).pass());

        let pts: Vec<_> = (0..60).map(|i| point(0.99 - 0.01 * i as f64, SpectralField::mode(4, 1, 0.1))).collect();
        let c1 = branch(pts.clone(), Some(1), Termination::LeftDomain);
        let rep = check_eps_window(&c1);
        assert!(rep.coverage.as_ref().unwrap().pass && rep.pass());

        let short = branch(pts[..20].to_vec(), Some(1), Termination::LeftDomain);
        assert!(!check_eps_window(&short).pass());
        let capped = branch(pts[..20].to_vec(), Some(1), Termination::MaxSteps);
        assert!(check_eps_window(&capped).coverage.is_none());
    }

    #[test]
    fn small_eps_trends() {
        let trivial: Vec<_> = (0..5).map(|i| point(0.9 - 0.1 * i as f64, SpectralField::zeros(4))).collect();
        let rep = check_small_eps_alternative(1.5, &trivial).unwrap();
        assert!(rep.seminorm.iter().chain(&rep.sup).all(|v| *v == 0.0));
        assert_eq!(rep.consistent_with, Alternative::Neither);

        let decaying: Vec<_> = (0..12)
            .map(|i| point(0.9 - 0.05 * i as f64, SpectralField::mode(4, 1, 1.0 / (1.0 + i as f64))))
            .collect();
        let rep = check_small_eps_alternative(1.5, &decaying).unwrap();
        assert_eq!(rep.window, 10);
        assert_eq!(rep.sup_trend, Trend::Decreasing);
        assert_eq!(rep.consistent_with, Alternative::SupDecay);

        let growing: Vec<_> = (0..12).map(|i| point(0.9 - 0.05 * i as f64, SpectralField::mode(4, 2, 1.0 + i as f64))).collect();
        assert_eq!(check_small_eps_alternative(1.5, &growing).unwrap().consistent_with, Alternative::SeminormGrowth);
        assert!(check_small_eps_alternative::<f64>(1.5, &[]).is_none());
    }

    #[test]
    fn window_bound_flags_spikes() {
        let mut pts: Vec<_> = (0..9).map(|i| point(0.61 + 0.01 * i as f64, SpectralField::mode(4, 1, 1.0))).collect();
        let b = branch(pts.clone(), None, Termination::LeftDomain);
        assert!(check_hs_window_bound(&b, 0.1).pass);
        pts.push(point(0.655, SpectralField::mode(4, 1, 100.0)));
        let b = branch(pts, None, Termination::LeftDomain);
        assert!(!check_hs_window_bound(&b, 0.1).pass);
    }
}
