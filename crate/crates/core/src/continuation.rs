//! Pseudo-arclength continuation.
//!
//! The generic machinery works on any [`ContinuationProblem`]
//! `F(λ, x) = 0` with `x ∈ ℝⁿ`: tangents are unit null vectors of
//! `[∂_x F | ∂_λ F]`, and the corrector solves the square bordered system
//!
//! ```text
//! F(λ, x) = 0,    ⟨(λ, x) − (λ_b, x_b), τ⟩_W − ds = 0
//! ```
//!
//! by Newton's method, which stays regular through folds. The inner product
//! weights the parameter by 1 and every state coordinate by
//! [`ContinuationProblem::state_weight`].
//!
//! [`KsProblem`], [`tangent`], [`keller_correct`] and [`trace_branch`]
//! specialize this to the steady states of the nonlocal KS equation with
//! `λ = ε` and `x` the sine coefficients, weighted so the state part of the
//! metric is the L² norm.

use crate::bifurcation::{count_zeros, BifurcationPoint};
use crate::error::{Error, Result};
use crate::linalg::{norm_inf, null_vector, Lu, Matrix};
use crate::scalar::Real;
use crate::spectral::{validate_exponents, ModelParams, SpectralField};
use crate::steady::{NewtonConfig, SteadyOperator};

/// A parameter-dependent nonlinear system `F(λ, x) = 0`.
pub trait ContinuationProblem<T: Real> {
    fn dim(&self) -> usize;

    fn residual(&self, lambda: T, x: &[T]) -> Vec<T>;

    /// Norm used for the corrector stopping test.
    fn residual_norm(&self, _lambda: T, _x: &[T], f: &[T]) -> T {
        norm_inf(f)
    }

    /// `(∂_x F, ∂_λ F)`.
    fn jacobians(&self, lambda: T, x: &[T]) -> (Matrix<T>, Vec<T>);

    /// Weight of each state coordinate in the arclength metric.
    fn state_weight(&self) -> T {
        T::one()
    }
}

/// Unit tangent `(δλ, δx)` in the weighted metric.
#[derive(Clone, Debug, PartialEq)]
pub struct Tangent<T> {
    pub lambda: T,
    pub state: Vec<T>,
}

impl<T: Real> Tangent<T> {
    /// Weighted inner product `δλ δλ' + w ⟨δx, δx'⟩`.
    pub fn dot(&self, other: &Self, weight: T) -> T {
        let s = self
            .state
            .iter()
            .zip(&other.state)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        self.lambda * other.lambda + weight * s
    }

    pub fn norm(&self, weight: T) -> T {
        self.dot(self, weight).sqrt()
    }

    fn normalized(mut self, weight: T) -> Self {
        let n = self.norm(weight);
        self.lambda = self.lambda / n;
        for v in self.state.iter_mut() {
            *v = *v / n;
        }
        self
    }

    fn negated(mut self) -> Self {
        self.lambda = -self.lambda;
        for v in self.state.iter_mut() {
            *v = -*v;
        }
        self
    }
}

/// A point `(λ, x)` on a traced curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint<T> {
    pub lambda: T,
    pub state: Vec<T>,
    /// Cumulative pseudo-arclength from the start of the trace.
    pub arclength: T,
}

fn weighted_distance<T: Real>(a: &CurvePoint<T>, b: &CurvePoint<T>, weight: T) -> T {
    let s = a
        .state
        .iter()
        .zip(&b.state)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y));
    ((a.lambda - b.lambda) * (a.lambda - b.lambda) + weight * s).sqrt()
}

/// Corrector and step-size policy shared by every trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl<T> {
    pub ds0: T,
    pub ds_min: T,
    pub ds_max: T,
    pub max_steps: usize,
    /// Corrector stops when `max(|F|, |constraint|)` drops below this.
    pub tol: T,
    pub max_iter: usize,
    /// Step growth factor applied after `success_window` accepted steps.
    pub growth: T,
    pub success_window: usize,
    /// Relative threshold for declaring the bordered matrix rank deficient.
    pub rank_tol: T,
}

impl<T: Real> Default for StepControl<T> {
    fn default() -> Self {
        Self {
            ds0: T::lit(0.01),
            ds_min: T::lit(1e-6),
            ds_max: T::lit(0.05),
            max_steps: 1000,
            tol: T::lit(1e-4),
            max_iter: 12,
            growth: T::lit(1.3),
            success_window: 3,
            rank_tol: T::lit(1e-12),
        }
    }
}

impl<T: Real> StepControl<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.ds_min > T::zero() && self.ds_min <= self.ds0 && self.ds0 <= self.ds_max) {
            return Err(Error::InvalidArgument(format!(
                "step sizes must satisfy 0 < ds_min <= ds0 <= ds_max (got {}, {}, {})",
                self.ds_min, self.ds0, self.ds_max
            )));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidArgument("corrector tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Why a trace stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Termination {
    LeftDomain,
    MaxSteps,
    StepUnderflow,
    HitTrivial,
    InstabilityDetected,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::LeftDomain => "left_domain",
            Termination::MaxSteps => "max_steps",
            Termination::StepUnderflow => "step_underflow",
            Termination::HitTrivial => "hit_trivial",
            Termination::InstabilityDetected => "instability_detected",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "left_domain" => Termination::LeftDomain,
            "max_steps" => Termination::MaxSteps,
            "step_underflow" => Termination::StepUnderflow,
            "hit_trivial" => Termination::HitTrivial,
            "instability_detected" => Termination::InstabilityDetected,
            _ => return None,
        })
    }
}

/// Decision returned by the per-point hook of [`trace_curve`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointVerdict {
    /// Keep the point and continue.
    Accept,
    /// Keep the point, then stop.
    AcceptAndStop(Termination),
    /// Drop the point and stop.
    Stop(Termination),
}

/// Unit tangent of the solution curve at `(λ, x)`.
///
/// Oriented to have positive inner product with `previous` when given;
/// otherwise `δλ > 0` (or, on vertical tangents, the first significant state
/// component positive).
pub fn curve_tangent<T: Real, P: ContinuationProblem<T>>(
    problem: &P,
    lambda: T,
    x: &[T],
    previous: Option<&Tangent<T>>,
    rank_tol: T,
) -> Result<Tangent<T>> {
    let (jx, jl) = problem.jacobians(lambda, x);
    let z = null_vector(&jx.with_column(&jl), rank_tol)?;
    let n = problem.dim();
    let w = problem.state_weight();
    let t = Tangent { lambda: z[n], state: z[..n].to_vec() }.normalized(w);
    let flip = match previous {
        Some(prev) => t.dot(prev, w) < T::zero(),
        None => {
            let big = T::lit(1e-12);
            if t.lambda.abs() > big {
                t.lambda < T::zero()
            } else {
                t.state.iter().find(|v| v.abs() > big).is_some_and(|v| *v < T::zero())
            }
        }
    };
    Ok(if flip { t.negated() } else { t })
}

/// Result of one corrector solve.
#[derive(Clone, Debug, PartialEq)]
pub struct Corrected<T> {
    pub point: CurvePoint<T>,
    pub iterations: usize,
    pub residual: T,
}

/// Newton solve of the bordered system starting from the predictor
/// `base + ds τ`.
///
/// `ds = 0` returns `base`. Any other `|ds| < ds_min` is a
/// [`Error::StepUnderflow`].
pub fn correct_step<T: Real, P: ContinuationProblem<T>>(
    problem: &P,
    base: &CurvePoint<T>,
    tangent: &Tangent<T>,
    ds: T,
    ctl: &StepControl<T>,
) -> Result<Corrected<T>> {
    if ds.is_zero() {
        let f = problem.residual(base.lambda, &base.state);
        let residual = problem.residual_norm(base.lambda, &base.state, &f);
        return Ok(Corrected { point: base.clone(), iterations: 0, residual });
    }
    if ds.abs() < ctl.ds_min {
        return Err(Error::StepUnderflow { ds: ds.to_f64_lossy(), ds_min: ctl.ds_min.to_f64_lossy() });
    }
    let n = problem.dim();
    let w = problem.state_weight();
    let mut lambda = base.lambda + ds * tangent.lambda;
    let mut x: Vec<T> = base
        .state
        .iter()
        .zip(&tangent.state)
        .map(|(&b, &t)| b + ds * t)
        .collect();
    let border: Vec<T> = tangent.state.iter().map(|&t| w * t).collect();
    for iteration in 0..=ctl.max_iter {
        let f = problem.residual(lambda, &x);
        let f_norm = problem.residual_norm(lambda, &x, &f);
        let constraint = (lambda - base.lambda) * tangent.lambda
            + border
                .iter()
                .zip(x.iter().zip(&base.state))
                .fold(T::zero(), |acc, (&b, (&xi, &bi))| acc + b * (xi - bi))
            - ds;
        let residual = f_norm.max(constraint.abs());
        if !residual.is_finite() {
            break;
        }
        if residual < ctl.tol {
            return Ok(Corrected {
                point: CurvePoint { lambda, state: x, arclength: base.arclength + ds.abs() },
                iterations: iteration,
                residual,
            });
        }
        if iteration == ctl.max_iter {
            break;
        }
        let (jx, jl) = problem.jacobians(lambda, &x);
        let aug = jx.bordered(&jl, &border, tangent.lambda);
        let lu = Lu::factor(&aug, T::lit(1e-14)).map_err(|_| Error::NoConvergence {
            iterations: iteration,
            residual: residual.to_f64_lossy(),
        })?;
        let mut rhs: Vec<T> = f.iter().map(|&v| -v).collect();
        rhs.push(-constraint);
        let delta = lu.solve(&rhs);
        for (xi, di) in x.iter_mut().zip(&delta[..n]) {
            *xi = *xi + *di;
        }
        lambda = lambda + delta[n];
    }
    let f = problem.residual(lambda, &x);
    Err(Error::NoConvergence {
        iterations: ctl.max_iter,
        residual: problem.residual_norm(lambda, &x, &f).to_f64_lossy(),
    })
}

/// Predictor–corrector trace from `start` along `tangent`.
///
/// The step is halved on corrector failure, on a corrected point farther
/// than `1.4 ds` from its base, or on a tangent turning by more than ~37°;
/// it grows by `growth` after `success_window` consecutive acceptances and is
/// clamped to `[ds_min, ds_max]`. `on_point` sees each accepted point (never
/// the start) and decides whether tracing goes on. Returns the reason the
/// trace ended.
pub fn trace_curve<T, P, F>(
    problem: &P,
    start: CurvePoint<T>,
    tangent: Tangent<T>,
    ctl: &StepControl<T>,
    mut on_point: F,
) -> Result<Termination>
where
    T: Real,
    P: ContinuationProblem<T>,
    F: FnMut(&CurvePoint<T>, &Tangent<T>) -> PointVerdict,
{
    ctl.validate()?;
    let w = problem.state_weight();
    let mut base = start;
    let mut tau = tangent;
    let mut ds = ctl.ds0;
    let mut successes = 0;
    let mut accepted = 0;
    let min_alignment = T::lit(0.8);
    while accepted < ctl.max_steps {
        let attempt = correct_step(problem, &base, &tau, ds, ctl).and_then(|c| {
            let dist = weighted_distance(&c.point, &base, w);
            if dist > T::lit(1.4) * ds {
                return Err(Error::NoConvergence { iterations: c.iterations, residual: 0.0 });
            }
            let next_tau =
                match curve_tangent(problem, c.point.lambda, &c.point.state, Some(&tau), ctl.rank_tol) {
                    Ok(t) => t,
                    // rank drop at a branch point: fall back on the secant
                    Err(Error::RankDeficient { .. }) => secant(&base, &c.point, w),
                    Err(e) => return Err(e),
                };
            if next_tau.dot(&tau, w) < min_alignment && ds > ctl.ds_min * T::lit(2.0) {
                return Err(Error::NoConvergence { iterations: c.iterations, residual: 0.0 });
            }
            Ok((c.point, next_tau))
        });
        match attempt {
            Ok((point, next_tau)) => {
                accepted += 1;
                match on_point(&point, &next_tau) {
                    PointVerdict::Accept => {}
                    PointVerdict::AcceptAndStop(t) | PointVerdict::Stop(t) => return Ok(t),
                }
                base = point;
                tau = next_tau;
                successes += 1;
                if successes >= ctl.success_window {
                    ds = (ds * ctl.growth).min(ctl.ds_max);
                    successes = 0;
                }
            }
            Err(_) => {
                successes = 0;
                ds = ds * T::lit(0.5);
                if ds < ctl.ds_min {
                    return Ok(Termination::StepUnderflow);
                }
            }
        }
    }
    Ok(Termination::MaxSteps)
}

fn secant<T: Real>(from: &CurvePoint<T>, to: &CurvePoint<T>, weight: T) -> Tangent<T> {
    Tangent {
        lambda: to.lambda - from.lambda,
        state: to.state.iter().zip(&from.state).map(|(&a, &b)| a - b).collect(),
    }
    .normalized(weight)
}

/// Steady states of `Λ^r u − ε Λ^s u − u u_x = 0` as a continuation problem
/// in `ε`.
#[derive(Clone, Debug)]
pub struct KsProblem<T: Real> {
    pub r: T,
    pub s: T,
    op: SteadyOperator<T>,
}

impl<T: Real> KsProblem<T> {
    pub fn new(r: T, s: T, modes: usize) -> Result<Self> {
        validate_exponents(r, s)?;
        Ok(Self { r, s, op: SteadyOperator::new(modes) })
    }

    pub fn operator(&self) -> &SteadyOperator<T> {
        &self.op
    }

    fn params(&self, eps: T) -> ModelParams<T> {
        // the corrector may probe ε ≤ 0 transiently; no validation here
        ModelParams { r: self.r, s: self.s, eps }
    }
}

impl<T: Real> ContinuationProblem<T> for KsProblem<T> {
    fn dim(&self) -> usize {
        self.op.modes()
    }

    fn residual(&self, lambda: T, x: &[T]) -> Vec<T> {
        let u = SpectralField::from_raw(x.to_vec());
        self.op.residual_field(&self.params(lambda), &u).into_coeffs()
    }

    fn residual_norm(&self, _lambda: T, _x: &[T], f: &[T]) -> T {
        let field = SpectralField::from_raw(f.to_vec());
        if field.coeffs().iter().any(|v| !v.is_finite()) {
            return T::nan();
        }
        norm_inf(&self.op.plan().sample(&field))
    }

    fn jacobians(&self, lambda: T, x: &[T]) -> (Matrix<T>, Vec<T>) {
        let u = SpectralField::from_raw(x.to_vec());
        let p = self.params(lambda);
        let j = self.op.jacobian(&p, &u).matrix;
        (j, self.op.eps_derivative(&p, &u).into_coeffs())
    }

    fn state_weight(&self) -> T {
        T::PI()
    }
}

/// One converged point of a steady-state branch.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchPoint<T> {
    pub eps: T,
    pub u: SpectralField<T>,
    pub arclength: T,
    /// `‖u‖_{L²}`.
    pub l2: T,
    /// Smallest singular value of `∂_u F(ε, u)`.
    pub jac_min_sv: T,
    /// Sign of `det ∂_u F(ε, u)`; 0 when the factorization breaks down.
    pub det_sign: i8,
    /// Sign changes of `u` over one period; 0 for numerically zero fields.
    pub zero_count: usize,
}

impl<T: Real> BranchPoint<T> {
    /// Fills in the monitored quantities for a converged `(ε, u)`.
    pub fn measure(problem: &KsProblem<T>, eps: T, u: SpectralField<T>, arclength: T) -> Self {
        let jac = problem.op.jacobian(&problem.params(eps), &u);
        let (jac_min_sv, det_sign) = match Lu::factor(&jac.matrix, T::zero()) {
            Ok(lu) => (lu.min_singular_value(), lu.det_sign()),
            Err(_) => (T::zero(), 0),
        };
        let zero_count = count_zeros(&u).unwrap_or(0);
        let l2 = u.l2_norm();
        Self { eps, u, arclength, l2, jac_min_sv, det_sign, zero_count }
    }

    pub fn is_nontrivial(&self) -> bool {
        self.l2 > T::lit(1e-8)
    }
}

/// An ordered trace of one solution branch.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch<T> {
    pub r: T,
    pub s: T,
    /// Bifurcation point the branch was seeded from; `None` for the trivial
    /// branch or user-supplied starts.
    pub seed: Option<BifurcationPoint<T>>,
    pub points: Vec<BranchPoint<T>>,
    pub termination: Termination,
}

/// Settings for [`trace_branch`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuationConfig<T> {
    pub ds0: T,
    pub ds_min: T,
    pub ds_max: T,
    pub newton: NewtonConfig<T>,
    pub max_steps: usize,
    /// Stop once `ε` drops below this value.
    pub eps_floor: T,
    /// Stop once `ε` exceeds this value.
    pub eps_ceiling: T,
    pub modes: usize,
    /// Stop when modes above `0.9 M` carry more than this fraction of the
    /// `Ḣ^{s/2}` energy.
    pub instability_fraction: T,
}

impl<T: Real> Default for ContinuationConfig<T> {
    fn default() -> Self {
        Self {
            ds0: T::lit(0.01),
            ds_min: T::lit(1e-6),
            ds_max: T::lit(0.05),
            newton: NewtonConfig::default(),
            max_steps: 2000,
            eps_floor: T::lit(0.12),
            eps_ceiling: T::lit(10.0),
            modes: 128,
            instability_fraction: T::lit(0.01),
        }
    }
}

impl<T: Real> ContinuationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.step_control().validate()?;
        if !(self.eps_floor >= T::zero()) {
            return Err(Error::InvalidArgument("eps_floor must be nonnegative".into()));
        }
        if self.modes == 0 {
            return Err(Error::InvalidArgument("modes must be positive".into()));
        }
        Ok(())
    }

    pub fn step_control(&self) -> StepControl<T> {
        StepControl {
            ds0: self.ds0,
            ds_min: self.ds_min,
            ds_max: self.ds_max,
            max_steps: self.max_steps,
            tol: self.newton.tol_inf,
            max_iter: self.newton.max_iter,
            ..StepControl::default()
        }
    }
}

/// Fraction of `Σ k^s a_k²` carried by modes `k > 0.9 M`.
pub fn top_decade_fraction<T: Real>(u: &SpectralField<T>, s: T) -> T {
    let m = u.modes();
    let cutoff = m - m / 10;
    let (mut top, mut total) = (T::zero(), T::zero());
    for (i, &a) in u.coeffs().iter().enumerate() {
        let e = T::from_index(i + 1).powf(s) * a * a;
        total = total + e;
        if i + 1 > cutoff {
            top = top + e;
        }
    }
    if total.is_zero() {
        T::zero()
    } else {
        top / total
    }
}

/// A converged start for [`trace_branch`].
#[derive(Clone, Debug, PartialEq)]
pub struct BranchSeed<T> {
    pub eps: T,
    pub u: SpectralField<T>,
    pub tangent: Tangent<T>,
}

/// Unit tangent `(δε, δu)` to the solution set at a converged `(ε, u)`.
pub fn tangent<T: Real>(
    p: &ModelParams<T>,
    u: &SpectralField<T>,
    previous: Option<&Tangent<T>>,
) -> Result<Tangent<T>> {
    let problem = KsProblem::new(p.r, p.s, u.modes())?;
    curve_tangent(&problem, p.eps, u.coeffs(), previous, StepControl::default().rank_tol)
}

/// Corrects the predictor `base + ds τ` back onto the branch.
pub fn keller_correct<T: Real>(
    problem: &KsProblem<T>,
    base: &BranchPoint<T>,
    tangent: &Tangent<T>,
    ds: T,
    cfg: &ContinuationConfig<T>,
) -> Result<BranchPoint<T>> {
    if ds.is_zero() {
        return Ok(base.clone());
    }
    let start = CurvePoint {
        lambda: base.eps,
        state: base.u.coeffs().to_vec(),
        arclength: base.arclength,
    };
    let c = correct_step(problem, &start, tangent, ds, &cfg.step_control())?;
    let u = SpectralField::new(c.point.state)?;
    Ok(BranchPoint::measure(problem, c.point.lambda, u, c.point.arclength))
}

/// Traces a steady-state branch from a converged seed.
pub fn trace_branch<T: Real>(
    r: T,
    s: T,
    seed: &BranchSeed<T>,
    bifurcation: Option<BifurcationPoint<T>>,
    cfg: &ContinuationConfig<T>,
) -> Result<Branch<T>> {
    cfg.validate()?;
    if seed.u.modes() != cfg.modes {
        return Err(Error::ModeMismatch { left: seed.u.modes(), right: cfg.modes });
    }
    let problem = KsProblem::new(r, s, cfg.modes)?;
    let first = BranchPoint::measure(&problem, seed.eps, seed.u.clone(), T::zero());
    let nontrivial_start = first.is_nontrivial();
    let start_tangent = match curve_tangent(
        &problem,
        seed.eps,
        seed.u.coeffs(),
        Some(&seed.tangent),
        StepControl::<T>::default().rank_tol,
    ) {
        Ok(t) => t,
        Err(Error::RankDeficient { .. }) => seed.tangent.clone(),
        Err(e) => return Err(e),
    };
    let mut points = vec![first];
    let start = CurvePoint { lambda: seed.eps, state: seed.u.coeffs().to_vec(), arclength: T::zero() };
    let mut failure = None;
    let termination = trace_curve(&problem, start, start_tangent, &cfg.step_control(), |pt, _| {
        let u = match SpectralField::new(pt.state.clone()) {
            Ok(u) => u,
            Err(e) => {
                failure = Some(e);
                return PointVerdict::Stop(Termination::InstabilityDetected);
            }
        };
        if top_decade_fraction(&u, s) > cfg.instability_fraction {
            return PointVerdict::Stop(Termination::InstabilityDetected);
        }
        let bp = BranchPoint::measure(&problem, pt.lambda, u, pt.arclength);
        let verdict = if nontrivial_start && !bp.is_nontrivial() {
            PointVerdict::AcceptAndStop(Termination::HitTrivial)
        } else if bp.eps < cfg.eps_floor || bp.eps > cfg.eps_ceiling {
            PointVerdict::AcceptAndStop(Termination::LeftDomain)
        } else {
            PointVerdict::Accept
        };
        points.push(bp);
        verdict
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Branch { r, s, seed: bifurcation, points, termination })
}

/// Steady state of `branch` at parameter `eps`: linear interpolation between
/// the first bracketing pair of points, polished by Newton at fixed `eps`.
pub fn steady_state_at<T: Real>(
    branch: &Branch<T>,
    eps: T,
    newton: &NewtonConfig<T>,
) -> Result<SpectralField<T>> {
    let bracket = branch.points.windows(2).find(|w| {
        let (a, b) = (w[0].eps, w[1].eps);
        (a - eps) * (b - eps) <= T::zero() && a != b
    });
    let w = bracket.ok_or_else(|| {
        Error::InvalidArgument(format!("branch does not cross eps = {eps}"))
    })?;
    let theta = (eps - w[0].eps) / (w[1].eps - w[0].eps);
    let guess = w[0].u.axpy(theta, &(&w[1].u - &w[0].u));
    let p = ModelParams::new(branch.r, branch.s, eps)?;
    Ok(SteadyOperator::new(guess.modes()).newton_solve(&p, &guess, newton)?.u)
}
