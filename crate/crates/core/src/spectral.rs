//! Odd 2π-periodic functions as truncated sine series.
//!
//! A [`SpectralField`] with coefficients `a_1..a_M` represents
//! `u(x) = Σ a_k sin(kx)` on `[-π, π)`. Inner products use the plain torus
//! convention, so `‖sin(kx)‖²_{L²} = π` and the homogeneous seminorm is
//! `‖u‖²_{Ḣ^t} = π Σ k^{2t} a_k²`.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Real sine coefficients of an odd periodic function; index 0 holds mode 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField<T> {
    coeffs: Vec<T>,
}

/// Cosine coefficients of an even, zero-mean periodic function (mode 1..M).
///
/// Only produced by [`derivative`]; kept distinct from [`SpectralField`] so
/// the two parities cannot be mixed up.
#[derive(Clone, Debug, PartialEq)]
pub struct CosineField<T> {
    coeffs: Vec<T>,
}

impl<T: Real> SpectralField<T> {
    /// Builds a field from coefficients `a_1..a_M`. Rejects empty or
    /// non-finite input.
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("a field needs at least one mode".into()));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(i + 1));
        }
        Ok(Self { coeffs })
    }

    /// Wraps coefficients without checks; used inside solvers where
    /// non-finite values must propagate to the convergence test.
    pub(crate) fn from_raw(coeffs: Vec<T>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(modes: usize) -> Self {
        assert!(modes > 0, "a field needs at least one mode");
        Self { coeffs: vec![T::zero(); modes] }
    }

    /// `amplitude · sin(kx)` truncated to `modes` modes.
    pub fn mode(modes: usize, k: usize, amplitude: T) -> Self {
        assert!(k >= 1 && k <= modes, "mode {k} outside 1..={modes}");
        let mut f = Self::zeros(modes);
        f.coeffs[k - 1] = amplitude;
        f
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Coefficient of `sin(kx)`, zero outside `1..=M`.
    pub fn coeff(&self, k: usize) -> T {
        if k == 0 || k > self.coeffs.len() {
            T::zero()
        } else {
            self.coeffs[k - 1]
        }
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    /// Truncates or zero-pads to `modes` modes.
    pub fn resized(&self, modes: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(modes, T::zero());
        Self { coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// `self + alpha · other`.
    pub fn axpy(&self, alpha: T, other: &Self) -> Self {
        self.check_modes(other);
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| a + alpha * b)
                .collect(),
        }
    }

    /// L² inner product `∫ u v dx` over the torus.
    pub fn inner(&self, other: &Self) -> T {
        self.check_modes(other);
        let sum = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        T::PI() * sum
    }

    pub fn l2_norm(&self) -> T {
        sobolev_seminorm(self, T::zero())
    }

    /// Pointwise value `Σ a_k sin(kx)`.
    pub fn eval(&self, x: T) -> T {
        self.coeffs
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &a)| acc + a * (T::from_index(i + 1) * x).sin())
    }

    /// Pointwise first derivative.
    pub fn eval_dx(&self, x: T) -> T {
        self.coeffs.iter().enumerate().fold(T::zero(), |acc, (i, &a)| {
            let k = T::from_index(i + 1);
            acc + a * k * (k * x).cos()
        })
    }

    /// Pointwise second derivative.
    pub fn eval_dxx(&self, x: T) -> T {
        self.coeffs.iter().enumerate().fold(T::zero(), |acc, (i, &a)| {
            let k = T::from_index(i + 1);
            acc - a * k * k * (k * x).sin()
        })
    }

    /// Image of the reflection symmetry `u(x) ↦ u(x + π)`, i.e.
    /// `a_k ↦ (-1)^k a_k`. Maps steady states to steady states.
    pub fn half_period_shift(&self) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, &a)| if (i + 1) % 2 == 1 { -a } else { a })
                .collect(),
        }
    }

    fn check_modes(&self, other: &Self) {
        assert_eq!(
            self.modes(),
            other.modes(),
            "fields with different mode counts must be resized explicitly"
        );
    }
}

impl<T: Real> CosineField<T> {
    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Pointwise value `Σ b_k cos(kx)`.
    pub fn eval(&self, x: T) -> T {
        self.coeffs
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &b)| acc + b * (T::from_index(i + 1) * x).cos())
    }
}

impl<T: Real> Add for &SpectralField<T> {
    type Output = SpectralField<T>;

    fn add(self, rhs: Self) -> SpectralField<T> {
        self.axpy(T::one(), rhs)
    }
}

impl<T: Real> Sub for &SpectralField<T> {
    type Output = SpectralField<T>;

    fn sub(self, rhs: Self) -> SpectralField<T> {
        self.axpy(-T::one(), rhs)
    }
}

impl<T: Real> Neg for &SpectralField<T> {
    type Output = SpectralField<T>;

    fn neg(self) -> SpectralField<T> {
        SpectralField { coeffs: self.coeffs.iter().map(|&a| -a).collect() }
    }
}

impl<T: Real> Mul<T> for &SpectralField<T> {
    type Output = SpectralField<T>;

    fn mul(self, rhs: T) -> SpectralField<T> {
        SpectralField { coeffs: self.coeffs.iter().map(|&a| a * rhs).collect() }
    }
}

/// Fixed exponents `(r, s)` and the parameter `ε` of
/// `u u_x = Λ^r u − ε Λ^s u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub r: T,
    pub s: T,
    pub eps: T,
}

impl<T: Real> ModelParams<T> {
    /// Validates `s > 1`, `-1 ≤ r < s` and `ε > 0`.
    pub fn new(r: T, s: T, eps: T) -> Result<Self> {
        validate_exponents(r, s)?;
        if !(eps > T::zero()) || !eps.is_finite() {
            return Err(Error::InvalidParams(format!("eps must be positive, got {eps}")));
        }
        Ok(Self { r, s, eps })
    }

    pub fn with_eps(&self, eps: T) -> Result<Self> {
        Self::new(self.r, self.s, eps)
    }

    /// Symbol of the linear operator on mode `k`: `k^r − ε k^s`.
    pub fn linear_symbol(&self, k: usize) -> T {
        let k = T::from_index(k);
        k.powf(self.r) - self.eps * k.powf(self.s)
    }
}

/// Checks the admissible exponent range `s > 1`, `r ∈ [-1, s)`.
pub fn validate_exponents<T: Real>(r: T, s: T) -> Result<()> {
    if !(s > T::one()) {
        return Err(Error::InvalidParams(format!("s must satisfy s > 1, got s = {s}")));
    }
    if !(r >= -T::one() && r < s) {
        return Err(Error::InvalidParams(format!(
            "r must lie in [-1, s), got r = {r} with s = {s}"
        )));
    }
    Ok(())
}

/// Applies the multiplier `Λ^α`: `a_k ↦ k^α a_k`.
pub fn lambda_apply<T: Real>(alpha: T, u: &SpectralField<T>) -> SpectralField<T> {
    let coeffs = u
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, &a)| if alpha.is_zero() { a } else { T::from_index(i + 1).powf(alpha) * a })
        .collect();
    SpectralField { coeffs }
}

/// `u_x` as a cosine series with coefficients `k a_k`.
pub fn derivative<T: Real>(u: &SpectralField<T>) -> CosineField<T> {
    let coeffs = u
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, &a)| T::from_index(i + 1) * a)
        .collect();
    CosineField { coeffs }
}

/// Cached FFT plans for dealiased products of `M`-mode fields.
///
/// Products are formed on a `4M`-point grid, so the quadratic term is exact
/// (up to rounding) before truncation back to `M` modes.
#[derive(Clone)]
pub struct ProductPlan<T: Real> {
    modes: usize,
    grid: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for ProductPlan<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProductPlan")
            .field("modes", &self.modes)
            .field("grid", &self.grid)
            .finish()
    }
}

impl<T: Real> ProductPlan<T> {
    pub fn new(modes: usize) -> Self {
        assert!(modes > 0);
        let grid = 4 * modes;
        let mut planner = FftPlanner::new();
        Self {
            modes,
            grid,
            forward: planner.plan_fft_forward(grid),
            inverse: planner.plan_fft_inverse(grid),
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Sine coefficients of the odd product `u · v` with `v` even.
    pub fn product(&self, u: &SpectralField<T>, v: &CosineField<T>) -> SpectralField<T> {
        assert_eq!(u.modes(), self.modes);
        assert_eq!(v.modes(), self.modes);
        let n = self.grid;
        let half = T::lit(0.5);
        // z = u + i v in one transform: U is purely imaginary-odd, V real-even.
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        for k in 1..=self.modes {
            let a = u.coeffs[k - 1] * half;
            let b = v.coeffs[k - 1] * half;
            // u part: -i a e^{ikx} + i a e^{-ikx}; v part scaled by i: i b (e^{ikx} + e^{-ikx})
            buf[k] = buf[k] + Complex::new(T::zero(), -a) + Complex::new(T::zero(), b);
            buf[n - k] = buf[n - k] + Complex::new(T::zero(), a) + Complex::new(T::zero(), b);
        }
        self.inverse.process(&mut buf);
        for z in buf.iter_mut() {
            *z = Complex::new(z.re * z.im, T::zero());
        }
        self.forward.process(&mut buf);
        let scale = T::lit(-2.0) / T::from_index(n);
        let coeffs = (1..=self.modes).map(|m| buf[m].im * scale).collect();
        SpectralField { coeffs }
    }

    /// Samples `u` on the `4M`-point grid starting at `-π`.
    pub fn sample(&self, u: &SpectralField<T>) -> Vec<T> {
        assert_eq!(u.modes(), self.modes);
        let n = self.grid;
        let half = T::lit(0.5);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        for k in 1..=self.modes {
            let a = if k % 2 == 1 { -u.coeffs[k - 1] } else { u.coeffs[k - 1] } * half;
            buf[k] = buf[k] + Complex::new(T::zero(), -a);
            buf[n - k] = buf[n - k] + Complex::new(T::zero(), a);
        }
        self.inverse.process(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// `u u_x` projected onto the first `M` sine modes.
    pub fn nonlinear_term(&self, u: &SpectralField<T>) -> SpectralField<T> {
        self.product(u, &derivative(u))
    }
}

/// `u u_x` projected onto the sine modes of `u`. Builds fresh FFT plans; use
/// [`ProductPlan`] in loops.
pub fn nonlinear_term<T: Real>(u: &SpectralField<T>) -> SpectralField<T> {
    ProductPlan::new(u.modes()).nonlinear_term(u)
}

/// Homogeneous seminorm `(π Σ k^{2t} a_k²)^{1/2}`; `t = 0` is the L² norm.
pub fn sobolev_seminorm<T: Real>(u: &SpectralField<T>, t: T) -> T {
    let two_t = t + t;
    let sum = u.coeffs.iter().enumerate().fold(T::zero(), |acc, (i, &a)| {
        let w = if two_t.is_zero() { T::one() } else { T::from_index(i + 1).powf(two_t) };
        acc + w * a * a
    });
    (T::PI() * sum).sqrt()
}

/// Uniform grid `x_j = -π + 2πj/n`, `j = 0..n`.
pub fn grid_points<T: Real>(n: usize) -> Vec<T> {
    let h = T::TAU() / T::from_index(n);
    (0..n).map(|j| -T::PI() + h * T::from_index(j)).collect()
}

/// Samples `u` on the grid of [`grid_points`]. Requires `n ≥ 2M`.
pub fn to_physical<T: Real>(u: &SpectralField<T>, n_points: usize) -> Result<Vec<T>> {
    let m = u.modes();
    if n_points < 2 * m {
        return Err(Error::UnderResolvedGrid { points: n_points, modes: m });
    }
    let half = T::lit(0.5);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n_points];
    for k in 1..=m {
        // grid starts at -π, so sin(k(y - π)) = (-1)^k sin(ky)
        let a = if k % 2 == 1 { -u.coeffs[k - 1] } else { u.coeffs[k - 1] } * half;
        buf[k] = buf[k] + Complex::new(T::zero(), -a);
        buf[n_points - k] = buf[n_points - k] + Complex::new(T::zero(), a);
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n_points).process(&mut buf);
    Ok(buf.into_iter().map(|z| z.re).collect())
}

/// Number of samples used for sup-norm estimates and zero counting.
pub fn dense_grid_size(modes: usize) -> usize {
    16 * modes
}

/// Sup norm of `u`.
///
/// Takes the maximum over a `16M`-point grid and polishes the largest grid
/// extrema with a few Newton steps on `u_x = 0`. The result is an attained
/// value, so it never exceeds the true sup norm.
pub fn linf_norm<T: Real>(u: &SpectralField<T>) -> T {
    let n = dense_grid_size(u.modes());
    let samples = to_physical(u, n).expect("dense grid is resolved");
    let xs = grid_points::<T>(n);
    let grid_max = samples.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if grid_max.is_zero() {
        return grid_max;
    }
    let h = T::TAU() / T::from_index(n);
    let mut best = grid_max;
    let cutoff = grid_max * T::lit(0.9);
    for j in 0..n {
        let v = samples[j].abs();
        let prev = samples[(j + n - 1) % n].abs();
        let next = samples[(j + 1) % n].abs();
        if v < cutoff || v < prev || v < next {
            continue;
        }
        let x0 = xs[j];
        let mut x = x0;
        for _ in 0..20 {
            let d2 = u.eval_dxx(x);
            if d2.is_zero() {
                break;
            }
            let step = u.eval_dx(x) / d2;
            let next_x = (x - step).max(x0 - h).min(x0 + h);
            if (next_x - x).abs() <= T::epsilon() * T::lit(4.0) {
                x = next_x;
                break;
            }
            x = next_x;
        }
        best = best.max(u.eval(x).abs());
    }
    best
}
