//! Steady-state residual `F(ε, u) = Λ^r u − ε Λ^s u − u u_x`, its Jacobian
//! and a Newton corrector at fixed `ε`.

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, Lu, Matrix};
use crate::scalar::Real;
use crate::spectral::{lambda_apply, ModelParams, ProductPlan, SpectralField};

/// Residual field together with its sampled sup norm and L² norm.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport<T> {
    pub residual: SpectralField<T>,
    /// Max of `|F|` over the `4M`-point physical grid.
    pub inf_norm: T,
    pub l2_norm: T,
}

/// `∂_u F(ε, u)` acting on sine coefficients.
#[derive(Clone, Debug)]
pub struct JacobianMatrix<T> {
    pub matrix: Matrix<T>,
    pub params: ModelParams<T>,
    pub base: SpectralField<T>,
}

/// Globalization used by [`newton_solve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Damping<T> {
    /// Full Newton steps.
    None,
    /// Backtracking on `‖F‖²` with sufficient-decrease constant `c` and at
    /// most `max_halvings` step halvings.
    Armijo { c: T, max_halvings: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig<T> {
    /// Stop once the sampled sup norm of the residual drops below this.
    pub tol_inf: T,
    pub max_iter: usize,
    pub damping: Damping<T>,
    /// Relative pivot threshold for declaring the Jacobian singular.
    pub singular_tol: T,
}

impl<T: Real> Default for NewtonConfig<T> {
    fn default() -> Self {
        Self {
            tol_inf: T::lit(1e-4),
            max_iter: 25,
            damping: Damping::None,
            singular_tol: T::lit(1e-14),
        }
    }
}

impl<T: Real> NewtonConfig<T> {
    pub fn with_tol(tol_inf: T) -> Self {
        Self { tol_inf, ..Self::default() }
    }
}

/// Converged Newton result. `iterations` counts every iterate examined,
/// including the initial guess.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOutcome<T> {
    pub u: SpectralField<T>,
    pub converged: bool,
    pub iterations: usize,
    pub residual_inf: T,
}

/// Residual and Jacobian evaluator with cached product plans for one mode
/// count.
#[derive(Clone, Debug)]
pub struct SteadyOperator<T: Real> {
    plan: ProductPlan<T>,
}

impl<T: Real> SteadyOperator<T> {
    pub fn new(modes: usize) -> Self {
        Self { plan: ProductPlan::new(modes) }
    }

    pub fn modes(&self) -> usize {
        self.plan.modes()
    }

    pub fn plan(&self) -> &ProductPlan<T> {
        &self.plan
    }

    pub fn residual_field(&self, p: &ModelParams<T>, u: &SpectralField<T>) -> SpectralField<T> {
        let linear = lambda_apply(p.r, u).axpy(-p.eps, &lambda_apply(p.s, u));
        &linear - &self.plan.nonlinear_term(u)
    }

    pub fn residual(&self, p: &ModelParams<T>, u: &SpectralField<T>) -> ResidualReport<T> {
        let residual = self.residual_field(p, u);
        let inf_norm = norm_inf(&self.plan.sample(&residual));
        let l2_norm = residual.l2_norm();
        ResidualReport { residual, inf_norm, l2_norm }
    }

    /// Dense `∂_u F`. Column `j` is `(j^r − ε j^s) e_j − P_M ∂_x(u sin(jx))`;
    /// the transport part uses the exact product
    /// `[∂_x(u sin jx)]_m = (m/2)(a_{m-j} − a_{m+j} − a_{j-m})`.
    pub fn jacobian(&self, p: &ModelParams<T>, u: &SpectralField<T>) -> JacobianMatrix<T> {
        let m = u.modes();
        assert_eq!(m, self.modes());
        let half = T::lit(0.5);
        let mut matrix = Matrix::zeros(m, m);
        for row in 0..m {
            let mode = row + 1;
            let weight = T::from_index(mode) * half;
            for col in 0..m {
                let j = col + 1;
                let mut transport = -u.coeff(mode + j);
                if mode > j {
                    transport = transport + u.coeff(mode - j);
                }
                if j > mode {
                    transport = transport - u.coeff(j - mode);
                }
                matrix[(row, col)] = -weight * transport;
            }
            matrix[(row, row)] = matrix[(row, row)] + p.linear_symbol(mode);
        }
        JacobianMatrix { matrix, params: *p, base: u.clone() }
    }

    /// `∂_ε F = −Λ^s u`.
    pub fn eps_derivative(&self, p: &ModelParams<T>, u: &SpectralField<T>) -> SpectralField<T> {
        -&lambda_apply(p.s, u)
    }

    pub fn newton_solve(
        &self,
        p: &ModelParams<T>,
        u0: &SpectralField<T>,
        cfg: &NewtonConfig<T>,
    ) -> Result<NewtonOutcome<T>> {
        let mut u = u0.clone();
        let mut report = self.residual(p, &u);
        let mut iterations = 1;
        loop {
            let jac = self.jacobian(p, &u);
            let lu = Lu::factor(&jac.matrix, cfg.singular_tol)?;
            if report.inf_norm < cfg.tol_inf {
                return Ok(NewtonOutcome {
                    u,
                    converged: true,
                    iterations,
                    residual_inf: report.inf_norm,
                });
            }
            if iterations > cfg.max_iter {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: report.inf_norm.to_f64_lossy(),
                });
            }
            let rhs: Vec<T> = report.residual.coeffs().iter().map(|&c| -c).collect();
            let step = SpectralField::new(lu.solve(&rhs)).map_err(|_| Error::NoConvergence {
                iterations,
                residual: report.inf_norm.to_f64_lossy(),
            })?;
            let (next, next_report) = match cfg.damping {
                Damping::None => {
                    let next = &u + &step;
                    let r = self.residual(p, &next);
                    (next, r)
                }
                Damping::Armijo { c, max_halvings } => {
                    let f0 = report.l2_norm * report.l2_norm;
                    let mut lambda = T::one();
                    let mut trial = &u + &step;
                    let mut r = self.residual(p, &trial);
                    for _ in 0..max_halvings {
                        if r.l2_norm * r.l2_norm <= (T::one() - (c + c) * lambda) * f0 {
                            break;
                        }
                        lambda = lambda * T::lit(0.5);
                        trial = u.axpy(lambda, &step);
                        r = self.residual(p, &trial);
                    }
                    (trial, r)
                }
            };
            u = next;
            report = next_report;
            iterations += 1;
        }
    }
}

pub fn residual<T: Real>(p: &ModelParams<T>, u: &SpectralField<T>) -> ResidualReport<T> {
    SteadyOperator::new(u.modes()).residual(p, u)
}

pub fn jacobian<T: Real>(p: &ModelParams<T>, u: &SpectralField<T>) -> JacobianMatrix<T> {
    SteadyOperator::new(u.modes()).jacobian(p, u)
}

pub fn newton_solve<T: Real>(
    p: &ModelParams<T>,
    u0: &SpectralField<T>,
    cfg: &NewtonConfig<T>,
) -> Result<NewtonOutcome<T>> {
    SteadyOperator::new(u0.modes()).newton_solve(p, u0, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{nonlinear_term, sobolev_seminorm, to_physical};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn params(r: f64, s: f64, eps: f64) -> ModelParams<f64> {
        ModelParams::new(r, s, eps).unwrap()
    }

    #[test]
    fn trivial_branch_is_a_root() {
        for eps in [0.1, 0.7, 3.0] {
            let rep = residual(&params(0.5, 1.5, eps), &SpectralField::zeros(16));
            assert_eq!(rep.inf_norm, 0.0);
            assert_eq!(rep.l2_norm, 0.0);
        }
    }

    #[test]
    fn linear_part_cancels_on_first_mode() {
        let rep = residual(&params(0.5, 1.5, 1.0), &SpectralField::mode(8, 1, 1.0));
        assert_abs_diff_eq!(rep.residual.coeff(2), -0.5, epsilon = 1e-14);
        for k in [1, 3, 4, 5] {
            assert_abs_diff_eq!(rep.residual.coeff(k), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn second_mode_at_its_bifurcation_value() {
        // sin 2x · 2 cos 2x = sin 4x
        let sigma2 = 2f64.powf(0.5 - 1.5);
        let rep = residual(&params(0.5, 1.5, sigma2), &SpectralField::mode(8, 2, 1.0));
        for k in 1..=8 {
            let want = if k == 4 { -1.0 } else { 0.0 };
            assert_abs_diff_eq!(rep.residual.coeff(k), want, epsilon = 1e-14);
        }
    }

    #[test]
    fn report_norms_are_consistent() {
        let u = SpectralField::new(vec![0.3, -0.2, 0.1, 0.05]).unwrap();
        let rep = residual(&params(0.2, 1.7, 0.6), &u);
        let samples = to_physical(&rep.residual, 16).unwrap();
        let sup = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert_abs_diff_eq!(rep.inf_norm, sup, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.l2_norm, sobolev_seminorm(&rep.residual, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn jacobian_on_trivial_branch_is_diagonal() {
        let p = params(0.5, 1.5, 0.3);
        let j = jacobian(&p, &SpectralField::zeros(6));
        for r in 0..6 {
            for c in 0..6 {
                let want = if r == c {
                    ((r + 1) as f64).powf(0.5) - 0.3 * ((r + 1) as f64).powf(1.5)
                } else {
                    0.0
                };
                assert_eq!(j.matrix[(r, c)], want);
            }
        }
        for m in 1..=6usize {
            let sigma = (m as f64).powf(0.5 - 1.5);
            let j = jacobian(&params(0.5, 1.5, sigma), &SpectralField::zeros(6));
            assert_abs_diff_eq!(j.matrix[(m - 1, m - 1)], 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn jacobian_columns_match_product_route() {
        // column j must equal the linearization computed through the FFT product
        let u = SpectralField::new(vec![0.4, -0.3, 0.2, 0.1, -0.05, 0.02]).unwrap();
        let p = params(0.5, 1.5, 0.7);
        let jac = jacobian(&p, &u);
        for j in 1..=6 {
            let v = SpectralField::mode(6, j, 1.0);
            // u_x v + u v_x = (uv)_x = N(u+v) - N(u) - N(v), all bilinear parts
            let cross = &(&nonlinear_term(&(&u + &v)) - &nonlinear_term(&u)) - &nonlinear_term(&v);
            let linear = lambda_apply(p.r, &v).axpy(-p.eps, &lambda_apply(p.s, &v));
            let want = &linear - &cross;
            for m in 1..=6 {
                assert_abs_diff_eq!(jac.matrix[(m - 1, j - 1)], want.coeff(m), epsilon = 1e-13);
            }
        }
    }

    fn random_field(rng: &mut impl Rng, modes: usize, scale: f64) -> SpectralField<f64> {
        SpectralField::new(
            (1..=modes)
                .map(|k| scale * rng.gen_range(-1.0..1.0) / (k as f64))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let r = rng.gen_range(-1.0..1.0);
            let s = rng.gen_range(1.05..2.5f64).max(r + 0.1);
            let p = params(r, s, rng.gen_range(0.05..1.5));
            let u = random_field(&mut rng, 24, 1.0);
            let v = random_field(&mut rng, 24, 1.0);
            let op = SteadyOperator::new(24);
            let jv = op.jacobian(&p, &u).matrix.mul_vec(v.coeffs());
            let h = 1e-6 * (1.0 + u.l2_norm());
            let fp = op.residual_field(&p, &u.axpy(h, &v));
            let fm = op.residual_field(&p, &u.axpy(-h, &v));
            let fd = (&fp - &fm).into_coeffs();
            let diff: f64 = jv
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b / (2.0 * h)).powi(2))
                .sum::<f64>()
                .sqrt();
            let norm: f64 = jv.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(diff <= 1e-6 * norm, "relative error {}", diff / norm);
        }
    }

    #[test]
    fn newton_from_exact_root_takes_one_iterate() {
        let out = newton_solve(
            &params(0.5, 1.5, 0.7),
            &SpectralField::zeros(32),
            &NewtonConfig::default(),
        )
        .unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert!(out.u.is_zero());
    }

    #[test]
    fn newton_at_bifurcation_value_is_singular() {
        let err = newton_solve(
            &params(0.5, 1.5, 1.0),
            &SpectralField::zeros(32),
            &NewtonConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::SingularJacobian { .. }));
    }

    #[test]
    fn newton_finds_nontrivial_root_near_first_branch() {
        // ε = 1 - t²·0.3536/2 for t ≈ 0.45 gives ε ≈ 0.964; use the local
        // expansion u ≈ t sin x + t² c sin 2x as the guess.
        let p = params(0.5, 1.5, 0.9);
        let t = (2.0 * 0.1 / (1.0 / (2.0 * 2f64.sqrt()))).sqrt();
        let mut guess = SpectralField::mode(64, 1, t);
        guess = guess.axpy(t * t * -0.35355339, &SpectralField::mode(64, 2, 1.0));
        let out = newton_solve(&p, &guess, &NewtonConfig::with_tol(1e-10)).unwrap();
        let hr = sobolev_seminorm(&out.u, p.r / 2.0).powi(2);
        let hs = sobolev_seminorm(&out.u, p.s / 2.0).powi(2);
        assert!(out.u.l2_norm() > 0.1);
        assert!((hr - p.eps * hs).abs() <= 1e-6 * hs);
    }

    #[test]
    fn no_convergence_is_reported() {
        let cfg = NewtonConfig { max_iter: 1, ..NewtonConfig::with_tol(1e-14) };
        let p = params(0.5, 1.5, 0.9);
        let guess = SpectralField::mode(16, 1, 3.0);
        assert!(matches!(newton_solve(&p, &guess, &cfg), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn armijo_damping_still_converges() {
        let cfg = NewtonConfig {
            damping: Damping::Armijo { c: 1e-4, max_halvings: 30 },
            max_iter: 60,
            ..NewtonConfig::with_tol(1e-10)
        };
        let p = params(0.5, 1.5, 0.9);
        let out = newton_solve(&p, &SpectralField::mode(64, 1, 0.6), &cfg).unwrap();
        assert!(residual(&p, &out.u).inf_norm < 1e-10);
    }

    proptest! {
        #[test]
        fn transport_term_has_no_mean_against_u(seed in 0u64..200) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let u = random_field(&mut rng, 16, 2.0);
            // ∫ u (u u_x) dx = 0
            let n = nonlinear_term(&u);
            prop_assert!(u.inner(&n).abs() < 1e-12 * (1.0 + u.l2_norm().powi(3)));
        }
    }
}
