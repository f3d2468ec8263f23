//! Time integration of `u_t + u u_x = Λ^r u − ε Λ^s u` for odd data.
//!
//! Crank–Nicolson on the diagonal linear part, second-order Adams–Bashforth
//! on the transport term; the first step uses an explicit Heun-type
//! predictor–corrector for the transport term instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{linf_norm, sobolev_seminorm, ModelParams, ProductPlan, SpectralField};

/// Stateful CN/AB2 stepper. Keeps the previous transport term.
#[derive(Clone, Debug)]
pub struct ImexStepper<T: Real> {
    params: ModelParams<T>,
    dt: T,
    plan: ProductPlan<T>,
    nonlinear: bool,
    previous: Option<SpectralField<T>>,
    blowup_cap: T,
    time: T,
}

impl<T: Real> ImexStepper<T> {
    pub fn new(params: ModelParams<T>, modes: usize, dt: T) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            params,
            dt,
            plan: ProductPlan::new(modes),
            nonlinear: true,
            previous: None,
            blowup_cap: T::lit(1e6),
            time: T::zero(),
        })
    }

    /// Drops the transport term, leaving the linear problem.
    pub fn linear_only(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn with_blowup_cap(mut self, cap: T) -> Self {
        self.blowup_cap = cap;
        self
    }

    pub fn time(&self) -> T {
        self.time
    }

    /// Per-step amplification of mode `k` under the linear part alone.
    pub fn linear_factor(&self, k: usize) -> T {
        let half = self.dt * self.params.linear_symbol(k) * T::lit(0.5);
        (T::one() + half) / (T::one() - half)
    }

    fn transport(&self, u: &SpectralField<T>) -> SpectralField<T> {
        if self.nonlinear {
            -&self.plan.nonlinear_term(u)
        } else {
            SpectralField::zeros(self.plan.modes())
        }
    }

    /// Crank–Nicolson on the linear part with a frozen explicit forcing.
    fn advance(&self, u: &SpectralField<T>, explicit: &SpectralField<T>) -> Vec<T> {
        let half_dt = self.dt * T::lit(0.5);
        (1..=self.plan.modes())
            .map(|k| {
                let l = self.params.linear_symbol(k);
                ((T::one() + half_dt * l) * u.coeff(k) + self.dt * explicit.coeff(k))
                    / (T::one() - half_dt * l)
            })
            .collect()
    }

    pub fn step(&mut self, u: &SpectralField<T>) -> Result<SpectralField<T>> {
        let transport = self.transport(u);
        let explicit = match &self.previous {
            Some(prev) => (&transport * T::lit(1.5)).axpy(T::lit(-0.5), prev),
            None => {
                // AB2 needs one history value; start with an explicit
                // predictor–corrector so the first step is also second order
                let predicted = SpectralField::new(self.advance(u, &transport))
                    .unwrap_or_else(|_| u.clone());
                &(&transport + &self.transport(&predicted)) * T::lit(0.5)
            }
        };
        let coeffs = self.advance(u, &explicit);
        self.previous = Some(transport);
        self.time = self.time + self.dt;
        let bound = coeffs.iter().fold(T::zero(), |acc, c| acc + c.abs());
        let next = SpectralField::new(coeffs).map_err(|_| Error::BlowupDetected {
            time: self.time.to_f64_lossy(),
            sup: f64::INFINITY,
        })?;
        // Σ|a_k| bounds the sup norm; only evaluate the grid when it is large
        if bound > self.blowup_cap {
            let sup = linf_norm(&next);
            if sup > self.blowup_cap {
                return Err(Error::BlowupDetected {
                    time: self.time.to_f64_lossy(),
                    sup: sup.to_f64_lossy(),
                });
            }
        }
        Ok(next)
    }
}

/// One step with no history (the predictor–corrector start).
pub fn imex_step<T: Real>(p: &ModelParams<T>, u: &SpectralField<T>, dt: T) -> Result<SpectralField<T>> {
    ImexStepper::new(*p, u.modes(), dt)?.step(u)
}

/// `(‖u‖²_{L²}, ‖u‖²_{Ḣ^{r/2}}, ‖u‖²_{Ḣ^{s/2}})`.
pub fn energies<T: Real>(p: &ModelParams<T>, u: &SpectralField<T>) -> (T, T, T) {
    let half = T::lit(0.5);
    let sq = |t: T| {
        let n = sobolev_seminorm(u, t);
        n * n
    };
    (sq(T::zero()), sq(p.r * half), sq(p.s * half))
}

/// Sampled trajectory of an evolution run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub params: ModelParams<T>,
    pub times: Vec<T>,
    pub states: Vec<SpectralField<T>>,
    pub energies: Vec<(T, T, T)>,
}

impl<T: Real> Trajectory<T> {
    pub fn final_state(&self) -> &SpectralField<T> {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Integrates to time `t_end` with step `dt`, recording the initial state and
/// every `sample_every`-th step (the final step is always recorded).
pub fn evolve<T: Real>(
    p: &ModelParams<T>,
    u0: &SpectralField<T>,
    t_end: T,
    dt: T,
    sample_every: usize,
) -> Result<Trajectory<T>> {
    if !(t_end > T::zero()) {
        return Err(Error::InvalidArgument(format!("final time must be positive, got {t_end}")));
    }
    if sample_every == 0 {
        return Err(Error::InvalidArgument("sample_every must be at least 1".into()));
    }
    let steps = (t_end / dt).round().to_usize().unwrap_or(0).max(1);
    let mut stepper = ImexStepper::new(*p, u0.modes(), dt)?;
    let mut traj = Trajectory {
        params: *p,
        times: vec![T::zero()],
        states: vec![u0.clone()],
        energies: vec![energies(p, u0)],
    };
    let mut u = u0.clone();
    for n in 1..=steps {
        u = stepper.step(&u)?;
        if n % sample_every == 0 || n == steps {
            traj.times.push(T::from_index(n) * dt);
            traj.energies.push(energies(p, &u));
            traj.states.push(u.clone());
        }
    }
    Ok(traj)
}

/// Defect of `½ d/dt ‖u‖² + ε ‖u‖²_{Ḣ^{s/2}} − ‖u‖²_{Ḣ^{r/2}} = 0` at each
/// interior sample, with the time derivative taken by centered differences.
pub fn energy_balance_residual<T: Real>(traj: &Trajectory<T>) -> Vec<T> {
    let n = traj.times.len();
    if n < 3 {
        return Vec::new();
    }
    let half = T::lit(0.5);
    (1..n - 1)
        .map(|i| {
            let d = (traj.energies[i + 1].0 - traj.energies[i - 1].0)
                / (traj.times[i + 1] - traj.times[i - 1]);
            let (_, hr, hs) = traj.energies[i];
            (half * d + traj.params.eps * hs - hr).abs()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilityVerdict {
    Returns,
    Departs,
    Inconclusive,
}

/// Random odd field with unit L² norm; coefficients decay like `1/k`.
pub fn random_odd_field<T: Real>(modes: usize, seed: u64) -> SpectralField<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<T> = (1..=modes)
        .map(|k| T::lit(rng.gen_range(-1.0..1.0)) / T::from_index(k))
        .collect();
    let f = SpectralField::new(raw).expect("finite");
    let n = f.l2_norm();
    &f * (T::one() / n)
}

/// Perturbs `u_star` by `amplitude` times a seeded random unit field, evolves
/// to `t_end` and classifies the distance `d = ‖u(T) − u_star‖_{L²}`:
/// `d < 0.1 amplitude` returns, `d > 10 amplitude` departs.
pub fn stability_probe<T: Real>(
    p: &ModelParams<T>,
    u_star: &SpectralField<T>,
    amplitude: T,
    t_end: T,
    dt: T,
    seed: u64,
) -> Result<StabilityVerdict> {
    if amplitude.is_zero() {
        return Ok(StabilityVerdict::Returns);
    }
    let kick = random_odd_field(u_star.modes(), seed);
    let u0 = u_star.axpy(amplitude, &kick);
    let steps = (t_end / dt).round().to_usize().unwrap_or(0).max(1);
    let traj = evolve(p, &u0, t_end, dt, steps)?;
    let d = (traj.final_state() - u_star).l2_norm();
    let a = amplitude.abs();
    Ok(if d < T::lit(0.1) * a {
        StabilityVerdict::Returns
    } else if d > T::lit(10.0) * a {
        StabilityVerdict::Departs
    } else {
        StabilityVerdict::Inconclusive
    })
}
