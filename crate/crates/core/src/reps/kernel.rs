//! Probability kernels applied atomwise to CRM weights.

use std::fmt;
use std::sync::Arc;

use super::{sample, AtomicMeasure};
use crate::error::{CrmError, Result};
use crate::exec::{rng_for, Rng};
use crate::measures::{Likelihood, RateMeasureSpec};
use crate::specialfn::{integrate_positive, ln_gamma, Precision};

type CustomKernel = Arc<dyn Fn(f64, &mut Rng) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum KernelSpec {
    Identity,
    /// `theta -> theta / (theta + G)`, `G ~ Gam(alpha, alpha)`. Maps
    /// `GammaP(gamma, alpha, 0)` to `BP(gamma, alpha, 0)`.
    GammaToBeta { alpha: f64 },
    /// `theta -> theta / G`, `G ~ Gam(alpha + d, 1)`. Maps
    /// `GammaP(gamma, 1, d)` to `BPP(gamma, alpha, d)`.
    GammaToBetaPrime { alpha: f64, d: f64 },
    Custom(CustomKernel),
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Identity => write!(f, "Identity"),
            KernelSpec::GammaToBeta { alpha } => write!(f, "GammaToBeta {{ alpha: {alpha} }}"),
            KernelSpec::GammaToBetaPrime { alpha, d } => write!(f, "GammaToBetaPrime {{ alpha: {alpha}, d: {d} }}"),
            KernelSpec::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl KernelSpec {
    pub fn custom<F: Fn(f64, &mut Rng) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        KernelSpec::Custom(Arc::new(f))
    }

    /// Shape and rate of the mixing variable `G`, when there is one.
    fn mixing(&self) -> Option<(f64, f64)> {
        match *self {
            KernelSpec::GammaToBeta { alpha } => Some((alpha, alpha)),
            KernelSpec::GammaToBetaPrime { alpha, d } => Some((alpha + d, 1.0)),
            _ => None,
        }
    }

    fn map(&self, theta: f64, g: f64) -> f64 {
        match self {
            KernelSpec::GammaToBeta { .. } => theta / (theta + g),
            KernelSpec::GammaToBetaPrime { .. } => theta / g,
            _ => theta,
        }
    }

    pub fn sample(&self, theta: f64, rng: &mut Rng) -> f64 {
        match self {
            KernelSpec::Identity => theta,
            KernelSpec::Custom(f) => f(theta, rng),
            _ => {
                let (shape, rate) = self.mixing().expect("shipped kernels mix over a gamma");
                self.map(theta, sample::gamma_raw(rng, shape, rate))
            }
        }
    }

    /// Replaces every weight of `m` by an independent draw from the kernel.
    pub fn apply(&self, m: &AtomicMeasure, seed: u64) -> AtomicMeasure {
        let mut rng = rng_for(seed, 7, 0);
        let mut out = m.clone();
        for a in &mut out.atoms {
            a.weight = self.sample(a.weight, &mut rng);
        }
        out
    }

    /// The rate measure obtained by mapping `base`, for the shipped kernels.
    pub fn target(&self, base: &RateMeasureSpec) -> Result<RateMeasureSpec> {
        let bad = || CrmError::Incompatible { rep: format!("kernel {self:?}"), target: base.to_string() };
        match (*self).clone() {
            KernelSpec::Identity => Ok(*base),
            KernelSpec::GammaToBeta { alpha } => match *base {
                RateMeasureSpec::Gamma { gamma, lambda, d } if d == 0.0 && lambda == alpha => {
                    RateMeasureSpec::beta_process(gamma, alpha, 0.0)
                }
                _ => Err(bad()),
            },
            KernelSpec::GammaToBetaPrime { alpha, d } => match *base {
                RateMeasureSpec::Gamma { gamma, lambda, d: d0 } if lambda == 1.0 && d0 == d => {
                    RateMeasureSpec::beta_prime_process(gamma, alpha, d)
                }
                _ => Err(bad()),
            },
            KernelSpec::Custom(_) => Err(CrmError::Unsupported("target measure of a custom kernel".into())),
        }
    }

    /// `pi_{kappa,n}(theta) = int pi~(u)^n kappa(theta, du)` for the
    /// likelihood `lik` of the mapped process. Custom kernels have no
    /// deterministic evaluation; use [`KernelSpec::pi_mc`].
    pub fn pi(&self, lik: &Likelihood, n: u32, theta: f64) -> Result<f64> {
        if n == 0 {
            return Ok(1.0);
        }
        match self {
            KernelSpec::Identity => Ok((n as f64 * lik.ln_pi(theta)).exp()),
            KernelSpec::Custom(_) => Err(CrmError::Unsupported("deterministic kernel pi for a custom kernel".into())),
            _ => {
                if theta == 0.0 {
                    return Ok(1.0);
                }
                let (shape, rate) = self.mixing().expect("shipped kernels mix over a gamma");
                let ln_norm = shape * rate.ln() - ln_gamma(shape)?;
                let f = |g: f64| {
                    let ln_dens = ln_norm + (shape - 1.0) * g.ln() - rate * g;
                    (ln_dens + n as f64 * lik.ln_pi(self.map(theta, g))).exp()
                };
                Ok(integrate_positive(f, 0.0, f64::INFINITY, &Precision::quadrature())?.value.min(1.0))
            }
        }
    }

    /// Monte Carlo estimate of [`KernelSpec::pi`].
    pub fn pi_mc(&self, lik: &Likelihood, n: u32, theta: f64, samples: usize, rng: &mut Rng) -> f64 {
        let mut s = 0.0;
        for _ in 0..samples {
            s += (n as f64 * lik.ln_pi(self.sample(theta, rng))).exp();
        }
        s / samples as f64
    }
}
