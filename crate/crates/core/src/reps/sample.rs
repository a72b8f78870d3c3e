//! Variate generators used by the representations. Each draw is recorded in
//! a [`DrawLedger`] under the category of the variable it produces.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma, Poisson};

use super::DrawLedger;
use crate::exec::Rng;

/// Uniform on the open interval `(0, 1)`.
pub(crate) fn open01(rng: &mut Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub(crate) fn uniform(rng: &mut Rng, ledger: &mut DrawLedger) -> f64 {
    ledger.uniforms += 1;
    open01(rng)
}

pub(crate) fn exponential(rng: &mut Rng, ledger: &mut DrawLedger) -> f64 {
    ledger.exponentials += 1;
    -open01(rng).ln()
}

/// `Gamma(shape, rate)` without ledger accounting.
pub(crate) fn gamma_raw(rng: &mut Rng, shape: f64, rate: f64) -> f64 {
    if shape == 1.0 {
        return -open01(rng).ln() / rate;
    }
    Gamma::new(shape, 1.0 / rate).expect("gamma parameters are validated upstream").sample(rng)
}

pub(crate) fn gamma(rng: &mut Rng, shape: f64, rate: f64, ledger: &mut DrawLedger) -> f64 {
    ledger.gammas += 1;
    gamma_raw(rng, shape, rate)
}

/// `(B, 1 - B)` for `B ~ Beta(a, b)`, each computed without cancellation.
pub(crate) fn beta_pair_raw(rng: &mut Rng, a: f64, b: f64) -> (f64, f64) {
    if a == 1.0 {
        if b == 1.0 {
            let w = open01(rng);
            return (1.0 - w, w);
        }
        let w = open01(rng).powf(1.0 / b);
        return (1.0 - w, w);
    }
    if b == 1.0 {
        let w = open01(rng).powf(1.0 / a);
        return (w, 1.0 - w);
    }
    let x = gamma_raw(rng, a, 1.0);
    let y = gamma_raw(rng, b, 1.0);
    let s = x + y;
    if s == 0.0 {
        // both underflowed; the smaller shape dominates near zero
        return if a < b { (1.0, 0.0) } else { (0.0, 1.0) };
    }
    (x / s, y / s)
}

pub(crate) fn beta_pair(rng: &mut Rng, a: f64, b: f64, ledger: &mut DrawLedger) -> (f64, f64) {
    ledger.betas += 1;
    beta_pair_raw(rng, a, b)
}

/// `BetaPrime(a, b)`, drawn as `B / (1 - B)`.
pub(crate) fn beta_prime_raw(rng: &mut Rng, a: f64, b: f64) -> f64 {
    let (p, q) = beta_pair_raw(rng, a, b);
    p / q
}

pub(crate) fn poisson_raw(rng: &mut Rng, mean: f64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    if mean < 30.0 {
        // sequential inversion
        let u = open01(rng);
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            if p < 1e-300 && cdf < u {
                // rounding left a sliver of mass above cdf; stop here
                break;
            }
        }
        return k;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

pub(crate) fn poisson(rng: &mut Rng, mean: f64, ledger: &mut DrawLedger) -> u64 {
    ledger.poissons += 1;
    poisson_raw(rng, mean)
}
