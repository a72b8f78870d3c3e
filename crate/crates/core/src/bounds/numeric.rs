//! Quadrature and Monte Carlo evaluation of the series and superposition
//! bounds for an arbitrary weight function `w`.
//!
//! Series bounds integrate `w` against the tail `sum_{k>K} delta_{theta_k}`
//! after conditioning on `G = Gamma_K ~ Gam(K, 1)`. Superposition bounds
//! integrate `w` against the tail rate measure of the rounds after `K`.

use super::Weight;
use crate::error::{CrmError, Result};
use crate::exec::{mc_mean, Exec, Rng, RunningStats};
use crate::measures::RateMeasureSpec;
use crate::reps::{sample, RepresentationSpec};
use crate::specialfn::{gamma_excess_mean, integrate_positive, integrate_positive_c, ln_gamma, regularized_gamma_p, Precision};

/// Looser precision for integrals nested inside another integral or
/// evaluated once per Monte Carlo sample.
fn inner_prec() -> Precision {
    Precision { abs_tol: 1e-300, rel_tol: 1e-9, max_iter: 2000 }
}

/// `P(Gam(K, 1) <= t)`, with `F_0 = 1`.
fn gamma_cdf(k: usize, t: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    regularized_gamma_p(k as f64, t).unwrap_or(f64::NAN)
}

fn draw_gamma(rng: &mut Rng, k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        sample::gamma_raw(rng, k as f64, 1.0)
    }
}

/// `int_lo^hi w(theta) nu(d theta)` restricted to the support of `nu`.
fn weighted_mass(spec: &RateMeasureSpec, w: &Weight, hi: f64, prec: &Precision) -> Result<f64> {
    let hi = hi.min(spec.upper_support());
    if !(hi > 0.0) {
        return Ok(0.0);
    }
    let levy = spec.levy();
    // complement measured from the support end, so it is exact near one
    let full = hi == spec.upper_support();
    let f = |t: f64, c: f64| {
        let comp = if full { c } else { 1.0 - t };
        let ld = levy.ln_density_c(t, comp);
        if ld == f64::NEG_INFINITY {
            0.0
        } else {
            times_density(w.eval_c(t, comp), ld)
        }
    };
    Ok(integrate_positive_c(f, 0.0, hi, prec)?.value)
}

/// `x * exp(ld)` without overflowing where the density blows up at zero.
fn times_density(x: f64, ld: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * (ld + x.abs().ln()).exp()
    }
}

fn unsupported(what: &str, rep: &RepresentationSpec) -> CrmError {
    CrmError::Unsupported(format!("{what} for {}", rep.kind()))
}

/// Series bound by deterministic quadrature.
pub(crate) fn series_quadrature(spec: &RateMeasureSpec, rep: &RepresentationSpec, w: &Weight, k: usize) -> Result<f64> {
    let prec = Precision::quadrature();
    let levy = spec.levy();
    let upper = spec.upper_support();
    match *rep {
        RepresentationSpec::InverseLevy | RepresentationSpec::Rejection { .. } => {
            // int F_K(tail(x)) w(x) nu(x) dx, tail of nu or of the dominating measure
            let tail = |x: f64| match rep {
                RepresentationSpec::Rejection { mu } => mu.tail(x),
                _ => spec.tail(x).unwrap_or(f64::NAN),
            };
            let f = |t: f64, c: f64| {
                let ld = levy.ln_density_c(t, c);
                if ld == f64::NEG_INFINITY {
                    return 0.0;
                }
                let fk = gamma_cdf(k, tail(t));
                if fk == 0.0 {
                    0.0
                } else {
                    times_density(fk * w.eval_c(t, c), ld)
                }
            };
            Ok(integrate_positive_c(f, 0.0, upper, &prec)?.value)
        }
        RepresentationSpec::Thinning { g } => {
            // int w(v) nu(v) E[(r - G)_+] / r dv with r = nu / g
            let f = |v: f64, c: f64| {
                let ld = levy.ln_density_c(v, c);
                if ld == f64::NEG_INFINITY {
                    return 0.0;
                }
                let lg = g.ln_density_c(v, c);
                let frac = if lg == f64::NEG_INFINITY {
                    1.0
                } else {
                    let r = (ld - lg).exp();
                    if r == 0.0 {
                        return 0.0;
                    }
                    match gamma_excess_mean(k, r) {
                        Ok(h) => h / r,
                        Err(_) => f64::NAN,
                    }
                };
                times_density(w.eval_c(v, c) * frac, ld)
            };
            Ok(integrate_positive_c(f, 0.0, upper, &prec)?.value)
        }
        RepresentationSpec::Bondesson { c, g, .. } => {
            // int c S_g(y)/y E_G[w(y e^{-G/c})] dy
            let inner = inner_prec();
            let ln_gk = if k > 0 { ln_gamma(k as f64)? } else { 0.0 };
            let shrink = |y: f64| -> f64 {
                if k == 0 {
                    return w.eval(y);
                }
                let kf = k as f64;
                let h = |t: f64| {
                    let dens = ((kf - 1.0) * t.ln() - t - ln_gk).exp();
                    if dens == 0.0 {
                        0.0
                    } else {
                        w.eval(y * (-t / c).exp()) * dens
                    }
                };
                integrate_positive(h, 0.0, f64::INFINITY, &inner).map_or(f64::NAN, |r| r.value)
            };
            let f = |y: f64| {
                let s = g.survival(y).unwrap_or(f64::NAN);
                if s == 0.0 {
                    0.0
                } else {
                    c * s / y * shrink(y)
                }
            };
            Ok(integrate_positive(f, 0.0, g.upper_support(), &prec)?.value)
        }
        _ => Err(unsupported("series quadrature", rep)),
    }
}

/// Series bound by Monte Carlo over `G_K` and the auxiliary variable.
pub(crate) fn series_mc(
    spec: &RateMeasureSpec,
    rep: &RepresentationSpec,
    w: &Weight,
    k: usize,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<RunningStats> {
    let prec = inner_prec();
    let levy = spec.levy();
    match *rep {
        RepresentationSpec::InverseLevy => mc_mean(samples, seed, 21, exec, |rng| {
            let x = if k == 0 { f64::INFINITY } else { spec.tail_inverse(draw_gamma(rng, k))? };
            weighted_mass(spec, w, x, &prec)
        }),
        RepresentationSpec::Rejection { mu } => mc_mean(samples, seed, 22, exec, |rng| {
            let x = if k == 0 { f64::INFINITY } else { mu.tail_inverse(draw_gamma(rng, k)) };
            weighted_mass(spec, w, x, &prec)
        }),
        RepresentationSpec::Thinning { g } => {
            let norm = g.ln_normalizer();
            mc_mean(samples, seed, 23, exec, |rng| {
                let gk = draw_gamma(rng, k);
                let v = g.sample(rng);
                let ld = levy.ln_density(v);
                if ld == f64::NEG_INFINITY {
                    return Ok(0.0);
                }
                let r = (ld - g.ln_kernel(v) + norm).exp();
                Ok(w.eval(v) * (r - gk).max(0.0))
            })
        }
        RepresentationSpec::Bondesson { c, g, .. } => mc_mean(samples, seed, 24, exec, |rng| {
            let gk = draw_gamma(rng, k);
            let y = g.sample(rng) * (-gk / c).exp();
            if !(y > 0.0) {
                return Ok(0.0);
            }
            Ok(c * integrate_positive(|s| w.eval(s) / s, 0.0, y, &prec)?.value)
        }),
        _ => Err(unsupported("series Monte Carlo", rep)),
    }
}

/// Superposition bound by quadrature of the tail rate measure.
pub(crate) fn superposition_quadrature(spec: &RateMeasureSpec, rep: &RepresentationSpec, w: &Weight, k: usize) -> Result<f64> {
    let prec = Precision::quadrature();
    match *rep {
        RepresentationSpec::SizeBiased { likelihood } => {
            let levy = spec.levy();
            let kf = k as f64;
            let f = |t: f64, c: f64| {
                let ld = levy.ln_density_c(t, c);
                if ld == f64::NEG_INFINITY {
                    return 0.0;
                }
                let lp = if k == 0 { 0.0 } else { kf * likelihood.ln_pi_c(t, c) };
                w.eval_c(t, c) * (ld + lp).exp()
            };
            Ok(integrate_positive_c(f, 0.0, spec.upper_support(), &prec)?.value)
        }
        RepresentationSpec::DecoupledBondesson { c, g, xi, .. } => {
            // c int_0^inf P(K, xi t) E_V[w(V e^{-t})] dt
            let inner = inner_prec();
            let f = |t: f64| {
                let p = gamma_cdf(k, xi * t);
                if p == 0.0 {
                    return 0.0;
                }
                let shrink = (-t).exp();
                p * g.expect(|v| w.eval(v * shrink), &inner).unwrap_or(f64::NAN)
            };
            Ok(c * integrate_positive(f, 0.0, f64::INFINITY, &prec)?.value)
        }
        _ => Err(unsupported("superposition quadrature", rep)),
    }
}

/// Relative size of the neglected remainder at which the power-law tail sum
/// stops.
const PL_REMAINDER: f64 = 1e-4;
/// Hard cap on the rounds visited past `K` by the power-law tail sum.
const PL_MAX_ROUNDS: usize = 1_000_000;

/// Superposition bound by Monte Carlo over the auxiliary variables.
pub(crate) fn superposition_mc(
    rep: &RepresentationSpec,
    w: &Weight,
    k: usize,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<RunningStats> {
    let slope = w.slope();
    match *rep {
        RepresentationSpec::DecoupledBondesson { c, g, xi, .. } => mc_mean(samples, seed, 25, exec, |rng| {
            // one coupled path T_{K+1} < T_{K+2} < ... serves every round
            let v = g.sample(rng);
            let mut t = sample::gamma_raw(rng, (k + 1) as f64, xi);
            let mut sum = 0.0;
            loop {
                let theta = v * (-t).exp();
                sum += w.eval(theta);
                // E[sum over later rounds] <= L theta xi
                let rest = slope.map_or(theta, |l| l * theta * xi);
                if rest <= 1e-12 * sum || theta < 1e-300 {
                    break;
                }
                t += sample::gamma_raw(rng, 1.0, xi);
            }
            Ok(c / xi * sum)
        }),
        RepresentationSpec::PowerLaw { mass, alpha, d, g } => {
            let l = slope.ok_or_else(|| CrmError::Unsupported("power-law Monte Carlo needs a weight with w(theta) <= L theta".into()))?;
            mc_mean(samples, seed, 26, exec, |rng| {
                let v = g.sample(rng);
                let mut stick = 1.0;
                for j in 1..=k {
                    stick *= sample::beta_pair_raw(rng, 1.0 - d, alpha + j as f64 * d).1;
                }
                let mut sum = 0.0;
                for j in k + 1..=k + PL_MAX_ROUNDS {
                    // the unbroken stick bounds the mass of every later round
                    let rest = l * v * stick;
                    if rest <= PL_REMAINDER * (sum + rest) || rest == 0.0 {
                        sum += rest;
                        break;
                    }
                    let (u, q) = sample::beta_pair_raw(rng, 1.0 - d, alpha + j as f64 * d);
                    sum += w.eval(v * u * stick);
                    stick *= q;
                    if j == k + PL_MAX_ROUNDS {
                        sum += l * v * stick;
                    }
                }
                Ok(mass * sum)
            })
        }
        _ => Err(unsupported("superposition Monte Carlo", rep)),
    }
}
