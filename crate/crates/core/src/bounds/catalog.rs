//! Closed-form truncation bounds for the conjugate pairs.
//!
//! Each entry returns `B_{N,K}` and an ASCII tag describing its rate as
//! `K -> inf`. Entries that come from an inequality return the bound, not
//! the integral it bounds.

use crate::error::Result;
use crate::measures::{Likelihood, RateMeasureSpec, SizeBiasedWeights};
use crate::reps::{default_dominating, RepresentationSpec};
use crate::specialfn::{digamma, integrate_positive, lambert_w0, ln_gamma, Precision};

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    pub b: f64,
    pub asymptote: String,
}

fn entry(b: f64, asymptote: impl Into<String>) -> Result<Option<ClosedForm>> {
    Ok(Some(ClosedForm { b, asymptote: asymptote.into() }))
}

fn w0(y: f64) -> Result<f64> {
    lambert_w0(y, &Precision::default())
}

/// `K ln(z / K)`, taken as zero at `K = 0`.
fn k_log_over_k(k: f64, z: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * (z / k).ln()
    }
}

/// Looks up `(spec, lik, rep)` in the catalog. `Ok(None)` means the
/// combination has no closed form.
pub fn lookup(spec: &RateMeasureSpec, lik: &Likelihood, rep: &RepresentationSpec, n: u32, k: usize) -> Result<Option<ClosedForm>> {
    rep.check(spec)?;
    lik.check_compatible(spec)?;
    let nf = n as f64;
    let kf = k as f64;
    let conjugate = *lik == Likelihood::default_for(spec.family());
    match (*spec, *rep) {
        (_, RepresentationSpec::SizeBiased { likelihood }) => {
            if likelihood != *lik {
                return Ok(None);
            }
            size_biased(spec, lik, n, k)
        }
        _ if !conjugate => Ok(None),
        (RateMeasureSpec::Gamma { gamma, lambda, d }, rep) => gamma_entry(gamma, lambda, d, spec, rep, nf, kf),
        (RateMeasureSpec::Beta { gamma, alpha, d }, rep) => beta_entry(gamma, alpha, d, spec, rep, nf, kf),
        (RateMeasureSpec::BetaPrime { gamma, alpha, d }, rep) => beta_prime_entry(gamma, alpha, d, spec, rep, nf, kf),
        (RateMeasureSpec::Lomax { gamma, lambda }, RepresentationSpec::InverseLevy) => {
            let y = 1.0 / (3.0 * gamma * lambda.powf((kf + 2.0) / (kf + 1.0)) * (kf + 1.0).powf(1.0 / (kf + 1.0)));
            let b = kf * w0(y)?;
            let printed = 2.0 * nf * gamma * (1.0 + 1.0 / (3.0 * gamma * lambda)) / b.exp_m1();
            let two_term = if k == 0 {
                f64::INFINITY
            } else {
                nf * gamma * lambda * (1.0 / (lambda * b.exp_m1()) + b * (kf * (3.0 * gamma * lambda * b / kf).ln()).exp())
            };
            entry(printed.max(two_term), "2 N gamma (1 + 1/(3 gamma lambda)) / (exp(K W0(1/(3 gamma lambda K))) - 1)")
        }
        _ => Ok(None),
    }
}

fn is_default_rejection(spec: &RateMeasureSpec, rep: &RepresentationSpec) -> Result<bool> {
    Ok(matches!(rep, RepresentationSpec::Rejection { mu } if *mu == default_dominating(spec)?))
}

/// `prod_{j=1}^K (a + j d) / (a + j d - d + 1)`.
fn stick_product(a: f64, d: f64, k: f64) -> Result<f64> {
    if d == 0.0 {
        return Ok((k * (a / (a + 1.0)).ln()).exp());
    }
    let (p, q) = (a / d, (a + 1.0) / d - 1.0);
    Ok((ln_gamma(p + k + 1.0)? - ln_gamma(p + 1.0)? - ln_gamma(q + k + 1.0)? + ln_gamma(q + 1.0)?).exp())
}

fn gamma_entry(
    gamma: f64,
    lambda: f64,
    d: f64,
    spec: &RateMeasureSpec,
    rep: RepresentationSpec,
    nf: f64,
    kf: f64,
) -> Result<Option<ClosedForm>> {
    match rep {
        RepresentationSpec::Bondesson { .. } => {
            let r = gamma * lambda / (1.0 + gamma * lambda);
            entry(nf * gamma * r.powf(kf), "N gamma (gamma lambda / (1 + gamma lambda))^K")
        }
        RepresentationSpec::DecoupledBondesson { xi, .. } => {
            entry(nf * gamma * (xi / (1.0 + xi)).powf(kf), "N gamma (xi / (1 + xi))^K")
        }
        RepresentationSpec::PowerLaw { .. } => {
            let tag = if d == 0.0 {
                "N gamma (lambda / (1 + lambda))^K"
            } else {
                "N gamma Gamma((lambda + 1)/d) / Gamma(lambda/d + 1) K^(1 - 1/d)"
            };
            entry(nf * gamma * stick_product(lambda, d, kf)?, tag)
        }
        RepresentationSpec::Rejection { .. } if is_default_rejection(spec, &rep)? => {
            if d == 0.0 {
                let b = 2.0 * nf * gamma / (kf * w0(1.0 / (3.0 * gamma * lambda))?).exp_m1();
                return entry(b, "2 N gamma exp(-K W0(1/(3 gamma lambda)))");
            }
            let g1d = ln_gamma(1.0 - d)?.exp();
            let c = g1d / d * ((1.0 + lambda).powf(d) - lambda.powf(d));
            let gp = gamma * lambda.powf(1.0 - d) / (d * g1d);
            let ln_a = ((1.0 - d).ln() + c.ln() + k_log_over_k(kf, 3.0 * gp)) / (1.0 - d + d * kf);
            let b = 2.0 * nf * (gamma * lambda.powf(1.0 - d) / g1d) / (1.0 - d) * ((1.0 - d) * ln_a).exp();
            entry(b, "C K^(-(1-d)/d)")
        }
        _ => Ok(None),
    }
}

fn beta_entry(
    gamma: f64,
    alpha: f64,
    d: f64,
    spec: &RateMeasureSpec,
    rep: RepresentationSpec,
    nf: f64,
    kf: f64,
) -> Result<Option<ClosedForm>> {
    // mean of the Bondesson V, absorbed into the prefactor
    let paisley = alpha / (alpha + 1.0);
    match rep {
        RepresentationSpec::Bondesson { .. } => {
            let r = gamma * alpha / (1.0 + gamma * alpha);
            if alpha >= 1.0 {
                entry(nf * gamma * r.powf(kf), "N gamma (gamma alpha / (1 + gamma alpha))^K")
            } else {
                entry(nf * gamma * paisley * r.powf(kf), "N gamma alpha/(alpha + 1) (gamma alpha / (1 + gamma alpha))^K")
            }
        }
        RepresentationSpec::DecoupledBondesson { xi, .. } => {
            let pre = if alpha >= 1.0 { 1.0 } else { paisley };
            entry(nf * gamma * pre * (xi / (1.0 + xi)).powf(kf), "N gamma (xi / (1 + xi))^K")
        }
        RepresentationSpec::PowerLaw { .. } => {
            let tag = if d == 0.0 {
                "N gamma (alpha / (1 + alpha))^K"
            } else {
                "N gamma Gamma((alpha + 1)/d) / Gamma(alpha/d + 1) K^(1 - 1/d)"
            };
            entry(nf * gamma * stick_product(alpha, d, kf)?, tag)
        }
        RepresentationSpec::Rejection { .. } if is_default_rejection(spec, &rep)? => {
            if d == 0.0 {
                let b = 2.0 * nf * gamma * alpha * (-kf * w0(1.0 / (3.0 * gamma * alpha))?).exp();
                return entry(b, "2 N gamma alpha exp(-K W0(1/(3 gamma alpha)))");
            }
            let gp = gamma * (ln_gamma(alpha + 1.0)? - ln_gamma(1.0 - d)? - ln_gamma(alpha + d)?).exp();
            let ln_a = ((1.0 - d).ln() + k_log_over_k(kf, 3.0 * gp / d)) / (1.0 + d * kf);
            entry(2.0 * nf * gp / (1.0 - d) * ((1.0 - d) * ln_a).exp(), "C K^(-(1-d)/d)")
        }
        _ => Ok(None),
    }
}

fn beta_prime_entry(
    gamma: f64,
    alpha: f64,
    d: f64,
    spec: &RateMeasureSpec,
    rep: RepresentationSpec,
    nf: f64,
    kf: f64,
) -> Result<Option<ClosedForm>> {
    match rep {
        RepresentationSpec::Bondesson { .. } => {
            // Jensen on the concave x / (1 + v x) with x = exp(-G_K / c), then
            // int (1 + v)^-alpha (1 + m v)^-1 dv by quadrature
            let c = gamma * alpha;
            let m = (kf * (c / (1.0 + c)).ln()).exp();
            let tail = integrate_positive(
                |v| (-alpha * v.ln_1p() - (m * v).ln_1p()).exp(),
                0.0,
                f64::INFINITY,
                &Precision { abs_tol: 1e-300, rel_tol: 1e-13, max_iter: 2000 },
            )?
            .value;
            entry(nf * c * m * tail, "N gamma alpha m int (1 + v)^-alpha (1 + m v)^-1 dv, m = (gamma alpha / (1 + gamma alpha))^K")
        }
        RepresentationSpec::DecoupledBondesson { xi, .. } if alpha > 1.0 => {
            entry(nf * gamma * alpha / (alpha - 1.0) * (xi / (1.0 + xi)).powf(kf), "N gamma alpha/(alpha - 1) (xi / (1 + xi))^K")
        }
        RepresentationSpec::PowerLaw { .. } if alpha + d > 1.0 => {
            let tag = if d == 0.0 {
                "N gamma alpha/(alpha - 1) 2^-K"
            } else {
                "N gamma alpha/(alpha + d - 1) Gamma(2/d) / Gamma(1/d + 1) K^(1 - 1/d)"
            };
            entry(nf * gamma * alpha / (alpha + d - 1.0) * stick_product(1.0, d, kf)?, tag)
        }
        RepresentationSpec::Rejection { .. } if is_default_rejection(spec, &rep)? => {
            if d == 0.0 {
                let ka = kf + alpha;
                let ln_arg = -ka.ln() + (alpha / gamma).ln() / ka - k_log_over_k(kf, 3.0 * alpha * gamma) / ka;
                let b = ka * w0(ln_arg.exp())?;
                let printed = 2.0 * (-b).exp();
                let two_term = 1.0 / b.exp_m1() + (k_log_over_k(kf, 3.0 * gamma * alpha) + ka * b.ln()).exp() / alpha;
                return entry(nf * gamma * alpha * printed.max(two_term), "2 N gamma alpha exp(-(K + alpha) W0(1/(3 alpha gamma)))");
            }
            if alpha <= 0.0 {
                return Ok(None);
            }
            let c = gamma * (ln_gamma(alpha + 1.0)? - ln_gamma(1.0 - d)? - ln_gamma(alpha + d)?).exp();
            let ln_a = (((1.0 - d) / alpha).ln() + k_log_over_k(kf, 3.0 * c / d)) / (1.0 + d * kf);
            entry(2.0 * nf * c / (1.0 - d) * ((1.0 - d) * ln_a).exp(), "C K^(-1/d)")
        }
        _ => Ok(None),
    }
}

/// `sum_{n=1}^N eta_{K+n}`, telescoped where the sum collapses.
fn size_biased(spec: &RateMeasureSpec, lik: &Likelihood, n: u32, k: usize) -> Result<Option<ClosedForm>> {
    let nf = n as f64;
    let kf = k as f64;
    if n == 0 {
        return entry(0.0, "");
    }
    match (*spec, *lik) {
        (RateMeasureSpec::Gamma { gamma, lambda, d }, _) => {
            let lk = lambda + kf;
            if d == 0.0 {
                entry(gamma * lambda * (nf / lk).ln_1p(), "N gamma lambda K^-1")
            } else {
                let b = gamma * lambda.powf(1.0 - d) / d * (d * lk.ln()).exp() * (d * (nf / lk).ln_1p()).exp_m1();
                entry(b, "N gamma lambda^(1-d) K^(d-1)")
            }
        }
        (RateMeasureSpec::Beta { gamma, alpha, d } | RateMeasureSpec::BetaPrime { gamma, alpha, d }, _) => {
            // trait counts advance by s per round; s = 1 for the Bernoulli-type pairs
            let s = match *lik {
                Likelihood::NegativeBinomial { s } => s,
                _ => 1.0,
            };
            let lo = alpha + s * kf;
            let hi = alpha + s * (kf + nf);
            if d == 0.0 {
                let b = if s.fract() == 0.0 {
                    (0..(s * nf) as u64).map(|j| 1.0 / (lo + j as f64)).sum::<f64>()
                } else {
                    digamma(hi)? - digamma(lo)?
                };
                return entry(gamma * alpha * b, "N gamma alpha K^-1");
            }
            if lo <= 0.0 {
                // alpha <= 0 at K = 0: no shared log scale, sum the rates
                let w = SizeBiasedWeights::new(spec, lik)?;
                let b = (1..=n as usize).map(|j| w.eta(k + j)).sum::<Result<f64>>()?;
                return entry(b, "N gamma Gamma(alpha + 1)/Gamma(alpha + d) K^(d-1)");
            }
            let pre = gamma / d * (ln_gamma(alpha + 1.0)? - ln_gamma(alpha + d)?).exp();
            let ln_r = |x: f64| -> Result<f64> { Ok(ln_gamma(x + d)? - ln_gamma(x)?) };
            let (a, b) = (ln_r(lo)?, ln_r(hi)?);
            entry(pre * a.exp() * (b - a).exp_m1(), "N gamma Gamma(alpha + 1)/Gamma(alpha + d) K^(d-1)")
        }
        _ => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reps::RepKind;

    fn get(spec: &RateMeasureSpec, kind: RepKind, n: u32, k: usize) -> f64 {
        let rep = RepresentationSpec::new(kind, spec, None).unwrap();
        let lik = Likelihood::default_for(spec.family());
        lookup(spec, &lik, &rep, n, k).unwrap().unwrap().b
    }

    #[test]
    fn spot_values() {
        let gp = RateMeasureSpec::gamma_process(1.0, 1.0, 0.0).unwrap();
        assert_eq!(get(&gp, RepKind::Bondesson, 1, 10), 9.765625e-4);
        let sb = get(&gp, RepKind::SizeBiased, 1, 10);
        assert!((sb - (12f64.ln() - 11f64.ln())).abs() < 1e-15);
        assert_eq!(get(&gp, RepKind::Bondesson, 0, 3), 0.0);
    }

    #[test]
    fn telescoped_sums_match_eta() {
        let specs = [
            (RateMeasureSpec::gamma_process(1.5, 2.0, 0.3).unwrap(), Likelihood::Poisson),
            (RateMeasureSpec::beta_process(2.0, 1.5, 0.4).unwrap(), Likelihood::Bernoulli),
            (RateMeasureSpec::beta_process(2.0, 1.5, 0.4).unwrap(), Likelihood::NegativeBinomial { s: 2.0 }),
            (RateMeasureSpec::beta_process(2.0, 1.5, 0.0).unwrap(), Likelihood::NegativeBinomial { s: 1.5 }),
            (RateMeasureSpec::beta_prime_process(1.0, 0.5, 0.2).unwrap(), Likelihood::OddsBernoulli),
        ];
        for (spec, lik) in specs {
            let w = SizeBiasedWeights::new(&spec, &lik).unwrap();
            let rep = RepresentationSpec::SizeBiased { likelihood: lik };
            for k in [0, 1, 10] {
                let direct: f64 = (1..=5).map(|j| w.eta(k + j).unwrap()).sum();
                let b = lookup(&spec, &lik, &rep, 5, k).unwrap().unwrap().b;
                assert!((b - direct).abs() <= 1e-12 * direct, "{spec} {lik} k={k}: {b} vs {direct}");
            }
        }
    }

    #[test]
    fn stick_product_matches_direct() {
        for (a, d) in [(2.0, 0.5), (0.3, 0.1), (1.0, 0.0)] {
            let mut p = 1.0;
            for k in 1..=50 {
                p *= (a + k as f64 * d) / (a + k as f64 * d - d + 1.0);
                assert!((stick_product(a, d, k as f64).unwrap() - p).abs() <= 1e-12 * p);
            }
        }
    }

    #[test]
    fn thinning_is_not_catalogued() {
        let gp = RateMeasureSpec::gamma_process(1.0, 1.0, 0.0).unwrap();
        let rep = RepresentationSpec::new(RepKind::Thinning, &gp, None).unwrap();
        assert_eq!(lookup(&gp, &Likelihood::Poisson, &rep, 1, 3).unwrap(), None);
    }
}
