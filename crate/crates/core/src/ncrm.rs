//! Normalized CRMs: normalization of a truncated measure, categorical
//! sampling by the Gumbel-max trick, and closed-form truncation bounds.
//!
//! For an NCRM the bound on the total variation is `1 - (1 - B_K)^N`.

use std::fmt;

use rand::Rng as _;

use crate::bounds::Hyperprior;
use crate::error::{CrmError, Result};
use crate::exec::{rng_for, Rng};
use crate::measures::{Likelihood, RateMeasureSpec};
use crate::reps::{AtomicMeasure, RepresentationSpec};
use crate::specialfn::{golden_section_min, integrate_positive, ln_gamma, ln_upper_incomplete_gamma, Precision};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedAtom {
    pub k: usize,
    pub i: usize,
    pub prob: f64,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormalizedMeasure {
    pub atoms: Vec<NormalizedAtom>,
    pub source_k: usize,
}

impl NormalizedMeasure {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.prob).collect()
    }
}

/// Divides every weight by the total mass. Atom order and labels are kept.
pub fn normalize(m: &AtomicMeasure) -> Result<NormalizedMeasure> {
    let total = m.total_mass();
    if !(total > 0.0 && total.is_finite()) {
        return Err(CrmError::Domain { what: "total mass of the measure to normalize", value: total });
    }
    let atoms = m.atoms.iter().map(|a| NormalizedAtom { k: a.k, i: a.i, prob: a.weight / total, label: a.label }).collect();
    Ok(NormalizedMeasure { atoms, source_k: m.truncation })
}

/// A standard Gumbel variate.
fn gumbel(rng: &mut Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return -(-u.ln()).ln();
        }
    }
}

/// `argmax_k (ln p_k + T_k)` for i.i.d. Gumbel `T_k`. Atoms with zero
/// probability are never selected.
pub fn gumbel_max_index(ln_p: &[f64], rng: &mut Rng) -> Option<usize> {
    let mut best = None;
    let mut best_v = f64::NEG_INFINITY;
    for (k, &lp) in ln_p.iter().enumerate() {
        if lp == f64::NEG_INFINITY {
            continue;
        }
        let v = lp + gumbel(rng);
        if v > best_v {
            best_v = v;
            best = Some(k);
        }
    }
    best
}

/// `n` independent atom indices drawn from `m` with the Gumbel-max trick.
pub fn gumbel_max_sample(m: &NormalizedMeasure, n: usize, rng: &mut Rng) -> Vec<usize> {
    let ln_p: Vec<f64> = m.atoms.iter().map(|a| a.prob.ln()).collect();
    (0..n).filter_map(|_| gumbel_max_index(&ln_p, rng)).collect()
}

/// [`gumbel_max_sample`] from a seed.
pub fn gumbel_max_sample_seeded(m: &NormalizedMeasure, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_for(seed, 31, 0);
    gumbel_max_sample(m, n, &mut rng)
}

/// The catalogued NCRM truncation bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NcrmFamily {
    /// Dirichlet process with concentration `gamma`, Bondesson representation
    DpBRep { gamma: f64 },
    /// Dirichlet process, decoupled Bondesson representation
    DpDbRep { gamma: f64, xi: f64 },
    /// Normalized gamma process, size-biased representation
    NGammaSbRep { gamma: f64, lambda: f64, d: f64 },
}

impl NcrmFamily {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        let ok = match *self {
            NcrmFamily::DpBRep { gamma } => pos(gamma),
            NcrmFamily::DpDbRep { gamma, xi } => pos(gamma) && pos(xi),
            NcrmFamily::NGammaSbRep { gamma, lambda, d } => pos(gamma) && pos(lambda) && (0.0..1.0).contains(&d),
        };
        if ok {
            Ok(())
        } else {
            Err(CrmError::InvalidParameter(format!("invalid NCRM parameters {self}")))
        }
    }

    /// The catalogued family whose bound covers the normalization of
    /// `spec` under `rep`, if any.
    pub fn from_rep(spec: &RateMeasureSpec, rep: &RepresentationSpec) -> Option<Self> {
        let RateMeasureSpec::Gamma { gamma, lambda, d } = *spec else {
            return None;
        };
        match *rep {
            RepresentationSpec::Bondesson { c, .. } if d == 0.0 => Some(NcrmFamily::DpBRep { gamma: c }),
            RepresentationSpec::DecoupledBondesson { c, xi, .. } if d == 0.0 => Some(NcrmFamily::DpDbRep { gamma: c, xi }),
            RepresentationSpec::SizeBiased { likelihood: Likelihood::Poisson } => Some(NcrmFamily::NGammaSbRep { gamma, lambda, d }),
            _ => None,
        }
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            NcrmFamily::DpBRep { gamma } | NcrmFamily::DpDbRep { gamma, .. } | NcrmFamily::NGammaSbRep { gamma, .. } => gamma,
        }
    }

    pub fn with_gamma(&self, g: f64) -> Self {
        match *self {
            NcrmFamily::DpBRep { .. } => NcrmFamily::DpBRep { gamma: g },
            NcrmFamily::DpDbRep { xi, .. } => NcrmFamily::DpDbRep { gamma: g, xi },
            NcrmFamily::NGammaSbRep { lambda, d, .. } => NcrmFamily::NGammaSbRep { gamma: g, lambda, d },
        }
    }
}

impl fmt::Display for NcrmFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NcrmFamily::DpBRep { gamma } => write!(f, "DP({gamma}) bondesson"),
            NcrmFamily::DpDbRep { gamma, xi } => write!(f, "DP({gamma}) db(xi={xi})"),
            NcrmFamily::NGammaSbRep { gamma, lambda, d } => write!(f, "NGammaP({gamma}, {lambda}, {d}) sb"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcrmBoundResult {
    pub k: usize,
    pub n: u32,
    pub b_k: f64,
    pub error_bound: f64,
    /// Minimizing free parameter of the decoupled Bondesson bound.
    pub free_param_a: Option<f64>,
    pub asymptote: Option<String>,
}

/// `1 - (1 - b)^n` clamped to `[0, 1]`.
pub fn ncrm_error_from_b(b: f64, n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if b >= 1.0 {
        return 1.0;
    }
    (-(n as f64 * (-b).ln_1p()).exp_m1()).clamp(0.0, 1.0)
}

impl NcrmBoundResult {
    fn new(k: usize, n: u32, b_k: f64) -> Self {
        NcrmBoundResult { k, n, b_k, error_bound: ncrm_error_from_b(b_k, n), free_param_a: None, asymptote: None }
    }
}

/// `gamma / (a (gamma - a)) (xi / (xi + a))^K`, valid for
/// `a in (0, 1] intersected with (0, gamma)`.
pub fn dp_db_bound_at(gamma: f64, xi: f64, k: usize, a: f64) -> f64 {
    if !(a > 0.0 && a <= 1.0 && a < gamma) {
        return f64::INFINITY;
    }
    gamma / (a * (gamma - a)) * (k as f64 * (xi / (xi + a)).ln()).exp()
}

/// Closed-form `B_K` and the resulting error bound for `n` observations.
pub fn ncrm_bound_closed_form(family: &NcrmFamily, n: u32, k: usize) -> Result<NcrmBoundResult> {
    family.validate()?;
    let kf = k as f64;
    let mut r = match *family {
        NcrmFamily::DpBRep { gamma } => {
            let mut r = NcrmBoundResult::new(k, n, (kf * (gamma / (1.0 + gamma)).ln()).exp());
            r.asymptote = Some("N (gamma/(gamma+1))^K".into());
            r
        }
        NcrmFamily::DpDbRep { gamma, xi } => {
            let hi = gamma.min(1.0);
            let prec = Precision { abs_tol: 1e-10, rel_tol: 1e-12, max_iter: 500 };
            let (a, b) = golden_section_min(|a| dp_db_bound_at(gamma, xi, k, a), 0.0, hi, &prec);
            let mut r = NcrmBoundResult::new(k, n, b);
            r.free_param_a = Some(a);
            r.asymptote = Some("N gamma/(a (gamma - a)) (xi/(xi + a))^K".into());
            r
        }
        NcrmFamily::NGammaSbRep { gamma, lambda, d } => {
            if d > 0.0 {
                let sigma = gamma * lambda / d;
                let ln_c = sigma + (1.0 - 1.0 / d) * sigma.ln() + (1.0 - d) * lambda.ln() + ln_upper_incomplete_gamma(1.0 / d, sigma)?;
                let mut r = NcrmBoundResult::new(k, n, (ln_c + (d - 1.0) * (kf + lambda).ln()).exp());
                r.asymptote = Some("N C K^(d-1)".into());
                r
            } else {
                let gl = gamma * lambda;
                let kl = kf + lambda;
                let inner = if (gl - 1.0).abs() > 1e-8 {
                    (kl.powf(1.0 - gl) / gl - lambda.powf(1.0 - gl)) / ((1.0 - gl) * kl)
                } else if k == 0 {
                    1.0 / lambda
                } else {
                    (kf / lambda).ln_1p() / kf
                };
                let mut r = NcrmBoundResult::new(k, n, gamma * lambda.powf(1.0 + gl) * inner);
                r.asymptote = Some(if (gl - 1.0).abs() > 1e-8 { "N C K^-min(1, gamma lambda)" } else { "N lambda K^-1 log K" }.into());
                r
            }
        }
    };
    if n == 0 {
        r.error_bound = 0.0;
    }
    Ok(r)
}

/// `E[B_K(gamma)]` under a prior on the concentration `gamma`, with error
/// bound `1 - (1 - E[B_K])^N`. The Dirichlet process under a unit-scale
/// Lomax prior has the closed form `Gamma(a+1) Gamma(K+1) / Gamma(a+K+1)`;
/// other pairs integrate `min(1, B_K)` against the prior.
pub fn ncrm_bound_with_hyperprior(family: &NcrmFamily, hp: &Hyperprior, n: u32, k: usize) -> Result<NcrmBoundResult> {
    family.validate()?;
    hp.validate()?;
    match (*family, *hp) {
        (_, Hyperprior::Point { at }) => ncrm_bound_closed_form(&family.with_gamma(at), n, k),
        (NcrmFamily::DpBRep { .. }, Hyperprior::Lomax { a }) => {
            let kf = k as f64;
            let b = if k <= 1000 {
                (1..=k).map(|j| j as f64 / (a + j as f64)).product()
            } else {
                (ln_gamma(a + 1.0)? + ln_gamma(kf + 1.0)? - ln_gamma(a + kf + 1.0)?).exp()
            };
            let mut r = NcrmBoundResult::new(k, n, b);
            r.asymptote = Some("N Gamma(a+1) (K+1)^-a".into());
            Ok(r)
        }
        _ => {
            let f = |g: f64| {
                let ld = hp.ln_density(g);
                if ld == f64::NEG_INFINITY {
                    return 0.0;
                }
                ncrm_bound_closed_form(&family.with_gamma(g), n, k).map_or(f64::NAN, |r| r.b_k.min(1.0) * ld.exp())
            };
            let prec = Precision { abs_tol: 1e-300, rel_tol: 1e-9, max_iter: 2000 };
            let b = integrate_positive(f, 0.0, f64::INFINITY, &prec)?.value;
            Ok(NcrmBoundResult::new(k, n, b))
        }
    }
}
