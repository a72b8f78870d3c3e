//! Sequential representations of CRMs and a sampler for their truncations.
//!
//! Series kinds (inverse Levy, Bondesson, thinning, rejection) generate one
//! candidate atom per index `k` from the jumps `Gamma_k` of a unit-rate
//! Poisson process. Superposition kinds (decoupled Bondesson, size-biased,
//! power-law) generate a Poisson number of atoms in each round `k`.

mod kernel;
pub(crate) mod sample;

pub use kernel::KernelSpec;

use std::fmt;
use std::str::FromStr;

use crate::error::{CrmError, Result};
use crate::exec::{rng_for, Rng};
use crate::measures::{ConditionalWeight, Family, Levy, Likelihood, RateMeasureSpec, SizeBiasedWeights, TailInverter};
use crate::specialfn::{digamma, integrate_positive, integrate_positive_c, ln_gamma, Precision, EULER_GAMMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RepKind {
    InverseLevy,
    Bondesson,
    Thinning,
    Rejection,
    DecoupledBondesson,
    SizeBiased,
    PowerLaw,
}

impl RepKind {
    pub const ALL: [RepKind; 7] = [
        RepKind::InverseLevy,
        RepKind::Bondesson,
        RepKind::Thinning,
        RepKind::Rejection,
        RepKind::DecoupledBondesson,
        RepKind::SizeBiased,
        RepKind::PowerLaw,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RepKind::InverseLevy => "il",
            RepKind::Bondesson => "bondesson",
            RepKind::Thinning => "thinning",
            RepKind::Rejection => "rejection",
            RepKind::DecoupledBondesson => "db",
            RepKind::SizeBiased => "sb",
            RepKind::PowerLaw => "pl",
        }
    }

    pub fn is_series(&self) -> bool {
        matches!(self, RepKind::InverseLevy | RepKind::Bondesson | RepKind::Thinning | RepKind::Rejection)
    }
}

impl fmt::Display for RepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RepKind {
    type Err = CrmError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "il" | "inverse-levy" | "inverselevy" => RepKind::InverseLevy,
            "b" | "bondesson" => RepKind::Bondesson,
            "t" | "thinning" => RepKind::Thinning,
            "r" | "rejection" => RepKind::Rejection,
            "db" | "decoupled-bondesson" => RepKind::DecoupledBondesson,
            "sb" | "size-biased" | "sizebiased" => RepKind::SizeBiased,
            "pl" | "power-law" | "powerlaw" => RepKind::PowerLaw,
            _ => return Err(CrmError::InvalidParameter(format!("unknown representation '{s}'"))),
        })
    }
}

/// Auxiliary density `g` on the positive reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AuxDensity {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Beta { a: f64, b: f64 },
    BetaPrime { a: f64, b: f64 },
    /// `lambda (1 + lambda v)^{-2}`
    Lomax { lambda: f64 },
    /// Point mass; has no Lebesgue density.
    Point { at: f64 },
}

impl AuxDensity {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            AuxDensity::Exponential { rate } => rate > 0.0,
            AuxDensity::Gamma { shape, rate } => shape > 0.0 && rate > 0.0,
            AuxDensity::Beta { a, b } | AuxDensity::BetaPrime { a, b } => a > 0.0 && b > 0.0,
            AuxDensity::Lomax { lambda } => lambda > 0.0,
            AuxDensity::Point { at } => at > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(CrmError::InvalidParameter(format!("invalid auxiliary density {self}")))
        }
    }

    /// Log normalizing constant, so that `ln g(v) = ln_kernel(v) - ln_normalizer()`.
    pub fn ln_normalizer(&self) -> f64 {
        let lb = |a: f64, b: f64| ln_gamma(a).unwrap_or(f64::NAN) + ln_gamma(b).unwrap_or(f64::NAN) - ln_gamma(a + b).unwrap_or(f64::NAN);
        match *self {
            AuxDensity::Exponential { rate } => -rate.ln(),
            AuxDensity::Gamma { shape, rate } => ln_gamma(shape).unwrap_or(f64::NAN) - shape * rate.ln(),
            AuxDensity::Beta { a, b } | AuxDensity::BetaPrime { a, b } => lb(a, b),
            AuxDensity::Lomax { lambda } => -lambda.ln(),
            AuxDensity::Point { .. } => f64::NAN,
        }
    }

    pub fn ln_kernel(&self, v: f64) -> f64 {
        if !(v > 0.0) {
            return f64::NEG_INFINITY;
        }
        match *self {
            AuxDensity::Exponential { rate } => -rate * v,
            AuxDensity::Gamma { shape, rate } => (shape - 1.0) * v.ln() - rate * v,
            AuxDensity::Beta { a, b } => {
                if v >= 1.0 {
                    f64::NEG_INFINITY
                } else {
                    (a - 1.0) * v.ln() + (b - 1.0) * (-v).ln_1p()
                }
            }
            AuxDensity::BetaPrime { a, b } => (a - 1.0) * v.ln() - (a + b) * v.ln_1p(),
            AuxDensity::Lomax { lambda } => -2.0 * (lambda * v).ln_1p(),
            AuxDensity::Point { .. } => f64::NAN,
        }
    }

    pub fn ln_density(&self, v: f64) -> f64 {
        self.ln_kernel(v) - self.ln_normalizer()
    }

    /// `ln g(v)` given also `comp = 1 - v`, used for the beta density in
    /// place of `1 - v` near one.
    pub fn ln_density_c(&self, v: f64, comp: f64) -> f64 {
        match *self {
            AuxDensity::Beta { a, b } if v > 0.0 && v < 1.0 && comp > 0.0 => {
                (a - 1.0) * v.ln() + (b - 1.0) * comp.ln() - self.ln_normalizer()
            }
            _ => self.ln_density(v),
        }
    }

    /// Supremum of the support.
    pub fn upper_support(&self) -> f64 {
        match *self {
            AuxDensity::Beta { .. } => 1.0,
            AuxDensity::Point { at } => at,
            _ => f64::INFINITY,
        }
    }

    /// `E[f(V)]`, exact for a point mass and by quadrature otherwise.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F, prec: &Precision) -> Result<f64> {
        if let AuxDensity::Point { at } = *self {
            return Ok(f(at));
        }
        let norm = self.ln_normalizer();
        let g = *self;
        let integrand = |v: f64, c: f64| {
            let lk = match g {
                AuxDensity::Beta { a, b } => (a - 1.0) * v.ln() + (b - 1.0) * c.ln(),
                _ => g.ln_kernel(v),
            };
            if lk == f64::NEG_INFINITY {
                0.0
            } else {
                f(v) * (lk - norm).exp()
            }
        };
        Ok(integrate_positive_c(integrand, 0.0, self.upper_support(), prec)?.value)
    }

    /// `P(V > v)`.
    pub fn survival(&self, v: f64) -> Result<f64> {
        if v <= 0.0 {
            return Ok(1.0);
        }
        Ok(match *self {
            AuxDensity::Exponential { rate } => (-rate * v).exp(),
            AuxDensity::Gamma { shape, rate } => crate::specialfn::regularized_gamma_q(shape, rate * v)?,
            AuxDensity::Beta { a, b } if a == 1.0 => (b * (-v.min(1.0)).ln_1p()).exp(),
            AuxDensity::BetaPrime { a, b } if a == 1.0 => (-b * v.ln_1p()).exp(),
            AuxDensity::Lomax { lambda } => 1.0 / (1.0 + lambda * v),
            AuxDensity::Point { at } => {
                if v < at {
                    1.0
                } else {
                    0.0
                }
            }
            _ => {
                let (norm, g) = (self.ln_normalizer(), *self);
                let hi = if matches!(g, AuxDensity::Beta { .. }) { 1.0 } else { f64::INFINITY };
                if v >= hi {
                    return Ok(0.0);
                }
                integrate_positive(|t| (g.ln_kernel(t) - norm).exp(), v, hi, &Precision::quadrature())?.value
            }
        })
    }

    /// `E[V]`, possibly infinite.
    pub fn mean(&self) -> f64 {
        match *self {
            AuxDensity::Exponential { rate } => 1.0 / rate,
            AuxDensity::Gamma { shape, rate } => shape / rate,
            AuxDensity::Beta { a, b } => a / (a + b),
            AuxDensity::BetaPrime { a, b } => {
                if b > 1.0 {
                    a / (b - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            AuxDensity::Lomax { .. } => f64::INFINITY,
            AuxDensity::Point { at } => at,
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            AuxDensity::Exponential { rate } => -sample::open01(rng).ln() / rate,
            AuxDensity::Gamma { shape, rate } => sample::gamma_raw(rng, shape, rate),
            AuxDensity::Beta { a, b } => sample::beta_pair_raw(rng, a, b).0,
            AuxDensity::BetaPrime { a, b } => sample::beta_prime_raw(rng, a, b),
            AuxDensity::Lomax { lambda } => (1.0 / sample::open01(rng) - 1.0) / lambda,
            AuxDensity::Point { at } => at,
        }
    }
}

impl fmt::Display for AuxDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AuxDensity::Exponential { rate } => write!(f, "exp:{rate}"),
            AuxDensity::Gamma { shape, rate } => write!(f, "gamma:{shape},{rate}"),
            AuxDensity::Beta { a, b } => write!(f, "beta:{a},{b}"),
            AuxDensity::BetaPrime { a, b } => write!(f, "betaprime:{a},{b}"),
            AuxDensity::Lomax { lambda } => write!(f, "lomax:{lambda}"),
            AuxDensity::Point { at } => write!(f, "point:{at}"),
        }
    }
}

impl FromStr for AuxDensity {
    type Err = CrmError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || CrmError::InvalidParameter(format!("cannot parse auxiliary density '{s}'"));
        let (name, args) = s.split_once(':').ok_or_else(bad)?;
        let v: Vec<f64> = args.split(',').map(|t| t.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        let g = match (name.trim(), v.as_slice()) {
            ("exp", &[rate]) => AuxDensity::Exponential { rate },
            ("gamma", &[shape, rate]) => AuxDensity::Gamma { shape, rate },
            ("beta", &[a, b]) => AuxDensity::Beta { a, b },
            ("betaprime", &[a, b]) => AuxDensity::BetaPrime { a, b },
            ("lomax", &[lambda]) => AuxDensity::Lomax { lambda },
            ("point", &[at]) => AuxDensity::Point { at },
            _ => return Err(bad()),
        };
        g.validate()?;
        Ok(g)
    }
}

/// Dominating rate measure for the rejection representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dominating {
    /// `mass * lambda / (theta (1 + lambda theta))`
    Lomax { mass: f64, lambda: f64 },
    /// `coef * theta^{-1-d}`, on `(0, 1]` when `unit` and on `(0, inf)` otherwise
    Power { coef: f64, d: f64, unit: bool },
}

impl Dominating {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Dominating::Lomax { mass, lambda } => mass > 0.0 && lambda > 0.0,
            Dominating::Power { coef, d, unit } => coef > 0.0 && (0.0..1.0).contains(&d) && (unit || d > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(CrmError::InvalidParameter(format!("invalid dominating measure {self:?}")))
        }
    }

    pub fn ln_density(&self, theta: f64) -> f64 {
        if !(theta > 0.0) {
            return f64::NEG_INFINITY;
        }
        match *self {
            Dominating::Lomax { mass, lambda } => (mass * lambda).ln() - theta.ln() - (lambda * theta).ln_1p(),
            Dominating::Power { coef, d, unit } => {
                if unit && theta > 1.0 {
                    f64::NEG_INFINITY
                } else {
                    coef.ln() - (1.0 + d) * theta.ln()
                }
            }
        }
    }

    /// `mu[x, inf)`.
    pub fn tail(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::INFINITY;
        }
        match *self {
            Dominating::Lomax { mass, lambda } => mass * lambda * (1.0 / (lambda * x)).ln_1p(),
            Dominating::Power { coef, d, unit } => {
                if unit {
                    if x >= 1.0 {
                        0.0
                    } else if d == 0.0 {
                        -coef * x.ln()
                    } else {
                        coef / d * (x.powf(-d) - 1.0)
                    }
                } else {
                    coef / d * x.powf(-d)
                }
            }
        }
    }

    /// The `x` with `mu[x, inf) = u`.
    pub fn tail_inverse(&self, u: f64) -> f64 {
        match *self {
            Dominating::Lomax { mass, lambda } => 1.0 / (lambda * (u / (mass * lambda)).exp_m1()),
            Dominating::Power { coef, d, unit } => {
                if unit {
                    if d == 0.0 {
                        (-u / coef).exp()
                    } else {
                        (-(d * u / coef).ln_1p() / d).exp()
                    }
                } else {
                    (coef / (d * u)).powf(1.0 / d)
                }
            }
        }
    }
}

/// Extra finite component added to a Bondesson representation of the beta
/// process with `alpha < 1`: `Poiss(rate)` atoms with weights drawn from `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteComponent {
    pub rate: f64,
    pub g: AuxDensity,
}

/// A sequential representation together with its free parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RepresentationSpec {
    InverseLevy,
    Bondesson { c: f64, g: AuxDensity, extra: Option<FiniteComponent> },
    Thinning { g: AuxDensity },
    Rejection { mu: Dominating },
    DecoupledBondesson { c: f64, g: AuxDensity, xi: f64, extra: Option<FiniteComponent> },
    SizeBiased { likelihood: Likelihood },
    PowerLaw { mass: f64, alpha: f64, d: f64, g: AuxDensity },
}

fn incompatible(kind: RepKind, spec: &RateMeasureSpec, why: &str) -> CrmError {
    CrmError::Incompatible { rep: format!("{kind} ({why})"), target: spec.to_string() }
}

/// `(c, g, extra)` such that `theta nu(theta) = c P(V > theta)` for `V ~ g`,
/// plus the finite part split off for the beta process with `alpha < 1`.
fn bondesson_parts(kind: RepKind, spec: &RateMeasureSpec) -> Result<(f64, AuxDensity, Option<FiniteComponent>)> {
    if spec.discount() != 0.0 {
        return Err(incompatible(kind, spec, "requires d = 0"));
    }
    Ok(match *spec {
        RateMeasureSpec::Gamma { gamma, lambda, .. } => (gamma * lambda, AuxDensity::Exponential { rate: lambda }, None),
        RateMeasureSpec::Beta { gamma, alpha, .. } => {
            if alpha > 1.0 {
                (gamma * alpha, AuxDensity::Beta { a: 1.0, b: alpha - 1.0 }, None)
            } else if alpha == 1.0 {
                (gamma, AuxDensity::Point { at: 1.0 }, None)
            } else {
                let g = AuxDensity::Beta { a: 1.0, b: alpha };
                (gamma * alpha, g, Some(FiniteComponent { rate: gamma, g }))
            }
        }
        RateMeasureSpec::BetaPrime { gamma, alpha, .. } => (gamma * alpha, AuxDensity::BetaPrime { a: 1.0, b: alpha }, None),
        RateMeasureSpec::Lomax { gamma, lambda } => (gamma * lambda, AuxDensity::Lomax { lambda }, None),
    })
}

/// The dominating measure used by [`RepresentationSpec::new`] for the
/// rejection representation.
pub fn default_dominating(spec: &RateMeasureSpec) -> Result<Dominating> {
    let coef = spec.coefficient();
    match *spec {
        RateMeasureSpec::Gamma { gamma, lambda, d } => {
            if d == 0.0 {
                Ok(Dominating::Lomax { mass: gamma, lambda })
            } else {
                Ok(Dominating::Power { coef, d, unit: false })
            }
        }
        RateMeasureSpec::Beta { alpha, d, .. } => {
            if alpha + d >= 1.0 {
                Ok(Dominating::Power { coef, d, unit: true })
            } else {
                Err(incompatible(RepKind::Rejection, spec, "requires alpha + d >= 1"))
            }
        }
        RateMeasureSpec::BetaPrime { gamma, alpha, d } => {
            if d > 0.0 {
                Ok(Dominating::Power { coef, d, unit: false })
            } else if alpha >= 1.0 {
                Ok(Dominating::Lomax { mass: gamma * alpha, lambda: 1.0 })
            } else {
                Err(incompatible(RepKind::Rejection, spec, "requires alpha >= 1 when d = 0"))
            }
        }
        RateMeasureSpec::Lomax { gamma, lambda } => Ok(Dominating::Lomax { mass: gamma, lambda }),
    }
}

/// Log-spaced grid used to screen density ratios.
fn screen_grid(upper: f64) -> impl Iterator<Item = f64> {
    (0..=400).map(move |i| 10f64.powf(-12.0 + 14.0 * i as f64 / 400.0)).filter(move |&t| t < upper)
}

impl RepresentationSpec {
    /// The default representation of `kind` for `spec`. `likelihood` is used
    /// by the size-biased representation only and defaults to the family's
    /// conjugate likelihood.
    pub fn new(kind: RepKind, spec: &RateMeasureSpec, likelihood: Option<&Likelihood>) -> Result<Self> {
        spec.validate()?;
        let rep = match kind {
            RepKind::InverseLevy => RepresentationSpec::InverseLevy,
            RepKind::Bondesson => {
                let (c, g, extra) = bondesson_parts(kind, spec)?;
                RepresentationSpec::Bondesson { c, g, extra }
            }
            RepKind::DecoupledBondesson => {
                let (c, g, extra) = bondesson_parts(kind, spec)?;
                RepresentationSpec::DecoupledBondesson { c, g, xi: c, extra }
            }
            RepKind::Thinning => {
                let g = match *spec {
                    RateMeasureSpec::Gamma { lambda, d, .. } => AuxDensity::Gamma { shape: 1.0 - d, rate: lambda },
                    RateMeasureSpec::Beta { alpha, d, .. } => AuxDensity::Beta { a: 1.0 - d, b: alpha + d },
                    RateMeasureSpec::BetaPrime { alpha, d, .. } => AuxDensity::BetaPrime { a: 1.0 - d, b: alpha + d },
                    RateMeasureSpec::Lomax { lambda, .. } => AuxDensity::Lomax { lambda },
                };
                RepresentationSpec::Thinning { g }
            }
            RepKind::Rejection => RepresentationSpec::Rejection { mu: default_dominating(spec)? },
            RepKind::SizeBiased => {
                let lik = likelihood.copied().unwrap_or_else(|| Likelihood::default_for(spec.family()));
                SizeBiasedWeights::new(spec, &lik)?;
                RepresentationSpec::SizeBiased { likelihood: lik }
            }
            RepKind::PowerLaw => match *spec {
                RateMeasureSpec::Gamma { gamma, lambda, d } => {
                    RepresentationSpec::PowerLaw { mass: gamma, alpha: lambda, d, g: AuxDensity::Gamma { shape: lambda, rate: lambda } }
                }
                RateMeasureSpec::Beta { gamma, alpha, d } => {
                    RepresentationSpec::PowerLaw { mass: gamma, alpha, d, g: AuxDensity::Point { at: 1.0 } }
                }
                RateMeasureSpec::BetaPrime { gamma, alpha, d } => RepresentationSpec::PowerLaw {
                    mass: gamma * alpha,
                    alpha: 1.0,
                    d,
                    g: AuxDensity::BetaPrime { a: 1.0, b: alpha + d },
                },
                RateMeasureSpec::Lomax { .. } => return Err(incompatible(kind, spec, "no power-law decomposition")),
            },
        };
        Ok(rep)
    }

    /// Thinning with a user-supplied proposal density.
    pub fn thinning_with(spec: &RateMeasureSpec, g: AuxDensity) -> Result<Self> {
        let rep = RepresentationSpec::Thinning { g };
        rep.check(spec)?;
        Ok(rep)
    }

    /// Rejection with a user-supplied dominating measure.
    pub fn rejection_with(spec: &RateMeasureSpec, mu: Dominating) -> Result<Self> {
        let rep = RepresentationSpec::Rejection { mu };
        rep.check(spec)?;
        Ok(rep)
    }

    /// Replaces `xi` of a decoupled Bondesson representation.
    pub fn with_xi(self, xi: f64) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(CrmError::InvalidParameter(format!("xi must be positive, got {xi}")));
        }
        match self {
            RepresentationSpec::DecoupledBondesson { c, g, extra, .. } => Ok(RepresentationSpec::DecoupledBondesson { c, g, xi, extra }),
            _ => Err(CrmError::InvalidParameter("xi applies to the decoupled Bondesson representation only".into())),
        }
    }

    pub fn kind(&self) -> RepKind {
        match self {
            RepresentationSpec::InverseLevy => RepKind::InverseLevy,
            RepresentationSpec::Bondesson { .. } => RepKind::Bondesson,
            RepresentationSpec::Thinning { .. } => RepKind::Thinning,
            RepresentationSpec::Rejection { .. } => RepKind::Rejection,
            RepresentationSpec::DecoupledBondesson { .. } => RepKind::DecoupledBondesson,
            RepresentationSpec::SizeBiased { .. } => RepKind::SizeBiased,
            RepresentationSpec::PowerLaw { .. } => RepKind::PowerLaw,
        }
    }

    pub fn extra(&self) -> Option<FiniteComponent> {
        match *self {
            RepresentationSpec::Bondesson { extra, .. } | RepresentationSpec::DecoupledBondesson { extra, .. } => extra,
            _ => None,
        }
    }

    /// Verifies that this representation targets `spec`.
    pub fn check(&self, spec: &RateMeasureSpec) -> Result<()> {
        spec.validate()?;
        let kind = self.kind();
        match *self {
            RepresentationSpec::InverseLevy => Ok(()),
            RepresentationSpec::Bondesson { c, g, extra } | RepresentationSpec::DecoupledBondesson { c, g, extra, .. } => {
                let (c0, g0, e0) = bondesson_parts(kind, spec)?;
                if (c, g, extra) == (c0, g0, e0) {
                    Ok(())
                } else {
                    Err(incompatible(kind, spec, "c and g do not match the rate measure"))
                }
            }
            RepresentationSpec::Thinning { g } => {
                g.validate()?;
                if matches!(g, AuxDensity::Point { .. }) {
                    return Err(incompatible(kind, spec, "proposal needs a density"));
                }
                let norm = g.ln_normalizer();
                let levy = spec.levy();
                for t in screen_grid(spec.upper_support()) {
                    if levy.ln_density(t) > f64::NEG_INFINITY && g.ln_kernel(t) - norm == f64::NEG_INFINITY {
                        return Err(incompatible(kind, spec, "rate measure is not absolutely continuous w.r.t. g"));
                    }
                }
                Ok(())
            }
            RepresentationSpec::Rejection { mu } => {
                mu.validate()?;
                let levy = spec.levy();
                for t in screen_grid(spec.upper_support()) {
                    let r = levy.ln_density(t) - mu.ln_density(t);
                    if r > 1e-10 || r.is_nan() {
                        return Err(incompatible(kind, spec, "dnu/dmu exceeds 1"));
                    }
                }
                Ok(())
            }
            RepresentationSpec::SizeBiased { likelihood } => SizeBiasedWeights::new(spec, &likelihood).map(|_| ()),
            RepresentationSpec::PowerLaw { .. } => {
                if *self == RepresentationSpec::new(kind, spec, None)? {
                    Ok(())
                } else {
                    Err(incompatible(kind, spec, "parameters do not match the rate measure"))
                }
            }
        }
    }
}

impl fmt::Display for RepresentationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RepresentationSpec::InverseLevy => write!(f, "il"),
            RepresentationSpec::Bondesson { c, g, .. } => write!(f, "bondesson(c={c}, g={g})"),
            RepresentationSpec::Thinning { g } => write!(f, "thinning(g={g})"),
            RepresentationSpec::Rejection { mu } => write!(f, "rejection(mu={mu:?})"),
            RepresentationSpec::DecoupledBondesson { c, g, xi, .. } => write!(f, "db(c={c}, g={g}, xi={xi})"),
            RepresentationSpec::SizeBiased { likelihood } => write!(f, "sb({likelihood})"),
            RepresentationSpec::PowerLaw { mass, alpha, d, g } => write!(f, "pl({mass}, {alpha}, {d}, g={g})"),
        }
    }
}

/// One atom of a truncated measure. `k` is the outer index (round), `i` the
/// position within the round. Atoms from the finite component of a
/// Bondesson-type representation have `k = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub k: usize,
    pub i: usize,
    pub weight: f64,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AtomicMeasure {
    pub atoms: Vec<Atom>,
    pub truncation: usize,
}

impl AtomicMeasure {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn positive_atoms(&self) -> usize {
        self.atoms.iter().filter(|a| a.weight > 0.0).count()
    }

    /// The atoms with outer index at most `k`.
    pub fn truncated(&self, k: usize) -> AtomicMeasure {
        AtomicMeasure { atoms: self.atoms.iter().filter(|a| a.k <= k).copied().collect(), truncation: k.min(self.truncation) }
    }
}

/// Counts of random variables drawn while simulating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DrawLedger {
    pub uniforms: u64,
    pub exponentials: u64,
    pub gammas: u64,
    pub betas: u64,
    pub poissons: u64,
    /// Draws of auxiliary variables (`V ~ g`, size-biased trait counts).
    pub aux: u64,
    /// Candidate atoms discarded by thinning or rejection.
    pub rejected_atoms: u64,
}

impl DrawLedger {
    /// Total number of random variables drawn.
    pub fn total(&self) -> u64 {
        self.uniforms + self.exponentials + self.gammas + self.betas + self.poissons + self.aux
    }

    pub fn add(&mut self, other: &DrawLedger) {
        self.uniforms += other.uniforms;
        self.exponentials += other.exponentials;
        self.gammas += other.gammas;
        self.betas += other.betas;
        self.poissons += other.poissons;
        self.aux += other.aux;
        self.rejected_atoms += other.rejected_atoms;
    }
}

/// Prepared sampler for a fixed `(spec, rep, K)`; reuse it across replicates.
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: RateMeasureSpec,
    rep: RepresentationSpec,
    k: usize,
    levy: Levy,
    g_norm: f64,
    sb: Option<(SizeBiasedWeights, Vec<f64>, Vec<f64>)>,
}

impl Sampler {
    pub fn new(spec: &RateMeasureSpec, rep: &RepresentationSpec, k: usize) -> Result<Self> {
        rep.check(spec)?;
        let g_norm = match rep {
            RepresentationSpec::Thinning { g } => g.ln_normalizer(),
            _ => 0.0,
        };
        let sb = match rep {
            RepresentationSpec::SizeBiased { likelihood } => {
                let w = SizeBiasedWeights::new(spec, likelihood)?;
                let eta = (1..=k).map(|j| w.eta(j)).collect::<Result<Vec<_>>>()?;
                let first = (1..=k).map(|j| w.eta_first(j)).collect::<Result<Vec<_>>>()?;
                Some((w, eta, first))
            }
            _ => None,
        };
        Ok(Sampler { spec: *spec, rep: *rep, k, levy: spec.levy(), g_norm, sb })
    }

    pub fn truncation(&self) -> usize {
        self.k
    }

    pub fn draw(&self, rng: &mut Rng) -> Result<(AtomicMeasure, DrawLedger)> {
        let mut led = DrawLedger::default();
        let mut atoms = Vec::new();
        if let Some(extra) = self.rep.extra() {
            let n = sample::poisson(rng, extra.rate, &mut led);
            for i in 1..=n as usize {
                let label = sample::uniform(rng, &mut led);
                led.aux += 1;
                atoms.push(Atom { k: 0, i, weight: extra.g.sample(rng), label });
            }
        }
        let k_max = self.k;
        match self.rep {
            RepresentationSpec::InverseLevy => {
                let mut inv = TailInverter::new(&self.spec)?;
                let mut jump = 0.0;
                for k in 1..=k_max {
                    jump += sample::exponential(rng, &mut led);
                    let label = sample::uniform(rng, &mut led);
                    atoms.push(Atom { k, i: 1, weight: inv.invert(jump)?, label });
                }
            }
            RepresentationSpec::Bondesson { c, g, .. } => {
                let mut jump = 0.0;
                for k in 1..=k_max {
                    jump += sample::exponential(rng, &mut led);
                    let label = sample::uniform(rng, &mut led);
                    led.aux += 1;
                    let v = g.sample(rng);
                    atoms.push(Atom { k, i: 1, weight: v * (-jump / c).exp(), label });
                }
            }
            RepresentationSpec::Thinning { g } => {
                let mut jump = 0.0;
                for k in 1..=k_max {
                    jump += sample::exponential(rng, &mut led);
                    let label = sample::uniform(rng, &mut led);
                    led.aux += 1;
                    let v = g.sample(rng);
                    let ratio = if v > 0.0 { (self.levy.ln_density(v) - g.ln_kernel(v) + self.g_norm).exp() } else { f64::INFINITY };
                    if ratio >= jump {
                        atoms.push(Atom { k, i: 1, weight: v, label });
                    } else {
                        led.rejected_atoms += 1;
                    }
                }
            }
            RepresentationSpec::Rejection { mu } => {
                let mut jump = 0.0;
                for k in 1..=k_max {
                    jump += sample::exponential(rng, &mut led);
                    let label = sample::uniform(rng, &mut led);
                    let u = sample::uniform(rng, &mut led);
                    let v = mu.tail_inverse(jump);
                    let ratio = if v > 0.0 { (self.levy.ln_density(v) - mu.ln_density(v)).exp() } else { 1.0 };
                    if u <= ratio {
                        atoms.push(Atom { k, i: 1, weight: v, label });
                    } else {
                        led.rejected_atoms += 1;
                    }
                }
            }
            RepresentationSpec::DecoupledBondesson { c, g, xi, .. } => {
                for k in 1..=k_max {
                    let n = sample::poisson(rng, c / xi, &mut led);
                    for i in 1..=n as usize {
                        let label = sample::uniform(rng, &mut led);
                        led.aux += 1;
                        let v = g.sample(rng);
                        let t = sample::gamma(rng, k as f64, xi, &mut led);
                        atoms.push(Atom { k, i, weight: v * (-t).exp(), label });
                    }
                }
            }
            RepresentationSpec::SizeBiased { .. } => {
                let (w, eta, first) = self.sb.as_ref().expect("prepared in new");
                for k in 1..=k_max {
                    let n = sample::poisson(rng, eta[k - 1], &mut led);
                    for i in 1..=n as usize {
                        let label = sample::uniform(rng, &mut led);
                        led.aux += 1;
                        let x = w.trait_count(k, eta[k - 1], first[k - 1], sample::open01(rng));
                        let weight = match w.conditional(k, x) {
                            ConditionalWeight::Gamma { shape, rate } => sample::gamma(rng, shape, rate, &mut led),
                            ConditionalWeight::Beta { a, b } => sample::beta_pair(rng, a, b, &mut led).0,
                            ConditionalWeight::BetaPrime { a, b } => {
                                let (p, q) = sample::beta_pair(rng, a, b, &mut led);
                                p / q
                            }
                        };
                        atoms.push(Atom { k, i, weight, label });
                    }
                }
            }
            RepresentationSpec::PowerLaw { mass, alpha, d, g } => {
                for k in 1..=k_max {
                    let n = sample::poisson(rng, mass, &mut led);
                    for i in 1..=n as usize {
                        let label = sample::uniform(rng, &mut led);
                        led.aux += 1;
                        let v = g.sample(rng);
                        let mut stick = 1.0;
                        let mut j = 1;
                        while j < k && stick > 0.0 {
                            stick *= sample::beta_pair(rng, 1.0 - d, alpha + j as f64 * d, &mut led).1;
                            j += 1;
                        }
                        let weight = if stick > 0.0 {
                            v * sample::beta_pair(rng, 1.0 - d, alpha + k as f64 * d, &mut led).0 * stick
                        } else {
                            // the stick has underflowed; the remaining breaks cannot move the weight off zero
                            led.betas += (k - j + 1) as u64;
                            0.0
                        };
                        atoms.push(Atom { k, i, weight, label });
                    }
                }
            }
        }
        Ok((AtomicMeasure { atoms, truncation: k_max }, led))
    }
}

/// Simulates the level-`k` truncation of `rep` for `spec`. Deterministic in
/// `seed`.
pub fn simulate(spec: &RateMeasureSpec, rep: &RepresentationSpec, k: usize, seed: u64) -> Result<(AtomicMeasure, DrawLedger)> {
    let mut rng = rng_for(seed, 0, 0);
    Sampler::new(spec, rep, k)?.draw(&mut rng)
}

/// Expected number of random variables drawn by [`Sampler::draw`].
pub fn expected_cost(spec: &RateMeasureSpec, rep: &RepresentationSpec, k: usize) -> Result<f64> {
    rep.check(spec)?;
    let kf = k as f64;
    let extra = rep.extra().map_or(0.0, |e| 1.0 + 2.0 * e.rate);
    Ok(match *rep {
        RepresentationSpec::InverseLevy => 2.0 * kf,
        RepresentationSpec::Bondesson { .. } | RepresentationSpec::Thinning { .. } | RepresentationSpec::Rejection { .. } => {
            3.0 * kf + extra
        }
        RepresentationSpec::DecoupledBondesson { c, xi, .. } => (3.0 * c / xi + 1.0) * kf + extra,
        RepresentationSpec::SizeBiased { likelihood } => {
            let w = SizeBiasedWeights::new(spec, &likelihood)?;
            let mut s = 0.0;
            for j in 1..=k {
                s += w.eta(j)?;
            }
            kf + 3.0 * s
        }
        RepresentationSpec::PowerLaw { mass, .. } => (1.0 + 2.5 * mass) * kf + 0.5 * mass * kf * kf,
    })
}

/// Expected total number of rejected candidates, `int (1 - dnu/dmu) dmu`.
pub fn expected_rejections(spec: &RateMeasureSpec, mu: &Dominating) -> Result<f64> {
    RepresentationSpec::Rejection { mu: *mu }.check(spec)?;
    if *mu == default_dominating(spec)? {
        match *spec {
            RateMeasureSpec::Gamma { gamma, lambda, d } => {
                return Ok(if d == 0.0 { gamma * lambda * EULER_GAMMA } else { gamma * lambda / d });
            }
            RateMeasureSpec::BetaPrime { gamma, alpha, d } => {
                return Ok(if d == 0.0 { gamma * alpha * (EULER_GAMMA + digamma(alpha)?) } else { gamma * alpha / d });
            }
            RateMeasureSpec::Lomax { .. } => return Ok(0.0),
            RateMeasureSpec::Beta { .. } => {}
        }
    }
    let levy = spec.levy();
    // mu (1 - nu/mu), with expm1 for accuracy where the ratio is near one
    let f = |t: f64| {
        let lm = mu.ln_density(t);
        if lm == f64::NEG_INFINITY {
            return 0.0;
        }
        -lm.exp() * (levy.ln_density(t) - lm).exp_m1()
    };
    let upper = if spec.family() == Family::Beta { 1.0 } else { f64::INFINITY };
    let mut total = integrate_positive(f, 0.0, upper, &Precision::quadrature())?.value;
    if spec.family() == Family::Beta {
        // mu may extend past the support of nu
        if let Dominating::Lomax { .. } = mu {
            total += mu.tail(1.0);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gp() -> RateMeasureSpec {
        RateMeasureSpec::gamma_process(2.0, 3.0, 0.0).unwrap()
    }

    #[test]
    fn zero_truncation_is_empty() {
        for kind in RepKind::ALL {
            let rep = RepresentationSpec::new(kind, &gp(), None).unwrap();
            let (m, _) = simulate(&gp(), &rep, 0, 1).unwrap();
            assert!(m.is_empty(), "{kind}");
        }
    }

    #[test]
    fn bondesson_gamma_defaults() {
        let rep = RepresentationSpec::new(RepKind::Bondesson, &gp(), None).unwrap();
        assert_eq!(rep, RepresentationSpec::Bondesson { c: 6.0, g: AuxDensity::Exponential { rate: 3.0 }, extra: None });
    }

    #[test]
    fn incompatible_pairs_rejected() {
        let gd = RateMeasureSpec::gamma_process(1.0, 1.0, 0.3).unwrap();
        assert!(RepresentationSpec::new(RepKind::Bondesson, &gd, None).is_err());
        assert!(RepresentationSpec::new(RepKind::DecoupledBondesson, &gd, None).is_err());
        let lom = RateMeasureSpec::lomax_process(1.0, 1.0).unwrap();
        assert!(RepresentationSpec::new(RepKind::PowerLaw, &lom, None).is_err());
        let bp = RateMeasureSpec::beta_process(1.0, 0.5, 0.0).unwrap();
        assert!(RepresentationSpec::new(RepKind::Rejection, &bp, None).is_err());
        assert!(RepresentationSpec::new(RepKind::SizeBiased, &gp(), Some(&Likelihood::Bernoulli)).is_err());
        let bad_mu = Dominating::Power { coef: 0.1, d: 0.3, unit: false };
        assert!(RepresentationSpec::rejection_with(&gd, bad_mu).is_err());
    }

    #[test]
    fn inverse_levy_weights_nonincreasing() {
        for spec in [gp(), RateMeasureSpec::beta_process(1.0, 2.0, 0.3).unwrap()] {
            let rep = RepresentationSpec::InverseLevy;
            let (m, led) = simulate(&spec, &rep, 200, 5).unwrap();
            assert_eq!(m.len(), 200);
            assert!(m.atoms.windows(2).all(|w| w[1].weight <= w[0].weight));
            assert_eq!(led.total(), 400);
        }
    }

    #[test]
    fn determinism() {
        for kind in RepKind::ALL {
            let rep = RepresentationSpec::new(kind, &gp(), None).unwrap();
            assert_eq!(simulate(&gp(), &rep, 30, 9).unwrap(), simulate(&gp(), &rep, 30, 9).unwrap());
        }
    }

    #[test]
    fn series_kinds_produce_at_most_k_atoms() {
        let spec = RateMeasureSpec::gamma_process(1.0, 1.0, 0.4).unwrap();
        for kind in [RepKind::Thinning, RepKind::Rejection] {
            let rep = RepresentationSpec::new(kind, &spec, None).unwrap();
            let (m, led) = simulate(&spec, &rep, 100, 3).unwrap();
            assert_eq!(m.len() as u64 + led.rejected_atoms, 100);
        }
    }

    #[test]
    fn paisley_component_is_outside_truncation() {
        let spec = RateMeasureSpec::beta_process(3.0, 0.5, 0.0).unwrap();
        let rep = RepresentationSpec::new(RepKind::Bondesson, &spec, None).unwrap();
        assert!(rep.extra().is_some());
        let (m, _) = simulate(&spec, &rep, 10, 4).unwrap();
        assert_eq!(m.atoms.iter().filter(|a| a.k > 0).count(), 10);
        assert!(m.atoms.iter().all(|a| a.weight <= 1.0));
    }

    #[test]
    fn dominating_tail_roundtrip() {
        let mus = [
            Dominating::Lomax { mass: 2.0, lambda: 0.5 },
            Dominating::Power { coef: 1.3, d: 0.0, unit: true },
            Dominating::Power { coef: 1.3, d: 0.4, unit: true },
            Dominating::Power { coef: 0.7, d: 0.6, unit: false },
        ];
        for mu in mus {
            for &u in &[0.01, 0.5, 3.0, 40.0] {
                let x = mu.tail_inverse(u);
                assert!((mu.tail(x) - u).abs() <= 1e-10 * u, "{mu:?} u={u}");
            }
        }
    }

    #[test]
    fn aux_density_parse_roundtrip() {
        for g in [AuxDensity::Gamma { shape: 0.5, rate: 2.0 }, AuxDensity::Point { at: 1.0 }, AuxDensity::Lomax { lambda: 3.0 }] {
            assert_eq!(g.to_string().parse::<AuxDensity>().unwrap(), g);
        }
        assert!("beta:1".parse::<AuxDensity>().is_err());
    }
}
