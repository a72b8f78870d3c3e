//! Rate measures of the shipped CRM families and the likelihoods they pair
//! with.
//!
//! All four families have a density `nu(theta)` against Lebesgue measure on
//! `(0, inf)` (on `(0, 1]` for the beta process). Tail masses use closed forms
//! for the gamma and Lomax families and adaptive quadrature otherwise.

use std::fmt;

use crate::error::{CrmError, Result};
use crate::specialfn::{
    digamma, exp_integral_e1, exp_integral_e1_inverse, integrate, integrate_positive_c, ln_gamma, upper_incomplete_gamma,
    Precision,
};

/// A CRM rate measure. Use the checked constructors to build one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateMeasureSpec {
    /// `gamma * lambda^{1-d} / Gamma(1-d) * theta^{-1-d} e^{-lambda theta}`
    Gamma { gamma: f64, lambda: f64, d: f64 },
    /// `gamma Gamma(alpha+1) / (Gamma(1-d) Gamma(alpha+d)) * theta^{-1-d} (1-theta)^{alpha+d-1}` on `(0, 1]`
    Beta { gamma: f64, alpha: f64, d: f64 },
    /// `gamma Gamma(alpha+1) / (Gamma(1-d) Gamma(alpha+d)) * theta^{-1-d} (1+theta)^{-alpha}`
    BetaPrime { gamma: f64, alpha: f64, d: f64 },
    /// `gamma * lambda * theta^{-1} (1 + lambda theta)^{-1}`
    Lomax { gamma: f64, lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gamma,
    Beta,
    BetaPrime,
    Lomax,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Gamma => "gamma",
            Family::Beta => "beta",
            Family::BetaPrime => "betaprime",
            Family::Lomax => "lomax",
        })
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CrmError::InvalidParameter(format!("{what} must be positive and finite, got {v}")))
    }
}

fn discount(d: f64) -> Result<()> {
    if (0.0..1.0).contains(&d) {
        Ok(())
    } else {
        Err(CrmError::InvalidParameter(format!("discount d must lie in [0, 1), got {d}")))
    }
}

impl RateMeasureSpec {
    pub fn gamma_process(gamma: f64, lambda: f64, d: f64) -> Result<Self> {
        let s = RateMeasureSpec::Gamma { gamma, lambda, d };
        s.validate()?;
        Ok(s)
    }

    pub fn beta_process(gamma: f64, alpha: f64, d: f64) -> Result<Self> {
        let s = RateMeasureSpec::Beta { gamma, alpha, d };
        s.validate()?;
        Ok(s)
    }

    pub fn beta_prime_process(gamma: f64, alpha: f64, d: f64) -> Result<Self> {
        let s = RateMeasureSpec::BetaPrime { gamma, alpha, d };
        s.validate()?;
        Ok(s)
    }

    pub fn lomax_process(gamma: f64, lambda: f64) -> Result<Self> {
        let s = RateMeasureSpec::Lomax { gamma, lambda };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RateMeasureSpec::Gamma { gamma, lambda, d } => {
                positive("gamma", gamma)?;
                positive("lambda", lambda)?;
                discount(d)
            }
            RateMeasureSpec::Beta { gamma, alpha, d } => {
                positive("gamma", gamma)?;
                discount(d)?;
                if alpha > -d && alpha.is_finite() {
                    Ok(())
                } else {
                    Err(CrmError::InvalidParameter(format!("beta process needs alpha > -d, got alpha = {alpha}")))
                }
            }
            RateMeasureSpec::BetaPrime { gamma, alpha, d } => {
                positive("gamma", gamma)?;
                positive("alpha", alpha)?;
                discount(d)
            }
            RateMeasureSpec::Lomax { gamma, lambda } => {
                positive("gamma", gamma)?;
                positive("lambda", lambda)
            }
        }
    }

    pub fn family(&self) -> Family {
        match self {
            RateMeasureSpec::Gamma { .. } => Family::Gamma,
            RateMeasureSpec::Beta { .. } => Family::Beta,
            RateMeasureSpec::BetaPrime { .. } => Family::BetaPrime,
            RateMeasureSpec::Lomax { .. } => Family::Lomax,
        }
    }

    /// The mass parameter `gamma`.
    pub fn mass(&self) -> f64 {
        match *self {
            RateMeasureSpec::Gamma { gamma, .. }
            | RateMeasureSpec::Beta { gamma, .. }
            | RateMeasureSpec::BetaPrime { gamma, .. }
            | RateMeasureSpec::Lomax { gamma, .. } => gamma,
        }
    }

    /// Same measure with the mass parameter replaced.
    pub fn with_mass(&self, g: f64) -> Self {
        let mut s = *self;
        match &mut s {
            RateMeasureSpec::Gamma { gamma, .. }
            | RateMeasureSpec::Beta { gamma, .. }
            | RateMeasureSpec::BetaPrime { gamma, .. }
            | RateMeasureSpec::Lomax { gamma, .. } => *gamma = g,
        }
        s
    }

    /// The discount parameter `d` (zero for the Lomax family).
    pub fn discount(&self) -> f64 {
        match *self {
            RateMeasureSpec::Gamma { d, .. } | RateMeasureSpec::Beta { d, .. } | RateMeasureSpec::BetaPrime { d, .. } => d,
            RateMeasureSpec::Lomax { .. } => 0.0,
        }
    }

    pub fn upper_support(&self) -> f64 {
        match self {
            RateMeasureSpec::Beta { .. } => 1.0,
            _ => f64::INFINITY,
        }
    }

    /// Log of the constant in front of the density.
    pub fn ln_coefficient(&self) -> f64 {
        match *self {
            RateMeasureSpec::Gamma { gamma, lambda, d } => {
                gamma.ln() + (1.0 - d) * lambda.ln() - ln_gamma(1.0 - d).unwrap_or(f64::NAN)
            }
            RateMeasureSpec::Beta { gamma, alpha, d } | RateMeasureSpec::BetaPrime { gamma, alpha, d } => {
                gamma.ln() + ln_gamma(alpha + 1.0).unwrap_or(f64::NAN)
                    - ln_gamma(1.0 - d).unwrap_or(f64::NAN)
                    - ln_gamma(alpha + d).unwrap_or(f64::NAN)
            }
            RateMeasureSpec::Lomax { gamma, lambda } => (gamma * lambda).ln(),
        }
    }

    pub fn coefficient(&self) -> f64 {
        self.ln_coefficient().exp()
    }

    /// Density evaluator with the normalizing constant cached.
    pub fn levy(&self) -> Levy {
        Levy { spec: *self, ln_c: self.ln_coefficient() }
    }

    /// `ln nu(theta)`, `-inf` outside the support.
    pub fn ln_density(&self, theta: f64) -> f64 {
        self.levy().ln_density(theta)
    }

    /// The rate measure density `nu(theta)`.
    pub fn density(&self, theta: f64) -> f64 {
        self.ln_density(theta).exp()
    }

    /// `theta * nu(theta)`, computed without forming `nu` at tiny `theta`.
    pub fn theta_density(&self, theta: f64) -> f64 {
        self.levy().theta_density(theta)
    }

    /// Tail mass `nu[x, inf)` for `x > 0`.
    pub fn tail(&self, x: f64) -> Result<f64> {
        if x.is_nan() || x < 0.0 {
            return Err(CrmError::Domain { what: "tail level", value: x });
        }
        if x == 0.0 {
            return Ok(f64::INFINITY);
        }
        if x >= self.upper_support() {
            return Ok(0.0);
        }
        match *self {
            RateMeasureSpec::Gamma { gamma, lambda, d } => {
                if d == 0.0 {
                    Ok(gamma * lambda * exp_integral_e1(lambda * x)?)
                } else {
                    Ok(gamma * lambda * upper_incomplete_gamma(-d, lambda * x)? / crate::specialfn::gamma(1.0 - d)?)
                }
            }
            RateMeasureSpec::Lomax { gamma, lambda } => Ok(gamma * lambda * (1.0 / (lambda * x)).ln_1p()),
            _ => {
                let levy = self.levy();
                let r = integrate_positive_c(|t, c| levy.ln_density_c(t, c).exp(), x, self.upper_support(), &Precision::quadrature())?;
                Ok(r.value)
            }
        }
    }

    /// Generalized inverse of the tail: the `x` with `nu[x, inf) = u`.
    pub fn tail_inverse(&self, u: f64) -> Result<f64> {
        TailInverter::new(self)?.invert(u)
    }

    /// `E[total mass] = int theta nu(d theta)`, when finite.
    pub fn mean_total_mass(&self) -> Option<f64> {
        match *self {
            RateMeasureSpec::Gamma { gamma, .. } | RateMeasureSpec::Beta { gamma, .. } => Some(gamma),
            RateMeasureSpec::BetaPrime { gamma, alpha, d } if alpha + d > 1.0 => Some(gamma * alpha / (alpha + d - 1.0)),
            _ => None,
        }
    }
}

impl fmt::Display for RateMeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RateMeasureSpec::Gamma { gamma, lambda, d } => write!(f, "GammaP({gamma}, {lambda}, {d})"),
            RateMeasureSpec::Beta { gamma, alpha, d } => write!(f, "BetaP({gamma}, {alpha}, {d})"),
            RateMeasureSpec::BetaPrime { gamma, alpha, d } => write!(f, "BetaPrimeP({gamma}, {alpha}, {d})"),
            RateMeasureSpec::Lomax { gamma, lambda } => write!(f, "LomaxP({gamma}, {lambda})"),
        }
    }
}

/// `nu` with its log-normalizing constant precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Levy {
    spec: RateMeasureSpec,
    ln_c: f64,
}

impl Levy {
    pub fn spec(&self) -> &RateMeasureSpec {
        &self.spec
    }

    pub fn ln_density(&self, theta: f64) -> f64 {
        if !(theta > 0.0) {
            return f64::NEG_INFINITY;
        }
        let lt = theta.ln();
        match self.spec {
            RateMeasureSpec::Gamma { lambda, d, .. } => self.ln_c - (1.0 + d) * lt - lambda * theta,
            RateMeasureSpec::Beta { alpha, d, .. } => {
                if theta > 1.0 {
                    f64::NEG_INFINITY
                } else {
                    self.ln_c - (1.0 + d) * lt + (alpha + d - 1.0) * (-theta).ln_1p()
                }
            }
            RateMeasureSpec::BetaPrime { alpha, d, .. } => self.ln_c - (1.0 + d) * lt - alpha * theta.ln_1p(),
            RateMeasureSpec::Lomax { lambda, .. } => self.ln_c - lt - (lambda * theta).ln_1p(),
        }
    }

    /// `ln nu(theta)` given also `comp = 1 - theta`, which is used in place
    /// of `1 - theta` for the beta family so the singularity at one is
    /// resolved. Other families ignore `comp`.
    pub fn ln_density_c(&self, theta: f64, comp: f64) -> f64 {
        match self.spec {
            RateMeasureSpec::Beta { alpha, d, .. } if theta > 0.0 && comp >= 0.0 => {
                self.ln_c - (1.0 + d) * theta.ln() + (alpha + d - 1.0) * comp.ln()
            }
            _ => self.ln_density(theta),
        }
    }

    pub fn density(&self, theta: f64) -> f64 {
        self.ln_density(theta).exp()
    }

    pub fn theta_density(&self, theta: f64) -> f64 {
        if !(theta > 0.0) {
            return 0.0;
        }
        (self.ln_density(theta) + theta.ln()).exp()
    }
}

/// Solves `nu[x, inf) = u` for a nondecreasing sequence of levels `u`.
///
/// For families without a closed-form tail the inverter keeps the last
/// solution and integrates the density only between consecutive solutions,
/// which makes inverse-Levy sampling cost proportional to the number of
/// atoms rather than to the number of atoms times a full quadrature.
pub struct TailInverter<'a> {
    spec: &'a RateMeasureSpec,
    levy: Levy,
    t_ref: f64,
    tail_ref: f64,
    prec: Precision,
}

impl<'a> TailInverter<'a> {
    pub fn new(spec: &'a RateMeasureSpec) -> Result<Self> {
        spec.validate()?;
        let prec = Precision::quadrature();
        let (t_ref, tail_ref) = match spec {
            RateMeasureSpec::Beta { .. } => (0.0, 0.0),
            RateMeasureSpec::BetaPrime { .. } => (0.0, spec.tail(1.0)?),
            _ => (0.0, f64::NAN),
        };
        Ok(TailInverter { spec, levy: spec.levy(), t_ref, tail_ref, prec })
    }

    fn reset(&mut self) -> Result<()> {
        *self = TailInverter::new(self.spec)?;
        Ok(())
    }

    /// `int_a^b e^s nu(e^s) ds` (signed).
    fn log_integral(&self, a: f64, b: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let (mut lo, mut hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        if matches!(self.spec, RateMeasureSpec::Beta { .. }) {
            (lo, hi) = (lo.min(0.0), hi.min(0.0));
            if hi == 0.0 {
                // up to theta = 1, where the density may be singular
                return Ok(sign * self.spec.tail(lo.exp())?);
            }
        }
        let r = integrate(|s| self.levy.theta_density(s.exp()), lo, hi, &self.prec)?;
        Ok(sign * r.value)
    }

    pub fn invert(&mut self, u: f64) -> Result<f64> {
        if u.is_nan() || u < 0.0 {
            return Err(CrmError::Domain { what: "tail inverse level", value: u });
        }
        if u == 0.0 {
            return Ok(self.spec.upper_support());
        }
        if u.is_infinite() {
            return Ok(0.0);
        }
        match *self.spec {
            RateMeasureSpec::Gamma { gamma, lambda, d } if d == 0.0 => {
                Ok(exp_integral_e1_inverse(u / (gamma * lambda), &Precision::default())? / lambda)
            }
            RateMeasureSpec::Lomax { gamma, lambda } => Ok(1.0 / (lambda * (u / (gamma * lambda)).exp_m1())),
            RateMeasureSpec::Gamma { .. } => self.invert_closed(u),
            _ => self.invert_incremental(u),
        }
    }

    fn invert_closed(&mut self, u: f64) -> Result<f64> {
        let spec = self.spec;
        let d = spec.discount();
        // small-x behaviour: tail ~ coef x^{-d} / d
        let guess = ((spec.coefficient() / (d * u)).ln() / d).clamp(-700.0, 700.0);
        let levy = self.levy;
        let tail = |t: f64| spec.tail(t.exp());
        Ok(solve_decreasing(u, guess, &tail, &|t: f64| levy.theta_density(t.exp()))?.exp())
    }

    fn invert_incremental(&mut self, u: f64) -> Result<f64> {
        if u < self.tail_ref {
            self.reset()?;
        }
        let spec = self.spec;
        let levy = self.levy;
        if u < self.tail_ref {
            // beta prime levels below nu[1, inf): solve from scratch above x = 1
            let tail = |t: f64| spec.tail(t.exp());
            return Ok(solve_decreasing(u, 1.0, &tail, &|t: f64| levy.theta_density(t.exp()))?.exp());
        }
        let (t_ref, tail_ref) = (self.t_ref, self.tail_ref);
        let tail = |t: f64| Ok(tail_ref + self.log_integral(t, t_ref)?);
        let t = solve_decreasing(u, t_ref - 1.0, &tail, &|t: f64| levy.theta_density(t.exp()))?;
        let new_tail = tail(t)?;
        self.t_ref = t;
        self.tail_ref = new_tail;
        Ok(t.exp())
    }
}

/// Root in `t = ln x` of `tail(t) = u`, where `tail` is decreasing with
/// derivative `-slope(t)`. Safeguarded Newton inside an expanding bracket.
fn solve_decreasing(u: f64, guess: f64, tail: &dyn Fn(f64) -> Result<f64>, slope: &dyn Fn(f64) -> f64) -> Result<f64> {
    let g = |t: f64| -> Result<f64> { Ok(tail(t)? - u) };
    let mut lo = guess;
    let mut step = 1.0;
    let mut glo = g(lo)?;
    while glo < 0.0 {
        lo -= step;
        step *= 2.0;
        glo = g(lo)?;
        if lo < -745.0 {
            return Ok(f64::NEG_INFINITY);
        }
    }
    let mut hi = guess.max(lo + 1e-3);
    let mut step = 1.0;
    let mut ghi = g(hi)?;
    while ghi > 0.0 {
        lo = hi;
        hi += step;
        step *= 2.0;
        ghi = g(hi)?;
        if hi > 745.0 {
            return Err(CrmError::Convergence { what: "tail inverse bracket", iterations: 0 });
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gt = g(t)?;
        if gt == 0.0 {
            return Ok(t);
        }
        if gt > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let s = slope(t);
        let mut next = if s > 0.0 { t + gt / s } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let moved = (next - t).abs();
        t = next;
        if moved <= 1e-14 * t.abs().max(1.0) || hi - lo <= 1e-14 * t.abs().max(1.0) {
            return Ok(t);
        }
    }
    Err(CrmError::Convergence { what: "tail inverse", iterations: 200 })
}

/// Observation likelihood, described by its zero probability `pi(theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Likelihood {
    /// `Poiss(theta)`, `pi = e^{-theta}`
    Poisson,
    /// `Bern(theta)`, `pi = 1 - theta`
    Bernoulli,
    /// Negative binomial with `s` failures, `pi = (1 - theta)^s`
    NegativeBinomial { s: f64 },
    /// `Bern(theta / (1 + theta))`, `pi = 1 / (1 + theta)`
    OddsBernoulli,
}

impl fmt::Display for Likelihood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Likelihood::Poisson => f.write_str("poisson"),
            Likelihood::Bernoulli => f.write_str("bernoulli"),
            Likelihood::NegativeBinomial { s } => write!(f, "negbinom:{s}"),
            Likelihood::OddsBernoulli => f.write_str("oddsbernoulli"),
        }
    }
}

impl Likelihood {
    pub fn check_compatible(&self, spec: &RateMeasureSpec) -> Result<()> {
        if let Likelihood::NegativeBinomial { s } = *self {
            positive("negative binomial s", s)?;
        }
        let ok = matches!(
            (self, spec.family()),
            (Likelihood::Poisson, Family::Gamma | Family::Lomax)
                | (Likelihood::Bernoulli | Likelihood::NegativeBinomial { .. }, Family::Beta)
                | (Likelihood::OddsBernoulli, Family::BetaPrime)
        );
        if ok {
            Ok(())
        } else {
            Err(CrmError::Incompatible { rep: format!("likelihood {self}"), target: spec.to_string() })
        }
    }

    /// Default likelihood for a family.
    pub fn default_for(family: Family) -> Likelihood {
        match family {
            Family::Gamma | Family::Lomax => Likelihood::Poisson,
            Family::Beta => Likelihood::Bernoulli,
            Family::BetaPrime => Likelihood::OddsBernoulli,
        }
    }

    fn in_support(&self, theta: f64) -> bool {
        match self {
            Likelihood::Bernoulli | Likelihood::NegativeBinomial { .. } => (0.0..=1.0).contains(&theta),
            _ => theta >= 0.0 && theta.is_finite(),
        }
    }

    /// `pi(theta) = P(X = 0 | theta)`; errors outside the support.
    pub fn pi(&self, theta: f64) -> Result<f64> {
        if !self.in_support(theta) {
            return Err(CrmError::Domain { what: "likelihood parameter", value: theta });
        }
        Ok(1.0 - self.one_minus_pi(theta))
    }

    /// `1 - pi(theta)`, accurate for small `theta`. The caller guarantees
    /// that `theta` lies in the support.
    pub fn one_minus_pi(&self, theta: f64) -> f64 {
        match *self {
            Likelihood::Poisson => -(-theta).exp_m1(),
            Likelihood::Bernoulli => theta,
            Likelihood::NegativeBinomial { s } => -(s * (-theta).ln_1p()).exp_m1(),
            Likelihood::OddsBernoulli => theta / (1.0 + theta),
        }
    }

    /// `ln pi(theta)`.
    pub fn ln_pi(&self, theta: f64) -> f64 {
        match *self {
            Likelihood::Poisson => -theta,
            Likelihood::Bernoulli => (-theta).ln_1p(),
            Likelihood::NegativeBinomial { s } => s * (-theta).ln_1p(),
            Likelihood::OddsBernoulli => -theta.ln_1p(),
        }
    }

    /// `ln pi(theta)` given also `comp = 1 - theta`, for the likelihoods on
    /// the unit interval. Others ignore `comp`.
    pub fn ln_pi_c(&self, theta: f64, comp: f64) -> f64 {
        match *self {
            Likelihood::Bernoulli => comp.ln(),
            Likelihood::NegativeBinomial { s } => s * comp.ln(),
            _ => self.ln_pi(theta),
        }
    }

    /// `1 - pi(theta)^n`.
    pub fn one_minus_pi_pow(&self, theta: f64, n: u32) -> f64 {
        -(n as f64 * self.ln_pi(theta)).exp_m1()
    }

    /// Smallest `L` with `1 - pi(theta) <= L theta` for all `theta`.
    pub fn linear_constant(&self) -> f64 {
        match *self {
            Likelihood::NegativeBinomial { s } => s.max(1.0),
            _ => 1.0,
        }
    }
}

/// `b - a` given `ln a` and `ln b`, without cancellation when `a ~ b`.
fn diff_from_logs(ln_a: f64, ln_b: f64) -> f64 {
    ln_a.exp() * (ln_b - ln_a).exp_m1()
}

/// Conditional law of a size-biased atom given its trait count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConditionalWeight {
    /// `Gam(shape, rate)`
    Gamma { shape: f64, rate: f64 },
    /// `Beta(a, b)`
    Beta { a: f64, b: f64 },
    /// `BetaPrime(a, b)`
    BetaPrime { a: f64, b: f64 },
}

/// Size-biased integrals `eta_k = int pi^{k-1} (1 - pi) dnu` and their
/// decomposition `eta_kx = int h(x | theta) pi^{k-1} dnu` over trait counts,
/// for the conjugate pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeBiasedWeights {
    spec: RateMeasureSpec,
    lik: Likelihood,
}

impl SizeBiasedWeights {
    pub fn new(spec: &RateMeasureSpec, lik: &Likelihood) -> Result<Self> {
        spec.validate()?;
        lik.check_compatible(spec)?;
        if spec.family() == Family::Lomax {
            return Err(CrmError::Incompatible { rep: "size-biased".into(), target: spec.to_string() });
        }
        Ok(SizeBiasedWeights { spec: *spec, lik: *lik })
    }

    pub fn spec(&self) -> &RateMeasureSpec {
        &self.spec
    }

    pub fn likelihood(&self) -> &Likelihood {
        &self.lik
    }

    /// `eta_k` for `k >= 1`.
    pub fn eta(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(CrmError::Domain { what: "size-biased round", value: 0.0 });
        }
        let kf = k as f64;
        match (self.spec, self.lik) {
            (RateMeasureSpec::Gamma { gamma, lambda, d }, _) => {
                let lo = lambda + kf - 1.0;
                if d == 0.0 {
                    Ok(gamma * lambda * (1.0 / lo).ln_1p())
                } else {
                    let c = gamma * lambda.powf(1.0 - d) / d;
                    Ok(c * diff_from_logs(d * lo.ln(), d * (lo + 1.0).ln()))
                }
            }
            (RateMeasureSpec::Beta { gamma, alpha, d }, Likelihood::NegativeBinomial { s }) => {
                let x1 = alpha + s * (kf - 1.0);
                let x2 = alpha + s * kf;
                if d == 0.0 {
                    return Ok(gamma * alpha * (digamma(x2)? - digamma(x1)?));
                }
                // (gamma / d) Gamma(alpha+1)/Gamma(alpha+d) [R(x2) - R(x1)], R(x) = Gamma(x+d)/Gamma(x)
                let pre = gamma / d * (ln_gamma(alpha + 1.0)? - ln_gamma(alpha + d)?).exp();
                let ln_r = |x: f64| -> Result<f64> { Ok(ln_gamma(x + d)? - ln_gamma(x)?) };
                if x1 > 0.0 {
                    Ok(pre * diff_from_logs(ln_r(x1)?, ln_r(x2)?))
                } else {
                    // only reachable at k = 1 with alpha <= 0
                    let r1 = if x1 == 0.0 { 0.0 } else { crate::specialfn::gamma(x1 + d)? / crate::specialfn::gamma(x1)? };
                    Ok(pre * (ln_r(x2)?.exp() - r1))
                }
            }
            (RateMeasureSpec::Beta { gamma, alpha, d }, _) | (RateMeasureSpec::BetaPrime { gamma, alpha, d }, _) => {
                let ln = gamma.ln() + ln_gamma(alpha + 1.0)? - ln_gamma(alpha + d)? + ln_gamma(alpha + d + kf - 1.0)?
                    - ln_gamma(alpha + kf)?;
                Ok(ln.exp())
            }
            (RateMeasureSpec::Lomax { .. }, _) => unreachable!("rejected at construction"),
        }
    }

    /// `eta_{k1}`, the weight of a single trait count.
    pub fn eta_first(&self, k: usize) -> Result<f64> {
        let kf = k as f64;
        match (self.spec, self.lik) {
            (RateMeasureSpec::Gamma { gamma, lambda, d }, _) => {
                Ok(gamma * ((1.0 - d) * lambda.ln() + (d - 1.0) * (lambda + kf).ln()).exp())
            }
            (RateMeasureSpec::Beta { gamma, alpha, d }, Likelihood::NegativeBinomial { s }) => {
                let ln = gamma.ln() + s.ln() + ln_gamma(alpha + 1.0)? - ln_gamma(alpha + d)?
                    + ln_gamma(alpha + d + s * kf)?
                    - ln_gamma(alpha + s * kf + 1.0)?;
                Ok(ln.exp())
            }
            _ => self.eta(k),
        }
    }

    /// `eta_{k,x+1} / eta_{kx}`. Zero when only `x = 1` is possible.
    pub fn eta_ratio(&self, k: usize, x: u64) -> f64 {
        let (kf, xf) = (k as f64, x as f64);
        match (self.spec, self.lik) {
            (RateMeasureSpec::Gamma { lambda, d, .. }, _) => (xf - d) / ((xf + 1.0) * (lambda + kf)),
            (RateMeasureSpec::Beta { alpha, d, .. }, Likelihood::NegativeBinomial { s }) => {
                (xf + s) / (xf + 1.0) * (xf - d) / (xf + alpha + s * kf)
            }
            _ => 0.0,
        }
    }

    /// Law of the atom weight in round `k` given trait count `x`.
    pub fn conditional(&self, k: usize, x: u64) -> ConditionalWeight {
        let (kf, xf) = (k as f64, x as f64);
        match (self.spec, self.lik) {
            (RateMeasureSpec::Gamma { lambda, d, .. }, _) => ConditionalWeight::Gamma { shape: xf - d, rate: lambda + kf },
            (RateMeasureSpec::Beta { alpha, d, .. }, Likelihood::NegativeBinomial { s }) => {
                ConditionalWeight::Beta { a: xf - d, b: alpha + d + s * kf }
            }
            (RateMeasureSpec::Beta { alpha, d, .. }, _) => ConditionalWeight::Beta { a: 1.0 - d, b: alpha + d + kf - 1.0 },
            (RateMeasureSpec::BetaPrime { alpha, d, .. }, _) => {
                ConditionalWeight::BetaPrime { a: 1.0 - d, b: alpha + d + kf - 1.0 }
            }
            (RateMeasureSpec::Lomax { .. }, _) => unreachable!("rejected at construction"),
        }
    }

    /// Inverse-CDF draw of the trait count `x >= 1` in round `k` from a
    /// uniform `u`. The search stops once the unexplored mass falls below
    /// `1e-12` of `eta_k`, or at `x = 10^7`, which only the polynomial tails
    /// of the negative binomial pairs can reach.
    pub fn trait_count(&self, k: usize, eta_k: f64, eta_first: f64, u: f64) -> u64 {
        let target = u * eta_k;
        let mut x = 1u64;
        let mut term = eta_first;
        let mut cum = eta_first;
        while cum < target && eta_k - cum > 1e-12 * eta_k && x < 10_000_000 {
            let next = term * self.eta_ratio(k, x);
            if !(next > 0.0) {
                break;
            }
            term = next;
            x += 1;
            cum += term;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn specs() -> Vec<RateMeasureSpec> {
        vec![
            RateMeasureSpec::gamma_process(1.0, 1.0, 0.0).unwrap(),
            RateMeasureSpec::gamma_process(2.0, 0.5, 0.4).unwrap(),
            RateMeasureSpec::beta_process(1.0, 2.0, 0.0).unwrap(),
            RateMeasureSpec::beta_process(1.5, 0.7, 0.3).unwrap(),
            RateMeasureSpec::beta_prime_process(1.0, 2.0, 0.0).unwrap(),
            RateMeasureSpec::beta_prime_process(0.5, 1.5, 0.5).unwrap(),
            RateMeasureSpec::lomax_process(1.0, 2.0).unwrap(),
        ]
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(RateMeasureSpec::gamma_process(0.0, 1.0, 0.0).is_err());
        assert!(RateMeasureSpec::gamma_process(1.0, 1.0, 1.0).is_err());
        assert!(RateMeasureSpec::beta_process(1.0, -0.5, 0.2).is_err());
        assert!(RateMeasureSpec::beta_process(1.0, -0.1, 0.2).is_ok());
        assert!(RateMeasureSpec::lomax_process(1.0, -1.0).is_err());
    }

    #[test]
    fn gamma_density_reference() {
        let s = RateMeasureSpec::gamma_process(1.0, 1.0, 0.0).unwrap();
        assert!((s.density(1.0) - (-1f64).exp()).abs() < 1e-14);
        let s = RateMeasureSpec::beta_process(1.0, 1.0, 0.0).unwrap();
        assert!((s.density(0.5) - 2.0).abs() < 1e-14);
        assert_eq!(s.density(1.5), 0.0);
    }

    #[test]
    fn closed_tails_match_quadrature() {
        for s in specs() {
            for &x in &[1e-3, 0.1, 0.5, 0.9, 3.0] {
                if x >= s.upper_support() {
                    continue;
                }
                let levy = s.levy();
                let q = integrate_positive_c(|t, c| levy.ln_density_c(t, c).exp(), x, s.upper_support(), &Precision::quadrature())
                    .unwrap()
                    .value;
                let t = s.tail(x).unwrap();
                assert!((t - q).abs() <= 1e-9 * q, "{s} x={x}: {t} vs {q}");
            }
        }
    }

    #[test]
    fn tail_inverse_roundtrip_over_increasing_levels() {
        for s in specs() {
            let mut inv = TailInverter::new(&s).unwrap();
            let mut u = 0.0;
            for k in 0..40 {
                u += 0.05 + 0.3 * (k % 3) as f64;
                let x = inv.invert(u).unwrap();
                let back = s.tail(x).unwrap();
                assert!((back - u).abs() <= 1e-8 * u, "{s} u={u} x={x} back={back}");
            }
        }
    }

    #[test]
    fn tail_inverse_small_levels_and_restart() {
        let s = RateMeasureSpec::beta_prime_process(1.0, 2.0, 0.0).unwrap();
        let mut inv = TailInverter::new(&s).unwrap();
        for &u in &[5.0, 1e-3, 0.2, 0.1] {
            let x = inv.invert(u).unwrap();
            assert!((s.tail(x).unwrap() - u).abs() <= 1e-8 * u, "u={u}");
        }
    }

    #[test]
    fn likelihood_pairs() {
        let g = RateMeasureSpec::gamma_process(1.0, 1.0, 0.0).unwrap();
        let b = RateMeasureSpec::beta_process(1.0, 1.0, 0.0).unwrap();
        assert!(Likelihood::Poisson.check_compatible(&g).is_ok());
        assert!(Likelihood::Bernoulli.check_compatible(&g).is_err());
        assert!(Likelihood::NegativeBinomial { s: 2.0 }.check_compatible(&b).is_ok());
        assert!(Likelihood::Bernoulli.pi(1.5).is_err());
        assert!((Likelihood::Poisson.pi(0.0).unwrap() - 1.0).abs() < 1e-16);
    }

    fn sb_pairs() -> Vec<(RateMeasureSpec, Likelihood)> {
        vec![
            (RateMeasureSpec::gamma_process(1.0, 1.0, 0.0).unwrap(), Likelihood::Poisson),
            (RateMeasureSpec::gamma_process(2.0, 0.5, 0.3).unwrap(), Likelihood::Poisson),
            (RateMeasureSpec::beta_process(1.5, 2.0, 0.0).unwrap(), Likelihood::Bernoulli),
            (RateMeasureSpec::beta_process(1.0, -0.2, 0.4).unwrap(), Likelihood::Bernoulli),
            (RateMeasureSpec::beta_process(1.0, 1.5, 0.0).unwrap(), Likelihood::NegativeBinomial { s: 3.0 }),
            (RateMeasureSpec::beta_process(1.0, -0.1, 0.5).unwrap(), Likelihood::NegativeBinomial { s: 2.0 }),
            (RateMeasureSpec::beta_prime_process(1.0, 2.0, 0.0).unwrap(), Likelihood::OddsBernoulli),
            (RateMeasureSpec::beta_prime_process(0.7, 0.5, 0.6).unwrap(), Likelihood::OddsBernoulli),
        ]
    }

    #[test]
    fn size_biased_eta_matches_quadrature() {
        for (spec, lik) in sb_pairs() {
            let w = SizeBiasedWeights::new(&spec, &lik).unwrap();
            let levy = spec.levy();
            for k in 1..=20usize {
                let f = |t: f64, c: f64| {
                    let ln_pi = if k == 1 { 0.0 } else { (k as f64 - 1.0) * lik.ln_pi_c(t, c) };
                    (ln_pi + levy.ln_density_c(t, c) + lik.one_minus_pi(t).ln()).exp()
                };
                let q = integrate_positive_c(f, 0.0, spec.upper_support(), &Precision::quadrature()).unwrap().value;
                let e = w.eta(k).unwrap();
                assert!((e - q).abs() <= 1e-8 * q, "{spec} {lik} k={k}: {e} vs {q}");
            }
        }
    }

    #[test]
    fn size_biased_decomposition_sums_to_eta() {
        for (spec, lik) in sb_pairs() {
            let w = SizeBiasedWeights::new(&spec, &lik).unwrap();
            for k in [1usize, 4, 30] {
                let mut term = w.eta_first(k).unwrap();
                let mut sum = term;
                for x in 1..2_000_000u64 {
                    term *= w.eta_ratio(k, x);
                    sum += term;
                    if term < 1e-18 * sum {
                        break;
                    }
                }
                let e = w.eta(k).unwrap();
                // negative binomial trait counts have polynomial tails; the
                // partial sum approaches eta from below
                let tol = if matches!(lik, Likelihood::NegativeBinomial { .. }) { 1e-2 } else { 1e-9 };
                assert!(sum <= e * (1.0 + 1e-12) && e - sum <= tol * e, "{spec} {lik} k={k}: {sum} vs {e}");
            }
        }
        // gamma, d = 0, k = 1: eta_1 = log 2
        let w = SizeBiasedWeights::new(&RateMeasureSpec::gamma_process(1.0, 1.0, 0.0).unwrap(), &Likelihood::Poisson).unwrap();
        assert!((w.eta(1).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn campbell_first_moment_by_quadrature() {
        for spec in specs() {
            if let Some(m) = spec.mean_total_mass() {
                let levy = spec.levy();
                let q = integrate_positive_c(|t, c| (levy.ln_density_c(t, c) + t.ln()).exp(), 0.0, spec.upper_support(), &Precision::quadrature())
                    .unwrap()
                    .value;
                assert!((q - m).abs() <= 1e-8 * m, "{spec}: {q} vs {m}");
            }
        }
    }

    proptest! {
        #[test]
        fn pi_in_unit_interval_and_nonincreasing(a in 0.0f64..1.0, b in 0.0f64..1.0, s in 0.5f64..4.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            for lik in [Likelihood::Poisson, Likelihood::Bernoulli, Likelihood::NegativeBinomial { s }, Likelihood::OddsBernoulli] {
                let p_lo = lik.pi(lo).unwrap();
                let p_hi = lik.pi(hi).unwrap();
                prop_assert!((0.0..=1.0).contains(&p_lo) && (0.0..=1.0).contains(&p_hi));
                prop_assert!(p_hi <= p_lo + 1e-15);
                prop_assert!(lik.one_minus_pi(hi) <= lik.linear_constant() * hi + 1e-15);
            }
        }

        #[test]
        fn tail_is_nonincreasing(x in 1e-4f64..5.0, y in 1e-4f64..5.0) {
            let (lo, hi) = if x < y { (x, y) } else { (y, x) };
            let g = RateMeasureSpec::gamma_process(1.3, 0.7, 0.25).unwrap();
            prop_assert!(g.tail(hi).unwrap() <= g.tail(lo).unwrap() * (1.0 + 1e-12));
        }
    }
}
