//! Monte Carlo oracles for the truncation bounds and the samplers.
//!
//! Coverage oracles simulate the process at a deep truncation `K_big`, draw
//! the observations and record whether any expressed atom lies beyond the
//! first `K` outer indices. The other checks compare sampler output with
//! known laws: the gamma-process total mass, Campbell's first moment, the
//! cost model and categorical sampling.

use crate::bounds::{bound, error_from_b, invert_bound, BoundQuery};
use crate::error::{CrmError, Result};
use crate::exec::{rng_for, Exec, RunningStats};
use crate::measures::{Likelihood, RateMeasureSpec};
use crate::ncrm::{gumbel_max_index, gumbel_max_sample, ncrm_bound_closed_form, ncrm_error_from_b, normalize, NcrmFamily};
use crate::reps::{expected_cost, expected_rejections, sample, KernelSpec, RepKind, RepresentationSpec, Sampler};
use crate::specialfn::{regularized_gamma_p, regularized_gamma_q};

/// Upper limit on the deep truncation level chosen by [`default_k_big`].
pub const K_BIG_CAP: usize = 100_000;

/// Estimated probability of a coverage failure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub replicates: usize,
}

impl CoverageEstimate {
    pub fn from_hits(hits: usize, replicates: usize) -> Self {
        let n = replicates as f64;
        let p_hat = hits as f64 / n;
        CoverageEstimate { p_hat, std_err: (p_hat * (1.0 - p_hat) / n).sqrt(), replicates }
    }

    /// `p_hat + z * std_err`.
    pub fn upper(&self, z: f64) -> f64 {
        self.p_hat + z * self.std_err
    }
}

/// Replicate count, root seed and execution strategy of a Monte Carlo check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replication {
    pub replicates: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Replication {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Replication { replicates, seed, exec: Exec::default() }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }
}

/// A grid of observation counts and truncation levels, evaluated against a
/// deep truncation `k_big`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGrid {
    pub ns: Vec<u32>,
    pub ks: Vec<usize>,
    pub k_big: usize,
}

impl CoverageGrid {
    fn check(&self) -> Result<()> {
        if self.ns.is_empty() || self.ks.is_empty() {
            return Err(CrmError::InvalidParameter("empty coverage grid".into()));
        }
        let k_max = *self.ks.iter().max().expect("nonempty");
        if self.k_big < k_max {
            return Err(CrmError::InvalidParameter(format!("K_big = {} is below K = {k_max}", self.k_big)));
        }
        Ok(())
    }

    fn n_max(&self) -> u32 {
        self.ns.iter().copied().max().unwrap_or(0)
    }

    /// Estimates indexed `[n][k]` from the largest outer index reached by
    /// the first `n` observations in each replicate.
    fn tally(&self, last: &[Vec<usize>]) -> Vec<Vec<CoverageEstimate>> {
        let reps = last.len();
        (0..self.ns.len())
            .map(|j| {
                self.ks
                    .iter()
                    .map(|&k| CoverageEstimate::from_hits(last.iter().filter(|m| m[j] > k).count(), reps))
                    .collect()
            })
            .collect()
    }
}

fn check_replicates(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(CrmError::InvalidParameter(format!("need at least {min} replicates, got {n}")));
    }
    Ok(())
}

/// The deep truncation level for a grid: the smallest `K_big` whose bound is
/// below `1e-3` times the bound at every grid point, capped at
/// [`K_BIG_CAP`].
pub fn default_k_big(q: &BoundQuery, ns: &[u32], ks: &[usize]) -> Result<usize> {
    let mut k_big = ks.iter().copied().max().unwrap_or(0);
    for &n in ns {
        for &k in ks {
            let e = bound(&q.clone().with_n(n).with_k(k))?.error_bound;
            if !(e > 0.0) {
                continue;
            }
            let level = match invert_bound(&q.clone().with_n(n), 1e-3 * e) {
                Ok(kb) => kb,
                Err(CrmError::Unreachable { .. }) => K_BIG_CAP,
                Err(err) => return Err(err),
            };
            k_big = k_big.max(level.min(K_BIG_CAP));
        }
    }
    Ok(k_big)
}

/// Coverage failure frequencies of a CRM truncation on a grid.
///
/// Each atom of `Theta_{K_big}` is first expressed by observation
/// `n* ~ Geom(1 - pi(theta))`, which is how independent trait counts
/// `x_n ~ h(. | theta)` reach their first nonzero value. The failure event at
/// `(N, K)` is that some atom with `n* <= N` has outer index above `K`.
pub fn crm_coverage_grid(
    spec: &RateMeasureSpec,
    lik: &Likelihood,
    rep: &RepresentationSpec,
    grid: &CoverageGrid,
    plan: &Replication,
) -> Result<Vec<Vec<CoverageEstimate>>> {
    grid.check()?;
    check_replicates(plan.replicates, 1)?;
    lik.check_compatible(spec)?;
    let sampler = Sampler::new(spec, rep, grid.k_big)?;
    let last = plan.exec.try_map(plan.replicates, |r| {
        let mut rng = rng_for(plan.seed, 41, r as u64);
        let (m, _) = sampler.draw(&mut rng)?;
        let mut last = vec![0usize; grid.ns.len()];
        for a in &m.atoms {
            // atoms of the finite component are never truncated
            if a.k == 0 || !(a.weight > 0.0) {
                continue;
            }
            let lp = lik.ln_pi(a.weight);
            let first = if lp == f64::NEG_INFINITY { 1.0 } else { (sample::open01(&mut rng).ln() / lp).ceil().max(1.0) };
            for (j, &n) in grid.ns.iter().enumerate() {
                if first <= n as f64 && a.k > last[j] {
                    last[j] = a.k;
                }
            }
        }
        Ok(last)
    })?;
    Ok(grid.tally(&last))
}

/// Probability that the first `n` observations of the likelihood process
/// express an atom of `Theta_{K_big}` beyond the first `k` outer indices.
#[allow(clippy::too_many_arguments)]
pub fn estimate_crm_coverage(
    spec: &RateMeasureSpec,
    lik: &Likelihood,
    rep: &RepresentationSpec,
    n: u32,
    k: usize,
    k_big: usize,
    replicates: usize,
    seed: u64,
) -> Result<CoverageEstimate> {
    let grid = CoverageGrid { ns: vec![n], ks: vec![k], k_big };
    Ok(crm_coverage_grid(spec, lik, rep, &grid, &Replication::new(replicates, seed))?[0][0])
}

/// Coverage failure frequencies of a normalized truncation on a grid. Each
/// replicate normalizes `Theta_{K_big}` and draws categorical indices by the
/// Gumbel-max trick.
pub fn ncrm_coverage_grid(
    spec: &RateMeasureSpec,
    rep: &RepresentationSpec,
    grid: &CoverageGrid,
    plan: &Replication,
) -> Result<Vec<Vec<CoverageEstimate>>> {
    grid.check()?;
    check_replicates(plan.replicates, 1)?;
    let sampler = Sampler::new(spec, rep, grid.k_big)?;
    let n_max = grid.n_max() as usize;
    let last = plan.exec.try_map(plan.replicates, |r| {
        let mut rng = rng_for(plan.seed, 42, r as u64);
        let (m, _) = sampler.draw(&mut rng)?;
        let mut last = vec![0usize; grid.ns.len()];
        if n_max == 0 {
            return Ok(last);
        }
        let p = normalize(&m)?;
        let picks = gumbel_max_sample(&p, n_max, &mut rng);
        let mut reach = 0;
        let mut prefix = Vec::with_capacity(n_max + 1);
        prefix.push(0);
        for &i in &picks {
            reach = reach.max(p.atoms[i].k);
            prefix.push(reach);
        }
        for (j, &n) in grid.ns.iter().enumerate() {
            last[j] = prefix[(n as usize).min(picks.len())];
        }
        Ok(last)
    })?;
    Ok(grid.tally(&last))
}

/// Probability that `n` draws from the normalized `Theta_{K_big}` include an
/// atom beyond the first `k` outer indices.
pub fn estimate_ncrm_coverage(
    spec: &RateMeasureSpec,
    rep: &RepresentationSpec,
    n: u32,
    k: usize,
    k_big: usize,
    replicates: usize,
    seed: u64,
) -> Result<CoverageEstimate> {
    let grid = CoverageGrid { ns: vec![n], ks: vec![k], k_big };
    Ok(ncrm_coverage_grid(spec, rep, &grid, &Replication::new(replicates, seed))?[0][0])
}

/// The deep truncation level for a normalized grid, from the catalogued
/// NCRM bound of `family`.
pub fn default_ncrm_k_big(family: &NcrmFamily, ns: &[u32], ks: &[usize]) -> Result<usize> {
    let mut k_big = ks.iter().copied().max().unwrap_or(0);
    for &n in ns {
        for &k in ks {
            let e = ncrm_bound_closed_form(family, n, k)?.error_bound;
            if !(e > 0.0) {
                continue;
            }
            let mut kb = k.max(1);
            while kb < K_BIG_CAP && ncrm_bound_closed_form(family, n, kb)?.error_bound > 1e-3 * e {
                kb *= 2;
            }
            k_big = k_big.max(kb.min(K_BIG_CAP));
        }
    }
    Ok(k_big)
}

/// Kolmogorov-Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `P(sup |B(t)| > x)` for a Brownian bridge `B`.
fn kolmogorov_q(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let s: f64 = (1..=50).map(|j| (-((2 * j - 1) as f64).powi(2) * c).exp()).sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=50)
        .map(|j| {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (j * j) as f64 * x * x).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sided one-sample KS test of `xs` against `cdf`, with Stephens'
/// small-sample correction of the limiting law.
pub fn ks_test<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<KsResult> {
    if xs.is_empty() {
        return Err(CrmError::InvalidParameter("KS test of an empty sample".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let en = n.sqrt();
    Ok(KsResult { statistic: d, p_value: kolmogorov_q((en + 0.12 + 0.11 / en) * d) })
}

/// Total masses of independent truncations at level `k`.
pub fn total_masses(spec: &RateMeasureSpec, rep: &RepresentationSpec, k: usize, plan: &Replication) -> Result<Vec<f64>> {
    let sampler = Sampler::new(spec, rep, k)?;
    plan.exec.try_map(plan.replicates, |r| {
        let mut rng = rng_for(plan.seed, 43, r as u64);
        Ok(sampler.draw(&mut rng)?.0.total_mass())
    })
}

/// KS test of the total masses of a `GammaP(gamma, lambda, 0)` truncation
/// against `Gam(shape, rate)`.
pub fn ks_total_mass_against(
    spec: &RateMeasureSpec,
    rep: &RepresentationSpec,
    k: usize,
    plan: &Replication,
    shape: f64,
    rate: f64,
) -> Result<KsResult> {
    match *spec {
        RateMeasureSpec::Gamma { d, .. } if d == 0.0 => {}
        _ => return Err(CrmError::InvalidParameter(format!("total-mass KS test needs a gamma process with d = 0, got {spec}"))),
    }
    check_replicates(plan.replicates, 100)?;
    let xs = total_masses(spec, rep, k, plan)?;
    ks_test(&xs, |x| if x <= 0.0 { 0.0 } else { regularized_gamma_p(shape, rate * x).unwrap_or(f64::NAN) })
}

/// p-value of the KS test of the total mass of `GammaP(gamma, lambda, 0)`
/// against its law `Gam(gamma lambda, lambda)`.
pub fn ks_total_mass(spec: &RateMeasureSpec, rep: &RepresentationSpec, k: usize, replicates: usize, seed: u64) -> Result<f64> {
    let RateMeasureSpec::Gamma { gamma, lambda, .. } = *spec else {
        return Err(CrmError::InvalidParameter(format!("total-mass KS test needs a gamma process, got {spec}")));
    };
    Ok(ks_total_mass_against(spec, rep, k, &Replication::new(replicates, seed), gamma * lambda, lambda)?.p_value)
}

/// A sample mean compared with its expected value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCheck {
    pub mean: f64,
    pub std_err: f64,
    pub target: f64,
    pub replicates: usize,
}

impl MeanCheck {
    fn from_stats(s: &RunningStats, target: f64) -> Self {
        MeanCheck { mean: s.mean(), std_err: s.std_err(), target, replicates: s.count() as usize }
    }

    /// `|mean - target| / std_err`, or zero for an exact match.
    pub fn z_score(&self) -> f64 {
        let gap = (self.mean - self.target).abs();
        if gap <= 1e-12 * self.target.abs() {
            0.0
        } else {
            gap / self.std_err
        }
    }

    pub fn passes(&self, z: f64) -> bool {
        self.z_score() <= z
    }
}

fn replicate_stats<F>(sampler: &Sampler, plan: &Replication, stream: u64, f: F) -> Result<RunningStats>
where
    F: Fn(&crate::reps::AtomicMeasure, &crate::reps::DrawLedger, &mut crate::exec::Rng) -> f64 + Sync + Send,
{
    check_replicates(plan.replicates, 2)?;
    let xs = plan.exec.try_map(plan.replicates, |r| {
        let mut rng = rng_for(plan.seed, stream, r as u64);
        let (m, led) = sampler.draw(&mut rng)?;
        Ok(f(&m, &led, &mut rng))
    })?;
    Ok(xs.into_iter().collect())
}

/// Mean total mass of the level-`k` truncation against `int theta nu(d theta)`.
pub fn campbell_check(spec: &RateMeasureSpec, rep: &RepresentationSpec, k: usize, plan: &Replication) -> Result<MeanCheck> {
    let target = spec
        .mean_total_mass()
        .ok_or_else(|| CrmError::Unsupported(format!("first moment of {spec} is infinite")))?;
    let s = replicate_stats(&Sampler::new(spec, rep, k)?, plan, 44, |m, _, _| m.total_mass())?;
    Ok(MeanCheck::from_stats(&s, target))
}

/// Campbell check of the measure obtained by pushing a truncation of `base`
/// through `kernel`.
pub fn campbell_check_mapped(
    base: &RateMeasureSpec,
    rep: &RepresentationSpec,
    kernel: &KernelSpec,
    k: usize,
    plan: &Replication,
) -> Result<MeanCheck> {
    let target = kernel
        .target(base)?
        .mean_total_mass()
        .ok_or_else(|| CrmError::Unsupported("first moment of the mapped measure is infinite".into()))?;
    let s = replicate_stats(&Sampler::new(base, rep, k)?, plan, 44, |m, _, rng| {
        m.atoms.iter().map(|a| kernel.sample(a.weight, rng)).sum()
    })?;
    Ok(MeanCheck::from_stats(&s, target))
}

/// Mean number of random variables drawn against the cost model.
pub fn cost_check(spec: &RateMeasureSpec, rep: &RepresentationSpec, k: usize, plan: &Replication) -> Result<MeanCheck> {
    let target = expected_cost(spec, rep, k)?;
    let s = replicate_stats(&Sampler::new(spec, rep, k)?, plan, 46, |_, led, _| led.total() as f64)?;
    Ok(MeanCheck::from_stats(&s, target))
}

/// Mean number of rejected candidates of a rejection representation against
/// the expected total. Use a `k` large enough that later candidates are
/// almost never rejected.
pub fn rejection_check(spec: &RateMeasureSpec, rep: &RepresentationSpec, k: usize, plan: &Replication) -> Result<MeanCheck> {
    let RepresentationSpec::Rejection { mu } = rep else {
        return Err(CrmError::InvalidParameter(format!("rejection counts need a rejection representation, got {rep}")));
    };
    let target = expected_rejections(spec, mu)?;
    let s = replicate_stats(&Sampler::new(spec, rep, k)?, plan, 47, |_, led, _| led.rejected_atoms as f64)?;
    Ok(MeanCheck::from_stats(&s, target))
}

/// Pearson goodness-of-fit statistic with its upper-tail p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson test of observed `counts` against `probs`. Categories expected to
/// receive fewer than five draws are pooled.
pub fn chi_square_test(counts: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if counts.len() != probs.len() || counts.is_empty() {
        return Err(CrmError::InvalidParameter("counts and probabilities differ in length".into()));
    }
    let total: u64 = counts.iter().sum();
    let mass: f64 = probs.iter().sum();
    let n = total as f64;
    let mut cells = Vec::new();
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        let e = n * p / mass;
        if e < 5.0 {
            pool_obs += c as f64;
            pool_exp += e;
        } else {
            cells.push((c as f64, e));
        }
    }
    if pool_exp > 0.0 {
        cells.push((pool_obs, pool_exp));
    }
    if cells.len() < 2 {
        return Err(CrmError::InvalidParameter("fewer than two categories to compare".into()));
    }
    let statistic: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let df = cells.len() - 1;
    Ok(ChiSquare { statistic, df, p_value: regularized_gamma_q(df as f64 / 2.0, statistic / 2.0)? })
}

/// A categorical distribution on `len` outcomes drawn from the flat
/// Dirichlet law.
pub fn random_categorical(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 48, 0);
    let e: Vec<f64> = (0..len).map(|_| -sample::open01(&mut rng).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Pearson test of `draws` Gumbel-max samples from `probs`.
pub fn gumbel_chi_square(probs: &[f64], draws: usize, seed: u64) -> Result<ChiSquare> {
    let ln_p: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    let mut rng = rng_for(seed, 49, 0);
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..draws {
        if let Some(i) = gumbel_max_index(&ln_p, &mut rng) {
            counts[i] += 1;
        }
    }
    chi_square_test(&counts, probs)
}

/// Relative size of the neglected stick mass at which a power-law path stops.
const PATH_TOL: f64 = 1e-3;
const PATH_MAX_ROUNDS: usize = 1_000_000;

/// Mean number of distinct traits `E[K_N]` after `N` observations from the
/// power-law representation, for every `N` in `n_grid`.
///
/// The count of expressed atoms is replaced by its conditional mean
/// `sum (1 - pi(theta)^N)`, and each replicate follows one stick-breaking
/// path: round `j` of a single atom lineage carries the expected
/// contribution of the `Poiss(mass)` atoms of that round.
pub fn powerlaw_trait_counts(rep: &RepresentationSpec, lik: &Likelihood, n_grid: &[u32], plan: &Replication) -> Result<Vec<f64>> {
    let RepresentationSpec::PowerLaw { mass, alpha, d, g } = *rep else {
        return Err(CrmError::InvalidParameter(format!("power-law trait counts need a power-law representation, got {rep}")));
    };
    check_replicates(plan.replicates, 2)?;
    let l = lik.linear_constant();
    let sums = plan.exec.map(plan.replicates, |r| {
        let mut rng = rng_for(plan.seed, 45, r as u64);
        let v = g.sample(&mut rng);
        let mut stick = 1.0;
        let mut sum = vec![0.0; n_grid.len()];
        for j in 1..=PATH_MAX_ROUNDS {
            let (u, q) = sample::beta_pair_raw(&mut rng, 1.0 - d, alpha + j as f64 * d);
            let theta = v * u * stick;
            for (s, &n) in sum.iter_mut().zip(n_grid) {
                *s += lik.one_minus_pi_pow(theta, n);
            }
            stick *= q;
            let done = n_grid.iter().zip(&sum).all(|(&n, &s)| l * n as f64 * v * stick <= PATH_TOL * s);
            if done || stick == 0.0 {
                break;
            }
            if j == PATH_MAX_ROUNDS {
                // the remaining stick bounds what later rounds could add
                for (s, &n) in sum.iter_mut().zip(n_grid) {
                    *s += (l * n as f64 * v * stick).min(1.0);
                }
            }
        }
        sum
    });
    let mut means = vec![0.0; n_grid.len()];
    for s in &sums {
        for (m, x) in means.iter_mut().zip(s) {
            *m += x;
        }
    }
    Ok(means.into_iter().map(|m| mass * m / plan.replicates as f64).collect())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if pts.len() < 2 || !(sxx > 0.0) || pts.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(CrmError::InvalidParameter("degenerate regression grid".into()));
    }
    Ok(sxy / sxx)
}

/// Fitted exponent of `E[K_N]` against `N` for a power-law representation
/// with `d > 0`.
pub fn powerlaw_slope(rep: &RepresentationSpec, lik: &Likelihood, n_grid: &[u32], replicates: usize, seed: u64) -> Result<f64> {
    match *rep {
        RepresentationSpec::PowerLaw { d, .. } if d > 0.0 => {}
        _ => return Err(CrmError::InvalidParameter(format!("power-law slope needs a power-law representation with d > 0, got {rep}"))),
    }
    let counts = powerlaw_trait_counts(rep, lik, n_grid, &Replication::new(replicates, seed))?;
    let xs: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    log_log_slope(&xs, &counts)
}

/// Checks run by [`run_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    /// Coverage domination of the CRM bound on the `(N, K)` grid
    Coverage,
    /// Coverage domination of the catalogued NCRM bound, where one applies
    Ncrm,
    /// Mean total mass against the first moment
    Campbell,
    /// Mean draw count against the cost model
    Cost,
    /// Total-mass KS test, for the gamma process with `d = 0`
    Ks,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Coverage, Suite::Ncrm, Suite::Campbell, Suite::Cost, Suite::Ks];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Coverage => "coverage",
            Suite::Ncrm => "ncrm",
            Suite::Campbell => "campbell",
            Suite::Cost => "cost",
            Suite::Ks => "ks",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = CrmError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| CrmError::InvalidParameter(format!("unknown validation suite '{s}'")))
    }
}

/// One line of a validation report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub suite: &'static str,
    pub params: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl ReportRow {
    pub const CSV_HEADER: &'static str = "suite,params,statistic,threshold,pass";

    pub fn to_csv(&self) -> String {
        format!("{},\"{}\",{:.16e},{:.16e},{}", self.suite, self.params.replace('"', "\"\""), self.statistic, self.threshold, self.pass)
    }
}

/// Inputs of [`run_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub spec: RateMeasureSpec,
    pub lik: Likelihood,
    pub rep: RepresentationSpec,
    pub suites: Vec<Suite>,
    pub ns: Vec<u32>,
    pub ks: Vec<usize>,
    /// Replicates of the coverage checks
    pub replicates: usize,
    /// Truncation level of the moment and distribution checks
    pub deep_k: usize,
    pub seed: u64,
    pub exec: Exec,
    /// Multiplies every bound before it is compared; `1` except when testing
    /// that the suite catches a miscalibrated bound.
    pub bound_scale: f64,
}

impl SuiteConfig {
    pub fn new(spec: RateMeasureSpec, lik: Likelihood, rep: RepresentationSpec) -> Self {
        SuiteConfig {
            spec,
            lik,
            rep,
            suites: Suite::ALL.to_vec(),
            ns: vec![1, 5],
            ks: vec![1, 2, 5, 10, 20],
            replicates: 10_000,
            deep_k: 2000,
            seed: 1,
            exec: Exec::default(),
            bound_scale: 1.0,
        }
    }
}

/// Runs the selected checks and returns one row per test. Suites that do
/// not apply to the configuration emit no rows.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<ReportRow>> {
    let plan = Replication { replicates: cfg.replicates, seed: cfg.seed, exec: cfg.exec };
    let label = format!("{} {} {}", cfg.spec, cfg.rep.kind(), cfg.lik);
    let mut rows = Vec::new();
    for suite in &cfg.suites {
        match suite {
            Suite::Coverage => {
                let q = BoundQuery::new(cfg.spec, cfg.lik, cfg.rep, 1, 0).with_exec(cfg.exec);
                let k_big = default_k_big(&q, &cfg.ns, &cfg.ks)?;
                let grid = CoverageGrid { ns: cfg.ns.clone(), ks: cfg.ks.clone(), k_big };
                let est = crm_coverage_grid(&cfg.spec, &cfg.lik, &cfg.rep, &grid, &plan)?;
                for (j, &n) in cfg.ns.iter().enumerate() {
                    for (i, &k) in cfg.ks.iter().enumerate() {
                        let b = bound(&q.clone().with_n(n).with_k(k))?;
                        let threshold = error_from_b(cfg.bound_scale * b.b) + 3.0 * est[j][i].std_err;
                        rows.push(ReportRow {
                            suite: suite.name(),
                            params: format!("{label} N={n} K={k} K_big={k_big}"),
                            statistic: est[j][i].p_hat,
                            threshold,
                            pass: est[j][i].p_hat <= threshold,
                        });
                    }
                }
            }
            Suite::Ncrm => {
                let Some(family) = NcrmFamily::from_rep(&cfg.spec, &cfg.rep) else {
                    continue;
                };
                let k_big = default_ncrm_k_big(&family, &cfg.ns, &cfg.ks)?;
                let grid = CoverageGrid { ns: cfg.ns.clone(), ks: cfg.ks.clone(), k_big };
                let est = ncrm_coverage_grid(&cfg.spec, &cfg.rep, &grid, &plan)?;
                for (j, &n) in cfg.ns.iter().enumerate() {
                    for (i, &k) in cfg.ks.iter().enumerate() {
                        let b = ncrm_bound_closed_form(&family, n, k)?.b_k;
                        let threshold = ncrm_error_from_b(cfg.bound_scale * b, n) + 3.0 * est[j][i].std_err;
                        rows.push(ReportRow {
                            suite: suite.name(),
                            params: format!("{family} N={n} K={k} K_big={k_big}"),
                            statistic: est[j][i].p_hat,
                            threshold,
                            pass: est[j][i].p_hat <= threshold,
                        });
                    }
                }
            }
            Suite::Campbell => {
                if cfg.spec.mean_total_mass().is_none() {
                    continue;
                }
                let m = campbell_check(&cfg.spec, &cfg.rep, cfg.deep_k, &plan)?;
                rows.push(mean_row(suite.name(), format!("{label} K={}", cfg.deep_k), &m));
            }
            Suite::Cost => {
                let k = cfg.ks.iter().copied().max().unwrap_or(0);
                let m = cost_check(&cfg.spec, &cfg.rep, k, &plan)?;
                rows.push(mean_row(suite.name(), format!("{label} K={k}"), &m));
            }
            Suite::Ks => {
                let RateMeasureSpec::Gamma { gamma, lambda, d } = cfg.spec else {
                    continue;
                };
                if d != 0.0 {
                    continue;
                }
                let r = ks_total_mass_against(&cfg.spec, &cfg.rep, cfg.deep_k, &plan, gamma * lambda, lambda)?;
                rows.push(ReportRow {
                    suite: suite.name(),
                    params: format!("{label} K={}", cfg.deep_k),
                    statistic: r.p_value,
                    threshold: 0.01,
                    pass: r.p_value > 0.01,
                });
            }
        }
    }
    Ok(rows)
}

fn mean_row(suite: &'static str, params: String, m: &MeanCheck) -> ReportRow {
    let z = m.z_score();
    ReportRow { suite, params: format!("{params} mean={} target={}", m.mean, m.target), statistic: z, threshold: 3.0, pass: z <= 3.0 }
}

/// The representations available for `spec` with likelihood `lik`.
pub fn compatible_reps(spec: &RateMeasureSpec, lik: &Likelihood) -> Vec<RepresentationSpec> {
    RepKind::ALL.iter().filter_map(|&kind| RepresentationSpec::new(kind, spec, Some(lik)).ok()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gp() -> RateMeasureSpec {
        RateMeasureSpec::gamma_process(1.0, 1.0, 0.0).unwrap()
    }

    fn brep() -> RepresentationSpec {
        RepresentationSpec::new(RepKind::Bondesson, &gp(), None).unwrap()
    }

    #[test]
    fn trivial_coverage_cases() {
        let p = estimate_crm_coverage(&gp(), &Likelihood::Poisson, &brep(), 1, 8, 8, 500, 3).unwrap();
        assert_eq!(p.p_hat, 0.0);
        let p = estimate_crm_coverage(&gp(), &Likelihood::Poisson, &brep(), 0, 2, 8, 500, 3).unwrap();
        assert_eq!(p.p_hat, 0.0);
        assert!(estimate_crm_coverage(&gp(), &Likelihood::Poisson, &brep(), 1, 9, 8, 500, 3).is_err());
        let p = estimate_ncrm_coverage(&gp(), &brep(), 1, 8, 8, 500, 3).unwrap();
        assert_eq!(p.p_hat, 0.0);
    }

    #[test]
    fn coverage_below_bound() {
        let p = estimate_crm_coverage(&gp(), &Likelihood::Poisson, &brep(), 1, 5, 40, 10_000, 5).unwrap();
        let b = 1.0 - (-(0.5f64).powi(5)).exp();
        assert!(p.p_hat <= b + 3.0 * p.std_err, "{p:?} vs {b}");
        assert!(p.p_hat > 0.0);
        let se = (p.p_hat * (1.0 - p.p_hat) / 10_000.0).sqrt();
        assert_eq!(p.std_err, se);
        let q = estimate_ncrm_coverage(&gp(), &brep(), 1, 10, 40, 10_000, 5).unwrap();
        assert!(q.p_hat <= 2f64.powi(-10) + 3.0 * q.std_err);
    }

    #[test]
    fn ncrm_coverage_shrinks_with_k() {
        let grid = CoverageGrid { ns: vec![1, 3], ks: vec![1, 3, 6], k_big: 40 };
        let est = ncrm_coverage_grid(&gp(), &brep(), &grid, &Replication::new(4000, 9)).unwrap();
        for row in &est {
            assert!(row[0].p_hat >= row[1].p_hat && row[1].p_hat >= row[2].p_hat);
        }
        // more observations can only reach further
        for i in 0..3 {
            assert!(est[1][i].p_hat >= est[0][i].p_hat);
        }
    }

    #[test]
    fn ks_accepts_truth_and_rejects_wrong_shape() {
        let plan = Replication::new(1000, 2);
        let ok = ks_total_mass_against(&gp(), &brep(), 200, &plan, 1.0, 1.0).unwrap();
        assert!(ok.p_value > 0.01, "{ok:?}");
        let bad = ks_total_mass_against(&gp(), &brep(), 200, &plan, 0.5, 1.0).unwrap();
        assert!(bad.p_value < 1e-6, "{bad:?}");
        assert!(ks_total_mass(&gp(), &brep(), 10, 50, 1).is_err());
    }

    #[test]
    fn kolmogorov_tail_is_continuous() {
        let a = kolmogorov_q(1.18 - 1e-9);
        let b = kolmogorov_q(1.18 + 1e-9);
        assert!((a - b).abs() < 1e-8);
        assert!((kolmogorov_q(1.3581) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn chi_square_pools_and_detects() {
        let probs = [0.5, 0.3, 0.2];
        let good = chi_square_test(&[500, 300, 200], &probs).unwrap();
        assert_eq!(good.statistic, 0.0);
        assert_eq!(good.p_value, 1.0);
        let bad = chi_square_test(&[700, 200, 100], &probs).unwrap();
        assert!(bad.p_value < 1e-6);
        let g = gumbel_chi_square(&random_categorical(8, 4), 20_000, 4).unwrap();
        assert!(g.p_value > 1e-4);
    }

    #[test]
    fn slope_of_exact_power() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.7)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() - 0.7).abs() < 1e-12);
        assert!(log_log_slope(&[2.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mean_checks() {
        let plan = Replication::new(2000, 8);
        let c = cost_check(&gp(), &RepresentationSpec::InverseLevy, 50, &plan).unwrap();
        assert_eq!((c.mean, c.target, c.z_score()), (100.0, 100.0, 0.0));
        let m = campbell_check(&gp(), &brep(), 200, &plan).unwrap();
        assert!(m.passes(3.0), "{m:?}");
    }

    #[test]
    fn miscalibration_is_caught() {
        let mut cfg = SuiteConfig::new(gp(), Likelihood::Poisson, RepresentationSpec::InverseLevy);
        cfg.suites = vec![Suite::Coverage];
        cfg.ks = vec![1, 2];
        cfg.ns = vec![1];
        cfg.replicates = 4000;
        let rows = run_suite(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.pass));
        cfg.bound_scale = 0.25;
        assert!(run_suite(&cfg).unwrap().iter().any(|r| !r.pass));
    }
}
