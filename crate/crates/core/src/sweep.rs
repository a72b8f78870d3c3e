//! Error bound against expected simulation cost, over a grid of truncation
//! levels, for several representations of one process.

use crate::bounds::{bound, BoundQuery, Form, Method};
use crate::error::{CrmError, Result};
use crate::exec::Exec;
use crate::measures::{Likelihood, RateMeasureSpec};
use crate::reps::{expected_cost, RepKind, RepresentationSpec};
use crate::validate::log_log_slope;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub spec: RateMeasureSpec,
    pub lik: Likelihood,
    pub reps: Vec<RepresentationSpec>,
    pub n: u32,
    pub ks: Vec<usize>,
    pub method: Method,
    pub form: Form,
    pub exec: Exec,
}

impl SweepConfig {
    /// Every representation available for `spec`, with the family's
    /// likelihood.
    pub fn all_reps(spec: RateMeasureSpec, n: u32, ks: Vec<usize>) -> Self {
        let lik = Likelihood::default_for(spec.family());
        let reps = RepKind::ALL.iter().filter_map(|&kind| RepresentationSpec::new(kind, &spec, Some(&lik)).ok()).collect();
        SweepConfig { spec, lik, reps, n, ks, method: Method::Auto, form: Form::Simplified, exec: Exec::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub rep: RepKind,
    pub k: usize,
    pub expected_cost: f64,
    pub error_bound: f64,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "rep,K,expected_cost,error_bound";

    pub fn to_csv(&self) -> String {
        format!("{},{},{:.16e},{:.16e}", self.rep, self.k, self.expected_cost, self.error_bound)
    }
}

/// About `points` distinct integers spaced evenly in `ln K` over `[lo, hi]`,
/// including both ends.
pub fn log_grid(lo: usize, hi: usize, points: usize) -> Vec<usize> {
    if hi <= lo || points < 2 {
        return vec![lo];
    }
    let (a, b) = ((lo.max(1) as f64).ln(), (hi as f64).ln());
    let mut ks: Vec<usize> = (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp().round() as usize).collect();
    ks[0] = lo;
    ks[points - 1] = hi;
    ks.dedup();
    ks
}

/// Bound and cost of every representation at every truncation level, grouped
/// by representation in the order given and sorted by `K` within each.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let mut ks = cfg.ks.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut rows = Vec::with_capacity(cfg.reps.len() * ks.len());
    for rep in &cfg.reps {
        let q = BoundQuery::new(cfg.spec, cfg.lik, *rep, cfg.n, 0).with_method(cfg.method).with_form(cfg.form).with_exec(cfg.exec);
        for &k in &ks {
            rows.push(SweepRow {
                rep: rep.kind(),
                k,
                expected_cost: expected_cost(&cfg.spec, rep, k)?,
                error_bound: bound(&q.clone().with_k(k))?.error_bound,
            });
        }
    }
    Ok(rows)
}

/// The lowest bound `rep` reaches within a budget of `cost` expected draws.
pub fn bound_within_cost(rows: &[SweepRow], rep: RepKind, cost: f64) -> Option<f64> {
    rows.iter().filter(|r| r.rep == rep && r.expected_cost <= cost).map(|r| r.error_bound).reduce(f64::min)
}

/// Whether `best` reaches a bound no larger than each point of each of
/// `others` at the same or lower expected cost.
pub fn lowest_at_matched_cost(rows: &[SweepRow], best: RepKind, others: &[RepKind]) -> bool {
    rows.iter().filter(|r| others.contains(&r.rep)).all(|r| match bound_within_cost(rows, best, r.expected_cost) {
        Some(b) => b <= r.error_bound,
        None => false,
    })
}

/// Fitted exponent of the bound of `rep` against `K` over `[k_lo, k_hi]`.
pub fn rate_slope(rows: &[SweepRow], rep: RepKind, k_lo: usize, k_hi: usize) -> Result<f64> {
    let pts: Vec<&SweepRow> = rows.iter().filter(|r| r.rep == rep && (k_lo..=k_hi).contains(&r.k)).collect();
    if pts.iter().any(|r| !(r.error_bound > 0.0)) {
        return Err(CrmError::Numerical(format!("zero bound in the {rep} curve")));
    }
    let xs: Vec<f64> = pts.iter().map(|r| r.k as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|r| r.error_bound).collect();
    log_log_slope(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_and_order() {
        let g = log_grid(50, 2000, 30);
        assert_eq!((g[0], *g.last().unwrap()), (50, 2000));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(log_grid(5, 5, 10), vec![5]);
    }

    #[test]
    fn curves_fall_with_cost() {
        let spec = RateMeasureSpec::gamma_process(1.0, 2.0, 0.0).unwrap();
        let cfg = SweepConfig::all_reps(spec, 5, log_grid(1, 200, 12));
        let rows = sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 7 * cfg.ks.len());
        for kind in RepKind::ALL {
            let curve: Vec<&SweepRow> = rows.iter().filter(|r| r.rep == kind).collect();
            assert!(curve.windows(2).all(|w| w[0].expected_cost < w[1].expected_cost && w[1].error_bound <= w[0].error_bound));
        }
        // the power-law cost grows quadratically
        let pl: Vec<&SweepRow> = rows.iter().filter(|r| r.rep == RepKind::PowerLaw).collect();
        let last = pl.last().unwrap();
        assert_eq!(last.expected_cost, 3.5 * 200.0 + 0.5 * 200.0 * 200.0);
        assert!(SweepRow { rep: RepKind::InverseLevy, k: 3, expected_cost: 6.0, error_bound: 0.5 }
            .to_csv()
            .starts_with("il,3,6.0000000000000000e0,"));
    }
}
