use std::io::Write;

use anyhow::{anyhow, bail};

use crmtrunc::bounds::{bound as eval_bound, bound_with_hyperprior, invert_with, BoundQuery, BoundResult, EvalMethod, Form, Method};
use crmtrunc::exec::Exec;
use crmtrunc::ncrm::{ncrm_bound_closed_form, ncrm_bound_with_hyperprior, NcrmFamily};
use crmtrunc::reps::{expected_cost, simulate as draw, RepresentationSpec};
use crmtrunc::sweep::{sweep as sweep_rows, SweepConfig, SweepRow};
use crmtrunc::validate::{run_suite, ReportRow, SuiteConfig};
use crmtrunc::CrmError;

use crate::config::{Resolved, RunConfig};

/// 1 for numerical and I/O failures, 2 for inputs that cannot be served.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<CrmError>() {
            return match err {
                CrmError::Numerical(_) | CrmError::Convergence { .. } => 1,
                _ => 2,
            };
        }
        if cause.is::<std::io::Error>() {
            return 1;
        }
    }
    2
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn one<T: Copy>(xs: &[T], what: &str) -> anyhow::Result<T> {
    match xs {
        [x] => Ok(*x),
        _ => bail!("this command takes a single {what}, got {}", xs.len()),
    }
}

fn form(cfg: &RunConfig) -> Form {
    if cfg.run.exact {
        Form::Exact
    } else {
        Form::Simplified
    }
}

fn ncrm_family(res: &Resolved, rep: &RepresentationSpec) -> crmtrunc::Result<NcrmFamily> {
    NcrmFamily::from_rep(&res.spec, rep).ok_or_else(|| CrmError::Incompatible {
        rep: format!("normalized bound for {}", rep.kind()),
        target: res.spec.to_string(),
    })
}

/// The bound at one grid point, routed to the normalized bounds when asked.
fn evaluate(cfg: &RunConfig, res: &Resolved, rep: &RepresentationSpec, n: u32, k: usize) -> crmtrunc::Result<BoundResult> {
    if cfg.run.normalized {
        let family = ncrm_family(res, rep)?;
        let r = match &res.hyperprior {
            Some(hp) => ncrm_bound_with_hyperprior(&family, hp, n, k)?,
            None => ncrm_bound_closed_form(&family, n, k)?,
        };
        return Ok(BoundResult {
            k,
            n,
            b: r.b_k,
            error_bound: r.error_bound,
            method: EvalMethod::ClosedForm,
            mc_std_err: None,
            asymptote: r.asymptote,
        });
    }
    let q = BoundQuery::new(res.spec, res.lik, *rep, n, k).with_method(res.method).with_form(form(cfg));
    match &res.hyperprior {
        Some(hp) => bound_with_hyperprior(&q, hp),
        None => eval_bound(&q),
    }
}

pub fn simulate(cfg: &RunConfig, res: &Resolved, out: &mut dyn Write) -> anyhow::Result<bool> {
    let rep = *res.reps()?.first().ok_or_else(|| anyhow!("no representation"))?;
    if res.kinds.len() != 1 {
        bail!("simulate takes a single representation");
    }
    let k = one(&res.ks, "K")?;
    writeln!(out, "k,i,weight,label")?;
    if k == 0 {
        rep.check(&res.spec)?;
        return Ok(true);
    }
    let (measure, _) = draw(&res.spec, &rep, k, cfg.run.seed)?;
    for a in &measure.atoms {
        writeln!(out, "{},{},{:.16e},{:.16e}", a.k, a.i, a.weight, a.label)?;
    }
    Ok(true)
}

pub fn bound(cfg: &RunConfig, res: &Resolved, out: &mut dyn Write) -> anyhow::Result<bool> {
    writeln!(out, "rep,K,N,B,error_bound,method,mc_std_err,asymptote")?;
    for rep in res.reps()? {
        let mut warned = false;
        for &n in &res.ns {
            for &k in &res.ks {
                let r = evaluate(cfg, res, &rep, n, k)?;
                if res.method == Method::Auto && r.method != EvalMethod::ClosedForm && !warned {
                    let msg = format!("warning: no closed form for {} with {}, fell back to {}", rep.kind(), res.spec, r.method);
                    eprintln!("{msg}");
                    writeln!(out, "warning,,,,,{},,{}", r.method, csv_quote(&msg))?;
                    warned = true;
                }
                let se = r.mc_std_err.map_or(String::new(), |s| format!("{s:.16e}"));
                let asym = r.asymptote.as_deref().map_or(String::new(), csv_quote);
                writeln!(out, "{},{},{},{:.16e},{:.16e},{},{},{}", rep.kind(), r.k, r.n, r.b, r.error_bound, r.method, se, asym)?;
            }
        }
    }
    Ok(true)
}

pub fn sweep(cfg: &RunConfig, res: &Resolved, out: &mut dyn Write) -> anyhow::Result<bool> {
    let n = one(&res.ns, "N")?;
    let reps = res.reps()?;
    writeln!(out, "{}", SweepRow::CSV_HEADER)?;
    if cfg.run.normalized || res.hyperprior.is_some() {
        let mut ks = res.ks.clone();
        ks.sort_unstable();
        ks.dedup();
        for rep in &reps {
            if cfg.run.normalized && NcrmFamily::from_rep(&res.spec, rep).is_none() {
                continue;
            }
            for &k in &ks {
                let row = SweepRow {
                    rep: rep.kind(),
                    k,
                    expected_cost: expected_cost(&res.spec, rep, k)?,
                    error_bound: evaluate(cfg, res, rep, n, k)?.error_bound,
                };
                writeln!(out, "{}", row.to_csv())?;
            }
        }
        return Ok(true);
    }
    let sc = SweepConfig {
        spec: res.spec,
        lik: res.lik,
        reps,
        n,
        ks: res.ks.clone(),
        method: res.method,
        form: form(cfg),
        exec: Exec::default(),
    };
    for row in sweep_rows(&sc)? {
        writeln!(out, "{}", row.to_csv())?;
    }
    Ok(true)
}

pub fn invert(cfg: &RunConfig, res: &Resolved, out: &mut dyn Write) -> anyhow::Result<bool> {
    let eps = cfg.run.eps.ok_or_else(|| CrmError::InvalidParameter("invert needs --eps".into()))?;
    writeln!(out, "rep,N,eps,K")?;
    for rep in res.reps()? {
        for &n in &res.ns {
            let k = invert_with(|k| evaluate(cfg, res, &rep, n, k), eps)?;
            writeln!(out, "{},{},{:.16e},{}", rep.kind(), n, eps, k)?;
        }
    }
    Ok(true)
}

pub fn validate(cfg: &RunConfig, res: &Resolved, out: &mut dyn Write) -> anyhow::Result<bool> {
    writeln!(out, "{}", ReportRow::CSV_HEADER)?;
    let mut all = true;
    for rep in res.reps()? {
        let mut sc = SuiteConfig::new(res.spec, res.lik, rep);
        sc.suites = res.suites.clone();
        sc.ns = res.ns.clone();
        sc.ks = res.ks.clone();
        sc.replicates = cfg.run.replicates;
        sc.seed = cfg.run.seed;
        sc.bound_scale = cfg.run.bound_scale;
        for row in run_suite(&sc)? {
            all &= row.pass;
            writeln!(out, "{}", row.to_csv())?;
        }
    }
    Ok(all)
}
