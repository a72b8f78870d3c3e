//! Run configuration: a TOML file (`[process]`, `[representation]`, `[run]`)
//! overlaid with command-line flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crmtrunc::bounds::{Hyperprior, Method};
use crmtrunc::measures::{Likelihood, RateMeasureSpec};
use crmtrunc::reps::{RepKind, RepresentationSpec};
use crmtrunc::validate::Suite;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessConfig {
    pub family: String,
    pub gamma: f64,
    /// `lambda` for gamma and Lomax processes, `alpha` for beta and beta prime
    #[serde(alias = "lambda", alias = "alpha")]
    pub scale: f64,
    pub d: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub likelihood: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepresentationConfig {
    /// Comma-separated kinds, or `all`.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    /// Comma-separated observation counts.
    pub n: String,
    /// `K`, `a..b` or a comma-separated list.
    pub k: String,
    pub method: String,
    pub seed: u64,
    pub replicates: usize,
    pub normalized: bool,
    pub exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyperprior: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suites: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "is_one")]
    pub bound_scale: f64,
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub process: ProcessConfig,
    pub representation: RepresentationConfig,
    pub run: RunSettings,
}

impl Default for ProcessConfig {
    fn default() -> Self {
        ProcessConfig { family: "gamma".into(), gamma: 1.0, scale: 1.0, d: 0.0, likelihood: None }
    }
}

impl Default for RepresentationConfig {
    fn default() -> Self {
        RepresentationConfig { kind: "il".into(), xi: None }
    }
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            n: "1".into(),
            k: "10".into(),
            method: "auto".into(),
            seed: 1,
            replicates: 10_000,
            normalized: false,
            exact: false,
            hyperprior: None,
            eps: None,
            suites: None,
            out: None,
            bound_scale: 1.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn dump(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Parses every field into library types.
    pub fn resolve(&self) -> anyhow::Result<Resolved> {
        let p = &self.process;
        let spec = match p.family.as_str() {
            "gamma" => RateMeasureSpec::gamma_process(p.gamma, p.scale, p.d)?,
            "beta" => RateMeasureSpec::beta_process(p.gamma, p.scale, p.d)?,
            "betaprime" => RateMeasureSpec::beta_prime_process(p.gamma, p.scale, p.d)?,
            "lomax" => {
                if p.d != 0.0 {
                    bail!("the Lomax process has no discount, got d = {}", p.d);
                }
                RateMeasureSpec::lomax_process(p.gamma, p.scale)?
            }
            other => bail!("unknown process {other:?} (expected gamma, beta, betaprime or lomax)"),
        };
        let lik = match &p.likelihood {
            None => Likelihood::default_for(spec.family()),
            Some(s) => parse_likelihood(s)?,
        };
        let kinds = parse_kinds(&self.representation.kind)?;
        let r = &self.run;
        let ns = parse_list(&r.n, "N")?.into_iter().map(|n| u32::try_from(n).context("N too large")).collect::<anyhow::Result<_>>()?;
        let ks = parse_ks(&r.k)?;
        let method = match Method::from_str(&r.method)? {
            Method::MonteCarlo { samples, .. } => Method::MonteCarlo { samples, seed: r.seed },
            m => m,
        };
        let hyperprior = r.hyperprior.as_deref().map(Hyperprior::from_str).transpose()?;
        let suites = match &r.suites {
            None => Suite::ALL.to_vec(),
            Some(s) => s.split(',').map(|x| Suite::from_str(x.trim())).collect::<Result<_, _>>()?,
        };
        if !(r.bound_scale > 0.0) {
            bail!("bound scale must be positive");
        }
        Ok(Resolved { spec, lik, kinds, xi: self.representation.xi, ns, ks, method, hyperprior, suites })
    }
}

/// A [`RunConfig`] parsed into library types.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub spec: RateMeasureSpec,
    pub lik: Likelihood,
    /// Empty means every representation available for the process.
    pub kinds: Vec<RepKind>,
    pub xi: Option<f64>,
    pub ns: Vec<u32>,
    pub ks: Vec<usize>,
    pub method: Method,
    pub hyperprior: Option<Hyperprior>,
    pub suites: Vec<Suite>,
}

impl Resolved {
    pub fn rep(&self, kind: RepKind) -> crmtrunc::Result<RepresentationSpec> {
        let rep = RepresentationSpec::new(kind, &self.spec, Some(&self.lik))?;
        match self.xi {
            Some(xi) if kind == RepKind::DecoupledBondesson => rep.with_xi(xi),
            _ => Ok(rep),
        }
    }

    /// The requested representations, or all compatible ones.
    pub fn reps(&self) -> crmtrunc::Result<Vec<RepresentationSpec>> {
        if self.kinds.is_empty() {
            return Ok(RepKind::ALL.iter().filter_map(|&k| self.rep(k).ok()).collect());
        }
        self.kinds.iter().map(|&k| self.rep(k)).collect()
    }
}

fn parse_likelihood(s: &str) -> anyhow::Result<Likelihood> {
    Ok(match s.trim() {
        "poisson" => Likelihood::Poisson,
        "bernoulli" => Likelihood::Bernoulli,
        "oddsbernoulli" => Likelihood::OddsBernoulli,
        other => match other.strip_prefix("negbinom:") {
            Some(v) => Likelihood::NegativeBinomial { s: v.parse().with_context(|| format!("bad negbinom size {v:?}"))? },
            None => bail!("unknown likelihood {other:?}"),
        },
    })
}

fn parse_kinds(s: &str) -> anyhow::Result<Vec<RepKind>> {
    if s.trim() == "all" {
        return Ok(vec![]);
    }
    s.split(',').map(|k| Ok(RepKind::from_str(k.trim())?)).collect()
}

fn parse_list(s: &str, what: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',').map(|x| x.trim().parse::<usize>().with_context(|| format!("bad {what} value {x:?}"))).collect()
}

/// `K`, `a..b` (inclusive) or `a,b,c`.
pub fn parse_ks(s: &str) -> anyhow::Result<Vec<usize>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().with_context(|| format!("bad K range {s:?}"))?;
        let b: usize = b.trim().parse().with_context(|| format!("bad K range {s:?}"))?;
        if b < a {
            bail!("empty K range {s:?}");
        }
        return Ok((a..=b).collect());
    }
    parse_list(s, "K")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_ks("3..6").unwrap(), vec![3, 4, 5, 6]);
        assert_eq!(parse_ks("1, 5,9").unwrap(), vec![1, 5, 9]);
        assert!(parse_ks("5..2").is_err());
    }

    #[test]
    fn dump_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.process.likelihood = Some("poisson".into());
        cfg.run.hyperprior = Some("gamma:2,3".into());
        cfg.run.bound_scale = 0.5;
        assert_eq!(RunConfig::parse(&cfg.dump()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = RunConfig::default().dump().replace("seed = 1", "seed = 1\ncolour = 3");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn partial_files_use_defaults() {
        let cfg = RunConfig::parse("[process]\nfamily = \"beta\"\nalpha = 2.5\n\n[run]\nk = \"1..3\"\n").unwrap();
        assert_eq!((cfg.process.scale, cfg.run.k.as_str(), cfg.run.seed), (2.5, "1..3", 1));
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn aliases_for_scale() {
        let text = RunConfig::default().dump().replace("scale = 1.0", "alpha = 2.5").replace("\"gamma\"", "\"beta\"");
        assert_eq!(RunConfig::parse(&text).unwrap().process.scale, 2.5);
    }
}
