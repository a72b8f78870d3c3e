//! `crmtrunc`: simulate truncated CRM representations, evaluate and invert
//! truncation error bounds, sweep error against cost, and run the
//! validation suites. All tabular output is CSV.

mod commands;
mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "crmtrunc", version, about = "Truncation error bounds for completely random measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Which {
    Simulate,
    Bound,
    Sweep,
    Invert,
    Validate,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one truncated measure and print its atoms
    Simulate(Flags),
    /// Evaluate truncation error bounds
    Bound(Flags),
    /// Bound and expected cost over a range of truncation levels
    Sweep(Flags),
    /// Smallest truncation level whose error bound is at most `--eps`
    Invert(Flags),
    /// Run Monte Carlo validation suites; exits 1 if any check fails
    Validate(Flags),
}

#[derive(Args, Debug, Default, Clone)]
struct Flags {
    /// TOML run configuration; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit
    #[arg(long)]
    dump_config: bool,
    /// gamma | beta | betaprime | lomax
    #[arg(long)]
    process: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, conflicts_with = "alpha")]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    /// poisson | bernoulli | negbinom:S | oddsbernoulli
    #[arg(long)]
    likelihood: Option<String>,
    /// il | bondesson | thinning | rejection | db | sb | pl, comma-separated, or all
    #[arg(long)]
    rep: Option<String>,
    /// Decoupled Bondesson rate
    #[arg(long)]
    xi: Option<f64>,
    /// Number of observations, or a comma-separated list
    #[arg(long = "N")]
    n: Option<String>,
    /// Truncation level: K, a..b or a comma-separated list
    #[arg(long = "K")]
    k: Option<String>,
    /// closed | quad | mc:SAMPLES | auto
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Bound the normalized measure instead of the CRM
    #[arg(long)]
    normalized: bool,
    /// Integrate 1 - pi^N rather than N (1 - pi)
    #[arg(long)]
    exact: bool,
    /// gamma:A,B | lomax:A
    #[arg(long)]
    hyperprior: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    /// Validation suites, comma-separated
    #[arg(long)]
    suites: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Multiplies every bound the validation suites compare against
    #[arg(long, hide = true)]
    bound_scale: Option<f64>,
}

impl Flags {
    fn apply(&self, mut cfg: RunConfig) -> RunConfig {
        let p = &mut cfg.process;
        set(&mut p.family, self.process.clone());
        set(&mut p.gamma, self.gamma);
        set(&mut p.scale, self.lambda.or(self.alpha));
        set(&mut p.d, self.d);
        if self.likelihood.is_some() {
            p.likelihood = self.likelihood.clone();
        }
        set(&mut cfg.representation.kind, self.rep.clone());
        if self.xi.is_some() {
            cfg.representation.xi = self.xi;
        }
        let r = &mut cfg.run;
        set(&mut r.n, self.n.clone());
        set(&mut r.k, self.k.clone());
        set(&mut r.method, self.method.clone());
        set(&mut r.seed, self.seed);
        set(&mut r.replicates, self.replicates);
        r.normalized |= self.normalized;
        r.exact |= self.exact;
        if self.hyperprior.is_some() {
            r.hyperprior = self.hyperprior.clone();
        }
        if self.eps.is_some() {
            r.eps = self.eps;
        }
        if self.suites.is_some() {
            r.suites = self.suites.clone();
        }
        if self.out.is_some() {
            r.out = self.out.clone();
        }
        set(&mut r.bound_scale, self.bound_scale);
        cfg
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (which, flags) = match cli.command {
        Command::Simulate(f) => (Which::Simulate, f),
        Command::Bound(f) => (Which::Bound, f),
        Command::Sweep(f) => (Which::Sweep, f),
        Command::Invert(f) => (Which::Invert, f),
        Command::Validate(f) => (Which::Validate, f),
    };
    match run(which, &flags) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}

fn run(which: Which, flags: &Flags) -> anyhow::Result<ExitCode> {
    let base = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = flags.apply(base);
    let resolved = cfg.resolve()?;
    let mut out: Box<dyn Write> = match &cfg.run.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    if flags.dump_config {
        out.write_all(cfg.dump().as_bytes())?;
        out.flush()?;
        return Ok(ExitCode::SUCCESS);
    }
    let ok = match which {
        Which::Simulate => commands::simulate(&cfg, &resolved, &mut out)?,
        Which::Bound => commands::bound(&cfg, &resolved, &mut out)?,
        Which::Sweep => commands::sweep(&cfg, &resolved, &mut out)?,
        Which::Invert => commands::invert(&cfg, &resolved, &mut out)?,
        Which::Validate => commands::validate(&cfg, &resolved, &mut out)?,
    };
    out.flush()?;
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
