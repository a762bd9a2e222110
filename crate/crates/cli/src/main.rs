//! `swarmcomm` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration or argument error, 2 I/O or
//! runtime failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use swarmcomm::experiment::{
    continuum_table, run_config, run_ensemble, run_sweep, write_continuum_csv, write_ensemble,
    write_run, write_sweep, EnvKind, RunConfig,
};
use swarmcomm::{ConfigError, Error};

#[derive(Parser)]
#[command(name = "swarmcomm", version)]
#[command(about = "Simulate swarm messaging over lossy links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run: metrics.csv, hist.csv, links.csv, summary.json
    Run {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// One run per loss ratio over a shared environment
    Sweep {
        #[command(flatten)]
        sim: SimArgs,
        /// Comma list or `start:stop:count`
        #[arg(long)]
        gamma_bars: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// One run per seed, with median and interquartile range per metric
    Ensemble {
        #[command(flatten)]
        sim: SimArgs,
        /// Comma list or inclusive range `a..b`
        #[arg(long)]
        seeds: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Steady-state belief table from the rate equations
    Continuum {
        /// Comma list or `start:stop:count`
        #[arg(long)]
        r_grid: String,
        #[arg(long, default_value = "0")]
        phi_min_grid: String,
        /// Reverse-direction ratios; switches to the asymmetric pair solution
        #[arg(long)]
        r_prime: Option<String>,
        /// CSV destination; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvArg {
    Flat,
    Er,
    File,
}

/// Overrides applied on top of `--config` (or the defaults).
#[derive(Args)]
struct SimArgs {
    /// JSON configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// sequence | random | timer | filtered | filtered+ | filtered++
    #[arg(long)]
    tactic: Option<String>,
    #[arg(long)]
    theta_t: Option<u64>,
    #[arg(long)]
    theta_f: Option<u64>,
    /// Normalized loss ratio gamma * tau * K
    #[arg(long)]
    gamma_bar: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k_period: Option<u64>,
    #[arg(long)]
    phi_min: Option<f64>,
    #[arg(long)]
    ticks_burnin: Option<u64>,
    #[arg(long)]
    ticks_measure: Option<u64>,
    #[arg(long)]
    sample_every: Option<u64>,
    #[arg(long)]
    hist_bins: Option<usize>,
    #[arg(long, value_enum)]
    env: Option<EnvArg>,
    /// Link efficiency for the flat environment
    #[arg(long)]
    env_l: Option<f64>,
    /// Link probability for the random environment
    #[arg(long)]
    env_p: Option<f64>,
    #[arg(long)]
    env_seed: Option<u64>,
    /// Square CSV matrix of link efficiencies
    #[arg(long)]
    env_file: Option<PathBuf>,
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_config() { 1 } else { 2 },
            msg: e.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e.to_string())
    }
}

impl Failure {
    fn config(msg: impl Into<String>) -> Self {
        Failure { code: 1, msg: msg.into() }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Failure {
            code: 2,
            msg: format!("{}: {e}", path.display()),
        }
    }
}

impl SimArgs {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
                RunConfig::from_json(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.tactic {
            cfg.tactic.kind = v.clone();
        }
        if let Some(v) = self.theta_t {
            cfg.tactic.theta_t = Some(v);
        }
        if let Some(v) = self.theta_f {
            cfg.tactic.theta_f = Some(v);
        }
        if let Some(v) = self.gamma_bar {
            cfg.gamma_bar = v;
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.k_period {
            cfg.k_period = v;
        }
        if let Some(v) = self.phi_min {
            cfg.phi_min = v;
        }
        if let Some(v) = self.ticks_burnin {
            cfg.ticks_burnin = v;
        }
        if let Some(v) = self.ticks_measure {
            cfg.ticks_measure = v;
        }
        if let Some(v) = self.sample_every {
            cfg.sample_every = v;
        }
        if let Some(v) = self.hist_bins {
            cfg.hist_bins = v;
        }
        if let Some(v) = self.env_l {
            cfg.env.l = v;
        }
        if let Some(v) = self.env_p {
            cfg.env.p = v;
        }
        if let Some(v) = self.env_seed {
            cfg.env.seed = v;
        }
        if let Some(v) = &self.env_file {
            cfg.env.file = Some(v.clone());
            cfg.env.kind = EnvKind::File;
        }
        if let Some(v) = self.env {
            cfg.env.kind = match v {
                EnvArg::Flat => EnvKind::Flat,
                EnvArg::Er => EnvKind::Er,
                EnvArg::File => EnvKind::File,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64, Failure> {
    s.trim()
        .parse()
        .map_err(|_| Failure::config(format!("{what}: `{s}` is not a number")))
}

/// `a,b,c` or `start:stop:count` (inclusive, evenly spaced).
fn parse_grid(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, count] => {
            let (start, stop) = (parse_f64(start, what)?, parse_f64(stop, what)?);
            let count: usize = count
                .trim()
                .parse()
                .map_err(|_| Failure::config(format!("{what}: bad point count `{count}`")))?;
            match count {
                0 => Vec::new(),
                1 => vec![start],
                _ => (0..count)
                    .map(|i| {
                        let (lo, hi) = ((count - 1 - i) as f64, i as f64);
                        (start * lo + stop * hi) / (count - 1) as f64
                    })
                    .collect(),
            }
        }
        [_] => text
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_f64(s, what))
            .collect::<Result<_, _>>()?,
        _ => return Err(Failure::config(format!("{what}: expected a list or start:stop:count"))),
    };
    if grid.is_empty() {
        return Err(Failure::config(format!("{what}: grid is empty")));
    }
    Ok(grid)
}

/// `1,2,3` or inclusive `a..b`.
fn parse_seeds(text: &str) -> Result<Vec<u64>, Failure> {
    let bad = |s: &str| Failure::config(format!("seeds: `{s}` is not a seed"));
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad(a))?;
        let b: u64 = b.trim().parse().map_err(|_| bad(b))?;
        (a..=b).collect()
    } else {
        text.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse().map_err(|_| bad(s)))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(Failure::config("seeds: no seeds given"));
    }
    Ok(seeds)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { sim, out } => {
            let cfg = sim.resolve()?;
            let outcome = run_config(&cfg)?;
            write_run(&outcome, &out)?;
            let line = serde_json::to_string(&outcome.summary).map_err(|e| Failure {
                code: 2,
                msg: e.to_string(),
            })?;
            println!("{line}");
        }
        Command::Sweep {
            sim,
            gamma_bars,
            out,
        } => {
            let cfg = sim.resolve()?;
            let grid = parse_grid(&gamma_bars, "gamma-bars")?;
            let outcomes = run_sweep(&cfg, &grid)?;
            write_sweep(&outcomes, &out)?;
            for o in &outcomes {
                let s = &o.summary;
                println!(
                    "gamma_bar={} phi_hat={} ccs_formed={}",
                    s.config.gamma_bar,
                    fmt_opt(s.phi_hat),
                    s.ccs_formed
                );
            }
        }
        Command::Ensemble { sim, seeds, out } => {
            let cfg = sim.resolve()?;
            let seeds = parse_seeds(&seeds)?;
            let outcomes = run_ensemble(&cfg, &seeds)?;
            write_ensemble(&outcomes, &out)?;
            println!("{} runs written to {}", outcomes.len(), out.display());
        }
        Command::Continuum {
            r_grid,
            phi_min_grid,
            r_prime,
            out,
        } => {
            let r = parse_grid(&r_grid, "r-grid")?;
            let m = parse_grid(&phi_min_grid, "phi-min-grid")?;
            let rp = r_prime.map(|s| parse_grid(&s, "r-prime")).transpose()?;
            let rows = continuum_table(&r, &m, rp.as_deref())?;
            match out {
                Some(path) => {
                    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
                    }
                    let file = fs::File::create(&path).map_err(|e| Failure::io(&path, e))?;
                    write_continuum_csv(&rows, io::BufWriter::new(file))?;
                }
                None => write_continuum_csv(&rows, io::stdout().lock())?,
            }
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = io::stdout().flush();
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
