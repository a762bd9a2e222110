//! Run configuration and the drivers behind the command-line tool: single
//! runs, loss sweeps, seed ensembles and continuum tables, plus their CSV
//! and JSON artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuum::{
    pair_residual, steady_state_pair, steady_state_symmetric, symmetric_residual, RatePair,
};
use crate::engine::World;
use crate::envgen::{er_env, flat_env, load_env};
use crate::error::{ConfigError, Error};
use crate::metrics::{risk_rates, BeliefHistogram, MetricsFrame, Recorder};
use crate::model::{Environment, SimParams};
use crate::tactics::TacticConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Flat,
    Er,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSpec {
    pub kind: EnvKind,
    /// Off-diagonal efficiency for `flat`.
    pub l: f64,
    /// Link probability for `er`.
    pub p: f64,
    pub seed: u64,
    pub file: Option<PathBuf>,
}

impl Default for EnvSpec {
    fn default() -> Self {
        EnvSpec {
            kind: EnvKind::Flat,
            l: 0.95,
            p: 0.284,
            seed: 0,
            file: None,
        }
    }
}

impl EnvSpec {
    pub fn build(&self, n: usize) -> Result<Environment, Error> {
        let env = match self.kind {
            EnvKind::Flat => flat_env(n, self.l)?,
            EnvKind::Er => er_env(n, self.p, self.seed)?,
            EnvKind::File => {
                let path = self
                    .file
                    .as_ref()
                    .ok_or_else(|| ConfigError::param("env_file", "required for env kind `file`"))?;
                load_env(path)?
            }
        };
        if env.n() != n {
            return Err(ConfigError::DimensionMismatch {
                expected: n,
                found: env.n(),
            }
            .into());
        }
        Ok(env)
    }
}

/// Resolved run configuration. Loss is given as `gamma_bar = gamma tau K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub tau: f64,
    pub k_period: u64,
    pub gamma_bar: f64,
    pub phi_min: f64,
    pub phi_threshold: f64,
    pub max_hops: usize,
    pub xi: f64,
    pub beta: f64,
    pub tactic: TacticConfig,
    pub seed: u64,
    pub ticks_burnin: u64,
    pub ticks_measure: u64,
    pub env: EnvSpec,
    /// Observer cadence in ticks during measurement.
    pub sample_every: u64,
    pub hist_bins: usize,
    /// Runs whose CCS fraction falls below this are flagged as not forming a swarm.
    pub ccs_cutoff: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 20,
            tau: 1.0,
            k_period: 200,
            gamma_bar: 0.05,
            phi_min: 0.1,
            phi_threshold: 0.75,
            max_hops: 3,
            xi: 1.0,
            beta: 1.0,
            tactic: TacticConfig::new("timer"),
            seed: 0,
            ticks_burnin: 10_000,
            ticks_measure: 20_000,
            env: EnvSpec::default(),
            sample_every: 10,
            hist_bins: 50,
            ccs_cutoff: 0.5,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            row: e.line(),
            col: e.column(),
            msg: e.to_string(),
        })
    }

    pub fn sim_params(&self) -> SimParams {
        let params = SimParams {
            n: self.n,
            tau: self.tau,
            k_period: self.k_period,
            gamma: 0.0,
            phi_min: self.phi_min,
            phi_threshold: self.phi_threshold,
            max_hops: self.max_hops,
            xi: self.xi,
            beta: self.beta,
            tactic: self.tactic.clone(),
            seed: self.seed,
            ticks_burnin: self.ticks_burnin,
            ticks_measure: self.ticks_measure,
        };
        params.with_gamma_bar(self.gamma_bar)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.gamma_bar >= 0.0 && self.gamma_bar.is_finite()) {
            return Err(ConfigError::param("gamma_bar", "must be non-negative"));
        }
        if self.sample_every == 0 {
            return Err(ConfigError::param("sample_every", "must be at least 1"));
        }
        if self.hist_bins < 2 {
            return Err(ConfigError::param("hist_bins", "need at least 2 bins"));
        }
        if !(0.0..=1.0).contains(&self.ccs_cutoff) {
            return Err(ConfigError::param("ccs_cutoff", "must lie in [0, 1]"));
        }
        self.sim_params().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkRow {
    pub i: usize,
    pub j: usize,
    pub l_ij: f64,
    pub phi_ij: f64,
    pub link_enabled: bool,
}

/// Time-averaged results of one run. Means are `None` when nothing was
/// sampled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub phi_hat: Option<f64>,
    pub phi_hat_t: Option<f64>,
    pub risk_norm: Option<f64>,
    pub ccs_fraction: Option<f64>,
    pub ccs_formed: bool,
    pub u_r_final: Option<f64>,
    pub seed: u64,
    pub config: RunConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub frames: Vec<MetricsFrame>,
    pub histogram: BeliefHistogram,
    pub links: Vec<LinkRow>,
    pub summary: Summary,
}

/// Burn-in without observers, then a measured segment sampled every
/// `sample_every` ticks.
pub fn run_with_env(cfg: &RunConfig, env: Environment) -> Result<RunOutcome, Error> {
    cfg.validate()?;
    let params = cfg.sim_params();
    let mut world = World::new(params, env)?;
    world.run(cfg.ticks_burnin, &mut []);
    world.reset_window();
    let mut recorder = Recorder::new(cfg.sample_every, cfg.hist_bins);
    world.run(cfg.ticks_measure, &mut [&mut recorder]);

    let p = world.params();
    let risk_norm = risk_rates(&world.window().sent, world.window_ticks(), p)
        .ok()
        .map(|r| r.normalized);
    let u_r_final = crate::metrics::u_r(world.beliefs(), world.env(), p.phi_threshold).ok();
    let ccs_fraction = recorder.ccs_fraction();

    let n = p.n;
    let links = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| LinkRow {
            i,
            j,
            l_ij: world.env().get(i, j),
            phi_ij: world.beliefs().get(i, j),
            link_enabled: world.log(i).is_link_enabled(j),
        })
        .collect();

    let summary = Summary {
        phi_hat: recorder.mean_of(|f| f.phi_hat),
        phi_hat_t: recorder.mean_of(|f| f.phi_hat_t),
        risk_norm,
        ccs_formed: ccs_fraction.is_some_and(|c| c >= cfg.ccs_cutoff),
        ccs_fraction,
        u_r_final,
        seed: cfg.seed,
        config: cfg.clone(),
    };
    Ok(RunOutcome {
        frames: recorder.frames,
        histogram: recorder.histogram,
        links,
        summary,
    })
}

pub fn run_config(cfg: &RunConfig) -> Result<RunOutcome, Error> {
    cfg.validate()?;
    let env = cfg.env.build(cfg.n)?;
    run_with_env(cfg, env)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, Error> {
    Ok(csv::Writer::from_path(path)?)
}

/// For files whose header must appear even with no rows.
fn csv_writer_with_header(path: &Path, header: &[&str]) -> Result<csv::Writer<fs::File>, Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

pub fn write_metrics_csv(frames: &[MetricsFrame], path: &Path) -> Result<(), Error> {
    let mut w = csv_writer_with_header(
        path,
        &["tick", "phi_hat", "phi_hat_t", "risk_norm", "ccs", "u_r"],
    )?;
    for f in frames {
        w.serialize(f)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct HistRow {
    bin_lo: f64,
    bin_hi: f64,
    count: u64,
}

pub fn write_hist_csv(hist: &BeliefHistogram, path: &Path) -> Result<(), Error> {
    let mut w = csv_writer(path)?;
    for (bin_lo, bin_hi, count) in hist.bins() {
        w.serialize(HistRow {
            bin_lo,
            bin_hi,
            count,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_links_csv(links: &[LinkRow], path: &Path) -> Result<(), Error> {
    let mut w = csv_writer_with_header(path, &["i", "j", "l_ij", "phi_ij", "link_enabled"])?;
    for row in links {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), Error> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

/// Writes `metrics.csv`, `hist.csv`, `links.csv` and `summary.json`.
pub fn write_run(outcome: &RunOutcome, dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    write_metrics_csv(&outcome.frames, &dir.join("metrics.csv"))?;
    write_hist_csv(&outcome.histogram, &dir.join("hist.csv"))?;
    write_links_csv(&outcome.links, &dir.join("links.csv"))?;
    write_json(&outcome.summary, &dir.join("summary.json"))?;
    Ok(())
}

/// One run per `gamma_bar`, all on the same environment.
pub fn run_sweep(cfg: &RunConfig, gamma_bars: &[f64]) -> Result<Vec<RunOutcome>, Error> {
    if gamma_bars.is_empty() {
        return Err(ConfigError::EmptyGrid("gamma_bar grid").into());
    }
    cfg.validate()?;
    let env = cfg.env.build(cfg.n)?;
    gamma_bars
        .par_iter()
        .map(|&gb| {
            let point = RunConfig {
                gamma_bar: gb,
                ..cfg.clone()
            };
            run_with_env(&point, env.clone())
        })
        .collect()
}

#[derive(Serialize)]
struct SweepRow {
    gamma_bar: f64,
    phi_hat: Option<f64>,
    phi_hat_t: Option<f64>,
    risk_norm: Option<f64>,
    ccs_fraction: Option<f64>,
    u_r_final: Option<f64>,
    ccs_formed: bool,
}

#[derive(Serialize)]
struct SweepHistRow {
    gamma_bar: f64,
    bin_lo: f64,
    bin_hi: f64,
    count: u64,
}

/// Writes `sweep.csv`, one `hist_NNN.csv` per grid point and the combined
/// long-format `sweep_hist.csv`.
pub fn write_sweep(outcomes: &[RunOutcome], dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    let mut w = csv_writer(&dir.join("sweep.csv"))?;
    let mut long = csv_writer(&dir.join("sweep_hist.csv"))?;
    for (idx, o) in outcomes.iter().enumerate() {
        let s = &o.summary;
        w.serialize(SweepRow {
            gamma_bar: s.config.gamma_bar,
            phi_hat: s.phi_hat,
            phi_hat_t: s.phi_hat_t,
            risk_norm: s.risk_norm,
            ccs_fraction: s.ccs_fraction,
            u_r_final: s.u_r_final,
            ccs_formed: s.ccs_formed,
        })?;
        write_hist_csv(&o.histogram, &dir.join(format!("hist_{idx:03}.csv")))?;
        for (bin_lo, bin_hi, count) in o.histogram.bins() {
            long.serialize(SweepHistRow {
                gamma_bar: s.config.gamma_bar,
                bin_lo,
                bin_hi,
                count,
            })?;
        }
    }
    w.flush()?;
    long.flush()?;
    Ok(())
}

pub fn run_ensemble(cfg: &RunConfig, seeds: &[u64]) -> Result<Vec<RunOutcome>, Error> {
    if seeds.is_empty() {
        return Err(ConfigError::EmptyGrid("seeds").into());
    }
    cfg.validate()?;
    let env = cfg.env.build(cfg.n)?;
    seeds
        .par_iter()
        .map(|&seed| {
            let member = RunConfig {
                seed,
                ..cfg.clone()
            };
            run_with_env(&member, env.clone())
        })
        .collect()
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spread {
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

impl Spread {
    /// Ignores NaN; `None` for an empty sample.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Spread> {
        let mut v: Vec<f64> = values.into_iter().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let q1 = quantile(&v, 0.25);
        let q3 = quantile(&v, 0.75);
        Some(Spread {
            count: v.len(),
            median: quantile(&v, 0.5),
            q1,
            q3,
            iqr: q3 - q1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub seeds: Vec<u64>,
    pub phi_hat: Option<Spread>,
    pub phi_hat_t: Option<Spread>,
    pub risk_norm: Option<Spread>,
    pub ccs_fraction: Option<Spread>,
    pub u_r_final: Option<Spread>,
}

impl Aggregate {
    pub fn of(outcomes: &[RunOutcome]) -> Aggregate {
        let pick = |f: fn(&Summary) -> Option<f64>| {
            Spread::of(outcomes.iter().filter_map(|o| f(&o.summary)))
        };
        Aggregate {
            seeds: outcomes.iter().map(|o| o.summary.seed).collect(),
            phi_hat: pick(|s| s.phi_hat),
            phi_hat_t: pick(|s| s.phi_hat_t),
            risk_norm: pick(|s| s.risk_norm),
            ccs_fraction: pick(|s| s.ccs_fraction),
            u_r_final: pick(|s| s.u_r_final),
        }
    }
}

#[derive(Serialize)]
struct EnsembleRow {
    seed: u64,
    phi_hat: Option<f64>,
    phi_hat_t: Option<f64>,
    risk_norm: Option<f64>,
    ccs_fraction: Option<f64>,
    u_r_final: Option<f64>,
}

/// Writes `ensemble.csv`, `summary_seed_<seed>.json` per member and
/// `aggregate.json`.
pub fn write_ensemble(outcomes: &[RunOutcome], dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    let mut w = csv_writer(&dir.join("ensemble.csv"))?;
    for o in outcomes {
        let s = &o.summary;
        w.serialize(EnsembleRow {
            seed: s.seed,
            phi_hat: s.phi_hat,
            phi_hat_t: s.phi_hat_t,
            risk_norm: s.risk_norm,
            ccs_fraction: s.ccs_fraction,
            u_r_final: s.u_r_final,
        })?;
        write_json(s, &dir.join(format!("summary_seed_{}.json", s.seed)))?;
    }
    w.flush()?;
    write_json(&Aggregate::of(outcomes), &dir.join("aggregate.json"))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ContinuumRow {
    Symmetric {
        r: f64,
        phi_min: f64,
        phi: f64,
        residual: f64,
    },
    Pair {
        r: f64,
        r_prime: f64,
        phi_min: f64,
        phi_ab: f64,
        phi_ba: f64,
        residual: f64,
    },
}

/// Steady-state grid. With `r_primes`, every `(r, r_prime, phi_min)`
/// combination is solved as an asymmetric pair.
pub fn continuum_table(
    r_grid: &[f64],
    phi_min_grid: &[f64],
    r_primes: Option<&[f64]>,
) -> Result<Vec<ContinuumRow>, ConfigError> {
    if r_grid.is_empty() {
        return Err(ConfigError::EmptyGrid("r grid"));
    }
    if phi_min_grid.is_empty() {
        return Err(ConfigError::EmptyGrid("phi_min grid"));
    }
    if let Some(&r) = r_grid.iter().find(|&&r| !(r >= 0.0 && r.is_finite())) {
        return Err(ConfigError::param("r", format!("{r} must be finite and >= 0")));
    }
    if let Some(&m) = phi_min_grid.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(ConfigError::param("phi_min", format!("{m} is outside [0, 1]")));
    }
    let mut rows = Vec::new();
    match r_primes {
        None => {
            for &r in r_grid {
                for &phi_min in phi_min_grid {
                    let phi = steady_state_symmetric(r, phi_min);
                    rows.push(ContinuumRow::Symmetric {
                        r,
                        phi_min,
                        phi,
                        residual: symmetric_residual(r, phi_min, phi),
                    });
                }
            }
        }
        Some(r_primes) => {
            if r_primes.is_empty() {
                return Err(ConfigError::EmptyGrid("r_prime grid"));
            }
            if let Some(&r) = r_primes.iter().find(|&&r| !(r >= 0.0 && r.is_finite())) {
                return Err(ConfigError::param("r_prime", format!("{r} must be finite and >= 0")));
            }
            for &r in r_grid {
                for &r_prime in r_primes {
                    for &phi_min in phi_min_grid {
                        let rp = RatePair { r, r_prime, phi_min };
                        let (phi_ab, phi_ba) = steady_state_pair(rp);
                        rows.push(ContinuumRow::Pair {
                            r,
                            r_prime,
                            phi_min,
                            phi_ab,
                            phi_ba,
                            residual: pair_residual(&rp, phi_ab),
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_continuum_csv<W: Write>(rows: &[ContinuumRow], out: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig {
            n: 6,
            k_period: 60,
            gamma_bar: 0.1,
            ticks_burnin: 500,
            ticks_measure: 1000,
            ..RunConfig::default()
        }
    }

    #[test]
    fn default_config_is_the_flat_case() {
        let c = RunConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!((c.n, c.k_period, c.phi_min, c.env.l), (20, 200, 0.1, 0.95));
        let p = c.sim_params();
        assert!((p.gamma - 0.05 / 200.0).abs() < 1e-18);
    }

    #[test]
    fn json_config_fills_defaults_and_rejects_unknown_keys() {
        let c = RunConfig::from_json(r#"{"n": 8, "k_period": 80, "tactic": {"kind": "filtered+"}}"#)
            .unwrap();
        assert_eq!(c.n, 8);
        assert_eq!(c.tactic.kind, "filtered+");
        assert_eq!(c.ticks_burnin, 10_000);
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn zero_measurement_gives_empty_series() {
        let cfg = RunConfig {
            ticks_measure: 0,
            ..small()
        };
        let out = run_config(&cfg).unwrap();
        assert!(out.frames.is_empty());
        assert_eq!(out.summary.phi_hat, None);
        assert_eq!(out.summary.risk_norm, None);
        assert!(!out.summary.ccs_formed);
    }

    #[test]
    fn sample_cadence() {
        let out = run_config(&small()).unwrap();
        assert_eq!(out.frames.len(), 100);
        assert_eq!(out.frames[0].tick, 510);
        assert_eq!(out.histogram.total(), 100 * 30);
        assert_eq!(out.links.len(), 30);
    }

    #[test]
    fn single_point_sweep_matches_run() {
        let cfg = small();
        let run = run_config(&cfg).unwrap();
        let sweep = run_sweep(&cfg, &[cfg.gamma_bar]).unwrap();
        assert_eq!(sweep[0].summary, run.summary);
        assert_eq!(sweep[0].frames, run.frames);
        let ens = run_ensemble(&cfg, &[cfg.seed]).unwrap();
        assert_eq!(ens[0].summary, run.summary);
    }

    #[test]
    fn spread_median_and_iqr() {
        let s = Spread::of([3.0, 1.0, 2.0]).unwrap();
        assert_eq!(s.median, 2.0);
        assert_eq!((s.q1, s.q3), (1.5, 2.5));
        let s = Spread::of([1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert!(Spread::of([]).is_none());
    }

    #[test]
    fn continuum_rows() {
        let rows = continuum_table(&[0.5, 0.0], &[0.0, 0.3], None).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(matches!(rows[0], ContinuumRow::Symmetric { phi, .. } if phi == 0.5));
        assert!(matches!(rows[3], ContinuumRow::Symmetric { phi, .. } if phi == 1.0));
        let rows = continuum_table(&[0.5], &[0.1], Some(&[2.0])).unwrap();
        match rows[0] {
            ContinuumRow::Pair { phi_ab, phi_ba, residual, .. } => {
                assert!((phi_ab - 0.4).abs() < 1e-12);
                assert!((phi_ba - 0.25).abs() < 1e-12);
                assert!(residual.abs() < 1e-10);
            }
            _ => panic!("expected a pair row"),
        }
        assert!(continuum_table(&[], &[0.1], None).is_err());
        assert!(continuum_table(&[-1.0], &[0.1], None).is_err());
    }
}
