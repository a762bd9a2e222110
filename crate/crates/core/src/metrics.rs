//! Swarm performance, connectedness and risk measures.

use serde::Serialize;

use crate::engine::{Observer, World};
use crate::error::MetricsError;
use crate::model::{BeliefMatrix, Environment, SimParams, Tick};

/// Mean of `phi^beta` over a full belief row, self term included.
pub fn perf_agent(phi_row: &[f64], beta: f64) -> f64 {
    let sum: f64 = if beta == 1.0 {
        phi_row.iter().sum()
    } else {
        phi_row.iter().map(|p| p.powf(beta)).sum()
    };
    sum / phi_row.len() as f64
}

/// Sum of accuracies strictly above `phi_t`, divided by the larger of the
/// count of such entries and `ln n`.
pub fn perf_agent_thresholded(phi_row: &[f64], phi_t: f64, n: usize) -> f64 {
    let (sum, count) = phi_row
        .iter()
        .filter(|&&p| p > phi_t)
        .fold((0.0, 0usize), |(s, c), &p| (s + p, c + 1));
    sum / (count as f64).max((n as f64).ln())
}

pub fn perf_swarm(beliefs: &BeliefMatrix, beta: f64, phi_t: f64, thresholded: bool) -> f64 {
    let n = beliefs.n();
    let total: f64 = (0..n)
        .map(|a| {
            let row = beliefs.row(a);
            if thresholded {
                perf_agent_thresholded(row, phi_t, n)
            } else {
                perf_agent(row, beta)
            }
        })
        .sum();
    total / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskRates {
    /// `xi * sent / (window * tau)` per agent.
    pub per_agent: Vec<f64>,
    pub swarm: f64,
    /// Mean send rate over the reference rate `(N - 1) / (K tau)`.
    pub normalized: f64,
}

/// Risk accrues per transmitted message, delivered or not.
pub fn risk_rates(
    sent: &[u64],
    window_ticks: u64,
    params: &SimParams,
) -> Result<RiskRates, MetricsError> {
    if window_ticks == 0 {
        return Err(MetricsError::EmptyWindow);
    }
    let span = window_ticks as f64 * params.tau;
    let per_agent: Vec<f64> = sent.iter().map(|&s| params.xi * s as f64 / span).collect();
    let swarm = per_agent.iter().sum();
    let mean_rate = sent.iter().sum::<u64>() as f64 / span / sent.len() as f64;
    Ok(RiskRates {
        per_agent,
        swarm,
        normalized: mean_rate / params.reference_rate(),
    })
}

/// `1 - exp(-rate * interval)`.
pub fn detection_probability(risk_rate: f64, interval: f64) -> f64 {
    -(-risk_rate * interval).exp_m1()
}

/// Max-product path composition on a flat `n x n` buffer. Heads at or below
/// `prune` are not extended; since every weight is at most 1 this cannot
/// change whether any entry exceeds `prune`.
fn best_paths_flat(beliefs: &BeliefMatrix, max_hops: usize, prune: f64) -> Vec<f64> {
    let n = beliefs.n();
    let one_hop: Vec<f64> = (0..n).flat_map(|a| beliefs.row(a).iter().copied()).collect();
    let mut best = one_hop.clone();
    for _ in 1..max_hops {
        let mut next = best.clone();
        for a in 0..n {
            let out = &mut next[a * n..(a + 1) * n];
            for k in 0..n {
                let head = best[a * n + k];
                if head <= prune || k == a {
                    continue;
                }
                for (o, &w) in out.iter_mut().zip(&one_hop[k * n..(k + 1) * n]) {
                    let v = head * w;
                    if v > *o {
                        *o = v;
                    }
                }
            }
        }
        best = next;
    }
    best
}

/// Best path probability over at most `max_hops` directed hops, each hop
/// `i -> j` weighted by `phi[i][j]`. The diagonal is 1, so shorter paths
/// carry over into longer hop budgets.
pub fn best_path_matrix(beliefs: &BeliefMatrix, max_hops: usize) -> Vec<Vec<f64>> {
    let n = beliefs.n();
    best_paths_flat(beliefs, max_hops, 0.0)
        .chunks(n)
        .map(<[f64]>::to_vec)
        .collect()
}

/// Completely connected swarm: every ordered pair has a path of at most
/// `max_hops` hops whose accuracy product exceeds `phi_t`.
pub fn ccs(beliefs: &BeliefMatrix, phi_t: f64, max_hops: usize) -> bool {
    let n = beliefs.n();
    best_paths_flat(beliefs, max_hops, phi_t)
        .iter()
        .enumerate()
        .all(|(k, &p)| k / n == k % n || p > phi_t)
}

/// Accurate beliefs over efficient links, both judged against `phi_t`.
pub fn u_r(beliefs: &BeliefMatrix, env: &Environment, phi_t: f64) -> Result<f64, MetricsError> {
    let efficient = env.count_above(phi_t);
    if efficient == 0 {
        return Err(MetricsError::DegenerateEnvironment);
    }
    let found = beliefs.off_diagonal().filter(|&(_, _, p)| p > phi_t).count();
    Ok(found as f64 / efficient as f64)
}

/// Off-diagonal belief counts on uniform bins over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefHistogram {
    counts: Vec<u64>,
}

impl BeliefHistogram {
    pub fn new(bins: usize) -> Self {
        assert!(bins >= 2, "need at least two bins");
        BeliefHistogram {
            counts: vec![0; bins],
        }
    }

    pub fn accumulate(&mut self, beliefs: &BeliefMatrix) {
        let bins = self.counts.len();
        for (_, _, p) in beliefs.off_diagonal() {
            let idx = ((p * bins as f64) as usize).min(bins - 1);
            self.counts[idx] += 1;
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(lo, hi, count)` per bin.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        let w = self.counts.len() as f64;
        self.counts
            .iter()
            .enumerate()
            .map(move |(i, &c)| (i as f64 / w, (i + 1) as f64 / w, c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsFrame {
    pub tick: Tick,
    pub phi_hat: f64,
    pub phi_hat_t: f64,
    pub risk_norm: f64,
    pub ccs: bool,
    /// `None` when the environment has no efficient links.
    pub u_r: Option<f64>,
}

impl MetricsFrame {
    pub fn capture(world: &World) -> Self {
        let p = world.params();
        let b = world.beliefs();
        let risk_norm = risk_rates(&world.window().sent, world.window_ticks(), p)
            .map(|r| r.normalized)
            .unwrap_or(0.0);
        MetricsFrame {
            tick: world.tick_count(),
            phi_hat: perf_swarm(b, p.beta, p.phi_threshold, false),
            phi_hat_t: perf_swarm(b, p.beta, p.phi_threshold, true),
            risk_norm,
            ccs: ccs(b, p.phi_threshold, p.max_hops),
            u_r: u_r(b, world.env(), p.phi_threshold).ok(),
        }
    }
}

/// Observer sampling a frame and the belief histogram every `every` ticks.
#[derive(Debug, Clone)]
pub struct Recorder {
    every: u64,
    pub frames: Vec<MetricsFrame>,
    pub histogram: BeliefHistogram,
}

impl Recorder {
    pub fn new(every: u64, bins: usize) -> Self {
        Recorder {
            every: every.max(1),
            frames: Vec::new(),
            histogram: BeliefHistogram::new(bins),
        }
    }

    pub fn ccs_fraction(&self) -> Option<f64> {
        if self.frames.is_empty() {
            return None;
        }
        Some(self.frames.iter().filter(|f| f.ccs).count() as f64 / self.frames.len() as f64)
    }

    pub fn mean_of(&self, f: impl Fn(&MetricsFrame) -> f64) -> Option<f64> {
        if self.frames.is_empty() {
            return None;
        }
        Some(self.frames.iter().map(f).sum::<f64>() / self.frames.len() as f64)
    }
}

impl Observer for Recorder {
    fn observe(&mut self, world: &World) {
        if world.window_ticks().is_multiple_of(self.every) {
            self.frames.push(MetricsFrame::capture(world));
            self.histogram.accumulate(world.beliefs());
        }
    }
}
