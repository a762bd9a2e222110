//! Shared domain types: belief and link matrices, simulation parameters and
//! the per-agent communication ledger.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::tactics::TacticConfig;

pub type AgentId = usize;

/// Integer tick stamp. Initial ledger entries are drawn from `[-K, 0]`, so
/// this is signed.
pub type Tick = i64;

fn check_square(rows: &[Vec<f64>]) -> Result<usize, ConfigError> {
    let n = rows.len();
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(ConfigError::NonSquare {
                row: r,
                expected: n,
                found: row.len(),
            });
        }
        for (c, &v) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::OutOfRange {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
    }
    Ok(n)
}

/// Accuracies `phi[a][b]`: how well agent `a` can target agent `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefMatrix {
    n: usize,
    data: Vec<f64>,
}

impl BeliefMatrix {
    /// Unit diagonal, every off-diagonal entry set to `fill`.
    pub fn filled(n: usize, fill: f64) -> Self {
        let mut data = vec![fill; n * n];
        for a in 0..n {
            data[a * n + a] = 1.0;
        }
        BeliefMatrix { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ConfigError> {
        let n = check_square(rows)?;
        for (a, row) in rows.iter().enumerate() {
            if row[a] != 1.0 {
                return Err(ConfigError::Diagonal(a));
            }
        }
        Ok(BeliefMatrix {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: AgentId, b: AgentId) -> f64 {
        self.data[a * self.n + b]
    }

    /// Sets an off-diagonal entry. Diagonal writes are ignored.
    #[inline]
    pub fn set(&mut self, a: AgentId, b: AgentId, value: f64) {
        debug_assert!((0.0..=1.0).contains(&value), "accuracy {value} out of range");
        if a != b {
            self.data[a * self.n + b] = value;
        }
    }

    pub fn row(&self, a: AgentId) -> &[f64] {
        &self.data[a * self.n..(a + 1) * self.n]
    }

    /// Iterates `(a, b, phi)` over off-diagonal entries, row-major.
    pub fn off_diagonal(&self) -> impl Iterator<Item = (AgentId, AgentId, f64)> + '_ {
        let n = self.n;
        self.data
            .iter()
            .enumerate()
            .filter(move |(k, _)| k / n != k % n)
            .map(move |(k, &v)| (k / n, k % n, v))
    }

    /// Relaxes every off-diagonal entry toward `floor` by the factor `keep`:
    /// `phi <- floor + keep * (phi - floor)`.
    pub fn relax_toward(&mut self, floor: f64, keep: f64) {
        let n = self.n;
        for (a, row) in self.data.chunks_mut(n).enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                if a != b {
                    *v = floor + keep * (*v - floor);
                }
            }
        }
    }
}

/// Link efficiencies `link[a][b]`, sender `a` to receiver `b`. Never
/// visible to agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    n: usize,
    data: Vec<f64>,
}

impl Environment {
    pub fn filled(n: usize, l: f64) -> Self {
        let mut data = vec![l; n * n];
        for a in 0..n {
            data[a * n + a] = 1.0;
        }
        Environment { n, data }
    }

    /// Accepts any square matrix with entries in `[0, 1]`; the diagonal is
    /// overwritten with 1.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ConfigError> {
        let n = check_square(rows)?;
        let mut env = Environment {
            n,
            data: rows.iter().flatten().copied().collect(),
        };
        for a in 0..n {
            env.data[a * n + a] = 1.0;
        }
        Ok(env)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: AgentId, b: AgentId) -> f64 {
        self.data[a * self.n + b]
    }

    pub fn set(&mut self, a: AgentId, b: AgentId, value: f64) {
        assert!((0.0..=1.0).contains(&value));
        if a != b {
            self.data[a * self.n + b] = value;
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|a| (0..a).all(|b| self.get(a, b) == self.get(b, a)))
    }

    /// Number of ordered off-diagonal pairs with efficiency above `threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        (0..self.n)
            .flat_map(|a| (0..self.n).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && self.get(a, b) > threshold)
            .count()
    }
}

fn default_tau() -> f64 {
    1.0
}
fn default_phi_threshold() -> f64 {
    0.75
}
fn default_max_hops() -> usize {
    3
}
fn default_one() -> f64 {
    1.0
}

/// Everything that defines one simulation run apart from the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub n: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    pub k_period: u64,
    pub gamma: f64,
    pub phi_min: f64,
    #[serde(default = "default_phi_threshold")]
    pub phi_threshold: f64,
    #[serde(default = "default_max_hops")]
    pub max_hops: usize,
    #[serde(default = "default_one")]
    pub xi: f64,
    #[serde(default = "default_one")]
    pub beta: f64,
    pub tactic: TacticConfig,
    pub seed: u64,
    pub ticks_burnin: u64,
    pub ticks_measure: u64,
}

impl SimParams {
    /// Defaults matching the flat-environment experiments: tau 1, threshold
    /// 0.75, three hops, Timer tactic, 10k burn-in and 20k measured ticks.
    pub fn new(n: usize, k_period: u64) -> Self {
        SimParams {
            n,
            tau: 1.0,
            k_period,
            gamma: 0.0,
            phi_min: 0.1,
            phi_threshold: 0.75,
            max_hops: 3,
            xi: 1.0,
            beta: 1.0,
            tactic: TacticConfig::new("timer"),
            seed: 0,
            ticks_burnin: 10_000,
            ticks_measure: 20_000,
        }
    }

    /// Sets `gamma` from the normalized loss `gamma_bar = gamma * tau * K`.
    pub fn with_gamma_bar(mut self, gamma_bar: f64) -> Self {
        self.gamma = gamma_bar / (self.tau * self.k_period as f64);
        self
    }

    pub fn gamma_bar(&self) -> f64 {
        self.gamma * self.tau * self.k_period as f64
    }

    /// Fraction of the excess above the floor kept across one tick.
    pub fn decay_factor(&self) -> f64 {
        (-self.gamma * self.tau).exp()
    }

    /// One message per other agent every K ticks, per unit time.
    pub fn reference_rate(&self) -> f64 {
        (self.n as f64 - 1.0) / (self.k_period as f64 * self.tau)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 2 {
            return Err(ConfigError::param("n", "need at least 2 agents"));
        }
        if self.k_period <= self.n as u64 {
            return Err(ConfigError::param(
                "k_period",
                format!("K = {} must exceed N = {}", self.k_period, self.n),
            ));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(ConfigError::param("tau", "must be positive"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(ConfigError::param("gamma", "must be non-negative"));
        }
        if !(0.0 <= self.phi_min && self.phi_min < self.phi_threshold && self.phi_threshold <= 1.0)
        {
            return Err(ConfigError::param(
                "phi_min",
                "need 0 <= phi_min < phi_threshold <= 1",
            ));
        }
        if self.max_hops == 0 {
            return Err(ConfigError::param("max_hops", "must be at least 1"));
        }
        if !(self.beta >= 1.0) {
            return Err(ConfigError::param("beta", "must be at least 1"));
        }
        if !(self.xi >= 0.0) {
            return Err(ConfigError::param("xi", "must be non-negative"));
        }
        self.tactic.validate(self.k_period)
    }
}

/// One agent's timing ledger. This is all a tactic may consult.
#[derive(Debug, Clone, PartialEq)]
pub struct CommLog {
    owner: AgentId,
    last_sent_to: Vec<Tick>,
    last_recv_from: Vec<Tick>,
    latest_echo: Vec<Tick>,
    link_enabled: Vec<bool>,
    seq_pointer: usize,
}

impl CommLog {
    /// Ledger with every stamp set to `stamp` and all links enabled.
    pub fn uniform(owner: AgentId, n: usize, stamp: Tick) -> Self {
        CommLog {
            owner,
            last_sent_to: vec![stamp; n],
            last_recv_from: vec![stamp; n],
            latest_echo: vec![stamp; n],
            link_enabled: vec![true; n],
            seq_pointer: 0,
        }
    }

    pub(crate) fn from_stamps(
        owner: AgentId,
        last_sent_to: Vec<Tick>,
        last_recv_from: Vec<Tick>,
        latest_echo: Vec<Tick>,
    ) -> Self {
        let n = last_sent_to.len();
        CommLog {
            owner,
            last_sent_to,
            last_recv_from,
            latest_echo,
            link_enabled: vec![true; n],
            seq_pointer: 0,
        }
    }

    pub fn owner(&self) -> AgentId {
        self.owner
    }

    pub fn n(&self) -> usize {
        self.last_sent_to.len()
    }

    pub fn last_sent_to(&self, j: AgentId) -> Tick {
        self.last_sent_to[j]
    }

    pub fn last_recv_from(&self, j: AgentId) -> Tick {
        self.last_recv_from[j]
    }

    /// `j`'s most recent report of when it last heard from the owner.
    pub fn latest_echo(&self, j: AgentId) -> Tick {
        self.latest_echo[j]
    }

    pub fn is_link_enabled(&self, j: AgentId) -> bool {
        self.link_enabled[j]
    }

    /// Permanently disables the link to `j`. There is no way back.
    pub fn disable_link(&mut self, j: AgentId) {
        self.link_enabled[j] = false;
    }

    pub fn enabled_links(&self) -> impl Iterator<Item = AgentId> + '_ {
        (0..self.n()).filter(move |&j| j != self.owner && self.link_enabled[j])
    }

    pub fn seq_pointer(&self) -> usize {
        self.seq_pointer
    }

    pub fn advance_seq_pointer(&mut self) -> usize {
        let cur = self.seq_pointer;
        self.seq_pointer = self.seq_pointer.wrapping_add(1);
        cur
    }

    pub fn record_send(&mut self, target: AgentId, tick: Tick) {
        debug_assert!(tick >= self.last_sent_to[target]);
        self.last_sent_to[target] = tick;
    }

    pub fn record_receive(&mut self, sender: AgentId, tick: Tick, echo: Tick) {
        debug_assert!(tick >= self.last_recv_from[sender]);
        self.last_recv_from[sender] = tick;
        self.latest_echo[sender] = self.latest_echo[sender].max(echo);
    }
}

/// A single transmission attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Message {
    pub sender: AgentId,
    pub target: AgentId,
    pub sent_tick: Tick,
    /// Sender's `last_recv_from[target]` at send time.
    pub echo: Tick,
}
