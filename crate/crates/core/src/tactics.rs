//! Target-selection tactics.
//!
//! A tactic decides, once per tick, whether its agent transmits and to whom.
//! It sees only the agent's own [`CommLog`], the tick and a random stream,
//! never beliefs or link efficiencies. Tactics are looked up by name in a
//! [`TacticRegistry`]; the built-in set is
//! `sequence | random | timer | filtered | filtered+ | filtered++`.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::model::{AgentId, CommLog, Tick};
use crate::rng::StreamRng;

/// User-facing tactic selection. Unset thresholds resolve against K.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TacticConfig {
    pub kind: String,
    /// Timer threshold in ticks; defaults to K.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_t: Option<u64>,
    /// Echo-age threshold in ticks; defaults to 4K.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_f: Option<u64>,
}

impl TacticConfig {
    pub fn new(kind: impl Into<String>) -> Self {
        TacticConfig {
            kind: kind.into(),
            theta_t: None,
            theta_f: None,
        }
    }

    pub fn with_theta_t(mut self, ticks: u64) -> Self {
        self.theta_t = Some(ticks);
        self
    }

    pub fn with_theta_f(mut self, ticks: u64) -> Self {
        self.theta_f = Some(ticks);
        self
    }

    pub fn resolve(&self, n: usize, k_period: u64) -> TacticSettings {
        TacticSettings {
            n,
            k_period,
            theta_t: self.theta_t.unwrap_or(k_period),
            theta_f: self.theta_f.unwrap_or(4 * k_period),
        }
    }

    pub fn validate(&self, k_period: u64) -> Result<(), ConfigError> {
        let s = self.resolve(0, k_period);
        if s.theta_t < 1 {
            return Err(ConfigError::param("theta_t", "must be at least 1 tick"));
        }
        if s.theta_f < s.theta_t {
            return Err(ConfigError::param("theta_f", "must be at least theta_t"));
        }
        Ok(())
    }
}

/// Resolved numbers handed to a tactic factory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TacticSettings {
    pub n: usize,
    pub k_period: u64,
    pub theta_t: u64,
    pub theta_f: u64,
}

impl TacticSettings {
    /// Per-tick send probability matching one message per other agent per K ticks.
    pub fn reference_probability(&self) -> f64 {
        ((self.n - 1) as f64 / self.k_period as f64).min(1.0)
    }
}

pub trait Tactic: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Extra-message probability on top of the regular slot.
    fn q_extra(&self) -> f64 {
        0.0
    }

    /// Picks at most one target for `agent` at `tick`. May update the
    /// agent's own ledger (link disabling, sequence cursor).
    fn select_target(
        &self,
        agent: AgentId,
        log: &mut CommLog,
        tick: Tick,
        rng: &mut StreamRng,
    ) -> Option<AgentId>;
}

pub type TacticFactory = Box<dyn Fn(&TacticSettings) -> Box<dyn Tactic> + Send + Sync>;

/// Name-keyed tactic constructors.
pub struct TacticRegistry {
    factories: BTreeMap<String, TacticFactory>,
}

impl fmt::Debug for TacticRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl Default for TacticRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TacticRegistry {
    pub fn empty() -> Self {
        TacticRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register("sequence", |s| Box::new(Sequence::new(s)));
        reg.register("random", |s| Box::new(RandomTarget::new(s)));
        reg.register("timer", |s| Box::new(Timer::new(s)));
        reg.register("filtered", |s| Box::new(Filtered::new(s, "filtered", 0.0)));
        reg.register("filtered+", |s| {
            Box::new(Filtered::new(s, "filtered+", 0.25))
        });
        reg.register("filtered++", |s| {
            Box::new(Filtered::new(s, "filtered++", 0.5))
        });
        reg
    }

    pub fn register<F>(&mut self, name: impl Into<String>, factory: F)
    where
        F: Fn(&TacticSettings) -> Box<dyn Tactic> + Send + Sync + 'static,
    {
        self.factories.insert(name.into(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn build(
        &self,
        cfg: &TacticConfig,
        n: usize,
        k_period: u64,
    ) -> Result<Box<dyn Tactic>, ConfigError> {
        cfg.validate(k_period)?;
        let factory = self.factories.get(&cfg.kind).ok_or_else(|| {
            ConfigError::UnknownTactic(
                cfg.kind.clone(),
                self.names().collect::<Vec<_>>().join(", "),
            )
        })?;
        Ok(factory(&cfg.resolve(n, k_period)))
    }
}

fn random_other(agent: AgentId, n: usize, rng: &mut StreamRng) -> AgentId {
    let c = rng.random_range(0..n - 1);
    if c >= agent {
        c + 1
    } else {
        c
    }
}

/// True when `candidate` has reported contact from the log owner no longer
/// than `theta_f` ticks ago.
pub fn filter_check(candidate: AgentId, log: &CommLog, tick: Tick, theta_f: u64) -> bool {
    debug_assert_ne!(candidate, log.owner());
    tick - log.latest_echo(candidate) <= theta_f as Tick
}

/// Fixed cyclic order, one emission every `ceil(K / (N - 1))` ticks,
/// staggered by agent id.
#[derive(Debug, Clone)]
pub struct Sequence {
    n: usize,
    interval: u64,
}

impl Sequence {
    pub fn new(s: &TacticSettings) -> Self {
        Sequence {
            n: s.n,
            interval: s.k_period.div_ceil((s.n - 1) as u64),
        }
    }

    pub fn interval(&self) -> u64 {
        self.interval
    }
}

impl Tactic for Sequence {
    fn name(&self) -> &str {
        "sequence"
    }

    fn select_target(
        &self,
        agent: AgentId,
        log: &mut CommLog,
        tick: Tick,
        _rng: &mut StreamRng,
    ) -> Option<AgentId> {
        let interval = self.interval as Tick;
        let phase = (agent as Tick) % interval;
        if (tick - phase).rem_euclid(interval) != 0 {
            return None;
        }
        let step = log.advance_seq_pointer() % (self.n - 1);
        Some((agent + 1 + step) % self.n)
    }
}

/// Sends to a uniformly random other agent at the reference probability.
#[derive(Debug, Clone)]
pub struct RandomTarget {
    n: usize,
    p_send: f64,
}

impl RandomTarget {
    pub fn new(s: &TacticSettings) -> Self {
        RandomTarget {
            n: s.n,
            p_send: s.reference_probability(),
        }
    }
}

impl Tactic for RandomTarget {
    fn name(&self) -> &str {
        "random"
    }

    fn select_target(
        &self,
        agent: AgentId,
        _log: &mut CommLog,
        _tick: Tick,
        rng: &mut StreamRng,
    ) -> Option<AgentId> {
        if rng.random_bool(self.p_send) {
            Some(random_other(agent, self.n, rng))
        } else {
            None
        }
    }
}

/// Random candidate, sent only once `theta_t` ticks have passed since the
/// last transmission to it.
#[derive(Debug, Clone)]
pub struct Timer {
    n: usize,
    theta_t: u64,
}

impl Timer {
    pub fn new(s: &TacticSettings) -> Self {
        Timer {
            n: s.n,
            theta_t: s.theta_t,
        }
    }
}

impl Tactic for Timer {
    fn name(&self) -> &str {
        "timer"
    }

    fn select_target(
        &self,
        agent: AgentId,
        log: &mut CommLog,
        tick: Tick,
        rng: &mut StreamRng,
    ) -> Option<AgentId> {
        let c = random_other(agent, self.n, rng);
        (tick - log.last_sent_to(c) >= self.theta_t as Tick).then_some(c)
    }
}

/// Timer over enabled links only; a candidate whose echo is older than
/// `theta_f` gets its link disabled for good and the slot is dropped.
///
/// With `q_extra > 0`, a tick that produced no regular message sends to a
/// random other agent (disabled or not) with probability
/// `q_extra * (N - 1) / K`.
#[derive(Debug, Clone)]
pub struct Filtered {
    name: &'static str,
    n: usize,
    theta_t: u64,
    theta_f: u64,
    q_extra: f64,
    p_extra: f64,
}

impl Filtered {
    pub fn new(s: &TacticSettings, name: &'static str, q_extra: f64) -> Self {
        Filtered {
            name,
            n: s.n,
            theta_t: s.theta_t,
            theta_f: s.theta_f,
            q_extra,
            p_extra: q_extra * s.reference_probability(),
        }
    }

    fn regular(&self, log: &mut CommLog, tick: Tick, rng: &mut StreamRng) -> Option<AgentId> {
        let live = log.enabled_links().count();
        if live == 0 {
            return None;
        }
        let pick = rng.random_range(0..live);
        let c = log.enabled_links().nth(pick)?;
        if tick - log.last_sent_to(c) < self.theta_t as Tick {
            return None;
        }
        if filter_check(c, log, tick, self.theta_f) {
            Some(c)
        } else {
            log.disable_link(c);
            None
        }
    }
}

impl Tactic for Filtered {
    fn name(&self) -> &str {
        self.name
    }

    fn q_extra(&self) -> f64 {
        self.q_extra
    }

    fn select_target(
        &self,
        agent: AgentId,
        log: &mut CommLog,
        tick: Tick,
        rng: &mut StreamRng,
    ) -> Option<AgentId> {
        let regular = self.regular(log, tick, rng);
        if regular.is_some() || self.p_extra <= 0.0 {
            return regular;
        }
        if rng.random_bool(self.p_extra) {
            Some(random_other(agent, self.n, rng))
        } else {
            None
        }
    }
}
