//! Discrete-time stochastic messaging loop.
//!
//! Each tick runs in three stages:
//!
//! 1. every off-diagonal belief relaxes toward the floor,
//! 2. every agent's tactic picks at most one target from its own ledger,
//! 3. each message passes the reception filter `eta < L[s][t] * phi[s][t]`;
//!    successful ones set `phi[t][s] = 1` and refresh the target's ledger.
//!
//! Stage 3 draws all outcomes against the post-decay beliefs before any
//! reception is applied, so sends within a tick are simultaneous and agent
//! order never matters.

use rand::Rng;

use crate::error::ConfigError;
use crate::model::{AgentId, BeliefMatrix, CommLog, Environment, Message, SimParams, Tick};
use crate::rng::{Purpose, RngContract, StreamRng};
use crate::tactics::{Tactic, TacticRegistry};

/// Per-agent message counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub sent: Vec<u64>,
    pub delivered: Vec<u64>,
}

impl Counters {
    fn new(n: usize) -> Self {
        Counters {
            sent: vec![0; n],
            delivered: vec![0; n],
        }
    }

    pub fn total_sent(&self) -> u64 {
        self.sent.iter().sum()
    }

    pub fn total_delivered(&self) -> u64 {
        self.delivered.iter().sum()
    }
}

/// What happened during one tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickReport {
    pub tick: Tick,
    /// Every message sent, with its delivery outcome.
    pub messages: Vec<(Message, bool)>,
}

impl TickReport {
    pub fn delivered(&self) -> usize {
        self.messages.iter().filter(|(_, ok)| *ok).count()
    }
}

/// Receives the world after every tick of [`World::run`].
pub trait Observer {
    fn observe(&mut self, world: &World);
}

/// Relaxes all off-diagonal beliefs toward `phi_min` over one tick.
pub fn loss_update(beliefs: &mut BeliefMatrix, gamma: f64, tau: f64, phi_min: f64) {
    beliefs.relax_toward(phi_min, (-gamma * tau).exp());
}

/// Reception filter: one uniform draw on `[0, 1)` against `L * phi`, both
/// taken from the sender toward the target.
pub fn attempt_delivery(
    msg: &Message,
    env: &Environment,
    beliefs: &BeliefMatrix,
    rng: &mut StreamRng,
) -> bool {
    let eta: f64 = rng.random();
    eta < env.get(msg.sender, msg.target) * beliefs.get(msg.sender, msg.target)
}

#[derive(Debug)]
pub struct World {
    params: SimParams,
    env: Environment,
    beliefs: BeliefMatrix,
    logs: Vec<CommLog>,
    tick: Tick,
    counters: Counters,
    window: Counters,
    window_start: Tick,
    tactic: Box<dyn Tactic>,
    rng: RngContract,
    decay: f64,
}

impl World {
    /// Builds a world with the built-in tactics.
    pub fn new(params: SimParams, env: Environment) -> Result<Self, ConfigError> {
        Self::with_registry(params, env, &TacticRegistry::builtin())
    }

    /// Initial ledgers hold independent uniform stamps on `[-K, 0]`. Each
    /// off-diagonal belief is what the decay law leaves of a perfect belief
    /// refreshed at the drawn `last_recv_from` stamp.
    pub fn with_registry(
        params: SimParams,
        env: Environment,
        registry: &TacticRegistry,
    ) -> Result<Self, ConfigError> {
        params.validate()?;
        if env.n() != params.n {
            return Err(ConfigError::DimensionMismatch {
                expected: params.n,
                found: env.n(),
            });
        }
        let n = params.n;
        let k = params.k_period as Tick;
        let tactic = registry.build(&params.tactic, n, params.k_period)?;
        let rng = RngContract::new(params.seed);

        let mut beliefs = BeliefMatrix::filled(n, params.phi_min);
        let mut logs = Vec::with_capacity(n);
        for a in 0..n {
            let mut r = rng.stream(0, a, Purpose::Init);
            let draw = |r: &mut StreamRng| -> Vec<Tick> {
                (0..n)
                    .map(|j| if j == a { 0 } else { r.random_range(-k..=0) })
                    .collect()
            };
            let sent = draw(&mut r);
            let recv = draw(&mut r);
            let echo = draw(&mut r);
            for (b, &stamp) in recv.iter().enumerate() {
                if b != a {
                    let keep = (params.gamma * params.tau * stamp as f64).exp();
                    beliefs.set(a, b, params.phi_min + (1.0 - params.phi_min) * keep);
                }
            }
            logs.push(CommLog::from_stamps(a, sent, recv, echo));
        }

        Ok(World {
            decay: params.decay_factor(),
            params,
            env,
            beliefs,
            logs,
            tick: 0,
            counters: Counters::new(n),
            window: Counters::new(n),
            window_start: 0,
            tactic,
            rng,
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn beliefs(&self) -> &BeliefMatrix {
        &self.beliefs
    }

    pub fn logs(&self) -> &[CommLog] {
        &self.logs
    }

    pub fn log(&self, a: AgentId) -> &CommLog {
        &self.logs[a]
    }

    pub fn tick_count(&self) -> Tick {
        self.tick
    }

    pub fn tactic(&self) -> &dyn Tactic {
        self.tactic.as_ref()
    }

    /// Counts since construction.
    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    /// Counts since the last [`World::reset_window`].
    pub fn window(&self) -> &Counters {
        &self.window
    }

    pub fn window_ticks(&self) -> u64 {
        (self.tick - self.window_start) as u64
    }

    pub fn reset_window(&mut self) {
        self.window = Counters::new(self.params.n);
        self.window_start = self.tick;
    }

    /// Replaces the belief matrix, e.g. to start from a prepared state.
    pub fn set_beliefs(&mut self, beliefs: BeliefMatrix) -> Result<(), ConfigError> {
        if beliefs.n() != self.params.n {
            return Err(ConfigError::DimensionMismatch {
                expected: self.params.n,
                found: beliefs.n(),
            });
        }
        self.beliefs = beliefs;
        Ok(())
    }

    /// Sets the target's view of the sender to certainty and records the
    /// reception and its echo in the target's ledger.
    pub fn apply_reception(&mut self, msg: &Message) {
        self.beliefs.set(msg.target, msg.sender, 1.0);
        self.logs[msg.target].record_receive(msg.sender, self.tick, msg.echo);
    }

    pub fn tick(&mut self) -> TickReport {
        let now = self.tick;

        self.beliefs.relax_toward(self.params.phi_min, self.decay);

        let mut outgoing = Vec::new();
        for (a, log) in self.logs.iter_mut().enumerate() {
            let mut r = self.rng.stream(now, a, Purpose::Select);
            if let Some(target) = self.tactic.select_target(a, log, now, &mut r) {
                debug_assert_ne!(target, a);
                outgoing.push(Message {
                    sender: a,
                    target,
                    sent_tick: now,
                    echo: log.last_recv_from(target),
                });
                log.record_send(target, now);
            }
        }

        let messages: Vec<(Message, bool)> = outgoing
            .into_iter()
            .map(|msg| {
                let mut r = self.rng.stream(now, msg.sender, Purpose::Delivery);
                let ok = attempt_delivery(&msg, &self.env, &self.beliefs, &mut r);
                (msg, ok)
            })
            .collect();

        for (msg, ok) in &messages {
            self.counters.sent[msg.sender] += 1;
            self.window.sent[msg.sender] += 1;
            if *ok {
                self.counters.delivered[msg.sender] += 1;
                self.window.delivered[msg.sender] += 1;
                self.apply_reception(msg);
            }
        }

        self.tick += 1;
        TickReport {
            tick: now,
            messages,
        }
    }

    /// Advances `ticks` steps, handing the world to every observer after each.
    pub fn run(&mut self, ticks: u64, observers: &mut [&mut dyn Observer]) {
        for _ in 0..ticks {
            self.tick();
            for obs in observers.iter_mut() {
                obs.observe(self);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tactics::{TacticConfig, TacticSettings};

    fn flat(n: usize, l: f64) -> Environment {
        Environment::filled(n, l)
    }

    #[derive(Debug)]
    struct Silent;
    impl Tactic for Silent {
        fn name(&self) -> &str {
            "silent"
        }
        fn select_target(&self, _: AgentId, _: &mut CommLog, _: Tick, _: &mut StreamRng) -> Option<AgentId> {
            None
        }
    }

    /// Every agent messages its successor every tick.
    #[derive(Debug)]
    struct Always(usize);
    impl Tactic for Always {
        fn name(&self) -> &str {
            "always"
        }
        fn select_target(&self, a: AgentId, _: &mut CommLog, _: Tick, _: &mut StreamRng) -> Option<AgentId> {
            Some((a + 1) % self.0)
        }
    }

    fn registry() -> TacticRegistry {
        let mut reg = TacticRegistry::builtin();
        reg.register("silent", |_: &TacticSettings| Box::new(Silent) as Box<dyn Tactic>);
        reg.register("always", |s: &TacticSettings| Box::new(Always(s.n)) as Box<dyn Tactic>);
        reg
    }

    fn params(n: usize, k: u64, tactic: &str) -> SimParams {
        let mut p = SimParams::new(n, k);
        p.tactic = TacticConfig::new(tactic);
        p
    }

    #[test]
    fn init_rejects_bad_dimensions_and_k() {
        assert!(matches!(
            World::new(SimParams::new(4, 50), flat(3, 1.0)),
            Err(ConfigError::DimensionMismatch { expected: 4, found: 3 })
        ));
        assert!(World::new(SimParams::new(20, 15), flat(20, 1.0)).is_err());
    }

    #[test]
    fn init_stamps_lie_in_range_and_links_are_enabled() {
        let p = SimParams::new(20, 200).with_gamma_bar(0.1);
        let w = World::new(p, flat(20, 0.95)).unwrap();
        for log in w.logs() {
            for j in (0..20).filter(|&j| j != log.owner()) {
                for s in [log.last_sent_to(j), log.last_recv_from(j), log.latest_echo(j)] {
                    assert!((-200..=0).contains(&s));
                }
                assert!(log.is_link_enabled(j));
            }
        }
        assert_eq!(w.tick_count(), 0);
    }

    #[test]
    fn init_beliefs_match_receive_stamps() {
        let mut p = SimParams::new(2, 10);
        p.phi_min = 0.1;
        // Infinite loss sends every belief to the floor.
        p.gamma = 1e6;
        let w = World::new(p.clone(), flat(2, 1.0)).unwrap();
        let b = w.beliefs();
        assert_eq!(b.get(0, 0), 1.0);
        assert_eq!(b.get(1, 1), 1.0);
        for (a, bb) in [(0, 1), (1, 0)] {
            let stamp = w.log(a).last_recv_from(bb);
            let expect = if stamp == 0 { 1.0 } else { 0.1 };
            assert!((b.get(a, bb) - expect).abs() < 1e-12);
        }
        p.gamma = 0.01;
        let w = World::new(p, flat(2, 1.0)).unwrap();
        let stamp = w.log(0).last_recv_from(1) as f64;
        let expect = 0.1 + 0.9 * (0.01 * stamp).exp();
        assert!((w.beliefs().get(0, 1) - expect).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_world() {
        let mut p = SimParams::new(20, 200).with_gamma_bar(0.1);
        p.seed = 42;
        let a = World::new(p.clone(), flat(20, 0.95)).unwrap();
        let b = World::new(p, flat(20, 0.95)).unwrap();
        assert_eq!(a.logs(), b.logs());
        assert_eq!(a.beliefs(), b.beliefs());
    }

    #[test]
    fn loss_update_fixed_point_and_half_life() {
        let mut b = BeliefMatrix::filled(3, 0.1);
        loss_update(&mut b, 0.3, 1.0, 0.1);
        assert!(b.off_diagonal().all(|(_, _, v)| v == 0.1));
        b.set(0, 2, 1.0);
        loss_update(&mut b, std::f64::consts::LN_2, 1.0, 0.1);
        assert!((b.get(0, 2) - 0.55).abs() < 1e-12);
        assert_eq!(b.get(0, 0), 1.0);
        assert_eq!(b.get(2, 2), 1.0);
    }

    #[test]
    fn delivery_edge_cases() {
        let rng = RngContract::new(9);
        let msg = Message { sender: 0, target: 1, sent_tick: 0, echo: 0 };
        let ones = BeliefMatrix::filled(2, 1.0);
        for t in 0..1000 {
            let mut r = rng.stream(t, 0, Purpose::Delivery);
            assert!(!attempt_delivery(&msg, &flat(2, 0.0), &ones, &mut r));
            let mut r = rng.stream(t, 0, Purpose::Delivery);
            assert!(attempt_delivery(&msg, &flat(2, 1.0), &ones, &mut r));
        }
    }

    #[test]
    fn delivery_rate_matches_bernoulli() {
        let rng = RngContract::new(11);
        let env = flat(2, 0.95);
        let beliefs = BeliefMatrix::filled(2, 0.8);
        let msg = Message { sender: 0, target: 1, sent_tick: 0, echo: 0 };
        let trials = 100_000;
        let hits = (0..trials)
            .filter(|&t| attempt_delivery(&msg, &env, &beliefs, &mut rng.stream(t, 0, Purpose::Delivery)))
            .count();
        let rate = hits as f64 / trials as f64;
        assert!((rate - 0.76).abs() < 0.004, "rate {rate}");
    }

    #[test]
    fn reception_touches_only_the_target() {
        let mut w = World::with_registry(params(4, 40, "silent"), flat(4, 1.0), &registry()).unwrap();
        let before_b = w.beliefs().clone();
        let before_logs = w.logs().to_vec();
        let msg = Message { sender: 1, target: 2, sent_tick: 0, echo: 37 };
        w.apply_reception(&msg);
        assert_eq!(w.beliefs().get(2, 1), 1.0);
        assert_eq!(w.log(2).latest_echo(1), 37);
        assert_eq!(w.log(2).last_recv_from(1), 0);
        for (a, b, v) in w.beliefs().off_diagonal() {
            if (a, b) != (2, 1) {
                assert_eq!(v, before_b.get(a, b));
            }
        }
        for a in [0, 1, 3] {
            assert_eq!(w.log(a), &before_logs[a]);
        }
    }

    #[test]
    fn silent_tick_is_pure_decay() {
        let mut p = params(5, 50, "silent");
        p.gamma = 0.05;
        let mut w = World::with_registry(p, flat(5, 1.0), &registry()).unwrap();
        let logs = w.logs().to_vec();
        let mut expect = w.beliefs().clone();
        for _ in 0..10 {
            let rep = w.tick();
            assert!(rep.messages.is_empty());
            loss_update(&mut expect, 0.05, 1.0, 0.1);
        }
        assert_eq!(w.beliefs(), &expect);
        assert_eq!(w.logs(), &logs[..]);
    }

    #[test]
    fn forced_mutual_send_restores_certainty() {
        let mut p = params(2, 10, "always");
        p.gamma = 1e-12;
        let mut w = World::with_registry(p, flat(2, 1.0), &registry()).unwrap();
        w.set_beliefs(BeliefMatrix::filled(2, 1.0)).unwrap();
        let rep = w.tick();
        assert_eq!(rep.messages.len(), 2);
        assert_eq!(rep.delivered(), 2);
        assert_eq!(w.beliefs().get(0, 1), 1.0);
        assert_eq!(w.beliefs().get(1, 0), 1.0);
        // Echo carried is the sender's receive stamp before this tick.
        assert_eq!(w.log(0).last_recv_from(1), 0);
        assert_eq!(w.log(0).last_sent_to(1), 0);
    }

    #[test]
    fn at_most_one_message_per_agent_per_tick() {
        for tactic in ["sequence", "random", "timer", "filtered", "filtered+", "filtered++"] {
            let mut p = params(8, 20, tactic).with_gamma_bar(0.3);
            p.seed = 5;
            let mut w = World::new(p, flat(8, 0.9)).unwrap();
            for _ in 0..2000 {
                let rep = w.tick();
                assert!(rep.messages.len() <= 8);
                let mut senders: Vec<_> = rep.messages.iter().map(|(m, _)| m.sender).collect();
                senders.sort_unstable();
                senders.dedup();
                assert_eq!(senders.len(), rep.messages.len());
            }
            let c = w.counters();
            assert!(c.total_delivered() <= c.total_sent());
        }
    }

    #[test]
    fn run_zero_is_identity() {
        let mut w = World::new(SimParams::new(6, 60), flat(6, 0.9)).unwrap();
        let b = w.beliefs().clone();
        let logs = w.logs().to_vec();
        w.run(0, &mut []);
        assert_eq!(w.beliefs(), &b);
        assert_eq!(w.logs(), &logs[..]);
        assert_eq!(w.tick_count(), 0);
    }

    #[test]
    fn window_counters_reset() {
        let mut w = World::new(SimParams::new(6, 60).with_gamma_bar(0.1), flat(6, 0.9)).unwrap();
        w.run(500, &mut []);
        let total = w.counters().total_sent();
        assert!(total > 0);
        w.reset_window();
        assert_eq!(w.window().total_sent(), 0);
        assert_eq!(w.window_ticks(), 0);
        w.run(100, &mut []);
        assert_eq!(w.window_ticks(), 100);
        assert_eq!(w.counters().total_sent(), total + w.window().total_sent());
    }
}
