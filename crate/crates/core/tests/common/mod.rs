//! Independent oracles and invariant checks shared by the property and
//! acceptance suites. Nothing here calls the solver or path code it checks.

#![allow(dead_code)]

use swarmcomm::engine::loss_update;
use swarmcomm::{BeliefMatrix, Environment, SimParams, TacticConfig, World};

pub const TACTICS: [&str; 6] = [
    "sequence",
    "random",
    "timer",
    "filtered",
    "filtered+",
    "filtered++",
];

pub fn params(n: usize, k: u64, gamma_bar: f64, phi_min: f64, tactic: &str, seed: u64) -> SimParams {
    let mut p = SimParams::new(n, k);
    p.phi_min = phi_min;
    p.tactic = TacticConfig::new(tactic);
    p.seed = seed;
    p.with_gamma_bar(gamma_bar)
}

pub fn flat_world(n: usize, k: u64, gamma_bar: f64, phi_min: f64, tactic: &str, seed: u64) -> World {
    let p = params(n, k, gamma_bar, phi_min, tactic, seed);
    World::new(p, Environment::filled(n, 0.95)).expect("valid world")
}

/// Largest root on `[lo, hi]` of a function positive below it and
/// non-positive above it.
pub fn bisect_last_positive(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Symmetric steady state from the balance of loss and inflow,
/// `phi (1 - phi) = r (phi - phi_min)`, solved by bisection.
pub fn symmetric_oracle(r: f64, phi_min: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    bisect_last_positive(|x| x * (1.0 - x) - r * (x - phi_min), phi_min, 1.0)
}

/// One side's balance given the other side's accuracy.
fn response(peer: f64, r: f64, phi_min: f64) -> f64 {
    (r * phi_min + peer) / (r + peer)
}

/// Pair steady state as the largest fixed point of the composed responses.
pub fn pair_oracle(r: f64, r_prime: f64, phi_min: f64) -> (f64, f64) {
    let g = |x: f64| response(response(x, r_prime, phi_min), r, phi_min) - x;
    let ab = if r == 0.0 {
        1.0
    } else {
        bisect_last_positive(g, phi_min, 1.0)
    };
    (ab, response(ab, r_prime, phi_min))
}

/// Best path product over every walk of at most `hops` hops, by explicit
/// enumeration. Zero hops from `a` to itself counts as 1.
pub fn brute_force_paths(beliefs: &BeliefMatrix, hops: usize) -> Vec<Vec<f64>> {
    let n = beliefs.n();
    let mut best = vec![vec![0.0; n]; n];
    fn walk(
        beliefs: &BeliefMatrix,
        at: usize,
        product: f64,
        left: usize,
        row: &mut [f64],
    ) {
        if product > row[at] {
            row[at] = product;
        }
        if left == 0 {
            return;
        }
        for next in 0..beliefs.n() {
            if next != at {
                walk(beliefs, next, product * beliefs.get(at, next), left - 1, row);
            }
        }
    }
    for (a, row) in best.iter_mut().enumerate() {
        walk(beliefs, a, 1.0, hops, row);
    }
    best
}

/// Runs `ticks` steps and checks belief bounds, unit diagonal and the
/// one-message-per-agent cap after every step.
pub fn check_trajectory(world: &mut World, ticks: u64) -> Result<(), String> {
    let n = world.params().n;
    let floor = world.params().phi_min;
    for _ in 0..ticks {
        let report = world.tick();
        let mut seen = vec![false; n];
        for (msg, _) in &report.messages {
            if std::mem::replace(&mut seen[msg.sender], true) {
                return Err(format!("agent {} sent twice at tick {}", msg.sender, report.tick));
            }
            if msg.target == msg.sender || msg.target >= n {
                return Err(format!("bad target {} from {}", msg.target, msg.sender));
            }
        }
        let b = world.beliefs();
        for a in 0..n {
            if b.get(a, a) != 1.0 {
                return Err(format!("diagonal {a} is {}", b.get(a, a)));
            }
            for c in 0..n {
                let v = b.get(a, c);
                if a != c && !(v >= floor && v <= 1.0) {
                    return Err(format!("phi[{a}][{c}] = {v} outside [{floor}, 1]"));
                }
            }
        }
    }
    Ok(())
}

/// With nobody sending, each belief follows the closed-form decay.
pub fn check_pure_decay(
    start: &BeliefMatrix,
    gamma: f64,
    tau: f64,
    phi_min: f64,
    ticks: u32,
) -> Result<(), String> {
    let mut b = start.clone();
    for _ in 0..ticks {
        loss_update(&mut b, gamma, tau, phi_min);
    }
    let keep = (-gamma * tau * ticks as f64).exp();
    for (a, c, v) in b.off_diagonal() {
        let expect = phi_min + keep * (start.get(a, c) - phi_min);
        if (v - expect).abs() > 1e-12 {
            return Err(format!("phi[{a}][{c}] = {v}, closed form {expect}"));
        }
    }
    Ok(())
}

/// Filtered tactics only ever disable links.
pub fn check_links_monotone(world: &mut World, ticks: u64) -> Result<(), String> {
    let n = world.params().n;
    let snapshot = |w: &World| -> Vec<bool> {
        (0..n)
            .flat_map(|a| (0..n).map(move |j| (a, j)))
            .map(|(a, j)| w.log(a).is_link_enabled(j))
            .collect()
    };
    let mut prev = snapshot(world);
    for _ in 0..ticks {
        world.tick();
        let now = snapshot(world);
        if let Some(k) = (0..now.len()).find(|&k| now[k] && !prev[k]) {
            return Err(format!("link {} -> {} re-enabled", k / n, k % n));
        }
        prev = now;
    }
    Ok(())
}

pub fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}
