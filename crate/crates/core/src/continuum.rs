//! Continuum rate-equation model of belief accuracy.
//!
//! Each off-diagonal accuracy obeys
//!
//! ```text
//! d phi[a][b] / dt = -gamma (phi[a][b] - phi_min)
//!                    + alpha[b][a] L[b][a] phi[b][a] (1 - phi[a][b])
//! ```
//!
//! The loss ratio `r = gamma / (alpha[b][a] L[b][a])` fixes the steady
//! state of each pair.

use serde::Serialize;

use crate::error::ContinuumError;
use crate::model::{BeliefMatrix, Environment};

/// Loss-to-inflow ratio. `Infinite` stands for a link with no inflow at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossRatio {
    Finite(f64),
    Infinite,
}

impl From<f64> for LossRatio {
    fn from(r: f64) -> Self {
        if r.is_infinite() {
            LossRatio::Infinite
        } else {
            LossRatio::Finite(r)
        }
    }
}

/// Forward ratio `r` (inflow to `phi[a][b]`) and backward ratio `r_prime`
/// (inflow to `phi[b][a]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePair {
    pub r: f64,
    pub r_prime: f64,
    pub phi_min: f64,
}

/// Positive root of `a x^2 + b x + c = 0` with `a > 0, c <= 0`, computed
/// without cancellation.
fn positive_root(a: f64, b: f64, c: f64) -> f64 {
    let disc = b * b - 4.0 * a * c;
    debug_assert!(disc >= 0.0);
    let sq = disc.sqrt();
    if b <= 0.0 {
        (sq - b) / (2.0 * a)
    } else if c == 0.0 {
        0.0
    } else {
        (-2.0 * c) / (b + sq)
    }
}

/// Steady accuracy given the peer's accuracy about us:
/// `(r phi_min + phi_peer) / (r + phi_peer)`.
pub fn steady_state_response(
    phi_peer: f64,
    r: LossRatio,
    phi_min: f64,
) -> Result<f64, ContinuumError> {
    match r {
        LossRatio::Infinite => Ok(phi_min),
        LossRatio::Finite(r) => {
            if r < 0.0 {
                return Err(ContinuumError::InvalidInput(format!("negative ratio {r}")));
            }
            if r == 0.0 && phi_peer == 0.0 {
                return Err(ContinuumError::Degenerate);
            }
            Ok((r * phi_min + phi_peer) / (r + phi_peer))
        }
    }
}

/// Steady state of a symmetric pair: the non-negative root of
/// `phi^2 + (r - 1) phi - r phi_min = 0`.
pub fn steady_state_symmetric(r: f64, phi_min: f64) -> f64 {
    debug_assert!(r >= 0.0 && (0.0..=1.0).contains(&phi_min));
    let phi = positive_root(1.0, r - 1.0, -r * phi_min);
    phi.clamp(phi_min, 1.0)
}

/// Residual of the symmetric quadratic at `phi`.
pub fn symmetric_residual(r: f64, phi_min: f64, phi: f64) -> f64 {
    phi * phi + (r - 1.0) * phi - r * phi_min
}

/// Residual of the asymmetric quadratic for `phi[a][b]`.
pub fn pair_residual(rp: &RatePair, phi_ab: f64) -> f64 {
    let RatePair { r, r_prime, phi_min } = *rp;
    (r + 1.0) * phi_ab * phi_ab + (r_prime * r + (r_prime - r) * phi_min - 1.0) * phi_ab
        - r_prime * phi_min * (r + 1.0)
}

/// Steady state `(phi[a][b], phi[b][a])` of an asymmetric pair.
pub fn steady_state_pair(rp: RatePair) -> (f64, f64) {
    let RatePair { r, r_prime, phi_min } = rp;
    let phi_ab = positive_root(
        r + 1.0,
        r_prime * r + (r_prime - r) * phi_min - 1.0,
        -r_prime * phi_min * (r + 1.0),
    )
    .clamp(0.0, 1.0);
    // phi_ab > 0 whenever r_prime == 0, so the response is well defined.
    let phi_ba = steady_state_response(phi_ab, LossRatio::Finite(r_prime), phi_min)
        .expect("non-degenerate by construction");
    (phi_ab, phi_ba)
}

/// Transmission rates and environment for the continuum dynamics.
#[derive(Debug, Clone)]
pub struct ContinuumSystem {
    pub n: usize,
    /// `alpha[a][j]`: rate at which `a` transmits to `j`.
    pub alpha: Vec<Vec<f64>>,
    pub env: Environment,
    pub gamma: f64,
    pub phi_min: f64,
    /// Optional cap on each agent's total transmission rate.
    pub rate_cap: Option<f64>,
}

impl ContinuumSystem {
    pub fn new(
        alpha: Vec<Vec<f64>>,
        env: Environment,
        gamma: f64,
        phi_min: f64,
    ) -> Result<Self, ContinuumError> {
        let n = env.n();
        if alpha.len() != n || alpha.iter().any(|row| row.len() != n) {
            return Err(ContinuumError::InvalidInput("alpha must be n x n".into()));
        }
        if alpha.iter().flatten().any(|&x| !(x >= 0.0)) {
            return Err(ContinuumError::InvalidInput("alpha entries must be >= 0".into()));
        }
        if !(gamma >= 0.0) || !(0.0..=1.0).contains(&phi_min) {
            return Err(ContinuumError::InvalidInput("gamma or phi_min out of range".into()));
        }
        Ok(ContinuumSystem {
            n,
            alpha,
            env,
            gamma,
            phi_min,
            rate_cap: None,
        })
    }

    /// Every link with the same `alpha * L`, chosen so the loss ratio is `r`.
    pub fn uniform(n: usize, r: f64, gamma: f64, phi_min: f64) -> Self {
        let a = gamma / r;
        let alpha = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { a }).collect())
            .collect();
        ContinuumSystem::new(alpha, Environment::filled(n, 1.0), gamma, phi_min)
            .expect("uniform system is valid")
    }

    /// Two agents with loss ratios `r` (into `phi[0][1]`) and `r_prime`.
    pub fn pair(rp: RatePair, gamma: f64) -> Self {
        let alpha = vec![
            vec![0.0, gamma / rp.r_prime],
            vec![gamma / rp.r, 0.0],
        ];
        ContinuumSystem::new(alpha, Environment::filled(2, 1.0), gamma, rp.phi_min)
            .expect("pair system is valid")
    }

    pub fn with_rate_cap(mut self, cap: f64) -> Result<Self, ContinuumError> {
        if let Some((a, total)) = self
            .alpha
            .iter()
            .map(|row| row.iter().sum::<f64>())
            .enumerate()
            .find(|&(_, t)| t > cap)
        {
            return Err(ContinuumError::InvalidInput(format!(
                "agent {a} transmits at {total}, above the cap {cap}"
            )));
        }
        self.rate_cap = Some(cap);
        Ok(self)
    }

    /// Receive rate `alpha[b][a] L[b][a] phi[b][a]` feeding `phi[a][b]`.
    pub fn receive_rate(&self, phi: &BeliefMatrix, a: usize, b: usize) -> f64 {
        self.alpha[b][a] * self.env.get(b, a) * phi.get(b, a)
    }

    fn max_inflow(&self) -> f64 {
        (0..self.n)
            .flat_map(|a| (0..self.n).map(move |b| (a, b)))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| self.alpha[b][a] * self.env.get(b, a))
            .fold(0.0, f64::max)
    }

    /// Largest stable explicit step.
    pub fn step_bound(&self) -> f64 {
        1.0 / (self.gamma + self.max_inflow())
    }

    fn check_step(&self, dt: f64) -> Result<(), ContinuumError> {
        let bound = self.step_bound();
        if !(dt > 0.0 && dt < bound) {
            return Err(ContinuumError::UnstableStep { dt, bound });
        }
        Ok(())
    }

    /// One explicit step; returns the largest absolute change.
    fn step(&self, phi: &mut BeliefMatrix, dt: f64) -> f64 {
        let prev = phi.clone();
        let mut max_change: f64 = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                if a == b {
                    continue;
                }
                let x = prev.get(a, b);
                let q = self.receive_rate(&prev, a, b);
                let dx = dt * (-self.gamma * (x - self.phi_min) + q * (1.0 - x));
                phi.set(a, b, (x + dx).clamp(0.0, 1.0));
                max_change = max_change.max(dx.abs());
            }
        }
        max_change
    }

    /// Integrates from `phi0` up to `t_end` with fixed step `dt`.
    pub fn integrate(
        &self,
        phi0: &BeliefMatrix,
        dt: f64,
        t_end: f64,
    ) -> Result<BeliefMatrix, ContinuumError> {
        self.check_step(dt)?;
        let mut phi = phi0.clone();
        let steps = (t_end / dt).round() as u64;
        for _ in 0..steps {
            self.step(&mut phi, dt);
        }
        Ok(phi)
    }

    /// Integrates until the per-unit-time change drops below `1e-12` or
    /// `t_max` is reached. Returns the state and the time reached.
    pub fn integrate_to_steady(
        &self,
        phi0: &BeliefMatrix,
        dt: f64,
        t_max: f64,
    ) -> Result<(BeliefMatrix, f64), ContinuumError> {
        self.check_step(dt)?;
        let mut phi = phi0.clone();
        let mut t = 0.0;
        while t < t_max {
            let change = self.step(&mut phi, dt);
            t += dt;
            if change / dt < 1e-12 {
                break;
            }
        }
        Ok((phi, t))
    }
}

/// Wrapper for the free function form.
pub fn integrate_rate_equations(
    sys: &ContinuumSystem,
    phi0: &BeliefMatrix,
    dt: f64,
    t_end: f64,
) -> Result<BeliefMatrix, ContinuumError> {
    sys.integrate(phi0, dt, t_end)
}
