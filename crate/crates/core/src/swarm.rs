//! Particle swarm search over a periodic box `[0, 2π)^d`.
//!
//! The update is the synchronous constriction-factor variant: every
//! particle moves using the global best of the previous iteration, then the
//! whole population is evaluated, then bests are updated in particle order.
//! Displacements toward attractors use the shortest angular difference and
//! positions are wrapped after each move.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::model::{angular_difference, wrap_phase};
use crate::seed;

/// Swarm hyperparameters. The defaults are the standard constriction
/// settings (`ω = 0.729`, `c1 = c2 = 1.49445`) with 20 particles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PswConfig {
    pub particles: usize,
    pub max_iters: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Largest per-coordinate step in radians.
    pub velocity_clamp: f64,
    /// Stop as soon as the global best loss reaches zero.
    pub stop_on_zero: bool,
    pub rng_seed: u64,
}

impl Default for PswConfig {
    fn default() -> Self {
        Self {
            particles: 20,
            max_iters: 300,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            velocity_clamp: PI,
            stop_on_zero: true,
            rng_seed: 0,
        }
    }
}

impl PswConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(invalid("particles", "need at least 2"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be positive"));
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
            ("velocity_clamp", self.velocity_clamp),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, "must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// Identifies one loss evaluation, so stochastic losses can derive their
/// randomness deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Evaluation {
    /// 1-based; iteration 1 evaluates the initial population.
    pub iteration: usize,
    pub particle: usize,
}

impl Evaluation {
    /// Unique index across the whole run.
    pub fn index(&self, particles: usize) -> u64 {
        ((self.iteration - 1) * particles + self.particle) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub personal_best: Vec<Vec<f64>>,
    /// Loss observed when each personal best was accepted.
    pub personal_best_loss: Vec<f64>,
    pub global_best: Vec<f64>,
    pub global_best_loss: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PswOutcome {
    pub best_position: Vec<f64>,
    pub best_loss: f64,
    /// Global best loss after each iteration.
    pub history: Vec<f64>,
    pub state: SwarmState,
}

impl PswOutcome {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }
}

/// Minimizes `loss` over `[0, 2π)^dim`.
pub fn psw_minimize<F>(dim: usize, config: &PswConfig, mut loss: F) -> Result<PswOutcome>
where
    F: FnMut(&[f64], Evaluation) -> f64,
{
    if dim == 0 {
        return Err(invalid("dim", "must be at least 1"));
    }
    config.validate()?;
    let p = config.particles;
    let clamp = config.velocity_clamp;
    let mut rng = seed::rng(config.rng_seed);

    let positions: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..TAU)).collect())
        .collect();
    let velocities: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..dim).map(|_| rng.random_range(-clamp..=clamp)).collect())
        .collect();
    let mut state = SwarmState {
        personal_best: positions.clone(),
        personal_best_loss: alloc::vec![f64::INFINITY; p],
        global_best: positions[0].clone(),
        global_best_loss: f64::INFINITY,
        positions,
        velocities,
        iteration: 0,
    };
    let mut history = Vec::with_capacity(config.max_iters);

    for iteration in 1..=config.max_iters {
        if iteration > 1 {
            for i in 0..p {
                for d in 0..dim {
                    let r1: f64 = rng.random();
                    let r2: f64 = rng.random();
                    let x = state.positions[i][d];
                    let v = config.inertia * state.velocities[i][d]
                        + config.cognitive * r1 * angular_difference(x, state.personal_best[i][d])
                        + config.social * r2 * angular_difference(x, state.global_best[d]);
                    let v = v.clamp(-clamp, clamp);
                    state.velocities[i][d] = v;
                    state.positions[i][d] = wrap_phase(x + v);
                }
            }
        }
        state.iteration = iteration;
        for i in 0..p {
            let value = loss(
                &state.positions[i],
                Evaluation {
                    iteration,
                    particle: i,
                },
            );
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    value,
                    iteration,
                    particle: i,
                });
            }
            if value < state.personal_best_loss[i] {
                state.personal_best_loss[i] = value;
                state.personal_best[i].clone_from(&state.positions[i]);
            }
            if value < state.global_best_loss {
                state.global_best_loss = value;
                state.global_best.clone_from(&state.positions[i]);
            }
        }
        history.push(state.global_best_loss);
        if config.stop_on_zero && state.global_best_loss <= 0.0 {
            break;
        }
    }

    Ok(PswOutcome {
        best_position: state.global_best.clone(),
        best_loss: state.global_best_loss,
        history,
        state,
    })
}
