//! Differential evolution (rand/1/bin) over box bounds.
//!
//! Global maximizer used for the stress-scenario searches. Runs are seeded
//! and deterministic: all random draws happen on a single thread, objective
//! evaluations are farmed out in parallel, and the surviving population is
//! reduced in a fixed order, so results do not depend on thread count.
//! Constraints are handled by death penalty: the objective returns
//! `f64::NEG_INFINITY` outside the feasible region.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Settings for [`maximize_de`].
#[derive(Debug, Clone)]
pub struct DeConfig {
    /// Population size per restart.
    pub population: usize,
    /// Generations per restart.
    pub iterations: usize,
    /// Number of independent restarts; the best run wins.
    pub restarts: usize,
    /// Differential weight F.
    pub differential_weight: f64,
    /// Crossover probability CR.
    pub crossover: f64,
    /// RNG seed; restart r derives its own stream from this.
    pub seed: u64,
    /// Points injected into every initial population (clamped to bounds),
    /// e.g. observed exceedance rows for constrained searches.
    pub seed_points: Vec<Vec<f64>>,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig {
            population: 50,
            iterations: 4000,
            restarts: 10,
            differential_weight: 0.8,
            crossover: 0.9,
            seed: 0,
            seed_points: Vec::new(),
        }
    }
}

impl DeConfig {
    fn validate(&self, dim: usize) -> Result<()> {
        if self.population < 5 {
            return Err(Error::Optimization(format!(
                "population must be at least 5, got {}",
                self.population
            )));
        }
        if self.iterations == 0 || self.restarts == 0 {
            return Err(Error::Optimization(
                "iterations and restarts must be positive".into(),
            ));
        }
        if !(self.differential_weight > 0.0 && self.differential_weight < 2.0) {
            return Err(Error::Optimization(format!(
                "differential weight must lie in (0, 2), got {}",
                self.differential_weight
            )));
        }
        if !(self.crossover > 0.0 && self.crossover <= 1.0) {
            return Err(Error::Optimization(format!(
                "crossover must lie in (0, 1], got {}",
                self.crossover
            )));
        }
        if dim == 0 {
            return Err(Error::Optimization("empty search space".to_string()));
        }
        Ok(())
    }
}

/// Result of a differential-evolution run.
#[derive(Debug, Clone)]
pub struct DeOutcome {
    /// Best point found across restarts.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub value: f64,
    /// Restart index that produced the winner.
    pub winning_restart: usize,
    /// True if the winning restart stopped improving well before its
    /// iteration budget (best value stagnant over the final quarter).
    pub converged: bool,
    /// Total objective evaluations across all restarts.
    pub evaluations: usize,
}

/// Maximize `f` over the box `bounds` (inclusive lo/hi per coordinate).
///
/// Returns an error if no restart ever found a finite objective value, which
/// for death-penalty constraints means the feasible set was never hit.
pub fn maximize_de(
    f: impl Fn(&[f64]) -> f64 + Sync,
    bounds: &[(f64, f64)],
    cfg: &DeConfig,
) -> Result<DeOutcome> {
    let dim = bounds.len();
    cfg.validate(dim)?;
    for (i, (lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Optimization(format!(
                "bounds for coordinate {i} are not a finite interval: [{lo}, {hi}]"
            )));
        }
    }

    let mut best: Option<DeOutcome> = None;
    let mut evaluations = 0usize;

    for restart in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, restart as u64));
        let np = cfg.population;

        let mut pop: Vec<Vec<f64>> = (0..np)
            .map(|_| {
                bounds
                    .iter()
                    .map(|&(lo, hi)| rng.gen_range(lo..=hi))
                    .collect()
            })
            .collect();
        for (slot, point) in pop.iter_mut().zip(cfg.seed_points.iter()) {
            *slot = point
                .iter()
                .zip(bounds)
                .map(|(&x, &(lo, hi))| x.clamp(lo, hi))
                .collect();
        }

        let mut values: Vec<f64> = pop.par_iter().map(|x| f(x)).collect();
        evaluations += np;

        let mut best_trace = vec![f64::NEG_INFINITY; cfg.iterations + 1];
        best_trace[0] = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        for gen in 0..cfg.iterations {
            // Draw all trial vectors on one thread, then evaluate in parallel.
            let trials: Vec<Vec<f64>> = (0..np)
                .map(|i| {
                    let (r1, r2, r3) = distinct_indices(&mut rng, np, i);
                    let j_rand = rng.gen_range(0..dim);
                    (0..dim)
                        .map(|j| {
                            if j == j_rand || rng.gen::<f64>() < cfg.crossover {
                                let v = pop[r1][j]
                                    + cfg.differential_weight * (pop[r2][j] - pop[r3][j]);
                                v.clamp(bounds[j].0, bounds[j].1)
                            } else {
                                pop[i][j]
                            }
                        })
                        .collect()
                })
                .collect();

            let trial_values: Vec<f64> = trials.par_iter().map(|x| f(x)).collect();
            evaluations += np;

            for i in 0..np {
                if trial_values[i] >= values[i] {
                    pop[i] = trials[i].clone();
                    values[i] = trial_values[i];
                }
            }
            best_trace[gen + 1] = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        }

        let (best_idx, best_val) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, v)| (i, *v))
            .expect("non-empty population");

        if !best_val.is_finite() {
            continue;
        }

        let tail_start = cfg.iterations - cfg.iterations / 4;
        let converged = best_trace[tail_start].is_finite()
            && (best_trace[cfg.iterations] - best_trace[tail_start]).abs() < 1e-10;

        let replace = match &best {
            None => true,
            Some(b) => best_val > b.value,
        };
        if replace {
            best = Some(DeOutcome {
                x: pop[best_idx].clone(),
                value: best_val,
                winning_restart: restart,
                converged,
                evaluations: 0,
            });
        }
    }

    match best {
        Some(mut outcome) => {
            outcome.evaluations = evaluations;
            Ok(outcome)
        }
        None => Err(Error::Optimization(
            "no feasible point found in any restart (objective was -inf everywhere)".into(),
        )),
    }
}

fn distinct_indices(rng: &mut ChaCha8Rng, np: usize, skip: usize) -> (usize, usize, usize) {
    let mut draw = |exclude: &[usize]| loop {
        let k = rng.gen_range(0..np);
        if !exclude.contains(&k) {
            return k;
        }
    };
    let r1 = draw(&[skip]);
    let r2 = draw(&[skip, r1]);
    let r3 = draw(&[skip, r1, r2]);
    (r1, r2, r3)
}

/// SplitMix64 step, used to derive independent per-restart streams.
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rosenbrock_neg(x: &[f64]) -> f64 {
        -((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2))
    }

    #[test]
    fn solves_rosenbrock() {
        let cfg = DeConfig {
            population: 40,
            iterations: 400,
            restarts: 3,
            seed: 7,
            ..DeConfig::default()
        };
        let out = maximize_de(rosenbrock_neg, &[(-2.0, 2.0), (-2.0, 2.0)], &cfg).unwrap();
        assert_abs_diff_eq!(out.x[0], 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(out.x[1], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn same_seed_same_result() {
        let cfg = DeConfig {
            population: 30,
            iterations: 100,
            restarts: 2,
            seed: 42,
            ..DeConfig::default()
        };
        let bounds = [(-3.0, 3.0), (-3.0, 3.0)];
        let a = maximize_de(rosenbrock_neg, &bounds, &cfg).unwrap();
        let b = maximize_de(rosenbrock_neg, &bounds, &cfg).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn death_penalty_constraint_is_respected() {
        // Maximize a dome subject to x + y >= 1.5.
        let f = |x: &[f64]| {
            if x[0] + x[1] >= 1.5 {
                -(x[0] * x[0] + x[1] * x[1])
            } else {
                f64::NEG_INFINITY
            }
        };
        let cfg = DeConfig {
            population: 40,
            iterations: 300,
            restarts: 3,
            seed: 3,
            ..DeConfig::default()
        };
        let out = maximize_de(f, &[(-3.0, 3.0), (-3.0, 3.0)], &cfg).unwrap();
        assert!(out.x[0] + out.x[1] >= 1.5 - 1e-12);
        // The constrained optimum is at (0.75, 0.75).
        assert_abs_diff_eq!(out.x[0], 0.75, epsilon = 1e-3);
        assert_abs_diff_eq!(out.x[1], 0.75, epsilon = 1e-3);
    }

    #[test]
    fn infeasible_everywhere_is_an_error() {
        let f = |_: &[f64]| f64::NEG_INFINITY;
        let cfg = DeConfig {
            population: 10,
            iterations: 5,
            restarts: 2,
            seed: 1,
            ..DeConfig::default()
        };
        assert!(maximize_de(f, &[(0.0, 1.0)], &cfg).is_err());
    }
}
