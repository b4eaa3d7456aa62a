//! DE/rand/1/bin with bound clipping.
//!
//! Trial vectors for a generation are drawn sequentially from one seeded
//! generator and then evaluated as a batch, so the result does not depend
//! on whether the batch runs on one thread or many.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::par::{self, Parallelism};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeSettings {
    pub population: usize,
    /// Differential weight F.
    pub weight: f64,
    /// Crossover rate CR.
    pub crossover: f64,
    pub generations: usize,
    pub seed: u64,
}

impl Default for DeSettings {
    fn default() -> Self {
        DeSettings {
            population: 30,
            weight: 0.8,
            crossover: 0.9,
            generations: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub loss: f64,
    /// Best loss after initialization and after every generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

fn check(bounds: &[(f64, f64)], settings: &DeSettings) -> Result<()> {
    if settings.population < 4 {
        return Err(Error::Config(format!(
            "population must be at least 4, got {}",
            settings.population
        )));
    }
    if bounds.is_empty() {
        return Err(Error::Config("no parameters to optimize".into()));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!("bounds of parameter {i} are invalid: [{lo}, {hi}]")));
        }
    }
    if !(settings.weight > 0.0 && settings.weight <= 2.0) {
        return Err(Error::Config(format!("differential weight {} outside (0, 2]", settings.weight)));
    }
    if !(0.0..=1.0).contains(&settings.crossover) {
        return Err(Error::Config(format!("crossover rate {} outside [0, 1]", settings.crossover)));
    }
    Ok(())
}

/// NaN losses rank last.
fn sanitize(loss: f64) -> f64 {
    if loss.is_nan() {
        f64::INFINITY
    } else {
        loss
    }
}

/// Minimizes `objective` over the box `bounds`.
///
/// `seeds` are copied into the first population slots (clipped to the box)
/// so that a warm start is never lost. Ties go to the trial vector, the
/// usual DE convention that lets the population drift across plateaus.
pub fn differential_evolution<F>(
    objective: F,
    bounds: &[(f64, f64)],
    settings: &DeSettings,
    seeds: &[Vec<f64>],
    mode: Parallelism,
) -> Result<DeResult>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    check(bounds, settings)?;
    let dim = bounds.len();
    let np = settings.population;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);

    let mut population: Vec<Vec<f64>> = (0..np)
        .map(|_| bounds.iter().map(|&(lo, hi)| sample_in(&mut rng, lo, hi)).collect())
        .collect();
    for (slot, seed) in population.iter_mut().zip(seeds) {
        if seed.len() != dim {
            return Err(Error::Config(format!(
                "warm start has {} parameters, expected {dim}",
                seed.len()
            )));
        }
        *slot = clip(seed, bounds);
    }
    let mut losses: Vec<f64> = par::map(&population, mode, |x| sanitize(objective(x)));
    let mut evaluations = np;
    let mut history = Vec::with_capacity(settings.generations + 1);
    history.push(min_loss(&losses));

    for _ in 0..settings.generations {
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let picks = pick_three(&mut rng, np, i);
                let forced = rng.gen_range(0..dim);
                (0..dim)
                    .map(|j| {
                        let (a, b, c) = (&population[picks[0]], &population[picks[1]], &population[picks[2]]);
                        if j == forced || rng.gen::<f64>() < settings.crossover {
                            let v = a[j] + settings.weight * (b[j] - c[j]);
                            v.clamp(bounds[j].0, bounds[j].1)
                        } else {
                            population[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let trial_losses: Vec<f64> = par::map(&trials, mode, |x| sanitize(objective(x)));
        evaluations += np;
        for (i, (trial, loss)) in trials.into_iter().zip(trial_losses).enumerate() {
            if loss <= losses[i] {
                population[i] = trial;
                losses[i] = loss;
            }
        }
        history.push(min_loss(&losses));
    }

    let best_index = (0..np)
        .min_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)))
        .expect("population is not empty");
    Ok(DeResult {
        best: population[best_index].clone(),
        loss: losses[best_index],
        history,
        evaluations,
    })
}

fn sample_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn clip(x: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    x.iter().zip(bounds).map(|(v, &(lo, hi))| v.clamp(lo, hi)).collect()
}

fn min_loss(losses: &[f64]) -> f64 {
    losses.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Three distinct indices, all different from `exclude`.
fn pick_three(rng: &mut ChaCha8Rng, n: usize, exclude: usize) -> [usize; 3] {
    let idx = sample(rng, n - 1, 3);
    let shift = |k: usize| if k >= exclude { k + 1 } else { k };
    [shift(idx.index(0)), shift(idx.index(1)), shift(idx.index(2))]
}
