//! Differential evolution (rand/1/bin) over Gaussian write-pulse parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mode::TemporalMode;
use crate::raman::{write_efficiency, ControlPulse, MemoryParams};

/// Delay and amplitude FWHM of a Gaussian write pulse, in units of the write
/// window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WritePulseGenes {
    pub tau0: f64,
    pub fwhm: f64,
}

impl WritePulseGenes {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.tau0, self.fwhm]
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        match x {
            [tau0, fwhm] => Ok(WritePulseGenes {
                tau0: *tau0,
                fwhm: *fwhm,
            }),
            _ => Err(invalid(format!("write-pulse genes need 2 values, got {}", x.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeConfig {
    #[serde(default = "defaults::population")]
    pub population: usize,
    #[serde(default = "defaults::mutation")]
    pub mutation: f64,
    #[serde(default = "defaults::crossover")]
    pub crossover: f64,
    #[serde(default = "defaults::generations")]
    pub generations: usize,
    /// Stop once the best fitness improves by less than this over `window`
    /// generations.
    #[serde(default = "defaults::tolerance")]
    pub tolerance: f64,
    #[serde(default = "defaults::window")]
    pub window: usize,
    /// Inclusive `(low, high)` per gene.
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

mod defaults {
    pub fn population() -> usize {
        20
    }
    pub fn mutation() -> f64 {
        0.8
    }
    pub fn crossover() -> f64 {
        0.9
    }
    pub fn generations() -> usize {
        100
    }
    pub fn tolerance() -> f64 {
        1e-4
    }
    pub fn window() -> usize {
        10
    }
}

impl DeConfig {
    pub fn new(bounds: Vec<(f64, f64)>, seed: u64) -> DeConfig {
        DeConfig {
            population: defaults::population(),
            mutation: defaults::mutation(),
            crossover: defaults::crossover(),
            generations: defaults::generations(),
            tolerance: defaults::tolerance(),
            window: defaults::window(),
            bounds,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(invalid(format!("population must be >= 4, got {}", self.population)));
        }
        if !(self.mutation > 0.0 && self.mutation <= 2.0) {
            return Err(invalid(format!("mutation factor must be in (0, 2], got {}", self.mutation)));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(invalid(format!("crossover rate must be in [0, 1], got {}", self.crossover)));
        }
        if self.generations == 0 {
            return Err(invalid("need at least one generation"));
        }
        if self.window == 0 || !(self.tolerance >= 0.0) {
            return Err(invalid("convergence window must be >= 1 and tolerance >= 0"));
        }
        if self.bounds.is_empty() {
            return Err(invalid("no genes to optimize"));
        }
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(invalid(format!("bad bounds for gene {i}: ({lo}, {hi})")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_genes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeResult {
    pub best_genes: Vec<f64>,
    pub best_fitness: f64,
    /// Generation 0 is the initial population.
    pub history: Vec<GenerationRecord>,
    /// True when the tolerance window stopped the run before the generation cap.
    pub converged: bool,
}

fn member_rng(seed: u64, generation: usize, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | member as u64);
    rng
}

fn evaluate<F>(fitness: &F, pop: &[Vec<f64>]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    pop.par_iter()
        .map(|x| match fitness(x) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(v) => Err(Error::Fitness {
                genes: x.clone(),
                reason: format!("non-finite fitness {v}"),
            }),
            Err(e) => Err(Error::Fitness {
                genes: x.clone(),
                reason: e.to_string(),
            }),
        })
        .collect()
}

fn record(generation: usize, pop: &[Vec<f64>], fit: &[f64]) -> GenerationRecord {
    // First index of the maximum, so ties resolve deterministically.
    let mut best = 0;
    for i in 1..fit.len() {
        if fit[i] > fit[best] {
            best = i;
        }
    }
    GenerationRecord {
        generation,
        best_fitness: fit[best],
        mean_fitness: fit.iter().sum::<f64>() / fit.len() as f64,
        best_genes: pop[best].clone(),
    }
}

/// Maximizes `fitness` over the box `config.bounds`.
///
/// Each (generation, member) pair draws from its own ChaCha stream, so the
/// result does not depend on how rayon schedules the fitness calls.
pub fn de_optimize<F>(fitness: F, config: &DeConfig) -> Result<DeResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    config.validate()?;
    let np = config.population;
    let dim = config.bounds.len();

    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|i| {
            let mut rng = member_rng(config.seed, 0, i);
            config
                .bounds
                .iter()
                .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
                .collect()
        })
        .collect();
    let mut fit = evaluate(&fitness, &pop)?;
    let mut history = vec![record(0, &pop, &fit)];
    let mut converged = false;

    for g in 1..=config.generations {
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let mut rng = member_rng(config.seed, g, i);
                let mut pick = |exclude: &[usize]| loop {
                    let r = rng.random_range(0..np);
                    if !exclude.contains(&r) {
                        break r;
                    }
                };
                let r1 = pick(&[i]);
                let r2 = pick(&[i, r1]);
                let r3 = pick(&[i, r1, r2]);
                let forced = rng.random_range(0..dim);
                (0..dim)
                    .map(|d| {
                        let (lo, hi) = config.bounds[d];
                        if d == forced || rng.random::<f64>() < config.crossover {
                            let v = pop[r1][d] + config.mutation * (pop[r2][d] - pop[r3][d]);
                            v.clamp(lo, hi)
                        } else {
                            pop[i][d]
                        }
                    })
                    .collect()
            })
            .collect();
        let trial_fit = evaluate(&fitness, &trials)?;
        for (i, (t, f)) in trials.into_iter().zip(trial_fit).enumerate() {
            if f >= fit[i] {
                pop[i] = t;
                fit[i] = f;
            }
        }
        history.push(record(g, &pop, &fit));
        if g >= config.window {
            let gain = history[g].best_fitness - history[g - config.window].best_fitness;
            if gain < config.tolerance {
                converged = true;
                break;
            }
        }
    }
    let last = history.last().expect("history has the initial generation");
    Ok(DeResult {
        best_genes: last.best_genes.clone(),
        best_fitness: last.best_fitness,
        converged,
        history,
    })
}

/// `peak * exp(-4 ln2 (t - tau0)^2 / fwhm^2)` sampled on `n` bins over
/// `[0, duration)`.
pub fn gaussian_write_pulse(genes: WritePulseGenes, n: usize, duration: f64, peak: f64) -> Result<ControlPulse> {
    if !(genes.fwhm > 0.0) || !genes.fwhm.is_finite() {
        return Err(invalid(format!("pulse FWHM must be > 0, got {}", genes.fwhm)));
    }
    if !(0.0..=duration).contains(&genes.tau0) {
        return Err(invalid(format!(
            "pulse delay {} outside the write window [0, {duration}]",
            genes.tau0
        )));
    }
    ControlPulse::gaussian(n, duration, genes.tau0, genes.fwhm, peak)
}

/// Storage efficiency of the Gaussian write pulse described by `genes`.
pub fn write_fitness(params: &MemoryParams, genes: WritePulseGenes, input_mode: &TemporalMode, peak: f64) -> Result<f64> {
    let duration = input_mode.dt() * input_mode.len() as f64;
    let pulse = gaussian_write_pulse(genes, params.n_t, duration, peak)?;
    write_efficiency(params, &pulse, input_mode)
}

/// Runs DE on the write efficiency and returns the optimized genes alongside
/// the run record.
pub fn optimize_write_pulse(
    params: &MemoryParams,
    input_mode: &TemporalMode,
    peak: f64,
    config: &DeConfig,
) -> Result<(WritePulseGenes, DeResult)> {
    if config.bounds.len() != 2 {
        return Err(invalid("write-pulse optimization needs bounds for (tau0, fwhm)"));
    }
    if config.bounds[1].0 <= 0.0 {
        return Err(invalid("FWHM lower bound must be > 0"));
    }
    let res = de_optimize(
        |x| write_fitness(params, WritePulseGenes::from_slice(x)?, input_mode, peak),
        config,
    )?;
    Ok((WritePulseGenes::from_slice(&res.best_genes)?, res))
}

pub fn history_csv(result: &DeResult) -> String {
    let dim = result.best_genes.len();
    let mut s = String::from("generation,best_fitness,mean_fitness");
    for d in 0..dim {
        s.push_str(&format!(",best_gene_{d}"));
    }
    s.push('\n');
    for r in &result.history {
        s.push_str(&format!("{},{},{}", r.generation, r.best_fitness, r.mean_fitness));
        for g in &r.best_genes {
            s.push_str(&format!(",{g}"));
        }
        s.push('\n');
    }
    s
}
