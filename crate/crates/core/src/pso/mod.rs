//! Global-best particle swarm optimization over a bounded box, with a
//! structural repair step that keeps every particle feasible.

mod kb;

pub use kb::{
    decode_kb, encode_kb, mse as kb_mse, tune_kb, KbEncoding, Slot, Tunable, TuneConfig, TuneResult,
    TuningData,
};

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PsoError {
    #[error("invalid bounds in dimension {dim}: lower {lower} must be below upper {upper}")]
    InvalidBounds { dim: usize, lower: f64, upper: f64 },
    #[error("swarm size must be at least 2, got {0}")]
    SwarmTooSmall(usize),
    #[error("at least one iteration is required")]
    NoIterations,
    #[error("seed position has {got} dimensions, expected {expected}")]
    SeedDimension { expected: usize, got: usize },
    #[error("fitness is {value} at position {position:?}")]
    FitnessNotFinite { position: Vec<f64>, value: f64 },
    #[error("tuning dataset is empty")]
    EmptyDataset,
    #[error("tuning data: {0}")]
    Data(String),
    #[error("{0}")]
    UnknownReference(String),
    #[error("document is invalid: {0}")]
    InvalidDocument(String),
}

/// A structural constraint restored after every move.
#[derive(Debug, Clone, PartialEq)]
pub enum RepairRule {
    /// Sort the dimensions in `range` ascending (shape breakpoints).
    Ascending(Range<usize>),
    /// Keep dimension `dim` at or above `min` (a Gaussian width).
    AtLeast { dim: usize, min: f64 },
}

/// Search box plus repair rules.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub repair: Vec<RepairRule>,
}

impl ParameterSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, PsoError> {
        assert_eq!(lower.len(), upper.len(), "bounds must have equal length");
        for (dim, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) {
                return Err(PsoError::InvalidBounds {
                    dim,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(Self {
            lower,
            upper,
            repair: Vec::new(),
        })
    }

    /// The cube `[lower, upper]^dims`.
    pub fn uniform(dims: usize, lower: f64, upper: f64) -> Result<Self, PsoError> {
        Self::new(vec![lower; dims], vec![upper; dims])
    }

    pub fn with_repair(mut self, rule: RepairRule) -> Self {
        self.repair.push(rule);
        self
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    /// Applies the repair rules. Idempotent.
    pub fn repair(&self, x: &mut [f64]) {
        for rule in &self.repair {
            match rule {
                RepairRule::Ascending(r) => x[r.clone()].sort_by(f64::total_cmp),
                RepairRule::AtLeast { dim, min } => x[*dim] = x[*dim].max(*min),
            }
        }
    }

    /// Repair, then clamp into the box.
    pub fn project(&self, x: &mut [f64]) {
        self.repair(x);
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| (*lo..=*hi).contains(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsoConfig {
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity limit as a fraction of each dimension's range.
    pub velocity_clamp: f64,
    pub swarm_size: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            velocity_clamp: 0.5,
            swarm_size: 30,
            iterations: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
}

/// Swarm state. `+inf` fitness marks an infeasible position; NaN and `-inf`
/// are rejected.
#[derive(Debug, Clone)]
pub struct Swarm {
    spec: ParameterSpec,
    config: PsoConfig,
    rng: ChaCha8Rng,
    vmax: Vec<f64>,
    pub particles: Vec<Particle>,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
}

fn checked(position: &[f64], value: f64) -> Result<f64, PsoError> {
    if value.is_nan() || value == f64::NEG_INFINITY {
        Err(PsoError::FitnessNotFinite {
            position: position.to_vec(),
            value,
        })
    } else {
        Ok(value)
    }
}

fn evaluate_all<F>(positions: &[Vec<f64>], fitness: &F) -> Result<Vec<f64>, PsoError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let values: Vec<f64> = positions.par_iter().map(|p| fitness(p)).collect();
    positions
        .iter()
        .zip(values)
        .map(|(p, v)| checked(p, v))
        .collect()
}

impl Swarm {
    /// Samples the initial swarm. `seeds` replace the first random
    /// positions (after projection into the box).
    pub fn new<F>(
        spec: ParameterSpec,
        config: PsoConfig,
        seeds: &[Vec<f64>],
        fitness: &F,
    ) -> Result<Self, PsoError>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        if config.swarm_size < 2 {
            return Err(PsoError::SwarmTooSmall(config.swarm_size));
        }
        if config.iterations == 0 {
            return Err(PsoError::NoIterations);
        }
        let dims = spec.dims();
        if let Some(s) = seeds.iter().find(|s| s.len() != dims) {
            return Err(PsoError::SeedDimension {
                expected: dims,
                got: s.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let vmax: Vec<f64> = spec
            .lower
            .iter()
            .zip(&spec.upper)
            .map(|(lo, hi)| config.velocity_clamp * (hi - lo))
            .collect();

        let mut positions = Vec::with_capacity(config.swarm_size);
        let mut velocities = Vec::with_capacity(config.swarm_size);
        for i in 0..config.swarm_size {
            let mut x: Vec<f64> = (0..dims)
                .map(|d| rng.gen_range(spec.lower[d]..=spec.upper[d]))
                .collect();
            let v: Vec<f64> = vmax.iter().map(|&m| rng.gen_range(-m..=m)).collect();
            if let Some(seed) = seeds.get(i) {
                x.clone_from(seed);
            }
            spec.project(&mut x);
            positions.push(x);
            velocities.push(v);
        }
        let values = evaluate_all(&positions, fitness)?;
        let particles: Vec<Particle> = positions
            .into_iter()
            .zip(velocities)
            .zip(&values)
            .map(|((position, velocity), &f)| Particle {
                best_position: position.clone(),
                position,
                velocity,
                best_fitness: f,
            })
            .collect();
        let (best_position, best_fitness) = best_of(&particles);
        Ok(Self {
            spec,
            config,
            rng,
            vmax,
            particles,
            best_position,
            best_fitness,
        })
    }

    pub fn spec(&self) -> &ParameterSpec {
        &self.spec
    }

    /// One synchronous update: move every particle, evaluate all of them,
    /// then refresh personal and global bests.
    pub fn step<F>(&mut self, fitness: &F) -> Result<(), PsoError>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let PsoConfig {
            inertia,
            cognitive,
            social,
            ..
        } = self.config;
        for p in &mut self.particles {
            for d in 0..p.position.len() {
                let r1: f64 = self.rng.gen();
                let r2: f64 = self.rng.gen();
                let v = inertia * p.velocity[d]
                    + cognitive * r1 * (p.best_position[d] - p.position[d])
                    + social * r2 * (self.best_position[d] - p.position[d]);
                p.velocity[d] = v.clamp(-self.vmax[d], self.vmax[d]);
                p.position[d] += p.velocity[d];
            }
            self.spec.project(&mut p.position);
        }
        let positions: Vec<Vec<f64>> = self.particles.iter().map(|p| p.position.clone()).collect();
        let values = evaluate_all(&positions, fitness)?;
        for (p, f) in self.particles.iter_mut().zip(values) {
            if f < p.best_fitness {
                p.best_fitness = f;
                p.best_position.clone_from(&p.position);
            }
        }
        let (pos, f) = best_of(&self.particles);
        if f < self.best_fitness {
            self.best_fitness = f;
            self.best_position = pos;
        }
        Ok(())
    }
}

/// Lowest personal best; ties go to the lowest index.
fn best_of(particles: &[Particle]) -> (Vec<f64>, f64) {
    let best = particles
        .iter()
        .reduce(|a, b| if b.best_fitness < a.best_fitness { b } else { a })
        .expect("swarm is never empty");
    (best.best_position.clone(), best.best_fitness)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    /// Global-best fitness after each iteration.
    pub history: Vec<f64>,
}

/// Minimizes `fitness` over `spec`.
pub fn optimize<F>(spec: &ParameterSpec, fitness: F, config: &PsoConfig) -> Result<PsoResult, PsoError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    optimize_seeded(spec, fitness, config, &[])
}

/// [`optimize`] with known positions injected into the initial swarm.
pub fn optimize_seeded<F>(
    spec: &ParameterSpec,
    fitness: F,
    config: &PsoConfig,
    seeds: &[Vec<f64>],
) -> Result<PsoResult, PsoError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut swarm = Swarm::new(spec.clone(), *config, seeds, &fitness)?;
    let mut history = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        swarm.step(&fitness)?;
        history.push(swarm.best_fitness);
    }
    Ok(PsoResult {
        best_position: swarm.best_position,
        best_fitness: swarm.best_fitness,
        history,
    })
}
