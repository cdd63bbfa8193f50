//! Synthetic student records. The real class data is private, so these
//! stand in for it; every dataset produced here is named `synthetic-*`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, StudentRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub records: usize,
    pub schools: u32,
    /// Standard deviation of the label noise, in test-score points.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            records: 1125,
            schools: 3,
            noise: 5.0,
            seed: 0,
        }
    }
}

/// A class roster with raw (unscaled) features.
///
/// Each student gets a latent ability that drives the recognized ratio and
/// the test score. x9 sums the accumulated correctly and partially
/// recognized scores.
pub fn generate(config: &SyntheticConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.noise.max(0.0)).expect("finite noise");
    let records = (0..config.records)
        .map(|_| {
            let ability: f64 = rng.gen();
            let practice = rng.gen_range(1..=60u32);
            let mut correct = 0u32;
            let mut correct_score = 0.0;
            let mut partial_score = 0.0;
            for _ in 0..practice {
                let s = (ability * 0.6 + rng.gen::<f64>() * 0.5).min(1.0);
                if s > 0.5 {
                    correct += 1;
                    correct_score += s;
                } else {
                    partial_score += s;
                }
            }
            let feedback: [f64; 3] = std::array::from_fn(|_| rng.gen_range(1.0..=5.0));
            let mean_feedback = feedback.iter().sum::<f64>() / 3.0;
            let y = 35.0
                + 40.0 * ability
                + 2.5 * (mean_feedback - 1.0)
                + 0.2 * practice as f64
                + noise.sample(&mut rng);
            StudentRecord {
                x1: rng.gen_range(1..=config.schools.max(1)) as f64,
                x2: if rng.gen() { 5.0 } else { 6.0 },
                x3: if rng.gen() { 1.0 } else { 0.0 },
                x4: feedback[0],
                x5: feedback[1],
                x6: feedback[2],
                x7: practice as f64,
                x8: correct as f64 / practice as f64,
                x9: correct_score + partial_score,
                y: y.clamp(0.0, 100.0),
            }
        })
        .collect();
    Dataset::raw("synthetic-roster", records)
}

/// Records whose label is exactly `20 + 60 * x8`; all other features are
/// noise.
pub fn affine(records: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..records)
        .map(|_| {
            let x8: f64 = rng.gen();
            StudentRecord {
                x1: rng.gen_range(1..=3u32) as f64,
                x2: if rng.gen() { 5.0 } else { 6.0 },
                x3: if rng.gen() { 1.0 } else { 0.0 },
                x4: rng.gen_range(1.0..=5.0),
                x5: rng.gen_range(1.0..=5.0),
                x6: rng.gen_range(1.0..=5.0),
                x7: rng.gen_range(1..=60u32) as f64,
                x8,
                x9: rng.gen_range(0.0..=40.0),
                y: 20.0 + 60.0 * x8,
            }
        })
        .collect();
    Dataset::raw("synthetic-affine", records)
}
