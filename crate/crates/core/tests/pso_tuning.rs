use aifml_core::fixtures;
use aifml_core::fml::validate;
use aifml_core::pso::*;
use aifml_core::pso::kb_mse as mse;

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn cfg(seed: u64, iterations: usize) -> PsoConfig {
    PsoConfig {
        seed,
        iterations,
        ..PsoConfig::default()
    }
}

#[test]
fn sphere_reaches_1e3_for_ten_seeds() {
    let spec = ParameterSpec::uniform(3, -5.0, 5.0).unwrap();
    for seed in 0..10 {
        let r = optimize(&spec, sphere, &cfg(seed, 200)).unwrap();
        assert!(r.best_fitness < 1e-3, "seed {seed}: {}", r.best_fitness);
    }
}

#[test]
fn history_is_non_increasing_for_twenty_seeds() {
    let spec = ParameterSpec::uniform(5, -3.0, 7.0).unwrap();
    let rastrigin = |x: &[f64]| {
        x.iter()
            .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos() + 10.0)
            .sum::<f64>()
    };
    for seed in 100..120 {
        let r = optimize(&spec, rastrigin, &cfg(seed, 80)).unwrap();
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]), "seed {seed}");
        assert_eq!(*r.history.last().unwrap(), r.best_fitness);
    }
}

#[test]
fn particles_stay_feasible_every_step() {
    let spec = ParameterSpec::uniform(6, 0.0, 1.0)
        .unwrap()
        .with_repair(RepairRule::Ascending(0..3))
        .with_repair(RepairRule::Ascending(3..6));
    // pulls points toward an unsorted target so repair has work to do
    let target = [0.9, 0.1, 0.5, 0.7, 0.2, 0.4];
    let f = |x: &[f64]| x.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let mut swarm = Swarm::new(spec.clone(), cfg(9, 40), &[], &f).unwrap();
    let mut last = swarm.best_fitness;
    for _ in 0..40 {
        swarm.step(&f).unwrap();
        for p in &swarm.particles {
            assert!(spec.contains(&p.position));
            assert!(p.position[0..3].windows(2).all(|w| w[0] <= w[1]));
            assert!(p.position[3..6].windows(2).all(|w| w[0] <= w[1]));
        }
        let min_pbest = swarm.particles.iter().map(|p| p.best_fitness).fold(f64::INFINITY, f64::min);
        assert_eq!(swarm.best_fitness, min_pbest);
        assert!(swarm.best_fitness <= last);
        last = swarm.best_fitness;
    }
}

// Cell midpoints. Sampling the exact domain ends would make any candidate
// whose shoulder peak leaves the boundary uncovered there, hence infeasible.
fn grid(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| vec![(i as f64 + 0.5) / n as f64]).collect()
}

#[test]
fn self_generated_data_is_already_optimal() {
    let doc = fixtures::tuning_reference();
    let data = TuningData::generate(&doc, &grid(50), 1001).unwrap();
    let config = TuneConfig {
        pso: cfg(4, 5),
        ..TuneConfig::default()
    };
    let r = tune_kb(&doc, &data, &config).unwrap();
    assert_eq!(r.initial_mse, 0.0);
    assert!(r.final_mse <= 1e-12);
    assert!(validate(&r.document).is_empty());
}

#[test]
fn shifted_triangles_recover_tenfold() {
    let reference = fixtures::tuning_reference();
    let shifted = fixtures::tuning_shifted();
    let data = TuningData::generate(&reference, &grid(50), 1001).unwrap();
    let initial = mse(&shifted, &data, 1001);
    assert!(initial.is_finite() && initial > 0.0);
    for seed in 0..5 {
        let config = TuneConfig {
            pso: cfg(seed, 100),
            tunable: Tunable::Inputs,
            ..TuneConfig::default()
        };
        let r = tune_kb(&shifted, &data, &config).unwrap();
        assert_eq!(r.initial_mse, initial);
        assert!(r.final_mse < 0.1 * initial, "seed {seed}: {} vs {initial}", r.final_mse);
        assert!((mse(&r.document, &data, 1001) - r.final_mse).abs() < 1e-15);
        assert!(validate(&r.document).is_empty());
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }
}
