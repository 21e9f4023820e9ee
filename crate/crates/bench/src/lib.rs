//! Shared fixtures for the criterion benches.

use cul_core::unlearn::*;
use cul_core::*;

/// Unit quadratic pair used across solver benches.
pub fn unit_quad() -> QuadraticPair {
    make_quadratic_pair(
        ParamVector::new(vec![0.0, 0.0]).expect("finite"),
        ParamVector::new(vec![1.0, 0.0]).expect("finite"),
    )
    .expect("valid pair")
}

/// Small pretrained-free toy task (random original model) for objective
/// throughput benches.
pub fn small_toy_task() -> UnlearnTask {
    let cfg = DatasetConfig {
        n_classes: 4,
        per_class: 8,
        size: 8,
        seed: 5,
    };
    let (forget, retain) = build_dataset(&cfg).expect("dataset");
    let crop = CropSpec::new(CropPattern::Center, 0.5).expect("crop");
    let model = ToyModel::init(ArchConfig::for_image_dim(64), 9);
    UnlearnTask::new(model, forget, retain, crop, 8, NoiseMode::ThroughOriginal).expect("task")
}

/// Deterministic scatter of objective pairs for filter benches.
pub fn random_points(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = Rng64::new(seed);
    (0..n)
        .map(|_| (rng.next_f64() * 100.0, rng.next_f64() * 100.0))
        .collect()
}
