use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fl::Dataset;

/// Gaussian blobs: one random center in `[0, 1]^d` per class, samples with
/// per-coordinate standard deviation `spread`, clipped to `[0, 1]`. Samples
/// come out grouped by class.
pub fn synthetic_dataset(num_classes: usize, samples_per_class: usize, feature_dim: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if num_classes == 0 || samples_per_class == 0 || feature_dim == 0 {
        return Err(Error::InvalidInput("synthetic dataset sizes must be positive".into()));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::InvalidInput(format!("cluster spread must be non-negative, got {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<f64> = (0..num_classes * feature_dim).map(|_| rng.random_range(0.0..=1.0)).collect();
    let noise = Normal::new(0.0, spread).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut features = Vec::with_capacity(num_classes * samples_per_class * feature_dim);
    let mut labels = Vec::with_capacity(num_classes * samples_per_class);
    for class in 0..num_classes {
        let center = &centers[class * feature_dim..(class + 1) * feature_dim];
        for _ in 0..samples_per_class {
            features.extend(center.iter().map(|c| (c + noise.sample(&mut rng)).clamp(0.0, 1.0)));
            labels.push(class);
        }
    }
    Dataset::new(features, labels, feature_dim, num_classes)
}
