use rand_distr::{Distribution, StandardNormal};

use crate::data::DataContainer;
use crate::seeding;

const CENTER_SPACING: f64 = 3.0;
const NOISE_SIGMA: f64 = 1.0;

/// Generates `num_classes * per_class` points from class-specific Gaussian
/// blobs. Class `c` is centered on coordinate axis `c % dim` at magnitude
/// `3 * (1 + c / dim)`, so class means are linearly separable for any class
/// count. Records are ordered class-major; deterministic per seed.
///
/// All arguments must be positive.
pub fn generate_synthetic(
    num_classes: usize,
    per_class: usize,
    dim: usize,
    seed: u64,
) -> DataContainer {
    assert!(
        num_classes > 0 && per_class > 0 && dim > 0,
        "generate_synthetic arguments must be positive"
    );
    let mut rng = seeding::rng_from(seed);
    let n = num_classes * per_class;
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for class in 0..num_classes {
        let axis = class % dim;
        let magnitude = CENTER_SPACING * (1 + class / dim) as f64;
        for _ in 0..per_class {
            for j in 0..dim {
                let center = if j == axis { magnitude } else { 0.0 };
                let noise: f64 = StandardNormal.sample(&mut rng);
                features.push(center + NOISE_SIGMA * noise);
            }
            labels.push(class);
        }
    }
    DataContainer::new(features, dim, labels, num_classes)
        .expect("generated container is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_balance() {
        let data = generate_synthetic(10, 600, 20, 0);
        assert_eq!(data.len(), 6000);
        assert_eq!(data.feature_dim(), 20);
        assert_eq!(data.num_classes(), 10);
        assert!(data.label_counts().iter().all(|&c| c == 600));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic(3, 10, 4, 42);
        let b = generate_synthetic(3, 10, 4, 42);
        assert_eq!(a, b);
        let c = generate_synthetic(3, 10, 4, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn class_means_sit_near_their_centers() {
        let data = generate_synthetic(2, 500, 2, 7);
        let mut sums = [[0.0f64; 2]; 2];
        for i in 0..data.len() {
            let row = data.row(i);
            let l = data.label(i);
            sums[l][0] += row[0];
            sums[l][1] += row[1];
        }
        // class 0 centered at (3, 0), class 1 at (0, 3); sample means within
        // a few standard errors of that
        assert!((sums[0][0] / 500.0 - 3.0).abs() < 0.2);
        assert!((sums[0][1] / 500.0).abs() < 0.2);
        assert!((sums[1][0] / 500.0).abs() < 0.2);
        assert!((sums[1][1] / 500.0 - 3.0).abs() < 0.2);
    }
}
