use rand::seq::SliceRandom;

use crate::error::{FedError, Result};
use crate::seeding;

/// Dense dataset: an `N x d` row-major feature matrix and `N` integer labels
/// in `[0, num_classes)`. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct DataContainer {
    features: Vec<f64>,
    feature_dim: usize,
    labels: Vec<usize>,
    num_classes: usize,
}

impl DataContainer {
    pub fn new(
        features: Vec<f64>,
        feature_dim: usize,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if feature_dim == 0 {
            return Err(FedError::Argument("feature_dim must be positive".into()));
        }
        if features.len() != labels.len() * feature_dim {
            return Err(FedError::Shape(format!(
                "feature buffer holds {} values, expected {} rows x {} dims",
                features.len(),
                labels.len(),
                feature_dim
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(FedError::Argument(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            features,
            feature_dim,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Record count per class.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Copies the given rows into a new container (same class space).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.feature_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(FedError::Argument(format!(
                    "row index {i} out of bounds for {} rows",
                    self.len()
                )));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(features, self.feature_dim, labels, self.num_classes)
    }
}

/// Seeded shuffle-then-slice split into `(train, test)` parts.
///
/// The test part takes `round(len * test_fraction)` rows; the split is a
/// disjoint, exhaustive partition of the input rows.
pub fn train_test_split(
    data: &DataContainer,
    test_fraction: f64,
    seed: u64,
) -> Result<(DataContainer, DataContainer)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(FedError::Argument(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = data.len();
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut seeding::rng_from(seed));
    let test_n = (n as f64 * test_fraction).round() as usize;
    let split = n - test_n;
    let train = data.subset(&indices[..split])?;
    let test = data.subset(&indices[split..])?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> DataContainer {
        let features: Vec<f64> = (0..n * 2).map(|v| v as f64).collect();
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        DataContainer::new(features, 2, labels, 3).unwrap()
    }

    #[test]
    fn rejects_label_out_of_range() {
        let err = DataContainer::new(vec![0.0, 1.0], 2, vec![5], 3).unwrap_err();
        assert!(matches!(err, FedError::Argument(_)));
    }

    #[test]
    fn rejects_shape_mismatch() {
        let err = DataContainer::new(vec![0.0; 5], 2, vec![0, 1], 3).unwrap_err();
        assert!(matches!(err, FedError::Shape(_)));
    }

    #[test]
    fn split_sizes() {
        let data = toy(100);
        let (train, test) = train_test_split(&data, 0.2, 0).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
    }

    #[test]
    fn split_is_a_partition() {
        let data = toy(37);
        let (train, test) = train_test_split(&data, 0.25, 1).unwrap();
        assert_eq!(train.len() + test.len(), 37);
        // Every source row appears exactly once across the two outputs. Rows
        // are unique in `toy` (feature values encode the row index).
        let mut seen: Vec<f64> = train
            .labels()
            .iter()
            .enumerate()
            .map(|(i, _)| train.row(i)[0])
            .chain(test.labels().iter().enumerate().map(|(i, _)| test.row(i)[0]))
            .collect();
        seen.sort_by(f64::total_cmp);
        let expected: Vec<f64> = (0..37).map(|i| (i * 2) as f64).collect();
        assert_eq!(seen, expected);
    }

    #[test]
    fn split_is_deterministic() {
        let data = toy(50);
        let a = train_test_split(&data, 0.3, 9).unwrap();
        let b = train_test_split(&data, 0.3, 9).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let data = toy(10);
        assert!(train_test_split(&data, 0.0, 0).is_err());
        assert!(train_test_split(&data, 1.0, 0).is_err());
        assert!(train_test_split(&data, -0.5, 0).is_err());
    }

    #[test]
    fn subset_gathers_rows() {
        let data = toy(5);
        let sub = data.subset(&[4, 1]).unwrap();
        assert_eq!(sub.len(), 2);
        assert_eq!(sub.row(0), data.row(4));
        assert_eq!(sub.row(1), data.row(1));
        assert!(data.subset(&[7]).is_err());
    }
}
