use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples stored row-major with features in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    feature_dim: usize,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, feature_dim: usize, num_classes: usize) -> Result<Self> {
        if feature_dim == 0 || num_classes == 0 {
            return Err(Error::InvalidInput("dataset needs positive feature_dim and num_classes".into()));
        }
        if features.len() != labels.len() * feature_dim {
            return Err(Error::ShapeMismatch { expected: labels.len() * feature_dim, got: features.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidInput(format!("label {bad} out of range for {num_classes} classes")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset features must be finite".into()));
        }
        Ok(Self { features, labels, feature_dim, num_classes })
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

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    /// Copies the listed samples, in order, into a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.feature_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidInput(format!("sample {i} out of range for {} samples", self.len())));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Ok(Self { features, labels, feature_dim: self.feature_dim, num_classes: self.num_classes })
    }
}
