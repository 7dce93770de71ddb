use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
}

impl ModelDims {
    pub fn new(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || num_classes == 0 {
            return Err(Error::InvalidInput(format!(
                "model dims must be positive, got ({input_dim}, {hidden_dim}, {num_classes})"
            )));
        }
        Ok(Self { input_dim, hidden_dim, num_classes })
    }

    pub fn param_count(&self) -> usize {
        self.input_dim * self.hidden_dim + self.hidden_dim + self.hidden_dim * self.num_classes + self.num_classes
    }

    // Offsets of the blocks in the flat layout [W1 | b1 | W2 | b2].
    pub(crate) fn b1_offset(&self) -> usize {
        self.input_dim * self.hidden_dim
    }

    pub(crate) fn w2_offset(&self) -> usize {
        self.b1_offset() + self.hidden_dim
    }

    pub(crate) fn b2_offset(&self) -> usize {
        self.w2_offset() + self.hidden_dim * self.num_classes
    }
}

/// Global model held by the server. `W1` is `hidden x input` and `W2` is
/// `classes x hidden`, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalModel {
    pub dims: ModelDims,
    pub params: Vec<f64>,
    /// Number of aggregations applied since initialization.
    pub version: u64,
}

impl GlobalModel {
    pub fn from_params(dims: ModelDims, params: Vec<f64>, version: u64) -> Result<Self> {
        if params.len() != dims.param_count() {
            return Err(Error::ShapeMismatch { expected: dims.param_count(), got: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("model parameters must be finite".into()));
        }
        Ok(Self { dims, params, version })
    }
}

/// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
pub fn init_model(dims: ModelDims, seed: u64) -> GlobalModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![0.0; dims.param_count()];
    let limit1 = 1.0 / (dims.input_dim as f64).sqrt();
    for w in &mut params[..dims.b1_offset()] {
        *w = rng.random_range(-limit1..=limit1);
    }
    let limit2 = 1.0 / (dims.hidden_dim as f64).sqrt();
    for w in &mut params[dims.w2_offset()..dims.b2_offset()] {
        *w = rng.random_range(-limit2..=limit2);
    }
    GlobalModel { dims, params, version: 0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_arithmetic() {
        let dims = ModelDims::new(4, 3, 2).unwrap();
        assert_eq!(dims.param_count(), 23);
        assert!(ModelDims::new(0, 3, 2).is_err());
    }

    #[test]
    fn init_is_seeded_with_zero_biases() {
        let dims = ModelDims::new(5, 4, 3).unwrap();
        let a = init_model(dims, 7);
        let b = init_model(dims, 7);
        assert_eq!(a, b);
        assert_ne!(a.params, init_model(dims, 8).params);
        assert_eq!(a.version, 0);
        assert!(a.params[dims.b1_offset()..dims.w2_offset()].iter().all(|&b| b == 0.0));
        assert!(a.params[dims.b2_offset()..].iter().all(|&b| b == 0.0));
        let limit = 1.0 / 5f64.sqrt();
        assert!(a.params[..dims.b1_offset()].iter().all(|w| w.abs() <= limit));
    }
}
