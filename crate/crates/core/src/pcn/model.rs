use ndarray::{Array1, Array2};
use rand::Rng as _;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// A generative predictive coding network.
///
/// Layer 0 is the sensory layer (width `d`), layer `L` the memory layer. The
/// weight matrix `θ^l` (stored at `weights[l - 1]`) has shape `n^{l-1} × n^l`
/// and carries the top-down prediction from layer `l` to layer `l - 1`. The
/// memory vector `b` is the prediction for the memory layer itself.
#[derive(Debug, Clone, PartialEq)]
pub struct PcnModel {
    widths: Vec<usize>,
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) memory: Array1<f64>,
    activation: Activation,
}

impl PcnModel {
    /// Seeded initialization: every entry of `θ^l` is uniform on
    /// `[-1/√n^l, 1/√n^l]` (fan-in of the top-down map), and `b` likewise with
    /// fan-in `n^L`.
    pub fn init(widths: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        check_widths(widths)?;
        let mut rng = rng::stream(seed, Purpose::ModelInit, 0);
        let weights = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[1] as f64).sqrt();
                Array2::from_shape_simple_fn((w[0], w[1]), || rng.random_range(-bound..bound))
            })
            .collect();
        let top = *widths.last().unwrap();
        let bound = 1.0 / (top as f64).sqrt();
        let memory = Array1::from_shape_simple_fn(top, || rng.random_range(-bound..bound));
        Ok(Self {
            widths: widths.to_vec(),
            weights,
            memory,
            activation,
        })
    }

    /// Assemble a model from explicit parameters, validating every shape.
    pub fn from_parts(
        weights: Vec<Array2<f64>>,
        memory: Array1<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArchitecture("a model needs at least one weight layer".into()));
        }
        let mut widths = vec![weights[0].nrows()];
        for (l, w) in weights.iter().enumerate() {
            if w.nrows() != widths[l] {
                return Err(Error::dim("weight rows", widths[l], w.nrows()));
            }
            widths.push(w.ncols());
        }
        check_widths(&widths)?;
        if memory.len() != *widths.last().unwrap() {
            return Err(Error::dim("memory vector", *widths.last().unwrap(), memory.len()));
        }
        let model = Self {
            widths,
            weights,
            memory,
            activation,
        };
        if !model.is_finite() {
            return Err(Error::InvalidInput("model parameters must be finite".into()));
        }
        Ok(model)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Number of weight layers `L`.
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn sensory_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// `θ^l` for `l` in `1..=L`.
    pub fn weight(&self, l: usize) -> &Array2<f64> {
        &self.weights[l - 1]
    }

    pub fn weight_mut(&mut self, l: usize) -> &mut Array2<f64> {
        &mut self.weights[l - 1]
    }

    pub fn memory(&self) -> &Array1<f64> {
        &self.memory
    }

    pub fn memory_mut(&mut self) -> &mut Array1<f64> {
        &mut self.memory
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.memory.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.memory.iter().all(|v| v.is_finite())
    }
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::InvalidArchitecture(format!(
            "need a sensory and at least one more layer, got widths {widths:?}"
        )));
    }
    if widths.contains(&0) {
        return Err(Error::InvalidArchitecture(format!(
            "layer widths must be positive, got {widths:?}"
        )));
    }
    Ok(())
}
