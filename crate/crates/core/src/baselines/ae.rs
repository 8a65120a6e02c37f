use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;

use crate::activation::Activation;
use crate::data::ExemplarSet;
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{self, Purpose};

use super::mhn::reclamp;

/// A feed-forward autoencoder `d → n₁ → … → d`. Hidden layers use
/// `activation`; the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct AeModel {
    widths: Vec<usize>,
    /// `weights[i]` maps layer `i` to layer `i + 1` and is `n_{i+1} × n_i`.
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) biases: Vec<Array1<f64>>,
    activation: Activation,
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 3 {
        return Err(Error::InvalidArchitecture(format!(
            "an autoencoder needs input, hidden and output widths, got {widths:?}"
        )));
    }
    if widths.contains(&0) {
        return Err(Error::InvalidArchitecture(format!("zero width in {widths:?}")));
    }
    if widths[0] != widths[widths.len() - 1] {
        return Err(Error::InvalidArchitecture(format!(
            "input width {} differs from output width {}",
            widths[0],
            widths[widths.len() - 1]
        )));
    }
    Ok(())
}

impl AeModel {
    /// Weights uniform on `±1/√fan_in`, biases zero.
    pub fn init(widths: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        check_widths(widths)?;
        let mut rng = rng::stream(seed, Purpose::Autoencoder, 0);
        let weights = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Array2::from_shape_simple_fn((w[1], w[0]), || rng.random_range(-bound..bound))
            })
            .collect();
        let biases = widths[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Ok(Self {
            widths: widths.to_vec(),
            weights,
            biases,
            activation,
        })
    }

    pub fn from_parts(weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>, activation: Activation) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::InvalidArchitecture("weights and biases must pair up".into()));
        }
        let mut widths = vec![weights[0].ncols()];
        for (w, b) in weights.iter().zip(&biases) {
            if w.ncols() != *widths.last().unwrap() {
                return Err(Error::dim("weight columns", *widths.last().unwrap(), w.ncols()));
            }
            if b.len() != w.nrows() {
                return Err(Error::dim("bias length", w.nrows(), b.len()));
            }
            widths.push(w.nrows());
        }
        check_widths(&widths)?;
        Ok(Self {
            widths,
            weights,
            biases,
            activation,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn dim(&self) -> usize {
        self.widths[0]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Pre-activations of every layer for a batch of columns.
    fn forward(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let last = self.weights.len() - 1;
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut h = x.to_owned();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.dot(&h);
            z += &b.view().insert_axis(Axis(1));
            h = if i == last { z.clone() } else { self.activation.map(z.view()) };
            pre.push(z);
        }
        pre
    }

    /// The reconstruction of every column of `x`.
    pub fn reconstruct(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.forward(x).pop().expect("at least one layer")
    }
}

/// Gradient of the loss with respect to every weight and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct AeGrad {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl AeGrad {
    fn add_assign(&mut self, other: &AeGrad) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }
}

/// Loss `1/(2N) Σ_k ‖ae(x_k) − x_k‖²` over the columns of `data`, and its
/// gradient by reverse-mode differentiation.
pub fn ae_loss_and_grad(model: &AeModel, data: ArrayView2<'_, f64>) -> Result<(f64, AeGrad)> {
    if data.nrows() != model.dim() {
        return Err(Error::dim("input dimension", model.dim(), data.nrows()));
    }
    if data.ncols() == 0 {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let n = data.ncols() as f64;
    let parts = par::map_chunks(data.ncols(), par::BATCH_CHUNK, |r| {
        chunk_loss_and_grad(model, data.slice(s![.., r]), n)
    });
    let mut iter = parts.into_iter();
    let (mut loss, mut grad) = iter.next().expect("non-empty");
    for (l, g) in iter {
        loss += l;
        grad.add_assign(&g);
    }
    Ok((loss, grad))
}

fn chunk_loss_and_grad(model: &AeModel, x: ArrayView2<'_, f64>, n: f64) -> (f64, AeGrad) {
    let pre = model.forward(x);
    let depth = model.weights.len();
    let out = &pre[depth - 1];
    let mut delta = out - &x;
    let loss = delta.iter().map(|v| v * v).sum::<f64>() / (2.0 * n);
    delta /= n;
    let mut weights = vec![Array2::zeros((0, 0)); depth];
    let mut biases = vec![Array1::zeros(0); depth];
    for i in (0..depth).rev() {
        let input = if i == 0 {
            x.to_owned()
        } else {
            model.activation.map(pre[i - 1].view())
        };
        weights[i] = delta.dot(&input.t());
        biases[i] = delta.sum_axis(Axis(1));
        if i > 0 {
            let mut back = model.weights[i].t().dot(&delta);
            model.activation.scale_by_derivative(pre[i - 1].view(), &mut back);
            delta = back;
        }
    }
    (loss, AeGrad { weights, biases })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AeTrace {
    /// Loss before each epoch's update.
    pub losses: Vec<f64>,
}

impl AeTrace {
    /// Whether the loss never rises over the last `fraction` of epochs (within `tol`).
    pub fn settles(&self, fraction: f64, tol: f64) -> bool {
        let n = self.losses.len();
        let start = n - ((n as f64 * fraction).ceil() as usize).min(n);
        self.losses[start..].windows(2).all(|w| w[1] <= w[0] + tol)
    }
}

/// Full-batch gradient descent on the reconstruction loss.
pub fn ae_fit(model: &mut AeModel, data: &ExemplarSet, epochs: usize, lr: f64) -> Result<AeTrace> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::InvalidInput(format!("learning rate {lr} is out of range")));
    }
    if data.is_empty() {
        return Err(Error::InvalidInput("cannot train on an empty dataset".into()));
    }
    let mut trace = AeTrace::default();
    for epoch in 0..epochs {
        let (loss, grad) = ae_loss_and_grad(model, data.matrix().view())?;
        if !loss.is_finite() {
            return Err(Error::InvalidInput(format!("autoencoder training diverged at epoch {epoch}")));
        }
        trace.losses.push(loss);
        if lr > 0.0 {
            for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
                w.scaled_add(-lr, g);
            }
            for (b, g) in model.biases.iter_mut().zip(&grad.biases) {
                b.scaled_add(-lr, g);
            }
        }
    }
    Ok(trace)
}

/// Seeded relu autoencoder trained for `epochs` full-batch steps.
pub fn ae_train(widths: &[usize], data: &ExemplarSet, epochs: usize, lr: f64, seed: u64) -> Result<(AeModel, AeTrace)> {
    check_widths(widths)?;
    if widths[0] != data.dim() {
        return Err(Error::InvalidArchitecture(format!(
            "autoencoder width {} does not match data dimension {}",
            widths[0],
            data.dim()
        )));
    }
    let mut model = AeModel::init(widths, Activation::Relu, seed)?;
    let trace = ae_fit(&mut model, data, epochs, lr)?;
    Ok((model, trace))
}

/// Feed each output back as input `iters` times, clipping to `[0, 1]` and
/// re-clamping the known entries after every pass.
pub fn ae_retrieve_batch(
    model: &AeModel,
    queries: ArrayView2<'_, f64>,
    iters: usize,
    mask: Option<ArrayView2<'_, bool>>,
) -> Result<Array2<f64>> {
    if iters == 0 {
        return Err(Error::InvalidInput("iterations must be at least 1".into()));
    }
    if queries.nrows() != model.dim() {
        return Err(Error::dim("query dimension", model.dim(), queries.nrows()));
    }
    if let Some(m) = mask {
        if m.dim() != queries.dim() {
            return Err(Error::dim("mask size", queries.len(), m.len()));
        }
    }
    let parts = par::map_chunks(queries.ncols(), par::BATCH_CHUNK, |r| {
        let q = queries.slice(s![.., r.clone()]);
        let mut x = q.to_owned();
        for _ in 0..iters {
            x = model.reconstruct(x.view());
            x.mapv_inplace(|v| v.clamp(0.0, 1.0));
            if let Some(m) = mask {
                reclamp(&mut x, q, m.slice(s![.., r.clone()]));
            }
        }
        x
    });
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    Ok(ndarray::concatenate(Axis(1), &views).expect("matching rows"))
}

pub fn ae_retrieve(model: &AeModel, query: ArrayView1<'_, f64>, iters: usize, mask: Option<&[bool]>) -> Result<Array1<f64>> {
    let mask = mask.map(|m| ArrayView2::from_shape((m.len(), 1), m).expect("column"));
    Ok(ae_retrieve_batch(model, query.insert_axis(Axis(1)), iters, mask)?
        .column(0)
        .to_owned())
}
