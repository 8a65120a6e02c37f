use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::PcnModel;
use crate::error::{Error, Result};

/// Value nodes, predictions and errors of every layer for a batch of samples.
///
/// Each layer is stored as an `n^l × B` matrix whose columns are independent
/// samples. Columns never interact: running a batch gives, column for column,
/// the same numbers as running each sample alone.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceState {
    pub(crate) values: Vec<Array2<f64>>,
    pub(crate) predictions: Vec<Array2<f64>>,
    pub(crate) errors: Vec<Array2<f64>>,
}

impl InferenceState {
    /// Build a state from explicit per-layer values (`values[l]` is `n^l × B`)
    /// and refresh it.
    pub fn from_values(model: &PcnModel, values: Vec<Array2<f64>>) -> Result<Self> {
        let widths = model.widths();
        if values.len() != widths.len() {
            return Err(Error::dim("state layers", widths.len(), values.len()));
        }
        let batch = values[0].ncols();
        for (v, &n) in values.iter().zip(widths) {
            if v.nrows() != n {
                return Err(Error::dim("state layer width", n, v.nrows()));
            }
            if v.ncols() != batch {
                return Err(Error::dim("state batch size", batch, v.ncols()));
            }
        }
        let mut state = Self {
            predictions: values.iter().map(|v| Array2::zeros(v.raw_dim())).collect(),
            errors: values.iter().map(|v| Array2::zeros(v.raw_dim())).collect(),
            values,
        };
        state.refresh_unchecked(model);
        Ok(state)
    }

    /// Single-sample convenience over [`InferenceState::from_values`].
    pub fn single(model: &PcnModel, values: Vec<Array1<f64>>) -> Result<Self> {
        let values = values
            .into_iter()
            .map(|v| {
                let n = v.len();
                v.into_shape_with_order((n, 1)).expect("column reshape")
            })
            .collect();
        Self::from_values(model, values)
    }

    /// Top-down generation: `x^L = b`, then `x^l = μ^l` for every lower layer,
    /// sensory layer included. All errors are zero afterwards.
    pub fn feed_backward(model: &PcnModel, batch: usize) -> Self {
        let depth = model.depth();
        let mut values: Vec<Array2<f64>> = Vec::with_capacity(depth + 1);
        let top = model
            .memory()
            .view()
            .insert_axis(Axis(1))
            .broadcast((model.memory().len(), batch))
            .expect("broadcast memory")
            .to_owned();
        values.push(top);
        for l in (0..depth).rev() {
            let above = values.last().unwrap();
            let mu = model.weight(l + 1).dot(&model.activation().map(above.view()));
            values.push(mu);
        }
        values.reverse();
        let predictions = values.clone();
        let errors = values.iter().map(|v| Array2::zeros(v.raw_dim())).collect();
        Self {
            values,
            predictions,
            errors,
        }
    }

    pub fn depth(&self) -> usize {
        self.values.len() - 1
    }

    pub fn batch_size(&self) -> usize {
        self.values[0].ncols()
    }

    pub fn values(&self, l: usize) -> &Array2<f64> {
        &self.values[l]
    }

    pub fn predictions(&self, l: usize) -> &Array2<f64> {
        &self.predictions[l]
    }

    pub fn errors(&self, l: usize) -> &Array2<f64> {
        &self.errors[l]
    }

    pub fn sensory_values(&self) -> &Array2<f64> {
        &self.values[0]
    }

    pub fn sensory_predictions(&self) -> &Array2<f64> {
        &self.predictions[0]
    }

    /// Mutable value nodes. Predictions and errors go stale until the next
    /// [`InferenceState::refresh`].
    pub fn values_mut(&mut self, l: usize) -> &mut Array2<f64> {
        &mut self.values[l]
    }

    /// Recompute predictions (`μ^L = b`, `μ^l = θ^{l+1} f(x^{l+1})`) and errors
    /// (`ε = x − μ`) from the current values.
    pub fn refresh(&mut self, model: &PcnModel) -> Result<()> {
        self.check_shapes(model)?;
        self.refresh_unchecked(model);
        Ok(())
    }

    pub(crate) fn check_shapes(&self, model: &PcnModel) -> Result<()> {
        let widths = model.widths();
        if self.values.len() != widths.len() {
            return Err(Error::dim("state layers", widths.len(), self.values.len()));
        }
        for (v, &n) in self.values.iter().zip(widths) {
            if v.nrows() != n {
                return Err(Error::dim("state layer width", n, v.nrows()));
            }
        }
        Ok(())
    }

    pub(crate) fn refresh_unchecked(&mut self, model: &PcnModel) {
        let depth = model.depth();
        let act = model.activation();
        for mut col in self.predictions[depth].columns_mut() {
            col.assign(model.memory());
        }
        for l in 0..depth {
            let fx = act.map(self.values[l + 1].view());
            ndarray::linalg::general_mat_mul(
                1.0,
                model.weight(l + 1),
                &fx,
                0.0,
                &mut self.predictions[l],
            );
        }
        for l in 0..=depth {
            Zip::from(&mut self.errors[l])
                .and(&self.values[l])
                .and(&self.predictions[l])
                .for_each(|e, &x, &mu| *e = x - mu);
        }
    }

    /// Total energy `½ Σ_l Σ_i (ε^l_i)²` over layers `0..=L`, summed over the batch.
    pub fn energy(&self) -> f64 {
        0.5 * self
            .errors
            .iter()
            .map(|e| e.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
    }

    /// Energy of every sample (column) in the batch.
    pub fn energies(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.batch_size()];
        for e in &self.errors {
            for (j, col) in e.axis_iter(Axis(1)).enumerate() {
                out[j] += 0.5 * col.iter().map(|v| v * v).sum::<f64>();
            }
        }
        out
    }

    /// Energy contributed by layer `l` alone, summed over the batch.
    pub fn layer_energy(&self, l: usize) -> f64 {
        0.5 * self.errors[l].iter().map(|v| v * v).sum::<f64>()
    }

    /// Keep only columns `range` of every layer.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        let cut = |m: &Vec<Array2<f64>>| m.iter().map(|a| a.slice(s![.., start..end]).to_owned()).collect();
        Self {
            values: cut(&self.values),
            predictions: cut(&self.predictions),
            errors: cut(&self.errors),
        }
    }
}

/// Which sensory entries are held fixed during inference, and at what values.
///
/// `mask` and `values` are `d × B`, one column per sample; `values` is read only
/// where `mask` is true.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampSpec {
    mask: Array2<bool>,
    values: Array2<f64>,
}

impl ClampSpec {
    /// Every sensory node clamped (training and the denoising map).
    pub fn full(values: Array2<f64>) -> Self {
        Self {
            mask: Array2::from_elem(values.raw_dim(), true),
            values,
        }
    }

    /// Only the entries where `mask` is true are clamped.
    pub fn partial(values: Array2<f64>, mask: Array2<bool>) -> Result<Self> {
        if values.dim() != mask.dim() {
            return Err(Error::dim("clamp mask", values.len(), mask.len()));
        }
        Ok(Self { mask, values })
    }

    /// Nothing clamped; the sensory layer relaxes freely.
    pub fn free(d: usize, batch: usize) -> Self {
        Self {
            mask: Array2::from_elem((d, batch), false),
            values: Array2::zeros((d, batch)),
        }
    }

    /// Single-sample clamp.
    pub fn single(values: ArrayView1<'_, f64>, mask: &[bool]) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(Error::dim("clamp mask", values.len(), mask.len()));
        }
        let d = values.len();
        Ok(Self {
            mask: Array2::from_shape_vec((d, 1), mask.to_vec()).expect("column"),
            values: values.to_owned().into_shape_with_order((d, 1)).expect("column"),
        })
    }

    pub fn mask(&self) -> ArrayView2<'_, bool> {
        self.mask.view()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn dim(&self) -> usize {
        self.mask.nrows()
    }

    pub fn batch_size(&self) -> usize {
        self.mask.ncols()
    }

    pub fn columns(&self, start: usize, end: usize) -> Self {
        Self {
            mask: self.mask.slice(s![.., start..end]).to_owned(),
            values: self.values.slice(s![.., start..end]).to_owned(),
        }
    }

    /// Overwrite the clamped entries of `sensory` with their clamp values.
    pub fn apply(&self, sensory: &mut Array2<f64>) {
        Zip::from(sensory)
            .and(&self.mask)
            .and(&self.values)
            .for_each(|x, &m, &v| {
                if m {
                    *x = v
                }
            });
    }

    pub(crate) fn check(&self, model: &PcnModel, batch: usize) -> Result<()> {
        if self.dim() != model.sensory_dim() {
            return Err(Error::dim("clamp dimension", model.sensory_dim(), self.dim()));
        }
        if self.batch_size() != batch {
            return Err(Error::dim("clamp batch size", batch, self.batch_size()));
        }
        Ok(())
    }
}
