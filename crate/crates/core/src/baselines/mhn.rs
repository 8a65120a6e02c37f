use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::data::ExemplarSet;
use crate::error::{Error, Result};
use crate::par;

/// Inverse temperatures searched by default.
pub const DEFAULT_BETAS: [f64; 7] = [1.0, 2.0, 3.0, 5.0, 10.0, 100.0, 1000.0];
/// Pattern multiplicities searched by default.
pub const DEFAULT_COPIES: [usize; 3] = [1, 3, 5];
pub const DEFAULT_ITERS: usize = 10;

/// A modern Hopfield network: stored patterns as the columns of `X` and an
/// inverse temperature `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct MhnModel {
    patterns: Array2<f64>,
    beta: f64,
    copies: usize,
}

impl MhnModel {
    pub fn new(patterns: Array2<f64>, beta: f64, copies: usize) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidInput(format!("beta must be finite and positive, got {beta}")));
        }
        if copies == 0 || patterns.ncols() == 0 || patterns.ncols() % copies != 0 {
            return Err(Error::InvalidInput(format!(
                "{} stored columns cannot hold {copies} copies of each item",
                patterns.ncols()
            )));
        }
        if patterns.nrows() == 0 || patterns.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("stored patterns must be finite and non-empty".into()));
        }
        Ok(Self { patterns, beta, copies })
    }

    pub fn patterns(&self) -> &Array2<f64> {
        &self.patterns
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn dim(&self) -> usize {
        self.patterns.nrows()
    }

    /// Stored columns `M`.
    pub fn len(&self) -> usize {
        self.patterns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

/// One-shot storage: every item repeated `copies` times, in item order.
pub fn mhn_build(items: &ExemplarSet, beta: f64, copies: usize) -> Result<MhnModel> {
    if items.is_empty() {
        return Err(Error::InvalidInput("cannot build a memory from an empty set".into()));
    }
    if copies == 0 {
        return Err(Error::InvalidInput("copies must be at least 1".into()));
    }
    let n = items.len();
    let x = Array2::from_shape_fn((items.dim(), n * copies), |(i, j)| items.matrix()[[i, j / copies]]);
    MhnModel::new(x, beta, copies)
}

/// Numerically stable softmax of `beta * scores`, in place.
pub fn softmax_in_place(scores: &mut Array1<f64>, beta: f64) {
    let max = scores.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    scores.mapv_inplace(|v| (beta * (v - max)).exp());
    let z = scores.sum();
    *scores /= z;
}

/// `X · softmax(β Xᵀ ξ)` for every column `ξ` of `queries`.
fn step_batch(model: &MhnModel, queries: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut scores = model.patterns.t().dot(&queries);
    for mut col in scores.columns_mut() {
        let mut owned = col.to_owned();
        softmax_in_place(&mut owned, model.beta);
        col.assign(&owned);
    }
    model.patterns.dot(&scores)
}

pub fn mhn_step(model: &MhnModel, query: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    if query.len() != model.dim() {
        return Err(Error::dim("query dimension", model.dim(), query.len()));
    }
    Ok(step_batch(model, query.insert_axis(Axis(1))).column(0).to_owned())
}

/// Iterate the update `iters` times for every column. With a mask, entries
/// where the mask is true are reset to the query after every step.
pub fn mhn_retrieve_batch(
    model: &MhnModel,
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
            x = step_batch(model, x.view());
            if let Some(m) = mask {
                reclamp(&mut x, q, m.slice(s![.., r.clone()]));
            }
        }
        x
    });
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    Ok(ndarray::concatenate(Axis(1), &views).expect("matching rows"))
}

pub fn mhn_retrieve(
    model: &MhnModel,
    query: ArrayView1<'_, f64>,
    iters: usize,
    mask: Option<&[bool]>,
) -> Result<Array1<f64>> {
    let mask = match mask {
        Some(m) => Some(ArrayView2::from_shape((m.len(), 1), m).expect("column")),
        None => None,
    };
    Ok(mhn_retrieve_batch(model, query.insert_axis(Axis(1)), iters, mask)?
        .column(0)
        .to_owned())
}

pub(crate) fn reclamp(x: &mut Array2<f64>, query: ArrayView2<'_, f64>, mask: ArrayView2<'_, bool>) {
    ndarray::Zip::from(x).and(query).and(mask).for_each(|x, &q, &m| {
        if m {
            *x = q
        }
    });
}
