use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::data::ModalityLayout;
use crate::error::{Error, Result};
use crate::par;
use crate::pcn::{self, ClampSpec, InferenceState, PcnModel};

use super::store::relax_clamped;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalConfig {
    /// Inference steps per application of the retrieval map.
    pub steps: usize,
    pub gamma: f64,
    /// Applications `m` of the denoising map.
    pub f_iterations: usize,
    /// MSE below which a retrieval counts as correct.
    pub threshold: f64,
    /// Clip each denoising-map output to `[0, 1]`.
    pub clip: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            gamma: 0.01,
            f_iterations: 30,
            threshold: 0.005,
            clip: true,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidInput("retrieval steps must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma = {} is out of range", self.gamma)));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::InvalidInput(format!("threshold = {} is out of range", self.threshold)));
        }
        Ok(())
    }
}

fn check_queries(model: &PcnModel, queries: ArrayView2<'_, f64>) -> Result<()> {
    if queries.nrows() != model.sensory_dim() {
        return Err(Error::dim("query dimension", model.sensory_dim(), queries.nrows()));
    }
    if queries.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("query contains non-finite values".into()));
    }
    Ok(())
}

fn column(v: ArrayView1<'_, f64>) -> ArrayView2<'_, f64> {
    v.insert_axis(Axis(1))
}

/// One application of the denoising map to each column: clamp the sensory
/// layer, relax, and read off the sensory prediction.
fn denoise_map(model: &PcnModel, x: ArrayView2<'_, f64>, cfg: &RetrievalConfig) -> Array2<f64> {
    let state = relax_clamped(model, x, cfg.steps, cfg.gamma);
    let mut out = state.sensory_predictions().clone();
    if cfg.clip {
        out.mapv_inplace(|v| v.clamp(0.0, 1.0));
    }
    out
}

/// All iterates `F^1(x) .. F^m(x)` for every column of `queries`.
pub fn denoise_trajectory(
    model: &PcnModel,
    queries: ArrayView2<'_, f64>,
    cfg: &RetrievalConfig,
) -> Result<Vec<Array2<f64>>> {
    cfg.validate()?;
    check_queries(model, queries)?;
    let parts = par::map_chunks(queries.ncols(), par::BATCH_CHUNK, |r| {
        let mut x = queries.slice(s![.., r]).to_owned();
        let mut iterates = Vec::with_capacity(cfg.f_iterations);
        for _ in 0..cfg.f_iterations {
            x = denoise_map(model, x.view(), cfg);
            iterates.push(x.clone());
        }
        iterates
    });
    Ok((0..cfg.f_iterations)
        .map(|i| concat_columns(queries.nrows(), parts.iter().map(|p| p[i].view())))
        .collect())
}

/// `F^m` applied to every column of `queries`. With `m = 0` the queries are
/// returned unchanged.
pub fn denoise_batch(model: &PcnModel, queries: ArrayView2<'_, f64>, cfg: &RetrievalConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    check_queries(model, queries)?;
    let parts = par::map_chunks(queries.ncols(), par::BATCH_CHUNK, |r| {
        let mut x = queries.slice(s![.., r]).to_owned();
        for _ in 0..cfg.f_iterations {
            x = denoise_map(model, x.view(), cfg);
        }
        x
    });
    Ok(concat_columns(queries.nrows(), parts.iter().map(|p| p.view())))
}

pub fn denoise_retrieve(model: &PcnModel, query: ArrayView1<'_, f64>, cfg: &RetrievalConfig) -> Result<Array1<f64>> {
    Ok(denoise_batch(model, column(query), cfg)?.column(0).to_owned())
}

/// Fill in the unknown entries of every column: known entries (mask true)
/// are clamped, the rest start at the model's top-down generation and relax
/// freely. Returns the relaxed sensory values.
pub fn complete_batch(
    model: &PcnModel,
    partial: ArrayView2<'_, f64>,
    mask: ArrayView2<'_, bool>,
    cfg: &RetrievalConfig,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    check_queries(model, partial)?;
    if mask.dim() != partial.dim() {
        return Err(Error::dim("mask size", partial.len(), mask.len()));
    }
    for (k, col) in mask.columns().into_iter().enumerate() {
        if !col.iter().any(|&m| m) {
            return Err(Error::InvalidInput(format!("mask for query {k} has no known entries")));
        }
    }
    let parts = par::map_chunks(partial.ncols(), par::BATCH_CHUNK, |r| {
        let clamp = ClampSpec::partial(
            partial.slice(s![.., r.clone()]).to_owned(),
            mask.slice(s![.., r.clone()]).to_owned(),
        )
        .expect("shapes checked");
        let mut state = InferenceState::feed_backward(model, r.len());
        clamp.apply(state.values_mut(0));
        state.refresh_unchecked(model);
        for _ in 0..cfg.steps {
            pcn::step_unchecked(model, &mut state, &clamp, cfg.gamma);
        }
        state.sensory_values().clone()
    });
    Ok(concat_columns(partial.nrows(), parts.iter().map(|p| p.view())))
}

pub fn complete_retrieve(
    model: &PcnModel,
    partial: ArrayView1<'_, f64>,
    mask: &[bool],
    cfg: &RetrievalConfig,
) -> Result<Array1<f64>> {
    let mask = ArrayView2::from_shape((mask.len(), 1), mask).expect("column");
    Ok(complete_batch(model, column(partial), mask, cfg)?.column(0).to_owned())
}

/// Recall the missing modality: entries inside `known` (usually one span of
/// `layout`) are clamped, every other entry is completed.
pub fn hetero_batch(
    model: &PcnModel,
    queries: ArrayView2<'_, f64>,
    layout: &ModalityLayout,
    known: Range<usize>,
    cfg: &RetrievalConfig,
) -> Result<Array2<f64>> {
    layout.validate(model.sensory_dim())?;
    if known.is_empty() || known.end > model.sensory_dim() {
        return Err(Error::InvalidInput(format!(
            "known span {known:?} is outside 0..{}",
            model.sensory_dim()
        )));
    }
    let mask = Array2::from_shape_fn(queries.raw_dim(), |(i, _)| known.contains(&i));
    complete_batch(model, queries, mask.view(), cfg)
}

fn concat_columns<'a>(d: usize, parts: impl Iterator<Item = ArrayView2<'a, f64>>) -> Array2<f64> {
    let parts: Vec<_> = parts.collect();
    if parts.is_empty() {
        return Array2::zeros((d, 0));
    }
    ndarray::concatenate(Axis(1), &parts).expect("matching rows")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemResult {
    pub mse: f64,
    pub retrieved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalReport {
    pub items: Vec<ItemResult>,
    pub threshold: f64,
}

impl RetrievalReport {
    pub fn total(&self) -> usize {
        self.items.len()
    }

    pub fn retrieved(&self) -> usize {
        self.items.iter().filter(|r| r.retrieved).count()
    }

    pub fn rate(&self) -> f64 {
        self.retrieved() as f64 / self.total() as f64
    }

    pub fn mean_mse(&self) -> f64 {
        self.items.iter().map(|r| r.mse).sum::<f64>() / self.total() as f64
    }

    pub fn median_mse(&self) -> f64 {
        let mut v: Vec<f64> = self.items.iter().map(|r| r.mse).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}

pub fn mse(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let n = a.len().max(1) as f64;
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n
}

/// Score columns of `retrieved` against the matching columns of `originals`.
/// When `span` is given only those rows are compared.
pub fn evaluate_retrieval(
    originals: ArrayView2<'_, f64>,
    retrieved: ArrayView2<'_, f64>,
    threshold: f64,
    span: Option<Range<usize>>,
) -> Result<RetrievalReport> {
    if originals.ncols() == 0 {
        return Err(Error::InvalidInput("nothing to evaluate".into()));
    }
    if originals.dim() != retrieved.dim() {
        return Err(Error::InvalidInput(format!(
            "compared {:?} originals against {:?} retrievals",
            originals.dim(),
            retrieved.dim()
        )));
    }
    let span = span.unwrap_or(0..originals.nrows());
    if span.end > originals.nrows() || span.is_empty() {
        return Err(Error::InvalidInput(format!("evaluation span {span:?} is out of range")));
    }
    let items = originals
        .columns()
        .into_iter()
        .zip(retrieved.columns())
        .map(|(a, b)| {
            let mse = mse(a.slice(s![span.clone()]), b.slice(s![span.clone()]));
            ItemResult {
                mse,
                retrieved: mse < threshold,
            }
        })
        .collect();
    Ok(RetrievalReport { items, threshold })
}

/// Index of the stored column nearest (in MSE) to `x`; ties go to the lower index.
pub fn nearest_stored(stored: ArrayView2<'_, f64>, x: ArrayView1<'_, f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, col) in stored.columns().into_iter().enumerate() {
        let e = mse(col, x);
        if e < best.1 {
            best = (k, e);
        }
    }
    best.0
}
