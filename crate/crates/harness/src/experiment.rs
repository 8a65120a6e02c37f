//! Experiment orchestration: data, training, corruption, retrieval, scoring
//! and artifact emission for every sweep point.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{s, Array2, ArrayView2};

use pcam::baselines::{ae_retrieve_batch, ae_train, mhn_build, mhn_retrieve_batch, AeTrace};
use pcam::checkpoint::{save_pcn, Checkpoint};
use pcam::data::{
    make_mask, procedural_set, read_captions, CaptionedCorpus, ExemplarSet, GaussianNoise, ImageTensor, Shape,
    TensorFormat,
};
use pcam::memory::{complete_batch, denoise_batch, evaluate_retrieval, hetero_batch, store, RetrievalReport, TrainTrace};
use pcam::pcn::PcnModel;

use crate::config::{Corruption, DataSource, ExperimentConfig, KnownModality, RawConfig, Task};
use crate::error::{HarnessError, Result};
use crate::gradcheck::{gradcheck, GradCheckReport, TOLERANCE};
use crate::grid::{difference_row, emit_grid};
use crate::metrics::{best_row, write_metrics, MetricsRow};

/// Stored items plus what is needed to show and decode them.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub set: ExemplarSet,
    pub shape: Shape,
    pub captions: Option<CaptionedCorpus>,
}

impl Dataset {
    pub fn image_len(&self) -> usize {
        self.shape.len()
    }
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.source {
        DataSource::Procedural => Ok(Dataset {
            set: procedural_set(cfg.shape, cfg.n, cfg.seed)?,
            shape: cfg.shape,
            captions: None,
        }),
        DataSource::Captioned => {
            let corpus = match &cfg.captions {
                None => CaptionedCorpus::from_captions(
                    cfg.shape,
                    pcam::data::corpus::bundled_captions(),
                    cfg.n,
                    cfg.seed,
                    cfg.caption_len,
                )?,
                Some(path) => CaptionedCorpus::from_captions(cfg.shape, read_captions(path)?, cfg.n, cfg.seed, cfg.caption_len)?,
            };
            Ok(Dataset {
                set: corpus.set.clone(),
                shape: cfg.shape,
                captions: Some(corpus),
            })
        }
        DataSource::Directory(dir) => load_directory(dir, cfg.n),
    }
}

fn load_directory(dir: &Path, n: usize) -> Result<Dataset> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| HarnessError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| TensorFormat::from_path(p).is_some())
        .collect();
    files.sort();
    if files.len() < n {
        return Err(HarnessError::Config(format!(
            "data.source {} holds {} images, data.n asks for {n}",
            dir.display(),
            files.len()
        )));
    }
    let images = files[..n]
        .iter()
        .map(|p| ImageTensor::read(p, TensorFormat::from_path(p).unwrap()))
        .collect::<pcam::Result<Vec<_>>>()?;
    let shape = images[0].shape();
    if let Some(bad) = images.iter().position(|t| t.shape() != shape) {
        return Err(HarnessError::Config(format!("{} differs in shape from {}", files[bad].display(), files[0].display())));
    }
    let items: Vec<Vec<f64>> = images.into_iter().map(ImageTensor::into_vec).collect();
    Ok(Dataset {
        set: ExemplarSet::from_items(&items)?,
        shape,
        captions: None,
    })
}

/// Corrupted queries and, for masked corruption, the known-entry mask.
#[derive(Debug, Clone)]
pub struct Queries {
    pub values: Array2<f64>,
    pub mask: Option<Array2<bool>>,
    pub label: String,
}

pub fn corrupt(cfg: &ExperimentConfig, data: &Dataset) -> Result<Queries> {
    let items = data.set.matrix();
    match cfg.corruption {
        Corruption::None => Ok(Queries {
            values: items.clone(),
            mask: None,
            label: "none".into(),
        }),
        Corruption::Noise => {
            let noise = GaussianNoise::new(cfg.noise_level, cfg.noise_scale)?;
            let mut values = items.clone();
            for (k, mut col) in values.columns_mut().into_iter().enumerate() {
                let noisy = noise.corrupt(&col.to_vec(), cfg.seed, k as u64);
                col.assign(&ndarray::Array1::from(noisy));
            }
            let scale = match cfg.noise_scale {
                pcam::data::NoiseScale::Variance => "var",
                pcam::data::NoiseScale::StdDev => "std",
            };
            Ok(Queries {
                values,
                mask: None,
                label: format!("noise_{scale}={}", cfg.noise_level),
            })
        }
        Corruption::Mask => {
            if data.set.dim() != data.shape.len() {
                return Err(HarnessError::Config("masked corruption needs image-only data".into()));
            }
            let mut mask = Array2::from_elem(items.raw_dim(), false);
            for k in 0..items.ncols() {
                let m = make_mask(cfg.mask_kind, cfg.mask_fraction, data.shape, cfg.seed, k as u64)?;
                mask.column_mut(k).assign(&ndarray::Array1::from(m));
            }
            let values = ndarray::Zip::from(items).and(&mask).map_collect(|&v, &m| if m { v } else { 0.0 });
            Ok(Queries {
                values,
                mask: Some(mask),
                label: format!("{}={}", cfg.mask_kind, cfg.mask_fraction),
            })
        }
    }
}

/// Everything one sweep point produced.
#[derive(Debug, Clone, Default)]
pub struct PointOutcome {
    pub rows: Vec<MetricsRow>,
    pub grids: Vec<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub train_trace: Option<TrainTrace>,
    pub ae_trace: Option<AeTrace>,
    pub gradcheck: Option<GradCheckReport>,
}

#[derive(Debug, Clone, Default)]
pub struct RunArtifacts {
    pub rows: Vec<MetricsRow>,
    pub metrics_path: PathBuf,
    pub grids: Vec<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub points: Vec<PointOutcome>,
}

impl RunArtifacts {
    /// The row with the highest rate; ties go to the lower mean MSE, then to
    /// the lexicographically smaller parameter string.
    pub fn best(&self, task: &str) -> Option<&MetricsRow> {
        best_row(self.rows.iter().filter(|r| r.task == task))
    }
}

/// Trained PCNs keyed by everything that influences training.
#[derive(Default)]
pub struct ModelCache {
    models: HashMap<String, (PcnModel, TrainTrace)>,
}

fn training_key(cfg: &ExperimentConfig) -> String {
    format!(
        "{:?}|{:?}|{:?}|{:?}|{}|{:?}|{:?}|{}",
        cfg.hidden, cfg.activation, cfg.train, cfg.source, cfg.n, cfg.shape, cfg.captions, cfg.caption_len
    )
}

impl ModelCache {
    pub fn train(&mut self, cfg: &ExperimentConfig, data: &Dataset) -> Result<&(PcnModel, TrainTrace)> {
        let key = training_key(cfg);
        if !self.models.contains_key(&key) {
            let mut model = PcnModel::init(&cfg.widths(data.set.dim()), cfg.activation, cfg.seed)?;
            let trace = store(&mut model, &data.set, &cfg.train)?;
            self.models.insert(key.clone(), (model, trace));
        }
        Ok(&self.models[&key])
    }
}

/// Run every sweep point of `raw`, write `metrics.csv` and the other
/// artifacts under the configured output directory.
pub fn run_experiment(raw: &RawConfig) -> Result<RunArtifacts> {
    let points = raw.points();
    let resolved = points.iter().map(RawConfig::resolve).collect::<Result<Vec<_>>>()?;
    let out = resolved[0].out.clone();
    fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
    let mut cache = ModelCache::default();
    let mut artifacts = RunArtifacts::default();
    for (i, (point, cfg)) in points.iter().zip(&resolved).enumerate() {
        let label = raw.swept_values(point);
        let outcome = run_point(cfg, i, &label, &mut cache)?;
        artifacts.rows.extend(outcome.rows.iter().cloned());
        artifacts.grids.extend(outcome.grids.iter().cloned());
        artifacts.checkpoints.extend(outcome.checkpoints.iter().cloned());
        artifacts.points.push(outcome);
    }
    artifacts.metrics_path = out.join("metrics.csv");
    write_metrics(&artifacts.metrics_path, &artifacts.rows)?;
    if resolved[0].task == Task::GradCheck {
        let max_error = artifacts
            .points
            .iter()
            .filter_map(|p| p.gradcheck.as_ref())
            .map(GradCheckReport::max_error)
            .fold(0.0, f64::max);
        if max_error >= TOLERANCE {
            return Err(HarnessError::GradCheckFailed {
                max_error,
                tolerance: TOLERANCE,
            });
        }
    }
    Ok(artifacts)
}

fn row(cfg: &ExperimentConfig, task: &str, corruption: &str, report: &RetrievalReport, seconds: f64, params: String) -> MetricsRow {
    MetricsRow {
        task: task.to_string(),
        depth: cfg.depth(),
        width: cfg.width(),
        n: report.total(),
        corruption: corruption.to_string(),
        threshold: report.threshold,
        retrieved: report.retrieved(),
        total: report.total(),
        rate: report.rate(),
        mean_mse: report.mean_mse(),
        seconds,
        seed: cfg.seed,
        params,
    }
}

/// PCN retrieval for the configured corruption: the denoising map for noisy or
/// clean queries, completion for masked ones.
pub fn pcn_retrieve(model: &PcnModel, cfg: &ExperimentConfig, q: &Queries) -> Result<Array2<f64>> {
    Ok(match &q.mask {
        Some(mask) => complete_batch(model, q.values.view(), mask.view(), &cfg.retrieval)?,
        None => denoise_batch(model, q.values.view(), &cfg.retrieval)?,
    })
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

/// Run one resolved configuration. `index` numbers the artifact files and
/// `label` names the swept values in the metrics rows.
pub fn run_point(cfg: &ExperimentConfig, index: usize, label: &str, cache: &mut ModelCache) -> Result<PointOutcome> {
    fs::create_dir_all(&cfg.out).map_err(|e| HarnessError::io(&cfg.out, e))?;
    if cfg.task == Task::GradCheck {
        return run_gradcheck(cfg, index, label);
    }
    let data = load_data(cfg)?;
    if cfg.task == Task::Hetero {
        return run_hetero(cfg, &data, index, label, cache);
    }
    let q = corrupt(cfg, &data)?;
    if cfg.task == Task::Complete && q.mask.is_none() {
        return Err(HarnessError::Config("the complete task needs corruption = mask".into()));
    }
    let mut outcome = PointOutcome::default();
    let originals = data.set.matrix().view();

    let (model, trace) = cache.train(cfg, &data)?.clone();
    write_trace(&cfg.out.join(format!("trace_{index}.csv")), &trace)?;
    if cfg.checkpoint {
        let path = cfg.out.join(format!("pcn_{index}.pcam"));
        save_pcn(&model, &path)?;
        outcome.checkpoints.push(path);
    }
    outcome.train_trace = Some(trace);
    let (out, secs) = timed(|| pcn_retrieve(&model, cfg, &q))?;
    let report = evaluate_retrieval(originals, out.view(), cfg.retrieval.threshold, None)?;
    outcome.rows.push(row(cfg, "pcn", &q.label, &report, secs, label.to_string()));
    push_grid(cfg, &data, &q, &out, &format!("grid_{index}_pcn.ppm"), &mut outcome)?;

    match cfg.task {
        Task::MhnCompare => {
            for &copies in &cfg.mhn_copies {
                for &beta in &cfg.mhn_betas {
                    let mhn = mhn_build(&data.set, beta, copies)?;
                    let (out, secs) = timed(|| {
                        Ok(mhn_retrieve_batch(
                            &mhn,
                            q.values.view(),
                            cfg.mhn_iters,
                            q.mask.as_ref().map(|m| m.view()),
                        )?)
                    })?;
                    let report = evaluate_retrieval(originals, out.view(), cfg.retrieval.threshold, None)?;
                    let params = join_params(label, &format!("beta={beta};copies={copies}"));
                    let mut r = row(cfg, "mhn", &q.label, &report, secs, params);
                    r.depth = 1;
                    r.width = mhn.len();
                    outcome.rows.push(r);
                }
            }
            if let Some(best) = best_row(outcome.rows.iter().filter(|r| r.task == "mhn")) {
                let beta = param_value(&best.params, "beta").unwrap();
                let copies = param_value(&best.params, "copies").unwrap();
                let mhn = mhn_build(&data.set, beta.parse().unwrap(), copies.parse().unwrap())?;
                let out = mhn_retrieve_batch(&mhn, q.values.view(), cfg.mhn_iters, q.mask.as_ref().map(|m| m.view()))?;
                push_grid(cfg, &data, &q, &out, &format!("grid_{index}_mhn.ppm"), &mut outcome)?;
            }
        }
        Task::AeCompare => {
            let widths: Vec<usize> = std::iter::once(data.set.dim())
                .chain(cfg.ae_hidden.iter().copied())
                .chain(std::iter::once(data.set.dim()))
                .collect();
            let (ae, ae_trace) = ae_train(&widths, &data.set, cfg.ae_epochs, cfg.ae_lr, cfg.seed)?;
            if cfg.checkpoint {
                let path = cfg.out.join(format!("ae_{index}.pcam"));
                Checkpoint::Ae(ae.clone()).save(&path)?;
                outcome.checkpoints.push(path);
            }
            let (out, secs) = timed(|| {
                Ok(ae_retrieve_batch(&ae, q.values.view(), cfg.ae_iters, q.mask.as_ref().map(|m| m.view()))?)
            })?;
            let report = evaluate_retrieval(originals, out.view(), cfg.retrieval.threshold, None)?;
            let mut r = row(cfg, "ae", &q.label, &report, secs, join_params(label, &format!("ae_widths={:?}", cfg.ae_hidden)));
            r.depth = widths.len() - 1;
            r.width = *cfg.ae_hidden.iter().max().unwrap();
            outcome.rows.push(r);
            outcome.ae_trace = Some(ae_trace);
            push_grid(cfg, &data, &q, &out, &format!("grid_{index}_ae.ppm"), &mut outcome)?;
        }
        _ => {}
    }
    Ok(outcome)
}

fn join_params(label: &str, extra: &str) -> String {
    if label.is_empty() {
        extra.to_string()
    } else {
        format!("{label};{extra}")
    }
}

fn param_value<'a>(params: &'a str, key: &str) -> Option<&'a str> {
    params
        .split(';')
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v)
}

fn run_hetero(cfg: &ExperimentConfig, data: &Dataset, index: usize, label: &str, cache: &mut ModelCache) -> Result<PointOutcome> {
    let corpus = data
        .captions
        .as_ref()
        .ok_or_else(|| HarnessError::Config("the hetero task needs data.source = captioned".into()))?;
    let layout = data.set.layout().expect("captioned data carries a layout").clone();
    let mut outcome = PointOutcome::default();
    let (model, trace) = cache.train(cfg, data)?.clone();
    write_trace(&cfg.out.join(format!("trace_{index}.csv")), &trace)?;
    if cfg.checkpoint {
        let path = cfg.out.join(format!("pcn_{index}.pcam"));
        save_pcn(&model, &path)?;
        outcome.checkpoints.push(path);
    }
    outcome.train_trace = Some(trace);
    let originals = data.set.matrix().view();
    let blank = blank_span(originals, &layout.image);

    if matches!(cfg.known, KnownModality::Caption | KnownModality::Both) {
        let (out, secs) = timed(|| Ok(hetero_batch(&model, blank.view(), &layout, layout.caption.clone(), &cfg.retrieval)?))?;
        let report = evaluate_retrieval(originals, out.view(), cfg.retrieval.threshold, Some(layout.image.clone()))?;
        outcome.rows.push(row(cfg, "pcn", "caption->image", &report, secs, label.to_string()));
        let q = Queries {
            values: blank.clone(),
            mask: None,
            label: String::new(),
        };
        push_grid(cfg, data, &q, &out, &format!("grid_{index}_caption_to_image.ppm"), &mut outcome)?;
    }
    if matches!(cfg.known, KnownModality::Image | KnownModality::Both) {
        let blank = blank_span(originals, &layout.caption);
        let (out, secs) = timed(|| Ok(hetero_batch(&model, blank.view(), &layout, layout.image.clone(), &cfg.retrieval)?))?;
        let report = caption_report(corpus, originals, out.view(), &layout.caption)?;
        outcome.rows.push(row(cfg, "pcn", "image->caption", &report, secs, label.to_string()));
        write_captions(&cfg.out.join(format!("captions_{index}.tsv")), corpus, out.view(), &layout.caption)?;
    }
    Ok(outcome)
}

/// Copy of `x` with the rows in `span` zeroed.
fn blank_span(x: ArrayView2<'_, f64>, span: &std::ops::Range<usize>) -> Array2<f64> {
    let mut out = x.to_owned();
    out.slice_mut(s![span.clone(), ..]).fill(0.0);
    out
}

/// Caption recall scored by exact decoded match; the threshold column is 0
/// and `mse` is measured over the caption span.
pub fn caption_report(
    corpus: &CaptionedCorpus,
    originals: ArrayView2<'_, f64>,
    retrieved: ArrayView2<'_, f64>,
    span: &std::ops::Range<usize>,
) -> Result<RetrievalReport> {
    let mut report = evaluate_retrieval(originals, retrieved, 0.0, Some(span.clone()))?;
    for (k, item) in report.items.iter_mut().enumerate() {
        let got = corpus.vocabulary.decode(&retrieved.slice(s![span.clone(), k]).to_vec());
        let want = corpus.vocabulary.decode(&originals.slice(s![span.clone(), k]).to_vec());
        item.retrieved = got == want;
    }
    Ok(report)
}

fn write_captions(
    path: &Path,
    corpus: &CaptionedCorpus,
    retrieved: ArrayView2<'_, f64>,
    span: &std::ops::Range<usize>,
) -> Result<()> {
    let mut text = String::from("item\tstored\trecalled\n");
    for (k, stored) in corpus.captions.iter().enumerate() {
        let got = corpus.vocabulary.decode(&retrieved.slice(s![span.clone(), k]).to_vec());
        text.push_str(&format!("{k}\t{stored}\t{got}\n"));
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn write_trace(path: &Path, trace: &TrainTrace) -> Result<()> {
    let mut text = String::from("epoch,mean_energy,mean_sensory_energy\n");
    for (i, e) in trace.epochs.iter().enumerate() {
        text.push_str(&format!("{i},{:e},{:e}\n", e.mean_energy, e.mean_sensory_energy));
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Original, corrupted, reconstructed and difference rows for the first
/// `grid.items` items, image span only.
fn push_grid(
    cfg: &ExperimentConfig,
    data: &Dataset,
    q: &Queries,
    out: &Array2<f64>,
    name: &str,
    outcome: &mut PointOutcome,
) -> Result<()> {
    let k = cfg.grid_items.min(data.set.len());
    if k == 0 {
        return Ok(());
    }
    let img = data.image_len();
    let tiles = |m: ArrayView2<'_, f64>| -> Result<Vec<ImageTensor>> {
        (0..k)
            .map(|j| Ok(ImageTensor::from_clipped(data.shape, &m.slice(s![..img, j]).to_vec())?))
            .collect()
    };
    let original = tiles(data.set.matrix().view())?;
    let corrupted = tiles(q.values.view())?;
    let recon = tiles(out.view())?;
    let diff = difference_row(&original, &recon)?;
    let path = cfg.out.join(name);
    emit_grid(&[original, corrupted, recon, diff], &path)?;
    outcome.grids.push(path);
    Ok(())
}

fn run_gradcheck(cfg: &ExperimentConfig, index: usize, label: &str) -> Result<PointOutcome> {
    let report = gradcheck(
        &cfg.gradcheck_widths,
        cfg.gradcheck_activation,
        cfg.gradcheck_trials,
        cfg.gradcheck_h,
        cfg.seed,
    )?;
    let path = cfg.out.join(format!("gradcheck_{index}.csv"));
    let mut text = String::from("trial,widths,values,weights,memory\n");
    for (t, r) in report.trials.iter().enumerate() {
        let w: Vec<String> = r.widths.iter().map(usize::to_string).collect();
        text.push_str(&format!("{t},{},{:e},{:e},{:e}\n", w.join("-"), r.values, r.weights, r.memory));
    }
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    let passed = report.trials.iter().filter(|t| t.max() < TOLERANCE).count();
    let rows = vec![MetricsRow {
        task: "gradcheck".into(),
        depth: cfg.gradcheck_widths.len() - 1,
        width: *cfg.gradcheck_widths.iter().max().unwrap(),
        n: report.trials.len(),
        corruption: "none".into(),
        threshold: TOLERANCE,
        retrieved: passed,
        total: report.trials.len(),
        rate: passed as f64 / report.trials.len() as f64,
        mean_mse: report.max_error(),
        seconds: 0.0,
        seed: cfg.seed,
        params: label.to_string(),
    }];
    Ok(PointOutcome {
        rows,
        gradcheck: Some(report),
        ..PointOutcome::default()
    })
}
