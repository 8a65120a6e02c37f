//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, list values are
//! comma-separated. A `sweep.<key> = a, b, c` line runs the experiment once
//! per listed value of `<key>`; several sweep lines form a Cartesian product
//! in file order. `KEYS` is the authoritative inventory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pcam::data::{MaskKind, NoiseScale, Shape};
use pcam::memory::{RetrievalConfig, TrainConfig, UpdateMode};
use pcam::pcn::Optimizer;
use pcam::Activation;

use crate::error::{HarnessError, Result};

/// Every recognized key, its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("task", "denoise", "denoise | complete | hetero | mhn_compare | ae_compare | gradcheck"),
    ("seed", "0", "master seed; every random stream derives from it"),
    ("out", "out", "output directory"),
    ("depth", "2", "weight layers L of the PCN"),
    ("width", "256", "width of every non-sensory PCN layer"),
    ("widths", "", "explicit non-sensory widths, overrides depth and width"),
    ("activation", "relu", "identity | relu | tanh"),
    ("train.steps", "100", "inference steps T per training iteration"),
    ("train.gamma", "0.01", "integration step during training"),
    ("train.alpha", "0.003", "learning rate"),
    ("train.alpha_decay", "1", "per-epoch learning-rate multiplier"),
    ("train.epochs", "300", "maximum training epochs"),
    ("train.energy_tol", "1e-5", "stop once mean energy is below this"),
    ("train.mode", "batch", "sequential | batch"),
    ("train.optimizer", "adam", "sgd | adam"),
    ("retrieval.steps", "", "inference steps per retrieval pass; empty picks 100 for denoising, 3000 otherwise"),
    ("retrieval.gamma", "0.01", "integration step during retrieval"),
    ("retrieval.f_iterations", "30", "applications of the denoising map"),
    ("retrieval.threshold", "", "MSE acceptance bound; empty picks the task default"),
    ("retrieval.clip", "true", "clip denoising outputs to [0, 1]"),
    ("data.source", "procedural", "procedural | captioned | a directory of .ppm/.pgm/.pctn files"),
    ("data.n", "50", "items stored"),
    ("data.channels", "3", "procedural image channels"),
    ("data.height", "32", "procedural image height"),
    ("data.width", "32", "procedural image width"),
    ("data.captions", "", "caption file for captioned data; empty uses the bundled captions"),
    ("data.caption_len", "25", "caption pad length"),
    ("corruption", "", "noise | mask | none; empty picks the task default"),
    ("noise.level", "0.2", "Gaussian noise level"),
    ("noise.scale", "variance", "variance | std: how noise.level is read"),
    ("mask.kind", "random_pixels", "random_pixels | center_patch | half_rows"),
    ("mask.fraction", "0.5", "fraction of pixels known"),
    ("hetero.known", "both", "caption | image | both: the modality given to the memory"),
    ("mhn.betas", "1,2,3,5,10,100,1000", "inverse temperatures searched"),
    ("mhn.copies", "1,3,5", "pattern multiplicities searched"),
    ("mhn.iters", "10", "MHN update iterations"),
    ("ae.widths", "", "AE hidden widths; empty uses the PCN's non-sensory widths"),
    ("ae.epochs", "3000", "AE training epochs"),
    ("ae.lr", "0.001", "AE learning rate"),
    ("ae.iters", "30", "AE retrieval iterations"),
    ("gradcheck.trials", "20", "random models checked"),
    ("gradcheck.widths", "8,6,4", "layer widths including the sensory layer"),
    ("gradcheck.h", "1e-5", "finite-difference step"),
    ("gradcheck.activation", "tanh", "activation for the gradient check"),
    ("grid.items", "8", "items shown in each image grid; 0 disables grids"),
    ("checkpoint", "true", "save trained models"),
];

fn default_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, v, _)| *v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Denoise,
    Complete,
    Hetero,
    MhnCompare,
    AeCompare,
    GradCheck,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Denoise => "denoise",
            Task::Complete => "complete",
            Task::Hetero => "hetero",
            Task::MhnCompare => "mhn_compare",
            Task::AeCompare => "ae_compare",
            Task::GradCheck => "gradcheck",
        }
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "denoise" => Task::Denoise,
            "complete" => Task::Complete,
            "hetero" => Task::Hetero,
            "mhn_compare" | "mhn" => Task::MhnCompare,
            "ae_compare" | "ae" => Task::AeCompare,
            "gradcheck" => Task::GradCheck,
            other => return Err(format!("unknown task {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corruption {
    Noise,
    Mask,
    None,
}

impl FromStr for Corruption {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "noise" => Ok(Corruption::Noise),
            "mask" => Ok(Corruption::Mask),
            "none" => Ok(Corruption::None),
            other => Err(format!("unknown corruption {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Procedural,
    Captioned,
    Directory(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnownModality {
    Caption,
    Image,
    Both,
}

/// Denoising acceptance bound.
pub const DENOISE_THRESHOLD: f64 = 0.005;
/// Completion and caption-to-image acceptance bound.
pub const COMPLETION_THRESHOLD: f64 = 0.001;
/// Inference steps per pass of the denoising map.
pub const DENOISE_STEPS: usize = 100;
/// Inference steps for completion, where free sensory entries must travel.
pub const COMPLETION_STEPS: usize = 3000;

/// Raw assignments before typing: defaults overlaid with file and CLI values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    sweeps: Vec<(String, Vec<String>)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RawConfig::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(swept) = key.strip_prefix("sweep.") {
                cfg.add_sweep(swept, value)?;
            } else {
                cfg.set(key, value)?;
            }
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if default_of(key).is_none() {
            return Err(HarnessError::Config(format!("unknown key {key:?}")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    fn add_sweep(&mut self, key: &str, list: &str) -> Result<()> {
        if default_of(key).is_none() {
            return Err(HarnessError::Config(format!("sweep over unknown key {key:?}")));
        }
        if matches!(key, "task" | "out" | "seed") {
            return Err(HarnessError::Config(format!("{key} cannot be swept")));
        }
        let values: Vec<String> = list.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(HarnessError::Config(format!("sweep.{key} lists no values")));
        }
        self.sweeps.retain(|(k, _)| k != key);
        self.sweeps.push((key.to_string(), values));
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .or_else(|| default_of(key))
            .unwrap_or_else(|| panic!("key {key} missing from the inventory"))
    }

    /// Every sweep point, in odometer order with the last sweep varying fastest.
    pub fn points(&self) -> Vec<RawConfig> {
        let mut points = vec![self.clone()];
        for (key, values) in &self.sweeps {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.values.insert(key.clone(), v.clone());
                        q
                    })
                })
                .collect();
        }
        for p in &mut points {
            p.sweeps.clear();
        }
        points
    }

    /// `key=value` for every swept key, in sweep order.
    pub fn swept_values(&self, point: &RawConfig) -> String {
        self.sweeps
            .iter()
            .map(|(k, _)| format!("{k}={}", point.get(k)))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::from_raw(self)
    }
}

fn parse<T: FromStr>(raw: &RawConfig, key: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    let v = raw.get(key);
    v.parse()
        .map_err(|e| HarnessError::Config(format!("{key} = {v:?}: {e}")))
}

fn parse_list<T: FromStr>(raw: &RawConfig, key: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    raw.get(key)
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|e| HarnessError::Config(format!("{key} entry {s:?}: {e}")))
        })
        .collect()
}

fn parse_bool(raw: &RawConfig, key: &str) -> Result<bool> {
    match raw.get(key) {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        v => Err(HarnessError::Config(format!("{key} = {v:?}: expected true or false"))),
    }
}

/// One fully typed sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: u64,
    pub out: PathBuf,
    /// Non-sensory widths `n¹ … n^L`.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub train: TrainConfig,
    pub retrieval: RetrievalConfig,
    pub source: DataSource,
    pub n: usize,
    pub shape: Shape,
    pub captions: Option<PathBuf>,
    pub caption_len: usize,
    pub corruption: Corruption,
    pub noise_level: f64,
    pub noise_scale: NoiseScale,
    pub mask_kind: MaskKind,
    pub mask_fraction: f64,
    pub known: KnownModality,
    pub mhn_betas: Vec<f64>,
    pub mhn_copies: Vec<usize>,
    pub mhn_iters: usize,
    pub ae_hidden: Vec<usize>,
    pub ae_epochs: usize,
    pub ae_lr: f64,
    pub ae_iters: usize,
    pub gradcheck_trials: usize,
    pub gradcheck_widths: Vec<usize>,
    pub gradcheck_h: f64,
    pub gradcheck_activation: Activation,
    pub grid_items: usize,
    pub checkpoint: bool,
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let task: Task = parse(raw, "task")?;
        let hidden: Vec<usize> = if raw.get("widths").is_empty() {
            let depth: usize = parse(raw, "depth")?;
            let width: usize = parse(raw, "width")?;
            if depth == 0 || width == 0 {
                return Err(HarnessError::Config("depth and width must be positive".into()));
            }
            vec![width; depth]
        } else {
            parse_list(raw, "widths")?
        };
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(HarnessError::Config(format!("widths {hidden:?} must be non-empty and positive")));
        }
        let threshold = match raw.get("retrieval.threshold") {
            "" => match task {
                Task::Denoise | Task::AeCompare => DENOISE_THRESHOLD,
                Task::MhnCompare => DENOISE_THRESHOLD,
                _ => COMPLETION_THRESHOLD,
            },
            _ => parse(raw, "retrieval.threshold")?,
        };
        let corruption = match raw.get("corruption") {
            "" => match task {
                Task::Complete | Task::MhnCompare => Corruption::Mask,
                Task::Hetero => Corruption::None,
                _ => Corruption::Noise,
            },
            _ => parse::<Corruption>(raw, "corruption")?,
        };
        let source = match raw.get("data.source") {
            "procedural" => DataSource::Procedural,
            "captioned" => DataSource::Captioned,
            path => DataSource::Directory(PathBuf::from(path)),
        };
        let train = TrainConfig {
            steps: parse(raw, "train.steps")?,
            gamma: parse(raw, "train.gamma")?,
            alpha: parse(raw, "train.alpha")?,
            alpha_decay: parse(raw, "train.alpha_decay")?,
            max_epochs: parse(raw, "train.epochs")?,
            energy_tol: parse(raw, "train.energy_tol")?,
            seed: parse(raw, "seed")?,
            mode: parse::<UpdateMode>(raw, "train.mode")?,
            optimizer: parse::<Optimizer>(raw, "train.optimizer")?,
        };
        train
            .validate()
            .map_err(|e| HarnessError::Config(format!("training settings: {e}")))?;
        let steps = match raw.get("retrieval.steps") {
            "" => match corruption {
                Corruption::Noise => DENOISE_STEPS,
                _ => COMPLETION_STEPS,
            },
            _ => parse(raw, "retrieval.steps")?,
        };
        let retrieval = RetrievalConfig {
            steps,
            gamma: parse(raw, "retrieval.gamma")?,
            f_iterations: parse(raw, "retrieval.f_iterations")?,
            threshold,
            clip: parse_bool(raw, "retrieval.clip")?,
        };
        retrieval
            .validate()
            .map_err(|e| HarnessError::Config(format!("retrieval settings: {e}")))?;
        let n: usize = parse(raw, "data.n")?;
        if n == 0 {
            return Err(HarnessError::Config("data.n must be at least 1".into()));
        }
        let shape = Shape::new(parse(raw, "data.channels")?, parse(raw, "data.height")?, parse(raw, "data.width")?);
        if shape.is_empty() {
            return Err(HarnessError::Config("image shape must be positive".into()));
        }
        let mask_fraction: f64 = parse(raw, "mask.fraction")?;
        if !(mask_fraction > 0.0 && mask_fraction <= 1.0) {
            return Err(HarnessError::Config(format!("mask.fraction = {mask_fraction} must lie in (0, 1]")));
        }
        let noise_level: f64 = parse(raw, "noise.level")?;
        if !(noise_level >= 0.0) {
            return Err(HarnessError::Config(format!("noise.level = {noise_level} must be non-negative")));
        }
        let known = match raw.get("hetero.known") {
            "caption" => KnownModality::Caption,
            "image" => KnownModality::Image,
            "both" => KnownModality::Both,
            v => return Err(HarnessError::Config(format!("hetero.known = {v:?}"))),
        };
        let ae_hidden = if raw.get("ae.widths").is_empty() {
            hidden.clone()
        } else {
            parse_list(raw, "ae.widths")?
        };
        let mhn_betas: Vec<f64> = parse_list(raw, "mhn.betas")?;
        if mhn_betas.is_empty() || mhn_betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(HarnessError::Config("mhn.betas must be finite and positive".into()));
        }
        let mhn_copies: Vec<usize> = parse_list(raw, "mhn.copies")?;
        if mhn_copies.is_empty() || mhn_copies.contains(&0) {
            return Err(HarnessError::Config("mhn.copies must be positive".into()));
        }
        let captions = match raw.get("data.captions") {
            "" => None,
            p => Some(PathBuf::from(p)),
        };
        Ok(Self {
            task,
            seed: train.seed,
            out: PathBuf::from(raw.get("out")),
            hidden,
            activation: parse(raw, "activation")?,
            train,
            retrieval,
            source,
            n,
            shape,
            captions,
            caption_len: parse(raw, "data.caption_len")?,
            corruption,
            noise_level,
            noise_scale: parse(raw, "noise.scale")?,
            mask_kind: parse(raw, "mask.kind")?,
            mask_fraction,
            known,
            mhn_betas,
            mhn_copies,
            mhn_iters: parse(raw, "mhn.iters")?,
            ae_hidden,
            ae_epochs: parse(raw, "ae.epochs")?,
            ae_lr: parse(raw, "ae.lr")?,
            ae_iters: parse(raw, "ae.iters")?,
            gradcheck_trials: parse(raw, "gradcheck.trials")?,
            gradcheck_widths: parse_list(raw, "gradcheck.widths")?,
            gradcheck_h: parse(raw, "gradcheck.h")?,
            gradcheck_activation: parse(raw, "gradcheck.activation")?,
            grid_items: parse(raw, "grid.items")?,
            checkpoint: parse_bool(raw, "checkpoint")?,
        })
    }

    /// Full PCN widths for sensory dimension `d`.
    pub fn widths(&self, d: usize) -> Vec<usize> {
        std::iter::once(d).chain(self.hidden.iter().copied()).collect()
    }

    pub fn depth(&self) -> usize {
        self.hidden.len()
    }

    pub fn width(&self) -> usize {
        *self.hidden.iter().max().unwrap()
    }
}

/// The key inventory as a commented config file.
pub fn inventory() -> String {
    let mut out = String::new();
    for (k, v, help) in KEYS {
        out.push_str(&format!("# {help}\n{k} = {v}\n"));
    }
    out
}
