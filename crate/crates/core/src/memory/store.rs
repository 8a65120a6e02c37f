use ndarray::s;
use rand::seq::SliceRandom;

use crate::data::ExemplarSet;
use crate::error::{Error, Result};
use crate::par;
use crate::pcn::{self, ClampSpec, InferenceState, Optimizer, OptimizerState, ParamStep, PcnModel};
use crate::rng::{self, Purpose};

/// Whether parameter updates follow every sample or every pass over the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateMode {
    /// One update per item, items visited in a seeded shuffled order.
    #[default]
    Sequential,
    /// Inference for all items against the same parameters, then one update
    /// from the summed descent directions.
    Batch,
}

impl std::str::FromStr for UpdateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sequential" | "online" => Ok(UpdateMode::Sequential),
            "batch" => Ok(UpdateMode::Batch),
            other => Err(Error::InvalidInput(format!("unknown update mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Inference steps `T` per training iteration.
    pub steps: usize,
    /// Integration step `γ`.
    pub gamma: f64,
    /// Learning rate `α`.
    pub alpha: f64,
    /// Multiplier applied to `α` after every epoch.
    pub alpha_decay: f64,
    pub max_epochs: usize,
    /// Stop once the mean per-sample energy drops below this.
    pub energy_tol: f64,
    pub seed: u64,
    pub mode: UpdateMode,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            gamma: 0.01,
            alpha: 0.003,
            alpha_decay: 1.0,
            max_epochs: 300,
            energy_tol: 1e-5,
            seed: 0,
            mode: UpdateMode::Sequential,
            optimizer: Optimizer::adam(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, v: String| Err(Error::InvalidInput(format!("{field} = {v} is out of range")));
        if self.steps == 0 {
            return bad("steps", self.steps.to_string());
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma", self.gamma.to_string());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha", self.alpha.to_string());
        }
        if !(self.alpha_decay > 0.0 && self.alpha_decay <= 1.0) {
            return bad("alpha_decay", self.alpha_decay.to_string());
        }
        if !(self.energy_tol >= 0.0) {
            return bad("energy_tol", self.energy_tol.to_string());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// Mean over items of the energy at the end of inference, before the update.
    pub mean_energy: f64,
    /// The sensory-layer share of `mean_energy`.
    pub mean_sensory_energy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub epochs: Vec<EpochStats>,
    pub converged: bool,
}

impl TrainTrace {
    pub fn final_energy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_energy)
    }

    /// Whether mean energy never rises over the last `fraction` of epochs
    /// (within `tol`).
    pub fn settles(&self, fraction: f64, tol: f64) -> bool {
        let n = self.epochs.len();
        let start = n - ((n as f64 * fraction).ceil() as usize).min(n);
        self.epochs[start..]
            .windows(2)
            .all(|w| w[1].mean_energy <= w[0].mean_energy + tol)
    }
}

/// Train `model` to generate every item of `data`: clamp the sensory layer to
/// the item, relax the value nodes for `T` steps starting from the model's own
/// top-down generation, then update the parameters. Repeats until the mean
/// energy falls below `energy_tol` or `max_epochs` passes have run.
pub fn store(model: &mut PcnModel, data: &ExemplarSet, cfg: &TrainConfig) -> Result<TrainTrace> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("cannot store an empty dataset".into()));
    }
    if data.dim() != model.sensory_dim() {
        return Err(Error::dim("exemplar dimension", model.sensory_dim(), data.dim()));
    }
    let mut opt = OptimizerState::new(cfg.optimizer);
    let mut trace = TrainTrace::default();
    let mut alpha = cfg.alpha;
    for epoch in 0..cfg.max_epochs {
        let stats = match cfg.mode {
            UpdateMode::Batch => batch_epoch(model, data, cfg, &mut opt, alpha),
            UpdateMode::Sequential => sequential_epoch(model, data, cfg, &mut opt, alpha, epoch as u64),
        };
        trace.epochs.push(stats);
        if !stats.mean_energy.is_finite() {
            return Err(Error::InvalidInput(format!(
                "training diverged at epoch {epoch}; lower gamma or alpha"
            )));
        }
        if stats.mean_energy < cfg.energy_tol {
            trace.converged = true;
            break;
        }
        alpha *= cfg.alpha_decay;
    }
    Ok(trace)
}

/// Relax a batch of items clamped on the full sensory layer.
pub(crate) fn relax_clamped(model: &PcnModel, items: ndarray::ArrayView2<'_, f64>, steps: usize, gamma: f64) -> InferenceState {
    let mut state = InferenceState::feed_backward(model, items.ncols());
    let clamp = ClampSpec::full(items.to_owned());
    clamp.apply(state.values_mut(0));
    state.refresh_unchecked(model);
    for _ in 0..steps {
        pcn::step_unchecked(model, &mut state, &clamp, gamma);
    }
    state
}

fn batch_epoch(
    model: &mut PcnModel,
    data: &ExemplarSet,
    cfg: &TrainConfig,
    opt: &mut OptimizerState,
    alpha: f64,
) -> EpochStats {
    let frozen = &*model;
    let parts = par::map_chunks(data.len(), par::BATCH_CHUNK, |r| {
        let state = relax_clamped(frozen, data.matrix().slice(s![.., r]), cfg.steps, cfg.gamma);
        let dir = pcn::descent_direction(frozen, &state).expect("shapes checked");
        (state.energy(), state.layer_energy(0), dir)
    });
    let mut total = ParamStep::zeros_like(model);
    let (mut energy, mut sensory) = (0.0, 0.0);
    for (e, s0, dir) in &parts {
        energy += e;
        sensory += s0;
        total.add_assign(dir);
    }
    opt.apply(model, &total, alpha);
    let n = data.len() as f64;
    EpochStats {
        mean_energy: energy / n,
        mean_sensory_energy: sensory / n,
    }
}

fn sequential_epoch(
    model: &mut PcnModel,
    data: &ExemplarSet,
    cfg: &TrainConfig,
    opt: &mut OptimizerState,
    alpha: f64,
    epoch: u64,
) -> EpochStats {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng::stream(cfg.seed, Purpose::Shuffle, epoch));
    let (mut energy, mut sensory) = (0.0, 0.0);
    for k in order {
        let state = relax_clamped(model, data.matrix().slice(s![.., k..k + 1]), cfg.steps, cfg.gamma);
        energy += state.energy();
        sensory += state.layer_energy(0);
        let dir = pcn::descent_direction(model, &state).expect("shapes checked");
        opt.apply(model, &dir, alpha);
    }
    let n = data.len() as f64;
    EpochStats {
        mean_energy: energy / n,
        mean_sensory_energy: sensory / n,
    }
}
