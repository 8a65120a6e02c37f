//! Finite-difference check of the inference and learning updates.

use ndarray::Array2;
use rand::Rng;

use pcam::pcn::{descent_direction, inference_step, ClampSpec, InferenceState, PcnModel};
use pcam::rng::{self, Purpose};
use pcam::Activation;

use crate::error::{HarnessError, Result};

/// Largest acceptable norm-wise relative error.
pub const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub widths: Vec<usize>,
    /// Value-node update against `-∂E/∂x`.
    pub values: f64,
    /// Weight update against `-∂E/∂θ`.
    pub weights: f64,
    /// Memory-vector update against `-∂E/∂b`.
    pub memory: f64,
}

impl TrialResult {
    pub fn max(&self) -> f64 {
        self.values.max(self.weights).max(self.memory)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub trials: Vec<TrialResult>,
}

impl GradCheckReport {
    pub fn max_values(&self) -> f64 {
        self.trials.iter().map(|t| t.values).fold(0.0, f64::max)
    }

    pub fn max_weights(&self) -> f64 {
        self.trials.iter().map(|t| t.weights).fold(0.0, f64::max)
    }

    pub fn max_memory(&self) -> f64 {
        self.trials.iter().map(|t| t.memory).fold(0.0, f64::max)
    }

    pub fn max_error(&self) -> f64 {
        self.trials.iter().map(TrialResult::max).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_error() < TOLERANCE
    }
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn energy(model: &PcnModel, state: &InferenceState) -> f64 {
    let mut s = state.clone();
    s.refresh(model).expect("shapes fixed");
    s.energy()
}

fn central(h: f64, mut eval: impl FnMut(f64) -> f64) -> f64 {
    (eval(h) - eval(-h)) / (2.0 * h)
}

/// Compare the analytic updates of one model and state against central
/// differences of the energy with step `h`.
pub fn check_model(model: &PcnModel, state: &InferenceState, h: f64) -> Result<TrialResult> {
    let mut stepped = state.clone();
    let free = ClampSpec::free(model.sensory_dim(), state.batch_size());
    inference_step(model, &mut stepped, &free, 1.0)?;
    let (mut an, mut fd) = (Vec::new(), Vec::new());
    for l in 0..=model.depth() {
        let delta = stepped.values(l) - state.values(l);
        for ((i, j), &dx) in delta.indexed_iter() {
            an.push(dx);
            fd.push(-central(h, |e| {
                let mut s = state.clone();
                s.values_mut(l)[[i, j]] += e;
                energy(model, &s)
            }));
        }
    }
    let values = relative_error(&an, &fd);

    let dir = descent_direction(model, state)?;
    let (mut an, mut fd) = (Vec::new(), Vec::new());
    for l in 1..=model.depth() {
        for ((r, c), &g) in dir.weights[l - 1].indexed_iter() {
            an.push(g);
            fd.push(-central(h, |e| {
                let mut m = model.clone();
                m.weight_mut(l)[[r, c]] += e;
                energy(&m, state)
            }));
        }
    }
    let weights = relative_error(&an, &fd);

    let (mut an, mut fd) = (Vec::new(), Vec::new());
    for (i, &g) in dir.memory.iter().enumerate() {
        an.push(g);
        fd.push(-central(h, |e| {
            let mut m = model.clone();
            m.memory_mut()[i] += e;
            energy(&m, state)
        }));
    }
    let memory = relative_error(&an, &fd);
    Ok(TrialResult {
        widths: model.widths().to_vec(),
        values,
        weights,
        memory,
    })
}

/// Check `trials` random models. Each layer width is drawn from
/// `1..=max_widths[l]`, parameters from the seeded initializer, and value
/// nodes uniformly from `[-1, 1]`.
pub fn gradcheck(max_widths: &[usize], activation: Activation, trials: usize, h: f64, seed: u64) -> Result<GradCheckReport> {
    if activation == Activation::Relu {
        return Err(HarnessError::Config(
            "gradient check needs a smooth activation; relu has a kink at zero".into(),
        ));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(HarnessError::Config(format!("finite-difference step h = {h} must be positive")));
    }
    if trials == 0 {
        return Err(HarnessError::Config("gradient check needs at least one trial".into()));
    }
    if max_widths.len() < 2 || max_widths.contains(&0) {
        return Err(HarnessError::Config(format!("gradient check widths {max_widths:?} are degenerate")));
    }
    let mut out = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let mut rng = rng::stream(seed, Purpose::GradCheck, t);
        let widths: Vec<usize> = max_widths.iter().map(|&m| rng.random_range(1..=m)).collect();
        let model = PcnModel::init(&widths, activation, seed.wrapping_add(t))?;
        let values = widths
            .iter()
            .map(|&n| Array2::from_shape_simple_fn((n, 1), || rng.random_range(-1.0..1.0)))
            .collect();
        let state = InferenceState::from_values(&model, values)?;
        out.push(check_model(&model, &state, h)?);
    }
    Ok(GradCheckReport { trials: out })
}
