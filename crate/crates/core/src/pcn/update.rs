use ndarray::{Array1, Array2, Axis, Zip};

use super::{InferenceState, PcnModel};
use crate::error::{Error, Result};

/// Negative energy gradient with respect to every parameter, summed over the
/// batch: `ε^l f(x^{l+1})ᵀ` for `θ^{l+1}` and `ε^L` for `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStep {
    pub weights: Vec<Array2<f64>>,
    pub memory: Array1<f64>,
}

impl ParamStep {
    pub fn zeros_like(model: &PcnModel) -> Self {
        Self {
            weights: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            memory: Array1::zeros(model.memory.len()),
        }
    }

    pub fn add_assign(&mut self, other: &ParamStep) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        self.memory += &other.memory;
    }

    pub fn scale(&mut self, k: f64) {
        for w in &mut self.weights {
            *w *= k;
        }
        self.memory *= k;
    }
}

/// The descent direction `−∂E/∂θ`, `−∂E/∂b` at the (converged) state.
pub fn descent_direction(model: &PcnModel, state: &InferenceState) -> Result<ParamStep> {
    state.check_shapes(model)?;
    let act = model.activation();
    let depth = model.depth();
    let weights = (0..depth)
        .map(|l| state.errors[l].dot(&act.map(state.values[l + 1].view()).t()))
        .collect();
    let memory = state.errors[depth].sum_axis(Axis(1));
    Ok(ParamStep { weights, memory })
}

/// One plain gradient step on the parameters:
/// `θ^{l+1} += α ε^l f(x^{l+1})ᵀ` and `b += α ε^L`, summed over the batch.
///
/// Since `∂E/∂b = −ε^L`, the memory update is `+α ε^L`, which lowers the energy.
pub fn update_parameters(model: &mut PcnModel, state: &InferenceState, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("learning rate must be positive, got {alpha}")));
    }
    let step = descent_direction(model, state)?;
    apply_scaled(model, &step, alpha);
    Ok(())
}

pub(crate) fn apply_scaled(model: &mut PcnModel, step: &ParamStep, alpha: f64) {
    for (w, g) in model.weights.iter_mut().zip(&step.weights) {
        w.scaled_add(alpha, g);
    }
    model.memory.scaled_add(alpha, &step.memory);
}

/// How a descent direction is turned into a parameter change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// `θ += α · direction`, exactly [`update_parameters`].
    Sgd,
    /// Adam moment normalisation applied to the same local descent direction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam { .. } => "adam",
        }
    }
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::adam()),
            other => Err(Error::InvalidInput(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Running optimizer state for one model.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    steps: i32,
    first: Option<ParamStep>,
    second: Option<ParamStep>,
}

impl OptimizerState {
    pub fn new(kind: Optimizer) -> Self {
        Self {
            kind,
            steps: 0,
            first: None,
            second: None,
        }
    }

    pub fn apply(&mut self, model: &mut PcnModel, step: &ParamStep, alpha: f64) {
        match self.kind {
            Optimizer::Sgd => apply_scaled(model, step, alpha),
            Optimizer::Adam { beta1, beta2, eps } => {
                self.steps += 1;
                let m = self.first.get_or_insert_with(|| ParamStep::zeros_like(model));
                let v = self.second.get_or_insert_with(|| ParamStep::zeros_like(model));
                let c1 = 1.0 - beta1.powi(self.steps);
                let c2 = 1.0 - beta2.powi(self.steps);
                let update = |p: &mut ndarray::ArrayViewMutD<'_, f64>,
                              g: &ndarray::ArrayViewD<'_, f64>,
                              m: &mut ndarray::ArrayViewMutD<'_, f64>,
                              v: &mut ndarray::ArrayViewMutD<'_, f64>| {
                    Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *p += alpha * (*m / c1) / ((*v / c2).sqrt() + eps);
                    });
                };
                for l in 0..model.weights.len() {
                    update(
                        &mut model.weights[l].view_mut().into_dyn(),
                        &step.weights[l].view().into_dyn(),
                        &mut m.weights[l].view_mut().into_dyn(),
                        &mut v.weights[l].view_mut().into_dyn(),
                    );
                }
                update(
                    &mut model.memory.view_mut().into_dyn(),
                    &step.memory.view().into_dyn(),
                    &mut m.memory.view_mut().into_dyn(),
                    &mut v.memory.view_mut().into_dyn(),
                );
            }
        }
    }
}
