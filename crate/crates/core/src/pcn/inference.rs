use ndarray::{Array2, Zip};

use super::{ClampSpec, InferenceState, PcnModel};
use crate::error::{Error, Result};

/// One synchronous gradient step of the value nodes on the energy, with the
/// parameters held fixed.
///
/// Hidden and memory layers move by `γ (−ε^l + f'(x^l) ⊙ θ^lᵀ ε^{l−1})`. Clamped
/// sensory entries stay at their clamp values; free sensory entries move by
/// `−γ ε^0`. The state is refreshed afterwards.
pub fn inference_step(
    model: &PcnModel,
    state: &mut InferenceState,
    clamp: &ClampSpec,
    gamma: f64,
) -> Result<()> {
    check(model, state, clamp, gamma)?;
    step_unchecked(model, state, clamp, gamma);
    Ok(())
}

/// `steps` applications of [`inference_step`].
pub fn run_inference(
    model: &PcnModel,
    state: &mut InferenceState,
    clamp: &ClampSpec,
    gamma: f64,
    steps: usize,
) -> Result<()> {
    check(model, state, clamp, gamma)?;
    if steps == 0 {
        return Err(Error::InvalidInput("inference needs at least one step".into()));
    }
    for _ in 0..steps {
        step_unchecked(model, state, clamp, gamma);
    }
    Ok(())
}

fn check(model: &PcnModel, state: &InferenceState, clamp: &ClampSpec, gamma: f64) -> Result<()> {
    state.check_shapes(model)?;
    clamp.check(model, state.batch_size())?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("integration step must be positive, got {gamma}")));
    }
    Ok(())
}

pub(crate) fn step_unchecked(
    model: &PcnModel,
    state: &mut InferenceState,
    clamp: &ClampSpec,
    gamma: f64,
) {
    let depth = model.depth();
    let act = model.activation();
    // Bottom-up error feedback for every layer above the sensory one, computed
    // from the pre-step state before anything moves.
    let feedback: Vec<Array2<f64>> = (1..=depth)
        .map(|l| {
            let mut fb = model.weight(l).t().dot(&state.errors[l - 1]);
            act.scale_by_derivative(state.values[l].view(), &mut fb);
            fb
        })
        .collect();
    for (l, fb) in (1..=depth).zip(feedback) {
        Zip::from(&mut state.values[l])
            .and(&state.errors[l])
            .and(&fb)
            .for_each(|x, &e, &f| *x += gamma * (f - e));
    }
    Zip::from(&mut state.values[0])
        .and(&state.errors[0])
        .and(clamp.mask())
        .and(clamp.values())
        .for_each(|x, &e, &m, &v| {
            if m {
                *x = v;
            } else {
                *x -= gamma * e;
            }
        });
    state.refresh_unchecked(model);
}
