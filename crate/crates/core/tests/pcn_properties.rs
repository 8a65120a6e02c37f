use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::Rng;

use pcam::pcn::{
    descent_direction, inference_step, run_inference, update_parameters, ClampSpec, InferenceState, PcnModel,
};
use pcam::rng::{self, Purpose};
use pcam::Activation;

fn random_state(model: &PcnModel, seed: u64, batch: usize) -> InferenceState {
    let mut rng = rng::stream(seed, Purpose::Noise, 99);
    let values = model
        .widths()
        .iter()
        .map(|&n| Array2::from_shape_simple_fn((n, batch), || rng.random_range(-1.0..1.0)))
        .collect();
    InferenceState::from_values(model, values).unwrap()
}

fn widths_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..7, 2..5)
}

fn activation_strategy() -> impl Strategy<Value = Activation> {
    prop_oneof![Just(Activation::Tanh), Just(Activation::Relu), Just(Activation::Identity)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refresh_is_idempotent(widths in widths_strategy(), act in activation_strategy(), seed in 0u64..1000) {
        let model = PcnModel::init(&widths, act, seed).unwrap();
        let mut state = random_state(&model, seed, 2);
        let once = state.clone();
        state.refresh(&model).unwrap();
        prop_assert_eq!(once, state);
    }

    #[test]
    fn errors_are_values_minus_predictions(widths in widths_strategy(), seed in 0u64..1000) {
        let model = PcnModel::init(&widths, Activation::Tanh, seed).unwrap();
        let state = random_state(&model, seed, 3);
        for l in 0..=model.depth() {
            let diff = state.values(l) - state.predictions(l);
            prop_assert_eq!(&diff, state.errors(l));
        }
        for col in state.predictions(model.depth()).columns() {
            prop_assert_eq!(col, model.memory().view());
        }
    }

    #[test]
    fn small_steps_never_raise_energy(
        widths in prop::collection::vec(1usize..9, 3..4),
        act in prop_oneof![Just(Activation::Tanh), Just(Activation::Identity)],
        seed in 0u64..1000,
        clamp_all in any::<bool>(),
    ) {
        let model = PcnModel::init(&widths, act, seed).unwrap();
        let mut state = random_state(&model, seed, 1);
        let d = widths[0];
        let clamp = if clamp_all {
            ClampSpec::full(state.sensory_values().clone())
        } else {
            ClampSpec::free(d, 1)
        };
        let mut prev = state.energy();
        for _ in 0..200 {
            inference_step(&model, &mut state, &clamp, 0.05).unwrap();
            let e = state.energy();
            prop_assert!(e <= prev + 1e-9, "{} -> {}", prev, e);
            prev = e;
        }
    }

    #[test]
    fn clamped_entries_never_move(widths in widths_strategy(), seed in 0u64..1000, bits in prop::collection::vec(any::<bool>(), 6)) {
        let model = PcnModel::init(&widths, Activation::Relu, seed).unwrap();
        let d = widths[0];
        let mask: Vec<bool> = (0..d).map(|i| bits[i % bits.len()]).collect();
        let target = Array1::from_shape_fn(d, |i| i as f64 / d as f64);
        let clamp = ClampSpec::single(target.view(), &mask).unwrap();
        let mut state = InferenceState::feed_backward(&model, 1);
        clamp.apply(state.values_mut(0));
        state.refresh(&model).unwrap();
        run_inference(&model, &mut state, &clamp, 0.05, 25).unwrap();
        for i in 0..d {
            if mask[i] {
                prop_assert_eq!(state.sensory_values()[[i, 0]], target[i]);
            }
        }
    }

    #[test]
    fn zero_error_state_is_a_fixed_point(widths in widths_strategy(), act in activation_strategy(), seed in 0u64..1000) {
        let mut model = PcnModel::init(&widths, act, seed).unwrap();
        let mut state = InferenceState::feed_backward(&model, 1);
        prop_assert_eq!(state.energy(), 0.0);
        let before = state.clone();
        let clamp = ClampSpec::free(widths[0], 1);
        inference_step(&model, &mut state, &clamp, 0.1).unwrap();
        prop_assert_eq!(&before, &state);
        let params = model.clone();
        update_parameters(&mut model, &state, 0.1).unwrap();
        prop_assert_eq!(params, model);
    }
}

fn energy_at(model: &PcnModel, state: &InferenceState) -> f64 {
    let mut s = state.clone();
    s.refresh(model).unwrap();
    s.energy()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[test]
fn updates_match_finite_difference_gradients() {
    let h = 1e-5;
    for seed in 0..10 {
        let model = PcnModel::init(&[6, 5, 4], Activation::Tanh, seed).unwrap();
        let state = random_state(&model, seed, 1);
        let gamma = 0.1;
        let mut stepped = state.clone();
        inference_step(&model, &mut stepped, &ClampSpec::free(6, 1), gamma).unwrap();
        for l in 0..=model.depth() {
            for i in 0..model.widths()[l] {
                let mut plus = state.clone();
                plus.values_mut(l)[[i, 0]] += h;
                let mut minus = state.clone();
                minus.values_mut(l)[[i, 0]] -= h;
                let grad = (energy_at(&model, &plus) - energy_at(&model, &minus)) / (2.0 * h);
                let dx = stepped.values(l)[[i, 0]] - state.values(l)[[i, 0]];
                assert!(rel_err(dx, -gamma * grad) < 1e-4, "x[{l}][{i}]: {dx} vs {}", -gamma * grad);
            }
        }
        let dir = descent_direction(&model, &state).unwrap();
        for l in 1..=model.depth() {
            let w = model.weight(l);
            for (r, c) in (0..w.nrows()).flat_map(|r| (0..w.ncols()).map(move |c| (r, c))) {
                let mut plus = model.clone();
                plus.weight_mut(l)[[r, c]] += h;
                let mut minus = model.clone();
                minus.weight_mut(l)[[r, c]] -= h;
                let grad = (energy_at(&plus, &state) - energy_at(&minus, &state)) / (2.0 * h);
                assert!(rel_err(dir.weights[l - 1][[r, c]], -grad) < 1e-4);
            }
        }
        for i in 0..model.memory().len() {
            let mut plus = model.clone();
            plus.memory_mut()[i] += h;
            let mut minus = model.clone();
            minus.memory_mut()[i] -= h;
            let grad = (energy_at(&plus, &state) - energy_at(&minus, &state)) / (2.0 * h);
            assert!(rel_err(dir.memory[i], -grad) < 1e-4);
        }
    }
}

#[test]
fn identical_seeds_give_identical_trajectories() {
    let run = || {
        let model = PcnModel::init(&[8, 6, 4], Activation::Relu, 5).unwrap();
        let mut state = random_state(&model, 5, 2);
        let clamp = ClampSpec::full(state.sensory_values().clone());
        run_inference(&model, &mut state, &clamp, 0.05, 50).unwrap();
        state
    };
    assert_eq!(run(), run());
}

#[test]
fn doubling_errors_quadruples_energy() {
    let model = PcnModel::init(&[3, 2], Activation::Identity, 0).unwrap();
    let zero = Array2::<f64>::zeros((2, 1));
    let mut m0 = model.clone();
    m0.memory_mut().fill(0.0);
    m0.weight_mut(1).fill(0.0);
    let a = InferenceState::from_values(&m0, vec![Array2::from_elem((3, 1), 0.5), zero.clone()]).unwrap();
    let b = InferenceState::from_values(&m0, vec![Array2::from_elem((3, 1), 1.0), zero]).unwrap();
    assert!((b.energy() - 4.0 * a.energy()).abs() < 1e-12);
}

/// Relu makes the energy piecewise quadratic; steps that flip a unit's sign
/// can raise it slightly. Well below the flip scale descent holds again.
#[test]
fn relu_descends_with_fine_steps() {
    for seed in 0..20 {
        let model = PcnModel::init(&[32, 24, 16], Activation::Relu, seed).unwrap();
        let mut state = random_state(&model, seed, 1);
        let clamp = ClampSpec::full(state.sensory_values().clone());
        let mut prev = state.energy();
        for _ in 0..200 {
            inference_step(&model, &mut state, &clamp, 0.01).unwrap();
            let e = state.energy();
            assert!(e <= prev + 1e-9, "seed {seed}: {prev} -> {e}");
            prev = e;
        }
    }
}
