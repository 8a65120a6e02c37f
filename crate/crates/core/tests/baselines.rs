use ndarray::{Array1, Array2};
use proptest::prelude::*;

use pcam::baselines::ae::ae_fit;
use pcam::baselines::mhn::softmax_in_place;
use pcam::baselines::{ae_loss_and_grad, mhn_retrieve, mhn_step, AeModel, MhnModel};
use pcam::data::ExemplarSet;
use pcam::Activation;

fn patterns() -> impl Strategy<Value = (Array2<f64>, Array1<f64>)> {
    (1usize..6, 1usize..8).prop_flat_map(|(d, m)| {
        (
            prop::collection::vec(0.0f64..1.0, d * m).prop_map(move |v| Array2::from_shape_vec((d, m), v).unwrap()),
            prop::collection::vec(-2.0f64..2.0, d).prop_map(Array1::from),
        )
    })
}

proptest! {
    #[test]
    fn softmax_weights_sum_to_one(scores in prop::collection::vec(-50.0f64..50.0, 1..40), beta in 0.01f64..1000.0) {
        let mut s = Array1::from(scores);
        softmax_in_place(&mut s, beta);
        prop_assert!((s.sum() - 1.0).abs() < 1e-12);
        prop_assert!(s.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn mhn_output_stays_in_the_hull((x, q) in patterns(), beta in 0.1f64..1000.0) {
        let m = MhnModel::new(x.clone(), beta, 1).unwrap();
        let out = mhn_step(&m, q.view()).unwrap();
        for (i, row) in x.rows().into_iter().enumerate() {
            let lo = row.fold(f64::INFINITY, |a, &b| a.min(b));
            let hi = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            prop_assert!(out[i] >= lo - 1e-12 && out[i] <= hi + 1e-12);
        }
    }

    #[test]
    fn masked_mhn_keeps_known_entries((x, q) in patterns(), beta in 0.1f64..100.0) {
        let m = MhnModel::new(x, beta, 1).unwrap();
        let mask: Vec<bool> = (0..q.len()).map(|i| i % 2 == 0).collect();
        let out = mhn_retrieve(&m, q.view(), 3, Some(&mask)).unwrap();
        for i in (0..q.len()).step_by(2) {
            prop_assert_eq!(out[i], q[i]);
        }
    }
}

#[test]
fn stored_pattern_is_recalled_at_high_beta() {
    let x = Array2::from_shape_fn((8, 5), |(i, j)| ((i * 5 + j * 3) % 7) as f64 / 7.0);
    let m = MhnModel::new(x.clone(), 1000.0, 1).unwrap();
    for j in 0..5 {
        let out = mhn_retrieve(&m, x.column(j), 1, None).unwrap();
        let err = (&out - &x.column(j)).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        assert!(err < 1e-6, "column {j}: {err}");
    }
}

#[test]
fn ae_gradients_match_finite_differences() {
    let h = 1e-5;
    for seed in 0..5 {
        let model = AeModel::init(&[5, 4, 3, 5], Activation::Tanh, seed).unwrap();
        let data = Array2::from_shape_fn((5, 3), |(i, j)| ((i + 2 * j + seed as usize) % 5) as f64 / 5.0);
        let (_, grad) = ae_loss_and_grad(&model, data.view()).unwrap();
        for l in 0..model.weights().len() {
            let shape = model.weights()[l].dim();
            for r in 0..shape.0 {
                for c in 0..shape.1 {
                    let mut plus = model.clone();
                    plus.weights_mut()[l][[r, c]] += h;
                    let mut minus = model.clone();
                    minus.weights_mut()[l][[r, c]] -= h;
                    let fd = (ae_loss_and_grad(&plus, data.view()).unwrap().0
                        - ae_loss_and_grad(&minus, data.view()).unwrap().0)
                        / (2.0 * h);
                    let an = grad.weights[l][[r, c]];
                    assert!((an - fd).abs() / an.abs().max(fd.abs()).max(1e-8) < 1e-4);
                }
                let mut plus = model.clone();
                plus.biases_mut()[l][r] += h;
                let mut minus = model.clone();
                minus.biases_mut()[l][r] -= h;
                let fd = (ae_loss_and_grad(&plus, data.view()).unwrap().0
                    - ae_loss_and_grad(&minus, data.view()).unwrap().0)
                    / (2.0 * h);
                let an = grad.biases[l][r];
                assert!((an - fd).abs() / an.abs().max(fd.abs()).max(1e-8) < 1e-4);
            }
        }
    }
}

#[test]
fn ae_loss_settles_for_small_rates() {
    let set = ExemplarSet::from_items(&[vec![0.1, 0.7, 0.3, 0.9], vec![0.6, 0.2, 0.8, 0.4]]).unwrap();
    let mut model = AeModel::init(&[4, 6, 4], Activation::Relu, 7).unwrap();
    let trace = ae_fit(&mut model, &set, 400, 0.01).unwrap();
    assert!(trace.settles(0.5, 1e-9));
    assert!(trace.losses.last().unwrap() < &trace.losses[0]);
}
