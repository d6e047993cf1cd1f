#[path = "common/random.rs"]
mod random;

use distillkit::data::GrayImage;
use distillkit::residual::{
    cooccurrence_features, directional_residual, embed, quantize_truncate, quantize_value,
    residual_map_scan, residual_predict, Direction, EmbedMode, Predictor, QuantizerParams,
    ResidualMap,
};
use distillkit::tensor::{
    conv_output_size, sgd_momentum_step, softmax_t, ConvLayer, MomentumState, Tensor,
};
use proptest::prelude::*;
use rand::Rng;
use random::*;

fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|x| x * x.ln())
        .sum::<f64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_normalizes_and_keeps_argmax(
        logits in prop::collection::vec(-30.0f64..30.0, 2..8),
        t in 1u32..=50,
    ) {
        let p = softmax_t(&logits, t as f64).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(Tensor::argmax(&p), Tensor::argmax(&logits));
    }

    #[test]
    fn entropy_grows_with_temperature(logits in prop::collection::vec(-10.0f64..10.0, 2..6)) {
        let h: Vec<f64> = [1.0, 10.0, 20.0, 30.0, 40.0, 50.0]
            .iter()
            .map(|&t| entropy(&softmax_t(&logits, t).unwrap()))
            .collect();
        for pair in h.windows(2) {
            prop_assert!(pair[1] >= pair[0] - 1e-15, "{:?}", h);
        }
        prop_assert!(h[5] <= (logits.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn quantizer_is_bounded_and_odd(r in -1e4f64..1e4, c in 0.1f64..8.0, t in 1u32..6) {
        let q = QuantizerParams { c, t_trunc: t };
        let v = quantize_value(r, &q);
        prop_assert!(v.abs() <= t as f64);
        prop_assert_eq!(v.fract(), 0.0);
        prop_assert_eq!(quantize_value(-r, &q), -v);
    }

    #[test]
    fn scan_equals_conv_bitwise(seed: u64) {
        let mut rng = rng(seed);
        let (m, n) = (rng.random_range(1..=14), rng.random_range(1..=14));
        let k = rng.random_range(1..=m.min(n));
        let s = rng.random_range(1..=4);
        let img = ResidualMap::from_fn(m, n, |_, _| rng.random_range(-50.0..50.0)).unwrap();
        let filter = ResidualMap::from_fn(k, k, |_, _| rng.random_range(-2.0..2.0)).unwrap();
        let scan = residual_map_scan(&img, &filter, s).unwrap();

        let mut conv = ConvLayer::zeros(1, 1, k, s);
        conv.weights.data_mut().copy_from_slice(filter.data());
        let out = conv.forward(&Tensor::new(vec![1, m, n], img.data().to_vec()).unwrap()).unwrap();

        let dims = ((m - k) / s + 1, (n - k) / s + 1);
        prop_assert_eq!(conv_output_size(m, n, k, s).unwrap(), dims);
        prop_assert_eq!((scan.rows(), scan.cols()), dims);
        prop_assert_eq!(out.shape(), &[1, dims.0, dims.1][..]);
        for (a, b) in scan.data().iter().zip(out.data()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn directional_form_matches_predictor(seed: u64) {
        let mut rng = rng(seed);
        let (offsets, weights) = real_taps(&mut rng);
        let img = pixel_map(&mut rng, 9, 10);
        let a = directional_residual(&img, &offsets, &weights).unwrap();
        let b = residual_predict(&img, &Predictor::directional(offsets, weights).unwrap()).unwrap();
        prop_assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{} vs {}", x, y);
        }
    }

    #[test]
    fn residual_is_linear(seed: u64) {
        let mut rng = rng(seed);
        let (offsets, weights) = integer_taps(&mut rng);
        let lambda = rng.random_range(-4..=4) as f64;
        let p = Predictor::new(offsets, weights, lambda).unwrap();
        let u = pixel_map(&mut rng, 8, 8);
        let e = ResidualMap::from_fn(8, 8, |_, _| rng.random_range(-1..=1) as f64).unwrap();
        let z = ResidualMap::from_fn(8, 8, |i, j| u.get(i, j) + e.get(i, j)).unwrap();
        let (rz, ru, re) = (
            residual_predict(&z, &p).unwrap(),
            residual_predict(&u, &p).unwrap(),
            residual_predict(&e, &p).unwrap(),
        );
        for ((a, b), c) in rz.data().iter().zip(ru.data()).zip(re.data()) {
            prop_assert_eq!(*a, b + c);
        }
    }

    #[test]
    fn cooccurrence_is_a_distribution(seed: u64, order in 2usize..4, vertical: bool) {
        let mut rng = rng(seed);
        let t = rng.random_range(1..=3u32);
        let r = ResidualMap::from_fn(7, 9, |_, _| rng.random_range(-20.0..20.0)).unwrap();
        let rq = quantize_truncate(&r, &QuantizerParams { c: 2.0, t_trunc: t }).unwrap();
        let dir = if vertical { Direction::Vertical } else { Direction::Horizontal };
        let h = cooccurrence_features(&rq, t, order, dir).unwrap();
        prop_assert_eq!(h.len(), (2 * t as usize + 1).pow(order as u32));
        prop_assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(h.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn embedding_adds_exactly_the_signal(seed: u64, rate in 0.05f64..1.0, texture: bool) {
        let mut rng = rng(seed);
        let (w, h) = (rng.random_range(4..=16), rng.random_range(4..=16));
        // Include saturated pixels so the clipping rules are exercised.
        let cover = GrayImage::from_fn(w, h, |_, _| match rng.random_range(0..10) {
            0 => 0,
            1 => 255,
            _ => rng.random(),
        })
        .unwrap();
        let mode = if texture { EmbedMode::Texture } else { EmbedMode::Uniform };
        let (stego, signal) = embed(&cover, rate, seed, mode).unwrap();
        let expected = (rate * (w * h) as f64).floor() as usize;
        prop_assert_eq!(signal.payload_len(), expected);
        prop_assert_eq!(signal.values.iter().filter(|&&v| v != 0).count(), expected);
        for r in 0..h {
            for c in 0..w {
                let (u, z, e) = (cover.get(r, c) as i32, stego.get(r, c) as i32, signal.get(r, c) as i32);
                prop_assert_eq!(z - u, e);
                prop_assert!(e.abs() <= 1);
                if u == 0 { prop_assert!(e >= 0); }
                if u == 255 { prop_assert!(e <= 0); }
            }
        }
    }

    #[test]
    fn momentum_step_is_literal(
        w0 in prop::collection::vec(-5.0f64..5.0, 1..6),
        momentum in 0.0f64..0.99,
        lr in 1e-4f64..1.0,
        steps in 1usize..5,
    ) {
        let n = w0.len();
        let mut w = Tensor::new(vec![n], w0.clone()).unwrap();
        let mut state = MomentumState::new(&[n], momentum, lr).unwrap();
        let (mut w_ref, mut v_ref) = (w0, vec![0.0; n]);
        for s in 0..steps {
            let g: Vec<f64> = (0..n).map(|i| ((s * n + i) as f64).sin()).collect();
            sgd_momentum_step(&mut w, &Tensor::new(vec![n], g.clone()).unwrap(), &mut state).unwrap();
            for i in 0..n {
                v_ref[i] = momentum * v_ref[i] + g[i];
                w_ref[i] -= lr * v_ref[i];
            }
        }
        prop_assert_eq!(w.data(), &w_ref[..]);
        prop_assert_eq!(state.velocity.data(), &v_ref[..]);
    }
}

#[test]
fn exactly_predicted_covers_have_zero_residual() {
    let mut rng = rng(7);
    for _ in 0..50 {
        let (offsets, weights) = integer_taps(&mut rng);
        let p = Predictor::directional(offsets, weights).unwrap();
        let level = rng.random_range(0..=255) as f64;
        let flat = ResidualMap::from_fn(8, 8, |_, _| level).unwrap();
        assert!(residual_predict(&flat, &p)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
    }
}
