mod common;

use agebo_uq::nn::{
    build_network, checkpoint, evaluate_nll, nll_loss, train, Activation, LayerSpec, Network,
    NetworkSpec, OptimizerKind, Samples, SkipEdge, TrainingConfig, NLL_CONST, VARIANCE_FLOOR,
};
use agebo_uq::Error;
use common::*;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn single_dense_layer_param_count_and_determinism() {
    let spec = NetworkSpec::feed_forward(2, 1, vec![LayerSpec::dense(1, Activation::Relu)]);
    let a: Network<f64> = build_network(spec.clone(), 7).unwrap();
    let b: Network<f64> = build_network(spec, 7).unwrap();
    // dense 2*1+1, head 2 * 1 * (1 + 1)
    assert_eq!(a.param_count(), 3 + 4);
    assert_eq!(a.weights(), b.weights());
}

#[test]
fn five_stacked_lstm_cells_param_count() {
    let hidden = [16usize, 32, 64, 128, 256];
    let (input_dim, seq_len, output_dim) = (10, 9, 80);
    let spec = NetworkSpec {
        input_dim,
        seq_len,
        output_dim,
        layers: hidden.iter().map(|&h| LayerSpec::recurrent(h)).collect(),
        skips: vec![],
    };
    let mut expected = 0;
    let mut prev = input_dim;
    for &h in &hidden {
        expected += 4 * h * (prev + h + 1);
        prev = h;
    }
    expected += 2 * output_dim * (seq_len * prev + 1);
    let net: Network<f64> = build_network(spec, 0).unwrap();
    assert_eq!(net.param_count(), expected);
}

#[test]
fn projection_params_counted_for_mismatched_skip() {
    let spec = NetworkSpec::feed_forward(
        3,
        1,
        vec![LayerSpec::dense(4, Activation::Tanh), LayerSpec::dense(5, Activation::Tanh)],
    )
    .with_skips(vec![SkipEdge { from: 0, to: 2 }, SkipEdge { from: 1, to: 3 }]);
    // layer1 3->4, layer2 4->5, proj 0->2 is 4x3, proj 1->3 is 5x4, head 2*(5+1)
    let expected = (3 * 4 + 4) + 4 * 3 + (4 * 5 + 5) + 5 * 4 + 2 * (5 + 1);
    let net: Network<f64> = build_network(spec, 1).unwrap();
    assert_eq!(net.param_count(), expected);
}

#[test]
fn invalid_spec_is_rejected() {
    let spec = NetworkSpec::feed_forward(2, 1, vec![LayerSpec::dense(0, Activation::Relu)]);
    assert!(matches!(build_network::<f64>(spec, 0), Err(Error::InvalidSpec(_))));
    let cyc = NetworkSpec::feed_forward(2, 1, vec![LayerSpec::dense(3, Activation::Relu)])
        .with_skips(vec![SkipEdge { from: 1, to: 1 }]);
    assert!(build_network::<f64>(cyc, 0).is_err());
}

#[test]
fn zero_weights_give_softplus_zero_variance() {
    let spec = NetworkSpec::feed_forward(3, 2, vec![LayerSpec::dense(4, Activation::Relu)]);
    let net = Network::<f64>::from_weights(spec.clone(), vec![0.0; build_network::<f64>(spec, 0).unwrap().param_count()]).unwrap();
    let pred = net.forward_gaussian(&[0.3, -1.0, 2.0]).unwrap();
    for (&m, &v) in pred.mean.iter().zip(&pred.variance) {
        assert_eq!(m, 0.0);
        assert!((v - (2f64.ln() + VARIANCE_FLOOR)).abs() < 1e-15);
    }
}

#[test]
fn identity_only_spec_feeds_input_to_head() {
    let spec = NetworkSpec::feed_forward(2, 1, vec![LayerSpec::identity(), LayerSpec::identity()]);
    let mut net: Network<f64> = build_network(spec, 0).unwrap();
    assert_eq!(net.param_count(), 2 * (2 + 1));
    // head layout: w_mean (1x2), b_mean, w_var (1x2), b_var
    net.weights_mut().copy_from_slice(&[1.0, 2.0, 0.5, 0.0, 0.0, 0.0]);
    let pred = net.forward_gaussian(&[3.0, -1.0]).unwrap();
    assert!((pred.mean[0] - (3.0 - 2.0 + 0.5)).abs() < 1e-15);
}

#[test]
fn equal_width_skip_adds_branches() {
    // input(2) -> dense 2 linear (identity weights) -> dense 2 linear (identity) ; skip 0 -> 2
    let spec = NetworkSpec::feed_forward(
        2,
        2,
        vec![LayerSpec::dense(2, Activation::Linear), LayerSpec::dense(2, Activation::Linear)],
    )
    .with_skips(vec![SkipEdge { from: 0, to: 2 }]);
    let mut net: Network<f64> = build_network(spec, 0).unwrap();
    let eye = [1.0, 0.0, 0.0, 1.0];
    let mut w = Vec::new();
    w.extend_from_slice(&eye); // layer 1 W
    w.extend_from_slice(&[0.0, 0.0]); // layer 1 b
    w.extend_from_slice(&[2.0, 0.0, 0.0, 2.0]); // layer 2 W
    w.extend_from_slice(&[0.0, 0.0]);
    w.extend_from_slice(&eye); // head mean
    w.extend_from_slice(&[0.0, 0.0]);
    w.extend_from_slice(&[0.0; 6]); // head var
    net.weights_mut().copy_from_slice(&w);
    let x = [1.5, -0.5];
    let pred = net.forward_gaussian(&x).unwrap();
    // layer 2 input = h1 + x = 2x, output = 4x
    assert!((pred.mean[0] - 6.0).abs() < 1e-12);
    assert!((pred.mean[1] + 2.0).abs() < 1e-12);
}

/// Straight-line dense-only forward pass, reading the documented parameter order.
fn reference_forward(spec: &NetworkSpec, w: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut cursor = 0;
    let mut take = |n: usize| {
        let s = &w[cursor..cursor + n];
        cursor += n;
        s.to_vec()
    };
    let mut nodes: Vec<Vec<f64>> = vec![x.to_vec()];
    let l = spec.layers.len();
    for node in 1..=l + 1 {
        let mut z = nodes[node - 1].clone();
        for e in spec.skips.iter().filter(|e| e.to == node) {
            let src = &nodes[e.from];
            if src.len() == z.len() {
                for (a, b) in z.iter_mut().zip(src) {
                    *a += b;
                }
            } else {
                let p = take(z.len() * src.len());
                for r in 0..z.len() {
                    z[r] += (0..src.len()).map(|c| p[r * src.len() + c] * src[c]).sum::<f64>();
                }
            }
        }
        if node == l + 1 {
            let o = spec.output_dim;
            let wm = take(o * z.len());
            let bm = take(o);
            let wv = take(o * z.len());
            let bv = take(o);
            let lin = |wt: &[f64], b: &[f64]| -> Vec<f64> {
                (0..o)
                    .map(|r| b[r] + (0..z.len()).map(|c| wt[r * z.len() + c] * z[c]).sum::<f64>())
                    .collect()
            };
            let mean = lin(&wm, &bm);
            let var = lin(&wv, &bv)
                .into_iter()
                .map(|r| (1.0 + r.exp()).ln() + 1e-6)
                .collect();
            return (mean, var);
        }
        let layer = spec.layers[node - 1];
        let out = layer.width;
        let wt = take(out * z.len());
        let b = take(out);
        let h = (0..out)
            .map(|r| {
                let a = b[r] + (0..z.len()).map(|c| wt[r * z.len() + c] * z[c]).sum::<f64>();
                match layer.activation {
                    Activation::Relu => a.max(0.0),
                    Activation::Tanh => a.tanh(),
                    Activation::Linear => a,
                }
            })
            .collect();
        nodes.push(h);
    }
    unreachable!()
}

#[test]
fn forward_matches_reference_implementation() {
    let mut r = rng(11);
    for trial in 0..25 {
        let n_layers = r.random_range(1..=3);
        let layers: Vec<_> = (0..n_layers)
            .map(|_| {
                let act = [Activation::Relu, Activation::Tanh, Activation::Linear][r.random_range(0..3)];
                LayerSpec::dense(r.random_range(1..=6), act)
            })
            .collect();
        let mut skips = Vec::new();
        for to in 2..=n_layers + 1 {
            for from in 0..to - 1 {
                if r.random_bool(0.5) {
                    skips.push(SkipEdge { from, to });
                }
            }
        }
        let spec = NetworkSpec::feed_forward(3, 2, layers).with_skips(skips);
        let net: Network<f64> = build_network(spec.clone(), trial).unwrap();
        let x: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
        let pred = net.forward_gaussian(&x).unwrap();
        let (mean, var) = reference_forward(&spec, net.weights(), &x);
        for k in 0..2 {
            assert!((pred.mean[k] - mean[k]).abs() < 1e-12);
            assert!((pred.variance[k] - var[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn forward_dimension_mismatch() {
    let spec = NetworkSpec::feed_forward(3, 1, vec![LayerSpec::dense(2, Activation::Relu)]);
    let net: Network<f64> = build_network(spec, 0).unwrap();
    assert!(matches!(net.forward_gaussian(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn overflow_is_reported() {
    let spec = NetworkSpec::feed_forward(1, 1, vec![LayerSpec::dense(1, Activation::Linear)]);
    let net = Network::<f64>::from_weights(spec, vec![1e300, 0.0, 1e300, 0.0, 0.0, 0.0]).unwrap();
    assert!(matches!(net.forward_gaussian(&[1e300]), Err(Error::NumericOverflow { .. })));
}

#[test]
fn gradient_matches_finite_differences() {
    let mut r = rng(5);
    for _ in 0..20 {
        let spec = random_spec(&mut r);
        let seed = r.random();
        let net: Network<f64> = build_network(spec.clone(), seed).unwrap();
        let data = random_samples(&spec, 4, &mut r);
        let analytic = analytic_gradient(&net, &data);
        let numeric = finite_difference(&net, &data, 1e-6);
        let err = max_relative_error(&analytic, &numeric, 1e-5);
        assert!(err < 1e-4, "relative error {err} for {spec:?}");
    }
}

#[test]
fn gradient_of_squared_term_vanishes_at_exact_fit() {
    // Linear net with zero weights predicts mu = 0; targets 0 leave only the log-variance term.
    let spec = NetworkSpec::feed_forward(2, 1, vec![LayerSpec::dense(3, Activation::Tanh)]);
    let mut net: Network<f64> = build_network(spec.clone(), 3).unwrap();
    let n = net.param_count();
    let head_mean = n - 2 * (3 + 1);
    for w in &mut net.weights_mut()[head_mean..head_mean + 4] {
        *w = 0.0;
    }
    let data = Samples::new(vec![0.2, 0.4, -1.0, 0.3], vec![0.0, 0.0], 2, 1).unwrap();
    let g = analytic_gradient(&net, &data);
    // mean-head weights and bias receive no gradient when mu == y
    assert!(g[head_mean..head_mean + 4].iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn duplicated_batch_leaves_gradient_unchanged() {
    let mut r = rng(9);
    let spec = random_spec(&mut r);
    let net: Network<f64> = build_network(spec.clone(), 2).unwrap();
    let data = random_samples(&spec, 5, &mut r);
    let g1 = analytic_gradient(&net, &data);
    let mut inputs = data.inputs.clone();
    inputs.extend_from_slice(&data.inputs);
    let mut targets = data.targets.clone();
    targets.extend_from_slice(&data.targets);
    let doubled = Samples::new(inputs, targets, data.input_len, data.target_len).unwrap();
    let g2 = analytic_gradient(&net, &doubled);
    for (a, b) in g1.iter().zip(&g2) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

fn linear_data(n: usize, noise: f64, seed: u64) -> Samples<f64> {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let xs: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + noise * normal.sample(&mut r)).collect();
    Samples::new(xs, ys, 1, 1).unwrap()
}

#[test]
fn linear_fit_approaches_gaussian_mle() {
    let train_set = linear_data(512, 0.1, 1);
    let valid_set = linear_data(256, 0.1, 2);
    // Closed-form oracle: OLS on the training split, MLE variance of residuals.
    let n = train_set.len() as f64;
    let (mx, my) = (
        train_set.inputs.iter().sum::<f64>() / n,
        train_set.targets.iter().sum::<f64>() / n,
    );
    let sxy: f64 = train_set.inputs.iter().zip(&train_set.targets).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = train_set.inputs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let resid = |x: f64, y: f64| y - (slope * x + icpt);
    let s2 = train_set.inputs.iter().zip(&train_set.targets).map(|(&x, &y)| resid(x, y).powi(2)).sum::<f64>() / n;
    let oracle = valid_set
        .inputs
        .iter()
        .zip(&valid_set.targets)
        .map(|(&x, &y)| 0.5 * s2.ln() + resid(x, y).powi(2) / (2.0 * s2) + NLL_CONST)
        .sum::<f64>()
        / valid_set.len() as f64;

    let spec = NetworkSpec::feed_forward(1, 1, vec![]);
    let net: Network<f64> = build_network(spec, 0).unwrap();
    let cfg = TrainingConfig {
        learning_rate: 0.01,
        batch_size: 32,
        optimizer: OptimizerKind::Adam,
        max_epochs: 300,
        ..TrainingConfig::default()
    };
    let out = train(net, &train_set, &valid_set, &cfg).unwrap();
    assert!(!out.diverged);
    assert!(
        (out.best_valid_nll - oracle).abs() < 1e-2,
        "net {} oracle {oracle}",
        out.best_valid_nll
    );
}

#[test]
fn checkpoint_dominates_history_and_early_stop_bound() {
    let train_set = linear_data(256, 0.3, 3);
    let valid_set = linear_data(64, 0.3, 4);
    let spec = NetworkSpec::feed_forward(1, 1, vec![LayerSpec::dense(16, Activation::Tanh)]);
    let net: Network<f64> = build_network(spec, 5).unwrap();
    let cfg = TrainingConfig {
        learning_rate: 0.05,
        batch_size: 32,
        optimizer: OptimizerKind::Sgd,
        max_epochs: 200,
        ..TrainingConfig::default()
    };
    let out = train(net, &train_set, &valid_set, &cfg).unwrap();
    for rec in &out.history {
        assert!(out.best_valid_nll <= rec.valid_nll);
    }
    let last = out.history.last().unwrap().epoch;
    assert!(last <= out.best_epoch + cfg.early_stop_patience);
    // Returned weights are the checkpoint, not the final epoch.
    let nll = evaluate_nll(&out.network, &valid_set).unwrap();
    assert!((nll - out.best_valid_nll).abs() < 1e-12);
    // LR halves only after 15 stale epochs.
    for pair in out.history.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert!(b.learning_rate == a.learning_rate || (b.learning_rate - a.learning_rate * 0.5).abs() < 1e-15);
    }
}

#[test]
fn training_is_bitwise_deterministic() {
    let train_set = linear_data(128, 0.2, 6);
    let valid_set = linear_data(32, 0.2, 7);
    let spec = NetworkSpec::feed_forward(1, 1, vec![LayerSpec::dense(8, Activation::Relu)]);
    let cfg = TrainingConfig {
        max_epochs: 20,
        seed: 42,
        ..TrainingConfig::default()
    };
    let a = train(build_network::<f64>(spec.clone(), 1).unwrap(), &train_set, &valid_set, &cfg).unwrap();
    let b = train(build_network::<f64>(spec, 1).unwrap(), &train_set, &valid_set, &cfg).unwrap();
    assert_eq!(a.network.weights(), b.network.weights());
}

#[test]
fn heteroscedastic_variance_tracks_noise_profile() {
    let gen = |n: usize, seed: u64| {
        let mut r = rng(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| x * x * x + 0.3 * x.abs() * normal.sample(&mut r)).collect();
        Samples::new(xs, ys, 1, 1).unwrap()
    };
    let train_set = gen(1024, 10);
    let valid_set = gen(256, 11);
    let spec = NetworkSpec::feed_forward(
        1,
        1,
        vec![LayerSpec::dense(32, Activation::Tanh), LayerSpec::dense(32, Activation::Tanh)],
    );
    let cfg = TrainingConfig {
        learning_rate: 0.005,
        batch_size: 32,
        optimizer: OptimizerKind::Adam,
        max_epochs: 200,
        seed: 3,
        ..TrainingConfig::default()
    };
    let out = train(build_network::<f64>(spec, 2).unwrap(), &train_set, &valid_set, &cfg).unwrap();
    let xs: Vec<f64> = (0..200).map(|i| -0.95 + 1.9 * i as f64 / 199.0).collect();
    let pred = out.network.forward_gaussian(&xs).unwrap();
    let sigma: Vec<f64> = pred.variance.iter().map(|v| v.sqrt()).collect();
    let truth: Vec<f64> = xs.iter().map(|x| 0.3 * x.abs()).collect();
    let r = pearson(&sigma, &truth);
    assert!(r > 0.8, "correlation {r}");
}

#[test]
fn checkpoint_round_trip_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.nnw");
    let spec = NetworkSpec::feed_forward(2, 1, vec![LayerSpec::dense(3, Activation::Relu)]);
    let net: Network<f64> = build_network(spec.clone(), 4).unwrap();
    checkpoint::save(&net, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"NNW1");
    assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), net.param_count() as u64);
    assert_eq!(bytes.len(), 20 + 8 * net.param_count());
    let back: Network<f64> = checkpoint::load(spec, &path).unwrap();
    assert_eq!(back.weights(), net.weights());
    let other = NetworkSpec::feed_forward(2, 1, vec![LayerSpec::dense(4, Activation::Relu)]);
    assert!(matches!(checkpoint::load::<f64>(other, &path), Err(Error::Format { .. })));
}

#[test]
fn single_precision_network_runs() {
    let spec = NetworkSpec::feed_forward(2, 1, vec![LayerSpec::dense(4, Activation::Tanh)]);
    let net: Network<f32> = build_network(spec, 0).unwrap();
    let pred = net.forward_gaussian(&[0.1f32, 0.2]).unwrap();
    assert!(pred.variance[0] > 0.0);
    let y = [0.0f32];
    assert!(nll_loss(&pred, &y).unwrap().is_finite());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variance_always_positive(seed in 0u64..1000, scale in 0.0f64..50.0) {
        let mut r = rng(seed);
        let spec = random_spec(&mut r);
        let net: Network<f64> = build_network(spec.clone(), seed).unwrap();
        let x: Vec<f64> = (0..spec.input_len()).map(|_| scale * r.random_range(-1.0..1.0)).collect();
        let pred = net.forward_gaussian(&x).unwrap();
        prop_assert!(pred.variance.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn nll_minus_const_bounded_by_half_log_var(mu in -10.0f64..10.0, log_var in -10.0f64..10.0) {
        let var = log_var.exp();
        let pred = agebo_uq::nn::GaussianPrediction::new(vec![mu], vec![var]).unwrap();
        let v = nll_loss(&pred, &[mu]).unwrap() - NLL_CONST;
        prop_assert!(v >= 0.5 * var.ln() - 1e-12);
    }
}
