use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use singsynth_core::netcore::{backward, forward, forward_batch, init_params, NetConfig, NetParams, SequenceInput};

fn tiny(aux: usize) -> NetConfig {
    NetConfig {
        input_channels: 2,
        aux_channels: aux,
        initial_taps: 2,
        dilations: vec![1, 2],
        conv_channels: 3,
        skip_channels: 3,
        control_dim: 4,
        output_channels: 8,
    }
}

fn random_sequence(cfg: &NetConfig, len: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..len * cfg.row_width()).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let controls = (0..len * cfg.control_dim)
        .map(|_| if rng.gen_bool(0.5) { rng.gen_range(0.0..1.0) } else { 0.0 })
        .collect();
    (rows, controls)
}

fn randomize_biases(p: &mut NetParams<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in p.tensors_mut() {
        if t.shape.len() == 1 {
            t.data.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
        }
    }
}

/// Scalar probe loss `sum(raw * proj)`.
fn probe_loss(p: &NetParams<f64>, cfg: &NetConfig, rows: &[f64], controls: &[f64], proj: &[f64]) -> f64 {
    let (raw, _) = forward_batch(p, cfg, SequenceInput { rows, controls }, false).unwrap();
    raw.iter().zip(proj).map(|(a, b)| a * b).sum()
}

/// Central finite differences on a sample of coordinates; returns the
/// worst relative error and the tensor it occurred in.
fn gradient_check(cfg: &NetConfig, seq_len: usize, coords: usize, seed: u64) -> (f64, String) {
    let mut params = init_params::<f64>(cfg, seed);
    randomize_biases(&mut params, seed + 1);
    let (rows, controls) = random_sequence(cfg, seq_len, seed + 2);
    let out_len = seq_len - (cfg.receptive_field() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 3);
    let proj: Vec<f64> = (0..out_len * cfg.output_channels).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let (_, acts) = forward_batch(&params, cfg, SequenceInput { rows: &rows, controls: &controls }, true).unwrap();
    let grads = backward(&params, cfg, acts.as_ref(), &proj).unwrap();
    let named: Vec<(String, Vec<f64>)> = grads.named().into_iter().map(|(n, t)| (n, t.data.clone())).collect();

    let step = 1e-4;
    let mut worst = (0.0f64, String::new());
    let sizes: Vec<usize> = named.iter().map(|(_, d)| d.len()).collect();
    for i in 0..coords {
        // Cycle through tensors so every tensor is sampled.
        let ti = i % named.len();
        if sizes[ti] == 0 {
            continue;
        }
        let ci = rng.gen_range(0..sizes[ti]);
        let mut plus = params.clone();
        plus.tensors_mut()[ti].data[ci] += step;
        let mut minus = params.clone();
        minus.tensors_mut()[ti].data[ci] -= step;
        let fd = (probe_loss(&plus, cfg, &rows, &controls, &proj) - probe_loss(&minus, cfg, &rows, &controls, &proj))
            / (2.0 * step);
        let an = named[ti].1[ci];
        let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
        if rel > worst.0 {
            worst = (rel, format!("{}[{ci}]: analytic {an} fd {fd}", named[ti].0));
        }
    }
    worst
}

#[test]
fn gradient_matches_finite_differences() {
    for (aux, seed) in [(0, 10), (3, 20)] {
        let (err, at) = gradient_check(&tiny(aux), 14, 200, seed);
        assert!(err <= 1e-4, "relative error {err} at {at}");
    }
}

#[test]
fn gradient_check_per_layer_type() {
    // Single-layer and single-tap configurations isolate each block.
    let configs = [
        NetConfig { dilations: vec![1], ..tiny(0) },
        NetConfig { initial_taps: 0, aux_channels: 2, ..tiny(0) },
        NetConfig { dilations: vec![3, 1, 1], skip_channels: 5, ..tiny(1) },
    ];
    for (i, cfg) in configs.iter().enumerate() {
        let (err, at) = gradient_check(cfg, cfg.receptive_field() + 4, 150, 100 + i as u64);
        assert!(err <= 1e-4, "config {i}: relative error {err} at {at}");
    }
}

#[test]
fn zero_output_gradient_gives_zero_parameter_gradients() {
    let cfg = tiny(2);
    let params = init_params::<f64>(&cfg, 1);
    let (rows, controls) = random_sequence(&cfg, 12, 2);
    let (raw, acts) = forward_batch(&params, &cfg, SequenceInput { rows: &rows, controls: &controls }, true).unwrap();
    let g = backward(&params, &cfg, acts.as_ref(), &vec![0.0; raw.len()]).unwrap();
    assert!(g.named().iter().all(|(_, t)| t.data.iter().all(|v| *v == 0.0)));
}

#[test]
fn backward_without_activations_is_a_state_error() {
    let cfg = tiny(0);
    let params = init_params::<f64>(&cfg, 1);
    let err = backward(&params, &cfg, None, &[0.0; 8]).unwrap_err();
    assert!(matches!(err, singsynth_core::Error::State(_)));
}

#[test]
fn no_aux_gradient_without_aux_channels() {
    let cfg = tiny(0);
    let params = init_params::<f64>(&cfg, 1);
    let (rows, controls) = random_sequence(&cfg, 10, 2);
    let (raw, acts) = forward_batch(&params, &cfg, SequenceInput { rows: &rows, controls: &controls }, true).unwrap();
    let g = backward(&params, &cfg, acts.as_ref(), &vec![1.0; raw.len()]).unwrap();
    assert!(g.aux.is_none());
}

#[test]
fn zero_parameters_give_zero_outputs() {
    let cfg = tiny(1);
    let params = NetParams::<f64>::zeros(&cfg);
    let (rows, controls) = random_sequence(&cfg, 15, 3);
    let (raw, _) = forward_batch(&params, &cfg, SequenceInput { rows: &rows, controls: &controls }, false).unwrap();
    assert!(raw.iter().all(|v| *v == 0.0));
}

#[test]
fn batch_equals_per_window_forward() {
    let cfg = NetConfig::reference(5, 2, 8, 12, 6, 20);
    let r = cfg.receptive_field();
    let params = init_params::<f32>(&cfg, 9);
    let (rows, controls) = random_sequence(&cfg, 60, 4);
    let rows: Vec<f32> = rows.iter().map(|v| *v as f32).collect();
    let controls: Vec<f32> = controls.iter().map(|v| *v as f32).collect();
    let (w, d, o) = (cfg.row_width(), cfg.control_dim, cfg.output_channels);
    let (batch, _) = forward_batch(&params, &cfg, SequenceInput { rows: &rows, controls: &controls }, false).unwrap();
    assert_eq!(batch.len(), (60 - (r - 1)) * o);
    for j in 0..60 - (r - 1) {
        let window = SequenceInput {
            rows: &rows[j * w..(j + r) * w],
            controls: &controls[j * d..(j + r) * d],
        };
        let single = forward(&params, &cfg, window).unwrap();
        let diff = single
            .iter()
            .zip(&batch[j * o..(j + 1) * o])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(diff <= 1e-6, "frame {j}: diff {diff}");

        // A batch holding exactly one prediction is the same computation.
        let (one, _) = forward_batch(&params, &cfg, window, false).unwrap();
        assert_eq!(one, single);
    }
    // Longer batches leave earlier predictions untouched.
    let (half, _) = forward_batch(
        &params,
        &cfg,
        SequenceInput { rows: &rows[..40 * w], controls: &controls[..40 * d] },
        false,
    )
    .unwrap();
    assert_eq!(half[..], batch[..half.len()]);
}

/// The oldest context frame that can influence a prediction sits exactly
/// `receptive_field - 1` frames back; anything older has no effect.
#[test]
fn causality_and_receptive_field() {
    let cfg = NetConfig::reference(3, 1, 6, 6, 5, 12);
    let r = cfg.receptive_field();
    let params = init_params::<f64>(&cfg, 3);
    let len = 3 * r;
    let (rows, controls) = random_sequence(&cfg, len, 5);
    let w = cfg.row_width();
    let (base, _) = forward_batch(&params, &cfg, SequenceInput { rows: &rows, controls: &controls }, false).unwrap();
    let o = cfg.output_channels;
    let last = base.len() / o - 1;
    let target_row = last + r - 1;
    let mut oldest_effect = 0;
    for lag in 0..target_row {
        let mut perturbed = rows.clone();
        // Own channels.
        for ch in 0..cfg.input_channels {
            perturbed[(target_row - lag) * w + ch] += 0.5;
        }
        let (out, _) =
            forward_batch(&params, &cfg, SequenceInput { rows: &perturbed, controls: &controls }, false).unwrap();
        let changed = out[last * o..] != base[last * o..];
        if lag == 0 {
            assert!(!changed, "own channels of the predicted frame must be ignored");
        }
        if lag >= r {
            assert!(!changed, "lag {lag} beyond the receptive field changed the output");
        }
        if changed {
            oldest_effect = lag;
        }
    }
    assert_eq!(oldest_effect, r - 1);

    // The most recent frame matters.
    let mut perturbed = rows.clone();
    perturbed[(target_row - 1) * w] += 0.1;
    let (out, _) = forward_batch(&params, &cfg, SequenceInput { rows: &perturbed, controls: &controls }, false).unwrap();
    assert_ne!(out[last * o..], base[last * o..]);

    // Aux channels of the current frame are read.
    let mut perturbed = rows.clone();
    perturbed[target_row * w + cfg.input_channels] += 0.1;
    let (out, _) = forward_batch(&params, &cfg, SequenceInput { rows: &perturbed, controls: &controls }, false).unwrap();
    assert_ne!(out[last * o..], base[last * o..]);
}

#[test]
fn forward_is_pure() {
    let cfg = tiny(1);
    let params = init_params::<f32>(&cfg, 2);
    let r = cfg.receptive_field();
    let rows: Vec<f32> = (0..r * cfg.row_width()).map(|i| (i as f32 * 0.37).sin()).collect();
    let controls: Vec<f32> = (0..r * cfg.control_dim).map(|i| (i % 3) as f32 * 0.5).collect();
    let a = forward(&params, &cfg, SequenceInput { rows: &rows, controls: &controls }).unwrap();
    let b = forward(&params, &cfg, SequenceInput { rows: &rows, controls: &controls }).unwrap();
    assert_eq!(a, b);
}

#[test]
fn shape_mismatch_is_reported() {
    let cfg = tiny(0);
    let params = init_params::<f32>(&cfg, 2);
    let rows = vec![0.0f32; 7 * cfg.row_width() + 1];
    let controls = vec![0.0f32; 7 * cfg.control_dim];
    let err = forward_batch(&params, &cfg, SequenceInput { rows: &rows, controls: &controls }, false).unwrap_err();
    assert!(matches!(err, singsynth_core::Error::Dimension(_)));
}
