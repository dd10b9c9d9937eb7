//! Acceptance suite. Prints one `[PASS]`/`[FAIL] criterion N` line per
//! criterion and exits non-zero if any criterion fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use singsynth_core::cgm::{cgm_nll_raw, cgm_pdf, cgm_sample, vuv_nll_raw, CgmParams};
use singsynth_core::checkpoint::Checkpoint;
use singsynth_core::evalkit::{constant_baseline_nll, eval_model, phoneme_following, voicing_consistency};
use singsynth_core::features::{control_from_segments, gen_synthetic_corpus, ControlTrack, Corpus, StreamKind, SynthSpec};
use singsynth_core::generation::{
    bench_generation, generate_cached, generate_multistream, generate_naive, DecoderKind, PAPER_PARAM_COUNT,
};
use singsynth_core::netcore::{init_params, NetConfig};
use singsynth_core::training::{
    batch_loss, corrupt_context, train_stream, ArchConfig, TrainConfig, TrainHistory, TrainingWindow,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const CORPUS_SEED: u64 = 7;
const TRAIN_SEED: u64 = 1;
/// Corruption variance of the desk-scale model. The correlated noise of the
/// synthetic corpus needs more than the default to keep free-running
/// generation on the commanded phoneme.
const DESK_LAMBDA: f64 = 0.3;

fn reduced_config(lambda: f64, epochs: usize) -> TrainConfig {
    let arch = ArchConfig {
        conv_channels: 32,
        skip_channels: 64,
        ..ArchConfig::reference(StreamKind::Harmonic)
    };
    TrainConfig {
        lambda,
        learning_rate: 2e-3,
        batch_sequences: 8,
        output_length: 105,
        epochs,
        patience: 50,
        seed: TRAIN_SEED,
        arch: [arch.clone(), arch.clone(), arch],
    }
}

struct Model {
    checkpoints: Vec<Checkpoint>,
    histories: Vec<TrainHistory>,
}

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| gen_synthetic_corpus(&SynthSpec::default(), CORPUS_SEED).expect("synthetic corpus"))
}

fn train(cfg: &TrainConfig) -> Model {
    let started = Instant::now();
    let mut checkpoints = Vec::new();
    let mut histories = Vec::new();
    for kind in StreamKind::ALL {
        let out = train_stream(corpus(), kind, cfg).expect("training");
        checkpoints.push(out.checkpoint);
        histories.push(out.history);
    }
    println!(
        "  trained 3 streams (lambda {}, {} epochs max) in {:.0} s",
        cfg.lambda,
        cfg.epochs,
        started.elapsed().as_secs_f64()
    );
    Model { checkpoints, histories }
}

/// Desk-scale model shared by the end-to-end criteria.
fn model() -> &'static Model {
    static MODEL: OnceLock<Model> = OnceLock::new();
    MODEL.get_or_init(|| train(&reduced_config(DESK_LAMBDA, 200)))
}

fn cycling_control(frames: usize, segment: usize, phonemes: usize, stride: usize) -> ControlTrack {
    let mut segments = Vec::new();
    let mut left = frames;
    let mut id = 0;
    while left > 0 {
        let len = left.min(segment);
        segments.push((id, len));
        left -= len;
        id = (id + stride) % phonemes;
    }
    control_from_segments(&segments, 0, phonemes).expect("control").0
}

fn criterion_1() -> Outcome {
    let net = ArchConfig::reference(StreamKind::Harmonic).net_config(StreamKind::Harmonic, [60, 1, 4], 10);
    let r = net.receptive_field();
    let ms = r as f64 * 5.0;
    check(r == 21 && ms == 105.0, format!("receptive field {r} frames = {ms} ms"))
}

fn criterion_2() -> Outcome {
    let m = model();
    let mut worst = 0.0f64;
    let mut runs = 0;
    for ck in &m.checkpoints {
        let control = cycling_control(500, 23, corpus().alphabet.len(), 3);
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let aux: Vec<f32> = (0..500 * ck.net.aux_channels).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let aux = (ck.net.aux_channels > 0).then_some(&aux[..]);
            for tau in [0.0, 1.0] {
                let a = generate_naive(&ck.params, &ck.net, ck.stream, &control, aux, tau, seed).map_err(|e| e.to_string())?;
                let b = generate_cached(&ck.params, &ck.net, ck.stream, &control, aux, tau, seed).map_err(|e| e.to_string())?;
                if a.decisions != b.decisions {
                    return Err(format!("{} seed {seed} tau {tau}: sampling decisions differ", ck.stream.name()));
                }
                let diff = a.frames.iter().zip(&b.frames).map(|(x, y)| (x - y).abs()).fold(0.0f32, f32::max);
                worst = worst.max(f64::from(diff));
                runs += 1;
            }
        }
    }
    check(
        worst <= 1e-5,
        format!("{runs} runs of 500 frames, identical decisions, max abs diff {worst:.2e}"),
    )
}

fn criterion_3() -> Outcome {
    let kind = StreamKind::Harmonic;
    let net = ArchConfig::reference(kind).net_config(kind, [60, 1, 4], 10);
    let params = init_params::<f32>(&net, 3);
    let run = |mode| bench_generation(&params, &net, kind, 1000, mode, 5, 1.0, 0).map_err(|e| e.to_string());
    let naive = run(DecoderKind::Naive)?;
    let cached = run(DecoderKind::Cached)?;
    let ratio = cached.frames_per_second / naive.frames_per_second;
    check(
        ratio >= 10.0,
        format!(
            "speedup {ratio:.1}x (naive {:.0} fps, cached {:.0} fps); cached real-time factor {:.1} vs published 20-35",
            naive.frames_per_second, cached.frames_per_second, cached.rtf
        ),
    )
}

fn tiny_net(n: usize, out: usize) -> NetConfig {
    NetConfig {
        input_channels: n,
        aux_channels: 2,
        initial_taps: 2,
        dilations: vec![1, 2, 1],
        conv_channels: 4,
        skip_channels: 5,
        control_dim: 6,
        output_channels: out,
    }
}

fn random_windows(cfg: &NetConfig, binary: bool, seed: u64) -> Vec<TrainingWindow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = cfg.receptive_field() - 1;
    (0..3)
        .map(|i| {
            let len = 4 + i;
            let rows_len = len + span;
            let first_real_row = (2 * i).min(span);
            let mut rows: Vec<f32> = (0..rows_len * cfg.row_width()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            rows[..first_real_row * cfg.row_width()].iter_mut().for_each(|v| *v = 0.0);
            TrainingWindow {
                rows,
                controls: (0..rows_len * cfg.control_dim).map(|_| rng.gen_range(0.0..1.0)).collect(),
                targets: (0..len * cfg.input_channels)
                    .map(|_| if binary { f32::from(rng.gen_bool(0.5) as u8) } else { rng.gen_range(-1.0..1.0) })
                    .collect(),
                first_real_row,
                utterance: i,
                start: 0,
            }
        })
        .collect()
}

fn relative(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

fn net_gradient_error(kind: StreamKind, n: usize, out: usize, lambda: f64) -> (f64, usize) {
    let cfg = tiny_net(n, out);
    let p = init_params::<f64>(&cfg, 21);
    let windows = random_windows(&cfg, kind.is_binary(), 22);
    let (_, grads) = batch_loss(&p, &cfg, kind, &windows, lambda, 5).expect("loss");
    let named: Vec<Vec<f64>> = grads.named().into_iter().map(|(_, t)| t.data.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let step = 1e-4;
    let (mut worst, mut checked) = (0.0f64, 0);
    for i in 0..150 {
        let ti = i % named.len();
        if named[ti].is_empty() {
            continue;
        }
        let j = rng.gen_range(0..named[ti].len());
        let eval = |delta: f64| {
            let mut q = p.clone();
            q.tensors_mut()[ti].data[j] += delta;
            batch_loss(&q, &cfg, kind, &windows, lambda, 5).expect("loss").0
        };
        let fd = (eval(step) - eval(-step)) / (2.0 * step);
        worst = worst.max(relative(fd, named[ti][j], 1e-6));
        checked += 1;
    }
    (worst, checked)
}

fn criterion_4() -> Outcome {
    let (mix_err, mix_n) = net_gradient_error(StreamKind::Harmonic, 2, 8, 0.05);
    let (bin_err, bin_n) = net_gradient_error(StreamKind::Vuv, 1, 1, 0.0);
    let net_err = mix_err.max(bin_err);

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let h = 1e-6;
    let (mut cgm_err, mut cgm_n) = (0.0f64, 0);
    while cgm_n < 200 {
        let raw: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.5..1.5));
        let x = rng.gen_range(-2.0..2.0);
        let (_, g) = cgm_nll_raw(raw, x).map_err(|e| e.to_string())?;
        for i in 0..4 {
            let shift = |s: f64| {
                let mut r = raw;
                r[i] += s;
                cgm_nll_raw(r, x).expect("nll").0
            };
            let fd = (shift(h) - shift(-h)) / (2.0 * h);
            cgm_err = cgm_err.max(relative(fd, g[i], 1e-3));
            cgm_n += 1;
        }
    }
    let (mut bern_err, mut bern_n) = (0.0f64, 0);
    while bern_n < 100 {
        let raw = rng.gen_range(-6.0..6.0);
        let target = f64::from(rng.gen_bool(0.5) as u8);
        let (_, g) = vuv_nll_raw(raw, target).map_err(|e| e.to_string())?;
        let fd = (vuv_nll_raw(raw + h, target).expect("nll").0 - vuv_nll_raw(raw - h, target).expect("nll").0) / (2.0 * h);
        bern_err = bern_err.max(relative(fd, g, 1e-3));
        bern_n += 1;
    }
    let head_err = cgm_err.max(bern_err);
    check(
        net_err <= 1e-4 && head_err <= 1e-6 && mix_n >= 100 && bin_n >= 100,
        format!(
            "net {net_err:.1e} over {mix_n}+{bin_n} coordinates; mixture head {cgm_err:.1e} over {cgm_n}, bernoulli head {bern_err:.1e} over {bern_n}"
        ),
    )
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Cumulative distribution on a uniform grid by the trapezoid rule.
fn cdf_table(p: &CgmParams, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    let pdf: Vec<f64> = (0..=n).map(|i| cgm_pdf(p, lo + i as f64 * h).expect("pdf")).collect();
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        out[i] = out[i - 1] + 0.5 * h * (pdf[i - 1] + pdf[i]);
    }
    out
}

fn criterion_5() -> Outcome {
    let sigma = 3.6e-3f64.sqrt();
    let grid: Vec<f64> = (0..21).map(|i| -0.95 + 0.095 * i as f64).collect();
    let (lo, hi) = (-12.0 * sigma, 12.0 * sigma);
    let (mut mass_err, mut mean_err, mut var_err, mut ks_worst) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut multimodal = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for &alpha in &grid {
        for &beta in &grid {
            let p = CgmParams::new(0.0, sigma, alpha, beta).map_err(|e| e.to_string())?;
            let pdf = |x: f64| cgm_pdf(&p, x).expect("pdf");
            let mass = simpson(pdf, lo, hi, 20_000);
            let mean = simpson(|x| x * pdf(x), lo, hi, 20_000);
            let var = simpson(|x| (x - mean).powi(2) * pdf(x), lo, hi, 20_000);
            mass_err = mass_err.max((mass - 1.0).abs());
            mean_err = mean_err.max(mean.abs() / sigma);
            var_err = var_err.max((var / (sigma * sigma) - 1.0).abs());

            let values: Vec<f64> = (0..=4000).map(|i| pdf(-6.0 * sigma + 12.0 * sigma * i as f64 / 4000.0)).collect();
            let maxima = (1..values.len() - 1)
                .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
                .count();
            if maxima != 1 {
                multimodal.push((alpha, beta, maxima));
            }

            let n_cdf = 24_000;
            let table = cdf_table(&p, lo, hi, n_cdf);
            let cdf = |x: f64| {
                let u = ((x - lo) / (hi - lo) * n_cdf as f64).clamp(0.0, n_cdf as f64);
                let i = (u.floor() as usize).min(n_cdf - 1);
                table[i] + (u - i as f64) * (table[i + 1] - table[i])
            };
            let n = 100_000;
            let mut samples: Vec<f64> = (0..n).map(|_| cgm_sample(&p, 1.0, &mut rng).expect("sample")).collect();
            samples.sort_by(f64::total_cmp);
            let ks = samples
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = cdf(x);
                    (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
                })
                .fold(0.0, f64::max);
            ks_worst = ks_worst.max(ks);
        }
    }
    check(
        mass_err <= 1e-6 && mean_err <= 1e-7 && var_err <= 1e-7 && multimodal.is_empty() && ks_worst <= 0.01,
        format!(
            "441 grid points: |mass-1| {mass_err:.1e}, |mean|/sigma {mean_err:.1e}, variance rel {var_err:.1e}, multimodal {multimodal:?}, worst KS {ks_worst:.4}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let x: Vec<f32> = (0..1000).map(|i| (i as f32 * 0.013).sin()).collect();
    let identity = corrupt_context(&x, 0.0, &mut rng).map_err(|e| e.to_string())? == x;
    let zeros = vec![0.0f32; 1_000_000];
    let noisy = corrupt_context(&zeros, 0.01, &mut rng).map_err(|e| e.to_string())?;
    let n = noisy.len() as f64;
    let mean = noisy.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let var = noisy.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let var_ok = (var / 0.01 - 1.0).abs() <= 0.01;

    // Smoke-trained model with the default corruption variance.
    let smoke = train(&reduced_config(TrainConfig::default().lambda, 40));
    let control = cycling_control(1000, 25, corpus().alphabet.len(), 3);
    let taus = StreamKind::ALL.map(singsynth_core::generation::default_temperature);
    let utt = generate_multistream(&smoke.checkpoints, &control, taus, 9).map_err(|e| e.to_string())?;
    let mut outside = Vec::new();
    for kind in [StreamKind::Harmonic, StreamKind::Aperiodic, StreamKind::Vuv] {
        let gen = utt.stream_of(kind).map_err(|e| e.to_string())?;
        for ch in 0..gen.dim {
            let train: Vec<f64> = corpus()
                .train()
                .flat_map(|u| u.stream_of(kind).expect("stream").frames().map(|f| f64::from(f[ch])).collect::<Vec<_>>())
                .collect();
            let m = train.iter().sum::<f64>() / train.len() as f64;
            let sd = (train.iter().map(|v| (v - m).powi(2)).sum::<f64>() / train.len() as f64).sqrt();
            let lo = train.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * sd;
            let hi = train.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * sd;
            let bad = gen.frames().filter(|f| !(lo..=hi).contains(&f64::from(f[ch]))).count();
            if bad > 0 {
                outside.push(format!("{}[{ch}]: {bad} frames", kind.name()));
            }
        }
    }
    check(
        identity && var_ok && outside.is_empty(),
        format!(
            "lambda=0 identity {identity}; lambda=0.01 variance {var:.6}; 1000 free-running frames outside range: {}",
            if outside.is_empty() { "none".to_string() } else { outside.join(", ") }
        ),
    )
}

/// Generates every validation utterance from its control track with the
/// default temperatures; returns mean phoneme following and voicing
/// consistency.
fn free_running_scores() -> Result<(f64, f64), String> {
    static SCORES: OnceLock<Result<(f64, f64), String>> = OnceLock::new();
    SCORES
        .get_or_init(|| {
            let c = corpus();
            let truth = c.truth.as_ref().ok_or("corpus has no generator truth")?;
            let taus = StreamKind::ALL.map(singsynth_core::generation::default_temperature);
            let (mut follow, mut voicing, mut n) = (0.0, 0.0, 0.0);
            for (i, u) in c.validation().enumerate() {
                let g = generate_multistream(&model().checkpoints, &u.control, taus, i as u64).map_err(|e| e.to_string())?;
                follow += phoneme_following(&g, truth).map_err(|e| e.to_string())?;
                voicing += voicing_consistency(&g, truth).map_err(|e| e.to_string())?;
                n += 1.0;
            }
            Ok((follow / n, voicing / n))
        })
        .clone()
}

fn criterion_7() -> Outcome {
    let m = model();
    let c = corpus();
    let mut nll = Vec::new();
    let mut a_ok = true;
    for (ck, h) in m.checkpoints.iter().zip(&m.histories) {
        let best = h.best_val_nll().ok_or("no epochs recorded")?;
        let base = constant_baseline_nll(c, ck.stream).map_err(|e| e.to_string())?;
        a_ok &= best < base;
        nll.push(format!("{} {best:.3} vs {base:.3}", ck.stream.name()));
    }
    let report = eval_model(c, &m.checkpoints, "desk").map_err(|e| e.to_string())?;
    let row = &report.rows[0];
    let base = report.baseline.as_ref().ok_or("no baseline row")?;
    let b_ok = row.harmonic_mcd < base.harmonic_mcd;
    let c_ok = row.vuv_accuracy >= 95.0;
    let (follow, _) = free_running_scores()?;
    let d_ok = follow >= 0.8;
    check(
        a_ok && b_ok && c_ok && d_ok,
        format!(
            "(a) validation NLL {} [{}]; (b) harmonic MCD {:.2} vs baseline {:.2} [{}]; (c) V/UV {:.2}% [{}]; (d) phoneme following {:.3} [{}]",
            nll.join(", "),
            mark(a_ok),
            row.harmonic_mcd,
            base.harmonic_mcd,
            mark(b_ok),
            row.vuv_accuracy,
            mark(c_ok),
            follow,
            mark(d_ok)
        ),
    )
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "fail"
    }
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_singsynth"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = run_cli(&[
        "bench",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "bench.naive=false",
        "--set",
        "bench.frames=100",
        "--set",
        "bench.repeats=1",
    ])?;
    let value = |key: &str| {
        report
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{key}=")))
            .map(str::to_string)
            .ok_or(format!("bench report lacks {key}"))
    };
    let per_stream: Vec<String> = StreamKind::ALL
        .iter()
        .map(|k| value(&format!("stream.{}.param_count", k.name())).map(|v| format!("{} {v}", k.name())))
        .collect::<Result<_, _>>()?;
    let total: usize = value("params.total")?.parse().map_err(|_| "bad total")?;
    let rel = (total as f64 - PAPER_PARAM_COUNT as f64) / PAPER_PARAM_COUNT as f64;
    check(
        rel.abs() <= 0.25,
        format!(
            "total {total} ({}) vs {PAPER_PARAM_COUNT}: {:+.1}%",
            per_stream.join(", "),
            100.0 * rel
        ),
    )
}

fn criterion_9() -> Outcome {
    let (_, voicing) = free_running_scores()?;
    let m = model();
    let c = corpus();
    let control = &c.validation().next().ok_or("no validation utterance")?.control;
    let taus = [1.0, 1.0, 1.0];
    let generate = |cks: &[Checkpoint]| generate_multistream(cks, control, taus, 3).map_err(|e| e.to_string());

    // Replacing the harmonic network changes the voicing stream only through
    // the voicing network's aux projection.
    let mut swapped = m.checkpoints.clone();
    swapped[0].params = init_params(&swapped[0].net, 77);
    let coupled = generate(&m.checkpoints)?.stream_of(StreamKind::Vuv).cloned().map_err(|e| e.to_string())?
        != generate(&swapped)?.stream_of(StreamKind::Vuv).cloned().map_err(|e| e.to_string())?;

    let mut cut = m.checkpoints.clone();
    for ck in cut.iter_mut().skip(1) {
        ck.params.aux.as_mut().ok_or("stream without aux projection")?.data.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut cut_swapped = cut.clone();
    cut_swapped[0].params = init_params(&cut_swapped[0].net, 77);
    let (a, b) = (generate(&cut)?, generate(&cut_swapped)?);
    let harmonic_differs = a.stream_of(StreamKind::Harmonic).ok() != b.stream_of(StreamKind::Harmonic).ok();
    let decoupled = a.stream_of(StreamKind::Vuv).ok() == b.stream_of(StreamKind::Vuv).ok()
        && a.stream_of(StreamKind::Aperiodic).ok() == b.stream_of(StreamKind::Aperiodic).ok();
    check(
        voicing >= 0.9 && coupled && harmonic_differs && decoupled,
        format!(
            "voicing consistency {voicing:.3}; harmonic swap alters voicing {coupled}; with zeroed aux projections downstream streams unchanged {decoupled}"
        ),
    )
}

const DETERMINISM_CONFIG: &str = "\
synth.utterances=10
synth.phonemes_per_utterance=3,5
synth.duration_frames=8,16
synth.harmonic_dim=12
synth.aperiodic_dim=3
synth.validation_fraction=0.2
train.epochs=4
train.batch_sequences=4
train.output_length=40
stream.harmonic.conv_channels=8
stream.harmonic.skip_channels=12
stream.vuv.conv_channels=4
stream.vuv.skip_channels=4
stream.aperiodic.conv_channels=4
stream.aperiodic.skip_channels=6
bench.frames=100
bench.repeats=1
";

fn snapshot(dir: &Path) -> Vec<(PathBuf, String)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).expect("dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let bytes = fs::read(&path).expect("file");
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            // Timing fields are excluded from the comparison.
            let content = if name.ends_with("_history.txt") {
                String::from_utf8_lossy(&bytes)
                    .lines()
                    .map(|l| l.split_whitespace().take(3).collect::<Vec<_>>().join(" "))
                    .collect::<Vec<_>>()
                    .join("\n")
            } else if name == "bench.txt" {
                String::from_utf8_lossy(&bytes)
                    .lines()
                    .skip_while(|l| !l.starts_with("# key=value"))
                    .filter(|l| !l.starts_with("time."))
                    .collect::<Vec<_>>()
                    .join("\n")
            } else {
                format!("{bytes:?}")
            };
            out.push((path.strip_prefix(dir).unwrap().to_path_buf(), content));
        }
    }
    out.sort();
    out
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    fs::write(
        root.join("run.cfg"),
        format!("{DETERMINISM_CONFIG}paths.corpus={}\npaths.model={}\n", p("corpus"), p("model")),
    )
    .map_err(|e| e.to_string())?;
    fs::write(root.join("song.txt"), "sil 60\na 120\nt 40\ne 150\nsil 60\n").map_err(|e| e.to_string())?;
    let cfg = p("run.cfg");
    let (song, gen, eval, bench) = (p("song.txt"), p("gen"), p("eval"), p("bench"));
    let commands: Vec<Vec<&str>> = vec![
        vec!["synth-data", "--config", &cfg, "--seed", "11", "--threads", "1"],
        vec!["train", "--config", &cfg, "--seed", "11", "--threads", "1"],
        vec!["generate", "--config", &cfg, "--seed", "11", "--threads", "1", "--input", &song, "--out", &gen],
        vec!["eval", "--config", &cfg, "--seed", "11", "--threads", "1", "--out", &eval],
        vec!["bench", "--config", &cfg, "--seed", "11", "--threads", "1", "--out", &bench],
    ];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let mut stdout = Vec::new();
        for args in &commands {
            let out = run_cli(args)?;
            if args[0] != "bench" {
                stdout.push(out);
            }
        }
        runs.push((snapshot(root), stdout));
    }
    let files = runs[0].0.len();
    let differing: Vec<String> = runs[0]
        .0
        .iter()
        .zip(&runs[1].0)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.display().to_string())
        .collect();
    check(
        differing.is_empty() && runs[0].0.len() == runs[1].0.len() && runs[0].1 == runs[1].1,
        format!(
            "5 commands rerun: {files} artifacts compared, differing: {}",
            if differing.is_empty() { "none".to_string() } else { differing.join(", ") }
        ),
    )
}

fn main() {
    let criteria: [(usize, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    // `cargo test -- --list` and name filters from the default harness.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        for (n, _) in &criteria {
            println!("criterion_{n}: test");
        }
        return;
    }
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (n, f) in criteria {
        if !filters.is_empty() && !filters.iter().any(|p| format!("criterion_{n}").contains(p.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] criterion {n}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {n}: {detail} ({secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
