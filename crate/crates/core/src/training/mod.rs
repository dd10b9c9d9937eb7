//! Denoising teacher-forced training of the stream networks.

mod adam;
mod data;

pub use adam::{adam_step, OptState, BETA1, BETA2, EPSILON};
pub use data::{Standardizer, TrainingWindow};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::cgm::{mixture_frame_nll, vuv_nll_raw};
use crate::checkpoint::{Checkpoint, ResumeState};
use crate::error::{Error, Result};
use crate::features::{control_dim, Corpus, StreamKind};
use crate::kv;
use crate::netcore::{backward, forward_batch, init_params, NetConfig, NetParams, Real, SequenceInput};
use crate::seeds;
use data::{chunks, prepare, window, Prepared};

/// Layer sizes of one stream network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchConfig {
    pub initial_taps: usize,
    pub dilations: Vec<usize>,
    pub conv_channels: usize,
    pub skip_channels: usize,
}

impl ArchConfig {
    /// Published sizes: 100/240 channels for the harmonic stream, 20/20 for
    /// aperiodicity and 20/4 for voicing.
    pub fn reference(kind: StreamKind) -> Self {
        let (c, s) = match kind {
            StreamKind::Harmonic => (100, 240),
            StreamKind::Aperiodic => (20, 20),
            StreamKind::Vuv => (20, 4),
        };
        ArchConfig {
            initial_taps: 10,
            dilations: vec![1, 2, 4, 1, 2],
            conv_channels: c,
            skip_channels: s,
        }
    }

    /// Network for `kind` with stream widths from `dims` (indexed like
    /// [`StreamKind::ALL`]) and `alphabet_size` phonemes.
    pub fn net_config(&self, kind: StreamKind, dims: [usize; 3], alphabet_size: usize) -> NetConfig {
        let n = dims[kind.index()];
        NetConfig {
            input_channels: n,
            aux_channels: kind.upstream().iter().map(|u| dims[u.index()]).sum(),
            initial_taps: self.initial_taps,
            dilations: self.dilations.clone(),
            conv_channels: self.conv_channels,
            skip_channels: self.skip_channels,
            control_dim: control_dim(alphabet_size),
            output_channels: if kind.is_binary() { n } else { 4 * n },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Variance of the Gaussian corruption added to context frames, in
    /// standardised units.
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_sequences: usize,
    pub output_length: usize,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Indexed like [`StreamKind::ALL`].
    pub arch: [ArchConfig; 3],
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.05,
            learning_rate: 5e-4,
            batch_sequences: 16,
            output_length: 210,
            epochs: 1000,
            patience: 50,
            seed: 0,
            arch: StreamKind::ALL.map(ArchConfig::reference),
        }
    }
}

impl TrainConfig {
    pub fn arch(&self, kind: StreamKind) -> &ArchConfig {
        &self.arch[kind.index()]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        for (name, v) in [
            ("batch_sequences", self.batch_sequences),
            ("output_length", self.output_length),
            ("epochs", self.epochs),
            ("patience", self.patience),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for kind in StreamKind::ALL {
            let a = self.arch(kind);
            if a.conv_channels == 0 || a.skip_channels == 0 {
                return Err(Error::Config(format!("stream {}: channel counts must be positive", kind.name())));
            }
            if a.dilations.is_empty() || a.dilations.contains(&0) {
                return Err(Error::Config(format!("stream {}: dilations must be positive", kind.name())));
            }
        }
        Ok(())
    }

    /// Flat `key=value` form, used as the echo stored in checkpoints.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("train.lambda".to_string(), self.lambda.to_string()),
            ("train.learning_rate".into(), self.learning_rate.to_string()),
            ("train.batch_sequences".into(), self.batch_sequences.to_string()),
            ("train.output_length".into(), self.output_length.to_string()),
            ("train.epochs".into(), self.epochs.to_string()),
            ("train.patience".into(), self.patience.to_string()),
            ("train.seed".into(), self.seed.to_string()),
        ];
        for kind in StreamKind::ALL {
            let a = self.arch(kind);
            let p = format!("stream.{}", kind.name());
            out.push((format!("{p}.initial_taps"), a.initial_taps.to_string()));
            out.push((format!("{p}.dilations"), kv::format_list(&a.dilations)));
            out.push((format!("{p}.conv_channels"), a.conv_channels.to_string()));
            out.push((format!("{p}.skip_channels"), a.skip_channels.to_string()));
        }
        out
    }

    /// Applies one `key=value` setting. Returns `false` for keys outside the
    /// `train.` and `stream.` namespaces.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        if let Some(field) = key.strip_prefix("train.") {
            match field {
                "lambda" => self.lambda = kv::parse_value(key, value)?,
                "learning_rate" => self.learning_rate = kv::parse_value(key, value)?,
                "batch_sequences" => self.batch_sequences = kv::parse_value(key, value)?,
                "output_length" => self.output_length = kv::parse_value(key, value)?,
                "epochs" => self.epochs = kv::parse_value(key, value)?,
                "patience" => self.patience = kv::parse_value(key, value)?,
                "seed" => self.seed = kv::parse_value(key, value)?,
                _ => return Err(Error::Config(format!("unknown key '{key}'"))),
            }
            return Ok(true);
        }
        if let Some(rest) = key.strip_prefix("stream.") {
            let (name, field) = rest
                .split_once('.')
                .ok_or_else(|| Error::Config(format!("unknown key '{key}'")))?;
            let kind = StreamKind::from_name(name)?;
            let a = &mut self.arch[kind.index()];
            match field {
                "initial_taps" => a.initial_taps = kv::parse_value(key, value)?,
                "dilations" => a.dilations = kv::parse_list(key, value)?,
                "conv_channels" => a.conv_channels = kv::parse_value(key, value)?,
                "skip_channels" => a.skip_channels = kv::parse_value(key, value)?,
                _ => return Err(Error::Config(format!("unknown key '{key}'"))),
            }
            return Ok(true);
        }
        Ok(false)
    }

    pub fn from_kv(entries: &[(String, String)]) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (k, v) in entries {
            if !cfg.set(k, v)? {
                return Err(Error::Config(format!("unknown key '{k}'")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub train_nll: f64,
    pub val_nll: f64,
    /// Wall-clock duration; not stored in checkpoints.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    /// Validation NLL of the initial parameters.
    pub initial_val_nll: f64,
    pub epochs: Vec<EpochRecord>,
    /// Index into `epochs` of the lowest validation NLL.
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    pub fn best_val_nll(&self) -> Option<f64> {
        self.best_epoch.map(|i| self.epochs[i].val_nll)
    }

    /// `(train, validation)` per epoch, without timing.
    pub fn losses(&self) -> Vec<(f64, f64)> {
        self.epochs.iter().map(|e| (e.train_nll, e.val_nll)).collect()
    }

    fn exhausted(&self, patience: usize) -> bool {
        match self.best_epoch {
            Some(b) => self.epochs.len() - 1 - b >= patience,
            None => false,
        }
    }
}

/// Adds i.i.d. Gaussian noise of variance `lambda` to every value.
pub fn corrupt_context<R: rand::Rng + ?Sized>(frames: &[f32], lambda: f64, rng: &mut R) -> Result<Vec<f32>> {
    let mut out = frames.to_vec();
    corrupt_in_place(&mut out, lambda, rng)?;
    Ok(out)
}

fn corrupt_in_place<R: rand::Rng + ?Sized>(values: &mut [f32], lambda: f64, rng: &mut R) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("corruption variance must be >= 0, got {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, lambda.sqrt()).expect("finite positive std");
    for v in values {
        *v += normal.sample(rng) as f32;
    }
    Ok(())
}

struct WindowLoss<T> {
    nll: f64,
    values: usize,
    grads: Option<NetParams<T>>,
}

fn window_loss<T: Real>(
    params: &NetParams<T>,
    cfg: &NetConfig,
    kind: StreamKind,
    w: &TrainingWindow,
    lambda: f64,
    seed: u64,
    want_grad: bool,
) -> Result<WindowLoss<T>> {
    let width = cfg.row_width();
    let mut rows = w.rows.clone();
    if lambda > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        corrupt_in_place(&mut rows[w.first_real_row * width..], lambda, &mut rng)?;
    }
    let rows: Vec<T> = rows.iter().map(|&v| T::from_f64_lossy(f64::from(v))).collect();
    let controls: Vec<T> = w.controls.iter().map(|&v| T::from_f64_lossy(f64::from(v))).collect();
    let (raw, acts) = forward_batch(params, cfg, SequenceInput { rows: &rows, controls: &controls }, want_grad)?;
    let n = cfg.input_channels;
    let o = cfg.output_channels;
    let frames = w.targets.len() / n;
    let mut grad_raw = vec![T::zero(); if want_grad { raw.len() } else { 0 }];
    let mut nll = 0.0;
    let mut raw64 = vec![0.0f64; o];
    let mut g64 = vec![0.0f64; o];
    let mut target = vec![0.0f64; n];
    for f in 0..frames {
        for (dst, src) in raw64.iter_mut().zip(&raw[f * o..(f + 1) * o]) {
            *dst = src.to_f64().unwrap_or(f64::NAN);
        }
        for (dst, src) in target.iter_mut().zip(&w.targets[f * n..(f + 1) * n]) {
            *dst = f64::from(*src);
        }
        let located = |e: Error| {
            Error::Numeric(format!(
                "utterance {}, frame {}: {e}",
                w.utterance,
                w.start + f
            ))
        };
        let frame_nll = if kind.is_binary() {
            let mut total = 0.0;
            for ch in 0..n {
                let (l, g) = vuv_nll_raw(raw64[ch], target[ch]).map_err(located)?;
                total += l;
                g64[ch] = g;
            }
            total
        } else {
            mixture_frame_nll(&raw64, &target, &mut g64).map_err(located)?
        };
        if !frame_nll.is_finite() {
            return Err(located(Error::Numeric("non-finite loss".into())));
        }
        nll += frame_nll;
        if want_grad {
            for (dst, g) in grad_raw[f * o..(f + 1) * o].iter_mut().zip(&g64) {
                *dst = T::from_f64_lossy(*g);
            }
        }
    }
    let grads = if want_grad {
        Some(backward(params, cfg, acts.as_ref(), &grad_raw)?)
    } else {
        None
    };
    Ok(WindowLoss {
        nll,
        values: frames * n,
        grads,
    })
}

/// Mean teacher-forced NLL over every frame and channel of `batch`, and its
/// gradient. Context rows (not targets or controls) of window `i` are
/// corrupted with noise seeded from `(seed, i)`. Windows are evaluated in
/// parallel and reduced in batch order.
pub fn batch_loss<T: Real>(
    params: &NetParams<T>,
    cfg: &NetConfig,
    kind: StreamKind,
    batch: &[TrainingWindow],
    lambda: f64,
    seed: u64,
) -> Result<(f64, NetParams<T>)> {
    let (nll, values, mut grads) = batch_sums(params, cfg, kind, batch, lambda, seed)?;
    let scale = 1.0 / values as f64;
    grads.scale(T::from_f64_lossy(scale));
    Ok((nll * scale, grads))
}

fn batch_sums<T: Real>(
    params: &NetParams<T>,
    cfg: &NetConfig,
    kind: StreamKind,
    batch: &[TrainingWindow],
    lambda: f64,
    seed: u64,
) -> Result<(f64, usize, NetParams<T>)> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("corruption variance must be >= 0, got {lambda}")));
    }
    let parts: Vec<Result<WindowLoss<T>>> = batch
        .par_iter()
        .enumerate()
        .map(|(i, w)| window_loss(params, cfg, kind, w, lambda, seeds::derive(seed, &[i as u64]), true))
        .collect();
    let mut nll = 0.0;
    let mut values = 0;
    let mut grads = NetParams::zeros(cfg);
    for part in parts {
        let part = part?;
        nll += part.nll;
        values += part.values;
        grads.add_assign(part.grads.as_ref().expect("requested gradients"));
    }
    Ok((nll, values, grads))
}

/// Mean clean-context NLL over whole utterances.
fn mean_nll(params: &NetParams<f32>, cfg: &NetConfig, kind: StreamKind, windows: &[TrainingWindow]) -> Result<f64> {
    let parts: Vec<Result<WindowLoss<f32>>> = windows
        .par_iter()
        .map(|w| window_loss(params, cfg, kind, w, 0.0, 0, false))
        .collect();
    let (mut nll, mut values) = (0.0, 0usize);
    for p in parts {
        let p = p?;
        nll += p.nll;
        values += p.values;
    }
    Ok(nll / values as f64)
}

/// Stream widths found in the corpus, indexed like [`StreamKind::ALL`].
pub fn corpus_dims(corpus: &Corpus) -> Result<[usize; 3]> {
    let first = corpus
        .utterances
        .first()
        .ok_or_else(|| Error::Config("corpus has no utterances".into()))?;
    let mut dims = [0; 3];
    for kind in StreamKind::ALL {
        dims[kind.index()] = first.stream_of(kind)?.dim;
    }
    Ok(dims)
}

/// Network configuration and input statistics for `kind` on `corpus`.
pub fn stream_setup(corpus: &Corpus, kind: StreamKind, cfg: &TrainConfig) -> Result<(NetConfig, Standardizer)> {
    cfg.validate()?;
    if corpus.train().next().is_none() {
        return Err(Error::Config("training split is empty".into()));
    }
    let dims = corpus_dims(corpus)?;
    let net = cfg.arch(kind).net_config(kind, dims, corpus.alphabet.len());
    net.validate()?;
    let mut parts = vec![Standardizer::fit(corpus, kind)?];
    for up in kind.upstream() {
        parts.push(Standardizer::fit(corpus, *up)?);
    }
    let stats = Standardizer::concat(&parts.iter().collect::<Vec<_>>());
    Ok((net, stats))
}

/// Teacher-forced windows covering whole utterances of the validation split
/// (or of the training split when `train` is set).
pub fn utterance_windows(
    corpus: &Corpus,
    kind: StreamKind,
    net: &NetConfig,
    stats: &Standardizer,
    train: bool,
) -> Result<Vec<TrainingWindow>> {
    let data = prepared(corpus, kind, net, stats, train)?;
    Ok(data
        .iter()
        .enumerate()
        .filter(|(_, p)| p.len > 0)
        .map(|(i, p)| {
            window(
                p,
                net,
                data::Chunk {
                    item: i,
                    start: 0,
                    len: p.len,
                },
            )
        })
        .collect())
}

fn prepared(
    corpus: &Corpus,
    kind: StreamKind,
    net: &NetConfig,
    stats: &Standardizer,
    train: bool,
) -> Result<Vec<Prepared>> {
    let want = if train {
        crate::features::Split::Train
    } else {
        crate::features::Split::Validation
    };
    corpus
        .utterances
        .iter()
        .zip(&corpus.split)
        .enumerate()
        .filter(|(_, (_, s))| **s == want)
        .map(|(i, (u, _))| prepare(u, i, kind, net, stats))
        .collect()
}

/// Result of a training run: the checkpoint plus wall-clock timings.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: TrainHistory,
}

/// Trains the network for `kind`, keeping the parameters with the lowest
/// validation NLL (training NLL when the corpus has no validation split).
pub fn train_stream(corpus: &Corpus, kind: StreamKind, cfg: &TrainConfig) -> Result<TrainOutcome> {
    run_stream(corpus, kind, cfg, None, None)
}

/// Continues a run from its checkpoint until `cfg.epochs` epochs in total.
/// The result matches an uninterrupted run with the same configuration.
pub fn resume_stream(corpus: &Corpus, checkpoint: &Checkpoint, cfg: &TrainConfig) -> Result<TrainOutcome> {
    run_stream(corpus, checkpoint.stream, cfg, Some(checkpoint), None)
}

/// Like [`train_stream`], but stops after `limit` epochs of this call while
/// keeping a resumable state for the remainder.
pub fn train_stream_for(corpus: &Corpus, kind: StreamKind, cfg: &TrainConfig, limit: usize) -> Result<TrainOutcome> {
    run_stream(corpus, kind, cfg, None, Some(limit))
}

fn run_stream(
    corpus: &Corpus,
    kind: StreamKind,
    cfg: &TrainConfig,
    resume: Option<&Checkpoint>,
    limit: Option<usize>,
) -> Result<TrainOutcome> {
    let (net, stats) = stream_setup(corpus, kind, cfg)?;
    let train_data = prepared(corpus, kind, &net, &stats, true)?;
    let train_chunks = chunks(&train_data, cfg.output_length);
    if train_chunks.is_empty() {
        return Err(Error::Config("training split has no frames".into()));
    }
    let train_windows: Vec<TrainingWindow> = train_chunks
        .iter()
        .map(|c| window(&train_data[c.item], &net, *c))
        .collect();
    let val_windows = utterance_windows(corpus, kind, &net, &stats, false)?;
    let select_on_val = !val_windows.is_empty();
    let stream_seed = seeds::derive(cfg.seed, &[kind.index() as u64]);

    let (mut params, mut opt, mut best, mut history) = match resume {
        Some(ck) => {
            if ck.net != net || ck.stats != stats {
                return Err(Error::Config(format!(
                    "checkpoint for '{}' does not match the configured network or corpus",
                    kind.name()
                )));
            }
            let state = ck
                .resume
                .as_ref()
                .ok_or_else(|| Error::State("checkpoint has no optimizer state to resume from".into()))?;
            (state.params.clone(), state.opt.clone(), ck.params.clone(), ck.history.clone())
        }
        None => {
            let p = init_params::<f32>(&net, seeds::derive(stream_seed, &[0]));
            let initial = if select_on_val {
                mean_nll(&p, &net, kind, &val_windows)?
            } else {
                mean_nll(&p, &net, kind, &train_windows)?
            };
            let history = TrainHistory {
                initial_val_nll: initial,
                ..TrainHistory::default()
            };
            (p.clone(), OptState::new(&net), p, history)
        }
    };

    let mut run = 0;
    while history.epochs.len() < cfg.epochs && !history.exhausted(cfg.patience) {
        if limit.is_some_and(|l| run >= l) {
            break;
        }
        let started = Instant::now();
        let epoch = history.epochs.len() as u64;
        let mut order: Vec<usize> = (0..train_windows.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seeds::derive(stream_seed, &[1, epoch])));
        let (mut nll, mut values) = (0.0, 0usize);
        for (b, idx) in order.chunks(cfg.batch_sequences).enumerate() {
            let batch: Vec<TrainingWindow> = idx.iter().map(|&i| train_windows[i].clone()).collect();
            let seed = seeds::derive(stream_seed, &[2, epoch, b as u64]);
            let (s, v, mut grads) = batch_sums(&params, &net, kind, &batch, cfg.lambda, seed)?;
            nll += s;
            values += v;
            grads.scale(1.0 / v as f32);
            adam_step(&mut opt, &mut params, &grads, cfg.learning_rate)?;
        }
        if !params.is_finite() {
            return Err(Error::Numeric(format!(
                "stream '{}': parameters became non-finite in epoch {}",
                kind.name(),
                epoch + 1
            )));
        }
        let train_nll = nll / values as f64;
        let val_nll = if select_on_val {
            mean_nll(&params, &net, kind, &val_windows)?
        } else {
            train_nll
        };
        history.epochs.push(EpochRecord {
            train_nll,
            val_nll,
            seconds: started.elapsed().as_secs_f64(),
        });
        if history.best_val_nll().map_or(true, |b| val_nll < b) {
            history.best_epoch = Some(history.epochs.len() - 1);
            best = params.clone();
        }
        run += 1;
    }

    let checkpoint = Checkpoint {
        stream: kind,
        net,
        params: best,
        stats,
        config_echo: cfg.to_kv(),
        history: TrainHistory {
            epochs: history
                .epochs
                .iter()
                .map(|e| EpochRecord { seconds: 0.0, ..e.clone() })
                .collect(),
            ..history.clone()
        },
        resume: Some(ResumeState { params, opt }),
    };
    Ok(TrainOutcome { checkpoint, history })
}

/// Trains all three streams in prediction order. Each network sees the
/// observed upstream streams as auxiliary input.
pub fn train_all(corpus: &Corpus, cfg: &TrainConfig) -> Result<Vec<TrainOutcome>> {
    StreamKind::ALL.iter().map(|&k| train_stream(corpus, k, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{gen_synthetic_corpus, SynthSpec};

    #[test]
    fn corruption_identity_and_domain() {
        let x: Vec<f32> = (0..50).map(|i| i as f32 * 0.1).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(corrupt_context(&x, 0.0, &mut rng).unwrap(), x);
        assert!(matches!(corrupt_context(&x, -0.1, &mut rng), Err(Error::Domain(_))));
    }

    #[test]
    fn corruption_variance() {
        let x = vec![0.25f32; 1_000_000];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y = corrupt_context(&x, 0.01, &mut rng).unwrap();
        let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| f64::from(*a) - f64::from(*b)).collect();
        let m = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (d.len() - 1) as f64;
        assert!((var - 0.01).abs() < 1e-4, "{var}");
    }

    #[test]
    fn config_kv_round_trip() {
        let mut cfg = TrainConfig::default();
        cfg.lambda = 0.125;
        cfg.arch[1].dilations = vec![1, 3];
        let back = TrainConfig::from_kv(&cfg.to_kv()).unwrap();
        assert_eq!(back, cfg);
        assert!(TrainConfig::from_kv(&[("train.bogus".into(), "1".into())]).is_err());
        assert!(TrainConfig::from_kv(&[("train.lambda".into(), "-1".into())]).is_err());
        assert!(TrainConfig::from_kv(&[("train.epochs".into(), "0".into())]).is_err());
    }

    #[test]
    fn aux_widths_follow_prediction_order() {
        let cfg = TrainConfig::default();
        let dims = [60, 1, 4];
        let v = cfg.arch(StreamKind::Vuv).net_config(StreamKind::Vuv, dims, 10);
        assert_eq!(v.input_channels + v.aux_channels, 61);
        assert_eq!(v.output_channels, 1);
        let a = cfg.arch(StreamKind::Aperiodic).net_config(StreamKind::Aperiodic, dims, 10);
        assert_eq!(a.input_channels + a.aux_channels, 65);
        assert_eq!(a.output_channels, 16);
        let h = cfg.arch(StreamKind::Harmonic).net_config(StreamKind::Harmonic, dims, 10);
        assert_eq!(h.aux_channels, 0);
    }

    #[test]
    fn windows_pad_and_cover_utterance() {
        let corpus = gen_synthetic_corpus(
            &SynthSpec {
                utterances: 4,
                ..SynthSpec::default()
            },
            1,
        )
        .unwrap();
        let cfg = TrainConfig {
            output_length: 7,
            ..TrainConfig::default()
        };
        let (net, stats) = stream_setup(&corpus, StreamKind::Vuv, &cfg).unwrap();
        let data = prepared(&corpus, StreamKind::Vuv, &net, &stats, true).unwrap();
        let cs = chunks(&data, 7);
        let total: usize = data.iter().map(|p| p.len).sum();
        assert_eq!(cs.iter().map(|c| c.len).sum::<usize>(), total);
        let span = net.receptive_field() - 1;
        let w0 = window(&data[0], &net, cs[0]);
        assert_eq!(w0.first_real_row, span);
        assert!(w0.rows[..span * net.row_width()].iter().all(|&v| v == 0.0));
        let w1 = window(&data[0], &net, cs[1]);
        assert_eq!(w1.first_real_row, span - 7);
        // Own channel of row `span` in the second window is frame 7.
        assert_eq!(w1.rows[span * net.row_width()], data[0].own[7]);
    }
}
