//! Autoregressive synthesis with the naive and cached decoders, the
//! three-stream pipeline and the throughput benchmark.

mod bench;
mod decoder;

pub use bench::{bench_generation, bench_report, BenchResult, StreamBench, PAPER_PARAM_COUNT};
pub use decoder::{Decoder, GenState, NaiveDecoder};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cgm::{cgm_sample_traced, squash_raw, squash_vuv, vuv_sample};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::features::{ControlTrack, Stream, StreamKind, Utterance, HOP_SECONDS};
use crate::netcore::{NetConfig, NetParams};
use crate::seeds;

/// Decision code recorded for a mixture channel sampled at its mode.
pub const MODE_DECISION: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderKind {
    Naive,
    Cached,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Naive => "naive",
            DecoderKind::Cached => "cached",
        }
    }
}

fn make_decoder<'a>(kind: DecoderKind, params: &'a NetParams<f32>, cfg: &NetConfig) -> Result<Box<dyn Decoder + 'a>> {
    Ok(match kind {
        DecoderKind::Naive => Box::new(NaiveDecoder::new(params, cfg)?),
        DecoderKind::Cached => Box::new(GenState::new(params, cfg)?),
    })
}

/// Default temperatures: mixture streams 0.5, voicing 0 (thresholded).
pub fn default_temperature(kind: StreamKind) -> f64 {
    if kind.is_binary() {
        0.0
    } else {
        0.5
    }
}

/// Random source for frame `frame` of a stream seeded with `seed`.
fn frame_rng(seed: u64, frame: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seeds::derive(seed, &[frame as u64]))
}

/// Samples one frame from raw outputs. Appends one decision per channel:
/// the drawn mixture component ([`MODE_DECISION`] at `tau = 0`) or the
/// voicing bit.
fn sample_frame(
    binary: bool,
    raw: &[f32],
    tau: f64,
    rng: &mut ChaCha8Rng,
    out: &mut [f32],
    decisions: &mut Vec<u8>,
) -> Result<()> {
    if binary {
        for (o, &r) in out.iter_mut().zip(raw) {
            let v = vuv_sample(squash_vuv(f64::from(r))?, tau, rng)?;
            *o = v as f32;
            decisions.push(v as u8);
        }
    } else {
        for (ch, o) in out.iter_mut().enumerate() {
            let r = &raw[4 * ch..4 * ch + 4];
            let params = squash_raw([r[0], r[1], r[2], r[3]].map(f64::from))?;
            let (v, k) = cgm_sample_traced(&params, tau, rng)?;
            *o = v as f32;
            decisions.push(k.map_or(MODE_DECISION, |k| k as u8));
        }
    }
    Ok(())
}

/// Frames of one stream in the network's (standardised) domain, with the
/// per-channel sampling decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutput {
    pub frames: Vec<f32>,
    pub decisions: Vec<u8>,
}

fn check_control(cfg: &NetConfig, control: &ControlTrack) -> Result<()> {
    if control.is_empty() {
        return Err(Error::Config("control track is empty".into()));
    }
    if control.dim != cfg.control_dim {
        return Err(Error::Config(format!(
            "control width {} does not match network ({})",
            control.dim, cfg.control_dim
        )));
    }
    Ok(())
}

/// Generates one stream frame by frame. `aux`, if the network takes any,
/// holds `len x A` upstream values in the network's domain.
#[allow(clippy::too_many_arguments)]
pub fn generate_stream(
    mode: DecoderKind,
    params: &NetParams<f32>,
    cfg: &NetConfig,
    kind: StreamKind,
    control: &ControlTrack,
    aux: Option<&[f32]>,
    tau: f64,
    seed: u64,
) -> Result<StreamOutput> {
    check_control(cfg, control)?;
    let t_len = control.len();
    let a = cfg.aux_channels;
    let aux = match aux {
        Some(v) if v.len() == t_len * a => v,
        None if a == 0 => &[][..],
        _ => {
            return Err(Error::Config(format!(
                "network takes {a} aux channels per frame; aux input does not match {t_len} frames"
            )))
        }
    };
    let n = cfg.input_channels;
    let mut decoder = make_decoder(mode, params, cfg)?;
    let mut frames = vec![0.0f32; t_len * n];
    let mut decisions = Vec::with_capacity(t_len * n);
    for t in 0..t_len {
        let raw = decoder.predict(&aux[t * a..(t + 1) * a], control.frame(t))?;
        let out = &mut frames[t * n..(t + 1) * n];
        sample_frame(kind.is_binary(), &raw, tau, &mut frame_rng(seed, t), out, &mut decisions)
            .map_err(|e| Error::Generation { frame: t, message: e.to_string() })?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Generation {
                frame: t,
                message: "non-finite sample".into(),
            });
        }
        decoder.commit(out)?;
    }
    Ok(StreamOutput { frames, decisions })
}

/// Reference generation: full receptive-field recomputation per frame.
pub fn generate_naive(
    params: &NetParams<f32>,
    cfg: &NetConfig,
    kind: StreamKind,
    control: &ControlTrack,
    aux: Option<&[f32]>,
    tau: f64,
    seed: u64,
) -> Result<StreamOutput> {
    generate_stream(DecoderKind::Naive, params, cfg, kind, control, aux, tau, seed)
}

/// Cached generation; makes the same decisions as [`generate_naive`].
pub fn generate_cached(
    params: &NetParams<f32>,
    cfg: &NetConfig,
    kind: StreamKind,
    control: &ControlTrack,
    aux: Option<&[f32]>,
    tau: f64,
    seed: u64,
) -> Result<StreamOutput> {
    generate_stream(DecoderKind::Cached, params, cfg, kind, control, aux, tau, seed)
}

/// The three trained streams, in prediction order.
pub fn ordered_checkpoints(checkpoints: &[Checkpoint]) -> Result<[&Checkpoint; 3]> {
    let find = |kind: StreamKind| {
        checkpoints
            .iter()
            .find(|c| c.stream == kind)
            .ok_or_else(|| Error::Config(format!("no checkpoint for stream '{}'", kind.name())))
    };
    let ordered = [
        find(StreamKind::Harmonic)?,
        find(StreamKind::Vuv)?,
        find(StreamKind::Aperiodic)?,
    ];
    let dims = ordered.map(|c| c.net.input_channels);
    for c in ordered {
        let expect: usize = c.stream.upstream().iter().map(|u| dims[u.index()]).sum();
        if c.net.aux_channels != expect {
            return Err(Error::Config(format!(
                "stream '{}' expects {} aux channels, upstream streams provide {expect}",
                c.stream.name(),
                c.net.aux_channels
            )));
        }
        if c.net.control_dim != ordered[0].net.control_dim {
            return Err(Error::Config("checkpoints disagree on the control width".into()));
        }
    }
    Ok(ordered)
}

/// Generates all three streams in lock-step: per frame the harmonic frame is
/// sampled first, the voicing network reads it as aux input, and the
/// aperiodic network reads both. `taus` is indexed like [`StreamKind::ALL`].
pub fn generate_multistream(
    checkpoints: &[Checkpoint],
    control: &ControlTrack,
    taus: [f64; 3],
    seed: u64,
) -> Result<Utterance> {
    generate_multistream_with(DecoderKind::Cached, checkpoints, control, taus, seed)
}

pub fn generate_multistream_with(
    mode: DecoderKind,
    checkpoints: &[Checkpoint],
    control: &ControlTrack,
    taus: [f64; 3],
    seed: u64,
) -> Result<Utterance> {
    let ordered = ordered_checkpoints(checkpoints)?;
    check_control(&ordered[0].net, control)?;
    let mut decoders = Vec::with_capacity(3);
    for c in ordered {
        decoders.push(make_decoder(mode, &c.params, &c.net)?);
    }
    let stream_seeds = StreamKind::ALL.map(|k| seeds::derive(seed, &[k.index() as u64]));
    let t_len = control.len();
    // Generated frames in native units.
    let mut native: [Vec<f32>; 3] = Default::default();
    let mut decisions = Vec::new();
    for t in 0..t_len {
        for (si, c) in ordered.iter().enumerate() {
            let net = &c.net;
            let n = net.input_channels;
            let mut aux = vec![0.0f32; net.aux_channels];
            let mut col = 0;
            for up in c.stream.upstream() {
                let un = ordered[up.index()].net.input_channels;
                let src = &native[up.index()][t * un..(t + 1) * un];
                c.stats.slice(n + col..n + col + un).apply(src, &mut aux[col..col + un]);
                col += un;
            }
            let raw = decoders[si].predict(&aux, control.frame(t))?;
            let mut own = vec![0.0f32; n];
            decisions.clear();
            sample_frame(
                c.stream.is_binary(),
                &raw,
                taus[si],
                &mut frame_rng(stream_seeds[si], t),
                &mut own,
                &mut decisions,
            )
            .map_err(|e| Error::Generation { frame: t, message: format!("{}: {e}", c.stream.name()) })?;
            if own.iter().any(|v| !v.is_finite()) {
                return Err(Error::Generation {
                    frame: t,
                    message: format!("{}: non-finite sample", c.stream.name()),
                });
            }
            decoders[si].commit(&own)?;
            let mut out = vec![0.0f32; n];
            c.stats.slice(0..n).invert(&own, &mut out);
            native[si].extend_from_slice(&out);
        }
    }
    let [h, v, a] = native;
    let utt = Utterance {
        hop_seconds: HOP_SECONDS,
        streams: vec![
            Stream::new(StreamKind::Harmonic.name(), ordered[0].net.input_channels, h)?,
            Stream::new(StreamKind::Aperiodic.name(), ordered[2].net.input_channels, a)?,
            Stream::new(StreamKind::Vuv.name(), ordered[1].net.input_channels, v)?,
        ],
        labels: (0..t_len).map(|t| control.current_phoneme(t) as u16).collect(),
        control: control.clone(),
    };
    utt.validate()?;
    Ok(utt)
}
