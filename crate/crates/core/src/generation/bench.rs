use std::fmt::Write as _;
use std::time::{Duration, Instant};

use super::{generate_stream, Decoder, DecoderKind, GenState};
use crate::error::{Error, Result};
use crate::features::{control_from_segments, ControlTrack, StreamKind, HOP_SECONDS};
use crate::netcore::{NetConfig, NetParams};

/// Trainable parameter total quoted for the published three-stream model.
pub const PAPER_PARAM_COUNT: usize = 747_000;
/// Published real-time range of the cached decoder.
pub const PAPER_RTF: (f64, f64) = (20.0, 35.0);

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub mode: DecoderKind,
    pub frames: usize,
    pub repeats: usize,
    /// Median wall-clock seconds per run.
    pub seconds: f64,
    pub frames_per_second: f64,
    /// Seconds of audio produced per wall-clock second.
    pub rtf: f64,
    /// Mean seconds per frame spent in the input convolution, each layer and
    /// the output stack (cached decoder only).
    pub layer_seconds: Vec<(String, f64)>,
}

fn bench_inputs(cfg: &NetConfig, n_frames: usize) -> Result<(ControlTrack, Vec<f32>)> {
    if cfg.control_dim < 6 || (cfg.control_dim - 3) % 3 != 0 {
        return Err(Error::Config(format!(
            "control width {} is not a phoneme encoding",
            cfg.control_dim
        )));
    }
    let phonemes = (cfg.control_dim - 3) / 3;
    let mut segments = Vec::new();
    let mut left = n_frames;
    let mut id = 0;
    while left > 0 {
        let len = left.min(20);
        segments.push((id, len));
        left -= len;
        id = (id + 1) % phonemes;
    }
    let (control, _) = control_from_segments(&segments, 0, phonemes)?;
    let aux = (0..n_frames * cfg.aux_channels)
        .map(|i| (i as f32 * 0.37).sin() * 0.5)
        .collect();
    Ok((control, aux))
}

/// Times generation of `n_frames` frames (median over `repeats` runs).
#[allow(clippy::too_many_arguments)]
pub fn bench_generation(
    params: &NetParams<f32>,
    cfg: &NetConfig,
    kind: StreamKind,
    n_frames: usize,
    mode: DecoderKind,
    repeats: usize,
    tau: f64,
    seed: u64,
) -> Result<BenchResult> {
    if n_frames < 100 {
        return Err(Error::Config(format!("benchmark needs at least 100 frames, got {n_frames}")));
    }
    let repeats = repeats.max(1);
    let (control, aux) = bench_inputs(cfg, n_frames)?;
    let aux = (cfg.aux_channels > 0).then_some(&aux[..]);
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        generate_stream(mode, params, cfg, kind, &control, aux, tau, seed)?;
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let seconds = times[times.len() / 2].max(1e-12);
    let frames_per_second = n_frames as f64 / seconds;

    let mut layer_seconds = Vec::new();
    if mode == DecoderKind::Cached {
        let mut slots = vec![Duration::ZERO; cfg.layers() + 2];
        let mut state = GenState::new(params, cfg)?;
        let a = cfg.aux_channels;
        let zero_aux = vec![0.0f32; a];
        let mut own = vec![0.0f32; cfg.input_channels];
        for t in 0..n_frames {
            let aux_t = aux.map_or(&zero_aux[..], |v| &v[t * a..(t + 1) * a]);
            let raw = state.predict_timed(aux_t, control.frame(t), &mut slots)?;
            // Feed back the location parameter (or the thresholded voicing).
            for (ch, o) in own.iter_mut().enumerate() {
                *o = if kind.is_binary() {
                    f32::from(raw[ch] > 0.0)
                } else {
                    raw[4 * ch]
                };
            }
            state.commit(&own)?;
        }
        let per_frame = |d: Duration| d.as_secs_f64() / n_frames as f64;
        layer_seconds.push(("input".to_string(), per_frame(slots[0])));
        for l in 0..cfg.layers() {
            layer_seconds.push((format!("layer{l}"), per_frame(slots[l + 1])));
        }
        layer_seconds.push(("output".to_string(), per_frame(slots[cfg.layers() + 1])));
    }

    Ok(BenchResult {
        mode,
        frames: n_frames,
        repeats,
        seconds,
        frames_per_second,
        rtf: frames_per_second * HOP_SECONDS,
        layer_seconds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamBench {
    pub stream: StreamKind,
    pub param_count: usize,
    pub naive: Option<BenchResult>,
    pub cached: BenchResult,
}

/// Combined real-time factor of decoders run one after another per frame.
fn combined_rtf(results: &[&BenchResult]) -> f64 {
    let secs_per_frame: f64 = results.iter().map(|r| 1.0 / r.frames_per_second).sum();
    HOP_SECONDS / secs_per_frame
}

/// Human-readable `key: value` report followed by the same figures as
/// `key=value` lines. Timing figures carry a `time.` prefix in the latter.
pub fn bench_report(streams: &[StreamBench]) -> String {
    let mut kv: Vec<(String, String)> = Vec::new();
    let mut push = |k: String, v: String| kv.push((k, v));
    for s in streams {
        let p = format!("stream.{}", s.stream.name());
        push(format!("{p}.param_count"), s.param_count.to_string());
        push(format!("{p}.frames"), s.cached.frames.to_string());
        push(format!("time.{p}.cached.rtf"), format!("{:.3}", s.cached.rtf));
        push(format!("time.{p}.cached.frames_per_second"), format!("{:.1}", s.cached.frames_per_second));
        if let Some(n) = &s.naive {
            push(format!("time.{p}.naive.rtf"), format!("{:.3}", n.rtf));
            push(format!("time.{p}.naive.frames_per_second"), format!("{:.1}", n.frames_per_second));
            push(format!("time.{p}.speedup"), format!("{:.2}", s.cached.frames_per_second / n.frames_per_second));
        }
        for (name, secs) in &s.cached.layer_seconds {
            push(format!("time.{p}.cached.{name}_us_per_frame"), format!("{:.3}", secs * 1e6));
        }
    }
    let total: usize = streams.iter().map(|s| s.param_count).sum();
    push("params.total".into(), total.to_string());
    push("params.reference".into(), PAPER_PARAM_COUNT.to_string());
    push(
        "params.relative_difference".into(),
        format!("{:.4}", (total as f64 - PAPER_PARAM_COUNT as f64) / PAPER_PARAM_COUNT as f64),
    );
    if let Some(h) = streams.iter().find(|s| s.stream == StreamKind::Harmonic) {
        push("time.rtf.harmonic_only".into(), format!("{:.3}", h.cached.rtf));
    }
    let cached: Vec<&BenchResult> = streams.iter().map(|s| &s.cached).collect();
    if !cached.is_empty() {
        push("time.rtf.all_streams".into(), format!("{:.3}", combined_rtf(&cached)));
    }
    push("rtf.reference_range".into(), format!("{}-{}", PAPER_RTF.0, PAPER_RTF.1));

    let mut out = String::from("generation benchmark\n");
    for (k, v) in &kv {
        let _ = writeln!(out, "{}: {v}", k.strip_prefix("time.").unwrap_or(k));
    }
    out.push_str("\n# key=value\n");
    for (k, v) in &kv {
        let _ = writeln!(out, "{k}={v}");
    }
    out
}
