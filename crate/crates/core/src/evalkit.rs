//! Distortion and voicing metrics, frame exclusion, and model evaluation.

use std::f64::consts::LN_10;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::cgm::{squash_vuv, BERNOULLI_CLAMP};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::features::{Corpus, GeneratorTruth, StreamKind, Utterance};
use crate::generation::ordered_checkpoints;
use crate::netcore::{forward_batch, SequenceInput};
use crate::training::{utterance_windows, Standardizer};

const DB: f64 = 10.0 / LN_10;

fn frame_distance(a: &[f32], b: &[f32]) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (f64::from(*x) - f64::from(*y)).powi(2)).sum();
    DB * (2.0 * sq).sqrt()
}

/// Mean mel-cepstral distortion in dB over the frames selected by `mask`.
pub fn mcd(reference: &[f32], predicted: &[f32], dim: usize, mask: &[bool]) -> Result<f64> {
    let (sum, count) = mcd_sum(reference, predicted, dim, mask)?;
    if count == 0 {
        return Err(Error::Evaluation("no frames left after exclusion".into()));
    }
    Ok(sum / count as f64)
}

fn mcd_sum(reference: &[f32], predicted: &[f32], dim: usize, mask: &[bool]) -> Result<(f64, usize)> {
    if dim == 0 || reference.len() != predicted.len() || reference.len() != mask.len() * dim {
        return Err(Error::Dimension(format!(
            "distortion inputs: {} and {} values, {} mask frames of width {dim}",
            reference.len(),
            predicted.len(),
            mask.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0;
    for (t, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        sum += frame_distance(&reference[t * dim..(t + 1) * dim], &predicted[t * dim..(t + 1) * dim]);
        count += 1;
    }
    Ok((sum, count))
}

fn voiced(v: f32) -> bool {
    v >= 0.5
}

/// Percentage of frames with matching voicing decisions.
pub fn vuv_accuracy(reference: &[f32], predicted: &[f32]) -> Result<f64> {
    if reference.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "voicing sequences of {} and {} frames",
            reference.len(),
            predicted.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::Evaluation("no voicing frames to compare".into()));
    }
    let hits = reference.iter().zip(predicted).filter(|(a, b)| voiced(**a) == voiced(**b)).count();
    Ok(100.0 * hits as f64 / reference.len() as f64)
}

/// Frames kept for distortion: not silence and with agreeing voicing.
pub fn build_mask(labels: &[u16], silence: Option<u16>, ref_vuv: &[f32], pred_vuv: &[f32]) -> Vec<bool> {
    labels
        .iter()
        .zip(ref_vuv.iter().zip(pred_vuv))
        .map(|(l, (r, p))| Some(*l) != silence && voiced(*r) == voiced(*p))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub name: String,
    pub harmonic_mcd: f64,
    pub aperiodic_mcd: f64,
    pub vuv_accuracy: f64,
    pub frames_counted: usize,
    pub frames_excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    /// Global-mean predictor scored on the same frames as the first row.
    pub baseline: Option<EvalRow>,
}

impl EvalReport {
    /// Aligned table followed by `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<16} {:>16} {:>17} {:>13} {:>8} {:>9}\n",
            "model", "harmonic MCD dB", "aperiodic MCD dB", "V/UV acc. %", "frames", "excluded"
        );
        let all: Vec<&EvalRow> = self.rows.iter().chain(self.baseline.as_ref()).collect();
        for r in &all {
            let _ = writeln!(
                out,
                "{:<16} {:>16.3} {:>17.3} {:>13.2} {:>8} {:>9}",
                r.name, r.harmonic_mcd, r.aperiodic_mcd, r.vuv_accuracy, r.frames_counted, r.frames_excluded
            );
        }
        out.push_str("\n# key=value\n");
        for r in &all {
            let p = format!("eval.{}", r.name);
            let _ = writeln!(out, "{p}.harmonic_mcd_db={:.6}", r.harmonic_mcd);
            let _ = writeln!(out, "{p}.aperiodic_mcd_db={:.6}", r.aperiodic_mcd);
            let _ = writeln!(out, "{p}.vuv_accuracy={:.4}", r.vuv_accuracy);
            let _ = writeln!(out, "{p}.frames_counted={}", r.frames_counted);
            let _ = writeln!(out, "{p}.frames_excluded={}", r.frames_excluded);
        }
        out
    }
}

/// Teacher-forced predictions for one stream over the validation split, in
/// native units: distribution means for mixture streams, thresholded
/// probabilities for voicing.
fn predict_validation(corpus: &Corpus, ck: &Checkpoint) -> Result<Vec<Vec<f32>>> {
    let kind = ck.stream;
    let windows = utterance_windows(corpus, kind, &ck.net, &ck.stats, false)?;
    let n = ck.net.input_channels;
    let own_stats = ck.stats.slice(0..n);
    windows
        .par_iter()
        .map(|w| {
            let (raw, _) = forward_batch(
                &ck.params,
                &ck.net,
                SequenceInput {
                    rows: &w.rows,
                    controls: &w.controls,
                },
                false,
            )?;
            let o = ck.net.output_channels;
            let frames = raw.len() / o;
            let mut out = vec![0.0f32; frames * n];
            for (f, r) in raw.chunks_exact(o).enumerate() {
                let dst = &mut out[f * n..(f + 1) * n];
                if kind.is_binary() {
                    for (d, &v) in dst.iter_mut().zip(r) {
                        *d = if squash_vuv(f64::from(v))? >= 0.5 { 1.0 } else { 0.0 };
                    }
                } else {
                    let means: Vec<f32> = (0..n).map(|ch| r[4 * ch]).collect();
                    own_stats.invert(&means, dst);
                }
            }
            Ok(out)
        })
        .collect()
}

fn silence_label(corpus: &Corpus) -> Option<u16> {
    corpus.alphabet.silence_id().map(|s| s as u16)
}

/// Scores teacher-forced predictions of the three checkpoints on the
/// validation split, alongside a global-mean baseline on the same frames.
pub fn eval_model(corpus: &Corpus, checkpoints: &[Checkpoint], name: &str) -> Result<EvalReport> {
    let ordered = ordered_checkpoints(checkpoints)?;
    let val: Vec<&Utterance> = corpus.validation().filter(|u| !u.is_empty()).collect();
    if val.is_empty() {
        return Err(Error::Config("corpus has no validation split".into()));
    }
    let preds: Vec<Vec<Vec<f32>>> = ordered
        .iter()
        .map(|c| predict_validation(corpus, c))
        .collect::<Result<_>>()?;
    let silence = silence_label(corpus);
    let h_mean = Standardizer::fit(corpus, StreamKind::Harmonic)?.mean;
    let a_mean = Standardizer::fit(corpus, StreamKind::Aperiodic)?.mean;
    let voiced_share = voiced_fraction(corpus)?;
    let baseline_vuv = if voiced_share >= 0.5 { 1.0 } else { 0.0 };

    let mut acc = Accum::default();
    let mut base = Accum::default();
    for (i, u) in val.iter().enumerate() {
        let h = u.stream_of(StreamKind::Harmonic)?;
        let a = u.stream_of(StreamKind::Aperiodic)?;
        let v = u.stream_of(StreamKind::Vuv)?;
        let (ph, pv, pa) = (&preds[0][i], &preds[1][i], &preds[2][i]);
        if h.dim != ordered[0].net.input_channels || a.dim != ordered[2].net.input_channels {
            return Err(Error::Config("validation stream widths do not match the checkpoints".into()));
        }
        let mask = build_mask(&u.labels, silence, &v.data, pv);
        acc.add(u, silence, &h.data, ph, &a.data, pa, &v.data, pv, &mask)?;
        let bh: Vec<f32> = h_mean.iter().copied().cycle().take(h.data.len()).collect();
        let ba: Vec<f32> = a_mean.iter().copied().cycle().take(a.data.len()).collect();
        let bv = vec![baseline_vuv; v.data.len()];
        base.add(u, silence, &h.data, &bh, &a.data, &ba, &v.data, &bv, &mask)?;
    }
    Ok(EvalReport {
        rows: vec![acc.finish(name)?],
        baseline: Some(base.finish("global_mean")?),
    })
}

fn voiced_fraction(corpus: &Corpus) -> Result<f64> {
    let (mut on, mut total) = (0usize, 0usize);
    for u in corpus.train() {
        let v = u.stream_of(StreamKind::Vuv)?;
        on += v.data.iter().filter(|x| voiced(**x)).count();
        total += v.data.len();
    }
    Ok(if total == 0 { 0.0 } else { on as f64 / total as f64 })
}

#[derive(Default)]
struct Accum {
    h_sum: f64,
    a_sum: f64,
    counted: usize,
    excluded: usize,
    vuv_hits: usize,
    vuv_total: usize,
}

impl Accum {
    #[allow(clippy::too_many_arguments)]
    fn add(
        &mut self,
        u: &Utterance,
        silence: Option<u16>,
        h: &[f32],
        ph: &[f32],
        a: &[f32],
        pa: &[f32],
        v: &[f32],
        pv: &[f32],
        mask: &[bool],
    ) -> Result<()> {
        let t = u.len();
        let (hs, n) = mcd_sum(h, ph, h.len() / t.max(1), mask)?;
        let (as_, _) = mcd_sum(a, pa, a.len() / t.max(1), mask)?;
        self.h_sum += hs;
        self.a_sum += as_;
        self.counted += n;
        self.excluded += t - n;
        for (k, (r, p)) in v.iter().zip(pv).enumerate() {
            if Some(u.labels[k]) != silence {
                self.vuv_total += 1;
                self.vuv_hits += usize::from(voiced(*r) == voiced(*p));
            }
        }
        Ok(())
    }

    fn finish(&self, name: &str) -> Result<EvalRow> {
        if self.counted == 0 {
            return Err(Error::Evaluation("no frames left after exclusion".into()));
        }
        Ok(EvalRow {
            name: name.to_string(),
            harmonic_mcd: self.h_sum / self.counted as f64,
            aperiodic_mcd: self.a_sum / self.counted as f64,
            vuv_accuracy: if self.vuv_total == 0 {
                0.0
            } else {
                100.0 * self.vuv_hits as f64 / self.vuv_total as f64
            },
            frames_counted: self.counted,
            frames_excluded: self.excluded,
        })
    }
}

/// Validation NLL of a per-channel constant distribution fitted on the
/// training split (a Gaussian with the training mean and std, or a
/// Bernoulli with the training voicing rate), in the units of the
/// training loss.
pub fn constant_baseline_nll(corpus: &Corpus, kind: StreamKind) -> Result<f64> {
    let stats = Standardizer::fit(corpus, kind)?;
    let p = voiced_fraction(corpus)?.clamp(BERNOULLI_CLAMP, 1.0 - BERNOULLI_CLAMP);
    let (mut sum, mut count) = (0.0, 0usize);
    for u in corpus.validation() {
        let s = u.stream_of(kind)?;
        let mut z = vec![0.0f32; s.dim];
        for frame in s.frames() {
            if kind.is_binary() {
                for &x in frame {
                    sum -= if voiced(x) { p.ln() } else { (1.0 - p).ln() };
                    count += 1;
                }
            } else {
                stats.apply(frame, &mut z);
                for &v in &z {
                    sum += 0.5 * (2.0 * std::f64::consts::PI).ln() + 0.5 * f64::from(v).powi(2);
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return Err(Error::Config("corpus has no validation split".into()));
    }
    Ok(sum / count as f64)
}

/// Central half of every labelled segment, as `(frame, phoneme)` pairs.
pub fn mid_phoneme_frames(labels: &[u16]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < labels.len() {
        let mut end = start;
        while end < labels.len() && labels[end] == labels[start] {
            end += 1;
        }
        let len = end - start;
        for t in start + len / 4..start + (3 * len).div_ceil(4) {
            out.push((t, labels[start] as usize));
        }
        start = end;
    }
    out
}

/// Fraction of mid-phoneme frames whose harmonic frame is nearest to the
/// commanded phoneme's template.
pub fn phoneme_following(utt: &Utterance, truth: &GeneratorTruth) -> Result<f64> {
    let h = utt.stream_of(StreamKind::Harmonic)?;
    let frames = mid_phoneme_frames(&utt.labels);
    if frames.is_empty() {
        return Err(Error::Evaluation("utterance has no frames".into()));
    }
    let hits = frames
        .iter()
        .filter(|(t, p)| truth.classify_harmonic(h.frame(*t)) == *p)
        .count();
    Ok(hits as f64 / frames.len() as f64)
}

/// Fraction of frames whose voicing matches the commanded phoneme's class.
pub fn voicing_consistency(utt: &Utterance, truth: &GeneratorTruth) -> Result<f64> {
    let v = utt.stream_of(StreamKind::Vuv)?;
    if utt.is_empty() {
        return Err(Error::Evaluation("utterance has no frames".into()));
    }
    let hits = utt
        .labels
        .iter()
        .zip(&v.data)
        .filter(|(l, x)| truth.voiced.get(**l as usize).copied() == Some(voiced(**x)))
        .count();
    Ok(hits as f64 / utt.len() as f64)
}
