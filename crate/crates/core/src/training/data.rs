//! Standardisation and teacher-forced window construction.

use crate::error::{Error, Result};
use crate::features::{Corpus, StreamKind, Utterance};
use crate::netcore::NetConfig;

const STD_FLOOR: f64 = 1e-3;

/// Per-channel affine normalisation to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Statistics of `kind` over the training split. The voicing stream is
    /// kept in its native {0, 1} encoding.
    pub fn fit(corpus: &Corpus, kind: StreamKind) -> Result<Self> {
        let mut dim = None;
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for u in corpus.train() {
            let s = u.stream_of(kind)?;
            let d = *dim.get_or_insert(s.dim);
            if d != s.dim {
                return Err(Error::Dimension(format!("stream '{}' width varies across utterances", kind.name())));
            }
            if sum.is_empty() {
                sum = vec![0.0; d];
                sq = vec![0.0; d];
            }
            for frame in s.frames() {
                for (j, &v) in frame.iter().enumerate() {
                    sum[j] += f64::from(v);
                    sq[j] += f64::from(v) * f64::from(v);
                }
                n += 1;
            }
        }
        let dim = dim.ok_or_else(|| Error::Config("training split is empty".into()))?;
        if kind.is_binary() || n == 0 {
            return Ok(Standardizer::identity(dim));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| ((q / n as f64 - m * m).max(0.0)).sqrt().max(STD_FLOOR) as f32)
            .collect();
        Ok(Standardizer {
            mean: mean.into_iter().map(|m| m as f32).collect(),
            std,
        })
    }

    pub fn concat(parts: &[&Standardizer]) -> Self {
        Standardizer {
            mean: parts.iter().flat_map(|p| p.mean.iter().copied()).collect(),
            std: parts.iter().flat_map(|p| p.std.iter().copied()).collect(),
        }
    }

    /// Restriction to channels `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Standardizer {
            mean: self.mean[range.clone()].to_vec(),
            std: self.std[range].to_vec(),
        }
    }

    pub fn apply(&self, frame: &[f32], out: &mut [f32]) {
        for j in 0..frame.len() {
            out[j] = (frame[j] - self.mean[j]) / self.std[j];
        }
    }

    pub fn invert(&self, frame: &[f32], out: &mut [f32]) {
        for j in 0..frame.len() {
            out[j] = frame[j] * self.std[j] + self.mean[j];
        }
    }
}

/// One utterance in the normalised domain of a given stream network.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub utterance: usize,
    pub len: usize,
    /// `len x N`
    pub own: Vec<f32>,
    /// `len x A`
    pub aux: Vec<f32>,
    /// `len x D`
    pub controls: Vec<f32>,
}

pub(crate) fn prepare(
    u: &Utterance,
    index: usize,
    kind: StreamKind,
    cfg: &NetConfig,
    stats: &Standardizer,
) -> Result<Prepared> {
    let n = cfg.input_channels;
    if u.control.dim != cfg.control_dim {
        return Err(Error::Dimension(format!(
            "utterance {index}: control width {} does not match network ({})",
            u.control.dim, cfg.control_dim
        )));
    }
    let own_stream = u.stream_of(kind)?;
    if own_stream.dim != n {
        return Err(Error::Dimension(format!(
            "utterance {index}: '{}' has {} channels, network expects {n}",
            kind.name(),
            own_stream.dim
        )));
    }
    let len = u.len();
    let mut own = vec![0.0f32; len * n];
    for (t, frame) in own_stream.frames().enumerate() {
        stats.apply(frame, &mut own[t * n..(t + 1) * n]);
    }
    let a = cfg.aux_channels;
    let mut aux = vec![0.0f32; len * a];
    let mut col = 0;
    for up in kind.upstream() {
        let s = u.stream_of(*up)?;
        let part = stats.slice(n + col..n + col + s.dim);
        let mut tmp = vec![0.0f32; s.dim];
        for (t, frame) in s.frames().enumerate() {
            part.apply(frame, &mut tmp);
            aux[t * a + col..t * a + col + s.dim].copy_from_slice(&tmp);
        }
        col += s.dim;
    }
    if col != a {
        return Err(Error::Dimension(format!(
            "'{}' network expects {a} aux channels, upstream streams provide {col}",
            kind.name()
        )));
    }
    Ok(Prepared {
        utterance: index,
        len,
        own,
        aux,
        controls: u.control.data.clone(),
    })
}

/// A span of output frames `[start, start + len)` of one utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Chunk {
    pub item: usize,
    pub start: usize,
    pub len: usize,
}

pub(crate) fn chunks(data: &[Prepared], output_length: usize) -> Vec<Chunk> {
    let mut out = Vec::new();
    for (item, p) in data.iter().enumerate() {
        let mut start = 0;
        while start < p.len {
            let len = output_length.min(p.len - start);
            out.push(Chunk { item, start, len });
            start += len;
        }
    }
    out
}

/// Teacher-forced input for predicting frames `[start, start + len)`,
/// including `receptive_field - 1` rows of left context. Rows before the
/// utterance start are zero with zero control.
#[derive(Debug, Clone)]
pub struct TrainingWindow {
    pub rows: Vec<f32>,
    pub controls: Vec<f32>,
    /// `len x N` uncorrupted targets.
    pub targets: Vec<f32>,
    /// Index of the first row that holds real (not padding) data.
    pub first_real_row: usize,
    pub utterance: usize,
    pub start: usize,
}

pub(crate) fn window(p: &Prepared, cfg: &NetConfig, chunk: Chunk) -> TrainingWindow {
    let span = cfg.receptive_field() - 1;
    let (n, a, d, w) = (cfg.input_channels, cfg.aux_channels, cfg.control_dim, cfg.row_width());
    let rows_len = chunk.len + span;
    let mut rows = vec![0.0f32; rows_len * w];
    let mut controls = vec![0.0f32; rows_len * d];
    let first_real_row = span.saturating_sub(chunk.start);
    for r in first_real_row..rows_len {
        let t = chunk.start + r - span;
        rows[r * w..r * w + n].copy_from_slice(&p.own[t * n..(t + 1) * n]);
        rows[r * w + n..(r + 1) * w].copy_from_slice(&p.aux[t * a..(t + 1) * a]);
        controls[r * d..(r + 1) * d].copy_from_slice(&p.controls[t * d..(t + 1) * d]);
    }
    TrainingWindow {
        rows,
        controls,
        targets: p.own[chunk.start * n..(chunk.start + chunk.len) * n].to_vec(),
        first_real_row,
        utterance: p.utterance,
        start: chunk.start,
    }
}
