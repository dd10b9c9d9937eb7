use super::kernels::{gated_unit, input_conv, output_stack, residual, skip_accum};
use super::{NetConfig, NetParams, Real};
use crate::error::{Error, Result};

/// A teacher-forced input sequence: `L` rows of `[own | aux]` values and
/// `L` control vectors. Row `t` holds the frame at position `t`; its own
/// channels are never read for the prediction at `t`.
#[derive(Debug, Clone, Copy)]
pub struct SequenceInput<'a, T> {
    pub rows: &'a [T],
    pub controls: &'a [T],
}

impl<T> SequenceInput<'_, T> {
    fn len(&self, cfg: &NetConfig) -> Result<usize> {
        let w = cfg.row_width();
        if self.rows.len() % w != 0 {
            return Err(Error::Dimension(format!(
                "input rows: {} values is not a multiple of row width {w}",
                self.rows.len()
            )));
        }
        let l = self.rows.len() / w;
        if self.controls.len() != l * cfg.control_dim {
            return Err(Error::Dimension(format!(
                "controls: expected {l} x {} values, got {}",
                cfg.control_dim,
                self.controls.len()
            )));
        }
        Ok(l)
    }
}

/// Intermediate values kept by a training forward pass.
#[derive(Debug, Clone)]
pub struct Activations<T> {
    pub(crate) rows: Vec<T>,
    pub(crate) controls: Vec<T>,
    /// `h[l]` is the input of layer `l`; `h[0]` is the initial conv output.
    pub(crate) h: Vec<Vec<T>>,
    pub(crate) tf: Vec<Vec<T>>,
    pub(crate) sg: Vec<Vec<T>>,
    pub(crate) z: Vec<Vec<T>>,
    pub(crate) skip_sum: Vec<T>,
    pub(crate) o: Vec<T>,
    pub(crate) out_len: usize,
}

impl<T> Activations<T> {
    pub fn output_len(&self) -> usize {
        self.out_len
    }
}

/// Evaluates all `L - (R - 1)` predictions of a sequence in parallel.
///
/// Output `j` predicts the frame at row `j + R - 1`. With `train`, the
/// intermediate values needed by [`backward`](super::backward) are returned.
pub fn forward_batch<T: Real>(
    params: &NetParams<T>,
    cfg: &NetConfig,
    input: SequenceInput<'_, T>,
    train: bool,
) -> Result<(Vec<T>, Option<Activations<T>>)> {
    let l_in = input.len(cfg)?;
    let span = cfg.receptive_field() - 1;
    if l_in <= span {
        return Err(Error::Dimension(format!(
            "sequence of {l_in} rows is shorter than the receptive field {}",
            span + 1
        )));
    }
    let out_len = l_in - span;
    let (w, c, s, d, o_ch) = (
        cfg.row_width(),
        cfg.conv_channels,
        cfg.skip_channels,
        cfg.control_dim,
        cfg.output_channels,
    );
    let k = cfg.initial_taps;

    let n0 = l_in - k;
    let mut h0 = vec![T::zero(); n0 * c];
    for (j, out) in h0.chunks_exact_mut(c).enumerate() {
        let pos = j + k;
        input_conv(params, cfg, |lag| Some(&input.rows[(pos - lag) * w..(pos - lag + 1) * w]), out);
    }

    let mut hs = vec![h0];
    let (mut tfs, mut sgs, mut zs) = (Vec::new(), Vec::new(), Vec::new());
    let mut skip_sum = vec![T::zero(); out_len * s];
    let mut pre = vec![T::zero(); 2 * c];
    // Absolute row of position 0 of the current layer's input.
    let mut offset = k;
    for (li, (layer, &dil)) in params.layers.iter().zip(&cfg.dilations).enumerate() {
        let h = hs.last().unwrap();
        let m = h.len() / c - dil;
        offset += dil;
        let mut tf = vec![T::zero(); m * c];
        let mut sg = vec![T::zero(); m * c];
        let mut z = vec![T::zero(); m * c];
        for j in 0..m {
            let ctrl = &input.controls[(j + offset) * d..(j + offset + 1) * d];
            gated_unit(
                layer,
                &h[(j + dil) * c..(j + dil + 1) * c],
                Some(&h[j * c..(j + 1) * c]),
                ctrl,
                &mut pre,
                &mut tf[j * c..(j + 1) * c],
                &mut sg[j * c..(j + 1) * c],
                &mut z[j * c..(j + 1) * c],
            );
        }
        let first = m - out_len;
        for (j, acc) in skip_sum.chunks_exact_mut(s).enumerate() {
            skip_accum(layer, &z[(first + j) * c..(first + j + 1) * c], acc);
        }
        if li + 1 < cfg.layers() {
            let mut next = vec![T::zero(); m * c];
            for j in 0..m {
                residual(
                    layer,
                    &h[(j + dil) * c..(j + dil + 1) * c],
                    &z[j * c..(j + 1) * c],
                    &mut next[j * c..(j + 1) * c],
                );
            }
            hs.push(next);
        }
        tfs.push(tf);
        sgs.push(sg);
        zs.push(z);
    }

    let mut o = vec![T::zero(); out_len * s];
    let mut raw = vec![T::zero(); out_len * o_ch];
    for j in 0..out_len {
        let ctrl = &input.controls[(j + span) * d..(j + span + 1) * d];
        output_stack(
            params,
            &skip_sum[j * s..(j + 1) * s],
            ctrl,
            &mut o[j * s..(j + 1) * s],
            &mut raw[j * o_ch..(j + 1) * o_ch],
        );
    }

    let acts = train.then(|| Activations {
        rows: input.rows.to_vec(),
        controls: input.controls.to_vec(),
        h: hs,
        tf: tfs,
        sg: sgs,
        z: zs,
        skip_sum,
        o,
        out_len,
    });
    Ok((raw, acts))
}

/// Single prediction from a window of exactly `R` rows, where the last row
/// is the position being predicted (only its aux channels are read).
///
/// This is the straightforward evaluator: every layer is computed at every
/// window position, with missing taps at the window's left edge treated as
/// zero. Positions that depend on those edges never reach the final output.
pub fn forward<T: Real>(params: &NetParams<T>, cfg: &NetConfig, window: SequenceInput<'_, T>) -> Result<Vec<T>> {
    let r = cfg.receptive_field();
    let l_in = window.len(cfg)?;
    if l_in != r {
        return Err(Error::Dimension(format!("window has {l_in} rows, expected {r}")));
    }
    let (w, c, s, d) = (cfg.row_width(), cfg.conv_channels, cfg.skip_channels, cfg.control_dim);

    let mut h = vec![T::zero(); r * c];
    for (pos, out) in h.chunks_exact_mut(c).enumerate() {
        input_conv(
            params,
            cfg,
            |lag| (lag <= pos).then(|| &window.rows[(pos - lag) * w..(pos - lag + 1) * w]),
            out,
        );
    }
    let mut skip = vec![T::zero(); r * s];
    let mut pre = vec![T::zero(); 2 * c];
    let (mut tf, mut sg, mut z) = (vec![T::zero(); c], vec![T::zero(); c], vec![T::zero(); c]);
    let mut next = vec![T::zero(); r * c];
    for (li, (layer, &dil)) in params.layers.iter().zip(&cfg.dilations).enumerate() {
        let last_layer = li + 1 == cfg.layers();
        for pos in 0..r {
            let past = (pos >= dil).then(|| &h[(pos - dil) * c..(pos - dil + 1) * c]);
            let cur = &h[pos * c..(pos + 1) * c];
            gated_unit(layer, cur, past, &window.controls[pos * d..(pos + 1) * d], &mut pre, &mut tf, &mut sg, &mut z);
            skip_accum(layer, &z, &mut skip[pos * s..(pos + 1) * s]);
            if !last_layer {
                residual(layer, cur, &z, &mut next[pos * c..(pos + 1) * c]);
            }
        }
        if !last_layer {
            std::mem::swap(&mut h, &mut next);
        }
    }
    let mut o = vec![T::zero(); s];
    let mut raw = vec![T::zero(); cfg.output_channels];
    output_stack(params, &skip[(r - 1) * s..], &window.controls[(r - 1) * d..], &mut o, &mut raw);
    Ok(raw)
}
