//! Per-position building blocks shared by the sequence, window and cached
//! evaluators. Every path goes through these functions so that all three
//! produce bit-identical values for the same position.

use super::{LayerParams, NetConfig, NetParams, Real};

/// `out += x^T W` for a row-major `W` of shape `[x.len(), out.len()]`.
/// Zero inputs are skipped, which makes sparse control vectors cheap.
#[inline]
pub(crate) fn accum<T: Real>(x: &[T], w: &[T], out: &mut [T]) {
    let m = out.len();
    debug_assert_eq!(w.len(), x.len() * m);
    for (&xi, row) in x.iter().zip(w.chunks_exact(m)) {
        if xi == T::zero() {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(row) {
            *o += xi * wv;
        }
    }
}

/// Reverse of [`accum`]: `g_w += x g_out^T` and, if requested, `g_x += W g_out`.
#[inline]
pub(crate) fn accum_grad<T: Real>(x: &[T], w: &[T], g_out: &[T], g_w: &mut [T], g_x: Option<&mut [T]>) {
    let m = g_out.len();
    if let Some(g_x) = g_x {
        for (gx, row) in g_x.iter_mut().zip(w.chunks_exact(m)) {
            *gx += row.iter().zip(g_out).map(|(&a, &b)| a * b).sum::<T>();
        }
    }
    for (&xi, grow) in x.iter().zip(g_w.chunks_exact_mut(m)) {
        if xi == T::zero() {
            continue;
        }
        for (g, &go) in grow.iter_mut().zip(g_out) {
            *g += xi * go;
        }
    }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Initial causal convolution at one position. `row(lag)` yields the input
/// row `lag` positions back, or `None` outside the available window.
pub(crate) fn input_conv<'a, T: Real>(
    p: &NetParams<T>,
    cfg: &NetConfig,
    row: impl Fn(usize) -> Option<&'a [T]>,
    out: &mut [T],
) {
    let (n, a, c) = (cfg.input_channels, cfg.aux_channels, cfg.conv_channels);
    out.copy_from_slice(&p.input_bias.data);
    for lag in 1..=cfg.initial_taps {
        if let Some(r) = row(lag) {
            accum(&r[..n], &p.input.data[(lag - 1) * n * c..lag * n * c], out);
        }
    }
    if let Some(aux) = &p.aux {
        for lag in 0..=cfg.initial_taps {
            if let Some(r) = row(lag) {
                accum(&r[n..n + a], &aux.data[lag * a * c..(lag + 1) * a * c], out);
            }
        }
    }
}

/// Gated unit of one layer at one position. `pre` is scratch of width 2C.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gated_unit<T: Real>(
    layer: &LayerParams<T>,
    cur: &[T],
    past: Option<&[T]>,
    ctrl: &[T],
    pre: &mut [T],
    tf: &mut [T],
    sg: &mut [T],
    z: &mut [T],
) {
    let c = cur.len();
    pre.copy_from_slice(&layer.dil_bias.data);
    accum(cur, &layer.dil_cur.data, pre);
    if let Some(past) = past {
        accum(past, &layer.dil_past.data, pre);
    }
    accum(ctrl, &layer.control.data, pre);
    for i in 0..c {
        tf[i] = pre[i].tanh();
        sg[i] = sigmoid(pre[c + i]);
        z[i] = tf[i] * sg[i];
    }
}

/// `out = cur + W_res z + b_res`. Only valid for layers that have a residual.
pub(crate) fn residual<T: Real>(layer: &LayerParams<T>, cur: &[T], z: &[T], out: &mut [T]) {
    let (w, b) = layer.residual.as_ref().expect("layer without residual projection");
    out.copy_from_slice(&b.data);
    accum(z, &w.data, out);
    out.iter_mut().zip(cur).for_each(|(o, &h)| *o += h);
}

pub(crate) fn skip_accum<T: Real>(layer: &LayerParams<T>, z: &[T], acc: &mut [T]) {
    acc.iter_mut().zip(&layer.skip_bias.data).for_each(|(a, &b)| *a += b);
    accum(z, &layer.skip.data, acc);
}

/// Output stack: `o = tanh(W_post skip + b_post + V_out c)`, `raw = W_out o + b_out`.
pub(crate) fn output_stack<T: Real>(p: &NetParams<T>, skip_sum: &[T], ctrl: &[T], o: &mut [T], raw: &mut [T]) {
    o.copy_from_slice(&p.post_bias.data);
    accum(skip_sum, &p.post.data, o);
    accum(ctrl, &p.out_control.data, o);
    o.iter_mut().for_each(|v| *v = v.tanh());
    raw.copy_from_slice(&p.out_bias.data);
    accum(o, &p.out.data, raw);
}
