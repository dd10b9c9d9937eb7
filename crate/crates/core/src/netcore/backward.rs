use super::kernels::accum_grad;
use super::{Activations, NetConfig, NetParams, Real};
use crate::error::{Error, Result};

/// Reverse-mode pass through [`forward_batch`](super::forward_batch).
///
/// `grad_raw` is the gradient of a scalar loss with respect to every raw
/// output (`out_len x output_channels`). Returns the gradient for every
/// parameter tensor.
pub fn backward<T: Real>(
    params: &NetParams<T>,
    cfg: &NetConfig,
    acts: Option<&Activations<T>>,
    grad_raw: &[T],
) -> Result<NetParams<T>> {
    let acts = acts.ok_or_else(|| Error::State("backward needs activations from a training forward pass".into()))?;
    let (w, c, s, d, o_ch) = (
        cfg.row_width(),
        cfg.conv_channels,
        cfg.skip_channels,
        cfg.control_dim,
        cfg.output_channels,
    );
    let (n, a, k) = (cfg.input_channels, cfg.aux_channels, cfg.initial_taps);
    let out_len = acts.out_len;
    if grad_raw.len() != out_len * o_ch {
        return Err(Error::Dimension(format!(
            "output gradient has {} values, expected {out_len} x {o_ch}",
            grad_raw.len()
        )));
    }
    let span = cfg.receptive_field() - 1;
    let mut g = NetParams::<T>::zeros(cfg);

    // Output stack.
    let mut g_skip = vec![T::zero(); out_len * s];
    let mut g_o = vec![T::zero(); s];
    for j in 0..out_len {
        let gr = &grad_raw[j * o_ch..(j + 1) * o_ch];
        let o = &acts.o[j * s..(j + 1) * s];
        g.out_bias.data.iter_mut().zip(gr).for_each(|(a, &b)| *a += b);
        g_o.iter_mut().for_each(|v| *v = T::zero());
        accum_grad(o, &params.out.data, gr, &mut g.out.data, Some(&mut g_o));
        // Through tanh.
        g_o.iter_mut().zip(o).for_each(|(gv, &ov)| *gv *= T::one() - ov * ov);
        g.post_bias.data.iter_mut().zip(&g_o).for_each(|(a, &b)| *a += b);
        let ctrl = &acts.controls[(j + span) * d..(j + span + 1) * d];
        accum_grad(ctrl, &params.out_control.data, &g_o, &mut g.out_control.data, None);
        accum_grad(
            &acts.skip_sum[j * s..(j + 1) * s],
            &params.post.data,
            &g_o,
            &mut g.post.data,
            Some(&mut g_skip[j * s..(j + 1) * s]),
        );
    }

    // Dilated layers, last to first. `g_next` is the gradient w.r.t. the
    // input of the layer above (absent for the top layer).
    let mut offsets = Vec::with_capacity(cfg.layers());
    let mut off = k;
    for &dil in &cfg.dilations {
        off += dil;
        offsets.push(off);
    }
    let mut g_next: Option<Vec<T>> = None;
    let mut g_pre = vec![T::zero(); 2 * c];
    let mut g_z = vec![T::zero(); c];
    for li in (0..cfg.layers()).rev() {
        let layer = &params.layers[li];
        let gl = &mut g.layers[li];
        let dil = cfg.dilations[li];
        let h = &acts.h[li];
        let (tf, sg, z) = (&acts.tf[li], &acts.sg[li], &acts.z[li]);
        let m = z.len() / c;
        let first = m - out_len;
        let mut g_h = vec![T::zero(); (m + dil) * c];
        for j in 0..m {
            let zj = &z[j * c..(j + 1) * c];
            g_z.iter_mut().for_each(|v| *v = T::zero());
            if let (Some(gn), Some((rw, _))) = (&g_next, &layer.residual) {
                let gnj = &gn[j * c..(j + 1) * c];
                let (gw, gb) = gl.residual.as_mut().unwrap();
                gb.data.iter_mut().zip(gnj).for_each(|(a, &b)| *a += b);
                accum_grad(zj, &rw.data, gnj, &mut gw.data, Some(&mut g_z));
                g_h[(j + dil) * c..(j + dil + 1) * c]
                    .iter_mut()
                    .zip(gnj)
                    .for_each(|(a, &b)| *a += b);
            }
            if j >= first {
                let gs = &g_skip[(j - first) * s..(j - first + 1) * s];
                gl.skip_bias.data.iter_mut().zip(gs).for_each(|(a, &b)| *a += b);
                accum_grad(zj, &layer.skip.data, gs, &mut gl.skip.data, Some(&mut g_z));
            }
            for i in 0..c {
                let (t, sgm) = (tf[j * c + i], sg[j * c + i]);
                g_pre[i] = g_z[i] * sgm * (T::one() - t * t);
                g_pre[c + i] = g_z[i] * t * sgm * (T::one() - sgm);
            }
            gl.dil_bias.data.iter_mut().zip(&g_pre).for_each(|(a, &b)| *a += b);
            let pos = j + offsets[li];
            accum_grad(&acts.controls[pos * d..(pos + 1) * d], &layer.control.data, &g_pre, &mut gl.control.data, None);
            let (lo, hi) = g_h.split_at_mut((j + dil) * c);
            accum_grad(
                &h[(j + dil) * c..(j + dil + 1) * c],
                &layer.dil_cur.data,
                &g_pre,
                &mut gl.dil_cur.data,
                Some(&mut hi[..c]),
            );
            accum_grad(
                &h[j * c..(j + 1) * c],
                &layer.dil_past.data,
                &g_pre,
                &mut gl.dil_past.data,
                Some(&mut lo[j * c..(j + 1) * c]),
            );
        }
        g_next = Some(g_h);
    }

    // Initial causal convolution.
    let g_h0 = g_next.expect("at least one layer");
    for (j, gj) in g_h0.chunks_exact(c).enumerate() {
        let pos = j + k;
        g.input_bias.data.iter_mut().zip(gj).for_each(|(a, &b)| *a += b);
        for lag in 1..=k {
            let row = &acts.rows[(pos - lag) * w..(pos - lag + 1) * w];
            accum_grad(
                &row[..n],
                &params.input.data[(lag - 1) * n * c..lag * n * c],
                gj,
                &mut g.input.data[(lag - 1) * n * c..lag * n * c],
                None,
            );
        }
        if let (Some(aux), Some(g_aux)) = (&params.aux, &mut g.aux) {
            for lag in 0..=k {
                let row = &acts.rows[(pos - lag) * w..(pos - lag + 1) * w];
                accum_grad(
                    &row[n..n + a],
                    &aux.data[lag * a * c..(lag + 1) * a * c],
                    gj,
                    &mut g_aux.data[lag * a * c..(lag + 1) * a * c],
                    None,
                );
            }
        }
    }
    Ok(g)
}
