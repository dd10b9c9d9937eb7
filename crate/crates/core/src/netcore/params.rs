use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NetConfig, Real};
use crate::error::{Error, Result};

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64_lossy(v.to_f64().unwrap())).collect(),
        }
    }
}

/// Weights of one dilated layer. Filter and gate halves share one matrix:
/// output columns `0..C` are the filter path, `C..2C` the gate path.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    /// `[C, 2C]`, tap at the current position.
    pub dil_cur: Tensor<T>,
    /// `[C, 2C]`, tap `dilation` positions back.
    pub dil_past: Tensor<T>,
    /// `[2C]`
    pub dil_bias: Tensor<T>,
    /// `[D, 2C]`, control projection summed before the nonlinearities.
    pub control: Tensor<T>,
    /// `[C, C]` and `[C]`; absent on the last layer, whose residual output
    /// feeds nothing.
    pub residual: Option<(Tensor<T>, Tensor<T>)>,
    /// `[C, S]`
    pub skip: Tensor<T>,
    /// `[S]`
    pub skip_bias: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams<T> {
    /// `[K, N, C]`: own-stream weights for lags `1..=K`.
    pub input: Tensor<T>,
    /// `[K + 1, A, C]`: aux weights for lags `0..=K`; absent when `A = 0`.
    pub aux: Option<Tensor<T>>,
    /// `[C]`
    pub input_bias: Tensor<T>,
    pub layers: Vec<LayerParams<T>>,
    /// `[S, S]` and `[S]`: post-skip 1x1.
    pub post: Tensor<T>,
    pub post_bias: Tensor<T>,
    /// `[D, S]`
    pub out_control: Tensor<T>,
    /// `[S, O]` and `[O]`
    pub out: Tensor<T>,
    pub out_bias: Tensor<T>,
}

impl<T: Real> NetParams<T> {
    pub fn zeros(cfg: &NetConfig) -> Self {
        let (n, a, k) = (cfg.input_channels, cfg.aux_channels, cfg.initial_taps);
        let (c, s, d, o) = (cfg.conv_channels, cfg.skip_channels, cfg.control_dim, cfg.output_channels);
        let last = cfg.layers() - 1;
        NetParams {
            input: Tensor::zeros(&[k, n, c]),
            aux: (a > 0).then(|| Tensor::zeros(&[k + 1, a, c])),
            input_bias: Tensor::zeros(&[c]),
            layers: (0..cfg.layers())
                .map(|l| LayerParams {
                    dil_cur: Tensor::zeros(&[c, 2 * c]),
                    dil_past: Tensor::zeros(&[c, 2 * c]),
                    dil_bias: Tensor::zeros(&[2 * c]),
                    control: Tensor::zeros(&[d, 2 * c]),
                    residual: (l != last).then(|| (Tensor::zeros(&[c, c]), Tensor::zeros(&[c]))),
                    skip: Tensor::zeros(&[c, s]),
                    skip_bias: Tensor::zeros(&[s]),
                })
                .collect(),
            post: Tensor::zeros(&[s, s]),
            post_bias: Tensor::zeros(&[s]),
            out_control: Tensor::zeros(&[d, s]),
            out: Tensor::zeros(&[s, o]),
            out_bias: Tensor::zeros(&[o]),
        }
    }

    /// Every tensor with a stable dotted name, in a fixed order.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v: Vec<(String, &Tensor<T>)> = vec![("input.weight".into(), &self.input)];
        if let Some(aux) = &self.aux {
            v.push(("input.aux_weight".into(), aux));
        }
        v.push(("input.bias".into(), &self.input_bias));
        for (l, layer) in self.layers.iter().enumerate() {
            v.push((format!("layer{l}.dilated.current"), &layer.dil_cur));
            v.push((format!("layer{l}.dilated.past"), &layer.dil_past));
            v.push((format!("layer{l}.dilated.bias"), &layer.dil_bias));
            v.push((format!("layer{l}.control"), &layer.control));
            if let Some((w, b)) = &layer.residual {
                v.push((format!("layer{l}.residual.weight"), w));
                v.push((format!("layer{l}.residual.bias"), b));
            }
            v.push((format!("layer{l}.skip.weight"), &layer.skip));
            v.push((format!("layer{l}.skip.bias"), &layer.skip_bias));
        }
        v.push(("output.post.weight".into(), &self.post));
        v.push(("output.post.bias".into(), &self.post_bias));
        v.push(("output.control".into(), &self.out_control));
        v.push(("output.final.weight".into(), &self.out));
        v.push(("output.final.bias".into(), &self.out_bias));
        v
    }

    /// Mutable counterpart of [`named`](Self::named), same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v: Vec<&mut Tensor<T>> = vec![&mut self.input];
        if let Some(aux) = &mut self.aux {
            v.push(aux);
        }
        v.push(&mut self.input_bias);
        for layer in &mut self.layers {
            v.push(&mut layer.dil_cur);
            v.push(&mut layer.dil_past);
            v.push(&mut layer.dil_bias);
            v.push(&mut layer.control);
            if let Some((w, b)) = &mut layer.residual {
                v.push(w);
                v.push(b);
            }
            v.push(&mut layer.skip);
            v.push(&mut layer.skip_bias);
        }
        v.push(&mut self.post);
        v.push(&mut self.post_bias);
        v.push(&mut self.out_control);
        v.push(&mut self.out);
        v.push(&mut self.out_bias);
        v
    }

    pub fn scalar_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> NetParams<U> {
        let mut out = NetParams::<U> {
            input: self.input.cast(),
            aux: self.aux.as_ref().map(Tensor::cast),
            input_bias: self.input_bias.cast(),
            layers: Vec::new(),
            post: self.post.cast(),
            post_bias: self.post_bias.cast(),
            out_control: self.out_control.cast(),
            out: self.out.cast(),
            out_bias: self.out_bias.cast(),
        };
        out.layers = self
            .layers
            .iter()
            .map(|l| LayerParams {
                dil_cur: l.dil_cur.cast(),
                dil_past: l.dil_past.cast(),
                dil_bias: l.dil_bias.cast(),
                control: l.control.cast(),
                residual: l.residual.as_ref().map(|(w, b)| (w.cast(), b.cast())),
                skip: l.skip.cast(),
                skip_bias: l.skip_bias.cast(),
            })
            .collect();
        out
    }

    /// Adds `other` element-wise.
    pub fn add_assign(&mut self, other: &NetParams<T>) {
        let src = other.named();
        for (dst, (_, s)) in self.tensors_mut().into_iter().zip(src) {
            dst.data.iter_mut().zip(&s.data).for_each(|(a, b)| *a += *b);
        }
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Checks that every tensor has the shape `cfg` implies.
    pub fn check_shapes(&self, cfg: &NetConfig) -> Result<()> {
        let expect = NetParams::<T>::zeros(cfg);
        let ours = self.named();
        let theirs = expect.named();
        if ours.len() != theirs.len() {
            return Err(Error::Dimension(format!(
                "parameter set has {} tensors, config implies {}",
                ours.len(),
                theirs.len()
            )));
        }
        for ((name, t), (ename, e)) in ours.iter().zip(&theirs) {
            if name != ename || t.shape != e.shape || t.data.len() != e.data.len() {
                return Err(Error::Dimension(format!(
                    "tensor '{name}' has shape {:?}, expected '{ename}' {:?}",
                    t.shape, e.shape
                )));
            }
        }
        Ok(())
    }
}

/// Uniform fan-in initialisation: weights ~ U(-a, a) with `a = sqrt(3 / fan_in)`
/// (variance `1 / fan_in`); biases start at zero.
pub fn init_params<T: Real>(cfg: &NetConfig, seed: u64) -> NetParams<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = NetParams::<T>::zeros(cfg);
    let (c, s, d) = (cfg.conv_channels, cfg.skip_channels, cfg.control_dim);
    let input_fan = cfg.initial_taps * cfg.input_channels + (cfg.initial_taps + 1) * cfg.aux_channels;
    let mut fill = |t: &mut Tensor<T>, fan_in: usize| {
        let a = (3.0 / fan_in.max(1) as f64).sqrt();
        t.data
            .iter_mut()
            .for_each(|v| *v = T::from_f64_lossy(rng.gen_range(-a..a)));
    };
    fill(&mut p.input, input_fan);
    if let Some(aux) = &mut p.aux {
        fill(aux, input_fan);
    }
    for layer in &mut p.layers {
        fill(&mut layer.dil_cur, 2 * c);
        fill(&mut layer.dil_past, 2 * c);
        fill(&mut layer.control, d);
        if let Some((w, _)) = &mut layer.residual {
            fill(w, c);
        }
        fill(&mut layer.skip, c);
    }
    fill(&mut p.post, s);
    fill(&mut p.out_control, d);
    fill(&mut p.out, s);
    p
}
