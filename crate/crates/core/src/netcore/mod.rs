//! The conditional gated dilated-convolution network.
//!
//! Topology, per output position `t`:
//!
//! * an initial causal convolution over the stream's own past frames
//!   `t-1 ..= t-K` and the auxiliary (upstream) frames `t-K ..= t`;
//! * a stack of 2-tap dilated convolutions, each followed by a gated unit
//!   `tanh(f + Vf c) * sigmoid(g + Vg c)`, a residual 1x1 and a skip 1x1;
//! * an output stack `W_out tanh(W_post sum(skips) + V_out c) + b_out`.
//!
//! Sequences are evaluated in "valid" mode: an input of `L` rows produces
//! `L - (receptive_field - 1)` outputs. Padding before the start of an
//! utterance is the caller's job (zero rows with zero control).

mod backward;
mod forward;
pub(crate) mod kernels;
mod params;

pub use backward::backward;
pub use forward::{forward, forward_batch, Activations, SequenceInput};
pub use params::{init_params, LayerParams, NetParams, Tensor};

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

use crate::error::{Error, Result};

/// Scalar type of the network: `f32` for training and generation, `f64`
/// for gradient checks.
pub trait Real:
    Float + FromPrimitive + AddAssign + SubAssign + MulAssign + Sum + Default + Debug + Send + Sync + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetConfig {
    /// Width of the stream's own frames.
    pub input_channels: usize,
    /// Width of the upstream frames fed in alongside (0 for none).
    pub aux_channels: usize,
    /// Past frames seen by the initial causal convolution.
    pub initial_taps: usize,
    pub dilations: Vec<usize>,
    pub conv_channels: usize,
    pub skip_channels: usize,
    pub control_dim: usize,
    pub output_channels: usize,
}

impl NetConfig {
    /// Layer sizes from the reference configuration (10 past taps,
    /// dilations 1, 2, 4, 1, 2).
    pub fn reference(
        input_channels: usize,
        aux_channels: usize,
        conv_channels: usize,
        skip_channels: usize,
        control_dim: usize,
        output_channels: usize,
    ) -> Self {
        NetConfig {
            input_channels,
            aux_channels,
            initial_taps: 10,
            dilations: vec![1, 2, 4, 1, 2],
            conv_channels,
            skip_channels,
            control_dim,
            output_channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_channels", self.input_channels),
            ("conv_channels", self.conv_channels),
            ("skip_channels", self.skip_channels),
            ("control_dim", self.control_dim),
            ("output_channels", self.output_channels),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("network {name} must be positive")));
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return Err(Error::Config("dilations must be a non-empty list of positive integers".into()));
        }
        Ok(())
    }

    /// Frames spanned by one prediction: the current frame plus its context.
    pub fn receptive_field(&self) -> usize {
        1 + self.initial_taps + self.dilations.iter().sum::<usize>()
    }

    /// Width of one input row: own channels followed by aux channels.
    pub fn row_width(&self) -> usize {
        self.input_channels + self.aux_channels
    }

    pub fn layers(&self) -> usize {
        self.dilations.len()
    }

    /// Exact number of scalars in [`NetParams`] for this configuration.
    pub fn param_count(&self) -> usize {
        let (n, a, k) = (self.input_channels, self.aux_channels, self.initial_taps);
        let (c, s, d, o) = (self.conv_channels, self.skip_channels, self.control_dim, self.output_channels);
        let input = k * n * c + (k + 1) * a * c + c;
        let per_layer = 2 * (c * 2 * c) + 2 * c + d * 2 * c + (c * s + s);
        let residual = (self.layers() - 1) * (c * c + c);
        let output = (s * s + s) + d * s + (s * o + o);
        input + self.layers() * per_layer + residual + output
    }
}
