use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::netcore::kernels::{gated_unit, input_conv, output_stack, residual, skip_accum};
use crate::netcore::{forward, NetConfig, NetParams, SequenceInput};

/// Frame-by-frame evaluator of one stream network. Each frame is a
/// [`predict`](Decoder::predict) followed by a [`commit`](Decoder::commit)
/// of the chosen values.
pub trait Decoder {
    fn config(&self) -> &NetConfig;

    /// Raw outputs for the next frame given its aux inputs and control.
    fn predict(&mut self, aux: &[f32], control: &[f32]) -> Result<Vec<f32>>;

    /// Appends the generated own-stream values of the predicted frame.
    fn commit(&mut self, own: &[f32]) -> Result<()>;

    /// Frames committed so far.
    fn frames(&self) -> usize;
}

fn check_inputs(cfg: &NetConfig, aux: &[f32], control: &[f32]) -> Result<()> {
    if aux.len() != cfg.aux_channels {
        return Err(Error::Dimension(format!(
            "aux input has {} values, network expects {}",
            aux.len(),
            cfg.aux_channels
        )));
    }
    if control.len() != cfg.control_dim {
        return Err(Error::Dimension(format!(
            "control has {} values, network expects {}",
            control.len(),
            cfg.control_dim
        )));
    }
    Ok(())
}

/// Reference decoder: rebuilds the full receptive-field window every frame
/// and evaluates every layer at every window position.
pub struct NaiveDecoder<'a> {
    params: &'a NetParams<f32>,
    cfg: NetConfig,
    rows: Vec<f32>,
    controls: Vec<f32>,
    frames: usize,
    pending: bool,
}

impl<'a> NaiveDecoder<'a> {
    pub fn new(params: &'a NetParams<f32>, cfg: &NetConfig) -> Result<Self> {
        params.check_shapes(cfg)?;
        let span = cfg.receptive_field() - 1;
        Ok(NaiveDecoder {
            params,
            cfg: cfg.clone(),
            rows: vec![0.0; span * cfg.row_width()],
            controls: vec![0.0; span * cfg.control_dim],
            frames: 0,
            pending: false,
        })
    }
}

impl Decoder for NaiveDecoder<'_> {
    fn config(&self) -> &NetConfig {
        &self.cfg
    }

    fn predict(&mut self, aux: &[f32], control: &[f32]) -> Result<Vec<f32>> {
        check_inputs(&self.cfg, aux, control)?;
        if self.pending {
            return Err(Error::State("predict called twice without commit".into()));
        }
        let (w, d, n) = (self.cfg.row_width(), self.cfg.control_dim, self.cfg.input_channels);
        self.rows.resize(self.rows.len() + n, 0.0);
        self.rows.extend_from_slice(aux);
        self.controls.extend_from_slice(control);
        let r = self.cfg.receptive_field();
        let rows = &self.rows[self.rows.len() - r * w..];
        let controls = &self.controls[self.controls.len() - r * d..];
        self.pending = true;
        forward(self.params, &self.cfg, SequenceInput { rows, controls })
    }

    fn commit(&mut self, own: &[f32]) -> Result<()> {
        if !self.pending {
            return Err(Error::State("commit without a prediction".into()));
        }
        let (w, n) = (self.cfg.row_width(), self.cfg.input_channels);
        if own.len() != n {
            return Err(Error::Dimension(format!("frame has {} values, expected {n}", own.len())));
        }
        let start = self.rows.len() - w;
        self.rows[start..start + n].copy_from_slice(own);
        self.pending = false;
        self.frames += 1;
        Ok(())
    }

    fn frames(&self) -> usize {
        self.frames
    }
}

/// Fixed-capacity ring of equally sized rows.
#[derive(Debug, Clone)]
struct Ring {
    data: Vec<f32>,
    width: usize,
    capacity: usize,
    /// Slot of the next write.
    head: usize,
    pushed: usize,
}

impl Ring {
    fn new(capacity: usize, width: usize) -> Self {
        Ring {
            data: vec![0.0; capacity * width],
            width,
            capacity,
            head: 0,
            pushed: 0,
        }
    }

    fn push(&mut self, row: &[f32]) {
        let w = self.width;
        self.data[self.head * w..(self.head + 1) * w].copy_from_slice(row);
        self.head = (self.head + 1) % self.capacity;
        self.pushed += 1;
    }

    /// Row pushed `back` pushes ago (`back = 1` is the latest).
    fn back(&self, back: usize) -> Option<&[f32]> {
        if back == 0 || back > self.capacity || back > self.pushed {
            return None;
        }
        let slot = (self.head + self.capacity - back) % self.capacity;
        Some(&self.data[slot * self.width..(slot + 1) * self.width])
    }

    fn latest_mut(&mut self) -> &mut [f32] {
        let slot = (self.head + self.capacity - 1) % self.capacity;
        &mut self.data[slot * self.width..(slot + 1) * self.width]
    }
}

/// Cached decoder state: one ring per layer holding that layer's past
/// inputs (capacity = dilation) and a ring of the last `K + 1` input rows.
/// Every frame costs one position per layer, independent of the receptive
/// field.
pub struct GenState<'a> {
    params: &'a NetParams<f32>,
    cfg: NetConfig,
    input: Ring,
    layers: Vec<Ring>,
    frames: usize,
    pending: bool,
    h: Vec<f32>,
    next: Vec<f32>,
    pre: Vec<f32>,
    tf: Vec<f32>,
    sg: Vec<f32>,
    z: Vec<f32>,
    skip: Vec<f32>,
    o: Vec<f32>,
}

impl<'a> GenState<'a> {
    pub fn new(params: &'a NetParams<f32>, cfg: &NetConfig) -> Result<Self> {
        params.check_shapes(cfg)?;
        let (c, s) = (cfg.conv_channels, cfg.skip_channels);
        let mut state = GenState {
            params,
            cfg: cfg.clone(),
            input: Ring::new(cfg.initial_taps + 1, cfg.row_width()),
            layers: cfg.dilations.iter().map(|&d| Ring::new(d, c)).collect(),
            frames: 0,
            pending: false,
            h: vec![0.0; c],
            next: vec![0.0; c],
            pre: vec![0.0; 2 * c],
            tf: vec![0.0; c],
            sg: vec![0.0; c],
            z: vec![0.0; c],
            skip: vec![0.0; s],
            o: vec![0.0; s],
        };
        // Evaluate the zero rows before the utterance start exactly as the
        // padded teacher-forced pass does.
        let zero_aux = vec![0.0; cfg.aux_channels];
        let zero_ctrl = vec![0.0; cfg.control_dim];
        for _ in 0..cfg.receptive_field() - 1 {
            state.advance(&zero_aux, &zero_ctrl, None);
        }
        Ok(state)
    }

    /// Capacity of each layer ring, in layer order.
    pub fn capacities(&self) -> Vec<usize> {
        self.layers.iter().map(|r| r.capacity).collect()
    }

    /// Generated frames currently held by each layer ring.
    pub fn occupancy(&self) -> Vec<usize> {
        self.layers.iter().map(|r| r.capacity.min(self.frames)).collect()
    }

    /// Like [`Decoder::predict`], adding the time spent in the input
    /// convolution, each layer and the output stack to `timings`
    /// (`layers + 2` entries).
    pub fn predict_timed(&mut self, aux: &[f32], control: &[f32], timings: &mut [Duration]) -> Result<Vec<f32>> {
        if timings.len() != self.cfg.layers() + 2 {
            return Err(Error::Dimension(format!("expected {} timing slots", self.cfg.layers() + 2)));
        }
        self.predict_inner(aux, control, Some(timings))
    }

    fn predict_inner(&mut self, aux: &[f32], control: &[f32], timings: Option<&mut [Duration]>) -> Result<Vec<f32>> {
        check_inputs(&self.cfg, aux, control)?;
        if self.pending {
            return Err(Error::State("predict called twice without commit".into()));
        }
        self.pending = true;
        Ok(self.advance(aux, control, timings))
    }

    /// Pushes a row with unknown own values and evaluates one position.
    fn advance(&mut self, aux: &[f32], control: &[f32], mut timings: Option<&mut [Duration]>) -> Vec<f32> {
        let n = self.cfg.input_channels;
        let mut row = vec![0.0; self.cfg.row_width()];
        row[n..].copy_from_slice(aux);
        self.input.push(&row);

        let mut clock = timings.as_ref().map(|_| Instant::now());
        let mut tick = |slot: usize, timings: &mut Option<&mut [Duration]>| {
            if let (Some(t), Some(c)) = (timings.as_deref_mut(), clock.as_mut()) {
                let now = Instant::now();
                t[slot] += now - *c;
                *c = now;
            }
        };

        let input = &self.input;
        input_conv(self.params, &self.cfg, |lag| input.back(lag + 1), &mut self.h);
        tick(0, &mut timings);
        self.skip.iter_mut().for_each(|v| *v = 0.0);
        let layers = self.cfg.layers();
        for (li, (layer, ring)) in self.params.layers.iter().zip(self.layers.iter_mut()).enumerate() {
            let past = ring.back(ring.capacity);
            gated_unit(
                layer,
                &self.h,
                past,
                control,
                &mut self.pre,
                &mut self.tf,
                &mut self.sg,
                &mut self.z,
            );
            skip_accum(layer, &self.z, &mut self.skip);
            ring.push(&self.h);
            if li + 1 < layers {
                residual(layer, &self.h, &self.z, &mut self.next);
                std::mem::swap(&mut self.h, &mut self.next);
            }
            tick(li + 1, &mut timings);
        }
        let mut raw = vec![0.0; self.cfg.output_channels];
        output_stack(self.params, &self.skip, control, &mut self.o, &mut raw);
        tick(layers + 1, &mut timings);
        raw
    }
}

impl Decoder for GenState<'_> {
    fn config(&self) -> &NetConfig {
        &self.cfg
    }

    fn predict(&mut self, aux: &[f32], control: &[f32]) -> Result<Vec<f32>> {
        self.predict_inner(aux, control, None)
    }

    fn commit(&mut self, own: &[f32]) -> Result<()> {
        if !self.pending {
            return Err(Error::State("commit without a prediction".into()));
        }
        let n = self.cfg.input_channels;
        if own.len() != n {
            return Err(Error::Dimension(format!("frame has {} values, expected {n}", own.len())));
        }
        self.input.latest_mut()[..n].copy_from_slice(own);
        self.pending = false;
        self.frames += 1;
        Ok(())
    }

    fn frames(&self) -> usize {
        self.frames
    }
}
