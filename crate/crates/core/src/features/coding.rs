use super::{control_dim, Alphabet, ControlTrack};
use crate::error::{Error, Result};

/// Dense linguistic control vector: previous, current and next phoneme
/// one-hots followed by the coarse-coded position within the phoneme.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector {
    pub values: Vec<f32>,
}

impl ControlVector {
    pub fn position_code(&self) -> &[f32] {
        &self.values[self.values.len() - 3..]
    }
}

/// Activations of three triangular basis functions centred at 0, 0.5 and 1.
///
/// The outputs form a partition of unity on `[0, 1]`.
pub fn coarse_code_position(p: f64) -> Result<[f64; 3]> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("position {p} outside [0, 1]")));
    }
    let tri = |centre: f64| (1.0 - (p - centre).abs() / 0.5).max(0.0);
    Ok([tri(0.0), tri(0.5), tri(1.0)])
}

pub fn encode_control(
    prev: &str,
    cur: &str,
    next: &str,
    p: f64,
    alphabet: &Alphabet,
) -> Result<ControlVector> {
    let ids = [
        alphabet.index_of(prev)?,
        alphabet.index_of(cur)?,
        alphabet.index_of(next)?,
    ];
    encode_control_ids(ids, p, alphabet.len())
}

pub(crate) fn encode_control_ids(ids: [usize; 3], p: f64, alphabet_size: usize) -> Result<ControlVector> {
    let mut values = vec![0.0f32; control_dim(alphabet_size)];
    for (block, &id) in ids.iter().enumerate() {
        if id >= alphabet_size {
            return Err(Error::UnknownSymbol(format!("#{id}")));
        }
        values[block * alphabet_size + id] = 1.0;
    }
    let code = coarse_code_position(p)?;
    for (dst, c) in values[3 * alphabet_size..].iter_mut().zip(code) {
        *dst = c as f32;
    }
    Ok(ControlVector { values })
}

/// Control track and labels for a sequence of `(phoneme id, frames)`
/// segments. `edge` stands in for the missing neighbour at either end.
pub fn control_from_segments(
    segments: &[(usize, usize)],
    edge: usize,
    alphabet_size: usize,
) -> Result<(ControlTrack, Vec<u16>)> {
    let mut control = ControlTrack::new(alphabet_size);
    let mut labels = Vec::new();
    for (si, &(id, len)) in segments.iter().enumerate() {
        let prev = if si > 0 { segments[si - 1].0 } else { edge };
        let next = segments.get(si + 1).map_or(edge, |s| s.0);
        let label = u16::try_from(id).map_err(|_| Error::UnknownSymbol(format!("#{id}")))?;
        for k in 0..len {
            let p = (k as f64 + 0.5) / len as f64;
            control.push(&encode_control_ids([prev, id, next], p, alphabet_size)?);
            labels.push(label);
        }
    }
    Ok((control, labels))
}
