//! Acoustic and linguistic feature containers, their on-disk formats, the
//! linguistic encoder and the synthetic corpus generator.

mod coding;
mod io;
mod synth;

pub use coding::{coarse_code_position, control_from_segments, encode_control, ControlVector};
pub(crate) use io::Reader;
pub use io::{read_alphabet, read_corpus, read_features, write_corpus, write_features};
pub use synth::{gen_synthetic_corpus, GeneratorTruth, SynthSpec};

use crate::error::{Error, Result};

/// Frame hop used by the vocoder features.
pub const HOP_SECONDS: f64 = 0.005;

pub const SILENCE: &str = "sil";

/// The three vocoder feature streams, in prediction order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamKind {
    Harmonic,
    Vuv,
    Aperiodic,
}

impl StreamKind {
    /// Prediction order: each stream is conditioned on the ones before it.
    pub const ALL: [StreamKind; 3] = [StreamKind::Harmonic, StreamKind::Vuv, StreamKind::Aperiodic];

    /// Position in [`StreamKind::ALL`].
    pub fn index(self) -> usize {
        match self {
            StreamKind::Harmonic => 0,
            StreamKind::Vuv => 1,
            StreamKind::Aperiodic => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StreamKind::Harmonic => "harmonic",
            StreamKind::Vuv => "vuv",
            StreamKind::Aperiodic => "aperiodic",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "harmonic" => Ok(StreamKind::Harmonic),
            "vuv" => Ok(StreamKind::Vuv),
            "aperiodic" => Ok(StreamKind::Aperiodic),
            other => Err(Error::Config(format!("unknown stream '{other}'"))),
        }
    }

    pub fn default_dim(self) -> usize {
        match self {
            StreamKind::Harmonic => 60,
            StreamKind::Vuv => 1,
            StreamKind::Aperiodic => 4,
        }
    }

    /// Upstream streams whose frames this stream receives as auxiliary input.
    pub fn upstream(self) -> &'static [StreamKind] {
        match self {
            StreamKind::Harmonic => &[],
            StreamKind::Vuv => &[StreamKind::Harmonic],
            StreamKind::Aperiodic => &[StreamKind::Harmonic, StreamKind::Vuv],
        }
    }

    pub fn is_binary(self) -> bool {
        self == StreamKind::Vuv
    }
}

/// One feature stream of an utterance, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub name: String,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl Stream {
    pub fn new(name: impl Into<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Dimension(format!(
                "stream '{name}': {} values is not a multiple of dim {dim}",
                data.len()
            )));
        }
        Ok(Stream { name, dim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frames(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }
}

/// Per-frame control vectors, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrack {
    pub alphabet_size: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl ControlTrack {
    pub fn new(alphabet_size: usize) -> Self {
        ControlTrack {
            alphabet_size,
            dim: control_dim(alphabet_size),
            data: Vec::new(),
        }
    }

    pub fn push(&mut self, c: &ControlVector) {
        debug_assert_eq!(c.values.len(), self.dim);
        self.data.extend_from_slice(&c.values);
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    /// Index of the commanded (current) phoneme at frame `t`.
    pub fn current_phoneme(&self, t: usize) -> usize {
        let n = self.alphabet_size;
        let block = &self.frame(t)[n..2 * n];
        (0..n).fold(0, |best, i| if block[i] > block[best] { i } else { best })
    }
}

/// Width of an encoded control vector for an alphabet of `n` phonemes.
pub fn control_dim(alphabet_size: usize) -> usize {
    3 * alphabet_size + 3
}

/// Ordered phoneme inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Config("empty phoneme alphabet".into()));
        }
        if symbols.len() > u16::MAX as usize {
            return Err(Error::Config("phoneme alphabet too large".into()));
        }
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!("invalid phoneme symbol '{s}'")));
            }
            if symbols[..i].contains(s) {
                return Err(Error::Config(format!("duplicate phoneme symbol '{s}'")));
            }
        }
        Ok(Alphabet { symbols })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, id: usize) -> &str {
        &self.symbols[id]
    }

    pub fn index_of(&self, symbol: &str) -> Result<usize> {
        self.symbols
            .iter()
            .position(|s| s == symbol)
            .ok_or_else(|| Error::UnknownSymbol(symbol.to_string()))
    }

    pub fn silence_id(&self) -> Option<usize> {
        self.symbols.iter().position(|s| s == SILENCE)
    }
}

/// Aligned feature streams, control track and phoneme labels of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub hop_seconds: f64,
    pub streams: Vec<Stream>,
    pub control: ControlTrack,
    pub labels: Vec<u16>,
}

impl Utterance {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn stream(&self, name: &str) -> Option<&Stream> {
        self.streams.iter().find(|s| s.name == name)
    }

    pub fn stream_of(&self, kind: StreamKind) -> Result<&Stream> {
        self.stream(kind.name())
            .ok_or_else(|| Error::Config(format!("utterance has no '{}' stream", kind.name())))
    }

    /// Checks the structural invariants: common length, positive hop and
    /// finite values.
    pub fn validate(&self) -> Result<()> {
        if !(self.hop_seconds > 0.0) || !self.hop_seconds.is_finite() {
            return Err(Error::Config(format!("invalid hop {}", self.hop_seconds)));
        }
        let t = self.labels.len();
        if self.control.len() != t {
            return Err(Error::Dimension(format!(
                "control track has {} frames, labels have {t}",
                self.control.len()
            )));
        }
        for s in &self.streams {
            if s.len() != t {
                return Err(Error::Dimension(format!(
                    "stream '{}' has {} frames, labels have {t}",
                    s.name,
                    s.len()
                )));
            }
            if let Some(i) = s.data.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "stream '{}' frame {} is not finite",
                    s.name,
                    i / s.dim
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn tag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            other => Err(Error::Config(format!("unknown split tag '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub alphabet: Alphabet,
    pub utterances: Vec<Utterance>,
    pub split: Vec<Split>,
    pub truth: Option<GeneratorTruth>,
}

impl Corpus {
    pub fn train(&self) -> impl Iterator<Item = &Utterance> {
        self.with_split(Split::Train)
    }

    pub fn validation(&self) -> impl Iterator<Item = &Utterance> {
        self.with_split(Split::Validation)
    }

    fn with_split(&self, which: Split) -> impl Iterator<Item = &Utterance> {
        self.utterances
            .iter()
            .zip(&self.split)
            .filter(move |(_, s)| **s == which)
            .map(|(u, _)| u)
    }
}
