//! Synthetic singing-like corpus: per-phoneme smooth spectral templates
//! rendered along random phoneme sequences.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::coding::control_from_segments;
use super::{Alphabet, Corpus, Split, Stream, StreamKind, Utterance, HOP_SECONDS, SILENCE};
use crate::error::{Error, Result};

/// Base inventory, ordered so that any prefix mixes voiced and unvoiced symbols.
const INVENTORY: &[(&str, bool)] = &[
    (SILENCE, false),
    ("a", true),
    ("t", false),
    ("e", true),
    ("s", false),
    ("i", true),
    ("k", false),
    ("o", true),
    ("m", true),
    ("u", true),
    ("f", false),
    ("n", true),
    ("p", false),
    ("l", true),
    ("sh", false),
    ("r", true),
    ("h", false),
    ("w", true),
    ("ch", false),
    ("y", true),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub phonemes: usize,
    pub utterances: usize,
    /// Inclusive range of non-silence phonemes per utterance.
    pub phonemes_per_utterance: (usize, usize),
    /// Inclusive range of phoneme durations in frames.
    pub duration_frames: (usize, usize),
    /// Stationary standard deviation of the harmonic AR(1) noise.
    pub noise_std: f64,
    pub noise_ar: f64,
    /// Half-width of the coarticulation cross-fade, in frames.
    pub crossfade_frames: usize,
    /// Number of cosine terms kept when low-pass filtering template noise.
    pub template_cutoff: usize,
    pub harmonic_dim: usize,
    pub aperiodic_dim: usize,
    pub validation_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            phonemes: 10,
            utterances: 50,
            phonemes_per_utterance: (4, 10),
            duration_frames: (10, 40),
            noise_std: 0.3,
            noise_ar: 0.9,
            crossfade_frames: 3,
            template_cutoff: 8,
            harmonic_dim: StreamKind::Harmonic.default_dim(),
            aperiodic_dim: StreamKind::Aperiodic.default_dim(),
            validation_fraction: 0.1,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic corpus: {m}")));
        if self.phonemes < 4 {
            return bad("need at least 4 phonemes");
        }
        if self.phonemes > u16::MAX as usize {
            return bad("too many phonemes");
        }
        if self.utterances == 0 {
            return bad("need at least one utterance");
        }
        let (pmin, pmax) = self.phonemes_per_utterance;
        if pmin == 0 || pmin > pmax {
            return bad("invalid phonemes-per-utterance range");
        }
        let (dmin, dmax) = self.duration_frames;
        if dmin == 0 || dmin > dmax {
            return bad("invalid duration range");
        }
        if 2 * self.crossfade_frames > dmin {
            return bad("cross-fade longer than half the shortest phoneme");
        }
        if !(self.noise_std >= 0.0) || !(0.0..1.0).contains(&self.noise_ar) {
            return bad("invalid noise parameters");
        }
        if self.harmonic_dim == 0 || self.aperiodic_dim == 0 || self.template_cutoff == 0 {
            return bad("zero-sized stream");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Templates the synthetic corpus was rendered from.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTruth {
    pub harmonic: Vec<Vec<f32>>,
    pub aperiodic: Vec<Vec<f32>>,
    pub voiced: Vec<bool>,
}

impl GeneratorTruth {
    /// Phoneme whose harmonic template is nearest (Euclidean) to `frame`.
    pub fn classify_harmonic(&self, frame: &[f32]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (id, tpl) in self.harmonic.iter().enumerate() {
            let d: f64 = tpl
                .iter()
                .zip(frame)
                .map(|(a, b)| {
                    let e = f64::from(*a) - f64::from(*b);
                    e * e
                })
                .sum();
            if d < best.0 {
                best = (d, id);
            }
        }
        best.1
    }
}

fn phoneme_inventory(n: usize) -> (Vec<String>, Vec<bool>) {
    (0..n)
        .map(|i| match INVENTORY.get(i) {
            Some((s, v)) => (s.to_string(), *v),
            None => (format!("x{i}"), i % 2 == 0),
        })
        .unzip()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

/// Smooth curve: white noise projected onto the lowest `cutoff` cosine modes.
fn lowpass_curve(rng: &mut ChaCha8Rng, dim: usize, cutoff: usize, scale: f64) -> Vec<f64> {
    let coeffs: Vec<f64> = (0..cutoff).map(|k| normal(rng) / (1.0 + k as f64)).collect();
    (0..dim)
        .map(|j| {
            let x = std::f64::consts::PI * (j as f64 + 0.5) / dim as f64;
            scale * coeffs.iter().enumerate().map(|(k, c)| c * (k as f64 * x).cos()).sum::<f64>()
        })
        .collect()
}

fn make_truth(spec: &SynthSpec, voiced: &[bool], rng: &mut ChaCha8Rng) -> GeneratorTruth {
    let mut harmonic = Vec::with_capacity(spec.phonemes);
    let mut aperiodic = Vec::with_capacity(spec.phonemes);
    for (id, &v) in voiced.iter().enumerate() {
        let silence = id == 0;
        let (offset, scale) = match (silence, v) {
            (true, _) => (-40.0, 2.0),
            (false, true) => (0.0, 10.0),
            (false, false) => (-15.0, 8.0),
        };
        let tilt = |j: usize| -0.3 * j as f64;
        let curve = lowpass_curve(rng, spec.harmonic_dim, spec.template_cutoff, scale);
        harmonic.push(
            curve
                .iter()
                .enumerate()
                .map(|(j, c)| (offset + tilt(j) + c) as f32)
                .collect(),
        );
        let ap: Vec<f32> = (0..spec.aperiodic_dim)
            .map(|b| {
                let band = b as f64 / spec.aperiodic_dim.max(2).saturating_sub(1) as f64;
                let base = match (silence, v) {
                    (true, _) => -1.0,
                    (false, true) => -20.0 + 15.0 * band,
                    (false, false) => -3.0 + band,
                };
                let spread = if v { 3.0 } else { 1.0 };
                (base + spread * normal(rng)) as f32
            })
            .collect();
        aperiodic.push(ap);
    }
    GeneratorTruth {
        harmonic,
        aperiodic,
        voiced: voiced.to_vec(),
    }
}

struct Segment {
    phoneme: usize,
    len: usize,
}

fn render_utterance(spec: &SynthSpec, truth: &GeneratorTruth, rng: &mut ChaCha8Rng) -> Result<Utterance> {
    let n_inner = rng.gen_range(spec.phonemes_per_utterance.0..=spec.phonemes_per_utterance.1);
    let mut ids = vec![0usize];
    for _ in 0..n_inner {
        let prev = *ids.last().unwrap();
        let mut id = rng.gen_range(1..spec.phonemes);
        while id == prev {
            id = rng.gen_range(1..spec.phonemes);
        }
        ids.push(id);
    }
    ids.push(0);

    let mut segments = Vec::with_capacity(ids.len());
    for &phoneme in &ids {
        let len = rng.gen_range(spec.duration_frames.0..=spec.duration_frames.1);
        segments.push(Segment { phoneme, len });
    }
    let total: usize = segments.iter().map(|s| s.len).sum();

    let hd = spec.harmonic_dim;
    let ad = spec.aperiodic_dim;
    let mut harmonic = Vec::with_capacity(total * hd);
    let mut aperiodic = Vec::with_capacity(total * ad);
    let mut vuv = Vec::with_capacity(total);

    let innov = (1.0 - spec.noise_ar * spec.noise_ar).sqrt();
    let mut h_noise = vec![0.0f64; hd];
    let mut a_noise = vec![0.0f64; ad];
    let ap_noise_std = spec.noise_std / 3.0;
    let half = spec.crossfade_frames as f64;

    for (si, seg) in segments.iter().enumerate() {
        for k in 0..seg.len {
            // Blend towards the neighbour across the nearest boundary.
            let to_start = k as f64 + 0.5;
            let to_end = (seg.len - k) as f64 - 0.5;
            let (other, dist) = if to_start <= to_end {
                (si.checked_sub(1).map(|i| segments[i].phoneme), to_start)
            } else {
                (segments.get(si + 1).map(|s| s.phoneme), to_end)
            };
            let w_other = match other {
                Some(_) if half > 0.0 => (0.5 - dist / (2.0 * half)).max(0.0),
                _ => 0.0,
            };
            let other = other.unwrap_or(seg.phoneme);

            for (j, n) in h_noise.iter_mut().enumerate() {
                *n = spec.noise_ar * *n + innov * spec.noise_std * normal(rng);
                let own = f64::from(truth.harmonic[seg.phoneme][j]);
                let oth = f64::from(truth.harmonic[other][j]);
                harmonic.push(((1.0 - w_other) * own + w_other * oth + *n) as f32);
            }
            for (j, n) in a_noise.iter_mut().enumerate() {
                *n = spec.noise_ar * *n + innov * ap_noise_std * normal(rng);
                let own = f64::from(truth.aperiodic[seg.phoneme][j]);
                let oth = f64::from(truth.aperiodic[other][j]);
                aperiodic.push(((1.0 - w_other) * own + w_other * oth + *n) as f32);
            }
            vuv.push(if truth.voiced[seg.phoneme] { 1.0 } else { 0.0 });
        }
    }

    let spans: Vec<(usize, usize)> = segments.iter().map(|s| (s.phoneme, s.len)).collect();
    let (control, labels) = control_from_segments(&spans, 0, spec.phonemes)?;
    Ok(Utterance {
        hop_seconds: HOP_SECONDS,
        streams: vec![
            Stream::new(StreamKind::Harmonic.name(), hd, harmonic)?,
            Stream::new(StreamKind::Aperiodic.name(), ad, aperiodic)?,
            Stream::new(StreamKind::Vuv.name(), 1, vuv)?,
        ],
        control,
        labels,
    })
}

/// Number of validation utterances for a corpus of `n`.
pub(crate) fn validation_count(n: usize, fraction: f64) -> usize {
    if n < 2 || fraction <= 0.0 {
        return 0;
    }
    ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
}

pub fn gen_synthetic_corpus(spec: &SynthSpec, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (symbols, voiced) = phoneme_inventory(spec.phonemes);
    let alphabet = Alphabet::new(symbols)?;
    let truth = make_truth(spec, &voiced, &mut rng);
    let utterances = (0..spec.utterances)
        .map(|_| render_utterance(spec, &truth, &mut rng))
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<usize> = (0..spec.utterances).collect();
    order.shuffle(&mut rng);
    let mut split = vec![Split::Train; spec.utterances];
    for &i in &order[..validation_count(spec.utterances, spec.validation_fraction)] {
        split[i] = Split::Validation;
    }

    Ok(Corpus {
        alphabet,
        utterances,
        split,
        truth: Some(truth),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            utterances: 12,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_synthetic_corpus(&small(), 1).unwrap();
        let b = gen_synthetic_corpus(&small(), 1).unwrap();
        assert_eq!(a, b);
        let c = gen_synthetic_corpus(&small(), 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_degenerate_specs() {
        for spec in [
            SynthSpec { utterances: 0, ..small() },
            SynthSpec { phonemes: 0, ..small() },
            SynthSpec { phonemes: 3, ..small() },
            SynthSpec { duration_frames: (4, 40), ..small() },
        ] {
            assert!(matches!(gen_synthetic_corpus(&spec, 0), Err(Error::Config(_))));
        }
    }

    #[test]
    fn noiseless_frames_settle_on_template() {
        let spec = SynthSpec {
            noise_std: 0.0,
            ..small()
        };
        let corpus = gen_synthetic_corpus(&spec, 3).unwrap();
        let truth = corpus.truth.as_ref().unwrap();
        let mut checked = 0;
        for u in &corpus.utterances {
            let h = u.stream_of(StreamKind::Harmonic).unwrap();
            for t in 0..u.len() {
                let l = u.labels[t];
                let inside = t >= 3 && t + 3 < u.len() && u.labels[t - 3] == l && u.labels[t + 3] == l;
                if inside {
                    assert_eq!(h.frame(t), truth.harmonic[l as usize].as_slice());
                    checked += 1;
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn structure_and_split() {
        let corpus = gen_synthetic_corpus(&SynthSpec::default(), 7).unwrap();
        assert_eq!(corpus.utterances.len(), 50);
        assert_eq!(corpus.validation().count(), 5);
        assert_eq!(corpus.train().count(), 45);
        let truth = corpus.truth.as_ref().unwrap();
        for u in &corpus.utterances {
            u.validate().unwrap();
            assert_eq!(u.labels.first(), Some(&0));
            assert_eq!(u.labels.last(), Some(&0));
            assert_eq!(u.control.dim, 33);
            let v = u.stream_of(StreamKind::Vuv).unwrap();
            for (t, &l) in u.labels.iter().enumerate() {
                let expect = if truth.voiced[l as usize] { 1.0 } else { 0.0 };
                assert_eq!(v.frame(t), &[expect]);
            }
        }
    }

    #[test]
    fn validation_count_is_about_ten_percent() {
        assert_eq!(validation_count(50, 0.1), 5);
        assert_eq!(validation_count(12, 0.1), 1);
        assert_eq!(validation_count(1, 0.1), 0);
        assert_eq!(validation_count(123, 0.1), 12);
    }
}
