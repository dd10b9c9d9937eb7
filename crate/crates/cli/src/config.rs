//! Run configuration: flat `key=value` text with section prefixes.

use std::path::PathBuf;

use singsynth_core::features::{StreamKind, SynthSpec};
use singsynth_core::generation::{default_temperature, DecoderKind};
use singsynth_core::kv;
use singsynth_core::training::TrainConfig;
use singsynth_core::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSettings {
    /// Indexed like `StreamKind::ALL`.
    pub tau: [f64; 3],
    pub decoder: DecoderKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub frames: usize,
    pub repeats: usize,
    pub tau: f64,
    pub naive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus_dir: PathBuf,
    pub model_dir: PathBuf,
    pub out_dir: PathBuf,
    pub synth: SynthSpec,
    pub train: TrainConfig,
    pub generate: GenerateSettings,
    pub bench: BenchSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            corpus_dir: PathBuf::from("corpus"),
            model_dir: PathBuf::from("model"),
            out_dir: PathBuf::from("out"),
            synth: SynthSpec::default(),
            train: TrainConfig::default(),
            generate: GenerateSettings {
                tau: StreamKind::ALL.map(default_temperature),
                decoder: DecoderKind::Cached,
            },
            bench: BenchSettings {
                frames: 1000,
                repeats: 5,
                tau: 1.0,
                naive: true,
            },
        }
    }
}

fn pair(key: &str, value: &str) -> Result<(usize, usize)> {
    match kv::parse_list(key, value)?[..] {
        [a, b] => Ok((a, b)),
        _ => Err(Error::Config(format!("{key} expects two values 'min,max'"))),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid value '{value}' for {key}"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if key == "train.seed" {
            return Err(Error::Config("use 'seed' rather than 'train.seed'".into()));
        }
        if self.train.set(key, value)? {
            return Ok(());
        }
        let s = &mut self.synth;
        match key {
            "seed" => {
                self.seed = kv::parse_value(key, value)?;
                self.train.seed = self.seed;
            }
            "paths.corpus" => self.corpus_dir = value.into(),
            "paths.model" => self.model_dir = value.into(),
            "paths.out" => self.out_dir = value.into(),
            "synth.phonemes" => s.phonemes = kv::parse_value(key, value)?,
            "synth.utterances" => s.utterances = kv::parse_value(key, value)?,
            "synth.phonemes_per_utterance" => s.phonemes_per_utterance = pair(key, value)?,
            "synth.duration_frames" => s.duration_frames = pair(key, value)?,
            "synth.noise_std" => s.noise_std = kv::parse_value(key, value)?,
            "synth.noise_ar" => s.noise_ar = kv::parse_value(key, value)?,
            "synth.crossfade_frames" => s.crossfade_frames = kv::parse_value(key, value)?,
            "synth.template_cutoff" => s.template_cutoff = kv::parse_value(key, value)?,
            "synth.harmonic_dim" => s.harmonic_dim = kv::parse_value(key, value)?,
            "synth.aperiodic_dim" => s.aperiodic_dim = kv::parse_value(key, value)?,
            "synth.validation_fraction" => s.validation_fraction = kv::parse_value(key, value)?,
            "generate.decoder" => {
                self.generate.decoder = match value {
                    "naive" => DecoderKind::Naive,
                    "cached" => DecoderKind::Cached,
                    _ => return Err(Error::Config(format!("unknown decoder '{value}'"))),
                }
            }
            "bench.frames" => self.bench.frames = kv::parse_value(key, value)?,
            "bench.repeats" => self.bench.repeats = kv::parse_value(key, value)?,
            "bench.tau" => self.bench.tau = kv::parse_value(key, value)?,
            "bench.naive" => self.bench.naive = parse_bool(key, value)?,
            _ => {
                let stream = key
                    .strip_prefix("generate.tau.")
                    .ok_or_else(|| Error::Config(format!("unknown key '{key}'")))?;
                let kind = StreamKind::from_name(stream)?;
                self.generate.tau[kind.index()] = kv::parse_value(key, value)?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        for (kind, tau) in StreamKind::ALL.iter().zip(self.generate.tau) {
            if !(0.0..=1.0).contains(&tau) {
                return Err(Error::Config(format!("generate.tau.{} must lie in [0, 1]", kind.name())));
            }
        }
        if !(0.0..=1.0).contains(&self.bench.tau) {
            return Err(Error::Config("bench.tau must lie in [0, 1]".into()));
        }
        if self.bench.frames < 100 || self.bench.repeats == 0 {
            return Err(Error::Config("bench.frames must be >= 100 and bench.repeats positive".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> Vec<(String, String)> {
        let s = &self.synth;
        let path = |p: &PathBuf| p.to_string_lossy().into_owned();
        let mut out = vec![
            ("seed".to_string(), self.seed.to_string()),
            ("paths.corpus".into(), path(&self.corpus_dir)),
            ("paths.model".into(), path(&self.model_dir)),
            ("paths.out".into(), path(&self.out_dir)),
            ("synth.phonemes".into(), s.phonemes.to_string()),
            ("synth.utterances".into(), s.utterances.to_string()),
            (
                "synth.phonemes_per_utterance".into(),
                kv::format_list(&[s.phonemes_per_utterance.0, s.phonemes_per_utterance.1]),
            ),
            (
                "synth.duration_frames".into(),
                kv::format_list(&[s.duration_frames.0, s.duration_frames.1]),
            ),
            ("synth.noise_std".into(), s.noise_std.to_string()),
            ("synth.noise_ar".into(), s.noise_ar.to_string()),
            ("synth.crossfade_frames".into(), s.crossfade_frames.to_string()),
            ("synth.template_cutoff".into(), s.template_cutoff.to_string()),
            ("synth.harmonic_dim".into(), s.harmonic_dim.to_string()),
            ("synth.aperiodic_dim".into(), s.aperiodic_dim.to_string()),
            ("synth.validation_fraction".into(), s.validation_fraction.to_string()),
        ];
        out.extend(self.train.to_kv().into_iter().filter(|(k, _)| k != "train.seed"));
        for kind in StreamKind::ALL {
            out.push((format!("generate.tau.{}", kind.name()), self.generate.tau[kind.index()].to_string()));
        }
        out.push(("generate.decoder".into(), self.generate.decoder.name().into()));
        out.push(("bench.frames".into(), self.bench.frames.to_string()));
        out.push(("bench.repeats".into(), self.bench.repeats.to_string()));
        out.push(("bench.tau".into(), self.bench.tau.to_string()));
        out.push(("bench.naive".into(), self.bench.naive.to_string()));
        out
    }

    pub fn to_text(&self) -> String {
        kv::format(&self.to_kv())
    }

    /// Defaults overridden by `text`, then by `overrides` in order.
    pub fn from_text(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (k, v) in kv::parse(text)?.iter().chain(overrides) {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
