//! `singsynth`: corpus synthesis, training, generation, benchmarking and
//! evaluation driven by a flat `key=value` config.

mod config;
mod script;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use singsynth_core::checkpoint::Checkpoint;
use singsynth_core::evalkit::eval_model;
use singsynth_core::features::{
    gen_synthetic_corpus, read_alphabet, read_corpus, read_features, write_corpus, write_features, ControlTrack,
    StreamKind,
};
use singsynth_core::generation::{
    bench_generation, bench_report, generate_multistream_with, DecoderKind, StreamBench,
};
use singsynth_core::netcore::init_params;
use singsynth_core::training::{resume_stream, train_stream, train_stream_for, TrainHistory};
use singsynth_core::{seeds, Error, Result};

use config::RunConfig;

pub const EFFECTIVE_CONFIG: &str = "effective_config.txt";

#[derive(Parser)]
#[command(name = "singsynth", version, about = "Autoregressive frame-level singing synthesizer")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Config file of `key=value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory of the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Config override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Renders the synthetic corpus.
    SynthData,
    /// Trains stream networks and writes checkpoints plus loss histories.
    Train {
        /// Train only this stream (harmonic, vuv or aperiodic); repeatable.
        #[arg(long)]
        stream: Vec<String>,
        /// Continue from the checkpoints in the output directory.
        #[arg(long, conflicts_with = "stop_after")]
        resume: bool,
        /// Stop after this many epochs, leaving a resumable checkpoint.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Generates features from an utterance file or a phoneme script.
    Generate {
        /// `.npsf` utterance (its control track is used) or phoneme script.
        #[arg(long)]
        input: PathBuf,
    },
    /// Times the naive and cached decoders on the configured architectures.
    Bench,
    /// Teacher-forced evaluation on the validation split.
    Eval,
}

fn parse_overrides(set: &[String]) -> Result<Vec<(String, String)>> {
    set.iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("override '{s}' is not KEY=VALUE")))
        })
        .collect()
}

fn load_config(global: &GlobalArgs, command: &Command) -> Result<RunConfig> {
    let text = match &global.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut overrides = parse_overrides(&global.set)?;
    if let Some(seed) = global.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(out) = &global.out {
        let key = match command {
            Command::SynthData => "paths.corpus",
            Command::Train { .. } => "paths.model",
            _ => "paths.out",
        };
        overrides.push((key.into(), out.to_string_lossy().into_owned()));
    }
    RunConfig::from_text(&text, &overrides)
}

fn prepare_dir(dir: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(EFFECTIVE_CONFIG), cfg.to_text())?;
    Ok(())
}

fn synth_data(cfg: &RunConfig) -> Result<()> {
    let corpus = gen_synthetic_corpus(&cfg.synth, cfg.seed)?;
    prepare_dir(&cfg.corpus_dir, cfg)?;
    write_corpus(&corpus, &cfg.corpus_dir)?;
    println!(
        "wrote {} utterances ({} validation) to {}",
        corpus.utterances.len(),
        corpus.validation().count(),
        cfg.corpus_dir.display()
    );
    Ok(())
}

fn checkpoint_path(dir: &Path, kind: StreamKind) -> PathBuf {
    dir.join(format!("{}.npsw", kind.name()))
}

fn history_text(h: &TrainHistory) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "initial_val_nll={}", h.initial_val_nll);
    match h.best_epoch {
        Some(b) => {
            let _ = writeln!(out, "best_epoch={}", b + 1);
        }
        None => out.push_str("best_epoch=none\n"),
    }
    out.push_str("# epoch train_nll val_nll seconds\n");
    for (i, e) in h.epochs.iter().enumerate() {
        let _ = writeln!(out, "{} {} {} {:.3}", i + 1, e.train_nll, e.val_nll, e.seconds);
    }
    out
}

fn train(cfg: &RunConfig, streams: &[String], resume: bool, stop_after: Option<usize>) -> Result<()> {
    let kinds = if streams.is_empty() {
        StreamKind::ALL.to_vec()
    } else {
        streams.iter().map(|s| StreamKind::from_name(s)).collect::<Result<Vec<_>>>()?
    };
    let corpus = read_corpus(&cfg.corpus_dir)?;
    prepare_dir(&cfg.model_dir, cfg)?;
    for kind in kinds {
        let path = checkpoint_path(&cfg.model_dir, kind);
        let outcome = if resume {
            resume_stream(&corpus, &Checkpoint::load(&path)?, &cfg.train)?
        } else if let Some(limit) = stop_after {
            train_stream_for(&corpus, kind, &cfg.train, limit)?
        } else {
            train_stream(&corpus, kind, &cfg.train)?
        };
        outcome.checkpoint.save(&path)?;
        fs::write(cfg.model_dir.join(format!("{}_history.txt", kind.name())), history_text(&outcome.history))?;
        let h = &outcome.history;
        println!(
            "{}: {} epochs, best validation NLL {} (initial {:.4})",
            kind.name(),
            h.epochs.len(),
            h.best_val_nll().map_or("n/a".to_string(), |v| format!("{v:.4}")),
            h.initial_val_nll
        );
    }
    Ok(())
}

fn load_checkpoints(dir: &Path) -> Result<Vec<Checkpoint>> {
    StreamKind::ALL
        .iter()
        .map(|&k| {
            let path = checkpoint_path(dir, k);
            if !path.exists() {
                return Err(Error::Config(format!("missing checkpoint {}", path.display())));
            }
            Checkpoint::load(path)
        })
        .collect()
}

fn read_control(cfg: &RunConfig, input: &Path) -> Result<ControlTrack> {
    if input.extension().is_some_and(|e| e == "npsf") {
        return Ok(read_features(input)?.control);
    }
    let text =
        fs::read_to_string(input).map_err(|e| Error::Config(format!("cannot read {}: {e}", input.display())))?;
    script::script_control(&text, &read_alphabet(&cfg.corpus_dir)?)
}

fn generate(cfg: &RunConfig, input: &Path) -> Result<()> {
    let checkpoints = load_checkpoints(&cfg.model_dir)?;
    let control = read_control(cfg, input)?;
    let utt = generate_multistream_with(cfg.generate.decoder, &checkpoints, &control, cfg.generate.tau, cfg.seed)?;
    prepare_dir(&cfg.out_dir, cfg)?;
    let path = cfg.out_dir.join("generated.npsf");
    write_features(&utt, &path)?;
    println!("wrote {} frames to {}", utt.len(), path.display());
    Ok(())
}

fn bench(cfg: &RunConfig) -> Result<()> {
    let s = &cfg.synth;
    let dims = [s.harmonic_dim, StreamKind::Vuv.default_dim(), s.aperiodic_dim];
    let b = &cfg.bench;
    let mut results = Vec::new();
    for kind in StreamKind::ALL {
        let net = cfg.train.arch(kind).net_config(kind, dims, s.phonemes);
        net.validate()?;
        let params = init_params::<f32>(&net, seeds::derive(cfg.seed, &[kind.index() as u64]));
        let run = |mode| bench_generation(&params, &net, kind, b.frames, mode, b.repeats, b.tau, cfg.seed);
        let naive = if b.naive { Some(run(DecoderKind::Naive)?) } else { None };
        results.push(StreamBench {
            stream: kind,
            param_count: net.param_count(),
            naive,
            cached: run(DecoderKind::Cached)?,
        });
    }
    let report = bench_report(&results);
    prepare_dir(&cfg.out_dir, cfg)?;
    fs::write(cfg.out_dir.join("bench.txt"), &report)?;
    print!("{report}");
    Ok(())
}

fn eval(cfg: &RunConfig) -> Result<()> {
    let corpus = read_corpus(&cfg.corpus_dir)?;
    let checkpoints = load_checkpoints(&cfg.model_dir)?;
    let name = cfg
        .model_dir
        .file_name()
        .map_or("model".to_string(), |n| n.to_string_lossy().into_owned());
    let report = eval_model(&corpus, &checkpoints, &name)?;
    let text = report.to_text();
    prepare_dir(&cfg.out_dir, cfg)?;
    fs::write(cfg.out_dir.join("eval.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(&cli.global, &cli.command)?;
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot set up {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::SynthData => synth_data(&cfg),
        Command::Train {
            stream,
            resume,
            stop_after,
        } => train(&cfg, stream, *resume, *stop_after),
        Command::Generate { input } => generate(&cfg, input),
        Command::Bench => bench(&cfg),
        Command::Eval => eval(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("singsynth: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
