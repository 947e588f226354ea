//! `scorealign`: align scores to recordings, generate misaligned training
//! data, and score alignments.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid input, 3 budget
//! exceeded.

mod commands;
mod config;
mod error;
mod pieces;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scorealign::align::{Method, OffsetPolicy};
use scorealign::audiofeat::DEFAULT_SAMPLE_RATE;
use scorealign::dtw::DistanceFunction;
use scorealign::eval::{NoiseSpec, DEFAULT_THRESHOLDS};
use scorealign::misalign::DEFAULT_BINS;

use commands::{align, evaluate, fit, misalign, tools};
use config::{Overrides, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "scorealign", version, about = "Offline audio-to-score alignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align a score (or a directory of scores) to a performance.
    Align(AlignCmd),
    /// Produce a synthetic misaligned score from a fitted model.
    Misalign(MisalignCmd),
    /// Fit a misalignment model on score/performance pairs.
    FitModel(FitCmd),
    /// Threshold curves and L1 errors of predictions against ground truth.
    Evaluate(EvaluateCmd),
    /// Render notes to a WAV file with the additive synthesizer.
    Synth(SynthCmd),
    /// Simulate a transcription of a note file.
    Transcribe(TranscribeCmd),
    /// Print the effective run configuration as TOML.
    PrintConfig(PrintConfigCmd),
}

#[derive(Args)]
struct RunFlags {
    /// TOML file with run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    frame_period: Option<f64>,
    /// Frame distance for piano-roll DTW.
    #[arg(long)]
    dist: Option<DistanceFunction>,
    #[arg(long)]
    radius: Option<usize>,
    /// Offsets of matched notes: amt or interp.
    #[arg(long)]
    offsets: Option<OffsetPolicy>,
    /// Wall-clock limit per piece, seconds.
    #[arg(long)]
    budget_seconds: Option<f64>,
    /// Largest allowed single allocation per piece, bytes.
    #[arg(long)]
    budget_bytes: Option<u64>,
    /// Batch workers (0: one per logical core).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct AlignCmd {
    #[arg(long)]
    method: Option<Method>,
    /// Score file, or a directory of scores for batch mode.
    #[arg(long)]
    score: PathBuf,
    /// Recording (WAV), or a directory of recordings named like the scores.
    #[arg(long)]
    audio: Option<PathBuf>,
    /// Transcribed notes, or a directory of them named like the scores.
    #[arg(long)]
    transcription: Option<PathBuf>,
    /// Output CSV, or the output directory in batch mode.
    #[arg(long)]
    out: PathBuf,
    /// Also write a MIDI file next to each CSV.
    #[arg(long)]
    midi: bool,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct MisalignCmd {
    #[arg(long)]
    score: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Snap near-simultaneous onsets together.
    #[arg(long)]
    cluster: bool,
    /// Label random regions as missing or extra and drop the extra notes.
    #[arg(long)]
    missing_extra: bool,
    #[arg(long)]
    out: PathBuf,
    /// Labels JSON path (default: <out stem>.labels.json).
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FitCmd {
    /// Directory of scores.
    #[arg(long)]
    scores: PathBuf,
    /// Directory of performances named like the scores.
    #[arg(long)]
    perfs: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateCmd {
    /// Directory of predicted (realigned) scores.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of ground-truth scores named like the predictions.
    #[arg(long)]
    truth: PathBuf,
    /// Comma-separated thresholds in seconds.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthCmd {
    #[arg(long)]
    notes: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
    sample_rate: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TranscribeCmd {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    onset_jitter_std: f64,
    #[arg(long, default_value_t = 0.0)]
    pitch_error_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    deletion_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    insertion_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PrintConfigCmd {
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    run: RunFlags,
}

impl RunFlags {
    fn overrides(&self, method: Option<Method>, seed: Option<u64>) -> Overrides {
        Overrides {
            method,
            frame_period: self.frame_period,
            dist: self.dist,
            radius: self.radius,
            offsets: self.offsets,
            budget_seconds: self.budget_seconds,
            budget_bytes: self.budget_bytes,
            seed,
            jobs: self.jobs,
        }
    }
}

fn run_config(config: Option<&PathBuf>, o: Overrides) -> Result<RunConfig, CliError> {
    RunConfig::load(config.map(PathBuf::as_path))?.apply(&o)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Align(c) => {
            let cfg = run_config(c.run.config.as_ref(), c.run.overrides(c.method, None))?;
            align::run(
                &cfg,
                &align::AlignArgs {
                    score: c.score,
                    audio: c.audio,
                    transcription: c.transcription,
                    out: c.out,
                    midi: c.midi,
                },
            )
        }
        Command::Misalign(c) => {
            let cfg = run_config(c.config.as_ref(), Overrides { seed: c.seed, ..Overrides::default() })?;
            misalign::run(&misalign::MisalignArgs {
                score: c.score,
                model: c.model,
                seed: cfg.seed,
                cluster: c.cluster,
                missing_extra: c.missing_extra,
                out: c.out,
                labels: c.labels,
            })
        }
        Command::FitModel(c) => {
            fit::run(&fit::FitArgs { scores: c.scores, perfs: c.perfs, bins: c.bins, out: c.out })
        }
        Command::Evaluate(c) => evaluate::run(&evaluate::EvaluateArgs {
            pred: c.pred,
            truth: c.truth,
            thresholds: c.thresholds.unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec()),
            out: c.out,
        }),
        Command::Synth(c) => {
            tools::synth(&tools::SynthArgs { notes: c.notes, sample_rate: c.sample_rate, out: c.out })
        }
        Command::Transcribe(c) => tools::transcribe(&tools::TranscribeArgs {
            truth: c.truth,
            noise: NoiseSpec {
                onset_jitter_std: c.onset_jitter_std,
                pitch_error_rate: c.pitch_error_rate,
                deletion_rate: c.deletion_rate,
                insertion_rate: c.insertion_rate,
                seed: c.seed,
            },
            out: c.out,
        }),
        Command::PrintConfig(c) => {
            let cfg = run_config(c.run.config.as_ref(), c.run.overrides(c.method, c.seed))?;
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scorealign: {}: {}", e.kind(), e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
