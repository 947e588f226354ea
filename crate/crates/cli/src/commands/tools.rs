//! Helpers for building fixtures: render notes to audio and simulate a
//! transcriber.

use std::path::PathBuf;

use scorealign::audiofeat::{synthesize, write_wav};
use scorealign::eval::{oracle_transcribe, NoiseSpec};
use scorealign::io::{read_notes_any, write_notes_any};

use crate::error::{output_error, CliError};

pub struct SynthArgs {
    pub notes: PathBuf,
    pub sample_rate: u32,
    pub out: PathBuf,
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    if args.sample_rate == 0 {
        return Err(CliError::Usage("sample rate must be positive".into()));
    }
    let notes = read_notes_any(&args.notes)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.notes.display())))?;
    let audio = synthesize(&notes, args.sample_rate);
    write_wav(&audio, &args.out).map_err(|e| output_error(&args.out, e))
}

pub struct TranscribeArgs {
    pub truth: PathBuf,
    pub noise: NoiseSpec,
    pub out: PathBuf,
}

pub fn transcribe(args: &TranscribeArgs) -> Result<(), CliError> {
    let truth = read_notes_any(&args.truth)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.truth.display())))?;
    let notes = oracle_transcribe(&truth, &args.noise)?;
    write_notes_any(&notes, &args.out).map_err(|e| output_error(&args.out, e))
}
