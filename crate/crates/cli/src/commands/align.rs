use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use scorealign::align::{align_eife, align_seba, align_tafe, AlignmentResult, Diagnostics, Method};
use scorealign::audiofeat::{read_wav, AudioBuffer, DEFAULT_SAMPLE_RATE};
use scorealign::io::{read_notes_any, write_midi, write_notes_csv};
use scorealign::model::span;
use scorealign::Note;

use crate::config::RunConfig;
use crate::error::{output_error, CliError};
use crate::pieces::{self, AUDIO_EXTENSIONS, NOTE_EXTENSIONS};

pub struct AlignArgs {
    pub score: PathBuf,
    pub audio: Option<PathBuf>,
    pub transcription: Option<PathBuf>,
    pub out: PathBuf,
    pub midi: bool,
}

fn require_inputs(method: Method, audio: bool, transcription: bool) -> Result<(), CliError> {
    let missing = match method {
        Method::Seba if !audio => "seba needs --audio",
        Method::Tafe if !transcription => "tafe needs --transcription",
        Method::Eife if !(audio && transcription) => "eife needs both --audio and --transcription",
        _ => return Ok(()),
    };
    Err(CliError::Usage(missing.into()))
}

fn load_audio(path: &Path) -> Result<AudioBuffer, CliError> {
    read_wav(path, DEFAULT_SAMPLE_RATE)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_notes(path: &Path) -> Result<Vec<Note>, CliError> {
    read_notes_any(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Runs one piece under a fresh budget.
pub fn align_piece(
    cfg: &RunConfig,
    score: &Path,
    audio: Option<&Path>,
    transcription: Option<&Path>,
) -> Result<AlignmentResult, CliError> {
    require_inputs(cfg.method, audio.is_some(), transcription.is_some())?;
    let budget = cfg.budget();
    let acfg = cfg.align_config();
    let score = load_notes(score)?;
    let transcription = transcription.map(load_notes).transpose()?;
    budget.check_time()?;
    let result = match cfg.method {
        Method::Seba => align_seba(&score, &load_audio(audio.unwrap())?, &acfg, &budget)?,
        Method::Eife => align_eife(
            &score,
            transcription.as_deref().unwrap(),
            &load_audio(audio.unwrap())?,
            &acfg,
            &budget,
        )?,
        Method::Tafe => {
            let trans = transcription.as_deref().unwrap();
            let duration = match audio {
                Some(p) => load_audio(p)?.duration(),
                None => span(trans).map(|(_, end)| end).unwrap_or(0.0),
            };
            align_tafe(&score, trans, duration, &acfg, &budget)?
        }
    };
    Ok(result)
}

fn write_outputs(result: &AlignmentResult, out: &Path, midi: bool) -> Result<(), CliError> {
    write_notes_csv(&result.realigned_score, out).map_err(|e| output_error(out, e))?;
    if midi {
        let mid = out.with_extension("mid");
        write_midi(&result.realigned_score, &mid).map_err(|e| output_error(&mid, e))?;
    }
    Ok(())
}

pub fn run(cfg: &RunConfig, args: &AlignArgs) -> Result<(), CliError> {
    require_inputs(cfg.method, args.audio.is_some(), args.transcription.is_some())?;
    if args.score.is_dir() {
        return run_batch(cfg, args);
    }
    let result = align_piece(cfg, &args.score, args.audio.as_deref(), args.transcription.as_deref())?;
    write_outputs(&result, &args.out, args.midi)?;
    let json = serde_json::to_string_pretty(&result.diagnostics).expect("diagnostics serialize");
    println!("{json}");
    Ok(())
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Serialize)]
pub struct PieceReport {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct BatchSummary {
    pub method: Method,
    pub config: RunConfig,
    pub ok: usize,
    pub skipped: usize,
    pub failed: usize,
    pub pieces: Vec<PieceReport>,
}

fn companion(dir: Option<&Path>, name: &str, exts: &[&str]) -> Result<Option<PathBuf>, CliError> {
    let Some(dir) = dir else { return Ok(None) };
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", dir.display())));
    }
    Ok(exts.iter().map(|e| dir.join(format!("{name}.{e}"))).find(|p| p.is_file()))
}

fn run_batch(cfg: &RunConfig, args: &AlignArgs) -> Result<(), CliError> {
    let scores = pieces::list(&args.score, &NOTE_EXTENSIONS)?;
    pieces::ensure_dir(&args.out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;

    let work: Vec<(String, PathBuf)> = scores.into_iter().collect();
    let reports: Vec<PieceReport> = pool.install(|| {
        work.par_iter()
            .map(|(name, score)| {
                let outcome = (|| {
                    let audio = companion(args.audio.as_deref(), name, &AUDIO_EXTENSIONS)?;
                    let trans = companion(args.transcription.as_deref(), name, &NOTE_EXTENSIONS)?;
                    require_inputs(cfg.method, audio.is_some(), trans.is_some())
                        .map_err(|_| CliError::Usage(format!("missing companion input for {name}")))?;
                    let result = align_piece(cfg, score, audio.as_deref(), trans.as_deref())?;
                    write_outputs(&result, &args.out.join(format!("{name}.csv")), args.midi)?;
                    Ok(result.diagnostics)
                })();
                let report = match outcome {
                    Ok(d) => PieceReport { name: name.clone(), status: Status::Ok, diagnostics: Some(d), error: None },
                    Err(e) => PieceReport {
                        name: name.clone(),
                        status: if matches!(e, CliError::Budget(_)) { Status::Skipped } else { Status::Failed },
                        diagnostics: None,
                        error: Some(format!("{}: {}", e.kind(), e.message())),
                    },
                };
                eprintln!("{}: {:?}", report.name, report.status);
                report
            })
            .collect()
    });

    let count = |s: fn(&Status) -> bool| reports.iter().filter(|r| s(&r.status)).count();
    let summary = BatchSummary {
        method: cfg.method,
        config: cfg.clone(),
        ok: count(|s| matches!(s, Status::Ok)),
        skipped: count(|s| matches!(s, Status::Skipped)),
        failed: count(|s| matches!(s, Status::Failed)),
        pieces: reports,
    };
    let path = args.out.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&path, json + "\n").map_err(|e| output_error(&path, e))?;

    if summary.failed > 0 {
        Err(CliError::Usage(format!("{} of {} pieces failed", summary.failed, summary.pieces.len())))
    } else if summary.skipped > 0 {
        Err(CliError::Budget(format!("{} of {} pieces skipped over budget", summary.skipped, summary.pieces.len())))
    } else {
        Ok(())
    }
}
