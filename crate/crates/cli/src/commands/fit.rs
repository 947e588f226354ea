use std::path::PathBuf;

use scorealign::io::{read_notes_any, write_model_json};
use scorealign::matcher::{match_notes, MatchConfig};
use scorealign::misalign::{fit_model, TrainingPiece};
use scorealign::model::{canonical_order, validate_sequence};
use scorealign::{Note, NoteMatching};

use crate::error::{output_error, CliError};
use crate::pieces::{self, NOTE_EXTENSIONS};

pub struct FitArgs {
    pub scores: PathBuf,
    pub perfs: PathBuf,
    pub bins: usize,
    pub out: PathBuf,
}

/// Score/performance files of equal length are taken to correspond note
/// by note; otherwise the notes are matched first.
fn correspondence(score: &[Note], perf: &[Note]) -> Result<NoteMatching, CliError> {
    if score.len() == perf.len() {
        return Ok(NoteMatching { matched: (0..score.len()).map(|i| (i, i)).collect(), ..NoteMatching::default() });
    }
    // the matcher indexes sorted sequences; map back to file order
    let s = validate_sequence(score.to_vec()).map_err(|e| CliError::Usage(e.to_string()))?;
    let p = validate_sequence(perf.to_vec()).map_err(|e| CliError::Usage(e.to_string()))?;
    let so = canonical_order(score);
    let po = canonical_order(perf);
    let m = match_notes(&s, &p, &MatchConfig::default());
    let mut out = NoteMatching {
        matched: m.matched.iter().map(|&(a, b)| (so[a], po[b])).collect(),
        missing: m.missing.iter().map(|&a| so[a]).collect(),
        extra: m.extra.iter().map(|&b| po[b]).collect(),
    };
    out.matched.sort_unstable();
    out.missing.sort_unstable();
    out.extra.sort_unstable();
    Ok(out)
}

pub fn run(args: &FitArgs) -> Result<(), CliError> {
    let scores = pieces::list(&args.scores, &NOTE_EXTENSIONS)?;
    let perfs = pieces::list(&args.perfs, &NOTE_EXTENSIONS)?;
    let mut data = Vec::new();
    for (name, score_path) in &scores {
        let Some(perf_path) = perfs.get(name) else {
            eprintln!("{name}: no performance, ignored");
            continue;
        };
        let read = |p: &std::path::Path| {
            read_notes_any(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
        };
        let (score, perf) = (read(score_path)?, read(perf_path)?);
        let matching = correspondence(&score, &perf)?;
        data.push((score, perf, matching));
    }
    let training: Vec<TrainingPiece> = data
        .iter()
        .map(|(score, perf, matching)| TrainingPiece { score, perf, matching })
        .collect();
    let model = fit_model(&training, args.bins)?;
    write_model_json(&model, &args.out).map_err(|e| output_error(&args.out, e))?;
    eprintln!("fitted on {} pieces", training.len());
    Ok(())
}
