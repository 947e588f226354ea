use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scorealign::eval::{
    l1_macro_error, macro_average, threshold_curve, write_curve_csv, L1Stats, ThresholdCurve, TimeField,
};
use scorealign::io::read_notes_any;
use scorealign::Note;

use crate::error::{output_error, CliError};
use crate::pieces::{self, NOTE_EXTENSIONS};

pub struct EvaluateArgs {
    pub pred: PathBuf,
    pub truth: PathBuf,
    pub thresholds: Vec<f64>,
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct Skipped {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Serialize)]
pub struct EvalSummary {
    pub evaluated: usize,
    pub skipped: usize,
    pub skipped_pieces: Vec<Skipped>,
    pub thresholds: Vec<f64>,
    pub macro_onsets: Option<Vec<f64>>,
    pub macro_offsets: Option<Vec<f64>>,
    pub l1_onsets: Option<L1Stats>,
    pub l1_offsets: Option<L1Stats>,
}

/// Skip reasons recorded by a batch `align` run, when its summary sits in
/// the prediction directory.
fn align_skips(pred: &Path) -> BTreeMap<String, String> {
    #[derive(Deserialize)]
    struct Piece {
        name: String,
        status: String,
        error: Option<String>,
    }
    #[derive(Deserialize)]
    struct Summary {
        pieces: Vec<Piece>,
    }
    let Ok(text) = std::fs::read_to_string(pred.join("summary.json")) else {
        return BTreeMap::new();
    };
    let Ok(summary) = serde_json::from_str::<Summary>(&text) else {
        return BTreeMap::new();
    };
    summary
        .pieces
        .into_iter()
        .filter(|p| p.status != "ok")
        .map(|p| (p.name, p.error.unwrap_or(p.status)))
        .collect()
}

fn read(path: &Path) -> Result<Vec<Note>, CliError> {
    read_notes_any(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_curve(curve: &ThresholdCurve, path: &Path) -> Result<(), CliError> {
    write_curve_csv(curve, path).map_err(|e| output_error(path, e))
}

pub fn run(args: &EvaluateArgs) -> Result<(), CliError> {
    let truths = pieces::list(&args.truth, &NOTE_EXTENSIONS)?;
    let preds = pieces::list(&args.pred, &NOTE_EXTENSIONS)?;
    let reasons = align_skips(&args.pred);
    let curve_dir = args.out.join("curves");
    pieces::ensure_dir(&curve_dir)?;

    let mut skipped = Vec::new();
    let mut pairs = Vec::new();
    for (name, truth_path) in &truths {
        match preds.get(name) {
            Some(pred_path) => pairs.push((name, read(pred_path)?, read(truth_path)?)),
            None => skipped.push(Skipped {
                name: name.clone(),
                reason: reasons.get(name).cloned().unwrap_or_else(|| "no prediction".into()),
            }),
        }
    }

    let mut macros = Vec::new();
    let mut l1 = Vec::new();
    for field in [TimeField::Onsets, TimeField::Offsets] {
        let mut curves = Vec::with_capacity(pairs.len());
        for (name, pred, truth) in &pairs {
            let curve = threshold_curve(pred, truth, field, &args.thresholds)
                .map_err(|e| CliError::Usage(format!("{name}: {e}")))?;
            write_curve(&curve, &curve_dir.join(format!("{name}.{}.csv", field.name())))?;
            curves.push(curve);
        }
        let avg = if curves.is_empty() { None } else { Some(macro_average(&curves)?) };
        if let Some(c) = &avg {
            write_curve(c, &args.out.join(format!("macro_{}.csv", field.name())))?;
        }
        macros.push(avg.map(|c| c.ratios));
        let slices: Vec<(&[Note], &[Note])> =
            pairs.iter().map(|(_, p, t)| (p.as_slice(), t.as_slice())).collect();
        l1.push(if slices.is_empty() { None } else { Some(l1_macro_error(&slices, field)?) });
    }

    let [macro_onsets, macro_offsets]: [Option<Vec<f64>>; 2] = macros.try_into().expect("two fields");
    let [l1_onsets, l1_offsets]: [Option<L1Stats>; 2] = l1.try_into().expect("two fields");
    let summary = EvalSummary {
        evaluated: pairs.len(),
        skipped: skipped.len(),
        skipped_pieces: skipped,
        thresholds: args.thresholds.clone(),
        macro_onsets,
        macro_offsets,
        l1_onsets,
        l1_offsets,
    };
    let path = args.out.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&path, format!("{json}\n")).map_err(|e| output_error(&path, e))?;
    println!("{json}");
    Ok(())
}
