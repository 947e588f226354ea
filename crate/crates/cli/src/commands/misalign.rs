use std::path::{Path, PathBuf};

use serde::Serialize;

use scorealign::io::{read_model_json, read_notes_any, write_notes_any};
use scorealign::misalign::{
    cluster_chord_onsets, draw_cluster_threshold, inject_missing_extra, remove_indices,
    sample_misaligned, Region,
};

use crate::error::{output_error, CliError};

pub struct MisalignArgs {
    pub score: PathBuf,
    pub model: PathBuf,
    pub seed: u64,
    pub cluster: bool,
    pub missing_extra: bool,
    pub out: PathBuf,
    pub labels: Option<PathBuf>,
}

/// What was done to the score, indexed by input note position.
#[derive(Debug, Serialize)]
pub struct Labels {
    pub seed: u64,
    pub notes: usize,
    pub cluster_threshold: Option<f64>,
    /// Notes the performance lacks; still present in the output.
    pub missing: Vec<usize>,
    /// Notes only the performance has; removed from the output.
    pub extra: Vec<usize>,
    pub regions: Vec<Region>,
    pub p_missing: Option<f64>,
    /// Input index of each output note, in output order.
    pub kept: Vec<usize>,
}

// Each stage gets its own stream derived from the one seed.
const CLUSTER_STREAM: u64 = 1;
const REGION_STREAM: u64 = 2;

pub fn labels_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("misaligned");
    out.with_file_name(format!("{stem}.labels.json"))
}

pub fn run(args: &MisalignArgs) -> Result<(), CliError> {
    let score = read_notes_any(&args.score)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.score.display())))?;
    let model = read_model_json(&args.model)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.model.display())))?;

    let mut notes = sample_misaligned(&score, &model, args.seed);
    let mut threshold = None;
    if args.cluster {
        let seed = args.seed.wrapping_add(CLUSTER_STREAM);
        let t = draw_cluster_threshold(seed);
        notes = cluster_chord_onsets(&notes, Some(t), seed)?;
        threshold = Some(t);
    }
    let mut labels = Labels {
        seed: args.seed,
        notes: score.len(),
        cluster_threshold: threshold,
        missing: Vec::new(),
        extra: Vec::new(),
        regions: Vec::new(),
        p_missing: None,
        kept: (0..score.len()).collect(),
    };
    if args.missing_extra {
        let me = inject_missing_extra(&notes, args.seed.wrapping_add(REGION_STREAM))?;
        notes = remove_indices(&notes, &me.extra);
        labels.kept.retain(|i| me.extra.binary_search(i).is_err());
        labels.missing = me.missing;
        labels.extra = me.extra;
        labels.regions = me.regions;
        labels.p_missing = Some(me.p_missing);
    }

    write_notes_any(&notes, &args.out).map_err(|e| output_error(&args.out, e))?;
    let path = args.labels.clone().unwrap_or_else(|| labels_path(&args.out));
    let json = serde_json::to_string_pretty(&labels).expect("labels serialize");
    std::fs::write(&path, json + "\n").map_err(|e| output_error(&path, e))?;
    Ok(())
}
