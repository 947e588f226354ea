//! The three alignment pipelines.
//!
//! * SEBA: stretch the score to the recording, synthesize it, and align the
//!   two audio signals with DTW on chroma plus onset features.
//! * TAFE: DTW between the three-valued piano roll of the stretched score and
//!   that of a transcription of the recording.
//! * EIFE: match score notes to transcribed notes; matched notes take the
//!   transcribed onsets, the rest are interpolated through the matched
//!   onsets and then refined with one SEBA pass.
//!
//! Every pipeline returns the score notes in their input order with only the
//! times changed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audiofeat::{
    matrix_from_features, seba_features, synthesize_with, AudioBuffer, AudioError, FeatureConfig,
    SebaFeatures, SynthConfig,
};
use crate::budget::{Budget, BudgetExceeded};
use crate::dtw::{
    dtw_on_matrix_with_budget, fastdtw_with_budget, path_to_time_map, DistanceFunction, DtwError,
    DEFAULT_RADIUS,
};
use crate::matcher::{
    match_notes_with_budget, matching_to_time_map, rescue_unmatched, MatchConfig, MatchError,
};
use crate::model::{
    canonical_order, check_notes, validate_sequence, ModelError, Note, NoteMatching, TimeMap,
    MIN_NOTE_DURATION,
};
use crate::pianoroll::{roll_columns, roll_from_notes, RollError, DEFAULT_FRAME_PERIOD};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("the score has no notes")]
    EmptyScore,
    #[error("target duration must be positive and finite, got {0}")]
    BadDuration(f64),
    #[error(transparent)]
    Budget(BudgetExceeded),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dtw(DtwError),
    #[error(transparent)]
    Audio(AudioError),
    #[error(transparent)]
    Roll(#[from] RollError),
}

impl From<BudgetExceeded> for AlignError {
    fn from(e: BudgetExceeded) -> Self {
        AlignError::Budget(e)
    }
}

impl From<DtwError> for AlignError {
    fn from(e: DtwError) -> Self {
        match e {
            DtwError::Budget(b) => AlignError::Budget(b),
            other => AlignError::Dtw(other),
        }
    }
}

impl From<AudioError> for AlignError {
    fn from(e: AudioError) -> Self {
        match e {
            AudioError::Budget(b) => AlignError::Budget(b),
            other => AlignError::Audio(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Seba,
    Tafe,
    Eife,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Seba => "seba",
            Method::Tafe => "tafe",
            Method::Eife => "eife",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "seba" => Ok(Method::Seba),
            "tafe" => Ok(Method::Tafe),
            "eife" => Ok(Method::Eife),
            _ => Err(format!("unknown method {s:?} (expected seba, tafe or eife)")),
        }
    }
}

/// Where EIFE takes the offsets of matched notes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetPolicy {
    /// Interpolate through the matched-onset time map.
    #[default]
    Interp,
    /// Copy the transcribed offset.
    Amt,
}

impl FromStr for OffsetPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "interp" => Ok(OffsetPolicy::Interp),
            "amt" => Ok(OffsetPolicy::Amt),
            _ => Err(format!("unknown offsets policy {s:?} (expected amt or interp)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignConfig {
    pub frame_period: f64,
    /// Frame distance for TAFE.
    pub dist: DistanceFunction,
    pub radius: usize,
    pub offsets: OffsetPolicy,
    pub matcher: MatchConfig,
    pub features: FeatureConfig,
    pub synth: SynthConfig,
    /// EIFE pairs leftover same-pitch notes whose interpolated onsets fall
    /// this close (seconds); `None` disables the repair.
    pub rescue_window: Option<f64>,
    /// SEBA uses exact DTW on a precomputed matrix up to this many cells and
    /// FastDTW above it.
    pub exact_dtw_cells: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            frame_period: DEFAULT_FRAME_PERIOD,
            dist: DistanceFunction::Cosine,
            radius: DEFAULT_RADIUS,
            offsets: OffsetPolicy::Interp,
            matcher: MatchConfig::default(),
            features: FeatureConfig::default(),
            synth: SynthConfig::default(),
            rescue_window: Some(0.1),
            exact_dtw_cells: 4_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: Method,
    pub notes: usize,
    pub matched: usize,
    pub missing: usize,
    pub extra: usize,
    /// Transcription indices (input order) left unmatched, EIFE only.
    pub extra_indices: Vec<usize>,
    pub elapsed_sec: f64,
    /// Largest single allocation announced to the budget.
    pub peak_memory_bytes: u64,
    /// Set when EIFE fell back to plain SEBA.
    pub fallback: Option<String>,
}

impl Diagnostics {
    fn new(method: Method, notes: usize) -> Self {
        Diagnostics {
            method,
            notes,
            matched: 0,
            missing: 0,
            extra: 0,
            extra_indices: Vec::new(),
            elapsed_sec: 0.0,
            peak_memory_bytes: 0,
            fallback: None,
        }
    }

    fn finish(mut self, budget: &Budget) -> Self {
        self.elapsed_sec = budget.elapsed().as_secs_f64();
        self.peak_memory_bytes = budget.peak_reserved();
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    /// Score notes in input order with performance-domain times.
    pub realigned_score: Vec<Note>,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

/// Translates the score to start at 0 and scales it so that its last offset
/// lands on `target_duration`.
pub fn stretch_to_duration(score: &[Note], target_duration: f64) -> Result<Vec<Note>, AlignError> {
    if score.is_empty() {
        return Err(AlignError::EmptyScore);
    }
    if !(target_duration > 0.0) || !target_duration.is_finite() {
        return Err(AlignError::BadDuration(target_duration));
    }
    check_notes(score)?;
    let start = score.iter().map(|n| n.onset).fold(f64::INFINITY, f64::min);
    let end = score.iter().map(|n| n.offset).fold(f64::NEG_INFINITY, f64::max);
    let factor = target_duration / (end - start);
    Ok(score
        .iter()
        .map(|n| {
            let mut out = *n;
            out.onset = (n.onset - start) * factor;
            out.offset = if n.offset == end { target_duration } else { (n.offset - start) * factor };
            if out.offset <= out.onset {
                out.offset = out.onset + MIN_NOTE_DURATION;
            }
            out
        })
        .collect())
}

fn fix_offset(mut n: Note) -> Note {
    n.onset = n.onset.max(0.0);
    if !(n.offset > n.onset) {
        n.offset = n.onset + MIN_NOTE_DURATION;
    }
    n
}

fn remap(notes: &[Note], map: &TimeMap) -> Result<Vec<Note>, AlignError> {
    notes
        .iter()
        .map(|n| {
            let mut out = *n;
            out.onset = map.lookup(n.onset)?;
            out.offset = map.lookup(n.offset)?;
            Ok(fix_offset(out))
        })
        .collect()
}

/// Time map from the (already performance-scaled) score to the recording,
/// computed on synthesized-score versus recording features.
fn seba_time_map(
    score: &[Note],
    audio: &AudioBuffer,
    cfg: &AlignConfig,
    budget: &Budget,
) -> Result<TimeMap, AlignError> {
    let synth = synthesize_with(score, audio.sample_rate, &cfg.synth);
    budget.check_time()?;
    let a = seba_features(&synth, cfg.frame_period, &cfg.features)?;
    budget.check_time()?;
    let b = seba_features(audio, cfg.frame_period, &cfg.features)?;
    budget.check_time()?;
    if a.frames.is_empty() || b.frames.is_empty() {
        return Err(DtwError::EmptySequence.into());
    }
    let cells = a.frames.len().saturating_mul(b.frames.len());
    let result = if cells <= cfg.exact_dtw_cells {
        let matrix = matrix_from_features(&a, &b, budget)?;
        dtw_on_matrix_with_budget(&matrix, budget)?
    } else {
        fastdtw_with_budget(&a.frames, &b.frames, &SebaFeatures::metric(), cfg.radius, budget)?
    };
    let map = path_to_time_map(&result.path, a.frame_period, b.frame_period);
    if map.len() < 2 {
        return Err(ModelError::TooFewAnchors.into());
    }
    Ok(map)
}

pub fn align_seba(
    score: &[Note],
    audio: &AudioBuffer,
    cfg: &AlignConfig,
    budget: &Budget,
) -> Result<AlignmentResult, AlignError> {
    let stretched = stretch_to_duration(score, audio.duration())?;
    let map = seba_time_map(&stretched, audio, cfg, budget)?;
    Ok(AlignmentResult {
        realigned_score: remap(&stretched, &map)?,
        method: Method::Seba,
        diagnostics: Diagnostics::new(Method::Seba, score.len()).finish(budget),
    })
}

/// Piano-roll DTW; the transcription only shapes the warping path, its note
/// times are never copied.
pub fn align_tafe(
    score: &[Note],
    transcription: &[Note],
    audio_duration: f64,
    cfg: &AlignConfig,
    budget: &Budget,
) -> Result<AlignmentResult, AlignError> {
    let stretched = stretch_to_duration(score, audio_duration)?;
    check_notes(transcription)?;
    let roll_s = roll_from_notes(&stretched, cfg.frame_period, None)?;
    let roll_t = roll_from_notes(transcription, cfg.frame_period, None)?;
    budget.reserve(((roll_s.n_frames() + roll_t.n_frames()) * roll_s.n_pitches() * 8) as u64)?;
    let (cols_s, cols_t) = (roll_columns(&roll_s), roll_columns(&roll_t));
    budget.check_time()?;
    let result = fastdtw_with_budget(&cols_s, &cols_t, &cfg.dist, cfg.radius, budget)?;
    let map = path_to_time_map(&result.path, cfg.frame_period, cfg.frame_period);
    if map.len() < 2 {
        return Err(ModelError::TooFewAnchors.into());
    }
    Ok(AlignmentResult {
        realigned_score: remap(&stretched, &map)?,
        method: Method::Tafe,
        diagnostics: Diagnostics::new(Method::Tafe, score.len()).finish(budget),
    })
}

/// Matching of `score` against `transcription`, both in input order.
fn match_in_input_order(
    score: &[Note],
    transcription: &[Note],
    cfg: &MatchConfig,
    budget: &Budget,
) -> Result<NoteMatching, AlignError> {
    let s_order = canonical_order(score);
    let t_order = canonical_order(transcription);
    let s_seq = validate_sequence(s_order.iter().map(|&i| score[i]).collect())?;
    let t_seq = validate_sequence(t_order.iter().map(|&i| transcription[i]).collect())?;
    let m = match_notes_with_budget(&s_seq, &t_seq, cfg, budget)?;
    let mut out = NoteMatching {
        matched: m.matched.iter().map(|&(a, b)| (s_order[a], t_order[b])).collect(),
        missing: m.missing.iter().map(|&a| s_order[a]).collect(),
        extra: m.extra.iter().map(|&b| t_order[b]).collect(),
    };
    out.matched.sort_unstable();
    out.missing.sort_unstable();
    out.extra.sort_unstable();
    Ok(out)
}

pub fn align_eife(
    score: &[Note],
    transcription: &[Note],
    audio: &AudioBuffer,
    cfg: &AlignConfig,
    budget: &Budget,
) -> Result<AlignmentResult, AlignError> {
    let stretched = stretch_to_duration(score, audio.duration())?;
    check_notes(transcription)?;
    let mut matching = match_in_input_order(&stretched, transcription, &cfg.matcher, budget)?;
    budget.check_time()?;

    let mut onset_map = matching_to_time_map(&matching, &stretched, transcription);
    if let (Ok(map), Some(window)) = (&onset_map, cfg.rescue_window) {
        let predict = |t: f64| map.lookup(t).unwrap_or(t);
        if rescue_unmatched(&mut matching, &stretched, transcription, predict, window) > 0 {
            onset_map = matching_to_time_map(&matching, &stretched, transcription);
        }
    }

    let mut diag = Diagnostics::new(Method::Eife, score.len());
    diag.matched = matching.matched.len();
    diag.missing = matching.missing.len();
    diag.extra = matching.extra.len();
    diag.extra_indices = matching.extra.clone();

    let onset_map = match onset_map {
        Ok(map) => map,
        Err(MatchError::TooFewMatches(found)) => {
            let seba = align_seba(score, audio, cfg, budget)?;
            diag.fallback = Some(format!("{found} matched notes; fell back to SEBA"));
            return Ok(AlignmentResult {
                realigned_score: seba.realigned_score,
                method: Method::Eife,
                diagnostics: diag.finish(budget),
            });
        }
        Err(MatchError::Budget(b)) => return Err(b.into()),
        Err(MatchError::Model(e)) => return Err(e.into()),
    };

    let mut out = remap(&stretched, &onset_map)?;
    for &(s, t) in &matching.matched {
        let partner = &transcription[t];
        out[s].onset = partner.onset;
        if cfg.offsets == OffsetPolicy::Amt {
            out[s].offset = partner.offset;
        }
        out[s] = fix_offset(out[s]);
    }
    if !matching.missing.is_empty() {
        // one SEBA pass over the whole interpolated score, read only at the
        // unmatched notes
        let seba_map = seba_time_map(&out, audio, cfg, budget)?;
        for &s in &matching.missing {
            let mut n = out[s];
            n.onset = seba_map.lookup(n.onset)?;
            n.offset = seba_map.lookup(n.offset)?;
            out[s] = fix_offset(n);
        }
    }
    Ok(AlignmentResult { realigned_score: out, method: Method::Eife, diagnostics: diag.finish(budget) })
}
