//! Evaluation: matched-ratio threshold curves, their macro average, the L1
//! macro error, and a noisy oracle transcriber for closed-loop runs.
//!
//! Predicted and reference notes are compared index by index; pipelines
//! keep the identity order of the score, so no re-matching happens here.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Note, MIN_NOTE_DURATION};

pub const DEFAULT_THRESHOLDS: [f64; 7] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("predicted has {predicted} notes but the reference has {truth}")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("curves use different threshold grids")]
    GridMismatch,
    #[error("nothing to average")]
    EmptyList,
    #[error("thresholds must be non-empty, finite, non-negative and strictly increasing")]
    BadThresholds,
    #[error("invalid noise specification: {0}")]
    BadNoise(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeField {
    Onsets,
    Offsets,
}

impl TimeField {
    pub fn of(self, note: &Note) -> f64 {
        match self {
            TimeField::Onsets => note.onset,
            TimeField::Offsets => note.offset,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TimeField::Onsets => "onsets",
            TimeField::Offsets => "offsets",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub thresholds: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl ThresholdCurve {
    /// Ratio at `threshold`, if it is on the grid.
    pub fn at(&self, threshold: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&t| t == threshold)
            .map(|k| self.ratios[k])
    }
}

fn check_grid(thresholds: &[f64]) -> Result<(), EvalError> {
    let ok = !thresholds.is_empty()
        && thresholds.iter().all(|t| t.is_finite() && *t >= 0.0)
        && thresholds.windows(2).all(|w| w[1] > w[0]);
    if ok {
        Ok(())
    } else {
        Err(EvalError::BadThresholds)
    }
}

fn check_lengths(predicted: &[Note], truth: &[Note]) -> Result<(), EvalError> {
    if predicted.len() == truth.len() {
        Ok(())
    } else {
        Err(EvalError::LengthMismatch { predicted: predicted.len(), truth: truth.len() })
    }
}

/// Fraction of notes whose `which` time is within each threshold of the
/// reference. An empty piece scores 1 everywhere.
pub fn threshold_curve(
    predicted: &[Note],
    truth: &[Note],
    which: TimeField,
    thresholds: &[f64],
) -> Result<ThresholdCurve, EvalError> {
    check_lengths(predicted, truth)?;
    check_grid(thresholds)?;
    let errors: Vec<f64> = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (which.of(p) - which.of(t)).abs())
        .collect();
    let n = errors.len();
    let ratios = thresholds
        .iter()
        .map(|&th| {
            if n == 0 {
                1.0
            } else {
                errors.iter().filter(|&&e| e <= th).count() as f64 / n as f64
            }
        })
        .collect();
    Ok(ThresholdCurve { thresholds: thresholds.to_vec(), ratios })
}

/// Pointwise mean of curves sharing one grid.
pub fn macro_average(curves: &[ThresholdCurve]) -> Result<ThresholdCurve, EvalError> {
    let first = curves.first().ok_or(EvalError::EmptyList)?;
    if curves.iter().any(|c| c.thresholds != first.thresholds) {
        return Err(EvalError::GridMismatch);
    }
    let n = curves.len() as f64;
    // offsets from the first curve keep the mean of identical curves exact
    let ratios = (0..first.thresholds.len())
        .map(|k| {
            let base = first.ratios[k];
            base + curves.iter().map(|c| c.ratios[k] - base).sum::<f64>() / n
        })
        .collect();
    Ok(ThresholdCurve { thresholds: first.thresholds.clone(), ratios })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Stats {
    pub mean: f64,
    pub std: f64,
    pub pieces: usize,
}

/// Per piece the mean absolute error, then mean and population standard
/// deviation across pieces. Pieces without notes are ignored.
pub fn l1_macro_error(pairs: &[(&[Note], &[Note])], which: TimeField) -> Result<L1Stats, EvalError> {
    let mut per_piece = Vec::with_capacity(pairs.len());
    for (predicted, truth) in pairs {
        check_lengths(predicted, truth)?;
        if truth.is_empty() {
            continue;
        }
        let total: f64 = predicted
            .iter()
            .zip(truth.iter())
            .map(|(p, t)| (which.of(p) - which.of(t)).abs())
            .sum();
        per_piece.push(total / truth.len() as f64);
    }
    if per_piece.is_empty() {
        return Err(EvalError::EmptyList);
    }
    let n = per_piece.len() as f64;
    let mean = per_piece.iter().sum::<f64>() / n;
    let var = per_piece.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(L1Stats { mean, std: var.sqrt(), pieces: per_piece.len() })
}

/// Error model of a simulated transcriber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub onset_jitter_std: f64,
    pub pitch_error_rate: f64,
    pub deletion_rate: f64,
    pub insertion_rate: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            onset_jitter_std: 0.0,
            pitch_error_rate: 0.0,
            deletion_rate: 0.0,
            insertion_rate: 0.0,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn check(&self) -> Result<(), EvalError> {
        if !(self.onset_jitter_std >= 0.0) || !self.onset_jitter_std.is_finite() {
            return Err(EvalError::BadNoise("onset_jitter_std must be finite and non-negative"));
        }
        for rate in [self.pitch_error_rate, self.deletion_rate, self.insertion_rate] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(EvalError::BadNoise("rates must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Pitch-error candidates: octaves and fifths that stay in range.
fn pitch_errors(pitch: u8) -> Vec<u8> {
    [-12i16, -7, 7, 12]
        .iter()
        .map(|d| i16::from(pitch) + d)
        .filter(|p| (0..=127).contains(p))
        .map(|p| p as u8)
        .collect()
}

/// Simulated transcription of `truth`. Surviving notes keep their relative
/// order; inserted notes follow them. Offsets get twice the onset jitter.
pub fn oracle_transcribe(truth: &[Note], noise: &NoiseSpec) -> Result<Vec<Note>, EvalError> {
    noise.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let sigma = noise.onset_jitter_std;
    let on_jitter = Normal::new(0.0, sigma).expect("checked std");
    let off_jitter = Normal::new(0.0, 2.0 * sigma).expect("checked std");
    let mut out = Vec::with_capacity(truth.len());
    for note in truth {
        if noise.deletion_rate > 0.0 && rng.random_bool(noise.deletion_rate) {
            continue;
        }
        let mut n = *note;
        if sigma > 0.0 {
            n.onset = (n.onset + on_jitter.sample(&mut rng)).max(0.0);
            n.offset += off_jitter.sample(&mut rng);
            if n.offset <= n.onset {
                n.offset = n.onset + MIN_NOTE_DURATION;
            }
        }
        if noise.pitch_error_rate > 0.0 && rng.random_bool(noise.pitch_error_rate) {
            let options = pitch_errors(n.pitch);
            if !options.is_empty() {
                n.pitch = options[rng.random_range(0..options.len())];
            }
        }
        out.push(n);
    }
    let inserts = (noise.insertion_rate * truth.len() as f64).round() as usize;
    if inserts > 0 {
        let lo = truth.iter().map(|n| n.onset).fold(f64::INFINITY, f64::min);
        let hi = truth.iter().map(|n| n.offset).fold(0.0, f64::max);
        let p_lo = truth.iter().map(|n| n.pitch).min().unwrap_or(0);
        let p_hi = truth.iter().map(|n| n.pitch).max().unwrap_or(127);
        for _ in 0..inserts {
            let model = truth[rng.random_range(0..truth.len())];
            let onset = if hi > lo { rng.random_range(lo..hi) } else { lo };
            out.push(Note {
                pitch: rng.random_range(p_lo..=p_hi),
                onset,
                offset: onset + model.duration(),
                velocity: model.velocity,
            });
        }
    }
    Ok(out)
}

pub fn curve_to_csv(curve: &ThresholdCurve) -> String {
    let mut s = String::from("threshold_sec,ratio\n");
    for (t, r) in curve.thresholds.iter().zip(&curve.ratios) {
        s.push_str(&format!("{t},{r}\n"));
    }
    s
}

pub fn write_curve_csv(curve: &ThresholdCurve, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, curve_to_csv(curve))
}
