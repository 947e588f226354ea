//! Three-valued piano rolls: 0 = off, 1 = sustain, 2 = onset.

use thiserror::Error;

use crate::model::{Note, NoteSequence};

pub const PITCH_COUNT: usize = 128;
pub const DEFAULT_FRAME_PERIOD: f64 = 0.02;

pub const OFF: u8 = 0;
pub const SUSTAIN: u8 = 1;
pub const ONSET: u8 = 2;

// frame boundaries that land within this many frames of an integer are
// snapped to it, so 0.5 / 0.02 counts as 25 frames
const FRAME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RollError {
    #[error("frame period must be positive and finite, got {0}")]
    InvalidFramePeriod(f64),
    #[error("total duration {total} is shorter than the last offset {last_offset}")]
    DurationTooShort { total: f64, last_offset: f64 },
}

/// Pitch × frame matrix, stored row-major by pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct PianoRoll {
    values: Vec<u8>,
    n_frames: usize,
    frame_period: f64,
}

impl PianoRoll {
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_pitches(&self) -> usize {
        PITCH_COUNT
    }

    pub fn frame_period(&self) -> f64 {
        self.frame_period
    }

    pub fn get(&self, pitch: usize, frame: usize) -> u8 {
        self.values[pitch * self.n_frames + frame]
    }

    pub fn row(&self, pitch: usize) -> &[u8] {
        &self.values[pitch * self.n_frames..(pitch + 1) * self.n_frames]
    }

    pub fn count(&self, value: u8) -> usize {
        self.values.iter().filter(|&&v| v == value).count()
    }
}

pub(crate) fn frame_floor(t: f64, period: f64) -> usize {
    (t / period + FRAME_EPS).floor().max(0.0) as usize
}

pub(crate) fn frame_ceil(t: f64, period: f64) -> usize {
    (t / period - FRAME_EPS).ceil().max(0.0) as usize
}

/// Renders `seq` as a 128-row roll. With `total_duration == None` the roll
/// ends at the last offset (zero columns for an empty sequence).
pub fn notes_to_roll(
    seq: &NoteSequence,
    frame_period: f64,
    total_duration: Option<f64>,
) -> Result<PianoRoll, RollError> {
    roll_from_notes(seq.notes(), frame_period, total_duration)
}

pub(crate) fn roll_from_notes(
    notes: &[Note],
    frame_period: f64,
    total_duration: Option<f64>,
) -> Result<PianoRoll, RollError> {
    if !(frame_period > 0.0) || !frame_period.is_finite() {
        return Err(RollError::InvalidFramePeriod(frame_period));
    }
    let last_offset = notes.iter().map(|n| n.offset).fold(0.0, f64::max);
    let total = match total_duration {
        Some(t) if t + FRAME_EPS * frame_period < last_offset => {
            return Err(RollError::DurationTooShort {
                total: t,
                last_offset,
            })
        }
        Some(t) => t,
        None => last_offset,
    };
    let n_frames = frame_ceil(total, frame_period);
    let mut values = vec![OFF; PITCH_COUNT * n_frames];
    for note in notes {
        let row = &mut values[note.pitch as usize * n_frames..(note.pitch as usize + 1) * n_frames];
        let start = frame_floor(note.onset, frame_period);
        if start >= n_frames {
            continue;
        }
        let end = frame_ceil(note.offset, frame_period).clamp(start + 1, n_frames);
        row[start] = ONSET;
        for v in &mut row[start + 1..end] {
            *v = (*v).max(SUSTAIN);
        }
    }
    Ok(PianoRoll {
        values,
        n_frames,
        frame_period,
    })
}

/// Column `n` as a real vector indexed by pitch.
pub fn roll_columns(roll: &PianoRoll) -> Vec<Vec<f64>> {
    (0..roll.n_frames)
        .map(|f| {
            (0..PITCH_COUNT)
                .map(|p| f64::from(roll.get(p, f)))
                .collect()
        })
        .collect()
}
