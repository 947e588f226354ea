//! Seeded synthetic material for experiments: piano-style pieces with
//! chords and repeated notes, and "humanized" performances of them with
//! Gaussian timing deviations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::{Note, MIN_NOTE_DURATION};

const SCALE: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];

/// A piece of exactly `n_notes` notes: a melody over 1 to 3 note chords,
/// inter-onset intervals from {0.125, 0.25, 0.375, 0.5} s, mostly legato.
pub fn piano_piece(n_notes: usize, seed: u64) -> Vec<Note> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut notes = Vec::with_capacity(n_notes);
    let mut t = 0.0;
    let mut degree: i32 = 14;
    while notes.len() < n_notes {
        let ioi = [0.125, 0.25, 0.25, 0.375, 0.5][rng.random_range(0..5)];
        degree = (degree + rng.random_range(-3..=3)).clamp(7, 24);
        let size = match rng.random_range(0..10) {
            0..=5 => 1,
            6..=8 => 2,
            _ => 3,
        }
        .min(n_notes - notes.len());
        let mut used = Vec::with_capacity(size);
        for k in 0..size {
            let d = degree - 2 * k as i32 - if k > 0 { 3 } else { 0 };
            let pitch = 36 + 12 * (d.div_euclid(7)) as u8 + SCALE[d.rem_euclid(7) as usize];
            if used.contains(&pitch) {
                continue;
            }
            used.push(pitch);
            let len = ioi * rng.random_range(0.6..1.6);
            notes.push(Note::new(pitch, t, t + len).with_velocity(rng.random_range(50..100)));
        }
        t += ioi;
    }
    notes.truncate(n_notes);
    notes
}

/// Gaussian performance deviations, applied per piece and per note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Humanize {
    /// Piece-level mean onset shift, seconds.
    pub shift_mean: f64,
    /// Per-note onset deviation around the piece shift, seconds.
    pub onset_std: f64,
    /// Per-note duration ratio standard deviation around 1.
    pub duration_std: f64,
    /// Global tempo factor drawn uniformly from [1 - t, 1 + t].
    pub tempo_range: f64,
}

impl Default for Humanize {
    fn default() -> Self {
        Humanize { shift_mean: 0.05, onset_std: 0.02, duration_std: 0.1, tempo_range: 0.0 }
    }
}

/// Performance of `score` in identity order.
pub fn humanize(score: &[Note], h: &Humanize, seed: u64) -> Vec<Note> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tempo = if h.tempo_range > 0.0 { rng.random_range(1.0 - h.tempo_range..=1.0 + h.tempo_range) } else { 1.0 };
    let onset = Normal::new(h.shift_mean, h.onset_std).expect("finite std");
    let ratio = Normal::new(1.0, h.duration_std).expect("finite std");
    score
        .iter()
        .map(|n| {
            let on = (n.onset * tempo + onset.sample(&mut rng)).max(0.0);
            let dur = n.duration() * tempo * ratio.sample(&mut rng).max(0.1);
            let mut out = *n;
            out.onset = on;
            out.offset = on + dur.max(MIN_NOTE_DURATION);
            out
        })
        .collect()
}
