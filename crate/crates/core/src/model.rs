//! Shared domain types: notes, sorted note sequences, warping paths, note
//! matchings and continuous time maps.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Shortest duration a note may be given when a transformation would
/// otherwise collapse it.
pub const MIN_NOTE_DURATION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("note {0} has a non-positive duration")]
    NonPositiveDuration(usize),
    #[error("note {0} has a pitch outside [0, 127]")]
    PitchOutOfRange(usize),
    #[error("note {0} has a non-finite or negative time")]
    InvalidTime(usize),
    #[error("note {0} has a velocity outside [0, 127]")]
    VelocityOutOfRange(usize),
    #[error("a time map needs at least two anchors for interpolation")]
    TooFewAnchors,
    #[error("time map anchor {0} breaks monotonicity")]
    NonMonotoneAnchors(usize),
}

/// A pitched event with onset and offset in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Note {
    pub pitch: u8,
    pub onset: f64,
    pub offset: f64,
    pub velocity: Option<u8>,
}

impl Note {
    pub fn new(pitch: u8, onset: f64, offset: f64) -> Self {
        Note {
            pitch,
            onset,
            offset,
            velocity: None,
        }
    }

    pub fn with_velocity(mut self, velocity: u8) -> Self {
        self.velocity = Some(velocity);
        self
    }

    pub fn duration(&self) -> f64 {
        self.offset - self.onset
    }

    /// Checks the note invariants, reporting failures against `index`.
    pub fn check(&self, index: usize) -> Result<(), ModelError> {
        if self.pitch > 127 {
            return Err(ModelError::PitchOutOfRange(index));
        }
        if matches!(self.velocity, Some(v) if v > 127) {
            return Err(ModelError::VelocityOutOfRange(index));
        }
        if !self.onset.is_finite() || !self.offset.is_finite() || self.onset < 0.0 {
            return Err(ModelError::InvalidTime(index));
        }
        if self.offset <= self.onset {
            return Err(ModelError::NonPositiveDuration(index));
        }
        Ok(())
    }

    /// Canonical ordering key: onset, then pitch, then offset.
    pub fn canonical_cmp(&self, other: &Note) -> Ordering {
        self.onset
            .total_cmp(&other.onset)
            .then(self.pitch.cmp(&other.pitch))
            .then(self.offset.total_cmp(&other.offset))
    }
}

/// Validates every note in `notes` without reordering them.
pub fn check_notes(notes: &[Note]) -> Result<(), ModelError> {
    notes.iter().enumerate().try_for_each(|(i, n)| n.check(i))
}

/// Indices of `notes` in canonical (onset, pitch, offset) order. The sort is
/// stable, so fully equal notes keep their input order.
pub fn canonical_order(notes: &[Note]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..notes.len()).collect();
    order.sort_by(|&a, &b| notes[a].canonical_cmp(&notes[b]));
    order
}

/// A validated note list sorted by (onset, pitch, offset).
///
/// Chords are allowed. Code that needs to keep a caller's note identity order
/// (alignment output, evaluation) works on plain `&[Note]` slices instead.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NoteSequence {
    notes: Vec<Note>,
}

impl NoteSequence {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn notes(&self) -> &[Note] {
        &self.notes
    }

    pub fn into_notes(self) -> Vec<Note> {
        self.notes
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Note> {
        self.notes.iter()
    }

    /// Earliest onset and latest offset, or `None` when empty.
    pub fn span(&self) -> Option<(f64, f64)> {
        span(&self.notes)
    }
}

impl std::ops::Index<usize> for NoteSequence {
    type Output = Note;

    fn index(&self, index: usize) -> &Note {
        &self.notes[index]
    }
}

impl<'a> IntoIterator for &'a NoteSequence {
    type Item = &'a Note;
    type IntoIter = std::slice::Iter<'a, Note>;

    fn into_iter(self) -> Self::IntoIter {
        self.notes.iter()
    }
}

/// Validates `notes` and returns them in canonical order.
///
/// Error indices refer to positions in the input list.
pub fn validate_sequence(notes: Vec<Note>) -> Result<NoteSequence, ModelError> {
    check_notes(&notes)?;
    let mut notes = notes;
    notes.sort_by(Note::canonical_cmp);
    Ok(NoteSequence { notes })
}

/// Earliest onset and latest offset of a note list.
pub fn span(notes: &[Note]) -> Option<(f64, f64)> {
    let first = notes.first()?;
    Some(notes.iter().fold((first.onset, first.offset), |(lo, hi), n| {
        (lo.min(n.onset), hi.max(n.offset))
    }))
}

/// Monotone list of index correspondences produced by DTW.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WarpingPath {
    pub pairs: Vec<(usize, usize)>,
}

impl WarpingPath {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// True if the path starts at (0,0), ends at (n-1,m-1) and only moves by
    /// (1,0), (0,1) or (1,1).
    pub fn is_valid_for(&self, n: usize, m: usize) -> bool {
        if n == 0 || m == 0 {
            return false;
        }
        match (self.pairs.first(), self.pairs.last()) {
            (Some(&(0, 0)), Some(&last)) if last == (n - 1, m - 1) => {}
            _ => return false,
        }
        self.pairs.windows(2).all(|w| {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
        })
    }
}

/// Partition of two note sequences into matched pairs, missing score notes
/// and extra performance notes.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NoteMatching {
    /// (score index, performance index), sorted by score index.
    pub matched: Vec<(usize, usize)>,
    pub missing: Vec<usize>,
    pub extra: Vec<usize>,
}

impl NoteMatching {
    /// Checks the partition property against sequence lengths.
    pub fn is_partition_of(&self, score_len: usize, perf_len: usize) -> bool {
        let mut seen_s = vec![false; score_len];
        let mut seen_p = vec![false; perf_len];
        let mark = |seen: &mut Vec<bool>, i: usize| -> bool {
            match seen.get_mut(i) {
                Some(s) if !*s => {
                    *s = true;
                    true
                }
                _ => false,
            }
        };
        for &(s, p) in &self.matched {
            if !mark(&mut seen_s, s) || !mark(&mut seen_p, p) {
                return false;
            }
        }
        for &s in &self.missing {
            if !mark(&mut seen_s, s) {
                return false;
            }
        }
        for &p in &self.extra {
            if !mark(&mut seen_p, p) {
                return false;
            }
        }
        seen_s.into_iter().all(|b| b) && seen_p.into_iter().all(|b| b)
    }
}

/// Piecewise-linear map between two time axes.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMap {
    anchors: Vec<(f64, f64)>,
}

impl TimeMap {
    /// Anchors must be strictly increasing in the first coordinate and
    /// non-decreasing in the second.
    pub fn new(anchors: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        for (i, w) in anchors.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 {
                return Err(ModelError::NonMonotoneAnchors(i + 1));
            }
        }
        if let Some(i) = anchors
            .iter()
            .position(|a| !a.0.is_finite() || !a.1.is_finite())
        {
            return Err(ModelError::NonMonotoneAnchors(i));
        }
        Ok(TimeMap { anchors })
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// See [`time_map_lookup`].
    pub fn lookup(&self, t: f64) -> Result<f64, ModelError> {
        time_map_lookup(self, t)
    }
}

/// Interpolates `t` through `map`. Outside the anchor range the first or last
/// segment is extended with its own slope.
pub fn time_map_lookup(map: &TimeMap, t: f64) -> Result<f64, ModelError> {
    let a = &map.anchors;
    if a.len() < 2 {
        return Err(ModelError::TooFewAnchors);
    }
    // index of the segment [k, k+1] used for t
    let k = match a.binary_search_by(|p| p.0.total_cmp(&t)) {
        Ok(i) => return Ok(a[i].1),
        Err(0) => 0,
        Err(i) if i >= a.len() => a.len() - 2,
        Err(i) => i - 1,
    };
    let (x0, y0) = a[k];
    let (x1, y1) = a[k + 1];
    let slope = (y1 - y0) / (x1 - x0);
    Ok(y0 + (t - x0) * slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_sequence_is_valid() {
        assert!(validate_sequence(vec![]).unwrap().is_empty());
    }

    #[test]
    fn sequence_is_resorted() {
        let seq = validate_sequence(vec![Note::new(60, 0.5, 1.0), Note::new(60, 0.0, 0.4)]).unwrap();
        assert_eq!(seq[0].onset, 0.0);
        assert_eq!(seq[1].onset, 0.5);
    }

    #[test]
    fn zero_duration_rejected() {
        assert_eq!(
            validate_sequence(vec![Note::new(60, 1.0, 1.0)]),
            Err(ModelError::NonPositiveDuration(0))
        );
    }

    #[test]
    fn pitch_out_of_range_rejected() {
        assert_eq!(
            validate_sequence(vec![Note::new(60, 0.0, 1.0), Note::new(128, 0.0, 1.0)]),
            Err(ModelError::PitchOutOfRange(1))
        );
    }

    #[test]
    fn lookup_examples() {
        let m = TimeMap::new(vec![(0.0, 0.0), (10.0, 20.0)]).unwrap();
        assert_eq!(m.lookup(5.0).unwrap(), 10.0);
        assert_eq!(m.lookup(0.0).unwrap(), 0.0);
        let m = TimeMap::new(vec![(0.0, 0.0), (2.0, 2.0), (4.0, 8.0)]).unwrap();
        assert_eq!(m.lookup(3.0).unwrap(), 5.0);
        // extrapolation keeps edge slopes
        assert_eq!(m.lookup(-1.0).unwrap(), -1.0);
        assert_eq!(m.lookup(5.0).unwrap(), 11.0);
    }

    #[test]
    fn lookup_needs_two_anchors() {
        let m = TimeMap::new(vec![(1.0, 1.0)]).unwrap();
        assert_eq!(m.lookup(1.0), Err(ModelError::TooFewAnchors));
    }

    #[test]
    fn non_monotone_anchors_rejected() {
        assert!(TimeMap::new(vec![(0.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(TimeMap::new(vec![(0.0, 1.0), (1.0, 0.5)]).is_err());
    }

    #[test]
    fn path_validity() {
        let p = WarpingPath {
            pairs: vec![(0, 0), (1, 1), (1, 2)],
        };
        assert!(p.is_valid_for(2, 3));
        assert!(!p.is_valid_for(3, 3));
        let p = WarpingPath {
            pairs: vec![(0, 0), (2, 2)],
        };
        assert!(!p.is_valid_for(3, 3));
    }

    fn arb_note() -> impl Strategy<Value = Note> {
        (0u8..128, 0.0f64..100.0, 0.001f64..5.0)
            .prop_map(|(p, on, d)| Note::new(p, on, on + d))
    }

    fn arb_map() -> impl Strategy<Value = TimeMap> {
        prop::collection::vec((0.01f64..5.0, 0.0f64..5.0), 2..12).prop_map(|steps| {
            let mut a = Vec::new();
            let (mut x, mut y) = (0.0, 0.0);
            for (dx, dy) in steps {
                a.push((x, y));
                x += dx;
                y += dy;
            }
            TimeMap::new(a).unwrap()
        })
    }

    proptest! {
        #[test]
        fn validate_is_idempotent(notes in prop::collection::vec(arb_note(), 0..40)) {
            let once = validate_sequence(notes).unwrap();
            let twice = validate_sequence(once.notes().to_vec()).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn lookup_exact_at_anchors(map in arb_map()) {
            for &(a, b) in map.anchors() {
                prop_assert_eq!(map.lookup(a).unwrap(), b);
            }
        }

        #[test]
        fn lookup_is_monotone(map in arb_map(), mut ts in prop::collection::vec(-5.0f64..60.0, 2..30)) {
            ts.sort_by(f64::total_cmp);
            let ys: Vec<f64> = ts.iter().map(|&t| map.lookup(t).unwrap()).collect();
            for w in ys.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9);
            }
        }
    }
}
