//! Statistical misalignment generator: fit histograms of standardized onset
//! deviations and duration ratios from matched score/performance pairs,
//! then sample artificial scores from them. Also single-linkage chord
//! clustering and random missing/extra regions.
//!
//! All functions work on note slices in the caller's identity order, so
//! index `i` of an output always refers to note `i` of the input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Note, NoteMatching, MIN_NOTE_DURATION};

pub const DEFAULT_BINS: usize = 100;
/// Floor on sampled duration ratios, keeping every offset after its onset.
pub const DURATION_RATIO_FLOOR: f64 = 0.05;
pub const CLUSTER_THRESHOLD_RANGE: (f64, f64) = (0.03, 0.07);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MisalignError {
    #[error("histogram needs strictly increasing edges and one more edge than counts")]
    BadHistogramShape,
    #[error("histogram counts must be finite, non-negative and not all zero")]
    BadHistogramCounts,
    #[error("cannot build a histogram from no values")]
    NoValues,
    #[error("no training pieces")]
    NoPieces,
    #[error("piece {piece} has {found} matched notes, at least 2 are needed")]
    TooFewMatches { piece: usize, found: usize },
    #[error("matching of piece {0} refers to notes that do not exist")]
    BadMatching(usize),
    #[error("at least 10 notes are needed, found {0}")]
    TooFewNotes(usize),
    #[error("clustering threshold must be positive, got {0}")]
    BadThreshold(f64),
}

/// Bin edges and counts; sampling picks a bin with probability
/// proportional to its count, then a uniform value inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<f64>,
}

impl Histogram {
    pub fn new(edges: Vec<f64>, counts: Vec<f64>) -> Result<Self, MisalignError> {
        let h = Histogram { edges, counts };
        h.check()?;
        Ok(h)
    }

    pub fn check(&self) -> Result<(), MisalignError> {
        if self.counts.is_empty()
            || self.edges.len() != self.counts.len() + 1
            || self.edges.iter().any(|e| !e.is_finite())
            || self.edges.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(MisalignError::BadHistogramShape);
        }
        if self.counts.iter().any(|c| !c.is_finite() || *c < 0.0) || self.total() <= 0.0 {
            return Err(MisalignError::BadHistogramCounts);
        }
        Ok(())
    }

    /// All mass on the single value `v`; sampling returns exactly `v`.
    pub fn point(v: f64) -> Self {
        Histogram {
            edges: vec![v, v.next_up()],
            counts: vec![1.0],
        }
    }

    /// `bins` equal-width bins spanning the observed range. Constant data
    /// gives a point histogram.
    pub fn from_values(values: &[f64], bins: usize) -> Result<Self, MisalignError> {
        let bins = bins.max(1);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() || !lo.is_finite() || !hi.is_finite() {
            return Err(MisalignError::NoValues);
        }
        if lo == hi {
            let mut h = Histogram::point(lo);
            h.counts[0] = values.len() as f64;
            return Ok(h);
        }
        // a range only a few ulps wide cannot hold `bins` distinct edges
        let mut bins = bins;
        let (width, edges) = loop {
            let width = (hi - lo) / bins as f64;
            let mut edges: Vec<f64> = (0..bins).map(|k| lo + width * k as f64).collect();
            edges.push(hi);
            if bins == 1 || edges.windows(2).all(|w| w[1] > w[0]) {
                break (width, edges);
            }
            bins /= 2;
        };
        let mut counts = vec![0.0; bins];
        for &v in values {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1.0;
        }
        Histogram::new(edges, counts)
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Mean of the piecewise-uniform density.
    pub fn mean(&self) -> f64 {
        let weighted: f64 = self
            .counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(c, e)| c * 0.5 * (e[0] + e[1]))
            .sum();
        weighted / self.total()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let target = rng.random::<f64>() * self.total();
        let mut acc = 0.0;
        let mut bin = self.counts.len() - 1;
        for (k, &c) in self.counts.iter().enumerate() {
            acc += c;
            if target < acc && c > 0.0 {
                bin = k;
                break;
            }
        }
        // float round-off can leave `bin` on a trailing empty bin
        while self.counts[bin] == 0.0 {
            bin -= 1;
        }
        let (lo, hi) = (self.edges[bin], self.edges[bin + 1]);
        if hi == lo.next_up() {
            return lo;
        }
        (lo + rng.random::<f64>() * (hi - lo)).min(hi.next_down())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisalignmentModel {
    pub x_ons: Histogram,
    pub x_dur: Histogram,
    pub y_ons_m: Histogram,
    pub y_ons_std: Histogram,
    pub y_dur_m: Histogram,
    pub y_dur_std: Histogram,
}

impl MisalignmentModel {
    /// The model that leaves every note unchanged.
    pub fn identity() -> Self {
        MisalignmentModel {
            x_ons: Histogram::point(0.0),
            x_dur: Histogram::point(0.0),
            y_ons_m: Histogram::point(0.0),
            y_ons_std: Histogram::point(0.0),
            y_dur_m: Histogram::point(1.0),
            y_dur_std: Histogram::point(0.0),
        }
    }

    pub fn histograms(&self) -> [(&'static str, &Histogram); 6] {
        [
            ("x_ons", &self.x_ons),
            ("x_dur", &self.x_dur),
            ("y_ons_m", &self.y_ons_m),
            ("y_ons_std", &self.y_ons_std),
            ("y_dur_m", &self.y_dur_m),
            ("y_dur_std", &self.y_dur_std),
        ]
    }

    pub fn check(&self) -> Result<(), MisalignError> {
        self.histograms().iter().try_for_each(|(_, h)| h.check())
    }
}

/// One training piece: score and performance in identity order, plus the
/// matching between them.
#[derive(Debug, Clone, Copy)]
pub struct TrainingPiece<'a> {
    pub score: &'a [Note],
    pub perf: &'a [Note],
    pub matching: &'a NoteMatching,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn standardize(values: &[f64], mean: f64, std: f64, out: &mut Vec<f64>) {
    if std > 0.0 {
        out.extend(values.iter().map(|v| (v - mean) / std));
    } else {
        out.extend(values.iter().map(|_| 0.0));
    }
}

/// Fits the six histograms with `bins` bins each. Onset deviation is
/// performance minus score; duration ratio is performance over score.
/// Pieces with zero spread standardize to 0.
pub fn fit_model(pieces: &[TrainingPiece], bins: usize) -> Result<MisalignmentModel, MisalignError> {
    if pieces.is_empty() {
        return Err(MisalignError::NoPieces);
    }
    let (mut x_ons, mut x_dur) = (Vec::new(), Vec::new());
    let mut y = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (k, piece) in pieces.iter().enumerate() {
        let found = piece.matching.matched.len();
        if found < 2 {
            return Err(MisalignError::TooFewMatches { piece: k, found });
        }
        let mut ons = Vec::with_capacity(found);
        let mut dur = Vec::with_capacity(found);
        for &(s, p) in &piece.matching.matched {
            let (Some(sn), Some(pn)) = (piece.score.get(s), piece.perf.get(p)) else {
                return Err(MisalignError::BadMatching(k));
            };
            ons.push(pn.onset - sn.onset);
            dur.push(pn.duration() / sn.duration());
        }
        let (om, os) = mean_std(&ons);
        let (dm, ds) = mean_std(&dur);
        standardize(&ons, om, os, &mut x_ons);
        standardize(&dur, dm, ds, &mut x_dur);
        for (acc, v) in y.iter_mut().zip([om, os, dm, ds]) {
            acc.push(v);
        }
    }
    Ok(MisalignmentModel {
        x_ons: Histogram::from_values(&x_ons, bins)?,
        x_dur: Histogram::from_values(&x_dur, bins)?,
        y_ons_m: Histogram::from_values(&y[0], bins)?,
        y_ons_std: Histogram::from_values(&y[1], bins)?,
        y_dur_m: Histogram::from_values(&y[2], bins)?,
        y_dur_std: Histogram::from_values(&y[3], bins)?,
    })
}

/// Draws piece-level statistics once, then per-note standardized values,
/// and applies them to every note. Onsets that would become negative are
/// clamped to 0.
pub fn sample_misaligned(score: &[Note], model: &MisalignmentModel, seed: u64) -> Vec<Note> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m_ons = model.y_ons_m.sample(&mut rng);
    let s_ons = model.y_ons_std.sample(&mut rng);
    let m_dur = model.y_dur_m.sample(&mut rng);
    let s_dur = model.y_dur_std.sample(&mut rng);
    score
        .iter()
        .map(|note| {
            let z_ons = model.x_ons.sample(&mut rng);
            let z_dur = model.x_dur.sample(&mut rng);
            let onset = (note.onset + (z_ons * s_ons + m_ons)).max(0.0);
            let ratio = (z_dur * s_dur + m_dur).max(DURATION_RATIO_FLOOR);
            let mut out = *note;
            out.onset = onset;
            out.offset = onset + note.duration() * ratio;
            if out.offset <= out.onset {
                out.offset = out.onset + MIN_NOTE_DURATION;
            }
            out
        })
        .collect()
}

pub fn draw_cluster_threshold(seed: u64) -> f64 {
    let (lo, hi) = CLUSTER_THRESHOLD_RANGE;
    ChaCha8Rng::seed_from_u64(seed).random_range(lo..=hi)
}

/// Single-linkage clustering of onsets: sorted onsets split wherever the
/// gap reaches `threshold`. Each onset moves to its cluster mean; offsets
/// that end up at or before the new onset become onset + 0.01 s. With
/// `threshold == None` it is drawn from [0.03, 0.07] using `seed`.
pub fn cluster_chord_onsets(
    notes: &[Note],
    threshold: Option<f64>,
    seed: u64,
) -> Result<Vec<Note>, MisalignError> {
    let t = threshold.unwrap_or_else(|| draw_cluster_threshold(seed));
    if !(t > 0.0) || !t.is_finite() {
        return Err(MisalignError::BadThreshold(t));
    }
    let mut order: Vec<usize> = (0..notes.len()).collect();
    order.sort_by(|&a, &b| notes[a].onset.total_cmp(&notes[b].onset));
    let mut out = notes.to_vec();
    let mut start = 0;
    for k in 1..=order.len() {
        if k < order.len() && notes[order[k]].onset - notes[order[k - 1]].onset < t {
            continue;
        }
        let members = &order[start..k];
        let lo = notes[members[0]].onset;
        let hi = notes[members[members.len() - 1]].onset;
        // mean relative to the minimum keeps identical onsets exact
        let rel = members.iter().map(|&i| notes[i].onset - lo).sum::<f64>() / members.len() as f64;
        let centre = (lo + rel).clamp(lo, hi);
        for &i in members {
            out[i].onset = centre;
            if out[i].offset <= centre {
                out[i].offset = centre + MIN_NOTE_DURATION;
            }
        }
        start = k;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionLabel {
    Missing,
    Extra,
}

/// Contiguous run `start..end` of note indices sharing one label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub start: usize,
    pub end: usize,
    pub label: RegionLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingExtraLabels {
    pub missing: Vec<usize>,
    pub extra: Vec<usize>,
    pub regions: Vec<Region>,
    pub p_missing: f64,
}

/// Labels random contiguous regions of `notes` (identity order) as missing
/// or extra. The labelled total `n` is drawn from U(0.1 L, 0.5 L); each
/// region is missing with probability p1 ~ U(0.25, 0.75) and its length
/// from U(1, max(2, n / 5)).
pub fn inject_missing_extra(notes: &[Note], seed: u64) -> Result<MissingExtraLabels, MisalignError> {
    let l = notes.len();
    if l < 10 {
        return Err(MisalignError::TooFewNotes(l));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lf = l as f64;
    let (n_lo, n_hi) = ((0.1 * lf).ceil() as usize, (0.5 * lf).floor() as usize);
    let n = (rng.random_range(0.1 * lf..0.5 * lf).round() as usize).clamp(n_lo, n_hi);
    let p1 = rng.random_range(0.25..0.75);
    let max_len = (n / 5).max(2);

    let mut labeled = vec![false; l];
    let mut regions = Vec::new();
    let mut total = 0;
    while total < n {
        let mut len = rng.random_range(1..=max_len).min(n - total);
        let starts = loop {
            let starts = free_starts(&labeled, len);
            if !starts.is_empty() {
                break starts;
            }
            len -= 1;
        };
        let start = starts[rng.random_range(0..starts.len())];
        let label = if rng.random_bool(p1) { RegionLabel::Missing } else { RegionLabel::Extra };
        labeled[start..start + len].iter_mut().for_each(|b| *b = true);
        regions.push(Region { start, end: start + len, label });
        total += len;
    }
    let mut missing = Vec::new();
    let mut extra = Vec::new();
    for r in &regions {
        let dst = match r.label {
            RegionLabel::Missing => &mut missing,
            RegionLabel::Extra => &mut extra,
        };
        dst.extend(r.start..r.end);
    }
    missing.sort_unstable();
    extra.sort_unstable();
    Ok(MissingExtraLabels { missing, extra, regions, p_missing: p1 })
}

/// Starting positions of runs of `len` unlabeled notes.
fn free_starts(labeled: &[bool], len: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut run = 0;
    for (i, &b) in labeled.iter().enumerate() {
        run = if b { 0 } else { run + 1 };
        if run >= len {
            out.push(i + 1 - len);
        }
    }
    out
}

/// `notes` without the indices in `drop` (which must be sorted).
pub fn remove_indices(notes: &[Note], drop: &[usize]) -> Vec<Note> {
    notes
        .iter()
        .enumerate()
        .filter(|(i, _)| drop.binary_search(i).is_err())
        .map(|(_, n)| *n)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest, any};
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn piece(n: usize, rng: &mut ChaCha8Rng) -> Vec<Note> {
        (0..n)
            .map(|i| {
                let on = i as f64 * 0.25;
                Note::new(rng.random_range(40..90), on, on + rng.random_range(0.1..0.6))
            })
            .collect()
    }

    fn diagonal(n: usize) -> NoteMatching {
        NoteMatching { matched: (0..n).map(|i| (i, i)).collect(), missing: vec![], extra: vec![] }
    }

    #[test]
    fn point_histogram_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = Histogram::point(0.1);
        assert!((0..100).all(|_| h.sample(&mut rng) == 0.1));
        assert_eq!(Histogram::from_values(&[0.3; 4], 100).unwrap().sample(&mut rng), 0.3);
    }

    #[test]
    fn histogram_sampling_respects_bins() {
        let h = Histogram::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 0.0, 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<f64> = (0..20000).map(|_| h.sample(&mut rng)).collect();
        assert!(draws.iter().all(|&v| (0.0..1.0).contains(&v) || (2.0..3.0).contains(&v)));
        let high = draws.iter().filter(|&&v| v >= 2.0).count() as f64 / draws.len() as f64;
        assert!((high - 0.75).abs() < 0.02, "{high}");
        assert_eq!(h.mean(), (0.5 + 3.0 * 2.5) / 4.0);
    }

    #[test]
    fn from_values_covers_range() {
        let h = Histogram::from_values(&[0.0, 0.5, 1.0, 1.0], 4).unwrap();
        assert_eq!(h.edges, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(h.counts, vec![1.0, 0.0, 1.0, 2.0]);
        assert_eq!(Histogram::from_values(&[], 4), Err(MisalignError::NoValues));
        assert!(Histogram::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(Histogram::new(vec![0.0, 1.0], vec![0.0]).is_err());
    }

    #[test]
    fn nearly_constant_values_still_bin() {
        let v = [1.0, 1.0f64.next_up(), 1.0f64.next_up().next_up()];
        let h = Histogram::from_values(&v, 100).unwrap();
        assert!(h.check().is_ok());
        assert_eq!(h.total(), 3.0);
    }

    #[test]
    fn identity_pair_fits_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = piece(30, &mut rng);
        let m = diagonal(30);
        let model = fit_model(&[TrainingPiece { score: &s, perf: &s, matching: &m }], DEFAULT_BINS).unwrap();
        assert_eq!(model.x_ons, Histogram { edges: vec![0.0, 0.0f64.next_up()], counts: vec![30.0] });
        assert_eq!(model.y_ons_m.sample(&mut rng), 0.0);
        assert_eq!(model.y_dur_m.sample(&mut rng), 1.0);
    }

    #[test]
    fn constant_shift_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scores: Vec<Vec<Note>> = (0..2).map(|_| piece(20, &mut rng)).collect();
        let perfs: Vec<Vec<Note>> = scores
            .iter()
            .map(|s| s.iter().map(|n| Note::new(n.pitch, n.onset + 0.1, n.offset + 0.1)).collect())
            .collect();
        let m = diagonal(20);
        let pieces: Vec<TrainingPiece> = scores
            .iter()
            .zip(&perfs)
            .map(|(s, p)| TrainingPiece { score: s, perf: p, matching: &m })
            .collect();
        let model = fit_model(&pieces, DEFAULT_BINS).unwrap();
        // both pieces have deviation 0.1 up to float error
        assert!((model.y_ons_m.mean() - 0.1).abs() < 1e-9);
        assert!(model.y_ons_std.mean().abs() < 1e-9);

        let target = piece(1000, &mut rng);
        let out = sample_misaligned(&target, &model, 4);
        let mut shifts: Vec<f64> = out.iter().zip(&target).map(|(a, b)| a.onset - b.onset).collect();
        shifts.sort_by(f64::total_cmp);
        let median = shifts[shifts.len() / 2];
        assert!((0.08..=0.12).contains(&median), "{median}");
    }

    #[test]
    fn gaussian_fit_recovers_piece_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shift = Normal::new(0.05, 0.02).unwrap();
        let mut data = Vec::new();
        let mut truth_means = Vec::new();
        for _ in 0..50 {
            let s = piece(40, &mut rng);
            let p: Vec<Note> = s
                .iter()
                .map(|n| {
                    let d = shift.sample(&mut rng);
                    Note::new(n.pitch, n.onset + d, n.offset + d)
                })
                .collect();
            truth_means.push(p.iter().zip(&s).map(|(a, b)| a.onset - b.onset).sum::<f64>() / 40.0);
            data.push((s, p));
        }
        let m = diagonal(40);
        let pieces: Vec<TrainingPiece> =
            data.iter().map(|(s, p)| TrainingPiece { score: s, perf: p, matching: &m }).collect();
        let model = fit_model(&pieces, DEFAULT_BINS).unwrap();
        let fitted = model.y_ons_m.mean();
        assert!((fitted - 0.05).abs() / 0.05 < 0.1, "{fitted}");
        let std_mean = model.y_ons_std.mean();
        assert!((std_mean - 0.02).abs() / 0.02 < 0.1, "{std_mean}");
    }

    #[test]
    fn fit_rejects_thin_pieces() {
        let s = vec![Note::new(60, 0.0, 1.0)];
        let m = diagonal(1);
        assert_eq!(
            fit_model(&[TrainingPiece { score: &s, perf: &s, matching: &m }], 10),
            Err(MisalignError::TooFewMatches { piece: 0, found: 1 })
        );
        assert_eq!(fit_model(&[], 10), Err(MisalignError::NoPieces));
    }

    #[test]
    fn identity_model_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = piece(50, &mut rng);
        assert_eq!(sample_misaligned(&s, &MisalignmentModel::identity(), 11), s);
    }

    #[test]
    fn sampling_is_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = piece(50, &mut rng);
        let model = MisalignmentModel {
            x_ons: Histogram::new(vec![-2.0, 0.0, 2.0], vec![1.0, 1.0]).unwrap(),
            y_ons_std: Histogram::point(0.05),
            ..MisalignmentModel::identity()
        };
        assert_eq!(sample_misaligned(&s, &model, 9), sample_misaligned(&s, &model, 9));
        assert_ne!(sample_misaligned(&s, &model, 9), sample_misaligned(&s, &model, 10));
    }

    #[test]
    fn clustering_examples() {
        let notes = vec![Note::new(60, 0.0, 0.3), Note::new(64, 0.01, 0.3), Note::new(67, 0.5, 0.8)];
        let out = cluster_chord_onsets(&notes, Some(0.03), 0).unwrap();
        assert_eq!(out[0].onset, 0.005);
        assert_eq!(out[1].onset, 0.005);
        assert_eq!(out[2].onset, 0.5);

        let spread = vec![Note::new(60, 0.0, 0.1), Note::new(60, 0.1, 0.2)];
        assert_eq!(cluster_chord_onsets(&spread, Some(0.05), 0).unwrap(), spread);
        let same = vec![Note::new(60, 0.1, 0.2), Note::new(64, 0.1, 0.3), Note::new(67, 0.1, 0.4)];
        assert_eq!(cluster_chord_onsets(&same, Some(0.05), 0).unwrap(), same);
    }

    #[test]
    fn clustering_fixes_collapsed_offsets() {
        let notes = vec![Note::new(60, 0.0, 0.005), Note::new(62, 0.02, 0.5)];
        let out = cluster_chord_onsets(&notes, Some(0.05), 0).unwrap();
        assert_eq!(out[0].onset, 0.01);
        assert_eq!(out[0].offset, 0.02);
    }

    #[test]
    fn drawn_threshold_in_range() {
        for seed in 0..200 {
            let t = draw_cluster_threshold(seed);
            assert!((0.03..=0.07).contains(&t));
        }
        assert!(cluster_chord_onsets(&[], Some(0.0), 0).is_err());
    }

    #[test]
    fn missing_extra_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = piece(100, &mut rng);
        let (mut missing_regions, mut regions) = (0usize, 0usize);
        for seed in 0..1000 {
            let labels = inject_missing_extra(&s, seed).unwrap();
            let total = labels.missing.len() + labels.extra.len();
            assert!((10..=50).contains(&total));
            assert!((0.25..0.75).contains(&labels.p_missing));
            missing_regions += labels.regions.iter().filter(|r| r.label == RegionLabel::Missing).count();
            regions += labels.regions.len();
        }
        let frac = missing_regions as f64 / regions as f64;
        assert!((0.45..0.55).contains(&frac), "{frac}");
        assert_eq!(inject_missing_extra(&s[..9], 0), Err(MisalignError::TooFewNotes(9)));
        assert_eq!(inject_missing_extra(&s, 3), inject_missing_extra(&s, 3));
    }

    #[test]
    fn remove_indices_keeps_order() {
        let notes: Vec<Note> = (0..5).map(|i| Note::new(60 + i, i as f64, i as f64 + 0.5)).collect();
        let kept = remove_indices(&notes, &[1, 3]);
        assert_eq!(kept.iter().map(|n| n.pitch).collect::<Vec<_>>(), vec![60, 62, 64]);
    }

    proptest! {
        #[test]
        fn clustering_separates_distinct_onsets(
            onsets in prop::collection::vec(0.0f64..3.0, 1..60),
            t in prop::sample::select(vec![0.03, 0.05, 0.07]),
        ) {
            let notes: Vec<Note> = onsets.iter().map(|&o| Note::new(60, o, o + 0.2)).collect();
            let out = cluster_chord_onsets(&notes, Some(t), 0).unwrap();
            let mut values: Vec<f64> = out.iter().map(|n| n.onset).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for w in values.windows(2) {
                prop_assert!(w[1] - w[0] >= t - 1e-12);
            }
            prop_assert!(out.iter().all(|n| n.offset > n.onset));
        }

        #[test]
        fn labels_are_disjoint_contiguous_regions(len in 10usize..200, seed in any::<u64>()) {
            let notes: Vec<Note> = (0..len).map(|i| Note::new(60, i as f64, i as f64 + 0.5)).collect();
            let labels = inject_missing_extra(&notes, seed).unwrap();
            let mut all: Vec<usize> = labels.missing.iter().chain(&labels.extra).copied().collect();
            all.sort_unstable();
            let before = all.len();
            all.dedup();
            prop_assert_eq!(before, all.len());
            let lf = len as f64;
            prop_assert!(all.len() as f64 >= 0.1 * lf && all.len() as f64 <= 0.5 * lf);
            for r in &labels.regions {
                prop_assert!(r.start < r.end && r.end <= len);
            }
        }

        #[test]
        fn sampling_preserves_identity(seed in any::<u64>(), n in 0usize..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = piece(n, &mut rng);
            let model = MisalignmentModel {
                x_ons: Histogram::new(vec![-3.0, 0.0, 3.0], vec![1.0, 2.0]).unwrap(),
                x_dur: Histogram::new(vec![-3.0, 3.0], vec![1.0]).unwrap(),
                y_ons_std: Histogram::point(0.1),
                y_dur_std: Histogram::point(0.5),
                ..MisalignmentModel::identity()
            };
            let out = sample_misaligned(&s, &model, seed);
            prop_assert_eq!(out.len(), s.len());
            for (a, b) in out.iter().zip(&s) {
                prop_assert_eq!(a.pitch, b.pitch);
                prop_assert!(a.offset > a.onset && a.onset >= 0.0);
            }
        }
    }
}
