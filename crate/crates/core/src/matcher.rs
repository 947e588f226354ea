//! Note-level matching between a score and a performance (or transcription):
//! matched pairs, missing score notes and extra performance notes, tolerant
//! of wrong pitches.
//!
//! Both sequences are first put in "chord order": notes whose onsets chain
//! together within `chord_window` form a group, groups follow each other by
//! onset and notes inside a group are ordered by pitch. A dynamic program
//! then finds the cheapest monotone alignment of the two orders using the
//! moves match, skip-score and skip-performance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::{Budget, BudgetExceeded};
use crate::model::{ModelError, Note, NoteMatching, NoteSequence, TimeMap};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error("at least two matched notes are needed, found {0}")]
    TooFewMatches(usize),
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Cost per second of onset difference between matched notes.
    pub onset_weight: f64,
    pub pitch_mismatch_cost: f64,
    /// Cost of each missing or extra note.
    pub skip_cost: f64,
    /// Multiplies `pitch_mismatch_cost` for octave (±12) and fifth (±7) errors.
    pub octave_fifth_discount: f64,
    /// Onsets closer than this are grouped as one chord.
    pub chord_window: f64,
    /// When set, restricts the search to a corridor of this many seconds
    /// around each score onset.
    pub onset_window: Option<f64>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            onset_weight: 1.0,
            pitch_mismatch_cost: 4.0,
            skip_cost: 2.0,
            octave_fifth_discount: 0.5,
            chord_window: 0.05,
            onset_window: None,
        }
    }
}

impl MatchConfig {
    pub fn pitch_cost(&self, a: u8, b: u8) -> f64 {
        match (i16::from(a) - i16::from(b)).abs() {
            0 => 0.0,
            7 | 12 => self.pitch_mismatch_cost * self.octave_fifth_discount,
            _ => self.pitch_mismatch_cost,
        }
    }

    pub fn pair_cost(&self, s: &Note, p: &Note) -> f64 {
        self.onset_weight * (s.onset - p.onset).abs() + self.pitch_cost(s.pitch, p.pitch)
    }
}

/// Indices of `notes` (already in canonical order) rearranged in chord
/// order.
pub fn chord_order(notes: &[Note], chord_window: f64) -> Vec<usize> {
    let mut order: Vec<usize> = Vec::with_capacity(notes.len());
    let mut group_start = 0;
    for i in 0..notes.len() {
        if i > 0 && notes[i].onset - notes[i - 1].onset >= chord_window {
            sort_group(notes, &mut order[group_start..]);
            group_start = order.len();
        }
        order.push(i);
    }
    sort_group(notes, &mut order[group_start..]);
    order
}

fn sort_group(notes: &[Note], group: &mut [usize]) {
    group.sort_by(|&a, &b| {
        notes[a]
            .pitch
            .cmp(&notes[b].pitch)
            .then(notes[a].onset.total_cmp(&notes[b].onset))
            .then(a.cmp(&b))
    });
}

/// Total cost of `matching` under `cfg`.
pub fn matching_cost(
    score: &NoteSequence,
    perf: &NoteSequence,
    matching: &NoteMatching,
    cfg: &MatchConfig,
) -> f64 {
    let matched: f64 = matching
        .matched
        .iter()
        .map(|&(s, p)| cfg.pair_cost(&score[s], &perf[p]))
        .sum();
    matched + cfg.skip_cost * (matching.missing.len() + matching.extra.len()) as f64
}

/// Minimum-cost monotone matching; see the module docs.
pub fn match_notes(score: &NoteSequence, perf: &NoteSequence, cfg: &MatchConfig) -> NoteMatching {
    match_notes_with_budget(score, perf, cfg, &Budget::unlimited())
        .expect("an unlimited budget cannot be exceeded")
}

const MATCH: u8 = 0;
const SKIP_SCORE: u8 = 1;
const SKIP_PERF: u8 = 2;

pub fn match_notes_with_budget(
    score: &NoteSequence,
    perf: &NoteSequence,
    cfg: &MatchConfig,
    budget: &Budget,
) -> Result<NoteMatching, BudgetExceeded> {
    let s_order = chord_order(score.notes(), cfg.chord_window);
    let p_order = chord_order(perf.notes(), cfg.chord_window);
    let (n, m) = (s_order.len(), p_order.len());
    let bands = state_bands(score, perf, &s_order, cfg.onset_window, cfg.chord_window);

    let cells: u64 = bands.iter().map(|&(lo, hi)| (hi - lo) as u64).sum();
    budget.reserve(cells + 2 * (m as u64 + 1) * 8)?;
    let mut offsets = Vec::with_capacity(n + 1);
    let mut acc = 0usize;
    for &(lo, hi) in &bands {
        offsets.push(acc);
        acc += hi - lo;
    }
    let mut moves = vec![MATCH; acc];
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    // band whose values `cur` still holds from two rows back
    let mut stale = (0, 0);

    for i in 0..=n {
        budget.check_time()?;
        let (lo, hi) = bands[i];
        cur[stale.0..stale.1].iter_mut().for_each(|c| *c = f64::INFINITY);
        for j in lo..hi {
            let k = offsets[i] + j - lo;
            if i == 0 && j == 0 {
                cur[0] = 0.0;
                continue;
            }
            let by_match = if i > 0 && j > 0 {
                prev[j - 1] + cfg.pair_cost(&score[s_order[i - 1]], &perf[p_order[j - 1]])
            } else {
                f64::INFINITY
            };
            let by_skip_score = if i > 0 { prev[j] + cfg.skip_cost } else { f64::INFINITY };
            let by_skip_perf = if j > lo { cur[j - 1] + cfg.skip_cost } else { f64::INFINITY };
            let (best, mv) = if by_match <= by_skip_score && by_match <= by_skip_perf {
                (by_match, MATCH)
            } else if by_skip_score <= by_skip_perf {
                (by_skip_score, SKIP_SCORE)
            } else {
                (by_skip_perf, SKIP_PERF)
            };
            cur[j] = best;
            moves[k] = mv;
        }
        std::mem::swap(&mut prev, &mut cur);
        stale = if i > 0 { bands[i - 1] } else { (0, 0) };
    }

    let mut out = NoteMatching::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let mv = if i == 0 {
            SKIP_PERF
        } else if j == 0 {
            SKIP_SCORE
        } else {
            moves[offsets[i] + j - bands[i].0]
        };
        match mv {
            MATCH => {
                out.matched.push((s_order[i - 1], p_order[j - 1]));
                i -= 1;
                j -= 1;
            }
            SKIP_SCORE => {
                out.missing.push(s_order[i - 1]);
                i -= 1;
            }
            _ => {
                out.extra.push(p_order[j - 1]);
                j -= 1;
            }
        }
    }
    out.matched.sort_unstable();
    out.missing.sort_unstable();
    out.extra.sort_unstable();
    Ok(out)
}

/// Allowed `j` range (half-open, over 0..=m) for each DP row `i` in 0..=n.
fn state_bands(
    score: &NoteSequence,
    perf: &NoteSequence,
    s_order: &[usize],
    window: Option<f64>,
    chord_window: f64,
) -> Vec<(usize, usize)> {
    let (n, m) = (score.len(), perf.len());
    let Some(w) = window else {
        return vec![(0, m + 1); n + 1];
    };
    let perf_onsets: Vec<f64> = perf.iter().map(|p| p.onset).collect();
    let onset_at = |k: usize| score[s_order[k]].onset;
    // row i has consumed s_order[..i]; suffix minimum of what is left and
    // prefix maximum of what is consumed (plus the next note)
    let mut suffix_min = vec![f64::INFINITY; n + 1];
    for k in (0..n).rev() {
        suffix_min[k] = suffix_min[k + 1].min(onset_at(k));
    }
    let mut bands = Vec::with_capacity(n + 1);
    let mut prefix_max = f64::NEG_INFINITY;
    for i in 0..=n {
        if i < n {
            prefix_max = prefix_max.max(onset_at(i));
        } else {
            prefix_max = f64::INFINITY;
        }
        let lo = perf_onsets.partition_point(|&t| t < suffix_min[i] - w);
        let hi = perf_onsets.partition_point(|&t| t <= prefix_max + w);
        bands.push((lo, hi + 1));
    }
    // chord order permutes notes inside a chord group, so widen each band
    // to whole groups of the performance
    let group_of = chord_groups(perf.notes(), chord_window);
    for (lo, hi) in bands.iter_mut() {
        if *lo > 0 && *lo < m {
            *lo = group_of[*lo].0;
        }
        if *hi >= 2 && *hi - 1 <= m {
            *hi = group_of[*hi - 2].1 + 1;
        }
        *hi = (*hi).min(m + 1);
    }
    bands[0].0 = 0;
    bands[n].1 = m + 1;
    for i in 1..=n {
        let prev = bands[i - 1];
        let (lo, hi) = &mut bands[i];
        *lo = (*lo).max(prev.0).min(prev.1 - 1);
        *hi = (*hi).max(prev.1).max(*lo + 1);
    }
    bands
}

/// For each note, the half-open range of positions of its chord group.
fn chord_groups(notes: &[Note], chord_window: f64) -> Vec<(usize, usize)> {
    let mut out = vec![(0, 0); notes.len()];
    let mut start = 0;
    for i in 1..=notes.len() {
        if i == notes.len() || notes[i].onset - notes[i - 1].onset >= chord_window {
            out[start..i].iter_mut().for_each(|g| *g = (start, i));
            start = i;
        }
    }
    out
}

/// Pairs leftover missing score notes with leftover extra performance notes
/// of the same pitch when `predict(score onset)` lands within `window`
/// seconds of the performance onset. Closest pairs are taken first. This
/// repairs chords whose notes were ordered differently on the two sides,
/// which a monotone alignment cannot match.
pub fn rescue_unmatched(
    matching: &mut NoteMatching,
    score: &[Note],
    perf: &[Note],
    predict: impl Fn(f64) -> f64,
    window: f64,
) -> usize {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for &s in &matching.missing {
        let t = predict(score[s].onset);
        for &p in &matching.extra {
            let d = (perf[p].onset - t).abs();
            if perf[p].pitch == score[s].pitch && d <= window {
                candidates.push((d, s, p));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut rescued = Vec::new();
    for (_, s, p) in candidates {
        if rescued.iter().all(|&(rs, rp)| rs != s && rp != p) {
            rescued.push((s, p));
        }
    }
    matching.missing.retain(|s| rescued.iter().all(|r| r.0 != *s));
    matching.extra.retain(|p| rescued.iter().all(|r| r.1 != *p));
    matching.matched.extend(&rescued);
    matching.matched.sort_unstable();
    rescued.len()
}

/// Anchors each matched pair at (score onset, performance onset). Pairs
/// sharing a score onset collapse to their mean performance onset; the
/// performance side is made non-decreasing with a running maximum.
pub fn matching_to_time_map(
    matching: &NoteMatching,
    score: &[Note],
    perf: &[Note],
) -> Result<TimeMap, MatchError> {
    if matching.matched.len() < 2 {
        return Err(MatchError::TooFewMatches(matching.matched.len()));
    }
    let mut points: Vec<(f64, f64)> = matching
        .matched
        .iter()
        .map(|&(s, p)| (score[s].onset, perf[p].onset))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut anchors: Vec<(f64, f64)> = Vec::new();
    let mut k = 0;
    while k < points.len() {
        let key = points[k].0;
        let run = points[k..].iter().take_while(|p| p.0 == key).count();
        let mean = points[k..k + run].iter().map(|p| p.1).sum::<f64>() / run as f64;
        anchors.push((key, mean));
        k += run;
    }
    if anchors.len() < 2 {
        return Err(MatchError::TooFewMatches(matching.matched.len()));
    }
    for k in 1..anchors.len() {
        anchors[k].1 = anchors[k].1.max(anchors[k - 1].1);
    }
    Ok(TimeMap::new(anchors)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_sequence;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(notes: &[(u8, f64)]) -> NoteSequence {
        validate_sequence(notes.iter().map(|&(p, t)| Note::new(p, t, t + 0.25)).collect()).unwrap()
    }

    /// Every k-subset of score positions paired in order with every
    /// k-subset of performance positions, both in chord order.
    fn exhaustive_min(score: &NoteSequence, perf: &NoteSequence, cfg: &MatchConfig) -> f64 {
        let so = chord_order(score.notes(), cfg.chord_window);
        let po = chord_order(perf.notes(), cfg.chord_window);
        let subsets = |n: usize, k: usize| -> Vec<Vec<usize>> {
            (0u32..1 << n)
                .filter(|mask| mask.count_ones() as usize == k)
                .map(|mask| (0..n).filter(|b| mask & (1 << b) != 0).collect())
                .collect()
        };
        let mut best = f64::INFINITY;
        for k in 0..=so.len().min(po.len()) {
            let skips = cfg.skip_cost * ((so.len() - k) + (po.len() - k)) as f64;
            for a in subsets(so.len(), k) {
                for b in subsets(po.len(), k) {
                    let c: f64 = a
                        .iter()
                        .zip(&b)
                        .map(|(&x, &y)| cfg.pair_cost(&score[so[x]], &perf[po[y]]))
                        .sum();
                    best = best.min(c + skips);
                }
            }
        }
        best
    }

    #[test]
    fn identical_sequences_match_fully() {
        let s = seq(&[(60, 0.0), (64, 0.0), (67, 0.5), (72, 1.0), (60, 1.5)]);
        let m = match_notes(&s, &s, &MatchConfig::default());
        assert_eq!(m.matched, (0..5).map(|i| (i, i)).collect::<Vec<_>>());
        assert!(m.missing.is_empty() && m.extra.is_empty());
    }

    #[test]
    fn empty_score_makes_everything_extra() {
        let p = seq(&[(60, 0.0), (62, 0.5), (64, 1.0), (65, 1.5), (67, 2.0)]);
        let m = match_notes(&NoteSequence::empty(), &p, &MatchConfig::default());
        assert!(m.matched.is_empty() && m.missing.is_empty());
        assert_eq!(m.extra, vec![0, 1, 2, 3, 4]);
        let m = match_notes(&p, &NoteSequence::empty(), &MatchConfig::default());
        assert_eq!(m.missing, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn deletion_and_wrong_pitch_instance() {
        let pitches = [60u8, 62, 64, 65, 67, 69, 71, 72, 74, 76];
        let score: Vec<(u8, f64)> = pitches.iter().enumerate().map(|(i, &p)| (p, i as f64 * 0.5)).collect();
        let mut perf = score.clone();
        perf.remove(4);
        // p60 at onset 0 becomes p61
        perf[0].0 = 61;
        let (s, p) = (seq(&score), seq(&perf));
        let cfg = MatchConfig::default();
        let m = match_notes(&s, &p, &cfg);
        assert!(m.is_partition_of(10, 9));
        assert_eq!(matching_cost(&s, &p, &m, &cfg), exhaustive_min(&s, &p, &cfg));
        assert_eq!(m.missing, vec![4]);
        // a full-cost pitch error (4.0) equals two skips; the DP prefers the match
        assert!(m.matched.contains(&(0, 0)));
    }

    #[test]
    fn chords_are_matched_despite_asynchrony() {
        let s = seq(&[(60, 1.0), (64, 1.0), (67, 1.0)]);
        let p = seq(&[(64, 1.00), (60, 1.01), (67, 1.02)]);
        let m = match_notes(&s, &p, &MatchConfig::default());
        for &(a, b) in &m.matched {
            assert_eq!(s[a].pitch, p[b].pitch);
        }
        assert_eq!(m.matched.len(), 3);
    }

    #[test]
    fn octave_errors_are_discounted() {
        let cfg = MatchConfig::default();
        assert_eq!(cfg.pitch_cost(60, 72), 2.0);
        assert_eq!(cfg.pitch_cost(67, 60), 2.0);
        assert_eq!(cfg.pitch_cost(60, 61), 4.0);
        assert_eq!(cfg.pitch_cost(60, 60), 0.0);
    }

    #[test]
    fn random_small_instances_match_exhaustive_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = MatchConfig::default();
        for _ in 0..60 {
            let mk = |rng: &mut ChaCha8Rng| -> NoteSequence {
                let n = rng.random_range(0..=8);
                seq(&(0..n)
                    .map(|_| (rng.random_range(58..70u8), rng.random_range(0..16) as f64 / 8.0))
                    .collect::<Vec<_>>())
            };
            let (s, p) = (mk(&mut rng), mk(&mut rng));
            let m = match_notes(&s, &p, &cfg);
            assert!(m.is_partition_of(s.len(), p.len()));
            assert_eq!(matching_cost(&s, &p, &m, &cfg), exhaustive_min(&s, &p, &cfg));
        }
    }

    #[test]
    fn corridor_agrees_on_well_aligned_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let notes: Vec<(u8, f64)> = (0..300).map(|i| (rng.random_range(40..80u8), 0.1 + i as f64 * 0.2)).collect();
        let jittered: Vec<(u8, f64)> = notes.iter().map(|&(p, t)| (p, t + rng.random_range(-0.05..0.05))).collect();
        let (s, p) = (seq(&notes), seq(&jittered));
        let full = match_notes(&s, &p, &MatchConfig::default());
        let cfg = MatchConfig { onset_window: Some(1.0), ..MatchConfig::default() };
        let banded = match_notes(&s, &p, &cfg);
        assert_eq!(full, banded);
        assert_eq!(full.matched.len(), 300);
    }

    #[test]
    fn time_budget_aborts() {
        let notes: Vec<(u8, f64)> = (0..400).map(|i| (60, i as f64 * 0.1)).collect();
        let s = seq(&notes);
        let budget = Budget::new(Some(std::time::Duration::ZERO), None);
        std::thread::sleep(std::time::Duration::from_millis(2));
        assert!(match_notes_with_budget(&s, &s, &MatchConfig::default(), &budget).is_err());
    }

    #[test]
    fn time_map_examples() {
        let s = seq(&[(60, 0.0), (62, 1.0), (64, 2.0)]);
        let p = seq(&[(60, 0.1), (62, 1.2), (64, 2.1)]);
        let m = match_notes(&s, &p, &MatchConfig::default());
        let tm = matching_to_time_map(&m, s.notes(), p.notes()).unwrap();
        assert_eq!(tm.anchors(), &[(0.0, 0.1), (1.0, 1.2), (2.0, 2.1)]);

        let s = seq(&[(60, 1.0), (64, 1.0), (67, 2.0)]);
        let p = seq(&[(60, 1.00), (64, 1.04), (67, 2.0)]);
        let m = match_notes(&s, &p, &MatchConfig::default());
        let tm = matching_to_time_map(&m, s.notes(), p.notes()).unwrap();
        assert_eq!(tm.anchors()[0].0, 1.0);
        assert!((tm.anchors()[0].1 - 1.02).abs() < 1e-12);

        let one = NoteMatching { matched: vec![(0, 0)], missing: vec![], extra: vec![] };
        assert_eq!(
            matching_to_time_map(&one, s.notes(), p.notes()),
            Err(MatchError::TooFewMatches(1))
        );
    }

    #[test]
    fn rescue_pairs_crossed_chord_notes() {
        // the score chord is spread so that p55 sorts first; the performance
        // plays the chord together, then p55 slightly later
        let s = seq(&[(60, 1.0), (64, 1.0), (55, 1.03)]);
        let p = seq(&[(55, 1.0), (60, 1.0), (64, 1.0)]);
        let mut m = NoteMatching {
            matched: vec![(0, 1), (1, 2)],
            missing: vec![2],
            extra: vec![0],
        };
        assert_eq!(rescue_unmatched(&mut m, s.notes(), p.notes(), |t| t, 0.1), 1);
        assert_eq!(m.matched, vec![(0, 1), (1, 2), (2, 0)]);
        assert!(m.is_partition_of(3, 3));
        let mut far = NoteMatching { matched: vec![], missing: vec![2], extra: vec![0] };
        assert_eq!(rescue_unmatched(&mut far, s.notes(), p.notes(), |t| t + 1.0, 0.1), 0);
    }

    fn arb_seq() -> impl Strategy<Value = NoteSequence> {
        prop::collection::vec((50u8..75, 0.0f64..6.0), 0..25).prop_map(|v| seq(&v))
    }

    proptest! {
        #[test]
        fn partition_and_monotonicity(s in arb_seq(), p in arb_seq()) {
            let cfg = MatchConfig::default();
            let m = match_notes(&s, &p, &cfg);
            prop_assert!(m.is_partition_of(s.len(), p.len()));
            prop_assert_eq!(m.matched.len() + m.missing.len(), s.len());
            prop_assert_eq!(m.matched.len() + m.extra.len(), p.len());
            // monotone in chord order
            let so = chord_order(s.notes(), cfg.chord_window);
            let po = chord_order(p.notes(), cfg.chord_window);
            let rank = |order: &[usize], i: usize| order.iter().position(|&x| x == i).unwrap();
            let mut pairs: Vec<(usize, usize)> = m.matched.iter().map(|&(a, b)| (rank(&so, a), rank(&po, b))).collect();
            pairs.sort();
            for w in pairs.windows(2) {
                prop_assert!(w[1].1 > w[0].1);
            }
        }

        #[test]
        fn swapping_inputs_swaps_roles(s in arb_seq(), p in arb_seq()) {
            let cfg = MatchConfig::default();
            let ab = match_notes(&s, &p, &cfg);
            let ba = match_notes(&p, &s, &cfg);
            prop_assert_eq!(ab.matched.len(), ba.matched.len());
            prop_assert_eq!(ab.missing.len(), ba.extra.len());
            prop_assert_eq!(ab.extra.len(), ba.missing.len());
            let c1 = matching_cost(&s, &p, &ab, &cfg);
            let c2 = matching_cost(&p, &s, &ba, &cfg);
            prop_assert!((c1 - c2).abs() < 1e-9);
            let mut transposed: Vec<(usize, usize)> = ba.matched.iter().map(|&(a, b)| (b, a)).collect();
            transposed.sort();
            prop_assert_eq!(transposed, ab.matched);
        }
    }
}
