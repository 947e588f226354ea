//! Files in, files out: a synthetic piece written as MIDI and CSV, aligned
//! with each pipeline, and scored.

use scorealign::align::{align_eife, align_seba, align_tafe, stretch_to_duration, AlignConfig};
use scorealign::audiofeat::{read_wav, synthesize, write_wav, DEFAULT_SAMPLE_RATE};
use scorealign::eval::{threshold_curve, TimeField, DEFAULT_THRESHOLDS};
use scorealign::fixtures::{humanize, piano_piece, Humanize};
use scorealign::io::{read_midi, read_note_rows, write_midi, write_notes_csv};
use scorealign::Budget;

#[test]
fn pipelines_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let score = piano_piece(80, 7);
    let perf = humanize(&score, &Humanize { tempo_range: 0.1, ..Humanize::default() }, 8);

    let score_path = dir.path().join("score.mid");
    let perf_path = dir.path().join("perf.csv");
    let wav_path = dir.path().join("perf.wav");
    write_midi(&score, &score_path).unwrap();
    write_notes_csv(&perf, &perf_path).unwrap();
    write_wav(&synthesize(&perf, DEFAULT_SAMPLE_RATE), &wav_path).unwrap();

    let score_in = read_midi(&score_path).unwrap().into_notes();
    let perf_in = read_note_rows(&perf_path).unwrap();
    assert_eq!(perf_in, perf);
    let audio = read_wav(&wav_path, DEFAULT_SAMPLE_RATE).unwrap();

    let cfg = AlignConfig::default();
    let seba = align_seba(&score_in, &audio, &cfg, &Budget::default()).unwrap();
    let tafe = align_tafe(&score_in, &perf_in, audio.duration(), &cfg, &Budget::default()).unwrap();
    let eife = align_eife(&score_in, &perf_in, &audio, &cfg, &Budget::default()).unwrap();

    // MIDI reading sorts notes; sort the reference the same way
    let mut truth = perf.clone();
    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|&a, &b| score[a].canonical_cmp(&score[b]));
    truth = order.iter().map(|&i| truth[i]).collect();

    let at = |notes: &[scorealign::Note], t: f64| {
        threshold_curve(notes, &truth, TimeField::Onsets, &DEFAULT_THRESHOLDS).unwrap().at(t).unwrap()
    };
    let stretched = stretch_to_duration(&score_in, audio.duration()).unwrap();
    assert!(at(&eife.realigned_score, 0.02) >= 0.99);
    assert!(at(&eife.realigned_score, 0.02) >= at(&tafe.realigned_score, 0.02));
    assert!(at(&seba.realigned_score, 0.1) >= at(&stretched, 0.1));
    assert!(at(&tafe.realigned_score, 0.1) >= 0.9);
}
