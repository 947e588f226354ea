//! Reading and writing note sequences (Standard MIDI File, note CSV) and
//! misalignment models (JSON).

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use midly::num::{u15, u24, u28, u4, u7};
use midly::{Format, Header, MetaMessage, MidiMessage, Smf, Timing, TrackEvent, TrackEventKind};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::misalign::{Histogram, MisalignmentModel};
use crate::model::{check_notes, validate_sequence, ModelError, Note, NoteSequence};

pub const MIDI_PPQ: u16 = 960;
pub const MIDI_TEMPO_US: u32 = 500_000;
pub const MIDI_DEFAULT_VELOCITY: u8 = 64;
pub const CSV_HEADER: [&str; 4] = ["onset_sec", "offset_sec", "pitch", "velocity"];
pub const MODEL_SCHEMA_VERSION: u64 = 1;

const PERCUSSION_CHANNEL: u8 = 9;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed MIDI file: {0}")]
    MalformedMidi(String),
    #[error("malformed CSV at line {line}: {reason}")]
    MalformedCsv { line: u64, reason: String },
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("model schema mismatch: {0}")]
    SchemaVersionMismatch(String),
    #[error(transparent)]
    Invalid(#[from] ModelError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

// ---------------------------------------------------------------- MIDI

/// Maps absolute ticks to seconds through a tempo map.
enum Clock {
    Metrical { ppq: f64, changes: Vec<(u64, f64, u32)> },
    Timecode { ticks_per_second: f64 },
}

impl Clock {
    fn new(timing: Timing, mut tempos: Vec<(u64, u32)>) -> Result<Self, IoError> {
        match timing {
            Timing::Timecode(fps, sub) => {
                if sub == 0 {
                    return Err(IoError::MalformedMidi("zero ticks per frame".into()));
                }
                Ok(Clock::Timecode { ticks_per_second: f64::from(fps.as_f32()) * f64::from(sub) })
            }
            Timing::Metrical(ppq) => {
                let ppq = f64::from(ppq.as_int());
                if ppq == 0.0 {
                    return Err(IoError::MalformedMidi("zero ticks per quarter note".into()));
                }
                tempos.sort_by_key(|&(tick, _)| tick);
                // (tick, seconds at tick, microseconds per quarter from tick)
                let mut changes = vec![(0u64, 0.0, MIDI_TEMPO_US)];
                for (tick, us) in tempos {
                    let &(t0, s0, us0) = changes.last().unwrap();
                    let at = s0 + (tick - t0) as f64 * f64::from(us0) / (ppq * 1e6);
                    if tick == t0 {
                        changes.last_mut().unwrap().2 = us;
                    } else {
                        changes.push((tick, at, us));
                    }
                }
                Ok(Clock::Metrical { ppq, changes })
            }
        }
    }

    fn seconds(&self, tick: u64) -> f64 {
        match self {
            Clock::Timecode { ticks_per_second } => tick as f64 / ticks_per_second,
            Clock::Metrical { ppq, changes } => {
                let k = changes.partition_point(|c| c.0 <= tick) - 1;
                let (t0, s0, us) = changes[k];
                s0 + (tick - t0) as f64 * f64::from(us) / (ppq * 1e6)
            }
        }
    }
}

/// Reads a type 0 or 1 Standard MIDI File. All tracks are merged and
/// channel 10 is skipped. A note-on left open at the end of the file is
/// closed at the last event; a second note-on on an open key closes the
/// first; notes that end up with zero length are dropped.
pub fn read_midi(path: &Path) -> Result<NoteSequence, IoError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    parse_midi(&bytes)
}

pub fn parse_midi(bytes: &[u8]) -> Result<NoteSequence, IoError> {
    let smf = Smf::parse(bytes).map_err(|e| IoError::MalformedMidi(e.to_string()))?;

    let mut tempos = Vec::new();
    // (track, channel, key) -> (on tick, velocity); closed notes in ticks
    let mut open: HashMap<(usize, u8, u8), (u64, u8)> = HashMap::new();
    let mut closed: Vec<(u8, u64, u64, u8)> = Vec::new();
    let mut last_tick = 0u64;

    for (track_no, track) in smf.tracks.iter().enumerate() {
        let mut tick = 0u64;
        for event in track {
            tick += u64::from(event.delta.as_int());
            last_tick = last_tick.max(tick);
            match event.kind {
                TrackEventKind::Meta(MetaMessage::Tempo(us)) => tempos.push((tick, us.as_int())),
                TrackEventKind::Midi { channel, message } if channel.as_int() != PERCUSSION_CHANNEL => {
                    let ch = channel.as_int();
                    match message {
                        MidiMessage::NoteOn { key, vel } if vel.as_int() > 0 => {
                            let k = (track_no, ch, key.as_int());
                            if let Some((on, v)) = open.insert(k, (tick, vel.as_int())) {
                                closed.push((k.2, on, tick, v));
                            }
                        }
                        MidiMessage::NoteOn { key, .. } | MidiMessage::NoteOff { key, .. } => {
                            if let Some((on, v)) = open.remove(&(track_no, ch, key.as_int())) {
                                closed.push((key.as_int(), on, tick, v));
                            }
                        }
                        _ => {}
                    }
                }
                _ => {}
            }
        }
    }
    let mut dangling: Vec<_> = open.into_iter().collect();
    dangling.sort_unstable_by_key(|&(k, v)| (v.0, k));
    closed.extend(dangling.into_iter().map(|((_, _, key), (on, v))| (key, on, last_tick, v)));

    let clock = Clock::new(smf.header.timing, tempos)?;
    let notes: Vec<Note> = closed
        .into_iter()
        .filter(|&(_, on, off, _)| off > on)
        .map(|(key, on, off, v)| Note::new(key, clock.seconds(on), clock.seconds(off)).with_velocity(v))
        .collect();
    Ok(validate_sequence(notes)?)
}

fn to_ticks(seconds: f64) -> u64 {
    let ticks_per_second = f64::from(MIDI_PPQ) * 1e6 / f64::from(MIDI_TEMPO_US);
    (seconds * ticks_per_second).round() as u64
}

/// Writes a type 0 file at 960 PPQ and 120 BPM. Velocity `None` is written
/// as 64 and 0 as 1. Same-pitch notes that overlap go to different
/// channels so that reading them back does not cut them short.
pub fn write_midi(notes: &[Note], path: &Path) -> Result<(), IoError> {
    let bytes = encode_midi(notes)?;
    std::fs::write(path, bytes).map_err(io_err(path))
}

pub fn encode_midi(notes: &[Note]) -> Result<Vec<u8>, IoError> {
    check_notes(notes)?;
    let channels: Vec<u8> = (0..16).filter(|&c| c != PERCUSSION_CHANNEL).collect();
    let mut order: Vec<usize> = (0..notes.len()).collect();
    order.sort_by(|&a, &b| notes[a].canonical_cmp(&notes[b]));

    // per pitch, the tick at which each channel becomes free again
    let mut busy: HashMap<u8, Vec<u64>> = HashMap::new();
    // (tick, is_on, channel, key, velocity)
    let mut events: Vec<(u64, bool, u8, u8, u8)> = Vec::with_capacity(notes.len() * 2);
    for &i in &order {
        let n = &notes[i];
        let on = to_ticks(n.onset);
        let off = to_ticks(n.offset).max(on + 1);
        let free = busy.entry(n.pitch).or_insert_with(|| vec![0; channels.len()]);
        let slot = free.iter().position(|&t| t <= on).unwrap_or_else(|| {
            // all busy: reuse the one freeing soonest
            (0..free.len()).min_by_key(|&c| free[c]).unwrap()
        });
        free[slot] = off;
        let vel = n.velocity.unwrap_or(MIDI_DEFAULT_VELOCITY).clamp(1, 127);
        events.push((on, true, channels[slot], n.pitch, vel));
        events.push((off, false, channels[slot], n.pitch, 0));
    }
    // offs before ons at equal ticks
    events.sort_by_key(|&(tick, is_on, ch, key, _)| (tick, is_on, ch, key));

    let mut track = vec![TrackEvent {
        delta: u28::new(0),
        kind: TrackEventKind::Meta(MetaMessage::Tempo(u24::new(MIDI_TEMPO_US))),
    }];
    let mut prev = 0u64;
    for (tick, is_on, ch, key, vel) in events {
        let delta = u28::try_from(u32::try_from(tick - prev).unwrap_or(u32::MAX))
            .ok_or_else(|| IoError::MalformedMidi("gap between events too long for MIDI".into()))?;
        let (key, vel) = (u7::new(key), u7::new(vel));
        let message = if is_on { MidiMessage::NoteOn { key, vel } } else { MidiMessage::NoteOff { key, vel } };
        track.push(TrackEvent { delta, kind: TrackEventKind::Midi { channel: u4::new(ch), message } });
        prev = tick;
    }
    track.push(TrackEvent { delta: u28::new(0), kind: TrackEventKind::Meta(MetaMessage::EndOfTrack) });

    let mut smf = Smf::new(Header::new(Format::SingleTrack, Timing::Metrical(u15::new(MIDI_PPQ))));
    smf.tracks.push(track);
    let mut out = Vec::new();
    smf.write_std(&mut out).map_err(|e| IoError::MalformedMidi(e.to_string()))?;
    Ok(out)
}

// ----------------------------------------------------------------- CSV

/// Shortest round-trip decimal, padded to at least six decimal places.
pub fn format_time(t: f64) -> String {
    let mut s = format!("{t}");
    let decimals = match s.find('.') {
        Some(dot) => s.len() - dot - 1,
        None => {
            s.push('.');
            0
        }
    };
    for _ in decimals..6 {
        s.push('0');
    }
    s
}

/// Rows of a note CSV in file order, each checked against the note
/// invariants but not sorted.
pub fn read_note_rows(path: &Path) -> Result<Vec<Note>, IoError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    parse_note_rows(file)
}

pub fn parse_note_rows<R: std::io::Read>(input: R) -> Result<Vec<Note>, IoError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header_err = |reason: String| IoError::MalformedCsv { line: 1, reason };
    let headers = reader.headers().map_err(|e| header_err(e.to_string()))?;
    if headers.iter().map(str::trim).ne(CSV_HEADER) {
        return Err(header_err(format!("expected header {}", CSV_HEADER.join(","))));
    }
    let mut notes = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IoError::MalformedCsv {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |reason: String| IoError::MalformedCsv { line, reason };
        let field = |k: usize| record.get(k).map(str::trim).unwrap_or("");
        let time = |k: usize| -> Result<f64, IoError> {
            field(k).parse::<f64>().map_err(|e| bad(format!("{}: {e}", CSV_HEADER[k])))
        };
        let int = |k: usize| -> Result<i64, IoError> {
            field(k).parse::<i64>().map_err(|e| bad(format!("{}: {e}", CSV_HEADER[k])))
        };
        let (onset, offset, pitch) = (time(0)?, time(1)?, int(2)?);
        let index = notes.len();
        let pitch = u8::try_from(pitch)
            .ok()
            .filter(|&p| p <= 127)
            .ok_or_else(|| bad(ModelError::PitchOutOfRange(index).to_string()))?;
        let velocity = match field(3) {
            "" => None,
            _ => Some(
                u8::try_from(int(3)?)
                    .ok()
                    .filter(|&v| v <= 127)
                    .ok_or_else(|| bad(ModelError::VelocityOutOfRange(index).to_string()))?,
            ),
        };
        let note = Note { pitch, onset, offset, velocity };
        note.check(index).map_err(|e| bad(e.to_string()))?;
        notes.push(note);
    }
    Ok(notes)
}

pub fn read_notes_csv(path: &Path) -> Result<NoteSequence, IoError> {
    Ok(validate_sequence(read_note_rows(path)?)?)
}

/// Writes notes in the given order.
pub fn write_notes_csv(notes: &[Note], path: &Path) -> Result<(), IoError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    encode_notes_csv(notes, file).map_err(|e| match e {
        IoError::Io { source, .. } => IoError::Io { path: path.to_path_buf(), source },
        other => other,
    })
}

pub fn encode_notes_csv<W: std::io::Write>(notes: &[Note], out: W) -> Result<(), IoError> {
    check_notes(notes)?;
    let mut writer = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| IoError::Io { path: PathBuf::new(), source: e.into() };
    writer.write_record(CSV_HEADER).map_err(wrap)?;
    for n in notes {
        writer
            .write_record([
                format_time(n.onset),
                format_time(n.offset),
                n.pitch.to_string(),
                n.velocity.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .map_err(wrap)?;
    }
    writer.flush().map_err(|e| IoError::Io { path: PathBuf::new(), source: e })
}

/// Reads a note file by extension: `.mid`/`.midi` or CSV otherwise.
/// CSV rows keep their file order; MIDI notes come out sorted.
pub fn read_notes_any(path: &Path) -> Result<Vec<Note>, IoError> {
    if is_midi(path) {
        Ok(read_midi(path)?.into_notes())
    } else {
        read_note_rows(path)
    }
}

pub fn write_notes_any(notes: &[Note], path: &Path) -> Result<(), IoError> {
    if is_midi(path) {
        write_midi(notes, path)
    } else {
        write_notes_csv(notes, path)
    }
}

pub fn is_midi(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("mid" | "midi")
    )
}

// ---------------------------------------------------------- model JSON

pub fn read_model_json(path: &Path) -> Result<MisalignmentModel, IoError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_model_json(&text)
}

pub fn parse_model_json(text: &str) -> Result<MisalignmentModel, IoError> {
    let value: Value = serde_json::from_str(text).map_err(|e| IoError::MalformedJson(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(IoError::MalformedJson("top level must be an object".into()));
    };
    match obj.get("version").and_then(Value::as_u64) {
        Some(MODEL_SCHEMA_VERSION) => {}
        other => {
            return Err(IoError::SchemaVersionMismatch(format!(
                "expected version {MODEL_SCHEMA_VERSION}, found {other:?}"
            )))
        }
    }
    let mut take = |key: &str| -> Result<Histogram, IoError> {
        let v = obj
            .remove(key)
            .ok_or_else(|| IoError::SchemaVersionMismatch(format!("missing histogram {key}")))?;
        let h: Histogram = serde_json::from_value(v).map_err(|e| IoError::MalformedJson(format!("{key}: {e}")))?;
        h.check().map_err(|e| IoError::MalformedJson(format!("{key}: {e}")))?;
        Ok(h)
    };
    Ok(MisalignmentModel {
        x_ons: take("x_ons")?,
        x_dur: take("x_dur")?,
        y_ons_m: take("y_ons_m")?,
        y_ons_std: take("y_ons_std")?,
        y_dur_m: take("y_dur_m")?,
        y_dur_std: take("y_dur_std")?,
    })
}

pub fn model_to_json(model: &MisalignmentModel) -> String {
    let mut obj = Map::new();
    obj.insert("version".into(), Value::from(MODEL_SCHEMA_VERSION));
    for (key, h) in model.histograms() {
        obj.insert(key.into(), serde_json::to_value(h).expect("histograms serialize"));
    }
    serde_json::to_string_pretty(&Value::Object(obj)).expect("JSON values serialize")
}

pub fn write_model_json(model: &MisalignmentModel, path: &Path) -> Result<(), IoError> {
    model
        .check()
        .map_err(|e| IoError::MalformedJson(e.to_string()))?;
    std::fs::write(path, model_to_json(model) + "\n").map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::misalign::{fit_model, TrainingPiece, DEFAULT_BINS};
    use crate::model::NoteMatching;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TICK: f64 = 1.0 / 1920.0;

    fn random_notes(rng: &mut ChaCha8Rng, n: usize) -> Vec<Note> {
        (0..n)
            .map(|_| {
                let on = rng.random_range(0.0..60.0);
                let d = rng.random_range(0.002..3.0);
                Note::new(rng.random_range(0..128), on, on + d).with_velocity(rng.random_range(1..128))
            })
            .collect()
    }

    /// Hand-assembled type 1 file: a tempo track plus one note track.
    fn handmade_midi(ppq: u16, events: &[u8]) -> Vec<u8> {
        let mut b = b"MThd".to_vec();
        b.extend([0, 0, 0, 6, 0, 1, 0, 2]);
        b.extend(ppq.to_be_bytes());
        let tempo_track = [0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20, 0x00, 0xFF, 0x2F, 0x00];
        for body in [&tempo_track[..], events] {
            b.extend(b"MTrk");
            b.extend((body.len() as u32).to_be_bytes());
            b.extend(body);
        }
        b
    }

    #[test]
    fn reads_single_note_at_480_ppq() {
        // note-on at 0, note-off 480 ticks later (0x83 0x60 = 480)
        let ev = [0x00, 0x90, 60, 64, 0x83, 0x60, 0x80, 60, 0, 0x00, 0xFF, 0x2F, 0x00];
        let seq = parse_midi(&handmade_midi(480, &ev)).unwrap();
        assert_eq!(seq.notes(), &[Note::new(60, 0.0, 0.5).with_velocity(64)]);
    }

    #[test]
    fn velocity_zero_is_note_off_and_percussion_is_skipped() {
        let ev = [
            0x00, 0x99, 36, 100, // percussion on channel 10
            0x00, 0x90, 62, 80, //
            0x83, 0x60, 0x90, 62, 0, // note-on velocity 0 closes it
            0x00, 0x89, 36, 0, //
            0x00, 0xFF, 0x2F, 0x00,
        ];
        let seq = parse_midi(&handmade_midi(480, &ev)).unwrap();
        assert_eq!(seq.notes(), &[Note::new(62, 0.0, 0.5).with_velocity(80)]);
    }

    #[test]
    fn open_notes_close_at_last_event_and_retriggers_split() {
        let ev = [
            0x00, 0x90, 60, 70, //
            0x83, 0x60, 0x90, 60, 71, // retrigger at 480 closes the first
            0x83, 0x60, 0xFF, 0x2F, 0x00, // end at 960, second never released
        ];
        let seq = parse_midi(&handmade_midi(480, &ev)).unwrap();
        assert_eq!(
            seq.notes(),
            &[Note::new(60, 0.0, 0.5).with_velocity(70), Note::new(60, 0.5, 1.0).with_velocity(71)]
        );
    }

    #[test]
    fn tempo_changes_are_followed() {
        let mut b = b"MThd".to_vec();
        b.extend([0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xE0]);
        // 480 ticks at 120 BPM, then tempo 60 BPM and 480 more ticks
        let body = [
            0x00, 0x90, 60, 64, //
            0x83, 0x60, 0xFF, 0x51, 0x03, 0x0F, 0x42, 0x40, //
            0x83, 0x60, 0x80, 60, 0, //
            0x00, 0xFF, 0x2F, 0x00,
        ];
        b.extend(b"MTrk");
        b.extend((body.len() as u32).to_be_bytes());
        b.extend(body);
        let seq = parse_midi(&b).unwrap();
        assert_eq!(seq[0].offset, 1.5);
    }

    #[test]
    fn empty_and_truncated_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.mid");
        write_midi(&[], &p).unwrap();
        assert!(read_midi(&p).unwrap().is_empty());
        let bytes = std::fs::read(&p).unwrap();
        assert!(matches!(parse_midi(&bytes[..10]), Err(IoError::MalformedMidi(_))));
        assert!(matches!(read_midi(&dir.path().join("nope.mid")), Err(IoError::Io { .. })));
    }

    #[test]
    fn midi_round_trip_single_note() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.mid");
        write_midi(&[Note::new(60, 0.0, 0.5)], &p).unwrap();
        let back = read_midi(&p).unwrap();
        assert_eq!(back.notes(), &[Note::new(60, 0.0, 0.5).with_velocity(64)]);
    }

    #[test]
    fn midi_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let notes = random_notes(&mut rng, 1000);
        let back = parse_midi(&encode_midi(&notes).unwrap()).unwrap();
        let sorted = validate_sequence(notes).unwrap();
        assert_eq!(back.len(), sorted.len());
        // compare as multisets keyed by pitch and rounded onset tick
        let key = |n: &Note| (n.pitch, (n.onset / TICK).round() as u64, n.velocity);
        let mut a: Vec<&Note> = sorted.iter().collect();
        let mut b: Vec<&Note> = back.iter().collect();
        a.sort_by_key(|n| key(n));
        b.sort_by_key(|n| key(n));
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(key(x), key(y));
            assert!((x.onset - y.onset).abs() <= TICK);
            assert!((x.offset - y.offset).abs() <= TICK);
        }
    }

    #[test]
    fn time_formatting() {
        assert_eq!(format_time(0.0), "0.000000");
        assert_eq!(format_time(0.5), "0.500000");
        assert_eq!(format_time(12.0), "12.000000");
        assert_eq!(format_time(0.1234567891), "0.1234567891");
        for t in [0.1 + 0.2, 1e-7, 123456.789, 5e-324] {
            assert_eq!(format_time(t).parse::<f64>().unwrap(), t);
        }
    }

    #[test]
    fn csv_examples() {
        let notes = parse_note_rows("onset_sec,offset_sec,pitch,velocity\n".as_bytes()).unwrap();
        assert!(notes.is_empty());
        let notes = parse_note_rows("onset_sec,offset_sec,pitch,velocity\n0.0,0.5,60,64\n".as_bytes()).unwrap();
        assert_eq!(notes, vec![Note::new(60, 0.0, 0.5).with_velocity(64)]);
        let notes = parse_note_rows("onset_sec,offset_sec,pitch,velocity\n0.0,0.5,60,\n".as_bytes()).unwrap();
        assert_eq!(notes[0].velocity, None);
        match parse_note_rows("onset_sec,offset_sec,pitch,velocity\n0.0,0.5,60,64\n0.0,0.5,200,1\n".as_bytes()) {
            Err(IoError::MalformedCsv { line: 3, reason }) => assert!(reason.contains("pitch")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_note_rows("a,b,c,d\n".as_bytes()),
            Err(IoError::MalformedCsv { line: 1, .. })
        ));
        assert!(matches!(
            parse_note_rows("onset_sec,offset_sec,pitch,velocity\n1.0,1.0,60,\n".as_bytes()),
            Err(IoError::MalformedCsv { line: 2, .. })
        ));
        assert!(matches!(
            parse_note_rows("onset_sec,offset_sec,pitch,velocity\nx,1.0,60,\n".as_bytes()),
            Err(IoError::MalformedCsv { line: 2, .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_exact_and_keeps_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut notes = random_notes(&mut rng, 1000);
        notes[3].velocity = None;
        let mut buf = Vec::new();
        encode_notes_csv(&notes, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("onset_sec,offset_sec,pitch,velocity\n"));
        assert_eq!(parse_note_rows(buf.as_slice()).unwrap(), notes);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.csv");
        write_notes_csv(&notes, &p).unwrap();
        assert_eq!(read_notes_csv(&p).unwrap(), validate_sequence(notes).unwrap());
    }

    #[test]
    fn model_json_round_trips() {
        let m = MisalignmentModel::identity();
        assert_eq!(parse_model_json(&model_to_json(&m)).unwrap(), m);

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let data: Vec<(Vec<Note>, Vec<Note>)> = (0..2)
            .map(|_| {
                let s = random_notes(&mut rng, 30);
                let p = s
                    .iter()
                    .map(|n| {
                        let d = rng.random_range(-0.05..0.05);
                        Note::new(n.pitch, n.onset + 0.1 + d, n.offset + 0.1 + 2.0 * d.abs())
                    })
                    .collect();
                (s, p)
            })
            .collect();
        let matching = NoteMatching { matched: (0..30).map(|i| (i, i)).collect(), ..Default::default() };
        let pieces: Vec<TrainingPiece> =
            data.iter().map(|(s, p)| TrainingPiece { score: s, perf: p, matching: &matching }).collect();
        let fitted = fit_model(&pieces, DEFAULT_BINS).unwrap();
        let text = model_to_json(&fitted);
        let back = parse_model_json(&text).unwrap();
        assert_eq!(back, fitted);
        assert_eq!(model_to_json(&back), text);
    }

    #[test]
    fn model_json_errors() {
        let mut v: Value = serde_json::from_str(&model_to_json(&MisalignmentModel::identity())).unwrap();
        v.as_object_mut().unwrap().remove("y_dur_std");
        assert!(matches!(parse_model_json(&v.to_string()), Err(IoError::SchemaVersionMismatch(_))));
        v["version"] = Value::from(2);
        assert!(matches!(parse_model_json(&v.to_string()), Err(IoError::SchemaVersionMismatch(_))));
        assert!(matches!(parse_model_json("{\"version\":"), Err(IoError::MalformedJson(_))));
        let bad = model_to_json(&MisalignmentModel::identity()).replace("[\n      1.0\n    ]", "[]");
        assert!(parse_model_json(&bad).is_err());
    }
}
