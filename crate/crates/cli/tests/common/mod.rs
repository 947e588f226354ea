#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use scorealign::fixtures::{humanize, piano_piece, Humanize};
use scorealign::io::write_notes_csv;
use scorealign::Note;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scorealign"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn write(notes: &[Note], path: &Path) {
    write_notes_csv(notes, path).unwrap();
}

/// `count` humanized score/performance pairs in `scores/` and `perfs/`.
pub fn training_dirs(root: &Path, count: u64, notes: usize) {
    let h = Humanize { shift_mean: 0.05, onset_std: 0.02, duration_std: 0.1, tempo_range: 0.0 };
    for dir in ["scores", "perfs"] {
        std::fs::create_dir_all(root.join(dir)).unwrap();
    }
    for k in 0..count {
        let score = piano_piece(notes, 1000 + k);
        write(&score, &root.join(format!("scores/p{k:02}.csv")));
        write(&humanize(&score, &h, 2000 + k), &root.join(format!("perfs/p{k:02}.csv")));
    }
}

/// A piece lasting well past ten minutes; piano-roll DTW over it takes
/// several seconds.
pub fn long_piece() -> Vec<Note> {
    piano_piece(2400, 77)
}
