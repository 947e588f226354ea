//! Offline audio-to-score alignment at frame and note level.
//!
//! Three pipelines live in [`align`]: SEBA (synthesize the score, compare
//! audio features with DTW), TAFE (DTW over three-valued piano rolls of the
//! score and of a transcription) and EIFE (note matching against a
//! transcription, interpolation, and SEBA refinement of unmatched notes).
//! [`misalign`] builds synthetic misaligned scores and [`eval`] scores
//! alignments.

pub mod align;
pub mod audiofeat;
pub mod budget;
pub mod dtw;
pub mod eval;
pub mod fixtures;
pub mod io;
pub mod matcher;
pub mod misalign;
pub mod model;
pub mod pianoroll;

pub use budget::{Budget, BudgetExceeded};
pub use model::{Note, NoteMatching, NoteSequence, TimeMap, WarpingPath};
