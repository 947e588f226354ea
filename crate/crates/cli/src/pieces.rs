//! Directory batches: pieces are files that share a stem across folders.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const NOTE_EXTENSIONS: [&str; 3] = ["csv", "mid", "midi"];
pub const AUDIO_EXTENSIONS: [&str; 1] = ["wav"];

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase)
}

/// Files in `dir` with one of `extensions`, keyed and sorted by stem. When a
/// stem has several candidates the earliest extension in the list wins.
pub fn list(dir: &Path, extensions: &[&str]) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
    let mut found: BTreeMap<String, (usize, PathBuf)> = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?.path();
        if !path.is_file() {
            continue;
        }
        let Some(rank) = extension(&path).and_then(|e| extensions.iter().position(|x| *x == e)) else {
            continue;
        };
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
            continue;
        };
        match found.get(&stem) {
            Some((r, _)) if *r <= rank => {}
            _ => {
                found.insert(stem, (rank, path));
            }
        }
    }
    Ok(found.into_iter().map(|(k, (_, p))| (k, p)).collect())
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_by_stem_with_extension_priority() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b.mid", "a.csv", "a.mid", "c.txt", "d.MIDI"] {
            std::fs::write(dir.path().join(name), b"").unwrap();
        }
        let found = list(dir.path(), &NOTE_EXTENSIONS).unwrap();
        let names: Vec<_> = found.keys().cloned().collect();
        assert_eq!(names, ["a", "b", "d"]);
        assert!(found["a"].ends_with("a.csv"));
    }
}
