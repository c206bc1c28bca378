//! Bank, map and report files on disk.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use spacerace_core::question::{load_bank, save_bank, BankError, QuestionBank};
use spacerace_core::world::{load_map, MapError, WorldMap};
use spacerace_core::Report;

/// Map name that resolves to the bundled map without touching disk.
pub const DEFAULT_MAP: &str = "default";

#[derive(Debug, thiserror::Error)]
pub enum LibraryError {
    #[error("no bank named {0:?}")]
    BankNotFound(String),
    #[error("no map named {0:?}")]
    MapNotFound(String),
    #[error("names may only use letters, digits, '-' and '_' (1 to 64 characters): {0:?}")]
    InvalidName(String),
    #[error("bank {name:?}: {source}")]
    Bank { name: String, source: BankError },
    #[error("map {name:?}: {source}")]
    Map { name: String, source: MapError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, thiserror::Error)]
#[error("{}: {reason}", path.display())]
pub struct DirectoryError {
    pub path: PathBuf,
    pub reason: String,
}

/// Creates `dir` if needed and proves it is writable by writing a probe file.
pub fn ensure_writable_dir(dir: &Path) -> Result<(), DirectoryError> {
    let fail = |reason: String| DirectoryError { path: dir.to_path_buf(), reason };
    fs::create_dir_all(dir).map_err(|e| fail(e.to_string()))?;
    if !dir.is_dir() {
        return Err(fail("not a directory".into()));
    }
    let probe = dir.join(".spacerace-write-probe");
    fs::write(&probe, b"").map_err(|e| fail(format!("not writable: {e}")))?;
    fs::remove_file(&probe).map_err(|e| fail(format!("not writable: {e}")))?;
    Ok(())
}

fn check_name(name: &str) -> Result<(), LibraryError> {
    let ok =
        (1..=64).contains(&name.len()) && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
    if ok {
        Ok(())
    } else {
        Err(LibraryError::InvalidName(name.into()))
    }
}

pub fn report_file_name(game_code: &str, ended_at_millis: u64) -> String {
    format!("{game_code}-{ended_at_millis}.report.json")
}

/// Writes through a temporary sibling so readers never see half a file.
fn write_atomically(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

#[derive(Debug, Clone)]
pub struct Library {
    banks: PathBuf,
    maps: PathBuf,
    reports: PathBuf,
}

impl Library {
    pub fn open(banks: &Path, maps: &Path, reports: &Path) -> Result<Self, DirectoryError> {
        for dir in [banks, maps, reports] {
            ensure_writable_dir(dir)?;
        }
        Ok(Self { banks: banks.into(), maps: maps.into(), reports: reports.into() })
    }

    pub fn reports_dir(&self) -> &Path {
        &self.reports
    }

    pub fn bank_path(&self, name: &str) -> Result<PathBuf, LibraryError> {
        check_name(name)?;
        Ok(self.banks.join(format!("{name}.json")))
    }

    pub fn load_bank(&self, name: &str) -> Result<QuestionBank, LibraryError> {
        let path = self.bank_path(name)?;
        let bytes = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(LibraryError::BankNotFound(name.into())),
            Err(source) => return Err(LibraryError::Io { path, source }),
        };
        load_bank(&bytes).map_err(|source| LibraryError::Bank { name: name.into(), source })
    }

    pub fn save_bank(&self, name: &str, bank: &QuestionBank) -> Result<PathBuf, LibraryError> {
        let path = self.bank_path(name)?;
        let bytes = save_bank(bank).map_err(|source| LibraryError::Bank { name: name.into(), source })?;
        write_atomically(&path, &bytes).map_err(|source| LibraryError::Io { path: path.clone(), source })?;
        Ok(path)
    }

    pub fn load_map(&self, name: &str) -> Result<WorldMap, LibraryError> {
        if name == DEFAULT_MAP {
            return Ok(WorldMap::default_map());
        }
        check_name(name)?;
        let path = self.maps.join(format!("{name}.json"));
        let bytes = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(LibraryError::MapNotFound(name.into())),
            Err(source) => return Err(LibraryError::Io { path, source }),
        };
        load_map(&bytes).map_err(|source| LibraryError::Map { name: name.into(), source })
    }

    /// Writes `<gameCode>-<endedAtMillis>.report.json`. A report is final, so
    /// an existing file with the same bytes is left alone.
    pub fn persist_report(&self, game_code: &str, report: &Report) -> Result<PathBuf, LibraryError> {
        let path = self.reports.join(report_file_name(game_code, report.ended_at_millis));
        let bytes = report.to_canonical_bytes();
        if fs::read(&path).is_ok_and(|existing| existing == bytes) {
            return Ok(path);
        }
        write_atomically(&path, &bytes).map_err(|source| LibraryError::Io { path: path.clone(), source })?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use spacerace_core::question::{Question, QuestionBody};

    fn bank() -> QuestionBank {
        QuestionBank::new(
            "tiny",
            vec![Question {
                id: "q1".into(),
                prompt: "Two plus two?".into(),
                body: QuestionBody::Numeric { answer: 4.0, tolerance: 0.0 },
            }],
        )
    }

    fn library(root: &Path) -> Library {
        Library::open(&root.join("banks"), &root.join("maps"), &root.join("reports")).unwrap()
    }

    #[test]
    fn banks_round_trip_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let lib = library(dir.path());
        lib.save_bank("tiny", &bank()).unwrap();
        assert_eq!(lib.load_bank("tiny").unwrap(), bank());
        assert!(matches!(lib.load_bank("missing"), Err(LibraryError::BankNotFound(_))));
        assert!(matches!(lib.load_bank("../etc/passwd"), Err(LibraryError::InvalidName(_))));
    }

    #[test]
    fn default_map_needs_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let lib = library(dir.path());
        assert_eq!(lib.load_map(DEFAULT_MAP).unwrap(), WorldMap::default_map());
        assert!(matches!(lib.load_map("moon"), Err(LibraryError::MapNotFound(_))));
    }

    #[test]
    fn file_in_place_of_directory_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, b"x").unwrap();
        assert!(ensure_writable_dir(&file).is_err());
    }
}
