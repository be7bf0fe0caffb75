//! File formats: scenario, model and certificate JSON, trace CSV/JSON and
//! SVG plots.

pub mod scenario;
pub mod svg;
pub mod traces;

use std::path::{Path, PathBuf};

use thiserror::Error;

/// Every file format carries this version in its `schema` field.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation failed: {0}")]
    Validation(String),
}

impl IoError {
    pub(crate) fn parse(e: serde_json::Error) -> Self {
        IoError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }

    pub(crate) fn csv(e: csv::Error) -> Self {
        let line = e.position().map_or(0, |p| p.line() as usize);
        IoError::Parse {
            line,
            column: 0,
            message: e.to_string(),
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })
}
