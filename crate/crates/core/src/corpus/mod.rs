//! Review and paper records, the newline-delimited corpus format, and
//! paper-level train/test splitting.

mod io;
mod record;
mod split;

pub use io::{load_corpus, read_json_lines, save_corpus, write_json_lines, CorpusLine};
pub use record::{validate_paper, validate_record, Label, PaperRecord, ReviewRecord};
pub use split::{assign_groups, split_paper_level, CorpusSplit, GroupCounts, MAX_CLASS_DEVIATION};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("record {id}: {reason}")]
    Validation { id: String, reason: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("split: {0}")]
    Split(String),
}
