use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::record::{validate_paper, validate_record, PaperRecord, ReviewRecord};
use super::CorpusError;

/// A decoded corpus line. Papers are recognised by a `body_text` field and
/// claim-set records by a `claims` field; everything else is a review.
#[derive(Clone, Debug, PartialEq)]
pub enum CorpusLine {
    Paper(PaperRecord),
    Review(ReviewRecord),
    Other(Value),
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a newline-delimited JSON file into `(line_number, value)` pairs.
/// Line numbers are 1-based; blank lines are skipped.
pub fn read_json_lines(path: &Path) -> Result<Vec<(usize, Value)>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if !value.is_object() {
            return Err(CorpusError::Parse {
                line: idx + 1,
                message: "expected a JSON object".into(),
            });
        }
        out.push((idx + 1, value));
    }
    Ok(out)
}

pub fn write_json_lines<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| CorpusError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        w.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn classify_line(line: usize, value: Value) -> Result<CorpusLine, CorpusError> {
    let parse_err = |e: serde_json::Error| CorpusError::Parse {
        line,
        message: e.to_string(),
    };
    let obj = value.as_object().expect("checked by read_json_lines");
    if obj.contains_key("body_text") {
        Ok(CorpusLine::Paper(serde_json::from_value(value).map_err(parse_err)?))
    } else if obj.contains_key("claims") {
        Ok(CorpusLine::Other(value))
    } else {
        Ok(CorpusLine::Review(serde_json::from_value(value).map_err(parse_err)?))
    }
}

/// Loads and validates a corpus file. Claim-set records interleaved in the
/// file are skipped.
pub fn load_corpus(path: &Path) -> Result<(Vec<PaperRecord>, Vec<ReviewRecord>), CorpusError> {
    let mut papers = Vec::new();
    let mut reviews = Vec::new();
    let mut paper_ids = HashSet::new();
    let mut review_ids = HashSet::new();
    for (line, value) in read_json_lines(path)? {
        match classify_line(line, value)? {
            CorpusLine::Paper(p) => {
                validate_paper(&p)?;
                if !paper_ids.insert(p.paper_id.clone()) {
                    return Err(CorpusError::DuplicateId { line, id: p.paper_id });
                }
                papers.push(p);
            }
            CorpusLine::Review(r) => {
                validate_record(&r)?;
                if !review_ids.insert(r.id.clone()) {
                    return Err(CorpusError::DuplicateId { line, id: r.id });
                }
                reviews.push(r);
            }
            CorpusLine::Other(_) => {}
        }
    }
    Ok((papers, reviews))
}

/// Writes papers first, then reviews, one JSON object per line.
pub fn save_corpus(path: &Path, papers: &[PaperRecord], reviews: &[ReviewRecord]) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |line: String| -> Result<(), CorpusError> {
        w.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))
    };
    for p in papers {
        put(serde_json::to_string(p).expect("paper serializes"))?;
    }
    for r in reviews {
        put(serde_json::to_string(r).expect("review serializes"))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
