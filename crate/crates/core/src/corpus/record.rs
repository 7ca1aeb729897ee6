use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Authorship class of a review. The discriminants are the classifier's
/// class indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Human = 0,
    Refined = 1,
    Ai = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Human, Label::Refined, Label::Ai];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Human => "human",
            Label::Refined => "refined",
            Label::Ai => "ai",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "human" => Ok(Label::Human),
            "refined" => Ok(Label::Refined),
            "ai" => Ok(Label::Ai),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// One peer review. `label == None` marks an unlabeled review.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewRecord {
    pub id: String,
    pub paper_id: String,
    pub venue: String,
    pub year: i32,
    pub rating: i64,
    pub label: Option<Label>,
    pub text: String,
    pub generator_model: Option<String>,
    pub source_review_id: Option<String>,
}

impl ReviewRecord {
    pub fn is_ai(&self) -> bool {
        self.label == Some(Label::Ai)
    }
}

/// A submitted paper with its parsed full text and the human reviewers'
/// scores.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaperRecord {
    pub paper_id: String,
    pub venue: String,
    pub year: i32,
    pub title: String,
    pub body_text: String,
    pub human_ratings: Vec<i64>,
}

impl PaperRecord {
    /// Distinct human scores in ascending order.
    pub fn distinct_ratings(&self) -> Vec<i64> {
        let mut r = self.human_ratings.clone();
        r.sort_unstable();
        r.dedup();
        r
    }

    /// Lower median of the human scores.
    pub fn median_rating(&self) -> Option<i64> {
        if self.human_ratings.is_empty() {
            return None;
        }
        let mut r = self.human_ratings.clone();
        r.sort_unstable();
        Some(r[(r.len() - 1) / 2])
    }
}

fn invalid(id: &str, reason: impl Into<String>) -> CorpusError {
    CorpusError::Validation {
        id: id.to_string(),
        reason: reason.into(),
    }
}

pub fn validate_record(review: &ReviewRecord) -> Result<(), CorpusError> {
    if review.id.trim().is_empty() {
        return Err(invalid(&review.id, "empty id"));
    }
    if review.paper_id.trim().is_empty() {
        return Err(invalid(&review.id, "empty paper_id"));
    }
    if review.text.trim().is_empty() {
        return Err(invalid(&review.id, "review text is empty"));
    }
    match review.label {
        Some(Label::Refined) if review.source_review_id.is_none() => {
            Err(invalid(&review.id, "refined review without source_review_id"))
        }
        Some(Label::Ai) if review.generator_model.is_none() => {
            Err(invalid(&review.id, "AI review without generator_model"))
        }
        _ => Ok(()),
    }
}

pub fn validate_paper(paper: &PaperRecord) -> Result<(), CorpusError> {
    if paper.paper_id.trim().is_empty() {
        return Err(invalid(&paper.paper_id, "empty paper_id"));
    }
    Ok(())
}
