//! Atomic claims extracted from review text: the category model, the
//! headed-bullet output grammar, extraction through a chat provider, and
//! filtering to the evaluative categories.

mod extract;
mod parse;

pub use extract::{extract_claims, load_claim_sets, save_claim_sets, ExtractionSettings, StoredClaimSet};
pub use parse::{parse_claim_output, render_claims};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::providers::{EmbeddingVector, ProviderError};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClaimError {
    #[error("line {line}: bullet before any category heading")]
    BulletBeforeHeading { line: usize },
    #[error("line {line}: unknown category heading {heading:?}")]
    UnknownHeading { line: usize, heading: String },
    #[error("line {line}: empty bullet")]
    EmptyBullet { line: usize },
    #[error("line {line}: indented continuation outside a bullet")]
    OrphanContinuation { line: usize },
    #[error("review {review_id}: cannot extract claims from empty text")]
    EmptyReview { review_id: String },
    #[error("review {review_id}: unparseable extraction output ({reason})")]
    Extraction {
        review_id: String,
        reason: String,
        raw: String,
    },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimCategory {
    FactualRestatement,
    Evaluation,
    ConstructiveInput,
    ClarificationDialogue,
    MetaCommentary,
}

impl ClaimCategory {
    pub const ALL: [ClaimCategory; 5] = [
        ClaimCategory::FactualRestatement,
        ClaimCategory::Evaluation,
        ClaimCategory::ConstructiveInput,
        ClaimCategory::ClarificationDialogue,
        ClaimCategory::MetaCommentary,
    ];

    pub fn heading(self) -> &'static str {
        match self {
            ClaimCategory::FactualRestatement => "Factual Restatement",
            ClaimCategory::Evaluation => "Evaluation",
            ClaimCategory::ConstructiveInput => "Constructive Input",
            ClaimCategory::ClarificationDialogue => "Clarification Dialogue",
            ClaimCategory::MetaCommentary => "Meta-Commentary",
        }
    }

    /// Categories that carry the reviewer's own judgement.
    pub fn is_evaluative(self) -> bool {
        matches!(
            self,
            ClaimCategory::Evaluation | ClaimCategory::ConstructiveInput | ClaimCategory::ClarificationDialogue
        )
    }
}

impl fmt::Display for ClaimCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.heading())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Claim<T = f64> {
    pub text: String,
    pub category: ClaimCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingVector<T>>,
}

impl<T> Claim<T> {
    pub fn new(category: ClaimCategory, text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            category,
            embedding: None,
        }
    }
}

/// Claims of one review in extraction order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClaimSet<T = f64> {
    pub review_id: String,
    pub claims: Vec<Claim<T>>,
}

impl<T: Clone> ClaimSet<T> {
    pub fn len(&self) -> usize {
        self.claims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.claims.is_empty()
    }

    pub fn count(&self, category: ClaimCategory) -> usize {
        self.claims.iter().filter(|c| c.category == category).count()
    }
}

/// Keeps the evaluation, constructive-input and clarification-dialogue
/// claims, in their original order.
pub fn filter_evaluative<T: Clone>(set: &ClaimSet<T>) -> ClaimSet<T> {
    ClaimSet {
        review_id: set.review_id.clone(),
        claims: set
            .claims
            .iter()
            .filter(|c| c.category.is_evaluative())
            .cloned()
            .collect(),
    }
}
