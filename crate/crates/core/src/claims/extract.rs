use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse_claim_output, Claim, ClaimError, ClaimSet};
use crate::corpus::{read_json_lines, write_json_lines, CorpusError, ReviewRecord};
use crate::prompts::PromptTemplate;
use crate::providers::ChatProvider;

/// Appended to the user prompt when the first completion does not parse.
pub const FORMAT_REMINDER: &str = "\n\nReminder: answer only with the five category names, each on its own line, \
each followed by bullet points that start with \"- \". Do not write anything else.";

#[derive(Clone, Debug)]
pub struct ExtractionSettings {
    pub template: PromptTemplate,
    pub model: String,
}

/// Extracts categorized claims from one review. A completion that does not
/// follow the grammar is retried once with a format reminder.
pub fn extract_claims(
    review: &ReviewRecord,
    chat: &dyn ChatProvider,
    settings: &ExtractionSettings,
) -> Result<ClaimSet, ClaimError> {
    if review.text.trim().is_empty() {
        return Err(ClaimError::EmptyReview {
            review_id: review.id.clone(),
        });
    }
    let mut request = settings
        .template
        .request(&[("review", review.text.as_str())], &settings.model)
        .map_err(|e| ClaimError::Extraction {
            review_id: review.id.clone(),
            reason: e.to_string(),
            raw: String::new(),
        })?;
    let raw = chat.chat_complete(&request)?;
    let claims = match parse_claim_output(&raw) {
        Ok(c) => c,
        Err(first) => {
            log::info!("review {}: claim output did not parse ({first}); retrying", review.id);
            request.user_prompt.push_str(FORMAT_REMINDER);
            let raw = chat.chat_complete(&request)?;
            parse_claim_output(&raw).map_err(|e| ClaimError::Extraction {
                review_id: review.id.clone(),
                reason: e.to_string(),
                raw,
            })?
        }
    };
    Ok(ClaimSet {
        review_id: review.id.clone(),
        claims,
    })
}

/// On-disk claim record: `{"review_id": ..., "claims": [{"text", "category"}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredClaimSet {
    pub review_id: String,
    pub claims: Vec<Claim>,
}

pub fn save_claim_sets(path: &Path, sets: &[ClaimSet]) -> Result<(), CorpusError> {
    let stored: Vec<StoredClaimSet> = sets
        .iter()
        .map(|s| StoredClaimSet {
            review_id: s.review_id.clone(),
            claims: s
                .claims
                .iter()
                .map(|c| Claim::new(c.category, c.text.clone()))
                .collect(),
        })
        .collect();
    write_json_lines(path, &stored)
}

/// Reads claim records from a file; other record kinds are skipped, so a
/// corpus file with appended claim records can be passed directly.
pub fn load_claim_sets(path: &Path) -> Result<Vec<ClaimSet>, CorpusError> {
    let mut out = Vec::new();
    for (line, value) in read_json_lines(path)? {
        if value.get("claims").is_none() {
            continue;
        }
        let s: StoredClaimSet = serde_json::from_value(value).map_err(|e| CorpusError::Parse {
            line,
            message: e.to_string(),
        })?;
        out.push(ClaimSet {
            review_id: s.review_id,
            claims: s.claims,
        });
    }
    Ok(out)
}
