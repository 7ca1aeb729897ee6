use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{model_slug, GenError};
use crate::corpus::{Label, PaperRecord, ReviewRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    FullAi,
    Refine,
    Clean,
}

/// One unit of generation work. Serialized one per line in the job manifest.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenerationJob {
    pub paper_id: String,
    pub target_score: i64,
    pub generator_model: String,
    pub job_kind: JobKind,
    pub source_review_id: Option<String>,
}

impl GenerationJob {
    /// Id of the record this job produces.
    pub fn output_id(&self) -> String {
        match (self.job_kind, &self.source_review_id) {
            (JobKind::FullAi, _) => format!(
                "ai-{}-{}-{}",
                self.paper_id,
                self.target_score,
                model_slug(&self.generator_model)
            ),
            (JobKind::Refine, Some(src)) => format!("refined-{}-{}", src, model_slug(&self.generator_model)),
            (JobKind::Clean, Some(src)) => src.clone(),
            (_, None) => String::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedPaper {
    pub paper_id: String,
    pub reason: String,
}

#[derive(Debug)]
pub struct JobOutcome {
    pub job: GenerationJob,
    pub result: Result<ReviewRecord, GenError>,
}

/// Enumerates one full-AI job per (paper, distinct human score, model) and
/// one refinement job per (human review, model). Papers without human scores
/// are skipped and reported.
pub fn build_generation_jobs(
    papers: &[PaperRecord],
    reviews: &[ReviewRecord],
    models: &[String],
) -> (Vec<GenerationJob>, Vec<SkippedPaper>) {
    let mut jobs = Vec::new();
    let mut skipped = Vec::new();
    let models: Vec<&String> = {
        let mut seen = BTreeSet::new();
        models.iter().filter(|m| seen.insert(m.as_str())).collect()
    };
    for paper in papers {
        let scores = paper.distinct_ratings();
        if scores.is_empty() {
            log::warn!("paper {} has no human ratings; skipped", paper.paper_id);
            skipped.push(SkippedPaper {
                paper_id: paper.paper_id.clone(),
                reason: "no human ratings".into(),
            });
            continue;
        }
        for score in scores {
            for m in &models {
                jobs.push(GenerationJob {
                    paper_id: paper.paper_id.clone(),
                    target_score: score,
                    generator_model: (*m).clone(),
                    job_kind: JobKind::FullAi,
                    source_review_id: None,
                });
            }
        }
    }
    for r in reviews.iter().filter(|r| r.label == Some(Label::Human)) {
        for m in &models {
            jobs.push(GenerationJob {
                paper_id: r.paper_id.clone(),
                target_score: r.rating,
                generator_model: (*m).clone(),
                job_kind: JobKind::Refine,
                source_review_id: Some(r.id.clone()),
            });
        }
    }
    (jobs, skipped)
}
