//! Construction of the AI-generated and LLM-refined review classes: job
//! enumeration, prompt assembly, generation, and artifact cleaning.

mod jobs;

pub use jobs::{build_generation_jobs, GenerationJob, JobKind, JobOutcome, SkippedPaper};

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{validate_record, CorpusError, Label, PaperRecord, ReviewRecord};
use crate::prompts::{TemplateError, TemplateSet};
use crate::providers::{ChatProvider, ProviderError};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("{0}")]
    Precondition(String),
    #[error("record {id}: {source}")]
    Provider {
        id: String,
        #[source]
        source: ProviderError,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Invalid(#[from] CorpusError),
}

pub(crate) fn model_slug(model: &str) -> String {
    model
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect()
}

/// Runs the generation prompts against a chat provider.
pub struct Generator<'a> {
    pub chat: &'a dyn ChatProvider,
    pub templates: &'a TemplateSet,
    /// Model used for the cleaning pass.
    pub clean_model: String,
}

impl<'a> Generator<'a> {
    pub fn new(chat: &'a dyn ChatProvider, templates: &'a TemplateSet, clean_model: impl Into<String>) -> Self {
        Self {
            chat,
            templates,
            clean_model: clean_model.into(),
        }
    }

    fn call(&self, id: &str, req: &crate::providers::ChatRequest) -> Result<String, GenError> {
        self.chat.chat_complete(req).map_err(|source| GenError::Provider {
            id: id.to_string(),
            source,
        })
    }

    /// Writes a full review of `paper` recommending `score`, as `model`.
    pub fn generate_ai_review(&self, paper: &PaperRecord, score: i64, model: &str) -> Result<ReviewRecord, GenError> {
        if paper.body_text.trim().is_empty() {
            return Err(GenError::Precondition(format!(
                "paper {} has no body text",
                paper.paper_id
            )));
        }
        let score_text = score.to_string();
        let req = self.templates.ai_review.request(
            &[
                ("score", score_text.as_str()),
                ("title", paper.title.as_str()),
                ("body", paper.body_text.as_str()),
            ],
            model,
        )?;
        let id = format!("ai-{}-{}-{}", paper.paper_id, score, model_slug(model));
        let text = self.call(&id, &req)?;
        let record = ReviewRecord {
            id,
            paper_id: paper.paper_id.clone(),
            venue: paper.venue.clone(),
            year: paper.year,
            rating: score,
            label: Some(Label::Ai),
            text,
            generator_model: Some(model.to_string()),
            source_review_id: None,
        };
        validate_record(&record)?;
        Ok(record)
    }

    /// Rewrites a human review for polish without changing its content.
    pub fn refine_review(&self, human: &ReviewRecord, model: &str) -> Result<ReviewRecord, GenError> {
        if human.label != Some(Label::Human) {
            return Err(GenError::Precondition(format!(
                "review {} is not human-written; only human reviews can be refined",
                human.id
            )));
        }
        let req = self
            .templates
            .refine_review
            .request(&[("review", human.text.as_str())], model)?;
        let id = format!("refined-{}-{}", human.id, model_slug(model));
        let text = self.call(&id, &req)?;
        let record = ReviewRecord {
            id,
            label: Some(Label::Refined),
            text,
            generator_model: Some(model.to_string()),
            source_review_id: Some(human.id.clone()),
            ..human.clone()
        };
        validate_record(&record)?;
        Ok(record)
    }

    /// Strips generation preambles and formatting from a generated review.
    pub fn clean_review(&self, review: &ReviewRecord) -> Result<ReviewRecord, GenError> {
        if !matches!(review.label, Some(Label::Ai) | Some(Label::Refined)) {
            return Err(GenError::Precondition(format!(
                "review {} is not generated; only AI or refined reviews are cleaned",
                review.id
            )));
        }
        let req = self
            .templates
            .clean_review
            .request(&[("review", review.text.as_str())], &self.clean_model)?;
        let text = self.call(&review.id, &req)?;
        Ok(ReviewRecord {
            text: text.trim().to_string(),
            ..review.clone()
        })
    }

    /// Executes one job; generated text is cleaned before it is returned.
    pub fn run_job(
        &self,
        job: &GenerationJob,
        papers: &HashMap<&str, &PaperRecord>,
        reviews: &HashMap<&str, &ReviewRecord>,
    ) -> Result<ReviewRecord, GenError> {
        let source = || -> Result<&ReviewRecord, GenError> {
            let id = job
                .source_review_id
                .as_deref()
                .ok_or_else(|| GenError::Precondition("job without source review".into()))?;
            reviews
                .get(id)
                .copied()
                .ok_or_else(|| GenError::Precondition(format!("unknown source review {id}")))
        };
        match job.job_kind {
            JobKind::FullAi => {
                let paper = papers
                    .get(job.paper_id.as_str())
                    .ok_or_else(|| GenError::Precondition(format!("unknown paper {}", job.paper_id)))?;
                let raw = self.generate_ai_review(paper, job.target_score, &job.generator_model)?;
                self.clean_review(&raw)
            }
            JobKind::Refine => {
                let raw = self.refine_review(source()?, &job.generator_model)?;
                self.clean_review(&raw)
            }
            JobKind::Clean => self.clean_review(source()?),
        }
    }

    /// Runs jobs in parallel, skipping those whose output id is in `done`.
    /// Outcomes come back in job order.
    pub fn run_jobs(
        &self,
        jobs: &[GenerationJob],
        papers: &[PaperRecord],
        reviews: &[ReviewRecord],
        done: &HashSet<String>,
    ) -> Vec<JobOutcome> {
        let papers: HashMap<&str, &PaperRecord> = papers.iter().map(|p| (p.paper_id.as_str(), p)).collect();
        let reviews: HashMap<&str, &ReviewRecord> = reviews.iter().map(|r| (r.id.as_str(), r)).collect();
        jobs.par_iter()
            .filter(|j| !done.contains(&j.output_id()))
            .map(|job| JobOutcome {
                job: job.clone(),
                result: self.run_job(job, &papers, &reviews),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::stub::{strip_generation_artifacts, ScriptedChat, StubChat};

    fn paper() -> PaperRecord {
        PaperRecord {
            paper_id: "p1".into(),
            venue: "ICLR".into(),
            year: 2024,
            title: "Sparse Attention for Long Documents".into(),
            body_text: "We propose a sparse attention scheme.".into(),
            human_ratings: vec![6, 6, 8],
        }
    }

    fn human() -> ReviewRecord {
        ReviewRecord {
            id: "h1".into(),
            paper_id: "p1".into(),
            venue: "ICLR".into(),
            year: 2024,
            rating: 6,
            label: Some(Label::Human),
            text: "I think the idea is good. The evaluation isn't thorough.".into(),
            generator_model: None,
            source_review_id: None,
        }
    }

    #[test]
    fn prompt_contains_score_exactly_once() {
        let t = TemplateSet::builtin();
        let chat = ScriptedChat::new([Ok("A review.".to_string())]);
        Generator::new(&chat, &t, "cleaner")
            .generate_ai_review(&paper(), 6, "gemini")
            .unwrap();
        let req = &chat.requests()[0];
        let all = format!("{}\n{}", req.system_prompt, req.user_prompt);
        assert_eq!(all.matches("\"6\"").count(), 1);
        assert!(!all.contains("{score}"));
        assert_eq!(req.temperature, 1.0);
        assert_eq!(req.max_tokens, 3072);
        assert_eq!(req.model_name, "gemini");
    }

    #[test]
    fn two_scores_differ_only_in_the_slot() {
        let t = TemplateSet::builtin();
        let chat = ScriptedChat::new([Ok("x".to_string()), Ok("y".to_string())]);
        let g = Generator::new(&chat, &t, "cleaner");
        g.generate_ai_review(&paper(), 3, "m").unwrap();
        g.generate_ai_review(&paper(), 8, "m").unwrap();
        let reqs = chat.requests();
        assert_eq!(reqs[0].user_prompt, reqs[1].user_prompt);
        let (a, b) = (&reqs[0].system_prompt, &reqs[1].system_prompt);
        assert_eq!(a.len(), b.len());
        let diffs: Vec<usize> = a
            .bytes()
            .zip(b.bytes())
            .enumerate()
            .filter(|(_, (x, y))| x != y)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(diffs.len(), 1);
        let slot = t.ai_review.system.find("{score}").unwrap();
        assert_eq!(diffs[0], slot);
        assert_eq!(&a[slot..slot + 1], "3");
        assert_eq!(&b[slot..slot + 1], "8");
    }

    #[test]
    fn stub_generation_is_deterministic_and_labeled() {
        let t = TemplateSet::builtin();
        let chat = StubChat::new(0);
        let g = Generator::new(&chat, &t, "cleaner");
        let a = g.generate_ai_review(&paper(), 6, "m1").unwrap();
        let b = g.generate_ai_review(&paper(), 6, "m1").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.label, Some(Label::Ai));
        assert_eq!(a.generator_model.as_deref(), Some("m1"));
        assert_eq!(a.rating, 6);
    }

    #[test]
    fn empty_body_is_rejected() {
        let t = TemplateSet::builtin();
        let chat = StubChat::new(0);
        let mut p = paper();
        p.body_text = " ".into();
        assert!(matches!(
            Generator::new(&chat, &t, "c").generate_ai_review(&p, 6, "m"),
            Err(GenError::Precondition(_))
        ));
    }

    #[test]
    fn refine_contract() {
        let t = TemplateSet::builtin();
        let chat = StubChat::new(0);
        let g = Generator::new(&chat, &t, "c");
        let r = g.refine_review(&human(), "m2").unwrap();
        assert_eq!(r.label, Some(Label::Refined));
        assert_eq!(r.source_review_id.as_deref(), Some("h1"));
        assert_eq!(r.generator_model.as_deref(), Some("m2"));
        assert_eq!(
            r.text,
            "In my assessment, the idea is strong. The evaluation is not thorough."
        );

        let scripted = ScriptedChat::new([Ok("polished".to_string())]);
        Generator::new(&scripted, &t, "c").refine_review(&human(), "m").unwrap();
        let req = &scripted.requests()[0];
        assert_eq!(req.temperature, 0.8);
        assert_eq!(req.max_tokens, 3072);
        assert!(req.user_prompt.starts_with("Here is the review to rewrite: I think"));

        let ai = g.generate_ai_review(&paper(), 6, "m").unwrap();
        assert!(matches!(g.refine_review(&ai, "m"), Err(GenError::Precondition(_))));
    }

    #[test]
    fn four_models_give_four_distinct_refinements() {
        let t = TemplateSet::builtin();
        let chat = StubChat::new(0);
        let g = Generator::new(&chat, &t, "c");
        let models = ["a", "b", "c", "d"];
        let out: Vec<ReviewRecord> = models.iter().map(|m| g.refine_review(&human(), m).unwrap()).collect();
        let gens: HashSet<_> = out.iter().map(|r| r.generator_model.clone().unwrap()).collect();
        assert_eq!(out.len(), 4);
        assert_eq!(gens.len(), 4);
        assert!(out.iter().all(|r| r.source_review_id.as_deref() == Some("h1")));
        let ids: HashSet<_> = out.iter().map(|r| r.id.clone()).collect();
        assert_eq!(ids.len(), 4);
    }

    #[test]
    fn cleaning() {
        let t = TemplateSet::builtin();
        let chat = StubChat::new(0);
        let g = Generator::new(&chat, &t, "cleaner");
        let mut ai = g.generate_ai_review(&paper(), 6, "m").unwrap();
        ai.text = "The method is sound. The evaluation is weak.".into();
        assert_eq!(g.clean_review(&ai).unwrap().text, ai.text);

        let body = "The method is sound.";
        ai.text = format!("Here is the review of the paper \"Sparse Attention\":\n{body}");
        let cleaned = g.clean_review(&ai).unwrap();
        assert_eq!(cleaned.text, strip_generation_artifacts(&ai.text));
        assert_eq!(cleaned.text, body);
        assert_eq!((cleaned.id.as_str(), cleaned.label), (ai.id.as_str(), ai.label));

        assert!(matches!(g.clean_review(&human()), Err(GenError::Precondition(_))));
    }

    #[test]
    fn provider_failure_is_propagated_with_id() {
        let t = TemplateSet::builtin();
        let chat = ScriptedChat::new([Err(ProviderError::Auth("denied".into()))]);
        match Generator::new(&chat, &t, "c").generate_ai_review(&paper(), 6, "m") {
            Err(GenError::Provider { id, source }) => {
                assert_eq!(id, "ai-p1-6-m");
                assert!(matches!(source, ProviderError::Auth(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn run_jobs_produces_valid_records_in_order_and_resumes() {
        let t = TemplateSet::builtin();
        let chat = StubChat::new(0);
        let g = Generator::new(&chat, &t, "cleaner");
        let papers = vec![paper()];
        let reviews = vec![human()];
        let (jobs, skipped) = build_generation_jobs(&papers, &reviews, &["m1".into(), "m2".into()]);
        assert!(skipped.is_empty());
        let outcomes = g.run_jobs(&jobs, &papers, &reviews, &HashSet::new());
        assert_eq!(outcomes.len(), jobs.len());
        for (o, j) in outcomes.iter().zip(&jobs) {
            assert_eq!(&o.job, j);
            let rec = o.result.as_ref().unwrap();
            validate_record(rec).unwrap();
            assert_eq!(rec.id, j.output_id());
            assert!(!rec.text.to_lowercase().starts_with("here is"));
        }
        let done: HashSet<String> = jobs[..2].iter().map(|j| j.output_id()).collect();
        assert_eq!(g.run_jobs(&jobs, &papers, &reviews, &done).len(), jobs.len() - 2);
    }
}
