use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use parking_lot::Mutex;
use rayon::prelude::*;

use super::{
    pair_references, textual_features, FeatureConfig, FeatureError, FeatureRecord, FeatureVector, SimilarityProfile,
    TextualFeatures,
};
use crate::claims::{extract_claims, filter_evaluative, ClaimSet, ExtractionSettings};
use crate::corpus::{Label, PaperRecord, ReviewRecord};
use crate::genpipeline::Generator;
use crate::prompts::TemplateSet;
use crate::providers::{ChatProvider, Embedder, TokenScorer};

#[derive(Clone)]
pub struct ProviderSet {
    pub chat: Arc<dyn ChatProvider>,
    pub embedder: Arc<dyn Embedder>,
    pub scorer: Arc<dyn TokenScorer>,
}

/// Output of [`Featurizer::featurize_review`].
#[derive(Clone, Debug)]
pub struct FeaturizedReview {
    pub record: FeatureRecord,
    /// Reference reviews generated on demand for this target.
    pub generated: Vec<ReviewRecord>,
}

struct ProcessedClaims {
    /// Evaluative claims with embeddings.
    filtered: ClaimSet<f64>,
    total: usize,
}

/// Runs extract, filter, embed, pair, and score for reviews, caching the
/// per-review claim work so shared references are processed once.
pub struct Featurizer {
    providers: ProviderSet,
    templates: TemplateSet,
    pub config: FeatureConfig,
    pub extraction_model: String,
    /// Models used when references must be generated on demand.
    pub generation_models: Vec<String>,
    pub clean_model: String,
    pub generate_on_demand: bool,
    extracted: Mutex<HashMap<String, ClaimSet<f64>>>,
    processed: Mutex<HashMap<String, Arc<ProcessedClaims>>>,
    generated: Mutex<BTreeMap<String, ReviewRecord>>,
}

impl Featurizer {
    pub fn new(providers: ProviderSet, templates: TemplateSet, config: FeatureConfig) -> Self {
        Self {
            providers,
            templates,
            config,
            extraction_model: "extractor".into(),
            generation_models: Vec::new(),
            clean_model: "cleaner".into(),
            generate_on_demand: false,
            extracted: Mutex::new(HashMap::new()),
            processed: Mutex::new(HashMap::new()),
            generated: Mutex::new(BTreeMap::new()),
        }
    }

    /// Seeds the claim cache with previously extracted claim sets.
    pub fn preload_claims(&self, sets: impl IntoIterator<Item = ClaimSet<f64>>) {
        let mut cache = self.extracted.lock();
        for s in sets {
            cache.insert(s.review_id.clone(), s);
        }
    }

    /// Claims extracted so far, sorted by review id.
    pub fn extracted_claims(&self) -> Vec<ClaimSet<f64>> {
        let mut v: Vec<_> = self.extracted.lock().values().cloned().collect();
        v.sort_by(|a, b| a.review_id.cmp(&b.review_id));
        v
    }

    /// All references generated on demand so far, sorted by id.
    pub fn generated_references(&self) -> Vec<ReviewRecord> {
        self.generated.lock().values().cloned().collect()
    }

    /// Extracts (or fetches cached) claims for one review.
    pub fn extract(&self, review: &ReviewRecord) -> Result<ClaimSet<f64>, FeatureError> {
        if let Some(s) = self.extracted.lock().get(&review.id) {
            return Ok(s.clone());
        }
        let settings = ExtractionSettings {
            template: self.templates.extract_claims.clone(),
            model: self.extraction_model.clone(),
        };
        let set = extract_claims(review, self.providers.chat.as_ref(), &settings).map_err(|source| {
            FeatureError::Extract {
                review_id: review.id.clone(),
                source,
            }
        })?;
        self.extracted.lock().insert(review.id.clone(), set.clone());
        Ok(set)
    }

    fn processed(&self, review: &ReviewRecord) -> Result<Arc<ProcessedClaims>, FeatureError> {
        if let Some(p) = self.processed.lock().get(&review.id) {
            return Ok(p.clone());
        }
        let all = self.extract(review)?;
        let mut filtered = filter_evaluative(&all);
        if !filtered.is_empty() {
            let texts: Vec<String> = filtered.claims.iter().map(|c| c.text.clone()).collect();
            let vectors = self
                .providers
                .embedder
                .embed_batch(&texts)
                .map_err(|source| FeatureError::Embed {
                    review_id: review.id.clone(),
                    source,
                })?;
            for (c, v) in filtered.claims.iter_mut().zip(vectors) {
                c.embedding = Some(v);
            }
        }
        let p = Arc::new(ProcessedClaims {
            filtered,
            total: all.len(),
        });
        self.processed.lock().insert(review.id.clone(), p.clone());
        Ok(p)
    }

    fn pair(
        &self,
        target: &ReviewRecord,
        paper: Option<&PaperRecord>,
        corpus: &[ReviewRecord],
    ) -> Result<(Vec<ReviewRecord>, Vec<ReviewRecord>), FeatureError> {
        let k = self.config.k_refs;
        let mut candidates: Vec<ReviewRecord> = corpus
            .iter()
            .filter(|r| r.paper_id == target.paper_id && r.is_ai())
            .cloned()
            .collect();
        {
            let known: HashSet<String> = candidates.iter().map(|r| r.id.clone()).collect();
            let generated = self.generated.lock();
            candidates.extend(
                generated
                    .values()
                    .filter(|r| r.paper_id == target.paper_id && !known.contains(&r.id))
                    .cloned(),
            );
        }
        let exact_fit = |cands: &[ReviewRecord]| -> bool {
            match pair_references(target, cands, k) {
                Ok(refs) => refs.iter().all(|r| r.rating == target.rating),
                Err(_) => false,
            }
        };
        let mut fresh = Vec::new();
        if self.generate_on_demand && !exact_fit(&candidates) {
            if let Some(paper) = paper {
                let generator = Generator::new(self.providers.chat.as_ref(), &self.templates, self.clean_model.clone());
                for model in &self.generation_models {
                    if exact_fit(&candidates) {
                        break;
                    }
                    let own = target.is_ai() && target.generator_model.as_deref() == Some(model.as_str());
                    let have = candidates
                        .iter()
                        .any(|r| r.rating == target.rating && r.generator_model.as_deref() == Some(model.as_str()));
                    if own || have {
                        continue;
                    }
                    let raw = generator
                        .generate_ai_review(paper, target.rating, model)
                        .and_then(|r| generator.clean_review(&r))
                        .map_err(|source| FeatureError::Generate {
                            review_id: target.id.clone(),
                            source,
                        })?;
                    log::info!("review {}: generated reference {}", target.id, raw.id);
                    self.generated.lock().insert(raw.id.clone(), raw.clone());
                    candidates.push(raw.clone());
                    fresh.push(raw);
                }
            }
        }
        let refs = pair_references(target, &candidates, k)?;
        Ok((refs, fresh))
    }

    /// Computes the feature row for `target`. `corpus` supplies candidate
    /// references; `paper` is needed only for on-demand generation.
    pub fn featurize_review(
        &self,
        target: &ReviewRecord,
        paper: Option<&PaperRecord>,
        corpus: &[ReviewRecord],
    ) -> Result<FeaturizedReview, FeatureError> {
        let cfg = &self.config;
        cfg.validate()?;
        let own = self.processed(target)?;
        let (refs, generated) = self.pair(target, paper, corpus)?;
        let mut ref_sets = Vec::with_capacity(refs.len());
        for r in &refs {
            let p = self.processed(r).map_err(|e| FeatureError::Stage {
                review_id: target.id.clone(),
                stage: "reference claims",
                source: Box::new(e),
            })?;
            ref_sets.push(p.filtered.clone());
        }
        let profile =
            SimilarityProfile::compute(&own.filtered, &ref_sets, own.total).map_err(|e| FeatureError::Stage {
                review_id: target.id.clone(),
                stage: "semantic features",
                source: Box::new(match e {
                    FeatureError::EmptyReference { index } => FeatureError::Pairing {
                        review_id: refs[index].id.clone(),
                        paper_id: target.paper_id.clone(),
                        needed: 1,
                        found: 0,
                    },
                    other => other,
                }),
            })?;
        let semantic = profile.features(cfg.tau, cfg.f2_mode);
        let textual = if cfg.textual_enabled() {
            let scores = self
                .providers
                .scorer
                .score_tokens(&target.text, cfg.top_k)
                .map_err(|source| FeatureError::Score {
                    review_id: target.id.clone(),
                    source,
                })?;
            textual_features(&scores)?
        } else {
            TextualFeatures::zero()
        };
        let features = FeatureVector::assemble(&semantic, &textual, cfg.feature_mask);
        Ok(FeaturizedReview {
            record: FeatureRecord {
                review_id: target.id.clone(),
                paper_id: target.paper_id.clone(),
                label: target.label,
                features,
                config: cfg.into(),
                reference_ids: refs.into_iter().map(|r| r.id).collect(),
                similarity: profile,
            },
            generated,
        })
    }

    /// Featurizes many reviews in parallel; results are in input order.
    pub fn featurize_all(
        &self,
        targets: &[&ReviewRecord],
        papers: &[PaperRecord],
        corpus: &[ReviewRecord],
    ) -> Vec<Result<FeaturizedReview, FeatureError>> {
        let by_id: HashMap<&str, &PaperRecord> = papers.iter().map(|p| (p.paper_id.as_str(), p)).collect();
        let mut by_paper: HashMap<&str, Vec<ReviewRecord>> = HashMap::new();
        for r in corpus.iter().filter(|r| r.label == Some(Label::Ai)) {
            by_paper.entry(r.paper_id.as_str()).or_default().push(r.clone());
        }
        let empty = Vec::new();
        targets
            .par_iter()
            .map(|t| {
                let cands = by_paper.get(t.paper_id.as_str()).unwrap_or(&empty);
                self.featurize_review(t, by_id.get(t.paper_id.as_str()).copied(), cands)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claims::parse_claim_output;
    use crate::features::{semantic_features, NUM_FEATURES};
    use crate::providers::stub::{StubChat, StubEmbedder, StubScorer};
    use crate::providers::ChatRequest;

    fn providers() -> ProviderSet {
        ProviderSet {
            chat: Arc::new(StubChat::new(0)),
            embedder: Arc::new(StubEmbedder::new("emb", 64, 7)),
            scorer: Arc::new(StubScorer::new()),
        }
    }

    fn paper() -> PaperRecord {
        PaperRecord {
            paper_id: "p1".into(),
            venue: "ICLR".into(),
            year: 2024,
            title: "Sparse Attention for Long Documents".into(),
            body_text: "We propose a sparse attention scheme for long documents.".into(),
            human_ratings: vec![6],
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
            text: "The paper studies sparse attention. The idea is novel and interesting. \
                   The experiments are limited to two datasets. The authors should add an ablation. \
                   Could the authors clarify the runtime?"
                .into(),
            generator_model: None,
            source_review_id: None,
        }
    }

    fn featurizer(config: FeatureConfig) -> Featurizer {
        let mut f = Featurizer::new(providers(), TemplateSet::builtin(), config);
        f.generation_models = ["m1", "m2", "m3", "m4"].iter().map(|s| s.to_string()).collect();
        f.generate_on_demand = true;
        f
    }

    #[test]
    fn stub_pipeline_is_deterministic_and_generates_references() {
        let a = featurizer(FeatureConfig::default())
            .featurize_review(&human(), Some(&paper()), &[])
            .unwrap();
        let b = featurizer(FeatureConfig::default())
            .featurize_review(&human(), Some(&paper()), &[])
            .unwrap();
        assert_eq!(a.record, b.record);
        assert_eq!(a.generated.len(), 3);
        assert_eq!(a.record.reference_ids.len(), 3);
        assert!(a.record.features.is_finite());
        assert!(a.record.features.valid_semantic);
        assert!(a.record.features.perplexity >= 1.0);
    }

    #[test]
    fn missing_references_without_generation_is_pairing_error() {
        let mut f = featurizer(FeatureConfig::default());
        f.generate_on_demand = false;
        assert!(matches!(
            f.featurize_review(&human(), Some(&paper()), &[]),
            Err(FeatureError::Pairing { .. })
        ));
    }

    #[test]
    fn textual_mask_zeroes_and_records() {
        let mut cfg = FeatureConfig::default();
        cfg.feature_mask[5..].iter_mut().for_each(|m| *m = false);
        let out = featurizer(cfg.clone())
            .featurize_review(&human(), Some(&paper()), &[])
            .unwrap();
        assert_eq!(&out.record.features.values()[5..], &[0.0; 4]);
        assert_eq!(out.record.features.feature_mask, cfg.feature_mask);
        assert_eq!(out.record.config.feature_mask, cfg.feature_mask);
    }

    #[test]
    fn matches_monolithic_oracle() {
        let cfg = FeatureConfig::default();
        let out = featurizer(cfg.clone())
            .featurize_review(&human(), Some(&paper()), &[])
            .unwrap();
        let p = providers();
        let t = TemplateSet::builtin();
        let claims_of = |r: &ReviewRecord| -> (ClaimSet, usize) {
            let (sys, user) = t.extract_claims.render(&[("review", &r.text)]).unwrap();
            let raw = p
                .chat
                .chat_complete(&ChatRequest {
                    system_prompt: sys,
                    user_prompt: user,
                    temperature: 0.0,
                    max_tokens: 3072,
                    model_name: "extractor".into(),
                })
                .unwrap();
            let claims = parse_claim_output(&raw).unwrap();
            let total = claims.len();
            let mut kept: Vec<_> = claims.into_iter().filter(|c| c.category.is_evaluative()).collect();
            let texts: Vec<String> = kept.iter().map(|c| c.text.clone()).collect();
            for (c, e) in kept.iter_mut().zip(p.embedder.embed_batch(&texts).unwrap()) {
                c.embedding = Some(e);
            }
            (
                ClaimSet {
                    review_id: r.id.clone(),
                    claims: kept,
                },
                total,
            )
        };
        let (target, total) = claims_of(&human());
        let refs: Vec<ClaimSet> = out.generated.iter().map(|r| claims_of(r).0).collect();
        let sem = semantic_features(&target, &refs, total, &cfg).unwrap();
        let tex = textual_features(&p.scorer.score_tokens(&human().text, 200).unwrap()).unwrap();
        let expected = [
            sem.prop_high_sim,
            sem.mean_sim_above_tau,
            sem.mean_best_match,
            sem.intra_diversity,
            sem.log_claim_count,
            tex.perplexity,
            tex.mean_entropy,
            tex.top_k_rate,
            tex.curvature_score,
        ];
        let got = out.record.features.values();
        for i in 0..NUM_FEATURES {
            assert!(
                (got[i] - expected[i]).abs() < 1e-9,
                "feature {i}: {} vs {}",
                got[i],
                expected[i]
            );
        }
    }

    #[test]
    fn ai_target_references_come_from_other_models() {
        let f = featurizer(FeatureConfig::default());
        let g = Generator::new(f.providers.chat.as_ref(), &f.templates, "cleaner");
        let corpus: Vec<ReviewRecord> = ["m1", "m2", "m3", "m4"]
            .iter()
            .map(|m| g.generate_ai_review(&paper(), 6, m).unwrap())
            .collect();
        let out = f.featurize_review(&corpus[0], Some(&paper()), &corpus).unwrap();
        assert!(out.generated.is_empty());
        assert_eq!(
            out.record.reference_ids,
            vec![corpus[1].id.clone(), corpus[2].id.clone(), corpus[3].id.clone()]
        );
    }

    #[test]
    fn parallel_batch_matches_sequential() {
        let f = featurizer(FeatureConfig::default());
        let mut h2 = human();
        h2.id = "h2".into();
        h2.text = "The method is simple. The results are weak. The authors should compare with baselines.".into();
        let a = human();
        let targets = vec![&a, &h2];
        let batch = f.featurize_all(&targets, &[paper()], &[]);
        for (t, r) in targets.iter().zip(batch) {
            let seq = featurizer(FeatureConfig::default())
                .featurize_review(t, Some(&paper()), &[])
                .unwrap();
            assert_eq!(r.unwrap().record.features, seq.record.features);
        }
    }
}
