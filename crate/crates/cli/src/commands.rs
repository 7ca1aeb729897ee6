use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use revdetect_core::claims::{load_claim_sets, save_claim_sets};
use revdetect_core::classifier::{
    cv_search, load_model, save_model, train_with_history, GbdtHyperparams, GbdtModel, Prediction,
};
use revdetect_core::corpus::{
    load_corpus, read_json_lines, save_corpus, split_paper_level, write_json_lines, CorpusSplit, Label, PaperRecord,
    ReviewRecord,
};
use revdetect_core::evaluation::{evaluate, theta_csv, threshold_sweep, write_report};
use revdetect_core::features::{
    load_feature_table, save_feature_table, FeatureRecord, FeatureVector, Featurizer, ProviderSet, TAU_GRID,
};
use revdetect_core::genpipeline::{build_generation_jobs, GenerationJob, Generator};
use revdetect_core::prompts::TemplateSet;
use revdetect_core::providers::{ProviderConfig, ProviderKind};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, Family, FamilyExt};

pub const CORPUS: &str = "corpus.jsonl";
pub const SPLIT: &str = "split.json";
pub const GENERATED: &str = "generated.jsonl";
pub const JOBS: &str = "jobs.jsonl";
pub const CLAIMS: &str = "claims.jsonl";
pub const FEATURES: &str = "features.jsonl";
pub const MODEL: &str = "model.bin";
pub const TRAIN_SUMMARY: &str = "train.json";
pub const SEARCH: &str = "search.json";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const PREDICTION: &str = "prediction.json";
pub const THETA: &str = "theta.csv";

/// Rating scales `(venue, lowest, highest)` used when neither the review nor
/// the paper carries a score.
const VENUE_SCALES: [(&str, i64, i64); 2] = [("iclr", 1, 10), ("neurips", 1, 10)];
const DEFAULT_SCALE: (i64, i64) = (1, 10);

pub struct Ctx {
    pub cfg: PipelineConfig,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).family(Family::Other)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn require(path: &Path, produced_by: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::data(format!(
            "{} not found; run `{produced_by}` first",
            path.display()
        )))
    }
}

/// Aggregates per-record failures into one error, keeping the most severe
/// family.
fn failures(stage: &str, total: usize, errors: Vec<CliError>) -> CliResult<()> {
    if errors.is_empty() {
        return Ok(());
    }
    for e in &errors {
        log::error!("{stage}: {e}");
    }
    let family = errors.iter().map(|e| e.family).max().unwrap_or(Family::Other);
    Err(CliError::new(
        family,
        format!("{} of {total} records failed; first: {}", errors.len(), errors[0]),
    ))
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn require_seed(&self, command: &str) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::config(format!("`{command}` requires --seed")))
    }

    fn templates(&self) -> CliResult<TemplateSet> {
        match &self.cfg.templates_dir {
            Some(dir) => Ok(TemplateSet::from_dir(dir)?),
            None => Ok(TemplateSet::builtin()),
        }
    }

    fn providers(&self, chat_seed: Option<u64>) -> CliResult<ProviderSet> {
        let p = &self.cfg.providers;
        let mut chat: ProviderConfig = p.chat.clone();
        if let (Some(seed), ProviderKind::Stub) = (chat_seed, chat.kind) {
            chat.seed = seed;
        }
        Ok(ProviderSet {
            chat: chat.chat_provider()?,
            embedder: p.embed.embedder()?,
            scorer: p.score.scorer()?,
        })
    }

    fn featurizer(&self, providers: ProviderSet) -> CliResult<Featurizer> {
        let mut f = Featurizer::new(providers, self.templates()?, self.cfg.features.clone());
        f.extraction_model = self.cfg.generation.extraction_model.clone();
        f.clean_model = self.cfg.generation.clean_model.clone();
        f.generation_models = self.cfg.generation.models.clone();
        Ok(f)
    }

    fn corpus(&self) -> CliResult<(Vec<PaperRecord>, Vec<ReviewRecord>)> {
        let path = self.path(CORPUS);
        require(&path, "ingest")?;
        Ok(load_corpus(&path)?)
    }

    fn generated(&self) -> CliResult<Vec<ReviewRecord>> {
        let path = self.path(GENERATED);
        if !path.exists() {
            return Ok(Vec::new());
        }
        Ok(load_corpus(&path)?.1)
    }

    /// Corpus reviews followed by generated ones.
    fn all_reviews(&self) -> CliResult<(Vec<PaperRecord>, Vec<ReviewRecord>)> {
        let (papers, mut reviews) = self.corpus()?;
        let known: HashSet<String> = reviews.iter().map(|r| r.id.clone()).collect();
        for g in self.generated()? {
            if known.contains(&g.id) {
                return Err(CliError::data(format!(
                    "generated review {} collides with a corpus id",
                    g.id
                )));
            }
            reviews.push(g);
        }
        Ok((papers, reviews))
    }

    fn split(&self) -> CliResult<CorpusSplit> {
        let path = self.path(SPLIT);
        require(&path, "ingest")?;
        read_json(&path)
    }

    fn features(&self) -> CliResult<Vec<FeatureRecord>> {
        let path = self.path(FEATURES);
        require(&path, "featurize")?;
        Ok(load_feature_table(&path)?)
    }
}

// ---------------------------------------------------------------- ingest

pub fn ingest(ctx: &Ctx, inputs: &[PathBuf]) -> CliResult<()> {
    let inputs = if inputs.is_empty() { &ctx.cfg.inputs[..] } else { inputs };
    if inputs.is_empty() {
        return Err(CliError::config(
            "no input files: pass --input or set `inputs` in the config",
        ));
    }
    let mut papers = Vec::new();
    let mut reviews = Vec::new();
    for path in inputs {
        if !path.exists() {
            return Err(CliError::config(format!("{} does not exist", path.display())));
        }
        let (p, r) = load_corpus(path).map_err(|e| CliError::from(e).stage(&format!("ingest {}", path.display())))?;
        papers.extend(p);
        reviews.extend(r);
    }
    papers.sort_by(|a, b| a.paper_id.cmp(&b.paper_id));
    reviews.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = papers.windows(2).find(|w| w[0].paper_id == w[1].paper_id) {
        return Err(CliError::data(format!("duplicate paper id {}", w[0].paper_id)));
    }
    if let Some(w) = reviews.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(CliError::data(format!("duplicate review id {}", w[0].id)));
    }
    let paper_ids: HashSet<&str> = papers.iter().map(|p| p.paper_id.as_str()).collect();
    let orphans = reviews
        .iter()
        .filter(|r| !paper_ids.contains(r.paper_id.as_str()))
        .count();
    if orphans > 0 {
        log::warn!("{orphans} reviews reference papers without a paper record");
    }
    save_corpus(&ctx.path(CORPUS), &papers, &reviews)?;
    let seed = ctx.seed.unwrap_or(ctx.cfg.split.seed);
    let split = split_paper_level(&reviews, ctx.cfg.split.fraction, seed)?;
    write_json(&ctx.path(SPLIT), &split)?;

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in &reviews {
        *counts
            .entry(r.label.map_or("unlabeled".into(), |l| l.to_string()))
            .or_default() += 1;
    }
    println!(
        "ingested {} papers, {} reviews {:?}; split {} train / {} test papers",
        papers.len(),
        reviews.len(),
        counts,
        split.train_paper_ids.len(),
        split.test_paper_ids.len()
    );
    Ok(())
}

// ---------------------------------------------------------------- generate

#[derive(Serialize)]
struct JobLine<'a> {
    #[serde(flatten)]
    job: &'a GenerationJob,
    output_id: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub fn generate(ctx: &Ctx) -> CliResult<()> {
    let seed = ctx.require_seed("generate")?;
    let (papers, reviews) = ctx.corpus()?;
    let (jobs, skipped) = build_generation_jobs(&papers, &reviews, &ctx.cfg.generation.models);
    for s in &skipped {
        log::warn!("paper {} skipped: {}", s.paper_id, s.reason);
    }
    let mut generated: BTreeMap<String, ReviewRecord> =
        ctx.generated()?.into_iter().map(|r| (r.id.clone(), r)).collect();
    let done: HashSet<String> = generated.keys().cloned().collect();

    let providers = ctx.providers(Some(seed))?;
    let templates = ctx.templates()?;
    let generator = Generator::new(
        providers.chat.as_ref(),
        &templates,
        ctx.cfg.generation.clean_model.clone(),
    );
    let outcomes = generator.run_jobs(&jobs, &papers, &reviews, &done);

    let mut errors_by_id: BTreeMap<String, String> = BTreeMap::new();
    let mut errors = Vec::new();
    for o in outcomes {
        match o.result {
            Ok(r) => {
                generated.insert(r.id.clone(), r);
            }
            Err(e) => {
                errors_by_id.insert(o.job.output_id(), e.to_string());
                errors.push(CliError::from(e).stage(&format!("generate {}", o.job.output_id())));
            }
        }
    }
    let lines: Vec<JobLine> = jobs
        .iter()
        .map(|j| {
            let id = j.output_id();
            let error = errors_by_id.get(&id).cloned();
            JobLine {
                job: j,
                status: if error.is_some() { "failed" } else { "ok" },
                output_id: id,
                error,
            }
        })
        .collect();
    write_json_lines(&ctx.path(JOBS), &lines)?;
    let records: Vec<ReviewRecord> = generated.into_values().collect();
    save_corpus(&ctx.path(GENERATED), &[], &records)?;
    println!(
        "{} jobs ({} resumed), {} generated reviews, {} failures, {} papers skipped",
        jobs.len(),
        done.len(),
        records.len(),
        errors.len(),
        skipped.len()
    );
    failures("generate", jobs.len(), errors)
}

// ---------------------------------------------------------------- extract-claims

pub fn extract_claims(ctx: &Ctx) -> CliResult<()> {
    let (_, reviews) = ctx.all_reviews()?;
    let featurizer = ctx.featurizer(ctx.providers(ctx.seed)?)?;
    let path = ctx.path(CLAIMS);
    if path.exists() {
        let known: HashSet<&str> = reviews.iter().map(|r| r.id.as_str()).collect();
        featurizer.preload_claims(
            load_claim_sets(&path)?
                .into_iter()
                .filter(|s| known.contains(s.review_id.as_str())),
        );
    }
    let errors: Vec<CliError> = reviews
        .par_iter()
        .filter_map(|r| featurizer.extract(r).err())
        .map(|e| CliError::from(e).stage("extract-claims"))
        .collect();
    let sets = featurizer.extracted_claims();
    save_claim_sets(&path, &sets)?;
    let claims: usize = sets.iter().map(|s| s.len()).sum();
    println!("{} reviews, {claims} claims", sets.len());
    failures("extract-claims", reviews.len(), errors)
}

// ---------------------------------------------------------------- featurize

pub fn featurize(ctx: &Ctx) -> CliResult<()> {
    let (papers, reviews) = ctx.all_reviews()?;
    let featurizer = ctx.featurizer(ctx.providers(ctx.seed)?)?;
    let claims = ctx.path(CLAIMS);
    if claims.exists() {
        featurizer.preload_claims(load_claim_sets(&claims)?);
    }
    let targets: Vec<&ReviewRecord> = reviews.iter().collect();
    let mut records = Vec::with_capacity(targets.len());
    let mut errors = Vec::new();
    for result in featurizer.featurize_all(&targets, &papers, &reviews) {
        match result {
            Ok(f) => records.push(f.record),
            Err(e) => errors.push(CliError::from(e).stage("featurize")),
        }
    }
    save_feature_table(&ctx.path(FEATURES), &records)?;
    println!("{} feature rows, {} failures", records.len(), errors.len());
    failures("featurize", targets.len(), errors)
}

// ---------------------------------------------------------------- train

#[derive(Serialize, Deserialize)]
struct TrainSummary {
    seed: u64,
    tau: f64,
    rows: usize,
    hyperparams: GbdtHyperparams,
    searched_trials: Option<usize>,
    loss_history: Vec<f64>,
}

fn labeled_rows(records: &[FeatureRecord], keep: impl Fn(&str) -> bool) -> Vec<&FeatureRecord> {
    records
        .iter()
        .filter(|r| r.label.is_some() && keep(&r.paper_id))
        .collect()
}

pub fn train(ctx: &Ctx, search_trials: Option<usize>) -> CliResult<()> {
    let seed = ctx.require_seed("train")?;
    let records = ctx.features()?;
    let split = ctx.split()?;
    let rows: Vec<FeatureRecord> = labeled_rows(&records, |p| split.is_train(p))
        .into_iter()
        .cloned()
        .collect();
    if rows.is_empty() {
        return Err(CliError::data("no labeled training rows"));
    }
    let (mut hp, tau) = match search_trials {
        Some(n) => {
            let result =
                cv_search(&rows, &ctx.cfg.search, n, seed, &TAU_GRID).map_err(|e| CliError::from(e).stage("search"))?;
            write_json(&ctx.path(SEARCH), &result)?;
            println!(
                "search: best mean macro-F1 {:.4} at tau {} over {n} trials",
                result.best_score, result.best_tau
            );
            (result.best, result.best_tau)
        }
        None => (ctx.cfg.hyperparams.clone(), ctx.cfg.features.tau),
    };
    hp.seed = seed;
    let features: Vec<FeatureVector<f64>> = rows.iter().map(|r| r.at_tau(tau)).collect();
    let labels: Vec<Label> = rows.iter().map(|r| r.label.expect("filtered")).collect();
    let (model, history) = train_with_history(&features, &labels, &hp).map_err(|e| CliError::from(e).stage("train"))?;
    save_model(&ctx.path(MODEL), &model)?;
    write_json(
        &ctx.path(TRAIN_SUMMARY),
        &TrainSummary {
            seed,
            tau,
            rows: rows.len(),
            hyperparams: hp,
            searched_trials: search_trials,
            loss_history: history.clone(),
        },
    )?;
    println!(
        "trained on {} rows at tau {tau}; log-loss {:.4} -> {:.4}",
        rows.len(),
        history[0],
        history[history.len() - 1]
    );
    Ok(())
}

/// Model plus the τ its features were computed at.
fn load_trained(ctx: &Ctx, model_path: Option<&Path>) -> CliResult<(GbdtModel<f64>, f64)> {
    let path = model_path.map(Path::to_path_buf).unwrap_or_else(|| ctx.path(MODEL));
    require(&path, "train")?;
    let model = load_model(&path)?;
    let summary = path.with_file_name(TRAIN_SUMMARY);
    let tau = if summary.exists() {
        read_json::<TrainSummary>(&summary)?.tau
    } else {
        ctx.cfg.features.tau
    };
    Ok((model, tau))
}

// ---------------------------------------------------------------- classify

/// A review submitted for classification. Only `text` is mandatory.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReviewInput {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    paper_id: Option<String>,
    #[serde(default)]
    venue: Option<String>,
    #[serde(default)]
    year: Option<i32>,
    #[serde(default)]
    rating: Option<i64>,
    text: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingSource {
    Review,
    PaperMedian,
    VenueMidpoint,
}

pub fn venue_midpoint(venue: &str) -> i64 {
    let v = venue.to_ascii_lowercase();
    let (lo, hi) = VENUE_SCALES
        .iter()
        .find(|(name, _, _)| v.contains(name))
        .map(|&(_, lo, hi)| (lo, hi))
        .unwrap_or(DEFAULT_SCALE);
    (lo + hi) / 2
}

pub fn pick_rating(stated: Option<i64>, paper: &PaperRecord, venue: &str) -> (i64, RatingSource) {
    match (stated, paper.median_rating()) {
        (Some(r), _) => (r, RatingSource::Review),
        (None, Some(m)) => (m, RatingSource::PaperMedian),
        (None, None) => (venue_midpoint(venue), RatingSource::VenueMidpoint),
    }
}

#[derive(Serialize)]
struct PredictionFile {
    review_id: String,
    paper_id: String,
    label: Label,
    confidence: f64,
    probs: BTreeMap<&'static str, f64>,
    theta: f64,
    abstain: bool,
    rating_used: i64,
    rating_source: RatingSource,
    tau: f64,
    reference_ids: Vec<String>,
    generated_references: Vec<String>,
    features: FeatureVector<f64>,
}

fn probs_map(p: &Prediction<f64>) -> BTreeMap<&'static str, f64> {
    Label::ALL.iter().map(|l| (l.as_str(), p.probs[l.index()])).collect()
}

pub fn classify(ctx: &Ctx, review_path: &Path, paper_path: &Path, model_path: Option<&Path>) -> CliResult<()> {
    let input: ReviewInput = read_json(review_path)?;
    let paper: PaperRecord = read_json(paper_path)?;
    if let Some(p) = &input.paper_id {
        if *p != paper.paper_id {
            return Err(CliError::data(format!(
                "review belongs to paper {p}, but {} was given",
                paper.paper_id
            )));
        }
    }
    let venue = input.venue.clone().unwrap_or_else(|| paper.venue.clone());
    let (rating, rating_source) = pick_rating(input.rating, &paper, &venue);
    let review = ReviewRecord {
        id: input.id.unwrap_or_else(|| "input".into()),
        paper_id: paper.paper_id.clone(),
        venue,
        year: input.year.unwrap_or(paper.year),
        rating,
        label: None,
        text: input.text,
        generator_model: None,
        source_review_id: None,
    };
    let (model, tau) = load_trained(ctx, model_path)?;
    let mut featurizer = ctx.featurizer(ctx.providers(ctx.seed)?)?;
    featurizer.config.tau = tau;
    featurizer.generate_on_demand = true;
    let corpus: Vec<ReviewRecord> = ctx
        .generated()?
        .into_iter()
        .filter(|r| r.paper_id == paper.paper_id)
        .collect();
    let fr = featurizer
        .featurize_review(&review, Some(&paper), &corpus)
        .map_err(|e| CliError::from(e).stage("classify"))?;
    let pred = model.predict(&fr.record.features)?;
    let out = PredictionFile {
        review_id: review.id.clone(),
        paper_id: review.paper_id.clone(),
        label: pred.label,
        confidence: pred.confidence,
        probs: probs_map(&pred),
        theta: ctx.cfg.theta,
        abstain: pred.confidence < ctx.cfg.theta,
        rating_used: rating,
        rating_source,
        tau,
        reference_ids: fr.record.reference_ids.clone(),
        generated_references: fr.generated.iter().map(|r| r.id.clone()).collect(),
        features: fr.record.features.clone(),
    };
    write_json(&ctx.path(PREDICTION), &out)?;
    println!(
        "{}: {} (confidence {:.3}{})",
        review.id,
        pred.label,
        pred.confidence,
        if out.abstain { ", below theta" } else { "" }
    );
    Ok(())
}

// ---------------------------------------------------------------- evaluate, sweep-theta

#[derive(Serialize, Deserialize)]
struct PredictionLine {
    review_id: String,
    #[serde(default)]
    paper_id: String,
    label: Label,
    probs: [f64; 3],
    #[serde(default, skip_deserializing)]
    predicted: Option<Label>,
    #[serde(default, skip_deserializing)]
    confidence: Option<f64>,
}

fn read_predictions(path: &Path) -> CliResult<(Vec<Prediction<f64>>, Vec<Label>)> {
    require(path, "evaluate")?;
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    for (line, value) in read_json_lines(path)? {
        let row: PredictionLine =
            serde_json::from_value(value).map_err(|e| CliError::data(format!("{}:{line}: {e}", path.display())))?;
        let sum: f64 = row.probs.iter().sum();
        if row.probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-6 {
            return Err(CliError::data(format!(
                "{}:{line}: review {} has probabilities {:?} that do not form a distribution",
                path.display(),
                row.review_id,
                row.probs
            )));
        }
        preds.push(Prediction::from_probs(row.probs));
        labels.push(row.label);
    }
    if preds.is_empty() {
        return Err(CliError::data(format!("{} holds no predictions", path.display())));
    }
    Ok((preds, labels))
}

fn predict_test_split(ctx: &Ctx) -> CliResult<()> {
    let (model, tau) = load_trained(ctx, None)?;
    let records = ctx.features()?;
    let split = ctx.split()?;
    let rows = labeled_rows(&records, |p| split.is_test(p));
    if rows.is_empty() {
        return Err(CliError::data("no labeled test rows"));
    }
    let mut lines = Vec::with_capacity(rows.len());
    for r in rows {
        let p = model
            .predict(&r.at_tau(tau))
            .map_err(|e| CliError::from(e).stage(&format!("predict {}", r.review_id)))?;
        lines.push(PredictionLine {
            review_id: r.review_id.clone(),
            paper_id: r.paper_id.clone(),
            label: r.label.expect("filtered"),
            probs: p.probs,
            predicted: Some(p.label),
            confidence: Some(p.confidence),
        });
    }
    write_json_lines(&ctx.path(PREDICTIONS), &lines)?;
    Ok(())
}

pub fn evaluate_cmd(ctx: &Ctx, predictions: Option<&Path>) -> CliResult<()> {
    let path = match predictions {
        Some(p) => p.to_path_buf(),
        None => {
            predict_test_split(ctx)?;
            ctx.path(PREDICTIONS)
        }
    };
    let (preds, labels) = read_predictions(&path)?;
    let report = evaluate(&preds, &labels, &ctx.cfg.evaluation).map_err(|e| CliError::from(e).stage("evaluate"))?;
    write_report(&ctx.out, &report)?;
    let tpr: Vec<String> = report.tpr_at.iter().map(|(k, v)| format!("TPR@{k} {v:.3}")).collect();
    println!(
        "n={} AUC {:.4} {} macro-F1 {:.4} accuracy {:.4}",
        report.n,
        report.auc,
        tpr.join(" "),
        report.macro_f1,
        report.accuracy
    );
    Ok(())
}

pub fn sweep_theta(ctx: &Ctx, predictions: Option<&Path>) -> CliResult<()> {
    let path = predictions
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.path(PREDICTIONS));
    let (preds, labels) = read_predictions(&path)?;
    let curve = threshold_sweep(&preds, &labels, &ctx.cfg.evaluation.theta_grid)?;
    std::fs::write(ctx.path(THETA), theta_csv(&curve))?;
    let at = threshold_sweep(&preds, &labels, &[ctx.cfg.theta])?;
    let point = &at[0];
    match point.selective_accuracy {
        Some(acc) => println!(
            "theta {:.2}: coverage {:.4}, selective accuracy {acc:.4}",
            point.theta, point.coverage
        ),
        None => println!(
            "theta {:.2}: coverage {:.4}, no predictions retained",
            point.theta, point.coverage
        ),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use revdetect_core::providers::stub::{StubChat, StubEmbedder, StubScorer};

    fn paper(ratings: Vec<i64>) -> PaperRecord {
        PaperRecord {
            paper_id: "p".into(),
            venue: "ICLR 2024".into(),
            year: 2024,
            title: "T".into(),
            body_text: "B".into(),
            human_ratings: ratings,
        }
    }

    #[test]
    fn rating_fallback_order() {
        assert_eq!(pick_rating(Some(3), &paper(vec![8]), "ICLR"), (3, RatingSource::Review));
        assert_eq!(
            pick_rating(None, &paper(vec![8, 3, 6]), "ICLR"),
            (6, RatingSource::PaperMedian)
        );
        assert_eq!(
            pick_rating(None, &paper(vec![]), "ICLR"),
            (5, RatingSource::VenueMidpoint)
        );
        assert_eq!(venue_midpoint("Some Workshop"), 5);
    }

    #[test]
    fn failures_keep_most_severe_family() {
        let errs = vec![CliError::data("a"), CliError::new(Family::Provider, "b")];
        assert_eq!(failures("x", 3, errs).unwrap_err().family, Family::Data);
        assert!(failures("x", 3, Vec::new()).is_ok());
    }

    #[test]
    fn provider_set_builds_from_stub_configs() {
        let set = ProviderSet {
            chat: Arc::new(StubChat::new(0)),
            embedder: Arc::new(StubEmbedder::new("e", 8, 0)),
            scorer: Arc::new(StubScorer::new()),
        };
        let ctx = Ctx {
            cfg: PipelineConfig::default(),
            out: PathBuf::from("."),
            seed: None,
        };
        assert!(ctx.featurizer(set).is_ok());
        assert!(ctx.providers(Some(1)).is_ok());
    }
}
