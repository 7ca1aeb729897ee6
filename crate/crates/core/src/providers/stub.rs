//! Deterministic providers for tests and hermetic runs.
//!
//! Every stub is a pure function of its inputs and seed. The chat stub
//! recognises the pipeline's prompt templates by marker phrases in the system
//! prompt and answers each task in kind: templated reviews, rule-based
//! rewriting, preamble stripping, and sentence-level claim extraction.

use std::collections::VecDeque;

use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{distribution_stats, ChatProvider, ChatRequest, Embedder, ProviderError, TokenScore, TokenScorer};

/// System-prompt phrases the chat stub dispatches on.
pub const EXTRACT_MARKER: &str = "extract and organize";
pub const REFINE_MARKER: &str = "professional writing assistant";
pub const CLEAN_MARKER: &str = "generation artifacts";
pub const REVIEW_MARKER: &str = "Review the given paper";

fn digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

fn hash_u64(parts: &[&[u8]]) -> u64 {
    let d = digest(parts);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Splits prose into sentences on `.`, `?`, `!` followed by whitespace, and
/// on line breaks. Lines ending in `:` (section labels) are dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.ends_with(':') {
            continue;
        }
        let mut current = String::new();
        let mut chars = line.chars().peekable();
        while let Some(c) = chars.next() {
            current.push(c);
            if matches!(c, '.' | '?' | '!') && chars.peek().is_none_or(|n| n.is_whitespace()) {
                let s = current.trim().to_string();
                if !s.is_empty() {
                    out.push(s);
                }
                current.clear();
            }
        }
        let s = current.trim().to_string();
        if !s.is_empty() {
            out.push(s);
        }
    }
    out
}

const STRENGTHS: &[&str] = &[
    "The {t} formulation is clearly motivated and technically sound.",
    "The empirical evaluation of {t} is thorough and covers several benchmarks.",
    "The paper is well written and the {t} pipeline is easy to follow.",
    "The proposed {t} method achieves consistent gains over strong baselines.",
    "The theoretical analysis of {t} provides useful insight into its behaviour.",
    "The ablation studies convincingly isolate the contribution of each {t} component.",
    "The {t} approach is novel and addresses an important open problem.",
    "The released code and detailed appendix make the {t} results reproducible.",
];

const WEAKNESSES: &[&str] = &[
    "The novelty of the {t} contribution over prior work is limited.",
    "The experiments on {t} lack comparison with several recent baselines.",
    "The computational cost of {t} is not analysed or reported.",
    "The evaluation of {t} is restricted to small-scale datasets.",
    "The assumptions behind the {t} analysis are strong and not well justified.",
    "The presentation of the {t} method is dense and hard to follow in places.",
    "Statistical significance of the {t} improvements is not reported.",
    "The limitations of {t} are not discussed in sufficient depth.",
];

const QUESTIONS: &[&str] = &[
    "How does {t} scale to larger datasets?",
    "Can the authors clarify how the {t} hyperparameters were selected?",
    "How sensitive is {t} to the choice of random seed?",
    "What happens to {t} when the main assumption is violated?",
    "Could the authors report the wall-clock cost of {t}?",
    "How does {t} compare with simpler heuristic alternatives?",
];

const SUGGESTIONS: &[&str] = &[
    "The authors should include additional baselines for {t}.",
    "The authors should add an analysis of the failure cases of {t}.",
    "The authors should report variance across multiple runs of {t}.",
    "The authors should discuss the broader limitations of {t} explicitly.",
    "The authors should release the {t} evaluation scripts.",
    "The authors should evaluate {t} on out-of-distribution data.",
];

const PREAMBLES: &[&str] = &[
    "Here is the review of the paper \"{title}\":",
    "Sure! Here is my review:",
];

const REWRITES: &[(&str, &str)] = &[
    ("I think", "In my assessment,"),
    ("I feel", "In my view,"),
    ("a lot of", "substantial"),
    ("doesn't", "does not"),
    ("isn't", "is not"),
    ("can't", "cannot"),
    ("won't", "will not"),
    ("very", "highly"),
    ("good", "strong"),
    ("bad", "weak"),
    ("pretty", "fairly"),
    ("kind of", "somewhat"),
];

/// Chat stub. Task answers depend only on the prompts, the model name and
/// the seed.
#[derive(Debug, Clone)]
pub struct StubChat {
    seed: u64,
    max_tokens_limit: u32,
}

impl StubChat {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            max_tokens_limit: 8192,
        }
    }

    pub fn with_max_tokens_limit(mut self, limit: u32) -> Self {
        self.max_tokens_limit = limit;
        self
    }

    fn pick<'a>(&self, bank: &'a [&'a str], parts: &[&[u8]]) -> &'a str {
        let seed = self.seed.to_le_bytes();
        let mut all: Vec<&[u8]> = vec![&seed];
        all.extend_from_slice(parts);
        bank[(hash_u64(&all) % bank.len() as u64) as usize]
    }

    fn review(&self, req: &ChatRequest) -> String {
        let score = req
            .system_prompt
            .split("recommendation should be \"")
            .nth(1)
            .and_then(|rest| rest.split('"').next())
            .unwrap_or("0")
            .to_string();
        let title = req
            .user_prompt
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("Title:"))
            .map(str::trim)
            .unwrap_or("the submission")
            .to_string();
        let topic = title
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| w.len() > 3)
            .map(str::to_lowercase)
            .next()
            .unwrap_or_else(|| "proposed".into());
        let model = req.model_name.as_bytes();
        let key = title.as_bytes();
        let s = score.as_bytes();
        // Most sentences depend only on (paper, score) so different models
        // converge; a few slots are model-specific.
        let pick = |bank: &[&str], slot: &str, per_model: bool, used: &mut Vec<String>| {
            let mut n = 0u32;
            loop {
                let nb = n.to_le_bytes();
                let parts: Vec<&[u8]> = if per_model {
                    vec![key, s, slot.as_bytes(), model, &nb]
                } else {
                    vec![key, s, slot.as_bytes(), &nb]
                };
                let line = self.pick(bank, &parts).replace("{t}", &topic);
                if !used.contains(&line) || n > 16 {
                    used.push(line.clone());
                    return line;
                }
                n += 1;
            }
        };
        let mut used = Vec::new();
        let mut text = String::new();
        if hash_u64(&[key, s, model, b"preamble"]).is_multiple_of(2) {
            let p = self.pick(PREAMBLES, &[key, model]).replace("{title}", &title);
            text.push_str(&p);
            text.push('\n');
        }
        text.push_str(&format!(
            "This paper studies {topic} and proposes a new method for it.\n"
        ));
        text.push_str("Strengths:\n");
        for slot in ["s1", "s2", "s3"] {
            text.push_str(&pick(STRENGTHS, slot, false, &mut used));
            text.push('\n');
        }
        text.push_str("Weaknesses:\n");
        for (slot, per_model) in [("w1", false), ("w2", false), ("w3", true)] {
            text.push_str(&pick(WEAKNESSES, slot, per_model, &mut used));
            text.push('\n');
        }
        for (slot, per_model) in [("c1", false), ("c2", true)] {
            text.push_str(&pick(SUGGESTIONS, slot, per_model, &mut used));
            text.push('\n');
        }
        text.push_str("Questions:\n");
        for slot in ["q1", "q2"] {
            text.push_str(&pick(QUESTIONS, slot, false, &mut used));
            text.push('\n');
        }
        text.push_str(&format!("Overall, I recommend a score of {score}.\n"));
        text
    }

    fn refine(&self, req: &ChatRequest) -> String {
        let body = req
            .user_prompt
            .strip_prefix("Here is the review to rewrite:")
            .unwrap_or(&req.user_prompt)
            .trim();
        let mut out = body.to_string();
        for (from, to) in REWRITES {
            out = replace_words(&out, from, to);
        }
        out
    }

    fn extract(&self, req: &ChatRequest) -> String {
        let mut groups: [Vec<String>; 5] = Default::default();
        for s in split_sentences(&req.user_prompt) {
            groups[stub_category(&s)].push(s);
        }
        let headings = [
            "Factual Restatement",
            "Evaluation",
            "Constructive Input",
            "Clarification Dialogue",
            "Meta-Commentary",
        ];
        let mut out = String::new();
        for (i, (h, claims)) in headings.iter().zip(groups.iter()).enumerate() {
            out.push_str(&format!("{}. **{h}**\n", i + 1));
            for c in claims {
                out.push_str("- ");
                out.push_str(c);
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// Replaces whole-word, case-sensitive occurrences of `from`.
fn replace_words(text: &str, from: &str, to: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find(from) {
        let before_ok = rest[..pos].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
        let after = &rest[pos + from.len()..];
        let after_ok = after.chars().next().is_none_or(|c| !c.is_alphanumeric());
        out.push_str(&rest[..pos]);
        out.push_str(if before_ok && after_ok { to } else { from });
        rest = after;
    }
    out.push_str(rest);
    out
}

/// Rule-based category index (order of the five claim headings).
fn stub_category(sentence: &str) -> usize {
    let lower = sentence.to_lowercase();
    if lower.ends_with('?') {
        return 3;
    }
    const META: &[&str] = &["recommend a score", "overall", "accept", "reject", "venue", "score of"];
    if META.iter().any(|m| lower.contains(m)) {
        return 4;
    }
    const CONSTRUCTIVE: &[&str] = &["should", "suggest", "consider", "would benefit", "please"];
    if CONSTRUCTIVE.iter().any(|m| lower.contains(m)) {
        return 2;
    }
    const FACTUAL: &[&str] = &[
        "this paper",
        "the paper proposes",
        "the paper studies",
        "the authors propose",
        "the authors present",
        "this work",
    ];
    if FACTUAL.iter().any(|m| lower.starts_with(m)) {
        return 0;
    }
    1
}

/// Removes a leading generation preamble ("Here is ...", "Sure ...",
/// "Certainly ...") through the end of its line, plus markdown bold and
/// heading markers. Text without such artifacts is returned unchanged.
pub fn strip_generation_artifacts(text: &str) -> String {
    let mut body = text;
    let lower = body.trim_start().to_lowercase();
    const OPENERS: &[&str] = &["here is", "here's", "sure", "certainly"];
    if OPENERS.iter().any(|o| lower.starts_with(o)) {
        let trimmed = body.trim_start();
        body = match trimmed.find('\n') {
            Some(nl) => &trimmed[nl + 1..],
            None => match trimmed.find(':') {
                Some(c) => &trimmed[c + 1..],
                None => trimmed,
            },
        };
        body = body.trim_start();
    }
    if !body.contains("**") && !body.lines().any(|l| l.trim_start().starts_with('#')) {
        return body.to_string();
    }
    body.lines()
        .map(|l| {
            let l = l.replace("**", "");
            let t = l.trim_start();
            if t.starts_with('#') {
                t.trim_start_matches('#').trim_start().to_string()
            } else {
                l
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

impl ChatProvider for StubChat {
    fn max_tokens_limit(&self) -> u32 {
        self.max_tokens_limit
    }

    fn send(&self, req: &ChatRequest) -> Result<String, ProviderError> {
        let sys = &req.system_prompt;
        Ok(if sys.contains(EXTRACT_MARKER) {
            self.extract(req)
        } else if sys.contains(REFINE_MARKER) {
            self.refine(req)
        } else if sys.contains(CLEAN_MARKER) {
            strip_generation_artifacts(&req.user_prompt)
        } else if sys.contains(REVIEW_MARKER) {
            self.review(req)
        } else {
            let d = digest(&[&self.seed.to_le_bytes(), sys.as_bytes(), req.user_prompt.as_bytes()]);
            format!("Stub completion from {}: {}", req.model_name, hex(&d[..8]))
        })
    }
}

/// Chat provider that replays queued responses and records every request.
#[derive(Debug, Default)]
pub struct ScriptedChat {
    responses: Mutex<VecDeque<Result<String, ProviderError>>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedChat {
    pub fn new(responses: impl IntoIterator<Item = Result<String, ProviderError>>) -> Self {
        Self {
            responses: Mutex::new(responses.into_iter().collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().clone()
    }
}

impl ChatProvider for ScriptedChat {
    fn max_tokens_limit(&self) -> u32 {
        8192
    }

    fn send(&self, req: &ChatRequest) -> Result<String, ProviderError> {
        self.requests.lock().push(req.clone());
        self.responses
            .lock()
            .pop_front()
            .unwrap_or(Err(ProviderError::Malformed("script exhausted".into())))
    }
}

/// Feature-hashing embedder: every word maps to a seeded pseudo-random dense
/// vector and a text embeds as the sum of its words' vectors. Texts sharing
/// words are close; unrelated texts are near-orthogonal.
#[derive(Debug, Clone)]
pub struct StubEmbedder {
    model_name: String,
    dim: usize,
    seed: u64,
}

impl StubEmbedder {
    pub fn new(model_name: impl Into<String>, dim: usize, seed: u64) -> Self {
        Self {
            model_name: model_name.into(),
            dim,
            seed,
        }
    }

    fn word_vector(&self, word: &str, acc: &mut [f64]) {
        let d = digest(&[&self.seed.to_le_bytes(), word.as_bytes()]);
        let mut rng = ChaCha8Rng::from_seed(d);
        for a in acc.iter_mut() {
            *a += rng.random_range(-1.0..1.0);
        }
    }
}

impl Embedder for StubEmbedder {
    fn model_name(&self) -> &str {
        &self.model_name
    }

    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        Ok(texts
            .iter()
            .map(|t| {
                let mut v = vec![0.0; self.dim];
                let lower = t.to_lowercase();
                let mut any = false;
                for w in lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
                    self.word_vector(w, &mut v);
                    any = true;
                }
                if !any {
                    self.word_vector(t, &mut v);
                }
                v
            })
            .collect())
    }
}

const STUB_VOCAB: usize = 28;

fn symbol(c: char) -> usize {
    match c {
        'a'..='z' => c as usize - 'a' as usize,
        'A'..='Z' => c as usize - 'A' as usize,
        c if c.is_whitespace() => 26,
        _ => 27,
    }
}

/// Character-level scorer over a 28-symbol alphabet (letters, whitespace,
/// other). The next-symbol distribution at each position is the smoothed
/// symbol frequency of the preceding text, so scores of a prefix never
/// depend on what follows it.
#[derive(Debug, Clone)]
pub struct StubScorer {
    smoothing: f64,
    context_limit: usize,
}

impl Default for StubScorer {
    fn default() -> Self {
        Self::new()
    }
}

impl StubScorer {
    pub fn new() -> Self {
        Self {
            smoothing: 0.5,
            context_limit: 32_768,
        }
    }

    pub fn with_context_limit(mut self, limit: usize) -> Self {
        self.context_limit = limit;
        self
    }
}

impl TokenScorer for StubScorer {
    fn context_limit(&self) -> usize {
        self.context_limit
    }

    fn score(&self, text: &str, top_k: usize) -> Result<Vec<TokenScore<f64>>, ProviderError> {
        let symbols: Vec<usize> = text.chars().map(symbol).collect();
        if symbols.len() > self.context_limit {
            return Err(ProviderError::ContextLimit {
                limit: self.context_limit,
                got: symbols.len(),
            });
        }
        let mut counts = [0usize; STUB_VOCAB];
        let mut probs = [0.0f64; STUB_VOCAB];
        let mut out = Vec::with_capacity(symbols.len());
        for (i, &s) in symbols.iter().enumerate() {
            let denom = i as f64 + self.smoothing * STUB_VOCAB as f64;
            for (p, &c) in probs.iter_mut().zip(counts.iter()) {
                *p = (c as f64 + self.smoothing) / denom;
            }
            out.push(distribution_stats(&probs, s, top_k));
            counts[s] += 1;
        }
        Ok(out)
    }
}

/// Scorer whose model puts all mass on the token that actually occurs.
#[derive(Debug, Clone, Copy, Default)]
pub struct DegenerateScorer;

impl TokenScorer for DegenerateScorer {
    fn context_limit(&self) -> usize {
        usize::MAX
    }

    fn score(&self, text: &str, top_k: usize) -> Result<Vec<TokenScore<f64>>, ProviderError> {
        let probs = [1.0, 0.0];
        Ok(text.chars().map(|_| distribution_stats(&probs, 0, top_k)).collect())
    }
}

/// Scorer whose model is uniform over `vocab_size` tokens; one token per
/// character.
#[derive(Debug, Clone, Copy)]
pub struct UniformScorer {
    pub vocab_size: usize,
}

impl TokenScorer for UniformScorer {
    fn context_limit(&self) -> usize {
        usize::MAX
    }

    fn score(&self, text: &str, top_k: usize) -> Result<Vec<TokenScore<f64>>, ProviderError> {
        let probs = vec![1.0 / self.vocab_size as f64; self.vocab_size];
        Ok(text
            .chars()
            .map(|c| distribution_stats(&probs, c as usize % self.vocab_size, top_k))
            .collect())
    }
}
