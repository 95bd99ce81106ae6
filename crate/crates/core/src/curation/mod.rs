//! Dataset curation: (context, question, answer, positive, negatives) tuples.
//!
//! For each document the pipeline
//!
//! 1. takes consistent sentences as positives, in document order;
//! 2. asks the generator for question/answer pairs about each positive;
//! 3. keeps a pair only when the verifier says the answer can NOT be derived
//!    from the positive alone;
//! 4. mines negative candidates that are less similar to the question than
//!    the positive, dropping the pair when candidates cover less than `beta`
//!    of the context;
//! 5. drops candidates whose removal shifts the answer distribution by more
//!    than `lambda` (mean per-token KL);
//! 6. samples `negatives` survivors uniformly with a seeded RNG.
//!
//! Failures of a single pair are logged and skipped.

mod filters;
mod prompts;

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::CorpusDoc;
use crate::providers::{DensityProvider, GenerationProvider, SentenceEmbedder};
use crate::segmentation::Document;

pub use filters::{
    classify_candidates, coverage_excluded, is_consistent_sentence, is_english_word, kl_divergence,
    kl_filter, mine_negative_candidates, KlDecision, NegativeMining, KL_EPSILON,
};
pub use prompts::{
    generate_qa, parse_qa_pairs, parse_verdict, question_prompt, verification_prompt, verify_qa,
    DEFAULT_DEMONSTRATION,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationConfig {
    /// Minimum fraction of dictionary words in a positive.
    pub theta: f64,
    /// Minimum candidate coverage as a fraction of context sentences.
    pub beta: f64,
    /// KL threshold for dropping negatives.
    pub lambda: f64,
    /// Negatives per tuple.
    pub negatives: usize,
    pub seed: u64,
    pub max_positives_per_doc: usize,
    /// Condition the density provider on the question as well as the context.
    pub condition_on_question: bool,
    /// Documents processed concurrently.
    pub parallelism: usize,
    pub demonstration: String,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            theta: 0.70,
            beta: 0.30,
            lambda: 4e-3,
            negatives: 2,
            seed: 0,
            max_positives_per_doc: 4,
            condition_on_question: true,
            parallelism: 1,
            demonstration: DEFAULT_DEMONSTRATION.to_string(),
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be in (0, 1], got {v}")))
            }
        };
        frac("theta", self.theta)?;
        frac("beta", self.beta)?;
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.negatives == 0 {
            return Err(Error::InvalidConfig("negatives must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::InvalidConfig("parallelism must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRef {
    pub start_sent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterScores {
    pub eta: f64,
    pub neg_cos: Vec<f64>,
    pub neg_kl: Vec<f64>,
    #[serde(default)]
    pub kl_conditioned_on_question: bool,
}

/// One dataset line. Sentence references index the sentences obtained by
/// splitting `context` with the default splitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationTuple {
    pub id: String,
    pub context: String,
    pub question: String,
    pub answer: String,
    pub positive: SentenceRef,
    pub negatives: Vec<SentenceRef>,
    pub scores: FilterScores,
}

impl CurationTuple {
    pub fn document(&self) -> Document {
        Document::new(self.context.as_str())
    }

    /// Checks the tuple invariants against `lambda` and the expected
    /// negative count.
    pub fn check(&self, lambda: f64, negatives: usize) -> std::result::Result<(), String> {
        let k = self.document().len();
        let pos = self.positive.start_sent;
        if pos >= k {
            return Err(format!("positive {pos} out of range for {k} sentences"));
        }
        if self.negatives.len() != negatives {
            return Err(format!("expected {negatives} negatives, found {}", self.negatives.len()));
        }
        let mut seen = BTreeSet::new();
        for n in &self.negatives {
            let j = n.start_sent;
            if j >= k {
                return Err(format!("negative {j} out of range for {k} sentences"));
            }
            if j == pos {
                return Err(format!("negative {j} equals the positive"));
            }
            if !seen.insert(j) {
                return Err(format!("negative {j} repeated"));
            }
        }
        if self.scores.neg_cos.len() != self.negatives.len()
            || self.scores.neg_kl.len() != self.negatives.len()
        {
            return Err("score arrays do not match the negatives".into());
        }
        if let Some(c) = self.scores.neg_cos.iter().find(|&&c| !(c < self.scores.eta)) {
            return Err(format!("negative cosine {c} is not below eta {}", self.scores.eta));
        }
        if let Some(kl) = self.scores.neg_kl.iter().find(|&&kl| !(kl <= lambda)) {
            return Err(format!("negative KL {kl} exceeds lambda {lambda}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationStats {
    pub documents: usize,
    pub positives: usize,
    pub pairs_generated: usize,
    pub pairs_rejected_by_verifier: usize,
    pub excluded_by_coverage: usize,
    pub too_few_negatives: usize,
    pub errors: usize,
    pub tuples: usize,
}

impl CurationStats {
    fn merge(&mut self, o: &CurationStats) {
        self.documents += o.documents;
        self.positives += o.positives;
        self.pairs_generated += o.pairs_generated;
        self.pairs_rejected_by_verifier += o.pairs_rejected_by_verifier;
        self.excluded_by_coverage += o.excluded_by_coverage;
        self.too_few_negatives += o.too_few_negatives;
        self.errors += o.errors;
        self.tuples += o.tuples;
    }
}

pub struct CurationProviders<'a> {
    pub generator: &'a dyn GenerationProvider,
    pub embedder: &'a dyn SentenceEmbedder,
    pub density: &'a dyn DensityProvider,
}

fn tuple_rng(seed: u64, doc_id: &str, positive: usize, pair: usize) -> ChaCha8Rng {
    let digest = Sha256::digest(format!("{seed}\u{1f}{doc_id}\u{1f}{positive}\u{1f}{pair}"));
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

struct Survivor {
    index: usize,
    cos: f64,
    kl: f64,
}

fn curate_pair(
    doc: &Document,
    cfg: &CurationConfig,
    providers: &CurationProviders<'_>,
    positive: usize,
    question: &str,
    answer: &str,
    stats: &mut CurationStats,
) -> Result<Option<(f64, Vec<Survivor>)>> {
    let p_text = &doc.sentences[positive].text;
    if !verify_qa(providers.generator, &cfg.demonstration, p_text, question, answer)? {
        stats.pairs_rejected_by_verifier += 1;
        return Ok(None);
    }
    let (eta, candidates) =
        match mine_negative_candidates(doc, positive, question, providers.embedder, cfg.beta)? {
            NegativeMining::Excluded { .. } => {
                stats.excluded_by_coverage += 1;
                return Ok(None);
            }
            NegativeMining::Candidates { eta, candidates } => (eta, candidates),
        };
    let conditioning = if cfg.condition_on_question { question } else { "" };
    let mut survivors = Vec::new();
    for (index, cos) in candidates {
        let d = kl_filter(providers.density, doc, conditioning, answer, index, cfg.lambda)?;
        if d.keep {
            survivors.push(Survivor {
                index,
                cos,
                kl: d.score,
            });
        }
    }
    if survivors.len() < cfg.negatives {
        stats.too_few_negatives += 1;
        return Ok(None);
    }
    Ok(Some((eta, survivors)))
}

/// Runs the pipeline over one document.
pub fn curate_document(
    corpus_doc: &CorpusDoc,
    cfg: &CurationConfig,
    providers: &CurationProviders<'_>,
) -> (Vec<CurationTuple>, CurationStats) {
    let mut stats = CurationStats {
        documents: 1,
        ..Default::default()
    };
    let mut out = Vec::new();
    let doc = Document::new(corpus_doc.text.as_str());
    if doc.len() < 2 {
        return (out, stats);
    }
    let positives: Vec<usize> = doc
        .sentences
        .iter()
        .enumerate()
        .filter(|(_, s)| is_consistent_sentence(&s.text, cfg.theta))
        .map(|(i, _)| i)
        .take(cfg.max_positives_per_doc)
        .collect();
    for positive in positives {
        stats.positives += 1;
        let pairs = match generate_qa(providers.generator, &corpus_doc.text, &doc.sentences[positive].text) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("{}: sentence {positive}: question generation failed: {e}", corpus_doc.id);
                stats.errors += 1;
                continue;
            }
        };
        for (pair_idx, (question, answer)) in pairs.into_iter().enumerate() {
            stats.pairs_generated += 1;
            let result = curate_pair(&doc, cfg, providers, positive, &question, &answer, &mut stats);
            let (eta, survivors) = match result {
                Ok(Some(found)) => found,
                Ok(None) => continue,
                Err(e) => {
                    log::warn!("{}: sentence {positive}, pair {pair_idx}: {e}", corpus_doc.id);
                    stats.errors += 1;
                    continue;
                }
            };
            let mut rng = tuple_rng(cfg.seed, &corpus_doc.id, positive, pair_idx);
            let mut picked: Vec<usize> = sample(&mut rng, survivors.len(), cfg.negatives).into_vec();
            picked.sort_unstable();
            let chosen: Vec<&Survivor> = picked.iter().map(|&i| &survivors[i]).collect();
            stats.tuples += 1;
            out.push(CurationTuple {
                id: format!("{}-s{positive}-q{pair_idx}", corpus_doc.id),
                context: corpus_doc.text.clone(),
                question,
                answer,
                positive: SentenceRef { start_sent: positive },
                negatives: chosen.iter().map(|s| SentenceRef { start_sent: s.index }).collect(),
                scores: FilterScores {
                    eta,
                    neg_cos: chosen.iter().map(|s| s.cos).collect(),
                    neg_kl: chosen.iter().map(|s| s.kl).collect(),
                    kl_conditioned_on_question: cfg.condition_on_question,
                },
            });
        }
    }
    (out, stats)
}

/// Runs the pipeline over a corpus, handing tuples to `emit` in corpus order.
/// Up to `cfg.parallelism` documents are processed at once; the emitted
/// sequence does not depend on the degree of parallelism.
pub fn build_dataset(
    corpus: &[CorpusDoc],
    cfg: &CurationConfig,
    providers: &CurationProviders<'_>,
    mut emit: impl FnMut(&CurationTuple) -> Result<()>,
) -> Result<CurationStats> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut stats = CurationStats::default();
    for chunk in corpus.chunks(cfg.parallelism.max(1) * 4) {
        let results: Vec<(Vec<CurationTuple>, CurationStats)> = pool.install(|| {
            chunk
                .par_iter()
                .map(|d| curate_document(d, cfg, providers))
                .collect()
        });
        for (tuples, s) in results {
            stats.merge(&s);
            for t in &tuples {
                emit(t)?;
            }
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub lines: usize,
    pub failures: Vec<(usize, String)>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks every line of a dataset file; failures name the 1-based line.
pub fn validate_dataset(
    path: impl AsRef<std::path::Path>,
    lambda: f64,
    negatives: usize,
) -> Result<ValidationReport> {
    use std::io::BufRead;
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut report = ValidationReport::default();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        let verdict = serde_json::from_str::<CurationTuple>(&line)
            .map_err(|e| e.to_string())
            .and_then(|t| t.check(lambda, negatives));
        if let Err(msg) = verdict {
            report.failures.push((n + 1, msg));
        }
    }
    Ok(report)
}
