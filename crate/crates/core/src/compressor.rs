//! Question-aware sentence selection under a token budget.
//!
//! Every sentence is scored by the cosine between its context-aware embedding
//! (pooled from a single pass over the whole document) and the embedding of
//! the question encoded on its own. Sentences are then taken greedily in
//! descending score order, skipping any that no longer fit, and the kept
//! sentences are re-emitted in their original order.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::{cosine, embed_question, pool_span, ContextEncoder};
use crate::segmentation::{DefaultTokenizer, Document, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Keep at most `floor(ratio * L)` tokens.
    Ratio(f64),
    Tokens(usize),
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Budget::Ratio(r) if !(r > 0.0 && r <= 1.0) => Err(Error::InvalidRequest(format!(
                "ratio must be in (0, 1], got {r}"
            ))),
            Budget::Tokens(0) => Err(Error::InvalidRequest("budget must be at least 1 token".into())),
            _ => Ok(()),
        }
    }

    /// Token budget for a context of `original_tokens` tokens.
    pub fn resolve(&self, original_tokens: usize) -> Result<usize> {
        self.validate()?;
        match *self {
            Budget::Tokens(n) => Ok(n),
            Budget::Ratio(ratio) => {
                // the epsilon absorbs representation error such as 0.29 * 100 = 28.999..
                let n = (ratio * original_tokens as f64 + 1e-9).floor() as usize;
                if n == 0 {
                    Err(Error::ZeroBudget {
                        ratio,
                        original_tokens,
                    })
                } else {
                    Ok(n)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompressionRequest {
    pub context: Document,
    pub question: String,
    pub budget: Budget,
}

impl CompressionRequest {
    pub fn new(context: Document, question: impl Into<String>, budget: Budget) -> Result<Self> {
        budget.validate()?;
        Ok(Self {
            context,
            question: question.into(),
            budget,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSentence {
    pub index: usize,
    pub score: f64,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionResult {
    pub kept_indices: Vec<usize>,
    pub compressed_text: String,
    pub original_tokens: usize,
    pub compressed_tokens: usize,
    pub budget_tokens: usize,
    pub realized_ratio: f64,
    pub truncated: bool,
    /// Relevance of every sentence, in document order.
    pub scores: Vec<ScoredSentence>,
}

/// Orders by descending score, ties broken by ascending index.
fn by_relevance(a: &ScoredSentence, b: &ScoredSentence) -> Ordering {
    b.score.total_cmp(&a.score).then(a.index.cmp(&b.index))
}

/// Greedy selection: walk the ranking and keep every sentence that still fits.
/// The returned indices are ascending.
pub fn select_under_budget(scored: &[ScoredSentence], budget: usize) -> Vec<usize> {
    let mut ranking: Vec<&ScoredSentence> = scored.iter().collect();
    ranking.sort_by(|a, b| by_relevance(a, b));
    let mut remaining = budget;
    let mut kept: Vec<usize> = Vec::new();
    for s in ranking {
        if s.token_count <= remaining {
            remaining -= s.token_count;
            kept.push(s.index);
        }
    }
    kept.sort_unstable();
    kept
}

pub struct Compressor<E, T = DefaultTokenizer> {
    pub encoder: E,
    pub tokenizer: T,
}

impl<E: ContextEncoder> Compressor<E> {
    pub fn new(encoder: E) -> Self {
        Self {
            encoder,
            tokenizer: DefaultTokenizer,
        }
    }
}

impl<E: ContextEncoder, T: Tokenizer> Compressor<E, T> {
    pub fn with_tokenizer(encoder: E, tokenizer: T) -> Self {
        Self { encoder, tokenizer }
    }

    /// One relevance score per sentence, in document order.
    pub fn score_sentences(&self, req: &CompressionRequest) -> Result<Vec<ScoredSentence>> {
        let doc = &req.context;
        if doc.is_empty() {
            return Err(Error::EmptyContext);
        }
        if req.question.trim().is_empty() {
            return Err(Error::EmptyQuestion);
        }
        let question = embed_question(&self.encoder, &self.tokenizer, &req.question)?;
        let tokens = self.encoder.embed_document(&doc.tokens)?;
        doc.sentences
            .iter()
            .enumerate()
            .map(|(index, s)| {
                let sentence = pool_span(&tokens, s.token_span.0, s.token_span.1)?;
                Ok(ScoredSentence {
                    index,
                    score: cosine(&sentence, &question)?,
                    token_count: s.token_count,
                })
            })
            .collect()
    }

    pub fn compress(&self, req: &CompressionRequest) -> Result<CompressionResult> {
        let doc = &req.context;
        if doc.is_empty() {
            return Err(Error::EmptyContext);
        }
        let original_tokens = doc.token_count;
        let budget = req.budget.resolve(original_tokens)?;
        let scores = self.score_sentences(req)?;
        let kept = select_under_budget(&scores, budget);

        let (kept_indices, compressed_text, truncated) = if kept.is_empty() {
            let best = scores
                .iter()
                .min_by(|a, b| by_relevance(a, b))
                .expect("at least one sentence");
            let text = &doc.sentences[best.index].text;
            let spans = self.tokenizer.token_spans(text);
            let cut = spans[budget.min(spans.len()) - 1].end;
            (vec![best.index], text[..cut].to_string(), true)
        } else {
            let text = kept
                .iter()
                .map(|&i| doc.sentences[i].text.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            (kept, text, false)
        };
        let compressed_tokens = self.tokenizer.count(&compressed_text);
        Ok(CompressionResult {
            kept_indices,
            compressed_text,
            original_tokens,
            compressed_tokens,
            budget_tokens: budget,
            realized_ratio: compressed_tokens as f64 / original_tokens as f64,
            truncated,
            scores,
        })
    }
}
