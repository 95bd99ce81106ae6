//! Model roles used by the compressor and the curation pipeline.
//!
//! * [`ContextEncoder`]: token-level embeddings of a whole document, pooled
//!   into context-aware sentence vectors with [`pool_span`].
//! * [`SentenceEmbedder`]: a plain (context-free) text embedder used to mine
//!   negative candidates.
//! * [`GenerationProvider`]: a text generator used to write and verify
//!   question/answer pairs.
//! * [`DensityProvider`]: full next-token distributions over an answer, used by
//!   the KL filter.
//!
//! Every [`Embedding`] leaving this module has unit norm.

mod density;
mod hash;
mod remote;
mod scripted;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::{DefaultTokenizer, Tokenizer};

pub use density::{BigramDensity, DensityVocab, UnigramDensity};
pub use hash::HashEncoder;
pub use remote::{HttpConfig, RemoteEncoder, RemoteGenerator, ENV_API_KEY, ENV_EMBED_URL, ENV_LLM_URL};
pub use scripted::{prompt_key, ScriptRule, ScriptedGenerator};

/// Norm below which a pooled vector is rejected.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// One embedding row per document token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddings {
    pub vectors: Array2<f64>,
}

impl TokenEmbeddings {
    pub fn new(vectors: Array2<f64>) -> Self {
        Self { vectors }
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }
}

/// A unit-norm vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    /// Normalizes `values`; fails when the norm is below [`DEGENERATE_NORM`].
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm >= DEGENERATE_NORM) {
            return Err(Error::DegenerateSpan { norm });
        }
        Ok(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub trait ContextEncoder: Send + Sync {
    /// Maximum number of tokens accepted by [`ContextEncoder::embed_document`].
    fn max_tokens(&self) -> usize {
        usize::MAX
    }

    fn embed_document(&self, tokens: &[String]) -> Result<TokenEmbeddings>;
}

impl<T: ContextEncoder + ?Sized> ContextEncoder for &T {
    fn max_tokens(&self) -> usize {
        (**self).max_tokens()
    }

    fn embed_document(&self, tokens: &[String]) -> Result<TokenEmbeddings> {
        (**self).embed_document(tokens)
    }
}

impl<T: ContextEncoder + ?Sized> ContextEncoder for Box<T> {
    fn max_tokens(&self) -> usize {
        (**self).max_tokens()
    }

    fn embed_document(&self, tokens: &[String]) -> Result<TokenEmbeddings> {
        (**self).embed_document(tokens)
    }
}

pub(crate) fn check_context(tokens: &[String], limit: usize) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::EmptyContext);
    }
    if tokens.len() > limit {
        return Err(Error::ContextOverflow {
            tokens: tokens.len(),
            limit,
        });
    }
    Ok(())
}

/// Context-aware embedding of the inclusive token span `i..=j`: the
/// normalized mean of its token vectors.
pub fn pool_span(emb: &TokenEmbeddings, i: usize, j: usize) -> Result<Embedding> {
    if i > j || j >= emb.len() {
        return Err(Error::InvalidSpan {
            start: i,
            end: j,
            len: emb.len(),
        });
    }
    let mean = emb
        .vectors
        .slice(ndarray::s![i..=j, ..])
        .mean_axis(Axis(0))
        .expect("span is nonempty");
    Embedding::normalized(mean.to_vec())
}

/// Embeds the question on its own, without any surrounding context.
pub fn embed_question(
    encoder: &dyn ContextEncoder,
    tokenizer: &dyn Tokenizer,
    question: &str,
) -> Result<Embedding> {
    let tokens: Vec<String> = tokenizer
        .tokens(question)
        .into_iter()
        .map(str::to_string)
        .collect();
    if tokens.is_empty() {
        return Err(Error::EmptyQuestion);
    }
    let emb = encoder.embed_document(&tokens)?;
    pool_span(&emb, 0, tokens.len() - 1)
}

pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let va = ArrayView1::from(a.values());
    let vb = ArrayView1::from(b.values());
    let denom = (va.dot(&va) * vb.dot(&vb)).sqrt();
    Ok((va.dot(&vb) / denom).clamp(-1.0, 1.0))
}

/// Plain, context-free text embedder.
pub trait SentenceEmbedder: Send + Sync {
    fn embed_text(&self, text: &str) -> Result<Embedding>;
}

/// Uses a [`ContextEncoder`] as a plain embedder by encoding each text alone.
pub struct Standalone<E> {
    pub encoder: E,
}

impl<E: ContextEncoder> SentenceEmbedder for Standalone<E> {
    fn embed_text(&self, text: &str) -> Result<Embedding> {
        embed_question(&self.encoder, &DefaultTokenizer, text)
    }
}

pub trait GenerationProvider: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<String>;
}

/// Next-token distributions at each answer position, under teacher forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerDensities {
    pub distributions: Vec<Vec<f64>>,
    pub vocab_size: usize,
}

pub trait DensityProvider: Send + Sync {
    /// Distributions for every answer token given `context` followed by
    /// `question` (an empty question conditions on the context only).
    fn answer_distributions(
        &self,
        context: &str,
        question: &str,
        answer: &str,
    ) -> Result<AnswerDensities>;
}
