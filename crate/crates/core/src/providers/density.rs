//! Count-based density providers over a small closed vocabulary.
//!
//! Both providers estimate their statistics from the conditioning text alone
//! (context, then question) with add-`alpha` smoothing, so removing a
//! sentence from the context changes the answer distributions only through
//! the counts it contributed.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{AnswerDensities, DensityProvider};
use crate::error::{Error, Result};
use crate::segmentation::{DefaultTokenizer, Tokenizer};

pub const UNK: &str = "<unk>";

/// Lowercased token vocabulary; id 0 is reserved for unknown tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct DensityVocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for DensityVocab {
    fn from(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self { words, index }
    }
}

impl From<DensityVocab> for Vec<String> {
    fn from(v: DensityVocab) -> Self {
        v.words
    }
}

impl DensityVocab {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut set = BTreeMap::new();
        for text in texts {
            for tok in DefaultTokenizer.tokens(text) {
                set.insert(tok.to_lowercase(), ());
            }
        }
        let words: Vec<String> = std::iter::once(UNK.to_string())
            .chain(set.into_keys().filter(|w| w != UNK))
            .collect();
        words.into()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(&token.to_lowercase()).copied().unwrap_or(0)
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        DefaultTokenizer
            .tokens(text)
            .into_iter()
            .map(|t| self.id(t))
            .collect()
    }
}

fn conditioning_ids(vocab: &DensityVocab, context: &str, question: &str) -> Vec<usize> {
    let mut ids = vocab.encode(context);
    ids.extend(vocab.encode(question));
    ids
}

fn answer_ids(vocab: &DensityVocab, answer: &str) -> Result<Vec<usize>> {
    let ids = vocab.encode(answer);
    if ids.is_empty() {
        return Err(Error::EmptyAnswer);
    }
    Ok(ids)
}

fn smoothed(counts: &[f64], alpha: f64) -> Vec<f64> {
    let total: f64 = counts.iter().sum::<f64>() + alpha * counts.len() as f64;
    counts.iter().map(|c| (c + alpha) / total).collect()
}

/// Position-independent unigram distribution of the conditioning text.
#[derive(Debug, Clone)]
pub struct UnigramDensity {
    pub vocab: DensityVocab,
    pub alpha: f64,
}

impl UnigramDensity {
    pub fn new(vocab: DensityVocab) -> Self {
        Self { vocab, alpha: 1.0 }
    }
}

impl DensityProvider for UnigramDensity {
    fn answer_distributions(
        &self,
        context: &str,
        question: &str,
        answer: &str,
    ) -> Result<AnswerDensities> {
        let answer = answer_ids(&self.vocab, answer)?;
        let mut counts = vec![0.0; self.vocab.len()];
        for id in conditioning_ids(&self.vocab, context, question) {
            counts[id] += 1.0;
        }
        let dist = smoothed(&counts, self.alpha);
        Ok(AnswerDensities {
            distributions: vec![dist; answer.len()],
            vocab_size: self.vocab.len(),
        })
    }
}

/// Smoothed bigram model estimated from the conditioning text.
///
/// The distribution at answer position `t` is `P(. | previous token)`, where
/// the previous token is the last conditioning token for `t = 0` and the
/// teacher-forced answer token `t - 1` afterwards. An empty conditioning text
/// yields a uniform first distribution.
#[derive(Debug, Clone)]
pub struct BigramDensity {
    pub vocab: DensityVocab,
    pub alpha: f64,
}

impl BigramDensity {
    pub fn new(vocab: DensityVocab) -> Self {
        Self { vocab, alpha: 1.0 }
    }
}

impl DensityProvider for BigramDensity {
    fn answer_distributions(
        &self,
        context: &str,
        question: &str,
        answer: &str,
    ) -> Result<AnswerDensities> {
        let answer = answer_ids(&self.vocab, answer)?;
        let cond = conditioning_ids(&self.vocab, context, question);
        let v = self.vocab.len();
        let mut rows: HashMap<usize, Vec<f64>> = HashMap::new();
        for pair in cond.windows(2) {
            rows.entry(pair[0]).or_insert_with(|| vec![0.0; v])[pair[1]] += 1.0;
        }
        let empty = vec![0.0; v];
        let distributions = (0..answer.len())
            .map(|t| {
                let prev = if t == 0 { cond.last().copied() } else { Some(answer[t - 1]) };
                let counts = prev.and_then(|p| rows.get(&p)).unwrap_or(&empty);
                smoothed(counts, self.alpha)
            })
            .collect();
        Ok(AnswerDensities {
            distributions,
            vocab_size: v,
        })
    }
}
