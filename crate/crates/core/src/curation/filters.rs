use std::collections::HashSet;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::{cosine, DensityProvider, SentenceEmbedder};
use crate::segmentation::Document;

/// Additive smoothing applied to the second KL argument.
pub const KL_EPSILON: f64 = 1e-10;

static WORDS: LazyLock<HashSet<&'static str>> =
    LazyLock::new(|| include_str!("../../data/english_words.txt").lines().collect());

const SUFFIXES: &[(&str, &str)] = &[
    ("'s", ""),
    ("ies", "y"),
    ("ied", "y"),
    ("es", ""),
    ("s", ""),
    ("ed", ""),
    ("ed", "e"),
    ("ing", ""),
    ("ing", "e"),
    ("ly", ""),
];

/// Dictionary lookup with light inflection stripping.
pub fn is_english_word(word: &str) -> bool {
    let w = word.to_ascii_lowercase();
    if WORDS.contains(w.as_str()) {
        return true;
    }
    SUFFIXES.iter().any(|(suffix, repl)| {
        w.strip_suffix(suffix)
            .filter(|stem| stem.len() >= 2)
            .is_some_and(|stem| WORDS.contains(format!("{stem}{repl}").as_str()))
    })
}

/// True iff the sentence is ASCII-only and at least `theta` of its
/// whitespace-delimited words (edge punctuation removed) are English words.
pub fn is_consistent_sentence(text: &str, theta: f64) -> bool {
    if !text.is_ascii() {
        return false;
    }
    let words: Vec<&str> = text
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_ascii_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect();
    if words.is_empty() {
        return false;
    }
    let known = words.iter().filter(|w| is_english_word(w)).count();
    known as f64 >= theta * words.len() as f64 - 1e-9
}

#[derive(Debug, Clone, PartialEq)]
pub enum NegativeMining {
    Candidates {
        eta: f64,
        /// Candidate sentence indices (ascending) with their cosine to the question.
        candidates: Vec<(usize, f64)>,
    },
    /// Too few candidates: fewer than `beta * K`.
    Excluded { eta: f64, candidate_count: usize },
}

/// Coverage rule: exclude when `count < beta * k`.
pub fn coverage_excluded(candidate_count: usize, beta: f64, k: usize) -> bool {
    // tolerance keeps 3 < 0.3 * 10 (= 3.0000000000000004) false
    (candidate_count as f64) < beta * k as f64 - 1e-9
}

/// Candidates are the non-positive sentences strictly less similar to the
/// question than the positive is, under a plain embedder.
pub fn mine_negative_candidates(
    context: &Document,
    positive: usize,
    question: &str,
    embedder: &dyn SentenceEmbedder,
    beta: f64,
) -> Result<NegativeMining> {
    let k = context.len();
    if k < 2 {
        return Err(Error::InvalidRequest(format!(
            "negative mining needs at least 2 sentences, got {k}"
        )));
    }
    if positive >= k {
        return Err(Error::InvalidRequest(format!("positive index {positive} out of range")));
    }
    let eq = embedder.embed_text(question)?;
    let sims = context
        .sentences
        .iter()
        .map(|s| cosine(&embedder.embed_text(&s.text)?, &eq))
        .collect::<Result<Vec<f64>>>()?;
    Ok(classify_candidates(&sims, positive, beta))
}

/// Candidate rule applied to precomputed sentence-to-question similarities.
/// `eta` is the positive's own similarity.
pub fn classify_candidates(sims: &[f64], positive: usize, beta: f64) -> NegativeMining {
    let eta = sims[positive];
    let candidates: Vec<(usize, f64)> = sims
        .iter()
        .enumerate()
        .filter(|&(j, &s)| j != positive && s < eta)
        .map(|(j, &s)| (j, s))
        .collect();
    if coverage_excluded(candidates.len(), beta, sims.len()) {
        NegativeMining::Excluded {
            eta,
            candidate_count: candidates.len(),
        }
    } else {
        NegativeMining::Candidates { eta, candidates }
    }
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidDistribution("negative or non-finite entry".into()));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidDistribution(format!("sums to {sum}")));
    }
    Ok(())
}

/// `KL(p || q)` in nats, with `q` smoothed by [`KL_EPSILON`] and renormalized.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    check_distribution(p)?;
    check_distribution(q)?;
    let z = 1.0 + KL_EPSILON * q.len() as f64;
    let kl: f64 = p
        .iter()
        .zip(q)
        .filter(|(&pk, _)| pk > 0.0)
        .map(|(&pk, &qk)| pk * (pk / ((qk + KL_EPSILON) / z)).ln())
        .sum();
    Ok(kl.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlDecision {
    pub score: f64,
    pub keep: bool,
}

/// Mean per-position KL between the answer distributions with the full
/// context and with the candidate sentence removed. Kept iff `score <= lambda`.
pub fn kl_filter(
    density: &dyn DensityProvider,
    context: &Document,
    question: &str,
    answer: &str,
    negative: usize,
    lambda: f64,
) -> Result<KlDecision> {
    if answer.trim().is_empty() {
        return Err(Error::EmptyAnswer);
    }
    if negative >= context.len() {
        return Err(Error::InvalidRequest(format!("negative index {negative} out of range")));
    }
    let full = density.answer_distributions(&context.joined_without(None), question, answer)?;
    let ablated =
        density.answer_distributions(&context.joined_without(Some(negative)), question, answer)?;
    if full.distributions.len() != ablated.distributions.len() {
        return Err(Error::DimensionMismatch {
            left: full.distributions.len(),
            right: ablated.distributions.len(),
        });
    }
    let mut total = 0.0;
    for (p, q) in full.distributions.iter().zip(&ablated.distributions) {
        total += kl_divergence(p, q)?;
    }
    let score = total / full.distributions.len() as f64;
    Ok(KlDecision {
        score,
        keep: score <= lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn consistency_examples() {
        assert!(is_consistent_sentence("The cat sat.", 0.7));
        assert!(!is_consistent_sentence("Zxqv blorp wug.", 0.7));
        assert!(!is_consistent_sentence("naïve approach works", 0.7));
        assert!(!is_consistent_sentence("...", 0.7));
        assert!(is_consistent_sentence("The cats walked quickly to Paris in 1889.", 0.7));
        // 2 of 3 words known
        assert!(!is_consistent_sentence("The blorp sat", 0.7));
        assert!(is_consistent_sentence("The blorp sat", 0.6));
    }

    #[test]
    fn inflections() {
        for w in ["cats", "walked", "lives", "likes", "studies", "making", "John's"] {
            assert!(is_english_word(w), "{w}");
        }
        assert!(!is_english_word("blorps"));
    }

    #[test]
    fn candidate_rule_is_strict() {
        // positive is sentence 0 with eta = 0.8
        let sims = [0.8, 0.9, 0.5, 0.79, 0.8];
        match classify_candidates(&sims, 0, 0.3) {
            NegativeMining::Candidates { eta, candidates } => {
                assert_eq!(eta, 0.8);
                assert_eq!(candidates.iter().map(|c| c.0).collect::<Vec<_>>(), [2, 3]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn coverage_boundary() {
        assert!(coverage_excluded(2, 0.3, 10));
        assert!(!coverage_excluded(3, 0.3, 10));
        assert!(coverage_excluded(0, 0.3, 2));
        assert!(!coverage_excluded(1, 0.3, 2));
        let sims = [0.1, 0.9, 0.95];
        assert!(matches!(
            classify_candidates(&sims, 0, 0.3),
            NegativeMining::Excluded { candidate_count: 0, .. }
        ));
    }

    #[test]
    fn kl_examples() {
        assert_abs_diff_eq!(kl_divergence(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0, epsilon = 1e-9);
        // 0.5 ln(0.5/0.9) + 0.5 ln(0.5/0.1)
        let expected = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        let kl = kl_divergence(&[0.5, 0.5], &[0.9, 0.1]).unwrap();
        assert_abs_diff_eq!(kl, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(kl, 0.5108, epsilon = 1e-3);
        let big = kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!(big.is_finite() && big > 10.0);
        assert!(matches!(
            kl_divergence(&[1.0], &[0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(kl_divergence(&[0.5, 0.6], &[0.5, 0.5]).is_err());
    }

    fn dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n)
            .prop_filter("mass", |v| v.iter().sum::<f64>() > 1e-3)
            .prop_map(|v| {
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect()
            })
    }

    proptest! {
        #[test]
        fn kl_nonnegative((p, q) in (2usize..8).prop_flat_map(|n| (dist(n), dist(n)))) {
            prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
            prop_assert!(kl_divergence(&p, &p).unwrap() < 1e-9);
        }
    }
}
