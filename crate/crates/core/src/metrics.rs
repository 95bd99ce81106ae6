//! Answer-quality metrics.
//!
//! Text normalization is fixed: lowercase, delete punctuation, collapse
//! whitespace; token F1 additionally drops the articles `a`, `an`, `the`.
//! Two empty normalized sides count as a perfect match; one empty side
//! scores 0.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
}

impl MetricReport {
    fn plain(metric: &str, score: f64) -> Self {
        Self {
            metric: metric.to_string(),
            score,
            precision: None,
            recall: None,
        }
    }

    fn prf(metric: &str, precision: f64, recall: f64) -> Self {
        let score = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            metric: metric.to_string(),
            score,
            precision: Some(precision),
            recall: Some(recall),
        }
    }
}

pub fn normalize(text: &str) -> String {
    let stripped: String = text
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn words(text: &str) -> Vec<String> {
    normalize(text).split(' ').filter(|w| !w.is_empty()).map(str::to_string).collect()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// LCS-based F-measure over normalized word sequences.
pub fn rouge_l(reference: &str, hypothesis: &str) -> MetricReport {
    let (r, h) = (words(reference), words(hypothesis));
    match (r.is_empty(), h.is_empty()) {
        (true, true) => return MetricReport::prf("rouge_l", 1.0, 1.0),
        (true, false) | (false, true) => return MetricReport::prf("rouge_l", 0.0, 0.0),
        _ => {}
    }
    let lcs = lcs_len(&r, &h) as f64;
    MetricReport::prf("rouge_l", lcs / h.len() as f64, lcs / r.len() as f64)
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Bag-of-words F1 after normalization and article removal.
pub fn token_f1(reference: &str, hypothesis: &str) -> MetricReport {
    let bag = |t: &str| -> Vec<String> {
        words(t)
            .into_iter()
            .filter(|w| !ARTICLES.contains(&w.as_str()))
            .collect()
    };
    let (r, h) = (bag(reference), bag(hypothesis));
    match (r.is_empty(), h.is_empty()) {
        (true, true) => return MetricReport::prf("token_f1", 1.0, 1.0),
        (true, false) | (false, true) => return MetricReport::prf("token_f1", 0.0, 0.0),
        _ => {}
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for w in &r {
        *counts.entry(w).or_default() += 1;
    }
    let mut common = 0usize;
    for w in &h {
        if let Some(c) = counts.get_mut(w.as_str()).filter(|c| **c > 0) {
            *c -= 1;
            common += 1;
        }
    }
    let common = common as f64;
    MetricReport::prf("token_f1", common / h.len() as f64, common / r.len() as f64)
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = (up + 1).min(row[j] + 1).min(diag + usize::from(ca != cb));
            diag = up;
        }
    }
    row[b.len()]
}

/// `1 - levenshtein / max(len)` over characters of the raw strings.
pub fn edit_similarity(reference: &str, hypothesis: &str) -> MetricReport {
    let longest = reference.chars().count().max(hypothesis.chars().count());
    let score = if longest == 0 {
        1.0
    } else {
        1.0 - levenshtein(reference, hypothesis) as f64 / longest as f64
    };
    MetricReport::plain("edit_similarity", score)
}

/// Fraction of gold keywords found among the extracted ones.
pub fn keyword_recall<S: AsRef<str>>(gold: &[S], extracted: &[S]) -> Result<MetricReport> {
    let norm = |xs: &[S]| -> BTreeSet<String> {
        xs.iter()
            .map(|x| normalize(x.as_ref()))
            .filter(|x| !x.is_empty())
            .collect()
    };
    let gold = norm(gold);
    if gold.is_empty() {
        return Err(Error::InvalidRequest("gold keyword set is empty".into()));
    }
    let found = gold.intersection(&norm(extracted)).count();
    let recall = found as f64 / gold.len() as f64;
    Ok(MetricReport {
        metric: "keyword_recall".into(),
        score: recall,
        precision: None,
        recall: Some(recall),
    })
}
