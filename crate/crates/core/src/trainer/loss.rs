//! Training objectives with analytic gradients.

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::ToyEncoderParams;
use crate::error::{Error, Result};

/// A token sequence with a fraction of positions replaced by the mask id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedSequence {
    pub ids: Vec<usize>,
    /// Masked positions, ascending.
    pub positions: Vec<usize>,
    /// Original ids at `positions`.
    pub targets: Vec<usize>,
}

/// Masks exactly `round(delta * len)` positions chosen without replacement.
pub fn mask_tokens(tokens: &[usize], delta: f64, mask_id: usize, seed: u64) -> MaskedSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    mask_tokens_with(tokens, delta, mask_id, &mut rng)
}

pub fn mask_tokens_with(
    tokens: &[usize],
    delta: f64,
    mask_id: usize,
    rng: &mut ChaCha8Rng,
) -> MaskedSequence {
    let count = ((delta * tokens.len() as f64).round() as usize).min(tokens.len());
    let mut positions = sample(rng, tokens.len(), count).into_vec();
    positions.sort_unstable();
    let targets = positions.iter().map(|&p| tokens[p]).collect();
    let mut ids = tokens.to_vec();
    for &p in &positions {
        ids[p] = mask_id;
    }
    MaskedSequence {
        ids,
        positions,
        targets,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MntpTarget {
    /// Masked token `i` is predicted from the hidden state at `i - 1`.
    NextToken,
    /// Classic masked-LM: predicted from the hidden state at `i`.
    SamePosition,
}

/// Mean cross-entropy over predictable masked positions, with gradients for
/// every parameter.
pub fn mntp_loss(
    params: &ToyEncoderParams,
    batch: &[MaskedSequence],
    target: MntpTarget,
) -> Result<(f64, ToyEncoderParams)> {
    let predicted: usize = batch
        .iter()
        .map(|s| match target {
            MntpTarget::NextToken => s.positions.iter().filter(|&&p| p > 0).count(),
            MntpTarget::SamePosition => s.positions.len(),
        })
        .sum();
    if predicted == 0 {
        return Err(Error::NoPredictablePositions);
    }
    let scale = 1.0 / predicted as f64;
    let mut grads = params.zeros_like();
    let mut loss = 0.0;
    for seq in batch {
        let fwd = params.forward(&seq.ids);
        let mut dz = Array2::zeros(fwd.z.raw_dim());
        for (&pos, &tgt) in seq.positions.iter().zip(&seq.targets) {
            let src = match target {
                MntpTarget::NextToken if pos == 0 => continue,
                MntpTarget::NextToken => pos - 1,
                MntpTarget::SamePosition => pos,
            };
            let h = fwd.z.row(src);
            let logits = h.dot(&params.w_out) + &params.b_out;
            let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let exp = logits.mapv(|x| (x - max).exp());
            let z: f64 = exp.sum();
            loss += (z.ln() + max - logits[tgt]) * scale;
            let mut dlogits = exp / z;
            dlogits[tgt] -= 1.0;
            dlogits *= scale;
            let h_col = h.insert_axis(ndarray::Axis(1));
            let d_row = dlogits.view().insert_axis(ndarray::Axis(0));
            grads.w_out += &h_col.dot(&d_row);
            grads.b_out += &dlogits;
            let mut dh = dz.row_mut(src);
            dh += &params.w_out.dot(&dlogits);
        }
        params.backward(&fwd, &dz, &mut grads);
    }
    Ok((loss, grads))
}

/// Reference to an embedding in a contrastive batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EmbRef {
    Positive(usize),
    /// (sample, negative index within the sample)
    Negative(usize, usize),
}

/// Extended negative set of each sample: positives and negatives of every
/// other sample followed by the sample's own negatives. Each set has
/// `(B - 1) * (1 + M) + M` entries.
pub fn build_in_batch_negatives(batch: usize, negatives: usize) -> Vec<Vec<EmbRef>> {
    (0..batch)
        .map(|b| {
            let mut set = Vec::with_capacity((batch - 1) * (1 + negatives) + negatives);
            for i in (0..batch).filter(|&i| i != b) {
                set.push(EmbRef::Positive(i));
                set.extend((0..negatives).map(|n| EmbRef::Negative(i, n)));
            }
            set.extend((0..negatives).map(|n| EmbRef::Negative(b, n)));
            set
        })
        .collect()
}

/// Unit-norm embeddings of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch {
    pub questions: Vec<Array1<f64>>,
    pub positives: Vec<Array1<f64>>,
    /// `negatives[b][n]`
    pub negatives: Vec<Vec<Array1<f64>>>,
}

impl ContrastiveBatch {
    pub fn get(&self, r: EmbRef) -> &Array1<f64> {
        match r {
            EmbRef::Positive(i) => &self.positives[i],
            EmbRef::Negative(i, n) => &self.negatives[i][n],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |v: &Array1<f64>| Array1::zeros(v.len());
        Self {
            questions: self.questions.iter().map(z).collect(),
            positives: self.positives.iter().map(z).collect(),
            negatives: self
                .negatives
                .iter()
                .map(|ns| ns.iter().map(z).collect())
                .collect(),
        }
    }

    fn get_mut(&mut self, r: EmbRef) -> &mut Array1<f64> {
        match r {
            EmbRef::Positive(i) => &mut self.positives[i],
            EmbRef::Negative(i, n) => &mut self.negatives[i][n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveOutput {
    /// Mean over the batch.
    pub loss: f64,
    pub per_sample: Vec<f64>,
    /// Gradients of `loss` with respect to every embedding.
    pub grads: ContrastiveBatch,
}

/// InfoNCE over each sample's extended negatives.
///
/// Similarities are dot products of the given unit vectors (their cosines).
/// The logit of a similarity `s` is `s / T`, or `exp(s) / T` when
/// `literal_double_exp` is set.
pub fn contrastive_loss(
    batch: &ContrastiveBatch,
    negative_sets: &[Vec<EmbRef>],
    temperature: f64,
    literal_double_exp: bool,
) -> ContrastiveOutput {
    let b = batch.questions.len();
    let logit = |s: f64| {
        if literal_double_exp {
            s.exp() / temperature
        } else {
            s / temperature
        }
    };
    let dlogit = |s: f64| {
        if literal_double_exp {
            s.exp() / temperature
        } else {
            1.0 / temperature
        }
    };
    let mut grads = batch.zeros_like();
    let mut per_sample = Vec::with_capacity(b);
    for (i, negs) in negative_sets.iter().enumerate() {
        let q = &batch.questions[i];
        let targets: Vec<EmbRef> = std::iter::once(EmbRef::Positive(i))
            .chain(negs.iter().copied())
            .collect();
        let sims: Vec<f64> = targets.iter().map(|&r| q.dot(batch.get(r))).collect();
        let logits: Vec<f64> = sims.iter().map(|&s| logit(s)).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exp.iter().sum();
        per_sample.push(z.ln() + max - logits[0]);
        for (k, &r) in targets.iter().enumerate() {
            let dl = (exp[k] / z - if k == 0 { 1.0 } else { 0.0 }) / b as f64;
            let ds = dl * dlogit(sims[k]);
            let x = batch.get(r).clone();
            grads.questions[i].scaled_add(ds, &x);
            grads.get_mut(r).scaled_add(ds, q);
        }
    }
    let loss = per_sample.iter().sum::<f64>() / b as f64;
    ContrastiveOutput {
        loss,
        per_sample,
        grads,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn masking_counts() {
        let toks: Vec<usize> = (10..20).collect();
        let m = mask_tokens(&toks, 0.8, 1, 3);
        assert_eq!(m.positions.len(), 8);
        assert_eq!(m.ids.iter().filter(|&&i| i == 1).count(), 8);
        for (&p, &t) in m.positions.iter().zip(&m.targets) {
            assert_eq!(toks[p], t);
        }
        assert_eq!(mask_tokens(&toks, 0.01, 1, 3).positions.len(), 0);
        assert_eq!(m, mask_tokens(&toks, 0.8, 1, 3));
        assert_ne!(m.positions, mask_tokens(&toks, 0.8, 1, 4).positions);
    }

    #[test]
    fn negative_set_sizes() {
        let sets = build_in_batch_negatives(2, 2);
        assert!(sets.iter().all(|s| s.len() == 5));
        assert_eq!(build_in_batch_negatives(2, 0)[0], [EmbRef::Positive(1)]);
        let sets = build_in_batch_negatives(4, 3);
        for (b, s) in sets.iter().enumerate() {
            assert_eq!(s.len(), 3 * 4 + 3);
            assert!(!s.contains(&EmbRef::Positive(b)));
            assert_eq!(s.iter().filter(|r| matches!(r, EmbRef::Negative(i, _) if *i == b)).count(), 3);
        }
    }

    fn unit(v: &[f64]) -> Array1<f64> {
        let a = Array1::from(v.to_vec());
        let n = a.dot(&a).sqrt();
        a / n
    }

    #[test]
    fn uniform_similarity_gives_log_n_plus_one() {
        let e = unit(&[1.0, 0.0]);
        let batch = ContrastiveBatch {
            questions: vec![e.clone(), e.clone()],
            positives: vec![e.clone(), e.clone()],
            negatives: vec![vec![e.clone(), e.clone()], vec![e.clone(), e.clone()]],
        };
        let out = contrastive_loss(&batch, &build_in_batch_negatives(2, 2), 1.0, false);
        assert_abs_diff_eq!(out.loss, 6f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn separated_positive_landmark() {
        // cos(q,p) = 1 and five negatives at cos = -1: ln(1 + 5 e^-2)
        let q = unit(&[1.0, 0.0]);
        let n = unit(&[-1.0, 0.0]);
        let batch = ContrastiveBatch {
            questions: vec![q.clone(), q.clone()],
            positives: vec![q.clone(), q.clone()],
            negatives: vec![vec![n.clone(); 5], vec![n.clone(); 5]],
        };
        let sets = vec![
            (0..5).map(|k| EmbRef::Negative(0, k)).collect::<Vec<_>>(),
            (0..5).map(|k| EmbRef::Negative(1, k)).collect(),
        ];
        let out = contrastive_loss(&batch, &sets, 1.0, false);
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(out.loss, -(e / (e + 5.0 / e)).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(out.loss, 0.516_814, epsilon = 1e-6);
        // printed double exponent: ln(1 + 5 exp(e^-1) / exp(e))
        let lit = contrastive_loss(&batch, &sets, 1.0, true);
        assert_abs_diff_eq!(lit.loss, (1.0 + 5.0 * (1.0 / e).exp() / e.exp()).ln(), epsilon = 1e-12);
    }

    #[test]
    fn loss_falls_as_positive_similarity_rises() {
        let q = unit(&[1.0, 0.0, 0.0]);
        let n = unit(&[0.0, 1.0, 0.0]);
        let sets = vec![vec![EmbRef::Negative(0, 0)]];
        let mut last = f64::INFINITY;
        for k in 0..=10 {
            let angle = std::f64::consts::PI * (10 - k) as f64 / 10.0;
            let p = Array1::from(vec![angle.cos(), 0.0, angle.sin()]);
            let batch = ContrastiveBatch {
                questions: vec![q.clone()],
                positives: vec![p],
                negatives: vec![vec![n.clone()]],
            };
            let l = contrastive_loss(&batch, &sets, 0.5, false).loss;
            assert!(l < last);
            last = l;
        }
    }

    #[test]
    fn uniform_logits_give_log_vocab() {
        let params = ToyEncoderParams::init(50, 8, 1);
        let mut flat = params.clone();
        flat.w_out.fill(0.0);
        flat.b_out.fill(0.0);
        let seq = mask_tokens(&[3, 4, 5, 6, 7, 8], 0.5, 1, 9);
        let (loss, _) = mntp_loss(&flat, &[seq], MntpTarget::NextToken).unwrap();
        assert_abs_diff_eq!(loss, 50f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn confident_correct_logits_give_near_zero_loss() {
        let mut params = ToyEncoderParams::zeros(6, 2);
        params.b_out[4] = 50.0;
        let seq = MaskedSequence {
            ids: vec![2, 1, 1],
            positions: vec![1, 2],
            targets: vec![4, 4],
        };
        let (loss, _) = mntp_loss(&params, &[seq], MntpTarget::NextToken).unwrap();
        assert!(loss < 1e-15);
    }

    #[test]
    fn position_zero_is_not_predictable() {
        let params = ToyEncoderParams::init(6, 2, 0);
        let seq = MaskedSequence {
            ids: vec![1, 3],
            positions: vec![0],
            targets: vec![2],
        };
        assert!(matches!(
            mntp_loss(&params, &[seq.clone()], MntpTarget::NextToken),
            Err(Error::NoPredictablePositions)
        ));
        assert!(mntp_loss(&params, &[seq], MntpTarget::SamePosition).is_ok());
    }
}
