//! Oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use cpc::trainer::{
    build_in_batch_negatives, contrastive_loss, mask_tokens, mntp_loss, objective,
    ContrastiveBatch, MaskedSequence, MntpTarget, TrainConfig, TrainExample, ToyEncoderParams,
    MASK_ID,
};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for relative error: |a - n| / max(|a|, |n|, floor).
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn central_diff(mut f: impl FnMut(f64) -> f64, x: f64) -> f64 {
    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Array1<f64> {
    let v: Array1<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.dot(&v).sqrt();
    v / n
}

pub fn random_contrastive_batch(rng: &mut ChaCha8Rng, b: usize, m: usize, d: usize) -> ContrastiveBatch {
    ContrastiveBatch {
        questions: (0..b).map(|_| random_unit(rng, d)).collect(),
        positives: (0..b).map(|_| random_unit(rng, d)).collect(),
        negatives: (0..b).map(|_| (0..m).map(|_| random_unit(rng, d)).collect()).collect(),
    }
}

fn coords(batch: &ContrastiveBatch) -> Vec<(usize, usize, usize, usize)> {
    // (kind, sample, negative, component)
    let d = batch.questions[0].len();
    let mut out = Vec::new();
    for b in 0..batch.questions.len() {
        for c in 0..d {
            out.push((0, b, 0, c));
            out.push((1, b, 0, c));
            for n in 0..batch.negatives[b].len() {
                out.push((2, b, n, c));
            }
        }
    }
    out
}

fn coord_mut(batch: &mut ContrastiveBatch, (kind, b, n, c): (usize, usize, usize, usize)) -> &mut f64 {
    match kind {
        0 => &mut batch.questions[b][c],
        1 => &mut batch.positives[b][c],
        _ => &mut batch.negatives[b][n][c],
    }
}

/// Max relative error of the contrastive gradient on one random instance.
pub fn contrastive_grad_error(seed: u64, temperature: f64, literal: bool) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = rng.random_range(2..5);
    let m = rng.random_range(1..4);
    let batch = random_contrastive_batch(&mut rng, b, m, 8);
    let sets = build_in_batch_negatives(b, m);
    let out = contrastive_loss(&batch, &sets, temperature, literal);
    let mut worst: f64 = 0.0;
    for k in coords(&batch) {
        let mut probe = batch.clone();
        let x = *coord_mut(&mut probe, k);
        let numeric = central_diff(
            |v| {
                *coord_mut(&mut probe, k) = v;
                contrastive_loss(&probe, &sets, temperature, literal).loss
            },
            x,
        );
        let analytic = *coord_mut(&mut out.grads.clone(), k);
        worst = worst.max(rel_err(analytic, numeric));
    }
    worst
}

fn random_ids(rng: &mut ChaCha8Rng, vocab: usize, len: usize) -> Vec<usize> {
    (0..len).map(|_| rng.random_range(2..vocab)).collect()
}

fn max_param_error(
    params: &ToyEncoderParams,
    grads: &ToyEncoderParams,
    mut loss: impl FnMut(&ToyEncoderParams) -> f64,
) -> f64 {
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for i in 0..params.num_params() {
        let x = params.get(i);
        let numeric = central_diff(
            |v| {
                probe.set(i, v);
                loss(&probe)
            },
            x,
        );
        probe.set(i, x);
        worst = worst.max(rel_err(grads.get(i), numeric));
    }
    worst
}

/// Max relative error of the MNTP gradient over every parameter.
pub fn mntp_grad_error(seed: u64, target: MntpTarget) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ToyEncoderParams::init(50, 8, seed);
    let batch: Vec<MaskedSequence> = (0..2)
        .map(|k| {
            let len = rng.random_range(4..10);
            mask_tokens(&random_ids(&mut rng, 50, len), 0.5, MASK_ID, seed * 7 + k)
        })
        .collect();
    let (_, grads) = mntp_loss(&params, &batch, target).expect("predictable positions");
    max_param_error(&params, &grads, |p| mntp_loss(p, &batch, target).unwrap().0)
}

/// Max relative error of the full L_SC + L_MNTP gradient through the encoder.
pub fn objective_grad_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = ToyEncoderParams::init(50, 8, seed);
    let examples: Vec<TrainExample> = (0..2)
        .map(|_| {
            let context = random_ids(&mut rng, 50, 12);
            TrainExample {
                context,
                question: random_ids(&mut rng, 50, 4),
                positive: (0, 3),
                negatives: vec![(4, 7), (8, 11)],
            }
        })
        .collect();
    let batch: Vec<&TrainExample> = examples.iter().collect();
    let masked: Vec<MaskedSequence> = examples
        .iter()
        .enumerate()
        .map(|(k, e)| mask_tokens(&e.context, 0.8, MASK_ID, seed + k as u64))
        .collect();
    let cfg = TrainConfig { dim: 8, ..TrainConfig::default() };
    let obj = objective(&params, &batch, &masked, &cfg).unwrap();
    max_param_error(&params, &obj.grads, |p| objective(p, &batch, &masked, &cfg).unwrap().total())
}

/// Losses of `steps` updates on one fixed batch with fixed masks.
pub fn overfit_one_batch(steps: usize, learning_rate: f64, seed: u64) -> Vec<f64> {
    use cpc::trainer::{build_vocab, synthetic_cqr, train_step, Adam};
    let data = synthetic_cqr(8, seed);
    let vocab = build_vocab(&data);
    let examples: Vec<TrainExample> = data
        .iter()
        .map(|t| TrainExample::from_tuple(t, &vocab, 2).unwrap())
        .collect();
    let batch: Vec<&TrainExample> = examples.iter().collect();
    let masked: Vec<MaskedSequence> = examples
        .iter()
        .enumerate()
        .map(|(k, e)| mask_tokens(&e.context, 0.8, MASK_ID, seed + k as u64))
        .collect();
    let cfg = TrainConfig { dim: 32, learning_rate, ..TrainConfig::default() };
    let mut params = ToyEncoderParams::init(vocab.len(), cfg.dim, seed);
    let mut adam = Adam::new(&params, 0.0);
    (0..steps)
        .map(|_| train_step(&mut params, &mut adam, &batch, &masked, &cfg).unwrap().l)
        .collect()
}

pub fn decrease_fraction(losses: &[f64]) -> f64 {
    let down = losses.windows(2).filter(|w| w[1] < w[0]).count();
    down as f64 / (losses.len() - 1) as f64
}
