//! Toy-scale contrastive + MNTP training with hand-written gradients.

pub mod loss;
pub mod model;
pub mod optim;
pub mod synthetic;

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curation::CurationTuple;
use crate::error::{Error, Result};
use crate::segmentation::{DefaultTokenizer, Tokenizer};

pub use loss::{
    build_in_batch_negatives, contrastive_loss, mask_tokens, mntp_loss, ContrastiveBatch,
    ContrastiveOutput, EmbRef, MaskedSequence, MntpTarget,
};
pub use model::{pool, pool_backward, ToyEncoder, ToyEncoderParams, Vocab, MASK_ID, UNK_ID};
pub use optim::Adam;
pub use synthetic::synthetic_cqr;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub negatives: usize,
    pub delta: f64,
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
    pub temperature: f64,
    pub literal_double_exp: bool,
    pub dim: usize,
    pub mntp_target: MntpTarget,
    pub weight_decay: f64,
    /// Held-out accuracy is logged every this many steps (and at the last).
    pub eval_every: usize,
    pub holdout_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            negatives: 2,
            delta: 0.8,
            learning_rate: 5e-5,
            steps: 500,
            seed: 0,
            temperature: 1.0,
            literal_double_exp: false,
            dim: 32,
            mntp_target: MntpTarget::NextToken,
            weight_decay: 0.0,
            eval_every: 50,
            holdout_fraction: 0.25,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must be in (0, 1), got {}", self.delta));
        }
        if self.batch_size < 2 {
            return bad(format!("batch size must be at least 2, got {}", self.batch_size));
        }
        if self.negatives < 1 {
            return bad("at least one negative per positive is required".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("invalid learning rate {}", self.learning_rate));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return bad(format!("holdout fraction must be in [0, 1), got {}", self.holdout_fraction));
        }
        Ok(())
    }
}

/// One tuple converted to ids and inclusive token spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainExample {
    pub context: Vec<usize>,
    pub question: Vec<usize>,
    pub positive: (usize, usize),
    pub negatives: Vec<(usize, usize)>,
}

impl TrainExample {
    pub fn from_tuple(t: &CurationTuple, vocab: &Vocab, negatives: usize) -> Result<Self> {
        let doc = t.document();
        let span = |i: usize| {
            doc.sentences
                .get(i)
                .map(|s| s.token_span)
                .ok_or_else(|| Error::InvalidRequest(format!("{}: sentence {i} out of range", t.id)))
        };
        if t.negatives.len() < negatives {
            return Err(Error::InvalidRequest(format!(
                "{}: {} negatives, need {negatives}",
                t.id,
                t.negatives.len()
            )));
        }
        let question = vocab.encode(&DefaultTokenizer.tokens(&t.question));
        if question.is_empty() {
            return Err(Error::EmptyQuestion);
        }
        Ok(Self {
            context: vocab.encode(&doc.tokens),
            question,
            positive: span(t.positive.start_sent)?,
            negatives: t.negatives[..negatives]
                .iter()
                .map(|n| span(n.start_sent))
                .collect::<Result<_>>()?,
        })
    }
}

/// Vocabulary over contexts and questions.
pub fn build_vocab(dataset: &[CurationTuple]) -> Vocab {
    let mut tokens = Vec::new();
    for t in dataset {
        tokens.extend(DefaultTokenizer.tokens(&t.context));
        tokens.extend(DefaultTokenizer.tokens(&t.question));
    }
    Vocab::build(tokens)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub contrastive: f64,
    pub mntp: f64,
    pub grads: ToyEncoderParams,
}

impl Objective {
    pub fn total(&self) -> f64 {
        self.contrastive + self.mntp
    }
}

/// `L_SC + L_MNTP` for one batch. `masked[b]` is the masked copy of
/// `batch[b].context`.
pub fn objective(
    params: &ToyEncoderParams,
    batch: &[&TrainExample],
    masked: &[MaskedSequence],
    cfg: &TrainConfig,
) -> Result<Objective> {
    let m = batch.iter().map(|e| e.negatives.len()).min().unwrap_or(0);
    let ctx_fwd: Vec<_> = batch.iter().map(|e| params.forward(&e.context)).collect();
    let q_fwd: Vec<_> = batch.iter().map(|e| params.forward(&e.question)).collect();
    let q_pool: Vec<_> = q_fwd.iter().map(|f| pool(&f.z, 0, f.ids.len() - 1)).collect();
    let p_pool: Vec<_> = batch
        .iter()
        .zip(&ctx_fwd)
        .map(|(e, f)| pool(&f.z, e.positive.0, e.positive.1))
        .collect();
    let n_pool: Vec<Vec<_>> = batch
        .iter()
        .zip(&ctx_fwd)
        .map(|(e, f)| e.negatives[..m].iter().map(|&(i, j)| pool(&f.z, i, j)).collect())
        .collect();
    let cb = ContrastiveBatch {
        questions: q_pool.iter().map(|p| p.unit.clone()).collect(),
        positives: p_pool.iter().map(|p| p.unit.clone()).collect(),
        negatives: n_pool.iter().map(|ns| ns.iter().map(|p| p.unit.clone()).collect()).collect(),
    };
    let sets = build_in_batch_negatives(batch.len(), m);
    let sc = contrastive_loss(&cb, &sets, cfg.temperature, cfg.literal_double_exp);

    let (l_mntp, mut grads) = mntp_loss(params, masked, cfg.mntp_target)?;
    for b in 0..batch.len() {
        let mut dz = ndarray::Array2::zeros(q_fwd[b].z.raw_dim());
        pool_backward(&q_pool[b], &sc.grads.questions[b], &mut dz);
        params.backward(&q_fwd[b], &dz, &mut grads);

        let mut dz = ndarray::Array2::zeros(ctx_fwd[b].z.raw_dim());
        pool_backward(&p_pool[b], &sc.grads.positives[b], &mut dz);
        for (p, g) in n_pool[b].iter().zip(&sc.grads.negatives[b]) {
            pool_backward(p, g, &mut dz);
        }
        params.backward(&ctx_fwd[b], &dz, &mut grads);
    }
    Ok(Objective {
        contrastive: sc.loss,
        mntp: l_mntp,
        grads,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub l_sc: f64,
    pub l_mntp: f64,
    pub l: f64,
}

/// Computes the objective and applies one Adam update.
pub fn train_step(
    params: &mut ToyEncoderParams,
    adam: &mut Adam,
    batch: &[&TrainExample],
    masked: &[MaskedSequence],
    cfg: &TrainConfig,
) -> Result<StepLosses> {
    let obj = objective(params, batch, masked, cfg)?;
    let l = obj.total();
    if !l.is_finite() || !obj.grads.all_finite() {
        return Err(Error::NonFiniteLoss {
            step: adam.steps_taken() as usize + 1,
            contrastive: obj.contrastive,
            mntp: obj.mntp,
        });
    }
    adam.update(params, &obj.grads, cfg.learning_rate);
    Ok(StepLosses {
        l_sc: obj.contrastive,
        l_mntp: obj.mntp,
        l,
    })
}

/// Fraction of examples whose positive has a strictly higher
/// cosine-to-question than every one of its negatives.
pub fn retrieval_accuracy(params: &ToyEncoderParams, examples: &[TrainExample]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let hits = examples
        .iter()
        .filter(|e| {
            let q = params.forward(&e.question);
            let q = pool(&q.z, 0, e.question.len() - 1).unit;
            let z = params.forward(&e.context).z;
            let pos = q.dot(&pool(&z, e.positive.0, e.positive.1).unit);
            e.negatives.iter().all(|&(i, j)| q.dot(&pool(&z, i, j).unit) < pos)
        })
        .count();
    hits as f64 / examples.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub l_sc: f64,
    pub l_mntp: f64,
    pub l: f64,
    pub retrieval_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub encoder: ToyEncoder,
    pub log: Vec<LogRow>,
    /// Held-out accuracy before the first update.
    pub initial_accuracy: Option<f64>,
    pub train_size: usize,
    pub holdout_size: usize,
}

impl TrainOutcome {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.log.iter().rev().find_map(|r| r.retrieval_acc).or(self.initial_accuracy)
    }

    /// First step at which held-out accuracy reached `target`.
    pub fn steps_to_accuracy(&self, target: f64) -> Option<usize> {
        if self.initial_accuracy.is_some_and(|a| a >= target) {
            return Some(0);
        }
        self.log
            .iter()
            .find(|r| r.retrieval_acc.is_some_and(|a| a >= target))
            .map(|r| r.step)
    }
}

/// Trains a fresh toy encoder on `dataset`.
///
/// The dataset is permuted with the seed; the last `holdout_fraction` of it
/// is held out. Batches are drawn from the training part by epoch-wise
/// seeded shuffling; leftovers smaller than a batch roll into the next
/// epoch's shuffle.
pub fn train(dataset: &[CurationTuple], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let vocab = build_vocab(dataset);
    let examples = dataset
        .iter()
        .map(|t| TrainExample::from_tuple(t, &vocab, cfg.negatives))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut rng);
    let holdout_size = (cfg.holdout_fraction * examples.len() as f64).round() as usize;
    let train_size = examples.len() - holdout_size;
    if train_size < cfg.batch_size {
        return Err(Error::InvalidConfig(format!(
            "batch size {} exceeds the {train_size} training tuples",
            cfg.batch_size
        )));
    }
    let train_set: Vec<&TrainExample> = order[..train_size].iter().map(|&i| &examples[i]).collect();
    let holdout: Vec<TrainExample> = order[train_size..].iter().map(|&i| examples[i].clone()).collect();

    let mut params = ToyEncoderParams::init(vocab.len(), cfg.dim, cfg.seed);
    let mut adam = Adam::new(&params, cfg.weight_decay);
    let evaluate = |p: &ToyEncoderParams| (!holdout.is_empty()).then(|| retrieval_accuracy(p, &holdout));
    let initial_accuracy = evaluate(&params);
    let mut log = Vec::with_capacity(cfg.steps);
    let mut queue: Vec<usize> = Vec::new();
    for step in 1..=cfg.steps {
        if queue.len() < cfg.batch_size {
            let mut fresh: Vec<usize> = (0..train_size).collect();
            fresh.shuffle(&mut rng);
            queue.extend(fresh);
        }
        let picked: Vec<usize> = queue.drain(..cfg.batch_size).collect();
        let batch: Vec<&TrainExample> = picked.iter().map(|&i| train_set[i]).collect();
        let masked: Vec<MaskedSequence> = batch
            .iter()
            .map(|e| loss::mask_tokens_with(&e.context, cfg.delta, MASK_ID, &mut rng))
            .collect();
        let losses = train_step(&mut params, &mut adam, &batch, &masked, cfg)?;
        let eval_now = step == cfg.steps || (cfg.eval_every > 0 && step % cfg.eval_every == 0);
        let retrieval_acc = if eval_now { evaluate(&params) } else { None };
        log::debug!("step {step}: L_SC={} L_MNTP={} acc={retrieval_acc:?}", losses.l_sc, losses.l_mntp);
        log.push(LogRow {
            step,
            l_sc: losses.l_sc,
            l_mntp: losses.l_mntp,
            l: losses.l,
            retrieval_acc,
        });
    }
    Ok(TrainOutcome {
        encoder: ToyEncoder { vocab, params },
        log,
        initial_accuracy,
        train_size,
        holdout_size,
    })
}

/// Writes the log as `step,l_sc,l_mntp,l,retrieval_acc`; accuracy is empty
/// on steps without an evaluation.
pub fn write_log_csv(path: impl AsRef<Path>, log: &[LogRow]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("step,l_sc,l_mntp,l,retrieval_acc\n");
    for r in log {
        let acc = r.retrieval_acc.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", r.step, r.l_sc, r.l_mntp, r.l, acc));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub vocab: Vocab,
    pub params: ToyEncoderParams,
}

impl Checkpoint {
    pub fn new(config: TrainConfig, encoder: ToyEncoder) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config,
            vocab: encoder.vocab,
            params: encoder.params,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ck: Self = crate::io::read_json(path)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported checkpoint version {}",
                ck.version
            )));
        }
        if ck.params.vocab_size() != ck.vocab.len() || !ck.params.all_finite() {
            return Err(Error::InvalidConfig("checkpoint tensors do not match the vocabulary".into()));
        }
        Ok(ck)
    }

    pub fn encoder(&self) -> ToyEncoder {
        ToyEncoder {
            vocab: self.vocab.clone(),
            params: self.params.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            dim: 8,
            steps: 5,
            eval_every: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn config_invariants() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { delta: 0.0, ..Default::default() },
            TrainConfig { delta: 1.0, ..Default::default() },
            TrainConfig { batch_size: 1, ..Default::default() },
            TrainConfig { negatives: 0, ..Default::default() },
            TrainConfig { temperature: 0.0, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn deterministic_trajectory() {
        let data = synthetic_cqr(16, 1);
        let a = train(&data, &small_cfg()).unwrap();
        let b = train(&data, &small_cfg()).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.encoder, b.encoder);
        assert_eq!(a.log.len(), 5);
        assert!(a.log[1].retrieval_acc.is_some() && a.log[2].retrieval_acc.is_none());
        assert!(a.log[4].retrieval_acc.is_some());
    }

    #[test]
    fn zero_steps_returns_initialization() {
        let data = synthetic_cqr(16, 1);
        let cfg = TrainConfig { steps: 0, ..small_cfg() };
        let out = train(&data, &cfg).unwrap();
        let init = ToyEncoderParams::init(out.encoder.vocab.len(), 8, cfg.seed);
        assert_eq!(out.encoder.params, init);
        assert!(out.log.is_empty());
    }

    #[test]
    fn zero_learning_rate_leaves_params() {
        let data = synthetic_cqr(8, 2);
        let vocab = build_vocab(&data);
        let ex: Vec<_> = data.iter().map(|t| TrainExample::from_tuple(t, &vocab, 2).unwrap()).collect();
        let batch: Vec<&TrainExample> = ex.iter().take(3).collect();
        let masked: Vec<_> = batch.iter().map(|e| mask_tokens(&e.context, 0.8, MASK_ID, 0)).collect();
        let cfg = TrainConfig { learning_rate: 0.0, dim: 8, ..Default::default() };
        let mut p = ToyEncoderParams::init(vocab.len(), 8, 0);
        let before = p.clone();
        let mut adam = Adam::new(&p, 0.0);
        let l = train_step(&mut p, &mut adam, &batch, &masked, &cfg).unwrap();
        assert_eq!(p, before);
        assert!(l.l_sc > 0.0 && l.l_mntp > 0.0);
    }

    #[test]
    fn rejects_oversized_batch_and_empty_data() {
        let data = synthetic_cqr(4, 0);
        assert!(matches!(train(&data, &small_cfg()), Err(Error::InvalidConfig(_))));
        assert!(matches!(train(&[], &small_cfg()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let out = train(&synthetic_cqr(16, 1), &small_cfg()).unwrap();
        let ck = Checkpoint::new(small_cfg(), out.encoder.clone());
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.encoder(), out.encoder);
    }
}
