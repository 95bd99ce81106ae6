//! The toy context-aware encoder.
//!
//! ```text
//! e_t = E[x_t]                      token embedding, |V| x d table
//! m   = mean_t e_t                  whole-sequence summary
//! Z_t = tanh(e_t W_self + m W_ctx + b)
//! logits_t = Z_t W_out + b_out      MNTP head
//! ```
//!
//! Every output row depends on every input token through `m`, so the
//! encoder is bidirectional.

use std::collections::{BTreeSet, HashMap};

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::providers::{check_context, ContextEncoder, TokenEmbeddings};

pub const UNK_ID: usize = 0;
pub const MASK_ID: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self { words, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.words
    }
}

impl Vocab {
    /// Lowercased vocabulary over `tokens`; ids 0 and 1 are `[UNK]` and `[MASK]`.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<String> = tokens.into_iter().map(str::to_lowercase).collect();
        let words = ["[UNK]".to_string(), "[MASK]".to_string()]
            .into_iter()
            .chain(set.into_iter().filter(|w| w != "[unk]" && w != "[mask]"))
            .collect::<Vec<_>>();
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
        self.index.get(&token.to_lowercase()).copied().unwrap_or(UNK_ID)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }
}

/// Trainable parameters. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyEncoderParams {
    pub token_embedding: Array2<f64>,
    pub w_self: Array2<f64>,
    pub w_ctx: Array2<f64>,
    pub bias: Array1<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

impl ToyEncoderParams {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        Self {
            token_embedding: Array2::zeros((vocab_size, dim)),
            w_self: Array2::zeros((dim, dim)),
            w_ctx: Array2::zeros((dim, dim)),
            bias: Array1::zeros(dim),
            w_out: Array2::zeros((dim, vocab_size)),
            b_out: Array1::zeros(vocab_size),
        }
    }

    /// Gaussian initialization: unit variance for token embeddings, `1/d`
    /// for the square and output matrices, zero biases.
    pub fn init(vocab_size: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |a: &mut [f64], std: f64| {
            let n = Normal::new(0.0, std).expect("positive std");
            a.iter_mut().for_each(|x| *x = n.sample(&mut rng));
        };
        let mut p = Self::zeros(vocab_size, dim);
        let scale = (1.0 / dim as f64).sqrt();
        fill(p.token_embedding.as_slice_mut().expect("standard layout"), 1.0);
        fill(p.w_self.as_slice_mut().expect("standard layout"), scale);
        fill(p.w_ctx.as_slice_mut().expect("standard layout"), scale);
        fill(p.w_out.as_slice_mut().expect("standard layout"), scale);
        p
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.b_out.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.vocab_size(), self.dim())
    }

    pub fn slices(&self) -> [&[f64]; 6] {
        [
            self.token_embedding.as_slice().expect("standard layout"),
            self.w_self.as_slice().expect("standard layout"),
            self.w_ctx.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
            self.w_out.as_slice().expect("standard layout"),
            self.b_out.as_slice().expect("standard layout"),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.token_embedding.as_slice_mut().expect("standard layout"),
            self.w_self.as_slice_mut().expect("standard layout"),
            self.w_ctx.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
            self.w_out.as_slice_mut().expect("standard layout"),
            self.b_out.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }

    /// Flat view by global index, in `slices()` order.
    pub fn get(&self, mut i: usize) -> f64 {
        for s in self.slices() {
            if i < s.len() {
                return s[i];
            }
            i -= s.len();
        }
        panic!("parameter index out of range")
    }

    pub fn set(&mut self, mut i: usize, value: f64) {
        for s in self.slices_mut() {
            if i < s.len() {
                s[i] = value;
                return;
            }
            i -= s.len();
        }
        panic!("parameter index out of range")
    }

    /// Forward pass over token ids.
    pub fn forward(&self, ids: &[usize]) -> Forward {
        let len = ids.len();
        let d = self.dim();
        let mut e = Array2::zeros((len, d));
        for (mut row, &id) in e.axis_iter_mut(Axis(0)).zip(ids) {
            row.assign(&self.token_embedding.row(id));
        }
        let m = e.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(d));
        let shift = m.dot(&self.w_ctx) + &self.bias;
        let mut z = e.dot(&self.w_self);
        z += &shift;
        z.mapv_inplace(f64::tanh);
        Forward {
            ids: ids.to_vec(),
            e,
            m,
            z,
        }
    }

    /// Accumulates parameter gradients given `dz = dLoss/dZ`.
    pub fn backward(&self, fwd: &Forward, dz: &Array2<f64>, grads: &mut Self) {
        let len = fwd.ids.len() as f64;
        let da = dz * &fwd.z.mapv(|z| 1.0 - z * z);
        let sum_da = da.sum_axis(Axis(0));
        grads.w_self += &fwd.e.t().dot(&da);
        let m_col = fwd.m.view().insert_axis(Axis(1));
        let s_row = sum_da.view().insert_axis(Axis(0));
        grads.w_ctx += &m_col.dot(&s_row);
        grads.bias += &sum_da;
        let mut de = da.dot(&self.w_self.t());
        let from_mean = sum_da.dot(&self.w_ctx.t()) / len;
        de += &from_mean;
        for (row, &id) in de.axis_iter(Axis(0)).zip(&fwd.ids) {
            let mut g = grads.token_embedding.row_mut(id);
            g += &row;
        }
    }
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub ids: Vec<usize>,
    pub e: Array2<f64>,
    pub m: Array1<f64>,
    pub z: Array2<f64>,
}

/// Normalized mean of rows `i..=j` with what the backward pass needs.
#[derive(Debug, Clone)]
pub struct Pooled {
    pub span: (usize, usize),
    pub norm: f64,
    pub unit: Array1<f64>,
}

pub fn pool(z: &Array2<f64>, i: usize, j: usize) -> Pooled {
    let mean = z
        .slice(ndarray::s![i..=j, ..])
        .mean_axis(Axis(0))
        .expect("nonempty span");
    let norm = mean.dot(&mean).sqrt().max(1e-12);
    Pooled {
        span: (i, j),
        norm,
        unit: mean / norm,
    }
}

/// Adds `dLoss/dZ` for a pooled span given `dLoss/d(unit vector)`.
pub fn pool_backward(p: &Pooled, d_unit: &Array1<f64>, dz: &mut Array2<f64>) {
    let radial = p.unit.dot(d_unit);
    let dv = (d_unit - &(&p.unit * radial)) / p.norm;
    let n = (p.span.1 - p.span.0 + 1) as f64;
    let share = dv / n;
    for t in p.span.0..=p.span.1 {
        let mut row = dz.row_mut(t);
        row += &share;
    }
}

/// Trained encoder usable anywhere a [`ContextEncoder`] is expected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyEncoder {
    pub vocab: Vocab,
    pub params: ToyEncoderParams,
}

impl ContextEncoder for ToyEncoder {
    fn embed_document(&self, tokens: &[String]) -> Result<TokenEmbeddings> {
        check_context(tokens, usize::MAX)?;
        let ids = self.vocab.encode(tokens);
        Ok(TokenEmbeddings::new(self.params.forward(&ids).z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_give_identical_rows() {
        let p = ToyEncoderParams::zeros(10, 4);
        let f = p.forward(&[2, 3, 4, 2]);
        for row in f.z.rows() {
            assert_eq!(row, f.z.row(0));
        }
    }

    #[test]
    fn every_output_depends_on_every_token() {
        let p = ToyEncoderParams::init(12, 6, 7);
        let a = p.forward(&[2, 3, 4, 5]).z;
        let b = p.forward(&[2, 3, 9, 5]).z;
        for s in [0, 1, 3] {
            assert_ne!(a.row(s), b.row(s), "row {s} ignores token 2");
        }
    }

    #[test]
    fn vocab_reserves_specials() {
        let v = Vocab::build(["b", "A", "a"]);
        assert_eq!(v.words(), ["[UNK]", "[MASK]", "a", "b"]);
        assert_eq!(v.encode(&["B", "zz"]), [3, UNK_ID]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocab>(&json).unwrap(), v);
    }

    #[test]
    fn flat_indexing_covers_all_tensors() {
        let mut p = ToyEncoderParams::zeros(5, 3);
        let n = p.num_params();
        assert_eq!(n, 5 * 3 + 9 + 9 + 3 + 3 * 5 + 5);
        p.set(n - 1, 2.5);
        assert_eq!(p.b_out[4], 2.5);
        assert_eq!(p.get(n - 1), 2.5);
    }
}
