use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{check_context, ContextEncoder, TokenEmbeddings};
use crate::error::Result;

/// Deterministic offline encoder.
///
/// Each token maps to a Gaussian vector seeded by a hash of its lowercased
/// text; a fraction of the document mean is added to every row so the output
/// depends on the whole context. Repeated calls are bit-identical.
#[derive(Debug, Clone)]
pub struct HashEncoder {
    pub dim: usize,
    pub seed: u64,
    pub context_weight: f64,
    pub max_tokens: usize,
}

impl Default for HashEncoder {
    fn default() -> Self {
        Self {
            dim: 64,
            seed: 0,
            context_weight: 0.25,
            max_tokens: usize::MAX,
        }
    }
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl HashEncoder {
    pub fn token_vector(&self, token: &str) -> Array1<f64> {
        let key = fnv1a(self.seed, token.to_lowercase().as_bytes());
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        (0..self.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    }
}

impl ContextEncoder for HashEncoder {
    fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    fn embed_document(&self, tokens: &[String]) -> Result<TokenEmbeddings> {
        check_context(tokens, self.max_tokens)?;
        let mut vectors = Array2::zeros((tokens.len(), self.dim));
        for (mut row, tok) in vectors.axis_iter_mut(Axis(0)).zip(tokens) {
            row.assign(&self.token_vector(tok));
        }
        let mean = vectors.mean_axis(Axis(0)).expect("nonempty");
        vectors += &(mean * self.context_weight);
        Ok(TokenEmbeddings::new(vectors))
    }
}
