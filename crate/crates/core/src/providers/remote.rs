//! JSON-over-HTTP clients for remote embedders and generators.
//!
//! Wire format (UTF-8 JSON, `POST`):
//!
//! ```text
//! embedder   request  {"tokens": ["..", ..]}  or  {"text": ".."}
//!            response {"vectors": [[f64, ..], ..]}
//! generator  request  {"prompt": "..", "max_tokens": n}
//!            response {"text": ".."}
//! ```
//!
//! A bearer token is sent when an API key is configured. HTTP 429 and
//! transport failures are retried with exponential backoff; 429 surfaces as
//! [`Error::RateLimited`] once retries run out.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    check_context, AnswerDensities, ContextEncoder, DensityProvider, Embedding,
    GenerationProvider, SentenceEmbedder, TokenEmbeddings,
};
use crate::error::{Error, Result};

pub const ENV_EMBED_URL: &str = "CPC_EMBED_URL";
pub const ENV_LLM_URL: &str = "CPC_LLM_URL";
pub const ENV_API_KEY: &str = "CPC_API_KEY";

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub max_retries: usize,
    pub initial_backoff: Duration,
    /// Maximum number of requests in flight at once.
    pub max_in_flight: usize,
}

impl HttpConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key: None,
            timeout: Duration::from_secs(60),
            max_retries: 3,
            initial_backoff: Duration::from_millis(200),
            max_in_flight: 4,
        }
    }

    /// Reads the endpoint from `url_var` and the key from [`ENV_API_KEY`].
    pub fn from_env(url_var: &str) -> Result<Self> {
        let url = std::env::var(url_var)
            .map_err(|_| Error::InvalidConfig(format!("{url_var} is not set")))?;
        Ok(Self {
            api_key: std::env::var(ENV_API_KEY).ok(),
            ..Self::new(url)
        })
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

struct JsonClient {
    cfg: HttpConfig,
    http: reqwest::blocking::Client,
    limiter: Semaphore,
}

impl JsonClient {
    fn new(cfg: HttpConfig) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let limiter = Semaphore::new(cfg.max_in_flight);
        Ok(Self { cfg, http, limiter })
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, body: &B) -> Result<R> {
        let _permit = self.limiter.acquire();
        let mut backoff = self.cfg.initial_backoff;
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.post_once(body, attempt) {
                Err(e) if e.is_retryable() && attempt <= self.cfg.max_retries => {
                    log::warn!("request to {} failed ({e}); retrying", self.cfg.url);
                    std::thread::sleep(backoff);
                    backoff *= 2;
                }
                other => return other,
            }
        }
    }

    fn post_once<B: Serialize, R: DeserializeOwned>(&self, body: &B, attempt: usize) -> Result<R> {
        let mut req = self.http.post(&self.cfg.url).json(body);
        if let Some(key) = &self.cfg.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Error::Transport(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 {
            return Err(Error::RateLimited { attempts: attempt });
        }
        if status.is_server_error() {
            return Err(Error::Transport(format!("server returned {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(Error::BadResponse(format!("{status}: {text}")));
        }
        let bytes = resp.bytes().map_err(|e| Error::Transport(e.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::BadResponse(e.to_string()))
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum EmbedRequest<'a> {
    Tokens { tokens: &'a [String] },
    Text { text: &'a str },
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

fn to_matrix(vectors: Vec<Vec<f64>>) -> Result<Array2<f64>> {
    let rows = vectors.len();
    let dim = vectors.first().map_or(0, Vec::len);
    if rows == 0 || dim == 0 {
        return Err(Error::BadResponse("empty vectors".into()));
    }
    if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: bad.len(),
        });
    }
    Ok(Array2::from_shape_vec((rows, dim), vectors.into_iter().flatten().collect())
        .expect("shape checked"))
}

/// Remote context encoder client.
pub struct RemoteEncoder {
    client: JsonClient,
    pub max_tokens: usize,
}

impl RemoteEncoder {
    pub fn new(cfg: HttpConfig) -> Result<Self> {
        Ok(Self {
            client: JsonClient::new(cfg)?,
            max_tokens: usize::MAX,
        })
    }

    pub fn from_env() -> Result<Self> {
        Self::new(HttpConfig::from_env(ENV_EMBED_URL)?)
    }
}

impl ContextEncoder for RemoteEncoder {
    fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    fn embed_document(&self, tokens: &[String]) -> Result<TokenEmbeddings> {
        check_context(tokens, self.max_tokens)?;
        let resp: EmbedResponse = self.client.post(&EmbedRequest::Tokens { tokens })?;
        if resp.vectors.len() != tokens.len() {
            return Err(Error::BadResponse(format!(
                "expected {} vectors, got {}",
                tokens.len(),
                resp.vectors.len()
            )));
        }
        Ok(TokenEmbeddings::new(to_matrix(resp.vectors)?))
    }
}

impl SentenceEmbedder for RemoteEncoder {
    /// Sends the `{"text"}` form; several returned vectors are mean-pooled.
    fn embed_text(&self, text: &str) -> Result<Embedding> {
        let resp: EmbedResponse = self.client.post(&EmbedRequest::Text { text })?;
        let m = to_matrix(resp.vectors)?;
        super::pool_span(&TokenEmbeddings::new(m.clone()), 0, m.nrows() - 1)
    }
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

/// Remote text generator client.
pub struct RemoteGenerator {
    client: JsonClient,
    pub max_tokens: usize,
}

impl RemoteGenerator {
    pub fn new(cfg: HttpConfig) -> Result<Self> {
        Ok(Self {
            client: JsonClient::new(cfg)?,
            max_tokens: 512,
        })
    }

    pub fn from_env() -> Result<Self> {
        Self::new(HttpConfig::from_env(ENV_LLM_URL)?)
    }
}

impl GenerationProvider for RemoteGenerator {
    fn generate(&self, prompt: &str) -> Result<String> {
        if prompt.is_empty() {
            return Err(Error::InvalidRequest("empty prompt".into()));
        }
        let resp: GenerateResponse = self.client.post(&GenerateRequest {
            prompt,
            max_tokens: self.max_tokens,
        })?;
        Ok(resp.text)
    }
}

impl DensityProvider for RemoteGenerator {
    fn answer_distributions(&self, _: &str, _: &str, _: &str) -> Result<AnswerDensities> {
        Err(Error::UnsupportedProvider(
            "the completion endpoint returns text only".into(),
        ))
    }
}
