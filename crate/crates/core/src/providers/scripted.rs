use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GenerationProvider;
use crate::error::{Error, Result};

/// Hex SHA-256 of a prompt; the lookup key for canned responses.
pub fn prompt_key(prompt: &str) -> String {
    Sha256::digest(prompt.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    /// Matches when the prompt contains this substring.
    pub contains: String,
    pub response: String,
}

/// Offline generator that replays canned responses.
///
/// Lookup order: exact prompt hash, then the first matching rule, then the
/// default response.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedGenerator {
    #[serde(default)]
    pub responses: BTreeMap<String, String>,
    #[serde(default)]
    pub rules: Vec<ScriptRule>,
    #[serde(default)]
    pub default: Option<String>,
}

impl ScriptedGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&raw)?)
    }

    pub fn with_response(mut self, prompt: &str, response: impl Into<String>) -> Self {
        self.responses.insert(prompt_key(prompt), response.into());
        self
    }

    pub fn with_rule(mut self, contains: impl Into<String>, response: impl Into<String>) -> Self {
        self.rules.push(ScriptRule {
            contains: contains.into(),
            response: response.into(),
        });
        self
    }

    pub fn with_default(mut self, response: impl Into<String>) -> Self {
        self.default = Some(response.into());
        self
    }
}

impl GenerationProvider for ScriptedGenerator {
    fn generate(&self, prompt: &str) -> Result<String> {
        let key = prompt_key(prompt);
        if let Some(r) = self.responses.get(&key) {
            return Ok(r.clone());
        }
        if let Some(rule) = self.rules.iter().find(|r| prompt.contains(&r.contains)) {
            return Ok(rule.response.clone());
        }
        self.default
            .clone()
            .ok_or_else(|| Error::BadResponse(format!("no scripted response for prompt {key}")))
    }
}
