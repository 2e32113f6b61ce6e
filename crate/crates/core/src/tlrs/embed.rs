use serde_json::json;

use crate::transport::{JsonClient, ServiceConfig};

use super::TlrsError;

pub const HASH_DIM: usize = 256;

/// Maps text to a unit-norm vector.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, TlrsError>;
}

/// Lowercased alphanumeric tokens of `text`.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

/// Bucket of a token: FNV-1a, then a Fibonacci multiplicative hash down to
/// `dim` buckets.
pub fn token_bucket(token: &str, dim: usize) -> usize {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in token.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mixed = h.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    ((mixed >> 32) % dim as u64) as usize
}

/// Offline term-frequency embedding with hashed buckets. Entries are
/// nonnegative, so cosine scores lie in `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    pub dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dim: HASH_DIM }
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, TlrsError> {
        let mut v = vec![0.0; self.dim];
        let mut any = false;
        for token in tokenize(text) {
            v[token_bucket(&token, self.dim)] += 1.0;
            any = true;
        }
        if !any {
            return Err(TlrsError::EmptyText);
        }
        normalize(&mut v)?;
        Ok(v)
    }
}

pub(crate) fn normalize(v: &mut [f64]) -> Result<(), TlrsError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(TlrsError::Embedding(format!("cannot normalise vector with norm {norm}")));
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    Ok(())
}

/// Client for an OpenAI-style `/embeddings` endpoint.
pub struct HttpEmbedder {
    client: JsonClient,
}

impl HttpEmbedder {
    pub fn new(config: ServiceConfig) -> Self {
        HttpEmbedder { client: JsonClient::new(config) }
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, TlrsError> {
        if text.trim().is_empty() {
            return Err(TlrsError::EmptyText);
        }
        let body = json!({ "model": self.client.config().model, "input": text });
        let reply = self.client.post("embeddings", &body)?;
        let raw = reply
            .pointer("/data/0/embedding")
            .and_then(|e| e.as_array())
            .ok_or_else(|| TlrsError::Embedding("response has no data[0].embedding".into()))?;
        let mut v = raw
            .iter()
            .map(|x| x.as_f64().filter(|f| f.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| TlrsError::Embedding("embedding has non-numeric entries".into()))?;
        normalize(&mut v)?;
        Ok(v)
    }
}
