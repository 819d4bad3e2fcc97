use std::sync::Arc;

use serde_json::{json, Value};

use crate::llm::{HttpRequest, Transport};

use super::KbError;

pub trait Embedder: Send + Sync {
    /// Identifies the embedding function; indexes remember it.
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    /// Unit-norm embedding of `text`.
    fn embed(&self, text: &str) -> Result<Vec<f32>, KbError>;
}

/// Deterministic embedder: character trigrams hashed with seeded FNV-1a into
/// signed buckets, then L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self { dim: 256, seed: 0x5eed }
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, chars: &[char]) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(FNV_PRIME);
    for c in chars {
        for b in (*c as u32).to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

pub fn normalize(v: &mut [f32]) {
    let norm = v.iter().map(|x| f64::from(*x) * f64::from(*x)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (f64::from(*x) / norm) as f32;
        }
    } else if let Some(first) = v.first_mut() {
        *first = 1.0;
    }
}

impl HashEmbedder {
    pub fn embed_vec(&self, text: &str) -> Vec<f32> {
        let mut padded = vec![' ', ' '];
        padded.extend(text.to_lowercase().split_whitespace().flat_map(|w| w.chars().chain([' '])));
        padded.push(' ');
        let mut v = vec![0f32; self.dim];
        for gram in padded.windows(3) {
            let h = fnv1a(self.seed, gram);
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) & 1 == 1 { -1.0 } else { 1.0 };
            v[bucket] += sign;
        }
        normalize(&mut v);
        v
    }
}

impl Embedder for HashEmbedder {
    fn id(&self) -> String {
        format!("hash-trigram-v1-d{}-s{}", self.dim, self.seed)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, KbError> {
        Ok(self.embed_vec(text))
    }
}

/// OpenAI-compatible `/embeddings` client.
pub struct HttpEmbedder {
    pub base_url: String,
    pub model: String,
    pub dim: usize,
    api_key: String,
    transport: Arc<dyn Transport>,
}

impl HttpEmbedder {
    pub fn new(
        base_url: impl Into<String>,
        model: impl Into<String>,
        dim: usize,
        api_key: impl Into<String>,
        transport: Arc<dyn Transport>,
    ) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            dim,
            api_key: api_key.into(),
            transport,
        }
    }
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> String {
        format!("http-{}-d{}", self.model, self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, KbError> {
        let req = HttpRequest {
            url: format!("{}/embeddings", self.base_url.trim_end_matches('/')),
            headers: vec![("Authorization".into(), format!("Bearer {}", self.api_key))],
            body: json!({ "model": self.model, "input": text }).to_string(),
        };
        let resp = self
            .transport
            .post(&req)
            .map_err(|e| KbError::Embedder(crate::llm::redact(&e.0, Some(&self.api_key))))?;
        if resp.status >= 400 {
            return Err(KbError::Embedder(format!("HTTP {}", resp.status)));
        }
        let v: Value = serde_json::from_str(&resp.body).map_err(|e| KbError::Embedder(e.to_string()))?;
        let mut out: Vec<f32> = v["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| KbError::Embedder("response lacks data[0].embedding".into()))?
            .iter()
            .map(|x| x.as_f64().unwrap_or(0.0) as f32)
            .collect();
        if out.len() != self.dim {
            return Err(KbError::Embedder(format!("expected dimension {}, got {}", self.dim, out.len())));
        }
        normalize(&mut out);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_norm_and_deterministic() {
        let e = HashEmbedder::default();
        for text in ["Nat.gcd", "", "greatest common divisor of two naturals"] {
            let v = e.embed_vec(text);
            let n: f64 = v.iter().map(|x| f64::from(*x).powi(2)).sum();
            assert!((n - 1.0).abs() < 1e-6, "{text}: {n}");
            assert_eq!(v, e.embed_vec(text));
        }
        let other = HashEmbedder { seed: 1, ..e };
        assert_ne!(e.embed_vec("Nat.gcd"), other.embed_vec("Nat.gcd"));
        assert_ne!(e.id(), other.id());
    }

    #[test]
    fn similar_texts_score_higher() {
        let e = HashEmbedder::default();
        let dot = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f32>();
        let q = e.embed_vec("Nat.gdc");
        assert!(dot(&q, &e.embed_vec("Nat.gcd")) > dot(&q, &e.embed_vec("Real.sqrt")));
    }
}
