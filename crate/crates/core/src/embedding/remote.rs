use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedError, Embedder, ProviderInfo, Result, Vector};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub model: String,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

/// Blocking client for a `POST /embed` provider.
///
/// The provider's model label and dim are learned by a probe request in
/// [`RemoteEmbedder::connect`]; every later response must agree with them.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    url: String,
    client: reqwest::blocking::Client,
    info: ProviderInfo,
    batch_size: usize,
}

pub(crate) fn endpoint(base: &str, path: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with(path) {
        base.to_owned()
    } else {
        format!("{base}{path}")
    }
}

pub(crate) fn http_client(timeout: Duration) -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .expect("http client construction")
}

impl RemoteEmbedder {
    pub const DEFAULT_BATCH: usize = 64;

    pub fn connect(base_url: &str) -> Result<Self> {
        Self::connect_with(base_url, Self::DEFAULT_BATCH, Duration::from_secs(60))
    }

    pub fn connect_with(base_url: &str, batch_size: usize, timeout: Duration) -> Result<Self> {
        let url = endpoint(base_url, "/embed");
        let client = http_client(timeout);
        let probe = post_embed(&client, &url, &["probe".to_owned()], "probe")?;
        let info = ProviderInfo {
            model: probe.model.clone(),
            dim: probe.dim,
        };
        validate(&probe, 1, &info, "probe")?;
        Ok(Self {
            url,
            client,
            info,
            batch_size: batch_size.max(1),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

fn post_embed(
    client: &reqwest::blocking::Client,
    url: &str,
    texts: &[String],
    context: &str,
) -> Result<EmbedResponse> {
    let transport = |message: String| EmbedError::Transport {
        context: format!("POST {url} [{context}]"),
        message,
    };
    let resp = client
        .post(url)
        .json(&EmbedRequest {
            texts: texts.to_vec(),
        })
        .send()
        .map_err(|e| transport(e.to_string()))?;
    let status = resp.status();
    if !status.is_success() {
        let body = resp.text().unwrap_or_default();
        return Err(transport(format!("HTTP {status}: {body}")));
    }
    resp.json::<EmbedResponse>()
        .map_err(|e| transport(format!("malformed response: {e}")))
}

fn validate(resp: &EmbedResponse, expected: usize, info: &ProviderInfo, context: &str) -> Result<Vec<Vector>> {
    if resp.vectors.len() != expected {
        return Err(EmbedError::CountMismatch {
            context: context.to_owned(),
            expected,
            actual: resp.vectors.len(),
        });
    }
    if resp.dim != info.dim {
        return Err(EmbedError::DimInconsistency {
            context: context.to_owned(),
            detail: format!("declared dim {} but provider dim is {}", resp.dim, info.dim),
        });
    }
    resp.vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if v.len() != info.dim {
                return Err(EmbedError::DimInconsistency {
                    context: context.to_owned(),
                    detail: format!("vector {i} has dim {}, expected {}", v.len(), info.dim),
                });
            }
            Vector::new(v.clone()).map_err(|e| EmbedError::DimInconsistency {
                context: context.to_owned(),
                detail: format!("vector {i}: {e}"),
            })
        })
        .collect()
}

impl Embedder for RemoteEmbedder {
    fn info(&self) -> ProviderInfo {
        self.info.clone()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>> {
        let mut out = Vec::with_capacity(texts.len());
        for (batch_no, chunk) in texts.chunks(self.batch_size).enumerate() {
            let context = format!(
                "batch {batch_no}, texts {}..{}",
                batch_no * self.batch_size,
                batch_no * self.batch_size + chunk.len()
            );
            let resp = post_embed(&self.client, &self.url, chunk, &context)?;
            out.extend(validate(&resp, chunk.len(), &self.info, &context)?);
        }
        Ok(out)
    }
}
