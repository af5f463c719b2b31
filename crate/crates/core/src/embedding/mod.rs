//! Dense vectors, cosine geometry and the ways embeddings enter the system.
//!
//! Three acquisition routes share the [`Embedder`] trait:
//!
//! - [`HashEmbedder`]: a deterministic bag-of-tokens embedder (FNV-1a-64
//!   feature hashing) used for tests, planted experiments and offline runs.
//! - [`RemoteEmbedder`]: a client for the `POST /embed` provider protocol.
//! - [`EmbeddingStore`]: precomputed vectors read from JSONL files.

mod hash;
mod remote;
mod store;

pub use hash::{fnv1a64, tokenize, HashEmbedder, DEFAULT_DIM, DEFAULT_SEED};
pub use remote::{EmbedRequest, EmbedResponse, RemoteEmbedder};
pub(crate) use remote::{endpoint as remote_endpoint, http_client as remote_client};
pub use store::{EmbeddingRecord, EmbeddingStore};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("vector has zero dimensions")]
    EmptyVector,
    #[error("vector component {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("zero-norm vector cannot be normalized")]
    ZeroNorm,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("text has no tokens")]
    NoTokens,
    #[error("hashed token features cancelled to the zero vector")]
    Cancelled,
    #[error("provider request failed ({context}): {message}")]
    Transport { context: String, message: String },
    #[error("provider returned {actual} vectors for {expected} texts ({context})")]
    CountMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },
    #[error("provider returned inconsistent dims ({context}): {detail}")]
    DimInconsistency { context: String, detail: String },
    #[error("duplicate embedding id `{0}`")]
    DuplicateId(String),
    #[error("empty embedding id on line {0}")]
    EmptyId(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: vector has dim {actual}, store dim is {expected}")]
    RecordDim {
        line: usize,
        expected: usize,
        actual: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EmbedError {
    /// True for failures of the transport or the remote peer, as opposed to
    /// invalid inputs.
    pub fn is_protocol(&self) -> bool {
        matches!(
            self,
            EmbedError::Transport { .. }
                | EmbedError::CountMismatch { .. }
                | EmbedError::DimInconsistency { .. }
                | EmbedError::Io(_)
        )
    }
}

pub type Result<T, E = EmbedError> = std::result::Result<T, E>;

/// A finite, non-empty `f64` vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(EmbedError::EmptyVector);
        }
        if let Some((index, &value)) = components.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(EmbedError::NonFinite { index, value });
        }
        Ok(Self(components))
    }

    /// Widens single-precision provider output.
    pub fn from_f32(components: &[f32]) -> Result<Self> {
        Self::new(components.iter().map(|&x| f64::from(x)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn scale(&self, factor: f64) -> Result<Vector> {
        Vector::new(self.0.iter().map(|x| x * factor).collect())
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(deserializer)?;
        Vector::new(raw).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = EmbedError;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Vector::new(value)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(EmbedError::DimMismatch { expected, actual })
    }
}

/// Returns `v / ‖v‖₂`.
pub fn l2_normalize(v: &Vector) -> Result<Vector> {
    let norm = v.norm();
    if norm == 0.0 {
        return Err(EmbedError::ZeroNorm);
    }
    if !norm.is_finite() {
        // Overflowed squares; rescale by the largest magnitude first.
        let max = v.0.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        return l2_normalize(&v.scale(1.0 / max)?);
    }
    Vector::new(v.0.iter().map(|x| x / norm).collect())
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine(a: &Vector, b: &Vector) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroNorm);
    }
    Ok((dot(&a.0, &b.0) / (na * nb)).clamp(-1.0, 1.0))
}

/// Model label and output dimension of an embedding source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderInfo {
    pub model: String,
    pub dim: usize,
}

/// Where embeddings come from: `builtin-hash` or the base URL of a
/// `POST /embed` provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    BuiltinHash { dim: usize, seed: u64 },
    Remote(String),
}

impl ProviderSpec {
    /// Parses `builtin-hash` or an `http(s)://` URL; `dim` and `seed` apply
    /// to the builtin embedder only.
    pub fn parse(spec: &str, dim: usize, seed: u64) -> std::result::Result<Self, String> {
        match spec {
            "builtin-hash" | "builtin" => {
                if dim == 0 {
                    Err("builtin-hash dim must be at least 1".into())
                } else {
                    Ok(ProviderSpec::BuiltinHash { dim, seed })
                }
            }
            url if url.starts_with("http://") || url.starts_with("https://") => Ok(ProviderSpec::Remote(url.to_owned())),
            other => Err(format!("unknown provider `{other}` (expected builtin-hash or an http(s) URL)")),
        }
    }

    /// Builds the embedder; remote providers are probed once.
    pub fn connect(&self) -> Result<std::sync::Arc<dyn Embedder>> {
        Ok(match self {
            ProviderSpec::BuiltinHash { dim, seed } => std::sync::Arc::new(HashEmbedder::new(*dim, *seed)),
            ProviderSpec::Remote(url) => std::sync::Arc::new(RemoteEmbedder::connect(url)?),
        })
    }
}

/// Anything that turns texts into index-aligned vectors of one dimension.
///
/// Implementations must be shareable across threads; the service calls
/// them from concurrent request handlers.
pub trait Embedder: Send + Sync {
    fn info(&self) -> ProviderInfo;

    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>>;

    fn embed_one(&self, text: &str) -> Result<Vector> {
        let mut out = self.embed(&[text.to_owned()])?;
        out.pop().ok_or_else(|| EmbedError::CountMismatch {
            context: "single text".into(),
            expected: 1,
            actual: 0,
        })
    }
}

impl<E: Embedder + ?Sized> Embedder for std::sync::Arc<E> {
    fn info(&self) -> ProviderInfo {
        (**self).info()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>> {
        (**self).embed(texts)
    }
}

impl<E: Embedder + ?Sized> Embedder for Box<E> {
    fn info(&self) -> ProviderInfo {
        (**self).info()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>> {
        (**self).embed(texts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn normalize_three_four_five() {
        let n = l2_normalize(&v(&[3.0, 4.0])).unwrap();
        assert!((n.as_slice()[0] - 0.6).abs() < 1e-12);
        assert!((n.as_slice()[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn normalize_unit_is_identity() {
        let u = v(&[0.0, 1.0, 0.0]);
        let n = l2_normalize(&u).unwrap();
        for (a, b) in n.as_slice().iter().zip(u.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_zero_fails() {
        assert!(matches!(l2_normalize(&v(&[0.0, 0.0])), Err(EmbedError::ZeroNorm)));
    }

    #[test]
    fn normalize_huge_components() {
        let n = l2_normalize(&v(&[1e300, 1e300])).unwrap();
        assert!((n.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            Vector::new(vec![1.0, f64::NAN]),
            Err(EmbedError::NonFinite { index: 1, .. })
        ));
        assert!(Vector::new(vec![]).is_err());
    }

    #[test]
    fn cosine_reference_cases() {
        let a = v(&[1.0, 2.0, 3.0]);
        assert_eq!(cosine(&a, &a).unwrap(), 1.0);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 5.0])).unwrap(), 0.0);
        let neg = a.scale(-1.0).unwrap();
        assert_eq!(cosine(&a, &neg).unwrap(), -1.0);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(EmbedError::DimMismatch { expected: 1, actual: 2 })
        ));
        assert!(matches!(cosine(&v(&[0.0, 0.0]), &v(&[1.0, 2.0])), Err(EmbedError::ZeroNorm)));
    }

    fn nonzero_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0..100.0_f64, 1..16)
            .prop_filter("nonzero", |xs| xs.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            (a, b) in (1usize..12).prop_flat_map(|d| (
                prop::collection::vec(-10.0..10.0_f64, d),
                prop::collection::vec(-10.0..10.0_f64, d),
            )),
            s in 0.01..1000.0_f64,
        ) {
            prop_assume!(a.iter().any(|x| x.abs() > 1e-3) && b.iter().any(|x| x.abs() > 1e-3));
            let a = Vector::new(a).unwrap();
            let b = Vector::new(b).unwrap();
            let ab = cosine(&a, &b).unwrap();
            prop_assert_eq!(ab, cosine(&b, &a).unwrap());
            prop_assert!((-1.0..=1.0).contains(&ab));
            let scaled = cosine(&a.scale(s).unwrap(), &b).unwrap();
            prop_assert!((scaled - ab).abs() <= 1e-12);
        }

        #[test]
        fn self_cosine_is_one(xs in nonzero_vec()) {
            let a = Vector::new(xs).unwrap();
            prop_assert!((cosine(&a, &a).unwrap() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn normalize_idempotent_and_direction_preserving(xs in nonzero_vec()) {
            let a = Vector::new(xs).unwrap();
            let n = l2_normalize(&a).unwrap();
            prop_assert!((n.norm() - 1.0).abs() <= 1e-12);
            let nn = l2_normalize(&n).unwrap();
            for (x, y) in n.as_slice().iter().zip(nn.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            prop_assert!((cosine(&a, &n).unwrap() - 1.0).abs() <= 1e-12);
        }
    }
}
