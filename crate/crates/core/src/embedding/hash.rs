use super::{l2_normalize, EmbedError, Embedder, ProviderInfo, Result, Vector};

pub const DEFAULT_DIM: usize = 256;
pub const DEFAULT_SEED: u64 = 0;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Lowercases and splits on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Signed feature hashing of the token bag into `dim` buckets.
///
/// Each token hashes as FNV-1a-64 over `seed.to_le_bytes() ‖ utf8(token)`;
/// the bucket is `h mod dim` and bit 63 selects the sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            seed: DEFAULT_SEED,
        }
    }
}

impl HashEmbedder {
    /// # Panics
    /// If `dim` is zero.
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "hash embedder dim must be positive");
        Self { dim, seed }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn embed_text(&self, text: &str) -> Result<Vector> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(EmbedError::NoTokens);
        }
        let mut acc = vec![0.0_f64; self.dim];
        let mut buf = Vec::with_capacity(32);
        for token in &tokens {
            buf.clear();
            buf.extend_from_slice(&self.seed.to_le_bytes());
            buf.extend_from_slice(token.as_bytes());
            let h = fnv1a64(&buf);
            let bucket = (h % self.dim as u64) as usize;
            acc[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
        let raw = Vector::new(acc)?;
        l2_normalize(&raw).map_err(|_| EmbedError::Cancelled)
    }
}

impl Embedder for HashEmbedder {
    fn info(&self) -> ProviderInfo {
        ProviderInfo {
            model: format!("builtin-hash/dim={}/seed={}", self.dim, self.seed),
            dim: self.dim,
        }
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vector>> {
        texts.iter().map(|t| self.embed_text(t)).collect()
    }
}
