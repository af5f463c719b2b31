//! Immutable cosine index over occupation vectors and exact top-k search.
//!
//! Snapshots (`*.cbidx.json`) are canonical JSON: a header (format version,
//! metric, dim, count, SHA-256 of the entry block, metadata) followed by
//! one entry per line, ids ascending, floats in shortest round-trip form.
//! Saving a loaded snapshot reproduces the original bytes.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embedding::{check_dims, l2_normalize, EmbedError, Vector};

pub const FORMAT_VERSION: u32 = 1;
pub const METRIC: &str = "cosine";
pub const INDEX_EXTENSION: &str = ".cbidx.json";
const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot build an index from zero vectors")]
    Empty,
    #[error("entry `{id}`: {source}")]
    Entry {
        id: String,
        #[source]
        source: EmbedError,
    },
    #[error("duplicate entry id `{0}`")]
    DuplicateId(String),
    #[error("query: {0}")]
    Query(#[source] EmbedError),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("unsupported index format_version {found} (expected {FORMAT_VERSION})")]
    Version { found: u64 },
    #[error("index parse error at byte {offset} (line {line}, column {column}): {message}")]
    Parse {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("malformed index: {0}")]
    Shape(String),
    #[error("index checksum mismatch: header {expected}, entries hash to {actual}")]
    Checksum { expected: String, actual: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = IndexError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMetadata {
    /// Label of the embedder that produced the vectors.
    pub model: String,
    /// What the vectors represent, e.g. `job_centroids`.
    pub centroid_kind: String,
    /// Caller-supplied build time; absent for reproducible builds.
    #[serde(default)]
    pub built_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub vector: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    dim: usize,
    entries: Vec<IndexEntry>,
    metadata: IndexMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub esco_id: String,
    pub score: f64,
    pub rank: usize,
}

pub fn build_index<I>(vectors: I, metadata: IndexMetadata) -> Result<Index>
where
    I: IntoIterator<Item = (String, Vector)>,
{
    let mut entries = Vec::new();
    let mut dim = None;
    for (id, v) in vectors {
        let d = *dim.get_or_insert(v.dim());
        check_dims(d, v.dim()).map_err(|source| IndexError::Entry { id: id.clone(), source })?;
        let vector = l2_normalize(&v).map_err(|source| IndexError::Entry { id: id.clone(), source })?;
        entries.push(IndexEntry { id, vector });
    }
    let dim = dim.ok_or(IndexError::Empty)?;
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = entries.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(IndexError::DuplicateId(w[0].id.clone()));
    }
    Ok(Index { dim, entries, metadata })
}

impl Index {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn metadata(&self) -> &IndexMetadata {
        &self.metadata
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.binary_search_by(|e| e.id.as_str().cmp(id)).is_ok()
    }

    /// Exhaustive cosine scan; ties go to the smaller id.
    pub fn recommend(&self, query: &Vector, k: usize) -> Result<Vec<Recommendation>> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        check_dims(self.dim, query.dim()).map_err(IndexError::Query)?;
        let q = l2_normalize(query).map_err(IndexError::Query)?;
        let q = q.as_slice();
        let mut scored: Vec<(usize, f64)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let dot: f64 = e.vector.as_slice().iter().zip(q).map(|(a, b)| a * b).sum();
                (i, dot.clamp(-1.0, 1.0))
            })
            .collect();
        // Entries are id-sorted, so position order is id order.
        let order = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        let k = k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(order);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(r, (i, score))| Recommendation {
                esco_id: self.entries[i].id.clone(),
                score,
                rank: r + 1,
            })
            .collect())
    }

    pub fn save<W: Write>(&self, mut writer: W) -> Result<()> {
        let body = self.entry_block();
        let header = Header {
            format_version: FORMAT_VERSION,
            metric: METRIC.into(),
            dim: self.dim,
            count: self.entries.len(),
            checksum: checksum(&body),
            metadata: self.metadata.clone(),
        };
        let header = serde_json::to_string(&header).map_err(std::io::Error::from)?;
        // Splice `"entries":[...]` into the header object.
        writer.write_all(&header.as_bytes()[..header.len() - 1])?;
        writer.write_all(b",\"entries\":[\n")?;
        writer.write_all(body.as_bytes())?;
        writer.write_all(b"]}\n")?;
        writer.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.save(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    fn entry_block(&self) -> String {
        let mut body = String::new();
        for (i, e) in self.entries.iter().enumerate() {
            body.push_str(&serde_json::to_string(e).expect("entries serialize"));
            if i + 1 < self.entries.len() {
                body.push(',');
            }
            body.push('\n');
        }
        body
    }

    pub fn load<R: Read>(mut reader: R) -> Result<Index> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| parse_error(&bytes, &e))?;
        let version = value
            .get("format_version")
            .ok_or_else(|| IndexError::Shape("missing format_version".into()))?
            .as_u64()
            .ok_or_else(|| IndexError::Shape("format_version must be an unsigned integer".into()))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(IndexError::Version { found: version });
        }
        let raw: RawIndex = serde_json::from_value(value).map_err(|e| IndexError::Shape(e.to_string()))?;
        if raw.metric != METRIC {
            return Err(IndexError::Shape(format!("unsupported metric `{}`", raw.metric)));
        }
        if raw.count != raw.entries.len() {
            return Err(IndexError::Shape(format!(
                "header count {} but {} entries",
                raw.count,
                raw.entries.len()
            )));
        }
        if raw.dim == 0 || raw.entries.is_empty() {
            return Err(IndexError::Shape("index has no entries".into()));
        }
        let mut seen = HashSet::new();
        for (i, e) in raw.entries.iter().enumerate() {
            if e.vector.dim() != raw.dim {
                return Err(IndexError::Shape(format!(
                    "entry `{}` has dim {}, header dim {}",
                    e.id,
                    e.vector.dim(),
                    raw.dim
                )));
            }
            if (e.vector.norm() - 1.0).abs() > UNIT_TOLERANCE {
                return Err(IndexError::Shape(format!("entry `{}` is not unit norm", e.id)));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(IndexError::DuplicateId(e.id.clone()));
            }
            if i > 0 && raw.entries[i - 1].id > e.id {
                return Err(IndexError::Shape(format!("entry `{}` out of canonical order", e.id)));
            }
        }
        let index = Index {
            dim: raw.dim,
            entries: raw.entries,
            metadata: raw.metadata,
        };
        let actual = checksum(&index.entry_block());
        if actual != raw.checksum {
            return Err(IndexError::Checksum {
                expected: raw.checksum,
                actual,
            });
        }
        Ok(index)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    metric: String,
    dim: usize,
    count: usize,
    checksum: String,
    metadata: IndexMetadata,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIndex {
    #[serde(rename = "format_version")]
    _format_version: u32,
    metric: String,
    dim: usize,
    count: usize,
    checksum: String,
    metadata: IndexMetadata,
    entries: Vec<IndexEntry>,
}

fn checksum(block: &str) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(block.as_bytes())))
}

fn parse_error(bytes: &[u8], e: &serde_json::Error) -> IndexError {
    let (line, column) = (e.line(), e.column());
    let offset = if line == 0 {
        bytes.len()
    } else {
        let line_start: usize = bytes
            .split(|b| *b == b'\n')
            .take(line - 1)
            .map(|l| l.len() + 1)
            .sum();
        (line_start + column).min(bytes.len())
    };
    IndexError::Parse {
        offset,
        line,
        column,
        message: e.to_string(),
    }
}
