//! Per-occupation representative vectors.
//!
//! An ad centroid is the normalized mean of the (optionally normalized)
//! embeddings of all ads annotated with one occupation. A job centroid is
//! the normalized mean of the ad centroid and the occupation's description
//! embedding, or the description embedding alone when the occupation has no
//! ads.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::EscoOccupation;
use crate::embedding::{l2_normalize, EmbedError, EmbeddingStore, Vector};

#[derive(Debug, Error)]
pub enum CentroidError {
    #[error("occupation `{0}`: members cancel to the zero vector")]
    Cancellation(String),
    #[error("occupation `{0}` has no description embedding")]
    MissingDescription(String),
    #[error("occupation `{id}`: {source}")]
    Vector {
        id: String,
        #[source]
        source: EmbedError,
    },
    #[error("invalid centroid metadata: {0}")]
    Metadata(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CentroidError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CentroidOptions {
    /// L2-normalize every member embedding before averaging.
    pub normalize_members: bool,
}

impl Default for CentroidOptions {
    fn default() -> Self {
        Self {
            normalize_members: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdCentroid {
    pub esco_id: String,
    pub vector: Vector,
    pub n_ads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentroidSource {
    Hybrid,
    DescriptionOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobCentroid {
    pub esco_id: String,
    pub vector: Vector,
    pub source: CentroidSource,
}

fn vector_err(id: &str) -> impl Fn(EmbedError) -> CentroidError + '_ {
    move |source| CentroidError::Vector {
        id: id.to_owned(),
        source,
    }
}

/// Normalized mean direction of `members`.
pub fn mean_direction<'a>(
    id: &str,
    members: impl IntoIterator<Item = &'a Vector>,
    options: CentroidOptions,
) -> Result<Vector> {
    let mut sum: Option<Vec<f64>> = None;
    let mut n = 0usize;
    let mut norm_sum = 0.0;
    for m in members {
        let m = if options.normalize_members {
            l2_normalize(m).map_err(vector_err(id))?
        } else {
            m.clone()
        };
        let acc = sum.get_or_insert_with(|| vec![0.0; m.dim()]);
        if acc.len() != m.dim() {
            return Err(vector_err(id)(EmbedError::DimMismatch {
                expected: acc.len(),
                actual: m.dim(),
            }));
        }
        for (a, x) in acc.iter_mut().zip(m.as_slice()) {
            *a += x;
        }
        norm_sum += m.norm();
        n += 1;
    }
    let sum = sum.ok_or_else(|| CentroidError::Cancellation(id.to_owned()))?;
    let mean = Vector::new(sum.into_iter().map(|x| x / n as f64).collect()).map_err(vector_err(id))?;
    // A mean this short relative to its members is cancellation noise.
    if mean.norm() <= 1e-12 * norm_sum / n as f64 {
        return Err(CentroidError::Cancellation(id.to_owned()));
    }
    l2_normalize(&mean).map_err(|_| CentroidError::Cancellation(id.to_owned()))
}

/// Groups ad embeddings by gold occupation and averages each group.
///
/// `groups` maps an occupation id to the embeddings of its ads. Output is
/// keyed by occupation id in ascending order.
pub fn compute_ad_centroids<'a, I, M>(groups: I, options: CentroidOptions) -> Result<BTreeMap<String, AdCentroid>>
where
    I: IntoIterator<Item = (&'a str, M)>,
    M: IntoIterator<Item = &'a Vector>,
{
    let mut out = BTreeMap::new();
    for (id, members) in groups {
        let members: Vec<&Vector> = members.into_iter().collect();
        if members.is_empty() {
            continue;
        }
        let vector = mean_direction(id, members.iter().copied(), options)?;
        out.insert(
            id.to_owned(),
            AdCentroid {
                esco_id: id.to_owned(),
                vector,
                n_ads: members.len(),
            },
        );
    }
    Ok(out)
}

/// Groups ad embeddings (keyed by ad id) under their ads' gold occupations.
/// Ads without an embedding are skipped.
pub fn group_by_occupation<'a>(
    ads: &'a [crate::corpus::JobAd],
    embeddings: &'a EmbeddingStore,
) -> BTreeMap<&'a str, Vec<&'a Vector>> {
    let mut groups: BTreeMap<&str, Vec<&Vector>> = BTreeMap::new();
    for ad in ads {
        if let Some(v) = embeddings.get(&ad.ad_id) {
            groups.entry(ad.esco_id.as_str()).or_default().push(v);
        }
    }
    groups
}

pub fn compute_job_centroids(
    ad_centroids: &BTreeMap<String, AdCentroid>,
    descriptions: &EmbeddingStore,
    occupations: &[EscoOccupation],
) -> Result<BTreeMap<String, JobCentroid>> {
    let mut out = BTreeMap::new();
    for occ in occupations {
        let id = occ.esco_id.as_str();
        let desc = descriptions
            .get(id)
            .ok_or_else(|| CentroidError::MissingDescription(id.to_owned()))?;
        let desc = l2_normalize(desc).map_err(vector_err(id))?;
        let (vector, source) = match ad_centroids.get(id) {
            Some(ad) => (
                mean_direction(id, [&ad.vector, &desc], CentroidOptions::default())?,
                CentroidSource::Hybrid,
            ),
            None => (desc, CentroidSource::DescriptionOnly),
        };
        out.insert(
            id.to_owned(),
            JobCentroid {
                esco_id: id.to_owned(),
                vector,
                source,
            },
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentroidKind {
    AdCentroids,
    JobCentroids,
}

impl CentroidKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CentroidKind::AdCentroids => "ad_centroids",
            CentroidKind::JobCentroids => "job_centroids",
        }
    }
}

/// Sidecar written next to a centroid embedding file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidMetadata {
    pub kind: CentroidKind,
    #[serde(default)]
    pub sources: BTreeMap<String, CentroidSource>,
    #[serde(default)]
    pub n_ads: BTreeMap<String, usize>,
}

impl CentroidMetadata {
    pub fn for_ad_centroids(centroids: &BTreeMap<String, AdCentroid>) -> Self {
        Self {
            kind: CentroidKind::AdCentroids,
            sources: BTreeMap::new(),
            n_ads: centroids.iter().map(|(k, c)| (k.clone(), c.n_ads)).collect(),
        }
    }

    pub fn for_job_centroids(centroids: &BTreeMap<String, JobCentroid>, ads: &BTreeMap<String, AdCentroid>) -> Self {
        Self {
            kind: CentroidKind::JobCentroids,
            sources: centroids.iter().map(|(k, c)| (k.clone(), c.source)).collect(),
            n_ads: ads
                .iter()
                .filter(|(k, _)| centroids.contains_key(*k))
                .map(|(k, c)| (k.clone(), c.n_ads))
                .collect(),
        }
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        serde_json::from_reader(reader).map_err(|e| CentroidError::Metadata(e.to_string()))
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut writer, self).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
        Ok(())
    }

    /// Sidecar path convention: `<centroids>.meta.json`.
    pub fn sidecar_path(centroids: &std::path::Path) -> std::path::PathBuf {
        let mut s = centroids.as_os_str().to_owned();
        s.push(".meta.json");
        s.into()
    }
}

pub fn ad_centroid_store(centroids: &BTreeMap<String, AdCentroid>) -> EmbeddingStore {
    let mut store = EmbeddingStore::new();
    for (id, c) in centroids {
        store
            .insert(id.clone(), c.vector.clone())
            .expect("centroid ids unique and dims uniform");
    }
    store
}

pub fn job_centroid_store(centroids: &BTreeMap<String, JobCentroid>) -> EmbeddingStore {
    let mut store = EmbeddingStore::new();
    for (id, c) in centroids {
        store
            .insert(id.clone(), c.vector.clone())
            .expect("centroid ids unique and dims uniform");
    }
    store
}

/// Rebuilds ad centroids from a stored centroid file and its sidecar.
pub fn ad_centroids_from_store(store: &EmbeddingStore, meta: &CentroidMetadata) -> Result<BTreeMap<String, AdCentroid>> {
    if meta.kind != CentroidKind::AdCentroids {
        return Err(CentroidError::Metadata(format!(
            "expected kind ad_centroids, found {}",
            meta.kind.as_str()
        )));
    }
    store
        .iter()
        .map(|(id, v)| {
            let n_ads = *meta
                .n_ads
                .get(id)
                .ok_or_else(|| CentroidError::Metadata(format!("no n_ads entry for `{id}`")))?;
            if n_ads == 0 {
                return Err(CentroidError::Metadata(format!("n_ads for `{id}` is zero")));
            }
            Ok((
                id.to_owned(),
                AdCentroid {
                    esco_id: id.to_owned(),
                    vector: v.clone(),
                    n_ads,
                },
            ))
        })
        .collect()
}
