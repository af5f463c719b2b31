//! End-to-end helpers that chain the stages: embed advertisements and
//! descriptions, average into centroids and build the three search spaces.

use std::collections::{BTreeMap, BTreeSet};

use crate::adfilter::Preprocessor;
use crate::centroid::{
    compute_ad_centroids, compute_job_centroids, group_by_occupation, AdCentroid, CentroidOptions, JobCentroid,
};
use crate::corpus::{EscoOccupation, JobAd};
use crate::embedding::{EmbedError, Embedder, EmbeddingStore};
use crate::evaluation::{embed_queries, RerankQuery};
use crate::matcher::{build_index, Index, IndexMetadata};
use crate::Result;

pub const AD_SPACE: &str = "ad_centroids";
pub const JOB_SPACE: &str = "job_centroids";
pub const DESCRIPTION_SPACE: &str = "descriptions";

const BATCH: usize = 64;

/// Preprocesses (title and body) and embeds every ad, keyed by ad id.
pub fn embed_ads(ads: &[JobAd], embedder: &dyn Embedder, pre: &Preprocessor) -> Result<EmbeddingStore> {
    let queries: Vec<RerankQuery> = ads.iter().map(RerankQuery::from_ad).collect();
    let vectors = embed_queries(&queries, embedder, pre)?;
    let mut store = EmbeddingStore::new();
    for (ad, v) in ads.iter().zip(vectors) {
        store.insert(ad.ad_id.clone(), v)?;
    }
    Ok(store)
}

/// Embeds each occupation's description (its title when empty), keyed by
/// occupation id.
pub fn embed_descriptions(occupations: &[EscoOccupation], embedder: &dyn Embedder) -> Result<EmbeddingStore> {
    let mut store = EmbeddingStore::new();
    for chunk in occupations.chunks(BATCH) {
        let texts: Vec<String> = chunk.iter().map(|o| o.description_text().to_owned()).collect();
        let vectors = embedder.embed(&texts)?;
        if vectors.len() != texts.len() {
            return Err(EmbedError::CountMismatch {
                context: "description batch".into(),
                expected: texts.len(),
                actual: vectors.len(),
            }
            .into());
        }
        for (o, v) in chunk.iter().zip(vectors) {
            store.insert(o.esco_id.clone(), v)?;
        }
    }
    Ok(store)
}

pub fn index_from_store(store: &EmbeddingStore, model: &str, kind: &str) -> Result<Index> {
    let meta = IndexMetadata {
        model: model.to_owned(),
        centroid_kind: kind.to_owned(),
        built_at: None,
    };
    Ok(build_index(store.iter().map(|(id, v)| (id.to_owned(), v.clone())), meta)?)
}

/// Centroids and description embeddings for one corpus in one model.
#[derive(Debug, Clone)]
pub struct Spaces {
    pub model: String,
    pub ad_centroids: BTreeMap<String, AdCentroid>,
    pub job_centroids: BTreeMap<String, JobCentroid>,
    pub descriptions: EmbeddingStore,
}

impl Spaces {
    pub fn build(
        occupations: &[EscoOccupation],
        ads: &[JobAd],
        embedder: &dyn Embedder,
        pre: &Preprocessor,
        options: CentroidOptions,
    ) -> Result<Self> {
        let ad_vectors = embed_ads(ads, embedder, pre)?;
        let ad_centroids = compute_ad_centroids(group_by_occupation(ads, &ad_vectors), options)?;
        let descriptions = embed_descriptions(occupations, embedder)?;
        let job_centroids = compute_job_centroids(&ad_centroids, &descriptions, occupations)?;
        Ok(Self {
            model: embedder.info().model,
            ad_centroids,
            job_centroids,
            descriptions,
        })
    }

    /// Occupations that have at least one advertisement.
    pub fn covered(&self) -> BTreeSet<&str> {
        self.ad_centroids.keys().map(String::as_str).collect()
    }

    pub fn ad_index(&self) -> Result<Index> {
        self.index(AD_SPACE, None)
    }

    pub fn job_index(&self) -> Result<Index> {
        self.index(JOB_SPACE, None)
    }

    pub fn description_index(&self) -> Result<Index> {
        self.index(DESCRIPTION_SPACE, None)
    }

    /// One space by name, optionally restricted to `only` ids.
    pub fn index(&self, space: &str, only: Option<&BTreeSet<&str>>) -> Result<Index> {
        let keep = |id: &str| only.map_or(true, |s| s.contains(id));
        let vectors: Vec<(String, crate::embedding::Vector)> = match space {
            AD_SPACE => self
                .ad_centroids
                .iter()
                .filter(|(id, _)| keep(id))
                .map(|(id, c)| (id.clone(), c.vector.clone()))
                .collect(),
            JOB_SPACE => self
                .job_centroids
                .iter()
                .filter(|(id, _)| keep(id))
                .map(|(id, c)| (id.clone(), c.vector.clone()))
                .collect(),
            _ => self
                .descriptions
                .iter()
                .filter(|(id, _)| keep(id))
                .map(|(id, v)| (id.to_owned(), v.clone()))
                .collect(),
        };
        let meta = IndexMetadata {
            model: self.model.clone(),
            centroid_kind: space.to_owned(),
            built_at: None,
        };
        Ok(build_index(vectors, meta)?)
    }

    /// All three spaces over the ad-covered occupations, keyed by space name.
    pub fn comparable_spaces(&self) -> Result<BTreeMap<String, Index>> {
        let covered = self.covered();
        [AD_SPACE, JOB_SPACE, DESCRIPTION_SPACE]
            .into_iter()
            .map(|s| Ok((s.to_owned(), self.index(s, Some(&covered))?)))
            .collect()
    }
}
