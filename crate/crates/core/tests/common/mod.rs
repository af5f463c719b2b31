#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use occumatch::adfilter::Preprocessor;
use occumatch::centroid::CentroidOptions;
use occumatch::embedding::{Embedder, HashEmbedder};
use occumatch::matcher::Index;
use occumatch::pipeline::Spaces;
use occumatch::service::{router, spawn, AppState, RunningService};
use occumatch::synthetic::{SyntheticConfig, SyntheticCorpus};

pub fn corpus(occupations: usize) -> SyntheticCorpus {
    SyntheticCorpus::generate(SyntheticConfig {
        occupations,
        ..SyntheticConfig::default()
    })
}

pub fn job_index(c: &SyntheticCorpus, embedder: &dyn Embedder) -> Index {
    Spaces::build(
        &c.occupations,
        &c.ads,
        embedder,
        &Preprocessor::token_cutoff(),
        CentroidOptions::default(),
    )
    .unwrap()
    .job_index()
    .unwrap()
}

pub fn save_index(index: &Index, path: &Path) {
    std::fs::write(path, index.to_bytes()).unwrap();
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub corpus: SyntheticCorpus,
    pub index: Index,
    pub index_path: PathBuf,
    pub log_path: PathBuf,
    pub state: Arc<AppState>,
    pub server: RunningService,
}

impl Fixture {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.server.base_url())
    }
}

/// A running service over a synthetic job-centroid index with the hash embedder.
pub fn service(occupations: usize, pre: Preprocessor) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let corpus = corpus(occupations);
    let embedder: Arc<dyn Embedder> = Arc::new(HashEmbedder::new(256, 0));
    let index = job_index(&corpus, embedder.as_ref());
    let index_path = dir.path().join("jobs.cbidx.json");
    save_index(&index, &index_path);
    let log_path = dir.path().join("judgments.jsonl");
    let state = AppState::new(
        index.clone(),
        index_path.clone(),
        corpus.occupations.clone(),
        embedder,
        pre,
        20,
        &log_path,
    )
    .unwrap();
    let server = spawn(router(state.clone()), "127.0.0.1:0".parse().unwrap()).unwrap();
    Fixture {
        dir,
        corpus,
        index,
        index_path,
        log_path,
        state,
        server,
    }
}
