//! Embeds ads and descriptions, averages them into ad and hybrid job
//! centroids, snapshots the job index to disk and recommends occupations
//! for a free-text resume.

use std::fs::File;

use occumatch::adfilter::Preprocessor;
use occumatch::centroid::{CentroidOptions, CentroidSource};
use occumatch::embedding::{Embedder, HashEmbedder};
use occumatch::matcher::Index;
use occumatch::pipeline::Spaces;
use occumatch::synthetic::{SyntheticConfig, SyntheticCorpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = SyntheticCorpus::generate(SyntheticConfig {
        ad_coverage: 0.7,
        ..SyntheticConfig::default()
    });
    let embedder = HashEmbedder::new(256, 0);
    let pre = Preprocessor::baseline_classifier();
    let spaces = Spaces::build(&corpus.occupations, &corpus.ads, &embedder, &pre, CentroidOptions::default())?;
    let hybrid = spaces
        .job_centroids
        .values()
        .filter(|c| c.source == CentroidSource::Hybrid)
        .count();
    println!(
        "{} ad centroids, {} job centroids ({hybrid} hybrid)",
        spaces.ad_centroids.len(),
        spaces.job_centroids.len()
    );

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("jobs.cbidx.json");
    spaces.job_index()?.save(File::create(&path)?)?;
    let index = Index::load(File::open(&path)?)?;
    println!("loaded {} entries of dim {} from {}", index.len(), index.dim(), path.display());

    let target = &corpus.occupations[7];
    let resume = format!("Berufserfahrung\n\n{}", target.description);
    let query = embedder.embed_one(&pre.apply("resume", &resume)?)?;
    println!("\nresume written for {} ({})", target.title, target.esco_id);
    for r in index.recommend(&query, 5)? {
        println!("{:>2}. {} {:.4}", r.rank, r.esco_id, r.score);
    }
    Ok(())
}
