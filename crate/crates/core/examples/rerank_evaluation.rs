//! Reranking evaluation on held-out ads: MRR@100 under both preprocessing
//! modes, then the same noisy queries against the three occupation
//! spaces restricted to occupations that have ads.

use occumatch::adfilter::Preprocessor;
use occumatch::centroid::CentroidOptions;
use occumatch::embedding::HashEmbedder;
use occumatch::evaluation::{run_embedding_comparison, run_truncation_comparison, RerankQuery};
use occumatch::pipeline::Spaces;
use occumatch::synthetic::{SyntheticConfig, SyntheticCorpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = SyntheticCorpus::generate(SyntheticConfig::default());
    let embedder = HashEmbedder::new(256, 0);
    let spaces = Spaces::build(
        &corpus.occupations,
        &corpus.ads,
        &embedder,
        &Preprocessor::token_cutoff(),
        CentroidOptions::default(),
    )?;

    let held_out: Vec<RerankQuery> = corpus.held_out_ads(2, 1).iter().map(RerankQuery::from_ad).collect();
    let setups = [Preprocessor::token_cutoff(), Preprocessor::baseline_classifier()];
    let truncation = run_truncation_comparison(&spaces.job_index()?, &held_out, &embedder, &setups, 100)?;
    print!("{}", truncation.table.to_csv());

    let noisy = corpus.noisy_queries(2, 0.3, 42);
    let covered = spaces.covered();
    let indexes = spaces.comparable_spaces()?;
    let comparison = run_embedding_comparison(&indexes, &noisy, &embedder, &Preprocessor::token_cutoff(), 100)?;
    println!("\n{} covered occupations, {} noisy queries", covered.len(), noisy.len());
    print!("{}", comparison.table.to_csv());
    Ok(())
}
