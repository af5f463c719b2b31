//! Generates a small taxonomy with ads, reads it back through the CSV and
//! JSONL parsers, reports coverage and exports skill, synonym and
//! description training pairs.

use std::fs::File;
use std::io::BufReader;

use occumatch::corpus::{corpus_stats, export_training_pairs, parse_ads, parse_esco, PairKind};
use occumatch::synthetic::{SyntheticConfig, SyntheticCorpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let corpus = SyntheticCorpus::generate(SyntheticConfig {
        occupations: 20,
        ad_coverage: 0.6,
        ..SyntheticConfig::default()
    });
    corpus.write_to_dir(dir.path())?;

    let occupations = parse_esco(File::open(dir.path().join("occupations.csv"))?)?;
    let ads = parse_ads(BufReader::new(File::open(dir.path().join("ads.jsonl"))?))?;
    let stats = corpus_stats(&occupations, &ads);
    println!(
        "{} occupations, {} ads, {} covered, {} unknown references",
        stats.occupations, stats.ads, stats.covered, stats.unknown_refs
    );

    let pairs = export_training_pairs(&occupations);
    for kind in [PairKind::Skill, PairKind::Synonym, PairKind::Description] {
        let n = pairs.iter().filter(|p| p.kind == kind).count();
        println!("{kind:?}: {n} pairs");
    }
    if let Some(p) = pairs.first() {
        println!("first pair: {p:?}");
    }
    Ok(())
}
