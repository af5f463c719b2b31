//! Seeded planted corpora.
//!
//! Every occupation owns a vocabulary drawn from a global word pool. Its
//! description samples only the head of that vocabulary, while its
//! advertisements sample the whole vocabulary (Zipf-weighted) inside a
//! realistic layout: a boilerplate company paragraph, a duties paragraph,
//! a requirements paragraph with cue terms, and a benefits paragraph.
//! Held-out advertisements, optionally corrupted by token replacement,
//! serve as reranking queries with a known gold occupation.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_ads, write_esco, EscoOccupation, JobAd};
use crate::evaluation::RerankQuery;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub occupations: usize,
    pub ads_per_occupation: usize,
    /// Fraction of occupations that receive advertisements.
    pub ad_coverage: f64,
    pub vocabulary_size: usize,
    /// Descriptions draw only from this many head words of the vocabulary.
    pub description_head: usize,
    pub description_tokens: usize,
    pub section_tokens: usize,
    pub boilerplate_tokens: usize,
    pub pool_size: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            occupations: 50,
            ads_per_occupation: 4,
            ad_coverage: 1.0,
            vocabulary_size: 40,
            description_head: 12,
            description_tokens: 12,
            section_tokens: 15,
            boilerplate_tokens: 14,
            pool_size: 1500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub config: SyntheticConfig,
    pub occupations: Vec<EscoOccupation>,
    pub ads: Vec<JobAd>,
    pool: Vec<String>,
    vocabularies: Vec<Vec<String>>,
}

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ne", "ru", "sa", "te", "vo", "bri", "dan", "fel", "gor", "hin", "jas", "kor", "lum", "mar",
    "nis", "pel", "quo", "ris", "sol", "tur", "wen",
];

const DUTY_LEADS: [&str; 3] = ["Ihre Aufgaben:", "Tätigkeiten:", "Your responsibilities:"];
const REQUIREMENT_LEADS: [&str; 3] = [
    "Anforderungen: Erfahrung und Kenntnisse in",
    "Ihr Profil: Ausbildung oder Studium, Erfahrung mit",
    "Requirements: experience and knowledge of",
];

fn word_pool(rng: &mut ChaCha8Rng, size: usize) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let n = rng.gen_range(2..=4);
        let w: String = (0..n).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Zipf-like draw: index `i` has weight `1/(i+1)`.
fn zipf_pick<'a>(rng: &mut ChaCha8Rng, words: &'a [String]) -> &'a str {
    let total: f64 = (1..=words.len()).map(|i| 1.0 / i as f64).sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in words.iter().enumerate() {
        x -= 1.0 / (i + 1) as f64;
        if x <= 0.0 {
            return w;
        }
    }
    words.last().expect("non-empty")
}

impl SyntheticCorpus {
    pub fn generate(config: SyntheticConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let pool = word_pool(&mut rng, config.pool_size);
        let mut occupations = Vec::with_capacity(config.occupations);
        let mut vocabularies = Vec::with_capacity(config.occupations);
        for i in 0..config.occupations {
            let vocab: Vec<String> = pool
                .choose_multiple(&mut rng, config.vocabulary_size)
                .cloned()
                .collect();
            let head = &vocab[..config.description_head.min(vocab.len())];
            let description: Vec<&str> = (0..config.description_tokens)
                .map(|_| head.choose(&mut rng).expect("non-empty").as_str())
                .collect();
            occupations.push(EscoOccupation {
                esco_id: format!("occ{i:03}"),
                title: format!("{} {}", capitalize(&vocab[0]), vocab[1]),
                description: description.join(" "),
                skills: vocab[2..8].iter().map(|w| format!("{w} {}", vocab[8])).collect(),
                synonyms: vec![format!("{} {}", capitalize(&vocab[1]), vocab[0])],
            });
            vocabularies.push(vocab);
        }

        let mut corpus = Self {
            config,
            occupations,
            ads: Vec::new(),
            pool,
            vocabularies,
        };
        let covered = ((corpus.config.occupations as f64) * corpus.config.ad_coverage).round() as usize;
        let mut order: Vec<usize> = (0..corpus.config.occupations).collect();
        order.shuffle(&mut rng);
        let mut with_ads: Vec<usize> = order[..covered.min(order.len())].to_vec();
        with_ads.sort_unstable();
        for occ in with_ads {
            for n in 0..corpus.config.ads_per_occupation {
                let ad = corpus.make_ad(&mut rng, occ, &format!("ad-{occ:03}-{n}"));
                corpus.ads.push(ad);
            }
        }
        corpus
    }

    fn make_ad(&self, rng: &mut ChaCha8Rng, occ: usize, ad_id: &str) -> JobAd {
        let vocab = &self.vocabularies[occ];
        let cfg = &self.config;
        let filler = |rng: &mut ChaCha8Rng, n: usize| -> String {
            (0..n)
                .map(|_| self.pool.choose(rng).expect("non-empty").as_str())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let topical = |rng: &mut ChaCha8Rng, n: usize| -> String {
            (0..n).map(|_| zipf_pick(rng, vocab)).collect::<Vec<_>>().join(" ")
        };
        let company = format!("Die {} GmbH ist {}.", capitalize(&filler(rng, 1)), filler(rng, cfg.boilerplate_tokens));
        let duties = format!("{} {}", DUTY_LEADS.choose(rng).expect("non-empty"), topical(rng, cfg.section_tokens));
        let reqs = format!(
            "{} {}",
            REQUIREMENT_LEADS.choose(rng).expect("non-empty"),
            topical(rng, cfg.section_tokens)
        );
        let benefits = format!("Wir bieten {}.", filler(rng, cfg.boilerplate_tokens / 2));
        JobAd {
            ad_id: ad_id.to_owned(),
            esco_id: self.occupations[occ].esco_id.clone(),
            title: format!("{} (m/w/d)", self.occupations[occ].title),
            body: [company, duties, reqs, benefits].join("\n\n"),
        }
    }

    /// Held-out advertisements, `per_occupation` for every occupation, drawn
    /// from a stream independent of the corpus ads.
    pub fn held_out_ads(&self, per_occupation: usize, seed: u64) -> Vec<JobAd> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_a11_0ff);
        let mut out = Vec::new();
        for occ in 0..self.occupations.len() {
            for n in 0..per_occupation {
                out.push(self.make_ad(&mut rng, occ, &format!("q-{occ:03}-{n}")));
            }
        }
        out
    }

    /// One query per occupation whose text is the occupation's description.
    pub fn description_queries(&self) -> Vec<RerankQuery> {
        self.occupations
            .iter()
            .map(|o| RerankQuery {
                query_id: format!("desc-{}", o.esco_id),
                text: o.description.clone(),
                gold: o.esco_id.clone(),
            })
            .collect()
    }

    /// Replaces `round(rate · n)` of the `n` whitespace tokens of `text`
    /// with words from the global pool, keeping paragraph breaks.
    pub fn inject_noise(&self, text: &str, rate: f64, rng: &mut ChaCha8Rng) -> String {
        let paragraphs: Vec<Vec<&str>> = text.split("\n\n").map(|p| p.split_whitespace().collect()).collect();
        let positions: Vec<(usize, usize)> = paragraphs
            .iter()
            .enumerate()
            .flat_map(|(p, words)| (0..words.len()).map(move |w| (p, w)))
            .collect();
        let n_replace = ((positions.len() as f64) * rate).round() as usize;
        let chosen: std::collections::HashSet<(usize, usize)> =
            positions.choose_multiple(rng, n_replace).copied().collect();
        paragraphs
            .iter()
            .enumerate()
            .map(|(p, words)| {
                words
                    .iter()
                    .enumerate()
                    .map(|(w, word)| {
                        if chosen.contains(&(p, w)) {
                            self.pool.choose(rng).expect("non-empty").as_str()
                        } else {
                            word
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    /// Held-out advertisement queries with `rate` token noise.
    pub fn noisy_queries(&self, per_occupation: usize, rate: f64, seed: u64) -> Vec<RerankQuery> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.held_out_ads(per_occupation, seed)
            .iter()
            .map(|ad| {
                let mut q = RerankQuery::from_ad(ad);
                q.text = self.inject_noise(&q.text, rate, &mut rng);
                q
            })
            .collect()
    }

    pub fn pool(&self) -> &[String] {
        &self.pool
    }

    /// Writes `occupations.csv` and `ads.jsonl` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let to_io = |e: crate::corpus::CorpusError| std::io::Error::other(e.to_string());
        write_esco(&self.occupations, std::fs::File::create(dir.join("occupations.csv"))?).map_err(to_io)?;
        write_ads(&self.ads, std::fs::File::create(dir.join("ads.jsonl"))?).map_err(to_io)?;
        Ok(())
    }
}

/// Writes queries as advertisement JSONL, the query format of the CLI.
pub fn write_queries_as_ads<W: Write>(queries: &[RerankQuery], writer: W) -> std::io::Result<()> {
    let ads: Vec<JobAd> = queries
        .iter()
        .map(|q| JobAd {
            ad_id: q.query_id.clone(),
            esco_id: q.gold.clone(),
            title: String::new(),
            body: q.text.clone(),
        })
        .collect();
    write_ads(&ads, writer).map_err(|e| std::io::Error::other(e.to_string()))
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
