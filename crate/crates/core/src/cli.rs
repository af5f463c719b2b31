//! The `occumatch` command-line driver.
//!
//! One subcommand per pipeline stage; stages hand off through files.
//! Reports go to stdout (JSON, or CSV with `--csv`), logs to stderr.
//! Exit codes: 0 success, 1 invalid input or usage, 2 I/O or protocol
//! failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::adfilter::{ClassifierSpec, FilterMode, Preprocessor, DEFAULT_THRESHOLD, DEFAULT_TOKEN_BUDGET};
use crate::centroid::{
    ad_centroid_store, ad_centroids_from_store, compute_ad_centroids, compute_job_centroids, group_by_occupation,
    job_centroid_store, CentroidMetadata, CentroidOptions,
};
use crate::corpus::{corpus_stats, export_training_pairs, parse_ads, parse_esco, write_ads, write_training_pairs, PairKind};
use crate::embedding::{Embedder, EmbeddingStore, ProviderSpec, DEFAULT_DIM, DEFAULT_SEED};
use crate::evaluation::{
    evaluate_judgments, human_eval_table, read_gold_labels, read_judgments, read_rankings, run_embedding_comparison,
    run_truncation_comparison, JudgmentSet, RerankQuery,
};
use crate::matcher::{build_index, Index, IndexMetadata};
use crate::pipeline::{embed_ads, embed_descriptions};
use crate::service::{AppState, PartialConfig, ServiceConfig};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "occumatch", version, about = "Resume-to-occupation matching over centroid embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate an occupation CSV and print its size.
    IngestEsco(IngestEsco),
    /// Validate an advertisement JSONL file and print coverage statistics.
    IngestAds(IngestAds),
    /// Export title/skill, title/synonym and title/description pairs.
    ExportPairs(ExportPairs),
    /// Reduce advertisement bodies to job-relevant text.
    FilterAds(FilterAds),
    /// Embed advertisements or occupation descriptions.
    Embed(Embed),
    /// Average advertisement embeddings per occupation.
    AdCentroids(AdCentroids),
    /// Blend ad centroids with description embeddings.
    JobCentroids(JobCentroids),
    /// Build an index snapshot from an embedding file.
    BuildIndex(BuildIndex),
    /// Rank occupations for one resume text.
    Recommend(Recommend),
    /// MRR@K reranking evaluation, one column per filter mode.
    EvalRerank(EvalRerank),
    /// MRR@K of the same queries across several indexes.
    EvalCompare(EvalCompare),
    /// MAP@K, P@K and MRR@K from expert judgments.
    EvalJudgments(EvalJudgments),
    /// Run the HTTP service.
    Serve(Serve),
}

#[derive(Debug, Args)]
pub struct ProviderArgs {
    /// `builtin-hash` or the base URL of an embedding provider.
    #[arg(long, default_value = "builtin-hash")]
    pub provider: String,
    /// Dimension of the builtin embedder.
    #[arg(long, default_value_t = DEFAULT_DIM)]
    pub dim: usize,
    /// Seed of the builtin embedder.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

impl ProviderArgs {
    fn connect(&self) -> Result<Arc<dyn Embedder>, Failure> {
        let spec = ProviderSpec::parse(&self.provider, self.dim, self.seed).map_err(Failure::usage)?;
        spec.connect().map_err(|e| Failure::from_err("provider", e))
    }
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Token budget of the cut-off and of the classifier fallback.
    #[arg(long, default_value_t = DEFAULT_TOKEN_BUDGET)]
    pub budget: usize,
    /// Minimum paragraph score kept in classifier mode.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// `baseline` or the base URL of a paragraph classifier.
    #[arg(long, default_value = "baseline")]
    pub classifier: String,
    /// Cue lexicon JSON for the baseline classifier.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

impl FilterArgs {
    fn preprocessor(&self, mode: FilterMode) -> Result<Preprocessor, Failure> {
        if self.budget == 0 {
            return Err(Failure::usage("--budget must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Failure::usage(format!("--threshold {} outside [0, 1]", self.threshold)));
        }
        let spec: ClassifierSpec = self.classifier.parse().map_err(Failure::usage)?;
        let lexicon = match &self.lexicon {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Failure::io(p, e))?),
            None => None,
        };
        let filter = spec
            .build(lexicon.as_deref())
            .map_err(|e| Failure::from_err("classifier", e))?;
        Ok(Preprocessor::new(mode, filter)
            .with_budget(self.budget)
            .with_threshold(self.threshold))
    }
}

#[derive(Debug, Args)]
pub struct IngestEsco {
    /// Occupation CSV (`esco_id,title,description,skills,synonyms`).
    pub occupations: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestAds {
    /// Advertisement JSONL.
    pub ads: PathBuf,
    /// Occupation CSV to check references and coverage against.
    #[arg(long)]
    pub occupations: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportPairs {
    pub occupations: PathBuf,
    /// Output JSONL of `{anchor, positive, kind}`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterAds {
    pub ads: PathBuf,
    /// Output advertisement JSONL with filtered bodies.
    #[arg(long)]
    pub out: PathBuf,
    /// `token-cutoff` or `classifier`.
    #[arg(long, default_value = "classifier")]
    pub filter_mode: FilterMode,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedKind {
    /// Advertisement JSONL; title and body are preprocessed then embedded.
    Ads,
    /// Occupation CSV; descriptions (titles when empty) are embedded.
    Occupations,
}

#[derive(Debug, Args)]
pub struct Embed {
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kind: EmbedKind,
    /// Output embedding JSONL.
    #[arg(long)]
    pub out: PathBuf,
    /// Advertisement preprocessing: `token-cutoff` or `classifier`.
    #[arg(long, default_value = "token-cutoff")]
    pub filter_mode: FilterMode,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Args)]
pub struct AdCentroids {
    /// Advertisement JSONL naming each ad's occupation.
    #[arg(long)]
    pub ads: PathBuf,
    /// Advertisement embeddings keyed by ad id.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Output centroid JSONL; the sidecar goes to `<out>.meta.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Average raw member vectors instead of normalized ones.
    #[arg(long)]
    pub raw_members: bool,
}

#[derive(Debug, Args)]
pub struct JobCentroids {
    /// Ad centroid JSONL with its sidecar.
    #[arg(long)]
    pub ad_centroids: PathBuf,
    /// Description embeddings keyed by occupation id.
    #[arg(long)]
    pub descriptions: PathBuf,
    #[arg(long)]
    pub occupations: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildIndex {
    /// Embedding JSONL keyed by occupation id.
    pub embeddings: PathBuf,
    /// Output snapshot (`.cbidx.json`).
    #[arg(long)]
    pub out: PathBuf,
    /// Embedder model label stored in the header.
    #[arg(long)]
    pub model: String,
    /// Centroid kind label; defaults to the sidecar's kind or `descriptions`.
    #[arg(long)]
    pub kind: Option<String>,
    /// Record the current UTC time as the build time.
    #[arg(long)]
    pub stamp: bool,
}

#[derive(Debug, Args)]
pub struct Recommend {
    #[arg(long)]
    pub index: PathBuf,
    /// File holding the resume text.
    #[arg(long, conflicts_with = "text", required_unless_present = "text")]
    pub text_file: Option<PathBuf>,
    /// Resume text given inline.
    #[arg(long)]
    pub text: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Occupation CSV for titles in the output.
    #[arg(long)]
    pub occupations: Option<PathBuf>,
    /// `token-cutoff` or `classifier`.
    #[arg(long, default_value = "classifier")]
    pub filter_mode: FilterMode,
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Args)]
pub struct EvalRerank {
    #[arg(long)]
    pub index: PathBuf,
    /// Query advertisements (JSONL); each ad's esco_id is its gold label.
    #[arg(long)]
    pub queries: PathBuf,
    /// Gold labels (`{query_id, esco_id}`) overriding the ads' own.
    #[arg(long)]
    pub golds: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// `token-cutoff` or `classifier`; repeat to compare modes side by side.
    #[arg(long = "filter-mode", default_values = ["token-cutoff"])]
    pub filter_modes: Vec<FilterMode>,
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Args)]
pub struct EvalCompare {
    /// `name=path` of one index; repeat for each space.
    #[arg(long = "space", required = true, value_parser = parse_space)]
    pub spaces: Vec<(String, PathBuf)>,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub golds: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// `token-cutoff` or `classifier`.
    #[arg(long, default_value = "token-cutoff")]
    pub filter_mode: FilterMode,
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub provider: ProviderArgs,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Args)]
pub struct EvalJudgments {
    /// Model rankings (`{query_id, items}`), one per resume.
    #[arg(long)]
    pub rankings: PathBuf,
    /// Judgment log (`{resume_id, esco_id, expert_id, relevant}`).
    #[arg(long)]
    pub judgments: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct Serve {
    /// TOML config file; flags and `OCCUMATCH_*` variables override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub occupations: Option<PathBuf>,
    /// `builtin-hash` or the base URL of an embedding provider.
    #[arg(long)]
    pub provider: Option<String>,
    /// `baseline` or the base URL of a paragraph classifier.
    #[arg(long)]
    pub classifier: Option<String>,
    /// `token-cutoff` or `classifier`.
    #[arg(long)]
    pub filter_mode: Option<String>,
    #[arg(long)]
    pub k_default: Option<usize>,
    /// Append-only judgment log.
    #[arg(long)]
    pub judgments: Option<PathBuf>,
    /// Listen address, e.g. `127.0.0.1:8080`.
    #[arg(long)]
    pub listen: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

fn parse_space(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_owned(), PathBuf::from(path))),
        _ => Err(format!("expected name=path, got `{s}`")),
    }
}

/// A failed run: message for stderr plus exit code.
#[derive(Debug)]
pub struct Failure {
    pub message: String,
    pub code: i32,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 1,
        }
    }

    fn io(path: &Path, e: impl Display) -> Self {
        Self {
            message: format!("{}: {e}", path.display()),
            code: 2,
        }
    }

    fn from_err(context: impl Display, e: impl Into<Error>) -> Self {
        let e = e.into();
        Self {
            code: if e.is_io_or_protocol() { 2 } else { 1 },
            message: format!("{context}: {e}"),
        }
    }
}

type Outcome = Result<(), Failure>;

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::io(path, e))
}

fn within<T, E: Into<Error>>(path: &Path, r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure::from_err(path.display(), e))
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Outcome {
    let io = |e: std::io::Error| Failure {
        message: format!("stdout: {e}"),
        code: 2,
    };
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| io(e.into()))?;
    writeln!(out).map_err(io)
}

fn emit_text(out: &mut dyn Write, text: &str) -> Outcome {
    out.write_all(text.as_bytes()).map_err(|e| Failure {
        message: format!("stdout: {e}"),
        code: 2,
    })
}

fn check_k(k: usize) -> Outcome {
    if k == 0 {
        Err(Failure::usage("--k must be at least 1"))
    } else {
        Ok(())
    }
}

fn load_index(path: &Path) -> Result<Index, Failure> {
    within(path, Index::load(open(path)?))
}

fn read_occupations(path: &Path) -> Result<Vec<crate::corpus::EscoOccupation>, Failure> {
    within(path, parse_esco(open(path)?))
}

fn read_ads(path: &Path) -> Result<Vec<crate::corpus::JobAd>, Failure> {
    within(path, parse_ads(open(path)?))
}

fn read_store(path: &Path) -> Result<EmbeddingStore, Failure> {
    within(path, EmbeddingStore::read(open(path)?))
}

fn write_store(store: &EmbeddingStore, path: &Path) -> Outcome {
    let mut w = create(path)?;
    within(path, store.write(&mut w))?;
    w.flush().map_err(|e| Failure::io(path, e))
}

fn read_queries(path: &Path, golds: Option<&Path>) -> Result<Vec<RerankQuery>, Failure> {
    let mut queries: Vec<RerankQuery> = read_ads(path)?.iter().map(RerankQuery::from_ad).collect();
    if let Some(g) = golds {
        let labels = within(g, read_gold_labels(open(g)?))?;
        let map: BTreeMap<&str, &str> = labels
            .iter()
            .map(|l| (l.query_id.as_str(), l.relevant_esco_id.as_str()))
            .collect();
        for q in &mut queries {
            match map.get(q.query_id.as_str()) {
                Some(gold) => q.gold = (*gold).to_owned(),
                None => {
                    return Err(Failure::usage(format!(
                        "{}: no gold label for query `{}`",
                        g.display(),
                        q.query_id
                    )))
                }
            }
        }
    }
    Ok(queries)
}

/// Parses `args` (including the program name) and runs the subcommand,
/// writing reports to `out`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Outcome {
    match command {
        Command::IngestEsco(a) => ingest_esco(a, out),
        Command::IngestAds(a) => ingest_ads(a, out),
        Command::ExportPairs(a) => export_pairs(a, out),
        Command::FilterAds(a) => filter_ads(a, out),
        Command::Embed(a) => embed(a, out),
        Command::AdCentroids(a) => ad_centroids(a, out),
        Command::JobCentroids(a) => job_centroids(a, out),
        Command::BuildIndex(a) => build(a, out),
        Command::Recommend(a) => recommend(a, out),
        Command::EvalRerank(a) => eval_rerank(a, out),
        Command::EvalCompare(a) => eval_compare(a, out),
        Command::EvalJudgments(a) => eval_judgments(a, out),
        Command::Serve(a) => serve(a),
    }
}

fn ingest_esco(a: IngestEsco, out: &mut dyn Write) -> Outcome {
    let occ = read_occupations(&a.occupations)?;
    emit_text(out, &format!("{} occupations\n", occ.len()))
}

fn ingest_ads(a: IngestAds, out: &mut dyn Write) -> Outcome {
    let ads = read_ads(&a.ads)?;
    match a.occupations {
        Some(p) => {
            let occ = read_occupations(&p)?;
            let s = corpus_stats(&occ, &ads);
            emit_text(
                out,
                &format!(
                    "{} ads\n{} of {} occupations covered\n{} unknown references\n",
                    s.ads, s.covered, s.occupations, s.unknown_refs
                ),
            )
        }
        None => emit_text(out, &format!("{} ads\n", ads.len())),
    }
}

#[derive(Serialize)]
struct PairCounts {
    skill: usize,
    synonym: usize,
    description: usize,
    total: usize,
}

fn export_pairs(a: ExportPairs, out: &mut dyn Write) -> Outcome {
    let occ = read_occupations(&a.occupations)?;
    let pairs = export_training_pairs(&occ);
    let mut w = create(&a.out)?;
    within(&a.out, write_training_pairs(&pairs, &mut w))?;
    w.flush().map_err(|e| Failure::io(&a.out, e))?;
    let count = |k: PairKind| pairs.iter().filter(|p| p.kind == k).count();
    emit_json(
        out,
        &PairCounts {
            skill: count(PairKind::Skill),
            synonym: count(PairKind::Synonym),
            description: count(PairKind::Description),
            total: pairs.len(),
        },
    )
}

fn filter_ads(a: FilterAds, out: &mut dyn Write) -> Outcome {
    let pre = a.filter.preprocessor(a.filter_mode)?;
    let mut ads = read_ads(&a.ads)?;
    for ad in &mut ads {
        ad.body = pre
            .apply(&ad.ad_id, &ad.body)
            .map_err(|e| Failure::from_err(format!("ad `{}`", ad.ad_id), e))?;
    }
    let mut w = create(&a.out)?;
    within(&a.out, write_ads(&ads, &mut w))?;
    emit_json(
        out,
        &serde_json::json!({"ads": ads.len(), "filter_mode": a.filter_mode, "filter": pre.filter.name()}),
    )
}

fn embed(a: Embed, out: &mut dyn Write) -> Outcome {
    let embedder = a.provider.connect()?;
    let store = match a.kind {
        EmbedKind::Ads => {
            let pre = a.filter.preprocessor(a.filter_mode)?;
            let ads = read_ads(&a.input)?;
            within(&a.input, embed_ads(&ads, embedder.as_ref(), &pre))?
        }
        EmbedKind::Occupations => {
            let occ = read_occupations(&a.input)?;
            within(&a.input, embed_descriptions(&occ, embedder.as_ref()))?
        }
    };
    write_store(&store, &a.out)?;
    let info = embedder.info();
    emit_json(
        out,
        &serde_json::json!({"records": store.len(), "model": info.model, "dim": info.dim}),
    )
}

fn ad_centroids(a: AdCentroids, out: &mut dyn Write) -> Outcome {
    let ads = read_ads(&a.ads)?;
    let store = read_store(&a.embeddings)?;
    let missing = ads.iter().filter(|ad| store.get(&ad.ad_id).is_none()).count();
    if missing > 0 {
        log::warn!("{missing} ads have no embedding and are skipped");
    }
    let options = CentroidOptions {
        normalize_members: !a.raw_members,
    };
    let centroids = within(&a.embeddings, compute_ad_centroids(group_by_occupation(&ads, &store), options))?;
    write_store(&ad_centroid_store(&centroids), &a.out)?;
    let meta_path = CentroidMetadata::sidecar_path(&a.out);
    let mut w = create(&meta_path)?;
    within(&meta_path, CentroidMetadata::for_ad_centroids(&centroids).write(&mut w))?;
    emit_json(
        out,
        &serde_json::json!({"centroids": centroids.len(), "ads": ads.len() - missing}),
    )
}

fn job_centroids(a: JobCentroids, out: &mut dyn Write) -> Outcome {
    let meta_path = CentroidMetadata::sidecar_path(&a.ad_centroids);
    let meta = within(&meta_path, CentroidMetadata::read(open(&meta_path)?))?;
    let ad_store = read_store(&a.ad_centroids)?;
    let ads = within(&a.ad_centroids, ad_centroids_from_store(&ad_store, &meta))?;
    let descriptions = read_store(&a.descriptions)?;
    let occ = read_occupations(&a.occupations)?;
    let jobs = within(&a.descriptions, compute_job_centroids(&ads, &descriptions, &occ))?;
    write_store(&job_centroid_store(&jobs), &a.out)?;
    let meta = CentroidMetadata::for_job_centroids(&jobs, &ads);
    let out_meta = CentroidMetadata::sidecar_path(&a.out);
    let mut w = create(&out_meta)?;
    within(&out_meta, meta.write(&mut w))?;
    let hybrid = meta
        .sources
        .values()
        .filter(|s| **s == crate::centroid::CentroidSource::Hybrid)
        .count();
    emit_json(
        out,
        &serde_json::json!({"job_centroids": jobs.len(), "hybrid": hybrid, "description_only": jobs.len() - hybrid}),
    )
}

fn build(a: BuildIndex, out: &mut dyn Write) -> Outcome {
    let store = read_store(&a.embeddings)?;
    let kind = match a.kind {
        Some(k) => k,
        None => {
            let meta_path = CentroidMetadata::sidecar_path(&a.embeddings);
            if meta_path.exists() {
                within(&meta_path, CentroidMetadata::read(open(&meta_path)?))?
                    .kind
                    .as_str()
                    .to_owned()
            } else {
                crate::pipeline::DESCRIPTION_SPACE.to_owned()
            }
        }
    };
    let metadata = IndexMetadata {
        model: a.model,
        centroid_kind: kind,
        built_at: a
            .stamp
            .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
    };
    let index = within(
        &a.embeddings,
        build_index(store.iter().map(|(id, v)| (id.to_owned(), v.clone())), metadata),
    )?;
    let mut w = create(&a.out)?;
    within(&a.out, index.save(&mut w))?;
    w.flush().map_err(|e| Failure::io(&a.out, e))?;
    emit_json(
        out,
        &serde_json::json!({"entries": index.len(), "dim": index.dim(), "metadata": index.metadata()}),
    )
}

#[derive(Serialize)]
struct RecommendRow {
    rank: usize,
    esco_id: String,
    score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    title: Option<String>,
}

fn recommend(a: Recommend, out: &mut dyn Write) -> Outcome {
    check_k(a.k)?;
    let pre = a.filter.preprocessor(a.filter_mode)?;
    let text = match (&a.text, &a.text_file) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => std::fs::read_to_string(p).map_err(|e| Failure::io(p, e))?,
        (None, None) => return Err(Failure::usage("one of --text or --text-file is required")),
    };
    let index = load_index(&a.index)?;
    let titles: Option<BTreeMap<String, String>> = match &a.occupations {
        Some(p) => Some(
            read_occupations(p)?
                .into_iter()
                .map(|o| (o.esco_id, o.title))
                .collect(),
        ),
        None => None,
    };
    let embedder = a.provider.connect()?;
    let cleaned = pre.apply("resume", &text).map_err(|e| Failure::from_err("resume", e))?;
    let vector = embedder.embed_one(&cleaned).map_err(|e| Failure::from_err("resume", e))?;
    let recs = within(&a.index, index.recommend(&vector, a.k))?;
    let rows: Vec<RecommendRow> = recs
        .into_iter()
        .map(|r| RecommendRow {
            title: titles.as_ref().and_then(|t| t.get(&r.esco_id).cloned()),
            rank: r.rank,
            esco_id: r.esco_id,
            score: r.score,
        })
        .collect();
    if a.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["rank", "esco_id", "score"];
        if titles.is_some() {
            header.push("title");
        }
        w.write_record(&header).expect("in-memory csv");
        for r in &rows {
            let mut rec = vec![r.rank.to_string(), r.esco_id.clone(), r.score.to_string()];
            if let Some(t) = &r.title {
                rec.push(t.clone());
            }
            w.write_record(&rec).expect("in-memory csv");
        }
        emit_text(out, &String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8"))
    } else {
        emit_json(out, &serde_json::json!({"k": a.k, "recommendations": rows}))
    }
}

fn eval_rerank(a: EvalRerank, out: &mut dyn Write) -> Outcome {
    check_k(a.k)?;
    let setups = a
        .filter_modes
        .iter()
        .map(|m| a.filter.preprocessor(*m))
        .collect::<Result<Vec<_>, _>>()?;
    let index = load_index(&a.index)?;
    let queries = read_queries(&a.queries, a.golds.as_deref())?;
    let embedder = a.provider.connect()?;
    let cmp = within(
        &a.queries,
        run_truncation_comparison(&index, &queries, embedder.as_ref(), &setups, a.k),
    )?;
    if a.csv {
        emit_text(out, &cmp.table.to_csv())
    } else if cmp.reports.len() == 1 {
        emit_json(out, &cmp.reports[0])
    } else {
        emit_json(out, &cmp)
    }
}

fn eval_compare(a: EvalCompare, out: &mut dyn Write) -> Outcome {
    check_k(a.k)?;
    let pre = a.filter.preprocessor(a.filter_mode)?;
    let mut spaces = BTreeMap::new();
    for (name, path) in &a.spaces {
        if spaces.insert(name.clone(), load_index(path)?).is_some() {
            return Err(Failure::usage(format!("space `{name}` given twice")));
        }
    }
    let queries = read_queries(&a.queries, a.golds.as_deref())?;
    let embedder = a.provider.connect()?;
    let cmp = within(
        &a.queries,
        run_embedding_comparison(&spaces, &queries, embedder.as_ref(), &pre, a.k),
    )?;
    if a.csv {
        emit_text(out, &cmp.table.to_csv())
    } else {
        emit_json(out, &cmp)
    }
}

fn eval_judgments(a: EvalJudgments, out: &mut dyn Write) -> Outcome {
    check_k(a.k)?;
    let rankings = within(&a.rankings, read_rankings(open(&a.rankings)?))?;
    let log = within(&a.judgments, read_judgments(open(&a.judgments)?))?;
    let set = JudgmentSet::from_log(&log);
    let report = within(&a.judgments, evaluate_judgments(&rankings, &set, a.k))?;
    if a.csv {
        emit_text(out, &human_eval_table(&report).to_csv())
    } else {
        emit_json(out, &report)
    }
}

fn serve(a: Serve) -> Outcome {
    let flags = PartialConfig {
        index: a.index,
        occupations: a.occupations,
        provider: a.provider,
        classifier: a.classifier,
        filter_mode: a.filter_mode,
        k_default: a.k_default,
        judgments: a.judgments,
        listen: a.listen,
        dim: a.dim,
        seed: a.seed,
        threshold: a.threshold,
    };
    let env = PartialConfig::from_env(|k| std::env::var(k).ok()).map_err(|e| Failure::from_err("environment", e))?;
    let file = match &a.config {
        Some(p) => PartialConfig::from_toml_file(p).map_err(|e| Failure::from_err(p.display(), e))?,
        None => PartialConfig::default(),
    };
    let config = ServiceConfig::resolve(flags, env, file).map_err(|e| Failure::from_err("serve", e))?;
    let state = AppState::from_config(&config).map_err(|e| Failure::from_err("serve", e))?;
    crate::service::run(state, config.listen).map_err(|e| Failure {
        message: format!("serve {}: {e}", config.listen),
        code: 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn parser_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_flags_and_missing_required_are_usage_errors() {
        let mut out = Vec::new();
        assert_eq!(run(["occumatch", "ingest-esco", "x.csv", "--bogus"], &mut out), 1);
        assert_eq!(run(["occumatch", "build-index", "e.jsonl"], &mut out), 1);
        assert_eq!(run(["occumatch", "recommend", "--index", "i"], &mut out), 1);
        assert_eq!(run(["occumatch", "eval-compare", "--space", "noequals", "--queries", "q"], &mut out), 1);
        assert!(out.is_empty());
    }

    #[test]
    fn missing_input_file_is_io_error() {
        let mut out = Vec::new();
        assert_eq!(run(["occumatch", "ingest-esco", "/nonexistent/occ.csv"], &mut out), 2);
    }

    #[test]
    fn repeated_filter_modes_parse() {
        let cli = Cli::try_parse_from([
            "occumatch",
            "eval-rerank",
            "--index",
            "i",
            "--queries",
            "q",
            "--filter-mode",
            "token-cutoff",
            "--filter-mode",
            "classifier-baseline",
        ])
        .unwrap();
        let Command::EvalRerank(a) = cli.command else { panic!() };
        assert_eq!(a.filter_modes, [FilterMode::TokenCutoff, FilterMode::Classifier]);
    }
}
