//! Ranking metrics, judgment aggregation and experiment harnesses.
//!
//! - [`metrics`]: reciprocal rank, MRR@K, P@K, AP@K, MAP@K and the
//!   majority-vote relevance rule.
//! - [`judgments`]: expert judgment logs (last write wins per expert) and
//!   per-resume human evaluation.
//! - [`harness`]: reranking evaluation over an index, the truncation
//!   comparison and the embedding-space comparison.

pub mod harness;
pub mod judgments;
pub mod metrics;

pub use harness::{
    embed_queries, evaluate_judgments, human_eval_table, run_embedding_comparison, run_rerank_eval,
    run_truncation_comparison, EmbeddingComparison, RerankQuery, SpaceResult, TruncationComparison, MAP, MRR,
    PRECISION,
};
pub use judgments::{evaluate_resume, read_judgments, write_judgment, HumanEvalMetrics, Judgment, JudgmentSet};
pub use metrics::{
    average_precision_at_k, majority_relevance, map_at_k, mrr_at_k, precision_at_k, reciprocal_rank,
    reciprocal_rank_first,
};

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adfilter::FilterError;
use crate::embedding::EmbedError;
use crate::matcher::IndexError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("ranked list has {len} items, fewer than k = {k}")]
    ShortList { len: usize, k: usize },
    #[error("no queries to average over")]
    NoQueries,
    #[error("query `{0}` has no gold label")]
    MissingGold(String),
    #[error("no votes for this item")]
    NoVotes,
    #[error("resume `{0}` has no judgments")]
    NoJudgments(String),
    #[error("duplicate item `{item}` in ranked list `{query_id}`")]
    DuplicateItem { query_id: String, item: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("query `{query_id}`: embedding failed: {source}")]
    Embedding {
        query_id: String,
        #[source]
        source: EmbedError,
    },
    #[error("query `{query_id}`: preprocessing failed: {source}")]
    Filter {
        query_id: String,
        #[source]
        source: FilterError,
    },
    #[error("embedder dim {embedder} does not match index dim {index}")]
    DimMismatch { index: usize, embedder: usize },
    #[error("space `{space}` covers a different occupation set than `{reference}`")]
    SpaceMismatch { space: String, reference: String },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub items: Vec<String>,
}

impl RankedList {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for item in &self.items {
            if !seen.insert(item) {
                return Err(EvalError::DuplicateItem {
                    query_id: self.query_id.clone(),
                    item: item.clone(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub query_id: String,
    #[serde(rename = "esco_id")]
    pub relevant_esco_id: String,
}

pub(crate) fn read_jsonl<T, R, V>(reader: R, validate: V) -> Result<Vec<T>>
where
    T: DeserializeOwned,
    R: BufRead,
    V: Fn(&T) -> std::result::Result<(), String>,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| EvalError::Parse { line: i + 1, message };
        let value: T = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        validate(&value).map_err(parse)?;
        out.push(value);
    }
    Ok(out)
}

pub(crate) fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut writer: W) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_gold_labels<R: BufRead>(reader: R) -> Result<Vec<GoldLabel>> {
    read_jsonl(reader, |g: &GoldLabel| {
        if g.query_id.is_empty() || g.relevant_esco_id.is_empty() {
            Err("query_id and esco_id must be non-empty".into())
        } else {
            Ok(())
        }
    })
}

pub fn write_gold_labels<W: Write>(labels: &[GoldLabel], writer: W) -> Result<()> {
    write_jsonl(labels, writer)
}

pub fn read_rankings<R: BufRead>(reader: R) -> Result<Vec<RankedList>> {
    let lists = read_jsonl(reader, |l: &RankedList| {
        if l.query_id.is_empty() {
            Err("empty query_id".into())
        } else {
            Ok(())
        }
    })?;
    for l in &lists {
        l.validate()?;
    }
    Ok(lists)
}

pub fn write_rankings<W: Write>(lists: &[RankedList], writer: W) -> Result<()> {
    write_jsonl(lists, writer)
}

/// Metric values for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_rank: Option<usize>,
}

/// Per-query values plus their arithmetic means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub k: usize,
    pub query_count: usize,
    pub aggregate: BTreeMap<String, f64>,
    pub per_query: Vec<QueryMetrics>,
    /// Queries left out, e.g. because their gold occupation is not indexed.
    #[serde(default)]
    pub excluded: Vec<String>,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
}

impl MetricReport {
    /// Averages each metric over `per_query` in the given order.
    pub fn from_queries(k: usize, per_query: Vec<QueryMetrics>) -> Result<Self> {
        if per_query.is_empty() {
            return Err(EvalError::NoQueries);
        }
        let mut sums: BTreeMap<String, f64> = BTreeMap::new();
        for q in &per_query {
            for (name, v) in &q.values {
                *sums.entry(name.clone()).or_default() += v;
            }
        }
        let n = per_query.len() as f64;
        Ok(Self {
            k,
            query_count: per_query.len(),
            aggregate: sums.into_iter().map(|(name, s)| (name, s / n)).collect(),
            per_query,
            excluded: Vec::new(),
            labels: BTreeMap::new(),
        })
    }

    pub fn value(&self, metric: &str) -> Option<f64> {
        self.aggregate.get(metric).copied()
    }
}

/// A labelled grid of metric values, printed to three decimals as CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub header: Vec<String>,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub values: Vec<f64>,
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory csv");
        for row in &self.rows {
            let mut rec = vec![row.label.clone()];
            rec.extend(row.values.iter().map(|v| format!("{v:.3}")));
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }
}
