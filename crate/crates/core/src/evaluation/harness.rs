//! Reranking evaluation and the comparison experiments built on it.
//!
//! A reranking run scores every indexed occupation for each query and
//! records where the query's single gold occupation lands; MRR@K averages
//! the reciprocal ranks. Queries are processed in parallel but reported
//! and averaged in input order.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::judgments::{evaluate_resume, JudgmentSet};
use super::metrics::reciprocal_rank;
use super::{EvalError, MetricReport, QueryMetrics, RankedList, Result, ResultTable, TableRow};
use crate::adfilter::Preprocessor;
use crate::corpus::JobAd;
use crate::embedding::{Embedder, Vector};
use crate::matcher::Index;

pub const MRR: &str = "mrr_at_k";
pub const MAP: &str = "map_at_k";
pub const PRECISION: &str = "p_at_k";

const EMBED_CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerankQuery {
    pub query_id: String,
    pub text: String,
    pub gold: String,
}

impl RerankQuery {
    /// An advertisement as a query: title and body as separate paragraphs.
    pub fn from_ad(ad: &JobAd) -> Self {
        let text = if ad.title.trim().is_empty() {
            ad.body.clone()
        } else {
            format!("{}\n\n{}", ad.title.trim(), ad.body)
        };
        Self {
            query_id: ad.ad_id.clone(),
            text,
            gold: ad.esco_id.clone(),
        }
    }
}

/// Preprocesses and embeds every query, in input order.
pub fn embed_queries(queries: &[RerankQuery], embedder: &dyn Embedder, pre: &Preprocessor) -> Result<Vec<Vector>> {
    let texts: Vec<String> = queries
        .par_iter()
        .map(|q| {
            pre.apply(&q.query_id, &q.text).map_err(|source| EvalError::Filter {
                query_id: q.query_id.clone(),
                source,
            })
        })
        .collect::<Result<_>>()?;
    let chunks: Vec<Vec<Vector>> = texts
        .par_chunks(EMBED_CHUNK)
        .zip(queries.par_chunks(EMBED_CHUNK))
        .map(|(texts, queries)| embed_chunk(texts, queries, embedder))
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

fn embed_chunk(texts: &[String], queries: &[RerankQuery], embedder: &dyn Embedder) -> Result<Vec<Vector>> {
    match embedder.embed(texts) {
        Ok(v) if v.len() == texts.len() => Ok(v),
        Ok(v) => Err(EvalError::Embedding {
            query_id: queries[0].query_id.clone(),
            source: crate::embedding::EmbedError::CountMismatch {
                context: "query batch".into(),
                expected: texts.len(),
                actual: v.len(),
            },
        }),
        Err(batch_err) => {
            // Re-run one by one to name the query that failed.
            for (t, q) in texts.iter().zip(queries) {
                if let Err(source) = embedder.embed_one(t) {
                    return Err(EvalError::Embedding {
                        query_id: q.query_id.clone(),
                        source,
                    });
                }
            }
            Err(EvalError::Embedding {
                query_id: queries[0].query_id.clone(),
                source: batch_err,
            })
        }
    }
}

fn rerank_with_vectors(
    index: &Index,
    queries: &[RerankQuery],
    vectors: &[Vector],
    k: usize,
) -> Result<MetricReport> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    let (kept, excluded): (Vec<usize>, Vec<usize>) = (0..queries.len()).partition(|&i| index.contains(&queries[i].gold));
    let per_query = kept
        .par_iter()
        .map(|&i| {
            let q = &queries[i];
            let ranked: Vec<String> = index
                .recommend(&vectors[i], k)?
                .into_iter()
                .map(|r| r.esco_id)
                .collect();
            let rr = reciprocal_rank(&ranked, &q.gold, k)?;
            Ok(QueryMetrics {
                query_id: q.query_id.clone(),
                values: BTreeMap::from([(MRR.to_owned(), rr)]),
                gold: Some(q.gold.clone()),
                gold_rank: ranked.iter().position(|x| *x == q.gold).map(|p| p + 1),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = MetricReport::from_queries(k, per_query)?;
    report.excluded = excluded.into_iter().map(|i| queries[i].query_id.clone()).collect();
    report.labels.insert("model".into(), index.metadata().model.clone());
    report.labels.insert("space".into(), index.metadata().centroid_kind.clone());
    Ok(report)
}

fn check_dims(index: &Index, embedder: &dyn Embedder) -> Result<()> {
    let dim = embedder.info().dim;
    if dim != index.dim() {
        return Err(EvalError::DimMismatch {
            index: index.dim(),
            embedder: dim,
        });
    }
    Ok(())
}

/// MRR@K of `queries` against `index` after `pre` preprocessing.
///
/// Queries whose gold occupation is not in the index are listed in
/// `excluded` and do not count towards the mean.
pub fn run_rerank_eval(
    index: &Index,
    queries: &[RerankQuery],
    embedder: &dyn Embedder,
    pre: &Preprocessor,
    k: usize,
) -> Result<MetricReport> {
    check_dims(index, embedder)?;
    let vectors = embed_queries(queries, embedder, pre)?;
    let mut report = rerank_with_vectors(index, queries, &vectors, k)?;
    report.labels.insert("filter_mode".into(), pre.mode.to_string());
    report.labels.insert("filter".into(), pre.filter.name());
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationComparison {
    pub k: usize,
    pub model: String,
    pub reports: Vec<MetricReport>,
    pub table: ResultTable,
}

/// One reranking run per preprocessing setup, tabulated as
/// `model | <mode 1> | <mode 2> …`.
pub fn run_truncation_comparison(
    index: &Index,
    queries: &[RerankQuery],
    embedder: &dyn Embedder,
    setups: &[Preprocessor],
    k: usize,
) -> Result<TruncationComparison> {
    let reports = setups
        .iter()
        .map(|pre| run_rerank_eval(index, queries, embedder, pre, k))
        .collect::<Result<Vec<_>>>()?;
    let model = embedder.info().model;
    let mut header = vec!["model".to_owned()];
    header.extend(setups.iter().map(|p| p.mode.label().to_owned()));
    let table = ResultTable {
        header,
        rows: vec![TableRow {
            label: model.clone(),
            values: reports.iter().map(|r| r.value(MRR).unwrap_or(0.0)).collect(),
        }],
    };
    Ok(TruncationComparison {
        k,
        model,
        reports,
        table,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceResult {
    pub space: String,
    pub mrr_at_k: f64,
    pub query_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingComparison {
    pub k: usize,
    pub rows: Vec<SpaceResult>,
    pub table: ResultTable,
}

/// MRR@K of the same queries in several embedding spaces over one
/// occupation set. Rows are ordered by space name.
pub fn run_embedding_comparison(
    spaces: &BTreeMap<String, Index>,
    queries: &[RerankQuery],
    embedder: &dyn Embedder,
    pre: &Preprocessor,
    k: usize,
) -> Result<EmbeddingComparison> {
    let mut iter = spaces.iter();
    let Some((ref_name, reference)) = iter.next() else {
        return Err(EvalError::NoQueries);
    };
    let ref_ids: BTreeSet<&str> = reference.ids().collect();
    for (name, idx) in iter {
        if idx.ids().collect::<BTreeSet<_>>() != ref_ids {
            return Err(EvalError::SpaceMismatch {
                space: name.clone(),
                reference: ref_name.clone(),
            });
        }
    }
    for idx in spaces.values() {
        check_dims(idx, embedder)?;
    }
    let vectors = embed_queries(queries, embedder, pre)?;
    let rows = spaces
        .iter()
        .map(|(name, idx)| {
            let r = rerank_with_vectors(idx, queries, &vectors, k)?;
            Ok(SpaceResult {
                space: name.clone(),
                mrr_at_k: r.value(MRR).unwrap_or(0.0),
                query_count: r.query_count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = ResultTable {
        header: vec!["embedding type".into(), format!("MRR@{k}")],
        rows: rows
            .iter()
            .map(|r| TableRow {
                label: r.space.clone(),
                values: vec![r.mrr_at_k],
            })
            .collect(),
    };
    Ok(EmbeddingComparison { k, rows, table })
}

/// Human evaluation over several resumes: MAP@K, P@K and MRR@K per
/// resume from majority-vote relevance, plus their averages.
pub fn evaluate_judgments(rankings: &[RankedList], judgments: &JudgmentSet, k: usize) -> Result<MetricReport> {
    let mut per_query = Vec::new();
    let mut excluded = Vec::new();
    for list in rankings {
        list.validate()?;
        if !judgments.has_resume(&list.query_id) {
            excluded.push(list.query_id.clone());
            continue;
        }
        let m = evaluate_resume(&list.items, judgments, &list.query_id, k)?;
        per_query.push(QueryMetrics {
            query_id: list.query_id.clone(),
            values: BTreeMap::from([
                (MAP.to_owned(), m.map_at_k),
                (PRECISION.to_owned(), m.p_at_k),
                (MRR.to_owned(), m.mrr_at_k),
            ]),
            gold: None,
            gold_rank: None,
        });
    }
    let mut report = MetricReport::from_queries(k, per_query)?;
    report.excluded = excluded;
    Ok(report)
}

/// `Resume | MAP@K | P@K | MRR@K` with a closing `Average` row.
pub fn human_eval_table(report: &MetricReport) -> ResultTable {
    let k = report.k;
    let cols = [MAP, PRECISION, MRR];
    let mut rows: Vec<TableRow> = report
        .per_query
        .iter()
        .map(|q| TableRow {
            label: q.query_id.clone(),
            values: cols.iter().map(|c| q.values.get(*c).copied().unwrap_or(0.0)).collect(),
        })
        .collect();
    rows.push(TableRow {
        label: "Average".into(),
        values: cols.iter().map(|c| report.value(c).unwrap_or(0.0)).collect(),
    });
    ResultTable {
        header: vec!["Resume".into(), format!("MAP@{k}"), format!("P@{k}"), format!("MRR@{k}")],
        rows,
    }
}
