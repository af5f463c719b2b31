//! Resume-to-occupation recommendation in a shared embedding space.
//!
//! Occupations from a standardized taxonomy are represented by centroid
//! vectors (job-advertisement centroids blended with description
//! embeddings); resumes are embedded into the same space and matched by
//! exact cosine search. The crate also carries the evaluation harnesses:
//! MRR@K reranking over annotated advertisements and majority-vote
//! MAP@K / P@K / MRR@K over expert judgments.
//!
//! Pipeline stages, each usable on its own:
//!
//! | module | role |
//! |---|---|
//! | [`corpus`] | taxonomy CSV, advertisement JSONL, training-pair export |
//! | [`adfilter`] | paragraph segmentation, token cut-off, relevance filtering |
//! | [`embedding`] | vectors, cosine, hash / remote / file embeddings |
//! | [`centroid`] | ad centroids and hybrid job centroids |
//! | [`matcher`] | immutable index, top-k search, snapshots |
//! | [`evaluation`] | metrics, judgments, experiment harnesses |
//! | [`pipeline`] | chained embedding, centroid and index construction |
//! | [`service`] | HTTP API over an index snapshot |
//! | [`cli`] | the `occumatch` command-line driver |
//! | [`synthetic`] | seeded planted corpora for tests and demos |

pub mod adfilter;
pub mod centroid;
pub mod cli;
pub mod corpus;
pub mod embedding;
pub mod evaluation;
pub mod matcher;
pub mod pipeline;
pub mod service;
pub mod synthetic;

use thiserror::Error;

/// Any error the pipeline can raise.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Filter(#[from] adfilter::FilterError),
    #[error(transparent)]
    Embed(#[from] embedding::EmbedError),
    #[error(transparent)]
    Centroid(#[from] centroid::CentroidError),
    #[error(transparent)]
    Index(#[from] matcher::IndexError),
    #[error(transparent)]
    Eval(#[from] evaluation::EvalError),
    #[error(transparent)]
    Service(#[from] service::ServiceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// I/O and remote-protocol failures, as opposed to invalid input.
    pub fn is_io_or_protocol(&self) -> bool {
        use evaluation::EvalError as E;
        match self {
            Error::Io(_) => true,
            Error::Corpus(corpus::CorpusError::Io(_)) => true,
            Error::Filter(e) => e.is_protocol(),
            Error::Embed(e) => e.is_protocol(),
            Error::Centroid(centroid::CentroidError::Io(_)) => true,
            Error::Index(matcher::IndexError::Io(_)) => true,
            Error::Eval(E::Io(_)) => true,
            Error::Eval(E::Embedding { source, .. }) => source.is_protocol(),
            Error::Eval(E::Filter { source, .. }) => source.is_protocol(),
            Error::Eval(E::Index(matcher::IndexError::Io(_))) => true,
            Error::Service(e) => e.is_io_or_protocol(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
