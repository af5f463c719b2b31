//! Reducing advertisement bodies to job-relevant text.
//!
//! Bodies are split into paragraphs and then either cut at a token budget
//! or passed through a [`RelevanceFilter`] that scores each paragraph.
//! Two filters ship: the lexical [`BaselineScorer`] and the
//! [`RemoteClassifier`] client for the `POST /classify` protocol.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::tokenize;

pub const DEFAULT_TOKEN_BUDGET: usize = 512;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_LEXICON: &str = include_str!("../config/cue_lexicon.json");

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("advertisement body is empty")]
    EmptyBody,
    #[error("classifier request failed ({context}): {message}")]
    Transport { context: String, message: String },
    #[error("classifier protocol violation: {0}")]
    Protocol(String),
    #[error("invalid cue lexicon: {0}")]
    Lexicon(String),
    #[error("verdicts and labels differ in length ({verdicts} vs {labels})")]
    LengthMismatch { verdicts: usize, labels: usize },
    #[error("cannot evaluate an empty prediction set")]
    NoPredictions,
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
}

impl FilterError {
    pub fn is_protocol(&self) -> bool {
        matches!(self, FilterError::Transport { .. } | FilterError::Protocol(_))
    }
}

pub type Result<T, E = FilterError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub ad_id: String,
    pub index: usize,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub keep: bool,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Splits on runs of blank (whitespace-only) lines.
pub fn segment_paragraphs(ad_id: &str, body: &str) -> Result<Vec<Paragraph>> {
    if body.trim().is_empty() {
        return Err(FilterError::EmptyBody);
    }
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let flush = |current: &mut Vec<&str>, out: &mut Vec<Paragraph>| {
        let text = current.join("\n");
        let text = text.trim();
        if !text.is_empty() {
            out.push(Paragraph {
                ad_id: ad_id.to_owned(),
                index: out.len(),
                text: text.to_owned(),
                label: None,
            });
        }
        current.clear();
    };
    for line in body.split('\n') {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            flush(&mut current, &mut out);
        } else {
            current.push(line);
        }
    }
    flush(&mut current, &mut out);
    Ok(out)
}

pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;

    /// Longest prefix of `text` holding at most `budget` tokens.
    fn truncate<'a>(&self, text: &'a str, budget: usize) -> &'a str;
}

/// Counts whitespace-separated words.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceCounter;

impl TokenCounter for WhitespaceCounter {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }

    fn truncate<'a>(&self, text: &'a str, budget: usize) -> &'a str {
        if budget == 0 {
            return "";
        }
        let mut seen = 0;
        let mut in_word = false;
        for (i, c) in text.char_indices() {
            if c.is_whitespace() {
                if in_word {
                    in_word = false;
                    if seen == budget {
                        return &text[..i];
                    }
                }
            } else if !in_word {
                in_word = true;
                seen += 1;
            }
        }
        text
    }
}

const PARAGRAPH_SEPARATOR: &str = "\n\n";

/// Greedily concatenates whole paragraphs while the joined text fits the
/// budget. A first paragraph that alone exceeds it is hard-cut.
pub fn truncate_at_token_limit<S: AsRef<str>>(
    paragraphs: &[S],
    budget: usize,
    counter: &dyn TokenCounter,
) -> String {
    let mut acc = String::new();
    for p in paragraphs {
        let p = p.as_ref();
        let candidate = if acc.is_empty() {
            p.to_owned()
        } else {
            format!("{acc}{PARAGRAPH_SEPARATOR}{p}")
        };
        if counter.count(&candidate) <= budget {
            acc = candidate;
        } else {
            if acc.is_empty() {
                acc = counter.truncate(p, budget).trim_end().to_owned();
            }
            break;
        }
    }
    acc
}

pub trait RelevanceFilter: Send + Sync {
    /// One score in `[0, 1]` per paragraph, index-aligned.
    fn score(&self, paragraphs: &[Paragraph]) -> Result<Vec<f64>>;

    fn name(&self) -> String;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredText {
    pub text: String,
    pub verdicts: Vec<FilterVerdict>,
    /// Every paragraph fell below the threshold and the token cut-off was used.
    pub fallback: bool,
}

pub fn filter_relevant(
    paragraphs: &[Paragraph],
    filter: &dyn RelevanceFilter,
    threshold: f64,
    budget: usize,
    counter: &dyn TokenCounter,
) -> Result<FilteredText> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(FilterError::Threshold(threshold));
    }
    let scores = filter.score(paragraphs)?;
    if scores.len() != paragraphs.len() {
        return Err(FilterError::Protocol(format!(
            "{} scores for {} paragraphs",
            scores.len(),
            paragraphs.len()
        )));
    }
    let verdicts: Vec<FilterVerdict> = scores
        .iter()
        .map(|&score| FilterVerdict {
            keep: score >= threshold,
            score,
        })
        .collect();
    let kept: Vec<&str> = paragraphs
        .iter()
        .zip(&verdicts)
        .filter(|(_, v)| v.keep)
        .map(|(p, _)| p.text.as_str())
        .collect();
    if kept.is_empty() {
        let all: Vec<&str> = paragraphs.iter().map(|p| p.text.as_str()).collect();
        return Ok(FilteredText {
            text: truncate_at_token_limit(&all, budget, counter),
            verdicts,
            fallback: true,
        });
    }
    Ok(FilteredText {
        text: kept.join(PARAGRAPH_SEPARATOR),
        verdicts,
        fallback: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CueWeights {
    pub cue: f64,
    pub position: f64,
    pub length: f64,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueLexicon {
    pub cues: Vec<String>,
    pub weights: CueWeights,
}

impl CueLexicon {
    pub fn from_json(json: &str) -> Result<Self> {
        let lex: CueLexicon = serde_json::from_str(json).map_err(|e| FilterError::Lexicon(e.to_string()))?;
        let w = lex.weights;
        if ![w.cue, w.position, w.length, w.bias].iter().all(|x| x.is_finite()) {
            return Err(FilterError::Lexicon("weights must be finite".into()));
        }
        Ok(lex)
    }
}

impl Default for CueLexicon {
    fn default() -> Self {
        Self::from_json(DEFAULT_LEXICON).expect("bundled lexicon parses")
    }
}

/// Logistic model over cue-term hits, paragraph position and length.
///
/// `score = σ(bias + cue·hits + position/(1 + index) + length·ln(1 + tokens))`,
/// where `hits` counts every occurrence of every cue phrase in the
/// paragraph's token stream.
#[derive(Debug, Clone)]
pub struct BaselineScorer {
    cues: Vec<Vec<String>>,
    weights: CueWeights,
}

impl Default for BaselineScorer {
    fn default() -> Self {
        Self::new(&CueLexicon::default())
    }
}

impl BaselineScorer {
    pub fn new(lexicon: &CueLexicon) -> Self {
        let cues = lexicon
            .cues
            .iter()
            .map(|c| tokenize(c))
            .filter(|t| !t.is_empty())
            .collect();
        Self {
            cues,
            weights: lexicon.weights,
        }
    }

    pub fn cue_hits(&self, text: &str) -> usize {
        let tokens = tokenize(text);
        self.cues
            .iter()
            .map(|cue| tokens.windows(cue.len()).filter(|w| *w == cue.as_slice()).count())
            .sum()
    }

    pub fn score_paragraph(&self, paragraph: &Paragraph) -> f64 {
        let tokens = tokenize(&paragraph.text).len();
        let w = &self.weights;
        let z = w.bias
            + w.cue * self.cue_hits(&paragraph.text) as f64
            + w.position / (1.0 + paragraph.index as f64)
            + w.length * (1.0 + tokens as f64).ln();
        logistic(z)
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl RelevanceFilter for BaselineScorer {
    fn score(&self, paragraphs: &[Paragraph]) -> Result<Vec<f64>> {
        Ok(paragraphs.iter().map(|p| self.score_paragraph(p)).collect())
    }

    fn name(&self) -> String {
        "baseline".into()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub paragraphs: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

/// Blocking client for a `POST /classify` paragraph classifier.
#[derive(Debug, Clone)]
pub struct RemoteClassifier {
    url: String,
    client: reqwest::blocking::Client,
}

impl RemoteClassifier {
    pub fn new(base_url: &str) -> Self {
        Self::with_timeout(base_url, Duration::from_secs(60))
    }

    pub fn with_timeout(base_url: &str, timeout: Duration) -> Self {
        Self {
            url: crate::embedding::remote_endpoint(base_url, "/classify"),
            client: crate::embedding::remote_client(timeout),
        }
    }
}

pub fn validate_classify_response(resp: &ClassifyResponse, expected: usize) -> Result<Vec<f64>> {
    if resp.scores.len() != expected || resp.labels.len() != expected {
        return Err(FilterError::Protocol(format!(
            "expected {expected} scores and labels, got {} and {}",
            resp.scores.len(),
            resp.labels.len()
        )));
    }
    if let Some((i, s)) = resp.scores.iter().enumerate().find(|(_, s)| !(0.0..=1.0).contains(*s)) {
        return Err(FilterError::Protocol(format!("score {i} = {s} outside [0, 1]")));
    }
    if let Some((i, l)) = resp.labels.iter().enumerate().find(|(_, l)| **l > 1) {
        return Err(FilterError::Protocol(format!("label {i} = {l} is not 0 or 1")));
    }
    Ok(resp.scores.clone())
}

impl RelevanceFilter for RemoteClassifier {
    fn score(&self, paragraphs: &[Paragraph]) -> Result<Vec<f64>> {
        if paragraphs.is_empty() {
            return Ok(Vec::new());
        }
        let context = format!(
            "POST {} [ad {}, {} paragraphs]",
            self.url,
            paragraphs[0].ad_id,
            paragraphs.len()
        );
        let transport = |message: String| FilterError::Transport {
            context: context.clone(),
            message,
        };
        let resp = self
            .client
            .post(&self.url)
            .json(&ClassifyRequest {
                paragraphs: paragraphs.iter().map(|p| p.text.clone()).collect(),
            })
            .send()
            .map_err(|e| transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(transport(format!("HTTP {status}: {body}")));
        }
        let parsed: ClassifyResponse = resp
            .json()
            .map_err(|e| FilterError::Protocol(format!("{context}: malformed response: {e}")))?;
        validate_classify_response(&parsed, paragraphs.len())
    }

    fn name(&self) -> String {
        format!("remote:{}", self.url)
    }
}

/// Confusion-matrix metrics with `true` (relevant) as the positive class.
pub fn evaluate_filter(verdicts: &[bool], labels: &[bool]) -> Result<ClassifierReport> {
    if verdicts.len() != labels.len() {
        return Err(FilterError::LengthMismatch {
            verdicts: verdicts.len(),
            labels: labels.len(),
        });
    }
    if verdicts.is_empty() {
        return Err(FilterError::NoPredictions);
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&pred, &gold) in verdicts.iter().zip(labels) {
        match (pred, gold) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ClassifierReport {
        accuracy: ratio(tp + tn, verdicts.len()),
        precision,
        recall,
        f1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    TokenCutoff,
    Classifier,
}

impl FilterMode {
    pub fn label(self) -> &'static str {
        match self {
            FilterMode::TokenCutoff => "cut-off at token limit",
            FilterMode::Classifier => "classifier",
        }
    }
}

impl std::fmt::Display for FilterMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FilterMode::TokenCutoff => "token-cutoff",
            FilterMode::Classifier => "classifier",
        })
    }
}

impl std::str::FromStr for FilterMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "token-cutoff" => Ok(FilterMode::TokenCutoff),
            "classifier" | "classifier-baseline" => Ok(FilterMode::Classifier),
            other => Err(format!(
                "unknown filter mode `{other}` (expected token-cutoff or classifier)"
            )),
        }
    }
}

/// Which relevance filter backs classifier mode: the lexical `baseline`
/// or the base URL of a `POST /classify` service.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassifierSpec {
    Baseline,
    Remote(String),
}

impl std::str::FromStr for ClassifierSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(ClassifierSpec::Baseline),
            url if url.starts_with("http://") || url.starts_with("https://") => Ok(ClassifierSpec::Remote(url.to_owned())),
            other => Err(format!("unknown classifier `{other}` (expected baseline or an http(s) URL)")),
        }
    }
}

impl ClassifierSpec {
    /// `lexicon` is a cue-lexicon JSON document for the baseline; the
    /// bundled one is used when absent.
    pub fn build(&self, lexicon: Option<&str>) -> Result<Arc<dyn RelevanceFilter>> {
        Ok(match self {
            ClassifierSpec::Baseline => {
                let lex = match lexicon {
                    Some(json) => CueLexicon::from_json(json)?,
                    None => CueLexicon::default(),
                };
                Arc::new(BaselineScorer::new(&lex))
            }
            ClassifierSpec::Remote(url) => Arc::new(RemoteClassifier::new(url)),
        })
    }
}

/// Text preprocessing shared by the evaluation harness, the CLI and the
/// service.
#[derive(Clone)]
pub struct Preprocessor {
    pub mode: FilterMode,
    pub budget: usize,
    pub threshold: f64,
    pub counter: Arc<dyn TokenCounter>,
    pub filter: Arc<dyn RelevanceFilter>,
}

impl std::fmt::Debug for Preprocessor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Preprocessor")
            .field("mode", &self.mode)
            .field("budget", &self.budget)
            .field("threshold", &self.threshold)
            .field("filter", &self.filter.name())
            .finish()
    }
}

impl Preprocessor {
    pub fn new(mode: FilterMode, filter: Arc<dyn RelevanceFilter>) -> Self {
        Self {
            mode,
            budget: DEFAULT_TOKEN_BUDGET,
            threshold: DEFAULT_THRESHOLD,
            counter: Arc::new(WhitespaceCounter),
            filter,
        }
    }

    pub fn token_cutoff() -> Self {
        Self::new(FilterMode::TokenCutoff, Arc::new(BaselineScorer::default()))
    }

    pub fn baseline_classifier() -> Self {
        Self::new(FilterMode::Classifier, Arc::new(BaselineScorer::default()))
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn apply(&self, id: &str, text: &str) -> Result<String> {
        let paragraphs = segment_paragraphs(id, text)?;
        match self.mode {
            FilterMode::TokenCutoff => Ok(truncate_at_token_limit(
                &paragraphs.iter().map(|p| p.text.as_str()).collect::<Vec<_>>(),
                self.budget,
                self.counter.as_ref(),
            )),
            FilterMode::Classifier => Ok(filter_relevant(
                &paragraphs,
                self.filter.as_ref(),
                self.threshold,
                self.budget,
                self.counter.as_ref(),
            )?
            .text),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(ps: &[Paragraph]) -> Vec<&str> {
        ps.iter().map(|p| p.text.as_str()).collect()
    }

    #[test]
    fn segmentation_rules() {
        assert_eq!(texts(&segment_paragraphs("a", "A\n\nB").unwrap()), ["A", "B"]);
        assert_eq!(texts(&segment_paragraphs("a", "A\nB").unwrap()), ["A\nB"]);
        assert_eq!(texts(&segment_paragraphs("a", "A\n\n\n\nB").unwrap()), ["A", "B"]);
        assert_eq!(
            texts(&segment_paragraphs("a", "  A \r\n \t \r\nB\n  \n").unwrap()),
            ["A", "B"]
        );
        let ps = segment_paragraphs("ad7", "x\n\ny\n\nz").unwrap();
        assert_eq!(ps.iter().map(|p| p.index).collect::<Vec<_>>(), [0, 1, 2]);
        assert!(ps.iter().all(|p| p.ad_id == "ad7"));
        assert!(matches!(segment_paragraphs("a", " \n\n "), Err(FilterError::EmptyBody)));
    }

    fn words(n: usize, tag: &str) -> String {
        (0..n).map(|i| format!("{tag}{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn truncation_keeps_whole_paragraphs() {
        let ps = [words(200, "a"), words(200, "b"), words(200, "c")];
        let out = truncate_at_token_limit(&ps, 512, &WhitespaceCounter);
        assert_eq!(out, format!("{}\n\n{}", ps[0], ps[1]));
    }

    #[test]
    fn truncation_hard_cuts_oversized_first() {
        let p = words(600, "w");
        let out = truncate_at_token_limit(&[p.as_str()], 512, &WhitespaceCounter);
        assert_eq!(out, words(512, "w"));
    }

    #[test]
    fn truncation_under_budget_unchanged() {
        let ps = [words(60, "a"), words(40, "b")];
        let out = truncate_at_token_limit(&ps, 512, &WhitespaceCounter);
        assert_eq!(out, ps.join("\n\n"));
    }

    #[test]
    fn whitespace_truncate_preserves_prefix() {
        let c = WhitespaceCounter;
        assert_eq!(c.truncate("a  b\nc d", 3), "a  b\nc");
        assert_eq!(c.truncate("  a b", 1), "  a");
        assert_eq!(c.truncate("a b", 5), "a b");
        assert_eq!(c.truncate("a b", 0), "");
    }

    struct Fixed(Vec<f64>);

    impl RelevanceFilter for Fixed {
        fn score(&self, _: &[Paragraph]) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
        fn name(&self) -> String {
            "fixed".into()
        }
    }

    #[test]
    fn threshold_keeps_in_order() {
        let ps = segment_paragraphs("a", "zero\n\none\n\ntwo").unwrap();
        let out = filter_relevant(&ps, &Fixed(vec![0.9, 0.1, 0.8]), 0.5, 512, &WhitespaceCounter).unwrap();
        assert_eq!(out.text, "zero\n\ntwo");
        assert!(!out.fallback);
        assert_eq!(
            out.verdicts.iter().map(|v| v.keep).collect::<Vec<_>>(),
            [true, false, true]
        );
    }

    #[test]
    fn all_rejected_falls_back() {
        let ps = segment_paragraphs("a", "zero one\n\ntwo three").unwrap();
        let out = filter_relevant(&ps, &Fixed(vec![0.1, 0.2]), 0.5, 3, &WhitespaceCounter).unwrap();
        assert!(out.fallback);
        assert_eq!(out.text, "zero one");
    }

    #[test]
    fn zero_threshold_keeps_everything() {
        let ps = segment_paragraphs("a", "x\n\ny").unwrap();
        let out = filter_relevant(&ps, &Fixed(vec![0.0, 0.3]), 0.0, 512, &WhitespaceCounter).unwrap();
        assert_eq!(out.text, "x\n\ny");
    }

    #[test]
    fn score_count_mismatch_is_protocol_error() {
        let ps = segment_paragraphs("a", "x\n\ny").unwrap();
        let err = filter_relevant(&ps, &Fixed(vec![0.5]), 0.5, 512, &WhitespaceCounter).unwrap_err();
        assert!(err.is_protocol());
    }

    fn para(index: usize, text: &str) -> Paragraph {
        Paragraph {
            ad_id: "a".into(),
            index,
            text: text.into(),
            label: None,
        }
    }

    #[test]
    fn baseline_three_cues_default_config() {
        let s = BaselineScorer::default();
        let p = para(0, "Requirements: experience with care, knowledge of triage");
        assert_eq!(s.cue_hits(&p.text), 3);
        // 7 tokens: -2 + 3·1.0 - 0.5/1 + 0.2·ln(1 + 7)
        let z: f64 = -2.0 + 3.0 - 0.5 + 0.2 * 8.0_f64.ln();
        let expected = 1.0 / (1.0 + (-z).exp());
        let got = s.score_paragraph(&p);
        assert!((got - expected).abs() < 1e-15);
        assert!(got > 0.5);
        // More cues never lower the score.
        let more = para(0, "Requirements: experience with care, knowledge of triage and skills");
        assert!(s.score_paragraph(&more) > got);
    }

    #[test]
    fn baseline_zero_weights_is_half() {
        let lex = CueLexicon {
            cues: vec![],
            weights: CueWeights {
                cue: 0.0,
                position: 0.0,
                length: 0.0,
                bias: 0.0,
            },
        };
        let s = BaselineScorer::new(&lex);
        assert_eq!(s.score_paragraph(&para(3, "anything at all")), 0.5);
    }

    #[test]
    fn baseline_empty_lexicon_uses_position_and_length() {
        let mut lex = CueLexicon::default();
        lex.cues.clear();
        let s = BaselineScorer::new(&lex);
        let z: f64 = -2.0 - 0.5 / 3.0 + 0.2 * 3.0_f64.ln();
        let expected = 1.0 / (1.0 + (-z).exp());
        assert!((s.score_paragraph(&para(2, "two words")) - expected).abs() < 1e-15);
    }

    #[test]
    fn baseline_multiword_cue() {
        let s = BaselineScorer::default();
        assert_eq!(s.cue_hits("You will lead; you  will  plan"), 2);
        let p = para(1, "same text");
        assert_eq!(s.score_paragraph(&p), s.score_paragraph(&p.clone()));
    }

    #[test]
    fn lexicon_parsing() {
        assert!(CueLexicon::from_json("{}").is_err());
        let lex = CueLexicon::from_json(DEFAULT_LEXICON).unwrap();
        assert!(lex.cues.contains(&"anforderungen".to_owned()));
    }

    #[test]
    fn report_perfect() {
        let r = evaluate_filter(&[true, false, true], &[true, false, true]).unwrap();
        assert_eq!((r.accuracy, r.f1, r.precision, r.recall), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn report_mixed_confusion() {
        // TP=2, FP=1, FN=1, TN=1
        let pred = [true, true, true, false, false];
        let gold = [true, true, false, true, false];
        let r = evaluate_filter(&pred, &gold).unwrap();
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.accuracy - 0.6).abs() < 1e-15);
    }

    #[test]
    fn report_errors_and_degenerate() {
        assert!(matches!(evaluate_filter(&[true], &[]), Err(FilterError::LengthMismatch { .. })));
        assert!(matches!(evaluate_filter(&[], &[]), Err(FilterError::NoPredictions)));
        let r = evaluate_filter(&[false, false], &[true, false]).unwrap();
        assert_eq!((r.precision, r.recall, r.f1, r.accuracy), (0.0, 0.0, 0.0, 0.5));
    }

    #[test]
    fn classify_response_validation() {
        let ok = ClassifyResponse {
            scores: vec![0.2, 0.9],
            labels: vec![0, 1],
        };
        assert_eq!(validate_classify_response(&ok, 2).unwrap(), [0.2, 0.9]);
        assert!(validate_classify_response(&ok, 3).is_err());
        let bad_score = ClassifyResponse {
            scores: vec![1.5],
            labels: vec![1],
        };
        assert!(validate_classify_response(&bad_score, 1).is_err());
        let bad_label = ClassifyResponse {
            scores: vec![0.5],
            labels: vec![2],
        };
        assert!(validate_classify_response(&bad_label, 1).is_err());
    }

    #[test]
    fn filter_mode_parsing() {
        assert_eq!("token-cutoff".parse::<FilterMode>().unwrap(), FilterMode::TokenCutoff);
        assert_eq!("classifier-baseline".parse::<FilterMode>().unwrap(), FilterMode::Classifier);
        assert!("other".parse::<FilterMode>().is_err());
    }

    fn confusion_oracle(pred: &[bool], gold: &[bool]) -> (f64, f64, f64, f64) {
        let count = |p: bool, g: bool| pred.iter().zip(gold).filter(|(a, b)| **a == p && **b == g).count() as f64;
        let (tp, fp, fn_, tn) = (count(true, true), count(true, false), count(false, true), count(false, false));
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        ((tp + tn) / pred.len() as f64, p, r, f)
    }

    proptest! {
        #[test]
        fn report_matches_oracle(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
            let (pred, gold): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
            let r = evaluate_filter(&pred, &gold).unwrap();
            let (a, p, rec, f) = confusion_oracle(&pred, &gold);
            prop_assert!((r.accuracy - a).abs() <= 1e-12);
            prop_assert!((r.precision - p).abs() <= 1e-12);
            prop_assert!((r.recall - rec).abs() <= 1e-12);
            prop_assert!((r.f1 - f).abs() <= 1e-12);
        }

        #[test]
        fn truncation_within_budget(
            lens in prop::collection::vec(1usize..80, 1..8),
            budget in 1usize..200,
        ) {
            let ps: Vec<String> = lens.iter().enumerate().map(|(i, n)| words(*n, &format!("p{i}x"))).collect();
            let out = truncate_at_token_limit(&ps, budget, &WhitespaceCounter);
            prop_assert!(WhitespaceCounter.count(&out) <= budget);
            prop_assert!(!out.is_empty());
            prop_assert!(ps.join("\n\n").starts_with(&out));
        }

        #[test]
        fn filtered_text_is_ordered_subsequence(
            scores in prop::collection::vec(0.0..=1.0_f64, 1..8),
            threshold in 0.0..=1.0_f64,
        ) {
            let body = (0..scores.len()).map(|i| format!("para {i}")).collect::<Vec<_>>().join("\n\n");
            let ps = segment_paragraphs("a", &body).unwrap();
            let out = filter_relevant(&ps, &Fixed(scores.clone()), threshold, 512, &WhitespaceCounter).unwrap();
            prop_assert!(!out.text.is_empty());
            if !out.fallback {
                let expected: Vec<String> = scores
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| **s >= threshold)
                    .map(|(i, _)| format!("para {i}"))
                    .collect();
                prop_assert_eq!(out.text, expected.join("\n\n"));
            } else {
                prop_assert!(scores.iter().all(|s| *s < threshold));
            }
        }
    }
}
