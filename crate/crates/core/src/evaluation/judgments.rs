//! Expert relevance judgments and the per-resume human evaluation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::metrics::{average_precision_at_k, majority_relevance, precision_at_k, reciprocal_rank_first};
use super::{EvalError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub resume_id: String,
    pub esco_id: String,
    pub expert_id: String,
    pub relevant: bool,
}

/// Judgments with later entries for the same (resume, job, expert) triple
/// overriding earlier ones.
#[derive(Debug, Clone, Default)]
pub struct JudgmentSet {
    // resume -> job -> expert -> vote
    votes: BTreeMap<String, BTreeMap<String, BTreeMap<String, bool>>>,
}

impl JudgmentSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies judgments in log order.
    pub fn from_log<'a>(log: impl IntoIterator<Item = &'a Judgment>) -> Self {
        let mut set = Self::new();
        for j in log {
            set.record(j);
        }
        set
    }

    pub fn record(&mut self, j: &Judgment) {
        self.votes
            .entry(j.resume_id.clone())
            .or_default()
            .entry(j.esco_id.clone())
            .or_default()
            .insert(j.expert_id.clone(), j.relevant);
    }

    pub fn resumes(&self) -> impl Iterator<Item = &str> {
        self.votes.keys().map(String::as_str)
    }

    pub fn has_resume(&self, resume_id: &str) -> bool {
        self.votes.contains_key(resume_id)
    }

    /// Votes for one (resume, job) pair in expert-id order.
    pub fn votes(&self, resume_id: &str, esco_id: &str) -> Vec<bool> {
        self.votes
            .get(resume_id)
            .and_then(|jobs| jobs.get(esco_id))
            .map(|experts| experts.values().copied().collect())
            .unwrap_or_default()
    }

    pub fn experts(&self, resume_id: &str) -> BTreeSet<&str> {
        self.votes
            .get(resume_id)
            .into_iter()
            .flat_map(|jobs| jobs.values())
            .flat_map(|experts| experts.keys().map(String::as_str))
            .collect()
    }

    /// Jobs judged for a resume that pass the majority rule.
    pub fn relevant_set(&self, resume_id: &str) -> Result<HashSet<String>> {
        let mut out = HashSet::new();
        if let Some(jobs) = self.votes.get(resume_id) {
            for (job, experts) in jobs {
                let votes: Vec<bool> = experts.values().copied().collect();
                if majority_relevance(&votes)? {
                    out.insert(job.clone());
                }
            }
        }
        Ok(out)
    }
}

pub fn read_judgments<R: BufRead>(reader: R) -> Result<Vec<Judgment>> {
    super::read_jsonl(reader, |j: &Judgment| {
        for (key, v) in [("resume_id", &j.resume_id), ("esco_id", &j.esco_id), ("expert_id", &j.expert_id)] {
            if v.is_empty() {
                return Err(format!("empty {key}"));
            }
        }
        Ok(())
    })
}

pub fn write_judgment<W: Write>(j: &Judgment, mut writer: W) -> std::io::Result<()> {
    serde_json::to_writer(&mut writer, j)?;
    writer.write_all(b"\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanEvalMetrics {
    pub map_at_k: f64,
    pub p_at_k: f64,
    pub mrr_at_k: f64,
    pub n_experts: usize,
    pub relevant_count: usize,
}

/// Metrics for one resume over the model's ranked order, with relevance
/// decided by the majority rule over the stored judgments.
pub fn evaluate_resume(ranked: &[String], judgments: &JudgmentSet, resume_id: &str, k: usize) -> Result<HumanEvalMetrics> {
    if !judgments.has_resume(resume_id) {
        return Err(EvalError::NoJudgments(resume_id.to_owned()));
    }
    let relevant = judgments.relevant_set(resume_id)?;
    let p = precision_at_k(ranked, &relevant, k)?;
    Ok(HumanEvalMetrics {
        map_at_k: average_precision_at_k(ranked, &relevant, k)?,
        p_at_k: p,
        mrr_at_k: reciprocal_rank_first(ranked, &relevant, k)?,
        n_experts: judgments.experts(resume_id).len(),
        relevant_count: ranked[..k].iter().filter(|x| relevant.contains(*x)).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j(resume: &str, job: &str, expert: &str, relevant: bool) -> Judgment {
        Judgment {
            resume_id: resume.into(),
            esco_id: job.into(),
            expert_id: expert.into(),
            relevant,
        }
    }

    #[test]
    fn last_write_wins() {
        let log = [j("r", "a", "e1", true), j("r", "a", "e1", false)];
        let set = JudgmentSet::from_log(&log);
        assert_eq!(set.votes("r", "a"), [false]);
        assert!(set.relevant_set("r").unwrap().is_empty());
    }

    #[test]
    fn majority_over_votes_cast() {
        let mut log = Vec::new();
        for e in 0..10 {
            log.push(j("r", "half", &format!("e{e}"), e < 5));
            log.push(j("r", "four", &format!("e{e}"), e < 4));
        }
        // One expert skips `solo` entirely.
        log.push(j("r", "solo", "e0", true));
        let set = JudgmentSet::from_log(&log);
        let rel = set.relevant_set("r").unwrap();
        assert!(rel.contains("half"));
        assert!(!rel.contains("four"));
        assert!(rel.contains("solo"));
        assert_eq!(set.experts("r").len(), 10);
    }

    #[test]
    fn resume_metrics() {
        let ranked: Vec<String> = (0..20).map(|i| format!("j{i:02}")).collect();
        let mut log = Vec::new();
        for (i, job) in ranked.iter().enumerate() {
            log.push(j("r", job, "e1", i < 16));
        }
        let set = JudgmentSet::from_log(&log);
        let m = evaluate_resume(&ranked, &set, "r", 20).unwrap();
        assert_eq!(m.p_at_k, 0.8);
        assert_eq!(m.mrr_at_k, 1.0);
        assert_eq!(m.map_at_k, 1.0);
        assert_eq!(m.relevant_count, 16);
        assert_eq!(m.n_experts, 1);
        assert!(matches!(
            evaluate_resume(&ranked, &set, "other", 20),
            Err(EvalError::NoJudgments(_))
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let log = [j("r", "a", "e1", true), j("r", "b", "e2", false)];
        let mut buf = Vec::new();
        for x in &log {
            write_judgment(x, &mut buf).unwrap();
        }
        assert_eq!(read_judgments(buf.as_slice()).unwrap(), log);
        let bad = b"{\"resume_id\":\"\",\"esco_id\":\"a\",\"expert_id\":\"e\",\"relevant\":true}\n";
        assert!(matches!(read_judgments(&bad[..]), Err(EvalError::Parse { line: 1, .. })));
    }
}
