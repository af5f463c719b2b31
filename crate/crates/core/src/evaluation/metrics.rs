//! Binary-relevance ranking metrics.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use super::{EvalError, RankedList, Result};

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(EvalError::InvalidK)
    } else {
        Ok(())
    }
}

fn check_len<T>(ranked: &[T], k: usize) -> Result<()> {
    if ranked.len() < k {
        Err(EvalError::ShortList { len: ranked.len(), k })
    } else {
        Ok(())
    }
}

/// `1/rank` of `gold` within the top `k`, else 0.
pub fn reciprocal_rank<T: PartialEq>(ranked: &[T], gold: &T, k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(ranked
        .iter()
        .take(k)
        .position(|x| x == gold)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64))
}

/// `1/rank` of the first relevant item within the top `k`, else 0.
pub fn reciprocal_rank_first<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(ranked
        .iter()
        .take(k)
        .position(|x| relevant.contains(x))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64))
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> Result<f64> {
    let n = values.len();
    if n == 0 {
        return Err(EvalError::NoQueries);
    }
    Ok(values.sum::<f64>() / n as f64)
}

/// Mean reciprocal rank over queries, each with a single gold item.
pub fn mrr_at_k(lists: &[RankedList], golds: &HashMap<String, String>, k: usize) -> Result<f64> {
    check_k(k)?;
    let rrs = lists
        .iter()
        .map(|l| {
            let gold = golds
                .get(&l.query_id)
                .ok_or_else(|| EvalError::MissingGold(l.query_id.clone()))?;
            reciprocal_rank(&l.items, gold, k)
        })
        .collect::<Result<Vec<_>>>()?;
    mean(rrs.into_iter())
}

/// An item is relevant iff at least half of the votes cast call it relevant.
pub fn majority_relevance(votes: &[bool]) -> Result<bool> {
    if votes.is_empty() {
        return Err(EvalError::NoVotes);
    }
    let yes = votes.iter().filter(|v| **v).count();
    Ok(2 * yes >= votes.len())
}

/// Fraction of the top `k` that is relevant; lists shorter than `k` are an error.
pub fn precision_at_k<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> Result<f64> {
    check_k(k)?;
    check_len(ranked, k)?;
    let hits = ranked[..k].iter().filter(|x| relevant.contains(x)).count();
    Ok(hits as f64 / k as f64)
}

/// Sum of `P@i` at relevant ranks `i ≤ k`, divided by the number of relevant
/// items found in the top `k` (0 when none are found).
pub fn average_precision_at_k<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> Result<f64> {
    check_k(k)?;
    check_len(ranked, k)?;
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, item) in ranked[..k].iter().enumerate() {
        if relevant.contains(item) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(if hits == 0 { 0.0 } else { sum / hits as f64 })
}

pub fn map_at_k<T: Eq + Hash>(queries: &[(&[T], &HashSet<T>)], k: usize) -> Result<f64> {
    let aps = queries
        .iter()
        .map(|(ranked, relevant)| average_precision_at_k(ranked, relevant, k))
        .collect::<Result<Vec<_>>>()?;
    mean(aps.into_iter())
}
