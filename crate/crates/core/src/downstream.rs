//! Execution-guided ranking: code-to-code search by output similarity and
//! candidate-solution filtering scored with pass@k.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DownstreamError {
    #[error("pass@k needs 0 <= c <= n and 1 <= k <= n, got n={n} c={c} k={k}")]
    Domain { n: u64, c: u64, k: u64 },
    #[error("no search instances")]
    NoInstances,
    #[error("instance `{0}` has no candidates")]
    NoCandidates(String),
    #[error("no output for function `{0}`")]
    MissingOutput(String),
}

fn strip_one_newline(s: &str) -> &str {
    s.strip_suffix('\n').unwrap_or(s)
}

/// `1 - levenshtein(a, b) / max(|a|, |b|)` over characters, after removing
/// one trailing newline from each side. Two empty strings score 1.
pub fn edit_similarity<S: Scalar>(a: &str, b: &str) -> S {
    let (a, b) = (strip_one_newline(a), strip_one_newline(b));
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return S::one();
    }
    let d = strsim::levenshtein(a, b);
    S::one() - S::from_ratio(d as u64, longest as u64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub output: String,
    pub problem_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchInstance {
    pub query_id: String,
    pub query_output: String,
    pub query_problem_id: String,
    pub candidates: Vec<Candidate>,
}

/// Candidates by descending similarity to the query output, ties by id.
pub fn rank_candidates<S: Scalar>(inst: &SearchInstance) -> Vec<(&Candidate, S)> {
    let mut ranked: Vec<(&Candidate, S)> =
        inst.candidates.iter().map(|c| (c, edit_similarity(&inst.query_output, &c.output))).collect();
    ranked.sort_by(|(ca, sa), (cb, sb)| sb.partial_cmp(sa).unwrap_or(Ordering::Equal).then_with(|| ca.id.cmp(&cb.id)));
    ranked
}

/// Average precision of a ranked relevance list; zero when nothing is relevant.
pub fn average_precision<S: Scalar>(relevance: &[bool]) -> S {
    let mut hits = 0u64;
    let mut sum = S::zero();
    for (rank, _) in relevance.iter().enumerate().filter(|(_, r)| **r) {
        hits += 1;
        sum = sum + S::from_ratio(hits, rank as u64 + 1);
    }
    if hits == 0 {
        S::zero()
    } else {
        sum / S::from_count(hits)
    }
}

/// Relevance flags (same problem as the query) in ranked order.
pub fn ranked_relevance(inst: &SearchInstance) -> Vec<bool> {
    rank_candidates::<f64>(inst).into_iter().map(|(c, _)| c.problem_id == inst.query_problem_id).collect()
}

/// Mean over queries of the average precision of their rankings.
pub fn mean_average_precision<S: Scalar>(instances: &[SearchInstance]) -> Result<S, DownstreamError> {
    if instances.is_empty() {
        return Err(DownstreamError::NoInstances);
    }
    let mut total = S::zero();
    for inst in instances {
        if inst.candidates.is_empty() {
            return Err(DownstreamError::NoCandidates(inst.query_id.clone()));
        }
        total = total + average_precision::<S>(&ranked_relevance(inst));
    }
    Ok(total / S::from_count(instances.len() as u64))
}

/// One search instance per item, querying against every other item.
pub fn leave_one_out_instances(items: &[Candidate]) -> Vec<SearchInstance> {
    items
        .iter()
        .enumerate()
        .map(|(i, q)| SearchInstance {
            query_id: q.id.clone(),
            query_output: q.output.clone(),
            query_problem_id: q.problem_id.clone(),
            candidates: items.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, c)| c.clone()).collect(),
        })
        .collect()
}

/// A program of the search corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchProgram {
    pub function_id: String,
    pub problem_id: String,
    pub source: String,
    #[serde(default)]
    pub test_input: String,
}

/// An output attributed to a search-corpus program by some provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramOutput {
    pub function_id: String,
    pub output: String,
}

/// Attach provider outputs to corpus programs, in corpus order.
pub fn attach_outputs(
    programs: &[SearchProgram],
    outputs: &[ProgramOutput],
) -> Result<Vec<Candidate>, DownstreamError> {
    let by_id: HashMap<&str, &str> = outputs.iter().map(|o| (o.function_id.as_str(), o.output.as_str())).collect();
    programs
        .iter()
        .map(|p| {
            let output = by_id
                .get(p.function_id.as_str())
                .ok_or_else(|| DownstreamError::MissingOutput(p.function_id.clone()))?;
            Ok(Candidate { id: p.function_id.clone(), output: output.to_string(), problem_id: p.problem_id.clone() })
        })
        .collect()
}

/// Unbiased pass@k estimate `1 - C(n-c, k) / C(n, k)`.
pub fn pass_at_k<S: Scalar>(n: u64, c: u64, k: u64) -> Result<S, DownstreamError> {
    if c > n || k == 0 || k > n {
        return Err(DownstreamError::Domain { n, c, k });
    }
    if n - c < k {
        return Ok(S::one());
    }
    // C(n-c, k) / C(n, k) = prod_{i<k} (n-c-i) / (n-i)
    let mut miss = S::one();
    for i in 0..k {
        miss = miss * S::from_ratio(n - c - i, n - i);
    }
    Ok(S::one() - miss)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub id: String,
    pub output: String,
    pub is_correct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingInstance {
    #[serde(default)]
    pub problem_id: String,
    pub expected_output: String,
    pub solutions: Vec<Solution>,
}

/// Solutions by descending similarity to the expected output, ties by id.
pub fn rank_solutions<S: Scalar>(inst: &RankingInstance) -> Vec<(&Solution, S)> {
    let mut ranked: Vec<(&Solution, S)> =
        inst.solutions.iter().map(|s| (s, edit_similarity(&inst.expected_output, &s.output))).collect();
    ranked.sort_by(|(a, sa), (b, sb)| sb.partial_cmp(sa).unwrap_or(Ordering::Equal).then_with(|| a.id.cmp(&b.id)));
    ranked
}

/// Keep the `top_m` best-ranked solutions (all of them when fewer exist)
/// and report pass@k for each requested `k` over that pool.
pub fn filter_and_score<S: Scalar>(
    inst: &RankingInstance,
    top_m: usize,
    ks: &[u64],
) -> Result<Vec<(u64, S)>, DownstreamError> {
    if inst.solutions.is_empty() {
        return Err(DownstreamError::NoCandidates(inst.problem_id.clone()));
    }
    let ranked = rank_solutions::<S>(inst);
    let kept = &ranked[..top_m.min(ranked.len())];
    let n = kept.len() as u64;
    let c = kept.iter().filter(|(s, _)| s.is_correct).count() as u64;
    ks.iter().map(|&k| pass_at_k::<S>(n, c, k).map(|v| (k, v))).collect()
}
