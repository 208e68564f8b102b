//! Evidence ranking: turn per-comment attention weights into a ranked
//! comment list and score it against ground-truth explainability ratings
//! with Precision@k and NDCG@k.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::MediaSession;
use crate::{HeninError, Result};

/// Which attention signal produced a ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingSource {
    SentenceAttention,
    Coattention,
    Baseline,
}

impl std::fmt::Display for RankingSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RankingSource::SentenceAttention => "sentence_attention",
            RankingSource::Coattention => "coattention",
            RankingSource::Baseline => "baseline",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for RankingSource {
    type Err = HeninError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sentence_attention" => Ok(RankingSource::SentenceAttention),
            "coattention" => Ok(RankingSource::Coattention),
            "baseline" => Ok(RankingSource::Baseline),
            other => Err(HeninError::InvalidArgument(format!(
                "unknown ranking source '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedComment {
    pub comment_id: String,
    pub score: f64,
    pub timestamp: i64,
}

/// A session's comments ordered by explanatory score, best first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplanationRanking {
    pub session_id: String,
    pub entries: Vec<RankedComment>,
    pub source: RankingSource,
}

/// Per-session, per-comment explainability ratings in {0..4}.
pub type GroundTruthRatings = BTreeMap<String, BTreeMap<String, u8>>;

/// Sort a session's comments by attention score, descending; ties go to
/// the earlier comment. `scores` is aligned with `session.comments`.
pub fn rank_comments(
    session: &MediaSession,
    scores: &[f64],
    source: RankingSource,
) -> Result<ExplanationRanking> {
    if scores.len() != session.comments.len() {
        return Err(HeninError::InvalidArgument(format!(
            "{} scores for {} comments in session {}",
            scores.len(),
            session.comments.len(),
            session.session_id
        )));
    }
    let mut entries: Vec<RankedComment> = session
        .comments
        .iter()
        .zip(scores)
        .map(|(c, &score)| RankedComment {
            comment_id: c.comment_id.clone(),
            score,
            timestamp: c.timestamp,
        })
        .collect();
    // comments arrive time-sorted, so a stable sort on score alone breaks
    // ties toward the earlier timestamp
    entries.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
    Ok(ExplanationRanking {
        session_id: session.session_id.clone(),
        entries,
        source,
    })
}

fn rating_of(ranking: &ExplanationRanking, ratings: &GroundTruthRatings, comment_id: &str) -> u8 {
    ratings
        .get(&ranking.session_id)
        .and_then(|m| m.get(comment_id))
        .copied()
        .unwrap_or(0)
}

/// Fraction of the top-min(k, T) ranked comments whose rating reaches
/// `relevance_threshold`.
pub fn precision_at_k(
    ranking: &ExplanationRanking,
    ratings: &GroundTruthRatings,
    k: usize,
    relevance_threshold: u8,
) -> Result<f64> {
    if k == 0 {
        return Err(HeninError::InvalidArgument("precision_at_k with k=0".into()));
    }
    let top = k.min(ranking.entries.len());
    if top == 0 {
        return Ok(0.0);
    }
    let relevant = ranking.entries[..top]
        .iter()
        .filter(|e| rating_of(ranking, ratings, &e.comment_id) >= relevance_threshold)
        .count();
    Ok(relevant as f64 / top as f64)
}

fn dcg(gains: impl Iterator<Item = f64>) -> f64 {
    gains
        .enumerate()
        .map(|(i, g)| g / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG@k with gain = raw rating and discount 1/log2(i+1) at 1-based
/// position i. Sessions with no nonzero rating score 0. Set
/// `exponential_gain` to use 2^rating - 1 instead.
pub fn ndcg_at_k_with(
    ranking: &ExplanationRanking,
    ratings: &GroundTruthRatings,
    k: usize,
    exponential_gain: bool,
) -> Result<f64> {
    if k == 0 {
        return Err(HeninError::InvalidArgument("ndcg_at_k with k=0".into()));
    }
    let gain = |r: u8| {
        if exponential_gain {
            (1u32 << r) as f64 - 1.0
        } else {
            f64::from(r)
        }
    };
    let ranked: Vec<f64> = ranking
        .entries
        .iter()
        .map(|e| gain(rating_of(ranking, ratings, &e.comment_id)))
        .collect();
    if ranked.iter().all(|&g| g == 0.0) {
        return Ok(0.0);
    }
    let top = k.min(ranked.len());
    let mut ideal = ranked.clone();
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let idcg = dcg(ideal[..top].iter().copied());
    Ok(dcg(ranked[..top].iter().copied()) / idcg)
}

pub fn ndcg_at_k(ranking: &ExplanationRanking, ratings: &GroundTruthRatings, k: usize) -> Result<f64> {
    ndcg_at_k_with(ranking, ratings, k, false)
}
