//! Synthetic corpus generator with planted evidential comments.
//!
//! Bully sessions receive a fixed number of "evidence" comments whose words
//! come from a toxic lexicon; everything else is neutral. Commenters in
//! bully sessions are drawn from a bully-prone user subpool with the
//! configured homophily probability, so the session-session participation
//! graph carries label signal that can be dialed from none (0) to perfectly
//! separating (1).

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{HeninError, Result};

use super::corpus::{corpus_from_records, RawComment, RawSession};
use super::types::{PreprocessConfig, SessionCorpus};

/// session_id -> comment_id -> explainability rating. Planted evidence is
/// rated 4, everything else 0.
pub type EvidenceGroundTruth = BTreeMap<String, BTreeMap<String, u8>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub num_sessions: usize,
    pub bully_fraction: f64,
    pub toxic_lexicon_size: usize,
    pub neutral_lexicon_size: usize,
    pub comments_per_session_range: (usize, usize),
    pub evidence_comments_per_bully_session: usize,
    /// How many tokens of each evidence comment come from the toxic
    /// lexicon; `None` draws the whole comment from it. Lower values make
    /// the evidence subtler.
    pub toxic_tokens_per_evidence_comment: Option<usize>,
    pub user_pool_size: usize,
    pub user_homophily: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_sessions: 200,
            bully_fraction: 0.3,
            toxic_lexicon_size: 40,
            neutral_lexicon_size: 400,
            comments_per_session_range: (8, 20),
            evidence_comments_per_bully_session: 3,
            toxic_tokens_per_evidence_comment: None,
            user_pool_size: 80,
            user_homophily: 0.9,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(HeninError::InvalidArgument(msg));
        if self.num_sessions == 0 {
            return err("num_sessions must be positive".into());
        }
        if !(self.bully_fraction > 0.0 && self.bully_fraction < 1.0) {
            return err(format!("bully_fraction {} not in (0,1)", self.bully_fraction));
        }
        if self.toxic_lexicon_size == 0 || self.neutral_lexicon_size == 0 {
            return err("lexicon sizes must be positive".into());
        }
        let (lo, hi) = self.comments_per_session_range;
        if lo == 0 || lo > hi {
            return err(format!("bad comments_per_session_range ({lo}, {hi})"));
        }
        if self.evidence_comments_per_bully_session == 0 {
            return err("evidence_comments_per_bully_session must be positive".into());
        }
        if self.evidence_comments_per_bully_session > lo {
            return err(format!(
                "evidence count {} exceeds minimum comments per session {lo}",
                self.evidence_comments_per_bully_session
            ));
        }
        if self.user_pool_size < 2 {
            return err("user_pool_size must be at least 2".into());
        }
        if !(0.0..=1.0).contains(&self.user_homophily) {
            return err(format!("user_homophily {} not in [0,1]", self.user_homophily));
        }
        if self.toxic_tokens_per_evidence_comment == Some(0) {
            return err("toxic_tokens_per_evidence_comment must be positive".into());
        }
        Ok(())
    }
}

/// Deterministic raw-record generation; the same spec always yields the
/// same records byte for byte.
pub fn generate_synthetic_records(
    spec: &SyntheticSpec,
) -> Result<(Vec<RawSession>, EvidenceGroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let toxic: Vec<String> = (0..spec.toxic_lexicon_size)
        .map(|i| format!("slur{i:03}"))
        .collect();
    let neutral: Vec<String> = (0..spec.neutral_lexicon_size)
        .map(|i| format!("word{i:04}"))
        .collect();

    // user pool split: a bully-prone subpool sized by the bully fraction,
    // the rest is the neutral-only pool
    let bully_prone_count = ((spec.user_pool_size as f64 * spec.bully_fraction).round() as usize)
        .clamp(1, spec.user_pool_size - 1);
    let users: Vec<String> = (0..spec.user_pool_size)
        .map(|i| format!("user{i:04}"))
        .collect();
    let (bully_prone, neutral_only) = users.split_at(bully_prone_count);

    let num_bully = (spec.num_sessions as f64 * spec.bully_fraction).round() as usize;
    let mut labels = vec![1u8; num_bully];
    labels.resize(spec.num_sessions, 0);
    labels.shuffle(&mut rng);

    let mut records = Vec::with_capacity(spec.num_sessions);
    let mut ground_truth = EvidenceGroundTruth::new();
    let (lo, hi) = spec.comments_per_session_range;
    for (idx, &label) in labels.iter().enumerate() {
        let session_id = format!("s{idx:04}");
        let num_comments = rng.gen_range(lo..=hi);
        let mut evidence_positions: Vec<usize> = (0..num_comments).collect();
        evidence_positions.shuffle(&mut rng);
        evidence_positions.truncate(if label == 1 {
            spec.evidence_comments_per_bully_session
        } else {
            0
        });

        let post_len = rng.gen_range(4..=8);
        let post: Vec<&str> = (0..post_len)
            .map(|_| neutral.choose(&mut rng).unwrap().as_str())
            .collect();

        let mut ts = 0i64;
        let mut comments = Vec::with_capacity(num_comments);
        let mut ratings = BTreeMap::new();
        for j in 0..num_comments {
            ts += rng.gen_range(1..=120);
            let is_evidence = evidence_positions.contains(&j);
            let len = rng.gen_range(4..=9);
            let words: Vec<&str> = match (is_evidence, spec.toxic_tokens_per_evidence_comment) {
                (false, _) => (0..len)
                    .map(|_| neutral.choose(&mut rng).unwrap().as_str())
                    .collect(),
                (true, None) => (0..len)
                    .map(|_| toxic.choose(&mut rng).unwrap().as_str())
                    .collect(),
                (true, Some(k)) => {
                    let mut toxic_slots: Vec<usize> = (0..len).collect();
                    toxic_slots.shuffle(&mut rng);
                    toxic_slots.truncate(k.min(len));
                    (0..len)
                        .map(|i| {
                            let lexicon = if toxic_slots.contains(&i) { &toxic } else { &neutral };
                            lexicon.choose(&mut rng).unwrap().as_str()
                        })
                        .collect()
                }
            };
            let author = if label == 1 && rng.gen_bool(spec.user_homophily) {
                bully_prone.choose(&mut rng).unwrap()
            } else {
                neutral_only.choose(&mut rng).unwrap()
            };
            let comment_id = format!("{session_id}_c{j:03}");
            ratings.insert(comment_id.clone(), if is_evidence { 4 } else { 0 });
            comments.push(RawComment {
                id: comment_id,
                user: author.clone(),
                ts,
                text: words.join(" "),
            });
        }
        ground_truth.insert(session_id.clone(), ratings);
        records.push(RawSession {
            session_id,
            post: post.join(" "),
            label,
            comments,
        });
    }
    Ok((records, ground_truth))
}

/// Generate and preprocess in one step.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    config: PreprocessConfig,
) -> Result<(SessionCorpus, EvidenceGroundTruth)> {
    let (records, ground_truth) = generate_synthetic_records(spec)?;
    let corpus = corpus_from_records(records, config)?;
    Ok((corpus, ground_truth))
}
