//! Corpus ingestion from the on-disk JSON schema.
//!
//! Corpus file: a top-level array of
//! `{"session_id": str, "post": str, "label": 0|1,
//!   "comments": [{"id": str, "user": str, "ts": int, "text": str}, ...]}`.
//!
//! Ratings file: `{"session_id": {"comment_id": rating_int}}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{HeninError, Result};

use super::types::{tokenize, Comment, MediaSession, PreprocessConfig, SessionCorpus, Vocabulary};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawComment {
    pub id: String,
    pub user: String,
    pub ts: i64,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawSession {
    pub session_id: String,
    pub post: String,
    pub label: u8,
    pub comments: Vec<RawComment>,
}

/// Parse, tokenize, truncate, and index a corpus file.
pub fn load_corpus(path: impl AsRef<Path>, config: PreprocessConfig) -> Result<SessionCorpus> {
    let text = std::fs::read_to_string(path)?;
    let values: Vec<serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| HeninError::Parse {
            session_id: None,
            msg: e.to_string(),
        })?;
    let mut records = Vec::with_capacity(values.len());
    for value in values {
        let session_id = value
            .get("session_id")
            .and_then(|v| v.as_str())
            .map(str::to_string);
        let record: RawSession =
            serde_json::from_value(value).map_err(|e| HeninError::Parse {
                session_id: session_id.clone(),
                msg: e.to_string(),
            })?;
        if record.label > 1 {
            return Err(HeninError::Parse {
                session_id,
                msg: format!("label must be 0 or 1, got {}", record.label),
            });
        }
        records.push(record);
    }
    corpus_from_records(records, config)
}

/// Build a tokenized corpus from in-memory records. The vocabulary covers
/// the whole file; callers holding out a test split should call
/// [`SessionCorpus::rebuild_vocabulary`] on the training positions.
pub fn corpus_from_records(
    records: Vec<RawSession>,
    config: PreprocessConfig,
) -> Result<SessionCorpus> {
    if records.is_empty() {
        return Err(HeninError::EmptyCorpus);
    }
    {
        let mut ids: Vec<&str> = records.iter().map(|r| r.session_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(dup) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(HeninError::Parse {
                session_id: Some(dup[0].to_string()),
                msg: "duplicate session_id".into(),
            });
        }
    }

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for record in &records {
        for tok in tokenize(&record.post) {
            *counts.entry(tok).or_default() += 1;
        }
        for comment in &record.comments {
            for tok in tokenize(&comment.text) {
                *counts.entry(tok).or_default() += 1;
            }
        }
    }
    let vocabulary = Vocabulary::build(
        counts.iter().map(|(t, &c)| (t.as_str(), c)),
        config.min_token_freq,
    );

    let mut sessions = Vec::with_capacity(records.len());
    for record in records {
        let post_tokens = tokenize(&record.post)
            .iter()
            .map(|t| vocabulary.index_of(t))
            .collect();
        let mut comments: Vec<Comment> = record
            .comments
            .into_iter()
            .map(|raw| {
                let mut tokens: Vec<usize> = tokenize(&raw.text)
                    .iter()
                    .map(|t| vocabulary.index_of(t))
                    .collect();
                tokens.truncate(config.max_words_per_comment);
                Comment {
                    comment_id: raw.id,
                    author_id: raw.user,
                    timestamp: raw.ts,
                    tokens,
                    raw_text: raw.text,
                }
            })
            .collect();
        // stable sort: timestamp ties keep file order
        comments.sort_by_key(|c| c.timestamp);
        comments.truncate(config.max_comments_per_session);
        let mut session = MediaSession {
            session_id: record.session_id,
            post_tokens,
            post_raw: record.post,
            comments,
            label: record.label,
            user_set: Default::default(),
        };
        session.recompute_user_set();
        sessions.push(session);
    }
    let user_index = SessionCorpus::build_user_index(&sessions);
    Ok(SessionCorpus {
        sessions,
        vocabulary,
        user_index,
        preprocess: config,
    })
}

/// Load ground-truth explainability ratings.
pub fn load_ratings(path: impl AsRef<Path>) -> Result<BTreeMap<String, BTreeMap<String, u8>>> {
    let text = std::fs::read_to_string(path)?;
    let ratings: BTreeMap<String, BTreeMap<String, u8>> =
        serde_json::from_str(&text).map_err(|e| HeninError::Parse {
            session_id: None,
            msg: e.to_string(),
        })?;
    for (session_id, per_comment) in &ratings {
        if let Some((comment_id, &r)) = per_comment.iter().find(|(_, &r)| r > 4) {
            return Err(HeninError::Parse {
                session_id: Some(session_id.clone()),
                msg: format!("rating {r} for comment '{comment_id}' outside 0..=4"),
            });
        }
    }
    Ok(ratings)
}
