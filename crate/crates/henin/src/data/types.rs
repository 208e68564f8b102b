//! Core domain types: comments, media sessions, corpora, vocabulary.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;

use crate::{HeninError, Result};

/// Tokenization and truncation settings. Defaults follow the Instagram
/// configuration: at most 10 words per comment, 75 comments per session.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub max_words_per_comment: usize,
    pub max_comments_per_session: usize,
    pub min_token_freq: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            max_words_per_comment: 10,
            max_comments_per_session: 75,
            min_token_freq: 1,
        }
    }
}

/// Reserved index for padding; its embedding row is all zeros and it is
/// masked out of every attention softmax.
pub const PAD_INDEX: usize = 0;
/// Reserved index for out-of-vocabulary tokens.
pub const UNK_INDEX: usize = 1;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token <-> index bijection with reserved PAD and UNK entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_index: BTreeMap<String, usize>,
    index_to_token: Vec<String>,
}

impl Vocabulary {
    /// Build from (token, count) pairs, keeping tokens with count >= min_freq.
    pub fn build<'a>(counts: impl IntoIterator<Item = (&'a str, usize)>, min_freq: usize) -> Self {
        let mut index_to_token = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut kept: Vec<&str> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_freq)
            .map(|(t, _)| t)
            .collect();
        kept.sort_unstable();
        kept.dedup();
        index_to_token.extend(kept.iter().map(|t| t.to_string()));
        let token_to_index = index_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            token_to_index,
            index_to_token,
        }
    }

    pub fn len(&self) -> usize {
        self.index_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        // PAD and UNK are always present
        false
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.token_to_index.get(token).copied().unwrap_or(UNK_INDEX)
    }

    /// Exact lookup with no UNK fallback.
    pub fn get(&self, token: &str) -> Option<usize> {
        self.token_to_index.get(token).copied()
    }

    pub fn token_at(&self, index: usize) -> Option<&str> {
        self.index_to_token.get(index).map(String::as_str)
    }
}

/// Lowercase and split on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comment {
    pub comment_id: String,
    pub author_id: String,
    /// Seconds; monotone within a session after sorting.
    pub timestamp: i64,
    /// Vocabulary indices, truncated to the configured maximum.
    pub tokens: Vec<usize>,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediaSession {
    pub session_id: String,
    pub post_tokens: Vec<usize>,
    pub post_raw: String,
    /// Time-ordered, ties broken by original file order.
    pub comments: Vec<Comment>,
    pub label: u8,
    pub user_set: BTreeSet<String>,
}

impl MediaSession {
    pub fn num_comments(&self) -> usize {
        self.comments.len()
    }

    pub(crate) fn recompute_user_set(&mut self) {
        self.user_set = self
            .comments
            .iter()
            .map(|c| c.author_id.clone())
            .collect();
    }
}

/// All sessions plus the shared vocabulary and user index.
#[derive(Debug, Clone)]
pub struct SessionCorpus {
    pub sessions: Vec<MediaSession>,
    pub vocabulary: Vocabulary,
    /// author_id -> column in the participation matrix.
    pub user_index: BTreeMap<String, usize>,
    pub preprocess: PreprocessConfig,
}

impl SessionCorpus {
    pub fn num_sessions(&self) -> usize {
        self.sessions.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_index.len()
    }

    pub fn session_by_id(&self, id: &str) -> Result<&MediaSession> {
        self.sessions
            .iter()
            .find(|s| s.session_id == id)
            .ok_or_else(|| HeninError::UnknownSession(id.to_string()))
    }

    pub fn session_position(&self, id: &str) -> Result<usize> {
        self.sessions
            .iter()
            .position(|s| s.session_id == id)
            .ok_or_else(|| HeninError::UnknownSession(id.to_string()))
    }

    pub(crate) fn build_user_index(sessions: &[MediaSession]) -> BTreeMap<String, usize> {
        let users: BTreeSet<&str> = sessions
            .iter()
            .flat_map(|s| s.user_set.iter().map(String::as_str))
            .collect();
        users
            .into_iter()
            .enumerate()
            .map(|(i, u)| (u.to_string(), i))
            .collect()
    }

    /// Rebuild the vocabulary from the given sessions only (the training
    /// split) and re-map every token in the corpus; unseen tokens become UNK.
    pub fn rebuild_vocabulary(&mut self, train_positions: &[usize], min_freq: usize) {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for &pos in train_positions {
            let session = &self.sessions[pos];
            for tok in tokenize(&session.post_raw) {
                *counts.entry(tok).or_default() += 1;
            }
            for comment in &session.comments {
                for tok in tokenize(&comment.raw_text) {
                    *counts.entry(tok).or_default() += 1;
                }
            }
        }
        let vocab = Vocabulary::build(counts.iter().map(|(t, &c)| (t.as_str(), c)), min_freq);
        let max_words = self.preprocess.max_words_per_comment;
        for session in &mut self.sessions {
            session.post_tokens = tokenize(&session.post_raw)
                .iter()
                .map(|t| vocab.index_of(t))
                .collect();
            for comment in &mut session.comments {
                let mut tokens: Vec<usize> = tokenize(&comment.raw_text)
                    .iter()
                    .map(|t| vocab.index_of(t))
                    .collect();
                tokens.truncate(max_words);
                comment.tokens = tokens;
            }
        }
        self.vocabulary = vocab;
    }
}

/// Multi-hot participation matrix: entry (i, u) is 1 iff user u commented in
/// session i.
pub fn session_user_features(corpus: &SessionCorpus) -> Array2<f64> {
    let m = corpus.num_sessions();
    let p = corpus.num_users();
    let mut x = Array2::zeros((m, p));
    for (i, session) in corpus.sessions.iter().enumerate() {
        for user in &session.user_set {
            if let Some(&col) = corpus.user_index.get(user) {
                x[(i, col)] = 1.0;
            }
        }
    }
    x
}

/// Keep the earliest ceil(fraction * T) comments; user_set is recomputed.
pub fn truncate_by_fraction(session: &MediaSession, fraction: f64) -> Result<MediaSession> {
    if fraction <= 0.0 || fraction > 1.0 {
        return Err(HeninError::InvalidArgument(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    let keep = (fraction * session.comments.len() as f64).ceil() as usize;
    let mut truncated = session.clone();
    truncated.comments.truncate(keep);
    truncated.recompute_user_set();
    Ok(truncated)
}
