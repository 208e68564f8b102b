//! Domain types, corpus ingestion, tokenization, and a synthetic corpus
//! generator that plants ground-truth evidential comments.

mod corpus;
mod embeddings;
mod synthetic;
mod types;

pub use corpus::{corpus_from_records, load_corpus, load_ratings, RawComment, RawSession};
pub use embeddings::{apply_pretrained, load_pretrained_embeddings};
pub use synthetic::{generate_synthetic, generate_synthetic_records, EvidenceGroundTruth, SyntheticSpec};
pub use types::{
    session_user_features, tokenize, truncate_by_fraction, Comment, MediaSession,
    PreprocessConfig, SessionCorpus, Vocabulary, PAD_INDEX, UNK_INDEX,
};
