//! Hierarchical comment encoding: word-level self-attention producing one
//! vector per comment, then sentence-level self-attention over the comment
//! vectors producing the session vector `s` and the per-comment weights
//! that drive explanation ranking.

use rand_chacha::ChaCha8Rng;

use crate::tensor::{glorot_uniform, BoundParams, ModelParams, Tape, Var};
use crate::{HeninError, Result};

/// Tape handles for one self-attention encoder (w_q, w_k, w_v).
#[derive(Debug, Clone, Copy)]
pub struct SelfAttentionVars {
    pub w_q: Var,
    pub w_k: Var,
    pub w_v: Var,
}

/// Register `prefix.w_q/w_k/w_v` projections mapping dim `d_in` to `d_k`.
pub fn init_self_attention(
    params: &mut ModelParams,
    prefix: &str,
    d_in: usize,
    d_k: usize,
    rng: &mut ChaCha8Rng,
) {
    params.insert(format!("{prefix}.w_q"), glorot_uniform(rng, d_in, d_k));
    params.insert(format!("{prefix}.w_k"), glorot_uniform(rng, d_in, d_k));
    params.insert(format!("{prefix}.w_v"), glorot_uniform(rng, d_in, d_k));
}

pub fn self_attention_vars(bound: &BoundParams, prefix: &str) -> Result<SelfAttentionVars> {
    Ok(SelfAttentionVars {
        w_q: bound.var(&format!("{prefix}.w_q"))?,
        w_k: bound.var(&format!("{prefix}.w_k"))?,
        w_v: bound.var(&format!("{prefix}.w_v"))?,
    })
}

/// Single-head scaled dot-product self-attention.
///
/// Returns the row-stochastic weight matrix (m x m, masked columns zero)
/// and the attended outputs (m x d_k). Masked positions still appear as
/// query rows; callers ignore them.
pub fn scaled_dot_attention(
    tape: &mut Tape,
    x: Var,
    attn: &SelfAttentionVars,
    mask: &[bool],
) -> Result<(Var, Var)> {
    let m = tape.value(x).nrows();
    if m == 0 {
        return Err(HeninError::InvalidArgument("attention over 0 rows".into()));
    }
    if mask.len() != m {
        return Err(HeninError::InvalidArgument(format!(
            "mask length {} != rows {m}",
            mask.len()
        )));
    }
    if !mask.iter().any(|&b| b) {
        return Err(HeninError::InvalidArgument(
            "attention with every position masked".into(),
        ));
    }
    let d_k = tape.value(attn.w_q).ncols();
    let q = tape.matmul(x, attn.w_q);
    let k = tape.matmul(x, attn.w_k);
    let v = tape.matmul(x, attn.w_v);
    let k_t = tape.transpose(k);
    let scores = tape.matmul(q, k_t);
    let scaled = tape.scale(scores, 1.0 / (d_k as f64).sqrt());
    let weights = tape.softmax_rows_masked(scaled, mask);
    let attended = tape.matmul(weights, v);
    Ok((weights, attended))
}

/// Word encoder output for one comment.
pub struct CommentEncoding {
    /// 1 x d_k comment vector: the mean over unmasked positions of the
    /// attention-weighted value rows.
    pub vector: Var,
    /// m x m word attention weights (rows sum to 1 over unmasked columns).
    pub word_weights: Var,
}

pub fn encode_comment(
    tape: &mut Tape,
    embeddings: Var,
    attn: &SelfAttentionVars,
    mask: &[bool],
) -> Result<CommentEncoding> {
    let (word_weights, attended) = scaled_dot_attention(tape, embeddings, attn, mask)?;
    let vector = tape.mean_rows_masked(attended, mask);
    Ok(CommentEncoding {
        vector,
        word_weights,
    })
}

/// Sentence encoder output for one session.
pub struct SessionEncoding {
    /// 1 x d_k session vector s.
    pub vector: Var,
    /// 1 x T per-comment attention weights; `None` when T = 0.
    pub comment_attention: Option<Var>,
}

/// Sentence-level self-attention over stacked comment vectors (T x d_c).
///
/// The per-comment weight a_sent is the received attention: the column mean
/// of the T x T weight matrix over unmasked rows, renormalized to sum 1.
/// s is the a_sent-weighted sum of the value rows.
pub fn encode_session(
    tape: &mut Tape,
    comment_vectors: Option<Var>,
    attn: &SelfAttentionVars,
    mask: &[bool],
) -> Result<SessionEncoding> {
    let d_k = tape.value(attn.w_v).ncols();
    let Some(comment_vectors) = comment_vectors else {
        return Ok(SessionEncoding {
            vector: tape.zeros(1, d_k),
            comment_attention: None,
        });
    };
    if !mask.iter().any(|&b| b) {
        // every comment empty: same degenerate case as T = 0
        return Ok(SessionEncoding {
            vector: tape.zeros(1, d_k),
            comment_attention: None,
        });
    }
    let (weights, _) = scaled_dot_attention(tape, comment_vectors, attn, mask)?;
    let col_mean = tape.mean_rows_masked(weights, mask);
    let a_sent = tape.normalize_sum(col_mean);
    let values = tape.matmul(comment_vectors, attn.w_v);
    let vector = tape.matmul(a_sent, values);
    Ok(SessionEncoding {
        vector,
        comment_attention: Some(a_sent),
    })
}
