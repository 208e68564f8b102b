//! Post-comment co-attention: affinity matrix between comment features and
//! BiGRU-encoded post words, dual attention maps, and the attended feature
//! vectors p-hat and c-hat.

use rand_chacha::ChaCha8Rng;

use crate::tensor::{glorot_uniform, BoundParams, ModelParams, Tape, Var};
use crate::{HeninError, Result};

/// Tape handles for the co-attention parameters.
#[derive(Debug, Clone, Copy)]
pub struct CoattentionVars {
    /// d_c x d_p
    pub w_l: Var,
    /// k x d_p
    pub w_p: Var,
    /// k x d_c
    pub w_c: Var,
    /// k x 1
    pub w_hp: Var,
    /// k x 1
    pub w_hc: Var,
}

pub fn init_coattention(
    params: &mut ModelParams,
    prefix: &str,
    d_p: usize,
    d_c: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) {
    params.insert(format!("{prefix}.w_l"), glorot_uniform(rng, d_c, d_p));
    params.insert(format!("{prefix}.w_p"), glorot_uniform(rng, k, d_p));
    params.insert(format!("{prefix}.w_c"), glorot_uniform(rng, k, d_c));
    params.insert(format!("{prefix}.w_hp"), glorot_uniform(rng, k, 1));
    params.insert(format!("{prefix}.w_hc"), glorot_uniform(rng, k, 1));
}

pub fn coattention_vars(bound: &BoundParams, prefix: &str) -> Result<CoattentionVars> {
    Ok(CoattentionVars {
        w_l: bound.var(&format!("{prefix}.w_l"))?,
        w_p: bound.var(&format!("{prefix}.w_p"))?,
        w_c: bound.var(&format!("{prefix}.w_c"))?,
        w_hp: bound.var(&format!("{prefix}.w_hp"))?,
        w_hc: bound.var(&format!("{prefix}.w_hc"))?,
    })
}

pub struct CoattentionOutput {
    /// 1 x d_p attended post feature vector.
    pub p_hat: Var,
    /// 1 x d_c attended comment feature vector.
    pub c_hat: Var,
    /// 1 x N post-word attention.
    pub a_p: Var,
    /// 1 x T comment attention; `None` when the session has no comments.
    pub a_c: Option<Var>,
    /// T x N affinity matrix; `None` when the session has no comments.
    pub affinity: Option<Var>,
    /// k x N post attention map.
    pub h_p: Var,
    /// k x T comment attention map; `None` when the session has no comments.
    pub h_c: Option<Var>,
}

/// Evaluate the co-attention equations:
/// L = tanh(C' W_l P), H_p = tanh(W_p P + (W_c C) L),
/// H_c = tanh(W_c C + (W_p P) L'), a_p = softmax(w_hp' H_p),
/// a_c = softmax(w_hc' H_c), p_hat = sum a_p_i p_i, c_hat = sum a_c_i c_i.
///
/// `p_mat` is d_p x N (post features as columns); `c_mat` is d_c x T, or
/// `None` for a comment-less session, in which case c_hat is zero and the
/// comment-side outputs are skipped.
pub fn coattend(
    tape: &mut Tape,
    p_mat: Var,
    c_mat: Option<Var>,
    vars: &CoattentionVars,
    post_mask: &[bool],
    comment_mask: &[bool],
) -> Result<CoattentionOutput> {
    let n = tape.value(p_mat).ncols();
    if n == 0 {
        return Err(HeninError::InvalidArgument("coattend over empty post".into()));
    }
    if post_mask.len() != n {
        return Err(HeninError::InvalidArgument("post mask length mismatch".into()));
    }
    let d_c = tape.value(vars.w_c).ncols();

    let c_mat = match c_mat {
        Some(c) if comment_mask.iter().any(|&m| m) => Some(c),
        _ => None,
    };

    let w_p_p = tape.matmul(vars.w_p, p_mat); // k x N
    let (h_p, affinity, c_side) = match c_mat {
        Some(c_mat) => {
            let t_len = tape.value(c_mat).ncols();
            if comment_mask.len() != t_len {
                return Err(HeninError::InvalidArgument(
                    "comment mask length mismatch".into(),
                ));
            }
            let c_t = tape.transpose(c_mat); // T x d_c
            let c_t_wl = tape.matmul(c_t, vars.w_l); // T x d_p
            let l_pre = tape.matmul(c_t_wl, p_mat); // T x N
            let affinity = tape.tanh(l_pre);

            let w_c_c = tape.matmul(vars.w_c, c_mat); // k x T
            let cc_l = tape.matmul(w_c_c, affinity); // k x N
            let h_p_pre = tape.add(w_p_p, cc_l);
            let h_p = tape.tanh(h_p_pre);

            let l_t = tape.transpose(affinity); // N x T
            let pp_lt = tape.matmul(w_p_p, l_t); // k x T
            let h_c_pre = tape.add(w_c_c, pp_lt);
            let h_c = tape.tanh(h_c_pre);
            (h_p, Some(affinity), Some((c_mat, h_c)))
        }
        None => {
            let h_p = tape.tanh(w_p_p);
            (h_p, None, None)
        }
    };

    let w_hp_t = tape.transpose(vars.w_hp); // 1 x k
    let a_p_pre = tape.matmul(w_hp_t, h_p); // 1 x N
    let a_p = tape.softmax_rows_masked(a_p_pre, post_mask);
    let p_t = tape.transpose(p_mat); // N x d_p
    let p_hat = tape.matmul(a_p, p_t); // 1 x d_p

    let (c_hat, a_c, h_c) = match c_side {
        Some((c_mat, h_c)) => {
            let w_hc_t = tape.transpose(vars.w_hc);
            let a_c_pre = tape.matmul(w_hc_t, h_c); // 1 x T
            let a_c = tape.softmax_rows_masked(a_c_pre, comment_mask);
            let c_t = tape.transpose(c_mat); // T x d_c
            let c_hat = tape.matmul(a_c, c_t); // 1 x d_c
            (c_hat, Some(a_c), Some(h_c))
        }
        None => (tape.zeros(1, d_c), None, None),
    };

    Ok(CoattentionOutput {
        p_hat,
        c_hat,
        a_p,
        a_c,
        affinity,
        h_p,
        h_c,
    })
}
