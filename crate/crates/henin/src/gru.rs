//! Gated recurrent units: a bidirectional encoder for posted-text words
//! (used by the co-attention branch) and a unidirectional pass reused by
//! the GRU-with-attention reference baseline.

use rand_chacha::ChaCha8Rng;

use crate::tensor::{glorot_uniform, BoundParams, ModelParams, Tape, Var};
use crate::{HeninError, Result};

/// Tape handles for one GRU direction: update (z), reset (r), candidate (n).
#[derive(Debug, Clone, Copy)]
pub struct GruDirectionVars {
    pub w_z: Var,
    pub u_z: Var,
    pub b_z: Var,
    pub w_r: Var,
    pub u_r: Var,
    pub b_r: Var,
    pub w_n: Var,
    pub u_n: Var,
    pub b_n: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct BiGruVars {
    pub forward: GruDirectionVars,
    pub backward: GruDirectionVars,
}

fn init_direction(params: &mut ModelParams, prefix: &str, d: usize, h: usize, rng: &mut ChaCha8Rng) {
    for gate in ["z", "r", "n"] {
        params.insert(format!("{prefix}.w_{gate}"), glorot_uniform(rng, d, h));
        params.insert(format!("{prefix}.u_{gate}"), glorot_uniform(rng, h, h));
        params.insert(format!("{prefix}.b_{gate}"), ndarray::Array2::zeros((1, h)));
    }
}

pub fn init_bigru(params: &mut ModelParams, prefix: &str, d: usize, h: usize, rng: &mut ChaCha8Rng) {
    init_direction(params, &format!("{prefix}.fwd"), d, h, rng);
    init_direction(params, &format!("{prefix}.bwd"), d, h, rng);
}

pub fn init_gru(params: &mut ModelParams, prefix: &str, d: usize, h: usize, rng: &mut ChaCha8Rng) {
    init_direction(params, prefix, d, h, rng);
}

fn direction_vars(bound: &BoundParams, prefix: &str) -> Result<GruDirectionVars> {
    let load = |suffix: &str| bound.var(&format!("{prefix}.{suffix}"));
    Ok(GruDirectionVars {
        w_z: load("w_z")?,
        u_z: load("u_z")?,
        b_z: load("b_z")?,
        w_r: load("w_r")?,
        u_r: load("u_r")?,
        b_r: load("b_r")?,
        w_n: load("w_n")?,
        u_n: load("u_n")?,
        b_n: load("b_n")?,
    })
}

pub fn bigru_vars(bound: &BoundParams, prefix: &str) -> Result<BiGruVars> {
    Ok(BiGruVars {
        forward: direction_vars(bound, &format!("{prefix}.fwd"))?,
        backward: direction_vars(bound, &format!("{prefix}.bwd"))?,
    })
}

pub fn gru_vars(bound: &BoundParams, prefix: &str) -> Result<GruDirectionVars> {
    direction_vars(bound, prefix)
}

/// One GRU step: h' = (1 - z) * h + z * n with
/// z = sigmoid(x W_z + h U_z + b_z), r = sigmoid(x W_r + h U_r + b_r),
/// n = tanh(x W_n + (r * h) U_n + b_n).
fn gru_step(tape: &mut Tape, x: Var, h: Var, g: &GruDirectionVars) -> Var {
    let gate = |tape: &mut Tape, w, u, b, h_in| {
        let xw = tape.matmul(x, w);
        let hu = tape.matmul(h_in, u);
        let sum = tape.add(xw, hu);
        tape.add(sum, b)
    };
    let z_pre = gate(tape, g.w_z, g.u_z, g.b_z, h);
    let z = tape.sigmoid(z_pre);
    let r_pre = gate(tape, g.w_r, g.u_r, g.b_r, h);
    let r = tape.sigmoid(r_pre);
    let rh = tape.mul(r, h);
    let n_pre = gate(tape, g.w_n, g.u_n, g.b_n, rh);
    let n = tape.tanh(n_pre);
    let one_minus_z = tape.affine(z, -1.0, 1.0);
    let keep = tape.mul(one_minus_z, h);
    let write = tape.mul(z, n);
    tape.add(keep, write)
}

/// Run one direction over the rows of `inputs` (N x d), zero initial state.
/// Returns the N hidden states in input order.
pub fn gru_forward(tape: &mut Tape, inputs: Var, g: &GruDirectionVars, reverse: bool) -> Vec<Var> {
    let n = tape.value(inputs).nrows();
    let h_dim = tape.value(g.u_z).nrows();
    let mut h = tape.zeros(1, h_dim);
    let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
    let mut states = vec![h; n];
    for t in order {
        let x_t = tape.gather_rows(inputs, &[t]);
        h = gru_step(tape, x_t, h, g);
        states[t] = h;
    }
    states
}

/// Bidirectional encoding of posted-text word embeddings (N x d).
/// Output column t is the concatenation [forward h_t ; backward h_t],
/// shape 2h x N.
pub fn bigru_encode(tape: &mut Tape, embeddings: Var, vars: &BiGruVars) -> Result<Var> {
    let n = tape.value(embeddings).nrows();
    if n == 0 {
        return Err(HeninError::InvalidArgument(
            "bigru_encode over an empty post".into(),
        ));
    }
    let fwd = gru_forward(tape, embeddings, &vars.forward, false);
    let bwd = gru_forward(tape, embeddings, &vars.backward, true);
    let rows: Vec<Var> = (0..n)
        .map(|t| tape.concat_cols(&[fwd[t], bwd[t]]))
        .collect();
    let stacked = tape.concat_rows(&rows);
    Ok(tape.transpose(stacked))
}
