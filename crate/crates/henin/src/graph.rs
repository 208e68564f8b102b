//! Session-session and post-post interaction graphs: pairwise similarity
//! under three measures, symmetric adjacency normalization, and K-layer
//! graph convolutions.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{session_user_features, SessionCorpus};
use crate::tensor::{glorot_uniform, BoundParams, ModelParams, Tape, Var};
use crate::{HeninError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMeasure {
    Cosine,
    Jaccard,
    Euclidean,
}

impl SimilarityMeasure {
    pub const ALL: [SimilarityMeasure; 3] = [
        SimilarityMeasure::Cosine,
        SimilarityMeasure::Jaccard,
        SimilarityMeasure::Euclidean,
    ];
}

impl std::fmt::Display for SimilarityMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SimilarityMeasure::Cosine => "cosine",
            SimilarityMeasure::Jaccard => "jaccard",
            SimilarityMeasure::Euclidean => "euclidean",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for SimilarityMeasure {
    type Err = HeninError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(SimilarityMeasure::Cosine),
            "jaccard" => Ok(SimilarityMeasure::Jaccard),
            "euclidean" => Ok(SimilarityMeasure::Euclidean),
            other => Err(HeninError::InvalidArgument(format!(
                "unknown similarity measure '{other}'"
            ))),
        }
    }
}

/// Pairwise similarity matrix over the rows of `x`.
///
/// cosine: dot / (|x_i| |x_j|), 0 when either row is zero.
/// jaccard: sum(x_i * x_j) / (sum x_i + sum x_j - sum(x_i * x_j));
/// requires nonnegative features.
/// euclidean: 1 - dist / max_dist, with the corpus max pairwise distance
/// mapped to 1 (all-equal rows give similarity 1 everywhere).
pub fn pairwise_similarity(x: &Array2<f64>, measure: SimilarityMeasure) -> Result<Array2<f64>> {
    let n = x.nrows();
    if n == 0 {
        return Err(HeninError::InvalidArgument("similarity over 0 rows".into()));
    }
    if measure == SimilarityMeasure::Jaccard && x.iter().any(|&v| v < 0.0) {
        return Err(HeninError::InvalidArgument(
            "jaccard similarity requires nonnegative features".into(),
        ));
    }
    let mut a = Array2::zeros((n, n));
    match measure {
        SimilarityMeasure::Cosine => {
            let norms: Vec<f64> = (0..n).map(|i| x.row(i).dot(&x.row(i)).sqrt()).collect();
            for i in 0..n {
                for j in i..n {
                    let v = if norms[i] == 0.0 || norms[j] == 0.0 {
                        0.0
                    } else {
                        x.row(i).dot(&x.row(j)) / (norms[i] * norms[j])
                    };
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
        }
        SimilarityMeasure::Jaccard => {
            let sums: Vec<f64> = (0..n).map(|i| x.row(i).sum()).collect();
            for i in 0..n {
                for j in i..n {
                    let inter = x.row(i).dot(&x.row(j));
                    let denom = sums[i] + sums[j] - inter;
                    let v = if denom == 0.0 { 0.0 } else { inter / denom };
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
        }
        SimilarityMeasure::Euclidean => {
            let mut dist = Array2::zeros((n, n));
            let mut max_dist = 0.0f64;
            for i in 0..n {
                for j in i + 1..n {
                    let d = (&x.row(i) - &x.row(j)).mapv(|v| v * v).sum().sqrt();
                    dist[(i, j)] = d;
                    dist[(j, i)] = d;
                    max_dist = max_dist.max(d);
                }
            }
            a = if max_dist == 0.0 {
                Array2::ones((n, n))
            } else {
                dist.mapv(|d| 1.0 - d / max_dist)
            };
        }
    }
    Ok(a)
}

/// Symmetric normalization A_hat = D^{-1/2} A D^{-1/2} with
/// d_i = sum_j A_ij. Nodes with nonpositive degree are isolated (their
/// row and column become zero).
pub fn normalize_adjacency(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "adjacency must be square");
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.row(i).sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Array2::from_shape_fn((n, n), |(i, j)| a[(i, j)] * inv_sqrt[i] * inv_sqrt[j])
}

/// GCN layer weights on the tape.
pub struct GcnVars {
    pub layers: Vec<Var>,
}

/// Register K layer weights named `prefix.w0 .. w{K-1}` chaining `dims`
/// (length K+1: input, hidden..., output).
pub fn init_gcn(params: &mut ModelParams, prefix: &str, dims: &[usize], rng: &mut ChaCha8Rng) {
    assert!(dims.len() >= 2, "gcn needs at least one layer");
    for (k, pair) in dims.windows(2).enumerate() {
        params.insert(format!("{prefix}.w{k}"), glorot_uniform(rng, pair[0], pair[1]));
    }
}

pub fn gcn_vars(bound: &BoundParams, prefix: &str, num_layers: usize) -> Result<GcnVars> {
    let layers = (0..num_layers)
        .map(|k| bound.var(&format!("{prefix}.w{k}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(GcnVars { layers })
}

/// K-layer propagation X^{(k+1)} = rho(A_hat X^{(k)} W^{(k)}), ReLU in the
/// hidden layers. The output layer uses a row-wise softmax by default
/// (`softmax_output = true`), or ReLU when toggled off.
pub fn gcn_forward(
    tape: &mut Tape,
    x: Var,
    a_hat: Var,
    vars: &GcnVars,
    softmax_output: bool,
) -> Var {
    let num_layers = vars.layers.len();
    let mut h = x;
    for (k, &w) in vars.layers.iter().enumerate() {
        let mixed = tape.matmul(a_hat, h);
        let projected = tape.matmul(mixed, w);
        h = if k + 1 < num_layers {
            tape.relu(projected)
        } else if softmax_output {
            let cols = tape.value(projected).ncols();
            tape.softmax_rows_masked(projected, &vec![true; cols])
        } else {
            tape.relu(projected)
        };
    }
    h
}

/// A similarity graph over corpus nodes, with the frozen normalized
/// adjacency used by the GCN.
#[derive(Debug, Clone)]
pub struct GraphSpec {
    pub features: Array2<f64>,
    pub adjacency: Array2<f64>,
    pub normalized: Array2<f64>,
    pub measure: SimilarityMeasure,
}

impl GraphSpec {
    pub fn from_features(features: Array2<f64>, measure: SimilarityMeasure) -> Result<Self> {
        let adjacency = pairwise_similarity(&features, measure)?;
        let normalized = normalize_adjacency(&adjacency);
        Ok(Self {
            features,
            adjacency,
            normalized,
            measure,
        })
    }

    /// Edge list (i, j, weight) of the upper triangle, for inspection dumps.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.adjacency.nrows();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.adjacency[(i, j)] != 0.0 {
                    edges.push((i, j, self.adjacency[(i, j)]));
                }
            }
        }
        edges
    }
}

/// Session-session graph: nodes are sessions, features the multi-hot user
/// participation rows.
pub fn build_session_graph(corpus: &SessionCorpus, measure: SimilarityMeasure) -> Result<GraphSpec> {
    GraphSpec::from_features(session_user_features(corpus), measure)
}

/// Post-post graph: nodes are posts, features the mean word embedding of
/// each post's tokens (zero for empty posts). Jaccard needs nonnegative
/// vectors, so under that measure the edge weights come from the posts'
/// multi-hot token-presence vectors instead; the GCN features are the
/// embedding means either way.
pub fn build_post_graph(
    corpus: &SessionCorpus,
    embeddings: &Array2<f64>,
    measure: SimilarityMeasure,
) -> Result<GraphSpec> {
    let d = embeddings.ncols();
    let m = corpus.num_sessions();
    let mut features = Array2::zeros((m, d));
    for (i, session) in corpus.sessions.iter().enumerate() {
        if session.post_tokens.is_empty() {
            continue;
        }
        let mut row = features.row_mut(i);
        for &tok in &session.post_tokens {
            row += &embeddings.row(tok);
        }
        row /= session.post_tokens.len() as f64;
    }
    let adjacency = if measure == SimilarityMeasure::Jaccard {
        let vocab = embeddings.nrows();
        let mut multi_hot = Array2::zeros((m, vocab));
        for (i, session) in corpus.sessions.iter().enumerate() {
            for &tok in &session.post_tokens {
                multi_hot[(i, tok)] = 1.0;
            }
        }
        pairwise_similarity(&multi_hot, measure)?
    } else {
        pairwise_similarity(&features, measure)?
    };
    let normalized = normalize_adjacency(&adjacency);
    Ok(GraphSpec {
        features,
        adjacency,
        normalized,
        measure,
    })
}
