//! The full session classifier: hierarchical comment encoding, post-comment
//! co-attention, and the two GCN branches fused through a sigmoid head,
//! trained with mini-batch Adam. Also hosts the GRU-with-attention
//! reference baseline, which shares the word encoder and training loop.

use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{
    encode_comment, encode_session, init_self_attention, self_attention_vars, SelfAttentionVars,
};
use crate::coattention::{coattend, coattention_vars, init_coattention};
use crate::data::{MediaSession, SessionCorpus, PAD_INDEX};
use crate::explain::RankingSource;
use crate::graph::{
    build_post_graph, build_session_graph, gcn_forward, gcn_vars, init_gcn, GraphSpec,
    SimilarityMeasure,
};
use crate::gru::{bigru_encode, bigru_vars, gru_forward, gru_vars, init_bigru, init_gru};
use crate::tensor::{
    adam_step, glorot_uniform, AdamConfig, AdamState, BoundParams, GradMap, ModelParams, Tape, Var,
};
use crate::{HeninError, Result};

const LOSS_EPS: f64 = 1e-7;
/// Parameter magnitudes beyond this are treated as divergence.
const PARAM_BLOWUP: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Henin,
    GruAttention,
}

/// Model dimensions, ablation switches, and training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HeninConfig {
    pub architecture: Architecture,
    /// Word embedding dim d.
    pub embed_dim: usize,
    /// Key/value dim of both self-attention encoders (d_k = d_v).
    pub attention_dim: usize,
    /// GRU hidden size h; post features have dim 2h.
    pub gru_hidden: usize,
    /// Co-attention map dim k.
    pub coattention_dim: usize,
    pub gcn_hidden: usize,
    pub gcn_output: usize,
    /// Number of GCN layers K.
    pub gcn_layers: usize,
    pub use_coattention: bool,
    pub use_gcn: bool,
    pub use_comment_encoder: bool,
    pub similarity: SimilarityMeasure,
    /// Row-softmax on the final GCN layer (ReLU when false).
    pub gcn_softmax_output: bool,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Optional pretrained word-embedding file (token followed by its
    /// vector components, one per line); matching rows replace the random
    /// initialization and keep training end to end.
    pub embeddings_path: Option<String>,
}

impl Default for HeninConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Henin,
            embed_dim: 300,
            attention_dim: 64,
            gru_hidden: 32,
            coattention_dim: 64,
            gcn_hidden: 64,
            gcn_output: 32,
            gcn_layers: 3,
            use_coattention: true,
            use_gcn: true,
            use_comment_encoder: true,
            similarity: SimilarityMeasure::Cosine,
            gcn_softmax_output: true,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 30,
            seed: 0,
            embeddings_path: None,
        }
    }
}

impl HeninConfig {
    /// A small configuration sized for fast experiments and tests.
    pub fn desk() -> Self {
        Self {
            embed_dim: 24,
            attention_dim: 16,
            gru_hidden: 8,
            coattention_dim: 16,
            gcn_hidden: 16,
            gcn_output: 8,
            gcn_layers: 2,
            learning_rate: 5e-3,
            epochs: 15,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.embed_dim,
            self.attention_dim,
            self.gru_hidden,
            self.coattention_dim,
            self.gcn_hidden,
            self.gcn_output,
            self.gcn_layers,
            self.batch_size,
        ];
        if dims.contains(&0) {
            return Err(HeninError::Config("all dimensions must be positive".into()));
        }
        if self.architecture == Architecture::Henin
            && !(self.use_coattention || self.use_gcn || self.use_comment_encoder)
        {
            return Err(HeninError::Config(
                "at least one model branch must be enabled".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(HeninError::Config("learning rate must be >= 0".into()));
        }
        Ok(())
    }

    /// Named ablation variant: "full", "-A" (no co-attention), "-G" (no
    /// graphs), "-C" (no comment encoder), "-AG", "-CG".
    pub fn ablation(&self, variant: &str) -> Result<HeninConfig> {
        let (coatt, gcn, comment) = match variant {
            "full" => (true, true, true),
            "-A" => (false, true, true),
            "-G" => (true, false, true),
            "-C" => (true, true, false),
            "-AG" => (false, false, true),
            "-CG" => (true, false, false),
            other => {
                return Err(HeninError::InvalidArgument(format!(
                    "unknown ablation variant '{other}'"
                )))
            }
        };
        Ok(HeninConfig {
            architecture: Architecture::Henin,
            use_coattention: coatt,
            use_gcn: gcn,
            use_comment_encoder: comment,
            ..self.clone()
        })
    }

    /// Dimension of the fused feature vector feeding the sigmoid head.
    pub fn fused_dim(&self) -> usize {
        match self.architecture {
            Architecture::GruAttention => self.gru_hidden,
            Architecture::Henin => {
                let mut dim = 0;
                if self.use_coattention {
                    dim += 2 * self.gru_hidden + self.attention_dim;
                }
                if self.use_comment_encoder {
                    dim += self.attention_dim;
                }
                if self.use_gcn {
                    dim += 2 * self.gcn_output;
                }
                dim
            }
        }
    }

    fn needs_word_encoder(&self) -> bool {
        self.architecture == Architecture::GruAttention
            || self.use_comment_encoder
            || self.use_coattention
    }
}

pub const ABLATION_VARIANTS: [&str; 6] = ["full", "-A", "-G", "-C", "-AG", "-CG"];

/// The five fused feature vectors of one prediction; disabled branches
/// leave their slot empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureBreakdown {
    pub p_hat: Vec<f64>,
    pub c_hat: Vec<f64>,
    pub s: Vec<f64>,
    pub r_ss: Vec<f64>,
    pub r_pp: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub session_id: String,
    /// sigma of the fused layer, in [0, 1].
    pub probability: f64,
    /// 0/1 decision at threshold 0.5.
    pub label_hat: u8,
    pub features: FeatureBreakdown,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Accuracy over the epoch's mini-batch predictions.
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

/// Binary cross-entropy at a clamped probability.
pub fn cross_entropy(y_hat: f64, label: u8) -> f64 {
    let p = y_hat.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// A parameterized model bound to the corpus whose graphs it was built on.
pub struct HeninModel {
    pub config: HeninConfig,
    pub params: ModelParams,
    session_graph: Option<GraphSpec>,
    post_graph: Option<GraphSpec>,
}

struct SessionForward {
    y_hat: Var,
    p_hat: Option<Var>,
    c_hat: Option<Var>,
    s: Option<Var>,
    r_ss: Option<Var>,
    r_pp: Option<Var>,
    /// Sentence-encoder comment weights (1 x T), zero at empty comments.
    a_sent: Option<Var>,
    /// Co-attention comment weights (1 x T).
    a_c: Option<Var>,
    /// Baseline additive-attention comment weights (1 x T).
    baseline_attention: Option<Var>,
}

impl HeninModel {
    /// Initialize parameters and build the transductive graphs. The post
    /// graph's node features come from the initial embedding table and
    /// stay frozen through training.
    pub fn init(corpus: &SessionCorpus, config: &HeninConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ModelParams::new();

        let vocab = corpus.vocabulary.len();
        let mut embed = glorot_uniform(&mut rng, vocab, config.embed_dim);
        embed.row_mut(PAD_INDEX).fill(0.0);
        if let Some(path) = &config.embeddings_path {
            let table = crate::data::load_pretrained_embeddings(path)?;
            crate::data::apply_pretrained(&mut embed, &corpus.vocabulary, &table)?;
        }
        params.insert("embed", embed);

        if config.needs_word_encoder() {
            init_self_attention(
                &mut params,
                "word_enc",
                config.embed_dim,
                config.attention_dim,
                &mut rng,
            );
        }
        match config.architecture {
            Architecture::Henin => {
                if config.use_comment_encoder {
                    init_self_attention(
                        &mut params,
                        "sent_enc",
                        config.attention_dim,
                        config.attention_dim,
                        &mut rng,
                    );
                }
                if config.use_coattention {
                    init_bigru(
                        &mut params,
                        "gru",
                        config.embed_dim,
                        config.gru_hidden,
                        &mut rng,
                    );
                    init_coattention(
                        &mut params,
                        "coatt",
                        2 * config.gru_hidden,
                        config.attention_dim,
                        config.coattention_dim,
                        &mut rng,
                    );
                }
                if config.use_gcn {
                    let p = corpus.num_users().max(1);
                    init_gcn(&mut params, "gcn_ss", &gcn_dims(p, config), &mut rng);
                    init_gcn(
                        &mut params,
                        "gcn_pp",
                        &gcn_dims(config.embed_dim, config),
                        &mut rng,
                    );
                }
            }
            Architecture::GruAttention => {
                init_gru(
                    &mut params,
                    "base_gru",
                    config.attention_dim,
                    config.gru_hidden,
                    &mut rng,
                );
                let h = config.gru_hidden;
                params.insert("base_attn.w_a", glorot_uniform(&mut rng, h, h));
                params.insert("base_attn.b_a", Array2::zeros((1, h)));
                params.insert("base_attn.v_a", glorot_uniform(&mut rng, h, 1));
            }
        }
        params.insert(
            "head.w_f",
            glorot_uniform(&mut rng, config.fused_dim(), 1),
        );
        params.insert("head.b_f", Array2::zeros((1, 1)));

        let (session_graph, post_graph) = if config.architecture == Architecture::Henin
            && config.use_gcn
        {
            let embed = params.get("embed")?;
            (
                Some(build_session_graph(corpus, config.similarity)?),
                Some(build_post_graph(corpus, embed, config.similarity)?),
            )
        } else {
            (None, None)
        };

        Ok(Self {
            config: config.clone(),
            params,
            session_graph,
            post_graph,
        })
    }

    /// Mini-batch Adam training over `train_positions`. Deterministic for
    /// a fixed (corpus, config) pair.
    pub fn train(
        corpus: &SessionCorpus,
        config: &HeninConfig,
        train_positions: &[usize],
    ) -> Result<(Self, TrainingLog)> {
        if train_positions.is_empty() {
            return Err(HeninError::InvalidArgument("empty training split".into()));
        }
        let mut model = Self::init(corpus, config)?;
        let mut adam = AdamState::new(AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        });
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
        let mut log = TrainingLog::default();

        for epoch in 0..config.epochs {
            let mut order = train_positions.to_vec();
            order.shuffle(&mut shuffle_rng);
            let mut loss_sum = 0.0;
            let mut correct = 0usize;
            let mut seen = 0usize;
            for (step, batch) in order.chunks(config.batch_size).enumerate() {
                let (loss, grads, batch_probs) = model.batch_loss(corpus, batch)?;
                if !loss.is_finite() {
                    return Err(HeninError::Diverged { epoch, step });
                }
                loss_sum += loss * batch.len() as f64;
                for (&pos, prob) in batch.iter().zip(&batch_probs) {
                    let label_hat = u8::from(*prob >= 0.5);
                    correct += usize::from(label_hat == corpus.sessions[pos].label);
                    seen += 1;
                }
                adam_step(&mut model.params, &grads, &mut adam)?;
                if model
                    .params
                    .iter()
                    .any(|(_, v)| v.iter().any(|x| !x.is_finite() || x.abs() > PARAM_BLOWUP))
                {
                    return Err(HeninError::Diverged { epoch, step });
                }
            }
            log.epochs.push(EpochLog {
                epoch,
                mean_loss: loss_sum / order.len() as f64,
                train_accuracy: correct as f64 / seen as f64,
            });
        }
        Ok((model, log))
    }

    /// Mean batch loss, its gradients, and the per-session probabilities.
    fn batch_loss(
        &self,
        corpus: &SessionCorpus,
        positions: &[usize],
    ) -> Result<(f64, GradMap, Vec<f64>)> {
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, &self.params);
        let gcn = self.run_gcns(&mut tape, &bound)?;
        let mut total: Option<Var> = None;
        let mut probs = Vec::with_capacity(positions.len());
        for &pos in positions {
            let fwd = self.forward_session(&mut tape, &bound, corpus, pos, gcn)?;
            probs.push(tape.scalar(fwd.y_hat));
            let loss = bce_loss(&mut tape, fwd.y_hat, corpus.sessions[pos].label);
            total = Some(match total {
                Some(acc) => tape.add(acc, loss),
                None => loss,
            });
        }
        let sum = total.expect("nonempty batch");
        let mean = tape.scale(sum, 1.0 / positions.len() as f64);
        let grads = bound.gradients(&tape, mean);
        Ok((tape.scalar(mean), grads, probs))
    }

    /// Loss closure used by the gradient checker.
    pub fn loss_and_gradients(
        &self,
        corpus: &SessionCorpus,
        positions: &[usize],
        params: &ModelParams,
    ) -> Result<(f64, GradMap)> {
        let probe = HeninModel {
            config: self.config.clone(),
            params: params.clone(),
            session_graph: self.session_graph.clone(),
            post_graph: self.post_graph.clone(),
        };
        let (loss, grads, _) = probe.batch_loss(corpus, positions)?;
        Ok((loss, grads))
    }

    pub fn predict(&self, corpus: &SessionCorpus, session_id: &str) -> Result<Prediction> {
        let pos = corpus.session_position(session_id)?;
        Ok(self.predict_positions(corpus, &[pos])?.remove(0))
    }

    pub fn predict_positions(
        &self,
        corpus: &SessionCorpus,
        positions: &[usize],
    ) -> Result<Vec<Prediction>> {
        let mut out = Vec::with_capacity(positions.len());
        // chunked so tapes stay small
        for chunk in positions.chunks(self.config.batch_size.max(1)) {
            let mut tape = Tape::new();
            let bound = BoundParams::bind(&mut tape, &self.params);
            let gcn = self.run_gcns(&mut tape, &bound)?;
            for &pos in chunk {
                let fwd = self.forward_session(&mut tape, &bound, corpus, pos, gcn)?;
                let probability = tape.scalar(fwd.y_hat);
                let vec_of = |v: Option<Var>| -> Vec<f64> {
                    v.map(|v| tape.value(v).iter().copied().collect())
                        .unwrap_or_default()
                };
                out.push(Prediction {
                    session_id: corpus.sessions[pos].session_id.clone(),
                    probability,
                    label_hat: u8::from(probability >= 0.5),
                    features: FeatureBreakdown {
                        p_hat: vec_of(fwd.p_hat),
                        c_hat: vec_of(fwd.c_hat),
                        s: vec_of(fwd.s),
                        r_ss: vec_of(fwd.r_ss),
                        r_pp: vec_of(fwd.r_pp),
                    },
                });
            }
        }
        Ok(out)
    }

    /// Per-comment attention scores for ranking, aligned with the
    /// session's comments; comments outside the attention support get 0.
    pub fn comment_scores(
        &self,
        corpus: &SessionCorpus,
        session_id: &str,
        source: RankingSource,
    ) -> Result<Vec<f64>> {
        let pos = corpus.session_position(session_id)?;
        let t_len = corpus.sessions[pos].comments.len();
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, &self.params);
        let gcn = self.run_gcns(&mut tape, &bound)?;
        let fwd = self.forward_session(&mut tape, &bound, corpus, pos, gcn)?;
        let weights = match source {
            RankingSource::SentenceAttention => fwd.a_sent,
            RankingSource::Coattention => fwd.a_c,
            RankingSource::Baseline => fwd.baseline_attention,
        };
        match weights {
            Some(v) => Ok(tape.value(v).iter().copied().collect()),
            None if t_len == 0 => Ok(Vec::new()),
            None => Err(HeninError::InvalidArgument(format!(
                "ranking source {source} is not produced by this configuration"
            ))),
        }
    }

    /// Run both GCNs once per tape; their rows are shared by every session
    /// in the batch.
    fn run_gcns(&self, tape: &mut Tape, bound: &BoundParams) -> Result<Option<(Var, Var)>> {
        let (Some(ss), Some(pp)) = (&self.session_graph, &self.post_graph) else {
            return Ok(None);
        };
        let mut run = |graph: &GraphSpec, prefix: &str| -> Result<Var> {
            let vars = gcn_vars(bound, prefix, self.config.gcn_layers)?;
            let x = tape.leaf(graph.features.clone());
            let a_hat = tape.leaf(graph.normalized.clone());
            Ok(gcn_forward(
                tape,
                x,
                a_hat,
                &vars,
                self.config.gcn_softmax_output,
            ))
        };
        let r_ss = run(ss, "gcn_ss")?;
        let r_pp = run(pp, "gcn_pp")?;
        Ok(Some((r_ss, r_pp)))
    }

    /// Embed a token sequence; `None` when no unmasked token remains.
    fn embed_tokens(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        tokens: &[usize],
    ) -> Result<Option<(Var, Vec<bool>)>> {
        let mask: Vec<bool> = tokens.iter().map(|&t| t != PAD_INDEX).collect();
        if !mask.iter().any(|&b| b) {
            return Ok(None);
        }
        let embed = bound.var("embed")?;
        Ok(Some((tape.gather_rows(embed, tokens), mask)))
    }

    /// Comment vectors stacked T x d_k (zero rows for empty comments) and
    /// the per-comment mask; `None` when T = 0.
    fn encode_comments(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        session: &MediaSession,
        word_enc: &SelfAttentionVars,
    ) -> Result<Option<(Var, Vec<bool>)>> {
        if session.comments.is_empty() {
            return Ok(None);
        }
        let mut rows = Vec::with_capacity(session.comments.len());
        let mut mask = Vec::with_capacity(session.comments.len());
        for comment in &session.comments {
            match self.embed_tokens(tape, bound, &comment.tokens)? {
                Some((emb, word_mask)) => {
                    let enc = encode_comment(tape, emb, word_enc, &word_mask)?;
                    rows.push(enc.vector);
                    mask.push(true);
                }
                None => {
                    rows.push(tape.zeros(1, self.config.attention_dim));
                    mask.push(false);
                }
            }
        }
        Ok(Some((tape.concat_rows(&rows), mask)))
    }

    fn forward_session(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        corpus: &SessionCorpus,
        pos: usize,
        gcn: Option<(Var, Var)>,
    ) -> Result<SessionForward> {
        let session = &corpus.sessions[pos];
        let mut fused_parts: Vec<Var> = Vec::new();
        let mut fwd = SessionForward {
            y_hat: Var::default(),
            p_hat: None,
            c_hat: None,
            s: None,
            r_ss: None,
            r_pp: None,
            a_sent: None,
            a_c: None,
            baseline_attention: None,
        };

        match self.config.architecture {
            Architecture::Henin => {
                let comments = if self.config.use_comment_encoder || self.config.use_coattention {
                    let word_enc = self_attention_vars(bound, "word_enc")?;
                    self.encode_comments(tape, bound, session, &word_enc)?
                } else {
                    None
                };

                if self.config.use_coattention {
                    let vars = coattention_vars(bound, "coatt")?;
                    let post = self.embed_tokens(tape, bound, &session.post_tokens)?;
                    match post {
                        Some((post_emb, post_mask)) => {
                            let gru = bigru_vars(bound, "gru")?;
                            let p_mat = bigru_encode(tape, post_emb, &gru)?;
                            let (c_mat, comment_mask) = match &comments {
                                Some((stack, mask)) => {
                                    (Some(tape.transpose(*stack)), mask.clone())
                                }
                                None => (None, Vec::new()),
                            };
                            let out =
                                coattend(tape, p_mat, c_mat, &vars, &post_mask, &comment_mask)?;
                            fwd.a_c = out.a_c;
                            fwd.p_hat = Some(out.p_hat);
                            fwd.c_hat = Some(out.c_hat);
                            fused_parts.push(out.p_hat);
                            fused_parts.push(out.c_hat);
                        }
                        None => {
                            // empty post: the co-attention branch contributes zeros
                            let p_hat = tape.zeros(1, 2 * self.config.gru_hidden);
                            let c_hat = tape.zeros(1, self.config.attention_dim);
                            fwd.p_hat = Some(p_hat);
                            fwd.c_hat = Some(c_hat);
                            fused_parts.push(p_hat);
                            fused_parts.push(c_hat);
                        }
                    }
                }

                if self.config.use_comment_encoder {
                    let sent_enc = self_attention_vars(bound, "sent_enc")?;
                    let (stack, mask) = match &comments {
                        Some((stack, mask)) => (Some(*stack), mask.clone()),
                        None => (None, Vec::new()),
                    };
                    let enc = encode_session(tape, stack, &sent_enc, &mask)?;
                    fwd.a_sent = enc.comment_attention;
                    fwd.s = Some(enc.vector);
                    fused_parts.push(enc.vector);
                }

                if let Some((r_ss_all, r_pp_all)) = gcn {
                    let r_ss = tape.gather_rows(r_ss_all, &[pos]);
                    let r_pp = tape.gather_rows(r_pp_all, &[pos]);
                    fwd.r_ss = Some(r_ss);
                    fwd.r_pp = Some(r_pp);
                    fused_parts.push(r_ss);
                    fused_parts.push(r_pp);
                }
            }
            Architecture::GruAttention => {
                let word_enc = self_attention_vars(bound, "word_enc")?;
                let comments = self.encode_comments(tape, bound, session, &word_enc)?;
                let pooled = match comments {
                    Some((stack, mask)) if mask.iter().any(|&b| b) => {
                        let gru = gru_vars(bound, "base_gru")?;
                        let states = gru_forward(tape, stack, &gru, false);
                        let h_mat = tape.concat_rows(&states); // T x h
                        let w_a = bound.var("base_attn.w_a")?;
                        let b_a = bound.var("base_attn.b_a")?;
                        let v_a = bound.var("base_attn.v_a")?;
                        let hw = tape.matmul(h_mat, w_a);
                        let hwb = tape.add_row(hw, b_a);
                        let act = tape.tanh(hwb);
                        let scores = tape.matmul(act, v_a); // T x 1
                        let scores_row = tape.transpose(scores); // 1 x T
                        let alpha = tape.softmax_rows_masked(scores_row, &mask);
                        fwd.baseline_attention = Some(alpha);
                        tape.matmul(alpha, h_mat) // 1 x h
                    }
                    _ => tape.zeros(1, self.config.gru_hidden),
                };
                fused_parts.push(pooled);
            }
        }

        let fused = if fused_parts.len() == 1 {
            fused_parts[0]
        } else {
            tape.concat_cols(&fused_parts)
        };
        let w_f = bound.var("head.w_f")?;
        let b_f = bound.var("head.b_f")?;
        let logits = tape.matmul(fused, w_f);
        let biased = tape.add(logits, b_f);
        fwd.y_hat = tape.sigmoid(biased);
        Ok(fwd)
    }

    /// Rebuild the transductive graphs against a modified corpus (for
    /// example with truncated comment threads), keeping the trained
    /// parameters. The post graph uses the current embedding table.
    pub fn rebind_graphs(&mut self, corpus: &SessionCorpus) -> Result<()> {
        if self.config.architecture == Architecture::Henin && self.config.use_gcn {
            self.session_graph = Some(build_session_graph(corpus, self.config.similarity)?);
            self.post_graph = Some(build_post_graph(
                corpus,
                self.params.get("embed")?,
                self.config.similarity,
            )?);
        }
        Ok(())
    }

    /// Write the checkpoint: parameters, config, and the frozen graphs.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.params.save_file(dir.join("params.bin"))?;
        let config_json = serde_json::to_string_pretty(&self.config)
            .map_err(|e| HeninError::Checkpoint(e.to_string()))?;
        std::fs::write(dir.join("config.json"), config_json)?;
        let mut graphs = ModelParams::new();
        for (graph, name) in [(&self.session_graph, "ss"), (&self.post_graph, "pp")] {
            if let Some(g) = graph {
                graphs.insert(format!("{name}.features"), g.features.clone());
                graphs.insert(format!("{name}.adjacency"), g.adjacency.clone());
                graphs.insert(format!("{name}.normalized"), g.normalized.clone());
            }
        }
        graphs.save_file(dir.join("graphs.bin"))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let config_json = std::fs::read_to_string(dir.join("config.json"))?;
        let config: HeninConfig = serde_json::from_str(&config_json)
            .map_err(|e| HeninError::Checkpoint(e.to_string()))?;
        let params = ModelParams::load_file(dir.join("params.bin"))?;
        let graphs = ModelParams::load_file(dir.join("graphs.bin"))?;
        let load_graph = |name: &str| -> Result<Option<GraphSpec>> {
            if !graphs.contains(&format!("{name}.features")) {
                return Ok(None);
            }
            Ok(Some(GraphSpec {
                features: graphs.get(&format!("{name}.features"))?.clone(),
                adjacency: graphs.get(&format!("{name}.adjacency"))?.clone(),
                normalized: graphs.get(&format!("{name}.normalized"))?.clone(),
                measure: config.similarity,
            }))
        };
        Ok(Self {
            session_graph: load_graph("ss")?,
            post_graph: load_graph("pp")?,
            config,
            params,
        })
    }
}

fn gcn_dims(input: usize, config: &HeninConfig) -> Vec<usize> {
    let mut dims = vec![input];
    for _ in 0..config.gcn_layers - 1 {
        dims.push(config.gcn_hidden);
    }
    dims.push(config.gcn_output);
    dims
}

fn bce_loss(tape: &mut Tape, y_hat: Var, label: u8) -> Var {
    let clamped = tape.clamp(y_hat, LOSS_EPS, 1.0 - LOSS_EPS);
    let p = if label == 1 {
        clamped
    } else {
        tape.affine(clamped, -1.0, 1.0)
    };
    let log_p = tape.log(p);
    tape.scale(log_p, -1.0)
}
