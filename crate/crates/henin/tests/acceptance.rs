//! Acceptance suite: one test per release criterion. Each test prints a
//! single `ACCEPTANCE <n> <what>: PASS|FAIL` line (visible with
//! `cargo test --test acceptance -- --nocapture`) and then asserts the
//! stated target, so a red suite pinpoints the criterion that regressed.
//!
//! The expensive five-seed training runs are cached in `OnceLock`s and
//! shared between the criteria that read different slices of the same
//! report bundle.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use henin::attention::{
    encode_session, init_self_attention, scaled_dot_attention, self_attention_vars,
    SelfAttentionVars,
};
use henin::coattention::{coattend, coattention_vars, init_coattention, CoattentionVars};
use henin::data::{
    corpus_from_records, generate_synthetic, PreprocessConfig, RawComment, RawSession,
    SessionCorpus, SyntheticSpec,
};
use henin::eval::{run_experiment, ExperimentKind, ExperimentPlan, MetricsRow, ReportBundle};
use henin::explain::{ndcg_at_k, ExplanationRanking, RankedComment, RankingSource};
use henin::graph::{
    gcn_forward, gcn_vars, init_gcn, normalize_adjacency, pairwise_similarity, SimilarityMeasure,
};
use henin::gru::{bigru_encode, bigru_vars, init_bigru};
use henin::model::{Architecture, HeninConfig, HeninModel, ABLATION_VARIANTS};
use henin::tensor::{grad_check, BoundParams, GradMap, ModelParams, Tape};

fn verdict(n: usize, what: &str, pass: bool) {
    println!(
        "ACCEPTANCE {n} {what}: {}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

fn rowsoftmax(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.raw_dim(), b.raw_dim(), "shape mismatch in comparison");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Criterion 1: gradient suite (rel. tol 1e-3; d=8, T=4, N=5, M=6; < 2 min)
// ---------------------------------------------------------------------------

/// Six hand-written sessions: posts of five words, up to four comments.
fn six_session_records() -> Vec<RawSession> {
    let mk = |sid: &str, post: &str, label: u8, comments: Vec<(&str, &str)>| RawSession {
        session_id: sid.into(),
        post: post.into(),
        label,
        comments: comments
            .into_iter()
            .enumerate()
            .map(|(i, (user, text))| RawComment {
                id: format!("{sid}_c{i}"),
                user: user.into(),
                ts: i as i64,
                text: text.into(),
            })
            .collect(),
    };
    vec![
        mk(
            "s0",
            "sunset over the old pier",
            1,
            vec![
                ("u1", "you are such a loser"),
                ("u2", "nobody wants you here"),
                ("u1", "so true"),
                ("u3", "leave him alone"),
            ],
        ),
        mk(
            "s1",
            "my dog learned a trick",
            0,
            vec![("u4", "what a clever pup"), ("u5", "adorable little dog")],
        ),
        mk(
            "s2",
            "new haircut what do you think",
            1,
            vec![
                ("u2", "ugly as always idiot"),
                ("u1", "total loser haircut"),
                ("u6", "looks fine to me"),
            ],
        ),
        mk(
            "s3",
            "dinner with the whole family",
            0,
            vec![
                ("u5", "that looks tasty"),
                ("u4", "save some for me"),
                ("u7", "lovely evening"),
            ],
        ),
        mk(
            "s4",
            "first day at my job",
            1,
            vec![
                ("u1", "they will fire you idiot"),
                ("u2", "nobody likes you there"),
            ],
        ),
        mk(
            "s5",
            "hiking up the green hill",
            0,
            vec![("u7", "great view"), ("u5", "wish i was there")],
        ),
    ]
}

fn six_session_corpus() -> SessionCorpus {
    corpus_from_records(six_session_records(), PreprocessConfig::default()).unwrap()
}

fn small_model_config(architecture: Architecture) -> HeninConfig {
    HeninConfig {
        architecture,
        embed_dim: 8,
        attention_dim: 8,
        gru_hidden: 4,
        coattention_dim: 8,
        gcn_hidden: 8,
        gcn_output: 4,
        gcn_layers: 2,
        batch_size: 6,
        ..HeninConfig::default()
    }
}

#[test]
fn criterion_1_gradient_suite() {
    const TOL: f64 = 1e-3;
    let start = Instant::now();
    let mut results: Vec<(&str, bool, String)> = Vec::new();
    let record =
        |results: &mut Vec<(&str, bool, String)>, name: &'static str, report: henin::Result<henin::tensor::GradCheckReport>| match report {
            Ok(r) => {
                let detail = r
                    .worst()
                    .map(|w| format!("worst rel err {:.2e} at {}[{},{}]", w.rel_error, w.param, w.row, w.col))
                    .unwrap_or_default();
                results.push((name, r.passed(), detail));
            }
            Err(e) => results.push((name, false, e.to_string())),
        };

    let mut rng = ChaCha8Rng::seed_from_u64(11);

    // Self-attention over T=4 word rows of width d=8 (one masked position).
    let mut params = ModelParams::new();
    params.insert("x", random_matrix(&mut rng, 4, 8));
    init_self_attention(&mut params, "sa", 8, 8, &mut rng);
    let mask = [true, true, true, false];
    let f = |p: &ModelParams| -> henin::Result<(f64, GradMap)> {
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, p);
        let x = bound.var("x")?;
        let attn = self_attention_vars(&bound, "sa")?;
        let (weights, attended) = scaled_dot_attention(&mut tape, x, &attn, &mask)?;
        let a = tape.sum_all(attended);
        let w = tape.sum_all(weights);
        let total = tape.add(a, w);
        Ok((tape.scalar(total), bound.gradients(&tape, total)))
    };
    record(&mut results, "scaled_dot_attention", grad_check(f, &params, TOL, 3, 0));

    // Sentence encoder (a_sent renormalization) over the same inputs.
    let f = |p: &ModelParams| -> henin::Result<(f64, GradMap)> {
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, p);
        let x = bound.var("x")?;
        let attn = self_attention_vars(&bound, "sa")?;
        let enc = encode_session(&mut tape, Some(x), &attn, &mask)?;
        let s = tape.sum_all(enc.vector);
        let a = tape.sum_all(enc.comment_attention.expect("unmasked comments present"));
        let total = tape.add(s, a);
        Ok((tape.scalar(total), bound.gradients(&tape, total)))
    };
    record(&mut results, "encode_session", grad_check(f, &params, TOL, 3, 1));

    // Co-attention with N=5 post words and T=4 comments.
    let mut params = ModelParams::new();
    params.insert("p", random_matrix(&mut rng, 8, 5));
    params.insert("c", random_matrix(&mut rng, 8, 4));
    init_coattention(&mut params, "co", 8, 8, 8, &mut rng);
    let post_mask = [true; 5];
    let comment_mask = [true, true, false, true];
    let f = |p: &ModelParams| -> henin::Result<(f64, GradMap)> {
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, p);
        let vars = coattention_vars(&bound, "co")?;
        let p_mat = bound.var("p")?;
        let c_mat = bound.var("c")?;
        let out = coattend(&mut tape, p_mat, Some(c_mat), &vars, &post_mask, &comment_mask)?;
        let mut total = tape.sum_all(out.p_hat);
        for v in [out.c_hat, out.a_p, out.a_c.expect("comments present")] {
            let s = tape.sum_all(v);
            total = tape.add(total, s);
        }
        Ok((tape.scalar(total), bound.gradients(&tape, total)))
    };
    record(&mut results, "coattend", grad_check(f, &params, TOL, 3, 2));

    // Two-layer GCN over M=6 nodes, both output nonlinearities.
    let mut params = ModelParams::new();
    params.insert("x", random_matrix(&mut rng, 6, 8));
    init_gcn(&mut params, "gcn", &[8, 6, 4], &mut rng);
    let mut adjacency = Array2::zeros((6, 6));
    for i in 0..6 {
        for j in i..6 {
            let w = if i == j { 1.0 } else { rng.gen_range(0.0..1.0) };
            adjacency[(i, j)] = w;
            adjacency[(j, i)] = w;
        }
    }
    let a_hat = normalize_adjacency(&adjacency);
    for softmax_output in [true, false] {
        let a_hat = a_hat.clone();
        let f = move |p: &ModelParams| -> henin::Result<(f64, GradMap)> {
            let mut tape = Tape::new();
            let bound = BoundParams::bind(&mut tape, p);
            let x = bound.var("x")?;
            let a = tape.leaf(a_hat.clone());
            let vars = gcn_vars(&bound, "gcn", 2)?;
            let out = gcn_forward(&mut tape, x, a, &vars, softmax_output);
            let total = tape.sum_all(out);
            Ok((tape.scalar(total), bound.gradients(&tape, total)))
        };
        let name = if softmax_output {
            "gcn_forward (softmax)"
        } else {
            "gcn_forward (relu)"
        };
        record(&mut results, name, grad_check(f, &params, TOL, 3, 3));
    }

    // Bidirectional GRU over a T=4 sequence.
    let mut params = ModelParams::new();
    params.insert("x", random_matrix(&mut rng, 4, 8));
    init_bigru(&mut params, "gru", 8, 4, &mut rng);
    let f = |p: &ModelParams| -> henin::Result<(f64, GradMap)> {
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, p);
        let x = bound.var("x")?;
        let vars = bigru_vars(&bound, "gru")?;
        let out = bigru_encode(&mut tape, x, &vars)?;
        let total = tape.sum_all(out);
        Ok((tape.scalar(total), bound.gradients(&tape, total)))
    };
    record(&mut results, "bigru_encode", grad_check(f, &params, TOL, 3, 4));

    // End-to-end batch loss on the six-session corpus, both architectures.
    let corpus = six_session_corpus();
    for (name, architecture) in [
        ("end-to-end loss", Architecture::Henin),
        ("baseline loss", Architecture::GruAttention),
    ] {
        let model = HeninModel::init(&corpus, &small_model_config(architecture)).unwrap();
        let positions: Vec<usize> = (0..corpus.num_sessions()).collect();
        let f = |p: &ModelParams| model.loss_and_gradients(&corpus, &positions, p);
        record(&mut results, name, grad_check(f, &model.params, TOL, 2, 5));
    }

    let elapsed = start.elapsed();
    let all_passed = results.iter().all(|(_, ok, _)| *ok);
    let in_budget = elapsed < Duration::from_secs(120);
    verdict(1, "gradient checks (rel tol 1e-3, < 2 min)", all_passed && in_budget);
    for (name, ok, detail) in &results {
        assert!(*ok, "gradient check failed for {name}: {detail}");
    }
    assert!(in_budget, "gradient suite took {elapsed:?}, budget is 2 min");
}

// ---------------------------------------------------------------------------
// Criterion 2: formula oracles at 1e-9 against straight-line transcriptions
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_formula_oracles() {
    const TOL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0f64;

    // scaled_dot_attention: softmax(Q K' / sqrt(d_k)) V, no masking.
    {
        let (t, d, d_k) = (4, 6, 3);
        let mut params = ModelParams::new();
        params.insert("x", random_matrix(&mut rng, t, d));
        init_self_attention(&mut params, "sa", d, d_k, &mut rng);
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, &params);
        let x = bound.var("x").unwrap();
        let attn = self_attention_vars(&bound, "sa").unwrap();
        let (weights, attended) =
            scaled_dot_attention(&mut tape, x, &attn, &vec![true; t]).unwrap();

        let xm = params.get("x").unwrap();
        let q = xm.dot(params.get("sa.w_q").unwrap());
        let k = xm.dot(params.get("sa.w_k").unwrap());
        let v = xm.dot(params.get("sa.w_v").unwrap());
        let scores = q.dot(&k.t()) / (d_k as f64).sqrt();
        let expected_w = rowsoftmax(&scores);
        let expected_out = expected_w.dot(&v);
        worst = worst
            .max(max_abs_diff(tape.value(weights), &expected_w))
            .max(max_abs_diff(tape.value(attended), &expected_out));
    }

    // coattend: the five equations with distinct d_p, d_c, k, N, T.
    {
        let (d_p, d_c, k, n, t) = (3, 4, 5, 5, 4);
        let mut params = ModelParams::new();
        params.insert("p", random_matrix(&mut rng, d_p, n));
        params.insert("c", random_matrix(&mut rng, d_c, t));
        init_coattention(&mut params, "co", d_p, d_c, k, &mut rng);
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, &params);
        let vars = coattention_vars(&bound, "co").unwrap();
        let p_var = bound.var("p").unwrap();
        let c_var = bound.var("c").unwrap();
        let out = coattend(
            &mut tape,
            p_var,
            Some(c_var),
            &vars,
            &vec![true; n],
            &vec![true; t],
        )
        .unwrap();

        let p = params.get("p").unwrap();
        let c = params.get("c").unwrap();
        let w_l = params.get("co.w_l").unwrap();
        let w_p = params.get("co.w_p").unwrap();
        let w_c = params.get("co.w_c").unwrap();
        let w_hp = params.get("co.w_hp").unwrap();
        let w_hc = params.get("co.w_hc").unwrap();
        let l = c.t().dot(w_l).dot(p).mapv(f64::tanh); // T x N
        let wpp = w_p.dot(p); // k x N
        let wcc = w_c.dot(c); // k x T
        let h_p = (&wpp + &wcc.dot(&l)).mapv(f64::tanh);
        let h_c = (&wcc + &wpp.dot(&l.t())).mapv(f64::tanh);
        let a_p = rowsoftmax(&w_hp.t().dot(&h_p).to_owned());
        let a_c = rowsoftmax(&w_hc.t().dot(&h_c).to_owned());
        let p_hat = a_p.dot(&p.t());
        let c_hat = a_c.dot(&c.t());
        worst = worst
            .max(max_abs_diff(tape.value(out.affinity.unwrap()), &l))
            .max(max_abs_diff(tape.value(out.h_p), &h_p))
            .max(max_abs_diff(tape.value(out.h_c.unwrap()), &h_c))
            .max(max_abs_diff(tape.value(out.a_p), &a_p))
            .max(max_abs_diff(tape.value(out.a_c.unwrap()), &a_c))
            .max(max_abs_diff(tape.value(out.p_hat), &p_hat))
            .max(max_abs_diff(tape.value(out.c_hat), &c_hat));
    }

    // Symmetric nonnegative adjacency with self-loops and one isolated node.
    let m = 6;
    let mut adjacency = Array2::zeros((m, m));
    for i in 0..m - 1 {
        for j in i..m - 1 {
            let w = if i == j { 1.0 } else { rng.gen_range(0.0..1.0) };
            adjacency[(i, j)] = w;
            adjacency[(j, i)] = w;
        }
    }
    let degrees: Vec<f64> = (0..m).map(|i| adjacency.row(i).sum()).collect();
    let expected_norm = Array2::from_shape_fn((m, m), |(i, j)| {
        if degrees[i] > 0.0 && degrees[j] > 0.0 {
            adjacency[(i, j)] / (degrees[i].sqrt() * degrees[j].sqrt())
        } else {
            0.0
        }
    });
    worst = worst.max(max_abs_diff(&normalize_adjacency(&adjacency), &expected_norm));

    // gcn_forward: relu hidden, row-softmax output, on the same normalization.
    {
        let mut params = ModelParams::new();
        params.insert("x", random_matrix(&mut rng, m, 4));
        init_gcn(&mut params, "gcn", &[4, 3, 2], &mut rng);
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, &params);
        let x = bound.var("x").unwrap();
        let a = tape.leaf(expected_norm.clone());
        let vars = gcn_vars(&bound, "gcn", 2).unwrap();
        let out = gcn_forward(&mut tape, x, a, &vars, true);

        let xm = params.get("x").unwrap();
        let w0 = params.get("gcn.w0").unwrap();
        let w1 = params.get("gcn.w1").unwrap();
        let h1 = expected_norm.dot(xm).dot(w0).mapv(|v| v.max(0.0));
        let expected = rowsoftmax(&expected_norm.dot(&h1).dot(w1));
        worst = worst.max(max_abs_diff(tape.value(out), &expected));
    }

    // pairwise_similarity, all three measures.
    {
        let x = random_matrix(&mut rng, 5, 4);
        let x_pos = x.mapv(f64::abs);
        let n = x.nrows();

        let norms: Vec<f64> = (0..n).map(|i| x.row(i).dot(&x.row(i)).sqrt()).collect();
        let cos = Array2::from_shape_fn((n, n), |(i, j)| {
            if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                x.row(i).dot(&x.row(j)) / (norms[i] * norms[j])
            }
        });
        worst = worst.max(max_abs_diff(
            &pairwise_similarity(&x, SimilarityMeasure::Cosine).unwrap(),
            &cos,
        ));

        let jac = Array2::from_shape_fn((n, n), |(i, j)| {
            let inter = x_pos.row(i).dot(&x_pos.row(j));
            let denom = x_pos.row(i).sum() + x_pos.row(j).sum() - inter;
            if denom == 0.0 {
                0.0
            } else {
                inter / denom
            }
        });
        worst = worst.max(max_abs_diff(
            &pairwise_similarity(&x_pos, SimilarityMeasure::Jaccard).unwrap(),
            &jac,
        ));

        let mut dist = Array2::zeros((n, n));
        let mut max_dist = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let d = (&x.row(i) - &x.row(j)).mapv(|v| v * v).sum().sqrt();
                dist[(i, j)] = d;
                max_dist = max_dist.max(d);
            }
        }
        let euc = dist.mapv(|d| 1.0 - d / max_dist);
        worst = worst.max(max_abs_diff(
            &pairwise_similarity(&x, SimilarityMeasure::Euclidean).unwrap(),
            &euc,
        ));
    }

    let pass = worst <= TOL;
    verdict(2, "formula oracles (max abs diff <= 1e-9)", pass);
    assert!(pass, "worst deviation from transcription: {worst:e}");
}

// ---------------------------------------------------------------------------
// Criterion 3: attention normalization under 1000 random inputs and masks
// ---------------------------------------------------------------------------

fn attention_sums_hold(seed: u64) -> Result<(), String> {
    const TOL: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = rng.gen_range(1..=6);
    let d = rng.gen_range(1..=5);
    let d_k = rng.gen_range(1..=5);
    let mut mask: Vec<bool> = (0..t).map(|_| rng.gen_bool(0.7)).collect();
    let forced = rng.gen_range(0..t);
    mask[forced] = true;

    let mut tape = Tape::new();
    let x = tape.leaf(random_matrix(&mut rng, t, d));
    let attn = SelfAttentionVars {
        w_q: tape.leaf(random_matrix(&mut rng, d, d_k)),
        w_k: tape.leaf(random_matrix(&mut rng, d, d_k)),
        w_v: tape.leaf(random_matrix(&mut rng, d, d_k)),
    };
    let (weights, _) = scaled_dot_attention(&mut tape, x, &attn, &mask).map_err(|e| e.to_string())?;
    let w = tape.value(weights);
    for (i, row) in w.rows().into_iter().enumerate() {
        let sum: f64 = row.sum();
        if (sum - 1.0).abs() > TOL {
            return Err(format!("word attention row {i} sums to {sum}"));
        }
        for (j, &v) in row.iter().enumerate() {
            if !mask[j] && v != 0.0 {
                return Err(format!("masked column {j} carries weight {v}"));
            }
        }
    }

    let enc = encode_session(&mut tape, Some(x), &attn, &mask).map_err(|e| e.to_string())?;
    let a_sent = tape.value(enc.comment_attention.expect("at least one unmasked comment"));
    let sum: f64 = a_sent.sum();
    if (sum - 1.0).abs() > TOL {
        return Err(format!("a_sent sums to {sum}"));
    }

    let n = rng.gen_range(1..=6);
    let d_p = rng.gen_range(1..=4);
    let d_c = rng.gen_range(1..=4);
    let k = rng.gen_range(1..=4);
    let mut post_mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
    let forced = rng.gen_range(0..n);
    post_mask[forced] = true;
    let p = tape.leaf(random_matrix(&mut rng, d_p, n));
    let c = tape.leaf(random_matrix(&mut rng, d_c, t));
    let vars = CoattentionVars {
        w_l: tape.leaf(random_matrix(&mut rng, d_c, d_p)),
        w_p: tape.leaf(random_matrix(&mut rng, k, d_p)),
        w_c: tape.leaf(random_matrix(&mut rng, k, d_c)),
        w_hp: tape.leaf(random_matrix(&mut rng, k, 1)),
        w_hc: tape.leaf(random_matrix(&mut rng, k, 1)),
    };
    let out = coattend(&mut tape, p, Some(c), &vars, &post_mask, &mask).map_err(|e| e.to_string())?;
    let a_p_sum: f64 = tape.value(out.a_p).sum();
    if (a_p_sum - 1.0).abs() > TOL {
        return Err(format!("a_p sums to {a_p_sum}"));
    }
    let a_c_sum: f64 = tape.value(out.a_c.expect("comments present")).sum();
    if (a_c_sum - 1.0).abs() > TOL {
        return Err(format!("a_c sums to {a_c_sum}"));
    }
    Ok(())
}

#[test]
fn criterion_3_attention_normalization() {
    let mut runner = TestRunner::new(PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let outcome = runner.run(&any::<u64>(), |seed| {
        attention_sums_hold(seed).map_err(|msg| TestCaseError::fail(msg))
    });
    let pass = outcome.is_ok();
    verdict(3, "attention normalization (1000 property cases)", pass);
    assert!(pass, "property violated: {outcome:?}");
}

// ---------------------------------------------------------------------------
// Criteria 4, 5, 7, 8 share five-seed training runs on a 400-session corpus
// whose evidence comments carry a single toxic token, so the session graph
// (homophily 0.9) carries most of the label signal.
// ---------------------------------------------------------------------------

fn detection_spec() -> SyntheticSpec {
    SyntheticSpec {
        num_sessions: 400,
        toxic_tokens_per_evidence_comment: Some(1),
        ..SyntheticSpec::default()
    }
}

/// Desk-sized model with ReLU GCN output: the row-softmax output saturates
/// gradients on this corpus and the graph branch then goes unused.
fn detection_config() -> HeninConfig {
    HeninConfig {
        gcn_softmax_output: false,
        ..HeninConfig::desk()
    }
}

struct TimedBundle {
    bundle: ReportBundle,
    elapsed: Duration,
}

static ABLATION_RUN: OnceLock<TimedBundle> = OnceLock::new();

fn ablation_run() -> &'static TimedBundle {
    ABLATION_RUN.get_or_init(|| {
        let (corpus, _) =
            generate_synthetic(&detection_spec(), PreprocessConfig::default()).unwrap();
        let plan = ExperimentPlan {
            kind: ExperimentKind::Ablation,
            repeats: 5,
            config: detection_config(),
            ..ExperimentPlan::default()
        };
        let start = Instant::now();
        let bundle = run_experiment(&plan, &corpus, None).unwrap();
        TimedBundle {
            bundle,
            elapsed: start.elapsed(),
        }
    })
}

fn mean_row<'a>(rows: &'a [MetricsRow], model: &str) -> &'a MetricsRow {
    rows.iter()
        .find(|r| r.model == model && r.repeat == "mean")
        .unwrap_or_else(|| panic!("no mean row for model {model}"))
}

#[test]
fn criterion_4_synthetic_separability() {
    let run = ablation_run();
    let full = mean_row(&run.bundle.ablation, "full");
    let in_budget = run.elapsed < Duration::from_secs(600);
    let pass = full.accuracy >= 0.90 && full.f1 >= 0.85 && in_budget;
    verdict(4, "synthetic separability (Acc >= 0.90, F1 >= 0.85, 5 seeds, < 10 min)", pass);
    assert!(
        full.accuracy >= 0.90 && full.f1 >= 0.85,
        "full model mean accuracy {:.4}, F1 {:.4}",
        full.accuracy,
        full.f1
    );
    assert!(in_budget, "five-seed run took {:?}", run.elapsed);
}

#[test]
fn criterion_5_ablation_direction() {
    let run = ablation_run();
    let full = mean_row(&run.bundle.ablation, "full");
    let no_graph = mean_row(&run.bundle.ablation, "-G");
    let gap = full.f1 - no_graph.f1;
    let pass = gap >= 0.03;
    verdict(5, "ablation direction (-G mean F1 trails full by >= 0.03)", pass);
    assert!(
        pass,
        "full F1 {:.4}, -G F1 {:.4}, gap {:.4}",
        full.f1, no_graph.f1, gap
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: explainability. Evidence comments carry three toxic tokens
// here — enough text signal for both attention mechanisms to localize, so
// the comparison measures ranking quality rather than failure to converge.
// HENIN's comments are ranked by its co-attention weights a_c, the attention
// distribution that directly feeds the classifier.
// ---------------------------------------------------------------------------

static EXPLAIN_RUN: OnceLock<ReportBundle> = OnceLock::new();

fn explain_run() -> &'static ReportBundle {
    EXPLAIN_RUN.get_or_init(|| {
        let spec = SyntheticSpec {
            num_sessions: 400,
            toxic_tokens_per_evidence_comment: Some(3),
            ..SyntheticSpec::default()
        };
        let (corpus, ratings) = generate_synthetic(&spec, PreprocessConfig::default()).unwrap();
        let plan = ExperimentPlan {
            kind: ExperimentKind::Explainability,
            repeats: 5,
            ranking_source: RankingSource::Coattention,
            config: HeninConfig::desk(),
            ..ExperimentPlan::default()
        };
        run_experiment(&plan, &corpus, Some(&ratings)).unwrap()
    })
}

#[test]
fn criterion_6_explainability() {
    // Hand-checked NDCG@3: ratings 0/2/3 ranked worst-first gives
    // DCG = 2/log2(3) + 3/log2(4), IDCG = 3 + 2/log2(3), ratio 0.648.
    let ranking = ExplanationRanking {
        session_id: "s".into(),
        entries: vec![
            RankedComment {
                comment_id: "c0".into(),
                score: 0.9,
                timestamp: 0,
            },
            RankedComment {
                comment_id: "c1".into(),
                score: 0.5,
                timestamp: 1,
            },
            RankedComment {
                comment_id: "c2".into(),
                score: 0.1,
                timestamp: 2,
            },
        ],
        source: RankingSource::SentenceAttention,
    };
    let mut ratings = BTreeMap::new();
    ratings.insert(
        "s".to_string(),
        BTreeMap::from([
            ("c0".to_string(), 0u8),
            ("c1".to_string(), 2u8),
            ("c2".to_string(), 3u8),
        ]),
    );
    let hand = ndcg_at_k(&ranking, &ratings, 3).unwrap();
    let hand_ok = (hand - 0.648).abs() <= 1e-3;

    let bundle = explain_run();
    let henin = bundle
        .explainability
        .iter()
        .find(|r| r.model == "henin" && r.repeat == "mean")
        .expect("henin mean row");
    let baseline = bundle
        .explainability
        .iter()
        .find(|r| r.model == "gru_attention" && r.repeat == "mean")
        .expect("baseline mean row");
    let ranking_ok = henin.ndcg >= 0.70 && henin.ndcg >= baseline.ndcg;

    let pass = hand_ok && ranking_ok;
    verdict(6, "explainability (mean NDCG@10 >= 0.70 and >= GRU+A; hand NDCG 0.648)", pass);
    assert!(hand_ok, "hand NDCG example evaluated to {hand:.6}");
    assert!(
        ranking_ok,
        "henin mean NDCG {:.4}, baseline {:.4}",
        henin.ndcg, baseline.ndcg
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: early detection at 40% of each comment thread
// ---------------------------------------------------------------------------

static EARLY_RUN: OnceLock<ReportBundle> = OnceLock::new();

fn early_run() -> &'static ReportBundle {
    EARLY_RUN.get_or_init(|| {
        let (corpus, _) =
            generate_synthetic(&detection_spec(), PreprocessConfig::default()).unwrap();
        let plan = ExperimentPlan {
            kind: ExperimentKind::EarlyDetection,
            repeats: 5,
            fractions: vec![0.4, 1.0],
            config: detection_config(),
            ..ExperimentPlan::default()
        };
        run_experiment(&plan, &corpus, None).unwrap()
    })
}

#[test]
fn criterion_7_early_detection() {
    let bundle = early_run();
    let at = |fraction: f64| -> &MetricsRow {
        bundle
            .early_detection
            .iter()
            .find(|r| {
                r.model == "henin"
                    && r.repeat == "mean"
                    && r.value.parse::<f64>().map(|v| (v - fraction).abs() < 1e-12) == Ok(true)
            })
            .unwrap_or_else(|| panic!("no mean row at fraction {fraction}"))
    };
    let partial = at(0.4).accuracy;
    let complete = at(1.0).accuracy;
    let pass = partial >= 0.9 * complete;
    verdict(7, "early detection (acc@0.4 >= 0.9 x acc@1.0, 5 seeds)", pass);
    assert!(pass, "accuracy {partial:.4} at 0.4 vs {complete:.4} at 1.0");
}

// ---------------------------------------------------------------------------
// Criterion 8: protocol fidelity — 6 ablation configurations, GCN sweeps
// over depth and similarity measure, and seed-determinism of every report.
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_protocol_fidelity() {
    let variants: std::collections::BTreeSet<&str> = ablation_run()
        .bundle
        .ablation
        .iter()
        .map(|r| r.model.as_str())
        .collect();
    let expected: std::collections::BTreeSet<&str> = ABLATION_VARIANTS.iter().copied().collect();
    let ablation_ok = variants == expected;

    let spec = SyntheticSpec {
        num_sessions: 60,
        user_pool_size: 30,
        ..SyntheticSpec::default()
    };
    let (corpus, _) = generate_synthetic(&spec, PreprocessConfig::default()).unwrap();
    let sweep_config = HeninConfig {
        epochs: 3,
        ..HeninConfig::desk()
    };
    let sweep_plan = |kind: ExperimentKind| ExperimentPlan {
        kind,
        repeats: 2,
        config: sweep_config.clone(),
        ..ExperimentPlan::default()
    };

    let layers = run_experiment(&sweep_plan(ExperimentKind::GcnLayers), &corpus, None).unwrap();
    let layer_values: std::collections::BTreeSet<&str> =
        layers.gcn_sweep.iter().map(|r| r.value.as_str()).collect();
    let layers_ok = layer_values == ["1", "2", "3"].into_iter().collect()
        && layers.gcn_sweep.iter().all(|r| r.parameter == "layers");

    let measures =
        run_experiment(&sweep_plan(ExperimentKind::GcnSimilarity), &corpus, None).unwrap();
    let measure_values: std::collections::BTreeSet<&str> =
        measures.gcn_sweep.iter().map(|r| r.value.as_str()).collect();
    let measures_ok = measure_values == ["cosine", "euclidean", "jaccard"].into_iter().collect()
        && measures.gcn_sweep.iter().all(|r| r.parameter == "similarity");

    let main_plan = sweep_plan(ExperimentKind::Main);
    let first = run_experiment(&main_plan, &corpus, None).unwrap();
    let second = run_experiment(&main_plan, &corpus, None).unwrap();
    let deterministic = serde_json::to_string(&first).unwrap()
        == serde_json::to_string(&second).unwrap();

    let pass = ablation_ok && layers_ok && measures_ok && deterministic;
    verdict(8, "protocol fidelity (6 ablations, depth/measure sweeps, determinism)", pass);
    assert!(ablation_ok, "ablation variants: {variants:?}");
    assert!(layers_ok, "layer sweep values: {layer_values:?}");
    assert!(measures_ok, "measure sweep values: {measure_values:?}");
    assert!(deterministic, "identical plans produced different reports");
}
