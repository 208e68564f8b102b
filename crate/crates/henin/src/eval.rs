//! Experiment harness: repeated stratified splits, binary classification
//! metrics, the ablation suite, early-detection curves, the explainability
//! comparison against the GRU-with-attention baseline, and GCN sweeps,
//! with CSV/JSON report emission.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{truncate_by_fraction, SessionCorpus};
use crate::explain::{ndcg_at_k, precision_at_k, rank_comments, GroundTruthRatings, RankingSource};
use crate::graph::SimilarityMeasure;
use crate::model::{Architecture, HeninConfig, HeninModel, Prediction, ABLATION_VARIANTS};
use crate::{HeninError, Result};

/// Binary classification metrics with their confusion counts
/// (positive class = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl MetricsReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let total = (tp + fp + tn + fn_) as f64;
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            accuracy: (tp + tn) as f64 / total,
            precision,
            recall,
            f1,
            tp,
            fp,
            tn,
            fn_,
        }
    }
}

pub fn classification_metrics(predicted: &[u8], labels: &[u8]) -> Result<MetricsReport> {
    if predicted.len() != labels.len() || predicted.is_empty() {
        return Err(HeninError::InvalidArgument(format!(
            "{} predictions for {} labels",
            predicted.len(),
            labels.len()
        )));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &y) in predicted.iter().zip(labels) {
        match (p, y) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 0) => tn += 1,
            (0, 1) => fn_ += 1,
            _ => {
                return Err(HeninError::InvalidArgument(
                    "labels must be 0 or 1".into(),
                ))
            }
        }
    }
    Ok(MetricsReport::from_counts(tp, fp, tn, fn_))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Main,
    Ablation,
    EarlyDetection,
    Explainability,
    GcnLayers,
    GcnSimilarity,
}

/// A declarative experiment description, loadable from TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    pub repeats: usize,
    pub split_fraction: f64,
    /// One seed per repeat; filled with 0..repeats when absent.
    pub seeds: Option<Vec<u64>>,
    pub stratified: bool,
    /// Early detection: retrain at each comment fraction (the alternative
    /// trains once on full sessions and only truncates at test time).
    pub retrain_per_fraction: bool,
    pub fractions: Vec<f64>,
    pub ndcg_k: usize,
    pub relevance_threshold: u8,
    /// Attention signal used to rank comments in explainability runs.
    pub ranking_source: RankingSource,
    pub config: HeninConfig,
    /// Tokenization and truncation settings used when the CLI loads the
    /// corpus for this plan.
    pub preprocess: crate::data::PreprocessConfig,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Main,
            repeats: 5,
            split_fraction: 0.8,
            seeds: None,
            stratified: true,
            retrain_per_fraction: true,
            fractions: (1..=10).map(|i| i as f64 / 10.0).collect(),
            ndcg_k: 10,
            relevance_threshold: 3,
            ranking_source: RankingSource::SentenceAttention,
            config: HeninConfig::default(),
            preprocess: crate::data::PreprocessConfig::default(),
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(HeninError::Config("repeats must be >= 1".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(HeninError::Config("split fraction must be in (0,1)".into()));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.repeats {
                return Err(HeninError::Config(format!(
                    "{} seeds for {} repeats",
                    seeds.len(),
                    self.repeats
                )));
            }
        }
        if self.fractions.iter().any(|&f| f <= 0.0 || f > 1.0) {
            return Err(HeninError::Config("fractions must be in (0,1]".into()));
        }
        self.config.validate()
    }

    pub fn effective_seeds(&self) -> Vec<u64> {
        self.seeds
            .clone()
            .unwrap_or_else(|| (0..self.repeats as u64).collect())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: ExperimentPlan =
            toml::from_str(text).map_err(|e| HeninError::Config(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }
}

/// Seeded train/test split with |train| = round(fraction * M); stratified
/// splits apportion that size across classes by largest remainder.
pub fn split_corpus(
    corpus: &SessionCorpus,
    fraction: f64,
    stratified: bool,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let m = corpus.num_sessions();
    let n_train = (fraction * m as f64).round() as usize;
    if n_train == 0 || n_train == m {
        return Err(HeninError::InvalidArgument(format!(
            "split fraction {fraction} leaves an empty side for {m} sessions"
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    if stratified {
        let mut pos: Vec<usize> = Vec::new();
        let mut neg: Vec<usize> = Vec::new();
        for (i, s) in corpus.sessions.iter().enumerate() {
            if s.label == 1 {
                pos.push(i)
            } else {
                neg.push(i)
            }
        }
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        let q_pos = ((fraction * pos.len() as f64).round() as usize)
            .min(pos.len())
            .min(n_train);
        let q_neg = (n_train - q_pos).min(neg.len());
        if q_pos + q_neg != n_train {
            return Err(HeninError::InvalidArgument(
                "stratified split cannot reach the requested train size".into(),
            ));
        }
        train.extend(&pos[..q_pos]);
        train.extend(&neg[..q_neg]);
        test.extend(&pos[q_pos..]);
        test.extend(&neg[q_neg..]);
    } else {
        let mut all: Vec<usize> = (0..m).collect();
        all.shuffle(&mut rng);
        train.extend(&all[..n_train]);
        test.extend(&all[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// One emitted table row; unused columns stay empty in the CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    /// Sweep axis ("", "fraction", "layers", "similarity").
    pub parameter: String,
    pub value: String,
    /// Repeat index, or "mean" for the aggregate row.
    pub repeat: String,
    pub seed: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: Option<usize>,
    pub fp: Option<usize>,
    pub tn: Option<usize>,
    #[serde(rename = "fn")]
    pub fn_: Option<usize>,
    pub precision_at_10: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainRow {
    pub model: String,
    pub repeat: String,
    pub seed: String,
    pub ndcg: f64,
    pub precision_at_k: f64,
    pub sessions_scored: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub kind: ExperimentKind,
    pub repeats: usize,
    pub split_fraction: f64,
    pub seeds: Vec<u64>,
    pub stratified: bool,
    pub retrain_per_fraction: bool,
    pub fractions: Vec<f64>,
    pub ndcg_k: usize,
    pub config: HeninConfig,
    pub num_sessions: usize,
    pub version: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReportBundle {
    pub metrics: Vec<MetricsRow>,
    pub ablation: Vec<MetricsRow>,
    pub early_detection: Vec<MetricsRow>,
    pub gcn_sweep: Vec<MetricsRow>,
    pub explainability: Vec<ExplainRow>,
    pub meta: Option<RunMeta>,
}

struct RepeatRun {
    model: HeninModel,
    prepared: SessionCorpus,
    test: Vec<usize>,
    predictions: Vec<Prediction>,
    metrics: MetricsReport,
}

/// Train on one seeded split and evaluate on its held-out sessions. The
/// vocabulary is rebuilt from the training split so test-only tokens map
/// to the unknown index.
fn run_repeat(
    corpus: &SessionCorpus,
    config: &HeninConfig,
    plan: &ExperimentPlan,
    seed: u64,
) -> Result<RepeatRun> {
    let (train, test) = split_corpus(corpus, plan.split_fraction, plan.stratified, seed)?;
    if !test.iter().any(|&p| corpus.sessions[p].label == 1)
        || !train.iter().any(|&p| corpus.sessions[p].label == 1)
    {
        return Err(HeninError::InvalidArgument(
            "a split side is missing the positive class".into(),
        ));
    }
    let mut prepared = corpus.clone();
    prepared.rebuild_vocabulary(&train, prepared.preprocess.min_token_freq);
    let config = HeninConfig {
        seed,
        ..config.clone()
    };
    let (model, _log) = HeninModel::train(&prepared, &config, &train)?;
    let predictions = model.predict_positions(&prepared, &test)?;
    let predicted: Vec<u8> = predictions.iter().map(|p| p.label_hat).collect();
    let labels: Vec<u8> = test.iter().map(|&p| prepared.sessions[p].label).collect();
    let metrics = classification_metrics(&predicted, &labels)?;
    Ok(RepeatRun {
        model,
        prepared,
        test,
        predictions,
        metrics,
    })
}

/// Precision among the 10 test sessions with the highest predicted
/// probability.
pub fn precision_at_10_sessions(predictions: &[Prediction], labels: &[u8]) -> f64 {
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| {
        predictions[b]
            .probability
            .partial_cmp(&predictions[a].probability)
            .unwrap()
    });
    let top = order.len().min(10);
    if top == 0 {
        return 0.0;
    }
    let hits = order[..top].iter().filter(|&&i| labels[i] == 1).count();
    hits as f64 / top as f64
}

fn metrics_row(
    model: &str,
    parameter: &str,
    value: &str,
    repeat: &str,
    seed: &str,
    m: &MetricsReport,
    precision_at_10: Option<f64>,
) -> MetricsRow {
    MetricsRow {
        model: model.into(),
        parameter: parameter.into(),
        value: value.into(),
        repeat: repeat.into(),
        seed: seed.into(),
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        tp: Some(m.tp),
        fp: Some(m.fp),
        tn: Some(m.tn),
        fn_: Some(m.fn_),
        precision_at_10,
    }
}

/// Append a "mean" row averaging the given per-repeat rows.
fn push_mean_row(rows: &mut Vec<MetricsRow>, per_repeat: &[MetricsRow]) {
    let n = per_repeat.len() as f64;
    let mean = |f: fn(&MetricsRow) -> f64| per_repeat.iter().map(f).sum::<f64>() / n;
    let p10 = if per_repeat.iter().all(|r| r.precision_at_10.is_some()) {
        Some(per_repeat.iter().filter_map(|r| r.precision_at_10).sum::<f64>() / n)
    } else {
        None
    };
    let first = &per_repeat[0];
    rows.push(MetricsRow {
        model: first.model.clone(),
        parameter: first.parameter.clone(),
        value: first.value.clone(),
        repeat: "mean".into(),
        seed: String::new(),
        accuracy: mean(|r| r.accuracy),
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        f1: mean(|r| r.f1),
        tp: None,
        fp: None,
        tn: None,
        fn_: None,
        precision_at_10: p10,
    });
}

fn run_model_comparison(plan: &ExperimentPlan, corpus: &SessionCorpus) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for (model_name, architecture) in [
        ("henin", Architecture::Henin),
        ("gru_attention", Architecture::GruAttention),
    ] {
        let config = HeninConfig {
            architecture,
            ..plan.config.clone()
        };
        let mut per_repeat = Vec::new();
        for (r, &seed) in plan.effective_seeds().iter().enumerate() {
            let run = run_repeat(corpus, &config, plan, seed)?;
            per_repeat.push(metrics_row(
                model_name,
                "",
                "",
                &r.to_string(),
                &seed.to_string(),
                &run.metrics,
                None,
            ));
        }
        rows.extend(per_repeat.clone());
        push_mean_row(&mut rows, &per_repeat);
    }
    Ok(rows)
}

fn run_ablation(plan: &ExperimentPlan, corpus: &SessionCorpus) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for variant in ABLATION_VARIANTS {
        let config = plan.config.ablation(variant)?;
        let mut per_repeat = Vec::new();
        for (r, &seed) in plan.effective_seeds().iter().enumerate() {
            let run = run_repeat(corpus, &config, plan, seed)?;
            per_repeat.push(metrics_row(
                variant,
                "",
                "",
                &r.to_string(),
                &seed.to_string(),
                &run.metrics,
                None,
            ));
        }
        rows.extend(per_repeat.clone());
        push_mean_row(&mut rows, &per_repeat);
    }
    Ok(rows)
}

fn truncated_corpus(corpus: &SessionCorpus, positions: &[usize], fraction: f64) -> Result<SessionCorpus> {
    let mut out = corpus.clone();
    for &pos in positions {
        out.sessions[pos] = truncate_by_fraction(&out.sessions[pos], fraction)?;
    }
    out.user_index = SessionCorpus::build_user_index(&out.sessions);
    Ok(out)
}

fn run_early_detection(plan: &ExperimentPlan, corpus: &SessionCorpus) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    let all: Vec<usize> = (0..corpus.num_sessions()).collect();
    for &fraction in &plan.fractions {
        let mut per_repeat = Vec::new();
        for (r, &seed) in plan.effective_seeds().iter().enumerate() {
            let (metrics, p10) = if plan.retrain_per_fraction {
                // the model only ever sees the earliest fraction of every
                // session, at train and test time alike
                let cut = truncated_corpus(corpus, &all, fraction)?;
                let run = run_repeat(&cut, &plan.config, plan, seed)?;
                let labels: Vec<u8> =
                    run.test.iter().map(|&p| cut.sessions[p].label).collect();
                (
                    run.metrics,
                    precision_at_10_sessions(&run.predictions, &labels),
                )
            } else {
                // train once on full sessions, truncate only at test time
                let run = run_repeat(corpus, &plan.config, plan, seed)?;
                let cut = truncated_corpus(&run.prepared, &run.test, fraction)?;
                let mut model = run.model;
                model.rebind_graphs(&cut)?;
                let predictions = model.predict_positions(&cut, &run.test)?;
                let predicted: Vec<u8> = predictions.iter().map(|p| p.label_hat).collect();
                let labels: Vec<u8> =
                    run.test.iter().map(|&p| cut.sessions[p].label).collect();
                (
                    classification_metrics(&predicted, &labels)?,
                    precision_at_10_sessions(&predictions, &labels),
                )
            };
            per_repeat.push(metrics_row(
                "henin",
                "fraction",
                &format!("{fraction}"),
                &r.to_string(),
                &seed.to_string(),
                &metrics,
                Some(p10),
            ));
        }
        rows.extend(per_repeat.clone());
        push_mean_row(&mut rows, &per_repeat);
    }
    Ok(rows)
}

fn run_explainability(
    plan: &ExperimentPlan,
    corpus: &SessionCorpus,
    ratings: &GroundTruthRatings,
) -> Result<Vec<ExplainRow>> {
    let mut rows = Vec::new();
    for (model_name, architecture, source) in [
        ("henin", Architecture::Henin, plan.ranking_source),
        (
            "gru_attention",
            Architecture::GruAttention,
            RankingSource::Baseline,
        ),
    ] {
        let config = HeninConfig {
            architecture,
            ..plan.config.clone()
        };
        let mut per_repeat: Vec<ExplainRow> = Vec::new();
        for (r, &seed) in plan.effective_seeds().iter().enumerate() {
            let run = run_repeat(corpus, &config, plan, seed)?;
            let mut ndcg_sum = 0.0;
            let mut prec_sum = 0.0;
            let mut scored = 0usize;
            for &pos in &run.test {
                let session = &run.prepared.sessions[pos];
                if session.label != 1 || session.comments.is_empty() {
                    continue;
                }
                let scores =
                    run.model
                        .comment_scores(&run.prepared, &session.session_id, source)?;
                let ranking = rank_comments(session, &scores, source)?;
                ndcg_sum += ndcg_at_k(&ranking, ratings, plan.ndcg_k)?;
                prec_sum +=
                    precision_at_k(&ranking, ratings, plan.ndcg_k, plan.relevance_threshold)?;
                scored += 1;
            }
            if scored == 0 {
                return Err(HeninError::InvalidArgument(
                    "no positive test sessions to score explanations on".into(),
                ));
            }
            per_repeat.push(ExplainRow {
                model: model_name.into(),
                repeat: r.to_string(),
                seed: seed.to_string(),
                ndcg: ndcg_sum / scored as f64,
                precision_at_k: prec_sum / scored as f64,
                sessions_scored: scored,
            });
        }
        let n = per_repeat.len() as f64;
        let mean = ExplainRow {
            model: model_name.into(),
            repeat: "mean".into(),
            seed: String::new(),
            ndcg: per_repeat.iter().map(|r| r.ndcg).sum::<f64>() / n,
            precision_at_k: per_repeat.iter().map(|r| r.precision_at_k).sum::<f64>() / n,
            sessions_scored: per_repeat.iter().map(|r| r.sessions_scored).sum(),
        };
        rows.extend(per_repeat);
        rows.push(mean);
    }
    Ok(rows)
}

fn run_gcn_sweep(
    plan: &ExperimentPlan,
    corpus: &SessionCorpus,
    sweep_layers: bool,
) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    let cells: Vec<(String, HeninConfig)> = if sweep_layers {
        [1usize, 2, 3]
            .iter()
            .map(|&k| {
                (
                    k.to_string(),
                    HeninConfig {
                        gcn_layers: k,
                        ..plan.config.clone()
                    },
                )
            })
            .collect()
    } else {
        SimilarityMeasure::ALL
            .iter()
            .map(|&m| {
                (
                    m.to_string(),
                    HeninConfig {
                        similarity: m,
                        ..plan.config.clone()
                    },
                )
            })
            .collect()
    };
    let parameter = if sweep_layers { "layers" } else { "similarity" };
    for (value, config) in cells {
        let mut per_repeat = Vec::new();
        for (r, &seed) in plan.effective_seeds().iter().enumerate() {
            let run = run_repeat(corpus, &config, plan, seed)?;
            per_repeat.push(metrics_row(
                "henin",
                parameter,
                &value,
                &r.to_string(),
                &seed.to_string(),
                &run.metrics,
                None,
            ));
        }
        rows.extend(per_repeat.clone());
        push_mean_row(&mut rows, &per_repeat);
    }
    Ok(rows)
}

/// Execute a plan. `ratings` is required for explainability plans.
pub fn run_experiment(
    plan: &ExperimentPlan,
    corpus: &SessionCorpus,
    ratings: Option<&GroundTruthRatings>,
) -> Result<ReportBundle> {
    plan.validate()?;
    let mut bundle = ReportBundle::default();
    match plan.kind {
        ExperimentKind::Main => bundle.metrics = run_model_comparison(plan, corpus)?,
        ExperimentKind::Ablation => bundle.ablation = run_ablation(plan, corpus)?,
        ExperimentKind::EarlyDetection => {
            bundle.early_detection = run_early_detection(plan, corpus)?
        }
        ExperimentKind::Explainability => {
            let ratings = ratings.ok_or_else(|| {
                HeninError::InvalidArgument(
                    "explainability plans need ground-truth ratings".into(),
                )
            })?;
            bundle.explainability = run_explainability(plan, corpus, ratings)?
        }
        ExperimentKind::GcnLayers => bundle.gcn_sweep = run_gcn_sweep(plan, corpus, true)?,
        ExperimentKind::GcnSimilarity => bundle.gcn_sweep = run_gcn_sweep(plan, corpus, false)?,
    }
    bundle.meta = Some(RunMeta {
        kind: plan.kind,
        repeats: plan.repeats,
        split_fraction: plan.split_fraction,
        seeds: plan.effective_seeds(),
        stratified: plan.stratified,
        retrain_per_fraction: plan.retrain_per_fraction,
        fractions: plan.fractions.clone(),
        ndcg_k: plan.ndcg_k,
        config: plan.config.clone(),
        num_sessions: corpus.num_sessions(),
        version: env!("CARGO_PKG_VERSION").into(),
    });
    Ok(bundle)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| HeninError::InvalidArgument(format!("csv write: {e}")))?;
    }
    writer.flush()?;
    Ok(())
}

/// Emit the bundle's populated tables plus `run_meta.json` into `dir`.
pub fn write_bundle(bundle: &ReportBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    if !bundle.metrics.is_empty() {
        write_csv(&dir.join("metrics.csv"), &bundle.metrics)?;
    }
    if !bundle.ablation.is_empty() {
        write_csv(&dir.join("ablation.csv"), &bundle.ablation)?;
    }
    if !bundle.early_detection.is_empty() {
        write_csv(&dir.join("early_detection.csv"), &bundle.early_detection)?;
    }
    if !bundle.gcn_sweep.is_empty() {
        write_csv(&dir.join("gcn_sweep.csv"), &bundle.gcn_sweep)?;
    }
    if !bundle.explainability.is_empty() {
        write_csv(&dir.join("explainability.csv"), &bundle.explainability)?;
    }
    if let Some(meta) = &bundle.meta {
        let json = serde_json::to_string_pretty(meta)
            .map_err(|e| HeninError::InvalidArgument(format!("meta serialization: {e}")))?;
        std::fs::write(dir.join("run_meta.json"), json)?;
    }
    Ok(())
}
