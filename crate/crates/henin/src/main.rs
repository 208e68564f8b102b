//! Command-line entry points: synthetic corpus generation, training,
//! evaluation plans, per-session explanation reports, and graph dumps.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use henin::data::{
    generate_synthetic_records, load_corpus, load_ratings, PreprocessConfig, SessionCorpus,
    SyntheticSpec,
};
use henin::eval::{run_experiment, write_bundle, ExperimentPlan};
use henin::explain::{rank_comments, RankingSource};
use henin::graph::{build_post_graph, build_session_graph, GraphSpec, SimilarityMeasure};
use henin::model::{HeninConfig, HeninModel};
use henin::{HeninError, Result};

#[derive(Parser)]
#[command(name = "henin", about = "Explainable cyberbullying session detection", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted evidence comments.
    Synth {
        /// TOML generator settings; defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output corpus JSON.
        #[arg(long)]
        out: PathBuf,
        /// Output ground-truth explainability ratings JSON.
        #[arg(long)]
        ratings: Option<PathBuf>,
    },
    /// Train a model on every session of a corpus and write a checkpoint.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// TOML with optional [model] and [preprocess] tables.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment plan and write its report tables.
    Evaluate {
        /// TOML experiment plan.
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth ratings JSON (required for explainability plans).
        #[arg(long)]
        ratings: Option<PathBuf>,
    },
    /// Emit a ranked-comment explanation report for one session.
    Explain {
        #[arg(long)]
        session: String,
        /// Checkpoint directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Same config file the model was trained with (for preprocessing).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SourceArg::SentenceAttention)]
        source: SourceArg,
        /// Output JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump a similarity graph as an edge-list CSV (i, j, weight).
    GraphDump {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = GraphKind::Session)]
        kind: GraphKind,
        #[arg(long, default_value = "cosine", value_parser = parse_measure)]
        measure: SimilarityMeasure,
        /// Checkpoint directory providing the embedding table (post graph).
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    SentenceAttention,
    Coattention,
    Baseline,
}

impl From<SourceArg> for RankingSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::SentenceAttention => RankingSource::SentenceAttention,
            SourceArg::Coattention => RankingSource::Coattention,
            SourceArg::Baseline => RankingSource::Baseline,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKind {
    Session,
    Post,
}

fn parse_measure(s: &str) -> std::result::Result<SimilarityMeasure, String> {
    s.parse::<SimilarityMeasure>().map_err(|e| e.to_string())
}

/// Training configuration file: model hyperparameters plus preprocessing.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct TrainConfigFile {
    model: HeninConfig,
    preprocess: PreprocessConfig,
}

fn read_train_config(path: Option<&PathBuf>) -> Result<TrainConfigFile> {
    match path {
        None => Ok(TrainConfigFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str(&text).map_err(|e| HeninError::Config(e.to_string()))
        }
    }
}

#[derive(Serialize)]
struct ExplainEntry {
    rank: usize,
    comment_id: String,
    author_id: String,
    timestamp: i64,
    score: f64,
    text: String,
}

#[derive(Serialize)]
struct ExplainReport {
    session_id: String,
    source: RankingSource,
    probability: f64,
    label_hat: u8,
    comments: Vec<ExplainEntry>,
}

fn dump_graph(graph: &GraphSpec, out: &PathBuf, corpus: &SessionCorpus) -> Result<()> {
    let mut writer = csv::Writer::from_path(out)?;
    writer.write_record(["i", "j", "weight", "session_i", "session_j"])?;
    for (i, j, w) in graph.edges() {
        writer.write_record([
            i.to_string(),
            j.to_string(),
            w.to_string(),
            corpus.sessions[i].session_id.clone(),
            corpus.sessions[j].session_id.clone(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { spec, out, ratings } => {
            let spec: SyntheticSpec = match spec {
                None => SyntheticSpec::default(),
                Some(p) => {
                    let text = std::fs::read_to_string(p)?;
                    toml::from_str(&text).map_err(|e| HeninError::Config(e.to_string()))?
                }
            };
            let (records, ground_truth) = generate_synthetic_records(&spec)?;
            let json = serde_json::to_string_pretty(&records)
                .map_err(|e| HeninError::Config(e.to_string()))?;
            std::fs::write(&out, json)?;
            eprintln!("wrote {} sessions to {}", records.len(), out.display());
            if let Some(ratings_path) = ratings {
                let json = serde_json::to_string_pretty(&ground_truth)
                    .map_err(|e| HeninError::Config(e.to_string()))?;
                std::fs::write(&ratings_path, json)?;
                eprintln!("wrote ratings to {}", ratings_path.display());
            }
            Ok(())
        }
        Command::Train { corpus, config, out } => {
            let file = read_train_config(config.as_ref())?;
            let corpus = load_corpus(&corpus, file.preprocess)?;
            let positions: Vec<usize> = (0..corpus.num_sessions()).collect();
            let (model, log) = HeninModel::train(&corpus, &file.model, &positions)?;
            model.save(&out)?;
            let log_json = serde_json::to_string_pretty(&log)
                .map_err(|e| HeninError::Config(e.to_string()))?;
            std::fs::write(out.join("training_log.json"), log_json)?;
            let last = log.epochs.last().expect("at least one epoch");
            eprintln!(
                "trained {} epochs (final loss {:.4}, train accuracy {:.3}); checkpoint in {}",
                log.epochs.len(),
                last.mean_loss,
                last.train_accuracy,
                out.display()
            );
            Ok(())
        }
        Command::Evaluate {
            plan,
            corpus,
            out,
            ratings,
        } => {
            let text = std::fs::read_to_string(&plan)?;
            let plan = ExperimentPlan::from_toml(&text)?;
            let corpus = load_corpus(&corpus, plan.preprocess)?;
            let ratings = match ratings {
                Some(p) => Some(load_ratings(&p)?),
                None => None,
            };
            let bundle = run_experiment(&plan, &corpus, ratings.as_ref())?;
            write_bundle(&bundle, &out)?;
            eprintln!("reports written to {}", out.display());
            Ok(())
        }
        Command::Explain {
            session,
            model,
            corpus,
            config,
            source,
            out,
        } => {
            let file = read_train_config(config.as_ref())?;
            let corpus = load_corpus(&corpus, file.preprocess)?;
            let model = HeninModel::load(&model)?;
            let source: RankingSource = source.into();
            let prediction = model.predict(&corpus, &session)?;
            let scores = model.comment_scores(&corpus, &session, source)?;
            let sess = corpus.session_by_id(&session)?;
            let ranking = rank_comments(sess, &scores, source)?;
            let comments = ranking
                .entries
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let c = sess
                        .comments
                        .iter()
                        .find(|c| c.comment_id == e.comment_id)
                        .expect("ranking ids come from this session");
                    ExplainEntry {
                        rank: i + 1,
                        comment_id: e.comment_id.clone(),
                        author_id: c.author_id.clone(),
                        timestamp: e.timestamp,
                        score: e.score,
                        text: c.raw_text.clone(),
                    }
                })
                .collect();
            let report = ExplainReport {
                session_id: session,
                source,
                probability: prediction.probability,
                label_hat: prediction.label_hat,
                comments,
            };
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| HeninError::Config(e.to_string()))?;
            match out {
                Some(p) => std::fs::write(p, json)?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::GraphDump {
            corpus,
            out,
            kind,
            measure,
            model,
        } => {
            let corpus = load_corpus(&corpus, PreprocessConfig::default())?;
            let graph = match kind {
                GraphKind::Session => build_session_graph(&corpus, measure)?,
                GraphKind::Post => {
                    let model = model.ok_or_else(|| {
                        HeninError::InvalidArgument(
                            "--model is required for post-graph dumps (embedding table)".into(),
                        )
                    })?;
                    let model = HeninModel::load(&model)?;
                    build_post_graph(&corpus, model.params.get("embed")?, measure)?
                }
            };
            dump_graph(&graph, &out, &corpus)?;
            eprintln!("edge list written to {}", out.display());
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
