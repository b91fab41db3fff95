//! Command-line front end for the summarization pipeline.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 backend error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use propsum::corpus::{load_corpus, Topic};
use propsum::pipeline::ablation::run_ablation_suite;
use propsum::pipeline::oracles::{
    oracle_cluster_ranking, oracle_cluster_representatives, oracle_greedy_units,
};
use propsum::pipeline::reports::{abstractiveness_report, evaluate_summary, evidence_report};
use propsum::pipeline::tune::{tune, TuneParam};
use propsum::pipeline::{
    persist_run, run_pipeline, stage_clusters, topic_seed, BackendRegistry, Mode, PipelineConfig,
    PipelineError, RunArtifact, Unit,
};
use propsum::propositions::{
    extract_propositions, extract_reference_propositions, ExtractionBackend, PassthroughBackend,
};
use propsum::ranking::RankingConfig;
use propsum::rouge::RougeScore;
use propsum::salience::{balance_training_set, build_training_records, derive_salience_labels};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UnitArg {
    Proposition,
    Sentence,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Abstractive,
    Extractive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleKind {
    Prop,
    Sent,
    ClusterRep,
    Ranking,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TuneParamArg {
    Tau,
    ClusterThreshold,
}

#[derive(Debug, Parser)]
#[command(
    name = "propsum",
    version,
    about = "Proposition-level multi-document summarization"
)]
struct Cli {
    /// TOML config file mirroring the pipeline configuration; defaults
    /// apply when omitted. CLI flags below override config keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    unit: Option<UnitArg>,

    #[arg(long, global = true)]
    mode: Option<ModeArg>,

    #[arg(long, global = true)]
    salience_tau: Option<f64>,

    #[arg(long, global = true)]
    cluster_threshold: Option<f64>,

    #[arg(long, global = true)]
    max_clusters: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Persistent similarity score cache (simcache.jsonl).
    #[arg(long, global = true)]
    sim_cache: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full pipeline and persist artifacts per topic.
    Run {
        #[arg(long)]
        corpus: PathBuf,
        /// Root directory for run artifacts (runs/<config_hash>/<topic>/).
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Only process this topic id.
        #[arg(long)]
        topic: Option<String>,
    },
    /// Derive gold salience labels and a balanced training set.
    DeriveSalienceLabels {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive fusion training pairs from reference summaries.
    DeriveFusionData {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute extractive upper bounds.
    Oracle {
        #[arg(long, value_enum)]
        kind: OracleKind,
        #[arg(long)]
        corpus: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score persisted run summaries against the references.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        /// A runs/<config_hash> directory produced by `run`.
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the partial-pipeline ladder report.
    Ablate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print per-bullet evidence for persisted runs.
    ReportEvidence {
        /// A runs/<config_hash> directory produced by `run`.
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long)]
        topic: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid-search a threshold by full-pipeline ROUGE.
    Tune {
        #[arg(long, value_enum)]
        param: TuneParamArg,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn effective_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_toml_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(unit) = cli.unit {
        cfg.unit = match unit {
            UnitArg::Proposition => Unit::Proposition,
            UnitArg::Sentence => Unit::Sentence,
        };
    }
    if let Some(mode) = cli.mode {
        cfg.mode = match mode {
            ModeArg::Abstractive => Mode::Abstractive,
            ModeArg::Extractive => Mode::Extractive,
        };
    }
    if let Some(tau) = cli.salience_tau {
        cfg.salience_tau = tau;
    }
    if let Some(threshold) = cli.cluster_threshold {
        cfg.clustering.distance_threshold = threshold;
    }
    if let Some(max_clusters) = cli.max_clusters {
        cfg.ranking = RankingConfig {
            max_clusters,
            ..cfg.ranking
        };
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_topics(path: &Path) -> Result<Vec<Topic>, PipelineError> {
    load_corpus(path).map_err(|e| PipelineError::Data(e.to_string()))
}

fn emit_report<T: Serialize>(report: &T, out: Option<&Path>) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, json)?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn write_jsonl_file<T: Serialize>(
    path: &Path,
    items: impl IntoIterator<Item = T>,
) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    for item in items {
        serde_json::to_writer(&mut f, &item).map_err(std::io::Error::other)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

/// The extraction backend honoring the granularity flag: sentence
/// granularity always means passthrough.
fn unit_extractor<'a>(
    cfg: &PipelineConfig,
    registry: &'a BackendRegistry,
    passthrough: &'a PassthroughBackend,
) -> &'a dyn ExtractionBackend {
    match cfg.unit {
        Unit::Proposition => registry.extraction.as_ref(),
        Unit::Sentence => passthrough,
    }
}

#[derive(Serialize)]
struct RunReportRow {
    topic_id: String,
    summary: String,
    scores: BTreeMap<String, RougeScore>,
    abstractiveness: propsum::pipeline::reports::AbstractivenessReport,
    bullets: usize,
    log: Vec<String>,
}

fn cmd_run(
    cfg: &PipelineConfig,
    corpus: &Path,
    out: &Path,
    only_topic: Option<&str>,
    sim_cache: Option<&Path>,
) -> Result<(), PipelineError> {
    let registry = BackendRegistry::from_config(cfg)?;
    let topics = load_topics(corpus)?;
    let selected: Vec<&Topic> = topics
        .iter()
        .filter(|t| only_topic.is_none_or(|id| t.topic_id == id))
        .collect();
    if selected.is_empty() {
        return Err(PipelineError::Data(match only_topic {
            Some(id) => format!("topic {id} not found in {}", corpus.display()),
            None => format!("no topics in {}", corpus.display()),
        }));
    }
    let mut rows = Vec::new();
    for topic in selected {
        let output = run_pipeline(topic, cfg, &registry, sim_cache)?;
        let dir = persist_run(&output, out)?;
        let summary = output.artifact.summary_text();
        let scores = evaluate_summary(
            &output.artifact.concatenated(),
            &topic.reference_texts(),
            &cfg.rouge,
        )
        .map_err(|e| PipelineError::Data(e.to_string()))?;
        eprintln!(
            "topic {}: {} bullets, R1 {:.4} -> {}",
            topic.topic_id,
            output.artifact.bullets.len(),
            scores["rouge-1"].f1,
            dir.display()
        );
        rows.push(RunReportRow {
            topic_id: topic.topic_id.clone(),
            abstractiveness: abstractiveness_report(&summary, topic),
            summary,
            scores,
            bullets: output.artifact.bullets.len(),
            log: output.artifact.log.clone(),
        });
    }
    let report_path = out.join(cfg.config_hash()).join("report.json");
    emit_report(&rows, Some(&report_path))
}

#[derive(Serialize)]
struct LabelRecord<'a> {
    topic_id: &'a str,
    prop_id: &'a str,
    label: u8,
}

fn cmd_derive_salience_labels(
    cfg: &PipelineConfig,
    corpus: &Path,
    out: &Path,
) -> Result<(), PipelineError> {
    let registry = BackendRegistry::from_config(cfg)?;
    let topics = load_topics(corpus)?;
    fs::create_dir_all(out)?;
    let passthrough = PassthroughBackend;
    let mut label_records: Vec<(String, String, u8)> = Vec::new();
    let mut train_records = Vec::new();
    for topic in &topics {
        let extractor = unit_extractor(cfg, &registry, &passthrough);
        let props = extract_propositions(topic, extractor).map_err(|e| PipelineError::Backend {
            stage: "extraction".into(),
            topic_id: topic.topic_id.clone(),
            message: e.to_string(),
        })?;
        let labels = derive_salience_labels(topic, &props, &cfg.rouge)
            .map_err(|e| PipelineError::Data(e.to_string()))?;
        for id in &labels.positives {
            label_records.push((topic.topic_id.clone(), id.clone(), 1));
        }
        for id in &labels.negatives {
            label_records.push((topic.topic_id.clone(), id.clone(), 0));
        }
        let balanced = balance_training_set(&labels, topic_seed(cfg.seed, &topic.topic_id));
        train_records.extend(build_training_records(
            topic,
            &props,
            &balanced,
            &cfg.delimiters,
            propsum::salience::DEFAULT_TOKEN_BUDGET,
        ));
    }
    write_jsonl_file(
        &out.join("salience_labels.jsonl"),
        label_records
            .iter()
            .map(|(topic_id, prop_id, label)| LabelRecord {
                topic_id,
                prop_id,
                label: *label,
            }),
    )?;
    write_jsonl_file(&out.join("salience_train.jsonl"), &train_records)?;
    eprintln!(
        "wrote {} labels and {} training instances to {}",
        label_records.len(),
        train_records.len(),
        out.display()
    );
    Ok(())
}

fn cmd_derive_fusion_data(
    cfg: &PipelineConfig,
    corpus: &Path,
    out: &Path,
    sim_cache: Option<&Path>,
) -> Result<(), PipelineError> {
    let registry = BackendRegistry::from_config(cfg)?;
    let topics = load_topics(corpus)?;
    fs::create_dir_all(out)?;
    let passthrough = PassthroughBackend;
    let mut records = Vec::new();
    for topic in &topics {
        let staged = stage_clusters(topic, cfg, &registry, sim_cache)?;
        let extractor = unit_extractor(cfg, &registry, &passthrough);
        let ref_props = extract_reference_propositions(topic, extractor).map_err(|e| {
            PipelineError::Backend {
                stage: "extraction".into(),
                topic_id: topic.topic_id.clone(),
                message: e.to_string(),
            }
        })?;
        let examples = propsum::fusion::derive_fusion_targets(
            &staged.ranked,
            &topic.references,
            &ref_props,
            registry.similarity.as_ref(),
        )
        .map_err(|e| PipelineError::Backend {
            stage: "fusion-targets".into(),
            topic_id: topic.topic_id.clone(),
            message: e.to_string(),
        })?;
        for example in &examples {
            records.push(
                propsum::fusion::FusionTrainRecord::from_example(example, &cfg.prop_separator)
                    .map_err(|e| PipelineError::Data(e.to_string()))?,
            );
        }
    }
    write_jsonl_file(&out.join("fusion_train.jsonl"), &records)?;
    eprintln!("wrote {} fusion pairs to {}", records.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct OracleRow {
    topic_id: String,
    selected_prop_ids: Vec<String>,
    summary: String,
    scores: BTreeMap<String, RougeScore>,
}

fn cmd_oracle(
    cfg: &PipelineConfig,
    kind: OracleKind,
    corpus: &Path,
    out: Option<&Path>,
    sim_cache: Option<&Path>,
) -> Result<(), PipelineError> {
    let registry = BackendRegistry::from_config(cfg)?;
    let topics = load_topics(corpus)?;
    let passthrough = PassthroughBackend;
    let mut rows = Vec::new();
    let mut macro_f1: BTreeMap<String, f64> = BTreeMap::new();
    for topic in &topics {
        let references = topic.reference_texts();
        let selected = match kind {
            OracleKind::Prop | OracleKind::Sent => {
                let extractor: &dyn ExtractionBackend = match kind {
                    OracleKind::Prop => unit_extractor(cfg, &registry, &passthrough),
                    _ => &passthrough,
                };
                let units =
                    extract_propositions(topic, extractor).map_err(|e| PipelineError::Backend {
                        stage: "extraction".into(),
                        topic_id: topic.topic_id.clone(),
                        message: e.to_string(),
                    })?;
                oracle_greedy_units(topic, &units, &cfg.rouge)?
            }
            OracleKind::ClusterRep => {
                let staged = stage_clusters(topic, cfg, &registry, sim_cache)?;
                oracle_cluster_representatives(&staged.ranked, &references, &cfg.rouge)?
            }
            OracleKind::Ranking => {
                let staged = stage_clusters(topic, cfg, &registry, sim_cache)?;
                oracle_cluster_ranking(&staged.ranked, &references, &cfg.rouge)?
            }
        };
        let summary = selected
            .iter()
            .map(|p| p.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let scores = evaluate_summary(&summary, &references, &cfg.rouge)
            .map_err(|e| PipelineError::Data(e.to_string()))?;
        for (metric, score) in &scores {
            *macro_f1.entry(metric.clone()).or_insert(0.0) += score.f1;
        }
        rows.push(OracleRow {
            topic_id: topic.topic_id.clone(),
            selected_prop_ids: selected.iter().map(|p| p.prop_id.clone()).collect(),
            summary,
            scores,
        });
    }
    for value in macro_f1.values_mut() {
        *value /= topics.len().max(1) as f64;
    }
    #[derive(Serialize)]
    struct OracleReport {
        kind: String,
        topics: Vec<OracleRow>,
        macro_f1: BTreeMap<String, f64>,
    }
    let kind_name = match kind {
        OracleKind::Prop => "prop",
        OracleKind::Sent => "sent",
        OracleKind::ClusterRep => "cluster-rep",
        OracleKind::Ranking => "ranking",
    };
    emit_report(
        &OracleReport {
            kind: kind_name.to_string(),
            topics: rows,
            macro_f1,
        },
        out,
    )
}

#[derive(Serialize)]
struct EvalRow {
    topic_id: String,
    scores: BTreeMap<String, RougeScore>,
}

fn cmd_eval(
    cfg: &PipelineConfig,
    corpus: &Path,
    run_dir: &Path,
    out: Option<&Path>,
) -> Result<(), PipelineError> {
    let topics = load_topics(corpus)?;
    let mut rows = Vec::new();
    let mut macro_f1: BTreeMap<String, f64> = BTreeMap::new();
    for topic in &topics {
        let summary_path = run_dir.join(&topic.topic_id).join("summary.txt");
        if !summary_path.exists() {
            continue;
        }
        let raw = fs::read_to_string(&summary_path)?;
        let concatenated = raw
            .lines()
            .map(|l| l.strip_prefix("- ").unwrap_or(l))
            .collect::<Vec<_>>()
            .join(" ");
        let scores = evaluate_summary(&concatenated, &topic.reference_texts(), &cfg.rouge)
            .map_err(|e| PipelineError::Data(e.to_string()))?;
        for (metric, score) in &scores {
            *macro_f1.entry(metric.clone()).or_insert(0.0) += score.f1;
        }
        rows.push(EvalRow {
            topic_id: topic.topic_id.clone(),
            scores,
        });
    }
    if rows.is_empty() {
        return Err(PipelineError::Data(format!(
            "no summaries under {} match the corpus topics",
            run_dir.display()
        )));
    }
    for value in macro_f1.values_mut() {
        *value /= rows.len() as f64;
    }
    #[derive(Serialize)]
    struct EvalReport {
        topics: Vec<EvalRow>,
        macro_f1: BTreeMap<String, f64>,
    }
    emit_report(
        &EvalReport {
            topics: rows,
            macro_f1,
        },
        out,
    )
}

fn cmd_report_evidence(
    run_dir: &Path,
    only_topic: Option<&str>,
    out: Option<&Path>,
) -> Result<(), PipelineError> {
    let entries = fs::read_dir(run_dir).map_err(|e| {
        PipelineError::Data(format!("cannot read run dir {}: {e}", run_dir.display()))
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut reports = Vec::new();
    for dir in dirs {
        let topic_id = dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        if only_topic.is_some_and(|id| id != topic_id) {
            continue;
        }
        let artifact_path = dir.join("artifact.json");
        if !artifact_path.exists() {
            continue;
        }
        let artifact: RunArtifact = serde_json::from_str(&fs::read_to_string(&artifact_path)?)
            .map_err(|e| PipelineError::Data(format!("{}: {e}", artifact_path.display())))?;
        reports.push(evidence_report(&artifact));
    }
    if reports.is_empty() {
        return Err(PipelineError::Data(format!(
            "no run artifacts under {}",
            run_dir.display()
        )));
    }
    emit_report(&reports, out)
}

fn real_main() -> Result<(), PipelineError> {
    let cli = Cli::parse();
    let cfg = effective_config(&cli)?;
    let sim_cache = cli.sim_cache.clone();
    match &cli.command {
        Command::Run { corpus, out, topic } => {
            cmd_run(&cfg, corpus, out, topic.as_deref(), sim_cache.as_deref())
        }
        Command::DeriveSalienceLabels { corpus, out } => {
            cmd_derive_salience_labels(&cfg, corpus, out)
        }
        Command::DeriveFusionData { corpus, out } => {
            cmd_derive_fusion_data(&cfg, corpus, out, sim_cache.as_deref())
        }
        Command::Oracle { kind, corpus, out } => {
            cmd_oracle(&cfg, *kind, corpus, out.as_deref(), sim_cache.as_deref())
        }
        Command::Eval {
            corpus,
            run_dir,
            out,
        } => cmd_eval(&cfg, corpus, run_dir, out.as_deref()),
        Command::Ablate { corpus, out } => {
            let registry = BackendRegistry::from_config(&cfg)?;
            let topics = load_topics(corpus)?;
            let report = run_ablation_suite(&topics, &cfg, &registry, sim_cache.as_deref())?;
            emit_report(&report, out.as_deref())
        }
        Command::ReportEvidence {
            run_dir,
            topic,
            out,
        } => cmd_report_evidence(run_dir, topic.as_deref(), out.as_deref()),
        Command::Tune { param, corpus, out } => {
            let registry = BackendRegistry::from_config(&cfg)?;
            let topics = load_topics(corpus)?;
            let param = match param {
                TuneParamArg::Tau => TuneParam::Tau,
                TuneParamArg::ClusterThreshold => TuneParam::ClusterThreshold,
            };
            let report = tune(&topics, &cfg, param, &registry, sim_cache.as_deref())?;
            emit_report(&report, out.as_deref())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(match real_main() {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    });
}
