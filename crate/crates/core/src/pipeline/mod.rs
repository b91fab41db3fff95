//! End-to-end orchestration: configuration, backend registry, the staged
//! pipeline run, summary assembly, and run-artifact persistence.
//!
//! A run proceeds extraction -> salience scoring -> threshold filter ->
//! pairwise similarity -> clustering -> feature ranking -> fusion (or
//! extractive selection) -> assembly. Every stage's intermediate output is
//! kept on the run output and persisted under `runs/<config_hash>/<topic>/`
//! for debugging and reuse. Runs are deterministic: identical config and
//! seed produce byte-identical artifacts (timings are reported separately).

pub mod ablation;
pub mod oracles;
pub mod reports;
pub mod tune;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clustering::{self, Cluster, ClusteringConfig};
use crate::corpus::Topic;
use crate::fusion::{
    self, BulletMode, EchoGenerator, GeneratorBackend, SummaryBullet, DEFAULT_PROP_SEPARATOR,
};
use crate::propositions::{
    extract_propositions, ExtractionBackend, FixtureBackend, PassthroughBackend, Proposition,
};
use crate::ranking::{self, RankingConfig};
use crate::rouge::RougeConfig;
use crate::salience::{
    self, Delimiters, LexicalSalienceBackend, SalienceBackend, ScoredProposition,
};
use crate::similarity::{
    pairwise_similarity, LexicalSimilarityBackend, SimilarityBackend, SimilarityMatrix,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("backend error in stage {stage} (topic {topic_id}): {message}")]
    Backend {
        stage: String,
        topic_id: String,
        message: String,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// CLI exit code: 2 config, 3 data, 4 backend.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) | PipelineError::Io(_) => 3,
            PipelineError::Backend { .. } => 4,
        }
    }
}

/// Summarization granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Proposition,
    Sentence,
}

/// Output mode: fuse each cluster or extract a representative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Abstractive,
    Extractive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub unit: Unit,
    pub mode: Mode,
    /// Propositions scoring below this are dropped before clustering.
    pub salience_tau: f64,
    pub clustering: ClusteringConfig,
    pub ranking: RankingConfig,
    pub rouge: RougeConfig,
    /// role -> backend id; roles: extraction, salience, similarity,
    /// generator. The fixture extractor takes its file as `fixture:<path>`.
    pub backends: BTreeMap<String, String>,
    pub seed: u64,
    /// Delimiters for serialized salience training windows.
    pub delimiters: Delimiters,
    /// Separator literal between propositions in generator input.
    pub prop_separator: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mut backends = BTreeMap::new();
        backends.insert("extraction".to_string(), "passthrough".to_string());
        backends.insert("salience".to_string(), "lexical".to_string());
        backends.insert("similarity".to_string(), "lexical".to_string());
        backends.insert("generator".to_string(), "echo".to_string());
        Self {
            unit: Unit::Proposition,
            mode: Mode::Abstractive,
            salience_tau: 0.1,
            clustering: ClusteringConfig::default(),
            ranking: RankingConfig::default(),
            rouge: RougeConfig::default(),
            backends,
            seed: 0,
            delimiters: Delimiters::default(),
            prop_separator: DEFAULT_PROP_SEPARATOR.to_string(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(0.0..=1.0).contains(&self.salience_tau) || self.salience_tau.is_nan() {
            return Err(PipelineError::Config(format!(
                "salience_tau must be in [0,1], got {}",
                self.salience_tau
            )));
        }
        self.rouge
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.clustering
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.ranking
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.prop_separator.is_empty() {
            return Err(PipelineError::Config(
                "prop_separator must be non-empty".into(),
            ));
        }
        for role in ["extraction", "salience", "similarity", "generator"] {
            if !self.backends.contains_key(role) {
                return Err(PipelineError::Config(format!(
                    "missing backend role: {role}"
                )));
            }
        }
        Ok(())
    }

    /// Stable hash of the full configuration; names the run directory.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config is serializable");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex::encode(hasher.finalize())[..16].to_string()
    }

    pub fn from_toml_str(raw: &str) -> Result<Self, PipelineError> {
        let cfg: PipelineConfig =
            toml::from_str(raw).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let raw = fs::read_to_string(path.as_ref()).map_err(|e| {
            PipelineError::Config(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::from_toml_str(&raw)
    }
}

/// Instantiated backends for one run.
pub struct BackendRegistry {
    pub extraction: Box<dyn ExtractionBackend>,
    pub salience: Box<dyn SalienceBackend>,
    pub similarity: Box<dyn SimilarityBackend>,
    pub generator: Box<dyn GeneratorBackend>,
}

impl BackendRegistry {
    /// Resolve backend ids from the config. Known ids: extraction
    /// `passthrough` or `fixture:<path>`; salience `lexical`; similarity
    /// `lexical`; generator `echo`.
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let get = |role: &str| {
            cfg.backends
                .get(role)
                .cloned()
                .ok_or_else(|| PipelineError::Config(format!("missing backend role: {role}")))
        };
        let extraction: Box<dyn ExtractionBackend> = match get("extraction")?.as_str() {
            "passthrough" => Box::new(PassthroughBackend),
            id if id.starts_with("fixture:") => {
                let path = &id["fixture:".len()..];
                Box::new(
                    FixtureBackend::from_path(path)
                        .map_err(|e| PipelineError::Data(e.to_string()))?,
                )
            }
            other => {
                return Err(PipelineError::Config(format!(
                    "unknown extraction backend: {other}"
                )))
            }
        };
        let salience: Box<dyn SalienceBackend> = match get("salience")?.as_str() {
            "lexical" => Box::new(LexicalSalienceBackend),
            other => {
                return Err(PipelineError::Config(format!(
                    "unknown salience backend: {other}"
                )))
            }
        };
        let similarity: Box<dyn SimilarityBackend> = match get("similarity")?.as_str() {
            "lexical" => Box::new(LexicalSimilarityBackend),
            other => {
                return Err(PipelineError::Config(format!(
                    "unknown similarity backend: {other}"
                )))
            }
        };
        let generator: Box<dyn GeneratorBackend> = match get("generator")?.as_str() {
            "echo" => Box::new(EchoGenerator::new(cfg.prop_separator.clone())),
            id if id.starts_with("command:") => Box::new(
                fusion::CommandGenerator::from_spec(&id["command:".len()..])
                    .map_err(PipelineError::Config)?,
            ),
            other => {
                return Err(PipelineError::Config(format!(
                    "unknown generator backend: {other}"
                )))
            }
        };
        Ok(Self {
            extraction,
            salience,
            similarity,
            generator,
        })
    }
}

/// Everything one pipeline run produced for one topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub topic_id: String,
    /// Assembled summary bullets, in rank order, within the word limit.
    pub bullets: Vec<SummaryBullet>,
    /// The ranked clusters the bullets came from, features included.
    pub clusters: Vec<Cluster>,
    pub config_hash: String,
    /// Deterministic event log (fallbacks, empty-stage warnings).
    pub log: Vec<String>,
    /// Wall-clock stage timings in milliseconds. Not serialized: artifacts
    /// must be byte-identical across runs of the same config and seed.
    #[serde(skip)]
    pub stage_timings: BTreeMap<String, f64>,
}

impl RunArtifact {
    /// `summary.txt` content: one bullet per line, "- " prefixed.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        for bullet in &self.bullets {
            out.push_str("- ");
            out.push_str(&bullet.text);
            out.push('\n');
        }
        out
    }

    /// Bullets joined with single spaces, for scoring.
    pub fn concatenated(&self) -> String {
        self.bullets
            .iter()
            .map(|b| b.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Run output: the artifact plus all stage intermediates.
#[derive(Debug)]
pub struct RunOutput {
    pub artifact: RunArtifact,
    pub all_propositions: Vec<Proposition>,
    pub scored: Vec<ScoredProposition>,
    pub salient: Vec<ScoredProposition>,
    pub matrix: Option<SimilarityMatrix>,
    pub all_clusters: Vec<Cluster>,
}

/// Greedily append whole bullets while the running word total stays within
/// `limit`; the first bullet that would overflow stops assembly.
pub fn assemble_summary(bullets: Vec<SummaryBullet>, limit: usize) -> Vec<SummaryBullet> {
    let mut kept = Vec::new();
    let mut total = 0usize;
    for bullet in bullets {
        if total + bullet.word_count > limit {
            if kept.is_empty() {
                log::warn!(
                    "first bullet ({} words) exceeds the {limit}-word limit; summary is empty",
                    bullet.word_count
                );
            }
            break;
        }
        total += bullet.word_count;
        kept.push(bullet);
    }
    kept
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Pipeline state after the clustering and ranking stages; shared by the
/// full run and by ablation variants that stop before fusion.
pub struct StagedClusters {
    pub all_propositions: Vec<Proposition>,
    pub scored: Vec<ScoredProposition>,
    pub salient: Vec<ScoredProposition>,
    pub matrix: Option<SimilarityMatrix>,
    pub all_clusters: Vec<Cluster>,
    pub ranked: Vec<Cluster>,
    pub timings: BTreeMap<String, f64>,
    pub log: Vec<String>,
}

/// Run extraction -> scoring -> filter -> similarity -> clustering ->
/// ranking for one topic.
pub fn stage_clusters(
    topic: &Topic,
    cfg: &PipelineConfig,
    registry: &BackendRegistry,
    sim_cache: Option<&Path>,
) -> Result<StagedClusters, PipelineError> {
    let mut timings = BTreeMap::new();
    let mut log = Vec::new();
    let backend_err = |stage: &str, message: String| PipelineError::Backend {
        stage: stage.to_string(),
        topic_id: topic.topic_id.clone(),
        message,
    };

    // (a) proposition extraction; sentence granularity forces passthrough.
    let t = Instant::now();
    let passthrough = PassthroughBackend;
    let extractor: &dyn ExtractionBackend = match cfg.unit {
        Unit::Proposition => registry.extraction.as_ref(),
        Unit::Sentence => &passthrough,
    };
    let all_propositions = extract_propositions(topic, extractor)
        .map_err(|e| backend_err("extraction", e.to_string()))?;
    timings.insert("extraction".to_string(), elapsed_ms(t));

    // (b) salience scoring.
    let t = Instant::now();
    let scored = salience::score_propositions(&all_propositions, topic, registry.salience.as_ref())
        .map_err(|e| backend_err("salience", e.to_string()))?;
    timings.insert("salience".to_string(), elapsed_ms(t));

    // Threshold filter.
    let salient = salience::filter_by_threshold(&scored, cfg.salience_tau);
    if salient.is_empty() {
        let message = format!(
            "no propositions passed salience threshold {}; summary is empty",
            cfg.salience_tau
        );
        log::warn!("topic {}: {message}", topic.topic_id);
        log.push(message);
        return Ok(StagedClusters {
            all_propositions,
            scored,
            salient,
            matrix: None,
            all_clusters: Vec::new(),
            ranked: Vec::new(),
            timings,
            log,
        });
    }

    // (c) pairwise similarity and clustering.
    let t = Instant::now();
    let matrix = pairwise_similarity(&salient, registry.similarity.as_ref(), sim_cache)
        .map_err(|e| backend_err("similarity", e.to_string()))?;
    timings.insert("similarity".to_string(), elapsed_ms(t));

    let t = Instant::now();
    let mut all_clusters = clustering::cluster_propositions(&matrix, &salient, &cfg.clustering)
        .map_err(|e| PipelineError::Data(e.to_string()))?;
    for cluster in &mut all_clusters {
        cluster.features = Some(ranking::compute_features(
            cluster,
            &matrix,
            &cfg.rouge,
            cfg.ranking.pairwise_rouge,
        ));
    }
    timings.insert("clustering".to_string(), elapsed_ms(t));

    // (d) rank clusters, dropping any below the size floor first.
    let t = Instant::now();
    let eligible: Vec<Cluster> = all_clusters
        .iter()
        .filter(|c| c.members.len() >= cfg.clustering.min_cluster_size)
        .cloned()
        .collect();
    let ranked = ranking::rank_clusters(eligible, &cfg.ranking);
    timings.insert("ranking".to_string(), elapsed_ms(t));

    Ok(StagedClusters {
        all_propositions,
        scored,
        salient,
        matrix: Some(matrix),
        all_clusters,
        ranked,
        timings,
        log,
    })
}

/// Execute the full pipeline on one topic.
pub fn run_pipeline(
    topic: &Topic,
    cfg: &PipelineConfig,
    registry: &BackendRegistry,
    sim_cache: Option<&Path>,
) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    let config_hash = cfg.config_hash();
    let mut staged = stage_clusters(topic, cfg, registry, sim_cache)?;

    // (e) one bullet per ranked cluster; generator failures degrade to the
    // extractive representative.
    let t = Instant::now();
    let mut bullets = Vec::new();
    for (i, cluster) in staged.ranked.iter().enumerate() {
        let rank = i + 1;
        let fused = fusion::fuse_cluster(
            cluster,
            rank,
            registry.generator.as_ref(),
            &cfg.prop_separator,
        );
        let bullet = match (cfg.mode, fused) {
            (Mode::Abstractive, Ok(bullet)) => bullet,
            (Mode::Extractive, Ok(fused)) => {
                fusion::select_extractive_representative(cluster, &fused.text, rank, &cfg.rouge)
            }
            (_, Err(e)) => {
                let message = format!(
                    "cluster {}: generator failed ({e}); falling back to extractive representative",
                    cluster.cluster_id
                );
                log::warn!("topic {}: {message}", topic.topic_id);
                staged.log.push(message);
                let rep = ranking::select_cluster_representative(cluster);
                SummaryBullet {
                    text: rep.proposition.text.clone(),
                    mode: BulletMode::Extracted,
                    cluster_id: cluster.cluster_id.clone(),
                    rank,
                    word_count: crate::rouge::word_count(&rep.proposition.text),
                    source_prop_id: Some(rep.proposition.prop_id.clone()),
                }
            }
        };
        bullets.push(bullet);
    }
    staged.timings.insert("fusion".to_string(), elapsed_ms(t));

    // (f) assemble under the word limit.
    let bullets = assemble_summary(bullets, cfg.rouge.max_words);

    Ok(RunOutput {
        artifact: RunArtifact {
            topic_id: topic.topic_id.clone(),
            bullets,
            clusters: staged.ranked,
            config_hash,
            log: staged.log,
            stage_timings: staged.timings,
        },
        all_propositions: staged.all_propositions,
        scored: staged.scored,
        salient: staged.salient,
        matrix: staged.matrix,
        all_clusters: staged.all_clusters,
    })
}

fn write_jsonl<T: Serialize>(
    path: &Path,
    items: impl IntoIterator<Item = T>,
) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    for item in items {
        serde_json::to_writer(&mut f, &item).map_err(std::io::Error::other)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ScoredRecord<'a> {
    prop_id: &'a str,
    score: f64,
}

#[derive(Serialize)]
struct ClusterRecord<'a> {
    topic_id: &'a str,
    cluster_id: &'a str,
    member_prop_ids: Vec<&'a str>,
}

#[derive(Serialize)]
struct RankRecord<'a> {
    cluster_id: &'a str,
    rank: usize,
    features: &'a crate::ranking::ClusterFeatures,
}

/// Directory of one topic's run artifacts.
pub fn run_dir(out_root: &Path, config_hash: &str, topic_id: &str) -> PathBuf {
    out_root.join(config_hash).join(topic_id)
}

/// Per-topic RNG seed: the run seed mixed with a stable hash of the topic
/// id, so topics draw independent streams while staying reproducible.
pub fn topic_seed(seed: u64, topic_id: &str) -> u64 {
    let digest = Sha256::digest(topic_id.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    seed ^ u64::from_le_bytes(bytes)
}

/// Persist the artifact and every intermediate under
/// `<out_root>/<config_hash>/<topic_id>/`.
pub fn persist_run(output: &RunOutput, out_root: &Path) -> Result<PathBuf, PipelineError> {
    let artifact = &output.artifact;
    let dir = run_dir(out_root, &artifact.config_hash, &artifact.topic_id);
    fs::create_dir_all(&dir)?;

    write_jsonl(&dir.join("propositions.jsonl"), &output.all_propositions)?;
    write_jsonl(
        &dir.join("scored.jsonl"),
        output.scored.iter().map(|s| ScoredRecord {
            prop_id: &s.proposition.prop_id,
            score: s.score,
        }),
    )?;
    write_jsonl(
        &dir.join("salient.jsonl"),
        output.salient.iter().map(|s| ScoredRecord {
            prop_id: &s.proposition.prop_id,
            score: s.score,
        }),
    )?;
    if let Some(matrix) = &output.matrix {
        fs::write(
            dir.join("simmatrix.json"),
            serde_json::to_string_pretty(matrix).map_err(std::io::Error::other)?,
        )?;
    }
    write_jsonl(
        &dir.join("clusters.jsonl"),
        output.all_clusters.iter().map(|c| ClusterRecord {
            topic_id: &artifact.topic_id,
            cluster_id: &c.cluster_id,
            member_prop_ids: c
                .members
                .iter()
                .map(|m| m.proposition.prop_id.as_str())
                .collect(),
        }),
    )?;
    write_jsonl(
        &dir.join("ranking.jsonl"),
        artifact
            .clusters
            .iter()
            .enumerate()
            .map(|(i, c)| RankRecord {
                cluster_id: &c.cluster_id,
                rank: i + 1,
                features: c.features.as_ref().expect("ranked clusters carry features"),
            }),
    )?;
    fs::write(dir.join("summary.txt"), artifact.summary_text())?;
    fs::write(
        dir.join("artifact.json"),
        serde_json::to_string_pretty(artifact).map_err(std::io::Error::other)?,
    )?;
    let evidence = reports::evidence_report(artifact);
    fs::write(
        dir.join("evidence.json"),
        serde_json::to_string_pretty(&evidence).map_err(std::io::Error::other)?,
    )?;
    fs::write(
        dir.join("timings.json"),
        serde_json::to_string_pretty(&artifact.stage_timings).map_err(std::io::Error::other)?,
    )?;
    Ok(dir)
}
