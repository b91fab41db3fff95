//! Cluster fusion: deriving training pairs from reference summaries,
//! serializing cluster propositions for a sequence generator, producing one
//! summary sentence per cluster, and the extractive variant that picks the
//! source proposition with the highest word overlap with the fused sentence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::Cluster;
use crate::corpus::ReferenceSummary;
use crate::propositions::Proposition;
use crate::rouge::{self, RougeConfig};
use crate::salience::ScoredProposition;
use crate::similarity::SimilarityBackend;

/// Default literal placed between propositions in generator input.
pub const DEFAULT_PROP_SEPARATOR: &str = "<prop-sep>";

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("empty fusion input")]
    EmptyInput,
    #[error("input contains the separator literal: {0:?}")]
    SeparatorCollision(String),
    #[error("generator backend failed: {0}")]
    GeneratorFailure(String),
    #[error("similarity backend failed: {0}")]
    SimilarityFailure(String),
}

/// One fusion training pair: cluster propositions (salience-descending) and
/// the aligned reference-summary proposition as target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionExample {
    pub topic_id: String,
    pub cluster_id: String,
    pub input_props: Vec<String>,
    pub target_text: String,
}

/// Generates one sentence from a serialized cluster input. Deterministic
/// under a fixed decoding config; must not return empty output.
pub trait GeneratorBackend {
    fn backend_id(&self) -> &str;
    fn generate(&self, serialized_input: &str) -> Result<String, String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BulletMode {
    Fused,
    Extracted,
}

/// One output summary sentence with its evidence link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryBullet {
    pub text: String,
    pub mode: BulletMode,
    pub cluster_id: String,
    pub rank: usize,
    pub word_count: usize,
    /// For extracted bullets, the prop_id of the chosen representative.
    pub source_prop_id: Option<String>,
}

/// Members in generator-input order: salience descending, prop_id ascending
/// on ties.
pub fn members_by_salience(cluster: &Cluster) -> Vec<&ScoredProposition> {
    let mut members: Vec<&ScoredProposition> = cluster.members.iter().collect();
    members.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.proposition.prop_id.cmp(&b.proposition.prop_id))
    });
    members
}

/// Align each cluster with the reference proposition that has the highest
/// mean similarity to all cluster members; that proposition becomes the
/// generation target. Clusters are skipped (with a warning) when there are
/// no reference propositions.
pub fn derive_fusion_targets(
    clusters: &[Cluster],
    references: &[ReferenceSummary],
    ref_props: &[Proposition],
    backend: &dyn SimilarityBackend,
) -> Result<Vec<FusionExample>, FusionError> {
    if ref_props.is_empty() {
        log::warn!(
            "no reference propositions extracted from {} references; no fusion examples emitted",
            references.len()
        );
        return Ok(Vec::new());
    }
    // One batched call covering every (reference prop, member) pair.
    let mut pairs = Vec::new();
    for cluster in clusters {
        for rp in ref_props {
            for member in &cluster.members {
                pairs.push((rp.text.clone(), member.proposition.text.clone()));
            }
        }
    }
    let scores = backend
        .score_pairs(&pairs)
        .map_err(FusionError::SimilarityFailure)?;
    if scores.len() != pairs.len() {
        return Err(FusionError::SimilarityFailure(format!(
            "backend returned {} scores for {} pairs",
            scores.len(),
            pairs.len()
        )));
    }

    let mut examples = Vec::new();
    let mut cursor = 0usize;
    for cluster in clusters {
        let mut best: Option<(&Proposition, f64)> = None;
        for rp in ref_props {
            let n = cluster.members.len();
            let mean: f64 = scores[cursor..cursor + n].iter().sum::<f64>() / n as f64;
            cursor += n;
            let replace = match best {
                None => true,
                // Strict improvement only: ties keep the earlier reference
                // proposition, and ref_props arrive in prop_id order.
                Some((bp, bs)) => mean > bs || (mean == bs && rp.prop_id < bp.prop_id),
            };
            if replace {
                best = Some((rp, mean));
            }
        }
        if let Some((target, _)) = best {
            examples.push(FusionExample {
                topic_id: cluster
                    .members
                    .first()
                    .map(|m| m.proposition.topic_id.clone())
                    .unwrap_or_default(),
                cluster_id: cluster.cluster_id.clone(),
                input_props: members_by_salience(cluster)
                    .iter()
                    .map(|m| m.proposition.text.clone())
                    .collect(),
                target_text: target.text.clone(),
            });
        }
    }
    Ok(examples)
}

/// Join proposition texts with the separator literal. Inputs containing the
/// literal are rejected so the serialization stays injective.
pub fn serialize_fusion_input(inputs: &[String], separator: &str) -> Result<String, FusionError> {
    if inputs.is_empty() {
        return Err(FusionError::EmptyInput);
    }
    for input in inputs {
        if input.contains(separator) {
            return Err(FusionError::SeparatorCollision(input.clone()));
        }
    }
    Ok(inputs.join(separator))
}

/// Fuse one cluster into a summary sentence. Empty generator output counts
/// as a backend failure so the pipeline can fall back to the extractive
/// representative.
pub fn fuse_cluster(
    cluster: &Cluster,
    rank: usize,
    backend: &dyn GeneratorBackend,
    separator: &str,
) -> Result<SummaryBullet, FusionError> {
    let inputs: Vec<String> = members_by_salience(cluster)
        .iter()
        .map(|m| m.proposition.text.clone())
        .collect();
    let serialized = serialize_fusion_input(&inputs, separator)?;
    let text = backend
        .generate(&serialized)
        .map_err(FusionError::GeneratorFailure)?
        .trim()
        .to_string();
    if text.is_empty() {
        return Err(FusionError::GeneratorFailure(
            "generator returned empty output".into(),
        ));
    }
    Ok(SummaryBullet {
        word_count: rouge::word_count(&text),
        text,
        mode: BulletMode::Fused,
        cluster_id: cluster.cluster_id.clone(),
        rank,
        source_prop_id: None,
    })
}

/// Extractive variant: the member whose token set overlaps the fused
/// sentence the most (count of shared tokens, stemming per config); ties by
/// higher salience, then prop_id.
pub fn select_extractive_representative(
    cluster: &Cluster,
    fused_text: &str,
    rank: usize,
    cfg: &RougeConfig,
) -> SummaryBullet {
    let fused_tokens: std::collections::BTreeSet<String> =
        rouge::tokenize(fused_text, cfg).into_iter().collect();
    let best = cluster
        .members
        .iter()
        .map(|m| {
            let tokens: std::collections::BTreeSet<String> =
                rouge::tokenize(&m.proposition.text, cfg)
                    .into_iter()
                    .collect();
            let overlap = tokens.intersection(&fused_tokens).count();
            (m, overlap)
        })
        .min_by(|(ma, oa), (mb, ob)| {
            ob.cmp(oa)
                .then_with(|| mb.score.total_cmp(&ma.score))
                .then_with(|| ma.proposition.prop_id.cmp(&mb.proposition.prop_id))
        })
        .map(|(m, _)| m)
        .expect("clusters are non-empty");
    SummaryBullet {
        text: best.proposition.text.clone(),
        mode: BulletMode::Extracted,
        cluster_id: cluster.cluster_id.clone(),
        rank,
        word_count: rouge::word_count(&best.proposition.text),
        source_prop_id: Some(best.proposition.prop_id.clone()),
    }
}

/// Reference generator: returns the first proposition of the serialized
/// input, i.e. the highest-salience member. Useful for model-free runs and
/// for checking that abstractive and extractive modes agree.
#[derive(Debug)]
pub struct EchoGenerator {
    separator: String,
}

impl EchoGenerator {
    pub fn new(separator: impl Into<String>) -> Self {
        Self {
            separator: separator.into(),
        }
    }
}

impl Default for EchoGenerator {
    fn default() -> Self {
        Self::new(DEFAULT_PROP_SEPARATOR)
    }
}

impl GeneratorBackend for EchoGenerator {
    fn backend_id(&self) -> &str {
        "echo"
    }

    fn generate(&self, serialized_input: &str) -> Result<String, String> {
        Ok(serialized_input
            .split(&self.separator)
            .next()
            .unwrap_or_default()
            .to_string())
    }
}

/// Generator adapter speaking the line protocol: the serialized input is
/// written as one line to the child's stdin and the generated sentence is
/// read back as one stdout line. This is the bridge for generators
/// implemented outside the process (e.g. a model server wrapper script).
#[derive(Debug)]
pub struct CommandGenerator {
    program: String,
    args: Vec<String>,
}

impl CommandGenerator {
    /// Split a `command:<program> [args...]` spec on whitespace.
    pub fn from_spec(spec: &str) -> Result<Self, String> {
        let mut parts = spec.split_whitespace();
        let program = parts.next().ok_or("empty generator command")?.to_string();
        Ok(Self {
            program,
            args: parts.map(str::to_string).collect(),
        })
    }
}

impl GeneratorBackend for CommandGenerator {
    fn backend_id(&self) -> &str {
        "command"
    }

    fn generate(&self, serialized_input: &str) -> Result<String, String> {
        use std::io::Write as _;
        use std::process::{Command, Stdio};
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("spawn {}: {e}", self.program))?;
        child
            .stdin
            .take()
            .ok_or("no stdin")?
            .write_all(format!("{serialized_input}\n").as_bytes())
            .map_err(|e| e.to_string())?;
        let output = child.wait_with_output().map_err(|e| e.to_string())?;
        if !output.status.success() {
            return Err(format!("{} exited with {}", self.program, output.status));
        }
        let line = String::from_utf8_lossy(&output.stdout)
            .lines()
            .next()
            .unwrap_or_default()
            .to_string();
        Ok(line)
    }
}

/// One fusion training record, as written to `fusion_train.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FusionTrainRecord {
    pub topic_id: String,
    pub cluster_id: String,
    pub input: String,
    pub target: String,
}

impl FusionTrainRecord {
    pub fn from_example(example: &FusionExample, separator: &str) -> Result<Self, FusionError> {
        Ok(Self {
            topic_id: example.topic_id.clone(),
            cluster_id: example.cluster_id.clone(),
            input: serialize_fusion_input(&example.input_props, separator)?,
            target: example.target_text.clone(),
        })
    }
}
