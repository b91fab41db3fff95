//! Partial-pipeline ablation ladder.
//!
//! Four variants of increasing completeness, reported together:
//! salience-only at sentence granularity, salience-only at proposition
//! granularity, salience + clustering with per-cluster salience
//! representatives, and the full pipeline with fusion. No ordering among
//! their scores is asserted anywhere; the ladder is a reporting tool.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Topic;
use crate::propositions::{extract_propositions, PassthroughBackend, Proposition};
use crate::ranking::select_cluster_representative;
use crate::rouge::{word_count, RougeScore};
use crate::salience::{score_propositions, ScoredProposition};

use super::reports::evaluate_summary;
use super::{run_pipeline, stage_clusters, BackendRegistry, PipelineConfig, PipelineError, Unit};

pub const VARIANTS: [&str; 4] = [
    "salience_sent",
    "salience_prop",
    "salience_prop_clustering",
    "full",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub summary: String,
    pub scores: BTreeMap<String, RougeScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicAblation {
    pub topic_id: String,
    pub variants: BTreeMap<String, VariantResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub topics: Vec<TopicAblation>,
    /// variant -> metric -> mean F1 over topics.
    pub macro_f1: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Top-scoring units, highest salience first, appended whole until the word
/// limit (same stopping rule as summary assembly).
fn salience_only_summary(scored: &[ScoredProposition], limit: usize) -> String {
    let mut order: Vec<&ScoredProposition> = scored.iter().collect();
    // Stable sort keeps canonical extraction order on tied scores.
    order.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut total = 0usize;
    let mut lines = Vec::new();
    for unit in order {
        let wc = word_count(&unit.proposition.text);
        if total + wc > limit {
            break;
        }
        total += wc;
        lines.push(format!("- {}", unit.proposition.text));
    }
    lines.join("\n") + if lines.is_empty() { "" } else { "\n" }
}

fn score_units_for(
    topic: &Topic,
    registry: &BackendRegistry,
    unit: Unit,
) -> Result<Vec<ScoredProposition>, PipelineError> {
    let backend_err = |stage: &str, message: String| PipelineError::Backend {
        stage: stage.to_string(),
        topic_id: topic.topic_id.clone(),
        message,
    };
    let passthrough = PassthroughBackend;
    let extractor: &dyn crate::propositions::ExtractionBackend = match unit {
        Unit::Proposition => registry.extraction.as_ref(),
        Unit::Sentence => &passthrough,
    };
    let props: Vec<Proposition> = extract_propositions(topic, extractor)
        .map_err(|e| backend_err("extraction", e.to_string()))?;
    score_propositions(&props, topic, registry.salience.as_ref())
        .map_err(|e| backend_err("salience", e.to_string()))
}

/// Run all four ladder variants on one topic.
pub fn run_ablation(
    topic: &Topic,
    cfg: &PipelineConfig,
    registry: &BackendRegistry,
    sim_cache: Option<&std::path::Path>,
) -> Result<TopicAblation, PipelineError> {
    let references = topic.reference_texts();
    let mut variants = BTreeMap::new();
    let evaluate = |summary: String| -> Result<VariantResult, PipelineError> {
        let concatenated = summary
            .lines()
            .map(|l| l.strip_prefix("- ").unwrap_or(l))
            .collect::<Vec<_>>()
            .join(" ");
        let scores = evaluate_summary(&concatenated, &references, &cfg.rouge)
            .map_err(|e| PipelineError::Data(e.to_string()))?;
        Ok(VariantResult { summary, scores })
    };

    // Salience-only, both granularities.
    let sent = score_units_for(topic, registry, Unit::Sentence)?;
    variants.insert(
        "salience_sent".to_string(),
        evaluate(salience_only_summary(&sent, cfg.rouge.max_words))?,
    );
    let prop = score_units_for(topic, registry, Unit::Proposition)?;
    variants.insert(
        "salience_prop".to_string(),
        evaluate(salience_only_summary(&prop, cfg.rouge.max_words))?,
    );

    // Salience + clustering: per-cluster salience representative, no fusion.
    let mut prop_cfg = cfg.clone();
    prop_cfg.unit = Unit::Proposition;
    let staged = stage_clusters(topic, &prop_cfg, registry, sim_cache)?;
    let mut total = 0usize;
    let mut lines = Vec::new();
    for cluster in &staged.ranked {
        let rep = select_cluster_representative(cluster);
        let wc = word_count(&rep.proposition.text);
        if total + wc > cfg.rouge.max_words {
            break;
        }
        total += wc;
        lines.push(format!("- {}", rep.proposition.text));
    }
    let clustering_summary = lines.join("\n") + if lines.is_empty() { "" } else { "\n" };
    variants.insert(
        "salience_prop_clustering".to_string(),
        evaluate(clustering_summary)?,
    );

    // Full pipeline.
    let output = run_pipeline(topic, &prop_cfg, registry, sim_cache)?;
    variants.insert(
        "full".to_string(),
        evaluate(output.artifact.summary_text())?,
    );

    Ok(TopicAblation {
        topic_id: topic.topic_id.clone(),
        variants,
    })
}

/// Ladder over a corpus, with per-variant macro-average F1.
pub fn run_ablation_suite(
    topics: &[Topic],
    cfg: &PipelineConfig,
    registry: &BackendRegistry,
    sim_cache: Option<&std::path::Path>,
) -> Result<AblationReport, PipelineError> {
    let mut rows = Vec::new();
    for topic in topics {
        rows.push(run_ablation(topic, cfg, registry, sim_cache)?);
    }
    let mut macro_f1: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for variant in VARIANTS {
        let mut metrics: BTreeMap<String, f64> = BTreeMap::new();
        if !rows.is_empty() {
            for row in &rows {
                if let Some(result) = row.variants.get(variant) {
                    for (metric, score) in &result.scores {
                        *metrics.entry(metric.clone()).or_insert(0.0) += score.f1;
                    }
                }
            }
            for value in metrics.values_mut() {
                *value /= rows.len() as f64;
            }
        }
        macro_f1.insert(variant.to_string(), metrics);
    }
    Ok(AblationReport {
        topics: rows,
        macro_f1,
    })
}
