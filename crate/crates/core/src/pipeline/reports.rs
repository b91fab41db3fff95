//! Run reports: per-bullet evidence, abstractiveness statistics, and ROUGE
//! evaluation of a finished run.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Topic;
use crate::fusion::BulletMode;
use crate::propositions::Span;
use crate::rouge::{self, RougeConfig, RougeError, RougeScore};

use super::RunArtifact;

/// One supporting proposition with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub prop_text: String,
    pub doc_id: String,
    pub sent_index: usize,
    pub spans: Vec<Span>,
    /// Set on the representative an extracted bullet was copied from.
    pub is_source: bool,
}

/// One bullet with the cluster propositions that support it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceEntry {
    pub bullet_text: String,
    pub mode: BulletMode,
    pub cluster_id: String,
    pub rank: usize,
    pub evidence: Vec<EvidenceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceReport {
    pub topic_id: String,
    pub entries: Vec<EvidenceEntry>,
}

/// Link every bullet to its source cluster's propositions.
pub fn evidence_report(artifact: &RunArtifact) -> EvidenceReport {
    let entries = artifact
        .bullets
        .iter()
        .filter_map(|bullet| {
            let cluster = artifact
                .clusters
                .iter()
                .find(|c| c.cluster_id == bullet.cluster_id)?;
            let evidence = cluster
                .members
                .iter()
                .map(|m| EvidenceRow {
                    prop_text: m.proposition.text.clone(),
                    doc_id: m.proposition.doc_id.clone(),
                    sent_index: m.proposition.sent_index,
                    spans: m.proposition.spans.clone(),
                    is_source: bullet.source_prop_id.as_deref()
                        == Some(m.proposition.prop_id.as_str()),
                })
                .collect();
            Some(EvidenceEntry {
                bullet_text: bullet.text.clone(),
                mode: bullet.mode,
                cluster_id: bullet.cluster_id.clone(),
                rank: bullet.rank,
                evidence,
            })
        })
        .collect();
    EvidenceReport {
        topic_id: artifact.topic_id.clone(),
        entries,
    }
}

/// Source-overlap percentages of a summary: how much of it appears verbatim
/// in the topic's documents. Lower numbers mean a more abstractive summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractivenessReport {
    /// Percentage of summary n-grams found anywhere in the documents,
    /// keyed "1", "2", "3".
    pub ngram_overlap_pct: BTreeMap<String, f64>,
    /// Percentage of summary sentences appearing verbatim (whitespace
    /// normalized) as document sentences.
    pub sentence_overlap_pct: f64,
}

fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn summary_sentences(summary: &str) -> Vec<String> {
    summary
        .lines()
        .map(|l| l.strip_prefix("- ").unwrap_or(l))
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn ngrams(tokens: &[String], n: usize) -> Vec<String> {
    if tokens.len() < n {
        return Vec::new();
    }
    tokens.windows(n).map(|w| w.join("\u{1f}")).collect()
}

/// Percentage of summary n-grams (n = 1..3) and whole sentences occurring
/// in the source documents. N-grams use raw surface tokens and do not cross
/// sentence boundaries on either side.
pub fn abstractiveness_report(summary: &str, topic: &Topic) -> AbstractivenessReport {
    let sentences = summary_sentences(summary);
    let doc_sentences: Vec<&str> = topic
        .documents
        .iter()
        .flat_map(|d| d.sentences.iter().map(|s| s.text.as_str()))
        .collect();

    let mut ngram_overlap_pct = BTreeMap::new();
    for n in 1..=3usize {
        let mut doc_grams: HashSet<String> = HashSet::new();
        for s in &doc_sentences {
            doc_grams.extend(ngrams(&rouge::tokenize_raw(s), n));
        }
        let mut total = 0usize;
        let mut found = 0usize;
        for s in &sentences {
            for gram in ngrams(&rouge::tokenize_raw(s), n) {
                total += 1;
                if doc_grams.contains(&gram) {
                    found += 1;
                }
            }
        }
        let pct = if total == 0 {
            0.0
        } else {
            100.0 * found as f64 / total as f64
        };
        ngram_overlap_pct.insert(n.to_string(), pct);
    }

    let doc_normalized: HashSet<String> = doc_sentences.iter().map(|s| normalize_ws(s)).collect();
    let matched = sentences
        .iter()
        .filter(|s| doc_normalized.contains(&normalize_ws(s)))
        .count();
    let sentence_overlap_pct = if sentences.is_empty() {
        0.0
    } else {
        100.0 * matched as f64 / sentences.len() as f64
    };

    AbstractivenessReport {
        ngram_overlap_pct,
        sentence_overlap_pct,
    }
}

/// ROUGE-1/2/SU4 F1 of the assembled summary against the references.
pub fn evaluate_run(
    artifact: &RunArtifact,
    references: &[String],
    cfg: &RougeConfig,
) -> Result<BTreeMap<String, RougeScore>, RougeError> {
    evaluate_summary(&artifact.concatenated(), references, cfg)
}

/// Same scoring for a raw summary string.
pub fn evaluate_summary(
    summary: &str,
    references: &[String],
    cfg: &RougeConfig,
) -> Result<BTreeMap<String, RougeScore>, RougeError> {
    let mut out = BTreeMap::new();
    out.insert(
        "rouge-1".to_string(),
        rouge::rouge_n(summary, references, 1, cfg)?,
    );
    out.insert(
        "rouge-2".to_string(),
        rouge::rouge_n(summary, references, 2, cfg)?,
    );
    out.insert(
        "rouge-su4".to_string(),
        rouge::rouge_su4(summary, references, cfg)?,
    );
    Ok(out)
}
