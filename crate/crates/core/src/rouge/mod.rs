//! Self-contained ROUGE-1 / ROUGE-2 / ROUGE-SU4 F1 scoring, plus the
//! tokenizer shared by every stage of the pipeline.
//!
//! Scores are point F1 values: clipped n-gram (or skip-bigram) overlap
//! against one or more references, combined across references by averaging
//! or by taking the best reference. Candidates are truncated to
//! `max_words` tokens before counting; truncation counts raw tokens, before
//! stemming, so the same word budget applies everywhere in the pipeline.

mod porter;
mod stopwords;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use porter::stem;
pub use stopwords::is_stopword;

/// How per-reference scores are combined into one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MultiRef {
    /// Component-wise mean of per-reference precision/recall/F1.
    #[default]
    Average,
    /// The score triple of the reference with the highest F1 (first on ties).
    Max,
}

/// Scoring parameters. The defaults mirror the conventional 100-word,
/// stemmed, stopwords-kept evaluation setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RougeConfig {
    /// Candidate truncation limit, in raw (pre-stemming) tokens.
    pub max_words: usize,
    /// Apply Porter stemming to tokens.
    pub stem: bool,
    /// Drop stopwords before counting.
    pub remove_stopwords: bool,
    /// Multi-reference combination mode.
    pub multi_ref: MultiRef,
    /// Maximum gap between skip-bigram members (SU4 => 4).
    pub skip_distance: usize,
    /// Count unigrams as additional SU units.
    pub include_unigrams_in_su: bool,
}

impl Default for RougeConfig {
    fn default() -> Self {
        Self {
            max_words: 100,
            stem: true,
            remove_stopwords: false,
            multi_ref: MultiRef::Average,
            skip_distance: 4,
            include_unigrams_in_su: true,
        }
    }
}

impl RougeConfig {
    pub fn validate(&self) -> Result<(), RougeError> {
        if self.max_words == 0 {
            return Err(RougeError::InvalidConfig("max_words must be > 0".into()));
        }
        Ok(())
    }
}

/// Precision / recall / F1 triple, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        if candidate_total == 0 || reference_total == 0 {
            return Self::default();
        }
        let precision = overlap as f64 / candidate_total as f64;
        let recall = overlap as f64 / reference_total as f64;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Error)]
pub enum RougeError {
    #[error("no references provided")]
    EmptyReferences,
    #[error("invalid rouge config: {0}")]
    InvalidConfig(String),
}

/// Lowercase and split on non-alphanumeric characters, dropping empty
/// tokens. This is the raw form used for word counting and truncation.
pub fn tokenize_raw(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

/// Character spans (start, end) of each raw token in `text`.
pub fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    let mut idx = 0;
    for c in text.chars() {
        if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(idx);
            }
        } else if let Some(s) = start.take() {
            spans.push((s, idx));
        }
        idx += 1;
    }
    if let Some(s) = start {
        spans.push((s, idx));
    }
    spans
}

/// Raw token count of `text`; the word-budget measure used pipeline-wide.
pub fn word_count(text: &str) -> usize {
    tokenize_raw(text).len()
}

/// Full tokenization: raw tokens, then optional stopword removal, then
/// optional stemming, as configured. No truncation.
pub fn tokenize(text: &str, cfg: &RougeConfig) -> Vec<String> {
    let mut tokens = tokenize_raw(text);
    if cfg.remove_stopwords {
        tokens.retain(|t| !is_stopword(t));
    }
    if cfg.stem {
        for t in &mut tokens {
            *t = stem(t);
        }
    }
    tokens
}

fn prepare_candidate(text: &str, cfg: &RougeConfig) -> Vec<String> {
    let mut tokens = tokenize_raw(text);
    tokens.truncate(cfg.max_words);
    if cfg.remove_stopwords {
        tokens.retain(|t| !is_stopword(t));
    }
    if cfg.stem {
        for t in &mut tokens {
            *t = stem(t);
        }
    }
    tokens
}

fn prepare_reference(text: &str, cfg: &RougeConfig) -> Vec<String> {
    tokenize(text, cfg)
}

// Units are joined with a separator that the tokenizer can never emit, so
// n-grams of different arity cannot collide as map keys.
const UNIT_SEP: char = '\u{1f}';

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for window in tokens.windows(n) {
        let key = window.join(&UNIT_SEP.to_string());
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}

/// Skip-bigram units (max gap `skip_distance`) plus, optionally, unigrams.
fn su_unit_counts(tokens: &[String], cfg: &RougeConfig) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for i in 0..tokens.len() {
        for j in (i + 1)..tokens.len() {
            if j - i - 1 > cfg.skip_distance {
                break;
            }
            let key = format!("{}{}{}", tokens[i], UNIT_SEP, tokens[j]);
            *counts.entry(key).or_insert(0) += 1;
        }
        if cfg.include_unigrams_in_su {
            *counts.entry(tokens[i].clone()).or_insert(0) += 1;
        }
    }
    counts
}

fn clipped_overlap(cand: &HashMap<String, usize>, reference: &HashMap<String, usize>) -> usize {
    cand.iter()
        .map(|(unit, &c)| c.min(reference.get(unit).copied().unwrap_or(0)))
        .sum()
}

fn combine(scores: Vec<RougeScore>, mode: MultiRef) -> RougeScore {
    match mode {
        MultiRef::Average => {
            let n = scores.len() as f64;
            let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
            for s in &scores {
                p += s.precision;
                r += s.recall;
                f += s.f1;
            }
            RougeScore {
                precision: p / n,
                recall: r / n,
                f1: f / n,
            }
        }
        MultiRef::Max => scores
            .into_iter()
            .reduce(|best, s| if s.f1 > best.f1 { s } else { best })
            .unwrap_or_default(),
    }
}

fn score_units<F>(
    candidate: &str,
    references: &[String],
    cfg: &RougeConfig,
    to_units: F,
) -> Result<RougeScore, RougeError>
where
    F: Fn(&[String]) -> HashMap<String, usize>,
{
    if references.is_empty() {
        return Err(RougeError::EmptyReferences);
    }
    let cand_units = to_units(&prepare_candidate(candidate, cfg));
    let cand_total: usize = cand_units.values().sum();
    let per_ref = references
        .iter()
        .map(|r| {
            let ref_units = to_units(&prepare_reference(r, cfg));
            let ref_total: usize = ref_units.values().sum();
            let overlap = clipped_overlap(&cand_units, &ref_units);
            RougeScore::from_counts(overlap, cand_total, ref_total)
        })
        .collect();
    Ok(combine(per_ref, cfg.multi_ref))
}

/// ROUGE-N F1 of `candidate` against `references` with clipped counts.
pub fn rouge_n(
    candidate: &str,
    references: &[String],
    n: usize,
    cfg: &RougeConfig,
) -> Result<RougeScore, RougeError> {
    score_units(candidate, references, cfg, |tokens| ngram_counts(tokens, n))
}

/// ROUGE-SU F1: skip-bigrams with gap at most `cfg.skip_distance`, plus
/// unigrams when `include_unigrams_in_su` is set (SU4 with the defaults).
pub fn rouge_su4(
    candidate: &str,
    references: &[String],
    cfg: &RougeConfig,
) -> Result<RougeScore, RougeError> {
    score_units(candidate, references, cfg, |tokens| {
        su_unit_counts(tokens, cfg)
    })
}

/// Greedy-selection objective: ROUGE-1 F1 + ROUGE-2 F1 of the selected texts
/// joined with single spaces, in selection order.
pub fn combined_oracle_objective(
    selected_texts: &[String],
    references: &[String],
    cfg: &RougeConfig,
) -> Result<f64, RougeError> {
    let joined = selected_texts.join(" ");
    let r1 = rouge_n(&joined, references, 1, cfg)?;
    let r2 = rouge_n(&joined, references, 2, cfg)?;
    Ok(r1.f1 + r2.f1)
}
