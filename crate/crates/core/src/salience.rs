//! Salience: gold label derivation from reference summaries, training-set
//! construction (negative downsampling + positive oversampling, context
//! windows), pluggable scoring, and threshold filtering.
//!
//! Labels come from a greedy loop that repeatedly adds the candidate whose
//! addition most increases ROUGE-1 F1 + ROUGE-2 F1 against the references,
//! stopping when no candidate gives a strict improvement (tolerance 1e-9)
//! or the selection reaches the word budget. The same loop backs the
//! extractive oracles.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Topic;
use crate::propositions::Proposition;
use crate::rouge::{self, combined_oracle_objective, word_count, RougeConfig};

/// Gain below this is not a strict improvement; the greedy loop stops.
pub const GREEDY_GAIN_EPS: f64 = 1e-9;

/// Fraction of non-salient propositions kept when balancing.
pub const NEGATIVE_KEEP_RATE: f64 = 0.4;

/// Own-document prefix length for context windows.
pub const OWN_DOC_SENTENCE_CAP: usize = 20;

/// Default context window budget, in tokenizer words.
pub const DEFAULT_TOKEN_BUDGET: usize = 4096;

#[derive(Debug, Error)]
pub enum SalienceError {
    #[error("no propositions to label")]
    NoPropositions,
    #[error("salience backend failed at batch index {batch_index}: {message}")]
    BackendFailure { batch_index: usize, message: String },
    #[error("rouge error: {0}")]
    Rouge(#[from] rouge::RougeError),
}

/// Gold salience labels for one topic; positives and negatives partition
/// the extracted propositions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SalienceLabelSet {
    pub topic_id: String,
    pub positives: BTreeSet<String>,
    pub negatives: BTreeSet<String>,
}

/// A proposition paired with its salience score in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredProposition {
    pub proposition: Proposition,
    pub score: f64,
}

/// The multi-document context a scorer sees for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextWindow {
    pub candidate: Proposition,
    /// Prefix (at most 20 sentences) of the candidate's own document.
    pub own_doc_sentences: Vec<String>,
    /// Remaining documents in date order; entries may carry empty sentence
    /// lists when the budget runs out, preserving the ordering for audit.
    pub other_docs: Vec<(String, Vec<String>)>,
    pub token_budget: usize,
}

/// Scores candidate propositions within their context windows. Must be
/// deterministic and return one score in [0, 1] per instance.
pub trait SalienceBackend {
    fn backend_id(&self) -> &str;
    fn score_batch(&self, instances: &[ContextWindow]) -> Result<Vec<f64>, String>;
}

/// Result of one greedy selection run.
#[derive(Debug, Clone)]
pub struct GreedySelection {
    /// Indices into the candidate list, in selection order.
    pub order: Vec<usize>,
    /// Objective value after each selection; strictly increasing.
    pub objective_steps: Vec<f64>,
}

/// Greedily select candidates maximizing ROUGE-1 F1 + ROUGE-2 F1 of the
/// selection against the references. Candidates must be given in canonical
/// order; on tied gains the earliest candidate wins.
pub fn greedy_select(
    candidate_texts: &[String],
    references: &[String],
    cfg: &RougeConfig,
) -> Result<GreedySelection, SalienceError> {
    let mut order = Vec::new();
    let mut objective_steps = Vec::new();
    let mut selected_texts: Vec<String> = Vec::new();
    let mut selected: HashSet<usize> = HashSet::new();
    let mut current = 0.0;
    let mut words = 0usize;
    loop {
        if words >= cfg.max_words {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, text) in candidate_texts.iter().enumerate() {
            if selected.contains(&i) {
                continue;
            }
            selected_texts.push(text.clone());
            let objective = combined_oracle_objective(&selected_texts, references, cfg)?;
            selected_texts.pop();
            if best.is_none_or(|(_, b)| objective > b) {
                best = Some((i, objective));
            }
        }
        match best {
            Some((i, objective)) if objective > current + GREEDY_GAIN_EPS => {
                selected.insert(i);
                selected_texts.push(candidate_texts[i].clone());
                words += word_count(&candidate_texts[i]);
                order.push(i);
                objective_steps.push(objective);
                current = objective;
            }
            _ => break,
        }
    }
    Ok(GreedySelection {
        order,
        objective_steps,
    })
}

/// Canonical proposition order: (document position, sentence index,
/// tuple ordinal), with prop_id as a final stable key.
pub fn canonical_order(topic: &Topic, props: &mut [Proposition]) {
    props.sort_by(|a, b| {
        let ka = (
            topic.doc_position(&a.doc_id).unwrap_or(usize::MAX),
            a.sent_index,
            a.ordinal,
        );
        let kb = (
            topic.doc_position(&b.doc_id).unwrap_or(usize::MAX),
            b.sent_index,
            b.ordinal,
        );
        ka.cmp(&kb).then_with(|| a.prop_id.cmp(&b.prop_id))
    });
}

/// Derive gold salience labels for a topic: greedy selection against all
/// references jointly; selected propositions are positive, the rest
/// negative.
pub fn derive_salience_labels(
    topic: &Topic,
    propositions: &[Proposition],
    cfg: &RougeConfig,
) -> Result<SalienceLabelSet, SalienceError> {
    if propositions.is_empty() {
        return Err(SalienceError::NoPropositions);
    }
    let mut ordered: Vec<Proposition> = propositions.to_vec();
    canonical_order(topic, &mut ordered);
    let texts: Vec<String> = ordered.iter().map(|p| p.text.clone()).collect();
    let selection = greedy_select(&texts, &topic.reference_texts(), cfg)?;
    let positive_idx: HashSet<usize> = selection.order.iter().copied().collect();
    let mut positives = BTreeSet::new();
    let mut negatives = BTreeSet::new();
    for (i, prop) in ordered.iter().enumerate() {
        if positive_idx.contains(&i) {
            positives.insert(prop.prop_id.clone());
        } else {
            negatives.insert(prop.prop_id.clone());
        }
    }
    Ok(SalienceLabelSet {
        topic_id: topic.topic_id.clone(),
        positives,
        negatives,
    })
}

/// A balanced training set: (prop_id, label) pairs, shuffled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalancedTrainingSet {
    pub examples: Vec<(String, u8)>,
    /// Set when the label set had no positives and the output is empty.
    pub no_positives: bool,
}

/// Balance a label set for training: each negative is kept independently
/// with probability 0.4, positives are repeated round-robin until they
/// match the kept negatives, and the result is shuffled. All draws come
/// from one ChaCha8 stream seeded with `seed`, in documented order
/// (negatives in sorted prop_id order first, then the shuffle), so output
/// is bit-reproducible. Positives are never dropped: if they already
/// outnumber the kept negatives, all of them are emitted once.
pub fn balance_training_set(labels: &SalienceLabelSet, seed: u64) -> BalancedTrainingSet {
    if labels.positives.is_empty() {
        log::warn!(
            "topic {}: no positive labels; balanced set is empty",
            labels.topic_id
        );
        return BalancedTrainingSet {
            examples: Vec::new(),
            no_positives: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kept_negatives: Vec<&String> = labels
        .negatives
        .iter()
        .filter(|_| rng.random::<f64>() < NEGATIVE_KEEP_RATE)
        .collect();
    let positives: Vec<&String> = labels.positives.iter().collect();
    let mut examples: Vec<(String, u8)> = Vec::new();
    let target = kept_negatives.len().max(positives.len());
    for i in 0..target {
        examples.push((positives[i % positives.len()].clone(), 1));
    }
    for id in kept_negatives {
        examples.push((id.clone(), 0));
    }
    examples.shuffle(&mut rng);
    BalancedTrainingSet {
        examples,
        no_positives: false,
    }
}

/// Build the context window for one candidate: its own document truncated
/// to the first 20 sentences, then the remaining word budget divided evenly
/// (floor) across the other documents in date order, leftover budget handed
/// out one sentence at a time in date order. Every other document considers
/// only its first 20 sentences.
pub fn build_context_window(
    candidate: &Proposition,
    topic: &Topic,
    budget: usize,
) -> ContextWindow {
    let own_doc_sentences: Vec<String> = topic
        .document(&candidate.doc_id)
        .map(|d| {
            d.sentences
                .iter()
                .take(OWN_DOC_SENTENCE_CAP)
                .map(|s| s.text.clone())
                .collect()
        })
        .unwrap_or_default();
    let used: usize = own_doc_sentences.iter().map(|s| word_count(s)).sum();
    let mut remaining = budget.saturating_sub(used);

    let other_pools: Vec<(&str, Vec<&str>)> = topic
        .documents
        .iter()
        .filter(|d| d.doc_id != candidate.doc_id)
        .map(|d| {
            let pool: Vec<&str> = d
                .sentences
                .iter()
                .take(OWN_DOC_SENTENCE_CAP)
                .map(|s| s.text.as_str())
                .collect();
            (d.doc_id.as_str(), pool)
        })
        .collect();

    let mut other_docs: Vec<(String, Vec<String>)> = Vec::with_capacity(other_pools.len());
    let mut cursors: Vec<usize> = vec![0; other_pools.len()];
    if !other_pools.is_empty() {
        let allowance = remaining / other_pools.len();
        for (i, (doc_id, pool)) in other_pools.iter().enumerate() {
            let mut taken = Vec::new();
            let mut doc_used = 0usize;
            while cursors[i] < pool.len() {
                let wc = word_count(pool[cursors[i]]);
                if doc_used + wc > allowance {
                    break;
                }
                taken.push(pool[cursors[i]].to_string());
                doc_used += wc;
                cursors[i] += 1;
            }
            remaining = remaining.saturating_sub(doc_used);
            other_docs.push((doc_id.to_string(), taken));
        }
        // Leftover budget: one sentence per document per pass, date order.
        loop {
            let mut advanced = false;
            for (i, (_, pool)) in other_pools.iter().enumerate() {
                if cursors[i] >= pool.len() {
                    continue;
                }
                let wc = word_count(pool[cursors[i]]);
                if wc <= remaining {
                    other_docs[i].1.push(pool[cursors[i]].to_string());
                    cursors[i] += 1;
                    remaining -= wc;
                    advanced = true;
                }
            }
            if !advanced {
                break;
            }
        }
    }

    ContextWindow {
        candidate: candidate.clone(),
        own_doc_sentences,
        other_docs,
        token_budget: budget,
    }
}

/// Score propositions through a backend, order-preserving.
pub fn score_propositions(
    props: &[Proposition],
    topic: &Topic,
    backend: &dyn SalienceBackend,
) -> Result<Vec<ScoredProposition>, SalienceError> {
    if props.is_empty() {
        return Ok(Vec::new());
    }
    let windows: Vec<ContextWindow> = props
        .iter()
        .map(|p| build_context_window(p, topic, DEFAULT_TOKEN_BUDGET))
        .collect();
    let scores =
        backend
            .score_batch(&windows)
            .map_err(|message| SalienceError::BackendFailure {
                batch_index: 0,
                message,
            })?;
    if scores.len() != props.len() {
        return Err(SalienceError::BackendFailure {
            batch_index: 0,
            message: format!(
                "backend returned {} scores for {} instances",
                scores.len(),
                props.len()
            ),
        });
    }
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() || !(0.0..=1.0).contains(&s) {
            return Err(SalienceError::BackendFailure {
                batch_index: i,
                message: format!("score {s} outside [0,1]"),
            });
        }
    }
    Ok(props
        .iter()
        .zip(scores)
        .map(|(p, score)| ScoredProposition {
            proposition: p.clone(),
            score,
        })
        .collect())
}

/// Keep propositions with score >= tau, preserving order.
pub fn filter_by_threshold(scored: &[ScoredProposition], tau: f64) -> Vec<ScoredProposition> {
    scored.iter().filter(|s| s.score >= tau).cloned().collect()
}

fn content_tokens(text: &str) -> Vec<String> {
    rouge::tokenize_raw(text)
        .into_iter()
        .filter(|t| !rouge::is_stopword(t))
        .map(|t| rouge::stem(&t))
        .collect()
}

/// Deterministic, model-free salience scorer built on cross-document
/// repetition. For a candidate with content-token set P over a window of D
/// documents:
///
///   score = min(1, 0.5 * df/D + 0.5 * cos(P, centroid))
///
/// where df counts window documents containing at least half of P's tokens,
/// and the centroid is the mean of per-document tf-idf vectors
/// (tf = token count in the document, idf = ln(1 + D/df_t)), compared by
/// cosine against P's binary vector.
#[derive(Debug, Default)]
pub struct LexicalSalienceBackend;

impl LexicalSalienceBackend {
    fn score_window(window: &ContextWindow) -> f64 {
        let prop_tokens: BTreeSet<String> =
            content_tokens(&window.candidate.text).into_iter().collect();
        if prop_tokens.is_empty() {
            return 0.0;
        }
        let mut doc_token_lists: Vec<Vec<String>> = vec![window
            .own_doc_sentences
            .iter()
            .flat_map(|s| content_tokens(s))
            .collect()];
        for (_, sentences) in &window.other_docs {
            doc_token_lists.push(sentences.iter().flat_map(|s| content_tokens(s)).collect());
        }
        let doc_count = doc_token_lists.len() as f64;

        // BTreeMaps keep float accumulation in sorted-key order, so equal
        // inputs produce bit-equal scores.
        let doc_sets: Vec<BTreeSet<&String>> =
            doc_token_lists.iter().map(|d| d.iter().collect()).collect();
        let needed = prop_tokens.len() as f64 * 0.5;
        let df = doc_sets
            .iter()
            .filter(|set| prop_tokens.iter().filter(|t| set.contains(t)).count() as f64 >= needed)
            .count() as f64;

        // Per-term document frequency for idf.
        let mut term_df: BTreeMap<&String, usize> = BTreeMap::new();
        for set in &doc_sets {
            for t in set {
                *term_df.entry(t).or_insert(0) += 1;
            }
        }
        let idf = |t: &String| -> f64 {
            let d = term_df.get(t).copied().unwrap_or(0) as f64;
            if d == 0.0 {
                0.0
            } else {
                (1.0 + doc_count / d).ln()
            }
        };
        let mut centroid: BTreeMap<&String, f64> = BTreeMap::new();
        for tokens in &doc_token_lists {
            let mut tf: BTreeMap<&String, f64> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_insert(0.0) += 1.0;
            }
            for (t, count) in tf {
                *centroid.entry(t).or_insert(0.0) += count * idf(t) / doc_count;
            }
        }
        let centroid_norm = centroid.values().map(|v| v * v).sum::<f64>().sqrt();
        let cosine = if centroid_norm == 0.0 {
            0.0
        } else {
            let dot: f64 = prop_tokens
                .iter()
                .map(|t| centroid.get(t).copied().unwrap_or(0.0))
                .sum();
            dot / ((prop_tokens.len() as f64).sqrt() * centroid_norm)
        };
        (0.5 * df / doc_count + 0.5 * cosine).min(1.0)
    }
}

impl SalienceBackend for LexicalSalienceBackend {
    fn backend_id(&self) -> &str {
        "lexical"
    }

    fn score_batch(&self, instances: &[ContextWindow]) -> Result<Vec<f64>, String> {
        Ok(instances.iter().map(Self::score_window).collect())
    }
}

/// Delimiters used when serializing training instances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Delimiters {
    pub prop_start: String,
    pub prop_end: String,
    pub doc_sep: String,
    pub sent_sep: String,
}

impl Default for Delimiters {
    fn default() -> Self {
        Self {
            prop_start: "<prop>".into(),
            prop_end: "</prop>".into(),
            doc_sep: "<doc-sep>".into(),
            sent_sep: "<sent-sep>".into(),
        }
    }
}

fn mark_candidate(sentence_text: &str, candidate: &Proposition, delims: &Delimiters) -> String {
    let mut chars: Vec<char> = sentence_text.chars().collect();
    // Insert right-to-left so earlier offsets stay valid; each span part is
    // marked separately, covering discontinuous propositions.
    for &(start, end) in candidate.spans.iter().rev() {
        if end <= chars.len() && start < end {
            chars.splice(end..end, delims.prop_end.chars());
            chars.splice(start..start, delims.prop_start.chars());
        }
    }
    chars.into_iter().collect()
}

/// Serialize one context window to the flat training string: the candidate
/// marked within its own document, then the other documents, separated by
/// the document delimiter, sentences by the sentence delimiter. When the
/// candidate's sentence lies beyond the own-document prefix it is appended
/// after the prefix so the marked span is always present.
pub fn serialize_context_window(
    window: &ContextWindow,
    topic: &Topic,
    delims: &Delimiters,
) -> String {
    let idx = window.candidate.sent_index;
    let marked = topic
        .document(&window.candidate.doc_id)
        .and_then(|d| d.sentences.get(idx))
        .map(|s| mark_candidate(&s.text, &window.candidate, delims))
        .unwrap_or_default();
    let mut own: Vec<String> = window.own_doc_sentences.clone();
    if idx < own.len() {
        own[idx] = marked;
    } else {
        own.push(marked);
    }
    let mut parts = vec![own.join(&delims.sent_sep)];
    for (_, sentences) in &window.other_docs {
        parts.push(sentences.join(&delims.sent_sep));
    }
    parts.join(&delims.doc_sep)
}

/// One serialized training instance, as written to `salience_train.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub topic_id: String,
    pub prop_id: String,
    pub label: u8,
    pub input: String,
}

/// Materialize a balanced training set into serialized records.
pub fn build_training_records(
    topic: &Topic,
    props: &[Proposition],
    balanced: &BalancedTrainingSet,
    delims: &Delimiters,
    budget: usize,
) -> Vec<TrainingRecord> {
    let by_id: HashMap<&str, &Proposition> =
        props.iter().map(|p| (p.prop_id.as_str(), p)).collect();
    balanced
        .examples
        .iter()
        .filter_map(|(prop_id, label)| {
            by_id.get(prop_id.as_str()).map(|p| {
                let window = build_context_window(p, topic, budget);
                TrainingRecord {
                    topic_id: topic.topic_id.clone(),
                    prop_id: prop_id.clone(),
                    label: *label,
                    input: serialize_context_window(&window, topic, delims),
                }
            })
        })
        .collect()
}
