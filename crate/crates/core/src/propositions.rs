//! Propositions: possibly discontinuous sub-sentential spans with full
//! provenance, extracted from documents through a pluggable backend.
//!
//! Two reference backends ship in-tree: `passthrough` (one proposition per
//! sentence, spanning the whole sentence — this is also how sentence-level
//! granularity is realized) and `fixture` (gold tuples read from a
//! `propositions.jsonl` file). Model-based extractors plug in behind the
//! same trait.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Topic;

/// Character span (start, end) into a sentence, end exclusive.
pub type Span = (usize, usize);

#[derive(Debug, Error)]
pub enum PropositionError {
    #[error("invalid spans: {0}")]
    InvalidSpans(String),
    #[error("extraction backend failed at {doc_id}/{sent_index}: {message}")]
    BackendFailure {
        doc_id: String,
        sent_index: usize,
        message: String,
    },
    #[error("fixture file error: {0}")]
    FixtureFile(String),
}

/// A single predicate-argument span with provenance and rendered text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposition {
    /// Deterministic id: `topic_id/doc_id/sent_index/ordinal`.
    pub prop_id: String,
    pub topic_id: String,
    pub doc_id: String,
    pub sent_index: usize,
    /// Position among the tuples the backend returned for this sentence.
    pub ordinal: usize,
    pub spans: Vec<Span>,
    pub text: String,
    pub is_contiguous: bool,
}

/// Provenance handed to extraction backends along with the sentence text,
/// so fixture-style backends can key on it.
#[derive(Debug, Clone, Copy)]
pub struct SentenceContext<'a> {
    pub topic_id: &'a str,
    pub doc_id: &'a str,
    pub sent_index: usize,
    pub text: &'a str,
}

/// Extracts predicate-argument tuples (as span lists) from one sentence.
/// Must be deterministic for a fixed input.
pub trait ExtractionBackend {
    fn backend_id(&self) -> &str;
    fn extract(&self, sentence: &SentenceContext) -> Result<Vec<Vec<Span>>, String>;
}

fn validate_spans(sentence_len: usize, spans: &[Span]) -> Result<(), PropositionError> {
    if spans.is_empty() {
        return Err(PropositionError::InvalidSpans("no spans".into()));
    }
    let mut prev_end = 0usize;
    for (i, &(start, end)) in spans.iter().enumerate() {
        if start >= end {
            return Err(PropositionError::InvalidSpans(format!(
                "span {i} ({start},{end}) is empty or reversed"
            )));
        }
        if i > 0 && start < prev_end {
            return Err(PropositionError::InvalidSpans(format!(
                "span {i} ({start},{end}) overlaps or is out of order"
            )));
        }
        if end > sentence_len {
            return Err(PropositionError::InvalidSpans(format!(
                "span {i} ({start},{end}) exceeds sentence length {sentence_len}"
            )));
        }
        prev_end = end;
    }
    Ok(())
}

/// Render a tuple of spans to a proposition string: each span substring is
/// whitespace-trimmed and the parts are joined by single spaces in span
/// order. All-whitespace parts are dropped.
pub fn render_proposition(sentence_text: &str, spans: &[Span]) -> Result<String, PropositionError> {
    let chars: Vec<char> = sentence_text.chars().collect();
    validate_spans(chars.len(), spans)?;
    let parts: Vec<String> = spans
        .iter()
        .map(|&(start, end)| {
            chars[start..end]
                .iter()
                .collect::<String>()
                .trim()
                .to_string()
        })
        .filter(|p| !p.is_empty())
        .collect();
    Ok(parts.join(" "))
}

fn spans_contiguous(spans: &[Span]) -> bool {
    spans.windows(2).all(|w| w[1].0 == w[0].1)
}

/// Extract all propositions of a topic, in (document order, sentence index,
/// backend tuple order). Re-running yields identical ids and texts.
pub fn extract_propositions(
    topic: &Topic,
    backend: &dyn ExtractionBackend,
) -> Result<Vec<Proposition>, PropositionError> {
    let mut out = Vec::new();
    for doc in &topic.documents {
        for sentence in &doc.sentences {
            let ctx = SentenceContext {
                topic_id: &topic.topic_id,
                doc_id: &doc.doc_id,
                sent_index: sentence.index,
                text: &sentence.text,
            };
            let tuples =
                backend
                    .extract(&ctx)
                    .map_err(|message| PropositionError::BackendFailure {
                        doc_id: doc.doc_id.clone(),
                        sent_index: sentence.index,
                        message,
                    })?;
            for (ordinal, spans) in tuples.into_iter().enumerate() {
                let text = render_proposition(&sentence.text, &spans).map_err(|e| {
                    PropositionError::BackendFailure {
                        doc_id: doc.doc_id.clone(),
                        sent_index: sentence.index,
                        message: e.to_string(),
                    }
                })?;
                out.push(Proposition {
                    prop_id: format!(
                        "{}/{}/{}/{}",
                        topic.topic_id, doc.doc_id, sentence.index, ordinal
                    ),
                    topic_id: topic.topic_id.clone(),
                    doc_id: doc.doc_id.clone(),
                    sent_index: sentence.index,
                    ordinal,
                    is_contiguous: spans_contiguous(&spans),
                    spans,
                    text,
                });
            }
        }
    }
    Ok(out)
}

/// Extract propositions from reference summaries through the same backend
/// interface. Each reference is wrapped as a one-sentence pseudo-document
/// with doc id `ref:<ref_id>`, so fixtures can address them too.
pub fn extract_reference_propositions(
    topic: &Topic,
    backend: &dyn ExtractionBackend,
) -> Result<Vec<Proposition>, PropositionError> {
    let mut out = Vec::new();
    for reference in &topic.references {
        let doc_id = format!("ref:{}", reference.ref_id);
        let ctx = SentenceContext {
            topic_id: &topic.topic_id,
            doc_id: &doc_id,
            sent_index: 0,
            text: &reference.text,
        };
        let tuples = backend
            .extract(&ctx)
            .map_err(|message| PropositionError::BackendFailure {
                doc_id: doc_id.clone(),
                sent_index: 0,
                message,
            })?;
        for (ordinal, spans) in tuples.into_iter().enumerate() {
            let text = render_proposition(&reference.text, &spans).map_err(|e| {
                PropositionError::BackendFailure {
                    doc_id: doc_id.clone(),
                    sent_index: 0,
                    message: e.to_string(),
                }
            })?;
            out.push(Proposition {
                prop_id: format!("{}/{}/0/{}", topic.topic_id, doc_id, ordinal),
                topic_id: topic.topic_id.clone(),
                doc_id: doc_id.clone(),
                sent_index: 0,
                ordinal,
                is_contiguous: spans_contiguous(&spans),
                spans,
                text,
            });
        }
    }
    Ok(out)
}

/// One proposition per sentence, spanning the whole sentence. Empty
/// sentences yield nothing.
#[derive(Debug, Default)]
pub struct PassthroughBackend;

impl ExtractionBackend for PassthroughBackend {
    fn backend_id(&self) -> &str {
        "passthrough"
    }

    fn extract(&self, sentence: &SentenceContext) -> Result<Vec<Vec<Span>>, String> {
        let len = sentence.text.chars().count();
        if len == 0 {
            return Ok(Vec::new());
        }
        Ok(vec![vec![(0, len)]])
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct FixtureRecord {
    topic_id: String,
    doc_id: String,
    sent_index: usize,
    spans: Vec<Span>,
}

/// Gold tuples read from a `propositions.jsonl` fixture; keyed by
/// (topic_id, doc_id, sent_index), preserved in file order.
#[derive(Debug, Default)]
pub struct FixtureBackend {
    tuples: HashMap<(String, String, usize), Vec<Vec<Span>>>,
}

impl FixtureBackend {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, PropositionError> {
        let content = fs::read_to_string(path.as_ref()).map_err(|e| {
            PropositionError::FixtureFile(format!("{}: {e}", path.as_ref().display()))
        })?;
        let mut tuples: HashMap<(String, String, usize), Vec<Vec<Span>>> = HashMap::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(line)
                .map_err(|e| PropositionError::FixtureFile(format!("line {}: {e}", i + 1)))?;
            tuples
                .entry((record.topic_id, record.doc_id, record.sent_index))
                .or_default()
                .push(record.spans);
        }
        Ok(Self { tuples })
    }
}

impl ExtractionBackend for FixtureBackend {
    fn backend_id(&self) -> &str {
        "fixture"
    }

    fn extract(&self, sentence: &SentenceContext) -> Result<Vec<Vec<Span>>, String> {
        let key = (
            sentence.topic_id.to_string(),
            sentence.doc_id.to_string(),
            sentence.sent_index,
        );
        Ok(self.tuples.get(&key).cloned().unwrap_or_default())
    }
}
