//! Corpus data model: topics, documents, sentences, reference summaries.
//!
//! Input is a `topics.jsonl` file, one topic object per line. Sentences come
//! pre-segmented; the loader computes token offsets but performs no other
//! linguistic preprocessing. Documents are normalized to (date ascending,
//! doc_id ascending) order, dateless documents last, so every downstream
//! stage sees the same deterministic ordering regardless of file order.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rouge::token_spans;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus file not found: {0}")]
    MissingFile(String),
    #[error("schema violation at line {line}: {field}: {message}")]
    SchemaViolation {
        line: usize,
        field: String,
        message: String,
    },
    #[error("duplicate id: {0}")]
    DuplicateId(String),
    #[error("unknown document: {0}")]
    UnknownDocument(String),
    #[error("sentence index {index} out of range for document {doc_id}")]
    IndexOutOfRange { doc_id: String, index: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One pre-segmented sentence with the character spans of its tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub token_offsets: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    /// ISO-8601 date (YYYY-MM-DD); lexicographic order is date order.
    pub date: Option<String>,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub ref_id: String,
    pub text: String,
}

/// One summarization instance: a set of dated documents plus references.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    pub documents: Vec<Document>,
    pub references: Vec<ReferenceSummary>,
}

impl Topic {
    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    /// Position of a document in the normalized (date, doc_id) order.
    pub fn doc_position(&self, doc_id: &str) -> Option<usize> {
        self.documents.iter().position(|d| d.doc_id == doc_id)
    }

    pub fn reference_texts(&self) -> Vec<String> {
        self.references.iter().map(|r| r.text.clone()).collect()
    }
}

/// Fetch a sentence by document id and index.
pub fn sentence_at<'a>(
    topic: &'a Topic,
    doc_id: &str,
    index: usize,
) -> Result<&'a Sentence, CorpusError> {
    let doc = topic
        .document(doc_id)
        .ok_or_else(|| CorpusError::UnknownDocument(doc_id.to_string()))?;
    doc.sentences
        .get(index)
        .ok_or(CorpusError::IndexOutOfRange {
            doc_id: doc_id.to_string(),
            index,
        })
}

// On-disk records; sentences are plain strings until load computes offsets.

#[derive(Debug, Serialize, Deserialize)]
struct DocumentRecord {
    doc_id: String,
    date: Option<String>,
    sentences: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReferenceRecord {
    ref_id: String,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct TopicRecord {
    topic_id: String,
    documents: Vec<DocumentRecord>,
    references: Vec<ReferenceRecord>,
}

fn violation(line: usize, field: &str, message: impl Into<String>) -> CorpusError {
    CorpusError::SchemaViolation {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn valid_date(date: &str) -> bool {
    let bytes = date.as_bytes();
    if bytes.len() != 10 || bytes[4] != b'-' || bytes[7] != b'-' {
        return false;
    }
    let digits = |range: std::ops::Range<usize>| bytes[range].iter().all(u8::is_ascii_digit);
    if !(digits(0..4) && digits(5..7) && digits(8..10)) {
        return false;
    }
    let month: u32 = date[5..7].parse().unwrap_or(0);
    let day: u32 = date[8..10].parse().unwrap_or(0);
    (1..=12).contains(&month) && (1..=31).contains(&day)
}

fn validate_and_build(record: TopicRecord, line: usize) -> Result<Topic, CorpusError> {
    if record.topic_id.is_empty() {
        return Err(violation(line, "topic_id", "must be non-empty"));
    }
    if record.documents.is_empty() {
        return Err(violation(
            line,
            "documents",
            "at least one document required",
        ));
    }
    if record.references.is_empty() {
        return Err(violation(
            line,
            "references",
            "at least one reference required",
        ));
    }
    let mut doc_ids = HashSet::new();
    let mut documents = Vec::with_capacity(record.documents.len());
    for doc in record.documents {
        if doc.doc_id.is_empty() {
            return Err(violation(line, "doc_id", "must be non-empty"));
        }
        if !doc_ids.insert(doc.doc_id.clone()) {
            return Err(CorpusError::DuplicateId(format!(
                "{}/{}",
                record.topic_id, doc.doc_id
            )));
        }
        if let Some(date) = &doc.date {
            if !valid_date(date) {
                return Err(violation(line, "date", format!("not an ISO date: {date}")));
            }
        }
        if doc.sentences.is_empty() {
            return Err(violation(
                line,
                "sentences",
                format!("document {} has no sentences", doc.doc_id),
            ));
        }
        let sentences = doc
            .sentences
            .into_iter()
            .enumerate()
            .map(|(index, text)| Sentence {
                index,
                token_offsets: token_spans(&text),
                text,
            })
            .collect();
        documents.push(Document {
            doc_id: doc.doc_id,
            date: doc.date,
            sentences,
        });
    }
    for reference in &record.references {
        if reference.text.is_empty() {
            return Err(violation(
                line,
                "references.text",
                format!("reference {} is empty", reference.ref_id),
            ));
        }
    }
    // Dateless documents sort after all dated ones, ties by doc_id.
    documents.sort_by(|a, b| match (&a.date, &b.date) {
        (Some(x), Some(y)) => x.cmp(y).then_with(|| a.doc_id.cmp(&b.doc_id)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.doc_id.cmp(&b.doc_id),
    });
    Ok(Topic {
        topic_id: record.topic_id,
        documents,
        references: record
            .references
            .into_iter()
            .map(|r| ReferenceSummary {
                ref_id: r.ref_id,
                text: r.text,
            })
            .collect(),
    })
}

/// Load and validate all topics from a `topics.jsonl` file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Topic>, CorpusError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(CorpusError::MissingFile(path.display().to_string()));
    }
    let content = fs::read_to_string(path)?;
    let mut topics = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in content.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: TopicRecord =
            serde_json::from_str(raw).map_err(|e| violation(line, "topic", e.to_string()))?;
        if !seen.insert(record.topic_id.clone()) {
            return Err(CorpusError::DuplicateId(record.topic_id));
        }
        topics.push(validate_and_build(record, line)?);
    }
    Ok(topics)
}

/// Serialize topics back to the `topics.jsonl` schema.
pub fn save_corpus(topics: &[Topic], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut out = fs::File::create(path)?;
    for topic in topics {
        let record = TopicRecord {
            topic_id: topic.topic_id.clone(),
            documents: topic
                .documents
                .iter()
                .map(|d| DocumentRecord {
                    doc_id: d.doc_id.clone(),
                    date: d.date.clone(),
                    sentences: d.sentences.iter().map(|s| s.text.clone()).collect(),
                })
                .collect(),
            references: topic
                .references
                .iter()
                .map(|r| ReferenceRecord {
                    ref_id: r.ref_id.clone(),
                    text: r.text.clone(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &record).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_jsonl(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f
    }

    const TOPIC_LINE: &str = r#"{"topic_id":"t1","documents":[{"doc_id":"d1","date":"2007-03-17","sentences":["One sentence.","Two sentences."]},{"doc_id":"d2","date":"2007-03-16","sentences":["Other doc."]}],"references":[{"ref_id":"r1","text":"A reference."}]}"#;

    #[test]
    fn load_round_trip_topic() {
        let f = write_jsonl(&[TOPIC_LINE]);
        let topics = load_corpus(f.path()).unwrap();
        assert_eq!(topics.len(), 1);
        assert_eq!(topics[0].documents.len(), 2);
        assert_eq!(topics[0].references.len(), 1);
    }

    #[test]
    fn documents_sorted_by_date_then_id() {
        let f = write_jsonl(&[TOPIC_LINE]);
        let topics = load_corpus(f.path()).unwrap();
        // 2007-03-16 precedes 2007-03-17 despite file order.
        assert_eq!(topics[0].documents[0].doc_id, "d2");
        assert_eq!(topics[0].documents[1].doc_id, "d1");
    }

    #[test]
    fn dateless_documents_sort_last() {
        let line = r#"{"topic_id":"t1","documents":[{"doc_id":"a","date":null,"sentences":["x."]},{"doc_id":"b","date":"2001-01-01","sentences":["y."]}],"references":[{"ref_id":"r1","text":"z"}]}"#;
        let f = write_jsonl(&[line]);
        let topics = load_corpus(f.path()).unwrap();
        assert_eq!(topics[0].documents[0].doc_id, "b");
        assert_eq!(topics[0].documents[1].doc_id, "a");
    }

    #[test]
    fn zero_references_is_schema_violation() {
        let line = r#"{"topic_id":"t1","documents":[{"doc_id":"d1","date":null,"sentences":["x."]}],"references":[]}"#;
        let f = write_jsonl(&[line]);
        match load_corpus(f.path()) {
            Err(CorpusError::SchemaViolation { field, .. }) => assert_eq!(field, "references"),
            other => panic!("expected SchemaViolation, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_doc_id_rejected() {
        let line = r#"{"topic_id":"t1","documents":[{"doc_id":"d1","date":null,"sentences":["x."]},{"doc_id":"d1","date":null,"sentences":["y."]}],"references":[{"ref_id":"r1","text":"z"}]}"#;
        let f = write_jsonl(&[line]);
        assert!(matches!(
            load_corpus(f.path()),
            Err(CorpusError::DuplicateId(_))
        ));
    }

    #[test]
    fn duplicate_topic_id_rejected() {
        let f = write_jsonl(&[TOPIC_LINE, TOPIC_LINE]);
        assert!(matches!(
            load_corpus(f.path()),
            Err(CorpusError::DuplicateId(_))
        ));
    }

    #[test]
    fn missing_file_reported() {
        assert!(matches!(
            load_corpus("/nonexistent/topics.jsonl"),
            Err(CorpusError::MissingFile(_))
        ));
    }

    #[test]
    fn bad_date_rejected() {
        let line = r#"{"topic_id":"t1","documents":[{"doc_id":"d1","date":"March 17","sentences":["x."]}],"references":[{"ref_id":"r1","text":"z"}]}"#;
        let f = write_jsonl(&[line]);
        assert!(matches!(
            load_corpus(f.path()),
            Err(CorpusError::SchemaViolation { .. })
        ));
    }

    #[test]
    fn sentence_at_lookups() {
        let f = write_jsonl(&[TOPIC_LINE]);
        let topics = load_corpus(f.path()).unwrap();
        let topic = &topics[0];
        assert_eq!(sentence_at(topic, "d1", 0).unwrap().text, "One sentence.");
        assert!(matches!(
            sentence_at(topic, "dX", 0),
            Err(CorpusError::UnknownDocument(_))
        ));
        assert!(matches!(
            sentence_at(topic, "d1", 999),
            Err(CorpusError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn save_then_load_is_stable() {
        let f = write_jsonl(&[TOPIC_LINE]);
        let topics = load_corpus(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_corpus(&topics, out.path()).unwrap();
        let reloaded = load_corpus(out.path()).unwrap();
        assert_eq!(topics, reloaded);
    }

    #[test]
    fn token_offsets_computed_at_load() {
        let f = write_jsonl(&[TOPIC_LINE]);
        let topics = load_corpus(f.path()).unwrap();
        let sentence = sentence_at(&topics[0], "d1", 0).unwrap();
        assert_eq!(sentence.token_offsets, vec![(0, 3), (4, 12)]);
    }
}
