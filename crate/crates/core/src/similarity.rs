//! Pairwise paraphrastic similarity with a persistent score cache.
//!
//! Pairwise scoring dominates pipeline runtime when a model backend is in
//! use, so scores are cached in an append-only `simcache.jsonl` keyed by a
//! content hash of the (unordered) text pair and backend id. Backends are
//! not assumed symmetric: each pair is scored in both directions and the
//! mean is used, which is what the cache stores.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rouge;
use crate::salience::ScoredProposition;

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("similarity backend failed: {0}")]
    BackendFailure(String),
    #[error("no propositions to score")]
    NoPropositions,
    #[error("matrix dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Scores text pairs in [0, 1]. Deterministic; one output per input pair.
pub trait SimilarityBackend {
    fn backend_id(&self) -> &str;
    fn score_pairs(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, String>;
}

/// Symmetric pairwise similarity over a fixed proposition list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub prop_ids: Vec<String>,
    /// Row-major n x n values; symmetric with unit diagonal.
    pub values: Vec<f64>,
    pub backend_id: String,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.prop_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prop_ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn index_of(&self, prop_id: &str) -> Option<usize> {
        self.prop_ids.iter().position(|p| p == prop_id)
    }

    /// Reorder rows/columns to match `prop_ids`; errors when the id sets
    /// differ.
    pub fn permuted(&self, prop_ids: &[String]) -> Result<SimilarityMatrix, SimilarityError> {
        if prop_ids.len() != self.len() {
            return Err(SimilarityError::DimensionMismatch(format!(
                "{} ids vs {} rows",
                prop_ids.len(),
                self.len()
            )));
        }
        let mapping: Vec<usize> = prop_ids
            .iter()
            .map(|id| {
                self.index_of(id).ok_or_else(|| {
                    SimilarityError::DimensionMismatch(format!("unknown prop_id {id}"))
                })
            })
            .collect::<Result<_, _>>()?;
        let n = self.len();
        let mut values = vec![0.0; n * n];
        for (i, &oi) in mapping.iter().enumerate() {
            for (j, &oj) in mapping.iter().enumerate() {
                values[i * n + j] = self.get(oi, oj);
            }
        }
        Ok(SimilarityMatrix {
            prop_ids: prop_ids.to_vec(),
            values,
            backend_id: self.backend_id.clone(),
        })
    }
}

/// Order-insensitive cache key: content hash of the sorted text pair plus
/// the backend id. Stable across runs.
pub fn cache_key(text_a: &str, text_b: &str, backend_id: &str) -> String {
    let (first, second) = if text_a <= text_b {
        (text_a, text_b)
    } else {
        (text_b, text_a)
    };
    let mut hasher = Sha256::new();
    hasher.update(first.as_bytes());
    hasher.update([0u8]);
    hasher.update(second.as_bytes());
    hasher.update([0u8]);
    hasher.update(backend_id.as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    score: f64,
}

fn load_cache(path: &Path) -> HashMap<String, f64> {
    let mut map = HashMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(_) => return map,
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                log::warn!(
                    "simcache {}: unreadable line {}: {e}",
                    path.display(),
                    i + 1
                );
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CacheRecord>(&line) {
            Ok(r) if r.score.is_finite() && (0.0..=1.0).contains(&r.score) => {
                map.insert(r.key, r.score);
            }
            _ => {
                // Tolerates partial trailing records and corrupt entries;
                // affected pairs are recomputed.
                log::warn!(
                    "simcache {}: skipping corrupt line {}",
                    path.display(),
                    i + 1
                );
            }
        }
    }
    map
}

fn append_cache(path: &Path, records: &[CacheRecord]) {
    if records.is_empty() {
        return;
    }
    // A partial trailing record (no final newline) must not swallow the
    // first appended record; start on a fresh line in that case.
    let needs_newline = std::fs::read(path)
        .map(|bytes| !bytes.is_empty() && bytes.last() != Some(&b'\n'))
        .unwrap_or(false);
    let result = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .and_then(|mut f| {
            if needs_newline {
                f.write_all(b"\n")?;
            }
            for r in records {
                // One write per record keeps appends atomic per line.
                let line = format!("{}\n", serde_json::to_string(r).expect("serializable"));
                f.write_all(line.as_bytes())?;
            }
            Ok(())
        });
    if let Err(e) = result {
        log::warn!("simcache {}: append failed: {e}", path.display());
    }
}

fn validate_scores(scores: &[f64], expected: usize) -> Result<(), SimilarityError> {
    if scores.len() != expected {
        return Err(SimilarityError::BackendFailure(format!(
            "backend returned {} scores for {expected} pairs",
            scores.len()
        )));
    }
    for &s in scores {
        if !s.is_finite() || !(0.0..=1.0).contains(&s) {
            return Err(SimilarityError::BackendFailure(format!(
                "score {s} outside [0,1]"
            )));
        }
    }
    Ok(())
}

/// Score all unordered pairs: each pair is evaluated in both directions and
/// averaged, the diagonal is forced to 1.0, and the cache (when given) is
/// consulted before any backend call and appended after.
pub fn pairwise_similarity(
    props: &[ScoredProposition],
    backend: &dyn SimilarityBackend,
    cache: Option<&Path>,
) -> Result<SimilarityMatrix, SimilarityError> {
    if props.is_empty() {
        return Err(SimilarityError::NoPropositions);
    }
    let n = props.len();
    let cached = cache.map(load_cache).unwrap_or_default();

    let mut keys = vec![String::new(); n * n];
    let mut misses: Vec<(usize, usize)> = Vec::new();
    let mut pairs: Vec<(String, String)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let a = &props[i].proposition.text;
            let b = &props[j].proposition.text;
            let key = cache_key(a, b, backend.backend_id());
            if !cached.contains_key(&key) {
                misses.push((i, j));
                pairs.push((a.clone(), b.clone()));
                pairs.push((b.clone(), a.clone()));
            }
            keys[i * n + j] = key;
        }
    }

    let mut fresh: HashMap<(usize, usize), f64> = HashMap::new();
    let mut new_records = Vec::new();
    if !pairs.is_empty() {
        let scores = backend
            .score_pairs(&pairs)
            .map_err(SimilarityError::BackendFailure)?;
        validate_scores(&scores, pairs.len())?;
        for (m, &(i, j)) in misses.iter().enumerate() {
            let score = (scores[2 * m] + scores[2 * m + 1]) / 2.0;
            fresh.insert((i, j), score);
            new_records.push(CacheRecord {
                key: keys[i * n + j].clone(),
                score,
            });
        }
    }
    if let Some(path) = cache {
        append_cache(path, &new_records);
    }

    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let score = fresh
                .get(&(i, j))
                .copied()
                .or_else(|| cached.get(&keys[i * n + j]).copied())
                .expect("every pair is cached or freshly scored");
            values[i * n + j] = score;
            values[j * n + i] = score;
        }
    }
    Ok(SimilarityMatrix {
        prop_ids: props
            .iter()
            .map(|p| p.proposition.prop_id.clone())
            .collect(),
        values,
        backend_id: backend.backend_id().to_string(),
    })
}

fn content_token_set(text: &str) -> std::collections::BTreeSet<String> {
    rouge::tokenize_raw(text)
        .into_iter()
        .filter(|t| !rouge::is_stopword(t))
        .map(|t| rouge::stem(&t))
        .collect()
}

/// Content-token Jaccard similarity: stopwords removed, Porter-stemmed,
/// set semantics. Two texts with empty content-token sets count as
/// identical (1.0).
#[derive(Debug, Default)]
pub struct LexicalSimilarityBackend;

impl SimilarityBackend for LexicalSimilarityBackend {
    fn backend_id(&self) -> &str {
        "lexical"
    }

    fn score_pairs(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, String> {
        Ok(pairs
            .iter()
            .map(|(a, b)| {
                let sa = content_token_set(a);
                let sb = content_token_set(b);
                if sa.is_empty() && sb.is_empty() {
                    return 1.0;
                }
                let inter = sa.intersection(&sb).count() as f64;
                let union = sa.union(&sb).count() as f64;
                inter / union
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propositions::Proposition;
    use std::cell::RefCell;

    fn scored(id: &str, text: &str) -> ScoredProposition {
        ScoredProposition {
            proposition: Proposition {
                prop_id: id.into(),
                topic_id: "t".into(),
                doc_id: "d".into(),
                sent_index: 0,
                ordinal: 0,
                spans: vec![(0, text.chars().count().max(1))],
                text: text.into(),
                is_contiguous: true,
            },
            score: 0.5,
        }
    }

    /// Wraps a backend and counts pair evaluations.
    struct Counting<'a> {
        inner: &'a dyn SimilarityBackend,
        calls: RefCell<usize>,
    }

    impl SimilarityBackend for Counting<'_> {
        fn backend_id(&self) -> &str {
            self.inner.backend_id()
        }
        fn score_pairs(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, String> {
            *self.calls.borrow_mut() += pairs.len();
            self.inner.score_pairs(pairs)
        }
    }

    #[test]
    fn single_proposition_gives_unit_matrix() {
        let matrix =
            pairwise_similarity(&[scored("p1", "abc")], &LexicalSimilarityBackend, None).unwrap();
        assert_eq!(matrix.values, vec![1.0]);
    }

    #[test]
    fn duplicate_texts_score_one_off_diagonal() {
        let props = vec![scored("p1", "hun sen won"), scored("p2", "hun sen won")];
        let matrix = pairwise_similarity(&props, &LexicalSimilarityBackend, None).unwrap();
        assert_eq!(matrix.get(0, 1), 1.0);
        assert_eq!(matrix.get(1, 0), 1.0);
    }

    #[test]
    fn jaccard_partial_overlap() {
        let props = vec![
            scored("p1", "alpha beta gamma"),
            scored("p2", "alpha beta delta"),
        ];
        let matrix = pairwise_similarity(&props, &LexicalSimilarityBackend, None).unwrap();
        assert!((matrix.get(0, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cache_key_is_order_insensitive_and_backend_sensitive() {
        assert_eq!(cache_key("a", "b", "x"), cache_key("b", "a", "x"));
        assert_ne!(cache_key("a", "b", "x"), cache_key("a", "b", "y"));
        assert_eq!(cache_key("a", "b", "x"), cache_key("a", "b", "x"));
    }

    #[test]
    fn matrix_is_explicitly_symmetric_even_for_asymmetric_backends() {
        struct Asymmetric;
        impl SimilarityBackend for Asymmetric {
            fn backend_id(&self) -> &str {
                "asym"
            }
            fn score_pairs(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, String> {
                Ok(pairs
                    .iter()
                    .map(|(a, b)| if a < b { 0.2 } else { 0.8 })
                    .collect())
            }
        }
        let props = vec![scored("p1", "aaa"), scored("p2", "bbb")];
        let matrix = pairwise_similarity(&props, &Asymmetric, None).unwrap();
        assert_eq!(matrix.get(0, 1), matrix.get(1, 0));
        assert!((matrix.get(0, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cold_cache_calls_both_directions_warm_cache_calls_none() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("simcache.jsonl");
        let props: Vec<ScoredProposition> = (0..4)
            .map(|i| scored(&format!("p{i}"), &format!("text number {i}")))
            .collect();

        let cold = Counting {
            inner: &LexicalSimilarityBackend,
            calls: RefCell::new(0),
        };
        let first = pairwise_similarity(&props, &cold, Some(&cache)).unwrap();
        assert_eq!(*cold.calls.borrow(), 2 * 6, "2 * C(4,2) evaluations");

        let warm = Counting {
            inner: &LexicalSimilarityBackend,
            calls: RefCell::new(0),
        };
        let second = pairwise_similarity(&props, &warm, Some(&cache)).unwrap();
        assert_eq!(*warm.calls.borrow(), 0);
        assert_eq!(
            first, second,
            "cache path and compute path must agree bit-exactly"
        );
    }

    #[test]
    fn corrupt_cache_lines_are_skipped_and_recomputed() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("simcache.jsonl");
        std::fs::write(&cache, "not json at all\n{\"key\": \"truncat").unwrap();
        let props = vec![scored("p1", "alpha beta"), scored("p2", "alpha beta")];
        let matrix = pairwise_similarity(&props, &LexicalSimilarityBackend, Some(&cache)).unwrap();
        assert_eq!(matrix.get(0, 1), 1.0);
        // The recomputed pair is appended after the junk.
        let content = std::fs::read_to_string(&cache).unwrap();
        assert!(content.lines().count() >= 3);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            pairwise_similarity(&[], &LexicalSimilarityBackend, None),
            Err(SimilarityError::NoPropositions)
        ));
    }

    #[test]
    fn permuted_reorders_rows_and_columns() {
        let props = vec![
            scored("p1", "alpha beta"),
            scored("p2", "alpha beta gamma"),
            scored("p3", "unrelated words"),
        ];
        let matrix = pairwise_similarity(&props, &LexicalSimilarityBackend, None).unwrap();
        let ids = vec!["p3".to_string(), "p1".to_string(), "p2".to_string()];
        let permuted = matrix.permuted(&ids).unwrap();
        assert_eq!(permuted.get(1, 2), matrix.get(0, 1));
        assert_eq!(permuted.get(0, 0), 1.0);
        assert!(matrix.permuted(&["p1".to_string()]).is_err());
    }
}
