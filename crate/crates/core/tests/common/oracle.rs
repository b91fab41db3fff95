//! Independent brute-force oracles. These deliberately avoid the library's
//! counting structures: clipped matching consumes reference instances via
//! linear scans over used-flags, and skip-bigram units come from explicit
//! pair enumeration.

use propsum::rouge::{self, MultiRef, RougeConfig};

/// Candidate-side token preparation mirroring the documented pipeline:
/// raw tokens, truncation, optional stopword removal, optional stemming.
pub fn prepare_candidate(text: &str, cfg: &RougeConfig) -> Vec<String> {
    let mut tokens = rouge::tokenize_raw(text);
    tokens.truncate(cfg.max_words);
    if cfg.remove_stopwords {
        tokens.retain(|t| !rouge::is_stopword(t));
    }
    if cfg.stem {
        for t in &mut tokens {
            *t = rouge::stem(t);
        }
    }
    tokens
}

pub fn prepare_reference(text: &str, cfg: &RougeConfig) -> Vec<String> {
    let mut tokens = rouge::tokenize_raw(text);
    if cfg.remove_stopwords {
        tokens.retain(|t| !rouge::is_stopword(t));
    }
    if cfg.stem {
        for t in &mut tokens {
            *t = rouge::stem(t);
        }
    }
    tokens
}

fn ngram_list(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    if n == 0 || tokens.len() < n {
        return Vec::new();
    }
    tokens.windows(n).map(|w| w.to_vec()).collect()
}

/// Clipped overlap by explicit consumption: every candidate unit may match
/// at most one unconsumed reference unit.
fn consumed_overlap(candidate_units: &[Vec<String>], reference_units: &[Vec<String>]) -> usize {
    let mut used = vec![false; reference_units.len()];
    let mut overlap = 0;
    for unit in candidate_units {
        for (i, r) in reference_units.iter().enumerate() {
            if !used[i] && r == unit {
                used[i] = true;
                overlap += 1;
                break;
            }
        }
    }
    overlap
}

fn f1_triple(overlap: usize, cand_total: usize, ref_total: usize) -> (f64, f64, f64) {
    if cand_total == 0 || ref_total == 0 {
        return (0.0, 0.0, 0.0);
    }
    let p = overlap as f64 / cand_total as f64;
    let r = overlap as f64 / ref_total as f64;
    let f1 = if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    };
    (p, r, f1)
}

fn combine(per_ref: Vec<(f64, f64, f64)>, mode: MultiRef) -> (f64, f64, f64) {
    match mode {
        MultiRef::Average => {
            let n = per_ref.len() as f64;
            let sum = per_ref.iter().fold((0.0, 0.0, 0.0), |acc, s| {
                (acc.0 + s.0, acc.1 + s.1, acc.2 + s.2)
            });
            (sum.0 / n, sum.1 / n, sum.2 / n)
        }
        MultiRef::Max => per_ref
            .into_iter()
            .reduce(|best, s| if s.2 > best.2 { s } else { best })
            .unwrap_or((0.0, 0.0, 0.0)),
    }
}

/// Brute-force ROUGE-N (precision, recall, f1).
pub fn brute_rouge_n(
    candidate: &str,
    references: &[String],
    n: usize,
    cfg: &RougeConfig,
) -> (f64, f64, f64) {
    let cand_units = ngram_list(&prepare_candidate(candidate, cfg), n);
    let per_ref = references
        .iter()
        .map(|r| {
            let ref_units = ngram_list(&prepare_reference(r, cfg), n);
            f1_triple(
                consumed_overlap(&cand_units, &ref_units),
                cand_units.len(),
                ref_units.len(),
            )
        })
        .collect();
    combine(per_ref, cfg.multi_ref)
}

/// Exhaustive SU unit enumeration: every (i, j) index pair with gap at most
/// `skip_distance`, plus unigrams when configured.
pub fn enumerate_su_units(tokens: &[String], cfg: &RougeConfig) -> Vec<Vec<String>> {
    let mut units = Vec::new();
    for i in 0..tokens.len() {
        for j in (i + 1)..tokens.len() {
            if j - i - 1 <= cfg.skip_distance {
                units.push(vec![tokens[i].clone(), tokens[j].clone()]);
            }
        }
    }
    if cfg.include_unigrams_in_su {
        for t in tokens {
            units.push(vec![t.clone()]);
        }
    }
    units
}

/// Brute-force ROUGE-SU (precision, recall, f1).
pub fn brute_rouge_su(
    candidate: &str,
    references: &[String],
    cfg: &RougeConfig,
) -> (f64, f64, f64) {
    let cand_units = enumerate_su_units(&prepare_candidate(candidate, cfg), cfg);
    let per_ref = references
        .iter()
        .map(|r| {
            let ref_units = enumerate_su_units(&prepare_reference(r, cfg), cfg);
            f1_triple(
                consumed_overlap(&cand_units, &ref_units),
                cand_units.len(),
                ref_units.len(),
            )
        })
        .collect();
    combine(per_ref, cfg.multi_ref)
}
