//! Shared fixtures and independent oracles for the integration suites.

#![allow(dead_code)]

use std::fmt::Write as _;

use propsum::corpus::{load_corpus, Topic};
use propsum::rouge::RougeConfig;

pub mod oracle;

/// Build a topics.jsonl line from (doc_id, date, sentences) triples.
pub fn topic_json(
    topic_id: &str,
    docs: &[(&str, Option<&str>, Vec<String>)],
    references: &[(&str, &str)],
) -> String {
    let mut out = String::new();
    write!(out, "{{\"topic_id\":{topic_id:?},\"documents\":[").unwrap();
    for (i, (doc_id, date, sentences)) in docs.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let date_json = match date {
            Some(d) => format!("{d:?}"),
            None => "null".to_string(),
        };
        let sents: Vec<String> = sentences.iter().map(|s| format!("{s:?}")).collect();
        write!(
            out,
            "{{\"doc_id\":{doc_id:?},\"date\":{date_json},\"sentences\":[{}]}}",
            sents.join(",")
        )
        .unwrap();
    }
    write!(out, "],\"references\":[").unwrap();
    for (i, (ref_id, text)) in references.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{{\"ref_id\":{ref_id:?},\"text\":{text:?}}}").unwrap();
    }
    out.push_str("]}");
    out
}

/// Parse topics from raw jsonl lines via the production loader.
pub fn topics_from_lines(lines: &[String]) -> Vec<Topic> {
    use std::io::Write as _;
    let mut f = tempfile::NamedTempFile::new().unwrap();
    for line in lines {
        writeln!(f, "{line}").unwrap();
    }
    load_corpus(f.path()).unwrap()
}

/// The planted-recovery topic: one fact paraphrased in six documents, two
/// facts in three documents each, and twenty singleton distractors spread
/// across ten documents.
pub struct PlantedTopic {
    pub topic: Topic,
    pub fact_a: Vec<String>,
    pub fact_b: Vec<String>,
    pub fact_c: Vec<String>,
}

pub fn planted_topic() -> PlantedTopic {
    let fact_a = vec![
        "The volcano erupted on Monday morning.".to_string(),
        "The volcano erupted Monday morning.".to_string(),
        "On Monday morning the volcano erupted.".to_string(),
        "Monday morning: the volcano erupted.".to_string(),
        "The volcano erupted, Monday morning.".to_string(),
        "It was on Monday morning that the volcano erupted.".to_string(),
    ];
    let fact_b = vec![
        "Officials evacuated nearby villages quickly.".to_string(),
        "Officials quickly evacuated nearby villages.".to_string(),
        "Nearby villages were evacuated quickly by officials.".to_string(),
    ];
    let fact_c = vec![
        "Lava flows destroyed the coastal highway.".to_string(),
        "The coastal highway was destroyed by lava flows.".to_string(),
        "Lava flows destroyed a coastal highway.".to_string(),
    ];
    let mut distractors: Vec<String> = (0..20)
        .map(|i| format!("Item{i}x brings item{i}y near item{i}z."))
        .collect();
    distractors.reverse();

    let mut docs: Vec<(String, Option<String>, Vec<String>)> = Vec::new();
    for d in 0..10usize {
        let mut sentences = Vec::new();
        if d < 6 {
            sentences.push(fact_a[d].clone());
        }
        if d < 3 {
            sentences.push(fact_b[d].clone());
        }
        if (3..6).contains(&d) {
            sentences.push(fact_c[d - 3].clone());
        }
        sentences.push(distractors.pop().unwrap());
        sentences.push(distractors.pop().unwrap());
        docs.push((
            format!("d{d}"),
            Some(format!("2008-04-{:02}", d + 1)),
            sentences,
        ));
    }
    let doc_refs: Vec<(&str, Option<&str>, Vec<String>)> = docs
        .iter()
        .map(|(id, date, sents)| (id.as_str(), date.as_deref(), sents.clone()))
        .collect();
    let line = topic_json(
        "planted",
        &doc_refs,
        &[(
            "r1",
            "The volcano erupted on Monday morning. Officials evacuated nearby villages quickly. \
             Lava flows destroyed the coastal highway.",
        )],
    );
    let topic = topics_from_lines(&[line]).remove(0);
    PlantedTopic {
        topic,
        fact_a,
        fact_b,
        fact_c,
    }
}

/// A small varied corpus for end-to-end suites: the planted topic plus
/// three smaller shapes (two docs, dateless docs, single doc).
pub fn synthetic_suite() -> Vec<Topic> {
    let planted_line = {
        let p = planted_topic();
        let mut lines = Vec::new();
        let doc_refs: Vec<(&str, Option<&str>, Vec<String>)> = p
            .topic
            .documents
            .iter()
            .map(|d| {
                (
                    d.doc_id.as_str(),
                    d.date.as_deref(),
                    d.sentences.iter().map(|s| s.text.clone()).collect(),
                )
            })
            .collect();
        lines.push(topic_json(
            "planted",
            &doc_refs,
            &[(
                "r1",
                "The volcano erupted on Monday morning. Officials evacuated nearby villages quickly. \
                 Lava flows destroyed the coastal highway.",
            )],
        ));
        lines.remove(0)
    };
    let two_docs = topic_json(
        "storm",
        &[
            (
                "a",
                Some("2007-03-16"),
                vec![
                    "A severe storm hit the northern coast.".to_string(),
                    "Schools closed for two days.".to_string(),
                ],
            ),
            (
                "b",
                Some("2007-03-17"),
                vec![
                    "The severe storm hit the coast in the north.".to_string(),
                    "Fishing boats stayed in the harbor.".to_string(),
                ],
            ),
        ],
        &[
            (
                "r1",
                "A severe storm hit the northern coast and schools closed.",
            ),
            ("r2", "The storm closed schools for two days."),
        ],
    );
    let dateless = topic_json(
        "merger",
        &[
            (
                "x",
                None,
                vec![
                    "Two regional banks announced a merger.".to_string(),
                    "Regulators will review the merger deal.".to_string(),
                ],
            ),
            (
                "y",
                None,
                vec!["The two banks announced the merger on Friday.".to_string()],
            ),
        ],
        &[(
            "r1",
            "Two regional banks announced a merger pending regulatory review.",
        )],
    );
    let single = topic_json(
        "solo",
        &[(
            "only",
            Some("2010-01-01"),
            vec![
                "The museum reopened after renovations.".to_string(),
                "Visitors praised the new wing.".to_string(),
            ],
        )],
        &[(
            "r1",
            "The museum reopened after renovations to visitor praise.",
        )],
    );
    topics_from_lines(&[planted_line, two_docs, dateless, single])
}

pub fn default_rouge() -> RougeConfig {
    RougeConfig::default()
}
