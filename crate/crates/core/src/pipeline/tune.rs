//! Grid search for the two pipeline thresholds, scored by full-pipeline
//! ROUGE on a validation corpus.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Topic;

use super::reports::evaluate_run;
use super::{run_pipeline, BackendRegistry, PipelineConfig, PipelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuneParam {
    /// Salience threshold.
    Tau,
    /// Clustering distance threshold.
    ClusterThreshold,
}

impl TuneParam {
    pub fn apply(self, cfg: &mut PipelineConfig, value: f64) {
        match self {
            TuneParam::Tau => cfg.salience_tau = value,
            TuneParam::ClusterThreshold => cfg.clustering.distance_threshold = value,
        }
    }
}

/// Grid values 0.1, 0.2, ..., 0.9.
pub fn grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub value: f64,
    /// metric -> mean F1 over topics.
    pub mean_f1: BTreeMap<String, f64>,
    /// Selection criterion: mean ROUGE-1 F1 + mean ROUGE-2 F1.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub param: TuneParam,
    pub grid: Vec<GridPoint>,
    pub best_value: f64,
}

/// Evaluate every grid value with the full pipeline; best value maximizes
/// mean R1 F1 + R2 F1 (first value wins ties).
pub fn tune(
    topics: &[Topic],
    base_cfg: &PipelineConfig,
    param: TuneParam,
    registry: &BackendRegistry,
    sim_cache: Option<&Path>,
) -> Result<TuneReport, PipelineError> {
    if topics.is_empty() {
        return Err(PipelineError::Data("no topics to tune on".into()));
    }
    let mut points = Vec::new();
    for value in grid() {
        let mut cfg = base_cfg.clone();
        param.apply(&mut cfg, value);
        let mut sums: BTreeMap<String, f64> = BTreeMap::new();
        for topic in topics {
            let output = run_pipeline(topic, &cfg, registry, sim_cache)?;
            let scores = evaluate_run(&output.artifact, &topic.reference_texts(), &cfg.rouge)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            for (metric, score) in scores {
                *sums.entry(metric).or_insert(0.0) += score.f1;
            }
        }
        let mean_f1: BTreeMap<String, f64> = sums
            .into_iter()
            .map(|(k, v)| (k, v / topics.len() as f64))
            .collect();
        let objective = mean_f1.get("rouge-1").copied().unwrap_or(0.0)
            + mean_f1.get("rouge-2").copied().unwrap_or(0.0);
        points.push(GridPoint {
            value,
            mean_f1,
            objective,
        });
    }
    let best_value = points
        .iter()
        .max_by(|a, b| {
            a.objective
                .partial_cmp(&b.objective)
                .unwrap()
                // Prefer the smaller threshold on exact ties.
                .then(b.value.partial_cmp(&a.value).unwrap())
        })
        .map(|p| p.value)
        .expect("grid is non-empty");
    Ok(TuneReport {
        param,
        grid: points,
        best_value,
    })
}
