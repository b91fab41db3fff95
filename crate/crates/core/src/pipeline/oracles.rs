//! Extractive upper bounds computed with access to the references.
//!
//! Three oracles bound different pipeline stages: free greedy selection
//! over all units (proposition- or sentence-level), per-cluster best
//! representatives taken in rank order, and greedy re-ranking over fixed
//! per-cluster representatives.

use crate::clustering::Cluster;
use crate::corpus::Topic;
use crate::propositions::Proposition;
use crate::ranking::select_cluster_representative;
use crate::rouge::{combined_oracle_objective, word_count, RougeConfig};
use crate::salience::{canonical_order, greedy_select, GREEDY_GAIN_EPS};

use super::PipelineError;

/// Greedy selection over all units, maximizing ROUGE-1 F1 + ROUGE-2 F1
/// against the references; stops on no strict improvement or at the word
/// limit. Returns units in selection order.
pub fn oracle_greedy_units(
    topic: &Topic,
    units: &[Proposition],
    cfg: &RougeConfig,
) -> Result<Vec<Proposition>, PipelineError> {
    if units.is_empty() {
        return Err(PipelineError::Data(format!(
            "topic {}: no units for oracle selection",
            topic.topic_id
        )));
    }
    let mut ordered = units.to_vec();
    canonical_order(topic, &mut ordered);
    let texts: Vec<String> = ordered.iter().map(|u| u.text.clone()).collect();
    let selection = greedy_select(&texts, &topic.reference_texts(), cfg)
        .map_err(|e| PipelineError::Data(e.to_string()))?;
    Ok(selection
        .order
        .into_iter()
        .map(|i| ordered[i].clone())
        .collect())
}

/// One representative per cluster, chosen in rank order to maximize the
/// running objective. Selection is mandatory per cluster even at zero gain;
/// stops once the word limit is reached.
pub fn oracle_cluster_representatives(
    ranked_clusters: &[Cluster],
    references: &[String],
    cfg: &RougeConfig,
) -> Result<Vec<Proposition>, PipelineError> {
    let mut selection: Vec<Proposition> = Vec::new();
    let mut selected_texts: Vec<String> = Vec::new();
    let mut words = 0usize;
    for cluster in ranked_clusters {
        if words >= cfg.max_words {
            break;
        }
        let mut members: Vec<&Proposition> =
            cluster.members.iter().map(|m| &m.proposition).collect();
        members.sort_by(|a, b| a.prop_id.cmp(&b.prop_id));
        let mut best: Option<(&Proposition, f64)> = None;
        for member in members {
            selected_texts.push(member.text.clone());
            let objective = combined_oracle_objective(&selected_texts, references, cfg)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            selected_texts.pop();
            if best.is_none_or(|(_, b)| objective > b) {
                best = Some((member, objective));
            }
        }
        if let Some((member, _)) = best {
            words += word_count(&member.text);
            selected_texts.push(member.text.clone());
            selection.push(member.clone());
        }
    }
    Ok(selection)
}

/// Fix each cluster's representative by salience, then greedily pick the
/// subset (and order) of representatives maximizing the objective; stops on
/// no improvement or at the word limit.
pub fn oracle_cluster_ranking(
    clusters: &[Cluster],
    references: &[String],
    cfg: &RougeConfig,
) -> Result<Vec<Proposition>, PipelineError> {
    if clusters.is_empty() {
        return Ok(Vec::new());
    }
    let representatives: Vec<Proposition> = clusters
        .iter()
        .map(|c| select_cluster_representative(c).proposition.clone())
        .collect();
    let texts: Vec<String> = representatives.iter().map(|r| r.text.clone()).collect();
    let selection =
        greedy_select(&texts, references, cfg).map_err(|e| PipelineError::Data(e.to_string()))?;
    // greedy_select stops strictly below GREEDY_GAIN_EPS improvements.
    debug_assert!(selection
        .objective_steps
        .windows(2)
        .all(|w| w[1] > w[0] + GREEDY_GAIN_EPS));
    Ok(selection
        .order
        .into_iter()
        .map(|i| representatives[i].clone())
        .collect())
}
