//! Agglomerative clustering of salient propositions over the pairwise
//! similarity matrix.
//!
//! Works on distance = 1 - similarity with Lance-Williams updates applied
//! directly to the distance matrix (for ward this is a deliberate heuristic:
//! the input distances are classifier scores, not squared Euclidean).
//! Merging proceeds while the minimum inter-cluster linkage distance is
//! strictly below the threshold; equal distances are broken by the lowest
//! (i, j) index pair. Inputs are canonicalized by prop_id first, so the
//! partition is invariant under input permutation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ranking::ClusterFeatures;
use crate::salience::ScoredProposition;
use crate::similarity::SimilarityMatrix;

#[derive(Debug, Error)]
pub enum ClusteringError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Ward,
    Average,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub linkage: Linkage,
    /// Merging stops once the smallest linkage distance reaches this value
    /// (distance = 1 - similarity). 0 keeps everything singleton;
    /// `inf` is accepted as a single-cluster sentinel.
    pub distance_threshold: f64,
    /// Clusters smaller than this are dropped by the pipeline before
    /// ranking; the clustering step itself always returns the full
    /// partition.
    pub min_cluster_size: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            linkage: Linkage::Ward,
            distance_threshold: 0.5,
            min_cluster_size: 1,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<(), ClusteringError> {
        let t = self.distance_threshold;
        if t.is_nan() || t < 0.0 || (t > 1.0 && !t.is_infinite()) {
            return Err(ClusteringError::DimensionMismatch(format!(
                "distance_threshold must be in [0,1] or inf, got {t}"
            )));
        }
        Ok(())
    }
}

/// A paraphrastic group; every proposition of a topic lands in exactly one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub cluster_id: String,
    pub members: Vec<ScoredProposition>,
    pub features: Option<ClusterFeatures>,
}

/// One dendrogram step: the two merged clusters (named by their smallest
/// member index) and the linkage distance of the merge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
}

struct Slot {
    /// Smallest original index among members; names the cluster in traces
    /// and breaks distance ties.
    rep: usize,
    members: Vec<usize>,
}

/// Core agglomeration over a dense distance matrix. Returns the merge
/// sequence and the final partition (each group sorted, groups ordered by
/// their smallest member).
fn agglomerate(
    distances: &[f64],
    n: usize,
    cfg: &ClusteringConfig,
) -> (Vec<MergeStep>, Vec<Vec<usize>>) {
    let mut slots: Vec<Slot> = (0..n)
        .map(|i| Slot {
            rep: i,
            members: vec![i],
        })
        .collect();
    // Working copy indexed by slot positions.
    let mut d: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| distances[i * n + j]).collect())
        .collect();
    let mut trace = Vec::new();

    while slots.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..slots.len() {
            for b in (a + 1)..slots.len() {
                let (lo, hi) = if slots[a].rep < slots[b].rep {
                    (a, b)
                } else {
                    (b, a)
                };
                let dist = d[a][b];
                let better = match best {
                    None => true,
                    Some((bd, bi, bj)) => {
                        dist < bd
                            || (dist == bd
                                && (slots[lo].rep, slots[hi].rep) < (slots[bi].rep, slots[bj].rep))
                    }
                };
                if better {
                    best = Some((dist, lo, hi));
                }
            }
        }
        let (dist, i, j) = best.expect("at least one pair");
        if dist >= cfg.distance_threshold {
            break;
        }
        trace.push(MergeStep {
            left: slots[i].rep,
            right: slots[j].rep,
            distance: dist,
        });

        let ni = slots[i].members.len() as f64;
        let nj = slots[j].members.len() as f64;
        for k in 0..slots.len() {
            if k == i || k == j {
                continue;
            }
            let nk = slots[k].members.len() as f64;
            let dik = d[i][k];
            let djk = d[j][k];
            let updated = match cfg.linkage {
                Linkage::Ward => {
                    let total = ni + nj + nk;
                    ((ni + nk) * dik + (nj + nk) * djk - nk * dist) / total
                }
                Linkage::Average => (ni * dik + nj * djk) / (ni + nj),
                Linkage::Complete => dik.max(djk),
            };
            d[i][k] = updated;
            d[k][i] = updated;
        }
        let folded = slots.remove(j);
        slots[i].members.extend(folded.members);
        slots[i].rep = slots[i].rep.min(folded.rep);
        for row in &mut d {
            row.remove(j);
        }
        d.remove(j);
    }

    let mut groups: Vec<Vec<usize>> = slots
        .into_iter()
        .map(|mut s| {
            s.members.sort_unstable();
            s.members
        })
        .collect();
    groups.sort_by_key(|g| g[0]);
    (trace, groups)
}

fn to_distances(matrix: &SimilarityMatrix) -> Vec<f64> {
    matrix.values.iter().map(|s| 1.0 - s).collect()
}

/// Full merge sequence for the matrix as given (indices refer to matrix
/// positions). Linkage distances are non-decreasing for ward and complete.
pub fn merge_trace(
    matrix: &SimilarityMatrix,
    cfg: &ClusteringConfig,
) -> Result<Vec<MergeStep>, ClusteringError> {
    let n = matrix.len();
    if matrix.values.len() != n * n {
        return Err(ClusteringError::DimensionMismatch(format!(
            "{} values for {n} ids",
            matrix.values.len()
        )));
    }
    Ok(agglomerate(&to_distances(matrix), n, cfg).0)
}

/// Partition propositions into paraphrastic clusters. Cluster ids are
/// assigned in order of each cluster's smallest member prop_id, so the
/// output is deterministic regardless of input order.
pub fn cluster_propositions(
    matrix: &SimilarityMatrix,
    props: &[ScoredProposition],
    cfg: &ClusteringConfig,
) -> Result<Vec<Cluster>, ClusteringError> {
    if props.len() != matrix.len() {
        return Err(ClusteringError::DimensionMismatch(format!(
            "{} propositions vs {} matrix rows",
            props.len(),
            matrix.len()
        )));
    }
    let mut ordered: Vec<ScoredProposition> = props.to_vec();
    ordered.sort_by(|a, b| a.proposition.prop_id.cmp(&b.proposition.prop_id));
    let ids: Vec<String> = ordered
        .iter()
        .map(|p| p.proposition.prop_id.clone())
        .collect();
    let canonical = matrix
        .permuted(&ids)
        .map_err(|e| ClusteringError::DimensionMismatch(e.to_string()))?;

    let (_, groups) = agglomerate(&to_distances(&canonical), ordered.len(), cfg);
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(idx, group)| Cluster {
            cluster_id: format!("c{idx:03}"),
            members: group.into_iter().map(|i| ordered[i].clone()).collect(),
            features: None,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propositions::Proposition;

    fn scored(id: &str, text: &str) -> ScoredProposition {
        ScoredProposition {
            proposition: Proposition {
                prop_id: id.into(),
                topic_id: "t".into(),
                doc_id: "d".into(),
                sent_index: 0,
                ordinal: 0,
                spans: vec![(0, 1)],
                text: text.into(),
                is_contiguous: true,
            },
            score: 0.5,
        }
    }

    fn matrix_from(ids: &[&str], sim: &[&[f64]]) -> SimilarityMatrix {
        SimilarityMatrix {
            prop_ids: ids.iter().map(|s| s.to_string()).collect(),
            values: sim.iter().flat_map(|row| row.iter().copied()).collect(),
            backend_id: "test".into(),
        }
    }

    #[test]
    fn identity_similarity_yields_singletons() {
        let ids = ["p1", "p2", "p3"];
        let m = matrix_from(
            &ids,
            &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]],
        );
        let props: Vec<_> = ids.iter().map(|i| scored(i, i)).collect();
        let clusters = cluster_propositions(&m, &props, &ClusteringConfig::default()).unwrap();
        assert_eq!(clusters.len(), 3);
        assert!(clusters.iter().all(|c| c.members.len() == 1));
    }

    #[test]
    fn duplicate_indicator_groups_duplicates() {
        // Texts [A, A, B]: duplicates merge at distance 0, B stays apart.
        let ids = ["p1", "p2", "p3"];
        let m = matrix_from(
            &ids,
            &[&[1.0, 1.0, 0.0], &[1.0, 1.0, 0.0], &[0.0, 0.0, 1.0]],
        );
        let props: Vec<_> = ids.iter().map(|i| scored(i, i)).collect();
        let clusters = cluster_propositions(&m, &props, &ClusteringConfig::default()).unwrap();
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].members.len(), 2);
        assert_eq!(clusters[1].members.len(), 1);
        assert_eq!(clusters[1].members[0].proposition.prop_id, "p3");
    }

    #[test]
    fn single_proposition_forms_one_singleton() {
        let m = matrix_from(&["p1"], &[&[1.0]]);
        let clusters =
            cluster_propositions(&m, &[scored("p1", "x")], &ClusteringConfig::default()).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].members.len(), 1);
    }

    #[test]
    fn merge_trace_examples() {
        let cfg = ClusteringConfig::default();
        let close = matrix_from(&["a", "b"], &[&[1.0, 0.8], &[0.8, 1.0]]);
        let trace = merge_trace(&close, &cfg).unwrap();
        assert_eq!(trace.len(), 1);
        assert!((trace[0].distance - 0.2).abs() < 1e-12);

        let far = matrix_from(&["a", "b"], &[&[1.0, 0.1], &[0.1, 1.0]]);
        assert!(merge_trace(&far, &cfg).unwrap().is_empty());
    }

    #[test]
    fn equidistant_ties_break_by_lowest_index_pair() {
        let m = matrix_from(
            &["a", "b", "c"],
            &[&[1.0, 0.7, 0.7], &[0.7, 1.0, 0.7], &[0.7, 0.7, 1.0]],
        );
        let trace = merge_trace(&m, &ClusteringConfig::default()).unwrap();
        assert_eq!((trace[0].left, trace[0].right), (0, 1));
    }

    #[test]
    fn threshold_zero_keeps_all_singletons() {
        // Even exact duplicates stay apart at threshold 0.
        let m = matrix_from(&["a", "b"], &[&[1.0, 1.0], &[1.0, 1.0]]);
        let cfg = ClusteringConfig {
            distance_threshold: 0.0,
            ..ClusteringConfig::default()
        };
        let props = vec![scored("a", "x"), scored("b", "x")];
        let clusters = cluster_propositions(&m, &props, &cfg).unwrap();
        assert_eq!(clusters.len(), 2);
    }

    #[test]
    fn ward_at_threshold_one_can_still_stop_early() {
        // Two duplicate groups: after the zero-distance merges, ward pushes
        // inter-group distances above 1, so threshold 1.0 leaves two
        // clusters.
        let m = matrix_from(
            &["a", "b", "c", "d"],
            &[
                &[1.0, 1.0, 0.0, 0.0],
                &[1.0, 1.0, 0.0, 0.0],
                &[0.0, 0.0, 1.0, 1.0],
                &[0.0, 0.0, 1.0, 1.0],
            ],
        );
        let cfg = ClusteringConfig {
            distance_threshold: 1.0,
            ..ClusteringConfig::default()
        };
        let props = vec![
            scored("a", "x"),
            scored("b", "x"),
            scored("c", "y"),
            scored("d", "y"),
        ];
        let clusters = cluster_propositions(&m, &props, &cfg).unwrap();
        assert_eq!(clusters.len(), 2);
    }

    #[test]
    fn infinite_threshold_merges_everything() {
        let m = matrix_from(
            &["a", "b", "c"],
            &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]],
        );
        let cfg = ClusteringConfig {
            distance_threshold: f64::INFINITY,
            ..ClusteringConfig::default()
        };
        let props = vec![scored("a", "x"), scored("b", "y"), scored("c", "z")];
        let clusters = cluster_propositions(&m, &props, &cfg).unwrap();
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].members.len(), 3);
    }

    #[test]
    fn partition_covers_every_proposition_exactly_once() {
        let ids = ["p1", "p2", "p3", "p4"];
        let m = matrix_from(
            &ids,
            &[
                &[1.0, 0.9, 0.1, 0.2],
                &[0.9, 1.0, 0.2, 0.1],
                &[0.1, 0.2, 1.0, 0.8],
                &[0.2, 0.1, 0.8, 1.0],
            ],
        );
        let props: Vec<_> = ids.iter().map(|i| scored(i, i)).collect();
        let clusters = cluster_propositions(&m, &props, &ClusteringConfig::default()).unwrap();
        let mut seen: Vec<&str> = clusters
            .iter()
            .flat_map(|c| c.members.iter().map(|m| m.proposition.prop_id.as_str()))
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, ids);
    }

    #[test]
    fn permuted_input_yields_identical_partition() {
        let ids = ["p1", "p2", "p3", "p4"];
        let m = matrix_from(
            &ids,
            &[
                &[1.0, 0.9, 0.1, 0.2],
                &[0.9, 1.0, 0.2, 0.1],
                &[0.1, 0.2, 1.0, 0.8],
                &[0.2, 0.1, 0.8, 1.0],
            ],
        );
        let props: Vec<_> = ids.iter().map(|i| scored(i, i)).collect();
        let cfg = ClusteringConfig::default();
        let baseline = cluster_propositions(&m, &props, &cfg).unwrap();

        let shuffled_props = vec![
            props[2].clone(),
            props[0].clone(),
            props[3].clone(),
            props[1].clone(),
        ];
        let shuffled_ids: Vec<String> = shuffled_props
            .iter()
            .map(|p| p.proposition.prop_id.clone())
            .collect();
        let shuffled_matrix = m.permuted(&shuffled_ids).unwrap();
        let again = cluster_propositions(&shuffled_matrix, &shuffled_props, &cfg).unwrap();
        assert_eq!(baseline, again);
    }

    #[test]
    fn ward_trace_distances_non_decreasing() {
        let m = matrix_from(
            &["a", "b", "c", "d"],
            &[
                &[1.0, 0.95, 0.6, 0.5],
                &[0.95, 1.0, 0.55, 0.6],
                &[0.6, 0.55, 1.0, 0.9],
                &[0.5, 0.6, 0.9, 1.0],
            ],
        );
        for linkage in [Linkage::Ward, Linkage::Complete] {
            let cfg = ClusteringConfig {
                linkage,
                distance_threshold: f64::INFINITY,
                ..ClusteringConfig::default()
            };
            let trace = merge_trace(&m, &cfg).unwrap();
            assert_eq!(trace.len(), 3);
            for w in trace.windows(2) {
                assert!(w[1].distance >= w[0].distance, "{linkage:?}: {w:?}");
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = matrix_from(&["a", "b"], &[&[1.0, 0.5], &[0.5, 1.0]]);
        assert!(matches!(
            cluster_propositions(&m, &[scored("a", "x")], &ClusteringConfig::default()),
            Err(ClusteringError::DimensionMismatch(_))
        ));
    }
}
