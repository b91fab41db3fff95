//! Cluster feature computation and ranking.
//!
//! Clusters are ordered by a primary feature, then a secondary feature,
//! then maximal member salience, then cluster id — a total order. Size
//! ranks descending, document position ascending, score-valued features
//! descending. The default pair is (cluster size, min position).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::Cluster;
use crate::rouge::{rouge_n, RougeConfig};
use crate::salience::ScoredProposition;
use crate::similarity::SimilarityMatrix;

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("invalid ranking config: {0}")]
    InvalidConfig(String),
}

/// Features a cluster can be ranked by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingFeature {
    AvgRouge,
    AvgSimilarity,
    AvgSalience,
    MinPosition,
    Size,
}

pub const ALL_FEATURES: [RankingFeature; 5] = [
    RankingFeature::AvgRouge,
    RankingFeature::AvgSimilarity,
    RankingFeature::AvgSalience,
    RankingFeature::MinPosition,
    RankingFeature::Size,
];

/// Pairwise metric behind the avg_rouge feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PairwiseRougeMetric {
    /// ROUGE-1 F1.
    #[default]
    R1,
    /// Mean of ROUGE-1 F1 and ROUGE-2 F1.
    R1R2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFeatures {
    /// Mean pairwise ROUGE over unordered member pairs; 0 for singletons.
    pub avg_rouge: f64,
    /// Mean off-diagonal similarity over unordered pairs; 0 for singletons.
    pub avg_similarity: f64,
    pub avg_salience: f64,
    /// Smallest sentence index over members.
    pub min_position: usize,
    /// Earliest span start among members at `min_position`; refines
    /// position ties.
    pub min_position_span_start: usize,
    pub size: usize,
    pub max_salience: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankingConfig {
    pub primary_feature: RankingFeature,
    pub secondary_feature: Option<RankingFeature>,
    pub max_clusters: usize,
    pub pairwise_rouge: PairwiseRougeMetric,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            primary_feature: RankingFeature::Size,
            secondary_feature: Some(RankingFeature::MinPosition),
            max_clusters: 10,
            pairwise_rouge: PairwiseRougeMetric::R1,
        }
    }
}

impl RankingConfig {
    pub fn validate(&self) -> Result<(), RankingError> {
        if self.secondary_feature == Some(self.primary_feature) {
            return Err(RankingError::InvalidConfig(
                "primary and secondary features must differ".into(),
            ));
        }
        if self.max_clusters == 0 {
            return Err(RankingError::InvalidConfig(
                "max_clusters must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

fn pairwise_rouge(a: &str, b: &str, cfg: &RougeConfig, metric: PairwiseRougeMetric) -> f64 {
    let refs = [b.to_string()];
    let r1 = rouge_n(a, &refs, 1, cfg).map(|s| s.f1).unwrap_or(0.0);
    match metric {
        PairwiseRougeMetric::R1 => r1,
        PairwiseRougeMetric::R1R2 => {
            let r2 = rouge_n(a, &refs, 2, cfg).map(|s| s.f1).unwrap_or(0.0);
            (r1 + r2) / 2.0
        }
    }
}

/// Populate all ranking features for one cluster.
pub fn compute_features(
    cluster: &Cluster,
    matrix: &SimilarityMatrix,
    cfg: &RougeConfig,
    metric: PairwiseRougeMetric,
) -> ClusterFeatures {
    let members = &cluster.members;
    let size = members.len();
    let avg_salience = members.iter().map(|m| m.score).sum::<f64>() / size as f64;
    let max_salience = members.iter().map(|m| m.score).fold(f64::MIN, f64::max);
    let min_position = members
        .iter()
        .map(|m| m.proposition.sent_index)
        .min()
        .unwrap_or(0);
    let min_position_span_start = members
        .iter()
        .filter(|m| m.proposition.sent_index == min_position)
        .filter_map(|m| m.proposition.spans.first().map(|s| s.0))
        .min()
        .unwrap_or(0);

    let mut rouge_sum = 0.0;
    let mut sim_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..size {
        for j in (i + 1)..size {
            pairs += 1;
            rouge_sum += pairwise_rouge(
                &members[i].proposition.text,
                &members[j].proposition.text,
                cfg,
                metric,
            );
            let (mi, mj) = (
                matrix.index_of(&members[i].proposition.prop_id),
                matrix.index_of(&members[j].proposition.prop_id),
            );
            if let (Some(mi), Some(mj)) = (mi, mj) {
                sim_sum += matrix.get(mi, mj);
            }
        }
    }
    let (avg_rouge, avg_similarity) = if pairs == 0 {
        (0.0, 0.0)
    } else {
        (rouge_sum / pairs as f64, sim_sum / pairs as f64)
    };

    ClusterFeatures {
        avg_rouge,
        avg_similarity,
        avg_salience,
        min_position,
        min_position_span_start,
        size,
        max_salience,
    }
}

fn features(cluster: &Cluster) -> &ClusterFeatures {
    cluster
        .features
        .as_ref()
        .expect("compute_features must run before rank_clusters")
}

fn compare_feature(a: &ClusterFeatures, b: &ClusterFeatures, feature: RankingFeature) -> Ordering {
    match feature {
        RankingFeature::Size => b.size.cmp(&a.size),
        RankingFeature::MinPosition => (a.min_position, a.min_position_span_start)
            .cmp(&(b.min_position, b.min_position_span_start)),
        RankingFeature::AvgRouge => b.avg_rouge.total_cmp(&a.avg_rouge),
        RankingFeature::AvgSimilarity => b.avg_similarity.total_cmp(&a.avg_similarity),
        RankingFeature::AvgSalience => b.avg_salience.total_cmp(&a.avg_salience),
    }
}

/// Sort clusters into rank order and keep the top `max_clusters`.
pub fn rank_clusters(mut clusters: Vec<Cluster>, cfg: &RankingConfig) -> Vec<Cluster> {
    clusters.sort_by(|a, b| {
        let (fa, fb) = (features(a), features(b));
        compare_feature(fa, fb, cfg.primary_feature)
            .then_with(|| {
                cfg.secondary_feature
                    .map(|f| compare_feature(fa, fb, f))
                    .unwrap_or(Ordering::Equal)
            })
            .then_with(|| fb.max_salience.total_cmp(&fa.max_salience))
            .then_with(|| a.cluster_id.cmp(&b.cluster_id))
    });
    clusters.truncate(cfg.max_clusters);
    clusters
}

/// The member with the highest salience score; ties by prop_id ascending.
pub fn select_cluster_representative(cluster: &Cluster) -> &ScoredProposition {
    cluster
        .members
        .iter()
        .min_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.proposition.prop_id.cmp(&b.proposition.prop_id))
        })
        .expect("clusters are non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propositions::Proposition;

    fn scored(id: &str, sent: usize, text: &str, score: f64) -> ScoredProposition {
        ScoredProposition {
            proposition: Proposition {
                prop_id: id.into(),
                topic_id: "t".into(),
                doc_id: "d".into(),
                sent_index: sent,
                ordinal: 0,
                spans: vec![(0, text.chars().count().max(1))],
                text: text.into(),
                is_contiguous: true,
            },
            score,
        }
    }

    fn cluster(id: &str, members: Vec<ScoredProposition>) -> Cluster {
        Cluster {
            cluster_id: id.into(),
            members,
            features: None,
        }
    }

    fn unit_matrix(ids: &[&str]) -> SimilarityMatrix {
        let n = ids.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        SimilarityMatrix {
            prop_ids: ids.iter().map(|s| s.to_string()).collect(),
            values,
            backend_id: "test".into(),
        }
    }

    fn with_features(mut c: Cluster, f: ClusterFeatures) -> Cluster {
        c.features = Some(f);
        c
    }

    fn feat(size: usize, min_position: usize, max_salience: f64) -> ClusterFeatures {
        ClusterFeatures {
            avg_rouge: 0.0,
            avg_similarity: 0.0,
            avg_salience: 0.0,
            min_position,
            min_position_span_start: 0,
            size,
            max_salience,
        }
    }

    #[test]
    fn singleton_features_degenerate_to_zero_means() {
        let c = cluster("c0", vec![scored("p1", 3, "some text", 0.7)]);
        let f = compute_features(
            &c,
            &unit_matrix(&["p1"]),
            &RougeConfig::default(),
            PairwiseRougeMetric::R1,
        );
        assert_eq!(f.size, 1);
        assert_eq!(f.avg_rouge, 0.0);
        assert_eq!(f.avg_similarity, 0.0);
        assert_eq!(f.max_salience, 0.7);
        assert_eq!(f.min_position, 3);
    }

    #[test]
    fn identical_texts_have_unit_avg_rouge() {
        let c = cluster(
            "c0",
            vec![
                scored("p1", 5, "hun sen won", 0.8),
                scored("p2", 2, "hun sen won", 0.6),
            ],
        );
        let f = compute_features(
            &c,
            &unit_matrix(&["p1", "p2"]),
            &RougeConfig::default(),
            PairwiseRougeMetric::R1,
        );
        assert!((f.avg_rouge - 1.0).abs() < 1e-12);
        assert!((f.avg_salience - 0.7).abs() < 1e-12);
        assert_eq!(f.max_salience, 0.8);
        assert_eq!(f.min_position, 2);
    }

    #[test]
    fn size_then_min_position_ordering() {
        let clusters = vec![
            with_features(cluster("a", vec![]), feat(3, 5, 0.5)),
            with_features(cluster("b", vec![]), feat(3, 2, 0.5)),
            with_features(cluster("c", vec![]), feat(2, 0, 0.5)),
        ];
        let ranked = rank_clusters(clusters, &RankingConfig::default());
        let ids: Vec<&str> = ranked.iter().map(|c| c.cluster_id.as_str()).collect();
        assert_eq!(ids, ["b", "a", "c"]);
    }

    #[test]
    fn max_clusters_truncates() {
        let clusters: Vec<Cluster> = (0..15)
            .map(|i| with_features(cluster(&format!("c{i:02}"), vec![]), feat(i + 1, 0, 0.5)))
            .collect();
        let ranked = rank_clusters(clusters, &RankingConfig::default());
        assert_eq!(ranked.len(), 10);
        assert_eq!(ranked[0].cluster_id, "c14");
    }

    #[test]
    fn full_tie_falls_back_to_cluster_id() {
        let clusters = vec![
            with_features(cluster("z", vec![]), feat(2, 1, 0.5)),
            with_features(cluster("a", vec![]), feat(2, 1, 0.5)),
            with_features(cluster("m", vec![]), feat(2, 1, 0.5)),
        ];
        let ranked = rank_clusters(clusters, &RankingConfig::default());
        let ids: Vec<&str> = ranked.iter().map(|c| c.cluster_id.as_str()).collect();
        assert_eq!(ids, ["a", "m", "z"]);
    }

    #[test]
    fn max_salience_breaks_feature_ties() {
        let clusters = vec![
            with_features(cluster("a", vec![]), feat(2, 1, 0.3)),
            with_features(cluster("b", vec![]), feat(2, 1, 0.9)),
        ];
        let ranked = rank_clusters(clusters, &RankingConfig::default());
        assert_eq!(ranked[0].cluster_id, "b");
    }

    #[test]
    fn salience_tiebreak_order_invariant_under_positive_scaling() {
        let build = |scale: f64| {
            vec![
                with_features(cluster("a", vec![]), feat(2, 1, 0.3 * scale)),
                with_features(cluster("b", vec![]), feat(2, 1, 0.9 * scale)),
                with_features(cluster("c", vec![]), feat(2, 1, 0.6 * scale)),
            ]
        };
        let order = |clusters: Vec<Cluster>| -> Vec<String> {
            rank_clusters(clusters, &RankingConfig::default())
                .into_iter()
                .map(|c| c.cluster_id)
                .collect()
        };
        assert_eq!(order(build(1.0)), order(build(0.5)));
    }

    #[test]
    fn representative_is_salience_argmax_with_id_tiebreak() {
        let c = cluster(
            "c0",
            vec![scored("p2", 0, "x", 0.9), scored("p1", 0, "y", 0.3)],
        );
        assert_eq!(select_cluster_representative(&c).proposition.prop_id, "p2");

        let tied = cluster(
            "c1",
            vec![scored("p2", 0, "x", 0.9), scored("p1", 0, "y", 0.9)],
        );
        assert_eq!(
            select_cluster_representative(&tied).proposition.prop_id,
            "p1"
        );

        let single = cluster("c2", vec![scored("p9", 0, "z", 0.1)]);
        assert_eq!(
            select_cluster_representative(&single).proposition.prop_id,
            "p9"
        );
    }

    #[test]
    fn config_rejects_equal_primary_and_secondary() {
        let cfg = RankingConfig {
            primary_feature: RankingFeature::Size,
            secondary_feature: Some(RankingFeature::Size),
            ..RankingConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(RankingConfig::default().validate().is_ok());
    }

    #[test]
    fn ranking_is_permutation_invariant() {
        let clusters: Vec<Cluster> = (0..6)
            .map(|i| {
                with_features(
                    cluster(&format!("c{i}"), vec![]),
                    feat((i % 3) + 1, i, 0.1 * i as f64),
                )
            })
            .collect();
        let baseline: Vec<String> = rank_clusters(clusters.clone(), &RankingConfig::default())
            .into_iter()
            .map(|c| c.cluster_id)
            .collect();
        let mut reversed = clusters;
        reversed.reverse();
        let again: Vec<String> = rank_clusters(reversed, &RankingConfig::default())
            .into_iter()
            .map(|c| c.cluster_id)
            .collect();
        assert_eq!(baseline, again);
    }
}
