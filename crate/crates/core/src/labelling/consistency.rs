use crate::labels::{majority_vote, ClassLabel, NUM_CODES};

use super::dbscan::NOISE;

/// Sets every clustered point to its cluster's modal class; noise points
/// keep their labels.
pub fn enforce_cluster_consistency(labels: &[ClassLabel], clusters: &[u32]) -> Vec<ClassLabel> {
    assert_eq!(labels.len(), clusters.len(), "labels/cluster ids length mismatch");
    let n_clusters = clusters
        .iter()
        .filter(|&&c| c != NOISE)
        .map(|&c| c as usize + 1)
        .max()
        .unwrap_or(0);
    let mut tallies = vec![[0u32; NUM_CODES]; n_clusters];
    for (&l, &c) in labels.iter().zip(clusters) {
        if c != NOISE {
            tallies[c as usize][l as usize] += 1;
        }
    }
    let winners: Vec<ClassLabel> = tallies.iter().map(majority_vote).collect();
    labels
        .iter()
        .zip(clusters)
        .map(|(&l, &c)| match c {
            NOISE => l,
            c if winners[c as usize] == ClassLabel::Empty => l,
            c => winners[c as usize],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ClassLabel::*;

    #[test]
    fn strict_majority() {
        let mut labels = vec![Vehicle; 120];
        labels.extend(vec![Scenario; 30]);
        let out = enforce_cluster_consistency(&labels, &[0; 150]);
        assert!(out.iter().all(|&l| l == Vehicle));
    }

    #[test]
    fn noise_untouched() {
        let out = enforce_cluster_consistency(&[Pedestrian, Scenario, Scenario], &[NOISE, 0, 0]);
        assert_eq!(out, vec![Pedestrian, Scenario, Scenario]);
    }

    #[test]
    fn tie_goes_to_bicycle_over_vehicle() {
        let mut labels = vec![Vehicle; 50];
        labels.extend(vec![Bicycle; 50]);
        let out = enforce_cluster_consistency(&labels, &[3; 100]);
        assert!(out.iter().all(|&l| l == Bicycle));
    }
}
