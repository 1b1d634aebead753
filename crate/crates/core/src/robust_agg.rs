//! Baseline aggregation rules: Mean, FedAvg, Median, Trimmed-Mean, Krum,
//! Multi-Krum and cosine Clustering.
//!
//! Krum scores use squared Euclidean distances (the usual Krum formulation;
//! neighbor selection is order-equivalent to plain distances). A model's
//! distance to itself is not counted among its `K - M - 2` closest peers.
//! All ties resolve to the lowest input index.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::paramvec::{self, check_models, cosine_dist_or_max, euclidean_dist_sq, ParamVec};
use crate::{math, Error, Result};

/// Parameters shared by the baseline rules.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AggConfig {
    /// Trimmed-Mean trim rate β, in (0, 1/2).
    pub trim_rate: f64,
    /// Assumed number of malicious models M (Krum family).
    pub assumed_malicious: usize,
    /// Multi-Krum selection size; `None` means `max(1, ⌊K/4⌋)`.
    pub multikrum_m: Option<usize>,
}

impl Default for AggConfig {
    fn default() -> Self {
        Self {
            trim_rate: 0.1,
            assumed_malicious: 2,
            multikrum_m: None,
        }
    }
}

impl AggConfig {
    pub fn multikrum_m_for(&self, k: usize) -> usize {
        self.multikrum_m.unwrap_or((k / 4).max(1))
    }

    pub fn validate_trim_rate(&self) -> Result<()> {
        if !(self.trim_rate > 0.0 && self.trim_rate < 0.5) {
            return Err(Error::InvalidConfig {
                field: "trim_rate",
                reason: format!("must lie in (0, 0.5), got {}", self.trim_rate),
            });
        }
        Ok(())
    }
}

/// Number of values trimmed from each end for `k` inputs at rate `beta`.
pub fn trim_count(k: usize, beta: f64) -> usize {
    math::floor(beta * k as f64) as usize
}

/// Checks the Krum precondition `K - M - 2 >= 1`.
pub fn check_krum(k: usize, m: usize) -> Result<()> {
    if k < m + 3 {
        return Err(Error::Precondition(format!(
            "Krum needs K - M - 2 >= 1, got K = {k}, M = {m}"
        )));
    }
    Ok(())
}

pub fn agg_mean(models: &[ParamVec]) -> Result<ParamVec> {
    paramvec::mean(models)
}

/// Sample-count weighted average `Σ n_j θ_j / Σ n_j`.
pub fn agg_fedavg(models: &[ParamVec], sample_counts: &[u64]) -> Result<ParamVec> {
    if models.len() != sample_counts.len() {
        return Err(Error::LengthMismatch {
            what: "models vs sample counts",
            left: models.len(),
            right: sample_counts.len(),
        });
    }
    let weights: Vec<f64> = sample_counts.iter().map(|&n| n as f64).collect();
    paramvec::weighted_sum(models, &weights)
}

pub fn agg_median(models: &[ParamVec]) -> Result<ParamVec> {
    paramvec::coordwise_median(models)
}

/// Coordinate-wise trimmed mean: drop `⌊βK⌋` values from each end.
pub fn agg_trimmed_mean(models: &[ParamVec], beta: f64) -> Result<ParamVec> {
    let d = check_models(models)?;
    AggConfig {
        trim_rate: beta,
        ..AggConfig::default()
    }
    .validate_trim_rate()?;
    let k = models.len();
    let b = trim_count(k, beta);
    if k < 2 * b + 1 {
        return Err(Error::Precondition(format!(
            "Trimmed-Mean needs K >= 2*floor(beta*K) + 1, got K = {k}, trimmed = {b}"
        )));
    }
    let kept = (k - 2 * b) as f64;
    let mut column = vec![0.0; k];
    let mut out = Vec::with_capacity(d);
    for j in 0..d {
        for (slot, m) in column.iter_mut().zip(models) {
            *slot = m[j];
        }
        column.sort_unstable_by(f64::total_cmp);
        out.push(column[b..k - b].iter().sum::<f64>() / kept);
    }
    ParamVec::new(out)
}

/// Krum score of each model: the sum of its `K - M - 2` smallest squared
/// distances to the other models.
pub fn krum_scores(models: &[ParamVec], assumed_malicious: usize) -> Result<Vec<f64>> {
    check_models(models)?;
    let k = models.len();
    check_krum(k, assumed_malicious)?;
    let closest = k - assumed_malicious - 2;

    let mut dist = vec![0.0; k * k];
    for i in 0..k {
        for j in i + 1..k {
            let d = euclidean_dist_sq(&models[i], &models[j])?;
            dist[i * k + j] = d;
            dist[j * k + i] = d;
        }
    }

    let mut row = Vec::with_capacity(k - 1);
    let scores = (0..k)
        .map(|i| {
            row.clear();
            row.extend((0..k).filter(|&j| j != i).map(|j| dist[i * k + j]));
            row.sort_unstable_by(f64::total_cmp);
            row[..closest].iter().sum()
        })
        .collect();
    Ok(scores)
}

/// Indices ordered by ascending value, ties by ascending index.
pub(crate) fn rank_ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Indices of the `m` lowest-scoring models, in ascending index order.
pub fn multikrum_select(
    models: &[ParamVec],
    assumed_malicious: usize,
    m: usize,
) -> Result<Vec<usize>> {
    if m == 0 || m > models.len() {
        return Err(Error::Precondition(format!(
            "Multi-Krum needs 1 <= m <= K, got m = {m}, K = {}",
            models.len()
        )));
    }
    let scores = krum_scores(models, assumed_malicious)?;
    let mut picked: Vec<usize> = rank_ascending(&scores).into_iter().take(m).collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Index of the model Krum selects.
pub fn krum_select(models: &[ParamVec], assumed_malicious: usize) -> Result<usize> {
    Ok(multikrum_select(models, assumed_malicious, 1)?[0])
}

pub fn agg_krum(models: &[ParamVec], assumed_malicious: usize) -> Result<ParamVec> {
    let i = krum_select(models, assumed_malicious)?;
    Ok(models[i].clone())
}

pub fn agg_multikrum(models: &[ParamVec], assumed_malicious: usize, m: usize) -> Result<ParamVec> {
    let picked = multikrum_select(models, assumed_malicious, m)?;
    paramvec::mean_of(models, &picked)
}

/// Two-way split of the inputs produced by average-linkage agglomerative
/// clustering on cosine distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSplit {
    /// The winning (larger) cluster, ascending indices.
    pub selected: Vec<usize>,
    /// The other cluster, ascending indices.
    pub rejected: Vec<usize>,
}

/// Merges clusters under average linkage until two remain.
///
/// Clusters are kept ordered by their smallest member; among equally close
/// pairs the first pair in that order merges. Zero-norm models sit at
/// cosine distance 2 from everything.
pub fn cluster_split(models: &[ParamVec]) -> Result<ClusterSplit> {
    check_models(models)?;
    let k = models.len();
    if k < 2 {
        return Err(Error::Precondition(format!(
            "Clustering needs at least 2 models, got {k}"
        )));
    }

    let mut base = vec![0.0; k * k];
    for i in 0..k {
        for j in i + 1..k {
            let d = cosine_dist_or_max(&models[i], &models[j])?;
            base[i * k + j] = d;
            base[j * k + i] = d;
        }
    }

    let mut clusters: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
    // linkage[a][b] between current clusters a and b
    let mut linkage: Vec<Vec<f64>> = (0..k).map(|i| base[i * k..(i + 1) * k].to_vec()).collect();

    while clusters.len() > 2 {
        let n = clusters.len();
        let (mut best_a, mut best_b, mut best) = (0, 1, f64::INFINITY);
        for a in 0..n {
            for b in a + 1..n {
                if linkage[a][b] < best {
                    best = linkage[a][b];
                    best_a = a;
                    best_b = b;
                }
            }
        }

        // Lance-Williams update for average linkage.
        let size_a = clusters[best_a].len() as f64;
        let size_b = clusters[best_b].len() as f64;
        for c in 0..n {
            if c == best_a || c == best_b {
                continue;
            }
            let merged =
                (size_a * linkage[best_a][c] + size_b * linkage[best_b][c]) / (size_a + size_b);
            linkage[best_a][c] = merged;
            linkage[c][best_a] = merged;
        }
        let absorbed = clusters.remove(best_b);
        clusters[best_a].extend(absorbed);
        clusters[best_a].sort_unstable();
        linkage.remove(best_b);
        for row in &mut linkage {
            row.remove(best_b);
        }
    }

    let second = clusters.pop().expect("two clusters");
    let first = clusters.pop().expect("two clusters");
    let first_wins = match first.len().cmp(&second.len()) {
        core::cmp::Ordering::Greater => true,
        core::cmp::Ordering::Less => false,
        core::cmp::Ordering::Equal => {
            // Tighter cluster wins; `first` holds the smallest index overall.
            mean_intra(&first, &base, k) <= mean_intra(&second, &base, k)
        }
    };
    let (selected, rejected) = if first_wins {
        (first, second)
    } else {
        (second, first)
    };
    Ok(ClusterSplit { selected, rejected })
}

fn mean_intra(members: &[usize], base: &[f64], k: usize) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (x, &i) in members.iter().enumerate() {
        for &j in &members[x + 1..] {
            sum += base[i * k + j];
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        sum / pairs as f64
    }
}

/// Mean of the larger cosine cluster.
pub fn agg_clustering(models: &[ParamVec]) -> Result<ParamVec> {
    let split = cluster_split(models)?;
    paramvec::mean_of(models, &split.selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(x: &[f64]) -> ParamVec {
        ParamVec::from_slice(x).unwrap()
    }

    fn scalars(xs: &[f64]) -> Vec<ParamVec> {
        xs.iter().map(|&x| pv(&[x])).collect()
    }

    #[test]
    fn mean_examples() {
        assert_eq!(agg_mean(&[pv(&[1.0, 1.0])]).unwrap(), pv(&[1.0, 1.0]));
        assert_eq!(agg_mean(&[pv(&[0.0, 0.0]), pv(&[2.0, 2.0])]).unwrap(), pv(&[1.0, 1.0]));
        let sym = [pv(&[1.0, 0.0]), pv(&[0.0, 1.0]), pv(&[-1.0, 0.0]), pv(&[0.0, -1.0])];
        assert_eq!(agg_mean(&sym).unwrap(), pv(&[0.0, 0.0]));
        assert!(agg_mean(&[]).is_err());
    }

    #[test]
    fn fedavg_examples() {
        let models = [pv(&[1.0, 4.0]), pv(&[3.0, 0.0])];
        assert_eq!(agg_fedavg(&models, &[7, 7]).unwrap(), agg_mean(&models).unwrap());
        assert_eq!(agg_fedavg(&scalars(&[0.0, 3.0]), &[1, 2]).unwrap(), pv(&[2.0]));
        assert_eq!(agg_fedavg(&[pv(&[4.0, 5.0])], &[13]).unwrap(), pv(&[4.0, 5.0]));
        assert_eq!(
            agg_fedavg(&scalars(&[1.0, 2.0]), &[0, 0]),
            Err(Error::DegenerateWeights)
        );
    }

    #[test]
    fn median_examples() {
        assert_eq!(agg_median(&scalars(&[1.0, 2.0, 9.0])).unwrap(), pv(&[2.0]));
        assert_eq!(agg_median(&[pv(&[5.0, 5.0])]).unwrap(), pv(&[5.0, 5.0]));
        let models = [pv(&[0.0, 10.0]), pv(&[1.0, 0.0]), pv(&[2.0, 5.0])];
        assert_eq!(agg_median(&models).unwrap(), pv(&[1.0, 5.0]));
    }

    #[test]
    fn trimmed_mean_examples() {
        let models = scalars(&[1.0, 2.0, 3.0, 4.0, 10.0]);
        assert_eq!(agg_trimmed_mean(&models, 0.2).unwrap(), pv(&[3.0]));
        // floor(0.1 * 5) = 0 trims nothing
        assert_eq!(agg_trimmed_mean(&models, 0.1).unwrap(), agg_mean(&models).unwrap());
        let same = vec![pv(&[1.5, -2.0]); 6];
        assert_eq!(agg_trimmed_mean(&same, 0.3).unwrap(), pv(&[1.5, -2.0]));
        assert!(agg_trimmed_mean(&models, 0.5).is_err());
        assert!(agg_trimmed_mean(&models, 0.0).is_err());
    }

    #[test]
    fn krum_examples() {
        let models = scalars(&[0.0, 1.0, 2.0, 10.0]);
        assert_eq!(krum_scores(&models, 1).unwrap(), vec![1.0, 1.0, 1.0, 64.0]);
        assert_eq!(krum_select(&models, 1).unwrap(), 0);
        assert_eq!(agg_krum(&models, 1).unwrap(), pv(&[0.0]));

        let twins = scalars(&[3.0, 3.0, 7.0, 8.0, 20.0]);
        let s = krum_scores(&twins, 1).unwrap();
        // K-M-2 = 2: twin 0 sees {0 (twin), 16}
        assert_eq!(s[0], 16.0);
        assert_eq!(s[1], 16.0);

        let same = vec![pv(&[1.0, 2.0]); 5];
        assert_eq!(krum_scores(&same, 2).unwrap(), vec![0.0; 5]);

        // K = M + 3: one neighbor per score
        let forced = scalars(&[0.0, 4.0, 5.0]);
        assert_eq!(krum_scores(&forced, 0).unwrap(), vec![16.0, 1.0, 1.0]);

        assert!(krum_scores(&scalars(&[0.0, 1.0, 2.0]), 1).is_err());
    }

    #[test]
    fn krum_picks_central_model() {
        let models = [
            pv(&[0.0, 0.0]),
            pv(&[1.0, 0.1]),
            pv(&[0.1, 0.9]),
            pv(&[0.5, 0.5]),
            pv(&[9.0, -9.0]),
        ];
        assert_eq!(krum_select(&models, 1).unwrap(), 3);
    }

    #[test]
    fn multikrum_examples() {
        let models = scalars(&[0.0, 1.0, 2.0, 10.0]);
        assert_eq!(agg_multikrum(&models, 1, 2).unwrap(), pv(&[0.5]));
        assert_eq!(agg_multikrum(&models, 1, 1).unwrap(), agg_krum(&models, 1).unwrap());
        assert_eq!(agg_multikrum(&models, 1, 4).unwrap(), agg_mean(&models).unwrap());
        assert!(agg_multikrum(&models, 1, 0).is_err());
        assert!(agg_multikrum(&models, 1, 5).is_err());
    }

    #[test]
    fn clustering_examples() {
        let models = [pv(&[1.0, 0.0]), pv(&[0.9, 0.1]), pv(&[-1.0, 0.0])];
        let out = agg_clustering(&models).unwrap();
        assert!((out[0] - 0.95).abs() < 1e-15 && (out[1] - 0.05).abs() < 1e-15);

        // identical directions: every linkage is 0, merges absorb in index order
        let parallel = vec![pv(&[2.0, 1.0]); 5];
        let split = cluster_split(&parallel).unwrap();
        assert_eq!(split.selected, vec![0, 1, 2, 3]);
        assert_eq!(split.rejected, vec![4]);
        assert_eq!(agg_clustering(&parallel).unwrap(), pv(&[2.0, 1.0]));

        let pair = [pv(&[1.0, 0.0]), pv(&[0.0, 1.0])];
        let split = cluster_split(&pair).unwrap();
        assert_eq!(split.selected, vec![0]);
        assert_eq!(split.rejected, vec![1]);

        assert!(agg_clustering(&[pv(&[1.0])]).is_err());
    }

    #[test]
    fn clustering_equal_sizes_prefers_tighter() {
        let models = [
            pv(&[1.0, 0.0]),
            pv(&[0.7, 0.7]),
            pv(&[-1.0, -0.01]),
            pv(&[-1.0, 0.01]),
        ];
        let split = cluster_split(&models).unwrap();
        assert_eq!(split.selected, vec![2, 3]);
    }

    #[test]
    fn clustering_zero_model_is_isolated() {
        let models = [pv(&[1.0, 0.0]), pv(&[0.0, 0.0]), pv(&[1.0, 0.1]), pv(&[0.9, 0.0])];
        let split = cluster_split(&models).unwrap();
        assert_eq!(split.rejected, vec![1]);
    }

    fn model_set(k: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, d), k)
    }

    fn within_range(models: &[ParamVec], out: &ParamVec) -> bool {
        (0..out.dim()).all(|j| {
            let lo = models.iter().map(|m| m[j]).fold(f64::INFINITY, f64::min);
            let hi = models.iter().map(|m| m[j]).fold(f64::NEG_INFINITY, f64::max);
            out[j] >= lo - 1e-12 && out[j] <= hi + 1e-12
        })
    }

    proptest! {
        #[test]
        fn permutation_invariance(raw in model_set(7, 3), rot in 1usize..7) {
            let models: Vec<ParamVec> = raw.iter().map(|m| pv(m)).collect();
            let mut permuted = models.clone();
            permuted.rotate_left(rot);
            permuted.swap(0, 3);
            let close = |a: &ParamVec, b: &ParamVec| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-9);
            prop_assert!(close(&agg_mean(&models).unwrap(), &agg_mean(&permuted).unwrap()));
            prop_assert!(close(&agg_median(&models).unwrap(), &agg_median(&permuted).unwrap()));
            prop_assert!(close(&agg_trimmed_mean(&models, 0.3).unwrap(), &agg_trimmed_mean(&permuted, 0.3).unwrap()));
            prop_assert!(close(&agg_krum(&models, 2).unwrap(), &agg_krum(&permuted, 2).unwrap()));
            prop_assert!(close(&agg_multikrum(&models, 2, 3).unwrap(), &agg_multikrum(&permuted, 2, 3).unwrap()));
            prop_assert!(close(&agg_clustering(&models).unwrap(), &agg_clustering(&permuted).unwrap()));
        }

        #[test]
        fn median_and_trimmed_stay_in_range(raw in model_set(6, 4), beta in 0.05f64..0.45) {
            let models: Vec<ParamVec> = raw.iter().map(|m| pv(m)).collect();
            prop_assert!(within_range(&models, &agg_median(&models).unwrap()));
            prop_assert!(within_range(&models, &agg_trimmed_mean(&models, beta).unwrap()));
        }

        #[test]
        fn clustering_is_mean_of_subset(raw in model_set(6, 3)) {
            let models: Vec<ParamVec> = raw.iter().map(|m| pv(m)).collect();
            let split = cluster_split(&models).unwrap();
            let mut all: Vec<usize> = split.selected.iter().chain(&split.rejected).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..6).collect::<Vec<_>>());
            prop_assert!(split.selected.len() >= split.rejected.len());
            let out = agg_clustering(&models).unwrap();
            let expected = paramvec::mean_of(&models, &split.selected).unwrap();
            prop_assert_eq!(out, expected);
        }
    }
}
