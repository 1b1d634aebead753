//! Distance filter: keep the `K - f - 1` models closest (squared Euclidean)
//! to the coordinate-wise median.

use alloc::vec::Vec;

use super::check_filter_size;
use crate::paramvec::{check_models, coordwise_median, euclidean_dist_sq, ParamVec};
use crate::robust_agg::rank_ascending;
use crate::Result;

/// Squared distance of every model to the coordinate-wise median.
pub fn median_distances(models: &[ParamVec]) -> Result<Vec<f64>> {
    let median = coordwise_median(models)?;
    models
        .iter()
        .map(|m| euclidean_dist_sq(m, &median))
        .collect()
}

/// Indices (ascending) of the `K - f - 1` models nearest the median.
pub fn wfagg_d(models: &[ParamVec], assumed_malicious: usize) -> Result<Vec<usize>> {
    check_models(models)?;
    let keep = check_filter_size(models.len(), assumed_malicious)?;
    let distances = median_distances(models)?;
    let mut picked: Vec<usize> = rank_ascending(&distances).into_iter().take(keep).collect();
    picked.sort_unstable();
    Ok(picked)
}
