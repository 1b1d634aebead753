//! Similarity filter: clip every model to the median norm, then keep the
//! `K - f - 1` models with the smallest cosine distance to the
//! coordinate-wise median.

use alloc::vec::Vec;

use super::check_filter_size;
use crate::paramvec::{
    check_models, coordwise_median, cosine_dist_or_max, median_in_place, norm_clip, ParamVec,
};
use crate::robust_agg::rank_ascending;
use crate::{Error, Result};

/// Cosine distance of every norm-clipped model to the median model.
///
/// Zero-norm models score 2. A zero median model is an error.
pub fn median_cosine_distances(models: &[ParamVec]) -> Result<Vec<f64>> {
    let median = coordwise_median(models)?;
    if median.norm_sq() == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let mut norms: Vec<f64> = models.iter().map(ParamVec::norm).collect();
    let cap = median_in_place(&mut norms)?;
    models
        .iter()
        .map(|m| {
            if cap > 0.0 {
                cosine_dist_or_max(&norm_clip(m, cap)?, &median)
            } else {
                cosine_dist_or_max(m, &median)
            }
        })
        .collect()
}

/// Indices (ascending) of the `K - f - 1` models most aligned with the median.
pub fn wfagg_c(models: &[ParamVec], assumed_malicious: usize) -> Result<Vec<usize>> {
    check_models(models)?;
    let keep = check_filter_size(models.len(), assumed_malicious)?;
    let distances = median_cosine_distances(models)?;
    let mut picked: Vec<usize> = rank_ascending(&distances).into_iter().take(keep).collect();
    picked.sort_unstable();
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pv(x: &[f64]) -> ParamVec {
        ParamVec::from_slice(x).unwrap()
    }

    #[test]
    fn worked_example() {
        let models = [pv(&[1.0, 0.0]), pv(&[2.0, 0.0]), pv(&[0.0, 1.0])];
        assert_eq!(median_cosine_distances(&models).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(wfagg_c(&models, 1).unwrap(), vec![0]);
    }

    #[test]
    fn parallel_models_pure_tie_break() {
        let models: Vec<ParamVec> = (1..=6).map(|c| pv(&[c as f64, 2.0 * c as f64])).collect();
        assert_eq!(wfagg_c(&models, 2).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn antiparallel_outlier_excluded() {
        let models = [
            pv(&[1.0, 0.2]),
            pv(&[0.9, 0.1]),
            pv(&[-5.0, -1.0]),
            pv(&[1.1, 0.0]),
            pv(&[1.0, -0.1]),
        ];
        let picked = wfagg_c(&models, 1).unwrap();
        assert_eq!(picked.len(), 3);
        assert!(!picked.contains(&2));
    }

    #[test]
    fn zero_median_is_an_error() {
        let models = [pv(&[1.0, 0.0]), pv(&[-1.0, 0.0]), pv(&[0.0, 0.0])];
        assert_eq!(wfagg_c(&models, 1), Err(Error::ZeroNorm));
    }

    #[test]
    fn zero_neighbor_scores_worst() {
        let models = [pv(&[1.0, 0.0]), pv(&[0.0, 0.0]), pv(&[1.0, 0.5]), pv(&[2.0, 0.1])];
        let d = median_cosine_distances(&models).unwrap();
        assert_eq!(d[1], 2.0);
        assert!(!wfagg_c(&models, 1).unwrap().contains(&1));
    }
}
