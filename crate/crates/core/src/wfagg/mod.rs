//! Weighted filtering aggregation.
//!
//! Three filters each nominate the received models they consider benign:
//! a distance filter ([`wfagg_d`]), a similarity filter ([`wfagg_c`]) and a
//! temporal filter ([`wfagg_t`]). A model's weight is the sum of the `τ` of
//! the filters that accepted it; any weight below the smallest pairwise sum
//! `τ_k + τ_ℓ` is zeroed, so a single filter alone never admits a model.
//! The surviving weights feed [`wfagg_e`], an exponential smoother between
//! the node's own model and the weighted neighbor average.
//!
//! [`alt_wfagg_composite`] swaps the first two filters for Multi-Krum
//! selection and the larger cosine cluster.

mod distance;
mod similarity;
mod temporal;

use alloc::format;
use alloc::vec::Vec;

pub use distance::{median_distances, wfagg_d};
pub use similarity::{median_cosine_distances, wfagg_c};
pub use temporal::{
    ewma_stats, wfagg_t, NeighborHistory, TemporalFilterState, TemporalOutcome, TemporalUpdate,
    WindowStats, EWMA_DECAY,
};

use crate::paramvec::{check_models, ParamVec};
use crate::robust_agg::{cluster_split, multikrum_select};
use crate::topology::NodeId;
use crate::{Error, Result};

/// Slack used when comparing summed `τ` weights against the threshold.
const WEIGHT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct WfaggConfig {
    /// Estimated number of malicious neighbors `f`.
    pub assumed_malicious: usize,
    /// Filter weights `(τ1, τ2, τ3)` for distance, similarity, temporal.
    pub tau: [f64; 3],
    /// Smoothing factor `α` in `[0, 1]`.
    pub alpha: f64,
    /// Temporal window length `W`.
    pub window: usize,
    /// Transient rounds `T_th` during which the temporal filter abstains.
    pub transient: u32,
    /// Multi-Krum selection size for the alternative composite; `None`
    /// selects `K - f - 1` like the distance filter.
    pub alt_multikrum_m: Option<usize>,
}

impl Default for WfaggConfig {
    fn default() -> Self {
        Self {
            assumed_malicious: 2,
            tau: [0.4, 0.4, 0.2],
            alpha: 0.8,
            window: 3,
            transient: 3,
            alt_multikrum_m: None,
        }
    }
}

impl WfaggConfig {
    /// Checks the fields that do not depend on the neighbor count.
    pub fn validate(&self) -> Result<()> {
        if self.tau.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "tau",
                reason: format!("weights must be non-negative, got {:?}", self.tau),
            });
        }
        let sum: f64 = self.tau.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig {
                field: "tau",
                reason: format!("weights must sum to 1, got {sum}"),
            });
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig {
                field: "alpha",
                reason: format!("must lie in [0, 1], got {}", self.alpha),
            });
        }
        if self.window == 0 {
            return Err(Error::InvalidConfig {
                field: "window",
                reason: "must be at least 1".into(),
            });
        }
        if self.transient == 0 {
            return Err(Error::InvalidConfig {
                field: "transient",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Smallest sum of two distinct filter weights.
    pub fn threshold(&self) -> f64 {
        let t = self.tau;
        (t[0] + t[1]).min(t[0] + t[2]).min(t[1] + t[2])
    }
}

/// Number of models the distance and similarity filters keep: `K - f - 1`.
pub fn check_filter_size(k: usize, assumed_malicious: usize) -> Result<usize> {
    if k < assumed_malicious + 2 {
        return Err(Error::Precondition(format!(
            "filters need K - f - 1 >= 1, got K = {k}, f = {assumed_malicious}"
        )));
    }
    Ok(k - assumed_malicious - 1)
}

/// Filter memberships and final weight of one received model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterVerdict {
    pub in_t1: bool,
    pub in_t2: bool,
    pub in_t3: bool,
    /// Raw weight `Σ τ_k [j ∈ T_k]`.
    pub raw_weight: f64,
    /// Weight after thresholding.
    pub weight: f64,
}

impl FilterVerdict {
    pub fn from_membership(in_t1: bool, in_t2: bool, in_t3: bool, cfg: &WfaggConfig) -> Self {
        let mut raw = 0.0;
        if in_t1 {
            raw += cfg.tau[0];
        }
        if in_t2 {
            raw += cfg.tau[1];
        }
        if in_t3 {
            raw += cfg.tau[2];
        }
        let weight = if raw < cfg.threshold() - WEIGHT_EPS {
            0.0
        } else {
            raw
        };
        Self {
            in_t1,
            in_t2,
            in_t3,
            raw_weight: raw,
            weight,
        }
    }
}

/// Verdicts for every model given the three accepted-position sets.
pub fn combine_filters(
    k: usize,
    t1: &[usize],
    t2: &[usize],
    t3: &[usize],
    cfg: &WfaggConfig,
) -> Vec<FilterVerdict> {
    (0..k)
        .map(|j| FilterVerdict::from_membership(t1.contains(&j), t2.contains(&j), t3.contains(&j), cfg))
        .collect()
}

/// `(1 - α) θ_local + α Σ w'_j θ_j` with `w'` the normalized weights.
/// Returns the local model unchanged when every weight is zero.
pub fn wfagg_e(local: &ParamVec, models: &[ParamVec], weights: &[f64], alpha: f64) -> Result<ParamVec> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Precondition(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if models.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "models vs weights",
            left: models.len(),
            right: weights.len(),
        });
    }
    if !local.is_finite() {
        return Err(Error::NonFinite);
    }
    if models.is_empty() {
        return Ok(local.clone());
    }
    let d = check_models(models)?;
    if d != local.dim() {
        return Err(Error::DimensionMismatch {
            expected: local.dim(),
            got: d,
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::DegenerateWeights);
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Ok(local.clone());
    }
    let mut out = local.scaled(1.0 - alpha);
    for (m, w) in models.iter().zip(weights) {
        if *w > 0.0 {
            out.axpy(alpha * w / total, m)?;
        }
    }
    Ok(out)
}

/// Result of a composite aggregation step.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeOutcome {
    pub verdicts: Vec<FilterVerdict>,
    pub model: ParamVec,
}

fn finish(
    local: &ParamVec,
    models: &[ParamVec],
    cfg: &WfaggConfig,
    t1: &[usize],
    t2: &[usize],
    t3: &[usize],
) -> Result<CompositeOutcome> {
    let verdicts = combine_filters(models.len(), t1, t2, t3, cfg);
    let weights: Vec<f64> = verdicts.iter().map(|v| v.weight).collect();
    let model = wfagg_e(local, models, &weights, cfg.alpha)?;
    Ok(CompositeOutcome { verdicts, model })
}

/// Full weighted-filtering step for one node at round `round`.
///
/// `ids[j]` names the sender of `models[j]`; the temporal history in
/// `state` is keyed by it and is updated only if the step succeeds.
pub fn wfagg_composite(
    local: &ParamVec,
    ids: &[NodeId],
    models: &[ParamVec],
    cfg: &WfaggConfig,
    state: &mut TemporalFilterState,
    round: u32,
) -> Result<CompositeOutcome> {
    let t1 = wfagg_d(models, cfg.assumed_malicious)?;
    let t2 = wfagg_c(models, cfg.assumed_malicious)?;
    let temporal = state.evaluate(ids, models, round, cfg.transient)?;
    let out = finish(local, models, cfg, &t1, &t2, &temporal.accepted)?;
    state.commit(temporal.updates);
    Ok(out)
}

/// Like [`wfagg_composite`] with Multi-Krum as the distance filter and the
/// larger average-linkage cosine cluster as the similarity filter.
pub fn alt_wfagg_composite(
    local: &ParamVec,
    ids: &[NodeId],
    models: &[ParamVec],
    cfg: &WfaggConfig,
    state: &mut TemporalFilterState,
    round: u32,
) -> Result<CompositeOutcome> {
    let default_m = check_filter_size(models.len(), cfg.assumed_malicious)?;
    let m = cfg.alt_multikrum_m.unwrap_or(default_m);
    let t1 = multikrum_select(models, cfg.assumed_malicious, m)?;
    let t2 = cluster_split(models)?.selected;
    let temporal = state.evaluate(ids, models, round, cfg.transient)?;
    let out = finish(local, models, cfg, &t1, &t2, &temporal.accepted)?;
    state.commit(temporal.updates);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn pv(x: &[f64]) -> ParamVec {
        ParamVec::from_slice(x).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn weight_lattice_all_patterns() {
        let cfg = WfaggConfig::default();
        let expected = [
            ((false, false, false), 0.0),
            ((true, false, false), 0.0),
            ((false, true, false), 0.0),
            ((false, false, true), 0.0),
            ((true, true, false), 0.8),
            ((true, false, true), 0.6),
            ((false, true, true), 0.6),
            ((true, true, true), 1.0),
        ];
        for ((a, b, c), w) in expected {
            let v = FilterVerdict::from_membership(a, b, c, &cfg);
            assert!(close(v.weight, w), "{a} {b} {c}: {}", v.weight);
        }
        assert!(close(cfg.threshold(), 0.6));
    }

    #[test]
    fn smoother_examples() {
        let local = pv(&[3.0, -1.0]);
        let models = [pv(&[1.0, 0.0]), pv(&[0.0, 1.0])];
        assert_eq!(wfagg_e(&local, &models, &[1.0, 1.0], 0.0).unwrap(), local);
        assert_eq!(
            wfagg_e(&local, &models[..1], &[1.0], 1.0).unwrap(),
            pv(&[1.0, 0.0])
        );
        let out = wfagg_e(&pv(&[0.0, 0.0]), &models, &[0.6, 0.2], 0.8).unwrap();
        assert!(close(out[0], 0.6) && close(out[1], 0.2));
        assert_eq!(wfagg_e(&local, &models, &[0.0, 0.0], 0.8).unwrap(), local);
        assert!(wfagg_e(&local, &models, &[1.0, 1.0], 1.5).is_err());
    }

    fn outlier_set() -> Vec<ParamVec> {
        vec![
            pv(&[0.0, 0.0]),
            pv(&[1.0, 1.0]),
            pv(&[2.0, 2.0]),
            pv(&[3.0, 3.0]),
            pv(&[100.0, 100.0]),
        ]
    }

    #[test]
    fn composite_identical_models_blend() {
        let cfg = WfaggConfig {
            assumed_malicious: 0,
            ..WfaggConfig::default()
        };
        let shared = pv(&[2.0, -4.0]);
        let models = vec![shared.clone(); 4];
        let local = pv(&[0.0, 1.0]);
        let mut state = TemporalFilterState::new(cfg.window);
        let out =
            wfagg_composite(&local, &[1, 2, 3, 4], &models, &cfg, &mut state, 1).unwrap();
        let expected = local.scaled(1.0 - cfg.alpha).add(&shared.scaled(cfg.alpha)).unwrap();
        for (a, b) in out.model.iter().zip(expected.iter()) {
            assert!(close(*a, *b));
        }
        // f = 0 keeps K - 1 models: the last one (tie-break) is excluded in both
        let weights: Vec<f64> = out.verdicts.iter().map(|v| v.weight).collect();
        assert_eq!(weights, vec![0.8, 0.8, 0.8, 0.0]);
    }

    #[test]
    fn composite_drops_single_filter_acceptance() {
        // the far outlier fails the distance filter, so no pair can admit it
        let cfg = WfaggConfig {
            assumed_malicious: 1,
            ..WfaggConfig::default()
        };
        let models = outlier_set();
        let mut state = TemporalFilterState::new(cfg.window);
        let out = wfagg_composite(&pv(&[1.0, 1.0]), &[0, 1, 2, 3, 4], &models, &cfg, &mut state, 1)
            .unwrap();
        let v = &out.verdicts;
        assert!(!v[4].in_t1);
        assert_eq!(v[4].weight, 0.0);
        for verdict in v {
            assert!(verdict.weight == 0.0 || verdict.in_t1 && verdict.in_t2);
        }
    }

    #[test]
    fn alt_multikrum_filter_excludes_outlier() {
        let cfg = WfaggConfig {
            assumed_malicious: 1,
            ..WfaggConfig::default()
        };
        let models = outlier_set();
        let t1 = multikrum_select(&models, 1, 3).unwrap();
        assert!(!t1.contains(&4));
        let mut state = TemporalFilterState::new(cfg.window);
        let out =
            alt_wfagg_composite(&pv(&[1.0, 1.0]), &[0, 1, 2, 3, 4], &models, &cfg, &mut state, 1)
                .unwrap();
        assert!(!out.verdicts[4].in_t1);
        assert_eq!(out.verdicts[4].weight, 0.0);
    }

    #[test]
    fn both_composites_agree_on_identical_models() {
        let cfg = WfaggConfig::default();
        let models = vec![pv(&[1.0, 2.0, 3.0]); 8];
        let local = pv(&[1.0, 2.0, 3.0]);
        let ids: Vec<NodeId> = (0..8).collect();
        let mut s1 = TemporalFilterState::new(cfg.window);
        let mut s2 = TemporalFilterState::new(cfg.window);
        for t in 1..=6 {
            let a = wfagg_composite(&local, &ids, &models, &cfg, &mut s1, t).unwrap();
            let b = alt_wfagg_composite(&local, &ids, &models, &cfg, &mut s2, t).unwrap();
            // the filters pick different tied subsets, so only rounding differs
            assert!(a.model.sub(&b.model).unwrap().norm() < 1e-12);
            assert!(a.model.sub(&local).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn filter_size_precondition() {
        let cfg = WfaggConfig::default();
        let models = vec![pv(&[1.0]); 3];
        let mut state = TemporalFilterState::new(3);
        assert!(matches!(
            wfagg_composite(&models[0], &[0, 1, 2], &models, &cfg, &mut state, 1),
            Err(Error::Precondition(_))
        ));
        // failed step leaves the history untouched
        assert!(state.history(0).is_none());
    }

    #[test]
    fn config_validation() {
        assert!(WfaggConfig::default().validate().is_ok());
        let bad_tau = WfaggConfig {
            tau: [0.5, 0.4, 0.2],
            ..WfaggConfig::default()
        };
        assert!(bad_tau.validate().is_err());
        let bad_alpha = WfaggConfig {
            alpha: -0.1,
            ..WfaggConfig::default()
        };
        assert!(bad_alpha.validate().is_err());
    }

    fn models_strategy(k: usize, d: usize) -> impl Strategy<Value = Vec<ParamVec>> {
        proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, d), k)
            .prop_map(|raw| raw.iter().map(|m| pv(m)).collect())
    }

    proptest! {
        #[test]
        fn filter_cardinality(models in models_strategy(8, 4), f in 0usize..=6) {
            prop_assert_eq!(wfagg_d(&models, f).unwrap().len(), 8 - f - 1);
            prop_assert_eq!(wfagg_c(&models, f).unwrap().len(), 8 - f - 1);
        }

        #[test]
        fn distance_filter_translation_invariant(models in models_strategy(7, 3), shift in proptest::collection::vec(-50.0f64..50.0, 3)) {
            let shift = pv(&shift);
            let moved: Vec<ParamVec> = models.iter().map(|m| m.add(&shift).unwrap()).collect();
            let a = median_distances(&models).unwrap();
            // skip instances whose ranking has a near-tie that rounding could flip
            let mut sorted = a.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[1] - w[0] > 1e-6));
            prop_assert_eq!(wfagg_d(&models, 2).unwrap(), wfagg_d(&moved, 2).unwrap());
        }

        #[test]
        fn similarity_filter_ignores_single_rescale(models in models_strategy(7, 3), which in 0usize..7, c in 0.2f64..5.0) {
            let a = median_cosine_distances(&models);
            prop_assume!(a.is_ok());
            let a = a.unwrap();
            let mut sorted = a.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[1] - w[0] > 1e-6));
            let mut scaled = models.clone();
            scaled[which] = scaled[which].scaled(c);
            // the rescale may move the median itself; compare only when it does not
            prop_assume!(crate::paramvec::coordwise_median(&scaled).unwrap() == crate::paramvec::coordwise_median(&models).unwrap());
            prop_assert_eq!(wfagg_c(&models, 2).unwrap(), wfagg_c(&scaled, 2).unwrap());
        }

        #[test]
        fn smoother_is_convex(local in proptest::collection::vec(-3.0f64..3.0, 4), models in models_strategy(5, 4),
                              weights in proptest::collection::vec(0.0f64..1.0, 5), alpha in 0.0f64..=1.0) {
            let local = pv(&local);
            let out = wfagg_e(&local, &models, &weights, alpha).unwrap();
            for j in 0..4 {
                let members = core::iter::once(&local).chain(
                    models.iter().zip(&weights).filter(|(_, w)| **w > 0.0).map(|(m, _)| m));
                let (lo, hi) = members.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| (lo.min(m[j]), hi.max(m[j])));
                prop_assert!(out[j] >= lo - 1e-12 && out[j] <= hi + 1e-12);
            }
        }

        #[test]
        fn composite_weights_on_lattice(models in models_strategy(8, 3), rounds in 1u32..8) {
            let cfg = WfaggConfig::default();
            let ids: Vec<NodeId> = (0..8).collect();
            let mut state = TemporalFilterState::new(cfg.window);
            let local = models[0].clone();
            for t in 1..=rounds {
                let drifted: Vec<ParamVec> = models.iter().map(|m| m.scaled(1.0 + 0.1 * t as f64)).collect();
                let out = wfagg_composite(&local, &ids, &drifted, &cfg, &mut state, t);
                prop_assume!(out.is_ok());
                for v in out.unwrap().verdicts {
                    prop_assert!([0.0, 0.6, 0.8, 1.0].iter().any(|w| close(v.weight, *w)));
                    prop_assert_eq!(v.weight > 0.0, [v.in_t1, v.in_t2, v.in_t3].iter().filter(|b| **b).count() >= 2);
                }
            }
        }
    }
}
