//! Registry of the aggregation rules a node can run, and a single dispatch
//! entry point used by the simulation engine.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::paramvec::{self, ParamVec};
use crate::robust_agg::{
    agg_clustering, agg_krum, agg_mean, agg_median, agg_multikrum, agg_trimmed_mean, check_krum,
    trim_count, AggConfig,
};
use crate::topology::NodeId;
use crate::wfagg::{
    alt_wfagg_composite, check_filter_size, wfagg_c, wfagg_composite, wfagg_d, wfagg_e,
    TemporalFilterState, WfaggConfig,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Defense {
    Mean,
    TrimmedMean,
    Median,
    Krum,
    MultiKrum,
    Clustering,
    WfaggD,
    WfaggC,
    WfaggT,
    WfaggE,
    AltWfagg,
    Wfagg,
}

impl Defense {
    pub const ALL: [Defense; 12] = [
        Self::Mean,
        Self::TrimmedMean,
        Self::Median,
        Self::Krum,
        Self::MultiKrum,
        Self::Clustering,
        Self::WfaggD,
        Self::WfaggC,
        Self::WfaggT,
        Self::WfaggE,
        Self::AltWfagg,
        Self::Wfagg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::TrimmedMean => "trimmed-mean",
            Self::Median => "median",
            Self::Krum => "krum",
            Self::MultiKrum => "multi-krum",
            Self::Clustering => "clustering",
            Self::WfaggD => "wfagg-d",
            Self::WfaggC => "wfagg-c",
            Self::WfaggT => "wfagg-t",
            Self::WfaggE => "wfagg-e",
            Self::AltWfagg => "alt-wfagg",
            Self::Wfagg => "wfagg",
        }
    }

    /// Whether the rule keeps per-neighbor temporal history.
    pub fn uses_temporal_state(self) -> bool {
        matches!(self, Self::WfaggT | Self::AltWfagg | Self::Wfagg)
    }

    /// Whether the node's own model enters the aggregate.
    pub fn uses_local_model(self) -> bool {
        matches!(self, Self::WfaggE | Self::AltWfagg | Self::Wfagg)
    }

    /// Fails fast if the rule cannot run on `k` received models.
    pub fn check(self, cfg: &DefenseConfig, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::Precondition(format!(
                "{} needs at least one received model",
                self.name()
            )));
        }
        match self {
            Self::Mean | Self::Median | Self::WfaggT => Ok(()),
            Self::WfaggE => cfg.wfagg.validate(),
            Self::TrimmedMean => {
                cfg.agg.validate_trim_rate()?;
                let b = trim_count(k, cfg.agg.trim_rate);
                if k < 2 * b + 1 {
                    return Err(Error::Precondition(format!(
                        "Trimmed-Mean needs K >= 2*floor(beta*K) + 1, got K = {k}"
                    )));
                }
                Ok(())
            }
            Self::Krum => check_krum(k, cfg.agg.assumed_malicious),
            Self::MultiKrum => {
                check_krum(k, cfg.agg.assumed_malicious)?;
                let m = cfg.agg.multikrum_m_for(k);
                if m == 0 || m > k {
                    return Err(Error::Precondition(format!(
                        "Multi-Krum needs 1 <= m <= K, got m = {m}, K = {k}"
                    )));
                }
                Ok(())
            }
            Self::Clustering => {
                if k < 2 {
                    return Err(Error::Precondition(format!(
                        "Clustering needs at least 2 models, got {k}"
                    )));
                }
                Ok(())
            }
            Self::WfaggD | Self::WfaggC => check_filter_size(k, cfg.wfagg.assumed_malicious).map(drop),
            Self::Wfagg => {
                cfg.wfagg.validate()?;
                check_filter_size(k, cfg.wfagg.assumed_malicious).map(drop)
            }
            Self::AltWfagg => {
                cfg.wfagg.validate()?;
                let size = check_filter_size(k, cfg.wfagg.assumed_malicious)?;
                check_krum(k, cfg.wfagg.assumed_malicious)?;
                let m = cfg.wfagg.alt_multikrum_m.unwrap_or(size);
                if m == 0 || m > k {
                    return Err(Error::Precondition(format!(
                        "Multi-Krum needs 1 <= m <= K, got m = {m}, K = {k}"
                    )));
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Defense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Defense {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|d| d.name() == wanted || d.name().replace('-', "") == wanted)
            .ok_or_else(|| Error::InvalidConfig {
                field: "defense",
                reason: format!("unknown defense {s:?}"),
            })
    }
}

/// Parameters for every rule; each rule reads the part it needs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DefenseConfig {
    pub agg: AggConfig,
    pub wfagg: WfaggConfig,
}

/// A node's aggregated model and, for weighting rules, the weight it gave
/// each received model.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregated {
    pub model: ParamVec,
    pub weights: Option<Vec<f64>>,
}

/// Runs `defense` for one node.
///
/// `ids[j]` is the sender of `models[j]`; `local` is the node's own model
/// (used only by rules that smooth towards it) and `state` its temporal
/// history (used only by rules with a temporal filter).
pub fn aggregate(
    defense: Defense,
    cfg: &DefenseConfig,
    local: &ParamVec,
    ids: &[NodeId],
    models: &[ParamVec],
    state: &mut TemporalFilterState,
    round: u32,
) -> Result<Aggregated> {
    defense.check(cfg, models.len())?;
    let plain = |model| Ok(Aggregated { model, weights: None });
    let f = cfg.wfagg.assumed_malicious;
    match defense {
        Defense::Mean => plain(agg_mean(models)?),
        Defense::TrimmedMean => plain(agg_trimmed_mean(models, cfg.agg.trim_rate)?),
        Defense::Median => plain(agg_median(models)?),
        Defense::Krum => plain(agg_krum(models, cfg.agg.assumed_malicious)?),
        Defense::MultiKrum => plain(agg_multikrum(
            models,
            cfg.agg.assumed_malicious,
            cfg.agg.multikrum_m_for(models.len()),
        )?),
        Defense::Clustering => plain(agg_clustering(models)?),
        Defense::WfaggD => selection(models, &wfagg_d(models, f)?),
        Defense::WfaggC => selection(models, &wfagg_c(models, f)?),
        Defense::WfaggT => {
            let outcome = state.evaluate(ids, models, round, cfg.wfagg.transient)?;
            let accepted = outcome.accepted.clone();
            let result = if accepted.is_empty() {
                let all: Vec<usize> = (0..models.len()).collect();
                selection(models, &all)
            } else {
                selection(models, &accepted)
            }?;
            state.commit(outcome.updates);
            Ok(result)
        }
        Defense::WfaggE => {
            let weights = vec![1.0; models.len()];
            let model = wfagg_e(local, models, &weights, cfg.wfagg.alpha)?;
            Ok(Aggregated {
                model,
                weights: Some(weights),
            })
        }
        Defense::Wfagg | Defense::AltWfagg => {
            let outcome = if defense == Defense::Wfagg {
                wfagg_composite(local, ids, models, &cfg.wfagg, state, round)?
            } else {
                alt_wfagg_composite(local, ids, models, &cfg.wfagg, state, round)?
            };
            Ok(Aggregated {
                model: outcome.model,
                weights: Some(outcome.verdicts.iter().map(|v| v.weight).collect()),
            })
        }
    }
}

/// Mean of the selected models with 0/1 weights reported.
fn selection(models: &[ParamVec], picked: &[usize]) -> Result<Aggregated> {
    let model = paramvec::mean_of(models, picked)?;
    let mut weights = vec![0.0; models.len()];
    for &j in picked {
        weights[j] = 1.0;
    }
    Ok(Aggregated {
        model,
        weights: Some(weights),
    })
}
