//! Consensus and accuracy summaries.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{Role, RoundRecord};
use crate::paramvec::{check_models, mean, ParamVec};
use crate::{Error, Result};

/// `1 - Σ‖v_i − v̄‖² / Σ‖v_i‖²`; `None` when every vector is zero.
pub fn r_squared(models: &[ParamVec]) -> Result<Option<f64>> {
    if models.is_empty() {
        return Err(Error::Empty("models"));
    }
    check_models(models)?;
    let centre = mean(models)?;
    let mut ssr = 0.0;
    let mut sst = 0.0;
    for v in models {
        sst += v.norm_sq();
        ssr += v.iter().zip(centre.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    if sst == 0.0 {
        return Ok(None);
    }
    Ok(Some(1.0 - ssr / sst))
}

/// Final-round accuracy of benign nodes grouped by malicious-neighbor count.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Summary {
    pub final_round: u32,
    /// Mean benign accuracy per malicious-neighbor count.
    pub by_malicious_neighbors: BTreeMap<usize, f64>,
    /// Number of benign nodes in each group.
    pub group_sizes: BTreeMap<usize, usize>,
    /// Mean accuracy over all benign nodes.
    pub overall: f64,
    pub r_squared: Option<f64>,
}

impl Summary {
    pub fn from_record(record: &RoundRecord) -> Self {
        let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        let mut total = 0.0;
        let mut count = 0usize;
        for node in record.nodes.iter().filter(|n| n.role == Role::Benign) {
            let entry = sums.entry(node.malicious_neighbors).or_insert((0.0, 0));
            entry.0 += node.accuracy;
            entry.1 += 1;
            total += node.accuracy;
            count += 1;
        }
        Self {
            final_round: record.round,
            by_malicious_neighbors: sums.iter().map(|(&k, &(s, n))| (k, s / n as f64)).collect(),
            group_sizes: sums.iter().map(|(&k, &(_, n))| (k, n)).collect(),
            overall: if count == 0 { f64::NAN } else { total / count as f64 },
            r_squared: record.r_squared,
        }
    }

    /// Accuracy of the group with `m` malicious neighbors, if any node has
    /// that many.
    pub fn group(&self, m: usize) -> Option<f64> {
        self.by_malicious_neighbors.get(&m).copied()
    }
}

/// Benign models of a round, in node order.
pub(crate) fn benign_models<'a>(models: impl Iterator<Item = (Role, &'a ParamVec)>) -> Vec<ParamVec> {
    models
        .filter(|(role, _)| *role == Role::Benign)
        .map(|(_, m)| m.clone())
        .collect()
}
