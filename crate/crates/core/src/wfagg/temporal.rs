//! Temporal filter: flags neighbors whose latest step (squared distance and
//! cosine distance to the model they sent last round) falls outside the
//! ±1σ band of an exponentially weighted window over their own history.
//!
//! Only the last model of each neighbor is stored, together with the two
//! metric histories. The filter abstains (accepts nobody) for rounds
//! `t <= transient`. Afterwards a neighbor whose history holds fewer than
//! `window` entries is accepted by default.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::math;
use crate::paramvec::{cosine_dist_or_max, euclidean_dist_sq, ParamVec};
use crate::topology::NodeId;
use crate::{Error, Result};

/// Weight of a metric of age `i` (0 = newest) is `EWMA_DECAY^i`.
pub const EWMA_DECAY: f64 = 0.5;

/// What a node remembers about one neighbor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborHistory {
    pub last_model: Option<ParamVec>,
    /// Squared-distance steps, oldest first.
    pub dist: Vec<f64>,
    /// Cosine-distance steps, oldest first.
    pub cos: Vec<f64>,
}

/// Per-neighbor temporal history owned by a single aggregating node.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalFilterState {
    capacity: usize,
    neighbors: BTreeMap<NodeId, NeighborHistory>,
}

/// Weighted mean and standard deviation of a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub mean: f64,
    pub std: f64,
}

impl WindowStats {
    pub fn contains(&self, x: f64) -> bool {
        self.mean - self.std <= x && x <= self.mean + self.std
    }
}

/// One neighbor's pending state change, produced by [`TemporalFilterState::evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalUpdate {
    pub neighbor: NodeId,
    /// `(squared distance, cosine distance)` to the previous model, if any.
    pub step: Option<(f64, f64)>,
    pub model: ParamVec,
}

/// Verdicts for one round plus the history updates to commit afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalOutcome {
    /// Positions (into the round's model list) accepted, ascending.
    pub accepted: Vec<usize>,
    pub updates: Vec<TemporalUpdate>,
}

/// Exponentially weighted mean/std over `values` (oldest first); the most
/// recent value has weight 1 and each older one is scaled by `decay`.
pub fn ewma_stats(values: &[f64], decay: f64) -> Option<WindowStats> {
    let newest = *values.last()?;
    let mut weight = 1.0;
    let mut total = 0.0;
    let mut shifted = 0.0;
    for &x in values.iter().rev() {
        total += weight;
        shifted += weight * (x - newest);
        weight *= decay;
    }
    let mean = newest + shifted / total;
    let mut weight = 1.0;
    let mut var = 0.0;
    for &x in values.iter().rev() {
        let dev = x - mean;
        var += weight * dev * dev;
        weight *= decay;
    }
    Some(WindowStats {
        mean,
        std: math::sqrt(var / total),
    })
}

impl TemporalFilterState {
    /// `window` is the number of most recent metrics kept per neighbor.
    pub fn new(window: usize) -> Self {
        Self {
            capacity: window.max(1),
            neighbors: BTreeMap::new(),
        }
    }

    pub fn window(&self) -> usize {
        self.capacity
    }

    pub fn history(&self, neighbor: NodeId) -> Option<&NeighborHistory> {
        self.neighbors.get(&neighbor)
    }

    /// Computes this round's verdicts without touching the state.
    pub fn evaluate(
        &self,
        ids: &[NodeId],
        models: &[ParamVec],
        round: u32,
        transient: u32,
    ) -> Result<TemporalOutcome> {
        if ids.len() != models.len() {
            return Err(Error::LengthMismatch {
                what: "neighbor ids vs models",
                left: ids.len(),
                right: models.len(),
            });
        }
        let judging = round > transient;
        let mut accepted = Vec::new();
        let mut updates = Vec::with_capacity(ids.len());

        for (pos, (&id, model)) in ids.iter().zip(models).enumerate() {
            let history = self.neighbors.get(&id);
            let step = match history.and_then(|h| h.last_model.as_ref()) {
                Some(prev) => Some((
                    euclidean_dist_sq(model, prev)?,
                    cosine_dist_or_max(model, prev)?,
                )),
                None => None,
            };

            if judging {
                let full = history.filter(|h| h.dist.len() >= self.capacity);
                let ok = match (full, step) {
                    (Some(h), Some((s, b))) => {
                        let dist = ewma_stats(&h.dist, EWMA_DECAY);
                        let cos = ewma_stats(&h.cos, EWMA_DECAY);
                        match (dist, cos) {
                            (Some(d), Some(c)) => d.contains(s) && c.contains(b),
                            _ => true,
                        }
                    }
                    _ => true,
                };
                if ok {
                    accepted.push(pos);
                }
            }

            updates.push(TemporalUpdate {
                neighbor: id,
                step,
                model: model.clone(),
            });
        }
        Ok(TemporalOutcome { accepted, updates })
    }

    /// Appends the round's metrics and replaces each neighbor's last model.
    pub fn commit(&mut self, updates: Vec<TemporalUpdate>) {
        for u in updates {
            let entry = self.neighbors.entry(u.neighbor).or_default();
            if let Some((s, b)) = u.step {
                entry.dist.push(s);
                entry.cos.push(b);
                if entry.dist.len() > self.capacity {
                    let excess = entry.dist.len() - self.capacity;
                    entry.dist.drain(..excess);
                    entry.cos.drain(..excess);
                }
            }
            entry.last_model = Some(u.model);
        }
    }
}

/// Evaluates the temporal filter for round `round` and commits the new
/// metrics. Returns accepted positions.
pub fn wfagg_t(
    state: &mut TemporalFilterState,
    ids: &[NodeId],
    models: &[ParamVec],
    round: u32,
    transient: u32,
) -> Result<Vec<usize>> {
    let outcome = state.evaluate(ids, models, round, transient)?;
    state.commit(outcome.updates);
    Ok(outcome.accepted)
}
