//! Round-synchronous experiment engine.
//!
//! Each round every node trains locally, Byzantine nodes poison what they
//! send, and every node aggregates the vectors its neighbors sent with the
//! configured defense. All nodes read the previous round's snapshot, so the
//! result does not depend on processing order or on the [`Executor`].

mod metrics;

use alloc::format;
use alloc::vec::Vec;

pub use metrics::{r_squared, Summary};

use crate::attacks::{attack_alie, attack_ipm, attack_noise, attack_signflip, AttackConfig, AttackContext, AttackKind, Visibility};
use crate::defense::{aggregate, Defense, DefenseConfig};
use crate::learning::{
    evaluate_accuracy, gen_synthetic, local_train, Architecture, DataSpec, Dataset, Model, SyntheticData,
    TrainerConfig,
};
use crate::paramvec::ParamVec;
use crate::rng::{stream, Purpose};
use crate::robust_agg::AggConfig;
use crate::topology::{Mode, NodeId, Topology};
use crate::wfagg::{TemporalFilterState, WfaggConfig};
use crate::{Error, Result};

/// Runs `n` independent jobs and returns their results in index order.
pub trait Executor: Sync {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Role {
    Benign,
    Malicious,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Self::Benign => "benign",
            Self::Malicious => "malicious",
        }
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Number of clients `N`.
    pub nodes: usize,
    /// Ring degree `c` (decentralized mode only).
    pub degree: usize,
    pub malicious: Vec<NodeId>,
    pub rounds: u32,
    pub seed: u64,
    pub defense: Defense,
    pub agg: AggConfig,
    pub wfagg: WfaggConfig,
    pub attack: AttackConfig,
    pub trainer: TrainerConfig,
    pub data: DataSpec,
    pub model: Architecture,
    /// Standard deviation of the Gaussian parameter initialization.
    pub init_std: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Decentral,
            nodes: 20,
            degree: 8,
            malicious: alloc::vec![5, 11],
            rounds: 10,
            seed: 1,
            defense: Defense::Wfagg,
            agg: AggConfig::default(),
            wfagg: WfaggConfig::default(),
            attack: AttackConfig::default(),
            trainer: TrainerConfig::default(),
            data: DataSpec::default(),
            model: Architecture::Softmax,
            init_std: 0.01,
        }
    }
}

impl ExperimentConfig {
    pub fn defense_config(&self) -> DefenseConfig {
        DefenseConfig {
            agg: self.agg,
            wfagg: self.wfagg,
        }
    }

    pub fn build_topology(&self) -> Result<Topology> {
        match self.mode {
            Mode::Decentral => Topology::ring_regular(self.nodes, self.degree),
            Mode::Central => Topology::star(self.nodes),
        }
    }

    /// Checks everything that can be checked before round 1, including the
    /// defense preconditions for every aggregating node.
    pub fn validate(&self) -> Result<Topology> {
        if self.nodes == 0 {
            return Err(Error::InvalidConfig {
                field: "nodes",
                reason: "must be positive".into(),
            });
        }
        let mut seen = Vec::new();
        for &id in &self.malicious {
            if id >= self.nodes {
                return Err(Error::InvalidConfig {
                    field: "malicious",
                    reason: format!("id {id} outside 0..{}", self.nodes),
                });
            }
            if seen.contains(&id) {
                return Err(Error::InvalidConfig {
                    field: "malicious",
                    reason: format!("id {id} listed twice"),
                });
            }
            seen.push(id);
        }
        if self.malicious.len() >= self.nodes {
            return Err(Error::InvalidConfig {
                field: "malicious",
                reason: "at least one benign node is required".into(),
            });
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "init_std",
                reason: format!("must be non-negative, got {}", self.init_std),
            });
        }
        if let Architecture::Mlp { hidden, layers } = self.model {
            if hidden == 0 || layers == 0 {
                return Err(Error::InvalidConfig {
                    field: "model",
                    reason: "hidden width and layer count must be positive".into(),
                });
            }
        }
        self.attack.validate()?;
        self.trainer.validate()?;
        self.data.validate()?;
        let benign = self.nodes - self.malicious.len();
        if self.attack.kind == AttackKind::Alie && !self.malicious.is_empty() && benign < 2 {
            return Err(Error::InvalidConfig {
                field: "attack",
                reason: "ALIE needs at least 2 benign nodes".into(),
            });
        }
        let topo = self.build_topology()?;
        let cfg = self.defense_config();
        for node in aggregators(&topo) {
            let k = topo.degree(node)?;
            self.defense.check(&cfg, k).map_err(|e| match e {
                Error::Precondition(msg) => Error::InvalidConfig {
                    field: "defense",
                    reason: format!("{msg} (node {node} has {k} neighbors)"),
                },
                other => other,
            })?;
        }
        if self.attack.visibility == Visibility::NeighborsOnly
            && matches!(self.attack.kind, AttackKind::Alie | AttackKind::Ipm)
            && topo.mode() == Mode::Decentral
        {
            let need = if self.attack.kind == AttackKind::Alie { 2 } else { 1 };
            for &m in &self.malicious {
                let visible = topo.neighbors(m)?.iter().filter(|j| !self.malicious.contains(j)).count();
                if visible < need {
                    return Err(Error::InvalidConfig {
                        field: "attack.visibility",
                        reason: format!("node {m} sees {visible} benign neighbors, needs {need}"),
                    });
                }
            }
        }
        Ok(topo)
    }
}

fn aggregators(topo: &Topology) -> Vec<NodeId> {
    match topo.server() {
        Some(s) => alloc::vec![s],
        None => (0..topo.node_count()).collect(),
    }
}

/// One participant's persistent state.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: NodeId,
    pub role: Role,
    pub model: Model,
    /// Training data; label-flipped for Label-Flipping attackers.
    pub shard: Dataset,
    pub temporal: TemporalFilterState,
    pub malicious_neighbors: usize,
}

/// Per-node outcome of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub node: NodeId,
    pub role: Role,
    pub malicious_neighbors: usize,
    pub accuracy: f64,
    /// Weight given to each neighbor's model, for weighting rules.
    pub weights: Option<Vec<(NodeId, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: u32,
    pub nodes: Vec<NodeRecord>,
    /// Consensus of the benign models.
    pub r_squared: Option<f64>,
}

/// Records of every round (round 0 holds the initial models) and the
/// summary of the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub records: Vec<RoundRecord>,
    pub summary: Summary,
}

/// The aggregating server in centralized mode.
#[derive(Debug, Clone, PartialEq)]
struct ServerState {
    id: NodeId,
    model: Model,
    temporal: TemporalFilterState,
}

/// A running experiment.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: ExperimentConfig,
    topo: Topology,
    test: Dataset,
    nodes: Vec<NodeState>,
    server: Option<ServerState>,
    round: u32,
    last_weights: Vec<Option<Vec<(NodeId, f64)>>>,
}

impl Simulation {
    /// Builds the experiment on freshly generated synthetic data.
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let SyntheticData { shards, test, .. } = gen_synthetic(&cfg.data, cfg.nodes, cfg.seed)?;
        Self::with_data(cfg, shards, test)
    }

    /// Builds the experiment on caller-supplied shards (one per client) and
    /// test set. `cfg.data` is ignored apart from validation.
    pub fn with_data(cfg: ExperimentConfig, shards: Vec<Dataset>, test: Dataset) -> Result<Self> {
        let topo = cfg.validate()?;
        if shards.len() != cfg.nodes {
            return Err(Error::LengthMismatch {
                what: "shards vs nodes",
                left: shards.len(),
                right: cfg.nodes,
            });
        }
        if test.is_empty() {
            return Err(Error::Empty("test set"));
        }
        let p = test.dim();
        let c = test.num_classes();
        for shard in &shards {
            if shard.is_empty() {
                return Err(Error::Empty("training shard"));
            }
            if shard.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: shard.dim(),
                });
            }
            if shard.num_classes() != c {
                return Err(Error::LengthMismatch {
                    what: "classes in shard vs test set",
                    left: shard.num_classes(),
                    right: c,
                });
            }
        }
        let window = cfg.wfagg.window;
        let init = |node: NodeId| {
            let mut rng = stream(cfg.seed, node as u64, 0, Purpose::Init);
            Model::init(cfg.model, p, c, cfg.init_std, &mut rng)
        };
        let server = topo.server().map(|id| ServerState {
            id,
            model: init(id),
            temporal: TemporalFilterState::new(window),
        });
        let nodes = shards
            .into_iter()
            .enumerate()
            .map(|(id, shard)| {
                let malicious = cfg.malicious.contains(&id);
                let role = if malicious { Role::Malicious } else { Role::Benign };
                let shard = if malicious && cfg.attack.kind == AttackKind::LabelFlip {
                    shard.label_flipped()
                } else {
                    shard
                };
                let model = match &server {
                    Some(s) => s.model.clone(),
                    None => init(id),
                };
                Ok(NodeState {
                    id,
                    role,
                    model,
                    shard,
                    temporal: TemporalFilterState::new(window),
                    malicious_neighbors: topo.malicious_neighbors(id, &cfg.malicious)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let count = nodes.len();
        Ok(Self {
            cfg,
            topo,
            test,
            nodes,
            server,
            round: 0,
            last_weights: alloc::vec![None; count],
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn test_set(&self) -> &Dataset {
        &self.test
    }

    /// Last completed round (0 before the first step).
    pub fn round(&self) -> u32 {
        self.round
    }

    /// Global model in centralized mode.
    pub fn global_model(&self) -> Option<&Model> {
        self.server.as_ref().map(|s| &s.model)
    }

    /// Benign node models in id order.
    pub fn benign_models(&self) -> Vec<ParamVec> {
        metrics::benign_models(self.nodes.iter().map(|n| (n.role, n.model.params())))
    }

    /// Evaluates the current state.
    pub fn record<E: Executor>(&self, exec: &E) -> Result<RoundRecord> {
        let accuracies = exec.map(self.nodes.len(), |i| evaluate_accuracy(&self.nodes[i].model, &self.test));
        let nodes = self
            .nodes
            .iter()
            .zip(accuracies)
            .zip(&self.last_weights)
            .map(|((n, acc), w)| {
                Ok(NodeRecord {
                    node: n.id,
                    role: n.role,
                    malicious_neighbors: n.malicious_neighbors,
                    accuracy: acc?,
                    weights: w.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RoundRecord {
            round: self.round,
            nodes,
            r_squared: r_squared(&self.benign_models())?,
        })
    }

    /// Vectors each node sends this round, given the freshly trained models.
    fn outgoing<E: Executor>(&self, exec: &E, trained: &[Model], round: u32) -> Result<Vec<ParamVec>> {
        let attack = &self.cfg.attack;
        let malicious = &self.cfg.malicious;
        let benign_all: Vec<ParamVec> = metrics::benign_models(
            self.nodes.iter().zip(trained).map(|(n, m)| (n.role, m.params())),
        );
        let sent = exec.map(self.nodes.len(), |i| -> Result<ParamVec> {
            let node = &self.nodes[i];
            let own = trained[i].params();
            if node.role == Role::Benign || !attack.kind.poisons_model() {
                return Ok(own.clone());
            }
            match attack.kind {
                AttackKind::Noise => {
                    let mut rng = stream(self.cfg.seed, i as u64, u64::from(round), Purpose::Attack);
                    Ok(attack_noise(own, attack.noise_mean, attack.noise_std, &mut rng))
                }
                AttackKind::SignFlip => Ok(attack_signflip(own)),
                AttackKind::Alie | AttackKind::Ipm => {
                    let visible: Vec<ParamVec>;
                    let benign = match (attack.visibility, self.topo.mode()) {
                        (Visibility::NeighborsOnly, Mode::Decentral) => {
                            visible = self
                                .topo
                                .neighbors(i)?
                                .iter()
                                .filter(|j| !malicious.contains(j))
                                .map(|&j| trained[j].params().clone())
                                .collect();
                            &visible[..]
                        }
                        _ => &benign_all[..],
                    };
                    let ctx = AttackContext {
                        benign_updates: benign,
                        total: benign.len() + malicious.len(),
                        malicious: malicious.len(),
                    };
                    if attack.kind == AttackKind::Alie {
                        attack_alie(&ctx, attack.alie_zmax)
                    } else {
                        attack_ipm(&ctx, attack.ipm_epsilon)
                    }
                }
                AttackKind::None | AttackKind::LabelFlip => Ok(own.clone()),
            }
        });
        sent.into_iter().collect()
    }

    /// Executes the next round.
    pub fn step<E: Executor>(&mut self, exec: &E) -> Result<RoundRecord> {
        let round = self.round + 1;
        let seed = self.cfg.seed;
        let trainer = self.cfg.trainer;
        let trained = exec.map(self.nodes.len(), |i| {
            let node = &self.nodes[i];
            let mut rng = stream(seed, i as u64, u64::from(round), Purpose::Train);
            local_train(&node.model, &node.shard, &trainer, &mut rng)
        });
        let trained = trained.into_iter().collect::<Result<Vec<_>>>()?;
        let sent = self.outgoing(exec, &trained, round)?;
        let defense = self.cfg.defense;
        let dcfg = self.cfg.defense_config();

        match self.server.take() {
            Some(mut server) => {
                let ids: Vec<NodeId> = (0..self.nodes.len()).collect();
                let out = aggregate(
                    defense,
                    &dcfg,
                    server.model.params(),
                    &ids,
                    &sent,
                    &mut server.temporal,
                    round,
                );
                let out = match out {
                    Ok(out) => out,
                    Err(e) => {
                        self.server = Some(server);
                        return Err(e);
                    }
                };
                server.model = server.model.with_params(out.model)?;
                for node in &mut self.nodes {
                    node.model = server.model.clone();
                }
                let weights = out.weights.map(|w| ids.iter().copied().zip(w).collect::<Vec<_>>());
                self.last_weights = alloc::vec![weights; self.nodes.len()];
                debug_assert_eq!(server.id, self.topo.server().unwrap_or(server.id));
                self.server = Some(server);
            }
            None => {
                let results = exec.map(self.nodes.len(), |i| -> Result<_> {
                    let ids = self.topo.neighbors(i)?;
                    let received: Vec<ParamVec> = ids.iter().map(|&j| sent[j].clone()).collect();
                    let mut temporal = self.nodes[i].temporal.clone();
                    let out = aggregate(
                        defense,
                        &dcfg,
                        trained[i].params(),
                        ids,
                        &received,
                        &mut temporal,
                        round,
                    )?;
                    let model = trained[i].with_params(out.model)?;
                    let weights = out.weights.map(|w| ids.iter().copied().zip(w).collect::<Vec<_>>());
                    Ok((model, temporal, weights))
                });
                let results = results.into_iter().collect::<Result<Vec<_>>>()?;
                for (i, (model, temporal, weights)) in results.into_iter().enumerate() {
                    self.nodes[i].model = model;
                    self.nodes[i].temporal = temporal;
                    self.last_weights[i] = weights;
                }
            }
        }
        self.round = round;
        self.record(exec)
    }
}

/// Runs all configured rounds.
pub fn run_experiment<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<ExperimentResult> {
    let mut sim = Simulation::new(cfg.clone())?;
    let mut records = alloc::vec![sim.record(exec)?];
    for _ in 0..cfg.rounds {
        records.push(sim.step(exec)?);
    }
    let summary = Summary::from_record(records.last().expect("round 0 is always recorded"));
    Ok(ExperimentResult { records, summary })
}
