//! Named experiment configurations.

use wfagg_core::learning::Architecture;
use wfagg_core::sim::ExperimentConfig;

/// The scaled robustness scenario: 20 clients on a degree-8 ring with
/// clients 5 and 11 malicious, 10 rounds, a two-hidden-layer tanh network
/// on the synthetic blob task.
///
/// The depth matters: with an odd activation and an odd number of weight
/// layers, negating every parameter negates the logits, so attacks that
/// push the average towards `-θ` are visible in accuracy.
pub fn robustness() -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        model: Architecture::Mlp { hidden: 32, layers: 2 },
        init_std: 0.2,
        ..ExperimentConfig::default()
    };
    cfg.trainer.epochs = 2;
    cfg
}

/// A few-second configuration for smoke tests: 8 clients, softmax model,
/// small shards.
pub fn smoke() -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        nodes: 8,
        degree: 4,
        malicious: vec![2],
        rounds: 3,
        ..ExperimentConfig::default()
    };
    cfg.data.features = 6;
    cfg.data.classes = 3;
    cfg.data.samples_per_node = 40;
    cfg.data.test_samples = 120;
    cfg.wfagg.assumed_malicious = 1;
    cfg.agg.assumed_malicious = 1;
    cfg
}

/// Looks a preset up by name.
pub fn by_name(name: &str) -> Option<ExperimentConfig> {
    match name {
        "robustness" => Some(robustness()),
        "smoke" => Some(smoke()),
        _ => None,
    }
}

pub const NAMES: [&str; 2] = ["robustness", "smoke"];
