//! Running one experiment and persisting its results.
//!
//! A run directory holds:
//!
//! * `accuracy.csv`: `round,node_id,role,malicious_neighbors,accuracy`, one
//!   row per client per round (round 0 is the initial state);
//! * `r_squared.csv`: `round,r_squared` over benign models (empty when
//!   undefined);
//! * `weights.csv` (optional): `round,node_id,neighbor_id,weight` for the
//!   weighting rules; in centralized mode `node_id` is the server;
//! * `summary.json`: grouped final accuracies and the effective config;
//! * `config.toml`: the effective configuration, loadable with `--config`.
//!
//! Numbers are written in Rust's shortest round-trip form, so identical runs
//! produce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wfagg_core::sim::{run_experiment, ExperimentConfig, ExperimentResult, Executor, Role, RoundRecord, Simulation};
use wfagg_core::topology::Mode;

use crate::config::FileConfig;
use crate::dataset;
use crate::{Error, Result};

pub const ACCURACY_CSV: &str = "accuracy.csv";
pub const R_SQUARED_CSV: &str = "r_squared.csv";
pub const WEIGHTS_CSV: &str = "weights.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const CONFIG_TOML: &str = "config.toml";

/// Version of the `summary.json` layout.
pub const SUMMARY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub final_round: u32,
    /// Mean final accuracy of benign clients keyed by malicious-neighbor count.
    pub accuracy_by_malicious_neighbors: BTreeMap<usize, f64>,
    pub group_sizes: BTreeMap<usize, usize>,
    pub benign_mean_accuracy: f64,
    pub r_squared: Option<f64>,
    /// Benign mean accuracy after each round, starting at round 0.
    pub benign_mean_accuracy_per_round: Vec<f64>,
}

impl RunSummary {
    pub fn new(cfg: &ExperimentConfig, result: &ExperimentResult) -> Self {
        let s = &result.summary;
        Self {
            format_version: SUMMARY_VERSION,
            config: cfg.clone(),
            final_round: s.final_round,
            accuracy_by_malicious_neighbors: s.by_malicious_neighbors.clone(),
            group_sizes: s.group_sizes.clone(),
            benign_mean_accuracy: s.overall,
            r_squared: s.r_squared,
            benign_mean_accuracy_per_round: result.records.iter().map(benign_mean).collect(),
        }
    }

    pub fn group(&self, m: usize) -> Option<f64> {
        self.accuracy_by_malicious_neighbors.get(&m).copied()
    }

    /// Human-readable table of the grouped accuracies, in percent.
    pub fn table(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} | {} | attack {} | {} rounds | seed {}",
            c.mode.name(),
            c.defense.name(),
            c.attack.label(),
            self.final_round,
            c.seed
        );
        let _ = writeln!(out, "{:<22}{:>8}{:>10}", "malicious neighbors", "nodes", "accuracy");
        for (m, acc) in &self.accuracy_by_malicious_neighbors {
            let _ = writeln!(out, "{:<22}{:>8}{:>9.2}%", m, self.group_sizes[m], 100.0 * acc);
        }
        let _ = writeln!(out, "{:<22}{:>8}{:>9.2}%", "all benign", self.group_sizes.values().sum::<usize>(), 100.0 * self.benign_mean_accuracy);
        match self.r_squared {
            Some(r) => {
                let _ = writeln!(out, "R^2 over benign models: {r:.4}");
            }
            None => {
                let _ = writeln!(out, "R^2 over benign models: undefined");
            }
        }
        out
    }
}

fn benign_mean(record: &RoundRecord) -> f64 {
    let benign: Vec<f64> = record
        .nodes
        .iter()
        .filter(|n| n.role == Role::Benign)
        .map(|n| n.accuracy)
        .collect();
    benign.iter().sum::<f64>() / benign.len() as f64
}

/// Runs the experiment described by `cfg`, on imported data when the file
/// names a dataset.
pub fn execute<E: Executor>(cfg: &FileConfig, exec: &E) -> Result<ExperimentResult> {
    let exp = &cfg.experiment;
    let Some(files) = &cfg.dataset else {
        return Ok(run_experiment(exp, exec)?);
    };
    let train = dataset::load_csv(&files.train, files.classes)?;
    let test = dataset::load_csv(&files.test, files.classes.or(Some(train.num_classes())))?;
    let shards = dataset::shard(&train, exp.nodes, exp.seed)?;
    let mut sim = Simulation::with_data(exp.clone(), shards, test)?;
    let mut records = vec![sim.record(exec)?];
    for _ in 0..exp.rounds {
        records.push(sim.step(exec)?);
    }
    let summary = wfagg_core::sim::Summary::from_record(records.last().expect("round 0 is recorded"));
    Ok(ExperimentResult { records, summary })
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `bytes` to `path` through a temporary sibling so readers never
/// see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

pub fn accuracy_csv(result: &ExperimentResult) -> Result<Vec<u8>> {
    csv_bytes(
        &["round", "node_id", "role", "malicious_neighbors", "accuracy"],
        result.records.iter().flat_map(|r| {
            r.nodes.iter().map(move |n| {
                vec![
                    r.round.to_string(),
                    n.node.to_string(),
                    n.role.name().to_string(),
                    n.malicious_neighbors.to_string(),
                    fmt_f64(n.accuracy),
                ]
            })
        }),
    )
}

pub fn r_squared_csv(result: &ExperimentResult) -> Result<Vec<u8>> {
    csv_bytes(
        &["round", "r_squared"],
        result
            .records
            .iter()
            .map(|r| vec![r.round.to_string(), r.r_squared.map(fmt_f64).unwrap_or_default()]),
    )
}

pub fn weights_csv(cfg: &ExperimentConfig, result: &ExperimentResult) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for r in &result.records {
        let owners: Vec<(usize, &Option<Vec<(usize, f64)>>)> = match cfg.mode {
            // Every client holds the server's weights; report them once.
            Mode::Central => r.nodes.first().map(|n| (cfg.nodes, &n.weights)).into_iter().collect(),
            Mode::Decentral => r.nodes.iter().map(|n| (n.node, &n.weights)).collect(),
        };
        for (owner, weights) in owners {
            for (j, w) in weights.iter().flatten() {
                rows.push(vec![r.round.to_string(), owner.to_string(), j.to_string(), fmt_f64(*w)]);
            }
        }
    }
    csv_bytes(&["round", "node_id", "neighbor_id", "weight"], rows)
}

/// Paths of the files a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub accuracy: PathBuf,
    pub r_squared: PathBuf,
    pub weights: Option<PathBuf>,
    pub summary: PathBuf,
    pub config: PathBuf,
}

/// Writes every result file of a run into `dir`.
pub fn write_run(dir: &Path, cfg: &FileConfig, result: &ExperimentResult) -> Result<(RunSummary, RunFiles)> {
    create_dir(dir)?;
    let files = RunFiles {
        accuracy: dir.join(ACCURACY_CSV),
        r_squared: dir.join(R_SQUARED_CSV),
        weights: cfg.output.weights.then(|| dir.join(WEIGHTS_CSV)),
        summary: dir.join(SUMMARY_JSON),
        config: dir.join(CONFIG_TOML),
    };
    write_atomic(&files.accuracy, &accuracy_csv(result)?)?;
    write_atomic(&files.r_squared, &r_squared_csv(result)?)?;
    if let Some(path) = &files.weights {
        write_atomic(path, &weights_csv(&cfg.experiment, result)?)?;
    }
    let summary = RunSummary::new(&cfg.experiment, result);
    let mut json = serde_json::to_vec_pretty(&summary)?;
    json.push(b'\n');
    write_atomic(&files.summary, &json)?;
    write_atomic(&files.config, cfg.to_toml().as_bytes())?;
    Ok((summary, files))
}
