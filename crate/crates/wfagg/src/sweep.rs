//! Grids of experiments over defenses × attacks × modes.
//!
//! Each cell writes `cells/<mode>_<defense>_<attack>.json` as soon as it
//! finishes. A rerun reuses any cell file whose recorded configuration
//! matches, so an interrupted sweep resumes where it stopped. When all cells
//! are done the sweep writes `sweep.csv` (one row per cell) and
//! `table.csv` (one row per defense and attack, with the centralized result
//! next to the decentralized 0/1/2 malicious-neighbor groups).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wfagg_core::defense::Defense;
use wfagg_core::sim::{run_experiment, ExperimentConfig, Executor};
use wfagg_core::topology::Mode;

use crate::config::{attack_from_label, SweepConfig};
use crate::output::{write_atomic, RunSummary};
use crate::{Error, Result};

pub const CELLS_DIR: &str = "cells";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const TABLE_CSV: &str = "table.csv";

/// One point of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub mode: Mode,
    pub defense: Defense,
    pub attack: String,
    pub config: ExperimentConfig,
}

impl Cell {
    pub fn id(&self) -> String {
        format!("{}_{}_{}", self.mode.name(), self.defense.name(), self.attack)
    }
}

/// Expands the grid in mode, defense, attack order.
pub fn cells(base: &ExperimentConfig, spec: &SweepConfig) -> Result<Vec<Cell>> {
    for (field, empty) in [
        ("sweep.defenses", spec.defenses.is_empty()),
        ("sweep.attacks", spec.attacks.is_empty()),
        ("sweep.modes", spec.modes.is_empty()),
    ] {
        if empty {
            return Err(Error::config(field, "must list at least one entry"));
        }
    }
    let mut out = Vec::with_capacity(spec.modes.len() * spec.defenses.len() * spec.attacks.len());
    for &mode in &spec.modes {
        for &defense in &spec.defenses {
            for label in &spec.attacks {
                let mut config = base.clone();
                config.mode = mode;
                config.defense = defense;
                config.attack = attack_from_label(&base.attack, label)
                    .map_err(|e| Error::config("sweep.attacks", e.to_string()))?;
                out.push(Cell {
                    mode,
                    defense,
                    attack: label.to_ascii_lowercase(),
                    config,
                });
            }
        }
    }
    Ok(out)
}

/// What a cell file stores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub mode: Mode,
    pub defense: Defense,
    pub attack: String,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<RunSummary>,
    /// Why the cell could not run (e.g. a violated defense precondition).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// How a cell was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Ran,
    Resumed,
}

fn cell_path(dir: &Path, cell: &Cell) -> PathBuf {
    dir.join(CELLS_DIR).join(format!("{}.json", cell.id()))
}

fn load_cell(path: &Path, cell: &Cell) -> Option<CellRecord> {
    let bytes = std::fs::read(path).ok()?;
    let rec: CellRecord = serde_json::from_slice(&bytes).ok()?;
    (rec.config == cell.config).then_some(rec)
}

/// Runs (or resumes) one cell and persists it.
pub fn run_cell<E: Executor>(dir: &Path, cell: &Cell, exec: &E) -> Result<(CellRecord, CellStatus)> {
    let path = cell_path(dir, cell);
    if let Some(rec) = load_cell(&path, cell) {
        return Ok((rec, CellStatus::Resumed));
    }
    let (summary, error) = match run_experiment(&cell.config, exec) {
        Ok(result) => (Some(RunSummary::new(&cell.config, &result)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let rec = CellRecord {
        mode: cell.mode,
        defense: cell.defense,
        attack: cell.attack.clone(),
        config: cell.config.clone(),
        summary,
        error,
    };
    let parent = path.parent().expect("cell path has a parent");
    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let mut json = serde_json::to_vec_pretty(&rec)?;
    json.push(b'\n');
    write_atomic(&path, &json)?;
    Ok((rec, CellStatus::Ran))
}

/// Runs every cell, calling `progress` after each, then writes the
/// aggregate CSVs.
pub fn run_sweep<E, P>(dir: &Path, cells: &[Cell], exec: &E, mut progress: P) -> Result<Vec<CellRecord>>
where
    E: Executor,
    P: FnMut(usize, &CellRecord, CellStatus),
{
    let mut records = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        let (rec, status) = run_cell(dir, cell, exec)?;
        progress(i, &rec, status);
        records.push(rec);
    }
    write_atomic(&dir.join(SWEEP_CSV), &sweep_csv(&records)?)?;
    write_atomic(&dir.join(TABLE_CSV), &table_csv(&records)?)?;
    Ok(records)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

pub fn sweep_csv(records: &[CellRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "mode",
        "defense",
        "attack",
        "acc_0mn",
        "acc_1mn",
        "acc_2mn",
        "acc_benign",
        "r_squared",
        "error",
    ])?;
    for r in records {
        let s = r.summary.as_ref();
        w.write_record([
            r.mode.name().to_string(),
            r.defense.name().to_string(),
            r.attack.clone(),
            fmt_opt(s.and_then(|s| s.group(0))),
            fmt_opt(s.and_then(|s| s.group(1))),
            fmt_opt(s.and_then(|s| s.group(2))),
            fmt_opt(s.map(|s| s.benign_mean_accuracy)),
            fmt_opt(s.and_then(|s| s.r_squared)),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

/// Table-style layout: rows are (defense, attack); columns are the
/// centralized benign accuracy and the decentralized 0/1/2 m.n. groups.
pub fn table_csv(records: &[CellRecord]) -> Result<Vec<u8>> {
    let mut keys: Vec<(Defense, String)> = Vec::new();
    for r in records {
        let k = (r.defense, r.attack.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let find = |mode: Mode, d: Defense, a: &str| {
        records
            .iter()
            .find(|r| r.mode == mode && r.defense == d && r.attack == a)
            .and_then(|r| r.summary.as_ref())
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["defense", "attack", "central", "decentral_0mn", "decentral_1mn", "decentral_2mn"])?;
    for (d, a) in keys {
        let c = find(Mode::Central, d, &a);
        let dec = find(Mode::Decentral, d, &a);
        w.write_record([
            d.name().to_string(),
            a.clone(),
            fmt_opt(c.map(|s| s.benign_mean_accuracy)),
            fmt_opt(dec.and_then(|s| s.group(0))),
            fmt_opt(dec.and_then(|s| s.group(1))),
            fmt_opt(dec.and_then(|s| s.group(2))),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}
