//! `wfagg`: run, sweep and verify Byzantine-robust aggregation experiments.
//!
//! Exit status is 0 when all requested work completed, 1 when a run,
//! sweep cell or verification check failed, and 2 for unusable input
//! (bad flags, config files or parameter combinations).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use wfagg::config::{FileConfig, Overrides};
use wfagg::exec::Parallel;
use wfagg::output;
use wfagg::presets;
use wfagg::sweep::{self, CellStatus};
use wfagg::verify;
use wfagg_core::attacks::Visibility;
use wfagg_core::defense::Defense;
use wfagg_core::topology::Mode;

#[derive(Parser)]
#[command(name = "wfagg", version, about = "Byzantine-robust aggregation experiments for decentralized federated learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its results.
    Run(Setup),
    /// Run a defenses x attacks x modes grid; reruns resume finished cells.
    Sweep {
        #[command(flatten)]
        setup: Setup,
        /// Comma-separated defenses (default: all twelve).
        #[arg(long, value_delimiter = ',')]
        defenses: Option<Vec<Defense>>,
        /// Comma-separated attack labels, e.g. none,noise,ipm-0.5 (default: the seven table attacks).
        #[arg(long, value_delimiter = ',')]
        attacks: Option<Vec<String>>,
        /// Comma-separated modes (default: central,decentral).
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<Mode>>,
    },
    /// Check the kernels against brute-force oracles and stated invariants.
    Verify {
        /// Random instances per check.
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Only run checks whose name contains one of these strings.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        /// Skip the checks that run whole simulations.
        #[arg(long)]
        fast: bool,
    },
    /// Print the effective configuration as TOML.
    Config(Setup),
}

#[derive(Args, Clone)]
struct Setup {
    /// Experiment file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a named experiment instead of the defaults: robustness or smoke.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    defense: Option<Defense>,
    /// Attack label: none, noise, sign-flip, label-flip, alie, ipm or ipm-<epsilon>.
    #[arg(long)]
    attack: Option<String>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $WFAGG_OUT_DIR, then ./results).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Ring degree c (even).
    #[arg(long)]
    degree: Option<usize>,
    /// Comma-separated malicious client ids; an empty string means none.
    #[arg(long)]
    malicious_ids: Option<String>,
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Also write per-neighbor aggregation weights.
    #[arg(long)]
    weights: bool,
    #[arg(long)]
    ipm_epsilon: Option<f64>,
    #[arg(long)]
    noise_mean: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    alie_zmax: Option<f64>,
    /// omniscient or neighbors-only.
    #[arg(long)]
    visibility: Option<Visibility>,
    #[arg(long)]
    trim_rate: Option<f64>,
    /// Assumed malicious count for Krum and Multi-Krum.
    #[arg(long)]
    krum_f: Option<usize>,
    #[arg(long)]
    multikrum_m: Option<usize>,
    /// Assumed malicious count f for the WFAgg filters.
    #[arg(long)]
    wfagg_f: Option<usize>,
    /// Filter weights as three comma-separated numbers.
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    /// Smoothing factor of WFAgg-E.
    #[arg(long)]
    alpha: Option<f64>,
    /// Temporal window length.
    #[arg(long)]
    window: Option<usize>,
    /// Rounds before the temporal filter starts judging.
    #[arg(long)]
    transient: Option<u32>,
}

/// Exit status 2: the input cannot be run.
struct Unusable(anyhow::Error);

type Outcome = Result<ExitCode, Unusable>;

impl<E: Into<anyhow::Error>> From<E> for Unusable {
    fn from(e: E) -> Self {
        Self(e.into())
    }
}

fn parse_ids(text: &str) -> anyhow::Result<Vec<usize>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| anyhow::anyhow!("invalid configuration field `malicious`: {s:?} is not a node id")))
        .collect()
}

impl Setup {
    fn overrides(&self) -> anyhow::Result<Overrides> {
        Ok(Overrides {
            defense: self.defense,
            attack: self.attack.clone(),
            rounds: self.rounds,
            seed: self.seed,
            out: self.out.clone(),
            mode: self.mode,
            nodes: self.nodes,
            degree: self.degree,
            malicious_ids: self.malicious_ids.as_deref().map(parse_ids).transpose()?,
            workers: self.workers,
            weights: self.weights,
            ipm_epsilon: self.ipm_epsilon,
            noise_mean: self.noise_mean,
            noise_std: self.noise_std,
            alie_zmax: self.alie_zmax,
            visibility: self.visibility,
            trim_rate: self.trim_rate,
            krum_assumed_malicious: self.krum_f,
            multikrum_m: self.multikrum_m,
            wfagg_assumed_malicious: self.wfagg_f,
            tau: self
                .tau
                .as_deref()
                .map(|t| {
                    <[f64; 3]>::try_from(t).map_err(|_| {
                        anyhow::anyhow!("invalid configuration field `tau`: expected 3 comma-separated values, got {}", t.len())
                    })
                })
                .transpose()?,
            alpha: self.alpha,
            window: self.window,
            transient: self.transient,
        })
    }

    fn load(&self) -> anyhow::Result<FileConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => FileConfig::load(path)?,
            (None, Some(name)) => FileConfig {
                experiment: presets::by_name(name).ok_or_else(|| {
                    anyhow::anyhow!("unknown preset {name:?}, expected one of {}", presets::NAMES.join(", "))
                })?,
                ..FileConfig::default()
            },
            (None, None) => FileConfig::default(),
        };
        self.overrides()?.apply(&mut cfg)?;
        Ok(cfg)
    }
}

fn executor(cfg: &FileConfig) -> anyhow::Result<Parallel> {
    Ok(Parallel::new(cfg.output.workers)?)
}

fn run(setup: &Setup) -> Outcome {
    let cfg = setup.load()?;
    cfg.experiment.validate()?;
    let exec = executor(&cfg)?;
    let start = Instant::now();
    let result = match output::execute(&cfg, &exec) {
        Ok(r) => r,
        Err(wfagg::Error::Core(e)) => {
            eprintln!("error: run failed: {e}");
            return Ok(ExitCode::FAILURE);
        }
        Err(e) => return Err(e.into()),
    };
    let dir = cfg.out_dir();
    let summary = match output::write_run(&dir, &cfg, &result) {
        Ok((summary, _)) => summary,
        Err(e) => {
            eprintln!("error: {:#}", anyhow::Error::from(e));
            return Ok(ExitCode::FAILURE);
        }
    };
    print!("{}", summary.table());
    println!("wrote {} in {:.1}s", dir.display(), start.elapsed().as_secs_f64());
    Ok(ExitCode::SUCCESS)
}

fn run_sweep(setup: &Setup, defenses: &Option<Vec<Defense>>, attacks: &Option<Vec<String>>, modes: &Option<Vec<Mode>>) -> Outcome {
    let mut cfg = setup.load()?;
    if let Some(d) = defenses {
        cfg.sweep.defenses = d.clone();
    }
    if let Some(a) = attacks {
        cfg.sweep.attacks = a.clone();
    }
    if let Some(m) = modes {
        cfg.sweep.modes = m.clone();
    }
    let cells = sweep::cells(&cfg.experiment, &cfg.sweep)?;
    let exec = executor(&cfg)?;
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| anyhow::anyhow!("{}: {e}", dir.display()))?;
    std::fs::write(dir.join(output::CONFIG_TOML), cfg.to_toml())?;
    let total = cells.len();
    let start = Instant::now();
    let records = sweep::run_sweep(&dir, &cells, &exec, |i, rec, status| {
        let tag = match status {
            CellStatus::Ran => "ran",
            CellStatus::Resumed => "resumed",
        };
        let detail = match (&rec.summary, &rec.error) {
            (Some(s), _) => format!("benign accuracy {:.2}%", 100.0 * s.benign_mean_accuracy),
            (None, Some(e)) => format!("error: {e}"),
            (None, None) => String::new(),
        };
        eprintln!("[{:>3}/{total}] {:<8} {} {detail}", i + 1, tag, cells[i].id());
    })
    .map_err(anyhow::Error::from)
    .map_err(|e| {
        eprintln!("error: {e:#}");
        e
    });
    let records = match records {
        Ok(r) => r,
        Err(_) => return Ok(ExitCode::FAILURE),
    };
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    println!(
        "{total} cells in {:.1}s; results in {}",
        start.elapsed().as_secs_f64(),
        dir.join(sweep::TABLE_CSV).display()
    );
    if failed > 0 {
        eprintln!("error: {failed} of {total} cells failed; see {}", dir.join(sweep::SWEEP_CSV).display());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn run_verify(cases: usize, seed: u64, only: &[String], fast: bool) -> Outcome {
    if cases == 0 {
        return Err(anyhow::anyhow!("--cases must be positive").into());
    }
    let opts = verify::Options { cases, seed };
    let select = |c: &verify::Check| (!fast || !c.simulation) && (only.is_empty() || only.iter().any(|o| c.name.contains(o.as_str())));
    let reports = verify::run(&opts, select, |r| println!("{}", r.line()));
    if reports.is_empty() {
        return Err(anyhow::anyhow!("no check matches {only:?}").into());
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    println!("{} of {} checks passed (seed {seed}, {cases} cases)", reports.len() - failed, reports.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(setup) => run(setup),
        Command::Sweep {
            setup,
            defenses,
            attacks,
            modes,
        } => run_sweep(setup, defenses, attacks, modes),
        Command::Verify { cases, seed, only, fast } => run_verify(*cases, *seed, only, *fast),
        Command::Config(setup) => setup.load().map(|cfg| {
            print!("{}", cfg.to_toml());
            ExitCode::SUCCESS
        }).map_err(Unusable),
    };
    match outcome {
        Ok(code) => code,
        Err(Unusable(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
