//! Versioned TOML experiment files and command-line overrides.
//!
//! ```toml
//! version = 1
//!
//! [experiment]
//! mode = "decentral"
//! nodes = 20
//! degree = 8
//! malicious = [5, 11]
//! defense = "wfagg"
//!
//! [experiment.attack]
//! kind = "ipm"
//! ipm_epsilon = 100.0
//!
//! [output]
//! dir = "results/ipm"
//! weights = true
//! ```
//!
//! Every table is optional; missing keys take their defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wfagg_core::attacks::{AttackConfig, AttackKind, Visibility};
use wfagg_core::defense::Defense;
use wfagg_core::sim::ExperimentConfig;
use wfagg_core::topology::{Mode, NodeId};

use crate::{Error, Result};

/// Schema version understood by this build.
pub const CONFIG_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "WFAGG_OUT_DIR";

/// Output directory used when neither flag, file nor environment sets one.
pub const DEFAULT_OUT_DIR: &str = "results";

/// The seven attack labels of the robustness table.
pub const TABLE_ATTACKS: [&str; 7] = ["none", "noise", "sign-flip", "label-flip", "ipm-0.5", "ipm-100", "alie"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub version: u32,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// External data replacing the synthetic task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetFiles>,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            experiment: ExperimentConfig::default(),
            output: OutputConfig::default(),
            sweep: SweepConfig::default(),
            dataset: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Also write per-neighbor aggregation weights.
    pub weights: bool,
    /// Worker threads; unset means one per core.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub defenses: Vec<Defense>,
    /// Attack labels such as `none`, `noise` or `ipm-100`.
    pub attacks: Vec<String>,
    pub modes: Vec<Mode>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            defenses: Defense::ALL.to_vec(),
            attacks: TABLE_ATTACKS.iter().map(|s| s.to_string()).collect(),
            modes: vec![Mode::Central, Mode::Decentral],
        }
    }
}

/// CSV files in the format read by [`crate::dataset::load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFiles {
    pub train: PathBuf,
    pub test: PathBuf,
    /// Class count; defaults to one more than the largest label seen.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|source| Error::ConfigSyntax {
            path: origin.to_path_buf(),
            source,
        })?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::config(
                "version",
                format!("unsupported schema version {}, expected {CONFIG_VERSION}", cfg.version),
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, path)?;
        // Relative dataset paths are relative to the config file.
        if let (Some(files), Some(base)) = (cfg.dataset.as_mut(), path.parent()) {
            for p in [&mut files.train, &mut files.test] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration is always representable in TOML")
    }

    /// Output directory: explicit setting, then `$WFAGG_OUT_DIR`, then
    /// [`DEFAULT_OUT_DIR`].
    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

/// Replaces the attack kind of `base` according to a sweep label, keeping
/// its other parameters. `ipm-<eps>` also sets the IPM epsilon.
pub fn attack_from_label(base: &AttackConfig, label: &str) -> Result<AttackConfig> {
    let parsed = AttackConfig::from_label(label)?;
    let mut out = *base;
    out.kind = parsed.kind;
    if parsed.kind == AttackKind::Ipm && label.contains('-') {
        out.ipm_epsilon = parsed.ipm_epsilon;
    }
    out.validate()?;
    Ok(out)
}

/// Values given on the command line; each has a config-file equivalent
/// and wins over it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub defense: Option<Defense>,
    /// Attack label, e.g. `ipm` or `ipm-100`.
    pub attack: Option<String>,
    pub rounds: Option<u32>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub nodes: Option<usize>,
    pub degree: Option<usize>,
    pub malicious_ids: Option<Vec<NodeId>>,
    pub workers: Option<usize>,
    pub weights: bool,
    pub ipm_epsilon: Option<f64>,
    pub noise_mean: Option<f64>,
    pub noise_std: Option<f64>,
    pub alie_zmax: Option<f64>,
    pub visibility: Option<Visibility>,
    pub trim_rate: Option<f64>,
    pub krum_assumed_malicious: Option<usize>,
    pub multikrum_m: Option<usize>,
    pub wfagg_assumed_malicious: Option<usize>,
    pub tau: Option<[f64; 3]>,
    pub alpha: Option<f64>,
    pub window: Option<usize>,
    pub transient: Option<u32>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut FileConfig) -> Result<()> {
        let exp = &mut cfg.experiment;
        if let Some(d) = self.defense {
            exp.defense = d;
        }
        if let Some(label) = &self.attack {
            exp.attack = attack_from_label(&exp.attack, label)?;
        }
        set(&mut exp.rounds, self.rounds);
        set(&mut exp.seed, self.seed);
        set(&mut exp.mode, self.mode);
        set(&mut exp.nodes, self.nodes);
        set(&mut exp.degree, self.degree);
        if let Some(ids) = &self.malicious_ids {
            exp.malicious = ids.clone();
        }
        set(&mut exp.attack.ipm_epsilon, self.ipm_epsilon);
        set(&mut exp.attack.noise_mean, self.noise_mean);
        set(&mut exp.attack.noise_std, self.noise_std);
        set(&mut exp.attack.alie_zmax, self.alie_zmax);
        set(&mut exp.attack.visibility, self.visibility);
        set(&mut exp.agg.trim_rate, self.trim_rate);
        set(&mut exp.agg.assumed_malicious, self.krum_assumed_malicious);
        if self.multikrum_m.is_some() {
            exp.agg.multikrum_m = self.multikrum_m;
        }
        set(&mut exp.wfagg.assumed_malicious, self.wfagg_assumed_malicious);
        set(&mut exp.wfagg.tau, self.tau);
        set(&mut exp.wfagg.alpha, self.alpha);
        set(&mut exp.wfagg.window, self.window);
        set(&mut exp.wfagg.transient, self.transient);
        if let Some(out) = &self.out {
            cfg.output.dir = Some(out.clone());
        }
        if self.workers.is_some() {
            cfg.output.workers = self.workers;
        }
        cfg.output.weights |= self.weights;
        Ok(())
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_uses_defaults() {
        let cfg = FileConfig::parse("version = 1\n", Path::new("x.toml")).unwrap();
        assert_eq!(cfg, FileConfig::default());
    }

    #[test]
    fn wrong_version_names_field() {
        let err = FileConfig::parse("version = 2\n", Path::new("x.toml")).unwrap_err();
        assert!(err.to_string().contains("`version`"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = FileConfig::parse("version = 1\n[experiment]\nnodez = 3\n", Path::new("x.toml")).unwrap_err();
        let text = format!("{:#}", anyhow::Error::from(err));
        assert!(text.contains("x.toml") && text.contains("nodez"), "{text}");
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = FileConfig::default();
        cfg.experiment.attack = attack_from_label(&cfg.experiment.attack, "ipm-100").unwrap();
        cfg.output.weights = true;
        let again = FileConfig::parse(&cfg.to_toml(), Path::new("x.toml")).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn overrides_win() {
        let mut cfg = FileConfig::parse(
            "version = 1\n[experiment]\nseed = 3\nrounds = 4\n[experiment.attack]\nkind = \"noise\"\nnoise_std = 0.3\n",
            Path::new("x.toml"),
        )
        .unwrap();
        let ov = Overrides {
            seed: Some(9),
            attack: Some("ipm".into()),
            ipm_epsilon: Some(100.0),
            ..Overrides::default()
        };
        ov.apply(&mut cfg).unwrap();
        assert_eq!(cfg.experiment.seed, 9);
        assert_eq!(cfg.experiment.rounds, 4);
        assert_eq!(cfg.experiment.attack.kind, AttackKind::Ipm);
        assert_eq!(cfg.experiment.attack.ipm_epsilon, 100.0);
        assert_eq!(cfg.experiment.attack.noise_std, 0.3);
    }

    #[test]
    fn attack_label_keeps_other_parameters() {
        let base = AttackConfig {
            noise_mean: 0.7,
            ..AttackConfig::default()
        };
        let a = attack_from_label(&base, "ipm-100").unwrap();
        assert_eq!((a.kind, a.ipm_epsilon, a.noise_mean), (AttackKind::Ipm, 100.0, 0.7));
        let b = attack_from_label(&a, "ipm").unwrap();
        assert_eq!(b.ipm_epsilon, 100.0);
        assert!(attack_from_label(&base, "bogus").is_err());
    }
}
