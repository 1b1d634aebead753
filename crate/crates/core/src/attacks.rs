//! Poisoning attacks applied by Byzantine nodes every round.
//!
//! Noise and Sign-Flipping transform the node's own trained model,
//! Label-Flipping poisons its training data, and ALIE and IPM synthesize a
//! vector from the benign updates the attacker can see.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::paramvec::{check_models, ParamVec};
use crate::rng::normal;
use crate::{math, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum AttackKind {
    None,
    Noise,
    SignFlip,
    LabelFlip,
    Alie,
    Ipm,
}

impl AttackKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Noise => "noise",
            Self::SignFlip => "sign-flip",
            Self::LabelFlip => "label-flip",
            Self::Alie => "alie",
            Self::Ipm => "ipm",
        }
    }

    /// Whether the attack rewrites the vector a Byzantine node sends.
    pub fn poisons_model(self) -> bool {
        matches!(self, Self::Noise | Self::SignFlip | Self::Alie | Self::Ipm)
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "none" => Self::None,
            "noise" => Self::Noise,
            "sign-flip" | "signflip" | "sf" => Self::SignFlip,
            "label-flip" | "labelflip" | "lf" => Self::LabelFlip,
            "alie" => Self::Alie,
            "ipm" => Self::Ipm,
            other => {
                return Err(Error::InvalidConfig {
                    field: "attack",
                    reason: format!("unknown attack {other:?}"),
                })
            }
        };
        Ok(kind)
    }
}

/// Which benign updates ALIE and IPM attackers observe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Visibility {
    /// Every benign update produced this round, network-wide.
    #[default]
    Omniscient,
    /// Only the attacker's own benign neighbors.
    NeighborsOnly,
}

impl FromStr for Visibility {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "omniscient" => Ok(Self::Omniscient),
            "neighbors-only" => Ok(Self::NeighborsOnly),
            other => Err(Error::InvalidConfig {
                field: "attack.visibility",
                reason: format!("unknown visibility {other:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub noise_mean: f64,
    pub noise_std: f64,
    pub alie_zmax: f64,
    pub ipm_epsilon: f64,
    pub visibility: Visibility,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            kind: AttackKind::None,
            noise_mean: 0.1,
            noise_std: 0.1,
            alie_zmax: 0.5,
            ipm_epsilon: 0.5,
            visibility: Visibility::Omniscient,
        }
    }
}

impl AttackConfig {
    pub fn of(kind: AttackKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    /// Parses the sweep labels `none`, `noise`, `sign-flip`, `label-flip`,
    /// `alie`, `ipm` and `ipm-<epsilon>` (e.g. `ipm-100`).
    pub fn from_label(label: &str) -> Result<Self> {
        let lower = label.to_ascii_lowercase();
        if let Some(eps) = lower.strip_prefix("ipm-") {
            let eps: f64 = eps.parse().map_err(|_| Error::InvalidConfig {
                field: "attack",
                reason: format!("bad IPM epsilon in {label:?}"),
            })?;
            let cfg = Self {
                ipm_epsilon: eps,
                ..Self::of(AttackKind::Ipm)
            };
            cfg.validate()?;
            return Ok(cfg);
        }
        Ok(Self::of(lower.parse()?))
    }

    /// Short label used in sweep tables, e.g. `ipm-100`.
    pub fn label(&self) -> String {
        match self.kind {
            AttackKind::Ipm => format!("ipm-{}", self.ipm_epsilon),
            k => String::from(k.name()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == AttackKind::Noise && !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "noise_std",
                reason: format!("must be positive, got {}", self.noise_std),
            });
        }
        if self.kind == AttackKind::Noise && !self.noise_mean.is_finite() {
            return Err(Error::InvalidConfig {
                field: "noise_mean",
                reason: format!("must be finite, got {}", self.noise_mean),
            });
        }
        if self.kind == AttackKind::Ipm && !(self.ipm_epsilon > 0.0 && self.ipm_epsilon.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "ipm_epsilon",
                reason: format!("must be positive, got {}", self.ipm_epsilon),
            });
        }
        if self.kind == AttackKind::Alie && !(self.alie_zmax >= 0.0 && self.alie_zmax.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "alie_zmax",
                reason: format!("must be non-negative, got {}", self.alie_zmax),
            });
        }
        Ok(())
    }
}

/// What an ALIE or IPM attacker knows in a round.
#[derive(Debug, Clone, Copy)]
pub struct AttackContext<'a> {
    pub benign_updates: &'a [ParamVec],
    /// Total number of participants `N`.
    pub total: usize,
    /// Number of malicious participants `M`.
    pub malicious: usize,
}

/// Adds an independent `N(mean, std²)` sample to every coordinate.
pub fn attack_noise<R: Rng + ?Sized>(theta: &ParamVec, mean: f64, std: f64, rng: &mut R) -> ParamVec {
    let out: Vec<f64> = theta.iter().map(|x| x + normal(rng, mean, std)).collect();
    ParamVec::from_raw(out)
}

pub fn attack_signflip(theta: &ParamVec) -> ParamVec {
    theta.negated()
}

/// Maps label `l` to `C - 1 - l`.
pub fn attack_labelflip(label: usize, num_classes: usize) -> Result<usize> {
    if label >= num_classes {
        return Err(Error::Precondition(format!(
            "label {label} out of range for {num_classes} classes"
        )));
    }
    Ok(num_classes - 1 - label)
}

/// Per-coordinate `μ_j - z_max σ_j` over the benign updates (population std).
pub fn attack_alie(ctx: &AttackContext<'_>, zmax: f64) -> Result<ParamVec> {
    let benign = ctx.benign_updates;
    if benign.len() < 2 {
        return Err(Error::Precondition(format!(
            "ALIE needs at least 2 benign updates, got {}",
            benign.len()
        )));
    }
    let d = check_models(benign)?;
    let k = benign.len() as f64;
    let out = (0..d)
        .map(|j| {
            let mu = benign.iter().map(|m| m[j]).sum::<f64>() / k;
            let var = benign.iter().map(|m| (m[j] - mu) * (m[j] - mu)).sum::<f64>() / k;
            mu - zmax * math::sqrt(var)
        })
        .collect();
    Ok(ParamVec::from_raw(out))
}

/// `-(ε / (N - M)) Σ benign`; every malicious node sends this same vector.
pub fn attack_ipm(ctx: &AttackContext<'_>, epsilon: f64) -> Result<ParamVec> {
    if ctx.total <= ctx.malicious {
        return Err(Error::Precondition(format!(
            "IPM needs N > M, got N = {}, M = {}",
            ctx.total, ctx.malicious
        )));
    }
    if ctx.benign_updates.is_empty() {
        return Err(Error::Empty("benign updates"));
    }
    let d = check_models(ctx.benign_updates)?;
    let mut sum = ParamVec::zeros(d);
    for m in ctx.benign_updates {
        sum.axpy(1.0, m)?;
    }
    Ok(sum.scaled(-epsilon / (ctx.total - ctx.malicious) as f64))
}

/// Coefficient `c` with `mean(M copies of IPM ∪ benign) = c · Σ benign`.
pub fn ipm_mean_coefficient(total: usize, malicious: usize, epsilon: f64) -> f64 {
    let n = total as f64;
    let m = malicious as f64;
    (n - m * (1.0 + epsilon)) / (n * (n - m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paramvec::cosine_dist;
    use crate::rng::{stream, Purpose};
    use alloc::vec;
    use proptest::prelude::*;

    fn pv(x: &[f64]) -> ParamVec {
        ParamVec::from_slice(x).unwrap()
    }

    #[test]
    fn noise_degenerate_and_golden() {
        let theta = pv(&[1.0, -2.0, 0.5]);
        let mut rng = stream(42, 5, 1, Purpose::Attack);
        assert_eq!(attack_noise(&theta, 0.0, 0.0, &mut rng), theta);

        let mut a = stream(42, 5, 1, Purpose::Attack);
        let mut b = stream(42, 5, 1, Purpose::Attack);
        let x = attack_noise(&theta, 0.1, 0.1, &mut a);
        let y = attack_noise(&theta, 0.1, 0.1, &mut b);
        assert_eq!(
            x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            y.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let golden = [1.2449406859750076, -1.800144844230472, 0.48130227036609957];
        for (got, want) in x.iter().zip(golden) {
            assert_eq!(got.to_bits(), f64::to_bits(want), "{x:?}");
        }
    }

    #[test]
    fn noise_sample_mean() {
        let d = 100_000;
        let theta = ParamVec::zeros(d);
        let mut rng = stream(3, 0, 0, Purpose::Attack);
        let out = attack_noise(&theta, 0.1, 0.1, &mut rng);
        let mean = out.iter().sum::<f64>() / d as f64;
        assert!((mean - 0.1).abs() <= 3.0 * 0.1 / (d as f64).sqrt());
    }

    #[test]
    fn signflip_cases() {
        assert_eq!(attack_signflip(&pv(&[1.0, -2.0])), pv(&[-1.0, 2.0]));
        assert_eq!(attack_signflip(&ParamVec::zeros(2)), ParamVec::zeros(2));
        let v = pv(&[0.3, 7.0, -1.5]);
        assert_eq!(attack_signflip(&attack_signflip(&v)), v);
    }

    #[test]
    fn labelflip_cases() {
        assert_eq!(attack_labelflip(3, 10).unwrap(), 6);
        assert_eq!(attack_labelflip(9, 10).unwrap(), 0);
        assert!(attack_labelflip(10, 10).is_err());
        for l in 0..10 {
            assert_eq!(attack_labelflip(attack_labelflip(l, 10).unwrap(), 10).unwrap(), l);
        }
    }

    #[test]
    fn alie_cases() {
        let same = [pv(&[1.0, 2.0]), pv(&[1.0, 2.0]), pv(&[1.0, 2.0])];
        let ctx = AttackContext { benign_updates: &same, total: 5, malicious: 2 };
        assert_eq!(attack_alie(&ctx, 0.5).unwrap(), pv(&[1.0, 2.0]));

        let two = [pv(&[0.0]), pv(&[2.0])];
        let ctx = AttackContext { benign_updates: &two, total: 3, malicious: 1 };
        assert_eq!(attack_alie(&ctx, 0.5).unwrap(), pv(&[0.5]));

        let one = [pv(&[0.0])];
        let ctx = AttackContext { benign_updates: &one, total: 2, malicious: 1 };
        assert!(attack_alie(&ctx, 0.5).is_err());
    }

    #[test]
    fn ipm_cases() {
        let benign = vec![pv(&[1.0, 0.0]); 3];
        let ctx = AttackContext { benign_updates: &benign, total: 4, malicious: 1 };
        let out = attack_ipm(&ctx, 0.5).unwrap();
        assert!((out[0] + 0.5).abs() < 1e-15 && out[1] == 0.0);

        let mut all = benign.clone();
        all.push(out);
        let mean = crate::paramvec::mean(&all).unwrap();
        assert!((mean[0] - 0.625).abs() < 1e-15);
        assert!((ipm_mean_coefficient(4, 1, 0.5) * 3.0 - 0.625).abs() < 1e-15);

        let ctx = AttackContext { benign_updates: &benign, total: 1, malicious: 1 };
        assert!(attack_ipm(&ctx, 0.5).is_err());
    }

    #[test]
    fn ipm_large_epsilon_flips_mean() {
        // N = 20, M = 2: sign flips once ε > N/M - 1 = 9
        assert!(ipm_mean_coefficient(20, 2, 0.5) > 0.0);
        assert!(ipm_mean_coefficient(20, 2, 100.0) < 0.0);
    }

    #[test]
    fn attack_labels_round_trip() {
        for label in ["none", "noise", "sign-flip", "label-flip", "alie", "ipm-0.5", "ipm-100"] {
            assert_eq!(AttackConfig::from_label(label).unwrap().label(), label);
        }
        assert!(AttackConfig::from_label("ipm-0").is_err());
        assert!(AttackConfig::from_label("backdoor").is_err());
    }

    fn benign_set() -> impl Strategy<Value = Vec<ParamVec>> {
        (1usize..5).prop_flat_map(|d| {
            prop::collection::vec(
                prop::collection::vec(-10.0f64..10.0, d).prop_map(|v| ParamVec::new(v).unwrap()),
                2..8,
            )
        })
    }

    proptest! {
        #[test]
        fn signflip_preserves_norm(v in prop::collection::vec(-1e6f64..1e6, 0..12)) {
            let v = ParamVec::new(v).unwrap();
            prop_assert_eq!(attack_signflip(&v).norm_sq(), v.norm_sq());
        }

        #[test]
        fn ipm_antiparallel_and_identity(benign in benign_set(), extra_mal in 1usize..6, eps in 0.01f64..200.0) {
            let malicious = extra_mal;
            let total = benign.len() + malicious;
            let ctx = AttackContext { benign_updates: &benign, total, malicious };
            let out = attack_ipm(&ctx, eps).unwrap();
            let mut sum = ParamVec::zeros(benign[0].dim());
            for m in &benign {
                sum.axpy(1.0, m).unwrap();
            }
            if sum.norm() > 1e-9 {
                prop_assert!((cosine_dist(&out, &sum).unwrap() - 2.0).abs() < 1e-12);
            }
            let mut all = benign.clone();
            all.extend(core::iter::repeat(out).take(malicious));
            let mean = crate::paramvec::mean(&all).unwrap();
            let expected = sum.scaled(ipm_mean_coefficient(total, malicious, eps));
            let err = mean.sub(&expected).unwrap().norm();
            let magnitude: f64 = benign.iter().map(ParamVec::norm).sum();
            let scale = (1.0 + eps) * magnitude / total as f64;
            prop_assert!(err <= 1e-10 * scale.max(1e-300));
        }

        #[test]
        fn alie_within_band(benign in benign_set(), zmax in 0.0f64..3.0) {
            let ctx = AttackContext { benign_updates: &benign, total: benign.len() + 1, malicious: 1 };
            let out = attack_alie(&ctx, zmax).unwrap();
            let k = benign.len() as f64;
            for j in 0..out.dim() {
                let mu = benign.iter().map(|m| m[j]).sum::<f64>() / k;
                let sd = (benign.iter().map(|m| (m[j] - mu).powi(2)).sum::<f64>() / k).sqrt();
                prop_assert!(out[j] >= mu - zmax * sd - 1e-9 && out[j] <= mu + zmax * sd + 1e-9);
            }
        }

        #[test]
        fn labelflip_involution(c in 1usize..50, l in 0usize..50) {
            prop_assume!(l < c);
            let once = attack_labelflip(l, c).unwrap();
            prop_assert!(once < c);
            prop_assert_eq!(attack_labelflip(once, c).unwrap(), l);
        }
    }
}
