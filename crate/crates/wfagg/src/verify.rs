//! Seeded randomized checks behind `wfagg verify`.
//!
//! Each [`Check`] draws its own instances from a named random stream, runs
//! the core kernels and compares them with the brute-force [`oracle`]
//! functions or with a stated property. A check reports the number of cases,
//! the worst error it measured and the first failing case. Checks tagged
//! `simulation` run whole (small) experiments and take seconds rather than
//! milliseconds.
//!
//! Errors of averaged quantities are measured relative to the magnitude of
//! the averaged inputs (`|a - b| / max_j |x_j|` per coordinate), which is
//! the scale floating-point summation error is proportional to.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use anyhow::{bail, ensure};
use rand::seq::SliceRandom;
use rand::Rng;
use wfagg_core::attacks::{self, AttackConfig, AttackContext, AttackKind};
use wfagg_core::defense::Defense;
use wfagg_core::learning::{gen_synthetic, local_train, Architecture, DataSpec, Dataset, Model, TrainerConfig};
use wfagg_core::paramvec::{self, ParamVec};
use wfagg_core::rng::{standard_normal, stream, Purpose, StreamRng};
use wfagg_core::robust_agg;
use wfagg_core::sim::{self, run_experiment, ExperimentConfig, Executor, Sequential, Simulation};
use wfagg_core::topology::{Mode, Topology};
use wfagg_core::wfagg::{self as wf, FilterVerdict, TemporalFilterState, WfaggConfig};

use crate::exec::Parallel;
use crate::oracle::{self, Row};
use crate::presets;

/// How many random instances each check draws, and from which seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Options {
    pub cases: usize,
    pub seed: u64,
}

impl Default for Options {
    fn default() -> Self {
        Self { cases: 100, seed: 1 }
    }
}

/// One named property.
pub struct Check {
    pub name: &'static str,
    pub module: &'static str,
    /// Acceptance criteria this check provides evidence for.
    pub criteria: &'static [u8],
    pub simulation: bool,
    run: fn(&Ctx) -> Tally,
}

impl std::fmt::Debug for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Check")
            .field("name", &self.name)
            .field("module", &self.module)
            .field("criteria", &self.criteria)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub name: &'static str,
    pub module: &'static str,
    pub criteria: &'static [u8],
    pub cases: usize,
    pub failures: usize,
    pub tolerance: f64,
    pub worst: f64,
    pub first_failure: Option<String>,
    pub elapsed: Duration,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }

    /// One line: status, module/name, case count, worst error, time.
    pub fn line(&self) -> String {
        let mut s = format!(
            "{} {:<10} {:<34} cases={:<5} worst={:.2e} tol={:.0e} {:>8.3}s",
            if self.passed() { "PASS" } else { "FAIL" },
            self.module,
            self.name,
            self.cases,
            self.worst,
            self.tolerance,
            self.elapsed.as_secs_f64()
        );
        if let Some(f) = &self.first_failure {
            let _ = write!(s, "\n     first failure: {f}");
        }
        s
    }
}

struct Ctx {
    cases: usize,
    seed: u64,
    stream_id: u64,
}

impl Ctx {
    fn rng(&self, case: usize) -> StreamRng {
        stream(self.seed, self.stream_id, case as u64, Purpose::Fuzz)
    }
}

#[derive(Debug, Default)]
struct Tally {
    cases: usize,
    failures: usize,
    tolerance: f64,
    worst: f64,
    first: Option<String>,
}

impl Tally {
    fn new(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }

    fn record(&mut self, label: impl FnOnce() -> String, outcome: anyhow::Result<f64>) {
        self.cases += 1;
        match outcome {
            Ok(err) if err <= self.tolerance => self.worst = self.worst.max(err),
            Ok(err) => {
                self.worst = self.worst.max(err);
                self.fail(format!("{}: error {err:.3e}", label()));
            }
            Err(e) => {
                self.worst = f64::INFINITY;
                self.fail(format!("{}: {e:#}", label()));
            }
        }
    }

    fn fail(&mut self, msg: String) {
        self.failures += 1;
        self.first.get_or_insert(msg);
    }
}

/// Runs `body` on `ctx.cases` seeded instances.
fn fuzz(ctx: &Ctx, tolerance: f64, mut body: impl FnMut(&mut StreamRng) -> anyhow::Result<f64>) -> Tally {
    let mut t = Tally::new(tolerance);
    for case in 0..ctx.cases {
        let mut rng = ctx.rng(case);
        t.record(|| format!("case {case}"), body(&mut rng));
    }
    t
}

fn stream_id(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

fn pass() -> anyhow::Result<f64> {
    Ok(0.0)
}

// ---------------------------------------------------------------- inputs

fn gaussian(rng: &mut StreamRng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * standard_normal(rng)).collect()
}

fn log_uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo..hi))
}

/// `k` random models of dimension `d`: either i.i.d. Gaussian, or a tight
/// honest cluster plus a random third of scattered outliers. Values are
/// continuous, so ties have probability zero.
fn models(rng: &mut StreamRng, k: usize, d: usize) -> Vec<ParamVec> {
    let scale = log_uniform(rng, -2.0, 2.0);
    let structured = rng.random_bool(0.5);
    let centre = gaussian(rng, d, 1.0);
    let mut outlier = vec![false; k];
    for slot in outlier.iter_mut().take(k / 3) {
        *slot = true;
    }
    outlier.shuffle(rng);
    (0..k)
        .map(|i| {
            let v: Vec<f64> = if structured && !outlier[i] {
                centre.iter().map(|c| scale * (c + 0.3 * standard_normal(rng))).collect()
            } else if structured {
                gaussian(rng, d, 3.0 * scale)
            } else {
                gaussian(rng, d, scale)
            };
            ParamVec::new(v).expect("finite")
        })
        .collect()
}

fn rows(models: &[ParamVec]) -> Vec<Row> {
    models.iter().map(|m| m.to_vec()).collect()
}

/// Per-coordinate `|a - b|`, divided by the largest input magnitude in that
/// coordinate.
fn err_vs_inputs(a: &[f64], b: &[f64], inputs: &[ParamVec]) -> f64 {
    assert_eq!(a.len(), b.len());
    (0..a.len())
        .map(|k| {
            let scale = inputs.iter().map(|m| m[k].abs()).fold(0.0, f64::max);
            let diff = (a[k] - b[k]).abs();
            if diff == 0.0 {
                0.0
            } else {
                diff / scale
            }
        })
        .fold(0.0, f64::max)
}

fn exact(a: &[f64], b: &[f64]) -> f64 {
    oracle::max_rel_err(a, b, f64::MIN_POSITIVE)
}

fn permuted(models: &[ParamVec], perm: &[usize]) -> Vec<ParamVec> {
    perm.iter().map(|&i| models[i].clone()).collect()
}

fn random_arch(rng: &mut StreamRng) -> Architecture {
    if rng.random_bool(0.3) {
        Architecture::Softmax
    } else {
        Architecture::Mlp {
            hidden: rng.random_range(1..=5),
            layers: rng.random_range(1..=3),
        }
    }
}

fn random_dataset(rng: &mut StreamRng, n: usize, p: usize, c: usize) -> Dataset {
    let x = gaussian(rng, n * p, 1.0);
    let y = (0..n).map(|_| rng.random_range(0..c)).collect();
    Dataset::new(x, y, p, c).expect("valid dataset")
}

// ---------------------------------------------------------------- paramvec

fn cosine_self_antipodal(ctx: &Ctx) -> Tally {
    fuzz(ctx, 1e-14, |rng| {
        let d = rng.random_range(1..=50);
        let s = log_uniform(rng, -3.0, 3.0);
        let a = ParamVec::new(gaussian(rng, d, s))?;
        let same = paramvec::cosine_dist(&a, &a)?;
        let anti = paramvec::cosine_dist(&a, &a.negated())?;
        Ok(same.abs().max((anti - 2.0).abs()))
    })
}

fn cosine_scale_invariance(ctx: &Ctx) -> Tally {
    fuzz(ctx, 1e-12, |rng| {
        let d = rng.random_range(1..=50);
        let a = ParamVec::new(gaussian(rng, d, 1.0))?;
        let b = ParamVec::new(gaussian(rng, d, 1.0))?;
        let c = log_uniform(rng, -3.0, 3.0);
        Ok((paramvec::cosine_dist(&a.scaled(c), &b)? - paramvec::cosine_dist(&a, &b)?).abs())
    })
}

fn median_vs_oracle(ctx: &Ctx) -> Tally {
    fuzz(ctx, 1e-10, |rng| {
        let (k, d) = (rng.random_range(1..=9), rng.random_range(1..=6));
        let ms = models(rng, k, d);
        let expected = oracle::median(&rows(&ms));
        let a = paramvec::coordwise_median(&ms)?;
        let b = robust_agg::agg_median(&ms)?;
        Ok(exact(&a, &expected).max(exact(&b, &expected)))
    })
}

fn norm_clip_idempotent(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let d = rng.random_range(1..=50);
        let s = log_uniform(rng, -3.0, 3.0);
        let v = ParamVec::new(gaussian(rng, d, s))?;
        let cap = v.norm() * log_uniform(rng, -2.0, 1.0);
        let once = paramvec::norm_clip(&v, cap)?;
        let twice = paramvec::norm_clip(&once, cap)?;
        Ok(exact(&once, &twice))
    })
}

fn weighted_sum_uniform(ctx: &Ctx) -> Tally {
    fuzz(ctx, 1e-12, |rng| {
        let (k, d) = (rng.random_range(1..=12), rng.random_range(1..=20));
        let ms = models(rng, k, d);
        let w = log_uniform(rng, -3.0, 3.0);
        let ws = paramvec::weighted_sum(&ms, &vec![w; k])?;
        Ok(err_vs_inputs(&ws, &oracle::mean(&rows(&ms)), &ms))
    })
}

// ---------------------------------------------------------------- robust_agg

fn trimmed_mean_vs_oracle(ctx: &Ctx) -> Tally {
    fuzz(ctx, 1e-10, |rng| {
        let d = rng.random_range(1..=6);
        let beta = rng.random_range(0.01..0.49);
        let mut worst: f64 = 0.0;
        for k in 1..=9 {
            let ms = models(rng, k, d);
            let got = robust_agg::agg_trimmed_mean(&ms, beta)?;
            worst = worst.max(err_vs_inputs(&got, &oracle::trimmed_mean(&rows(&ms), beta), &ms));
        }
        Ok(worst)
    })
}

fn krum_pair(rng: &mut StreamRng) -> (usize, usize) {
    let k = rng.random_range(3..=9);
    (k, rng.random_range(0..=k - 3))
}

fn krum_scores_vs_oracle(ctx: &Ctx) -> Tally {
    fuzz(ctx, 1e-10, |rng| {
        let (k, f) = krum_pair(rng);
        let d = rng.random_range(1..=6);
        let ms = models(rng, k, d);
        Ok(exact(&robust_agg::krum_scores(&ms, f)?, &oracle::krum_scores(&rows(&ms), f)))
    })
}

fn multikrum_vs_oracle(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let (k, f) = krum_pair(rng);
        let m = rng.random_range(1..=k);
        let d = rng.random_range(1..=6);
        let ms = models(rng, k, d);
        let got = robust_agg::multikrum_select(&ms, f, m)?;
        let want = oracle::multikrum_select(&rows(&ms), f, m);
        ensure!(got == want, "selected {got:?}, oracle {want:?}");
        ensure!(
            robust_agg::krum_select(&ms, f)? == oracle::multikrum_select(&rows(&ms), f, 1)[0],
            "Krum winner differs"
        );
        pass()
    })
}

fn clustering_vs_oracle(ctx: &Ctx) -> Tally {
    fuzz(ctx, 1e-12, |rng| {
        let k = rng.random_range(2..=9);
        let d = rng.random_range(1..=6);
        let ms = models(rng, k, d);
        let split = robust_agg::cluster_split(&ms)?;
        let (selected, rejected) = oracle::cluster_partition(&rows(&ms));
        ensure!(
            split.selected == selected && split.rejected == rejected,
            "partition {:?}/{:?}, oracle {selected:?}/{rejected:?}",
            split.selected,
            split.rejected
        );
        let chosen: Vec<ParamVec> = selected.iter().map(|&i| ms[i].clone()).collect();
        let out = robust_agg::agg_clustering(&ms)?;
        Ok(err_vs_inputs(&out, &oracle::mean(&rows(&chosen)), &ms))
    })
}

fn r_squared_vs_oracle(ctx: &Ctx) -> Tally {
    fuzz(ctx, 1e-12, |rng| {
        let k = rng.random_range(1..=9);
        let d = rng.random_range(1..=6);
        let ms = models(rng, k, d);
        let got = sim::r_squared(&ms)?;
        match (got, oracle::r_squared(&rows(&ms))) {
            (Some(a), Some(b)) => Ok((a - b).abs()),
            (a, b) => bail!("engine {a:?}, oracle {b:?}"),
        }
    })
}

/// Whether the `keep` smallest `scores` are separated from the rest by a
/// clear margin, so no rounding-level change can alter the selection.
fn clear_cut(scores: &[f64], keep: usize) -> bool {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    keep == 0 || keep >= s.len() || s[keep] - s[keep - 1] > 1e-9 * s[keep].abs().max(1e-300)
}

fn permutation_invariance(ctx: &Ctx) -> Tally {
    fuzz(ctx, 1e-12, |rng| {
        let (k, f, m, ms) = loop {
            let k = rng.random_range(4..=9);
            let f = rng.random_range(0..=k - 4);
            let m = rng.random_range(1..=k);
            let d = rng.random_range(2..=6);
            let ms = models(rng, k, d);
            let scores = robust_agg::krum_scores(&ms, f)?;
            if clear_cut(&scores, 1) && clear_cut(&scores, m) {
                break (k, f, m, ms);
            }
        };
        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(rng);
        let shuffled = permuted(&ms, &perm);
        let beta = rng.random_range(0.01..0.49);
        type Rule<'a> = Box<dyn Fn(&[ParamVec]) -> wfagg_core::Result<ParamVec> + 'a>;
        let rules: Vec<(&str, Rule)> = vec![
            ("mean", Box::new(robust_agg::agg_mean)),
            ("median", Box::new(robust_agg::agg_median)),
            ("trimmed-mean", Box::new(move |x| robust_agg::agg_trimmed_mean(x, beta))),
            ("krum", Box::new(move |x| robust_agg::agg_krum(x, f))),
            ("multi-krum", Box::new(move |x| robust_agg::agg_multikrum(x, f, m))),
            ("clustering", Box::new(robust_agg::agg_clustering)),
        ];
        let mut worst: f64 = 0.0;
        for (name, rule) in &rules {
            let e = err_vs_inputs(&rule(&ms)?, &rule(&shuffled)?, &ms);
            ensure!(e <= 1e-12, "{name} changed by {e:.3e} under permutation {perm:?} {:?}", rows(&ms));
            worst = worst.max(e);
        }
        Ok(worst)
    })
}

fn aggregates_within_range(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let k = rng.random_range(1..=9);
        let d = rng.random_range(1..=6);
        let ms = models(rng, k, d);
        let beta = rng.random_range(0.01..0.49);
        let med = robust_agg::agg_median(&ms)?;
        let tm = robust_agg::agg_trimmed_mean(&ms, beta)?;
        for j in 0..d {
            let lo = ms.iter().map(|m| m[j]).fold(f64::INFINITY, f64::min);
            let hi = ms.iter().map(|m| m[j]).fold(f64::NEG_INFINITY, f64::max);
            ensure!(lo <= med[j] && med[j] <= hi, "median[{j}] = {} outside [{lo}, {hi}]", med[j]);
            ensure!(lo <= tm[j] && tm[j] <= hi, "trimmed[{j}] = {} outside [{lo}, {hi}]", tm[j]);
        }
        pass()
    })
}

// ---------------------------------------------------------------- wfagg

fn filter_sizes(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let k = rng.random_range(2..=12);
        let f = rng.random_range(0..=k - 2);
        let d = rng.random_range(1..=6);
        let ms = models(rng, k, d);
        let t1 = wf::wfagg_d(&ms, f)?;
        let t2 = wf::wfagg_c(&ms, f)?;
        ensure!(
            t1.len() == k - f - 1 && t2.len() == k - f - 1,
            "K = {k}, f = {f}: |T1| = {}, |T2| = {}",
            t1.len(),
            t2.len()
        );
        pass()
    })
}

fn weight_lattice_patterns(_ctx: &Ctx) -> Tally {
    let cfg = WfaggConfig::default();
    let mut t = Tally::new(1e-12);
    for bits in 0..8u8 {
        let (a, b, c) = (bits & 1 != 0, bits & 2 != 0, bits & 4 != 0);
        let expected = match (a, b, c) {
            (true, true, true) => 1.0,
            (true, true, false) => 0.8,
            (true, false, true) | (false, true, true) => 0.6,
            _ => 0.0,
        };
        let w = FilterVerdict::from_membership(a, b, c, &cfg).weight;
        t.record(|| format!("T1={a} T2={b} T3={c}"), Ok((w - expected).abs()));
    }
    t
}

/// `τ` with every single weight below the smallest pair sum, so the
/// lattice `{0, pair sums, 1}` is the full set of reachable weights.
fn random_tau(rng: &mut StreamRng) -> [f64; 3] {
    loop {
        let raw = [rng.random_range(0.05..1.0), rng.random_range(0.05..1.0), rng.random_range(0.05..1.0)];
        let s: f64 = raw.iter().sum();
        let tau = [raw[0] / s, raw[1] / s, raw[2] / s];
        let min_pair = (tau[0] + tau[1]).min(tau[0] + tau[2]).min(tau[1] + tau[2]);
        if tau.iter().all(|&x| x < min_pair - 1e-9) {
            return tau;
        }
    }
}

fn lattice(tau: [f64; 3]) -> [f64; 5] {
    [0.0, tau[0] + tau[2], tau[1] + tau[2], tau[0] + tau[1], 1.0]
}

fn weight_lattice_fuzzed(ctx: &Ctx) -> Tally {
    fuzz(ctx, 1e-12, |rng| {
        let k = rng.random_range(3..=9);
        let mut cfg = WfaggConfig {
            assumed_malicious: rng.random_range(0..=k - 3),
            window: rng.random_range(1..=4),
            transient: rng.random_range(0..=3),
            alpha: rng.random_range(0.0..=1.0),
            ..WfaggConfig::default()
        };
        if rng.random_bool(0.5) {
            cfg.tau = random_tau(rng);
        }
        let allowed = lattice(cfg.tau);
        let d = rng.random_range(1..=6);
        let ids: Vec<usize> = (0..k).map(|i| 100 + 7 * i).collect();
        let mut current = models(rng, k, d);
        let mut local = ParamVec::new(gaussian(rng, d, 1.0))?;
        let (mut state, mut alt_state) = (TemporalFilterState::new(cfg.window), TemporalFilterState::new(cfg.window));
        let rounds = cfg.transient + cfg.window as u32 + rng.random_range(1..=4);
        let mut worst: f64 = 0.0;
        for round in 1..=rounds {
            for m in current.iter_mut() {
                let jump = if rng.random_bool(0.15) { 5.0 } else { 0.1 };
                let step = ParamVec::new(gaussian(rng, d, jump))?;
                *m = m.add(&step)?;
            }
            let a = wf::wfagg_composite(&local, &ids, &current, &cfg, &mut state, round)?;
            let b = wf::alt_wfagg_composite(&local, &ids, &current, &cfg, &mut alt_state, round)?;
            for v in a.verdicts.iter().chain(&b.verdicts) {
                let gap = allowed.iter().map(|x| (v.weight - x).abs()).fold(f64::INFINITY, f64::min);
                ensure!(gap <= 1e-12, "round {round}: weight {} outside {allowed:?}", v.weight);
                let single = [v.in_t1, v.in_t2, v.in_t3].iter().filter(|&&x| x).count() <= 1;
                ensure!(!single || v.weight == 0.0, "single-filter acceptance kept weight {}", v.weight);
                worst = worst.max(gap);
            }
            local = a.model;
        }
        Ok(worst)
    })
}

fn smoother_convex(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let k = rng.random_range(1..=9);
        let d = rng.random_range(1..=6);
        let ms = models(rng, k, d);
        let local = ParamVec::new(gaussian(rng, d, 1.0))?;
        let weights: Vec<f64> = (0..k)
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) })
            .collect();
        let alpha = rng.random_range(0.0..=1.0);
        let out = wf::wfagg_e(&local, &ms, &weights, alpha)?;
        let mut worst: f64 = 0.0;
        for j in 0..d {
            let pool = std::iter::once(local[j]).chain(ms.iter().zip(&weights).filter(|(_, w)| **w > 0.0).map(|(m, _)| m[j]));
            let (lo, hi) = pool.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
            let scale = lo.abs().max(hi.abs());
            let excess = (lo - out[j]).max(out[j] - hi).max(0.0);
            // One rounding per accumulated term.
            let slack = 4.0 * (k + 1) as f64 * f64::EPSILON * scale;
            ensure!(excess <= slack, "coordinate {j}: {} outside [{lo}, {hi}]", out[j]);
            worst = worst.max(excess / scale.max(f64::MIN_POSITIVE));
        }
        Ok(worst)
    })
}

fn distance_filter_translation(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let (k, f, d, ms) = loop {
            let k = rng.random_range(3..=9);
            let f = rng.random_range(0..=k - 2);
            let d = rng.random_range(1..=6);
            let ms = models(rng, k, d);
            if clear_cut(&wf::median_distances(&ms)?, k - f - 1) {
                break (k, f, d, ms);
            }
        };
        let _ = k;
        let scale = ms.iter().map(|m| m.norm()).fold(0.0, f64::max);
        let shift = ParamVec::new(gaussian(rng, d, scale))?;
        let moved: Vec<ParamVec> = ms.iter().map(|m| m.add(&shift)).collect::<wfagg_core::Result<_>>()?;
        let (a, b) = (wf::wfagg_d(&ms, f)?, wf::wfagg_d(&moved, f)?);
        ensure!(a == b, "selected {a:?} before and {b:?} after translation");
        pass()
    })
}

/// Open interval of factors `c > 0` for which `c * models[j]` keeps the
/// same rank relative to the middle order statistics in every coordinate,
/// or `None` when `models[j]` is itself a middle element somewhere.
fn median_preserving_range(models: &[ParamVec], j: usize) -> Option<(f64, f64)> {
    let k = models.len();
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for coord in 0..models[0].dim() {
        let mut col: Vec<(f64, usize)> = models.iter().enumerate().map(|(i, m)| (m[coord], i)).collect();
        col.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (lower, upper) = ((k - 1) / 2, k / 2);
        let rank = col.iter().position(|&(_, i)| i == j)?;
        let x = models[j][coord];
        // Keep c·x above (or below) the nearest middle value.
        let (bound, above) = if rank > upper {
            (col[upper].0, true)
        } else if rank < lower {
            (col[lower].0, false)
        } else {
            return None;
        };
        if x == 0.0 {
            continue;
        }
        let r = bound / x;
        // above: c·x > bound; below: c·x < bound.
        match (above, x > 0.0) {
            (true, true) | (false, false) => lo = lo.max(r),
            (true, false) | (false, true) => {
                if r > 0.0 {
                    hi = hi.min(r)
                } else {
                    return None;
                }
            }
        }
    }
    (lo < 1.0 && 1.0 < hi).then_some((lo, hi))
}

/// The reference of the similarity filter is the coordinate-wise median of
/// the raw models, so only rescalings that leave it in place can be
/// invisible. Checks a common rescale of all models and a rescale of one
/// model by a factor that provably keeps the median.
fn similarity_filter_rescaling(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let (f, ms, j, range) = loop {
            let k = rng.random_range(3..=9);
            let f = rng.random_range(0..=k - 2);
            let d = rng.random_range(1..=6);
            let ms = models(rng, k, d);
            if !clear_cut(&wf::median_cosine_distances(&ms)?, k - f - 1) {
                continue;
            }
            let j = rng.random_range(0..k);
            if let Some(range) = median_preserving_range(&ms, j) {
                break (f, ms, j, range);
            }
        };
        let base = wf::wfagg_c(&ms, f)?;

        let c = log_uniform(rng, -2.0, 2.0);
        let all: Vec<ParamVec> = ms.iter().map(|m| m.scaled(c)).collect();
        let got = wf::wfagg_c(&all, f)?;
        ensure!(got == base, "common rescale by {c}: {base:?} -> {got:?}");

        let lo = range.0.max(1e-2).ln();
        let hi = range.1.min(1e2).ln();
        let c = (lo + (hi - lo) * rng.random_range(0.01..0.99)).exp();
        let mut one = ms.clone();
        one[j] = ms[j].scaled(c);
        ensure!(
            paramvec::coordwise_median(&one)? == paramvec::coordwise_median(&ms)?,
            "rescale by {c} moved the median"
        );
        let got = wf::wfagg_c(&one, f)?;
        ensure!(got == base, "model {j} rescaled by {c}: {base:?} -> {got:?}");
        pass()
    })
}

fn equal_models_blend(ctx: &Ctx) -> Tally {
    fuzz(ctx, 1e-12, |rng| {
        let k = rng.random_range(3..=9);
        let d = rng.random_range(1..=6);
        let s = log_uniform(rng, -2.0, 2.0);
        let theta = ParamVec::new(gaussian(rng, d, s))?;
        let local = ParamVec::new(gaussian(rng, d, 1.0))?;
        let cfg = WfaggConfig {
            assumed_malicious: 0,
            alpha: rng.random_range(0.0..=1.0),
            ..WfaggConfig::default()
        };
        let ms = vec![theta.clone(); k];
        let ids: Vec<usize> = (0..k).collect();
        let round = rng.random_range(1..=8);
        let mut want = local.scaled(1.0 - cfg.alpha);
        want.axpy(cfg.alpha, &theta)?;
        let mut worst: f64 = 0.0;
        for alt in [false, true] {
            let mut state = TemporalFilterState::new(cfg.window);
            let out = if alt {
                wf::alt_wfagg_composite(&local, &ids, &ms, &cfg, &mut state, round)?
            } else {
                wf::wfagg_composite(&local, &ids, &ms, &cfg, &mut state, round)?
            };
            worst = worst.max(err_vs_inputs(&out.model, &want, &[local.clone(), theta.clone()]));
        }
        Ok(worst)
    })
}

fn temporal_constant_accepts(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let k = rng.random_range(1..=9);
        let d = rng.random_range(1..=6);
        let window = rng.random_range(1..=5);
        let transient = rng.random_range(0..=4);
        let ms = models(rng, k, d);
        let ids: Vec<usize> = (0..k).collect();
        let mut state = TemporalFilterState::new(window);
        for round in 1..=transient + window as u32 + 4 {
            let accepted = wf::wfagg_t(&mut state, &ids, &ms, round, transient)?;
            if round > transient {
                ensure!(accepted == ids, "round {round}: accepted {accepted:?}");
            } else {
                ensure!(accepted.is_empty(), "transient round {round} accepted {accepted:?}");
            }
        }
        pass()
    })
}

// ---------------------------------------------------------------- attacks

fn signflip_norm(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let d = rng.random_range(1..=50);
        let s = log_uniform(rng, -3.0, 3.0);
        let v = ParamVec::new(gaussian(rng, d, s))?;
        let n = attacks::attack_signflip(&v).norm();
        ensure!(n == v.norm(), "norm {} became {n}", v.norm());
        pass()
    })
}

fn ipm_instance(rng: &mut StreamRng) -> (usize, usize, Vec<ParamVec>) {
    let n = rng.random_range(3..=30);
    let m = rng.random_range(1..n);
    let d = rng.random_range(1..=6);
    (n, m, models(rng, n - m, d))
}

fn ipm_antiparallel(ctx: &Ctx) -> Tally {
    fuzz(ctx, 1e-12, |rng| {
        let (n, m, benign) = ipm_instance(rng);
        let eps = log_uniform(rng, -3.0, 3.0);
        let ctx = AttackContext {
            benign_updates: &benign,
            total: n,
            malicious: m,
        };
        let out = attacks::attack_ipm(&ctx, eps)?;
        let sum = ParamVec::new(oracle::mean(&rows(&benign)))?;
        Ok((paramvec::cosine_dist(&out, &sum)? - 2.0).abs())
    })
}

/// Mean over `M` copies of the IPM vector and the benign updates.
fn ipm_aggregate(benign: &[ParamVec], n: usize, m: usize, eps: f64) -> anyhow::Result<(ParamVec, Vec<ParamVec>)> {
    let ctx = AttackContext {
        benign_updates: benign,
        total: n,
        malicious: m,
    };
    let bad = attacks::attack_ipm(&ctx, eps)?;
    let mut all = benign.to_vec();
    all.extend(std::iter::repeat_n(bad, m));
    Ok((robust_agg::agg_mean(&all)?, all))
}

fn ipm_mean_identity(ctx: &Ctx) -> Tally {
    fuzz(ctx, 1e-10, |rng| {
        let (n, m, benign) = ipm_instance(rng);
        let eps = rng.random_range(0.0..200.0);
        let (got, all) = ipm_aggregate(&benign, n, m, eps)?;
        let want = oracle::ipm_mean(&rows(&benign), m, eps);
        let coeff = attacks::ipm_mean_coefficient(n, m, eps);
        let sum: Vec<f64> = (0..got.dim()).map(|j| benign.iter().map(|b| b[j]).sum()).collect();
        let via_coeff: Vec<f64> = sum.iter().map(|s| coeff * s).collect();
        Ok(err_vs_inputs(&got, &want, &all).max(err_vs_inputs(&via_coeff, &want, &all)))
    })
}

fn ipm_direction(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let (n, m, benign) = loop {
            let inst = ipm_instance(rng);
            let ratio = inst.0 as f64 / inst.1 as f64 - 1.0;
            if ratio > 0.5 && ratio < 100.0 {
                break inst;
            }
        };
        let centre = ParamVec::new(oracle::mean(&rows(&benign)))?;
        for (eps, positive) in [(0.5, true), (100.0, false)] {
            let (agg, _) = ipm_aggregate(&benign, n, m, eps)?;
            let dot = agg.dot(&centre)?;
            ensure!(
                (dot > 0.0) == positive,
                "N = {n}, M = {m}, eps = {eps}: inner product {dot:e}"
            );
        }
        pass()
    })
}

fn alie_band(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let k = rng.random_range(2..=12);
        let d = rng.random_range(1..=6);
        let benign = models(rng, k, d);
        let z = rng.random_range(0.0..5.0);
        let ctx = AttackContext {
            benign_updates: &benign,
            total: k + 1,
            malicious: 1,
        };
        let out = attacks::attack_alie(&ctx, z)?;
        let mu = oracle::mean(&rows(&benign));
        for j in 0..d {
            let var = benign.iter().map(|b| (b[j] - mu[j]).powi(2)).sum::<f64>() / k as f64;
            let half = z * var.sqrt();
            let slack = 1e-12 * (mu[j].abs() + half).max(f64::MIN_POSITIVE);
            ensure!(
                out[j] >= mu[j] - half - slack && out[j] <= mu[j] + half + slack,
                "coordinate {j}: {} outside {} ± {half}",
                out[j],
                mu[j]
            );
        }
        pass()
    })
}

fn labelflip_involution(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let c = rng.random_range(1..=50);
        let mut image = vec![false; c];
        for l in 0..c {
            let f = attacks::attack_labelflip(l, c)?;
            ensure!(attacks::attack_labelflip(f, c)? == l, "C = {c}: {l} -> {f} does not return");
            image[f] = true;
        }
        ensure!(image.iter().all(|&x| x), "C = {c}: not a permutation");
        ensure!(attacks::attack_labelflip(c, c).is_err(), "out-of-range label accepted");
        pass()
    })
}

// ---------------------------------------------------------------- topology

fn ring(rng: &mut StreamRng) -> anyhow::Result<(usize, usize, Topology)> {
    let n = rng.random_range(3..=80);
    let c = 2 * rng.random_range(1..=(n - 1) / 2);
    Ok((n, c, Topology::ring_regular(n, c)?))
}

fn ring_regularity(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let (n, c, topo) = ring(rng)?;
        for i in 0..n {
            let nb = topo.neighbors(i)?;
            ensure!(nb.len() == c, "n = {n}, c = {c}: node {i} has degree {}", nb.len());
            ensure!(!nb.contains(&i), "node {i} links to itself");
            for &j in nb {
                ensure!(topo.neighbors(j)?.contains(&i), "edge {i}-{j} is one-way");
            }
        }
        pass()
    })
}

fn handshake(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let (_, _, topo) = ring(rng)?;
        let star = Topology::star(rng.random_range(1..=80))?;
        for t in [topo, star] {
            let total: usize = (0..t.node_count()).map(|i| t.degree(i)).sum::<wfagg_core::Result<usize>>()?;
            ensure!(total == 2 * t.edge_count(), "degree sum {total}, edges {}", t.edge_count());
        }
        pass()
    })
}

fn table_grouping(_ctx: &Ctx) -> Tally {
    let mut t = Tally::new(0.0);
    let outcome = (|| {
        let topo = Topology::ring_regular(20, 8)?;
        let malicious = [5, 11];
        let mut seen = [0usize; 3];
        for i in (0..20).filter(|i| !malicious.contains(i)) {
            let m = topo.malicious_neighbors(i, &malicious)?;
            ensure!(m <= 2, "node {i} has {m} malicious neighbors");
            seen[m] += 1;
        }
        ensure!(seen.iter().all(|&s| s > 0), "group sizes {seen:?}");
        pass()
    })();
    t.record(|| "n = 20, c = 8, malicious {5, 11}".into(), outcome);
    t
}

// ---------------------------------------------------------------- learning

fn flatten_round_trip(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let arch = random_arch(rng);
        let (p, c) = (rng.random_range(1..=8), rng.random_range(2..=5));
        let s = log_uniform(rng, -3.0, 3.0);
        let v = ParamVec::new(gaussian(rng, arch.param_count(p, c), s))?;
        let model = Model::from_params(arch, p, c, v.clone())?;
        ensure!(model.params() == &v, "params changed");
        ensure!(model.into_params() == v, "into_params changed");
        pass()
    })
}

fn gradient_check(ctx: &Ctx) -> Tally {
    fuzz(ctx, 1e-5, |rng| {
        let arch = random_arch(rng);
        let (p, c) = (rng.random_range(1..=4), rng.random_range(2..=4));
        let n = rng.random_range(1..=6);
        let data = random_dataset(rng, n, p, c);
        let std = rng.random_range(0.3..1.0);
        let model = Model::init(arch, p, c, std, rng);
        let batch: Vec<usize> = (0..rng.random_range(1..=n)).map(|_| rng.random_range(0..n)).collect();
        let (_, grad) = model.loss_and_grad(&data, &batch)?;
        let numeric = oracle::numeric_gradient(&model, &data, &batch, 1e-6);
        Ok(oracle::vec_rel_err(&grad, &numeric))
    })
}

fn small_task(rng: &mut StreamRng) -> anyhow::Result<(Model, Dataset, TrainerConfig)> {
    let spec = DataSpec {
        features: rng.random_range(2..=6),
        classes: rng.random_range(2..=4),
        samples_per_node: rng.random_range(10..=60),
        test_samples: 10,
        ..DataSpec::default()
    };
    let seed = rng.random();
    let data = gen_synthetic(&spec, 1, seed)?;
    let arch = random_arch(rng);
    let model = Model::init(arch, spec.features, spec.classes, 0.1, rng);
    let cfg = TrainerConfig {
        epochs: rng.random_range(1..=3),
        batch_size: rng.random_range(1..=16),
        ..TrainerConfig::default()
    };
    Ok((model, data.shards[0].clone(), cfg))
}

fn training_deterministic(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let (model, data, cfg) = small_task(rng)?;
        let key: u64 = rng.random();
        let a = local_train(&model, &data, &cfg, &mut stream(key, 0, 0, Purpose::Train))?;
        let b = local_train(&model, &data, &cfg, &mut stream(key, 0, 0, Purpose::Train))?;
        ensure!(a == b, "two runs differ");
        pass()
    })
}

fn poisoned_training_differs(ctx: &Ctx) -> Tally {
    fuzz(ctx, 0.0, |rng| {
        let (model, data, cfg) = small_task(rng)?;
        let key: u64 = rng.random();
        let honest = local_train(&model, &data, &cfg, &mut stream(key, 0, 0, Purpose::Train))?;
        let flipped = local_train(&model, &data.label_flipped(), &cfg, &mut stream(key, 0, 0, Purpose::Train))?;
        ensure!(flipped.params() != honest.params(), "label flipping had no effect");
        let signed = attacks::attack_signflip(honest.params());
        ensure!(&signed != honest.params(), "sign flipping had no effect");
        pass()
    })
}

// ---------------------------------------------------------------- sim

/// Small configurations covering both modes, every attack kind and the
/// stateful defenses.
fn sim_grid() -> Vec<ExperimentConfig> {
    let base = presets::smoke();
    let mut out = Vec::new();
    for (mode, defense, kind) in [
        (Mode::Decentral, Defense::Wfagg, AttackKind::Noise),
        (Mode::Decentral, Defense::AltWfagg, AttackKind::Alie),
        (Mode::Decentral, Defense::Krum, AttackKind::Ipm),
        (Mode::Decentral, Defense::Mean, AttackKind::LabelFlip),
        (Mode::Central, Defense::Wfagg, AttackKind::SignFlip),
        (Mode::Central, Defense::TrimmedMean, AttackKind::Ipm),
    ] {
        let mut cfg = base.clone();
        cfg.mode = mode;
        cfg.defense = defense;
        cfg.attack = AttackConfig::of(kind);
        cfg.model = Architecture::mlp(4);
        out.push(cfg);
    }
    out
}

/// Evaluates jobs last-to-first, returning them in index order.
struct Reversed;

impl Executor for Reversed {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        let mut out: Vec<R> = (0..n).rev().map(f).collect();
        out.reverse();
        out
    }
}

fn sim_cases(cfgs: Vec<ExperimentConfig>, tol: f64, mut body: impl FnMut(&ExperimentConfig) -> anyhow::Result<f64>) -> Tally {
    let mut t = Tally::new(tol);
    for cfg in &cfgs {
        let label = || format!("{} {} {}", cfg.mode.name(), cfg.defense.name(), cfg.attack.label());
        t.record(label, body(cfg));
    }
    t
}

fn sim_deterministic(_ctx: &Ctx) -> Tally {
    sim_cases(sim_grid(), 0.0, |cfg| {
        let a = run_experiment(cfg, &Sequential)?;
        let b = run_experiment(cfg, &Sequential)?;
        let c = run_experiment(cfg, &Parallel::new(Some(3))?)?;
        ensure!(a == b, "two sequential runs differ");
        ensure!(a == c, "three-worker run differs from sequential");
        pass()
    })
}

fn sim_round_order(_ctx: &Ctx) -> Tally {
    sim_cases(sim_grid(), 0.0, |cfg| {
        ensure!(
            run_experiment(cfg, &Sequential)? == run_experiment(cfg, &Reversed)?,
            "reversed node order changed the result"
        );
        pass()
    })
}

fn sim_r_squared(_ctx: &Ctx) -> Tally {
    sim_cases(sim_grid(), 1e-12, |cfg| {
        let mut s = Simulation::new(cfg.clone())?;
        let mut worst: f64 = 0.0;
        for _ in 0..cfg.rounds {
            let rec = s.step(&Sequential)?;
            let want = oracle::r_squared(&rows(&s.benign_models()));
            match (rec.r_squared, want) {
                (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                (a, b) => bail!("round {}: engine {a:?}, oracle {b:?}", rec.round),
            }
        }
        Ok(worst)
    })
}

/// Final benign accuracy (in percent) of every defense with no malicious
/// clients, starting from `base`, in both modes.
pub fn zero_malicious_accuracies<E: Executor>(base: &ExperimentConfig, exec: &E) -> Vec<(Mode, Defense, wfagg_core::Result<f64>)> {
    let mut out = Vec::new();
    for mode in [Mode::Decentral, Mode::Central] {
        for d in Defense::ALL {
            let mut cfg = base.clone();
            cfg.malicious.clear();
            cfg.mode = mode;
            cfg.defense = d;
            out.push((mode, d, run_experiment(&cfg, exec).map(|r| 100.0 * r.summary.overall)));
        }
    }
    out
}

/// Percentage-point gap between each defense and Mean with no malicious
/// clients, on the default synthetic softmax task in both modes.
fn zero_malicious_band(_ctx: &Ctx) -> Tally {
    let exec = Parallel::new(None).expect("thread pool");
    let mut t = Tally::new(2.0);
    for mode in [Mode::Decentral, Mode::Central] {
        let mut base = ExperimentConfig::default();
        base.malicious.clear();
        base.mode = mode;
        let run = |d: Defense| -> anyhow::Result<f64> {
            let mut cfg = base.clone();
            cfg.defense = d;
            Ok(100.0 * run_experiment(&cfg, &exec)?.summary.overall)
        };
        let reference = match run(Defense::Mean) {
            Ok(r) => r,
            Err(e) => {
                t.record(|| format!("{} mean", mode.name()), Err(e));
                continue;
            }
        };
        for d in Defense::ALL.into_iter().filter(|&d| d != Defense::Mean) {
            t.record(|| format!("{} {} vs mean {reference:.2}%", mode.name(), d.name()), run(d).map(|a| (a - reference).abs()));
        }
    }
    t
}

fn run_layout(_ctx: &Ctx) -> Tally {
    use crate::config::FileConfig;
    use crate::output;
    let mut t = Tally::new(0.0);
    let outcome = (|| {
        let dir = std::env::temp_dir().join(format!("wfagg-verify-{}", std::process::id()));
        let mut cfg = FileConfig::default();
        cfg.experiment = presets::smoke();
        cfg.output.weights = true;
        let result = output::execute(&cfg, &Sequential)?;
        output::write_run(&dir, &cfg, &result)?;
        let mut names: Vec<String> = std::fs::read_dir(&dir)?
            .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
            .collect::<std::io::Result<_>>()?;
        names.sort();
        std::fs::remove_dir_all(&dir)?;
        let mut want = vec![
            output::ACCURACY_CSV,
            output::CONFIG_TOML,
            output::R_SQUARED_CSV,
            output::SUMMARY_JSON,
            output::WEIGHTS_CSV,
        ];
        want.sort();
        ensure!(names == want, "run directory holds {names:?}");
        pass()
    })();
    t.record(|| "smoke run".into(), outcome);
    t
}

// ---------------------------------------------------------------- registry

macro_rules! check {
    ($module:literal, $name:literal, [$($c:literal),*], $sim:literal, $f:path) => {
        Check {
            name: $name,
            module: $module,
            criteria: &[$($c),*],
            simulation: $sim,
            run: $f,
        }
    };
}

pub static CHECKS: &[Check] = &[
    check!("paramvec", "cosine-self-and-antipodal", [8], false, cosine_self_antipodal),
    check!("paramvec", "cosine-scale-invariance", [8], false, cosine_scale_invariance),
    check!("paramvec", "coordwise-median-vs-oracle", [1, 8], false, median_vs_oracle),
    check!("paramvec", "norm-clip-idempotent", [8], false, norm_clip_idempotent),
    check!("paramvec", "weighted-sum-uniform-is-mean", [8], false, weighted_sum_uniform),
    check!("robust_agg", "trimmed-mean-vs-oracle", [1, 8], false, trimmed_mean_vs_oracle),
    check!("robust_agg", "krum-scores-vs-oracle", [1, 8], false, krum_scores_vs_oracle),
    check!("robust_agg", "multi-krum-vs-oracle", [1], false, multikrum_vs_oracle),
    check!("robust_agg", "clustering-vs-oracle", [1, 8], false, clustering_vs_oracle),
    check!("robust_agg", "permutation-invariance", [8], false, permutation_invariance),
    check!("robust_agg", "median-trimmed-within-range", [8], false, aggregates_within_range),
    check!("wfagg", "filter-sizes", [8], false, filter_sizes),
    check!("wfagg", "weight-lattice-patterns", [4], false, weight_lattice_patterns),
    check!("wfagg", "weight-lattice-fuzzed-run", [4, 8], false, weight_lattice_fuzzed),
    check!("wfagg", "smoother-convex-combination", [8], false, smoother_convex),
    check!("wfagg", "distance-filter-translation", [8], false, distance_filter_translation),
    check!("wfagg", "similarity-filter-rescaling", [8], false, similarity_filter_rescaling),
    check!("wfagg", "equal-models-blend", [8], false, equal_models_blend),
    check!("wfagg", "temporal-constant-accepted", [8], false, temporal_constant_accepts),
    check!("attacks", "sign-flip-keeps-norm", [8], false, signflip_norm),
    check!("attacks", "ipm-antiparallel", [8], false, ipm_antiparallel),
    check!("attacks", "ipm-mean-identity", [2, 8], false, ipm_mean_identity),
    check!("attacks", "ipm-direction", [2], false, ipm_direction),
    check!("attacks", "alie-within-band", [8], false, alie_band),
    check!("attacks", "label-flip-involution", [8], false, labelflip_involution),
    check!("topology", "ring-degree-regular", [8], false, ring_regularity),
    check!("topology", "handshake", [8], false, handshake),
    check!("topology", "table-grouping", [8], false, table_grouping),
    check!("learning", "flatten-round-trip", [8], false, flatten_round_trip),
    check!("learning", "gradient-vs-finite-differences", [3, 8], false, gradient_check),
    check!("learning", "training-deterministic", [8], false, training_deterministic),
    check!("learning", "poisoned-training-differs", [8], false, poisoned_training_differs),
    check!("sim", "r-squared-vs-oracle", [1, 8], false, r_squared_vs_oracle),
    check!("sim", "engine-r-squared", [8], true, sim_r_squared),
    check!("sim", "deterministic", [8], true, sim_deterministic),
    check!("sim", "round-order-independent", [8], true, sim_round_order),
    check!("sim", "zero-malicious-band", [8], true, zero_malicious_band),
    check!("cli", "run-directory-layout", [8], true, run_layout),
];

pub fn run_check(check: &Check, opts: &Options) -> Report {
    let ctx = Ctx {
        cases: opts.cases,
        seed: opts.seed,
        stream_id: stream_id(check.name),
    };
    let start = Instant::now();
    let t = (check.run)(&ctx);
    Report {
        name: check.name,
        module: check.module,
        criteria: check.criteria,
        cases: t.cases,
        failures: t.failures,
        tolerance: t.tolerance,
        worst: t.worst,
        first_failure: t.first,
        elapsed: start.elapsed(),
    }
}

/// Runs every check `select` accepts, calling `each` as reports arrive.
pub fn run(opts: &Options, select: impl Fn(&Check) -> bool, mut each: impl FnMut(&Report)) -> Vec<Report> {
    CHECKS
        .iter()
        .filter(|c| select(c))
        .map(|c| {
            let r = run_check(c, opts);
            each(&r);
            r
        })
        .collect()
}
