//! Acceptance run: prints one PASS/FAIL line per criterion, with the
//! measured values underneath, and exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use wfagg::exec::Parallel;
use wfagg::output::{self, RunSummary};
use wfagg::presets;
use wfagg::verify::{self, Options, Report};
use wfagg::config::attack_from_label;
use wfagg_core::defense::Defense;
use wfagg_core::sim::run_experiment;

const BIN: &str = env!("CARGO_BIN_EXE_wfagg");

struct Outcome {
    criterion: u8,
    title: &'static str,
    passed: bool,
    elapsed: Duration,
    details: Vec<String>,
}

impl Outcome {
    fn print(&self) {
        println!(
            "criterion {} {} {} ({:.2}s)",
            self.criterion,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed.as_secs_f64()
        );
        for d in &self.details {
            println!("    {d}");
        }
    }
}

fn reports_for(criterion: u8, opts: &Options) -> Vec<Report> {
    verify::run(opts, |c| c.criteria.contains(&criterion), |_| {})
}

/// A criterion backed by verification checks: all must pass, each with at
/// least `min_cases` cases, within `budget`.
fn from_checks(criterion: u8, title: &'static str, required: &[&str], min_cases: usize, budget: Duration) -> Outcome {
    let start = Instant::now();
    let reports = reports_for(criterion, &Options::default());
    let elapsed = start.elapsed();
    let mut passed = elapsed < budget;
    let mut details = Vec::new();
    for name in required {
        if !reports.iter().any(|r| r.name == *name) {
            passed = false;
            details.push(format!("missing check {name}"));
        }
    }
    for r in &reports {
        let enough = r.cases >= min_cases;
        passed &= r.passed() && enough;
        details.push(r.line());
        if !enough {
            details.push(format!("only {} cases, need {min_cases}", r.cases));
        }
    }
    details.push(format!("runtime {:.3}s, budget {:.0}s", elapsed.as_secs_f64(), budget.as_secs_f64()));
    Outcome {
        criterion,
        title,
        passed,
        elapsed,
        details,
    }
}

fn run_scenario(defense: Defense, attack: &str, exec: &Parallel) -> RunSummary {
    let mut cfg = presets::robustness();
    cfg.defense = defense;
    cfg.attack = attack_from_label(&cfg.attack, attack).expect("valid attack label");
    let result = run_experiment(&cfg, exec).unwrap_or_else(|e| panic!("{} {attack}: {e}", defense.name()));
    RunSummary::new(&cfg, &result)
}

type Runs = BTreeMap<(Defense, &'static str), RunSummary>;

fn pct(x: f64) -> f64 {
    100.0 * x
}

fn groups(s: &RunSummary) -> String {
    (0..=2)
        .map(|m| s.group(m).map_or("-".into(), |a| format!("{m}mn {:.2}", pct(a))))
        .collect::<Vec<_>>()
        .join(", ")
}

fn robustness(runs: &Runs, elapsed: Duration) -> Outcome {
    let mut details = Vec::new();
    let mut passed = true;
    let get = |d: Defense, a: &'static str| &runs[&(d, a)];

    let mean_base = pct(get(Defense::Mean, "none").benign_mean_accuracy);
    for a in ["noise", "ipm-100"] {
        let acc = pct(get(Defense::Mean, a).benign_mean_accuracy);
        let ok = mean_base - acc >= 30.0;
        passed &= ok;
        details.push(format!(
            "{} mean/{a}: {acc:.2}% vs {mean_base:.2}% without attack, drop {:.2} (need >= 30)",
            tag(ok),
            mean_base - acc
        ));
    }

    let base = get(Defense::Wfagg, "none");
    for a in ["noise", "sign-flip", "label-flip", "ipm-0.5", "ipm-100", "alie"] {
        let s = get(Defense::Wfagg, a);
        let worst = (0..=2)
            .filter_map(|m| Some((s.group(m)? - base.group(m)?).abs()))
            .fold(0.0, f64::max);
        let ok = pct(worst) <= 3.0 && (0..=2).all(|m| s.group(m).is_some());
        passed &= ok;
        details.push(format!(
            "{} wfagg/{a}: {} (largest gap to no attack {:.2}, need <= 3)",
            tag(ok),
            groups(s),
            pct(worst)
        ));
    }
    details.push(format!("     wfagg/none: {}", groups(base)));

    let drop2 = |d: Defense| pct(get(d, "none").group(2).unwrap_or(0.0) - get(d, "noise").group(2).unwrap_or(0.0));
    let (c, d) = (drop2(Defense::WfaggC), drop2(Defense::WfaggD));
    let ok = c > d;
    passed &= ok;
    details.push(format!(
        "{} noise, 2 malicious neighbors: wfagg-c drops {c:.2}, wfagg-d drops {d:.2} (need c > d)",
        tag(ok)
    ));

    let (kb, ka) = (get(Defense::Krum, "none"), get(Defense::Krum, "ipm-0.5"));
    for m in 1..=2 {
        let drop = pct(kb.group(m).unwrap_or(0.0) - ka.group(m).unwrap_or(0.0));
        let ok = drop >= 10.0;
        passed &= ok;
        details.push(format!(
            "{} krum/ipm-0.5, {m} malicious neighbors: {:.2}% vs {:.2}%, drop {drop:.2} (need >= 10)",
            tag(ok),
            pct(ka.group(m).unwrap_or(0.0)),
            pct(kb.group(m).unwrap_or(0.0))
        ));
    }
    let per_run = elapsed.as_secs_f64() / runs.len() as f64;
    details.push(format!(
        "runtime of the {} scenario runs {:.1}s; a full 168-cell sweep at this rate takes about {:.0}s (target < 300s)",
        runs.len(),
        elapsed.as_secs_f64(),
        168.0 * per_run
    ));
    Outcome {
        criterion: 5,
        title: "scaled robustness ordering",
        passed,
        elapsed,
        details,
    }
}

fn consistency(runs: &Runs) -> Outcome {
    let mean = runs[&(Defense::Mean, "none")].r_squared;
    let krum = runs[&(Defense::Krum, "none")].r_squared;
    let (passed, detail) = match (mean, krum) {
        (Some(m), Some(k)) => (m - k >= 0.2, format!("R^2 mean {m:.4}, krum {k:.4}, difference {:.4} (need >= 0.2)", m - k)),
        _ => (false, format!("R^2 undefined: mean {mean:?}, krum {krum:?}")),
    };
    Outcome {
        criterion: 6,
        title: "consistency metric (R^2) ordering",
        passed,
        elapsed: Duration::ZERO,
        details: vec![detail],
    }
}

fn tag(ok: bool) -> &'static str {
    if ok {
        "ok  "
    } else {
        "FAIL"
    }
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("run wfagg binary")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_default()
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut passed = true;
    let mut details = Vec::new();
    let scenarios: [&[&str]; 3] = [
        &["--preset", "smoke", "--attack", "alie", "--defense", "alt-wfagg"],
        &["--preset", "smoke", "--mode", "central", "--attack", "noise", "--defense", "wfagg"],
        &["--preset", "robustness", "--attack", "noise", "--defense", "wfagg"],
    ];
    for (i, scenario) in scenarios.iter().enumerate() {
        let mut dirs = Vec::new();
        for (j, workers) in ["1", "1", "4"].iter().enumerate() {
            let dir = tmp.path().join(format!("s{i}-{j}"));
            let mut args = vec!["run", "--weights", "--workers", workers, "--out", dir.to_str().expect("utf-8 path")];
            args.extend_from_slice(scenario);
            let out = cli(&args);
            if !out.status.success() {
                passed = false;
                details.push(format!("FAIL {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
            }
            dirs.push(dir);
        }
        for name in [output::ACCURACY_CSV, output::R_SQUARED_CSV, output::WEIGHTS_CSV, output::SUMMARY_JSON] {
            let first = read(&dirs[0], name);
            let same = !first.is_empty() && dirs[1..].iter().all(|d| read(d, name) == first);
            passed &= same;
            details.push(format!(
                "{} {} {name}: {} bytes, identical across 2 runs with 1 worker and 1 with 4",
                tag(same),
                scenario.join(" "),
                first.len()
            ));
        }
    }
    Outcome {
        criterion: 7,
        title: "bitwise determinism across runs and worker counts",
        passed,
        elapsed: start.elapsed(),
        details,
    }
}

fn invariants() -> Outcome {
    let start = Instant::now();
    let reports = reports_for(8, &Options::default());
    let mut passed = reports.iter().all(Report::passed);
    let mut details: Vec<String> = reports.iter().map(Report::line).collect();

    let tmp = tempfile::tempdir().expect("temp dir");
    let out = tmp.path().join("ok");
    let out = out.to_str().expect("utf-8 path");
    let cases: [(&[&str], i32, &str); 5] = [
        (&["run", "--preset", "smoke", "--out", out], 0, ""),
        (&["run", "--preset", "smoke", "--nodes", "0", "--out", out], 2, "`nodes`"),
        (&["run", "--preset", "smoke", "--defense", "krum", "--krum-f", "3", "--out", out], 2, "`defense`"),
        (&["run", "--preset", "smoke", "--attack", "ipm-x", "--out", out], 2, "`attack`"),
        (&["verify", "--only", "no-such-check"], 2, "no-such-check"),
    ];
    for (args, code, needle) in cases {
        let o = cli(args);
        let stderr = String::from_utf8_lossy(&o.stderr);
        let ok = o.status.code() == Some(code) && stderr.contains(needle);
        passed &= ok;
        details.push(format!(
            "{} cli: wfagg {} -> exit {:?}{}",
            tag(ok),
            args.join(" "),
            o.status.code(),
            stderr.lines().next().map(|l| format!(", {l}")).unwrap_or_default()
        ));
    }
    let mut modules: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &reports {
        *modules.entry(r.module).or_default() += 1;
    }
    details.push(format!("checks per module: {modules:?}"));
    Outcome {
        criterion: 8,
        title: "invariant suite",
        passed,
        elapsed: start.elapsed(),
        details,
    }
}

fn main() -> ExitCode {
    let total = Instant::now();
    let mut outcomes = Vec::new();

    let c1 = from_checks(
        1,
        "oracle equivalence",
        &[
            "coordwise-median-vs-oracle",
            "trimmed-mean-vs-oracle",
            "krum-scores-vs-oracle",
            "multi-krum-vs-oracle",
            "clustering-vs-oracle",
            "r-squared-vs-oracle",
        ],
        100,
        Duration::from_secs(10),
    );
    c1.print();
    outcomes.push(c1);

    let c2 = from_checks(2, "IPM algebra", &["ipm-mean-identity", "ipm-direction"], 100, Duration::from_secs(1));
    c2.print();
    outcomes.push(c2);

    let c3 = from_checks(3, "gradient correctness", &["gradient-vs-finite-differences"], 100, Duration::from_secs(10));
    c3.print();
    outcomes.push(c3);

    let c4 = from_checks(4, "WFAgg weight lattice", &["weight-lattice-patterns", "weight-lattice-fuzzed-run"], 8, Duration::from_secs(10));
    c4.print();
    outcomes.push(c4);

    let exec = Parallel::new(None).expect("thread pool");
    let start = Instant::now();
    let mut runs = Runs::new();
    let mut plan: Vec<(Defense, &'static str)> = vec![(Defense::Mean, "none"), (Defense::Mean, "noise"), (Defense::Mean, "ipm-100")];
    for a in ["none", "noise", "sign-flip", "label-flip", "ipm-0.5", "ipm-100", "alie"] {
        plan.push((Defense::Wfagg, a));
    }
    plan.extend([
        (Defense::WfaggC, "none"),
        (Defense::WfaggC, "noise"),
        (Defense::WfaggD, "none"),
        (Defense::WfaggD, "noise"),
        (Defense::Krum, "none"),
        (Defense::Krum, "ipm-0.5"),
    ]);
    for (d, a) in plan {
        runs.insert((d, a), run_scenario(d, a, &exec));
    }
    let c5 = robustness(&runs, start.elapsed());
    c5.print();
    outcomes.push(c5);

    let c6 = consistency(&runs);
    c6.print();
    outcomes.push(c6);

    let c7 = determinism();
    c7.print();
    outcomes.push(c7);

    let c8 = invariants();
    c8.print();
    outcomes.push(c8);

    println!("info: final benign accuracy with no malicious clients on the robustness scenario (not a criterion):");
    let all = verify::zero_malicious_accuracies(&presets::robustness(), &exec);
    for mode in ["decentral", "central"] {
        let line: Vec<String> = all
            .iter()
            .filter(|(m, _, _)| m.name() == mode)
            .map(|(_, d, acc)| match acc {
                Ok(a) => format!("{} {a:.2}", d.name()),
                Err(e) => format!("{} error: {e}", d.name()),
            })
            .collect();
        println!("    {mode}: {}", line.join(", "));
    }

    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.passed).map(|o| o.criterion).collect();
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s{}",
        outcomes.len() - failed.len(),
        outcomes.len(),
        total.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!("; failed: {failed:?}") }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
