//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use srpl_core::agents::AgentKind;
use srpl_core::harness::{
    gradcheck_suite, run, transfer, AggregateReport, ExperimentConfig, GradcheckOptions,
    SuiteConfig, TransferArm, TransferConfig,
};
use srpl_core::rng::{stream, Stream};
use srpl_core::s2c::{label_trajectory, S2CBuffer, S2CModel, SafetyConfig, SafetyLabel};
use srpl_core::{Trajectory, Transition};

const SIMPLEX_TOL: f64 = 1e-6;
const SIMPLEX_CALLS: usize = 10_000;
const GRAD_TOL: f64 = 1e-4;
const GRAD_NETS: usize = 100;
const CORRIDOR_MAX_TRAIN_STEPS: usize = 5_000;
const FIFO_CASES: usize = 1_000;
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const STEPS: usize = 50_000;
const GT_MIN_SUCCESS: f64 = 0.9;
const TRANSFER_SOURCE: [usize; 3] = [0, 1, 2];
const TRANSFER_TARGET: [usize; 1] = [3];
const TRANSFER_TARGET_STEPS: usize = 30_000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn trajectory(n: usize, ending: &str) -> Trajectory {
    let mut t = Trajectory::new();
    for i in 0..n {
        let last = i + 1 == n;
        let fail = last && ending == "fail";
        t.transitions.push(Transition {
            obs: vec![i as f64],
            action: 0,
            reward: if fail { -1.0 } else { -0.01 },
            cost: u8::from(fail),
            next_obs: vec![i as f64 + 1.0],
            terminal: last && ending != "truncated",
            truncated: last && ending == "truncated",
        });
    }
    t.failed = ending == "fail";
    t.succeeded = ending == "goal";
    t
}

fn labeling() -> Outcome {
    let h40 = |n| vec![40; n];
    // (length, ending, horizon, hand-computed labels)
    let cases: Vec<(usize, &str, u32, Vec<u32>)> = vec![
        (1, "fail", 40, vec![1]),
        (3, "fail", 40, vec![3, 2, 1]),
        (5, "fail", 3, vec![3, 3, 3, 2, 1]),
        (4, "goal", 40, h40(4)),
        (6, "truncated", 5, vec![5, 5, 5, 5, 5, 5]),
        (4, "fail", 4, vec![4, 3, 2, 1]),
        (6, "fail", 1, vec![1, 1, 1, 1, 1, 1]),
        (1, "goal", 8, vec![8]),
        (10, "fail", 8, vec![8, 8, 8, 7, 6, 5, 4, 3, 2, 1]),
        (3, "truncated", 40, h40(3)),
        (2, "fail", 2, vec![2, 1]),
        (7, "fail", 5, vec![5, 5, 5, 4, 3, 2, 1]),
        (12, "goal", 40, h40(12)),
        (8, "fail", 10, vec![8, 7, 6, 5, 4, 3, 2, 1]),
        (1, "truncated", 1, vec![1]),
        (3, "fail", 1, vec![1, 1, 1]),
        (9, "fail", 4, vec![4, 4, 4, 4, 4, 4, 3, 2, 1]),
        (2, "goal", 3, vec![3, 3]),
        (5, "fail", 40, vec![5, 4, 3, 2, 1]),
        (100, "truncated", 40, h40(100)),
    ];
    let mut wrong = Vec::new();
    for (i, (n, ending, h, want)) in cases.iter().enumerate() {
        let got: Vec<u32> = label_trajectory(&trajectory(*n, ending), *h)
            .unwrap()
            .into_iter()
            .map(SafetyLabel::delta)
            .collect();
        if &got != want {
            wrong.push(i);
        }
    }
    outcome(
        wrong.is_empty(),
        format!("{}/{} trajectories exact; mismatches {wrong:?}", cases.len() - wrong.len(), cases.len()),
    )
}

fn simplex() -> Outcome {
    let mut rng = stream(11, Stream::Safety);
    let mut worst = 0.0f64;
    let mut negative = 0;
    let mut calls = 0;
    while calls < SIMPLEX_CALLS {
        let width = 4 * rng.gen_range(1..=10);
        let config = SafetyConfig {
            horizon: width,
            bin_width: [1, 2, 4][rng.gen_range(0..3)],
            safe_bin: rng.gen_bool(0.5),
            hidden: vec![rng.gen_range(4..=32)],
            ..SafetyConfig::default()
        };
        let dim = rng.gen_range(1..=64);
        let model = S2CModel::new(dim, config, &mut rng).unwrap();
        for _ in 0..100 {
            let scale = [1.0, 10.0, 1e3][rng.gen_range(0..3)];
            let obs: Vec<f64> = (0..dim).map(|_| rng.gen_range(-scale..scale)).collect();
            let d = model.predict(&obs, rng.gen_bool(0.5)).unwrap();
            worst = worst.max((d.probs.iter().sum::<f64>() - 1.0).abs());
            negative += d.probs.iter().filter(|&&p| p < 0.0).count();
            calls += 1;
        }
    }
    outcome(
        worst <= SIMPLEX_TOL && negative == 0,
        format!("{calls} calls; max |sum - 1| = {worst:.2e} (tol {SIMPLEX_TOL:.0e}); {negative} negative entries"),
    )
}

fn gradients() -> Outcome {
    let s = gradcheck_suite(&GradcheckOptions {
        nets: GRAD_NETS,
        seed: 0,
        tolerance: GRAD_TOL,
        inject_fault: false,
    })
    .unwrap();
    let parts: Vec<String> = s
        .suites
        .iter()
        .map(|h| format!("{} max rel {:.2e} ({} failed)", h.head, h.max_rel_error, h.failures))
        .collect();
    outcome(
        s.passed,
        format!("{GRAD_NETS} nets per head, tol {GRAD_TOL:.0e}: {}", parts.join("; ")),
    )
}

fn corridor() -> Outcome {
    let r = common::corridor_convergence(0, CORRIDOR_MAX_TRAIN_STEPS);
    let bad: Vec<_> = r.modes.iter().filter(|(_, g, w)| g != w).collect();
    outcome(
        r.all_match() && r.modes.len() == 8,
        format!(
            "all {} distances in their own bin after {} train steps (budget {CORRIDOR_MAX_TRAIN_STEPS}); wrong {bad:?}",
            r.modes.len(),
            r.train_steps
        ),
    )
}

fn fifo() -> Outcome {
    let mut rng = stream(12, Stream::Replay);
    let mut failures = 0;
    for _ in 0..FIFO_CASES {
        let capacity = rng.gen_range(1..32);
        let mut buf = S2CBuffer::new(capacity);
        let mut reference: Vec<u64> = Vec::new();
        for step in 0..rng.gen_range(0..200u64) {
            if rng.gen_bool(0.02) {
                buf.clear();
                reference.clear();
            } else {
                buf.push(vec![step as f64], SafetyLabel::new(1, 1).unwrap());
                reference.push(step);
                if reference.len() > capacity {
                    reference.remove(0);
                }
            }
        }
        let got: Vec<u64> = buf.iter().map(|(o, _)| o[0] as u64).collect();
        failures += usize::from(got != reference);
    }
    outcome(failures == 0, format!("{FIFO_CASES} randomized cases, {failures} mismatches"))
}

fn base_config(name: &str, kind: AgentKind) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        kind,
        suite: SuiteConfig::default(),
        seeds: SEEDS.to_vec(),
        total_steps: STEPS,
        dqn: Default::default(),
        safety: Default::default(),
        env: Default::default(),
        transfer: None,
        sweep: None,
    }
}

/// Runs each kind once on the standard protocol and shares the reports.
struct Runs<'a> {
    dir: &'a Path,
    reports: BTreeMap<AgentKind, AggregateReport>,
}

impl Runs<'_> {
    fn get(&mut self, kind: AgentKind) -> &AggregateReport {
        let dir = self.dir;
        self.reports.entry(kind).or_insert_with(|| {
            let t = Instant::now();
            let cfg = base_config(kind.name(), kind);
            let r = run(&cfg, &dir.join(kind.name())).unwrap();
            eprintln!("    ({kind}: {} seeds x {STEPS} steps in {:.0}s)", SEEDS.len(), t.elapsed().as_secs_f64());
            r
        })
    }

    fn success(&mut self, kind: AgentKind) -> f64 {
        self.get(kind).summary.final_success_rate.median
    }

    fn failures(&mut self, kind: AgentKind) -> f64 {
        self.get(kind).summary.total_failures.median
    }

    fn ret(&mut self, kind: AgentKind) -> f64 {
        self.get(kind).summary.final_return.median
    }
}

fn motivating(runs: &mut Runs<'_>) -> Outcome {
    let (gt_s, dqn_s) = (runs.success(AgentKind::DqnGt), runs.success(AgentKind::Dqn));
    let (gt_f, dqn_f) = (runs.failures(AgentKind::DqnGt), runs.failures(AgentKind::Dqn));
    outcome(
        gt_s >= GT_MIN_SUCCESS && dqn_s < gt_s && dqn_f >= gt_f,
        format!(
            "median success DQN_GT {gt_s:.2} (>= {GT_MIN_SUCCESS}), DQN {dqn_s:.2} (< DQN_GT); median failures DQN {dqn_f} >= DQN_GT {gt_f}"
        ),
    )
}

fn srpl_benefit(runs: &mut Runs<'_>) -> Outcome {
    let (sr_s, dqn_s) = (runs.success(AgentKind::SrDqn), runs.success(AgentKind::Dqn));
    let (sr_f, dqn_f) = (runs.failures(AgentKind::SrDqn), runs.failures(AgentKind::Dqn));
    outcome(
        sr_f <= dqn_f && sr_s >= dqn_s,
        format!("median failures SR_DQN {sr_f} <= DQN {dqn_f}; median success SR_DQN {sr_s:.2} >= DQN {dqn_s:.2}"),
    )
}

fn reset_pathology(runs: &mut Runs<'_>) -> Outcome {
    let (r, d) = (runs.failures(AgentKind::DqnReset), runs.failures(AgentKind::Dqn));
    outcome(r >= d, format!("median failures DQN_RESET {r} >= DQN {d}"))
}

fn transfer_speed(dir: &Path) -> Outcome {
    let mut cfg = base_config("transfer", AgentKind::SrDqn);
    cfg.suite.variants = TRANSFER_TARGET.to_vec();
    cfg.total_steps = TRANSFER_TARGET_STEPS;
    cfg.transfer = Some(TransferConfig {
        source_checkpoint: None,
        source_agent_checkpoint: None,
        source_variants: TRANSFER_SOURCE.to_vec(),
        source_steps: Some(STEPS),
        arms: vec![TransferArm::Scratch, TransferArm::Frozen],
    });
    let report = transfer(&cfg, &dir.join("transfer")).unwrap();
    let scratch = &report.arm(TransferArm::Scratch).unwrap().summary;
    let frozen = report.arm(TransferArm::Frozen).unwrap();
    let (f, s) = (
        frozen.summary.steps_to_half_success.median,
        scratch.steps_to_half_success.median,
    );
    outcome(
        f < s && frozen.s2c_unchanged == Some(true),
        format!(
            "median steps to 50% rolling success: frozen {f} < scratch {s} (reached {}/{} vs {}/{}); frozen S2C unchanged {:?}",
            frozen.summary.reached_half_success,
            SEEDS.len(),
            scratch.reached_half_success,
            SEEDS.len(),
            frozen.s2c_unchanged
        ),
    )
}

fn ablation_order(runs: &mut Runs<'_>) -> Outcome {
    let sr = runs.ret(AgentKind::SrDqn);
    let v2 = runs.ret(AgentKind::V2OnPolicy);
    let v1 = runs.ret(AgentKind::V1Scalar);
    let dqn = runs.ret(AgentKind::Dqn);
    outcome(
        sr >= v2 && v2 >= v1 && v2 >= dqn,
        format!("median final return SR_DQN {sr:.3} >= V2_ONPOLICY {v2:.3} >= V1_SCALAR {v1:.3} / DQN {dqn:.3}"),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let mut identical = Vec::new();
    for kind in [AgentKind::SrLagDqn, AgentKind::V1Scalar, AgentKind::DqnReset] {
        let mut cfg = base_config("det", kind);
        cfg.seeds = vec![0, 1];
        cfg.total_steps = 5_000;
        cfg.dqn.reset_every = 2_000;
        let a = dir.join(format!("det-{kind}-a"));
        let b = dir.join(format!("det-{kind}-b"));
        run(&cfg, &a).unwrap();
        run(&cfg, &b).unwrap();
        let read = |d: &Path| std::fs::read(d.join("metrics.csv")).unwrap();
        identical.push((kind, read(&a) == read(&b)));
    }
    outcome(
        identical.iter().all(|(_, same)| *same),
        format!("metrics.csv byte-identical across reruns: {identical:?}"),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Runs {
        dir: dir.path(),
        reports: BTreeMap::new(),
    };
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut check = |id: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "{} {id:>2} {name}: {} [{secs:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o, secs));
    };
    check(1, "labeling oracle", &mut labeling);
    check(2, "simplex invariant", &mut simplex);
    check(3, "gradient correctness", &mut gradients);
    check(4, "S2C convergence oracle", &mut corridor);
    check(5, "FIFO property", &mut fifo);
    check(6, "motivating example", &mut || motivating(&mut runs));
    check(7, "steps-to-cost benefit", &mut || srpl_benefit(&mut runs));
    check(8, "reset pathology", &mut || reset_pathology(&mut runs));
    check(9, "transfer", &mut || transfer_speed(dir.path()));
    check(10, "representation ablation order", &mut || ablation_order(&mut runs));
    check(11, "determinism", &mut || determinism(dir.path()));
    let failed: Vec<u32> = results
        .iter()
        .filter(|r| !r.2.passed)
        .map(|r| r.0)
        .collect();
    println!(
        "acceptance: {}/{} passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed {failed:?}")
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
