//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero when a check fails that is not in `KNOWN_FAILURES`, or when a
//! known failure starts passing (so the list cannot go stale).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use pulsecal::experiments::{calibrate_at, Calibration};
use pulsecal::{ExperimentConfig, OutDir};
use pulsecal_core::analysis::{first_order_exactness, fit_oscillation, phase_stability_check};
use pulsecal_core::ilc::run_calibration;
use pulsecal_core::signal::{
    continuous_distance, l1_norm, overshoot, sample_at_awg_points, FineTrajectory,
};
use pulsecal_core::{
    AwgSignal, CalibrationConfig, CalibrationResult, CalibrationStatus, DesiredSignal, LiftedModel,
    Lifting, Plant, TransferFunction,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(criterion, check)` pairs that fail for reasons recorded in the project
/// notes. Each is still printed as `[FAIL]`.
const KNOWN_FAILURES: &[(u8, &str)] = &[
    (3, "waveform agreement"),
    (3, "baseline factor good"),
    (7, "decay time"),
];

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        pass,
        detail: detail.into(),
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs().join(format!("{name}.toml"))).expect("canned config loads")
}

fn calibrate(name: &str) -> (ExperimentConfig, Calibration) {
    let cfg = load(name);
    let reference = cfg.reference_model().unwrap();
    let run = calibrate_at(&cfg, &reference, cfg.experiment.tau).unwrap();
    (cfg, run)
}

fn tc(zeros: &[f64], poles: &[f64]) -> TransferFunction {
    TransferFunction::from_time_constants(1.0, zeros, poles).unwrap()
}

fn eq6() -> TransferFunction {
    tc(&[], &[0.008, 0.001])
}

fn all_models() -> Vec<(&'static str, TransferFunction)> {
    vec![
        ("plant", eq6()),
        ("good", tc(&[], &[0.006, 0.001])),
        ("coarse", tc(&[], &[0.004])),
        ("slow zero", tc(&[-0.002], &[0.006, 0.001])),
        ("fast zero", tc(&[-0.006], &[0.006, 0.001])),
    ]
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

fn self_calibration(beta: f64, max_iterations: usize, tolerance: f64) -> CalibrationResult {
    let g = eq6();
    let desired = DesiredSignal::unit_step();
    let cfg = CalibrationConfig {
        learning_rate: beta,
        max_iterations,
        sample_error_tolerance: tolerance,
        ..CalibrationConfig::default()
    };
    let init = desired.staircase(0.002, 50).unwrap();
    run_calibration(&Plant::linear(g.clone()), &g, &desired, &cfg, &init).unwrap()
}

fn exact_one_shot() -> Vec<Check> {
    let res = self_calibration(1.0, 1, 1e-300);
    let e = res.history[1].sampled_error;
    vec![check(
        "one update",
        e <= 1e-10,
        format!("sampled error after one update {e:.3e}"),
    )]
}

fn geometric_contraction() -> Vec<Check> {
    let res = self_calibration(0.5, 60, 1e-300);
    let e = res.sampled_errors();
    let floor = 1e-5 * e[0];
    let ratios: Vec<f64> = e
        .windows(2)
        .take_while(|w| w[1] > floor)
        .map(|w| w[1] / w[0])
        .collect();
    let worst = ratios.iter().map(|r| (r - 0.5).abs()).fold(0.0, f64::max);
    vec![check(
        "ratio",
        ratios.len() >= 10 && worst <= 1e-9,
        format!(
            "{} ratios above the floor, max |ratio - 0.5| = {worst:.2e}",
            ratios.len()
        ),
    )]
}

fn two_model_reproduction() -> Vec<Check> {
    let (_, good) = calibrate("good_model");
    let (_, coarse) = calibrate("coarse_model");
    let (g, c) = (&good.result, &coarse.result);
    let mut checks = vec![check(
        "sampled error",
        g.final_sampled_error() < 1e-6 && c.final_sampled_error() < 1e-6,
        format!(
            "good {:.2e}, coarse {:.2e}",
            g.final_sampled_error(),
            c.final_sampled_error()
        ),
    )];
    let d = max_rel_diff(g.final_awg.values(), c.final_awg.values());
    checks.push(check(
        "waveform agreement",
        d <= 1e-4,
        format!("max relative AWG difference {d:.2e}"),
    ));
    for (name, run) in [
        ("baseline factor good", &good),
        ("baseline factor coarse", &coarse),
    ] {
        let base = run.baseline.as_ref().unwrap().final_continuous_error();
        let factor = base / run.result.final_continuous_error();
        checks.push(check(
            name,
            factor >= 3.0,
            format!("baseline / iterative continuous error {factor:.2}"),
        ));
    }
    checks
}

fn model_inaccuracy() -> Vec<Check> {
    let (_, good) = calibrate("good_model");
    let (_, coarse) = calibrate("coarse_model");
    let a = good.result.first_iteration_below(1e-4);
    let b = coarse.result.first_iteration_below(1e-4);
    let pass = matches!((a, b), (Some(a), Some(b)) if b > a)
        && good.result.final_sampled_error() < 1e-6
        && coarse.result.final_sampled_error() < 1e-6;
    vec![check(
        "slower",
        pass,
        format!("iterations to 1e-4: good {a:?}, coarse {b:?}"),
    )]
}

/// Some window of `width` consecutive iterations contains a rise.
fn rising_window(errors: &[f64], width: usize) -> Option<usize> {
    errors
        .windows(width)
        .position(|w| w.windows(2).any(|p| p[1] > p[0]))
}

fn non_minimum_phase() -> Vec<Check> {
    let (_, good) = calibrate("good_model");
    let (_, slow) = calibrate("slow_zero_model");
    let (_, fast) = calibrate("fast_zero_model");
    let mut checks = vec![check(
        "slow zero converges",
        slow.result.status == CalibrationStatus::Converged,
        format!(
            "{} after {} iterations",
            slow.result.status,
            slow.result.iterations()
        ),
    )];
    let e = fast.result.sampled_errors();
    let rises = e.windows(2).filter(|w| w[1] > w[0]).count();
    checks.push(check(
        "fast zero oscillates",
        rising_window(&e, 10).is_some(),
        format!(
            "{rises} rising steps, first 10-iteration window with a rise at {:?}",
            rising_window(&e, 10)
        ),
    ));
    let d = max_rel_diff(
        good.result.final_awg.values(),
        fast.result.final_awg.values(),
    );
    checks.push(check(
        "fast zero fixed point",
        fast.result.status == CalibrationStatus::Converged && d <= 1e-6,
        format!(
            "{}, max relative AWG difference to the good model {d:.2e}",
            fast.result.status
        ),
    ));

    let (cfg, bad) = calibrate("counterexample");
    let pc = phase_stability_check(
        &cfg.true_plant().linear,
        &cfg.reference_model().unwrap(),
        cfg.experiment.tau,
        cfg.horizon(),
    )
    .unwrap();
    checks.push(check(
        "counterexample",
        !pc.stable_prediction && bad.result.status == CalibrationStatus::Diverged,
        format!(
            "max phase gap {:.1} deg, loop {}",
            pc.max_abs_difference, bad.result.status
        ),
    ));
    checks
}

fn first_order() -> Vec<Check> {
    let cfg = CalibrationConfig {
        max_iterations: 200,
        ..CalibrationConfig::default()
    };
    [(0.008, 0.002), (0.004, 0.001)]
        .into_iter()
        .map(|(t, tau)| {
            let r = first_order_exactness(t, tau, 50, &cfg).unwrap();
            check(
                "flat",
                r.max_deviation < 1e-9 && r.plateau_spread < 1e-9,
                format!(
                    "T={t} tau={tau}: max deviation {:.2e}, plateau spread {:.2e}",
                    r.max_deviation, r.plateau_spread
                ),
            )
        })
        .collect()
}

fn summary_of(out: &Path) -> toml::Table {
    let text = fs::read_to_string(out.join("summary.toml")).unwrap();
    toml::from_str::<toml::Table>(&text).unwrap()["summary"]
        .as_table()
        .unwrap()
        .clone()
}

fn inter_sample_trends() -> Vec<Check> {
    let (_, slow) = calibrate("good_model");
    let (_, fast) = calibrate("fast_sampling");
    let (os, of) = (
        overshoot(&slow.result.final_trajectory, 1.0),
        overshoot(&fast.result.final_trajectory, 1.0),
    );
    let ds = fit_oscillation(&slow.result.final_trajectory, 1.0)
        .unwrap()
        .decay_time;
    let df = fit_oscillation(&fast.result.final_trajectory, 1.0)
        .unwrap()
        .decay_time;
    let mut checks = vec![
        check(
            "overshoot",
            of > os,
            format!("tau=0.001 {of:.4}, tau=0.002 {os:.4}"),
        ),
        check(
            "decay time",
            df > ds,
            format!("tau=0.001 {df:.3e}, tau=0.002 {ds:.3e}"),
        ),
    ];

    let dir = tempfile::tempdir().unwrap();
    let out = OutDir::create(dir.path()).unwrap();
    pulsecal::cmd_sweep(&load("second_order_sweep"), &out).unwrap();
    let s = summary_of(dir.path());
    let steps = |k: &str| s[k].as_integer().unwrap();
    let (o, d, failed) = (
        steps("overshoot_decreasing_steps"),
        steps("decay_time_decreasing_steps"),
        steps("failed_cells"),
    );
    checks.push(check(
        "sweep monotone",
        o <= 1 && d <= 1 && failed == 0,
        format!("decreasing steps: overshoot {o}, decay time {d}; failed cells {failed}"),
    ));

    let dir = tempfile::tempdir().unwrap();
    let out = OutDir::create(dir.path()).unwrap();
    pulsecal::cmd_ramsey(&load("ramsey"), &out).unwrap();
    let runs = summary_of(dir.path())["runs"].as_array().unwrap().clone();
    let terminal = |tau: f64| {
        runs.iter()
            .find(|r| r["tau"].as_float() == Some(tau))
            .and_then(|r| r["terminal_delta_theta"].as_float())
            .unwrap()
    };
    let (rf, rs) = (terminal(0.001), terminal(0.002));
    checks.push(check(
        "ramsey",
        rf.abs() < rs.abs(),
        format!("terminal phase deviation tau=0.001 {rf:.3e}, tau=0.002 {rs:.3e}"),
    ));
    checks
}

fn damped(a: f64, ts: f64, period: f64) -> FineTrajectory {
    let (tau, m, n) = (0.001, 50, 60);
    let step = tau / m as f64;
    let values = (0..=n * m)
        .map(|i| {
            let t = i as f64 * step;
            1.0 + a * (-t / ts).exp() * (2.0 * std::f64::consts::PI * t / period).sin()
        })
        .collect();
    FineTrajectory::new(values, step, m).unwrap()
}

fn oscillation_fit() -> Vec<Check> {
    let mut cases = vec![(0.3, 0.004, 0.002)];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        cases.push((
            rng.random_range(0.05..0.8),
            rng.random_range(0.002..0.01),
            rng.random_range(0.0015..0.004),
        ));
    }
    let mut worst = 0.0f64;
    let mut failed = 0;
    for &(a, ts, period) in &cases {
        match fit_oscillation(&damped(a, ts, period), 1.0) {
            Ok(f) => {
                let err = [
                    (f.overshoot_amplitude - a) / a,
                    (f.decay_time - ts) / ts,
                    (f.period - period) / period,
                ]
                .iter()
                .fold(0.0f64, |m, e| m.max(e.abs()));
                worst = worst.max(err);
            }
            Err(_) => failed += 1,
        }
    }
    vec![check(
        "round trip",
        failed == 0 && worst <= 0.02,
        format!(
            "{} signals, {failed} fit failures, worst relative error {worst:.2e}",
            cases.len()
        ),
    )]
}

fn saturation() -> Vec<Check> {
    let mut checks = Vec::new();

    let (cfg, sat) = calibrate("saturation_a2");
    let linear = Plant::linear(cfg.true_plant().linear);
    let tau = cfg.experiment.tau;
    let lin = run_calibration(
        &linear,
        &cfg.reference_model().unwrap(),
        &cfg.desired(),
        &cfg.calibration_config(),
        &cfg.initial_awg(tau, cfg.horizon()).unwrap(),
    )
    .unwrap();
    let dist = continuous_distance(&sat.result.final_trajectory, &lin.final_trajectory).unwrap();
    let rel = dist / l1_norm(&lin.final_trajectory);
    checks.push(check(
        "A=2 close to linear",
        rel <= 0.05,
        format!("relative continuous distance {rel:.2e}"),
    ));

    let (_, a1) = calibrate("saturation_a1");
    let (os_sat, os_lin) = (
        overshoot(&a1.result.final_trajectory, 1.0),
        overshoot(&lin.final_trajectory, 1.0),
    );
    checks.push(check(
        "A=1 overshoot suppressed",
        os_sat < 0.2 * os_lin,
        format!("overshoot {os_sat:.4} against linear {os_lin:.4}"),
    ));

    let first_below = |r: &CalibrationResult| {
        r.history
            .iter()
            .find(|h| h.continuous_error <= 1e-3)
            .map(|h| h.index)
    };
    let (_, fast) = calibrate("saturation_a1_fast");
    let hit = first_below(&fast.result);
    let stable = !matches!(
        fast.result.status,
        CalibrationStatus::Diverged | CalibrationStatus::AmplitudeCapped
    );
    checks.push(check(
        "A=1 fast learning",
        stable && hit.is_some_and(|k| k <= 30),
        format!(
            "beta=5: {}, continuous error <= 1e-3 at iteration {hit:?}",
            fast.result.status
        ),
    ));
    let (_, slow) = calibrate("saturation_a1_slow");
    let hit = first_below(&slow.result);
    checks.push(check(
        "A=1 slow learning",
        hit.is_none_or(|k| k >= 150),
        format!("beta=0.5: continuous error <= 1e-3 at iteration {hit:?}"),
    ));
    checks
}

fn lifted_soundness() -> Vec<Check> {
    let models = all_models();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_trip = 0.0f64;
    for _ in 0..100 {
        let (_, g) = &models[rng.random_range(0..models.len())];
        let tau = [0.001, 0.002][rng.random_range(0..2)];
        let n = rng.random_range(5..=50);
        let lifting = if rng.random_bool(0.5) {
            Lifting::StepIncrement
        } else {
            Lifting::ImpulseSampled
        };
        let l = LiftedModel::build_with(g, tau, n, lifting).unwrap();
        let target: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = l.deconvolve_with_guard(&target, f64::INFINITY).unwrap();
        let back = l.apply(&r).unwrap();
        // the inverse of a non-minimum-phase lifting grows geometrically, so
        // the residual is measured against the size of the drive
        let scale = r.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let err = target
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale;
        worst_trip = worst_trip.max(err);
    }
    let mut checks = vec![check(
        "round trip",
        worst_trip <= 1e-9,
        format!("100 instances, worst |apply(deconvolve(u)) - u| / max(1, |r|) = {worst_trip:.2e}"),
    )];

    let mut worst_sim = 0.0f64;
    for (_, g) in &models {
        let r: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let predicted = LiftedModel::build(g, 0.002, 50).unwrap().apply(&r).unwrap();
        let traj = Plant::linear(g.clone())
            .simulate(&AwgSignal::new(r, 0.002).unwrap(), 20)
            .unwrap();
        let measured = sample_at_awg_points(&traj);
        let err = predicted
            .iter()
            .zip(&measured)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst_sim = worst_sim.max(err);
    }
    checks.push(check(
        "simulator agreement",
        worst_sim <= 1e-9,
        format!("5 models, worst sample-point difference {worst_sim:.2e}"),
    ));
    checks
}

type Command = fn(&ExperimentConfig, &OutDir) -> pulsecal::Result<toml::Table>;

fn commands_for(cfg: &ExperimentConfig) -> Vec<(&'static str, Command)> {
    let mut cmds: Vec<(&'static str, Command)> = Vec::new();
    if cfg.sweep.is_some() {
        cmds.push(("sweep", pulsecal::cmd_sweep));
    }
    if cfg.ramsey.is_some() {
        cmds.push(("ramsey", pulsecal::cmd_ramsey));
    }
    if !cfg.references.is_empty() || cfg.stability.is_some() {
        cmds.push(("stability", pulsecal::cmd_stability));
    }
    if cfg.reference.is_some() && cfg.sweep.is_none() && cfg.ramsey.is_none() {
        cmds.push(("calibrate", pulsecal::cmd_calibrate));
    }
    cmds
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Vec<Check> {
    let mut paths: Vec<_> = fs::read_dir(configs())
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    let mut runs = 0;
    let mut mismatched = Vec::new();
    let mut slowest = (Duration::ZERO, String::new());
    for path in &paths {
        let cfg = ExperimentConfig::load(path).unwrap();
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        for (name, cmd) in commands_for(&cfg) {
            let mut outputs = Vec::new();
            for _ in 0..2 {
                let dir = tempfile::tempdir().unwrap();
                let start = Instant::now();
                cmd(&cfg, &OutDir::create(dir.path()).unwrap()).unwrap();
                let took = start.elapsed();
                if took > slowest.0 {
                    slowest = (took, format!("{name} {stem}"));
                }
                outputs.push(snapshot(dir.path()));
            }
            runs += 1;
            if outputs[0] != outputs[1] {
                mismatched.push(format!("{name} {stem}"));
            }
        }
    }
    vec![
        check(
            "byte identical",
            runs >= paths.len() && mismatched.is_empty(),
            format!(
                "{runs} runs over {} configs, mismatched {mismatched:?}",
                paths.len()
            ),
        ),
        check(
            "under 10 s",
            slowest.0 < Duration::from_secs(10),
            format!("slowest {} at {:.2} s", slowest.1, slowest.0.as_secs_f64()),
        ),
    ]
}

type Criterion = (u8, &'static str, fn() -> Vec<Check>);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "exact-model one-shot", exact_one_shot),
        (2, "geometric contraction", geometric_contraction),
        (3, "two-model reproduction", two_model_reproduction),
        (4, "model-inaccuracy tolerance", model_inaccuracy),
        (5, "non-minimum-phase behavior", non_minimum_phase),
        (6, "first-order exactness", first_order),
        (7, "inter-sample trends", inter_sample_trends),
        (8, "oscillation-fit round trip", oscillation_fit),
        (9, "saturation", saturation),
        (10, "lifted-model soundness", lifted_soundness),
        (11, "determinism and format", determinism),
    ];

    let mut unexpected = Vec::new();
    let mut passed = 0;
    for (id, title, run) in criteria {
        let checks = run();
        let ok = checks.iter().all(|c| c.pass);
        passed += usize::from(ok);
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id} ({title})");
        for c in &checks {
            let known = KNOWN_FAILURES.contains(&(id, c.name));
            let mark = match (c.pass, known) {
                (true, false) => "ok",
                (false, true) => "known failure",
                (false, false) => "FAILED",
                (true, true) => "passes but listed as known failure",
            };
            println!("       {}: {} [{mark}]", c.name, c.detail);
            if c.pass == known {
                unexpected.push(format!("criterion {id} / {}", c.name));
            }
        }
    }
    println!("{passed}/11 criteria pass");
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("unexpected outcomes: {unexpected:?}");
        ExitCode::FAILURE
    }
}
