//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::reference::{example2_by_hand, grid_scan, lq_limit_error};
use common::{random_scalar, ScalarRng};
use mfteam::experiment::{self, gamma_sweep, mean_field_path};
use mfteam::model::{load_bundled, InfoStructure, ModelSpec};
use mfteam::oracle::{equivalence_check, saddle_check, DEFAULT_STEPS, SADDLE_TOLERANCE};
use mfteam::sim::{simulate, DisturbancePolicy, SimConfig};
use mfteam::synthesis::{compute_gains, critical_gamma, solve_riccati};
use nalgebra::DVector;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn v(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut check = |label: String, m: &ModelSpec| match equivalence_check(m) {
        Ok(rep) => {
            worst = worst.max(rep.value_rel_gap).max(rep.trajectory_rel_gap);
            if !rep.passed(1e-8) {
                failures.push(label);
            }
        }
        Err(e) => failures.push(format!("{label}: {e}")),
    };
    for (name, x0) in [("example1", 30.0), ("example2", 10.0)] {
        for n in 1..=3 {
            let starts = (0..n).map(|i| v(2.0 + 5.0 * i as f64)).collect();
            let m = load_bundled(name).unwrap().with_deterministic_start(v(x0), starts);
            check(format!("{name} n={n}"), &m);
        }
    }
    let mut rng = ScalarRng::new(2024);
    for case in 0..20 {
        let horizon = 2 + case % 9;
        for n in 1..=3 {
            check(format!("random {case} n={n}"), &random_scalar(&mut rng, n, horizon));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs < 10.0,
        format!("66 cases, worst rel gap {worst:.1e}, {secs:.2} s, failures {failures:?}"),
    )
}

fn saddle_at(gamma: f64) -> Outcome {
    let start = Instant::now();
    let m = load_bundled("example2")
        .unwrap()
        .with_gamma(gamma)
        .with_deterministic_start(v(10.0), vec![v(2.0), v(6.0)]);
    let ric = solve_riccati(&m);
    if !ric.feasible {
        return outcome(
            false,
            format!(
                "gamma={gamma} has no saddle point: attenuation condition fails at t={} (margin {:.3})",
                ric.first_violation.or(ric.singular_at).unwrap_or(0),
                ric.min_margin()
            ),
        );
    }
    let gains = compute_gains(&m, &ric).unwrap();
    let rep = saddle_check(&m, &gains, 50, &DEFAULT_STEPS, 11).unwrap();
    let mut flipped = gains.clone();
    for l in &mut flipped.l_brev {
        *l = -l.clone();
    }
    let bad = saddle_check(&m, &flipped, 50, &DEFAULT_STEPS, 11).unwrap();
    let detected = bad.min_control_delta() < -SADDLE_TOLERANCE;
    let outcome_ok = rep.control_ok() && rep.disturbance_ok() && rep.perturbations.len() == 200 && detected;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        outcome_ok && secs < 5.0,
        format!(
            "gamma={gamma}: min control delta {:.2e}, max disturbance delta {:.2e}, flipped gains min delta {:.2e}, {secs:.2} s",
            rep.min_control_delta(),
            rep.max_disturbance_delta(),
            bad.min_control_delta()
        ),
    )
}

fn saddle_property() -> Outcome {
    let primary = saddle_at(1.0);
    let info = saddle_at(3.0);
    outcome(
        primary.pass,
        format!(
            "{}; informational {} [{}]",
            primary.detail,
            info.detail,
            if info.pass { "pass" } else { "fail" }
        ),
    )
}

fn lq_limit() -> Outcome {
    let e1 = lq_limit_error(&load_bundled("example1").unwrap());
    let e2 = lq_limit_error(&load_bundled("example2").unwrap());
    outcome(e1 < 1e-6 && e2 < 1e-6, format!("max rel error example1 {e1:.1e}, example2 {e2:.1e}"))
}

fn riccati_regression() -> Outcome {
    let ric = solve_riccati(&load_bundled("example2").unwrap().with_gamma(1.0));
    let (m, mb) = example2_by_hand(1.0);
    let mut worst = 0.0f64;
    for t in 0..m.len() {
        worst = worst.max((ric.m_brev[t][(0, 0)] - m[t]).abs() / m[t].abs().max(1e-300));
        for i in 0..2 {
            for j in 0..2 {
                let want = mb[t][(i, j)];
                worst = worst.max((ric.m_bar[t][(i, j)] - want).abs() / want.abs().max(1e-12));
            }
        }
    }
    outcome(worst <= 1e-10, format!("max rel error {worst:.1e} over t=1..31"))
}

const FIGURE_GAMMAS: [f64; 4] = [1.5, 2.0, 3.0, 5.0];

fn per_gamma_seconds(which: u8, gammas: &[f64]) -> (Vec<experiment::GammaRun>, f64) {
    let (loaded, cfg) = experiment::example_setup(which, 7, 20).unwrap();
    let start = Instant::now();
    let runs = gamma_sweep(&loaded.model, gammas, &cfg).unwrap();
    (runs, start.elapsed().as_secs_f64() / (gammas.len() + 1) as f64)
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn qualitative_figures() -> Outcome {
    let (ex1, s1) = per_gamma_seconds(1, &FIGURE_GAMMAS);
    let feasible1: Vec<f64> = ex1.iter().filter(|r| r.row.feasible).map(|r| r.row.gamma).collect();
    let rms1: Vec<f64> = ex1.iter().filter_map(|r| r.row.detrended_rms).collect();
    let ex1_ok = feasible1.len() == FIGURE_GAMMAS.len() && strictly_decreasing(&rms1);
    let ex1_text = if feasible1.len() == FIGURE_GAMMAS.len() {
        format!("example1 rms {rms1:?}")
    } else {
        let margins: Vec<String> = ex1
            .iter()
            .map(|r| format!("{}: t={} margin {:.1}", r.row.gamma, r.row.first_violation.unwrap_or(0), r.row.min_margin))
            .collect();
        format!("example1 gammas infeasible [{}]", margins.join(", "))
    };

    let (info1, _) = per_gamma_seconds(1, &[15.0, 20.0, 30.0, 50.0]);
    let info_rms: Vec<f64> = info1.iter().filter_map(|r| r.row.detrended_rms).collect();

    let (ex2, s2) = per_gamma_seconds(2, &FIGURE_GAMMAS);
    let feasible2: Vec<&experiment::GammaRun> = ex2.iter().filter(|r| r.row.feasible).collect();
    let bands: Vec<Option<f64>> = feasible2.iter().map(|r| r.row.time_to_band).collect();
    let largest = feasible2.last();
    let mean_at_30 = largest.map(|r| mean_field_path(&r.records)[29][0]);
    let ex2_ok = feasible2.len() >= 2
        && mean_at_30.is_some_and(|x| (x - 10.0).abs() <= 0.5)
        && bands.iter().all(Option::is_some)
        && bands.windows(2).all(|w| w[1] > w[0]);
    let ex2_text = format!(
        "example2 feasible {:?}, time-to-band {:?}, mean at t=30 {:?}",
        feasible2.iter().map(|r| r.row.gamma).collect::<Vec<_>>(),
        bands,
        mean_at_30
    );
    let secs = s1.max(s2);
    outcome(
        ex1_ok && ex2_ok && secs < 5.0,
        format!(
            "{ex1_text}; {ex2_text}; {secs:.2} s per gamma; informational example1 gammas [15, 20, 30, 50] rms {info_rms:?} [{}]",
            if strictly_decreasing(&info_rms) && info_rms.len() == 4 { "decreasing" } else { "not decreasing" }
        ),
    )
}

fn imfs_convergence() -> Outcome {
    let start = Instant::now();
    let m = load_bundled("example2").unwrap();
    let gains = compute_gains(&m, &solve_riccati(&m)).unwrap();
    let mut bitwise = true;
    for disturbance in [
        DisturbancePolicy::Zero,
        DisturbancePolicy::WorstCaseFeedback,
        experiment::load_config("example2").unwrap().disturbance,
    ] {
        let mut cfg = SimConfig::new(5, 6);
        cfg.retain_full_states = true;
        cfg.disturbance = disturbance;
        let mfs = simulate(&m, &gains, &cfg).unwrap();
        cfg.info = InfoStructure::Imfs((1..=m.horizon).collect());
        bitwise &= mfs == simulate(&m, &gains, &cfg).unwrap();
    }
    let rows = experiment::gap_study(&m, &[10, 50, 250], &InfoStructure::NoSharing, 7, 500).unwrap();
    let scaled: Vec<f64> = rows.iter().map(|r| r.gap_times_n).collect();
    let hi = scaled.iter().cloned().fold(f64::MIN, f64::max);
    let lo = scaled.iter().cloned().fold(f64::MAX, f64::min);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        bitwise && lo > 0.0 && hi / lo <= 3.0 && secs < 60.0,
        format!("full schedule bitwise {bitwise}; gap*n {scaled:.3?} (spread {:.2}), {secs:.1} s", hi / lo),
    )
}

fn feasibility_boundary() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, lo, hi) in [("example1", 5.0, 40.0), ("example2", 0.5, 8.0)] {
        let m = load_bundled(name).unwrap();
        let c = critical_gamma(&m, lo, hi, 1e-6).unwrap();
        let (below, above) = grid_scan(&m, lo, hi, 2001);
        let agrees = below <= c.gamma && c.gamma <= above;
        ok &= c.hi - c.lo <= 1e-6 && c.monotone && agrees;
        parts.push(format!("{name} gamma* {:.7} in grid cell [{below:.4}, {above:.4}]", c.gamma));
    }
    outcome(ok, parts.join("; "))
}

fn files_in(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let commands: [&[&str]; 6] = [
        &["example", "--which", "1", "--gamma", "20,40", "--runs", "8"],
        &["example", "--which", "2", "--runs", "8"],
        &["simulate", "--config", "example2", "--observe", "1,5,10-12", "--disturbance", "worst-case", "--runs", "8"],
        &["synthesize", "--config", "example1", "--gamma", "15,30"],
        &["gap-study", "--n", "10,20", "--runs", "16"],
        &["verify", "--gamma", "3", "--directions", "5"],
    ];
    let root = tempfile::tempdir().unwrap();
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for (i, args) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for threads in ["1", "8"] {
            let dir = root.path().join(format!("{i}_{threads}"));
            let status = Command::new(env!("CARGO_BIN_EXE_mfteam"))
                .args(["--threads", threads])
                .args(*args)
                .arg("--out")
                .arg(&dir)
                .output()
                .unwrap()
                .status;
            if !status.success() {
                mismatched.push(format!("{} exited {status}", args[0]));
            }
            outputs.push(files_in(&dir));
        }
        compared += outputs[0].len();
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            mismatched.push(args.join(" "));
        }
    }
    outcome(
        mismatched.is_empty(),
        format!("{} commands, {compared} CSV files byte-identical under 1 and 8 threads; mismatches {mismatched:?}", commands.len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("saddle property", saddle_property),
        ("LQ limit", lq_limit),
        ("Riccati regression", riccati_regression),
        ("qualitative figure reproduction", qualitative_figures),
        ("IMFS coincidence and convergence", imfs_convergence),
        ("feasibility boundary", feasibility_boundary),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("{} {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
