use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use mfteam::experiment::{self, LoadedConfig};
use mfteam::model::{InfoStructure, ModelSpec};
use mfteam::report;
use mfteam::sim::SimConfig;
use mfteam::synthesis;
use mfteam::{Error, Result};

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_ERROR: u8 = 4;

/// Robust leader-follower mean-field team toolkit.
#[derive(Parser)]
#[command(name = "mfteam", version)]
struct Cli {
    /// Worker threads for Monte Carlo runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Model config: a TOML path, or `example1` / `example2`.
    #[arg(long, default_value = "example2")]
    config: String,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Observation schedule: `all`, `none`, or e.g. `1,5,10-12`.
    #[arg(long, default_value = "all")]
    observe: String,
    /// `config` (the config's own), `zero`, `worst-case` or `sinusoid:AMP[:followers|leader|both]`.
    #[arg(long, default_value = "config")]
    disturbance: String,
    /// Override the number of followers.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Riccati recursions and write gains per γ.
    Synthesize {
        #[command(flatten)]
        common: Common,
        /// Comma-separated γ values (default: the config's γ).
        #[arg(long)]
        gamma: Option<String>,
    },
    /// Synthesize and simulate per γ.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        gamma: Option<String>,
    },
    /// Simulate over a γ list (default: four values above the critical γ).
    SweepGamma {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        gamma: Option<String>,
    },
    /// Reproduce one of the bundled examples.
    Example {
        #[arg(long)]
        which: u8,
        #[arg(long)]
        gamma: Option<String>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check the solution against the stacked oracle and perturbation tests.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        directions: usize,
        /// Flip the sign of the deviation gain before checking.
        #[arg(long)]
        corrupt_gains: bool,
    },
    /// Cost gap between intermittent and full mean-field sharing over n.
    GapStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "10,50,250")]
        n: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        runs: usize,
        #[arg(long, default_value = "none")]
        observe: String,
    },
    /// Smallest feasible γ.
    CriticalGamma {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Bracket; found automatically when omitted.
        #[arg(long, requires = "hi")]
        lo: Option<f64>,
        #[arg(long, requires = "lo")]
        hi: Option<f64>,
    },
}

fn gammas(list: Option<&str>, model: &ModelSpec) -> Result<Vec<f64>> {
    match list {
        Some(s) => {
            let g = experiment::parse_list(s, "gamma")?;
            if g.is_empty() {
                return Err(Error::Empty("gamma list"));
            }
            Ok(g)
        }
        None => Ok(vec![model.gamma]),
    }
}

fn sim_setup(loaded: &LoadedConfig, args: &SimArgs) -> Result<(ModelSpec, SimConfig)> {
    let model = match args.n {
        Some(n) => loaded.model.with_followers(n)?,
        None => loaded.model.clone(),
    };
    let mut cfg = SimConfig::new(args.seed, args.runs);
    cfg.retain_full_states = true;
    cfg.info = InfoStructure::parse_schedule(&args.observe, model.horizon)?;
    cfg.disturbance = match args.disturbance.as_str() {
        "config" => loaded.disturbance.clone(),
        other => experiment::parse_disturbance(other)?,
    };
    Ok((model, cfg))
}

fn sweep(model: &ModelSpec, gammas: &[f64], cfg: &SimConfig, out: &Path, header: &str) -> Result<u8> {
    let runs = experiment::gamma_sweep(model, gammas, cfg)?;
    for p in experiment::write_sweep(out, model, &runs, header)? {
        println!("wrote {}", p.display());
    }
    let rows: Vec<_> = runs.iter().map(|r| r.row.clone()).collect();
    print!("{}", report::summary_text(&rows));
    Ok(if runs.iter().any(|r| r.row.feasible) { 0 } else { EXIT_INFEASIBLE })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Synthesize { common, gamma } => {
            let loaded = experiment::load_config(&common.config)?;
            let list = gammas(gamma.as_deref(), &loaded.model)?;
            fs::create_dir_all(&common.out)?;
            let mut rows = Vec::new();
            for &g in &list {
                let m = loaded.model.with_gamma(g);
                let ric = synthesis::solve_riccati(&m);
                let gains = synthesis::compute_gains(&m, &ric).ok();
                let name = if list.len() == 1 {
                    "riccati.csv".to_string()
                } else {
                    format!("riccati_gamma_{}.csv", report::gamma_label(g))
                };
                report::write_riccati(&common.out.join(name), &ric, gains.as_ref())?;
                rows.push(report::SummaryRow {
                    gamma: g,
                    feasible: ric.feasible,
                    min_margin: ric.min_margin(),
                    first_violation: ric.first_violation.or(ric.singular_at),
                    optimal_value: synthesis::optimal_value(&m, &ric).ok(),
                    ..Default::default()
                });
            }
            report::write_summary(&common.out.join("summary.csv"), &rows)?;
            let text = report::summary_text(&rows);
            fs::write(common.out.join("report.txt"), format!("synthesize {}\n{text}", common.config))?;
            print!("{text}");
            Ok(if rows.iter().any(|r| r.feasible) { 0 } else { EXIT_INFEASIBLE })
        }
        Command::Simulate { common, sim, gamma } => {
            let loaded = experiment::load_config(&common.config)?;
            let (model, cfg) = sim_setup(&loaded, &sim)?;
            let list = gammas(gamma.as_deref(), &model)?;
            sweep(&model, &list, &cfg, &common.out, &format!("simulate {}", common.config))
        }
        Command::SweepGamma { common, sim, gamma } => {
            let loaded = experiment::load_config(&common.config)?;
            let (model, cfg) = sim_setup(&loaded, &sim)?;
            let list = match gamma {
                Some(s) => gammas(Some(&s), &model)?,
                None => experiment::default_gammas(&model)?,
            };
            sweep(&model, &list, &cfg, &common.out, &format!("sweep-gamma {}", common.config))
        }
        Command::Example {
            which,
            gamma,
            seed,
            runs,
            out,
        } => {
            let (loaded, cfg) = experiment::example_setup(which, seed, runs)?;
            let list = match gamma {
                Some(s) => gammas(Some(&s), &loaded.model)?,
                None => experiment::default_gammas(&loaded.model)?,
            };
            sweep(&loaded.model, &list, &cfg, &out, &format!("example {which}"))
        }
        Command::Verify {
            common,
            n,
            gamma,
            seed,
            directions,
            corrupt_gains,
        } => {
            let loaded = experiment::load_config(&common.config)?;
            let base = match gamma {
                Some(g) => loaded.model.with_gamma(g),
                None => loaded.model.clone(),
            };
            let model = experiment::verification_instance(&base, n, seed)?;
            let outcome = experiment::verify(&model, directions, seed, corrupt_gains)?;
            fs::create_dir_all(&common.out)?;
            let eq = &outcome.equivalence;
            let mut text = format!("verify {} (n = {n}, gamma = {})\n", common.config, model.gamma);
            match &outcome.saddle {
                Some(rep) => {
                    report::write_saddle_report(&common.out.join("saddle_report.csv"), rep)?;
                    text += &report::saddle_text(rep, eq);
                }
                None => {
                    text += &format!(
                        "infeasible: synthesis feasible = {}, oracle feasible = {}\n",
                        eq.synthesis_feasible, eq.oracle_feasible
                    );
                }
            }
            text += if outcome.passed {
                "PASS\n"
            } else if outcome.infeasible {
                "INFEASIBLE\n"
            } else {
                "FAIL\n"
            };
            fs::write(common.out.join("report.txt"), &text)?;
            print!("{text}");
            Ok(if outcome.passed {
                0
            } else if outcome.infeasible {
                EXIT_INFEASIBLE
            } else {
                EXIT_VERIFY_FAILED
            })
        }
        Command::GapStudy {
            common,
            n,
            seed,
            runs,
            observe,
        } => {
            let loaded = experiment::load_config(&common.config)?;
            let n_list: Vec<usize> = experiment::parse_list(&n, "n")?;
            let schedule = InfoStructure::parse_schedule(&observe, loaded.model.horizon)?;
            let rows = experiment::gap_study(&loaded.model, &n_list, &schedule, seed, runs)?;
            fs::create_dir_all(&common.out)?;
            report::write_gap_table(&common.out.join("gap_study.csv"), &rows)?;
            let mut text = format!("gap-study {} (observe {observe}, {runs} runs)\n", common.config);
            for r in &rows {
                text += &format!("n = {}: gap {:e} ± {:e}, gap·n {}\n", r.n, r.gap, r.stderr, r.gap_times_n);
            }
            fs::write(common.out.join("report.txt"), &text)?;
            print!("{text}");
            Ok(0)
        }
        Command::CriticalGamma { common, tol, lo, hi } => {
            let loaded = experiment::load_config(&common.config)?;
            let crit = match (lo, hi) {
                (Some(lo), Some(hi)) => synthesis::critical_gamma(&loaded.model, lo, hi, tol)?,
                _ => experiment::locate_critical_gamma(&loaded.model, tol)?,
            };
            fs::create_dir_all(&common.out)?;
            let mut w = csv::Writer::from_path(common.out.join("critical_gamma.csv"))?;
            w.write_record(["step", "gamma", "feasible"])?;
            for (i, (g, f)) in crit.evaluations.iter().enumerate() {
                w.write_record([i.to_string(), g.to_string(), f.to_string()])?;
            }
            w.flush()?;
            let text = format!(
                "critical gamma {} (bracket [{}, {}], {} evaluations{})\n",
                crit.gamma,
                crit.lo,
                crit.hi,
                crit.evaluations.len(),
                if crit.monotone { "" } else { ", NON-MONOTONE" }
            );
            fs::write(common.out.join("report.txt"), &text)?;
            print!("{text}");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(code) => ExitCode::from(code),
        Err(e @ Error::Infeasible { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
