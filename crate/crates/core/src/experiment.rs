//! Experiment drivers shared by the command-line front end and the tests.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::DVector;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{self, InfoStructure, ModelSpec};
use crate::oracle::{self, EquivalenceReport, GapRow, SaddleReport};
use crate::report::{self, SummaryRow};
use crate::sim::{self, DisturbancePolicy, DisturbanceTarget, SimConfig, TrajectoryRecord};
use crate::synthesis::{self, CriticalGamma, RiccatiSolution, StrategyGains};

/// γ used as the disturbance-free reference trajectory.
pub const REFERENCE_GAMMA: f64 = 1e9;
/// Half-width of the consensus band around the leader.
pub const BAND_HALF_WIDTH: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub model: ModelSpec,
    /// Disturbance named in the config's `[disturbance]` table, or `Zero`.
    pub disturbance: DisturbancePolicy,
}

#[derive(Deserialize)]
struct DisturbanceFile {
    disturbance: Option<DisturbanceSection>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum DisturbanceSection {
    Zero,
    Sinusoid {
        amplitude: f64,
        #[serde(default)]
        target: Option<String>,
    },
    WorstCase,
}

fn parse_target(s: &str) -> Result<DisturbanceTarget> {
    match s {
        "followers" => Ok(DisturbanceTarget::Followers),
        "leader" => Ok(DisturbanceTarget::Leader),
        "both" => Ok(DisturbanceTarget::Both),
        other => Err(Error::Config(format!("unknown disturbance target '{other}'"))),
    }
}

/// `zero`/`none`, `worst-case`, or `sinusoid:AMPLITUDE[:followers|leader|both]`.
pub fn parse_disturbance(spec: &str) -> Result<DisturbancePolicy> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["zero"] | ["none"] => Ok(DisturbancePolicy::Zero),
        ["worst-case"] => Ok(DisturbancePolicy::WorstCaseFeedback),
        ["sinusoid", amp, rest @ ..] if rest.len() <= 1 => {
            let amplitude: f64 = amp
                .parse()
                .map_err(|_| Error::Config(format!("bad sinusoid amplitude '{amp}'")))?;
            let target = rest.first().map_or(Ok(DisturbanceTarget::Followers), |t| parse_target(t))?;
            Ok(DisturbancePolicy::Sinusoid { amplitude, target })
        }
        _ => Err(Error::Config(format!("unknown disturbance '{spec}'"))),
    }
}

pub fn parse_config_text(text: &str) -> Result<LoadedConfig> {
    let model = model::load_model(text)?;
    let file: DisturbanceFile = toml::from_str(text)?;
    let disturbance = match file.disturbance {
        None | Some(DisturbanceSection::Zero) => DisturbancePolicy::Zero,
        Some(DisturbanceSection::WorstCase) => DisturbancePolicy::WorstCaseFeedback,
        Some(DisturbanceSection::Sinusoid { amplitude, target }) => DisturbancePolicy::Sinusoid {
            amplitude,
            target: target.as_deref().map_or(Ok(DisturbanceTarget::Followers), parse_target)?,
        },
    };
    Ok(LoadedConfig { model, disturbance })
}

/// A bundled name (`example1`, `example2`) or a path to a TOML file.
pub fn load_config(arg: &str) -> Result<LoadedConfig> {
    match model::bundled(arg) {
        Some(text) => parse_config_text(text),
        None => parse_config_text(&fs::read_to_string(arg)?),
    }
}

pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let mag = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits - 1 - mag);
    (x * scale).round() / scale
}

/// Brackets the feasibility boundary by doubling and halving from 1, then bisects.
pub fn locate_critical_gamma(model: &ModelSpec, tol: f64) -> Result<CriticalGamma> {
    let mut hi = 1.0;
    while !synthesis::is_feasible(model, hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NoBracket {
                lo: 1.0,
                hi,
                lo_feasible: false,
                hi_feasible: false,
            });
        }
    }
    let mut lo = hi / 2.0;
    while synthesis::is_feasible(model, lo) {
        hi = lo;
        lo /= 2.0;
        if lo < 1e-12 {
            return Err(Error::NoBracket {
                lo,
                hi,
                lo_feasible: true,
                hi_feasible: true,
            });
        }
    }
    synthesis::critical_gamma(model, lo, hi, tol)
}

/// Four values `1.2·γ*·2ᵏ`, rounded to three significant figures.
pub fn default_gammas(model: &ModelSpec) -> Result<Vec<f64>> {
    let crit = locate_critical_gamma(model, 1e-6)?;
    Ok((0..4)
        .map(|k| round_sig(crit.gamma * 1.2 * 2f64.powi(k), 3))
        .collect())
}

/// Mean of `x̄_t` over runs, `t = 1..=T+1`.
pub fn mean_field_path(records: &[TrajectoryRecord]) -> Vec<DVector<f64>> {
    average_series(records, |r| &r.x_bar)
}

pub fn leader_path(records: &[TrajectoryRecord]) -> Vec<DVector<f64>> {
    average_series(records, |r| &r.x0)
}

fn average_series(records: &[TrajectoryRecord], f: impl Fn(&TrajectoryRecord) -> &Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let ok: Vec<&TrajectoryRecord> = records.iter().filter(|r| r.failure.is_none()).collect();
    if ok.is_empty() {
        return Vec::new();
    }
    let len = f(ok[0]).len();
    (0..len)
        .map(|k| ok.iter().fold(DVector::zeros(f(ok[0])[k].len()), |acc, r| acc + &f(r)[k]) / ok.len() as f64)
        .collect()
}

/// Root mean square of `series − reference` over time and components.
pub fn detrended_rms(series: &[DVector<f64>], reference: &[DVector<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, b) in series.iter().zip(reference) {
        sum += (a - b).norm_squared();
        count += a.len();
    }
    (sum / count as f64).sqrt()
}

/// Time (1-based, interpolated) after which `|series_t − target_t|_∞` stays
/// within `half_width`. `None` if the last point is outside the band.
pub fn time_to_band(series: &[DVector<f64>], target: &[DVector<f64>], half_width: f64) -> Option<f64> {
    let dist: Vec<f64> = series.iter().zip(target).map(|(a, b)| (a - b).amax()).collect();
    let last_out = dist.iter().rposition(|&d| d > half_width);
    match last_out {
        None => Some(1.0),
        Some(k) if k + 1 == dist.len() => None,
        Some(k) => {
            let (d0, d1) = (dist[k], dist[k + 1]);
            Some((k + 1) as f64 + (d0 - half_width) / (d0 - d1))
        }
    }
}

#[derive(Debug, Clone)]
pub struct GammaRun {
    pub row: SummaryRow,
    pub ric: RiccatiSolution,
    pub gains: Option<StrategyGains>,
    pub records: Vec<TrajectoryRecord>,
}

/// Solves at `gamma` and, if feasible, simulates with `cfg`.
pub fn run_gamma(model: &ModelSpec, gamma: f64, cfg: &SimConfig) -> Result<GammaRun> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidGamma(gamma));
    }
    let m = model.with_gamma(gamma);
    let ric = synthesis::solve_riccati(&m);
    let mut row = SummaryRow {
        gamma,
        feasible: ric.feasible,
        min_margin: ric.min_margin(),
        first_violation: ric.first_violation.or(ric.singular_at),
        runs: cfg.num_runs,
        ..Default::default()
    };
    if !ric.feasible {
        warn!("gamma {gamma} infeasible at t={}", row.first_violation.unwrap_or(0));
        return Ok(GammaRun {
            row,
            ric,
            gains: None,
            records: Vec::new(),
        });
    }
    let gains = synthesis::compute_gains(&m, &ric)?;
    row.optimal_value = Some(synthesis::optimal_value(&m, &ric)?);
    let records = sim::simulate(&m, &gains, cfg)?;
    let cost = sim::evaluate_cost(&m, &records)?;
    row.failed_runs = cost.failed_runs;
    if !cost.per_run.is_empty() {
        row.cost_mean = Some(cost.mean);
        row.cost_stderr = Some(cost.stderr);
    }
    let xb = mean_field_path(&records);
    let x0 = leader_path(&records);
    row.final_mean_field = xb.last().map(|v| v[0]);
    row.final_leader = x0.last().map(|v| v[0]);
    row.time_to_band = time_to_band(&xb, &x0, BAND_HALF_WIDTH);
    Ok(GammaRun {
        row,
        ric,
        gains: Some(gains),
        records,
    })
}

/// Runs every γ in order and fills in the detrended RMS against the
/// near-disturbance-free reference `γ = 10⁹` under the same seed.
pub fn gamma_sweep(model: &ModelSpec, gammas: &[f64], cfg: &SimConfig) -> Result<Vec<GammaRun>> {
    if gammas.is_empty() {
        return Err(Error::Empty("gamma list"));
    }
    let reference = run_gamma(model, REFERENCE_GAMMA, cfg)?;
    let ref_path = mean_field_path(&reference.records);
    let mut out = Vec::with_capacity(gammas.len());
    for &g in gammas {
        info!("gamma {g}");
        let mut run = run_gamma(model, g, cfg)?;
        if run.row.feasible && !ref_path.is_empty() {
            run.row.detrended_rms = Some(detrended_rms(&mean_field_path(&run.records), &ref_path));
        }
        out.push(run);
    }
    Ok(out)
}

/// Writes `trajectories_gamma_<γ>.csv` per feasible γ, the Riccati table(s),
/// `summary.csv` and `report.txt`. Returns the written paths.
pub fn write_sweep(out_dir: &Path, model: &ModelSpec, runs: &[GammaRun], header: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for run in runs {
        let label = report::gamma_label(run.row.gamma);
        if run.row.feasible {
            let path = out_dir.join(format!("trajectories_gamma_{label}.csv"));
            report::write_trajectories(&path, &model.with_gamma(run.row.gamma), &run.records)?;
            written.push(path);
        }
        let path = if runs.len() == 1 {
            out_dir.join("riccati.csv")
        } else {
            out_dir.join(format!("riccati_gamma_{label}.csv"))
        };
        report::write_riccati(&path, &run.ric, run.gains.as_ref())?;
        written.push(path);
    }
    let rows: Vec<SummaryRow> = runs.iter().map(|r| r.row.clone()).collect();
    let path = out_dir.join("summary.csv");
    report::write_summary(&path, &rows)?;
    written.push(path);
    let path = out_dir.join("report.txt");
    fs::write(&path, format!("{header}\n{}", report::summary_text(&rows)))?;
    written.push(path);
    Ok(written)
}

/// The two bundled examples with their own disturbance and full state retention.
pub fn example_setup(which: u8, seed: u64, runs: usize) -> Result<(LoadedConfig, SimConfig)> {
    let name = match which {
        1 => "example1",
        2 => "example2",
        other => return Err(Error::Config(format!("no example {other}; choose 1 or 2"))),
    };
    let loaded = load_config(name)?;
    let mut cfg = SimConfig::new(seed, runs);
    cfg.retain_full_states = true;
    cfg.disturbance = loaded.disturbance.clone();
    Ok((loaded, cfg))
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub equivalence: EquivalenceReport,
    pub saddle: Option<SaddleReport>,
    pub infeasible: bool,
    pub passed: bool,
}

pub const VERIFY_REL_TOL: f64 = 1e-8;

/// Noise-free instance with `n` followers whose initial states are drawn
/// once from the model's distribution with `seed`.
pub fn verification_instance(model: &ModelSpec, n: usize, seed: u64) -> Result<ModelSpec> {
    let m = match &model.follower_init {
        model::FollowerInit::Deterministic(s) if s.len() == n => model.clone(),
        model::FollowerInit::Deterministic(_) => {
            return Err(Error::Config(format!(
                "config lists explicit initial states; n must equal {}",
                model.n_followers
            )))
        }
        _ => model.with_followers(n)?,
    };
    if m.is_noise_free() {
        return Ok(m);
    }
    let (x0, xs) = sim::sample_initial_states(&m, seed, 0);
    Ok(m.with_deterministic_start(x0, xs))
}

/// Stacked-oracle equivalence plus the perturbation saddle check.
pub fn verify(model: &ModelSpec, directions: usize, seed: u64, corrupt_gains: bool) -> Result<VerifyOutcome> {
    let equivalence = oracle::equivalence_check(model)?;
    if !(equivalence.oracle_feasible && equivalence.synthesis_feasible) {
        let agree = equivalence.oracle_feasible == equivalence.synthesis_feasible;
        return Ok(VerifyOutcome {
            equivalence,
            saddle: None,
            infeasible: agree,
            passed: false,
        });
    }
    let mut gains = synthesis::compute_gains(model, &synthesis::solve_riccati(model))?;
    if corrupt_gains {
        for l in &mut gains.l_brev {
            *l = -l.clone();
        }
    }
    let saddle = oracle::saddle_check(model, &gains, directions, &oracle::DEFAULT_STEPS, seed)?;
    let passed = equivalence.passed(VERIFY_REL_TOL) && saddle.passed(VERIFY_REL_TOL);
    Ok(VerifyOutcome {
        equivalence,
        saddle: Some(saddle),
        infeasible: false,
        passed,
    })
}

pub fn gap_study(
    model: &ModelSpec,
    n_list: &[usize],
    schedule: &InfoStructure,
    seed: u64,
    runs: usize,
) -> Result<Vec<GapRow>> {
    oracle::imfs_gap_study(model, n_list, schedule, seed, runs)
}

/// Parses `1.5,2,3` style lists.
pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| Error::Config(format!("bad {what} '{p}'"))))
        .collect()
}
