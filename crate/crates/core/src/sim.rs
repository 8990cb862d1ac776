//! Seeded Monte Carlo simulation of the leader and `n` followers, and
//! empirical evaluation of the social cost.
//!
//! Every random draw comes from a ChaCha stream keyed by
//! `(seed, run, t, agent)`, with `t = 0` for initial states and agent 0 for the
//! leader. Results therefore do not depend on how runs are scheduled.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{FollowerInit, InfoStructure, ModelSpec};
use crate::strategy::{EstimatorDisturbance, PolicyState};
use crate::synthesis::StrategyGains;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisturbanceTarget {
    Followers,
    Leader,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DisturbancePolicy {
    Zero,
    /// `a·sin(t)` on every state component, identical across followers.
    Sinusoid {
        amplitude: f64,
        target: DisturbanceTarget,
    },
    /// Worst-case feedback from the policy's own view of the mean field.
    WorstCaseFeedback,
    /// Explicit per-step values; `followers[t-1]` is applied to every follower.
    Table {
        leader: Vec<DVector<f64>>,
        followers: Vec<DVector<f64>>,
    },
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub seed: u64,
    pub num_runs: usize,
    pub retain_full_states: bool,
    pub disturbance: DisturbancePolicy,
    pub info: InfoStructure,
    pub estimator: EstimatorDisturbance,
}

impl SimConfig {
    pub fn new(seed: u64, num_runs: usize) -> SimConfig {
        SimConfig {
            seed,
            num_runs,
            retain_full_states: false,
            disturbance: DisturbancePolicy::Zero,
            info: InfoStructure::Mfs,
            estimator: EstimatorDisturbance::WorstCase,
        }
    }
}

/// Follower averages needed to evaluate the cost without keeping every state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageStats {
    /// `(1/n) Σ xⁱᵀ Q xⁱ`
    pub state_cost: f64,
    /// `(1/n) Σ uⁱᵀ R uⁱ`
    pub action_cost: f64,
    /// `(1/n) Σ dⁱᵀ dⁱ`
    pub disturbance_energy: f64,
}

/// Per-follower states (`T + 1` steps), actions and disturbances (`T` steps),
/// indexed `[t - 1][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerTrace {
    pub x: Vec<Vec<DVector<f64>>>,
    pub u: Vec<Vec<DVector<f64>>>,
    pub d: Vec<Vec<DVector<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub run: usize,
    pub x0: Vec<DVector<f64>>,
    pub x_bar: Vec<DVector<f64>>,
    pub m_hat: Vec<DVector<f64>>,
    pub u0: Vec<DVector<f64>>,
    pub u_bar: Vec<DVector<f64>>,
    pub d0: Vec<DVector<f64>>,
    pub d_bar: Vec<DVector<f64>>,
    pub stats: Vec<StageStats>,
    pub followers: Option<FollowerTrace>,
    /// Set when the run produced non-finite values; the record stops there.
    pub failure: Option<String>,
}

pub fn substream(seed: u64, run: usize, t: usize, agent: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(run as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(t as u64).to_le_bytes());
    key[24..32].copy_from_slice(&(agent as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn gaussian(rng: &mut ChaCha8Rng, factor: &DMatrix<f64>) -> DVector<f64> {
    let z = DVector::from_fn(factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    factor * z
}

/// Noise factors per step, `None` where the covariance is zero.
fn noise_factors(covs: &[DMatrix<f64>]) -> Vec<Option<DMatrix<f64>>> {
    covs.iter()
        .map(|c| (c.amax() > 0.0).then(|| linalg::psd_factor(c)))
        .collect()
}

pub fn sample_initial_states(model: &ModelSpec, seed: u64, run: usize) -> (DVector<f64>, Vec<DVector<f64>>) {
    let li = &model.leader_init;
    let x0 = if li.is_deterministic() {
        li.mean.clone()
    } else {
        &li.mean + gaussian(&mut substream(seed, run, 0, 0), &linalg::psd_factor(&li.cov))
    };
    let n = model.n_followers;
    let followers = match &model.follower_init {
        FollowerInit::Deterministic(states) => states.clone(),
        FollowerInit::Uniform { low, high } => (1..=n)
            .map(|i| {
                let mut rng = substream(seed, run, 0, i);
                DVector::from_fn(low.len(), |k, _| low[k] + (high[k] - low[k]) * rng.random::<f64>())
            })
            .collect(),
        FollowerInit::Gaussian { mean, cov } => {
            let factor = linalg::psd_factor(cov);
            (1..=n)
                .map(|i| mean + gaussian(&mut substream(seed, run, 0, i), &factor))
                .collect()
        }
    };
    (x0, followers)
}

fn mean_of(xs: &[DVector<f64>]) -> DVector<f64> {
    let mut m = DVector::zeros(xs[0].len());
    for x in xs {
        m += x;
    }
    m / xs.len() as f64
}

fn finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Square-root factors of the leader and follower noise covariances per stage.
type NoiseFactors = (Vec<Option<DMatrix<f64>>>, Vec<Option<DMatrix<f64>>>);

fn simulate_run(
    model: &ModelSpec,
    gains: &StrategyGains,
    cfg: &SimConfig,
    run: usize,
    factors: &NoiseFactors,
) -> TrajectoryRecord {
    let (horizon, n, dx) = (model.horizon, model.n_followers, model.state_dim);
    let nf = n as f64;
    let (leader_factors, follower_factors) = factors;

    let (mut x0, mut xs) = sample_initial_states(model, cfg.seed, run);
    let mut x_bar = mean_of(&xs);
    let mut policy = PolicyState::new(model, gains, cfg.info.clone(), cfg.estimator, &x_bar);

    let mut rec = TrajectoryRecord {
        run,
        x0: vec![x0.clone()],
        x_bar: vec![x_bar.clone()],
        m_hat: Vec::with_capacity(horizon),
        u0: Vec::with_capacity(horizon),
        u_bar: Vec::with_capacity(horizon),
        d0: Vec::with_capacity(horizon),
        d_bar: Vec::with_capacity(horizon),
        stats: Vec::with_capacity(horizon),
        followers: cfg.retain_full_states.then(|| FollowerTrace {
            x: vec![xs.clone()],
            u: Vec::with_capacity(horizon),
            d: Vec::with_capacity(horizon),
        }),
        failure: None,
    };

    for t in 1..=horizon {
        let k = t - 1;
        rec.m_hat.push(policy.m_hat.clone());

        let u0 = policy.leader_action(&x0);
        let u_offset = policy.follower_offset(&x0);

        // Leader disturbance, plus a common follower term and an optional
        // per-follower feedback gain applied to xⁱ − m̂.
        let zero = DVector::zeros(dx);
        let (d0, d_common, d_feedback) = match &cfg.disturbance {
            DisturbancePolicy::Zero => (zero.clone(), zero.clone(), None),
            DisturbancePolicy::Sinusoid { amplitude, target } => {
                let d = DVector::from_element(dx, amplitude * (t as f64).sin());
                match target {
                    DisturbanceTarget::Followers => (zero.clone(), d, None),
                    DisturbanceTarget::Leader => (d, zero.clone(), None),
                    DisturbanceTarget::Both => (d.clone(), d, None),
                }
            }
            DisturbancePolicy::WorstCaseFeedback => {
                let (d0, d_bar) = policy.aggregate_disturbance(&x0);
                (d0, d_bar, Some(&gains.k_brev[k]))
            }
            DisturbancePolicy::Table { leader, followers } => {
                (leader[k].clone(), followers[k].clone(), None)
            }
        };

        let f = &model.follower;
        let coupling = &f.s[k] * &x_bar + &f.e[k] * &x0;
        let mut next = Vec::with_capacity(n);
        let mut sum_u = DVector::zeros(model.action_dim);
        let mut sum_d = DVector::zeros(dx);
        let mut stats = StageStats::default();
        let mut us = Vec::new();
        let mut ds = Vec::new();
        for (i, xi) in xs.iter().enumerate() {
            let ui = &gains.l_brev[k] * xi + &u_offset;
            let di = match d_feedback {
                Some(kb) => kb * (xi - &policy.m_hat) + &d_common,
                None => d_common.clone(),
            };
            let mut xn = &f.a[k] * xi + &f.b[k] * &ui + &coupling + &di;
            if let Some(l) = &follower_factors[k] {
                xn += gaussian(&mut substream(cfg.seed, run, t, i + 1), l);
            }
            stats.state_cost += xi.dot(&(&model.cost.q[k] * xi));
            stats.action_cost += ui.dot(&(&model.cost.r[k] * &ui));
            stats.disturbance_energy += di.norm_squared();
            sum_u += &ui;
            sum_d += &di;
            if cfg.retain_full_states {
                us.push(ui);
                ds.push(di);
            }
            next.push(xn);
        }
        stats.state_cost /= nf;
        stats.action_cost /= nf;
        stats.disturbance_energy /= nf;

        let l = &model.leader;
        let mut x0_next = &l.a[k] * &x0 + &l.b[k] * &u0 + &l.s[k] * &x_bar + &d0;
        if let Some(lf) = &leader_factors[k] {
            x0_next += gaussian(&mut substream(cfg.seed, run, t, 0), lf);
        }
        let x_bar_next = mean_of(&next);

        rec.u0.push(u0);
        rec.u_bar.push(sum_u / nf);
        rec.d0.push(d0);
        rec.d_bar.push(sum_d / nf);
        rec.stats.push(stats);
        rec.x0.push(x0_next.clone());
        rec.x_bar.push(x_bar_next.clone());
        if let Some(tr) = rec.followers.as_mut() {
            tr.x.push(next.clone());
            tr.u.push(us);
            tr.d.push(ds);
        }

        if !finite(&x0_next) || !finite(&x_bar_next) {
            rec.failure = Some(format!("non-finite state at t={}", t + 1));
            return rec;
        }

        if t < horizon {
            let observed = cfg.info.observes(t + 1).then_some(&x_bar_next);
            policy.estimator_step(&x0, observed);
        }
        x0 = x0_next;
        xs = next;
        x_bar = x_bar_next;
    }
    rec
}

/// Runs `cfg.num_runs` independent trajectories, in parallel on the current
/// rayon pool. Output is ordered by run index.
pub fn simulate(model: &ModelSpec, gains: &StrategyGains, cfg: &SimConfig) -> Result<Vec<TrajectoryRecord>> {
    if cfg.num_runs == 0 {
        return Err(Error::Precondition("num_runs must be >= 1".into()));
    }
    if gains.horizon() < model.horizon {
        return Err(Error::Precondition(format!(
            "gains cover {} steps, model horizon is {}",
            gains.horizon(),
            model.horizon
        )));
    }
    if let DisturbancePolicy::Table { leader, followers } = &cfg.disturbance {
        if leader.len() < model.horizon || followers.len() < model.horizon {
            return Err(Error::Precondition("disturbance table shorter than horizon".into()));
        }
    }
    let factors = (
        noise_factors(&model.noise.leader_cov),
        noise_factors(&model.noise.follower_cov),
    );
    Ok((0..cfg.num_runs)
        .into_par_iter()
        .map(|run| simulate_run(model, gains, cfg, run, &factors))
        .collect())
}

/// Bracketed stage cost of the social cost function at time `t` for explicit
/// per-agent states, actions and disturbances.
#[allow(clippy::too_many_arguments)]
pub fn stage_cost_full(
    model: &ModelSpec,
    t: usize,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    d0: &DVector<f64>,
    xs: &[DVector<f64>],
    us: &[DVector<f64>],
    ds: &[DVector<f64>],
) -> f64 {
    let k = t - 1;
    let c = &model.cost;
    let g2 = model.gamma * model.gamma;
    let n = xs.len() as f64;
    let mut per_follower = 0.0;
    for ((x, u), d) in xs.iter().zip(us).zip(ds) {
        per_follower += x.dot(&(&c.q[k] * x)) + u.dot(&(&c.r[k] * u)) - g2 * d.norm_squared();
    }
    let x_bar = mean_of(xs);
    let u_bar = mean_of(us);
    let gap = &x_bar - x0;
    per_follower / n + x0.dot(&(&c.q0[k] * x0)) + u0.dot(&(&c.r0[k] * u0)) - g2 * d0.norm_squared()
        + gap.dot(&(&c.f[k] * &gap))
        + x_bar.dot(&(&c.p[k] * &x_bar))
        + u_bar.dot(&(&c.h[k] * &u_bar))
}

/// Stage costs `t = 1..=T` of one record.
pub fn stage_costs(model: &ModelSpec, rec: &TrajectoryRecord) -> Result<Vec<f64>> {
    let steps = rec.u0.len();
    if rec.failure.is_some() {
        return Err(Error::InsufficientData { run: rec.run });
    }
    if let Some(tr) = &rec.followers {
        if tr.u.len() == steps && tr.x.len() > steps {
            return Ok((1..=steps)
                .map(|t| {
                    let k = t - 1;
                    stage_cost_full(model, t, &rec.x0[k], &rec.u0[k], &rec.d0[k], &tr.x[k], &tr.u[k], &tr.d[k])
                })
                .collect());
        }
    }
    if rec.stats.len() != steps || steps == 0 {
        return Err(Error::InsufficientData { run: rec.run });
    }
    let c = &model.cost;
    let g2 = model.gamma * model.gamma;
    Ok((0..steps)
        .map(|k| {
            let s = &rec.stats[k];
            let (x0, u0, d0) = (&rec.x0[k], &rec.u0[k], &rec.d0[k]);
            let (xb, ub) = (&rec.x_bar[k], &rec.u_bar[k]);
            let gap = xb - x0;
            s.state_cost + s.action_cost - g2 * s.disturbance_energy
                + x0.dot(&(&c.q0[k] * x0))
                + u0.dot(&(&c.r0[k] * u0))
                - g2 * d0.norm_squared()
                + gap.dot(&(&c.f[k] * &gap))
                + xb.dot(&(&c.p[k] * xb))
                + ub.dot(&(&c.h[k] * ub))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSummary {
    /// Total cost of each successful run, in record order.
    pub per_run: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
    pub failed_runs: usize,
}

/// Total realized cost per run, with its Monte Carlo mean and standard error.
/// Failed runs are counted and left out.
pub fn evaluate_cost(model: &ModelSpec, records: &[TrajectoryRecord]) -> Result<CostSummary> {
    let mut per_run = Vec::with_capacity(records.len());
    let mut failed_runs = 0;
    for rec in records {
        if rec.failure.is_some() {
            failed_runs += 1;
            continue;
        }
        per_run.push(stage_costs(model, rec)?.iter().sum());
    }
    let (mean, stderr) = mean_stderr(&per_run);
    Ok(CostSummary {
        per_run,
        mean,
        stderr,
        failed_runs,
    })
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
