//! Brute-force verification on the joint state `[x⁰; x¹; …; xⁿ]`.
//!
//! [`stacked_saddle_solve`] runs the soft-constrained Isaacs recursion on the
//! full joint system, with no mean/deviation split, so agreement with
//! [`crate::synthesis`] is an independent check. [`saddle_check`] perturbs
//! gains around a candidate saddle point and records the cost changes.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{FollowerInit, InfoStructure, ModelSpec};
use crate::sim::{self, DisturbancePolicy, SimConfig};
use crate::strategy::EstimatorDisturbance;
use crate::synthesis::{self, StrategyGains, FEASIBILITY_MARGIN};

pub const MAX_ORACLE_FOLLOWERS: usize = 4;

/// Joint dynamics `X' = 𝒜X + ℬU + D + W` and stage cost
/// `Xᵀ𝒬X + Uᵀℛ U − γ² Dᵀ𝒢 D`, per step.
#[derive(Debug, Clone)]
pub struct StackedProblem {
    pub n: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    pub gamma: f64,
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    pub q: Vec<DMatrix<f64>>,
    pub r: Vec<DMatrix<f64>>,
    /// Disturbance weight `blockdiag(I, I/n, …, I/n)`.
    pub g: DMatrix<f64>,
    pub noise: Vec<DMatrix<f64>>,
}

/// `rows × (blocks·rows)` matrix picking block `k`, scaled by `s`.
fn pick(rows: usize, blocks: usize, k: usize, s: f64) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(rows, rows * blocks);
    for j in 0..rows {
        p[(j, k * rows + j)] = s;
    }
    p
}

fn quad(p: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    p.transpose() * w * p
}

impl StackedProblem {
    pub fn new(model: &ModelSpec) -> Result<StackedProblem> {
        let n = model.n_followers;
        if n == 0 {
            return Err(Error::Empty("followers"));
        }
        if n > MAX_ORACLE_FOLLOWERS {
            return Err(Error::OracleTooLarge {
                n,
                max: MAX_ORACLE_FOLLOWERS,
            });
        }
        let (dx, du) = (model.state_dim, model.action_dim);
        let agents = n + 1;
        let nf = n as f64;
        let (big_x, big_u) = (agents * dx, agents * du);
        let x_bar = (1..=n).fold(DMatrix::zeros(dx, big_x), |acc, i| acc + pick(dx, agents, i, 1.0 / nf));
        let u_bar = (1..=n).fold(DMatrix::zeros(du, big_u), |acc, i| acc + pick(du, agents, i, 1.0 / nf));
        let gap = &x_bar - pick(dx, agents, 0, 1.0);

        let mut out = StackedProblem {
            n,
            state_dim: dx,
            action_dim: du,
            gamma: model.gamma,
            a: Vec::new(),
            b: Vec::new(),
            q: Vec::new(),
            r: Vec::new(),
            g: DMatrix::identity(big_x, big_x),
            noise: Vec::new(),
        };
        for i in dx..big_x {
            out.g[(i, i)] = 1.0 / nf;
        }
        for k in 0..model.horizon {
            let (l, f, c) = (&model.leader, &model.follower, &model.cost);
            let mut a = DMatrix::zeros(big_x, big_x);
            let mut b = DMatrix::zeros(big_x, big_u);
            let mut w = DMatrix::zeros(big_x, big_x);
            a.view_mut((0, 0), (dx, dx)).copy_from(&l.a[k]);
            b.view_mut((0, 0), (dx, du)).copy_from(&l.b[k]);
            w.view_mut((0, 0), (dx, dx)).copy_from(&model.noise.leader_cov[k]);
            for j in 1..=n {
                a.view_mut((0, j * dx), (dx, dx)).copy_from(&(&l.s[k] / nf));
            }
            for i in 1..=n {
                a.view_mut((i * dx, 0), (dx, dx)).copy_from(&f.e[k]);
                for j in 1..=n {
                    let mut blk = &f.s[k] / nf;
                    if i == j {
                        blk += &f.a[k];
                    }
                    a.view_mut((i * dx, j * dx), (dx, dx)).copy_from(&blk);
                }
                b.view_mut((i * dx, i * du), (dx, du)).copy_from(&f.b[k]);
                w.view_mut((i * dx, i * dx), (dx, dx)).copy_from(&model.noise.follower_cov[k]);
            }

            let mut q = quad(&pick(dx, agents, 0, 1.0), &c.q0[k]) + quad(&gap, &c.f[k]) + quad(&x_bar, &c.p[k]);
            let mut r = quad(&pick(du, agents, 0, 1.0), &c.r0[k]) + quad(&u_bar, &c.h[k]);
            for i in 1..=n {
                q += quad(&pick(dx, agents, i, 1.0), &c.q[k]) / nf;
                r += quad(&pick(du, agents, i, 1.0), &c.r[k]) / nf;
            }
            linalg::symmetrize(&mut q);
            linalg::symmetrize(&mut r);
            out.a.push(a);
            out.b.push(b);
            out.q.push(q);
            out.r.push(r);
            out.noise.push(w);
        }
        Ok(out)
    }

    pub fn horizon(&self) -> usize {
        self.a.len()
    }

    pub fn joint_dim(&self) -> usize {
        (self.n + 1) * self.state_dim
    }

    /// Stage cost at step `t` for joint state, action and disturbance.
    pub fn stage_cost(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>, d: &DVector<f64>) -> f64 {
        let k = t - 1;
        x.dot(&(&self.q[k] * x)) + u.dot(&(&self.r[k] * u)) - self.gamma * self.gamma * d.dot(&(&self.g * d))
    }

    /// Mean and second moment `E[XXᵀ]` of the joint initial state.
    pub fn initial_moments(&self, model: &ModelSpec) -> (DVector<f64>, DMatrix<f64>) {
        let dx = self.state_dim;
        let big = self.joint_dim();
        let mut mean = DVector::zeros(big);
        let mut cov = DMatrix::zeros(big, big);
        mean.rows_mut(0, dx).copy_from(&model.leader_init.mean);
        cov.view_mut((0, 0), (dx, dx)).copy_from(&model.leader_init.cov);
        for i in 1..=self.n {
            match &model.follower_init {
                FollowerInit::Deterministic(states) => mean.rows_mut(i * dx, dx).copy_from(&states[i - 1]),
                init => {
                    mean.rows_mut(i * dx, dx).copy_from(&init.mean());
                    cov.view_mut((i * dx, i * dx), (dx, dx)).copy_from(&init.cov());
                }
            }
        }
        let second = cov + &mean * mean.transpose();
        (mean, second)
    }
}

#[derive(Debug, Clone)]
pub struct StackedSolution {
    pub problem: StackedProblem,
    /// Value matrices `Z_1..Z_{T+1}`.
    pub z: Vec<DMatrix<f64>>,
    /// Noise constants `c_1..c_{T+1}`.
    pub c: Vec<f64>,
    /// Joint control gains `U = Γᵘ_t X`.
    pub control_gain: Vec<DMatrix<f64>>,
    /// Joint disturbance gains `D = Γᵈ_t X`.
    pub disturbance_gain: Vec<DMatrix<f64>>,
    /// Smallest eigenvalue of the control Hessian block per step.
    pub control_curvature: Vec<f64>,
    /// `γ² − λmax(𝒢^{-1/2} Z_{t+1} 𝒢^{-1/2})` per step; positive means the
    /// disturbance block is negative definite.
    pub disturbance_margin: Vec<f64>,
    pub feasible: bool,
    /// Largest `t` at which the Hessian signature fails. The recursion stops there.
    pub violation_at: Option<usize>,
    /// Value at the model's initial moments; NaN when infeasible.
    pub value: f64,
}

impl StackedSolution {
    pub fn value_at(&self, second_moment: &DMatrix<f64>) -> f64 {
        (&self.z[0] * second_moment).trace() + self.c[0]
    }
}

/// Isaacs recursion on the joint state of `n` followers and the leader.
pub fn stacked_saddle_solve(model: &ModelSpec, n: usize) -> Result<StackedSolution> {
    let model = if model.n_followers == n {
        model.clone()
    } else {
        model.with_followers(n)?
    };
    let p = StackedProblem::new(&model)?;
    let t_len = p.horizon();
    let big_x = p.joint_dim();
    let big_u = (p.n + 1) * p.action_dim;
    let g2 = p.gamma * p.gamma;
    let g_inv_sqrt = DMatrix::from_diagonal(&p.g.diagonal().map(|v| 1.0 / v.sqrt()));

    let mut z = vec![DMatrix::zeros(big_x, big_x); t_len + 1];
    let mut c = vec![0.0; t_len + 1];
    let mut control_gain = vec![DMatrix::from_element(big_u, big_x, f64::NAN); t_len];
    let mut disturbance_gain = vec![DMatrix::from_element(big_x, big_x, f64::NAN); t_len];
    let mut control_curvature = vec![f64::NAN; t_len];
    let mut disturbance_margin = vec![f64::NAN; t_len];
    let mut violation_at = None;

    for t in (1..=t_len).rev() {
        let k = t - 1;
        let zn = &z[t];
        let b = &p.b[k];
        let ctrl = &p.r[k] + b.transpose() * zn * b;
        let dist = zn - &p.g * g2;
        control_curvature[k] = linalg::min_eigenvalue(&ctrl);
        disturbance_margin[k] = -linalg::max_eigenvalue(&(&g_inv_sqrt * &dist * &g_inv_sqrt));
        if control_curvature[k] <= FEASIBILITY_MARGIN || disturbance_margin[k] <= FEASIBILITY_MARGIN {
            violation_at = Some(t);
            break;
        }

        // Stationarity of the stage quadratic in v = [U; D].
        let gm = {
            let mut gm = DMatrix::zeros(big_x, big_u + big_x);
            gm.view_mut((0, 0), (big_x, big_u)).copy_from(b);
            gm.view_mut((0, big_u), (big_x, big_x)).copy_from(&DMatrix::identity(big_x, big_x));
            gm
        };
        let mut weight = DMatrix::zeros(big_u + big_x, big_u + big_x);
        weight.view_mut((0, 0), (big_u, big_u)).copy_from(&p.r[k]);
        weight
            .view_mut((big_u, big_u), (big_x, big_x))
            .copy_from(&(&p.g * -g2));
        let hess = &weight + gm.transpose() * zn * &gm;
        let rhs = -(gm.transpose() * zn * &p.a[k]);
        let Some(gain) = hess.lu().solve(&rhs) else {
            violation_at = Some(t);
            break;
        };

        let closed = &p.a[k] + &gm * &gain;
        let mut zt = &p.q[k] + closed.transpose() * zn * &closed + gain.transpose() * &weight * &gain;
        linalg::symmetrize(&mut zt);
        c[k] = c[t] + (zn * &p.noise[k]).trace();
        z[k] = zt;
        control_gain[k] = gain.rows(0, big_u).clone_owned();
        disturbance_gain[k] = gain.rows(big_u, big_x).clone_owned();
    }

    let feasible = violation_at.is_none();
    let mut sol = StackedSolution {
        problem: p,
        z,
        c,
        control_gain,
        disturbance_gain,
        control_curvature,
        disturbance_margin,
        feasible,
        violation_at,
        value: f64::NAN,
    };
    if feasible {
        let (_, second) = sol.problem.initial_moments(&model);
        sol.value = sol.value_at(&second);
    }
    Ok(sol)
}

/// The decomposed strategy written as joint gain matrices, assuming the
/// mean field is observed (`m̂ = x̄`).
pub fn joint_gains(model: &ModelSpec, gains: &StrategyGains, t: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, dx, du) = (model.n_followers, model.state_dim, model.action_dim);
    let agents = n + 1;
    let nf = n as f64;
    let k = t - 1;
    let (lb, kb) = (&gains.l_brev[k], &gains.k_brev[k]);
    let kbar = &gains.k_bar[k];
    let kblk = |r: usize, c: usize| kbar.view((r * dx, c * dx), (dx, dx)).clone_owned();

    let mut u = DMatrix::zeros(agents * du, agents * dx);
    let mut d = DMatrix::zeros(agents * dx, agents * dx);
    u.view_mut((0, 0), (du, dx)).copy_from(&gains.l11(t));
    d.view_mut((0, 0), (dx, dx)).copy_from(&kblk(0, 0));
    for j in 1..=n {
        u.view_mut((0, j * dx), (du, dx)).copy_from(&(gains.l12(t) / nf));
        d.view_mut((0, j * dx), (dx, dx)).copy_from(&(kblk(0, 1) / nf));
    }
    let u_mean = (gains.l22(t) - lb) / nf;
    let d_mean = (kblk(1, 1) - kb) / nf;
    for i in 1..=n {
        u.view_mut((i * du, 0), (du, dx)).copy_from(&gains.l21(t));
        d.view_mut((i * dx, 0), (dx, dx)).copy_from(&kblk(1, 0));
        for j in 1..=n {
            let (mut ub, mut db) = (u_mean.clone(), d_mean.clone());
            if i == j {
                ub += lb;
                db += kb;
            }
            u.view_mut((i * du, j * dx), (du, dx)).copy_from(&ub);
            d.view_mut((i * dx, j * dx), (dx, dx)).copy_from(&db);
        }
    }
    (u, d)
}

/// Noise-free closed-loop rollout under joint feedback gains. Returns the
/// states `X_1..X_{T+1}` and the total cost.
pub fn rollout(
    p: &StackedProblem,
    control_gain: &[DMatrix<f64>],
    disturbance_gain: &[DMatrix<f64>],
    x1: &DVector<f64>,
) -> (Vec<DVector<f64>>, f64) {
    let mut xs = vec![x1.clone()];
    let mut cost = 0.0;
    for t in 1..=p.horizon() {
        let k = t - 1;
        let x = &xs[k];
        let u = &control_gain[k] * x;
        let d = &disturbance_gain[k] * x;
        cost += p.stage_cost(t, x, &u, &d);
        let next = &p.a[k] * x + &p.b[k] * &u + &d;
        xs.push(next);
    }
    (xs, cost)
}

/// Oracle against decomposed solution on one noise-free instance.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub n: usize,
    pub oracle_feasible: bool,
    pub synthesis_feasible: bool,
    pub oracle_value: f64,
    pub decomposed_value: f64,
    /// `|J_oracle − J_decomposed| / max(|J_oracle|, 1)`.
    pub value_rel_gap: f64,
    /// Largest state difference between the oracle closed loop and the
    /// simulated decomposed strategy, over `max(max |X|, 1)`.
    pub trajectory_rel_gap: f64,
    pub max_gain_discrepancy: f64,
}

impl EquivalenceReport {
    pub fn passed(&self, rel_tol: f64) -> bool {
        self.oracle_feasible
            && self.synthesis_feasible
            && self.value_rel_gap <= rel_tol
            && self.trajectory_rel_gap <= rel_tol
    }
}

/// Solves `model` both ways and compares values, gains and the closed-loop
/// trajectory produced by [`sim::simulate`] under worst-case feedback
/// disturbances. Needs deterministic initial states and zero noise.
pub fn equivalence_check(model: &ModelSpec) -> Result<EquivalenceReport> {
    if !model.is_noise_free() {
        return Err(Error::Precondition(
            "equivalence check needs zero noise and deterministic initial states".into(),
        ));
    }
    let n = model.n_followers;
    let oracle = stacked_saddle_solve(model, n)?;
    let ric = synthesis::solve_riccati(model);
    let mut rep = EquivalenceReport {
        n,
        oracle_feasible: oracle.feasible,
        synthesis_feasible: ric.feasible,
        oracle_value: oracle.value,
        decomposed_value: f64::NAN,
        value_rel_gap: f64::NAN,
        trajectory_rel_gap: f64::NAN,
        max_gain_discrepancy: f64::NAN,
    };
    if !(oracle.feasible && ric.feasible) {
        return Ok(rep);
    }
    let gains = synthesis::compute_gains(model, &ric)?;
    rep.decomposed_value = synthesis::optimal_value(model, &ric)?;
    rep.value_rel_gap = (oracle.value - rep.decomposed_value).abs() / oracle.value.abs().max(1.0);

    let mut gain_gap = 0.0f64;
    for t in 1..=model.horizon {
        let (u, d) = joint_gains(model, &gains, t);
        gain_gap = gain_gap
            .max((&oracle.control_gain[t - 1] - u).amax())
            .max((&oracle.disturbance_gain[t - 1] - d).amax());
    }
    rep.max_gain_discrepancy = gain_gap;

    let p = &oracle.problem;
    let (x1, _) = p.initial_moments(model);
    let (joint, _) = rollout(p, &oracle.control_gain, &oracle.disturbance_gain, &x1);
    let mut cfg = SimConfig::new(0, 1);
    cfg.retain_full_states = true;
    cfg.disturbance = DisturbancePolicy::WorstCaseFeedback;
    let rec = sim::simulate(model, &gains, &cfg)?.remove(0);
    let trace = rec
        .followers
        .as_ref()
        .ok_or(Error::InsufficientData { run: rec.run })?;
    let dx = model.state_dim;
    let mut worst = 0.0f64;
    let mut scale = 1.0f64;
    for (k, x) in joint.iter().enumerate() {
        scale = scale.max(x.amax());
        worst = worst.max((x.rows(0, dx) - &rec.x0[k]).amax());
        for (i, xi) in trace.x[k].iter().enumerate() {
            worst = worst.max((x.rows((i + 1) * dx, dx) - xi).amax());
        }
    }
    rep.trajectory_rel_gap = worst / scale;
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Control,
    Disturbance,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Control => "control",
            Side::Disturbance => "disturbance",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub side: Side,
    pub direction: usize,
    pub step: f64,
    pub delta: f64,
}

impl Perturbation {
    /// Control deltas must be nonnegative, disturbance deltas nonpositive.
    pub fn ok(&self, tol: f64) -> bool {
        match self.side {
            Side::Control => self.delta >= -tol,
            Side::Disturbance => self.delta <= tol,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SaddleReport {
    pub n: usize,
    pub gamma: f64,
    pub oracle_feasible: bool,
    pub synthesis_feasible: bool,
    /// Oracle value, or NaN when the oracle reports infeasible.
    pub oracle_value: f64,
    pub decomposed_value: f64,
    /// Cost of the candidate gains evaluated by forward simulation.
    pub rollout_cost: f64,
    /// `|J_oracle − J_decomposed|`.
    pub value_gap: f64,
    /// Largest absolute entry of the difference between oracle and candidate
    /// joint gains, over all steps.
    pub max_gain_discrepancy: f64,
    pub tolerance: f64,
    pub perturbations: Vec<Perturbation>,
}

impl SaddleReport {
    pub fn control_ok(&self) -> bool {
        self.side_ok(Side::Control)
    }

    pub fn disturbance_ok(&self) -> bool {
        self.side_ok(Side::Disturbance)
    }

    fn side_ok(&self, side: Side) -> bool {
        self.perturbations
            .iter()
            .filter(|p| p.side == side)
            .all(|p| p.ok(self.tolerance))
    }

    pub fn min_control_delta(&self) -> f64 {
        self.extreme(Side::Control, f64::min, f64::INFINITY)
    }

    pub fn max_disturbance_delta(&self) -> f64 {
        self.extreme(Side::Disturbance, f64::max, f64::NEG_INFINITY)
    }

    fn extreme(&self, side: Side, f: fn(f64, f64) -> f64, init: f64) -> f64 {
        self.perturbations
            .iter()
            .filter(|p| p.side == side)
            .map(|p| p.delta)
            .fold(init, f)
    }

    /// Perturbation signs hold and the candidate matches the oracle.
    pub fn passed(&self, rel_tol: f64) -> bool {
        let scale = self.oracle_value.abs().max(1.0);
        self.oracle_feasible
            && self.synthesis_feasible
            && self.control_ok()
            && self.disturbance_ok()
            && self.value_gap <= rel_tol * scale
            && (self.rollout_cost - self.oracle_value).abs() <= rel_tol * scale
    }
}

pub const SADDLE_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_STEPS: [f64; 2] = [1e-3, 1e-2];

fn random_direction(rng: &mut ChaCha8Rng, shape: (usize, usize), steps: usize) -> Vec<DMatrix<f64>> {
    let mut dir: Vec<DMatrix<f64>> = (0..steps)
        .map(|_| DMatrix::from_fn(shape.0, shape.1, |_, _| StandardNormal.sample(rng)))
        .collect();
    let norm = dir.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
    for m in &mut dir {
        *m /= norm;
    }
    dir
}

/// Perturbs the candidate joint gains in `num_directions` random unit
/// directions per side and step size, recording the change in the
/// noise-free cost. Requires deterministic initial states.
pub fn saddle_check(
    model: &ModelSpec,
    gains: &StrategyGains,
    num_directions: usize,
    steps: &[f64],
    seed: u64,
) -> Result<SaddleReport> {
    let n = model.n_followers;
    if !model.leader_init.is_deterministic() || !matches!(model.follower_init, FollowerInit::Deterministic(_)) {
        return Err(Error::Precondition(
            "saddle check needs deterministic initial states".into(),
        ));
    }
    let oracle = stacked_saddle_solve(model, n)?;
    let p = &oracle.problem;
    let ric = synthesis::solve_riccati(model);
    let decomposed_value = synthesis::optimal_value(model, &ric).unwrap_or(f64::NAN);
    let (x1, _) = p.initial_moments(model);

    let (lu, ld): (Vec<_>, Vec<_>) = (1..=model.horizon).map(|t| joint_gains(model, gains, t)).unzip();
    let (_, base) = rollout(p, &lu, &ld, &x1);

    let mut max_gain_discrepancy = 0.0f64;
    if oracle.feasible {
        for k in 0..model.horizon {
            max_gain_discrepancy = max_gain_discrepancy
                .max((&oracle.control_gain[k] - &lu[k]).amax())
                .max((&oracle.disturbance_gain[k] - &ld[k]).amax());
        }
    } else {
        max_gain_discrepancy = f64::NAN;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perturbations = Vec::with_capacity(2 * num_directions * steps.len());
    for side in [Side::Control, Side::Disturbance] {
        let base_gain = if side == Side::Control { &lu } else { &ld };
        for direction in 0..num_directions {
            let dir = random_direction(&mut rng, base_gain[0].shape(), model.horizon);
            for &step in steps {
                let moved: Vec<DMatrix<f64>> = base_gain.iter().zip(&dir).map(|(g, e)| g + e * step).collect();
                let (_, cost) = match side {
                    Side::Control => rollout(p, &moved, &ld, &x1),
                    Side::Disturbance => rollout(p, &lu, &moved, &x1),
                };
                perturbations.push(Perturbation {
                    side,
                    direction,
                    step,
                    delta: cost - base,
                });
            }
        }
    }

    Ok(SaddleReport {
        n,
        gamma: model.gamma,
        oracle_feasible: oracle.feasible,
        synthesis_feasible: ric.feasible,
        oracle_value: oracle.value,
        decomposed_value,
        rollout_cost: base,
        value_gap: (oracle.value - decomposed_value).abs(),
        max_gain_discrepancy,
        tolerance: SADDLE_TOLERANCE,
        perturbations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub n: usize,
    pub mfs_cost: f64,
    pub imfs_cost: f64,
    /// `|mean(J_imfs − J_mfs)|` over paired runs.
    pub gap: f64,
    /// Standard error of the paired mean difference.
    pub stderr: f64,
    pub gap_times_n: f64,
}

/// Paired Monte Carlo comparison of the intermittent-sharing strategy with the
/// full-sharing one, under worst-case feedback disturbances and common random
/// numbers.
pub fn imfs_gap_study(
    model: &ModelSpec,
    n_list: &[usize],
    schedule: &InfoStructure,
    seed: u64,
    runs: usize,
) -> Result<Vec<GapRow>> {
    if n_list.is_empty() {
        return Err(Error::Empty("n list"));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("n list must be strictly ascending".into()));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let m = model.with_followers(n)?;
        let ric = synthesis::solve_riccati(&m);
        let gains = synthesis::compute_gains(&m, &ric)?;
        let mut cfg = SimConfig::new(seed, runs);
        cfg.disturbance = DisturbancePolicy::WorstCaseFeedback;
        cfg.estimator = EstimatorDisturbance::WorstCase;
        cfg.info = InfoStructure::Mfs;
        let mfs = sim::evaluate_cost(&m, &sim::simulate(&m, &gains, &cfg)?)?;
        cfg.info = schedule.clone();
        let imfs = sim::evaluate_cost(&m, &sim::simulate(&m, &gains, &cfg)?)?;
        if mfs.failed_runs > 0 || imfs.failed_runs > 0 {
            return Err(Error::Precondition(format!("non-finite runs in gap study at n={n}")));
        }
        let diffs: Vec<f64> = imfs.per_run.iter().zip(&mfs.per_run).map(|(a, b)| a - b).collect();
        let (mean_diff, stderr) = sim::mean_stderr(&diffs);
        rows.push(GapRow {
            n,
            mfs_cost: mfs.mean,
            imfs_cost: imfs.mean,
            gap: mean_diff.abs(),
            stderr,
            gap_times_n: mean_diff.abs() * n as f64,
        });
    }
    Ok(rows)
}
