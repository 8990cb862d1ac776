//! Backward Riccati recursions for the deviation and augmented systems,
//! the attenuation (feasibility) test, saddle-point gains and the optimal value.

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{build_augmented, FollowerInit, ModelSpec};

/// `γ²I − M` must have its smallest eigenvalue above this to count as positive definite.
pub const FEASIBILITY_MARGIN: f64 = 1e-10;

/// Solution of both backward recursions. Vectors of matrices are indexed by
/// `t - 1`; the `m_*` and `c_*` series run to `T + 1` and end at zero.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub gamma: f64,
    pub m_brev: Vec<DMatrix<f64>>,
    pub m_bar: Vec<DMatrix<f64>>,
    pub delta_brev: Vec<DMatrix<f64>>,
    pub delta_bar: Vec<DMatrix<f64>>,
    /// Per-follower noise constant; identical across followers.
    pub c_brev: Vec<f64>,
    pub c_bar: Vec<f64>,
    /// Smallest eigenvalue of `γ²I − M̆_{t+1}`, per `t = 1..=T`.
    pub margin_brev: Vec<f64>,
    /// Smallest eigenvalue of `γ²I − M̄_{t+1}`, per `t = 1..=T`.
    pub margin_bar: Vec<f64>,
    pub feasible: bool,
    /// Earliest time (in backward order, i.e. largest `t`) at which the test fails.
    pub first_violation: Option<usize>,
    /// Steps where `Δ` could not be inverted; the recursion stops there.
    pub singular_at: Option<usize>,
}

impl RiccatiSolution {
    pub fn horizon(&self) -> usize {
        self.delta_brev.len()
    }

    pub fn min_margin(&self) -> f64 {
        self.margin_brev
            .iter()
            .chain(&self.margin_bar)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    fn infeasible_error(&self) -> Error {
        let t = self.first_violation.or(self.singular_at).unwrap_or(0);
        let margin = if t >= 1 {
            self.margin_brev[t - 1].min(self.margin_bar[t - 1])
        } else {
            f64::NAN
        };
        Error::Infeasible {
            gamma: self.gamma,
            t,
            margin,
        }
    }
}

/// Per-step feedback gains of the saddle-point strategy and the worst-case disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyGains {
    pub state_dim: usize,
    pub action_dim: usize,
    pub gamma: f64,
    /// `L̆_t` (ℓu×ℓx), follower deviation gain.
    pub l_brev: Vec<DMatrix<f64>>,
    /// `L̄_t` (2ℓu×2ℓx): top rows drive the leader, bottom rows the mean action.
    pub l_bar: Vec<DMatrix<f64>>,
    /// `K̆_t` (ℓx×ℓx), worst-case deviation disturbance gain.
    pub k_brev: Vec<DMatrix<f64>>,
    /// `K̄_t` (2ℓx×2ℓx), worst-case `[d⁰; d̄]` gain on `[x⁰; x̄]`.
    pub k_bar: Vec<DMatrix<f64>>,
}

impl StrategyGains {
    pub fn horizon(&self) -> usize {
        self.l_brev.len()
    }

    fn block(&self, t: usize, row: usize, col: usize) -> DMatrix<f64> {
        let (du, dx) = (self.action_dim, self.state_dim);
        self.l_bar[t - 1]
            .view((row * du, col * dx), (du, dx))
            .clone_owned()
    }

    pub fn l11(&self, t: usize) -> DMatrix<f64> {
        self.block(t, 0, 0)
    }

    pub fn l12(&self, t: usize) -> DMatrix<f64> {
        self.block(t, 0, 1)
    }

    pub fn l21(&self, t: usize) -> DMatrix<f64> {
        self.block(t, 1, 0)
    }

    pub fn l22(&self, t: usize) -> DMatrix<f64> {
        self.block(t, 1, 1)
    }

    /// Zero gains of the right shape for `model`.
    pub fn zeros(model: &ModelSpec) -> StrategyGains {
        let (dx, du, t) = (model.state_dim, model.action_dim, model.horizon);
        StrategyGains {
            state_dim: dx,
            action_dim: du,
            gamma: model.gamma,
            l_brev: vec![DMatrix::zeros(du, dx); t],
            l_bar: vec![DMatrix::zeros(2 * du, 2 * dx); t],
            k_brev: vec![DMatrix::zeros(dx, dx); t],
            k_bar: vec![DMatrix::zeros(2 * dx, 2 * dx); t],
        }
    }
}

/// `I + (B R⁻¹ Bᵀ − γ⁻² I) M`.
fn delta(b: &DMatrix<f64>, r_inv: &DMatrix<f64>, m_next: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let n = m_next.nrows();
    let s = b * r_inv * b.transpose() - DMatrix::identity(n, n) / (gamma * gamma);
    DMatrix::identity(n, n) + s * m_next
}

/// Runs both recursions backward from `T` to 1.
///
/// The attenuation test is evaluated at every step; once it fails the
/// recursion keeps going (flagged), unless `Δ` becomes singular.
pub fn solve_riccati(model: &ModelSpec) -> RiccatiSolution {
    let (t_len, dx) = (model.horizon, model.state_dim);
    let gamma = model.gamma;
    let g2 = gamma * gamma;
    let n = model.n_followers as f64;
    let aug = build_augmented(model);

    let mut m_brev = vec![DMatrix::zeros(dx, dx); t_len + 1];
    let mut m_bar = vec![DMatrix::zeros(2 * dx, 2 * dx); t_len + 1];
    let mut delta_brev = vec![DMatrix::from_element(dx, dx, f64::NAN); t_len];
    let mut delta_bar = vec![DMatrix::from_element(2 * dx, 2 * dx, f64::NAN); t_len];
    let mut c_brev = vec![0.0; t_len + 1];
    let mut c_bar = vec![0.0; t_len + 1];
    let mut margin_brev = vec![f64::NAN; t_len];
    let mut margin_bar = vec![f64::NAN; t_len];
    let mut first_violation = None;
    let mut singular_at = None;

    for t in (1..=t_len).rev() {
        let k = t - 1;
        let (mb_next, ma_next) = (m_brev[t].clone(), m_bar[t].clone());

        margin_brev[k] = g2 - linalg::max_eigenvalue(&mb_next);
        margin_bar[k] = g2 - linalg::max_eigenvalue(&ma_next);
        let ok = margin_brev[k] > FEASIBILITY_MARGIN && margin_bar[k] > FEASIBILITY_MARGIN;
        if !ok && first_violation.is_none() {
            first_violation = Some(t);
        }

        let (Some(r_inv), Some(rb_inv)) = (linalg::inverse(&model.cost.r[k]), linalg::inverse(&aug.r_bar[k]))
        else {
            singular_at = Some(t);
            break;
        };
        let db = delta(&model.follower.b[k], &r_inv, &mb_next, gamma);
        let da = delta(&aug.b_bar[k], &rb_inv, &ma_next, gamma);
        let (Some(db_inv), Some(da_inv)) = (linalg::inverse(&db), linalg::inverse(&da)) else {
            delta_brev[k] = db;
            delta_bar[k] = da;
            singular_at = Some(t);
            break;
        };

        let a = &model.follower.a[k];
        let mut mb = &model.cost.q[k] + a.transpose() * &mb_next * &db_inv * a;
        linalg::symmetrize(&mut mb);
        let ab = &aug.a_bar[k];
        let mut ma = &aug.q_bar[k] + ab.transpose() * &ma_next * &da_inv * ab;
        linalg::symmetrize(&mut ma);

        // Deviation noise w̆ = w − w̄ has covariance (1 − 1/n)W for i.i.d. followers;
        // the augmented noise [w⁰; w̄] has blocks W⁰ and W/n.
        let w = &model.noise.follower_cov[k];
        let w0 = &model.noise.leader_cov[k];
        c_brev[k] = c_brev[t] + (&mb_next * w).trace() * (1.0 - 1.0 / n);
        let w_aug = linalg::block_diag(w0, &(w / n));
        c_bar[k] = c_bar[t] + (&ma_next * w_aug).trace();

        m_brev[k] = mb;
        m_bar[k] = ma;
        delta_brev[k] = db;
        delta_bar[k] = da;
    }

    if let Some(ts) = singular_at {
        for k in 0..ts {
            m_brev[k].fill(f64::NAN);
            m_bar[k].fill(f64::NAN);
            c_brev[k] = f64::NAN;
            c_bar[k] = f64::NAN;
        }
    }

    RiccatiSolution {
        gamma,
        m_brev,
        m_bar,
        delta_brev,
        delta_bar,
        c_brev,
        c_bar,
        margin_brev,
        margin_bar,
        feasible: first_violation.is_none() && singular_at.is_none(),
        first_violation,
        singular_at,
    }
}

/// Saddle-point control gains and worst-case disturbance gains.
///
/// `L = −R⁻¹BᵀMΔ⁻¹A` and `K = γ⁻²MΔ⁻¹A`, for both the deviation and the
/// augmented systems.
pub fn compute_gains(model: &ModelSpec, ric: &RiccatiSolution) -> Result<StrategyGains> {
    if !ric.feasible {
        return Err(ric.infeasible_error());
    }
    let aug = build_augmented(model);
    let g2 = ric.gamma * ric.gamma;
    let mut out = StrategyGains {
        state_dim: model.state_dim,
        action_dim: model.action_dim,
        gamma: ric.gamma,
        l_brev: Vec::with_capacity(model.horizon),
        l_bar: Vec::with_capacity(model.horizon),
        k_brev: Vec::with_capacity(model.horizon),
        k_bar: Vec::with_capacity(model.horizon),
    };
    let singular = |t| Error::Infeasible {
        gamma: ric.gamma,
        t,
        margin: f64::NAN,
    };
    for t in 1..=model.horizon {
        let k = t - 1;
        let db_inv = linalg::inverse(&ric.delta_brev[k]).ok_or_else(|| singular(t))?;
        let da_inv = linalg::inverse(&ric.delta_bar[k]).ok_or_else(|| singular(t))?;
        let r_inv = linalg::inverse(&model.cost.r[k]).ok_or_else(|| singular(t))?;
        let rb_inv = linalg::inverse(&aug.r_bar[k]).ok_or_else(|| singular(t))?;

        let brev_core = &ric.m_brev[t] * db_inv * &model.follower.a[k];
        let bar_core = &ric.m_bar[t] * da_inv * &aug.a_bar[k];
        out.l_brev
            .push(-(r_inv * model.follower.b[k].transpose() * &brev_core));
        out.l_bar.push(-(rb_inv * aug.b_bar[k].transpose() * &bar_core));
        out.k_brev.push(brev_core / g2);
        out.k_bar.push(bar_core / g2);
    }
    Ok(out)
}

/// Value of the game under the saddle-point strategy, for the model's initial
/// distribution. Uses second moments `E[xxᵀ]`; an explicit initial list is
/// treated as exactly known.
pub fn optimal_value(model: &ModelSpec, ric: &RiccatiSolution) -> Result<f64> {
    if !ric.feasible {
        return Err(ric.infeasible_error());
    }
    let n = model.n_followers as f64;
    let m0 = &model.leader_init.mean;
    let mh = model.follower_init.mean();

    let deviation_term = match &model.follower_init {
        FollowerInit::Deterministic(states) => {
            let sum: f64 = states
                .iter()
                .map(|x| {
                    let d = x - &mh;
                    (d.transpose() * &ric.m_brev[0] * &d)[(0, 0)]
                })
                .sum();
            sum / n
        }
        init => (1.0 - 1.0 / n) * (&ric.m_brev[0] * init.cov()).trace(),
    };

    let mean = linalg::stack(m0, &mh);
    let cov = linalg::block_diag(&model.leader_init.cov, &(model.follower_init.cov() / n));
    let second = cov + &mean * mean.transpose();
    let aug_term = (&ric.m_bar[0] * second).trace();

    Ok(deviation_term + ric.c_brev[0] + aug_term + ric.c_bar[0])
}

#[derive(Debug, Clone)]
pub struct CriticalGamma {
    pub gamma: f64,
    /// Final bracket: infeasible at `lo`, feasible at `hi`.
    pub lo: f64,
    pub hi: f64,
    /// Every `(γ, feasible)` pair evaluated, in evaluation order.
    pub evaluations: Vec<(f64, bool)>,
    /// False if some evaluated γ was infeasible above a feasible one.
    pub monotone: bool,
}

pub fn is_feasible(model: &ModelSpec, gamma: f64) -> bool {
    solve_riccati(&model.with_gamma(gamma)).feasible
}

/// Bisects the feasibility boundary in γ between an infeasible `gamma_lo` and
/// a feasible `gamma_hi`.
pub fn critical_gamma(model: &ModelSpec, gamma_lo: f64, gamma_hi: f64, tol: f64) -> Result<CriticalGamma> {
    if !(tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive".into()));
    }
    if !(gamma_lo > 0.0 && gamma_lo < gamma_hi) {
        return Err(Error::Precondition(format!(
            "need 0 < gamma_lo < gamma_hi, got [{gamma_lo}, {gamma_hi}]"
        )));
    }
    let lo_feasible = is_feasible(model, gamma_lo);
    let hi_feasible = is_feasible(model, gamma_hi);
    if lo_feasible || !hi_feasible {
        return Err(Error::NoBracket {
            lo: gamma_lo,
            hi: gamma_hi,
            lo_feasible,
            hi_feasible,
        });
    }
    let mut evaluations = vec![(gamma_lo, false), (gamma_hi, true)];
    let (mut lo, mut hi) = (gamma_lo, gamma_hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let ok = is_feasible(model, mid);
        evaluations.push((mid, ok));
        if ok {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut sorted = evaluations.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = sorted.windows(2).all(|w| !(w[0].1 && !w[1].1));
    if !monotone {
        warn!("feasibility is not monotone in gamma on the evaluated grid");
    }
    Ok(CriticalGamma {
        gamma: 0.5 * (lo + hi),
        lo,
        hi,
        evaluations,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_bundled, ScalarModel};
    use nalgebra::DVector;

    fn zero_state_weights() -> ModelSpec {
        ScalarModel {
            q: 0.0,
            q0: 0.0,
            f: 0.0,
            p: 0.0,
            h: 0.5,
            s: 0.2,
            e: 0.1,
            s0: 0.3,
            follower_start: vec![1.0, 2.0],
            follower_noise_var: 0.4,
            leader_noise_var: 0.2,
            ..Default::default()
        }
        .into_spec()
    }

    #[test]
    fn last_step_is_stage_weight() {
        let m = load_bundled("example1").unwrap();
        let ric = solve_riccati(&m);
        let t = m.horizon;
        let aug = build_augmented(&m);
        assert_eq!(ric.delta_brev[t - 1], DMatrix::identity(1, 1));
        assert_eq!(ric.delta_bar[t - 1], DMatrix::identity(2, 2));
        assert_eq!(ric.m_brev[t - 1], m.cost.q[t - 1]);
        assert_eq!(ric.m_bar[t - 1], aug.q_bar[t - 1]);
        assert_eq!(ric.m_brev[t].amax(), 0.0);
        assert_eq!(ric.m_bar[t].amax(), 0.0);
        assert_eq!(ric.c_brev[t], 0.0);
        assert_eq!(ric.c_bar[t], 0.0);
    }

    #[test]
    fn zero_state_weights_give_zero_solution() {
        let m = zero_state_weights();
        let ric = solve_riccati(&m);
        assert!(ric.feasible);
        assert!(ric.m_brev.iter().all(|x| x.amax() == 0.0));
        assert!(ric.m_bar.iter().all(|x| x.amax() == 0.0));
        assert!(ric.c_brev.iter().chain(&ric.c_bar).all(|&c| c == 0.0));
        let g = compute_gains(&m, &ric).unwrap();
        for t in 0..m.horizon {
            assert_eq!(g.l_brev[t].amax(), 0.0);
            assert_eq!(g.l_bar[t].amax(), 0.0);
            assert_eq!(g.k_brev[t].amax(), 0.0);
            assert_eq!(g.k_bar[t].amax(), 0.0);
        }
    }

    #[test]
    fn example2_leader_rows_vanish() {
        let m = load_bundled("example2").unwrap();
        let g = compute_gains(&m, &solve_riccati(&m)).unwrap();
        for t in 1..=m.horizon {
            assert_eq!(g.l11(t)[(0, 0)], 0.0);
            assert_eq!(g.l12(t)[(0, 0)], 0.0);
        }
    }

    #[test]
    fn infeasible_gamma_refused() {
        let m = load_bundled("example1").unwrap().with_gamma(2.0);
        let ric = solve_riccati(&m);
        assert!(!ric.feasible);
        // M̄_T = Q̄ has largest eigenvalue ~26.6 > 4, so the check fails at t = T-1.
        assert_eq!(ric.first_violation, Some(m.horizon - 1));
        assert!(ric.margin_bar[m.horizon - 2] < 0.0);
        assert!(matches!(compute_gains(&m, &ric), Err(Error::Infeasible { .. })));
        assert!(matches!(optimal_value(&m, &ric), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn example2_at_unit_gamma_is_infeasible() {
        let m = load_bundled("example2").unwrap().with_gamma(1.0);
        let ric = solve_riccati(&m);
        assert!(!ric.feasible);
        assert_eq!(ric.first_violation, Some(25));
        assert!(ric.m_bar.iter().all(|x| x.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn value_zero_when_everything_starts_at_origin() {
        let m = ScalarModel {
            follower_start: vec![0.0, 0.0, 0.0],
            ..Default::default()
        }
        .into_spec();
        let z = zero_state_weights().with_deterministic_start(DVector::zeros(1), vec![DVector::zeros(1); 2]);
        for model in [m, z] {
            let ric = solve_riccati(&model);
            assert_eq!(optimal_value(&model, &ric).unwrap(), 0.0);
        }
    }

    #[test]
    fn value_single_follower_only_aggregate_term() {
        let m = ScalarModel {
            n_followers: 1,
            follower_start: vec![1.0],
            leader_start: 1.0,
            f: 0.7,
            s: 0.1,
            ..Default::default()
        }
        .into_spec();
        let ric = solve_riccati(&m);
        let v = optimal_value(&m, &ric).unwrap();
        let expect = ric.m_bar[0].sum();
        assert!((v - expect).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn noise_constants_accumulate() {
        let m = zero_state_weights();
        let m = ModelSpec {
            cost: crate::model::CostWeights {
                q: vec![DMatrix::from_element(1, 1, 1.0); m.horizon],
                ..m.cost.clone()
            },
            ..m
        };
        let ric = solve_riccati(&m);
        let t = m.horizon;
        // c̆_T = 0 + tr(M̆_{T+1} ...) = 0; c̆_{T-1} = (1 - 1/n) M̆_T W = 0.5 * 1 * 0.4
        assert_eq!(ric.c_brev[t - 1], 0.0);
        assert!((ric.c_brev[t - 2] - 0.2).abs() < 1e-15);
        let mt = &ric.m_bar[t - 1];
        let expect = mt[(0, 0)] * 0.2 + mt[(1, 1)] * 0.4 / 2.0;
        assert!((ric.c_bar[t - 2] - expect).abs() < 1e-15);
    }

    #[test]
    fn critical_gamma_rejects_missing_bracket() {
        let m = zero_state_weights();
        assert!(matches!(
            critical_gamma(&m, 1e-3, 1e3, 1e-6),
            Err(Error::NoBracket { lo_feasible: true, .. })
        ));
    }

    #[test]
    fn critical_gamma_example2() {
        let m = load_bundled("example2").unwrap();
        let c = critical_gamma(&m, 0.1, 100.0, 1e-6).unwrap();
        assert!(c.hi - c.lo <= 1e-6);
        assert!(c.monotone);
        assert!(is_feasible(&m, c.hi) && !is_feasible(&m, c.lo));
        assert!((c.gamma - 2.0273).abs() < 1e-3, "{}", c.gamma);
    }
}
