//! Independent reference computations shared by the test targets.

use mfteam::model::ModelSpec;
use mfteam::synthesis::{compute_gains, is_feasible, solve_riccati};
use nalgebra::{DMatrix, Matrix2};

/// Scalar and 2×2 recursions for Example 2, written out by hand.
pub fn example2_by_hand(gamma: f64) -> (Vec<f64>, Vec<Matrix2<f64>>) {
    let t_len = 30;
    let (a, b, s, e) = (1.0, 1.0, 0.04, 0.001);
    let (q, q0, f, p, r, r0, h) = (0.01, 1e-4, 0.07, 0.001, 0.11, 1e-4, 1.0);
    let g2 = gamma * gamma;

    let mut m = vec![0.0; t_len + 1];
    for t in (0..t_len).rev() {
        let next = m[t + 1];
        let delta = 1.0 + (b * b / r - 1.0 / g2) * next;
        m[t] = q + a * next * a / delta;
    }

    let a_bar = Matrix2::new(1.0, 0.0, e, a + s);
    let b_bar = Matrix2::new(0.0, 0.0, 0.0, b);
    let q_bar = Matrix2::new(q0 + f, -f, -f, q + p + f);
    let r_bar_inv = Matrix2::new(1.0 / r0, 0.0, 0.0, 1.0 / (h + r));
    let mut mb = vec![Matrix2::zeros(); t_len + 1];
    for t in (0..t_len).rev() {
        let next = mb[t + 1];
        let delta = Matrix2::identity() + (b_bar * r_bar_inv * b_bar.transpose() - Matrix2::identity() / g2) * next;
        let mut cur = q_bar + a_bar.transpose() * next * delta.try_inverse().unwrap() * a_bar;
        cur = (cur + cur.transpose()) / 2.0;
        mb[t] = cur;
    }
    (m, mb)
}

/// Classical finite-horizon LQ Riccati in the gain form, for `(A, B, Q, R)` series.
pub fn lq_gains(
    a: &[DMatrix<f64>],
    b: &[DMatrix<f64>],
    q: &[DMatrix<f64>],
    r: &[DMatrix<f64>],
) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let t_len = a.len();
    let dim = a[0].nrows();
    let mut p = vec![DMatrix::zeros(dim, dim); t_len + 1];
    let mut gains = vec![DMatrix::zeros(0, 0); t_len];
    for k in (0..t_len).rev() {
        let next = &p[k + 1];
        let s = &r[k] + b[k].transpose() * next * &b[k];
        let gain = -s.clone().lu().solve(&(b[k].transpose() * next * &a[k])).unwrap();
        let closed = &a[k] + &b[k] * &gain;
        p[k] = &q[k] + a[k].transpose() * next * &closed;
        gains[k] = gain;
    }
    (p, gains)
}

pub fn blocks(model: &ModelSpec) -> [Vec<DMatrix<f64>>; 4] {
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut q = Vec::new();
    let mut r = Vec::new();
    let (dx, du) = (model.state_dim, model.action_dim);
    for k in 0..model.horizon {
        let l = &model.leader;
        let f = &model.follower;
        let c = &model.cost;
        let mut ak = DMatrix::zeros(2 * dx, 2 * dx);
        ak.view_mut((0, 0), (dx, dx)).copy_from(&l.a[k]);
        ak.view_mut((0, dx), (dx, dx)).copy_from(&l.s[k]);
        ak.view_mut((dx, 0), (dx, dx)).copy_from(&f.e[k]);
        ak.view_mut((dx, dx), (dx, dx)).copy_from(&(&f.a[k] + &f.s[k]));
        let mut bk = DMatrix::zeros(2 * dx, 2 * du);
        bk.view_mut((0, 0), (dx, du)).copy_from(&l.b[k]);
        bk.view_mut((dx, du), (dx, du)).copy_from(&f.b[k]);
        let mut qk = DMatrix::zeros(2 * dx, 2 * dx);
        qk.view_mut((0, 0), (dx, dx)).copy_from(&(&c.q0[k] + &c.f[k]));
        qk.view_mut((0, dx), (dx, dx)).copy_from(&(-&c.f[k]));
        qk.view_mut((dx, 0), (dx, dx)).copy_from(&(-&c.f[k]));
        qk.view_mut((dx, dx), (dx, dx)).copy_from(&(&c.q[k] + &c.p[k] + &c.f[k]));
        let mut rk = DMatrix::zeros(2 * du, 2 * du);
        rk.view_mut((0, 0), (du, du)).copy_from(&c.r0[k]);
        rk.view_mut((du, du), (du, du)).copy_from(&(&c.h[k] + &c.r[k]));
        a.push(ak);
        b.push(bk);
        q.push(qk);
        r.push(rk);
    }
    [a, b, q, r]
}

pub fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-12)
}

/// Feasibility on a uniform grid, returning the first feasible point and its predecessor.
pub fn grid_scan(model: &ModelSpec, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let step = (hi - lo) / (points - 1) as f64;
    let mut prev = lo;
    for i in 0..points {
        let g = lo + step * i as f64;
        if is_feasible(model, g) {
            return (prev, g);
        }
        prev = g;
    }
    panic!("no feasible grid point");
}


/// Largest relative gap between the `γ = 10⁹` solution and the classical LQ
/// team solution over gains and value matrices.
pub fn lq_limit_error(model: &ModelSpec) -> f64 {
    let m = model.with_gamma(1e9);
    let ric = solve_riccati(&m);
    let gains = compute_gains(&m, &ric).unwrap();
    let f = &m.follower;
    let (p_dev, l_dev) = lq_gains(&f.a, &f.b, &m.cost.q, &m.cost.r);
    let [a, b, q, r] = blocks(&m);
    let (p_agg, l_agg) = lq_gains(&a, &b, &q, &r);
    (0..m.horizon)
        .flat_map(|k| {
            [
                rel(&gains.l_brev[k], &l_dev[k]),
                rel(&gains.l_bar[k], &l_agg[k]),
                rel(&ric.m_brev[k], &p_dev[k]),
                rel(&ric.m_bar[k], &p_agg[k]),
            ]
        })
        .fold(0.0, f64::max)
}
