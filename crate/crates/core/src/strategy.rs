//! Executable policies built from the saddle-point gains.
//!
//! A [`PolicyState`] always acts on its mean-field estimate `m̂_t`. Under mean-field
//! sharing the estimate is overwritten with the observed mean at every step, so
//! the exact and intermittent strategies share one code path.

use nalgebra::DVector;

use crate::linalg;
use crate::model::{InfoStructure, ModelSpec};
use crate::synthesis::StrategyGains;

/// Which mean disturbance the estimator propagates between observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatorDisturbance {
    /// Worst-case `d̄_t`, evaluated at `(x⁰_t, m̂_t)`.
    #[default]
    WorstCase,
    /// `d̄_t = 0`.
    Nominal,
}

#[derive(Debug, Clone)]
pub struct PolicyState<'a> {
    pub model: &'a ModelSpec,
    pub gains: &'a StrategyGains,
    pub info: InfoStructure,
    pub estimator: EstimatorDisturbance,
    pub m_hat: DVector<f64>,
    pub t: usize,
}

impl<'a> PolicyState<'a> {
    /// Policy at `t = 1`. The estimate starts at the observed mean if the mean
    /// field is shared at `t = 1`, otherwise at the expected initial state.
    pub fn new(
        model: &'a ModelSpec,
        gains: &'a StrategyGains,
        info: InfoStructure,
        estimator: EstimatorDisturbance,
        initial_mean: &DVector<f64>,
    ) -> PolicyState<'a> {
        let m_hat = if info.observes(1) {
            initial_mean.clone()
        } else {
            model.follower_init.mean()
        };
        PolicyState {
            model,
            gains,
            info,
            estimator,
            m_hat,
            t: 1,
        }
    }

    /// `u⁰_t = L̄¹¹ x⁰ + L̄¹² m̂`.
    pub fn leader_action(&self, x0: &DVector<f64>) -> DVector<f64> {
        self.gains.l11(self.t) * x0 + self.gains.l12(self.t) * &self.m_hat
    }

    /// The part of every follower's action that does not depend on its own state:
    /// `L̄²¹ x⁰ + (L̄²² − L̆) m̂`.
    pub fn follower_offset(&self, x0: &DVector<f64>) -> DVector<f64> {
        let lb = &self.gains.l_brev[self.t - 1];
        self.gains.l21(self.t) * x0 + (self.gains.l22(self.t) - lb) * &self.m_hat
    }

    /// `uⁱ_t = L̆ xⁱ + L̄²¹ x⁰ + (L̄²² − L̆) m̂`.
    pub fn follower_action(&self, xi: &DVector<f64>, x0: &DVector<f64>) -> DVector<f64> {
        &self.gains.l_brev[self.t - 1] * xi + self.follower_offset(x0)
    }

    /// Worst-case `(d⁰, d̄)` at `(x⁰, m̂)`.
    pub fn aggregate_disturbance(&self, x0: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let dx = self.gains.state_dim;
        let d = &self.gains.k_bar[self.t - 1] * linalg::stack(x0, &self.m_hat);
        (d.rows(0, dx).clone_owned(), d.rows(dx, dx).clone_owned())
    }

    /// Worst-case disturbance on follower `i`: `K̆ (xⁱ − m̂) + d̄`.
    pub fn follower_disturbance(&self, xi: &DVector<f64>, x0: &DVector<f64>) -> DVector<f64> {
        let (_, d_bar) = self.aggregate_disturbance(x0);
        &self.gains.k_brev[self.t - 1] * (xi - &self.m_hat) + d_bar
    }

    /// Moves to `t + 1`, returning `m̂_{t+1}`.
    ///
    /// An observed mean replaces the estimate; otherwise the estimate follows the
    /// closed-loop mean dynamics.
    pub fn estimator_step(&mut self, x0: &DVector<f64>, observed: Option<&DVector<f64>>) -> &DVector<f64> {
        let next = match observed {
            Some(x_bar) => x_bar.clone(),
            None => {
                let k = self.t - 1;
                let f = &self.model.follower;
                let b = &f.b[k];
                let d_bar = match self.estimator {
                    EstimatorDisturbance::WorstCase => self.aggregate_disturbance(x0).1,
                    EstimatorDisturbance::Nominal => DVector::zeros(self.gains.state_dim),
                };
                (&f.a[k] + &f.s[k] + b * self.gains.l22(self.t)) * &self.m_hat
                    + (b * self.gains.l21(self.t) + &f.e[k]) * x0
                    + d_bar
            }
        };
        self.m_hat = next;
        self.t += 1;
        &self.m_hat
    }
}
