#![allow(dead_code)]

pub mod reference;

use mfteam::experiment::locate_critical_gamma;
use mfteam::model::{ModelSpec, ScalarModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct ScalarRng(ChaCha8Rng);

impl ScalarRng {
    pub fn new(seed: u64) -> Self {
        ScalarRng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    /// Uniform on [-1, 1).
    pub fn symmetric(&mut self) -> f64 {
        2.0 * self.uniform() - 1.0
    }

    pub fn between(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

/// Random scalar model with `n` deterministic followers, zero noise, and γ
/// placed 30% above the feasibility boundary.
pub fn random_scalar(rng: &mut ScalarRng, n: usize, horizon: usize) -> ModelSpec {
    let s = ScalarModel {
        horizon,
        gamma: 1.0,
        a0: rng.between(0.5, 1.2),
        b0: rng.between(0.1, 1.0),
        s0: rng.between(-0.2, 0.2),
        a: rng.between(0.5, 1.2),
        b: rng.between(0.1, 1.0),
        s: rng.between(-0.2, 0.2),
        e: rng.between(-0.2, 0.2),
        q: rng.between(0.0, 2.0),
        q0: rng.between(0.0, 2.0),
        f: rng.between(0.0, 2.0),
        p: rng.between(0.0, 1.0),
        r: rng.between(0.2, 2.0),
        r0: rng.between(0.2, 2.0),
        h: rng.between(0.0, 1.0),
        leader_start: rng.between(-5.0, 5.0),
        follower_start: (0..n).map(|_| rng.between(-5.0, 5.0)).collect(),
        ..Default::default()
    };
    let m = s.into_spec();
    let gamma = locate_critical_gamma(&m, 1e-6).map(|c| 1.3 * c.gamma).unwrap_or(1.0);
    m.with_gamma(gamma)
}
