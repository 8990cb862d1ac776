//! Problem description: leader/follower dynamics, social cost weights,
//! initial and noise distributions, and the augmented leader/mean-field system.
//!
//! Coefficients are stored per time step, `t = 1..=T` at index `t - 1`.
//! Configs may give any coefficient once (broadcast to every step) or as a
//! `{ per_t = [...] }` table with exactly `T` entries.

use std::collections::BTreeSet;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg;

/// Asymmetry below this is repaired silently.
pub const SYMMETRY_SILENT_TOL: f64 = 1e-9;
/// Asymmetry up to this is repaired with a warning; above it the config is rejected.
pub const SYMMETRY_REJECT_TOL: f64 = 1e-6;
pub const PSD_TOL: f64 = -1e-10;
pub const PD_TOL: f64 = 1e-12;

const EXAMPLE1: &str = include_str!("../configs/example1.toml");
const EXAMPLE2: &str = include_str!("../configs/example2.toml");

/// Config text of a bundled model, by name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "example1" => Some(EXAMPLE1),
        "example2" => Some(EXAMPLE2),
        _ => None,
    }
}

pub fn load_bundled(name: &str) -> Result<ModelSpec> {
    let text = bundled(name).ok_or_else(|| Error::Config(format!("no bundled model '{name}'")))?;
    load_model(text)
}

pub type Series = Vec<DMatrix<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderDynamics {
    pub a: Series,
    pub b: Series,
    pub s: Series,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FollowerDynamics {
    pub a: Series,
    pub b: Series,
    pub s: Series,
    pub e: Series,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    pub q: Series,
    pub q0: Series,
    pub f: Series,
    pub p: Series,
    pub r: Series,
    pub r0: Series,
    pub h: Series,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderInit {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl LeaderInit {
    pub fn is_deterministic(&self) -> bool {
        self.cov.iter().all(|&v| v == 0.0)
    }
}

/// Follower initial states: i.i.d. draws, or an explicit list of `n` states.
#[derive(Debug, Clone, PartialEq)]
pub enum FollowerInit {
    Uniform {
        low: DVector<f64>,
        high: DVector<f64>,
    },
    Gaussian {
        mean: DVector<f64>,
        cov: DMatrix<f64>,
    },
    Deterministic(Vec<DVector<f64>>),
}

impl FollowerInit {
    /// Expected initial follower state; the estimator's starting point.
    pub fn mean(&self) -> DVector<f64> {
        match self {
            FollowerInit::Uniform { low, high } => (low + high) * 0.5,
            FollowerInit::Gaussian { mean, .. } => mean.clone(),
            FollowerInit::Deterministic(states) => {
                let mut m = DVector::zeros(states[0].len());
                for s in states {
                    m += s;
                }
                m / states.len() as f64
            }
        }
    }

    /// Covariance of a single follower's initial state (zero for explicit lists).
    pub fn cov(&self) -> DMatrix<f64> {
        match self {
            FollowerInit::Uniform { low, high } => {
                DMatrix::from_diagonal(&(high - low).map(|w| w * w / 12.0))
            }
            FollowerInit::Gaussian { cov, .. } => cov.clone(),
            FollowerInit::Deterministic(states) => {
                let d = states[0].len();
                DMatrix::zeros(d, d)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    /// Per-step covariance of the leader noise.
    pub leader_cov: Series,
    /// Per-step covariance of each follower's noise (shared by all followers).
    pub follower_cov: Series,
}

impl NoiseSpec {
    pub fn is_zero(&self) -> bool {
        self.leader_cov
            .iter()
            .chain(&self.follower_cov)
            .all(|m| m.iter().all(|&v| v == 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub horizon: usize,
    pub n_followers: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    pub gamma: f64,
    pub leader: LeaderDynamics,
    pub follower: FollowerDynamics,
    pub cost: CostWeights,
    pub leader_init: LeaderInit,
    pub follower_init: FollowerInit,
    pub noise: NoiseSpec,
}

impl ModelSpec {
    pub fn with_gamma(&self, gamma: f64) -> ModelSpec {
        ModelSpec {
            gamma,
            ..self.clone()
        }
    }

    /// Same per-follower model with a different population size.
    ///
    /// An explicit initial-state list cannot be resized and is rejected unless
    /// it already has `n` entries.
    pub fn with_followers(&self, n: usize) -> Result<ModelSpec> {
        if n == 0 {
            return Err(Error::Config("n_followers must be >= 1".into()));
        }
        if let FollowerInit::Deterministic(states) = &self.follower_init {
            if states.len() != n {
                return Err(Error::Dimension {
                    what: "follower initial state list".into(),
                    expected: format!("{n} states"),
                    got: format!("{} states", states.len()),
                });
            }
        }
        Ok(ModelSpec {
            n_followers: n,
            ..self.clone()
        })
    }

    /// Deterministic initial states and zero process noise.
    pub fn with_deterministic_start(
        &self,
        leader: DVector<f64>,
        followers: Vec<DVector<f64>>,
    ) -> ModelSpec {
        let dx = self.state_dim;
        let zero = DMatrix::zeros(dx, dx);
        ModelSpec {
            n_followers: followers.len(),
            leader_init: LeaderInit {
                mean: leader,
                cov: zero.clone(),
            },
            follower_init: FollowerInit::Deterministic(followers),
            noise: NoiseSpec {
                leader_cov: vec![zero.clone(); self.horizon],
                follower_cov: vec![zero; self.horizon],
            },
            ..self.clone()
        }
    }

    pub fn is_noise_free(&self) -> bool {
        self.noise.is_zero()
            && self.leader_init.is_deterministic()
            && matches!(self.follower_init, FollowerInit::Deterministic(_))
    }
}

/// Scalar, time-invariant model description; convenient for tests and experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarModel {
    pub horizon: usize,
    pub n_followers: usize,
    pub gamma: f64,
    pub a0: f64,
    pub b0: f64,
    pub s0: f64,
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub e: f64,
    pub q: f64,
    pub q0: f64,
    pub f: f64,
    pub p: f64,
    pub r: f64,
    pub r0: f64,
    pub h: f64,
    pub leader_start: f64,
    pub follower_start: Vec<f64>,
    pub leader_noise_var: f64,
    pub follower_noise_var: f64,
}

impl Default for ScalarModel {
    fn default() -> Self {
        ScalarModel {
            horizon: 5,
            n_followers: 1,
            gamma: 10.0,
            a0: 1.0,
            b0: 1.0,
            s0: 0.0,
            a: 1.0,
            b: 1.0,
            s: 0.0,
            e: 0.0,
            q: 1.0,
            q0: 1.0,
            f: 0.0,
            p: 0.0,
            r: 1.0,
            r0: 1.0,
            h: 0.0,
            leader_start: 0.0,
            follower_start: vec![0.0],
            leader_noise_var: 0.0,
            follower_noise_var: 0.0,
        }
    }
}

impl ScalarModel {
    pub fn into_spec(self) -> ModelSpec {
        let t = self.horizon;
        let c = |v: f64| vec![DMatrix::from_element(1, 1, v); t];
        let n = if self.follower_start.is_empty() {
            self.n_followers
        } else {
            self.follower_start.len()
        };
        ModelSpec {
            horizon: t,
            n_followers: n,
            state_dim: 1,
            action_dim: 1,
            gamma: self.gamma,
            leader: LeaderDynamics {
                a: c(self.a0),
                b: c(self.b0),
                s: c(self.s0),
            },
            follower: FollowerDynamics {
                a: c(self.a),
                b: c(self.b),
                s: c(self.s),
                e: c(self.e),
            },
            cost: CostWeights {
                q: c(self.q),
                q0: c(self.q0),
                f: c(self.f),
                p: c(self.p),
                r: c(self.r),
                r0: c(self.r0),
                h: c(self.h),
            },
            leader_init: LeaderInit {
                mean: DVector::from_element(1, self.leader_start),
                cov: DMatrix::zeros(1, 1),
            },
            follower_init: FollowerInit::Deterministic(
                self.follower_start
                    .iter()
                    .map(|&x| DVector::from_element(1, x))
                    .collect(),
            ),
            noise: NoiseSpec {
                leader_cov: c(self.leader_noise_var),
                follower_cov: c(self.follower_noise_var),
            },
        }
    }
}

/// The 2ℓx-dimensional system on `[x⁰; x̄]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    pub a_bar: Series,
    pub b_bar: Series,
    pub q_bar: Series,
    pub r_bar: Series,
}

pub fn build_augmented(model: &ModelSpec) -> AugmentedSystem {
    let (dx, du) = (model.state_dim, model.action_dim);
    let mut out = AugmentedSystem {
        a_bar: Vec::with_capacity(model.horizon),
        b_bar: Vec::with_capacity(model.horizon),
        q_bar: Vec::with_capacity(model.horizon),
        r_bar: Vec::with_capacity(model.horizon),
    };
    for k in 0..model.horizon {
        let (l, f, c) = (&model.leader, &model.follower, &model.cost);
        out.a_bar
            .push(linalg::block_2x2(&l.a[k], &l.s[k], &f.e[k], &(&f.a[k] + &f.s[k])));
        out.b_bar.push(linalg::block_2x2(
            &l.b[k],
            &DMatrix::zeros(dx, du),
            &DMatrix::zeros(dx, du),
            &f.b[k],
        ));
        let neg_f = -&c.f[k];
        out.q_bar.push(linalg::block_2x2(
            &(&c.q0[k] + &c.f[k]),
            &neg_f,
            &neg_f,
            &(&c.q[k] + &c.p[k] + &c.f[k]),
        ));
        out.r_bar.push(linalg::block_2x2(
            &c.r0[k],
            &DMatrix::zeros(du, du),
            &DMatrix::zeros(du, du),
            &(&c.h[k] + &c.r[k]),
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub t: usize,
    pub matrix: &'static str,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// Checks `Q ⪰ 0`, `Q̄ ⪰ 0`, `R ≻ 0`, `R̄ ≻ 0` at every step.
pub fn validate_convexity(model: &ModelSpec) -> ConvexityReport {
    let aug = build_augmented(model);
    let mut violations = Vec::new();
    for k in 0..model.horizon {
        let checks: [(&'static str, &DMatrix<f64>, bool); 4] = [
            ("Q", &model.cost.q[k], false),
            ("Q_bar", &aug.q_bar[k], false),
            ("R", &model.cost.r[k], true),
            ("R_bar", &aug.r_bar[k], true),
        ];
        for (name, m, strict) in checks {
            let ev = linalg::min_eigenvalue(m);
            let bad = if strict { !(ev > PD_TOL) } else { !(ev >= PSD_TOL) };
            if bad {
                violations.push(Violation {
                    t: k + 1,
                    matrix: name,
                    min_eigenvalue: ev,
                });
            }
        }
    }
    ConvexityReport {
        ok: violations.is_empty(),
        violations,
    }
}

/// Splits states into their mean and the deviations from it.
pub fn deviation_transform(states: &[DVector<f64>]) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
    let first = states.first().ok_or(Error::Empty("state list"))?;
    let dim = first.len();
    let mut mean = DVector::zeros(dim);
    for (i, s) in states.iter().enumerate() {
        if s.len() != dim {
            return Err(Error::Dimension {
                what: format!("state {i}"),
                expected: dim.to_string(),
                got: s.len().to_string(),
            });
        }
        mean += s;
    }
    mean /= states.len() as f64;
    let devs = states.iter().map(|s| s - &mean).collect();
    Ok((mean, devs))
}

/// Which times the followers and leader observe the mean field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InfoStructure {
    Mfs,
    Imfs(BTreeSet<usize>),
    NoSharing,
}

impl InfoStructure {
    pub fn observes(&self, t: usize) -> bool {
        match self {
            InfoStructure::Mfs => true,
            InfoStructure::Imfs(times) => times.contains(&t),
            InfoStructure::NoSharing => false,
        }
    }

    /// Parses `all`, `none`, or a comma list of times and inclusive ranges (`1,5,10-12`).
    pub fn parse_schedule(text: &str, horizon: usize) -> Result<InfoStructure> {
        let text = text.trim();
        match text {
            "all" => return Ok(InfoStructure::Mfs),
            "none" => return Ok(InfoStructure::NoSharing),
            _ => {}
        }
        let bad = |s: &str| Error::Config(format!("bad observation schedule entry '{s}'"));
        let mut times = BTreeSet::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (lo, hi) = match part.split_once('-') {
                Some((a, b)) => (
                    a.trim().parse::<usize>().map_err(|_| bad(part))?,
                    b.trim().parse::<usize>().map_err(|_| bad(part))?,
                ),
                None => {
                    let v = part.parse::<usize>().map_err(|_| bad(part))?;
                    (v, v)
                }
            };
            if lo == 0 || hi > horizon || lo > hi {
                return Err(Error::Config(format!(
                    "observation times '{part}' outside 1..={horizon}"
                )));
            }
            times.extend(lo..=hi);
        }
        Ok(InfoStructure::Imfs(times))
    }
}

// ---------------------------------------------------------------------------
// Config ingestion

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum MatrixInput {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum CoefInput {
    Const(MatrixInput),
    PerStep { per_t: Vec<MatrixInput> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum VectorInput {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LeaderSection {
    #[serde(rename = "A")]
    a: CoefInput,
    #[serde(rename = "B")]
    b: CoefInput,
    #[serde(rename = "S")]
    s: CoefInput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FollowerSection {
    #[serde(rename = "A")]
    a: CoefInput,
    #[serde(rename = "B")]
    b: CoefInput,
    #[serde(rename = "S")]
    s: CoefInput,
    #[serde(rename = "E")]
    e: CoefInput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostSection {
    #[serde(rename = "Q")]
    q: CoefInput,
    #[serde(rename = "Q0")]
    q0: CoefInput,
    #[serde(rename = "F")]
    f: CoefInput,
    #[serde(rename = "P")]
    p: CoefInput,
    #[serde(rename = "R")]
    r: CoefInput,
    #[serde(rename = "R0")]
    r0: CoefInput,
    #[serde(rename = "H")]
    h: CoefInput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    leader_cov: Option<CoefInput>,
    leader_std: Option<f64>,
    follower_cov: Option<CoefInput>,
    follower_std: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LeaderInitSection {
    mean: VectorInput,
    cov: Option<MatrixInput>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "distribution", rename_all = "lowercase", deny_unknown_fields)]
enum FollowerInitSection {
    Uniform {
        low: VectorInput,
        high: VectorInput,
    },
    Gaussian {
        mean: VectorInput,
        cov: MatrixInput,
    },
    Deterministic {
        states: Vec<VectorInput>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitSection {
    leader: LeaderInitSection,
    followers: FollowerInitSection,
}

#[derive(Debug, Deserialize)]
struct ConfigFile {
    horizon: usize,
    n_followers: usize,
    state_dim: usize,
    action_dim: usize,
    gamma: f64,
    leader: LeaderSection,
    follower: FollowerSection,
    cost: CostSection,
    #[serde(default)]
    noise: NoiseSection,
    init: InitSection,
}

fn to_matrix(what: &str, m: &MatrixInput, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let out = match m {
        MatrixInput::Scalar(v) => DMatrix::from_element(1, 1, *v),
        MatrixInput::Rows(r) => {
            let nr = r.len();
            let nc = r.first().map_or(0, Vec::len);
            if r.iter().any(|row| row.len() != nc) {
                return Err(Error::Config(format!("{what}: ragged rows")));
            }
            DMatrix::from_fn(nr, nc, |i, j| r[i][j])
        }
    };
    if out.shape() != (rows, cols) {
        return Err(Error::Dimension {
            what: what.to_string(),
            expected: format!("{rows}x{cols}"),
            got: format!("{}x{}", out.nrows(), out.ncols()),
        });
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{what}: non-finite entry")));
    }
    Ok(out)
}

fn to_series(what: &str, c: &CoefInput, horizon: usize, rows: usize, cols: usize) -> Result<Series> {
    match c {
        CoefInput::Const(m) => Ok(vec![to_matrix(what, m, rows, cols)?; horizon]),
        CoefInput::PerStep { per_t } => {
            if per_t.len() != horizon {
                return Err(Error::Dimension {
                    what: format!("{what}.per_t"),
                    expected: format!("{horizon} entries"),
                    got: format!("{} entries", per_t.len()),
                });
            }
            per_t
                .iter()
                .enumerate()
                .map(|(k, m)| to_matrix(&format!("{what}[t={}]", k + 1), m, rows, cols))
                .collect()
        }
    }
}

fn to_vector(what: &str, v: &VectorInput, dim: usize) -> Result<DVector<f64>> {
    let out = match v {
        VectorInput::Scalar(x) => DVector::from_element(1, *x),
        VectorInput::List(xs) => DVector::from_vec(xs.clone()),
    };
    if out.len() != dim {
        return Err(Error::Dimension {
            what: what.to_string(),
            expected: dim.to_string(),
            got: out.len().to_string(),
        });
    }
    Ok(out)
}

/// Symmetrizes in place; tiny asymmetry is silent, moderate warns, large rejects.
fn ingest_symmetric(what: &str, series: &mut Series) -> Result<()> {
    for (k, m) in series.iter_mut().enumerate() {
        let asym = linalg::relative_asymmetry(m);
        if asym > SYMMETRY_REJECT_TOL {
            return Err(Error::NotSymmetric {
                what: what.to_string(),
                t: k + 1,
                asymmetry: asym,
            });
        }
        if asym > SYMMETRY_SILENT_TOL {
            warn!("{what} at t={} symmetrized (relative asymmetry {asym:.3e})", k + 1);
        }
        linalg::symmetrize(m);
    }
    Ok(())
}

fn ensure_psd(what: &str, series: &Series) -> Result<()> {
    for (k, m) in series.iter().enumerate() {
        let ev = linalg::min_eigenvalue(m);
        if ev < PSD_TOL * m.amax().max(1.0) {
            return Err(Error::NotPositiveSemiDefinite {
                what: what.to_string(),
                t: k + 1,
                min_eigenvalue: ev,
            });
        }
    }
    Ok(())
}

fn noise_series(
    what: &str,
    cov: &Option<CoefInput>,
    std: Option<f64>,
    horizon: usize,
    dim: usize,
) -> Result<Series> {
    match (cov, std) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "{what}: give either a covariance or a standard deviation, not both"
        ))),
        (Some(c), None) => to_series(what, c, horizon, dim, dim),
        (None, Some(sd)) => {
            if !(sd >= 0.0) {
                return Err(Error::Config(format!("{what}: negative standard deviation")));
            }
            Ok(vec![DMatrix::identity(dim, dim) * (sd * sd); horizon])
        }
        (None, None) => Ok(vec![DMatrix::zeros(dim, dim); horizon]),
    }
}

/// Parses and validates a model config (TOML).
pub fn load_model(text: &str) -> Result<ModelSpec> {
    let cfg: ConfigFile = toml::from_str(text)?;
    let (t, dx, du) = (cfg.horizon, cfg.state_dim, cfg.action_dim);
    if t == 0 || dx == 0 || du == 0 || cfg.n_followers == 0 {
        return Err(Error::Config(
            "horizon, n_followers, state_dim and action_dim must all be >= 1".into(),
        ));
    }
    if !(cfg.gamma > 0.0 && cfg.gamma.is_finite()) {
        return Err(Error::InvalidGamma(cfg.gamma));
    }

    let leader = LeaderDynamics {
        a: to_series("leader.A", &cfg.leader.a, t, dx, dx)?,
        b: to_series("leader.B", &cfg.leader.b, t, dx, du)?,
        s: to_series("leader.S", &cfg.leader.s, t, dx, dx)?,
    };
    let follower = FollowerDynamics {
        a: to_series("follower.A", &cfg.follower.a, t, dx, dx)?,
        b: to_series("follower.B", &cfg.follower.b, t, dx, du)?,
        s: to_series("follower.S", &cfg.follower.s, t, dx, dx)?,
        e: to_series("follower.E", &cfg.follower.e, t, dx, dx)?,
    };
    let c = &cfg.cost;
    let mut cost = CostWeights {
        q: to_series("cost.Q", &c.q, t, dx, dx)?,
        q0: to_series("cost.Q0", &c.q0, t, dx, dx)?,
        f: to_series("cost.F", &c.f, t, dx, dx)?,
        p: to_series("cost.P", &c.p, t, dx, dx)?,
        r: to_series("cost.R", &c.r, t, du, du)?,
        r0: to_series("cost.R0", &c.r0, t, du, du)?,
        h: to_series("cost.H", &c.h, t, du, du)?,
    };
    for (name, s) in [
        ("cost.Q", &mut cost.q),
        ("cost.Q0", &mut cost.q0),
        ("cost.F", &mut cost.f),
        ("cost.P", &mut cost.p),
        ("cost.R", &mut cost.r),
        ("cost.R0", &mut cost.r0),
        ("cost.H", &mut cost.h),
    ] {
        ingest_symmetric(name, s)?;
    }

    // R and R̄ are inverted by the recursions, so they must be definite here.
    for k in 0..t {
        let r_bar_22 = &cost.h[k] + &cost.r[k];
        for (name, m) in [("cost.R", &cost.r[k]), ("cost.R0", &cost.r0[k]), ("cost.H + cost.R", &r_bar_22)] {
            let ev = linalg::min_eigenvalue(m);
            if !(ev > PD_TOL) {
                return Err(Error::NotPositiveDefinite {
                    what: name.to_string(),
                    t: k + 1,
                    min_eigenvalue: ev,
                });
            }
        }
    }

    let mut noise = NoiseSpec {
        leader_cov: noise_series("noise.leader", &cfg.noise.leader_cov, cfg.noise.leader_std, t, dx)?,
        follower_cov: noise_series(
            "noise.follower",
            &cfg.noise.follower_cov,
            cfg.noise.follower_std,
            t,
            dx,
        )?,
    };
    ingest_symmetric("noise.leader", &mut noise.leader_cov)?;
    ingest_symmetric("noise.follower", &mut noise.follower_cov)?;
    ensure_psd("noise.leader", &noise.leader_cov)?;
    ensure_psd("noise.follower", &noise.follower_cov)?;

    let li = &cfg.init.leader;
    let mut leader_cov = match &li.cov {
        Some(m) => vec![to_matrix("init.leader.cov", m, dx, dx)?],
        None => vec![DMatrix::zeros(dx, dx)],
    };
    ingest_symmetric("init.leader.cov", &mut leader_cov)?;
    ensure_psd("init.leader.cov", &leader_cov)?;
    let leader_init = LeaderInit {
        mean: to_vector("init.leader.mean", &li.mean, dx)?,
        cov: leader_cov.pop().expect("one entry"),
    };

    let follower_init = match &cfg.init.followers {
        FollowerInitSection::Uniform { low, high } => {
            let low = to_vector("init.followers.low", low, dx)?;
            let high = to_vector("init.followers.high", high, dx)?;
            if low.iter().zip(high.iter()).any(|(l, h)| l > h) {
                return Err(Error::Config("init.followers: low exceeds high".into()));
            }
            FollowerInit::Uniform { low, high }
        }
        FollowerInitSection::Gaussian { mean, cov } => {
            let mut cov = vec![to_matrix("init.followers.cov", cov, dx, dx)?];
            ingest_symmetric("init.followers.cov", &mut cov)?;
            ensure_psd("init.followers.cov", &cov)?;
            FollowerInit::Gaussian {
                mean: to_vector("init.followers.mean", mean, dx)?,
                cov: cov.pop().expect("one entry"),
            }
        }
        FollowerInitSection::Deterministic { states } => {
            if states.len() != cfg.n_followers {
                return Err(Error::Dimension {
                    what: "init.followers.states".into(),
                    expected: format!("{} states", cfg.n_followers),
                    got: format!("{} states", states.len()),
                });
            }
            FollowerInit::Deterministic(
                states
                    .iter()
                    .enumerate()
                    .map(|(i, s)| to_vector(&format!("init.followers.states[{i}]"), s, dx))
                    .collect::<Result<_>>()?,
            )
        }
    };

    Ok(ModelSpec {
        horizon: t,
        n_followers: cfg.n_followers,
        state_dim: dx,
        action_dim: du,
        gamma: cfg.gamma,
        leader,
        follower,
        cost,
        leader_init,
        follower_init,
        noise,
    })
}
