//! The tilted functional `Omega^(mu,lambda)` and the exponent function `F`.
//!
//! For a joint `q` with `U - X - Y - Z`, the information density
//!
//! ```text
//! omega(x,y,z|u) = mu log[W1(y|x) / q(y|u)] + log[q(z|u) / q(z)]
//! ```
//!
//! has mean `mu I(X;Y|U) + I(U;Z)`. `Omega_q = log E_q[exp(lambda omega)]` is its
//! cumulant generating function, and
//!
//! ```text
//! F(R1,R2) = sup_{mu,lambda>0} [lambda (mu R1 + R2) - max_q Omega_q] / (1 + 2 lambda + lambda mu)
//! ```
//!
//! lower-bounds the exponent at which the probability of correct decoding
//! vanishes outside the capacity region.
//!
//! When `W1` has zero entries `Omega_q` can grow without bound as a row of
//! `p_{X|U}` approaches a face of the simplex. The channel maximum then is
//! `+inf`, detected by re-polishing the optimum under a smaller coordinate floor.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{
    embed_params, single_user_warm_starts, trace_boundary, RatePair, RegionBoundary,
};
use crate::channel::DegradedBroadcastChannel;
use crate::dist::{JointSnapshot, JointUXYZ, ParamMarginals};
use crate::error::{Error, Result};
use crate::info::{cmi_raw, mi_uz_raw};
use crate::optim::{ascend, grid_maximize, maximize, Layout, OptConfig};

/// Increase under a smaller floor that marks the maximum as unbounded.
const DIVERGENCE_JUMP: f64 = 1e-3;
const POLISH_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentParams {
    mu: f64,
    lambda: f64,
    theta: f64,
}

impl ExponentParams {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::OutOfDomain {
                what: "mu",
                value: mu,
            });
        }
        Ok(Self {
            mu,
            lambda,
            theta: theta_from_lambda(lambda)?,
        })
    }

    pub fn from_theta(mu: f64, theta: f64) -> Result<Self> {
        Self::new(mu, lambda_from_theta(theta)?)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// `lambda = theta / (1 - theta)` for `theta` in (0, 1).
pub fn lambda_from_theta(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::OutOfDomain {
            what: "theta",
            value: theta,
        });
    }
    Ok(theta / (1.0 - theta))
}

/// `theta = lambda / (1 + lambda)` for `lambda > 0`.
pub fn theta_from_lambda(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::OutOfDomain {
            what: "lambda",
            value: lambda,
        });
    }
    Ok(lambda / (1.0 + lambda))
}

pub fn omega_integrand(
    joint: &JointUXYZ,
    mu: f64,
    u: usize,
    x: usize,
    y: usize,
    z: usize,
) -> Result<f64> {
    let (nu, nx, ny, nz) = joint.sizes();
    for (i, n) in [(u, nu), (x, nx), (y, ny), (z, nz)] {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, size: n });
        }
    }
    if joint.prob(u, x, y, z) <= 0.0 {
        return Err(Error::ZeroProbabilityPoint { u, x, y, z });
    }
    Ok(density(joint, mu, u, x, y, z))
}

#[inline]
fn density(joint: &JointUXYZ, mu: f64, u: usize, x: usize, y: usize, z: usize) -> f64 {
    let w1 = joint.channel().w1().get(x, y);
    mu * (w1 / joint.q_y_given_u(u, y)).ln() + (joint.q_z_given_u(u, z) / joint.q_z(z)).ln()
}

/// Numerically stable running `log sum exp`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl LogSumExp {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    #[inline]
    pub fn push(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t > self.max {
            self.scaled = self.scaled * (self.max - t).exp() + 1.0;
            self.max = t;
        } else {
            self.scaled += (t - self.max).exp();
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// `Omega_q = log sum_{u,x,y,z} q(u,x,y,z) exp(lambda omega)` over cells of positive mass.
pub fn omega_q(joint: &JointUXYZ, mu: f64, lambda: f64) -> f64 {
    let (nu, nx, ny, nz) = joint.sizes();
    let ch = joint.channel();
    let mut acc = LogSumExp::new();
    for u in 0..nu {
        for x in 0..nx {
            let qux = joint.q_ux(u, x);
            if qux <= 0.0 {
                continue;
            }
            for y in 0..ny {
                let w1 = ch.w1().get(x, y);
                if w1 == 0.0 {
                    continue;
                }
                let first = mu * (w1 / joint.q_y_given_u(u, y)).ln();
                for z in 0..nz {
                    let w2 = ch.w2().get(y, z);
                    if w2 == 0.0 {
                        continue;
                    }
                    let second = (joint.q_z_given_u(u, z) / joint.q_z(z)).ln();
                    acc.push((qux * w1 * w2).ln() + lambda * (first + second));
                }
            }
        }
    }
    acc.value()
}

/// `Lambda_q = exp(Omega_q)`; at least 1 by Jensen.
pub fn big_lambda(joint: &JointUXYZ, params: &ExponentParams) -> f64 {
    omega_q(joint, params.mu, params.lambda).exp()
}

/// `Omega_q` straight from flat joint parameters, without building a [`JointUXYZ`].
pub fn omega_objective(
    ch: &DegradedBroadcastChannel,
    u_size: usize,
    mu: f64,
    lambda: f64,
    params: &[f64],
) -> f64 {
    let (nx, ny, nz) = (ch.x_size(), ch.y_size(), ch.z_size());
    let (w1, w2) = (ch.w1(), ch.w2());
    let m = ParamMarginals::new(ch, u_size, params);
    let mut acc = LogSumExp::new();
    for u in 0..u_size {
        for x in 0..nx {
            let qux = params[u] * params[u_size + u * nx + x];
            if qux <= 0.0 {
                continue;
            }
            for y in 0..ny {
                let a = w1.get(x, y);
                if a == 0.0 {
                    continue;
                }
                let first = mu * (a / m.y_given_u[u * ny + y]).ln();
                for z in 0..nz {
                    let b = w2.get(y, z);
                    if b == 0.0 {
                        continue;
                    }
                    let second = (m.z_given_u[u * nz + z] / m.z[z]).ln();
                    acc.push((qux * a * b).ln() + lambda * (first + second));
                }
            }
        }
    }
    acc.value()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaConfig {
    pub opt: OptConfig,
    /// Also maximize with `|U| = |X| + 2` and report the larger value.
    pub cardinality_check: bool,
}

impl Default for OmegaConfig {
    fn default() -> Self {
        Self {
            opt: OptConfig::default(),
            cardinality_check: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OmegaResult {
    /// `+inf` when the maximum is unbounded.
    pub omega: f64,
    pub u_size: usize,
    pub joint: Option<JointSnapshot>,
    /// Gap between the best and runner-up restarts.
    pub dispersion: f64,
    pub certified: bool,
    /// Value found with `|U| = |X| + 2` when the cardinality check ran.
    pub omega_wide: Option<f64>,
}

impl OmegaResult {
    pub fn is_divergent(&self) -> bool {
        self.omega == f64::INFINITY
    }
}

/// Grid used to arbitrate uncertified binary maximizations. It only has to
/// bound the optimum from below, so it is coarser than the capacity oracle.
const ARBITER_RESOLUTION: usize = 24;

/// Maximum of `Omega_q` over joints with the given auxiliary alphabet size.
pub fn omega_max_with_u(
    ch: &DegradedBroadcastChannel,
    params: &ExponentParams,
    u_size: usize,
    opt: &OptConfig,
) -> Result<OmegaResult> {
    let (mu, lambda) = (params.mu, params.lambda);
    let nx = ch.x_size();
    let layout = Layout::joint(u_size, nx);
    let f = |p: &[f64]| omega_objective(ch, u_size, mu, lambda, p);
    let warm = if u_size >= nx {
        single_user_warm_starts(ch, u_size)
    } else {
        Vec::new()
    };
    let outcome = maximize(&f, &layout, opt, &warm);

    let polish_cfg = OptConfig {
        floor: POLISH_FLOOR,
        max_iter: 80,
        ..opt.clone()
    };
    let (polished, _) = ascend(&f, &layout, &outcome.point, &polish_cfg);
    if !outcome.value.is_finite() || polished - outcome.value > DIVERGENCE_JUMP {
        return Ok(OmegaResult {
            omega: f64::INFINITY,
            u_size,
            joint: None,
            dispersion: 0.0,
            certified: true,
            omega_wide: None,
        });
    }

    let mut value = outcome.value;
    let mut point = outcome.point;
    if !outcome.certified {
        let arbiter = if nx == 2 {
            grid_maximize(&f, &Layout::joint(2, 2), ARBITER_RESOLUTION)
        } else {
            None
        };
        match arbiter {
            Some((gv, gp)) if gv <= value + 2e-3 * value.abs().max(1.0) => {
                if gv > value {
                    value = gv;
                    point = embed_params(&gp, 2, u_size.max(2), nx);
                }
            }
            Some((gv, _)) => {
                return Err(Error::OptimizerDidNotConverge(format!(
                    "Omega(mu={mu}, lambda={lambda}): optimizer {value} below grid oracle {gv}"
                )))
            }
            None => {
                return Err(Error::OptimizerDidNotConverge(format!(
                    "Omega(mu={mu}, lambda={lambda}): restart dispersion {:e}",
                    outcome.dispersion
                )))
            }
        }
    }
    let joint = JointUXYZ::from_params(&point, point.len() / (nx + 1), ch);
    Ok(OmegaResult {
        omega: value,
        u_size,
        joint: Some(JointSnapshot::from(&joint)),
        dispersion: outcome.dispersion,
        certified: outcome.certified,
        omega_wide: None,
    })
}

/// `Omega^(mu,lambda)(W1,W2)`, maximized with `|U| = |X|`.
pub fn omega_channel(
    ch: &DegradedBroadcastChannel,
    params: &ExponentParams,
    cfg: &OmegaConfig,
) -> Result<OmegaResult> {
    let nx = ch.x_size();
    let mut base = omega_max_with_u(ch, params, nx, &cfg.opt)?;
    if cfg.cardinality_check && !base.is_divergent() {
        let wide = omega_max_with_u(ch, params, nx + 2, &cfg.opt)?;
        base.omega_wide = Some(wide.omega);
        if wide.omega > base.omega {
            base.omega = wide.omega;
            base.joint = wide.joint;
        }
    }
    Ok(base)
}

/// `[lambda (mu R1 + R2) - Omega] / (1 + 2 lambda + lambda mu)`.
pub fn f_fixed(params: &ExponentParams, r: RatePair, omega: f64) -> f64 {
    let (mu, lambda) = (params.mu, params.lambda);
    if omega == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    (lambda * r.weighted(mu) - omega) / (1.0 + 2.0 * lambda + lambda * mu)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub mu_range: (f64, f64),
    pub lambda_range: (f64, f64),
    pub grid_points: usize,
    pub refine_rounds: usize,
    pub shrink: f64,
    pub omega: OmegaConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            mu_range: (1e-3, 1e3),
            lambda_range: (1e-3, 1e3),
            grid_points: 25,
            refine_rounds: 3,
            shrink: 4.0,
            omega: OmegaConfig {
                opt: OptConfig {
                    max_iter: 400,
                    tol: 1e-11,
                    ..OptConfig::default().with_restarts(8)
                },
                cardinality_check: false,
            },
        }
    }
}

/// Memoized `Omega^(mu,lambda)(W1,W2)` for one channel.
pub struct ExponentSurface {
    channel: DegradedBroadcastChannel,
    cfg: SearchConfig,
    cache: Mutex<HashMap<(u64, u64), (f64, f64)>>,
}

impl ExponentSurface {
    pub fn new(channel: DegradedBroadcastChannel, cfg: SearchConfig) -> Self {
        Self {
            channel,
            cfg,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn channel(&self) -> &DegradedBroadcastChannel {
        &self.channel
    }

    pub fn config(&self) -> &SearchConfig {
        &self.cfg
    }

    /// Returns `(Omega, restart dispersion)`.
    pub fn omega(&self, mu: f64, lambda: f64) -> Result<(f64, f64)> {
        let key = (mu.to_bits(), lambda.to_bits());
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let params = ExponentParams::new(mu, lambda)?;
        let res = omega_channel(&self.channel, &params, &self.cfg.omega).map_err(|e| match e {
            Error::OptimizerDidNotConverge(m) => {
                Error::OptimizerDidNotConverge(format!("(mu={mu}, lambda={lambda}): {m}"))
            }
            other => other,
        })?;
        let v = (res.omega, res.dispersion);
        self.cache.lock().unwrap().insert(key, v);
        Ok(v)
    }

    fn log_grid(&self, range: (f64, f64)) -> Vec<f64> {
        crate::grid::logspace(range.0, range.1, self.cfg.grid_points)
    }

    /// Evaluates the coarse `(mu, lambda)` grid in parallel.
    pub fn warm(&self) -> Result<()> {
        let mus = self.log_grid(self.cfg.mu_range);
        let lambdas = self.log_grid(self.cfg.lambda_range);
        let pairs: Vec<(f64, f64)> = mus
            .iter()
            .flat_map(|&m| lambdas.iter().map(move |&l| (m, l)))
            .collect();
        pairs
            .par_iter()
            .map(|&(m, l)| self.omega(m, l).map(|_| ()))
            .collect::<Result<Vec<_>>>()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentResult {
    /// `F`, clamped below at zero.
    pub f: f64,
    /// Best candidate value before clamping.
    #[serde(with = "crate::float_serde")]
    pub pre_clamp: f64,
    pub mu_star: f64,
    pub lambda_star: f64,
    /// `Omega^(mu*,lambda*)(W1,W2)`.
    pub omega: f64,
    /// Restart dispersion of the `Omega` maximization at the optimum.
    pub certificate: f64,
}

/// `F(R1,R2)` by a log-spaced grid over `(mu, lambda)` followed by
/// coordinate-ascent refinement with geometrically shrinking steps.
pub fn f_sup(surface: &ExponentSurface, r: RatePair) -> Result<ExponentResult> {
    surface.warm()?;
    let cfg = surface.config();
    let (lmu_lo, lmu_hi) = (cfg.mu_range.0.ln(), cfg.mu_range.1.ln());
    let (lla_lo, lla_hi) = (cfg.lambda_range.0.ln(), cfg.lambda_range.1.ln());
    let eval = |lm: f64, ll: f64| -> Result<(f64, f64, f64)> {
        let (mu, lambda) = (lm.exp(), ll.exp());
        let (omega, disp) = surface.omega(mu, lambda)?;
        let params = ExponentParams::new(mu, lambda)?;
        Ok((f_fixed(&params, r, omega), omega, disp))
    };

    let mus = surface.log_grid(cfg.mu_range);
    let lambdas = surface.log_grid(cfg.lambda_range);
    let mut best = (f64::NEG_INFINITY, lmu_lo, lla_lo, f64::INFINITY, 0.0);
    for &m in &mus {
        for &l in &lambdas {
            let (lm, ll) = (m.ln(), l.ln());
            let (v, om, d) = eval(lm, ll)?;
            if v > best.0 {
                best = (v, lm, ll, om, d);
            }
        }
    }

    let mut step_mu = (lmu_hi - lmu_lo) / (cfg.grid_points.max(2) - 1) as f64;
    let mut step_la = (lla_hi - lla_lo) / (cfg.grid_points.max(2) - 1) as f64;
    for _ in 0..cfg.refine_rounds {
        step_mu /= cfg.shrink;
        step_la /= cfg.shrink;
        for _ in 0..64 {
            let mut moved = false;
            let (_, lm, ll, _, _) = best;
            for (dm, dl) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                let cm = (lm + dm * step_mu).clamp(lmu_lo, lmu_hi);
                let cl = (ll + dl * step_la).clamp(lla_lo, lla_hi);
                let (v, om, d) = eval(cm, cl)?;
                if v > best.0 {
                    best = (v, cm, cl, om, d);
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
    }
    let (pre, lm, ll, omega, disp) = best;
    Ok(ExponentResult {
        f: pre.max(0.0),
        pre_clamp: pre,
        mu_star: lm.exp(),
        lambda_star: ll.exp(),
        omega,
        certificate: disp,
    })
}

/// Exterior points: `(1 + margin)` times the radial extent of the swept
/// polygon along random directions. The polygon contains the region, so these
/// are strictly outside it.
pub fn sample_exterior(
    boundary: &RegionBoundary,
    count: usize,
    margin: f64,
    seed: u64,
) -> Vec<RatePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let angle: f64 = rand::Rng::random_range(&mut rng, 0.0..std::f64::consts::FRAC_PI_2);
            let dir = RatePair {
                r1: angle.cos(),
                r2: angle.sin(),
            };
            let s = boundary.radial_extent(dir) * (1.0 + margin);
            RatePair {
                r1: s * dir.r1,
                r2: s * dir.r2,
            }
        })
        .collect()
}

/// Interior points: random convex combinations of achieving corners, scaled
/// into `[lo, hi]` of their length.
pub fn sample_interior(
    boundary: &RegionBoundary,
    count: usize,
    lo: f64,
    hi: f64,
    seed: u64,
) -> Vec<RatePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corners: Vec<RatePair> = boundary.points.iter().map(|p| p.corner).collect();
    (0..count)
        .map(|_| {
            let w = crate::dist::sample_simplex_with(&mut rng, corners.len(), 1.0);
            let (mut r1, mut r2) = (0.0, 0.0);
            for (c, &wi) in corners.iter().zip(w.weights()) {
                r1 += wi * c.r1;
                r2 += wi * c.r2;
            }
            let s: f64 = rand::Rng::random_range(&mut rng, lo..hi);
            RatePair {
                r1: s * r1,
                r2: s * r2,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyConfig {
    pub mus: Vec<f64>,
    /// Evenly spaced grid for the monotonicity and midpoint-convexity check.
    pub lambda_grid: Vec<f64>,
    pub limit_lambdas: Vec<f64>,
    pub random_q: usize,
    pub exterior_points: usize,
    pub boundary_mus: Vec<f64>,
    pub seed: u64,
    pub convexity_slack: f64,
    pub limit_tol: f64,
}

impl Default for PropertyConfig {
    fn default() -> Self {
        Self {
            mus: vec![0.5, 1.0, 2.0],
            lambda_grid: (1..=20).map(|i| 0.1 * i as f64).collect(),
            limit_lambdas: vec![1e-3, 1e-4],
            random_q: 50,
            exterior_points: 10,
            boundary_mus: crate::grid::logspace(0.05, 20.0, 15),
            seed: 1,
            convexity_slack: 1e-8,
            limit_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    /// Most negative increment `Omega_q(l_{i+1}) - Omega_q(l_i)`.
    #[serde(with = "crate::float_serde")]
    pub worst_monotonicity: f64,
    /// Most negative `(Omega(l_{i-1}) + Omega(l_{i+1}))/2 - Omega(l_i)`.
    #[serde(with = "crate::float_serde")]
    pub worst_convexity: f64,
    /// Largest `|Omega_q/lambda - (mu I + I)|` per limit lambda.
    pub limit_errors: Vec<(f64, f64)>,
    pub exterior: Vec<(RatePair, f64)>,
    pub checked_q: usize,
}

/// Checks monotone convexity in `lambda`, the small-`lambda` limit, and
/// positivity of `F` outside the region.
pub fn property_suite(
    ch: &DegradedBroadcastChannel,
    cfg: &PropertyConfig,
    search: &SearchConfig,
) -> Result<PropertyReport> {
    if cfg.lambda_grid.len() < 3 || cfg.mus.is_empty() {
        return Err(Error::ConfigParse("property grids too small".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst_mono = f64::INFINITY;
    let mut worst_conv = f64::INFINITY;
    let mut limit_errors: Vec<(f64, f64)> = cfg.limit_lambdas.iter().map(|&l| (l, 0.0)).collect();
    for qi in 0..cfg.random_q {
        let q = JointUXYZ::random(&mut rng, ch.x_size(), ch, 1.0);
        for &mu in &cfg.mus {
            let vals: Vec<f64> = cfg
                .lambda_grid
                .iter()
                .map(|&l| omega_q(&q, mu, l))
                .collect();
            for i in 1..vals.len() {
                let inc = vals[i] - vals[i - 1];
                worst_mono = worst_mono.min(inc);
                if inc < -cfg.convexity_slack {
                    return Err(Error::PropertyViolation(format!(
                        "monotonicity: q#{qi}, mu={mu}, lambda={} -> {}: {inc:e}",
                        cfg.lambda_grid[i - 1],
                        cfg.lambda_grid[i]
                    )));
                }
            }
            for i in 1..vals.len() - 1 {
                let gap = 0.5 * (vals[i - 1] + vals[i + 1]) - vals[i];
                worst_conv = worst_conv.min(gap);
                if gap < -cfg.convexity_slack {
                    return Err(Error::PropertyViolation(format!(
                        "convexity: q#{qi}, mu={mu}, lambda={}: {gap:e}",
                        cfg.lambda_grid[i]
                    )));
                }
            }
            let mean = mu * cmi_raw(&q) + mi_uz_raw(&q);
            for (l, worst) in limit_errors.iter_mut() {
                let err = (omega_q(&q, mu, *l) / *l - mean).abs();
                *worst = worst.max(err);
                if err > cfg.limit_tol {
                    return Err(Error::PropertyViolation(format!(
                        "limit: q#{qi}, mu={mu}, lambda={l}: error {err:e}"
                    )));
                }
            }
        }
    }

    let mut exterior = Vec::new();
    if cfg.exterior_points > 0 {
        let boundary = trace_boundary(ch, &cfg.boundary_mus, &search.omega.opt)?;
        let surface = ExponentSurface::new(ch.clone(), search.clone());
        for r in sample_exterior(&boundary, cfg.exterior_points, 0.15, cfg.seed ^ 0xE7) {
            let res = f_sup(&surface, r)?;
            if res.f <= 0.0 {
                return Err(Error::PropertyViolation(format!(
                    "exterior point ({}, {}) has F = {}",
                    r.r1, r.r2, res.f
                )));
            }
            exterior.push((r, res.f));
        }
    }
    Ok(PropertyReport {
        worst_monotonicity: worst_mono,
        worst_convexity: worst_conv,
        limit_errors,
        exterior,
        checked_q: cfg.random_q,
    })
}
