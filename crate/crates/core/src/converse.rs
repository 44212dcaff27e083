//! Exhaustive rendering of the feedback converse at tiny blocklengths.
//!
//! A feedback process `p~` draws `L`, then at each step `X_t` given the whole
//! history `(L, X^{t-1}, Y^{t-1}, Z^{t-1})`, and passes it through `W1` then
//! `W2`. Histories of length `t` are indexed lexicographically with `l` as the
//! most significant digit followed by one `(x, y, z)` triple per step, so
//! extending a history by a triple is `h * |X||Y||Z| + triple`.
//!
//! The auxiliary variables are `U_t = (L, Y^{t-1}, Z^{t-1})` and
//! `V_t = (L, Z^{t-1})`; both are coordinate projections of the history.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::DegradedBroadcastChannel;
use crate::dist::{sample_simplex_with, JointUXYZ, SimplexVector};
use crate::error::{Error, Result};
use crate::exponent::{omega_max_with_u, omega_q, ExponentParams, LogSumExp};
use crate::optim::OptConfig;

/// Largest state space enumerated exactly.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;
const TELESCOPING_TOL: f64 = 1e-10;
const HOLDER_TOL: f64 = 1e-10;
const POTENTIAL_TOL: f64 = 1e-6;
const CARDINALITY_TOL: f64 = 1e-4;
const MIN_NORMALIZER: f64 = 1e-300;

pub(crate) fn guard(size: u128) -> Result<()> {
    if size > ENUMERATION_LIMIT {
        return Err(Error::StateSpaceTooLarge {
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Index arithmetic for histories and their projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryShape {
    pub n: usize,
    pub l_size: usize,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl HistoryShape {
    pub fn triple_count(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn triple(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.ny + y) * self.nz + z
    }

    pub fn split_triple(&self, tr: usize) -> (usize, usize, usize) {
        (
            tr / (self.ny * self.nz),
            (tr / self.nz) % self.ny,
            tr % self.nz,
        )
    }

    /// Histories of length `t`.
    pub fn histories(&self, t: usize) -> usize {
        self.l_size * self.triple_count().pow(t as u32)
    }

    /// `|U_{t+1}| = |L| (|Y||Z|)^t`.
    pub fn u_size(&self, t: usize) -> usize {
        self.l_size * (self.ny * self.nz).pow(t as u32)
    }

    /// `|V_{t+1}| = |L| |Z|^t`.
    pub fn v_size(&self, t: usize) -> usize {
        self.l_size * self.nz.pow(t as u32)
    }

    /// Message, then the `(x, y, z)` triples oldest first.
    pub fn decode(&self, t: usize, mut h: usize) -> (usize, Vec<(usize, usize, usize)>) {
        let tc = self.triple_count();
        let mut triples = vec![(0, 0, 0); t];
        for slot in triples.iter_mut().rev() {
            *slot = self.split_triple(h % tc);
            h /= tc;
        }
        (h, triples)
    }

    /// `(u, v)` projections of every history of length `t`.
    pub fn projections(&self, t: usize) -> (Vec<usize>, Vec<usize>) {
        let count = self.histories(t);
        let mut us = Vec::with_capacity(count);
        let mut vs = Vec::with_capacity(count);
        for h in 0..count {
            let (l, tr) = self.decode(t, h);
            let mut u = l;
            let mut v = l;
            for &(_, y, z) in &tr {
                u = u * self.ny * self.nz + y * self.nz + z;
                v = v * self.nz + z;
            }
            us.push(u);
            vs.push(v);
        }
        (us, vs)
    }

    /// Drops the `y` digits of an index into `U_{t+1}`.
    pub fn kappa(&self, t: usize, mut u: usize) -> usize {
        let mut zs = vec![0; t];
        for slot in zs.iter_mut().rev() {
            *slot = u % self.nz;
            u /= self.ny * self.nz;
        }
        zs.iter().fold(u, |v, &z| v * self.nz + z)
    }
}

#[derive(Debug, Clone)]
pub struct FeedbackProcess {
    shape: HistoryShape,
    p_l: SimplexVector,
    /// `kernels[t][h * |X| + x]` for histories `h` of length `t`.
    kernels: Vec<Vec<f64>>,
    channel: DegradedBroadcastChannel,
}

impl FeedbackProcess {
    pub fn new(
        channel: &DegradedBroadcastChannel,
        n: usize,
        p_l: SimplexVector,
        kernels: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let shape = HistoryShape {
            n,
            l_size: p_l.dim(),
            nx: channel.x_size(),
            ny: channel.y_size(),
            nz: channel.z_size(),
        };
        if n == 0 {
            return Err(Error::OutOfDomain {
                what: "blocklength",
                value: 0.0,
            });
        }
        guard(shape.histories(n) as u128)?;
        if kernels.len() != n {
            return Err(Error::LengthMismatch(n, kernels.len()));
        }
        for (t, k) in kernels.iter().enumerate() {
            if k.len() != shape.histories(t) * shape.nx {
                return Err(Error::DimensionMismatch(format!(
                    "step {t} kernel has {} entries, expected {}",
                    k.len(),
                    shape.histories(t) * shape.nx
                )));
            }
            for (row, r) in k.chunks(shape.nx).enumerate() {
                if let Some(&v) = r.iter().find(|v| !v.is_finite() || **v < 0.0) {
                    return Err(Error::NegativeEntry {
                        row,
                        col: t,
                        value: v,
                    });
                }
                let dev = (r.iter().sum::<f64>() - 1.0).abs();
                if dev > 1e-12 {
                    return Err(Error::RowSumViolation {
                        row,
                        deviation: dev,
                    });
                }
            }
        }
        Ok(Self {
            shape,
            p_l,
            kernels,
            channel: channel.clone(),
        })
    }

    /// Dirichlet message law and Dirichlet step kernels.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        channel: &DegradedBroadcastChannel,
        n: usize,
        l_size: usize,
        concentration: f64,
    ) -> Result<Self> {
        let nx = channel.x_size();
        let tc = nx * channel.y_size() * channel.z_size();
        guard(l_size as u128 * (tc as u128).pow(n as u32))?;
        let p_l = sample_simplex_with(rng, l_size, 1.0);
        let kernels = (0..n)
            .map(|t| {
                let rows = l_size * tc.pow(t as u32);
                (0..rows)
                    .flat_map(|_| {
                        sample_simplex_with(rng, nx, concentration)
                            .weights()
                            .to_vec()
                    })
                    .collect()
            })
            .collect();
        Self::new(channel, n, p_l, kernels)
    }

    pub fn shape(&self) -> HistoryShape {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.shape.n
    }

    pub fn p_l(&self) -> &SimplexVector {
        &self.p_l
    }

    pub fn channel(&self) -> &DegradedBroadcastChannel {
        &self.channel
    }

    pub fn kernel(&self, t: usize, h: usize, x: usize) -> f64 {
        self.kernels[t][h * self.shape.nx + x]
    }

    /// Joint law of histories of length `t`.
    pub fn history_law(&self, t: usize) -> Vec<f64> {
        let mut law = self.p_l.weights().to_vec();
        for s in 0..t {
            law = self.extend(s, &law, |_, _, _, _| 1.0);
        }
        law
    }

    /// `next[h*T + (x,y,z)] = law[h] kernel_s(x|h) W1(y|x) W2(z|y) weight(h,x,y,z)`.
    fn extend<F>(&self, s: usize, law: &[f64], mut weight: F) -> Vec<f64>
    where
        F: FnMut(usize, usize, usize, usize) -> f64,
    {
        let sh = self.shape;
        let tc = sh.triple_count();
        let mut next = vec![0.0; law.len() * tc];
        for (h, &p) in law.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for x in 0..sh.nx {
                let px = p * self.kernel(s, h, x);
                if px == 0.0 {
                    continue;
                }
                for y in 0..sh.ny {
                    let pxy = px * self.channel.w1().get(x, y);
                    if pxy == 0.0 {
                        continue;
                    }
                    for z in 0..sh.nz {
                        let m = pxy * self.channel.w2().get(y, z);
                        if m > 0.0 {
                            next[h * tc + sh.triple(x, y, z)] = m * weight(h, x, y, z);
                        }
                    }
                }
            }
        }
        next
    }

    /// Total mass of the full joint on `L x X^n x Y^n x Z^n`.
    pub fn total_mass(&self) -> f64 {
        self.history_law(self.n()).iter().sum()
    }

    /// `p~_{Z_t | V_t}` for step index `t` (history length `t`), as
    /// `v * |Z| + z`. Rows of zero mass are uniform.
    pub fn z_given_v(&self, t: usize) -> Vec<f64> {
        let sh = self.shape;
        let next = self.history_law(t + 1);
        let (_, vs) = sh.projections(t);
        let mut joint = vec![0.0; sh.v_size(t) * sh.nz];
        let tc = sh.triple_count();
        for (h, &v) in vs.iter().enumerate() {
            for tr in 0..tc {
                let (_, _, z) = sh.split_triple(tr);
                joint[v * sh.nz + z] += next[h * tc + tr];
            }
        }
        normalize_rows(&mut joint, sh.nz);
        joint
    }

    /// Single-letter joint `p~_{U_t X_t}` on `U_t x X`, as `u * |X| + x`.
    pub fn ux_marginal(&self, t: usize, law: &[f64]) -> Vec<f64> {
        let sh = self.shape;
        let (us, _) = sh.projections(t);
        let mut out = vec![0.0; sh.u_size(t) * sh.nx];
        for (h, &p) in law.iter().enumerate() {
            for x in 0..sh.nx {
                out[us[h] * sh.nx + x] += p * self.kernel(t, h, x);
            }
        }
        out
    }
}

fn normalize_rows(m: &mut [f64], width: usize) {
    for row in m.chunks_mut(width) {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row.iter_mut().for_each(|v| *v = 1.0 / width as f64);
        }
    }
}

/// Per-step auxiliary joints `q~_t` on `U_t x X x Y x Z`, each a single-letter
/// joint through the channel.
#[derive(Debug, Clone)]
pub struct AuxiliarySequence {
    pub steps: Vec<JointUXYZ>,
}

impl AuxiliarySequence {
    /// Full-support Dirichlet joints for every step.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        shape: HistoryShape,
        channel: &DegradedBroadcastChannel,
    ) -> Self {
        let steps = (0..shape.n)
            .map(|t| JointUXYZ::random(rng, shape.u_size(t), channel, 1.0))
            .collect();
        Self { steps }
    }

    /// The true single-letter joints `p~_{U_t X_t} W1 W2` of the process.
    pub fn from_process(proc: &FeedbackProcess) -> Self {
        let mut law = proc.p_l().weights().to_vec();
        let mut steps = Vec::new();
        for t in 0..proc.n() {
            steps.push(joint_from_ux(proc, t, &proc.ux_marginal(t, &law)));
            law = proc.extend(t, &law, |_, _, _, _| 1.0);
        }
        Self { steps }
    }

    fn check(&self, shape: HistoryShape) -> Result<()> {
        if self.steps.len() != shape.n {
            return Err(Error::LengthMismatch(shape.n, self.steps.len()));
        }
        for (t, q) in self.steps.iter().enumerate() {
            if q.u_size() != shape.u_size(t) {
                return Err(Error::DimensionMismatch(format!(
                    "auxiliary step {t} has |U| = {}, expected {}",
                    q.u_size(),
                    shape.u_size(t)
                )));
            }
        }
        Ok(())
    }
}

fn joint_from_ux(proc: &FeedbackProcess, t: usize, ux: &[f64]) -> JointUXYZ {
    let sh = proc.shape();
    let nu = sh.u_size(t);
    let mut params = vec![0.0; nu * (1 + sh.nx)];
    let total: f64 = ux.iter().sum();
    for u in 0..nu {
        let row = &ux[u * sh.nx..(u + 1) * sh.nx];
        let pu: f64 = row.iter().sum();
        params[u] = pu / total;
        for x in 0..sh.nx {
            params[nu + u * sh.nx + x] = if pu > 0.0 {
                row[x] / pu
            } else {
                1.0 / sh.nx as f64
            };
        }
    }
    JointUXYZ::from_params(&params, nu, proc.channel())
}

/// `log f_t` for one cell: `theta [mu log(W1/q~_{Y|U}) + log p~_{Z|V} - log q~_Z]`.
fn log_tilt(
    proc: &FeedbackProcess,
    q: &JointUXYZ,
    z_given_v: &[f64],
    theta: f64,
    mu: f64,
    (u, v): (usize, usize),
    (x, y, z): (usize, usize, usize),
) -> Result<f64> {
    let nz = proc.shape().nz;
    let qy = q.q_y_given_u(u, y);
    let qz = q.q_z(z);
    if qy <= 0.0 || qz <= 0.0 {
        return Err(Error::AbsoluteContinuityViolation {
            index: u,
            p: proc.channel().w1().get(x, y),
        });
    }
    let w1 = proc.channel().w1().get(x, y);
    let pz = z_given_v[v * nz + z];
    Ok(theta * (mu * (w1 / qy).ln() + pz.ln() - qz.ln()))
}

/// `Omega^(mu,theta)_{p~||q~} = log E_{p~}[prod_t f_t]`, by enumeration of
/// complete sequences `(l, x^n, y^n, z^n)`.
pub fn omega_pq(
    proc: &FeedbackProcess,
    aux: &AuxiliarySequence,
    params: &ExponentParams,
) -> Result<f64> {
    let sh = proc.shape();
    guard(sh.histories(sh.n) as u128)?;
    aux.check(sh)?;
    let (theta, mu) = (params.theta(), params.mu());
    let zv: Vec<Vec<f64>> = (0..sh.n).map(|t| proc.z_given_v(t)).collect();
    let tc = sh.triple_count();
    let ch = proc.channel();
    let mut acc = LogSumExp::new();
    'seq: for full in 0..sh.histories(sh.n) {
        let (l, triples) = sh.decode(sh.n, full);
        let mut log_p = proc.p_l().weights()[l].ln();
        let mut log_f = 0.0;
        let (mut h, mut u, mut v) = (l, l, l);
        for (t, &(x, y, z)) in triples.iter().enumerate() {
            let m = proc.kernel(t, h, x) * ch.w1().get(x, y) * ch.w2().get(y, z);
            if m == 0.0 || log_p == f64::NEG_INFINITY {
                continue 'seq;
            }
            log_p += m.ln();
            log_f += log_tilt(proc, &aux.steps[t], &zv[t], theta, mu, (u, v), (x, y, z))?;
            h = h * tc + sh.triple(x, y, z);
            u = u * sh.ny * sh.nz + y * sh.nz + z;
            v = v * sh.nz + z;
        }
        acc.push(log_p + log_f);
    }
    Ok(acc.value())
}

/// Normalized tilted laws `p~^(mu,theta; q~^t)` on histories of length `t`,
/// with `log C_t` and `Phi_t = C_t / C_{t-1}`.
#[derive(Debug, Clone, Serialize)]
pub struct TiltedProcess {
    pub params: ExponentParams,
    /// `log C_0, ..., log C_n` with `C_0 = 1`.
    pub log_c: Vec<f64>,
    /// `log Phi_1, ..., log Phi_n`.
    pub log_phi: Vec<f64>,
    /// `laws[t]` on histories of length `t`, `t = 0..=n`.
    pub laws: Vec<Vec<f64>>,
}

impl TiltedProcess {
    pub fn phi(&self) -> Vec<f64> {
        self.log_phi.iter().map(|v| v.exp()).collect()
    }

    pub fn sum_log_phi(&self) -> f64 {
        self.log_phi.iter().sum()
    }
}

/// One tilted step: returns `(log Phi_{t+1}, normalized law on histories of length t+1)`.
fn tilted_step(
    proc: &FeedbackProcess,
    t: usize,
    law: &[f64],
    q: &JointUXYZ,
    z_given_v: &[f64],
    params: &ExponentParams,
) -> Result<(f64, Vec<f64>)> {
    let sh = proc.shape();
    let (us, vs) = sh.projections(t);
    let (theta, mu) = (params.theta(), params.mu());
    let mut err = None;
    let mut next = proc.extend(t, law, |h, x, y, z| {
        match log_tilt(proc, q, z_given_v, theta, mu, (us[h], vs[h]), (x, y, z)) {
            Ok(lf) => lf.exp(),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let phi: f64 = next.iter().sum();
    if !phi.is_finite() || phi <= MIN_NORMALIZER {
        return Err(Error::DegenerateNormalizer {
            step: t + 1,
            log_c: phi.ln(),
        });
    }
    next.iter_mut().for_each(|v| *v /= phi);
    Ok((phi.ln(), next))
}

pub fn tilted_recursion(
    proc: &FeedbackProcess,
    aux: &AuxiliarySequence,
    params: &ExponentParams,
) -> Result<TiltedProcess> {
    let sh = proc.shape();
    guard(sh.histories(sh.n) as u128)?;
    aux.check(sh)?;
    let mut laws = vec![proc.p_l().weights().to_vec()];
    let mut log_c = vec![0.0];
    let mut log_phi = Vec::new();
    for t in 0..sh.n {
        let (lp, next) = tilted_step(proc, t, &laws[t], &aux.steps[t], &proc.z_given_v(t), params)?;
        log_phi.push(lp);
        log_c.push(log_c[t] + lp);
        laws.push(next);
    }
    Ok(TiltedProcess {
        params: *params,
        log_c,
        log_phi,
        laws,
    })
}

/// `Phi_t` in the single-letter expectation form
/// `sum_{u,x,y,z} p~^(t-1)_{U_t X_t}(u,x) W1 W2 f_t`.
pub fn phi_expectation_form(
    proc: &FeedbackProcess,
    aux: &AuxiliarySequence,
    tp: &TiltedProcess,
) -> Result<Vec<f64>> {
    let sh = proc.shape();
    let (theta, mu) = (tp.params.theta(), tp.params.mu());
    let ch = proc.channel();
    let mut out = Vec::with_capacity(sh.n);
    for t in 0..sh.n {
        let ux = proc.ux_marginal(t, &tp.laws[t]);
        let zv = proc.z_given_v(t);
        let mut phi = 0.0;
        for u in 0..sh.u_size(t) {
            let v = sh.kappa(t, u);
            for x in 0..sh.nx {
                let p = ux[u * sh.nx + x];
                if p == 0.0 {
                    continue;
                }
                for y in 0..sh.ny {
                    for z in 0..sh.nz {
                        let m = p * ch.w(x, y, z);
                        if m > 0.0 {
                            phi += m * log_tilt(
                                proc,
                                &aux.steps[t],
                                &zv,
                                theta,
                                mu,
                                (u, v),
                                (x, y, z),
                            )?
                            .exp();
                        }
                    }
                }
            }
        }
        out.push(phi);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelescopingCheck {
    pub holds: bool,
    pub sum_log_phi: f64,
    pub omega: f64,
    pub gap: f64,
}

pub fn phi_telescoping_check(tp: &TiltedProcess, omega_value: f64) -> TelescopingCheck {
    let s = tp.sum_log_phi();
    let gap = (s - omega_value).abs();
    TelescopingCheck {
        holds: gap <= TELESCOPING_TOL,
        sum_log_phi: s,
        omega: omega_value,
        gap,
    }
}

/// Builds `q~_t = p~^(t-1)_{U_t X_t} W1 W2` from the tilted law of the previous
/// step, returning the sequence and the tilted process it induces.
pub fn adaptive_aux_with_tilt(
    proc: &FeedbackProcess,
    params: &ExponentParams,
) -> Result<(AuxiliarySequence, TiltedProcess)> {
    let sh = proc.shape();
    guard(sh.histories(sh.n) as u128)?;
    let mut laws = vec![proc.p_l().weights().to_vec()];
    let mut log_c = vec![0.0];
    let mut log_phi = Vec::new();
    let mut steps = Vec::new();
    for t in 0..sh.n {
        let q = joint_from_ux(proc, t, &proc.ux_marginal(t, &laws[t]));
        let (lp, next) = tilted_step(proc, t, &laws[t], &q, &proc.z_given_v(t), params)?;
        steps.push(q);
        log_phi.push(lp);
        log_c.push(log_c[t] + lp);
        laws.push(next);
    }
    Ok((
        AuxiliarySequence { steps },
        TiltedProcess {
            params: *params,
            log_c,
            log_phi,
            laws,
        },
    ))
}

pub fn adaptive_aux_choice(
    proc: &FeedbackProcess,
    params: &ExponentParams,
) -> Result<AuxiliarySequence> {
    adaptive_aux_with_tilt(proc, params).map(|(a, _)| a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderStep {
    pub log_phi: f64,
    /// `(1 - theta) Omega^(mu,lambda)_{q~_t} + theta log E[B]`.
    pub log_bound: f64,
    pub omega_q: f64,
    pub expected_b: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub holds: bool,
    pub steps: Vec<HolderStep>,
}

/// Per-step `Phi_t <= (E[A^lambda])^{1-theta} (E[B])^theta` under the adaptive `q~_t`,
/// with `A = (W1/q~_{Y|U})^mu q~_{Z|U}/q~_Z` and `B = p~_{Z|V}/q~_{Z|U}`.
pub fn holder_step_check(
    proc: &FeedbackProcess,
    tp: &TiltedProcess,
    aux: &AuxiliarySequence,
    params: &ExponentParams,
) -> Result<HolderReport> {
    let sh = proc.shape();
    aux.check(sh)?;
    let (theta, lambda, mu) = (params.theta(), params.lambda(), params.mu());
    let mut steps = Vec::new();
    for t in 0..sh.n {
        let q = &aux.steps[t];
        let zv = proc.z_given_v(t);
        let om = omega_q(q, mu, lambda);
        let mut eb = 0.0;
        for u in 0..sh.u_size(t) {
            let pu = q.p_u().weights()[u];
            if pu == 0.0 {
                continue;
            }
            let v = sh.kappa(t, u);
            for z in 0..sh.nz {
                let qz = q.q_z_given_u(u, z);
                if qz > 0.0 {
                    eb += pu * zv[v * sh.nz + z];
                }
            }
        }
        let log_bound = (1.0 - theta) * om + theta * eb.ln();
        let log_phi = tp.log_phi[t];
        steps.push(HolderStep {
            log_phi,
            log_bound,
            omega_q: om,
            expected_b: eb,
            slack: log_bound - log_phi,
        });
    }
    Ok(HolderReport {
        holds: steps.iter().all(|s| s.slack >= -HOLDER_TOL),
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialReport {
    /// `(1/n) Omega_{p~||q~}` for the adaptive choice.
    pub adaptive: f64,
    /// Smallest `(1/n) Omega_{p~||q~}` over all tested sequences.
    pub best: f64,
    /// `Omega^(mu,lambda)(W1,W2) / (1 + lambda)`.
    pub bound: f64,
    pub slack: f64,
    /// Largest `Omega_{q~_t} - Omega^(mu,lambda)(W1,W2)` over adaptive steps.
    pub worst_step_excess: f64,
    pub holds: bool,
}

/// Checks `min_{q~} (1/n) Omega_{p~||q~} <= Omega^(mu,lambda)(W1,W2)/(1+lambda)`
/// given the channel value `omega_w`.
pub fn potential_bound_check<R: Rng + ?Sized>(
    proc: &FeedbackProcess,
    params: &ExponentParams,
    omega_w: f64,
    extra_random: usize,
    rng: &mut R,
) -> Result<PotentialReport> {
    let n = proc.n() as f64;
    let aux = adaptive_aux_choice(proc, params)?;
    let adaptive = omega_pq(proc, &aux, params)? / n;
    let mut best = adaptive;
    for _ in 0..extra_random {
        let r = AuxiliarySequence::random(rng, proc.shape(), proc.channel());
        best = best.min(omega_pq(proc, &r, params)? / n);
    }
    let bound = omega_w / (1.0 + params.lambda());
    let worst_step_excess = aux
        .steps
        .iter()
        .map(|q| omega_q(q, params.mu(), params.lambda()) - omega_w)
        .fold(f64::NEG_INFINITY, f64::max);
    let slack = bound - best;
    let report = PotentialReport {
        adaptive,
        best,
        bound,
        slack,
        worst_step_excess,
        holds: slack >= -POTENTIAL_TOL,
    };
    if !report.holds {
        return Err(Error::BoundViolated(format!(
            "(1/n) Omega_pq = {best} exceeds Omega/(1+lambda) = {bound} at mu={}, theta={}, n={}",
            params.mu(),
            params.theta(),
            proc.n()
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardinalityReport {
    pub omega_small: f64,
    pub omega_wide: f64,
    pub gap: f64,
    pub agree: bool,
}

/// Compares `max Omega_q` over `|U| = |X|` and `|U| = |X| + 2`.
pub fn cardinality_check(
    ch: &DegradedBroadcastChannel,
    params: &ExponentParams,
    restarts: usize,
    seed: u64,
) -> Result<CardinalityReport> {
    if ch.x_size() > 3 {
        return Err(Error::OutOfDomain {
            what: "|X| for the cardinality check",
            value: ch.x_size() as f64,
        });
    }
    let opt = OptConfig::default().with_restarts(restarts).with_seed(seed);
    let small = omega_max_with_u(ch, params, ch.x_size(), &opt)?.omega;
    let wide = omega_max_with_u(ch, params, ch.x_size() + 2, &opt)?.omega;
    let gap = if small == wide {
        0.0
    } else {
        (small - wide).abs()
    };
    Ok(CardinalityReport {
        omega_small: small,
        omega_wide: wide,
        gap,
        agree: gap <= CARDINALITY_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofSuiteConfig {
    pub n_list: Vec<usize>,
    pub l_sizes: Vec<usize>,
    pub instances: usize,
    pub thetas: Vec<f64>,
    pub mus: Vec<f64>,
    /// Random auxiliary sequences tried next to the adaptive one.
    pub extra_random_aux: usize,
    pub seed: u64,
    pub omega: crate::exponent::OmegaConfig,
}

impl Default for ProofSuiteConfig {
    fn default() -> Self {
        Self {
            n_list: vec![1, 2, 3],
            l_sizes: vec![1, 2, 4],
            instances: 200,
            thetas: vec![0.25, 0.5, 0.75],
            mus: vec![0.5, 1.0, 2.0],
            extra_random_aux: 2,
            seed: 7,
            omega: crate::exponent::OmegaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckTally {
    pub checks: usize,
    pub passed: usize,
    /// Smallest slack seen (negative gap for equalities).
    #[serde(with = "crate::float_serde")]
    pub worst: f64,
}

impl CheckTally {
    fn new() -> Self {
        Self {
            checks: 0,
            passed: 0,
            worst: f64::INFINITY,
        }
    }

    fn record(&mut self, ok: bool, slack: f64) {
        self.checks += 1;
        self.passed += ok as usize;
        self.worst = self.worst.min(slack);
    }

    fn merge(&mut self, other: &CheckTally) {
        self.checks += other.checks;
        self.passed += other.passed;
        self.worst = self.worst.min(other.worst);
    }

    pub fn all_passed(&self) -> bool {
        self.checks == self.passed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofSuiteReport {
    pub instances: usize,
    /// Slack is `-|Omega_pq - sum log Phi_t|`.
    pub telescoping: CheckTally,
    /// Slack is `-|Phi_t - Phi_t(expectation form)|`.
    pub expectation_form: CheckTally,
    pub holder: CheckTally,
    pub potential: CheckTally,
    /// `Omega^(mu,lambda)(W1,W2)` per `(mu, theta)`.
    pub channel_omegas: Vec<(f64, f64, f64)>,
}

impl ProofSuiteReport {
    pub fn all_passed(&self) -> bool {
        self.telescoping.all_passed()
            && self.expectation_form.all_passed()
            && self.holder.all_passed()
            && self.potential.all_passed()
    }
}

/// Telescoping, Hoelder and potential-bound checks over random feedback processes.
pub fn run_proof_suite(
    ch: &DegradedBroadcastChannel,
    cfg: &ProofSuiteConfig,
) -> Result<ProofSuiteReport> {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rayon::prelude::*;

    if cfg.n_list.is_empty()
        || cfg.l_sizes.is_empty()
        || cfg.thetas.is_empty()
        || cfg.mus.is_empty()
    {
        return Err(Error::ConfigParse(
            "proof suite grids must be nonempty".into(),
        ));
    }
    let mut params = Vec::new();
    for &mu in &cfg.mus {
        for &theta in &cfg.thetas {
            params.push(ExponentParams::from_theta(mu, theta)?);
        }
    }
    let omegas: Vec<f64> = params
        .par_iter()
        .map(|p| crate::exponent::omega_channel(ch, p, &cfg.omega).map(|r| r.omega))
        .collect::<Result<_>>()?;

    let tallies: Vec<[CheckTally; 4]> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::optim::restart_seed(cfg.seed, i as u64));
            let n = cfg.n_list[i % cfg.n_list.len()];
            let l = cfg.l_sizes[(i / cfg.n_list.len()) % cfg.l_sizes.len()];
            let conc = if i % 2 == 0 { 1.0 } else { 0.3 };
            let proc = FeedbackProcess::random(&mut rng, ch, n, l, conc)?;
            let mut t = [
                CheckTally::new(),
                CheckTally::new(),
                CheckTally::new(),
                CheckTally::new(),
            ];
            for (p, &omega_w) in params.iter().zip(&omegas) {
                let aux = AuxiliarySequence::random(&mut rng, proc.shape(), ch);
                let tp = tilted_recursion(&proc, &aux, p)?;
                let tele = phi_telescoping_check(&tp, omega_pq(&proc, &aux, p)?);
                t[0].record(tele.holds, -tele.gap);
                let alt = phi_expectation_form(&proc, &aux, &tp)?;
                let gap = alt
                    .iter()
                    .zip(tp.phi())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                t[1].record(gap <= TELESCOPING_TOL, -gap);

                let (adaptive, atp) = adaptive_aux_with_tilt(&proc, p)?;
                let holder = holder_step_check(&proc, &atp, &adaptive, p)?;
                let worst = holder
                    .steps
                    .iter()
                    .map(|s| s.slack)
                    .fold(f64::INFINITY, f64::min);
                t[2].record(holder.holds, worst);
                match potential_bound_check(&proc, p, omega_w, cfg.extra_random_aux, &mut rng) {
                    Ok(rep) => t[3].record(true, rep.slack),
                    Err(Error::BoundViolated(msg)) => {
                        log::warn!("instance {i}: {msg}");
                        t[3].record(false, f64::NEG_INFINITY)
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(t)
        })
        .collect::<Result<_>>()?;

    let mut sum = [
        CheckTally::new(),
        CheckTally::new(),
        CheckTally::new(),
        CheckTally::new(),
    ];
    for t in &tallies {
        for (a, b) in sum.iter_mut().zip(t) {
            a.merge(b);
        }
    }
    let [telescoping, expectation_form, holder, potential] = sum;
    Ok(ProofSuiteReport {
        instances: cfg.instances,
        telescoping,
        expectation_form,
        holder,
        potential,
        channel_omegas: params
            .iter()
            .zip(&omegas)
            .map(|(p, &o)| (p.mu(), p.theta(), o))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bsc() -> DegradedBroadcastChannel {
        DegradedBroadcastChannel::bsc_cascade(0.1, 0.2)
    }

    #[test]
    fn shape_indexing() {
        let sh = HistoryShape {
            n: 2,
            l_size: 3,
            nx: 2,
            ny: 2,
            nz: 2,
        };
        assert_eq!(sh.histories(2), 3 * 64);
        let h = (2 * 8 + sh.triple(1, 0, 1)) * 8 + sh.triple(0, 1, 1);
        let (l, tr) = sh.decode(2, h);
        assert_eq!(l, 2);
        assert_eq!(tr, vec![(1, 0, 1), (0, 1, 1)]);
        let (us, vs) = sh.projections(2);
        // u = (l, y1 z1, y2 z2), v = (l, z1, z2).
        assert_eq!(us[h], (2 * 4 + 1) * 4 + 3);
        assert_eq!(vs[h], (2 * 2 + 1) * 2 + 1);
        assert_eq!(sh.kappa(2, us[h]), vs[h]);
    }

    #[test]
    fn random_process_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = FeedbackProcess::random(&mut rng, &bsc(), 3, 2, 1.0).unwrap();
        assert!((p.total_mass() - 1.0).abs() < 1e-9);
        for t in 0..3 {
            for row in p.z_given_v(t).chunks(2) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_tilt_is_trivial() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = FeedbackProcess::random(&mut rng, &bsc(), 2, 2, 1.0).unwrap();
        let aux = AuxiliarySequence::random(&mut rng, p.shape(), p.channel());
        let params = ExponentParams::from_theta(1.0, 1e-300).unwrap();
        let tp = tilted_recursion(&p, &aux, &params).unwrap();
        for lp in &tp.log_phi {
            assert!(lp.abs() < 1e-12);
        }
        let law = p.history_law(2);
        for (a, b) in tp.laws[2].iter().zip(&law) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(omega_pq(&p, &aux, &params).unwrap().abs() < 1e-12);
    }

    #[test]
    fn single_step_matches_single_letter_functional() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = FeedbackProcess::random(&mut rng, &bsc(), 1, 3, 1.0).unwrap();
        let aux = AuxiliarySequence::from_process(&p);
        let params = ExponentParams::from_theta(1.7, 0.4).unwrap();
        let direct = omega_pq(&p, &aux, &params).unwrap();
        // With q~ equal to the true law, p~_{Z|V} = q~_{Z|U} at n = 1.
        let single = omega_q(&aux.steps[0], 1.7, 0.4);
        assert!((direct - single).abs() < 1e-12);
        let tp = tilted_recursion(&p, &aux, &params).unwrap();
        assert!((tp.log_phi[0] - direct).abs() < 1e-12);
    }

    #[test]
    fn telescoping_and_expectation_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            let p = FeedbackProcess::random(&mut rng, &bsc(), n, 2, 0.7).unwrap();
            let aux = AuxiliarySequence::random(&mut rng, p.shape(), p.channel());
            let params = ExponentParams::from_theta(1.0, 0.5).unwrap();
            let tp = tilted_recursion(&p, &aux, &params).unwrap();
            let om = omega_pq(&p, &aux, &params).unwrap();
            assert!(phi_telescoping_check(&tp, om).holds);
            let alt = phi_expectation_form(&p, &aux, &tp).unwrap();
            for (a, b) in alt.iter().zip(tp.phi()) {
                assert!((a - b).abs() < 1e-10);
            }
            for law in &tp.laws {
                assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn adaptive_aux_is_channel_consistent_and_first_step_untilted() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = FeedbackProcess::random(&mut rng, &bsc(), 2, 2, 1.0).unwrap();
        let params = ExponentParams::from_theta(2.0, 0.75).unwrap();
        let aux = adaptive_aux_choice(&p, &params).unwrap();
        let truth = AuxiliarySequence::from_process(&p);
        for u in 0..2 {
            assert!(
                (aux.steps[0].p_u().weights()[u] - truth.steps[0].p_u().weights()[u]).abs() < 1e-15
            );
        }
        let cond = aux.steps[1]
            .conditional(crate::dist::Var::Y, &[crate::dist::Var::X])
            .unwrap();
        for x in 0..2 {
            for y in 0..2 {
                assert!((cond.rows[x][y] - bsc().w1().get(x, y)).abs() < 1e-12);
            }
        }
        // Under the adaptive choice Phi_t is the q~_t expectation of f_t.
        let (aux, tp) = adaptive_aux_with_tilt(&p, &params).unwrap();
        let rep = holder_step_check(&p, &tp, &aux, &params).unwrap();
        assert!(rep.holds);
        for s in &rep.steps {
            assert!(s.expected_b <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn guard_and_domain_errors() {
        let ch = DegradedBroadcastChannel::identity(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            FeedbackProcess::random(&mut rng, &ch, 8, 2, 1.0),
            Err(Error::StateSpaceTooLarge { .. })
        ));
        let useless = DegradedBroadcastChannel::new(
            crate::channel::StochasticMatrix::constant_rows(2, &[0.5, 0.5]).unwrap(),
            crate::channel::StochasticMatrix::constant_rows(2, &[0.5, 0.5]).unwrap(),
        )
        .unwrap();
        let rep =
            cardinality_check(&useless, &ExponentParams::new(1.0, 1.0).unwrap(), 4, 1).unwrap();
        assert!(rep.agree);
        assert!(rep.omega_small.abs() < 1e-12);
    }
}
