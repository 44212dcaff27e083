//! Feedback codes over the degraded broadcast channel, their exact and Monte
//! Carlo correct-decoding probabilities, and exhaustive checks of the
//! change-of-measure bounds behind the converse.
//!
//! An encoder at step `t` sees `(k, l, y^{t-1}, z^{t-1})`; histories of
//! received pairs are indexed base `|Y||Z|`, oldest pair most significant,
//! matching the `U_t` indexing of [`crate::converse`]. Messages are uniform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::RatePair;
use crate::channel::DegradedBroadcastChannel;
use crate::converse::{
    adaptive_aux_choice, guard, omega_pq, AuxiliarySequence, FeedbackProcess, HistoryShape,
};
use crate::dist::{random_stochastic, sample_simplex_with, SimplexVector};
use crate::error::{Error, Result};
use crate::exponent::ExponentParams;
use crate::optim::restart_seed;

/// Inclusion tolerance for the events in the change-of-measure bounds.
const EVENT_TOL: f64 = 1e-12;
const BOUND_TOL: f64 = 1e-9;
const WILSON_Z: f64 = 1.959_963_984_540_054;
const MC_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    /// Independent uniform codeword symbols for every `(k, l)`.
    IidInput,
    /// Cloud centers per `l`, satellites per `(k, l)` through a random test channel.
    Superposition,
    /// One codebook per value of the previous `y`; the encoder switches on feedback.
    Feedback,
}

impl std::str::FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid-input" | "iid" => Ok(Self::IidInput),
            "superposition" => Ok(Self::Superposition),
            "feedback" => Ok(Self::Feedback),
            other => Err(Error::ConfigParse(format!("unknown ensemble {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackCode {
    pub n: usize,
    pub k_size: usize,
    pub l_size: usize,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// `encoders[t][((k * L + l) * (|Y||Z|)^t + g) * |X| + x]`.
    pub encoders: Vec<Vec<f64>>,
    /// `psi1[y^n]`, base `|Y|`, oldest symbol most significant.
    pub psi1: Vec<usize>,
    pub psi2: Vec<usize>,
}

impl FeedbackCode {
    fn yz(&self) -> usize {
        self.ny * self.nz
    }

    fn msg_count(&self) -> usize {
        self.k_size * self.l_size
    }

    pub fn encoder(&self, t: usize, k: usize, l: usize, g: usize, x: usize) -> f64 {
        let hist = self.yz().pow(t as u32);
        self.encoders[t][((k * self.l_size + l) * hist + g) * self.nx + x]
    }

    /// `(1/n) log |K|` and `(1/n) log |L|`.
    pub fn rates(&self) -> RatePair {
        RatePair {
            r1: (self.k_size as f64).ln() / self.n as f64,
            r2: (self.l_size as f64).ln() / self.n as f64,
        }
    }

    pub fn validate(&self, ch: &DegradedBroadcastChannel) -> Result<()> {
        if (self.nx, self.ny, self.nz) != (ch.x_size(), ch.y_size(), ch.z_size()) {
            return Err(Error::DimensionMismatch(
                "code and channel alphabets differ".into(),
            ));
        }
        if self.n == 0 || self.k_size == 0 || self.l_size == 0 {
            return Err(Error::Empty);
        }
        if self.encoders.len() != self.n {
            return Err(Error::LengthMismatch(self.n, self.encoders.len()));
        }
        for (t, e) in self.encoders.iter().enumerate() {
            let rows = self.msg_count() * self.yz().pow(t as u32);
            if e.len() != rows * self.nx {
                return Err(Error::DimensionMismatch(format!(
                    "encoder step {t} has {} entries",
                    e.len()
                )));
            }
            for (row, r) in e.chunks(self.nx).enumerate() {
                if let Some(&v) = r.iter().find(|v| v.is_nan() || **v < 0.0) {
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
        if self.psi1.len() != self.ny.pow(self.n as u32)
            || self.psi2.len() != self.nz.pow(self.n as u32)
        {
            return Err(Error::DimensionMismatch(
                "decoder tables do not cover Y^n and Z^n".into(),
            ));
        }
        if self.psi1.iter().any(|&k| k >= self.k_size)
            || self.psi2.iter().any(|&l| l >= self.l_size)
        {
            return Err(Error::IndexOutOfRange {
                index: self.psi1.len(),
                size: self.k_size,
            });
        }
        Ok(())
    }

    /// `(y^n, z^n)` indices of every received history `g` of length `n`.
    fn split_received(&self) -> (Vec<usize>, Vec<usize>) {
        let total = self.yz().pow(self.n as u32);
        let mut ys = Vec::with_capacity(total);
        let mut zs = Vec::with_capacity(total);
        for g in 0..total {
            let (mut y, mut z, mut rest) = (0, 0, g);
            let (mut sy, mut sz) = (1, 1);
            for _ in 0..self.n {
                let pair = rest % self.yz();
                rest /= self.yz();
                y += (pair / self.nz) * sy;
                z += (pair % self.nz) * sz;
                sy *= self.ny;
                sz *= self.nz;
            }
            ys.push(y);
            zs.push(z);
        }
        (ys, zs)
    }

    /// `P(y^n, z^n | k, l)` as `[(k * L + l) * (|Y||Z|)^n + g]`, with `x` summed per step.
    pub fn received_law(&self, ch: &DegradedBroadcastChannel) -> Result<Vec<f64>> {
        self.validate(ch)?;
        let yz = self.yz();
        guard(self.msg_count() as u128 * (yz as u128).pow(self.n as u32))?;
        let mut mass = vec![1.0; self.msg_count()];
        for t in 0..self.n {
            let hist = yz.pow(t as u32);
            let mut next = vec![0.0; mass.len() * yz];
            for (idx, &m) in mass.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let row = &self.encoders[t][idx * self.nx..(idx + 1) * self.nx];
                debug_assert!(idx / hist < self.msg_count());
                for y in 0..self.ny {
                    let py: f64 = (0..self.nx).map(|x| row[x] * ch.w1().get(x, y)).sum();
                    if py == 0.0 {
                        continue;
                    }
                    for z in 0..self.nz {
                        next[idx * yz + y * self.nz + z] = m * py * ch.w2().get(y, z);
                    }
                }
            }
            mass = next;
        }
        Ok(mass)
    }

    /// Replaces both decoders by maximum-likelihood rules, ties to the smallest index.
    pub fn set_ml_decoders(&mut self, ch: &DegradedBroadcastChannel) -> Result<()> {
        self.psi1 = vec![0; self.ny.pow(self.n as u32)];
        self.psi2 = vec![0; self.nz.pow(self.n as u32)];
        let law = self.received_law(ch)?;
        let total = self.yz().pow(self.n as u32);
        let (ys, zs) = self.split_received();
        let mut like1 = vec![0.0; self.psi1.len() * self.k_size];
        let mut like2 = vec![0.0; self.psi2.len() * self.l_size];
        for k in 0..self.k_size {
            for l in 0..self.l_size {
                let base = (k * self.l_size + l) * total;
                for g in 0..total {
                    let p = law[base + g];
                    like1[ys[g] * self.k_size + k] += p;
                    like2[zs[g] * self.l_size + l] += p;
                }
            }
        }
        self.psi1 = like1.chunks(self.k_size).map(argmax_first).collect();
        self.psi2 = like2.chunks(self.l_size).map(argmax_first).collect();
        Ok(())
    }

    /// Law of `(L, X^n, Y^n, Z^n)` with the message `K` marginalized.
    pub fn induced_process(&self, ch: &DegradedBroadcastChannel) -> Result<FeedbackProcess> {
        self.validate(ch)?;
        let shape = HistoryShape {
            n: self.n,
            l_size: self.l_size,
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
        };
        guard(shape.histories(self.n) as u128)?;
        let tc = shape.triple_count();
        // Sparse (k, history, weight) with weight = prod of encoder probabilities.
        let mut entries: Vec<(usize, usize, f64)> = (0..self.k_size)
            .flat_map(|k| (0..self.l_size).map(move |l| (k, l, 1.0)))
            .collect();
        let mut kernels = Vec::with_capacity(self.n);
        for t in 0..self.n {
            let hists = shape.histories(t);
            let (us, _) = shape.projections(t);
            let u_size = shape.u_size(t);
            let mut num = vec![0.0; hists * self.nx];
            let mut den = vec![0.0; hists];
            let mut next = Vec::new();
            for &(k, h, w) in &entries {
                den[h] += w;
                let row = (k * u_size + us[h]) * self.nx;
                for x in 0..self.nx {
                    let e = self.encoders[t][row + x];
                    if e == 0.0 {
                        continue;
                    }
                    num[h * self.nx + x] += w * e;
                    if t + 1 < self.n {
                        for y in 0..self.ny {
                            for z in 0..self.nz {
                                next.push((k, h * tc + shape.triple(x, y, z), w * e));
                            }
                        }
                    }
                }
            }
            guard(next.len() as u128)?;
            for h in 0..hists {
                let row = &mut num[h * self.nx..(h + 1) * self.nx];
                if den[h] > 0.0 {
                    let s: f64 = row.iter().sum();
                    row.iter_mut().for_each(|v| *v /= s);
                } else {
                    row.iter_mut().for_each(|v| *v = 1.0 / self.nx as f64);
                }
            }
            kernels.push(num);
            entries = next;
        }
        FeedbackProcess::new(ch, self.n, SimplexVector::uniform(self.l_size), kernels)
    }
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub p_correct: f64,
    pub p_error: f64,
    pub method: Method,
    pub trials: Option<u64>,
    /// Wilson 95% interval, Monte Carlo only.
    pub interval: Option<(f64, f64)>,
    pub half_width: Option<f64>,
    pub seed: Option<u64>,
}

/// Sums the joint mass over `{psi1(y^n) = k and psi2(z^n) = l}`.
pub fn exact_correct_prob(
    code: &FeedbackCode,
    ch: &DegradedBroadcastChannel,
) -> Result<SimulationReport> {
    let law = code.received_law(ch)?;
    let total = code.yz().pow(code.n as u32);
    let (ys, zs) = code.split_received();
    let mut correct = 0.0;
    let mut wrong = 0.0;
    for k in 0..code.k_size {
        for l in 0..code.l_size {
            let base = (k * code.l_size + l) * total;
            for g in 0..total {
                let p = law[base + g];
                if code.psi1[ys[g]] == k && code.psi2[zs[g]] == l {
                    correct += p;
                } else {
                    wrong += p;
                }
            }
        }
    }
    let m = code.msg_count() as f64;
    Ok(SimulationReport {
        p_correct: correct / m,
        p_error: wrong / m,
        method: Method::Exact,
        trials: None,
        interval: None,
        half_width: None,
        seed: None,
    })
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn sample_index<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn simulate_chunk(
    code: &FeedbackCode,
    ch: &DegradedBroadcastChannel,
    trials: usize,
    seed: u64,
) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0;
    for _ in 0..trials {
        let k = rng.random_range(0..code.k_size);
        let l = rng.random_range(0..code.l_size);
        let (mut g, mut yi, mut zi) = (0, 0, 0);
        for t in 0..code.n {
            let hist = code.yz().pow(t as u32);
            let row = ((k * code.l_size + l) * hist + g) * code.nx;
            let x = sample_index(&mut rng, &code.encoders[t][row..row + code.nx]);
            let y = sample_index(&mut rng, ch.w1().row(x));
            let z = sample_index(&mut rng, ch.w2().row(y));
            g = g * code.yz() + y * code.nz + z;
            yi = yi * code.ny + y;
            zi = zi * code.nz + z;
        }
        if code.psi1[yi] == k && code.psi2[zi] == l {
            ok += 1;
        }
    }
    ok
}

/// Monte Carlo estimate, deterministic in `seed` regardless of thread count.
pub fn mc_correct_prob(
    code: &FeedbackCode,
    ch: &DegradedBroadcastChannel,
    trials: u64,
    seed: u64,
) -> Result<SimulationReport> {
    if trials == 0 {
        return Err(Error::OutOfDomain {
            what: "trials",
            value: 0.0,
        });
    }
    code.validate(ch)?;
    let chunks = (trials as usize).div_ceil(MC_CHUNK);
    let ok: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = MC_CHUNK.min(trials as usize - c * MC_CHUNK);
            simulate_chunk(code, ch, len, restart_seed(seed, c as u64))
        })
        .sum();
    let p = ok as f64 / trials as f64;
    let (lo, hi) = wilson_interval(ok, trials);
    Ok(SimulationReport {
        p_correct: p,
        p_error: 1.0 - p,
        method: Method::MonteCarlo,
        trials: Some(trials),
        interval: Some((lo, hi)),
        half_width: Some(0.5 * (hi - lo)),
        seed: Some(seed),
    })
}

fn point_mass_rows(symbols: &[usize], nx: usize) -> Vec<f64> {
    let mut v = vec![0.0; symbols.len() * nx];
    for (i, &x) in symbols.iter().enumerate() {
        v[i * nx + x] = 1.0;
    }
    v
}

/// Random code with ML decoders.
pub fn random_code(
    ch: &DegradedBroadcastChannel,
    n: usize,
    k_size: usize,
    l_size: usize,
    ensemble: Ensemble,
    seed: u64,
) -> Result<FeedbackCode> {
    if n == 0 || k_size == 0 || l_size == 0 {
        return Err(Error::Empty);
    }
    let (nx, ny, nz) = (ch.x_size(), ch.y_size(), ch.z_size());
    let yz = ny * nz;
    guard(k_size as u128 * l_size as u128 * (yz as u128).pow(n as u32))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let msgs = k_size * l_size;
    // symbol[(k*L + l)][branch][t]
    let codewords: Vec<Vec<Vec<usize>>> = match ensemble {
        Ensemble::IidInput => (0..msgs)
            .map(|_| vec![(0..n).map(|_| rng.random_range(0..nx)).collect()])
            .collect(),
        Ensemble::Superposition => {
            let test = random_stochastic(&mut rng, nx, nx, 0.5);
            let clouds: Vec<Vec<usize>> = (0..l_size)
                .map(|_| (0..n).map(|_| rng.random_range(0..nx)).collect())
                .collect();
            (0..msgs)
                .map(|m| {
                    let cloud = &clouds[m % l_size];
                    vec![cloud
                        .iter()
                        .map(|&u| sample_index(&mut rng, test.row(u)))
                        .collect()]
                })
                .collect()
        }
        Ensemble::Feedback => (0..msgs)
            .map(|_| {
                (0..ny)
                    .map(|_| (0..n).map(|_| rng.random_range(0..nx)).collect())
                    .collect()
            })
            .collect(),
    };
    let encoders = (0..n)
        .map(|t| {
            let hist = yz.pow(t as u32);
            let mut symbols = Vec::with_capacity(msgs * hist);
            for cw in &codewords {
                for g in 0..hist {
                    // Previous y is the most recent pair's first coordinate.
                    let branch = if t == 0 || cw.len() == 1 {
                        0
                    } else {
                        (g % yz) / nz
                    };
                    symbols.push(cw[branch][t]);
                }
            }
            point_mass_rows(&symbols, nx)
        })
        .collect();
    let mut code = FeedbackCode {
        n,
        k_size,
        l_size,
        nx,
        ny,
        nz,
        encoders,
        psi1: Vec::new(),
        psi2: Vec::new(),
    };
    code.set_ml_decoders(ch)?;
    Ok(code)
}

/// `ceil(e^{nR})`, guarded against rounding just above an integer.
pub fn message_size(n: usize, rate: f64) -> usize {
    let v = (n as f64 * rate).exp();
    let r = v.round();
    if (v - r).abs() < 1e-9 * r.max(1.0) {
        r.max(1.0) as usize
    } else {
        v.ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub p_correct: f64,
    /// Probability of the information-spectrum event.
    pub event_prob: f64,
    /// `event_prob + 2 e^{-n eta}`.
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

impl LemmaReport {
    fn new(p_correct: f64, event_prob: f64, n: usize, eta: f64) -> Self {
        let rhs = event_prob + 2.0 * (-(n as f64) * eta).exp();
        Self {
            p_correct,
            event_prob,
            rhs,
            slack: rhs - p_correct,
            holds: p_correct <= rhs + EVENT_TOL,
        }
    }
}

/// Test distributions for the block form of the bound: a kernel on
/// `Y^n x Z^n` given `L` and a law on `Z^n`, both as flat tables.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockAux {
    /// `q_yz[l * (|Y||Z|)^n + g]`, `g` indexing received histories.
    pub q_yz: Vec<f64>,
    pub q_z: Vec<f64>,
}

impl BlockAux {
    pub fn random<R: Rng + ?Sized>(rng: &mut R, code: &FeedbackCode) -> Self {
        let total = code.yz().pow(code.n as u32);
        let q_yz = (0..code.l_size)
            .flat_map(|_| sample_simplex_with(rng, total, 1.0).weights().to_vec())
            .collect();
        let q_z = sample_simplex_with(rng, code.nz.pow(code.n as u32), 1.0)
            .weights()
            .to_vec();
        Self { q_yz, q_z }
    }

    /// `q(y^n, z^n | l) = prod_t q~_{Y_t|U_t} W2` and `q~(z^n) = prod_t q~_{Z_t}`.
    pub fn from_sequence(
        code: &FeedbackCode,
        ch: &DegradedBroadcastChannel,
        aux: &AuxiliarySequence,
    ) -> Self {
        let (nz, yz) = (code.nz, code.yz());
        let total = yz.pow(code.n as u32);
        let mut q_yz = vec![0.0; code.l_size * total];
        for l in 0..code.l_size {
            for g in 0..total {
                let pairs = digits(g, yz, code.n);
                let (mut p, mut u) = (1.0, l);
                for (t, &pair) in pairs.iter().enumerate() {
                    let (y, z) = (pair / nz, pair % nz);
                    p *= aux.steps[t].q_y_given_u(u, y) * ch.w2().get(y, z);
                    u = u * yz + pair;
                }
                q_yz[l * total + g] = p;
            }
        }
        let q_z = (0..nz.pow(code.n as u32))
            .map(|zi| {
                digits(zi, nz, code.n)
                    .iter()
                    .enumerate()
                    .map(|(t, &z)| aux.steps[t].q_z(z))
                    .product()
            })
            .collect();
        Self { q_yz, q_z }
    }
}

fn digits(mut v: usize, base: usize, len: usize) -> Vec<usize> {
    let mut d = vec![0; len];
    for slot in d.iter_mut().rev() {
        *slot = v % base;
        v /= base;
    }
    d
}

/// `(l, (x,y,z) per letter, mass)` of one full sequence.
type Sequence = (usize, Vec<(usize, usize, usize)>, f64);

/// Full sequences `(l, x^n, y^n, z^n)` with positive mass, as
/// `(l, triples, mass)`, plus `p~(z^n | l)` indexed `l * |Z|^n + z^n`.
fn enumerate_sequences(proc: &FeedbackProcess) -> (Vec<Sequence>, Vec<f64>) {
    let sh = proc.shape();
    let law = proc.history_law(sh.n);
    let zn = sh.nz.pow(sh.n as u32);
    let mut pz = vec![0.0; sh.l_size * zn];
    let mut seqs = Vec::new();
    for (h, &p) in law.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let (l, tr) = sh.decode(sh.n, h);
        let zi = tr.iter().fold(0, |a, &(_, _, z)| a * sh.nz + z);
        pz[l * zn + zi] += p;
        seqs.push((l, tr, p));
    }
    for l in 0..sh.l_size {
        let pl = proc.p_l().weights()[l];
        pz[l * zn..(l + 1) * zn].iter_mut().for_each(|v| *v /= pl);
    }
    (seqs, pz)
}

/// Block form: `P_c <= p~{R1 <= (1/n) log[W^n / q(y,z|l)] + eta and
/// R2 <= (1/n) log[p~(z^n|l) / q~(z^n)] + eta} + 2 e^{-n eta}`.
pub fn lemma1_check(
    code: &FeedbackCode,
    ch: &DegradedBroadcastChannel,
    aux: &BlockAux,
    eta: f64,
) -> Result<LemmaReport> {
    let ctx = CodeContext::new(code, ch)?;
    ctx.lemma1(aux, eta)
}

/// Exact quantities of one code shared by repeated bound checks.
pub struct CodeContext<'a> {
    pub code: &'a FeedbackCode,
    pub channel: &'a DegradedBroadcastChannel,
    pub p_correct: f64,
    pub process: FeedbackProcess,
    seqs: Vec<Sequence>,
    pz: Vec<f64>,
    zv: Vec<Vec<f64>>,
}

impl<'a> CodeContext<'a> {
    pub fn new(code: &'a FeedbackCode, ch: &'a DegradedBroadcastChannel) -> Result<Self> {
        let p_correct = exact_correct_prob(code, ch)?.p_correct;
        let process = code.induced_process(ch)?;
        let (seqs, pz) = enumerate_sequences(&process);
        let zv = (0..code.n).map(|t| process.z_given_v(t)).collect();
        Ok(Self {
            code,
            channel: ch,
            p_correct,
            process,
            seqs,
            pz,
            zv,
        })
    }

    pub fn lemma1(&self, aux: &BlockAux, eta: f64) -> Result<LemmaReport> {
        check_eta(eta)?;
        let (code, ch, pc, proc) = (self.code, self.channel, self.p_correct, &self.process);
        let sh = proc.shape();
        let n = sh.n as f64;
        let r = code.rates();
        let total = code.yz().pow(code.n as u32);
        let zn = sh.nz.pow(sh.n as u32);
        let (seqs, pz) = (&self.seqs, &self.pz);
        let mut event = 0.0;
        for (l, tr, p) in seqs {
            let mut log_w = 0.0;
            let (mut g, mut zi) = (0, 0);
            for &(x, y, z) in tr {
                log_w += ch.w(x, y, z).ln();
                g = g * code.yz() + y * sh.nz + z;
                zi = zi * sh.nz + z;
            }
            let q = aux.q_yz[l * total + g];
            let first = if q > 0.0 {
                (log_w - q.ln()) / n
            } else {
                f64::INFINITY
            };
            let qz = aux.q_z[zi];
            let second = if qz > 0.0 {
                (pz[l * zn + zi].ln() - qz.ln()) / n
            } else {
                f64::INFINITY
            };
            if r.r1 <= first + eta + EVENT_TOL && r.r2 <= second + eta + EVENT_TOL {
                event += p;
            }
        }
        Ok(LemmaReport::new(pc, event, code.n, eta))
    }
}

/// Per-letter form with `q~_{Y_t|U_t}` and `q~_{Z_t}` from `aux`.
pub fn lemma2_check(
    code: &FeedbackCode,
    ch: &DegradedBroadcastChannel,
    aux: &AuxiliarySequence,
    eta: f64,
) -> Result<LemmaReport> {
    CodeContext::new(code, ch)?.lemma2(aux, eta)
}

impl CodeContext<'_> {
    pub fn lemma2(&self, aux: &AuxiliarySequence, eta: f64) -> Result<LemmaReport> {
        check_eta(eta)?;
        let (code, ch, pc, proc) = (self.code, self.channel, self.p_correct, &self.process);
        let sh = proc.shape();
        if aux.steps.len() != sh.n {
            return Err(Error::LengthMismatch(sh.n, aux.steps.len()));
        }
        let n = sh.n as f64;
        let r = code.rates();
        let zv = &self.zv;
        let mut event = 0.0;
        for (l, tr, p) in &self.seqs {
            let (mut first, mut second) = (0.0, 0.0);
            let (mut u, mut v) = (*l, *l);
            for (t, &(x, y, z)) in tr.iter().enumerate() {
                let q = &aux.steps[t];
                first += (ch.w1().get(x, y) / q.q_y_given_u(u, y)).ln();
                second += zv[t][v * sh.nz + z].ln() - q.q_z(z).ln();
                u = u * sh.ny * sh.nz + y * sh.nz + z;
                v = v * sh.nz + z;
            }
            if r.r1 <= first / n + eta + EVENT_TOL && r.r2 <= second / n + eta + EVENT_TOL {
                event += p;
            }
        }
        Ok(LemmaReport::new(pc, event, code.n, eta))
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::OutOfDomain {
            what: "eta",
            value: eta,
        });
    }
    Ok(())
}

/// `eta = [theta (mu R1 + R2) - Omega_{p~||q~}/n] / (1 + theta (1 + mu))`.
pub fn solved_eta(params: &ExponentParams, r: RatePair, omega_pq_value: f64, n: usize) -> f64 {
    let (theta, mu) = (params.theta(), params.mu());
    (theta * r.weighted(mu) - omega_pq_value / n as f64) / (1.0 + theta * (1.0 + mu))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteBoundReport {
    pub p_correct: f64,
    /// `-(1/n) log P_c`.
    #[serde(with = "crate::float_serde")]
    pub exponent: f64,
    /// Largest solved `eta` over the tested sequences, the adaptive one first.
    pub eta: f64,
    pub eta_adaptive: f64,
    /// `log(3 e^{-n eta})`.
    pub log_bound: f64,
    pub slack: f64,
    pub holds: bool,
}

/// `P_c <= 3 exp(-n eta)` for the adaptive auxiliary sequence and `extra_random`
/// Dirichlet ones.
pub fn finite_n_bound_check(
    code: &FeedbackCode,
    ch: &DegradedBroadcastChannel,
    params: &ExponentParams,
    r: RatePair,
    extra_random: usize,
    seed: u64,
) -> Result<FiniteBoundReport> {
    let rates = code.rates();
    if rates.r1 < r.r1 - 1e-12 || rates.r2 < r.r2 - 1e-12 {
        return Err(Error::RateConditionUnmet(format!(
            "code rates ({}, {}) below target ({}, {})",
            rates.r1, rates.r2, r.r1, r.r2
        )));
    }
    let pc = exact_correct_prob(code, ch)?.p_correct;
    let proc = code.induced_process(ch)?;
    let n = code.n;
    let adaptive = adaptive_aux_choice(&proc, params)?;
    let eta_adaptive = solved_eta(params, r, omega_pq(&proc, &adaptive, params)?, n);
    let mut eta = eta_adaptive;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..extra_random {
        let aux = AuxiliarySequence::random(&mut rng, proc.shape(), ch);
        eta = eta.max(solved_eta(params, r, omega_pq(&proc, &aux, params)?, n));
    }
    let log_bound = 3f64.ln() - n as f64 * eta;
    let bound = log_bound.exp();
    Ok(FiniteBoundReport {
        p_correct: pc,
        exponent: -pc.ln() / n as f64,
        eta,
        eta_adaptive,
        log_bound,
        slack: bound - pc,
        holds: pc <= bound + BOUND_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: usize,
    pub seed: u64,
    pub p_correct: f64,
    #[serde(with = "crate::float_serde")]
    pub exponent: f64,
    /// Finite-n bound exponent `eta - (1/n) log 3` at the given parameters.
    #[serde(with = "crate::float_serde")]
    pub bound_exponent: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

/// `-(1/n) log P_c` for sampled codes at message sizes `ceil(e^{nR})`.
#[allow(clippy::too_many_arguments)]
pub fn decay_scan(
    ch: &DegradedBroadcastChannel,
    r: RatePair,
    n_list: &[usize],
    ensemble: Ensemble,
    seeds: &[u64],
    params: &ExponentParams,
    f_value: f64,
) -> Result<Vec<DecayRow>> {
    let jobs: Vec<(usize, u64)> = n_list
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    jobs.par_iter()
        .map(|&(n, seed)| {
            let k = message_size(n, r.r1);
            let l = message_size(n, r.r2);
            let code = random_code(ch, n, k, l, ensemble, seed)?;
            let rep = finite_n_bound_check(&code, ch, params, r, 0, seed)?;
            Ok(DecayRow {
                n,
                seed,
                p_correct: rep.p_correct,
                exponent: rep.exponent,
                bound_exponent: rep.eta - 3f64.ln() / n as f64,
                f: f_value,
            })
        })
        .collect()
}

pub fn write_decay_csv<W: std::io::Write>(rows: &[DecayRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "n,seed,p_correct,exponent,bound_exponent,F")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:e},{},{},{}",
            r.n, r.seed, r.p_correct, r.exponent, r.bound_exponent, r.f
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSuiteConfig {
    pub n_list: Vec<usize>,
    pub k_sizes: Vec<usize>,
    pub l_sizes: Vec<usize>,
    pub codes: usize,
    pub aux_per_code: usize,
    pub etas: Vec<f64>,
    pub seed: u64,
}

impl Default for LemmaSuiteConfig {
    fn default() -> Self {
        Self {
            n_list: vec![1, 2, 3],
            k_sizes: vec![1, 2, 4],
            l_sizes: vec![1, 2, 4],
            codes: 100,
            aux_per_code: 10,
            etas: vec![0.05, 0.2],
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSuiteReport {
    pub checks: usize,
    pub lemma1_violations: usize,
    pub lemma2_violations: usize,
    #[serde(with = "crate::float_serde")]
    pub lemma1_worst_slack: f64,
    #[serde(with = "crate::float_serde")]
    pub lemma2_worst_slack: f64,
    /// Largest `|rhs1 - rhs2|` when the block aux is the product of the per-letter one.
    pub product_identity_gap: f64,
}

impl LemmaSuiteReport {
    pub fn all_passed(&self) -> bool {
        self.lemma1_violations == 0 && self.lemma2_violations == 0
    }
}

const ENSEMBLES: [Ensemble; 3] = [
    Ensemble::IidInput,
    Ensemble::Superposition,
    Ensemble::Feedback,
];

/// Both change-of-measure bounds on random codes and random test distributions.
pub fn run_lemma_suite(
    ch: &DegradedBroadcastChannel,
    cfg: &LemmaSuiteConfig,
) -> Result<LemmaSuiteReport> {
    if cfg.n_list.is_empty()
        || cfg.k_sizes.is_empty()
        || cfg.l_sizes.is_empty()
        || cfg.etas.is_empty()
    {
        return Err(Error::ConfigParse(
            "lemma suite grids must be nonempty".into(),
        ));
    }
    let per_code: Vec<(usize, usize, usize, f64, f64, f64)> = (0..cfg.codes)
        .into_par_iter()
        .map(|i| {
            let n = cfg.n_list[i % cfg.n_list.len()];
            let k = cfg.k_sizes[(i / 3) % cfg.k_sizes.len()];
            let l = cfg.l_sizes[(i / 9) % cfg.l_sizes.len()];
            let seed = restart_seed(cfg.seed, i as u64);
            let code = random_code(ch, n, k, l, ENSEMBLES[(i + i / 27) % ENSEMBLES.len()], seed)?;
            let ctx = CodeContext::new(&code, ch)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
            let (mut checks, mut v1, mut v2) = (0, 0, 0);
            let (mut w1, mut w2, mut gap) = (f64::INFINITY, f64::INFINITY, 0.0f64);
            for j in 0..cfg.aux_per_code {
                let block = BlockAux::random(&mut rng, &code);
                let seq = AuxiliarySequence::random(&mut rng, ctx.process.shape(), ch);
                let product = (j == 0).then(|| BlockAux::from_sequence(&code, ch, &seq));
                for &eta in &cfg.etas {
                    let a = ctx.lemma1(&block, eta)?;
                    let b = ctx.lemma2(&seq, eta)?;
                    checks += 1;
                    v1 += !a.holds as usize;
                    v2 += !b.holds as usize;
                    w1 = w1.min(a.slack);
                    w2 = w2.min(b.slack);
                    if let Some(p) = &product {
                        gap = gap.max((ctx.lemma1(p, eta)?.rhs - b.rhs).abs());
                    }
                }
            }
            Ok((checks, v1, v2, w1, w2, gap))
        })
        .collect::<Result<_>>()?;
    let mut rep = LemmaSuiteReport {
        checks: 0,
        lemma1_violations: 0,
        lemma2_violations: 0,
        lemma1_worst_slack: f64::INFINITY,
        lemma2_worst_slack: f64::INFINITY,
        product_identity_gap: 0.0,
    };
    for (c, v1, v2, w1, w2, g) in per_code {
        rep.checks += c;
        rep.lemma1_violations += v1;
        rep.lemma2_violations += v2;
        rep.lemma1_worst_slack = rep.lemma1_worst_slack.min(w1);
        rep.lemma2_worst_slack = rep.lemma2_worst_slack.min(w2);
        rep.product_identity_gap = rep.product_identity_gap.max(g);
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConverseSuiteReport {
    pub codes: usize,
    pub bound_violations: usize,
    pub exponent_violations: usize,
    /// Smallest `3 e^{-n eta} - P_c`.
    #[serde(with = "crate::float_serde")]
    pub worst_bound_slack: f64,
    /// Smallest `-(1/n) log P_c - F + (1/n) log 3`.
    #[serde(with = "crate::float_serde")]
    pub worst_exponent_slack: f64,
    pub rows: Vec<DecayRow>,
}

impl ConverseSuiteReport {
    pub fn all_passed(&self) -> bool {
        self.bound_violations == 0 && self.exponent_violations == 0
    }
}

/// Finite-n converse on sampled codes at rate `r`, using the optimizing
/// `(mu*, lambda*)` of `F(r)`.
pub fn run_converse_suite(
    ch: &DegradedBroadcastChannel,
    r: RatePair,
    f: &crate::exponent::ExponentResult,
    n_list: &[usize],
    codes_per_n: usize,
    extra_random_aux: usize,
    seed: u64,
) -> Result<ConverseSuiteReport> {
    let params = ExponentParams::new(f.mu_star, f.lambda_star)?;
    let jobs: Vec<(usize, usize)> = n_list
        .iter()
        .flat_map(|&n| (0..codes_per_n).map(move |i| (n, i)))
        .collect();
    let results: Vec<(FiniteBoundReport, DecayRow)> = jobs
        .par_iter()
        .map(|&(n, i)| {
            let s = restart_seed(seed, (n * 1_000_003 + i) as u64);
            let code = random_code(
                ch,
                n,
                message_size(n, r.r1),
                message_size(n, r.r2),
                ENSEMBLES[i % 3],
                s,
            )?;
            let rep = finite_n_bound_check(&code, ch, &params, r, extra_random_aux, s)?;
            let row = DecayRow {
                n,
                seed: s,
                p_correct: rep.p_correct,
                exponent: rep.exponent,
                bound_exponent: rep.eta - 3f64.ln() / n as f64,
                f: f.f,
            };
            Ok((rep, row))
        })
        .collect::<Result<_>>()?;
    let mut out = ConverseSuiteReport {
        codes: results.len(),
        bound_violations: 0,
        exponent_violations: 0,
        worst_bound_slack: f64::INFINITY,
        worst_exponent_slack: f64::INFINITY,
        rows: Vec::new(),
    };
    for (rep, row) in results {
        out.bound_violations += !rep.holds as usize;
        out.worst_bound_slack = out.worst_bound_slack.min(rep.slack);
        let ex = row.exponent - (f.f - 3f64.ln() / row.n as f64);
        out.exponent_violations += (ex < -BOUND_TOL) as usize;
        out.worst_exponent_slack = out.worst_exponent_slack.min(ex);
        out.rows.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::StochasticMatrix;

    fn useless() -> DegradedBroadcastChannel {
        DegradedBroadcastChannel::new(
            StochasticMatrix::constant_rows(2, &[0.3, 0.7]).unwrap(),
            StochasticMatrix::bsc(0.2),
        )
        .unwrap()
    }

    #[test]
    fn trivial_codes() {
        let ch = DegradedBroadcastChannel::bsc_cascade(0.1, 0.2);
        let code = random_code(&ch, 2, 1, 1, Ensemble::IidInput, 3).unwrap();
        let rep = exact_correct_prob(&code, &ch).unwrap();
        assert!((rep.p_correct - 1.0).abs() < 1e-12);
        assert!((rep.p_correct + rep.p_error - 1.0).abs() < 1e-12);

        let id = DegradedBroadcastChannel::identity(2);
        let mut code = FeedbackCode {
            n: 1,
            k_size: 2,
            l_size: 1,
            nx: 2,
            ny: 2,
            nz: 2,
            encoders: vec![vec![1.0, 0.0, 0.0, 1.0]],
            psi1: vec![],
            psi2: vec![],
        };
        code.set_ml_decoders(&id).unwrap();
        assert_eq!(exact_correct_prob(&code, &id).unwrap().p_correct, 1.0);
        let mc = mc_correct_prob(&code, &id, 1000, 4).unwrap();
        assert_eq!(mc.p_correct, 1.0);
        assert!(mc.half_width.unwrap().is_finite());
    }

    #[test]
    fn useless_channel_halves_two_messages() {
        let ch = useless();
        for seed in 0..5 {
            let code = random_code(&ch, 2, 2, 1, Ensemble::Superposition, seed).unwrap();
            assert!((exact_correct_prob(&code, &ch).unwrap().p_correct - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn seeds_are_deterministic() {
        let ch = DegradedBroadcastChannel::bsc_cascade(0.1, 0.2);
        for e in [
            Ensemble::IidInput,
            Ensemble::Superposition,
            Ensemble::Feedback,
        ] {
            let a = random_code(&ch, 3, 2, 2, e, 9).unwrap();
            assert_eq!(a, random_code(&ch, 3, 2, 2, e, 9).unwrap());
        }
        let code = random_code(&ch, 3, 2, 2, Ensemble::Feedback, 9).unwrap();
        let a = mc_correct_prob(&code, &ch, 5000, 1).unwrap();
        assert_eq!(a, mc_correct_prob(&code, &ch, 5000, 1).unwrap());
    }

    #[test]
    fn induced_process_matches_received_law() {
        let ch = DegradedBroadcastChannel::bsc_cascade(0.1, 0.2);
        let code = random_code(&ch, 3, 3, 2, Ensemble::Feedback, 5).unwrap();
        let proc = code.induced_process(&ch).unwrap();
        assert!((proc.total_mass() - 1.0).abs() < 1e-9);
        // Marginal on (y^n, z^n) from both routes.
        let law = code.received_law(&ch).unwrap();
        let total = 64;
        let mut direct = vec![0.0; 2 * total];
        for k in 0..3 {
            for l in 0..2 {
                for g in 0..total {
                    direct[l * total + g] += law[(k * 2 + l) * total + g] / 6.0;
                }
            }
        }
        let sh = proc.shape();
        let mut via = vec![0.0; 2 * total];
        for (h, &p) in proc.history_law(3).iter().enumerate() {
            let (l, tr) = sh.decode(3, h);
            let g = tr.iter().fold(0, |a, &(_, y, z)| a * 4 + y * 2 + z);
            via[l * total + g] += p;
        }
        for (a, b) in direct.iter().zip(&via) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn message_sizes() {
        assert_eq!(message_size(1, std::f64::consts::LN_2), 2);
        assert_eq!(message_size(3, 0.0), 1);
        assert_eq!(message_size(2, 0.5), 3);
    }

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson_interval(30, 100);
        assert!(lo < 0.3 && 0.3 < hi);
        let (lo, hi) = wilson_interval(100, 100);
        assert!(lo < 1.0 && hi == 1.0);
    }
}
