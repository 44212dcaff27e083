//! Joint distributions on `U x X x Y x Z` obeying `U - X - Y - Z`.
//!
//! A [`JointUXYZ`] is fully determined by `p_U`, `p_{X|U}` and the channel; the
//! marginals and conditionals used by the information functionals are derived
//! once at construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::channel::{validate_stochastic, DegradedBroadcastChannel, StochasticMatrix};
use crate::error::{Error, Result};

pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexVector {
    weights: Vec<f64>,
}

impl SimplexVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty);
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFiniteEntry { row: 0, col: i });
            }
            if w < 0.0 {
                return Err(Error::NegativeEntry {
                    row: 0,
                    col: i,
                    value: w,
                });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::RowSumViolation {
                row: 0,
                deviation: sum - 1.0,
            });
        }
        Ok(Self { weights })
    }

    pub fn uniform(dim: usize) -> Self {
        Self {
            weights: vec![1.0 / dim as f64; dim],
        }
    }

    pub fn point_mass(dim: usize, at: usize) -> Self {
        let mut weights = vec![0.0; dim];
        weights[at] = 1.0;
        Self { weights }
    }

    /// Normalizes nonnegative weights; used where the caller owns the arithmetic.
    pub(crate) fn from_unnormalized(mut weights: Vec<f64>) -> Self {
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        Self { weights }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Dirichlet(`concentration`, ..., `concentration`) draw, deterministic in `seed`.
pub fn sample_simplex(dim: usize, seed: u64, concentration: f64) -> SimplexVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_simplex_with(&mut rng, dim, concentration)
}

pub fn sample_simplex_with<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    concentration: f64,
) -> SimplexVector {
    if dim == 1 {
        return SimplexVector { weights: vec![1.0] };
    }
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    loop {
        let draws: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        // Small concentrations can underflow every coordinate.
        if sum > 0.0 && sum.is_finite() {
            return SimplexVector::from_unnormalized(draws);
        }
    }
}

pub fn random_stochastic<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    concentration: f64,
) -> StochasticMatrix {
    let mut entries = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        entries.extend_from_slice(sample_simplex_with(rng, cols, concentration).weights());
    }
    StochasticMatrix::from_raw(rows, cols, entries)
}

pub fn random_channel<R: Rng + ?Sized>(
    rng: &mut R,
    x: usize,
    y: usize,
    z: usize,
) -> DegradedBroadcastChannel {
    DegradedBroadcastChannel::new(
        random_stochastic(rng, x, y, 1.0),
        random_stochastic(rng, y, z, 1.0),
    )
    .expect("sizes agree")
}

/// Random variables of the single-letter model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Var {
    U,
    X,
    Y,
    Z,
}

/// A conditional kernel; `flagged[r]` marks rows whose conditioning event has
/// zero probability (those rows are uniform placeholders).
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub rows: Vec<Vec<f64>>,
    pub flagged: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct JointUXYZ {
    p_u: SimplexVector,
    p_x_given_u: StochasticMatrix,
    #[serde(skip)]
    channel: DegradedBroadcastChannel,
    #[serde(skip)]
    cache: Derived,
}

#[derive(Debug, Clone, Default)]
struct Derived {
    q_x: Vec<f64>,
    q_y_given_u: Vec<f64>,
    q_z_given_u: Vec<f64>,
    q_y: Vec<f64>,
    q_z: Vec<f64>,
}

impl JointUXYZ {
    pub fn build(
        p_u: SimplexVector,
        p_x_given_u: StochasticMatrix,
        channel: &DegradedBroadcastChannel,
    ) -> Result<Self> {
        if p_u.dim() != p_x_given_u.rows() {
            return Err(Error::DimensionMismatch(format!(
                "p_U has {} entries but p_X|U has {} rows",
                p_u.dim(),
                p_x_given_u.rows()
            )));
        }
        if p_x_given_u.cols() != channel.x_size() {
            return Err(Error::DimensionMismatch(format!(
                "p_X|U has {} columns but |X| = {}",
                p_x_given_u.cols(),
                channel.x_size()
            )));
        }
        let mut joint = Self {
            p_u,
            p_x_given_u,
            channel: channel.clone(),
            cache: Derived::default(),
        };
        joint.derive();
        Ok(joint)
    }

    /// Builds from flat parameters: `u` weights followed by `u` rows of `|X|` weights.
    pub fn from_params(params: &[f64], u_size: usize, channel: &DegradedBroadcastChannel) -> Self {
        let nx = channel.x_size();
        debug_assert_eq!(params.len(), u_size * (1 + nx));
        let p_u = SimplexVector {
            weights: params[..u_size].to_vec(),
        };
        let p_x_given_u = StochasticMatrix::from_raw(u_size, nx, params[u_size..].to_vec());
        let mut joint = Self {
            p_u,
            p_x_given_u,
            channel: channel.clone(),
            cache: Derived::default(),
        };
        joint.derive();
        joint
    }

    pub fn to_params(&self) -> Vec<f64> {
        let mut v = self.p_u.weights().to_vec();
        for u in 0..self.u_size() {
            v.extend_from_slice(self.p_x_given_u.row(u));
        }
        v
    }

    /// A joint drawn with Dirichlet(`concentration`) weights everywhere.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        u_size: usize,
        channel: &DegradedBroadcastChannel,
        concentration: f64,
    ) -> Self {
        let p_u = sample_simplex_with(rng, u_size, concentration);
        let p_x_given_u = random_stochastic(rng, u_size, channel.x_size(), concentration);
        Self::build(p_u, p_x_given_u, channel).expect("sizes agree")
    }

    fn derive(&mut self) {
        let (nu, nx, ny, nz) = self.sizes();
        let w1 = self.channel.w1();
        let w2 = self.channel.w2();
        let mut q_x = vec![0.0; nx];
        let mut q_y_given_u = vec![0.0; nu * ny];
        let mut q_z_given_u = vec![0.0; nu * nz];
        for u in 0..nu {
            let pu = self.p_u.weights[u];
            for x in 0..nx {
                let pxu = self.p_x_given_u.get(u, x);
                q_x[x] += pu * pxu;
                for y in 0..ny {
                    q_y_given_u[u * ny + y] += pxu * w1.get(x, y);
                }
            }
            for y in 0..ny {
                let qy = q_y_given_u[u * ny + y];
                for z in 0..nz {
                    q_z_given_u[u * nz + z] += qy * w2.get(y, z);
                }
            }
        }
        let mut q_y = vec![0.0; ny];
        let mut q_z = vec![0.0; nz];
        for u in 0..nu {
            let pu = self.p_u.weights[u];
            for y in 0..ny {
                q_y[y] += pu * q_y_given_u[u * ny + y];
            }
            for z in 0..nz {
                q_z[z] += pu * q_z_given_u[u * nz + z];
            }
        }
        self.cache = Derived {
            q_x,
            q_y_given_u,
            q_z_given_u,
            q_y,
            q_z,
        };
    }

    pub fn sizes(&self) -> (usize, usize, usize, usize) {
        (
            self.p_u.dim(),
            self.channel.x_size(),
            self.channel.y_size(),
            self.channel.z_size(),
        )
    }

    pub fn u_size(&self) -> usize {
        self.p_u.dim()
    }

    pub fn channel(&self) -> &DegradedBroadcastChannel {
        &self.channel
    }

    pub fn p_u(&self) -> &SimplexVector {
        &self.p_u
    }

    pub fn p_x_given_u(&self) -> &StochasticMatrix {
        &self.p_x_given_u
    }

    /// `q(u,x,y,z) = p_U(u) p_{X|U}(x|u) W1(y|x) W2(z|y)`.
    #[inline]
    pub fn prob(&self, u: usize, x: usize, y: usize, z: usize) -> f64 {
        self.p_u.weights[u] * self.p_x_given_u.get(u, x) * self.channel.w(x, y, z)
    }

    #[inline]
    pub fn q_ux(&self, u: usize, x: usize) -> f64 {
        self.p_u.weights[u] * self.p_x_given_u.get(u, x)
    }

    #[inline]
    pub fn q_y_given_u(&self, u: usize, y: usize) -> f64 {
        self.cache.q_y_given_u[u * self.channel.y_size() + y]
    }

    #[inline]
    pub fn q_z_given_u(&self, u: usize, z: usize) -> f64 {
        self.cache.q_z_given_u[u * self.channel.z_size() + z]
    }

    #[inline]
    pub fn q_z(&self, z: usize) -> f64 {
        self.cache.q_z[z]
    }

    pub fn q_x(&self) -> &[f64] {
        &self.cache.q_x
    }

    pub fn q_y(&self) -> &[f64] {
        &self.cache.q_y
    }

    /// Materializes one of the supported conditionals.
    ///
    /// Supported: `Y|U`, `Z|U`, `Z` (empty `given`), `Y|X`, `Z|Y`, `X|U`.
    pub fn conditional(&self, target: Var, given: &[Var]) -> Result<Kernel> {
        let (nu, _, ny, nz) = self.sizes();
        let u_rows = |width: usize, f: &dyn Fn(usize, usize) -> f64| {
            let mut rows = Vec::with_capacity(nu);
            let mut flagged = Vec::with_capacity(nu);
            for u in 0..nu {
                if self.p_u.weights[u] > 0.0 {
                    rows.push((0..width).map(|j| f(u, j)).collect());
                    flagged.push(false);
                } else {
                    rows.push(vec![1.0 / width as f64; width]);
                    flagged.push(true);
                }
            }
            Kernel { rows, flagged }
        };
        match (target, given) {
            (Var::Y, [Var::U]) => Ok(u_rows(ny, &|u, y| self.q_y_given_u(u, y))),
            (Var::Z, [Var::U]) => Ok(u_rows(nz, &|u, z| self.q_z_given_u(u, z))),
            (Var::X, [Var::U]) => Ok(u_rows(self.channel.x_size(), &|u, x| {
                self.p_x_given_u.get(u, x)
            })),
            (Var::Z, []) => Ok(Kernel {
                rows: vec![self.cache.q_z.clone()],
                flagged: vec![false],
            }),
            (Var::Y, [Var::X]) => Ok(self.channel_rows(self.channel.w1(), &self.cache.q_x)),
            (Var::Z, [Var::Y]) => Ok(self.channel_rows(self.channel.w2(), &self.cache.q_y)),
            _ => Err(Error::UnsupportedConditional(format!(
                "{target:?} given {given:?}"
            ))),
        }
    }

    // The channel rows are the conditionals regardless of input mass; rows
    // with zero input mass are still flagged for the accumulation convention.
    fn channel_rows(&self, w: &StochasticMatrix, input_mass: &[f64]) -> Kernel {
        Kernel {
            rows: w.to_rows(),
            flagged: input_mass.iter().map(|&m| m == 0.0).collect(),
        }
    }
}

impl PartialEq for JointUXYZ {
    fn eq(&self, other: &Self) -> bool {
        self.p_u == other.p_u
            && self.p_x_given_u == other.p_x_given_u
            && self.channel == other.channel
    }
}

/// Serializable snapshot used in reproducibility logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSnapshot {
    pub p_u: Vec<f64>,
    pub p_x_given_u: Vec<Vec<f64>>,
}

impl From<&JointUXYZ> for JointSnapshot {
    fn from(j: &JointUXYZ) -> Self {
        Self {
            p_u: j.p_u.weights().to_vec(),
            p_x_given_u: j.p_x_given_u.to_rows(),
        }
    }
}

impl JointSnapshot {
    pub fn restore(&self, channel: &DegradedBroadcastChannel) -> Result<JointUXYZ> {
        JointUXYZ::build(
            SimplexVector::new(self.p_u.clone())?,
            validate_stochastic(&self.p_x_given_u)?,
            channel,
        )
    }
}

/// Channel-induced conditionals of flat joint parameters.
pub(crate) struct ParamMarginals {
    pub y_given_u: Vec<f64>,
    pub z_given_u: Vec<f64>,
    pub z: Vec<f64>,
}

impl ParamMarginals {
    pub fn new(ch: &DegradedBroadcastChannel, u_size: usize, params: &[f64]) -> Self {
        let (nx, ny, nz) = (ch.x_size(), ch.y_size(), ch.z_size());
        let mut y_given_u = vec![0.0; u_size * ny];
        let mut z_given_u = vec![0.0; u_size * nz];
        let mut z = vec![0.0; nz];
        for u in 0..u_size {
            let row = &params[u_size + u * nx..u_size + (u + 1) * nx];
            let qy = &mut y_given_u[u * ny..(u + 1) * ny];
            for (x, &px) in row.iter().enumerate() {
                for (y, q) in qy.iter_mut().enumerate() {
                    *q += px * ch.w1().get(x, y);
                }
            }
            for (y, &py) in qy.iter().enumerate() {
                for zz in 0..nz {
                    z_given_u[u * nz + zz] += py * ch.w2().get(y, zz);
                }
            }
            for zz in 0..nz {
                z[zz] += params[u] * z_given_u[u * nz + zz];
            }
        }
        Self {
            y_given_u,
            z_given_u,
            z,
        }
    }
}
