//! The capacity region as a union of rate rectangles, traced by supporting
//! hyperplanes `mu R1 + R2 <= max_q [mu I(X;Y|U) + I(U;Z)]`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{DegradedBroadcastChannel, StochasticMatrix};
use crate::dist::{JointSnapshot, JointUXYZ, ParamMarginals};
use crate::error::{Error, Result};
use crate::info::{cond_mutual_info_xy_given_u, mutual_info_u_z};
use crate::optim::{grid_maximize, maximize, Layout, OptConfig};

/// Largest allowed gap between a non-certified optimum and the grid oracle.
const GRID_ARBITRATION_TOL: f64 = 2e-3;
pub const GRID_RESOLUTION: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub r1: f64,
    pub r2: f64,
}

impl RatePair {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        for (what, v) in [("R1", r1), ("R2", r2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::OutOfDomain { what, value: v });
            }
        }
        Ok(Self { r1, r2 })
    }

    pub fn weighted(&self, mu: f64) -> f64 {
        mu * self.r1 + self.r2
    }
}

/// Corner `(I(X;Y|U), I(U;Z))` of the rectangle achieved by `joint`.
pub fn rate_rectangle(joint: &JointUXYZ) -> Result<RatePair> {
    Ok(RatePair {
        r1: cond_mutual_info_xy_given_u(joint)?.nats(),
        r2: mutual_info_u_z(joint)?.nats(),
    })
}

/// `mu I(X;Y|U) + I(U;Z)` on flat joint parameters.
pub fn hyperplane_objective(
    ch: &DegradedBroadcastChannel,
    u_size: usize,
    mu: f64,
    params: &[f64],
) -> f64 {
    let (nx, ny, nz) = (ch.x_size(), ch.y_size(), ch.z_size());
    let m = ParamMarginals::new(ch, u_size, params);
    let (mut cmi, mut mi) = (0.0, 0.0);
    for u in 0..u_size {
        let pu = params[u];
        if pu == 0.0 {
            continue;
        }
        for x in 0..nx {
            let qux = pu * params[u_size + u * nx + x];
            for y in 0..ny {
                let w = ch.w1().get(x, y);
                if qux > 0.0 && w > 0.0 {
                    cmi += qux * w * (w / m.y_given_u[u * ny + y]).ln();
                }
            }
        }
        for z in 0..nz {
            let qzu = m.z_given_u[u * nz + z];
            if qzu > 0.0 {
                mi += pu * qzu * (qzu / m.z[z]).ln();
            }
        }
    }
    mu * cmi + mi
}

/// Single-user capacity by Blahut-Arimoto; returns `(capacity, optimal input)`.
pub fn blahut_arimoto(w: &StochasticMatrix, tol: f64, max_iter: usize) -> (f64, Vec<f64>) {
    let (nx, ny) = (w.rows(), w.cols());
    let mut p = vec![1.0 / nx as f64; nx];
    let mut lower = 0.0;
    for _ in 0..max_iter {
        let q: Vec<f64> = (0..ny)
            .map(|y| (0..nx).map(|x| p[x] * w.get(x, y)).sum())
            .collect();
        // D(W(.|x) || q) per input letter.
        let d: Vec<f64> = (0..nx)
            .map(|x| {
                (0..ny)
                    .filter(|&y| w.get(x, y) > 0.0)
                    .map(|y| w.get(x, y) * (w.get(x, y) / q[y]).ln())
                    .sum()
            })
            .collect();
        lower = p.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
        let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if upper - lower < tol {
            break;
        }
        let weights: Vec<f64> = p.iter().zip(&d).map(|(a, b)| a * b.exp()).collect();
        let s: f64 = weights.iter().sum();
        p = weights.into_iter().map(|v| v / s).collect();
    }
    (lower, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub mu: f64,
    pub value: f64,
    pub corner: RatePair,
    pub joint: JointSnapshot,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBoundary {
    pub points: Vec<BoundaryPoint>,
}

/// Maximizes `mu I(X;Y|U) + I(U;Z)` over joints with `|U| = |X| + 1`.
pub fn hyperplane_value(
    ch: &DegradedBroadcastChannel,
    mu: f64,
    cfg: &OptConfig,
) -> Result<(f64, JointUXYZ, bool)> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::OutOfDomain {
            what: "mu",
            value: mu,
        });
    }
    let nx = ch.x_size();
    let u_size = nx + 1;
    let layout = Layout::joint(u_size, nx);
    let f = |p: &[f64]| hyperplane_objective(ch, u_size, mu, p);
    let outcome = maximize(&f, &layout, cfg, &single_user_warm_starts(ch, u_size));
    let mut value = outcome.value;
    let mut point = outcome.point;
    let certified = outcome.certified;
    if !certified {
        let (grid_value, grid_point) = grid_oracle_hyperplane(ch, mu).ok_or_else(|| {
            Error::OptimizerDidNotConverge(format!(
                "hyperplane mu={mu}: restart dispersion {:e}, no grid oracle for |X|={nx}",
                outcome.dispersion
            ))
        })?;
        if grid_value > value + GRID_ARBITRATION_TOL {
            return Err(Error::OptimizerDidNotConverge(format!(
                "hyperplane mu={mu}: optimizer {value} below grid oracle {grid_value}"
            )));
        }
        if grid_value > value {
            value = grid_value;
            point = embed_params(&grid_point, 2, u_size, nx);
        }
    }
    Ok((value, JointUXYZ::from_params(&point, u_size, ch), certified))
}

/// Grid oracle over `|U| = |X| = 2` at spacing 1/64; `None` unless binary input.
pub fn grid_oracle_hyperplane(ch: &DegradedBroadcastChannel, mu: f64) -> Option<(f64, Vec<f64>)> {
    if ch.x_size() != 2 {
        return None;
    }
    let f = |p: &[f64]| hyperplane_objective(ch, 2, mu, p);
    grid_maximize(&f, &Layout::joint(2, 2), GRID_RESOLUTION)
}

/// Pads parameters for `from_u` auxiliary letters with zero-weight letters.
pub(crate) fn embed_params(params: &[f64], from_u: usize, to_u: usize, nx: usize) -> Vec<f64> {
    let mut out = params[..from_u].to_vec();
    out.extend(std::iter::repeat_n(0.0, to_u - from_u));
    out.extend_from_slice(&params[from_u..]);
    for _ in from_u..to_u {
        out.extend(std::iter::repeat_n(1.0 / nx as f64, nx));
    }
    out
}

/// Starts realizing the single-user corners: constant `U` with the `W1`
/// capacity-achieving input, and `U = X` with the `W1 W2` one.
pub(crate) fn single_user_warm_starts(
    ch: &DegradedBroadcastChannel,
    u_size: usize,
) -> Vec<Vec<f64>> {
    let nx = ch.x_size();
    let (_, p1) = blahut_arimoto(ch.w1(), 1e-12, 10_000);
    let (_, p12) = blahut_arimoto(&ch.w12(), 1e-12, 10_000);
    let mut constant = vec![0.0; u_size];
    constant[0] = 1.0;
    for _ in 0..u_size {
        constant.extend_from_slice(&p1);
    }
    let mut aligned: Vec<f64> = p12.clone();
    aligned.extend(std::iter::repeat_n(0.0, u_size - nx));
    for u in 0..u_size {
        let mut row = vec![0.0; nx];
        if u < nx {
            row[u] = 1.0;
        } else {
            row.iter_mut().for_each(|v| *v = 1.0 / nx as f64);
        }
        aligned.extend(row);
    }
    vec![constant, aligned]
}

/// Sweeps the supporting hyperplanes over an ascending `mu` grid.
pub fn trace_boundary(
    ch: &DegradedBroadcastChannel,
    mu_grid: &[f64],
    cfg: &OptConfig,
) -> Result<RegionBoundary> {
    if mu_grid.is_empty() {
        return Err(Error::ConfigParse("empty mu grid".into()));
    }
    if mu_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::ConfigParse(
            "mu grid must be strictly ascending".into(),
        ));
    }
    let points = mu_grid
        .par_iter()
        .enumerate()
        .map(|(i, &mu)| {
            let (value, joint, certified) = hyperplane_value(ch, mu, cfg).map_err(|e| match e {
                Error::OptimizerDidNotConverge(m) => {
                    Error::OptimizerDidNotConverge(format!("mu index {i}: {m}"))
                }
                other => other,
            })?;
            Ok(BoundaryPoint {
                mu,
                value,
                corner: rate_rectangle(&joint)?,
                joint: JointSnapshot::from(&joint),
                certified,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionBoundary { points })
}

impl RegionBoundary {
    /// True iff `mu R1 + R2 <= value + slack` for every swept `mu`.
    ///
    /// Only the swept directions are tested, so points slightly outside the
    /// region near the boundary may be reported as contained.
    pub fn contains(&self, r: RatePair, slack: f64) -> bool {
        self.points
            .iter()
            .all(|p| r.weighted(p.mu) <= p.value + slack)
    }

    /// Largest `R1 + R2` among the achieving corners.
    pub fn max_sum_rate(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.corner.r1 + p.corner.r2)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `s` with `s * dir` inside every swept half-plane.
    pub fn radial_extent(&self, dir: RatePair) -> f64 {
        self.points
            .iter()
            .map(|p| {
                let w = dir.weighted(p.mu);
                if w > 0.0 {
                    p.value / w
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, mut out: W, bits: bool) -> std::io::Result<()> {
        let scale = if bits {
            1.0 / std::f64::consts::LN_2
        } else {
            1.0
        };
        writeln!(out, "mu,value,R1_corner,R2_corner")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{}",
                p.mu,
                p.value * scale,
                p.corner.r1 * scale,
                p.corner.r2 * scale
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn rectangle_corners() {
        use crate::dist::SimplexVector;
        let id = DegradedBroadcastChannel::identity(2);
        let j = JointUXYZ::build(
            SimplexVector::uniform(2),
            StochasticMatrix::identity(2),
            &id,
        )
        .unwrap();
        let r = rate_rectangle(&j).unwrap();
        assert_eq!(r.r1, 0.0);
        assert!((r.r2 - LN_2).abs() < 1e-15);
        let j = JointUXYZ::build(
            SimplexVector::point_mass(1, 0),
            StochasticMatrix::constant_rows(1, &[0.5, 0.5]).unwrap(),
            &id,
        )
        .unwrap();
        let r = rate_rectangle(&j).unwrap();
        assert!((r.r1 - LN_2).abs() < 1e-15);
        assert_eq!(r.r2, 0.0);
    }

    #[test]
    fn blahut_arimoto_bsc() {
        let (c, p) = blahut_arimoto(&StochasticMatrix::bsc(0.1), 1e-13, 10_000);
        let expected = LN_2 + 0.1 * 0.1f64.ln() + 0.9 * 0.9f64.ln();
        assert!((c - expected).abs() < 1e-10);
        assert!((p[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rate_pair_domain() {
        assert!(RatePair::new(-0.1, 0.0).is_err());
        assert!(RatePair::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn membership() {
        let id = DegradedBroadcastChannel::identity(2);
        let b = trace_boundary(
            &id,
            &[0.5, 1.0, 2.0],
            &OptConfig::default().with_restarts(8),
        )
        .unwrap();
        assert!(b.contains(RatePair { r1: 0.0, r2: 0.0 }, 0.0));
        assert!(!b.contains(
            RatePair {
                r1: LN_2 + 0.1,
                r2: 0.1
            },
            0.0
        ));
        // (ln2/2, ln2/2) sits on the mu=1 hyperplane.
        assert!(b.contains(
            RatePair {
                r1: LN_2 / 2.0,
                r2: LN_2 / 2.0
            },
            1e-9
        ));
        assert!(trace_boundary(&id, &[], &OptConfig::default()).is_err());
        assert!(trace_boundary(&id, &[2.0, 1.0], &OptConfig::default()).is_err());
    }

    #[test]
    fn flat_objective_matches_joint_path() {
        use crate::info::{cmi_raw, mi_uz_raw};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let ch = crate::dist::random_channel(&mut rng, 3, 2, 3);
        for _ in 0..10 {
            let j = JointUXYZ::random(&mut rng, 4, &ch, 0.5);
            let direct = 1.7 * cmi_raw(&j) + mi_uz_raw(&j);
            let flat = hyperplane_objective(&ch, 4, 1.7, &j.to_params());
            assert!((direct - flat).abs() < 1e-13);
            let om = crate::exponent::omega_objective(&ch, 4, 1.7, 0.6, &j.to_params());
            assert!((om - crate::exponent::omega_q(&j, 1.7, 0.6)).abs() < 1e-13);
        }
    }
}
