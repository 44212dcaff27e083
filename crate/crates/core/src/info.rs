//! Entropy-type functionals on [`JointUXYZ`], all in nats.
//!
//! Cells of zero mass contribute nothing (`0 log 0 = 0`).

use serde::{Deserialize, Serialize};

use crate::dist::{JointUXYZ, SimplexVector};
use crate::error::{Error, Result};

/// Rounding residue below this magnitude is clamped to zero.
pub const NEGATIVE_RESIDUE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct InfoValue(f64);

impl InfoValue {
    /// Clamps small negative rounding residue; larger negatives are a bug upstream.
    pub fn from_nats(v: f64) -> Result<Self> {
        if v < -NEGATIVE_RESIDUE_TOL || v.is_nan() {
            return Err(Error::Internal(format!(
                "information quantity {v} is negative"
            )));
        }
        Ok(Self(v.max(0.0)))
    }

    pub fn nats(self) -> f64 {
        self.0
    }

    pub fn bits(self) -> f64 {
        self.0 / std::f64::consts::LN_2
    }
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> f64 {
    entropy(&[p, 1.0 - p])
}

/// `I(X;Y|U) = sum q(u,x,y) log[W1(y|x) / q(y|u)]`.
pub fn cond_mutual_info_xy_given_u(joint: &JointUXYZ) -> Result<InfoValue> {
    InfoValue::from_nats(cmi_raw(joint))
}

/// `I(U;Z) = sum q(u,z) log[q(z|u) / q(z)]`.
pub fn mutual_info_u_z(joint: &JointUXYZ) -> Result<InfoValue> {
    InfoValue::from_nats(mi_uz_raw(joint))
}

pub(crate) fn cmi_raw(joint: &JointUXYZ) -> f64 {
    let (nu, nx, ny, _) = joint.sizes();
    let w1 = joint.channel().w1();
    let mut acc = 0.0;
    for u in 0..nu {
        for x in 0..nx {
            let qux = joint.q_ux(u, x);
            if qux == 0.0 {
                continue;
            }
            for y in 0..ny {
                let w = w1.get(x, y);
                if w == 0.0 {
                    continue;
                }
                acc += qux * w * (w / joint.q_y_given_u(u, y)).ln();
            }
        }
    }
    acc
}

pub(crate) fn mi_uz_raw(joint: &JointUXYZ) -> f64 {
    let (nu, _, _, nz) = joint.sizes();
    let mut acc = 0.0;
    for u in 0..nu {
        let pu = joint.p_u().weights()[u];
        if pu == 0.0 {
            continue;
        }
        for z in 0..nz {
            let qzu = joint.q_z_given_u(u, z);
            if qzu == 0.0 {
                continue;
            }
            acc += pu * qzu * (qzu / joint.q_z(z)).ln();
        }
    }
    acc
}

/// `I(U;Y)`, used for data-processing diagnostics.
pub fn mutual_info_u_y(joint: &JointUXYZ) -> Result<InfoValue> {
    let (nu, _, ny, _) = joint.sizes();
    let q_y = joint.q_y();
    let mut acc = 0.0;
    for u in 0..nu {
        let pu = joint.p_u().weights()[u];
        if pu == 0.0 {
            continue;
        }
        for (y, &qy) in q_y.iter().enumerate().take(ny) {
            let qyu = joint.q_y_given_u(u, y);
            if qyu > 0.0 {
                acc += pu * qyu * (qyu / qy).ln();
            }
        }
    }
    InfoValue::from_nats(acc)
}

/// `I(U;X)`, used for data-processing diagnostics.
pub fn mutual_info_u_x(joint: &JointUXYZ) -> Result<InfoValue> {
    let (nu, nx, _, _) = joint.sizes();
    let q_x = joint.q_x();
    let mut acc = 0.0;
    for u in 0..nu {
        let pu = joint.p_u().weights()[u];
        for x in 0..nx {
            let pxu = joint.p_x_given_u().get(u, x);
            if pu > 0.0 && pxu > 0.0 {
                acc += pu * pxu * (pxu / q_x[x]).ln();
            }
        }
    }
    InfoValue::from_nats(acc)
}

pub fn kl_divergence(p: &SimplexVector, q: &SimplexVector) -> Result<InfoValue> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(format!(
            "KL of {}-vector against {}-vector",
            p.dim(),
            q.dim()
        )));
    }
    let mut acc = 0.0;
    for (i, (&pi, &qi)) in p.weights().iter().zip(q.weights()).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::AbsoluteContinuityViolation { index: i, p: pi });
        }
        acc += pi * (pi / qi).ln();
    }
    InfoValue::from_nats(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{DegradedBroadcastChannel, StochasticMatrix};
    use std::f64::consts::LN_2;

    fn half_rows(u: usize) -> StochasticMatrix {
        StochasticMatrix::constant_rows(u, &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn cmi_examples() {
        let id = DegradedBroadcastChannel::identity(2);
        let j = JointUXYZ::build(SimplexVector::uniform(2), half_rows(2), &id).unwrap();
        assert!((cond_mutual_info_xy_given_u(&j).unwrap().nats() - LN_2).abs() < 1e-15);

        let j = JointUXYZ::build(
            SimplexVector::uniform(2),
            StochasticMatrix::identity(2),
            &id,
        )
        .unwrap();
        assert_eq!(cond_mutual_info_xy_given_u(&j).unwrap().nats(), 0.0);

        // ln 2 - h(0.1), evaluated from the binary-entropy closed form.
        let expected = LN_2 + 0.1 * 0.1f64.ln() + 0.9 * 0.9f64.ln();
        assert!((expected - 0.368_064_2).abs() < 1e-6);
        let bsc = DegradedBroadcastChannel::bsc_cascade(0.1, 0.2);
        let j = JointUXYZ::build(SimplexVector::uniform(2), half_rows(2), &bsc).unwrap();
        assert!((cond_mutual_info_xy_given_u(&j).unwrap().nats() - expected).abs() < 1e-14);
    }

    #[test]
    fn mi_uz_examples() {
        let id = DegradedBroadcastChannel::identity(2);
        let j = JointUXYZ::build(
            SimplexVector::point_mass(2, 1),
            StochasticMatrix::identity(2),
            &id,
        )
        .unwrap();
        assert_eq!(mutual_info_u_z(&j).unwrap().nats(), 0.0);

        let j = JointUXYZ::build(
            SimplexVector::uniform(2),
            StochasticMatrix::identity(2),
            &id,
        )
        .unwrap();
        assert!((mutual_info_u_z(&j).unwrap().nats() - LN_2).abs() < 1e-15);

        let bsc = DegradedBroadcastChannel::bsc_cascade(0.1, 0.2);
        let j = JointUXYZ::build(SimplexVector::uniform(2), half_rows(2), &bsc).unwrap();
        assert!(mutual_info_u_z(&j).unwrap().nats().abs() < 1e-15);
    }

    #[test]
    fn kl_examples() {
        let p = SimplexVector::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(kl_divergence(&p, &p).unwrap().nats(), 0.0);
        let q = SimplexVector::uniform(2);
        let v = kl_divergence(&SimplexVector::point_mass(2, 0), &q)
            .unwrap()
            .nats();
        assert!((v - LN_2).abs() < 1e-15);
        let p = SimplexVector::new(vec![0.9, 0.1]).unwrap();
        let expected = 0.9 * 1.8f64.ln() + 0.1 * 0.2f64.ln();
        assert!((expected - 0.368_064_2).abs() < 1e-6);
        assert!((kl_divergence(&p, &q).unwrap().nats() - expected).abs() < 1e-15);
        assert!(matches!(
            kl_divergence(&q, &SimplexVector::point_mass(2, 0)),
            Err(Error::AbsoluteContinuityViolation { index: 1, .. })
        ));
    }

    #[test]
    fn residue_clamp() {
        assert_eq!(InfoValue::from_nats(-1e-11).unwrap().nats(), 0.0);
        assert!(InfoValue::from_nats(-1e-8).is_err());
    }
}
