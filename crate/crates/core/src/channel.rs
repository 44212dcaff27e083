//! Finite-alphabet channels and the degraded broadcast cascade.
//!
//! A degraded broadcast channel is a pair of stochastic matrices `W1: X -> Y`
//! and `W2: Y -> Z` whose joint kernel factors as `W(y,z|x) = W1(y|x) W2(z|y)`.
//! Blocklength-`n` use is memoryless, so sequence probabilities are products of
//! per-letter factors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute per-row tolerance for stochasticity.
pub const ROW_TOL: f64 = 1e-12;

/// Sequences longer than this are multiplied in the log domain.
const LOG_DOMAIN_THRESHOLD: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Empty);
        }
        Ok(Self { size, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty);
        }
        Ok(Self {
            size: labels.len(),
            labels: Some(labels),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) if i < l.len() => l[i].clone(),
            _ => i.to_string(),
        }
    }
}

/// Row-stochastic kernel `W(col | row)`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            entries,
        }
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: f64) -> Self {
        Self {
            rows: 2,
            cols: 2,
            entries: vec![1.0 - p, p, p, 1.0 - p],
        }
    }

    /// Every row equal to `row`; the output is independent of the input.
    pub fn constant_rows(rows: usize, row: &[f64]) -> Result<Self> {
        validate_stochastic(&vec![row.to_vec(); rows])
    }

    /// Matrix product `self * other` (cascade of two kernels).
    pub fn compose(&self, other: &StochasticMatrix) -> Result<StochasticMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot cascade {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut entries = vec![0.0; self.rows * other.cols];
        for r in 0..self.rows {
            for m in 0..self.cols {
                let a = self.get(r, m);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    entries[r * other.cols + c] += a * other.get(m, c);
                }
            }
        }
        Ok(StochasticMatrix {
            rows: self.rows,
            cols: other.cols,
            entries,
        })
    }

    /// Builds without validation. Callers guarantee stochastic rows.
    pub(crate) fn from_raw(rows: usize, cols: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), rows * cols);
        Self {
            rows,
            cols,
            entries,
        }
    }
}

impl<'de> Deserialize<'de> for StochasticMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        validate_stochastic(&rows).map_err(serde::de::Error::custom)
    }
}

/// Checks a rectangular matrix for nonnegativity and unit row sums.
///
/// Rows within [`ROW_TOL`] of one are renormalized; the correction is logged.
pub fn validate_stochastic(rows: &[Vec<f64>]) -> Result<StochasticMatrix> {
    let n_rows = rows.len();
    if n_rows == 0 || rows[0].is_empty() {
        return Err(Error::Empty);
    }
    let n_cols = rows[0].len();
    let mut entries = Vec::with_capacity(n_rows * n_cols);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n_cols {
            return Err(Error::Ragged {
                row: r,
                len: row.len(),
                expected: n_cols,
            });
        }
        for (c, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { row: r, col: c });
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        let deviation = sum - 1.0;
        if deviation.abs() > ROW_TOL {
            return Err(Error::RowSumViolation { row: r, deviation });
        }
        if deviation != 0.0 {
            log::debug!("renormalizing row {r} (deviation {deviation:e})");
            entries.extend(row.iter().map(|v| v / sum));
        } else {
            entries.extend_from_slice(row);
        }
    }
    Ok(StochasticMatrix {
        rows: n_rows,
        cols: n_cols,
        entries,
    })
}

/// The pair `(W1, W2)` with `W1: X -> Y` and `W2: Y -> Z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegradedBroadcastChannel {
    w1: StochasticMatrix,
    w2: StochasticMatrix,
}

impl DegradedBroadcastChannel {
    pub fn new(w1: StochasticMatrix, w2: StochasticMatrix) -> Result<Self> {
        if w1.cols() != w2.rows() {
            return Err(Error::DimensionMismatch(format!(
                "W1 has {} outputs but W2 has {} inputs",
                w1.cols(),
                w2.rows()
            )));
        }
        Ok(Self { w1, w2 })
    }

    pub fn w1(&self) -> &StochasticMatrix {
        &self.w1
    }

    pub fn w2(&self) -> &StochasticMatrix {
        &self.w2
    }

    pub fn x_size(&self) -> usize {
        self.w1.rows()
    }

    pub fn y_size(&self) -> usize {
        self.w1.cols()
    }

    pub fn z_size(&self) -> usize {
        self.w2.cols()
    }

    /// The end-to-end kernel `X -> Z`.
    pub fn w12(&self) -> StochasticMatrix {
        self.w1
            .compose(&self.w2)
            .expect("dimensions checked at construction")
    }

    /// `W(y,z|x) = W1(y|x) W2(z|y)` without range checks.
    #[inline]
    pub fn w(&self, x: usize, y: usize, z: usize) -> f64 {
        self.w1.get(x, y) * self.w2.get(y, z)
    }

    pub fn compose_degraded(&self, x: usize, y: usize, z: usize) -> Result<f64> {
        check_index(x, self.x_size())?;
        check_index(y, self.y_size())?;
        check_index(z, self.z_size())?;
        Ok(self.w(x, y, z))
    }

    /// Memoryless product `prod_t W1(y_t|x_t) W2(z_t|y_t)`.
    pub fn product_prob(&self, xs: &[usize], ys: &[usize], zs: &[usize]) -> Result<f64> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch(xs.len(), ys.len()));
        }
        if xs.len() != zs.len() {
            return Err(Error::LengthMismatch(xs.len(), zs.len()));
        }
        let mut factors = Vec::with_capacity(xs.len());
        for ((&x, &y), &z) in xs.iter().zip(ys).zip(zs) {
            factors.push(self.compose_degraded(x, y, z)?);
        }
        if factors.len() > LOG_DOMAIN_THRESHOLD {
            if factors.contains(&0.0) {
                return Ok(0.0);
            }
            Ok(factors.iter().map(|f| f.ln()).sum::<f64>().exp())
        } else {
            Ok(factors.iter().product())
        }
    }

    /// Binary identity cascade: both receivers see the input noiselessly.
    pub fn identity(size: usize) -> Self {
        Self {
            w1: StochasticMatrix::identity(size),
            w2: StochasticMatrix::identity(size),
        }
    }

    pub fn bsc_cascade(p1: f64, p2: f64) -> Self {
        Self {
            w1: StochasticMatrix::bsc(p1),
            w2: StochasticMatrix::bsc(p2),
        }
    }

    pub fn to_spec(&self) -> ChannelSpec {
        ChannelSpec {
            x: self.x_size(),
            y: self.y_size(),
            z: self.z_size(),
            w1: self.w1.to_rows(),
            w2: self.w2.to_rows(),
        }
    }
}

fn check_index(index: usize, size: usize) -> Result<()> {
    if index >= size {
        Err(Error::IndexOutOfRange { index, size })
    } else {
        Ok(())
    }
}

/// On-disk channel description: `{"X":2,"Y":2,"Z":2,"W1":[[..]],"W2":[[..]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    #[serde(rename = "X")]
    pub x: usize,
    #[serde(rename = "Y")]
    pub y: usize,
    #[serde(rename = "Z")]
    pub z: usize,
    #[serde(rename = "W1")]
    pub w1: Vec<Vec<f64>>,
    #[serde(rename = "W2")]
    pub w2: Vec<Vec<f64>>,
}

impl ChannelSpec {
    pub fn build(&self) -> Result<DegradedBroadcastChannel> {
        let w1 = validate_stochastic(&self.w1)?;
        let w2 = validate_stochastic(&self.w2)?;
        if w1.rows() != self.x || w1.cols() != self.y {
            return Err(Error::DimensionMismatch(format!(
                "W1 is {}x{}, declared X={} Y={}",
                w1.rows(),
                w1.cols(),
                self.x,
                self.y
            )));
        }
        if w2.rows() != self.y || w2.cols() != self.z {
            return Err(Error::DimensionMismatch(format!(
                "W2 is {}x{}, declared Y={} Z={}",
                w2.rows(),
                w2.cols(),
                self.y,
                self.z
            )));
        }
        DegradedBroadcastChannel::new(w1, w2)
    }
}

pub fn parse_channel(json: &str) -> Result<DegradedBroadcastChannel> {
    let spec: ChannelSpec =
        serde_json::from_str(json).map_err(|e| Error::ConfigParse(format!("channel JSON: {e}")))?;
    spec.build()
        .map_err(|e| Error::ChannelValidation(e.to_string()))
}

pub fn load_channel(path: &Path) -> Result<DegradedBroadcastChannel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
    parse_channel(&text)
}
