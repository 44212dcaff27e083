//! Multi-start projected-gradient ascent over products of probability simplices.
//!
//! Each restart runs a spectral (Barzilai-Borwein) projected-gradient method
//! with Armijo backtracking. Gradients are central finite differences, switching
//! to forward differences on coordinates sitting near zero. The best value is
//! certified when at least two restarts agree within `agreement_tol`, taken
//! relative to the value once it exceeds one in magnitude.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::sample_simplex_with;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop after three consecutive improvements smaller than this.
    pub tol: f64,
    pub fd_step: f64,
    /// Lower bound kept on every simplex coordinate.
    pub floor: f64,
    pub concentration: f64,
    pub agreement_tol: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            seed: 1,
            max_iter: 2000,
            tol: 1e-13,
            fd_step: 1e-6,
            floor: 1e-9,
            concentration: 1.0,
            agreement_tol: 1e-6,
        }
    }
}

impl OptConfig {
    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Dimensions of the simplices making up the search space, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    blocks: Vec<usize>,
}

impl Layout {
    pub fn new(blocks: Vec<usize>) -> Self {
        assert!(blocks.iter().all(|&b| b >= 1));
        Self { blocks }
    }

    /// `p_U` (size `u`) followed by `u` rows of `p_{X|U}` (size `x`).
    pub fn joint(u: usize, x: usize) -> Self {
        let mut blocks = vec![u];
        blocks.extend(std::iter::repeat_n(x, u));
        Self { blocks }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    fn ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.blocks.iter().scan(0, |start, &b| {
            let r = *start..*start + b;
            *start += b;
            Some(r)
        })
    }

    pub fn uniform_point(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|&b| std::iter::repeat_n(1.0 / b as f64, b))
            .collect()
    }

    pub fn project(&self, v: &mut [f64], floor: f64) {
        for r in self.ranges() {
            project_block(&mut v[r], floor);
        }
    }
}

/// Euclidean projection onto `{w : w_i >= floor, sum w = 1}`.
fn project_block(v: &mut [f64], floor: f64) {
    let d = v.len();
    if d == 1 {
        v[0] = 1.0;
        return;
    }
    let floor = floor.min(0.5 / d as f64);
    let budget = 1.0 - floor * d as f64;
    let mut sorted: Vec<f64> = v.iter().map(|x| x - floor).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut shift = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - budget) / (i + 1) as f64;
        if s - t > 0.0 {
            shift = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - floor - shift).max(0.0) + floor;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptOutcome {
    pub value: f64,
    pub point: Vec<f64>,
    /// Final value of every restart, in restart order.
    pub restart_values: Vec<f64>,
    /// Gap between the best and the runner-up restart.
    pub dispersion: f64,
    pub certified: bool,
}

/// Local ascent from `start` (projected first).
pub fn ascend<F>(f: &F, layout: &Layout, start: &[f64], cfg: &OptConfig) -> (f64, Vec<f64>)
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = start.to_vec();
    layout.project(&mut x, cfg.floor);
    let mut fx = f(&x);
    if !fx.is_finite() {
        return (fx, x);
    }
    let mut g = gradient(f, &x, fx, cfg.fd_step);
    let mut alpha = 1.0 / g.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    let mut small_steps = 0;
    let mut trial = vec![0.0; x.len()];
    for _ in 0..cfg.max_iter {
        for i in 0..x.len() {
            trial[i] = x[i] + alpha * g[i];
        }
        layout.project(&mut trial, cfg.floor);
        let d: Vec<f64> = trial.iter().zip(&x).map(|(t, xi)| t - xi).collect();
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if d.iter().all(|v| v.abs() < 1e-15) || slope <= 0.0 {
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let cand: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            let fc = f(&cand);
            if fc.is_finite() && fc >= fx + 1e-4 * t * slope {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        let g_new = gradient(f, &x_new, f_new, cfg.fd_step);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        let sy: f64 = s
            .iter()
            .zip(g_new.iter().zip(&g))
            .map(|(si, (gn, go))| si * (go - gn))
            .sum();
        alpha = if sy > 0.0 {
            (ss / sy).clamp(1e-10, 1e10)
        } else {
            1e3
        };
        let gain = f_new - fx;
        x = x_new;
        g = g_new;
        fx = f_new;
        if gain < cfg.tol * fx.abs().max(1.0) {
            small_steps += 1;
            if small_steps >= 3 {
                break;
            }
        } else {
            small_steps = 0;
        }
    }
    (fx, x)
}

fn gradient<F>(f: &F, x: &[f64], fx: f64, h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let xi = x[i];
            probe[i] = xi + h;
            let up = f(&probe);
            let g = if xi >= h {
                probe[i] = xi - h;
                (up - f(&probe)) / (2.0 * h)
            } else {
                (up - fx) / h
            };
            probe[i] = xi;
            g
        })
        .collect()
}

/// Maximizes `f` from `cfg.restarts` Dirichlet seeds plus the uniform point
/// and any caller-supplied warm starts.
pub fn maximize<F>(f: &F, layout: &Layout, cfg: &OptConfig, warm: &[Vec<f64>]) -> OptOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut starts: Vec<Vec<f64>> = vec![layout.uniform_point()];
    starts.extend(warm.iter().cloned());
    for i in 0..cfg.restarts.saturating_sub(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(cfg.seed, i as u64));
        // Every other seed is boundary-biased.
        let conc = if i % 2 == 0 {
            cfg.concentration
        } else {
            0.3 * cfg.concentration
        };
        let mut p = Vec::with_capacity(layout.dim());
        for &b in layout.blocks() {
            p.extend_from_slice(sample_simplex_with(&mut rng, b, conc).weights());
        }
        starts.push(p);
    }
    let results: Vec<(f64, Vec<f64>)> = starts
        .par_iter()
        .map(|s| ascend(f, layout, s, cfg))
        .collect();
    summarize(results, cfg.agreement_tol)
}

fn summarize(results: Vec<(f64, Vec<f64>)>, agreement_tol: f64) -> OptOutcome {
    let restart_values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let (best_idx, _) =
        restart_values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
    let value = restart_values[best_idx];
    let runner_up = restart_values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best_idx)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let dispersion = if runner_up.is_finite() {
        value - runner_up
    } else {
        0.0
    };
    OptOutcome {
        value,
        point: results[best_idx].1.clone(),
        certified: dispersion <= agreement_tol * value.abs().max(1.0),
        restart_values,
        dispersion,
    }
}

pub(crate) fn restart_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Exhaustive grid over a product of 2-simplices at spacing `1/resolution`.
///
/// Returns `None` when some block is not binary.
pub fn grid_maximize<F>(f: &F, layout: &Layout, resolution: usize) -> Option<(f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if layout.blocks().iter().any(|&b| b != 2) {
        return None;
    }
    let k = layout.blocks().len();
    let side = resolution + 1;
    let total = side.pow(k as u32);
    let best = (0..side)
        .into_par_iter()
        .map(|first| {
            let mut point = vec![0.0; 2 * k];
            let mut best = (f64::NEG_INFINITY, Vec::new());
            let inner = total / side;
            for idx in 0..inner {
                let mut rem = idx;
                let mut digits = vec![first];
                for _ in 1..k {
                    digits.push(rem % side);
                    rem /= side;
                }
                for (b, &d) in digits.iter().enumerate() {
                    let a = d as f64 / resolution as f64;
                    point[2 * b] = a;
                    point[2 * b + 1] = 1.0 - a;
                }
                let v = f(&point);
                if v > best.0 {
                    best = (v, point.clone());
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((f64::NEG_INFINITY, Vec::new()), |a, b| {
            if b.0 > a.0 {
                b
            } else {
                a
            }
        });
    Some(best)
}
