use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 16;

/// How nodes are distributed on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grading {
    Uniform,
    /// Spacing grows by `ratio` from one cell to the next, finest at the origin.
    Geometric {
        ratio: f64,
    },
}

impl Grading {
    /// Geometric grading whose first cell has width `h0` on a grid of `n` cells.
    pub fn with_first_cell(n: usize, h0: f64) -> Result<Grading> {
        let uniform = 1.0 / n as f64;
        if !(h0 > 0.0) || h0 >= uniform {
            return Err(Error::InvalidGrading(format!(
                "first cell {h0:e} must be positive and below 1/n = {uniform:e}"
            )));
        }
        // first cell width is expm1(k/n)/expm1(k), decreasing in k
        let first = |k: f64| (k / n as f64).exp_m1() / k.exp_m1();
        let (mut lo, mut hi) = (1e-9_f64, 1.0_f64);
        while first(hi) > h0 {
            hi *= 2.0;
            if hi > 700.0 {
                return Err(Error::InvalidGrading(format!("first cell {h0:e} unreachable")));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if first(mid) > h0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Grading::Geometric { ratio: (hi / n as f64).exp() })
    }
}

/// Discretisation of `[0, 1]` for radial functions on the unit ball of `R^N`.
///
/// The nodes are images `r(s_i)` of a uniform parameter grid `s_i = i / n`
/// under a fixed smooth map, so `refine` (which doubles `n` and keeps the
/// map) produces nested grids suitable for Richardson extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    grading: Grading,
    stretch: f64,
}

impl RadialGrid {
    pub fn new(dim: usize, n: usize, grading: Grading) -> Result<Self> {
        check_dim(dim)?;
        if n < MIN_CELLS {
            return Err(Error::GridTooSmall { n, min: MIN_CELLS });
        }
        let stretch = match grading {
            Grading::Uniform => 0.0,
            Grading::Geometric { ratio } => {
                if !ratio.is_finite() || ratio <= 1.0 {
                    return Err(Error::InvalidGrading(format!("ratio {ratio} must exceed 1")));
                }
                let k = n as f64 * ratio.ln();
                if k > 700.0 {
                    return Err(Error::InvalidGrading(format!("ratio {ratio} overflows at n = {n}")));
                }
                k
            }
        };
        Ok(Self::from_stretch(dim, n, grading, stretch))
    }

    fn from_stretch(dim: usize, n: usize, grading: Grading, stretch: f64) -> Self {
        let mut nodes: Vec<f64> = (0..=n)
            .map(|i| {
                let s = i as f64 / n as f64;
                if stretch == 0.0 {
                    s
                } else {
                    (stretch * s).exp_m1() / stretch.exp_m1()
                }
            })
            .collect();
        nodes[0] = 0.0;
        nodes[n] = 1.0;
        let weights = hat_weights(dim, &nodes);
        Self { dim, nodes, weights, grading, stretch }
    }

    /// Same map, twice as many cells; every old node is an even-indexed new node.
    pub fn refine(&self) -> Self {
        let n = 2 * self.cells();
        let grading = match self.grading {
            Grading::Uniform => Grading::Uniform,
            Grading::Geometric { .. } => Grading::Geometric { ratio: (self.stretch / n as f64).exp() },
        };
        Self::from_stretch(self.dim, n, grading, self.stretch)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of cells `n`; there are `n + 1` nodes.
    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights `w_i` with `sum w_i f(r_i) ~ int_{B_1} f`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    pub fn first_cell(&self) -> f64 {
        self.nodes[1]
    }

    /// Largest cell width among cells lying inside `[0, radius]`.
    pub fn max_spacing_below(&self, radius: f64) -> f64 {
        self.nodes.windows(2).take_while(|w| w[0] < radius).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Index of the cell `[r_i, r_{i+1}]` containing `r` (clamped to the grid).
    pub fn locate(&self, r: f64) -> usize {
        let n = self.cells();
        if r <= 0.0 {
            return 0;
        }
        if r >= 1.0 {
            return n - 1;
        }
        match self.nodes.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i - 1,
        }
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }
}

/// Builds a grid; see [`RadialGrid::new`].
pub fn make_grid(dim: usize, n: usize, grading: Grading) -> Result<RadialGrid> {
    RadialGrid::new(dim, n, grading)
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if (3..=15).contains(&dim) {
        Ok(())
    } else {
        Err(Error::InvalidDimension(dim))
    }
}

/// Surface area `omega_N = 2 pi^{N/2} / Gamma(N/2)` of the unit sphere in `R^N`.
pub fn sphere_area(dim: usize) -> f64 {
    2.0 * PI.powf(dim as f64 / 2.0) / gamma_half(dim)
}

/// Volume `omega_N / N` of the unit ball.
pub fn ball_volume(dim: usize) -> f64 {
    sphere_area(dim) / dim as f64
}

/// `Gamma(k / 2)` for a positive integer `k`.
pub fn gamma_half(k: usize) -> f64 {
    let (mut x, mut g) = if k.is_multiple_of(2) { (1.0, 1.0) } else { (0.5, PI.sqrt()) };
    while 2.0 * x < k as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; order];
    let mut w = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[order - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[order - 1 - i] = w[i];
    }
    (x, w)
}

/// `omega_N int phi_i(r) r^{N-1} dr` for the piecewise-linear hat functions.
fn hat_weights(dim: usize, nodes: &[f64]) -> Vec<f64> {
    let (gx, gw) = gauss_legendre(8);
    let omega = sphere_area(dim);
    let mut w = vec![0.0; nodes.len()];
    for (i, cell) in nodes.windows(2).enumerate() {
        let (a, b) = (cell[0], cell[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let (mut left, mut right) = (0.0, 0.0);
        for (x, wt) in gx.iter().zip(&gw) {
            let r = mid + half * x;
            let jac = wt * half * r.powi(dim as i32 - 1);
            let t = (r - a) / (b - a);
            left += jac * (1.0 - t);
            right += jac * t;
        }
        w[i] += omega * left;
        w[i + 1] += omega * right;
    }
    w
}
