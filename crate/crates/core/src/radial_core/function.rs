use std::io::{BufRead, Write};
use std::sync::Arc;

use super::grid::{gauss_legendre, sphere_area, RadialGrid};
use super::stencil::DiffOps;
use crate::error::{Error, Result};

/// Sampled radial profile: values and radial derivatives at every grid node.
///
/// Between nodes the profile is the cubic Hermite interpolant of those data,
/// so evaluation and cell quadrature are fourth-order accurate for smooth
/// functions.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFn {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    derivs: Vec<f64>,
    sector: usize,
}

impl RadialFn {
    /// Sector `l` fixes the parity at the origin: `f(-r) = (-1)^l f(r)`.
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>, derivs: Vec<f64>, sector: usize) -> Result<Self> {
        if values.len() != grid.len() || derivs.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(i) = values.iter().chain(&derivs).position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i % grid.len()));
        }
        Ok(Self { grid, values, derivs, sector })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n], derivs: vec![0.0; n], sector: 0 }
    }

    /// Samples `f(r) -> (value, derivative)` at the nodes.
    pub fn from_fn(grid: Arc<RadialGrid>, sector: usize, f: impl Fn(f64) -> (f64, f64)) -> Result<Self> {
        let (values, derivs) = grid.nodes().iter().map(|&r| f(r)).unzip();
        Self::new(grid, values, derivs, sector)
    }

    /// Values only; derivatives from five-point stencils with the sector's parity.
    pub fn from_values(grid: Arc<RadialGrid>, values: Vec<f64>, sector: usize) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        let parity = if sector.is_multiple_of(2) { 1.0 } else { -1.0 };
        let derivs = DiffOps::new(&grid, parity).derivative(&values);
        Self::new(grid, values, derivs, sector)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.derivs
    }

    pub fn sector(&self) -> usize {
        self.sector
    }

    pub fn at_origin(&self) -> f64 {
        self.values[0]
    }

    pub fn at_boundary(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    fn same_grid(&self, other: &RadialFn) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `(value, derivative)` of the Hermite interpolant at `r`.
    pub fn eval_pair(&self, r: f64) -> (f64, f64) {
        let i = self.grid.locate(r);
        self.eval_in_cell(i, r)
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.eval_pair(r).0
    }

    pub fn eval_deriv(&self, r: f64) -> f64 {
        self.eval_pair(r).1
    }

    fn eval_in_cell(&self, i: usize, r: f64) -> (f64, f64) {
        let nodes = self.grid.nodes();
        let (a, b) = (nodes[i], nodes[i + 1]);
        let h = b - a;
        let t = (r - a) / h;
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.derivs[i] * h, self.derivs[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v =
            (2.0 * t3 - 3.0 * t2 + 1.0) * f0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * f1 + (t3 - t2) * d1;
        let dv = ((6.0 * t2 - 6.0 * t) * f0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * f1
            + (3.0 * t2 - 2.0 * t) * d1)
            / h;
        (v, dv)
    }

    /// `c * self`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            derivs: self.derivs.iter().map(|v| c * v).collect(),
            sector: self.sector,
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &RadialFn) -> Result<Self> {
        self.same_grid(other)?;
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + c * y).collect();
        Ok(Self {
            grid: self.grid.clone(),
            values: zip(&self.values, &other.values),
            derivs: zip(&self.derivs, &other.derivs),
            sector: self.sector,
        })
    }

    /// Pointwise product with product-rule derivatives.
    pub fn product(&self, other: &RadialFn) -> Result<Self> {
        self.same_grid(other)?;
        let n = self.values.len();
        let mut values = Vec::with_capacity(n);
        let mut derivs = Vec::with_capacity(n);
        for i in 0..n {
            values.push(self.values[i] * other.values[i]);
            derivs.push(self.derivs[i] * other.values[i] + self.values[i] * other.derivs[i]);
        }
        Ok(Self { grid: self.grid.clone(), values, derivs, sector: (self.sector + other.sector) % 2 })
    }

    /// Applies `g` and its derivative `dg` by the chain rule.
    pub fn compose(&self, g: impl Fn(f64) -> f64, dg: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| g(v)).collect(),
            derivs: self.values.iter().zip(&self.derivs).map(|(&v, &d)| dg(v) * d).collect(),
            sector: self.sector,
        }
    }

    /// `int_{B_1} f` with the grid's trapezoid-type weights (second order).
    pub fn integrate(&self) -> f64 {
        self.grid.weights().iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }

    /// `int_{B_1} g(r, f, f')` with eight Gauss points per cell on the Hermite
    /// interpolant.
    pub fn integrate_map(&self, g: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let (gx, gw) = gauss_legendre(8);
        let nodes = self.grid.nodes();
        let p = self.grid.dim() as i32 - 1;
        let mut total = 0.0;
        for i in 0..nodes.len() - 1 {
            let (a, b) = (nodes[i], nodes[i + 1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let mut cell = 0.0;
            for (x, w) in gx.iter().zip(&gw) {
                let r = mid + half * x;
                let (v, dv) = self.eval_in_cell(i, r);
                cell += w * g(r, v, dv) * r.powi(p);
            }
            total += half * cell;
        }
        sphere_area(self.grid.dim()) * total
    }

    /// `int_{B_1} f` on the Hermite interpolant (fourth order).
    pub fn integrate_hermite(&self) -> f64 {
        self.integrate_map(|_, v, _| v)
    }

    /// `L^p(B_1)` norm; `p = f64::INFINITY` gives the largest nodal magnitude.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p == f64::INFINITY {
            return Ok(self.sup_norm());
        }
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::UnsupportedExponent(p));
        }
        Ok(self.integrate_map(|_, v, _| v.abs().powf(p)).powf(1.0 / p))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(int |f'|^2)^{1/2}`, the norm of `H_0^1(B_1)` for radial functions.
    pub fn h1_seminorm(&self) -> f64 {
        self.integrate_map(|_, _, d| d * d).sqrt()
    }

    /// Writes the `r,value,derivative` table with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,value,derivative")?;
        for ((r, v), d) in self.grid.nodes().iter().zip(&self.values).zip(&self.derivs) {
            writeln!(out, "{r:.16e},{v:.16e},{d:.16e}")?;
        }
        Ok(())
    }

    /// Reads a table written by [`RadialFn::write_csv`]; lines starting with `#` are skipped.
    /// The nodes must coincide with `grid`.
    pub fn read_csv<R: BufRead>(grid: Arc<RadialGrid>, input: R, sector: usize) -> Result<Self> {
        let mut values = Vec::new();
        let mut derivs = Vec::new();
        let mut header_seen = false;
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line != "r,value,derivative" {
                    return Err(Error::Parse(format!("unexpected header `{line}`")));
                }
                header_seen = true;
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{c}: {e}"))))
                .collect::<Result<_>>()?;
            if cols.len() != 3 {
                return Err(Error::Parse(format!("expected 3 columns in `{line}`")));
            }
            let i = values.len();
            if i >= grid.len() || (grid.nodes()[i] - cols[0]).abs() > 1e-14 {
                return Err(Error::GridMismatch);
            }
            values.push(cols[1]);
            derivs.push(cols[2]);
        }
        Self::new(grid, values, derivs, sector)
    }
}
