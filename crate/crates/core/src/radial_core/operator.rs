use std::sync::Arc;

use super::function::RadialFn;
use super::grid::RadialGrid;
use super::linalg::{tridiag_eigenvalue, tridiag_min_abs_eigenvalue, Banded};
use super::stencil::DiffOps;
use crate::error::{Error, Result};

/// Relative threshold on the smallest singular value below which a solve is refused.
pub const NEAR_SINGULAR: f64 = 1e-8;

/// The potential `q` of a sector operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Scalar(f64),
    Profile(RadialFn),
}

/// `L u = -u'' - ((N-1)/r) u' + (l(l+N-2)/r^2) u - (lambda + q) u` on `(0, 1)`
/// with `u(1) = 0`, `u'(0) = 0` for `l = 0` and `u(0) = 0` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    grid: Arc<RadialGrid>,
    sector: usize,
    lambda: f64,
    potential: Potential,
}

/// Discretisation used by [`solve_dirichlet_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Symmetric finite volumes on the dual cells; second order.
    Second,
    /// Five-point stencils on nodal values; fourth order.
    Fourth,
}

impl OperatorSpec {
    pub fn new(grid: Arc<RadialGrid>, sector: usize, lambda: f64, potential: Potential) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::Precondition(format!("shift {lambda} is not finite")));
        }
        match &potential {
            Potential::Scalar(q) if !q.is_finite() => {
                return Err(Error::Precondition(format!("potential {q} is not finite")));
            }
            Potential::Profile(f) if f.grid().as_ref() != grid.as_ref() => return Err(Error::GridMismatch),
            _ => {}
        }
        Ok(Self { grid, sector, lambda, potential })
    }

    /// Potential-free operator `-Delta_l - lambda`.
    pub fn free(grid: Arc<RadialGrid>, sector: usize, lambda: f64) -> Result<Self> {
        Self::new(grid, sector, lambda, Potential::Scalar(0.0))
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn sector(&self) -> usize {
        self.sector
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    pub fn with_sector(&self, sector: usize) -> Self {
        Self { sector, ..self.clone() }
    }

    /// `l (l + N - 2)`.
    pub fn centrifugal(&self) -> f64 {
        let l = self.sector as f64;
        l * (l + self.grid.dim() as f64 - 2.0)
    }

    /// `lambda + q(r_i)`.
    pub fn total_potential(&self, i: usize) -> f64 {
        self.lambda
            + match &self.potential {
                Potential::Scalar(q) => *q,
                Potential::Profile(f) => f.values()[i],
            }
    }

    fn q_at(&self, r: f64) -> f64 {
        self.lambda
            + match &self.potential {
                Potential::Scalar(q) => *q,
                Potential::Profile(f) => f.eval(r),
            }
    }

    /// `1 + |lambda| + max |q|`: the size against which singularity is judged.
    pub fn scale(&self) -> f64 {
        1.0 + self.lambda.abs()
            + match &self.potential {
                Potential::Scalar(q) => q.abs(),
                Potential::Profile(f) => f.sup_norm(),
            }
    }

    fn first_unknown(&self) -> usize {
        usize::from(self.sector > 0)
    }

    fn parity(&self) -> f64 {
        if self.sector.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// Dual-cell masses `int r^{N-1}` and interface fluxes `r_{i+1/2}^{N-1} / h_i`.
    fn fv_parts(&self) -> (Vec<f64>, Vec<f64>) {
        let r = self.grid.nodes();
        let n = self.grid.cells();
        let dim = self.grid.dim() as i32;
        let mid: Vec<f64> = r.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mass = (0..=n)
            .map(|i| {
                let a = if i == 0 { 0.0 } else { mid[i - 1] };
                let b = if i == n { 1.0 } else { mid[i] };
                (b.powi(dim) - a.powi(dim)) / dim as f64
            })
            .collect();
        let flux = (0..n).map(|i| mid[i].powi(dim - 1) / (r[i + 1] - r[i])).collect();
        (mass, flux)
    }

    /// Symmetrised finite-volume matrix on the unknown nodes, as diagonal and
    /// off-diagonal. Its eigenvalues are those of the discrete operator.
    pub fn tridiagonal(&self) -> (Vec<f64>, Vec<f64>) {
        let r = self.grid.nodes();
        let n = self.grid.cells();
        let (mass, flux) = self.fv_parts();
        let c = self.centrifugal();
        let first = self.first_unknown();
        let mut d = Vec::with_capacity(n - first);
        let mut e = Vec::with_capacity(n - first);
        for i in first..n {
            let left = if i == 0 { 0.0 } else { flux[i - 1] };
            let cent = if i == 0 { 0.0 } else { c / (r[i] * r[i]) };
            d.push((left + flux[i]) / mass[i] + cent - self.total_potential(i));
            if i + 1 < n {
                e.push(-flux[i] / (mass[i] * mass[i + 1]).sqrt());
            }
        }
        (d, e)
    }

    /// Second-order discrete operator applied at every node (zero on constrained nodes).
    pub fn apply_second(&self, u: &[f64]) -> Vec<f64> {
        let r = self.grid.nodes();
        let n = self.grid.cells();
        let (mass, flux) = self.fv_parts();
        let c = self.centrifugal();
        let mut out = vec![0.0; n + 1];
        for i in self.first_unknown()..n {
            let mut v = flux[i] * (u[i] - u[i + 1]);
            if i > 0 {
                v += flux[i - 1] * (u[i] - u[i - 1]);
            }
            let cent = if i == 0 { 0.0 } else { c / (r[i] * r[i]) };
            out[i] = v / mass[i] + (cent - self.total_potential(i)) * u[i];
        }
        out
    }

    /// Fourth-order discrete operator applied at every node (zero on constrained nodes).
    pub fn apply_fourth(&self, u: &[f64]) -> Vec<f64> {
        let ops = DiffOps::new(&self.grid, self.parity());
        let r = self.grid.nodes();
        let n = self.grid.cells();
        let c = self.centrifugal();
        let dim = self.grid.dim() as f64;
        let mut out = vec![0.0; n + 1];
        for i in self.first_unknown()..n {
            let d2 = DiffOps::apply(&ops.d2[i], u);
            out[i] = if i == 0 {
                -dim * d2 - self.total_potential(0) * u[0]
            } else {
                let d1 = DiffOps::apply(&ops.d1[i], u);
                -d2 - (dim - 1.0) / r[i] * d1 + (c / (r[i] * r[i]) - self.total_potential(i)) * u[i]
            };
        }
        out
    }

    /// Band matrix of the chosen scheme over all nodes; constrained rows are identity.
    pub fn matrix(&self, scheme: Scheme) -> Banded {
        let n = self.grid.cells();
        let mut m = match scheme {
            Scheme::Second => Banded::new(n + 1, 1, 1),
            Scheme::Fourth => Banded::new(n + 1, 4, 2),
        };
        let first = self.first_unknown();
        for i in 0..first {
            m.add(i, i, 1.0);
        }
        m.add(n, n, 1.0);
        let r = self.grid.nodes();
        let c = self.centrifugal();
        match scheme {
            Scheme::Second => {
                let (mass, flux) = self.fv_parts();
                for i in first..n {
                    let cent = if i == 0 { 0.0 } else { c / (r[i] * r[i]) };
                    let left = if i == 0 { 0.0 } else { flux[i - 1] };
                    m.add(i, i, (left + flux[i]) / mass[i] + cent - self.total_potential(i));
                    m.add(i, i + 1, -flux[i] / mass[i]);
                    if i > 0 {
                        m.add(i, i - 1, -left / mass[i]);
                    }
                }
            }
            Scheme::Fourth => {
                let ops = DiffOps::new(&self.grid, self.parity());
                let dim = self.grid.dim() as f64;
                for i in first..n {
                    if i == 0 {
                        for &(j, w) in &ops.d2[0] {
                            m.add(0, j, -dim * w);
                        }
                        m.add(0, 0, -self.total_potential(0));
                        continue;
                    }
                    for &(j, w) in &ops.d2[i] {
                        m.add(i, j, -w);
                    }
                    for &(j, w) in &ops.d1[i] {
                        m.add(i, j, -(dim - 1.0) / r[i] * w);
                    }
                    m.add(i, i, c / (r[i] * r[i]) - self.total_potential(i));
                }
            }
        }
        m
    }
}

/// Smallest singular value of the symmetrised second-order sector operator.
pub fn min_singular_value(op: &OperatorSpec) -> f64 {
    let (d, e) = op.tridiagonal();
    tridiag_min_abs_eigenvalue(&d, &e)
}

/// `k`-th eigenvalue (from 0) of the discrete sector operator.
pub fn sector_eigenvalue(op: &OperatorSpec, k: usize) -> f64 {
    let (d, e) = op.tridiagonal();
    tridiag_eigenvalue(&d, &e, k)
}

/// Solves `L u = g` with the second-order scheme.
pub fn solve_dirichlet(op: &OperatorSpec, g: &RadialFn) -> Result<RadialFn> {
    solve_dirichlet_with(op, g, Scheme::Second)
}

pub fn solve_dirichlet_with(op: &OperatorSpec, g: &RadialFn, scheme: Scheme) -> Result<RadialFn> {
    if g.grid().as_ref() != op.grid().as_ref() {
        return Err(Error::GridMismatch);
    }
    let threshold = NEAR_SINGULAR * op.scale();
    let sigma = min_singular_value(op);
    if sigma < threshold {
        return Err(Error::NearSingular { sigma, threshold });
    }
    let n = op.grid().cells();
    let mut rhs = g.values().to_vec();
    rhs[n] = 0.0;
    if op.sector() > 0 {
        rhs[0] = 0.0;
    }
    let u = op.matrix(scheme).solve(&rhs).map_err(|_| Error::NearSingular { sigma, threshold })?;
    RadialFn::from_values(op.grid().clone(), u, op.sector())
}

/// Relative `L^2`-type residual `|L u - g| / |g|` over interior nodes (weighted by
/// quadrature weights), with the discrete operator of `scheme`.
pub fn relative_residual(op: &OperatorSpec, u: &RadialFn, g: &RadialFn, scheme: Scheme) -> f64 {
    let lu = match scheme {
        Scheme::Second => op.apply_second(u.values()),
        Scheme::Fourth => op.apply_fourth(u.values()),
    };
    let w = op.grid().weights();
    let first = usize::from(op.sector() > 0);
    let n = op.grid().cells();
    let (mut num, mut den) = (0.0, 0.0);
    for i in first..n {
        let gi = g.values()[i];
        num += w[i] * (lu[i] - gi).powi(2);
        den += w[i] * gi * gi;
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// One Richardson step for a quantity of nominal order `p` computed at spacing `h` and `h/2`.
pub fn richardson(coarse: f64, fine: f64, order: f64) -> f64 {
    fine + (fine - coarse) / (2f64.powf(order) - 1.0)
}

/// `k`-th Dirichlet eigenvalue `E` of `-Delta_l - q` (the shift is ignored),
/// i.e. the value of `lambda` at which the operator becomes singular, by linear
/// shooting from the origin with bisection on the Sturm zero count.
pub fn shooting_eigenvalue(op: &OperatorSpec, k: usize) -> Result<f64> {
    let base = op.with_lambda(0.0);
    let qmax = base.scale();
    let zeros = |e: f64| -> Result<usize> { count_oscillations(&base, e) };
    let mut lo = -qmax - 1.0;
    let mut hi = (op.centrifugal() + 10.0).max(1.0) + qmax;
    let mut guard = 0;
    while zeros(hi)? <= k {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::NotConverged("eigenvalue bracket".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if zeros(mid)? > k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sign changes on `(0, 1]` of the regular solution of `L u = E u` (with `u(1)`
/// counted when it has crossed zero).
fn count_oscillations(op: &OperatorSpec, e: f64) -> Result<usize> {
    use super::ode::{integrate, Tolerances};
    let l = op.sector() as i32;
    let dim = op.grid().dim() as f64;
    let c = op.centrifugal();
    let q0 = op.q_at(0.0) + e;
    let scale = (q0.abs() + c + 1.0).sqrt();
    let r0 = 1e-4 / scale;
    // u ~ r^l (1 + b r^2)
    let b = -q0 / (2.0 * (2.0 * l as f64 + dim));
    let u0 = r0.powi(l) * (1.0 + b * r0 * r0);
    let du0 = l as f64 * r0.powi(l - 1) * (1.0 + b * r0 * r0) + r0.powi(l) * 2.0 * b * r0;
    let mut count = 0usize;
    let mut last = u0.signum();
    let tol = Tolerances { atol: 1e-14, rtol: 1e-11 };
    integrate(
        |r, y: &[f64; 2]| [y[1], -(dim - 1.0) / r * y[1] - (op.q_at(r) + e - c / (r * r)) * y[0]],
        r0,
        [u0, du0],
        1.0,
        &[],
        tol,
        |_, y| {
            let s = y[0].signum();
            if s != 0.0 && s != last {
                count += 1;
                last = s;
            }
            true
        },
    )?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_core::grid::{make_grid, Grading};
    use std::f64::consts::PI;

    fn ones(grid: &Arc<RadialGrid>) -> RadialFn {
        RadialFn::from_fn(grid.clone(), 0, |_| (1.0, 0.0)).unwrap()
    }

    #[test]
    fn torsion_function_closed_form() {
        for dim in [3usize, 6] {
            let grid = make_grid(dim, 64, Grading::Uniform).unwrap().shared();
            let op = OperatorSpec::free(grid.clone(), 0, 0.0).unwrap();
            for scheme in [Scheme::Second, Scheme::Fourth] {
                let u = solve_dirichlet_with(&op, &ones(&grid), scheme).unwrap();
                let exact = 1.0 / (2.0 * dim as f64);
                assert!((u.at_origin() - exact).abs() < 1e-12, "{dim} {scheme:?} {}", u.at_origin());
            }
        }
    }

    #[test]
    fn eigenvalue_crossing_three_ball() {
        let grid = make_grid(3, 256, Grading::Uniform).unwrap().shared();
        let op = OperatorSpec::free(grid, 0, 0.0).unwrap();
        let e = shooting_eigenvalue(&op, 0).unwrap();
        assert!((e - PI * PI).abs() / (PI * PI) < 1e-9);
        let fv = sector_eigenvalue(&op, 0);
        assert!((fv - PI * PI).abs() < 1e-3);
        assert!(min_singular_value(&op.with_lambda(0.99 * PI * PI)) > 0.0);
    }

    #[test]
    fn near_singular_refused() {
        let grid = make_grid(3, 64, Grading::Uniform).unwrap().shared();
        let op = OperatorSpec::free(grid.clone(), 0, 0.0).unwrap();
        let e = sector_eigenvalue(&op, 0);
        let r = solve_dirichlet(&op.with_lambda(e), &ones(&grid));
        assert!(matches!(r, Err(Error::NearSingular { .. })));
    }
}
