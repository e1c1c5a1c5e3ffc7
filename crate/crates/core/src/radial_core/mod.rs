//! Grids, radial profiles, quadrature and sector operators on the unit ball.

pub mod function;
pub mod grid;
pub mod linalg;
pub mod ode;
pub mod operator;
pub mod quadrature;
pub mod stencil;

pub use function::RadialFn;
pub use grid::{ball_volume, make_grid, sphere_area, Grading, RadialGrid};
pub use operator::{
    min_singular_value, richardson, sector_eigenvalue, shooting_eigenvalue, solve_dirichlet, solve_dirichlet_with,
    OperatorSpec, Potential, Scheme,
};

/// `int_{B_1} f`.
pub fn integrate(f: &RadialFn) -> f64 {
    f.integrate()
}

/// `L^p(B_1)` norm of `f`.
pub fn lp_norm(f: &RadialFn, p: f64) -> crate::Result<f64> {
    f.lp_norm(p)
}
