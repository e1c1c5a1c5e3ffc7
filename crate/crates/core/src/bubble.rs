//! Aubin-Talenti bubbles in `R^6`, the regular part of the Dirichlet Green
//! function of the unit ball, projected bubbles, kernel functions and the
//! constants of the reduced energy.

use std::f64::consts::PI;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::radial_core::grid::sphere_area;
use crate::radial_core::quadrature::adaptive;
use crate::radial_core::{RadialFn, RadialGrid};

/// `alpha_6 = [6 * 4]^{4/4}`.
pub const ALPHA6: f64 = 24.0;

/// `alpha_N = [N (N-2)]^{(N-2)/4}`.
pub fn alpha(dim: usize) -> f64 {
    let n = dim as f64;
    (n * (n - 2.0)).powf((n - 2.0) / 4.0)
}

pub type Point = [f64; 6];

fn dot(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist2(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One bubble: scale `mu`, centre `xi`, sign `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleParams {
    pub mu: f64,
    pub xi: Point,
    pub beta: i8,
}

impl BubbleParams {
    pub fn new(mu: f64, xi: Point, beta: i8) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Precondition(format!("bubble scale {mu} must be positive")));
        }
        if dot(&xi, &xi) >= 1.0 {
            return Err(Error::Precondition("bubble centre must lie inside the unit ball".into()));
        }
        if beta != 1 && beta != -1 {
            return Err(Error::Precondition(format!("bubble sign {beta} must be +1 or -1")));
        }
        Ok(Self { mu, xi, beta })
    }

    pub fn centred(mu: f64, beta: i8) -> Result<Self> {
        Self::new(mu, [0.0; 6], beta)
    }

    pub fn is_centred(&self) -> bool {
        self.xi.iter().all(|&c| c == 0.0)
    }
}

/// `U_{mu,xi}(x) = alpha_6 mu^2 (mu^2 + |x - xi|^2)^{-2}`.
pub fn talenti_u(p: &BubbleParams, x: &Point) -> f64 {
    talenti_radial(p.mu, dist2(x, &p.xi).sqrt())
}

/// `U_{mu,0}` at radius `r`.
pub fn talenti_radial(mu: f64, r: f64) -> f64 {
    let s = mu * mu + r * r;
    ALPHA6 * mu * mu / (s * s)
}

/// Radial derivative of `U_{mu,0}`.
pub fn talenti_radial_deriv(mu: f64, r: f64) -> f64 {
    let s = mu * mu + r * r;
    -4.0 * ALPHA6 * mu * mu * r / (s * s * s)
}

/// Regular part of the Green function of the unit ball,
/// `H(x, xi) = (|xi|^2 |x|^2 - 2 x.xi + 1)^{-2}`, normalised so that
/// `H = |x - xi|^{-4}` on the sphere.
pub fn robin_h(x: &Point, xi: &Point) -> f64 {
    let q = dot(xi, xi) * dot(x, x) - 2.0 * dot(x, xi) + 1.0;
    1.0 / (q * q)
}

/// `d/d xi_i H(x, xi)`.
pub fn robin_h_dxi(i: usize, x: &Point, xi: &Point) -> f64 {
    let q = dot(xi, xi) * dot(x, x) - 2.0 * dot(x, xi) + 1.0;
    -2.0 / (q * q * q) * (2.0 * xi[i] * dot(x, x) - 2.0 * x[i])
}

/// `c(mu) = alpha_6 mu^2 / (1 + mu^2)^2`, the constant trace of `U_{mu,0}` on the sphere.
pub fn projection_shift(mu: f64) -> f64 {
    talenti_radial(mu, 1.0)
}

/// Exact projection `W_{mu,0} = U_{mu,0} - c(mu)` sampled on `grid`.
pub fn project_bubble_radial(grid: &Arc<RadialGrid>, mu: f64) -> Result<RadialFn> {
    if !(mu > 0.0) {
        return Err(Error::Precondition(format!("bubble scale {mu} must be positive")));
    }
    let c = projection_shift(mu);
    RadialFn::from_fn(grid.clone(), 0, |r| (talenti_radial(mu, r) - c, talenti_radial_deriv(mu, r)))
}

/// Two-term value `U - alpha_6 mu^2 H(x, xi)` of the projection, with a bound on
/// the neglected part: by the maximum principle the remainder is at most
/// `2 alpha_6 mu^4 / (1 - |xi|)^6`.
pub fn project_bubble_expansion(p: &BubbleParams, x: &Point) -> (f64, f64) {
    let value = talenti_u(p, x) - ALPHA6 * p.mu * p.mu * robin_h(x, &p.xi);
    let d = 1.0 - dot(&p.xi, &p.xi).sqrt();
    (value, 2.0 * ALPHA6 * p.mu.powi(4) / d.powi(6))
}

/// Projected bubble, exact when centred and the two-term expansion otherwise.
pub fn project_bubble(p: &BubbleParams, x: &Point) -> f64 {
    if p.is_centred() {
        let r = dot(x, x).sqrt();
        talenti_radial(p.mu, r) - projection_shift(p.mu)
    } else {
        project_bubble_expansion(p, x).0
    }
}

/// `Psi^0 = d U / d mu` (`i = 0`) and `Psi^i = d U / d xi_i` (`i = 1..=6`).
pub fn kernel_psi(i: usize, p: &BubbleParams, x: &Point) -> f64 {
    let d2 = dist2(x, &p.xi);
    let s = p.mu * p.mu + d2;
    if i == 0 {
        2.0 * ALPHA6 * p.mu * (d2 - p.mu * p.mu) / (s * s * s)
    } else {
        assert!(i <= 6, "kernel index {i} out of range");
        4.0 * ALPHA6 * p.mu * p.mu * (x[i - 1] - p.xi[i - 1]) / (s * s * s)
    }
}

/// Two-term expansions of the projected kernel functions:
/// `Z^0 = Psi^0 - 2 alpha_6 mu H`, `Z^i = Psi^i - alpha_6 mu^2 d_{xi_i} H`.
pub fn kernel_z(i: usize, p: &BubbleParams, x: &Point) -> f64 {
    if i == 0 {
        kernel_psi(0, p, x) - 2.0 * ALPHA6 * p.mu * robin_h(x, &p.xi)
    } else {
        kernel_psi(i, p, x) - ALPHA6 * p.mu * p.mu * robin_h_dxi(i - 1, x, &p.xi)
    }
}

/// `d_2(t) = alpha_6^{3/2} omega_6 |t|^{3/2}`.
pub fn d2(t: f64) -> f64 {
    ALPHA6.powf(1.5) * sphere_area(6) * t.abs().powf(1.5)
}

/// `d_1 = |U|_{L^2(R^6)}^2 = 96 pi^3`.
pub fn d1_closed() -> f64 {
    96.0 * PI.powi(3)
}

/// `int_0^inf r^5 (1 + r^2)^{-4} dr` by adaptive quadrature on `[0, 10]` plus
/// the exact tail `(1/T - 1/T^2 + 1/(3 T^3)) / 2`, `T = 101`.
fn d1_radial_integral() -> f64 {
    let cut = 10.0f64;
    let (head, _) = adaptive(|r: f64| r.powi(5) / (1.0 + r * r).powi(4), 0.0, cut, 1e-16);
    let t = 1.0 + cut * cut;
    head + 0.5 * (1.0 / t - 1.0 / (t * t) + 1.0 / (3.0 * t * t * t))
}

/// `d_1` by quadrature.
pub fn d1_quadrature() -> f64 {
    ALPHA6 * ALPHA6 * sphere_area(6) * d1_radial_integral()
}

/// `int_{R^6} U^3 = alpha_6^3 omega_6 / 60`.
pub fn bubble_cubic_mass() -> f64 {
    ALPHA6.powi(3) * sphere_area(6) / 60.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsRegistry {
    pub alpha6: f64,
    pub omega6: f64,
    pub d1: f64,
    pub d1_closed: f64,
}

impl ConstantsRegistry {
    pub fn d2(&self, t: f64) -> f64 {
        self.alpha6.powf(1.5) * self.omega6 * t.abs().powf(1.5)
    }

    pub fn summary(&self) -> Value {
        json!({
            "alpha6": self.alpha6,
            "omega6": self.omega6,
            "d1": self.d1,
            "d1_closed_form": self.d1_closed,
            "d2_formula": "alpha6^(3/2) * omega6 * |t|^(3/2)",
            "provenance": {
                "alpha6": "[N(N-2)]^((N-2)/4) at N = 6",
                "omega6": "2 pi^(N/2) / Gamma(N/2) at N = 6",
                "d1": "alpha6^2 omega6 int_0^inf r^5 (1+r^2)^-4 dr, adaptive Gauss-Kronrod on [0,10] plus exact tail",
            },
        })
    }
}

pub fn constants() -> ConstantsRegistry {
    ConstantsRegistry { alpha6: alpha(6), omega6: sphere_area(6), d1: d1_quadrature(), d1_closed: d1_closed() }
}

/// `|W_{mu,0}|_{L^{3/2}(B_1)}` by adaptive quadrature.
pub fn projected_l32_norm(mu: f64) -> f64 {
    let c = projection_shift(mu);
    let f = |r: f64| (talenti_radial(mu, r) - c).abs().powf(1.5) * r.powi(5);
    let mut total = 0.0;
    let mut a = 0.0;
    for b in [mu, 10.0 * mu, 100.0 * mu, 1.0] {
        if b > a && b <= 1.0 {
            total += adaptive(f, a, b, 1e-14).0;
            a = b;
        }
    }
    (sphere_area(6) * total).powf(2.0 / 3.0)
}
