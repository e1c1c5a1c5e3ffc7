//! Dormand-Prince 5(4) integrator with exact landing on requested outputs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { atol: 1e-12, rtol: 1e-12 }
    }
}

/// States beyond this magnitude are treated as escaping.
const ESCAPE: f64 = 1e150;
const MAX_STEPS: usize = 2_000_000;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Result of an integration run.
#[derive(Debug, Clone)]
pub struct Trajectory<const D: usize> {
    /// State at each requested output time, in order.
    pub samples: Vec<[f64; D]>,
    /// State at the final time.
    pub end: [f64; D],
    pub steps: usize,
}

fn comb<const D: usize>(y: &[f64; D], h: f64, ks: &[(&[f64; D], f64)]) -> [f64; D] {
    let mut out = *y;
    for (k, a) in ks {
        for j in 0..D {
            out[j] += h * a * k[j];
        }
    }
    out
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end`, landing exactly on each of
/// `outputs` (sorted, inside `[t0, t_end]`). `observe` sees every accepted step
/// and may stop the run early by returning `false`.
pub fn integrate<const D: usize>(
    mut rhs: impl FnMut(f64, &[f64; D]) -> [f64; D],
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    outputs: &[f64],
    tol: Tolerances,
    mut observe: impl FnMut(f64, &[f64; D]) -> bool,
) -> Result<Trajectory<D>> {
    let mut t = t0;
    let mut y = y0;
    let mut samples = Vec::with_capacity(outputs.len());
    let mut next = 0;
    while next < outputs.len() && outputs[next] <= t0 {
        samples.push(y0);
        next += 1;
    }
    let span = t_end - t0;
    let mut k1 = rhs(t, &y);
    let mut h = initial_step(&y, &k1, span, tol);
    let mut steps = 0;
    while t < t_end {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::StepFailure { radius: t, reason: "step budget exhausted".into() });
        }
        let target = if next < outputs.len() { outputs[next].min(t_end) } else { t_end };
        let mut landing = false;
        let proposed = h;
        if t + h >= target - 1e-15 * target.abs().max(1.0) {
            h = target - t;
            landing = true;
        }
        if h <= 1e-15 * t.abs().max(1e-300) {
            return Err(Error::StepFailure { radius: t, reason: format!("step size {h:e} underflow") });
        }
        let k2 = rhs(t + C2 * h, &comb(&y, h, &[(&k1, A21)]));
        let k3 = rhs(t + C3 * h, &comb(&y, h, &[(&k1, A31), (&k2, A32)]));
        let k4 = rhs(t + C4 * h, &comb(&y, h, &[(&k1, A41), (&k2, A42), (&k3, A43)]));
        let k5 = rhs(t + C5 * h, &comb(&y, h, &[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)]));
        let k6 = rhs(t + h, &comb(&y, h, &[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)]));
        let ynew = comb(&y, h, &[(&k1, B1), (&k3, B3), (&k4, B4), (&k5, B5), (&k6, B6)]);
        let k7 = rhs(t + h, &ynew);
        let mut err = 0.0f64;
        for j in 0..D {
            let e = h * (E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j] + E7 * k7[j]);
            let sc = tol.atol + tol.rtol * y[j].abs().max(ynew[j].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            if ynew.iter().any(|v| !v.is_finite()) && h < 1e-12 {
                return Err(Error::BlowUpBeforeOne { radius: t });
            }
            h *= 0.1;
            continue;
        }
        if err <= 1.0 {
            t = if landing { target } else { t + h };
            y = ynew;
            k1 = k7;
            if y.iter().any(|v| v.abs() > ESCAPE) {
                return Err(Error::BlowUpBeforeOne { radius: t });
            }
            while next < outputs.len() && outputs[next] <= t {
                samples.push(y);
                next += 1;
            }
            if !observe(t, &y) {
                break;
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if landing && err <= 1.0 {
            // the landing step was truncated; resume from the untruncated proposal
            h = proposed.max(h * factor);
        } else {
            h *= factor;
        }
    }
    Ok(Trajectory { samples, end: y, steps })
}

fn initial_step<const D: usize>(y: &[f64; D], f: &[f64; D], span: f64, tol: Tolerances) -> f64 {
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for j in 0..D {
        let sc = tol.atol + tol.rtol * y[j].abs();
        d0 = d0.max((y[j] / sc).abs());
        d1 = d1.max((f[j] / sc).abs());
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span.abs() * 0.1).max(1e-14)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let outs: Vec<f64> = (1..=10).map(|k| k as f64 * 0.5).collect();
        let tr =
            integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], 5.0, &outs, Tolerances::default(), |_, _| true)
                .unwrap();
        for (t, s) in outs.iter().zip(&tr.samples) {
            assert!((s[0] - t.cos()).abs() < 1e-9);
        }
        assert!((tr.end[1] + 5.0f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn blow_up_detected() {
        let r = integrate(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, [1.0], 2.0, &[], Tolerances::default(), |_, _| true);
        assert!(matches!(r, Err(Error::BlowUpBeforeOne { .. }) | Err(Error::StepFailure { .. })));
    }
}
