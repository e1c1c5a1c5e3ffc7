//! Banded LU with partial pivoting and Sturm-sequence bisection for
//! symmetric tridiagonal matrices.

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals. Storage
/// reserves `kl` extra super-diagonals for pivoting fill-in.
#[derive(Debug, Clone, PartialEq)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        (off >= 0 && (off as usize) < self.width).then(|| i * self.width + off as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` at `(i, j)`; panics if the entry lies outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let s = self.slot(i, j).expect("in band");
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + self.kl).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// LU factorisation with row pivoting.
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let reach = self.ku + self.kl;
        let mut piv = vec![0usize; n];
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-300 || best < f64::EPSILON * 1e-6 * scale {
                return Err(Error::JacobianSingular);
            }
            piv[k] = p;
            let jmax = (k + reach).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    self.set(k, j, b);
                    self.set(p, j, a);
                }
            }
            let d = self.get(k, k);
            for i in k + 1..=last {
                let lik = self.get(i, k) / d;
                if lik == 0.0 {
                    continue;
                }
                self.set(i, k, lik);
                for j in k + 1..=jmax {
                    let ukj = self.get(k, j);
                    if ukj != 0.0 {
                        let v = self.get(i, j) - lik * ukj;
                        self.set(i, j, v);
                    }
                }
            }
        }
        Ok(BandedLu { m: self, piv })
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        match self.slot(i, j) {
            Some(s) => self.data[s] = v,
            None => debug_assert!(v == 0.0, "fill outside storage at ({i}, {j})"),
        }
    }

    pub fn solve(self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.factor()?.solve(b))
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    m: Banded,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.m.n;
        let kl = self.m.kl;
        let reach = self.m.ku + kl;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let last = (k + kl).min(n - 1);
            for i in k + 1..=last {
                x[i] -= self.m.get(i, k) * x[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + reach).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=jmax {
                s -= self.m.get(k, j) * x[j];
            }
            x[k] = s / self.m.get(k, k);
        }
        x
    }
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix with
/// diagonal `d` and off-diagonal `e` (`e.len() == d.len() - 1`).
pub fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        let qq = if q == 0.0 { f64::EPSILON * (e[i - 1].abs() + 1.0) } else { q };
        q = d[i] - x - e[i - 1] * e[i - 1] / qq;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(d: &[f64], e: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..d.len() {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i < e.len() { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    (lo, hi)
}

/// `k`-th smallest eigenvalue (from 0) by bisection on the Sturm count.
pub fn tridiag_eigenvalue(d: &[f64], e: &[f64], k: usize) -> f64 {
    let (mut lo, mut hi) = gershgorin(d, e);
    let tol = 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < tol {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvalue of smallest magnitude.
pub fn tridiag_min_abs_eigenvalue(d: &[f64], e: &[f64]) -> f64 {
    let below = sturm_count(d, e, 0.0);
    let mut best = f64::INFINITY;
    if below < d.len() {
        best = best.min(tridiag_eigenvalue(d, e, below).abs());
    }
    if below > 0 {
        best = best.min(tridiag_eigenvalue(d, e, below - 1).abs());
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_solve_matches_dense() {
        let n = 12;
        let mut m = Banded::new(n, 3, 2);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(3)..=(i + 2).min(n - 1) {
                let v = ((i * 7 + j * 3) % 11) as f64 - 5.0 + if i == j { 0.5 } else { 0.0 };
                m.add(i, j, v);
                dense[i][j] = v;
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..n).map(|i| (0..n).map(|j| dense[i][j] * x[j]).sum()).collect();
        assert_eq!(m.mul_vec(&x).len(), n);
        let y = m.solve(&b).unwrap();
        for i in 0..n {
            assert!((y[i] - x[i]).abs() < 1e-9, "{i}: {} vs {}", y[i], x[i]);
        }
    }

    #[test]
    fn singular_detected() {
        let mut m = Banded::new(3, 1, 1);
        m.add(0, 0, 1.0);
        m.add(1, 1, 1.0);
        assert!(matches!(m.solve(&[1.0, 1.0, 1.0]), Err(Error::JacobianSingular)));
    }

    #[test]
    fn laplacian_eigenvalues() {
        let n = 50;
        let d = vec![2.0; n];
        let e = vec![-1.0; n - 1];
        for k in [0, 7, 49] {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((tridiag_eigenvalue(&d, &e, k) - exact).abs() < 1e-12);
        }
        let shifted: Vec<f64> = d.iter().map(|x| x - 0.5).collect();
        let m = tridiag_min_abs_eigenvalue(&shifted, &e);
        let all: Vec<f64> = (0..n)
            .map(|k| (1.5 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos()).abs())
            .collect();
        let exact = all.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((m - exact).abs() < 1e-12);
    }
}
