//! Five-point finite-difference stencils on graded radial grids.

use super::grid::RadialGrid;

/// Fornberg's recursion: `w[d][j]` approximates the `d`-th derivative at `x0`
/// as `sum_j w[d][j] f(xs[j])`.
pub fn fornberg(x0: f64, xs: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_deriv + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// One stencil row: `(node index, weight)` pairs, ghost nodes already folded.
pub type Row = Vec<(usize, f64)>;

/// First and second derivative rows for every node of a grid.
///
/// Nodes left of the origin are mirrored: `f(-r) = parity * f(r)`, so even
/// functions (`parity = 1`) get `f'(0) = 0` automatically.
#[derive(Debug, Clone)]
pub struct DiffOps {
    pub d1: Vec<Row>,
    pub d2: Vec<Row>,
}

impl DiffOps {
    pub fn new(grid: &RadialGrid, parity: f64) -> Self {
        let r = grid.nodes();
        let n = grid.cells() as isize;
        let mut d1 = Vec::with_capacity(r.len());
        let mut d2 = Vec::with_capacity(r.len());
        let mirror = |k: isize| if k < 0 { -r[(-k) as usize] } else { r[k as usize] };
        let fold = |idx: &[isize], ws: &[f64]| -> Row {
            let mut row: Row = Vec::with_capacity(idx.len());
            for (&k, &wk) in idx.iter().zip(ws) {
                let (j, s) = if k < 0 { ((-k) as usize, parity) } else { (k as usize, 1.0) };
                match row.iter_mut().find(|(jj, _)| *jj == j) {
                    Some(e) => e.1 += s * wk,
                    None => row.push((j, s * wk)),
                }
            }
            row
        };
        for i in 0..=n {
            let start = (i - 2).min(n - 4);
            let idx: Vec<isize> = (start..start + 5).collect();
            let xs: Vec<f64> = idx.iter().map(|&k| mirror(k)).collect();
            let w = fornberg(r[i as usize], &xs, 2);
            d1.push(fold(&idx, &w[1]));
            if i + 2 > n && n >= 5 {
                // an off-centre five-point second derivative is only third order
                let wide: Vec<isize> = (n - 5..=n).collect();
                let xs: Vec<f64> = wide.iter().map(|&k| mirror(k)).collect();
                d2.push(fold(&wide, &fornberg(r[i as usize], &xs, 2)[2]));
            } else {
                d2.push(fold(&idx, &w[2]));
            }
        }
        Self { d1, d2 }
    }

    pub fn apply(row: &Row, f: &[f64]) -> f64 {
        row.iter().map(|&(j, w)| w * f[j]).sum()
    }

    pub fn derivative(&self, f: &[f64]) -> Vec<f64> {
        self.d1.iter().map(|row| Self::apply(row, f)).collect()
    }

    pub fn second_derivative(&self, f: &[f64]) -> Vec<f64> {
        self.d2.iter().map(|row| Self::apply(row, f)).collect()
    }
}
