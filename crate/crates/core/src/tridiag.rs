//! Real symmetric tridiagonal matrices and their eigendecomposition.
//!
//! The eigensolver is the implicit QL iteration with Wilkinson-style shifts
//! (the `tql2` scheme), accumulating rotations into the eigenvector matrix
//! when vectors are requested.

use crate::Complex64;

const MAX_SWEEPS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i+1`.
    pub off: Vec<f64>,
}

/// Eigenpairs in ascending order; `vectors` is column-major `n × n`.
#[derive(Debug, Clone)]
pub struct TridiagEigen {
    pub values: Vec<f64>,
    pub vectors: Option<Vec<f64>>,
}

/// QL failed to deflate the eigenvalue at `index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoConvergence {
    pub index: usize,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(
            off.len() + 1 == diag.len() || (diag.is_empty() && off.is_empty()),
            "off-diagonal must be one shorter than the diagonal"
        );
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    /// `y = T x`.
    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.dim();
        debug_assert!(x.len() == n && y.len() == n);
        if n == 0 {
            return;
        }
        if n == 1 {
            y[0] = x[0] * self.diag[0];
            return;
        }
        y[0] = x[0] * self.diag[0] + x[1] * self.off[0];
        for i in 1..n - 1 {
            y[i] = x[i - 1] * self.off[i - 1] + x[i] * self.diag[i] + x[i + 1] * self.off[i];
        }
        y[n - 1] = x[n - 2] * self.off[n - 2] + x[n - 1] * self.diag[n - 1];
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>, NoConvergence> {
        self.solve(false).map(|e| e.values)
    }

    pub fn eigen(&self) -> Result<TridiagEigen, NoConvergence> {
        self.solve(true)
    }

    fn solve(&self, want_vectors: bool) -> Result<TridiagEigen, NoConvergence> {
        let n = self.dim();
        let mut d = self.diag.clone();
        let mut e = vec![0.0; n];
        e[..n.saturating_sub(1)].copy_from_slice(&self.off);
        let mut z = if want_vectors {
            let mut z = vec![0.0; n * n];
            for i in 0..n {
                z[i * n + i] = 1.0;
            }
            Some(z)
        } else {
            None
        };

        let mut f = 0.0;
        let mut tst1: f64 = 0.0;
        for l in 0..n {
            tst1 = tst1.max(d[l].abs() + e[l].abs());
            let mut m = l;
            while m < n {
                if e[m].abs() <= f64::EPSILON * tst1 {
                    break;
                }
                m += 1;
            }
            // the last e is zero, so m < n here
            let m = m.min(n - 1);

            if m > l {
                let mut iter = 0;
                loop {
                    iter += 1;
                    if iter > MAX_SWEEPS {
                        return Err(NoConvergence { index: l });
                    }
                    let g = d[l];
                    let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                    let mut r = p.hypot(1.0);
                    if p < 0.0 {
                        r = -r;
                    }
                    d[l] = e[l] / (p + r);
                    d[l + 1] = e[l] * (p + r);
                    let dl1 = d[l + 1];
                    let mut h = g - d[l];
                    for di in d.iter_mut().take(n).skip(l + 2) {
                        *di -= h;
                    }
                    f += h;

                    p = d[m];
                    let mut c = 1.0;
                    let mut c2 = c;
                    let mut c3 = c;
                    let el1 = e[l + 1];
                    let mut s = 0.0;
                    let mut s2 = 0.0;
                    for i in (l..m).rev() {
                        c3 = c2;
                        c2 = c;
                        s2 = s;
                        let g = c * e[i];
                        h = c * p;
                        r = p.hypot(e[i]);
                        e[i + 1] = s * r;
                        s = e[i] / r;
                        c = p / r;
                        p = c * d[i] - s * g;
                        d[i + 1] = h + s * (c * g + s * d[i]);
                        if let Some(z) = z.as_mut() {
                            let (left, right) = z.split_at_mut((i + 1) * n);
                            let col_i = &mut left[i * n..];
                            let col_i1 = &mut right[..n];
                            for k in 0..n {
                                let hk = col_i1[k];
                                col_i1[k] = s * col_i[k] + c * hk;
                                col_i[k] = c * col_i[k] - s * hk;
                            }
                        }
                    }
                    p = -s * s2 * c3 * el1 * e[l] / dl1;
                    e[l] = s * p;
                    d[l] = c * p;
                    if e[l].abs() <= f64::EPSILON * tst1 {
                        break;
                    }
                }
            }
            d[l] += f;
            e[l] = 0.0;
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        let values = order.iter().map(|&i| d[i]).collect();
        let vectors = z.map(|z| {
            let mut out = vec![0.0; n * n];
            for (dst, &src) in order.iter().enumerate() {
                out[dst * n..(dst + 1) * n].copy_from_slice(&z[src * n..(src + 1) * n]);
            }
            out
        });
        Ok(TridiagEigen { values, vectors })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dense(t: &SymTridiagonal) -> DMatrix<f64> {
        let n = t.dim();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                t.diag[i]
            } else if i + 1 == j {
                t.off[i]
            } else if j + 1 == i {
                t.off[j]
            } else {
                0.0
            }
        })
    }

    fn check(t: &SymTridiagonal) {
        let n = t.dim();
        let eig = t.eigen().unwrap();
        let v = eig.vectors.unwrap();
        let a = dense(t);
        let scale = a.abs().max().max(1.0);
        let mut reference: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (x, y) in eig.values.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-12 * scale, "{x} vs {y}");
        }
        for w in eig.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        let vm = DMatrix::from_column_slice(n, n, &v);
        let ortho = (vm.transpose() * &vm - DMatrix::<f64>::identity(n, n)).abs().max();
        assert!(ortho < 1e-12, "orthogonality {ortho}");
        let resid = (&a * &vm - &vm * DMatrix::from_diagonal(&eig.values.clone().into()))
            .abs()
            .max();
        assert!(resid < 1e-12 * scale, "residual {resid}");
    }

    #[test]
    fn matches_dense_solver() {
        check(&SymTridiagonal::new(vec![2.0], vec![]));
        check(&SymTridiagonal::new(vec![1.0, 3.0], vec![0.5]));
        check(&SymTridiagonal::new(vec![0.0; 7], vec![1.0; 6]));
        let n = 40;
        let diag = (0..n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let off = (0..n - 1).map(|i| 0.1 + ((i * 31) % 5) as f64).collect();
        check(&SymTridiagonal::new(diag, off));
        // decoupled blocks
        check(&SymTridiagonal::new(vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 0.0, 1.0]));
    }

    #[test]
    fn discrete_laplacian_spectrum() {
        let n = 25;
        let t = SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1]);
        let vals = t.eigenvalues().unwrap();
        for (k, v) in vals.iter().enumerate() {
            let theta = (k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64;
            let want = 2.0 - 2.0 * theta.cos();
            assert!((v - want).abs() < 1e-13);
        }
    }

    #[test]
    fn empty_matrix() {
        let t = SymTridiagonal::new(vec![], vec![]);
        assert!(t.eigen().unwrap().values.is_empty());
    }

    #[test]
    fn gershgorin_bounds_spectrum() {
        let t = SymTridiagonal::new(vec![1.0, -2.0, 5.0], vec![0.3, -1.5]);
        let (lo, hi) = t.gershgorin();
        for v in t.eigenvalues().unwrap() {
            assert!(lo <= v && v <= hi);
        }
    }
}
