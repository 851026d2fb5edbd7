//! Chebyshev expansion of `exp(-iτH)ψ` for symmetric tridiagonal `H`.
//!
//! With the spectrum mapped into `[-1, 1]` by `H = c + r·X`,
//! `exp(-iτH) = e^{-iτc} Σ_k (2 - δ_k0) (-i)^k J_k(τr) T_k(X)`.
//! The series is cut where the Bessel coefficients fall below
//! [`TRUNCATION`], which bounds the per-step error by roughly that amount.

use crate::tridiag::SymTridiagonal;
use crate::Complex64;

/// Coefficient magnitude below which the expansion is truncated.
pub const TRUNCATION: f64 = 1e-16;

/// `J_0(x) … J_K(x)` with `K` the last order above [`TRUNCATION`].
///
/// Miller's backward recurrence normalized by `J_0 + 2Σ J_{2k} = 1`.
pub fn bessel_j_series(x: f64) -> Vec<f64> {
    let ax = x.abs();
    if ax < TRUNCATION {
        return vec![1.0];
    }
    let start = (ax + 30.0 + 12.0 * ax.cbrt()).ceil() as usize;
    let start = start + start % 2;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = 2.0 * k as f64 / ax * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            for v in &mut vals[k - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let norm = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    for v in &mut vals {
        *v /= norm;
    }
    // J_k(-x) = (-1)^k J_k(x)
    if x < 0.0 {
        for (k, v) in vals.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    let last = vals
        .iter()
        .rposition(|v| v.abs() > TRUNCATION)
        .unwrap_or(0);
    vals.truncate(last + 1);
    vals
}

/// Scratch space reused across steps.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    prev: Vec<Complex64>,
    cur: Vec<Complex64>,
    next: Vec<Complex64>,
    acc: Vec<Complex64>,
}

impl Workspace {
    fn resize(&mut self, n: usize) {
        for v in [&mut self.prev, &mut self.cur, &mut self.next, &mut self.acc] {
            v.clear();
            v.resize(n, Complex64::new(0.0, 0.0));
        }
    }
}

/// Overwrites `psi` with `exp(-iτH)psi`; returns the number of matvecs.
pub fn apply_exp(h: &SymTridiagonal, tau: f64, psi: &mut [Complex64], ws: &mut Workspace) -> usize {
    let n = h.dim();
    if n == 0 || tau == 0.0 {
        return 0;
    }
    let (lo, hi) = h.gershgorin();
    let center = 0.5 * (hi + lo);
    let radius = (0.5 * (hi - lo)).max(f64::MIN_POSITIVE);
    let coeffs = bessel_j_series(tau * radius);

    ws.resize(n);
    let scaled = |x: &[Complex64], y: &mut [Complex64]| {
        h.apply_into(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = (*yi - xi * center) / radius;
        }
    };

    // (-i)^k cycles through 1, -i, -1, i
    let phase = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];

    ws.prev.copy_from_slice(psi);
    for (a, p) in ws.acc.iter_mut().zip(psi.iter()) {
        *a = p * coeffs[0];
    }
    let mut matvecs = 0;
    if coeffs.len() > 1 {
        scaled(&ws.prev, &mut ws.cur);
        matvecs += 1;
        let w = phase[1] * (2.0 * coeffs[1]);
        for (a, c) in ws.acc.iter_mut().zip(&ws.cur) {
            *a += c * w;
        }
        for (k, &ck) in coeffs.iter().enumerate().skip(2) {
            scaled(&ws.cur, &mut ws.next);
            matvecs += 1;
            let w = phase[k % 4] * (2.0 * ck);
            for i in 0..n {
                let t = 2.0 * ws.next[i] - ws.prev[i];
                ws.next[i] = t;
                ws.acc[i] += t * w;
            }
            std::mem::swap(&mut ws.prev, &mut ws.cur);
            std::mem::swap(&mut ws.cur, &mut ws.next);
        }
    }
    let global = Complex64::from_polar(1.0, -tau * center);
    for (p, a) in psi.iter_mut().zip(&ws.acc) {
        *p = a * global;
    }
    matvecs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_reference_values() {
        // Abramowitz & Stegun table 9.1
        let j = bessel_j_series(1.0);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((j[2] - 0.114_903_484_931_900_5).abs() < 1e-15);
        let j = bessel_j_series(10.0);
        assert!((j[0] + 0.245_935_764_451_348_3).abs() < 1e-14);
        assert!((j[1] - 0.043_472_746_168_861_4).abs() < 1e-14);
        let neg = bessel_j_series(-10.0);
        assert!((neg[1] + j[1]).abs() < 1e-15);
        assert_eq!(bessel_j_series(0.0), vec![1.0]);
        assert_eq!(bessel_j_series(1e-310), vec![1.0]);
    }

    #[test]
    fn bessel_truncation_grows_with_argument() {
        let small = bessel_j_series(1.0).len();
        let big = bessel_j_series(50.0).len();
        assert!(big > 50 && big < 100, "{big}");
        assert!(small < big);
    }

    #[test]
    fn exp_of_diagonal_is_phase() {
        let h = SymTridiagonal::new(vec![-3.0, 0.5, 7.0], vec![0.0, 0.0]);
        let mut psi = vec![Complex64::new(1.0, 0.0); 3];
        let mut ws = Workspace::default();
        apply_exp(&h, 0.8, &mut psi, &mut ws);
        for (p, e) in psi.iter().zip(&h.diag) {
            let want = Complex64::from_polar(1.0, -0.8 * e);
            assert!((p - want).norm() < 1e-14);
        }
    }

    #[test]
    fn forward_then_backward_is_identity() {
        let h = SymTridiagonal::new(vec![1.0, -2.0, 0.3, 4.0], vec![0.7, -1.1, 2.0]);
        let orig: Vec<_> = (0..4).map(|k| Complex64::new(k as f64, 1.0 - k as f64)).collect();
        let mut psi = orig.clone();
        let mut ws = Workspace::default();
        apply_exp(&h, 3.7, &mut psi, &mut ws);
        apply_exp(&h, -3.7, &mut psi, &mut ws);
        for (a, b) in psi.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
