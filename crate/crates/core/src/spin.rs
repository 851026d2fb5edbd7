//! Collective angular momentum in the `J = N/2` sector.
//!
//! Basis index `k` corresponds to `m = k - J`, so `k = 0` is `|J, -J⟩` and
//! `k = 2J` is `|J, +J⟩`. Parity of index `k` is `(-1)^k`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Complex64, Error, Result};

const NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub const BOTH: [Parity; 2] = [Parity::Even, Parity::Odd];

    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    /// 0 for even, 1 for odd; also the first basis index of the sector.
    pub fn offset(self) -> usize {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }

    pub fn of_index(k: usize) -> Parity {
        if k % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Parity::Even => '+',
            Parity::Odd => '-',
        }
    }
}

/// The `2J+1` dimensional maximal-spin representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinBasis {
    two_j: u32,
}

impl SpinBasis {
    /// Basis for `n` two-level particles, `J = n/2`.
    pub fn from_particles(n: u32) -> Self {
        Self { two_j: n }
    }

    pub fn from_two_j(two_j: u32) -> Self {
        Self { two_j }
    }

    pub fn particles(&self) -> u32 {
        self.two_j
    }

    pub fn two_j(&self) -> u32 {
        self.two_j
    }

    pub fn j(&self) -> f64 {
        0.5 * self.two_j as f64
    }

    pub fn dim(&self) -> usize {
        self.two_j as usize + 1
    }

    /// Magnetic quantum number of basis index `k`.
    pub fn m(&self, k: usize) -> f64 {
        k as f64 - self.j()
    }

    pub fn sector_dim(&self, parity: Parity) -> usize {
        let d = self.dim();
        match parity {
            Parity::Even => d.div_ceil(2),
            Parity::Odd => d / 2,
        }
    }

    /// Full-basis indices belonging to a parity sector, ascending in `m`.
    pub fn sector_indices(&self, parity: Parity) -> impl Iterator<Item = usize> {
        (parity.offset()..self.dim()).step_by(2)
    }

    fn ladder(&self, m: f64) -> f64 {
        // ⟨m+1|J_+|m⟩
        let j = self.j();
        (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
    }
}

/// Pure state over `|J, m⟩`, amplitudes in ascending `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    basis: SpinBasis,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Wraps normalized amplitudes; fails if the norm is off by more than 1e-12.
    pub fn new(basis: SpinBasis, amps: Vec<Complex64>) -> Result<Self> {
        check_len(basis, amps.len())?;
        let state = Self { basis, amps };
        let dev = state.norm_deviation();
        if dev > NORM_TOLERANCE {
            return Err(Error::Domain(format!(
                "state norm deviates from 1 by {dev:e}"
            )));
        }
        Ok(state)
    }

    /// Normalizes the given amplitudes.
    pub fn normalized(basis: SpinBasis, mut amps: Vec<Complex64>) -> Result<Self> {
        check_len(basis, amps.len())?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Domain("cannot normalize a zero vector".into()));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { basis, amps })
    }

    /// Basis state `|J, m⟩` for index `k`.
    pub fn basis_state(basis: SpinBasis, k: usize) -> Result<Self> {
        if k >= basis.dim() {
            return Err(Error::Domain(format!(
                "basis index {k} out of range for dimension {}",
                basis.dim()
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amps[k] = Complex64::new(1.0, 0.0);
        Ok(Self { basis, amps })
    }

    /// Propagated states may drift; callers track the deviation.
    pub(crate) fn from_raw(basis: SpinBasis, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), basis.dim());
        Self { basis, amps }
    }

    pub fn basis(&self) -> SpinBasis {
        self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn norm_deviation(&self) -> f64 {
        (self.norm() - 1.0).abs()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        check_same(self.basis, other.basis)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    /// `⟨Π⟩`, the even-sector weight minus the odd-sector weight.
    pub fn parity_expectation(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(k, a)| Parity::of_index(k).sign() * a.norm_sqr())
            .sum()
    }

    pub fn sector_weight(&self, parity: Parity) -> f64 {
        self.basis
            .sector_indices(parity)
            .map(|k| self.amps[k].norm_sqr())
            .sum()
    }

    /// Largest amplitude difference against another state.
    pub fn max_amplitude_distance(&self, other: &StateVector) -> Result<f64> {
        check_same(self.basis, other.basis)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

fn check_len(basis: SpinBasis, len: usize) -> Result<()> {
    if len != basis.dim() {
        return Err(Error::BasisMismatch {
            expected: basis.dim(),
            found: len,
        });
    }
    Ok(())
}

pub(crate) fn check_same(a: SpinBasis, b: SpinBasis) -> Result<()> {
    if a != b {
        return Err(Error::BasisMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Real symmetric banded matrix over a [`SpinBasis`].
///
/// `bands[d][i]` holds `A[i][i+d]` (and by symmetry `A[i+d][i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveOperator {
    basis: SpinBasis,
    bands: Vec<Vec<f64>>,
}

impl CollectiveOperator {
    /// Builds from diagonals `0..=b`; `bands[d]` must have length `dim - d`.
    pub fn from_bands(basis: SpinBasis, bands: Vec<Vec<f64>>) -> Result<Self> {
        let dim = basis.dim();
        if bands.is_empty() {
            return Err(Error::Domain("operator needs at least a diagonal".into()));
        }
        for (d, band) in bands.iter().enumerate() {
            let want = dim.saturating_sub(d);
            if band.len() != want {
                return Err(Error::BasisMismatch {
                    expected: want,
                    found: band.len(),
                });
            }
        }
        Ok(Self { basis, bands })
    }

    pub fn basis(&self) -> SpinBasis {
        self.basis
    }

    pub fn bandwidth(&self) -> usize {
        self.bands.len() - 1
    }

    pub fn band(&self, d: usize) -> Option<&[f64]> {
        self.bands.get(d).map(Vec::as_slice)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        match self.bands.get(d) {
            Some(band) if lo < band.len() => band[lo],
            _ => 0.0,
        }
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.basis.dim();
        assert_eq!(x.len(), n, "vector length must match basis dimension");
        let mut y: Vec<Complex64> = self.bands[0].iter().zip(x).map(|(a, v)| v * a).collect();
        for (d, band) in self.bands.iter().enumerate().skip(1) {
            for (i, &a) in band.iter().enumerate() {
                y[i] += x[i + d] * a;
                y[i + d] += x[i] * a;
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.basis.dim();
        DMatrix::from_fn(n, n, |i, j| self.get(i, j))
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let n = self.basis.dim();
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(self.bandwidth());
                let hi = (i + self.bandwidth()).min(n - 1);
                (lo..=hi).map(|j| self.get(i, j).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `A·s + B` elementwise on matching bands (used to form `H(Λ)`).
    pub(crate) fn scaled_sum(&self, scale: f64, other: &CollectiveOperator) -> CollectiveOperator {
        let width = self.bands.len().max(other.bands.len());
        let bands = (0..width)
            .map(|d| {
                let len = self.basis.dim().saturating_sub(d);
                (0..len)
                    .map(|i| {
                        scale * self.bands.get(d).map_or(0.0, |b| b[i])
                            + other.bands.get(d).map_or(0.0, |b| b[i])
                    })
                    .collect()
            })
            .collect();
        CollectiveOperator {
            basis: self.basis,
            bands,
        }
    }
}

pub fn build_jz(basis: SpinBasis) -> CollectiveOperator {
    let diag = (0..basis.dim()).map(|k| basis.m(k)).collect();
    CollectiveOperator {
        basis,
        bands: vec![diag],
    }
}

pub fn build_jx(basis: SpinBasis) -> CollectiveOperator {
    let n = basis.dim();
    let diag = vec![0.0; n];
    let off = (0..n - 1).map(|k| 0.5 * basis.ladder(basis.m(k))).collect();
    CollectiveOperator {
        basis,
        bands: vec![diag, off],
    }
}

/// `J_x²` in closed form: diagonal `(J(J+1) - m²)/2`, second band
/// `¼ √(J(J+1)-m(m+1)) √(J(J+1)-(m+1)(m+2))`; the first band vanishes.
pub fn build_jx2(basis: SpinBasis) -> CollectiveOperator {
    let n = basis.dim();
    let j = basis.j();
    let diag = (0..n)
        .map(|k| {
            let m = basis.m(k);
            0.5 * (j * (j + 1.0) - m * m)
        })
        .collect();
    let first = vec![0.0; n - 1];
    let second = (0..n.saturating_sub(2))
        .map(|k| {
            let m = basis.m(k);
            0.25 * basis.ladder(m) * basis.ladder(m + 1.0)
        })
        .collect();
    CollectiveOperator {
        basis,
        bands: vec![diag, first, second],
    }
}

/// Geometric state with amplitudes `∝ μ^{m+J}` (with `0⁰ = 1`).
pub fn coherent_state(basis: SpinBasis, mu: f64) -> Result<StateVector> {
    check_mu(mu)?;
    let amps = (0..basis.dim())
        .map(|k| Complex64::new(mu.powi(k as i32), 0.0))
        .collect();
    StateVector::normalized(basis, amps)
}

/// Spin coherent state `∝ exp(μ J_+) |J, -J⟩`, amplitudes
/// `√C(2J, m+J) μ^{m+J}`.
///
/// For real `μ = tan(θ/2)` this is the Bloch state at polar angle θ from the
/// south pole in the x-z plane, so `⟨J_x⟩ = J sin θ = 2Jμ/(1+μ²)`.
pub fn spin_coherent_state(basis: SpinBasis, mu: f64) -> Result<StateVector> {
    check_mu(mu)?;
    let n = basis.two_j as usize;
    if mu == 0.0 {
        return StateVector::basis_state(basis, 0);
    }
    let log_mu = mu.abs().ln();
    let mut log_binom = 0.0;
    let mut logs = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            log_binom += ((n - k + 1) as f64 / k as f64).ln();
        }
        logs.push(0.5 * log_binom + k as f64 * log_mu);
    }
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let amps = logs
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let sign = if mu < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
            Complex64::new(sign * (l - peak).exp(), 0.0)
        })
        .collect();
    StateVector::normalized(basis, amps)
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu.abs() <= 1.0) {
        return Err(Error::Domain(format!("mu must lie in [-1, 1], got {mu}")));
    }
    Ok(())
}

/// Family of initial states parameterized by `μ ∈ [-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialStateKind {
    /// [`spin_coherent_state`].
    #[default]
    SpinCoherent,
    /// [`coherent_state`].
    Geometric,
}

impl InitialStateKind {
    pub fn prepare(self, basis: SpinBasis, mu: f64) -> Result<StateVector> {
        match self {
            InitialStateKind::SpinCoherent => spin_coherent_state(basis, mu),
            InitialStateKind::Geometric => coherent_state(basis, mu),
        }
    }
}

/// Multiplies the amplitude at `m` by `(-1)^{m+J}`.
pub fn parity_apply(state: &StateVector) -> StateVector {
    let amps = state
        .amps
        .iter()
        .enumerate()
        .map(|(k, a)| a * Parity::of_index(k).sign())
        .collect();
    StateVector::from_raw(state.basis, amps)
}

/// `⟨Ψ|A|Ψ⟩` split into its real value and the imaginary residue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub imag_residue: f64,
}

pub fn expectation(op: &CollectiveOperator, state: &StateVector) -> Result<Expectation> {
    check_same(op.basis, state.basis)?;
    let y = op.apply(&state.amps);
    let z: Complex64 = state.amps.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
    Ok(Expectation {
        value: z.re,
        imag_residue: z.im.abs(),
    })
}

/// `⟨J_x⟩` without building the operator.
pub fn jx_expectation(state: &StateVector) -> f64 {
    let basis = state.basis;
    let a = &state.amps;
    let mut acc = 0.0;
    for k in 0..a.len().saturating_sub(1) {
        let c = 0.5 * basis.ladder(basis.m(k));
        acc += 2.0 * c * (a[k].conj() * a[k + 1]).re;
    }
    acc
}
