//! Infinite-time averaged state (diagonal ensemble) and its entropy.
//!
//! Under constant `H(Λ)` all coherences between non-degenerate levels average
//! out. Coherences inside a degenerate doublet are stationary and survive,
//! so the ensemble is block diagonal with 1×1 and 2×2 blocks.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::chebyshev::{self, Workspace};
use crate::observables::{Distribution, JxBasis};
use crate::spectral::{sector_hamiltonian, HamiltonianParams, SpectralDecomposition};
use crate::spin::{check_same, Parity, StateVector};
use crate::{Complex64, Error, Result};

/// Default degeneracy threshold relative to the spectral range.
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-8;
/// Largest dimension accepted by [`finite_time_average_oracle`].
pub const ORACLE_DIM_LIMIT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Block {
    Single {
        parity: Parity,
        level: usize,
        population: f64,
    },
    /// Populations and coherence `c₊ c₋*` on a degenerate pair.
    Doublet {
        even: usize,
        odd: usize,
        population_even: f64,
        population_odd: f64,
        coherence: Complex64,
    },
}

impl Block {
    pub fn trace(&self) -> f64 {
        match *self {
            Block::Single { population, .. } => population,
            Block::Doublet {
                population_even,
                population_odd,
                ..
            } => population_even + population_odd,
        }
    }

    /// Eigenvalues of the block (one or two).
    pub fn eigenvalues(&self) -> Vec<f64> {
        match *self {
            Block::Single { population, .. } => vec![population],
            Block::Doublet {
                population_even: a,
                population_odd: b,
                coherence: c,
                ..
            } => {
                let mean = 0.5 * (a + b);
                let r = (0.25 * (a - b) * (a - b) + c.norm_sqr()).sqrt();
                vec![mean + r, mean - r]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumEnsemble {
    pub lambda: f64,
    /// Absolute splitting below which a doublet counts as degenerate.
    pub tolerance: f64,
    pub blocks: Vec<Block>,
}

impl EquilibriumEnsemble {
    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(Block::trace).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.eigenvalues()).collect()
    }

    pub fn doublet_blocks(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| matches!(b, Block::Doublet { .. }))
            .count()
    }

    /// True when exactly one eigenvalue is above `tol`.
    pub fn is_pure(&self, tol: f64) -> bool {
        self.eigenvalues().iter().filter(|&&p| p > tol).count() == 1
    }

    /// Dense matrix in the `m` basis. Intended for small `N`.
    pub fn to_dense(&self, dec: &SpectralDecomposition) -> DMatrix<Complex64> {
        let n = dec.basis().dim();
        let embed = |parity: Parity, i: usize| -> Vec<(usize, f64)> {
            let off = parity.offset();
            dec.sector(parity)
                .vector(i)
                .iter()
                .enumerate()
                .map(|(s, &v)| (off + 2 * s, v))
                .collect()
        };
        let mut rho = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        let mut add = |u: &[(usize, f64)], v: &[(usize, f64)], w: Complex64| {
            for &(k, a) in u {
                for &(l, b) in v {
                    rho[(k, l)] += w * (a * b);
                }
            }
        };
        for block in &self.blocks {
            match *block {
                Block::Single {
                    parity,
                    level,
                    population,
                } => {
                    let v = embed(parity, level);
                    add(&v, &v, population.into());
                }
                Block::Doublet {
                    even,
                    odd,
                    population_even,
                    population_odd,
                    coherence,
                } => {
                    let ve = embed(Parity::Even, even);
                    let vo = embed(Parity::Odd, odd);
                    add(&ve, &ve, population_even.into());
                    add(&vo, &vo, population_odd.into());
                    add(&ve, &vo, coherence);
                    add(&vo, &ve, coherence.conj());
                }
            }
        }
        rho
    }
}

/// Diagonal ensemble of `state` under `H(dec.lambda())`. Doublets whose
/// splitting is at most `relative_tolerance × spectral range` keep their
/// coherence.
pub fn build_equilibrium(
    state: &StateVector,
    dec: &SpectralDecomposition,
    relative_tolerance: f64,
) -> Result<EquilibriumEnsemble> {
    if !(relative_tolerance >= 0.0) || !relative_tolerance.is_finite() {
        return Err(Error::InvalidTolerance(relative_tolerance));
    }
    let tolerance = relative_tolerance * dec.spectral_range();
    let coeffs = dec.coefficients(state)?;
    let [ce, co] = &coeffs;
    let mut paired = [vec![false; ce.len()], vec![false; co.len()]];
    let mut blocks = Vec::with_capacity(ce.len() + co.len());
    for d in dec.doublets().iter().filter(|d| d.splitting <= tolerance) {
        paired[0][d.even] = true;
        paired[1][d.odd] = true;
        blocks.push(Block::Doublet {
            even: d.even,
            odd: d.odd,
            population_even: ce[d.even].norm_sqr(),
            population_odd: co[d.odd].norm_sqr(),
            coherence: ce[d.even] * co[d.odd].conj(),
        });
    }
    for parity in Parity::BOTH {
        let p = parity.offset();
        for (level, c) in coeffs[p].iter().enumerate() {
            if !paired[p][level] {
                blocks.push(Block::Single {
                    parity,
                    level,
                    population: c.norm_sqr(),
                });
            }
        }
    }
    Ok(EquilibriumEnsemble {
        lambda: dec.lambda(),
        tolerance,
        blocks,
    })
}

/// `-Tr ρ ln ρ` in nats.
pub fn von_neumann_entropy(ens: &EquilibriumEnsemble) -> f64 {
    -ens.eigenvalues()
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// `S(Λ₁) - S(Λ₀)` between the relaxed initial and post-forward states.
pub fn delta_entropy(
    initial: &StateVector,
    dec0: &SpectralDecomposition,
    post_forward: &StateVector,
    dec1: &SpectralDecomposition,
    relative_tolerance: f64,
) -> Result<f64> {
    let s0 = von_neumann_entropy(&build_equilibrium(initial, dec0, relative_tolerance)?);
    let s1 = von_neumann_entropy(&build_equilibrium(post_forward, dec1, relative_tolerance)?);
    Ok(s1 - s0)
}

/// Entropy of the ensemble at each relative degeneracy tolerance.
pub fn tolerance_sensitivity(
    state: &StateVector,
    dec: &SpectralDecomposition,
    tolerances: &[f64],
) -> Result<Vec<(f64, f64)>> {
    tolerances
        .iter()
        .map(|&t| Ok((t, von_neumann_entropy(&build_equilibrium(state, dec, t)?))))
        .collect()
}

/// Diagonal of `ρ_eq` in the `J_x` eigenbasis.
pub fn ensemble_jx_distribution(
    ens: &EquilibriumEnsemble,
    dec: &SpectralDecomposition,
    jx: &JxBasis,
) -> Result<Distribution> {
    check_same(jx.basis(), dec.basis())?;
    let n = jx.dim();
    // ⟨j|E_i,π⟩ for each eigenvector that carries weight
    let overlap = |parity: Parity, level: usize| -> Vec<f64> {
        let v = dec.sector(parity).vector(level);
        let off = parity.offset();
        (0..n)
            .map(|j| {
                let u = jx.vector(j);
                v.iter().enumerate().map(|(s, &x)| u[off + 2 * s] * x).sum()
            })
            .collect()
    };
    let contributions: Vec<Vec<f64>> = ens
        .blocks
        .par_iter()
        .filter(|b| b.trace() > 1e-30)
        .map(|block| match *block {
            Block::Single {
                parity,
                level,
                population,
            } => overlap(parity, level)
                .into_iter()
                .map(|a| population * a * a)
                .collect(),
            Block::Doublet {
                even,
                odd,
                population_even,
                population_odd,
                coherence,
            } => {
                let a = overlap(Parity::Even, even);
                let b = overlap(Parity::Odd, odd);
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| {
                        population_even * x * x + population_odd * y * y + 2.0 * coherence.re * x * y
                    })
                    .collect()
            }
        })
        .collect();
    let mut probs = vec![0.0; n];
    for c in contributions {
        for (p, x) in probs.iter_mut().zip(c) {
            *p += x;
        }
    }
    // clip roundoff below zero
    for p in &mut probs {
        if *p < 0.0 && *p > -1e-14 {
            *p = 0.0;
        }
    }
    jx.distribution_from_probabilities(probs)
}

/// `(1/T) Σ_k ρ(k·dt)·dt` by explicit step-by-step evolution under
/// constant `H(Λ)`. Only for `dim ≤ 200`.
pub fn finite_time_average_oracle(
    state: &StateVector,
    lambda: f64,
    total: f64,
    dt: f64,
) -> Result<DMatrix<Complex64>> {
    let basis = state.basis();
    let n = basis.dim();
    if n > ORACLE_DIM_LIMIT {
        return Err(Error::DimensionGuard {
            dim: n,
            limit: ORACLE_DIM_LIMIT,
        });
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Domain(format!("averaging time must be positive, got {total}")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidStep(dt));
    }
    let params = HamiltonianParams::new(basis, lambda)?;
    let blocks = Parity::BOTH.map(|p| sector_hamiltonian(basis, p, params.field()));
    let steps = (total / dt).round().max(1.0) as usize;
    let h = total / steps as f64;

    // one-step propagator, built column by column with Chebyshev exponentials
    let mut ws = Workspace::default();
    let mut u = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (parity, block) in Parity::BOTH.iter().zip(&blocks) {
        let off = parity.offset();
        let m = block.dim();
        for col in 0..m {
            let mut v = vec![Complex64::new(0.0, 0.0); m];
            v[col] = Complex64::new(1.0, 0.0);
            chebyshev::apply_exp(block, h, &mut v, &mut ws);
            for (row, x) in v.into_iter().enumerate() {
                u[(off + 2 * row, off + 2 * col)] = x;
            }
        }
    }

    let mut psi = nalgebra::DVector::from_column_slice(state.amplitudes());
    let mut rho = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for _ in 0..steps {
        rho.gerc(Complex64::new(1.0, 0.0), &psi, &psi, Complex64::new(1.0, 0.0));
        psi = &u * &psi;
    }
    Ok(rho / Complex64::new(steps as f64, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eigensolve;
    use crate::spin::{spin_coherent_state, SpinBasis};

    const LN2: f64 = std::f64::consts::LN_2;

    fn dec(two_j: u32, lambda: f64) -> SpectralDecomposition {
        eigensolve(&HamiltonianParams::new(SpinBasis::from_two_j(two_j), lambda).unwrap()).unwrap()
    }

    fn doublet_superposition(d: &SpectralDecomposition, rank: usize) -> StateVector {
        let pair = d.doublets()[rank];
        let mut coeffs = [
            vec![Complex64::new(0.0, 0.0); d.sector(Parity::Even).dim()],
            vec![Complex64::new(0.0, 0.0); d.sector(Parity::Odd).dim()],
        ];
        coeffs[0][pair.even] = Complex64::new(0.5f64.sqrt(), 0.0);
        coeffs[1][pair.odd] = Complex64::new(0.5f64.sqrt(), 0.0);
        d.synthesize(&coeffs)
    }

    #[test]
    fn eigenstate_is_pure() {
        let d = dec(16, 3.0);
        let ens = build_equilibrium(&d.eigenstate(Parity::Even, 4), &d, 1e-8).unwrap();
        assert!(von_neumann_entropy(&ens).abs() < 1e-12);
        assert!(ens.is_pure(1e-12));
    }

    #[test]
    fn degenerate_superposition_stays_pure() {
        let d = dec(40, 3.5);
        assert!(d.doublets()[0].splitting < 1e-8 * d.spectral_range());
        let psi = doublet_superposition(&d, 0);
        let ens = build_equilibrium(&psi, &d, 1e-8).unwrap();
        assert_eq!(ens.doublet_blocks() >= 1, true);
        assert!(von_neumann_entropy(&ens).abs() < 1e-10);
    }

    #[test]
    fn split_superposition_dephases() {
        let d = dec(40, 0.5);
        let psi = doublet_superposition(&d, 0);
        let ens = build_equilibrium(&psi, &d, 1e-8).unwrap();
        assert_eq!(ens.doublet_blocks(), 0);
        assert!((von_neumann_entropy(&ens) - LN2).abs() < 1e-10);
    }

    #[test]
    fn entropy_of_equal_populations() {
        for k in [2usize, 5] {
            let ens = EquilibriumEnsemble {
                lambda: 1.0,
                tolerance: 0.0,
                blocks: (0..k)
                    .map(|level| Block::Single {
                        parity: Parity::Even,
                        level,
                        population: 1.0 / k as f64,
                    })
                    .collect(),
            };
            assert!((von_neumann_entropy(&ens) - (k as f64).ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn negative_tolerance_rejected() {
        let d = dec(4, 1.0);
        let psi = d.eigenstate(Parity::Even, 0);
        assert!(matches!(
            build_equilibrium(&psi, &d, -1.0),
            Err(Error::InvalidTolerance(_))
        ));
    }

    #[test]
    fn trace_is_one() {
        let d = dec(30, 3.5);
        let psi = spin_coherent_state(d.basis(), 0.5).unwrap();
        let ens = build_equilibrium(&psi, &d, 1e-8).unwrap();
        assert!((ens.trace() - 1.0).abs() < 1e-10);
        assert!(ens.eigenvalues().iter().all(|&p| p > -1e-15));
    }

    #[test]
    fn null_quench_delta_entropy_is_zero() {
        let d = dec(30, 2.0);
        let psi = spin_coherent_state(d.basis(), 0.5).unwrap();
        let ds = delta_entropy(&psi, &d, &psi, &d, 1e-8).unwrap();
        assert!(ds.abs() < 1e-12);
    }

    #[test]
    fn sensitivity_is_monotone_in_tolerance() {
        let d = dec(30, 3.5);
        let psi = spin_coherent_state(d.basis(), 0.5).unwrap();
        let rows = tolerance_sensitivity(&psi, &d, &[0.0, 1e-12, 1e-8, 1e-4]).unwrap();
        assert!(rows.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
    }

    #[test]
    fn dense_matrix_matches_blocks() {
        let d = dec(10, 3.0);
        let psi = spin_coherent_state(d.basis(), 0.5).unwrap();
        let ens = build_equilibrium(&psi, &d, 1e-8).unwrap();
        let rho = ens.to_dense(&d);
        let tr: Complex64 = rho.trace();
        assert!((tr.re - 1.0).abs() < 1e-12 && tr.im.abs() < 1e-14);
        assert!((&rho - rho.adjoint()).norm() < 1e-14);
    }

    #[test]
    fn oracle_rejects_large_dimension() {
        let basis = SpinBasis::from_two_j(400);
        let psi = spin_coherent_state(basis, 0.5).unwrap();
        assert!(matches!(
            finite_time_average_oracle(&psi, 1.5, 1.0, 0.1),
            Err(Error::DimensionGuard { .. })
        ));
    }

    #[test]
    fn oracle_on_eigenstate_is_projector() {
        let d = dec(8, 1.5);
        let psi = d.eigenstate(Parity::Odd, 2);
        let rho = finite_time_average_oracle(&psi, 1.5, 50.0, 0.05).unwrap();
        let want = build_equilibrium(&psi, &d, 1e-8).unwrap().to_dense(&d);
        assert!((rho - want).norm() < 1e-9);
    }
}
