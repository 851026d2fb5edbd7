//! Hamiltonian assembly, parity blocks, spectra and the gap scan.
//!
//! `H(Λ) = J_x² - (2J/Λ) J_z`. Because `J_x²` only couples `m ↔ m±2`, each
//! parity block is a symmetric tridiagonal matrix of half the dimension.

use rayon::prelude::*;

use crate::spin::{build_jx2, build_jz, CollectiveOperator, Parity, SpinBasis, StateVector};
use crate::tridiag::SymTridiagonal;
use crate::{Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianParams {
    basis: SpinBasis,
    lambda: f64,
}

impl HamiltonianParams {
    pub fn new(basis: SpinBasis, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { basis, lambda })
    }

    pub fn basis(&self) -> SpinBasis {
        self.basis
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Coefficient of `-J_z`, `Ω/χ = 2J/Λ`.
    pub fn field(&self) -> f64 {
        field(self.basis, self.lambda)
    }
}

pub(crate) fn field(basis: SpinBasis, lambda: f64) -> f64 {
    2.0 * basis.j() / lambda
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidLambda(lambda));
    }
    Ok(())
}

pub fn assemble_hamiltonian(params: &HamiltonianParams) -> CollectiveOperator {
    build_jz(params.basis).scaled_sum(-params.field(), &build_jx2(params.basis))
}

/// `E_c = 2J²/Λ`.
pub fn critical_energy(params: &HamiltonianParams) -> f64 {
    let j = params.basis.j();
    2.0 * j * j / params.lambda
}

/// Tridiagonal block of `J_x² - g J_z` on one parity sector.
pub fn sector_hamiltonian(basis: SpinBasis, parity: Parity, field: f64) -> SymTridiagonal {
    let ops = SectorOperators::new(basis, parity);
    ops.hamiltonian(field)
}

/// The `J_x²` and `J_z` pieces of a parity block, kept apart so that
/// `H(Λ)` can be formed for any field without touching square roots.
#[derive(Debug, Clone)]
pub struct SectorOperators {
    pub parity: Parity,
    pub jx2_diag: Vec<f64>,
    pub jx2_off: Vec<f64>,
    pub m: Vec<f64>,
}

impl SectorOperators {
    pub fn new(basis: SpinBasis, parity: Parity) -> Self {
        let jx2 = build_jx2(basis);
        let idx: Vec<usize> = basis.sector_indices(parity).collect();
        let diag = jx2.band(0).expect("diagonal");
        let second = jx2.band(2).unwrap_or(&[]);
        Self {
            parity,
            jx2_diag: idx.iter().map(|&k| diag[k]).collect(),
            jx2_off: idx.iter().skip(1).map(|&k| second[k - 2]).collect(),
            m: idx.iter().map(|&k| basis.m(k)).collect(),
        }
    }

    pub fn hamiltonian(&self, field: f64) -> SymTridiagonal {
        let diag = self
            .jx2_diag
            .iter()
            .zip(&self.m)
            .map(|(a, m)| a - field * m)
            .collect();
        SymTridiagonal::new(diag, self.jx2_off.clone())
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }
}

/// Even and odd blocks of a parity-conserving operator.
#[derive(Debug, Clone)]
pub struct ParityBlocks {
    pub basis: SpinBasis,
    pub even: SymTridiagonal,
    pub odd: SymTridiagonal,
}

impl ParityBlocks {
    pub fn block(&self, parity: Parity) -> &SymTridiagonal {
        match parity {
            Parity::Even => &self.even,
            Parity::Odd => &self.odd,
        }
    }

    pub fn reassemble(&self) -> CollectiveOperator {
        let n = self.basis.dim();
        let mut diag = vec![0.0; n];
        let first = vec![0.0; n.saturating_sub(1)];
        let mut second = vec![0.0; n.saturating_sub(2)];
        for parity in Parity::BOTH {
            let block = self.block(parity);
            for (s, k) in self.basis.sector_indices(parity).enumerate() {
                diag[k] = block.diag[s];
                if s + 1 < block.dim() {
                    second[k] = block.off[s];
                }
            }
        }
        CollectiveOperator::from_bands(self.basis, vec![diag, first, second])
            .expect("band lengths follow the basis")
    }
}

pub fn parity_blocks(h: &CollectiveOperator) -> Result<ParityBlocks> {
    let basis = h.basis();
    let n = basis.dim();
    for i in 0..n {
        for j in i + 1..=(i + h.bandwidth()).min(n - 1) {
            if (j - i) % 2 == 1 && h.get(i, j) != 0.0 {
                return Err(Error::NotParityBlockDiagonal { row: i, col: j });
            }
            if j - i > 2 && h.get(i, j) != 0.0 {
                return Err(Error::Domain(format!(
                    "coupling between {i} and {j} exceeds the tridiagonal block structure"
                )));
            }
        }
    }
    let block = |parity: Parity| {
        let idx: Vec<usize> = basis.sector_indices(parity).collect();
        let diag = idx.iter().map(|&k| h.get(k, k)).collect();
        let off = idx.windows(2).map(|w| h.get(w[0], w[1])).collect();
        SymTridiagonal::new(diag, off)
    };
    Ok(ParityBlocks {
        basis,
        even: block(Parity::Even),
        odd: block(Parity::Odd),
    })
}

/// Eigenpairs of one parity block, ascending in energy.
#[derive(Debug, Clone)]
pub struct Sector {
    pub parity: Parity,
    pub energies: Vec<f64>,
    /// Column-major, `dim × dim`, components over the sector's basis indices.
    pub vectors: Vec<f64>,
}

impl Sector {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.vectors[i * n..(i + 1) * n]
    }

    /// `⟨E_i|ψ⟩` for all `i`, from the sector components of `amps`.
    pub fn project(&self, amps: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let off = self.parity.offset();
        (0..n)
            .map(|i| {
                self.vector(i)
                    .iter()
                    .enumerate()
                    .map(|(s, &v)| amps[off + 2 * s] * v)
                    .sum()
            })
            .collect()
    }

    /// Writes `Σ_i c_i |E_i⟩` into the sector slots of `amps`.
    pub fn expand_into(&self, coeffs: &[Complex64], amps: &mut [Complex64]) {
        let n = self.dim();
        let off = self.parity.offset();
        for s in 0..n {
            amps[off + 2 * s] = Complex64::new(0.0, 0.0);
        }
        for (i, c) in coeffs.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            for (s, &v) in self.vector(i).iter().enumerate() {
                amps[off + 2 * s] += c * v;
            }
        }
    }
}

/// Opposite-parity pair matched by rank from the top of the spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Doublet {
    pub even: usize,
    pub odd: usize,
    pub splitting: f64,
    /// Both members lie above `E_c`.
    pub above_critical: bool,
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    params: HamiltonianParams,
    sectors: [Sector; 2],
    doublets: Vec<Doublet>,
}

impl SpectralDecomposition {
    /// Assembles a decomposition from per-sector eigenpairs and derives the
    /// doublet pairing.
    pub fn from_sectors(params: HamiltonianParams, even: Sector, odd: Sector) -> Result<Self> {
        let basis = params.basis;
        for s in [&even, &odd] {
            let want = basis.sector_dim(s.parity);
            if s.dim() != want || s.vectors.len() != want * want {
                return Err(Error::BasisMismatch {
                    expected: want,
                    found: s.dim(),
                });
            }
        }
        let ec = critical_energy(&params);
        let pairs = even.dim().min(odd.dim());
        let doublets = (0..pairs)
            .map(|r| {
                let i = even.dim() - 1 - r;
                let j = odd.dim() - 1 - r;
                let (a, b) = (even.energies[i], odd.energies[j]);
                Doublet {
                    even: i,
                    odd: j,
                    splitting: (a - b).abs(),
                    above_critical: a > ec && b > ec,
                }
            })
            .collect();
        Ok(Self {
            params,
            sectors: [even, odd],
            doublets,
        })
    }

    pub fn params(&self) -> &HamiltonianParams {
        &self.params
    }

    pub fn basis(&self) -> SpinBasis {
        self.params.basis
    }

    pub fn lambda(&self) -> f64 {
        self.params.lambda
    }

    pub fn critical_energy(&self) -> f64 {
        critical_energy(&self.params)
    }

    pub fn sector(&self, parity: Parity) -> &Sector {
        &self.sectors[parity.offset()]
    }

    pub fn doublets(&self) -> &[Doublet] {
        &self.doublets
    }

    pub fn ground_energy(&self) -> f64 {
        self.sectors
            .iter()
            .filter_map(|s| s.energies.first().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn top_energy(&self) -> f64 {
        self.sectors
            .iter()
            .filter_map(|s| s.energies.last().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn spectral_range(&self) -> f64 {
        self.top_energy() - self.ground_energy()
    }

    /// Eigenbasis coefficients `C_{i,π} = ⟨E_i,π|Ψ⟩`, indexed by parity offset.
    pub fn coefficients(&self, state: &StateVector) -> Result<[Vec<Complex64>; 2]> {
        crate::spin::check_same(self.basis(), state.basis())?;
        let amps = state.amplitudes();
        Ok([self.sectors[0].project(amps), self.sectors[1].project(amps)])
    }

    /// Rebuilds a state from eigenbasis coefficients.
    pub fn synthesize(&self, coeffs: &[Vec<Complex64>; 2]) -> StateVector {
        let mut amps = vec![Complex64::new(0.0, 0.0); self.basis().dim()];
        for (sector, c) in self.sectors.iter().zip(coeffs) {
            sector.expand_into(c, &mut amps);
        }
        StateVector::from_raw(self.basis(), amps)
    }

    /// Eigenvector `|E_i,π⟩` embedded in the full basis.
    pub fn eigenstate(&self, parity: Parity, i: usize) -> StateVector {
        let mut coeffs = [
            vec![Complex64::new(0.0, 0.0); self.sectors[0].dim()],
            vec![Complex64::new(0.0, 0.0); self.sectors[1].dim()],
        ];
        coeffs[parity.offset()][i] = Complex64::new(1.0, 0.0);
        self.synthesize(&coeffs)
    }

    /// Largest `‖Hv - Ev‖` over all eigenpairs.
    pub fn max_residual(&self) -> f64 {
        let ops = [
            sector_hamiltonian(self.basis(), Parity::Even, self.params.field()),
            sector_hamiltonian(self.basis(), Parity::Odd, self.params.field()),
        ];
        let mut worst: f64 = 0.0;
        for (h, sector) in ops.iter().zip(&self.sectors) {
            let n = sector.dim();
            let mut y = vec![Complex64::new(0.0, 0.0); n];
            for i in 0..n {
                let v: Vec<Complex64> =
                    sector.vector(i).iter().map(|&x| Complex64::new(x, 0.0)).collect();
                h.apply_into(&v, &mut y);
                let e = sector.energies[i];
                let r = y
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b * e).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(r);
            }
        }
        worst
    }
}

pub fn eigensolve(params: &HamiltonianParams) -> Result<SpectralDecomposition> {
    let solve = |parity: Parity| -> Result<Sector> {
        let h = sector_hamiltonian(params.basis, parity, params.field());
        let eig = h.eigen().map_err(|e| Error::NoConvergence {
            parity: Some(parity),
            index: e.index,
        })?;
        Ok(Sector {
            parity,
            energies: eig.values,
            vectors: eig.vectors.expect("vectors requested"),
        })
    };
    let (even, odd) = rayon::join(|| solve(Parity::Even), || solve(Parity::Odd));
    SpectralDecomposition::from_sectors(*params, even?, odd?)
}

/// Sector eigenvalues only.
pub fn sector_energies(basis: SpinBasis, lambda: f64) -> Result<[Vec<f64>; 2]> {
    check_lambda(lambda)?;
    let g = field(basis, lambda);
    let solve = |parity: Parity| {
        sector_hamiltonian(basis, parity, g)
            .eigenvalues()
            .map_err(|e| Error::NoConvergence {
                parity: Some(parity),
                index: e.index,
            })
    };
    Ok([solve(Parity::Even)?, solve(Parity::Odd)?])
}

/// Where the smallest same-parity gap was found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapLocation {
    /// Upper level `i` of the pair `(i-1, i)`.
    pub level: usize,
    pub parity: Parity,
    pub lambda: f64,
}

/// Same-parity gaps `ε_i^±(Λ) = E_{i,±} - E_{i-1,±}` on a Λ grid.
#[derive(Debug, Clone)]
pub struct GapScanResult {
    /// Grid in ascending order; refinement points are merged in.
    pub lambdas: Vec<f64>,
    /// `gaps[g][π][i-1]` at `lambdas[g]`.
    pub gaps: Vec<[Vec<f64>; 2]>,
    /// `Δ_i^± = min_Λ ε_i^±`, indexed like `gaps`.
    pub level_minima: [Vec<f64>; 2],
    pub delta_eff: f64,
    pub tau_s: f64,
    pub argmin: GapLocation,
}

impl GapScanResult {
    /// Smallest gap at each grid point, both sectors.
    pub fn min_gap_per_lambda(&self) -> Vec<f64> {
        self.gaps
            .iter()
            .map(|g| g.iter().flatten().copied().fold(f64::INFINITY, f64::min))
            .collect()
    }

    fn from_rows(lambdas: Vec<f64>, gaps: Vec<[Vec<f64>; 2]>) -> Self {
        let mut level_minima = [
            vec![f64::INFINITY; gaps[0][0].len()],
            vec![f64::INFINITY; gaps[0][1].len()],
        ];
        let mut best = (f64::INFINITY, 0, Parity::Even, lambdas[0]);
        for (row, &lambda) in gaps.iter().zip(&lambdas) {
            for parity in Parity::BOTH {
                let p = parity.offset();
                for (i, &g) in row[p].iter().enumerate() {
                    if g < level_minima[p][i] {
                        level_minima[p][i] = g;
                    }
                    if g < best.0 {
                        best = (g, i + 1, parity, lambda);
                    }
                }
            }
        }
        Self {
            lambdas,
            gaps,
            level_minima,
            delta_eff: best.0,
            tau_s: 1.0 / best.0,
            argmin: GapLocation {
                level: best.1,
                parity: best.2,
                lambda: best.3,
            },
        }
    }
}

fn gap_row(basis: SpinBasis, lambda: f64) -> Result<[Vec<f64>; 2]> {
    let [even, odd] = sector_energies(basis, lambda)?;
    let diffs = |e: Vec<f64>| e.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    Ok([diffs(even), diffs(odd)])
}

/// Uniform gap scan over `[lambda_lo, lambda_hi]` with `grid_points` nodes.
pub fn gap_scan(
    basis: SpinBasis,
    lambda_lo: f64,
    lambda_hi: f64,
    grid_points: usize,
) -> Result<GapScanResult> {
    check_lambda(lambda_lo)?;
    check_lambda(lambda_hi)?;
    if !(lambda_lo < lambda_hi) {
        return Err(Error::Domain(format!(
            "gap scan needs lambda_lo < lambda_hi, got [{lambda_lo}, {lambda_hi}]"
        )));
    }
    if grid_points < 2 {
        return Err(Error::Domain("gap scan needs at least two grid points".into()));
    }
    if basis.dim() < 4 {
        return Err(Error::Domain(
            "gap scan needs at least two levels per parity sector".into(),
        ));
    }
    let step = (lambda_hi - lambda_lo) / (grid_points - 1) as f64;
    let lambdas: Vec<f64> = (0..grid_points)
        .map(|g| {
            if g + 1 == grid_points {
                lambda_hi
            } else {
                lambda_lo + step * g as f64
            }
        })
        .collect();
    let gaps = lambdas
        .par_iter()
        .map(|&l| gap_row(basis, l))
        .collect::<Result<Vec<_>>>()?;
    Ok(GapScanResult::from_rows(lambdas, gaps))
}

/// Bisection refinement around the argmin of a scan.
///
/// Each pass probes the two points half-way to the current neighbours and
/// halves the bracket; the refined points are merged into the grid, so the
/// refined `Δ_eff` never exceeds the input.
pub fn refine_gap_scan(
    basis: SpinBasis,
    scan: &GapScanResult,
    passes: usize,
) -> Result<GapScanResult> {
    let lo = scan.lambdas[0];
    let hi = *scan.lambdas.last().expect("non-empty grid");
    let pos = scan
        .lambdas
        .iter()
        .position(|&l| l == scan.argmin.lambda)
        .unwrap_or(0);
    let mut half = {
        let left = if pos > 0 { scan.argmin.lambda - scan.lambdas[pos - 1] } else { 0.0 };
        let right = scan
            .lambdas
            .get(pos + 1)
            .map_or(0.0, |&r| r - scan.argmin.lambda);
        0.5 * left.max(right)
    };
    let mut rows: Vec<(f64, [Vec<f64>; 2])> = scan
        .lambdas
        .iter()
        .copied()
        .zip(scan.gaps.iter().cloned())
        .collect();
    let mut center = scan.argmin.lambda;
    let mut center_gap = scan.delta_eff;
    for _ in 0..passes {
        if half <= 0.0 {
            break;
        }
        let probes: Vec<f64> = [center - half, center + half]
            .into_iter()
            .filter(|&l| l > lo && l < hi)
            .collect();
        let probed = probes
            .par_iter()
            .map(|&l| gap_row(basis, l).map(|g| (l, g)))
            .collect::<Result<Vec<_>>>()?;
        for (l, g) in probed {
            let m = g.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            if m < center_gap {
                center_gap = m;
                center = l;
            }
            rows.push((l, g));
        }
        half *= 0.5;
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    rows.dedup_by(|a, b| a.0 == b.0);
    let (lambdas, gaps) = rows.into_iter().unzip();
    Ok(GapScanResult::from_rows(lambdas, gaps))
}
