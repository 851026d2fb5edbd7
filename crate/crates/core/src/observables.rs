//! Measurement distributions, information measures and derived cycle
//! observables.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{CycleRecord, SegmentKind};
use crate::spectral::SpectralDecomposition;
use crate::spin::{build_jx, check_same, Parity, SpinBasis, StateVector};
use crate::tridiag::SymTridiagonal;
use crate::{Complex64, Error, Result};

/// Tolerance on `Σp = 1` accepted when building a distribution.
pub const SUM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observable {
    Energy,
    Jx,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// Eigenvalue of the measured observable.
    pub value: f64,
    /// Parity sector for energy outcomes.
    pub parity: Option<Parity>,
    /// Level index within the sector, or position in the J_x ladder.
    pub level: usize,
    pub probability: f64,
}

impl Outcome {
    fn label(&self) -> (Option<Parity>, usize) {
        (self.parity, self.level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub observable: Observable,
    pub outcomes: Vec<Outcome>,
}

impl Distribution {
    pub fn new(observable: Observable, outcomes: Vec<Outcome>) -> Result<Self> {
        if let Some(o) = outcomes
            .iter()
            .find(|o| !(o.probability >= 0.0) || !o.value.is_finite())
        {
            return Err(Error::Domain(format!(
                "invalid outcome probability {} at value {}",
                o.probability, o.value
            )));
        }
        let dist = Self {
            observable,
            outcomes,
        };
        let total = dist.total();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Domain(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(dist)
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.outcomes.iter().map(|o| o.probability).sum()
    }

    pub fn mean(&self) -> f64 {
        self.outcomes.iter().map(|o| o.value * o.probability).sum()
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.outcomes.iter().map(|o| o.probability)
    }

    /// Outcomes sorted by eigenvalue.
    pub fn sorted_by_value(&self) -> Vec<Outcome> {
        let mut v = self.outcomes.clone();
        v.sort_by(|a, b| a.value.total_cmp(&b.value));
        v
    }

    fn same_labels(&self, other: &Distribution) -> bool {
        self.observable == other.observable
            && self.outcomes.len() == other.outcomes.len()
            && self
                .outcomes
                .iter()
                .zip(&other.outcomes)
                .all(|(a, b)| a.label() == b.label())
    }
}

/// `|⟨E_{i,π}|Ψ⟩|²` over both parity sectors, even levels first.
pub fn energy_distribution(state: &StateVector, dec: &SpectralDecomposition) -> Result<Distribution> {
    let coeffs = dec.coefficients(state)?;
    let mut outcomes = Vec::with_capacity(state.basis().dim());
    for parity in Parity::BOTH {
        let sector = dec.sector(parity);
        let c = &coeffs[parity.offset()];
        outcomes.extend(sector.energies.iter().zip(c).enumerate().map(|(i, (&e, c))| Outcome {
            value: e,
            parity: Some(parity),
            level: i,
            probability: c.norm_sqr(),
        }));
    }
    Distribution::new(Observable::Energy, outcomes)
}

/// Eigenbasis of `J_x` in the `m` basis.
#[derive(Debug, Clone)]
pub struct JxBasis {
    basis: SpinBasis,
    /// Exact ladder values `-J, -J+1, …, J`.
    pub values: Vec<f64>,
    /// Computed eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Column-major `dim × dim` eigenvectors.
    pub vectors: Vec<f64>,
}

impl JxBasis {
    pub fn new(basis: SpinBasis) -> Result<Self> {
        let jx = build_jx(basis);
        let n = basis.dim();
        let off = jx.band(1).map(<[f64]>::to_vec).unwrap_or_default();
        let eig = SymTridiagonal::new(vec![0.0; n], off)
            .eigen()
            .map_err(|e| Error::NoConvergence {
                parity: None,
                index: e.index,
            })?;
        let values = (0..n).map(|k| basis.m(k)).collect();
        Ok(Self {
            basis,
            values,
            eigenvalues: eig.values,
            vectors: eig.vectors.expect("vectors requested"),
        })
    }

    /// Process-wide shared instance per `2J`.
    pub fn shared(basis: SpinBasis) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<u32, Arc<JxBasis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(hit) = cache.lock().expect("jx cache").get(&basis.two_j()) {
            return Ok(Arc::clone(hit));
        }
        let fresh = Arc::new(Self::new(basis)?);
        let mut map = cache.lock().expect("jx cache");
        Ok(Arc::clone(map.entry(basis.two_j()).or_insert(fresh)))
    }

    pub fn basis(&self) -> SpinBasis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        let n = self.dim();
        &self.vectors[j * n..(j + 1) * n]
    }

    /// `⟨j_x|Ψ⟩` for every ladder state.
    pub fn project(&self, amps: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim())
            .into_par_iter()
            .map(|j| {
                self.vector(j)
                    .iter()
                    .zip(amps)
                    .map(|(u, a)| a * u)
                    .sum()
            })
            .collect()
    }

    pub fn distribution_from_probabilities(&self, probs: Vec<f64>) -> Result<Distribution> {
        let outcomes = probs
            .into_iter()
            .enumerate()
            .map(|(j, p)| Outcome {
                value: self.values[j],
                parity: None,
                level: j,
                probability: p,
            })
            .collect();
        Distribution::new(Observable::Jx, outcomes)
    }
}

/// `|⟨J, j_x|Ψ⟩|²` over `j_x = -J … J`.
pub fn jx_distribution(state: &StateVector, jx: &JxBasis) -> Result<Distribution> {
    check_same(jx.basis(), state.basis())?;
    let probs = jx
        .project(state.amplitudes())
        .iter()
        .map(|c| c.norm_sqr())
        .collect();
    jx.distribution_from_probabilities(probs)
}

/// `-Σ p ln p` in nats.
pub fn shannon_information(dist: &Distribution) -> f64 {
    -dist
        .probabilities()
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// `I(after) - I(before)`.
pub fn delta_information(before: &Distribution, after: &Distribution) -> Result<f64> {
    if before.observable != after.observable {
        return Err(Error::ObservableMismatch);
    }
    Ok(shannon_information(after) - shannon_information(before))
}

/// `½ Σ |p_n - q_n|` over matching outcome labels.
pub fn total_variation(a: &Distribution, b: &Distribution) -> Result<f64> {
    if !a.same_labels(b) {
        return Err(Error::ObservableMismatch);
    }
    Ok(0.5
        * a.probabilities()
            .zip(b.probabilities())
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>())
}

/// Probability mass on `value < 0`, `value = 0` and `value > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchMasses {
    pub negative: f64,
    pub zero: f64,
    pub positive: f64,
}

impl BranchMasses {
    pub fn is_bimodal(&self, min_mass: f64) -> bool {
        self.negative >= min_mass && self.positive >= min_mass
    }
}

pub fn branch_masses(dist: &Distribution) -> BranchMasses {
    let mut out = BranchMasses {
        negative: 0.0,
        zero: 0.0,
        positive: 0.0,
    };
    for o in &dist.outcomes {
        if o.value < -0.25 {
            out.negative += o.probability;
        } else if o.value > 0.25 {
            out.positive += o.probability;
        } else {
            out.zero += o.probability;
        }
    }
    out
}

pub fn energy_expectation(state: &StateVector, dec: &SpectralDecomposition) -> Result<f64> {
    Ok(energy_distribution(state, dec)?.mean())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dissipation {
    pub initial: f64,
    pub r#final: f64,
    pub dissipated: f64,
    /// `|E_dis| / |E_initial|`.
    pub ratio: f64,
}

/// `⟨H(Λ₀)⟩` after the last plateau minus after the first one.
pub fn dissipated_energy(cycle: &CycleRecord, dec: &SpectralDecomposition) -> Result<Dissipation> {
    if !cycle.is_complete() {
        return Err(Error::IncompleteCycle(format!(
            "{} of 5 segments recorded",
            cycle.segments.len()
        )));
    }
    let lambda0 = cycle.schedule.lambda0();
    if (dec.lambda() - lambda0).abs() > 1e-12 * lambda0 {
        return Err(Error::Domain(format!(
            "decomposition at Λ = {} but the cycle starts at Λ₀ = {lambda0}",
            dec.lambda()
        )));
    }
    let initial = energy_expectation(cycle.boundary_state(SegmentKind::InitialRelaxation)?, dec)?;
    let r#final = energy_expectation(cycle.final_state()?, dec)?;
    let dissipated = r#final - initial;
    Ok(Dissipation {
        initial,
        r#final,
        dissipated,
        ratio: dissipated.abs() / initial.abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeAverage {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl TimeAverage {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

/// Trapezoidal mean and extrema of the samples with `t` in `window`.
pub fn time_average(series: &[(f64, f64)], window: (f64, f64)) -> Result<TimeAverage> {
    let (a, b) = window;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= a && t <= b)
        .collect();
    if pts.is_empty() || !(a <= b) {
        return Err(Error::EmptyWindow(a, b));
    }
    let min = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let span = pts[pts.len() - 1].0 - pts[0].0;
    let mean = if span > 0.0 {
        pts.windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum::<f64>()
            / span
    } else {
        pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64
    };
    Ok(TimeAverage {
        mean,
        min,
        max,
        count: pts.len(),
    })
}

/// Spread of time-averaged means over several runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
    pub runs: usize,
}

impl Band {
    pub fn from_means(means: &[f64]) -> Option<Self> {
        if means.is_empty() {
            return None;
        }
        Some(Self {
            lower: means.iter().copied().fold(f64::INFINITY, f64::min),
            upper: means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            runs: means.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eigensolve, HamiltonianParams};
    use crate::spin::{coherent_state, jx_expectation, parity_apply, spin_coherent_state};

    fn dist(ps: &[f64]) -> Distribution {
        let outcomes = ps
            .iter()
            .enumerate()
            .map(|(i, &p)| Outcome {
                value: i as f64,
                parity: None,
                level: i,
                probability: p,
            })
            .collect();
        Distribution::new(Observable::Jx, outcomes).unwrap()
    }

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon_information(&dist(&[0.0, 1.0, 0.0])), 0.0);
        assert!((shannon_information(&dist(&[0.5, 0.5])) - 2f64.ln()).abs() < 1e-15);
        for k in [3usize, 7, 20] {
            let d = dist(&vec![1.0 / k as f64; k]);
            assert!((shannon_information(&d) - (k as f64).ln()).abs() < 1e-13);
        }
    }

    #[test]
    fn delta_information_rules() {
        let a = dist(&[0.5, 0.5]);
        assert_eq!(delta_information(&a, &a).unwrap(), 0.0);
        let mut e = a.clone();
        e.observable = Observable::Energy;
        assert!(matches!(delta_information(&a, &e), Err(Error::ObservableMismatch)));
    }

    #[test]
    fn invalid_distributions_rejected() {
        let bad = vec![Outcome {
            value: 0.0,
            parity: None,
            level: 0,
            probability: 0.7,
        }];
        assert!(Distribution::new(Observable::Jx, bad).is_err());
    }

    #[test]
    fn total_variation_basic() {
        let a = dist(&[1.0, 0.0]);
        let b = dist(&[0.0, 1.0]);
        assert_eq!(total_variation(&a, &b).unwrap(), 1.0);
        assert_eq!(total_variation(&a, &a).unwrap(), 0.0);
        assert!(total_variation(&a, &dist(&[0.5, 0.25, 0.25])).is_err());
    }

    #[test]
    fn eigenstate_gives_delta() {
        let basis = SpinBasis::from_two_j(12);
        let dec = eigensolve(&HamiltonianParams::new(basis, 2.0).unwrap()).unwrap();
        let psi = dec.eigenstate(Parity::Odd, 3);
        let d = energy_distribution(&psi, &dec).unwrap();
        let top = d.outcomes.iter().map(|o| o.probability).fold(0.0, f64::max);
        assert!((top - 1.0).abs() < 1e-12);
        assert!(shannon_information(&d) < 1e-10);
    }

    #[test]
    fn parity_conjugate_energy_distributions_agree() {
        let basis = SpinBasis::from_two_j(14);
        let dec = eigensolve(&HamiltonianParams::new(basis, 2.5).unwrap()).unwrap();
        for f in [coherent_state, spin_coherent_state] {
            let a = energy_distribution(&f(basis, 0.5).unwrap(), &dec).unwrap();
            let b = energy_distribution(&f(basis, -0.5).unwrap(), &dec).unwrap();
            assert!(total_variation(&a, &b).unwrap() < 1e-12);
        }
    }

    #[test]
    fn jx_basis_properties() {
        for two_j in [1, 2, 9, 20] {
            let basis = SpinBasis::from_two_j(two_j);
            let jx = JxBasis::new(basis).unwrap();
            for (e, v) in jx.eigenvalues.iter().zip(&jx.values) {
                assert!((e - v).abs() < 1e-9, "{e} vs {v}");
            }
            let n = jx.dim();
            for a in 0..n {
                for b in 0..n {
                    let dot: f64 = jx.vector(a).iter().zip(jx.vector(b)).map(|(x, y)| x * y).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn jx_distribution_examples() {
        let basis = SpinBasis::from_two_j(10);
        let jx = JxBasis::shared(basis).unwrap();
        let low = StateVector::basis_state(basis, 0).unwrap();
        let d = jx_distribution(&low, &jx).unwrap();
        assert!(d.mean().abs() < 1e-12);
        let n = d.len();
        for k in 0..n {
            assert!((d.outcomes[k].probability - d.outcomes[n - 1 - k].probability).abs() < 1e-12);
        }

        let psi = spin_coherent_state(basis, 0.5).unwrap();
        let d = jx_distribution(&psi, &jx).unwrap();
        assert!((d.mean() - jx_expectation(&psi)).abs() < 1e-9);
        let mirrored = jx_distribution(&parity_apply(&psi), &jx).unwrap();
        for k in 0..n {
            let p = d.outcomes[k].probability;
            let q = mirrored.outcomes[n - 1 - k].probability;
            assert!((p - q).abs() < 1e-12);
        }
        assert!(Arc::ptr_eq(&jx, &JxBasis::shared(basis).unwrap()));
    }

    #[test]
    fn branch_masses_split() {
        let basis = SpinBasis::from_two_j(20);
        let jx = JxBasis::new(basis).unwrap();
        let psi = spin_coherent_state(basis, 0.5).unwrap();
        let m = branch_masses(&jx_distribution(&psi, &jx).unwrap());
        assert!(m.positive > 0.9);
        assert!(!m.is_bimodal(0.25));
        assert!((m.negative + m.zero + m.positive - 1.0).abs() < 1e-12);
    }

    #[test]
    fn time_average_examples() {
        let flat: Vec<_> = (0..11).map(|i| (i as f64, 3.0)).collect();
        let avg = time_average(&flat, (0.0, 10.0)).unwrap();
        assert_eq!(avg.mean, 3.0);
        assert_eq!(avg.width(), 0.0);
        let period = std::f64::consts::TAU;
        let n = 4000;
        let wave: Vec<_> = (0..=n)
            .map(|i| {
                let t = 3.0 * period * i as f64 / n as f64;
                (t, t.sin())
            })
            .collect();
        let avg = time_average(&wave, (0.0, 3.0 * period)).unwrap();
        assert!(avg.mean.abs() < 1e-6);
        assert!(matches!(time_average(&wave, (100.0, 200.0)), Err(Error::EmptyWindow(..))));
    }

    #[test]
    fn band_from_means() {
        let b = Band::from_means(&[0.1, -0.3, 0.2]).unwrap();
        assert_eq!((b.lower, b.upper, b.runs), (-0.3, 0.2, 3));
        assert!(Band::from_means(&[]).is_none());
    }
}
