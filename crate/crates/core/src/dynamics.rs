//! The closed Λ(t) cycle and time propagation.
//!
//! The schedule has five segments: a plateau at Λ₀, a linear ramp to Λ₁, a
//! plateau at Λ₁, a linear ramp back to Λ₀ and a final plateau at Λ₀. Every
//! plateau lasts `t_r` and every ramp `τ_q`.
//!
//! Ramps are integrated step by step. The default method is the fourth-order
//! commutator-free Magnus scheme: each step is a product of two exponentials
//! of frozen Hamiltonians built from `H` at the two Gauss nodes, and each
//! exponential is evaluated with a Chebyshev expansion on the tridiagonal
//! parity blocks. Plateaus can instead be advanced exactly by phase rotation
//! in a cached eigenbasis.

use serde::{Deserialize, Serialize};

use crate::cache::DecompositionCache;
use crate::chebyshev::{self, Workspace};
use crate::spectral::{field, HamiltonianParams, SectorOperators, SpectralDecomposition};
use crate::spin::{Parity, SpinBasis, StateVector};
use crate::tridiag::SymTridiagonal;
use crate::{Complex64, Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    InitialRelaxation,
    ForwardRamp,
    IntermediateRelaxation,
    BackwardRamp,
    FinalRelaxation,
}

impl SegmentKind {
    pub const ALL: [SegmentKind; 5] = [
        SegmentKind::InitialRelaxation,
        SegmentKind::ForwardRamp,
        SegmentKind::IntermediateRelaxation,
        SegmentKind::BackwardRamp,
        SegmentKind::FinalRelaxation,
    ];

    pub fn is_plateau(self) -> bool {
        !matches!(self, SegmentKind::ForwardRamp | SegmentKind::BackwardRamp)
    }

    /// Forward for everything up to and including the Λ₁ plateau.
    pub fn is_forward(self) -> bool {
        matches!(
            self,
            SegmentKind::InitialRelaxation
                | SegmentKind::ForwardRamp
                | SegmentKind::IntermediateRelaxation
        )
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            SegmentKind::InitialRelaxation => "relax0",
            SegmentKind::ForwardRamp => "forward",
            SegmentKind::IntermediateRelaxation => "relax1",
            SegmentKind::BackwardRamp => "backward",
            SegmentKind::FinalRelaxation => "relax2",
        }
    }
}

/// Piecewise-linear Λ(t) for the closed cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchSchedule {
    lambda0: f64,
    lambda1: f64,
    t_r: f64,
    tau_q: f64,
}

impl QuenchSchedule {
    pub fn new(lambda0: f64, lambda1: f64, t_r: f64, tau_q: f64) -> Result<Self> {
        for (name, v) in [("lambda0", lambda0), ("lambda1", lambda1)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(t_r >= 0.0) || !t_r.is_finite() {
            return Err(Error::Domain(format!("t_r must be non-negative, got {t_r}")));
        }
        if !(tau_q > 0.0) || !tau_q.is_finite() {
            return Err(Error::Domain(format!("tau_q must be positive, got {tau_q}")));
        }
        Ok(Self {
            lambda0,
            lambda1,
            t_r,
            tau_q,
        })
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn t_r(&self) -> f64 {
        self.t_r
    }

    pub fn tau_q(&self) -> f64 {
        self.tau_q
    }

    pub fn delta_lambda(&self) -> f64 {
        self.lambda1 - self.lambda0
    }

    /// `T = 3 t_r + 2 τ_q`.
    pub fn total_duration(&self) -> f64 {
        3.0 * self.t_r + 2.0 * self.tau_q
    }

    /// Segment boundaries `0 = b₀ < b₁ < … < b₅ = T`.
    pub fn boundaries(&self) -> [f64; 6] {
        let (r, q) = (self.t_r, self.tau_q);
        [0.0, r, r + q, 2.0 * r + q, 2.0 * r + 2.0 * q, 3.0 * r + 2.0 * q]
    }

    pub fn segment_window(&self, kind: SegmentKind) -> (f64, f64) {
        let b = self.boundaries();
        (b[kind.index()], b[kind.index() + 1])
    }

    /// Segment containing `t`, using half-open intervals except at `T`.
    pub fn segment_at(&self, t: f64) -> Result<SegmentKind> {
        self.check_time(t)?;
        let b = self.boundaries();
        Ok(SegmentKind::ALL
            .into_iter()
            .find(|k| t < b[k.index() + 1])
            .unwrap_or(SegmentKind::FinalRelaxation))
    }

    pub fn lambda_at(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.lambda_clamped(t))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let total = self.total_duration();
        if !(0.0..=total).contains(&t) {
            return Err(Error::TimeOutOfRange { t, total });
        }
        Ok(())
    }

    /// Λ(t) for `t` inside (or rounding-close to) `[0, T]`.
    pub(crate) fn lambda_clamped(&self, t: f64) -> f64 {
        let b = self.boundaries();
        let dl = self.delta_lambda();
        if t < b[1] {
            self.lambda0
        } else if t < b[2] {
            self.lambda0 + dl * (t - b[1]) / self.tau_q
        } else if t < b[3] {
            self.lambda1
        } else if t < b[4] {
            self.lambda1 - dl * (t - b[3]) / self.tau_q
        } else {
            self.lambda0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Fourth-order commutator-free Magnus steps with Chebyshev exponentials.
    #[default]
    Chebyshev,
    /// Classical explicit Runge-Kutta of order four.
    Rk4,
}

impl Method {
    /// Global order of accuracy in the step size.
    pub fn order(self) -> u32 {
        4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub method: Method,
    /// Time increment per Hamiltonian refresh.
    pub step: f64,
    /// Largest tolerated `|‖Ψ‖ - 1|`; exceeding it aborts propagation.
    pub norm_tolerance: f64,
    /// Spacing of observable samples on integrated segments.
    pub sample_stride: f64,
    /// Keep full states at every sample, not only at segment boundaries.
    pub store_snapshots: bool,
    /// Number of evenly spaced samples on fast-path plateaus.
    pub plateau_samples: usize,
    /// Advance plateaus by eigenbasis phase rotation.
    pub plateau_fast_path: bool,
}

impl PropagationConfig {
    /// Reference settings: step `τ_s/100`, samples every `τ_s/10`.
    pub fn for_time_scale(tau_s: f64) -> Self {
        Self {
            method: Method::Chebyshev,
            step: tau_s / 100.0,
            norm_tolerance: 1e-8,
            sample_stride: tau_s / 10.0,
            store_snapshots: false,
            plateau_samples: 2000,
            plateau_fast_path: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidStep(self.step));
        }
        if !(self.norm_tolerance >= 0.0) {
            return Err(Error::Domain(format!(
                "norm tolerance must be non-negative, got {}",
                self.norm_tolerance
            )));
        }
        if !(self.sample_stride > 0.0) {
            return Err(Error::Domain(format!(
                "sample stride must be positive, got {}",
                self.sample_stride
            )));
        }
        Ok(())
    }
}

/// Observables recorded at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub lambda: f64,
    pub jx: f64,
    pub parity: f64,
    pub norm_deviation: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Ordered in the direction of integration.
    pub samples: Vec<Sample>,
    /// Full states at sample times when snapshot storage is enabled.
    pub snapshots: Vec<(f64, StateVector)>,
    pub final_state: StateVector,
    pub max_norm_deviation: f64,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn jx_series(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.t, s.jx)).collect()
    }
}

/// State split into its even and odd components.
#[derive(Debug, Clone)]
struct SectorState {
    basis: SpinBasis,
    parts: [Vec<Complex64>; 2],
}

impl SectorState {
    fn split(state: &StateVector) -> Self {
        let basis = state.basis();
        let a = state.amplitudes();
        let parts = [
            basis.sector_indices(Parity::Even).map(|k| a[k]).collect(),
            basis.sector_indices(Parity::Odd).map(|k| a[k]).collect(),
        ];
        Self { basis, parts }
    }

    fn join(&self) -> StateVector {
        let mut amps = vec![ZERO; self.basis.dim()];
        for (k, a) in amps.iter_mut().enumerate() {
            *a = self.parts[k % 2][k / 2];
        }
        StateVector::from_raw(self.basis, amps)
    }

    fn weights(&self) -> [f64; 2] {
        [0, 1].map(|p| self.parts[p].iter().map(|a| a.norm_sqr()).sum())
    }

    fn norm_deviation(&self) -> f64 {
        let [e, o] = self.weights();
        ((e + o).sqrt() - 1.0).abs()
    }

    fn parity(&self) -> f64 {
        let [e, o] = self.weights();
        e - o
    }

    fn jx(&self) -> f64 {
        let basis = self.basis;
        let j = basis.j();
        let n = basis.dim();
        let mut acc = 0.0;
        for k in 0..n.saturating_sub(1) {
            let m = basis.m(k);
            let c = 0.5 * (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt();
            let a = self.parts[k % 2][k / 2];
            let b = self.parts[(k + 1) % 2][(k + 1) / 2];
            acc += 2.0 * c * (a.conj() * b).re;
        }
        acc
    }

    fn sample(&self, t: f64, lambda: f64) -> Sample {
        Sample {
            t,
            lambda,
            jx: self.jx(),
            parity: self.parity(),
            norm_deviation: self.norm_deviation(),
        }
    }
}

// Fourth-order commutator-free Magnus coefficients.
const SQRT3: f64 = 1.732_050_807_568_877_2;
const CF4_A1: f64 = (3.0 - 2.0 * SQRT3) / 12.0;
const CF4_A2: f64 = (3.0 + 2.0 * SQRT3) / 12.0;

struct Stepper {
    method: Method,
    basis: SpinBasis,
    ops: [SectorOperators; 2],
    frozen: [SymTridiagonal; 2],
    ws: Workspace,
    rk: [Vec<Complex64>; 5],
}

impl Stepper {
    fn new(basis: SpinBasis, method: Method) -> Self {
        let ops = [
            SectorOperators::new(basis, Parity::Even),
            SectorOperators::new(basis, Parity::Odd),
        ];
        let frozen = [ops[0].hamiltonian(0.0), ops[1].hamiltonian(0.0)];
        Self {
            method,
            basis,
            ops,
            frozen,
            ws: Workspace::default(),
            rk: Default::default(),
        }
    }

    fn field_at(&self, schedule: &QuenchSchedule, t: f64) -> f64 {
        field(self.basis, schedule.lambda_clamped(t))
    }

    fn freeze(&mut self, g: f64) {
        for (h, op) in self.frozen.iter_mut().zip(&self.ops) {
            for ((d, a), m) in h.diag.iter_mut().zip(&op.jx2_diag).zip(&op.m) {
                *d = a - g * m;
            }
        }
    }

    /// Advances from `t` to `t + h` (`h` may be negative).
    fn step(&mut self, state: &mut SectorState, schedule: &QuenchSchedule, t: f64, h: f64) {
        match self.method {
            Method::Chebyshev => {
                let g1 = self.field_at(schedule, t + (0.5 - SQRT3 / 6.0) * h);
                let g2 = self.field_at(schedule, t + (0.5 + SQRT3 / 6.0) * h);
                // right factor acts first
                for g in [2.0 * (CF4_A2 * g1 + CF4_A1 * g2), 2.0 * (CF4_A1 * g1 + CF4_A2 * g2)] {
                    self.exp_frozen(state, g, 0.5 * h);
                }
            }
            Method::Rk4 => self.rk4(state, schedule, t, h),
        }
    }

    fn exp_frozen(&mut self, state: &mut SectorState, g: f64, tau: f64) {
        self.freeze(g);
        for (h, part) in self.frozen.iter().zip(state.parts.iter_mut()) {
            chebyshev::apply_exp(h, tau, part, &mut self.ws);
        }
    }

    fn rk4(&mut self, state: &mut SectorState, schedule: &QuenchSchedule, t: f64, h: f64) {
        let g0 = self.field_at(schedule, t);
        let gm = self.field_at(schedule, t + 0.5 * h);
        let g1 = self.field_at(schedule, t + h);
        let minus_i = Complex64::new(0.0, -1.0);
        for p in 0..2 {
            let n = state.parts[p].len();
            for buf in self.rk.iter_mut() {
                buf.clear();
                buf.resize(n, ZERO);
            }
            let [k1, k2, k3, k4, tmp] = &mut self.rk;
            let psi = &state.parts[p];
            let op = &self.ops[p];
            let deriv = |g: f64, x: &[Complex64], out: &mut [Complex64]| {
                for i in 0..n {
                    let mut acc = x[i] * (op.jx2_diag[i] - g * op.m[i]);
                    if i > 0 {
                        acc += x[i - 1] * op.jx2_off[i - 1];
                    }
                    if i + 1 < n {
                        acc += x[i + 1] * op.jx2_off[i];
                    }
                    out[i] = acc * minus_i;
                }
            };
            deriv(g0, psi, k1);
            for i in 0..n {
                tmp[i] = psi[i] + k1[i] * (0.5 * h);
            }
            deriv(gm, tmp, k2);
            for i in 0..n {
                tmp[i] = psi[i] + k2[i] * (0.5 * h);
            }
            deriv(gm, tmp, k3);
            for i in 0..n {
                tmp[i] = psi[i] + k3[i] * h;
            }
            deriv(g1, tmp, k4);
            let psi = &mut state.parts[p];
            for i in 0..n {
                psi[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
            }
        }
    }
}

fn check_norm(state: &SectorState, t: f64, tol: f64) -> Result<f64> {
    let dev = state.norm_deviation();
    if !(dev <= tol) {
        return Err(Error::NormDrift {
            t,
            deviation: dev,
            tolerance: tol,
        });
    }
    Ok(dev)
}

/// Integrates the Schrödinger equation over `[t_a, t_b]` (`t_a ≤ t_b`).
pub fn evolve(
    state: &StateVector,
    schedule: &QuenchSchedule,
    window: (f64, f64),
    config: &PropagationConfig,
) -> Result<Trajectory> {
    let (t_a, t_b) = window;
    if t_a > t_b {
        return Err(Error::Domain(format!(
            "window [{t_a}, {t_b}] is reversed; use reverse_evolve"
        )));
    }
    integrate(state, schedule, t_a, t_b, config)
}

/// Integrates backwards in time from `t_b` to `t_a`, i.e. applies
/// `U(t_b, t_a)†`. Samples are ordered by decreasing time.
pub fn reverse_evolve(
    state: &StateVector,
    schedule: &QuenchSchedule,
    window: (f64, f64),
    config: &PropagationConfig,
) -> Result<Trajectory> {
    let (t_a, t_b) = window;
    if t_a > t_b {
        return Err(Error::Domain(format!("window [{t_a}, {t_b}] is reversed")));
    }
    integrate(state, schedule, t_b, t_a, config)
}

fn integrate(
    state: &StateVector,
    schedule: &QuenchSchedule,
    from: f64,
    to: f64,
    config: &PropagationConfig,
) -> Result<Trajectory> {
    config.validate()?;
    schedule.lambda_at(from)?;
    schedule.lambda_at(to)?;
    let dir = if to >= from { 1.0 } else { -1.0 };

    // Split at segment boundaries so that no step straddles a kink in Λ(t).
    let mut cuts = vec![from];
    let inner = schedule.boundaries();
    let mut interior: Vec<f64> = inner
        .iter()
        .copied()
        .filter(|&b| (b - from) * dir > 0.0 && (to - b) * dir > 0.0)
        .collect();
    if dir < 0.0 {
        interior.reverse();
    }
    cuts.extend(interior);
    cuts.push(to);

    let mut stepper = Stepper::new(state.basis(), config.method);
    let mut sectors = SectorState::split(state);
    let mut max_dev = check_norm(&sectors, from, config.norm_tolerance)?;
    let mut samples = vec![sectors.sample(from, schedule.lambda_clamped(from))];
    let mut snapshots = Vec::new();
    if config.store_snapshots {
        snapshots.push((from, sectors.join()));
    }
    let mut next_sample = 1usize;

    for piece in cuts.windows(2) {
        let (a, b) = (piece[0], piece[1]);
        let len = b - a;
        if len == 0.0 {
            continue;
        }
        let steps = (len.abs() / config.step).ceil().max(1.0) as usize;
        let h = len / steps as f64;
        for s in 0..steps {
            let t = a + h * s as f64;
            stepper.step(&mut sectors, schedule, t, h);
            let t_new = if s + 1 == steps { b } else { a + h * (s + 1) as f64 };
            max_dev = max_dev.max(check_norm(&sectors, t_new, config.norm_tolerance)?);
            let target = from + dir * config.sample_stride * next_sample as f64;
            if (t_new - target) * dir >= -1e-12 * config.sample_stride {
                samples.push(sectors.sample(t_new, schedule.lambda_clamped(t_new)));
                if config.store_snapshots {
                    snapshots.push((t_new, sectors.join()));
                }
                while (t_new - (from + dir * config.sample_stride * next_sample as f64)) * dir
                    >= -1e-12 * config.sample_stride
                {
                    next_sample += 1;
                }
            }
        }
    }
    if samples.last().map(|s| s.t) != Some(to) {
        samples.push(sectors.sample(to, schedule.lambda_clamped(to)));
        if config.store_snapshots {
            snapshots.push((to, sectors.join()));
        }
    }
    Ok(Trajectory {
        samples,
        snapshots,
        final_state: sectors.join(),
        max_norm_deviation: max_dev,
    })
}

/// Exact constant-Λ evolution over `[t_a, t_b]` by phase rotation in the
/// eigenbasis of `dec`, sampling `samples` evenly spaced interior points.
pub fn evolve_plateau(
    state: &StateVector,
    dec: &SpectralDecomposition,
    window: (f64, f64),
    samples: usize,
    norm_tolerance: f64,
) -> Result<Trajectory> {
    let (t_a, t_b) = window;
    if t_a > t_b {
        return Err(Error::Domain(format!("window [{t_a}, {t_b}] is reversed")));
    }
    let coeffs = dec.coefficients(state)?;
    let lambda = dec.lambda();
    // skip negligible eigencomponents when sampling
    let active: [Vec<usize>; 2] = [0, 1].map(|p| {
        coeffs[p]
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm_sqr() > 1e-32)
            .map(|(i, _)| i)
            .collect()
    });
    let rotated = |dt: f64| -> [Vec<Complex64>; 2] {
        [0, 1].map(|p| {
            let energies = &dec.sector(Parity::BOTH[p]).energies;
            let mut c = vec![ZERO; coeffs[p].len()];
            for &i in &active[p] {
                c[i] = coeffs[p][i] * Complex64::from_polar(1.0, -energies[i] * dt);
            }
            c
        })
    };
    let mut out = Vec::with_capacity(samples + 2);
    let mut max_dev: f64 = 0.0;
    let total = samples + 1;
    for s in 0..=total {
        let t = if s == total {
            t_b
        } else {
            t_a + (t_b - t_a) * s as f64 / total as f64
        };
        if s > 0 && t == out.last().map_or(f64::NAN, |x: &Sample| x.t) {
            continue;
        }
        let st = if s == 0 {
            SectorState::split(state)
        } else {
            SectorState::split(&dec.synthesize(&rotated(t - t_a)))
        };
        let sample = st.sample(t, lambda);
        max_dev = max_dev.max(check_norm(&st, t, norm_tolerance)?);
        out.push(sample);
    }
    let final_state = dec.synthesize(&rotated(t_b - t_a));
    Ok(Trajectory {
        samples: out,
        snapshots: Vec::new(),
        final_state,
        max_norm_deviation: max_dev,
    })
}

#[derive(Debug, Clone)]
pub struct SegmentRecord {
    pub kind: SegmentKind,
    pub window: (f64, f64),
    pub trajectory: Trajectory,
}

/// Full history of one closed cycle.
#[derive(Debug, Clone)]
pub struct CycleRecord {
    pub schedule: QuenchSchedule,
    pub initial: StateVector,
    pub segments: Vec<SegmentRecord>,
}

impl CycleRecord {
    pub fn is_complete(&self) -> bool {
        self.segments.len() == 5
            && self
                .segments
                .iter()
                .zip(SegmentKind::ALL)
                .all(|(s, k)| s.kind == k)
    }

    pub fn segment(&self, kind: SegmentKind) -> Result<&SegmentRecord> {
        self.segments
            .iter()
            .find(|s| s.kind == kind)
            .ok_or_else(|| Error::IncompleteCycle(format!("missing segment {}", kind.label())))
    }

    /// State at the end of the given segment.
    pub fn boundary_state(&self, kind: SegmentKind) -> Result<&StateVector> {
        Ok(&self.segment(kind)?.trajectory.final_state)
    }

    /// `Ψ(t_r), Ψ(t_r+τ_q), Ψ(2t_r+τ_q), Ψ(2t_r+2τ_q), Ψ(T)`.
    pub fn boundary_states(&self) -> Result<Vec<&StateVector>> {
        SegmentKind::ALL
            .iter()
            .map(|&k| self.boundary_state(k))
            .collect()
    }

    pub fn final_state(&self) -> Result<&StateVector> {
        self.boundary_state(SegmentKind::FinalRelaxation)
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.trajectory.max_norm_deviation)
            .fold(0.0, f64::max)
    }

    pub fn samples(&self) -> impl Iterator<Item = (SegmentKind, &Sample)> {
        self.segments
            .iter()
            .flat_map(|s| s.trajectory.samples.iter().map(move |x| (s.kind, x)))
    }
}

/// Runs the five segments in order.
pub fn run_cycle(
    initial: &StateVector,
    schedule: &QuenchSchedule,
    config: &PropagationConfig,
    cache: &DecompositionCache,
) -> Result<CycleRecord> {
    config.validate()?;
    let dev = initial.norm_deviation();
    if dev > config.norm_tolerance {
        return Err(Error::NormDrift {
            t: 0.0,
            deviation: dev,
            tolerance: config.norm_tolerance,
        });
    }
    let mut segments = Vec::with_capacity(5);
    let mut state = initial.clone();
    for kind in SegmentKind::ALL {
        let window = schedule.segment_window(kind);
        let trajectory = if kind.is_plateau() && config.plateau_fast_path {
            let lambda = schedule.lambda_clamped(window.0);
            let params = HamiltonianParams::new(initial.basis(), lambda)?;
            let dec = cache.get_or_compute(&params)?;
            evolve_plateau(&state, &dec, window, config.plateau_samples, config.norm_tolerance)?
        } else {
            evolve(&state, schedule, window, config)?
        };
        state = trajectory.final_state.clone();
        segments.push(SegmentRecord {
            kind,
            window,
            trajectory,
        });
    }
    Ok(CycleRecord {
        schedule: *schedule,
        initial: initial.clone(),
        segments,
    })
}
