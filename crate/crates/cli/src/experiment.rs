//! Protocol runs and their analysis, independent of file output.

use std::sync::Arc;

use lmg_core::cache::DecompositionCache;
use lmg_core::dynamics::{run_cycle, CycleRecord, QuenchSchedule, SegmentKind};
use lmg_core::equilibrium::{
    build_equilibrium, ensemble_jx_distribution, von_neumann_entropy, EquilibriumEnsemble,
};
use lmg_core::observables::{
    branch_masses, delta_information, dissipated_energy, energy_distribution, jx_distribution,
    time_average, total_variation, Band, Distribution, JxBasis,
};
use lmg_core::spectral::{gap_scan, refine_gap_scan, GapScanResult, HamiltonianParams};
use lmg_core::spin::SpinBasis;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Shared state for all runs of one configuration.
pub struct Context {
    pub config: ExperimentConfig,
    pub basis: SpinBasis,
    pub cache: DecompositionCache,
    pub jx: Arc<JxBasis>,
}

impl Context {
    pub fn new(config: ExperimentConfig) -> Result<Self, CliError> {
        Self::with_cache(config, DecompositionCache::from_env())
    }

    pub fn with_cache(config: ExperimentConfig, cache: DecompositionCache) -> Result<Self, CliError> {
        config.validate()?;
        let basis = SpinBasis::from_particles(config.particles);
        let jx = JxBasis::shared(basis)?;
        Ok(Self {
            config,
            basis,
            cache,
            jx,
        })
    }

    pub fn gap_scan(&self) -> Result<GapScanResult, CliError> {
        let g = &self.config.gap_scan;
        let scan = gap_scan(self.basis, g.lambda_min, g.lambda_max, g.grid_points)?;
        Ok(if g.refine_passes > 0 {
            refine_gap_scan(self.basis, &scan, g.refine_passes)?
        } else {
            scan
        })
    }

    /// `τ_s` from the configuration, or from a gap scan.
    pub fn tau_s(&self) -> Result<f64, CliError> {
        match self.config.tau_s {
            Some(t) => Ok(t),
            None => Ok(self.gap_scan()?.tau_s),
        }
    }

    fn ensemble(
        &self,
        state: &lmg_core::spin::StateVector,
        lambda: f64,
    ) -> Result<(EquilibriumEnsemble, Arc<lmg_core::spectral::SpectralDecomposition>), CliError> {
        let dec = self
            .cache
            .get_or_compute(&HamiltonianParams::new(self.basis, lambda)?)?;
        let ens = build_equilibrium(state, &dec, self.config.degeneracy_tolerance)?;
        Ok((ens, dec))
    }
}

/// One summary row per cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSummary {
    pub tau_q_ratio: f64,
    pub tau_s: f64,
    pub tau_q: f64,
    pub t_r: f64,
    pub s_initial: f64,
    pub s_forward: f64,
    pub delta_s: f64,
    pub e_initial: f64,
    pub e_final: f64,
    pub e_dis: f64,
    pub e_dis_ratio: f64,
    pub delta_i_h: f64,
    pub delta_i_jx: f64,
    pub tv_energy: f64,
    pub tv_jx: f64,
    pub initial_jx_mean: f64,
    pub final_jx_mean: f64,
    pub final_jx_min: f64,
    pub final_jx_max: f64,
    pub band_lower: f64,
    pub band_upper: f64,
    pub band_runs: usize,
    pub branch_negative: f64,
    pub branch_positive: f64,
    pub max_norm_deviation: f64,
    pub parity_drift: f64,
}

impl CycleSummary {
    pub const COLUMNS: [&'static str; 26] = [
        "tau_q_ratio",
        "tau_s",
        "tau_q",
        "t_r",
        "S_initial",
        "S_forward",
        "delta_S",
        "e_initial",
        "e_final",
        "e_dis",
        "e_dis_ratio",
        "delta_I_H",
        "delta_I_Jx",
        "tv_energy",
        "tv_jx",
        "initial_jx_mean",
        "final_jx_mean",
        "final_jx_min",
        "final_jx_max",
        "band_lower",
        "band_upper",
        "band_runs",
        "branch_negative",
        "branch_positive",
        "max_norm_deviation",
        "parity_drift",
    ];

    pub fn values(&self) -> Vec<f64> {
        vec![
            self.tau_q_ratio,
            self.tau_s,
            self.tau_q,
            self.t_r,
            self.s_initial,
            self.s_forward,
            self.delta_s,
            self.e_initial,
            self.e_final,
            self.e_dis,
            self.e_dis_ratio,
            self.delta_i_h,
            self.delta_i_jx,
            self.tv_energy,
            self.tv_jx,
            self.initial_jx_mean,
            self.final_jx_mean,
            self.final_jx_min,
            self.final_jx_max,
            self.band_lower,
            self.band_upper,
            self.band_runs as f64,
            self.branch_negative,
            self.branch_positive,
            self.max_norm_deviation,
            self.parity_drift,
        ]
    }
}

/// Everything the cycle command writes.
pub struct CycleAnalysis {
    pub summary: CycleSummary,
    pub record: CycleRecord,
    pub energy_initial: Distribution,
    pub energy_final: Distribution,
    /// Relaxed (ensemble) J_x distributions at Λ₀.
    pub jx_initial: Distribution,
    pub jx_final: Distribution,
    /// J_x distributions of the pure states at `t = 0` and `t = T`.
    pub jx_initial_instant: Distribution,
    pub jx_final_instant: Distribution,
}

/// Runs and analyses one cycle with relaxation time `t_r` (absolute units).
pub fn analyze_cycle(
    ctx: &Context,
    tau_s: f64,
    tau_q_ratio: f64,
    t_r: f64,
) -> Result<CycleAnalysis, CliError> {
    let cfg = &ctx.config;
    let tau_q = tau_q_ratio * tau_s;
    let schedule = QuenchSchedule::new(cfg.lambda0, cfg.lambda1, t_r, tau_q)?;
    let initial = cfg.initial_state.prepare(ctx.basis, cfg.mu)?;
    let prop = cfg.propagation.resolve(tau_s);
    let record = run_cycle(&initial, &schedule, &prop, &ctx.cache)?;

    let relaxed0 = record.boundary_state(SegmentKind::InitialRelaxation)?;
    let forward = record.boundary_state(SegmentKind::IntermediateRelaxation)?;
    let last = record.final_state()?;

    let (ens0, dec0) = ctx.ensemble(relaxed0, cfg.lambda0)?;
    let (ens1, _) = ctx.ensemble(forward, cfg.lambda1)?;
    let (ens_final, _) = ctx.ensemble(last, cfg.lambda0)?;
    let s_initial = von_neumann_entropy(&ens0);
    let s_forward = von_neumann_entropy(&ens1);

    let energy_initial = energy_distribution(relaxed0, &dec0)?;
    let energy_final = energy_distribution(last, &dec0)?;
    let jx_initial = ensemble_jx_distribution(&ens0, &dec0, &ctx.jx)?;
    let jx_final = ensemble_jx_distribution(&ens_final, &dec0, &ctx.jx)?;
    let jx_initial_instant = jx_distribution(&initial, &ctx.jx)?;
    let jx_final_instant = jx_distribution(last, &ctx.jx)?;
    let dis = dissipated_energy(&record, &dec0)?;

    let series = |kind: SegmentKind| -> Result<_, CliError> {
        let seg = record.segment(kind)?;
        Ok(time_average(&seg.trajectory.jx_series(), seg.window)?)
    };
    let first = series(SegmentKind::InitialRelaxation)?;
    let final_avg = series(SegmentKind::FinalRelaxation)?;
    let p0 = initial.parity_expectation();
    let parity_drift = record
        .samples()
        .map(|(_, s)| (s.parity - p0).abs())
        .fold(0.0, f64::max);
    let branches = branch_masses(&jx_final);

    let summary = CycleSummary {
        tau_q_ratio,
        tau_s,
        tau_q,
        t_r,
        s_initial,
        s_forward,
        delta_s: s_forward - s_initial,
        e_initial: dis.initial,
        e_final: dis.r#final,
        e_dis: dis.dissipated,
        e_dis_ratio: dis.ratio,
        delta_i_h: delta_information(&energy_initial, &energy_final)?,
        delta_i_jx: delta_information(&jx_initial, &jx_final)?,
        tv_energy: total_variation(&energy_initial, &energy_final)?,
        tv_jx: total_variation(&jx_initial, &jx_final)?,
        initial_jx_mean: first.mean,
        final_jx_mean: final_avg.mean,
        final_jx_min: final_avg.min,
        final_jx_max: final_avg.max,
        band_lower: final_avg.mean,
        band_upper: final_avg.mean,
        band_runs: 1,
        branch_negative: branches.negative,
        branch_positive: branches.positive,
        max_norm_deviation: record.max_norm_deviation(),
        parity_drift,
    };
    Ok(CycleAnalysis {
        summary,
        record,
        energy_initial,
        energy_final,
        jx_initial,
        jx_final,
        jx_initial_instant,
        jx_final_instant,
    })
}

/// Main run at the configured `t_r` plus one run per `band_t_r` entry; the
/// band spans the final time-averaged ⟨J_x⟩ of all runs.
pub fn analyze_with_band(
    ctx: &Context,
    tau_s: f64,
    tau_q_ratio: f64,
) -> Result<CycleAnalysis, CliError> {
    let cfg = &ctx.config;
    let t_r = cfg.absolute_time(cfg.t_r, tau_s);
    let (main, extra) = rayon::join(
        || analyze_cycle(ctx, tau_s, tau_q_ratio, t_r),
        || {
            cfg.band_t_r
                .par_iter()
                .map(|&t| {
                    analyze_cycle(ctx, tau_s, tau_q_ratio, cfg.absolute_time(t, tau_s))
                        .map(|a| a.summary.final_jx_mean)
                })
                .collect::<Result<Vec<f64>, CliError>>()
        },
    );
    let mut main = main?;
    let mut means = extra?;
    means.push(main.summary.final_jx_mean);
    let band = Band::from_means(&means).expect("at least one run");
    main.summary.band_lower = band.lower;
    main.summary.band_upper = band.upper;
    main.summary.band_runs = band.runs;
    Ok(main)
}
