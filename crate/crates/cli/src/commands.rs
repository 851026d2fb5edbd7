//! Subcommand implementations. Each returns the files it wrote.

use std::path::{Path, PathBuf};

use lmg_core::observables::Distribution;
use lmg_core::spectral::{critical_energy, sector_energies, HamiltonianParams};
use lmg_core::spin::Parity;
use rayon::prelude::*;

use crate::error::CliError;
use crate::experiment::{analyze_with_band, CycleAnalysis, CycleSummary, Context};
use crate::output::{float, provenance, OutputSet, Table};

pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const CRITICAL_LINE_FILE: &str = "critical_line.csv";
pub const GAPS_FILE: &str = "gaps.csv";
pub const GAP_SUMMARY_FILE: &str = "gap_summary.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const MANIFEST_FILE: &str = "render_manifest.csv";
pub const JX_TRACE_FILE: &str = "jx_trace.csv";
pub const ENERGY_DIST_FILE: &str = "energy_distribution.csv";
pub const JX_DIST_FILE: &str = "jx_distribution.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

pub const SPECTRUM_COLUMNS: [&str; 4] = ["lambda", "sector", "index", "energy"];
pub const CRITICAL_LINE_COLUMNS: [&str; 2] = ["lambda", "e_c"];
pub const GAPS_COLUMNS: [&str; 4] = ["lambda", "min_gap", "min_gap_even", "min_gap_odd"];
pub const GAP_SUMMARY_COLUMNS: [&str; 6] = [
    "delta_eff",
    "tau_s",
    "argmin_lambda",
    "argmin_sector",
    "argmin_level",
    "grid_points",
];
pub const JX_TRACE_COLUMNS: [&str; 7] = [
    "t",
    "lambda",
    "segment",
    "direction",
    "jx",
    "parity",
    "norm_deviation",
];
pub const ENERGY_DIST_COLUMNS: [&str; 5] = ["sector", "index", "energy", "p_initial", "p_final"];
pub const JX_DIST_COLUMNS: [&str; 5] = [
    "jx",
    "p_initial",
    "p_final",
    "p_initial_instant",
    "p_final_instant",
];
pub const SWEEP_COLUMNS: [&str; 10] = [
    "tau_q_ratio",
    "delta_S",
    "e_dis_ratio",
    "delta_I_H",
    "delta_I_Jx",
    "tv_energy",
    "tv_jx",
    "final_jx_mean",
    "status",
    "message",
];

fn sector_name(p: Parity) -> &'static str {
    match p {
        Parity::Even => "even",
        Parity::Odd => "odd",
    }
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| {
            if i + 1 == points {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (points - 1) as f64
            }
        })
        .collect()
}

fn out_path(ctx: &Context, name: &str) -> PathBuf {
    ctx.config.output_dir.join(name)
}

/// Sector eigenvalues on the configured Λ grid plus the `E_c` line.
pub fn spectrum(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let s = &ctx.config.spectrum;
    let lambdas = grid(s.lambda_min, s.lambda_max, s.points);
    let rows = lambdas
        .par_iter()
        .map(|&l| sector_energies(ctx.basis, l).map(|e| (l, e)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut levels = Table::new(&SPECTRUM_COLUMNS);
    let mut line = Table::new(&CRITICAL_LINE_COLUMNS);
    for (lambda, energies) in rows {
        for parity in Parity::BOTH {
            for (i, e) in energies[parity.offset()].iter().enumerate() {
                levels.push(vec![float(lambda), sector_name(parity).into(), i.to_string(), float(*e)]);
            }
        }
        let ec = critical_energy(&HamiltonianParams::new(ctx.basis, lambda)?);
        line.push(vec![float(lambda), float(ec)]);
    }
    let prov = provenance(&ctx.config.hash());
    let mut out = OutputSet::default();
    out.add_table(out_path(ctx, SPECTRUM_FILE), &levels, &prov);
    out.add_table(out_path(ctx, CRITICAL_LINE_FILE), &line, &prov);
    out.commit()
}

/// Gap scan; returns `τ_s` and the written files.
pub fn gaps(ctx: &Context) -> Result<(f64, Vec<PathBuf>), CliError> {
    let scan = ctx.gap_scan()?;
    let mut per_lambda = Table::new(&GAPS_COLUMNS);
    for (lambda, row) in scan.lambdas.iter().zip(&scan.gaps) {
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let (e, o) = (min(&row[0]), min(&row[1]));
        per_lambda.push(vec![float(*lambda), float(e.min(o)), float(e), float(o)]);
    }
    let mut summary = Table::new(&GAP_SUMMARY_COLUMNS);
    summary.push(vec![
        float(scan.delta_eff),
        float(scan.tau_s),
        float(scan.argmin.lambda),
        sector_name(scan.argmin.parity).into(),
        scan.argmin.level.to_string(),
        scan.lambdas.len().to_string(),
    ]);
    let prov = provenance(&ctx.config.hash());
    let mut out = OutputSet::default();
    out.add_table(out_path(ctx, GAPS_FILE), &per_lambda, &prov);
    out.add_table(out_path(ctx, GAP_SUMMARY_FILE), &summary, &prov);
    Ok((scan.tau_s, out.commit()?))
}

/// Directory name for one τ_q/τ_s value.
pub fn cycle_dir(ctx: &Context, tau_q_ratio: f64) -> PathBuf {
    ctx.config.output_dir.join(format!("cycle_tq{tau_q_ratio}"))
}

fn summary_table(s: &CycleSummary) -> Table {
    let mut t = Table::new(&CycleSummary::COLUMNS);
    let mut row: Vec<String> = s.values().into_iter().map(float).collect();
    row[21] = s.band_runs.to_string();
    t.push(row);
    t
}

fn distribution_probs(d: &Distribution) -> Vec<f64> {
    d.probabilities().collect()
}

fn cycle_tables(a: &CycleAnalysis, dir: &Path, prov: &str, out: &mut OutputSet) {
    let mut trace = Table::new(&JX_TRACE_COLUMNS);
    for (kind, s) in a.record.samples() {
        let direction = if kind.is_forward() { "forward" } else { "backward" };
        trace.push(vec![
            float(s.t),
            float(s.lambda),
            kind.label().into(),
            direction.into(),
            float(s.jx),
            float(s.parity),
            float(s.norm_deviation),
        ]);
    }
    let mut energy = Table::new(&ENERGY_DIST_COLUMNS);
    for (o, q) in a.energy_initial.outcomes.iter().zip(&a.energy_final.outcomes) {
        energy.push(vec![
            sector_name(o.parity.expect("energy outcomes carry parity")).into(),
            o.level.to_string(),
            float(o.value),
            float(o.probability),
            float(q.probability),
        ]);
    }
    let mut jx = Table::new(&JX_DIST_COLUMNS);
    let cols = [
        distribution_probs(&a.jx_initial),
        distribution_probs(&a.jx_final),
        distribution_probs(&a.jx_initial_instant),
        distribution_probs(&a.jx_final_instant),
    ];
    for (j, o) in a.jx_initial.outcomes.iter().enumerate() {
        let mut row = vec![float(o.value)];
        row.extend(cols.iter().map(|c| float(c[j])));
        jx.push(row);
    }
    out.add_table(dir.join(JX_TRACE_FILE), &trace, prov);
    out.add_table(dir.join(ENERGY_DIST_FILE), &energy, prov);
    out.add_table(dir.join(JX_DIST_FILE), &jx, prov);
    out.add_table(dir.join(SUMMARY_FILE), &summary_table(&a.summary), prov);
}

/// One full cycle at `τ_q = ratio·τ_s`.
pub fn cycle(ctx: &Context, tau_q_ratio: f64) -> Result<(CycleSummary, Vec<PathBuf>), CliError> {
    if !(tau_q_ratio > 0.0) || !tau_q_ratio.is_finite() {
        return Err(CliError::Config(format!(
            "tau_q ratio must be positive, got {tau_q_ratio}"
        )));
    }
    let tau_s = ctx.tau_s()?;
    let analysis = analyze_with_band(ctx, tau_s, tau_q_ratio)?;
    let mut out = OutputSet::default();
    cycle_tables(
        &analysis,
        &cycle_dir(ctx, tau_q_ratio),
        &provenance(&ctx.config.hash()),
        &mut out,
    );
    Ok((analysis.summary, out.commit()?))
}

#[derive(Debug)]
pub struct SweepReport {
    pub rows: Vec<(f64, Result<CycleSummary, String>)>,
    pub files: Vec<PathBuf>,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|(_, r)| r.is_err()).count()
    }
}

/// Cycles for every configured τ_q ratio; failed runs are recorded and the
/// sweep continues.
pub fn sweep(ctx: &Context) -> Result<SweepReport, CliError> {
    let tau_s = ctx.tau_s()?;
    let prov = provenance(&ctx.config.hash());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.config.workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let runs: Vec<(f64, Result<CycleAnalysis, CliError>)> = pool.install(|| {
        ctx.config
            .tau_q_ratios
            .par_iter()
            .map(|&r| (r, analyze_with_band(ctx, tau_s, r)))
            .collect()
    });

    let mut out = OutputSet::default();
    let mut table = Table::new(&SWEEP_COLUMNS);
    let mut rows = Vec::with_capacity(runs.len());
    for (ratio, run) in runs {
        match run {
            Ok(a) => {
                let s = a.summary;
                cycle_tables(&a, &cycle_dir(ctx, ratio), &prov, &mut out);
                table.push(
                    [s.tau_q_ratio, s.delta_s, s.e_dis_ratio, s.delta_i_h, s.delta_i_jx, s.tv_energy, s.tv_jx, s.final_jx_mean]
                        .into_iter()
                        .map(float)
                        .chain(["ok".to_string(), String::new()])
                        .collect(),
                );
                rows.push((ratio, Ok(s)));
            }
            Err(e) => {
                let nan = float(f64::NAN);
                let mut row = vec![float(ratio)];
                row.extend(std::iter::repeat(nan).take(7));
                row.push("failed".into());
                row.push(e.to_string());
                table.push(row);
                rows.push((ratio, Err(e.to_string())));
            }
        }
    }
    out.add_table(out_path(ctx, SWEEP_FILE), &table, &prov);
    let files = out.commit()?;
    Ok(SweepReport { rows, files })
}

/// CSV manifest describing every input the figure renderer reads.
pub fn render_handoff(ctx: &Context) -> Result<(String, Vec<PathBuf>), CliError> {
    let join = |c: &[&str]| c.join(";");
    let mut table = Table::new(&["figure", "path", "columns", "present"]);
    let mut entry = |figure: &str, path: PathBuf, columns: String| {
        let present = path.is_file();
        table.push(vec![
            figure.into(),
            path.to_string_lossy().into_owned(),
            columns,
            present.to_string(),
        ]);
    };
    entry("spectrum-panel", out_path(ctx, SPECTRUM_FILE), join(&SPECTRUM_COLUMNS));
    entry("spectrum-panel", out_path(ctx, CRITICAL_LINE_FILE), join(&CRITICAL_LINE_COLUMNS));
    let mut ratios: Vec<f64> = ctx.config.tau_q_ratios.clone();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    for r in ratios {
        let dir = cycle_dir(ctx, r);
        entry("cycle-panel", dir.join(JX_TRACE_FILE), join(&JX_TRACE_COLUMNS));
        entry("cycle-panel", dir.join(ENERGY_DIST_FILE), join(&ENERGY_DIST_COLUMNS));
        entry("cycle-panel", dir.join(JX_DIST_FILE), join(&JX_DIST_COLUMNS));
        entry("cycle-panel", dir.join(SUMMARY_FILE), join(&CycleSummary::COLUMNS));
    }
    entry("sweep-panel", out_path(ctx, SWEEP_FILE), join(&SWEEP_COLUMNS));
    let bytes = table.render(&provenance(&ctx.config.hash()));
    let text = String::from_utf8(bytes.clone()).expect("utf-8 csv");
    let mut out = OutputSet::default();
    out.add(out_path(ctx, MANIFEST_FILE), bytes);
    Ok((text, out.commit()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_exact() {
        let g = grid(0.5, 3.5, 7);
        assert_eq!(g.len(), 7);
        assert_eq!(g[0], 0.5);
        assert_eq!(g[6], 3.5);
        assert_eq!(grid(1.0, 2.0, 1), vec![1.0]);
    }

    #[test]
    fn summary_columns_match_values() {
        let s = CycleSummary {
            tau_q_ratio: 1.0,
            tau_s: 0.1,
            tau_q: 0.1,
            t_r: 1.0,
            s_initial: 0.0,
            s_forward: 0.0,
            delta_s: 0.0,
            e_initial: 0.0,
            e_final: 0.0,
            e_dis: 0.0,
            e_dis_ratio: 0.0,
            delta_i_h: 0.0,
            delta_i_jx: 0.0,
            tv_energy: 0.0,
            tv_jx: 0.0,
            initial_jx_mean: 0.0,
            final_jx_mean: 0.0,
            final_jx_min: 0.0,
            final_jx_max: 0.0,
            band_lower: 0.0,
            band_upper: 0.0,
            band_runs: 3,
            branch_negative: 0.0,
            branch_positive: 0.0,
            max_norm_deviation: 0.0,
            parity_drift: 0.0,
        };
        assert_eq!(s.values().len(), CycleSummary::COLUMNS.len());
        assert_eq!(CycleSummary::COLUMNS[21], "band_runs");
        let text = String::from_utf8(summary_table(&s).render("p")).unwrap();
        assert!(text.lines().nth(2).unwrap().split(',').nth(21) == Some("3"));
    }
}
