use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lmg_cli::commands;
use lmg_cli::config::{ExperimentConfig, TimeUnits};
use lmg_cli::experiment::Context;
use lmg_cli::CliError;
use lmg_core::dynamics::Method;
use lmg_core::spin::InitialStateKind;

#[derive(Parser)]
#[command(name = "lmg", version, about = "Closed quench cycles in the LMG model")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Number of particles N (J = N/2).
    #[arg(long, global = true)]
    particles: Option<u32>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long, global = true, value_enum)]
    initial_state: Option<StateArg>,
    #[arg(long, global = true)]
    lambda0: Option<f64>,
    #[arg(long, global = true)]
    lambda1: Option<f64>,
    /// Relaxation time, in units of τ_s unless --absolute-time is given.
    #[arg(long, global = true)]
    t_r: Option<f64>,
    #[arg(long, global = true)]
    absolute_time: bool,
    /// Extra relaxation times for the final ⟨J_x⟩ band.
    #[arg(long, global = true, value_delimiter = ',')]
    band_t_r: Option<Vec<f64>>,
    /// Use this τ_s instead of running a gap scan.
    #[arg(long, global = true)]
    tau_s: Option<f64>,
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    #[arg(long, global = true)]
    refine: Option<usize>,
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,
    /// Integration step as a fraction of τ_s.
    #[arg(long, global = true)]
    step_ratio: Option<f64>,
    #[arg(long, global = true)]
    plateau_samples: Option<usize>,
    /// Integrate plateaus step by step instead of using eigenbasis phases.
    #[arg(long, global = true)]
    no_fast_plateau: bool,
    #[arg(long, global = true)]
    degeneracy_tolerance: Option<f64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StateArg {
    SpinCoherent,
    Geometric,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Chebyshev,
    Rk4,
}

#[derive(Subcommand)]
enum Command {
    /// Sector spectra on a Λ grid and the critical line E_c(Λ).
    Spectrum {
        #[arg(long)]
        lambda_min: Option<f64>,
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Same-parity gap scan; prints τ_s.
    Gaps,
    /// One closed cycle.
    Cycle {
        /// τ_q/τ_s; defaults to the last configured ratio.
        #[arg(long)]
        tau_q_ratio: Option<f64>,
    },
    /// Cycles over a list of τ_q/τ_s values.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        tau_q_ratios: Option<Vec<f64>>,
    },
    /// Print the CSV manifest consumed by the figure renderer.
    RenderHandoff,
    /// Print the resolved configuration as JSON.
    Config,
}

fn resolve(o: &Overrides, command: &Command) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &o.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v;
            }
        };
    }
    set!(cfg.output_dir, o.output.clone());
    set!(cfg.particles, o.particles);
    set!(cfg.mu, o.mu);
    set!(
        cfg.initial_state,
        o.initial_state.map(|s| match s {
            StateArg::SpinCoherent => InitialStateKind::SpinCoherent,
            StateArg::Geometric => InitialStateKind::Geometric,
        })
    );
    set!(cfg.lambda0, o.lambda0);
    set!(cfg.lambda1, o.lambda1);
    set!(cfg.t_r, o.t_r);
    if o.absolute_time {
        cfg.t_r_units = TimeUnits::Absolute;
    }
    set!(cfg.band_t_r, o.band_t_r.clone());
    if o.tau_s.is_some() {
        cfg.tau_s = o.tau_s;
    }
    set!(cfg.gap_scan.grid_points, o.grid_points);
    set!(cfg.gap_scan.refine_passes, o.refine);
    set!(
        cfg.propagation.method,
        o.method.map(|m| match m {
            MethodArg::Chebyshev => Method::Chebyshev,
            MethodArg::Rk4 => Method::Rk4,
        })
    );
    set!(cfg.propagation.step_ratio, o.step_ratio);
    set!(cfg.propagation.plateau_samples, o.plateau_samples);
    if o.no_fast_plateau {
        cfg.propagation.plateau_fast_path = false;
    }
    set!(cfg.degeneracy_tolerance, o.degeneracy_tolerance);
    set!(cfg.workers, o.workers);
    match command {
        Command::Spectrum {
            lambda_min,
            lambda_max,
            points,
        } => {
            set!(cfg.spectrum.lambda_min, *lambda_min);
            set!(cfg.spectrum.lambda_max, *lambda_max);
            set!(cfg.spectrum.points, *points);
        }
        Command::Sweep { tau_q_ratios } => set!(cfg.tau_q_ratios, tau_q_ratios.clone()),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli.overrides, &cli.command)?;
    if let Command::Config = cli.command {
        println!("{}", cfg.to_json());
        return Ok(());
    }
    let ctx = Context::new(cfg)?;
    let report = |files: &[PathBuf]| {
        for f in files {
            println!("wrote {}", f.display());
        }
    };
    match cli.command {
        Command::Spectrum { .. } => report(&commands::spectrum(&ctx)?),
        Command::Gaps => {
            let (tau_s, files) = commands::gaps(&ctx)?;
            report(&files);
            println!("tau_s = {tau_s:.16e}");
        }
        Command::Cycle { tau_q_ratio } => {
            let ratio = match tau_q_ratio.or_else(|| ctx.config.tau_q_ratios.last().copied()) {
                Some(r) => r,
                None => return Err(CliError::Config("no tau_q ratio given".into())),
            };
            let (s, files) = commands::cycle(&ctx, ratio)?;
            report(&files);
            println!(
                "delta_S = {:.6}  e_dis_ratio = {:.3e}  delta_I_H = {:.4}  delta_I_Jx = {:.4}  tv_energy = {:.3e}",
                s.delta_s, s.e_dis_ratio, s.delta_i_h, s.delta_i_jx, s.tv_energy
            );
        }
        Command::Sweep { .. } => {
            let rep = commands::sweep(&ctx)?;
            report(&rep.files);
            for (ratio, row) in &rep.rows {
                match row {
                    Ok(s) => println!("tau_q/tau_s = {ratio}: delta_S = {:.6}", s.delta_s),
                    Err(e) => eprintln!("tau_q/tau_s = {ratio}: failed: {e}"),
                }
            }
        }
        Command::RenderHandoff => {
            let (text, _) = commands::render_handoff(&ctx)?;
            print!("{text}");
        }
        Command::Config => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
