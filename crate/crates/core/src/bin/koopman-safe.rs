use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use koopman_safe::control::Regime;
use koopman_safe::harness::{
    emit_csv, emit_plots, emit_summary, read_csv, run_id_demo, run_scenario, IdDemoConfig, PlotSeries, RunLog,
    ScenarioConfig,
};
use koopman_safe::{Error, Result};

#[derive(Parser)]
#[command(name = "koopman-safe", version, about = "Fixed-time disturbance identification with CBF-QP safety filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run closed-loop scenarios and write CSV logs plus JSON summaries.
    Simulate {
        /// Scenario JSON (defaults to the built-in case study).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Safety regime to run, or all of them.
        #[arg(long, value_enum, default_value_t = RegimeArg::All)]
        regime: RegimeArg,
        /// Seed of the measurement-noise stream.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Measurement noise; `both` runs each regime with and without it.
        #[arg(long, value_enum, default_value_t = NoiseArg::Off)]
        noise: NoiseArg,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Override the integration step in seconds.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the simulated horizon in seconds.
        #[arg(long)]
        horizon: Option<f64>,
        /// Also write the SVG figures into the output directory.
        #[arg(long)]
        plot: bool,
    },
    /// Render SVG figures from CSV logs.
    Plot {
        /// CSV logs written by `simulate`; each file stem becomes a legend label.
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        /// Output directory for the four SVGs.
        #[arg(long)]
        out: PathBuf,
        /// Scenario whose obstacles and reference are drawn (defaults to the case study).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Identify the exact polynomial system from several initial estimates.
    IdDemo {
        /// Initial state of `x' = -2x` (default 0.2).
        #[arg(long)]
        x0: Option<f64>,
        /// Adaptation step in seconds (default 1e-4).
        #[arg(long)]
        dt: Option<f64>,
        /// Target settling time in seconds (default 0.12).
        #[arg(long)]
        settling_time: Option<f64>,
        /// Seed for the directions of the initial estimates.
        #[arg(long)]
        seed: Option<u64>,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Print the built-in case-study configuration as JSON.
    PrintConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Nominal,
    Naive,
    Robust,
    RobustAdaptive,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NoiseArg {
    On,
    Off,
    Both,
}

fn regimes(arg: RegimeArg) -> Vec<Regime> {
    match arg {
        RegimeArg::Nominal => vec![Regime::Nominal],
        RegimeArg::Naive => vec![Regime::Naive],
        RegimeArg::Robust => vec![Regime::Robust],
        RegimeArg::RobustAdaptive => vec![Regime::RobustAdaptive],
        RegimeArg::All => Regime::ALL.to_vec(),
    }
}

fn run_label(regime: Regime, noise: bool) -> String {
    if noise {
        format!("{regime}-noisy")
    } else {
        regime.to_string()
    }
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig::paper_case_study()),
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    config: Option<&Path>,
    regime: RegimeArg,
    seed: u64,
    noise: NoiseArg,
    out: &Path,
    dt: Option<f64>,
    horizon: Option<f64>,
    plot: bool,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(dt) = dt {
        cfg.integration.dt = dt;
    }
    if let Some(h) = horizon {
        cfg.integration.horizon = h;
    }
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    let noise_flags: Vec<bool> = match noise {
        NoiseArg::On => vec![true],
        NoiseArg::Off => vec![false],
        NoiseArg::Both => vec![false, true],
    };
    let jobs: Vec<(Regime, bool)> = regimes(regime)
        .into_iter()
        .flat_map(|r| noise_flags.iter().map(move |&n| (r, n)))
        .collect();
    let results: Vec<(String, Result<RunLog>)> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(r, n)| {
                let cfg = &cfg;
                (run_label(r, n), s.spawn(move || run_scenario(cfg, r, seed, n)))
            })
            .collect();
        handles
            .into_iter()
            .map(|(label, h)| (label, h.join().expect("simulation thread panicked")))
            .collect()
    });
    let mut series = Vec::new();
    for (label, res) in results {
        let log = res?;
        let csv = out.join(format!("{label}.csv"));
        let summary = out.join(format!("{label}.summary.json"));
        emit_csv(&log, &csv)?;
        emit_summary(&log, &summary)?;
        let s = &log.summary;
        println!(
            "{label:<22} min_h = {:>9.4} ({}), max |d - d_hat| after T = {:.3e}, bound violations = {}, slack steps = {}, {:.0} ms",
            s.min_h,
            if s.safe { "safe" } else { "UNSAFE" },
            s.max_error_after_settling,
            s.bound_violations,
            s.slack_steps,
            s.wall_clock_ms
        );
        if plot {
            series.push(PlotSeries::from_log(&label, &log));
        }
    }
    if plot {
        for p in emit_plots(&series, &cfg.plot_scene(), out)? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn plot(inputs: &[PathBuf], out: &Path, config: Option<&Path>) -> Result<()> {
    let cfg = load_config(config)?;
    let mut series = Vec::new();
    for path in inputs {
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        series.push(PlotSeries::from_csv(&label, &read_csv(path)?)?);
    }
    for p in emit_plots(&series, &cfg.plot_scene(), out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn id_demo(x0: Option<f64>, dt: Option<f64>, settling_time: Option<f64>, seed: Option<u64>, json: bool) -> Result<()> {
    let mut cfg = IdDemoConfig::default();
    cfg.x0 = x0.unwrap_or(cfg.x0);
    cfg.dt = dt.unwrap_or(cfg.dt);
    cfg.settling_time = settling_time.unwrap_or(cfg.settling_time);
    cfg.seed = seed.unwrap_or(cfg.seed);
    let report = run_id_demo(&cfg)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    println!("x' = -2x on {{1, x, x^2}}, x0 = {}, T = {:.4} s, dt = {:.1e}", cfg.x0, report.settling_time, cfg.dt);
    println!("{:>10} {:>12} {:>12} {:>12} {:>12} {:>10} {:>12}", "|l0|", "|Pe(0)|", "|Pe(T)|", "max t>=T", "threshold", "t_conv", "|e(T)|");
    for c in &report.cases {
        println!(
            "{:>10.1} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>10} {:>12.4e}",
            c.initial_norm,
            c.err0,
            c.err_at_settling,
            c.max_err_after_settling,
            c.threshold,
            c.convergence_time.map_or("none".into(), |t| format!("{t:.4}")),
            c.lambda_err_at_settling
        );
    }
    println!(
        "all within threshold: {}; convergence-time spread: {}; nullspace witness: {}",
        report.all_within_threshold(),
        report.convergence_spread.map_or("n/a".into(), |s| format!("{:.1}%", 100.0 * s)),
        report.nullspace_witness
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Simulate {
            config,
            regime,
            seed,
            noise,
            out,
            dt,
            horizon,
            plot: p,
        } => simulate(config.as_deref(), *regime, *seed, *noise, out, *dt, *horizon, *p),
        Command::Plot { inputs, out, config } => plot(inputs, out, config.as_deref()),
        Command::IdDemo {
            x0,
            dt,
            settling_time,
            seed,
            json,
        } => id_demo(*x0, *dt, *settling_time, *seed, *json),
        Command::PrintConfig => ScenarioConfig::paper_case_study().to_json().map(|s| println!("{s}")),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
