//! Command-line front end: parses configs, dispatches geometry, solver,
//! Monte Carlo and comparison jobs, manages seeds and output directories,
//! and writes plot-ready CSV plus a manifest for every run.

mod config;
mod runner;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use config::{
    check_single_scenario, ensure_dir, load_set_spec, read_config, resolve_out_dir, BatteryConfig,
    PolarizeConfig, SausageConfig, SausageMethod,
};
use rayon::prelude::*;
use runner::{run_scenario, ScenarioInputs};
use sausage_sym::compare::{summary_csv, SummaryRow, Verdict};
use sausage_sym::geometry::HalfSpace;
use sausage_sym::io::{parse_field, write_field, InitialSpec, ProblemSpec, SetSpec};
use sausage_sym::pde::{solve, ParabolicProblem};
use sausage_sym::stochastic::{hitting_integral, sausage_volume, Driver, PathSpec};
use sausage_sym::util::{fnv1a64, format_f64};
use sausage_sym::GridField;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sausage-sym",
    about = "Symmetrization workbench: polarization, exterior heat problems, Wiener sausages",
    after_help = "Exit codes: 0 = all verdicts hold (possibly within tolerance), \
                  2 = some verdict violated, 1 = operational error.\n\
                  The SAUSAGE_SYM_OUT environment variable overrides --out."
)]
struct Cli {
    /// Seed override for stochastic runs
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default ./out; SAUSAGE_SYM_OUT overrides)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Re-run non-clean scenarios on the (h/2, dt/2, delta/2) ladder
    #[arg(long, global = true)]
    refine: bool,
    /// Worker threads for batteries and path sampling
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Polarize a set across a half-space and write the resulting raster
    Polarize {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve an exterior problem; writes per-time field rasters and a CSV
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimate the expected sausage volume (stamp and/or hitting integral)
    Sausage {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a single comparison scenario
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a battery of scenarios and write a summary CSV
    Battery {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(worst) => match worst {
            Verdict::Violated => ExitCode::from(2),
            _ => ExitCode::SUCCESS,
        },
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Verdict> {
    let out_dir = resolve_out_dir(cli.out.clone());
    ensure_dir(&out_dir)?;
    let (name, config_path) = match &cli.command {
        Command::Polarize { config } => ("polarize", config),
        Command::Solve { config } => ("solve", config),
        Command::Sausage { config } => ("sausage", config),
        Command::Check { config } => ("check", config),
        Command::Battery { config } => ("battery", config),
    };
    let config_text = read_config(config_path)?;
    let config_hash = fnv1a64(config_text.as_bytes());
    write_manifest(&out_dir, name, config_path, &config_text, config_hash, &cli)?;
    let base = config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    match &cli.command {
        Command::Polarize { .. } => {
            cmd_polarize(&config_text, &base, &out_dir)?;
            Ok(Verdict::Holds)
        }
        Command::Solve { .. } => {
            cmd_solve(&config_text, &base, &out_dir)?;
            Ok(Verdict::Holds)
        }
        Command::Sausage { .. } => {
            cmd_sausage(&config_text, &base, &out_dir, cli.seed, cli.refine)?;
            Ok(Verdict::Holds)
        }
        Command::Check { .. } | Command::Battery { .. } => {
            let mut battery = BatteryConfig::parse(&config_text)
                .map_err(|e| anyhow!("{}: {e}", config_path.display()))?;
            if matches!(cli.command, Command::Check { .. }) {
                check_single_scenario(&battery)?;
            }
            if let Some(seed) = cli.seed {
                battery.seed = seed;
            }
            cmd_battery(&battery, &base, &out_dir, config_hash, cli.refine)
        }
    }
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    config_path: &Path,
    config_text: &str,
    config_hash: u64,
    cli: &Cli,
) -> Result<()> {
    let manifest = format!(
        "command {command}\nconfig {}\nconfig_hash fnv1a64:{config_hash:016x}\nseed {}\nrefine {}\njobs {}\nout {}\n",
        config_path.display(),
        cli.seed.map_or("from-config".to_string(), |s| s.to_string()),
        cli.refine,
        cli.jobs.map_or("default".to_string(), |j| j.to_string()),
        out_dir.display(),
    );
    std::fs::write(out_dir.join("manifest.txt"), manifest)
        .with_context(|| format!("cannot write manifest in {}", out_dir.display()))?;
    std::fs::write(out_dir.join("config_echo.txt"), config_text)
        .with_context(|| format!("cannot echo config in {}", out_dir.display()))?;
    Ok(())
}

fn cmd_polarize(config_text: &str, base: &Path, out_dir: &Path) -> Result<()> {
    let cfg = PolarizeConfig::parse(config_text).map_err(|e| anyhow!("polarize config: {e}"))?;
    let set = load_set_spec(base, &cfg.set_path)?
        .rasterize()
        .map_err(|e| anyhow!("set {}: {e}", cfg.set_path))?;
    let (nu, c) = &cfg.halfspace;
    let hs = HalfSpace::new(nu, *c)?;
    let polarized = set.polarize(&hs)?;
    std::fs::write(
        out_dir.join("polarized.set"),
        SetSpec::serialize(&polarized),
    )?;
    println!(
        "polarized {} cells across {}; wrote {}",
        polarized.cell_count(),
        hs.describe(),
        out_dir.join("polarized.set").display()
    );
    Ok(())
}

fn cmd_solve(config_text: &str, base: &Path, out_dir: &Path) -> Result<()> {
    let spec = ProblemSpec::parse(config_text).map_err(|e| anyhow!("problem file: {e}"))?;
    let set = load_set_spec(base, &spec.set)?
        .rasterize()
        .map_err(|e| anyhow!("set {}: {e}", spec.set))?;
    let grid = *set.grid();
    let initial = match &spec.initial {
        InitialSpec::Zero | InitialSpec::Indicator => GridField::indicator(&set),
        InitialSpec::Raster(path) => {
            let text = std::fs::read_to_string(base.join(path))
                .with_context(|| format!("cannot read initial raster {path}"))?;
            let (field, _) = parse_field(&text).map_err(|e| anyhow!("{path}: {e}"))?;
            field
        }
    };
    let operator = spec.operator.to_operator(grid.dim())?;
    let dt = spec.dt.resolve(grid.spacing());
    let mut problem = ParabolicProblem::new(set, initial, operator, spec.horizon, dt)?;
    if let Some(leak) = spec.leak_tol {
        problem = problem.with_leak_tol(leak);
    }
    let sol = solve(&problem, &spec.sample_times)?;

    let mut csv = String::from("t,mass,residual_max,shell_leak\n");
    let mut prev_t = 0.0;
    for (i, &t) in spec.sample_times.iter().enumerate() {
        let field = &sol.fields()[i];
        std::fs::write(
            out_dir.join(format!("field_t{i}.txt")),
            write_field(field, t),
        )?;
        let window: Vec<_> = sol
            .diagnostics
            .iter()
            .filter(|d| d.time > prev_t - 1e-12 && d.time <= t + 1e-12)
            .collect();
        let residual_max = window
            .iter()
            .map(|d| d.relative_residual)
            .fold(0.0f64, f64::max);
        let shell_leak = window.last().map_or(0.0, |d| d.shell_leak);
        csv.push_str(&format!(
            "{},{},{},{}\n",
            format_f64(t),
            format_f64(field.integral()),
            format_f64(residual_max),
            format_f64(shell_leak),
        ));
        prev_t = t;
    }
    std::fs::write(out_dir.join("solve.csv"), csv)?;
    println!(
        "solved ({:?}): {} sample times written to {}",
        sol.scheme,
        spec.sample_times.len(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_sausage(
    config_text: &str,
    base: &Path,
    out_dir: &Path,
    seed_flag: Option<u64>,
    refine: bool,
) -> Result<()> {
    let mut cfg = SausageConfig::parse(config_text).map_err(|e| anyhow!("sausage config: {e}"))?;
    if let Some(seed) = seed_flag {
        cfg.seed = seed;
    }
    let set_spec = load_set_spec(base, &cfg.set_path)?;
    let mut csv = String::from("method,T,delta,n_paths,mean,ci_half_width,seed\n");
    run_sausage_rows(&cfg, &set_spec, "", &mut csv, out_dir)?;
    if refine {
        let mut fine = cfg.clone();
        fine.delta /= 2.0;
        run_sausage_rows(&fine, &set_spec.refined(), "_refined", &mut csv, out_dir)?;
    }
    std::fs::write(out_dir.join("sausage.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn run_sausage_rows(
    cfg: &SausageConfig,
    set_spec: &SetSpec,
    suffix: &str,
    csv: &mut String,
    out_dir: &Path,
) -> Result<()> {
    let set = set_spec
        .rasterize()
        .map_err(|e| anyhow!("set {}: {e}", cfg.set_path))?;
    let spec = PathSpec::new(
        set.grid().dim(),
        cfg.horizon,
        cfg.delta,
        Driver::Standard,
        cfg.seed,
        cfg.scheme,
    )?;
    let mut row = |method: &str, mean: f64, ci: f64| {
        csv.push_str(&format!(
            "{method}{suffix},{},{},{},{},{},{}\n",
            format_f64(cfg.horizon),
            format_f64(cfg.delta),
            cfg.n_paths,
            format_f64(mean),
            format_f64(ci),
            cfg.seed,
        ));
    };
    if matches!(cfg.method, SausageMethod::Stamp | SausageMethod::Both) {
        let est = sausage_volume(&spec, &set, cfg.n_paths)?;
        row("stamp", est.mean, est.half_width_95);
    }
    if matches!(cfg.method, SausageMethod::Hitting | SausageMethod::Both) {
        let out = hitting_integral(&spec, &set, cfg.horizon, cfg.n_paths, true)?;
        row(
            "hitting_integral",
            out.integral.mean,
            out.integral.half_width_95,
        );
        if cfg.field_raster {
            std::fs::write(
                out_dir.join(format!("hitting_field{suffix}.txt")),
                write_field(&out.field, cfg.horizon),
            )?;
        }
    }
    Ok(())
}

fn cmd_battery(
    battery: &BatteryConfig,
    base: &Path,
    out_dir: &Path,
    config_hash: u64,
    refine: bool,
) -> Result<Verdict> {
    let inputs: Vec<ScenarioInputs> = battery
        .scenarios
        .iter()
        .map(|sc| {
            Ok(ScenarioInputs {
                scenario: sc.clone(),
                set_spec: load_set_spec(base, &sc.set_path)?,
                dt: battery.dt.clone(),
                seed: battery.seed,
                config_hash,
            })
        })
        .collect::<Result<_>>()?;

    let outcomes: Vec<_> = inputs
        .par_iter()
        .map(|inp| run_scenario(inp).map(|o| (inp, o)))
        .collect::<Result<_>>()?;

    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut worst = Verdict::Holds;
    let mut ladder: Vec<ScenarioInputs> = Vec::new();
    for (inp, outcome) in &outcomes {
        for (rel, contents) in &outcome.files {
            let path = out_dir.join(rel);
            if let Some(parent) = path.parent() {
                ensure_dir(parent)?;
            }
            std::fs::write(&path, contents)?;
        }
        rows.extend(outcome.rows.iter().cloned());
        worst = worst.worst(outcome.verdict);
        if refine && outcome.verdict != Verdict::Holds {
            ladder.push(inp.refined());
        }
    }
    // the refinement ladder distinguishes discretization artifacts from
    // genuine failures; it never changes the base verdict
    for inp in &ladder {
        let outcome = run_scenario(inp)?;
        for (rel, contents) in &outcome.files {
            let path = out_dir.join(rel);
            if let Some(parent) = path.parent() {
                ensure_dir(parent)?;
            }
            std::fs::write(&path, contents)?;
        }
        rows.extend(outcome.rows);
    }

    let summary = summary_csv(&rows);
    std::fs::write(out_dir.join("summary.csv"), &summary)?;
    print!("{summary}");
    Ok(worst)
}
