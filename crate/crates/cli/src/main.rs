//! Command-line driver: energy optimization, scenario preparation and the
//! electrification sweep.

mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crackgrid::energy_opt::{optimize, EnergyResult, OptimizerOptions};
use crackgrid::error::Error;
use crackgrid::kinetics::ReactionSystem;
use crackgrid::reactor::ReactorConfig;
use crackgrid::scenario::{generate, GenerateSpec, Profile24, ProfileKind, ScenarioSet};
use crackgrid::sched_model::{MicrogridConfig, Mode};
use crackgrid::solver_io::{BackendId, SolverOptions};

use sweep::{ExperimentSpec, ScenarioSource};

#[derive(Parser, Debug)]
#[command(name = "crackgrid", version, about = "Cracker energy demand and microgrid scheduling")]
struct Cli {
    /// Configuration file. `energy` reads a reactor TOML, the other
    /// commands a microgrid TOML. Bundled defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for scenario generation and the optimizer multistart.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Let renewable output be curtailed at no cost.
    #[arg(long, global = true)]
    curtailment: bool,
    /// Operating mode of the microgrid.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    GridConnected,
    Islanded,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::GridConnected => vec![Mode::GridConnected],
            ModeArg::Islanded => vec![Mode::Islanded],
            ModeArg::Both => vec![Mode::GridConnected, Mode::Islanded],
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimize the coil temperature profile and write energy.json.
    Energy(EnergyArgs),
    /// Generate or check a scenario set and write scenarios.json.
    Scenarios(ScenarioArgs),
    /// Solve the scheduling model at each electrification level.
    Sweep(SweepArgs),
    /// Check configuration, input files and optionally a solution.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct EnergyArgs {
    /// Kinetics TOML; the bundled data set by default.
    #[arg(long)]
    kinetics: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    starts: usize,
    #[arg(long, default_value_t = 14)]
    knots: usize,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Existing scenario file to check and copy instead of generating.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Draws per profile kind.
    #[arg(long, default_value_t = 100)]
    draws: usize,
    /// Scenarios kept per kind and after combination.
    #[arg(long, default_value_t = 5)]
    keep: usize,
    #[arg(long)]
    sigma_lmp: Option<f64>,
    #[arg(long)]
    sigma_wind: Option<f64>,
    #[arg(long)]
    sigma_pv: Option<f64>,
    /// Base profile CSVs (hour,value) replacing the bundled ones.
    #[arg(long)]
    lmp: Option<PathBuf>,
    #[arg(long)]
    wind: Option<PathBuf>,
    #[arg(long)]
    pv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Energy report written by `energy`.
    #[arg(long)]
    energy: PathBuf,
    /// Scenario file; generated from the seed with defaults when omitted.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Electrified fractions; the configured list when omitted.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-6)]
    gap: f64,
    /// Seconds per solve.
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Solve the whole model at once instead of block by block.
    #[arg(long)]
    monolithic: bool,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    energy: Option<PathBuf>,
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Solution JSON written by `sweep`; needs --energy, --scenarios and --level.
    #[arg(long)]
    solution: Option<PathBuf>,
    #[arg(long)]
    level: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let infeasible = e
                .downcast_ref::<Error>()
                .is_some_and(|e| matches!(e, Error::Infeasible { .. }));
            ExitCode::from(if infeasible { 2 } else { 1 })
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Energy(a) => cmd_energy(cli, a),
        Command::Scenarios(a) => cmd_scenarios(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
        Command::Validate(a) => cmd_validate(cli, a),
    }
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn reactor_config(path: Option<&Path>) -> Result<ReactorConfig> {
    let cfg: ReactorConfig = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("bad reactor config {}", p.display()))?
        }
        None => ReactorConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn microgrid_config(path: Option<&Path>) -> Result<MicrogridConfig> {
    let cfg = match path {
        Some(p) => MicrogridConfig::read(p).with_context(|| format!("bad microgrid config {}", p.display()))?,
        None => MicrogridConfig::bundled(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn read_energy(path: &Path) -> Result<EnergyResult> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    EnergyResult::from_json(&text).with_context(|| format!("bad energy report {}", path.display()))
}

fn read_scenarios(path: &Path) -> Result<ScenarioSet> {
    ScenarioSet::read(path).with_context(|| format!("bad scenario file {}", path.display()))
}

fn cmd_energy(cli: &Cli, a: &EnergyArgs) -> Result<u8> {
    let cfg = reactor_config(cli.config.as_deref())?;
    let system = match &a.kinetics {
        Some(p) => ReactionSystem::from_path(p)?,
        None => ReactionSystem::bundled(),
    };
    let opts = OptimizerOptions {
        starts: a.starts,
        n_knots: a.knots,
        seed: cli.seed,
        ..Default::default()
    };
    let res = optimize(Arc::new(system), &cfg, &opts)?;
    create_out(&cli.out)?;
    let path = cli.out.join("energy.json");
    std::fs::write(&path, res.to_json()? + "\n")?;
    println!("e_conventional  {:.4} MWh/t", res.e_conventional);
    println!("e_electrified   {:.4} MWh/t", res.e_electrified);
    println!("ethylene yield  {:.6}", res.ethylene_yield);
    info!("wrote {}", path.display());
    Ok(0)
}

fn cmd_scenarios(cli: &Cli, a: &ScenarioArgs) -> Result<u8> {
    let set = match &a.input {
        Some(p) => read_scenarios(p)?,
        None => {
            let mut spec = GenerateSpec {
                seed: cli.seed,
                draws: a.draws,
                keep: a.keep,
                ..GenerateSpec::default()
            };
            for (i, (sigma, base)) in [(a.sigma_lmp, &a.lmp), (a.sigma_wind, &a.wind), (a.sigma_pv, &a.pv)]
                .into_iter()
                .enumerate()
            {
                if let Some(s) = sigma {
                    spec.sigma[i] = s;
                }
                if let Some(p) = base {
                    spec.bases[i] = Profile24::from_csv_path(ProfileKind::ALL[i], p)?;
                }
            }
            generate(&spec)?
        }
    };
    create_out(&cli.out)?;
    let path = cli.out.join("scenarios.json");
    set.write(&path)?;
    for (w, s) in set.scenarios.iter().enumerate() {
        println!("scenario {w}: probability {:.6}", s.probability);
    }
    info!("wrote {} scenarios to {}", set.len(), path.display());
    Ok(0)
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> Result<u8> {
    let config = microgrid_config(cli.config.as_deref())?;
    let energy = read_energy(&a.energy)?;
    let scenarios = match &a.scenarios {
        Some(p) => ScenarioSource::File(p.clone()),
        None => ScenarioSource::Generate(GenerateSpec {
            seed: cli.seed,
            ..GenerateSpec::default()
        }),
    };
    let spec = ExperimentSpec {
        modes: cli.mode.modes(),
        levels: a.levels.clone().unwrap_or_else(|| config.plant.levels.clone()),
        scenarios,
        out: cli.out.clone(),
        curtailment: cli.curtailment,
    };
    let solver = SolverOptions {
        backend: BackendId::from_env()?,
        mip_gap: a.solver.gap,
        time_limit: a.solver.time_limit,
        threads: a.solver.threads,
        seed: cli.seed,
        decompose: !a.solver.monolithic,
        ..Default::default()
    };
    let rows = sweep::run(&spec, &config, &energy, &solver)?;
    println!("{:<15} {:>5} {:>11} {:>14} {:>10}", "mode", "level", "status", "cost $", "CO2e t/h");
    for r in &rows {
        let cost = r.objective.map_or("-".to_string(), |v| format!("{v:.2}"));
        let co2 = r.co2e_per_hour.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!("{:<15} {:>5} {:>11} {:>14} {:>10}", r.mode, r.level, r.status, cost, co2);
    }
    Ok(0)
}

fn cmd_validate(cli: &Cli, a: &ValidateArgs) -> Result<u8> {
    let config = microgrid_config(cli.config.as_deref())?;
    println!("config ok");
    let energy = a.energy.as_deref().map(read_energy).transpose()?;
    if energy.is_some() {
        println!("energy report ok");
    }
    let scenarios = a.scenarios.as_deref().map(read_scenarios).transpose()?;
    if let Some(s) = &scenarios {
        println!("scenario file ok ({} scenarios)", s.len());
    }
    let Some(sol) = &a.solution else {
        return Ok(0);
    };
    let (Some(energy), Some(scenarios), Some(level)) = (energy, scenarios, a.level) else {
        bail!("--solution needs --energy, --scenarios and --level");
    };
    let modes = cli.mode.modes();
    if modes.len() != 1 {
        bail!("--solution needs --mode grid-connected or --mode islanded");
    }
    let check = sweep::check_solution(sol, &config, &energy, &scenarios, level, modes[0], cli.curtailment)?;
    println!("max residual {:.3e}", check.report.max_residual());
    for f in &check.report.families {
        println!("  {:<17} rows {:>6}  max {:.3e}", f.family.tag(), f.rows, f.max_residual);
    }
    for v in &check.logic {
        println!("  {v}");
    }
    if check.report.is_feasible() && check.logic.is_empty() {
        println!("solution feasible");
        Ok(0)
    } else {
        println!("solution violates {} families, {} sequence checks", check.report.flagged().len(), check.logic.len());
        Ok(1)
    }
}
