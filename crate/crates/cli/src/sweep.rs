//! Electrification sweep and its output files.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::Serialize;

use crackgrid::energy_opt::EnergyResult;
use crackgrid::scenario::{accurate_sum, generate, GenerateSpec, ProfileKind, ScenarioSet};
use crackgrid::sched_model::{
    build, cost_breakdown, derive_demands, dispatch_row, emissions, logic_violations, validate, whole_crackers,
    write_dispatch_csv, CostBreakdown, MicrogridConfig, Mode, ResidualReport, ScheduleModel, ScheduleSolution,
    SolutionExport, SolveStatus, Var, DISPATCH_COLUMNS,
};
use crackgrid::solver_io::{solve, SolverOptions};

#[derive(Debug, Clone)]
pub enum ScenarioSource {
    File(PathBuf),
    Generate(GenerateSpec),
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub modes: Vec<Mode>,
    pub levels: Vec<f64>,
    pub scenarios: ScenarioSource,
    pub out: PathBuf,
    pub curtailment: bool,
}

/// One line of summary.csv.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub mode: String,
    pub level: f64,
    pub electrified_crackers: usize,
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub cracker_fuel: Option<f64>,
    pub generator_fuel: Option<f64>,
    pub generation: Option<f64>,
    pub startup: Option<f64>,
    pub shutdown: Option<f64>,
    pub grid: Option<f64>,
    pub fuel_cell: Option<f64>,
    pub electrolyzer: Option<f64>,
    pub h2_storage: Option<f64>,
    pub co2e_per_hour: Option<f64>,
    pub co2e_cracker_ng: Option<f64>,
    pub co2e_dispatchable_fuel: Option<f64>,
    pub co2e_grid: Option<f64>,
    pub ng_cracker_t: Option<f64>,
    pub ng_generator_t: Option<f64>,
    pub grid_mwh: Option<f64>,
}

impl SummaryRow {
    fn empty(mode: Mode, level: f64, crackers: usize, status: SolveStatus) -> Self {
        SummaryRow {
            mode: mode.name().into(),
            level,
            electrified_crackers: crackers,
            status: status.to_string(),
            objective: None,
            bound: None,
            cracker_fuel: None,
            generator_fuel: None,
            generation: None,
            startup: None,
            shutdown: None,
            grid: None,
            fuel_cell: None,
            electrolyzer: None,
            h2_storage: None,
            co2e_per_hour: None,
            co2e_cracker_ng: None,
            co2e_dispatchable_fuel: None,
            co2e_grid: None,
            ng_cracker_t: None,
            ng_generator_t: None,
            grid_mwh: None,
        }
    }

    fn set_costs(&mut self, c: &CostBreakdown) {
        self.cracker_fuel = Some(c.cracker_fuel);
        self.generator_fuel = Some(c.generator_fuel);
        self.generation = Some(c.generation);
        self.startup = Some(c.startup);
        self.shutdown = Some(c.shutdown);
        self.grid = Some(c.grid);
        self.fuel_cell = Some(c.fuel_cell);
        self.electrolyzer = Some(c.electrolyzer);
        self.h2_storage = Some(c.h2_storage);
    }
}

/// Tag used in per-level file names, e.g. `islanded_l30`.
pub fn run_tag(mode: Mode, level: f64) -> String {
    format!("{}_l{:02}", mode.name(), (level * 100.0).round() as i64)
}

/// Writes through a temporary file so readers never see half a file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> crackgrid::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Probability-weighted hourly series of one run, long format.
fn series_lines(out: &mut String, mode: Mode, level: f64, model: &ScheduleModel, config: &MicrogridConfig, sol: &ScheduleSolution, scenarios: &ScenarioSet) -> Result<()> {
    let x = &sol.values;
    let probs = &model.probabilities;
    let em = emissions(model, sol, config, &config.emission_factors)?;
    let lmp: Vec<f64> = (0..model.hours)
        .map(|t| {
            accurate_sum(scenarios.scenarios.iter().map(|s| {
                s.probability * s.profile(ProfileKind::Lmp).map_or(0.0, |p| p.values[t])
            }))
        })
        .collect();
    let charging = model.expected(x, Var::XC);
    let discharging = model.expected(x, Var::XDc);
    for t in 1..=model.hours {
        let rows: Vec<[f64; 16]> = (0..probs.len()).map(|w| dispatch_row(model, config, x, t, w)).collect();
        let mut emit = |name: &str, v: f64| writeln!(out, "{},{:?},{},{},{}", mode.name(), level, t, name, v);
        for (c, name) in DISPATCH_COLUMNS.iter().enumerate() {
            emit(name, accurate_sum(rows.iter().zip(probs).map(|(r, p)| p * r[c])))?;
        }
        emit("ess_charging", charging[t - 1])?;
        emit("ess_discharging", discharging[t - 1])?;
        emit("co2e_t", em.expected_hourly[t - 1].total())?;
        emit("lmp", lmp[t - 1])?;
    }
    Ok(())
}

/// Solves every (mode, level) pair and writes summary.csv, series.csv and
/// per-run dispatch, emission and solution files. Infeasible runs are
/// recorded and skipped.
pub fn run(spec: &ExperimentSpec, config: &MicrogridConfig, energy: &EnergyResult, solver: &SolverOptions) -> Result<Vec<SummaryRow>> {
    if spec.levels.is_empty() || spec.modes.is_empty() {
        bail!("nothing to sweep");
    }
    for &l in &spec.levels {
        whole_crackers(l, config.plant.crackers)?;
    }
    std::fs::create_dir_all(&spec.out).with_context(|| format!("cannot create {}", spec.out.display()))?;
    let scenarios = match &spec.scenarios {
        ScenarioSource::File(p) => ScenarioSet::read(p).with_context(|| format!("bad scenario file {}", p.display()))?,
        ScenarioSource::Generate(g) => generate(g)?,
    };
    write_atomic(&spec.out.join("scenarios.json"), (scenarios.to_json()? + "\n").as_bytes())?;

    let mut rows = Vec::new();
    let mut series = String::from("mode,level,hour,series,value\n");
    for &mode in &spec.modes {
        for &level in &spec.levels {
            let crackers = whole_crackers(level, config.plant.crackers)?;
            let cfg = config.with_demands(derive_demands(&config.plant, level, energy)?);
            let model = build(&cfg, &scenarios, mode, spec.curtailment)?;
            let started = Instant::now();
            let sol = solve(&model, solver)?;
            info!(
                "{mode} level {level}: {} in {:.1} s",
                sol.status,
                started.elapsed().as_secs_f64()
            );
            let mut row = SummaryRow::empty(mode, level, crackers, sol.status);
            if sol.values.is_empty() {
                warn!("{mode} level {level}: no solution ({})", sol.status);
            } else {
                let tag = run_tag(mode, level);
                let costs = cost_breakdown(&model, &sol, &cfg, &scenarios)?;
                let em = emissions(&model, &sol, &cfg, &cfg.emission_factors)?;
                row.objective = sol.objective;
                row.bound = sol.bound;
                row.set_costs(&costs);
                row.co2e_per_hour = Some(em.average_hourly(cfg.dt));
                row.co2e_cracker_ng = Some(em.totals.cracker_ng);
                row.co2e_dispatchable_fuel = Some(em.totals.dispatchable_fuel);
                row.co2e_grid = Some(em.totals.grid);
                let total = |var: Var| accurate_sum(model.expected(&sol.values, var)) * cfg.dt;
                row.ng_cracker_t = Some(total(Var::NgCc));
                row.ng_generator_t = Some(accurate_sum((1..=model.hours).map(|t| {
                    accurate_sum(
                        model
                            .probabilities
                            .iter()
                            .enumerate()
                            .map(|(w, p)| p * dispatch_row(&model, &cfg, &sol.values, t, w)[1]),
                    )
                })) * cfg.dt);
                row.grid_mwh = Some(total(Var::G));
                write_atomic(
                    &spec.out.join(format!("dispatch_{tag}.csv")),
                    &csv_bytes(|b| write_dispatch_csv(&model, &sol, &cfg, b))?,
                )?;
                write_atomic(&spec.out.join(format!("emissions_{tag}.csv")), &csv_bytes(|b| em.write_csv(b))?)?;
                write_atomic(&spec.out.join(format!("solution_{tag}.json")), (sol.to_json(&model)? + "\n").as_bytes())?;
                series_lines(&mut series, mode, level, &model, &cfg, &sol, &scenarios)?;
            }
            rows.push(row);
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r)?;
            }
            write_atomic(&spec.out.join("summary.csv"), &w.into_inner()?)?;
            write_atomic(&spec.out.join("series.csv"), series.as_bytes())?;
        }
    }
    Ok(rows)
}

pub struct SolutionCheck {
    pub report: ResidualReport,
    pub logic: Vec<String>,
}

/// Rebuilds the model of one sweep run and checks a saved solution against it.
pub fn check_solution(
    path: &Path,
    config: &MicrogridConfig,
    energy: &EnergyResult,
    scenarios: &ScenarioSet,
    level: f64,
    mode: Mode,
    curtailment: bool,
) -> Result<SolutionCheck> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let export: SolutionExport = serde_json::from_str(&text).with_context(|| format!("bad solution {}", path.display()))?;
    let cfg = config.with_demands(derive_demands(&config.plant, level, energy)?);
    let model = build(&cfg, scenarios, mode, curtailment)?;
    let by_name: HashMap<&str, f64> = export.variables.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    if by_name.len() != model.variables.len() {
        bail!(
            "solution has {} variables, the rebuilt model {}",
            by_name.len(),
            model.variables.len()
        );
    }
    let values = model
        .variables
        .iter()
        .map(|v| {
            let name = v.name();
            by_name
                .get(name.as_str())
                .copied()
                .with_context(|| format!("solution has no value for {name}"))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SolutionCheck {
        report: validate(&model, &values)?,
        logic: logic_violations(&model, &cfg, &values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_tags_use_whole_percent() {
        assert_eq!(run_tag(Mode::Islanded, 0.3), "islanded_l30");
        assert_eq!(run_tag(Mode::GridConnected, 0.0), "grid-connected_l00");
    }
}
