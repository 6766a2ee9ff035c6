//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. The energy optimization and the default sweep are computed once
//! and shared.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use crackgrid::energy_opt::{optimize, EnergyResult, OptimizerOptions};
use crackgrid::kinetics::ReactionSystem;
use crackgrid::reactor::{Reactor, ReactorConfig, SimulationOptions, TemperatureProfile};
use crackgrid::scenario::{accurate_sum, generate, select, GenerateSpec, ProfileKind, ScenarioSet};
use crackgrid::sched_model::*;
use crackgrid::solver_io::{blocks, solve, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Ctx {
    energy: Option<EnergyResult>,
    energy_seconds: f64,
    scenarios: ScenarioSet,
    /// Sweep results keyed by (mode, level in percent).
    sweep: HashMap<(Mode, i64), Run>,
    sweep_seconds: f64,
}

struct Run {
    config: MicrogridConfig,
    model: ScheduleModel,
    solution: ScheduleSolution,
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn pct(level: f64) -> i64 {
    (level * 100.0).round() as i64
}

fn level_config(energy: &EnergyResult, level: f64) -> MicrogridConfig {
    let base = MicrogridConfig::bundled();
    base.with_demands(derive_demands(&base.plant, level, energy).unwrap())
}

fn energy_or_frozen(ctx: &Ctx) -> EnergyResult {
    ctx.energy.clone().unwrap_or_else(common::energy)
}

// 1, 2 ----------------------------------------------------------------------

fn energy_demand(ctx: &Ctx) -> Outcome {
    let r = ctx.energy.as_ref().ok_or("energy optimization failed")?;
    let (ec, ee) = (r.e_conventional, r.e_electrified);
    let ratio = ec / ee;
    let expected = 0.971 / 0.4;
    let detail = format!(
        "e_conventional {ec:.4}, e_electrified {ee:.4} MWh/t, ratio {ratio:.15}, {:.0} s",
        ctx.energy_seconds
    );
    check((3.84..=4.70).contains(&ec), format!("e_conventional out of range: {detail}"))?;
    check((1.58..=1.93).contains(&ee), format!("e_electrified out of range: {detail}"))?;
    check(((ratio - expected) / expected).abs() <= 4.0 * f64::EPSILON, format!("ratio: {detail}"))?;
    check(ctx.energy_seconds <= 300.0, format!("too slow: {detail}"))?;
    Ok(detail)
}

fn yield_activity(ctx: &Ctx) -> Outcome {
    let r = ctx.energy.as_ref().ok_or("energy optimization failed")?;
    let sys = ReactionSystem::bundled();
    let i = sys.species_index("C2H4").ok_or("no ethylene")?;
    // Mass fraction relative to the ethane fed, from the outlet flows.
    let cfg = ReactorConfig::default();
    let reactor = Reactor::new(Arc::new(sys.clone()), cfg.clone()).map_err(|e| e.to_string())?;
    let traj = reactor
        .simulate(&r.temperature_profile(&cfg).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let j = sys.species_index("C2H6").ok_or("no ethane")?;
    let mw = |k: usize| sys.species()[k].molar_mass;
    let y = traj.outlet().flows[i] * mw(i) / (traj.inlet().flows[j] * mw(j));
    let detail = format!("outlet ethylene {y:.6} kg/kg (report {:.6})", r.ethylene_yield);
    check((y - 0.5).abs() <= 1e-3, detail.clone())?;
    check((r.ethylene_yield - 0.5).abs() <= 1e-3, detail.clone())?;
    Ok(detail)
}

// 3 -------------------------------------------------------------------------

/// Carbon and hydrogen atoms of a formula such as "C2H6".
fn atoms(formula: &str) -> (f64, f64) {
    let (mut c, mut h) = (0.0, 0.0);
    let chars: Vec<char> = formula.chars().collect();
    let mut k = 0;
    while k < chars.len() {
        let el = chars[k];
        k += 1;
        let start = k;
        while k < chars.len() && chars[k].is_ascii_digit() {
            k += 1;
        }
        let n: f64 = if start == k {
            1.0
        } else {
            chars[start..k].iter().collect::<String>().parse().unwrap()
        };
        match el {
            'C' => c += n,
            'H' => h += n,
            _ => {}
        }
    }
    (c, h)
}

fn conservation(ctx: &Ctx) -> Outcome {
    let sys = Arc::new(ReactionSystem::bundled());
    let cfg = ReactorConfig::default();
    let reactor = Reactor::new(sys.clone(), cfg.clone()).map_err(|e| e.to_string())?;
    let counts: Vec<(f64, f64)> = sys.species().iter().map(|s| atoms(&s.name)).collect();
    let elements = |f: &[f64]| {
        f.iter()
            .zip(&counts)
            .fold((0.0, 0.0), |(a, b), (v, (c, h))| (a + v * c, b + v * h))
    };
    let mut profiles = vec![
        TemperatureProfile::linear(&cfg, 14).unwrap(),
        TemperatureProfile::flat(&cfg, 5).unwrap(),
    ];
    if let Some(r) = &ctx.energy {
        profiles.push(r.temperature_profile(&cfg).map_err(|e| e.to_string())?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..4 {
        let inc: Vec<f64> = (0..13).map(|_| rng.random_range(0.0..15.0)).collect();
        profiles.push(TemperatureProfile::from_increments(&inc, &cfg).unwrap());
    }
    let (mut worst_el, mut worst_en) = (0.0f64, 0.0f64);
    for p in &profiles {
        for sim in [SimulationOptions::default(), SimulationOptions::fine()] {
            let t = reactor.simulate_with(p, &sim).map_err(|e| e.to_string())?;
            let (c0, h0) = elements(&t.inlet().flows);
            for s in &t.states {
                let (c, h) = elements(&s.flows);
                worst_el = worst_el.max(((c - c0) / c0).abs()).max(((h - h0) / h0).abs());
            }
            // The quadrature cross-check needs dense samples; two per
            // segment only resolve the element balance.
            if sim.samples_per_segment >= 64 {
                let (_, _, recomputed) = reactor.energy_balance(p, &t).map_err(|e| e.to_string())?;
                worst_en = worst_en.max(((recomputed - t.duty) / t.duty).abs());
            }
            check(t.inlet().pressure == cfg.p_in, format!("inlet pressure {}", t.inlet().pressure))?;
            check(t.outlet().pressure == cfg.p_out, format!("outlet pressure {}", t.outlet().pressure))?;
        }
    }
    let detail = format!(
        "{} trajectories, element drift {worst_el:.2e}, energy closure {worst_en:.2e}, pressure endpoints exact",
        profiles.len() * 2
    );
    check(worst_el <= 1e-8 && worst_en <= 1e-6, detail.clone())?;
    Ok(detail)
}

// 4 -------------------------------------------------------------------------

fn desk_oracle(_: &Ctx) -> Outcome {
    let started = Instant::now();
    let desk = common::Desk::reference();
    let want = desk.enumerate().ok_or("reference desk is infeasible")?;
    let sol = solve(&desk.model(), &opts()).map_err(|e| e.to_string())?;
    let got = sol.objective.ok_or("no objective")?;
    let secs = started.elapsed().as_secs_f64();
    let detail = format!("solve {got} vs enumeration {want}, {:.3} s", secs);
    check(sol.is_optimal() && (got - want).abs() <= 1e-9, detail.clone())?;
    check(secs < 1.0, detail.clone())?;
    Ok(detail)
}

// 5 -------------------------------------------------------------------------

fn decomposition(ctx: &Ctx) -> Outcome {
    let started = Instant::now();
    let energy = energy_or_frozen(ctx);
    let cfg = level_config(&energy, 0.2);
    let joint_model = build(&cfg, &ctx.scenarios, Mode::GridConnected, false).map_err(|e| e.to_string())?;
    let parts = blocks(&joint_model).len();
    check(parts == ctx.scenarios.len(), format!("{parts} independent blocks"))?;
    let joint = solve(&joint_model, &opts()).map_err(|e| e.to_string())?;
    check(joint.is_optimal(), format!("joint status {}", joint.status))?;
    let mut weighted = Vec::new();
    for w in 0..ctx.scenarios.len() {
        let single = ctx.scenarios.single(w).map_err(|e| e.to_string())?;
        let m = build(&cfg, &single, Mode::GridConnected, false).map_err(|e| e.to_string())?;
        let s = solve(&m, &opts()).map_err(|e| e.to_string())?;
        check(s.is_optimal(), format!("scenario {w} status {}", s.status))?;
        weighted.push(ctx.scenarios.scenarios[w].probability * s.objective.unwrap());
    }
    let sum = accurate_sum(weighted);
    let j = joint.objective.unwrap();
    let rel = ((j - sum) / j).abs();
    let secs = started.elapsed().as_secs_f64();
    let detail = format!("joint {j:.6} vs weighted sum {sum:.6}, rel {rel:.1e}, {parts} blocks, {secs:.0} s");
    check(rel <= 1e-6, detail.clone())?;
    check(secs <= 120.0, detail.clone())?;
    Ok(detail)
}

// 6 -------------------------------------------------------------------------

fn islanded_equivalence(ctx: &Ctx) -> Outcome {
    let energy = energy_or_frozen(ctx);
    let level = 0.2;
    let island = ctx
        .sweep
        .get(&(Mode::Islanded, pct(level)))
        .ok_or("islanded run missing")?;
    let mut cfg = level_config(&energy, level);
    cfg.grid.p_max = 0.0;
    let m = build(&cfg, &ctx.scenarios, Mode::GridConnected, false).map_err(|e| e.to_string())?;
    let capped = solve(&m, &opts()).map_err(|e| e.to_string())?;
    let (a, b) = (island.solution.objective.ok_or("islanded has no objective")?, capped.objective.ok_or("capped has no objective")?);
    let rel = ((a - b) / a).abs();
    let detail = format!("level {level}: islanded {a:.6} vs zero grid cap {b:.6}, rel {rel:.1e}");
    check(island.solution.is_optimal() && capped.is_optimal(), detail.clone())?;
    check(rel <= 1e-6, detail.clone())?;
    Ok(detail)
}

// 7 -------------------------------------------------------------------------

fn scenario_toolkit(ctx: &Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_sum = 0.0f64;
    for trial in 0..100 {
        let set = common::random_set(&mut rng, 4);
        let got = select(&set, 2).map_err(|e| e.to_string())?;
        let want = common::brute_force_selection(&set, 2);
        check(got == want, format!("trial {trial}: {got:?} vs brute force {want:?}"))?;
        let reduced = crackgrid::scenario::reduce(&set, 2).map_err(|e| e.to_string())?;
        worst_sum = worst_sum.max((accurate_sum(reduced.probabilities()) - 1.0).abs());
    }
    worst_sum = worst_sum.max((accurate_sum(ctx.scenarios.probabilities()) - 1.0).abs());
    check(worst_sum <= 1e-12, format!("probability sum off by {worst_sum:e}"))?;
    let again = generate(&GenerateSpec::default()).map_err(|e| e.to_string())?;
    check(again == ctx.scenarios, "pipeline not deterministic")?;
    Ok(format!(
        "100/100 selections match brute force, max |sum p - 1| = {worst_sum:.1e}, pipeline deterministic"
    ))
}

// 8 -------------------------------------------------------------------------

fn sweep_feasibility(ctx: &Ctx) -> Outcome {
    let mut lines = Vec::new();
    let mut optimal = 0;
    let mut worst = 0.0f64;
    for mode in [Mode::GridConnected, Mode::Islanded] {
        for level in MicrogridConfig::bundled().plant.levels {
            let run = ctx.sweep.get(&(mode, pct(level))).ok_or("sweep run missing")?;
            let s = &run.solution;
            if !s.is_optimal() {
                lines.push(format!("{mode} {level}: {}", s.status));
                continue;
            }
            optimal += 1;
            let report = validate(&run.model, &s.values).map_err(|e| e.to_string())?;
            worst = worst.max(report.max_residual());
            check(report.is_feasible(), format!("{mode} {level}: rows {:?} violated", report.flagged()))?;
            let bad = logic_violations(&run.model, &run.config, &s.values);
            check(bad.is_empty(), format!("{mode} {level}: {}", bad.join("; ")))?;
        }
    }
    check(ctx.sweep_seconds <= 900.0, format!("sweep took {:.0} s", ctx.sweep_seconds))?;
    let mut detail = format!(
        "{optimal} optimal runs pass residual {worst:.1e} and sequence checks, sweep {:.0} s",
        ctx.sweep_seconds
    );
    if !lines.is_empty() {
        detail += &format!("; not optimal: {}", lines.join(", "));
    }
    Ok(detail)
}

// 9 -------------------------------------------------------------------------

fn monotonicity(ctx: &Ctx) -> Outcome {
    let energy = energy_or_frozen(ctx);
    let mut doubled = ctx.scenarios.clone();
    for s in &mut doubled.scenarios {
        for p in s.profiles.iter_mut().filter(|p| p.kind == ProfileKind::Lmp) {
            p.values.iter_mut().for_each(|v| *v *= 2.0);
        }
    }
    let mut parts = Vec::new();
    for level in [0.0, 0.2, 0.4] {
        let base = ctx
            .sweep
            .get(&(Mode::GridConnected, pct(level)))
            .ok_or("sweep run missing")?;
        let cfg = level_config(&energy, level);
        let m = build(&cfg, &doubled, Mode::GridConnected, false).map_err(|e| e.to_string())?;
        let s = solve(&m, &opts()).map_err(|e| e.to_string())?;
        check(s.is_optimal() && base.solution.is_optimal(), format!("level {level}: not optimal"))?;
        let (hi, lo_bound) = (s.objective.unwrap(), base.solution.bound.unwrap());
        // The doubled optimum may not undercut the proven bound of the original.
        check(hi >= lo_bound, format!("level {level}: doubled {hi} < original bound {lo_bound}"))?;
        parts.push(format!("{level}: {:.2} -> {hi:.2}", base.solution.objective.unwrap()));
    }
    Ok(parts.join(", "))
}

// 10 ------------------------------------------------------------------------

fn cost_trend(ctx: &Ctx) -> Outcome {
    let mut lines = Vec::new();
    for mode in [Mode::GridConnected, Mode::Islanded] {
        let mut costs = Vec::new();
        let mut first_grid = None;
        for level in MicrogridConfig::bundled().plant.levels {
            let run = &ctx.sweep[&(mode, pct(level))];
            let Some(obj) = run.solution.objective.filter(|_| !run.solution.values.is_empty()) else {
                costs.push(format!("{level}: {}", run.solution.status));
                continue;
            };
            let c = cost_breakdown(&run.model, &run.solution, &run.config, &ctx.scenarios).map_err(|e| e.to_string())?;
            let largest = c.terms().iter().cloned().fold(("", f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
            if first_grid.is_none() && largest.0 == "grid" {
                first_grid = Some(level);
            }
            costs.push(format!("{level}: {obj:.0}"));
        }
        lines.push(format!(
            "{mode} [{}], grid dominates from {}",
            costs.join(", "),
            first_grid.map_or("never".into(), |l| l.to_string())
        ));
    }
    Ok(format!("reported only: {}", lines.join("; ")))
}

/// Any committed unit whose marginal cost is below the price and which can
/// raise its output without breaking its bounds or ramps could replace grid
/// purchases. Such a swap may not save more than the proven optimality gap.
fn grid_pricing(ctx: &Ctx) -> Outcome {
    let mut checked = 0;
    let mut priced_out = 0;
    let mut zero = 0;
    for level in MicrogridConfig::bundled().plant.levels {
        let run = &ctx.sweep[&(Mode::GridConnected, pct(level))];
        let s = &run.solution;
        if !s.is_optimal() {
            continue;
        }
        let (m, cfg, x) = (&run.model, &run.config, &s.values);
        let gap = s.objective.unwrap() - s.bound.unwrap() + 1e-9 * s.objective.unwrap().abs();
        let breakeven: Vec<f64> = cfg
            .groups
            .iter()
            .map(|g| g.cost + g.fuel_price / (g.efficiency * g.lhv))
            .collect();
        let cheapest = breakeven.iter().cloned().fold(f64::INFINITY, f64::min);
        for (w, sc) in ctx.scenarios.scenarios.iter().enumerate() {
            let lmp = &sc.profile(ProfileKind::Lmp).unwrap().values;
            let rho = sc.probability;
            for t in 1..=m.hours {
                let price = lmp[t - 1];
                if price <= cheapest {
                    continue;
                }
                priced_out += 1;
                let g = m.value(x, Var::G, t, w);
                if g <= 1e-6 {
                    zero += 1;
                }
                for (i, &grp) in m.unit_groups.iter().enumerate() {
                    let group = &cfg.groups[grp];
                    if price <= breakeven[grp] || m.value(x, Var::XD(i), t, w) < 0.5 {
                        continue;
                    }
                    let p = m.value(x, Var::D(i), t, w);
                    let mut room = group.p_max - p;
                    if let Some(ru) = group.ramp_up {
                        let prev = if t > 1 { m.value(x, Var::D(i), t - 1, w) } else { 0.0 };
                        room = room.min(prev + ru - p);
                    }
                    if let (Some(rd), true) = (group.ramp_down, t < m.hours) {
                        room = room.min(m.value(x, Var::D(i), t + 1, w) + rd - p);
                    }
                    let saving = rho * g.min(room.max(0.0)) * (price - breakeven[grp]);
                    checked += 1;
                    check(
                        saving <= gap,
                        format!(
                            "level {level} scenario {w} hour {t}: grid {g:.4} MW at {price:.1} $/MWh while unit {i} has {room:.4} MW spare"
                        ),
                    )?;
                }
            }
        }
    }
    Ok(format!(
        "{priced_out} scenario-hours priced above local generation, grid zero in {zero}; {checked} committed-unit swaps checked, none beats the gap"
    ))
}

// ---------------------------------------------------------------------------

fn main() {
    let started = Instant::now();
    let t0 = Instant::now();
    let energy = optimize(
        Arc::new(ReactionSystem::bundled()),
        &ReactorConfig::default(),
        &OptimizerOptions::default(),
    );
    let energy_seconds = t0.elapsed().as_secs_f64();
    let energy = match energy {
        Ok(r) => Some(r),
        Err(e) => {
            eprintln!("energy optimization failed: {e}");
            None
        }
    };
    let scenarios = generate(&GenerateSpec::default()).expect("default scenarios");

    let mut ctx = Ctx {
        energy,
        energy_seconds,
        scenarios,
        sweep: HashMap::new(),
        sweep_seconds: 0.0,
    };
    let e = energy_or_frozen(&ctx);
    let t0 = Instant::now();
    for mode in [Mode::GridConnected, Mode::Islanded] {
        for level in MicrogridConfig::bundled().plant.levels {
            let config = level_config(&e, level);
            let model = build(&config, &ctx.scenarios, mode, false).expect("model builds");
            let solution = solve(&model, &opts()).expect("solver runs");
            ctx.sweep.insert(
                (mode, pct(level)),
                Run {
                    config,
                    model,
                    solution,
                },
            );
        }
    }
    ctx.sweep_seconds = t0.elapsed().as_secs_f64();

    let criteria: [(&str, fn(&Ctx) -> Outcome); 11] = [
        ("1 energy demand", energy_demand),
        ("2 yield constraint active", yield_activity),
        ("3 reactor conservation", conservation),
        ("4 MILP enumeration oracle", desk_oracle),
        ("5 scenario decomposition", decomposition),
        ("6 islanded equivalence", islanded_equivalence),
        ("7 scenario toolkit", scenario_toolkit),
        ("8 sweep feasibility and logic", sweep_feasibility),
        ("9 price monotonicity", monotonicity),
        ("10a cost trend", cost_trend),
        ("10b grid pricing condition", grid_pricing),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| f(&ctx))).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS  {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d} [{secs:.1} s]");
            }
        }
    }
    println!("acceptance: {} failed, total {:.0} s", failed, started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
