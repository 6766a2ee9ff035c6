//! Minimum-energy temperature profile of the cracking coil.
//!
//! The profile is parameterized by `n_knots` equally spaced knots; the
//! decision variables are the non-negative temperature increments between
//! consecutive knots, so every candidate is monotone by construction. A
//! compass-style pattern search minimizes the specific duty (process heat
//! per kg of ethane fed) with an exterior quadratic penalty on the ethylene
//! yield shortfall. The penalty multiplier is escalated x10 up to 1e6 and a
//! final restoration step pushes the profile back onto the feasible side.
//! Several deterministic starting points are searched concurrently.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::ReactionSystem;
use crate::reactor::{Composition, Reactor, ReactorConfig, SimulationOptions, TemperatureProfile, Trajectory};

/// J per MWh.
const J_PER_MWH: f64 = 3.6e9;
/// kg per (metric) ton.
const KG_PER_TON: f64 = 1000.0;

pub const ENERGY_REPORT_VERSION: u32 = 1;

/// Converts a duty (W) at a given ethylene production rate (kg/s) into
/// MWh per ton of ethylene, dividing by the furnace efficiency.
pub fn energy_per_ton(duty: f64, ethylene_rate: f64, eta: f64) -> Result<f64> {
    if !(ethylene_rate > 0.0) {
        return Err(Error::Domain(format!("ethylene rate must be positive, got {ethylene_rate}")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!("efficiency must lie in (0, 1], got {eta}")));
    }
    Ok(duty / eta / ethylene_rate * KG_PER_TON / J_PER_MWH)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProfileKnot {
    /// m
    pub x: f64,
    /// K
    pub temperature: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnergyResult {
    pub format_version: u32,
    /// Process-side heat, MWh per ton ethylene.
    pub duty_thermal: f64,
    /// MWh per ton ethylene for a fired furnace.
    pub e_conventional: f64,
    /// MWh per ton ethylene for an electrified furnace.
    pub e_electrified: f64,
    pub eta_conventional: f64,
    pub eta_electrified: f64,
    pub ethylene_yield: f64,
    /// W
    pub duty: f64,
    /// kg/s
    pub ethylene_rate: f64,
    /// kg/s
    pub ethane_feed: f64,
    pub residence_time: f64,
    pub min_heat_flux: f64,
    pub profile: Vec<ProfileKnot>,
    pub outlet: Composition,
    pub seed: u64,
    pub best_start: usize,
    pub evaluations: usize,
}

impl EnergyResult {
    pub fn temperature_profile(&self, config: &ReactorConfig) -> Result<TemperatureProfile> {
        TemperatureProfile::new(self.profile.iter().map(|k| (k.x, k.temperature)).collect(), config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.format_version != ENERGY_REPORT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported energy report version {}",
                r.format_version
            )));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerOptions {
    pub n_knots: usize,
    pub starts: usize,
    pub seed: u64,
    /// Initial poll step of the first penalty stage, K.
    pub initial_step: f64,
    /// Initial poll step of the later penalty stages, K.
    pub refine_step: f64,
    pub min_step: f64,
    /// Relative improvement over a full poll cycle below which the step shrinks.
    pub rel_tol: f64,
    pub simulation: SimulationOptions,
    pub parallel: bool,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            n_knots: 14,
            starts: 8,
            seed: 0,
            initial_step: 16.0,
            refine_step: 1.0,
            min_step: 0.01,
            rel_tol: 1e-6,
            simulation: SimulationOptions::default(),
            parallel: true,
        }
    }
}

#[derive(Debug, Clone)]
struct Evaluation {
    /// J per kg ethane fed.
    specific_duty: f64,
    yield_: f64,
    feed: f64,
}

struct Problem<'a> {
    reactor: &'a Reactor,
    opts: &'a OptimizerOptions,
    span: f64,
}

impl Problem<'_> {
    fn feasible(&self, d: &[f64]) -> bool {
        d.iter().all(|v| *v >= 0.0) && d.iter().sum::<f64>() <= self.span * (1.0 + 1e-12)
    }

    fn evaluate(&self, d: &[f64], warm: Option<f64>) -> Result<Evaluation> {
        let profile = TemperatureProfile::from_increments(d, self.reactor.config())?;
        let traj = self.reactor.calibrate_feed(&profile, warm, &self.opts.simulation)?;
        Ok(self.summarize(&traj))
    }

    fn summarize(&self, traj: &Trajectory) -> Evaluation {
        let sys = self.reactor.system();
        let key = sys.key();
        let ethane_kg = traj.inlet().flows[key.ethane] * sys.species()[key.ethane].molar_mass;
        Evaluation {
            specific_duty: traj.duty / ethane_kg,
            yield_: self.reactor.yield_of(traj),
            feed: traj.inlet().total_flow(),
        }
    }

    fn merit(&self, e: &Evaluation, mu: f64) -> f64 {
        // Scaled to MWh per ton of ethane so the multiplier range is meaningful.
        let shortfall = (self.reactor.config().ethylene_yield - e.yield_).max(0.0);
        e.specific_duty * KG_PER_TON / J_PER_MWH + mu * shortfall * shortfall
    }
}

struct SearchOutcome {
    increments: Vec<f64>,
    eval: Evaluation,
    evaluations: usize,
}

fn pattern_search(problem: &Problem, start: Vec<f64>) -> Result<SearchOutcome> {
    let n = start.len();
    let mut directions: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[k] = sign;
            directions.push(d);
        }
    }
    // Moving a single interior knot: shifts increment k into k+1.
    for k in 0..n.saturating_sub(1) {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[k] = sign;
            d[k + 1] = -sign;
            directions.push(d);
        }
    }

    let mut x = start;
    let mut warm = None;
    let mut ex = problem.evaluate(&x, warm)?;
    warm = Some(ex.feed);
    let mut evaluations = 1usize;
    let mut mu = 10.0;
    let mut step0 = problem.opts.initial_step;
    loop {
        let mut step = step0;
        let mut fx = problem.merit(&ex, mu);
        while step >= problem.opts.min_step {
            loop {
                let cycle_start = fx;
                let mut improved = false;
                for dir in &directions {
                    let trial: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a + step * b).collect();
                    if !problem.feasible(&trial) {
                        continue;
                    }
                    let et = problem.evaluate(&trial, warm)?;
                    evaluations += 1;
                    let ft = problem.merit(&et, mu);
                    if ft < fx {
                        x = trial;
                        fx = ft;
                        warm = Some(et.feed);
                        ex = et;
                        improved = true;
                    }
                }
                if !improved || (cycle_start - fx) <= problem.opts.rel_tol * fx.abs() {
                    break;
                }
            }
            step *= 0.5;
        }
        if mu >= 1e6 {
            break;
        }
        mu *= 10.0;
        // Later stages only refine around the current point.
        step0 = problem.opts.refine_step.min(problem.opts.initial_step);
    }
    let (x, ex, extra) = restore_feasibility(problem, x, ex)?;
    Ok(SearchOutcome {
        increments: x,
        eval: ex,
        evaluations: evaluations + extra,
    })
}

/// Blends the increments toward the hottest admissible profile (step to
/// `t_out` at the first knot) until the yield specification is met.
fn restore_feasibility(
    problem: &Problem,
    x: Vec<f64>,
    ex: Evaluation,
) -> Result<(Vec<f64>, Evaluation, usize)> {
    let target = problem.reactor.config().ethylene_yield;
    if ex.yield_ >= target {
        return Ok((x, ex, 0));
    }
    let mut hottest = vec![0.0; x.len()];
    hottest[0] = problem.span;
    let blend = |a: f64| -> Vec<f64> { x.iter().zip(&hottest).map(|(u, v)| u + a * (v - u)).collect() };
    let ehot = problem.evaluate(&hottest, Some(ex.feed))?;
    let mut count = 1;
    if ehot.yield_ < target {
        return Err(Error::Infeasible {
            best_yield: ehot.yield_.max(ex.yield_),
            required: target,
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = (hottest.clone(), ehot);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let cand = blend(mid);
        let e = problem.evaluate(&cand, Some(best.1.feed))?;
        count += 1;
        if e.yield_ >= target {
            hi = mid;
            best = (cand, e);
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok((best.0, best.1, count))
}

fn starting_points(n: usize, span: f64, starts: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(starts);
    // Linear ramp to t_out.
    out.push(vec![span / n as f64; n]);
    for k in 1..starts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let total = span * rng.random_range(0.6..1.0);
        // Front-loaded random shapes: weights decay along the coil.
        let w: Vec<f64> = (0..n)
            .map(|i| rng.random_range(0.05..1.0) * (-(i as f64) * rng.random_range(0.0..0.5)).exp())
            .collect();
        let s: f64 = w.iter().sum();
        out.push(w.iter().map(|v| total * v / s).collect());
    }
    out
}

/// Searches for the minimum-duty temperature profile meeting the yield
/// specification and converts it into per-ton energy demands.
pub fn optimize(
    system: Arc<ReactionSystem>,
    config: &ReactorConfig,
    opts: &OptimizerOptions,
) -> Result<EnergyResult> {
    config.validate()?;
    if opts.n_knots < 3 {
        return Err(Error::Domain(format!("need at least 3 knots, got {}", opts.n_knots)));
    }
    if opts.starts == 0 {
        return Err(Error::Domain("need at least one start".into()));
    }
    let reactor = Reactor::new(system, config.clone())?;
    let n = opts.n_knots - 1;
    let span = config.t_out - config.t_in;
    let problem = Problem {
        reactor: &reactor,
        opts,
        span,
    };

    let outcomes: Vec<Result<SearchOutcome>> = if config.ethylene_yield == 0.0 {
        // No yield requirement: the unheated coil is optimal.
        vec![problem.evaluate(&vec![0.0; n], None).map(|eval| SearchOutcome {
            increments: vec![0.0; n],
            eval,
            evaluations: 1,
        })]
    } else {
        let starts = starting_points(n, span, opts.starts, opts.seed);
        if opts.parallel {
            starts.into_par_iter().map(|s| pattern_search(&problem, s)).collect()
        } else {
            starts.into_iter().map(|s| pattern_search(&problem, s)).collect()
        }
    };

    let mut best: Option<(usize, SearchOutcome)> = None;
    let mut evaluations = 0;
    let mut last_err = None;
    for (idx, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(o) => {
                evaluations += o.evaluations;
                let better = match &best {
                    None => true,
                    Some((_, b)) => o.eval.specific_duty < b.eval.specific_duty,
                };
                if better {
                    best = Some((idx, o));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let (best_start, best) = match best {
        Some(b) => b,
        None => return Err(last_err.expect("at least one start ran")),
    };

    let profile = TemperatureProfile::from_increments(&best.increments, config)?;
    let traj = reactor.calibrate_feed(&profile, Some(best.eval.feed), &SimulationOptions::fine())?;
    let min_q = traj.heat_flux.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_q < 0.0 {
        log::warn!("optimal profile has negative heat flux (min {min_q:.3e} W/m)");
    }
    build_result(&reactor, &profile, &traj, opts.seed, best_start, evaluations)
}

fn build_result(
    reactor: &Reactor,
    profile: &TemperatureProfile,
    traj: &Trajectory,
    seed: u64,
    best_start: usize,
    evaluations: usize,
) -> Result<EnergyResult> {
    let config = reactor.config();
    let sys = reactor.system();
    let key = sys.key();
    let ethylene_rate = traj.outlet().flows[key.ethylene] * sys.species()[key.ethylene].molar_mass;
    let ethane_feed = traj.inlet().flows[key.ethane] * sys.species()[key.ethane].molar_mass;
    let (duty_thermal, e_conventional, e_electrified) = if ethylene_rate > 0.0 {
        (
            energy_per_ton(traj.duty, ethylene_rate, 1.0)?,
            energy_per_ton(traj.duty, ethylene_rate, config.eta_conventional)?,
            energy_per_ton(traj.duty, ethylene_rate, config.eta_electrified)?,
        )
    } else {
        (0.0, 0.0, 0.0)
    };
    Ok(EnergyResult {
        format_version: ENERGY_REPORT_VERSION,
        duty_thermal,
        e_conventional,
        e_electrified,
        eta_conventional: config.eta_conventional,
        eta_electrified: config.eta_electrified,
        ethylene_yield: reactor.yield_of(traj),
        duty: traj.duty,
        ethylene_rate,
        ethane_feed,
        residence_time: traj.residence_time,
        min_heat_flux: traj.heat_flux.iter().cloned().fold(f64::INFINITY, f64::min),
        profile: profile
            .knots()
            .iter()
            .map(|&(x, temperature)| ProfileKnot { x, temperature })
            .collect(),
        outlet: traj.outlet_composition.clone(),
        seed,
        best_start,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_duty_is_zero_energy() {
        assert_eq!(energy_per_ton(0.0, 3.0, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn one_megawatt_at_one_ton_per_hour_is_one_mwh_per_ton() {
        let v = energy_per_ton(1e6, 1000.0 / 3600.0, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn efficiency_ratio_is_exact() {
        let a = energy_per_ton(5e6, 2.0, 0.4).unwrap();
        let b = energy_per_ton(5e6, 2.0, 0.971).unwrap();
        assert!((a / b - 0.971 / 0.4).abs() < 1e-14);
        assert!((0.971f64 / 0.4 - 2.4275).abs() < 1e-14);
    }

    #[test]
    fn bad_rate_or_efficiency_is_domain_error() {
        assert!(energy_per_ton(1.0, 0.0, 0.5).is_err());
        assert!(energy_per_ton(1.0, 1.0, 0.0).is_err());
        assert!(energy_per_ton(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn too_few_knots_rejected() {
        let opts = OptimizerOptions {
            n_knots: 2,
            ..OptimizerOptions::default()
        };
        let r = optimize(Arc::new(ReactionSystem::bundled()), &ReactorConfig::default(), &opts);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn starting_points_are_feasible_and_deterministic() {
        let a = starting_points(13, 200.0, 8, 7);
        let b = starting_points(13, 200.0, 8, 7);
        assert_eq!(a, b);
        for s in &a {
            assert!(s.iter().all(|v| *v >= 0.0));
            assert!(s.iter().sum::<f64>() <= 200.0 + 1e-9);
        }
    }
}
