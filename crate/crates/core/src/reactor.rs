//! Steady-state one-dimensional plug-flow model of a cracking coil.
//!
//! The temperature profile is imposed (piecewise linear in axial position);
//! species balances are integrated along the coil and the heat flux needed
//! to hold that profile is accumulated into the coil duty. Pressure follows
//! the closed-form square-root drop between the inlet and outlet values.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{ReactionSystem, GAS_CONSTANT};
use crate::ode::{Integrator, Method, OdeSystem, Stats};

/// Furnace coil geometry and operating specifications (SI units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReactorConfig {
    /// Coil length, m.
    pub length: f64,
    /// Coil inner diameter, m.
    pub diameter: f64,
    /// Residence time specification, s.
    pub residence_time: f64,
    /// Inlet steam / ethane mass ratio.
    pub steam_ratio: f64,
    /// K
    pub t_in: f64,
    /// K
    pub t_out: f64,
    /// Pa
    pub p_in: f64,
    /// Pa
    pub p_out: f64,
    pub eta_conventional: f64,
    pub eta_electrified: f64,
    /// Required ethylene yield, kg ethylene per kg ethane fed.
    pub ethylene_yield: f64,
}

impl Default for ReactorConfig {
    fn default() -> Self {
        Self {
            length: 100.0,
            diameter: 0.1,
            residence_time: 0.2,
            steam_ratio: 0.3,
            t_in: 650.0 + 273.15,
            t_out: 850.0 + 273.15,
            p_in: 3.03e5,
            p_out: 1.95e5,
            eta_conventional: 0.4,
            eta_electrified: 0.971,
            ethylene_yield: 0.5,
        }
    }
}

impl ReactorConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.length > 0.0) || !(self.diameter > 0.0) {
            return fail("coil length and diameter must be positive");
        }
        if !(self.residence_time > 0.0) {
            return fail("residence time must be positive");
        }
        if !(self.steam_ratio >= 0.0) {
            return fail("steam ratio must be non-negative");
        }
        if !(self.p_out > 0.0 && self.p_out < self.p_in) {
            return fail("pressures must satisfy 0 < p_out < p_in");
        }
        if !(self.t_in > 0.0 && self.t_in < self.t_out) {
            return fail("temperatures must satisfy 0 < t_in < t_out");
        }
        for eta in [self.eta_conventional, self.eta_electrified] {
            if !(eta > 0.0 && eta <= 1.0) {
                return fail("thermal efficiencies must lie in (0, 1]");
            }
        }
        if !(self.ethylene_yield >= 0.0 && self.ethylene_yield < 1.0) {
            return fail("ethylene yield must lie in [0, 1)");
        }
        Ok(())
    }

    /// Coil cross-section, m2.
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.diameter * self.diameter / 4.0
    }
}

/// Closed-form pressure at axial position `x`.
pub fn pressure_at(x: f64, config: &ReactorConfig) -> Result<f64> {
    if !(0.0..=config.length).contains(&x) {
        return Err(Error::Domain(format!(
            "axial position {x} outside [0, {}]",
            config.length
        )));
    }
    Ok(pressure_unchecked(x, config))
}

fn pressure_unchecked(x: f64, config: &ReactorConfig) -> f64 {
    if x == 0.0 {
        return config.p_in;
    }
    if x == config.length {
        return config.p_out;
    }
    let ratio = config.p_out / config.p_in;
    config.p_in * (1.0 - (x / config.length) * (1.0 - ratio * ratio)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactorState {
    /// m
    pub x: f64,
    /// mol/s, ordered like the species table.
    pub flows: Vec<f64>,
    /// K
    pub temperature: f64,
    /// Pa
    pub pressure: f64,
}

impl ReactorState {
    pub fn total_flow(&self) -> f64 {
        self.flows.iter().sum()
    }
}

/// Molar ratio of steam to ethane in the feed for a given mass ratio.
pub fn steam_molar_ratio(system: &ReactionSystem, steam_ratio: f64) -> f64 {
    let key = system.key();
    let sp = system.species();
    steam_ratio * sp[key.ethane].molar_mass / sp[key.steam].molar_mass
}

/// Fresh-feed state at the coil inlet with the given total molar flow.
pub fn inlet_state(
    system: &ReactionSystem,
    config: &ReactorConfig,
    total_flow: f64,
) -> Result<ReactorState> {
    config.validate()?;
    if !(total_flow > 0.0 && total_flow.is_finite()) {
        return Err(Error::Domain(format!("total inlet flow must be positive, got {total_flow}")));
    }
    let key = system.key();
    let ratio = steam_molar_ratio(system, config.steam_ratio);
    let mut flows = vec![0.0; system.species().len()];
    flows[key.ethane] = total_flow / (1.0 + ratio);
    flows[key.steam] = if config.steam_ratio == 0.0 {
        0.0
    } else {
        total_flow - flows[key.ethane]
    };
    Ok(ReactorState {
        x: 0.0,
        flows,
        temperature: config.t_in,
        pressure: config.p_in,
    })
}

/// Axial derivative of the species flows, mol/(s m).
pub fn rhs(system: &ReactionSystem, config: &ReactorConfig, state: &ReactorState) -> Result<Vec<f64>> {
    let rates = system.rates(&state.flows, state.temperature, state.pressure)?;
    let mut out = vec![0.0; state.flows.len()];
    system.production(rates.as_slice(), &mut out);
    let area = config.area();
    out.iter_mut().for_each(|v| *v *= area);
    Ok(out)
}

/// Heat flux into the process, W/m, needed to impose `dtdx` at `state`.
pub fn heat_flux(
    system: &ReactionSystem,
    config: &ReactorConfig,
    state: &ReactorState,
    dtdx: f64,
) -> Result<f64> {
    if !(dtdx >= 0.0) {
        return Err(Error::Domain(format!("temperature gradient must be non-negative, got {dtdx}")));
    }
    let rates = system.rates(&state.flows, state.temperature, state.pressure)?;
    let sensible: f64 = state
        .flows
        .iter()
        .zip(system.species())
        .map(|(f, s)| f * s.cp)
        .sum::<f64>()
        * dtdx;
    Ok(sensible - config.area() * system.reaction_heat(rates.as_slice(), state.temperature))
}

/// Piecewise-linear, non-decreasing coil temperature profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureProfile {
    knots: Vec<(f64, f64)>,
}

impl TemperatureProfile {
    pub fn new(knots: Vec<(f64, f64)>, config: &ReactorConfig) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Domain("a profile needs at least two knots".into()));
        }
        let tol = 1e-9 * config.t_out;
        if knots[0].0 != 0.0 || (knots[knots.len() - 1].0 - config.length).abs() > 1e-12 * config.length {
            return Err(Error::Domain("profile knots must span [0, L]".into()));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Domain("knot positions must be strictly increasing".into()));
        }
        if knots.windows(2).any(|w| w[1].1 < w[0].1) {
            return Err(Error::Domain("temperature must be non-decreasing along the coil".into()));
        }
        if (knots[0].1 - config.t_in).abs() > tol {
            return Err(Error::Domain("profile must start at the inlet temperature".into()));
        }
        if knots[knots.len() - 1].1 > config.t_out + tol {
            return Err(Error::Domain("profile exceeds the outlet temperature bound".into()));
        }
        let mut knots = knots;
        let n = knots.len();
        knots[n - 1].0 = config.length;
        Ok(Self { knots })
    }

    /// Equally spaced knots built from non-negative temperature increments
    /// on top of `t_in`.
    pub fn from_increments(increments: &[f64], config: &ReactorConfig) -> Result<Self> {
        let n = increments.len() + 1;
        let mut t = config.t_in;
        let mut knots = Vec::with_capacity(n);
        knots.push((0.0, t));
        for (k, inc) in increments.iter().enumerate() {
            if !(*inc >= 0.0) {
                return Err(Error::Domain("temperature increments must be non-negative".into()));
            }
            t += inc;
            let x = if k + 2 == n {
                config.length
            } else {
                config.length * (k + 1) as f64 / (n - 1) as f64
            };
            knots.push((x, t.min(config.t_out)));
        }
        Self::new(knots, config)
    }

    pub fn flat(config: &ReactorConfig, n_knots: usize) -> Result<Self> {
        Self::from_increments(&vec![0.0; n_knots.max(2) - 1], config)
    }

    pub fn linear(config: &ReactorConfig, n_knots: usize) -> Result<Self> {
        let n = n_knots.max(2);
        let inc = (config.t_out - config.t_in) / (n - 1) as f64;
        let mut p = Self::from_increments(&vec![inc; n - 1], config)?;
        let last = p.knots.len() - 1;
        p.knots[last].1 = config.t_out;
        Ok(p)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn increments(&self) -> Vec<f64> {
        self.knots.windows(2).map(|w| w[1].1 - w[0].1).collect()
    }

    pub fn segment_count(&self) -> usize {
        self.knots.len() - 1
    }

    fn segment_of(&self, x: f64) -> usize {
        let idx = self.knots.partition_point(|k| k.0 <= x);
        idx.saturating_sub(1).min(self.segment_count() - 1)
    }

    pub fn temperature_at(&self, x: f64) -> f64 {
        let s = self.segment_of(x);
        let (x0, t0) = self.knots[s];
        t0 + self.slope_of_segment(s) * (x - x0)
    }

    /// dT/dx of the segment containing `x` (right-continuous at knots).
    pub fn slope_at(&self, x: f64) -> f64 {
        self.slope_of_segment(self.segment_of(x))
    }

    fn slope_of_segment(&self, s: usize) -> f64 {
        let (x0, t0) = self.knots[s];
        let (x1, t1) = self.knots[s + 1];
        (t1 - t0) / (x1 - x0)
    }
}

/// Steam-free outlet composition.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Composition {
    pub species: Vec<String>,
    pub molar: Vec<f64>,
    pub mass: Vec<f64>,
}

impl Composition {
    pub fn mass_fraction(&self, name: &str) -> Option<f64> {
        self.species.iter().position(|s| s == name).map(|i| self.mass[i])
    }

    pub fn molar_fraction(&self, name: &str) -> Option<f64> {
        self.species.iter().position(|s| s == name).map(|i| self.molar[i])
    }
}

pub fn steam_free_composition(system: &ReactionSystem, flows: &[f64]) -> Composition {
    let steam = system.key().steam;
    let mut species = Vec::new();
    let mut molar = Vec::new();
    let mut mass = Vec::new();
    for (j, (f, s)) in flows.iter().zip(system.species()).enumerate() {
        if j == steam {
            continue;
        }
        species.push(s.name.clone());
        molar.push(*f);
        mass.push(f * s.molar_mass);
    }
    let mt: f64 = molar.iter().sum();
    let ms: f64 = mass.iter().sum();
    if mt > 0.0 {
        molar.iter_mut().for_each(|v| *v /= mt);
        mass.iter_mut().for_each(|v| *v /= ms);
    }
    Composition {
        species,
        molar,
        mass,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<ReactorState>,
    /// W/m at each state.
    pub heat_flux: Vec<f64>,
    /// Process-side duty, integral of q over the coil, W.
    pub duty: f64,
    /// s
    pub residence_time: f64,
    pub outlet_composition: Composition,
    #[serde(skip)]
    pub stats: Stats,
}

impl Trajectory {
    pub fn inlet(&self) -> &ReactorState {
        &self.states[0]
    }

    pub fn outlet(&self) -> &ReactorState {
        self.states.last().expect("trajectory has states")
    }

    /// Writes `x,T,P,q,F_<species>...` rows in SI units.
    pub fn write_csv<W: Write>(&self, system: &ReactionSystem, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["x".to_string(), "T".into(), "P".into(), "q".into()];
        header.extend(system.species().iter().map(|s| format!("F_{}", s.name)));
        w.write_record(&header)?;
        for (s, q) in self.states.iter().zip(&self.heat_flux) {
            let mut row = vec![
                s.x.to_string(),
                s.temperature.to_string(),
                s.pressure.to_string(),
                q.to_string(),
            ];
            row.extend(s.flows.iter().map(|f| f.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub rtol: f64,
    /// Output samples per profile segment; must be even (Simpson checks).
    pub samples_per_segment: usize,
    pub method: Method,
    /// Residence-time fixed-point tolerance, s.
    pub residence_tol: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            samples_per_segment: 2,
            method: Method::Auto,
            residence_tol: 1e-10,
        }
    }
}

impl SimulationOptions {
    pub fn fine() -> Self {
        Self {
            samples_per_segment: 64,
            ..Self::default()
        }
    }
}

/// A coil: kinetics plus configuration.
#[derive(Debug, Clone)]
pub struct Reactor {
    system: Arc<ReactionSystem>,
    config: ReactorConfig,
}

struct SegmentOde<'a> {
    system: &'a ReactionSystem,
    config: &'a ReactorConfig,
    x0: f64,
    t0: f64,
    slope: f64,
    area: f64,
}

impl SegmentOde<'_> {
    const EXTRA: usize = 2;
}

impl OdeSystem for SegmentOde<'_> {
    fn dim(&self) -> usize {
        self.system.species().len() + Self::EXTRA
    }

    fn rhs(&self, x: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let ns = self.system.species().len();
        let mut flows = [0.0; 16];
        let flows = &mut flows[..ns];
        for (f, v) in flows.iter_mut().zip(&y[..ns]) {
            *f = v.max(0.0);
        }
        let t = self.t0 + self.slope * (x - self.x0);
        let p = pressure_unchecked(x.clamp(0.0, self.config.length), self.config);
        let mut rates = [0.0; 16];
        let rates = &mut rates[..self.system.reactions().len()];
        self.system.rates_into(flows, t, p, rates)?;
        self.system.production(rates, &mut dy[..ns]);
        dy[..ns].iter_mut().for_each(|v| *v *= self.area);
        let sensible: f64 = flows
            .iter()
            .zip(self.system.species())
            .map(|(f, s)| f * s.cp)
            .sum::<f64>()
            * self.slope;
        let total: f64 = flows.iter().sum();
        dy[ns] = sensible - self.area * self.system.reaction_heat(rates, t);
        dy[ns + 1] = self.area * p / (total * GAS_CONSTANT * t);
        Ok(())
    }
}

impl Reactor {
    pub fn new(system: Arc<ReactionSystem>, config: ReactorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { system, config })
    }

    pub fn system(&self) -> &ReactionSystem {
        &self.system
    }

    pub fn config(&self) -> &ReactorConfig {
        &self.config
    }

    /// Integrates the coil from a given inlet state without adjusting the
    /// feed rate.
    pub fn simulate_with_inlet(
        &self,
        profile: &TemperatureProfile,
        inlet: &ReactorState,
        opts: &SimulationOptions,
    ) -> Result<Trajectory> {
        if opts.samples_per_segment == 0 || opts.samples_per_segment % 2 != 0 {
            return Err(Error::Domain("samples per segment must be even and positive".into()));
        }
        let ns = self.system.species().len();
        let f_in = inlet.total_flow();
        if !(f_in > 0.0) {
            return Err(Error::DegenerateState("inlet flow is zero".into()));
        }
        let area = self.config.area();
        // Scale for the duty component: sensible heat of the feed across the coil.
        let duty_scale = f_in * 100.0 * (self.config.t_out - self.config.t_in).max(1.0);
        let mut atol = vec![f_in * opts.rtol * 1e-3; ns];
        atol.push(duty_scale * opts.rtol * 1e-3);
        atol.push(self.config.residence_time * opts.rtol * 1e-3);
        let mut integ = Integrator::new(opts.rtol, atol);
        integ.method = opts.method;

        let mut y = inlet.flows.clone();
        y.push(0.0);
        y.push(0.0);
        let mut h = 0.0;
        let mut stats = Stats::default();
        let mut states = Vec::new();
        let mut fluxes = Vec::new();

        let knots = profile.knots();
        for s in 0..profile.segment_count() {
            let (x0, t0) = knots[s];
            let (x1, t1) = knots[s + 1];
            let ode = SegmentOde {
                system: &self.system,
                config: &self.config,
                x0,
                t0,
                slope: (t1 - t0) / (x1 - x0),
                area,
            };
            let record = |x: f64, y: &[f64], states: &mut Vec<ReactorState>, fluxes: &mut Vec<f64>| -> Result<()> {
                let total: f64 = y[..ns].iter().sum();
                if let Some(bad) = y[..ns].iter().find(|v| **v < -1e-12 * total) {
                    return Err(Error::Numerical {
                        x,
                        message: format!("negative molar flow {bad:e} (total {total:e})"),
                    });
                }
                let st = ReactorState {
                    x,
                    flows: y[..ns].iter().map(|v| v.max(0.0)).collect(),
                    temperature: ode.t0 + ode.slope * (x - ode.x0),
                    pressure: pressure_unchecked(x, &self.config),
                };
                let mut dy = vec![0.0; ns + SegmentOde::EXTRA];
                ode.rhs(x, y, &mut dy)?;
                fluxes.push(dy[ns]);
                states.push(st);
                Ok(())
            };
            if s == 0 {
                record(x0, &y, &mut states, &mut fluxes)?;
            }
            let m = opts.samples_per_segment;
            let mut xa = x0;
            for k in 1..=m {
                let xb = if k == m {
                    x1
                } else {
                    x0 + (x1 - x0) * k as f64 / m as f64
                };
                integ.integrate(&ode, xa, xb, &mut y, &mut h, &mut stats)?;
                record(xb, &y, &mut states, &mut fluxes)?;
                xa = xb;
            }
        }
        let outlet = states.last().expect("at least one state");
        let outlet_composition = steam_free_composition(&self.system, &outlet.flows);
        Ok(Trajectory {
            duty: y[ns],
            residence_time: y[ns + 1],
            outlet_composition,
            states,
            heat_flux: fluxes,
            stats,
        })
    }

    /// Residence time of the feed with no reaction at the given total flow.
    fn nonreactive_residence_time(&self, profile: &TemperatureProfile, total_flow: f64) -> f64 {
        // Simpson over each segment.
        let area = self.config.area();
        let mut tau = 0.0;
        for w in profile.knots().windows(2) {
            let (x0, x1) = (w[0].0, w[1].0);
            let m = 16;
            let h = (x1 - x0) / m as f64;
            let f = |x: f64| {
                area * pressure_unchecked(x, &self.config)
                    / (total_flow * GAS_CONSTANT * profile.temperature_at(x.min(x1 - 1e-12 * x1)))
            };
            let mut s = f(x0) + f(x1);
            for k in 1..m {
                let x = x0 + h * k as f64;
                s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
            }
            tau += s * h / 3.0;
        }
        tau
    }

    /// Finds the inlet molar flow whose simulated residence time equals the
    /// specification (secant iteration on log flow). Returns the trajectory
    /// of the converged feed.
    pub fn calibrate_feed(
        &self,
        profile: &TemperatureProfile,
        warm_start: Option<f64>,
        opts: &SimulationOptions,
    ) -> Result<Trajectory> {
        let target = self.config.residence_time;
        let mut u0 = match warm_start {
            Some(f) if f > 0.0 => f.ln(),
            _ => (self.nonreactive_residence_time(profile, 1.0) / target).ln(),
        };
        let eval = |u: f64| -> Result<(f64, Trajectory)> {
            let inlet = inlet_state(&self.system, &self.config, u.exp())?;
            let traj = self.simulate_with_inlet(profile, &inlet, opts)?;
            Ok(((traj.residence_time / target).ln(), traj))
        };
        let (mut g0, mut traj) = eval(u0)?;
        if (traj.residence_time - target).abs() <= opts.residence_tol {
            return Ok(traj);
        }
        // tau scales roughly like 1/F, so the first step assumes slope -1.
        let mut u1 = u0 + g0;
        for _ in 0..50 {
            let (g1, t1) = eval(u1)?;
            traj = t1;
            if (traj.residence_time - target).abs() <= opts.residence_tol {
                return Ok(traj);
            }
            let slope = if (u1 - u0).abs() > 0.0 && (g1 - g0).abs() > 0.0 {
                (g1 - g0) / (u1 - u0)
            } else {
                -1.0
            };
            let slope = if slope < -0.1 { slope } else { -1.0 };
            let next = u1 - g1 / slope;
            u0 = u1;
            g0 = g1;
            u1 = next;
        }
        Err(Error::Config(format!(
            "residence-time fixed point did not converge (last {} s, target {target} s)",
            traj.residence_time
        )))
    }

    /// Simulates the coil under `profile` with the feed rate chosen so the
    /// residence time meets the specification.
    pub fn simulate(&self, profile: &TemperatureProfile) -> Result<Trajectory> {
        self.calibrate_feed(profile, None, &SimulationOptions::default())
    }

    pub fn simulate_with(&self, profile: &TemperatureProfile, opts: &SimulationOptions) -> Result<Trajectory> {
        self.calibrate_feed(profile, None, opts)
    }

    /// Ethylene mass yield, kg ethylene per kg ethane fed.
    pub fn yield_of(&self, trajectory: &Trajectory) -> f64 {
        yield_of(&self.system, trajectory)
    }

    /// Splits the duty into sensible and reaction contributions by Simpson
    /// quadrature over the recorded samples. Returns
    /// `(sensible, reaction_heat, sensible - reaction_heat)` in W.
    pub fn energy_balance(&self, profile: &TemperatureProfile, trajectory: &Trajectory) -> Result<(f64, f64, f64)> {
        let per_segment = (trajectory.states.len() - 1) / profile.segment_count();
        if per_segment * profile.segment_count() + 1 != trajectory.states.len() || per_segment % 2 != 0 {
            return Err(Error::Domain("trajectory sampling is incompatible with Simpson's rule".into()));
        }
        let area = self.config.area();
        let mut sensible = 0.0;
        let mut reaction = 0.0;
        for s in 0..profile.segment_count() {
            let (x0, t0) = profile.knots()[s];
            let (x1, t1) = profile.knots()[s + 1];
            let dtdx = (t1 - t0) / (x1 - x0);
            let h = (x1 - x0) / per_segment as f64;
            for k in 0..=per_segment {
                let st = &trajectory.states[s * per_segment + k];
                let w = if k == 0 || k == per_segment {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                } * h
                    / 3.0;
                let heat_capacity_flow: f64 = st
                    .flows
                    .iter()
                    .zip(self.system.species())
                    .map(|(f, sp)| f * sp.cp)
                    .sum();
                // Temperature at the sample is taken from this segment's line
                // so that knot samples use the correct side.
                let temp = t0 + dtdx * (st.x - x0);
                let rates = self.system.rates(&st.flows, temp, st.pressure)?;
                sensible += w * heat_capacity_flow * dtdx;
                reaction += w * area * self.system.reaction_heat(rates.as_slice(), temp);
            }
        }
        Ok((sensible, reaction, sensible - reaction))
    }
}

pub fn yield_of(system: &ReactionSystem, trajectory: &Trajectory) -> f64 {
    let key = system.key();
    let sp = system.species();
    let fed = trajectory.inlet().flows[key.ethane] * sp[key.ethane].molar_mass;
    if fed <= 0.0 {
        return 0.0;
    }
    trajectory.outlet().flows[key.ethylene] * sp[key.ethylene].molar_mass / fed
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reactor() -> Reactor {
        Reactor::new(Arc::new(ReactionSystem::bundled()), ReactorConfig::default()).unwrap()
    }

    #[test]
    fn pressure_endpoints_are_exact() {
        let c = ReactorConfig::default();
        assert_eq!(pressure_at(0.0, &c).unwrap(), 3.03e5);
        assert_eq!(pressure_at(c.length, &c).unwrap(), 1.95e5);
        assert!(pressure_at(-1e-9, &c).is_err());
        assert!(pressure_at(c.length + 1e-9, &c).is_err());
    }

    #[test]
    fn pressure_is_strictly_decreasing() {
        let c = ReactorConfig::default();
        let mut prev = f64::INFINITY;
        for k in 0..=1000 {
            let p = pressure_at(c.length * k as f64 / 1000.0, &c).unwrap();
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn config_validation_rejects_inverted_pressures() {
        let c = ReactorConfig {
            p_out: 4e5,
            ..ReactorConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn inlet_is_fresh_feed() {
        let sys = ReactionSystem::bundled();
        let st = inlet_state(&sys, &ReactorConfig::default(), 10.0).unwrap();
        let key = sys.key();
        for (j, f) in st.flows.iter().enumerate() {
            if j != key.ethane && j != key.steam {
                assert_eq!(*f, 0.0);
            }
        }
        assert!((st.total_flow() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_steam_ratio_gives_no_steam() {
        let sys = ReactionSystem::bundled();
        let c = ReactorConfig {
            steam_ratio: 0.0,
            ..ReactorConfig::default()
        };
        let st = inlet_state(&sys, &c, 4.0).unwrap();
        assert_eq!(st.flows[sys.key().steam], 0.0);
        assert_eq!(st.flows[sys.key().ethane], 4.0);
    }

    #[test]
    fn steam_is_inert_and_zero_feed_is_still() {
        let sys = ReactionSystem::bundled();
        let c = ReactorConfig::default();
        let mut st = inlet_state(&sys, &c, 5.0).unwrap();
        let d = rhs(&sys, &c, &st).unwrap();
        assert_eq!(d[sys.key().steam], 0.0);
        st.flows.iter_mut().for_each(|f| *f = 0.0);
        st.flows[sys.key().steam] = 1.0;
        assert!(rhs(&sys, &c, &st).unwrap().iter().all(|v| *v == 0.0));
        assert_eq!(heat_flux(&sys, &c, &st, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn endothermic_rates_need_heat_at_zero_gradient() {
        let sys = ReactionSystem::bundled();
        let c = ReactorConfig::default();
        let mut st = inlet_state(&sys, &c, 5.0).unwrap();
        st.temperature = 1100.0;
        assert!(heat_flux(&sys, &c, &st, 0.0).unwrap() > 0.0);
        assert!(heat_flux(&sys, &c, &st, -1.0).is_err());
    }

    #[test]
    fn profile_validation() {
        let c = ReactorConfig::default();
        assert!(TemperatureProfile::new(vec![(0.0, c.t_in), (100.0, c.t_out + 1.0)], &c).is_err());
        assert!(TemperatureProfile::new(vec![(0.0, c.t_in + 1.0), (100.0, c.t_out)], &c).is_err());
        assert!(TemperatureProfile::new(
            vec![(0.0, c.t_in), (50.0, 1000.0), (100.0, 990.0)],
            &c
        )
        .is_err());
        assert!(TemperatureProfile::new(vec![(0.0, c.t_in), (0.0, c.t_in), (100.0, c.t_in)], &c).is_err());
        let p = TemperatureProfile::linear(&c, 14).unwrap();
        assert_eq!(p.knots().len(), 14);
        assert_eq!(p.knots()[13], (100.0, c.t_out));
        assert!((p.temperature_at(50.0) - (c.t_in + c.t_out) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn residence_time_matches_spec() {
        let r = reactor();
        let p = TemperatureProfile::linear(r.config(), 6).unwrap();
        let t = r.simulate(&p).unwrap();
        assert!((t.residence_time - 0.2).abs() < 1e-6);
        let sum: f64 = t.outlet_composition.mass.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_conversion_yield_is_zero() {
        let r = reactor();
        let sys = r.system();
        let inlet = inlet_state(sys, r.config(), 1.0).unwrap();
        let t = Trajectory {
            states: vec![inlet.clone(), inlet],
            heat_flux: vec![0.0, 0.0],
            duty: 0.0,
            residence_time: 0.2,
            outlet_composition: steam_free_composition(sys, &[0.0; 9]),
            stats: Stats::default(),
        };
        assert_eq!(r.yield_of(&t), 0.0);
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let r = reactor();
        let p = TemperatureProfile::linear(r.config(), 3).unwrap();
        let t = r.simulate(&p).unwrap();
        let mut buf = Vec::new();
        t.write_csv(r.system(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "x,T,P,q,F_C2H6,F_C2H4,F_C3H8,F_C3H6,F_C2H2,F_C4H6,F_CH4,F_H2,F_H2O"
        );
        assert_eq!(lines.count(), t.states.len());
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn pressure_at_midpoint() {
        let c = ReactorConfig::default();
        let p = pressure_at(50.0, &c).unwrap();
        assert!(rel(p, 254788.1472910386387) < 1e-14, "{p}");
    }

    #[test]
    fn steam_molar_ratio_from_mass_ratio() {
        let sys = ReactionSystem::bundled();
        assert!(rel(steam_molar_ratio(&sys, 0.3), 0.5007256062631277449) < 1e-14);
    }

    /// Inlet at 1 kg/s ethane.
    fn unit_basis_inlet(sys: &ReactionSystem, c: &ReactorConfig) -> ReactorState {
        let total = (1.0 / 0.03006904) * (1.0 + steam_molar_ratio(sys, c.steam_ratio));
        inlet_state(sys, c, total).unwrap()
    }

    #[test]
    fn inlet_derivatives_match_hand_evaluation() {
        let sys = ReactionSystem::bundled();
        let c = ReactorConfig::default();
        let st = unit_basis_inlet(&sys, &c);
        let d = rhs(&sys, &c, &st).unwrap();
        let expected = [
            -0.003483680437911470887,
            0.003426803110789280251,
            2.837134106083160949e-5,
            0.0,
            0.0,
            0.0,
            2.864063106188644302e-5,
            0.003426668465788752834,
            0.0,
        ];
        for (got, want) in d.iter().zip(expected) {
            if want == 0.0 {
                assert_eq!(*got, 0.0);
            } else {
                assert!(rel(*got, want) < 1e-10, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn inlet_heat_flux_matches_hand_evaluation() {
        let sys = ReactionSystem::bundled();
        let c = ReactorConfig::default();
        let st = unit_basis_inlet(&sys, &c);
        let q = heat_flux(&sys, &c, &st, (c.t_out - c.t_in) / c.length).unwrap();
        assert!(rel(q, 10103.60770108306623) < 1e-10, "{q}");
    }
}
