//! Cross-checks of the coil simulation against a separately written
//! fixed-step integrator and against the balance equations.

use std::sync::Arc;

use crackgrid::kinetics::{ReactionSystem, GAS_CONSTANT};
use crackgrid::reactor::{
    heat_flux, inlet_state, steam_molar_ratio, Reactor, ReactorConfig, ReactorState, SimulationOptions,
    TemperatureProfile, Trajectory,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reactor() -> Reactor {
    Reactor::new(Arc::new(ReactionSystem::bundled()), ReactorConfig::default()).unwrap()
}

// Species order: C2H6 C2H4 C3H8 C3H6 C2H2 C4H6 CH4 H2 H2O.
const MW: [f64; 9] = [
    30.06904e-3, 28.05316e-3, 44.09562e-3, 42.07974e-3, 26.03728e-3, 54.09044e-3, 16.04246e-3, 2.01588e-3,
    18.01528e-3,
];
const CP: [f64; 9] = [
    124.0184, 94.8933, 176.4538, 145.9817, 68.3422, 174.8649, 73.7404, 30.3186, 41.5932,
];

fn k(a: f64, e_kj: f64, t: f64) -> f64 {
    a * (-e_kj * 1000.0 / (8.314 * t)).exp()
}

/// Species derivatives and heat release written out reaction by reaction.
fn oracle_rhs(f: &[f64; 9], t: f64, p: f64, area: f64) -> ([f64; 9], f64) {
    let ft: f64 = f.iter().map(|v| v.max(0.0)).sum();
    let c = |j: usize| f[j].max(0.0) / ft * p / (8.314 * t);
    let (e, y, pr, pe, ac, bd, m, h) = (c(0), c(1), c(2), c(3), c(4), c(5), c(6), c(7));
    let _ = bd;
    let r1 = k(4.65e13, 273.0, t) * e - k(8.49e5, 136.5, t) * y * h;
    let r2 = k(3.85e11, 273.0, t) * e;
    let r3 = k(5.89e10, 215.0, t) * pr;
    let r4 = k(4.69e10, 212.0, t) * pr;
    let r5 = k(7.28e12, 154.0, t) * pe - k(3.81e5, 147.2, t) * ac * m;
    let r6 = k(1.03e6, 173.0, t) * ac * y;
    let r7 = k(6.37e23, 530.0, t) * e;
    let r8 = k(7.08e7, 253.0, t) * e * y;
    let d = [
        -r1 - 2.0 * r2 - 2.0 * r7 - r8,
        r1 + r4 - r6 + r7 - r8,
        r2 - r3 - r4,
        r3 - r5 + r8,
        r5 - r6,
        r6,
        r2 + r4 + r5 + 2.0 * r7 + r8,
        r1 + r3,
        0.0,
    ];
    let dcp = |s: &[(usize, f64)]| s.iter().map(|(j, n)| n * CP[*j]).sum::<f64>();
    let dh = |h0: f64, s: &[(usize, f64)]| h0 * 1000.0 + dcp(s) * (t - 298.0);
    let heat = r1 * -dh(136.33, &[(0, -1.0), (1, 1.0), (7, 1.0)])
        + r2 * -dh(-11.56, &[(0, -2.0), (2, 1.0), (6, 1.0)])
        + r3 * -dh(124.91, &[(2, -1.0), (3, 1.0), (7, 1.0)])
        + r4 * -dh(82.67, &[(2, -1.0), (1, 1.0), (6, 1.0)])
        + r5 * -dh(133.45, &[(3, -1.0), (4, 1.0), (6, 1.0)])
        + r6 * -dh(-171.47, &[(4, -1.0), (1, -1.0), (5, 1.0)])
        + r7 * -dh(71.10, &[(0, -2.0), (1, 1.0), (6, 2.0)])
        + r8 * -dh(-22.98, &[(0, -1.0), (1, -1.0), (3, 1.0), (6, 1.0)]);
    (d.map(|v| v * area), area * heat)
}

/// Classical RK4 over the linear profile, carrying flows and duty.
fn rk4_linear(cfg: &ReactorConfig, inlet: &[f64], steps: usize) -> ([f64; 9], f64) {
    let area = std::f64::consts::PI * cfg.diameter * cfg.diameter / 4.0;
    let slope = (cfg.t_out - cfg.t_in) / cfg.length;
    let deriv = |x: f64, y: &[f64; 10]| -> [f64; 10] {
        let t = cfg.t_in + slope * x;
        let r = (cfg.p_out / cfg.p_in).powi(2);
        let p = cfg.p_in * (1.0 - (x / cfg.length) * (1.0 - r)).max(0.0).sqrt();
        let f: [f64; 9] = y[..9].try_into().unwrap();
        let (d, heat) = oracle_rhs(&f, t, p, area);
        let sensible: f64 = f.iter().zip(CP).map(|(a, b)| a.max(0.0) * b).sum::<f64>() * slope;
        let mut out = [0.0; 10];
        out[..9].copy_from_slice(&d);
        out[9] = sensible - heat;
        out
    };
    let mut y = [0.0; 10];
    y[..9].copy_from_slice(inlet);
    let h = cfg.length / steps as f64;
    let axpy = |y: &[f64; 10], k: &[f64; 10], a: f64| -> [f64; 10] { std::array::from_fn(|i| y[i] + a * k[i]) };
    for n in 0..steps {
        let x = n as f64 * h;
        let k1 = deriv(x, &y);
        let k2 = deriv(x + h / 2.0, &axpy(&y, &k1, h / 2.0));
        let k3 = deriv(x + h / 2.0, &axpy(&y, &k2, h / 2.0));
        let k4 = deriv(x + h, &axpy(&y, &k3, h));
        for i in 0..10 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    (y[..9].try_into().unwrap(), y[9])
}

fn ethylene_mass_fraction(f: &[f64]) -> f64 {
    let mass: f64 = f[..8].iter().zip(MW).map(|(a, b)| a * b).sum();
    f[1] * MW[1] / mass
}

#[test]
fn linear_profile_agrees_with_fixed_step_rk4() {
    let r = reactor();
    let cfg = r.config().clone();
    let profile = TemperatureProfile::linear(&cfg, 2).unwrap();
    let traj = r.simulate(&profile).unwrap();
    let adaptive_steps = traj.stats.accepted;
    let steps = (10 * adaptive_steps).max(100_000);
    let (f, duty) = rk4_linear(&cfg, &traj.inlet().flows, steps);
    let w_ref = ethylene_mass_fraction(&f);
    let w = traj.outlet_composition.mass_fraction("C2H4").unwrap();
    assert!((w - w_ref).abs() <= 1e-6, "{w} vs {w_ref}");
    assert!(((traj.duty - duty) / duty).abs() <= 1e-6, "{} vs {duty}", traj.duty);
}

fn element_flows(f: &[f64]) -> (f64, f64) {
    let c = [2.0, 2.0, 3.0, 3.0, 2.0, 4.0, 1.0, 0.0, 0.0];
    let h = [6.0, 4.0, 8.0, 6.0, 2.0, 6.0, 4.0, 2.0, 2.0];
    f.iter()
        .enumerate()
        .fold((0.0, 0.0), |(a, b), (j, v)| (a + v * c[j], b + v * h[j]))
}

fn sample_profiles() -> Vec<TemperatureProfile> {
    let cfg = ReactorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut out = vec![
        TemperatureProfile::linear(&cfg, 14).unwrap(),
        TemperatureProfile::flat(&cfg, 5).unwrap(),
    ];
    for _ in 0..3 {
        let inc: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..22.0)).collect();
        out.push(TemperatureProfile::from_increments(&inc, &cfg).unwrap());
    }
    out
}

#[test]
fn elements_are_conserved_along_the_coil() {
    let r = reactor();
    for p in sample_profiles() {
        let t = r.simulate_with(&p, &SimulationOptions::fine()).unwrap();
        let (c0, h0) = element_flows(&t.inlet().flows);
        for st in &t.states {
            let (c, h) = element_flows(&st.flows);
            assert!(((c - c0) / c0).abs() <= 1e-8, "carbon drift at x = {}", st.x);
            assert!(((h - h0) / h0).abs() <= 1e-8, "hydrogen drift at x = {}", st.x);
        }
    }
}

#[test]
fn energy_balance_closes() {
    let r = reactor();
    for p in sample_profiles() {
        let t = r.simulate_with(&p, &SimulationOptions::fine()).unwrap();
        let (_, _, recomputed) = r.energy_balance(&p, &t).unwrap();
        assert!(((recomputed - t.duty) / t.duty).abs() <= 1e-6, "{recomputed} vs {}", t.duty);
    }
}

#[test]
fn duty_is_converged_in_the_step_size() {
    let r = reactor();
    let p = TemperatureProfile::linear(r.config(), 14).unwrap();
    let coarse = r.simulate(&p).unwrap();
    let tight = SimulationOptions {
        rtol: 1e-11,
        ..SimulationOptions::default()
    };
    let fine = r.simulate_with(&p, &tight).unwrap();
    assert!(((coarse.duty - fine.duty) / fine.duty).abs() < 1e-6);
}

#[test]
fn heat_flux_samples_satisfy_the_energy_equation() {
    let r = reactor();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = sample_profiles().pop().unwrap();
    let t = r.simulate_with(&p, &SimulationOptions::fine()).unwrap();
    let per_segment = (t.states.len() - 1) / p.segment_count();
    for _ in 0..100 {
        let i = rng.random_range(0..t.states.len());
        let st = &t.states[i];
        // Interior knot samples belong to the segment that ends there.
        let seg = if i == 0 { 0 } else { (i - 1) / per_segment };
        let (x0, t0) = p.knots()[seg];
        let (x1, t1) = p.knots()[seg + 1];
        let q = heat_flux(r.system(), r.config(), st, (t1 - t0) / (x1 - x0)).unwrap();
        let scale = t.heat_flux.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!((q - t.heat_flux[i]).abs() <= 1e-9 * scale, "x = {}", st.x);
    }
}

#[test]
fn residence_time_is_the_velocity_integral() {
    let r = reactor();
    let p = TemperatureProfile::linear(r.config(), 14).unwrap();
    let t = r.simulate_with(&p, &SimulationOptions::fine()).unwrap();
    let area = r.config().area();
    // Composite Simpson over the recorded samples.
    let n = t.states.len() - 1;
    let h = r.config().length / n as f64;
    let tau: f64 = t
        .states
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            w * area * s.pressure / (s.total_flow() * GAS_CONSTANT * s.temperature)
        })
        .sum::<f64>()
        * h
        / 3.0;
    assert!((tau - 0.2).abs() < 1e-6, "{tau}");
    assert!((t.residence_time - 0.2).abs() < 1e-6);
}

#[test]
fn no_reaction_at_zero_kinetics_means_zero_duty() {
    // Flat profile with every prefactor zeroed: nothing happens.
    let mut file: crackgrid::kinetics::KineticsFile = toml::from_str(crackgrid::kinetics::BUNDLED_KINETICS).unwrap();
    for r in &mut file.reactions {
        r.a = 0.0;
        if let Some(a) = r.a_rev.as_mut() {
            *a = 0.0;
        }
    }
    let sys = Arc::new(ReactionSystem::from_file(&file).unwrap());
    let r = Reactor::new(sys, ReactorConfig::default()).unwrap();
    let p = TemperatureProfile::flat(r.config(), 4).unwrap();
    let t = r.simulate(&p).unwrap();
    assert_eq!(t.duty, 0.0);
    assert_eq!(t.outlet().flows, t.inlet().flows);
}

fn synthetic(inlet_ethane: f64, outlet_ethylene: f64) -> Trajectory {
    let sys = ReactionSystem::bundled();
    let cfg = ReactorConfig::default();
    let ratio = steam_molar_ratio(&sys, cfg.steam_ratio);
    let a = inlet_state(&sys, &cfg, inlet_ethane * (1.0 + ratio)).unwrap();
    let mut b: ReactorState = a.clone();
    b.flows[1] = outlet_ethylene;
    Trajectory {
        states: vec![a, b],
        heat_flux: vec![0.0; 2],
        duty: 0.0,
        residence_time: 0.2,
        outlet_composition: crackgrid::reactor::steam_free_composition(&sys, &[0.0; 9]),
        stats: Default::default(),
    }
}

proptest! {
    #[test]
    fn yield_test_matches_outlet_flow_inequality(fe in 0.1f64..100.0, fy in 0.0f64..100.0, y in 0.01f64..0.99) {
        let sys = ReactionSystem::bundled();
        let t = synthetic(fe, fy);
        let lhs = crackgrid::reactor::yield_of(&sys, &t) >= y;
        let rhs = fy >= y * (MW[0] / MW[1]) * t.inlet().flows[0];
        // Skip knife-edge cases where rounding decides.
        let margin = (fy - y * (MW[0] / MW[1]) * t.inlet().flows[0]).abs() / fy.max(1e-300);
        prop_assume!(margin > 1e-12);
        prop_assert_eq!(lhs, rhs);
    }
}
