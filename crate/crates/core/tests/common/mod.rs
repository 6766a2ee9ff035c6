#![allow(dead_code)]

use crackgrid::energy_opt::{EnergyResult, ENERGY_REPORT_VERSION};
use crackgrid::reactor::Composition;
use crackgrid::sched_model::{Family, ScheduleModel, Sense, VarKind};

/// Energy report with the scalars the scheduler reads. The values are the
/// optimizer's defaults result, rounded.
pub fn energy() -> EnergyResult {
    EnergyResult {
        format_version: ENERGY_REPORT_VERSION,
        duty_thermal: 1.8329,
        e_conventional: 4.5822,
        e_electrified: 1.8876,
        eta_conventional: 0.4,
        eta_electrified: 0.971,
        ethylene_yield: 0.5,
        duty: 0.0,
        ethylene_rate: 1.0,
        ethane_feed: 2.0,
        residence_time: 0.2,
        min_heat_flux: 0.0,
        profile: Vec::new(),
        outlet: Composition::default(),
        seed: 0,
        best_start: 0,
        evaluations: 0,
    }
}

/// Two periods, one unit with startup and shutdown costs, the remainder
/// bought from a capped grid.
#[derive(Debug, Clone, Copy)]
pub struct Desk {
    pub demand: [f64; 2],
    pub p_min: f64,
    pub p_max: f64,
    pub grid_cap: f64,
    pub unit_cost: f64,
    pub lmp: [f64; 2],
    pub startup: f64,
    pub shutdown: f64,
}

impl Desk {
    pub fn reference() -> Self {
        Desk {
            demand: [3.0, 8.0],
            p_min: 2.0,
            p_max: 6.0,
            grid_cap: 4.0,
            unit_cost: 30.0,
            lmp: [20.0, 50.0],
            startup: 100.0,
            shutdown: 20.0,
        }
    }

    pub fn model(&self) -> ScheduleModel {
        let mut m = ScheduleModel::new("desk");
        let mut prev_x = None;
        for t in 0..2 {
            let x = m.add_variable("x", vec![t + 1], VarKind::Binary);
            let p = m.add_variable("p", vec![t + 1], VarKind::Continuous);
            let g = m.add_variable("g", vec![t + 1], VarKind::Continuous);
            let su = m.add_variable("su", vec![t + 1], VarKind::Continuous);
            let sd = m.add_variable("sd", vec![t + 1], VarKind::Continuous);
            m.add_cost(p, self.unit_cost);
            m.add_cost(g, self.lmp[t]);
            m.add_cost(su, self.startup);
            m.add_cost(sd, self.shutdown);
            let idx = vec![t + 1];
            m.add_constraint(Family::EcBalance, "balance", idx.clone(), vec![(p, 1.0), (g, 1.0)], Sense::Eq, self.demand[t]);
            m.add_constraint(Family::Grid, "grid_cap", idx.clone(), vec![(g, 1.0)], Sense::Le, self.grid_cap);
            m.add_constraint(Family::Dispatchable, "d_min", idx.clone(), vec![(p, 1.0), (x, -self.p_min)], Sense::Ge, 0.0);
            m.add_constraint(Family::Dispatchable, "d_max", idx.clone(), vec![(p, 1.0), (x, -self.p_max)], Sense::Le, 0.0);
            let mut up = vec![(su, 1.0), (x, -1.0)];
            let mut down = vec![(sd, 1.0), (x, 1.0)];
            if let Some(px) = prev_x {
                up.push((px, 1.0));
                down.push((px, -1.0));
            }
            m.add_constraint(Family::Dispatchable, "startup", idx.clone(), up, Sense::Ge, 0.0);
            m.add_constraint(Family::Dispatchable, "shutdown", idx, down, Sense::Ge, 0.0);
            prev_x = Some(x);
        }
        m
    }

    /// Cheapest cost of one period with the unit on or off, or `None` when
    /// the period cannot be served.
    fn period(&self, t: usize, on: bool) -> Option<f64> {
        let d = self.demand[t];
        if !on {
            return (d <= self.grid_cap).then(|| self.lmp[t] * d);
        }
        // p in [max(p_min, d - cap), min(p_max, d)], cost linear in p.
        let lo = self.p_min.max(d - self.grid_cap);
        let hi = self.p_max.min(d);
        if lo > hi {
            return None;
        }
        let p = if self.unit_cost < self.lmp[t] { hi } else { lo };
        Some(self.unit_cost * p + self.lmp[t] * (d - p))
    }

    /// Enumerates the four commitment patterns.
    pub fn enumerate(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for pattern in [[false, false], [false, true], [true, false], [true, true]] {
            let (Some(a), Some(b)) = (self.period(0, pattern[0]), self.period(1, pattern[1])) else {
                continue;
            };
            let mut cost = a + b;
            let mut prev = false;
            for &on in &pattern {
                if on && !prev {
                    cost += self.startup;
                }
                if !on && prev {
                    cost += self.shutdown;
                }
                prev = on;
            }
            best = Some(best.map_or(cost, |b| b.min(cost)));
        }
        best
    }
}

/// Random one-kind set of `n` scenarios with random probabilities.
pub fn random_set(rng: &mut impl rand::Rng, n: usize) -> crackgrid::scenario::ScenarioSet {
    use crackgrid::scenario::{Profile24, ProfileKind, ScenarioSet, HOURS};
    let profile = |rng: &mut dyn rand::RngCore| {
        let values = (0..HOURS).map(|_| rand::Rng::random_range(rng, 0.0..100.0)).collect();
        Profile24::new(ProfileKind::Lmp, values).unwrap()
    };
    let mut set = ScenarioSet::deterministic(vec![profile(rng)]).unwrap();
    let template = set.scenarios[0].clone();
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    set.scenarios = weights
        .iter()
        .map(|w| crackgrid::scenario::Scenario {
            profiles: vec![profile(rng)],
            probability: w / total,
            ..template.clone()
        })
        .collect();
    set
}

/// Subset of size `k` with the least transport cost, found by trying every
/// subset. Distances are plain Euclidean over the hourly values.
pub fn brute_force_selection(set: &crackgrid::scenario::ScenarioSet, k: usize) -> Vec<usize> {
    let n = set.len();
    let v: Vec<&Vec<f64>> = set.scenarios.iter().map(|s| &s.profiles[0].values).collect();
    let dist = |a: usize, b: usize| v[a].iter().zip(v[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut best = (Vec::new(), f64::INFINITY);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let kept: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let cost: f64 = (0..n)
            .filter(|i| mask & (1 << i) == 0)
            .map(|i| set.scenarios[i].probability * kept.iter().map(|&j| dist(i, j)).fold(f64::INFINITY, f64::min))
            .sum();
        if cost < best.1 {
            best = (kept, cost);
        }
    }
    best.0
}
