//! Scenario-based unit-commitment model of the ethylene-plant microgrid.
//!
//! Every decision is indexed by hour and scenario; scenarios share no
//! constraint, so the expected cost separates into one block per scenario.
//! Variables are non-negative (binaries in {0, 1}) and every other bound is
//! an explicit row of its constraint family.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::energy_opt::EnergyResult;
use crate::error::{Error, Result};
use crate::scenario::{accurate_sum, ProfileKind, ScenarioSet, HOURS};

pub const BUNDLED_MICROGRID: &str = include_str!("../data/microgrid.toml");

/// Absolute residual above which a row counts as violated.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

pub const SOLUTION_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    GridConnected,
    Islanded,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::GridConnected => "grid-connected",
            Mode::Islanded => "islanded",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid-connected" | "grid" => Ok(Mode::GridConnected),
            "islanded" | "island" => Ok(Mode::Islanded),
            other => Err(Error::Parse(format!("unknown mode '{other}'"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fuel {
    NaturalGas,
    Hydrogen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuelConfig {
    /// MWh/ton
    pub lhv_ng: f64,
    pub lhv_h2: f64,
    pub lhv_ch4: f64,
    /// Natural gas burnt in conventional crackers, $/ton.
    pub ng_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationConfig {
    /// CH4 mass fraction of the CH4/H2 byproduct.
    pub f_ch4: f64,
    pub r_ch4: f64,
    pub r_h2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydrogenConfig {
    /// Storage capacity, ton.
    pub capacity: f64,
    pub start: f64,
    /// $/ton held per period.
    pub storage_cost: f64,
    /// ton/h
    pub electrolyzer_capacity: f64,
    pub electrolyzer_efficiency: f64,
    /// MWh/ton at zero loss.
    pub electrolysis_energy: f64,
    /// $/ton produced.
    pub electrolyzer_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuelCellConfig {
    pub efficiency: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// $/MWh
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub p_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EssConfig {
    /// MWh
    pub capacity: f64,
    pub start: f64,
    pub charge_min: f64,
    pub charge_max: f64,
    pub discharge_min: f64,
    pub discharge_max: f64,
    pub min_charge_hours: usize,
    pub min_discharge_hours: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorGroup {
    pub name: String,
    pub fuel: Fuel,
    pub units: usize,
    pub efficiency: f64,
    /// MWh/ton
    pub lhv: f64,
    /// $/ton
    pub fuel_price: f64,
    /// $/MWh
    pub cost: f64,
    /// $ per start.
    pub startup_cost: f64,
    /// $ per stop.
    pub shutdown_cost: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// MW/h; `None` means no ramp limit.
    #[serde(default)]
    pub ramp_up: Option<f64>,
    #[serde(default)]
    pub ramp_down: Option<f64>,
    /// h; `None` means no minimum.
    #[serde(default)]
    pub min_up: Option<usize>,
    #[serde(default)]
    pub min_down: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    /// ton ethylene per year.
    pub capacity: f64,
    pub crackers: usize,
    pub hours_per_year: f64,
    /// Ethylene mass fraction at the coil outlet.
    pub ethylene_yield: f64,
    /// CH4 and H2 mass fractions at the coil outlet.
    pub w_ch4: f64,
    pub w_h2: f64,
    /// Electrified fractions studied by the sweep.
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionFactors {
    /// ton CO2e per ton natural gas.
    pub ng: f64,
    /// ton CO2e per MWh from the grid.
    pub grid: f64,
}

impl EmissionFactors {
    pub fn validate(&self) -> Result<()> {
        if !(self.ng >= 0.0 && self.grid >= 0.0) {
            return Err(Error::Domain(format!(
                "emission factors must be non-negative, got ng {} and grid {}",
                self.ng, self.grid
            )));
        }
        Ok(())
    }
}

/// Furnace demands for one electrification level.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demands {
    /// MW of fuel for the conventional crackers.
    pub p_cc: f64,
    /// MW of electricity for the electrified crackers.
    pub p_ec: f64,
    /// ton/h of CH4/H2 byproduct.
    pub byproduct_cc: f64,
    pub byproduct_ec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrogridConfig {
    /// h
    pub dt: f64,
    pub fuel: FuelConfig,
    pub separation: SeparationConfig,
    pub hydrogen: HydrogenConfig,
    pub fuel_cell: FuelCellConfig,
    pub grid: GridConfig,
    pub ess: EssConfig,
    pub groups: Vec<GeneratorGroup>,
    pub plant: PlantConfig,
    pub emission_factors: EmissionFactors,
    #[serde(default)]
    pub demand: Demands,
}

impl Default for MicrogridConfig {
    fn default() -> Self {
        Self::bundled()
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be non-negative, got {v}")))
    }
}

fn efficiency(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")))
    }
}

fn ordered(name: &str, lo: f64, hi: f64) -> Result<()> {
    if lo <= hi {
        Ok(())
    } else {
        Err(Error::Config(format!("{name}: lower bound {lo} exceeds upper bound {hi}")))
    }
}

impl MicrogridConfig {
    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED_MICROGRID).expect("bundled microgrid config is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt)?;
        let f = &self.fuel;
        positive("fuel.lhv_ng", f.lhv_ng)?;
        positive("fuel.lhv_h2", f.lhv_h2)?;
        positive("fuel.lhv_ch4", f.lhv_ch4)?;
        non_negative("fuel.ng_price", f.ng_price)?;
        let s = &self.separation;
        efficiency("separation.f_ch4", s.f_ch4)?;
        efficiency("separation.r_ch4", s.r_ch4)?;
        efficiency("separation.r_h2", s.r_h2)?;
        let h = &self.hydrogen;
        positive("hydrogen.capacity", h.capacity)?;
        non_negative("hydrogen.start", h.start)?;
        ordered("hydrogen.start", h.start, h.capacity)?;
        non_negative("hydrogen.storage_cost", h.storage_cost)?;
        positive("hydrogen.electrolyzer_capacity", h.electrolyzer_capacity)?;
        efficiency("hydrogen.electrolyzer_efficiency", h.electrolyzer_efficiency)?;
        positive("hydrogen.electrolysis_energy", h.electrolysis_energy)?;
        non_negative("hydrogen.electrolyzer_cost", h.electrolyzer_cost)?;
        let c = &self.fuel_cell;
        efficiency("fuel_cell.efficiency", c.efficiency)?;
        non_negative("fuel_cell.p_min", c.p_min)?;
        positive("fuel_cell.p_max", c.p_max)?;
        ordered("fuel_cell power", c.p_min, c.p_max)?;
        non_negative("fuel_cell.cost", c.cost)?;
        non_negative("grid.p_max", self.grid.p_max)?;
        let e = &self.ess;
        positive("ess.capacity", e.capacity)?;
        non_negative("ess.start", e.start)?;
        ordered("ess.start", e.start, e.capacity)?;
        non_negative("ess.charge_min", e.charge_min)?;
        positive("ess.charge_max", e.charge_max)?;
        ordered("ess charge power", e.charge_min, e.charge_max)?;
        non_negative("ess.discharge_min", e.discharge_min)?;
        positive("ess.discharge_max", e.discharge_max)?;
        ordered("ess discharge power", e.discharge_min, e.discharge_max)?;
        for g in &self.groups {
            let n = |field: &str| format!("groups.{}.{field}", g.name);
            if g.units == 0 {
                return Err(Error::Config(format!("{} must be at least 1", n("units"))));
            }
            efficiency(&n("efficiency"), g.efficiency)?;
            positive(&n("lhv"), g.lhv)?;
            non_negative(&n("fuel_price"), g.fuel_price)?;
            non_negative(&n("cost"), g.cost)?;
            non_negative(&n("startup_cost"), g.startup_cost)?;
            non_negative(&n("shutdown_cost"), g.shutdown_cost)?;
            non_negative(&n("p_min"), g.p_min)?;
            positive(&n("p_max"), g.p_max)?;
            ordered(&n("power"), g.p_min, g.p_max)?;
            for (field, v) in [("ramp_up", g.ramp_up), ("ramp_down", g.ramp_down)] {
                if let Some(v) = v {
                    positive(&n(field), v)?;
                }
            }
            for (field, v) in [("min_up", g.min_up), ("min_down", g.min_down)] {
                if v == Some(0) {
                    return Err(Error::Config(format!("{} must be at least 1 h", n(field))));
                }
            }
        }
        let p = &self.plant;
        positive("plant.capacity", p.capacity)?;
        if p.crackers == 0 {
            return Err(Error::Config("plant.crackers must be at least 1".into()));
        }
        positive("plant.hours_per_year", p.hours_per_year)?;
        efficiency("plant.ethylene_yield", p.ethylene_yield)?;
        non_negative("plant.w_ch4", p.w_ch4)?;
        non_negative("plant.w_h2", p.w_h2)?;
        for &level in &p.levels {
            whole_crackers(level, p.crackers)?;
        }
        self.emission_factors.validate().map_err(|e| Error::Config(e.to_string()))?;
        let d = &self.demand;
        non_negative("demand.p_cc", d.p_cc)?;
        non_negative("demand.p_ec", d.p_ec)?;
        non_negative("demand.byproduct_cc", d.byproduct_cc)?;
        non_negative("demand.byproduct_ec", d.byproduct_ec)?;
        Ok(())
    }

    pub fn unit_count(&self) -> usize {
        self.groups.iter().map(|g| g.units).sum()
    }

    /// Group index of every unit, in unit order.
    pub fn unit_groups(&self) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .flat_map(|(g, grp)| std::iter::repeat_n(g, grp.units))
            .collect()
    }

    pub fn with_demands(&self, demand: Demands) -> Self {
        Self {
            demand,
            ..self.clone()
        }
    }
}

/// Number of electrified crackers for a fraction, or an error if the
/// fraction does not correspond to whole crackers.
pub fn whole_crackers(fraction: f64, crackers: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Domain(format!("electrified fraction {fraction} outside [0, 1]")));
    }
    let n = fraction * crackers as f64;
    let k = n.round();
    if (n - k).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "electrified fraction {fraction} is not a whole number of the {crackers} crackers"
        )));
    }
    Ok(k as usize)
}

/// Furnace power and byproduct flows for a plant with `fraction` of its
/// crackers electrified.
pub fn derive_demands(plant: &PlantConfig, fraction: f64, energy: &EnergyResult) -> Result<Demands> {
    let k = whole_crackers(fraction, plant.crackers)?;
    let total = plant.capacity / plant.hours_per_year;
    let ec = total * k as f64 / plant.crackers as f64;
    let cc = total - ec;
    let by = (plant.w_ch4 + plant.w_h2) / plant.ethylene_yield;
    Ok(Demands {
        p_cc: energy.e_conventional * cc,
        p_ec: energy.e_electrified * ec,
        byproduct_cc: by * cc,
        byproduct_ec: by * ec,
    })
}

// ---------------------------------------------------------------------------
// Model

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    CcBalance,
    EcBalance,
    Separation,
    H2Storage,
    Electrolyzer,
    FuelCell,
    Grid,
    NonDispatchable,
    Dispatchable,
    Ess,
}

impl Family {
    pub const ALL: [Family; 10] = [
        Family::CcBalance,
        Family::EcBalance,
        Family::Separation,
        Family::H2Storage,
        Family::Electrolyzer,
        Family::FuelCell,
        Family::Grid,
        Family::NonDispatchable,
        Family::Dispatchable,
        Family::Ess,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Family::CcBalance => "cc-balance",
            Family::EcBalance => "ec-balance",
            Family::Separation => "separation",
            Family::H2Storage => "h2-storage",
            Family::Electrolyzer => "electrolyzer",
            Family::FuelCell => "fuel-cell",
            Family::Grid => "grid",
            Family::NonDispatchable => "non-dispatchable",
            Family::Dispatchable => "dispatchable",
            Family::Ess => "ess",
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| Error::Parse(format!("unknown constraint family '{s}'")))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Scheduling quantities. Group- and unit-indexed entries carry their index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// Natural gas to conventional crackers, ton/h.
    NgCc,
    /// CH4/H2 byproduct sent to separation, ton/h.
    CcSep,
    EcSep,
    Ch4SepCc,
    H2SepCc,
    H2SepHs,
    H2SepFc,
    H2HsFc,
    H2HsCc,
    /// H2 inventory, ton.
    Hs,
    ElFc,
    ElCc,
    ElHs,
    /// Electrolyzer H2 output, ton/h.
    El,
    DEc(usize),
    DEl(usize),
    DEss(usize),
    DGroup(usize),
    GEc,
    GEl,
    GEss,
    G,
    NdEc,
    NdEl,
    NdEss,
    /// Curtailed renewable power, only with curtailment enabled.
    Curtail,
    EssEc,
    EssEl,
    FcEc,
    FcEss,
    Fc,
    EssC,
    EssDc,
    /// Stored energy, MWh.
    Ess,
    /// Unit output, MW.
    D(usize),
    /// Unit fuel, ton/h.
    FD(usize),
    XFc,
    XC,
    XDc,
    XD(usize),
    Su(usize),
    Sd(usize),
}

impl Var {
    fn symbol(self) -> &'static str {
        match self {
            Var::NgCc => "F_NG_CC",
            Var::CcSep => "F_CC_sep",
            Var::EcSep => "F_EC_sep",
            Var::Ch4SepCc => "F_CH4_sep_CC",
            Var::H2SepCc => "F_H2_sep_CC",
            Var::H2SepHs => "F_H2_sep_HS",
            Var::H2SepFc => "F_H2_sep_FC",
            Var::H2HsFc => "F_H2_HS_FC",
            Var::H2HsCc => "F_H2_HS_CC",
            Var::Hs => "M_HS",
            Var::ElFc => "F_EL_FC",
            Var::ElCc => "F_EL_CC",
            Var::ElHs => "F_EL_HS",
            Var::El => "F_EL",
            Var::DEc(_) => "P_D_EC",
            Var::DEl(_) => "P_D_EL",
            Var::DEss(_) => "P_D_ESS",
            Var::DGroup(_) => "P_D_grp",
            Var::GEc => "P_G_EC",
            Var::GEl => "P_G_EL",
            Var::GEss => "P_G_ESS",
            Var::G => "P_G",
            Var::NdEc => "P_ND_EC",
            Var::NdEl => "P_ND_EL",
            Var::NdEss => "P_ND_ESS",
            Var::Curtail => "P_ND_curt",
            Var::EssEc => "P_ESS_EC",
            Var::EssEl => "P_ESS_EL",
            Var::FcEc => "P_FC_EC",
            Var::FcEss => "P_FC_ESS",
            Var::Fc => "P_FC",
            Var::EssC => "P_ESS_C",
            Var::EssDc => "P_ESS_DC",
            Var::Ess => "E_ESS",
            Var::D(_) => "P_D",
            Var::FD(_) => "F_D",
            Var::XFc => "x_FC",
            Var::XC => "x_C",
            Var::XDc => "x_DC",
            Var::XD(_) => "x_D",
            Var::Su(_) => "su",
            Var::Sd(_) => "sd",
        }
    }

    fn entity(self) -> Option<usize> {
        match self {
            Var::DEc(g) | Var::DEl(g) | Var::DEss(g) | Var::DGroup(g) => Some(g),
            Var::D(i) | Var::FD(i) | Var::XD(i) | Var::Su(i) | Var::Sd(i) => Some(i),
            _ => None,
        }
    }

    fn kind(self) -> VarKind {
        match self {
            Var::XFc | Var::XC | Var::XDc | Var::XD(_) => VarKind::Binary,
            _ => VarKind::Continuous,
        }
    }
}

/// Hour `t` is 1-based; scenario `w` is 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarKey {
    pub var: Var,
    pub t: usize,
    pub w: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub symbol: String,
    pub index: Vec<usize>,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

impl Variable {
    pub fn name(&self) -> String {
        indexed_name(&self.symbol, &self.index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub family: Family,
    pub label: String,
    pub index: Vec<usize>,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn name(&self) -> String {
        indexed_name(&self.label, &self.index)
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        accurate_sum(self.terms.iter().map(|&(j, a)| a * values[j]))
    }

    /// Amount by which the row is violated, zero when satisfied.
    pub fn residual(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

fn indexed_name(base: &str, index: &[usize]) -> String {
    if index.is_empty() {
        return base.to_string();
    }
    let parts: Vec<String> = index.iter().map(|i| i.to_string()).collect();
    format!("{base}[{}]", parts.join(","))
}

/// A mixed-integer linear program, minimized.
#[derive(Debug, Clone, Default)]
pub struct ScheduleModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    /// Scenario probabilities; empty for models not built from scenarios.
    pub probabilities: Vec<f64>,
    pub hours: usize,
    /// Group of each dispatchable unit.
    pub unit_groups: Vec<usize>,
    pub mode: Option<Mode>,
    index: HashMap<VarKey, usize>,
}

impl ScheduleModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn add_variable(&mut self, symbol: impl Into<String>, index: Vec<usize>, kind: VarKind) -> usize {
        let upper = match kind {
            VarKind::Binary => 1.0,
            VarKind::Continuous => f64::INFINITY,
        };
        self.add_bounded_variable(symbol, index, kind, 0.0, upper)
    }

    pub fn add_bounded_variable(
        &mut self,
        symbol: impl Into<String>,
        index: Vec<usize>,
        kind: VarKind,
        lower: f64,
        upper: f64,
    ) -> usize {
        self.variables.push(Variable {
            symbol: symbol.into(),
            index,
            kind,
            lower,
            upper,
        });
        self.objective.push(0.0);
        self.variables.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        family: Family,
        label: impl Into<String>,
        index: Vec<usize>,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            family,
            label: label.into(),
            index,
            terms,
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn add_cost(&mut self, var: usize, c: f64) {
        self.objective[var] += c;
    }

    pub fn scenario_count(&self) -> usize {
        self.probabilities.len()
    }

    pub fn binary_count(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn family_rows(&self, family: Family) -> usize {
        self.constraints.iter().filter(|c| c.family == family).count()
    }

    pub fn var(&self, var: Var, t: usize, w: usize) -> Option<usize> {
        self.index.get(&VarKey { var, t, w }).copied()
    }

    /// Value of a scheduling quantity, zero if the model does not carry it.
    pub fn value(&self, values: &[f64], var: Var, t: usize, w: usize) -> f64 {
        self.var(var, t, w).map_or(0.0, |j| values[j])
    }

    /// Probability-weighted hourly series of a quantity.
    pub fn expected(&self, values: &[f64], var: Var) -> Vec<f64> {
        (1..=self.hours)
            .map(|t| {
                accurate_sum(
                    self.probabilities
                        .iter()
                        .enumerate()
                        .map(|(w, &p)| p * self.value(values, var, t, w)),
                )
            })
            .collect()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_offset + accurate_sum(self.objective.iter().zip(values).map(|(c, v)| c * v))
    }

    /// Variables that appear neither in a row nor in the objective.
    pub fn unreferenced(&self) -> Vec<usize> {
        let mut used: Vec<bool> = self.objective.iter().map(|&c| c != 0.0).collect();
        for row in &self.constraints {
            for &(j, _) in &row.terms {
                used[j] = true;
            }
        }
        used.iter().enumerate().filter(|(_, u)| !**u).map(|(j, _)| j).collect()
    }

    fn key_var(&mut self, var: Var, t: usize, w: usize) -> usize {
        let mut index = Vec::with_capacity(3);
        index.extend(var.entity());
        index.push(t);
        index.push(w);
        let j = self.add_variable(var.symbol(), index, var.kind());
        self.index.insert(VarKey { var, t, w }, j);
        j
    }
}

struct Hourly {
    lmp: Vec<f64>,
    renewable: Vec<f64>,
}

fn scenario_inputs(scenarios: &ScenarioSet) -> Result<Vec<Hourly>> {
    scenarios
        .scenarios
        .iter()
        .enumerate()
        .map(|(w, s)| {
            let get = |kind: ProfileKind| {
                s.profile(kind)
                    .map(|p| p.values.clone())
                    .ok_or_else(|| Error::Config(format!("scenario {w} has no {kind} profile")))
            };
            let (lmp, wind, pv) = (get(ProfileKind::Lmp)?, get(ProfileKind::Wind)?, get(ProfileKind::Pv)?);
            Ok(Hourly {
                lmp,
                renewable: wind.iter().zip(&pv).map(|(a, b)| a + b).collect(),
            })
        })
        .collect()
}

/// Assembles the scheduling MILP for the demands stored in `config`.
pub fn build(config: &MicrogridConfig, scenarios: &ScenarioSet, mode: Mode, curtailment: bool) -> Result<ScheduleModel> {
    config.validate()?;
    if scenarios.is_empty() {
        return Err(Error::Domain("scenario set is empty".into()));
    }
    scenarios.validate()?;
    let inputs = scenario_inputs(scenarios)?;
    let units = config.unit_groups();
    let ng = config.groups.len();
    let dt = config.dt;
    let grid_cap = match mode {
        Mode::GridConnected => config.grid.p_max,
        Mode::Islanded => 0.0,
    };

    let mut m = ScheduleModel::new(format!("microgrid-{}", mode.name()));
    m.probabilities = scenarios.probabilities();
    m.hours = HOURS;
    m.unit_groups = units.clone();
    m.mode = Some(mode);

    let (fu, sep, h2, fc, ess, dem) = (
        &config.fuel,
        &config.separation,
        &config.hydrogen,
        &config.fuel_cell,
        &config.ess,
        &config.demand,
    );

    for (w, input) in inputs.iter().enumerate() {
        let rho = m.probabilities[w];
        // Columns of this scenario block, hour by hour.
        let mut cols: Vec<HashMap<Var, usize>> = vec![HashMap::new()];
        for t in 1..=HOURS {
            let mut vars = vec![
                Var::NgCc,
                Var::CcSep,
                Var::EcSep,
                Var::Ch4SepCc,
                Var::H2SepCc,
                Var::H2SepHs,
                Var::H2SepFc,
                Var::H2HsFc,
                Var::H2HsCc,
                Var::Hs,
                Var::ElFc,
                Var::ElCc,
                Var::ElHs,
                Var::El,
            ];
            for g in 0..ng {
                vars.extend([Var::DEc(g), Var::DEl(g), Var::DEss(g), Var::DGroup(g)]);
            }
            vars.extend([Var::GEc, Var::GEl, Var::GEss, Var::G, Var::NdEc, Var::NdEl, Var::NdEss]);
            if curtailment {
                vars.push(Var::Curtail);
            }
            vars.extend([
                Var::EssEc,
                Var::EssEl,
                Var::FcEc,
                Var::FcEss,
                Var::Fc,
                Var::EssC,
                Var::EssDc,
                Var::Ess,
                Var::XFc,
                Var::XC,
                Var::XDc,
            ]);
            for i in 0..units.len() {
                vars.extend([Var::D(i), Var::FD(i), Var::XD(i), Var::Su(i), Var::Sd(i)]);
            }
            cols.push(vars.into_iter().map(|v| (v, m.key_var(v, t, w))).collect());
        }
        let at = |v: Var, t: usize| cols[t][&v];
        let idx = |t: usize| vec![t, w];
        let uidx = |i: usize, t: usize| vec![i, t, w];

        for t in 1..=HOURS {
            let c = |v: Var| at(v, t);

            // Costs.
            let mut cost = vec![(c(Var::NgCc), fu.ng_price * dt)];
            for (i, &g) in units.iter().enumerate() {
                let grp = &config.groups[g];
                cost.extend([
                    (c(Var::FD(i)), grp.fuel_price * dt),
                    (c(Var::D(i)), grp.cost),
                    (c(Var::Su(i)), grp.startup_cost),
                    (c(Var::Sd(i)), grp.shutdown_cost),
                ]);
            }
            cost.extend([
                (c(Var::G), input.lmp[t - 1]),
                (c(Var::Fc), fc.cost),
                (c(Var::El), h2.electrolyzer_cost * dt),
                (c(Var::Hs), h2.storage_cost),
            ]);
            for (j, v) in cost {
                m.add_cost(j, rho * v);
            }

            // Conventional cracker fuel balance.
            m.add_constraint(
                Family::CcBalance,
                "cc_power",
                idx(t),
                vec![
                    (c(Var::NgCc), fu.lhv_ng),
                    (c(Var::Ch4SepCc), fu.lhv_ch4),
                    (c(Var::H2SepCc), fu.lhv_h2),
                    (c(Var::ElCc), fu.lhv_h2),
                    (c(Var::H2HsCc), fu.lhv_h2),
                ],
                Sense::Eq,
                dem.p_cc,
            );

            // Electrified cracker power balance.
            let mut terms: Vec<(usize, f64)> = (0..ng).map(|g| (c(Var::DEc(g)), 1.0)).collect();
            terms.extend([Var::NdEc, Var::GEc, Var::EssEc, Var::FcEc].map(|v| (c(v), 1.0)));
            m.add_constraint(Family::EcBalance, "ec_power", idx(t), terms, Sense::Eq, dem.p_ec);

            // Byproduct separation.
            m.add_constraint(
                Family::Separation,
                "cc_sep_cap",
                idx(t),
                vec![(c(Var::CcSep), 1.0)],
                Sense::Le,
                dem.byproduct_cc,
            );
            m.add_constraint(
                Family::Separation,
                "ec_sep_cap",
                idx(t),
                vec![(c(Var::EcSep), 1.0)],
                Sense::Le,
                dem.byproduct_ec,
            );
            let a = sep.r_ch4 * sep.f_ch4;
            m.add_constraint(
                Family::Separation,
                "ch4_recovery",
                idx(t),
                vec![(c(Var::Ch4SepCc), 1.0), (c(Var::CcSep), -a), (c(Var::EcSep), -a)],
                Sense::Eq,
                0.0,
            );
            let b = sep.r_h2 * (1.0 - sep.f_ch4);
            m.add_constraint(
                Family::Separation,
                "h2_recovery",
                idx(t),
                vec![
                    (c(Var::H2SepCc), 1.0),
                    (c(Var::H2SepHs), 1.0),
                    (c(Var::H2SepFc), 1.0),
                    (c(Var::CcSep), -b),
                    (c(Var::EcSep), -b),
                ],
                Sense::Eq,
                0.0,
            );

            // Hydrogen storage.
            let mut terms = vec![
                (c(Var::Hs), 1.0),
                (c(Var::H2SepHs), -dt),
                (c(Var::ElHs), -dt),
                (c(Var::H2HsFc), dt),
                (c(Var::H2HsCc), dt),
            ];
            let rhs = if t == 1 {
                h2.start
            } else {
                terms.push((at(Var::Hs, t - 1), -1.0));
                0.0
            };
            m.add_constraint(Family::H2Storage, "h2_inventory", idx(t), terms, Sense::Eq, rhs);
            m.add_constraint(
                Family::H2Storage,
                "el_split",
                idx(t),
                vec![(c(Var::ElFc), 1.0), (c(Var::ElHs), 1.0), (c(Var::ElCc), 1.0), (c(Var::El), -1.0)],
                Sense::Eq,
                0.0,
            );
            m.add_constraint(
                Family::H2Storage,
                "h2_capacity",
                idx(t),
                vec![(c(Var::Hs), 1.0)],
                Sense::Le,
                h2.capacity,
            );

            // Electrolyzer.
            let k = h2.electrolyzer_efficiency / h2.electrolysis_energy;
            let mut terms = vec![(c(Var::El), 1.0)];
            terms.extend((0..ng).map(|g| (c(Var::DEl(g)), -k)));
            terms.extend([Var::NdEl, Var::GEl, Var::EssEl].map(|v| (c(v), -k)));
            m.add_constraint(Family::Electrolyzer, "el_output", idx(t), terms, Sense::Eq, 0.0);
            m.add_constraint(
                Family::Electrolyzer,
                "el_capacity",
                idx(t),
                vec![(c(Var::El), 1.0)],
                Sense::Le,
                h2.electrolyzer_capacity,
            );

            // Fuel cell.
            let k = fc.efficiency * fu.lhv_h2;
            m.add_constraint(
                Family::FuelCell,
                "fc_output",
                idx(t),
                vec![(c(Var::Fc), 1.0), (c(Var::H2HsFc), -k), (c(Var::ElFc), -k), (c(Var::H2SepFc), -k)],
                Sense::Eq,
                0.0,
            );
            m.add_constraint(
                Family::FuelCell,
                "fc_min",
                idx(t),
                vec![(c(Var::Fc), 1.0), (c(Var::XFc), -fc.p_min)],
                Sense::Ge,
                0.0,
            );
            m.add_constraint(
                Family::FuelCell,
                "fc_max",
                idx(t),
                vec![(c(Var::Fc), 1.0), (c(Var::XFc), -fc.p_max)],
                Sense::Le,
                0.0,
            );
            m.add_constraint(
                Family::FuelCell,
                "fc_split",
                idx(t),
                vec![(c(Var::Fc), 1.0), (c(Var::FcEc), -1.0), (c(Var::FcEss), -1.0)],
                Sense::Eq,
                0.0,
            );

            // Grid.
            m.add_constraint(
                Family::Grid,
                "grid_split",
                idx(t),
                vec![(c(Var::G), 1.0), (c(Var::GEss), -1.0), (c(Var::GEc), -1.0), (c(Var::GEl), -1.0)],
                Sense::Eq,
                0.0,
            );
            m.add_constraint(Family::Grid, "grid_cap", idx(t), vec![(c(Var::G), 1.0)], Sense::Le, grid_cap);

            // Renewables.
            let mut terms: Vec<(usize, f64)> = [Var::NdEss, Var::NdEc, Var::NdEl].map(|v| (c(v), 1.0)).to_vec();
            if curtailment {
                terms.push((c(Var::Curtail), 1.0));
            }
            m.add_constraint(
                Family::NonDispatchable,
                "nd_split",
                idx(t),
                terms,
                Sense::Eq,
                input.renewable[t - 1],
            );

            // Dispatchable units.
            for (i, &g) in units.iter().enumerate() {
                let grp = &config.groups[g];
                let d = c(Var::D(i));
                let x = c(Var::XD(i));
                m.add_constraint(
                    Family::Dispatchable,
                    "d_fuel",
                    uidx(i, t),
                    vec![(d, 1.0), (c(Var::FD(i)), -grp.efficiency * grp.lhv)],
                    Sense::Eq,
                    0.0,
                );
                m.add_constraint(
                    Family::Dispatchable,
                    "d_min",
                    uidx(i, t),
                    vec![(d, 1.0), (x, -grp.p_min)],
                    Sense::Ge,
                    0.0,
                );
                m.add_constraint(
                    Family::Dispatchable,
                    "d_max",
                    uidx(i, t),
                    vec![(d, 1.0), (x, -grp.p_max)],
                    Sense::Le,
                    0.0,
                );
                // Units are off with zero output before the horizon.
                let prev_d = (t > 1).then(|| at(Var::D(i), t - 1));
                let prev_x = (t > 1).then(|| at(Var::XD(i), t - 1));
                if let Some(ru) = grp.ramp_up {
                    let mut terms = vec![(d, 1.0)];
                    terms.extend(prev_d.map(|p| (p, -1.0)));
                    m.add_constraint(Family::Dispatchable, "ramp_up", uidx(i, t), terms, Sense::Le, ru);
                }
                if let Some(rd) = grp.ramp_down {
                    let mut terms = vec![(d, -1.0)];
                    terms.extend(prev_d.map(|p| (p, 1.0)));
                    m.add_constraint(Family::Dispatchable, "ramp_down", uidx(i, t), terms, Sense::Le, rd);
                }
                if let Some(ut) = grp.min_up {
                    for tau in t + 1..=HOURS.min(t + ut - 1) {
                        let mut terms = vec![(at(Var::XD(i), tau), 1.0), (x, -1.0)];
                        terms.extend(prev_x.map(|p| (p, 1.0)));
                        m.add_constraint(Family::Dispatchable, "min_up", vec![i, t, tau, w], terms, Sense::Ge, 0.0);
                    }
                }
                if let Some(dt_min) = grp.min_down {
                    for tau in t + 1..=HOURS.min(t + dt_min - 1) {
                        let mut terms = vec![(at(Var::XD(i), tau), -1.0), (x, 1.0)];
                        terms.extend(prev_x.map(|p| (p, -1.0)));
                        m.add_constraint(
                            Family::Dispatchable,
                            "min_down",
                            vec![i, t, tau, w],
                            terms,
                            Sense::Ge,
                            -1.0,
                        );
                    }
                }
                let mut terms = vec![(c(Var::Su(i)), 1.0), (x, -1.0)];
                terms.extend(prev_x.map(|p| (p, 1.0)));
                m.add_constraint(Family::Dispatchable, "startup", uidx(i, t), terms, Sense::Ge, 0.0);
                let mut terms = vec![(c(Var::Sd(i)), 1.0), (x, 1.0)];
                terms.extend(prev_x.map(|p| (p, -1.0)));
                m.add_constraint(Family::Dispatchable, "shutdown", uidx(i, t), terms, Sense::Ge, 0.0);
            }
            for g in 0..ng {
                let mut terms = vec![(c(Var::DGroup(g)), 1.0)];
                terms.extend(
                    units
                        .iter()
                        .enumerate()
                        .filter(|(_, &ug)| ug == g)
                        .map(|(i, _)| (c(Var::D(i)), -1.0)),
                );
                m.add_constraint(Family::Dispatchable, "group_output", vec![g, t, w], terms, Sense::Eq, 0.0);
                m.add_constraint(
                    Family::Dispatchable,
                    "group_split",
                    vec![g, t, w],
                    vec![
                        (c(Var::DGroup(g)), 1.0),
                        (c(Var::DEss(g)), -1.0),
                        (c(Var::DEc(g)), -1.0),
                        (c(Var::DEl(g)), -1.0),
                    ],
                    Sense::Eq,
                    0.0,
                );
            }

            // Battery.
            let (xc, xdc) = (c(Var::XC), c(Var::XDc));
            m.add_constraint(
                Family::Ess,
                "ess_exclusive",
                idx(t),
                vec![(xc, 1.0), (xdc, 1.0)],
                Sense::Le,
                1.0,
            );
            for (label, xv, hours) in [
                ("ess_min_charge", Var::XC, ess.min_charge_hours),
                ("ess_min_discharge", Var::XDc, ess.min_discharge_hours),
            ] {
                for tau in t + 1..=HOURS.min(t + hours - 1) {
                    let mut terms = vec![(at(xv, tau), 1.0), (c(xv), -1.0)];
                    if t > 1 {
                        terms.push((at(xv, t - 1), 1.0));
                    }
                    m.add_constraint(Family::Ess, label, vec![t, tau, w], terms, Sense::Ge, 0.0);
                }
            }
            for (lo_label, hi_label, p, xv, lo, hi) in [
                ("ess_charge_min", "ess_charge_max", Var::EssC, xc, ess.charge_min, ess.charge_max),
                (
                    "ess_discharge_min",
                    "ess_discharge_max",
                    Var::EssDc,
                    xdc,
                    ess.discharge_min,
                    ess.discharge_max,
                ),
            ] {
                m.add_constraint(Family::Ess, lo_label, idx(t), vec![(c(p), 1.0), (xv, -lo)], Sense::Ge, 0.0);
                m.add_constraint(Family::Ess, hi_label, idx(t), vec![(c(p), 1.0), (xv, -hi)], Sense::Le, 0.0);
            }
            let mut terms = vec![(c(Var::EssC), 1.0), (c(Var::GEss), -1.0)];
            terms.extend((0..ng).map(|g| (c(Var::DEss(g)), -1.0)));
            terms.extend([(c(Var::NdEss), -1.0), (c(Var::FcEss), -1.0)]);
            m.add_constraint(Family::Ess, "ess_charge_split", idx(t), terms, Sense::Eq, 0.0);
            m.add_constraint(
                Family::Ess,
                "ess_discharge_split",
                idx(t),
                vec![(c(Var::EssDc), 1.0), (c(Var::EssEc), -1.0), (c(Var::EssEl), -1.0)],
                Sense::Eq,
                0.0,
            );
            let mut terms = vec![(c(Var::Ess), 1.0), (c(Var::EssC), -dt), (c(Var::EssDc), dt)];
            let rhs = if t == 1 {
                ess.start
            } else {
                terms.push((at(Var::Ess, t - 1), -1.0));
                0.0
            };
            m.add_constraint(Family::Ess, "ess_energy", idx(t), terms, Sense::Eq, rhs);
            m.add_constraint(
                Family::Ess,
                "ess_capacity",
                idx(t),
                vec![(c(Var::Ess), 1.0)],
                Sense::Le,
                ess.capacity,
            );
        }
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Solutions

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    TimeLimit,
}

impl SolveStatus {
    /// Process exit code for this status.
    pub fn exit_code(self) -> i32 {
        match self {
            SolveStatus::Optimal => 0,
            SolveStatus::Infeasible => 2,
            SolveStatus::TimeLimit => 3,
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::TimeLimit => "time-limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyResidual {
    pub family: Family,
    pub rows: usize,
    pub max_residual: f64,
    /// Name of the worst row, if any row is violated.
    pub worst_row: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub families: Vec<FamilyResidual>,
    /// Largest violation of a variable bound.
    pub bound_violation: f64,
    /// Largest distance of a binary from {0, 1}.
    pub integrality_violation: f64,
    pub tolerance: f64,
}

impl ResidualReport {
    pub fn flagged(&self) -> Vec<Family> {
        self.families
            .iter()
            .filter(|f| f.max_residual > self.tolerance)
            .map(|f| f.family)
            .collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.families.iter().map(|f| f.max_residual).fold(0.0, f64::max)
    }

    pub fn residual(&self, family: Family) -> f64 {
        self.families
            .iter()
            .find(|f| f.family == family)
            .map_or(0.0, |f| f.max_residual)
    }

    pub fn is_feasible(&self) -> bool {
        self.flagged().is_empty() && self.bound_violation <= self.tolerance && self.integrality_violation <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSolution {
    pub status: SolveStatus,
    /// Expected cost, $. `None` when no point is available.
    pub objective: Option<f64>,
    /// Best bound reported by the backend.
    pub bound: Option<f64>,
    pub backend: String,
    /// One value per model variable; empty when no point is available.
    pub values: Vec<f64>,
    pub residuals: Option<ResidualReport>,
}

impl ScheduleSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    fn require_values(&self, model: &ScheduleModel) -> Result<&[f64]> {
        if self.values.len() != model.variables.len() {
            return Err(Error::Validation(format!(
                "solution has {} values for {} variables",
                self.values.len(),
                model.variables.len()
            )));
        }
        Ok(&self.values)
    }
}

/// Recomputes every row from the solution values.
pub fn validate(model: &ScheduleModel, values: &[f64]) -> Result<ResidualReport> {
    if values.len() != model.variables.len() {
        return Err(Error::Validation(format!(
            "{} values supplied for {} variables",
            values.len(),
            model.variables.len()
        )));
    }
    if let Some(j) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("value of {} is not finite", model.variables[j].name())));
    }
    let mut families: Vec<FamilyResidual> = Family::ALL
        .iter()
        .map(|&family| FamilyResidual {
            family,
            rows: 0,
            max_residual: 0.0,
            worst_row: None,
        })
        .collect();
    for row in &model.constraints {
        let slot = &mut families[Family::ALL.iter().position(|f| *f == row.family).unwrap()];
        slot.rows += 1;
        let r = row.residual(values);
        if r > slot.max_residual {
            slot.max_residual = r;
            slot.worst_row = Some(row.name());
        }
    }
    families.retain(|f| f.rows > 0);
    let mut bound_violation = 0.0f64;
    let mut integrality_violation = 0.0f64;
    for (v, &x) in model.variables.iter().zip(values) {
        bound_violation = bound_violation.max(v.lower - x).max(x - v.upper);
        if v.kind == VarKind::Binary {
            integrality_violation = integrality_violation.max((x - x.round()).abs());
        }
    }
    Ok(ResidualReport {
        families,
        bound_violation,
        integrality_violation,
        tolerance: FEASIBILITY_TOLERANCE,
    })
}

/// Runs of ones in a 0/1 sequence as (first period, length), 1-based.
fn runs(seq: &[bool], on: bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut t = 0;
    while t < seq.len() {
        if seq[t] == on {
            let s = t;
            while t < seq.len() && seq[t] == on {
                t += 1;
            }
            out.push((s + 1, t - s));
        } else {
            t += 1;
        }
    }
    out
}

/// Checks commitment and storage sequences directly: charge/discharge
/// exclusivity, minimum charge and discharge runs, minimum up and down runs
/// and ramp limits. Runs cut off by the end of the horizon only need to reach
/// it. Returns one message per violation.
pub fn logic_violations(model: &ScheduleModel, config: &MicrogridConfig, values: &[f64]) -> Vec<String> {
    let h = model.hours;
    let tol = FEASIBILITY_TOLERANCE;
    let mut out = Vec::new();
    let seq = |var: Var, w: usize| -> Vec<bool> { (1..=h).map(|t| model.value(values, var, t, w) > 0.5).collect() };
    let short = |seq: &[bool], on: bool, need: usize, after_on: bool| -> Vec<(usize, usize)> {
        runs(seq, on)
            .into_iter()
            .filter(|&(s, _)| !after_on || s > 1)
            .filter(|&(s, len)| len < need.min(h - s + 1))
            .collect()
    };
    for w in 0..model.scenario_count() {
        let (xc, xdc) = (seq(Var::XC, w), seq(Var::XDc, w));
        for t in 0..h {
            if xc[t] && xdc[t] {
                out.push(format!("scenario {w} hour {}: storage charges and discharges", t + 1));
            }
        }
        for (name, s, need) in [
            ("charge", &xc, config.ess.min_charge_hours),
            ("discharge", &xdc, config.ess.min_discharge_hours),
        ] {
            for (start, len) in short(s, true, need, false) {
                out.push(format!("scenario {w}: {name} run from hour {start} lasts {len} h < {need} h"));
            }
        }
        for (i, &g) in model.unit_groups.iter().enumerate() {
            let grp = &config.groups[g];
            let x = seq(Var::XD(i), w);
            if let Some(ut) = grp.min_up {
                for (start, len) in short(&x, true, ut, false) {
                    out.push(format!("scenario {w} unit {i}: on-run from hour {start} lasts {len} h < {ut} h"));
                }
            }
            if let Some(dt) = grp.min_down {
                // The unit is off before the horizon, so only off-runs after a shutdown count.
                for (start, len) in short(&x, false, dt, true) {
                    out.push(format!("scenario {w} unit {i}: off-run from hour {start} lasts {len} h < {dt} h"));
                }
            }
            let mut prev = 0.0;
            for t in 1..=h {
                let p = model.value(values, Var::D(i), t, w);
                if let Some(ru) = grp.ramp_up {
                    if p - prev > ru + tol {
                        out.push(format!("scenario {w} unit {i} hour {t}: ramps up {:.6} MW", p - prev));
                    }
                }
                if let Some(rd) = grp.ramp_down {
                    if prev - p > rd + tol {
                        out.push(format!("scenario {w} unit {i} hour {t}: ramps down {:.6} MW", prev - p));
                    }
                }
                prev = p;
            }
        }
    }
    out
}

/// Expected cost of each objective term, $.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub cracker_fuel: f64,
    pub generator_fuel: f64,
    pub generation: f64,
    pub startup: f64,
    pub shutdown: f64,
    pub grid: f64,
    pub fuel_cell: f64,
    pub electrolyzer: f64,
    pub h2_storage: f64,
}

impl CostBreakdown {
    pub fn terms(&self) -> [(&'static str, f64); 9] {
        [
            ("cracker_fuel", self.cracker_fuel),
            ("generator_fuel", self.generator_fuel),
            ("generation", self.generation),
            ("startup", self.startup),
            ("shutdown", self.shutdown),
            ("grid", self.grid),
            ("fuel_cell", self.fuel_cell),
            ("electrolyzer", self.electrolyzer),
            ("h2_storage", self.h2_storage),
        ]
    }

    pub fn total(&self) -> f64 {
        accurate_sum(self.terms().map(|(_, v)| v))
    }
}

/// Splits the expected cost of a solution into the objective terms, pricing
/// every quantity from `config` and `scenarios` rather than from the model's
/// cost vector.
pub fn cost_breakdown(
    model: &ScheduleModel,
    sol: &ScheduleSolution,
    config: &MicrogridConfig,
    scenarios: &ScenarioSet,
) -> Result<CostBreakdown> {
    let x = sol.require_values(model)?;
    let inputs = scenario_inputs(scenarios)?;
    if inputs.len() != model.scenario_count() {
        return Err(Error::Validation("scenario set does not match the model".into()));
    }
    let dt = config.dt;
    let mut terms: [Vec<f64>; 9] = Default::default();
    for (w, input) in inputs.iter().enumerate() {
        let rho = scenarios.scenarios[w].probability;
        for t in 1..=model.hours {
            let v = |var: Var| model.value(x, var, t, w);
            terms[0].push(rho * config.fuel.ng_price * v(Var::NgCc) * dt);
            for (i, &g) in model.unit_groups.iter().enumerate() {
                let grp = &config.groups[g];
                terms[1].push(rho * grp.fuel_price * v(Var::FD(i)) * dt);
                terms[2].push(rho * grp.cost * v(Var::D(i)));
                terms[3].push(rho * grp.startup_cost * v(Var::Su(i)));
                terms[4].push(rho * grp.shutdown_cost * v(Var::Sd(i)));
            }
            terms[5].push(rho * input.lmp[t - 1] * v(Var::G));
            terms[6].push(rho * config.fuel_cell.cost * v(Var::Fc));
            terms[7].push(rho * config.hydrogen.electrolyzer_cost * v(Var::El) * dt);
            terms[8].push(rho * config.hydrogen.storage_cost * v(Var::Hs));
        }
    }
    let s = |k: usize| accurate_sum(terms[k].iter().copied());
    Ok(CostBreakdown {
        cracker_fuel: s(0),
        generator_fuel: s(1),
        generation: s(2),
        startup: s(3),
        shutdown: s(4),
        grid: s(5),
        fuel_cell: s(6),
        electrolyzer: s(7),
        h2_storage: s(8),
    })
}

/// CO2e by source, ton.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EmissionSources {
    pub cracker_ng: f64,
    pub dispatchable_fuel: f64,
    pub grid: f64,
}

impl EmissionSources {
    pub fn total(&self) -> f64 {
        self.cracker_ng + self.dispatchable_fuel + self.grid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionReport {
    /// `[scenario][hour]`, ton CO2e per period.
    pub hourly: Vec<Vec<EmissionSources>>,
    /// Probability-weighted per period.
    pub expected_hourly: Vec<EmissionSources>,
    /// Expected totals over the horizon.
    pub totals: EmissionSources,
}

impl EmissionReport {
    pub fn total(&self) -> f64 {
        self.totals.total()
    }

    /// Mean expected CO2e per hour, ton/h.
    pub fn average_hourly(&self, dt: f64) -> f64 {
        self.total() / (self.expected_hourly.len() as f64 * dt)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scenario", "hour", "cracker_ng", "dispatchable_fuel", "grid", "total"])?;
        let mut row = |s: &str, t: usize, e: &EmissionSources| {
            w.write_record([
                s.to_string(),
                t.to_string(),
                e.cracker_ng.to_string(),
                e.dispatchable_fuel.to_string(),
                e.grid.to_string(),
                e.total().to_string(),
            ])
        };
        for (k, hours) in self.hourly.iter().enumerate() {
            for (t, e) in hours.iter().enumerate() {
                row(&k.to_string(), t + 1, e)?;
            }
        }
        for (t, e) in self.expected_hourly.iter().enumerate() {
            row("expected", t + 1, e)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn emissions(
    model: &ScheduleModel,
    sol: &ScheduleSolution,
    config: &MicrogridConfig,
    factors: &EmissionFactors,
) -> Result<EmissionReport> {
    factors.validate()?;
    let x = sol.require_values(model)?;
    let dt = config.dt;
    let hourly: Vec<Vec<EmissionSources>> = (0..model.scenario_count())
        .map(|w| {
            (1..=model.hours)
                .map(|t| {
                    let v = |var: Var| model.value(x, var, t, w);
                    let gen_fuel = accurate_sum(
                        model
                            .unit_groups
                            .iter()
                            .enumerate()
                            .filter(|(_, &g)| config.groups[g].fuel == Fuel::NaturalGas)
                            .map(|(i, _)| v(Var::FD(i))),
                    );
                    EmissionSources {
                        cracker_ng: factors.ng * v(Var::NgCc) * dt,
                        dispatchable_fuel: factors.ng * gen_fuel * dt,
                        grid: factors.grid * v(Var::G) * dt,
                    }
                })
                .collect()
        })
        .collect();
    let p = &model.probabilities;
    let weigh = |f: &dyn Fn(&EmissionSources) -> f64, t: usize| {
        accurate_sum(hourly.iter().zip(p).map(|(h, &rho)| rho * f(&h[t])))
    };
    let expected_hourly: Vec<EmissionSources> = (0..model.hours)
        .map(|t| EmissionSources {
            cracker_ng: weigh(&|e| e.cracker_ng, t),
            dispatchable_fuel: weigh(&|e| e.dispatchable_fuel, t),
            grid: weigh(&|e| e.grid, t),
        })
        .collect();
    let totals = EmissionSources {
        cracker_ng: accurate_sum(expected_hourly.iter().map(|e| e.cracker_ng)),
        dispatchable_fuel: accurate_sum(expected_hourly.iter().map(|e| e.dispatchable_fuel)),
        grid: accurate_sum(expected_hourly.iter().map(|e| e.grid)),
    };
    Ok(EmissionReport {
        hourly,
        expected_hourly,
        totals,
    })
}

// ---------------------------------------------------------------------------
// Exports

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionExport {
    pub format_version: u32,
    pub model: String,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub backend: String,
    pub residuals: Option<ResidualReport>,
    /// Variable name and value, in model order.
    pub variables: Vec<(String, f64)>,
}

impl ScheduleSolution {
    pub fn export(&self, model: &ScheduleModel) -> SolutionExport {
        SolutionExport {
            format_version: SOLUTION_FORMAT_VERSION,
            model: model.name.clone(),
            status: self.status,
            objective: self.objective,
            bound: self.bound,
            backend: self.backend.clone(),
            residuals: self.residuals.clone(),
            variables: model
                .variables
                .iter()
                .zip(&self.values)
                .map(|(v, &x)| (v.name(), x))
                .collect(),
        }
    }

    pub fn to_json(&self, model: &ScheduleModel) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.export(model))?)
    }
}

/// Columns of the hourly dispatch table.
pub const DISPATCH_COLUMNS: [&str; 16] = [
    "ng_cracker_t",
    "generator_ng_t",
    "generator_power_mw",
    "grid_mw",
    "renewable_used_mw",
    "curtailed_mw",
    "ess_charge_mw",
    "ess_discharge_mw",
    "ess_energy_mwh",
    "fuel_cell_mw",
    "electrolyzer_h2_t",
    "h2_storage_t",
    "h2_to_cracker_t",
    "ch4_to_cracker_t",
    "units_on",
    "ec_demand_mw",
];

/// Hourly dispatch of one scenario in [`DISPATCH_COLUMNS`] order.
pub fn dispatch_row(model: &ScheduleModel, config: &MicrogridConfig, x: &[f64], t: usize, w: usize) -> [f64; 16] {
    let v = |var: Var| model.value(x, var, t, w);
    let units = &model.unit_groups;
    let ng_units = || {
        units
            .iter()
            .enumerate()
            .filter(|(_, &g)| config.groups[g].fuel == Fuel::NaturalGas)
            .map(|(i, _)| i)
    };
    [
        v(Var::NgCc),
        accurate_sum(ng_units().map(|i| v(Var::FD(i)))),
        accurate_sum((0..units.len()).map(|i| v(Var::D(i)))),
        v(Var::G),
        v(Var::NdEc) + v(Var::NdEl) + v(Var::NdEss),
        v(Var::Curtail),
        v(Var::EssC),
        v(Var::EssDc),
        v(Var::Ess),
        v(Var::Fc),
        v(Var::El),
        v(Var::Hs),
        v(Var::H2SepCc) + v(Var::ElCc) + v(Var::H2HsCc),
        v(Var::Ch4SepCc),
        accurate_sum((0..units.len()).map(|i| v(Var::XD(i)))),
        config.demand.p_ec,
    ]
}

pub fn write_dispatch_csv<W: Write>(
    model: &ScheduleModel,
    sol: &ScheduleSolution,
    config: &MicrogridConfig,
    out: W,
) -> Result<()> {
    let x = sol.require_values(model)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["scenario", "hour"];
    header.extend(DISPATCH_COLUMNS);
    w.write_record(&header)?;
    for s in 0..model.scenario_count() {
        for t in 1..=model.hours {
            let mut rec = vec![s.to_string(), t.to_string()];
            rec.extend(dispatch_row(model, config, x, t, s).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Profile24;

    fn energy() -> EnergyResult {
        EnergyResult {
            format_version: 1,
            duty_thermal: 1.8,
            e_conventional: 4.5,
            e_electrified: 1.85,
            eta_conventional: 0.4,
            eta_electrified: 0.971,
            ethylene_yield: 0.5,
            duty: 0.0,
            ethylene_rate: 1.0,
            ethane_feed: 2.0,
            residence_time: 0.2,
            min_heat_flux: 0.0,
            profile: vec![],
            outlet: Default::default(),
            seed: 0,
            best_start: 0,
            evaluations: 0,
        }
    }

    fn calm(lmp: f64) -> ScenarioSet {
        ScenarioSet::deterministic(vec![
            Profile24::new(ProfileKind::Lmp, vec![lmp; HOURS]).unwrap(),
            Profile24::new(ProfileKind::Wind, vec![0.0; HOURS]).unwrap(),
            Profile24::new(ProfileKind::Pv, vec![0.0; HOURS]).unwrap(),
        ])
        .unwrap()
    }

    fn five() -> ScenarioSet {
        let mut set = calm(50.0);
        let s = set.scenarios[0].clone();
        set.scenarios = (0..5)
            .map(|_| {
                let mut s = s.clone();
                s.probability = 0.2;
                s
            })
            .collect();
        set
    }

    #[test]
    fn bundled_config_carries_the_table_values() {
        let c = MicrogridConfig::bundled();
        let ng = &c.groups[0];
        assert_eq!((ng.units, ng.cost, ng.p_min, ng.p_max), (20, 33.4, 1.0, 5.0));
        assert_eq!((ng.min_up, ng.min_down), (Some(3), Some(3)));
        assert_eq!((ng.ramp_up, ng.ramp_down), (Some(2.5), Some(2.5)));
        assert_eq!(ng.lhv, 12.222);
        let h2 = &c.groups[1];
        assert_eq!((h2.units, h2.cost, h2.p_min, h2.p_max), (1, 30.0, 1e-5, 1.0));
        assert_eq!((h2.ramp_up, h2.min_up), (None, None));
        assert_eq!(h2.lhv, c.fuel.lhv_h2);
        assert_eq!(c.ess.capacity, 20.0);
        assert_eq!((c.ess.charge_min, c.ess.charge_max), (0.8, 4.0));
        assert_eq!((c.ess.discharge_min, c.ess.discharge_max), (0.8, 4.0));
        assert_eq!((c.ess.min_charge_hours, c.ess.min_discharge_hours), (5, 5));
        assert_eq!(c.ess.start, 0.5 * c.ess.capacity);
        assert_eq!((c.hydrogen.capacity, c.hydrogen.storage_cost), (10.0, 10_000.0));
        assert_eq!((c.fuel.lhv_ng, c.fuel.lhv_h2, c.fuel.lhv_ch4), (13.826, 33.320, 13.896));
        assert_eq!((c.separation.f_ch4, c.separation.r_ch4, c.separation.r_h2), (0.4692, 0.997, 0.99));
        assert_eq!((c.hydrogen.electrolyzer_efficiency, c.fuel_cell.efficiency), (0.736, 0.65));
        assert_eq!(c.hydrogen.electrolysis_energy, 39.4);
        assert!(c.groups.iter().all(|g| g.efficiency == 0.60));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = MicrogridConfig::bundled();
        assert_eq!(MicrogridConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = MicrogridConfig::bundled();
        c.groups[0].p_min = 6.0;
        assert!(c.validate().is_err());
        let mut c = MicrogridConfig::bundled();
        c.fuel_cell.efficiency = 1.2;
        assert!(c.validate().is_err());
        let mut c = MicrogridConfig::bundled();
        c.plant.levels.push(0.25);
        assert!(c.validate().is_err());
    }

    #[test]
    fn demands_follow_plant_rates() {
        let plant = MicrogridConfig::bundled().plant;
        let d0 = derive_demands(&plant, 0.0, &energy()).unwrap();
        assert_eq!((d0.p_ec, d0.byproduct_ec), (0.0, 0.0));
        let rate: f64 = 1e6 / 8760.0;
        assert!((rate - 114.155).abs() < 1e-3);
        assert!((d0.byproduct_cc - 16.21).abs() < 5e-3, "{}", d0.byproduct_cc);
        assert!((d0.p_cc - 4.5 * rate).abs() < 1e-9);
        let d = derive_demands(&plant, 0.2, &energy()).unwrap();
        assert!((d.p_ec - 1.85 * 0.2 * rate).abs() < 1e-9);
        assert!((d.byproduct_cc + d.byproduct_ec - d0.byproduct_cc).abs() < 1e-9);
        assert!(derive_demands(&plant, 0.25, &energy()).is_err());
        let f = plant.w_ch4 / (plant.w_ch4 + plant.w_h2);
        assert!((f - 0.4692).abs() < 5e-4);
    }

    #[test]
    fn binary_count_matches_the_commitment_structure() {
        let m = build(&MicrogridConfig::bundled(), &five(), Mode::GridConnected, false).unwrap();
        assert_eq!(m.binary_count(), 5 * 24 * (2 + 1 + 21));
        assert!(m.unreferenced().is_empty());
        for f in Family::ALL {
            assert!(m.family_rows(f) > 0, "{f}");
        }
    }

    #[test]
    fn islanded_mode_caps_the_grid_at_zero() {
        let m = build(&MicrogridConfig::bundled(), &calm(50.0), Mode::Islanded, false).unwrap();
        let caps: Vec<_> = m.constraints.iter().filter(|c| c.label == "grid_cap").collect();
        assert_eq!(caps.len(), HOURS);
        assert!(caps.iter().all(|c| c.rhs == 0.0 && c.sense == Sense::Le));
    }

    fn witness(m: &ScheduleModel, cfg: &MicrogridConfig) -> Vec<f64> {
        let mut x = vec![0.0; m.variables.len()];
        for t in 1..=HOURS {
            x[m.var(Var::NgCc, t, 0).unwrap()] = cfg.demand.p_cc / cfg.fuel.lhv_ng;
            x[m.var(Var::Ess, t, 0).unwrap()] = cfg.ess.start;
        }
        x
    }

    #[test]
    fn all_fossil_witness_is_feasible_when_islanded() {
        let cfg = MicrogridConfig::bundled().with_demands(derive_demands(&MicrogridConfig::bundled().plant, 0.0, &energy()).unwrap());
        let m = build(&cfg, &calm(50.0), Mode::Islanded, false).unwrap();
        let report = validate(&m, &witness(&m, &cfg)).unwrap();
        assert!(report.is_feasible(), "{:?}", report.flagged());
    }

    #[test]
    fn perturbations_flag_exactly_the_touched_families() {
        let cfg = MicrogridConfig::bundled().with_demands(derive_demands(&MicrogridConfig::bundled().plant, 0.0, &energy()).unwrap());
        let m = build(&cfg, &calm(50.0), Mode::Islanded, false).unwrap();
        let base = witness(&m, &cfg);
        let cases = [
            (Var::G, vec![Family::Grid]),
            (Var::NgCc, vec![Family::CcBalance]),
            (Var::Fc, vec![Family::FuelCell]),
            (Var::El, vec![Family::H2Storage, Family::Electrolyzer]),
            (Var::EssC, vec![Family::Ess]),
            (Var::NdEss, vec![Family::NonDispatchable, Family::Ess]),
            (Var::D(3), vec![Family::Dispatchable]),
        ];
        for (var, expect) in cases {
            let mut x = base.clone();
            x[m.var(var, 7, 0).unwrap()] += 1.0;
            let report = validate(&m, &x).unwrap();
            assert_eq!(report.flagged(), expect, "{var:?}");
        }
    }

    #[test]
    fn zero_point_leaves_the_cracker_demand_as_residual() {
        let cfg = MicrogridConfig::bundled().with_demands(Demands {
            p_cc: 500.0,
            ..Demands::default()
        });
        let m = build(&cfg, &calm(50.0), Mode::GridConnected, false).unwrap();
        let report = validate(&m, &vec![0.0; m.variables.len()]).unwrap();
        assert_eq!(report.residual(Family::CcBalance), 500.0);
        assert!(validate(&m, &[0.0]).is_err());
    }

    #[test]
    fn costs_and_emissions_of_the_witness() {
        let cfg = MicrogridConfig::bundled().with_demands(Demands {
            p_cc: 138.26,
            ..Demands::default()
        });
        let m = build(&cfg, &calm(50.0), Mode::Islanded, false).unwrap();
        let sol = ScheduleSolution {
            status: SolveStatus::Optimal,
            objective: None,
            bound: None,
            backend: "hand".into(),
            values: witness(&m, &cfg),
            residuals: None,
        };
        let c = cost_breakdown(&m, &sol, &cfg, &calm(50.0)).unwrap();
        // 10 t/h of natural gas for 24 h at $100/t.
        assert!((c.cracker_fuel - 24_000.0).abs() < 1e-9);
        assert_eq!((c.grid, c.startup, c.shutdown), (0.0, 0.0, 0.0));
        assert!((c.total() - m.objective_value(&sol.values)).abs() < 1e-9);
        let e = emissions(&m, &sol, &cfg, &cfg.emission_factors).unwrap();
        assert!((e.totals.cracker_ng - 24.0 * 10.0 * 2.75).abs() < 1e-9);
        assert!((e.total() - e.totals.cracker_ng).abs() < 1e-12);
        let zero = EmissionFactors { ng: 0.0, grid: 0.0 };
        assert_eq!(emissions(&m, &sol, &cfg, &zero).unwrap().total(), 0.0);
        assert!(emissions(&m, &sol, &cfg, &EmissionFactors { ng: -1.0, grid: 0.0 }).is_err());
    }

    #[test]
    fn methane_combustion_factor() {
        // CH4 + 2 O2 -> CO2 + 2 H2O; 44 t CO2 per 16 t CH4.
        assert_eq!(44.0 / 16.0, MicrogridConfig::bundled().emission_factors.ng);
    }

    #[test]
    fn curtailment_adds_one_free_column_per_hour() {
        let cfg = MicrogridConfig::bundled();
        let a = build(&cfg, &calm(50.0), Mode::GridConnected, false).unwrap();
        let b = build(&cfg, &calm(50.0), Mode::GridConnected, true).unwrap();
        assert_eq!(b.variables.len(), a.variables.len() + HOURS);
        assert_eq!(b.constraints.len(), a.constraints.len());
        let j = b.var(Var::Curtail, 1, 0).unwrap();
        assert_eq!(b.objective[j], 0.0);
    }

    #[test]
    fn storage_balances_telescope() {
        let cfg = MicrogridConfig::bundled();
        let m = build(&cfg, &calm(50.0), Mode::GridConnected, false).unwrap();
        let mut x = vec![0.0; m.variables.len()];
        let mut e = cfg.ess.start;
        for t in 1..=HOURS {
            let (c, d) = if t % 2 == 0 { (1.5, 0.0) } else { (0.0, 1.0) };
            x[m.var(Var::EssC, t, 0).unwrap()] = c;
            x[m.var(Var::EssDc, t, 0).unwrap()] = d;
            e += (c - d) * cfg.dt;
            x[m.var(Var::Ess, t, 0).unwrap()] = e;
        }
        let rows: Vec<_> = m.constraints.iter().filter(|c| c.label == "ess_energy").collect();
        assert!(rows.iter().all(|r| r.residual(&x) < 1e-12));
        let net: f64 = (1..=HOURS).map(|t| m.value(&x, Var::EssC, t, 0) - m.value(&x, Var::EssDc, t, 0)).sum();
        assert!((m.value(&x, Var::Ess, HOURS, 0) - cfg.ess.start - net * cfg.dt).abs() < 1e-12);
    }

    #[test]
    fn runs_split_a_sequence() {
        let s = [true, true, false, true, false, false];
        assert_eq!(runs(&s, true), vec![(1, 2), (4, 1)]);
        assert_eq!(runs(&s, false), vec![(3, 1), (5, 2)]);
    }

    #[test]
    fn sequence_checks_catch_short_runs_and_ramps() {
        let cfg = MicrogridConfig::bundled();
        let m = build(&cfg, &calm(50.0), Mode::GridConnected, false).unwrap();
        let mut x = vec![0.0; m.variables.len()];
        assert!(logic_violations(&m, &cfg, &x).is_empty());
        // Two hours on, then off for good: min up is 3 h.
        for t in [5, 6] {
            x[m.var(Var::XD(0), t, 0).unwrap()] = 1.0;
            x[m.var(Var::D(0), t, 0).unwrap()] = 2.0;
        }
        let v = logic_violations(&m, &cfg, &x);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].contains("on-run from hour 5"));
        // A run cut by the horizon end is allowed.
        let mut y = vec![0.0; m.variables.len()];
        for t in [23, 24] {
            y[m.var(Var::XC, t, 0).unwrap()] = 1.0;
        }
        y[m.var(Var::XD(1), 1, 0).unwrap()] = 1.0;
        y[m.var(Var::D(1), 1, 0).unwrap()] = 3.0;
        let v = logic_violations(&m, &cfg, &y);
        assert!(v.iter().any(|s| s.contains("ramps up")), "{v:?}");
        assert!(v.iter().any(|s| s.contains("unit 1: on-run")), "{v:?}");
        assert!(!v.iter().any(|s| s.contains("charge run")), "{v:?}");
        y[m.var(Var::XDc, 24, 0).unwrap()] = 1.0;
        assert!(logic_violations(&m, &cfg, &y).iter().any(|s| s.contains("charges and discharges")));
    }
}
