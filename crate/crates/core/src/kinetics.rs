//! Molecular reaction model of ethane cracking.
//!
//! Eight reactions over nine species (steam is carried as an inert diluent).
//! Rate laws are products of ideal-gas concentrations
//! `c_j = (F_j / F_tot) * P / (R T)` multiplied by Arrhenius coefficients;
//! reaction enthalpies get a linear heat-capacity correction from 298 K.
//!
//! All quantities are SI internally: mol, m, s, K, Pa, J.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Universal gas constant, J/(mol K).
pub const GAS_CONSTANT: f64 = 8.314;

/// Reference temperature of the standard reaction enthalpies, K.
pub const REFERENCE_TEMPERATURE: f64 = 298.0;

/// Number of species the reaction system must define.
pub const SPECIES_COUNT: usize = 9;

/// The bundled reaction data file.
pub const BUNDLED_KINETICS: &str = include_str!("../data/kinetics.toml");

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub name: String,
    /// kg/mol
    pub molar_mass: f64,
    /// Constant molar heat capacity, J/(mol K).
    pub cp: f64,
    pub carbon: u32,
    pub hydrogen: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateForm {
    FirstOrder,
    SecondOrder,
    Reversible,
}

/// Reverse (equilibrium) term of a reversible reaction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverseTerm {
    pub species: Vec<usize>,
    /// SI prefactor.
    pub a: f64,
    /// J/mol
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub id: usize,
    pub equation: String,
    /// Dense stoichiometric row over the species table; negative for reactants.
    pub stoichiometry: Vec<f64>,
    /// Species whose concentrations multiply the forward coefficient.
    pub forward: Vec<usize>,
    /// SI prefactor (1/s or m3/(mol s) depending on order).
    pub a: f64,
    /// J/mol
    pub e: f64,
    pub reverse: Option<ReverseTerm>,
    /// Standard reaction enthalpy at 298 K, J/mol.
    pub dh0: f64,
    pub form: RateForm,
}

/// Reaction rates r_i, mol/(m3 s), indexed by reaction position (id - 1).
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector(pub Vec<f64>);

impl RateVector {
    pub fn get(&self, id: usize) -> f64 {
        self.0[id - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Well-known species positions resolved once at load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeySpecies {
    pub ethane: usize,
    pub ethylene: usize,
    pub methane: usize,
    pub hydrogen: usize,
    pub steam: usize,
}

/// Immutable species table plus reaction list.
#[derive(Debug, Clone)]
pub struct ReactionSystem {
    species: Vec<Species>,
    reactions: Vec<Reaction>,
    key: KeySpecies,
    delta_cp: Vec<f64>,
}

// ---- on-disk schema ----

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KineticsFile {
    pub format_version: u32,
    pub species: Vec<SpeciesRecord>,
    pub reactions: Vec<ReactionRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeciesRecord {
    pub name: String,
    /// g/mol
    pub molar_mass: f64,
    pub cp: f64,
    pub carbon: u32,
    pub hydrogen: u32,
    #[serde(default)]
    pub cp_source: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReactionRecord {
    pub id: usize,
    #[serde(default)]
    pub equation: String,
    pub stoichiometry: BTreeMap<String, i32>,
    pub forward: Vec<String>,
    pub a: f64,
    pub a_units: String,
    /// kJ/mol
    pub e: f64,
    #[serde(default)]
    pub reverse: Option<Vec<String>>,
    #[serde(default)]
    pub a_rev: Option<f64>,
    #[serde(default)]
    pub a_rev_units: Option<String>,
    #[serde(default)]
    pub e_rev: Option<f64>,
    /// kJ/mol
    pub dh0: f64,
}

/// Converts a prefactor to SI given its unit label and the order of the
/// concentration product it multiplies.
fn prefactor_to_si(value: f64, units: &str, order: usize, reaction: usize) -> Result<f64> {
    let normalized: String = units.chars().filter(|c| !c.is_whitespace()).collect();
    let (factor, unit_order) = match normalized.as_str() {
        "1/s" | "s^-1" => (1.0, 1),
        "m3/(mol*s)" | "m^3/(mol*s)" => (1.0, 2),
        "L/(mol*s)" | "l/(mol*s)" | "dm3/(mol*s)" => (1e-3, 2),
        "cm3/(mol*s)" => (1e-6, 2),
        other => {
            return Err(Error::Config(format!(
                "reaction {reaction}: unsupported prefactor units '{other}'"
            )))
        }
    };
    if unit_order != order {
        return Err(Error::Config(format!(
            "reaction {reaction}: prefactor units '{units}' imply order {unit_order}, rate law has order {order}"
        )));
    }
    Ok(value * factor)
}

impl ReactionSystem {
    /// The reaction system shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_toml_str(BUNDLED_KINETICS).expect("bundled kinetics data is valid")
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: KineticsFile = toml::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn from_file(file: &KineticsFile) -> Result<Self> {
        if file.format_version != 1 {
            return Err(Error::Config(format!(
                "unsupported kinetics format version {}",
                file.format_version
            )));
        }
        if file.species.len() != SPECIES_COUNT {
            return Err(Error::Config(format!(
                "expected {SPECIES_COUNT} species, found {}",
                file.species.len()
            )));
        }
        let mut species = Vec::with_capacity(file.species.len());
        for rec in &file.species {
            if !(rec.molar_mass > 0.0) || !(rec.cp > 0.0) {
                return Err(Error::Config(format!(
                    "species {}: molar mass and cp must be positive",
                    rec.name
                )));
            }
            if species.iter().any(|s: &Species| s.name == rec.name) {
                return Err(Error::Config(format!("duplicate species {}", rec.name)));
            }
            species.push(Species {
                name: rec.name.clone(),
                molar_mass: rec.molar_mass * 1e-3,
                cp: rec.cp,
                carbon: rec.carbon,
                hydrogen: rec.hydrogen,
            });
        }
        let lookup = |name: &str, reaction: usize| -> Result<usize> {
            species
                .iter()
                .position(|s| s.name == name)
                .ok_or_else(|| Error::Config(format!("reaction {reaction}: unknown species {name}")))
        };

        let mut reactions = Vec::with_capacity(file.reactions.len());
        for (pos, rec) in file.reactions.iter().enumerate() {
            if rec.id != pos + 1 {
                return Err(Error::Config(format!(
                    "reaction ids must be consecutive from 1; found {} at position {}",
                    rec.id,
                    pos + 1
                )));
            }
            let mut stoichiometry = vec![0.0; species.len()];
            for (name, coeff) in &rec.stoichiometry {
                stoichiometry[lookup(name, rec.id)?] = f64::from(*coeff);
            }
            let forward = rec
                .forward
                .iter()
                .map(|n| lookup(n, rec.id))
                .collect::<Result<Vec<_>>>()?;
            if forward.is_empty() || forward.len() > 2 {
                return Err(Error::Config(format!(
                    "reaction {}: forward rate law must be first or second order",
                    rec.id
                )));
            }
            let a = prefactor_to_si(rec.a, &rec.a_units, forward.len(), rec.id)?;
            let reverse = match (&rec.reverse, rec.a_rev, &rec.a_rev_units, rec.e_rev) {
                (None, None, None, None) => None,
                (Some(names), Some(a_rev), Some(units), Some(e_rev)) => {
                    let species_idx = names
                        .iter()
                        .map(|n| lookup(n, rec.id))
                        .collect::<Result<Vec<_>>>()?;
                    Some(ReverseTerm {
                        a: prefactor_to_si(a_rev, units, species_idx.len(), rec.id)?,
                        species: species_idx,
                        e: e_rev * 1e3,
                    })
                }
                _ => {
                    return Err(Error::Config(format!(
                        "reaction {}: reverse term needs species, a_rev, a_rev_units and e_rev",
                        rec.id
                    )))
                }
            };
            let form = match (&reverse, forward.len()) {
                (Some(_), _) => RateForm::Reversible,
                (None, 1) => RateForm::FirstOrder,
                (None, _) => RateForm::SecondOrder,
            };
            reactions.push(Reaction {
                id: rec.id,
                equation: rec.equation.clone(),
                stoichiometry,
                forward,
                a,
                e: rec.e * 1e3,
                reverse,
                dh0: rec.dh0 * 1e3,
                form,
            });
        }
        Self::new(species, reactions)
    }

    /// Validates and assembles a reaction system.
    pub fn new(species: Vec<Species>, reactions: Vec<Reaction>) -> Result<Self> {
        for r in &reactions {
            if r.stoichiometry.len() != species.len() {
                return Err(Error::Config(format!(
                    "reaction {}: stoichiometry length mismatch",
                    r.id
                )));
            }
            let carbon: f64 = r
                .stoichiometry
                .iter()
                .zip(&species)
                .map(|(s, sp)| s * f64::from(sp.carbon))
                .sum();
            let hydrogen: f64 = r
                .stoichiometry
                .iter()
                .zip(&species)
                .map(|(s, sp)| s * f64::from(sp.hydrogen))
                .sum();
            if carbon != 0.0 || hydrogen != 0.0 {
                return Err(Error::Config(format!(
                    "reaction {} ({}) violates element balance: dC = {carbon}, dH = {hydrogen}",
                    r.id, r.equation
                )));
            }
            if r.form == RateForm::Reversible && r.reverse.is_none() {
                return Err(Error::Config(format!(
                    "reaction {} is reversible but has no reverse term",
                    r.id
                )));
            }
        }
        let find = |name: &str| {
            species
                .iter()
                .position(|s| s.name == name)
                .ok_or_else(|| Error::Config(format!("species table lacks {name}")))
        };
        let key = KeySpecies {
            ethane: find("C2H6")?,
            ethylene: find("C2H4")?,
            methane: find("CH4")?,
            hydrogen: find("H2")?,
            steam: find("H2O")?,
        };
        if reactions
            .iter()
            .any(|r| r.stoichiometry[key.steam] != 0.0)
        {
            return Err(Error::Config("steam must be inert".into()));
        }
        let delta_cp = reactions
            .iter()
            .map(|r| {
                r.stoichiometry
                    .iter()
                    .zip(&species)
                    .map(|(s, sp)| s * sp.cp)
                    .sum()
            })
            .collect();
        Ok(Self {
            species,
            reactions,
            key,
            delta_cp,
        })
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn key(&self) -> KeySpecies {
        self.key
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn reaction(&self, id: usize) -> Result<&Reaction> {
        id.checked_sub(1)
            .and_then(|i| self.reactions.get(i))
            .ok_or_else(|| Error::Domain(format!("unknown reaction id {id}")))
    }

    /// Forward rate coefficient `A exp(-E / (R T))` in SI units.
    pub fn arrhenius(&self, id: usize, temperature: f64) -> Result<f64> {
        check_temperature(temperature)?;
        let r = self.reaction(id)?;
        Ok(arrhenius(r.a, r.e, temperature))
    }

    /// Reverse coefficient of a reversible reaction (K_e in the rate law).
    pub fn reverse_coefficient(&self, id: usize, temperature: f64) -> Result<f64> {
        check_temperature(temperature)?;
        let r = self.reaction(id)?;
        let rev = r
            .reverse
            .as_ref()
            .ok_or_else(|| Error::Domain(format!("reaction {id} is irreversible")))?;
        Ok(arrhenius(rev.a, rev.e, temperature))
    }

    /// Heat-capacity change of reaction `id`, J/(mol K).
    pub fn delta_cp(&self, id: usize) -> Result<f64> {
        self.reaction(id)?;
        Ok(self.delta_cp[id - 1])
    }

    /// Temperature-corrected reaction enthalpy, J/mol.
    pub fn reaction_enthalpy(&self, id: usize, temperature: f64) -> Result<f64> {
        check_temperature(temperature)?;
        let r = self.reaction(id)?;
        Ok(r.dh0 + self.delta_cp[id - 1] * (temperature - REFERENCE_TEMPERATURE))
    }

    /// Evaluates every rate law at the given molar flows (mol/s), temperature
    /// and pressure.
    pub fn rates(&self, flows: &[f64], temperature: f64, pressure: f64) -> Result<RateVector> {
        let mut out = vec![0.0; self.reactions.len()];
        self.rates_into(flows, temperature, pressure, &mut out)?;
        Ok(RateVector(out))
    }

    /// Allocation-free variant of [`ReactionSystem::rates`].
    pub fn rates_into(
        &self,
        flows: &[f64],
        temperature: f64,
        pressure: f64,
        out: &mut [f64],
    ) -> Result<()> {
        if flows.len() != self.species.len() || out.len() != self.reactions.len() {
            return Err(Error::Domain("flow or rate vector has the wrong length".into()));
        }
        check_temperature(temperature)?;
        if !(pressure > 0.0) {
            return Err(Error::Domain(format!("pressure must be positive, got {pressure}")));
        }
        if flows.iter().any(|f| *f < 0.0 || !f.is_finite()) {
            return Err(Error::Domain("molar flows must be finite and non-negative".into()));
        }
        let total: f64 = flows.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateState("total molar flow is zero".into()));
        }
        let scale = pressure / (GAS_CONSTANT * temperature) / total;
        let conc = |j: usize| flows[j] * scale;
        for (r, slot) in self.reactions.iter().zip(out.iter_mut()) {
            let fwd: f64 = r.forward.iter().map(|&j| conc(j)).product();
            let mut rate = arrhenius(r.a, r.e, temperature) * fwd;
            if let Some(rev) = &r.reverse {
                let back: f64 = rev.species.iter().map(|&j| conc(j)).product();
                rate -= arrhenius(rev.a, rev.e, temperature) * back;
            }
            *slot = rate;
        }
        Ok(())
    }

    /// Net production rate of each species, `sum_i s_ij r_i`, mol/(m3 s).
    pub fn production(&self, rates: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, rate) in self.reactions.iter().zip(rates) {
            for (o, s) in out.iter_mut().zip(&r.stoichiometry) {
                *o += s * rate;
            }
        }
    }

    /// Heat released by reaction, `sum_i r_i (-dH_i(T))`, W/m3.
    pub fn reaction_heat(&self, rates: &[f64], temperature: f64) -> f64 {
        self.reactions
            .iter()
            .zip(rates)
            .zip(&self.delta_cp)
            .map(|((r, rate), dcp)| {
                rate * -(r.dh0 + dcp * (temperature - REFERENCE_TEMPERATURE))
            })
            .sum()
    }

    /// Carbon and hydrogen atom flows, mol/s.
    pub fn element_flows(&self, flows: &[f64]) -> (f64, f64) {
        flows
            .iter()
            .zip(&self.species)
            .fold((0.0, 0.0), |(c, h), (f, s)| {
                (c + f * f64::from(s.carbon), h + f * f64::from(s.hydrogen))
            })
    }
}

fn arrhenius(a: f64, e: f64, temperature: f64) -> f64 {
    a * (-e / (GAS_CONSTANT * temperature)).exp()
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("temperature must be positive, got {t}")))
    }
}
