//! Hourly uncertainty scenarios for electricity price, wind and solar output.
//!
//! Draws are log-normal around a base profile, `base_t * exp(sigma Z - sigma^2/2)`,
//! so every hour keeps the base value as its mean. Draw `k` uses its own
//! ChaCha8 stream (`seed_from_u64(seed)`, stream `k`), and hour `t` takes the
//! `t`-th standard normal of that stream (ziggurat sampler from `rand_distr`).
//! Results therefore do not depend on thread count or draw order.
//!
//! Reduction keeps `k` scenarios that minimize the Kantorovich transport
//! cost `sum_{j not kept} rho_j min_{s kept} d(j, s)`. Distances are
//! Euclidean over concatenated profiles after z-normalizing each kind.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOURS: usize = 24;
pub const SCENARIO_FILE_VERSION: u32 = 1;

/// Probability sums must be within this of one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Below this many candidate subsets reduction enumerates them all.
pub const EXACT_SUBSET_LIMIT: u128 = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    /// Locational marginal price, $/MWh.
    Lmp,
    /// Wind output, MW.
    Wind,
    /// Photovoltaic output, MW.
    Pv,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 3] = [ProfileKind::Lmp, ProfileKind::Wind, ProfileKind::Pv];

    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::Lmp => "lmp",
            ProfileKind::Wind => "wind",
            ProfileKind::Pv => "pv",
        }
    }

    /// Default log-normal dispersion.
    pub fn default_sigma(self) -> f64 {
        match self {
            ProfileKind::Lmp => 0.5,
            ProfileKind::Wind => 0.4,
            ProfileKind::Pv => 0.3,
        }
    }
}

impl std::str::FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lmp" | "price" => Ok(ProfileKind::Lmp),
            "wind" => Ok(ProfileKind::Wind),
            "pv" | "solar" => Ok(ProfileKind::Pv),
            other => Err(Error::Parse(format!("unknown profile kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile24 {
    pub kind: ProfileKind,
    pub values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct HourRow {
    hour: u32,
    value: f64,
}

impl Profile24 {
    pub fn new(kind: ProfileKind, values: Vec<f64>) -> Result<Self> {
        let p = Self { kind, values };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != HOURS {
            return Err(Error::Validation(format!(
                "{} profile has {} values, expected {HOURS}",
                self.kind,
                self.values.len()
            )));
        }
        if let Some((t, v)) = self.values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Validation(format!(
                "{} profile hour {}: value {v} is not a finite non-negative number",
                self.kind,
                t + 1
            )));
        }
        Ok(())
    }

    /// Synthetic base profile shipped with the crate.
    pub fn bundled(kind: ProfileKind) -> Self {
        let text = match kind {
            ProfileKind::Lmp => include_str!("../data/profiles/lmp.csv"),
            ProfileKind::Wind => include_str!("../data/profiles/wind.csv"),
            ProfileKind::Pv => include_str!("../data/profiles/pv.csv"),
        };
        Self::from_csv(kind, text.as_bytes()).expect("bundled profile is valid")
    }

    /// Reads `hour,value` rows. Hours may be numbered 0..=23 or 1..=24 and
    /// must each appear exactly once.
    pub fn from_csv<R: Read>(kind: ProfileKind, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "hour" || &headers[1] != "value" {
            return Err(Error::Parse(format!("expected header 'hour,value', found '{}'", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let rows: Vec<HourRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
        if rows.len() != HOURS {
            return Err(Error::Parse(format!("expected {HOURS} rows, found {}", rows.len())));
        }
        let offset = match rows.iter().map(|r| r.hour).min() {
            Some(0) => 0,
            Some(1) => 1,
            _ => return Err(Error::Parse("hours must start at 0 or 1".into())),
        };
        let mut values = vec![f64::NAN; HOURS];
        for r in &rows {
            let idx = (r.hour as usize).checked_sub(offset).filter(|i| *i < HOURS);
            match idx {
                Some(i) if values[i].is_nan() => values[i] = r.value,
                Some(_) => return Err(Error::Parse(format!("hour {} appears twice", r.hour))),
                None => return Err(Error::Parse(format!("hour {} out of range", r.hour))),
            }
        }
        Self::new(kind, values)
    }

    pub fn from_csv_path(kind: ProfileKind, path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(kind, std::fs::File::open(path)?)
    }

    /// Writes `hour,value` with hours numbered from 1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["hour", "value"])?;
        for (t, v) in self.values.iter().enumerate() {
            w.write_record([(t + 1).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// One profile per kind of the owning set, in the set's kind order.
    pub profiles: Vec<Profile24>,
    pub probability: f64,
    /// Index of the originating draw in each source set.
    pub source: Vec<usize>,
}

impl Scenario {
    pub fn profile(&self, kind: ProfileKind) -> Option<&Profile24> {
        self.profiles.iter().find(|p| p.kind == kind)
    }
}

/// Where the scenarios of one kind came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ProfileKind,
    /// `None` for profiles read from a file.
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    pub draws: usize,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub format_version: u32,
    pub kinds: Vec<ProfileKind>,
    pub scenarios: Vec<Scenario>,
    pub provenance: Vec<Provenance>,
}

/// Neumaier-compensated sum.
pub fn accurate_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

impl ScenarioSet {
    /// A one-scenario set holding the given profiles with probability 1.
    pub fn deterministic(profiles: Vec<Profile24>) -> Result<Self> {
        let set = Self {
            format_version: SCENARIO_FILE_VERSION,
            kinds: profiles.iter().map(|p| p.kind).collect(),
            provenance: profiles
                .iter()
                .map(|p| Provenance {
                    kind: p.kind,
                    seed: None,
                    sigma: None,
                    draws: 1,
                    generator: "given".into(),
                })
                .collect(),
            scenarios: vec![Scenario {
                source: vec![0; profiles.len()],
                profiles,
                probability: 1.0,
            }],
        };
        set.validate()?;
        Ok(set)
    }

    /// Scenario `w` alone, with probability 1.
    pub fn single(&self, w: usize) -> Result<Self> {
        let mut s = self
            .scenarios
            .get(w)
            .cloned()
            .ok_or_else(|| Error::Domain(format!("no scenario {w} in a set of {}", self.len())))?;
        s.probability = 1.0;
        Ok(Self {
            scenarios: vec![s],
            ..self.clone()
        })
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.probability).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != SCENARIO_FILE_VERSION {
            return Err(Error::Validation(format!(
                "unsupported scenario file version {}",
                self.format_version
            )));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Validation("scenario set is empty".into()));
        }
        if self.kinds.is_empty() {
            return Err(Error::Validation("scenario set has no profile kinds".into()));
        }
        for (w, s) in self.scenarios.iter().enumerate() {
            if !(s.probability > 0.0 && s.probability <= 1.0) {
                return Err(Error::Validation(format!(
                    "scenario {w}: probability {} outside (0, 1]",
                    s.probability
                )));
            }
            let kinds: Vec<ProfileKind> = s.profiles.iter().map(|p| p.kind).collect();
            if kinds != self.kinds {
                return Err(Error::Validation(format!("scenario {w}: profile kinds do not match the set")));
            }
            for p in &s.profiles {
                p.validate()?;
            }
        }
        let total = accurate_sum(self.scenarios.iter().map(|s| s.probability));
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::Validation(format!("probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(text)?;
        set.validate()?;
        Ok(set)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Standard normals for one draw, hour by hour.
fn draw_normals(seed: u64, draw: usize) -> [f64; HOURS] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw as u64);
    std::array::from_fn(|_| StandardNormal.sample(&mut rng))
}

/// `n` log-normal perturbations of `base` with uniform probabilities.
pub fn sample(base: &Profile24, sigma: f64, n: usize, seed: u64) -> Result<ScenarioSet> {
    base.validate()?;
    if n == 0 {
        return Err(Error::Domain("need at least one draw".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be a finite non-negative number, got {sigma}")));
    }
    let shift = sigma * sigma / 2.0;
    let probability = 1.0 / n as f64;
    let scenarios: Vec<Scenario> = (0..n)
        .into_par_iter()
        .map(|k| {
            let z = draw_normals(seed, k);
            let values = if sigma == 0.0 {
                base.values.clone()
            } else {
                base.values
                    .iter()
                    .zip(z)
                    .map(|(b, z)| b * (sigma * z - shift).exp())
                    .collect()
            };
            Scenario {
                profiles: vec![Profile24 {
                    kind: base.kind,
                    values,
                }],
                probability,
                source: vec![k],
            }
        })
        .collect();
    Ok(ScenarioSet {
        format_version: SCENARIO_FILE_VERSION,
        kinds: vec![base.kind],
        scenarios,
        provenance: vec![Provenance {
            kind: base.kind,
            seed: Some(seed),
            sigma: Some(sigma),
            draws: n,
            generator: "chacha8-stream-per-draw/ziggurat-normal".into(),
        }],
    })
}

/// Pairwise distances between scenarios after z-normalizing each kind over
/// all scenarios and hours.
pub fn distance_matrix(set: &ScenarioSet) -> Vec<Vec<f64>> {
    let n = set.len();
    let mut features: Vec<Vec<f64>> = vec![Vec::with_capacity(HOURS * set.kinds.len()); n];
    for (ki, _) in set.kinds.iter().enumerate() {
        let all = || set.scenarios.iter().flat_map(|s| s.profiles[ki].values.iter().copied());
        let count = (n * HOURS) as f64;
        let mean = all().sum::<f64>() / count;
        let var = all().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for (f, s) in features.iter_mut().zip(&set.scenarios) {
            f.extend(s.profiles[ki].values.iter().map(|v| (v - mean) / sd));
        }
    }
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = features[i]
                .iter()
                .zip(&features[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Transport cost of moving every unselected scenario onto its nearest
/// selected one.
pub fn kantorovich_cost(distances: &[Vec<f64>], probabilities: &[f64], selected: &[usize]) -> f64 {
    (0..probabilities.len())
        .filter(|j| !selected.contains(j))
        .map(|j| probabilities[j] * selected.iter().map(|&s| distances[j][s]).fold(f64::INFINITY, f64::min))
        .sum()
}

/// Greedy forward selection of `k` scenarios.
pub fn fast_forward(distances: &[Vec<f64>], probabilities: &[f64], k: usize) -> Vec<usize> {
    let n = probabilities.len();
    // nearest[j]: distance from j to the closest selected scenario so far.
    let mut nearest = vec![f64::INFINITY; n];
    let mut chosen = vec![false; n];
    let mut selected = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for u in (0..n).filter(|u| !chosen[*u]) {
            let cost: f64 = (0..n)
                .filter(|j| !chosen[*j] && *j != u)
                .map(|j| probabilities[j] * nearest[j].min(distances[j][u]))
                .sum();
            if best.is_none_or(|(_, c)| cost < c) {
                best = Some((u, cost));
            }
        }
        let (u, _) = best.expect("k <= n");
        chosen[u] = true;
        selected.push(u);
        for j in 0..n {
            nearest[j] = nearest[j].min(distances[j][u]);
        }
    }
    selected.sort_unstable();
    selected
}

/// Single exchanges that lower the transport cost, until none does.
fn improve_by_swaps(distances: &[Vec<f64>], probabilities: &[f64], mut selected: Vec<usize>) -> Vec<usize> {
    let n = probabilities.len();
    let mut cost = kantorovich_cost(distances, probabilities, &selected);
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..selected.len() {
            for u in (0..n).filter(|u| !selected.contains(u)) {
                let mut trial = selected.clone();
                trial[i] = u;
                let c = kantorovich_cost(distances, probabilities, &trial);
                if c < best.map_or(cost, |b| b.2) {
                    best = Some((i, u, c));
                }
            }
        }
        match best {
            Some((i, u, c)) if c < cost => {
                selected[i] = u;
                selected.sort_unstable();
                cost = c;
            }
            _ => return selected,
        }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u128::MAX / 1024 {
            return u128::MAX;
        }
    }
    acc
}

/// Lexicographically first subset of minimum transport cost.
fn exhaustive(distances: &[Vec<f64>], probabilities: &[f64], k: usize) -> Vec<usize> {
    let n = probabilities.len();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut best = (idx.clone(), kantorovich_cost(distances, probabilities, &idx));
    loop {
        // Advance to the next combination.
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best.0;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
        let c = kantorovich_cost(distances, probabilities, &idx);
        if c < best.1 {
            best = (idx.clone(), c);
        }
    }
}

/// Indices of the scenarios kept by [`reduce`], ascending.
pub fn select(set: &ScenarioSet, k: usize) -> Result<Vec<usize>> {
    let n = set.len();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("cannot keep {k} of {n} scenarios")));
    }
    if k == n {
        return Ok((0..n).collect());
    }
    let d = distance_matrix(set);
    let p = set.probabilities();
    if binomial(n, k) <= EXACT_SUBSET_LIMIT {
        return Ok(exhaustive(&d, &p, k));
    }
    let ff = fast_forward(&d, &p, k);
    Ok(improve_by_swaps(&d, &p, ff))
}

/// Keeps `k` scenarios and moves the probability of each dropped scenario
/// onto its nearest kept one (lowest index on ties).
pub fn reduce(set: &ScenarioSet, k: usize) -> Result<ScenarioSet> {
    set.validate()?;
    let selected = select(set, k)?;
    if selected.len() == set.len() {
        return Ok(set.clone());
    }
    let d = distance_matrix(set);
    let mut mass: Vec<Vec<f64>> = selected.iter().map(|&s| vec![set.scenarios[s].probability]).collect();
    for j in (0..set.len()).filter(|j| !selected.contains(j)) {
        let mut target = 0;
        for (pos, &s) in selected.iter().enumerate() {
            if d[j][s] < d[j][selected[target]] {
                target = pos;
            }
        }
        mass[target].push(set.scenarios[j].probability);
    }
    let scenarios = selected
        .iter()
        .zip(mass)
        .map(|(&s, m)| Scenario {
            probability: accurate_sum(m),
            ..set.scenarios[s].clone()
        })
        .collect();
    let out = ScenarioSet {
        scenarios,
        ..set.clone()
    };
    out.validate()?;
    Ok(out)
}

/// Cartesian product of one-kind sets (product probabilities), reduced to
/// `k` scenarios. The `source` of each result lists the index picked from
/// each input set.
pub fn combine(sets: &[&ScenarioSet], k: usize) -> Result<ScenarioSet> {
    if sets.is_empty() {
        return Err(Error::Domain("nothing to combine".into()));
    }
    for s in sets {
        s.validate()?;
    }
    let mut kinds = Vec::new();
    for s in sets {
        for kind in &s.kinds {
            if kinds.contains(kind) {
                return Err(Error::Domain(format!("profile kind {kind} appears in more than one set")));
            }
            kinds.push(*kind);
        }
    }
    let total: usize = sets.iter().map(|s| s.len()).product();
    if k == 0 || k > total {
        return Err(Error::Domain(format!("cannot keep {k} of {total} combinations")));
    }
    let mut scenarios = Vec::with_capacity(total);
    let mut idx = vec![0usize; sets.len()];
    loop {
        let mut profiles = Vec::new();
        let mut probability = 1.0;
        for (s, &i) in sets.iter().zip(&idx) {
            profiles.extend(s.scenarios[i].profiles.iter().cloned());
            probability *= s.scenarios[i].probability;
        }
        scenarios.push(Scenario {
            profiles,
            probability,
            source: idx.clone(),
        });
        // Odometer, last set fastest.
        let mut pos = sets.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < sets[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
        if idx.iter().all(|i| *i == 0) {
            break;
        }
    }
    // Products of probabilities that each sum to one drift by a few ulps;
    // spread the residual proportionally.
    let sum = accurate_sum(scenarios.iter().map(|s| s.probability));
    scenarios.iter_mut().for_each(|s| s.probability /= sum);
    let product = ScenarioSet {
        format_version: SCENARIO_FILE_VERSION,
        kinds,
        scenarios,
        provenance: sets.iter().flat_map(|s| s.provenance.iter().cloned()).collect(),
    };
    reduce(&product, k)
}

/// Per-kind sampling settings for [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSpec {
    pub seed: u64,
    /// Draws per kind before the first reduction.
    pub draws: usize,
    /// Scenarios kept per kind and after combination.
    pub keep: usize,
    pub sigma: [f64; 3],
    pub bases: [Profile24; 3],
}

impl Default for GenerateSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            draws: 100,
            keep: 5,
            sigma: ProfileKind::ALL.map(ProfileKind::default_sigma),
            bases: ProfileKind::ALL.map(Profile24::bundled),
        }
    }
}

/// Sample, reduce each kind to `keep`, combine and reduce again. Each kind
/// draws from its own seed offset so the three kinds are independent.
pub fn generate(spec: &GenerateSpec) -> Result<ScenarioSet> {
    let mut reduced = Vec::new();
    for (i, (base, sigma)) in spec.bases.iter().zip(spec.sigma).enumerate() {
        let seed = spec.seed.wrapping_add(i as u64);
        reduced.push(reduce(&sample(base, sigma, spec.draws, seed)?, spec.keep.min(spec.draws))?);
    }
    let refs: Vec<&ScenarioSet> = reduced.iter().collect();
    let k = spec.keep.min(refs.iter().map(|s| s.len()).product());
    combine(&refs, k)
}
