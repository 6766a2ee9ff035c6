//! MPS interchange and pluggable MILP backends.
//!
//! Two backends are available: HiGHS, loaded at run time from a shared
//! library, and the pure-Rust `microlp` branch and bound. Rows are written in
//! family order and columns in lexicographic order; names are mangled to
//! 8 characters and the mapping is written alongside the MPS file.

use std::collections::{BTreeMap, HashMap};
use std::ffi::{c_char, c_void, CString};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use libloading::Library;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sched_model::{
    validate, Constraint, Family, ScheduleModel, ScheduleSolution, Sense, SolveStatus, VarKind, Variable,
};

/// Selects the backend: `highs`, `microlp` or `auto`.
pub const SOLVER_ENV: &str = "CRACKGRID_SOLVER";
/// Path of the HiGHS shared library.
pub const HIGHS_LIB_ENV: &str = "CRACKGRID_HIGHS_LIB";

const OBJ_ROW: &str = "OBJ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendId {
    /// HiGHS when the library can be found, microlp otherwise.
    Auto,
    Highs,
    Microlp,
}

impl BackendId {
    pub fn from_env() -> Result<Self> {
        match std::env::var(SOLVER_ENV) {
            Ok(v) if !v.is_empty() => v.parse(),
            _ => Ok(BackendId::Auto),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BackendId::Auto => "auto",
            BackendId::Highs => "highs",
            BackendId::Microlp => "microlp",
        }
    }
}

impl FromStr for BackendId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(BackendId::Auto),
            "highs" => Ok(BackendId::Highs),
            "microlp" => Ok(BackendId::Microlp),
            other => Err(Error::Parse(format!("unknown solver backend '{other}'"))),
        }
    }
}

impl fmt::Display for BackendId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub backend: BackendId,
    pub mip_gap: f64,
    /// s
    pub time_limit: f64,
    pub threads: usize,
    pub seed: u64,
    /// Where the model is dumped when the backend fails.
    pub dump_dir: Option<PathBuf>,
    /// Solve independent blocks of the model separately.
    pub decompose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            backend: BackendId::Auto,
            mip_gap: 1e-6,
            time_limit: 600.0,
            threads: 1,
            seed: 0,
            dump_dir: None,
            decompose: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.mip_gap) {
            return Err(Error::Config(format!("MIP gap must lie in [0, 1), got {}", self.mip_gap)));
        }
        if !(self.time_limit > 0.0) {
            return Err(Error::Config(format!("time limit must be positive, got {}", self.time_limit)));
        }
        if self.threads == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        Ok(())
    }
}

/// What a backend returns before validation.
#[derive(Debug, Clone)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub values: Vec<f64>,
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, model: &ScheduleModel, opts: &SolverOptions) -> Result<RawSolution>;
}

/// Resolves `Auto` and constructs the backend.
pub fn backend(id: BackendId) -> Result<Box<dyn Backend>> {
    match id {
        BackendId::Microlp => Ok(Box::new(Microlp)),
        BackendId::Highs => Ok(Box::new(Highs::load()?)),
        BackendId::Auto => match Highs::load() {
            Ok(h) => Ok(Box::new(h)),
            Err(e) => {
                log::info!("HiGHS unavailable ({e}); using microlp");
                Ok(Box::new(Microlp))
            }
        },
    }
}

/// Solves `model` and checks the point against every row.
pub fn solve(model: &ScheduleModel, opts: &SolverOptions) -> Result<ScheduleSolution> {
    opts.validate()?;
    let be = backend(opts.backend)?;
    let started = Instant::now();
    let solved = if opts.decompose {
        solve_blocks(&*be, model, opts)
    } else {
        be.solve(model, opts)
    };
    let raw = match solved {
        Ok(raw) => raw,
        Err(e) => {
            let dump = dump_model(model, opts.dump_dir.as_deref());
            let message = match e {
                Error::Solver { message, .. } => message,
                other => other.to_string(),
            };
            return Err(Error::Solver {
                backend: be.name().into(),
                message,
                dump,
            });
        }
    };
    log::debug!(
        "{}: {} in {:.2} s, objective {:?}",
        be.name(),
        raw.status,
        started.elapsed().as_secs_f64(),
        raw.objective
    );
    let residuals = if raw.values.is_empty() {
        None
    } else {
        Some(validate(model, &raw.values)?)
    };
    if raw.status == SolveStatus::Optimal {
        let report = residuals.as_ref().expect("optimal solution carries values");
        if !report.is_feasible() {
            log::warn!(
                "{} reported optimal but rows {:?} are violated (max {:.3e})",
                be.name(),
                report.flagged(),
                report.max_residual()
            );
        }
    }
    Ok(ScheduleSolution {
        status: raw.status,
        objective: raw.objective,
        bound: raw.bound,
        backend: be.name().into(),
        values: raw.values,
        residuals,
    })
}

/// Variables and rows of one independent part of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub variables: Vec<usize>,
    pub rows: Vec<usize>,
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

/// Connected components of the row/column incidence graph, ordered by their
/// first variable. Variables that appear in no row are gathered in one
/// trailing block.
pub fn blocks(model: &ScheduleModel) -> Vec<Block> {
    let n = model.variables.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut in_row = vec![false; n];
    for c in &model.constraints {
        let mut it = c.terms.iter().map(|t| t.0);
        if let Some(first) = it.next() {
            in_row[first] = true;
            for j in it {
                in_row[j] = true;
                let (a, b) = (find(&mut parent, first), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut out: Vec<Block> = Vec::new();
    let mut loose = Vec::new();
    for j in 0..n {
        if !in_row[j] {
            loose.push(j);
            continue;
        }
        let r = find(&mut parent, j);
        let k = *slot.entry(r).or_insert_with(|| {
            out.push(Block {
                variables: Vec::new(),
                rows: Vec::new(),
            });
            out.len() - 1
        });
        out[k].variables.push(j);
    }
    for (i, c) in model.constraints.iter().enumerate() {
        if let Some(&(j, _)) = c.terms.first() {
            let r = find(&mut parent, j);
            out[slot[&r]].rows.push(i);
        }
    }
    if !loose.is_empty() {
        out.push(Block {
            variables: loose,
            rows: Vec::new(),
        });
    }
    out
}

fn sub_model(model: &ScheduleModel, block: &Block) -> ScheduleModel {
    let mut local = HashMap::new();
    let mut m = ScheduleModel::new(model.name.clone());
    for &j in &block.variables {
        let v = &model.variables[j];
        let k = m.add_bounded_variable(v.symbol.clone(), v.index.clone(), v.kind, v.lower, v.upper);
        m.add_cost(k, model.objective[j]);
        local.insert(j, k);
    }
    for &i in &block.rows {
        let c = &model.constraints[i];
        m.add_constraint(
            c.family,
            c.label.clone(),
            c.index.clone(),
            c.terms.iter().map(|&(j, a)| (local[&j], a)).collect(),
            c.sense,
            c.rhs,
        );
    }
    m
}

/// Solves each block on its own and assembles the point. The sum of block
/// optima is the optimum of a block-separable model, and the per-block
/// relative gaps bound the relative gap of the sum.
fn solve_blocks(be: &dyn Backend, model: &ScheduleModel, opts: &SolverOptions) -> Result<RawSolution> {
    for c in model.constraints.iter().filter(|c| c.terms.is_empty()) {
        let ok = match c.sense {
            Sense::Le => 0.0 <= c.rhs,
            Sense::Ge => 0.0 >= c.rhs,
            Sense::Eq => c.rhs == 0.0,
        };
        if !ok {
            return Ok(RawSolution {
                status: SolveStatus::Infeasible,
                objective: None,
                bound: None,
                values: Vec::new(),
            });
        }
    }
    let parts = blocks(model);
    if parts.len() <= 1 {
        return be.solve(model, opts);
    }
    let started = Instant::now();
    let mut values = vec![0.0; model.variables.len()];
    let mut objective = model.objective_offset;
    let mut bound = Some(model.objective_offset);
    let mut status = SolveStatus::Optimal;
    for part in &parts {
        let remaining = opts.time_limit - started.elapsed().as_secs_f64();
        if remaining <= 0.0 {
            status = SolveStatus::TimeLimit;
            break;
        }
        let sub = SolverOptions {
            time_limit: remaining,
            ..opts.clone()
        };
        let r = be.solve(&sub_model(model, part), &sub)?;
        match r.status {
            SolveStatus::Infeasible => {
                return Ok(RawSolution {
                    status: SolveStatus::Infeasible,
                    objective: None,
                    bound: None,
                    values: Vec::new(),
                })
            }
            SolveStatus::TimeLimit => status = SolveStatus::TimeLimit,
            SolveStatus::Optimal => {}
        }
        if r.values.is_empty() {
            status = SolveStatus::TimeLimit;
            break;
        }
        for (&j, &x) in part.variables.iter().zip(&r.values) {
            values[j] = x;
        }
        objective += r.objective.unwrap_or(0.0);
        bound = bound.zip(r.bound).map(|(a, b)| a + b);
    }
    if status == SolveStatus::TimeLimit && values.iter().all(|&v| v == 0.0) {
        return Ok(RawSolution {
            status,
            objective: None,
            bound: None,
            values: Vec::new(),
        });
    }
    Ok(RawSolution {
        status,
        objective: Some(objective),
        bound,
        values,
    })
}

fn dump_model(model: &ScheduleModel, dir: Option<&Path>) -> Option<PathBuf> {
    let dir = dir.map(Path::to_path_buf).unwrap_or_else(std::env::temp_dir);
    let sig = signature(model);
    let path = dir.join(format!("crackgrid-{}.mps", &sig[..12]));
    match write_mps_files(model, &path) {
        Ok(()) => Some(path),
        Err(e) => {
            log::warn!("could not dump model to {}: {e}", path.display());
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Canonical form and MPS

fn sense_code(s: Sense) -> &'static str {
    match s {
        Sense::Le => "L",
        Sense::Ge => "G",
        Sense::Eq => "E",
    }
}

/// Row order: family, then label, then index.
fn row_order(model: &ScheduleModel) -> Vec<usize> {
    let mut order: Vec<usize> = (0..model.constraints.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&model.constraints[a], &model.constraints[b]);
        (x.family, &x.label, &x.index).cmp(&(y.family, &y.label, &y.index))
    });
    order
}

fn column_order(model: &ScheduleModel) -> Vec<usize> {
    let mut order: Vec<usize> = (0..model.variables.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&model.variables[a], &model.variables[b]);
        (&x.symbol, &x.index).cmp(&(&y.symbol, &y.index))
    });
    order
}

/// SHA-256 of the sorted rows, columns, bounds and costs.
pub fn signature(model: &ScheduleModel) -> String {
    let mut h = Sha256::new();
    let names: Vec<String> = model.variables.iter().map(Variable::name).collect();
    let mut cols: Vec<usize> = (0..model.variables.len()).collect();
    cols.sort_by(|&a, &b| names[a].cmp(&names[b]));
    for &j in &cols {
        let v = &model.variables[j];
        h.update(format!("C {} {:?} {:?} {:?} {:?}\n", names[j], v.kind, v.lower, v.upper, model.objective[j]).as_bytes());
    }
    let mut rows: Vec<(Family, String, usize)> = model
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| (c.family, c.name(), i))
        .collect();
    rows.sort();
    for (family, name, i) in rows {
        let c = &model.constraints[i];
        let mut terms: BTreeMap<&str, f64> = BTreeMap::new();
        for &(j, a) in &c.terms {
            *terms.entry(names[j].as_str()).or_insert(0.0) += a;
        }
        let mut line = format!("R {} {} {} {:?}", family.tag(), name, sense_code(c.sense), c.rhs);
        for (n, a) in terms.iter().filter(|(_, a)| **a != 0.0) {
            line.push_str(&format!(" {n}:{a:?}"));
        }
        line.push('\n');
        h.update(line.as_bytes());
    }
    h.update(format!("O {:?}\n", model.objective_offset).as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Long-to-short name table of a written MPS file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NameTable {
    /// (short, long, family) per row in file order.
    pub rows: Vec<(String, String, Family)>,
    /// (short, long) per column in file order.
    pub columns: Vec<(String, String)>,
}

impl NameTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "short", "long", "family"])?;
        for (s, l, f) in &self.rows {
            w.write_record(["row", s, l, f.tag()])?;
        }
        for (s, l) in &self.columns {
            w.write_record(["column", s, l, ""])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut t = NameTable::default();
        for rec in csv::Reader::from_reader(input).records() {
            let rec = rec?;
            let field = |k: usize| rec.get(k).unwrap_or("").to_string();
            match field(0).as_str() {
                "row" => t.rows.push((field(1), field(2), field(3).parse()?)),
                "column" => t.columns.push((field(1), field(2))),
                other => return Err(Error::Parse(format!("unknown name-table entry '{other}'"))),
            }
        }
        Ok(t)
    }
}

fn mps_number(v: f64) -> String {
    format!("{v}")
}

fn sanitize(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_graphic() { c } else { '_' }).collect();
    if s.is_empty() {
        "MODEL".into()
    } else {
        s
    }
}

fn field_line(a: &str, b: &str, v: f64) -> String {
    format!("    {a:<8}  {b:<8}  {}\n", mps_number(v))
}

/// Writes fixed-format MPS, one coefficient per line so that full-precision
/// numbers never shift a later field.
pub fn write_mps<W: Write>(model: &ScheduleModel, mut out: W) -> Result<NameTable> {
    let rows = row_order(model);
    let cols = column_order(model);
    if rows.len() > 9_999_999 || cols.len() > 9_999_999 {
        return Err(Error::Serialization("model too large for 8-character names".into()));
    }
    let mut table = NameTable::default();
    let mut seen = std::collections::HashSet::new();
    let mut row_short = vec![String::new(); model.constraints.len()];
    for (k, &i) in rows.iter().enumerate() {
        let c = &model.constraints[i];
        let long = c.name();
        if !seen.insert(("r", long.clone())) {
            return Err(Error::Serialization(format!("duplicate row name {long}")));
        }
        row_short[i] = format!("R{:07}", k + 1);
        table.rows.push((row_short[i].clone(), long, c.family));
    }
    let mut col_short = vec![String::new(); model.variables.len()];
    for (k, &j) in cols.iter().enumerate() {
        let long = model.variables[j].name();
        if !seen.insert(("c", long.clone())) {
            return Err(Error::Serialization(format!("duplicate column name {long}")));
        }
        col_short[j] = format!("C{:07}", k + 1);
        table.columns.push((col_short[j].clone(), long));
    }

    let mut s = String::new();
    s.push_str(&format!("{:<14}{}\n", "NAME", sanitize(&model.name)));
    s.push_str("ROWS\n");
    s.push_str(&format!(" N  {OBJ_ROW}\n"));
    for &i in &rows {
        s.push_str(&format!(" {}  {}\n", sense_code(model.constraints[i].sense), row_short[i]));
    }
    // Coefficients by column, rows in file order.
    let mut rank = vec![0usize; model.constraints.len()];
    for (k, &i) in rows.iter().enumerate() {
        rank[i] = k;
    }
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.variables.len()];
    for (i, c) in model.constraints.iter().enumerate() {
        for &(j, a) in &c.terms {
            if a != 0.0 {
                by_col[j].push((rank[i], a));
            }
        }
    }
    if !cols.is_empty() {
        s.push_str("COLUMNS\n");
        let mut integer = false;
        let mut markers = 0;
        for &j in &cols {
            let binary = model.variables[j].kind == VarKind::Binary;
            if binary != integer {
                let tag = if binary { "'INTORG'" } else { "'INTEND'" };
                s.push_str(&format!("    {:<8}  {:<8}  {tag}\n", format!("M{markers:07}"), "'MARKER'"));
                markers += 1;
                integer = binary;
            }
            if model.objective[j] != 0.0 {
                s.push_str(&field_line(&col_short[j], OBJ_ROW, model.objective[j]));
            }
            let mut entries = by_col[j].clone();
            entries.sort_by_key(|e| e.0);
            for (r, a) in entries {
                s.push_str(&field_line(&col_short[j], &row_short[rows[r]], a));
            }
        }
        if integer {
            s.push_str(&format!("    {:<8}  {:<8}  'INTEND'\n", format!("M{markers:07}"), "'MARKER'"));
        }
    }
    let rhs: Vec<usize> = rows.iter().copied().filter(|&i| model.constraints[i].rhs != 0.0).collect();
    if !rhs.is_empty() || model.objective_offset != 0.0 {
        s.push_str("RHS\n");
        if model.objective_offset != 0.0 {
            s.push_str(&field_line("RHS", OBJ_ROW, -model.objective_offset));
        }
        for i in rhs {
            s.push_str(&field_line("RHS", &row_short[i], model.constraints[i].rhs));
        }
    }
    let mut bounds = String::new();
    for &j in &cols {
        let v = &model.variables[j];
        let n = &col_short[j];
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            bounds.push_str(&format!(" BV BND       {n}\n"));
            continue;
        }
        if v.lower == v.upper {
            bounds.push_str(&format!(" FX BND       {n:<8}  {}\n", mps_number(v.lower)));
            continue;
        }
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            bounds.push_str(&format!(" FR BND       {n}\n"));
            continue;
        }
        if v.lower == f64::NEG_INFINITY {
            bounds.push_str(&format!(" MI BND       {n}\n"));
        } else if v.lower != 0.0 || v.kind == VarKind::Binary {
            bounds.push_str(&format!(" LO BND       {n:<8}  {}\n", mps_number(v.lower)));
        }
        if v.upper != f64::INFINITY || v.kind == VarKind::Binary {
            let up = if v.upper == f64::INFINITY { 1e30 } else { v.upper };
            bounds.push_str(&format!(" UP BND       {n:<8}  {}\n", mps_number(up)));
        }
    }
    if !bounds.is_empty() {
        s.push_str("BOUNDS\n");
        s.push_str(&bounds);
    }
    s.push_str("ENDATA\n");
    out.write_all(s.as_bytes())?;
    Ok(table)
}

/// Writes `path` and the name table next to it as `<path>.names.csv`.
pub fn write_mps_files(model: &ScheduleModel, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    let table = write_mps(model, &mut buf)?;
    std::fs::write(path, buf)?;
    let mut side = Vec::new();
    table.write_csv(&mut side)?;
    std::fs::write(sidecar_path(path), side)?;
    Ok(())
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".names.csv");
    PathBuf::from(s)
}

pub fn read_mps_files(path: &Path) -> Result<ScheduleModel> {
    let table = NameTable::read_csv(std::fs::File::open(sidecar_path(path))?)?;
    read_mps(std::fs::File::open(path)?, &table)
}

fn split_name(long: &str) -> (String, Vec<usize>) {
    if let (Some(open), true) = (long.find('['), long.ends_with(']')) {
        let inner = &long[open + 1..long.len() - 1];
        let index: Option<Vec<usize>> = inner.split(',').map(|p| p.parse().ok()).collect();
        if let Some(index) = index {
            return (long[..open].to_string(), index);
        }
    }
    (long.to_string(), Vec::new())
}

fn parse_num(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{s}' in MPS file")))
}

/// Reads an MPS file written by [`write_mps`], restoring long names and
/// families from `table`.
pub fn read_mps<R: Read>(input: R, table: &NameTable) -> Result<ScheduleModel> {
    let row_names: HashMap<&str, (&str, Family)> =
        table.rows.iter().map(|(s, l, f)| (s.as_str(), (l.as_str(), *f))).collect();
    let col_names: HashMap<&str, &str> = table.columns.iter().map(|(s, l)| (s.as_str(), l.as_str())).collect();

    let mut model = ScheduleModel::new("");
    let mut row_ix: HashMap<String, usize> = HashMap::new();
    let mut col_ix: HashMap<String, usize> = HashMap::new();
    let mut section = String::new();
    let mut integer = false;

    for (lineno, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        let err = |m: &str| Error::Parse(format!("MPS line {}: {m}", lineno + 1));
        if !line.starts_with(' ') {
            let mut parts = line.split_whitespace();
            section = parts.next().unwrap_or("").to_string();
            if section == "NAME" {
                model.name = parts.collect::<Vec<_>>().join(" ");
            }
            if !matches!(section.as_str(), "NAME" | "ROWS" | "COLUMNS" | "RHS" | "BOUNDS" | "ENDATA") {
                return Err(err(&format!("unsupported section {section}")));
            }
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        match section.as_str() {
            "ROWS" => {
                let (kind, short) = match f.as_slice() {
                    [k, n] => (*k, *n),
                    _ => return Err(err("malformed row")),
                };
                if kind == "N" {
                    continue;
                }
                let sense = match kind {
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    _ => return Err(err("unknown row type")),
                };
                let (long, family) = row_names.get(short).ok_or_else(|| err("row missing from name table"))?;
                let (label, index) = split_name(long);
                let i = model.add_constraint(*family, label, index, Vec::new(), sense, 0.0);
                row_ix.insert(short.to_string(), i);
            }
            "COLUMNS" => {
                if f.len() == 3 && f[1] == "'MARKER'" {
                    integer = match f[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        _ => return Err(err("unknown marker")),
                    };
                    continue;
                }
                if f.len() != 3 && f.len() != 5 {
                    return Err(err("malformed column entry"));
                }
                let j = match col_ix.get(f[0]) {
                    Some(&j) => j,
                    None => {
                        let long = col_names.get(f[0]).ok_or_else(|| err("column missing from name table"))?;
                        let (symbol, index) = split_name(long);
                        let kind = if integer { VarKind::Binary } else { VarKind::Continuous };
                        let j = model.add_variable(symbol, index, kind);
                        col_ix.insert(f[0].to_string(), j);
                        j
                    }
                };
                for pair in f[1..].chunks(2) {
                    let a = parse_num(pair[1])?;
                    if pair[0] == OBJ_ROW {
                        model.objective[j] += a;
                    } else {
                        let &i = row_ix.get(pair[0]).ok_or_else(|| err("unknown row"))?;
                        model.constraints[i].terms.push((j, a));
                    }
                }
            }
            "RHS" => {
                if f.len() != 3 && f.len() != 5 {
                    return Err(err("malformed RHS entry"));
                }
                for pair in f[1..].chunks(2) {
                    let v = parse_num(pair[1])?;
                    if pair[0] == OBJ_ROW {
                        model.objective_offset = -v;
                    } else {
                        let &i = row_ix.get(pair[0]).ok_or_else(|| err("unknown row"))?;
                        model.constraints[i].rhs = v;
                    }
                }
            }
            "BOUNDS" => {
                if f.len() < 3 {
                    return Err(err("malformed bound"));
                }
                let &j = col_ix.get(f[2]).ok_or_else(|| err("bound on unknown column"))?;
                let v = &mut model.variables[j];
                let value = || f.get(3).map(|s| parse_num(s)).transpose();
                match f[0] {
                    "BV" => {
                        v.kind = VarKind::Binary;
                        v.lower = 0.0;
                        v.upper = 1.0;
                    }
                    "LO" => v.lower = value()?.ok_or_else(|| err("missing value"))?,
                    "UP" => {
                        let u = value()?.ok_or_else(|| err("missing value"))?;
                        v.upper = if u >= 1e30 { f64::INFINITY } else { u };
                    }
                    "FX" => {
                        let x = value()?.ok_or_else(|| err("missing value"))?;
                        v.lower = x;
                        v.upper = x;
                    }
                    "MI" => v.lower = f64::NEG_INFINITY,
                    "PL" => v.upper = f64::INFINITY,
                    "FR" => {
                        v.lower = f64::NEG_INFINITY;
                        v.upper = f64::INFINITY;
                    }
                    other => return Err(err(&format!("unsupported bound type {other}"))),
                }
            }
            "ENDATA" => break,
            _ => return Err(err("data outside a section")),
        }
    }
    // Columns that appear in no row and have no cost never reach COLUMNS.
    if col_ix.len() != table.columns.len() {
        for (short, long) in &table.columns {
            if !col_ix.contains_key(short) {
                let (symbol, index) = split_name(long);
                let j = model.add_variable(symbol, index, VarKind::Continuous);
                col_ix.insert(short.clone(), j);
            }
        }
    }
    Ok(model)
}

// ---------------------------------------------------------------------------
// microlp

pub struct Microlp;

impl Backend for Microlp {
    fn name(&self) -> &'static str {
        "microlp"
    }

    fn solve(&self, model: &ScheduleModel, opts: &SolverOptions) -> Result<RawSolution> {
        use microlp::{ComparisonOp, OptimizationDirection, Problem, SolutionStatus, SolveOptions, SolveOutcome};
        let mut p = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<microlp::Variable> = model
            .variables
            .iter()
            .zip(&model.objective)
            .map(|(v, &c)| match v.kind {
                VarKind::Binary if v.lower == 0.0 && v.upper == 1.0 => p.add_binary_var(c),
                VarKind::Binary => p.add_integer_var(c, (v.lower.ceil() as i32, v.upper.floor() as i32)),
                VarKind::Continuous => p.add_var(c, (v.lower, v.upper)),
            })
            .collect();
        for c in &model.constraints {
            let op = match c.sense {
                Sense::Le => ComparisonOp::Le,
                Sense::Ge => ComparisonOp::Ge,
                Sense::Eq => ComparisonOp::Eq,
            };
            let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
            for &(j, a) in &c.terms {
                *merged.entry(j).or_insert(0.0) += a;
            }
            let expr: Vec<(microlp::Variable, f64)> = merged.into_iter().map(|(j, a)| (vars[j], a)).collect();
            p.add_constraint(expr.as_slice(), op, c.rhs);
        }
        let mut options = SolveOptions::default();
        options.time_limit = Some(Duration::from_secs_f64(opts.time_limit));
        options.mip_gap = opts.mip_gap;
        match p.solve_with(options) {
            Ok(SolveOutcome::Solution(s)) => {
                let values: Vec<f64> = vars.iter().map(|&v| s.var_value(v)).collect();
                let objective = model.objective_offset + s.objective();
                let proven = s.status() == SolutionStatus::Optimal
                    || s.termination_reason() == microlp::TerminationReason::MipGap;
                let bound = s.gap().map(|g| objective - g * objective.abs());
                Ok(RawSolution {
                    status: if proven { SolveStatus::Optimal } else { SolveStatus::TimeLimit },
                    objective: Some(objective),
                    bound,
                    values,
                })
            }
            Ok(SolveOutcome::Interrupted(_)) => Ok(RawSolution {
                status: SolveStatus::TimeLimit,
                objective: None,
                bound: None,
                values: Vec::new(),
            }),
            Err(microlp::Error::Infeasible) => Ok(RawSolution {
                status: SolveStatus::Infeasible,
                objective: None,
                bound: None,
                values: Vec::new(),
            }),
            Err(e) => Err(Error::Solver {
                backend: "microlp".into(),
                message: e.to_string(),
                dump: None,
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// HiGHS through its C interface

type HighsInt = i32;

const MODEL_STATUS_MODEL_EMPTY: HighsInt = 6;
const MODEL_STATUS_OPTIMAL: HighsInt = 7;
const MODEL_STATUS_INFEASIBLE: HighsInt = 8;
const MODEL_STATUS_UNBOUNDED_OR_INFEASIBLE: HighsInt = 9;
const MODEL_STATUS_TIME_LIMIT: HighsInt = 13;
const SOLUTION_STATUS_FEASIBLE: HighsInt = 2;

#[allow(clippy::type_complexity)]
struct HighsApi {
    _lib: Library,
    create: unsafe extern "C" fn() -> *mut c_void,
    destroy: unsafe extern "C" fn(*mut c_void),
    sizeof_int: unsafe extern "C" fn(*const c_void) -> HighsInt,
    pass_mip: unsafe extern "C" fn(
        *mut c_void,
        HighsInt,
        HighsInt,
        HighsInt,
        HighsInt,
        HighsInt,
        f64,
        *const f64,
        *const f64,
        *const f64,
        *const f64,
        *const f64,
        *const HighsInt,
        *const HighsInt,
        *const f64,
        *const HighsInt,
    ) -> HighsInt,
    set_bool: unsafe extern "C" fn(*mut c_void, *const c_char, HighsInt) -> HighsInt,
    set_int: unsafe extern "C" fn(*mut c_void, *const c_char, HighsInt) -> HighsInt,
    set_double: unsafe extern "C" fn(*mut c_void, *const c_char, f64) -> HighsInt,
    run: unsafe extern "C" fn(*mut c_void) -> HighsInt,
    model_status: unsafe extern "C" fn(*const c_void) -> HighsInt,
    solution: unsafe extern "C" fn(*const c_void, *mut f64, *mut f64, *mut f64, *mut f64) -> HighsInt,
    objective: unsafe extern "C" fn(*const c_void) -> f64,
    int_info: unsafe extern "C" fn(*const c_void, *const c_char, *mut HighsInt) -> HighsInt,
    double_info: unsafe extern "C" fn(*const c_void, *const c_char, *mut f64) -> HighsInt,
}

// The function pointers are plain C entry points; each solve owns its own
// HiGHS instance.
unsafe impl Send for HighsApi {}
unsafe impl Sync for HighsApi {}

fn highs_candidates() -> Vec<PathBuf> {
    let mut out = Vec::new();
    if let Some(p) = std::env::var_os(HIGHS_LIB_ENV) {
        out.push(PathBuf::from(p));
        return out;
    }
    out.extend(["libhighs.so", "libhighs.so.1", "libhighs.dylib", "highs.dll"].map(PathBuf::from));
    // Wheels of the highspy Python package bundle the library.
    let mut roots = vec![PathBuf::from("/usr/local/lib"), PathBuf::from("/usr/lib")];
    if let Some(home) = std::env::var_os("HOME") {
        roots.push(Path::new(&home).join(".local/lib"));
    }
    for root in roots {
        let Ok(entries) = std::fs::read_dir(&root) else { continue };
        let mut pythons: Vec<PathBuf> = entries
            .flatten()
            .map(|e| e.path())
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("python3")))
            .collect();
        pythons.sort();
        for py in pythons {
            for site in ["dist-packages", "site-packages"] {
                let dir = py.join(site).join("highspy");
                let Ok(files) = std::fs::read_dir(&dir) else { continue };
                let mut libs: Vec<PathBuf> = files
                    .flatten()
                    .map(|e| e.path())
                    .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("libhighs")))
                    .collect();
                libs.sort();
                out.extend(libs);
            }
        }
    }
    out
}

impl HighsApi {
    fn open(path: &Path) -> std::result::Result<Self, String> {
        // SAFETY: loading a shared library runs its initializers; the HiGHS
        // library has no unusual ones.
        let lib = unsafe { Library::new(path) }.map_err(|e| e.to_string())?;
        macro_rules! sym {
            ($name:literal) => {
                // SAFETY: the signature matches the HiGHS C interface.
                *unsafe { lib.get($name) }.map_err(|e| format!("{}: {e}", String::from_utf8_lossy($name)))?
            };
        }
        let api = HighsApi {
            create: sym!(b"Highs_create\0"),
            destroy: sym!(b"Highs_destroy\0"),
            sizeof_int: sym!(b"Highs_getSizeofHighsInt\0"),
            pass_mip: sym!(b"Highs_passMip\0"),
            set_bool: sym!(b"Highs_setBoolOptionValue\0"),
            set_int: sym!(b"Highs_setIntOptionValue\0"),
            set_double: sym!(b"Highs_setDoubleOptionValue\0"),
            run: sym!(b"Highs_run\0"),
            model_status: sym!(b"Highs_getModelStatus\0"),
            solution: sym!(b"Highs_getSolution\0"),
            objective: sym!(b"Highs_getObjectiveValue\0"),
            int_info: sym!(b"Highs_getIntInfoValue\0"),
            double_info: sym!(b"Highs_getDoubleInfoValue\0"),
            _lib: lib,
        };
        // SAFETY: null is accepted; the function only reports a constant.
        let size = unsafe { (api.sizeof_int)(std::ptr::null()) };
        if size as usize != std::mem::size_of::<HighsInt>() {
            return Err(format!("library uses {size}-byte integers"));
        }
        Ok(api)
    }
}

fn highs_api() -> std::result::Result<Arc<HighsApi>, String> {
    static API: OnceLock<std::result::Result<Arc<HighsApi>, String>> = OnceLock::new();
    API.get_or_init(|| {
        let mut errors = Vec::new();
        for path in highs_candidates() {
            match HighsApi::open(&path) {
                Ok(api) => {
                    log::debug!("loaded HiGHS from {}", path.display());
                    return Ok(Arc::new(api));
                }
                Err(e) => errors.push(format!("{}: {e}", path.display())),
            }
        }
        Err(format!("no usable HiGHS library ({})", errors.join("; ")))
    })
    .clone()
}

pub struct Highs {
    api: Arc<HighsApi>,
}

impl Highs {
    pub fn load() -> Result<Self> {
        highs_api().map(|api| Highs { api }).map_err(|message| Error::Solver {
            backend: "highs".into(),
            message,
            dump: None,
        })
    }

    pub fn available() -> bool {
        highs_api().is_ok()
    }
}

/// Owns one HiGHS instance.
struct Instance<'a> {
    api: &'a HighsApi,
    ptr: *mut c_void,
}

impl Drop for Instance<'_> {
    fn drop(&mut self) {
        // SAFETY: created by Highs_create and destroyed once.
        unsafe { (self.api.destroy)(self.ptr) }
    }
}

impl Instance<'_> {
    fn option_failed(name: &str) -> Error {
        Error::Config(format!("HiGHS rejected option {name}"))
    }

    fn set_bool(&self, name: &str, v: bool) -> Result<()> {
        let c = CString::new(name).unwrap();
        // SAFETY: valid instance and NUL-terminated name.
        match unsafe { (self.api.set_bool)(self.ptr, c.as_ptr(), v as HighsInt) } {
            0 => Ok(()),
            _ => Err(Self::option_failed(name)),
        }
    }

    fn set_int(&self, name: &str, v: HighsInt) -> Result<()> {
        let c = CString::new(name).unwrap();
        // SAFETY: as above.
        match unsafe { (self.api.set_int)(self.ptr, c.as_ptr(), v) } {
            0 => Ok(()),
            _ => Err(Self::option_failed(name)),
        }
    }

    fn set_double(&self, name: &str, v: f64) -> Result<()> {
        let c = CString::new(name).unwrap();
        // SAFETY: as above.
        match unsafe { (self.api.set_double)(self.ptr, c.as_ptr(), v) } {
            0 => Ok(()),
            _ => Err(Self::option_failed(name)),
        }
    }

    fn int_info(&self, name: &str) -> Option<HighsInt> {
        let c = CString::new(name).unwrap();
        let mut v: HighsInt = 0;
        // SAFETY: as above, `v` outlives the call.
        (unsafe { (self.api.int_info)(self.ptr, c.as_ptr(), &mut v) } == 0).then_some(v)
    }

    fn double_info(&self, name: &str) -> Option<f64> {
        let c = CString::new(name).unwrap();
        let mut v = 0.0;
        // SAFETY: as above.
        (unsafe { (self.api.double_info)(self.ptr, c.as_ptr(), &mut v) } == 0).then_some(v)
    }
}

impl Backend for Highs {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, model: &ScheduleModel, opts: &SolverOptions) -> Result<RawSolution> {
        let api = &*self.api;
        let n = model.variables.len();
        let m = model.constraints.len();
        let too_big = |what: &str| Error::Config(format!("too many {what} for HiGHS 32-bit indices"));
        let n_i: HighsInt = n.try_into().map_err(|_| too_big("columns"))?;
        let m_i: HighsInt = m.try_into().map_err(|_| too_big("rows"))?;

        // Column-wise matrix with duplicate entries merged.
        let mut by_col: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (i, c) in model.constraints.iter().enumerate() {
            for &(j, a) in &c.terms {
                *by_col[j].entry(i).or_insert(0.0) += a;
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut index = Vec::new();
        let mut value = Vec::new();
        for col in &by_col {
            start.push(index.len() as HighsInt);
            for (&i, &a) in col {
                if a != 0.0 {
                    index.push(i as HighsInt);
                    value.push(a);
                }
            }
        }
        start.push(index.len() as HighsInt);
        let nnz: HighsInt = index.len().try_into().map_err(|_| too_big("nonzeros"))?;
        let lower: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
        let upper: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
        let integrality: Vec<HighsInt> = model
            .variables
            .iter()
            .map(|v| (v.kind == VarKind::Binary) as HighsInt)
            .collect();
        let (row_lo, row_hi): (Vec<f64>, Vec<f64>) = model
            .constraints
            .iter()
            .map(|c: &Constraint| match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            })
            .unzip();

        // SAFETY: returns a fresh instance owned by `inst`.
        let inst = Instance {
            api,
            ptr: unsafe { (api.create)() },
        };
        if inst.ptr.is_null() {
            return Err(Error::Config("HiGHS could not create an instance".into()));
        }
        inst.set_bool("output_flag", false)?;
        inst.set_double("mip_rel_gap", opts.mip_gap)?;
        inst.set_double("time_limit", opts.time_limit)?;
        inst.set_int("threads", opts.threads.min(HighsInt::MAX as usize) as HighsInt)?;
        inst.set_int("random_seed", (opts.seed % (HighsInt::MAX as u64)) as HighsInt)?;
        inst.set_double("mip_feasibility_tolerance", 1e-7)?;

        // Pointers into empty vectors are dangling but never read.
        // SAFETY: every array has the length HiGHS expects for n, m and nnz.
        let rc = unsafe {
            (api.pass_mip)(
                inst.ptr,
                n_i,
                m_i,
                nnz,
                1,
                1,
                model.objective_offset,
                model.objective.as_ptr(),
                lower.as_ptr(),
                upper.as_ptr(),
                row_lo.as_ptr(),
                row_hi.as_ptr(),
                start.as_ptr(),
                index.as_ptr(),
                value.as_ptr(),
                integrality.as_ptr(),
            )
        };
        if rc < 0 {
            return Err(Error::Config(format!("HiGHS rejected the model (status {rc})")));
        }
        // SAFETY: valid instance.
        let rc = unsafe { (api.run)(inst.ptr) };
        if rc < 0 {
            return Err(Error::Numerical {
                x: 0.0,
                message: format!("HiGHS run failed (status {rc})"),
            });
        }
        // SAFETY: valid instance.
        let status = unsafe { (api.model_status)(inst.ptr) };
        let has_point = inst.int_info("primal_solution_status") == Some(SOLUTION_STATUS_FEASIBLE);
        let status = match status {
            MODEL_STATUS_OPTIMAL | MODEL_STATUS_MODEL_EMPTY => SolveStatus::Optimal,
            MODEL_STATUS_INFEASIBLE | MODEL_STATUS_UNBOUNDED_OR_INFEASIBLE => SolveStatus::Infeasible,
            MODEL_STATUS_TIME_LIMIT => SolveStatus::TimeLimit,
            other => {
                return Err(Error::Numerical {
                    x: 0.0,
                    message: format!("HiGHS ended with model status {other}"),
                })
            }
        };
        if status == SolveStatus::Infeasible || !has_point && n > 0 {
            return Ok(RawSolution {
                status,
                objective: None,
                bound: None,
                values: Vec::new(),
            });
        }
        let mut col_value = vec![0.0; n];
        let mut col_dual = vec![0.0; n];
        let mut row_value = vec![0.0; m];
        let mut row_dual = vec![0.0; m];
        // SAFETY: buffers sized to the model.
        unsafe {
            (api.solution)(
                inst.ptr,
                col_value.as_mut_ptr(),
                col_dual.as_mut_ptr(),
                row_value.as_mut_ptr(),
                row_dual.as_mut_ptr(),
            )
        };
        // SAFETY: valid instance.
        let objective = unsafe { (api.objective)(inst.ptr) };
        let bound = if integrality.iter().any(|&k| k == 1) {
            inst.double_info("mip_dual_bound")
        } else {
            Some(objective)
        };
        Ok(RawSolution {
            status,
            objective: Some(objective),
            bound,
            values: col_value,
        })
    }
}
