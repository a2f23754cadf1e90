//! Readers and writers for every table file.
//!
//! Grid directives hold the shortest exact decimal form of each value, so
//! grids survive a round trip unchanged. Table bodies use [`fmt_f64`].

use std::fmt::Display;
use std::fmt::Write as _;
use std::path::Path;

use crate::aggregate::{
    Completeness, EffectiveEntry, EffectiveKey, EffectiveRateTable, ThermalKey, ThermalRateTable,
    WeightsTable,
};
use crate::compare::{table_label, AgreementEntry, DalitzPoint, ScalingRow, StateMapping};
use crate::error::{Error, Result};
use crate::ratecalc::{RateTable, SmoothnessReport};
use crate::states::{
    AsymTopState, EnergyOrigin, LevelList, LinearRotorState, PopulationRow,
    PopulationTable, RotorState, Species, Symmetry, SymmetryFilter,
};
use crate::xsec::{CrossSectionTable, EnergyGrid, TransitionKey};

use super::config::validate_temperatures;
use super::{fmt_f64, parse_field, read_file, write_file, Body};

const NA: &str = "NA";
const T_GRID: &str = "T_grid_K";
const U_GRID: &str = "U_grid_cm1";

/// Name from the `# format:` line, if the text has one.
pub fn detect_format(text: &str) -> Option<&str> {
    let line = text.lines().map(str::trim).find(|l| !l.is_empty())?;
    let rest = line.strip_prefix("# format:")?.trim();
    let (name, version) = rest.split_once(' ')?;
    (version.trim() == "v1").then_some(name)
}

fn header(out: &mut String, name: &str) {
    let _ = writeln!(out, "# format: {name} v1");
}

fn grid_directive(out: &mut String, key: &str, values: &[f64]) {
    let values: Vec<String> = values.iter().map(f64::to_string).collect();
    let _ = writeln!(out, "# {key}: {}", values.join(" "));
}

fn push_floats(out: &mut String, values: &[f64]) {
    for v in values {
        out.push(' ');
        out.push_str(&fmt_f64(*v));
    }
}

fn parse_temps(body: &Body, path: &Path) -> Result<Vec<f64>> {
    let (line, value) = body
        .directive(T_GRID)
        .ok_or_else(|| Error::parse(path, 1, format!("missing `# {T_GRID}:` directive")))?;
    let temps = parse_floats(&value.split_whitespace().collect::<Vec<_>>(), path, line)?;
    validate_temperatures(&temps).map_err(|e| Error::parse(path, line, e.to_string()))?;
    Ok(temps)
}

fn parse_floats(fields: &[&str], path: &Path, line: usize) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| parse_field::<f64>(f, "number", path, line))
        .collect()
}

fn expect_width(fields: &[&str], width: usize, path: &Path, line: usize) -> Result<()> {
    if fields.len() != width {
        return Err(Error::parse(
            path,
            line,
            format!("expected {width} columns, found {}", fields.len()),
        ));
    }
    Ok(())
}

fn at_line(path: &Path, line: usize) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::parse(path, line, e.to_string())
}

fn symmetry_field(field: &str, path: &Path, line: usize) -> Result<Symmetry> {
    field.parse().map_err(at_line(path, line))
}

// ---- levels ----

pub fn parse_levels(text: &str, path: &Path) -> Result<LevelList> {
    let body = Body::parse(text, "levels", path)?;
    let species = match body.directive("species") {
        Some((_, "asym-top")) => Species::AsymTop,
        Some((_, "linear-rotor")) => Species::LinearRotor,
        Some((line, other)) => {
            return Err(Error::parse(path, line, format!("unknown species {other:?}")))
        }
        None => match body.rows().first() {
            Some((_, f)) if f.len() == 5 => Species::AsymTop,
            Some((_, f)) if f.len() == 3 => Species::LinearRotor,
            Some((line, _)) => {
                return Err(Error::parse(path, *line, "cannot infer species from row width"))
            }
            None => return Err(Error::parse(path, 1, "missing `# species:` directive")),
        },
    };
    let origin = match body.directive("energy_origin") {
        None | Some((_, "absolute")) => EnergyOrigin::Absolute,
        Some((_, "ladder")) => EnergyOrigin::SymmetryLadder,
        Some((line, other)) => {
            return Err(Error::parse(path, line, format!("unknown energy origin {other:?}")))
        }
    };
    let filter = match body.directive("filter") {
        None | Some((_, "all")) => SymmetryFilter::All,
        Some((line, s)) => SymmetryFilter::Only(symmetry_field(s, path, line)?),
    };
    let mut states = Vec::with_capacity(body.rows().len());
    for (line, f) in body.rows() {
        let line = *line;
        let index = parse_field(f[0], "index", path, line)?;
        let state = match species {
            Species::AsymTop => {
                expect_width(f, 5, path, line)?;
                RotorState::AsymTop(AsymTopState {
                    index,
                    j: parse_field(f[1], "j", path, line)?,
                    ka: parse_field(f[2], "ka", path, line)?,
                    kc: parse_field(f[3], "kc", path, line)?,
                    energy: parse_field(f[4], "energy", path, line)?,
                })
            }
            Species::LinearRotor => {
                expect_width(f, 3, path, line)?;
                RotorState::Linear(LinearRotorState {
                    index,
                    j: parse_field(f[1], "j", path, line)?,
                    energy: parse_field(f[2], "energy", path, line)?,
                })
            }
        };
        states.push(state);
    }
    LevelList::new(species, filter, origin, states.clone()).map_err(|e| {
        // report the first row whose inclusion makes the list invalid
        let bad = (1..=states.len())
            .find(|&n| LevelList::new(species, filter, origin, states[..n].to_vec()).is_err())
            .unwrap_or(states.len());
        let line = body.rows().get(bad.saturating_sub(1)).map_or(1, |r| r.0);
        Error::parse(path, line, e.to_string())
    })
}

pub fn write_levels(levels: &LevelList) -> String {
    let mut out = String::new();
    header(&mut out, "levels");
    let species = match levels.species() {
        Species::AsymTop => "asym-top",
        Species::LinearRotor => "linear-rotor",
    };
    let origin = match levels.origin() {
        EnergyOrigin::Absolute => "absolute",
        EnergyOrigin::SymmetryLadder => "ladder",
    };
    let filter = match levels.filter() {
        SymmetryFilter::All => "all",
        SymmetryFilter::Only(s) => s.as_str(),
    };
    let _ = writeln!(out, "# species: {species}");
    let _ = writeln!(out, "# energy_origin: {origin}");
    let _ = writeln!(out, "# filter: {filter}");
    for s in levels.states() {
        let _ = match s {
            RotorState::AsymTop(s) => writeln!(
                out,
                "{} {} {} {} {}",
                s.index,
                s.j,
                s.ka,
                s.kc,
                fmt_f64(s.energy)
            ),
            RotorState::Linear(s) => writeln!(out, "{} {} {}", s.index, s.j, fmt_f64(s.energy)),
        };
    }
    out
}

pub fn load_levels(path: &Path) -> Result<LevelList> {
    parse_levels(&read_file(path)?, path)
}

pub fn save_levels(path: &Path, levels: &LevelList) -> Result<()> {
    write_file(path, &write_levels(levels))
}

// ---- cross sections ----

fn transition_key(f: &[&str], path: &Path, line: usize) -> Result<TransitionKey> {
    Ok(TransitionKey::new(
        parse_field(f[0], "state index", path, line)?,
        parse_field(f[1], "state index", path, line)?,
        parse_field(f[2], "state index", path, line)?,
        parse_field(f[3], "state index", path, line)?,
    ))
}

fn write_key(out: &mut String, key: &TransitionKey) {
    let _ = write!(
        out,
        "{} {} {} {}",
        key.initial.target, key.initial.projectile, key.final_.target, key.final_.projectile
    );
}

pub fn parse_xsec(
    text: &str,
    path: &Path,
    target: &LevelList,
    projectile: &LevelList,
) -> Result<CrossSectionTable> {
    let body = Body::parse(text, "xsec", path)?;
    let (gline, value) = body
        .directive(U_GRID)
        .ok_or_else(|| Error::parse(path, 1, format!("missing `# {U_GRID}:` directive")))?;
    let grid = parse_floats(&value.split_whitespace().collect::<Vec<_>>(), path, gline)?;
    let grid = EnergyGrid::new(grid).map_err(at_line(path, gline))?;
    let n = grid.len();
    let mut table = CrossSectionTable::new(grid, target.clone(), projectile.clone());
    for (line, f) in body.rows() {
        let line = *line;
        expect_width(f, 4 + n, path, line)?;
        let key = transition_key(f, path, line)?;
        let sigma = f[4..]
            .iter()
            .map(|s| match *s {
                NA => Ok(None),
                s => parse_field::<f64>(s, "cross section", path, line).map(Some),
            })
            .collect::<Result<Vec<_>>>()?;
        table.insert(key, sigma).map_err(at_line(path, line))?;
    }
    Ok(table)
}

pub fn write_xsec(table: &CrossSectionTable) -> String {
    let mut out = String::new();
    header(&mut out, "xsec");
    grid_directive(&mut out, U_GRID, table.grid().values());
    for (key, sigma) in table.entries() {
        write_key(&mut out, key);
        for s in sigma {
            out.push(' ');
            match s {
                Some(v) => out.push_str(&fmt_f64(*v)),
                None => out.push_str(NA),
            }
        }
        out.push('\n');
    }
    out
}

pub fn load_xsec(path: &Path, target: &LevelList, projectile: &LevelList) -> Result<CrossSectionTable> {
    parse_xsec(&read_file(path)?, path, target, projectile)
}

pub fn save_xsec(path: &Path, table: &CrossSectionTable) -> Result<()> {
    write_file(path, &write_xsec(table))
}

// ---- state-to-state rates ----

pub fn parse_rates(text: &str, path: &Path) -> Result<RateTable> {
    let body = Body::parse(text, "rates", path)?;
    let temps = parse_temps(&body, path)?;
    let m = temps.len();
    let mut table = RateTable::new(temps);
    for (line, f) in body.rows() {
        let line = *line;
        expect_width(f, 4 + m, path, line)?;
        let key = transition_key(f, path, line)?;
        let rates = parse_floats(&f[4..], path, line)?;
        table.insert(key, rates).map_err(at_line(path, line))?;
    }
    Ok(table)
}

pub fn write_rates(table: &RateTable) -> String {
    let mut out = String::new();
    header(&mut out, "rates");
    grid_directive(&mut out, T_GRID, table.temps());
    for (key, rates) in table.rows() {
        write_key(&mut out, key);
        push_floats(&mut out, rates);
        out.push('\n');
    }
    out
}

pub fn load_rates(path: &Path) -> Result<RateTable> {
    parse_rates(&read_file(path)?, path)
}

pub fn save_rates(path: &Path, table: &RateTable) -> Result<()> {
    write_file(path, &write_rates(table))
}

// ---- effective rates ----

fn parse_flags(field: &str, path: &Path, line: usize) -> Result<Completeness> {
    if field == "complete" {
        return Ok(Completeness::Complete);
    }
    let list = field
        .strip_prefix("partial:")
        .ok_or_else(|| Error::parse(path, line, format!("invalid flags {field:?}")))?;
    let missing = list
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| parse_field(s, "state index", path, line))
        .collect::<Result<Vec<usize>>>()?;
    Ok(Completeness::Partial(missing))
}

fn flags(c: &Completeness) -> String {
    match c {
        Completeness::Complete => "complete".into(),
        Completeness::Partial(missing) => {
            let list: Vec<String> = missing.iter().map(usize::to_string).collect();
            format!("partial:{}", list.join(","))
        }
    }
}

pub fn parse_effective(text: &str, path: &Path) -> Result<EffectiveRateTable> {
    let body = Body::parse(text, "effective", path)?;
    let temps = parse_temps(&body, path)?;
    let m = temps.len();
    let mut table = EffectiveRateTable::new(temps);
    for (line, f) in body.rows() {
        let line = *line;
        expect_width(f, 4 + m, path, line)?;
        let key = EffectiveKey {
            n1: parse_field(f[0], "state index", path, line)?,
            n1p: parse_field(f[1], "state index", path, line)?,
            n2: parse_field(f[2], "state index", path, line)?,
        };
        let entry = EffectiveEntry {
            rates: parse_floats(&f[3..3 + m], path, line)?,
            completeness: parse_flags(f[3 + m], path, line)?,
        };
        table.insert(key, entry).map_err(at_line(path, line))?;
    }
    Ok(table)
}

pub fn write_effective(table: &EffectiveRateTable) -> String {
    let mut out = String::new();
    header(&mut out, "effective");
    grid_directive(&mut out, T_GRID, table.temps());
    for (key, entry) in table.entries() {
        let _ = write!(out, "{} {} {}", key.n1, key.n1p, key.n2);
        push_floats(&mut out, &entry.rates);
        let _ = writeln!(out, " {}", flags(&entry.completeness));
    }
    out
}

pub fn load_effective(path: &Path) -> Result<EffectiveRateTable> {
    parse_effective(&read_file(path)?, path)
}

pub fn save_effective(path: &Path, table: &EffectiveRateTable) -> Result<()> {
    write_file(path, &write_effective(table))
}

// ---- thermal rates ----

pub fn parse_thermal(text: &str, path: &Path) -> Result<ThermalRateTable> {
    let body = Body::parse(text, "thermal", path)?;
    let temps = parse_temps(&body, path)?;
    let m = temps.len();
    let mut table = ThermalRateTable::new(temps);
    for (line, f) in body.rows() {
        let line = *line;
        expect_width(f, 3 + m, path, line)?;
        let key = ThermalKey {
            n1: parse_field(f[0], "state index", path, line)?,
            n1p: parse_field(f[1], "state index", path, line)?,
            symmetry: symmetry_field(f[2], path, line)?,
        };
        let rates = parse_floats(&f[3..], path, line)?;
        table.insert(key, rates).map_err(at_line(path, line))?;
    }
    Ok(table)
}

pub fn write_thermal(table: &ThermalRateTable) -> String {
    let mut out = String::new();
    header(&mut out, "thermal");
    grid_directive(&mut out, T_GRID, table.temps());
    for (key, rates) in table.entries() {
        let _ = write!(out, "{} {} {}", key.n1, key.n1p, key.symmetry);
        push_floats(&mut out, rates);
        out.push('\n');
    }
    out
}

pub fn load_thermal(path: &Path) -> Result<ThermalRateTable> {
    parse_thermal(&read_file(path)?, path)
}

pub fn save_thermal(path: &Path, table: &ThermalRateTable) -> Result<()> {
    write_file(path, &write_thermal(table))
}

// ---- projectile weights ----

pub fn parse_weights(text: &str, path: &Path) -> Result<WeightsTable> {
    let body = Body::parse(text, "weights", path)?;
    let temps = parse_temps(&body, path)?;
    let m = temps.len();
    let mut table = WeightsTable::new(temps);
    for (line, f) in body.rows() {
        let line = *line;
        expect_width(f, 1 + m, path, line)?;
        let n2 = parse_field(f[0], "state index", path, line)?;
        let w = parse_floats(&f[1..], path, line)?;
        table.insert(n2, w).map_err(at_line(path, line))?;
    }
    Ok(table)
}

pub fn write_weights(table: &WeightsTable) -> String {
    let mut out = String::new();
    header(&mut out, "weights");
    grid_directive(&mut out, T_GRID, table.temps());
    for (n2, w) in table.rows() {
        let _ = write!(out, "{n2}");
        push_floats(&mut out, w);
        out.push('\n');
    }
    out
}

pub fn load_weights(path: &Path) -> Result<WeightsTable> {
    parse_weights(&read_file(path)?, path)
}

pub fn save_weights(path: &Path, table: &WeightsTable) -> Result<()> {
    write_file(path, &write_weights(table))
}

// ---- state mapping ----

pub fn parse_mapping(text: &str, path: &Path) -> Result<StateMapping> {
    let body = Body::parse(text, "mapping", path)?;
    let mut mapping = StateMapping::default();
    for (line, f) in body.rows() {
        let line = *line;
        expect_width(f, 3, path, line)?;
        let table = match f[0] {
            "A" => 0,
            "B" => 1,
            "C" => 2,
            other => {
                return Err(Error::parse(path, line, format!("unknown table {other:?}")))
            }
        };
        let from = parse_field(f[1], "state index", path, line)?;
        let to = parse_field(f[2], "state index", path, line)?;
        mapping.insert(table, from, to).map_err(at_line(path, line))?;
    }
    Ok(mapping)
}

pub fn write_mapping(mapping: &StateMapping) -> String {
    let mut out = String::new();
    header(&mut out, "mapping");
    for (i, map) in mapping.tables.iter().enumerate() {
        let label = table_label(i).expect("three tables");
        for (from, to) in map {
            let _ = writeln!(out, "{label} {from} {to}");
        }
    }
    out
}

pub fn load_mapping(path: &Path) -> Result<StateMapping> {
    parse_mapping(&read_file(path)?, path)
}

pub fn save_mapping(path: &Path, mapping: &StateMapping) -> Result<()> {
    write_file(path, &write_mapping(mapping))
}

// ---- populations ----

pub fn parse_populations(text: &str, path: &Path) -> Result<PopulationTable> {
    let body = Body::parse(text, "populations", path)?;
    let temps = parse_temps(&body, path)?;
    let mode = match body.directive("mode") {
        Some((line, s)) => s.parse().map_err(at_line(path, line))?,
        None => return Err(Error::parse(path, 1, "missing `# mode:` directive")),
    };
    let m = temps.len();
    let mut rows: Vec<PopulationRow> = Vec::new();
    for (line, f) in body.rows() {
        let line = *line;
        expect_width(f, 3 + m, path, line)?;
        let row = PopulationRow {
            index: parse_field(f[0], "index", path, line)?,
            j: parse_field(f[1], "j", path, line)?,
            symmetry: symmetry_field(f[2], path, line)?,
            weights: parse_floats(&f[3..], path, line)?,
        };
        if rows.iter().any(|r| r.index == row.index) {
            return Err(Error::parse(path, line, format!("duplicate level {}", row.index)));
        }
        rows.push(row);
    }
    Ok(PopulationTable { mode, temps, rows })
}

pub fn write_populations(table: &PopulationTable) -> String {
    let mut out = String::new();
    header(&mut out, "populations");
    let _ = writeln!(out, "# mode: {}", table.mode);
    grid_directive(&mut out, T_GRID, &table.temps);
    for r in &table.rows {
        let _ = write!(out, "{} {} {}", r.index, r.j, r.symmetry);
        push_floats(&mut out, &r.weights);
        out.push('\n');
    }
    out
}

pub fn load_populations(path: &Path) -> Result<PopulationTable> {
    parse_populations(&read_file(path)?, path)
}

pub fn save_populations(path: &Path, table: &PopulationTable) -> Result<()> {
    write_file(path, &write_populations(table))
}

// ---- reports (write only) ----

pub fn write_smoothness(reports: &[SmoothnessReport]) -> String {
    let mut out = String::new();
    header(&mut out, "smoothness");
    out.push_str("# n1 n2 n1p n2p interpolant samples one_sided tail_slope max_overshoot\n");
    for r in reports {
        write_key(&mut out, &r.pair);
        let _ = writeln!(
            out,
            " {} {} {} {} {}",
            r.mode,
            r.samples,
            r.one_sided,
            fmt_f64(r.tail_slope),
            fmt_f64(r.max_overshoot)
        );
    }
    out
}

fn csv_string(header: &[&str], records: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Invariant(format!("csv writer: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for r in records {
        w.write_record(&r).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Invariant(format!("csv writer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Invariant(e.to_string()))
}

/// `key, T, zeta_a, zeta_b, zeta_c`
pub fn dalitz_csv<K: Display>(points: &[(f64, Vec<(K, DalitzPoint)>)]) -> Result<String> {
    let records = points.iter().flat_map(|(t, pts)| {
        pts.iter().map(move |(k, p)| {
            vec![
                k.to_string(),
                t.to_string(),
                fmt_f64(p.zeta_a),
                fmt_f64(p.zeta_b),
                fmt_f64(p.zeta_c),
            ]
        })
    });
    csv_string(&["key", "T", "zeta_a", "zeta_b", "zeta_c"], records)
}

/// `T, F, within, total, mean_pct_diff, excluded`
pub fn agreement_csv<K>(entries: &[AgreementEntry<K>]) -> Result<String> {
    let records = entries.iter().map(|e| {
        vec![
            e.t.to_string(),
            e.factor.to_string(),
            e.within.to_string(),
            e.total.to_string(),
            e.mean_pct_diff.map_or_else(|| NA.to_string(), fmt_f64),
            e.excluded.to_string(),
        ]
    });
    csv_string(
        &["T", "F", "within", "total", "mean_pct_diff", "excluded"],
        records,
    )
}

/// `n1, n1p, T, j2, R`
pub fn scaling_csv(rows: &[ScalingRow]) -> Result<String> {
    let records = rows.iter().map(|r| {
        vec![
            r.n1.to_string(),
            r.n1p.to_string(),
            r.t.to_string(),
            r.j2.to_string(),
            fmt_f64(r.ratio),
        ]
    });
    csv_string(&["n1", "n1p", "T", "j2", "R"], records)
}

/// Scatter pairs with the reference on x: `key, T, k_b, k_a`.
pub fn pairs_csv<K: Display>(pairs: &[(f64, Vec<(K, f64, f64)>)]) -> Result<String> {
    let records = pairs.iter().flat_map(|(t, rows)| {
        rows.iter()
            .map(move |(k, ka, kb)| vec![k.to_string(), t.to_string(), fmt_f64(*kb), fmt_f64(*ka)])
    });
    csv_string(&["key", "T", "k_b", "k_a"], records)
}
