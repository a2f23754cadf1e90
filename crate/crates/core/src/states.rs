//! Rotational levels of the two collision partners.
//!
//! The target is an asymmetric top labelled `j_{ka kc}`, the projectile a
//! linear rotor labelled by `j`. Both carry a `2j + 1` degeneracy and a
//! para/ortho nuclear-spin class. Levels normally come from a level file;
//! the generators below produce rigid-rotor levels for tests and synthetic
//! datasets.

use std::collections::HashSet;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dataio::config::PhysicalConstants;
use crate::error::{Error, Result};

/// Eigenvalues closer than this (cm⁻¹) are treated as degenerate when labelling.
const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symmetry {
    Para,
    Ortho,
}

impl Symmetry {
    pub fn as_str(self) -> &'static str {
        match self {
            Symmetry::Para => "para",
            Symmetry::Ortho => "ortho",
        }
    }
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Symmetry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "para" | "p" => Ok(Symmetry::Para),
            "ortho" | "o" => Ok(Symmetry::Ortho),
            other => Err(Error::Input(format!("unknown symmetry {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SymmetryFilter {
    #[default]
    All,
    Only(Symmetry),
}

impl SymmetryFilter {
    pub fn admits(self, sym: Symmetry) -> bool {
        match self {
            SymmetryFilter::All => true,
            SymmetryFilter::Only(s) => s == sym,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    AsymTop,
    LinearRotor,
}

/// Where a level list puts its zero of energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyOrigin {
    /// One common zero for every level.
    #[default]
    Absolute,
    /// Each para/ortho ladder measured from its own lowest level.
    SymmetryLadder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymTopState {
    pub index: usize,
    pub j: u32,
    pub ka: u32,
    pub kc: u32,
    /// cm⁻¹
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRotorState {
    pub index: usize,
    pub j: u32,
    /// cm⁻¹
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RotorState {
    AsymTop(AsymTopState),
    Linear(LinearRotorState),
}

impl RotorState {
    pub fn index(&self) -> usize {
        match self {
            RotorState::AsymTop(s) => s.index,
            RotorState::Linear(s) => s.index,
        }
    }

    pub fn j(&self) -> u32 {
        match self {
            RotorState::AsymTop(s) => s.j,
            RotorState::Linear(s) => s.j,
        }
    }

    pub fn energy(&self) -> f64 {
        match self {
            RotorState::AsymTop(s) => s.energy,
            RotorState::Linear(s) => s.energy,
        }
    }

    pub fn degeneracy(&self) -> u32 {
        2 * self.j() + 1
    }

    /// Symmetry class of a state whose labels are already known to be valid.
    pub fn symmetry(&self) -> Symmetry {
        let parity = match self {
            RotorState::AsymTop(s) => s.ka + s.kc,
            RotorState::Linear(s) => s.j,
        };
        if parity % 2 == 0 {
            Symmetry::Para
        } else {
            Symmetry::Ortho
        }
    }

    fn species(&self) -> Species {
        match self {
            RotorState::AsymTop(_) => Species::AsymTop,
            RotorState::Linear(_) => Species::LinearRotor,
        }
    }

    fn set_index(&mut self, index: usize) {
        match self {
            RotorState::AsymTop(s) => s.index = index,
            RotorState::Linear(s) => s.index = index,
        }
    }
}

fn validate_labels(state: &RotorState) -> Result<()> {
    if let RotorState::AsymTop(s) = state {
        if s.ka > s.j || s.kc > s.j || !(s.ka + s.kc == s.j || s.ka + s.kc == s.j + 1) {
            return Err(Error::Label(format!(
                "j={} ka={} kc={} (need ka, kc <= j and ka + kc in {{j, j+1}})",
                s.j, s.ka, s.kc
            )));
        }
    }
    Ok(())
}

/// Para iff `ka + kc` (asymmetric top) or `j` (linear rotor) is even.
pub fn classify_symmetry(state: &RotorState) -> Result<Symmetry> {
    validate_labels(state)?;
    Ok(state.symmetry())
}

/// An energy-ordered list of levels of one species.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelList {
    species: Species,
    filter: SymmetryFilter,
    origin: EnergyOrigin,
    states: Vec<RotorState>,
}

impl LevelList {
    /// Validates indices, ordering, labels and uniqueness.
    pub fn new(
        species: Species,
        filter: SymmetryFilter,
        origin: EnergyOrigin,
        states: Vec<RotorState>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for (pos, state) in states.iter().enumerate() {
            if state.species() != species {
                return Err(Error::Input(format!(
                    "level {pos}: species does not match the list ({species:?})"
                )));
            }
            validate_labels(state)?;
            if state.index() != pos {
                return Err(Error::Input(format!(
                    "level indices must be contiguous from 0; position {pos} has index {}",
                    state.index()
                )));
            }
            if !state.energy().is_finite() || state.energy() < 0.0 {
                return Err(Error::Input(format!(
                    "level {pos}: energy {} must be finite and >= 0",
                    state.energy()
                )));
            }
            if pos > 0 && state.energy() < states[pos - 1].energy() {
                return Err(Error::Input(format!(
                    "level {pos}: energies must be non-decreasing by index"
                )));
            }
            if !filter.admits(state.symmetry()) {
                return Err(Error::Input(format!(
                    "level {pos} is {} but the list is filtered to {filter:?}",
                    state.symmetry()
                )));
            }
            let label = match state {
                RotorState::AsymTop(s) => (s.j, s.ka, s.kc),
                RotorState::Linear(s) => (s.j, 0, 0),
            };
            if !seen.insert(label) {
                return Err(Error::Input(format!("level {pos}: duplicate quantum labels")));
            }
        }
        if species == Species::LinearRotor {
            check_linear_monotone(&states, origin)?;
        }
        Ok(Self {
            species,
            filter,
            origin,
            states,
        })
    }

    pub fn species(&self) -> Species {
        self.species
    }

    pub fn filter(&self) -> SymmetryFilter {
        self.filter
    }

    pub fn origin(&self) -> EnergyOrigin {
        self.origin
    }

    pub fn states(&self) -> &[RotorState] {
        &self.states
    }

    pub fn get(&self, index: usize) -> Option<&RotorState> {
        self.states.get(index)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Keeps one symmetry class and re-indexes from 0.
    pub fn with_filter(&self, sym: Symmetry) -> LevelList {
        let states = self
            .states
            .iter()
            .filter(|s| s.symmetry() == sym)
            .enumerate()
            .map(|(i, s)| {
                let mut s = *s;
                s.set_index(i);
                s
            })
            .collect();
        LevelList {
            species: self.species,
            filter: SymmetryFilter::Only(sym),
            origin: self.origin,
            states,
        }
    }

    /// States of one symmetry class, original indices kept.
    pub fn of_symmetry(&self, sym: Symmetry) -> impl Iterator<Item = &RotorState> {
        self.states.iter().filter(move |s| s.symmetry() == sym)
    }
}

fn check_linear_monotone(states: &[RotorState], origin: EnergyOrigin) -> Result<()> {
    let classes: &[Option<Symmetry>] = match origin {
        EnergyOrigin::Absolute => &[None],
        EnergyOrigin::SymmetryLadder => &[Some(Symmetry::Para), Some(Symmetry::Ortho)],
    };
    for class in classes {
        let mut by_j: Vec<(u32, f64)> = states
            .iter()
            .filter(|s| class.is_none_or(|c| s.symmetry() == c))
            .map(|s| (s.j(), s.energy()))
            .collect();
        by_j.sort_by_key(|&(j, _)| j);
        if by_j.windows(2).any(|w| w[1].1 <= w[0].1) {
            return Err(Error::Input(
                "linear-rotor energies must increase strictly with j".into(),
            ));
        }
    }
    Ok(())
}

/// Rigid-rotor Hamiltonian for one `j`, factored into the four Wang blocks.
///
/// Basis is the symmetric-top basis quantized along the a axis. Returns the
/// `2j + 1` eigenvalues in ascending order.
pub fn asym_top_block_energies(a: f64, b: f64, c: f64, j: u32) -> Vec<f64> {
    let jj = f64::from(j * (j + 1));
    let diag = |k: i64| {
        let k = k as f64;
        0.5 * (b + c) * (jj - k * k) + a * k * k
    };
    let f = |k: i64| {
        let k = k as f64;
        (jj - k * (k + 1.0)).max(0.0)
    };
    // <K+2|H|K>
    let off = |k: i64| 0.25 * (b - c) * (f(k) * f(k + 1)).sqrt();

    let j = i64::from(j);
    let mut energies = Vec::with_capacity((2 * j + 1) as usize);

    // (first K, sign) for E+, E-, O+, O-
    for (k0, sign) in [(0_i64, 1.0), (2, -1.0), (1, 1.0), (1, -1.0)] {
        let ks: Vec<i64> = (k0..=j).step_by(2).collect();
        if ks.is_empty() {
            continue;
        }
        let n = ks.len();
        let mut h = DMatrix::<f64>::zeros(n, n);
        for (i, &k) in ks.iter().enumerate() {
            h[(i, i)] = diag(k);
            if k == 1 {
                h[(i, i)] += sign * off(-1);
            }
            if i + 1 < n {
                let mut v = off(k);
                if k == 0 {
                    v *= std::f64::consts::SQRT_2;
                }
                h[(i, i + 1)] = v;
                h[(i + 1, i)] = v;
            }
        }
        energies.extend(SymmetricEigen::new(h).eigenvalues.iter().copied());
    }
    energies.sort_by(f64::total_cmp);
    energies
}

/// Rigid asymmetric-top levels up to `jmax`, labelled by the prolate/oblate
/// correlation: the i-th level of a given `j` gets `ka = (i+1)/2`, `kc = j - i/2`.
pub fn asym_top_levels(a: f64, b: f64, c: f64, jmax: u32) -> Result<LevelList> {
    if !(c > 0.0 && b >= c && a >= b) || !a.is_finite() {
        return Err(Error::Config(format!(
            "rotational constants must satisfy A >= B >= C > 0 (got {a}, {b}, {c})"
        )));
    }
    let mut levels: Vec<(f64, u32, u32, u32)> = Vec::new();
    for j in 0..=jmax {
        let energies = asym_top_block_energies(a, b, c, j);
        for (i, e) in energies.into_iter().enumerate() {
            let i = i as u32;
            levels.push((e.max(0.0), j, i.div_ceil(2), j - i / 2));
        }
    }
    levels.sort_by(|x, y| {
        if (x.0 - y.0).abs() <= DEGENERACY_TOL {
            (x.1, x.2).cmp(&(y.1, y.2))
        } else {
            x.0.total_cmp(&y.0)
        }
    });
    let states = levels
        .into_iter()
        .enumerate()
        .map(|(index, (energy, j, ka, kc))| {
            RotorState::AsymTop(AsymTopState {
                index,
                j,
                ka,
                kc,
                energy,
            })
        })
        .collect();
    LevelList::new(
        Species::AsymTop,
        SymmetryFilter::All,
        EnergyOrigin::Absolute,
        states,
    )
}

/// `E(j) = B j(j+1) - D [j(j+1)]²` for `j = 0..=jmax`.
pub fn linear_rotor_levels(b: f64, d: f64, jmax: u32) -> Result<LevelList> {
    if !(b > 0.0 && b.is_finite()) || !(d >= 0.0 && d.is_finite()) {
        return Err(Error::Config(format!(
            "need B > 0 and D >= 0 (got B={b}, D={d})"
        )));
    }
    let mut states = Vec::with_capacity(jmax as usize + 1);
    let mut last = f64::NEG_INFINITY;
    for j in 0..=jmax {
        let x = f64::from(j) * f64::from(j + 1);
        let energy = b * x - d * x * x;
        if energy <= last {
            return Err(Error::Config(format!(
                "distortion constant D={d} makes E(j) non-monotonic at j={j}"
            )));
        }
        last = energy;
        states.push(RotorState::Linear(LinearRotorState {
            index: j as usize,
            j,
            energy,
        }));
    }
    LevelList::new(
        Species::LinearRotor,
        SymmetryFilter::All,
        EnergyOrigin::Absolute,
        states,
    )
}

/// `Σ (2j+1) exp(-E / k_B T)` over the given states.
pub fn partition_sum<'a>(
    states: impl IntoIterator<Item = &'a RotorState>,
    t: f64,
    consts: &PhysicalConstants,
) -> f64 {
    let kt = consts.k_b * t;
    states
        .into_iter()
        .map(|s| f64::from(s.degeneracy()) * (-s.energy() / kt).exp())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PopulationMode {
    /// Each para/ortho class normalized to 1 on its own.
    #[default]
    PerSymmetry,
    /// One normalization over every level, without nuclear-spin weights.
    Combined,
}

/// Boltzmann weight of every level in `levels`, in index order.
pub fn boltzmann_populations(
    levels: &LevelList,
    t: f64,
    mode: PopulationMode,
    consts: &PhysicalConstants,
) -> Result<Vec<f64>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Input(format!("temperature must be positive, got {t}")));
    }
    if levels.is_empty() {
        return Err(Error::Input("empty level list".into()));
    }
    if mode == PopulationMode::Combined && levels.origin() == EnergyOrigin::SymmetryLadder {
        return Err(Error::Config(
            "combined populations need absolute energies, not per-ladder origins".into(),
        ));
    }
    let groups: Vec<Vec<&RotorState>> = match mode {
        PopulationMode::Combined => vec![levels.states().iter().collect()],
        PopulationMode::PerSymmetry => [Symmetry::Para, Symmetry::Ortho]
            .into_iter()
            .map(|sym| levels.of_symmetry(sym).collect::<Vec<_>>())
            .filter(|g| !g.is_empty())
            .collect(),
    };
    let kt = consts.k_b * t;
    let mut weights = vec![0.0; levels.len()];
    for group in groups {
        let q = partition_sum(group.iter().copied(), t, consts);
        if q > f64::MIN_POSITIVE {
            for s in &group {
                weights[s.index()] = f64::from(s.degeneracy()) * (-s.energy() / kt).exp() / q;
            }
        } else {
            // every term underflowed; measure from the group's lowest level
            let e0 = group
                .iter()
                .map(|s| s.energy())
                .fold(f64::INFINITY, f64::min);
            let terms: Vec<f64> = group
                .iter()
                .map(|s| f64::from(s.degeneracy()) * (-(s.energy() - e0) / kt).exp())
                .collect();
            let q: f64 = terms.iter().sum();
            for (s, term) in group.iter().zip(terms) {
                weights[s.index()] = term / q;
            }
        }
    }
    Ok(weights)
}

impl fmt::Display for PopulationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PopulationMode::PerSymmetry => "per-symmetry",
            PopulationMode::Combined => "combined",
        })
    }
}

impl std::str::FromStr for PopulationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-symmetry" => Ok(PopulationMode::PerSymmetry),
            "combined" => Ok(PopulationMode::Combined),
            other => Err(Error::Input(format!("unknown population mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationRow {
    pub index: usize,
    pub j: u32,
    pub symmetry: Symmetry,
    /// One weight per temperature.
    pub weights: Vec<f64>,
}

/// Level populations over a temperature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTable {
    pub mode: PopulationMode,
    pub temps: Vec<f64>,
    pub rows: Vec<PopulationRow>,
}

pub fn population_table(
    levels: &LevelList,
    temps: &[f64],
    mode: PopulationMode,
    consts: &PhysicalConstants,
) -> Result<PopulationTable> {
    let columns = temps
        .iter()
        .map(|&t| boltzmann_populations(levels, t, mode, consts))
        .collect::<Result<Vec<_>>>()?;
    let rows = levels
        .states()
        .iter()
        .map(|s| PopulationRow {
            index: s.index(),
            j: s.j(),
            symmetry: s.symmetry(),
            weights: columns.iter().map(|c| c[s.index()]).collect(),
        })
        .collect();
    Ok(PopulationTable {
        mode,
        temps: temps.to_vec(),
        rows,
    })
}
