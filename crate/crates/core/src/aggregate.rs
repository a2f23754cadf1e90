//! Effective rates (sum over final projectile states) and thermal rates
//! (Boltzmann average over initial projectile states of one symmetry).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use log::warn;

use crate::dataio::config::PhysicalConstants;
use crate::error::{Error, Result};
use crate::ratecalc::RateTable;
use crate::states::{partition_sum, LevelList, RotorState, Symmetry};

/// `n1 -> n1'` with initial projectile state `n2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EffectiveKey {
    pub n1: usize,
    pub n1p: usize,
    pub n2: usize,
}

impl fmt::Display for EffectiveKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}@{}", self.n1, self.n1p, self.n2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Completeness {
    #[default]
    Complete,
    /// Final projectile states expected but absent from the input.
    Partial(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveEntry {
    pub rates: Vec<f64>,
    pub completeness: Completeness,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EffectiveRateTable {
    temps: Vec<f64>,
    entries: BTreeMap<EffectiveKey, EffectiveEntry>,
}

impl EffectiveRateTable {
    pub fn new(temps: Vec<f64>) -> Self {
        Self {
            temps,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: EffectiveKey, entry: EffectiveEntry) -> Result<()> {
        if entry.rates.len() != self.temps.len() {
            return Err(Error::Input(format!("{key}: wrong number of rates")));
        }
        if entry.rates.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(Error::Input(format!("{key}: rates must be finite and >= 0")));
        }
        if self.entries.insert(key, entry).is_some() {
            return Err(Error::Input(format!("duplicate effective entry {key}")));
        }
        Ok(())
    }

    pub fn temps(&self) -> &[f64] {
        &self.temps
    }

    pub fn entries(&self) -> &BTreeMap<EffectiveKey, EffectiveEntry> {
        &self.entries
    }

    pub fn get(&self, key: &EffectiveKey) -> Option<&EffectiveEntry> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Target transitions `(n1, n1')` present for any `n2`.
    pub fn target_transitions(&self) -> BTreeSet<(usize, usize)> {
        self.entries.keys().map(|k| (k.n1, k.n1p)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingFinalPolicy {
    /// Keep the partial sum and flag it.
    #[default]
    Flag,
    /// Any missing final state is an error.
    Strict,
}

impl FromStr for MissingFinalPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flag" => Ok(Self::Flag),
            "strict" => Ok(Self::Strict),
            _ => Err(Error::Input(format!("unknown missing-final policy {s:?}"))),
        }
    }
}

impl fmt::Display for MissingFinalPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Flag => "flag",
            Self::Strict => "strict",
        })
    }
}

/// Which final projectile states a complete sum must contain.
#[derive(Debug, Clone, Copy)]
pub enum ExpectedFinals<'a> {
    /// Every level of the same symmetry as the initial state.
    Levels(&'a LevelList),
    /// Every final state reached from the same initial state anywhere in the table.
    Observed,
}

/// `k^{n2}_{n1->n1'} = Σ_{n2'} k_{n1 n2 -> n1' n2'}`.
///
/// Terms are added in ascending `n2'` order so the result does not depend
/// on input row order.
pub fn effective_rates(
    rates: &RateTable,
    expected: ExpectedFinals<'_>,
    policy: MissingFinalPolicy,
) -> Result<EffectiveRateTable> {
    let n_t = rates.temps().len();
    let mut sums: BTreeMap<EffectiveKey, (Vec<f64>, BTreeSet<usize>)> = BTreeMap::new();
    let mut observed: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (key, ks) in rates.rows() {
        let ekey = EffectiveKey {
            n1: key.initial.target,
            n1p: key.final_.target,
            n2: key.initial.projectile,
        };
        let (acc, finals) = sums.entry(ekey).or_insert_with(|| (vec![0.0; n_t], BTreeSet::new()));
        for (a, k) in acc.iter_mut().zip(ks) {
            *a += k;
        }
        finals.insert(key.final_.projectile);
        observed
            .entry(key.initial.projectile)
            .or_default()
            .insert(key.final_.projectile);
    }

    let mut out = EffectiveRateTable::new(rates.temps().to_vec());
    for (key, (acc, finals)) in sums {
        let wanted: BTreeSet<usize> = match expected {
            ExpectedFinals::Levels(levels) => {
                let sym = levels
                    .get(key.n2)
                    .ok_or_else(|| {
                        Error::Input(format!("{key}: projectile state {} not in level list", key.n2))
                    })?
                    .symmetry();
                levels.of_symmetry(sym).map(RotorState::index).collect()
            }
            ExpectedFinals::Observed => observed[&key.n2].clone(),
        };
        let missing: Vec<usize> = wanted.difference(&finals).copied().collect();
        let completeness = if missing.is_empty() {
            Completeness::Complete
        } else if policy == MissingFinalPolicy::Strict {
            return Err(Error::IncompleteData(format!(
                "effective rate {key} lacks final projectile states {missing:?}"
            )));
        } else {
            Completeness::Partial(missing)
        };
        out.insert(
            key,
            EffectiveEntry {
                rates: acc,
                completeness,
            },
        )?;
    }
    Ok(out)
}

/// `Q = Σ (2j2+1) exp(-E2 / k_B T)` over one symmetry class.
pub fn partition_function(
    levels: &LevelList,
    symmetry: Symmetry,
    t: f64,
    consts: &PhysicalConstants,
) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Input(format!("temperature must be positive, got {t}")));
    }
    let mut states = levels.of_symmetry(symmetry).peekable();
    if states.peek().is_none() {
        return Err(Error::Input(format!("no {symmetry} levels in projectile list")));
    }
    Ok(partition_sum(states, t, consts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingInitialPolicy {
    /// Abort when a state with weight above the floor has no effective rate.
    #[default]
    Error,
    /// Restrict Q to the available states.
    Renormalize,
    /// Missing states borrow the rate of the highest available state.
    SubstituteHighest,
    /// Missing states contribute zero. Biased low; for diagnostics only.
    Zero,
}

impl FromStr for MissingInitialPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(Self::Error),
            "renormalize" => Ok(Self::Renormalize),
            "substitute-highest" => Ok(Self::SubstituteHighest),
            "zero" => Ok(Self::Zero),
            _ => Err(Error::Input(format!("unknown missing-initial policy {s:?}"))),
        }
    }
}

impl fmt::Display for MissingInitialPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Error => "error",
            Self::Renormalize => "renormalize",
            Self::SubstituteHighest => "substitute-highest",
            Self::Zero => "zero",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalOptions {
    pub policy: MissingInitialPolicy,
    pub weight_floor: f64,
    /// Admitted initial `j2` values; `None` admits every level of the symmetry.
    pub included_j2: Option<Vec<u32>>,
}

impl Default for ThermalOptions {
    fn default() -> Self {
        Self {
            policy: MissingInitialPolicy::Error,
            weight_floor: 1e-4,
            included_j2: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ThermalKey {
    pub n1: usize,
    pub n1p: usize,
    pub symmetry: Symmetry,
}

impl fmt::Display for ThermalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}@{}", self.n1, self.n1p, self.symmetry)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateSource {
    Direct,
    /// Rate borrowed from another initial projectile state.
    Substituted(usize),
    Zeroed,
}

/// Which initial states entered one thermal rate, and with what weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThermalProvenance {
    pub states: Vec<(usize, RateSource)>,
    /// `weights[t][i]` belongs to `states[i]`; each row sums to 1.
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThermalRateTable {
    temps: Vec<f64>,
    entries: BTreeMap<ThermalKey, Vec<f64>>,
    provenance: BTreeMap<ThermalKey, ThermalProvenance>,
}

impl ThermalRateTable {
    pub fn new(temps: Vec<f64>) -> Self {
        Self {
            temps,
            entries: BTreeMap::new(),
            provenance: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: ThermalKey, rates: Vec<f64>) -> Result<()> {
        if rates.len() != self.temps.len() {
            return Err(Error::Input(format!("{key}: wrong number of rates")));
        }
        if rates.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(Error::Input(format!("{key}: rates must be finite and >= 0")));
        }
        if self.entries.insert(key, rates).is_some() {
            return Err(Error::Input(format!("duplicate thermal entry {key}")));
        }
        Ok(())
    }

    pub fn temps(&self) -> &[f64] {
        &self.temps
    }

    pub fn entries(&self) -> &BTreeMap<ThermalKey, Vec<f64>> {
        &self.entries
    }

    pub fn get(&self, key: &ThermalKey) -> Option<&[f64]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    /// Empty for tables read from disk.
    pub fn provenance(&self, key: &ThermalKey) -> Option<&ThermalProvenance> {
        self.provenance.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `k̄ = Σ w(n2) k^{n2}` with `w = (2j2+1) exp(-E2/k_B T) / Q`.
pub fn thermal_rates(
    eff: &EffectiveRateTable,
    levels: &LevelList,
    symmetry: Symmetry,
    opts: &ThermalOptions,
    consts: &PhysicalConstants,
) -> Result<ThermalRateTable> {
    if eff.is_empty() {
        return Err(Error::Input("effective-rate table is empty".into()));
    }
    let candidates: Vec<&RotorState> = levels
        .of_symmetry(symmetry)
        .filter(|s| {
            opts.included_j2
                .as_ref()
                .is_none_or(|js| js.contains(&s.j()))
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::Input(format!(
            "no admitted {symmetry} projectile levels"
        )));
    }
    // Boltzmann weights over the full candidate set, per temperature.
    let full_weights: Vec<Vec<f64>> = eff
        .temps()
        .iter()
        .map(|&t| {
            let q = partition_function_of(&candidates, t, consts);
            candidates
                .iter()
                .map(|s| boltzmann_term(s, t, consts) / q)
                .collect()
        })
        .collect();

    let candidates: Vec<(usize, u32)> = candidates.iter().map(|s| (s.index(), s.j())).collect();
    average_over_initial_states(eff, symmetry, &candidates, &full_weights, opts)
}

/// Shared core of both thermal averages. `weights[t][i]` is the normalized
/// weight of `candidates[i]`, given as `(n2, j2)`.
fn average_over_initial_states(
    eff: &EffectiveRateTable,
    symmetry: Symmetry,
    candidates: &[(usize, u32)],
    full_weights: &[Vec<f64>],
    opts: &ThermalOptions,
) -> Result<ThermalRateTable> {
    let mut out = ThermalRateTable::new(eff.temps().to_vec());
    for (n1, n1p) in eff.target_transitions() {
        let lookup = |n2: usize| eff.get(&EffectiveKey { n1, n1p, n2 });
        let available: Vec<(usize, u32)> = candidates
            .iter()
            .copied()
            .filter(|&(n2, _)| lookup(n2).is_some())
            .collect();
        if available.is_empty() {
            continue;
        }
        let key = ThermalKey { n1, n1p, symmetry };

        let mut states = Vec::with_capacity(candidates.len());
        let mut weights: Vec<Vec<f64>> = vec![Vec::new(); eff.temps().len()];
        let highest = available
            .iter()
            .max_by_key(|&&(n2, j)| (j, n2))
            .expect("non-empty")
            .0;
        for (ci, &(n2, j)) in candidates.iter().enumerate() {
            let source = if lookup(n2).is_some() {
                Some(RateSource::Direct)
            } else {
                match opts.policy {
                    MissingInitialPolicy::Error => {
                        if let Some((ti, w)) = full_weights
                            .iter()
                            .map(|row| row[ci])
                            .enumerate()
                            .find(|&(_, w)| w > opts.weight_floor)
                        {
                            return Err(Error::IncompleteData(format!(
                                "thermal rate {key}: no effective rate for initial projectile \
                                 state {n2} (j2 = {j}), weight {w:.3e} at T = {} K",
                                eff.temps()[ti]
                            )));
                        }
                        None
                    }
                    MissingInitialPolicy::Renormalize => None,
                    MissingInitialPolicy::SubstituteHighest => Some(RateSource::Substituted(highest)),
                    MissingInitialPolicy::Zero => Some(RateSource::Zeroed),
                }
            };
            if let Some(source) = source {
                states.push((n2, source));
                for (row, full) in weights.iter_mut().zip(full_weights) {
                    row.push(full[ci]);
                }
            }
        }
        if states.len() < candidates.len() {
            for (ti, row) in weights.iter_mut().enumerate() {
                let sum: f64 = row.iter().sum();
                if sum <= 0.0 {
                    return Err(Error::IncompleteData(format!(
                        "thermal rate {key}: available initial states carry no weight at T = {} K",
                        eff.temps()[ti]
                    )));
                }
                row.iter_mut().for_each(|w| *w /= sum);
            }
        }
        if opts.policy == MissingInitialPolicy::Zero
            && states.iter().any(|(_, s)| *s == RateSource::Zeroed)
        {
            warn!("{key}: missing initial states counted as zero");
        }

        let rates = (0..eff.temps().len())
            .map(|ti| {
                states
                    .iter()
                    .zip(&weights[ti])
                    .map(|(&(n2, source), w)| {
                        let k = match source {
                            RateSource::Direct => lookup(n2).map(|e| e.rates[ti]),
                            RateSource::Substituted(from) => lookup(from).map(|e| e.rates[ti]),
                            RateSource::Zeroed => Some(0.0),
                        };
                        w * k.unwrap_or(0.0)
                    })
                    .sum()
            })
            .collect();
        out.insert(key, rates)?;
        out.provenance.insert(key, ThermalProvenance { states, weights });
    }
    Ok(out)
}

fn boltzmann_term(s: &RotorState, t: f64, consts: &PhysicalConstants) -> f64 {
    f64::from(s.degeneracy()) * (-s.energy() / (consts.k_b * t)).exp()
}

fn partition_function_of(states: &[&RotorState], t: f64, consts: &PhysicalConstants) -> f64 {
    partition_sum(states.iter().copied(), t, consts)
}

/// Projectile-state weights supplied directly instead of a Boltzmann law.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightsTable {
    temps: Vec<f64>,
    rows: BTreeMap<usize, Vec<f64>>,
}

impl WeightsTable {
    pub fn new(temps: Vec<f64>) -> Self {
        Self {
            temps,
            rows: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, n2: usize, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.temps.len() {
            return Err(Error::Input(format!("weights of state {n2}: wrong length")));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Input(format!("weights of state {n2} must be >= 0")));
        }
        if self.rows.insert(n2, weights).is_some() {
            return Err(Error::Input(format!("duplicate weights for state {n2}")));
        }
        Ok(())
    }

    pub fn temps(&self) -> &[f64] {
        &self.temps
    }

    pub fn rows(&self) -> &BTreeMap<usize, Vec<f64>> {
        &self.rows
    }
}

/// Thermal average with caller-supplied weights, normalized per temperature.
/// Missing initial states are handled by `opts.policy` as in [`thermal_rates`];
/// `opts.included_j2` is ignored since the weights already name the states.
pub fn thermal_rates_with_weights(
    eff: &EffectiveRateTable,
    weights: &WeightsTable,
    levels: &LevelList,
    symmetry: Symmetry,
    opts: &ThermalOptions,
) -> Result<ThermalRateTable> {
    if eff.is_empty() {
        return Err(Error::Input("effective-rate table is empty".into()));
    }
    if weights.temps().len() != eff.temps().len()
        || weights
            .temps()
            .iter()
            .zip(eff.temps())
            .any(|(a, b)| (a - b).abs() > 1e-9 * b.abs())
    {
        return Err(Error::Input(
            "weights and effective rates use different temperature grids".into(),
        ));
    }
    let mut candidates = Vec::with_capacity(weights.rows().len());
    for &n2 in weights.rows().keys() {
        let state = levels
            .states()
            .get(n2)
            .ok_or_else(|| Error::Input(format!("weighted state {n2} is not a projectile level")))?;
        if state.symmetry() != symmetry {
            return Err(Error::Input(format!(
                "weighted state {n2} is {}, not {symmetry}",
                state.symmetry()
            )));
        }
        candidates.push((n2, state.j()));
    }
    let mut full_weights = Vec::with_capacity(eff.temps().len());
    for (ti, t) in eff.temps().iter().enumerate() {
        let total: f64 = weights.rows().values().map(|w| w[ti]).sum();
        if total <= 0.0 {
            return Err(Error::Input(format!("weights sum to zero at T = {t}")));
        }
        full_weights.push(weights.rows().values().map(|w| w[ti] / total).collect());
    }
    average_over_initial_states(eff, symmetry, &candidates, &full_weights, opts)
}
