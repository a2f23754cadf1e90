//! Cross-section tables on a shared collision-energy grid and their
//! microscopic-reversibility symmetrization.

use std::collections::BTreeMap;
use std::fmt;

use log::warn;

use crate::error::{Error, Result};
use crate::states::LevelList;

/// One (target state, projectile state) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StatePair {
    pub target: usize,
    pub projectile: usize,
}

impl StatePair {
    pub const fn new(target: usize, projectile: usize) -> Self {
        Self { target, projectile }
    }
}

/// `n1 n2 -> n1' n2'`. Orders by initial pair, then final pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransitionKey {
    pub initial: StatePair,
    pub final_: StatePair,
}

impl TransitionKey {
    pub const fn new(n1: usize, n2: usize, n1p: usize, n2p: usize) -> Self {
        Self {
            initial: StatePair::new(n1, n2),
            final_: StatePair::new(n1p, n2p),
        }
    }

    pub fn reverse(self) -> Self {
        Self {
            initial: self.final_,
            final_: self.initial,
        }
    }

    pub fn is_elastic(self) -> bool {
        self.initial == self.final_
    }

    /// The smaller of the key and its reverse; identifies the unordered pair.
    pub fn canonical(self) -> Self {
        self.min(self.reverse())
    }
}

impl fmt::Display for TransitionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}->{}:{}",
            self.initial.target, self.initial.projectile, self.final_.target, self.final_.projectile
        )
    }
}

/// Collision energies in cm⁻¹, strictly increasing and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrid(Vec<f64>);

impl EnergyGrid {
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::Input("energy grid needs at least 2 points".into()));
        }
        if energies.iter().any(|u| !(u.is_finite() && *u > 0.0)) {
            return Err(Error::Input("energy grid values must be positive".into()));
        }
        if energies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("energy grid must be strictly increasing".into()));
        }
        Ok(Self(energies))
    }

    /// The ten collision energies (cm⁻¹) used for the H₂O + H₂ database.
    pub fn ten_point() -> Self {
        Self(vec![
            20.0, 41.28, 84.0, 170.47, 346.41, 703.89, 1430.0, 2906.3, 5906.0, 12000.0,
        ])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// σ(U) in Å² per grid point; `None` marks an absent point.
pub type XsecVector = Vec<Option<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct CrossSectionTable {
    grid: EnergyGrid,
    entries: BTreeMap<TransitionKey, XsecVector>,
    target: LevelList,
    projectile: LevelList,
}

impl CrossSectionTable {
    pub fn new(grid: EnergyGrid, target: LevelList, projectile: LevelList) -> Self {
        Self {
            grid,
            entries: BTreeMap::new(),
            target,
            projectile,
        }
    }

    /// Adds one transition, checking length, sign and state indices.
    pub fn insert(&mut self, key: TransitionKey, sigma: XsecVector) -> Result<()> {
        if sigma.len() != self.grid.len() {
            return Err(Error::Input(format!(
                "{key}: {} values for a {}-point grid",
                sigma.len(),
                self.grid.len()
            )));
        }
        if let Some(bad) = sigma.iter().flatten().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::Input(format!("{key}: invalid cross section {bad}")));
        }
        for pair in [key.initial, key.final_] {
            if self.target.get(pair.target).is_none() {
                return Err(Error::Input(format!(
                    "{key}: target state {} not in level list",
                    pair.target
                )));
            }
            if self.projectile.get(pair.projectile).is_none() {
                return Err(Error::Input(format!(
                    "{key}: projectile state {} not in level list",
                    pair.projectile
                )));
            }
        }
        if self.entries.contains_key(&key) {
            return Err(Error::Input(format!("duplicate transition {key}")));
        }
        self.entries.insert(key, sigma);
        Ok(())
    }

    pub fn grid(&self) -> &EnergyGrid {
        &self.grid
    }

    pub fn entries(&self) -> &BTreeMap<TransitionKey, XsecVector> {
        &self.entries
    }

    pub fn get(&self, key: &TransitionKey) -> Option<&XsecVector> {
        self.entries.get(key)
    }

    pub fn target(&self) -> &LevelList {
        &self.target
    }

    pub fn projectile(&self) -> &LevelList {
        &self.projectile
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(2j1+1)(2j2+1)` of a state pair. Indices are validated on insert.
    pub fn degeneracy(&self, pair: StatePair) -> f64 {
        let g1 = self.target.states()[pair.target].degeneracy();
        let g2 = self.projectile.states()[pair.projectile].degeneracy();
        f64::from(g1) * f64::from(g2)
    }

    /// Combined internal energy `E1 + E2` of a state pair, cm⁻¹.
    pub fn pair_energy(&self, pair: StatePair) -> f64 {
        self.target.states()[pair.target].energy()
            + self.projectile.states()[pair.projectile].energy()
    }

    /// Canonical keys of every unordered pair present in at least one direction.
    pub fn pairs(&self) -> Vec<TransitionKey> {
        let mut pairs: Vec<TransitionKey> = self.entries.keys().map(|k| k.canonical()).collect();
        pairs.sort();
        pairs.dedup();
        pairs
    }
}

/// What to do when only one direction of a transition has data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingReversePolicy {
    /// Use the present direction's degeneracy-weighted value alone.
    #[default]
    OneSided,
    RequireBoth,
}

impl std::str::FromStr for MissingReversePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-sided" => Ok(Self::OneSided),
            "require-both" => Ok(Self::RequireBoth),
            _ => Err(Error::Input(format!("unknown missing-reverse policy {s:?}"))),
        }
    }
}

impl fmt::Display for MissingReversePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::OneSided => "one-sided",
            Self::RequireBoth => "require-both",
        })
    }
}

/// Degeneracy-weighted cross section shared by both directions of a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrizedXsec {
    /// Canonical key of the unordered pair.
    pub pair: TransitionKey,
    pub grid: EnergyGrid,
    /// σ̃(Uᵢ) in degeneracy-weighted Å².
    pub values: Vec<Option<f64>>,
    /// Set when one direction was missing entirely.
    pub one_sided: bool,
}

/// `σ̃ = ½ [g σ(fwd) + g' σ(bwd)]` pointwise.
///
/// Where only one direction has a value at a grid point, that direction's
/// `g σ` is used on its own; points absent in both directions stay absent.
pub fn symmetrize(
    table: &CrossSectionTable,
    key: TransitionKey,
    policy: MissingReversePolicy,
) -> Result<SymmetrizedXsec> {
    let pair = key.canonical();
    let (fwd_key, bwd_key) = (pair, pair.reverse());
    let fwd = table.get(&fwd_key);
    let bwd = table.get(&bwd_key);
    let g_fwd = table.degeneracy(fwd_key.initial);
    let g_bwd = table.degeneracy(bwd_key.initial);

    let values = match (fwd, bwd) {
        (None, None) => return Err(Error::MissingTransition(key)),
        (Some(f), Some(b)) => f
            .iter()
            .zip(b)
            .map(|(f, b)| match (f, b) {
                (Some(f), Some(b)) => Some(0.5 * (g_fwd * f + g_bwd * b)),
                (Some(f), None) => Some(g_fwd * f),
                (None, Some(b)) => Some(g_bwd * b),
                (None, None) => None,
            })
            .collect(),
        (Some(only), None) | (None, Some(only)) => {
            let present = if fwd.is_some() { fwd_key } else { bwd_key };
            if policy == MissingReversePolicy::RequireBoth {
                return Err(Error::IncompletePair(present));
            }
            warn!("{present}: reverse direction absent, using one-sided σ̃");
            let g = table.degeneracy(present.initial);
            only.iter().map(|s| s.map(|s| g * s)).collect()
        }
    };
    Ok(SymmetrizedXsec {
        pair,
        grid: table.grid().clone(),
        values,
        one_sided: fwd.is_none() || bwd.is_none(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairInventory {
    /// Canonical keys whose reverse is also present.
    pub complete: Vec<TransitionKey>,
    /// Keys whose reverse is absent.
    pub one_sided: Vec<TransitionKey>,
    pub elastic: Vec<TransitionKey>,
}

impl PairInventory {
    /// Number of table keys covered; equals the table length.
    pub fn total_keys(&self) -> usize {
        2 * self.complete.len() + self.one_sided.len() + self.elastic.len()
    }
}

pub fn pair_inventory(table: &CrossSectionTable) -> PairInventory {
    let mut inv = PairInventory::default();
    for key in table.entries().keys() {
        if key.is_elastic() {
            inv.elastic.push(*key);
        } else if table.get(&key.reverse()).is_some() {
            if *key == key.canonical() {
                inv.complete.push(*key);
            }
        } else {
            inv.one_sided.push(*key);
        }
    }
    inv
}
