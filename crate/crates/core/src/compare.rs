//! Cross-database comparison: ternary (Dalitz) coordinates, agreement
//! statistics and projectile-excitation scaling ratios.
//!
//! Two-table statistics always treat the second table as the reference:
//! ratios are `kA / kB` and percent differences `(kA - kB) / kB × 100`.
//! Zero or missing reference values are counted as excluded.

use std::collections::{BTreeMap, BTreeSet};

use crate::aggregate::{EffectiveKey, EffectiveRateTable, ThermalKey, ThermalRateTable};
use crate::error::{Error, Result};
use crate::ratecalc::RateTable;
use crate::states::LevelList;
use crate::xsec::TransitionKey;

/// Relative tolerance for matching temperatures across tables.
const TEMP_MATCH_RTOL: f64 = 1e-9;

/// A rate table reduced to what comparisons need.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyedTable<K> {
    pub temps: Vec<f64>,
    pub rows: BTreeMap<K, Vec<f64>>,
}

impl<K: Ord + Clone> KeyedTable<K> {
    pub fn temp_index(&self, t: f64) -> Option<usize> {
        self.temps
            .iter()
            .position(|&x| (x - t).abs() <= TEMP_MATCH_RTOL * t.abs())
    }

    fn rate(&self, key: &K, t: f64) -> Result<Option<f64>> {
        let ti = self
            .temp_index(t)
            .ok_or_else(|| Error::Input(format!("temperature {t} K not in table")))?;
        Ok(self.rows.get(key).map(|r| r[ti]))
    }

    /// Relabels keys; rows whose key maps to `None` are dropped and counted.
    pub fn map_keys<K2: Ord>(&self, f: impl Fn(&K) -> Option<K2>) -> (KeyedTable<K2>, usize) {
        let mut dropped = 0;
        let mut rows = BTreeMap::new();
        for (k, v) in &self.rows {
            match f(k) {
                Some(k2) => {
                    rows.insert(k2, v.clone());
                }
                None => dropped += 1,
            }
        }
        (
            KeyedTable {
                temps: self.temps.clone(),
                rows,
            },
            dropped,
        )
    }
}

impl From<&RateTable> for KeyedTable<TransitionKey> {
    fn from(t: &RateTable) -> Self {
        Self {
            temps: t.temps().to_vec(),
            rows: t.rows().clone(),
        }
    }
}

impl From<&EffectiveRateTable> for KeyedTable<EffectiveKey> {
    fn from(t: &EffectiveRateTable) -> Self {
        Self {
            temps: t.temps().to_vec(),
            rows: t
                .entries()
                .iter()
                .map(|(k, e)| (*k, e.rates.clone()))
                .collect(),
        }
    }
}

impl From<&ThermalRateTable> for KeyedTable<ThermalKey> {
    fn from(t: &ThermalRateTable) -> Self {
        Self {
            temps: t.temps().to_vec(),
            rows: t.entries().clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DalitzPoint {
    pub zeta_a: f64,
    pub zeta_b: f64,
    pub zeta_c: f64,
}

/// `ζ_X = k_X / (k_A + k_B + k_C)`.
pub fn dalitz(ka: f64, kb: f64, kc: f64) -> Result<DalitzPoint> {
    if [ka, kb, kc].iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
        return Err(Error::Input(format!(
            "Dalitz coordinates need finite non-negative rates, got ({ka}, {kb}, {kc})"
        )));
    }
    // summed in ascending order so permuted inputs give permuted outputs exactly
    let mut sorted = [ka, kb, kc];
    sorted.sort_by(f64::total_cmp);
    let sum = sorted[0] + sorted[1] + sorted[2];
    if sum == 0.0 {
        return Err(Error::UndefinedPoint);
    }
    Ok(DalitzPoint {
        zeta_a: ka / sum,
        zeta_b: kb / sum,
        zeta_c: kc / sum,
    })
}

/// Keys present in every table, ascending.
pub fn match_tables<K: Ord + Clone>(tables: &[&KeyedTable<K>]) -> Result<Vec<K>> {
    if !(2..=3).contains(&tables.len()) {
        return Err(Error::Input(format!(
            "comparison needs 2 or 3 tables, got {}",
            tables.len()
        )));
    }
    let mut common: BTreeSet<K> = tables[0].rows.keys().cloned().collect();
    for t in &tables[1..] {
        common.retain(|k| t.rows.contains_key(k));
    }
    if common.is_empty() {
        log::warn!("tables have no transitions in common");
    }
    Ok(common.into_iter().collect())
}

/// Temperatures present in every table, in the first table's order.
pub fn common_temperatures<K: Ord + Clone>(tables: &[&KeyedTable<K>]) -> Vec<f64> {
    tables[0]
        .temps
        .iter()
        .copied()
        .filter(|&t| tables[1..].iter().all(|x| x.temp_index(t).is_some()))
        .collect()
}

/// Ternary coordinates for every matched key at temperature `t`.
/// Keys where all three rates vanish are skipped.
pub fn dalitz_points<K: Ord + Clone>(
    a: &KeyedTable<K>,
    b: &KeyedTable<K>,
    c: &KeyedTable<K>,
    t: f64,
) -> Result<Vec<(K, DalitzPoint)>> {
    let mut out = Vec::new();
    for key in match_tables(&[a, b, c])? {
        let ka = a.rate(&key, t)?.unwrap_or(0.0);
        let kb = b.rate(&key, t)?.unwrap_or(0.0);
        let kc = c.rate(&key, t)?.unwrap_or(0.0);
        match dalitz(ka, kb, kc) {
            Ok(p) => out.push((key, p)),
            Err(Error::UndefinedPoint) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentDifference {
    /// Mean of `(kA - kB) / kB × 100`; `None` when nothing was usable.
    pub mean: Option<f64>,
    pub used: usize,
    /// Matched keys skipped because `kB` was zero.
    pub excluded: usize,
}

pub fn percent_difference<K: Ord + Clone>(
    a: &KeyedTable<K>,
    b: &KeyedTable<K>,
    t: f64,
) -> Result<PercentDifference> {
    let mut sum = 0.0;
    let mut used = 0;
    let mut excluded = 0;
    for key in match_tables(&[a, b])? {
        let (ka, kb) = (a.rate(&key, t)?.unwrap_or(0.0), b.rate(&key, t)?.unwrap_or(0.0));
        if kb > 0.0 {
            sum += (ka - kb) / kb * 100.0;
            used += 1;
        } else {
            excluded += 1;
        }
    }
    Ok(PercentDifference {
        mean: (used > 0).then(|| sum / used as f64),
        used,
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementOptions {
    pub factor: f64,
    /// Only keys with `kB >=` this are counted; `None` counts all.
    pub threshold: Option<f64>,
    pub max_outliers: usize,
}

impl Default for AgreementOptions {
    fn default() -> Self {
        Self {
            factor: 2.0,
            threshold: Some(1e-11),
            max_outliers: 10,
        }
    }
}

/// One temperature of an A-versus-B agreement report.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementEntry<K> {
    pub t: f64,
    pub factor: f64,
    /// Keys with `1/F <= kA/kB <= F`.
    pub within: usize,
    /// Keys with a positive reference above the intensity threshold.
    pub total: usize,
    /// Over every matched key with a positive reference, threshold ignored.
    pub mean_pct_diff: Option<f64>,
    /// Matched keys with a zero reference.
    pub excluded: usize,
    /// Largest `|ln(kA/kB)|` first.
    pub outliers: Vec<(K, f64)>,
}

pub fn factor_stats<K: Ord + Clone>(
    a: &KeyedTable<K>,
    b: &KeyedTable<K>,
    t: f64,
    opts: &AgreementOptions,
) -> Result<AgreementEntry<K>> {
    if !(opts.factor >= 1.0) {
        return Err(Error::Input(format!("factor must be >= 1, got {}", opts.factor)));
    }
    let pct = percent_difference(a, b, t)?;
    let mut within = 0;
    let mut total = 0;
    let mut ratios = Vec::new();
    for key in match_tables(&[a, b])? {
        let (ka, kb) = (a.rate(&key, t)?.unwrap_or(0.0), b.rate(&key, t)?.unwrap_or(0.0));
        if kb <= 0.0 || opts.threshold.is_some_and(|th| kb < th) {
            continue;
        }
        total += 1;
        let r = ka / kb;
        if r >= 1.0 / opts.factor && r <= opts.factor {
            within += 1;
        }
        ratios.push((key, r));
    }
    let severity = |r: f64| if r > 0.0 { r.ln().abs() } else { f64::INFINITY };
    ratios.sort_by(|x, y| severity(y.1).total_cmp(&severity(x.1)).then_with(|| x.0.cmp(&y.0)));
    ratios.truncate(opts.max_outliers);
    Ok(AgreementEntry {
        t,
        factor: opts.factor,
        within,
        total,
        mean_pct_diff: pct.mean,
        excluded: pct.excluded,
        outliers: ratios,
    })
}

/// Agreement of A against reference B at every shared temperature.
pub fn agreement_report<K: Ord + Clone>(
    a: &KeyedTable<K>,
    b: &KeyedTable<K>,
    opts: &AgreementOptions,
) -> Result<Vec<AgreementEntry<K>>> {
    common_temperatures(&[a, b])
        .into_iter()
        .map(|t| factor_stats(a, b, t, opts))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub n1: usize,
    pub n1p: usize,
    pub t: f64,
    pub j2: u32,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScalingResult {
    pub rows: Vec<ScalingRow>,
    /// Target transitions without a usable reference, with the reason.
    pub skipped: Vec<((usize, usize), String)>,
}

/// `R_{j2} = k^{j2} / k^{ref}` for every transition and temperature.
///
/// Only projectile states with the parity of `reference_j2` enter. Without
/// a level list the projectile index is taken to be `j2`.
pub fn scaling_ratios(
    eff: &EffectiveRateTable,
    projectile: Option<&LevelList>,
    reference_j2: u32,
) -> Result<ScalingResult> {
    let j_of = |n2: usize| -> Result<u32> {
        match projectile {
            Some(levels) => levels
                .get(n2)
                .map(|s| s.j())
                .ok_or_else(|| Error::Input(format!("projectile state {n2} not in level list"))),
            None => u32::try_from(n2).map_err(|_| Error::Input(format!("state {n2} too large"))),
        }
    };
    let mut by_transition: BTreeMap<(usize, usize), Vec<(u32, &[f64])>> = BTreeMap::new();
    for (key, entry) in eff.entries() {
        let j2 = j_of(key.n2)?;
        if j2 % 2 == reference_j2 % 2 {
            by_transition
                .entry((key.n1, key.n1p))
                .or_default()
                .push((j2, &entry.rates));
        }
    }
    let mut out = ScalingResult::default();
    for ((n1, n1p), mut states) in by_transition {
        states.sort_by_key(|&(j2, _)| j2);
        let Some(&(_, reference)) = states.iter().find(|&&(j2, _)| j2 == reference_j2) else {
            out.skipped
                .push(((n1, n1p), format!("no rate for reference j2 = {reference_j2}")));
            continue;
        };
        if let Some(ti) = reference.iter().position(|&k| !(k > 0.0)) {
            out.skipped.push((
                (n1, n1p),
                format!("reference rate is zero at T = {} K", eff.temps()[ti]),
            ));
            continue;
        }
        for (ti, &t) in eff.temps().iter().enumerate() {
            for &(j2, rates) in &states {
                out.rows.push(ScalingRow {
                    n1,
                    n1p,
                    t,
                    j2,
                    ratio: rates[ti] / reference[ti],
                });
            }
        }
    }
    for (key, reason) in &out.skipped {
        log::warn!("scaling {}->{}: {reason}", key.0, key.1);
    }
    Ok(out)
}

/// Keys whose target-state indices can be relabelled.
pub trait TargetIndexed: Sized {
    fn map_targets(&self, f: impl Fn(usize) -> Option<usize>) -> Option<Self>;
}

impl TargetIndexed for TransitionKey {
    fn map_targets(&self, f: impl Fn(usize) -> Option<usize>) -> Option<Self> {
        let mut k = *self;
        k.initial.target = f(k.initial.target)?;
        k.final_.target = f(k.final_.target)?;
        Some(k)
    }
}

impl TargetIndexed for EffectiveKey {
    fn map_targets(&self, f: impl Fn(usize) -> Option<usize>) -> Option<Self> {
        Some(EffectiveKey {
            n1: f(self.n1)?,
            n1p: f(self.n1p)?,
            n2: self.n2,
        })
    }
}

impl TargetIndexed for ThermalKey {
    fn map_targets(&self, f: impl Fn(usize) -> Option<usize>) -> Option<Self> {
        Some(ThermalKey {
            n1: f(self.n1)?,
            n1p: f(self.n1p)?,
            symmetry: self.symmetry,
        })
    }
}

/// Per-table relabelling of target-state indices onto a common convention.
///
/// A table with no entries keeps its indices. A table with entries keeps
/// only the states it maps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateMapping {
    pub tables: [BTreeMap<usize, usize>; 3],
}

impl StateMapping {
    pub fn insert(&mut self, table: usize, from: usize, to: usize) -> Result<()> {
        let label = table_label(table)?;
        let map = &mut self.tables[table];
        if map.contains_key(&from) {
            return Err(Error::Input(format!("table {label}: state {from} mapped twice")));
        }
        if map.values().any(|&v| v == to) {
            return Err(Error::Input(format!("table {label}: two states mapped onto {to}")));
        }
        map.insert(from, to);
        Ok(())
    }

    pub fn map(&self, table: usize, n: usize) -> Option<usize> {
        let map = &self.tables[table];
        if map.is_empty() {
            Some(n)
        } else {
            map.get(&n).copied()
        }
    }

    /// Remapped copy of `t` and the number of rows dropped.
    pub fn apply<K: Ord + Clone + TargetIndexed>(
        &self,
        table: usize,
        t: &KeyedTable<K>,
    ) -> (KeyedTable<K>, usize) {
        t.map_keys(|k| k.map_targets(|n| self.map(table, n)))
    }
}

pub fn table_label(table: usize) -> Result<char> {
    match table {
        0 => Ok('A'),
        1 => Ok('B'),
        2 => Ok('C'),
        _ => Err(Error::Input(format!("table index {table} out of range"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::{Completeness, EffectiveEntry};

    fn table(rows: &[(usize, f64)]) -> KeyedTable<usize> {
        KeyedTable {
            temps: vec![100.0],
            rows: rows.iter().map(|&(k, v)| (k, vec![v])).collect(),
        }
    }

    #[test]
    fn dalitz_examples() {
        let p = dalitz(2.0e-11, 2.0e-11, 2.0e-11).unwrap();
        assert_eq!((p.zeta_a, p.zeta_b, p.zeta_c), (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0));
        let p = dalitz(0.0, 1.0, 1.0).unwrap();
        assert_eq!((p.zeta_a, p.zeta_b, p.zeta_c), (0.0, 0.5, 0.5));
        assert!(matches!(dalitz(0.0, 0.0, 0.0), Err(Error::UndefinedPoint)));
        assert!(dalitz(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn matching() {
        let a = table(&[(1, 1.0), (2, 1.0), (3, 1.0)]);
        let b = table(&[(2, 1.0), (3, 1.0), (4, 1.0)]);
        let c = table(&[(5, 1.0)]);
        assert_eq!(match_tables(&[&a, &a]).unwrap(), vec![1, 2, 3]);
        assert_eq!(match_tables(&[&a, &b]).unwrap(), vec![2, 3]);
        assert!(match_tables(&[&a, &c]).unwrap().is_empty());
        assert!(match_tables(&[&a]).is_err());
    }

    #[test]
    fn percent_examples() {
        let a = table(&[(1, 2.0), (2, 1.0)]);
        let b = table(&[(1, 1.0), (2, 2.0)]);
        let p = percent_difference(&a, &b, 100.0).unwrap();
        assert_eq!(p.mean, Some(25.0));
        assert_eq!(percent_difference(&a, &a, 100.0).unwrap().mean, Some(0.0));
        let z = table(&[(1, 0.0), (2, 2.0)]);
        let p = percent_difference(&a, &z, 100.0).unwrap();
        assert_eq!((p.used, p.excluded), (1, 1));
        assert!(percent_difference(&a, &b, 123.0).is_err());
    }

    #[test]
    fn factor_examples() {
        let opts = AgreementOptions {
            threshold: None,
            ..Default::default()
        };
        let a = table(&[(1, 3.0), (2, 3.0)]);
        let b = table(&[(1, 1.0), (2, 1.0)]);
        let e = factor_stats(&a, &b, 100.0, &opts).unwrap();
        assert_eq!((e.within, e.total), (0, 2));
        let e = factor_stats(&b, &b, 100.0, &opts).unwrap();
        assert_eq!((e.within, e.total), (2, 2));
    }

    #[test]
    fn outliers_sorted_by_log_ratio() {
        let opts = AgreementOptions {
            threshold: None,
            ..Default::default()
        };
        let a = table(&[(1, 1.5), (2, 0.1), (3, 5.0)]);
        let b = table(&[(1, 1.0), (2, 1.0), (3, 1.0)]);
        let e = factor_stats(&a, &b, 100.0, &opts).unwrap();
        let keys: Vec<usize> = e.outliers.iter().map(|o| o.0).collect();
        assert_eq!(keys, vec![2, 3, 1]);
    }

    #[test]
    fn threshold_filters_weak_reference() {
        let a = table(&[(1, 3e-12), (2, 2e-11)]);
        let b = table(&[(1, 1e-12), (2, 1.5e-11)]);
        let e = factor_stats(&a, &b, 100.0, &AgreementOptions::default()).unwrap();
        assert_eq!((e.within, e.total), (1, 1));
    }

    #[test]
    fn scaling_reference_is_one() {
        let mut eff = EffectiveRateTable::new(vec![500.0]);
        for (n2, k) in [(0, 2.0e-11), (2, 3.0e-11), (1, 7.0e-11)] {
            eff.insert(
                EffectiveKey { n1: 4, n1p: 1, n2 },
                EffectiveEntry {
                    rates: vec![k],
                    completeness: Completeness::Complete,
                },
            )
            .unwrap();
        }
        let r = scaling_ratios(&eff, None, 0).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].ratio, 1.0);
        assert_eq!(r.rows[1].j2, 2);
        assert!((r.rows[1].ratio - 1.5).abs() < 1e-15);
        let r = scaling_ratios(&eff, None, 3).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(r.skipped.len(), 1);
    }

    #[test]
    fn mapping_relabels_targets() {
        let mut m = StateMapping::default();
        m.insert(1, 3, 0).unwrap();
        m.insert(1, 4, 1).unwrap();
        assert!(m.insert(1, 5, 1).is_err());
        let t = KeyedTable {
            temps: vec![100.0],
            rows: [
                (TransitionKey::new(3, 0, 4, 0), vec![1.0]),
                (TransitionKey::new(3, 0, 7, 0), vec![2.0]),
            ]
            .into_iter()
            .collect(),
        };
        let (a, dropped) = m.apply(0, &t);
        assert_eq!((a.rows.len(), dropped), (2, 0));
        let (b, dropped) = m.apply(1, &t);
        assert_eq!(dropped, 1);
        assert_eq!(b.rows.keys().copied().collect::<Vec<_>>(), vec![TransitionKey::new(0, 0, 1, 0)]);
    }
}
