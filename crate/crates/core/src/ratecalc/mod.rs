//! State-to-state rate coefficients from symmetrized cross sections.
//!
//! For a transition with energy gap `ΔE` the rate is
//!
//! ```text
//! k(T) = v(T) / (k_B T)² · exp(-ΔE / 2k_B T) / (g1 g2)
//!        · ∫_{|ΔE|/4}^∞ σ̃(U) exp[-(U/k_B T)(1 + (ΔE/4U)²)] [1 - (ΔE/4U)²] U dU
//! ```
//!
//! The integrand is represented as the interpolated σ̃ times the analytic
//! kinematic factor, so the Boltzmann peak is resolved exactly even when it
//! falls between (or below) the sparse energy samples. σ̃ is interpolated by
//! a natural cubic spline of `ln σ̃` when every sample is positive and by a
//! shape-preserving cubic otherwise. Past the last sample `ln σ̃` continues
//! linearly with a non-positive slope.

pub mod quadrature;
pub mod spline;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use log::warn;
use rayon::prelude::*;

use crate::dataio::config::{PhysicalConstants, PipelineConfig};
use crate::error::{Error, Result};
use crate::xsec::{symmetrize, CrossSectionTable, SymmetrizedXsec, TransitionKey};

use quadrature::{integrate, QuadSettings};
use spline::{MonotoneCubic, NaturalCubic};

/// Upper bound on high-energy tail panels.
const MAX_TAIL_PANELS: usize = 200;

/// Energetics and degeneracies of one directed transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionContext {
    pub key: TransitionKey,
    /// `E(final) - E(initial)`, cm⁻¹.
    pub delta_e: f64,
    /// `2j1 + 1`, `2j2 + 1` of the initial states.
    pub g_initial: (u32, u32),
    pub g_final: (u32, u32),
    /// `|ΔE| / 4`, cm⁻¹.
    pub u_min: f64,
}

impl TransitionContext {
    pub fn new(table: &CrossSectionTable, key: TransitionKey) -> Result<Self> {
        let t = table.target();
        let p = table.projectile();
        let lookup = |pair: crate::xsec::StatePair| {
            match (t.get(pair.target), p.get(pair.projectile)) {
                (Some(a), Some(b)) => Ok((a, b)),
                _ => Err(Error::Input(format!("{key}: state index out of range"))),
            }
        };
        let (i1, i2) = lookup(key.initial)?;
        let (f1, f2) = lookup(key.final_)?;
        let delta_e = (f1.energy() + f2.energy()) - (i1.energy() + i2.energy());
        Ok(Self::from_parts(
            key,
            delta_e,
            (i1.degeneracy(), i2.degeneracy()),
            (f1.degeneracy(), f2.degeneracy()),
        ))
    }

    pub fn from_parts(
        key: TransitionKey,
        delta_e: f64,
        g_initial: (u32, u32),
        g_final: (u32, u32),
    ) -> Self {
        Self {
            key,
            delta_e,
            g_initial,
            g_final,
            u_min: delta_e.abs() / 4.0,
        }
    }

    pub fn reverse(&self) -> Self {
        Self::from_parts(self.key.reverse(), -self.delta_e, self.g_final, self.g_initial)
    }

    pub fn initial_degeneracy(&self) -> f64 {
        f64::from(self.g_initial.0) * f64::from(self.g_initial.1)
    }

    pub fn final_degeneracy(&self) -> f64 {
        f64::from(self.g_final.0) * f64::from(self.g_final.1)
    }
}

/// Maxwell mean relative speed `sqrt(8 k_B T / π μ)` in cm/s; `μ` in u.
pub fn mean_speed(t: f64, mu: f64, consts: &PhysicalConstants) -> f64 {
    let k_b_erg = consts.k_b * consts.hc;
    (8.0 * k_b_erg * t / (PI * mu * consts.amu)).sqrt()
}

/// Interpolant of σ̃(U) over the usable samples.
#[derive(Debug, Clone, PartialEq)]
pub enum XsecInterpolant {
    /// Natural cubic spline of `ln σ̃`, linear continuation outside.
    LogSpline {
        spline: NaturalCubic,
        /// d ln σ̃ / dU beyond the last sample (≤ 0).
        tail_slope: f64,
    },
    /// Shape-preserving cubic of σ̃ itself, held constant outside.
    Monotone(MonotoneCubic),
}

impl XsecInterpolant {
    fn new(u: Vec<f64>, sigma: Vec<f64>) -> Self {
        if sigma.iter().all(|&s| s > 0.0) {
            let ln: Vec<f64> = sigma.iter().map(|s| s.ln()).collect();
            let spline = NaturalCubic::new(u, ln);
            let tail_slope = spline.end_slope().min(0.0);
            XsecInterpolant::LogSpline { spline, tail_slope }
        } else {
            XsecInterpolant::Monotone(MonotoneCubic::new(u, sigma))
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            XsecInterpolant::LogSpline { spline, tail_slope } => {
                let knots = spline.knots();
                let last = knots[knots.len() - 1];
                if u > last {
                    let y_last = spline.values()[knots.len() - 1];
                    (y_last + tail_slope * (u - last)).exp()
                } else {
                    spline.eval(u).exp()
                }
            }
            XsecInterpolant::Monotone(m) => m.eval(u).max(0.0),
        }
    }

    pub fn mode(&self) -> &'static str {
        match self {
            XsecInterpolant::LogSpline { .. } => "log-spline",
            XsecInterpolant::Monotone(_) => "monotone",
        }
    }

    pub fn tail_slope(&self) -> f64 {
        match self {
            XsecInterpolant::LogSpline { tail_slope, .. } => *tail_slope,
            XsecInterpolant::Monotone(_) => 0.0,
        }
    }
}

/// The rate integrand of one directed transition at one temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrandCurve {
    /// `(U_min, 0)`.
    pub anchor: (f64, f64),
    /// `(Uᵢ, I(Uᵢ))` for the usable grid points.
    pub samples: Vec<(f64, f64)>,
    pub xsec: XsecInterpolant,
    delta_e: f64,
    kt: f64,
}

impl IntegrandCurve {
    pub fn u_min(&self) -> f64 {
        self.anchor.0
    }

    pub fn last_sample(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    /// `[1 - (ΔE/4U)²] U`, zero at and below threshold.
    fn threshold_factor(&self, u: f64) -> f64 {
        if u <= self.anchor.0 {
            return 0.0;
        }
        let x = self.delta_e / (4.0 * u);
        ((1.0 - x * x) * u).max(0.0)
    }

    /// `I(U)` exactly as written in the rate formula.
    pub fn eval(&self, u: f64) -> f64 {
        let b = self.threshold_factor(u);
        if b == 0.0 {
            return 0.0;
        }
        let x = self.delta_e / (4.0 * u);
        self.xsec.eval(u) * (-(u / self.kt) * (1.0 + x * x)).exp() * b
    }

    /// `I(U) exp(-ΔE / 2k_B T)`, evaluated as one exponent
    /// `-(U + ΔE/4)² / (U k_B T)` so it cannot overflow for large gaps.
    pub fn eval_scaled(&self, u: f64) -> f64 {
        let b = self.threshold_factor(u);
        if b == 0.0 {
            return 0.0;
        }
        let s = u + 0.25 * self.delta_e;
        self.xsec.eval(u) * (-(s * s) / (u * self.kt)).exp() * b
    }
}

/// Builds the integrand from the grid points above threshold with data.
pub fn build_integrand(
    sigma: &SymmetrizedXsec,
    ctx: &TransitionContext,
    t: f64,
    consts: &PhysicalConstants,
) -> Result<IntegrandCurve> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Input(format!("temperature must be positive, got {t}")));
    }
    let (u, s): (Vec<f64>, Vec<f64>) = sigma
        .grid
        .values()
        .iter()
        .zip(&sigma.values)
        .filter_map(|(&u, s)| s.filter(|_| u > ctx.u_min).map(|s| (u, s)))
        .unzip();
    if u.len() < 2 {
        return Err(Error::InsufficientData {
            key: ctx.key,
            usable: u.len(),
            u_min: ctx.u_min,
        });
    }
    let mut curve = IntegrandCurve {
        anchor: (ctx.u_min, 0.0),
        samples: Vec::with_capacity(u.len()),
        xsec: XsecInterpolant::new(u.clone(), s),
        delta_e: ctx.delta_e,
        kt: consts.k_b * t,
    };
    for &ui in &u {
        let v = curve.eval(ui);
        if !(v >= 0.0) {
            return Err(Error::Invariant(format!(
                "{}: integrand {v} at U = {ui}",
                ctx.key
            )));
        }
        curve.samples.push((ui, v));
    }
    Ok(curve)
}

/// Adaptive quadrature of the curve, returning k(T) in cm³/s.
pub fn integrate_rate(
    curve: &IntegrandCurve,
    ctx: &TransitionContext,
    t: f64,
    cfg: &PipelineConfig,
) -> Result<f64> {
    let settings = QuadSettings {
        rtol: cfg.quad_rtol,
        max_refinements: cfg.max_refinements,
    };
    let f = |u: f64| curve.eval_scaled(u);

    let mut breaks = Vec::with_capacity(curve.samples.len() + 1);
    breaks.push(curve.u_min());
    breaks.extend(curve.samples.iter().map(|&(u, _)| u));
    let (body, _) = integrate(f, &breaks, settings)?;

    // March outwards in growing panels until they stop contributing.
    let kt = cfg.constants.k_b * t;
    let mut tail = 0.0;
    let mut a = curve.last_sample();
    let mut width = kt;
    let mut previous = f64::INFINITY;
    let mut converged = false;
    for panel in 0..MAX_TAIL_PANELS {
        let (v, _) = integrate(f, &[a, a + width], settings)?;
        tail += v;
        a += width;
        width *= 2.0;
        if panel > 0 && v <= previous && v <= cfg.quad_rtol * (body + tail) {
            converged = true;
            break;
        }
        previous = v;
    }
    if !converged {
        return Err(Error::Quadrature(format!(
            "{}: high-energy tail still contributing after {MAX_TAIL_PANELS} panels",
            ctx.key
        )));
    }

    let c = &cfg.constants;
    let v = mean_speed(t, cfg.reduced_mass, c);
    let k = v / (kt * kt) / ctx.initial_degeneracy() * (body + tail) * c.angstrom2_to_cm2;
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::Invariant(format!("{}: rate {k} at T = {t}", ctx.key)));
    }
    Ok(k)
}

/// Rates of both directions of one pair over a temperature grid.
fn pair_rates(
    table: &CrossSectionTable,
    pair: TransitionKey,
    temps: &[f64],
    cfg: &PipelineConfig,
) -> Result<(Vec<(TransitionKey, Vec<f64>)>, SmoothnessReport)> {
    let sigma = symmetrize(table, pair, cfg.reverse_policy)?;
    let fwd = TransitionContext::new(table, pair)?;
    let mut contexts = vec![fwd];
    if !pair.is_elastic() {
        contexts.push(fwd.reverse());
    }
    let mut rows = Vec::with_capacity(contexts.len());
    let mut report = None;
    for ctx in &contexts {
        let mut ks = Vec::with_capacity(temps.len());
        for &t in temps {
            let curve = build_integrand(&sigma, ctx, t, &cfg.constants)?;
            if report.is_none() {
                report = Some(SmoothnessReport::new(pair, &curve, sigma.one_sided));
            }
            ks.push(integrate_rate(&curve, ctx, t, cfg)?);
        }
        rows.push((ctx.key, ks));
    }
    let report = report.ok_or_else(|| Error::Input("empty temperature grid".into()))?;
    Ok((rows, report))
}

/// Shape diagnostics of one pair's σ̃ interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessReport {
    pub pair: TransitionKey,
    pub mode: &'static str,
    pub samples: usize,
    pub one_sided: bool,
    pub tail_slope: f64,
    /// Largest excursion of σ̃ outside the range of a segment's end values,
    /// relative to the larger end value.
    pub max_overshoot: f64,
}

impl SmoothnessReport {
    const SUBDIVISIONS: usize = 32;

    fn new(pair: TransitionKey, curve: &IntegrandCurve, one_sided: bool) -> Self {
        let knots: Vec<f64> = curve.samples.iter().map(|&(u, _)| u).collect();
        let mut worst = 0.0_f64;
        for w in knots.windows(2) {
            let (s0, s1) = (curve.xsec.eval(w[0]), curve.xsec.eval(w[1]));
            let (lo, hi) = (s0.min(s1), s0.max(s1));
            for k in 1..Self::SUBDIVISIONS {
                let u = w[0] + (w[1] - w[0]) * k as f64 / Self::SUBDIVISIONS as f64;
                let s = curve.xsec.eval(u);
                let excess = (s - hi).max(lo - s).max(0.0);
                if hi > 0.0 {
                    worst = worst.max(excess / hi);
                }
            }
        }
        Self {
            pair,
            mode: curve.xsec.mode(),
            samples: knots.len(),
            one_sided,
            tail_slope: curve.xsec.tail_slope(),
            max_overshoot: worst,
        }
    }
}

/// k(T) in cm³/s on a temperature grid, keyed by directed transition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateTable {
    temps: Vec<f64>,
    rows: BTreeMap<TransitionKey, Vec<f64>>,
}

impl RateTable {
    pub fn new(temps: Vec<f64>) -> Self {
        Self {
            temps,
            rows: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: TransitionKey, rates: Vec<f64>) -> Result<()> {
        if rates.len() != self.temps.len() {
            return Err(Error::Input(format!(
                "{key}: {} rates for {} temperatures",
                rates.len(),
                self.temps.len()
            )));
        }
        if rates.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(Error::Input(format!("{key}: rates must be finite and >= 0")));
        }
        if self.rows.insert(key, rates).is_some() {
            return Err(Error::Input(format!("duplicate transition {key}")));
        }
        Ok(())
    }

    pub fn temps(&self) -> &[f64] {
        &self.temps
    }

    pub fn rows(&self) -> &BTreeMap<TransitionKey, Vec<f64>> {
        &self.rows
    }

    pub fn get(&self, key: &TransitionKey) -> Option<&[f64]> {
        self.rows.get(key).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug)]
pub struct RateFailure {
    pub pair: TransitionKey,
    pub error: Error,
}

/// Output of a batch run. Failures do not abort the batch.
#[derive(Debug)]
pub struct RateRun {
    pub table: RateTable,
    pub failures: Vec<RateFailure>,
    pub reports: Vec<SmoothnessReport>,
}

/// Rates for every pair in the table, both directions.
///
/// Pairs are computed in parallel on the current rayon pool and merged in
/// key order, so the result does not depend on the number of workers.
pub fn rate_table(table: &CrossSectionTable, temps: &[f64], cfg: &PipelineConfig) -> Result<RateRun> {
    if temps.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::Input("temperatures must be positive".into()));
    }
    let pairs = table.pairs();
    let results: Vec<_> = pairs
        .par_iter()
        .map(|&pair| (pair, pair_rates(table, pair, temps, cfg)))
        .collect();

    let mut run = RateRun {
        table: RateTable::new(temps.to_vec()),
        failures: Vec::new(),
        reports: Vec::new(),
    };
    for (pair, result) in results {
        match result {
            Ok((rows, report)) => {
                for (key, ks) in rows {
                    run.table.insert(key, ks)?;
                }
                run.reports.push(report);
            }
            Err(error) => {
                warn!("{pair}: {error}");
                run.failures.push(RateFailure { pair, error });
            }
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xsec::EnergyGrid;

    fn cfg() -> PipelineConfig {
        PipelineConfig::default()
    }

    fn constant_xsec(value: f64) -> SymmetrizedXsec {
        let grid = EnergyGrid::ten_point();
        SymmetrizedXsec {
            pair: TransitionKey::new(0, 0, 0, 0),
            values: vec![Some(value); grid.len()],
            grid,
            one_sided: false,
        }
    }

    #[test]
    fn speed_scaling() {
        let c = PhysicalConstants::default();
        let v = mean_speed(300.0, 1.81277, &c);
        assert!((mean_speed(1200.0, 1.81277, &c) / v - 2.0).abs() < 1e-15);
        assert!((mean_speed(300.0, 4.0 * 1.81277, &c) / v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn elastic_integrand_reduces_to_closed_form() {
        let c = PhysicalConstants::default();
        let ctx = TransitionContext::from_parts(TransitionKey::new(0, 0, 0, 0), 0.0, (1, 1), (1, 1));
        let curve = build_integrand(&constant_xsec(3.0), &ctx, 100.0, &c).unwrap();
        let kt = c.k_b * 100.0;
        for &(u, i) in &curve.samples {
            let exact = 3.0 * u * (-u / kt).exp();
            assert!((i - exact).abs() <= 1e-12 * exact, "U={u}");
        }
    }

    #[test]
    fn integrand_vanishes_at_threshold() {
        let c = PhysicalConstants::default();
        let ctx = TransitionContext::from_parts(TransitionKey::new(1, 0, 0, 0), -300.0, (3, 1), (1, 1));
        let curve = build_integrand(&constant_xsec(1.0), &ctx, 300.0, &c).unwrap();
        assert_eq!(curve.eval(75.0), 0.0);
        assert_eq!(curve.eval_scaled(75.0), 0.0);
        assert_eq!(curve.anchor, (75.0, 0.0));
        // grid points at or below U_min are dropped
        assert_eq!(curve.samples[0].0, 84.0);
    }

    #[test]
    fn scaled_form_matches_direct_form() {
        let c = PhysicalConstants::default();
        for de in [-500.0, -20.0, 0.0, 40.0, 800.0] {
            let ctx = TransitionContext::from_parts(TransitionKey::new(1, 0, 0, 0), de, (3, 1), (1, 1));
            let curve = build_integrand(&constant_xsec(2.0), &ctx, 500.0, &c).unwrap();
            let kt = c.k_b * 500.0;
            for u in [250.0, 400.0, 1000.0, 3000.0] {
                let direct = curve.eval(u) * (-de / (2.0 * kt)).exp();
                assert!((curve.eval_scaled(u) - direct).abs() <= 1e-12 * direct.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn insufficient_samples() {
        let c = PhysicalConstants::default();
        let ctx = TransitionContext::from_parts(TransitionKey::new(1, 0, 0, 0), 30000.0, (3, 1), (1, 1));
        let r = build_integrand(&constant_xsec(1.0), &ctx, 300.0, &c);
        assert!(matches!(r, Err(Error::InsufficientData { usable: 1, .. })));
    }

    #[test]
    fn elastic_constant_rate_is_speed_times_sigma() {
        let cfg = cfg();
        let ctx = TransitionContext::from_parts(TransitionKey::new(0, 0, 0, 0), 0.0, (3, 1), (3, 1));
        for t in [20.0, 300.0, 2000.0] {
            let curve = build_integrand(&constant_xsec(3.0 * 10.0), &ctx, t, &cfg.constants).unwrap();
            let k = integrate_rate(&curve, &ctx, t, &cfg).unwrap();
            let exact = mean_speed(t, cfg.reduced_mass, &cfg.constants) * 10.0 * 1e-16;
            assert!((k / exact - 1.0).abs() < 1e-6, "T={t}: {k} vs {exact}");
        }
    }
}
