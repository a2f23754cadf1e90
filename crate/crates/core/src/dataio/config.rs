//! Pipeline configuration: constants, tolerances, policies, grids.
//!
//! On disk it is a flat `key = value` file after the `# format: config v1`
//! line. Keys left out keep their defaults; unknown keys are rejected.

use std::fmt::Write as _;
use std::path::Path;

use crate::aggregate::{MissingFinalPolicy, MissingInitialPolicy};
use crate::error::{Error, Result};
use crate::xsec::MissingReversePolicy;

use super::{check_format, read_file};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Boltzmann constant, cm⁻¹/K.
    pub k_b: f64,
    /// h·c in erg·cm (cm⁻¹ → erg).
    pub hc: f64,
    /// Atomic mass unit in g.
    pub amu: f64,
    /// Å² → cm².
    pub angstrom2_to_cm2: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            k_b: 0.695_034_800,
            hc: 1.986_445_857e-16,
            amu: 1.660_539_07e-24,
            angstrom2_to_cm2: 1e-16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub constants: PhysicalConstants,
    /// Reduced mass of the collision pair in u. Default is H₂O + H₂.
    pub reduced_mass: f64,
    pub quad_rtol: f64,
    pub max_refinements: u32,
    /// Equilibrium weight below which an initial projectile state may be absent.
    pub weight_floor: f64,
    pub reverse_policy: MissingReversePolicy,
    pub final_policy: MissingFinalPolicy,
    pub initial_policy: MissingInitialPolicy,
    /// K, strictly increasing.
    pub temperatures: Vec<f64>,
    /// Initial projectile j values admitted to thermal averages; `None` = all.
    pub included_j2: Option<Vec<u32>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            constants: PhysicalConstants::default(),
            reduced_mass: 1.81277,
            quad_rtol: 1e-6,
            max_refinements: 30,
            weight_floor: 1e-4,
            reverse_policy: MissingReversePolicy::OneSided,
            final_policy: MissingFinalPolicy::Flag,
            initial_policy: MissingInitialPolicy::Error,
            temperatures: vec![
                10.0, 20.0, 50.0, 100.0, 200.0, 300.0, 500.0, 1000.0, 1500.0, 2000.0,
            ],
            included_j2: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let c = &self.constants;
        for (name, v) in [
            ("k_b_cm1_per_k", c.k_b),
            ("hc_erg_cm", c.hc),
            ("amu_g", c.amu),
            ("angstrom2_cm2", c.angstrom2_to_cm2),
            ("reduced_mass_u", self.reduced_mass),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("quad_rtol", self.quad_rtol), ("weight_floor", self.weight_floor)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.max_refinements == 0 {
            return Err(Error::Config("max_refinements must be at least 1".into()));
        }
        validate_temperatures(&self.temperatures)
    }
}

pub fn validate_temperatures(temps: &[f64]) -> Result<()> {
    if temps.is_empty() {
        return Err(Error::Config("temperature grid is empty".into()));
    }
    if temps.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::Config("temperatures must be positive".into()));
    }
    if temps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "temperature grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Comma- or whitespace-separated list of numbers.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Option<Vec<T>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().ok())
        .collect()
}

pub fn parse_config(text: &str, path: &Path) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    check_format(&mut lines, "config", path)?;
    for (n, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::parse(path, n, "expected `key = value`"))?;
        let bad = || Error::parse(path, n, format!("invalid value {value:?} for {key}"));
        let float = || value.parse::<f64>().map_err(|_| bad());
        match key {
            "k_b_cm1_per_k" => cfg.constants.k_b = float()?,
            "hc_erg_cm" => cfg.constants.hc = float()?,
            "amu_g" => cfg.constants.amu = float()?,
            "angstrom2_cm2" => cfg.constants.angstrom2_to_cm2 = float()?,
            "reduced_mass_u" => cfg.reduced_mass = float()?,
            "quad_rtol" => cfg.quad_rtol = float()?,
            "max_refinements" => cfg.max_refinements = value.parse().map_err(|_| bad())?,
            "weight_floor" => cfg.weight_floor = float()?,
            "missing_reverse_policy" => cfg.reverse_policy = value.parse().map_err(|_| bad())?,
            "missing_final_policy" => cfg.final_policy = value.parse().map_err(|_| bad())?,
            "missing_initial_policy" => cfg.initial_policy = value.parse().map_err(|_| bad())?,
            "temperatures_k" => {
                let temps: Vec<f64> = parse_list(value).ok_or_else(bad)?;
                validate_temperatures(&temps)
                    .map_err(|e| Error::parse(path, n, e.to_string()))?;
                cfg.temperatures = temps;
            }
            "included_j2" => {
                cfg.included_j2 = if value == "all" {
                    None
                } else {
                    Some(parse_list(value).ok_or_else(bad)?)
                }
            }
            other => return Err(Error::parse(path, n, format!("unknown key {other:?}"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    parse_config(&read_file(path)?, path)
}

/// Floats use the shortest exact scientific form so constants survive unchanged.
pub fn write_config(cfg: &PipelineConfig) -> String {
    let c = &cfg.constants;
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", ");
    let mut out = String::from("# format: config v1\n");
    let _ = writeln!(out, "k_b_cm1_per_k = {:e}", c.k_b);
    let _ = writeln!(out, "hc_erg_cm = {:e}", c.hc);
    let _ = writeln!(out, "amu_g = {:e}", c.amu);
    let _ = writeln!(out, "angstrom2_cm2 = {:e}", c.angstrom2_to_cm2);
    let _ = writeln!(out, "reduced_mass_u = {:e}", cfg.reduced_mass);
    let _ = writeln!(out, "quad_rtol = {:e}", cfg.quad_rtol);
    let _ = writeln!(out, "max_refinements = {}", cfg.max_refinements);
    let _ = writeln!(out, "weight_floor = {:e}", cfg.weight_floor);
    let _ = writeln!(out, "missing_reverse_policy = {}", cfg.reverse_policy);
    let _ = writeln!(out, "missing_final_policy = {}", cfg.final_policy);
    let _ = writeln!(out, "missing_initial_policy = {}", cfg.initial_policy);
    let _ = writeln!(out, "temperatures_k = {}", join(&cfg.temperatures));
    match &cfg.included_j2 {
        None => out.push_str("included_j2 = all\n"),
        Some(js) => {
            let js: Vec<String> = js.iter().map(u32::to_string).collect();
            let _ = writeln!(out, "included_j2 = {}", js.join(", "));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PipelineConfig> {
        parse_config(text, Path::new("test.cfg"))
    }

    #[test]
    fn header_only_gives_defaults() {
        let cfg = parse("# format: config v1\n").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.quad_rtol, 1e-6);
        assert_eq!(cfg.max_refinements, 30);
        assert_eq!(cfg.initial_policy, MissingInitialPolicy::Error);
    }

    #[test]
    fn roundtrip() {
        let mut cfg = PipelineConfig::default();
        cfg.included_j2 = Some(vec![0, 2, 4, 6, 8]);
        cfg.reverse_policy = MissingReversePolicy::RequireBoth;
        cfg.initial_policy = MissingInitialPolicy::SubstituteHighest;
        assert_eq!(parse(&write_config(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        let e = parse("# format: config v1\ntemperatures_k = 500, 100\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = parse("# format: config v1\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("unknown key"));
        assert!(matches!(parse("# format: config v2\n"), Err(Error::Format { .. })));
        assert!(matches!(
            parse("# format: config v1\nquad_rtol = 2\n"),
            Err(Error::Config(_))
        ));
    }
}
