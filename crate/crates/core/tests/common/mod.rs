//! Synthetic fixtures shared by the integration tests.
//!
//! All levels here are rigid-rotor levels generated from rotational
//! constants. They are synthetic and not spectroscopic data.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rotrates::dataio::{save_levels, save_xsec, write_config, PipelineConfig};
use rotrates::states::{asym_top_levels, linear_rotor_levels, LevelList, Symmetry};
use rotrates::xsec::{CrossSectionTable, EnergyGrid, TransitionKey};

pub const WATER_ABC: (f64, f64, f64) = (27.88, 14.52, 9.28);
pub const H2_B: f64 = 59.322;
/// Boltzmann constant in cm⁻¹/K and in erg/K.
pub const K_B_CM: f64 = 0.695_034_8;
pub const K_B_ERG: f64 = 1.380_649e-16;
pub const AMU_G: f64 = 1.660_539_07e-24;
pub const MU: f64 = 1.81277;

/// Lowest `n` rigid-rotor levels of a water-like asymmetric top.
pub fn target_levels(n: usize) -> LevelList {
    let (a, b, c) = WATER_ABC;
    let all = asym_top_levels(a, b, c, 8).unwrap();
    assert!(all.len() >= n);
    LevelList::new(
        all.species(),
        all.filter(),
        all.origin(),
        all.states()[..n].to_vec(),
    )
    .unwrap()
}

/// Para-H₂ `j = 0, 2` from the rigid-rotor formula, re-indexed 0, 1.
pub fn para_h2() -> LevelList {
    linear_rotor_levels(H2_B, 0.0, 3).unwrap().with_filter(Symmetry::Para)
}

/// Mean relative speed, computed directly in CGS.
pub fn v_ave(t: f64) -> f64 {
    (8.0 * K_B_ERG * t / (std::f64::consts::PI * MU * AMU_G)).sqrt()
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Random smooth cross sections for `n_pairs` distinct inelastic pairs.
///
/// Most pairs carry both directions, roughly reversible; some are
/// one-sided and a few grid points are absent.
pub fn synthetic_xsec(seed: u64, n_pairs: usize) -> CrossSectionTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = target_levels(20);
    let projectile = para_h2();
    let grid = EnergyGrid::ten_point();
    let mut table = CrossSectionTable::new(grid.clone(), target.clone(), projectile.clone());

    let states: Vec<(usize, usize)> = (0..target.len())
        .flat_map(|a| (0..projectile.len()).map(move |b| (a, b)))
        .collect();
    let mut candidates = Vec::new();
    for (i, &s) in states.iter().enumerate() {
        for &f in &states[i + 1..] {
            candidates.push((s, f));
        }
    }
    candidates.shuffle(&mut rng);
    let energy = |(a, b): (usize, usize)| {
        target.states()[a].energy() + projectile.states()[b].energy()
    };
    let degeneracy = |(a, b): (usize, usize)| {
        f64::from(target.states()[a].degeneracy() * projectile.states()[b].degeneracy())
    };

    let mut used = BTreeSet::new();
    for (s, f) in candidates.into_iter().take(n_pairs) {
        used.insert((s, f));
        let amp = log_uniform(&mut rng, 0.05, 20.0);
        let u1 = log_uniform(&mut rng, 50.0, 2000.0);
        let p = rng.gen_range(0.2..1.5);
        let u_min = (energy(f) - energy(s)).abs() / 4.0;
        let fwd: Vec<Option<f64>> = grid
            .values()
            .iter()
            .map(|&u| {
                let v = amp * (1.0 + u / u1).powf(-p) * rng.gen_range(0.9..1.1);
                // keep at least the top five points so every pair stays usable
                let droppable = u > u_min && u < 1000.0;
                (!(droppable && rng.gen_bool(0.05))).then_some(v)
            })
            .collect();
        let bwd: Vec<Option<f64>> = fwd
            .iter()
            .map(|v| v.map(|v| v * degeneracy(s) / degeneracy(f) * rng.gen_range(0.8..1.2)))
            .collect();
        let key = TransitionKey::new(s.0, s.1, f.0, f.1);
        match rng.gen_range(0..10) {
            0 => table.insert(key, fwd).unwrap(),
            1 => table.insert(key.reverse(), bwd).unwrap(),
            _ => {
                table.insert(key, fwd).unwrap();
                table.insert(key.reverse(), bwd).unwrap();
            }
        }
    }
    assert_eq!(used.len(), n_pairs);
    table
}

/// Writes the fixture inputs for a `rates` run; returns the config used.
pub fn write_rates_inputs(dir: &Path, table: &CrossSectionTable) -> PipelineConfig {
    save_levels(&dir.join("target.lev"), table.target()).unwrap();
    save_levels(&dir.join("h2.lev"), table.projectile()).unwrap();
    save_xsec(&dir.join("xsec.dat"), table).unwrap();
    let cfg = PipelineConfig::default();
    std::fs::write(dir.join("run.cfg"), write_config(&cfg)).unwrap();
    cfg
}

/// `A Ja² + B Jb² + C Jc²` built from ladder-operator matrices, `a` along z.
pub fn full_hamiltonian(a: f64, b: f64, c: f64, j: u32) -> DMatrix<f64> {
    let n = (2 * j + 1) as usize;
    let jf = f64::from(j);
    let m = |i: usize| i as f64 - jf;
    let mut jz = DMatrix::zeros(n, n);
    let mut jp = DMatrix::zeros(n, n);
    for i in 0..n {
        jz[(i, i)] = m(i);
        if i + 1 < n {
            jp[(i + 1, i)] = (jf * (jf + 1.0) - m(i) * (m(i) + 1.0)).sqrt();
        }
    }
    let jm = jp.transpose();
    // Jx = (J+ + J-)/2, Jy² = -(J+ - J-)²/4
    let jx = (&jp + &jm) * 0.5;
    let d = &jp - &jm;
    let jy2 = -(&d * &d) * 0.25;
    &jz * &jz * a + &jx * &jx * b + jy2 * c
}
