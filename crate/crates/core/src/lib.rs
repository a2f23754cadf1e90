//! Collisional rate coefficients for rotational transitions.
//!
//! Cross sections on a sparse collision-energy grid are turned into
//! state-to-state rate coefficients by Maxwell-Boltzmann averaging, summed
//! into effective rates over final projectile states, and averaged over
//! initial projectile states into thermal rates. Comparison tools cover
//! ternary (Dalitz) coordinates, factor-of-N agreement and scaling ratios.

pub mod aggregate;
pub mod cli;
pub mod compare;
pub mod dataio;
pub mod error;
pub mod ratecalc;
pub mod states;
pub mod xsec;

pub use error::{Error, Result};
