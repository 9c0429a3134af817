//! Smooth approximation of scalar fields on stratified subsets of `ℝⁿ`.
//!
//! A continuous field on a stratified set is replaced, stratum by stratum in
//! ascending dimension, by a field that is locally constant along normal
//! fibres of tubular neighbourhoods. Near each stratum the approximation
//! only sees tangential derivatives, which keeps gradient-type observables
//! meaningful on the strata.

pub mod bump;
pub mod catalog;
pub mod error;
pub mod fields;
pub mod harness;
pub mod linalg;
pub mod moore_penrose;
pub mod smoothing;
pub mod strata;
pub mod tube;

pub use error::{Error, Result};
pub use linalg::{Matrix, OrthoProjector, Point};
pub use strata::{CertificationReport, Stratification, Stratum};

/// Random number generator used throughout; seeded explicitly for
/// reproducible runs.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Regularity class of a field, stratum or construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    /// Continuous only.
    C0,
    /// Fréchet differentiable, derivative not necessarily continuous.
    Frechet,
    C1,
    /// `C^p` for a finite `p ≥ 2`.
    Cp(u32),
    CInf,
}

impl Smoothness {
    /// Number of continuous derivatives (`u32::MAX` for `C^∞`, 0 for `C⁰` and Fréchet).
    pub fn order(self) -> u32 {
        match self {
            Smoothness::C0 | Smoothness::Frechet => 0,
            Smoothness::C1 => 1,
            Smoothness::Cp(p) => p,
            Smoothness::CInf => u32::MAX,
        }
    }

    pub fn from_order(p: u32) -> Self {
        match p {
            0 => Smoothness::C0,
            1 => Smoothness::C1,
            u32::MAX => Smoothness::CInf,
            p => Smoothness::Cp(p),
        }
    }

    /// The weaker of two classes.
    pub fn min(self, other: Self) -> Self {
        if self.order() < other.order() || (self.order() == other.order() && self <= other) {
            self
        } else {
            other
        }
    }
}
