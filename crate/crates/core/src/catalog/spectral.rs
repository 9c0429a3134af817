//! Spectral sets `σ⁻¹(Q)` and `λ⁻¹(Q)` lifted from permutation-invariant
//! model sets `Q ⊂ ℝⁿ`.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::Rng;

/// A closed model set with a metric projection oracle.
pub trait ModelSet: Send + Sync + std::fmt::Debug {
    fn name(&self) -> String;
    fn contains(&self, y: &[f64]) -> bool;
    /// Metric projection; [`Error::NonUniqueProjection`] on ties.
    fn project(&self, y: &[f64]) -> Result<Vec<f64>>;
    /// Invariance under sign changes in addition to permutations.
    fn sign_invariant(&self) -> bool;
}

/// `{y : |yᵢ| ≤ r}`.
#[derive(Debug, Clone, Copy)]
pub struct BoxSet {
    pub radius: f64,
}

impl ModelSet for BoxSet {
    fn name(&self) -> String {
        format!("box(r={})", self.radius)
    }

    fn contains(&self, y: &[f64]) -> bool {
        y.iter().all(|v| v.abs() <= self.radius)
    }

    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(y.iter().map(|v| v.clamp(-self.radius, self.radius)).collect())
    }

    fn sign_invariant(&self) -> bool {
        true
    }
}

/// All of `ℝⁿ`.
#[derive(Debug, Clone, Copy)]
pub struct WholeSpace;

impl ModelSet for WholeSpace {
    fn name(&self) -> String {
        "whole".into()
    }

    fn contains(&self, _y: &[f64]) -> bool {
        true
    }

    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(y.to_vec())
    }

    fn sign_invariant(&self) -> bool {
        true
    }
}

/// `ℝⁿ₊`; its eigenvalue lift is the PSD cone.
#[derive(Debug, Clone, Copy)]
pub struct NonnegOrthant;

impl ModelSet for NonnegOrthant {
    fn name(&self) -> String {
        "orthant".into()
    }

    fn contains(&self, y: &[f64]) -> bool {
        y.iter().all(|&v| v >= 0.0)
    }

    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(y.iter().map(|v| v.max(0.0)).collect())
    }

    fn sign_invariant(&self) -> bool {
        false
    }
}

/// Which spectral map lifts the model set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftKind {
    /// `σ⁻¹(Q) ⊂ M^{n×m}`; needs an absolutely permutation-invariant `Q`.
    Singular,
    /// `λ⁻¹(Q) ⊂ Sⁿ`; needs a permutation-invariant `Q`.
    Eigen,
}

/// Image of `y` in the fundamental domain: absolute values sorted
/// descending for singular-value lifts, plain descending sort otherwise.
pub fn normalize_signed_perm(y: &[f64], kind: LiftKind) -> Vec<f64> {
    let mut z: Vec<f64> = match kind {
        LiftKind::Singular => y.iter().map(|v| v.abs()).collect(),
        LiftKind::Eigen => y.to_vec(),
    };
    z.sort_by(|a, b| b.total_cmp(a));
    z
}

/// A spectral set lifted from a model set.
#[derive(Debug)]
pub struct SpectralLiftSet {
    pub model: Box<dyn ModelSet>,
    pub kind: LiftKind,
}

impl SpectralLiftSet {
    pub fn new(model: Box<dyn ModelSet>, kind: LiftKind) -> Result<Self> {
        if kind == LiftKind::Singular && !model.sign_invariant() {
            return Err(Error::Contract(format!("model set {} is not sign invariant", model.name())));
        }
        Ok(SpectralLiftSet { model, kind })
    }

    /// Spectral vector of `x` (σ or λ, descending).
    pub fn spectrum(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(match self.kind {
            LiftKind::Singular => linalg::singular_values(x)?.as_slice().to_vec(),
            LiftKind::Eigen => linalg::sym_eig(x)?.eigenvalues.as_slice().to_vec(),
        })
    }

    pub fn contains(&self, x: &Matrix) -> Result<bool> {
        Ok(self.model.contains(&self.spectrum(x)?))
    }

    /// `U Diag(P_Q(σ(X))) Vᵀ` (resp. `U Diag(P_Q(λ(X))) Uᵀ`), with the
    /// projected vector normalized back into the fundamental domain.
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        match self.kind {
            LiftKind::Singular => {
                let f = linalg::svd(x)?;
                let z = self.model.project(f.singular_values.as_slice())?;
                Ok(f.compose(&normalize_signed_perm(&z, self.kind)))
            }
            LiftKind::Eigen => {
                let f = linalg::sym_eig(x)?;
                let z = self.model.project(f.eigenvalues.as_slice())?;
                Ok(f.compose(&normalize_signed_perm(&z, self.kind)))
            }
        }
    }

    /// Samples random signed permutations of random vectors and reports the
    /// first point whose membership is not invariant.
    pub fn check_invariance(&self, rng: &mut Rng, dim: usize, samples: usize, radius: f64) -> Option<Vec<f64>> {
        for _ in 0..samples {
            let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..radius)).collect();
            let mut z = y.clone();
            z.shuffle(rng);
            if self.kind == LiftKind::Singular {
                for v in z.iter_mut() {
                    if rng.random_bool(0.5) {
                        *v = -*v;
                    }
                }
            }
            if self.model.contains(&y) != self.model.contains(&z) {
                return Some(y);
            }
        }
        None
    }
}
