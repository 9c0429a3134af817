//! Projections onto spectral sets: clamp the spectrum in the model set and
//! rebuild the matrix in its own singular or eigen frame.

use nalgebra::dmatrix;
use rand::SeedableRng;
use stratsmooth::catalog::{BoxSet, LiftKind, NonnegOrthant, SpectralLiftSet, WholeSpace};
use stratsmooth::Rng;

fn main() -> stratsmooth::Result<()> {
    let unit_box = SpectralLiftSet::new(Box::new(BoxSet { radius: 1.0 }), LiftKind::Singular)?;
    let x = dmatrix![3.0, 0.0; 0.0, 0.5];
    println!("σ-lift of the unit box: P(Diag(3, 0.5)) = {}", unit_box.project(&x)?);

    let psd = SpectralLiftSet::new(Box::new(NonnegOrthant), LiftKind::Eigen)?;
    let s = dmatrix![1.0, 0.0; 0.0, -2.0];
    println!("λ-lift of the orthant (PSD cone): P(Diag(1, −2)) = {}", psd.project(&s)?);

    let whole = SpectralLiftSet::new(Box::new(WholeSpace), LiftKind::Singular)?;
    let y = dmatrix![0.3, -1.2; 2.0, 0.7];
    println!("σ-lift of ℝ² leaves matrices alone: ‖P(Y) − Y‖ = {:e}", (whole.project(&y)? - &y).norm());

    let mut rng = Rng::seed_from_u64(9);
    match unit_box.check_invariance(&mut rng, 3, 200, 2.0) {
        None => println!("box model set is absolutely permutation invariant on 200 samples"),
        Some(w) => println!("invariance fails at {w:?}"),
    }
    Ok(())
}
