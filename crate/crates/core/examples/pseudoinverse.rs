//! Moore–Penrose inverses and the tangent projection of X^∓ onto the
//! fixed-rank manifold through the Eckart–Young truncation.

use nalgebra::dmatrix;
use rand::SeedableRng;
use stratsmooth::catalog::rank::random_rank_k;
use stratsmooth::moore_penrose::{mp_tangent_projection_check, pinv};
use stratsmooth::Rng;

fn main() -> stratsmooth::Result<()> {
    let ones = dmatrix![1.0, 1.0; 1.0, 1.0];
    let p = pinv(&ones)?;
    println!("pinv of the all-ones matrix (rank {}): {}", p.rank, p.x_plus);
    println!("Penrose residuals: {:?}", p.penrose_residuals());

    let x = dmatrix![3.0, 0.0; 0.0, 1.0];
    println!("X = Diag(3, 1), k = 1: ‖P_T(X^∓) − Y^∓‖ = {:e}", mp_tangent_projection_check(&x, 1)?);

    let mut rng = Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        // healthy gap: rank-2 part in [1, 2], perturbation far below it
        let y = random_rank_k(&mut rng, 3, 3, 2, 1.0, 2.0);
        let z = random_rank_k(&mut rng, 3, 3, 1, 0.01, 0.05);
        worst = worst.max(mp_tangent_projection_check(&(y + z), 2)?);
    }
    println!("worst residual over 1000 random 3×3 matrices, k = 2: {worst:e}");
    Ok(())
}
