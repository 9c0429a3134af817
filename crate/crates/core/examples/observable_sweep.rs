//! Sweeps X(s) = Diag(1, s) through the rank-one stratum of M²ˣ² and prints
//! the observable ⟨X^∓, ∇g(X)⟩ and the generator probe for a normally flat
//! C³ approximation of ‖X‖².

use std::sync::Arc;

use nalgebra::dmatrix;
use stratsmooth::fields::{Constant, FrobSq, ScalarField};
use stratsmooth::moore_penrose;
use stratsmooth::smoothing::{self, SmoothingOptions};
use stratsmooth::catalog;

fn main() -> stratsmooth::Result<()> {
    let a = catalog::aplus_stratification(2)?;
    let f: Arc<dyn ScalarField> = Arc::new(FrobSq { dim: 4 });
    let eps: Arc<dyn ScalarField> = Arc::new(Constant { dim: 4, value: 0.05 });
    let opts = SmoothingOptions { target_order: Some(3), ..SmoothingOptions::default() };
    let g = smoothing::smooth_approximate(f, eps, &a, &opts)?;

    let rows = moore_penrose::probe_segment(&g, &dmatrix![1.0, 0.0; 0.0, -0.2], &dmatrix![1.0, 0.0; 0.0, 0.2], 400, 3.0)?;
    println!("{:>8} {:>14} {:>14}", "s", "observable", "generator");
    for r in rows.iter().step_by(20) {
        println!("{:>8.3} {:>14.8} {:>14.6}", r.entries[3], r.observable, r.generator);
    }
    println!("oscillation for |s| ≤ 5e-3: {:e}", moore_penrose::observable_oscillation(&rows, 5e-3));
    println!("probe growth ratio:         {:.4}", moore_penrose::probe_growth_ratio(&rows));
    Ok(())
}
