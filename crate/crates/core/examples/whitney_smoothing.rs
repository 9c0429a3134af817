//! C¹ approximation of ‖X‖² on the positive-determinant stratification of
//! M²ˣ² with gradients tangent to every stratum.

use std::sync::Arc;

use rand::SeedableRng;
use stratsmooth::fields::{Constant, FrobSq, ScalarField};
use stratsmooth::smoothing::{self, SmoothingOptions};
use stratsmooth::{catalog, linalg, Rng};

fn main() -> stratsmooth::Result<()> {
    let a = catalog::aplus_stratification(2)?;
    let f: Arc<dyn ScalarField> = Arc::new(FrobSq { dim: 4 });
    let eps: Arc<dyn ScalarField> = Arc::new(Constant { dim: 4, value: 0.05 });
    let g = smoothing::smooth_approximate(f.clone(), eps, &a, &SmoothingOptions::default())?;

    let meta = g.metadata();
    println!("{} on {}: {:?}, pre-smoothing {}", meta.base_field, meta.stratification, meta.smoothness, meta.pre_smoothing);
    for s in &meta.stages {
        println!("  stage {:<4} dim {}  scale {:<8} lip ≤ {:.1}{}", s.stratum, s.dim, s.certificate.scale, s.lip_bound, if s.identity { "  (identity)" } else { "" });
    }

    let mut rng = Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let x = linalg::uniform_box(&mut rng, 4, 1.0);
        worst = worst.max((f.eval(&x)? - g.eval(&x)?).abs() / 0.05);
    }
    println!("max |f − g|/ε = {worst:.4}");
    for (idx, s) in a.strata().iter().enumerate().filter(|(_, s)| s.dim() < 4) {
        let mut r: f64 = 0.0;
        for x in s.sample(&mut rng, 20) {
            r = r.max(smoothing::tangency_residual(&g, &a, idx, &x)?);
        }
        println!("tangency residual on {}: {r:.2e}", s.id());
    }
    Ok(())
}
