//! C^p approximation on the faces of a triangle: g is constant along the
//! normal fibres of every face near that face.

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use stratsmooth::fields::{Constant, FrobSq, ScalarField};
use stratsmooth::smoothing::{self, SmoothingOptions};
use stratsmooth::{catalog, Rng};

fn main() -> stratsmooth::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/simplex2d.json");
    let a = catalog::PolyhedralComplex::load(&path)?.stratification()?;
    let f: Arc<dyn ScalarField> = Arc::new(FrobSq { dim: 2 });
    let eps: Arc<dyn ScalarField> = Arc::new(Constant { dim: 2, value: 0.05 });
    let opts = SmoothingOptions { target_order: Some(3), ..SmoothingOptions::default() };
    let g = smoothing::smooth_approximate(f, eps, &a, &opts)?;
    println!("{:?}, pre-smoothing {}", g.metadata().smoothness, g.metadata().pre_smoothing);

    let mut rng = Rng::seed_from_u64(4);
    for idx in 0..a.len() {
        let r = smoothing::check_local_constancy(&g, &a, idx, 100, &mut rng)?;
        if r.vacuous {
            println!("{:<5} open face, nothing to check", r.subject);
            continue;
        }
        println!(
            "{:<5} |g(x + tv) − g(x)| ≤ {:.1e}, normal second derivative ≤ {:.1e}",
            r.subject,
            r.max_violation,
            r.parameters.get("max_second_directional").copied().unwrap_or(0.0)
        );
    }
    Ok(())
}
