//! Validates the tube around the rank-one matrices in M²ˣ² and samples the
//! interpolation function φ inside it.

use rand::SeedableRng;
use stratsmooth::fields::{Constant, FrobSq};
use stratsmooth::tube::{self, Confinement, TubeSpec, TubeTarget};
use stratsmooth::{catalog, linalg, Rng};

fn main() -> stratsmooth::Result<()> {
    let a = catalog::aplus_stratification(2)?;
    let idx = a.index_of("M1")?;
    let mut spec = TubeSpec::new(&a, idx, Confinement::default());
    let (f, eps) = (FrobSq { dim: 4 }, Constant { dim: 4, value: 0.05 });
    let target = TubeTarget { field: &f, epsilon: &eps, share: 1.0 / 4.0 };
    let mut rng = Rng::seed_from_u64(1);
    let cert = tube::validate_tube(&mut spec, &target, 500, &mut rng)?;
    println!("tube around {}: scale {} after {} halvings", cert.stratum, cert.scale, cert.halvings);
    for c in &cert.conditions {
        println!("  {:<36} max {:>12.4e}  tol {:>10.3e}  {}", c.condition, c.max_violation, c.tolerance, if c.pass { "ok" } else { "FAIL" });
    }

    let (mut worst_scaled, mut worst_fd) = (0.0_f64, 0.0_f64);
    for p in spec.sample_tube(&mut rng, 2000) {
        worst_scaled = worst_scaled.max(tube::scaled_phi_gradient(&spec, &p.x)?);
        let an = spec.grad_phi(&p.x)?;
        let fd = linalg::fd_gradient(|z| spec.phi(z), &p.x, 1e-7, true)?;
        worst_fd = worst_fd.max((an - fd).amax());
    }
    println!("max |x − P(x)|·|∇φ(x)| = {worst_scaled:.4} (≤ 8)");
    println!("max |∇φ − FD|          = {worst_fd:.3e}");
    Ok(())
}
