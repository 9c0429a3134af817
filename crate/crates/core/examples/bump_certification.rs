//! Dense check of the interpolation profile ψ and its derivative bounds.

use stratsmooth::bump::{Bump, DERIVATIVE_BOUND, SCALED_DERIVATIVE_BOUND};

fn main() -> stratsmooth::Result<()> {
    let bump = Bump::standard();
    let spec = bump.spec();
    println!("a = {}, b = {}, η = {}", spec.a, spec.b, spec.eta);

    let step = 1e-4;
    let (mut sup_d, mut sup_td) = (0.0_f64, 0.0_f64);
    let (mut plateau_err, mut tail_err) = (0.0_f64, 0.0_f64);
    for i in 0..=12_000 {
        let t = i as f64 * step;
        let (p, d) = (bump.psi(t)?, bump.psi_prime(t)?);
        sup_d = sup_d.max(d.abs());
        sup_td = sup_td.max((t * d).abs());
        if t <= 0.25 {
            plateau_err = plateau_err.max((p - 1.0).abs());
        }
        if t >= 0.75 {
            tail_err = tail_err.max(p.abs());
        }
    }
    println!("max |ψ − 1| on [0, 0.25]   = {plateau_err:e}");
    println!("max |ψ| on [0.75, 1.2]     = {tail_err:e}");
    println!("sup |ψ′|  = {sup_d:.6}  (bound {DERIVATIVE_BOUND:.6}, margin {:.4})", DERIVATIVE_BOUND - sup_d);
    println!("sup |tψ′| = {sup_td:.6}  (bound {SCALED_DERIVATIVE_BOUND:.6}, margin {:.4})", SCALED_DERIVATIVE_BOUND - sup_td);
    Ok(())
}
