//! Pseudoinverses, the observable `⟨X^∓, ∇g(X)⟩` and the generator probe
//! `½Δg + ((δ − 1)/2)⟨X^∓, ∇g⟩`.

use serde::Serialize;

use crate::catalog::rank::{project_fixed_rank, tangent_projector_fixed_rank};
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::linalg::{self, Matrix, Point};

/// Singular values below `PINV_RANK_TOL · σ₁` are treated as zero.
pub const PINV_RANK_TOL: f64 = 1e-10;

/// `X`, `X⁺` and `X^∓ = (X⁺)ᵀ`.
#[derive(Debug, Clone)]
pub struct PseudoInversePair {
    pub x: Matrix,
    pub x_plus: Matrix,
    pub x_sharp: Matrix,
    /// Number of singular values kept.
    pub rank: usize,
}

impl PseudoInversePair {
    /// The four Penrose residuals `‖XX⁺X − X‖`, `‖X⁺XX⁺ − X⁺‖`,
    /// `‖(XX⁺)ᵀ − XX⁺‖`, `‖(X⁺X)ᵀ − X⁺X‖`.
    pub fn penrose_residuals(&self) -> [f64; 4] {
        let (x, p) = (&self.x, &self.x_plus);
        let xp = x * p;
        let px = p * x;
        [
            (&xp * x - x).norm(),
            (&px * p - p).norm(),
            (xp.transpose() - &xp).norm(),
            (px.transpose() - &px).norm(),
        ]
    }
}

/// `X⁺ = V Diag(σ⁺) Uᵀ` with `σᵢ⁺ = 1/σᵢ` above the rank threshold and 0
/// otherwise.
pub fn pinv(x: &Matrix) -> Result<PseudoInversePair> {
    let f = linalg::svd(x)?;
    let s = &f.singular_values;
    let tol = PINV_RANK_TOL * s.get(0).copied().unwrap_or(0.0);
    let mut rank = 0;
    let inv: Vec<f64> = s
        .iter()
        .map(|&v| {
            if v > tol && v > 0.0 {
                rank += 1;
                1.0 / v
            } else {
                0.0
            }
        })
        .collect();
    let (n, m) = x.shape();
    let x_plus = &f.v * linalg::diag(m, n, &inv) * f.u.transpose();
    let x_sharp = x_plus.transpose();
    Ok(PseudoInversePair { x: x.clone(), x_plus, x_sharp, rank })
}

/// `‖P_{T_Y M_k}(X^∓) − Y^∓‖` with `Y = P_{M_k}(X)`.
pub fn mp_tangent_projection_check(x: &Matrix, k: usize) -> Result<f64> {
    let (n, m) = x.shape();
    let y = project_fixed_rank(x, k)?;
    let xs = pinv(x)?.x_sharp;
    let ys = pinv(&y)?.x_sharp;
    let t = tangent_projector_fixed_rank(&y, k)?;
    let proj = linalg::unflatten(&t.apply(&linalg::flatten(&xs)), n, m);
    Ok((proj - ys).norm())
}

fn as_matrix(g: &dyn ScalarField, x: &Matrix) -> Result<Point> {
    if g.dim() != x.len() {
        return Err(Error::Contract(format!("field dimension {} ≠ {} matrix entries", g.dim(), x.len())));
    }
    Ok(linalg::flatten(x))
}

/// `⟨X^∓, ∇g(X)⟩` using the field's gradient.
pub fn observable(g: &dyn ScalarField, x: &Matrix) -> Result<f64> {
    let p = as_matrix(g, x)?;
    let grad = g.grad(&p)?;
    let xs = linalg::flatten(&pinv(x)?.x_sharp);
    Ok(xs.dot(&grad))
}

/// Central-difference Laplacian with step `1e-4·(1 + ‖X‖)` over the `2nm`
/// coordinate stencil.
pub fn fd_laplacian(g: &dyn ScalarField, x: &Matrix) -> Result<f64> {
    let p = as_matrix(g, x)?;
    let h = 1e-4 * (1.0 + x.norm());
    let g0 = g.eval(&p)?;
    let mut lap = 0.0;
    for i in 0..p.len() {
        let mut q = p.clone();
        q[i] += h;
        let gp = g.eval(&q)?;
        q[i] -= 2.0 * h;
        let gm = g.eval(&q)?;
        lap += (gp - 2.0 * g0 + gm) / (h * h);
    }
    if !lap.is_finite() {
        return Err(Error::Evaluation(format!("Laplacian of {} is not finite", g.name())));
    }
    Ok(lap)
}

/// `½ Δg(X) + ((δ − 1)/2) ⟨X^∓, ∇g(X)⟩`.
pub fn generator_probe(g: &dyn ScalarField, x: &Matrix, bessel_delta: f64) -> Result<f64> {
    let v = 0.5 * fd_laplacian(g, x)? + 0.5 * (bessel_delta - 1.0) * observable(g, x)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation("generator probe is not finite".into()))
    }
}

/// One point of a probe sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub t: f64,
    /// Row-major entries of `X(t)`.
    pub entries: Vec<f64>,
    /// Smallest singular value, the distance to the singular matrices.
    pub sigma_min: f64,
    pub observable: f64,
    pub generator: f64,
}

/// Evaluates the observable and the probe along `X(t) = (1 − t)·from + t·to`
/// at `steps + 1` equally spaced `t ∈ [0, 1]`.
pub fn probe_segment(g: &dyn ScalarField, from: &Matrix, to: &Matrix, steps: usize, bessel_delta: f64) -> Result<Vec<ProbeRow>> {
    if from.shape() != to.shape() {
        return Err(Error::Contract("segment endpoints differ in shape".into()));
    }
    let steps = steps.max(1);
    (0..=steps)
        .map(|i| {
            let t = i as f64 / steps as f64;
            let x = from * (1.0 - t) + to * t;
            let sv = linalg::singular_values(&x)?;
            Ok(ProbeRow {
                t,
                entries: linalg::flatten(&x).iter().copied().collect(),
                sigma_min: sv.iter().copied().fold(f64::INFINITY, f64::min),
                observable: observable(g, &x)?,
                generator: generator_probe(g, &x, bessel_delta)?,
            })
        })
        .collect()
}

/// Largest spread `max − min` of the observable over rows with
/// `sigma_min ≤ window`.
pub fn observable_oscillation(rows: &[ProbeRow], window: f64) -> f64 {
    let vals: Vec<f64> = rows.iter().filter(|r| r.sigma_min <= window).map(|r| r.observable).collect();
    if vals.is_empty() {
        return 0.0;
    }
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Growth ratio of `|probe|`: the maximum over the closest decade
/// (`sigma_min ≤ 10·s₀`, where `s₀` is the smallest positive `sigma_min`)
/// divided by the median over all rows.
pub fn probe_growth_ratio(rows: &[ProbeRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let s0 = rows.iter().map(|r| r.sigma_min).filter(|&s| s > 0.0).fold(f64::INFINITY, f64::min);
    let near = rows
        .iter()
        .filter(|r| r.sigma_min <= 10.0 * s0)
        .map(|r| r.generator.abs())
        .fold(0.0, f64::max);
    let mut all: Vec<f64> = rows.iter().map(|r| r.generator.abs()).collect();
    all.sort_by(f64::total_cmp);
    let k = all.len();
    let median = if k % 2 == 1 { all[k / 2] } else { 0.5 * (all[k / 2 - 1] + all[k / 2]) };
    if median == 0.0 {
        return if near == 0.0 { 0.0 } else { f64::INFINITY };
    }
    near / median
}
