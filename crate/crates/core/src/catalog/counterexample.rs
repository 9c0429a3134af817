//! The surface `Q = {z = xy, x ≥ 0}` stratified as the `y`-axis `M₁` and the
//! graph `M₂ = {(t, s, ts) : t > 0}`. It satisfies Whitney (a) but is not
//! normally flat: for `x > 0` and `z ≠ 0`, `P_{M₁}(x, 0, z) = 0` while
//! `P_{M₂}(x, 0, z)` has a non-zero `y`-coordinate.

use std::sync::Arc;

use rand::Rng as _;

use super::affine::AffineStratum;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, OrthoProjector, Point};
use crate::strata::{Stratification, Stratum};
use crate::Rng;

/// The graph stratum `M₂`.
#[derive(Debug, Clone)]
pub struct SaddleGraph {
    id: String,
}

impl Default for SaddleGraph {
    fn default() -> Self {
        SaddleGraph { id: "M2".into() }
    }
}

/// One converged local minimizer of the distance to the graph.
#[derive(Debug, Clone, Copy)]
struct LocalMin {
    t: f64,
    s: f64,
    value: f64,
}

fn objective(p: &[f64; 3], t: f64, s: f64) -> f64 {
    let r = [t - p[0], s - p[1], t * s - p[2]];
    r.iter().map(|v| v * v).sum()
}

/// Damped Gauss–Newton on `(t, s) ↦ |(t, s, ts) − p|²` from one start,
/// keeping `t > 0`. Returns `None` if the iterate collapses onto `t = 0`
/// or does not converge.
fn gauss_newton(p: &[f64; 3], mut t: f64, mut s: f64) -> Option<LocalMin> {
    let mut lambda = 1e-3;
    let mut f = objective(p, t, s);
    for _ in 0..500 {
        let r = [t - p[0], s - p[1], t * s - p[2]];
        // J = [[1, 0], [0, 1], [s, t]]
        let g = [r[0] + s * r[2], r[1] + t * r[2]];
        let h = [[1.0 + s * s, s * t], [s * t, 1.0 + t * t]];
        let grad_norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if grad_norm < 1e-15 * (1.0 + f.sqrt()) {
            break;
        }
        let mut accepted = false;
        let mut converged = false;
        for _ in 0..60 {
            let a = h[0][0] + lambda * h[0][0];
            let d = h[1][1] + lambda * h[1][1];
            let b = h[0][1];
            let det = a * d - b * b;
            let dt = -(d * g[0] - b * g[1]) / det;
            let ds = -(a * g[1] - b * g[0]) / det;
            let (nt, ns) = (t + dt, s + ds);
            if nt > 0.0 {
                let nf = objective(p, nt, ns);
                if nf <= f {
                    let done = (dt.abs() + ds.abs()) < 1e-16 * (1.0 + t.abs() + s.abs());
                    t = nt;
                    s = ns;
                    f = nf;
                    lambda = (lambda * 0.3).max(1e-12);
                    accepted = true;
                    converged = done;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !accepted || converged {
            break;
        }
    }
    if t < 1e-9 {
        return None;
    }
    // Newton polish with the full Hessian, while the gradient keeps shrinking
    let grad = |t: f64, s: f64| {
        let r3 = t * s - p[2];
        [t - p[0] + s * r3, s - p[1] + t * r3]
    };
    let mut g = grad(t, s);
    for _ in 0..6 {
        let h = full_hessian(t, s, t * s - p[2]);
        let det = h[0][0] * h[1][1] - h[0][1] * h[0][1];
        if det <= 0.0 {
            break;
        }
        let nt = t - (h[1][1] * g[0] - h[0][1] * g[1]) / det;
        let ns = s - (h[0][0] * g[1] - h[0][1] * g[0]) / det;
        let ng = grad(nt, ns);
        if nt <= 0.0 || ng[0].hypot(ng[1]) >= g[0].hypot(g[1]) {
            break;
        }
        (t, s, g) = (nt, ns, ng);
        f = objective(p, t, s);
    }
    // stationarity check
    let r = [t - p[0], s - p[1], t * s - p[2]];
    let g = [r[0] + s * r[2], r[1] + t * r[2]];
    if (g[0] * g[0] + g[1] * g[1]).sqrt() > 1e-8 * (1.0 + f.sqrt()) {
        return None;
    }
    Some(LocalMin { t, s, value: f })
}

/// Hessian of `½|γ(t, s) − p|²` with residual `r₃ = ts − p_z`.
fn full_hessian(t: f64, s: f64, r3: f64) -> [[f64; 2]; 2] {
    [[1.0 + s * s, s * t + r3], [s * t + r3, 1.0 + t * t]]
}

impl SaddleGraph {
    /// `(t, s)` of the nearest graph point, by multi-start damped Gauss–Newton.
    pub fn nearest_parameters(&self, x: &Point) -> Result<(f64, f64)> {
        let p = [x[0], x[1], x[2]];
        let scale = 1.0 + p.iter().map(|v| v.abs()).sum::<f64>();
        let tp = p[0].max(0.0);
        let mut mins = Vec::new();
        for t0 in [tp + 1e-2, 0.25 * scale, tp + 1.0, 2.0 * scale] {
            // s minimizing the objective for fixed t
            let s0 = (p[1] + t0 * p[2]) / (1.0 + t0 * t0);
            if let Some(m) = gauss_newton(&p, t0, s0) {
                mins.push(m);
            }
        }
        let Some(best) = mins.iter().copied().min_by(|a, b| a.value.total_cmp(&b.value)) else {
            return Err(Error::Domain("distance to the graph is minimized on its boundary t = 0".into()));
        };
        // boundary infimum over t → 0: |p|² − p_y² (at s = p_y)
        let boundary = p[0] * p[0] + p[2] * p[2];
        if best.value >= boundary - 1e-14 * (1.0 + boundary) {
            return Err(Error::Domain("nearest point of the closure lies on the y-axis".into()));
        }
        let tie_tol = 1e-12 * (1.0 + best.value);
        for m in &mins {
            let apart = (m.t - best.t).abs() + (m.s - best.s).abs() > 1e-6;
            if apart && (m.value - best.value).abs() <= tie_tol {
                return Err(Error::NonUniqueProjection {
                    stratum: self.id.clone(),
                    detail: format!("minimizers (t, s) = ({}, {}) and ({}, {}) are tied", best.t, best.s, m.t, m.s),
                });
            }
        }
        Ok((best.t, best.s))
    }

    fn parameters_on(&self, y: &Point) -> (f64, f64) {
        (y[0], y[1])
    }
}

impl Stratum for SaddleGraph {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        2
    }

    fn ambient_dim(&self) -> usize {
        3
    }

    fn project(&self, x: &Point) -> Result<Point> {
        let (t, s) = self.nearest_parameters(x)?;
        Ok(Point::from_vec(vec![t, s, t * s]))
    }

    /// `J H⁻¹ Jᵀ` by implicit differentiation of the stationarity condition.
    fn projection_jacobian(&self, x: &Point) -> Result<Matrix> {
        let (t, s) = self.nearest_parameters(x)?;
        let h = full_hessian(t, s, t * s - x[2]);
        let det = h[0][0] * h[1][1] - h[0][1] * h[0][1];
        if det <= 0.0 {
            return Err(Error::Domain("nearest point is degenerate".into()));
        }
        let j = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, s, t]);
        let hinv = Matrix::from_row_slice(2, 2, &[h[1][1], -h[0][1], -h[0][1], h[0][0]]) / det;
        Ok(&j * hinv * j.transpose())
    }

    fn tangent_projector(&self, y: &Point) -> Result<OrthoProjector> {
        let (t, s) = self.parameters_on(y);
        if t <= 0.0 {
            return Err(Error::Domain("point is not on the open graph t > 0".into()));
        }
        let basis = [Point::from_vec(vec![1.0, 0.0, s]), Point::from_vec(vec![0.0, 1.0, t])];
        Ok(linalg::projector_from_basis(&basis, 3))
    }

    /// Distance to the `y`-axis, `t √(1 + s²)`.
    fn frontier_terms(&self, y: &Point) -> Vec<f64> {
        vec![(y[0] * y[0] + y[2] * y[2]).sqrt()]
    }

    fn frontier_term_gradients(&self, y: &Point) -> Vec<Point> {
        let r = (y[0] * y[0] + y[2] * y[2]).sqrt();
        if r == 0.0 {
            return vec![Point::zeros(3)];
        }
        vec![Point::from_vec(vec![y[0] / r, 0.0, y[2] / r])]
    }

    fn distance_lower_bound(&self, x: &Point) -> f64 {
        let axis = (x[0] * x[0] + x[2] * x[2]).sqrt();
        match self.project(x) {
            Ok(p) => (x - p).norm().min(axis),
            Err(_) => axis,
        }
    }

    fn sample(&self, rng: &mut Rng, count: usize) -> Vec<Point> {
        (0..count)
            .map(|_| {
                let t = rng.random_range(0.05..1.5);
                let s = rng.random_range(-1.5..1.5);
                Point::from_vec(vec![t, s, t * s])
            })
            .collect()
    }

    fn contains(&self, x: &Point, tol: f64) -> bool {
        x[0] > 0.0 && (x[2] - x[0] * x[1]).abs() <= tol
    }
}

/// `(P_{M₁}(x), P_{M₂}(x))`.
pub fn counterexample_projections(x: &Point) -> Result<(Point, Point)> {
    let p1 = Point::from_vec(vec![0.0, x[1], 0.0]);
    let p2 = SaddleGraph::default().project(x)?;
    Ok((p1, p2))
}

/// The `y`-axis stratum `M₁`, anchored at the origin.
pub fn y_axis() -> AffineStratum {
    AffineStratum::new("M1", Point::zeros(3), &[Point::from_vec(vec![0.0, 1.0, 0.0])])
        .with_anchor(Point::zeros(3))
        .with_sample_radius(1.5)
}

/// `{M₁, M₂}`, claimed Whitney but not normally flat.
pub fn counterexample_stratification() -> Result<Stratification> {
    let strata: Vec<Arc<dyn Stratum>> = vec![Arc::new(y_axis()), Arc::new(SaddleGraph::default())];
    Stratification::new("counterexample", strata, &[("M1", "M2")], true, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    #[test]
    fn projection_examples() {
        let (p1, _) = counterexample_projections(&p(&[2.0, 0.0, 1.0])).unwrap();
        assert_eq!(p1, p(&[0.0, 0.0, 0.0]));
        let m1 = y_axis();
        assert_eq!(m1.project(&p(&[0.0, 5.0, 0.0])).unwrap(), p(&[0.0, 5.0, 0.0]));
        let (_, p2) = counterexample_projections(&p(&[2.0, 0.0, 1.0])).unwrap();
        assert!(p2[1].abs() > 1e-3);
    }

    #[test]
    fn graph_projection_matches_dense_grid() {
        let g = SaddleGraph::default();
        for x in [p(&[2.0, 0.0, 1.0]), p(&[0.5, -0.3, 0.2]), p(&[1.0, 1.0, -0.5])] {
            let y = g.project(&x).unwrap();
            let d = (&x - &y).norm();
            let mut best = f64::INFINITY;
            let n = 800;
            for i in 1..=n {
                let t = 3.0 * i as f64 / n as f64;
                for j in 0..=n {
                    let s = -2.0 + 4.0 * j as f64 / n as f64;
                    best = best.min(objective(&[x[0], x[1], x[2]], t, s).sqrt());
                }
            }
            assert!(d <= best + 1e-12, "x={x:?}");
            assert!(best - d < 1e-2, "x={x:?}");
        }
    }

    #[test]
    fn points_far_on_the_negative_side_are_not_attained() {
        let g = SaddleGraph::default();
        assert!(matches!(g.project(&p(&[-1.0, 0.3, 0.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn projection_is_idempotent_on_samples() {
        let mut rng = <Rng as rand::SeedableRng>::seed_from_u64(2);
        let g = SaddleGraph::default();
        for y in g.sample(&mut rng, 50) {
            assert!((g.project(&y).unwrap() - &y).norm() < 1e-10);
        }
    }
}
