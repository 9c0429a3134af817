//! Tubular neighbourhoods `U_δ = {y + v : y ∈ M, v ∈ N_yM, |v| < δ(y)}` and
//! the interpolation function `φ(x) = ψ(|x − P_M x| / δ(P_M x))`.
//!
//! The width is `δ(y) = c · cap · tanh(s(y)² / cap)`, where `s` is the q-power
//! softmin of the stratum's frontier terms, lower bounds on the distance to
//! strata that must stay outside the tube, and optional confinement terms.
//! `tanh` saturates with slope ≤ 1, so `δ ≤ c · min(s², cap)`.

use std::sync::Arc;

use serde::Serialize;

use crate::bump::Bump;
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::linalg::{self, Matrix, Point};
use crate::strata::{self, CertificationReport, Stratification, Stratum};
use crate::{Rng, Smoothness};

/// Default scale `c`.
pub const DEFAULT_SCALE: f64 = 0.125;
/// Default saturation level of `s²`.
pub const DEFAULT_CAP: f64 = 1.0;
/// Maximum number of scale halvings during validation.
pub const MAX_HALVINGS: usize = 20;
/// Validation passes a condition `lhs < rhs` only if `SAFETY · lhs < rhs`.
pub const SAFETY: f64 = 2.0;

/// Where a tube must stay.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Confinement {
    /// Tubes stay inside the box `|xᵢ| < half_width`.
    pub support_box: Option<f64>,
    /// Tubes have width below this value (the freeze neighbourhood).
    pub freeze_width: Option<f64>,
}

/// A tube around one stratum.
#[derive(Debug, Clone)]
pub struct TubeSpec {
    stratum: Arc<dyn Stratum>,
    excluded: Vec<Arc<dyn Stratum>>,
    confinement: Confinement,
    pub scale: f64,
    pub softmin_order: i32,
    pub cap: f64,
    certificate: Option<TubeCertificate>,
}

/// A point of the tube with its normal coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TubePoint {
    pub x: Point,
    pub y: Point,
    /// `|x − y|`.
    pub gap: f64,
    /// `δ(y)`.
    pub width: f64,
    /// `gap / width`.
    pub ratio: f64,
}

/// Validation record attached to a tube.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TubeCertificate {
    pub stratum: String,
    pub scale: f64,
    pub initial_scale: f64,
    pub softmin_order: i32,
    pub cap: f64,
    pub halvings: usize,
    pub samples: usize,
    pub budget_share: f64,
    pub achievable_smoothness: Smoothness,
    pub conditions: Vec<CertificationReport>,
    pub pass: bool,
}

impl TubeSpec {
    /// A tube around stratum `idx` of `a`, keeping all other strata of
    /// dimension `≤ dim M` that are not in its frontier outside.
    pub fn new(a: &Stratification, idx: usize, confinement: Confinement) -> Self {
        TubeSpec {
            stratum: a.stratum(idx).clone(),
            excluded: a.excluded_from_tube(idx).into_iter().map(|j| a.stratum(j).clone()).collect(),
            confinement,
            scale: DEFAULT_SCALE,
            softmin_order: strata::DEFAULT_SOFTMIN_ORDER,
            cap: DEFAULT_CAP,
            certificate: None,
        }
    }

    /// A tube around a lone stratum with no exclusions.
    pub fn for_stratum(stratum: Arc<dyn Stratum>, confinement: Confinement) -> Self {
        TubeSpec {
            stratum,
            excluded: Vec::new(),
            confinement,
            scale: DEFAULT_SCALE,
            softmin_order: strata::DEFAULT_SOFTMIN_ORDER,
            cap: DEFAULT_CAP,
            certificate: None,
        }
    }

    pub fn with_scale(mut self, c: f64) -> Self {
        self.scale = c;
        self.certificate = None;
        self
    }

    pub fn stratum(&self) -> &Arc<dyn Stratum> {
        &self.stratum
    }

    pub fn certificate(&self) -> Option<&TubeCertificate> {
        self.certificate.as_ref()
    }

    pub fn is_validated(&self) -> bool {
        self.certificate.as_ref().is_some_and(|c| c.pass)
    }

    /// Marks the tube as validated without sampling; used for strata with a
    /// trivial normal space, where the stage is the identity.
    pub fn accept_trivial(&mut self, budget_share: f64) {
        self.certificate = Some(TubeCertificate {
            stratum: self.stratum.id().to_string(),
            scale: self.scale,
            initial_scale: self.scale,
            softmin_order: self.softmin_order,
            cap: self.cap,
            halvings: 0,
            samples: 0,
            budget_share,
            achievable_smoothness: self.stratum.smoothness(),
            conditions: Vec::new(),
            pass: true,
        });
    }

    /// Values and gradients of all terms entering the softmin at `y`.
    fn terms(&self, y: &Point, with_grad: bool) -> (Vec<f64>, Vec<Point>) {
        let n = y.len();
        let mut vals = self.stratum.frontier_terms(y);
        let mut grads = if with_grad { self.stratum.frontier_term_gradients(y) } else { Vec::new() };
        for s in &self.excluded {
            vals.push(s.distance_lower_bound(y));
            if with_grad {
                grads.push(s.distance_lower_bound_gradient(y));
            }
        }
        if let Some(r) = self.confinement.support_box {
            for i in 0..n {
                for sign in [1.0, -1.0] {
                    vals.push(r - sign * y[i]);
                    if with_grad {
                        let mut g = Point::zeros(n);
                        g[i] = -sign;
                        grads.push(g);
                    }
                }
            }
        }
        if let Some(w) = self.confinement.freeze_width {
            // c · s² ≤ w/2
            vals.push((0.5 * w / self.scale).sqrt());
            if with_grad {
                grads.push(Point::zeros(n));
            }
        }
        (vals, grads)
    }

    /// The combined softmin distance `s(y)`.
    pub fn softmin_distance(&self, y: &Point) -> f64 {
        strata::softmin(&self.terms(y, false).0, self.softmin_order)
    }

    fn width_raw(&self, s: f64) -> f64 {
        if !s.is_finite() {
            return self.scale * self.cap;
        }
        self.scale * self.cap * (s * s / self.cap).tanh()
    }

    /// `δ(y)` for `y ∈ M`.
    pub fn width(&self, y: &Point) -> Result<f64> {
        if !self.stratum.contains(y, 1e-8 * (1.0 + y.norm())) {
            return Err(Error::Domain(format!("width queried off stratum {}", self.stratum.id())));
        }
        Ok(self.width_unchecked(y))
    }

    fn width_unchecked(&self, y: &Point) -> f64 {
        self.width_raw(self.softmin_distance(y))
    }

    /// Ambient gradient of the width formula at `y`.
    pub fn width_gradient(&self, y: &Point) -> Point {
        let (vals, grads) = self.terms(y, true);
        let s = strata::softmin(&vals, self.softmin_order);
        if !s.is_finite() || s <= 0.0 {
            return Point::zeros(y.len());
        }
        let ds = strata::softmin_gradient(&vals, &grads, self.softmin_order, y.len());
        let sech = 1.0 / (s * s / self.cap).cosh();
        ds * (self.scale * sech * sech * 2.0 * s)
    }

    /// Tube coordinates of `x`, or `None` if `x ∉ U_δ` or `P_M(x)` is not
    /// single-valued.
    pub fn membership(&self, x: &Point) -> Option<TubePoint> {
        let y = self.stratum.project(x).ok()?;
        let gap = (x - &y).norm();
        let width = self.width_unchecked(&y);
        if gap < width {
            Some(TubePoint { x: x.clone(), ratio: gap / width, y, gap, width })
        } else {
            None
        }
    }

    /// `φ(x)`: `ψ(t)` inside the tube, 0 outside.
    pub fn phi(&self, x: &Point) -> f64 {
        match self.membership(x) {
            Some(tp) => Bump::standard().psi(tp.ratio).unwrap_or(0.0),
            None => 0.0,
        }
    }

    /// `∇(δ ∘ P_M)(x) = DP_M(x)ᵀ ∇δ(P_M x)`.
    pub fn grad_width_along_projection(&self, x: &Point, y: &Point) -> Result<Point> {
        let dp = self.stratum.projection_jacobian(x)?;
        Ok(dp.transpose() * self.width_gradient(y))
    }

    /// `∇φ(x) = ψ′(t) [ (x − y)/(|x − y| δ(y)) − t ∇(δ∘P_M)(x)/δ(y) ]` inside
    /// the annulus `supp ψ′`, zero elsewhere.
    pub fn grad_phi(&self, x: &Point) -> Result<Point> {
        let terms = self.stratum.frontier_terms(x);
        let scale = 1e-12 * (1.0 + x.norm());
        if terms.iter().any(|&v| v <= scale) {
            return Err(Error::Domain(format!("φ is not differentiable on the frontier of {}", self.stratum.id())));
        }
        let n = x.len();
        let Some(tp) = self.membership(x) else {
            return Ok(Point::zeros(n));
        };
        let bump = Bump::standard();
        let dpsi = bump.psi_prime(tp.ratio)?;
        if dpsi == 0.0 {
            return Ok(Point::zeros(n));
        }
        let radial = (x - &tp.y) / (tp.gap * tp.width);
        let dw = self.grad_width_along_projection(x, &tp.y)?;
        Ok((radial - dw * (tp.ratio / tp.width)) * dpsi)
    }

    /// Random points of `U_δ` at normal distance ratio in `(0, 1)`.
    pub fn sample_tube(&self, rng: &mut Rng, count: usize) -> Vec<TubePoint> {
        let mut out = Vec::with_capacity(count);
        let mut tries = 0;
        while out.len() < count && tries < 20 * count.max(1) {
            tries += 1;
            let Some(y) = self.stratum.sample(rng, 1).pop() else { break };
            let w = self.width_unchecked(&y);
            if !(w > 0.0) {
                continue;
            }
            let Ok(np) = self.stratum.normal_projector(&y) else { continue };
            let v = np.apply(&linalg::gaussian_vector(rng, y.len()));
            let nv = v.norm();
            if nv < 1e-12 {
                continue;
            }
            let t: f64 = rand::Rng::random_range(rng, 0.0..1.0);
            let x = &y + v * (t * w / nv);
            out.push(TubePoint { gap: (&x - &y).norm(), x, y, width: w, ratio: t });
        }
        out
    }
}

/// What a tube is validated against.
pub struct TubeTarget<'a> {
    pub field: &'a dyn ScalarField,
    pub epsilon: &'a dyn ScalarField,
    /// Fraction of `ε` granted to this stage.
    pub share: f64,
}

fn relative_gap(a: &Point, b: &Point) -> f64 {
    (a - b).norm() / (1.0 + b.norm())
}

/// One validation sweep at the tube's current scale.
fn validate_once(spec: &TubeSpec, target: &TubeTarget, samples: usize, rng: &mut Rng) -> Result<Vec<CertificationReport>> {
    let m = &spec.stratum;
    let id = m.id().to_string();
    let mut c1 = CertificationReport::new("delta_nonexpansive", id.clone(), 1.0);
    let mut c2 = CertificationReport::new("projection_fibres", id.clone(), 1e-8);
    let mut c3 = CertificationReport::new("closeness", id.clone(), 1.0);
    let mut c4 = CertificationReport::new("gap_below_frontier_distance_sq", id.clone(), 1.0);
    let mut c5 = CertificationReport::new("projection_differential_variation", id.clone(), 1.0);
    let mut c6 = CertificationReport::new("projection_differential_bound", id.clone(), 1.0);
    let pts = spec.sample_tube(rng, samples);
    if pts.is_empty() {
        return Err(Error::Evaluation(format!("no tube samples could be drawn around {id}")));
    }
    let has_frontier = !m.frontier_terms(&pts[0].y).is_empty();
    for tp in &pts {
        let (x, y) = (&tp.x, &tp.y);
        for r in [&mut c1, &mut c2, &mut c3, &mut c4, &mut c5, &mut c6] {
            r.sample_count += 1;
        }
        // (1) tangential gradient of δ
        let tproj = m.tangent_projector(y)?;
        let gt = tproj.apply(&spec.width_gradient(y)).norm();
        c1.record(SAFETY * gt, Some(y));

        // (2) P_M(y + v) = y on the tube
        match m.project(x) {
            Ok(p) => c2.record(relative_gap(&p, y), Some(x)),
            Err(_) => c2.record(f64::INFINITY, Some(x)),
        }

        // (3) |f(x) − f(P_M x)| < share · ε(x)
        let eps = target.share * target.epsilon.eval(x)?;
        let df = (target.field.eval(x)? - target.field.eval(y)?).abs();
        c3.record(SAFETY * df / eps, Some(x));

        // (4) |x − P_M x| < d(x, Γ)²
        let dx = m.frontier_distance(x);
        if has_frontier {
            c4.record(SAFETY * tp.gap / (dx * dx), Some(x));
        }

        let dpx = m.projection_jacobian(x)?;
        // (5) ‖DP(x) − DP(y)‖ < d(y, Γ)
        if has_frontier {
            let dpy = m.projection_jacobian(y)?;
            let dy = m.frontier_distance(y);
            c5.record(SAFETY * linalg::spectral_norm(&(&dpx - &dpy)) / dy, Some(x));
        }
        // (6) ‖DP(x)‖ < 2, checked as ‖DP(x)‖ − 1 < 1/SAFETY
        c6.record(SAFETY * (linalg::spectral_norm(&dpx) - 1.0).max(0.0), Some(x));
    }
    // δ along pairs of nearby stratum points
    let ys: Vec<Point> = pts.iter().map(|p| p.y.clone()).collect();
    for pair in ys.windows(2) {
        let d = (&pair[0] - &pair[1]).norm();
        if d > 0.0 {
            let ratio = (spec.width_unchecked(&pair[0]) - spec.width_unchecked(&pair[1])).abs() / d;
            c1.record(SAFETY * ratio, Some(&pair[0]));
        }
    }
    let mut out = vec![c1.finish(), c2.finish(), c3];
    out[2].pass = out[2].max_violation < out[2].tolerance;
    for mut r in [c4, c5] {
        if has_frontier {
            r.pass = r.max_violation < r.tolerance;
            out.push(r);
        } else {
            out.push(r.vacuous());
        }
    }
    let mut c6 = c6;
    c6.pass = c6.max_violation < c6.tolerance;
    out.push(c6);
    Ok(out)
}

/// Validates the tube against `target`, halving the scale on any violation
/// up to [`MAX_HALVINGS`] times.
pub fn validate_tube(spec: &mut TubeSpec, target: &TubeTarget, samples: usize, rng: &mut Rng) -> Result<TubeCertificate> {
    let initial = spec.scale;
    let n_normal = spec.stratum.ambient_dim() - spec.stratum.dim();
    if n_normal == 0 {
        spec.accept_trivial(target.share);
        return Ok(spec.certificate.clone().expect("certificate set"));
    }
    let mut last_failure = String::new();
    for halvings in 0..=MAX_HALVINGS {
        let reports = validate_once(spec, target, samples, rng)?;
        if let Some(bad) = reports.iter().find(|r| !r.pass) {
            last_failure = bad.condition.clone();
            spec.scale *= 0.5;
            continue;
        }
        let cert = TubeCertificate {
            stratum: spec.stratum.id().to_string(),
            scale: spec.scale,
            initial_scale: initial,
            softmin_order: spec.softmin_order,
            cap: spec.cap,
            halvings,
            samples,
            budget_share: target.share,
            achievable_smoothness: spec.stratum.smoothness(),
            conditions: reports,
            pass: true,
        };
        spec.certificate = Some(cert.clone());
        return Ok(cert);
    }
    spec.scale = initial;
    Err(Error::TubeConstruction {
        stratum: spec.stratum.id().to_string(),
        condition: last_failure,
        halvings: MAX_HALVINGS,
    })
}

/// `|x − P_M x| · |∇φ(x)|` at a tube point (bounded by 8).
pub fn scaled_phi_gradient(spec: &TubeSpec, x: &Point) -> Result<f64> {
    let g = spec.grad_phi(x)?;
    let y = spec.stratum.project(x)?;
    Ok((x - y).norm() * g.norm())
}

/// The Jacobian of `P_M` at `x`, exposed for checks.
pub fn projection_jacobian(spec: &TubeSpec, x: &Point) -> Result<Matrix> {
    spec.stratum.projection_jacobian(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::fields::{Affine, Constant};
    use rand::SeedableRng;

    fn p(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    #[test]
    fn width_examples() {
        let a = catalog::x_axis().unwrap();
        let t = TubeSpec::new(&a, 0, Confinement::default());
        assert!((t.width(&p(&[3.0, 0.0])).unwrap() - DEFAULT_SCALE * DEFAULT_CAP).abs() < 1e-15);
        assert!(t.width(&p(&[3.0, 1.0])).is_err());

        let a = catalog::punctured_x_axis().unwrap();
        let t = TubeSpec::new(&a, 1, Confinement::default());
        let w = t.width(&p(&[2.0, 0.0])).unwrap();
        assert!(w <= 0.125 && w > 0.12);
        for k in 4..12 {
            let d = 0.5_f64.powi(k);
            let ratio = t.width(&p(&[d, 0.0])).unwrap() / (d * d);
            assert!((ratio / DEFAULT_SCALE - 1.0).abs() < 0.1, "k={k} ratio={ratio}");
        }
    }

    #[test]
    fn membership_and_phi() {
        let a = catalog::x_axis().unwrap();
        let t = TubeSpec::new(&a, 0, Confinement::default());
        let tp = t.membership(&p(&[1.0, 0.0])).unwrap();
        assert_eq!(tp.ratio, 0.0);
        assert!(t.membership(&p(&[1.0, 0.125])).is_none());
        assert_eq!(t.phi(&p(&[1.0, 0.0])), 1.0);
        assert_eq!(t.phi(&p(&[1.0, 5.0])), 0.0);
        assert!((t.phi(&p(&[1.0, 0.0625])) - 0.5).abs() < 1e-12);

        let r = catalog::rank_stratification(2, 2).unwrap();
        let t = TubeSpec::new(&r, 1, Confinement::default());
        assert!(t.membership(&linalg::flatten(&linalg::diag(2, 2, &[2.0, 2.0]))).is_none());
    }

    #[test]
    fn constant_width_gives_radial_gradient() {
        let a = catalog::x_axis().unwrap();
        let t = TubeSpec::new(&a, 0, Confinement::default());
        let x = p(&[0.3, 0.06]);
        let g = t.grad_phi(&x).unwrap();
        assert!(g[0].abs() < 1e-14 && g[1] < 0.0);
        let fd = linalg::fd_gradient(|z| t.phi(z), &x, 1e-7, true).unwrap();
        assert!((g - fd).amax() < 1e-6);
    }

    #[test]
    fn validation_halves_a_huge_scale() {
        let a = catalog::punctured_x_axis().unwrap();
        let mut t = TubeSpec::new(&a, 1, Confinement::default()).with_scale(64.0);
        let f = Affine::coordinate(2, 1).unwrap();
        let eps = Constant { dim: 2, value: 1.0 };
        let mut rng = Rng::seed_from_u64(1);
        let cert = validate_tube(&mut t, &TubeTarget { field: &f, epsilon: &eps, share: 1.0 }, 300, &mut rng).unwrap();
        assert!(cert.halvings > 0 && cert.pass);
        assert!(t.is_validated());
    }

    #[test]
    fn empty_frontier_conditions_are_vacuous() {
        let a = catalog::x_axis().unwrap();
        let mut t = TubeSpec::new(&a, 0, Confinement::default());
        let f = Affine::coordinate(2, 0).unwrap();
        let eps = Constant { dim: 2, value: 1.0 };
        let mut rng = Rng::seed_from_u64(2);
        let cert = validate_tube(&mut t, &TubeTarget { field: &f, epsilon: &eps, share: 0.5 }, 100, &mut rng).unwrap();
        let vac: Vec<_> = cert.conditions.iter().filter(|c| c.vacuous).map(|c| c.condition.as_str()).collect();
        assert_eq!(vac, ["gap_below_frontier_distance_sq", "projection_differential_variation"]);
    }
}
