use std::sync::Arc;

use rand::SeedableRng;

use stratsmooth::catalog::AffineStratum;
use stratsmooth::linalg::{self, OrthoProjector, Point};
use stratsmooth::strata::{self, WhitneyOptions};
use stratsmooth::{Result, Rng, Stratification, Stratum};

fn e(i: usize) -> Point {
    let mut v = Point::zeros(3);
    v[i] = 1.0;
    v
}

/// The half-plane `{y > 0, z = 0}` in `ℝ³`, reporting a normal tilted by
/// `tilt` radians from `e_z` towards `e_x`.
#[derive(Debug)]
struct TiltedHalfPlane {
    inner: AffineStratum,
    tilt: f64,
}

impl Stratum for TiltedHalfPlane {
    fn id(&self) -> &str {
        self.inner.id()
    }
    fn dim(&self) -> usize {
        2
    }
    fn ambient_dim(&self) -> usize {
        3
    }
    fn project(&self, x: &Point) -> Result<Point> {
        self.inner.project(x)
    }
    fn tangent_projector(&self, _y: &Point) -> Result<OrthoProjector> {
        let (s, c) = self.tilt.sin_cos();
        let n = Point::from_vec(vec![s, 0.0, c]);
        Ok(linalg::projector_from_basis(&[n], 3).complement())
    }
    fn frontier_terms(&self, y: &Point) -> Vec<f64> {
        self.inner.frontier_terms(y)
    }
    fn distance_lower_bound(&self, x: &Point) -> f64 {
        self.inner.distance_lower_bound(x)
    }
    fn sample(&self, rng: &mut Rng, count: usize) -> Vec<Point> {
        self.inner.sample(rng, count)
    }
}

fn half_plane_pair(tilt: f64) -> Stratification {
    let axis = AffineStratum::new("axis", Point::zeros(3), &[e(0)]).with_sample_radius(1.0);
    let plane = AffineStratum::new("upper", Point::zeros(3), &[e(0), e(1)])
        .with_constraint(-e(1), 0.0)
        .unwrap()
        .with_sample_radius(1.0);
    let upper = TiltedHalfPlane { inner: plane, tilt };
    Stratification::new("tilted", vec![Arc::new(axis), Arc::new(upper)], &[("axis", "upper")], true, true).unwrap()
}

#[test]
fn whitney_certifier_reports_the_tilt_defect() {
    let a = half_plane_pair(30f64.to_radians());
    let mut rng = Rng::seed_from_u64(11);
    let r = strata::check_whitney_a(&a, 0, 1, 20, WhitneyOptions::default(), &mut rng).unwrap();
    assert!(!r.pass);
    assert!((r.max_violation - 0.5).abs() < 1e-12, "defect {}", r.max_violation);
    assert!(r.trend.iter().all(|&d| (d - 0.5).abs() < 1e-12));
}

#[test]
fn whitney_certifier_accepts_the_honest_half_plane() {
    let a = half_plane_pair(0.0);
    let mut rng = Rng::seed_from_u64(12);
    let r = strata::check_whitney_a(&a, 0, 1, 20, WhitneyOptions::default(), &mut rng).unwrap();
    assert!(r.pass);
    assert!(r.max_violation < 1e-12);
}

#[test]
fn flatness_certifier_accepts_the_half_plane() {
    let a = half_plane_pair(0.0);
    let mut rng = Rng::seed_from_u64(13);
    let r = strata::check_normal_flatness(&a, 0, 1, 0.1, 20, Default::default(), &mut rng).unwrap();
    assert!(r.pass, "{r:?}");
}
