//! Scalar fields `f: ℝⁿ → ℝ` with gradients and Lipschitz bounds.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, unflatten, Matrix, Point};
use crate::Smoothness;

/// Where a field may be non-zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Support {
    Everywhere,
    Ball { center: Vec<f64>, radius: f64 },
    Box { half_width: f64 },
}

impl Support {
    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Support::Everywhere => true,
            Support::Ball { center, radius } => (x - Point::from_vec(center.clone())).norm() < *radius,
            Support::Box { half_width } => x.iter().all(|v| v.abs() < *half_width),
        }
    }
}

/// An evaluatable field with a gradient contract.
pub trait ScalarField: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn eval(&self, x: &Point) -> Result<f64>;

    /// Gradient; the default is a Richardson-extrapolated central difference.
    fn grad(&self, x: &Point) -> Result<Point> {
        linalg::fd_gradient(|z| self.eval(z).unwrap_or(f64::NAN), x, linalg::default_fd_step(x), true)
    }

    /// Whether [`ScalarField::grad`] is analytic rather than finite differences.
    fn analytic_grad(&self) -> bool {
        false
    }

    /// Upper bound on the Lipschitz constant over the ball `|x| ≤ radius`
    /// (`+∞` if unknown).
    fn lip(&self, radius: f64) -> f64;

    fn smoothness(&self) -> Smoothness;

    fn support(&self) -> Support {
        Support::Everywhere
    }
}

fn check_dim(name: &str, dim: usize, x: &Point) -> Result<()> {
    if x.len() != dim {
        return Err(Error::Contract(format!("{name}: expected a point of R^{dim}, got length {}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract(format!("{name}: non-finite argument")));
    }
    Ok(())
}

/// `x ↦ c`.
#[derive(Debug, Clone)]
pub struct Constant {
    pub dim: usize,
    pub value: f64,
}

impl ScalarField for Constant {
    fn name(&self) -> String {
        format!("constant({})", self.value)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &Point) -> Result<f64> {
        check_dim("constant", self.dim, x)?;
        Ok(self.value)
    }
    fn grad(&self, x: &Point) -> Result<Point> {
        check_dim("constant", self.dim, x)?;
        Ok(Point::zeros(self.dim))
    }
    fn analytic_grad(&self) -> bool {
        true
    }
    fn lip(&self, _radius: f64) -> f64 {
        0.0
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::CInf
    }
}

/// `x ↦ a·x + b`.
#[derive(Debug, Clone)]
pub struct Affine {
    pub coeffs: Point,
    pub offset: f64,
}

impl Affine {
    /// The coordinate function `x ↦ x_i`.
    pub fn coordinate(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Config(format!("coordinate index {index} out of range for R^{dim}")));
        }
        let mut coeffs = Point::zeros(dim);
        coeffs[index] = 1.0;
        Ok(Affine { coeffs, offset: 0.0 })
    }
}

impl ScalarField for Affine {
    fn name(&self) -> String {
        "affine".into()
    }
    fn dim(&self) -> usize {
        self.coeffs.len()
    }
    fn eval(&self, x: &Point) -> Result<f64> {
        check_dim("affine", self.dim(), x)?;
        Ok(self.coeffs.dot(x) + self.offset)
    }
    fn grad(&self, x: &Point) -> Result<Point> {
        check_dim("affine", self.dim(), x)?;
        Ok(self.coeffs.clone())
    }
    fn analytic_grad(&self) -> bool {
        true
    }
    fn lip(&self, _radius: f64) -> f64 {
        self.coeffs.norm()
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::CInf
    }
}

/// `x ↦ |x|²` (the squared Frobenius norm on flattened matrices).
#[derive(Debug, Clone)]
pub struct FrobSq {
    pub dim: usize,
}

impl ScalarField for FrobSq {
    fn name(&self) -> String {
        "frobsq".into()
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &Point) -> Result<f64> {
        check_dim("frobsq", self.dim, x)?;
        Ok(x.norm_squared())
    }
    fn grad(&self, x: &Point) -> Result<Point> {
        check_dim("frobsq", self.dim, x)?;
        Ok(x * 2.0)
    }
    fn analytic_grad(&self) -> bool {
        true
    }
    fn lip(&self, radius: f64) -> f64 {
        2.0 * radius
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::CInf
    }
}

/// `X ↦ det X` on flattened `n×n` matrices.
#[derive(Debug, Clone)]
pub struct Det {
    pub n: usize,
}

/// Cofactor matrix, `∇ det(X)`.
pub fn cofactor(x: &Matrix) -> Matrix {
    let n = x.nrows();
    if n == 1 {
        return Matrix::from_element(1, 1, 1.0);
    }
    Matrix::from_fn(n, n, |i, j| {
        let minor = x.clone().remove_row(i).remove_column(j);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

impl ScalarField for Det {
    fn name(&self) -> String {
        "det".into()
    }
    fn dim(&self) -> usize {
        self.n * self.n
    }
    fn eval(&self, x: &Point) -> Result<f64> {
        check_dim("det", self.dim(), x)?;
        Ok(unflatten(x, self.n, self.n).determinant())
    }
    fn grad(&self, x: &Point) -> Result<Point> {
        check_dim("det", self.dim(), x)?;
        Ok(linalg::flatten(&cofactor(&unflatten(x, self.n, self.n))))
    }
    fn analytic_grad(&self) -> bool {
        true
    }
    /// Cofactors are `(n−1)`-minors, each bounded by Hadamard's inequality
    /// `|minor| ≤ ∏ row norms ≤ radius^{n−1}`.
    fn lip(&self, radius: f64) -> f64 {
        let n = self.n as f64;
        n * radius.powi(self.n as i32 - 1)
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::CInf
    }
}

/// `x ↦ |x − c|`; Lipschitz but not differentiable at `c`.
#[derive(Debug, Clone)]
pub struct DistanceToPoint {
    pub center: Point,
}

impl ScalarField for DistanceToPoint {
    fn name(&self) -> String {
        "distance".into()
    }
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn eval(&self, x: &Point) -> Result<f64> {
        check_dim("distance", self.dim(), x)?;
        Ok((x - &self.center).norm())
    }
    fn grad(&self, x: &Point) -> Result<Point> {
        check_dim("distance", self.dim(), x)?;
        let d = x - &self.center;
        let n = d.norm();
        if n == 0.0 {
            return Err(Error::Evaluation("distance field is not differentiable at its center".into()));
        }
        Ok(d / n)
    }
    fn analytic_grad(&self) -> bool {
        true
    }
    fn lip(&self, _radius: f64) -> f64 {
        1.0
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::C0
    }
}

/// `x ↦ |x_i|`.
#[derive(Debug, Clone)]
pub struct AbsCoordinate {
    pub dim: usize,
    pub index: usize,
}

impl ScalarField for AbsCoordinate {
    fn name(&self) -> String {
        format!("abs(x{})", self.index)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &Point) -> Result<f64> {
        check_dim("abs", self.dim, x)?;
        Ok(x[self.index].abs())
    }
    fn grad(&self, x: &Point) -> Result<Point> {
        check_dim("abs", self.dim, x)?;
        if x[self.index] == 0.0 {
            return Err(Error::Evaluation("|x_i| is not differentiable at x_i = 0".into()));
        }
        let mut g = Point::zeros(self.dim);
        g[self.index] = x[self.index].signum();
        Ok(g)
    }
    fn analytic_grad(&self) -> bool {
        true
    }
    fn lip(&self, _radius: f64) -> f64 {
        1.0
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::C0
    }
}

/// `h · exp(1 − 1/(1 − |x − c|²/R²))` inside the ball, zero outside.
#[derive(Debug, Clone)]
pub struct CompactBump {
    pub center: Point,
    pub radius: f64,
    pub height: f64,
}

impl CompactBump {
    /// Profile `g(u) = exp(1 − 1/(1 − u))` and `g′(u)`, `u = r²/R²`.
    fn profile(u: f64) -> (f64, f64) {
        if u >= 1.0 {
            return (0.0, 0.0);
        }
        let w = 1.0 - u;
        let g = (1.0 - 1.0 / w).exp();
        (g, -g / (w * w))
    }
}

impl ScalarField for CompactBump {
    fn name(&self) -> String {
        "bump".into()
    }
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn eval(&self, x: &Point) -> Result<f64> {
        check_dim("bump", self.dim(), x)?;
        let u = (x - &self.center).norm_squared() / (self.radius * self.radius);
        Ok(self.height * Self::profile(u).0)
    }
    fn grad(&self, x: &Point) -> Result<Point> {
        check_dim("bump", self.dim(), x)?;
        let d = x - &self.center;
        let r2 = self.radius * self.radius;
        let (_, dg) = Self::profile(d.norm_squared() / r2);
        Ok(d * (self.height * dg * 2.0 / r2))
    }
    fn analytic_grad(&self) -> bool {
        true
    }
    /// `sup_r |d/dr g(r²/R²)| = sup 2r/R² |g′|`, found by a dense scan of the
    /// one-dimensional profile.
    fn lip(&self, _radius: f64) -> f64 {
        let mut best: f64 = 0.0;
        for i in 1..4000 {
            let r = i as f64 / 4000.0;
            let (_, dg) = Self::profile(r * r);
            best = best.max(2.0 * r * dg.abs());
        }
        // scan resolution slack
        1.01 * best * self.height.abs() / self.radius
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::CInf
    }
    fn support(&self) -> Support {
        Support::Ball { center: self.center.as_slice().to_vec(), radius: self.radius }
    }
}

/// Largest `|f(x) − f(y)| / |x − y|` over random pairs drawn from the box
/// `|xᵢ| ≤ radius`, with partners within distance `spread`.
pub fn sampled_lipschitz(f: &dyn ScalarField, rng: &mut crate::Rng, pairs: usize, radius: f64, spread: f64) -> Result<f64> {
    let n = f.dim();
    let mut best: f64 = 0.0;
    for _ in 0..pairs {
        let x = linalg::uniform_box(rng, n, radius);
        let y = &x + linalg::random_unit(rng, n) * (spread * rand::Rng::random_range(rng, 1e-3..1.0));
        let d = (&x - &y).norm();
        if d == 0.0 {
            continue;
        }
        best = best.max((f.eval(&x)? - f.eval(&y)?).abs() / d);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn check_grad(f: &dyn ScalarField, x: &Point) {
        let g = f.grad(x).unwrap();
        let fd = linalg::fd_gradient(|z| f.eval(z).unwrap(), x, 1e-5, true).unwrap();
        assert!((g - &fd).amax() < 1e-5 * (1.0 + fd.amax()), "{}", f.name());
    }

    #[test]
    fn analytic_gradients_match_fd() {
        let mut rng = crate::Rng::seed_from_u64(9);
        let fields: Vec<Box<dyn ScalarField>> = vec![
            Box::new(Affine::coordinate(4, 1).unwrap()),
            Box::new(FrobSq { dim: 4 }),
            Box::new(Det { n: 2 }),
            Box::new(Det { n: 3 }),
            Box::new(DistanceToPoint { center: Point::zeros(4) }),
            Box::new(CompactBump { center: Point::zeros(4), radius: 1.5, height: 0.7 }),
        ];
        for f in &fields {
            for _ in 0..20 {
                let x = linalg::uniform_box(&mut rng, f.dim(), 1.0);
                check_grad(f.as_ref(), &x);
            }
        }
    }

    #[test]
    fn det_gradient_is_det_times_inverse_transpose() {
        let x = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let g = cofactor(&x);
        let expect = x.determinant() * x.try_inverse().unwrap().transpose();
        assert!((g - expect).amax() < 1e-15);
    }

    #[test]
    fn lipschitz_bounds_hold_on_samples() {
        let mut rng = crate::Rng::seed_from_u64(10);
        let r = 1.0;
        let fields: Vec<Box<dyn ScalarField>> = vec![
            Box::new(FrobSq { dim: 4 }),
            Box::new(Det { n: 2 }),
            Box::new(Det { n: 3 }),
            Box::new(CompactBump { center: Point::zeros(2), radius: 0.5, height: 1.0 }),
        ];
        for f in &fields {
            // the box |xᵢ| ≤ r/√n lies in the ball of radius r
            let box_r = r / (f.dim() as f64).sqrt();
            let l = sampled_lipschitz(f.as_ref(), &mut rng, 4000, box_r, 0.01).unwrap();
            assert!(l <= f.lip(r + 0.01), "{}: sampled {l} vs bound {}", f.name(), f.lip(r));
        }
    }

    #[test]
    fn kinks_are_reported() {
        let f = AbsCoordinate { dim: 2, index: 0 };
        assert!(f.grad(&Point::from_vec(vec![0.0, 1.0])).is_err());
        let d = DistanceToPoint { center: Point::zeros(2) };
        assert!(d.grad(&Point::zeros(2)).is_err());
    }
}
