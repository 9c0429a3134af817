//! Dense small-scale linear algebra and finite-difference utilities.
//!
//! Matrix spaces are handled through a row-major flattening to `R^{nm}`:
//! every field, gradient and projection works on [`Point`]s, while the
//! spectral machinery (`σ`, `λ`, `Diag`) works on the structured [`Matrix`]
//! view. [`flatten`] and [`unflatten`] convert between the two.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::Rng;

/// A point of the ambient Euclidean space.
pub type Point = DVector<f64>;

/// A dense real matrix.
pub type Matrix = DMatrix<f64>;

const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 80;
/// Columns below this fraction of the largest singular value get their
/// left singular vector from basis completion.
const RANK_FLOOR: f64 = 1e-13;
const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

/// Row-major flattening `M^{n×m} → R^{nm}`.
pub fn flatten(x: &Matrix) -> Point {
    let (n, m) = x.shape();
    Point::from_iterator(n * m, (0..n).flat_map(|i| (0..m).map(move |j| x[(i, j)])))
}

/// Inverse of [`flatten`].
pub fn unflatten(p: &Point, n: usize, m: usize) -> Matrix {
    assert_eq!(p.len(), n * m, "flattened length mismatch");
    Matrix::from_fn(n, m, |i, j| p[i * m + j])
}

/// `Diag z ∈ M^{n×m}`: zero except for the principal diagonal.
pub fn diag(n: usize, m: usize, z: &[f64]) -> Matrix {
    let mut out = Matrix::zeros(n, m);
    for (i, &v) in z.iter().enumerate().take(n.min(m)) {
        out[(i, i)] = v;
    }
    out
}

/// Full singular value decomposition `X = U Diag(σ) Vᵀ`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// Orthogonal `n×n`.
    pub u: Matrix,
    /// Nonincreasing, nonnegative, length `min(n, m)`.
    pub singular_values: DVector<f64>,
    /// Orthogonal `m×m`.
    pub v: Matrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> Matrix {
        let (n, m) = (self.u.nrows(), self.v.nrows());
        &self.u * diag(n, m, self.singular_values.as_slice()) * self.v.transpose()
    }

    /// `U Diag(z) Vᵀ` in this decomposition's frame.
    pub fn compose(&self, z: &[f64]) -> Matrix {
        let (n, m) = (self.u.nrows(), self.v.nrows());
        &self.u * diag(n, m, z) * self.v.transpose()
    }
}

/// Flips the sign of a vector so its largest-magnitude entry is positive.
/// Returns whether a flip happened.
fn sign_of_largest(col: &[f64]) -> bool {
    let mut best = 0.0_f64;
    let mut best_val = 0.0_f64;
    for &c in col {
        // strict comparison with a small slack keeps ties on the first index
        if c.abs() > best + 1e-13 {
            best = c.abs();
            best_val = c;
        }
    }
    best_val < 0.0
}

/// Extends the orthonormal columns of `q` to an orthonormal basis of `R^dim`
/// by Gram–Schmidt against the standard basis, in index order.
fn complete_basis(q: &Matrix, dim: usize) -> Matrix {
    let mut cols: Vec<DVector<f64>> = q.column_iter().map(|c| c.into_owned()).collect();
    let mut e = 0;
    while cols.len() < dim && e < dim {
        let mut v = DVector::zeros(dim);
        v[e] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&v);
                v -= c * d;
            }
        }
        let nv = v.norm();
        if nv > 1e-8 {
            cols.push(v / nv);
        }
        e += 1;
    }
    Matrix::from_columns(&cols)
}

/// One-sided Jacobi orthogonalization of the columns of `a` (`p ≥ q`).
/// Returns the rotated columns and the accumulated right rotation.
fn jacobi_columns(mut a: Matrix) -> Result<(Matrix, Matrix)> {
    let q = a.ncols();
    let mut v = Matrix::identity(q, q);
    let tol = JACOBI_TOL * a.nrows() as f64;
    // columns this small carry only rounding noise and are left alone
    let negligible = 1e-30 * a.norm_squared();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..q {
            for j in i + 1..q {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if gamma == 0.0 || alpha.min(beta) <= negligible || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for r in 0..mat.nrows() {
                        let (xi, xj) = (mat[(r, i)], mat[(r, j)]);
                        mat[(r, i)] = c * xi - s * xj;
                        mat[(r, j)] = s * xi + c * xj;
                    }
                }
            }
        }
        if !rotated {
            return Ok((a, v));
        }
    }
    Err(Error::Decomposition(format!("Jacobi SVD did not converge in {JACOBI_MAX_SWEEPS} sweeps")))
}

/// Deterministic full SVD (one-sided Jacobi).
///
/// Singular values are sorted in decreasing order; each left singular vector
/// is oriented so that its largest-magnitude entry is positive (the paired
/// right singular vector is flipped with it).
pub fn svd(x: &Matrix) -> Result<SvdFactors> {
    let (n, m) = x.shape();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("svd input has non-finite entries".into()));
    }
    if n < m {
        let t = svd_tall(&x.transpose())?;
        return Ok(orient(t.v, t.singular_values, t.u));
    }
    let t = svd_tall(x)?;
    Ok(orient(t.u, t.singular_values, t.v))
}

/// SVD of a matrix with at least as many rows as columns, unoriented.
fn svd_tall(x: &Matrix) -> Result<SvdFactors> {
    let (n, m) = x.shape();
    if m == 0 {
        return Ok(SvdFactors { u: Matrix::identity(n, n), singular_values: DVector::zeros(0), v: Matrix::identity(0, 0) });
    }
    let (a, v) = jacobi_columns(x.clone())?;
    let norms: Vec<f64> = (0..m).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let top = norms[order[0]];
    let mut sigma = DVector::zeros(m);
    let mut v_sorted = Matrix::zeros(m, m);
    let mut kept = Vec::new();
    let mut slots = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = norms[src];
        v_sorted.set_column(dst, &v.column(src));
        if norms[src] > RANK_FLOOR * top && norms[src] > 0.0 {
            kept.push((dst, a.column(src) / norms[src]));
        } else {
            slots.push(dst);
        }
    }
    let kept_cols: Vec<DVector<f64>> = kept.iter().map(|(_, c)| c.clone()).collect();
    let full = if kept_cols.is_empty() { Matrix::identity(n, n) } else { complete_basis(&Matrix::from_columns(&kept_cols), n) };
    let mut u = Matrix::zeros(n, n);
    for (i, (dst, _)) in kept.iter().enumerate() {
        u.set_column(*dst, &full.column(i));
    }
    let mut extra = kept.len();
    for dst in slots.into_iter().chain(m..n) {
        u.set_column(dst, &full.column(extra));
        extra += 1;
    }
    Ok(SvdFactors { u, singular_values: sigma, v: v_sorted })
}

/// Applies the sign convention to a sorted decomposition.
fn orient(mut u: Matrix, sigma: DVector<f64>, mut v: Matrix) -> SvdFactors {
    let k = sigma.len();
    for j in 0..u.ncols() {
        if sign_of_largest(u.column(j).as_slice()) {
            u.column_mut(j).neg_mut();
            if j < k {
                v.column_mut(j).neg_mut();
            }
        }
    }
    for j in k..v.ncols() {
        if sign_of_largest(v.column(j).as_slice()) {
            v.column_mut(j).neg_mut();
        }
    }
    SvdFactors { u, singular_values: sigma, v }
}

/// The singular-value map `σ`.
pub fn singular_values(x: &Matrix) -> Result<DVector<f64>> {
    Ok(svd(x)?.singular_values)
}

/// Spectral (operator 2-) norm.
pub fn spectral_norm(x: &Matrix) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    singular_values(x).map(|s| s[0]).unwrap_or(f64::NAN)
}

/// Eigendecomposition `X = U Diag(λ) Uᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigFactors {
    pub u: Matrix,
    /// Nonincreasing.
    pub eigenvalues: DVector<f64>,
}

impl EigFactors {
    pub fn reconstruct(&self) -> Matrix {
        let n = self.u.nrows();
        &self.u * diag(n, n, self.eigenvalues.as_slice()) * self.u.transpose()
    }

    pub fn compose(&self, z: &[f64]) -> Matrix {
        let n = self.u.nrows();
        &self.u * diag(n, n, z) * self.u.transpose()
    }
}

/// Symmetric eigendecomposition with descending eigenvalues and the same
/// sign convention as [`svd`].
pub fn sym_eig(x: &Matrix) -> Result<EigFactors> {
    let (n, m) = x.shape();
    if n != m {
        return Err(Error::Contract(format!("sym_eig needs a square matrix, got {n}x{m}")));
    }
    let asym = (x - x.transpose()).norm();
    if asym > 1e-12 * x.norm() {
        return Err(Error::Contract(format!("sym_eig input is not symmetric (‖X−Xᵀ‖ = {asym:e})")));
    }
    let sym = (x + x.transpose()) * 0.5;
    let dec = SymmetricEigen::try_new(sym, EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| Error::Decomposition("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        dec.eigenvalues[b]
            .partial_cmp(&dec.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut cols = Vec::with_capacity(n);
    let mut lambda = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut c = dec.eigenvectors.column(src).into_owned();
        if sign_of_largest(c.as_slice()) {
            c = -c;
        }
        cols.push(c);
        lambda[dst] = dec.eigenvalues[src];
    }
    Ok(EigFactors { u: Matrix::from_columns(&cols), eigenvalues: lambda })
}

/// An orthogonal projector onto a linear subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoProjector {
    matrix: Matrix,
}

impl OrthoProjector {
    /// Wraps a matrix the caller knows is an orthogonal projector.
    /// The matrix is symmetrized.
    pub fn from_matrix(matrix: Matrix) -> Self {
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        OrthoProjector { matrix }
    }

    pub fn zero(dim: usize) -> Self {
        OrthoProjector { matrix: Matrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        OrthoProjector { matrix: Matrix::identity(dim, dim) }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &Point) -> Point {
        &self.matrix * v
    }

    /// `I − P`.
    pub fn complement(&self) -> Self {
        let n = self.dim();
        OrthoProjector { matrix: Matrix::identity(n, n) - &self.matrix }
    }

    /// Rank, read off the trace.
    pub fn rank(&self) -> usize {
        self.matrix.trace().round().max(0.0) as usize
    }

    /// `‖P² − P‖` (Frobenius).
    pub fn idempotency_defect(&self) -> f64 {
        (&self.matrix * &self.matrix - &self.matrix).norm()
    }

    /// `‖P − Pᵀ‖` (Frobenius).
    pub fn symmetry_defect(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).norm()
    }

    /// An orthonormal basis of the range.
    pub fn range_basis(&self) -> Vec<Point> {
        let n = self.dim();
        if n == 0 {
            return Vec::new();
        }
        let Ok(eig) = sym_eig(&self.matrix) else {
            return Vec::new();
        };
        (0..n)
            .filter(|&i| eig.eigenvalues[i] > 0.5)
            .map(|i| eig.u.column(i).into_owned())
            .collect()
    }
}

/// Orthogonal projector onto `span(basis)` in `R^dim`.
///
/// Uses twice-iterated modified Gram–Schmidt; vectors whose residual falls
/// below `1e-10` relative to their own length are dropped as dependent.
pub fn projector_from_basis(basis: &[Point], dim: usize) -> OrthoProjector {
    let q = orthonormalize(basis, dim);
    if q.is_empty() {
        return OrthoProjector::zero(dim);
    }
    let qm = Matrix::from_columns(&q);
    OrthoProjector { matrix: &qm * qm.transpose() }
}

/// Rank-revealing orthonormalization used by [`projector_from_basis`].
pub fn orthonormalize(basis: &[Point], dim: usize) -> Vec<Point> {
    let mut q: Vec<Point> = Vec::new();
    for b in basis {
        assert_eq!(b.len(), dim, "basis vector has wrong dimension");
        let scale = b.norm();
        if !(scale > 0.0) || !scale.is_finite() {
            continue;
        }
        let mut v = b.clone();
        for _ in 0..2 {
            for c in &q {
                let d = c.dot(&v);
                v -= c * d;
            }
        }
        let nv = v.norm();
        if nv > 1e-10 * scale {
            q.push(v / nv);
        }
    }
    q
}

/// Default finite-difference step `1e-6·max(1, |x|)`.
pub fn default_fd_step(x: &Point) -> f64 {
    1e-6 * x.norm().max(1.0)
}

fn central_gradient<F>(f: &F, x: &Point, h: f64) -> Result<Point>
where
    F: Fn(&Point) -> f64,
{
    let mut g = Point::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f(&xp);
        xp[i] = xi - h;
        let fm = f(&xp);
        xp[i] = xi;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Evaluation(format!("non-finite field value on stencil along axis {i}")));
        }
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Central-difference gradient with optional single Richardson halving
/// `(4 D(h/2) − D(h)) / 3`.
pub fn fd_gradient<F>(f: F, x: &Point, h: f64, richardson: bool) -> Result<Point>
where
    F: Fn(&Point) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::Contract(format!("finite-difference step must be positive, got {h}")));
    }
    let d1 = central_gradient(&f, x, h)?;
    if !richardson {
        return Ok(d1);
    }
    let d2 = central_gradient(&f, x, 0.5 * h)?;
    Ok((d2 * 4.0 - d1) / 3.0)
}

/// Central-difference Jacobian of a vector map; rows index outputs.
pub fn fd_jacobian<F>(map: F, x: &Point, h: f64) -> Result<Matrix>
where
    F: Fn(&Point) -> Result<Point>,
{
    if !(h > 0.0) {
        return Err(Error::Contract(format!("finite-difference step must be positive, got {h}")));
    }
    let mut xp = x.clone();
    let mut cols = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = map(&xp)?;
        xp[i] = xi - h;
        let fm = map(&xp)?;
        xp[i] = xi;
        cols.push((fp - fm) / (2.0 * h));
    }
    if cols.is_empty() {
        return Ok(Matrix::zeros(0, 0));
    }
    Ok(Matrix::from_columns(&cols))
}

/// Second directional derivative `d²/dt² f(x + t v)` at `t = 0`.
pub fn fd_second_directional<F>(f: F, x: &Point, v: &Point, h: f64) -> f64
where
    F: Fn(&Point) -> f64,
{
    let fp = f(&(x + v * h));
    let f0 = f(x);
    let fm = f(&(x - v * h));
    (fp - 2.0 * f0 + fm) / (h * h)
}

/// Vector with i.i.d. standard normal entries.
pub fn gaussian_vector(rng: &mut Rng, dim: usize) -> Point {
    Point::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Uniformly distributed unit vector (zero vector when `dim == 0`).
pub fn random_unit(rng: &mut Rng, dim: usize) -> Point {
    if dim == 0 {
        return Point::zeros(0);
    }
    loop {
        let v = gaussian_vector(rng, dim);
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Point with coordinates uniform in `[-radius, radius]`.
pub fn uniform_box(rng: &mut Rng, dim: usize, radius: f64) -> Point {
    Point::from_iterator(dim, (0..dim).map(|_| rng.random_range(-radius..=radius)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn m(rows: &[&[f64]]) -> Matrix {
        let n = rows.len();
        let k = rows[0].len();
        Matrix::from_fn(n, k, |i, j| rows[i][j])
    }

    #[test]
    fn svd_of_diagonal_is_identity_frame() {
        let f = svd(&diag(2, 2, &[3.0, 1.0])).unwrap();
        assert!((f.u.clone() - Matrix::identity(2, 2)).norm() < 1e-14);
        assert!((f.v.clone() - Matrix::identity(2, 2)).norm() < 1e-14);
        assert_eq!(f.singular_values.as_slice(), &[3.0, 1.0]);
    }

    #[test]
    fn svd_of_zero() {
        let f = svd(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!(f.singular_values.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn svd_antidiagonal() {
        // XᵀX = diag(1, 4)
        let x = m(&[&[0.0, 2.0], &[1.0, 0.0]]);
        let gram = x.transpose() * &x;
        assert!((gram - diag(2, 2, &[1.0, 4.0])).norm() < 1e-15);
        let f = svd(&x).unwrap();
        assert!((f.singular_values[0] - 2.0).abs() < 1e-14);
        assert!((f.singular_values[1] - 1.0).abs() < 1e-14);
        assert!((f.reconstruct() - x).norm() < 1e-14);
    }

    #[test]
    fn svd_rectangular_is_full() {
        let x = m(&[&[1.0, 2.0, 3.0], &[0.5, -1.0, 4.0]]);
        let f = svd(&x).unwrap();
        assert_eq!(f.u.shape(), (2, 2));
        assert_eq!(f.v.shape(), (3, 3));
        assert!((f.v.transpose() * &f.v - Matrix::identity(3, 3)).norm() < 1e-13);
        assert!((f.reconstruct() - x).norm() < 1e-13);
    }

    #[test]
    fn svd_rejects_nan() {
        let x = m(&[&[f64::NAN, 0.0], &[0.0, 1.0]]);
        assert!(svd(&x).is_err());
    }

    #[test]
    fn sym_eig_examples() {
        let e = sym_eig(&diag(2, 2, &[1.0, -2.0])).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[1.0, -2.0]);
        let e = sym_eig(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-14 && (e.eigenvalues[1] + 1.0).abs() < 1e-14);
        let e = sym_eig(&Matrix::identity(3, 3)).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[1.0, 1.0, 1.0]);
        assert!((e.u - Matrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn sym_eig_rejects_asymmetric() {
        let x = m(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(sym_eig(&x), Err(Error::Contract(_))));
    }

    #[test]
    fn fd_gradient_examples() {
        let g = fd_gradient(|x: &Point| x[0] * x[0], &Point::from_vec(vec![3.0]), 1e-5, false).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-8);
        let g = fd_gradient(|_: &Point| 4.2, &Point::from_vec(vec![1.0, 2.0]), 1e-5, true).unwrap();
        assert!(g.norm() == 0.0);
        let g = fd_gradient(|x: &Point| x[0] * x[1], &Point::from_vec(vec![1.0, 2.0]), 1e-5, false).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8 && (g[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fd_gradient_errors() {
        let x = Point::from_vec(vec![0.0]);
        assert!(fd_gradient(|x: &Point| x[0], &x, 0.0, false).is_err());
        assert!(matches!(
            fd_gradient(|x: &Point| if x[0] > 0.0 { f64::NAN } else { 0.0 }, &x, 1e-3, false),
            Err(Error::Evaluation(_))
        ));
    }

    #[test]
    fn cubic_polynomial_gradient() {
        let f = |x: &Point| x[0].powi(3) - 2.0 * x[0] * x[1] * x[1] + x[2];
        let x = Point::from_vec(vec![0.7, -1.3, 2.0]);
        let exact = Point::from_vec(vec![3.0 * 0.49 - 2.0 * 1.69, -4.0 * 0.7 * -1.3, 1.0]);
        let g = fd_gradient(f, &x, default_fd_step(&x), true).unwrap();
        assert!((g - exact).amax() < 1e-6);
    }

    #[test]
    fn projector_examples() {
        let p = projector_from_basis(&[Point::from_vec(vec![1.0, 0.0])], 2);
        assert!((p.matrix() - m(&[&[1.0, 0.0], &[0.0, 0.0]])).norm() < 1e-15);
        let p = projector_from_basis(&[], 2);
        assert_eq!(p.matrix(), &Matrix::zeros(2, 2));
        let p = projector_from_basis(&[Point::from_vec(vec![1.0, 1.0])], 2);
        assert!((p.matrix() - m(&[&[0.5, 0.5], &[0.5, 0.5]])).norm() < 1e-15);
        // dependent vectors are dropped
        let p = projector_from_basis(
            &[Point::from_vec(vec![1.0, 1.0, 0.0]), Point::from_vec(vec![2.0, 2.0, 0.0])],
            3,
        );
        assert_eq!(p.rank(), 1);
        assert_eq!(p.complement().rank(), 2);
    }

    #[test]
    fn range_basis_spans() {
        let p = projector_from_basis(&[Point::from_vec(vec![1.0, 2.0, 0.0]), Point::from_vec(vec![0.0, 1.0, 1.0])], 3);
        let b = p.range_basis();
        assert_eq!(b.len(), 2);
        for v in &b {
            assert!((p.apply(v) - v).norm() < 1e-12);
        }
    }

    #[test]
    fn flatten_roundtrip_is_row_major() {
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(flatten(&x).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let mut rng = Rng::seed_from_u64(1);
        let p = gaussian_vector(&mut rng, 6);
        assert_eq!(flatten(&unflatten(&p, 2, 3)), p);
    }
}
