//! Fixed-rank matrix manifolds `M_k = {rk X = k}` and the open stratum
//! `{det X > 0}`, all in the flattened (row-major) coordinates of `M^{n×m}`.

use std::sync::Arc;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::{self, flatten, unflatten, Matrix, OrthoProjector, Point, SvdFactors};
use crate::strata::{Stratification, Stratum};
use crate::Rng;

/// Relative singular-value gap below which rank decisions and projections
/// are treated as ambiguous.
pub const RANK_GAP_TOL: f64 = 1e-8;

/// Eckart–Young truncation: the nearest rank-`k` matrix.
///
/// Fails with [`Error::NonUniqueProjection`] when `σ_k ≤ σ_{k+1} + tol` and
/// with [`Error::Domain`] when `rk X < k` (the infimum is not attained),
/// where `tol = 1e-8·σ₁`.
pub fn project_fixed_rank(x: &Matrix, k: usize) -> Result<Matrix> {
    let (n, m) = x.shape();
    let r = n.min(m);
    if k > r {
        return Err(Error::Contract(format!("rank {k} exceeds min(n, m) = {r}")));
    }
    if k == 0 {
        return Ok(Matrix::zeros(n, m));
    }
    let f = linalg::svd(x)?;
    truncate(&f, k, &format!("rank-{k}"))
}

fn truncate(f: &SvdFactors, k: usize, id: &str) -> Result<Matrix> {
    let s = &f.singular_values;
    let r = s.len();
    let tol = RANK_GAP_TOL * s[0];
    if s[k - 1] <= tol {
        return Err(Error::Domain(format!("rank below {k}: nearest point of {id} is not attained")));
    }
    if k < r && s[k - 1] <= s[k] + tol {
        return Err(Error::NonUniqueProjection {
            stratum: id.to_string(),
            detail: format!("σ_{k} = {} and σ_{} = {} are tied", s[k - 1], k + 1, s[k]),
        });
    }
    let mut z = s.as_slice().to_vec();
    for v in z.iter_mut().skip(k) {
        *v = 0.0;
    }
    Ok(f.compose(&z))
}

/// Projector onto `T_Y M_k`: in the SVD frame of `Y` a tangent matrix has a
/// vanishing trailing `(n−k)×(m−k)` block, so `P(Z) = Z − U⊥U⊥ᵀ Z V⊥V⊥ᵀ`.
pub fn tangent_projector_fixed_rank(y: &Matrix, k: usize) -> Result<OrthoProjector> {
    let (n, m) = y.shape();
    let r = n.min(m);
    if k == 0 {
        if y.norm() > 1e-12 {
            return Err(Error::Domain("matrix is not the zero matrix".into()));
        }
        return Ok(OrthoProjector::zero(n * m));
    }
    let f = linalg::svd(y)?;
    let s = &f.singular_values;
    let tol = RANK_GAP_TOL * s[0];
    if s[k - 1] <= tol || (k < r && s[k] >= tol) {
        return Err(Error::Domain(format!("matrix does not have rank {k} (σ = {:?})", s.as_slice())));
    }
    let uperp = f.u.columns(k, n - k).into_owned();
    let vperp = f.v.columns(k, m - k).into_owned();
    let a = &uperp * uperp.transpose();
    let b = &vperp * vperp.transpose();
    // row-major vec(A Z B) = (A ⊗ Bᵀ) vec(Z), B symmetric
    let normal = a.kronecker(&b);
    Ok(OrthoProjector::from_matrix(Matrix::identity(n * m, n * m) - normal))
}

/// Random `n×m` matrix of rank `k` with singular values in `[lo, hi]`.
pub fn random_rank_k(rng: &mut Rng, n: usize, m: usize, k: usize, lo: f64, hi: f64) -> Matrix {
    let u = random_orthogonal(rng, n);
    let v = random_orthogonal(rng, m);
    let mut s = Matrix::zeros(n, m);
    for i in 0..k {
        s[(i, i)] = rng.random_range(lo..hi);
    }
    u * s * v.transpose()
}

/// Haar-ish random orthogonal matrix (QR of a Gaussian matrix).
pub fn random_orthogonal(rng: &mut Rng, n: usize) -> Matrix {
    let g = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let mut c = q.column_mut(j);
            c.neg_mut();
        }
    }
    q
}

fn flat_outer(u: &Matrix, v: &Matrix, i: usize) -> Point {
    flatten(&(u.column(i) * v.column(i).transpose()))
}

/// `M_k ⊂ M^{n×m}`.
#[derive(Debug, Clone)]
pub struct FixedRankStratum {
    id: String,
    n: usize,
    m: usize,
    k: usize,
    sample_range: (f64, f64),
}

impl FixedRankStratum {
    pub fn new(n: usize, m: usize, k: usize) -> Result<Self> {
        if n == 0 || m == 0 || k > n.min(m) {
            return Err(Error::Contract(format!("invalid rank stratum M_{k} in M^{{{n}x{m}}}")));
        }
        Ok(FixedRankStratum { id: format!("M{k}"), n, m, k, sample_range: (0.3, 1.5) })
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.m)
    }
}

impl Stratum for FixedRankStratum {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.k * (self.n + self.m - self.k)
    }

    fn ambient_dim(&self) -> usize {
        self.n * self.m
    }

    fn project(&self, x: &Point) -> Result<Point> {
        let xm = unflatten(x, self.n, self.m);
        if self.k == self.n.min(self.m) {
            // open dense stratum: identity where attained
            if self.k == 0 {
                return Ok(Point::zeros(x.len()));
            }
            let s = linalg::singular_values(&xm)?;
            if s[self.k - 1] <= RANK_GAP_TOL * s[0] {
                return Err(Error::Domain(format!("matrix is rank deficient, outside {}", self.id)));
            }
            return Ok(x.clone());
        }
        if self.k == 0 {
            return Ok(Point::zeros(x.len()));
        }
        let f = linalg::svd(&xm)?;
        truncate(&f, self.k, &self.id).map(|y| flatten(&y))
    }

    fn tangent_projector(&self, y: &Point) -> Result<OrthoProjector> {
        tangent_projector_fixed_rank(&unflatten(y, self.n, self.m), self.k)
    }

    fn frontier_terms(&self, y: &Point) -> Vec<f64> {
        if self.k == 0 {
            return Vec::new();
        }
        match linalg::singular_values(&unflatten(y, self.n, self.m)) {
            Ok(s) => s.iter().take(self.k).copied().collect(),
            Err(_) => vec![0.0],
        }
    }

    fn frontier_term_gradients(&self, y: &Point) -> Vec<Point> {
        if self.k == 0 {
            return Vec::new();
        }
        match linalg::svd(&unflatten(y, self.n, self.m)) {
            Ok(f) => (0..self.k).map(|i| flat_outer(&f.u, &f.v, i)).collect(),
            Err(_) => vec![Point::zeros(y.len())],
        }
    }

    fn distance_lower_bound(&self, x: &Point) -> f64 {
        if self.k == self.n.min(self.m) {
            return 0.0;
        }
        match linalg::singular_values(&unflatten(x, self.n, self.m)) {
            Ok(s) => s.iter().skip(self.k).map(|v| v * v).sum::<f64>().sqrt(),
            Err(_) => 0.0,
        }
    }

    fn sample(&self, rng: &mut Rng, count: usize) -> Vec<Point> {
        let (lo, hi) = self.sample_range;
        (0..count).map(|_| flatten(&random_rank_k(rng, self.n, self.m, self.k, lo, hi))).collect()
    }

    fn anchor_points(&self) -> Vec<Point> {
        if self.k == 0 {
            vec![Point::zeros(self.n * self.m)]
        } else {
            Vec::new()
        }
    }
}

/// The open stratum `{X ∈ M^{n×n} : det X > 0}`.
#[derive(Debug, Clone)]
pub struct PositiveDet {
    id: String,
    n: usize,
}

impl PositiveDet {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Contract("PositiveDet needs n ≥ 1".into()));
        }
        Ok(PositiveDet { id: format!("M{n}+"), n })
    }
}

impl Stratum for PositiveDet {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.n * self.n
    }

    fn ambient_dim(&self) -> usize {
        self.n * self.n
    }

    fn project(&self, x: &Point) -> Result<Point> {
        let xm = unflatten(x, self.n, self.n);
        let s = linalg::singular_values(&xm)?;
        if xm.determinant() > 0.0 && s[self.n - 1] > RANK_GAP_TOL * s[0] {
            Ok(x.clone())
        } else {
            Err(Error::Domain(format!("det ≤ 0: outside {}", self.id)))
        }
    }

    fn tangent_projector(&self, _y: &Point) -> Result<OrthoProjector> {
        Ok(OrthoProjector::identity(self.n * self.n))
    }

    fn projection_jacobian(&self, _x: &Point) -> Result<Matrix> {
        Ok(Matrix::identity(self.n * self.n, self.n * self.n))
    }

    fn frontier_terms(&self, y: &Point) -> Vec<f64> {
        match linalg::singular_values(&unflatten(y, self.n, self.n)) {
            Ok(s) => s.iter().copied().collect(),
            Err(_) => vec![0.0],
        }
    }

    fn frontier_term_gradients(&self, y: &Point) -> Vec<Point> {
        match linalg::svd(&unflatten(y, self.n, self.n)) {
            Ok(f) => (0..self.n).map(|i| flat_outer(&f.u, &f.v, i)).collect(),
            Err(_) => vec![Point::zeros(y.len())],
        }
    }

    fn distance_lower_bound(&self, x: &Point) -> f64 {
        let xm = unflatten(x, self.n, self.n);
        if xm.determinant() >= 0.0 {
            return 0.0;
        }
        linalg::singular_values(&xm).map(|s| s[self.n - 1]).unwrap_or(0.0)
    }

    fn sample(&self, rng: &mut Rng, count: usize) -> Vec<Point> {
        (0..count)
            .map(|_| {
                let mut x = random_rank_k(rng, self.n, self.n, self.n, 0.3, 1.5);
                if x.determinant() < 0.0 {
                    let mut r = x.row_mut(0);
                    r.neg_mut();
                }
                flatten(&x)
            })
            .collect()
    }
}

/// `{M_0, …, M_r}` in `M^{n×m}`, `r = min(n, m)`.
pub fn rank_stratification(n: usize, m: usize) -> Result<Stratification> {
    let r = n.min(m);
    let strata: Vec<Arc<dyn Stratum>> = (0..=r)
        .map(|k| FixedRankStratum::new(n, m, k).map(|s| Arc::new(s) as Arc<dyn Stratum>))
        .collect::<Result<_>>()?;
    let ids: Vec<String> = (0..=r).map(|k| format!("M{k}")).collect();
    let pairs: Vec<(&str, &str)> = (0..r).map(|k| (ids[k].as_str(), ids[k + 1].as_str())).collect();
    Stratification::new(format!("rank:n={n},m={m}"), strata, &pairs, true, true)
}

/// `{M_0, …, M_{n−1}, M_{n+}}` in `M^{n×n}`, a stratification of `{det ≥ 0}`.
pub fn aplus_stratification(n: usize) -> Result<Stratification> {
    let mut strata: Vec<Arc<dyn Stratum>> = (0..n)
        .map(|k| FixedRankStratum::new(n, n, k).map(|s| Arc::new(s) as Arc<dyn Stratum>))
        .collect::<Result<_>>()?;
    strata.push(Arc::new(PositiveDet::new(n)?));
    let mut ids: Vec<String> = (0..n).map(|k| format!("M{k}")).collect();
    ids.push(format!("M{n}+"));
    let pairs: Vec<(&str, &str)> = (0..n).map(|k| (ids[k].as_str(), ids[k + 1].as_str())).collect();
    Stratification::new(format!("Aplus:n={n}"), strata, &pairs, true, true)
}
