//! Relatively open pieces of affine subspaces and polyhedral complexes.

use std::path::Path;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, OrthoProjector, Point};
use crate::strata::{Stratification, Stratum};
use crate::Rng;

/// Strict inequality `normal · x < offset`, with `normal` a unit vector
/// tangent to the stratum.
#[derive(Debug, Clone)]
pub struct Halfspace {
    pub normal: Point,
    pub offset: f64,
}

/// An affine subspace removed from a stratum (a puncture, or a line cut out
/// of a plane).
#[derive(Debug, Clone)]
pub struct Flat {
    basepoint: Point,
    projector: OrthoProjector,
}

impl Flat {
    pub fn new(basepoint: Point, basis: &[Point]) -> Self {
        let dim = basepoint.len();
        Flat { projector: linalg::projector_from_basis(basis, dim), basepoint }
    }

    pub fn point(p: Point) -> Self {
        let dim = p.len();
        Flat { basepoint: p, projector: OrthoProjector::zero(dim) }
    }

    pub fn offset(&self, x: &Point) -> Point {
        let d = x - &self.basepoint;
        &d - self.projector.apply(&d)
    }

    pub fn distance(&self, x: &Point) -> f64 {
        self.offset(x).norm()
    }
}

/// `basepoint + span(basis)`, cut down by strict half-space constraints and
/// with flats removed.
#[derive(Debug, Clone)]
pub struct AffineStratum {
    id: String,
    basepoint: Point,
    basis: Vec<Point>,
    projector: OrthoProjector,
    constraints: Vec<Halfspace>,
    removed: Vec<Flat>,
    anchors: Vec<Point>,
    sample_radius: f64,
}

impl AffineStratum {
    /// The full affine subspace through `basepoint` spanned by `basis`.
    pub fn new(id: impl Into<String>, basepoint: Point, basis: &[Point]) -> Self {
        let dim = basepoint.len();
        let basis = linalg::orthonormalize(basis, dim);
        AffineStratum {
            id: id.into(),
            projector: linalg::projector_from_basis(&basis, dim),
            basis,
            basepoint,
            constraints: Vec::new(),
            removed: Vec::new(),
            anchors: Vec::new(),
            sample_radius: 1.0,
        }
    }

    /// Adds the constraint `normal · x < offset`. The normal is projected onto
    /// the stratum's direction space and normalized so that
    /// `offset − normal · y` is the in-plane distance to the boundary
    /// hyperplane.
    pub fn with_constraint(mut self, normal: Point, offset: f64) -> Result<Self> {
        let t = self.projector.apply(&normal);
        let len = t.norm();
        if len < 1e-12 {
            return Err(Error::Contract(format!("constraint normal is orthogonal to stratum {}", self.id)));
        }
        // keep the same hyperplane within the affine hull
        let shift = (&normal - &t).dot(&self.basepoint);
        self.constraints.push(Halfspace { normal: t / len, offset: (offset - shift) / len });
        Ok(self)
    }

    pub fn with_removed(mut self, flat: Flat) -> Self {
        self.removed.push(flat);
        self
    }

    pub fn with_anchor(mut self, p: Point) -> Self {
        self.anchors.push(p);
        self
    }

    pub fn with_sample_radius(mut self, r: f64) -> Self {
        self.sample_radius = r;
        self
    }

    pub fn basepoint(&self) -> &Point {
        &self.basepoint
    }

    pub fn basis(&self) -> &[Point] {
        &self.basis
    }

    pub fn constraints(&self) -> &[Halfspace] {
        &self.constraints
    }

    /// Orthogonal projection onto the affine hull.
    pub fn project_affine(&self, x: &Point) -> Point {
        &self.basepoint + self.projector.apply(&(x - &self.basepoint))
    }

    fn inside(&self, y: &Point) -> bool {
        self.constraints.iter().all(|h| h.normal.dot(y) < h.offset) && self.removed.iter().all(|f| f.distance(y) > 0.0)
    }
}

impl Stratum for AffineStratum {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn ambient_dim(&self) -> usize {
        self.basepoint.len()
    }

    fn project(&self, x: &Point) -> Result<Point> {
        let y = self.project_affine(x);
        if self.inside(&y) {
            Ok(y)
        } else {
            Err(Error::Domain(format!("nearest point of the hull lies outside stratum {}", self.id)))
        }
    }

    fn tangent_projector(&self, _y: &Point) -> Result<OrthoProjector> {
        Ok(self.projector.clone())
    }

    fn projection_jacobian(&self, _x: &Point) -> Result<Matrix> {
        Ok(self.projector.matrix().clone())
    }

    fn frontier_terms(&self, y: &Point) -> Vec<f64> {
        let mut out: Vec<f64> = self.constraints.iter().map(|h| h.offset - h.normal.dot(y)).collect();
        out.extend(self.removed.iter().map(|f| f.distance(y)));
        out
    }

    fn frontier_term_gradients(&self, y: &Point) -> Vec<Point> {
        let mut out: Vec<Point> = self.constraints.iter().map(|h| -&h.normal).collect();
        for f in &self.removed {
            let o = f.offset(y);
            let n = o.norm();
            out.push(if n > 0.0 { o / n } else { Point::zeros(y.len()) });
        }
        out
    }

    fn distance_lower_bound(&self, x: &Point) -> f64 {
        (x - self.project_affine(x)).norm()
    }

    fn distance_lower_bound_gradient(&self, x: &Point) -> Point {
        let d = x - self.project_affine(x);
        let n = d.norm();
        if n > 0.0 {
            d / n
        } else {
            Point::zeros(x.len())
        }
    }

    fn sample(&self, rng: &mut Rng, count: usize) -> Vec<Point> {
        let mut out = Vec::with_capacity(count);
        let mut tries = 0;
        while out.len() < count && tries < 10_000 * count.max(1) {
            tries += 1;
            let mut y = self.basepoint.clone();
            for b in &self.basis {
                y += b * rng.random_range(-self.sample_radius..self.sample_radius);
            }
            if self.inside(&y) {
                out.push(y);
            }
        }
        out
    }

    fn anchor_points(&self) -> Vec<Point> {
        if self.basis.is_empty() {
            vec![self.basepoint.clone()]
        } else {
            self.anchors.clone()
        }
    }
}

/// One face of a polyhedral complex as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaceSpec {
    pub id: String,
    pub basepoint: Vec<f64>,
    #[serde(default)]
    pub basis: Vec<Vec<f64>>,
    /// Faces whose closure contains this face.
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default)]
    pub sample_radius: Option<f64>,
}

/// `normal · x < offset`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// On-disk description of a polyhedral complex.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyhedralComplex {
    pub name: String,
    pub faces: Vec<FaceSpec>,
}

impl PolyhedralComplex {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// All faces of the simplex spanned by affinely independent `vertices`,
    /// each as a relatively open stratum.
    pub fn simplex(name: impl Into<String>, vertices: &[Point]) -> Result<Self> {
        let k = vertices.len();
        if k == 0 || k > 16 {
            return Err(Error::Contract("a simplex needs between 1 and 16 vertices".into()));
        }
        let d = vertices[0].len();
        let edges: Vec<Point> = vertices[1..].iter().map(|v| v - &vertices[0]).collect();
        if linalg::orthonormalize(&edges, d).len() != k - 1 {
            return Err(Error::Contract("simplex vertices are affinely dependent".into()));
        }
        let label = |mask: usize| -> String {
            let idx: Vec<String> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| i.to_string()).collect();
            format!("f{}", idx.join(""))
        };
        let mut faces = Vec::new();
        for mask in 1usize..(1 << k) {
            let members: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
            let pts: Vec<&Point> = members.iter().map(|&i| &vertices[i]).collect();
            let centroid = pts.iter().fold(Point::zeros(d), |acc, p| acc + *p) / pts.len() as f64;
            let dirs: Vec<Point> = pts[1..].iter().map(|p| *p - pts[0]).collect();
            let radius = pts.iter().map(|p| (*p - &centroid).norm()).fold(0.0, f64::max);
            let mut constraints = Vec::new();
            if members.len() >= 2 {
                // barycentric coordinates on the face: x = p₀ + E μ
                let e = Matrix::from_columns(&dirs);
                let pinv = e
                    .clone()
                    .pseudo_inverse(1e-12)
                    .map_err(|m| Error::Decomposition(m.to_string()))?;
                let mut sum = Point::zeros(d);
                for (r, _) in dirs.iter().enumerate() {
                    let g: Point = pinv.row(r).transpose();
                    sum += &g;
                    // λ = g·(x − p₀) > 0
                    constraints.push(ConstraintSpec { normal: (-&g).as_slice().to_vec(), offset: -g.dot(pts[0]) });
                }
                // λ₀ = 1 − Σ g·(x − p₀) > 0
                constraints.push(ConstraintSpec { normal: sum.as_slice().to_vec(), offset: 1.0 + sum.dot(pts[0]) });
            }
            let parents = (1usize..(1 << k))
                .filter(|&sup| sup != mask && sup & mask == mask)
                .map(label)
                .collect();
            faces.push(FaceSpec {
                id: label(mask),
                basepoint: centroid.as_slice().to_vec(),
                basis: dirs.iter().map(|v| v.as_slice().to_vec()).collect(),
                parents,
                constraints,
                sample_radius: Some(radius.max(1e-3)),
            });
        }
        Ok(PolyhedralComplex { name: name.into(), faces })
    }

    /// Builds the stratification whose strata are the faces, ordered by the
    /// `parents` relation.
    pub fn stratification(&self) -> Result<Stratification> {
        let mut strata: Vec<Arc<dyn Stratum>> = Vec::new();
        for f in &self.faces {
            let bp = Point::from_vec(f.basepoint.clone());
            let dim = bp.len();
            let basis: Vec<Point> = f
                .basis
                .iter()
                .map(|b| {
                    if b.len() != dim {
                        Err(Error::Config(format!("face {}: basis vector of length {} in R^{dim}", f.id, b.len())))
                    } else {
                        Ok(Point::from_vec(b.clone()))
                    }
                })
                .collect::<Result<_>>()?;
            let mut s = AffineStratum::new(f.id.clone(), bp, &basis);
            if s.dim() != basis.len() {
                return Err(Error::Config(format!("face {}: basis is linearly dependent", f.id)));
            }
            for c in &f.constraints {
                if c.normal.len() != dim {
                    return Err(Error::Config(format!("face {}: constraint normal has wrong length", f.id)));
                }
                s = s.with_constraint(Point::from_vec(c.normal.clone()), c.offset)?;
            }
            if let Some(r) = f.sample_radius {
                s = s.with_sample_radius(r);
            }
            strata.push(Arc::new(s));
        }
        let pairs: Vec<(&str, &str)> = self
            .faces
            .iter()
            .flat_map(|f| f.parents.iter().map(move |p| (f.id.as_str(), p.as_str())))
            .collect();
        Stratification::new(self.name.clone(), strata, &pairs, true, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    #[test]
    fn project_affine_examples() {
        let xaxis = AffineStratum::new("x", p(&[0.0, 0.0, 0.0]), &[p(&[1.0, 0.0, 0.0])]);
        assert_eq!(xaxis.project(&p(&[1.0, 2.0, 3.0])).unwrap(), p(&[1.0, 0.0, 0.0]));
        let whole = AffineStratum::new("r3", p(&[0.0; 3]), &[p(&[1.0, 0.0, 0.0]), p(&[0.0, 1.0, 0.0]), p(&[0.0, 0.0, 1.0])]);
        let x = p(&[1.0, 2.0, 3.0]);
        assert!((whole.project(&x).unwrap() - &x).amax() < 1e-15);
        let diag = AffineStratum::new("d", p(&[0.0, 0.0]), &[p(&[1.0, 1.0])]);
        // minimize (2 − t)² + t² ⇒ t = 1
        assert!((diag.project(&p(&[2.0, 0.0])).unwrap() - p(&[1.0, 1.0])).amax() < 1e-15);
    }

    #[test]
    fn removed_point_is_not_attained() {
        let s = AffineStratum::new("x*", p(&[0.0, 0.0]), &[p(&[1.0, 0.0])]).with_removed(Flat::point(p(&[0.0, 0.0])));
        assert!(matches!(s.project(&p(&[0.0, 1.0])), Err(Error::Domain(_))));
        assert_eq!(s.frontier_distance(&p(&[2.0, 0.0])), 2.0);
    }

    #[test]
    fn simplex_faces() {
        let c = PolyhedralComplex::simplex("tri", &[p(&[0.0, 0.0]), p(&[1.0, 0.0]), p(&[0.0, 1.0])]).unwrap();
        assert_eq!(c.faces.len(), 7);
        let a = c.stratification().unwrap();
        let tri = a.index_of("f012").unwrap();
        assert_eq!(a.frontier_of(tri).len(), 6);
        let t = a.stratum(tri);
        assert!(t.project(&p(&[0.2, 0.2])).is_ok());
        assert!(t.project(&p(&[0.8, 0.8])).is_err());
        // distance to the boundary of the triangle at (0.2, 0.3)
        let d = t.frontier_terms(&p(&[0.2, 0.3]));
        let expect = [0.2, 0.3, (1.0 - 0.5) / 2f64.sqrt()];
        let mut got = d.clone();
        got.sort_by(f64::total_cmp);
        let mut want = expect.to_vec();
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
        let e = a.stratum(a.index_of("f01").unwrap());
        assert!(e.project(&p(&[0.5, -1.0])).is_ok());
        assert!(e.project(&p(&[1.5, 0.0])).is_err());
        assert!(e.project(&p(&[0.0, 0.5])).is_err());
    }
}
