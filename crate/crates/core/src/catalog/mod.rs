//! Concrete stratified sets addressable by string id.
//!
//! | id | set |
//! |----|-----|
//! | `point` | `{0}` in `ℝ²` |
//! | `xaxis` | the `x`-axis in `ℝ²` |
//! | `punctured-xaxis` | `{0}` and `x-axis ∖ {0}` in `ℝ²` |
//! | `halfplane` | the `x`-axis and `{y > 0}` in `ℝ²` |
//! | `plane-minus-axis` | the `x`-axis and `xy`-plane `∖ x`-axis in `ℝ³` |
//! | `rank:n=N,m=M` | rank strata `M_0, …, M_min(N,M)` |
//! | `Aplus:n=N` | `M_0, …, M_{N−1}, {det > 0}` |
//! | `poly:file=PATH` | polyhedral complex loaded from JSON |
//! | `simplex:d=D` | the standard `D`-simplex and its faces |
//! | `counterexample` | `{z = xy, x ≥ 0}` as `y`-axis and open graph |

use std::path::Path;
use std::sync::Arc;

pub mod affine;
pub mod counterexample;
pub mod rank;
pub mod spectral;

pub use affine::{AffineStratum, Flat, PolyhedralComplex};
pub use counterexample::{counterexample_projections, counterexample_stratification, SaddleGraph};
pub use rank::{
    aplus_stratification, project_fixed_rank, rank_stratification, tangent_projector_fixed_rank, FixedRankStratum,
    PositiveDet,
};
pub use spectral::{normalize_signed_perm, BoxSet, LiftKind, ModelSet, NonnegOrthant, SpectralLiftSet, WholeSpace};

use crate::error::{Error, Result};
use crate::linalg::Point;
use crate::strata::{Stratification, Stratum};

fn e(dim: usize, i: usize) -> Point {
    let mut v = Point::zeros(dim);
    v[i] = 1.0;
    v
}

/// The `x`-axis in `ℝ²` as a single stratum.
pub fn x_axis() -> Result<Stratification> {
    let s = AffineStratum::new("xaxis", Point::zeros(2), &[e(2, 0)]).with_sample_radius(2.0);
    Stratification::new("xaxis", vec![Arc::new(s)], &[], true, true)
}

/// The origin of `ℝ²` as a single stratum.
pub fn point() -> Result<Stratification> {
    let s = AffineStratum::new("origin", Point::zeros(2), &[]);
    Stratification::new("point", vec![Arc::new(s)], &[], true, true)
}

/// `{0} ≺ x-axis ∖ {0}` in `ℝ²`.
pub fn punctured_x_axis() -> Result<Stratification> {
    let o = AffineStratum::new("origin", Point::zeros(2), &[]);
    let line = AffineStratum::new("axis*", Point::zeros(2), &[e(2, 0)])
        .with_removed(Flat::point(Point::zeros(2)))
        .with_sample_radius(2.0);
    Stratification::new("punctured-xaxis", vec![Arc::new(o), Arc::new(line)], &[("origin", "axis*")], true, true)
}

/// `x-axis ≺ {y > 0}` in `ℝ²`.
pub fn half_plane() -> Result<Stratification> {
    let axis = AffineStratum::new("axis", Point::zeros(2), &[e(2, 0)]).with_sample_radius(2.0);
    let upper = AffineStratum::new("upper", Point::zeros(2), &[e(2, 0), e(2, 1)])
        .with_constraint(-e(2, 1), 0.0)?
        .with_sample_radius(2.0);
    Stratification::new("halfplane", vec![Arc::new(axis), Arc::new(upper)], &[("axis", "upper")], true, true)
}

/// `x-axis ≺ xy-plane ∖ x-axis` in `ℝ³`.
pub fn plane_minus_axis() -> Result<Stratification> {
    let axis = AffineStratum::new("axis", Point::zeros(3), &[e(3, 0)]).with_sample_radius(2.0);
    let plane = AffineStratum::new("plane*", Point::zeros(3), &[e(3, 0), e(3, 1)])
        .with_removed(Flat::new(Point::zeros(3), &[e(3, 0)]))
        .with_sample_radius(2.0);
    Stratification::new("plane-minus-axis", vec![Arc::new(axis), Arc::new(plane)], &[("axis", "plane*")], true, true)
}

/// Faces of the standard simplex `conv{0, e₁, …, e_d}`.
pub fn standard_simplex(d: usize) -> Result<PolyhedralComplex> {
    let mut v = vec![Point::zeros(d)];
    v.extend((0..d).map(|i| e(d, i)));
    PolyhedralComplex::simplex(format!("simplex:d={d}"), &v)
}

fn parse_params(spec: &str) -> Result<Vec<(String, String)>> {
    spec.split(',')
        .filter(|s| !s.is_empty())
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("expected key=value, got {kv:?}")))
        })
        .collect()
}

fn param_usize(params: &[(String, String)], key: &str, id: &str) -> Result<usize> {
    let v = params
        .iter()
        .find(|(k, _)| k == key)
        .ok_or_else(|| Error::Config(format!("{id}: missing parameter {key}")))?;
    v.1.parse().map_err(|_| Error::Config(format!("{id}: parameter {key} must be a non-negative integer")))
}

/// Resolves a catalog id. Relative `poly:file=` paths are taken relative to
/// `base_dir`.
pub fn load(id: &str, base_dir: &Path) -> Result<Stratification> {
    let (head, rest) = id.split_once(':').unwrap_or((id, ""));
    let params = parse_params(rest)?;
    match head {
        "point" => point(),
        "xaxis" => x_axis(),
        "punctured-xaxis" => punctured_x_axis(),
        "halfplane" => half_plane(),
        "plane-minus-axis" => plane_minus_axis(),
        "counterexample" => counterexample_stratification(),
        "rank" => {
            let n = param_usize(&params, "n", id)?;
            let m = param_usize(&params, "m", id)?;
            if n == 0 || m == 0 {
                return Err(Error::Config(format!("{id}: n and m must be positive")));
            }
            rank_stratification(n, m)
        }
        "Aplus" => {
            let n = param_usize(&params, "n", id)?;
            if n == 0 {
                return Err(Error::Config(format!("{id}: n must be positive")));
            }
            aplus_stratification(n)
        }
        "simplex" => standard_simplex(param_usize(&params, "d", id)?)?.stratification(),
        "poly" => {
            let file = params
                .iter()
                .find(|(k, _)| k == "file")
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::Config(format!("{id}: missing parameter file")))?;
            let path = base_dir.join(file);
            PolyhedralComplex::load(&path)
                .map_err(|e| Error::Config(format!("cannot load {}: {e}", path.display())))?
                .stratification()
        }
        _ => Err(Error::Config(format!("unknown catalog id {id:?}"))),
    }
}

/// Ambient matrix shape `(n, m)` for matrix catalog ids.
pub fn matrix_shape(a: &Stratification) -> Option<(usize, usize)> {
    let name = a.name();
    let (head, rest) = name.split_once(':')?;
    let params = parse_params(rest).ok()?;
    match head {
        "rank" => Some((param_usize(&params, "n", name).ok()?, param_usize(&params, "m", name).ok()?)),
        "Aplus" => {
            let n = param_usize(&params, "n", name).ok()?;
            Some((n, n))
        }
        _ => None,
    }
}

/// Checks the stratum-level contracts on samples: `P_M` fixes samples,
/// tangent projectors have rank `dim M`, and `P_T + P_N = I`.
pub fn check_descriptor(s: &dyn Stratum, rng: &mut crate::Rng, samples: usize) -> Result<()> {
    for x in s.sample(rng, samples) {
        let p = s.project(&x)?;
        if (&p - &x).norm() > 1e-10 * (1.0 + x.norm()) {
            return Err(Error::Contract(format!("{}: projection moves a sample by {:e}", s.id(), (&p - &x).norm())));
        }
        let pp = s.project(&p)?;
        if (&pp - &p).norm() > 1e-10 * (1.0 + x.norm()) {
            return Err(Error::Contract(format!("{}: projection is not idempotent", s.id())));
        }
        let t = s.tangent_projector(&x)?;
        if t.rank() != s.dim() {
            return Err(Error::Contract(format!("{}: tangent rank {} ≠ dim {}", s.id(), t.rank(), s.dim())));
        }
        let n = s.normal_projector(&x)?;
        let sum = t.matrix() + n.matrix();
        let id = crate::linalg::Matrix::identity(sum.nrows(), sum.ncols());
        if (sum - id).amax() > 1e-12 {
            return Err(Error::Contract(format!("{}: P_T + P_N ≠ I", s.id())));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn every_catalog_entry_loads_and_meets_descriptor_contracts() {
        let mut rng = crate::Rng::seed_from_u64(11);
        let here = Path::new(".");
        for id in [
            "point",
            "xaxis",
            "punctured-xaxis",
            "halfplane",
            "plane-minus-axis",
            "counterexample",
            "rank:n=2,m=2",
            "rank:n=3,m=3",
            "rank:n=2,m=3",
            "Aplus:n=2",
            "simplex:d=2",
        ] {
            let a = load(id, here).unwrap();
            for s in a.strata() {
                check_descriptor(s.as_ref(), &mut rng, 10).unwrap_or_else(|e| panic!("{id}: {e}"));
            }
        }
    }

    #[test]
    fn bad_ids_are_config_errors() {
        let here = Path::new(".");
        assert!(matches!(load("nope", here), Err(Error::Config(_))));
        assert!(matches!(load("rank:n=2", here), Err(Error::Config(_))));
        assert!(matches!(load("poly:file=missing.json", here), Err(Error::Config(_))));
    }

    #[test]
    fn shapes() {
        let a = load("Aplus:n=2", Path::new(".")).unwrap();
        assert_eq!(matrix_shape(&a), Some((2, 2)));
        assert_eq!(matrix_shape(&x_axis().unwrap()), None);
    }
}
