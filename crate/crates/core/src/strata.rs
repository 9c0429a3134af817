//! Stratifications and numeric certifiers for the frontier condition,
//! Whitney condition (a) and normal flatness.
//!
//! Certifiers are falsification tests: they sample sequences and points,
//! record the worst violation and compare it with a configured tolerance.
//! A passing report means no counterexample was found, not that the
//! condition is proved.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, fd_gradient, fd_jacobian, Matrix, OrthoProjector, Point};
use crate::{Rng, Smoothness};

/// Softmin order used by [`Stratum::frontier_distance`].
pub const DEFAULT_SOFTMIN_ORDER: i32 = 8;

/// q-power softmin `(Σ dᵢ^{-q})^{-1/q}`; never exceeds `min dᵢ`.
/// Infinite entries are ignored; an empty (or all-infinite) input gives `+∞`.
pub fn softmin(values: &[f64], q: i32) -> f64 {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return f64::INFINITY;
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    if lo <= 0.0 {
        return 0.0;
    }
    // scale by the minimum to keep the powers in range
    let sum: f64 = finite.iter().map(|&v| (lo / v).powi(q)).sum();
    lo * sum.powf(-1.0 / q as f64)
}

/// Gradient of [`softmin`] given the gradients of its arguments.
pub fn softmin_gradient(values: &[f64], grads: &[Point], q: i32, dim: usize) -> Point {
    let s = softmin(values, q);
    let mut g = Point::zeros(dim);
    if !s.is_finite() || s <= 0.0 {
        return g;
    }
    for (v, dv) in values.iter().zip(grads) {
        if v.is_finite() {
            // ∂s/∂v = (s/v)^{q+1}
            g += dv * (s / v).powi(q + 1);
        }
    }
    g
}

/// One manifold piece of a stratification.
///
/// Implementors supply the metric projection `P_M`, tangent projectors, a
/// sampler and a smooth underestimate of the distance to the frontier
/// `Γ = cl M \ M`. Everything else has a finite-difference default.
pub trait Stratum: Send + Sync + fmt::Debug {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn ambient_dim(&self) -> usize;

    fn smoothness(&self) -> Smoothness {
        Smoothness::CInf
    }

    /// Metric projection onto the stratum. Fails with
    /// [`Error::NonUniqueProjection`] on ties and [`Error::Domain`] where the
    /// nearest point is not attained inside the stratum.
    fn project(&self, x: &Point) -> Result<Point>;

    /// Projector onto `T_y M` for `y ∈ M`.
    fn tangent_projector(&self, y: &Point) -> Result<OrthoProjector>;

    /// Projector onto `N_y M`.
    fn normal_projector(&self, y: &Point) -> Result<OrthoProjector> {
        Ok(self.tangent_projector(y)?.complement())
    }

    /// `D P_M(x)` as an ambient-by-ambient matrix.
    fn projection_jacobian(&self, x: &Point) -> Result<Matrix> {
        let h = 1e-6 * x.norm().max(1.0);
        fd_jacobian(|z| self.project(z), x, h)
    }

    /// Smooth pieces whose minimum underestimates `d(y, Γ)`. Empty iff the
    /// frontier is empty. The functions may be evaluated off the stratum.
    fn frontier_terms(&self, y: &Point) -> Vec<f64>;

    /// Ambient gradients of [`Stratum::frontier_terms`].
    fn frontier_term_gradients(&self, y: &Point) -> Vec<Point> {
        let n = self.frontier_terms(y).len();
        let h = 1e-7 * y.norm().max(1.0);
        (0..n)
            .map(|i| {
                fd_gradient(|z| self.frontier_terms(z).get(i).copied().unwrap_or(f64::NAN), y, h, true)
                    .unwrap_or_else(|_| Point::zeros(y.len()))
            })
            .collect()
    }

    /// Smooth surrogate of `d(y, Γ)` (q-power softmin of the terms);
    /// `+∞` when the frontier is empty.
    fn frontier_distance(&self, y: &Point) -> f64 {
        softmin(&self.frontier_terms(y), DEFAULT_SOFTMIN_ORDER)
    }

    /// A lower bound on `d(x, M)`, used to keep other strata out of a tube.
    fn distance_lower_bound(&self, x: &Point) -> f64;

    fn distance_lower_bound_gradient(&self, x: &Point) -> Point {
        let h = 1e-7 * x.norm().max(1.0);
        fd_gradient(|z| self.distance_lower_bound(z), x, h, true).unwrap_or_else(|_| Point::zeros(x.len()))
    }

    /// Points of the stratum.
    fn sample(&self, rng: &mut Rng, count: usize) -> Vec<Point>;

    /// Deterministic points that certifiers visit before random samples.
    fn anchor_points(&self) -> Vec<Point> {
        Vec::new()
    }

    /// Whether `x` lies on the stratum within `tol`.
    fn contains(&self, x: &Point, tol: f64) -> bool {
        self.project(x).map(|p| (p - x).norm() <= tol).unwrap_or(false)
    }
}

/// A finite family of strata with the frontier partial order.
#[derive(Debug, Clone)]
pub struct Stratification {
    name: String,
    strata: Vec<Arc<dyn Stratum>>,
    /// `(lower, upper)` index pairs, L ≺ M ⇔ L ⊂ cl M \ M. Transitively closed.
    frontier: BTreeSet<(usize, usize)>,
    pub claimed_whitney: bool,
    pub claimed_normally_flat: bool,
}

impl Stratification {
    /// Builds a stratification from strata and frontier pairs given by id.
    ///
    /// The relation is closed transitively. Related pairs must satisfy
    /// `dim L < dim M`.
    pub fn new(
        name: impl Into<String>,
        strata: Vec<Arc<dyn Stratum>>,
        frontier: &[(&str, &str)],
        claimed_whitney: bool,
        claimed_normally_flat: bool,
    ) -> Result<Self> {
        if strata.is_empty() {
            return Err(Error::Contract("a stratification needs at least one stratum".into()));
        }
        let ambient = strata[0].ambient_dim();
        let mut ids = BTreeSet::new();
        for s in &strata {
            if s.ambient_dim() != ambient {
                return Err(Error::Contract(format!("stratum {} lives in R^{}, expected R^{ambient}", s.id(), s.ambient_dim())));
            }
            if !ids.insert(s.id().to_string()) {
                return Err(Error::Contract(format!("duplicate stratum id {}", s.id())));
            }
        }
        let index = |id: &str| {
            strata
                .iter()
                .position(|s| s.id() == id)
                .ok_or_else(|| Error::Contract(format!("unknown stratum id {id}")))
        };
        let mut rel = BTreeSet::new();
        for (l, m) in frontier {
            rel.insert((index(l)?, index(m)?));
        }
        loop {
            let mut added = Vec::new();
            for &(a, b) in &rel {
                for &(c, d) in &rel {
                    if b == c && !rel.contains(&(a, d)) {
                        added.push((a, d));
                    }
                }
            }
            if added.is_empty() {
                break;
            }
            rel.extend(added);
        }
        for &(l, m) in &rel {
            if strata[l].dim() >= strata[m].dim() {
                return Err(Error::Contract(format!(
                    "frontier pair {} ≺ {} violates dim L < dim M ({} ≥ {})",
                    strata[l].id(),
                    strata[m].id(),
                    strata[l].dim(),
                    strata[m].dim()
                )));
            }
        }
        Ok(Stratification {
            name: name.into(),
            strata,
            frontier: rel,
            claimed_whitney,
            claimed_normally_flat,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.strata[0].ambient_dim()
    }

    pub fn strata(&self) -> &[Arc<dyn Stratum>] {
        &self.strata
    }

    pub fn stratum(&self, idx: usize) -> &Arc<dyn Stratum> {
        &self.strata[idx]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.strata
            .iter()
            .position(|s| s.id() == id)
            .ok_or_else(|| Error::Contract(format!("unknown stratum id {id}")))
    }

    pub fn related(&self, lower: usize, upper: usize) -> bool {
        self.frontier.contains(&(lower, upper))
    }

    /// All related pairs `(L, M)` with `L ≺ M`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.frontier.iter().copied().collect()
    }

    /// Indices of the strata making up `Γ = cl M \ M`.
    pub fn frontier_of(&self, upper: usize) -> Vec<usize> {
        self.frontier.iter().filter(|(_, m)| *m == upper).map(|(l, _)| *l).collect()
    }

    /// Strata of dimension `≤ dim M` that are neither `M` nor in its frontier.
    pub fn excluded_from_tube(&self, idx: usize) -> Vec<usize> {
        let d = self.strata[idx].dim();
        (0..self.len())
            .filter(|&j| j != idx && self.strata[j].dim() <= d && !self.related(j, idx))
            .collect()
    }

    /// Stratum indices by ascending dimension (stable in declaration order).
    pub fn ascending_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by_key(|&i| self.strata[i].dim());
        idx
    }

    /// Samples of each stratum must not lie on any other stratum.
    pub fn check_disjoint(&self, rng: &mut Rng, samples: usize) -> CertificationReport {
        let mut rep = CertificationReport::new("disjointness", "all", 0.0);
        for (i, s) in self.strata.iter().enumerate() {
            for x in s.sample(rng, samples) {
                rep.sample_count += 1;
                for (j, t) in self.strata.iter().enumerate() {
                    if i != j && t.contains(&x, 1e-10) {
                        rep.record(1.0, Some(&x));
                    }
                }
            }
        }
        rep.finish()
    }
}

/// Outcome of one sampled certification.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CertificationReport {
    pub condition: String,
    pub subject: String,
    pub sample_count: usize,
    pub skipped: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub vacuous: bool,
    /// True when some sequences could not be generated.
    pub partial: bool,
    pub witness: Option<Vec<f64>>,
    pub trend: Vec<f64>,
    pub parameters: BTreeMap<String, f64>,
}

impl CertificationReport {
    pub fn new(condition: impl Into<String>, subject: impl Into<String>, tolerance: f64) -> Self {
        CertificationReport {
            condition: condition.into(),
            subject: subject.into(),
            sample_count: 0,
            skipped: 0,
            max_violation: 0.0,
            tolerance,
            pass: false,
            vacuous: false,
            partial: false,
            witness: None,
            trend: Vec::new(),
            parameters: BTreeMap::new(),
        }
    }

    /// Records a violation; keeps the first witness among equal maxima.
    pub fn record(&mut self, violation: f64, witness: Option<&Point>) {
        let worse = violation > self.max_violation || (violation.is_nan() && !self.max_violation.is_nan());
        if worse {
            self.max_violation = violation;
            self.witness = witness.map(|w| w.as_slice().to_vec());
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    pub fn finish(mut self) -> Self {
        self.pass = self.max_violation <= self.tolerance;
        self
    }

    pub fn vacuous(mut self) -> Self {
        self.vacuous = true;
        self.pass = true;
        self
    }

    /// Folds several reports into one (max violation, summed counts).
    pub fn merge(condition: &str, subject: &str, reports: &[CertificationReport]) -> Self {
        let tol = reports.first().map(|r| r.tolerance).unwrap_or(0.0);
        let mut out = CertificationReport::new(condition, subject, tol);
        if reports.is_empty() {
            return out.vacuous();
        }
        out.vacuous = reports.iter().all(|r| r.vacuous);
        for r in reports {
            out.sample_count += r.sample_count;
            out.skipped += r.skipped;
            out.partial |= r.partial;
            if r.max_violation > out.max_violation || out.witness.is_none() && r.witness.is_some() && r.max_violation >= out.max_violation {
                out.max_violation = r.max_violation;
                out.witness = r.witness.clone();
            }
        }
        out.pass = reports.iter().all(|r| r.pass);
        out
    }
}

/// Options for [`check_frontier`].
#[derive(Debug, Clone, Copy)]
pub struct FrontierOptions {
    pub levels: usize,
    pub start_radius: f64,
    pub cloud: usize,
    pub tolerance: f64,
}

impl Default for FrontierOptions {
    fn default() -> Self {
        FrontierOptions { levels: 12, start_radius: 0.5, cloud: 8, tolerance: 1e-3 }
    }
}

/// Projects `count` random points of the sphere `|z − center| = radius`
/// onto `m`; failed projections are dropped.
fn cloud_near(m: &dyn Stratum, center: &Point, radius: f64, count: usize, rng: &mut Rng) -> Vec<Point> {
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 8 * count {
        tries += 1;
        let z = center + linalg::random_unit(rng, center.len()) * radius;
        if let Ok(p) = m.project(&z) {
            out.push(p);
        }
    }
    out
}

/// Frontier condition: every `x ∈ L` with `L ≺ M` is a limit of points of `M`.
///
/// For each sampled `x ∈ L` and shrinking radii `r_k = r₀ 2^{-k}` the residual
/// `min |x − P_M(z)|` over points `z` at distance `r_k` is recorded; since
/// `d(z, M) ≤ r_k` whenever `x ∈ cl M`, the residual is at most `2 r_k`.
/// The report's trend holds the per-level maximum residual.
pub fn check_frontier(a: &Stratification, samples_per_pair: usize, opts: FrontierOptions, rng: &mut Rng) -> Result<CertificationReport> {
    let pairs = a.pairs();
    let mut rep = CertificationReport::new("frontier", "all related pairs", opts.tolerance)
        .with_param("levels", opts.levels as f64)
        .with_param("start_radius", opts.start_radius);
    if pairs.is_empty() {
        return Ok(rep.vacuous());
    }
    let mut trend = vec![0.0_f64; opts.levels + 1];
    for (l, m) in pairs {
        let (ls, ms) = (a.stratum(l), a.stratum(m));
        let xs = ls.sample(rng, samples_per_pair);
        if xs.is_empty() {
            return Err(Error::Evaluation(format!("sampler of stratum {} produced no points", ls.id())));
        }
        for x in xs {
            rep.sample_count += 1;
            let mut last = f64::INFINITY;
            for (k, slot) in trend.iter_mut().enumerate() {
                let r = opts.start_radius * 0.5_f64.powi(k as i32);
                let cloud = cloud_near(ms.as_ref(), &x, r, opts.cloud, rng);
                let res = cloud.iter().map(|p| (p - &x).norm()).fold(f64::INFINITY, f64::min);
                *slot = slot.max(res);
                last = res;
            }
            if !last.is_finite() {
                rep.partial = true;
            }
            rep.record(last, Some(&x));
        }
    }
    rep.trend = trend;
    Ok(rep.finish())
}

/// Options for [`check_whitney_a`].
#[derive(Debug, Clone, Copy)]
pub struct WhitneyOptions {
    /// Approach schedule `t_k = start · 2^{-k}`, `k = 0..=steps`.
    pub steps: usize,
    pub start: f64,
    pub tolerance: f64,
}

impl Default for WhitneyOptions {
    fn default() -> Self {
        WhitneyOptions { steps: 20, start: 1.0, tolerance: 1e-3 }
    }
}

/// Whitney condition (a) for the pair `L ≺ M`.
///
/// Sequences `x_k = P_M(x̄ + t_k w) → x̄ ∈ L` are generated; the defect
/// `sup_{v ∈ N_{x_k}M, |v|=1} |P_{T_x̄ L} v| = ‖P_{T_x̄L} P_{N_{x_k}M}‖₂` is
/// recorded along the schedule. The violation is the defect at the tightest
/// approach.
pub fn check_whitney_a(
    a: &Stratification,
    lower: usize,
    upper: usize,
    sequences: usize,
    opts: WhitneyOptions,
    rng: &mut Rng,
) -> Result<CertificationReport> {
    if !a.related(lower, upper) {
        return Err(Error::Contract(format!(
            "whitney check needs {} ≺ {}",
            a.stratum(lower).id(),
            a.stratum(upper).id()
        )));
    }
    let (ls, ms) = (a.stratum(lower), a.stratum(upper));
    let subject = format!("{} < {}", ls.id(), ms.id());
    let mut rep = CertificationReport::new("whitney_a", subject, opts.tolerance)
        .with_param("steps", opts.steps as f64)
        .with_param("start", opts.start);
    let mut trend = vec![0.0_f64; opts.steps + 1];
    let n = a.ambient_dim();
    let mut bases = ls.anchor_points();
    bases.extend(ls.sample(rng, sequences));
    bases.truncate(sequences.max(1));
    for xbar in bases {
        let tl = ls.tangent_projector(&xbar)?;
        let mut w = linalg::random_unit(rng, n);
        let mut tightest = None;
        for (k, slot) in trend.iter_mut().enumerate() {
            let t = opts.start * 0.5_f64.powi(k as i32);
            let mut xk = None;
            for attempt in 0..16 {
                if attempt > 0 {
                    w = linalg::random_unit(rng, n);
                }
                if let Ok(p) = ms.project(&(&xbar + &w * t)) {
                    xk = Some(p);
                    break;
                }
            }
            let Some(xk) = xk else {
                rep.partial = true;
                continue;
            };
            let Ok(nm) = ms.normal_projector(&xk) else {
                rep.partial = true;
                continue;
            };
            let defect = linalg::spectral_norm(&(tl.matrix() * nm.matrix()));
            *slot = slot.max(defect);
            tightest = Some((defect, xk));
        }
        rep.sample_count += 1;
        match tightest {
            Some((d, xk)) => rep.record(d, Some(&xk)),
            None => rep.skipped += 1,
        }
    }
    rep.trend = trend;
    Ok(rep.finish())
}

/// Options for [`check_normal_flatness`].
#[derive(Debug, Clone, Copy)]
pub struct FlatnessOptions {
    /// Pass iff `|P_L(x) − P_L(P_M(x))| ≤ tolerance · (1 + |x|)`.
    pub tolerance: f64,
    /// Extra random normal displacements per base point, on top of the stencil.
    pub random_directions: usize,
}

impl Default for FlatnessOptions {
    fn default() -> Self {
        FlatnessOptions { tolerance: 1e-8, random_directions: 8 }
    }
}

/// Normal displacements of a base point: `±bᵢ`, `(±bᵢ ± bⱼ)/√2` over an
/// orthonormal normal basis, at radii `w, w/2, w/4`.
fn normal_stencil(basis: &[Point], width: f64) -> Vec<Point> {
    let mut dirs = Vec::new();
    for (i, bi) in basis.iter().enumerate() {
        dirs.push(bi.clone());
        dirs.push(-bi);
        for bj in &basis[i + 1..] {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            dirs.push((bi + bj) * s);
            dirs.push((bi - bj) * s);
            dirs.push((-bi + bj) * s);
            dirs.push((-bi - bj) * s);
        }
    }
    let mut out = Vec::with_capacity(3 * dirs.len());
    for f in [1.0, 0.5, 0.25] {
        out.extend(dirs.iter().map(|d| d * (width * f)));
    }
    out
}

/// Normal flatness `P_L = P_L ∘ P_M` for the pair `L ≺ M`, sampled at
/// points `x = x̄ + v` with `x̄ ∈ L`, `v ∈ N_x̄ L`, `|v| ≤ tube_width`.
///
/// Samples where a projection is tied or not attained are skipped and
/// counted.
pub fn check_normal_flatness(
    a: &Stratification,
    lower: usize,
    upper: usize,
    tube_width: f64,
    samples: usize,
    opts: FlatnessOptions,
    rng: &mut Rng,
) -> Result<CertificationReport> {
    if !a.related(lower, upper) {
        return Err(Error::Contract(format!(
            "flatness check needs {} ≺ {}",
            a.stratum(lower).id(),
            a.stratum(upper).id()
        )));
    }
    let (ls, ms) = (a.stratum(lower), a.stratum(upper));
    let subject = format!("{} < {}", ls.id(), ms.id());
    let mut rep = CertificationReport::new("normal_flatness", subject, opts.tolerance).with_param("tube_width", tube_width);
    let mut bases = ls.anchor_points();
    bases.extend(ls.sample(rng, samples));
    let mut uniq: Vec<Point> = Vec::new();
    for b in bases {
        if !uniq.iter().any(|u| u == &b) {
            uniq.push(b);
        }
    }
    let n = a.ambient_dim();
    for xbar in uniq {
        let np = ls.normal_projector(&xbar)?;
        let basis = np.range_basis();
        let mut disp = normal_stencil(&basis, tube_width);
        for _ in 0..opts.random_directions {
            let v = np.apply(&linalg::gaussian_vector(rng, n));
            let nv = v.norm();
            if nv > 1e-12 {
                let r: f64 = rand::Rng::random_range(rng, 0.0..1.0);
                disp.push(v * (tube_width * r / nv));
            }
        }
        for v in disp {
            let x = &xbar + v;
            let pl = ls.project(&x);
            let pm = ms.project(&x);
            let (Ok(pl), Ok(pm)) = (pl, pm) else {
                rep.skipped += 1;
                continue;
            };
            let Ok(plm) = ls.project(&pm) else {
                rep.skipped += 1;
                continue;
            };
            rep.sample_count += 1;
            let viol = (pl - plm).norm() / (1.0 + x.norm());
            rep.record(viol, Some(&x));
        }
    }
    if rep.sample_count == 0 {
        rep.partial = true;
        rep.max_violation = f64::NAN;
        rep.pass = false;
        return Ok(rep);
    }
    Ok(rep.finish())
}

/// The stratum's smooth frontier-distance surrogate at `x ∈ M`
/// (`+∞` if the frontier is empty).
pub fn stratum_distance_to_frontier(m: &dyn Stratum, x: &Point) -> Result<f64> {
    if !m.contains(x, 1e-8 * (1.0 + x.norm())) {
        return Err(Error::Domain(format!("point is not on stratum {}", m.id())));
    }
    Ok(m.frontier_distance(x))
}

/// Cross-checks that the surrogate of stratum `idx` underestimates an upper
/// bound on `d(y, L)` for every `L ≺ M`, built from `L`'s samples and
/// projection.
pub fn validate_frontier_surrogate(a: &Stratification, idx: usize, samples: usize, rng: &mut Rng) -> CertificationReport {
    let m = a.stratum(idx);
    let mut rep = CertificationReport::new("frontier_surrogate", m.id().to_string(), 1e-10);
    let lowers = a.frontier_of(idx);
    if lowers.is_empty() {
        return rep.vacuous();
    }
    let clouds: Vec<Vec<Point>> = lowers.iter().map(|&l| a.stratum(l).sample(rng, 256)).collect();
    for y in m.sample(rng, samples) {
        rep.sample_count += 1;
        let s = m.frontier_distance(&y);
        let mut upper = f64::INFINITY;
        for (k, &l) in lowers.iter().enumerate() {
            for p in &clouds[k] {
                upper = upper.min((p - &y).norm());
            }
            if let Ok(p) = a.stratum(l).project(&y) {
                upper = upper.min((p - &y).norm());
            }
        }
        rep.record((s - upper).max(0.0), Some(&y));
    }
    rep.finish()
}
