//! The induction step `g = φ·(f∘P_M) + (1 − φ)·f` and the drivers that apply
//! it stratum by stratum.

use std::fmt;
use std::sync::Arc;

use rand::{Rng as _, SeedableRng};
use serde::Serialize;

use crate::bump::Bump;
use crate::error::{Error, Result};
use crate::fields::{ScalarField, Support};
use crate::linalg::{self, Point};
use crate::strata::{self, CertificationReport, FlatnessOptions, FrontierOptions, Stratification};
use crate::tube::{self, Confinement, TubeCertificate, TubeSpec, TubeTarget};
use crate::{Rng, Smoothness};

/// Lipschitz inflation of one induction step.
pub const STAGE_LIP_FACTOR: f64 = 12.0;
/// Largest ambient dimension accepted by [`pre_smooth`].
pub const PRE_SMOOTH_MAX_DIM: usize = 3;

/// Gaussian quasi-interpolant `Σ wⱼ(x) f(zⱼ) / Σ wⱼ(x)` over the grid
/// `zⱼ ∈ hℤⁿ`, `wⱼ = exp(−|x − zⱼ|²/2b²)`, `h = b/2`.
#[derive(Debug, Clone)]
pub struct PreSmoothed {
    inner: Arc<dyn ScalarField>,
    bandwidth: f64,
    spacing: f64,
    window: f64,
    lip_slack: f64,
}

impl PreSmoothed {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Weighted sums `(W, Σ w f, Σ w (z − x), Σ w f (z − x))`.
    fn sums(&self, x: &Point) -> Result<(f64, f64, Point, Point)> {
        let n = x.len();
        let h = self.spacing;
        let lo: Vec<i64> = x.iter().map(|v| ((v - self.window) / h).ceil() as i64).collect();
        let hi: Vec<i64> = x.iter().map(|v| ((v + self.window) / h).floor() as i64).collect();
        let mut idx = lo.clone();
        let (mut w_sum, mut wf) = (0.0, 0.0);
        let mut wd = Point::zeros(n);
        let mut wfd = Point::zeros(n);
        let inv = 1.0 / (2.0 * self.bandwidth * self.bandwidth);
        loop {
            let z = Point::from_iterator(n, idx.iter().map(|&k| k as f64 * h));
            let d = &z - x;
            let w = (-d.norm_squared() * inv).exp();
            if w > 0.0 {
                let fz = self.inner.eval(&z)?;
                w_sum += w;
                wf += w * fz;
                wd += &d * w;
                wfd += &d * (w * fz);
            }
            // odometer over the window
            let mut k = 0;
            loop {
                if k == n {
                    return Ok((w_sum, wf, wd, wfd));
                }
                idx[k] += 1;
                if idx[k] <= hi[k] {
                    break;
                }
                idx[k] = lo[k];
                k += 1;
            }
        }
    }
}

impl ScalarField for PreSmoothed {
    fn name(&self) -> String {
        format!("presmooth[{}; b={:.3e}]", self.inner.name(), self.bandwidth)
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, x: &Point) -> Result<f64> {
        let (w, wf, _, _) = self.sums(x)?;
        Ok(wf / w)
    }
    fn grad(&self, x: &Point) -> Result<Point> {
        let (w, wf, wd, wfd) = self.sums(x)?;
        let f = wf / w;
        let b2 = self.bandwidth * self.bandwidth;
        Ok((wfd / w - wd * (f / w)) / b2)
    }
    fn analytic_grad(&self) -> bool {
        true
    }
    fn lip(&self, radius: f64) -> f64 {
        self.inner.lip(radius + self.window) + self.lip_slack
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::CInf
    }
    fn support(&self) -> Support {
        Support::Everywhere
    }
}

/// Replaces a Lipschitz field by a `C^∞` one within `eps_floor`, with
/// `lip f̂ ≤ lip f + slack`.
///
/// The bandwidth is `b = eps_floor / (2 · lip f · √n)`, so that
/// `|f − f̂| ≤ lip f · E|x − z| < lip f · b · √n ≤ eps_floor / 2`.
pub fn pre_smooth(f: Arc<dyn ScalarField>, eps_floor: f64, slack: f64, radius: f64) -> Result<Arc<dyn ScalarField>> {
    let n = f.dim();
    if n > PRE_SMOOTH_MAX_DIM {
        return Err(Error::Refused(format!(
            "pre-smoothing by grid quadrature is limited to dimension {PRE_SMOOTH_MAX_DIM} (got {n}); supply a smooth field and disable pre-smoothing"
        )));
    }
    if !(eps_floor > 0.0) {
        return Err(Error::Contract("pre-smoothing needs a positive ε floor".into()));
    }
    let lip = f.lip(radius);
    if !lip.is_finite() {
        return Err(Error::Refused(format!("field {} has no finite Lipschitz bound", f.name())));
    }
    if lip == 0.0 {
        return Ok(f);
    }
    let bandwidth = eps_floor / (2.0 * lip * (n as f64).sqrt());
    Ok(Arc::new(PreSmoothed { inner: f, bandwidth, spacing: 0.5 * bandwidth, window: 8.0 * bandwidth, lip_slack: slack }))
}

/// One induction step around a validated tube.
#[derive(Clone)]
pub struct InductionStep {
    inner: Arc<dyn ScalarField>,
    tube: TubeSpec,
    claim: Smoothness,
}

impl fmt::Debug for InductionStep {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("InductionStep")
            .field("stratum", &self.tube.stratum().id())
            .field("scale", &self.tube.scale)
            .field("inner", &self.inner.name())
            .finish()
    }
}

impl InductionStep {
    /// Wraps `f` around a validated tube.
    pub fn new(inner: Arc<dyn ScalarField>, tube: TubeSpec, claim: Smoothness) -> Result<Self> {
        if !tube.is_validated() {
            return Err(Error::Contract(format!("tube around {} has not been validated", tube.stratum().id())));
        }
        Ok(InductionStep { inner, tube, claim })
    }

    pub fn tube(&self) -> &TubeSpec {
        &self.tube
    }
}

impl ScalarField for InductionStep {
    fn name(&self) -> String {
        format!("stage[{}]", self.tube.stratum().id())
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, x: &Point) -> Result<f64> {
        let Some(tp) = self.tube.membership(x) else {
            return self.inner.eval(x);
        };
        let phi = Bump::standard().psi(tp.ratio)?;
        if phi == 0.0 {
            return self.inner.eval(x);
        }
        let fy = self.inner.eval(&tp.y)?;
        if phi == 1.0 {
            return Ok(fy);
        }
        Ok(phi * fy + (1.0 - phi) * self.inner.eval(x)?)
    }
    /// `∇g = φ DP_Mᵀ ∇f(P_M x) + (1 − φ) ∇f(x) + (f(P_M x) − f(x)) ∇φ`.
    fn grad(&self, x: &Point) -> Result<Point> {
        let Some(tp) = self.tube.membership(x) else {
            return self.inner.grad(x);
        };
        let bump = Bump::standard();
        let phi = bump.psi(tp.ratio)?;
        if phi == 0.0 {
            return self.inner.grad(x);
        }
        let dp = self.tube.stratum().projection_jacobian(x)?;
        let mut g = dp.transpose() * self.inner.grad(&tp.y)? * phi;
        if phi < 1.0 {
            g += self.inner.grad(x)? * (1.0 - phi);
        }
        if bump.psi_prime(tp.ratio)? != 0.0 {
            let diff = self.inner.eval(&tp.y)? - self.inner.eval(x)?;
            g += self.tube.grad_phi(x)? * diff;
        }
        Ok(g)
    }
    fn analytic_grad(&self) -> bool {
        self.inner.analytic_grad()
    }
    fn lip(&self, radius: f64) -> f64 {
        STAGE_LIP_FACTOR * self.inner.lip(radius)
    }
    fn smoothness(&self) -> Smoothness {
        self.claim
    }
    fn support(&self) -> Support {
        self.inner.support()
    }
}

/// How to treat the input field before the stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PreSmoothMode {
    /// Smooth only if the input is less regular than the target.
    #[default]
    Auto,
    Always,
    Never,
}

/// Options of [`smooth_approximate`].
#[derive(Debug, Clone, Serialize)]
pub struct SmoothingOptions {
    pub confinement: Confinement,
    /// `None` for the Whitney pipeline (`C¹` output), `Some(p)` with `p ≥ 2`
    /// for the normally flat pipeline.
    pub target_order: Option<u32>,
    pub pre_smooth: PreSmoothMode,
    /// Sampling box `|xᵢ| ≤ box_radius` for ε checks and ledgers.
    pub box_radius: f64,
    pub initial_scale: f64,
    pub validation_samples: usize,
    pub certify_samples: usize,
    pub flat_check_samples: usize,
    pub seed: u64,
}

impl Default for SmoothingOptions {
    fn default() -> Self {
        SmoothingOptions {
            confinement: Confinement::default(),
            target_order: None,
            pre_smooth: PreSmoothMode::Auto,
            box_radius: 1.0,
            initial_scale: tube::DEFAULT_SCALE,
            validation_samples: 200,
            certify_samples: 20,
            flat_check_samples: 40,
            seed: 0,
        }
    }
}

/// Metadata of one stage.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stratum: String,
    pub dim: usize,
    /// The stratum is open in the ambient space, so the stage changes nothing.
    pub identity: bool,
    pub budget_share: f64,
    pub certificate: TubeCertificate,
    pub flat_check: Vec<CertificationReport>,
    pub lip_bound: f64,
}

/// Serializable description of a [`SmoothedField`].
#[derive(Debug, Clone, Serialize)]
pub struct SmoothingMetadata {
    pub stratification: String,
    pub base_field: String,
    pub strata_count: usize,
    pub pre_smoothing: String,
    pub pre_smoothing_bandwidth: Option<f64>,
    pub smoothness: Smoothness,
    pub lip_radius: f64,
    pub base_lip: f64,
    pub lip_ledger: Vec<f64>,
    pub certification: Vec<CertificationReport>,
    pub stages: Vec<StageRecord>,
}

/// The output `g` of the pipeline together with its stages.
#[derive(Debug, Clone)]
pub struct SmoothedField {
    base: Arc<dyn ScalarField>,
    top: Arc<dyn ScalarField>,
    /// Tube per stratum index (identity stages included).
    tubes: Vec<Option<TubeSpec>>,
    meta: SmoothingMetadata,
}

impl SmoothedField {
    pub fn base(&self) -> &Arc<dyn ScalarField> {
        &self.base
    }

    pub fn metadata(&self) -> &SmoothingMetadata {
        &self.meta
    }

    /// The validated tube of the stage on stratum `idx`.
    pub fn tube(&self, idx: usize) -> Option<&TubeSpec> {
        self.tubes.get(idx).and_then(|t| t.as_ref())
    }

    /// Upper bound on `lip g` after all stages.
    pub fn lip_bound(&self) -> f64 {
        self.meta.lip_ledger.last().copied().unwrap_or(self.meta.base_lip)
    }
}

impl ScalarField for SmoothedField {
    fn name(&self) -> String {
        format!("smoothed[{}]", self.base.name())
    }
    fn dim(&self) -> usize {
        self.top.dim()
    }
    fn eval(&self, x: &Point) -> Result<f64> {
        self.top.eval(x)
    }
    fn grad(&self, x: &Point) -> Result<Point> {
        self.top.grad(x)
    }
    fn analytic_grad(&self) -> bool {
        self.top.analytic_grad()
    }
    fn lip(&self, radius: f64) -> f64 {
        self.top.lip(radius)
    }
    fn smoothness(&self) -> Smoothness {
        self.meta.smoothness
    }
    fn support(&self) -> Support {
        self.top.support()
    }
}

fn abort(stage: &str, reason: impl fmt::Display) -> Error {
    Error::PipelineAbort { stage: stage.to_string(), reason: reason.to_string() }
}

/// Smallest sampled `ε` on the box, failing if any sample is non-positive.
pub fn epsilon_floor(eps: &dyn ScalarField, radius: f64, samples: usize, rng: &mut Rng) -> Result<f64> {
    let mut lo = f64::INFINITY;
    let n = eps.dim();
    let mut pts = vec![Point::zeros(n)];
    pts.extend((0..samples).map(|_| linalg::uniform_box(rng, n, radius)));
    for x in pts {
        let e = eval_finite(eps, &x)?;
        if !(e > 0.0) {
            return Err(Error::Contract(format!("ε must be positive, got {e} at {:?}", x.as_slice())));
        }
        lo = lo.min(e);
    }
    Ok(lo)
}

fn eval_finite(f: &dyn ScalarField, x: &Point) -> Result<f64> {
    let v = f.eval(x)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation(format!("{} is not finite at {:?}", f.name(), x.as_slice())))
    }
}

/// Residuals `|g(x̄ + t v) − g(x̄)|` for `x̄ ∈ L`, `v ∈ N_x̄ L`,
/// `|t| ≤ δ_L(x̄)/4`, using the tube of `L`'s stage.
fn fibre_constancy(
    g: &dyn ScalarField,
    a: &Stratification,
    lower: usize,
    tube_l: &TubeSpec,
    samples: usize,
    rng: &mut Rng,
) -> Result<CertificationReport> {
    let l = a.stratum(lower);
    let mut rep = CertificationReport::new("local_constancy", l.id().to_string(), 1e-9);
    if l.dim() == l.ambient_dim() {
        return Ok(rep.vacuous());
    }
    let mut bases = l.anchor_points();
    bases.extend(l.sample(rng, samples));
    bases.truncate(samples.max(1));
    let mut max_second: f64 = 0.0;
    for xb in bases {
        let w = tube_l.width(&xb)?;
        let np = l.normal_projector(&xb)?;
        let v = np.apply(&linalg::gaussian_vector(rng, xb.len()));
        let nv = v.norm();
        if nv < 1e-12 || !(w > 0.0) {
            rep.skipped += 1;
            continue;
        }
        let v = v / nv;
        let tmin = 0.25 * w;
        let t = rng.random_range(-tmin..tmin);
        let g0 = g.eval(&xb)?;
        let gt = g.eval(&(&xb + &v * t))?;
        rep.sample_count += 1;
        rep.record((gt - g0).abs(), Some(&xb));
        let h = 0.5 * tmin;
        let gp = g.eval(&(&xb + &v * h))?;
        let gm = g.eval(&(&xb - &v * h))?;
        // differences at rounding level are not curvature
        let floor = 4.0 * f64::EPSILON * (1.0 + g0.abs());
        let (dp, dm) = (gp - g0, gm - g0);
        if dp.abs() > floor || dm.abs() > floor {
            max_second = max_second.max(((dp + dm) / (h * h)).abs());
        }
    }
    rep.parameters.insert("max_second_directional".into(), max_second);
    Ok(rep.finish())
}

/// Runs certification and all stages.
///
/// The Whitney pipeline (`target_order = None`) yields a `C¹` field when the
/// stratification is claimed Whitney and a Fréchet-differentiable one
/// otherwise. The normally flat pipeline (`target_order = Some(p)`) needs a
/// claimed and certified normally flat stratification; each stage's tube is
/// shrunk until `g` stays constant on the normal fibres of all lower strata.
pub fn smooth_approximate(
    f: Arc<dyn ScalarField>,
    eps: Arc<dyn ScalarField>,
    a: &Stratification,
    options: &SmoothingOptions,
) -> Result<SmoothedField> {
    let n = a.ambient_dim();
    if f.dim() != n || eps.dim() != n {
        return Err(Error::Contract(format!("field dimension {} / ε dimension {} ≠ ambient {n}", f.dim(), eps.dim())));
    }
    let mut rng = Rng::seed_from_u64(options.seed);
    let eps_floor = epsilon_floor(eps.as_ref(), options.box_radius, 256, &mut rng)?;
    let flat = match options.target_order {
        None | Some(0) | Some(1) => false,
        Some(_) => true,
    };

    // certification before any stage
    let mut certification = Vec::new();
    let fr = strata::check_frontier(a, options.certify_samples, FrontierOptions::default(), &mut rng)
        .map_err(|e| abort("certify", e))?;
    let fr_pass = fr.pass;
    let fr_violation = fr.max_violation;
    certification.push(fr);
    if !fr_pass {
        return Err(abort("certify", format!("frontier condition fails (max residual {fr_violation:e})")));
    }
    if flat {
        if !a.claimed_normally_flat {
            return Err(abort("certify", "C^p output needs a stratification claimed normally flat"));
        }
        for (l, m) in a.pairs() {
            let rep = strata::check_normal_flatness(a, l, m, 0.1, options.certify_samples, FlatnessOptions::default(), &mut rng)
                .map_err(|e| abort("certify", e))?;
            let (pass, v) = (rep.pass, rep.max_violation);
            certification.push(rep);
            if !pass {
                return Err(abort(
                    "certify",
                    format!("normal flatness fails for {} < {} (max violation {v:e})", a.stratum(l).id(), a.stratum(m).id()),
                ));
            }
        }
    }

    let count = a.len();
    let share = 1.0 / (count as f64 + 1.0);
    let target_smoothness = if flat {
        Smoothness::from_order(options.target_order.unwrap_or(2))
    } else if a.claimed_whitney {
        Smoothness::C1
    } else {
        Smoothness::Frechet
    };
    let lip_radius = options.box_radius * (n as f64).sqrt();
    let base_lip = f.lip(lip_radius);

    // pre-smoothing
    let needs = match options.pre_smooth {
        PreSmoothMode::Always => true,
        PreSmoothMode::Never => false,
        PreSmoothMode::Auto => f.smoothness().order() < target_smoothness.order().max(1),
    };
    let (mut current, pre_note, pre_bw) = if needs {
        let g = pre_smooth(f.clone(), eps_floor * share, 0.01, lip_radius).map_err(|e| abort("pre-smooth", e))?;
        let bw = (eps_floor * share) / (2.0 * base_lip.max(f64::MIN_POSITIVE) * (n as f64).sqrt());
        (g, "applied".to_string(), Some(bw))
    } else {
        let note = match options.pre_smooth {
            PreSmoothMode::Never => "skipped (disabled)",
            _ => "skipped (input already smooth)",
        };
        (f.clone(), note.to_string(), None)
    };
    let mut lip = if needs { base_lip + 0.01 } else { base_lip };
    let mut lip_ledger = vec![lip];

    let mut tubes: Vec<Option<TubeSpec>> = vec![None; count];
    let mut stages = Vec::new();
    for idx in a.ascending_order() {
        let m = a.stratum(idx).clone();
        let id = m.id().to_string();
        let mut spec = TubeSpec::new(a, idx, options.confinement.clone()).with_scale(options.initial_scale);
        if m.dim() == n {
            spec.accept_trivial(share);
            stages.push(StageRecord {
                stratum: id,
                dim: m.dim(),
                identity: true,
                budget_share: share,
                certificate: spec.certificate().cloned().expect("trivial certificate"),
                flat_check: Vec::new(),
                lip_bound: lip,
            });
            lip_ledger.push(lip);
            tubes[idx] = Some(spec);
            continue;
        }
        let lower = a.frontier_of(idx);
        let mut attempt = 0;
        let (step, flat_check) = loop {
            let target = TubeTarget { field: current.as_ref(), epsilon: eps.as_ref(), share };
            tube::validate_tube(&mut spec, &target, options.validation_samples, &mut rng).map_err(|e| abort(&id, e))?;
            let step = InductionStep::new(current.clone(), spec.clone(), target_smoothness).map_err(|e| abort(&id, e))?;
            if !flat || lower.is_empty() {
                break (step, Vec::new());
            }
            let mut reports = Vec::new();
            for &l in &lower {
                let tl = tubes[l].as_ref().expect("lower strata are processed first");
                reports.push(fibre_constancy(&step, a, l, tl, options.flat_check_samples, &mut rng).map_err(|e| abort(&id, e))?);
            }
            if reports.iter().all(|r| r.pass) {
                break (step, reports);
            }
            attempt += 1;
            if attempt > tube::MAX_HALVINGS {
                let worst = reports.iter().map(|r| r.max_violation).fold(0.0, f64::max);
                return Err(abort(&id, format!("g ≠ g∘P_L near lower strata after {attempt} halvings (residual {worst:e})")));
            }
            let halved = 0.5 * spec.scale;
            spec = spec.with_scale(halved);
        };
        lip *= STAGE_LIP_FACTOR;
        lip_ledger.push(lip);
        stages.push(StageRecord {
            stratum: id,
            dim: m.dim(),
            identity: false,
            budget_share: share,
            certificate: spec.certificate().cloned().expect("validated"),
            flat_check,
            lip_bound: lip,
        });
        tubes[idx] = Some(spec);
        current = Arc::new(step);
    }

    let meta = SmoothingMetadata {
        stratification: a.name().to_string(),
        base_field: f.name(),
        strata_count: count,
        pre_smoothing: pre_note,
        pre_smoothing_bandwidth: pre_bw,
        smoothness: target_smoothness,
        lip_radius,
        base_lip,
        lip_ledger,
        certification,
        stages,
    };
    Ok(SmoothedField { base: f, top: current, tubes, meta })
}

/// `g` is constant along normal fibres near each stratum: for sampled
/// `x ∈ M`, unit `v ∈ N_xM` and `|t| ≤ δ_M(x)/4`, `|g(x + tv) − g(x)| ≤ 1e-9`.
/// The report also records the largest finite-difference second derivative
/// along `v`.
pub fn check_local_constancy(g: &SmoothedField, a: &Stratification, idx: usize, samples: usize, rng: &mut Rng) -> Result<CertificationReport> {
    let tube = g
        .tube(idx)
        .ok_or_else(|| Error::Contract(format!("no stage for stratum {}", a.stratum(idx).id())))?;
    fibre_constancy(g, a, idx, tube, samples, rng)
}

/// Relative normal component `|P_N ∇g(x)| / (1 + |∇g(x)|)` of the
/// finite-difference gradient at `x ∈ M`.
///
/// The step is `1e-6·max(1, |x|)`, shrunk to `δ_M(x)/16` so the stencil
/// stays where `g = g∘P_M`.
pub fn tangency_residual(g: &SmoothedField, a: &Stratification, idx: usize, x: &Point) -> Result<f64> {
    let m = a.stratum(idx);
    let mut h = 1e-6 * x.norm().max(1.0);
    if let Some(w) = g.tube(idx).and_then(|t| t.width(x).ok()).filter(|w| *w > 0.0) {
        h = h.min(w / 16.0);
    }
    let grad = linalg::fd_gradient(|z| g.eval(z).unwrap_or(f64::NAN), x, h, true)?;
    let normal = m.normal_projector(x)?.apply(&grad);
    Ok(normal.norm() / (1.0 + grad.norm()))
}
