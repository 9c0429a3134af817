//! Configuration-driven runs: certify, build `g`, verify, write
//! `report.json` and `samples.csv`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::catalog;
use crate::error::{Error, Result};
use crate::fields::{self, ScalarField};
use crate::linalg::{self, Matrix, Point};
use crate::moore_penrose::{self, ProbeRow};
use crate::smoothing::{self, PreSmoothMode, SmoothedField, SmoothingMetadata, SmoothingOptions, STAGE_LIP_FACTOR};
use crate::strata::{self, CertificationReport, FlatnessOptions, FrontierOptions, Stratification, WhitneyOptions};
use crate::tube::{Confinement, TubeCertificate};
use crate::Rng;

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CERTIFICATION: i32 = 2;
pub const EXIT_ABORT: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Tolerance of the on-stratum tangency residual.
pub const TANGENCY_TOL: f64 = 1e-5;
/// Tolerance of the normal second derivative in constancy checks.
pub const SECOND_DERIVATIVE_TOL: f64 = 1e-5;

/// Built-in fields. Matrix fields use row-major coordinates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant { value: f64 },
    Coordinate { index: usize },
    Affine { coeffs: Vec<f64>, #[serde(default)] offset: f64 },
    Frobsq,
    Det,
    Distance { center: Vec<f64> },
    Abs { index: usize },
    Bump { center: Vec<f64>, radius: f64, height: f64 },
}

impl FieldSpec {
    /// Instantiates the field on the ambient space of `a`.
    pub fn build(&self, a: &Stratification) -> Result<Arc<dyn ScalarField>> {
        let n = a.ambient_dim();
        let check_len = |v: &[f64], what: &str| {
            if v.len() == n {
                Ok(Point::from_vec(v.to_vec()))
            } else {
                Err(Error::Config(format!("{what} has length {} but the ambient dimension is {n}", v.len())))
            }
        };
        Ok(match self {
            FieldSpec::Constant { value } => Arc::new(fields::Constant { dim: n, value: *value }),
            FieldSpec::Coordinate { index } => {
                Arc::new(fields::Affine::coordinate(n, *index).map_err(|e| Error::Config(e.to_string()))?)
            }
            FieldSpec::Affine { coeffs, offset } => Arc::new(fields::Affine { coeffs: check_len(coeffs, "coeffs")?, offset: *offset }),
            FieldSpec::Frobsq => Arc::new(fields::FrobSq { dim: n }),
            FieldSpec::Det => {
                let (r, c) = catalog::matrix_shape(a)
                    .ok_or_else(|| Error::Config(format!("det needs a matrix problem, got {}", a.name())))?;
                if r != c {
                    return Err(Error::Config(format!("det needs square matrices, got {r}×{c}")));
                }
                Arc::new(fields::Det { n: r })
            }
            FieldSpec::Distance { center } => Arc::new(fields::DistanceToPoint { center: check_len(center, "center")? }),
            FieldSpec::Abs { index } => {
                if *index >= n {
                    return Err(Error::Config(format!("abs index {index} out of range for dimension {n}")));
                }
                Arc::new(fields::AbsCoordinate { dim: n, index: *index })
            }
            FieldSpec::Bump { center, radius, height } => {
                if !(*radius > 0.0) {
                    return Err(Error::Config("bump radius must be positive".into()));
                }
                Arc::new(fields::CompactBump { center: check_len(center, "center")?, radius: *radius, height: *height })
            }
        })
    }
}

/// `ε` as a number or a built-in field.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum EpsilonSpec {
    Constant(f64),
    Field(FieldSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub support_box: Option<f64>,
    pub freeze_width: Option<f64>,
    pub target_order: Option<u32>,
    pub pre_smooth: PreSmoothMode,
    pub bessel_delta: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { support_box: None, freeze_width: None, target_order: None, pre_smooth: PreSmoothMode::Auto, bessel_delta: 3.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub seed: u64,
    pub box_radius: f64,
    pub closeness: usize,
    pub per_stratum: usize,
    pub lipschitz_pairs: usize,
    pub validation: usize,
    pub certify: usize,
    pub csv_rows: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            seed: 0,
            box_radius: 1.0,
            closeness: 2000,
            per_stratum: 50,
            lipschitz_pairs: 2000,
            validation: 200,
            certify: 20,
            csv_rows: 200,
        }
    }
}

/// Sweep through a matrix stratum checked by the observable probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableCheck {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub steps: usize,
    /// Rows with `σ_min ≤ window` enter the oscillation.
    pub window: f64,
    #[serde(default = "default_oscillation_tol")]
    pub tolerance: f64,
    #[serde(default = "default_growth_tol")]
    pub growth_tolerance: f64,
}

fn default_oscillation_tol() -> f64 {
    1e-4
}

fn default_growth_tol() -> f64 {
    2.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksConfig {
    pub whitney: bool,
    pub flatness: bool,
    pub flatness_width: Option<f64>,
    pub constancy: bool,
    pub observable: Option<ObservableCheck>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsConfig {
    pub dir: PathBuf,
    pub report: String,
    pub samples: String,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig { dir: PathBuf::from("out"), report: "report.json".into(), samples: "samples.csv".into() }
    }
}

/// A run configuration, read from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    pub field: FieldSpec,
    pub epsilon: EpsilonSpec,
    #[serde(default)]
    pub options: RunOptions,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// Reads a config; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.base_dir.join(&self.outputs.dir)
    }
}

/// A loaded problem: stratification, `f` and `ε`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub stratification: Stratification,
    pub field: Arc<dyn ScalarField>,
    pub epsilon: Arc<dyn ScalarField>,
    pub epsilon_floor: f64,
}

impl Problem {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let a = catalog::load(&cfg.problem, &cfg.base_dir)?;
        let field = cfg.field.build(&a)?;
        let epsilon = match &cfg.epsilon {
            EpsilonSpec::Constant(v) => Arc::new(fields::Constant { dim: a.ambient_dim(), value: *v }) as Arc<dyn ScalarField>,
            EpsilonSpec::Field(spec) => spec.build(&a)?,
        };
        let mut rng = Rng::seed_from_u64(cfg.sampling.seed ^ 0x5eed);
        let epsilon_floor = smoothing::epsilon_floor(epsilon.as_ref(), cfg.sampling.box_radius, 256, &mut rng)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(Problem { stratification: a, field, epsilon, epsilon_floor })
    }

    pub fn smoothing_options(&self, cfg: &RunConfig) -> SmoothingOptions {
        SmoothingOptions {
            confinement: Confinement { support_box: cfg.options.support_box, freeze_width: cfg.options.freeze_width },
            target_order: cfg.options.target_order,
            pre_smooth: cfg.options.pre_smooth,
            box_radius: cfg.sampling.box_radius,
            validation_samples: cfg.sampling.validation,
            certify_samples: cfg.sampling.certify,
            seed: cfg.sampling.seed,
            ..SmoothingOptions::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificates {
    pub frontier: Option<CertificationReport>,
    pub whitney: Vec<CertificationReport>,
    pub flatness: Vec<CertificationReport>,
    pub tubes: Vec<TubeCertificate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosenessMetric {
    pub samples: usize,
    pub max_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TangencyMetric {
    pub stratum: String,
    pub samples: usize,
    pub skipped: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzMetric {
    pub pairs: usize,
    pub sampled: f64,
    pub base_lip: f64,
    /// `13^{m+1} · lip f`.
    pub theorem_bound: f64,
    /// `12^m · (lip f + 0.01)`, checked only when pre-smoothing was skipped.
    pub ledger_bound: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObservableMetric {
    pub rows: usize,
    pub oscillation: f64,
    pub growth_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    pub closeness: ClosenessMetric,
    pub tangency: Vec<TangencyMetric>,
    pub lipschitz: LipschitzMetric,
    pub constancy: Vec<CertificationReport>,
    pub observable: Option<ObservableMetric>,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub status: String,
    pub problem: String,
    pub field: FieldSpec,
    pub epsilon_floor: f64,
    pub seed: u64,
    pub certificates: Certificates,
    pub metrics: Option<Metrics>,
    pub smoothing: Option<SmoothingMetadata>,
    pub failures: Vec<String>,
    pub pass: bool,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        match self.status.as_str() {
            "pass" => EXIT_PASS,
            "abort" => EXIT_ABORT,
            _ => EXIT_CERTIFICATION,
        }
    }
}

/// Exit code for an error escaping a run.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_ABORT,
    }
}

/// Frontier, Whitney and flatness certificates as configured.
pub fn certify_geometry(cfg: &RunConfig, a: &Stratification, rng: &mut Rng) -> Result<Certificates> {
    let frontier = Some(strata::check_frontier(a, cfg.sampling.certify, FrontierOptions::default(), rng)?);
    let mut whitney = Vec::new();
    let mut flatness = Vec::new();
    for (l, m) in a.pairs() {
        if cfg.checks.whitney {
            whitney.push(strata::check_whitney_a(a, l, m, cfg.sampling.certify, WhitneyOptions::default(), rng)?);
        }
        if cfg.checks.flatness {
            let w = cfg.checks.flatness_width.unwrap_or(0.1);
            flatness.push(strata::check_normal_flatness(a, l, m, w, cfg.sampling.certify, FlatnessOptions::default(), rng)?);
        }
    }
    Ok(Certificates { frontier, whitney, flatness, tubes: Vec::new() })
}

fn tangency_metrics(g: &SmoothedField, a: &Stratification, samples: usize, rng: &mut Rng) -> Vec<TangencyMetric> {
    let mut out = Vec::new();
    for (idx, s) in a.strata().iter().enumerate() {
        if s.dim() == s.ambient_dim() {
            continue;
        }
        let mut pts = s.anchor_points();
        pts.extend(s.sample(rng, samples));
        pts.truncate(samples.max(1));
        let (mut worst, mut skipped, mut count): (f64, usize, usize) = (0.0, 0, 0);
        for x in &pts {
            match smoothing::tangency_residual(g, a, idx, x) {
                Ok(r) if r.is_finite() => {
                    worst = worst.max(r);
                    count += 1;
                }
                _ => skipped += 1,
            }
        }
        out.push(TangencyMetric {
            stratum: s.id().to_string(),
            samples: count,
            skipped,
            max_residual: worst,
            tolerance: TANGENCY_TOL,
            pass: worst <= TANGENCY_TOL && count > 0,
        });
    }
    out
}

fn matrix_from(entries: &[f64], a: &Stratification) -> Result<Matrix> {
    let (n, m) = catalog::matrix_shape(a).ok_or_else(|| Error::Config(format!("{} is not a matrix problem", a.name())))?;
    if entries.len() != n * m {
        return Err(Error::Config(format!("expected {} matrix entries, got {}", n * m, entries.len())));
    }
    Ok(linalg::unflatten(&Point::from_vec(entries.to_vec()), n, m))
}

/// Closeness samples kept for `samples.csv`.
struct Sample {
    x: Point,
    f: f64,
    g: f64,
    eps: f64,
    grad_norm: f64,
}

fn write_samples(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let n = samples.first().map(|s| s.x.len()).unwrap_or(0);
    let mut header: Vec<String> = vec!["index".into()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend(["f", "g", "epsilon", "ratio", "grad_norm"].map(String::from));
    w.write_record(&header)?;
    for (i, s) in samples.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(s.x.iter().map(|v| format!("{v:e}")));
        row.extend([s.f, s.g, s.eps, (s.f - s.g).abs() / s.eps, s.grad_norm].map(|v| format!("{v:e}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Result of [`run`]: the report and the files written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub report_path: PathBuf,
    pub samples_path: Option<PathBuf>,
}

/// Certify, build, verify; writes `report.json` and `samples.csv` into
/// `out_dir` (the configured directory when `None`).
pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let problem = Problem::load(cfg)?;
    let out = out_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir());
    fs::create_dir_all(&out)?;
    let report_path = out.join(&cfg.outputs.report);
    let a = &problem.stratification;
    let mut rng = Rng::seed_from_u64(cfg.sampling.seed);

    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        status: "pass".into(),
        problem: cfg.problem.clone(),
        field: cfg.field.clone(),
        epsilon_floor: problem.epsilon_floor,
        seed: cfg.sampling.seed,
        certificates: Certificates { frontier: None, whitney: Vec::new(), flatness: Vec::new(), tubes: Vec::new() },
        metrics: None,
        smoothing: None,
        failures: Vec::new(),
        pass: false,
    };
    let finish = |mut report: RunReport, samples_path: Option<PathBuf>| -> Result<RunOutcome> {
        report.pass = report.status == "pass";
        fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
        Ok(RunOutcome { report, report_path: report_path.clone(), samples_path })
    };

    match certify_geometry(cfg, a, &mut rng) {
        Ok(c) => report.certificates = c,
        Err(e) => {
            report.status = "abort".into();
            report.failures.push(format!("certify: {e}"));
            return finish(report, None);
        }
    }
    let c = &report.certificates;
    let mut failures: Vec<String> = c
        .frontier
        .iter()
        .chain(&c.whitney)
        .chain(&c.flatness)
        .filter(|r| !r.pass)
        .map(|r| format!("{} failed on {} (max violation {:e})", r.condition, r.subject, r.max_violation))
        .collect();

    let g = match smoothing::smooth_approximate(problem.field.clone(), problem.epsilon.clone(), a, &problem.smoothing_options(cfg)) {
        Ok(g) => g,
        Err(e) => {
            report.status = "abort".into();
            report.failures = failures;
            report.failures.push(e.to_string());
            return finish(report, None);
        }
    };
    report.certificates.tubes = g.metadata().stages.iter().map(|s| s.certificate.clone()).collect();

    let (metrics, samples) = verify(cfg, &problem, &g, &mut rng)?;
    if !metrics.closeness.pass {
        failures.push(format!("closeness: max |f − g|/ε = {}", metrics.closeness.max_ratio));
    }
    for t in metrics.tangency.iter().filter(|t| !t.pass) {
        failures.push(format!("tangency on {}: residual {:e}", t.stratum, t.max_residual));
    }
    if !metrics.lipschitz.pass {
        failures.push(format!("lipschitz: sampled {} exceeds bound", metrics.lipschitz.sampled));
    }
    for r in metrics.constancy.iter().filter(|r| !r.pass) {
        failures.push(format!("local constancy on {}: residual {:e}", r.subject, r.max_violation));
    }
    if let Some(o) = metrics.observable.as_ref().filter(|o| !o.pass) {
        failures.push(format!("observable: oscillation {:e}, growth ratio {}", o.oscillation, o.growth_ratio));
    }
    report.smoothing = Some(g.metadata().clone());
    report.metrics = Some(metrics);
    if !failures.is_empty() {
        report.status = "fail".into();
    }
    report.failures = failures;

    let samples_path = out.join(&cfg.outputs.samples);
    write_samples(&samples_path, &samples[..samples.len().min(cfg.sampling.csv_rows)])?;
    finish(report, Some(samples_path))
}

fn verify(cfg: &RunConfig, p: &Problem, g: &SmoothedField, rng: &mut Rng) -> Result<(Metrics, Vec<Sample>)> {
    let a = &p.stratification;
    let n = a.ambient_dim();
    let s = &cfg.sampling;

    let mut samples = Vec::with_capacity(s.closeness);
    let mut max_ratio: f64 = 0.0;
    for _ in 0..s.closeness {
        let x = linalg::uniform_box(rng, n, s.box_radius);
        let (f, gv, eps) = (p.field.eval(&x)?, g.eval(&x)?, p.epsilon.eval(&x)?);
        max_ratio = max_ratio.max((f - gv).abs() / eps);
        let grad_norm = g.grad(&x)?.norm();
        samples.push(Sample { x, f, g: gv, eps, grad_norm });
    }
    let closeness = ClosenessMetric { samples: s.closeness, max_ratio, pass: max_ratio < 1.0 };

    let tangency = tangency_metrics(g, a, s.per_stratum, rng);

    let meta = g.metadata();
    let sampled = fields::sampled_lipschitz(g, rng, s.lipschitz_pairs, s.box_radius, 0.5 * s.box_radius)?;
    let m = a.len() as i32;
    let theorem_bound = 13f64.powi(m + 1) * meta.base_lip;
    let ledger_bound = meta.pre_smoothing_bandwidth.is_none().then(|| STAGE_LIP_FACTOR.powi(m) * (meta.base_lip + 0.01));
    let lip_pass = sampled <= theorem_bound && ledger_bound.is_none_or(|b| sampled <= b);
    let lipschitz = LipschitzMetric { pairs: s.lipschitz_pairs, sampled, base_lip: meta.base_lip, theorem_bound, ledger_bound, pass: lip_pass };

    let mut constancy = Vec::new();
    if cfg.checks.constancy || cfg.options.target_order.is_some_and(|p| p >= 2) {
        for idx in 0..a.len() {
            let mut r = smoothing::check_local_constancy(g, a, idx, s.per_stratum, rng)?;
            let second = r.parameters.get("max_second_directional").copied().unwrap_or(0.0);
            if second > SECOND_DERIVATIVE_TOL {
                r.pass = false;
            }
            constancy.push(r);
        }
    }

    let observable = match &cfg.checks.observable {
        Some(o) => {
            let rows = moore_penrose::probe_segment(g, &matrix_from(&o.from, a)?, &matrix_from(&o.to, a)?, o.steps, cfg.options.bessel_delta)?;
            let oscillation = moore_penrose::observable_oscillation(&rows, o.window);
            let growth_ratio = moore_penrose::probe_growth_ratio(&rows);
            Some(ObservableMetric {
                rows: rows.len(),
                oscillation,
                growth_ratio,
                pass: oscillation <= o.tolerance && growth_ratio <= o.growth_tolerance,
            })
        }
        None => None,
    };
    Ok((Metrics { closeness, tangency, lipschitz, constancy, observable }, samples))
}

/// Which certificate [`certify`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Frontier,
    Whitney,
    Flatness,
    Tube,
}

/// Runs one certificate. Returns the reports and whether all passed.
pub fn certify(cfg: &RunConfig, check: CheckKind) -> Result<(serde_json::Value, bool)> {
    let problem = Problem::load(cfg)?;
    let a = &problem.stratification;
    let mut rng = Rng::seed_from_u64(cfg.sampling.seed);
    let k = cfg.sampling.certify;
    let reports: Vec<CertificationReport> = match check {
        CheckKind::Frontier => vec![strata::check_frontier(a, k, FrontierOptions::default(), &mut rng)?],
        CheckKind::Whitney => a
            .pairs()
            .into_iter()
            .map(|(l, m)| strata::check_whitney_a(a, l, m, k, WhitneyOptions::default(), &mut rng))
            .collect::<Result<_>>()?,
        CheckKind::Flatness => {
            let w = cfg.checks.flatness_width.unwrap_or(0.1);
            a.pairs()
                .into_iter()
                .map(|(l, m)| strata::check_normal_flatness(a, l, m, w, k, FlatnessOptions::default(), &mut rng))
                .collect::<Result<_>>()?
        }
        CheckKind::Tube => {
            let g = smoothing::smooth_approximate(problem.field.clone(), problem.epsilon.clone(), a, &problem.smoothing_options(cfg))?;
            let tubes: Vec<TubeCertificate> = g.metadata().stages.iter().map(|s| s.certificate.clone()).collect();
            let pass = tubes.iter().all(|t| t.pass);
            return Ok((serde_json::json!({ "schema_version": SCHEMA_VERSION, "tubes": tubes, "pass": pass }), pass));
        }
    };
    let pass = reports.iter().all(|r| r.pass);
    Ok((serde_json::json!({ "schema_version": SCHEMA_VERSION, "reports": reports, "pass": pass }), pass))
}

/// A parametrized path for [`sweep`].
#[derive(Debug, Clone, PartialEq)]
pub enum PathSpec {
    /// `(1 − t)·from + t·to` at `steps + 1` points.
    Segment { from: Vec<f64>, to: Vec<f64>, steps: usize },
}

impl PathSpec {
    /// Parses `segment:<from>:<to>:<steps>` with comma-separated coordinates.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || Error::Config(format!("expected segment:<from>:<to>:<steps>, got {spec:?}"));
        if parts.len() != 4 || parts[0] != "segment" {
            return Err(bad());
        }
        let coords = |s: &str| -> Result<Vec<f64>> {
            s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect()
        };
        let from = coords(parts[1])?;
        let to = coords(parts[2])?;
        let steps: usize = parts[3].parse().map_err(|_| bad())?;
        if from.len() != to.len() || steps == 0 {
            return Err(bad());
        }
        Ok(PathSpec::Segment { from, to, steps })
    }

    pub fn points(&self) -> Vec<(f64, Point)> {
        match self {
            PathSpec::Segment { from, to, steps } => (0..=*steps)
                .map(|i| {
                    let t = i as f64 / *steps as f64;
                    let x = Point::from_iterator(from.len(), from.iter().zip(to).map(|(a, b)| (1.0 - t) * a + t * b));
                    (t, x)
                })
                .collect(),
        }
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub t: f64,
    pub g: Option<f64>,
    pub grad_norm: Option<f64>,
    /// Tangency residual for the stratum containing the point, if any.
    pub normal_residual: Option<f64>,
    pub observable: Option<f64>,
    pub generator: Option<f64>,
    pub status: String,
}

/// Evaluates `g` along a path. Evaluation failures flag the row and the
/// sweep continues.
pub fn sweep(cfg: &RunConfig, path: &PathSpec) -> Result<Vec<SweepRow>> {
    let problem = Problem::load(cfg)?;
    let a = &problem.stratification;
    let g = smoothing::smooth_approximate(problem.field.clone(), problem.epsilon.clone(), a, &problem.smoothing_options(cfg))?;
    let shape = catalog::matrix_shape(a);
    let mut rows = Vec::new();
    for (t, x) in path.points() {
        if x.len() != a.ambient_dim() {
            return Err(Error::Config(format!("path has dimension {} but the problem has {}", x.len(), a.ambient_dim())));
        }
        let row = (|| -> Result<SweepRow> {
            let gv = g.eval(&x)?;
            let grad_norm = g.grad(&x)?.norm();
            let containing = a.strata().iter().position(|s| s.dim() < s.ambient_dim() && s.contains(&x, 1e-12));
            let normal_residual = containing.map(|idx| smoothing::tangency_residual(&g, a, idx, &x)).transpose()?;
            let (observable, generator) = match shape {
                Some((n, m)) => {
                    let xm = linalg::unflatten(&x, n, m);
                    (
                        Some(moore_penrose::observable(&g, &xm)?),
                        Some(moore_penrose::generator_probe(&g, &xm, cfg.options.bessel_delta)?),
                    )
                }
                None => (None, None),
            };
            Ok(SweepRow { t, g: Some(gv), grad_norm: Some(grad_norm), normal_residual, observable, generator, status: "ok".into() })
        })();
        rows.push(row.unwrap_or_else(|e| SweepRow {
            t,
            g: None,
            grad_norm: None,
            normal_residual: None,
            observable: None,
            generator: None,
            status: format!("error: {e}"),
        }));
    }
    Ok(rows)
}

/// Writes sweep rows as CSV.
pub fn write_sweep<W: std::io::Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["t", "g", "grad_norm", "normal_residual", "observable", "generator", "status"])?;
    let cell = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
    for r in rows {
        w.write_record([
            format!("{:e}", r.t),
            cell(r.g),
            cell(r.grad_norm),
            cell(r.normal_residual),
            cell(r.observable),
            cell(r.generator),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Probe rows along a matrix segment for an already built `g`.
pub fn probe_rows(g: &SmoothedField, a: &Stratification, check: &ObservableCheck, bessel_delta: f64) -> Result<Vec<ProbeRow>> {
    moore_penrose::probe_segment(g, &matrix_from(&check.from, a)?, &matrix_from(&check.to, a)?, check.steps, bessel_delta)
}
