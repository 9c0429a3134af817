//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion
//! fails.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng as _, SeedableRng};
use stratsmooth::bump::{Bump, DERIVATIVE_BOUND, SCALED_DERIVATIVE_BOUND};
use stratsmooth::catalog::{self, BoxSet, LiftKind, NonnegOrthant, SpectralLiftSet};
use stratsmooth::fields::{self, Affine, Constant, Det, FrobSq, ScalarField};
use stratsmooth::harness::{self, RunConfig};
use stratsmooth::linalg::{self, Matrix};
use stratsmooth::moore_penrose;
use stratsmooth::smoothing::{self, SmoothedField, SmoothingOptions, STAGE_LIP_FACTOR};
use stratsmooth::strata::{self, FlatnessOptions, WhitneyOptions};
use stratsmooth::{Rng, Stratification};

type Outcome = (bool, String);

fn eps(dim: usize) -> Arc<dyn ScalarField> {
    Arc::new(Constant { dim, value: 0.05 })
}

fn build(id: &str, f: Arc<dyn ScalarField>, target_order: Option<u32>, seed: u64) -> (Stratification, SmoothedField) {
    let a = catalog::load(id, Path::new(env!("CARGO_MANIFEST_DIR")).join("data").as_path()).expect("catalog id");
    let n = a.ambient_dim();
    let opts = SmoothingOptions { target_order, seed, ..SmoothingOptions::default() };
    let g = smoothing::smooth_approximate(f, eps(n), &a, &opts).unwrap_or_else(|e| panic!("{id}: {e}"));
    (a, g)
}

fn criterion_1() -> Outcome {
    let bump = Bump::standard();
    let (mut sup_d, mut sup_td, mut plateau, mut tail) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut i = 0u64;
    loop {
        let t = i as f64 * 1e-4;
        if t > 2.0 {
            break;
        }
        let (p, d) = (bump.psi(t).unwrap(), bump.psi_prime(t).unwrap());
        sup_d = sup_d.max(d.abs());
        sup_td = sup_td.max((t * d).abs());
        if t <= 0.25 {
            plateau = plateau.max((p - 1.0).abs());
        }
        if t >= 0.75 {
            tail = tail.max(p.abs());
        }
        i += 1;
    }
    let pass = plateau == 0.0 && tail == 0.0 && sup_d <= DERIVATIVE_BOUND - 0.1 && sup_td <= SCALED_DERIVATIVE_BOUND - 0.1;
    (pass, format!("plateau {plateau:e}, tail {tail:e}, sup|ψ′| {sup_d:.4} (≤ {:.4}), sup|tψ′| {sup_td:.4} (≤ {:.4})", DERIVATIVE_BOUND - 0.1, SCALED_DERIVATIVE_BOUND - 0.1))
}

const TUBE_ENTRIES: [&str; 9] = [
    "xaxis",
    "punctured-xaxis",
    "halfplane",
    "plane-minus-axis",
    "counterexample",
    "rank:n=2,m=2",
    "rank:n=3,m=3",
    "Aplus:n=2",
    "simplex:d=2",
];

fn criterion_2() -> Outcome {
    let mut rng = Rng::seed_from_u64(202);
    let (mut worst_scaled, mut worst_fd, mut tested, mut skipped, mut unresolved) = (0.0_f64, 0.0_f64, 0usize, 0usize, 0usize);
    for id in TUBE_ENTRIES {
        let n = catalog::load(id, Path::new(".")).unwrap().ambient_dim();
        let (a, g) = build(id, Arc::new(FrobSq { dim: n }), None, 2);
        for idx in 0..a.len() {
            let Some(tube) = g.tube(idx) else { continue };
            if a.stratum(idx).dim() == n {
                continue;
            }
            for p in tube.sample_tube(&mut rng, 10_000) {
                let Ok(an) = tube.grad_phi(&p.x) else {
                    skipped += 1;
                    continue;
                };
                worst_scaled = worst_scaled.max(p.gap * an.norm());
                // the step must sit well inside the tube and well above the rounding of x
                let h = 1e-5 * p.width;
                if h < 1e-9 * (1.0 + p.x.norm()) {
                    unresolved += 1;
                    continue;
                }
                let fd = linalg::fd_gradient(|z| tube.phi(z), &p.x, h, true).unwrap();
                let e = (&an - &fd).amax() / (1.0 + an.amax());
                worst_fd = worst_fd.max(e);
                tested += 1;
            }
        }
    }
    let pass = worst_scaled <= 8.0 && worst_fd <= 1e-6;
    (pass, format!("{tested} tube samples ({skipped} on frontiers skipped, {unresolved} with width below FD resolution): max |x−P(x)|·|∇φ| {worst_scaled:.4} (≤ 8), max |∇φ − FD|/(1 + |∇φ|) {worst_fd:.2e} (≤ 1e-6)"))
}

fn criterion_3() -> Outcome {
    let mut failures = Vec::new();
    let mut count = 0;
    let mut pipelines: Vec<(&str, Option<u32>)> = TUBE_ENTRIES.iter().map(|id| (*id, None)).collect();
    pipelines.extend([("Aplus:n=2", Some(3)), ("simplex:d=2", Some(2)), ("rank:n=2,m=2", Some(2))]);
    for (id, order) in pipelines {
        let n = catalog::load(id, Path::new(".")).unwrap().ambient_dim();
        let (_, g) = build(id, Arc::new(FrobSq { dim: n }), order, 3);
        for s in &g.metadata().stages {
            count += 1;
            let ok = s.certificate.pass && s.certificate.conditions.iter().all(|c| c.pass);
            if !ok {
                failures.push(format!("{id}/{}", s.stratum));
            }
        }
    }
    (failures.is_empty(), format!("{count} stage certificates, failing: {failures:?}"))
}

fn criterion_4() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let cases: Vec<(&str, &str, Arc<dyn ScalarField>)> = vec![
        ("xaxis", "coordinate", Arc::new(Affine::coordinate(2, 1).unwrap())),
        ("xaxis", "frobsq", Arc::new(FrobSq { dim: 2 })),
        ("Aplus:n=2", "coordinate", Arc::new(Affine::coordinate(4, 0).unwrap())),
        ("Aplus:n=2", "frobsq", Arc::new(FrobSq { dim: 4 })),
        ("Aplus:n=2", "det", Arc::new(Det { n: 2 })),
    ];
    let mut rng = Rng::seed_from_u64(404);
    for (id, name, f) in cases {
        let (a, g) = build(id, f.clone(), None, 4);
        let n = a.ambient_dim();
        let mut ratio: f64 = 0.0;
        for _ in 0..10_000 {
            let x = linalg::uniform_box(&mut rng, n, 1.0);
            ratio = ratio.max((f.eval(&x).unwrap() - g.eval(&x).unwrap()).abs() / 0.05);
        }
        let mut tangency: f64 = 0.0;
        for (idx, s) in a.strata().iter().enumerate() {
            if s.dim() == n {
                continue;
            }
            let mut pts = s.anchor_points();
            pts.extend(s.sample(&mut rng, 100));
            pts.truncate(100);
            for x in pts {
                tangency = tangency.max(smoothing::tangency_residual(&g, &a, idx, &x).unwrap());
            }
        }
        let meta = g.metadata();
        let m = a.len() as i32;
        let sampled = fields::sampled_lipschitz(&g, &mut rng, 10_000, 1.0, 0.5).unwrap();
        let theorem = 13f64.powi(m + 1) * meta.base_lip;
        let ledger = STAGE_LIP_FACTOR.powi(m) * (meta.base_lip + 0.01);
        let skipped = meta.pre_smoothing_bandwidth.is_none();
        let ok = ratio < 1.0 && tangency <= 1e-5 && sampled <= theorem && (!skipped || sampled <= ledger);
        pass &= ok;
        lines.push(format!("{id}/{name}: ratio {ratio:.3}, tangency {tangency:.1e}, lip {sampled:.2}"));
    }
    (pass, lines.join("; "))
}

fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    let mut rng = Rng::seed_from_u64(505);
    for (id, order) in [("Aplus:n=2", 3), ("poly:file=simplex2d.json", 2)] {
        let n = catalog::load(id, Path::new(env!("CARGO_MANIFEST_DIR")).join("data").as_path()).unwrap().ambient_dim();
        let (a, g) = build(id, Arc::new(FrobSq { dim: n }), Some(order), 5);
        let (mut resid, mut second) = (0.0_f64, 0.0_f64);
        for idx in 0..a.len() {
            let r = smoothing::check_local_constancy(&g, &a, idx, 100, &mut rng).unwrap();
            resid = resid.max(r.max_violation);
            second = second.max(r.parameters.get("max_second_directional").copied().unwrap_or(0.0));
        }
        pass &= resid <= 1e-9 && second <= 1e-5;
        lines.push(format!("{id}: constancy {resid:.1e}, normal second derivative {second:.1e}"));
    }
    (pass, lines.join("; "))
}

fn criterion_6() -> Outcome {
    let mut rng = Rng::seed_from_u64(606);
    let mut worst_flat: f64 = 0.0;
    let mut pass = true;
    for (n, m) in [(2, 2), (3, 3)] {
        let a = catalog::rank_stratification(n, m).unwrap();
        for (l, u) in a.pairs() {
            let r = strata::check_normal_flatness(&a, l, u, 0.1, 30, FlatnessOptions::default(), &mut rng).unwrap();
            worst_flat = worst_flat.max(r.max_violation);
            pass &= r.pass && r.max_violation <= 1e-8;
        }
    }
    let c = catalog::counterexample_stratification().unwrap();
    let w = strata::check_whitney_a(&c, 0, 1, 30, WhitneyOptions::default(), &mut rng).unwrap();
    let decays = w.trend.last().is_some_and(|&d| d < w.trend[0] && d <= w.tolerance);
    let nf = strata::check_normal_flatness(&c, 0, 1, 0.1, 30, FlatnessOptions::default(), &mut rng).unwrap();
    let witness_ok = nf.witness.as_ref().is_some_and(|x| x[0] > 0.0 && x[1].abs() < 1e-12 && x[2].abs() > 1e-12);
    pass &= w.pass && decays && !nf.pass && witness_ok;
    (
        pass,
        format!(
            "rank flatness max {worst_flat:.1e}; saddle whitney defect {:.1e} (trend {:.1e} → {:.1e}), flatness fails {} with witness {:?}",
            w.max_violation,
            w.trend[0],
            w.trend.last().unwrap(),
            !nf.pass,
            nf.witness
        ),
    )
}

/// Nearest `Y` with `σ₁(Y) ≤ 1` by brute force over `Y = R(α) Diag(d) R(β)ᵀ`:
/// for fixed angles the best `d` clamps the diagonal of `R(α)ᵀ X R(β)` to
/// `[−1, 1]`, and `(α, β) ↦ −Y` covers the other half-periods.
fn brute_force_project_unit_ball(x: &[f64; 4]) -> [f64; 4] {
    let rot = |t: f64| {
        let (s, c) = t.sin_cos();
        [c, -s, s, c]
    };
    let mul = |a: &[f64; 4], b: &[f64; 4]| [a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]];
    let tr = |a: &[f64; 4]| [a[0], a[2], a[1], a[3]];
    let candidate = |al: f64, be: f64| {
        let (ra, rb) = (rot(al), rot(be));
        let m = mul(&mul(&tr(&ra), x), &rb);
        let d = [m[0].clamp(-1.0, 1.0), 0.0, 0.0, m[3].clamp(-1.0, 1.0)];
        let y = mul(&mul(&ra, &d), &tr(&rb));
        let dist: f64 = (0..4).map(|i| (x[i] - y[i]).powi(2)).sum();
        (dist, y)
    };
    let pi = std::f64::consts::PI;
    let (mut best_d, mut best, mut ca, mut cb) = (f64::INFINITY, [0.0; 4], 0.0, 0.0);
    let k = (pi / 0.01).ceil() as i64;
    for i in 0..k {
        for j in 0..k {
            let (al, be) = (i as f64 * 0.01, j as f64 * 0.01);
            let (d, y) = candidate(al, be);
            if d < best_d {
                (best_d, best, ca, cb) = (d, y, al, be);
            }
        }
    }
    for step in [1e-3_f64, 1e-4, 1e-5, 1e-6] {
        let (a0, b0) = (ca, cb);
        for i in -20..=20 {
            for j in -20..=20 {
                let (al, be) = (a0 + i as f64 * step, b0 + j as f64 * step);
                let (d, y) = candidate(al, be);
                if d < best_d {
                    (best_d, best, ca, cb) = (d, y, al, be);
                }
            }
        }
    }
    best
}

/// `|S|` for symmetric nonsingular `S` by Denman–Beavers on `S²`.
fn abs_symmetric(s: &Matrix) -> Matrix {
    let a = s * s;
    let mut y = a.clone();
    let mut z = Matrix::identity(a.nrows(), a.ncols());
    for _ in 0..60 {
        let yi = y.clone().try_inverse().unwrap();
        let zi = z.clone().try_inverse().unwrap();
        let yn = (&y + zi) * 0.5;
        z = (&z + yi) * 0.5;
        if (&yn - &y).norm() < 1e-15 * yn.norm() {
            y = yn;
            break;
        }
        y = yn;
    }
    y
}

fn criterion_7() -> Outcome {
    let mut rng = Rng::seed_from_u64(707);
    let unit_box = SpectralLiftSet::new(Box::new(BoxSet { radius: 1.0 }), LiftKind::Singular).unwrap();
    let psd = SpectralLiftSet::new(Box::new(NonnegOrthant), LiftKind::Eigen).unwrap();
    let (mut oracle_err, mut psd_err, mut commute): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..100 {
        let e: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let x = DMatrix::from_row_slice(2, 2, &e);
        let p = unit_box.project(&x).unwrap();
        let oracle = brute_force_project_unit_ball(&e);
        oracle_err = oracle_err.max((&p - DMatrix::from_row_slice(2, 2, &oracle)).norm());
        let mut sp = linalg::singular_values(&p).unwrap().as_slice().to_vec();
        let mut clamp: Vec<f64> = linalg::singular_values(&x).unwrap().iter().map(|v| v.min(1.0)).collect();
        sp.sort_by(f64::total_cmp);
        clamp.sort_by(f64::total_cmp);
        commute = commute.max(sp.iter().zip(&clamp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));

        let g = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-2.0..2.0));
        let s = (&g + g.transpose()) * 0.5;
        let clipped = (&s + abs_symmetric(&s)) * 0.5;
        psd_err = psd_err.max((psd.project(&s).unwrap() - clipped).norm());
    }
    let pass = oracle_err <= 1e-3 && psd_err <= 1e-9 && commute <= 1e-10;
    (pass, format!("brute-force oracle {oracle_err:.1e} (≤ 1e-3), PSD clipping {psd_err:.1e} (≤ 1e-9), σ∘P = P∘σ {commute:.1e} (≤ 1e-10)"))
}

fn criterion_8() -> Outcome {
    let mut rng = Rng::seed_from_u64(808);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=4);
        let m = rng.random_range(2..=4);
        let r = n.min(m);
        let k = rng.random_range(1..=r);
        let u = catalog::rank::random_orthogonal(&mut rng, n);
        let v = catalog::rank::random_orthogonal(&mut rng, m);
        let sig: Vec<f64> = (0..r)
            .map(|i| if i < k { rng.random_range(1.0..3.0) } else { rng.random_range(0.0..0.1) })
            .collect();
        let x = &u * linalg::diag(n, m, &sig) * v.transpose();
        let resid = moore_penrose::mp_tangent_projection_check(&x, k).unwrap();
        let scale = 1.0 + moore_penrose::pinv(&x).unwrap().x_sharp.norm();
        worst = worst.max(resid / scale);
    }
    (worst <= 1e-9, format!("1000 random (X, k) with σ_k/σ_(k+1) ≥ 10: max residual/(1 + ‖X^∓‖) {worst:.1e} (≤ 1e-9)"))
}

fn criterion_9() -> Outcome {
    let (_, g) = build("Aplus:n=2", Arc::new(FrobSq { dim: 4 }), Some(3), 9);
    let from = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.2]);
    let to = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.2]);
    let rows = moore_penrose::probe_segment(&g, &from, &to, 400, 3.0).unwrap();
    let osc = moore_penrose::observable_oscillation(&rows, 5e-3);
    let ratio = moore_penrose::probe_growth_ratio(&rows);
    (osc <= 1e-4 && ratio <= 2.0, format!("{} rows: oscillation {osc:.1e} (≤ 1e-4), probe growth ratio {ratio:.3} (≤ 2)", rows.len()))
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/aplus2_flat.json");
    let cfg = RunConfig::load(&path).unwrap();
    let a = harness::run(&cfg, Some(&dir.path().join("a"))).unwrap();
    let b = harness::run(&cfg, Some(&dir.path().join("b"))).unwrap();
    let same_report = std::fs::read(&a.report_path).unwrap() == std::fs::read(&b.report_path).unwrap();
    let (sa, sb) = (a.samples_path.unwrap(), b.samples_path.unwrap());
    let same_samples = std::fs::read(sa).unwrap() == std::fs::read(sb).unwrap();
    (same_report && same_samples, format!("report.json identical {same_report}, samples.csv identical {same_samples}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("bump certification", criterion_1),
        ("interpolation bound", criterion_2),
        ("tube conditions", criterion_3),
        ("Whitney-case approximation", criterion_4),
        ("normally flat approximation", criterion_5),
        ("flatness and Whitney certifiers", criterion_6),
        ("spectral projections", criterion_7),
        ("Moore-Penrose tangent projection", criterion_8),
        ("observable continuity", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = run();
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<34} {}  [{:.1}s] {detail}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
