use proptest::prelude::*;
use rand::SeedableRng;

use stratsmooth::bump::Bump;
use stratsmooth::catalog::rank::{project_fixed_rank, random_orthogonal, random_rank_k};
use stratsmooth::catalog::{BoxSet, LiftKind, NonnegOrthant, SpectralLiftSet};
use stratsmooth::linalg::{self, Matrix, Point};
use stratsmooth::moore_penrose::{mp_tangent_projection_check, pinv};
use stratsmooth::strata::softmin;
use stratsmooth::Rng;

fn matrix() -> impl Strategy<Value = Matrix> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| {
        prop::collection::vec(-3.0..3.0f64, n * m).prop_map(move |e| Matrix::from_row_slice(n, m, &e))
    })
}

fn matrix_pair() -> impl Strategy<Value = (Matrix, Matrix)> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| {
        (prop::collection::vec(-3.0..3.0f64, n * m), prop::collection::vec(-3.0..3.0f64, n * m))
            .prop_map(move |(a, b)| (Matrix::from_row_slice(n, m, &a), Matrix::from_row_slice(n, m, &b)))
    })
}

fn symmetric() -> impl Strategy<Value = Matrix> {
    (1usize..=4).prop_flat_map(|n| {
        prop::collection::vec(-3.0..3.0f64, n * n).prop_map(move |e| {
            let g = Matrix::from_row_slice(n, n, &e);
            (&g + g.transpose()) * 0.5
        })
    })
}

fn orthogonality_defect(q: &Matrix) -> f64 {
    (q.transpose() * q - Matrix::identity(q.ncols(), q.ncols())).norm()
}

/// `U Diag(σ) Vᵀ` with rank `k`, leading singular values in `[lo, hi]`.
fn rank_k(seed: u64, n: usize, m: usize, k: usize, lo: f64, hi: f64) -> Matrix {
    let mut rng = Rng::seed_from_u64(seed);
    random_rank_k(&mut rng, n, m, k, lo, hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn svd_reconstructs_with_orthogonal_factors(x in matrix()) {
        let f = linalg::svd(&x).unwrap();
        let scale = 1.0 + x.norm();
        prop_assert!((f.reconstruct() - &x).norm() <= 1e-12 * scale);
        prop_assert!(orthogonality_defect(&f.u) <= 1e-12);
        prop_assert!(orthogonality_defect(&f.v) <= 1e-12);
        let s = f.singular_values.as_slice();
        prop_assert!(s.iter().all(|&v| v >= 0.0));
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn singular_values_are_nonexpansive((x, y) in matrix_pair()) {
        let sx = linalg::singular_values(&x).unwrap();
        let sy = linalg::singular_values(&y).unwrap();
        prop_assert!((sx - sy).norm() <= (&x - &y).norm() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn eigendecomposition_reconstructs(s in symmetric()) {
        let f = linalg::sym_eig(&s).unwrap();
        prop_assert!((f.reconstruct() - &s).norm() <= 1e-12 * (1.0 + s.norm()));
        prop_assert!(orthogonality_defect(&f.u) <= 1e-12);
        prop_assert!(f.eigenvalues.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn projectors_are_idempotent_and_symmetric(
        dim in 1usize..=6,
        vecs in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 6), 0..=4),
    ) {
        let basis: Vec<Point> = vecs.iter().map(|v| Point::from_column_slice(&v[..dim])).collect();
        let p = linalg::projector_from_basis(&basis, dim);
        prop_assert!(p.idempotency_defect() <= 1e-12);
        prop_assert!(p.symmetry_defect() <= 1e-12);
        prop_assert!(p.rank() <= basis.len().min(dim));
        let q = p.complement();
        prop_assert!((p.matrix() * q.matrix()).norm() <= 1e-12);
    }

    #[test]
    fn truncation_is_the_nearest_rank_k_matrix(x in matrix(), k in 1usize..=4, seed in any::<u64>()) {
        let (n, m) = x.shape();
        let k = k.min(n.min(m));
        let Ok(y) = project_fixed_rank(&x, k) else { return Ok(()) };
        let s = linalg::singular_values(&x).unwrap();
        let tail: f64 = s.iter().skip(k).map(|v| v * v).sum();
        let d = (&x - &y).norm();
        prop_assert!((d * d - tail).abs() <= 1e-10 * (1.0 + x.norm_squared()));
        prop_assert!(linalg::singular_values(&y).unwrap().iter().skip(k).all(|&v| v <= 1e-10 * (1.0 + x.norm())));
        // no random rank-k competitor is closer
        let mut rng = Rng::seed_from_u64(seed);
        for _ in 0..8 {
            let z = random_rank_k(&mut rng, n, m, k, 0.1, 4.0);
            prop_assert!((&x - z).norm() >= d - 1e-12);
        }
    }

    #[test]
    fn spectral_box_projection_clamps_singular_values(x in matrix(), r in 0.1..2.0f64) {
        let set = SpectralLiftSet::new(Box::new(BoxSet { radius: r }), LiftKind::Singular).unwrap();
        let p = set.project(&x).unwrap();
        let sp = linalg::singular_values(&p).unwrap();
        let sx = linalg::singular_values(&x).unwrap();
        for (a, b) in sp.iter().zip(sx.iter()) {
            prop_assert!((a - b.min(r)).abs() <= 1e-12 * (1.0 + x.norm()));
        }
        prop_assert!(set.contains(&p).unwrap() || sp[0] <= r * (1.0 + 1e-12));
        // idempotent
        prop_assert!((set.project(&p).unwrap() - &p).norm() <= 1e-12 * (1.0 + x.norm()));
    }

    #[test]
    fn psd_projection_commutes_with_eigenvalues(s in symmetric()) {
        let set = SpectralLiftSet::new(Box::new(NonnegOrthant), LiftKind::Eigen).unwrap();
        let p = set.project(&s).unwrap();
        let lp = linalg::sym_eig(&p).unwrap().eigenvalues;
        let ls = linalg::sym_eig(&s).unwrap().eigenvalues;
        for (a, b) in lp.iter().zip(ls.iter()) {
            prop_assert!((a - b.max(0.0)).abs() <= 1e-12 * (1.0 + s.norm()));
        }
        prop_assert!((&p - p.transpose()).norm() <= 1e-12 * (1.0 + s.norm()));
    }

    #[test]
    fn penrose_identities_hold(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=4, k in 0usize..=4) {
        let k = k.min(n.min(m));
        let x = rank_k(seed, n, m, k, 0.1, 3.0);
        let p = pinv(&x).unwrap();
        prop_assert_eq!(p.rank, k);
        let tol = 1e-9 * x.norm_squared().max(1.0);
        for r in p.penrose_residuals() {
            prop_assert!(r <= tol, "residual {r} above {tol}");
        }
        prop_assert!((&p.x_sharp - p.x_plus.transpose()).norm() == 0.0);
    }

    #[test]
    fn pinv_is_lipschitz_along_a_stratum(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=4, k in 1usize..=4, t in 1e-6..1e-2f64) {
        let k = k.min(n.min(m));
        let mut rng = Rng::seed_from_u64(seed);
        let u = random_orthogonal(&mut rng, n);
        let v = random_orthogonal(&mut rng, m);
        let s: Vec<f64> = (0..k).map(|i| 0.5 + i as f64).collect();
        let s2: Vec<f64> = s.iter().map(|v| v * (1.0 + t)).collect();
        let mut z = vec![0.0; n.min(m)];
        let mut z2 = z.clone();
        z[..k].copy_from_slice(&s);
        z2[..k].copy_from_slice(&s2);
        let a = &u * linalg::diag(n, m, &z) * v.transpose();
        let b = &u * linalg::diag(n, m, &z2) * v.transpose();
        let (pa, pb) = (pinv(&a).unwrap(), pinv(&b).unwrap());
        // equal-rank perturbation bound ‖B⁺ − A⁺‖ ≤ √2 max(‖A⁺‖², ‖B⁺‖²) ‖B − A‖
        let na = linalg::spectral_norm(&pa.x_plus);
        let nb = linalg::spectral_norm(&pb.x_plus);
        let bound = 2f64.sqrt() * na.max(nb).powi(2) * (&b - &a).norm();
        prop_assert!((&pb.x_plus - &pa.x_plus).norm() <= bound * (1.0 + 1e-9) + 1e-14);
    }

    #[test]
    fn sharp_projects_to_sharp_of_truncation(seed in any::<u64>(), n in 2usize..=4, m in 2usize..=4, k in 1usize..=3) {
        let r = n.min(m);
        let k = k.min(r);
        let mut rng = Rng::seed_from_u64(seed);
        let u = random_orthogonal(&mut rng, n);
        let v = random_orthogonal(&mut rng, m);
        let sig: Vec<f64> = (0..r).map(|i| if i < k { 1.0 + i as f64 } else { 0.05 / (1 + i) as f64 }).collect();
        let x = &u * linalg::diag(n, m, &sig) * v.transpose();
        let resid = mp_tangent_projection_check(&x, k).unwrap();
        prop_assert!(resid <= 1e-9 * (1.0 + pinv(&x).unwrap().x_sharp.norm()));
    }

    #[test]
    fn softmin_lies_below_the_minimum(vals in prop::collection::vec(1e-6..10.0f64, 1..6), q in 1i32..12) {
        let s = softmin(&vals, q);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let count = vals.len() as f64;
        prop_assert!(s <= lo * (1.0 + 1e-12));
        prop_assert!(s >= lo * count.powf(-1.0 / q as f64) * (1.0 - 1e-12));
    }

    #[test]
    fn cutoff_is_a_monotone_unit_step(t in 0.0..2.0f64, dt in 0.0..0.1f64) {
        let b = Bump::standard();
        let (p, q) = (b.psi(t).unwrap(), b.psi(t + dt).unwrap());
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(q <= p + 1e-15);
        prop_assert!(b.psi_prime(t).unwrap() <= 0.0);
    }
}
