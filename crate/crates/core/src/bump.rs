//! The cutoff `ψ: [0,∞) → [0,1]`: equal to 1 on `[0, 1/4]`, 0 on `[3/4, ∞)`,
//! with `sup|ψ′| ≤ 7/3` and `sup|tψ′(t)| ≤ 7/4`.
//!
//! `ψ = 1 − ∫₀ᵗ ρ` where `ρ` is the uniform density on `[a, b]` convolved with
//! the exp-mollifier of half-width `η`. Writing `K` for the mollifier's
//! distribution function and `K₂(u) = ∫ K = u K(u) − ∫ s m(s) ds`,
//!
//! ```text
//! ψ(t)  = 1 − [K₂(t − a) − K₂(t − b)] / (b − a)
//! ψ′(t) =   − [K (t − a) − K (t − b)] / (b − a)
//! ```
//!
//! `K` and the first moment are tabulated on a uniform knot grid over
//! `[−η, η]` and completed by a local Gauss–Legendre rule.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Bound on `|ψ′|` required by the interpolation estimates.
pub const DERIVATIVE_BOUND: f64 = 7.0 / 3.0;
/// Bound on `|t ψ′(t)|` required by the interpolation estimates.
pub const SCALED_DERIVATIVE_BOUND: f64 = 7.0 / 4.0;

const PANELS: usize = 512;
const GAUSS_POINTS: usize = 16;

/// Shape parameters of the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BumpSpec {
    /// End of the plateau of the ramp density.
    pub a: f64,
    /// Start of the drop of the ramp density.
    pub b: f64,
    /// Mollifier half-width.
    pub eta: f64,
}

impl Default for BumpSpec {
    fn default() -> Self {
        BumpSpec { a: 0.27, b: 0.73, eta: 0.015 }
    }
}

/// A tabulated cutoff built from a [`BumpSpec`].
#[derive(Debug, Clone)]
pub struct Bump {
    spec: BumpSpec,
    norm: f64,
    knots: Vec<f64>,
    cdf: Vec<f64>,
    moment: Vec<f64>,
    nodes: [f64; GAUSS_POINTS],
    weights: [f64; GAUSS_POINTS],
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration.
fn gauss_legendre() -> ([f64; GAUSS_POINTS], [f64; GAUSS_POINTS]) {
    let n = GAUSS_POINTS;
    let mut nodes = [0.0; GAUSS_POINTS];
    let mut weights = [0.0; GAUSS_POINTS];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

impl Bump {
    pub fn new(spec: BumpSpec) -> Result<Self> {
        let BumpSpec { a, b, eta } = spec;
        if !(eta > 0.0 && a - eta >= 0.25 && b + eta <= 0.75 && a < b) {
            return Err(Error::Contract(format!(
                "bump support [a−η, b+η] = [{}, {}] must lie inside [1/4, 3/4]",
                a - eta,
                b + eta
            )));
        }
        if 1.0 / (b - a) > DERIVATIVE_BOUND {
            return Err(Error::Contract(format!("ramp height 1/(b−a) = {} exceeds 7/3", 1.0 / (b - a))));
        }
        let (nodes, weights) = gauss_legendre();
        let mut bump = Bump {
            spec,
            norm: 1.0,
            knots: (0..=PANELS).map(|i| -eta + 2.0 * eta * i as f64 / PANELS as f64).collect(),
            cdf: vec![0.0; PANELS + 1],
            moment: vec![0.0; PANELS + 1],
            nodes,
            weights,
        };
        let mut c = 0.0;
        let mut j = 0.0;
        for i in 0..PANELS {
            let (lo, hi) = (bump.knots[i], bump.knots[i + 1]);
            c += bump.quad(lo, hi, |s| bump.raw_mollifier(s));
            j += bump.quad(lo, hi, |s| s * bump.raw_mollifier(s));
            bump.cdf[i + 1] = c;
            bump.moment[i + 1] = j;
        }
        bump.norm = c;
        for v in bump.cdf.iter_mut().chain(bump.moment.iter_mut()) {
            *v /= c;
        }
        Ok(bump)
    }

    /// The default cutoff, built once.
    pub fn standard() -> &'static Bump {
        static BUMP: OnceLock<Bump> = OnceLock::new();
        BUMP.get_or_init(|| Bump::new(BumpSpec::default()).expect("default bump spec is valid"))
    }

    pub fn spec(&self) -> BumpSpec {
        self.spec
    }

    fn raw_mollifier(&self, s: f64) -> f64 {
        let u = s / self.spec.eta;
        if u.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - u * u)).exp()
        }
    }

    /// Normalized mollifier density.
    pub fn mollifier(&self, s: f64) -> f64 {
        self.raw_mollifier(s) / self.norm
    }

    fn quad(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
    }

    /// `(K(u), ∫_{−η}^u s m(s) ds)`.
    fn cdf_and_moment(&self, u: f64) -> (f64, f64) {
        let eta = self.spec.eta;
        if u <= -eta {
            return (0.0, 0.0);
        }
        if u >= eta {
            return (1.0, 0.0);
        }
        let h = 2.0 * eta / PANELS as f64;
        let i = (((u + eta) / h) as usize).min(PANELS - 1);
        let lo = self.knots[i];
        let k = self.cdf[i] + self.quad(lo, u, |s| self.mollifier(s));
        let j = self.moment[i] + self.quad(lo, u, |s| s * self.mollifier(s));
        (k, j)
    }

    fn k2(&self, u: f64) -> f64 {
        let (k, j) = self.cdf_and_moment(u);
        u * k - j
    }

    fn check(t: f64) -> Result<()> {
        if t.is_nan() || t < 0.0 {
            Err(Error::Domain(format!("cutoff argument must be ≥ 0, got {t}")))
        } else {
            Ok(())
        }
    }

    /// `ψ(t)` for `t ≥ 0`.
    pub fn psi(&self, t: f64) -> Result<f64> {
        Self::check(t)?;
        let BumpSpec { a, b, eta } = self.spec;
        if t <= a - eta {
            return Ok(1.0);
        }
        if t >= b + eta {
            return Ok(0.0);
        }
        let v = 1.0 - (self.k2(t - a) - self.k2(t - b)) / (b - a);
        Ok(v.clamp(0.0, 1.0))
    }

    /// `ψ′(t)` for `t ≥ 0`.
    pub fn psi_prime(&self, t: f64) -> Result<f64> {
        Self::check(t)?;
        let BumpSpec { a, b, eta } = self.spec;
        if t <= a - eta || t >= b + eta {
            return Ok(0.0);
        }
        let (ka, _) = self.cdf_and_moment(t - a);
        let (kb, _) = self.cdf_and_moment(t - b);
        Ok(-(ka - kb) / (b - a))
    }

    /// `ψ″(t)`, used by second-order checks.
    pub fn psi_second(&self, t: f64) -> Result<f64> {
        Self::check(t)?;
        let BumpSpec { a, b, .. } = self.spec;
        Ok(-(self.mollifier(t - a) - self.mollifier(t - b)) / (b - a))
    }
}

/// `ψ(t)` of the standard cutoff.
pub fn psi(t: f64) -> Result<f64> {
    Bump::standard().psi(t)
}

/// `ψ′(t)` of the standard cutoff.
pub fn psi_prime(t: f64) -> Result<f64> {
    Bump::standard().psi_prime(t)
}
