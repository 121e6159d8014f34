//! Functionals of stationary Gaussian sequences and processes.
//!
//! Four models are provided. White noise is the discrete i.i.d. sequence. The
//! other three are continuous-time moving averages `Y_t = ∫ K_t dW`, observed on
//! a grid of step `Δ`:
//!
//! | model | kernel `K_a(s)` | correlation `ρ(τ)` | `∫|ρ|` |
//! |-------|-----------------|--------------------|--------|
//! | `bm_increments` | `1[a ≤ s < a+1]` | `(1 - |τ|)₊` | 2 |
//! | `ou` | `σ e^{-θ(a-s)} 1[s < a]` | `e^{-θ|τ|}` | `σ²/θ²` |
//! | `fbm_increments` | `c_H⁻¹((a+1-s)₊^{H-½} - (a-s)₊^{H-½})` | `½(|τ+1|^{2H} + |τ-1|^{2H} - 2|τ|^{2H})` | numeric |
//!
//! Sampling always uses the unit-variance correlation. The `∫|ρ|` column is the
//! value entering the explicit constant: for Brownian increments it is the
//! integral of the dominating indicator `1[|τ| ≤ 1]`, and for the OU process
//! it is the integral of the unnormalized covariance `σ² e^{-θ|τ|}/(2θ)`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::function::{SeparableFunctional, SubordinatingFunction};
use crate::hermite::{factorial, hermite_coefficients, GaussHermite};
use crate::linalg::cholesky_factor;
use crate::poincare::{finite_dim_bound, BoundOptions, BoundReport, MetricKind};
use crate::quad::{simpson, simpson_log, simpson_singular_left};
use crate::rng::{batch_ranges, SeedSpec};
use crate::sim::{StationaryCovariance, StationarySampler};

/// Observation step used for continuous-time models unless overridden.
pub const DEFAULT_STEP: f64 = 0.25;

/// Upper cut-off for the fBm dominator integral; the tail beyond it is added
/// from the `|H - ½| y^{H - 3/2}` asymptote.
const FBM_TAIL_CUTOFF: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "snake_case")]
pub enum ModelKind {
    WhiteNoise,
    BmIncrements,
    Ou { theta: f64, sigma: f64 },
    FbmIncrements { hurst: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryModelSpec {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub step: f64,
}

impl StationaryModelSpec {
    pub fn white_noise() -> Self {
        Self {
            kind: ModelKind::WhiteNoise,
            step: 1.0,
        }
    }

    pub fn bm_increments() -> Self {
        Self {
            kind: ModelKind::BmIncrements,
            step: DEFAULT_STEP,
        }
    }

    pub fn ou(theta: f64, sigma: f64) -> Self {
        Self {
            kind: ModelKind::Ou { theta, sigma },
            step: DEFAULT_STEP,
        }
    }

    /// Unit-step fBm increments, the discrete sequence of the Breuer–Major
    /// setting.
    pub fn fbm_increments(hurst: f64) -> Self {
        Self {
            kind: ModelKind::FbmIncrements { hurst },
            step: 1.0,
        }
    }

    pub fn with_step(self, step: f64) -> Self {
        Self { step, ..self }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::WhiteNoise => "white_noise",
            ModelKind::BmIncrements => "bm_increments",
            ModelKind::Ou { .. } => "ou",
            ModelKind::FbmIncrements { .. } => "fbm_increments",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid("observation step must be positive"));
        }
        match self.kind {
            ModelKind::Ou { theta, sigma } if !(theta > 0.0 && sigma > 0.0) => {
                Err(invalid("OU parameters must be positive"))
            }
            ModelKind::FbmIncrements { hurst } if !(hurst > 0.0 && hurst < 0.5) => Err(
                Error::UnsupportedModel(format!("fbm_increments needs 0 < H < 1/2, got H = {hurst}")),
            ),
            _ => Ok(()),
        }
    }

    /// Unit-variance correlation at continuous lag `tau`.
    pub fn correlation(&self, tau: f64) -> f64 {
        match self.kind {
            ModelKind::WhiteNoise => {
                if tau == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ModelKind::BmIncrements => (1.0 - tau.abs()).max(0.0),
            ModelKind::Ou { theta, .. } => (-theta * tau.abs()).exp(),
            ModelKind::FbmIncrements { hurst } => fbm_increment_rho(hurst, tau),
        }
    }

    /// Correlation of the observed sequence at integer lags.
    pub fn covariance(&self) -> Result<StationaryCovariance> {
        self.validate()?;
        let spec = *self;
        let sum = self.sequence_abs_sum(100_000);
        Ok(StationaryCovariance::new(
            move |lag| spec.correlation(lag * spec.step),
            sum,
        ))
    }

    /// `Σ_{|ν| ≤ cutoff} |ρ(νΔ)|`.
    pub fn sequence_abs_sum(&self, cutoff: usize) -> f64 {
        let mut s = 1.0;
        for nu in 1..=cutoff {
            let r = self.correlation(nu as f64 * self.step).abs();
            if r == 0.0 && !matches!(self.kind, ModelKind::FbmIncrements { .. }) {
                break;
            }
            s += 2.0 * r;
        }
        s
    }

    /// `∫|ρ|` as used by the explicit constant (a sum for white noise).
    pub fn rho_abs_integral(&self) -> Result<f64> {
        self.validate()?;
        Ok(match self.kind {
            ModelKind::WhiteNoise => 1.0,
            ModelKind::BmIncrements => 2.0,
            ModelKind::Ou { theta, sigma } => sigma * sigma / (theta * theta),
            ModelKind::FbmIncrements { hurst } => {
                let body = simpson(|t| fbm_increment_rho(hurst, t).abs(), 0.0, 2.0, 20_000)
                    + simpson_log(|t| fbm_increment_rho(hurst, t).abs(), 2.0, FBM_TAIL_CUTOFF, 200_000);
                // ρ(τ) ~ H(2H-1) τ^{2H-2}
                let tail = hurst * (1.0 - 2.0 * hurst) * FBM_TAIL_CUTOFF.powf(2.0 * hurst - 1.0)
                    / (1.0 - 2.0 * hurst);
                2.0 * (body + tail)
            }
        })
    }

    /// Kernel `K_a(s)`.
    pub fn kernel(&self, a: f64, s: f64) -> Result<f64> {
        self.validate()?;
        let y = a - s;
        Ok(match self.kind {
            ModelKind::WhiteNoise | ModelKind::BmIncrements => {
                if s >= a && s < a + 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ModelKind::Ou { theta, sigma } => {
                if s < a {
                    sigma * (-theta * y).exp()
                } else {
                    0.0
                }
            }
            ModelKind::FbmIncrements { hurst } => {
                let e = hurst - 0.5;
                (pos_pow(y + 1.0, e) - pos_pow(y, e)) / fbm_c_h(hurst)
            }
        })
    }

    /// Dominator `g` with `|K_a(s)| ≤ g(a - s)`.
    pub fn dominator(&self, y: f64) -> Result<f64> {
        self.validate()?;
        Ok(match self.kind {
            ModelKind::WhiteNoise | ModelKind::BmIncrements => {
                if y > -1.0 && y <= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ModelKind::Ou { theta, sigma } => {
                if y > -1.0 {
                    sigma * (-theta * y).exp()
                } else {
                    0.0
                }
            }
            ModelKind::FbmIncrements { hurst } => {
                let (g1, g2) = fbm_dominator_parts(hurst, y);
                (g1 + g2) / fbm_c_h(hurst)
            }
        })
    }

    /// `∫ g` with the parts reported separately for fBm.
    pub fn g_integral(&self) -> Result<GIntegral> {
        self.validate()?;
        Ok(match self.kind {
            ModelKind::WhiteNoise | ModelKind::BmIncrements => GIntegral::single(1.0),
            ModelKind::Ou { theta, sigma } => GIntegral::single(sigma * theta.exp() / theta),
            ModelKind::FbmIncrements { hurst } => {
                let e = hurst - 0.5;
                let g1 = simpson_singular_left(|y| fbm_dominator_parts(hurst, y).0, -1.0, 0.0, 20_000);
                let near = simpson_singular_left(|y| fbm_dominator_parts(hurst, y).1, 0.0, 1.0, 20_000);
                let far = simpson_log(|y| fbm_dominator_parts(hurst, y).1, 1.0, FBM_TAIL_CUTOFF, 200_000);
                let tail = FBM_TAIL_CUTOFF.powf(e);
                let g2 = near + far + tail;
                let c = fbm_c_h(hurst);
                GIntegral {
                    total: (g1 + g2) / c,
                    parts: vec![g1, g2],
                    normalization: c,
                }
            }
        })
    }
}

/// `∫ g`; for fBm the unnormalized integrals of `g₁` and `g₂` and `c_H`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GIntegral {
    pub total: f64,
    pub parts: Vec<f64>,
    pub normalization: f64,
}

impl GIntegral {
    fn single(v: f64) -> Self {
        Self {
            total: v,
            parts: vec![v],
            normalization: 1.0,
        }
    }
}

fn pos_pow(x: f64, e: f64) -> f64 {
    if x > 0.0 {
        x.powf(e)
    } else {
        0.0
    }
}

/// Unnormalized fBm dominator split as `g₁(y) = (y+1)^{H-½}` on `(-1, 0]` and
/// `g₂(y) = y^{H-½} - (y+1)^{H-½}` on `(0, ∞)`.
fn fbm_dominator_parts(hurst: f64, y: f64) -> (f64, f64) {
    let e = hurst - 0.5;
    if y > -1.0 && y <= 0.0 {
        (pos_pow(y + 1.0, e), 0.0)
    } else if y > 0.0 {
        (0.0, y.powf(e) - (y + 1.0).powf(e))
    } else {
        (0.0, 0.0)
    }
}

/// Normalization making the moving-average fBm have unit-variance increments:
/// `c_H² = Γ(H+½)² / (Γ(2H+1) sin(πH))`.
pub fn fbm_c_h(hurst: f64) -> f64 {
    (gamma(hurst + 0.5).powi(2) / (gamma(2.0 * hurst + 1.0) * (std::f64::consts::PI * hurst).sin())).sqrt()
}

/// Correlation of unit-step fBm increments at lag `nu`.
pub fn fbm_increment_rho(hurst: f64, nu: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * ((nu + 1.0).abs().powf(h2) + (nu - 1.0).abs().powf(h2) - 2.0 * nu.abs().powf(h2))
}

/// `c = 4 (E|f''(N)|⁴ E|f'(N)|⁴)^{1/4} (∫g)² (∫|ρ|)^{1/2}`.
///
/// The total-variation bound for the functional over a horizon of length `T`
/// is then `c / (σ² √T)`.
pub fn nlfigp_constant(model: &StationaryModelSpec, f: &SubordinatingFunction) -> Result<f64> {
    let (m1, m2) = f.derivative_fourth_moments();
    let g = model.g_integral()?.total;
    Ok(4.0 * (m2 * m1).powf(0.25) * g * g * model.rho_abs_integral()?.sqrt())
}

/// `(1/√n) Σ_k (f(X_k) - E f(N))`.
pub fn normalized_sum(f: &SubordinatingFunction, mean: f64, x: &[f64]) -> f64 {
    x.iter().map(|&v| f.value(v) - mean).sum::<f64>() / (x.len() as f64).sqrt()
}

/// One Breuer–Major statistic from the given stream.
pub fn breuer_major_statistic(
    model: &StationaryModelSpec,
    f: &SubordinatingFunction,
    n: usize,
    seed: SeedSpec,
) -> Result<f64> {
    let sampler = StationarySampler::new(&model.covariance()?, n)?;
    Ok(normalized_sum(f, f.mean(), &sampler.sample(seed)))
}

/// `replicates` independent statistics. Stream `j` of `master_seed` yields
/// replicates `2j` and `2j + 1`.
pub fn breuer_major_replicates(
    model: &StationaryModelSpec,
    f: &SubordinatingFunction,
    n: usize,
    replicates: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    let sampler = StationarySampler::new(&model.covariance()?, n)?;
    let mean = f.mean();
    let streams = replicates.div_ceil(2);
    let base = SeedSpec::new(master_seed, 0);
    let chunks: Vec<Vec<f64>> = batch_ranges(streams, 64)
        .into_par_iter()
        .map(|r| {
            let mut out = Vec::with_capacity(2 * r.len());
            for j in r {
                let (a, b) = sampler.sample_pair(base.stream(j as u64));
                out.push(normalized_sum(f, mean, &a));
                out.push(normalized_sum(f, mean, &b));
            }
            out
        })
        .collect();
    let mut all: Vec<f64> = chunks.into_iter().flatten().collect();
    all.truncate(replicates);
    Ok(all)
}

/// Exact `Var F_n` from the Hermite expansion of `f`:
/// `Σ_q c_q²/q! Σ_{|ν|<n} (1 - |ν|/n) ρ(ν)^q`.
pub fn finite_n_variance(model: &StationaryModelSpec, f: &SubordinatingFunction, n: usize, q_max: usize) -> Result<f64> {
    model.validate()?;
    let c = hermite_coefficients(|x| f.value(x), q_max, GaussHermite::check());
    let rho: Vec<f64> = (0..n).map(|nu| model.correlation(nu as f64 * model.step)).collect();
    let mut total = 0.0;
    for (q, cq) in c.iter().enumerate().skip(1) {
        if cq.abs() < 1e-13 {
            continue;
        }
        let mut s = 1.0;
        for (nu, r) in rho.iter().enumerate().skip(1) {
            s += 2.0 * (1.0 - nu as f64 / n as f64) * r.powi(q as i32);
        }
        total += cq * cq / factorial(q) * s;
    }
    Ok(total)
}

/// Limiting `Var F_n` as `n → ∞`: `Σ_q c_q²/q! Σ_ν ρ(ν)^q`, lags truncated at `cutoff`.
pub fn limiting_variance(model: &StationaryModelSpec, f: &SubordinatingFunction, q_max: usize, cutoff: usize) -> Result<f64> {
    model.validate()?;
    let c = hermite_coefficients(|x| f.value(x), q_max, GaussHermite::check());
    let mut total = 0.0;
    for (q, cq) in c.iter().enumerate().skip(1) {
        if cq.abs() < 1e-13 {
            continue;
        }
        let mut s = 1.0;
        for nu in 1..=cutoff {
            s += 2.0 * model.correlation(nu as f64 * model.step).powi(q as i32);
        }
        total += cq * cq / factorial(q) * s;
    }
    Ok(total)
}

/// Bound for `F_n` through the finite-dimensional theorem on the `n × n`
/// Toeplitz covariance.
pub fn stationary_bound_mc(
    model: &StationaryModelSpec,
    f: &SubordinatingFunction,
    n: usize,
    metric: MetricKind,
    opts: &BoundOptions,
) -> Result<BoundReport> {
    let cov = model.covariance()?;
    let factor = cholesky_factor(&cov.toeplitz(n))?;
    let functional = SeparableFunctional::normalized_sum(f.clone(), n);
    finite_dim_bound(&factor, &functional, metric, opts)
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationReport {
    pub checked: usize,
    /// Pairs where the inequality is an equality.
    pub equalities: usize,
    pub max_ratio: f64,
    pub g_integral: GIntegral,
}

/// Checks `|K_a(s)| ≤ g(a - s)` for every pair of the two grids and
/// integrates `g`.
pub fn kernel_domination_check(model: &StationaryModelSpec, a_grid: &[f64], s_grid: &[f64]) -> Result<DominationReport> {
    if matches!(model.kind, ModelKind::WhiteNoise) {
        return Err(Error::UnsupportedModel("white noise has no continuous kernel".into()));
    }
    let mut equalities = 0;
    let mut max_ratio = 0.0f64;
    for &a in a_grid {
        for &s in s_grid {
            let k = model.kernel(a, s)?.abs();
            let g = model.dominator(a - s)?;
            if k > g * (1.0 + 1e-12) {
                return Err(Error::DominationViolated {
                    a,
                    s,
                    kernel: k,
                    dominator: g,
                });
            }
            if k == g {
                equalities += 1;
            }
            if g > 0.0 {
                max_ratio = max_ratio.max(k / g);
            }
        }
    }
    Ok(DominationReport {
        checked: a_grid.len() * s_grid.len(),
        equalities,
        max_ratio,
        g_integral: model.g_integral()?,
    })
}

/// Gaussian vector of the first `n` observations, for callers that need the
/// raw path.
pub fn sample_path(model: &StationaryModelSpec, n: usize, seed: SeedSpec) -> Result<DVector<f64>> {
    let s = StationarySampler::new(&model.covariance()?, n)?;
    Ok(DVector::from_vec(s.sample(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn h2() -> SubordinatingFunction {
        SubordinatingFunction::hermite_q(2)
    }

    #[test]
    fn fbm_rho_values() {
        assert_eq!(fbm_increment_rho(0.3, 0.0), 1.0);
        assert!(fbm_increment_rho(0.5, 1.0).abs() < 1e-15);
        assert_relative_eq!(fbm_increment_rho(0.25, 1.0), 0.5 * (2f64.sqrt() - 2.0), epsilon = 1e-15);
    }

    #[test]
    fn bm_constant() {
        let c = nlfigp_constant(&StationaryModelSpec::bm_increments(), &h2()).unwrap();
        assert_relative_eq!(c, 4.0 * 768f64.powf(0.25) * 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(c, 29.779355491267186, max_relative = 1e-12);
    }

    #[test]
    fn ou_constant_matches_oracle() {
        // Trapezoid rule on g(y) = e^{-y} 1[y > -1] over [-1, 40].
        let (a, b, n) = (-1.0f64, 40.0f64, 400_000);
        let h = (b - a) / n as f64;
        let mut g = 0.5 * ((-a).exp() + (-b).exp());
        for k in 1..n {
            g += (-(a + k as f64 * h)).exp();
        }
        g *= h;
        let oracle = 4.0 * 768f64.powf(0.25) * g * g;
        let c = nlfigp_constant(&StationaryModelSpec::ou(1.0, 1.0), &h2()).unwrap();
        assert_relative_eq!(c, oracle, max_relative = 1e-6);
        assert_relative_eq!(c, 155.59271539281198, max_relative = 1e-9);
    }

    #[test]
    fn linear_f_has_zero_constant() {
        let f = SubordinatingFunction::hermite_q(1);
        assert_eq!(nlfigp_constant(&StationaryModelSpec::ou(1.0, 1.0), &f).unwrap(), 0.0);
    }

    #[test]
    fn fbm_g_parts() {
        let m = StationaryModelSpec::fbm_increments(0.25);
        let g = m.g_integral().unwrap();
        assert_relative_eq!(g.parts[0], 4.0 / 3.0, max_relative = 1e-8);
        assert_relative_eq!(g.parts[1], 4.0 / 3.0, max_relative = 1e-6);
    }

    #[test]
    fn fbm_normalization_matches_quadrature() {
        for h in [0.1, 0.25, 0.4] {
            let e = h - 0.5;
            let sq = |s: f64| ((1.0 + s).powf(e) - s.powf(e)).powi(2);
            let v = simpson_singular_left(sq, 0.0, 1.0, 40_000)
                + simpson_log(sq, 1.0, 1e8, 400_000)
                + 1.0 / (2.0 * h);
            assert_relative_eq!(fbm_c_h(h).powi(2), v, max_relative = 1e-6);
        }
    }

    #[test]
    fn unsupported_hurst() {
        let f = h2();
        assert!(matches!(
            nlfigp_constant(&StationaryModelSpec::fbm_increments(0.6), &f),
            Err(Error::UnsupportedModel(_))
        ));
    }

    #[test]
    fn domination() {
        let grid: Vec<f64> = (-40..=40).map(|k| k as f64 * 0.1).collect();
        let bm = kernel_domination_check(&StationaryModelSpec::bm_increments(), &grid, &grid).unwrap();
        assert_eq!(bm.equalities, bm.checked);
        assert_eq!(bm.g_integral.total, 1.0);
        let ou = kernel_domination_check(&StationaryModelSpec::ou(1.0, 1.0), &grid, &grid).unwrap();
        assert!(ou.equalities < ou.checked);
        assert_relative_eq!(ou.g_integral.total, std::f64::consts::E, max_relative = 1e-8);
        let fbm = kernel_domination_check(&StationaryModelSpec::fbm_increments(0.25), &grid, &grid).unwrap();
        assert!(fbm.max_ratio <= 1.0);
    }

    #[test]
    fn ou_strict_where_kernel_vanishes() {
        let m = StationaryModelSpec::ou(1.0, 1.0);
        // s - a in (0, 1): K = 0 < g
        assert_eq!(m.kernel(0.0, 0.5).unwrap(), 0.0);
        assert!(m.dominator(-0.5).unwrap() > 0.0);
        assert_eq!(m.kernel(1.0, 0.2).unwrap(), m.dominator(0.8).unwrap());
    }

    #[test]
    fn linear_statistic_is_exactly_standard() {
        let f = SubordinatingFunction::hermite_q(1);
        let r = breuer_major_replicates(&StationaryModelSpec::white_noise(), &f, 64, 20_000, 3).unwrap();
        let m = r.iter().sum::<f64>() / r.len() as f64;
        let v = r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r.len() - 1) as f64;
        assert!((v - 1.0).abs() < 4.0 * (2.0f64 / 20_000.0).sqrt());
    }

    #[test]
    fn white_noise_square_moments() {
        let r = breuer_major_replicates(&StationaryModelSpec::white_noise(), &h2(), 1, 100_000, 5).unwrap();
        let n = r.len() as f64;
        let m = r.iter().sum::<f64>() / n;
        let v = r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(m.abs() < 4.0 * (2.0 / n).sqrt());
        // Var of (X² - 1)² is E[H₂⁴] - 4 = 60 - 4.
        assert!((v - 2.0).abs() < 4.0 * (56.0 / n).sqrt());
    }

    #[test]
    fn fbm_variance_against_series() {
        let model = StationaryModelSpec::fbm_increments(0.25);
        let series: f64 = 2.0 * (1.0 + 2.0 * (1..=1000).map(|nu| fbm_increment_rho(0.25, nu as f64).powi(2)).sum::<f64>());
        let r = breuer_major_replicates(&model, &h2(), 4096, 4_000, 8).unwrap();
        let n = r.len() as f64;
        let m = r.iter().sum::<f64>() / n;
        let dev: Vec<f64> = r.iter().map(|x| (x - m).powi(2)).collect();
        let v = dev.iter().sum::<f64>() / (n - 1.0);
        let se = (dev.iter().map(|d| (d - v).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!((v - series).abs() < 3.0 * se, "v = {v}, series = {series}, se = {se}");
        let exact = finite_n_variance(&model, &h2(), 4096, 8).unwrap();
        assert_relative_eq!(exact, series, max_relative = 2e-3);
    }

    #[test]
    fn bound_for_linear_f_is_zero() {
        let f = SubordinatingFunction::hermite_q(1);
        let r = stationary_bound_mc(&StationaryModelSpec::white_noise(), &f, 16, MetricKind::TotalVariation, &BoundOptions::new(200, 1)).unwrap();
        assert_eq!(r.bound, 0.0);
    }

    #[test]
    fn white_noise_bound_halves_over_fourfold_n() {
        let opts = BoundOptions::new(1_000, 2);
        let b: Vec<f64> = [64usize, 256]
            .iter()
            .map(|&n| stationary_bound_mc(&StationaryModelSpec::white_noise(), &h2(), n, MetricKind::TotalVariation, &opts).unwrap().bound)
            .collect();
        let ratio = b[0] / b[1];
        assert!((1.7..=2.3).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn variance_is_cauchy_in_n() {
        let m = StationaryModelSpec::ou(1.0, 1.0);
        let v: Vec<f64> = [64, 128, 256, 512, 1024]
            .iter()
            .map(|&n| finite_n_variance(&m, &h2(), n, 8).unwrap())
            .collect();
        for w in v.windows(3) {
            assert!((w[2] - w[1]).abs() < (w[1] - w[0]).abs());
        }
        let lim = limiting_variance(&m, &h2(), 8, 10_000).unwrap();
        assert!((v[4] - lim).abs() < (v[0] - lim).abs());
    }

    proptest! {
        #[test]
        fn fbm_rho_is_even(h in 0.01f64..0.49, nu in 0.0f64..50.0) {
            prop_assert_eq!(fbm_increment_rho(h, nu), fbm_increment_rho(h, -nu));
        }

        #[test]
        fn fbm_partial_sums_settle(h in 0.05f64..0.45) {
            let m = StationaryModelSpec::fbm_increments(h);
            let (a, b, c) = (m.sequence_abs_sum(1_000), m.sequence_abs_sum(10_000), m.sequence_abs_sum(100_000));
            // |ρ(ν)| ~ H(1-2H) ν^{2H-2}, so the two-sided tail over (N₁, N₂] is 2H(N₁^{2H-1} - N₂^{2H-1}).
            let tail = |n1: f64, n2: f64| 2.0 * h * (n1.powf(2.0 * h - 1.0) - n2.powf(2.0 * h - 1.0));
            prop_assert!(((b - a) / tail(1e3, 1e4) - 1.0).abs() < 0.02);
            prop_assert!(c - b < b - a);
        }
    }
}
