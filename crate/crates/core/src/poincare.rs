//! Second-order Poincaré bounds estimated by Monte Carlo.
//!
//! For a centered functional `F` of a Gaussian vector the distance to a normal
//! law with the same variance `σ²` is bounded by
//!
//! | metric | bound |
//! |--------|-------|
//! | total variation | `(4/σ²) √R` |
//! | Kolmogorov | `(2/σ²) √R` |
//! | Wasserstein | `√(8/(σ²π)) √R` |
//!
//! with `R = Σ_{k,l} w_k w_l √E[(D²F ⊗₁ D²F)_{kl}²] √E[(DF_k DF_l)²]`.
//! All expectations are estimated over a fixed number of batches of
//! contiguous streams. Standard errors come from the delta method on batch
//! means, so they include the uncertainty of the `σ²` estimate.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{symmetric_eigen_extremes, CovarianceFactor};
use crate::rng::{batch_ranges, fill_standard_normal, SeedSpec};

/// Default number of Monte Carlo batches.
pub const DEFAULT_BATCHES: usize = 32;
/// A functional whose mean is further than this many standard errors from
/// zero is rejected.
pub const CENTERING_Z: f64 = 4.0;
const MIN_VARIANCE: f64 = 1e-10;
const BATCH_STORAGE_BYTES: usize = 1 << 27;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "TV")]
    TotalVariation,
    #[serde(rename = "Kol")]
    Kolmogorov,
    #[serde(rename = "W")]
    Wasserstein,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [
        MetricKind::TotalVariation,
        MetricKind::Kolmogorov,
        MetricKind::Wasserstein,
    ];

    pub fn constant(self, sigma2: f64) -> f64 {
        match self {
            MetricKind::TotalVariation => 4.0 / sigma2,
            MetricKind::Kolmogorov => 2.0 / sigma2,
            MetricKind::Wasserstein => (8.0 / (sigma2 * std::f64::consts::PI)).sqrt(),
        }
    }

    /// `d log c / d log σ²`.
    fn sigma2_elasticity(self) -> f64 {
        match self {
            MetricKind::Wasserstein => -0.5,
            _ => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MetricKind::TotalVariation => "TV",
            MetricKind::Kolmogorov => "Kol",
            MetricKind::Wasserstein => "W",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "TV" | "tv" => Ok(MetricKind::TotalVariation),
            "Kol" | "kol" => Ok(MetricKind::Kolmogorov),
            "W" | "w" => Ok(MetricKind::Wasserstein),
            _ => Err(invalid(format!("unknown metric `{s}`"))),
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// A twice differentiable functional of a finite Gaussian vector.
pub trait Functional: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

type VecFn = Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type HessFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// A [`Functional`] assembled from closures.
pub struct FunctionalSpec {
    pub dim: usize,
    pub value: VecFn,
    pub gradient: GradFn,
    pub hessian: HessFn,
}

impl Functional for FunctionalSpec {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.hessian)(x)
    }
}

/// One evaluation of a discretized field functional: value, `DF` on the
/// cells and `D²F` on pairs of cells.
pub struct FieldSample {
    pub value: f64,
    pub df: DVector<f64>,
    pub d2f: DMatrix<f64>,
}

/// A functional of white noise discretized on cells with measures `weights`.
///
/// The noise vector `z` has one standard normal per cell; the Gaussian
/// measure of cell `k` is `z_k √w_k`.
pub trait DiscretizedField: Sync {
    fn weights(&self) -> &[f64];
    fn evaluate(&self, z: &DVector<f64>) -> FieldSample;
}

/// `(K ⊗₁ K)_{kl} = Σ_m K_km K_ml w_m`.
pub fn contract1(k: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut kw = k.clone();
    for (j, &wj) in w.iter().enumerate() {
        kw.column_mut(j).scale_mut(wj);
    }
    kw * k
}

#[derive(Clone, Debug)]
pub struct BoundOptions {
    pub n_mc: usize,
    pub seed: u64,
    /// Use this variance instead of the Monte Carlo estimate.
    pub sigma2: Option<f64>,
    pub batches: usize,
    pub check_centering: bool,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            n_mc: 10_000,
            seed: 0,
            sigma2: None,
            batches: DEFAULT_BATCHES,
            check_centering: true,
        }
    }
}

impl BoundOptions {
    pub fn new(n_mc: usize, seed: u64) -> Self {
        Self {
            n_mc,
            seed,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricBound {
    pub bound: f64,
    pub se: f64,
}

#[derive(Clone, Debug)]
pub struct BoundReport {
    pub metric: MetricKind,
    pub sigma2: f64,
    pub sigma2_se: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub radicand: f64,
    pub radicand_se: f64,
    pub bound: f64,
    pub se: f64,
    pub all: BTreeMap<MetricKind, MetricBound>,
    pub n_mc: usize,
    pub seed: u64,
    pub d: usize,
    pub weights: Vec<f64>,
    pub t1: DMatrix<f64>,
    pub t2: DMatrix<f64>,
}

impl BoundReport {
    pub fn for_metric(&self, metric: MetricKind) -> MetricBound {
        self.all[&metric]
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "metric": self.metric,
            "sigma2": self.sigma2,
            "bound": self.bound,
            "se": self.se,
            "n_mc": self.n_mc,
            "seed": self.seed,
            "d": self.d,
        })
    }

    /// `k,l,t1,t2` rows for every index pair.
    pub fn write_arrays_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "k,l,t1,t2")?;
        for k in 0..self.d {
            for l in 0..self.d {
                writeln!(
                    out,
                    "{k},{l},{},{}",
                    crate::experiment::fmt_f64(self.t1[(k, l)]),
                    crate::experiment::fmt_f64(self.t2[(k, l)])
                )?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Running sums over one batch.
struct Moments {
    count: usize,
    sum_v: f64,
    sum_v2: f64,
    s1: DMatrix<f64>,
    s2: DMatrix<f64>,
}

impl Moments {
    fn new(m: usize) -> Self {
        Self {
            count: 0,
            sum_v: 0.0,
            sum_v2: 0.0,
            s1: DMatrix::zeros(m, m),
            s2: DMatrix::zeros(m, m),
        }
    }

    fn push(&mut self, value: f64, first: &DVector<f64>, contracted: &DMatrix<f64>) {
        self.count += 1;
        self.sum_v += value;
        self.sum_v2 += value * value;
        self.s1.zip_apply(contracted, |a, c| *a += c * c);
        let m = first.len();
        for l in 0..m {
            let fl = first[l];
            for k in 0..m {
                let p = first[k] * fl;
                self.s2[(k, l)] += p * p;
            }
        }
    }
}

/// Estimates `R`, `σ²` and the three bounds from per-sample terms.
///
/// `eval(z, stream)` returns `(F, DF, D²F ⊗₁ D²F)` for noise `z`.
fn estimate<E>(
    noise_dim: usize,
    weights: &[f64],
    metric: MetricKind,
    opts: &BoundOptions,
    eval: E,
) -> Result<BoundReport>
where
    E: Fn(&DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) + Sync,
{
    if opts.n_mc < 2 {
        return Err(invalid("need at least two Monte Carlo samples"));
    }
    let m = weights.len();
    let max_batches = (BATCH_STORAGE_BYTES / (16 * m * m).max(1)).max(2);
    let ranges = batch_ranges(opts.n_mc, opts.batches.min(max_batches).max(2));
    let base = SeedSpec::new(opts.seed, 0);
    let batches: Vec<Moments> = ranges
        .par_iter()
        .map(|r| {
            let mut acc = Moments::new(m);
            let mut z = DVector::zeros(noise_dim);
            for stream in r.clone() {
                let mut rng = base.stream(stream as u64).rng();
                fill_standard_normal(&mut rng, z.as_mut_slice());
                let (v, first, contracted) = eval(&z);
                acc.push(v, &first, &contracted);
            }
            acc
        })
        .collect();

    let n = opts.n_mc as f64;
    let sum_v: f64 = batches.iter().map(|b| b.sum_v).sum();
    let sum_v2: f64 = batches.iter().map(|b| b.sum_v2).sum();
    let mean = sum_v / n;
    let var_hat = ((sum_v2 - n * mean * mean) / (n - 1.0)).max(0.0);
    let mean_se = (var_hat / n).sqrt();
    if opts.check_centering && mean.abs() > CENTERING_Z * mean_se && mean.abs() > 1e-12 {
        return Err(Error::NotCentered {
            mean,
            z: mean / mean_se,
        });
    }
    let sigma2 = opts.sigma2.unwrap_or(var_hat);
    if !(sigma2 >= MIN_VARIANCE) {
        return Err(Error::DegenerateVariance(sigma2));
    }

    let mut t1 = DMatrix::zeros(m, m);
    let mut t2 = DMatrix::zeros(m, m);
    for b in &batches {
        t1 += &b.s1;
        t2 += &b.s2;
    }
    t1 /= n;
    t2 /= n;
    let r1 = t1.map(f64::sqrt);
    let r2 = t2.map(f64::sqrt);
    let mut radicand = 0.0;
    for l in 0..m {
        for k in 0..m {
            radicand += weights[k] * weights[l] * r1[(k, l)] * r2[(k, l)];
        }
    }

    // Linearized influence of each batch on R and on σ².
    let k_batches = batches.len() as f64;
    let psi: Vec<f64> = batches
        .iter()
        .map(|b| {
            let nb = b.count as f64;
            let mut acc = 0.0;
            for l in 0..m {
                for k in 0..m {
                    let mut term = 0.0;
                    if r1[(k, l)] > 0.0 {
                        term += (b.s1[(k, l)] / nb - t1[(k, l)]) / (2.0 * r1[(k, l)]) * r2[(k, l)];
                    }
                    if r2[(k, l)] > 0.0 {
                        term += r1[(k, l)] * (b.s2[(k, l)] / nb - t2[(k, l)]) / (2.0 * r2[(k, l)]);
                    }
                    acc += weights[k] * weights[l] * term;
                }
            }
            acc
        })
        .collect();
    let sigma_dev: Vec<f64> = batches
        .iter()
        .map(|b| {
            let nb = b.count as f64;
            let vb = b.sum_v2 / nb - (b.sum_v / nb).powi(2);
            vb - sigma2
        })
        .collect();
    let estimate_sigma = opts.sigma2.is_none();
    let sd_of_mean = |xs: &[f64]| {
        let mu = xs.iter().sum::<f64>() / k_batches;
        let v = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (k_batches - 1.0);
        (v / k_batches).sqrt().max(0.0)
    };
    let radicand_se = sd_of_mean(&psi);
    let sigma2_se = if estimate_sigma {
        sd_of_mean(&sigma_dev)
    } else {
        0.0
    };

    let mut all = BTreeMap::new();
    for kind in MetricKind::ALL {
        let bound = kind.constant(sigma2) * radicand.sqrt();
        let phi: Vec<f64> = psi
            .iter()
            .zip(&sigma_dev)
            .map(|(p, s)| {
                let mut rel = if radicand > 0.0 { 0.5 * p / radicand } else { 0.0 };
                if estimate_sigma {
                    rel += kind.sigma2_elasticity() * s / sigma2;
                }
                bound * rel
            })
            .collect();
        all.insert(
            kind,
            MetricBound {
                bound,
                se: sd_of_mean(&phi),
            },
        );
    }
    let chosen = all[&metric];
    Ok(BoundReport {
        metric,
        sigma2,
        sigma2_se,
        mean,
        mean_se,
        radicand,
        radicand_se,
        bound: chosen.bound,
        se: chosen.se,
        all,
        n_mc: opts.n_mc,
        seed: opts.seed,
        d: m,
        weights: weights.to_vec(),
        t1,
        t2,
    })
}

/// Bound for `F(X)` with `X = B Z ~ N(0, BBᵀ)`.
///
/// Works with `G = F ∘ B`, so `∇G = Bᵀ∇F(BZ)` and `∇²G = Bᵀ∇²F(BZ) B`.
pub fn finite_dim_bound(
    model: &CovarianceFactor,
    f: &dyn Functional,
    metric: MetricKind,
    opts: &BoundOptions,
) -> Result<BoundReport> {
    let d = model.dim();
    if f.dim() != d {
        return Err(invalid("functional and covariance dimensions differ"));
    }
    let b = model.matrix();
    let bt = b.transpose();
    let weights = vec![1.0; d];
    estimate(d, &weights, metric, opts, |z| {
        let x = b * z;
        let g = &bt * f.gradient(&x);
        let h = &bt * (f.hessian(&x) * b);
        let hh = &h * &h;
        (f.value(&x), g, hh)
    })
}

/// Bound for a functional of white noise on a weighted cell discretization.
pub fn field_bound(
    field: &dyn DiscretizedField,
    metric: MetricKind,
    opts: &BoundOptions,
) -> Result<BoundReport> {
    let w = field.weights().to_vec();
    if w.is_empty() || w.iter().any(|&v| !(v > 0.0)) {
        return Err(invalid("cell weights must be positive"));
    }
    estimate(w.len(), &w, metric, opts, |z| {
        let s = field.evaluate(z);
        let c = contract1(&s.d2f, &w);
        (s.value, s.df, c)
    })
}

#[derive(Clone, Debug)]
pub struct MultivariateBound {
    pub bound: f64,
    pub cov_norm: f64,
    pub inv_cov_norm: f64,
    pub radicand: f64,
    pub n_mc: usize,
    pub seed: u64,
}

/// Smooth-distance bound between `(F_1, …, F_d)` and `N(0, C)`:
/// `2√d ‖C⁻¹‖ ‖C‖ √(Σ_kl (Σ_i √T1⁽ⁱ⁾_kl)(Σ_j √T2⁽ʲ⁾_kl))`.
pub fn multivariate_bound(
    components: &[&dyn Functional],
    model: &CovarianceFactor,
    target_cov: &DMatrix<f64>,
    opts: &BoundOptions,
) -> Result<MultivariateBound> {
    let d = components.len();
    if d == 0 || target_cov.nrows() != d || target_cov.ncols() != d {
        return Err(invalid("target covariance must be d x d for d components"));
    }
    let (min, max) = symmetric_eigen_extremes(target_cov);
    let norm = max.abs().max(min.abs());
    if min < 1e-10 * norm {
        return Err(Error::SingularCovariance { min, norm });
    }
    let m = model.dim();
    let b = model.matrix();
    let bt = b.transpose();
    let base = SeedSpec::new(opts.seed, 0);
    let ranges = batch_ranges(opts.n_mc, opts.batches.max(1));
    let sums: Vec<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, Vec<f64>, Vec<f64>)> = ranges
        .par_iter()
        .map(|r| {
            let mut s1 = vec![DMatrix::zeros(m, m); d];
            let mut s2 = vec![DMatrix::zeros(m, m); d];
            let mut sv = vec![0.0; d];
            let mut sv2 = vec![0.0; d];
            let mut z = DVector::zeros(m);
            for stream in r.clone() {
                fill_standard_normal(&mut base.stream(stream as u64).rng(), z.as_mut_slice());
                let x = b * &z;
                for (i, f) in components.iter().enumerate() {
                    let v = f.value(&x);
                    sv[i] += v;
                    sv2[i] += v * v;
                    let g = &bt * f.gradient(&x);
                    let h = &bt * (f.hessian(&x) * b);
                    let hh = &h * &h;
                    s1[i].zip_apply(&hh, |a, c| *a += c * c);
                    for l in 0..m {
                        for k in 0..m {
                            s2[i][(k, l)] += (g[k] * g[l]).powi(2);
                        }
                    }
                }
            }
            (s1, s2, sv, sv2)
        })
        .collect();
    let n = opts.n_mc as f64;
    let mut a1 = DMatrix::zeros(m, m);
    let mut a2 = DMatrix::zeros(m, m);
    for i in 0..d {
        let mut t1 = DMatrix::<f64>::zeros(m, m);
        let mut t2 = DMatrix::<f64>::zeros(m, m);
        let (mut sv, mut sv2) = (0.0, 0.0);
        for s in &sums {
            t1 += &s.0[i];
            t2 += &s.1[i];
            sv += s.2[i];
            sv2 += s.3[i];
        }
        let mean = sv / n;
        let se = ((sv2 / n - mean * mean).max(0.0) / n).sqrt();
        if opts.check_centering && mean.abs() > CENTERING_Z * se && mean.abs() > 1e-12 {
            return Err(Error::NotCentered { mean, z: mean / se });
        }
        a1 += (t1 / n).map(f64::sqrt);
        a2 += (t2 / n).map(f64::sqrt);
    }
    let radicand = a1.component_mul(&a2).sum();
    let inv_norm = 1.0 / min;
    Ok(MultivariateBound {
        bound: 2.0 * (d as f64).sqrt() * inv_norm * norm * radicand.sqrt(),
        cov_norm: norm,
        inv_cov_norm: inv_norm,
        radicand,
        n_mc: opts.n_mc,
        seed: opts.seed,
    })
}

/// Both sides of `Var F(X) ≤ E‖Bᵀ∇F(X)‖²` with standard errors.
#[derive(Clone, Debug, Serialize)]
pub struct PoincareCheck {
    pub variance: f64,
    pub variance_se: f64,
    pub gradient_energy: f64,
    pub gradient_energy_se: f64,
    /// `gradient_energy - variance`.
    pub gap: f64,
    pub gap_se: f64,
}

pub fn gaussian_poincare_check(
    model: &CovarianceFactor,
    f: &dyn Functional,
    n_mc: usize,
    seed: u64,
) -> Result<PoincareCheck> {
    if n_mc < 2 {
        return Err(invalid("need at least two Monte Carlo samples"));
    }
    let b = model.matrix();
    let bt = b.transpose();
    let base = SeedSpec::new(seed, 0);
    let mut z = DVector::zeros(model.dim());
    let mut v = Vec::with_capacity(n_mc);
    let mut e = Vec::with_capacity(n_mc);
    for k in 0..n_mc {
        fill_standard_normal(&mut base.stream(k as u64).rng(), z.as_mut_slice());
        let x = b * &z;
        v.push(f.value(&x));
        e.push((&bt * f.gradient(&x)).norm_squared());
    }
    let n = n_mc as f64;
    let mv = v.iter().sum::<f64>() / n;
    let me = e.iter().sum::<f64>() / n;
    let dv: Vec<f64> = v.iter().map(|x| (x - mv).powi(2)).collect();
    let variance = dv.iter().sum::<f64>() / (n - 1.0);
    let mdv = dv.iter().sum::<f64>() / n;
    let se = |xs: &[f64], m: f64| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let gap: Vec<f64> = e.iter().zip(&dv).map(|(a, b)| a - b).collect();
    let mg = gap.iter().sum::<f64>() / n;
    Ok(PoincareCheck {
        variance,
        variance_se: se(&dv, mdv),
        gradient_energy: me,
        gradient_energy_se: se(&e, me),
        gap: me - variance,
        gap_se: se(&gap, mg),
    })
}

/// Largest relative errors of the analytic gradient and Hessian against
/// central differences at `x`.
#[derive(Clone, Copy, Debug)]
pub struct DerivativeCheck {
    pub gradient_error: f64,
    pub hessian_error: f64,
}

pub fn check_derivatives(f: &dyn Functional, x: &DVector<f64>, step: f64) -> DerivativeCheck {
    let d = f.dim();
    let g = f.gradient(x);
    let h = f.hessian(x);
    let mut fd_g = DVector::zeros(d);
    let mut fd_h = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += step;
        xm[i] -= step;
        fd_g[i] = (f.value(&xp) - f.value(&xm)) / (2.0 * step);
        let col = (f.gradient(&xp) - f.gradient(&xm)) / (2.0 * step);
        fd_h.set_column(i, &col);
    }
    let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / scale.max(1e-300);
    let gs = g.amax().max(fd_g.amax());
    let hs = h.amax().max(fd_h.amax());
    DerivativeCheck {
        gradient_error: g.iter().zip(fd_g.iter()).map(|(a, b)| rel(*a, *b, gs)).fold(0.0, f64::max),
        hessian_error: h.iter().zip(fd_h.iter()).map(|(a, b)| rel(*a, *b, hs)).fold(0.0, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::{SeparableFunctional, SubordinatingFunction};
    use crate::linalg::cholesky_factor;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn h2(d: usize) -> SeparableFunctional {
        SeparableFunctional::new(SubordinatingFunction::hermite_q(2), d, 1.0)
    }

    #[test]
    fn constants() {
        assert_eq!(MetricKind::TotalVariation.constant(2.0), 2.0);
        assert_eq!(MetricKind::Kolmogorov.constant(2.0), 1.0);
        assert_relative_eq!(MetricKind::Wasserstein.constant(2.0), (4.0 / std::f64::consts::PI).sqrt());
        assert_eq!(serde_json::to_string(&MetricKind::Kolmogorov).unwrap(), "\"Kol\"");
    }

    #[test]
    fn contraction_matches_loop() {
        let k = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, 2.0, -1.0, 3.0, 0.5, 3.0, 2.0]);
        let w = [0.2, 1.5, 0.7];
        let c = contract1(&k, &w);
        for a in 0..3 {
            for b in 0..3 {
                let want: f64 = (0..3).map(|m| k[(a, m)] * k[(m, b)] * w[m]).sum();
                assert_relative_eq!(c[(a, b)], want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn one_dimensional_square() {
        let r = finite_dim_bound(
            &CovarianceFactor::identity(1),
            &h2(1),
            MetricKind::TotalVariation,
            &BoundOptions::new(200_000, 4),
        )
        .unwrap();
        // T1 = 16, T2 = 48, σ² = 2.
        assert_relative_eq!(r.t1[(0, 0)], 16.0, epsilon = 1e-12);
        assert_relative_eq!(r.t2[(0, 0)], 48.0, max_relative = 0.03);
        assert_relative_eq!(r.sigma2, 2.0, max_relative = 0.02);
        assert!(r.se > 0.0 && r.se < 0.1);
        let all = r.for_metric(MetricKind::Kolmogorov);
        assert_relative_eq!(all.bound, r.bound / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn uncentered_functional_is_rejected() {
        let f = SeparableFunctional::new(SubordinatingFunction::polynomial(&[0.0, 0.0, 1.0]).unwrap(), 1, 1.0);
        // Mean subtraction makes this centered; shift it back.
        let shifted = FunctionalSpec {
            dim: 1,
            value: Box::new(move |x| f.value(x) + 1.0),
            gradient: Box::new(|x| x.map(|v| 2.0 * v)),
            hessian: Box::new(|_| DMatrix::from_element(1, 1, 2.0)),
        };
        let err = finite_dim_bound(
            &CovarianceFactor::identity(1),
            &shifted,
            MetricKind::TotalVariation,
            &BoundOptions::new(5_000, 1),
        );
        assert!(matches!(err, Err(Error::NotCentered { .. })));
    }

    #[test]
    fn linear_functional_has_zero_bound() {
        let f = FunctionalSpec {
            dim: 2,
            value: Box::new(|x| x[0] - x[1]),
            gradient: Box::new(|_| DVector::from_vec(vec![1.0, -1.0])),
            hessian: Box::new(|_| DMatrix::zeros(2, 2)),
        };
        let r = finite_dim_bound(
            &CovarianceFactor::identity(2),
            &f,
            MetricKind::Wasserstein,
            &BoundOptions::new(1_000, 0),
        )
        .unwrap();
        assert_eq!(r.bound, 0.0);
        assert_eq!(r.se, 0.0);
    }

    #[test]
    fn field_with_unit_weights_matches_finite_dim() {
        struct Unit(SeparableFunctional, Vec<f64>);
        impl DiscretizedField for Unit {
            fn weights(&self) -> &[f64] {
                &self.1
            }
            fn evaluate(&self, z: &DVector<f64>) -> FieldSample {
                FieldSample {
                    value: self.0.value(z),
                    df: self.0.gradient(z),
                    d2f: self.0.hessian(z),
                }
            }
        }
        let opts = BoundOptions::new(4_000, 2);
        let a = finite_dim_bound(&CovarianceFactor::identity(3), &h2(3), MetricKind::Kolmogorov, &opts).unwrap();
        let b = field_bound(&Unit(h2(3), vec![1.0; 3]), MetricKind::Kolmogorov, &opts).unwrap();
        assert_relative_eq!(a.bound, b.bound, max_relative = 1e-12);
        assert_eq!(b.weights.iter().sum::<f64>(), 3.0);
    }

    #[test]
    fn multivariate_rejects_singular_target() {
        let f = h2(2);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let r = multivariate_bound(&[&f, &f], &CovarianceFactor::identity(2), &c, &BoundOptions::new(100, 0));
        assert!(matches!(r, Err(Error::SingularCovariance { .. })));
    }

    #[test]
    fn multivariate_single_component() {
        let f = h2(1);
        let c = DMatrix::from_element(1, 1, 2.0);
        let r = multivariate_bound(&[&f], &CovarianceFactor::identity(1), &c, &BoundOptions::new(20_000, 3)).unwrap();
        // 2 · 1/2 · 2 · √(√16 √48)
        assert_relative_eq!(r.bound, 2.0 * (4.0 * 48f64.sqrt()).sqrt(), max_relative = 0.02);
    }

    #[test]
    fn poincare_linear_is_tight() {
        let f = FunctionalSpec {
            dim: 1,
            value: Box::new(|x| x[0]),
            gradient: Box::new(|_| DVector::from_element(1, 1.0)),
            hessian: Box::new(|_| DMatrix::zeros(1, 1)),
        };
        let c = gaussian_poincare_check(&CovarianceFactor::identity(1), &f, 50_000, 9).unwrap();
        assert_eq!(c.gradient_energy, 1.0);
        assert!(c.gap.abs() < 4.0 * c.gap_se);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn poincare_inequality_holds(seed in any::<u64>(), d in 1usize..5) {
            let z = crate::rng::sample_standard_gaussian(d * d, SeedSpec::new(seed, 1));
            let g = DMatrix::from_vec(d, d, z);
            let model = cholesky_factor(&(&g * g.transpose() + DMatrix::identity(d, d))).unwrap();
            let f = SeparableFunctional::new(SubordinatingFunction::named("sin").unwrap(), d, 1.0);
            let c = gaussian_poincare_check(&model, &f, 4_000, seed).unwrap();
            prop_assert!(c.gap > -4.0 * c.gap_se);
        }

        #[test]
        fn correlated_bound_is_finite_and_nonnegative(seed in any::<u64>(), d in 1usize..4) {
            let z = crate::rng::sample_standard_gaussian(d * d, SeedSpec::new(seed, 2));
            let g = DMatrix::from_vec(d, d, z);
            let c = &g * g.transpose() + DMatrix::identity(d, d);
            let corr = DMatrix::from_fn(d, d, |i, j| c[(i, j)] / (c[(i, i)] * c[(j, j)]).sqrt());
            let model = cholesky_factor(&corr).unwrap();
            let r = finite_dim_bound(&model, &h2(d), MetricKind::TotalVariation, &BoundOptions::new(2_000, seed)).unwrap();
            prop_assert!(r.bound.is_finite() && r.bound >= 0.0 && r.se >= 0.0);
        }
    }
}
