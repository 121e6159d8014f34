//! Trace statistics of Gaussian Wigner matrices.
//!
//! `A = Y/√n` with `Y` symmetric and `Y_ij ~ N(0, 1/4)` independent for
//! `i ≤ j`. The bound machinery works with
//!
//! * `B_iklm = (16p²/n²) Σ_{Q=0}^{2p-4} (Q+1) (A^Q)_km (A^{2p-4-Q})_il`,
//! * `𝒜₁ = E[B²]` and `𝒜₂ = (p⁴/n²) E[(A^{p-1})_ik² (A^{p-1})_lm²]`,
//! * `d_TV(F_n, N)² ≤ π² Σ_{iklm} √𝒜₁ √𝒜₂`.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{matrix_powers, symmetric_power, symmetric_product};
use crate::rng::{batch_ranges, fill_standard_normal, SeedSpec};

/// Largest `n` for which dense `n⁴` moment arrays are allocated.
pub const DENSE_CAP: usize = 64;
const BATCHES: usize = 16;

/// Wigner matrix from one stream. Entries are drawn row by row over the upper
/// triangle.
pub fn sample_wigner(n: usize, seed: SeedSpec) -> DMatrix<f64> {
    let mut z = vec![0.0; n * (n + 1) / 2];
    fill_standard_normal(&mut seed.rng(), &mut z);
    let scale = 0.5 / (n as f64).sqrt();
    let mut a = DMatrix::zeros(n, n);
    let mut t = 0;
    for i in 0..n {
        for j in i..n {
            let v = scale * z[t];
            a[(i, j)] = v;
            a[(j, i)] = v;
            t += 1;
        }
    }
    a
}

/// `Tr A^p` as `⟨A^⌊p/2⌋, A^⌈p/2⌉⟩`.
pub fn trace_power_stat(a: &DMatrix<f64>, p: usize) -> f64 {
    match p {
        0 => a.nrows() as f64,
        1 => a.trace(),
        _ => {
            let lo = symmetric_power(a, p / 2);
            if p % 2 == 0 {
                lo.norm_squared()
            } else {
                lo.dot(&symmetric_product(&lo, a))
            }
        }
    }
}

/// `∂ Tr(A^p)/∂a_ij = p (A^{p-1})_ji`, entries treated as independent.
pub fn trace_power_gradient(a: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    if p == 0 {
        return DMatrix::zeros(a.nrows(), a.ncols());
    }
    (symmetric_power(a, p - 1) * p as f64).transpose()
}

/// `∂² Tr(A^p)/∂a_ij ∂a_rs = p Σ_{q=0}^{p-2} (A^q)_jr (A^{p-2-q})_is`.
pub struct HessianEvaluator {
    powers: Vec<DMatrix<f64>>,
    p: usize,
}

impl HessianEvaluator {
    pub fn new(a: &DMatrix<f64>, p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::PTooSmall(p));
        }
        Ok(Self {
            powers: matrix_powers(a, p - 2),
            p,
        })
    }

    pub fn eval(&self, i: usize, j: usize, r: usize, s: usize) -> f64 {
        let p = self.p;
        (0..=p - 2)
            .map(|q| self.powers[q][(j, r)] * self.powers[p - 2 - q][(i, s)])
            .sum::<f64>()
            * p as f64
    }
}

/// Powers `A⁰ … A^{max(2p-4, p-1)}` needed by [`b_iklm`] and the moment arrays.
pub fn wigner_powers(a: &DMatrix<f64>, p: usize) -> Vec<DMatrix<f64>> {
    matrix_powers(a, (2 * p).saturating_sub(4).max(p.saturating_sub(1)))
}

/// The single-sum form `(16p²/n²) Σ_Q (Q+1) (A^Q)_km (A^{2p-4-Q})_il`.
pub fn b_iklm(powers: &[DMatrix<f64>], p: usize, i: usize, k: usize, l: usize, m: usize) -> f64 {
    assert!(p >= 2);
    let n = powers[0].nrows() as f64;
    let top = 2 * p - 4;
    let s: f64 = (0..=top)
        .map(|q| (q + 1) as f64 * powers[q][(k, m)] * powers[top - q][(i, l)])
        .sum();
    16.0 * (p * p) as f64 / (n * n) * s
}

/// The eight-term double sum over `(q₁, q₂)` that precedes the single-sum form.
pub fn b_iklm_expanded(powers: &[DMatrix<f64>], p: usize, i: usize, k: usize, l: usize, m: usize) -> f64 {
    assert!(p >= 2);
    let n = powers[0].nrows() as f64;
    let r = p - 2;
    let top = 2 * p - 4;
    let pw = |e: usize, a: usize, b: usize| powers[e][(a, b)];
    let mut s = 0.0;
    for q1 in 0..=r {
        for q2 in 0..=r {
            let (sa, sb) = (q1 + q2, top - q1 - q2);
            let (ca, cb) = (q1 + r - q2, q2 + r - q1);
            s += pw(sa, k, m) * pw(sb, i, l)
                + pw(ca, k, l) * pw(cb, i, m)
                + pw(sa, k, l) * pw(sb, i, m)
                + pw(ca, k, m) * pw(cb, i, l)
                + pw(sa, i, m) * pw(sb, k, l)
                + pw(ca, i, l) * pw(cb, k, m)
                + pw(sa, i, l) * pw(sb, k, m)
                + pw(ca, i, m) * pw(cb, k, l);
        }
    }
    2.0 * (p * p) as f64 / (n * n) * s
}

#[derive(Clone, Debug)]
pub struct WignerConfig {
    pub n: usize,
    pub p: usize,
    pub n_mc: usize,
    pub seed: u64,
    /// Number of uniformly drawn index tuples; required above [`DENSE_CAP`].
    pub subsample: Option<usize>,
}

impl WignerConfig {
    pub fn new(n: usize, p: usize, n_mc: usize, seed: u64) -> Self {
        Self {
            n,
            p,
            n_mc,
            seed,
            subsample: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// The `p^{7/8}/n^{1/4}` term dominates.
    #[serde(rename = "p^{7/8}/n^{1/4}")]
    Quarter,
    /// The `p^{15/8}/√n` term dominates.
    #[serde(rename = "p^{15/8}/sqrt(n)")]
    Half,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClosedBound {
    pub d_tv_bound: f64,
    pub term_quarter: f64,
    pub term_half: f64,
    pub regime: Regime,
}

/// `4π (e^{3/4}/(2π)^{3/8} p^{7/8}/n^{1/4} + 2e/(2^{1/8}√π) p^{15/8}/√n)`.
pub fn wigner_closed_bound(n: f64, p: f64) -> ClosedBound {
    use std::f64::consts::{E, PI};
    let term_quarter = E.powf(0.75) / (2.0 * PI).powf(0.375) * p.powf(0.875) / n.powf(0.25);
    let term_half = 2.0 * E / (2f64.powf(0.125) * PI.sqrt()) * p.powf(1.875) / n.sqrt();
    ClosedBound {
        d_tv_bound: 4.0 * PI * (term_quarter + term_half),
        term_quarter,
        term_half,
        regime: if term_half > term_quarter {
            Regime::Half
        } else {
            Regime::Quarter
        },
    }
}

/// Ratio constant `K` with `term_half / term_quarter = K p / n^{1/4}`.
pub fn regime_ratio_constant() -> f64 {
    use std::f64::consts::{E, PI};
    2.0 * E * (2.0 * PI).powf(0.375) / (2f64.powf(0.125) * PI.sqrt() * E.powf(0.75))
}

/// Power `p* = n^{1/4}/K` at which the two terms are equal.
pub fn regime_threshold(n: f64) -> f64 {
    n.powf(0.25) / regime_ratio_constant()
}

/// Per-tuple upper expressions for `𝒜₁` and `𝒜₂`, evaluated as displayed and
/// without the `(1 + o(1))` factor. Parity combinations outside the displayed
/// branches contribute zero.
pub fn prop_a1_a2_closed(i: usize, k: usize, l: usize, m: usize, n: usize, p: usize) -> Result<(f64, f64)> {
    use std::f64::consts::{E, PI};
    if p < 2 {
        return Err(Error::PTooSmall(p));
    }
    let (nf, pf) = (n as f64, p as f64);
    let p3 = pf.powi(3);
    let top = 2 * p - 4;
    let mut s = 0.0;
    for q1 in 0..=top {
        for q2 in 0..=top {
            let w = ((q1 + 1) * (q2 + 1)) as f64;
            let qq = (q1 + q2) as f64 / 2.0;
            let root = (2.0 * PI * PI * p3 * qq.powi(3)).sqrt();
            let mut term = 0.0;
            if q1 == 0 && q2 == 0 {
                let base = E / (2.0 * (2.0 * PI * p3).sqrt());
                term += if i == l { base } else { base / nf };
            }
            if q1 % 2 == 0 && q2 % 2 == 0 && q1 != 0 {
                let e2 = E * E / root;
                term += 2.0
                    * match (i == l, k == m) {
                        (true, true) => e2,
                        (false, true) => 2.0 * e2 / nf,
                        (false, false) => e2 / (nf * nf),
                        (true, false) => 0.0,
                    };
            }
            if q1 % 2 == 1 && q2 % 2 == 1 {
                term += E * E / (nf * nf * root);
            }
            s += w * term;
        }
    }
    let a1 = 256.0 * pf.powi(4) / nf.powi(4) * s;
    let ind = match (i == k, l == m) {
        (false, false) => 1.0 / (nf * nf * p3),
        (true, false) => 1.0 / (nf * p3),
        (true, true) => 1.0 / p3,
        (false, true) => 0.0,
    };
    let a2 = pf.powi(4) / (nf * nf) * E * E / PI * ind;
    Ok((a1, a2))
}

#[derive(Clone, Debug, Serialize)]
pub struct WignerEstimates {
    pub n: usize,
    pub p: usize,
    pub n_mc: usize,
    pub seed: u64,
    pub mean_trace: f64,
    pub mean_se: f64,
    pub var_trace: f64,
    pub var_se: f64,
    pub bound_mc: f64,
    pub bound_mc_se: f64,
    pub bound_closed: ClosedBound,
    #[serde(skip)]
    pub a1: Vec<f64>,
    #[serde(skip)]
    pub a2: Vec<f64>,
    /// Sampled `(i, k, l, m)` tuples when subsampling, else `None`.
    #[serde(skip)]
    pub tuples: Option<Vec<[usize; 4]>>,
}

impl WignerEstimates {
    /// `(𝒜₁, 𝒜₂)` at a tuple; dense storage only.
    pub fn at(&self, i: usize, k: usize, l: usize, m: usize) -> Option<(f64, f64)> {
        if self.tuples.is_some() {
            return None;
        }
        let n = self.n;
        let idx = ((i * n + l) * n + k) * n + m;
        Some((self.a1[idx], self.a2[idx]))
    }
}

/// Layout of the per-sample contributions.
enum Layout {
    Dense,
    Sampled(Vec<[usize; 4]>),
}

impl Layout {
    fn len(&self, n: usize) -> usize {
        match self {
            Layout::Dense => n.pow(4),
            Layout::Sampled(t) => t.len(),
        }
    }
}

/// Adds `B²` and the `𝒜₂` integrand (without `p⁴/n²`) for one matrix, or
/// their dot products with `weights` when given.
fn accumulate(powers: &[DMatrix<f64>], p: usize, layout: &Layout, acc1: &mut [f64], acc2: &mut [f64]) {
    let n = powers[0].nrows();
    let top = 2 * p - 4;
    let coef = 16.0 * (p * p) as f64 / (n * n) as f64;
    let g = &powers[p - 1];
    match layout {
        Layout::Dense => {
            let nn = n * n;
            acc1.par_chunks_mut(nn)
                .zip(acc2.par_chunks_mut(nn))
                .enumerate()
                .for_each(|(il, (c1, c2))| {
                    let (i, l) = (il / n, il % n);
                    let w: Vec<f64> = (0..=top)
                        .map(|q| coef * (q + 1) as f64 * powers[top - q][(i, l)])
                        .collect();
                    for k in 0..n {
                        let gik = g[(i, k)] * g[(i, k)];
                        for m in 0..n {
                            let mut b = 0.0;
                            for (q, wq) in w.iter().enumerate() {
                                b += wq * powers[q][(k, m)];
                            }
                            c1[k * n + m] += b * b;
                            c2[k * n + m] += gik * g[(l, m)] * g[(l, m)];
                        }
                    }
                });
        }
        Layout::Sampled(tuples) => {
            for (t, &[i, k, l, m]) in tuples.iter().enumerate() {
                let b = b_iklm(powers, p, i, k, l, m);
                acc1[t] += b * b;
                acc2[t] += (g[(i, k)] * g[(l, m)]).powi(2);
            }
        }
    }
}

/// Monte Carlo estimates of `𝒜₁`, `𝒜₂`, `Var Tr A^p` and the assembled bound.
pub fn estimate_a1_a2(config: &WignerConfig) -> Result<WignerEstimates> {
    let (n, p) = (config.n, config.p);
    if p < 2 {
        return Err(Error::PTooSmall(p));
    }
    if n == 0 || config.n_mc < 2 {
        return Err(invalid("need n >= 1 and at least two samples"));
    }
    let layout = match config.subsample {
        None if n > DENSE_CAP => return Err(Error::StorageCapExceeded { n, cap: DENSE_CAP }),
        None => Layout::Dense,
        Some(count) => {
            let mut rng = SeedSpec::new(config.seed, 0).derive(0x7475_706c).rng();
            Layout::Sampled(
                (0..count)
                    .map(|_| std::array::from_fn(|_| rng.random_range(0..n)))
                    .collect(),
            )
        }
    };
    let len = layout.len(n);
    let base = SeedSpec::new(config.seed, 0);
    let ranges = batch_ranges(config.n_mc, BATCHES);
    let mut acc1 = vec![0.0; len];
    let mut acc2 = vec![0.0; len];
    let mut traces = Vec::with_capacity(config.n_mc);
    let mut batch_sums: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(ranges.len());
    let keep_batches = len * ranges.len() * 16 <= 1 << 30;
    for r in &ranges {
        let mut b1 = vec![0.0; if keep_batches { len } else { 0 }];
        let mut b2 = vec![0.0; if keep_batches { len } else { 0 }];
        for k in r.clone() {
            let a = sample_wigner(n, base.stream(k as u64));
            let powers = wigner_powers(&a, p);
            traces.push(trace_from_powers(&powers, p));
            if keep_batches {
                accumulate(&powers, p, &layout, &mut b1, &mut b2);
            } else {
                accumulate(&powers, p, &layout, &mut acc1, &mut acc2);
            }
        }
        if keep_batches {
            for (a, b) in acc1.iter_mut().zip(&b1) {
                *a += b;
            }
            for (a, b) in acc2.iter_mut().zip(&b2) {
                *a += b;
            }
            batch_sums.push((b1, b2));
        }
    }
    let nmc = config.n_mc as f64;
    let scale2 = (p as f64).powi(4) / (n * n) as f64;
    let a1: Vec<f64> = acc1.iter().map(|v| v / nmc).collect();
    let a2: Vec<f64> = acc2.iter().map(|v| scale2 * v / nmc).collect();
    let ht = match &layout {
        Layout::Dense => 1.0,
        Layout::Sampled(t) => (n as f64).powi(4) / t.len() as f64,
    };
    let sum: f64 = a1.iter().zip(&a2).map(|(x, y)| x.sqrt() * y.sqrt()).sum::<f64>() * ht;
    let bound_mc = std::f64::consts::PI * sum.sqrt();

    let bound_mc_se = if keep_batches && sum > 0.0 {
        let psi: Vec<f64> = batch_sums
            .iter()
            .zip(&ranges)
            .map(|((b1, b2), r)| {
                let nb = r.len() as f64;
                let mut s = 0.0;
                for t in 0..len {
                    let (r1, r2) = (a1[t].sqrt(), a2[t].sqrt());
                    if r1 > 0.0 {
                        s += (b1[t] / nb - a1[t]) / (2.0 * r1) * r2;
                    }
                    if r2 > 0.0 {
                        s += r1 * (scale2 * b2[t] / nb - a2[t]) / (2.0 * r2);
                    }
                }
                s * ht
            })
            .collect();
        let kb = psi.len() as f64;
        let mean = psi.iter().sum::<f64>() / kb;
        let var = psi.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (kb - 1.0);
        // d(π√S) = π dS / (2√S)
        std::f64::consts::PI / (2.0 * sum.sqrt()) * (var / kb).sqrt()
    } else {
        f64::NAN
    };

    let (mean_trace, mean_se, var_trace, var_se) = moments(&traces);
    Ok(WignerEstimates {
        n,
        p,
        n_mc: config.n_mc,
        seed: config.seed,
        mean_trace,
        mean_se,
        var_trace,
        var_se,
        bound_mc,
        bound_mc_se,
        bound_closed: wigner_closed_bound(n as f64, p as f64),
        a1,
        a2,
        tuples: match layout {
            Layout::Dense => None,
            Layout::Sampled(t) => Some(t),
        },
    })
}

fn trace_from_powers(powers: &[DMatrix<f64>], p: usize) -> f64 {
    let (lo, hi) = (p / 2, p - p / 2);
    if hi < powers.len() {
        powers[lo].dot(&powers[hi])
    } else {
        trace_power_stat(&powers[1], p)
    }
}

/// Mean, its SE, unbiased variance and its SE.
fn moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let d: Vec<f64> = x.iter().map(|v| (v - m).powi(2)).collect();
    let var = d.iter().sum::<f64>() / (n - 1.0);
    let md = d.iter().sum::<f64>() / n;
    let var_se = (d.iter().map(|v| (v - md).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    (m, (var / n).sqrt(), var, var_se)
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceSample {
    pub n: usize,
    pub p: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub var: f64,
    pub var_se: f64,
    #[serde(skip)]
    pub values: Vec<f64>,
}

/// `samples` draws of `Tr A^p`; draw `k` uses stream `k`.
pub fn trace_samples(n: usize, p: usize, samples: usize, seed: u64) -> Result<TraceSample> {
    if n == 0 || samples < 2 {
        return Err(invalid("need n >= 1 and at least two samples"));
    }
    let base = SeedSpec::new(seed, 0);
    let values: Vec<f64> = batch_ranges(samples, 64)
        .into_par_iter()
        .map(|r| {
            r.map(|k| trace_power_stat(&sample_wigner(n, base.stream(k as u64)), p))
                .collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let (mean, mean_se, var, var_se) = moments(&values);
    Ok(TraceSample {
        n,
        p,
        mean,
        mean_se,
        var,
        var_se,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use approx::assert_relative_eq;

    #[test]
    fn entries_have_quarter_variance() {
        let n = 10;
        let r = 4_000;
        let mut s = 0.0;
        for k in 0..r {
            let a = sample_wigner(n, SeedSpec::new(1, k));
            assert_eq!(a, a.transpose());
            s += a[(2, 7)].powi(2);
        }
        let want = 1.0 / (4.0 * n as f64);
        assert!((s / r as f64 - want).abs() < 4.0 * want * (2.0 / r as f64).sqrt());
    }

    #[test]
    fn top_eigenvalue_is_near_one() {
        let mut s = 0.0;
        for k in 0..3 {
            let a = sample_wigner(400, SeedSpec::new(2, k));
            s += a.symmetric_eigen().eigenvalues.max();
        }
        let mean = s / 3.0;
        assert!((0.9..=1.1).contains(&mean), "{mean}");
    }

    #[test]
    fn trace_matches_dense_power() {
        let a = sample_wigner(9, SeedSpec::new(3, 0));
        for p in 0..=7 {
            let dense = (0..p).fold(DMatrix::identity(9, 9), |acc, _| acc * &a).trace();
            assert_relative_eq!(trace_power_stat(&a, p), dense, epsilon = 1e-13, max_relative = 1e-12);
        }
        assert!(trace_power_stat(&a, 2) >= 0.0);
    }

    #[test]
    fn gradient_low_powers() {
        let a = sample_wigner(5, SeedSpec::new(4, 0));
        assert_eq!(trace_power_gradient(&a, 1), DMatrix::<f64>::identity(5, 5));
        assert!(max_abs(&(trace_power_gradient(&a, 2) - &a * 2.0)) < 1e-15);
    }

    #[test]
    fn hessian_p2_and_symmetry() {
        let a = sample_wigner(4, SeedSpec::new(5, 0));
        let h = HessianEvaluator::new(&a, 2).unwrap();
        assert_eq!(h.eval(1, 2, 2, 1), 2.0);
        assert_eq!(h.eval(1, 2, 3, 1), 0.0);
        assert!(matches!(HessianEvaluator::new(&a, 1), Err(Error::PTooSmall(1))));
        let h3 = HessianEvaluator::new(&a, 4).unwrap();
        for (i, j, r, s) in [(0, 1, 2, 3), (3, 3, 1, 0), (2, 0, 0, 2)] {
            assert_relative_eq!(h3.eval(i, j, r, s), h3.eval(r, s, i, j), epsilon = 1e-14);
        }
    }

    #[test]
    fn b_for_p2_is_deterministic() {
        let a = sample_wigner(6, SeedSpec::new(6, 0));
        let pw = wigner_powers(&a, 2);
        assert_eq!(b_iklm(&pw, 2, 1, 3, 1, 3), 64.0 / 36.0);
        assert_eq!(b_iklm(&pw, 2, 1, 3, 2, 3), 0.0);
    }

    /// `Σ_{j,h} X_{ik,jh} X_{lm,jh}` with every index indicator set to one,
    /// `X_{ik,jh} = (p/n) Σ_q [four power products]`.
    fn b_direct(powers: &[DMatrix<f64>], p: usize, i: usize, k: usize, l: usize, m: usize) -> f64 {
        let n = powers[0].nrows();
        let r = p - 2;
        let x = |i: usize, k: usize, j: usize, h: usize| -> f64 {
            (0..=r)
                .map(|q| {
                    let (a, b) = (&powers[q], &powers[r - q]);
                    a[(k, j)] * b[(h, i)] + a[(k, h)] * b[(j, i)] + a[(i, j)] * b[(h, k)] + a[(i, h)] * b[(j, k)]
                })
                .sum::<f64>()
                * p as f64
                / n as f64
        };
        let mut s = 0.0;
        for j in 0..n {
            for h in 0..n {
                s += x(i, k, j, h) * x(m, l, j, h);
            }
        }
        s
    }

    #[test]
    fn expanded_form_matches_direct_contraction() {
        for p in 2..=5 {
            let a = sample_wigner(5, SeedSpec::new(11, p as u64));
            let pw = wigner_powers(&a, p);
            for (i, k, l, m) in [(0, 1, 2, 3), (1, 0, 4, 2), (3, 2, 3, 1), (2, 4, 0, 0)] {
                let direct = b_direct(&pw, p, i, k, l, m);
                assert_relative_eq!(b_iklm_expanded(&pw, p, i, k, l, m), direct, max_relative = 1e-12, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn pair_count_weights() {
        // #{(q₁, q₂) ∈ [0, p-2]² : q₁ + q₂ = Q} = min(Q + 1, 2p - 3 - Q).
        let a = sample_wigner(6, SeedSpec::new(12, 0));
        for p in 2..=6usize {
            let pw = wigner_powers(&a, p);
            let (i, k, l, m) = (0, 1, 2, 3);
            let top = 2 * p - 4;
            let mut pairs = 0.0;
            for q1 in 0..=p - 2 {
                for q2 in 0..=p - 2 {
                    pairs += pw[q1 + q2][(k, m)] * pw[top - q1 - q2][(i, l)];
                }
            }
            let counted: f64 = (0..=top)
                .map(|q| (q + 1).min(2 * p - 3 - q) as f64 * pw[q][(k, m)] * pw[top - q][(i, l)])
                .sum();
            assert_relative_eq!(pairs, counted, max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn b_is_homogeneous() {
        let a = sample_wigner(5, SeedSpec::new(7, 0));
        let c = 1.7;
        let (pa, pc) = (wigner_powers(&a, 4), wigner_powers(&(&a * c), 4));
        assert_relative_eq!(b_iklm(&pc, 4, 0, 1, 2, 3), c.powi(4) * b_iklm(&pa, 4, 0, 1, 2, 3), max_relative = 1e-12);
    }

    #[test]
    fn p2_moment_arrays() {
        let est = estimate_a1_a2(&WignerConfig::new(5, 2, 50, 1)).unwrap();
        let c = (64.0f64 / 25.0).powi(2);
        assert_relative_eq!(est.at(1, 2, 1, 2).unwrap().0, c, max_relative = 1e-12);
        assert_eq!(est.at(1, 2, 3, 2).unwrap().0, 0.0);
        assert!(est.a1.iter().chain(&est.a2).all(|v| *v >= 0.0));
    }

    #[test]
    fn storage_cap() {
        let cfg = WignerConfig::new(65, 3, 10, 0);
        assert!(matches!(estimate_a1_a2(&cfg), Err(Error::StorageCapExceeded { .. })));
        let mut sub = cfg;
        sub.subsample = Some(500);
        let est = estimate_a1_a2(&sub).unwrap();
        assert!(est.bound_mc > 0.0 && est.tuples.as_ref().unwrap().len() == 500);
    }

    #[test]
    fn subsampling_is_unbiased() {
        let dense = estimate_a1_a2(&WignerConfig::new(8, 3, 200, 3)).unwrap();
        let mut cfg = WignerConfig::new(8, 3, 200, 3);
        cfg.subsample = Some(40_000);
        let sub = estimate_a1_a2(&cfg).unwrap();
        assert_relative_eq!(sub.bound_mc, dense.bound_mc, max_relative = 0.05);
    }

    #[test]
    fn a2_diagonal_dominance() {
        let n = 30;
        let est = estimate_a1_a2(&WignerConfig::new(n, 3, 400, 2)).unwrap();
        let (mut diag, mut off) = (0.0, 0.0);
        let (mut nd, mut no) = (0, 0);
        for i in 0..n {
            for l in 0..n {
                diag += est.at(i, i, l, l).unwrap().1;
                nd += 1;
                for (k, m) in [((i + 1) % n, (l + 2) % n), ((i + 3) % n, (l + 5) % n)] {
                    off += est.at(i, k, l, m).unwrap().1;
                    no += 1;
                }
            }
        }
        let ratio = (diag / nd as f64) / (off / no as f64);
        assert!(ratio > n as f64, "ratio = {ratio}");
    }

    #[test]
    fn closed_a2_examples() {
        use std::f64::consts::{E, PI};
        let (n, p) = (20usize, 4usize);
        let (nf, pf) = (n as f64, p as f64);
        assert_relative_eq!(prop_a1_a2_closed(0, 1, 2, 3, n, p).unwrap().1, E * E * pf / (PI * nf.powi(4)), max_relative = 1e-14);
        assert_relative_eq!(prop_a1_a2_closed(1, 1, 2, 2, n, p).unwrap().1, E * E * pf / (PI * nf * nf), max_relative = 1e-14);
        assert!(matches!(prop_a1_a2_closed(0, 1, 2, 3, n, 1), Err(Error::PTooSmall(1))));
    }

    #[test]
    fn closed_a1_for_p2_keeps_only_origin_term() {
        use std::f64::consts::{E, PI};
        let (a1, _) = prop_a1_a2_closed(0, 1, 0, 3, 10, 2).unwrap();
        let want = 256.0 * 16.0 / 1e4 * E / (2.0 * (2.0 * PI * 8.0).sqrt());
        assert_relative_eq!(a1, want, max_relative = 1e-14);
    }

    #[test]
    fn closed_bound_regimes() {
        let k = regime_ratio_constant();
        let b = wigner_closed_bound(1e8, 2.0);
        assert_relative_eq!(b.term_half / b.term_quarter, k * 2.0 / 1e2, max_relative = 1e-12);
        assert_eq!(b.regime, Regime::Quarter);
        assert_eq!(wigner_closed_bound(1e4, 20.0).regime, Regime::Half);
        let mut prev = f64::INFINITY;
        for n in [1e3, 1e6, 1e9] {
            let p = (n as f64).powf(0.25).floor();
            let v = wigner_closed_bound(n, p).d_tv_bound;
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn odd_moment_vanishes() {
        let t = trace_samples(200, 3, 400, 4).unwrap();
        assert!(t.mean.abs() < 4.0 * t.mean_se);
    }

    #[test]
    fn trace_of_first_power_has_quarter_variance() {
        let t = trace_samples(20, 1, 20_000, 5).unwrap();
        assert!((t.var - 0.25).abs() < 4.0 * t.var_se);
    }
}
