//! Functionals of the Brownian sheet on `[ε, 1]ⁿ`.
//!
//! The statistic is `F̂_ε = L^{-n/2} (F_ε - E f(N) Lⁿ)` with `L = log(1/ε)` and
//! `F_ε = ∫_{[ε,1]ⁿ} f(W(x)/√(x₁⋯xₙ)) dx/(x₁⋯xₙ)`. In `u = log(1/x)` the
//! integrand is a stationary field with correlation `e^{-|u-v|/2}` per axis and
//! the measure becomes Lebesgue on `[0, L]ⁿ`, so a uniform midpoint grid in `u`
//! is used for the quadrature.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::distance::{DistanceReport, EmpiricalSample};
use crate::error::{invalid, Error, Result};
use crate::function::SubordinatingFunction;
use crate::hermite::{factorial, hermite_coefficients, GaussHermite};
use crate::poincare::{field_bound, BoundOptions, BoundReport, DiscretizedField, FieldSample, MetricKind};
use crate::rate::{rate_fit, RateFit};
use crate::rng::{batch_ranges, fill_standard_normal, SeedSpec};
use crate::sim::BrownianSheetGrid;

pub const DEFAULT_Q_MAX: usize = 16;
pub const MIN_NODES: usize = 16;
pub const MAX_DIM: usize = 3;
/// Grid nodes per unit of `L` used by [`SheetConfig::new`].
pub const DEFAULT_NODES_PER_UNIT: f64 = 16.0;
const TAIL_TOLERANCE: f64 = 1e-6;

pub use crate::hermite::hermite as hermite_poly;

/// `f = Σ c_q/q! He_q` with `c_q = E[f(N) He_q(N)]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HermiteExpansion {
    pub coeffs: Vec<f64>,
    pub q_max: usize,
}

impl HermiteExpansion {
    pub fn of(f: &SubordinatingFunction, q_max: usize) -> Self {
        Self {
            coeffs: hermite_coefficients(|x| f.value(x), q_max, GaussHermite::check()),
            q_max,
        }
    }

    /// `Σ c_q²/q!`, which equals `E f(N)²` when nothing is truncated.
    pub fn parseval_sum(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(q, c)| c * c / factorial(q))
            .sum()
    }
}

/// `∫∫_{[0,L]²} e^{-q|u-v|/2} du dv = (4/q) L - (8/q²)(1 - e^{-qL/2})`.
pub fn sheet_inner_integral(q: usize, epsilon: f64) -> f64 {
    let l = (1.0 / epsilon).ln();
    let q = q as f64;
    4.0 / q * l - 8.0 / (q * q) * (-(-q * l / 2.0).exp_m1())
}

#[derive(Clone, Debug)]
pub struct SheetConfig {
    pub n_dim: usize,
    pub epsilon: f64,
    pub nodes_per_axis: usize,
    pub f: SubordinatingFunction,
    pub q_max: usize,
}

impl SheetConfig {
    /// Config with `max(16, ⌈16 L⌉)` nodes per axis.
    pub fn new(n_dim: usize, epsilon: f64, f: SubordinatingFunction) -> Self {
        let l = (1.0 / epsilon).ln();
        Self {
            n_dim,
            epsilon,
            nodes_per_axis: ((DEFAULT_NODES_PER_UNIT * l).ceil() as usize).max(MIN_NODES),
            f,
            q_max: DEFAULT_Q_MAX,
        }
    }

    pub fn from_log_length(n_dim: usize, log_length: f64, f: SubordinatingFunction) -> Self {
        Self::new(n_dim, (-log_length).exp(), f)
    }

    pub fn with_nodes(self, nodes_per_axis: usize) -> Self {
        Self {
            nodes_per_axis,
            ..self
        }
    }

    pub fn log_length(&self) -> f64 {
        (1.0 / self.epsilon).ln()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_dim == 0 || self.n_dim > MAX_DIM {
            return Err(invalid(format!("sheet dimension must be in 1..={MAX_DIM}")));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon must lie in (0, 1)"));
        }
        if self.nodes_per_axis < MIN_NODES {
            return Err(Error::InsufficientPoints {
                need: MIN_NODES,
                got: self.nodes_per_axis,
            });
        }
        Ok(())
    }

    /// Increasing nodes `x_j = e^{-u}` at the `u`-midpoints.
    pub fn axis_nodes(&self) -> Vec<f64> {
        let m = self.nodes_per_axis;
        let h = self.log_length() / m as f64;
        (0..m).rev().map(|k| (-(k as f64 + 0.5) * h).exp()).collect()
    }
}

/// `Var F̂_ε = L^{-n} Σ_q (c_q²/q!) I_q(ε)ⁿ`, truncated at `q_max`.
pub fn sheet_variance(config: &SheetConfig) -> Result<f64> {
    config.validate()?;
    let n = config.n_dim as i32;
    let l = config.log_length();
    let wide = HermiteExpansion::of(&config.f, config.q_max + 32);
    let mut partial = 0.0;
    for q in 1..=config.q_max {
        let c = wide.coeffs[q];
        partial += c * c / factorial(q) * sheet_inner_integral(q, config.epsilon).powi(n);
    }
    let mut tail = 0.0;
    for q in (config.q_max + 1)..wide.coeffs.len() {
        let c = wide.coeffs[q];
        tail += c * c / factorial(q) * (4.0 * l / q as f64).powi(n);
    }
    let scale = l.powi(-n);
    if tail * scale > TAIL_TOLERANCE * partial * scale {
        return Err(Error::TailNotNegligible {
            tail: tail * scale,
            partial: partial * scale,
        });
    }
    Ok(partial * scale)
}

/// Closed-form bound evaluator `C_n / L^{n/2}`.
pub fn sheet_bound_prediction(c_n: f64, n_dim: usize, log_length: f64) -> f64 {
    c_n / log_length.powf(n_dim as f64 / 2.0)
}

/// Precomputed grid for repeated simulation of `F̂_ε`.
#[derive(Clone, Debug)]
pub struct SheetSimulator {
    config: SheetConfig,
    grid: BrownianSheetGrid,
    inv_sqrt_prod: Vec<f64>,
    cell_weight: f64,
    mean: f64,
}

impl SheetSimulator {
    pub fn new(config: &SheetConfig) -> Result<Self> {
        config.validate()?;
        let nodes = config.axis_nodes();
        let grid = BrownianSheetGrid::new(vec![nodes.clone(); config.n_dim])?;
        let shape = grid.shape();
        let inv_sqrt_prod = (0..grid.len())
            .map(|idx| {
                let mut p = 1.0;
                let mut rest = idx;
                for &m in shape.iter().rev() {
                    p *= nodes[rest % m];
                    rest /= m;
                }
                1.0 / p.sqrt()
            })
            .collect();
        let h = config.log_length() / config.nodes_per_axis as f64;
        Ok(Self {
            config: config.clone(),
            grid,
            inv_sqrt_prod,
            cell_weight: h.powi(config.n_dim as i32),
            mean: config.f.mean(),
        })
    }

    pub fn config(&self) -> &SheetConfig {
        &self.config
    }

    /// Number of grid nodes, which is also the noise dimension.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    fn statistic(&self, sheet: &[f64]) -> f64 {
        let f = &self.config.f;
        let acc: f64 = sheet
            .iter()
            .zip(&self.inv_sqrt_prod)
            .map(|(w, s)| f.value(w * s))
            .sum();
        let l = self.config.log_length();
        let n = self.config.n_dim as i32;
        (self.cell_weight * acc - self.mean * l.powi(n)) / l.powf(n as f64 / 2.0)
    }

    /// `F̂_ε` from cell noise `z`.
    pub fn from_noise(&self, z: &[f64]) -> f64 {
        let mut w = z.to_vec();
        self.grid.from_noise(&mut w);
        self.statistic(&w)
    }

    pub fn simulate(&self, seed: SeedSpec) -> f64 {
        self.statistic(&self.grid.sample(seed))
    }

    /// Unscaled `F_ε` from the same draw, for checking its mean `E f(N) Lⁿ`.
    pub fn simulate_raw(&self, seed: SeedSpec) -> f64 {
        let l = self.config.log_length();
        let n = self.config.n_dim as i32;
        self.simulate(seed) * l.powf(n as f64 / 2.0) + self.mean * l.powi(n)
    }

    /// Replicate `k` uses stream `k` of `master_seed`.
    pub fn replicates(&self, count: usize, master_seed: u64) -> Vec<f64> {
        let base = SeedSpec::new(master_seed, 0);
        batch_ranges(count, 64)
            .into_par_iter()
            .map(|r| r.map(|k| self.simulate(base.stream(k as u64))).collect::<Vec<f64>>())
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    }
}

pub fn simulate_sheet_functional(config: &SheetConfig, seed: SeedSpec) -> Result<f64> {
    Ok(SheetSimulator::new(config)?.simulate(seed))
}

/// `F̂_ε` as a functional of the cell noise, with `DF̂` and `D²F̂` on the cells.
///
/// Cell `t` is the box `∏ (x_{t_i - 1}, x_{t_i}]` with measure `w_t`. With
/// `K_x(t) = 1[t ≤ x]/√(x₁⋯xₙ)`,
/// `DF̂(t) = c Σ_k f'(V_k) K_{x_k}(t)` and
/// `D²F̂(t, s) = c Σ_k f''(V_k) K_{x_k}(t) K_{x_k}(s)`
/// where `c = L^{-n/2} hⁿ` is the quadrature weight times the scaling.
pub struct SheetField {
    sim: SheetSimulator,
    weights: Vec<f64>,
    shape: Vec<usize>,
}

impl SheetField {
    pub fn new(config: &SheetConfig) -> Result<Self> {
        let sim = SheetSimulator::new(config)?;
        let nodes = config.axis_nodes();
        let mut h = Vec::with_capacity(nodes.len());
        let mut prev = 0.0;
        for &x in &nodes {
            h.push(x - prev);
            prev = x;
        }
        let shape = vec![nodes.len(); config.n_dim];
        let total = sim.len();
        let weights = (0..total)
            .map(|idx| {
                let mut p = 1.0;
                let mut rest = idx;
                for &m in shape.iter().rev() {
                    p *= h[rest % m];
                    rest /= m;
                }
                p
            })
            .collect();
        Ok(Self { sim, weights, shape })
    }

    pub fn simulator(&self) -> &SheetSimulator {
        &self.sim
    }

    fn suffix_sums(&self, v: &mut [f64]) {
        let total = v.len();
        let mut stride = total;
        for &m in &self.shape {
            stride /= m;
            let outer = total / (m * stride);
            for o in 0..outer {
                let base = o * m * stride;
                for inner in 0..stride {
                    let mut acc = 0.0;
                    for k in (0..m).rev() {
                        let idx = base + k * stride + inner;
                        acc += v[idx];
                        v[idx] = acc;
                    }
                }
            }
        }
    }

    fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.shape.len()];
        for (d, &m) in self.shape.iter().enumerate().rev() {
            out[d] = idx % m;
            idx /= m;
        }
        out
    }

    fn ravel(&self, ix: &[usize]) -> usize {
        ix.iter().zip(&self.shape).fold(0, |acc, (&i, &m)| acc * m + i)
    }
}

impl DiscretizedField for SheetField {
    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn evaluate(&self, z: &DVector<f64>) -> FieldSample {
        let sim = &self.sim;
        let mut w = z.as_slice().to_vec();
        sim.grid.from_noise(&mut w);
        let value = sim.statistic(&w);
        let l = sim.config.log_length();
        let c = sim.cell_weight / l.powf(sim.config.n_dim as f64 / 2.0);
        let f = &sim.config.f;
        let mut a: Vec<f64> = Vec::with_capacity(w.len());
        let mut b: Vec<f64> = Vec::with_capacity(w.len());
        for (wk, s) in w.iter().zip(&sim.inv_sqrt_prod) {
            let v = wk * s;
            a.push(c * f.d1(v) * s);
            b.push(c * f.d2(v) * s * s);
        }
        self.suffix_sums(&mut a);
        self.suffix_sums(&mut b);
        let total = a.len();
        let idx: Vec<Vec<usize>> = (0..total).map(|t| self.unravel(t)).collect();
        let d2f = DMatrix::from_fn(total, total, |t, s| {
            let m: Vec<usize> = idx[t].iter().zip(&idx[s]).map(|(x, y)| *x.max(y)).collect();
            b[self.ravel(&m)]
        });
        FieldSample {
            value,
            df: DVector::from_vec(a),
            d2f,
        }
    }
}

/// Bound on `d_M(F̂_ε, N(0, σ²))` through the field form of the theorem.
pub fn sheet_bound(config: &SheetConfig, metric: MetricKind, opts: &BoundOptions) -> Result<BoundReport> {
    field_bound(&SheetField::new(config)?, metric, opts)
}

#[derive(Clone, Debug, Serialize)]
pub struct SheetRateRow {
    pub epsilon: f64,
    pub log_length: f64,
    pub var_closed_form: f64,
    pub var_mc: f64,
    pub se: f64,
    pub dkol: f64,
    pub se_dkol: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SheetRateReport {
    pub rows: Vec<SheetRateRow>,
    pub fit: RateFit,
}

/// Sample variance and its standard error.
pub fn variance_with_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let d: Vec<f64> = x.iter().map(|v| (v - m).powi(2)).collect();
    let var = d.iter().sum::<f64>() / (n - 1.0);
    let mean_d = d.iter().sum::<f64>() / n;
    let se = (d.iter().map(|v| (v - mean_d).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    (var, se)
}

/// Empirical `d_Kol(F̂_ε, N(0, Var F̂_ε))` per config and the log-log slope
/// against `L`.
pub fn sheet_bound_rate(configs: &[SheetConfig], replicates: usize, seed: u64, bootstrap: usize) -> Result<SheetRateReport> {
    if configs.len() < 4 {
        return Err(Error::InsufficientPoints {
            need: 4,
            got: configs.len(),
        });
    }
    let ls: Vec<f64> = configs.iter().map(SheetConfig::log_length).collect();
    let ratio = ls[1] / ls[0];
    if ls.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-6) || ratio <= 1.0 {
        return Err(invalid("log-lengths must increase geometrically"));
    }
    let base = SeedSpec::new(seed, 0);
    let mut rows = Vec::with_capacity(configs.len());
    for (i, cfg) in configs.iter().enumerate() {
        let sub = base.derive(i as u64);
        let sim = SheetSimulator::new(cfg)?;
        let x = sim.replicates(replicates, sub.master_seed);
        let var_closed = sheet_variance(cfg)?;
        let (var_mc, se) = variance_with_se(&x);
        let sample = EmpiricalSample::new(x, sub.master_seed)?;
        let d = DistanceReport::estimate(&sample, 0.0, var_closed, bootstrap, sub.derive(1))?;
        rows.push(SheetRateRow {
            epsilon: cfg.epsilon,
            log_length: cfg.log_length(),
            var_closed_form: var_closed,
            var_mc,
            se,
            dkol: d.dkol,
            se_dkol: d.se_dkol,
        });
    }
    let fit = rate_fit(&rows.iter().map(|r| (r.log_length, r.dkol)).collect::<Vec<_>>())?;
    Ok(SheetRateReport { rows, fit })
}

/// Cell noise for one replicate, exposed for derivative checks.
pub fn cell_noise(config: &SheetConfig, seed: SeedSpec) -> Result<Vec<f64>> {
    config.validate()?;
    let mut z = vec![0.0; config.nodes_per_axis.pow(config.n_dim as u32)];
    fill_standard_normal(&mut seed.rng(), &mut z);
    Ok(z)
}
