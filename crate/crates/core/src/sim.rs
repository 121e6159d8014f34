//! Samplers for Gaussian vectors, stationary sequences and the Brownian sheet.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky_factor, CovarianceFactor};
use crate::rng::{fill_standard_normal, SeedSpec};

/// Largest number of grid points a sheet sampler will allocate.
pub const GRID_POINT_CAP: usize = 1 << 22;

/// Negative circulant eigenvalues above this are treated as rounding noise.
const EIGEN_CLAMP: f64 = -1e-8;

/// Correlation function of a stationary sequence, evaluated at integer lags.
#[derive(Clone)]
pub struct StationaryCovariance {
    rho: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    summability_bound: f64,
}

impl std::fmt::Debug for StationaryCovariance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StationaryCovariance")
            .field("rho0", &(self.rho)(0.0))
            .field("summability_bound", &self.summability_bound)
            .finish()
    }
}

impl StationaryCovariance {
    pub fn new(rho: impl Fn(f64) -> f64 + Send + Sync + 'static, summability_bound: f64) -> Self {
        Self {
            rho: Arc::new(rho),
            summability_bound,
        }
    }

    pub fn at(&self, lag: f64) -> f64 {
        (self.rho)(lag)
    }

    pub fn summability_bound(&self) -> f64 {
        self.summability_bound
    }

    /// Dense Toeplitz covariance of the first `n` terms.
    pub fn toeplitz(&self, n: usize) -> DMatrix<f64> {
        let lags: Vec<f64> = (0..n).map(|k| self.at(k as f64)).collect();
        DMatrix::from_fn(n, n, |i, j| lags[i.abs_diff(j)])
    }
}

enum Method {
    Circulant {
        sqrt_eig: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Dense(CovarianceFactor),
}

/// Exact sampler for the first `n` terms of a stationary sequence.
///
/// Uses circulant embedding when the embedding is nonnegative definite and a
/// dense Cholesky factor otherwise. Each draw yields two independent paths.
pub struct StationarySampler {
    n: usize,
    method: Method,
}

impl StationarySampler {
    pub fn new(cov: &StationaryCovariance, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("sequence length must be positive"));
        }
        if let Some(method) = Self::circulant(cov, n) {
            return Ok(Self { n, method });
        }
        let factor = cholesky_factor(&cov.toeplitz(n)).map_err(|_| Error::EmbeddingFailed { n })?;
        Ok(Self {
            n,
            method: Method::Dense(factor),
        })
    }

    fn circulant(cov: &StationaryCovariance, n: usize) -> Option<Method> {
        let m = (2 * n).next_power_of_two();
        let mut row: Vec<Complex64> = (0..m)
            .map(|k| Complex64::new(cov.at(k.min(m - k) as f64), 0.0))
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);
        let mut sqrt_eig = Vec::with_capacity(m);
        for c in &row {
            let lambda = c.re;
            if !lambda.is_finite() || lambda < EIGEN_CLAMP {
                return None;
            }
            sqrt_eig.push((lambda.max(0.0) / m as f64).sqrt());
        }
        Some(Method::Circulant { sqrt_eig, fft })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn uses_circulant(&self) -> bool {
        matches!(self.method, Method::Circulant { .. })
    }

    /// Two independent paths from one stream.
    pub fn sample_pair(&self, seed: SeedSpec) -> (Vec<f64>, Vec<f64>) {
        let mut rng = seed.rng();
        match &self.method {
            Method::Circulant { sqrt_eig, fft } => {
                let m = sqrt_eig.len();
                let mut z = vec![0.0; 2 * m];
                fill_standard_normal(&mut rng, &mut z);
                let mut buf: Vec<Complex64> = (0..m)
                    .map(|k| Complex64::new(sqrt_eig[k] * z[2 * k], sqrt_eig[k] * z[2 * k + 1]))
                    .collect();
                fft.process(&mut buf);
                (
                    buf[..self.n].iter().map(|c| c.re).collect(),
                    buf[..self.n].iter().map(|c| c.im).collect(),
                )
            }
            Method::Dense(f) => {
                let mut z = vec![0.0; 2 * self.n];
                fill_standard_normal(&mut rng, &mut z);
                let a = f.apply(&DVector::from_column_slice(&z[..self.n]));
                let b = f.apply(&DVector::from_column_slice(&z[self.n..]));
                (a.as_slice().to_vec(), b.as_slice().to_vec())
            }
        }
    }

    pub fn sample(&self, seed: SeedSpec) -> Vec<f64> {
        self.sample_pair(seed).0
    }
}

/// One path of length `n` with correlation `cov`.
pub fn sample_stationary_sequence(
    cov: &StationaryCovariance,
    n: usize,
    seed: SeedSpec,
) -> Result<Vec<f64>> {
    Ok(StationarySampler::new(cov, n)?.sample(seed))
}

/// `N(0, C)` vector with `C = B Bᵀ`.
pub fn sample_gaussian(factor: &CovarianceFactor, seed: SeedSpec) -> DVector<f64> {
    let mut z = vec![0.0; factor.dim()];
    fill_standard_normal(&mut seed.rng(), &mut z);
    factor.apply(&DVector::from_vec(z))
}

/// Lower-triangular factor of the min-kernel covariance `min(x_i, x_j)` on
/// increasing nodes in `(0, 1]`: `L_ij = sqrt(x_j - x_{j-1})` for `j <= i`.
pub fn min_kernel_factor(nodes: &[f64]) -> Result<CovarianceFactor> {
    let h = increments(nodes)?;
    let n = nodes.len();
    let l = DMatrix::from_fn(n, n, |i, j| if j <= i { h[j].sqrt() } else { 0.0 });
    CovarianceFactor::from_factor(l)
}

fn increments(nodes: &[f64]) -> Result<Vec<f64>> {
    let mut prev = 0.0;
    let mut h = Vec::with_capacity(nodes.len());
    for &x in nodes {
        if !(x > prev && x <= 1.0) {
            return Err(invalid("sheet nodes must be strictly increasing in (0, 1]"));
        }
        h.push(x - prev);
        prev = x;
    }
    Ok(h)
}

/// Brownian sheet on a tensor grid of `(0, 1]^n`.
///
/// Values are stored row-major with the last axis fastest.
#[derive(Clone, Debug)]
pub struct BrownianSheetGrid {
    axes: Vec<Vec<f64>>,
    sqrt_increments: Vec<Vec<f64>>,
    len: usize,
}

impl BrownianSheetGrid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(invalid("sheet needs at least one axis"));
        }
        let mut len = 1usize;
        for a in &axes {
            len = len.saturating_mul(a.len());
        }
        if len > GRID_POINT_CAP {
            return Err(Error::GridTooLarge {
                points: len,
                cap: GRID_POINT_CAP,
            });
        }
        let sqrt_increments = axes
            .iter()
            .map(|a| increments(a).map(|h| h.into_iter().map(f64::sqrt).collect()))
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(Self {
            axes,
            sqrt_increments,
            len,
        })
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Shape of the grid, one entry per axis.
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    /// Sheet values from the given white noise on the grid cells.
    pub fn from_noise(&self, noise: &mut [f64]) {
        assert_eq!(noise.len(), self.len);
        let shape = self.shape();
        let mut stride = self.len;
        for (axis, h) in self.sqrt_increments.iter().enumerate() {
            let m = shape[axis];
            stride /= m;
            let outer = self.len / (m * stride);
            for o in 0..outer {
                let base = o * m * stride;
                for inner in 0..stride {
                    let mut acc = 0.0;
                    for (k, hk) in h.iter().enumerate() {
                        let idx = base + k * stride + inner;
                        acc += hk * noise[idx];
                        noise[idx] = acc;
                    }
                }
            }
        }
    }

    pub fn sample(&self, seed: SeedSpec) -> Vec<f64> {
        let mut noise = vec![0.0; self.len];
        fill_standard_normal(&mut seed.rng(), &mut noise);
        self.from_noise(&mut noise);
        noise
    }
}

/// One draw of the Brownian sheet on the tensor grid with the given sorted
/// coordinates on each of the `n_dim` axes.
pub fn sample_brownian_sheet_grid(n_dim: usize, grid: &[Vec<f64>], seed: SeedSpec) -> Result<Vec<f64>> {
    if n_dim == 0 || grid.len() != n_dim {
        return Err(invalid("need one coordinate list per axis"));
    }
    Ok(BrownianSheetGrid::new(grid.to_vec())?.sample(seed))
}
