//! Dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Lower-triangular `B` with `B Bᵀ = C`. Maps standard noise `z` to `x = B z ~ N(0, C)`.
#[derive(Clone, Debug)]
pub struct CovarianceFactor {
    factor: DMatrix<f64>,
}

impl CovarianceFactor {
    pub fn identity(d: usize) -> Self {
        Self {
            factor: DMatrix::identity(d, d),
        }
    }

    /// Wraps an arbitrary square factor. It need not be triangular.
    pub fn from_factor(factor: DMatrix<f64>) -> Result<Self> {
        if !factor.is_square() || factor.nrows() == 0 {
            return Err(invalid("covariance factor must be square and non-empty"));
        }
        Ok(Self { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.factor * z
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }
}

/// Cholesky factorization that tolerates positive semidefinite input.
///
/// Pivots with magnitude at most `1e-10 * max|C|` are set to zero together with
/// the rest of their column. A pivot below `-1e-8 * max|C|` is an error.
pub fn cholesky_factor(c: &DMatrix<f64>) -> Result<CovarianceFactor> {
    let n = c.nrows();
    if n == 0 || !c.is_square() {
        return Err(invalid("covariance must be square and non-empty"));
    }
    let scale = max_abs(c);
    for i in 0..n {
        for j in 0..i {
            if (c[(i, j)] - c[(j, i)]).abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return Err(invalid("covariance must be symmetric"));
            }
        }
    }
    let (zero_tol, neg_tol) = (1e-10 * scale, 1e-8 * scale);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = c[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -neg_tol {
            return Err(Error::NotPositiveSemiDefinite { index: j, pivot: d });
        }
        if d.abs() <= zero_tol {
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = c[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(CovarianceFactor { factor: l })
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &v| a.max(v.abs()))
}

/// Product `x * y` of two commuting symmetric matrices, computing only the
/// lower block triangle and mirroring it.
pub fn symmetric_product(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    const BLOCK: usize = 256;
    if n <= BLOCK {
        return x * y;
    }
    let mut out = DMatrix::<f64>::zeros(n, n);
    let starts: Vec<usize> = (0..n).step_by(BLOCK).collect();
    for &r0 in &starts {
        let rl = BLOCK.min(n - r0);
        let rows = x.rows(r0, rl);
        for &c0 in starts.iter().take_while(|&&c0| c0 <= r0) {
            let cl = BLOCK.min(n - c0);
            let blk = rows * y.columns(c0, cl);
            out.view_mut((r0, c0), (rl, cl)).copy_from(&blk);
        }
    }
    for j in 0..n {
        for i in 0..j {
            out[(i, j)] = out[(j, i)];
        }
    }
    out
}

/// `[I, A, A², …, A^max_power]` for symmetric `A`.
pub fn matrix_powers(a: &DMatrix<f64>, max_power: usize) -> Vec<DMatrix<f64>> {
    let n = a.nrows();
    let mut out = Vec::with_capacity(max_power + 1);
    out.push(DMatrix::identity(n, n));
    if max_power >= 1 {
        out.push(a.clone());
    }
    for k in 2..=max_power {
        let next = symmetric_product(&out[k - 1], a);
        out.push(next);
    }
    out
}

/// `A^k` for symmetric `A` by repeated squaring.
pub fn symmetric_power(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = a.nrows();
    if k == 0 {
        return DMatrix::identity(n, n);
    }
    let mut result: Option<DMatrix<f64>> = None;
    let mut base = a.clone();
    let mut e = k;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => symmetric_product(&r, &base),
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = symmetric_product(&base, &base);
    }
    result.expect("k > 0")
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_eigen_extremes(c: &DMatrix<f64>) -> (f64, f64) {
    let eig = c.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}
