//! Scalar functions `f` applied pointwise to Gaussian values.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hermite::{hermite, GaussHermite};
use crate::poincare::Functional;

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Serializable description of a [`SubordinatingFunction`].
///
/// `kind` is `hermite` (coefficients in the `He_q` basis), `polynomial`
/// (monomial coefficients, constant first) or a named callback.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub kind: String,
    #[serde(default)]
    pub coeffs: Vec<f64>,
}

impl FunctionSpec {
    pub fn hermite(q: usize) -> Self {
        let mut coeffs = vec![0.0; q + 1];
        coeffs[q] = 1.0;
        Self {
            kind: "hermite".into(),
            coeffs,
        }
    }

    pub fn polynomial(coeffs: &[f64]) -> Self {
        Self {
            kind: "polynomial".into(),
            coeffs: coeffs.to_vec(),
        }
    }

    pub fn build(&self) -> Result<SubordinatingFunction> {
        match self.kind.as_str() {
            "hermite" => SubordinatingFunction::hermite_combination(&self.coeffs),
            "polynomial" => SubordinatingFunction::polynomial(&self.coeffs),
            name => SubordinatingFunction::named(name),
        }
    }
}

/// A `C²` function with its first two derivatives.
#[derive(Clone)]
pub struct SubordinatingFunction {
    spec: FunctionSpec,
    f: Scalar,
    df: Scalar,
    d2f: Scalar,
}

impl std::fmt::Debug for SubordinatingFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("SubordinatingFunction").field(&self.spec).finish()
    }
}

impl SubordinatingFunction {
    pub fn new(
        spec: FunctionSpec,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            spec,
            f: Arc::new(f),
            df: Arc::new(df),
            d2f: Arc::new(d2f),
        }
    }

    /// `Σ c_q He_q`.
    pub fn hermite_combination(coeffs: &[f64]) -> Result<Self> {
        check_coeffs(coeffs)?;
        let c = coeffs.to_vec();
        let (c1, c2) = (c.clone(), c.clone());
        Ok(Self::new(
            FunctionSpec {
                kind: "hermite".into(),
                coeffs: c.clone(),
            },
            move |x| c.iter().enumerate().map(|(q, a)| a * hermite(q, x)).sum(),
            move |x| {
                c1.iter()
                    .enumerate()
                    .skip(1)
                    .map(|(q, a)| a * q as f64 * hermite(q - 1, x))
                    .sum()
            },
            move |x| {
                c2.iter()
                    .enumerate()
                    .skip(2)
                    .map(|(q, a)| a * (q * (q - 1)) as f64 * hermite(q - 2, x))
                    .sum()
            },
        ))
    }

    pub fn hermite_q(q: usize) -> Self {
        Self::hermite_combination(&FunctionSpec::hermite(q).coeffs).expect("valid coefficients")
    }

    /// `Σ a_k x^k`.
    pub fn polynomial(coeffs: &[f64]) -> Result<Self> {
        check_coeffs(coeffs)?;
        let c = coeffs.to_vec();
        let d1: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, a)| a * k as f64).collect();
        let d2: Vec<f64> = d1.iter().enumerate().skip(1).map(|(k, a)| a * k as f64).collect();
        Ok(Self::new(
            FunctionSpec::polynomial(coeffs),
            {
                let c = c.clone();
                move |x| horner(&c, x)
            },
            move |x| horner(&d1, x),
            move |x| horner(&d2, x),
        ))
    }

    pub fn named(name: &str) -> Result<Self> {
        let spec = FunctionSpec {
            kind: name.into(),
            coeffs: vec![],
        };
        Ok(match name {
            "sin" => Self::new(spec, f64::sin, f64::cos, |x| -x.sin()),
            "cos" => Self::new(spec, f64::cos, |x| -x.sin(), |x| -x.cos()),
            "tanh" => Self::new(
                spec,
                f64::tanh,
                |x| 1.0 - x.tanh().powi(2),
                |x| {
                    let t = x.tanh();
                    -2.0 * t * (1.0 - t * t)
                },
            ),
            _ => return Err(invalid(format!("unknown function `{name}`"))),
        })
    }

    pub fn spec(&self) -> &FunctionSpec {
        &self.spec
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn d1(&self, x: f64) -> f64 {
        (self.df)(x)
    }

    pub fn d2(&self, x: f64) -> f64 {
        (self.d2f)(x)
    }

    /// `E f(N)`.
    pub fn mean(&self) -> f64 {
        GaussHermite::standard().expect(|x| self.value(x))
    }

    /// `E f(N)²`.
    pub fn second_moment(&self) -> f64 {
        GaussHermite::standard().expect(|x| self.value(x).powi(2))
    }

    /// `(E|f'(N)|⁴, E|f''(N)|⁴)`.
    pub fn derivative_fourth_moments(&self) -> (f64, f64) {
        let g = GaussHermite::standard();
        (
            g.expect(|x| self.d1(x).powi(4)),
            g.expect(|x| self.d2(x).powi(4)),
        )
    }

    /// Largest relative disagreement between the 64- and 128-node rules over
    /// `E f`, `E f²`, `E f'⁴` and `E f''⁴`.
    pub fn quadrature_discrepancy(&self) -> f64 {
        let moments = |g: &GaussHermite| {
            [
                g.expect(|x| self.value(x)),
                g.expect(|x| self.value(x).powi(2)),
                g.expect(|x| self.d1(x).powi(4)),
                g.expect(|x| self.d2(x).powi(4)),
            ]
        };
        let (a, b) = (moments(GaussHermite::standard()), moments(GaussHermite::check()));
        // The mean is often zero, so it is measured against the L² norm.
        let scale = [b[1].sqrt(), b[1], b[2], b[3]];
        a.iter()
            .zip(&b)
            .zip(scale)
            .map(|((x, y), s)| (x - y).abs() / s.abs().max(1e-300))
            .fold(0.0, f64::max)
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

fn check_coeffs(c: &[f64]) -> Result<()> {
    if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
        return Err(invalid("function coefficients must be finite and non-empty"));
    }
    Ok(())
}

/// `F(x) = scale * Σ_i (f(x_i) - E f(N))`.
#[derive(Clone, Debug)]
pub struct SeparableFunctional {
    dim: usize,
    scale: f64,
    mean: f64,
    f: SubordinatingFunction,
}

impl SeparableFunctional {
    pub fn new(f: SubordinatingFunction, dim: usize, scale: f64) -> Self {
        Self {
            dim,
            scale,
            mean: f.mean(),
            f,
        }
    }

    /// Normalized sum `n^{-1/2} Σ (f(x_i) - E f)`.
    pub fn normalized_sum(f: SubordinatingFunction, n: usize) -> Self {
        Self::new(f, n, 1.0 / (n as f64).sqrt())
    }
}

impl Functional for SeparableFunctional {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.scale * x.iter().map(|&v| self.f.value(v) - self.mean).sum::<f64>()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x.map(|v| self.scale * self.f.d1(v))
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&x.map(|v| self.scale * self.f.d2(v)))
    }
}
