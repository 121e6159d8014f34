//! Empirical Kolmogorov and Wasserstein distances to a normal law.

use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::SeedSpec;

pub const MIN_SAMPLES: usize = 100;
pub const DEFAULT_BOOTSTRAP: usize = 200;

/// A sorted sample of finite values.
#[derive(Clone, Debug)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    source_seed: u64,
}

impl EmpiricalSample {
    pub fn new(mut values: Vec<f64>, source_seed: u64) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSample("non-finite value".into()));
        }
        values.sort_by(|a, b| a.total_cmp(b));
        Ok(Self {
            values,
            source_seed,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn source_seed(&self) -> u64 {
        self.source_seed
    }

    /// Sample mean and unbiased variance.
    pub fn mean_var(&self) -> (f64, f64) {
        let n = self.values.len() as f64;
        let m = self.values.iter().sum::<f64>() / n;
        let v = self.values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    fn check(&self, sigma2: f64) -> Result<()> {
        if !(sigma2 > 0.0) {
            return Err(Error::DegenerateSample(format!("target variance {sigma2} is not positive")));
        }
        if self.values.len() < MIN_SAMPLES {
            return Err(Error::InsufficientPoints {
                need: MIN_SAMPLES,
                got: self.values.len(),
            });
        }
        Ok(())
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid parameters")
}

/// `sup_z |F_n(z) - Φ((z - μ)/σ)|` over both one-sided limits at each point.
pub fn empirical_dkol(sample: &EmpiricalSample, mu: f64, sigma2: f64) -> Result<f64> {
    sample.check(sigma2)?;
    let sd = sigma2.sqrt();
    let phi = std_normal();
    let n = sample.len() as f64;
    Ok(sample
        .values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = phi.cdf((x - mu) / sd);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max))
}

/// `(1/n) Σ |x_(i) - μ - σ Φ⁻¹((i - ½)/n)|`.
pub fn empirical_dw(sample: &EmpiricalSample, mu: f64, sigma2: f64) -> Result<f64> {
    sample.check(sigma2)?;
    let sd = sigma2.sqrt();
    let q = plotting_quantiles(sample.len());
    Ok(sample
        .values
        .iter()
        .zip(&q)
        .map(|(x, z)| (x - mu - sd * z).abs())
        .sum::<f64>()
        / sample.len() as f64)
}

fn plotting_quantiles(n: usize) -> Vec<f64> {
    let phi = std_normal();
    (0..n)
        .map(|i| phi.inverse_cdf((i as f64 + 0.5) / n as f64))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DistanceReport {
    pub dkol: f64,
    pub dw: f64,
    pub se_dkol: f64,
    pub se_dw: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub n_samples: usize,
    pub bootstrap: usize,
    /// Whether the target was fitted from the sample itself.
    pub standardized: bool,
}

impl DistanceReport {
    /// Distances to `N(μ, σ²)` with bootstrap standard errors.
    pub fn estimate(sample: &EmpiricalSample, mu: f64, sigma2: f64, bootstrap: usize, seed: SeedSpec) -> Result<Self> {
        Self::run(sample, Some((mu, sigma2)), bootstrap, seed)
    }

    /// Distances to the normal law with the sample's own mean and variance.
    /// Each bootstrap resample is re-standardized.
    pub fn standardized(sample: &EmpiricalSample, bootstrap: usize, seed: SeedSpec) -> Result<Self> {
        Self::run(sample, None, bootstrap, seed)
    }

    fn run(sample: &EmpiricalSample, target: Option<(f64, f64)>, bootstrap: usize, seed: SeedSpec) -> Result<Self> {
        let (mu, sigma2) = target.unwrap_or_else(|| sample.mean_var());
        let dkol = empirical_dkol(sample, mu, sigma2)?;
        let dw = empirical_dw(sample, mu, sigma2)?;
        let x = &sample.values;
        let n = x.len();
        let nf = n as f64;
        let q = plotting_quantiles(n);
        let phi = std_normal();
        let mut rng = seed.rng();
        let mut counts = vec![0u32; n];
        let mut kol = Vec::with_capacity(bootstrap);
        let mut was = Vec::with_capacity(bootstrap);
        for _ in 0..bootstrap {
            counts.iter_mut().for_each(|c| *c = 0);
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            let (m, s2) = match target {
                Some(t) => t,
                None => {
                    let mean = x.iter().zip(&counts).map(|(v, &c)| v * c as f64).sum::<f64>() / nf;
                    let var = x
                        .iter()
                        .zip(&counts)
                        .map(|(v, &c)| c as f64 * (v - mean).powi(2))
                        .sum::<f64>()
                        / (nf - 1.0);
                    (mean, var)
                }
            };
            if !(s2 > 0.0) {
                continue;
            }
            let sd = s2.sqrt();
            let (mut cum, mut d, mut w) = (0usize, 0.0f64, 0.0f64);
            for (i, &c) in counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let f = phi.cdf((x[i] - m) / sd);
                d = d.max(f - cum as f64 / nf);
                for j in cum..cum + c as usize {
                    w += (x[i] - m - sd * q[j]).abs();
                }
                cum += c as usize;
                d = d.max(cum as f64 / nf - f);
            }
            kol.push(d);
            was.push(w / nf);
        }
        Ok(Self {
            dkol,
            dw,
            se_dkol: sd(&kol),
            se_dw: sd(&was),
            mu,
            sigma2,
            n_samples: n,
            bootstrap,
            standardized: target.is_none(),
        })
    }

    /// `d_Kol ≤ 2√d_W + k·se`.
    pub fn kol_wasserstein_gap(&self) -> f64 {
        2.0 * self.dw.sqrt() - self.dkol
    }
}

fn sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sample_standard_gaussian;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn normal_sample(n: usize, seed: u64) -> EmpiricalSample {
        EmpiricalSample::new(sample_standard_gaussian(n, SeedSpec::new(seed, 0)), seed).unwrap()
    }

    #[test]
    fn same_law_is_close() {
        let s = normal_sample(100_000, 1);
        let envelope = ((2.0f64 / 0.01).ln() / (2.0 * 1e5)).sqrt();
        assert!(empirical_dkol(&s, 0.0, 1.0).unwrap() < envelope);
        assert!(empirical_dw(&s, 0.0, 1.0).unwrap() < 0.02);
    }

    #[test]
    fn point_mass() {
        let s = EmpiricalSample::new(vec![0.0; 200], 0).unwrap();
        assert!(empirical_dkol(&s, 0.0, 1.0).unwrap() >= 0.5);
    }

    #[test]
    fn shifted_normal() {
        let s = normal_sample(200_000, 2);
        let want = 2.0 * std_normal().cdf(0.5) - 1.0;
        assert_relative_eq!(empirical_dkol(&s, -1.0, 1.0).unwrap(), want, epsilon = 0.006);
        assert_relative_eq!(empirical_dw(&s, -1.0, 1.0).unwrap(), 1.0, epsilon = 0.01);
    }

    #[test]
    fn errors() {
        let s = normal_sample(100, 3);
        assert!(matches!(empirical_dkol(&s, 0.0, 0.0), Err(Error::DegenerateSample(_))));
        let small = normal_sample(50, 3);
        assert!(matches!(empirical_dw(&small, 0.0, 1.0), Err(Error::InsufficientPoints { .. })));
        assert!(EmpiricalSample::new(vec![f64::NAN], 0).is_err());
    }

    #[test]
    fn bootstrap_se_is_plausible() {
        let s = normal_sample(10_000, 4);
        let r = DistanceReport::estimate(&s, 0.0, 1.0, 200, SeedSpec::new(9, 0)).unwrap();
        assert!(r.se_dkol > 0.001 && r.se_dkol < 0.01, "{}", r.se_dkol);
        assert!(r.dkol <= 2.0 * r.dw.sqrt() + 5.0 * r.se_dkol);
        let st = DistanceReport::standardized(&s, 50, SeedSpec::new(9, 0)).unwrap();
        assert!(st.standardized && st.dkol < r.dkol + 0.01);
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let s = normal_sample(1_000, 5);
        let a = DistanceReport::estimate(&s, 0.0, 1.0, 50, SeedSpec::new(1, 0)).unwrap();
        let b = DistanceReport::estimate(&s, 0.0, 1.0, 50, SeedSpec::new(1, 0)).unwrap();
        assert_eq!(a.se_dkol.to_bits(), b.se_dkol.to_bits());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn affine_invariance(a in 0.1f64..10.0, b in -5.0f64..5.0, seed in any::<u64>()) {
            let raw = sample_standard_gaussian(300, SeedSpec::new(seed, 0));
            let s = EmpiricalSample::new(raw.iter().map(|v| v * 1.3 + 0.2).collect(), 0).unwrap();
            let t = EmpiricalSample::new(raw.iter().map(|v| a * (v * 1.3 + 0.2) + b).collect(), 0).unwrap();
            let d1 = empirical_dkol(&s, 0.0, 1.0).unwrap();
            let d2 = empirical_dkol(&t, b, a * a).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-12);
        }

        #[test]
        fn kol_below_wasserstein_root(seed in any::<u64>(), shift in -1.0f64..1.0) {
            let s = normal_sample(500, seed);
            let k = empirical_dkol(&s, shift, 1.0).unwrap();
            let w = empirical_dw(&s, shift, 1.0).unwrap();
            prop_assert!(k <= 2.0 * w.sqrt() + 0.05);
            prop_assert!((0.0..=1.0).contains(&k));
        }
    }
}
