//! Log-log least squares for convergence rates.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub ci95_slope: (f64, f64),
    pub n_points: usize,
}

/// OLS of `log distance` on `log scale`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(Error::InsufficientPoints {
            need: 4,
            got: points.len(),
        });
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(invalid("rate fit needs positive scales and distances"));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate fit needs at least two distinct scales"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let sst: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if sst > 0.0 { (1.0 - sse / sst).clamp(0.0, 1.0) } else { 1.0 };
    let se = (sse / (n - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 2.0)
        .expect("n >= 4")
        .inverse_cdf(0.975);
    Ok(RateFit {
        slope,
        intercept,
        r2,
        ci95_slope: (slope - t * se, slope + t * se),
        n_points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = (1..=6).map(|k| {
            let x = 2f64.powi(k);
            (x, 3.0 / x.sqrt())
        }).collect();
        let f = rate_fit(&pts).unwrap();
        assert_relative_eq!(f.slope, -0.5, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 3f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(f.r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_distance() {
        let f = rate_fit(&[(1.0, 0.2), (2.0, 0.2), (4.0, 0.2), (8.0, 0.2)]).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert_eq!(f.r2, 1.0);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = crate::rng::SeedSpec::new(17, 0).rng();
        let pts: Vec<(f64, f64)> = (7..=12).map(|k| {
            let x = 2f64.powi(k);
            (x, 3.0 / x.sqrt() * (1.0 + 0.05 * (2.0 * rng.random::<f64>() - 1.0)))
        }).collect();
        let f = rate_fit(&pts).unwrap();
        assert!((-0.6..=-0.4).contains(&f.slope));
        assert!(f.ci95_slope.0 < f.slope && f.slope < f.ci95_slope.1);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(rate_fit(&[(1.0, 1.0), (2.0, 0.5), (3.0, 0.3)]), Err(Error::InsufficientPoints { .. })));
    }
}
