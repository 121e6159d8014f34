//! One-dimensional quadrature used by the analytic constants.

/// Composite Simpson rule with `panels` (rounded up to even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// `∫_a^b f` for `f` with an integrable power singularity at `a`, using the
/// substitution `x = a + (b - a) t¹²`. Singularities up to `(x - a)^{-11/12}`
/// leave an integrand that vanishes at `t = 0`.
pub fn simpson_singular_left(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let w = b - a;
    simpson(
        |t| {
            if t == 0.0 {
                0.0
            } else {
                f(a + w * t.powi(12)) * 12.0 * w * t.powi(11)
            }
        },
        0.0,
        1.0,
        panels,
    )
}

/// `∫_a^b f` over a long range with `a > 0`, on a logarithmic grid.
pub fn simpson_log(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    simpson(|s| f(s.exp()) * s.exp(), a.ln(), b.ln(), panels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact() {
        assert_relative_eq!(simpson(|x| x * x * x, 0.0, 2.0, 2), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_endpoint() {
        let v = simpson_singular_left(|x| x.powf(-0.75), 0.0, 1.0, 2_000);
        assert_relative_eq!(v, 4.0, max_relative = 1e-9);
    }

    #[test]
    fn log_grid() {
        let v = simpson_log(|x| 1.0 / (x * x), 1.0, 1e6, 20_000);
        assert_relative_eq!(v, 1.0 - 1e-6, max_relative = 1e-9);
    }
}
