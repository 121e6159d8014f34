//! Probabilists' Hermite polynomials and Gauss–Hermite quadrature for the
//! standard normal law.

use std::sync::OnceLock;

use nalgebra::DMatrix;

/// Default node count for Gaussian expectations.
pub const DEFAULT_NODES: usize = 256;
/// Node count used to cross-check [`DEFAULT_NODES`].
pub const CHECK_NODES: usize = 384;

/// `He_q(x)` by the three-term recurrence.
pub fn hermite(q: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if q == 0 {
        return a;
    }
    for k in 1..q {
        let c = x * b - k as f64 * a;
        a = b;
        b = c;
    }
    b
}

/// `[He_0(x), …, He_qmax(x)]`.
pub fn hermite_all(q_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(q_max + 1);
    out.push(1.0);
    if q_max >= 1 {
        out.push(x);
    }
    for k in 1..q_max {
        out.push(x * out[k] - k as f64 * out[k - 1]);
    }
    out
}

/// Nodes and weights with `Σ w_i f(x_i) ≈ E f(N)` for `N ~ N(0,1)`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch start, then Newton-polished nodes and weights from
    /// normalized Hermite functions.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i.abs_diff(j) == 1 {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let mut nodes: Vec<f64> = jacobi.symmetric_eigen().eigenvalues.iter().cloned().collect();
        nodes.sort_by(|a, b| a.total_cmp(b));
        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            for _ in 0..4 {
                let (hn, hn1) = normalized_pair(n, *x);
                let dx = hn / ((n as f64).sqrt() * hn1);
                if !dx.is_finite() {
                    break;
                }
                *x -= dx;
            }
            let (_, hn1) = normalized_pair(n, *x);
            weights.push(1.0 / (n as f64 * hn1 * hn1));
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        Self { nodes, weights }
    }

    /// Shared 64-node rule.
    pub fn standard() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(DEFAULT_NODES))
    }

    /// Shared 128-node rule.
    pub fn check() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(CHECK_NODES))
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// `(h_n(x), h_{n-1}(x))` with `h_k = He_k / sqrt(k!)`.
fn normalized_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// `c_q = E[f(N) He_q(N)]` for `q = 0..=q_max`, so `f = Σ c_q/q! He_q`.
pub fn hermite_coefficients(f: impl Fn(f64) -> f64, q_max: usize, rule: &GaussHermite) -> Vec<f64> {
    let mut c = vec![0.0; q_max + 1];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let fx = w * f(x);
        for (cq, h) in c.iter_mut().zip(hermite_all(q_max, x)) {
            *cq += fx * h;
        }
    }
    c
}

pub fn factorial(q: usize) -> f64 {
    (1..=q).fold(1.0, |a, k| a * k as f64)
}
