use nalgebra::DMatrix;
use proptest::prelude::*;
use sopi::rng::{fill_standard_normal, SeedSpec};
use sopi::wigner::{sample_wigner, trace_power_gradient, trace_power_stat};

fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut z = vec![0.0; n * n];
    fill_standard_normal(&mut SeedSpec::new(seed, 99).rng(), &mut z);
    DMatrix::from_vec(n, n, z).qr().q()
}

fn two_sample_ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[test]
fn conjugated_traces_have_same_distribution() {
    let (n, p, batch) = (12, 4, 10_000);
    let q = random_orthogonal(n, 1);
    let base = SeedSpec::new(20261016, 0);
    let plain: Vec<f64> = (0..batch)
        .map(|k| trace_power_stat(&sample_wigner(n, base.stream(k)), p))
        .collect();
    let conj: Vec<f64> = (0..batch)
        .map(|k| {
            let a = sample_wigner(n, base.stream(batch + k));
            trace_power_stat(&(&q * a * q.transpose()), p)
        })
        .collect();
    let d = two_sample_ks(plain, conj);
    assert!(d < 0.03, "KS distance {d}");
}

#[test]
fn ks_detects_a_shift() {
    let a: Vec<f64> = (0..1000).map(|k| k as f64).collect();
    let b: Vec<f64> = (0..1000).map(|k| k as f64 + 100.0).collect();
    assert!((two_sample_ks(a, b) - 0.1).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trace_is_conjugation_invariant(seed in any::<u64>(), n in 2usize..10, p in 1usize..9) {
        let a = sample_wigner(n, SeedSpec::new(seed, 0));
        let q = random_orthogonal(n, seed);
        let t = trace_power_stat(&a, p);
        let tq = trace_power_stat(&(&q * &a * q.transpose()), p);
        prop_assert!((t - tq).abs() <= 1e-10 * (1.0 + t.abs()), "{} vs {}", t, tq);
    }

    #[test]
    fn trace_is_eigenvalue_power_sum(seed in any::<u64>(), n in 1usize..10, p in 0usize..9) {
        let a = sample_wigner(n, SeedSpec::new(seed, 0));
        let eig = a.clone().symmetric_eigen().eigenvalues;
        let s: f64 = eig.iter().map(|l| l.powi(p as i32)).sum();
        let t = trace_power_stat(&a, p);
        prop_assert!((t - s).abs() <= 1e-10 * (1.0 + s.abs()));
    }

    #[test]
    fn gradient_is_equivariant(seed in any::<u64>(), n in 2usize..8, p in 1usize..7) {
        let a = sample_wigner(n, SeedSpec::new(seed, 0));
        let q = random_orthogonal(n, seed);
        let g = trace_power_gradient(&(&q * &a * q.transpose()), p);
        let expected = &q * trace_power_gradient(&a, p) * q.transpose();
        prop_assert!((g - &expected).amax() <= 1e-10 * (1.0 + expected.amax()));
    }
}
