#![allow(dead_code)]

use ltpss::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian matrix with the given entry scale.
pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Matrix {
    let normal = Normal::new(0.0, scale).unwrap();
    Matrix::from_fn(n, n, |_, _| normal.sample(rng))
}

/// Prediction matrix whose singular values straddle the default `η = 0.001`.
pub fn prediction_matrix(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    gaussian(rng, n, 5e-4)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Gross-return compounding, then peak-to-trough over every pair `s ≤ t`
/// including the initial unit of wealth.
pub fn brute_force_drawdown(r: &[f64]) -> f64 {
    let mut wealth = vec![1.0];
    for x in r {
        let last = *wealth.last().unwrap();
        wealth.push(last * (1.0 + x));
    }
    let mut worst = 0.0_f64;
    for s in 0..wealth.len() {
        for t in s..wealth.len() {
            worst = worst.max((wealth[s] - wealth[t]) / wealth[s]);
        }
    }
    worst.clamp(0.0, 1.0)
}

/// `P(T ≤ t)` by quadrature: with `x = √ν tan u` the density integrand
/// becomes `cos^{ν-1} u`, integrated by composite Simpson on both the
/// partial range and the full half-line for normalization.
pub fn t_cdf_by_quadrature(t: f64, dof: f64) -> f64 {
    let f = |u: f64| u.cos().powf(dof - 1.0);
    let simpson = |a: f64, b: f64, m: usize| {
        let h = (b - a) / m as f64;
        let mut s = f(a) + f(b);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    };
    let upper = (t.abs() / dof.sqrt()).atan();
    let partial = simpson(0.0, upper, 40_000);
    let total = simpson(0.0, std::f64::consts::FRAC_PI_2, 40_000);
    let half = 0.5 * partial / total;
    if t >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}
