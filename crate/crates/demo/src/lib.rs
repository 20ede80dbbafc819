//! Browser bindings for exploring the sparse-spectrum solver.
//!
//! Three entry points back the page in `www/`: the energy profile as a
//! function of `η`, the convergence trace of a random instance, and the path
//! of a single spectral coordinate.

use ltpss::operators;
use ltpss::solver::{self, InitialPosition, SolverParams};
use ltpss::Matrix;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn params(beta: f64, eta: f64, theta: f64, max_iters: usize) -> Result<SolverParams, JsError> {
    let p = SolverParams {
        beta,
        eta,
        theta,
        max_iters,
        ..SolverParams::default()
    };
    p.validate().map_err(|e| JsError::new(&e.to_string()))?;
    Ok(p)
}

fn js(e: ltpss::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Converged spectral energies for every `η` in `etas`, flattened row-major
/// (`etas.len()` rows of `sigmas.len()` values). Sigmas are sorted
/// descending first; iteration starts from the leading three principal
/// portfolios.
#[wasm_bindgen]
pub fn energy_profile(
    sigmas: &[f64],
    etas: &[f64],
    beta: f64,
    theta: f64,
    max_iters: usize,
) -> Result<Vec<f64>, JsError> {
    let mut sigmas = sigmas.to_vec();
    if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(JsError::new(
            "singular values must be finite and non-negative",
        ));
    }
    sigmas.sort_by(|a, b| b.total_cmp(a));
    let lambda0: Vec<f64> = (0..sigmas.len())
        .map(|i| {
            if i < solver::DEFAULT_PP_COUNT && sigmas[0] > 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();

    let mut out = Vec::with_capacity(etas.len() * sigmas.len());
    for &eta in etas {
        let p = params(beta, eta, theta, max_iters)?;
        let sol = solver::solve_spectral(&sigmas, &lambda0, &p).map_err(js)?;
        out.extend(sol.energies);
    }
    Ok(out)
}

/// Uniform `n×n` matrix with entries in `[-scale, scale)`, reproducible from
/// `seed`.
fn random_matrix(n: usize, scale: f64, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(n, n, |_, _| {
        let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        scale * (2.0 * u - 1.0)
    })
}

/// Solves a random `n×n` instance and returns, per iteration,
/// `[objective, gap, log10 decrease]` flattened. The decrease is `NaN` where
/// the objective did not strictly drop.
#[wasm_bindgen]
pub fn convergence_trace(
    n: usize,
    seed: u64,
    scale: f64,
    beta: f64,
    eta: f64,
    theta: f64,
    max_iters: usize,
) -> Result<Vec<f64>, JsError> {
    if !(1..=64).contains(&n) {
        return Err(JsError::new("matrix size must be between 1 and 64"));
    }
    let pi = random_matrix(n, scale, seed);
    let sol = solver::solve(&pi, &params(beta, eta, theta, max_iters)?).map_err(js)?;
    Ok(sol
        .trace
        .records
        .iter()
        .zip(sol.trace.log10_decreases())
        .flat_map(|(r, d)| [r.objective, r.gap, d.unwrap_or(f64::NAN)])
        .collect())
}

/// Path of one spectral coordinate from `lambda0`: pairs `[λ^k, case]` for
/// `k = 1..`, flattened, where `case` is the regime number of the step taken
/// from `λ^k`.
#[wasm_bindgen]
pub fn coordinate_path(
    lambda0: f64,
    sigma: f64,
    beta: f64,
    eta: f64,
    theta: f64,
    steps: usize,
) -> Result<Vec<f64>, JsError> {
    let p = SolverParams {
        tol: f64::MIN_POSITIVE,
        initial: InitialPosition::Zero,
        ..params(beta, eta, theta, steps.max(1))?
    };
    let sol = solver::solve_spectral(&[sigma], &[lambda0], &p).map_err(js)?;
    let mut out = Vec::with_capacity(2 * sol.history.len());
    for lam in &sol.history {
        let case = operators::case_classify(lam[0], sigma, beta, eta, theta).map_err(js)?;
        out.push(lam[0]);
        out.push(f64::from(case.number()));
    }
    Ok(out)
}
