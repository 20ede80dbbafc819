//! Operator blocks of the fixed-point map `T = proj ∘ prox ∘ G`.
//!
//! `G` is the gradient step of `-tr(LΠ)`, `prox` is singular value
//! thresholding (the proximal map of the scaled nuclear norm) and `proj`
//! clips the diagonal of `UᵀAV` in the fixed singular basis of `Πᵀ`,
//! discarding the off-diagonal part. The last one is not the Euclidean
//! projection onto the spectral-norm ball; its range is the set of matrices
//! diagonal in `(U, V)` with coefficients in `[-1, 1]`.

use crate::error::{Error, Result};
use crate::linalg::{
    self, ensure_finite, ensure_same_shape, ensure_square, Matrix, SpectralDecomposition,
};

/// Slack allowed on `|lambda| <= 1` for coordinates read back from iterates.
pub const COORDINATE_SLACK: f64 = 1e-9;

/// Relative Frobenius tolerance for a decomposition to count as one of `Πᵀ`.
const RECONSTRUCTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OperatorContext {
    pi_hat: Matrix,
    pi_hat_t: Matrix,
    dec: SpectralDecomposition,
    beta: f64,
    eta: f64,
}

impl OperatorContext {
    /// Decomposes `pi_hatᵀ` and validates the step size and regularization.
    pub fn new(pi_hat: Matrix, beta: f64, eta: f64) -> Result<Self> {
        ensure_square(&pi_hat, "prediction matrix")?;
        ensure_finite(&pi_hat, "prediction matrix")?;
        let dec = linalg::svd(&pi_hat.transpose())?;
        Self::with_decomposition(pi_hat, dec, beta, eta)
    }

    /// Reuses an existing decomposition of `pi_hatᵀ`.
    pub fn with_decomposition(
        pi_hat: Matrix,
        dec: SpectralDecomposition,
        beta: f64,
        eta: f64,
    ) -> Result<Self> {
        let n = ensure_square(&pi_hat, "prediction matrix")?;
        if dec.dim() != n {
            return Err(Error::dim(format!(
                "decomposition is {}-dimensional, prediction matrix is {n}x{n}",
                dec.dim()
            )));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::config(format!("beta must be positive, got {beta}")));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::config(format!(
                "eta must be non-negative, got {eta}"
            )));
        }
        let pi_hat_t = pi_hat.transpose();
        let scale = pi_hat_t.norm().max(f64::MIN_POSITIVE);
        let err = (dec.reconstruct() - &pi_hat_t).norm();
        if pi_hat_t.norm() > 0.0 && err / scale > RECONSTRUCTION_TOL {
            return Err(Error::domain(format!(
                "decomposition does not reconstruct the transposed prediction matrix (relative error {:.3e})",
                err / scale
            )));
        }
        Ok(OperatorContext {
            pi_hat,
            pi_hat_t,
            dec,
            beta,
            eta,
        })
    }

    pub fn pi_hat(&self) -> &Matrix {
        &self.pi_hat
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.dec
    }

    pub fn sigma(&self) -> &[f64] {
        &self.dec.sigma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dim(&self) -> usize {
        self.dec.dim()
    }

    fn check_input(&self, l: &Matrix) -> Result<()> {
        ensure_same_shape(l, &self.pi_hat)
    }
}

/// `G(L) = L + βΠᵀ`.
pub fn gradient_step(l: &Matrix, ctx: &OperatorContext) -> Result<Matrix> {
    ctx.check_input(l)?;
    Ok(l + &ctx.pi_hat_t * ctx.beta)
}

/// Singular value thresholding: shrinks every singular value toward zero by `tau`.
pub fn svt(a: &Matrix, tau: f64) -> Result<Matrix> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::domain(format!(
            "threshold must be non-negative, got {tau}"
        )));
    }
    let dec = linalg::svd(a)?;
    let shrunk: Vec<f64> = dec.sigma.iter().map(|s| (s - tau).max(0.0)).collect();
    Ok(dec.lift(&shrunk))
}

/// Clips the diagonal of `UᵀAV` to `[-1, 1]` and maps it back; off-diagonal
/// entries of `UᵀAV` are dropped.
pub fn project_spectral_box(a: &Matrix, ctx: &OperatorContext) -> Result<Matrix> {
    ctx.check_input(a)?;
    let clipped: Vec<f64> = ctx
        .dec
        .coordinates(a)
        .into_iter()
        .map(|g| g.clamp(-1.0, 1.0))
        .collect();
    Ok(ctx.dec.lift(&clipped))
}

/// `T(L) = proj(svt(G(L), βη))`.
pub fn composed_t(l: &Matrix, ctx: &OperatorContext) -> Result<Matrix> {
    let prox = prox_gradient(l, ctx)?;
    project_spectral_box(&prox, ctx)
}

/// `svt(G(L), βη)` without the projection; the unconstrained comparator map.
pub fn prox_gradient(l: &Matrix, ctx: &OperatorContext) -> Result<Matrix> {
    let g = gradient_step(l, ctx)?;
    svt(&g, ctx.beta * ctx.eta)
}

fn check_coordinate(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda.abs() > 1.0 + COORDINATE_SLACK {
        return Err(Error::domain(format!(
            "spectral coordinate must lie in [-1, 1], got {lambda}"
        )));
    }
    Ok(())
}

fn check_scalars(sigma: f64, beta: f64, eta: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::domain(format!(
            "sigma must be non-negative, got {sigma}"
        )));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::domain(format!(
            "eta must be non-negative, got {eta}"
        )));
    }
    Ok(())
}

/// `T` restricted to one spectral coordinate.
///
/// With `L = U diag(λ) Vᵀ` the three blocks act elementwise: the gradient
/// step moves `λ` to `λ + βσ`, thresholding shrinks its magnitude by `βη`
/// and the projection clips to `[-1, 1]`.
pub fn scalar_t(lambda: f64, sigma: f64, beta: f64, eta: f64) -> Result<f64> {
    check_coordinate(lambda)?;
    check_scalars(sigma, beta, eta)?;
    Ok(scalar_t_unchecked(lambda, sigma, beta, eta))
}

#[inline]
pub(crate) fn scalar_t_unchecked(lambda: f64, sigma: f64, beta: f64, eta: f64) -> f64 {
    if lambda + beta * sigma >= 0.0 {
        (lambda + beta * (sigma - eta)).clamp(0.0, 1.0)
    } else {
        // λ ≥ -1 keeps this above -1; the clamp only absorbs the slack.
        (lambda + beta * (sigma + eta)).clamp(-1.0, 0.0)
    }
}

/// One of the ten exhaustive regimes a coordinate can be in for a single
/// KM step, numbered as in the descent analysis (1..=10).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SummandCase(u8);

impl SummandCase {
    pub fn number(self) -> u8 {
        self.0
    }
}

impl std::fmt::Display for SummandCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Classifies `(λ_k, σ, β, η)`; `θ` is needed because cases 2/3, 4/5 and
/// 9/10 split on the sign of the next iterate `λ_{k+1}`.
pub fn case_classify(
    lambda: f64,
    sigma: f64,
    beta: f64,
    eta: f64,
    theta: f64,
) -> Result<SummandCase> {
    check_coordinate(lambda)?;
    check_scalars(sigma, beta, eta)?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::domain(format!(
            "theta must lie in (0, 1), got {theta}"
        )));
    }
    Ok(classify_unchecked(lambda, sigma, beta, eta, theta))
}

pub(crate) fn classify_unchecked(
    lambda: f64,
    sigma: f64,
    beta: f64,
    eta: f64,
    theta: f64,
) -> SummandCase {
    let gamma = scalar_t_unchecked(lambda, sigma, beta, eta);
    let next = (1.0 - theta) * lambda + theta * gamma;
    let case = if lambda + beta * sigma >= 0.0 {
        if sigma >= eta {
            match (lambda >= 0.0, next >= 0.0) {
                (true, _) => 1,
                (false, true) => 2,
                (false, false) => 3,
            }
        } else if lambda + beta * (sigma - eta) >= 0.0 {
            if next >= 0.0 {
                4
            } else {
                5
            }
        } else if lambda >= 0.0 {
            6
        } else {
            7
        }
    } else if lambda + beta * (sigma + eta) >= 0.0 {
        8
    } else if next >= 0.0 {
        9
    } else {
        10
    };
    SummandCase(case)
}
