//! Krasnoselskii-Mann iteration for
//!
//! ```text
//! min  F(L) = -tr(LΠ) + η‖L‖_*   subject to ‖L‖₂ ≤ 1
//! ```
//!
//! The iteration starts with `L¹ = T(L⁰)` and then averages
//! `L^{k+1} = (1-θ)L^k + θT(L^k)`. From `k = 1` on every iterate is diagonal
//! in the singular basis of `Πᵀ`, which is what makes the scalar recursion in
//! [`solve_spectral`] an exact model of the matrix iteration.

use crate::error::{Error, Result};
use crate::linalg::{self, ensure_finite, ensure_same_shape, Matrix};
use crate::operators::{
    self, classify_unchecked, scalar_t_unchecked, OperatorContext, SummandCase,
};
use crate::strategies;

pub const DEFAULT_BETA: f64 = 100.0;
pub const DEFAULT_ETA: f64 = 0.001;
pub const DEFAULT_THETA: f64 = 0.9999;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_PP_COUNT: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPosition {
    /// Sum of the leading principal portfolios, capped at the dimension.
    /// Falls back to zero when the prediction matrix vanishes.
    PrincipalPortfolios(usize),
    Zero,
    Given(Matrix),
}

impl Default for InitialPosition {
    fn default() -> Self {
        InitialPosition::PrincipalPortfolios(DEFAULT_PP_COUNT)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub beta: f64,
    pub eta: f64,
    pub theta: f64,
    pub max_iters: usize,
    /// Absolute bound on `‖L^k - T(L^k)‖_F`.
    pub tol: f64,
    pub initial: InitialPosition,
    /// Diagnostic only: replaces the projection by the identity, giving the
    /// plain proximal-gradient comparator. Iterates may leave the unit ball.
    pub unconstrained: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            beta: DEFAULT_BETA,
            eta: DEFAULT_ETA,
            theta: DEFAULT_THETA,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            initial: InitialPosition::default(),
            unconstrained: false,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::config(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::config(format!(
                "eta must be non-negative, got {}",
                self.eta
            )));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::config(format!(
                "theta must lie strictly between 0 and 1, got {}",
                self.theta
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be at least 1"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::config(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        match &self.initial {
            InitialPosition::PrincipalPortfolios(0) => Err(Error::config(
                "initial principal portfolio count must be at least 1",
            )),
            InitialPosition::Given(m) => ensure_finite(m, "initial position"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
        })
    }
}

/// State at iterate `L^k`, `k ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub objective: f64,
    /// `‖L^k - T(L^k)‖_F`
    pub gap: f64,
    /// Diagonal of `Uᵀ L^k V`.
    pub coordinates: Vec<f64>,
    /// Regime of each coordinate for the step `k -> k+1`. Empty for
    /// unconstrained runs, where coordinates are not confined to `[-1, 1]`.
    pub cases: Vec<SummandCase>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
    pub status: Status,
}

impl SolverTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// `log10(F_k - F_{k+1})` per record; `None` on the last record or when
    /// the objective did not strictly decrease.
    pub fn log10_decreases(&self) -> Vec<Option<f64>> {
        let mut out: Vec<Option<f64>> = self
            .records
            .windows(2)
            .map(|w| {
                let d = w[0].objective - w[1].objective;
                (d > 0.0).then(|| d.log10())
            })
            .collect();
        if !self.records.is_empty() {
            out.push(None);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub position: Matrix,
    pub trace: SolverTrace,
    pub spectral_energies: Vec<f64>,
}

impl Solution {
    pub fn status(&self) -> Status {
        self.trace.status
    }
}

/// `F(L) = -tr(LΠ) + η‖L‖_*`.
pub fn objective(l: &Matrix, ctx: &OperatorContext) -> Result<f64> {
    ensure_same_shape(l, ctx.pi_hat())?;
    // tr(LΠ) = <L, Πᵀ>
    let gain = linalg::trace_inner(&l.transpose(), ctx.pi_hat())?;
    Ok(-gain + ctx.eta() * linalg::nuclear_norm(l)?)
}

pub fn solve(pi_hat: &Matrix, params: &SolverParams) -> Result<Solution> {
    params.validate()?;
    let ctx = OperatorContext::new(pi_hat.clone(), params.beta, params.eta)?;
    solve_with_context(&ctx, params)
}

/// Runs the iteration on a prepared context. `ctx.beta()` and `ctx.eta()`
/// are used; `params.beta`/`params.eta` are ignored here.
pub fn solve_with_context(ctx: &OperatorContext, params: &SolverParams) -> Result<Solution> {
    params.validate()?;
    let n = ctx.dim();
    let l0 = initial_position(ctx, &params.initial)?;
    let step = |l: &Matrix| -> Result<Matrix> {
        if params.unconstrained {
            operators::prox_gradient(l, ctx)
        } else {
            operators::composed_t(l, ctx)
        }
    };

    let (beta, eta, theta) = (ctx.beta(), ctx.eta(), params.theta);
    let sigma = ctx.sigma();
    let mut l = step(&l0)?;
    let mut records = Vec::new();
    let mut status = Status::MaxIters;

    for k in 1..=params.max_iters {
        let tl = step(&l)?;
        let gap = linalg::frobenius_norm(&(&l - &tl));
        let coordinates = ctx.decomposition().coordinates(&l);
        let cases = if params.unconstrained {
            Vec::new()
        } else {
            (0..n)
                .map(|i| classify_unchecked(coordinates[i], sigma[i], beta, eta, theta))
                .collect()
        };
        records.push(TraceRecord {
            k,
            objective: objective(&l, ctx)?,
            gap,
            coordinates,
            cases,
        });
        if !gap.is_finite() {
            return Err(Error::domain(format!("iteration diverged at k = {k}")));
        }
        if gap <= params.tol {
            status = Status::Converged;
            break;
        }
        if k == params.max_iters {
            break;
        }
        l = l * (1.0 - theta) + tl * theta;
    }

    let spectral_energies = ctx.decomposition().coordinates(&l);
    Ok(Solution {
        position: l,
        trace: SolverTrace { records, status },
        spectral_energies,
    })
}

fn initial_position(ctx: &OperatorContext, init: &InitialPosition) -> Result<Matrix> {
    let n = ctx.dim();
    match init {
        InitialPosition::Zero => Ok(Matrix::zeros(n, n)),
        InitialPosition::Given(m) => {
            ensure_same_shape(m, ctx.pi_hat())?;
            Ok(m.clone())
        }
        InitialPosition::PrincipalPortfolios(count) => {
            if ctx.sigma()[0] == 0.0 {
                Ok(Matrix::zeros(n, n))
            } else {
                Ok(strategies::principal_portfolio_sum(
                    ctx.decomposition(),
                    (*count).min(n),
                ))
            }
        }
    }
}

/// Output of the coordinate-wise recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSolution {
    pub energies: Vec<f64>,
    /// `λ^k` for `k = 1, 2, ...`, aligned with the matrix trace records.
    pub history: Vec<Vec<f64>>,
    pub status: Status,
}

/// The KM recursion on spectral coordinates only:
/// `λ¹ = γ(λ⁰)`, then `λ^{k+1} = (1-θ)λ^k + θγ(λ^k)` per coordinate, stopping
/// when `max_i |λ_i^k - γ(λ_i^k)| ≤ tol`.
pub fn solve_spectral(
    sigmas: &[f64],
    lambda0: &[f64],
    params: &SolverParams,
) -> Result<SpectralSolution> {
    params.validate()?;
    if sigmas.len() != lambda0.len() {
        return Err(Error::dim(format!(
            "{} singular values vs {} initial coordinates",
            sigmas.len(),
            lambda0.len()
        )));
    }
    if sigmas.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::domain("singular values must be sorted descending"));
    }
    for (&s, &l) in sigmas.iter().zip(lambda0) {
        operators::scalar_t(l, s, params.beta, params.eta)?;
    }

    let (beta, eta, theta) = (params.beta, params.eta, params.theta);
    let gamma = |lam: &[f64]| -> Vec<f64> {
        lam.iter()
            .zip(sigmas)
            .map(|(&l, &s)| scalar_t_unchecked(l, s, beta, eta))
            .collect()
    };

    let mut lam = gamma(lambda0);
    let mut history = Vec::new();
    let mut status = Status::MaxIters;
    for k in 1..=params.max_iters {
        history.push(lam.clone());
        let g = gamma(&lam);
        let gap = lam
            .iter()
            .zip(&g)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if gap <= params.tol {
            status = Status::Converged;
            break;
        }
        if k == params.max_iters {
            break;
        }
        lam = lam
            .iter()
            .zip(&g)
            .map(|(&a, &b)| (1.0 - theta) * a + theta * b)
            .collect();
    }

    Ok(SpectralSolution {
        energies: lam,
        history,
        status,
    })
}

/// Per-coordinate minimizer of `η|λ| - σλ` over `[-1, 1]`: 1 when `σ > η`,
/// otherwise 0 (the tie `σ = η` is flat on `[0, 1]` and resolved to 0).
pub fn analytic_optimum(sigmas: &[f64], eta: f64) -> Vec<f64> {
    sigmas
        .iter()
        .map(|&s| if s > eta { 1.0 } else { 0.0 })
        .collect()
}
