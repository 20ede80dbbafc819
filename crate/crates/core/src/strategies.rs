//! Prediction-matrix estimation and the trading-position constructors.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, ensure_finite, ensure_square, Matrix, SpectralDecomposition};
use crate::operators::OperatorContext;
use crate::solver::{self, SolverParams};

/// Tolerance on `‖L‖₂ ≤ 1` for every constructed position.
pub const POSITION_NORM_SLACK: f64 = 1e-9;

/// Empirical prediction matrix `Π = (1/T) Σ R_{τ+1} S_τᵀ` together with the
/// decomposition of `Πᵀ` every strategy is built from.
#[derive(Debug, Clone)]
pub struct PredictionMatrix {
    pi_hat: Matrix,
    dec: SpectralDecomposition,
    window: usize,
}

impl PredictionMatrix {
    pub fn from_matrix(pi_hat: Matrix, window: usize) -> Result<Self> {
        ensure_square(&pi_hat, "prediction matrix")?;
        ensure_finite(&pi_hat, "prediction matrix")?;
        let dec = linalg::svd(&pi_hat.transpose())?;
        Ok(PredictionMatrix {
            pi_hat,
            dec,
            window,
        })
    }

    pub fn pi_hat(&self) -> &Matrix {
        &self.pi_hat
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.dec
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn dim(&self) -> usize {
        self.dec.dim()
    }

    pub fn operator_context(&self, beta: f64, eta: f64) -> Result<OperatorContext> {
        OperatorContext::with_decomposition(self.pi_hat.clone(), self.dec.clone(), beta, eta)
    }
}

/// Averages `R_{τ+1} S_τᵀ` over the last `window` aligned pairs, where
/// `returns[j]` is realized one period after `signals[j]`.
pub fn estimate_prediction_matrix<S, R>(
    signals: &[S],
    returns: &[R],
    window: usize,
) -> Result<PredictionMatrix>
where
    S: AsRef<[f64]>,
    R: AsRef<[f64]>,
{
    if window == 0 {
        return Err(Error::config("window must be at least 1"));
    }
    if signals.len() != returns.len() {
        return Err(Error::dim(format!(
            "{} signals vs {} returns",
            signals.len(),
            returns.len()
        )));
    }
    if signals.len() < window {
        return Err(Error::InsufficientHistory {
            needed: window,
            available: signals.len(),
        });
    }
    let n = signals[0].as_ref().len();
    if n == 0 {
        return Err(Error::dim("signals must have at least one asset"));
    }
    let start = signals.len() - window;
    let mut pi = Matrix::zeros(n, n);
    for (s, r) in signals[start..].iter().zip(&returns[start..]) {
        let (s, r) = (s.as_ref(), r.as_ref());
        if s.len() != n || r.len() != n {
            return Err(Error::dim(format!(
                "expected {n} assets, got signal of {} and return of {}",
                s.len(),
                r.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                pi[(i, j)] += r[i] * s[j];
            }
        }
    }
    pi /= window as f64;
    PredictionMatrix::from_matrix(pi, window)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    SimpleFactor,
    ClosedForm,
    PrincipalPortfolios(usize),
    /// Single principal portfolio, one-based.
    PpComponent(usize),
    Ltpss(SolverParams),
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::SimpleFactor => "LTP-SF".into(),
            Strategy::ClosedForm => "LTP-CF".into(),
            Strategy::PrincipalPortfolios(l) => format!("LTP-PP({l})"),
            Strategy::PpComponent(n) => format!("PP{n}"),
            Strategy::Ltpss(_) => "LTPSS".into(),
        }
    }

    pub fn position(&self, pm: &PredictionMatrix) -> Result<TradingPosition> {
        match self {
            Strategy::SimpleFactor => Ok(ltp_sf(pm.dim())),
            Strategy::ClosedForm => Ok(ltp_cf(pm)),
            Strategy::PrincipalPortfolios(l) => ltp_pp(pm, *l),
            Strategy::PpComponent(n) => pp_component(pm, *n),
            Strategy::Ltpss(params) => ltpss(pm, params),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradingPosition {
    pub l: Matrix,
    pub strategy: String,
}

impl TradingPosition {
    fn new(l: Matrix, strategy: impl Into<String>) -> Self {
        TradingPosition {
            l,
            strategy: strategy.into(),
        }
    }

    pub fn spectral_norm(&self) -> Result<f64> {
        linalg::spectral_norm(&self.l)
    }

    /// Realized return `Sᵀ L R`.
    pub fn realized_return(&self, signal: &[f64], ret: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, s) in signal.iter().enumerate() {
            let row: f64 = ret
                .iter()
                .enumerate()
                .map(|(j, r)| self.l[(i, j)] * r)
                .sum();
            acc += s * row;
        }
        acc
    }
}

/// Identity position: each asset trades on its own signal.
pub fn ltp_sf(n: usize) -> TradingPosition {
    TradingPosition::new(Matrix::identity(n, n), "LTP-SF")
}

/// `UDVᵀ` with `D_ii = 1` on the numerical range of `Πᵀ` and 0 elsewhere;
/// equals `(ΠᵀΠ)^{-1/2} Πᵀ` when `Π` has full rank.
pub fn ltp_cf(pm: &PredictionMatrix) -> TradingPosition {
    let dec = &pm.dec;
    let n = dec.dim();
    let rank_tol = n as f64 * dec.sigma[0] * 1e-12;
    let d: Vec<f64> = dec
        .sigma
        .iter()
        .map(|&s| if s > rank_tol { 1.0 } else { 0.0 })
        .collect();
    TradingPosition::new(dec.lift(&d), "LTP-CF")
}

/// `Σ_{n<count} u_n v_nᵀ`.
pub fn principal_portfolio_sum(dec: &SpectralDecomposition, count: usize) -> Matrix {
    let n = dec.dim();
    let d: Vec<f64> = (0..n).map(|i| if i < count { 1.0 } else { 0.0 }).collect();
    dec.lift(&d)
}

pub fn ltp_pp(pm: &PredictionMatrix, count: usize) -> Result<TradingPosition> {
    if count == 0 || count > pm.dim() {
        return Err(Error::config(format!(
            "principal portfolio count must be in 1..={}, got {count}",
            pm.dim()
        )));
    }
    Ok(TradingPosition::new(
        principal_portfolio_sum(&pm.dec, count),
        format!("LTP-PP({count})"),
    ))
}

/// The `index`-th principal portfolio `u_n v_nᵀ` (one-based).
pub fn pp_component(pm: &PredictionMatrix, index: usize) -> Result<TradingPosition> {
    if index == 0 || index > pm.dim() {
        return Err(Error::config(format!(
            "principal portfolio index must be in 1..={}, got {index}",
            pm.dim()
        )));
    }
    Ok(TradingPosition::new(
        pm.dec.rank_one(index - 1),
        format!("PP{index}"),
    ))
}

pub fn ltpss(pm: &PredictionMatrix, params: &SolverParams) -> Result<TradingPosition> {
    params.validate()?;
    let ctx = pm.operator_context(params.beta, params.eta)?;
    let sol = solver::solve_with_context(&ctx, params)?;
    Ok(TradingPosition::new(sol.position, "LTPSS"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn diag(d: &[f64]) -> Matrix {
        Matrix::from_diagonal(&DVector::from_column_slice(d))
    }

    fn pm(pi: Matrix) -> PredictionMatrix {
        PredictionMatrix::from_matrix(pi, 1).unwrap()
    }

    #[test]
    fn estimation_examples() {
        let s = [[0.05], [0.1]];
        let r = [[0.1], [0.2]];
        let p = estimate_prediction_matrix(&s, &r, 2).unwrap();
        assert!((p.pi_hat()[(0, 0)] - 0.0125).abs() < 1e-15);

        let s = [[0.0, 0.0], [0.0, 0.0]];
        let r = [[0.3, -0.1], [0.2, 0.5]];
        let p = estimate_prediction_matrix(&s, &r, 2).unwrap();
        assert_eq!(p.pi_hat(), &Matrix::zeros(2, 2));

        let (a, b) = (0.7, -0.4);
        let p = estimate_prediction_matrix(&[[1.0, 0.0]], &[[a, b]], 1).unwrap();
        assert_eq!(p.pi_hat(), &Matrix::from_row_slice(2, 2, &[a, 0.0, b, 0.0]));
    }

    #[test]
    fn estimation_uses_trailing_window() {
        let s = [[9.0], [0.05], [0.1]];
        let r = [[9.0], [0.1], [0.2]];
        let p = estimate_prediction_matrix(&s, &r, 2).unwrap();
        assert!((p.pi_hat()[(0, 0)] - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn estimation_errors() {
        let s = [[0.1]];
        let r = [[0.2]];
        assert!(matches!(
            estimate_prediction_matrix(&s, &r, 2),
            Err(Error::InsufficientHistory {
                needed: 2,
                available: 1
            })
        ));
        assert!(matches!(
            estimate_prediction_matrix(&[vec![0.1, 0.2]], &[vec![0.2]], 1),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn simple_factor() {
        assert_eq!(ltp_sf(3).l, Matrix::identity(3, 3));
        assert_eq!(ltp_sf(1).l, Matrix::identity(1, 1));
        assert!((ltp_sf(5).spectral_norm().unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn closed_form_examples() {
        assert!((ltp_cf(&pm(Matrix::identity(2, 2))).l - Matrix::identity(2, 2)).norm() < 1e-14);
        assert!((ltp_cf(&pm(diag(&[2.0, -3.0]))).l - diag(&[1.0, -1.0])).norm() < 1e-14);
        assert_eq!(ltp_cf(&pm(Matrix::zeros(3, 3))).l, Matrix::zeros(3, 3));
    }

    #[test]
    fn closed_form_drops_null_directions() {
        let l = ltp_cf(&pm(diag(&[0.4, 0.0, 0.2]))).l;
        assert!((l - diag(&[1.0, 0.0, 1.0])).norm() < 1e-14);
    }

    #[test]
    fn closed_form_matches_inverse_square_root_formula() {
        let pi = Matrix::from_row_slice(3, 3, &[0.3, -0.2, 0.1, 0.05, 0.4, -0.1, 0.2, 0.1, 0.25]);
        let gram = pi.transpose() * &pi;
        let eig = gram.symmetric_eigen();
        let inv_sqrt = eig.eigenvalues.map(|e| 1.0 / e.sqrt());
        let root =
            &eig.eigenvectors * Matrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
        let expected = root * pi.transpose();
        assert!((ltp_cf(&pm(pi)).l - expected).norm() < 1e-12);
    }

    #[test]
    fn principal_portfolio_examples() {
        let p = pm(diag(&[3.0, 2.0, 1.0]));
        assert!((ltp_pp(&p, 2).unwrap().l - diag(&[1.0, 1.0, 0.0])).norm() < 1e-14);
        assert!((ltp_pp(&p, 1).unwrap().l - diag(&[1.0, 0.0, 0.0])).norm() < 1e-14);
        assert!((ltp_pp(&p, 3).unwrap().l - ltp_cf(&p).l).norm() < 1e-14);
        assert!(ltp_pp(&p, 0).is_err());
        assert!(ltp_pp(&p, 4).is_err());
    }

    #[test]
    fn component_examples() {
        let p = pm(diag(&[3.0, 2.0, 1.0]));
        assert!((pp_component(&p, 2).unwrap().l - diag(&[0.0, 1.0, 0.0])).norm() < 1e-14);
        assert!(pp_component(&p, 0).is_err());
        assert!(pp_component(&p, 4).is_err());

        let q = pm(Matrix::from_row_slice(2, 2, &[0.3, -0.2, 0.4, 0.1]));
        let c1 = pp_component(&q, 1).unwrap().l;
        assert!((c1.clone() - ltp_pp(&q, 1).unwrap().l).norm() < 1e-15);
        assert!((c1.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ltpss_examples() {
        let params = SolverParams::default();
        let l = ltpss(&pm(diag(&[0.5, 0.0005])), &params).unwrap().l;
        assert!((l - diag(&[1.0, 0.0])).norm() < 1e-6);

        let l = ltpss(&pm(Matrix::zeros(3, 3)), &params).unwrap().l;
        assert!(l.norm() < 1e-12);

        let pi = Matrix::from_row_slice(2, 2, &[0.3, -0.2, 0.4, 0.1]);
        let params = SolverParams {
            eta: 0.0,
            ..SolverParams::default()
        };
        let l = ltpss(&pm(pi.clone()), &params).unwrap().l;
        assert!((l - ltp_cf(&pm(pi)).l).norm() < 1e-6);
    }

    #[test]
    fn realized_return_is_bilinear() {
        let pos = TradingPosition::new(Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]), "x");
        // Sᵀ L R = s0 * r1 + 0.5 * s1 * r0
        let r = pos.realized_return(&[2.0, 3.0], &[5.0, 7.0]);
        assert!((r - (2.0 * 7.0 + 0.5 * 3.0 * 5.0)).abs() < 1e-14);
    }
}
