//! Performance metrics: mean return, Sharpe ratio, five-factor regression,
//! information ratio, alpha p-value and maximum drawdown.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Regression design: intercept plus these slopes, in this order.
pub const FACTOR_NAMES: [&str; 6] = ["r_SF", "MKT", "SMB", "HML", "RMW", "CMA"];
pub const N_COEFFICIENTS: usize = 7;

pub fn mean_return(r: &[f64]) -> Result<f64> {
    if r.is_empty() {
        return Err(Error::UndefinedMetric("mean of an empty series".into()));
    }
    Ok(r.iter().sum::<f64>() / r.len() as f64)
}

/// Sample standard deviation, `n - 1` denominator.
pub fn sample_std(r: &[f64]) -> Result<f64> {
    if r.len() < 2 {
        return Err(Error::UndefinedMetric(format!(
            "sample standard deviation needs at least 2 values, got {}",
            r.len()
        )));
    }
    let m = mean_return(r)?;
    let ss: f64 = r.iter().map(|x| (x - m) * (x - m)).sum();
    Ok((ss / (r.len() - 1) as f64).sqrt())
}

/// `(MR - r_f) / ŝ(r)`, not annualized.
pub fn sharpe_ratio(r: &[f64], risk_free: f64) -> Result<f64> {
    let s = sample_std(r)?;
    let m = mean_return(r)?;
    if s <= zero_spread_floor(r) {
        return Err(Error::UndefinedMetric(
            "Sharpe ratio of a constant series".into(),
        ));
    }
    Ok((m - risk_free) / s)
}

/// Spread below which a series counts as constant: a few ulps of its magnitude.
fn zero_spread_floor(r: &[f64]) -> f64 {
    let scale = r.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    scale * 1e-14
}

/// Factor returns aligned one-to-one with a strategy's return series.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPanel {
    pub dates: Vec<String>,
    pub r_sf: Vec<f64>,
    pub mkt: Vec<f64>,
    pub smb: Vec<f64>,
    pub hml: Vec<f64>,
    pub rmw: Vec<f64>,
    pub cma: Vec<f64>,
    pub rf: Vec<f64>,
}

impl FactorPanel {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    fn columns(&self) -> [&[f64]; 6] {
        [
            &self.r_sf, &self.mkt, &self.smb, &self.hml, &self.rmw, &self.cma,
        ]
    }

    fn check(&self) -> Result<()> {
        let n = self.dates.len();
        for (name, col) in FACTOR_NAMES
            .iter()
            .copied()
            .zip(self.columns())
            .chain([("RF", &self.rf[..])])
        {
            if col.len() != n {
                return Err(Error::dim(format!(
                    "factor {name} has {} values for {n} dates",
                    col.len()
                )));
            }
        }
        Ok(())
    }

    pub fn mean_risk_free(&self) -> Result<f64> {
        mean_return(&self.rf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    /// `(α, ζ₀, …, ζ₅)`
    pub coefficients: [f64; N_COEFFICIENTS],
    pub standard_errors: [f64; N_COEFFICIENTS],
    pub t_stats: [f64; N_COEFFICIENTS],
    pub residuals: Vec<f64>,
    /// `sqrt(SSR / (n - 7))`, the regression standard error.
    pub residual_std: f64,
    pub r_squared: f64,
    pub dof: usize,
    response_std: f64,
}

impl RegressionResult {
    pub fn alpha(&self) -> f64 {
        self.coefficients[0]
    }

    /// True when the residuals vanish to rounding; IR and the alpha test are
    /// undefined then.
    pub fn is_perfect_fit(&self) -> bool {
        let rms = (self.residuals.iter().map(|e| e * e).sum::<f64>() / self.residuals.len() as f64)
            .sqrt();
        rms <= 1e-12 * self.response_std.max(f64::MIN_POSITIVE)
    }
}

/// Least squares of `y` on `[1, r_SF, MKT, SMB, HML, RMW, CMA]` through a
/// Householder QR of the design.
pub fn ols_ff5(r: &[f64], factors: &FactorPanel) -> Result<RegressionResult> {
    factors.check()?;
    if r.len() != factors.len() {
        return Err(Error::dim(format!(
            "{} strategy returns vs {} factor rows",
            r.len(),
            factors.len()
        )));
    }
    let n = r.len();
    if n <= N_COEFFICIENTS {
        return Err(Error::InsufficientHistory {
            needed: N_COEFFICIENTS + 1,
            available: n,
        });
    }
    let cols = factors.columns();
    let design = DMatrix::from_fn(
        n,
        N_COEFFICIENTS,
        |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] },
    );
    if design.iter().chain(r).any(|x| !x.is_finite()) {
        return Err(Error::domain("regression inputs must be finite"));
    }
    let y = DVector::from_column_slice(r);

    let qr = design.clone().qr();
    let rmat = qr.r();
    let max_diag = (0..N_COEFFICIENTS)
        .map(|i| rmat[(i, i)].abs())
        .fold(0.0, f64::max);
    if let Some(i) =
        (0..N_COEFFICIENTS).find(|&i| rmat[(i, i)].abs() <= max_diag * 1e-12 * n as f64)
    {
        let name = if i == 0 {
            "intercept"
        } else {
            FACTOR_NAMES[i - 1]
        };
        return Err(Error::SingularDesign(format!(
            "column {name} is linearly dependent on the preceding columns"
        )));
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let qty_head = qty.rows(0, N_COEFFICIENTS).into_owned();
    let beta = rmat
        .solve_upper_triangular(&qty_head)
        .ok_or_else(|| Error::SingularDesign("triangular solve failed".into()))?;

    let fitted = &design * &beta;
    let residuals: Vec<f64> = (&y - fitted).iter().copied().collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let dof = n - N_COEFFICIENTS;
    let sigma2 = ssr / dof as f64;

    // (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ
    let r_inv = rmat
        .solve_upper_triangular(&DMatrix::identity(N_COEFFICIENTS, N_COEFFICIENTS))
        .ok_or_else(|| Error::SingularDesign("triangular inverse failed".into()))?;
    let cov = &r_inv * r_inv.transpose();

    let mut coefficients = [0.0; N_COEFFICIENTS];
    let mut standard_errors = [0.0; N_COEFFICIENTS];
    let mut t_stats = [0.0; N_COEFFICIENTS];
    for j in 0..N_COEFFICIENTS {
        coefficients[j] = beta[j];
        standard_errors[j] = (sigma2 * cov[(j, j)]).sqrt();
        t_stats[j] = beta[j] / standard_errors[j];
    }

    let ybar = mean_return(r)?;
    let sst: f64 = r.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    let r_squared = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else {
        1.0
    };

    Ok(RegressionResult {
        coefficients,
        standard_errors,
        t_stats,
        residuals,
        residual_std: sigma2.sqrt(),
        r_squared,
        dof,
        response_std: (sst / (n - 1) as f64).sqrt(),
    })
}

/// `α̂ / ŝ(ε)` with the `n - 1` sample standard deviation of the residuals.
pub fn information_ratio(reg: &RegressionResult) -> Result<f64> {
    if reg.is_perfect_fit() {
        return Err(Error::UndefinedMetric(
            "information ratio of a perfect fit (zero residual spread)".into(),
        ));
    }
    Ok(reg.alpha() / sample_std(&reg.residuals)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tail {
    /// `P(T ≥ t̂)`: small when alpha is significantly positive.
    #[default]
    Upper,
    /// `P(T ≤ t̂)`
    Lower,
}

/// One-sided p-value of the alpha t-statistic on `n - 7` degrees of freedom.
pub fn alpha_pvalue(reg: &RegressionResult, tail: Tail) -> Result<f64> {
    if reg.dof < 1 {
        return Err(Error::UndefinedMetric(
            "alpha test needs at least one degree of freedom".into(),
        ));
    }
    if reg.is_perfect_fit() {
        return Err(Error::UndefinedMetric("alpha test on a perfect fit".into()));
    }
    let t = reg.t_stats[0];
    let dof = reg.dof as f64;
    Ok(match tail {
        Tail::Upper => student_t_sf(t, dof),
        Tail::Lower => student_t_sf(-t, dof),
    })
}

/// `P(T ≥ t)` for Student's t with `dof` degrees of freedom.
///
/// Uses `P(|T| ≥ |t|) = I_x(ν/2, 1/2)` with `x = ν/(ν+t²)`.
pub fn student_t_sf(t: f64, dof: f64) -> f64 {
    if t.is_nan() || dof.is_nan() || dof <= 0.0 {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let t2 = t * t;
    let x = dof / (dof + t2);
    let one_minus_x = t2 / (dof + t2);
    let half_two_sided = 0.5 * regularized_incomplete_beta(dof / 2.0, 0.5, x, one_minus_x);
    if t >= 0.0 {
        half_two_sided
    } else {
        1.0 - half_two_sided
    }
}

pub fn student_t_cdf(t: f64, dof: f64) -> f64 {
    student_t_sf(-t, dof)
}

/// `I_x(a, b)`; `one_minus_x` is passed separately so callers can supply it
/// without cancellation.
///
/// The continued fraction converges quickly for `x < (a+1)/(a+b+2)`; above
/// that the symmetry `I_x(a,b) = 1 - I_{1-x}(b,a)` is used. The fraction is
/// evaluated with the modified Lentz method.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64, one_minus_x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if one_minus_x <= 0.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * one_minus_x.ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        (ln_front.exp() / a) * beta_continued_fraction(a, b, x)
    } else {
        1.0 - (ln_front.exp() / b) * beta_continued_fraction(b, a, one_minus_x)
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_TERMS: usize = 10_000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_TERMS {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Lanczos approximation (g = 7, 9 terms), reflection below 1/2.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Largest peak-to-trough loss of the compounded wealth `W_t = Π(1 + r)`,
/// starting from `W_0 = 1`. Clamped to `[0, 1]`; wealth at or below zero is a
/// drawdown of 1.
pub fn max_drawdown(r: &[f64]) -> f64 {
    let mut wealth = 1.0_f64;
    let mut peak = 1.0_f64;
    let mut worst = 0.0_f64;
    for &x in r {
        wealth *= 1.0 + x;
        peak = peak.max(wealth);
        let dd = ((peak - wealth) / peak).clamp(0.0, 1.0);
        worst = worst.max(dd);
    }
    worst
}

/// One row of a backtest report. Regression-based entries are `None` when no
/// factors were supplied or the metric is undefined for the series.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub strategy: String,
    pub mean_return: f64,
    pub sharpe: Option<f64>,
    pub information_ratio: Option<f64>,
    pub alpha: Option<f64>,
    pub pvalue: Option<f64>,
    pub max_drawdown: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BacktestReport {
    pub rows: Vec<ReportRow>,
}

/// Computes every metric for one return series.
pub fn evaluate(
    strategy: &str,
    r: &[f64],
    factors: Option<&FactorPanel>,
    risk_free: f64,
    tail: Tail,
) -> Result<ReportRow> {
    let mut row = ReportRow {
        strategy: strategy.to_string(),
        mean_return: mean_return(r)?,
        sharpe: sharpe_ratio(r, risk_free).ok(),
        information_ratio: None,
        alpha: None,
        pvalue: None,
        max_drawdown: max_drawdown(r),
    };
    if let Some(f) = factors {
        let reg = ols_ff5(r, f)?;
        row.alpha = Some(reg.alpha());
        row.information_ratio = information_ratio(&reg).ok();
        row.pvalue = alpha_pvalue(&reg, tail).ok();
    }
    Ok(row)
}
