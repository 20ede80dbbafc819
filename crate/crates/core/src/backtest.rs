//! Rolling-window signal-trading harness.
//!
//! Period `j`'s return row is the signal `S_j` for period `j + 1`. At each
//! tradable `j` the prediction matrix is estimated from the `T` pairs
//! `(S_τ, R_{τ+1})` with `τ = j-T .. j-1`, a position `L` is built from it, and
//! the realized return is `S_jᵀ L R_{j+1}`.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::strategies::{self, Strategy, TradingPosition};

pub const DEFAULT_WINDOW: usize = 120;

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    dates: Vec<String>,
    assets: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl ReturnsPanel {
    /// Rows are periods, columns assets; every return must be finite and
    /// strictly greater than -1.
    pub fn new(dates: Vec<String>, assets: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if assets.is_empty() {
            return Err(Error::dim("panel needs at least one asset"));
        }
        if rows.is_empty() {
            return Err(Error::InsufficientHistory {
                needed: 1,
                available: 0,
            });
        }
        if dates.len() != rows.len() {
            return Err(Error::dim(format!(
                "{} dates for {} rows",
                dates.len(),
                rows.len()
            )));
        }
        for (t, row) in rows.iter().enumerate() {
            if row.len() != assets.len() {
                return Err(Error::dim(format!(
                    "row {} ({}) has {} values, expected {}",
                    t,
                    dates[t],
                    row.len(),
                    assets.len()
                )));
            }
            if let Some((i, r)) = row
                .iter()
                .enumerate()
                .find(|(_, r)| !(r.is_finite() && **r > -1.0))
            {
                return Err(Error::domain(format!(
                    "return {r} for {} on {} is not a finite value above -1",
                    assets[i], dates[t]
                )));
            }
        }
        Ok(ReturnsPanel {
            dates,
            assets,
            rows,
        })
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_periods(&self) -> usize {
        self.rows.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AccumulationMode {
    /// `Π(1 + r) - 1`
    #[default]
    Compound,
    /// `Σ r`
    Sum,
}

/// Merges consecutive disjoint blocks of `k` periods into one; a trailing
/// partial block is dropped and each block takes its last date.
pub fn accumulate(panel: &ReturnsPanel, k: usize, mode: AccumulationMode) -> Result<ReturnsPanel> {
    if k == 0 {
        return Err(Error::config("accumulation block size must be at least 1"));
    }
    if k > panel.n_periods() {
        return Err(Error::InsufficientHistory {
            needed: k,
            available: panel.n_periods(),
        });
    }
    if k == 1 {
        return Ok(panel.clone());
    }
    let blocks = panel.n_periods() / k;
    let mut dates = Vec::with_capacity(blocks);
    let mut rows = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let block = &panel.rows[b * k..(b + 1) * k];
        let row = (0..panel.n_assets())
            .map(|i| match mode {
                AccumulationMode::Compound => {
                    block.iter().map(|r| 1.0 + r[i]).product::<f64>() - 1.0
                }
                AccumulationMode::Sum => block.iter().map(|r| r[i]).sum(),
            })
            .collect();
        rows.push(row);
        dates.push(panel.dates[(b + 1) * k - 1].clone());
    }
    ReturnsPanel::new(dates, panel.assets.clone(), rows)
}

/// Signals and the returns they predict, index-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedPairs<'a> {
    pub signals: &'a [Vec<f64>],
    pub returns: &'a [Vec<f64>],
    /// Date of each realized return.
    pub dates: &'a [String],
}

impl LaggedPairs<'_> {
    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }
}

/// `signals[j]` is row `j`, paired with the realized row `j + 1`.
pub fn lagged_signals(panel: &ReturnsPanel) -> Result<LaggedPairs<'_>> {
    let n = panel.n_periods();
    if n < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            available: n,
        });
    }
    Ok(LaggedPairs {
        signals: &panel.rows[..n - 1],
        returns: &panel.rows[1..],
        dates: &panel.dates[1..],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub window: usize,
    pub strategy: Strategy,
    pub accumulation: usize,
    pub mode: AccumulationMode,
}

impl BacktestConfig {
    pub fn new(strategy: Strategy) -> Self {
        BacktestConfig {
            window: DEFAULT_WINDOW,
            strategy,
            accumulation: 1,
            mode: AccumulationMode::Compound,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::config("window must be at least 1"));
        }
        if self.accumulation == 0 {
            return Err(Error::config("accumulation must be at least 1"));
        }
        if let Strategy::Ltpss(p) = &self.strategy {
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyReturns {
    pub strategy: String,
    pub dates: Vec<String>,
    pub values: Vec<f64>,
    pub positions_count: usize,
}

impl StrategyReturns {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One trading period's outcome.
#[derive(Debug, Clone)]
pub struct Period {
    pub date: String,
    pub position: TradingPosition,
    pub value: f64,
}

/// Accumulates the panel as configured, then trades every period that has a
/// full estimation window behind it.
pub fn run(panel: &ReturnsPanel, config: &BacktestConfig) -> Result<StrategyReturns> {
    let periods = run_periods(panel, config)?;
    Ok(StrategyReturns {
        strategy: config.strategy.label(),
        positions_count: periods.len(),
        dates: periods.iter().map(|p| p.date.clone()).collect(),
        values: periods.iter().map(|p| p.value).collect(),
    })
}

/// Like [`run`] but keeps every position. Periods are evaluated in parallel;
/// the output order and values match a sequential pass.
pub fn run_periods(panel: &ReturnsPanel, config: &BacktestConfig) -> Result<Vec<Period>> {
    config.validate()?;
    let panel = accumulate(panel, config.accumulation, config.mode)?;
    let pairs = lagged_signals(&panel)?;
    let window = config.window;
    if pairs.len() <= window {
        return Err(Error::InsufficientHistory {
            needed: window + 2,
            available: panel.n_periods(),
        });
    }

    let period = |j: usize| -> Result<Period> {
        let pm = strategies::estimate_prediction_matrix(
            &pairs.signals[j - window..j],
            &pairs.returns[j - window..j],
            window,
        )?;
        let position = config.strategy.position(&pm)?;
        let value = position.realized_return(&pairs.signals[j], &pairs.returns[j]);
        Ok(Period {
            date: pairs.dates[j].clone(),
            position,
            value,
        })
    };

    #[cfg(feature = "parallel")]
    let periods = (window..pairs.len()).into_par_iter().map(period).collect();
    #[cfg(not(feature = "parallel"))]
    let periods = (window..pairs.len()).map(period).collect();
    periods
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(rows: Vec<Vec<f64>>) -> ReturnsPanel {
        let dates = (0..rows.len())
            .map(|i| format!("2020-01-{:02}", i + 1))
            .collect();
        let assets = (0..rows[0].len()).map(|i| format!("A{i}")).collect();
        ReturnsPanel::new(dates, assets, rows).unwrap()
    }

    #[test]
    fn panel_validation() {
        let d = || vec!["d1".to_string(), "d2".to_string()];
        let a = || vec!["A".to_string()];
        assert!(ReturnsPanel::new(d(), a(), vec![vec![0.1], vec![-1.0]]).is_err());
        assert!(ReturnsPanel::new(d(), a(), vec![vec![0.1], vec![f64::NAN]]).is_err());
        assert!(ReturnsPanel::new(d(), a(), vec![vec![0.1], vec![0.1, 0.2]]).is_err());
        assert!(ReturnsPanel::new(vec![], a(), vec![]).is_err());
    }

    #[test]
    fn accumulate_examples() {
        let p = panel(vec![vec![0.01], vec![0.02]]);
        let out = accumulate(&p, 2, AccumulationMode::Compound).unwrap();
        assert_eq!(out.n_periods(), 1);
        assert!((out.rows()[0][0] - 0.0302).abs() < 1e-15);
        assert_eq!(out.dates()[0], "2020-01-02");

        let zeros = panel(vec![vec![0.0, 0.0]; 7]);
        let out = accumulate(&zeros, 3, AccumulationMode::Compound).unwrap();
        assert_eq!(out.n_periods(), 2);
        assert!(out.rows().iter().flatten().all(|&x| x == 0.0));

        let p = panel(vec![vec![0.01], vec![0.02], vec![-0.03]]);
        assert_eq!(accumulate(&p, 1, AccumulationMode::Compound).unwrap(), p);
        assert!(accumulate(&p, 4, AccumulationMode::Compound).is_err());
    }

    #[test]
    fn sum_accumulation() {
        let p = panel(vec![vec![0.01], vec![0.02], vec![0.5]]);
        let out = accumulate(&p, 2, AccumulationMode::Sum).unwrap();
        assert_eq!(out.n_periods(), 1);
        assert!((out.rows()[0][0] - 0.03).abs() < 1e-15);
    }

    #[test]
    fn lagged_examples() {
        let p = panel(vec![vec![0.1], vec![0.2], vec![0.3]]);
        let pairs = lagged_signals(&p).unwrap();
        assert_eq!(pairs.signals, &[vec![0.1], vec![0.2]]);
        assert_eq!(pairs.returns, &[vec![0.2], vec![0.3]]);

        let p = panel(vec![vec![0.1], vec![0.2]]);
        assert_eq!(lagged_signals(&p).unwrap().len(), 1);

        let p = panel(vec![vec![0.01, 0.02]; 5]);
        assert!(lagged_signals(&p)
            .unwrap()
            .signals
            .iter()
            .flatten()
            .all(|&s| s > 0.0));

        assert!(lagged_signals(&panel(vec![vec![0.1]])).is_err());
    }

    #[test]
    fn hand_walkthrough() {
        let p = panel(vec![vec![0.1], vec![0.2], vec![0.3]]);
        let cfg = BacktestConfig {
            window: 1,
            ..BacktestConfig::new(Strategy::SimpleFactor)
        };
        let out = run(&p, &cfg).unwrap();
        assert_eq!(out.values.len(), 1);
        assert!((out.values[0] - 0.06).abs() < 1e-15);
        assert_eq!(out.dates, vec!["2020-01-03".to_string()]);
    }

    #[test]
    fn zero_panel_gives_zero_returns() {
        let p = panel(vec![vec![0.0, 0.0, 0.0]; 12]);
        let cfg = BacktestConfig {
            window: 4,
            ..BacktestConfig::new(Strategy::SimpleFactor)
        };
        let out = run(&p, &cfg).unwrap();
        assert_eq!(out.len(), 12 - 4 - 1);
        assert!(out.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_asset_closed_form_is_sign_of_prediction() {
        // Π > 0: momentum, position +1
        let p = panel(vec![vec![0.1], vec![0.2], vec![0.3]]);
        let cfg = BacktestConfig {
            window: 1,
            ..BacktestConfig::new(Strategy::ClosedForm)
        };
        let out = run(&p, &cfg).unwrap();
        assert!((out.values[0] - 0.2 * 0.3).abs() < 1e-15);

        // Π = 0.1 * -0.2 < 0: position -1
        let p = panel(vec![vec![0.1], vec![-0.2], vec![0.3]]);
        let out = run(&p, &cfg).unwrap();
        assert!((out.values[0] - (0.2 * 0.3)).abs() < 1e-15);
    }

    #[test]
    fn insufficient_history() {
        let p = panel(vec![vec![0.1], vec![0.2], vec![0.3]]);
        let cfg = BacktestConfig {
            window: 2,
            ..BacktestConfig::new(Strategy::SimpleFactor)
        };
        assert!(matches!(
            run(&p, &cfg),
            Err(Error::InsufficientHistory { .. })
        ));
    }
}
