//! Sparse-spectrum linear trading positions.
//!
//! A linear trading position is an `N×N` matrix `L` that turns the current
//! signal vector `S_t` into the realized return `S_tᵀ L R_{t+1}`. This crate
//! estimates the prediction matrix from a rolling window, builds the classic
//! closed-form and principal-portfolio positions, and solves the
//! nuclear-norm-regularized, spectral-norm-constrained problem with a
//! Krasnoselskii-Mann fixed-point iteration. A backtester and the usual
//! performance metrics sit on top.

pub mod backtest;
#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
#[cfg(feature = "cli")]
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod operators;
pub mod solver;
pub mod strategies;

pub use backtest::{AccumulationMode, BacktestConfig, ReturnsPanel, StrategyReturns};
pub use error::{Error, Result};
pub use linalg::{Matrix, SpectralDecomposition};
pub use operators::OperatorContext;
pub use solver::{Solution, SolverParams, SolverTrace, Status};
pub use strategies::{PredictionMatrix, Strategy, TradingPosition};
