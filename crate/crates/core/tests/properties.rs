mod common;

use ltpss::backtest::{self, BacktestConfig, ReturnsPanel};
use ltpss::linalg::{self, Matrix};
use ltpss::metrics;
use ltpss::operators::{self, OperatorContext};
use ltpss::solver::{self, InitialPosition, SolverParams};
use ltpss::strategies::{self, Strategy as TradingStrategy};
use proptest::prelude::*;
use rand::Rng;

fn matrix_strategy(max_n: usize, scale: f64) -> impl Strategy<Value = Matrix> {
    (1..=max_n).prop_flat_map(move |n| {
        prop::collection::vec(-scale..scale, n * n).prop_map(move |v| Matrix::from_vec(n, n, v))
    })
}

fn context(pi: Matrix, beta: f64, eta: f64) -> OperatorContext {
    OperatorContext::new(pi, beta, eta).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent_and_bounded(pi in matrix_strategy(6, 1e-2), seed in any::<u64>()) {
        let n = pi.nrows();
        let ctx = context(pi, 100.0, 1e-3);
        let a = common::gaussian(&mut common::rng(seed), n, 2.0);
        let p = operators::project_spectral_box(&a, &ctx).unwrap();
        let pp = operators::project_spectral_box(&p, &ctx).unwrap();
        prop_assert!((&p - &pp).norm() < 1e-12);
        prop_assert!(linalg::spectral_norm(&p).unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn svt_is_the_nuclear_prox(a in matrix_strategy(5, 1.0), tau in 0.0..0.8f64, seed in any::<u64>()) {
        let n = a.nrows();
        let prox = |x: &Matrix| 0.5 * (x - &a).norm_squared() + tau * linalg::nuclear_norm(x).unwrap();
        let x = operators::svt(&a, tau).unwrap();
        let best = prox(&x);
        let mut rng = common::rng(seed);
        for _ in 0..20 {
            let y = &x + common::gaussian(&mut rng, n, 1e-2);
            prop_assert!(prox(&y) >= best - 1e-12);
        }
    }

    #[test]
    fn composed_operator_is_non_expansive(pi in matrix_strategy(6, 5e-3), seed in any::<u64>(), beta in 1.0..200.0f64) {
        let n = pi.nrows();
        let ctx = context(pi, beta, 1e-3);
        let mut rng = common::rng(seed);
        let a = common::gaussian(&mut rng, n, 1.0);
        let b = common::gaussian(&mut rng, n, 1.0);
        let ta = operators::composed_t(&a, &ctx).unwrap();
        let tb = operators::composed_t(&b, &ctx).unwrap();
        prop_assert!((&ta - &tb).norm() <= (&a - &b).norm() + 1e-10);
    }

    #[test]
    fn matrix_operator_acts_coordinatewise(pi in matrix_strategy(6, 5e-3), seed in any::<u64>()) {
        let n = pi.nrows();
        let ctx = context(pi, 100.0, 1e-3);
        let lam = common::uniform_vec(&mut common::rng(seed), n, -1.0, 1.0);
        let l = ctx.decomposition().lift(&lam);
        let t = operators::composed_t(&l, &ctx).unwrap();
        let coords = ctx.decomposition().coordinates(&t);
        for i in 0..n {
            let s = operators::scalar_t(lam[i], ctx.sigma()[i], 100.0, 1e-3).unwrap();
            prop_assert!((coords[i] - s).abs() < 1e-9, "coordinate {i}: {} vs {s}", coords[i]);
        }
    }

    #[test]
    fn every_state_has_exactly_one_case(
        lambda in -1.0..=1.0f64,
        sigma in 0.0..0.01f64,
        beta in 0.5..500.0f64,
        eta in 0.0..0.01f64,
    ) {
        let case = operators::case_classify(lambda, sigma, beta, eta, 0.9999).unwrap();
        prop_assert!((1..=10).contains(&case.number()));
        let t = operators::scalar_t(lambda, sigma, beta, eta).unwrap();
        prop_assert!((-1.0..=1.0).contains(&t));
        // Cases 6 and 7 are the regime that maps straight to zero.
        if matches!(case.number(), 6 | 7) {
            prop_assert_eq!(t, 0.0);
        }
    }

    #[test]
    fn closed_form_attains_nuclear_norm(pi in matrix_strategy(7, 1.0)) {
        let pm = strategies::PredictionMatrix::from_matrix(pi.clone(), 1).unwrap();
        let cf = strategies::ltp_cf(&pm).l;
        let rank_tol = pi.nrows() as f64 * pm.decomposition().sigma[0] * 1e-12;
        // The bound holds regardless of rank; null directions carry no gain.
        let gain = (&cf * &pi).trace();
        let nuclear: f64 = pm.decomposition().sigma.iter().filter(|&&s| s > rank_tol).sum();
        prop_assert!((gain - nuclear).abs() < 1e-9 * nuclear.max(1.0));
        prop_assert!(linalg::spectral_norm(&cf).unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn drawdown_matches_brute_force(r in prop::collection::vec(-0.5..0.5f64, 0..120)) {
        let fast = metrics::max_drawdown(&r);
        prop_assert_eq!(fast, common::brute_force_drawdown(&r));
        prop_assert!((0.0..=1.0).contains(&fast));
    }

    #[test]
    fn sharpe_is_scale_invariant(r in prop::collection::vec(-0.1..0.1f64, 3..60), c in 0.1..10.0f64, rf in -0.01..0.01f64) {
        let scaled: Vec<f64> = r.iter().map(|x| c * x).collect();
        if let (Ok(a), Ok(b)) = (metrics::sharpe_ratio(&r, rf), metrics::sharpe_ratio(&scaled, c * rf)) {
            prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn t_distribution_is_symmetric(t in -30.0..30.0f64, dof in 1.0..300.0f64) {
        let up = metrics::student_t_sf(t, dof);
        let down = metrics::student_t_cdf(-t, dof);
        prop_assert!((up - down).abs() < 1e-14);
        prop_assert!((metrics::student_t_cdf(t, dof) + metrics::student_t_cdf(-t, dof) - 1.0).abs() < 1e-13);
    }
}

#[test]
fn strict_descent_until_convergence() {
    let mut rng = common::rng(101);
    for _ in 0..20 {
        let n = rng.gen_range(2..=12);
        let sol = solver::solve(
            &common::prediction_matrix(&mut rng, n),
            &SolverParams::default(),
        )
        .unwrap();
        let f = sol.trace.objectives();
        for w in f.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(f.last().unwrap() <= &f[0]);
    }
}

#[test]
fn squared_gaps_are_summable() {
    let mut rng = common::rng(103);
    let params = SolverParams::default();
    for _ in 0..30 {
        let n = rng.gen_range(2..=10);
        let ctx = OperatorContext::new(
            common::prediction_matrix(&mut rng, n),
            params.beta,
            params.eta,
        )
        .unwrap();
        let sol = solver::solve_with_context(&ctx, &params).unwrap();
        let optimum = ctx
            .decomposition()
            .lift(&solver::analytic_optimum(ctx.sigma(), params.eta));
        let l1 = ctx.decomposition().lift(&sol.trace.records[0].coordinates);
        let bound = (&l1 - &optimum).norm_squared() / ((1.0 - params.theta) * params.theta) + 1e-6;
        let mut partial = 0.0;
        for rec in &sol.trace.records {
            partial += rec.gap * rec.gap;
            assert!(partial <= bound, "partial sum {partial} exceeds {bound}");
        }
    }
}

#[test]
fn solver_is_deterministic() {
    let pi = common::prediction_matrix(&mut common::rng(107), 8);
    let a = solver::solve(&pi, &SolverParams::default()).unwrap();
    let b = solver::solve(&pi, &SolverParams::default()).unwrap();
    assert_eq!(a.position, b.position);
    assert_eq!(a.trace, b.trace);
}

#[test]
fn zero_start_reaches_the_same_optimum() {
    let mut rng = common::rng(109);
    let pi = common::prediction_matrix(&mut rng, 6);
    let from_pp = solver::solve(&pi, &SolverParams::default()).unwrap();
    let from_zero = solver::solve(
        &pi,
        &SolverParams {
            initial: InitialPosition::Zero,
            ..SolverParams::default()
        },
    )
    .unwrap();
    assert!((&from_pp.position - &from_zero.position).norm() < 1e-6);
}

fn random_panel(seed: u64, rows: usize, assets: usize) -> ReturnsPanel {
    let mut rng = common::rng(seed);
    let dates = (0..rows).map(|t| format!("d{t:04}")).collect();
    let names = (0..assets).map(|i| format!("A{i}")).collect();
    let data = (0..rows)
        .map(|_| common::uniform_vec(&mut rng, assets, -0.05, 0.06))
        .collect();
    ReturnsPanel::new(dates, names, data).unwrap()
}

fn all_strategies() -> Vec<TradingStrategy> {
    vec![
        TradingStrategy::SimpleFactor,
        TradingStrategy::ClosedForm,
        TradingStrategy::PrincipalPortfolios(3),
        TradingStrategy::PpComponent(2),
        TradingStrategy::Ltpss(SolverParams::default()),
    ]
}

#[test]
fn backtest_returns_respect_cauchy_schwarz() {
    let panel = random_panel(113, 60, 4);
    for strategy in all_strategies() {
        let mut cfg = BacktestConfig::new(strategy);
        cfg.window = 12;
        let periods = backtest::run_periods(&panel, &cfg).unwrap();
        assert_eq!(periods.len(), 60 - 12 - 1);
        for (k, p) in periods.iter().enumerate() {
            let j = 12 + k;
            let s = &panel.rows()[j];
            let r = &panel.rows()[j + 1];
            let bound = s.iter().map(|x| x * x).sum::<f64>().sqrt()
                * r.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(
                p.value.abs() <= bound + 1e-15,
                "{}: {} > {bound}",
                p.position.strategy,
                p.value
            );
            assert!(p.position.spectral_norm().unwrap() <= 1.0 + 1e-9);
            assert_eq!(&p.date, &panel.dates()[j + 1]);
        }
    }
}

#[test]
fn backtest_is_deterministic() {
    let panel = random_panel(127, 50, 5);
    for strategy in all_strategies() {
        let mut cfg = BacktestConfig::new(strategy);
        cfg.window = 10;
        let a = backtest::run(&panel, &cfg).unwrap();
        let b = backtest::run(&panel, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn sliding_window_swaps_one_outer_product() {
    let panel = random_panel(131, 40, 3);
    let pairs = backtest::lagged_signals(&panel).unwrap();
    let window = 8;
    let outer = |t: usize| {
        let r = nalgebra::DVector::from_column_slice(&pairs.returns[t]);
        let s = nalgebra::DVector::from_column_slice(&pairs.signals[t]);
        r * s.transpose()
    };
    for j in window..pairs.len() - 1 {
        let now = strategies::estimate_prediction_matrix(
            &pairs.signals[..j],
            &pairs.returns[..j],
            window,
        )
        .unwrap();
        let next = strategies::estimate_prediction_matrix(
            &pairs.signals[..j + 1],
            &pairs.returns[..j + 1],
            window,
        )
        .unwrap();
        let slid = now.pi_hat() + (outer(j) - outer(j - window)) / window as f64;
        assert!((next.pi_hat() - slid).norm() < 1e-14);
    }
}

#[test]
fn ols_recovers_planted_model_with_noise_free_residuals() {
    let mut rng = common::rng(137);
    let n = 80;
    let cols: Vec<Vec<f64>> = (0..7)
        .map(|_| common::uniform_vec(&mut rng, n, -0.05, 0.05))
        .collect();
    let panel = metrics::FactorPanel {
        dates: (0..n).map(|t| t.to_string()).collect(),
        r_sf: cols[0].clone(),
        mkt: cols[1].clone(),
        smb: cols[2].clone(),
        hml: cols[3].clone(),
        rmw: cols[4].clone(),
        cma: cols[5].clone(),
        rf: cols[6].clone(),
    };
    let y: Vec<f64> = (0..n)
        .map(|t| 0.002 + 0.5 * cols[0][t] - 0.3 * cols[1][t] + 0.1 * cols[4][t])
        .collect();
    let reg = metrics::ols_ff5(&y, &panel).unwrap();
    assert!((reg.alpha() - 0.002).abs() < 1e-12);
    assert!(reg.is_perfect_fit());
    assert!(metrics::information_ratio(&reg).is_err());

    let mut z = y.clone();
    for (t, v) in z.iter_mut().enumerate() {
        *v += if t % 2 == 0 { 1e-3 } else { -1e-3 };
    }
    let reg = metrics::ols_ff5(&z, &panel).unwrap();
    assert_eq!(reg.dof, n - 7);
    assert!(metrics::information_ratio(&reg).unwrap().is_finite());
    let p = metrics::alpha_pvalue(&reg, metrics::Tail::Upper).unwrap();
    let q = metrics::alpha_pvalue(&reg, metrics::Tail::Lower).unwrap();
    assert!((p + q - 1.0).abs() < 1e-12);
}
