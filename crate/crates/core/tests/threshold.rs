use qnls_core::dynamics::{evolve, SolverConfig, State};
use qnls_core::grid::{make_grid, Field};
use qnls_core::symmetry::Gaussian;
use qnls_core::threshold::{classify_run, scan_l_curve, ClassifierConfig, ThresholdConfig, Verdict};

fn config() -> ThresholdConfig {
    ThresholdConfig {
        solver: SolverConfig { dt: 0.02, t_end: 2.0, record_every: 5, ..Default::default() },
        ..Default::default()
    }
}

#[test]
fn zero_data_and_free_runs_scatter() {
    let grid = make_grid(3, 32, 8.0).unwrap();
    let cfg = config();
    let (_, series, outcome) = evolve(&State::zeros(&grid), &cfg.solver).unwrap();
    assert_eq!(classify_run(&series, outcome, &ClassifierConfig::default()).verdict, Verdict::Scatters);

    let v0 = Gaussian::new(1.0, 0.7).sample(&grid).unwrap();
    let (_, series, outcome) = evolve(&State::new(Field::zeros(&grid), v0, 0.0).unwrap(), &cfg.solver).unwrap();
    let verdict = classify_run(&series, outcome, &ClassifierConfig::default());
    assert_eq!(verdict.verdict, Verdict::Scatters, "{verdict:?}");
    assert_eq!(verdict.u.accumulator, 0.0);
}

#[test]
fn l_curve_starts_at_the_free_run() {
    let grid = make_grid(3, 32, 8.0).unwrap();
    let cfg = config();
    let v0 = Gaussian::new(1.0, 0.7).sample(&grid).unwrap();
    let shape = Gaussian::new(1.0, 0.8).sample(&grid).unwrap();
    let curve = scan_l_curve(&v0, &[shape], &[0.0, 0.05], &cfg).unwrap();
    let (_, free, _) = evolve(&State::new(Field::zeros(&grid), v0, 0.0).unwrap(), &cfg.solver).unwrap();
    assert_eq!(curve.l_values[0], free.w_proxy_norm());
    assert!(curve.l_values[1] > curve.l_values[0]);
    assert!(curve.violations.is_empty());
    assert_eq!(curve.saturated, [true, true]);
}
