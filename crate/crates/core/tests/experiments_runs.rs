mod common;

use subharmonic::experiments::*;
use subharmonic::grids::*;
use subharmonic::semigroup::*;
use subharmonic::Error;

fn res() -> LineResolution {
    LineResolution { modes: 16, xi_nodes: 64, ..Default::default() }
}

#[test]
fn zero_operator_keeps_baseline() {
    let period = 1.0;
    let grid = LineGrid::new(10.0, period / 16.0).unwrap();
    let g = LineFunction::from_real_fn(grid, |x| (-x * x / 2.0).exp());
    let report = run_convergence(&OperatorSpec::zero(1), &g, period, &[1, 2, 4, 8], &[0.0, 0.5, 2.0], res()).unwrap();
    for (i, row) in report.errors.iter().enumerate() {
        for e in row {
            assert!((e - report.baseline[i]).abs() <= 1e-12);
        }
    }
    assert!(report.check_invariants().all());
    let uni = run_uniformity(&OperatorSpec::zero(1), &g, period, &[1, 2, 4, 8], &[0.0, 1.0], res()).unwrap();
    assert!(uni.decreasing());
    for (s, d) in uni.sup_errors.iter().zip(&uni.baseline) {
        assert!((s - d).abs() <= 1e-12);
    }
}

#[test]
fn transport_of_compact_bump_is_exact() {
    let period = 2.0;
    let grid = LineGrid::new(16.0, period / 32.0).unwrap();
    let g = LineFunction::from_real_fn(grid, |x| common::bump(0.8, x));
    let report = run_convergence(&OperatorSpec::transport(0.5), &g, period, &[2, 4, 8], &[0.0, 0.5, 1.0], res()).unwrap();
    assert!(report.baseline.iter().all(|&d| d == 0.0));
    for row in &report.errors {
        for e in row {
            assert!(*e <= 1e-10, "{e}");
        }
    }
}

#[test]
fn heat_report_satisfies_invariants() {
    let period = 1.0;
    let grid = LineGrid::new(12.0, period / 16.0).unwrap();
    let g = LineFunction::from_real_fn(grid, |x| (-x * x / 4.0).exp());
    let report = run_convergence(&OperatorSpec::heat(0.5), &g, period, &[1, 2, 4, 8], &[0.0, 0.5, 1.0], res()).unwrap();
    let checks = report.check_invariants();
    assert!(checks.all(), "{checks:?}");
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("n,t,E,leg1,leg2,delta_n\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 3);
}

#[test]
fn bad_schedules_are_rejected() {
    let period = 1.0;
    let grid = LineGrid::new(4.0, period / 8.0).unwrap();
    let g = LineFunction::zeros(grid, 1);
    let op = OperatorSpec::zero(1);
    assert!(matches!(run_convergence(&op, &g, period, &[2, 2], &[0.0], res()), Err(Error::NotIncreasing)));
    assert!(matches!(
        run_convergence(&op, &g, period, &[1, 16], &[0.0], res()),
        Err(Error::ScheduleExceedsDomain { .. })
    ));
}

#[test]
fn heat_family_is_dominated() {
    let period = 1.0;
    let grid = LineGrid::new(12.0, period / 16.0).unwrap();
    let g = LineFunction::from_real_fn(grid, |x| (-x * x).exp());
    let times: Vec<f64> = (1..=10).map(|k| 1.0 / (k * k) as f64).collect();
    let fam = evolve_line_times(&OperatorSpec::heat(0.2), &g, period, &times, res()).unwrap();
    let dom = check_domination(&fam).unwrap();
    assert!(dom.plausible);
    assert!(dom.norm >= g.l2_norm() * (1.0 - 1e-12));

    let drifting: Vec<LineFunction> =
        (0..10).map(|k| LineFunction::from_real_fn(grid, |x| (-(x - k as f64).powi(2)).exp())).collect();
    assert!(!check_domination(&drifting).unwrap().plausible);
}

#[test]
fn constant_sequence_averages_exactly() {
    let period = 2.0;
    let grid = LineGrid::new(24.0, period / 16.0).unwrap();
    let g = LineFunction::from_real_fn(grid, |x| common::bump(0.9, x));
    let periods: Vec<usize> = (1..=8).map(|j| 2 + j).collect();
    let seq = oscillatory_sequence(&g, period, &periods, &vec![0.0; 8], |_| 1.0).unwrap();
    let rep = run_averaged_convergence(&OperatorSpec::zero(1), &seq, &g, &[1, 2, 4, 8], &[0.0, 1.0], res()).unwrap();
    assert!(rep.strong_errors.iter().all(|&e| e <= 1e-14));
    assert_eq!(rep.periods, vec![3, 4, 6, 10]);
}

#[test]
fn averages_converge_where_sequence_does_not() {
    let period = 1.0;
    let grid = LineGrid::new(24.0, period / 32.0).unwrap();
    let g = LineFunction::from_real_fn(grid, |x| (-x * x / 4.0).exp());
    let count = 32;
    let periods: Vec<usize> = (1..=count).map(|j| 8 + j).collect();
    let freqs: Vec<f64> = (1..=count).map(|j| j as f64).collect();
    let seq = oscillatory_sequence(&g, period, &periods, &freqs, |x| (-x * x / 8.0).exp()).unwrap();
    let raw: Vec<f64> = seq.iter().map(|s| zero_extend(s, &grid).unwrap().l2_distance(&g).unwrap()).collect();
    assert!(raw.iter().all(|&e| e > 1.0));
    let rep = run_averaged_convergence(&OperatorSpec::heat(0.1), &seq, &g, &[2, 4, 8, 16, 32], &[0.0, 0.5], res()).unwrap();
    assert!(rep.strong_errors.windows(2).all(|w| w[1] < w[0]));
    let (_, p) = rep.strong_rate();
    assert!((0.35..0.65).contains(&p), "{p}");
    for (row, strong) in rep.evolved_errors.iter().zip(&rep.strong_errors) {
        assert!((row[0] - strong).abs() <= 1e-10);
        assert!(row[1] <= row[0]);
    }
}

#[test]
fn periodic_average_extends_to_line_average() {
    let period = 1.0;
    let grid = LineGrid::new(16.0, period / 16.0).unwrap();
    let g = LineFunction::from_real_fn(grid, |x| (-x * x / 2.0).exp());
    let periods: Vec<usize> = (1..=6).map(|j| 2 + 2 * j).collect();
    let freqs: Vec<f64> = (1..=6).map(|j| 3.0 * j as f64).collect();
    let seq = oscillatory_sequence(&g, period, &periods, &freqs, |x| (-x * x).exp()).unwrap();
    for m in 1..=6 {
        let (avg, per) = banach_saks_average(&seq, m, &grid).unwrap();
        assert_eq!(zero_extend(&per, &grid).unwrap(), avg);
    }
}

#[test]
fn average_rejects_unsorted_periods() {
    let grid = PeriodicGrid::new(1.0, 3, 8).unwrap();
    let seq = vec![PeriodicFunction::zeros(grid, 1), PeriodicFunction::zeros(grid.with_periods(2).unwrap(), 1)];
    let target = LineGrid::new(4.0, 0.125).unwrap();
    assert!(matches!(banach_saks_average(&seq, 2, &target), Err(Error::NotIncreasing)));
    assert!(banach_saks_average(&seq, 0, &target).is_err());
}

#[test]
fn power_law_fit_recovers_exponent() {
    let xs: Vec<f64> = (1..10).map(|k| k as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-0.75)).collect();
    let (c, p) = fit_power_law(&xs, &ys);
    assert!((c - 3.0).abs() <= 1e-12 && (p - 0.75).abs() <= 1e-12);
}
