//! Convergence experiments comparing the zero-extended periodic solutions
//! `ṽ_n = (e^{tA_n} g_n)~` with the line solution `v = e^{tA} g`, split as
//!
//! ```text
//! ‖ṽ_n - v‖ ≤ ‖ṽ_n - w_n‖ + ‖w_n - v‖,   w_n = e^{tA} g̃_n,
//! ```
//!
//! plus domination diagnostics and Cesàro averages `G_m = (1/m) Σ_j g̃_{n_j}`
//! for weakly convergent data.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{periodize, zero_extend, LineFunction, LineGrid, PeriodicFunction};
use crate::semigroup::{self, evolve_line_times, evolve_periodic_times, LineResolution, OperatorSpec};

/// ξ samples used when estimating `‖e^{tA}‖` for the leg-2 bound.
const NORM_XI_SAMPLES: usize = 33;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "M")]
    pub points_per_period: usize,
    #[serde(rename = "L")]
    pub modes: usize,
    pub xi_nodes: usize,
    pub rule: String,
    #[serde(rename = "X")]
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub t: f64,
    #[serde(rename = "E")]
    pub error: f64,
    pub leg1: f64,
    pub leg2: f64,
    pub delta_n: f64,
}

/// `E[n][t]`, the two triangle legs, and `δ_n = ‖g̃_n - g‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schedule: Vec<usize>,
    pub times: Vec<f64>,
    pub errors: Vec<Vec<f64>>,
    pub leg1: Vec<Vec<f64>>,
    pub leg2: Vec<Vec<f64>>,
    pub baseline: Vec<f64>,
    /// Per `t`, the L² norm of `max_n |ṽ_n(·,t)|`.
    pub domination_stat: Vec<f64>,
    /// Per `t`, the estimate of `‖e^{tA}‖` from the Bloch blocks.
    pub semigroup_norm: Vec<f64>,
    pub metadata: ReportMetadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantChecks {
    pub nonnegative: bool,
    pub schedule_increasing: bool,
    pub triangle: bool,
    pub baseline_at_zero: bool,
    pub semigroup_bound: bool,
    pub monotone_tail: bool,
}

impl InvariantChecks {
    pub fn all(&self) -> bool {
        self.nonnegative
            && self.schedule_increasing
            && self.triangle
            && self.baseline_at_zero
            && self.semigroup_bound
            && self.monotone_tail
    }
}

impl ConvergenceReport {
    pub fn rows(&self) -> Vec<ConvergenceRow> {
        let mut rows = Vec::with_capacity(self.schedule.len() * self.times.len());
        for (i, &n) in self.schedule.iter().enumerate() {
            for (k, &t) in self.times.iter().enumerate() {
                rows.push(ConvergenceRow {
                    n,
                    t,
                    error: self.errors[i][k],
                    leg1: self.leg1[i][k],
                    leg2: self.leg2[i][k],
                    delta_n: self.baseline[i],
                });
            }
        }
        rows
    }

    /// CSV with columns `n, t, E, leg1, leg2, delta_n`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `max_t E_n(t)` for each `n`.
    pub fn sup_errors(&self) -> Vec<f64> {
        self.errors.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect()
    }

    pub fn check_invariants(&self) -> InvariantChecks {
        let s = self.schedule.len();
        let entries = || (0..s).flat_map(|i| (0..self.times.len()).map(move |k| (i, k)));
        let nonnegative = self.baseline.iter().all(|&d| d >= 0.0)
            && entries().all(|(i, k)| self.errors[i][k] >= 0.0 && self.leg1[i][k] >= 0.0 && self.leg2[i][k] >= 0.0);
        let triangle = entries().all(|(i, k)| self.errors[i][k] <= self.leg1[i][k] + self.leg2[i][k] + 1e-10);
        let baseline_at_zero = entries()
            .filter(|&(_, k)| self.times[k] == 0.0)
            .all(|(i, k)| (self.errors[i][k] - self.baseline[i]).abs() <= 1e-12);
        let semigroup_bound = entries().all(|(i, k)| {
            let norm = self.semigroup_norm[k];
            norm > 1.0 + 1e-12 || self.leg2[i][k] <= norm * self.baseline[i] * (1.0 + 1e-6) + 1e-14
        });
        let monotone_tail = (s / 2..s.saturating_sub(1))
            .all(|i| (0..self.times.len()).all(|k| self.errors[i + 1][k] < self.errors[i][k]));
        InvariantChecks {
            nonnegative,
            schedule_increasing: self.schedule.windows(2).all(|w| w[0] < w[1]),
            triangle,
            baseline_at_zero,
            semigroup_bound,
            monotone_tail,
        }
    }
}

fn validate_schedule(schedule: &[usize], grid: &LineGrid, period: f64) -> Result<()> {
    if schedule.is_empty() || schedule.contains(&0) {
        return Err(Error::InvalidInput("schedule must hold positive period counts".into()));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::NotIncreasing);
    }
    for &n in schedule {
        let needed = 0.5 * n as f64 * period;
        if needed > grid.half_width() * (1.0 + 1e-12) {
            return Err(Error::ScheduleExceedsDomain { n, needed, available: grid.half_width() });
        }
    }
    Ok(())
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidInput("times must be finite and nonnegative".into()));
    }
    Ok(())
}

fn envelope_values(family: &[&LineFunction]) -> Vec<f64> {
    let first = family[0];
    let n = first.grid().len();
    let dim = first.dim();
    let mut env = vec![0.0f64; n];
    for f in family {
        for (j, e) in env.iter_mut().enumerate() {
            let m = (0..dim).map(|c| f.component(c)[j].norm_sqr()).sum::<f64>().sqrt();
            *e = e.max(m);
        }
    }
    env
}

/// Evolve `g_n = periodize(g, n, T)` on `[-nT/2, nT/2)` and `g`, `g̃_n` on the
/// line for every `n` in `schedule` and `t` in `times`.
pub fn run_convergence(
    op: &OperatorSpec,
    g: &LineFunction,
    period: f64,
    schedule: &[usize],
    times: &[f64],
    res: LineResolution,
) -> Result<ConvergenceReport> {
    let grid = *g.grid();
    validate_schedule(schedule, &grid, period)?;
    validate_times(times)?;
    let v = evolve_line_times(op, g, period, times, res)?;

    struct Run {
        delta: f64,
        errors: Vec<f64>,
        leg1: Vec<f64>,
        leg2: Vec<f64>,
        tilde: Vec<LineFunction>,
    }
    let runs: Vec<Run> = schedule
        .par_iter()
        .map(|&n| {
            let gn = periodize(g, n, period)?;
            let gt = zero_extend(&gn, &grid)?;
            let delta = gt.l2_distance(g)?;
            let vn = evolve_periodic_times(op, &gn, times, res.modes)?;
            let w = evolve_line_times(op, &gt, period, times, res)?;
            let tilde = vn.iter().map(|p| zero_extend(p, &grid)).collect::<Result<Vec<_>>>()?;
            let mut run = Run { delta, errors: vec![], leg1: vec![], leg2: vec![], tilde: vec![] };
            for k in 0..times.len() {
                run.errors.push(tilde[k].l2_distance(&v[k])?);
                run.leg1.push(tilde[k].l2_distance(&w[k])?);
                run.leg2.push(w[k].l2_distance(&v[k])?);
            }
            run.tilde = tilde;
            Ok(run)
        })
        .collect::<Result<_>>()?;

    let dx = grid.spacing();
    let domination_stat = (0..times.len())
        .map(|k| {
            let fam: Vec<&LineFunction> = runs.iter().map(|r| &r.tilde[k]).collect();
            (envelope_values(&fam).iter().map(|e| e * e).sum::<f64>() * dx).sqrt()
        })
        .collect();
    let semigroup_norm = times
        .iter()
        .map(|&t| semigroup::propagator_norm(op, period, t, res.modes, NORM_XI_SAMPLES))
        .collect::<Result<_>>()?;

    Ok(ConvergenceReport {
        schedule: schedule.to_vec(),
        times: times.to_vec(),
        errors: runs.iter().map(|r| r.errors.clone()).collect(),
        leg1: runs.iter().map(|r| r.leg1.clone()).collect(),
        leg2: runs.iter().map(|r| r.leg2.clone()).collect(),
        baseline: runs.iter().map(|r| r.delta).collect(),
        domination_stat,
        semigroup_norm,
        metadata: ReportMetadata {
            period,
            points_per_period: grid.points_per_period(period)?,
            modes: res.modes,
            xi_nodes: res.xi_nodes,
            rule: res.rule.name().to_string(),
            half_width: grid.half_width(),
        },
    })
}

/// `sup_t E_n(t)` over a dense time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub schedule: Vec<usize>,
    pub sup_errors: Vec<f64>,
    pub baseline: Vec<f64>,
    /// Largest real part over the sampled Bloch spectra.
    pub spectral_abscissa: f64,
    pub report: ConvergenceReport,
}

impl UniformityReport {
    pub fn decreasing(&self) -> bool {
        self.sup_errors.windows(2).all(|w| w[1] < w[0])
    }
}

pub fn run_uniformity(
    op: &OperatorSpec,
    g: &LineFunction,
    period: f64,
    schedule: &[usize],
    t_grid: &[f64],
    res: LineResolution,
) -> Result<UniformityReport> {
    let spectral_abscissa = semigroup::spectral_abscissa(op, period, res.modes, NORM_XI_SAMPLES)?;
    let report = run_convergence(op, g, period, schedule, t_grid, res)?;
    Ok(UniformityReport {
        schedule: report.schedule.clone(),
        sup_errors: report.sup_errors(),
        baseline: report.baseline.clone(),
        spectral_abscissa,
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domination {
    pub envelope: LineFunction,
    pub norm: f64,
    /// Envelope norm of the first half of the family.
    pub half_norm: f64,
    pub plausible: bool,
}

/// Pointwise envelope `h = max_n |f_n|`. Domination is flagged plausible when
/// the envelope norm grows by at most 1% from the first half of the family
/// to the whole family.
pub fn check_domination(family: &[LineFunction]) -> Result<Domination> {
    let Some(first) = family.first() else {
        return Err(Error::InvalidInput("empty family".into()));
    };
    for f in family {
        first.check_same(f)?;
    }
    let dx = first.grid().spacing();
    let norm_of = |env: &[f64]| (env.iter().map(|e| e * e).sum::<f64>() * dx).sqrt();
    let all: Vec<&LineFunction> = family.iter().collect();
    let env = envelope_values(&all);
    let norm = norm_of(&env);
    let half = family.len().div_ceil(2);
    let half_norm = norm_of(&envelope_values(&all[..half]));
    let plausible = norm <= 1.01 * half_norm;
    let envelope = LineFunction::new(*first.grid(), 1, env.into_iter().map(|e| e.into()).collect())?;
    Ok(Domination { envelope, norm, half_norm, plausible })
}

/// `G_m = (1/m) Σ_{j<m} g̃_{n_j}` on `target` and its `n_m T`-periodic version.
pub fn banach_saks_average(
    seq: &[PeriodicFunction],
    m: usize,
    target: &LineGrid,
) -> Result<(LineFunction, PeriodicFunction)> {
    if m == 0 || m > seq.len() {
        return Err(Error::InvalidInput(format!("m = {m} outside 1..={}", seq.len())));
    }
    let base = seq[0].grid();
    for g in &seq[1..m] {
        let gr = g.grid();
        if (gr.period() - base.period()).abs() > 1e-12 * base.period()
            || gr.points_per_period() != base.points_per_period()
            || g.dim() != seq[0].dim()
        {
            return Err(Error::GridMismatch("sequence members use different base grids".into()));
        }
    }
    if seq[..m].windows(2).any(|w| w[0].grid().periods() >= w[1].grid().periods()) {
        return Err(Error::NotIncreasing);
    }
    let dim = seq[0].dim();
    let mut acc = vec![num_complex::Complex64::new(0.0, 0.0); dim * target.len()];
    for g in &seq[..m] {
        for (a, v) in acc.iter_mut().zip(zero_extend(g, target)?.values()) {
            *a += v;
        }
    }
    let scale = 1.0 / m as f64;
    let avg = LineFunction::new(*target, dim, acc.into_iter().map(|a| a * scale).collect())?;
    let per = periodize(&avg, seq[m - 1].grid().periods(), base.period())?;
    Ok((avg, per))
}

/// `g_j = periodize(g + sin(q_j x) χ(x), n_j, T)`, a sequence converging
/// weakly but not strongly over a period.
pub fn oscillatory_sequence(
    g: &LineFunction,
    period: f64,
    periods: &[usize],
    frequencies: &[f64],
    envelope: impl Fn(f64) -> f64,
) -> Result<Vec<PeriodicFunction>> {
    if periods.len() != frequencies.len() {
        return Err(Error::InvalidInput("need one frequency per sequence member".into()));
    }
    if g.dim() != 1 {
        return Err(Error::InvalidInput("oscillatory sequences are scalar".into()));
    }
    let pts = g.grid().points();
    periods
        .iter()
        .zip(frequencies)
        .map(|(&n, &q)| {
            let values = g
                .values()
                .iter()
                .zip(&pts)
                .map(|(v, &x)| v + (q * x).sin() * envelope(x))
                .collect();
            periodize(&LineFunction::new(*g.grid(), 1, values)?, n, period)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingReport {
    pub m_values: Vec<usize>,
    /// `n_m` for each `m`.
    pub periods: Vec<usize>,
    /// `‖G_m - g‖`.
    pub strong_errors: Vec<f64>,
    pub times: Vec<f64>,
    /// `‖Ṽ_m(·,t) - v(·,t)‖` indexed `[m][t]`.
    pub evolved_errors: Vec<Vec<f64>>,
}

impl AveragingReport {
    /// `(C, p)` in `‖G_m - g‖ ≈ C m^{-p}`.
    pub fn strong_rate(&self) -> (f64, f64) {
        let xs: Vec<f64> = self.m_values.iter().map(|&m| m as f64).collect();
        fit_power_law(&xs, &self.strong_errors)
    }
}

/// Evolve `G_m^per` on its `n_m T`-periodic domain and compare with `e^{tA} g`.
pub fn run_averaged_convergence(
    op: &OperatorSpec,
    seq: &[PeriodicFunction],
    g: &LineFunction,
    m_schedule: &[usize],
    times: &[f64],
    res: LineResolution,
) -> Result<AveragingReport> {
    validate_times(times)?;
    if m_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::NotIncreasing);
    }
    let period = seq.first().ok_or_else(|| Error::InvalidInput("empty sequence".into()))?.grid().period();
    let grid = *g.grid();
    let v = evolve_line_times(op, g, period, times, res)?;
    let rows: Vec<(usize, f64, Vec<f64>)> = m_schedule
        .par_iter()
        .map(|&m| {
            let (avg, per) = banach_saks_average(seq, m, &grid)?;
            let strong = avg.l2_distance(g)?;
            let evolved = evolve_periodic_times(op, &per, times, res.modes)?
                .iter()
                .zip(&v)
                .map(|(p, vt)| zero_extend(p, &grid)?.l2_distance(vt))
                .collect::<Result<Vec<_>>>()?;
            Ok((per.grid().periods(), strong, evolved))
        })
        .collect::<Result<_>>()?;
    Ok(AveragingReport {
        m_values: m_schedule.to_vec(),
        periods: rows.iter().map(|r| r.0).collect(),
        strong_errors: rows.iter().map(|r| r.1).collect(),
        times: times.to_vec(),
        evolved_errors: rows.into_iter().map(|r| r.2).collect(),
    })
}

/// Least-squares fit of `y ≈ C x^{-p}` in log–log coordinates; returns `(C, p)`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    ((my - slope * mx).exp(), -slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::PeriodicGrid;

    fn bump(x: f64) -> f64 {
        if x.abs() < 1.0 {
            (-1.0 / (1.0 - x * x)).exp()
        } else {
            0.0
        }
    }

    #[test]
    fn schedule_validation() {
        let grid = LineGrid::new(4.0, 0.125).unwrap();
        assert!(matches!(validate_schedule(&[1, 2, 2], &grid, 1.0), Err(Error::NotIncreasing)));
        assert!(matches!(
            validate_schedule(&[1, 16], &grid, 1.0),
            Err(Error::ScheduleExceedsDomain { n: 16, .. })
        ));
        assert!(validate_schedule(&[1, 2, 8], &grid, 1.0).is_ok());
    }

    #[test]
    fn power_law_fit_recovers_exponent() {
        let xs = [4.0, 8.0, 16.0, 32.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        let (c, p) = fit_power_law(&xs, &ys);
        assert!((c - 3.0).abs() < 1e-12 && (p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nested_family_is_dominated() {
        let grid = LineGrid::new(8.0, 0.0625).unwrap();
        let fam: Vec<LineFunction> =
            (1..=8).map(|n| LineFunction::from_real_fn(grid, |x| bump(x) / n as f64)).collect();
        let d = check_domination(&fam).unwrap();
        let b = LineFunction::from_real_fn(grid, bump);
        assert!((d.norm - b.l2_norm()).abs() < 1e-14);
        assert!(d.plausible);
    }

    #[test]
    fn escaping_family_is_not_dominated() {
        let grid = LineGrid::new(20.0, 0.0625).unwrap();
        let fam: Vec<LineFunction> =
            (0..8).map(|n| LineFunction::from_real_fn(grid, |x| bump(x - 2.0 * n as f64))).collect();
        let d = check_domination(&fam).unwrap();
        let single = fam[0].l2_norm();
        assert!((d.norm - single * 8f64.sqrt()).abs() < 1e-12);
        assert!(!d.plausible);
    }

    #[test]
    fn average_of_one_term() {
        let target = LineGrid::new(6.0, 0.25).unwrap();
        let g = PeriodicFunction::from_real_fn(PeriodicGrid::new(1.0, 3, 4).unwrap(), |x| x);
        let (avg, per) = banach_saks_average(&[g.clone()], 1, &target).unwrap();
        assert_eq!(avg, zero_extend(&g, &target).unwrap());
        assert_eq!(per, g);
    }

    #[test]
    fn average_requires_increasing_periods() {
        let target = LineGrid::new(6.0, 0.25).unwrap();
        let a = PeriodicFunction::zeros(PeriodicGrid::new(1.0, 3, 4).unwrap(), 1);
        assert!(matches!(banach_saks_average(&[a.clone(), a], 2, &target), Err(Error::NotIncreasing)));
        let b = PeriodicFunction::zeros(PeriodicGrid::new(1.0, 4, 8).unwrap(), 1);
        let c = PeriodicFunction::zeros(PeriodicGrid::new(1.0, 2, 4).unwrap(), 1);
        assert!(matches!(banach_saks_average(&[c, b], 2, &target), Err(Error::GridMismatch(_))));
    }
}
