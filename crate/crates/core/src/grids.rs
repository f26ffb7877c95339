//! Sampled functions on `nT`-periodic domains and on a truncated real line,
//! the zero-extension embedding between them, periodization, and the
//! L¹ / L² / Hˢ norms.
//!
//! Both domains use uniform collocation with the rectangle (periodic
//! trapezoid) rule, so the discrete sums of a periodic function and of its
//! zero extension are literally the same numbers.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier;

/// Default Sobolev index: the smallest integer above 2.
pub const DEFAULT_SOBOLEV_INDEX: f64 = 3.0;

const ALIGN_TOL: f64 = 1e-9;

/// Uniform grid over one full period `[-nT/2, nT/2)` of an `nT`-periodic function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    period: f64,
    periods: usize,
    points_per_period: usize,
}

impl PeriodicGrid {
    pub fn new(period: f64, periods: usize, points_per_period: usize) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidInput(format!("period must be positive, got {period}")));
        }
        if periods == 0 {
            return Err(Error::InvalidInput("number of periods must be >= 1".into()));
        }
        if points_per_period == 0 || points_per_period % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "points per period must be a positive even integer, got {points_per_period}"
            )));
        }
        Ok(Self { period, periods, points_per_period })
    }

    /// Base period `T`.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// Number of base periods `n`.
    pub fn periods(&self) -> usize {
        self.periods
    }

    /// Samples per base period `M`.
    pub fn points_per_period(&self) -> usize {
        self.points_per_period
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.points_per_period as f64
    }

    /// Total sample count `nM`.
    pub fn len(&self) -> usize {
        self.periods * self.points_per_period
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Length of the full domain, `nT`.
    pub fn length(&self) -> f64 {
        self.periods as f64 * self.period
    }

    pub fn left(&self) -> f64 {
        -0.5 * self.length()
    }

    pub fn point(&self, j: usize) -> f64 {
        self.left() + j as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.point(j)).collect()
    }

    /// Same base period and resolution, different `n`.
    pub fn with_periods(&self, periods: usize) -> Result<Self> {
        Self::new(self.period, periods, self.points_per_period)
    }
}

/// Uniform grid `x_j = -X + j dx`, `j = 0..2X/dx`, on the truncated line `[-X, X)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineGrid {
    half_width: f64,
    spacing: f64,
    len: usize,
}

impl LineGrid {
    /// `2X/dx` must be an even integer.
    pub fn new(half_width: f64, spacing: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0 && spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidInput(format!(
                "line grid needs positive half-width and spacing, got X = {half_width}, dx = {spacing}"
            )));
        }
        let ratio = 2.0 * half_width / spacing;
        let count = ratio.round();
        if (ratio - count).abs() > ALIGN_TOL * ratio.max(1.0) || count as usize % 2 != 0 {
            return Err(Error::IncompatibleSpacing(format!(
                "2X/dx = {ratio} is not an even integer"
            )));
        }
        Ok(Self { half_width, spacing, len: count as usize })
    }

    /// Line grid with the spacing `T/M` of `base` that covers at least `half_width`.
    pub fn covering(base: &PeriodicGrid, half_width: f64) -> Result<Self> {
        let dx = base.spacing();
        let half_count = (half_width / dx - ALIGN_TOL).ceil().max(1.0);
        Self::new(half_count * dx, dx)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn point(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|j| self.point(j)).collect()
    }

    /// Samples per base period `T`, if `T` is an integer multiple of the spacing.
    pub fn points_per_period(&self, period: f64) -> Result<usize> {
        let ratio = period / self.spacing;
        let m = ratio.round();
        if m < 1.0 || (ratio - m).abs() > ALIGN_TOL * ratio.max(1.0) {
            return Err(Error::IncompatibleSpacing(format!(
                "period {period} is not a multiple of spacing {}",
                self.spacing
            )));
        }
        Ok(m as usize)
    }

    fn same_as(&self, other: &LineGrid) -> bool {
        self.len == other.len
            && (self.spacing - other.spacing).abs() <= 1e-12 * self.spacing
            && (self.half_width - other.half_width).abs() <= 1e-12 * self.half_width
    }
}

/// Samples of an `nT`-periodic, possibly vector-valued function.
/// Values are stored component-major: component `c` occupies `values[c*N..(c+1)*N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicFunction {
    grid: PeriodicGrid,
    dim: usize,
    values: Vec<Complex64>,
}

impl PeriodicFunction {
    pub fn new(grid: PeriodicGrid, dim: usize, values: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || values.len() != dim * grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} values for dim {dim}, got {}",
                dim * grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: PeriodicGrid, dim: usize) -> Self {
        Self { grid, dim, values: vec![Complex64::new(0.0, 0.0); dim * grid.len()] }
    }

    /// Scalar function sampled from `f`.
    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.points().into_iter().map(f).collect();
        Self { grid, dim: 1, values }
    }

    /// Real scalar function sampled from `f`.
    pub fn from_real_fn(grid: PeriodicGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self { values: self.values.iter().map(|v| v * a).collect(), ..self.clone() }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { values, ..self.clone() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { values, ..self.clone() })
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(Error::GridMismatch("periodic functions live on different grids".into()));
        }
        Ok(())
    }
}

/// Samples of a localized function on `[-X, X)`, implicitly zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFunction {
    grid: LineGrid,
    dim: usize,
    values: Vec<Complex64>,
}

impl LineFunction {
    pub fn new(grid: LineGrid, dim: usize, values: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || values.len() != dim * grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} values for dim {dim}, got {}",
                dim * grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: LineGrid, dim: usize) -> Self {
        Self { grid, dim, values: vec![Complex64::new(0.0, 0.0); dim * grid.len()] }
    }

    pub fn from_fn(grid: LineGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.points().into_iter().map(f).collect();
        Self { grid, dim: 1, values }
    }

    pub fn from_real_fn(grid: LineGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &LineGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self { values: self.values.iter().map(|v| v * a).collect(), ..self.clone() }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { values, ..self.clone() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { values, ..self.clone() })
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        if !self.grid.same_as(&other.grid) || self.dim != other.dim {
            return Err(Error::GridMismatch("line functions live on different grids".into()));
        }
        Ok(())
    }

    /// Plain L² norm, the quantity every convergence table reports.
    pub fn l2_norm(&self) -> f64 {
        l2(&self.values, self.grid.spacing)
    }

    /// `‖self - other‖_{L²}` on a common grid.
    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        let sq: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((sq * self.grid.spacing).sqrt())
    }
}

/// L¹, L² and Hˢ norms of one function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormTriple {
    pub l1: f64,
    pub l2: f64,
    pub hs: f64,
    pub s: f64,
}

/// Which norm a convergence check is judged in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L1,
    L2,
    Hs(f64),
}

/// Offset (in samples) of the periodic window `[-nT/2, nT/2)` inside a line grid.
fn window_offset(line: &LineGrid, grid: &PeriodicGrid) -> Result<usize> {
    let needed = 0.5 * grid.length();
    if line.half_width < needed * (1.0 - 1e-12) {
        return Err(Error::DomainTooSmall { needed, available: line.half_width });
    }
    let dx = grid.spacing();
    if (line.spacing - dx).abs() > 1e-12 * dx {
        return Err(Error::IncompatibleSpacing(format!(
            "line spacing {} differs from periodic spacing {dx}",
            line.spacing
        )));
    }
    let shift = (line.half_width - needed) / dx;
    let offset = shift.round();
    if (shift - offset).abs() > ALIGN_TOL * shift.max(1.0) {
        return Err(Error::IncompatibleSpacing(format!(
            "periodic window is not aligned with line grid (offset {shift} samples)"
        )));
    }
    Ok(offset as usize)
}

/// The tilde embedding: `g` on `[-nT/2, nT/2)`, zero elsewhere on `target`.
pub fn zero_extend(g: &PeriodicFunction, target: &LineGrid) -> Result<LineFunction> {
    let offset = window_offset(target, &g.grid)?;
    let n = g.grid.len();
    let mut out = LineFunction::zeros(*target, g.dim);
    let len = target.len();
    for c in 0..g.dim {
        out.values[c * len + offset..c * len + offset + n].copy_from_slice(g.component(c));
    }
    Ok(out)
}

/// The `nT`-periodic function agreeing with `f` on `[-nT/2, nT/2)`.
pub fn periodize(f: &LineFunction, n: usize, period: f64) -> Result<PeriodicFunction> {
    let m = f.grid.points_per_period(period)?;
    if m % 2 != 0 {
        return Err(Error::IncompatibleSpacing(format!(
            "period {period} holds an odd number ({m}) of samples"
        )));
    }
    let grid = PeriodicGrid::new(period, n, m)?;
    let offset = window_offset(&f.grid, &grid)?;
    let len = f.grid.len();
    let mut values = Vec::with_capacity(f.dim * grid.len());
    for c in 0..f.dim {
        values.extend_from_slice(&f.values[c * len + offset..c * len + offset + grid.len()]);
    }
    PeriodicFunction::new(grid, f.dim, values)
}

fn l1(values: &[Complex64], dim: usize, dx: f64) -> f64 {
    let n = values.len() / dim;
    (0..n)
        .map(|j| (0..dim).map(|c| values[c * n + j].norm_sqr()).sum::<f64>().sqrt())
        .sum::<f64>()
        * dx
}

fn l2(values: &[Complex64], dx: f64) -> f64 {
    (values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx).sqrt()
}

/// `‖(1+k²)^{s/2} f̂‖` normalized so that s = 0 reproduces the L² norm.
pub(crate) fn sobolev(values: &[Complex64], dim: usize, dx: f64, s: f64) -> f64 {
    let n = values.len() / dim;
    let length = n as f64 * dx;
    let mut acc = 0.0;
    for c in 0..dim {
        let hat = fourier::forward(&values[c * n..(c + 1) * n]);
        for (r, h) in hat.iter().enumerate() {
            let k = 2.0 * PI * fourier::signed_index(r, n) as f64 / length;
            acc += (1.0 + k * k).powf(s) * h.norm_sqr();
        }
    }
    (acc * dx / n as f64).sqrt()
}

fn triple(values: &[Complex64], dim: usize, dx: f64, s: f64) -> NormTriple {
    NormTriple { l1: l1(values, dim, dx), l2: l2(values, dx), hs: sobolev(values, dim, dx, s), s }
}

/// Norms over one full period `[-nT/2, nT/2)`.
pub fn norms_periodic(g: &PeriodicFunction, s: f64) -> NormTriple {
    triple(&g.values, g.dim, g.grid.spacing(), s)
}

/// Norms on the truncated line; Hˢ uses the DFT of the box `[-X, X)`.
pub fn norms_line(f: &LineFunction, s: f64) -> NormTriple {
    triple(&f.values, f.dim, f.grid.spacing, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormConvergenceRow {
    pub k: usize,
    pub n: usize,
    pub delta_l1: f64,
    pub delta_l2: f64,
    pub delta_hs: f64,
}

/// `δ_k = ‖g̃_{n_k} - g‖` for a sequence of periodic data against a line limit.
#[derive(Debug, Clone, PartialEq)]
pub struct NormConvergence {
    pub rows: Vec<NormConvergenceRow>,
    pub norm: NormKind,
    pub converging: bool,
}

impl NormConvergence {
    pub fn deltas(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match self.norm {
                NormKind::L1 => r.delta_l1,
                NormKind::L2 => r.delta_l2,
                NormKind::Hs(_) => r.delta_hs,
            })
            .collect()
    }

    /// CSV columns `k, n_k, delta_L1, delta_L2, delta_Hs`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "n_k", "delta_L1", "delta_L2", "delta_Hs"])?;
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                r.n.to_string(),
                format!("{:e}", r.delta_l1),
                format!("{:e}", r.delta_l2),
                format!("{:e}", r.delta_hs),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// True when the tail half of `deltas` is non-increasing and each step either
/// strictly decreases or sits below `floor`.
pub(crate) fn tail_decreasing(deltas: &[f64], floor: f64) -> bool {
    if deltas.len() < 2 {
        return true;
    }
    let start = (deltas.len() - 1) / 2;
    deltas[start..]
        .windows(2)
        .all(|w| w[1] < w[0] || (w[1] <= floor && w[0] <= floor))
}

pub fn check_norm_convergence(
    seq: &[PeriodicFunction],
    limit: &LineFunction,
    norm: NormKind,
) -> Result<NormConvergence> {
    if seq.windows(2).any(|w| w[1].grid.periods() <= w[0].grid.periods()) {
        return Err(Error::NotIncreasing);
    }
    let s = match norm {
        NormKind::Hs(s) => s,
        _ => DEFAULT_SOBOLEV_INDEX,
    };
    let mut rows = Vec::with_capacity(seq.len());
    for (k, g) in seq.iter().enumerate() {
        let diff = zero_extend(g, &limit.grid)?.sub(limit)?;
        let t = norms_line(&diff, s);
        rows.push(NormConvergenceRow {
            k,
            n: g.grid.periods(),
            delta_l1: t.l1,
            delta_l2: t.l2,
            delta_hs: t.hs,
        });
    }
    let mut report = NormConvergence { rows, norm, converging: false };
    let scale = norms_line(limit, s);
    let floor = 1e-14
        * match norm {
            NormKind::L1 => scale.l1,
            NormKind::L2 => scale.l2,
            NormKind::Hs(_) => scale.hs,
        }
        .max(f64::MIN_POSITIVE);
    report.converging = tail_decreasing(&report.deltas(), floor);
    Ok(report)
}
