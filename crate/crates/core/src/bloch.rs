//! Bloch transforms on the torus (a finite sum over the `n` admissible
//! frequencies) and on the line (a quadrature over the Brillouin interval
//! `[-π/T, π/T)`), their inverses, and numerical checks of the identities
//! that tie the two together.
//!
//! A Bloch slice at frequency `ξ` is the `T`-periodic function
//! `B(f)(ξ, x) = Σ_l e^{2πilx/T} f̂(ξ + 2πl/T)`, stored as `M` samples on
//! `[0, T)`. Fourier transforms are unnormalized, `f̂(k) = ∫ e^{-ikx} f(x) dx`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fourier;
use crate::grids::{self, LineFunction, LineGrid, PeriodicFunction, PeriodicGrid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// ξ-quadrature for line transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    /// Equal weights on the `n`-point lattice `2πp/(nT)`, which is exactly
    /// the torus frequency set for `n` periods.
    Midpoint,
    /// `n + 1` equispaced nodes including both endpoints, half weights at the ends.
    Trapezoid,
    /// Gauss–Legendre on `[-π/T, π/T]`.
    Gauss,
}

impl std::str::FromStr for QuadratureRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(Self::Midpoint),
            "trapezoid" => Ok(Self::Trapezoid),
            "gauss" => Ok(Self::Gauss),
            other => Err(Error::InvalidInput(format!("unknown quadrature rule {other:?}"))),
        }
    }
}

impl QuadratureRule {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Midpoint => "midpoint",
            Self::Trapezoid => "trapezoid",
            Self::Gauss => "gauss",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    /// Transform of an `nT`-periodic function; frequencies are exactly Ω_n.
    Torus { periods: usize },
    /// Transform of a line function sampled on `grid`.
    Line { rule: QuadratureRule, grid: LineGrid },
}

/// A map `ξ ↦ T`-periodic slice, on a finite set of frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochFamily {
    period: f64,
    points_per_period: usize,
    dim: usize,
    kind: FamilyKind,
    xi: Vec<f64>,
    weights: Vec<f64>,
    /// `slices[i]` holds `dim * M` samples, component-major.
    slices: Vec<Vec<Complex64>>,
    /// Truncation bound on `|l|` used when the slices were built.
    l_max: usize,
}

impl BlochFamily {
    pub fn new(
        period: f64,
        points_per_period: usize,
        dim: usize,
        kind: FamilyKind,
        xi: Vec<f64>,
        weights: Vec<f64>,
        slices: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        if xi.len() != weights.len() || xi.len() != slices.len() {
            return Err(Error::MalformedFamily(format!(
                "{} frequencies, {} weights, {} slices",
                xi.len(),
                weights.len(),
                slices.len()
            )));
        }
        if let Some(bad) = slices.iter().find(|s| s.len() != dim * points_per_period) {
            return Err(Error::MalformedFamily(format!(
                "slice has {} samples, expected {}",
                bad.len(),
                dim * points_per_period
            )));
        }
        Ok(Self {
            period,
            points_per_period,
            dim,
            kind,
            xi,
            weights,
            slices,
            l_max: points_per_period / 2,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn points_per_period(&self) -> usize {
        self.points_per_period
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn slices(&self) -> &[Vec<Complex64>] {
        &self.slices
    }

    pub fn slice(&self, i: usize) -> &[Complex64] {
        &self.slices[i]
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    /// Replace the slices, keeping frequencies and weights.
    pub fn with_slices(&self, slices: Vec<Vec<Complex64>>) -> Result<Self> {
        Self::new(
            self.period,
            self.points_per_period,
            self.dim,
            self.kind.clone(),
            self.xi.clone(),
            self.weights.clone(),
            slices,
        )
    }

    /// Fourier coefficients `c_l = f̂(ξ_i + 2πl/T)` of slice `i`,
    /// component-major, mode `l` stored at bin `l mod M`.
    pub fn slice_coefficients(&self, i: usize) -> Vec<Complex64> {
        slice_to_coefficients(&self.slices[i], self.dim, self.points_per_period)
    }

    /// Evaluate slice `i`, component `c`, at an arbitrary `x` by trigonometric
    /// interpolation over modes `l ∈ [-M/2, M/2)`.
    pub fn eval(&self, i: usize, c: usize, x: f64) -> Complex64 {
        let m = self.points_per_period;
        let coeffs = self.slice_coefficients(i);
        (0..m)
            .map(|r| {
                let l = fourier::signed_index(r, m) as f64;
                coeffs[c * m + r] * Complex64::from_polar(1.0, 2.0 * PI * l * x / self.period)
            })
            .sum()
    }

    /// `‖B(ξ_i, ·)‖_{L²(0,T)}`.
    pub fn slice_norm(&self, i: usize) -> f64 {
        let dx = self.period / self.points_per_period as f64;
        (self.slices[i].iter().map(|v| v.norm_sqr()).sum::<f64>() * dx).sqrt()
    }
}

pub(crate) fn slice_to_coefficients(slice: &[Complex64], dim: usize, m: usize) -> Vec<Complex64> {
    let scale = 1.0 / m as f64;
    let mut out = Vec::with_capacity(dim * m);
    for c in 0..dim {
        out.extend(fourier::forward(&slice[c * m..(c + 1) * m]).into_iter().map(|v| v * scale));
    }
    out
}

pub(crate) fn coefficients_to_slice(coeffs: &[Complex64], dim: usize, m: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(dim * m);
    for c in 0..dim {
        out.extend(fourier::inverse(&coeffs[c * m..(c + 1) * m]));
    }
    out
}

/// Ω_n = {ξ ∈ [-π/T, π/T) : e^{iξnT} = 1}, in increasing order.
pub fn omega(periods: usize, period: f64) -> Vec<f64> {
    let n = periods as i64;
    let first = -(n / 2);
    (0..n).map(|j| 2.0 * PI * (first + j) as f64 / (n as f64 * period)).collect()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Nodes and weights for `∫_{-π/T}^{π/T} · dξ`.
pub fn xi_quadrature(rule: QuadratureRule, nodes: usize, period: f64) -> (Vec<f64>, Vec<f64>) {
    let width = 2.0 * PI / period;
    match rule {
        QuadratureRule::Midpoint => {
            let xi = omega(nodes, period);
            let w = vec![width / nodes as f64; nodes];
            (xi, w)
        }
        QuadratureRule::Trapezoid => {
            let h = width / nodes as f64;
            let xi: Vec<f64> = (0..=nodes).map(|i| -PI / period + i as f64 * h).collect();
            let mut w = vec![h; nodes + 1];
            w[0] *= 0.5;
            w[nodes] *= 0.5;
            (xi, w)
        }
        QuadratureRule::Gauss => {
            let (x, w) = gauss_legendre(nodes);
            let half = 0.5 * width;
            (x.iter().map(|x| x * half).collect(), w.iter().map(|w| w * half).collect())
        }
    }
}

/// Torus Bloch transform over Ω_n.
pub fn bloch_torus(g: &PeriodicFunction) -> BlochFamily {
    let grid = g.grid();
    let (n, m) = (grid.periods(), grid.points_per_period());
    let total = grid.len();
    let dx = grid.spacing();
    let xi = omega(n, grid.period());
    let first = -((n as i64) / 2);

    let hats: Vec<Vec<Complex64>> =
        (0..g.dim()).map(|c| fourier::forward(g.component(c))).collect();

    let slices = (0..n)
        .map(|p_idx| {
            let p = first + p_idx as i64;
            let mut coeffs = vec![ZERO; g.dim() * m];
            for (c, hat) in hats.iter().enumerate() {
                for r in 0..m {
                    let l = fourier::signed_index(r, m);
                    let q = p + n as i64 * l;
                    // f̂(2πq/(nT)) = dx e^{iπq} FFT[q]; x_0 = -nT/2.
                    let sign = if q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    coeffs[c * m + r] = hat[fourier::bin(q, total)] * (dx * sign);
                }
            }
            coefficients_to_slice(&coeffs, g.dim(), m)
        })
        .collect();

    let weights = vec![2.0 * PI / grid.length(); n];
    BlochFamily {
        period: grid.period(),
        points_per_period: m,
        dim: g.dim(),
        kind: FamilyKind::Torus { periods: n },
        xi,
        weights,
        slices,
        l_max: m / 2,
    }
}

/// Inverse of [`bloch_torus`]: `g(x) = (1/2π) Σ_{ξ∈Ω_n} e^{iξx} B_T(g)(ξ, x) Δξ`.
pub fn inverse_bloch_torus(family: &BlochFamily) -> Result<PeriodicFunction> {
    let FamilyKind::Torus { periods: n } = family.kind else {
        return Err(Error::MalformedFamily("expected a torus family".into()));
    };
    let expected = omega(n, family.period);
    let tol = 1e-12 * PI / family.period;
    if family.xi.len() != n || family.xi.iter().zip(&expected).any(|(a, b)| (a - b).abs() > tol) {
        return Err(Error::MalformedFamily(format!("frequencies are not Ω_{n}")));
    }
    let m = family.points_per_period;
    let grid = PeriodicGrid::new(family.period, n, m)?;
    let total = grid.len();
    let dx = grid.spacing();
    let first = -((n as i64) / 2);
    let dim = family.dim;

    let mut hats = vec![vec![ZERO; total]; dim];
    for p_idx in 0..n {
        let p = first + p_idx as i64;
        let coeffs = family.slice_coefficients(p_idx);
        for (c, hat) in hats.iter_mut().enumerate() {
            for r in 0..m {
                let q = p + n as i64 * fourier::signed_index(r, m);
                let sign = if q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                hat[fourier::bin(q, total)] = coeffs[c * m + r] * (sign / dx);
            }
        }
    }
    let scale = 1.0 / total as f64;
    let mut values = Vec::with_capacity(dim * total);
    for hat in &hats {
        values.extend(fourier::inverse(hat).into_iter().map(|v| v * scale));
    }
    PeriodicFunction::new(grid, dim, values)
}

/// Coefficients `f̂(ξ + 2πl/T)` for `l ∈ [-M/2, M/2)`, zeroed for `|l| > l_max`.
/// Folding the samples modulo one period turns the `l`-sweep into a single
/// length-`M` FFT.
pub(crate) fn line_coefficients(
    f: &LineFunction,
    m: usize,
    period: f64,
    xi: f64,
    l_max: usize,
) -> Vec<Complex64> {
    let grid = f.grid();
    let dx = grid.spacing();
    let x0 = -grid.half_width();
    let mut out = Vec::with_capacity(f.dim() * m);
    // e^{-iξ x_j} = e^{-iξ x_0} (e^{-iξ dx})^j, recomputed periodically to bound drift.
    let step = Complex64::from_polar(1.0, -xi * dx);
    for c in 0..f.dim() {
        let vals = f.component(c);
        let mut folded = vec![ZERO; m];
        let mut phase = Complex64::from_polar(1.0, -xi * x0);
        for (j, v) in vals.iter().enumerate() {
            if j % 64 == 0 {
                phase = Complex64::from_polar(1.0, -xi * grid.point(j));
            }
            folded[j % m] += v * phase;
            phase *= step;
        }
        let hat = fourier::forward(&folded);
        for (r, h) in hat.into_iter().enumerate() {
            let l = fourier::signed_index(r, m);
            if l.unsigned_abs() as usize > l_max {
                out.push(ZERO);
            } else {
                let shift = Complex64::from_polar(dx, 2.0 * PI * l as f64 * grid.half_width() / period);
                out.push(h * shift);
            }
        }
    }
    out
}

/// One line Bloch slice `B(f)(ξ, ·)` sampled on `[0, T)`.
pub fn line_slice(f: &LineFunction, period: f64, xi: f64, l_max: usize) -> Result<Vec<Complex64>> {
    let m = f.grid().points_per_period(period)?;
    let coeffs = line_coefficients(f, m, period, xi, l_max);
    Ok(coefficients_to_slice(&coeffs, f.dim(), m))
}

/// Line Bloch transform on an `xi_nodes`-point quadrature of the Brillouin interval.
/// The `l`-sum keeps `|l| ≤ l_max` (default `M/2`).
pub fn bloch_line(
    f: &LineFunction,
    period: f64,
    xi_nodes: usize,
    rule: QuadratureRule,
    l_max: Option<usize>,
) -> Result<BlochFamily> {
    if xi_nodes == 0 {
        return Err(Error::InvalidInput("need at least one ξ node".into()));
    }
    let m = f.grid().points_per_period(period)?;
    if m % 2 != 0 {
        return Err(Error::IncompatibleSpacing(format!("period holds odd sample count {m}")));
    }
    let l_max = l_max.unwrap_or(m / 2);
    let (xi, weights) = xi_quadrature(rule, xi_nodes, period);
    let slices = xi
        .par_iter()
        .map(|&x| coefficients_to_slice(&line_coefficients(f, m, period, x, l_max), f.dim(), m))
        .collect();
    Ok(BlochFamily {
        period,
        points_per_period: m,
        dim: f.dim(),
        kind: FamilyKind::Line { rule, grid: *f.grid() },
        xi,
        weights,
        slices,
        l_max,
    })
}

/// `f(x) = (1/2π) ∫ e^{iξx} B(f)(ξ, x) dξ` by the family's quadrature,
/// evaluated on the family's line grid.
pub fn inverse_bloch_line(family: &BlochFamily) -> Result<LineFunction> {
    let FamilyKind::Line { grid, .. } = family.kind else {
        return Err(Error::MalformedFamily("expected a line family".into()));
    };
    inverse_bloch_line_on(family, &grid)
}

/// Same as [`inverse_bloch_line`] but on an explicit target grid with spacing `T/M`.
pub fn inverse_bloch_line_on(family: &BlochFamily, grid: &LineGrid) -> Result<LineFunction> {
    let m = family.points_per_period;
    if grid.points_per_period(family.period)? != m {
        return Err(Error::GridMismatch("target spacing differs from family spacing T/M".into()));
    }
    let half = (grid.half_width() / grid.spacing()).round() as i64;
    let len = grid.len();
    let dim = family.dim;
    let dx = grid.spacing();
    let x0 = -grid.half_width();

    let mut values = vec![ZERO; dim * len];
    let chunk = 256;
    values
        .par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(ci, out)| {
            for (local, v) in out.iter_mut().enumerate() {
                let idx = ci * chunk + local;
                let (c, j) = (idx / len, idx % len);
                let x = x0 + j as f64 * dx;
                let slot = c * m + (j as i64 - half).rem_euclid(m as i64) as usize;
                let mut acc = ZERO;
                for ((xi, w), slice) in family.xi.iter().zip(&family.weights).zip(&family.slices) {
                    acc += Complex64::from_polar(*w, xi * x) * slice[slot];
                }
                *v = acc / (2.0 * PI);
            }
        });
    LineFunction::new(*grid, dim, values)
}

/// Discrepancy between the torus transform of `g_n` and the line transform
/// of its zero extension on Ω_n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochDiscrepancy {
    /// `max_ξ ‖B_T(g_n)(ξ,·) - B(g̃_n)(ξ,·)‖_{L²(0,T)}`.
    pub max_abs: f64,
    /// `max_abs` divided by the largest slice norm (0 when the data vanish).
    pub relative: f64,
}

pub fn check_blochs_equal(g: &PeriodicFunction, line_target: &LineGrid) -> Result<BlochDiscrepancy> {
    let extended = grids::zero_extend(g, line_target)?;
    let torus = bloch_torus(g);
    let m = g.grid().points_per_period();
    let dx = g.grid().spacing();
    let mut max_abs: f64 = 0.0;
    let mut max_norm: f64 = 0.0;
    for (i, &xi) in torus.xi.iter().enumerate() {
        let line = coefficients_to_slice(
            &line_coefficients(&extended, m, g.grid().period(), xi, m / 2),
            g.dim(),
            m,
        );
        let diff: f64 =
            torus.slices[i].iter().zip(&line).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * dx;
        max_abs = max_abs.max(diff.sqrt());
        max_norm = max_norm.max(torus.slice_norm(i));
    }
    let relative = if max_norm > 0.0 { max_abs / max_norm } else { 0.0 };
    Ok(BlochDiscrepancy { max_abs, relative })
}

/// Ingredients of the uniform bound
/// `|B(f)(ξ,x)| ≤ ‖f̂‖_∞ + ‖f‖_{H^{s+1}} (Σ_{l≥1} |(2l-1)π/T|^{-s} + Σ_{l≤-1} |(2l+1)π/T|^{-s})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochBound {
    pub sup_bound: f64,
    pub l_infty_fhat: f64,
    pub hs1_norm: f64,
    pub tail_constant: f64,
}

/// `Σ_{l≥1} |(2l-1)π/T|^{-s} + Σ_{l≤-1} |(2l+1)π/T|^{-s}`: `l_max` terms of each
/// sum plus the midpoint-integral remainder `∫_{L+1/2}^∞`, which dominates the
/// tail of a convex summand.
pub fn tail_constant(period: f64, s: f64, l_max: usize) -> f64 {
    let scale = (period / PI).powf(s);
    let head: f64 = (1..=l_max).map(|l| ((2 * l - 1) as f64).powf(-s)).sum();
    let remainder = (2.0 * l_max as f64).powf(1.0 - s) / (2.0 * (s - 1.0));
    2.0 * scale * (head + remainder)
}

/// `max_k |f̂(k)|` over the DFT frequencies of the line box (Euclidean over components).
pub fn fourier_sup(f: &LineFunction) -> f64 {
    let len = f.grid().len();
    let dx = f.grid().spacing();
    let hats: Vec<Vec<Complex64>> = (0..f.dim()).map(|c| fourier::forward(f.component(c))).collect();
    (0..len)
        .map(|r| hats.iter().map(|h| h[r].norm_sqr()).sum::<f64>().sqrt() * dx)
        .fold(0.0, f64::max)
}

pub fn bloch_sup_bound(f: &LineFunction, period: f64, s: f64, l_max: usize) -> Result<BlochBound> {
    if s <= 2.0 || !s.is_finite() {
        return Err(Error::HypothesisViolation(format!("Sobolev index must exceed 2, got {s}")));
    }
    if l_max == 0 {
        return Err(Error::InvalidInput("l_max must be positive".into()));
    }
    let l_infty_fhat = fourier_sup(f);
    let hs1_norm = grids::norms_line(f, s + 1.0).hs;
    let tail = tail_constant(period, s, l_max);
    Ok(BlochBound { sup_bound: l_infty_fhat + hs1_norm * tail, l_infty_fhat, hs1_norm, tail_constant: tail })
}

/// `max |B(f)(ξ,x)|` over `n_xi` equispaced `ξ ∈ [-π/T, π/T)` and `n_x`
/// equispaced `x ∈ [0, T)`, with slices evaluated by trigonometric interpolation.
pub fn sampled_bloch_modulus(f: &LineFunction, period: f64, n_xi: usize, n_x: usize) -> Result<f64> {
    let m = f.grid().points_per_period(period)?;
    let xs: Vec<f64> = (0..n_x).map(|j| j as f64 * period / n_x as f64).collect();
    let sup = (0..n_xi)
        .into_par_iter()
        .map(|i| {
            let xi = -PI / period + 2.0 * PI * i as f64 / (n_xi as f64 * period);
            let coeffs = line_coefficients(f, m, period, xi, m / 2);
            let mut best: f64 = 0.0;
            for &x in &xs {
                let mut mag = 0.0;
                for c in 0..f.dim() {
                    let v: Complex64 = (0..m)
                        .map(|r| {
                            let l = fourier::signed_index(r, m) as f64;
                            coeffs[c * m + r] * Complex64::from_polar(1.0, 2.0 * PI * l * x / period)
                        })
                        .sum();
                    mag += v.norm_sqr();
                }
                best = best.max(mag.sqrt());
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(sup)
}

/// The ξ-integrated squared Bloch discrepancy and its Parseval counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochContinuity {
    /// `∫ ‖B(f_k)(ξ,·) - B(f)(ξ,·)‖²_{L²(0,T)} dξ`.
    pub aggregated: f64,
    /// `2πT ‖f_k - f‖²_{L²}`.
    pub parseval: f64,
}

/// For each `f_k`, the ξ-integrated squared Bloch discrepancy against `f`.
/// Uses the equal-weight rule with enough nodes (`N_ξ T ≥ 2X`) to be exact
/// on the discrete data.
pub fn check_bloch_l2_continuity(
    f_seq: &[LineFunction],
    f: &LineFunction,
    period: f64,
) -> Result<Vec<BlochContinuity>> {
    let m = f.grid().points_per_period(period)?;
    let nodes = ((2.0 * f.grid().half_width() / period) - 1e-9).ceil().max(1.0) as usize;
    let (xi, w) = xi_quadrature(QuadratureRule::Midpoint, nodes, period);
    let dx = f.grid().spacing();
    f_seq
        .iter()
        .map(|fk| {
            let diff = fk.sub(f)?;
            let aggregated: f64 = xi
                .par_iter()
                .zip(&w)
                .map(|(&x, &wt)| {
                    let slice =
                        coefficients_to_slice(&line_coefficients(&diff, m, period, x, m / 2), f.dim(), m);
                    wt * slice.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx
                })
                .sum();
            let l2 = diff.l2_norm();
            Ok(BlochContinuity { aggregated, parseval: 2.0 * PI * period * l2 * l2 })
        })
        .collect()
}
