//! Linear operators `A = p(∂ₓ) + V(x)` with a polynomial symbol and a
//! `T`-periodic matrix coefficient, their Bloch blocks
//! `A_ξ = M_ξ⁻¹ A M_ξ` on a truncated Fourier basis, and the semigroup
//! `e^{tA}` on periodic and line data through the Bloch representations
//!
//! ```text
//! v_n(x,t) = (1/2π) Σ_{ξ∈Ω_n} e^{iξx} e^{tA_ξ} B_T(g_n)(ξ,x) Δξ
//! v(x,t)   = (1/2π) ∫ e^{iξx} e^{tA_ξ} B(g)(ξ,x) dξ
//! ```
//!
//! The same [`OperatorSpec`] acts on `L²_per(0,nT)` for every `n` and on `L²(ℝ)`.

mod expm;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

pub use expm::expm;

use crate::bloch::{self, BlochFamily, QuadratureRule};
use crate::error::{Error, Result};
use crate::fourier;
use crate::grids::{LineFunction, PeriodicFunction};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default number of Fourier modes on each side of a Bloch block.
pub const DEFAULT_MODES: usize = 32;

/// A `T`-periodic `d×d` matrix function sampled at `M` points of `[0, T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicCoefficient {
    period: f64,
    samples: Vec<DMatrix<Complex64>>,
    /// Fourier coefficients `V̂(m)` at bin `m mod M`.
    modes: Vec<DMatrix<Complex64>>,
}

impl PeriodicCoefficient {
    pub fn new(period: f64, samples: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidInput(format!("coefficient period must be positive, got {period}")));
        }
        let Some(first) = samples.first() else {
            return Err(Error::InvalidInput("coefficient needs at least one sample".into()));
        };
        let d = first.nrows();
        if samples.iter().any(|s| s.nrows() != d || s.ncols() != d) {
            return Err(Error::InvalidInput("coefficient samples must be square and equal-sized".into()));
        }
        if samples.iter().flat_map(|s| s.iter()).any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("periodic coefficient".into()));
        }
        let m = samples.len();
        let mut modes = vec![DMatrix::zeros(d, d); m];
        for i in 0..d {
            for j in 0..d {
                let series: Vec<Complex64> = samples.iter().map(|s| s[(i, j)]).collect();
                for (r, h) in fourier::forward(&series).into_iter().enumerate() {
                    modes[r][(i, j)] = h / m as f64;
                }
            }
        }
        Ok(Self { period, samples, modes })
    }

    /// Scalar coefficient `v(x)` times the identity.
    pub fn scalar(period: f64, m: usize, v: impl Fn(f64) -> Complex64) -> Result<Self> {
        let samples = (0..m)
            .map(|j| DMatrix::from_element(1, 1, v(j as f64 * period / m as f64)))
            .collect();
        Self::new(period, samples)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.samples[0].nrows()
    }

    pub fn points(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[DMatrix<Complex64>] {
        &self.samples
    }

    /// `V̂(m)` with `V(x) = Σ_m V̂(m) e^{2πimx/T}`; the Nyquist mode is split
    /// evenly between `±M/2` and higher modes vanish.
    pub fn fourier_mode(&self, m: i64) -> DMatrix<Complex64> {
        let n = self.samples.len() as i64;
        let d = self.dim();
        if n % 2 == 0 && m.abs() == n / 2 {
            &self.modes[fourier::bin(n / 2, n as usize)] * Complex64::new(0.5, 0.0)
        } else if 2 * m.abs() < n {
            self.modes[fourier::bin(m, n as usize)].clone()
        } else {
            DMatrix::zeros(d, d)
        }
    }
}

/// `A = Σ_j C_j ∂ₓ^j + V(x)·`, i.e. symbol `p(k) = Σ_j C_j (ik)^j` plus an
/// optional periodic multiplication.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    dim: usize,
    symbol: Vec<DMatrix<Complex64>>,
    coeff: Option<PeriodicCoefficient>,
}

impl OperatorSpec {
    pub fn new(
        dim: usize,
        symbol: Vec<DMatrix<Complex64>>,
        coeff: Option<PeriodicCoefficient>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("operator dimension must be positive".into()));
        }
        if symbol.iter().any(|c| c.nrows() != dim || c.ncols() != dim) {
            return Err(Error::InvalidInput(format!("symbol coefficients must be {dim}x{dim}")));
        }
        if symbol.iter().flat_map(|c| c.iter()).any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("operator symbol".into()));
        }
        if let Some(v) = &coeff {
            if v.dim() != dim {
                return Err(Error::InvalidInput(format!(
                    "coefficient is {}x{}, operator is {dim}x{dim}",
                    v.dim(),
                    v.dim()
                )));
            }
        }
        Ok(Self { dim, symbol, coeff })
    }

    /// Scalar constant-coefficient operator `Σ_j c_j ∂ₓ^j`.
    pub fn scalar_polynomial(coeffs: &[f64]) -> Self {
        let symbol = coeffs.iter().map(|&c| DMatrix::from_element(1, 1, Complex64::new(c, 0.0))).collect();
        Self { dim: 1, symbol, coeff: None }
    }

    /// `D ∂ₓ²`.
    pub fn heat(diffusivity: f64) -> Self {
        Self::scalar_polynomial(&[0.0, 0.0, diffusivity])
    }

    /// `c ∂ₓ`, whose semigroup is the shift `v(x) ↦ v(x + ct)`.
    pub fn transport(speed: f64) -> Self {
        Self::scalar_polynomial(&[0.0, speed])
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, symbol: vec![DMatrix::zeros(dim, dim)], coeff: None }
    }

    pub fn with_coefficient(mut self, coeff: PeriodicCoefficient) -> Result<Self> {
        if coeff.dim() != self.dim {
            return Err(Error::InvalidInput("coefficient dimension mismatch".into()));
        }
        self.coeff = Some(coeff);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn symbol(&self) -> &[DMatrix<Complex64>] {
        &self.symbol
    }

    pub fn coefficient(&self) -> Option<&PeriodicCoefficient> {
        self.coeff.as_ref()
    }

    /// `p(k) = Σ_j C_j (ik)^j`.
    pub fn symbol_at(&self, k: f64) -> DMatrix<Complex64> {
        let ik = Complex64::new(0.0, k);
        let mut out = DMatrix::zeros(self.dim, self.dim);
        let mut power = Complex64::new(1.0, 0.0);
        for c in &self.symbol {
            out += c * power;
            power *= ik;
        }
        out
    }

    fn check_period(&self, period: f64) -> Result<()> {
        if let Some(v) = &self.coeff {
            if (v.period - period).abs() > 1e-12 * period {
                return Err(Error::GridMismatch(format!(
                    "coefficient period {} differs from data period {period}",
                    v.period
                )));
            }
        }
        Ok(())
    }

    /// Pseudo-spectral application of `A` to periodic data.
    pub fn apply_periodic(&self, f: &PeriodicFunction) -> Result<PeriodicFunction> {
        if f.dim() != self.dim {
            return Err(Error::GridMismatch("operator and function dimensions differ".into()));
        }
        let grid = f.grid();
        self.check_period(grid.period())?;
        let n = grid.len();
        let d = self.dim;
        let mut out = vec![ZERO; d * n];
        for (order, c) in self.symbol.iter().enumerate() {
            if c.iter().all(|v| *v == ZERO) {
                continue;
            }
            let derivs: Vec<Vec<Complex64>> = (0..d)
                .map(|b| fourier::derivative(f.component(b), grid.length(), order as u32))
                .collect();
            for a in 0..d {
                for (b, db) in derivs.iter().enumerate() {
                    let cab = c[(a, b)];
                    if cab != ZERO {
                        for j in 0..n {
                            out[a * n + j] += cab * db[j];
                        }
                    }
                }
            }
        }
        if let Some(v) = &self.coeff {
            let m = v.points();
            if m != grid.points_per_period() {
                return Err(Error::GridMismatch(format!(
                    "coefficient has {m} samples per period, data has {}",
                    grid.points_per_period()
                )));
            }
            let shift = (n / 2) as i64;
            for j in 0..n {
                let vm = &v.samples[(j as i64 - shift).rem_euclid(m as i64) as usize];
                for a in 0..d {
                    for b in 0..d {
                        out[a * n + j] += vm[(a, b)] * f.component(b)[j];
                    }
                }
            }
        }
        PeriodicFunction::new(*grid, d, out)
    }
}

/// Matrix of `A_ξ` on the modes `e^{2πilx/T}`, `|l| ≤ L`, with component
/// index fastest: row `(l + L) d + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochBlock {
    xi: f64,
    modes: usize,
    dim: usize,
    matrix: DMatrix<Complex64>,
    block_diagonal: bool,
}

impl BlochBlock {
    /// A block with an explicit matrix of size `(2L+1) d`.
    pub fn from_matrix(xi: f64, dim: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = matrix.nrows();
        if dim == 0 || n != matrix.ncols() || n % dim != 0 || (n / dim) % 2 == 0 {
            return Err(Error::InvalidInput(format!("a {n}x{} matrix is not a block for dim {dim}", matrix.ncols())));
        }
        let modes = (n / dim - 1) / 2;
        if modes < 1 {
            return Err(Error::TruncationTooSmall(modes));
        }
        Ok(Self { xi, modes, dim, matrix, block_diagonal: false })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// `e^{t A_ξ}`. Blocks without a periodic coefficient are exponentiated
    /// mode by mode.
    pub fn propagator(&self, t: f64) -> Result<DMatrix<Complex64>> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidInput(format!("evolution time must be >= 0, got {t}")));
        }
        let n = self.size();
        if t == 0.0 {
            return Ok(DMatrix::identity(n, n));
        }
        if !self.block_diagonal {
            return expm(&(&self.matrix * Complex64::new(t, 0.0)));
        }
        let d = self.dim;
        let mut out = DMatrix::zeros(n, n);
        for b in 0..2 * self.modes + 1 {
            let sub = self.matrix.view((b * d, b * d), (d, d)) * Complex64::new(t, 0.0);
            out.view_mut((b * d, b * d), (d, d)).copy_from(&expm(&sub)?);
        }
        Ok(out)
    }

    /// Eigenvalues sorted by decreasing real part.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let mut eig = if self.block_diagonal {
            let d = self.dim;
            (0..2 * self.modes + 1)
                .flat_map(|b| eigenvalues(&self.matrix.view((b * d, b * d), (d, d)).into_owned()))
                .collect()
        } else {
            eigenvalues(&self.matrix)
        };
        eig.sort_by(|a, b| b.re.total_cmp(&a.re));
        eig
    }
}

/// Eigenvalues of a dense complex matrix from its complex Schur form.
pub fn eigenvalues(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let n = m.nrows();
    if n == 1 {
        return vec![m[(0, 0)]];
    }
    let schur = nalgebra::Schur::try_new(m.clone(), 1e-15, 0)
        .unwrap_or_else(|| nalgebra::Schur::new(m.clone()));
    let (_, t) = schur.unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

pub fn assemble_bloch_block(op: &OperatorSpec, period: f64, xi: f64, modes: usize) -> Result<BlochBlock> {
    if modes < 1 {
        return Err(Error::TruncationTooSmall(modes));
    }
    if xi.abs() > PI / period * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("ξ = {xi} lies outside [-π/T, π/T]")));
    }
    op.check_period(period)?;
    let d = op.dim;
    let size = (2 * modes + 1) * d;
    let mut matrix = DMatrix::zeros(size, size);
    let ls = -(modes as i64)..=modes as i64;
    for (bi, l) in ls.clone().enumerate() {
        let p = op.symbol_at(xi + 2.0 * PI * l as f64 / period);
        matrix.view_mut((bi * d, bi * d), (d, d)).copy_from(&p);
    }
    if let Some(v) = &op.coeff {
        for (bi, l) in ls.clone().enumerate() {
            for (bj, lp) in ls.clone().enumerate() {
                let vh = v.fourier_mode(l - lp);
                let mut view = matrix.view_mut((bi * d, bj * d), (d, d));
                view += vh;
            }
        }
    }
    Ok(BlochBlock { xi, modes, dim: d, matrix, block_diagonal: op.coeff.is_none() })
}

/// `e^{tA_ξ} c`.
pub fn evolve_block(block: &BlochBlock, t: f64, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    if coeffs.len() != block.size() {
        return Err(Error::InvalidInput(format!(
            "coefficient vector has length {}, block has size {}",
            coeffs.len(),
            block.size()
        )));
    }
    let out = block.propagator(t)? * DVector::from_column_slice(coeffs);
    Ok(out.iter().copied().collect())
}

/// Slice coefficients (bin `l mod M`, component-major) to a block vector.
pub(crate) fn slice_to_block(coeffs: &[Complex64], dim: usize, m: usize, modes: usize) -> DVector<Complex64> {
    let half = (m / 2) as i64;
    let mut out = DVector::zeros((2 * modes + 1) * dim);
    for (bi, l) in (-(modes as i64)..=modes as i64).enumerate() {
        if l < -half || l >= half {
            continue;
        }
        for c in 0..dim {
            out[bi * dim + c] = coeffs[c * m + fourier::bin(l, m)];
        }
    }
    out
}

pub(crate) fn block_to_slice(v: &DVector<Complex64>, dim: usize, m: usize, modes: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; dim * m];
    for r in 0..m {
        let l = fourier::signed_index(r, m);
        if l.unsigned_abs() as usize > modes {
            continue;
        }
        let bi = (l + modes as i64) as usize;
        for c in 0..dim {
            out[c * m + r] = v[bi * dim + c];
        }
    }
    out
}

/// Evolve every slice of `family` by its own Bloch block, once per time.
/// Returns `out[t][ξ]` slices.
fn evolve_family(
    op: &OperatorSpec,
    family: &BlochFamily,
    times: &[f64],
    modes: usize,
) -> Result<Vec<Vec<Vec<Complex64>>>> {
    if op.dim != family.dim() {
        return Err(Error::GridMismatch(format!(
            "operator acts on {} components, data has {}",
            op.dim,
            family.dim()
        )));
    }
    let (dim, m, period) = (family.dim(), family.points_per_period(), family.period());
    let per_xi: Vec<Vec<Vec<Complex64>>> = (0..family.len())
        .into_par_iter()
        .map(|i| {
            let block = assemble_bloch_block(op, period, family.xi()[i], modes)?;
            let c0 = slice_to_block(&family.slice_coefficients(i), dim, m, modes);
            times
                .iter()
                .map(|&t| {
                    let ct = block.propagator(t)? * &c0;
                    Ok(bloch::coefficients_to_slice(&block_to_slice(&ct, dim, m, modes), dim, m))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..times.len())
        .map(|ti| per_xi.iter().map(|s| s[ti].clone()).collect())
        .collect())
}

/// `e^{tA} g_n` on `L²_per(0, nT)` for each requested time.
pub fn evolve_periodic_times(
    op: &OperatorSpec,
    g: &PeriodicFunction,
    times: &[f64],
    modes: usize,
) -> Result<Vec<PeriodicFunction>> {
    op.check_period(g.grid().period())?;
    let family = bloch::bloch_torus(g);
    evolve_family(op, &family, times, modes)?
        .into_iter()
        .map(|slices| bloch::inverse_bloch_torus(&family.with_slices(slices)?))
        .collect()
}

pub fn evolve_periodic(op: &OperatorSpec, g: &PeriodicFunction, t: f64, modes: usize) -> Result<PeriodicFunction> {
    Ok(evolve_periodic_times(op, g, &[t], modes)?.remove(0))
}

/// Resolution of a line evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineResolution {
    pub modes: usize,
    pub xi_nodes: usize,
    pub rule: QuadratureRule,
}

impl Default for LineResolution {
    fn default() -> Self {
        Self { modes: DEFAULT_MODES, xi_nodes: 256, rule: QuadratureRule::Midpoint }
    }
}

/// `e^{tA} f` on the line by block evolution at each ξ node and quadrature reconstruction.
pub fn evolve_line_times(
    op: &OperatorSpec,
    f: &LineFunction,
    period: f64,
    times: &[f64],
    res: LineResolution,
) -> Result<Vec<LineFunction>> {
    op.check_period(period)?;
    let family = bloch::bloch_line(f, period, res.xi_nodes, res.rule, None)?;
    evolve_family(op, &family, times, res.modes)?
        .into_iter()
        .map(|slices| bloch::inverse_bloch_line(&family.with_slices(slices)?))
        .collect()
}

pub fn evolve_line(
    op: &OperatorSpec,
    f: &LineFunction,
    period: f64,
    t: f64,
    res: LineResolution,
) -> Result<LineFunction> {
    Ok(evolve_line_times(op, f, period, &[t], res)?.remove(0))
}

/// Constant-coefficient evolution by the Fourier multiplier `e^{t p(k)}` on
/// the DFT of the line box, bypassing Bloch transforms entirely.
pub fn evolve_fourier_multiplier(op: &OperatorSpec, f: &LineFunction, t: f64) -> Result<LineFunction> {
    if op.coeff.is_some() {
        return Err(Error::InvalidInput("Fourier multiplier route needs constant coefficients".into()));
    }
    if op.dim != f.dim() {
        return Err(Error::GridMismatch("operator and function dimensions differ".into()));
    }
    let d = op.dim;
    let n = f.grid().len();
    let length = n as f64 * f.grid().spacing();
    let hats: Vec<Vec<Complex64>> = (0..d).map(|c| fourier::forward(f.component(c))).collect();
    let mut out_hat = vec![vec![ZERO; n]; d];
    for r in 0..n {
        let k = 2.0 * PI * fourier::signed_index(r, n) as f64 / length;
        let prop = expm(&(op.symbol_at(k) * Complex64::new(t, 0.0)))?;
        for a in 0..d {
            out_hat[a][r] = (0..d).map(|b| prop[(a, b)] * hats[b][r]).sum();
        }
    }
    let mut values = Vec::with_capacity(d * n);
    for h in &out_hat {
        values.extend(fourier::inverse(h).into_iter().map(|v| v / n as f64));
    }
    LineFunction::new(*f.grid(), d, values)
}

/// `max_ξ ‖B(e^{tA} f)(ξ,·) - e^{tA_ξ} B(f)(ξ,·)‖_{L²(0,T)}` over the
/// quadrature nodes of `res`. The left side evolves `f` without Bloch blocks
/// when `A` has constant coefficients, and by the line reconstruction otherwise.
pub fn check_commutation(
    op: &OperatorSpec,
    f: &LineFunction,
    period: f64,
    t: f64,
    res: LineResolution,
) -> Result<f64> {
    let evolved = if op.coeff.is_none() {
        evolve_fourier_multiplier(op, f, t)?
    } else {
        evolve_line(op, f, period, t, res)?
    };
    let lhs = bloch::bloch_line(&evolved, period, res.xi_nodes, res.rule, None)?;
    let family = bloch::bloch_line(f, period, res.xi_nodes, res.rule, None)?;
    let rhs = evolve_family(op, &family, &[t], res.modes)?.remove(0);
    let dx = period / family.points_per_period() as f64;
    Ok(lhs
        .slices()
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() * dx).sqrt())
        .fold(0.0, f64::max))
}

/// Largest real part over the spectra of `A_ξ` at `xi_samples` equispaced
/// frequencies of `[-π/T, π/T]`. Non-positive values are consistent with a
/// bounded semigroup at this truncation.
pub fn spectral_abscissa(op: &OperatorSpec, period: f64, modes: usize, xi_samples: usize) -> Result<f64> {
    let xs = symmetric_xi_grid(period, xi_samples);
    let vals: Vec<f64> = xs
        .par_iter()
        .map(|&xi| {
            let block = assemble_bloch_block(op, period, xi, modes)?;
            Ok(block.eigenvalues().first().map_or(f64::NEG_INFINITY, |e| e.re))
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// `max_ξ ‖e^{tA_ξ}‖₂`, an estimate of `‖e^{tA}‖_{L²→L²}` (the Bloch
/// transform is unitary up to a constant).
pub fn propagator_norm(op: &OperatorSpec, period: f64, t: f64, modes: usize, xi_samples: usize) -> Result<f64> {
    let xs = symmetric_xi_grid(period, xi_samples);
    let vals: Vec<f64> = xs
        .par_iter()
        .map(|&xi| {
            let block = assemble_bloch_block(op, period, xi, modes)?;
            let p = block.propagator(t)?;
            Ok(p.singular_values().iter().copied().fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// `count` equispaced points covering `[-π/T, π/T]` including both ends
/// (and 0 when `count` is odd).
pub fn symmetric_xi_grid(period: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![0.0];
    }
    (0..count)
        .map(|i| -PI / period + 2.0 * PI * i as f64 / ((count - 1) as f64 * period))
        .collect()
}
