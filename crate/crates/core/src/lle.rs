//! Stationary periodic solutions of the Lugiato–Lefever equation
//!
//! ```text
//! ψ_t = -iβψ_xx - (1 + iα)ψ + i|ψ|²ψ + F
//! ```
//!
//! written for `ψ = u + iv` as a real two-component system, the linearization
//! `A[φ] = -I + J L[φ]` about a wave `φ`, the nonlinear remainder `N[φ]`, and
//! a numerical check of diffusive spectral stability by Hill's method.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier;
use crate::grids::{PeriodicFunction, PeriodicGrid};
use crate::semigroup::{self, OperatorSpec, PeriodicCoefficient};

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `J = [[0, -1], [1, 0]]`, multiplication by `i` in real coordinates.
pub fn j_matrix() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[cx(0.0, 0.0), cx(-1.0, 0.0), cx(1.0, 0.0), cx(0.0, 0.0)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LLEParams {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "F")]
    pub forcing: f64,
    #[serde(rename = "T")]
    pub period: f64,
}

impl LLEParams {
    pub fn new(alpha: f64, beta: f64, forcing: f64, period: f64) -> Result<Self> {
        let p = Self { alpha, beta, forcing, period };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.alpha, self.beta, self.forcing, self.period].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("LLE parameters".into()));
        }
        if self.forcing <= 0.0 {
            return Err(Error::InvalidInput(format!("pump F must be positive, got {}", self.forcing)));
        }
        if self.period <= 0.0 {
            return Err(Error::InvalidInput(format!("period must be positive, got {}", self.period)));
        }
        Ok(())
    }

    /// `β = 1` (normal) or `β = -1` (anomalous).
    pub fn is_standard_dispersion(&self) -> bool {
        self.beta.abs() == 1.0
    }
}

/// A `T`-periodic profile `φ = (u, v)` on `M` samples of `[-T/2, T/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicWave {
    params: LLEParams,
    phi: PeriodicFunction,
    residual: f64,
}

impl PeriodicWave {
    pub fn new(params: LLEParams, phi: PeriodicFunction) -> Result<Self> {
        params.validate()?;
        check_profile_grid(&params, &phi)?;
        let real = PeriodicFunction::new(
            *phi.grid(),
            2,
            phi.values().iter().map(|z| cx(z.re, 0.0)).collect(),
        )?;
        let residual = residual_norm(&params, &real);
        Ok(Self { params, phi: real, residual })
    }

    pub fn from_components(params: LLEParams, u: &[f64], v: &[f64]) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::InvalidInput("profile components differ in length".into()));
        }
        let grid = PeriodicGrid::new(params.period, 1, u.len())?;
        let values = u.iter().chain(v).map(|&r| cx(r, 0.0)).collect();
        Self::new(params, PeriodicFunction::new(grid, 2, values)?)
    }

    pub fn constant(params: LLEParams, psi: Complex64, m: usize) -> Result<Self> {
        Self::from_components(params, &vec![psi.re; m], &vec![psi.im; m])
    }

    /// The formal profile `φ = 0`; not a solution for `F > 0`.
    pub fn zero(params: LLEParams, m: usize) -> Result<Self> {
        Self::constant(params, cx(0.0, 0.0), m)
    }

    pub fn params(&self) -> &LLEParams {
        &self.params
    }

    pub fn phi(&self) -> &PeriodicFunction {
        &self.phi
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn points(&self) -> usize {
        self.phi.grid().points_per_period()
    }

    pub fn u(&self) -> Vec<f64> {
        self.phi.component(0).iter().map(|z| z.re).collect()
    }

    pub fn v(&self) -> Vec<f64> {
        self.phi.component(1).iter().map(|z| z.re).collect()
    }

    pub fn norm(&self) -> f64 {
        let dx = self.phi.grid().spacing();
        (self.phi.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * dx).sqrt()
    }

    /// `residual ≤ 1e-10 ‖φ‖`.
    pub fn is_accepted(&self) -> bool {
        self.residual <= 1e-10 * self.norm()
    }

    /// `φ'`, spectrally.
    pub fn derivative(&self) -> PeriodicFunction {
        let grid = *self.phi.grid();
        let mut values = Vec::with_capacity(2 * grid.len());
        for c in 0..2 {
            values.extend(
                fourier::derivative(self.phi.component(c), grid.length(), 1)
                    .into_iter()
                    .map(|z| cx(z.re, 0.0)),
            );
        }
        PeriodicFunction::new(grid, 2, values).expect("same shape")
    }
}

fn check_profile_grid(params: &LLEParams, phi: &PeriodicFunction) -> Result<()> {
    let grid = phi.grid();
    if phi.dim() != 2 {
        return Err(Error::GridMismatch(format!("profile needs 2 components, got {}", phi.dim())));
    }
    if grid.periods() != 1 || (grid.period() - params.period).abs() > 1e-12 * params.period {
        return Err(Error::GridMismatch(format!(
            "profile grid covers {} periods of length {}, expected one of length {}",
            grid.periods(),
            grid.period(),
            params.period
        )));
    }
    Ok(())
}

fn second_derivative(x: &[f64], period: f64) -> Vec<f64> {
    let z: Vec<Complex64> = x.iter().map(|&r| cx(r, 0.0)).collect();
    fourier::derivative(&z, period, 2).into_iter().map(|z| z.re).collect()
}

/// Real-form profile residual `(R_u, R_v)`:
/// `R_u = βv'' - u + αv - ρv + F`, `R_v = -βu'' - v - αu + ρu`, `ρ = u² + v²`.
fn residual_components(p: &LLEParams, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let upp = second_derivative(u, p.period);
    let vpp = second_derivative(v, p.period);
    let mut ru = vec![0.0; u.len()];
    let mut rv = vec![0.0; u.len()];
    for j in 0..u.len() {
        let rho = u[j] * u[j] + v[j] * v[j];
        ru[j] = p.beta * vpp[j] - u[j] + p.alpha * v[j] - rho * v[j] + p.forcing;
        rv[j] = -p.beta * upp[j] - v[j] - p.alpha * u[j] + rho * u[j];
    }
    (ru, rv)
}

fn split(phi: &PeriodicFunction) -> (Vec<f64>, Vec<f64>) {
    (
        phi.component(0).iter().map(|z| z.re).collect(),
        phi.component(1).iter().map(|z| z.re).collect(),
    )
}

fn residual_norm(p: &LLEParams, phi: &PeriodicFunction) -> f64 {
    let (u, v) = split(phi);
    let (ru, rv) = residual_components(p, &u, &v);
    let dx = phi.grid().spacing();
    (ru.iter().chain(&rv).map(|r| r * r).sum::<f64>() * dx).sqrt()
}

/// Right-hand side of the LLE in real coordinates at `φ`, i.e. the profile residual.
pub fn profile_residual(params: &LLEParams, phi: &PeriodicFunction) -> Result<PeriodicFunction> {
    check_profile_grid(params, phi)?;
    let (u, v) = split(phi);
    let (ru, rv) = residual_components(params, &u, &v);
    let values = ru.into_iter().chain(rv).map(|r| cx(r, 0.0)).collect();
    PeriodicFunction::new(*phi.grid(), 2, values)
}

/// Real roots of `a x³ + b x² + c x + d`, ascending, polished by Newton.
fn real_cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let (b, c, d) = (b / a, c / a, d / a);
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = q * q / 4.0 + p * p * p / 27.0;
    let mut roots = if disc < 0.0 {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3).map(|k| r * (phi - 2.0 * PI * k as f64 / 3.0).cos() + shift).collect()
    } else {
        let s = disc.sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt() + shift]
    };
    for x in roots.iter_mut() {
        for _ in 0..4 {
            let f = ((*x + b) * *x + c) * *x + d;
            let df = (3.0 * *x + 2.0 * b) * *x + c;
            if df == 0.0 {
                break;
            }
            *x -= f / df;
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * y.abs().max(1e-300));
    roots
}

/// All constant profiles `ψ₀ = F / (1 + i(α - ρ))` with `F² = ρ(1 + (α - ρ)²)`,
/// ordered by increasing intensity `ρ`.
pub fn solve_constant_state(params: &LLEParams, m: usize) -> Result<Vec<PeriodicWave>> {
    params.validate()?;
    let a = params.alpha;
    let f2 = params.forcing * params.forcing;
    real_cubic_roots(1.0, -2.0 * a, 1.0 + a * a, -f2)
        .into_iter()
        .map(|rho| {
            let psi = params.forcing / cx(1.0, a - rho);
            PeriodicWave::constant(*params, psi, m)
        })
        .collect()
}

/// `ψ₀` itself for each constant state, without a grid.
pub fn constant_amplitudes(params: &LLEParams) -> Result<Vec<Complex64>> {
    params.validate()?;
    let a = params.alpha;
    Ok(real_cubic_roots(1.0, -2.0 * a, 1.0 + a * a, -params.forcing * params.forcing)
        .into_iter()
        .map(|rho| params.forcing / cx(1.0, a - rho))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Accept when the residual falls below `tol · ‖φ‖`.
    pub tol: f64,
    /// Smallest backtracking factor before giving up on a direction.
    pub min_step: f64,
    /// Pivot ratio below which the Jacobian is reported singular.
    pub singular_ratio: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iter: 60, tol: 1e-11, min_step: 1.0 / 1024.0, singular_ratio: 1e-14 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub wave: PeriodicWave,
    pub iterations: usize,
    pub converged: bool,
}

fn second_derivative_matrix(m: usize, period: f64) -> DMatrix<f64> {
    let mut d2 = DMatrix::zeros(m, m);
    for k in 0..m {
        let mut e = vec![0.0; m];
        e[k] = 1.0;
        for (j, v) in second_derivative(&e, period).into_iter().enumerate() {
            d2[(j, k)] = v;
        }
    }
    d2
}

fn jacobian(p: &LLEParams, d2: &DMatrix<f64>, u: &[f64], v: &[f64]) -> DMatrix<f64> {
    let m = u.len();
    let mut jac = DMatrix::zeros(2 * m, 2 * m);
    jac.view_mut((0, m), (m, m)).copy_from(&(d2 * p.beta));
    jac.view_mut((m, 0), (m, m)).copy_from(&(d2 * -p.beta));
    for j in 0..m {
        let (uj, vj) = (u[j], v[j]);
        jac[(j, j)] += -1.0 - 2.0 * uj * vj;
        jac[(j, m + j)] += p.alpha - (uj * uj + 3.0 * vj * vj);
        jac[(m + j, j)] += -p.alpha + 3.0 * uj * uj + vj * vj;
        jac[(m + j, m + j)] += -1.0 + 2.0 * uj * vj;
    }
    jac
}

fn solve_dense(a: DMatrix<f64>, b: DVector<f64>, singular_ratio: f64) -> Result<DVector<f64>> {
    let lu = a.lu();
    let u = lu.u();
    let diag: Vec<f64> = u.diagonal().iter().map(|x| x.abs()).collect();
    let big = diag.iter().copied().fold(0.0, f64::max);
    let small = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = if big > 0.0 { small / big } else { 0.0 };
    if !(ratio > singular_ratio) {
        return Err(Error::SingularJacobian(ratio));
    }
    lu.solve(&b).ok_or(Error::SingularJacobian(ratio))
}

/// Damped Newton on the collocated profile equation. When the guess is not
/// constant, translations are pinned by `⟨φ - φ_guess, φ_guess'⟩ = 0` through
/// a bordered system. Returns the best iterate whether or not it converged.
pub fn newton_profile(
    params: &LLEParams,
    guess: &PeriodicFunction,
    opts: NewtonOptions,
) -> Result<NewtonReport> {
    let start = PeriodicWave::new(*params, guess.clone())?;
    let m = start.points();
    let d2 = second_derivative_matrix(m, params.period);
    let (mut u, mut v) = (start.u(), start.v());
    let x_ref: Vec<f64> = u.iter().chain(&v).copied().collect();
    let dref = start.derivative();
    let border: Vec<f64> = dref.values().iter().map(|z| z.re).collect();
    let border_norm = border.iter().map(|b| b * b).sum::<f64>().sqrt();
    let bordered = border_norm > 1e-8 * (1.0 + start.norm());
    let dx = params.period / m as f64;
    let norm_of = |ru: &[f64], rv: &[f64]| (ru.iter().chain(rv).map(|r| r * r).sum::<f64>() * dx).sqrt();
    let target = |u: &[f64], v: &[f64]| {
        let n = (u.iter().chain(v).map(|r| r * r).sum::<f64>() * dx).sqrt();
        (opts.tol * n).max(1e-14)
    };

    let (mut ru, mut rv) = residual_components(params, &u, &v);
    let mut res = norm_of(&ru, &rv);
    let mut iterations = 0;
    let mut converged = res <= target(&u, &v);
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let jac = jacobian(params, &d2, &u, &v);
        let size = if bordered { 2 * m + 1 } else { 2 * m };
        let mut sys = DMatrix::zeros(size, size);
        sys.view_mut((0, 0), (2 * m, 2 * m)).copy_from(&jac);
        let mut rhs = DVector::zeros(size);
        for j in 0..m {
            rhs[j] = -ru[j];
            rhs[m + j] = -rv[j];
        }
        if bordered {
            for (k, &b) in border.iter().enumerate() {
                sys[(k, 2 * m)] = b;
                sys[(2 * m, k)] = b;
            }
            let x: Vec<f64> = u.iter().chain(&v).copied().collect();
            rhs[2 * m] = -x.iter().zip(&x_ref).zip(&border).map(|((a, r), b)| (a - r) * b).sum::<f64>();
        }
        let delta = solve_dense(sys, rhs, opts.singular_ratio)?;

        let mut step = 1.0;
        let accepted = loop {
            let ut: Vec<f64> = (0..m).map(|j| u[j] + step * delta[j]).collect();
            let vt: Vec<f64> = (0..m).map(|j| v[j] + step * delta[m + j]).collect();
            let (rut, rvt) = residual_components(params, &ut, &vt);
            let rt = norm_of(&rut, &rvt);
            if rt.is_finite() && rt < (1.0 - 1e-4 * step) * res {
                break Some((ut, vt, rut, rvt, rt));
            }
            step /= 2.0;
            if step < opts.min_step {
                break None;
            }
        };
        let Some((ut, vt, rut, rvt, rt)) = accepted else {
            break;
        };
        (u, v, ru, rv, res) = (ut, vt, rut, rvt, rt);
        converged = res <= target(&u, &v);
    }
    Ok(NewtonReport { wave: PeriodicWave::from_components(*params, &u, &v)?, iterations, converged })
}

/// Newton solve that fails with [`Error::NoConvergence`] unless the residual
/// reaches tolerance.
pub fn solve_profile(params: &LLEParams, guess: &PeriodicFunction, opts: NewtonOptions) -> Result<PeriodicWave> {
    let report = newton_profile(params, guess, opts)?;
    if report.converged {
        Ok(report.wave)
    } else {
        Err(Error::NoConvergence { iterations: report.iterations, residual: report.wave.residual() })
    }
}

/// `ψ₀ + a cos(2π k x/T)` added to the real part, on `M` samples.
pub fn seeded_guess(params: &LLEParams, base: Complex64, amplitude: f64, mode: u32, m: usize) -> Result<PeriodicFunction> {
    let grid = PeriodicGrid::new(params.period, 1, m)?;
    let k = 2.0 * PI * mode as f64 / params.period;
    let pts = grid.points();
    let values = pts
        .iter()
        .map(|&x| cx(base.re + amplitude * (k * x).cos(), 0.0))
        .chain(pts.iter().map(|_| cx(base.im, 0.0)))
        .collect();
    PeriodicFunction::new(grid, 2, values)
}

/// `P(φ) = |φ|² I + 2φφᵀ` at each sample of `[0, T)`.
fn potential_samples(wave: &PeriodicWave) -> Vec<DMatrix<Complex64>> {
    let (u, v) = (wave.u(), wave.v());
    let m = u.len();
    (0..m)
        .map(|k| {
            let j = (k + m / 2) % m;
            let (a, b) = (u[j], v[j]);
            DMatrix::from_row_slice(
                2,
                2,
                &[cx(3.0 * a * a + b * b, 0.0), cx(2.0 * a * b, 0.0), cx(2.0 * a * b, 0.0), cx(a * a + 3.0 * b * b, 0.0)],
            )
        })
        .collect()
}

/// `L[φ] = -β∂ₓ² - α + P(φ)`, formally self-adjoint.
pub fn self_adjoint_part(wave: &PeriodicWave) -> Result<OperatorSpec> {
    let p = wave.params;
    let id = DMatrix::<Complex64>::identity(2, 2);
    let symbol = vec![&id * cx(-p.alpha, 0.0), DMatrix::zeros(2, 2), &id * cx(-p.beta, 0.0)];
    let coeff = PeriodicCoefficient::new(p.period, potential_samples(wave))?;
    OperatorSpec::new(2, symbol, Some(coeff))
}

/// `A[φ] = -I + J L[φ]`.
pub fn linearized_operator(wave: &PeriodicWave) -> Result<OperatorSpec> {
    let p = wave.params;
    let j = j_matrix();
    let id = DMatrix::<Complex64>::identity(2, 2);
    let symbol = vec![-&id + &j * cx(-p.alpha, 0.0), DMatrix::zeros(2, 2), &j * cx(-p.beta, 0.0)];
    let coeff = PeriodicCoefficient::new(p.period, potential_samples(wave).iter().map(|s| &j * s).collect())?;
    OperatorSpec::new(2, symbol, Some(coeff))
}

/// `N[φ](w) = J(Q(w)φ + |w|² w)` with `Q(w) = 2wwᵀ + |w|² I`, pointwise.
pub fn evaluate_nonlinearity(wave: &PeriodicWave, w: &PeriodicFunction) -> Result<PeriodicFunction> {
    if w.grid() != wave.phi.grid() || w.dim() != 2 {
        return Err(Error::GridMismatch("perturbation and wave live on different grids".into()));
    }
    let n = w.grid().len();
    let (u, v) = (wave.u(), wave.v());
    let mut out = vec![cx(0.0, 0.0); 2 * n];
    for j in 0..n {
        let (a, b) = (w.component(0)[j], w.component(1)[j]);
        let sq = a * a + b * b;
        let dot = a * u[j] + b * v[j];
        let qa = 2.0 * dot * a + sq * u[j] + sq * a;
        let qb = 2.0 * dot * b + sq * v[j] + sq * b;
        out[j] = -qb;
        out[n + j] = qa;
    }
    PeriodicFunction::new(*w.grid(), 2, out)
}

/// Spectrum of `A_ξ[φ]` at truncation `L`, largest real part first.
pub fn bloch_spectrum(wave: &PeriodicWave, xi: f64, modes: usize) -> Result<Vec<Complex64>> {
    let op = linearized_operator(wave)?;
    Ok(semigroup::assemble_bloch_block(&op, wave.params.period, xi, modes)?.eigenvalues())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityOptions {
    pub xi_samples: usize,
    pub modes: usize,
    pub theta_min: f64,
    pub gap_min: f64,
    pub zero_tol: f64,
    pub alignment_tol: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            xi_samples: 129,
            modes: semigroup::DEFAULT_MODES,
            theta_min: 1e-6,
            gap_min: 1e-4,
            zero_tol: 1e-6,
            alignment_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub xi: f64,
    pub max_re: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    /// `max Re σ(A_ξ)` over sampled `ξ ≠ 0`.
    pub cond1_spectrum_margin: f64,
    /// `max Re σ(A_0)` once the eigenvalue nearest 0 is removed.
    pub cond1_zero_margin: f64,
    pub cond2_theta: f64,
    /// `min_ξ (-max Re σ(A_ξ) - θ_min ξ²)` over the ratio-test range.
    pub cond2_min_slack: f64,
    pub cond3_zero_eig_error: f64,
    /// `‖A_0 φ'‖ / ‖φ'‖`.
    pub cond3_eigenfunction_residual: f64,
    pub cond3_alignment: f64,
    pub cond3_gap: f64,
    pub cond1: bool,
    pub cond2: bool,
    pub cond3: bool,
    pub verdict: Verdict,
    pub samples: Vec<SpectrumSample>,
}

/// Eigenvector of `m` for the eigenvalue closest to `shift` by inverse iteration.
fn inverse_iteration(m: &DMatrix<Complex64>, shift: Complex64) -> Option<DVector<Complex64>> {
    let n = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let shifted = m - DMatrix::identity(n, n) * (shift + cx(1e-11 * scale, 0.0));
    let lu = shifted.lu();
    let mut x = DVector::from_fn(n, |i, _| cx(1.0 + 0.1 * (i as f64).sin(), 0.0));
    for _ in 0..4 {
        let y = lu.solve(&x)?;
        let norm = y.norm();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        x = y / cx(norm, 0.0);
    }
    Some(x)
}

/// `φ'` as a block vector at `ξ = 0`.
fn derivative_block_vector(wave: &PeriodicWave, modes: usize) -> DVector<Complex64> {
    let m = wave.points();
    let d = wave.derivative();
    let fam = crate::bloch::bloch_torus(&d);
    semigroup::slice_to_block(&fam.slice_coefficients(0), 2, m, modes)
}

/// The three conditions of diffusive spectral stability, checked on a
/// symmetric ξ grid of `[-π/T, π/T]`.
pub fn stability_check(wave: &PeriodicWave, opts: StabilityOptions) -> Result<StabilityVerdict> {
    let period = wave.params.period;
    let op = linearized_operator(wave)?;
    let grid = semigroup::symmetric_xi_grid(period, opts.xi_samples);
    let samples: Vec<SpectrumSample> = grid
        .par_iter()
        .map(|&xi| {
            let block = semigroup::assemble_bloch_block(&op, period, xi, opts.modes)?;
            let max_re = block.eigenvalues().first().map_or(f64::NEG_INFINITY, |z| z.re);
            Ok(SpectrumSample { xi, max_re })
        })
        .collect::<Result<_>>()?;

    let tiny = 1e-12 / period;
    let cond1_spectrum_margin = samples
        .iter()
        .filter(|s| s.xi.abs() > tiny)
        .map(|s| s.max_re)
        .fold(f64::NEG_INFINITY, f64::max);

    let cutoff = PI / (64.0 * period);
    let ratio: Vec<&SpectrumSample> = samples.iter().filter(|s| s.xi.abs() >= cutoff * (1.0 - 1e-12)).collect();
    let cond2_theta = ratio.iter().map(|s| -s.max_re / (s.xi * s.xi)).fold(f64::INFINITY, f64::min);
    let cond2_min_slack = ratio
        .iter()
        .map(|s| -s.max_re - opts.theta_min * s.xi * s.xi)
        .fold(f64::INFINITY, f64::min);

    let block0 = semigroup::assemble_bloch_block(&op, period, 0.0, opts.modes)?;
    let mut eig0 = block0.eigenvalues();
    eig0.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let lambda0 = eig0[0];
    let cond3_gap = eig0.get(1).map_or(f64::INFINITY, |z| (z - lambda0).norm());
    let cond1_zero_margin = eig0[1..].iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);

    let dphi = derivative_block_vector(wave, opts.modes);
    let dnorm = dphi.norm();
    let (cond3_eigenfunction_residual, cond3_alignment) = if dnorm > 0.0 {
        let residual = (block0.matrix() * &dphi).norm() / dnorm;
        let alignment = inverse_iteration(block0.matrix(), lambda0)
            .map_or(0.0, |e| e.dotc(&dphi).norm() / (e.norm() * dnorm));
        (residual, alignment)
    } else {
        (f64::INFINITY, 0.0)
    };

    let cond1 = cond1_spectrum_margin < 0.0 && cond1_zero_margin < 0.0;
    let cond2 = cond2_theta >= opts.theta_min && cond2_min_slack >= 0.0;
    let cond3 = lambda0.norm() <= opts.zero_tol
        && cond3_alignment >= 1.0 - opts.alignment_tol
        && cond3_gap >= opts.gap_min;
    let unstable = cond1_spectrum_margin > opts.zero_tol || cond1_zero_margin > opts.zero_tol;
    let verdict = if unstable {
        Verdict::Unstable
    } else if cond1 && cond2 && cond3 {
        Verdict::Stable
    } else {
        Verdict::Inconclusive
    };
    Ok(StabilityVerdict {
        cond1_spectrum_margin,
        cond1_zero_margin,
        cond2_theta,
        cond2_min_slack,
        cond3_zero_eig_error: lambda0.norm(),
        cond3_eigenfunction_residual,
        cond3_alignment,
        cond3_gap,
        cond1,
        cond2,
        cond3,
        verdict,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, beta: f64, f: f64, t: f64) -> LLEParams {
        LLEParams::new(alpha, beta, f, t).unwrap()
    }

    /// Independent oracle: sign-change scan plus bisection on the intensity cubic.
    fn bisection_roots(alpha: f64, f: f64) -> Vec<f64> {
        let g = |r: f64| r * (1.0 + (alpha - r) * (alpha - r)) - f * f;
        let hi = f * f + 2.0 * alpha.abs() + 2.0;
        let n = 200_000;
        let mut roots = Vec::new();
        for i in 0..n {
            let (mut a, mut b) = (hi * i as f64 / n as f64, hi * (i + 1) as f64 / n as f64);
            if g(a) == 0.0 {
                roots.push(a);
                continue;
            }
            if g(a) * g(b) < 0.0 {
                for _ in 0..200 {
                    let c = 0.5 * (a + b);
                    if g(a) * g(c) <= 0.0 {
                        b = c
                    } else {
                        a = c
                    }
                }
                roots.push(0.5 * (a + b));
            }
        }
        roots
    }

    #[test]
    fn rejects_bad_params() {
        assert!(LLEParams::new(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(LLEParams::new(0.0, 1.0, 1.0, -1.0).is_err());
        assert!(!params(0.0, 0.5, 1.0, 1.0).is_standard_dispersion());
    }

    #[test]
    fn j_squares_to_minus_identity() {
        let j = j_matrix();
        assert_eq!(&j * &j, -DMatrix::<Complex64>::identity(2, 2));
    }

    #[test]
    fn constant_state_alpha_zero() {
        let p = params(0.0, 1.0, 1.0, 1.0);
        let states = solve_constant_state(&p, 8).unwrap();
        assert_eq!(states.len(), 1);
        let rho = states[0].u()[0].powi(2) + states[0].v()[0].powi(2);
        let oracle = bisection_roots(0.0, 1.0);
        assert_eq!(oracle.len(), 1);
        assert!((rho - oracle[0]).abs() < 1e-12);
        assert!((rho - 0.682_327_803_828_019_3).abs() < 1e-12);
        assert!(states[0].residual() <= 1e-12);
    }

    #[test]
    fn bistable_has_three_states() {
        let p = params(2.0, 1.0, 1.39, 1.0);
        let amps = constant_amplitudes(&p).unwrap();
        assert_eq!(amps.len(), 3);
        for w in solve_constant_state(&p, 4).unwrap() {
            assert!(w.residual() <= 1e-12);
        }
    }

    #[test]
    fn small_pump_limit() {
        let p = params(0.7, 1.0, 1e-4, 1.0);
        let psi = constant_amplitudes(&p).unwrap()[0];
        let lin = p.forcing / cx(1.0, p.alpha);
        assert!((psi - lin).norm() <= 1e-7 * lin.norm());
    }

    #[test]
    fn newton_fixed_point() {
        let p = params(1.0, -1.0, 1.05, 2.0 * PI);
        let w = solve_constant_state(&p, 32).unwrap().remove(0);
        let report = newton_profile(&p, w.phi(), NewtonOptions::default()).unwrap();
        assert!(report.converged);
        assert!(report.iterations <= 1);
        assert!(report.wave.phi().sub(w.phi()).unwrap().values().iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn newton_from_zero_finds_unique_state() {
        let p = params(0.0, 1.0, 1.0, 1.0);
        let guess = PeriodicFunction::zeros(PeriodicGrid::new(1.0, 1, 16).unwrap(), 2);
        let w = solve_profile(&p, &guess, NewtonOptions::default()).unwrap();
        let expect = constant_amplitudes(&p).unwrap()[0];
        assert!((w.u()[3] - expect.re).abs() < 1e-10 && (w.v()[3] - expect.im).abs() < 1e-10);
    }

    #[test]
    fn grid_checks() {
        let p = params(0.0, 1.0, 1.0, 1.0);
        let wrong = PeriodicFunction::zeros(PeriodicGrid::new(2.0, 1, 16).unwrap(), 2);
        assert!(matches!(PeriodicWave::new(p, wrong), Err(Error::GridMismatch(_))));
        let w = PeriodicWave::zero(p, 16).unwrap();
        let other = PeriodicFunction::zeros(PeriodicGrid::new(1.0, 1, 8).unwrap(), 2);
        assert!(matches!(evaluate_nonlinearity(&w, &other), Err(Error::GridMismatch(_))));
        let zero = PeriodicFunction::zeros(*w.phi().grid(), 2);
        assert!(evaluate_nonlinearity(&w, &zero).unwrap().values().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn formal_zero_block() {
        let p = params(0.4, 1.0, 1.0, 3.0);
        let w = PeriodicWave::zero(p, 16).unwrap();
        let op = linearized_operator(&w).unwrap();
        let xi = 0.3;
        let b = semigroup::assemble_bloch_block(&op, 3.0, xi, 2).unwrap();
        let j = j_matrix();
        for (bi, l) in (-2..=2).enumerate() {
            let k = xi + 2.0 * PI * l as f64 / 3.0;
            let expect = -DMatrix::<Complex64>::identity(2, 2) + &j * cx(k * k - 0.4, 0.0);
            let got = b.matrix().view((2 * bi, 2 * bi), (2, 2)).into_owned();
            assert!((got - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn formal_zero_is_inconclusive() {
        let p = params(0.4, 1.0, 1.0, 3.0);
        let w = PeriodicWave::zero(p, 16).unwrap();
        let opts = StabilityOptions { xi_samples: 9, modes: 4, ..Default::default() };
        let v = stability_check(&w, opts).unwrap();
        assert!(v.cond1 && v.cond2 && !v.cond3);
        assert_eq!(v.verdict, Verdict::Inconclusive);
        assert!((v.cond1_spectrum_margin + 1.0).abs() < 1e-12);
    }
}
