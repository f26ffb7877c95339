//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Truncated Taylor series `Σ_k a_k h^k`.
#[derive(Debug, Clone)]
pub struct Jet(pub Vec<f64>);

impl Jet {
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut a = vec![0.0; order + 1];
        a[0] = x0;
        if order > 0 {
            a[1] = 1.0;
        }
        Jet(a)
    }

    pub fn constant(v: f64, order: usize) -> Self {
        let mut a = vec![0.0; order + 1];
        a[0] = v;
        Jet(a)
    }

    pub fn scale(&self, s: f64) -> Self {
        Jet(self.0.iter().map(|a| a * s).collect())
    }

    pub fn add(&self, o: &Self) -> Self {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.0.len();
        Jet((0..n).map(|k| (0..=k).map(|j| self.0[j] * o.0[k - j]).sum()).collect())
    }

    pub fn recip(&self) -> Self {
        let a = &self.0;
        let mut b = vec![0.0; a.len()];
        b[0] = 1.0 / a[0];
        for k in 1..a.len() {
            b[k] = -(1..=k).map(|j| a[j] * b[k - j]).sum::<f64>() / a[0];
        }
        Jet(b)
    }

    pub fn exp(&self) -> Self {
        let a = &self.0;
        let mut b = vec![0.0; a.len()];
        b[0] = a[0].exp();
        for k in 1..a.len() {
            b[k] = (1..=k).map(|j| j as f64 * a[j] * b[k - j]).sum::<f64>() / k as f64;
        }
        Jet(b)
    }

    /// `f^{(k)}(x0) = k! a_k`.
    pub fn derivative(&self, k: usize) -> f64 {
        self.0[k] * (1..=k).product::<usize>() as f64
    }
}

/// `exp(-1/(1 - (x/a)²))` on `|x| < a`, zero elsewhere.
pub fn bump(a: f64, x: f64) -> f64 {
    let y = x / a;
    if y.abs() < 1.0 {
        (-1.0 / (1.0 - y * y)).exp()
    } else {
        0.0
    }
}

/// Derivatives `f^{(0..=order)}` of [`bump`] at `x` by jet arithmetic.
pub fn bump_derivatives(a: f64, x: f64, order: usize) -> Vec<f64> {
    if (x / a).abs() >= 1.0 {
        return vec![0.0; order + 1];
    }
    let y = Jet::variable(x, order).scale(1.0 / a);
    let u = Jet::constant(1.0, order).add(&y.mul(&y).scale(-1.0));
    let jet = u.recip().scale(-1.0).exp();
    (0..=order).map(|k| jet.derivative(k)).collect()
}

/// Composite Gauss–Legendre (5 points) on `panels` equal panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683_1,
        0.0,
        0.538_469_310_105_683_1,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.236_926_885_056_189_08,
        0.478_628_670_499_366_47,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
    ];
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            X.iter().zip(&W).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// `‖f‖²_{H^s}` for integer `s` from `Σ_j C(s,j) ‖f^{(j)}‖²`.
pub fn bump_sobolev_sq(a: f64, s: usize) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    for j in 0..=s {
        let dj = integrate(|x| bump_derivatives(a, x, j)[j].powi(2), -a, a, 4000);
        total += binom * dj;
        binom = binom * (s - j) as f64 / (j + 1) as f64;
    }
    total
}

/// `Σ_{k≥1} (1 - 2^{-s}) k^{-s}` expressed through ζ, for the odd-reciprocal sum.
pub fn odd_power_sum(s: f64) -> f64 {
    let zeta: f64 = (1..2_000_000).map(|k| (k as f64).powf(-s)).sum::<f64>()
        + (2_000_000f64).powf(1.0 - s) / (s - 1.0)
        - 0.5 * (2_000_000f64).powf(-s);
    (1.0 - 2f64.powf(-s)) * zeta
}

/// Method-of-lines RK4 for `u_t = D u_xx + V(x) u` on a periodic box of
/// length `length`, with spectral `u_xx` and pointwise `V`.
pub fn rk4_heat_potential(
    u0: &[Complex64],
    length: f64,
    diffusivity: f64,
    potential: &[f64],
    t: f64,
    steps: usize,
) -> Vec<Complex64> {
    let n = u0.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let k2: Vec<f64> = (0..n)
        .map(|r| {
            let q = if r < n / 2 { r as f64 } else { r as f64 - n as f64 };
            let k = 2.0 * PI * q / length;
            k * k
        })
        .collect();
    let rhs = |u: &[Complex64]| -> Vec<Complex64> {
        let mut h = u.to_vec();
        fwd.process(&mut h);
        for (hv, k) in h.iter_mut().zip(&k2) {
            *hv *= -diffusivity * k / n as f64;
        }
        inv.process(&mut h);
        h.iter().zip(u).zip(potential).map(|((d, u), v)| d + u * v).collect()
    };
    let dt = t / steps as f64;
    let mut u = u0.to_vec();
    let axpy = |u: &[Complex64], k: &[Complex64], s: f64| -> Vec<Complex64> {
        u.iter().zip(k).map(|(a, b)| a + b * s).collect()
    };
    for _ in 0..steps {
        let k1 = rhs(&u);
        let k2v = rhs(&axpy(&u, &k1, 0.5 * dt));
        let k3 = rhs(&axpy(&u, &k2v, 0.5 * dt));
        let k4 = rhs(&axpy(&u, &k3, dt));
        for j in 0..n {
            u[j] += (k1[j] + 2.0 * k2v[j] + 2.0 * k3[j] + k4[j]) * (dt / 6.0);
        }
    }
    u
}

pub fn l2(values: &[Complex64], dx: f64) -> f64 {
    (values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx).sqrt()
}

pub fn l2_diff(a: &[Complex64], b: &[Complex64], dx: f64) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() * dx).sqrt()
}

/// Discriminant of `a x³ + b x² + c x + d`; positive means three distinct real roots.
pub fn cubic_discriminant(a: f64, b: f64, c: f64, d: f64) -> f64 {
    18.0 * a * b * c * d - 4.0 * b * b * b * d + b * b * c * c - 4.0 * a * c * c * c - 27.0 * a * a * d * d
}

/// Eigenvalues of a real or complex 2×2 matrix from its characteristic polynomial.
pub fn eig2(m: [[Complex64; 2]; 2]) -> [Complex64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr - det * 4.0).sqrt();
    [(tr + disc) * 0.5, (tr - disc) * 0.5]
}

/// Complex LLE right-hand side `-iβψ'' - (1+iα)ψ + i|ψ|²ψ + F` with `ψ''`
/// from a direct O(M²) trigonometric sum.
pub fn lle_rhs_direct(alpha: f64, beta: f64, forcing: f64, period: f64, psi: &[Complex64]) -> Vec<Complex64> {
    let m = psi.len();
    let mut hat = vec![c(0.0, 0.0); m];
    for (q, h) in hat.iter_mut().enumerate() {
        for (j, p) in psi.iter().enumerate() {
            *h += p * Complex64::from_polar(1.0, -2.0 * PI * (q * j) as f64 / m as f64);
        }
    }
    let psi_xx: Vec<Complex64> = (0..m)
        .map(|j| {
            (0..m)
                .map(|q| {
                    let l = if q < m / 2 { q as f64 } else { q as f64 - m as f64 };
                    let k = 2.0 * PI * l / period;
                    hat[q] * -k * k * Complex64::from_polar(1.0 / m as f64, 2.0 * PI * (q * j) as f64 / m as f64)
                })
                .sum()
        })
        .collect();
    psi.iter()
        .zip(&psi_xx)
        .map(|(p, pxx)| c(0.0, -beta) * pxx - c(1.0, alpha) * p + c(0.0, p.norm_sqr()) * p + forcing)
        .collect()
}
