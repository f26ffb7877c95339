//! Thin wrappers over `rustfft` with the index conventions used across the crate.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Unnormalized forward DFT: `out[q] = sum_j x[j] e^{-2 pi i q j / N}`.
pub fn forward(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::<f64>::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    buf
}

/// Unnormalized inverse DFT: `out[j] = sum_q x[q] e^{+2 pi i q j / N}`.
pub fn inverse(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::<f64>::new()
        .plan_fft_inverse(buf.len())
        .process(&mut buf);
    buf
}

/// Signed frequency index of DFT bin `r` for a length-`n` transform,
/// in the symmetric range `[-n/2, n/2)`.
pub fn signed_index(r: usize, n: usize) -> i64 {
    let r = r as i64;
    let n = n as i64;
    if r >= n - n / 2 {
        r - n
    } else {
        r
    }
}

/// DFT bin holding signed frequency index `q`.
pub fn bin(q: i64, n: usize) -> usize {
    q.rem_euclid(n as i64) as usize
}

/// Spectral derivative of order `order` of samples of an `length`-periodic function.
/// The Nyquist mode is dropped for odd orders so real data stays real.
pub fn derivative(samples: &[Complex64], length: f64, order: u32) -> Vec<Complex64> {
    if order == 0 {
        return samples.to_vec();
    }
    let n = samples.len();
    let mut hat = forward(samples);
    let scale = 1.0 / n as f64;
    for (r, h) in hat.iter_mut().enumerate() {
        let q = signed_index(r, n);
        if order % 2 == 1 && n % 2 == 0 && q == -(n as i64) / 2 {
            *h = Complex64::new(0.0, 0.0);
            continue;
        }
        let ik = Complex64::new(0.0, 2.0 * std::f64::consts::PI * q as f64 / length);
        *h *= ik.powu(order) * scale;
    }
    inverse(&hat)
}
