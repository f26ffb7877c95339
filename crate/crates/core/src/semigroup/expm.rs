//! Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
//!
//! Higham, "The scaling and squaring method for the matrix exponential
//! revisited", SIAM J. Matrix Anal. Appl. 26 (2005).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const THETA_13: f64 = 5.371_920_351_148_152;

const B: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn one_norm(a: &DMatrix<Complex64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `e^{A}` for a square complex matrix.
pub fn expm(a: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("matrix exponential input".into()));
    }
    if n == 1 {
        let e = a[(0, 0)].exp();
        if !(e.re.is_finite() && e.im.is_finite()) {
            return Err(Error::NonFinite("matrix exponential".into()));
        }
        return Ok(DMatrix::from_element(1, 1, e));
    }

    let norm = one_norm(a);
    let squarings = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    let scaled = a * real(2f64.powi(-squarings));

    let ident = DMatrix::<Complex64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * real(B[13]) + &a4 * real(B[11]) + &a2 * real(B[9]))
        + &a6 * real(B[7])
        + &a4 * real(B[5])
        + &a2 * real(B[3])
        + &ident * real(B[1]);
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * real(B[12]) + &a4 * real(B[10]) + &a2 * real(B[8]))
        + &a6 * real(B[6])
        + &a4 * real(B[4])
        + &a2 * real(B[2])
        + &ident * real(B[0]);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::NonFinite("singular Padé denominator".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("matrix exponential overflowed".into()));
    }
    Ok(r)
}
