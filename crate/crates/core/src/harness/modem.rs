//! Uncoded QPSK and per-subcarrier equalization.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_CONDITION: f64 = 1e8;
const RIDGE: f64 = 1e-8;

/// Gray-mapped QPSK: `(b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)`.
pub fn qpsk_mod(bits: &[u8]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::Shape(format!(
            "QPSK needs an even bit count, got {}",
            bits.len()
        )));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|b| {
            let re = if b[0] == 0 {
                FRAC_1_SQRT_2
            } else {
                -FRAC_1_SQRT_2
            };
            let im = if b[1] == 0 {
                FRAC_1_SQRT_2
            } else {
                -FRAC_1_SQRT_2
            };
            Complex64::new(re, im)
        })
        .collect())
}

/// Hard decisions per axis; a component of exactly zero decides bit 0.
pub fn qpsk_demod(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.re < 0.0), u8::from(s.im < 0.0)])
        .collect()
}

/// 2x2 channel as `h[rx][port]`.
pub type Mat2 = [[Complex64; 2]; 2];

fn gram(h: &Mat2) -> Mat2 {
    let mut g = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (i, gi) in g.iter_mut().enumerate() {
        for (j, gij) in gi.iter_mut().enumerate() {
            *gij = h[0][i].conj() * h[0][j] + h[1][i].conj() * h[1][j];
        }
    }
    g
}

fn solve2(a: &Mat2, b: [Complex64; 2]) -> Option<[Complex64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.norm() == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (a[1][1] * b[0] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ])
}

/// Ratio of the singular values of `h`.
pub fn condition_number(h: &Mat2) -> f64 {
    let g = gram(h);
    let trace = g[0][0].re + g[1][1].re;
    let det = (g[0][0] * g[1][1] - g[0][1] * g[1][0]).re;
    let disc = (trace * trace / 4.0 - det).max(0.0).sqrt();
    let hi = trace / 2.0 + disc;
    let lo = trace / 2.0 - disc;
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        (hi / lo).sqrt()
    }
}

/// Zero-forcing `H^{-1} y`, falling back to `(H^H H + 1e-8 I)^{-1} H^H y`
/// when `H` is ill-conditioned.
pub fn equalize_2x2(h: &Mat2, y: [Complex64; 2]) -> [Complex64; 2] {
    if condition_number(h) <= MAX_CONDITION {
        if let Some(s) = solve2(h, y) {
            return s;
        }
    }
    let mut g = gram(h);
    g[0][0] += RIDGE;
    g[1][1] += RIDGE;
    let rhs = [
        h[0][0].conj() * y[0] + h[1][0].conj() * y[1],
        h[0][1].conj() * y[0] + h[1][1].conj() * y[1],
    ];
    solve2(&g, rhs).unwrap_or([Complex64::new(0.0, 0.0); 2])
}

/// Maximal-ratio combining of one stream over the receive antennas.
pub fn mrc(h: &[Complex64], y: &[Complex64]) -> Complex64 {
    let energy: f64 = h.iter().map(|v| v.norm_sqr()).sum();
    if energy == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    h.iter()
        .zip(y)
        .map(|(h, y)| h.conj() * y)
        .sum::<Complex64>()
        / energy
}
