//! Two-port Type-2 DMRS: pilot sequence, cyclic-shift phasors, received
//! pilots and LS decoupling.
//!
//! Port 1 sends `x_p` on pilot `p`, port 2 sends `x_p * c_p` with
//! `c_p = exp(j 2 pi p dcs / P)`. After dividing by the pilots the receiver
//! sees `h1 + C h2 + noise` on every antenna.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;

use crate::channel::GridSpec;
use crate::error::{Error, Result};
use crate::numerics::{crandn, RngStream};

const PILOT_MODULUS_TOL: f64 = 1e-9;

/// Pseudo-random unit-modulus QPSK pilot sequence.
pub fn gen_pilots(p: usize, stream: &mut RngStream) -> Result<Vec<Complex64>> {
    if p < 2 || !p.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "two-port DMRS needs an even pilot count >= 2, got {p}"
        )));
    }
    let rng = stream.rng();
    Ok((0..p)
        .map(|_| {
            let re = if rng.random::<bool>() {
                -FRAC_1_SQRT_2
            } else {
                FRAC_1_SQRT_2
            };
            let im = if rng.random::<bool>() {
                -FRAC_1_SQRT_2
            } else {
                FRAC_1_SQRT_2
            };
            Complex64::new(re, im)
        })
        .collect())
}

/// `exp(j 2 pi p dcs / P)`, exact at multiples of a quarter turn.
pub fn cyclic_shift_phasors(p: usize, delta_cs: usize) -> Vec<Complex64> {
    (0..p)
        .map(|i| {
            let k = (i * delta_cs) % p;
            match 4 * k {
                0 => Complex64::new(1.0, 0.0),
                q if q == p => Complex64::new(0.0, 1.0),
                q if q == 2 * p => Complex64::new(-1.0, 0.0),
                q if q == 3 * p => Complex64::new(0.0, -1.0),
                _ => Complex64::from_polar(1.0, 2.0 * PI * k as f64 / p as f64),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PilotGrid {
    pub grid: GridSpec,
    pub x: Vec<Complex64>,
    pub delta_cs: usize,
    pub c: Vec<Complex64>,
    /// OFDM symbol index carrying the DMRS.
    pub q: usize,
}

impl PilotGrid {
    /// Draws the pilot sequence from `stream` and uses the orthogonal shift `dcs = P/2`.
    pub fn new(grid: GridSpec, stream: &mut RngStream) -> Result<Self> {
        let x = gen_pilots(grid.p(), stream)?;
        let delta_cs = grid.p() / 2;
        Self::with_pilots(grid, x, delta_cs)
    }

    pub fn with_pilots(grid: GridSpec, x: Vec<Complex64>, delta_cs: usize) -> Result<Self> {
        let p = grid.p();
        if x.len() != p {
            return Err(Error::Shape(format!(
                "{} pilot symbols for {p} pilot subcarriers",
                x.len()
            )));
        }
        Ok(Self {
            c: cyclic_shift_phasors(p, delta_cs),
            grid,
            x,
            delta_cs,
            q: 0,
        })
    }

    pub fn with_delta_cs(mut self, delta_cs: usize) -> Self {
        self.c = cyclic_shift_phasors(self.p(), delta_cs);
        self.delta_cs = delta_cs;
        self
    }

    pub fn p(&self) -> usize {
        self.x.len()
    }

    pub fn is_half_shift(&self) -> bool {
        self.p().is_multiple_of(2) && 2 * self.delta_cs == self.p()
    }
}

/// LS observation `hhat = X^{-1} y` for one receive antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct LsObservation {
    pub hhat: Vec<Complex64>,
    pub sigma2: f64,
}

/// `y_p = x_p h1_p + x_p c_p h2_p + eta_p` with `eta ~ CN(0, sigma2 I)`.
pub fn received_pilots(
    h1: &[Complex64],
    h2: &[Complex64],
    pg: &PilotGrid,
    sigma2: f64,
    stream: &mut RngStream,
) -> Result<Vec<Complex64>> {
    let p = pg.p();
    if h1.len() != p || h2.len() != p {
        return Err(Error::Shape(format!(
            "channel lengths {}/{} do not match {p} pilots",
            h1.len(),
            h2.len()
        )));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::Config(format!(
            "noise variance must be >= 0, got {sigma2}"
        )));
    }
    let mut y: Vec<Complex64> = (0..p)
        .map(|i| pg.x[i] * (h1[i] + pg.c[i] * h2[i]))
        .collect();
    if sigma2 > 0.0 {
        let std = sigma2.sqrt();
        for (v, n) in y.iter_mut().zip(crandn(p, stream)) {
            *v += n * std;
        }
    }
    Ok(y)
}

pub fn ls_decouple(y: &[Complex64], pg: &PilotGrid, sigma2: f64) -> Result<LsObservation> {
    if y.len() != pg.p() {
        return Err(Error::Shape(format!(
            "{} received pilots for {} pilots",
            y.len(),
            pg.p()
        )));
    }
    if let Some((index, x)) =
        pg.x.iter()
            .enumerate()
            .find(|(_, x)| (x.norm() - 1.0).abs() > PILOT_MODULUS_TOL)
    {
        return Err(Error::InvalidPilot {
            index,
            magnitude: x.norm(),
        });
    }
    Ok(LsObservation {
        hhat: y.iter().zip(&pg.x).map(|(y, x)| y / x).collect(),
        sigma2,
    })
}
