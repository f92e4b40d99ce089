//! Channel estimators for the superposed LS observation `hhat = h1 + C h2 + n`.
//!
//! Free functions evaluate one estimate directly from priors. Sweeps use
//! [`PreparedEstimator`], which folds every data-independent step into
//! cached matrices once per SNR point.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::dmrs::{LsObservation, PilotGrid};
use crate::error::{Error, Result};
use crate::numerics::{idft_matrix, wiener_matrix, Cholesky, ComplexMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Dft,
    Occ,
    FMmse,
    PMmse,
    SinglePortMmse,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Dft,
        EstimatorKind::Occ,
        EstimatorKind::FMmse,
        EstimatorKind::PMmse,
        EstimatorKind::SinglePortMmse,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Dft => "dft",
            EstimatorKind::Occ => "occ",
            EstimatorKind::FMmse => "fmmse",
            EstimatorKind::PMmse => "pmmse",
            EstimatorKind::SinglePortMmse => "spmmse",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown estimator '{s}' (expected dft, occ, fmmse, pmmse or spmmse)"
                ))
            })
    }
}

/// Noise variance used by the OCC Wiener stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OccNoise {
    /// `sigma^2 / 2`, the variance left after pairwise averaging.
    #[default]
    Halved,
    /// The unhalved `sigma^2`.
    Literal,
}

/// Prior covariances on the pilot grid. `r2` is `None` when the other
/// port's statistics are unknown (or the port is silent).
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    pub r1: ComplexMatrix,
    pub r2: Option<ComplexMatrix>,
    pub sigma2: f64,
}

impl CovarianceSet {
    pub fn new(r1: ComplexMatrix, r2: Option<ComplexMatrix>, sigma2: f64) -> Self {
        Self { r1, r2, sigma2 }
    }

    /// Restriction to the even pilot positions `0, 2, ..., P-2`.
    pub fn even_subgrid(&self) -> Self {
        Self {
            r1: even_subgrid(&self.r1),
            r2: self.r2.as_ref().map(even_subgrid),
            sigma2: self.sigma2,
        }
    }

    fn r2_or_zero(&self) -> ComplexMatrix {
        self.r2
            .clone()
            .unwrap_or_else(|| ComplexMatrix::zeros(self.r1.rows(), self.r1.cols()))
    }
}

fn even_subgrid(r: &ComplexMatrix) -> ComplexMatrix {
    let half = r.rows() / 2;
    ComplexMatrix::from_fn(half, half, |m, n| r[(2 * m, 2 * n)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortEstimates {
    pub h1_hat: Vec<Complex64>,
    pub h2_hat: Vec<Complex64>,
    pub estimator: EstimatorKind,
}

fn conj_all(c: &[Complex64]) -> Vec<Complex64> {
    c.iter().map(|v| v.conj()).collect()
}

fn check_len(obs: &LsObservation, pg: &PilotGrid) -> Result<()> {
    if obs.hhat.len() != pg.p() {
        return Err(Error::Shape(format!(
            "observation length {} does not match {} pilots",
            obs.hhat.len(),
            pg.p()
        )));
    }
    Ok(())
}

/// Time-domain gating estimator.
#[derive(Debug, Clone)]
pub struct DftEstimator {
    idft: ComplexMatrix,
    dft: ComplexMatrix,
    shift: usize,
}

impl DftEstimator {
    pub fn new(pg: &PilotGrid) -> Result<Self> {
        let p = pg.p();
        if !p.is_multiple_of(2) {
            return Err(Error::Unsupported(format!(
                "DFT gating needs an even pilot count, got {p}"
            )));
        }
        let idft = idft_matrix(p)?;
        Ok(Self {
            dft: idft.adjoint(),
            idft,
            shift: pg.delta_cs % p,
        })
    }

    pub fn estimate(&self, hhat: &[Complex64]) -> PortEstimates {
        let p = hhat.len();
        let half = p / 2;
        let u = self.idft.matvec(hhat);
        // port 1 keeps [0, P/2); port 2 owns [P/2, P), rotated back by the cyclic shift
        let mut g1 = vec![Complex64::new(0.0, 0.0); p];
        g1[..half].copy_from_slice(&u[..half]);
        let mut g2 = vec![Complex64::new(0.0, 0.0); p];
        for k in 0..p {
            let src = (k + p - self.shift) % p;
            if src >= half {
                g2[k] = u[src];
            }
        }
        PortEstimates {
            h1_hat: self.dft.matvec(&g1),
            h2_hat: self.dft.matvec(&g2),
            estimator: EstimatorKind::Dft,
        }
    }
}

pub fn dft_estimate(obs: &LsObservation, pg: &PilotGrid) -> Result<PortEstimates> {
    check_len(obs, pg)?;
    Ok(DftEstimator::new(pg)?.estimate(&obs.hhat))
}

/// Pairwise OCC despreading: `((a+b)/2, (a-b)/2)` over adjacent pilot pairs.
pub fn occ_combine(hhat: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    hhat.chunks_exact(2)
        .map(|pair| ((pair[0] + pair[1]) * 0.5, (pair[0] - pair[1]) * 0.5))
        .unzip()
}

fn duplicate_to_odd(v: &[Complex64]) -> Vec<Complex64> {
    v.iter().flat_map(|&x| [x, x]).collect()
}

/// OCC despreading followed by a half-size Wiener filter per port.
#[derive(Debug, Clone)]
pub struct OccEstimator {
    // None when the effective noise is zero: despreading output is used as-is
    w1: Option<ComplexMatrix>,
    w2: Option<ComplexMatrix>,
}

impl OccEstimator {
    /// `cov_even` must already be restricted to the even pilot sub-grid.
    pub fn new(cov_even: &CovarianceSet, pg: &PilotGrid, noise: OccNoise) -> Result<Self> {
        if !pg.is_half_shift() {
            return Err(Error::Unsupported(format!(
                "OCC despreading needs even P and dcs = P/2 (P = {}, dcs = {})",
                pg.p(),
                pg.delta_cs
            )));
        }
        let half = pg.p() / 2;
        if cov_even.r1.rows() != half || cov_even.r2.as_ref().is_some_and(|r| r.rows() != half) {
            return Err(Error::Shape(format!("OCC priors must be {half}x{half}")));
        }
        let sigma2 = match noise {
            OccNoise::Halved => cov_even.sigma2 / 2.0,
            OccNoise::Literal => cov_even.sigma2,
        };
        if sigma2 == 0.0 {
            return Ok(Self { w1: None, w2: None });
        }
        let filter = |r: &ComplexMatrix| wiener_matrix(r, &r.add_diagonal(sigma2));
        let w1 = filter(&cov_even.r1)?;
        // a user without the other port's prior falls back to its own
        let w2 = filter(cov_even.r2.as_ref().unwrap_or(&cov_even.r1))?;
        Ok(Self {
            w1: Some(w1),
            w2: Some(w2),
        })
    }

    pub fn estimate(&self, hhat: &[Complex64]) -> PortEstimates {
        let (e1, e2) = occ_combine(hhat);
        let f1 = self.w1.as_ref().map_or(e1.clone(), |w| w.matvec(&e1));
        let f2 = self.w2.as_ref().map_or(e2.clone(), |w| w.matvec(&e2));
        PortEstimates {
            h1_hat: duplicate_to_odd(&f1),
            h2_hat: duplicate_to_odd(&f2),
            estimator: EstimatorKind::Occ,
        }
    }
}

pub fn occ_mmse_estimate(
    obs: &LsObservation,
    cov_even: &CovarianceSet,
    pg: &PilotGrid,
    noise: OccNoise,
) -> Result<PortEstimates> {
    check_len(obs, pg)?;
    Ok(OccEstimator::new(cov_even, pg, noise)?.estimate(&obs.hhat))
}

/// `own (own + other_seen + sigma2 I)^{-1} hhat`, solved without an inverse.
fn mmse_apply(
    own: &ComplexMatrix,
    other_seen: Option<&ComplexMatrix>,
    sigma2: f64,
    hhat: &[Complex64],
) -> Result<Vec<Complex64>> {
    let mut total = own.add_diagonal(sigma2);
    if let Some(o) = other_seen {
        total = &total + o;
    }
    let x = Cholesky::new(&total)?.solve_vec(hhat)?;
    Ok(own.matvec(&x))
}

/// Port-1 estimate using the true covariances of both ports.
pub fn f_mmse(obs: &LsObservation, cov: &CovarianceSet, pg: &PilotGrid) -> Result<Vec<Complex64>> {
    check_len(obs, pg)?;
    let r2 = cov.r2_or_zero();
    mmse_apply(
        &cov.r1,
        Some(&r2.diag_sandwich(&pg.c)),
        cov.sigma2,
        &obs.hhat,
    )
}

/// Port-2 estimate by symmetry: rotate by `C^H` and swap the priors.
pub fn f_mmse_port2(
    obs: &LsObservation,
    cov: &CovarianceSet,
    pg: &PilotGrid,
) -> Result<Vec<Complex64>> {
    check_len(obs, pg)?;
    let r2 = cov
        .r2
        .as_ref()
        .ok_or_else(|| Error::Config("port-2 estimate needs the port-2 prior".into()))?;
    let cc = conj_all(&pg.c);
    let rotated: Vec<Complex64> = obs.hhat.iter().zip(&cc).map(|(h, c)| h * c).collect();
    mmse_apply(r2, Some(&cov.r1.diag_sandwich(&cc)), cov.sigma2, &rotated)
}

/// Port-1 estimate assuming the other port shares this port's covariance.
pub fn p_mmse(obs: &LsObservation, cov: &CovarianceSet, pg: &PilotGrid) -> Result<Vec<Complex64>> {
    check_len(obs, pg)?;
    mmse_apply(
        &cov.r1,
        Some(&cov.r1.diag_sandwich(&pg.c)),
        cov.sigma2,
        &obs.hhat,
    )
}

/// Port-1 estimate that ignores the second port entirely.
pub fn single_port_mmse(
    obs: &LsObservation,
    r1: &ComplexMatrix,
    sigma2: f64,
) -> Result<Vec<Complex64>> {
    if obs.hhat.len() != r1.rows() {
        return Err(Error::Shape("observation and prior sizes differ".into()));
    }
    mmse_apply(r1, None, sigma2, &obs.hhat)
}

/// Filter matrix `own (own + other_seen + sigma2 I)^{-1}`.
pub fn mmse_filter(
    own: &ComplexMatrix,
    other_seen: Option<&ComplexMatrix>,
    sigma2: f64,
) -> Result<ComplexMatrix> {
    let mut total = own.add_diagonal(sigma2);
    if let Some(o) = other_seen {
        total = &total + o;
    }
    wiener_matrix(own, &total)
}

/// True channel statistics of the scenario (`r2 = None` for a silent port 2).
#[derive(Debug, Clone)]
pub struct Priors {
    pub r1: ComplexMatrix,
    pub r2: Option<ComplexMatrix>,
}

/// An estimator with every data-independent quantity precomputed.
#[derive(Debug, Clone)]
pub enum PreparedEstimator {
    Linear {
        kind: EstimatorKind,
        port1: ComplexMatrix,
        /// Already includes the `C^H` de-rotation, so it acts on `hhat` directly.
        port2: ComplexMatrix,
    },
    Dft(DftEstimator),
    Occ(OccEstimator),
}

impl PreparedEstimator {
    pub fn new(
        kind: EstimatorKind,
        priors: &Priors,
        pg: &PilotGrid,
        sigma2: f64,
        occ_noise: OccNoise,
    ) -> Result<Self> {
        let c = &pg.c;
        let cc = conj_all(c);
        let r1 = &priors.r1;
        // port 2 without a prior (silent) still gets a well-defined filter
        let r2 = priors.r2.as_ref().unwrap_or(r1);
        let derotate = |w: ComplexMatrix| {
            let p = w.cols();
            ComplexMatrix::from_fn(w.rows(), p, |m, n| w[(m, n)] * cc[n])
        };
        match kind {
            EstimatorKind::Dft => Ok(Self::Dft(DftEstimator::new(pg)?)),
            EstimatorKind::Occ => {
                let cov = CovarianceSet::new(r1.clone(), priors.r2.clone(), sigma2).even_subgrid();
                Ok(Self::Occ(OccEstimator::new(&cov, pg, occ_noise)?))
            }
            EstimatorKind::FMmse => {
                let zero = ComplexMatrix::zeros(r1.rows(), r1.cols());
                let seen2 = priors.r2.as_ref().unwrap_or(&zero).diag_sandwich(c);
                let port1 = mmse_filter(r1, Some(&seen2), sigma2)?;
                let port2 = mmse_filter(r2, Some(&r1.diag_sandwich(&cc)), sigma2)?;
                Ok(Self::Linear {
                    kind,
                    port1,
                    port2: derotate(port2),
                })
            }
            EstimatorKind::PMmse => {
                let port1 = mmse_filter(r1, Some(&r1.diag_sandwich(c)), sigma2)?;
                let port2 = mmse_filter(r2, Some(&r2.diag_sandwich(&cc)), sigma2)?;
                Ok(Self::Linear {
                    kind,
                    port1,
                    port2: derotate(port2),
                })
            }
            EstimatorKind::SinglePortMmse => {
                let port1 = mmse_filter(r1, None, sigma2)?;
                let port2 = mmse_filter(r2, None, sigma2)?;
                Ok(Self::Linear {
                    kind,
                    port1,
                    port2: derotate(port2),
                })
            }
        }
    }

    pub fn kind(&self) -> EstimatorKind {
        match self {
            Self::Linear { kind, .. } => *kind,
            Self::Dft(_) => EstimatorKind::Dft,
            Self::Occ(_) => EstimatorKind::Occ,
        }
    }

    pub fn estimate(&self, hhat: &[Complex64]) -> PortEstimates {
        match self {
            Self::Linear { kind, port1, port2 } => PortEstimates {
                h1_hat: port1.matvec(hhat),
                h2_hat: port2.matvec(hhat),
                estimator: *kind,
            },
            Self::Dft(d) => d.estimate(hhat),
            Self::Occ(o) => o.estimate(hhat),
        }
    }
}
