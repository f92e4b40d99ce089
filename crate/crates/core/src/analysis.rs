//! Closed-form MSE of the linear MMSE-family estimators and time-domain
//! coefficient-matrix diagnostics.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimators::mmse_filter;
use crate::numerics::{idft_matrix, ComplexMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    FMmse,
    PMmse,
    SinglePort,
}

/// A linear estimator `hhat -> W hhat` for port 1.
#[derive(Debug, Clone)]
pub struct FilterMatrix {
    pub w: ComplexMatrix,
    pub kind: FilterKind,
}

impl FilterMatrix {
    pub fn new(
        kind: FilterKind,
        r1: &ComplexMatrix,
        r2: &ComplexMatrix,
        c: &[Complex64],
        sigma2: f64,
    ) -> Result<Self> {
        let w = match kind {
            FilterKind::FMmse => mmse_filter(r1, Some(&r2.diag_sandwich(c)), sigma2)?,
            FilterKind::PMmse => mmse_filter(r1, Some(&r1.diag_sandwich(c)), sigma2)?,
            FilterKind::SinglePort => mmse_filter(r1, None, sigma2)?,
        };
        Ok(Self { w, kind })
    }
}

/// Total MSE `E||W hhat - h1||^2` for `hhat = h1 + C h2 + n` with the
/// true statistics `(r1, r2, sigma2)`:
/// `Tr{W R1 W^H + W C R2 C^H W^H + sigma2 W W^H - W R1 - R1 W^H + R1}`.
pub fn filter_mse(
    w: &ComplexMatrix,
    r1: &ComplexMatrix,
    r2: &ComplexMatrix,
    c: &[Complex64],
    sigma2: f64,
) -> f64 {
    let wh = w.adjoint();
    let seen = &(r1 + &r2.diag_sandwich(c)).add_diagonal(sigma2);
    let quad = &(w * seen) * &wh;
    let cross = w * r1;
    let total = quad.trace() - cross.trace() - cross.trace().conj() + r1.trace();
    total.re
}

fn check_inputs(
    r1: &ComplexMatrix,
    r2: &ComplexMatrix,
    c: &[Complex64],
    sigma2: f64,
) -> Result<()> {
    let p = r1.rows();
    if !r1.is_square() || r2.rows() != p || r2.cols() != p || c.len() != p {
        return Err(Error::Shape(format!(
            "priors {}x{} / {}x{} and {} phasors are inconsistent",
            r1.rows(),
            r1.cols(),
            r2.rows(),
            r2.cols(),
            c.len()
        )));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::Config(format!(
            "noise variance must be >= 0, got {sigma2}"
        )));
    }
    Ok(())
}

/// MSE of the full-prior filter `A = R1 (R1 + C R2 C^H + sigma2 I)^{-1}`.
pub fn analytic_mse_f(
    r1: &ComplexMatrix,
    r2: &ComplexMatrix,
    c: &[Complex64],
    sigma2: f64,
) -> Result<f64> {
    check_inputs(r1, r2, c, sigma2)?;
    let a = FilterMatrix::new(FilterKind::FMmse, r1, r2, c, sigma2)?;
    Ok(filter_mse(&a.w, r1, r2, c, sigma2))
}

/// MSE of the partial-prior filter `B = R1 (R1 + C R1 C^H + sigma2 I)^{-1}`
/// when the other port really has covariance `r2`.
pub fn analytic_mse_p(
    r1: &ComplexMatrix,
    r2: &ComplexMatrix,
    c: &[Complex64],
    sigma2: f64,
) -> Result<f64> {
    check_inputs(r1, r2, c, sigma2)?;
    let b = FilterMatrix::new(FilterKind::PMmse, r1, r2, c, sigma2)?;
    Ok(filter_mse(&b.w, r1, r2, c, sigma2))
}

/// MSE of the single-port filter `R1 (R1 + sigma2 I)^{-1}` with port 2 present as `r2`.
pub fn analytic_mse_single(
    r1: &ComplexMatrix,
    r2: &ComplexMatrix,
    c: &[Complex64],
    sigma2: f64,
) -> Result<f64> {
    check_inputs(r1, r2, c, sigma2)?;
    let w = FilterMatrix::new(FilterKind::SinglePort, r1, r2, c, sigma2)?;
    Ok(filter_mse(&w.w, r1, r2, c, sigma2))
}

/// Time-domain coefficient matrix `F Rnum (Rnum + C Rden2 C^H + sigma2 I)^{-1} F^H`.
///
/// With `rden2 = rnum` this is the partial-prior matrix; with the true port-2
/// covariance it is the full-prior one.
pub fn build_phi(
    rnum: &ComplexMatrix,
    rden2: &ComplexMatrix,
    c: &[Complex64],
    sigma2: f64,
) -> Result<ComplexMatrix> {
    check_inputs(rnum, rden2, c, sigma2)?;
    let f = idft_matrix(rnum.rows())?;
    let w = mmse_filter(rnum, Some(&rden2.diag_sandwich(c)), sigma2)?;
    Ok(&(&f * &w) * &f.adjoint())
}

pub fn diag_magnitudes(phi: &ComplexMatrix) -> Result<Vec<f64>> {
    if !phi.is_square() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            phi.rows(),
            phi.cols()
        )));
    }
    Ok(phi.diagonal().iter().map(|v| v.norm()).collect())
}

/// `index magnitude` lines for external plotting.
pub fn diag_to_text(label: &str, mags: &[f64]) -> String {
    let mut out = format!("# {label}\n# index magnitude\n");
    for (i, m) in mags.iter().enumerate() {
        out.push_str(&format!("{i} {m:.9e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{covariance, exp_pdp, GridSpec, PowerDelayProfile};
    use crate::dmrs::cyclic_shift_phasors;

    fn scalar(v: f64) -> ComplexMatrix {
        ComplexMatrix::from_vec(1, 1, vec![Complex64::new(v, 0.0)]).unwrap()
    }

    fn one() -> Vec<Complex64> {
        vec![Complex64::new(1.0, 0.0)]
    }

    #[test]
    fn scalar_mse_is_two_thirds() {
        let mse = analytic_mse_f(&scalar(1.0), &scalar(1.0), &one(), 1.0).unwrap();
        assert!((mse - 2.0 / 3.0).abs() < 1e-15, "{mse}");
        let p = analytic_mse_p(&scalar(1.0), &scalar(1.0), &one(), 1.0).unwrap();
        assert_eq!(mse, p);
    }

    #[test]
    fn noiseless_single_port_mse_vanishes() {
        let grid = GridSpec::comb(64, 8, 0).unwrap();
        let r1 = covariance(&exp_pdp(-0.2, 30).unwrap(), &grid);
        let zero = ComplexMatrix::zeros(8, 8);
        let c = cyclic_shift_phasors(8, 4);
        let mse = analytic_mse_f(&r1, &zero, &c, 1e-12).unwrap();
        assert!(mse < 1e-9, "{mse}");
    }

    #[test]
    fn p_equals_f_when_priors_match() {
        let grid = GridSpec::comb(256, 32, 0).unwrap();
        let r = covariance(&exp_pdp(-0.05, 20).unwrap(), &grid);
        let c = cyclic_shift_phasors(32, 16);
        assert_eq!(
            analytic_mse_f(&r, &r, &c, 0.1).unwrap(),
            analytic_mse_p(&r, &r, &c, 0.1).unwrap()
        );
    }

    #[test]
    fn phi_rank_one_concentrates_at_zero() {
        let grid = GridSpec::comb(64, 16, 0).unwrap();
        let r = covariance(
            &PowerDelayProfile::from_taps("d0", vec![(0, 1.0)]).unwrap(),
            &grid,
        );
        let c = cyclic_shift_phasors(16, 8);
        let phi = build_phi(&r, &r, &c, 1e-3).unwrap();
        let d = diag_magnitudes(&phi).unwrap();
        let argmax = d
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 0);
        assert!(d[0] > 0.99);
        assert!(d[1..].iter().all(|&v| v < 1e-3));
    }

    #[test]
    fn phi_vanishes_for_huge_noise() {
        let grid = GridSpec::comb(64, 16, 0).unwrap();
        let r = covariance(&exp_pdp(-0.1, 10).unwrap(), &grid);
        let c = cyclic_shift_phasors(16, 8);
        let phi = build_phi(&r, &r, &c, 1e9).unwrap();
        assert!(phi.frobenius_norm() < 1e-7);
    }

    #[test]
    fn diag_magnitude_basics() {
        assert_eq!(
            diag_magnitudes(&ComplexMatrix::identity(4)).unwrap(),
            vec![1.0; 4]
        );
        assert_eq!(
            diag_magnitudes(&ComplexMatrix::zeros(3, 3)).unwrap(),
            vec![0.0; 3]
        );
        assert!(matches!(
            diag_magnitudes(&ComplexMatrix::zeros(2, 3)),
            Err(Error::Shape(_))
        ));
        let text = diag_to_text("x", &[1.0, 0.5]);
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn mse_bounded_by_prior_trace() {
        let grid = GridSpec::comb(256, 24, 0).unwrap();
        let c = cyclic_shift_phasors(24, 12);
        let r1 = covariance(&exp_pdp(-0.01, 25).unwrap(), &grid);
        let r2 = covariance(&exp_pdp(-0.3, 40).unwrap(), &grid);
        for sigma2 in [1.0, 0.1, 0.001] {
            let f = analytic_mse_f(&r1, &r2, &c, sigma2).unwrap();
            let p = analytic_mse_p(&r1, &r2, &c, sigma2).unwrap();
            assert!(f <= p + 1e-12);
            assert!(p <= r1.trace().re);
        }
    }
}
