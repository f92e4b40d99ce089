//! Monte-Carlo MSE and BER sweeps.
//!
//! Each trial owns a stream derived from `(seed, trial)`, so results do not
//! depend on scheduling. Trials are summed in fixed-size chunks and the
//! chunk sums are folded in index order, which keeps the floating-point
//! reduction identical for any worker count.

pub mod config;
pub mod modem;
pub mod report;

use num_complex::Complex64;
use rand::Rng;

use crate::analysis::{analytic_mse_f, analytic_mse_p, analytic_mse_single};
use crate::channel::{
    covariance, ChannelRealization, PowerDelayProfile, ResponseMap, NUM_PORTS, NUM_RX,
};
use crate::dmrs::{ls_decouple, received_pilots, PilotGrid};
use crate::error::Result;
use crate::estimators::{EstimatorKind, PortEstimates, PreparedEstimator, Priors};
use crate::numerics::{crandn, ComplexMatrix, RngStream};
use crate::par;

pub use config::{ChannelSpec, ScenarioConfig, Settings};
pub use modem::{equalize_2x2, mrc, qpsk_demod, qpsk_mod};
pub use report::{read_report, write_report, SweepReport, SweepRow};

const TAG_PILOTS: u64 = 0x5049_4c4f;
const TAG_TRIAL: u64 = 0x5452_4941;
const TAG_CHANNEL: u64 = 1;
const TAG_PILOT_NOISE: u64 = 2;
const TAG_DATA: u64 = 3;

const CHUNK: usize = 32;

/// Per-link pilot-grid vectors indexed `[port][rx]`.
pub type Links = [[Vec<Complex64>; NUM_RX]; NUM_PORTS];

pub fn snr_to_sigma2(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// A scenario with profiles, priors and the pilot sequence resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub pg: PilotGrid,
    pub pdps: [Option<PowerDelayProfile>; NUM_PORTS],
    maps: [Option<ResponseMap>; NUM_PORTS],
    pub priors: Priors,
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid.clone();
        let mut pilot_stream = RngStream::new(cfg.seed).derive(&[TAG_PILOTS]);
        let mut pg = PilotGrid::new(grid.clone(), &mut pilot_stream)?;
        if let Some(d) = cfg.delta_cs {
            pg = pg.with_delta_cs(d);
        }
        let pdps = [cfg.channel1.to_pdp(&grid)?, cfg.channel2.to_pdp(&grid)?];
        let maps = [
            pdps[0]
                .as_ref()
                .map(|p| ResponseMap::new(p, &grid))
                .transpose()?,
            pdps[1]
                .as_ref()
                .map(|p| ResponseMap::new(p, &grid))
                .transpose()?,
        ];
        let r1 = covariance(pdps[0].as_ref().expect("validated: port 1 active"), &grid);
        let r2 = pdps[1].as_ref().map(|p| covariance(p, &grid));
        Ok(Self {
            cfg,
            pg,
            pdps,
            maps,
            priors: Priors { r1, r2 },
        })
    }

    pub fn port2_active(&self) -> bool {
        self.pdps[1].is_some()
    }

    fn active_ports(&self) -> usize {
        if self.port2_active() {
            2
        } else {
            1
        }
    }

    fn trial_stream(&self, trial: u64) -> RngStream {
        RngStream::new(self.cfg.seed).derive(&[TAG_TRIAL, trial])
    }

    /// Channel realization of `trial` and its pilot-grid responses.
    pub fn draw_channel(&self, trial: u64) -> (ChannelRealization, Links) {
        let stream = self.trial_stream(trial).derive(&[TAG_CHANNEL]);
        let real =
            ChannelRealization::draw([self.pdps[0].as_ref(), self.pdps[1].as_ref()], &stream);
        let h = real.responses([self.maps[0].as_ref(), self.maps[1].as_ref()], self.pg.p());
        (real, h)
    }

    /// LS observations on every receive antenna.
    pub fn observe(
        &self,
        h: &Links,
        sigma2: f64,
        stream: &RngStream,
    ) -> Result<[Vec<Complex64>; NUM_RX]> {
        let mut out: [Vec<Complex64>; NUM_RX] = Default::default();
        for (r, slot) in out.iter_mut().enumerate() {
            let y = received_pilots(
                &h[0][r],
                &h[1][r],
                &self.pg,
                sigma2,
                &mut stream.derive(&[r as u64]),
            )?;
            *slot = ls_decouple(&y, &self.pg, sigma2)?.hhat;
        }
        Ok(out)
    }

    /// Closed-form MSE per port for the MMSE-family estimators.
    pub fn analytic_mse(
        &self,
        kind: EstimatorKind,
        sigma2: f64,
    ) -> Result<[Option<f64>; NUM_PORTS]> {
        let f = match kind {
            EstimatorKind::FMmse => analytic_mse_f,
            EstimatorKind::PMmse => analytic_mse_p,
            EstimatorKind::SinglePortMmse => analytic_mse_single,
            EstimatorKind::Dft | EstimatorKind::Occ => return Ok([None, None]),
        };
        let r1 = &self.priors.r1;
        let c = &self.pg.c;
        match &self.priors.r2 {
            Some(r2) => {
                let cc: Vec<Complex64> = c.iter().map(|v| v.conj()).collect();
                Ok([Some(f(r1, r2, c, sigma2)?), Some(f(r2, r1, &cc, sigma2)?)])
            }
            None => {
                let zero = ComplexMatrix::zeros(r1.rows(), r1.cols());
                Ok([Some(f(r1, &zero, c, sigma2)?), None])
            }
        }
    }
}

/// Data bits and received samples of one slot, shared by all estimators.
#[derive(Debug, Clone)]
pub struct SlotData {
    bits: Vec<[Vec<u8>; NUM_PORTS]>,
    received: Vec<[Vec<Complex64>; NUM_RX]>,
    port2_active: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SlotErrors {
    pub bit_errors: [u64; NUM_PORTS],
    pub bits: [u64; NUM_PORTS],
}

impl SlotData {
    /// QPSK data on every pilot subcarrier for `data_symbols` OFDM symbols,
    /// through the same block-static channel `h`.
    pub fn draw(
        h: &Links,
        port2_active: bool,
        sigma2: f64,
        data_symbols: usize,
        stream: &RngStream,
    ) -> Result<Self> {
        let p = h[0][0].len();
        let mut bits = Vec::with_capacity(data_symbols);
        let mut received = Vec::with_capacity(data_symbols);
        for n in 0..data_symbols {
            let mut sym_bits: [Vec<u8>; NUM_PORTS] = Default::default();
            let mut tx: [Vec<Complex64>; NUM_PORTS] = Default::default();
            for t in 0..NUM_PORTS {
                if t == 1 && !port2_active {
                    tx[t] = vec![Complex64::new(0.0, 0.0); p];
                    continue;
                }
                let mut s = stream.derive(&[0, n as u64, t as u64]);
                sym_bits[t] = (0..2 * p)
                    .map(|_| u8::from(s.rng().random::<bool>()))
                    .collect();
                tx[t] = qpsk_mod(&sym_bits[t])?;
            }
            let std = sigma2.sqrt();
            let rx: [Vec<Complex64>; NUM_RX] = std::array::from_fn(|r| {
                let noise = crandn(p, &mut stream.derive(&[1, n as u64, r as u64]));
                (0..p)
                    .map(|k| h[0][r][k] * tx[0][k] + h[1][r][k] * tx[1][k] + noise[k] * std)
                    .collect()
            });
            bits.push(sym_bits);
            received.push(rx);
        }
        Ok(Self {
            bits,
            received,
            port2_active,
        })
    }

    /// Equalizes with the estimated channel and counts bit errors per stream.
    pub fn count_errors(&self, h_est: &Links) -> SlotErrors {
        let mut out = SlotErrors::default();
        let p = h_est[0][0].len();
        for (bits, rx) in self.bits.iter().zip(&self.received) {
            let mut decided: [Vec<Complex64>; NUM_PORTS] = Default::default();
            for k in 0..p {
                let y = [rx[0][k], rx[1][k]];
                if self.port2_active {
                    let hm = [
                        [h_est[0][0][k], h_est[1][0][k]],
                        [h_est[0][1][k], h_est[1][1][k]],
                    ];
                    let s = equalize_2x2(&hm, y);
                    decided[0].push(s[0]);
                    decided[1].push(s[1]);
                } else {
                    decided[0].push(mrc(&[h_est[0][0][k], h_est[0][1][k]], &y));
                }
            }
            for t in 0..NUM_PORTS {
                if bits[t].is_empty() {
                    continue;
                }
                let hard = qpsk_demod(&decided[t]);
                out.bit_errors[t] +=
                    hard.iter().zip(&bits[t]).filter(|(a, b)| a != b).count() as u64;
                out.bits[t] += bits[t].len() as u64;
            }
        }
        out
    }
}

/// Sums for one (SNR, estimator) cell.
#[derive(Debug, Clone, Copy, Default)]
struct Cell {
    sq_err: [f64; NUM_PORTS],
    bit_errors: [u64; NUM_PORTS],
    bits: [u64; NUM_PORTS],
}

impl Cell {
    fn add(&mut self, o: &Cell) {
        for t in 0..NUM_PORTS {
            self.sq_err[t] += o.sq_err[t];
            self.bit_errors[t] += o.bit_errors[t];
            self.bits[t] += o.bits[t];
        }
    }
}

struct Point {
    snr_db: f64,
    sigma2: f64,
    estimators: Vec<(
        EstimatorKind,
        std::result::Result<PreparedEstimator, String>,
    )>,
}

fn sq_dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

fn run_trial(scn: &Scenario, points: &[Point], trial: u64, with_data: bool) -> Result<Vec<Cell>> {
    let n_est = scn.cfg.estimators.len();
    let mut cells = vec![Cell::default(); points.len() * n_est];
    let (_, h) = scn.draw_channel(trial);
    let stream = scn.trial_stream(trial);
    let ports = scn.active_ports();
    for (si, pt) in points.iter().enumerate() {
        // keyed by the SNR value so a point does not depend on the rest of the list
        let snr_key = pt.snr_db.to_bits();
        let hhat = scn.observe(&h, pt.sigma2, &stream.derive(&[TAG_PILOT_NOISE, snr_key]))?;
        let slot = if with_data {
            Some(SlotData::draw(
                &h,
                scn.port2_active(),
                pt.sigma2,
                scn.cfg.data_symbols,
                &stream.derive(&[TAG_DATA, snr_key]),
            )?)
        } else {
            None
        };
        for (ei, (_, prepared)) in pt.estimators.iter().enumerate() {
            let Ok(est) = prepared else { continue };
            let cell = &mut cells[si * n_est + ei];
            let per_rx: Vec<PortEstimates> = hhat.iter().map(|o| est.estimate(o)).collect();
            for (r, e) in per_rx.iter().enumerate() {
                cell.sq_err[0] += sq_dist(&e.h1_hat, &h[0][r]);
                if ports == 2 {
                    cell.sq_err[1] += sq_dist(&e.h2_hat, &h[1][r]);
                }
            }
            if let Some(slot) = &slot {
                let h_est: Links = [
                    std::array::from_fn(|r| per_rx[r].h1_hat.clone()),
                    std::array::from_fn(|r| per_rx[r].h2_hat.clone()),
                ];
                let errs = slot.count_errors(&h_est);
                cell.bit_errors = errs.bit_errors;
                cell.bits = errs.bits;
            }
        }
    }
    Ok(cells)
}

fn prepare_points(scn: &Scenario) -> Vec<Point> {
    scn.cfg
        .snr_db
        .iter()
        .map(|&snr_db| {
            let sigma2 = snr_to_sigma2(snr_db);
            let estimators = scn
                .cfg
                .estimators
                .iter()
                .map(|&k| {
                    let prepared =
                        PreparedEstimator::new(k, &scn.priors, &scn.pg, sigma2, scn.cfg.occ_noise)
                            .map_err(|e| e.to_string());
                    (k, prepared)
                })
                .collect();
            Point {
                snr_db,
                sigma2,
                estimators,
            }
        })
        .collect()
}

fn accumulate(scn: &Scenario, points: &[Point], with_data: bool) -> Result<Vec<Cell>> {
    let trials = scn.cfg.trials as usize;
    let n_chunks = trials.div_ceil(CHUNK);
    let chunk_sums = par::install(scn.cfg.threads, || {
        par::map_indexed(n_chunks, |c| -> Result<Vec<Cell>> {
            let mut sum = vec![Cell::default(); points.len() * scn.cfg.estimators.len()];
            for trial in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                for (s, t) in sum
                    .iter_mut()
                    .zip(run_trial(scn, points, trial as u64, with_data)?)
                {
                    s.add(&t);
                }
            }
            Ok(sum)
        })
    });
    let mut total = vec![Cell::default(); points.len() * scn.cfg.estimators.len()];
    for chunk in chunk_sums {
        for (s, t) in total.iter_mut().zip(chunk?) {
            s.add(&t);
        }
    }
    Ok(total)
}

fn build_report(scn: &Scenario, points: &[Point], cells: &[Cell], with_data: bool) -> SweepReport {
    let cfg = &scn.cfg;
    let ports = scn.active_ports();
    let n_est = cfg.estimators.len();
    let denom = (cfg.trials * NUM_RX as u64) as f64;
    let mut rows = Vec::new();
    for (si, pt) in points.iter().enumerate() {
        for (ei, (kind, prepared)) in pt.estimators.iter().enumerate() {
            let label = kind.label();
            if let Err(reason) = prepared {
                rows.push(SweepRow::failed(
                    pt.snr_db,
                    label,
                    cfg.trials,
                    cfg.seed,
                    reason.clone(),
                ));
                continue;
            }
            let cell = &cells[si * n_est + ei];
            let analytic = match scn.analytic_mse(*kind, pt.sigma2) {
                Ok(a) => a,
                Err(e) => {
                    rows.push(SweepRow::failed(
                        pt.snr_db,
                        label,
                        cfg.trials,
                        cfg.seed,
                        e.to_string(),
                    ));
                    continue;
                }
            };
            let port_row = |t: usize, name: String| SweepRow {
                snr_db: pt.snr_db,
                estimator: name,
                empirical_mse: Some(cell.sq_err[t] / denom),
                analytic_mse: analytic[t],
                ber: with_data.then(|| cell.bit_errors[t] as f64 / cell.bits[t].max(1) as f64),
                bits_counted: with_data.then_some(cell.bits[t]),
                trials: cfg.trials,
                seed: cfg.seed,
                failed: None,
            };
            if ports == 1 {
                rows.push(port_row(0, label.to_string()));
                continue;
            }
            let p1 = port_row(0, format!("{label}.port1"));
            let p2 = port_row(1, format!("{label}.port2"));
            let bits = cell.bits[0] + cell.bits[1];
            rows.push(SweepRow {
                snr_db: pt.snr_db,
                estimator: label.to_string(),
                empirical_mse: Some((cell.sq_err[0] + cell.sq_err[1]) / (2.0 * denom)),
                analytic_mse: analytic[0].zip(analytic[1]).map(|(a, b)| (a + b) / 2.0),
                ber: with_data
                    .then(|| (cell.bit_errors[0] + cell.bit_errors[1]) as f64 / bits.max(1) as f64),
                bits_counted: with_data.then_some(bits),
                trials: cfg.trials,
                seed: cfg.seed,
                failed: None,
            });
            rows.push(p1);
            rows.push(p2);
        }
    }
    let mut report = SweepReport { rows };
    report.sort();
    report
}

fn run(cfg: &ScenarioConfig, with_data: bool) -> Result<SweepReport> {
    let scn = Scenario::new(cfg.clone())?;
    let points = prepare_points(&scn);
    let cells = accumulate(&scn, &points, with_data)?;
    Ok(build_report(&scn, &points, &cells, with_data))
}

/// Empirical `E||h - hhat||^2` per (SNR, estimator), averaged over trials and
/// receive antennas, next to the closed-form value where one exists.
///
/// With both ports active each estimator gets an aggregate row (mean of the
/// two ports) plus `<label>.port1` / `<label>.port2` rows.
pub fn run_mse_sweep(cfg: &ScenarioConfig) -> Result<SweepReport> {
    run(cfg, false)
}

/// Like [`run_mse_sweep`], additionally sending `data_symbols` QPSK symbols
/// per trial and counting hard-decision bit errors after equalization with
/// each estimate. A silent port 2 switches to single-stream MRC.
pub fn run_ber_sweep(cfg: &ScenarioConfig) -> Result<SweepReport> {
    run(cfg, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::GridSpec;

    fn small_cfg() -> ScenarioConfig {
        ScenarioConfig {
            grid: GridSpec::comb(256, 32, 0).unwrap(),
            channel1: ChannelSpec::Exp {
                beta: -0.01,
                taps: 12,
            },
            channel2: ChannelSpec::Exp {
                beta: -0.2,
                taps: 16,
            },
            estimators: EstimatorKind::ALL.to_vec(),
            snr_db: vec![10.0, 20.0],
            trials: 40,
            data_symbols: 2,
            seed: 99,
            ..ScenarioConfig::baseline()
        }
    }

    #[test]
    fn report_shape() {
        let report = run_ber_sweep(&small_cfg()).unwrap();
        // 2 SNRs x 5 estimators x (aggregate + 2 ports)
        assert_eq!(report.rows.len(), 30);
        for r in &report.rows {
            assert!(r.failed.is_none());
            assert!(r.empirical_mse.unwrap() >= 0.0);
            let ber = r.ber.unwrap();
            assert!((0.0..=0.55).contains(&ber));
        }
        let f = report.get(10.0, "fmmse").unwrap();
        assert!(f.analytic_mse.is_some());
        assert_eq!(f.bits_counted, Some(40 * 2 * 2 * 32 * 2));
        assert!(report.get(10.0, "dft").unwrap().analytic_mse.is_none());
    }

    #[test]
    fn near_noiseless_fmmse() {
        let mut cfg = small_cfg();
        cfg.trials = 1;
        cfg.snr_db = vec![100.0];
        cfg.estimators = vec![EstimatorKind::FMmse];
        let report = run_mse_sweep(&cfg).unwrap();
        // Tr{R1} = P
        assert!(report.mse(100.0, "fmmse.port1").unwrap() < 1e-4 * 32.0);
        assert!(report.rows.iter().all(|r| r.ber.is_none()));
    }

    #[test]
    fn perfect_csi_no_errors() {
        let scn = Scenario::new(small_cfg()).unwrap();
        let (_, h) = scn.draw_channel(3);
        let slot = SlotData::draw(&h, true, 0.0, 4, &RngStream::new(1)).unwrap();
        let errs = slot.count_errors(&h);
        assert_eq!(errs.bit_errors, [0, 0]);
        assert_eq!(errs.bits, [4 * 64, 4 * 64]);

        let slot = SlotData::draw(&h, false, 0.0, 4, &RngStream::new(1)).unwrap();
        let errs = slot.count_errors(&h);
        assert_eq!(errs.bit_errors, [0, 0]);
        assert_eq!(errs.bits, [4 * 64, 0]);
    }

    #[test]
    fn unsupported_shift_marks_row_failed() {
        let mut cfg = small_cfg();
        cfg.delta_cs = Some(8);
        cfg.trials = 2;
        let report = run_mse_sweep(&cfg).unwrap();
        let occ = report.get(10.0, "occ").unwrap();
        assert!(occ.failed.is_some());
        assert!(report.get(10.0, "fmmse").unwrap().failed.is_none());
        assert!(report.to_csv().contains(",occ,NaN,"));
    }

    #[test]
    fn silent_port_has_single_rows() {
        let mut cfg = small_cfg();
        cfg.channel2 = ChannelSpec::Silent;
        cfg.trials = 4;
        let report = run_ber_sweep(&cfg).unwrap();
        assert_eq!(report.rows.len(), 10);
        assert!(report.get(20.0, "pmmse.port1").is_none());
        let sp = report.get(20.0, "spmmse").unwrap();
        let f = report.get(20.0, "fmmse").unwrap();
        // with no port 2 the full-prior filter is the single-port one
        assert!((sp.analytic_mse.unwrap() - f.analytic_mse.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn deterministic_across_threads() {
        let mut cfg = small_cfg();
        cfg.trials = 70;
        let a = run_ber_sweep(&cfg).unwrap().to_csv();
        cfg.threads = Some(1);
        let b = run_ber_sweep(&cfg).unwrap().to_csv();
        cfg.threads = Some(3);
        let c = run_ber_sweep(&cfg).unwrap().to_csv();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}
