//! Acceptance checks. Each criterion prints one `PASS`/`FAIL` line; the
//! process exits non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use estlab::analysis::{analytic_mse_f, analytic_mse_p, build_phi, diag_magnitudes};
use estlab::channel::{covariance, exp_pdp, freq_response, sample_taps, GridSpec};
use estlab::dmrs::{cyclic_shift_phasors, gen_pilots, ls_decouple, received_pilots, PilotGrid};
use estlab::estimators::{f_mmse, mmse_filter, p_mmse, CovarianceSet, DftEstimator, EstimatorKind};
use estlab::harness::{
    run_ber_sweep, run_mse_sweep, snr_to_sigma2, ChannelSpec, Scenario, ScenarioConfig, SweepReport,
};
use estlab::numerics::{idft_matrix, ComplexMatrix, RngStream};
use estlab::Complex64;
use nalgebra::DMatrix;
use rand::Rng;

// Criterion 1
const MSE_REL_TOL: f64 = 0.03;
const MSE_TRIALS: u64 = 10_000;
// Criterion 2
const WIENER_SAMPLES: usize = 1_000_000;
const WIENER_ENTRY_TOL: f64 = 0.02;
// Criterion 3
const PHI_WINDOW: usize = 5;
const PHI_SUPPRESSION: f64 = 0.1;
const PHI_INSENSITIVITY: f64 = 0.1;
// Criterion 4
const RANDOM_PDP_PAIRS: usize = 50;
const ORDER_SLACK: f64 = 1e-12;
// Criterion 5
const OCC_FLOOR_MIN_RATIO: f64 = 0.5;
const FMMSE_MAX_RATIO: f64 = 0.3;
const FLAT_SCALING_TOL: f64 = 0.10;
// Criteria 6 and 7
const BER_GAP: f64 = 0.25;
const MIN_BITS: u64 = 1_000_000;
// Criterion 8
const EXACT_TOL: f64 = 1e-10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn baseline_mse_sweep() -> (SweepReport, f64) {
    let mut cfg = ScenarioConfig::baseline();
    cfg.snr_db = vec![0.0, 10.0, 20.0, 30.0, 40.0];
    cfg.trials = MSE_TRIALS;
    let t0 = Instant::now();
    let report = run_mse_sweep(&cfg).expect("baseline sweep");
    (report, t0.elapsed().as_secs_f64())
}

fn criterion1(report: &SweepReport, secs: f64) -> Outcome {
    let mut worst = (0.0, String::new());
    for snr in [0.0, 10.0, 20.0, 30.0] {
        for est in ["fmmse", "pmmse"] {
            for suffix in ["", ".port1", ".port2"] {
                let label = format!("{est}{suffix}");
                let row = report.get(snr, &label).expect("row present");
                let e = rel(row.empirical_mse.unwrap(), row.analytic_mse.unwrap());
                if e > worst.0 {
                    worst = (e, format!("{label}@{snr}dB"));
                }
            }
        }
    }
    outcome(
        worst.0 < MSE_REL_TOL,
        format!(
            "max rel err {:.4} at {} (tol {MSE_REL_TOL}), sweep {secs:.1}s",
            worst.0, worst.1
        ),
    )
}

fn to_nalgebra(m: &ComplexMatrix) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)])
}

fn criterion2() -> Outcome {
    let grid = GridSpec::comb(16, 8, 0).unwrap();
    let cfg = ScenarioConfig {
        grid,
        channel1: ChannelSpec::Exp {
            beta: -0.3,
            taps: 2,
        },
        channel2: ChannelSpec::Exp {
            beta: -1.5,
            taps: 2,
        },
        snr_db: vec![5.0],
        ..ScenarioConfig::baseline()
    };
    let scn = Scenario::new(cfg).unwrap();
    let sigma2 = snr_to_sigma2(5.0);
    let p = scn.pg.p();
    let noise_root = RngStream::new(77);
    let mut cross = vec![Complex64::new(0.0, 0.0); p * p];
    let mut auto = vec![Complex64::new(0.0, 0.0); p * p];
    let mut count = 0usize;
    for t in 0..WIENER_SAMPLES / 2 {
        let (_, h) = scn.draw_channel(t as u64);
        let obs = scn
            .observe(&h, sigma2, &noise_root.derive(&[t as u64]))
            .unwrap();
        for (r, hhat) in obs.iter().enumerate() {
            let h1 = &h[0][r];
            for i in 0..p {
                for j in 0..p {
                    cross[i * p + j] += h1[i] * hhat[j].conj();
                    auto[i * p + j] += hhat[i] * hhat[j].conj();
                }
            }
            count += 1;
        }
    }
    let n = count as f64;
    let cross = DMatrix::from_fn(p, p, |i, j| cross[i * p + j] / n);
    let auto = DMatrix::from_fn(p, p, |i, j| auto[i * p + j] / n);
    let w_emp = cross * auto.try_inverse().expect("sample covariance invertible");
    let r2 = scn.priors.r2.as_ref().unwrap();
    let w = to_nalgebra(
        &mmse_filter(&scn.priors.r1, Some(&r2.diag_sandwich(&scn.pg.c)), sigma2).unwrap(),
    );
    let max_err = (w_emp - w).iter().map(|v| v.norm()).fold(0.0, f64::max);
    outcome(
        max_err < WIENER_ENTRY_TOL,
        format!("{count} samples, max entry err {max_err:.5} (tol {WIENER_ENTRY_TOL})"),
    )
}

fn criterion3() -> Outcome {
    let scn = Scenario::new(ScenarioConfig::baseline()).unwrap();
    let sigma2 = snr_to_sigma2(30.0);
    let r1 = &scn.priors.r1;
    let r2 = scn.priors.r2.as_ref().unwrap();
    let p = scn.pg.p();
    let dp = diag_magnitudes(&build_phi(r1, r1, &scn.pg.c, sigma2).unwrap()).unwrap();
    let df = diag_magnitudes(&build_phi(r1, r2, &scn.pg.c, sigma2).unwrap()).unwrap();
    let max = dp.iter().cloned().fold(0.0, f64::max);
    let mid = dp[p / 2 - PHI_WINDOW..=p / 2 + PHI_WINDOW]
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let diff = dp
        .iter()
        .zip(&df)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(
        mid < PHI_SUPPRESSION * max && diff < PHI_INSENSITIVITY * max,
        format!(
            "max {max:.4}, mid-window max {:.4} ({:.4} of max), |P-F| max {:.4} ({:.4} of max)",
            mid,
            mid / max,
            diff,
            diff / max
        ),
    )
}

fn criterion4(report: &SweepReport) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for snr in [10.0, 20.0, 30.0, 40.0] {
        for suffix in ["", ".port1", ".port2"] {
            let f = report.mse(snr, &format!("fmmse{suffix}")).unwrap();
            let p = report.mse(snr, &format!("pmmse{suffix}")).unwrap();
            let d = report.mse(snr, &format!("dft{suffix}")).unwrap();
            if !(f <= p && p < d) {
                ok = false;
                notes.push(format!("{snr}dB{suffix}: F {f:.4e} P {p:.4e} DFT {d:.4e}"));
            }
        }
    }
    let grid = GridSpec::nr_default();
    let c = cyclic_shift_phasors(grid.p(), grid.p() / 2);
    let mut rng = RngStream::new(4);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..RANDOM_PDP_PAIRS {
        let pdp = |rng: &mut RngStream| {
            let beta = -rng.rng().random_range(0.0001..0.5);
            let taps = rng.rng().random_range(1..=60);
            exp_pdp(beta, taps).unwrap()
        };
        let (a, b) = (pdp(&mut rng), pdp(&mut rng));
        let r1 = covariance(&a, &grid);
        let r2 = covariance(&b, &grid);
        let sigma2 = snr_to_sigma2([0.0, 10.0, 20.0, 30.0, 40.0][i % 5]);
        let f = analytic_mse_f(&r1, &r2, &c, sigma2).unwrap();
        let p = analytic_mse_p(&r1, &r2, &c, sigma2).unwrap();
        worst = worst.max(f - p);
        if f > p + ORDER_SLACK {
            ok = false;
            notes.push(format!("pair {i}: F {f:.6e} > P {p:.6e}"));
        }
    }
    let mut detail = format!(
        "empirical F<=P<DFT at 10..40 dB; {RANDOM_PDP_PAIRS} random pairs, max(F-P) {worst:.3e}"
    );
    if !notes.is_empty() {
        detail = format!("{detail}; violations: {}", notes.join("; "));
    }
    outcome(ok, detail)
}

fn criterion5(report: &SweepReport) -> Outcome {
    let occ = report.mse(40.0, "occ").unwrap() / report.mse(30.0, "occ").unwrap();
    let f = report.mse(40.0, "fmmse").unwrap() / report.mse(30.0, "fmmse").unwrap();

    let cfg = ScenarioConfig {
        channel1: ChannelSpec::Exp {
            beta: -0.1,
            taps: 1,
        },
        channel2: ChannelSpec::Exp {
            beta: -0.1,
            taps: 1,
        },
        estimators: vec![EstimatorKind::Occ],
        snr_db: vec![20.0, 30.0, 40.0],
        trials: 2_000,
        ..ScenarioConfig::baseline()
    };
    let flat = run_mse_sweep(&cfg).unwrap();
    let s1 = flat.mse(30.0, "occ").unwrap() / flat.mse(20.0, "occ").unwrap();
    let s2 = flat.mse(40.0, "occ").unwrap() / flat.mse(30.0, "occ").unwrap();
    let flat_ok = rel(s1, 0.1) < FLAT_SCALING_TOL && rel(s2, 0.1) < FLAT_SCALING_TOL;
    outcome(
        occ > OCC_FLOOR_MIN_RATIO && f < FMMSE_MAX_RATIO && flat_ok,
        format!(
            "OCC 40/30 dB ratio {occ:.4}, F-MMSE {f:.4}; flat OCC 30/20 {s1:.4}, 40/30 {s2:.4}"
        ),
    )
}

fn ber_point(
    channel1: ChannelSpec,
    channel2: ChannelSpec,
    estimators: Vec<EstimatorKind>,
    snr_db: Vec<f64>,
) -> SweepReport {
    let mut cfg = ScenarioConfig {
        channel1,
        channel2,
        estimators,
        snr_db,
        ..ScenarioConfig::baseline()
    };
    cfg.trials = cfg.min_ber_trials();
    run_ber_sweep(&cfg).unwrap()
}

/// Seeded 30 dB bit-error counts `(F-MMSE, P-MMSE)` from the first verified run.
const FROZEN_ERRORS: [(&str, u64, u64); 3] = [
    ("exp", 596, 596),
    ("tdla/tdlc", 619, 628),
    ("tdlc/equal", 776, 1267),
];

fn criterion6() -> Outcome {
    let scenarios = [
        (
            ScenarioConfig::baseline().channel1,
            ScenarioConfig::baseline().channel2,
        ),
        ("tdla".parse().unwrap(), "tdlc".parse().unwrap()),
        ("tdlc".parse().unwrap(), "equal:9.6586".parse().unwrap()),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for ((c1, c2), (name, frozen_f, frozen_p)) in scenarios.into_iter().zip(FROZEN_ERRORS) {
        let t0 = Instant::now();
        let report = ber_point(
            c1,
            c2,
            vec![EstimatorKind::FMmse, EstimatorKind::PMmse],
            vec![30.0],
        );
        let f = report.get(30.0, "fmmse").unwrap();
        let p = report.get(30.0, "pmmse").unwrap();
        let (bf, bp) = (f.ber.unwrap(), p.ber.unwrap());
        let gap = rel(bp, bf);
        let bits = f.bits_counted.unwrap();
        let errors = |ber: f64| (ber * bits as f64).round() as u64;
        let frozen_ok = errors(bf) == frozen_f && errors(bp) == frozen_p;
        ok &= gap < BER_GAP && bits >= MIN_BITS && frozen_ok;
        parts.push(format!(
            "{name}: F {bf:.4e} P {bp:.4e} gap {gap:.3} bits {bits}{} ({:.1}s)",
            if frozen_ok { "" } else { " REGRESSION" },
            t0.elapsed().as_secs_f64()
        ));
    }
    outcome(ok, parts.join("; "))
}

fn criterion7() -> Outcome {
    let report = ber_point(
        ScenarioConfig::baseline().channel1,
        ChannelSpec::Silent,
        vec![EstimatorKind::PMmse, EstimatorKind::SinglePortMmse],
        vec![10.0, 30.0],
    );
    let pair = |snr: f64| {
        let p = report.get(snr, "pmmse").unwrap();
        let s = report.get(snr, "spmmse").unwrap();
        (p.ber.unwrap(), s.ber.unwrap(), p.bits_counted.unwrap())
    };
    let (bp, bs, bits) = pair(30.0);
    let gap = rel(bp, bs);
    // informational: 30 dB sees only a handful of errors over 1e6 bits with MRC
    let (lp, ls, _) = pair(10.0);
    outcome(
        gap < BER_GAP && bits >= MIN_BITS,
        format!(
            "30 dB: P-MMSE {bp:.4e}, optimal single-port {bs:.4e}, gap {gap:.3}, bits {bits}; 10 dB: {lp:.4e} vs {ls:.4e}"
        ),
    )
}

fn criterion8() -> Outcome {
    let mut notes = Vec::new();

    // DFT recovery on a full-band comb (M = 2P), one active port, 63 taps < P/2
    let p = 128;
    let grid = GridSpec::comb(2 * p, p, 0).unwrap();
    let pg = PilotGrid::new(grid.clone(), &mut RngStream::new(3)).unwrap();
    let pdp = exp_pdp(-0.05, 63).unwrap();
    let dft = DftEstimator::new(&pg).unwrap();
    let zero = vec![Complex64::new(0.0, 0.0); p];
    let mut dft_err = 0.0f64;
    for t in 0..20 {
        let h1 = freq_response(&sample_taps(&pdp, &mut RngStream::new(t)), &pdp, &grid).unwrap();
        let y = received_pilots(&h1, &zero, &pg, 0.0, &mut RngStream::new(0)).unwrap();
        let est = dft.estimate(&ls_decouple(&y, &pg, 0.0).unwrap().hhat);
        dft_err = dft_err.max(
            est.h1_hat
                .iter()
                .zip(&h1)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max),
        );
    }
    notes.push(format!("DFT max err {dft_err:.2e}"));
    let dft_ok = dft_err <= EXACT_TOL;

    // P-MMSE equals F-MMSE bit-for-bit when R2 := R1
    let grid = GridSpec::nr_default();
    let pg = PilotGrid::new(grid.clone(), &mut RngStream::new(5)).unwrap();
    let r1 = covariance(&exp_pdp(-0.0005, 40).unwrap(), &grid);
    let cov = CovarianceSet::new(r1.clone(), Some(r1), 0.01);
    let h: Vec<Complex64> = estlab::numerics::crandn(grid.p(), &mut RngStream::new(6));
    let obs = estlab::dmrs::LsObservation {
        hhat: h,
        sigma2: 0.01,
    };
    let bitwise = f_mmse(&obs, &cov, &pg).unwrap() == p_mmse(&obs, &cov, &pg).unwrap();
    notes.push(format!("P==F bitwise {bitwise}"));

    // C unitarity and pilot orthogonality for even P
    let mut orth_ok = true;
    for p in [2usize, 4, 8, 12, 24, 120, 128] {
        let c = cyclic_shift_phasors(p, p / 2);
        let x = gen_pilots(p, &mut RngStream::new(p as u64)).unwrap();
        let cm = ComplexMatrix::from_diag(&c);
        let unit = (&cm * &cm.adjoint()).max_abs_diff(&ComplexMatrix::identity(p));
        let inner: Complex64 = x.iter().zip(&c).map(|(x, c)| x.conj() * c * x).sum();
        orth_ok &= unit == 0.0 && inner.norm() == 0.0;
        let f = idft_matrix(p).unwrap();
        orth_ok &= (&f * &f.adjoint()).max_abs_diff(&ComplexMatrix::identity(p)) < EXACT_TOL;
    }
    notes.push(format!("C unitary and ports orthogonal {orth_ok}"));

    outcome(dft_ok && bitwise && orth_ok, notes.join(", "))
}

fn cli_csv(threads: usize) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_estlab"))
        .args([
            "ber",
            "--snr",
            "0,15,30",
            "--trials",
            "150",
            "--estimators",
            "dft,occ,fmmse,pmmse,spmmse",
            "--channel1",
            "tdla:100",
            "--channel2",
            "exp:-0.05,40",
            "--seed",
            "31337",
            "--threads",
        ])
        .arg(threads.to_string())
        .output()
        .expect("run estlab");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn criterion9() -> Outcome {
    let a = cli_csv(1);
    let b = cli_csv(1);
    let c = cli_csv(4);
    let d = cli_csv(7);
    let same = a == b && a == c && a == d;
    outcome(
        same && !a.is_empty(),
        format!(
            "{} CSV bytes; runs and 1/4/7 workers identical: {same}",
            a.len()
        ),
    )
}

type Check<'a> = (u32, &'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let (report, secs) = baseline_mse_sweep();
    let checks: Vec<Check> = vec![
        (
            1,
            "analytic vs empirical MSE",
            Box::new(|| criterion1(&report, secs)),
        ),
        (2, "Wiener oracle", Box::new(criterion2)),
        (3, "time-domain coefficient diagonal", Box::new(criterion3)),
        (4, "MSE ordering", Box::new(|| criterion4(&report))),
        (5, "OCC error floor", Box::new(|| criterion5(&report))),
        (6, "P-MMSE vs F-MMSE BER", Box::new(criterion6)),
        (7, "single-port BER", Box::new(criterion7)),
        (8, "exactness", Box::new(criterion8)),
        (9, "determinism", Box::new(criterion9)),
    ];
    let mut failed = 0;
    for (n, name, check) in checks {
        let t0 = Instant::now();
        let o = check();
        println!(
            "criterion {n} {}: {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t0.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
