use std::fs;
use std::process::{Command, Output};

use estlab::harness::report::CSV_HEADER;
use estlab::harness::SweepReport;

fn estlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_estlab"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SMALL: [&str; 6] = [
    "--snr",
    "10,0",
    "--trials",
    "20",
    "--channel1",
    "exp:-0.01,12",
];

#[test]
fn mse_csv_layout() {
    let mut args = vec!["mse"];
    args.extend(SMALL);
    args.extend(["--estimators", "pmmse,dft,occ"]);
    let o = estlab(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    let report = SweepReport::from_csv(&text).unwrap();
    let keys: Vec<(f64, &str)> = report
        .rows
        .iter()
        .map(|r| (r.snr_db, r.estimator.as_str()))
        .collect();
    assert_eq!(keys.len(), 18);
    assert_eq!(keys[0], (0.0, "dft"));
    assert_eq!(keys[17], (10.0, "pmmse.port2"));
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
    assert_eq!(keys, sorted);
    let row = text.lines().find(|l| l.contains(",pmmse,")).unwrap();
    let mse = row.split(',').nth(2).unwrap();
    let mantissa = mse.split('e').next().unwrap();
    assert_eq!(
        mantissa.trim_start_matches('-').replace('.', "").len(),
        9,
        "{mse}"
    );
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out.csv");
    fs::write(
        &cfg,
        "# silent second port\nsnr = 5\ntrials = 9\nestimators = fmmse,spmmse\nchannel2 = silent\nseed = 4\n",
    )
    .unwrap();
    let o = estlab(&[
        "ber",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let report = estlab::harness::read_report(&out).unwrap();
    assert_eq!(report.rows.len(), 2);
    for r in &report.rows {
        assert_eq!((r.trials, r.seed, r.snr_db), (3, 4, 5.0));
        assert_eq!(r.bits_counted, Some(3 * 6 * 2 * 120));
    }
}

#[test]
fn config_errors_exit_one() {
    for args in [
        vec!["mse", "--estimators", "dft,ls"],
        vec!["mse", "--channel1", "rayleigh"],
        vec!["mse", "--channel1", "silent"],
        vec!["mse", "--trials", "0"],
        vec!["mse", "--trials", "many"],
        vec!["mse", "--config", "/nonexistent/run.cfg"],
        vec!["mse", "--bogus"],
        vec!["simulate"],
        vec![],
    ] {
        let o = estlab(&args);
        assert_eq!(
            o.status.code(),
            Some(1),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn runtime_error_exits_two() {
    let mut args = vec!["mse", "--out", "/nonexistent-dir/out.csv"];
    args.extend(SMALL);
    let o = estlab(&args);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_and_version_exit_zero() {
    for args in [["--help"], ["--version"]] {
        let o = estlab(&args);
        assert_eq!(o.status.code(), Some(0));
        assert!(!o.stdout.is_empty());
    }
}

#[test]
fn phi_blocks() {
    let o = estlab(&["phi", "--snr", "30"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("# pmmse") && text.contains("# fmmse"));
    let values = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(values, 240);

    let o = estlab(&["phi", "--snr", "30", "--channel2", "silent"]);
    assert!(!stdout(&o).contains("# fmmse"));
}

#[test]
fn dump_channel_columns() {
    let o = estlab(&["dump-channel", "--snr", "30", "--estimators", "dft,fmmse"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("subcarrier,abs_h11,abs_dft,abs_fmmse"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 120);
    assert_eq!(rows[1][0], 2.0);
    let err: f64 = rows.iter().map(|r| (r[1] - r[3]).abs()).sum::<f64>() / 120.0;
    assert!(err < 0.1, "mean |h| deviation {err}");
}
