use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use estlab::analysis::{build_phi, diag_magnitudes, diag_to_text};
use estlab::estimators::PreparedEstimator;
use estlab::harness::{
    run_ber_sweep, run_mse_sweep, snr_to_sigma2, write_report, Scenario, ScenarioConfig, Settings,
};
use estlab::numerics::RngStream;
use estlab::{Error, Result};

/// Two-port comb-pilot channel estimation simulator.
#[derive(Parser, Debug)]
#[command(name = "estlab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Empirical and closed-form MSE per SNR and estimator.
    Mse(Common),
    /// Bit error rate after ZF (or MRC) equalization with each estimate.
    Ber(Common),
    /// Diagonal magnitudes of the time-domain coefficient matrices.
    Phi(Common),
    /// One channel realization and its estimates on the pilot grid.
    DumpChannel(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated SNR list in dB.
    #[arg(long)]
    snr: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    /// Comma-separated subset of dft,occ,fmmse,pmmse,spmmse.
    #[arg(long)]
    estimators: Option<String>,
    /// exp:beta,L | tdla:ds_ns | tdlc:ds_ns | equal:max_us
    #[arg(long)]
    channel1: Option<String>,
    /// Same forms as --channel1, plus `silent`.
    #[arg(long)]
    channel2: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the trial loop.
    #[arg(long)]
    threads: Option<usize>,
    /// Divide MSE columns by the pilot count.
    #[arg(long)]
    per_subcarrier: bool,
}

impl Common {
    fn settings(&self) -> Result<Settings> {
        let base = match &self.config {
            Some(path) => Settings::from_file(path).map_err(|e| match e {
                Error::Io { path, source } => {
                    Error::Config(format!("cannot read {}: {source}", path.display()))
                }
                other => other,
            })?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        let pairs = [
            ("snr", &self.snr),
            ("estimators", &self.estimators),
            ("channel1", &self.channel1),
            ("channel2", &self.channel2),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                flags.set(key, v)?;
            }
        }
        flags.trials = self.trials;
        flags.seed = self.seed;
        flags.out = self.out.clone();
        flags.threads = self.threads;
        if self.per_subcarrier {
            flags.per_subcarrier = Some(true);
        }
        Ok(base.merge(flags))
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|source| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn phi_text(cfg: &ScenarioConfig) -> Result<String> {
    let scn = Scenario::new(cfg.clone())?;
    let sigma2 = snr_to_sigma2(cfg.snr_db[0]);
    let r1 = &scn.priors.r1;
    let mut out = format!("# snr_db {}\n", cfg.snr_db[0]);
    out += &diag_to_text(
        "pmmse",
        &diag_magnitudes(&build_phi(r1, r1, &scn.pg.c, sigma2)?)?,
    );
    if let Some(r2) = &scn.priors.r2 {
        out += &diag_to_text(
            "fmmse",
            &diag_magnitudes(&build_phi(r1, r2, &scn.pg.c, sigma2)?)?,
        );
    }
    Ok(out)
}

fn dump_channel_text(cfg: &ScenarioConfig) -> Result<String> {
    let scn = Scenario::new(cfg.clone())?;
    let sigma2 = snr_to_sigma2(cfg.snr_db[0]);
    let (_, h) = scn.draw_channel(0);
    let obs = scn.observe(&h, sigma2, &RngStream::new(cfg.seed).derive(&[u64::MAX]))?;
    let mut est = Vec::new();
    for &kind in &cfg.estimators {
        let prepared = PreparedEstimator::new(kind, &scn.priors, &scn.pg, sigma2, cfg.occ_noise)?;
        est.push((kind.label(), prepared.estimate(&obs[0]).h1_hat));
    }
    let mut out = String::from("subcarrier,abs_h11");
    for (label, _) in &est {
        out += &format!(",abs_{label}");
    }
    out.push('\n');
    for (p, k) in scn.pg.grid.pilot_indices.iter().enumerate() {
        out += &format!("{k},{:.8e}", h[0][0][p].norm());
        for (_, e) in &est {
            out += &format!(",{:.8e}", e[p].norm());
        }
        out.push('\n');
    }
    Ok(out)
}

fn run(cmd: Command) -> Result<()> {
    let (common, kind) = match &cmd {
        Command::Mse(c) => (c, "mse"),
        Command::Ber(c) => (c, "ber"),
        Command::Phi(c) => (c, "phi"),
        Command::DumpChannel(c) => (c, "dump-channel"),
    };
    let settings = common.settings()?;
    let mut cfg = settings.to_scenario()?;
    if kind == "ber" && settings.trials.is_none() {
        cfg.trials = cfg.min_ber_trials();
    }
    let out = settings.out.as_ref();
    let text = match kind {
        "mse" | "ber" => {
            let mut report = if kind == "mse" {
                run_mse_sweep(&cfg)?
            } else {
                run_ber_sweep(&cfg)?
            };
            if settings.per_subcarrier == Some(true) {
                report = report.per_subcarrier(cfg.grid.p());
            }
            if let Some(path) = out {
                return write_report(&report, path);
            }
            report.to_csv()
        }
        "phi" => phi_text(&cfg)?,
        _ => dump_channel_text(&cfg)?,
    };
    emit(out, &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("estlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
