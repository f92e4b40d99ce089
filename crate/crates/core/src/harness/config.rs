//! Scenario description, channel shorthand and the `key = value` config format.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::{equal_pdp, exp_pdp, tdl_pdp, GridSpec, PowerDelayProfile, TdlProfile};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, OccNoise};

pub const DEFAULT_TDLA_DS_NS: f64 = 100.0;
pub const DEFAULT_TDLC_DS_NS: f64 = 300.0;
pub const DEFAULT_MSE_TRIALS: u64 = 10_000;
pub const MIN_BER_BITS: u64 = 1_000_000;
pub const DEFAULT_DATA_SYMBOLS: usize = 6;
pub const DEFAULT_SEED: u64 = 20_240_101;

/// Channel family for one port.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    Exp {
        beta: f64,
        taps: usize,
    },
    Tdl {
        profile: TdlProfile,
        delay_spread_ns: f64,
    },
    Equal {
        max_delay_us: f64,
    },
    Silent,
}

impl ChannelSpec {
    pub fn is_silent(&self) -> bool {
        matches!(self, ChannelSpec::Silent)
    }

    pub fn to_pdp(&self, grid: &GridSpec) -> Result<Option<PowerDelayProfile>> {
        let fs = grid.sample_rate;
        match *self {
            ChannelSpec::Exp { beta, taps } => exp_pdp(beta, taps).map(Some),
            ChannelSpec::Tdl {
                profile,
                delay_spread_ns,
            } => tdl_pdp(profile, delay_spread_ns * 1e-9, fs).map(Some),
            ChannelSpec::Equal { max_delay_us } => equal_pdp(max_delay_us * 1e-6, fs).map(Some),
            ChannelSpec::Silent => Ok(None),
        }
    }
}

fn parse_f64(what: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("{what}: '{s}' is not a number")))
}

impl FromStr for ChannelSpec {
    type Err = Error;

    /// `exp:beta,L | tdla[:ds_ns] | tdlc[:ds_ns] | equal:max_us | silent`
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        match kind.to_ascii_lowercase().as_str() {
            "exp" => {
                let (beta, taps) = args.split_once(',').ok_or_else(|| {
                    Error::Config(format!("exp channel needs 'exp:beta,L', got '{s}'"))
                })?;
                let taps = taps
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("exp channel: bad tap count '{taps}'")))?;
                Ok(ChannelSpec::Exp {
                    beta: parse_f64("exp beta", beta)?,
                    taps,
                })
            }
            "tdla" | "tdlc" => {
                let profile: TdlProfile = kind.parse()?;
                let delay_spread_ns = if args.is_empty() {
                    match profile {
                        TdlProfile::A => DEFAULT_TDLA_DS_NS,
                        TdlProfile::C => DEFAULT_TDLC_DS_NS,
                    }
                } else {
                    parse_f64("delay spread", args)?
                };
                Ok(ChannelSpec::Tdl {
                    profile,
                    delay_spread_ns,
                })
            }
            "equal" => Ok(ChannelSpec::Equal {
                max_delay_us: parse_f64("equal max delay", args)?,
            }),
            "silent" => Ok(ChannelSpec::Silent),
            _ => Err(Error::Config(format!("unknown channel '{s}'"))),
        }
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelSpec::Exp { beta, taps } => write!(f, "exp:{beta},{taps}"),
            ChannelSpec::Tdl {
                profile: TdlProfile::A,
                delay_spread_ns,
            } => write!(f, "tdla:{delay_spread_ns}"),
            ChannelSpec::Tdl {
                profile: TdlProfile::C,
                delay_spread_ns,
            } => write!(f, "tdlc:{delay_spread_ns}"),
            ChannelSpec::Equal { max_delay_us } => write!(f, "equal:{max_delay_us}"),
            ChannelSpec::Silent => write!(f, "silent"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub grid: GridSpec,
    pub channel1: ChannelSpec,
    pub channel2: ChannelSpec,
    pub estimators: Vec<EstimatorKind>,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub data_symbols: usize,
    pub seed: u64,
    pub occ_noise: OccNoise,
    /// Cyclic shift; `None` means `P / 2`.
    pub delta_cs: Option<usize>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl ScenarioConfig {
    /// Exponential profiles over 40 taps with beta -0.0005 / -0.05 on the
    /// 2048-subcarrier, 120-pilot grid.
    pub fn baseline() -> Self {
        Self {
            grid: GridSpec::nr_default(),
            channel1: ChannelSpec::Exp {
                beta: -0.0005,
                taps: 40,
            },
            channel2: ChannelSpec::Exp {
                beta: -0.05,
                taps: 40,
            },
            estimators: vec![
                EstimatorKind::Dft,
                EstimatorKind::Occ,
                EstimatorKind::FMmse,
                EstimatorKind::PMmse,
            ],
            snr_db: (0..=6).map(|i| 5.0 * i as f64).collect(),
            trials: DEFAULT_MSE_TRIALS,
            data_symbols: DEFAULT_DATA_SYMBOLS,
            seed: DEFAULT_SEED,
            occ_noise: OccNoise::Halved,
            delta_cs: None,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Config("SNR list is empty".into()));
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::Config(format!("SNR {s} is not finite")));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators selected".into()));
        }
        if self.channel1.is_silent() {
            return Err(Error::Config("port 1 cannot be silent".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        Ok(())
    }

    /// Bits carried per trial by the data symbols of every active port.
    pub fn bits_per_trial(&self) -> u64 {
        let ports = if self.channel2.is_silent() { 1 } else { 2 };
        (2 * self.grid.p() * self.data_symbols * ports) as u64
    }

    /// Smallest trial count that reaches [`MIN_BER_BITS`] per point.
    pub fn min_ber_trials(&self) -> u64 {
        MIN_BER_BITS.div_ceil(self.bits_per_trial().max(1))
    }
}

/// Every flag the CLI and the config file understand. `None` means "not set".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub snr: Option<Vec<f64>>,
    pub trials: Option<u64>,
    pub estimators: Option<Vec<EstimatorKind>>,
    pub channel1: Option<ChannelSpec>,
    pub channel2: Option<ChannelSpec>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub data_symbols: Option<usize>,
    pub occ_noise: Option<OccNoise>,
    pub delta_cs: Option<usize>,
    pub threads: Option<usize>,
    pub subcarriers: Option<usize>,
    pub pilots: Option<usize>,
    pub per_subcarrier: Option<bool>,
}

pub fn parse_snr_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_f64("snr", t))
        .collect()
}

pub fn parse_estimator_list(s: &str) -> Result<Vec<EstimatorKind>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect()
}

pub fn parse_occ_noise(s: &str) -> Result<OccNoise> {
    match s.trim().to_ascii_lowercase().as_str() {
        "halved" | "half" => Ok(OccNoise::Halved),
        "literal" | "full" => Ok(OccNoise::Literal),
        _ => Err(Error::Config(format!(
            "occ noise must be 'halved' or 'literal', got '{s}'"
        ))),
    }
}

fn parse_int<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse::<T>()
        .map_err(|_| Error::Config(format!("{key}: '{v}' is not a valid integer")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: '{v}' is not a boolean"))),
    }
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment, keys may use `-` or `_`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            s.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.to_ascii_lowercase().replace('-', "_").as_str() {
            "snr" => self.snr = Some(parse_snr_list(value)?),
            "trials" => self.trials = Some(parse_int(key, value)?),
            "estimators" => self.estimators = Some(parse_estimator_list(value)?),
            "channel1" => self.channel1 = Some(value.parse()?),
            "channel2" => self.channel2 = Some(value.parse()?),
            "seed" => self.seed = Some(parse_int(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "data_symbols" => self.data_symbols = Some(parse_int(key, value)?),
            "occ_noise" => self.occ_noise = Some(parse_occ_noise(value)?),
            "delta_cs" => self.delta_cs = Some(parse_int(key, value)?),
            "threads" => self.threads = Some(parse_int(key, value)?),
            "subcarriers" => self.subcarriers = Some(parse_int(key, value)?),
            "pilots" => self.pilots = Some(parse_int(key, value)?),
            "per_subcarrier" => self.per_subcarrier = Some(parse_bool(key, value)?),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Fields set in `over` win.
    pub fn merge(self, over: Settings) -> Settings {
        Settings {
            snr: over.snr.or(self.snr),
            trials: over.trials.or(self.trials),
            estimators: over.estimators.or(self.estimators),
            channel1: over.channel1.or(self.channel1),
            channel2: over.channel2.or(self.channel2),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            data_symbols: over.data_symbols.or(self.data_symbols),
            occ_noise: over.occ_noise.or(self.occ_noise),
            delta_cs: over.delta_cs.or(self.delta_cs),
            threads: over.threads.or(self.threads),
            subcarriers: over.subcarriers.or(self.subcarriers),
            pilots: over.pilots.or(self.pilots),
            per_subcarrier: over.per_subcarrier.or(self.per_subcarrier),
        }
    }

    /// Fills unset fields from [`ScenarioConfig::baseline`].
    pub fn to_scenario(&self) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::baseline();
        if self.subcarriers.is_some() || self.pilots.is_some() {
            let m = self.subcarriers.unwrap_or(cfg.grid.m);
            let p = self.pilots.unwrap_or(cfg.grid.p());
            cfg.grid = GridSpec::comb(m, p, 0)?;
        }
        if let Some(v) = &self.snr {
            cfg.snr_db = v.clone();
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = &self.estimators {
            cfg.estimators = v.clone();
        }
        if let Some(v) = &self.channel1 {
            cfg.channel1 = v.clone();
        }
        if let Some(v) = &self.channel2 {
            cfg.channel2 = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.data_symbols {
            cfg.data_symbols = v;
        }
        if let Some(v) = self.occ_noise {
            cfg.occ_noise = v;
        }
        cfg.delta_cs = self.delta_cs;
        cfg.threads = self.threads;
        cfg.validate()?;
        Ok(cfg)
    }
}
