//! Power delay profiles, Rayleigh tap sampling and pilot-grid frequency responses.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{crandn, ComplexMatrix, RngStream};

pub const NUM_PORTS: usize = 2;
pub const NUM_RX: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    /// Delay in samples at the system rate.
    pub delay: usize,
    pub power: f64,
}

/// Sample-spaced power delay profile with unit total power.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    taps: Vec<Tap>,
    label: String,
}

impl PowerDelayProfile {
    /// Sorts by delay, merges colliding delays by power addition and
    /// normalizes to unit total power.
    pub fn from_taps(label: impl Into<String>, mut taps: Vec<(usize, f64)>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidDimension(
                "power delay profile needs at least one tap".into(),
            ));
        }
        if let Some(&(d, p)) = taps.iter().find(|(_, p)| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Config(format!(
                "tap at delay {d} has non-positive power {p}"
            )));
        }
        taps.sort_by_key(|&(d, _)| d);
        let mut merged: Vec<Tap> = Vec::with_capacity(taps.len());
        for (delay, power) in taps {
            match merged.last_mut() {
                Some(last) if last.delay == delay => last.power += power,
                _ => merged.push(Tap { delay, power }),
            }
        }
        let total: f64 = merged.iter().map(|t| t.power).sum();
        for t in &mut merged {
            t.power /= total;
        }
        Ok(Self {
            taps: merged,
            label: label.into(),
        })
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn max_delay(&self) -> usize {
        self.taps.last().map_or(0, |t| t.delay)
    }

    /// Two-column `delay_samples power` listing.
    pub fn to_text(&self) -> String {
        let mut out = format!("# {}\n# delay_samples power\n", self.label);
        for t in &self.taps {
            out.push_str(&format!("{} {:.9e}\n", t.delay, t.power));
        }
        out
    }
}

impl fmt::Display for PowerDelayProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} taps, max delay {})",
            self.label,
            self.len(),
            self.max_delay()
        )
    }
}

/// Exponential profile `alpha(l) = exp(beta * l)` on delays `0..taps`.
pub fn exp_pdp(beta: f64, taps: usize) -> Result<PowerDelayProfile> {
    if taps == 0 {
        return Err(Error::InvalidDimension(
            "exponential profile needs L >= 1".into(),
        ));
    }
    if !(beta.is_finite() && beta <= 0.0) {
        return Err(Error::Config(format!(
            "exponential decay must satisfy beta <= 0, got {beta}"
        )));
    }
    PowerDelayProfile::from_taps(
        format!("exp(beta={beta},L={taps})"),
        (0..taps).map(|l| (l, (beta * l as f64).exp())).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdlProfile {
    A,
    C,
}

impl TdlProfile {
    /// (normalized delay, power in dB) rows.
    fn table(self) -> &'static [(f64, f64)] {
        match self {
            TdlProfile::A => TDL_A,
            TdlProfile::C => TDL_C,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TdlProfile::A => "TDL-A",
            TdlProfile::C => "TDL-C",
        }
    }

    pub fn max_normalized_delay(self) -> f64 {
        self.table().iter().map(|r| r.0).fold(0.0, f64::max)
    }
}

impl FromStr for TdlProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "tdla" | "a" => Ok(TdlProfile::A),
            "tdlc" | "c" => Ok(TdlProfile::C),
            _ => Err(Error::Config(format!("unknown TDL profile '{s}'"))),
        }
    }
}

// 3GPP TR 38.901 Table 7.7.2-1 (TDL-A), normalized delay and power [dB].
const TDL_A: &[(f64, f64)] = &[
    (0.0000, -13.4),
    (0.3819, 0.0),
    (0.4025, -2.2),
    (0.5868, -4.0),
    (0.4610, -6.0),
    (0.5375, -8.2),
    (0.6708, -9.9),
    (0.5750, -10.5),
    (0.7618, -7.5),
    (1.5375, -15.9),
    (1.8978, -6.6),
    (2.2242, -16.7),
    (2.1718, -12.4),
    (2.4942, -15.2),
    (2.5119, -10.8),
    (3.0582, -11.3),
    (4.0810, -12.7),
    (4.4579, -16.2),
    (4.5695, -18.3),
    (4.7966, -18.9),
    (5.0066, -16.6),
    (5.3043, -19.9),
    (9.6586, -29.7),
];

// 3GPP TR 38.901 Table 7.7.2-3 (TDL-C), normalized delay and power [dB].
#[allow(clippy::approx_constant)] // 0.6366 is a tabulated delay, not 2/pi
const TDL_C: &[(f64, f64)] = &[
    (0.0000, -4.4),
    (0.2099, -1.2),
    (0.2219, -3.5),
    (0.2329, -5.2),
    (0.2176, -2.5),
    (0.6366, 0.0),
    (0.6448, -2.2),
    (0.6560, -3.9),
    (0.6584, -7.4),
    (0.7935, -7.1),
    (0.8213, -10.7),
    (0.9336, -11.1),
    (1.2285, -5.1),
    (1.3083, -6.8),
    (2.1704, -8.7),
    (2.7105, -13.2),
    (4.2589, -13.9),
    (4.6003, -13.9),
    (5.4902, -15.8),
    (5.6077, -17.1),
    (6.3065, -16.0),
    (6.6374, -15.7),
    (7.0427, -21.6),
    (8.6523, -22.8),
];

/// TDL profile scaled to `delay_spread` seconds and rounded onto the sample grid.
pub fn tdl_pdp(
    profile: TdlProfile,
    delay_spread: f64,
    sample_rate: f64,
) -> Result<PowerDelayProfile> {
    if !(delay_spread > 0.0 && delay_spread.is_finite()) {
        return Err(Error::Config(format!(
            "delay spread must be positive, got {delay_spread}"
        )));
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::Config(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    let taps = profile
        .table()
        .iter()
        .map(|&(norm_delay, db)| {
            let delay = (norm_delay * delay_spread * sample_rate).round() as usize;
            (delay, 10f64.powf(db / 10.0))
        })
        .collect();
    PowerDelayProfile::from_taps(
        format!("{}(DS={:.0}ns)", profile.name(), delay_spread * 1e9),
        taps,
    )
}

/// Equal-power taps on every sample from 0 to `round(max_delay * sample_rate)`.
pub fn equal_pdp(max_delay: f64, sample_rate: f64) -> Result<PowerDelayProfile> {
    if !(max_delay > 0.0 && max_delay.is_finite()) {
        return Err(Error::Config(format!(
            "maximum delay must be positive, got {max_delay}"
        )));
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::Config(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    let last = (max_delay * sample_rate).round() as usize;
    PowerDelayProfile::from_taps(
        format!("equal(max={:.4}us)", max_delay * 1e6),
        (0..=last).map(|d| (d, 1.0)).collect(),
    )
}

/// OFDM grid and the subcarriers carrying the DMRS.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub m: usize,
    pub pilot_indices: Vec<usize>,
    pub sample_rate: f64,
    pub cp_samples: usize,
}

impl GridSpec {
    pub const DEFAULT_SAMPLE_RATE: f64 = 30.72e6;
    pub const DEFAULT_CP: usize = 144;

    /// Pilots on every second subcarrier starting at `k0`: `k_p = k0 + 2p`.
    pub fn comb(m: usize, p: usize, k0: usize) -> Result<Self> {
        Self::with_indices(m, (0..p).map(|i| k0 + 2 * i).collect())
    }

    pub fn with_indices(m: usize, pilot_indices: Vec<usize>) -> Result<Self> {
        let p = pilot_indices.len();
        if p == 0 {
            return Err(Error::InvalidDimension(
                "pilot grid needs at least one pilot".into(),
            ));
        }
        if 2 * p > m {
            return Err(Error::InvalidDimension(format!(
                "2P = {} exceeds M = {m}",
                2 * p
            )));
        }
        if pilot_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "pilot indices must be strictly increasing".into(),
            ));
        }
        if pilot_indices[p - 1] >= m {
            return Err(Error::Config(format!(
                "pilot index {} outside the {m}-subcarrier grid",
                pilot_indices[p - 1]
            )));
        }
        Ok(Self {
            m,
            pilot_indices,
            sample_rate: Self::DEFAULT_SAMPLE_RATE,
            cp_samples: Self::DEFAULT_CP,
        })
    }

    /// M = 2048, P = 120, 30.72 MHz, 144-sample cyclic prefix.
    pub fn nr_default() -> Self {
        Self::comb(2048, 120, 0).expect("default grid is valid")
    }

    pub fn p(&self) -> usize {
        self.pilot_indices.len()
    }

    /// `true` when consecutive pilots are equally spaced.
    pub fn is_uniform(&self) -> bool {
        let idx = &self.pilot_indices;
        idx.windows(2)
            .all(|w| w[1] - w[0] == idx[1.min(idx.len() - 1)] - idx[0])
    }

    // exp(-j 2 pi k d / M) with the integer product reduced mod M first
    fn phasor(&self, k: i64, delay: usize) -> Complex64 {
        let m = self.m as i64;
        let e = (k * delay as i64).rem_euclid(m);
        Complex64::from_polar(1.0, -2.0 * PI * e as f64 / self.m as f64)
    }
}

/// Precomputed `P x L` map from tap gains to pilot-grid frequency response.
#[derive(Debug, Clone)]
pub struct ResponseMap {
    steering: ComplexMatrix,
}

impl ResponseMap {
    pub fn new(pdp: &PowerDelayProfile, grid: &GridSpec) -> Result<Self> {
        if let Some(t) = pdp.taps().iter().find(|t| t.delay >= grid.m) {
            return Err(Error::Config(format!(
                "tap delay {} is not resolvable on an {}-point grid",
                t.delay, grid.m
            )));
        }
        let steering = ComplexMatrix::from_fn(grid.p(), pdp.len(), |p, l| {
            grid.phasor(grid.pilot_indices[p] as i64, pdp.taps()[l].delay)
        });
        Ok(Self { steering })
    }

    pub fn apply(&self, taps: &[Complex64]) -> Vec<Complex64> {
        self.steering.matvec(taps)
    }
}

/// Draws tap `l` from CN(0, alpha(l)).
pub fn sample_taps(pdp: &PowerDelayProfile, stream: &mut RngStream) -> Vec<Complex64> {
    crandn(pdp.len(), stream)
        .into_iter()
        .zip(pdp.taps())
        .map(|(g, t)| g * t.power.sqrt())
        .collect()
}

/// `h_p = sum_l g_l exp(-j 2 pi k_p d_l / M)` on the pilot subcarriers.
pub fn freq_response(
    taps: &[Complex64],
    pdp: &PowerDelayProfile,
    grid: &GridSpec,
) -> Result<Vec<Complex64>> {
    if taps.len() != pdp.len() {
        return Err(Error::Shape(format!(
            "{} tap gains for a {}-tap profile",
            taps.len(),
            pdp.len()
        )));
    }
    Ok(ResponseMap::new(pdp, grid)?.apply(taps))
}

/// Analytic pilot-grid covariance `R[m][n] = sum_l alpha(l) exp(-j 2 pi (k_m - k_n) d_l / M)`.
pub fn covariance(pdp: &PowerDelayProfile, grid: &GridSpec) -> ComplexMatrix {
    let k = &grid.pilot_indices;
    let mut r = ComplexMatrix::zeros(k.len(), k.len());
    for m in 0..k.len() {
        for n in m..k.len() {
            let dk = k[m] as i64 - k[n] as i64;
            let v: Complex64 = pdp
                .taps()
                .iter()
                .map(|t| grid.phasor(dk, t.delay) * t.power)
                .sum();
            r[(m, n)] = v;
            r[(n, m)] = v.conj();
        }
    }
    r
}

/// Tap gains for every (port, rx antenna) link; a silent port has no taps.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub taps: [[Vec<Complex64>; NUM_RX]; NUM_PORTS],
}

impl ChannelRealization {
    /// Link `(t, r)` draws from `stream.derive(&[t, r])`.
    pub fn draw(pdps: [Option<&PowerDelayProfile>; NUM_PORTS], stream: &RngStream) -> Self {
        let taps = std::array::from_fn(|t| {
            std::array::from_fn(|r| match pdps[t] {
                Some(pdp) => sample_taps(pdp, &mut stream.derive(&[t as u64, r as u64])),
                None => Vec::new(),
            })
        });
        Self { taps }
    }

    /// Pilot-grid responses `h[t][r]`; silent ports map to zeros of length `p`.
    pub fn responses(
        &self,
        maps: [Option<&ResponseMap>; NUM_PORTS],
        p: usize,
    ) -> [[Vec<Complex64>; NUM_RX]; NUM_PORTS] {
        std::array::from_fn(|t| {
            std::array::from_fn(|r| match maps[t] {
                Some(map) => map.apply(&self.taps[t][r]),
                None => vec![Complex64::new(0.0, 0.0); p],
            })
        })
    }
}
