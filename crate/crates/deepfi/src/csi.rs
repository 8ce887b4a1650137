//! CSI domain types and the shared preprocessing pipeline.
//!
//! A packet reception carries 90 amplitude values (3 antennas x 30
//! subcarriers, flat index `30*antenna + subcarrier`) plus an optional RSS
//! reading. Training and localization both run on min-max normalized
//! amplitudes confined to the open interval (0, 1).

use thiserror::Error;

/// Antennas per reception.
pub const ANTENNA_COUNT: usize = 3;
/// Readable subcarriers per antenna.
pub const SUBCARRIER_COUNT: usize = 30;
/// Amplitude values per packet.
pub const CSI_DIM: usize = ANTENNA_COUNT * SUBCARRIER_COUNT;

/// Clamp margin keeping normalized values strictly inside (0, 1).
pub const NORM_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CsiError {
    #[error("no packets provided")]
    EmptyInput,
    #[error("degenerate amplitude range: all values equal {0}")]
    DegenerateRange(f64),
    #[error("zero dispersion: all normalized entries identical")]
    ZeroSigma,
    #[error("invalid packet: {0}")]
    InvalidPacket(String),
    #[error("invalid normalization params: max_amp {max} must exceed min_amp {min}")]
    InvalidParams { min: f64, max: f64 },
    #[error("normalized vector invalid: {0}")]
    InvalidNormalized(String),
    #[error("antenna index {0} out of range (0..{ANTENNA_COUNT})")]
    BadAntenna(usize),
}

/// One packet reception: 90 linear CSI amplitudes plus optional RSS (dBm)
/// and a monotonic receive tick.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiPacket {
    amplitudes: [f64; CSI_DIM],
    pub rss: Option<f64>,
    pub timestamp: Option<u64>,
}

/// Flat amplitude index for (antenna, subcarrier).
pub fn flat_index(antenna: usize, subcarrier: usize) -> usize {
    debug_assert!(antenna < ANTENNA_COUNT && subcarrier < SUBCARRIER_COUNT);
    SUBCARRIER_COUNT * antenna + subcarrier
}

impl CsiPacket {
    /// Builds a packet, enforcing exactly 90 finite, non-negative amplitudes.
    pub fn new(
        amplitudes: Vec<f64>,
        rss: Option<f64>,
        timestamp: Option<u64>,
    ) -> Result<Self, CsiError> {
        if amplitudes.len() != CSI_DIM {
            return Err(CsiError::InvalidPacket(format!(
                "expected {CSI_DIM} amplitudes, got {}",
                amplitudes.len()
            )));
        }
        for (i, &a) in amplitudes.iter().enumerate() {
            if !a.is_finite() || a < 0.0 {
                return Err(CsiError::InvalidPacket(format!(
                    "amplitude[{i}] = {a} is not a finite non-negative value"
                )));
            }
        }
        if let Some(r) = rss {
            if !r.is_finite() {
                return Err(CsiError::InvalidPacket(format!("rss = {r} is not finite")));
            }
        }
        let mut buf = [0.0; CSI_DIM];
        buf.copy_from_slice(&amplitudes);
        Ok(Self {
            amplitudes: buf,
            rss,
            timestamp,
        })
    }

    pub fn amplitudes(&self) -> &[f64; CSI_DIM] {
        &self.amplitudes
    }

    /// Amplitude at (antenna, subcarrier).
    pub fn amplitude(&self, antenna: usize, subcarrier: usize) -> f64 {
        self.amplitudes[flat_index(antenna, subcarrier)]
    }

    /// The 30 amplitudes of one antenna.
    pub fn antenna_slice(&self, antenna: usize) -> &[f64] {
        let start = SUBCARRIER_COUNT * antenna;
        &self.amplitudes[start..start + SUBCARRIER_COUNT]
    }
}

/// Which amplitude entries feed the deep network: all 90, or the 30 from a
/// single antenna.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AntennaSelection {
    All,
    Single(usize),
}

impl AntennaSelection {
    pub fn dim(&self) -> usize {
        match self {
            AntennaSelection::All => CSI_DIM,
            AntennaSelection::Single(_) => SUBCARRIER_COUNT,
        }
    }

    pub fn validate(&self) -> Result<(), CsiError> {
        match self {
            AntennaSelection::Single(a) if *a >= ANTENNA_COUNT => Err(CsiError::BadAntenna(*a)),
            _ => Ok(()),
        }
    }

    /// Extracts the selected amplitude entries from a packet.
    pub fn extract(&self, packet: &CsiPacket) -> Vec<f64> {
        match self {
            AntennaSelection::All => packet.amplitudes.to_vec(),
            AntennaSelection::Single(a) => packet.antenna_slice(*a).to_vec(),
        }
    }
}

/// Per-location min-max bounds fitted on training packets and stored in the
/// fingerprint model so test packets land in the same coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationParams {
    pub min_amp: f64,
    pub max_amp: f64,
}

impl NormalizationParams {
    pub fn new(min_amp: f64, max_amp: f64) -> Result<Self, CsiError> {
        if !(min_amp.is_finite() && max_amp.is_finite()) || max_amp <= min_amp {
            return Err(CsiError::InvalidParams {
                min: min_amp,
                max: max_amp,
            });
        }
        Ok(Self { min_amp, max_amp })
    }

    /// Maps a raw amplitude into (0, 1): `(x - min) / (max - min)` clamped to
    /// `[NORM_EPS, 1 - NORM_EPS]`. Out-of-range test values saturate rather
    /// than error.
    pub fn apply(&self, x: f64) -> f64 {
        let y = (x - self.min_amp) / (self.max_amp - self.min_amp);
        y.clamp(NORM_EPS, 1.0 - NORM_EPS)
    }

    /// Inverse of [`NormalizationParams::apply`] on the unclamped interior.
    /// Test support only; the pipeline never denormalizes.
    pub fn invert(&self, y: f64) -> f64 {
        self.min_amp + y * (self.max_amp - self.min_amp)
    }
}

/// A normalized amplitude vector, every entry strictly inside (0, 1).
///
/// Length is 90 for whole-packet inputs and 30 for single-antenna inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCsi {
    values: Vec<f64>,
}

impl NormalizedCsi {
    pub fn new(values: Vec<f64>) -> Result<Self, CsiError> {
        if values.is_empty() {
            return Err(CsiError::InvalidNormalized("empty vector".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 || v >= 1.0 {
                return Err(CsiError::InvalidNormalized(format!(
                    "entry[{i}] = {v} not strictly inside (0, 1)"
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Dispersion of normalized test data, feeding the RBF scale.
///
/// `sigma` is the population standard deviation over every entry, `mu` the
/// mean, `lambda = sigma / mu` the coefficient of variation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionStats {
    pub sigma: f64,
    pub mu: f64,
    pub lambda: f64,
}

/// Whether the RBF scale multiplies lambda by the standard deviation or by
/// the variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaMode {
    #[default]
    Std,
    Var,
}

impl DispersionStats {
    /// The RBF denominator `lambda * sigma` (or `lambda * sigma^2`).
    pub fn scale(&self, mode: SigmaMode) -> f64 {
        match mode {
            SigmaMode::Std => self.lambda * self.sigma,
            SigmaMode::Var => self.lambda * self.sigma * self.sigma,
        }
    }
}

/// Global min/max over every selected amplitude of every packet.
pub fn fit_normalization(packets: &[CsiPacket]) -> Result<NormalizationParams, CsiError> {
    fit_normalization_selected(packets, AntennaSelection::All)
}

/// [`fit_normalization`] restricted to an antenna selection.
pub fn fit_normalization_selected(
    packets: &[CsiPacket],
    selection: AntennaSelection,
) -> Result<NormalizationParams, CsiError> {
    selection.validate()?;
    if packets.is_empty() {
        return Err(CsiError::EmptyInput);
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for p in packets {
        let values = match selection {
            AntennaSelection::All => &p.amplitudes[..],
            AntennaSelection::Single(a) => p.antenna_slice(a),
        };
        for &x in values {
            min = min.min(x);
            max = max.max(x);
        }
    }
    if max <= min {
        return Err(CsiError::DegenerateRange(min));
    }
    Ok(NormalizationParams {
        min_amp: min,
        max_amp: max,
    })
}

/// Normalizes one packet with stored params; never fails, out-of-range
/// values clamp into (0, 1).
pub fn normalize(packet: &CsiPacket, params: &NormalizationParams) -> NormalizedCsi {
    normalize_selected(packet, AntennaSelection::All, params)
}

/// [`normalize`] restricted to an antenna selection.
pub fn normalize_selected(
    packet: &CsiPacket,
    selection: AntennaSelection,
    params: &NormalizationParams,
) -> NormalizedCsi {
    let values = match selection {
        AntennaSelection::All => packet.amplitudes.to_vec(),
        AntennaSelection::Single(a) => packet.antenna_slice(a).to_vec(),
    };
    NormalizedCsi {
        values: values.into_iter().map(|x| params.apply(x)).collect(),
    }
}

/// Population mean / standard deviation / CV over every entry of every
/// packet (two-pass).
pub fn dispersion(packets: &[NormalizedCsi]) -> Result<DispersionStats, CsiError> {
    if packets.is_empty() {
        return Err(CsiError::EmptyInput);
    }
    let n: usize = packets.iter().map(|p| p.values.len()).sum();
    let mut sum = 0.0;
    for p in packets {
        for &v in &p.values {
            sum += v;
        }
    }
    let mu = sum / n as f64;
    let mut ss = 0.0;
    for p in packets {
        for &v in &p.values {
            let d = v - mu;
            ss += d * d;
        }
    }
    let sigma = (ss / n as f64).sqrt();
    if sigma <= 0.0 {
        return Err(CsiError::ZeroSigma);
    }
    Ok(DispersionStats {
        sigma,
        mu,
        lambda: sigma / mu,
    })
}
