//! Online location estimation: reconstruction-distance RBF likelihoods per
//! reference location, fused through a uniform-prior posterior into a
//! weighted-average position.
//!
//! Each candidate model normalizes the test packets with its own stored
//! min-max params, and the RBF scale comes from the dispersion of those
//! normalized test packets.

use rayon::prelude::*;
use thiserror::Error;

use crate::csi::{
    self, AntennaSelection, CsiError, CsiPacket, DispersionStats, NormalizedCsi, SigmaMode,
};
use crate::deepnet::{
    self, location_seed, DeepnetError, FingerprintModel, NetShape, TrainConfig,
};

#[derive(Debug, Error)]
pub enum LocatorError {
    #[error("no packets provided")]
    EmptyInput,
    #[error("fingerprint database needs at least one entry")]
    EmptyDb,
    #[error("database entries disagree on network shape")]
    MixedShapes,
    #[error("duplicate reference location ({0}, {1})")]
    DuplicateLocation(f64, f64),
    #[error("grid spacing must be positive, got {0}")]
    BadGrid(f64),
    #[error("RBF scale {scale} below floor {floor}")]
    DegenerateScale { scale: f64, floor: f64 },
    #[error("likelihood {0} is negative")]
    NegativeLikelihood(f64),
    #[error("batch size must be >= 1")]
    BadBatchSize,
    #[error(transparent)]
    Csi(#[from] CsiError),
    #[error(transparent)]
    Deepnet(#[from] DeepnetError),
}

/// Distance between a packet and its reconstruction, over the 90 entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMetric {
    /// Sum of absolute coordinate differences.
    #[default]
    L1,
    /// Euclidean norm.
    L2,
}

/// Online-phase switches recorded with a trained database so localization
/// replays the exact arithmetic the database was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DbFlags {
    pub distance: DistanceMetric,
    pub sigma_mode: SigmaMode,
    /// When true, the 8-layer forward pass omits bias terms.
    pub bias_forward_disabled: bool,
}

impl DbFlags {
    pub fn bias_forward(&self) -> bool {
        !self.bias_forward_disabled
    }
}

/// Packet grouping for the likelihood evaluation. Grouping only changes the
/// evaluation order, never the value.
#[derive(Debug, Clone, Copy)]
pub struct BatchConfig {
    pub batch_size: usize,
    pub lambda_sigma_floor: f64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            batch_size: 10,
            lambda_sigma_floor: 1e-6,
        }
    }
}

/// The trained fingerprints of every reference location.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintDatabase {
    entries: Vec<FingerprintModel>,
    grid_m: f64,
    flags: DbFlags,
    selection: AntennaSelection,
}

impl FingerprintDatabase {
    pub fn new(entries: Vec<FingerprintModel>, grid_m: f64) -> Result<Self, LocatorError> {
        Self::with_flags(entries, grid_m, DbFlags::default(), AntennaSelection::All)
    }

    pub fn with_flags(
        entries: Vec<FingerprintModel>,
        grid_m: f64,
        flags: DbFlags,
        selection: AntennaSelection,
    ) -> Result<Self, LocatorError> {
        if entries.is_empty() {
            return Err(LocatorError::EmptyDb);
        }
        if !(grid_m.is_finite() && grid_m > 0.0) {
            return Err(LocatorError::BadGrid(grid_m));
        }
        let shape = entries[0].shape;
        if entries.iter().any(|m| m.shape != shape) {
            return Err(LocatorError::MixedShapes);
        }
        for (i, a) in entries.iter().enumerate() {
            for b in &entries[i + 1..] {
                if a.location == b.location {
                    return Err(LocatorError::DuplicateLocation(a.location.0, a.location.1));
                }
            }
        }
        Ok(Self {
            entries,
            grid_m,
            flags,
            selection,
        })
    }

    pub fn entries(&self) -> &[FingerprintModel] {
        &self.entries
    }

    pub fn grid_m(&self) -> f64 {
        self.grid_m
    }

    pub fn flags(&self) -> DbFlags {
        self.flags
    }

    pub fn selection(&self) -> AntennaSelection {
        self.selection
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn locations(&self) -> Vec<(f64, f64)> {
        self.entries.iter().map(|m| m.location).collect()
    }
}

/// A fused position estimate with the full posterior it came from.
#[derive(Debug, Clone)]
pub struct LocationEstimate {
    pub xy: (f64, f64),
    /// Posterior mass per reference location; non-negative, sums to 1.
    pub posterior: Vec<f64>,
    /// Raw mean-RBF likelihood per reference location.
    pub likelihoods: Vec<f64>,
    /// True when every likelihood vanished and the posterior fell back to
    /// uniform.
    pub degenerate: bool,
}

fn reconstruction_distance(
    model: &FingerprintModel,
    v: &NormalizedCsi,
    flags: &DbFlags,
) -> Result<f64, LocatorError> {
    let v_hat = model.reconstruct_opts(v, flags.bias_forward())?;
    let d = match flags.distance {
        DistanceMetric::L1 => v
            .values()
            .iter()
            .zip(v_hat.iter())
            .map(|(a, b)| (a - b).abs())
            .sum(),
        DistanceMetric::L2 => v
            .values()
            .iter()
            .zip(v_hat.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
    };
    Ok(d)
}

fn rbf_scale(stats: &DispersionStats, flags: &DbFlags, floor: f64) -> Result<f64, LocatorError> {
    let scale = stats.scale(flags.sigma_mode);
    if !(scale.is_finite() && scale >= floor) {
        return Err(LocatorError::DegenerateScale { scale, floor });
    }
    Ok(scale)
}

/// Gaussian-style RBF score of one packet against one model:
/// `exp(-d / (lambda * sigma))` with `d` the reconstruction distance.
/// Lands in (0, 1]; a perfect reconstruction scores exactly 1.
pub fn packet_rbf(
    model: &FingerprintModel,
    v: &NormalizedCsi,
    stats: &DispersionStats,
) -> Result<f64, LocatorError> {
    packet_rbf_opts(
        model,
        v,
        stats,
        &DbFlags::default(),
        BatchConfig::default().lambda_sigma_floor,
    )
}

/// [`packet_rbf`] under explicit flags and scale floor.
pub fn packet_rbf_opts(
    model: &FingerprintModel,
    v: &NormalizedCsi,
    stats: &DispersionStats,
    flags: &DbFlags,
    lambda_sigma_floor: f64,
) -> Result<f64, LocatorError> {
    let scale = rbf_scale(stats, flags, lambda_sigma_floor)?;
    let d = reconstruction_distance(model, v, flags)?;
    Ok((-d / scale).exp())
}

/// Mean RBF over `n` packets, evaluated in batches of `cfg.batch_size`
/// (final partial batch allowed). The grouping never changes the value.
pub fn location_likelihood(
    model: &FingerprintModel,
    packets: &[NormalizedCsi],
    stats: &DispersionStats,
    cfg: &BatchConfig,
) -> Result<f64, LocatorError> {
    location_likelihood_opts(model, packets, stats, cfg, &DbFlags::default())
}

/// [`location_likelihood`] under explicit flags.
pub fn location_likelihood_opts(
    model: &FingerprintModel,
    packets: &[NormalizedCsi],
    stats: &DispersionStats,
    cfg: &BatchConfig,
    flags: &DbFlags,
) -> Result<f64, LocatorError> {
    if packets.is_empty() {
        return Err(LocatorError::EmptyInput);
    }
    if cfg.batch_size == 0 {
        return Err(LocatorError::BadBatchSize);
    }
    let scale = rbf_scale(stats, flags, cfg.lambda_sigma_floor)?;
    let mut total = 0.0;
    for batch in packets.chunks(cfg.batch_size) {
        let mut batch_sum = 0.0;
        for v in batch {
            let d = reconstruction_distance(model, v, flags)?;
            batch_sum += (-d / scale).exp();
        }
        total += batch_sum;
    }
    Ok(total / packets.len() as f64)
}

/// Posterior probabilities plus a degeneracy marker.
pub struct PosteriorResult {
    pub probs: Vec<f64>,
    /// True when every likelihood vanished and the mass fell back to uniform.
    pub degenerate: bool,
}

/// Normalizes non-negative likelihoods into a posterior under a uniform
/// prior: `P_i = L_i / sum(L)`.
pub fn posterior(likelihoods: &[f64]) -> Result<PosteriorResult, LocatorError> {
    if likelihoods.is_empty() {
        return Err(LocatorError::EmptyInput);
    }
    for &l in likelihoods {
        if l < 0.0 || l.is_nan() {
            return Err(LocatorError::NegativeLikelihood(l));
        }
    }
    let total: f64 = likelihoods.iter().sum();
    if total <= 0.0 {
        let n = likelihoods.len() as f64;
        return Ok(PosteriorResult {
            probs: vec![1.0 / n; likelihoods.len()],
            degenerate: true,
        });
    }
    Ok(PosteriorResult {
        probs: likelihoods.iter().map(|l| l / total).collect(),
        degenerate: false,
    })
}

/// Posterior from log-likelihoods: the max exponent is subtracted before
/// normalizing, so uniformly tiny likelihoods cannot underflow to all-zero.
pub fn posterior_from_log(logliks: &[f64]) -> Result<PosteriorResult, LocatorError> {
    if logliks.is_empty() {
        return Err(LocatorError::EmptyInput);
    }
    let m = logliks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        let n = logliks.len() as f64;
        return Ok(PosteriorResult {
            probs: vec![1.0 / n; logliks.len()],
            degenerate: true,
        });
    }
    let shifted: Vec<f64> = logliks.iter().map(|&l| (l - m).exp()).collect();
    let total: f64 = shifted.iter().sum();
    Ok(PosteriorResult {
        probs: shifted.iter().map(|s| s / total).collect(),
        degenerate: false,
    })
}

/// Posterior-weighted average of reference coordinates.
pub fn fuse_position(locations: &[(f64, f64)], probs: &[f64]) -> (f64, f64) {
    let mut x = 0.0;
    let mut y = 0.0;
    for (loc, p) in locations.iter().zip(probs) {
        x += p * loc.0;
        y += p * loc.1;
    }
    (x, y)
}

// Per-model log mean RBF: log(1/n sum_j exp(-d_j/scale)) evaluated without
// leaving log space, batching preserved.
fn log_mean_rbf(
    model: &FingerprintModel,
    packets: &[NormalizedCsi],
    scale: f64,
    cfg: &BatchConfig,
    flags: &DbFlags,
) -> Result<f64, LocatorError> {
    let mut exponents = Vec::with_capacity(packets.len());
    for batch in packets.chunks(cfg.batch_size) {
        for v in batch {
            exponents.push(-reconstruction_distance(model, v, flags)? / scale);
        }
    }
    let m = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = exponents.iter().map(|e| (e - m).exp()).sum();
    Ok(m + sum.ln() - (packets.len() as f64).ln())
}

/// Full online estimation: per-model normalization and dispersion of the raw
/// test packets, mean-RBF likelihoods, posterior fusion, weighted-average
/// coordinates. Models are evaluated in parallel with a fixed reduction
/// order, so the result is independent of thread count.
pub fn estimate(
    db: &FingerprintDatabase,
    raw_packets: &[CsiPacket],
    cfg: &BatchConfig,
) -> Result<LocationEstimate, LocatorError> {
    if raw_packets.is_empty() {
        return Err(LocatorError::EmptyInput);
    }
    if cfg.batch_size == 0 {
        return Err(LocatorError::BadBatchSize);
    }
    let flags = db.flags;

    let logliks: Vec<f64> = db
        .entries
        .par_iter()
        .map(|model| -> Result<f64, LocatorError> {
            let normalized: Vec<NormalizedCsi> = raw_packets
                .iter()
                .map(|p| csi::normalize_selected(p, db.selection, &model.norm))
                .collect();
            // A model whose normalization collapses the test data onto a
            // clamp bound cannot explain it at all; score it zero instead of
            // failing the whole fusion.
            let stats = match csi::dispersion(&normalized) {
                Ok(s) => s,
                Err(CsiError::ZeroSigma) => return Ok(f64::NEG_INFINITY),
                Err(e) => return Err(e.into()),
            };
            match rbf_scale(&stats, &flags, cfg.lambda_sigma_floor) {
                Ok(scale) => log_mean_rbf(model, &normalized, scale, cfg, &flags),
                Err(LocatorError::DegenerateScale { .. }) => Ok(f64::NEG_INFINITY),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, _>>()?;

    let likelihoods: Vec<f64> = logliks.iter().map(|l| l.exp()).collect();
    let post = posterior_from_log(&logliks)?;
    let xy = fuse_position(&db.locations(), &post.probs);
    Ok(LocationEstimate {
        xy,
        posterior: post.probs,
        likelihoods,
        degenerate: post.degenerate,
    })
}

/// Record of one surveyed location: id, coordinates, training packets.
#[derive(Debug, Clone)]
pub struct LocationRecord {
    pub id: String,
    pub xy: (f64, f64),
    pub packets: Vec<CsiPacket>,
}

/// Trains a fingerprint model per record (in parallel, order preserved) and
/// assembles the database. Each location draws a seed from the master seed
/// and its own coordinates, so results do not depend on record order or on
/// thread count.
pub fn build_database(
    records: &[LocationRecord],
    shape: &NetShape,
    cfg: &TrainConfig,
    grid_m: f64,
    flags: DbFlags,
    selection: AntennaSelection,
) -> Result<FingerprintDatabase, LocatorError> {
    let entries: Vec<FingerprintModel> = records
        .par_iter()
        .map(|rec| {
            let local = TrainConfig {
                seed: location_seed(cfg.seed, rec.xy),
                ..*cfg
            };
            deepnet::train_location_selected(&rec.packets, selection, shape, &local, rec.xy)
        })
        .collect::<Result<_, _>>()?;
    FingerprintDatabase::with_flags(entries, grid_m, flags, selection)
}
