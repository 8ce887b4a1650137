//! Synthetic indoor CSI/RSS generator with ground truth.
//!
//! There is no physics here, only calibration: the generator is tuned so
//! that desk-scale datasets reproduce the statistics the localization
//! pipeline depends on — per-location amplitude stability (std/mean ratios
//! mostly under 10% at the default noise level), per-location subcarrier
//! cluster counts concentrated on 2-3, per-antenna diversity, and
//! inter-location correlation that decays smoothly with separation.
//!
//! The base response at a point is a sum of deterministic multipath
//! components. Component phases advance smoothly with position (so nearby
//! points stay correlated) while the cluster structure — how the 30
//! subcarriers group into equal-amplitude bands — is hashed from quantized
//! coordinates (so it varies location to location).

// Hash domain labels below are ASCII tags; their byte grouping follows the
// string, not nibble-count symmetry.
#![allow(clippy::unusual_byte_groupings)]

use rayon::prelude::*;
use thiserror::Error;

use crate::csi::{CsiPacket, ANTENNA_COUNT, SUBCARRIER_COUNT};
use crate::rng::{hash_chain, RngStream};

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("point ({0}, {1}) outside the room")]
    OutOfRoom(f64, f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// Floor plan, access-point position and channel knobs for one synthetic
/// environment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub room_w_m: f64,
    pub room_h_m: f64,
    pub ap_xy: (f64, f64),
    /// Nominal training grid spacing.
    pub grid_m: f64,
    /// Inclusive range the per-location cluster count is drawn from.
    pub n_clusters_range: (usize, usize),
    /// Relative multiplicative amplitude noise per packet.
    pub noise_std: f64,
    /// Per-antenna perturbation seeds (phase/gain diversity).
    pub antenna_offsets: [u64; 3],
    /// Path-loss exponent for the RSS model.
    pub rss_path_loss_exp: f64,
    pub seed: u64,
}

/// RSS noise standard deviation in dB; deliberately large so RSS is less
/// stable than CSI at the default settings.
pub const RSS_NOISE_STD_DB: f64 = 2.0;
/// Session-to-session RSS baseline shift in dB. Packet groups recorded at
/// different times (training survey vs online query) see different RSS
/// baselines even at the same spot.
pub const RSS_SESSION_STD_DB: f64 = 4.0;
/// Relative std of the common amplitude scale a recording session applies
/// to all 90 CSI values (receiver gain control has no absolute reference).
pub const CSI_SESSION_SCALE_STD: f64 = 0.0;
/// Transmit-referenced RSS at 1 m, dBm.
const RSS_AT_1M_DBM: f64 = -30.0;
// Static log-normal-style shadowing over the floor plan: amplitude (dB) and
// component count of the cosine field, spatial frequency range (rad/m).
// Keeps mean RSS from being a clean distance oracle.
const SHADOW_STD_DB: f64 = 5.0;
const SHADOW_COMPONENTS: usize = 6;
const SHADOW_FREQ_MIN: f64 = 1.5;
const SHADOW_FREQ_MAX: f64 = 5.0;

// Multipath field constants, calibrated against the stability / cluster /
// correlation checks in the test suite.
const PATH_COUNT: usize = 14;
// Paths beyond this index switch on/off per coarse spatial cell.
const GATED_PATHS_FROM: usize = 9;
const GATE_CELL_M: f64 = 1.2;
// Cluster structure (count + band boundaries) re-rolls on this spatial cell.
const CLUSTER_CELL_M: f64 = 0.6;
// Spatial frequency range of a component, rad/m.
const KAPPA_MIN: f64 = 0.5;
const KAPPA_MAX: f64 = 2.0;
// Subcarrier frequency range of a component, rad/subcarrier.
const OMEGA_MIN: f64 = 0.06;
const OMEGA_MAX: f64 = 0.42;
// Overall amplitude scale before distance attenuation.
const BASE_AMP: f64 = 12.0;
// CSI amplitudes attenuate much more gently than RSS: in a small room the
// multipath interference pattern dominates the free-space loss.
const CSI_DISTANCE_EXP: f64 = 1.5;

impl SimScenario {
    fn with_room(room_w_m: f64, room_h_m: f64, seed: u64) -> Self {
        Self {
            room_w_m,
            room_h_m,
            ap_xy: (0.5, 0.5),
            grid_m: 0.5,
            n_clusters_range: (1, 6),
            noise_std: 0.05,
            antenna_offsets: [11, 23, 37],
            rss_path_loss_exp: 3.0,
            seed,
        }
    }

    /// 4 x 7 m mostly line-of-sight room.
    pub fn living_room(seed: u64) -> Self {
        Self::with_room(4.0, 7.0, seed)
    }

    /// 6 x 9 m cluttered room.
    pub fn laboratory(seed: u64) -> Self {
        Self::with_room(6.0, 9.0, seed)
    }

    pub fn validate(&self) -> Result<(), SimulatorError> {
        if !(self.room_w_m > 0.0 && self.room_h_m > 0.0) {
            return Err(SimulatorError::InvalidScenario(
                "room dimensions must be positive".into(),
            ));
        }
        if self.grid_m <= 0.0 || self.grid_m.is_nan() {
            return Err(SimulatorError::InvalidScenario(
                "grid spacing must be positive".into(),
            ));
        }
        let (lo, hi) = self.n_clusters_range;
        if lo < 1 || hi > 30 || lo > hi {
            return Err(SimulatorError::InvalidScenario(format!(
                "cluster range {lo}..{hi} outside [1, 30]"
            )));
        }
        if self.noise_std < 0.0 {
            return Err(SimulatorError::InvalidScenario(
                "noise_std must be >= 0".into(),
            ));
        }
        Ok(())
    }

    fn check_inside(&self, xy: (f64, f64)) -> Result<(), SimulatorError> {
        if xy.0 < 0.0 || xy.0 > self.room_w_m || xy.1 < 0.0 || xy.1 > self.room_h_m {
            return Err(SimulatorError::OutOfRoom(xy.0, xy.1));
        }
        Ok(())
    }
}

/// One surveyed point with its emitted packets.
#[derive(Debug, Clone)]
pub struct LabeledPoint {
    pub xy: (f64, f64),
    pub packets: Vec<CsiPacket>,
}

/// Train and test splits of a generated dataset; the point sets are
/// disjoint.
#[derive(Debug, Clone)]
pub struct GroundTruthSet {
    pub train_points: Vec<LabeledPoint>,
    pub test_points: Vec<LabeledPoint>,
}

/// Floor-plan presets with their packet budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// 38 training + 12 test points, 500/100 packets.
    LivingRoom,
    /// 50 training + 30 test points, 1000/100 packets.
    Laboratory,
    /// Grid fills the room at `grid_m` spacing; test points sit between
    /// training points.
    Custom,
}

impl Layout {
    pub fn default_packets_per_train(&self) -> usize {
        match self {
            Layout::LivingRoom => 500,
            Layout::Laboratory => 1000,
            Layout::Custom => 200,
        }
    }

    pub fn default_packets_per_test(&self) -> usize {
        100
    }
}

#[derive(Debug, Clone, Copy)]
struct PathComponent {
    weight: f64,
    kappa: (f64, f64),
    omega: f64,
    chi: f64,
}

fn scenario_paths(scenario: &SimScenario) -> Vec<PathComponent> {
    let mut rng = RngStream::seeded(hash_chain(&[scenario.seed, 0x7061_7468_73]));
    (0..PATH_COUNT)
        .map(|p| {
            let weight = (-0.25 * p as f64).exp() * (0.6 + 0.4 * rng.uniform());
            let mag = KAPPA_MIN + (KAPPA_MAX - KAPPA_MIN) * rng.uniform();
            let angle = std::f64::consts::TAU * rng.uniform();
            PathComponent {
                weight,
                kappa: (mag * angle.cos(), mag * angle.sin()),
                omega: OMEGA_MIN + (OMEGA_MAX - OMEGA_MIN) * rng.uniform(),
                chi: std::f64::consts::TAU * rng.uniform(),
            }
        })
        .collect()
}

// Per-antenna phase offset and gain factor for one path. Phases advance in
// 120-degree steps (times a per-path twist) from antenna to antenna, so each
// antenna sees the full interference contrast while the antenna-averaged
// response cancels most of the location-dependent interference terms.
fn antenna_mod(scenario: &SimScenario, antenna: usize, path: usize) -> (f64, f64) {
    let mut rng = RngStream::seeded(hash_chain(&[
        scenario.seed,
        scenario.antenna_offsets[antenna],
        path as u64,
    ]));
    let twist = (hash_chain(&[scenario.seed, 0x7477_6973_74, path as u64]) % 3) as f64;
    let jitter = 0.6 * rng.uniform();
    let phase = antenna as f64 * std::f64::consts::TAU / 3.0 * twist + jitter;
    let gain = 0.9 + 0.2 * rng.uniform();
    (phase, gain)
}

fn quantize_cm(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

fn cell_of(xy: (f64, f64), cell_m: f64) -> (i64, i64) {
    // Quantize to 1 cm first so float fuzz cannot move a point between cells.
    let qx = quantize_cm(xy.0) as f64 / 100.0;
    let qy = quantize_cm(xy.1) as f64 / 100.0;
    ((qx / cell_m).floor() as i64, (qy / cell_m).floor() as i64)
}

fn path_active(scenario: &SimScenario, xy: (f64, f64), path: usize) -> bool {
    if path < GATED_PATHS_FROM {
        return true;
    }
    let cell = cell_of(xy, GATE_CELL_M);
    hash_chain(&[
        scenario.seed,
        0x6761_7465,
        path as u64,
        cell.0 as u64,
        cell.1 as u64,
    ]) & 1
        == 0
}

/// Number of subcarrier clusters at a location. Drawn per coarse spatial
/// cell from a distribution peaked at 2-3 inside `n_clusters_range`.
pub fn cluster_count(scenario: &SimScenario, xy: (f64, f64)) -> usize {
    let (lo, hi) = scenario.n_clusters_range;
    if lo == hi {
        return lo;
    }
    let cell = cell_of(xy, CLUSTER_CELL_M);
    let u = (hash_chain(&[
        scenario.seed,
        0x636c_7573_7465_72,
        cell.0 as u64,
        cell.1 as u64,
    ]) >> 11) as f64
        / (1u64 << 53) as f64;

    // Triangle-ish weights peaked at 2.5 clusters.
    let weights: Vec<f64> = (lo..=hi)
        .map(|k| {
            let d = k as f64 - 2.5;
            1.0 / (1.0 + d * d).powi(2)
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (k, w) in (lo..=hi).zip(&weights) {
        acc += w / total;
        if u < acc {
            return k;
        }
    }
    hi
}

// Contiguous band partition of the 30 subcarriers: k - 1 distinct cut
// points hashed from the cluster cell and the antenna. Each antenna gets
// its own partition, so averaging antennas blurs the cluster structure.
fn band_boundaries(scenario: &SimScenario, xy: (f64, f64), antenna: usize, k: usize) -> Vec<usize> {
    let cell = cell_of(xy, CLUSTER_CELL_M);
    let mut rng = RngStream::seeded(hash_chain(&[
        scenario.seed,
        0x6261_6e64_73,
        scenario.antenna_offsets[antenna],
        cell.0 as u64,
        cell.1 as u64,
    ]));
    let mut cuts: Vec<usize> = Vec::with_capacity(k - 1);
    while cuts.len() < k - 1 {
        let c = 1 + (rng.uniform() * (SUBCARRIER_COUNT - 1) as f64) as usize;
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    cuts
}

/// Deterministic noise-free amplitude response of one antenna at one point:
/// 30 positive amplitudes forming `cluster_count` equal-amplitude bands.
pub fn channel_response(
    scenario: &SimScenario,
    xy: (f64, f64),
    antenna: usize,
) -> Result<[f64; SUBCARRIER_COUNT], SimulatorError> {
    scenario.validate()?;
    scenario.check_inside(xy)?;
    if antenna >= ANTENNA_COUNT {
        return Err(SimulatorError::InvalidScenario(format!(
            "antenna {antenna} out of range"
        )));
    }

    let paths = scenario_paths(scenario);
    let k = cluster_count(scenario, xy);
    let cuts = band_boundaries(scenario, xy, antenna, k);

    let d_ap = ((xy.0 - scenario.ap_xy.0).powi(2) + (xy.1 - scenario.ap_xy.1).powi(2)).sqrt();
    let atten = BASE_AMP / (1.0 + d_ap).powf(CSI_DISTANCE_EXP);

    // Band mean = |sum over active paths| evaluated at the band center.
    let band_mean = |center: f64| -> f64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (p, path) in paths.iter().enumerate() {
            if !path_active(scenario, xy, p) {
                continue;
            }
            let (phase_off, gain) = antenna_mod(scenario, antenna, p);
            let theta = path.kappa.0 * xy.0
                + path.kappa.1 * xy.1
                + path.omega * center
                + path.chi
                + phase_off;
            re += gain * path.weight * theta.cos();
            im += gain * path.weight * theta.sin();
        }
        // Floor keeps every band strictly positive even under cancellation.
        atten * (0.25 + (re * re + im * im).sqrt())
    };

    let mut response = [0.0; SUBCARRIER_COUNT];
    let mut start = 0usize;
    for end in cuts.iter().copied().chain([SUBCARRIER_COUNT]) {
        let center = (start + end - 1) as f64 / 2.0;
        let mean = band_mean(center);
        for slot in response.iter_mut().take(end).skip(start) {
            *slot = mean;
        }
        start = end;
    }
    Ok(response)
}

// Deterministic shadowing offset (dB) at a point: a sum of cosine plane
// waves keyed on the scenario seed.
fn shadow_db(scenario: &SimScenario, xy: (f64, f64)) -> f64 {
    let mut rng = RngStream::seeded(hash_chain(&[scenario.seed, 0x7368_6164_6f77]));
    let amp = SHADOW_STD_DB * (2.0 / SHADOW_COMPONENTS as f64).sqrt();
    let mut total = 0.0;
    for _ in 0..SHADOW_COMPONENTS {
        let mag = SHADOW_FREQ_MIN + (SHADOW_FREQ_MAX - SHADOW_FREQ_MIN) * rng.uniform();
        let angle = std::f64::consts::TAU * rng.uniform();
        let phase = std::f64::consts::TAU * rng.uniform();
        total += amp * (mag * (angle.cos() * xy.0 + angle.sin() * xy.1) + phase).cos();
    }
    total
}

/// RSS value (noise-free) at a point, dBm: log-distance path loss plus the
/// static shadowing field.
pub fn rss_mean_dbm(scenario: &SimScenario, xy: (f64, f64)) -> f64 {
    let d = ((xy.0 - scenario.ap_xy.0).powi(2) + (xy.1 - scenario.ap_xy.1).powi(2))
        .sqrt()
        .max(0.1);
    RSS_AT_1M_DBM - 10.0 * scenario.rss_path_loss_exp * d.log10() + shadow_db(scenario, xy)
}

/// Emits one recording session at a point: a session RSS baseline shift is
/// drawn once, then `count` packets via [`emit_packet`] with that shift
/// folded into their RSS readings.
pub fn emit_session(
    scenario: &SimScenario,
    xy: (f64, f64),
    count: usize,
    rng: &mut RngStream,
) -> Result<Vec<CsiPacket>, SimulatorError> {
    let session_shift = RSS_SESSION_STD_DB * rng.standard_normal();
    let session_scale = (1.0 + CSI_SESSION_SCALE_STD * rng.standard_normal()).max(0.5);
    (0..count)
        .map(|_| {
            let p = emit_packet(scenario, xy, rng)?;
            let amplitudes = p.amplitudes().iter().map(|a| a * session_scale).collect();
            let rss = p.rss.map(|r| r + session_shift);
            CsiPacket::new(amplitudes, rss, p.timestamp)
                .map_err(|e| SimulatorError::InvalidScenario(e.to_string()))
        })
        .collect()
}

/// One noisy packet at a point: base response per antenna times
/// `1 + N(0, noise_std)` (clamped positive), RSS from the path-loss model
/// plus `N(0, 2 dB)` noise.
pub fn emit_packet(
    scenario: &SimScenario,
    xy: (f64, f64),
    rng: &mut RngStream,
) -> Result<CsiPacket, SimulatorError> {
    scenario.check_inside(xy)?;
    let mut amplitudes = Vec::with_capacity(ANTENNA_COUNT * SUBCARRIER_COUNT);
    for antenna in 0..ANTENNA_COUNT {
        let base = channel_response(scenario, xy, antenna)?;
        for &b in &base {
            let noisy = b * (1.0 + scenario.noise_std * rng.standard_normal());
            amplitudes.push(noisy.max(1e-9));
        }
    }
    let rss = rss_mean_dbm(scenario, xy) + RSS_NOISE_STD_DB * rng.standard_normal();
    CsiPacket::new(amplitudes, Some(rss), None)
        .map_err(|e| SimulatorError::InvalidScenario(e.to_string()))
}

fn grid_points(origin: (f64, f64), cols: usize, rows: usize, step: f64) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            pts.push((origin.0 + c as f64 * step, origin.1 + r as f64 * step));
        }
    }
    pts
}

/// Training and test coordinate sets of a layout.
pub type PointSets = (Vec<(f64, f64)>, Vec<(f64, f64)>);

/// Training and test point geometry for a layout within a scenario.
pub fn layout_points(
    scenario: &SimScenario,
    layout: Layout,
) -> Result<PointSets, SimulatorError> {
    scenario.validate()?;
    match layout {
        Layout::LivingRoom => {
            // 5 x 10 grid at 0.5 m spacing; 12 test points on two vertical
            // lines, remaining 38 train.
            let all = grid_points((0.75, 1.0), 5, 10, 0.5);
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (i, p) in all.into_iter().enumerate() {
                let (col, row) = (i % 5, i / 5);
                if (col == 1 || col == 3) && (2..8).contains(&row) {
                    test.push(p);
                } else {
                    train.push(p);
                }
            }
            Ok((train, test))
        }
        Layout::Laboratory => {
            // 8 x 10 grid at 0.5 m spacing; 30 test points on three vertical
            // lines, remaining 50 train.
            let all = grid_points((1.0, 2.0), 8, 10, 0.5);
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (i, p) in all.into_iter().enumerate() {
                let col = i % 8;
                if col == 1 || col == 4 || col == 6 {
                    test.push(p);
                } else {
                    train.push(p);
                }
            }
            Ok((train, test))
        }
        Layout::Custom => {
            let margin = 0.5f64;
            let step = scenario.grid_m;
            let cols = (((scenario.room_w_m - 2.0 * margin) / step).floor() as usize + 1).max(1);
            let rows = (((scenario.room_h_m - 2.0 * margin) / step).floor() as usize + 1).max(1);
            let train = grid_points((margin, margin), cols, rows, step);
            // Test points interleave at half-grid offsets, every third one.
            let mut test = Vec::new();
            for (i, p) in train.iter().enumerate() {
                if i % 3 != 0 {
                    continue;
                }
                let q = (p.0 + step / 2.0, p.1 + step / 2.0);
                if q.0 <= scenario.room_w_m - margin / 2.0
                    && q.1 <= scenario.room_h_m - margin / 2.0
                {
                    test.push(q);
                }
            }
            Ok((train, test))
        }
    }
}

/// Generates a full ground-truth dataset with the layout's default packet
/// budgets.
pub fn generate(scenario: &SimScenario, layout: Layout) -> Result<GroundTruthSet, SimulatorError> {
    generate_with_counts(
        scenario,
        layout,
        layout.default_packets_per_train(),
        layout.default_packets_per_test(),
    )
}

/// [`generate`] with explicit per-point packet counts. Packet noise draws
/// are keyed on (scenario seed, point role, quantized coordinates), so
/// generation parallelizes per point and stays deterministic.
pub fn generate_with_counts(
    scenario: &SimScenario,
    layout: Layout,
    packets_per_train: usize,
    packets_per_test: usize,
) -> Result<GroundTruthSet, SimulatorError> {
    let (train_xy, test_xy) = layout_points(scenario, layout)?;

    let emit_point = |role: u64, xy: (f64, f64), count: usize| -> Result<LabeledPoint, SimulatorError> {
        let mut rng = RngStream::seeded(hash_chain(&[
            scenario.seed,
            role,
            quantize_cm(xy.0) as u64,
            quantize_cm(xy.1) as u64,
        ]));
        let packets = emit_session(scenario, xy, count, &mut rng)?;
        Ok(LabeledPoint { xy, packets })
    };

    let train_points: Vec<LabeledPoint> = train_xy
        .par_iter()
        .map(|&xy| emit_point(0x7472_6169_6e, xy, packets_per_train))
        .collect::<Result<_, _>>()?;
    let test_points: Vec<LabeledPoint> = test_xy
        .par_iter()
        .map(|&xy| emit_point(0x7465_7374, xy, packets_per_test))
        .collect::<Result<_, _>>()?;
    Ok(GroundTruthSet {
        train_points,
        test_points,
    })
}

/// Full 90-value base response (all three antennas) at a point.
pub fn full_response(
    scenario: &SimScenario,
    xy: (f64, f64),
) -> Result<Vec<f64>, SimulatorError> {
    let mut out = Vec::with_capacity(ANTENNA_COUNT * SUBCARRIER_COUNT);
    for antenna in 0..ANTENNA_COUNT {
        out.extend_from_slice(&channel_response(scenario, xy, antenna)?);
    }
    Ok(out)
}

/// Mean correlation of the 90-value responses of point pairs at each given
/// separation, over `n_pairs` seeded random pairs per distance.
pub fn correlation_by_distance(
    scenario: &SimScenario,
    distances: &[f64],
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>, SimulatorError> {
    scenario.validate()?;
    let mut rng = RngStream::seeded(hash_chain(&[scenario.seed, seed, 0x636f_7272]));
    let mut out = Vec::with_capacity(distances.len());
    for &d in distances {
        let mut total = 0.0;
        let mut count = 0usize;
        while count < n_pairs {
            let a = (
                rng.uniform() * scenario.room_w_m,
                rng.uniform() * scenario.room_h_m,
            );
            let angle = std::f64::consts::TAU * rng.uniform();
            let b = (a.0 + d * angle.cos(), a.1 + d * angle.sin());
            if b.0 < 0.0 || b.0 > scenario.room_w_m || b.1 < 0.0 || b.1 > scenario.room_h_m {
                continue;
            }
            let va = full_response(scenario, a)?;
            let vb = full_response(scenario, b)?;
            if let Ok(c) = crate::analysis::correlation(&va, &vb) {
                total += c;
                count += 1;
            }
        }
        out.push((d, total / n_pairs as f64));
    }
    Ok(out)
}
