//! Comparison localizers: averaged-CSI probabilistic matching, probabilistic
//! RSS, maximum-likelihood (single candidate), and KNN over raw features.
//!
//! These are approximations built only to the fidelity of one-sentence
//! descriptions, not replications of the original systems. All of them share
//! the locator's posterior fusion and return the same estimate type.

use thiserror::Error;

use crate::csi::{CsiPacket, ANTENNA_COUNT, CSI_DIM, SUBCARRIER_COUNT};
use crate::locator::{fuse_position, posterior_from_log, LocationEstimate, LocatorError};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("no training locations provided")]
    EmptyDb,
    #[error("no test packets provided")]
    EmptyInput,
    #[error("location {0} has no training packets")]
    EmptyLocation(usize),
    #[error("packets carry no RSS readings")]
    MissingRss,
    #[error("k must satisfy 1 <= k <= {n}, got {k}")]
    BadK { k: usize, n: usize },
    #[error(transparent)]
    Locator(#[from] LocatorError),
}

// Gaussian std floor against constant features.
const STD_FLOOR: f64 = 1e-3;

/// Per-location stored features for every baseline method:
/// antenna-averaged CSI mean/std (30-dim), RSS mean/std (scalar, when
/// available), and the raw 90-dim mean vector for KNN.
#[derive(Debug, Clone)]
pub struct BaselineDb {
    locations: Vec<(f64, f64)>,
    csi_mean: Vec<Vec<f64>>,
    csi_std: Vec<Vec<f64>>,
    rss_mean: Vec<Option<f64>>,
    rss_std: Vec<Option<f64>>,
    knn_feature: Vec<Vec<f64>>,
}

/// Antenna-averaged 30-dim amplitude vector of one packet.
fn antenna_averaged(packet: &CsiPacket) -> Vec<f64> {
    let amps = packet.amplitudes();
    (0..SUBCARRIER_COUNT)
        .map(|s| {
            (0..ANTENNA_COUNT)
                .map(|a| amps[SUBCARRIER_COUNT * a + s])
                .sum::<f64>()
                / ANTENNA_COUNT as f64
        })
        .collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt().max(STD_FLOOR))
}

impl BaselineDb {
    /// Builds all per-location features from training data.
    pub fn build(training: &[((f64, f64), Vec<CsiPacket>)]) -> Result<Self, BaselineError> {
        if training.is_empty() {
            return Err(BaselineError::EmptyDb);
        }
        let mut db = BaselineDb {
            locations: Vec::new(),
            csi_mean: Vec::new(),
            csi_std: Vec::new(),
            rss_mean: Vec::new(),
            rss_std: Vec::new(),
            knn_feature: Vec::new(),
        };
        for (idx, (xy, packets)) in training.iter().enumerate() {
            if packets.is_empty() {
                return Err(BaselineError::EmptyLocation(idx));
            }
            db.locations.push(*xy);

            let averaged: Vec<Vec<f64>> = packets.iter().map(antenna_averaged).collect();
            let mut mean30 = Vec::with_capacity(SUBCARRIER_COUNT);
            let mut std30 = Vec::with_capacity(SUBCARRIER_COUNT);
            for s in 0..SUBCARRIER_COUNT {
                let col: Vec<f64> = averaged.iter().map(|v| v[s]).collect();
                let (m, sd) = mean_std(&col);
                mean30.push(m);
                std30.push(sd);
            }
            db.csi_mean.push(mean30);
            db.csi_std.push(std30);

            let rss: Vec<f64> = packets.iter().filter_map(|p| p.rss).collect();
            if rss.is_empty() {
                db.rss_mean.push(None);
                db.rss_std.push(None);
            } else {
                let (m, sd) = mean_std(&rss);
                db.rss_mean.push(Some(m));
                db.rss_std.push(Some(sd));
            }

            let mut mean90 = vec![0.0; CSI_DIM];
            for p in packets {
                for (acc, &x) in mean90.iter_mut().zip(p.amplitudes().iter()) {
                    *acc += x;
                }
            }
            for acc in &mut mean90 {
                *acc /= packets.len() as f64;
            }
            db.knn_feature.push(mean90);
        }
        Ok(db)
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[(f64, f64)] {
        &self.locations
    }
}

fn check_packets(packets: &[CsiPacket]) -> Result<(), BaselineError> {
    if packets.is_empty() {
        return Err(BaselineError::EmptyInput);
    }
    Ok(())
}

fn estimate_from_logliks(
    db: &BaselineDb,
    logliks: &[f64],
) -> Result<LocationEstimate, BaselineError> {
    let post = posterior_from_log(logliks)?;
    let xy = fuse_position(&db.locations, &post.probs);
    Ok(LocationEstimate {
        xy,
        posterior: post.probs,
        likelihoods: logliks.iter().map(|l| l.exp()).collect(),
        degenerate: post.degenerate,
    })
}

/// Averaged-CSI matcher: the antenna-averaged test vector (mean over the
/// packets) is scored against each location's stored per-subcarrier Gaussian
/// and fused into a posterior-weighted position.
pub fn fifs_estimate(
    db: &BaselineDb,
    packets: &[CsiPacket],
) -> Result<LocationEstimate, BaselineError> {
    check_packets(packets)?;
    let averaged: Vec<Vec<f64>> = packets.iter().map(antenna_averaged).collect();
    let test: Vec<f64> = (0..SUBCARRIER_COUNT)
        .map(|s| averaged.iter().map(|v| v[s]).sum::<f64>() / averaged.len() as f64)
        .collect();

    let logliks: Vec<f64> = (0..db.len())
        .map(|i| {
            test.iter()
                .zip(&db.csi_mean[i])
                .zip(&db.csi_std[i])
                .map(|((t, mean), std)| {
                    let z = (t - mean) / std;
                    -0.5 * z * z - std.ln()
                })
                .sum()
        })
        .collect();
    estimate_from_logliks(db, &logliks)
}

fn rss_logliks(db: &BaselineDb, packets: &[CsiPacket]) -> Result<Vec<f64>, BaselineError> {
    let rss: Vec<f64> = packets.iter().filter_map(|p| p.rss).collect();
    if rss.is_empty() {
        return Err(BaselineError::MissingRss);
    }
    let test = rss.iter().sum::<f64>() / rss.len() as f64;
    (0..db.len())
        .map(|i| match (db.rss_mean[i], db.rss_std[i]) {
            (Some(m), Some(sd)) => {
                let z = (test - m) / sd;
                Ok(-0.5 * z * z - sd.ln())
            }
            _ => Err(BaselineError::MissingRss),
        })
        .collect()
}

/// Probabilistic RSS matcher: scalar Gaussian likelihood per location,
/// posterior-weighted average position.
pub fn horus_estimate(
    db: &BaselineDb,
    packets: &[CsiPacket],
) -> Result<LocationEstimate, BaselineError> {
    check_packets(packets)?;
    let logliks = rss_logliks(db, packets)?;
    estimate_from_logliks(db, &logliks)
}

/// Maximum-likelihood RSS matcher: the single best reference location is
/// returned verbatim with a one-hot posterior. Ties break toward the lowest
/// location index.
pub fn ml_estimate(
    db: &BaselineDb,
    packets: &[CsiPacket],
) -> Result<LocationEstimate, BaselineError> {
    check_packets(packets)?;
    let logliks = rss_logliks(db, packets)?;
    let mut best = 0usize;
    for (i, &ll) in logliks.iter().enumerate() {
        if ll > logliks[best] {
            best = i;
        }
    }
    let mut post = vec![0.0; db.len()];
    post[best] = 1.0;
    Ok(LocationEstimate {
        xy: db.locations[best],
        posterior: post,
        likelihoods: logliks.iter().map(|l| l.exp()).collect(),
        degenerate: false,
    })
}

/// KNN over the raw 90-dim mean amplitude vectors: inverse-Euclidean-
/// distance-weighted average of the k nearest stored features.
pub fn knn_estimate(
    db: &BaselineDb,
    packets: &[CsiPacket],
    k: usize,
) -> Result<LocationEstimate, BaselineError> {
    check_packets(packets)?;
    if k == 0 || k > db.len() {
        return Err(BaselineError::BadK { k, n: db.len() });
    }
    let mut test = vec![0.0; CSI_DIM];
    for p in packets {
        for (acc, &x) in test.iter_mut().zip(p.amplitudes().iter()) {
            *acc += x;
        }
    }
    for acc in &mut test {
        *acc /= packets.len() as f64;
    }

    let mut dists: Vec<(f64, usize)> = db
        .knn_feature
        .iter()
        .enumerate()
        .map(|(i, feat)| {
            let d2: f64 = feat
                .iter()
                .zip(&test)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2.sqrt(), i)
        })
        .collect();
    // Stable ordering: ties resolve toward the lower index.
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));

    let mut weights = vec![0.0; db.len()];
    for &(d, i) in dists.iter().take(k) {
        weights[i] = 1.0 / d.max(1e-9);
    }
    let total: f64 = weights.iter().sum();
    let posterior: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let xy = fuse_position(&db.locations, &posterior);
    Ok(LocationEstimate {
        xy,
        posterior,
        likelihoods: weights,
        degenerate: false,
    })
}
