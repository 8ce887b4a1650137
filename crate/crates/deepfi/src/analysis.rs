//! Metrics and figure-style analytics: mean sum error, empirical CDFs,
//! per-dimension stability ratios, subcarrier cluster counting, Pearson
//! correlation.

use thiserror::Error;

use crate::csi::{CsiPacket, CSI_DIM};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("input lists differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("vectors have zero variance, correlation undefined")]
    ZeroVariance,
}

/// Mean Euclidean distance between estimated and true positions.
pub fn mean_sum_error(
    estimates: &[(f64, f64)],
    truths: &[(f64, f64)],
) -> Result<f64, AnalysisError> {
    if estimates.len() != truths.len() {
        return Err(AnalysisError::LengthMismatch(estimates.len(), truths.len()));
    }
    if estimates.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let total: f64 = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| ((e.0 - t.0).powi(2) + (e.1 - t.1).powi(2)).sqrt())
        .sum();
    Ok(total / estimates.len() as f64)
}

/// Sorted empirical CDF points `(value, cumulative_fraction)`; duplicate
/// values merge into one point carrying the upper fraction.
pub fn error_cdf(errors: &[f64]) -> Vec<(f64, f64)> {
    if errors.is_empty() {
        return Vec::new();
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
    let n = sorted.len() as f64;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => points.push((v, frac)),
        }
    }
    points
}

/// Per-dimension std/mean ratios of the 90 amplitude entries, one ratio per
/// (location, dimension). Constant dimensions yield 0.
pub fn stability_ratios(per_location: &[Vec<CsiPacket>]) -> Vec<f64> {
    let mut ratios = Vec::new();
    for packets in per_location {
        if packets.is_empty() {
            continue;
        }
        for dim in 0..CSI_DIM {
            let vals: Vec<f64> = packets.iter().map(|p| p.amplitudes()[dim]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            if mean <= 0.0 {
                ratios.push(0.0);
                continue;
            }
            let var =
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            ratios.push(var.sqrt() / mean);
        }
    }
    ratios
}

/// CDF of [`stability_ratios`].
pub fn stability_cdf(per_location: &[Vec<CsiPacket>]) -> Vec<(f64, f64)> {
    error_cdf(&stability_ratios(per_location))
}

/// RSS std/mean ratios per location, computed on the linear amplitude scale
/// (`10^(dBm/20)`); locations without RSS readings are skipped.
pub fn rss_stability_ratios(per_location: &[Vec<CsiPacket>]) -> Vec<f64> {
    let mut ratios = Vec::new();
    for packets in per_location {
        let vals: Vec<f64> = packets
            .iter()
            .filter_map(|p| p.rss)
            .map(|dbm| 10f64.powf(dbm / 20.0))
            .collect();
        if vals.len() < 2 {
            continue;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        if mean <= 0.0 {
            continue;
        }
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        ratios.push(var.sqrt() / mean);
    }
    ratios
}

/// Default gap tolerance for [`count_clusters`], as a fraction of the
/// amplitude range.
pub const CLUSTER_TOLERANCE: f64 = 0.15;

/// 1-D agglomerative cluster count: sort the amplitudes and split wherever
/// an adjacent gap exceeds `tolerance * (max - min)`. A constant vector is
/// one cluster.
pub fn count_clusters(amplitudes: &[f64], tolerance: f64) -> usize {
    if amplitudes.is_empty() {
        return 0;
    }
    let mut sorted = amplitudes.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite amplitudes"));
    let range = sorted[sorted.len() - 1] - sorted[0];
    if range <= 0.0 {
        return 1;
    }
    let mut clusters = 1;
    for pair in sorted.windows(2) {
        if pair[1] - pair[0] > tolerance * range {
            clusters += 1;
        }
    }
    clusters
}

/// Pearson correlation coefficient of two equal-length vectors.
pub fn correlation(v1: &[f64], v2: &[f64]) -> Result<f64, AnalysisError> {
    if v1.len() != v2.len() {
        return Err(AnalysisError::LengthMismatch(v1.len(), v2.len()));
    }
    if v1.len() < 2 {
        return Err(AnalysisError::EmptyInput);
    }
    let n = v1.len() as f64;
    let m1 = v1.iter().sum::<f64>() / n;
    let m2 = v2.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for (a, b) in v1.iter().zip(v2) {
        cov += (a - m1) * (b - m2);
        s1 += (a - m1) * (a - m1);
        s2 += (b - m2) * (b - m2);
    }
    if s1 <= 0.0 || s2 <= 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok(cov / (s1.sqrt() * s2.sqrt()))
}
