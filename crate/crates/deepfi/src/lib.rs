//! Per-location deep-autoencoder fingerprinting over WiFi channel state
//! information, with Bayesian RBF fusion for online localization.
//!
//! The crate covers the full desk-scale workflow:
//!
//! - [`csi`] — packet domain types and min-max normalization into (0, 1);
//! - [`rbm`] — sigmoid-unit RBMs trained by one-step contrastive divergence;
//! - [`deepnet`] — greedy layer-wise pretraining, unrolling into an 8-layer
//!   autoencoder, and backprop fine-tuning, one model per surveyed location;
//! - [`locator`] — reconstruction-distance RBF likelihoods fused across
//!   reference locations into a posterior-weighted position estimate;
//! - [`simulator`] — a synthetic multipath CSI/RSS generator with ground
//!   truth, calibrated to the stability/cluster/correlation statistics the
//!   approach relies on;
//! - [`baselines`] — averaged-CSI, probabilistic-RSS, maximum-likelihood and
//!   KNN comparison localizers;
//! - [`analysis`] — error metrics, empirical CDFs, cluster counting and
//!   correlation studies;
//! - [`datastore`] — binary fingerprint databases and the CSV dataset format.
//!
//! Start with the runnable programs under `examples/`; each one drives a
//! single capability end to end. The `deepfi` binary wires the same pieces
//! into `simulate`/`train`/`localize`/`benchmark`/`analyze` subcommands.

pub mod analysis;
pub mod baselines;
pub mod cli;
pub mod csi;
pub mod datastore;
pub mod deepnet;
pub mod locator;
pub mod rbm;
pub mod rng;
pub mod simulator;

pub use csi::{
    dispersion, fit_normalization, normalize, AntennaSelection, CsiPacket, DispersionStats,
    NormalizationParams, NormalizedCsi, SigmaMode,
};
pub use deepnet::{
    fine_tune, pretrain, train_location, unroll, FingerprintModel, NetShape, TrainConfig,
};
pub use locator::{
    estimate, BatchConfig, DbFlags, DistanceMetric, FingerprintDatabase, LocationEstimate,
    LocationRecord,
};
pub use rbm::{sample_bernoulli, CdSampling, Rbm};
pub use rng::RngStream;
pub use simulator::{GroundTruthSet, Layout, SimScenario};
