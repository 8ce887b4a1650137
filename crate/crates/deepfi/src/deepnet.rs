//! Per-location deep autoencoder: greedy layer-wise pretraining of a 4-RBM
//! stack, unrolling into an 8-layer encoder/decoder with transposed weights,
//! and fine-tuning by backpropagation on the reconstruction error.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::csi::{
    self, AntennaSelection, CsiError, CsiPacket, NormalizationParams, NormalizedCsi,
};
use crate::rbm::{logistic, CdSampling, Rbm, RbmError};
use crate::rng::{hash_chain, RngStream};

#[derive(Debug, Error)]
pub enum DeepnetError {
    #[error("no training inputs provided")]
    EmptyInput,
    #[error("need at least 2 packets to train a location, got {0}")]
    TooFewPackets(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid network shape: {0}")]
    InvalidShape(String),
    #[error("fine-tuning diverged: reconstruction error became non-finite")]
    Divergence,
    #[error(transparent)]
    Rbm(#[from] RbmError),
    #[error(transparent)]
    Csi(#[from] CsiError),
}

/// Hidden-layer widths of the deep network. Widths shrink toward the code
/// layer: `k1 > k2 > k3 > k4 >= 1`. `n_in` is 90 for whole-packet inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetShape {
    pub n_in: usize,
    pub k1: usize,
    pub k2: usize,
    pub k3: usize,
    pub k4: usize,
}

impl NetShape {
    /// Shape over the standard 90-value input.
    pub fn new(k1: usize, k2: usize, k3: usize, k4: usize) -> Result<Self, DeepnetError> {
        Self::with_input(csi::CSI_DIM, k1, k2, k3, k4)
    }

    /// Shape over an arbitrary input width (30 for single-antenna variants,
    /// tiny widths in tests).
    pub fn with_input(
        n_in: usize,
        k1: usize,
        k2: usize,
        k3: usize,
        k4: usize,
    ) -> Result<Self, DeepnetError> {
        if n_in == 0 {
            return Err(DeepnetError::InvalidShape("input width must be >= 1".into()));
        }
        if !(k1 > k2 && k2 > k3 && k3 > k4 && k4 >= 1) {
            return Err(DeepnetError::InvalidShape(format!(
                "require k1 > k2 > k3 > k4 >= 1, got {k1},{k2},{k3},{k4}"
            )));
        }
        Ok(Self { n_in, k1, k2, k3, k4 })
    }

    /// (visible, hidden) dimensions of the four stacked RBMs.
    pub fn layer_dims(&self) -> [(usize, usize); 4] {
        [
            (self.n_in, self.k1),
            (self.k1, self.k2),
            (self.k2, self.k3),
            (self.k3, self.k4),
        ]
    }
}

/// Training knobs for one location's deep network.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    /// CD-1 step size.
    pub alpha: f64,
    /// Full passes over the packets per RBM layer.
    pub pretrain_epochs: usize,
    /// Full backprop passes after unrolling.
    pub finetune_epochs: usize,
    /// Backprop step size (halved on retries, see [`fine_tune`]).
    pub finetune_lr: f64,
    pub seed: u64,
    pub cd_sampling: CdSampling,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            pretrain_epochs: 50,
            finetune_epochs: 30,
            finetune_lr: 0.005,
            seed: 0,
            cd_sampling: CdSampling::Probabilities,
        }
    }
}

/// A trained per-location autoencoder: four encoder and four decoder layers
/// plus the normalization limits the location was trained under.
///
/// Straight out of [`unroll`] the decoder weights are the transposed encoder
/// weights (tied); [`fine_tune`] updates all eight matrices independently.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintModel {
    pub shape: NetShape,
    pub enc_w: Vec<Array2<f64>>,
    pub enc_b: Vec<Array1<f64>>,
    pub dec_w: Vec<Array2<f64>>,
    pub dec_b: Vec<Array1<f64>>,
    pub norm: NormalizationParams,
    pub location: (f64, f64),
}

impl FingerprintModel {
    /// Forward pass through all eight sigmoid layers; output has `n_in`
    /// entries, each strictly inside (0, 1).
    pub fn reconstruct(&self, v: &NormalizedCsi) -> Result<Array1<f64>, DeepnetError> {
        self.reconstruct_opts(v, true)
    }

    /// [`FingerprintModel::reconstruct`] with bias terms optionally dropped
    /// from the propagation.
    pub fn reconstruct_opts(
        &self,
        v: &NormalizedCsi,
        bias_forward: bool,
    ) -> Result<Array1<f64>, DeepnetError> {
        if v.len() != self.shape.n_in {
            return Err(DeepnetError::ShapeMismatch(format!(
                "input length {} != n_in {}",
                v.len(),
                self.shape.n_in
            )));
        }
        let mut a = Array1::from_vec(v.values().to_vec());
        for (w, b) in self.layers() {
            let mut z = a.dot(w);
            if bias_forward {
                z += b;
            }
            a = z.mapv(logistic);
        }
        Ok(a)
    }

    /// Activations of every layer, input included: `a[0] = v`, `a[8] = v_hat`.
    fn forward_activations(&self, v: &Array1<f64>) -> Vec<Array1<f64>> {
        let mut acts = Vec::with_capacity(9);
        acts.push(v.clone());
        for (w, b) in self.layers() {
            let mut z = acts.last().unwrap().dot(w);
            z += b;
            acts.push(z.mapv(logistic));
        }
        acts
    }

    /// Encoder then decoder layers, in propagation order.
    fn layers(&self) -> impl Iterator<Item = (&Array2<f64>, &Array1<f64>)> {
        self.enc_w
            .iter()
            .zip(&self.enc_b)
            .chain(self.dec_w.iter().zip(&self.dec_b))
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = (&mut Array2<f64>, &mut Array1<f64>)> {
        self.enc_w
            .iter_mut()
            .zip(&mut self.enc_b)
            .chain(self.dec_w.iter_mut().zip(&mut self.dec_b))
    }

    /// Mutable access to one of the eight (weight, bias) layers in
    /// propagation order. Mostly useful for gradient probing in tests.
    pub fn layer_mut(&mut self, index: usize) -> (&mut Array2<f64>, &mut Array1<f64>) {
        self.layers_mut().nth(index).expect("layer index < 8")
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .all(|(w, b)| w.iter().all(|x| x.is_finite()) && b.iter().all(|x| x.is_finite()))
    }
}

/// Gradient of the squared reconstruction error with respect to every weight
/// matrix and bias vector, in propagation order (4 encoder, then 4 decoder).
#[derive(Debug, Clone)]
pub struct ModelGradient {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

/// Squared reconstruction error `0.5 * ||v - v_hat||^2` of one input.
pub fn reconstruction_error(
    model: &FingerprintModel,
    v: &NormalizedCsi,
) -> Result<f64, DeepnetError> {
    let v_hat = model.reconstruct(v)?;
    Ok(v
        .values()
        .iter()
        .zip(v_hat.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        * 0.5)
}

/// Mean of [`reconstruction_error`] over a packet set.
pub fn mean_reconstruction_error(
    model: &FingerprintModel,
    inputs: &[NormalizedCsi],
) -> Result<f64, DeepnetError> {
    if inputs.is_empty() {
        return Err(DeepnetError::EmptyInput);
    }
    let mut total = 0.0;
    for v in inputs {
        total += reconstruction_error(model, v)?;
    }
    Ok(total / inputs.len() as f64)
}

/// Backprop gradient of `0.5 * ||v - v_hat||^2` through all eight layers.
pub fn reconstruction_gradient(
    model: &FingerprintModel,
    v: &NormalizedCsi,
) -> Result<ModelGradient, DeepnetError> {
    if v.len() != model.shape.n_in {
        return Err(DeepnetError::ShapeMismatch(format!(
            "input length {} != n_in {}",
            v.len(),
            model.shape.n_in
        )));
    }
    let input = Array1::from_vec(v.values().to_vec());
    let acts = model.forward_activations(&input);
    let weights: Vec<&Array2<f64>> = model.enc_w.iter().chain(model.dec_w.iter()).collect();

    let out = &acts[8];
    // delta_8 = (v_hat - v) .* s'(z_8), with s'(z) = a (1 - a).
    let mut delta = Array1::from_shape_fn(out.len(), |i| {
        (out[i] - input[i]) * out[i] * (1.0 - out[i])
    });

    let mut gw: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); 8];
    let mut gb: Vec<Array1<f64>> = vec![Array1::zeros(0); 8];
    for layer in (0..8).rev() {
        let a_prev = &acts[layer];
        gw[layer] = outer(a_prev, &delta);
        gb[layer] = delta.clone();
        if layer > 0 {
            let back = weights[layer].dot(&delta);
            delta = Array1::from_shape_fn(a_prev.len(), |i| {
                back[i] * a_prev[i] * (1.0 - a_prev[i])
            });
        }
    }
    Ok(ModelGradient { w: gw, b: gb })
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let (n, m) = (a.len(), b.len());
    Array2::from_shape_fn((n, m), |(i, j)| a[i] * b[j])
}

/// Greedy layer-wise CD-1 pretraining.
///
/// The first RBM trains on the raw inputs; each later RBM trains on hidden
/// activations propagated through the frozen layers below it. Deterministic
/// given `cfg.seed`; `pretrain_epochs = 0` returns the four freshly
/// initialized machines untouched.
pub fn pretrain(
    inputs: &[NormalizedCsi],
    shape: &NetShape,
    cfg: &TrainConfig,
) -> Result<Vec<Rbm>, DeepnetError> {
    if inputs.is_empty() {
        return Err(DeepnetError::EmptyInput);
    }
    for v in inputs {
        if v.len() != shape.n_in {
            return Err(DeepnetError::ShapeMismatch(format!(
                "packet length {} != n_in {}",
                v.len(),
                shape.n_in
            )));
        }
    }

    let mut rng = RngStream::seeded(cfg.seed);
    let mut layer_inputs: Vec<Array1<f64>> = inputs
        .iter()
        .map(|v| Array1::from_vec(v.values().to_vec()))
        .collect();

    let mut rbms = Vec::with_capacity(4);
    for (n_vis, n_hid) in shape.layer_dims() {
        let mut rbm = Rbm::gaussian_init(n_vis, n_hid, &mut rng);
        for _epoch in 0..cfg.pretrain_epochs {
            for v in &layer_inputs {
                rbm.cd1_in_place(v, cfg.alpha, &mut rng, cfg.cd_sampling)?;
            }
        }
        // Freeze and propagate activation probabilities upward.
        layer_inputs = layer_inputs
            .iter()
            .map(|v| rbm.hidden_activation(v))
            .collect::<Result<_, _>>()?;
        rbms.push(rbm);
    }
    Ok(rbms)
}

/// Unrolls a pretrained stack into an autoencoder: encoder weights are the
/// RBM weights with their hidden biases, decoder weights are the transposes
/// in reverse order with the matching visible biases.
pub fn unroll(
    rbms: &[Rbm],
    norm: NormalizationParams,
    location: (f64, f64),
) -> Result<FingerprintModel, DeepnetError> {
    if rbms.len() != 4 {
        return Err(DeepnetError::ShapeMismatch(format!(
            "expected 4 RBMs, got {}",
            rbms.len()
        )));
    }
    for pair in rbms.windows(2) {
        if pair[0].n_hidden() != pair[1].n_visible() {
            return Err(DeepnetError::ShapeMismatch(format!(
                "layer chain broken: {} hidden -> {} visible",
                pair[0].n_hidden(),
                pair[1].n_visible()
            )));
        }
    }
    let shape = NetShape::with_input(
        rbms[0].n_visible(),
        rbms[0].n_hidden(),
        rbms[1].n_hidden(),
        rbms[2].n_hidden(),
        rbms[3].n_hidden(),
    )?;

    let enc_w: Vec<Array2<f64>> = rbms.iter().map(|r| r.w.clone()).collect();
    let enc_b: Vec<Array1<f64>> = rbms.iter().map(|r| r.b_hid.clone()).collect();
    let dec_w: Vec<Array2<f64>> = rbms.iter().rev().map(|r| r.w.t().to_owned()).collect();
    let dec_b: Vec<Array1<f64>> = rbms.iter().rev().map(|r| r.b_vis.clone()).collect();

    Ok(FingerprintModel {
        shape,
        enc_w,
        enc_b,
        dec_w,
        dec_b,
        norm,
        location,
    })
}

// Retries allowed after the initial fine-tuning attempt, halving the step.
const FINETUNE_RETRIES: usize = 5;
const FINETUNE_TOLERANCE: f64 = 1e-9;

/// Stochastic gradient descent on the reconstruction error through all eight
/// layers, untying the decoder from the encoder.
///
/// The mean training error must not rise from start to finish (within 1e-9);
/// if an attempt violates that, the step size halves and training restarts
/// from the input model, up to five retries. A finite but still-increased
/// final attempt falls back to the unmodified input model; a non-finite one
/// is a [`DeepnetError::Divergence`].
pub fn fine_tune(
    model: &FingerprintModel,
    inputs: &[NormalizedCsi],
    cfg: &TrainConfig,
) -> Result<FingerprintModel, DeepnetError> {
    if inputs.is_empty() {
        return Err(DeepnetError::EmptyInput);
    }
    if cfg.finetune_epochs == 0 {
        return Ok(model.clone());
    }
    let base_err = mean_reconstruction_error(model, inputs)?;

    let mut lr = cfg.finetune_lr;
    let mut last_nonfinite = false;
    for _attempt in 0..=FINETUNE_RETRIES {
        let mut candidate = model.clone();
        let mut diverged = false;
        'epochs: for _ in 0..cfg.finetune_epochs {
            for v in inputs {
                let grad = reconstruction_gradient(&candidate, v)?;
                for (idx, (w, b)) in candidate.layers_mut().enumerate() {
                    w.scaled_add(-lr, &grad.w[idx]);
                    b.scaled_add(-lr, &grad.b[idx]);
                }
                if !candidate.is_finite() {
                    diverged = true;
                    break 'epochs;
                }
            }
        }
        if !diverged {
            let err = mean_reconstruction_error(&candidate, inputs)?;
            if err.is_finite() && err <= base_err + FINETUNE_TOLERANCE {
                return Ok(candidate);
            }
            last_nonfinite = !err.is_finite();
        } else {
            last_nonfinite = true;
        }
        lr *= 0.5;
    }
    if last_nonfinite {
        return Err(DeepnetError::Divergence);
    }
    // Every attempt finished finite but above the starting error; keep the
    // pretrained weights so the error is unchanged rather than worse.
    Ok(model.clone())
}

/// Full offline training for one location: fit normalization, normalize,
/// pretrain, unroll, fine-tune.
pub fn train_location(
    packets: &[CsiPacket],
    shape: &NetShape,
    cfg: &TrainConfig,
    location: (f64, f64),
) -> Result<FingerprintModel, DeepnetError> {
    train_location_selected(packets, AntennaSelection::All, shape, cfg, location)
}

/// [`train_location`] over a restricted antenna selection; `shape.n_in`
/// must match the selection width.
pub fn train_location_selected(
    packets: &[CsiPacket],
    selection: AntennaSelection,
    shape: &NetShape,
    cfg: &TrainConfig,
    location: (f64, f64),
) -> Result<FingerprintModel, DeepnetError> {
    if packets.len() < 2 {
        return Err(DeepnetError::TooFewPackets(packets.len()));
    }
    if shape.n_in != selection.dim() {
        return Err(DeepnetError::ShapeMismatch(format!(
            "shape n_in {} != selection width {}",
            shape.n_in,
            selection.dim()
        )));
    }
    let norm = csi::fit_normalization_selected(packets, selection)?;
    let inputs: Vec<NormalizedCsi> = packets
        .iter()
        .map(|p| csi::normalize_selected(p, selection, &norm))
        .collect();
    let rbms = pretrain(&inputs, shape, cfg)?;
    let model = unroll(&rbms, norm, location)?;
    fine_tune(&model, &inputs, cfg)
}

/// Stable per-location seed so training is reproducible and independent of
/// the order locations are processed in.
pub fn location_seed(master: u64, location: (f64, f64)) -> u64 {
    let qx = (location.0 * 100.0).round() as i64 as u64;
    let qy = (location.1 * 100.0).round() as i64 as u64;
    hash_chain(&[master, 0x6c6f_6361_7469_6f6e, qx, qy])
}
