//! Restricted Boltzmann Machine with sigmoid units and CD-1 training.
//!
//! One RBM covers one layer pair of the deep network. Visible units accept
//! real values in [0, 1], treated as expected Bernoulli activations, which
//! lets normalized CSI amplitudes feed the first layer directly.

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::rng::RngStream;

#[derive(Debug, Error)]
pub enum RbmError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("probability {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("update produced a non-finite parameter")]
    NonFinite,
    #[error("enumeration guard exceeded: {units} units > {max}")]
    TooLarge { units: usize, max: usize },
    #[error("expected a binary vector, entry {index} = {value}")]
    NotBinary { index: usize, value: f64 },
    #[error("negative step size {0}")]
    NegativeAlpha(f64),
}

/// Units above this total are refused by the exact-likelihood enumeration.
pub const ENUMERATION_GUARD: usize = 20;

// Keeps logistic outputs strictly inside (0, 1) even when the argument
// saturates in f64.
const SIGMOID_FLOOR: f64 = 1e-12;

pub(crate) fn logistic(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s.clamp(SIGMOID_FLOOR, 1.0 - SIGMOID_FLOOR)
}

/// How the CD-1 statistics are formed.
///
/// `Probabilities` (default) uses activation probabilities on the data side
/// and for the reconstruction pass, sampling only the hidden state that
/// drives the reconstruction. `Full` samples every intermediate state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CdSampling {
    #[default]
    Probabilities,
    Full,
}

/// A bipartite energy model: weights `w` (n_visible x n_hidden) plus visible
/// and hidden biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Rbm {
    pub w: Array2<f64>,
    pub b_vis: Array1<f64>,
    pub b_hid: Array1<f64>,
}

impl Rbm {
    /// Zero weights and biases.
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            w: Array2::zeros((n_visible, n_hidden)),
            b_vis: Array1::zeros(n_visible),
            b_hid: Array1::zeros(n_hidden),
        }
    }

    /// Standard init: weights 0.1 * standard normal, biases zero.
    pub fn gaussian_init(n_visible: usize, n_hidden: usize, rng: &mut RngStream) -> Self {
        let w = Array2::from_shape_fn((n_visible, n_hidden), |_| 0.1 * rng.standard_normal());
        Self {
            w,
            b_vis: Array1::zeros(n_visible),
            b_hid: Array1::zeros(n_hidden),
        }
    }

    pub fn n_visible(&self) -> usize {
        self.w.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.w.ncols()
    }

    fn check_visible(&self, v: &Array1<f64>) -> Result<(), RbmError> {
        if v.len() != self.n_visible() {
            return Err(RbmError::ShapeMismatch(format!(
                "visible vector length {} != {}",
                v.len(),
                self.n_visible()
            )));
        }
        Ok(())
    }

    fn check_hidden(&self, h: &Array1<f64>) -> Result<(), RbmError> {
        if h.len() != self.n_hidden() {
            return Err(RbmError::ShapeMismatch(format!(
                "hidden vector length {} != {}",
                h.len(),
                self.n_hidden()
            )));
        }
        Ok(())
    }

    /// `Pr(h_i = 1 | v)`: logistic of `b_hid[i] + sum_j w[j,i] v[j]`.
    pub fn hidden_activation(&self, v: &Array1<f64>) -> Result<Array1<f64>, RbmError> {
        self.check_visible(v)?;
        let mut act = v.dot(&self.w);
        act += &self.b_hid;
        Ok(act.mapv(logistic))
    }

    /// `Pr(v_i = 1 | h)`: logistic of `b_vis[i] + sum_j w[i,j] h[j]`.
    pub fn visible_activation(&self, h: &Array1<f64>) -> Result<Array1<f64>, RbmError> {
        self.check_hidden(h)?;
        let mut act = self.w.dot(h);
        act += &self.b_vis;
        Ok(act.mapv(logistic))
    }

    /// A machine with visible and hidden sides swapped.
    pub fn transposed(&self) -> Rbm {
        Rbm {
            w: self.w.t().to_owned(),
            b_vis: self.b_hid.clone(),
            b_hid: self.b_vis.clone(),
        }
    }

    /// One CD-1 step, returning the updated machine; `self` is untouched.
    pub fn cd1_update(
        &self,
        v0: &Array1<f64>,
        alpha: f64,
        rng: &mut RngStream,
    ) -> Result<Rbm, RbmError> {
        self.cd1_update_mode(v0, alpha, rng, CdSampling::Probabilities)
    }

    /// [`Rbm::cd1_update`] with an explicit sampling mode.
    pub fn cd1_update_mode(
        &self,
        v0: &Array1<f64>,
        alpha: f64,
        rng: &mut RngStream,
        mode: CdSampling,
    ) -> Result<Rbm, RbmError> {
        let mut out = self.clone();
        out.cd1_in_place(v0, alpha, rng, mode)?;
        Ok(out)
    }

    pub(crate) fn cd1_in_place(
        &mut self,
        v0: &Array1<f64>,
        alpha: f64,
        rng: &mut RngStream,
        mode: CdSampling,
    ) -> Result<(), RbmError> {
        self.check_visible(v0)?;
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(RbmError::NegativeAlpha(alpha));
        }
        for &x in v0.iter() {
            if !(0.0..=1.0).contains(&x) {
                return Err(RbmError::OutOfRange(x));
            }
        }

        // Positive statistics from the data, negative from one Gibbs
        // reconstruction driven by a sampled hidden state.
        let (h_pos, h_drive) = {
            let p = self.hidden_activation(v0)?;
            let s = sample_bernoulli(&p, rng)?;
            match mode {
                CdSampling::Probabilities => (p, s),
                CdSampling::Full => (s.clone(), s),
            }
        };
        let (v_neg, h_neg) = match mode {
            CdSampling::Probabilities => {
                let v_hat = self.visible_activation(&h_drive)?;
                let h_hat = self.hidden_activation(&v_hat)?;
                (v_hat, h_hat)
            }
            CdSampling::Full => {
                let v_hat = sample_bernoulli(&self.visible_activation(&h_drive)?, rng)?;
                let h_hat = sample_bernoulli(&self.hidden_activation(&v_hat)?, rng)?;
                (v_hat, h_hat)
            }
        };

        let n_vis = self.n_visible();
        let n_hid = self.n_hidden();
        let w = self.w.as_slice_mut().expect("row-major weight storage");
        for i in 0..n_vis {
            let row = &mut w[i * n_hid..(i + 1) * n_hid];
            let vp = v0[i];
            let vn = v_neg[i];
            for j in 0..n_hid {
                row[j] += alpha * (vp * h_pos[j] - vn * h_neg[j]);
            }
        }
        for j in 0..n_hid {
            self.b_hid[j] += alpha * (h_pos[j] - h_neg[j]);
        }
        for i in 0..n_vis {
            self.b_vis[i] += alpha * (v0[i] - v_neg[i]);
        }

        let finite = self.w.iter().all(|x| x.is_finite())
            && self.b_vis.iter().all(|x| x.is_finite())
            && self.b_hid.iter().all(|x| x.is_finite());
        if !finite {
            return Err(RbmError::NonFinite);
        }
        Ok(())
    }

    /// Energy of a joint binary configuration:
    /// `E(v, h) = -b_vis.v - b_hid.h - v' W h`.
    pub fn energy(&self, v: &Array1<f64>, h: &Array1<f64>) -> f64 {
        -self.b_vis.dot(v) - self.b_hid.dot(h) - v.dot(&self.w.dot(h))
    }

    /// Exact log marginal `log Pr(v)` by brute-force enumeration of every
    /// binary configuration. Test oracle; guarded to small machines.
    pub fn exact_loglik(&self, v: &Array1<f64>) -> Result<f64, RbmError> {
        self.check_visible(v)?;
        let units = self.n_visible() + self.n_hidden();
        if units > ENUMERATION_GUARD {
            return Err(RbmError::TooLarge {
                units,
                max: ENUMERATION_GUARD,
            });
        }
        for (index, &x) in v.iter().enumerate() {
            if x != 0.0 && x != 1.0 {
                return Err(RbmError::NotBinary { index, value: x });
            }
        }

        let n_hid = self.n_hidden();
        let n_vis = self.n_visible();
        let unnormalized = |vv: &Array1<f64>| -> f64 {
            // log sum over hidden states of exp(-E(vv, h))
            let mut terms = Vec::with_capacity(1 << n_hid);
            for bits in 0u32..(1 << n_hid) {
                let h = bits_to_vec(bits, n_hid);
                terms.push(-self.energy(vv, &h));
            }
            log_sum_exp(&terms)
        };

        let log_num = unnormalized(v);
        let mut all = Vec::with_capacity(1 << n_vis);
        for bits in 0u32..(1 << n_vis) {
            let vv = bits_to_vec(bits, n_vis);
            all.push(unnormalized(&vv));
        }
        let log_z = log_sum_exp(&all);
        Ok(log_num - log_z)
    }
}

fn bits_to_vec(bits: u32, len: usize) -> Array1<f64> {
    Array1::from_shape_fn(len, |i| ((bits >> i) & 1) as f64)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Independent Bernoulli draws: entry i is 1.0 with probability `p[i]`.
/// Deterministic given the stream state.
pub fn sample_bernoulli(p: &Array1<f64>, rng: &mut RngStream) -> Result<Array1<f64>, RbmError> {
    for &x in p.iter() {
        if !(0.0..=1.0).contains(&x) {
            return Err(RbmError::OutOfRange(x));
        }
    }
    Ok(Array1::from_shape_fn(p.len(), |i| {
        if rng.uniform() < p[i] {
            1.0
        } else {
            0.0
        }
    }))
}
