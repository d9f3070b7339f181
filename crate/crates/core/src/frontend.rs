//! Front-ends that turn backbone features into BLS inputs.
//!
//! - [`swish_extract`] is a small stand-in for a frozen convolutional
//!   extractor; real backbone features arrive through the file loaders.
//! - [`ConnectionLayer`] pools, batch-normalizes and applies a radial basis
//!   activation: `exp(−p̂²/2)/√(2π)` with `p̂ = BN(M·W_r) + b_r` by default.
//!   See [`BiasPlacement`] for why the bias sits after the normalization.
//! - [`compound_scaling`] evaluates the depth/width/resolution scaling rule
//!   of the backbone family.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bls::sigmoid;
use crate::error::{BlsError, Result};
use crate::linalg::{ensure_finite, Matrix};
use crate::rng::{stream, uniform_block, StreamKind};

pub const DEFAULT_BN_EPS: f64 = 1e-5;

#[inline]
pub fn swish(t: f64) -> f64 {
    t * sigmoid(t)
}

/// `Swish(X·W_e + b_e)`.
pub fn swish_extract(x: &Matrix, w_e: &Matrix, b_e: &[f64]) -> Result<Matrix> {
    if x.ncols() != w_e.nrows() {
        return Err(BlsError::dim(format!(
            "input has {} columns, extractor weights have {} rows",
            x.ncols(),
            w_e.nrows()
        )));
    }
    if b_e.len() != w_e.ncols() {
        return Err(BlsError::dim(format!(
            "bias has {} entries, extractor has {} outputs",
            b_e.len(),
            w_e.ncols()
        )));
    }
    let mut m = x * w_e;
    for (j, b) in b_e.iter().enumerate() {
        m.col_as_slice_mut(j).iter_mut().for_each(|v| *v = swish(*v + b));
    }
    Ok(m)
}

/// Backbone activations for a batch, stored sample-major with channels
/// last (`[sample][row][col][channel]`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub samples: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureTensor {
    pub fn new(samples: usize, height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != samples * height * width * channels {
            return Err(BlsError::dim(format!(
                "{} values do not fill a {samples}x{height}x{width}x{channels} tensor",
                data.len()
            )));
        }
        Ok(Self {
            samples,
            height,
            width,
            channels,
            data,
        })
    }

    /// Reinterpret each matrix row as a flattened `height x width x channels`
    /// map.
    pub fn from_rows(m: &Matrix, height: usize, width: usize) -> Result<Self> {
        let spatial = height * width;
        if spatial == 0 || m.ncols() % spatial != 0 {
            return Err(BlsError::dim(format!(
                "{} columns cannot be split into {height}x{width} maps",
                m.ncols()
            )));
        }
        let channels = m.ncols() / spatial;
        Self::new(m.nrows(), height, width, channels, crate::linalg::to_row_major(m))
    }
}

/// Mean over the spatial positions of every channel.
pub fn global_average_pool(t: &FeatureTensor) -> Result<Matrix> {
    let spatial = t.height * t.width;
    if spatial == 0 {
        return Err(BlsError::dim("feature maps have zero spatial size"));
    }
    let per_sample = spatial * t.channels;
    let mut out = Matrix::zeros(t.samples, t.channels);
    for s in 0..t.samples {
        let block = &t.data[s * per_sample..(s + 1) * per_sample];
        for c in 0..t.channels {
            let sum: f64 = (0..spatial).map(|p| block[p * t.channels + c]).sum();
            out[(s, c)] = sum / spatial as f64;
        }
    }
    Ok(out)
}

/// Shape of the radial basis activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RbfKind {
    /// `exp(−x²/2)/√(2π)`
    #[default]
    Gaussian,
    /// `exp(−|x|)/√(2π)`
    Laplacian,
}

impl RbfKind {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        let norm = (2.0 * PI).sqrt();
        match self {
            RbfKind::Gaussian => (-0.5 * x * x).exp() / norm,
            RbfKind::Laplacian => (-x.abs()).exp() / norm,
        }
    }
}

/// Where the random bias `b_r` enters the connection layer.
///
/// With [`BiasPlacement::Inside`] the bias is added before normalization,
/// where the mean subtraction cancels it exactly. Every unit is then an even
/// function of `x − mean(x)`, so a sample and its reflection through the
/// training mean map to the same features. On data without that symmetry
/// (the blobs fixture among them) whole classes fold onto each other.
/// [`BiasPlacement::Shift`] adds `b_r` after normalization, in the role of
/// the batch-norm shift, which gives each unit its own RBF centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasPlacement {
    Inside,
    #[default]
    Shift,
}

/// Linear map, batch normalization and RBF activation between the
/// extractor and the BLS. `w_r` and `b_r` are random and never trained;
/// only the normalization statistics are fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionLayer {
    pub w_r: Matrix,
    pub b_r: Vec<f64>,
    pub bn_mean: Vec<f64>,
    pub bn_var: Vec<f64>,
    pub bn_eps: f64,
    pub rbf: RbfKind,
    pub bias: BiasPlacement,
    pub fitted: bool,
}

impl ConnectionLayer {
    /// Uniform `[-1, 1]` weights drawn from the connection stream.
    pub fn random(channels: usize, units: usize, seed: u64, rbf: RbfKind) -> Self {
        let mut rng = stream(seed, StreamKind::Connection, 0);
        let (w, b_r) = uniform_block(&mut rng, channels, units);
        let w_r = Matrix::from_fn(channels, units, |i, j| w[i * units + j]);
        Self::from_weights(w_r, b_r, rbf)
    }

    pub fn from_weights(w_r: Matrix, b_r: Vec<f64>, rbf: RbfKind) -> Self {
        assert_eq!(w_r.ncols(), b_r.len(), "one bias per unit");
        Self {
            w_r,
            b_r,
            bn_mean: Vec::new(),
            bn_var: Vec::new(),
            bn_eps: DEFAULT_BN_EPS,
            rbf,
            bias: BiasPlacement::default(),
            fitted: false,
        }
    }

    pub fn with_bias(mut self, bias: BiasPlacement) -> Self {
        self.bias = bias;
        self
    }

    pub fn channels(&self) -> usize {
        self.w_r.nrows()
    }

    pub fn units(&self) -> usize {
        self.w_r.ncols()
    }

    /// `M·W_r`, plus `b_r` when the bias sits inside the normalization.
    pub fn pre_activation(&self, m: &Matrix) -> Result<Matrix> {
        if m.ncols() != self.channels() {
            return Err(BlsError::dim(format!(
                "features have {} channels, connection layer expects {}",
                m.ncols(),
                self.channels()
            )));
        }
        ensure_finite(m, "connection-layer input")?;
        let mut p = m * &self.w_r;
        if self.bias == BiasPlacement::Inside {
            for (j, b) in self.b_r.iter().enumerate() {
                p.col_as_slice_mut(j).iter_mut().for_each(|v| *v += b);
            }
        }
        Ok(p)
    }

    /// Store per-unit mean and population variance of the pre-activations
    /// over the batch `m`.
    pub fn fit(&mut self, m: &Matrix) -> Result<()> {
        if m.nrows() < 2 {
            return Err(BlsError::value("batch normalization needs at least 2 samples"));
        }
        let p = self.pre_activation(m)?;
        let n = p.nrows() as f64;
        let mut mean = Vec::with_capacity(p.ncols());
        let mut var = Vec::with_capacity(p.ncols());
        for j in 0..p.ncols() {
            let col = p.col_as_slice(j);
            let mu = col.iter().sum::<f64>() / n;
            mean.push(mu);
            var.push(col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n);
        }
        self.bn_mean = mean;
        self.bn_var = var;
        self.fitted = true;
        Ok(())
    }

    /// Batch-normalized pre-activations using the stored statistics.
    pub fn normalized(&self, m: &Matrix) -> Result<Matrix> {
        if !self.fitted {
            return Err(BlsError::state("connection layer has not been fitted"));
        }
        let mut p = self.pre_activation(m)?;
        for j in 0..p.ncols() {
            let (mu, denom) = (self.bn_mean[j], (self.bn_var[j] + self.bn_eps).sqrt());
            p.col_as_slice_mut(j).iter_mut().for_each(|v| *v = (*v - mu) / denom);
        }
        Ok(p)
    }

    pub fn forward(&self, m: &Matrix) -> Result<Matrix> {
        let mut p = self.normalized(m)?;
        let rbf = self.rbf;
        let shift = self.bias == BiasPlacement::Shift;
        for j in 0..p.ncols() {
            let b = if shift { self.b_r[j] } else { 0.0 };
            p.col_as_slice_mut(j).iter_mut().for_each(|v| *v = rbf.apply(*v + b));
        }
        Ok(p)
    }
}

/// Fit-then-return form of [`ConnectionLayer::fit`].
pub fn connection_fit(m: &Matrix, mut layer: ConnectionLayer) -> Result<ConnectionLayer> {
    layer.fit(m)?;
    Ok(layer)
}

pub fn connection_forward(m: &Matrix, layer: &ConnectionLayer) -> Result<Matrix> {
    layer.forward(m)
}

/// Coefficients of the compound scaling rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Resource coefficient (the exponent).
    pub lam: f64,
}

impl ScalingConfig {
    pub fn new(alpha: f64, beta: f64, gamma: f64, lam: f64) -> Result<Self> {
        let cfg = Self {
            alpha,
            beta,
            gamma,
            lam,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 1.0) || !v.is_finite() {
                return Err(BlsError::value(format!("{name} must be finite and >= 1, got {v}")));
            }
        }
        if !(self.lam >= 0.0) || !self.lam.is_finite() {
            return Err(BlsError::value(format!("lambda must be finite and >= 0, got {}", self.lam)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingOutcome {
    pub depth: f64,
    pub width: f64,
    pub resolution: f64,
    /// Cost relative to the base network, `d · w² · r²`.
    pub flops_multiplier: f64,
    /// `α · β² · γ² − 2`.
    pub constraint_residual: f64,
}

pub fn compound_scaling(cfg: &ScalingConfig) -> Result<ScalingOutcome> {
    cfg.validate()?;
    let depth = cfg.alpha.powf(cfg.lam);
    let width = cfg.beta.powf(cfg.lam);
    let resolution = cfg.gamma.powf(cfg.lam);
    Ok(ScalingOutcome {
        depth,
        width,
        resolution,
        flops_multiplier: depth * width * width * resolution * resolution,
        constraint_residual: cfg.alpha * cfg.beta * cfg.beta * cfg.gamma * cfg.gamma - 2.0,
    })
}
