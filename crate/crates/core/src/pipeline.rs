//! End-to-end classifiers: backbone features go either straight into the
//! BLS (E-BLS) or through the connection layer first (ER-BLS).

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::bls::{self, BlsModel, GrowthLog, GrowthStep, HyperParams};
use crate::data::{self, LabeledFeatures};
use crate::error::{BlsError, Result};
use crate::frontend::{global_average_pool, BiasPlacement, ConnectionLayer, FeatureTensor, RbfKind};
use crate::linalg::{AppendBranch, Matrix};

/// Settings for the connection-layer front-end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErConfig {
    pub units: usize,
    pub rbf: RbfKind,
    pub bias: BiasPlacement,
    pub seed: u64,
    /// When set, each input row is a flattened `height x width x channels`
    /// map that is average-pooled before the connection layer.
    pub spatial: Option<(usize, usize)>,
}

impl Default for ErConfig {
    fn default() -> Self {
        Self {
            units: 64,
            rbf: RbfKind::Gaussian,
            bias: BiasPlacement::Shift,
            seed: 0,
            spatial: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub connection: Option<ConnectionLayer>,
    pub spatial: Option<(usize, usize)>,
    pub bls: BlsModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub samples: usize,
    pub accuracy: f64,
    /// `None` when predictions or labels are constant.
    pub pearson: Option<f64>,
}

fn pooled(x: &Matrix, spatial: Option<(usize, usize)>) -> Result<Cow<'_, Matrix>> {
    match spatial {
        None => Ok(Cow::Borrowed(x)),
        Some((h, w)) => Ok(Cow::Owned(global_average_pool(&FeatureTensor::from_rows(x, h, w)?)?)),
    }
}

impl Pipeline {
    /// Fit the optional connection layer on the training features, then
    /// train the BLS on its output.
    pub fn fit(train: &LabeledFeatures, hyper: &HyperParams, er: Option<ErConfig>, grow_capable: bool) -> Result<Self> {
        let (connection, spatial) = Self::fit_front(train, er)?;
        let input = front_forward(&train.x, connection.as_ref(), spatial)?;
        let bls = BlsModel::train(&input, &train.one_hot(), hyper, grow_capable)?;
        Ok(Self {
            connection,
            spatial,
            bls,
        })
    }

    /// As [`Pipeline::fit`], then grow by `step` until the training
    /// accuracy reaches `target` or `max_steps` steps have run.
    pub fn fit_until(
        train: &LabeledFeatures,
        hyper: &HyperParams,
        er: Option<ErConfig>,
        target: f64,
        step: GrowthStep,
        max_steps: usize,
    ) -> Result<(Self, GrowthLog)> {
        let (connection, spatial) = Self::fit_front(train, er)?;
        let input = front_forward(&train.x, connection.as_ref(), spatial)?;
        let (bls, log) = bls::train_until(&input, &train.one_hot(), hyper, target, step, max_steps)?;
        Ok((
            Self {
                connection,
                spatial,
                bls,
            },
            log,
        ))
    }

    fn fit_front(train: &LabeledFeatures, er: Option<ErConfig>) -> Result<(Option<ConnectionLayer>, Option<(usize, usize)>)> {
        match er {
            None => Ok((None, None)),
            Some(cfg) => {
                if cfg.units == 0 {
                    return Err(BlsError::value("connection layer needs at least one unit"));
                }
                let m = pooled(&train.x, cfg.spatial)?;
                let mut layer = ConnectionLayer::random(m.ncols(), cfg.units, cfg.seed, cfg.rbf).with_bias(cfg.bias);
                layer.fit(&m)?;
                Ok((Some(layer), cfg.spatial))
            }
        }
    }

    /// The matrix the BLS sees for raw features `x`.
    pub fn bls_input<'a>(&self, x: &'a Matrix) -> Result<Cow<'a, Matrix>> {
        front_forward(x, self.connection.as_ref(), self.spatial)
    }

    pub fn predict_scores(&self, x: &Matrix) -> Result<Matrix> {
        self.bls.predict_scores(self.bls_input(x)?.as_ref())
    }

    pub fn predict_labels(&self, x: &Matrix) -> Result<Vec<usize>> {
        self.bls.predict_labels(self.bls_input(x)?.as_ref())
    }

    pub fn evaluate(&self, data: &LabeledFeatures) -> Result<EvalMetrics> {
        let pred = self.predict_labels(&data.x)?;
        Ok(EvalMetrics {
            samples: data.len(),
            accuracy: data::accuracy(&pred, &data.labels)?,
            pearson: data::pearson_labels(&pred, &data.labels).ok(),
        })
    }

    /// Grow the BLS on the original training set.
    pub fn grow(&mut self, step: GrowthStep, train: &LabeledFeatures) -> Result<AppendBranch> {
        let input = self.bls_input(&train.x)?.into_owned();
        self.bls.grow(step, &input, &train.one_hot())
    }

    /// Batch re-solve with the current node weights, for checking growth.
    pub fn retrain_batch(&self, train: &LabeledFeatures) -> Result<Self> {
        let input = self.bls_input(&train.x)?.into_owned();
        Ok(Self {
            connection: self.connection.clone(),
            spatial: self.spatial,
            bls: self.bls.retrain_batch(&input, &train.one_hot())?,
        })
    }

    /// Training accuracy from the retained design matrix, if any.
    pub fn training_accuracy(&self, train: &LabeledFeatures) -> Option<f64> {
        let scores = self.bls.training_scores()?;
        data::accuracy(&bls::argmax_rows(&scores), &train.labels).ok()
    }
}

fn front_forward<'a>(x: &'a Matrix, connection: Option<&ConnectionLayer>, spatial: Option<(usize, usize)>) -> Result<Cow<'a, Matrix>> {
    match connection {
        None => Ok(Cow::Borrowed(x)),
        Some(layer) => {
            let m = pooled(x, spatial)?;
            Ok(Cow::Owned(layer.forward(&m)?))
        }
    }
}

/// Mean and population standard deviation over repeated seeded 8:2 splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub runs: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_pearson: Option<f64>,
    pub std_pearson: Option<f64>,
}

pub fn cross_validate(
    data: &LabeledFeatures,
    hyper: &HyperParams,
    er: Option<ErConfig>,
    repeats: usize,
    seed: u64,
) -> Result<CvSummary> {
    if repeats == 0 {
        return Err(BlsError::value("need at least one repeat"));
    }
    let mut accs = Vec::with_capacity(repeats);
    let mut pcs = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let split = data::split_8_2(data.len(), seed.wrapping_add(r as u64))?;
        let model = Pipeline::fit(&data.subset(&split.train), hyper, er, false)?;
        let m = model.evaluate(&data.subset(&split.test))?;
        accs.push(m.accuracy);
        if let Some(pc) = m.pearson {
            pcs.push(pc);
        }
    }
    let (mean_accuracy, std_accuracy) = mean_std(&accs);
    let pc = (pcs.len() == repeats).then(|| mean_std(&pcs));
    Ok(CvSummary {
        runs: repeats,
        mean_accuracy,
        std_accuracy,
        mean_pearson: pc.map(|p| p.0),
        std_pearson: pc.map(|p| p.1),
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
