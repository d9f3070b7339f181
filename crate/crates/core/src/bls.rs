//! The Broad Learning System itself: random feature windows, random
//! enhancement groups, a closed-form output layer, and growth by appending
//! node columns.
//!
//! Column layout of the design matrix follows creation order. The initial
//! stage contributes `n1` feature windows followed by one enhancement group
//! of `n3` nodes; every growth step contributes (optionally) one new window
//! and then (optionally) one new enhancement group. An enhancement group
//! reads every feature node that existed when it was created, including a
//! window added in the same step.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BlsError, Result};
use crate::linalg::{self, ensure_finite, AppendBranch, Matrix, PinvState};
use crate::rng::{stream, uniform_block, StreamKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureActivation {
    Linear,
    Tanh,
    Sigmoid,
}

impl FeatureActivation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            FeatureActivation::Linear => v,
            FeatureActivation::Tanh => v.tanh(),
            FeatureActivation::Sigmoid => sigmoid(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnhancementActivation {
    Tanh,
    Sigmoid,
    Relu,
}

impl EnhancementActivation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            EnhancementActivation::Tanh => v.tanh(),
            EnhancementActivation::Sigmoid => sigmoid(v),
            EnhancementActivation::Relu => v.max(0.0),
        }
    }
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Full training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Number of feature windows.
    pub n1: usize,
    /// Nodes per feature window.
    pub n2: usize,
    /// Enhancement nodes.
    pub n3: usize,
    /// Ridge coefficient for the output solve. Grow-capable models use the
    /// exact pseudoinverse instead, since growth updates it.
    pub lambda: f64,
    pub feature_activation: FeatureActivation,
    pub enhancement_activation: EnhancementActivation,
    /// Scale applied to enhancement pre-activations.
    pub shrink: f64,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            n1: 10,
            n2: 10,
            n3: 200,
            lambda: 1e-8,
            feature_activation: FeatureActivation::Linear,
            enhancement_activation: EnhancementActivation::Tanh,
            shrink: 0.8,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn with_nodes(n1: usize, n2: usize, n3: usize) -> Self {
        Self {
            n1,
            n2,
            n3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 || self.n3 == 0 {
            return Err(BlsError::value(format!(
                "node counts must be positive (n1={}, n2={}, n3={})",
                self.n1, self.n2, self.n3
            )));
        }
        if !(self.shrink > 0.0) || !self.shrink.is_finite() {
            return Err(BlsError::value(format!("shrink must be positive, got {}", self.shrink)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(BlsError::value(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn feature_nodes(&self) -> usize {
        self.n1 * self.n2
    }
}

/// One random feature window: `input_dim x width` weights and a bias row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl FeatureWindow {
    /// Draw window number `index` from its own stream.
    pub fn draw(seed: u64, index: usize, input_dim: usize, width: usize) -> Self {
        let mut rng = stream(seed, StreamKind::FeatureWindow, index as u64);
        let (w, bias) = uniform_block(&mut rng, input_dim, width);
        let weights = Matrix::from_fn(input_dim, width, |i, j| w[i * width + j]);
        Self { weights, bias }
    }

    pub fn width(&self) -> usize {
        self.weights.ncols()
    }

    pub fn nodes(&self, x: &Matrix, act: FeatureActivation) -> Matrix {
        affine_map(x, &self.weights, &self.bias, 1.0, |v| act.apply(v))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureBank {
    pub windows: Vec<FeatureWindow>,
}

impl FeatureBank {
    pub fn draw(seed: u64, input_dim: usize, n1: usize, n2: usize) -> Self {
        let windows = (0..n1)
            .map(|i| FeatureWindow::draw(seed, i, input_dim, n2))
            .collect();
        Self { windows }
    }

    pub fn node_count(&self) -> usize {
        self.windows.iter().map(FeatureWindow::width).sum()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.windows.first().map(|w| w.weights.nrows())
    }
}

/// A group of enhancement nodes fed by the first `weights.nrows()` feature
/// nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EnhancementGroup {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl EnhancementGroup {
    pub fn draw(seed: u64, index: usize, feature_nodes: usize, size: usize) -> Self {
        let mut rng = stream(seed, StreamKind::EnhancementGroup, index as u64);
        let (w, bias) = uniform_block(&mut rng, feature_nodes, size);
        let weights = Matrix::from_fn(feature_nodes, size, |i, j| w[i * size + j]);
        Self { weights, bias }
    }

    pub fn size(&self) -> usize {
        self.weights.ncols()
    }

    pub fn input_nodes(&self) -> usize {
        self.weights.nrows()
    }

    fn nodes(&self, z: &Matrix, shrink: f64, act: EnhancementActivation) -> Matrix {
        let prefix = z.subcols(0, self.input_nodes()).to_owned();
        affine_map(&prefix, &self.weights, &self.bias, shrink, |v| act.apply(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancementBank {
    pub groups: Vec<EnhancementGroup>,
    pub shrink: f64,
}

impl EnhancementBank {
    pub fn node_count(&self) -> usize {
        self.groups.iter().map(EnhancementGroup::size).sum()
    }
}

/// `act(scale · (x·w + b))` with `b` broadcast over rows.
fn affine_map(x: &Matrix, w: &Matrix, b: &[f64], scale: f64, act: impl Fn(f64) -> f64) -> Matrix {
    let mut out = x * w;
    for (j, bj) in b.iter().enumerate() {
        for v in out.col_as_slice_mut(j) {
            *v = act(scale * (*v + bj));
        }
    }
    out
}

/// Feature nodes `Z = [Z_1 … Z_n]`, windows concatenated in index order.
pub fn generate_feature_nodes(x: &Matrix, bank: &FeatureBank, act: FeatureActivation) -> Result<Matrix> {
    if let Some(dim) = bank.input_dim() {
        if x.ncols() != dim {
            return Err(BlsError::dim(format!(
                "input has {} columns, feature windows expect {dim}",
                x.ncols()
            )));
        }
    }
    let mut z = Matrix::zeros(x.nrows(), bank.node_count());
    let mut col = 0;
    for window in &bank.windows {
        let zi = window.nodes(x, act);
        z.subcols_mut(col, zi.ncols()).copy_from(&zi);
        col += zi.ncols();
    }
    Ok(z)
}

/// Enhancement nodes `H = [H_1 … H_m]`, groups concatenated in index order.
/// `z` must hold every feature node the widest group reads.
pub fn generate_enhancement_nodes(
    z: &Matrix,
    bank: &EnhancementBank,
    act: EnhancementActivation,
) -> Result<Matrix> {
    let needed = bank.groups.iter().map(EnhancementGroup::input_nodes).max().unwrap_or(0);
    if z.ncols() != needed {
        return Err(BlsError::dim(format!(
            "feature layer has {} nodes, enhancement groups expect {needed}",
            z.ncols()
        )));
    }
    let mut h = Matrix::zeros(z.nrows(), bank.node_count());
    let mut col = 0;
    for group in &bank.groups {
        let hk = group.nodes(z, bank.shrink, act);
        h.subcols_mut(col, hk.ncols()).copy_from(&hk);
        col += hk.ncols();
    }
    Ok(h)
}

/// Per-column z-scoring fitted on training inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for j in 0..x.ncols() {
            let col = x.col_as_slice(j);
            let mu = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(mu);
            // constant columns pass through centred
            scale.push(if sd > 0.0 { sd } else { 1.0 });
        }
        Self { mean, scale }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.ncols() != self.mean.len() {
            return Err(BlsError::dim(format!(
                "input has {} columns, model expects {}",
                x.ncols(),
                self.mean.len()
            )));
        }
        let mut out = x.clone();
        for j in 0..out.ncols() {
            let (mu, sd) = (self.mean[j], self.scale[j]);
            out.col_as_slice_mut(j).iter_mut().for_each(|v| *v = (*v - mu) / sd);
        }
        Ok(out)
    }
}

/// Node counts contributed by one growth step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GrowthStep {
    pub feature_nodes: usize,
    pub enhancement_nodes: usize,
}

impl GrowthStep {
    pub fn new(feature_nodes: usize, enhancement_nodes: usize) -> Self {
        Self {
            feature_nodes,
            enhancement_nodes,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.feature_nodes == 0 && self.enhancement_nodes == 0
    }
}

/// Windows and groups added by one stage, in design-matrix order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stage {
    pub windows: usize,
    pub groups: usize,
}

/// A trained Broad Learning System classifier.
#[derive(Debug, Clone)]
pub struct BlsModel {
    pub(crate) hyper: HyperParams,
    pub(crate) standardizer: Standardizer,
    pub(crate) features: FeatureBank,
    pub(crate) enhancements: EnhancementBank,
    pub(crate) stages: Vec<Stage>,
    pub(crate) w_out: Matrix,
    pub(crate) pinv_state: Option<PinvState>,
    pub(crate) classes: usize,
    pub(crate) input_dim: usize,
    pub(crate) data_digest: [u8; 32],
}

/// Validate a one-hot target matrix; returns the number of classes that
/// actually occur.
pub fn check_one_hot(y: &Matrix) -> Result<usize> {
    let mut seen = vec![false; y.ncols()];
    for i in 0..y.nrows() {
        let mut hot = None;
        for j in 0..y.ncols() {
            let v = y[(i, j)];
            if v == 1.0 {
                if hot.is_some() {
                    return Err(BlsError::value(format!("target row {i} has more than one 1")));
                }
                hot = Some(j);
            } else if v != 0.0 {
                return Err(BlsError::value(format!("target row {i} is not one-hot")));
            }
        }
        match hot {
            Some(j) => seen[j] = true,
            None => return Err(BlsError::value(format!("target row {i} has no class"))),
        }
    }
    Ok(seen.iter().filter(|s| **s).count())
}

/// SHA-256 over the shapes and little-endian bytes of the training inputs
/// and targets.
pub fn data_digest(x: &Matrix, y: &Matrix) -> [u8; 32] {
    let mut h = Sha256::new();
    for m in [x, y] {
        h.update((m.nrows() as u64).to_le_bytes());
        h.update((m.ncols() as u64).to_le_bytes());
        for v in linalg::to_row_major(m) {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().into()
}

/// Per-row argmax; ties go to the lowest class index.
pub fn argmax_rows(scores: &Matrix) -> Vec<usize> {
    (0..scores.nrows())
        .map(|i| {
            let mut best = 0;
            for j in 1..scores.ncols() {
                if scores[(i, j)] > scores[(i, best)] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn one_hot_argmax_accuracy(scores: &Matrix, y: &Matrix) -> f64 {
    let pred = argmax_rows(scores);
    let truth = argmax_rows(y);
    let hits = pred.iter().zip(&truth).filter(|(p, t)| p == t).count();
    hits as f64 / pred.len().max(1) as f64
}

impl BlsModel {
    /// Draw all random node weights from the seeded streams and solve the
    /// output layer in closed form.
    pub fn train(x: &Matrix, y: &Matrix, hyper: &HyperParams, grow_capable: bool) -> Result<Self> {
        Self::train_with_schedule(x, y, hyper, &[], grow_capable)
    }

    /// Batch-train a model whose node layout is the initial stage followed
    /// by `schedule`. Uses the same random streams as [`BlsModel::grow`],
    /// so the result has exactly the nodes a model grown along the same
    /// schedule would have.
    pub fn train_with_schedule(
        x: &Matrix,
        y: &Matrix,
        hyper: &HyperParams,
        schedule: &[GrowthStep],
        grow_capable: bool,
    ) -> Result<Self> {
        hyper.validate()?;
        check_training_data(x, y)?;
        let input_dim = x.ncols();
        let features = FeatureBank::draw(hyper.seed, input_dim, hyper.n1, hyper.n2);
        let enhancements = EnhancementBank {
            groups: vec![EnhancementGroup::draw(hyper.seed, 0, hyper.feature_nodes(), hyper.n3)],
            shrink: hyper.shrink,
        };
        let mut model = Self {
            hyper: hyper.clone(),
            standardizer: Standardizer::fit(x),
            features,
            enhancements,
            stages: vec![Stage {
                windows: hyper.n1,
                groups: 1,
            }],
            w_out: Matrix::zeros(0, 0),
            pinv_state: None,
            classes: y.ncols(),
            input_dim,
            data_digest: data_digest(x, y),
        };
        for step in schedule.iter().filter(|s| !s.is_empty()) {
            model.push_stage(*step);
        }
        let xs = model.standardizer.apply(x)?;
        model.solve_output(&xs, y, grow_capable)?;
        Ok(model)
    }

    /// Re-solve the output layer from scratch with the current node
    /// weights. This is the full-retraining path that growth avoids.
    pub fn retrain_batch(&self, x: &Matrix, y: &Matrix) -> Result<Self> {
        check_training_data(x, y)?;
        self.verify_input_width(x)?;
        let mut model = self.clone();
        model.data_digest = data_digest(x, y);
        model.classes = y.ncols();
        let xs = model.standardizer.apply(x)?;
        model.solve_output(&xs, y, self.pinv_state.is_some())?;
        Ok(model)
    }

    fn solve_output(&mut self, xs: &Matrix, y: &Matrix, grow_capable: bool) -> Result<()> {
        let a = self.design_matrix_standardized(xs)?;
        ensure_finite(&a, "design matrix")?;
        if grow_capable {
            // the append update assumes W = A⁺Y, so lambda cannot apply here
            if self.hyper.lambda != 0.0 {
                log::debug!("grow-capable model: solving with the pseudoinverse, lambda {} unused", self.hyper.lambda);
            }
            let state = PinvState::new(a)?;
            self.w_out = &state.a_pinv * y;
            self.pinv_state = Some(state);
        } else {
            self.w_out = linalg::ridge_solve(&a, y, self.hyper.lambda)?;
            self.pinv_state = None;
        }
        Ok(())
    }

    /// Register the banks for one growth step, drawing from the labelled
    /// streams. Returns the indices of the new window and group, if any.
    fn push_stage(&mut self, step: GrowthStep) -> (Option<usize>, Option<usize>) {
        let seed = self.hyper.seed;
        let mut stage = Stage { windows: 0, groups: 0 };
        let mut new_window = None;
        let mut new_group = None;
        if step.feature_nodes > 0 {
            let idx = self.features.windows.len();
            self.features.windows.push(FeatureWindow::draw(
                seed,
                idx,
                self.input_dim,
                step.feature_nodes,
            ));
            stage.windows = 1;
            new_window = Some(idx);
        }
        if step.enhancement_nodes > 0 {
            let idx = self.enhancements.groups.len();
            let fan_in = self.features.node_count();
            self.enhancements.groups.push(EnhancementGroup::draw(
                seed,
                idx,
                fan_in,
                step.enhancement_nodes,
            ));
            stage.groups = 1;
            new_group = Some(idx);
        }
        self.stages.push(stage);
        (new_window, new_group)
    }

    /// Design matrix `A` for already-standardized inputs, columns in stage
    /// order.
    fn design_matrix_standardized(&self, xs: &Matrix) -> Result<Matrix> {
        let act_f = self.hyper.feature_activation;
        let act_h = self.hyper.enhancement_activation;
        let z = generate_feature_nodes(xs, &self.features, act_f)?;
        let mut a = Matrix::zeros(xs.nrows(), self.width());
        let (mut w_idx, mut g_idx, mut z_col, mut col) = (0, 0, 0, 0);
        for stage in &self.stages {
            let width: usize = self.features.windows[w_idx..w_idx + stage.windows]
                .iter()
                .map(FeatureWindow::width)
                .sum();
            a.subcols_mut(col, width).copy_from(z.subcols(z_col, width));
            z_col += width;
            col += width;
            w_idx += stage.windows;
            for group in &self.enhancements.groups[g_idx..g_idx + stage.groups] {
                let h = group.nodes(&z, self.enhancements.shrink, act_h);
                a.subcols_mut(col, h.ncols()).copy_from(&h);
                col += h.ncols();
            }
            g_idx += stage.groups;
        }
        Ok(a)
    }

    /// Design matrix `[Z | H]` (stage order) for raw inputs.
    pub fn design_matrix(&self, x: &Matrix) -> Result<Matrix> {
        self.verify_input_width(x)?;
        ensure_finite(x, "input")?;
        let xs = self.standardizer.apply(x)?;
        self.design_matrix_standardized(&xs)
    }

    fn verify_input_width(&self, x: &Matrix) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(BlsError::dim(format!(
                "input has {} columns, model expects {}",
                x.ncols(),
                self.input_dim
            )));
        }
        Ok(())
    }

    pub fn predict_scores(&self, x: &Matrix) -> Result<Matrix> {
        let a = self.design_matrix(x)?;
        Ok(&a * &self.w_out)
    }

    pub fn predict_labels(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_scores(x)?))
    }

    /// Add one window of `step.feature_nodes` feature nodes and one group
    /// of `step.enhancement_nodes` enhancement nodes, updating the
    /// pseudoinverse and output weights through the block update instead of
    /// re-solving. `x` and `y` must be the training data the model was
    /// fitted on. On error the model is left untouched.
    pub fn grow(&mut self, step: GrowthStep, x: &Matrix, y: &Matrix) -> Result<AppendBranch> {
        let Some(state) = self.pinv_state.as_ref() else {
            return Err(BlsError::state(
                "model was trained without a retained pseudoinverse; retrain with grow_capable",
            ));
        };
        if data_digest(x, y) != self.data_digest {
            return Err(BlsError::value(
                "growth data differs from the data the model was trained on",
            ));
        }
        if step.is_empty() {
            return Ok(AppendBranch::Empty);
        }

        let mut next = self.clone();
        next.pinv_state = None;
        let (new_window, new_group) = next.push_stage(step);

        let xs = self.standardizer.apply(x)?;
        let act_f = self.hyper.feature_activation;
        let mut z = generate_feature_nodes(&xs, &self.features, act_f)?;
        let mut block_cols = Vec::new();
        if let Some(w) = new_window {
            let z_new = next.features.windows[w].nodes(&xs, act_f);
            z = linalg::hcat(&z, &z_new)?;
            block_cols.push(z_new);
        }
        if let Some(g) = new_group {
            let h_new = next.enhancements.groups[g].nodes(
                &z,
                next.enhancements.shrink,
                self.hyper.enhancement_activation,
            );
            block_cols.push(h_new);
        }
        let block = match block_cols.len() {
            1 => block_cols.pop().unwrap(),
            _ => linalg::hcat(&block_cols[0], &block_cols[1])?,
        };

        let (new_state, factors) = linalg::append_columns(state, &block)?;
        next.w_out = factors.output_weights(&self.w_out, y)?;
        next.pinv_state = Some(new_state);
        *self = next;
        Ok(factors.branch)
    }

    /// Training-set scores from the retained design matrix.
    pub fn training_scores(&self) -> Option<Matrix> {
        self.pinv_state.as_ref().map(|s| &s.a * &self.w_out)
    }

    /// `‖AW − Y‖²_F` on the retained training design matrix.
    pub fn training_sse(&self, y: &Matrix) -> Option<f64> {
        self.training_scores().map(|s| linalg::frobenius(&(&s - y)).powi(2))
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }

    pub fn features(&self) -> &FeatureBank {
        &self.features
    }

    pub fn enhancements(&self) -> &EnhancementBank {
        &self.enhancements
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn w_out(&self) -> &Matrix {
        &self.w_out
    }

    pub fn pinv_state(&self) -> Option<&PinvState> {
        self.pinv_state.as_ref()
    }

    pub fn is_grow_capable(&self) -> bool {
        self.pinv_state.is_some()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn feature_node_count(&self) -> usize {
        self.features.node_count()
    }

    pub fn enhancement_node_count(&self) -> usize {
        self.enhancements.node_count()
    }

    /// Design matrix width: feature nodes plus enhancement nodes.
    pub fn width(&self) -> usize {
        self.feature_node_count() + self.enhancement_node_count()
    }

    pub fn data_digest(&self) -> &[u8; 32] {
        &self.data_digest
    }
}

fn check_training_data(x: &Matrix, y: &Matrix) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(BlsError::dim(format!(
            "{} input rows but {} target rows",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.nrows() < 2 {
        return Err(BlsError::value("need at least 2 training samples"));
    }
    if x.ncols() == 0 {
        return Err(BlsError::dim("input has no columns"));
    }
    ensure_finite(x, "training input")?;
    if y.ncols() < 2 || check_one_hot(y)? < 2 {
        return Err(BlsError::value("training targets must contain at least 2 classes"));
    }
    Ok(())
}

/// One row of a growth log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRecord {
    pub step: usize,
    pub feature_nodes: usize,
    pub enhancement_nodes: usize,
    pub train_accuracy: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthLog {
    pub records: Vec<GrowthRecord>,
    pub reached: bool,
}

impl GrowthLog {
    pub fn note(&self) -> &'static str {
        if self.reached {
            "threshold reached"
        } else {
            "threshold not reached"
        }
    }
}

/// Train, then keep growing by `step` until the training accuracy reaches
/// `target_accuracy` or `max_steps` growth steps have run.
pub fn train_until(
    x: &Matrix,
    y: &Matrix,
    hyper: &HyperParams,
    target_accuracy: f64,
    step: GrowthStep,
    max_steps: usize,
) -> Result<(BlsModel, GrowthLog)> {
    if !(target_accuracy > 0.0 && target_accuracy <= 1.0) {
        return Err(BlsError::value(format!(
            "target accuracy must lie in (0, 1], got {target_accuracy}"
        )));
    }
    let start = Instant::now();
    let mut model = BlsModel::train(x, y, hyper, true)?;
    let mut records = Vec::new();
    let record = |model: &BlsModel, step_no: usize, secs: f64| GrowthRecord {
        step: step_no,
        feature_nodes: model.feature_node_count(),
        enhancement_nodes: model.enhancement_node_count(),
        train_accuracy: one_hot_argmax_accuracy(&model.training_scores().unwrap(), y),
        seconds: secs,
    };
    records.push(record(&model, 0, start.elapsed().as_secs_f64()));
    let mut steps = 0;
    while records.last().unwrap().train_accuracy < target_accuracy && steps < max_steps {
        let t = Instant::now();
        model.grow(step, x, y)?;
        steps += 1;
        records.push(record(&model, steps, t.elapsed().as_secs_f64()));
        log::debug!(
            "growth step {steps}: {} columns, train accuracy {:.4}",
            model.width(),
            records.last().unwrap().train_accuracy
        );
    }
    let reached = records.last().unwrap().train_accuracy >= target_accuracy;
    Ok((model, GrowthLog { records, reached }))
}
