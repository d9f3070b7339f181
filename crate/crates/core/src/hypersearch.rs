//! Seeded search over the node counts `(n1, n2, n3)` and the ridge
//! penalty, scored by validation accuracy.
//!
//! The validation split is carved out of whatever data is passed in, so
//! callers should pass only their training portion. Trials run in parallel
//! but every trial draws from its own RNG stream and the log is kept in
//! index order, so results do not depend on scheduling.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bls::{BlsModel, HyperParams};
use crate::data::{self, LabeledFeatures};
use crate::error::{BlsError, Result};
use crate::rng::{stream, StreamKind};

pub const DEFAULT_BUDGET: usize = 50;
pub const DEFAULT_VAL_FRACTION: f64 = 0.2;
pub const DEFAULT_ETA: f64 = 3.0;

/// Inclusive integer interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Range {
    pub low: usize,
    pub high: usize,
}

impl Range {
    pub fn new(low: usize, high: usize) -> Self {
        Self { low, high }
    }

    pub fn single(v: usize) -> Self {
        Self { low: v, high: v }
    }

    pub fn contains(&self, v: usize) -> bool {
        (self.low..=self.high).contains(&v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub n1: Range,
    pub n2: Range,
    pub n3: Range,
    pub lambda_choices: Vec<f64>,
    /// Activations, shrink and seed for every trial.
    pub base: HyperParams,
}

impl SearchSpace {
    pub fn new(n1: Range, n2: Range, n3: Range, lambda_choices: Vec<f64>) -> Self {
        Self {
            n1,
            n2,
            n3,
            lambda_choices,
            base: HyperParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("n1", self.n1), ("n2", self.n2), ("n3", self.n3)] {
            if r.low == 0 || r.low > r.high {
                return Err(BlsError::value(format!("{name} range [{}, {}] is empty or starts at 0", r.low, r.high)));
            }
        }
        if self.lambda_choices.is_empty() {
            return Err(BlsError::value("no lambda choices"));
        }
        if let Some(l) = self.lambda_choices.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return Err(BlsError::value(format!("lambda choice {l} is not a finite nonnegative number")));
        }
        Ok(())
    }

    pub fn contains(&self, h: &HyperParams) -> bool {
        self.n1.contains(h.n1) && self.n2.contains(h.n2) && self.n3.contains(h.n3) && self.lambda_choices.contains(&h.lambda)
    }

    /// Configuration number `index` of the search seeded with `seed`.
    pub fn sample(&self, seed: u64, index: usize) -> HyperParams {
        let mut rng = stream(seed, StreamKind::Trial, index as u64);
        let n1 = rng.random_range(self.n1.low..=self.n1.high);
        let n2 = rng.random_range(self.n2.low..=self.n2.high);
        let n3 = rng.random_range(self.n3.low..=self.n3.high);
        let lambda = self.lambda_choices[rng.random_range(0..self.lambda_choices.len())];
        HyperParams {
            n1,
            n2,
            n3,
            lambda,
            ..self.base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub hyper: HyperParams,
    pub val_accuracy: f64,
    pub train_seconds: f64,
    /// Training rows used; smaller than the split on early halving rungs.
    pub train_rows: usize,
    pub rung: usize,
}

/// One line of the trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub rung: usize,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub lambda: f64,
    pub train_rows: usize,
    pub val_accuracy: f64,
    pub seconds: f64,
}

impl From<&Trial> for TrialRecord {
    fn from(t: &Trial) -> Self {
        Self {
            index: t.index,
            rung: t.rung,
            n1: t.hyper.n1,
            n2: t.hyper.n2,
            n3: t.hyper.n3,
            lambda: t.hyper.lambda,
            train_rows: t.train_rows,
            val_accuracy: t.val_accuracy,
            seconds: t.train_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: Trial,
    pub log: Vec<Trial>,
}

impl SearchOutcome {
    /// Total training rows consumed, summed over trials.
    pub fn work(&self) -> usize {
        self.log.iter().map(|t| t.train_rows).sum()
    }

    pub fn write_log(&self, mut out: impl Write) -> Result<()> {
        for t in &self.log {
            let line = serde_json::to_string(&TrialRecord::from(t)).expect("records serialize");
            writeln!(out, "{line}").map_err(|e| BlsError::io("trial log", e))?;
        }
        Ok(())
    }
}

struct Prepared {
    train: LabeledFeatures,
    val: LabeledFeatures,
}

fn prepare(space: &SearchSpace, data: &LabeledFeatures, budget: usize, val_fraction: f64, seed: u64) -> Result<Prepared> {
    space.validate()?;
    if budget == 0 {
        return Err(BlsError::value("search budget must be at least 1"));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(BlsError::value(format!("validation fraction must lie in (0, 1), got {val_fraction}")));
    }
    let s = data::split(data.len(), 1.0 - val_fraction, seed)?;
    if s.train.is_empty() || s.test.is_empty() {
        return Err(BlsError::value(format!(
            "{} samples leave an empty split at validation fraction {val_fraction}",
            data.len()
        )));
    }
    Ok(Prepared {
        train: data.subset(&s.train),
        val: data.subset(&s.test),
    })
}

fn evaluate(index: usize, rung: usize, hyper: &HyperParams, train: &LabeledFeatures, val: &LabeledFeatures) -> Result<Trial> {
    let start = Instant::now();
    let model = BlsModel::train(&train.x, &train.one_hot(), hyper, false)?;
    let train_seconds = start.elapsed().as_secs_f64();
    let pred = model.predict_labels(&val.x)?;
    let val_accuracy = data::accuracy(&pred, &val.labels)?;
    log::debug!(
        "trial {index} rung {rung}: n1={} n2={} n3={} lambda={} rows={} acc={val_accuracy:.4}",
        hyper.n1,
        hyper.n2,
        hyper.n3,
        hyper.lambda,
        train.len()
    );
    Ok(Trial {
        index,
        hyper: hyper.clone(),
        val_accuracy,
        train_seconds,
        train_rows: train.len(),
        rung,
    })
}

/// Highest accuracy, lowest index on ties.
fn best_of<'a>(trials: impl IntoIterator<Item = &'a Trial>) -> Option<&'a Trial> {
    trials
        .into_iter()
        .fold(None, |acc: Option<&Trial>, t| match acc {
            Some(b) if b.val_accuracy > t.val_accuracy || (b.val_accuracy == t.val_accuracy && b.index <= t.index) => Some(b),
            _ => Some(t),
        })
}

fn run_cohort(cohort: &[(usize, HyperParams)], rung: usize, train: &LabeledFeatures, val: &LabeledFeatures) -> Result<Vec<Trial>> {
    cohort
        .par_iter()
        .map(|(i, h)| evaluate(*i, rung, h, train, val))
        .collect()
}

/// Uniform random search: `budget` configurations, each trained on the
/// training part and scored on the validation part.
pub fn random_search(space: &SearchSpace, data: &LabeledFeatures, budget: usize, val_fraction: f64, seed: u64) -> Result<SearchOutcome> {
    let p = prepare(space, data, budget, val_fraction, seed)?;
    let cohort: Vec<_> = (0..budget).map(|i| (i, space.sample(seed, i))).collect();
    let log = run_cohort(&cohort, 0, &p.train, &p.val)?;
    let best = best_of(&log).expect("budget >= 1").clone();
    Ok(SearchOutcome { best, log })
}

/// Number of reductions for a cohort of `budget` at rate `eta`: the
/// largest `k` with `eta^k ≤ budget`. `eta > budget` gives a single round.
pub fn halving_rounds(budget: usize, eta: f64) -> usize {
    let mut k = 0;
    let mut size = eta;
    while size <= budget as f64 * (1.0 + 1e-12) {
        k += 1;
        size *= eta;
    }
    k
}

/// Successive halving over the same cohort random search would draw.
///
/// With `k = halving_rounds(budget, eta)`, rung `r` trains the survivors on
/// the first `eta^(r−k)` of a fixed shuffle of the training rows, and only
/// the best `⌈n/eta⌉` go on. The last rung always uses every training row,
/// and the best trial is taken from it.
pub fn halving_search(
    space: &SearchSpace,
    data: &LabeledFeatures,
    budget: usize,
    eta: f64,
    val_fraction: f64,
    seed: u64,
) -> Result<SearchOutcome> {
    if !(eta > 1.0) || !eta.is_finite() {
        return Err(BlsError::value(format!("eta must be a finite number above 1, got {eta}")));
    }
    let p = prepare(space, data, budget, val_fraction, seed)?;
    let rounds = halving_rounds(budget, eta);
    let n = p.train.len();
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut stream(seed, StreamKind::Split, 1));

    let mut cohort: Vec<_> = (0..budget).map(|i| (i, space.sample(seed, i))).collect();
    let mut log = Vec::new();
    for rung in 0..=rounds {
        let fraction = eta.powi(rung as i32 - rounds as i32);
        let rows = ((fraction * n as f64).ceil() as usize).clamp(p.train.classes.min(n), n);
        let train = if rows == n { p.train.clone() } else { p.train.subset(&order[..rows]) };
        let mut results = run_cohort(&cohort, rung, &train, &p.val)?;
        if rung == rounds {
            let best = best_of(&results).expect("nonempty cohort").clone();
            log.append(&mut results);
            return Ok(SearchOutcome { best, log });
        }
        let keep = ((cohort.len() as f64 / eta).ceil() as usize).max(1);
        let mut ranked: Vec<&Trial> = results.iter().collect();
        ranked.sort_by(|a, b| b.val_accuracy.total_cmp(&a.val_accuracy).then(a.index.cmp(&b.index)));
        cohort = ranked[..keep].iter().map(|t| (t.index, t.hyper.clone())).collect();
        cohort.sort_by_key(|(i, _)| *i);
        log.append(&mut results);
    }
    unreachable!("the final rung returns")
}
