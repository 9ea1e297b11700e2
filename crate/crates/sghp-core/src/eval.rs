//! Prediction metrics and triggering-kernel recovery.
//!
//! Last-event metrics score the model's next-event prediction from the full
//! preceding history of each sequence: RMSE on the inter-arrival gap and
//! micro-F1 (equal to accuracy for single-label prediction) on the type.
//! Kernel recovery compares learned `q_{uv}` curves against ground-truth
//! kernels after peak normalization, since the training objective identifies
//! the kernel only up to scale.

use alloc::vec::Vec;

use crate::data::Dataset;
use crate::hawkes::HawkesSpec;
use crate::model::{ModelError, SghpModel};
use crate::rng::{self, Stream};

/// A sampled kernel curve for one ordered type pair, ready for CSV export.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelGrid {
    pub source: usize,
    pub target: usize,
    pub times: Vec<f64>,
    pub learned: Vec<f64>,
    pub truth: Option<Vec<f64>>,
}

/// Peak-normalized comparison of one learned kernel against its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryRow {
    pub source: usize,
    pub target: usize,
    /// Max absolute difference between the peak-normalized curves.
    pub linf: f64,
    /// Grid time of the learned curve's maximum (ties toward smaller time).
    pub learned_peak_time: f64,
    /// Grid time of the true curve's maximum.
    pub truth_peak_time: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvalError {
    EmptyDataset,
    /// Last-event metrics need at least two events per sequence.
    ShortSequence { index: usize, len: usize },
    /// Average precision needs at least one positive label.
    NoPositives,
    /// The true kernel is identically zero on the grid.
    DegenerateTruth { source: usize, target: usize },
    TypeCountMismatch { model: usize, truth: usize },
    BadGrid,
    Model(ModelError),
}

impl core::fmt::Display for EvalError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvalError::EmptyDataset => write!(f, "dataset has no sequences"),
            EvalError::ShortSequence { index, len } => {
                write!(f, "sequence too short: sequence {index} has length {len}")
            }
            EvalError::NoPositives => write!(f, "average precision needs a positive label"),
            EvalError::DegenerateTruth { source, target } => {
                write!(f, "true kernel ({source}, {target}) is zero on the whole grid")
            }
            EvalError::TypeCountMismatch { model, truth } => {
                write!(f, "type count mismatch: model K = {model}, truth K = {truth}")
            }
            EvalError::BadGrid => write!(f, "grid must be nonempty and strictly ascending"),
            EvalError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for EvalError {}

impl From<ModelError> for EvalError {
    fn from(e: ModelError) -> Self {
        EvalError::Model(e)
    }
}

fn root_mean_square(diffs: impl Iterator<Item = f64>) -> f64 {
    let mut ss = 0.0;
    let mut n = 0usize;
    for d in diffs {
        ss += d * d;
        n += 1;
    }
    libm::sqrt(ss / n as f64)
}

/// Mean predicted gaps and true gaps for every sequence's last event.
fn last_event_predictions(
    ds: &Dataset,
    model: &SghpModel,
    eval_seed: u64,
) -> Result<Vec<(f64, f64, usize, usize, Vec<f64>)>, EvalError> {
    if ds.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let base = rng::derive(eval_seed, &[rng::tag::EVAL_NOISE]);
    let mut out = Vec::with_capacity(ds.len());
    for (index, seq) in ds.sequences().iter().enumerate() {
        let len = seq.len();
        if len < 2 {
            return Err(EvalError::ShortSequence { index, len });
        }
        let prefix = &seq.events[..len - 1];
        let mut noise = Stream::new(base);
        let pred = model.predict_next(prefix, &mut noise)?;
        let true_gap = seq.events[len - 1].timestamp - seq.events[len - 2].timestamp;
        let true_type = seq.events[len - 1].type_index;
        out.push((
            pred.mean_gap,
            true_gap,
            pred.predicted_type(),
            true_type,
            pred.type_probs,
        ));
    }
    Ok(out)
}

/// RMSE of the last-event inter-arrival gap, predicted from the full
/// preceding history (sample mean over the model's noise draws).
pub fn rmse_last_event(ds: &Dataset, model: &SghpModel, eval_seed: u64) -> Result<f64, EvalError> {
    let preds = last_event_predictions(ds, model, eval_seed)?;
    Ok(root_mean_square(
        preds.iter().map(|(pred, truth, ..)| pred - truth),
    ))
}

fn micro_f1(pairs: &[(usize, usize)], num_types: usize) -> f64 {
    let mut tp = alloc::vec![0usize; num_types];
    let mut fp = alloc::vec![0usize; num_types];
    let mut fn_ = alloc::vec![0usize; num_types];
    for &(pred, truth) in pairs {
        if pred == truth {
            tp[truth] += 1;
        } else {
            fp[pred] += 1;
            fn_[truth] += 1;
        }
    }
    let tp_total: usize = tp.iter().sum();
    let fp_total: usize = fp.iter().sum();
    let fn_total: usize = fn_.iter().sum();
    if tp_total == 0 {
        return 0.0;
    }
    let precision = tp_total as f64 / (tp_total + fp_total) as f64;
    let recall = tp_total as f64 / (tp_total + fn_total) as f64;
    let f1 = 2.0 * precision * recall / (precision + recall);
    // Single-label multiclass micro-F1 collapses to accuracy.
    let accuracy = tp_total as f64 / pairs.len() as f64;
    debug_assert!((f1 - accuracy).abs() < 1e-12);
    f1
}

/// Micro-averaged F1 of argmax type predictions for each sequence's last event.
pub fn f1_micro_last_event(
    ds: &Dataset,
    model: &SghpModel,
    eval_seed: u64,
) -> Result<f64, EvalError> {
    let preds = last_event_predictions(ds, model, eval_seed)?;
    let pairs: Vec<(usize, usize)> = preds
        .iter()
        .map(|&(_, _, pred, truth, _)| (pred, truth))
        .collect();
    Ok(micro_f1(&pairs, model.config().num_types))
}

/// Per-sequence binary scores for the positive class, paired with labels;
/// used for average precision when `K == 2` (type 1 is the positive class).
pub fn binary_scores_last_event(
    ds: &Dataset,
    model: &SghpModel,
    eval_seed: u64,
) -> Result<Vec<(f64, bool)>, EvalError> {
    let preds = last_event_predictions(ds, model, eval_seed)?;
    Ok(preds
        .iter()
        .map(|(_, _, _, truth, probs)| (probs.get(1).copied().unwrap_or(0.0), *truth == 1))
        .collect())
}

/// Average precision: area under the precision-recall step curve by the
/// rank-sum formulation. Ties keep their input order.
pub fn average_precision(scored: &[(f64, bool)]) -> Result<f64, EvalError> {
    let num_pos = scored.iter().filter(|(_, label)| *label).count();
    if num_pos == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].0.partial_cmp(&scored[a].0).unwrap());
    let mut seen_pos = 0usize;
    let mut total = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if scored[i].1 {
            seen_pos += 1;
            total += seen_pos as f64 / (rank + 1) as f64;
        }
    }
    Ok(total / num_pos as f64)
}

/// Default comparison grid: `[0, 8]` with step 0.05.
pub fn default_recovery_grid() -> Vec<f64> {
    (0..=160).map(|i| i as f64 * 0.05).collect()
}

fn check_grid(grid: &[f64]) -> Result<(), EvalError> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(EvalError::BadGrid);
    }
    Ok(())
}

/// Index of the maximum, ties toward the smaller index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Sup distance between two curves after dividing each by its own maximum.
/// `None` when either curve is identically zero (or not positive anywhere).
fn normalized_sup_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    let a_max = a[argmax(a)];
    let b_max = b[argmax(b)];
    if !(a_max > 0.0) || !(b_max > 0.0) {
        return None;
    }
    let mut sup = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        sup = sup.max((x / a_max - y / b_max).abs());
    }
    Some(sup)
}

/// Compares every learned kernel `q_{uv}` against the ground-truth kernel
/// matrix on a shared grid, after peak normalization of each curve.
pub fn kernel_recovery(
    model: &SghpModel,
    truth: &HawkesSpec,
    grid: &[f64],
) -> Result<Vec<RecoveryRow>, EvalError> {
    check_grid(grid)?;
    let k = model.config().num_types;
    if truth.num_types() != k {
        return Err(EvalError::TypeCountMismatch {
            model: k,
            truth: truth.num_types(),
        });
    }
    let mut rows = Vec::with_capacity(k * k);
    for source in 0..k {
        for target in 0..k {
            let learned: Vec<f64> = grid
                .iter()
                .map(|&d| model.kernel_value(source, target, d))
                .collect::<Result<_, _>>()?;
            let true_vals: Vec<f64> = grid
                .iter()
                .map(|&d| truth.kernel(source, target).value(d))
                .collect();
            let linf = normalized_sup_distance(&learned, &true_vals)
                .ok_or(EvalError::DegenerateTruth { source, target })?;
            rows.push(RecoveryRow {
                source,
                target,
                linf,
                learned_peak_time: grid[argmax(&learned)],
                truth_peak_time: grid[argmax(&true_vals)],
            });
        }
    }
    Ok(rows)
}

/// Samples learned (and optionally true) kernel curves for the given pairs.
pub fn export_kernel_grids(
    model: &SghpModel,
    pairs: &[(usize, usize)],
    grid: &[f64],
    truth: Option<&HawkesSpec>,
) -> Result<Vec<KernelGrid>, EvalError> {
    check_grid(grid)?;
    if let Some(spec) = truth {
        if spec.num_types() != model.config().num_types {
            return Err(EvalError::TypeCountMismatch {
                model: model.config().num_types,
                truth: spec.num_types(),
            });
        }
    }
    let mut out = Vec::with_capacity(pairs.len());
    for &(source, target) in pairs {
        let learned: Vec<f64> = grid
            .iter()
            .map(|&d| model.kernel_value(source, target, d))
            .collect::<Result<_, _>>()?;
        let truth_vals = truth.map(|spec| {
            grid.iter()
                .map(|&d| spec.kernel(source, target).value(d))
                .collect()
        });
        out.push(KernelGrid {
            source,
            target,
            times: grid.to_vec(),
            learned,
            truth: truth_vals,
        });
    }
    Ok(out)
}

/// Mean inter-arrival gap preceding events of each type, from training data.
/// Types never observed as a gap target fall back to the global mean gap.
pub fn per_type_mean_gap(ds: &Dataset) -> Vec<f64> {
    let k = ds.num_types();
    let mut sums = alloc::vec![0.0f64; k];
    let mut counts = alloc::vec![0usize; k];
    let mut global_sum = 0.0;
    let mut global_count = 0usize;
    for seq in ds.sequences() {
        for j in 1..seq.len() {
            let gap = seq.events[j].timestamp - seq.events[j - 1].timestamp;
            sums[seq.events[j].type_index] += gap;
            counts[seq.events[j].type_index] += 1;
            global_sum += gap;
            global_count += 1;
        }
    }
    let global_mean = if global_count > 0 {
        global_sum / global_count as f64
    } else {
        0.0
    };
    (0..k)
        .map(|t| {
            if counts[t] > 0 {
                sums[t] / counts[t] as f64
            } else {
                global_mean
            }
        })
        .collect()
}

/// RMSE of the constant per-type baseline on each sequence's last gap: the
/// predictor emits `means[type of last event]`.
pub fn rmse_constant_baseline(ds: &Dataset, means: &[f64]) -> Result<f64, EvalError> {
    if ds.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut diffs = Vec::with_capacity(ds.len());
    for (index, seq) in ds.sequences().iter().enumerate() {
        let len = seq.len();
        if len < 2 {
            return Err(EvalError::ShortSequence { index, len });
        }
        let true_gap = seq.events[len - 1].timestamp - seq.events[len - 2].timestamp;
        let pred = means[seq.events[len - 1].type_index];
        diffs.push(pred - true_gap);
    }
    Ok(root_mean_square(diffs.into_iter()))
}
