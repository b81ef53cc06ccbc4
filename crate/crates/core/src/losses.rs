//! Loss and overlap-metric evaluators.
//!
//! These never differentiate; they exist so that a trainer's losses can be
//! checked against an independent implementation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Field;

/// Clamp applied inside `ln` for segmentation cross-entropy.
pub const LOG_EPS: f64 = 1e-7;
pub const DEFAULT_ALPHA: f64 = 1.0;
const PROB_TOL: f64 = 1e-6;

/// Per-view network outputs for one source image.
#[derive(Debug, Clone)]
pub struct PredictionBatch {
    /// Reconstructed saliency, one field per view.
    pub saliency: Vec<Field>,
    /// Per-pixel class probabilities, one field per view with one channel per
    /// class. May be empty when only the saliency loss is needed.
    pub segmentation: Vec<Field>,
}

/// Targets shared by all views of one source image.
#[derive(Debug, Clone)]
pub struct TargetBatch {
    pub saliency: Field,
    /// One-hot labels, one channel per class.
    pub labels: Option<Field>,
}

/// Mean over views and elements of `(psi - phi_k)^2`.
pub fn loss_self(preds: &PredictionBatch, target: &TargetBatch) -> Result<f64> {
    if preds.saliency.is_empty() {
        return Err(Error::invalid("prediction batch has no views"));
    }
    let psi = target.saliency.data();
    let mut total = 0.0;
    for (k, view) in preds.saliency.iter().enumerate() {
        if !view.same_shape(&target.saliency) {
            return Err(Error::invalid(format!(
                "saliency view {k} has shape {:?}, target has {:?}",
                view.shape(),
                target.saliency.shape()
            )));
        }
        total += view
            .data()
            .iter()
            .zip(psi)
            .map(|(p, t)| (t - p) * (t - p))
            .sum::<f64>();
    }
    Ok(total / (preds.saliency.len() * psi.len()) as f64)
}

/// Mean over views and pixels of `-sum_c y_c ln(max(p_c, eps))`.
pub fn loss_seg(preds: &PredictionBatch, target: &TargetBatch) -> Result<f64> {
    let labels = target
        .labels
        .as_ref()
        .ok_or_else(|| Error::invalid("segmentation loss needs labels"))?;
    if preds.segmentation.is_empty() {
        return Err(Error::invalid("prediction batch has no segmentation views"));
    }
    check_one_hot(labels)?;
    let classes = labels.channels();
    let pixels = labels.plane_len();
    let mut total = 0.0;
    for (k, view) in preds.segmentation.iter().enumerate() {
        if !view.same_shape(labels) {
            return Err(Error::invalid(format!(
                "segmentation view {k} has shape {:?}, labels have {:?}",
                view.shape(),
                labels.shape()
            )));
        }
        check_probabilities(view, k)?;
        for c in 0..classes {
            for (&p, &y) in view.plane(c).iter().zip(labels.plane(c)) {
                if y != 0.0 {
                    total -= y * p.max(LOG_EPS).ln();
                }
            }
        }
    }
    Ok(total / (preds.segmentation.len() * pixels) as f64)
}

pub fn loss_total(l_sel: f64, l_seg: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(l_sel + alpha * l_seg)
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::config(format!("alpha must be >= 0, got {alpha}")));
    }
    Ok(())
}

fn check_one_hot(labels: &Field) -> Result<()> {
    for i in 0..labels.plane_len() {
        let mut ones = 0;
        for c in 0..labels.channels() {
            match labels.plane(c)[i] {
                1.0 => ones += 1,
                0.0 => {}
                v => {
                    return Err(Error::invalid(format!(
                        "label value {v} at pixel {i} is not one-hot"
                    )))
                }
            }
        }
        if ones != 1 {
            return Err(Error::invalid(format!(
                "pixel {i} has {ones} active classes in the label"
            )));
        }
    }
    Ok(())
}

fn check_probabilities(view: &Field, k: usize) -> Result<()> {
    for i in 0..view.plane_len() {
        let mut sum = 0.0;
        for c in 0..view.channels() {
            let p = view.plane(c)[i];
            if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&p) {
                return Err(Error::invalid(format!(
                    "probability {p} outside [0, 1] in view {k}, pixel {i}"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::invalid(format!(
                "probabilities sum to {sum} in view {k}, pixel {i}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub dice: f64,
    pub iou: f64,
}

/// Dice and IoU of two binary masks; two empty masks score `(1, 1)`.
pub fn dice_and_iou(pred: &[bool], truth: &[bool]) -> Result<Overlap> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "mask lengths differ: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    let (mut inter, mut a, mut b) = (0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        a += p as usize;
        b += t as usize;
        inter += (p && t) as usize;
    }
    if a + b == 0 {
        return Ok(Overlap { dice: 1.0, iou: 1.0 });
    }
    let union = a + b - inter;
    Ok(Overlap {
        dice: 2.0 * inter as f64 / (a + b) as f64,
        iou: inter as f64 / union as f64,
    })
}

/// Per-pixel argmax over the class channels of a probability field.
pub fn argmax_classes(probs: &Field) -> Vec<usize> {
    (0..probs.plane_len())
        .map(|i| {
            (0..probs.channels())
                .fold((0, f64::NEG_INFINITY), |(best, bv), c| {
                    let v = probs.plane(c)[i];
                    if v > bv {
                        (c, v)
                    } else {
                        (best, bv)
                    }
                })
                .0
        })
        .collect()
}

/// Full record printed by the `losses` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub views: usize,
    pub alpha: f64,
    pub loss_self: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_seg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_total: Option<f64>,
    /// Foreground overlap per view, foreground meaning any class other than 0.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub overlap: Vec<Overlap>,
}

pub fn evaluate(preds: &PredictionBatch, target: &TargetBatch, alpha: f64) -> Result<LossReport> {
    check_alpha(alpha)?;
    let l_sel = loss_self(preds, target)?;
    let (loss_seg, loss_total, overlap) = match &target.labels {
        Some(labels) if !preds.segmentation.is_empty() => {
            let l_seg = loss_seg(preds, target)?;
            let truth: Vec<bool> = argmax_classes(labels).into_iter().map(|c| c != 0).collect();
            let overlap = preds
                .segmentation
                .iter()
                .map(|view| {
                    let pred: Vec<bool> =
                        argmax_classes(view).into_iter().map(|c| c != 0).collect();
                    dice_and_iou(&pred, &truth)
                })
                .collect::<Result<Vec<_>>>()?;
            (Some(l_seg), Some(loss_total(l_sel, l_seg, alpha)?), overlap)
        }
        _ => (None, None, Vec::new()),
    };
    Ok(LossReport {
        views: preds.saliency.len(),
        alpha,
        loss_self: l_sel,
        loss_seg,
        loss_total,
        overlap,
    })
}
