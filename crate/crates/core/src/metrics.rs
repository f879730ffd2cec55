//! Evaluation measures for binary saliency maps over point sets: MAE, IoU,
//! and F-/E-measure curves over a 256-threshold grid.
//!
//! Conventions, fixed here once:
//! - binarization is inclusive, B = [p ≥ t], so t = 0 marks everything positive;
//! - F-measure with no predicted positives has precision 0; with no ground
//!   truth positives it is undefined and the view is skipped in aggregation;
//! - E-measure on two constant signals is 1 when they agree and 0 otherwise;
//! - IoU of two empty sets is 1;
//! - the scalar F/E of a report is the maximum over the threshold grid
//!   (the mean is also carried for transparency).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub const THRESHOLD_COUNT: usize = 256;

#[derive(Clone, Debug)]
pub struct MetricsConfig {
    pub beta_sq: f64,
    pub iou_threshold: f64,
    pub epsilon: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            beta_sq: 0.3,
            iou_threshold: 0.5,
            epsilon: 1e-12,
        }
    }
}

/// The threshold grid {i/255 : i = 0..255}.
pub fn threshold_grid() -> Vec<f64> {
    (0..THRESHOLD_COUNT).map(|i| i as f64 / 255.0).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MetricsError {
    LengthMismatch { predictions: usize, labels: usize },
    EmptyReportList,
    BadThreshold(String),
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::LengthMismatch { predictions, labels } => {
                write!(f, "{predictions} predictions vs {labels} labels")
            }
            MetricsError::EmptyReportList => write!(f, "no reports to aggregate"),
            MetricsError::BadThreshold(t) => write!(f, "threshold {t} outside [0,1]"),
        }
    }
}

/// Scores of one evaluation run (a single view, or a dataset aggregate).
#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub mae: f64,
    pub iou: f64,
    /// F-measure per grid threshold; NaN where undefined (empty ground truth).
    pub f_curve: Vec<f64>,
    pub e_curve: Vec<f64>,
    pub max_f: f64,
    pub max_e: f64,
    pub mean_f: f64,
    pub mean_e: f64,
}

pub fn mae(predictions: &[f64], labels: &[u8]) -> Result<f64, MetricsError> {
    check_lengths(predictions, labels)?;
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(&p, &g)| (p - g as f64).abs())
        .sum();
    Ok(total / predictions.len() as f64)
}

fn check_lengths(predictions: &[f64], labels: &[u8]) -> Result<(), MetricsError> {
    if predictions.len() != labels.len() || predictions.is_empty() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    Ok(())
}

fn check_threshold(t: f64) -> Result<(), MetricsError> {
    if !(0.0..=1.0).contains(&t) {
        let mut s = String::new();
        let _ = fmt::write(&mut s, format_args!("{t}"));
        return Err(MetricsError::BadThreshold(s));
    }
    Ok(())
}

/// Confusion counts of [p ≥ t] against binary labels.
fn confusion(predictions: &[f64], labels: &[u8], t: f64) -> (u64, u64, u64, u64) {
    let (mut tp, mut fp, mut fne, mut tn) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &g) in predictions.iter().zip(labels) {
        match (p >= t, g == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            (false, false) => tn += 1,
        }
    }
    (tp, fp, fne, tn)
}

/// F-measure at one threshold; `None` when the ground truth has no
/// positives (undefined by convention, skipped in aggregation).
pub fn f_measure_at(
    predictions: &[f64],
    labels: &[u8],
    t: f64,
    beta_sq: f64,
) -> Result<Option<f64>, MetricsError> {
    check_lengths(predictions, labels)?;
    check_threshold(t)?;
    let (tp, fp, fne, _) = confusion(predictions, labels, t);
    if tp + fne == 0 {
        return Ok(None);
    }
    let prec = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let reca = tp as f64 / (tp + fne) as f64;
    if prec == 0.0 && reca == 0.0 {
        return Ok(Some(0.0));
    }
    Ok(Some(
        (1.0 + beta_sq) * prec * reca / (beta_sq * prec + reca),
    ))
}

/// Enhanced-alignment measure of [p ≥ t] against the labels, computed per
/// point: bias signals are the binarized maps minus their means, the
/// alignment is their normalized product, and the enhanced alignment
/// (1+ξ)²/4 is averaged.
pub fn e_measure_at(
    predictions: &[f64],
    labels: &[u8],
    t: f64,
    epsilon: f64,
) -> Result<f64, MetricsError> {
    check_lengths(predictions, labels)?;
    check_threshold(t)?;
    let n = predictions.len();
    let b: Vec<f64> = predictions.iter().map(|&p| (p >= t) as u8 as f64).collect();
    let g: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let mean_b: f64 = b.iter().sum::<f64>() / n as f64;
    let mean_g: f64 = g.iter().sum::<f64>() / n as f64;

    let b_constant = mean_b == 0.0 || mean_b == 1.0;
    let g_constant = mean_g == 0.0 || mean_g == 1.0;
    if b_constant && g_constant {
        return Ok(if mean_b == mean_g { 1.0 } else { 0.0 });
    }

    let mut total = 0.0;
    for (&bv, &gv) in b.iter().zip(&g) {
        let phi_b = bv - mean_b;
        let phi_g = gv - mean_g;
        let xi = 2.0 * phi_b * phi_g / (phi_b * phi_b + phi_g * phi_g + epsilon);
        let enhanced = (1.0 + xi) * (1.0 + xi) / 4.0;
        total += enhanced;
    }
    Ok(total / n as f64)
}

/// Intersection over union of [p ≥ t] against the labels; two empty sets
/// have IoU 1.
pub fn iou(predictions: &[f64], labels: &[u8], t: f64) -> Result<f64, MetricsError> {
    check_lengths(predictions, labels)?;
    check_threshold(t)?;
    let (tp, fp, fne, _) = confusion(predictions, labels, t);
    let union = tp + fp + fne;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(tp as f64 / union as f64)
}

/// Full per-view report: MAE, IoU at the configured threshold, and F/E
/// curves over the grid with their maxima and means.
pub fn evaluate(
    predictions: &[f64],
    labels: &[u8],
    cfg: &MetricsConfig,
) -> Result<MetricsReport, MetricsError> {
    check_lengths(predictions, labels)?;
    let grid = threshold_grid();
    let mut f_curve = Vec::with_capacity(grid.len());
    let mut e_curve = Vec::with_capacity(grid.len());
    for &t in &grid {
        let f = f_measure_at(predictions, labels, t, cfg.beta_sq)?;
        f_curve.push(f.unwrap_or(f64::NAN));
        e_curve.push(e_measure_at(predictions, labels, t, cfg.epsilon)?);
    }
    let report = MetricsReport {
        mae: mae(predictions, labels)?,
        iou: iou(predictions, labels, cfg.iou_threshold)?,
        max_f: curve_max(&f_curve),
        max_e: curve_max(&e_curve),
        mean_f: curve_mean(&f_curve),
        mean_e: curve_mean(&e_curve),
        f_curve,
        e_curve,
    };
    Ok(report)
}

fn curve_max(curve: &[f64]) -> f64 {
    curve
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NAN, f64::max)
}

fn curve_mean(curve: &[f64]) -> f64 {
    let defined: Vec<f64> = curve.iter().copied().filter(|v| !v.is_nan()).collect();
    if defined.is_empty() {
        return f64::NAN;
    }
    defined.iter().sum::<f64>() / defined.len() as f64
}

/// Dataset-level report: per-view metrics averaged, curves averaged per
/// threshold (views with undefined F skipped per threshold), and the
/// scalar F/E recomputed from the averaged curves.
pub fn aggregate(reports: &[MetricsReport]) -> Result<MetricsReport, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::EmptyReportList);
    }
    let n = reports.len() as f64;
    let grid_len = reports[0].f_curve.len();
    let mut f_curve = vec![0.0f64; grid_len];
    let mut e_curve = vec![0.0f64; grid_len];
    for (ti, (fv, ev)) in f_curve.iter_mut().zip(e_curve.iter_mut()).enumerate() {
        let defined: Vec<f64> = reports
            .iter()
            .map(|r| r.f_curve[ti])
            .filter(|v| !v.is_nan())
            .collect();
        *fv = if defined.is_empty() {
            f64::NAN
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        };
        *ev = reports.iter().map(|r| r.e_curve[ti]).sum::<f64>() / n;
    }
    Ok(MetricsReport {
        mae: reports.iter().map(|r| r.mae).sum::<f64>() / n,
        iou: reports.iter().map(|r| r.iou).sum::<f64>() / n,
        max_f: curve_max(&f_curve),
        max_e: curve_max(&e_curve),
        mean_f: curve_mean(&f_curve),
        mean_e: curve_mean(&e_curve),
        f_curve,
        e_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 0.0, 1.0], &[1, 0, 1]).unwrap(), 0.0);
        assert_eq!(mae(&[0.5, 0.5, 0.5, 0.5], &[1, 0, 1, 0]).unwrap(), 0.5);
        let got = mae(&[0.2, 0.9, 0.4], &[0, 1, 1]).unwrap();
        assert!((got - 0.3).abs() < 1e-12, "hand sum (0.2+0.1+0.6)/3");
    }

    #[test]
    fn mae_zero_iff_exact() {
        assert!(mae(&[1.0, 0.0, 0.999], &[1, 0, 1]).unwrap() > 0.0);
    }

    #[test]
    fn mae_rejects_length_mismatch() {
        assert!(mae(&[0.5], &[1, 0]).is_err());
    }

    #[test]
    fn f_measure_perfect_prediction() {
        let p = [1.0, 0.0, 1.0, 0.0];
        let g = [1, 0, 1, 0];
        assert_eq!(f_measure_at(&p, &g, 0.5, 0.3).unwrap(), Some(1.0));
    }

    #[test]
    fn f_measure_worked_confusion_counts() {
        // TP=4, FP=1, FN=4 → prec=0.8, reca=0.5, F = 1.3·0.4/0.74
        let mut p = vec![1.0; 4]; // TP
        p.push(1.0); // FP
        p.extend(vec![0.0; 4]); // FN
        let mut g = vec![1u8; 4];
        g.push(0);
        g.extend(vec![1u8; 4]);
        let f = f_measure_at(&p, &g, 0.5, 0.3).unwrap().unwrap();
        assert!((f - 1.3 * 0.4 / 0.74).abs() < 1e-12);
        assert!((f - 0.7027).abs() < 1e-4);
    }

    #[test]
    fn f_measure_all_negative_prediction() {
        let p = [0.0, 0.0, 0.0];
        let g = [1, 1, 0];
        assert_eq!(f_measure_at(&p, &g, 0.5, 0.3).unwrap(), Some(0.0));
    }

    #[test]
    fn f_measure_undefined_without_gt_positives() {
        let p = [1.0, 0.0];
        let g = [0, 0];
        assert_eq!(f_measure_at(&p, &g, 0.5, 0.3).unwrap(), None);
    }

    #[test]
    fn e_measure_identical_mixed_signals() {
        let p = [1.0, 0.0, 1.0, 0.0, 1.0];
        let g = [1, 0, 1, 0, 1];
        let e = e_measure_at(&p, &g, 0.5, 1e-12).unwrap();
        assert!((e - 1.0).abs() < 1e-6);
    }

    #[test]
    fn e_measure_antisymmetric_signals() {
        let p = [0.0, 1.0, 0.0, 1.0];
        let g = [1, 0, 1, 0];
        let e = e_measure_at(&p, &g, 0.5, 1e-12).unwrap();
        assert!(e.abs() < 1e-6);
    }

    #[test]
    fn e_measure_constant_conventions() {
        assert_eq!(e_measure_at(&[1.0, 1.0], &[1, 1], 0.5, 1e-12).unwrap(), 1.0);
        assert_eq!(e_measure_at(&[0.0, 0.0], &[1, 1], 0.5, 1e-12).unwrap(), 0.0);
        assert_eq!(e_measure_at(&[0.0, 0.0], &[0, 0], 0.5, 1e-12).unwrap(), 1.0);
    }

    #[test]
    fn e_measure_symmetric_in_arguments() {
        let p = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let g = [0u8, 0, 1, 1, 0, 1, 0];
        let pg: Vec<f64> = g.iter().map(|&v| v as f64).collect();
        let gp: Vec<u8> = p.iter().map(|&v| (v >= 0.5) as u8).collect();
        let a = e_measure_at(&p, &g, 0.5, 1e-12).unwrap();
        let b = e_measure_at(&pg, &gp, 0.5, 1e-12).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn iou_examples() {
        let g = [1, 1, 1, 0, 0];
        assert_eq!(iou(&[1.0, 1.0, 1.0, 0.0, 0.0], &g, 0.5).unwrap(), 1.0);
        assert_eq!(iou(&[0.0, 0.0, 0.0, 1.0, 1.0], &g, 0.5).unwrap(), 0.0);
        // B = {1,2,3}, G = {2,3,4} as index sets → 2/4
        let p = [0.0, 1.0, 1.0, 1.0, 0.0];
        let g2 = [0, 0, 1, 1, 1];
        assert_eq!(iou(&p, &g2, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn iou_empty_sets_convention() {
        assert_eq!(iou(&[0.0, 0.0], &[0, 0], 0.5).unwrap(), 1.0);
    }

    #[test]
    fn binarization_is_inclusive() {
        // t = 0 marks everything positive
        let p = [0.0, 0.3];
        let g = [1, 1];
        assert_eq!(iou(&p, &g, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn evaluate_perfect_prediction() {
        let p = [1.0, 0.0, 1.0, 0.0, 0.0];
        let g = [1, 0, 1, 0, 0];
        let r = evaluate(&p, &g, &MetricsConfig::default()).unwrap();
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.iou, 1.0);
        assert_eq!(r.max_f, 1.0);
        assert!((r.max_e - 1.0).abs() < 1e-6);
        assert_eq!(r.f_curve.len(), 256);
        assert_eq!(r.e_curve.len(), 256);
    }

    #[test]
    fn aggregate_of_identical_reports_is_identity() {
        let p = [0.9, 0.2, 0.7, 0.1];
        let g = [1, 0, 1, 0];
        let r = evaluate(&p, &g, &MetricsConfig::default()).unwrap();
        let agg = aggregate(&[r.clone(), r.clone(), r.clone()]).unwrap();
        assert!((agg.mae - r.mae).abs() < 1e-12);
        assert!((agg.iou - r.iou).abs() < 1e-12);
        assert!((agg.max_f - r.max_f).abs() < 1e-12);
        assert!((agg.max_e - r.max_e).abs() < 1e-12);
    }

    #[test]
    fn aggregate_rejects_empty() {
        assert!(matches!(aggregate(&[]), Err(MetricsError::EmptyReportList)));
    }

    #[test]
    fn f_and_iou_depend_only_on_binarization() {
        // any monotone remap preserving threshold crossings gives the same F
        let p = [0.9, 0.2, 0.7, 0.1, 0.6];
        let remapped: Vec<f64> = p.iter().map(|&v| if v >= 0.5 { 0.8 } else { 0.2 }).collect();
        let g = [1, 0, 1, 0, 1];
        let a = f_measure_at(&p, &g, 0.5, 0.3).unwrap();
        let b = f_measure_at(&remapped, &g, 0.5, 0.3).unwrap();
        assert_eq!(a, b);
        assert_eq!(iou(&p, &g, 0.5).unwrap(), iou(&remapped, &g, 0.5).unwrap());
    }
}
