//! Difference-of-confidence baseline.
//!
//! The gap between mean max-confidence on the labeled source split and on
//! the target split is read as an accuracy drop. In naive mode the drop is
//! the gap itself; in regression mode the drop is a least-squares line in
//! the gap, fitted on caller-supplied labeled calibration splits.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::simplex::{true_accuracy, MetricValue, PredictionSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DocMode {
    Naive,
    Regression,
}

impl fmt::Display for DocMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DocMode::Naive => "doc",
            DocMode::Regression => "doc-reg",
        })
    }
}

impl FromStr for DocMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "doc" | "naive" => Ok(DocMode::Naive),
            "doc-reg" | "regression" => Ok(DocMode::Regression),
            other => Err(format!("unknown DoC mode '{other}'")),
        }
    }
}

/// `drop = intercept + slope * gap`, anchored at the source split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DocModel {
    pub mode: DocMode,
    pub intercept: f64,
    pub slope: f64,
    pub source_mean_conf: f64,
    pub source_accuracy: MetricValue,
}

impl DocModel {
    /// Naive model: drop equals gap.
    pub fn naive(source: &PredictionSet) -> Result<Self> {
        Ok(Self {
            mode: DocMode::Naive,
            intercept: 0.0,
            slope: 1.0,
            source_mean_conf: mean_max_conf(source),
            source_accuracy: true_accuracy(source)?,
        })
    }

    /// Estimated target accuracy, clamped to `[0, 1]`.
    pub fn estimate(&self, target: &PredictionSet) -> MetricValue {
        let gap = self.source_mean_conf - mean_max_conf(target);
        self.estimate_from_gap(gap)
    }

    pub fn estimate_from_gap(&self, gap: f64) -> MetricValue {
        let drop = self.intercept + self.slope * gap;
        let acc = (self.source_accuracy.as_accuracy() - drop).clamp(0.0, 1.0);
        MetricValue::accuracy(acc).expect("clamped")
    }
}

pub(crate) fn mean_max_conf(data: &PredictionSet) -> f64 {
    let total: f64 = data.vectors().iter().map(|v| v.max()).sum();
    total / data.len() as f64
}

/// Mean max-confidence of `source` minus that of `target`.
pub fn doc_gap(source: &PredictionSet, target: &PredictionSet) -> Result<f64> {
    source.ensure_same_dim(target)?;
    Ok(mean_max_conf(source) - mean_max_conf(target))
}

/// Ordinary least squares `y = intercept + slope * x`. Returns
/// `(intercept, slope)`.
pub fn fit_line(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InsufficientCalibration { got: points.len() });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if points.iter().all(|p| p.0 == points[0].0) || sxx == 0.0 {
        return Err(Error::DegenerateDesign);
    }
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

/// Fits the regression variant: for every labeled calibration split, the
/// gap to `source` is regressed against the accuracy drop from `source`.
pub fn fit_doc_regression(
    source: &PredictionSet,
    calibration: &[PredictionSet],
) -> Result<DocModel> {
    if calibration.len() < 2 {
        return Err(Error::InsufficientCalibration {
            got: calibration.len(),
        });
    }
    let source_accuracy = true_accuracy(source)?;
    let source_mean_conf = mean_max_conf(source);
    let points = calibration
        .iter()
        .map(|c| {
            source.ensure_same_dim(c)?;
            let gap = source_mean_conf - mean_max_conf(c);
            let drop = source_accuracy.as_accuracy() - true_accuracy(c)?.as_accuracy();
            Ok((gap, drop))
        })
        .collect::<Result<Vec<_>>>()?;
    let (intercept, slope) = fit_line(&points)?;
    Ok(DocModel {
        mode: DocMode::Regression,
        intercept,
        slope,
        source_mean_conf,
        source_accuracy,
    })
}

/// Estimated target accuracy. `calibration` is only read in regression mode.
pub fn doc_estimate(
    source: &PredictionSet,
    target: &PredictionSet,
    mode: DocMode,
    calibration: &[PredictionSet],
) -> Result<MetricValue> {
    source.ensure_same_dim(target)?;
    let model = match mode {
        DocMode::Naive => DocModel::naive(source)?,
        DocMode::Regression => fit_doc_regression(source, calibration)?,
    };
    Ok(model.estimate(target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::ProbabilityVector;
    use approx::assert_abs_diff_eq;

    fn set(rows: &[&[f64]], labels: Option<Vec<usize>>) -> PredictionSet {
        let vs = rows
            .iter()
            .map(|r| ProbabilityVector::new(r.to_vec()).unwrap())
            .collect();
        PredictionSet::new(vs, labels).unwrap()
    }

    #[test]
    fn gap_examples() {
        let a = set(&[&[0.9, 0.1], &[0.3, 0.7]], None);
        assert_eq!(doc_gap(&a, &a).unwrap(), 0.0);
        let s = set(&[&[0.9, 0.1]], None);
        let t = set(&[&[0.8, 0.2]], None);
        assert_abs_diff_eq!(doc_gap(&s, &t).unwrap(), 0.1, epsilon = 1e-15);
        let s = set(&[&[0.5, 0.5]], None);
        let t = set(&[&[1.0, 0.0]], None);
        assert_eq!(doc_gap(&s, &t).unwrap(), -0.5);
        let t3 = set(&[&[0.5, 0.3, 0.2]], None);
        assert!(matches!(doc_gap(&s, &t3), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn naive_estimates() {
        let s = set(&[&[0.9, 0.1], &[0.6, 0.4]], Some(vec![0, 1]));
        let est = doc_estimate(&s, &s, DocMode::Naive, &[]).unwrap();
        assert_eq!(est.value(), 0.5);

        let m = DocModel {
            mode: DocMode::Naive,
            intercept: 0.0,
            slope: 1.0,
            source_mean_conf: 0.9,
            source_accuracy: MetricValue::accuracy(0.85).unwrap(),
        };
        assert_abs_diff_eq!(m.estimate_from_gap(0.1).value(), 0.75, epsilon = 1e-15);
        let m = DocModel {
            source_accuracy: MetricValue::accuracy(0.05).unwrap(),
            ..m
        };
        assert_eq!(m.estimate_from_gap(0.2).value(), 0.0);
        assert_eq!(m.estimate_from_gap(-2.0).value(), 1.0);
    }

    #[test]
    fn missing_labels() {
        let s = set(&[&[0.9, 0.1]], None);
        assert!(matches!(
            doc_estimate(&s, &s, DocMode::Naive, &[]),
            Err(Error::MissingLabels)
        ));
    }

    #[test]
    fn line_fits() {
        let (b, m) = fit_line(&[(0.0, 0.0), (0.1, 0.1)]).unwrap();
        assert_abs_diff_eq!(m, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-12);

        let pts = [(0.0, 0.02), (0.1, 0.07), (0.3, 0.17)];
        let (b, m) = fit_line(&pts).unwrap();
        for (x, y) in pts {
            assert_abs_diff_eq!(b + m * x, y, epsilon = 1e-12);
        }

        assert!(matches!(
            fit_line(&[(0.1, 0.0), (0.1, 0.3)]),
            Err(Error::DegenerateDesign)
        ));
        assert!(matches!(
            fit_line(&[(0.1, 0.0)]),
            Err(Error::InsufficientCalibration { got: 1 })
        ));
    }

    #[test]
    fn regression_needs_two_sets() {
        let s = set(&[&[0.9, 0.1], &[0.6, 0.4]], Some(vec![0, 1]));
        assert!(matches!(
            doc_estimate(&s, &s, DocMode::Regression, std::slice::from_ref(&s)),
            Err(Error::InsufficientCalibration { got: 1 })
        ));
        assert!(matches!(
            doc_estimate(&s, &s, DocMode::Regression, &[s.clone(), s.clone()]),
            Err(Error::DegenerateDesign)
        ));
    }

    #[test]
    fn regression_recovers_planted_line() {
        // source: acc 1, mean conf 0.9
        let s = set(&[&[0.9, 0.1], &[0.1, 0.9]], Some(vec![0, 1]));
        // cal a: gap 0.1, acc 0.5 -> drop 0.5; cal b: gap 0.3, acc 0 -> drop 1
        let a = set(&[&[0.8, 0.2], &[0.2, 0.8]], Some(vec![0, 0]));
        let b = set(&[&[0.6, 0.4], &[0.4, 0.6]], Some(vec![1, 0]));
        let m = fit_doc_regression(&s, &[a, b]).unwrap();
        assert_abs_diff_eq!(m.slope, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.intercept, 0.25, epsilon = 1e-12);
        assert_eq!(m.mode, DocMode::Regression);
    }
}
