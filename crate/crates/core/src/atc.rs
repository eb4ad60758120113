//! Average thresholded confidence.
//!
//! A threshold `t` is learned on labeled source data so that the fraction of
//! source scores strictly below `t` matches the source error; the fraction
//! of target scores strictly below the same `t` is the target error
//! estimate. Only the ordering of scores matters, so order-isomorphic score
//! functions produce identical estimates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::score::{score_batch, ScoreFunction};
use crate::simplex::{true_error, Convention, MetricValue, PredictionSet};

/// A learned threshold. `AboveAll` is the sentinel candidate that sits above
/// every finite score, so a source error of 1 stays reachable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Score(f64),
    AboveAll,
}

impl Threshold {
    /// True iff `score < self`.
    pub fn is_below(self, score: f64) -> bool {
        match self {
            Threshold::Score(t) => score < t,
            Threshold::AboveAll => true,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Threshold::Score(t) => t,
            Threshold::AboveAll => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdModel {
    pub threshold: Threshold,
    /// Source metric, always stored in the error convention.
    pub source_metric: MetricValue,
    pub achieved_source_proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtcEstimate {
    pub score_fn: String,
    pub model: ThresholdModel,
    /// Estimated target error.
    pub target_value: MetricValue,
    pub n_source: usize,
    pub n_target: usize,
}

impl AtcEstimate {
    pub fn in_convention(&self, convention: Convention) -> f64 {
        self.target_value.to(convention).value()
    }
}

/// Picks the candidate threshold whose below-threshold source proportion is
/// closest to `gamma_s` (error convention). Candidates are the distinct
/// observed scores plus [`Threshold::AboveAll`]; ties go to the smallest.
///
/// Sorts once and sweeps, so `O(n log n)`.
pub fn learn_threshold(source_scores: &[f64], gamma_s: MetricValue) -> Result<ThresholdModel> {
    if source_scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let gamma = gamma_s.as_error();
    let n = source_scores.len();
    let mut sorted = source_scores.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);

    let gap = |below: usize| (gamma - below as f64 / n as f64).abs();

    // `i` is the index of the first occurrence of each distinct value, which
    // equals the number of scores strictly below it.
    let mut best = (Threshold::Score(sorted[0]), 0usize, gap(0));
    for i in 1..n {
        if sorted[i] == sorted[i - 1] {
            continue;
        }
        let d = gap(i);
        if d < best.2 {
            best = (Threshold::Score(sorted[i]), i, d);
        }
    }
    if gap(n) < best.2 {
        best = (Threshold::AboveAll, n, gap(n));
    }

    Ok(ThresholdModel {
        threshold: best.0,
        source_metric: gamma_s.to(Convention::Error),
        achieved_source_proportion: best.1 as f64 / n as f64,
    })
}

/// Fraction of target scores strictly below the learned threshold, as an
/// error-convention metric.
pub fn estimate_target(model: &ThresholdModel, target_scores: &[f64]) -> Result<MetricValue> {
    if target_scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let below = target_scores
        .iter()
        .filter(|&&s| model.threshold.is_below(s))
        .count();
    Ok(MetricValue::proportion(
        below,
        target_scores.len(),
        Convention::Error,
    ))
}

/// End-to-end estimate: source error from labels, threshold from source
/// scores, estimate from target scores.
pub fn atc_estimate<S: ScoreFunction + ?Sized>(
    source: &PredictionSet,
    target: &PredictionSet,
    score_fn: &S,
) -> Result<AtcEstimate> {
    source.ensure_same_dim(target)?;
    let gamma_s = true_error(source)?;
    let source_scores = score_batch(source, score_fn);
    let target_scores = score_batch(target, score_fn);
    let model = learn_threshold(&source_scores, gamma_s)?;
    let target_value = estimate_target(&model, &target_scores)?;
    Ok(AtcEstimate {
        score_fn: score_fn.label(),
        model,
        target_value,
        n_source: source.len(),
        n_target: target.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::ScoreFunctionId;
    use crate::simplex::ProbabilityVector;

    fn err(x: f64) -> MetricValue {
        MetricValue::error(x).unwrap()
    }

    /// Direct O(n^2) scan over every candidate.
    fn naive(scores: &[f64], gamma: f64) -> (Threshold, f64) {
        let n = scores.len() as f64;
        let mut cands: Vec<Threshold> = scores.iter().map(|&s| Threshold::Score(s)).collect();
        cands.push(Threshold::AboveAll);
        let mut best: Option<(Threshold, f64, f64)> = None;
        for c in cands {
            let below = scores.iter().filter(|&&s| c.is_below(s)).count() as f64;
            let d = (gamma - below / n).abs();
            let better = match best {
                None => true,
                Some((bt, _, bd)) => d < bd || (d == bd && c.value() < bt.value()),
            };
            if better {
                best = Some((c, below / n, d));
            }
        }
        let (t, p, _) = best.unwrap();
        (t, p)
    }

    #[test]
    fn learn_examples() {
        let m = learn_threshold(&[0.2, 0.4, 0.6, 0.8], err(0.5)).unwrap();
        assert_eq!(m.threshold, Threshold::Score(0.6));
        assert_eq!(m.achieved_source_proportion, 0.5);
        assert_eq!(naive(&[0.2, 0.4, 0.6, 0.8], 0.5), (Threshold::Score(0.6), 0.5));

        let m = learn_threshold(&[0.3, 0.7], err(0.0)).unwrap();
        assert_eq!(m.threshold, Threshold::Score(0.3));
        assert_eq!(m.achieved_source_proportion, 0.0);

        let m = learn_threshold(&[0.5, 0.5, 0.9], err(1.0)).unwrap();
        assert_eq!(m.threshold, Threshold::AboveAll);
        assert_eq!(m.achieved_source_proportion, 1.0);
        assert_eq!(naive(&[0.5, 0.5, 0.9], 1.0), (Threshold::AboveAll, 1.0));
    }

    #[test]
    fn learn_accepts_accuracy_convention() {
        let m = learn_threshold(&[0.2, 0.4, 0.6, 0.8], MetricValue::accuracy(0.75).unwrap())
            .unwrap();
        assert_eq!(m.threshold, Threshold::Score(0.4));
        assert_eq!(m.source_metric.convention(), Convention::Error);
    }

    #[test]
    fn tie_goes_to_smaller_threshold() {
        // 0.25 sits exactly between proportions 0 and 0.5.
        let m = learn_threshold(&[0.1, 0.9], err(0.25)).unwrap();
        assert_eq!(m.threshold, Threshold::Score(0.1));
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(learn_threshold(&[], err(0.1)), Err(Error::EmptyInput)));
        let m = learn_threshold(&[0.5], err(0.0)).unwrap();
        assert!(matches!(estimate_target(&m, &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn estimate_examples() {
        let model = |t| ThresholdModel {
            threshold: t,
            source_metric: err(0.0),
            achieved_source_proportion: 0.0,
        };
        let e = estimate_target(&model(Threshold::Score(0.6)), &[0.1, 0.7]).unwrap();
        assert_eq!(e.value(), 0.5);
        let e = estimate_target(&model(Threshold::AboveAll), &[0.1, 0.7, 1e300]).unwrap();
        assert_eq!(e.value(), 1.0);
        let e = estimate_target(&model(Threshold::Score(0.3)), &[0.4, 0.9]).unwrap();
        assert_eq!(e.value(), 0.0);
        // strict inequality: a target score equal to t is not below it
        let e = estimate_target(&model(Threshold::Score(0.4)), &[0.4, 0.9]).unwrap();
        assert_eq!(e.value(), 0.0);
    }

    #[test]
    fn atc_requires_labels_and_matching_dim() {
        let v2 = ProbabilityVector::new(vec![0.7, 0.3]).unwrap();
        let v3 = ProbabilityVector::new(vec![0.7, 0.2, 0.1]).unwrap();
        let unl = PredictionSet::unlabeled(vec![v2.clone()]).unwrap();
        assert!(matches!(
            atc_estimate(&unl, &unl, &ScoreFunctionId::MaxConf),
            Err(Error::MissingLabels)
        ));
        let src = PredictionSet::labeled(vec![v2], vec![0]).unwrap();
        let tgt = PredictionSet::unlabeled(vec![v3]).unwrap();
        assert!(matches!(
            atc_estimate(&src, &tgt, &ScoreFunctionId::MaxConf),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn atc_self_consistency_small() {
        let vs: Vec<_> = [0.55, 0.6, 0.7, 0.8, 0.95]
            .iter()
            .map(|&a| ProbabilityVector::new(vec![a, 1.0 - a]).unwrap())
            .collect();
        let src = PredictionSet::labeled(vs, vec![0, 1, 0, 0, 0]).unwrap();
        let est = atc_estimate(&src, &src, &ScoreFunctionId::MaxConf).unwrap();
        assert_eq!(est.target_value.value(), 0.2);
        assert!((est.in_convention(Convention::Accuracy) - 0.8).abs() < 1e-15);
    }
}
