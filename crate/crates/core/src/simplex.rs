//! Probability vectors, prediction sets and metric values.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sum-to-one tolerance applied when ingesting raw vectors.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Sum of `xs` taken in ascending order, so the result does not depend on
/// the order the values arrive in.
pub(crate) fn canonical_sum(xs: &mut [f64]) -> f64 {
    xs.sort_unstable_by(f64::total_cmp);
    xs.iter().sum()
}

/// A point of the probability simplex: `k >= 2` non-negative components
/// summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Validates with [`DEFAULT_TOLERANCE`].
    pub fn new(components: Vec<f64>) -> Result<Self> {
        validate_vector(components, DEFAULT_TOLERANCE)
    }

    /// The centroid `(1/k, ..., 1/k)`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Dimension { len: k });
        }
        Ok(Self(vec![1.0 / k as f64; k]))
    }

    /// The vertex with all mass on class `i`.
    pub fn vertex(k: usize, i: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Dimension { len: k });
        }
        if i >= k {
            return Err(Error::LabelOutOfRange { label: i, k });
        }
        let mut c = vec![0.0; k];
        c[i] = 1.0;
        Ok(Self(c))
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the largest component; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Power scaling `p_i^(1/T)` followed by renormalization. `T == 1`
    /// returns the vector unchanged.
    pub fn tempered(&self, temperature: f64) -> Self {
        if temperature == 1.0 {
            return self.clone();
        }
        let inv = 1.0 / temperature;
        let mut raw: Vec<f64> = self.0.iter().map(|p| p.powf(inv)).collect();
        let total = canonical_sum(&mut raw.clone());
        raw.iter_mut().for_each(|x| *x /= total);
        Self(raw)
    }
}

impl AsRef<[f64]> for ProbabilityVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Checks that `raw` lies on the simplex within `tolerance` and renormalizes
/// it. Components in `[-tolerance, 0)` are clamped to zero first.
pub fn validate_vector(raw: Vec<f64>, tolerance: f64) -> Result<ProbabilityVector> {
    if raw.len() < 2 {
        return Err(Error::Dimension { len: raw.len() });
    }
    let mut c = raw;
    for (i, x) in c.iter_mut().enumerate() {
        if !x.is_finite() {
            return Err(Error::NotOnSimplex {
                row: None,
                detail: format!("component {i} is not finite ({x})"),
            });
        }
        if *x < -tolerance {
            return Err(Error::NotOnSimplex {
                row: None,
                detail: format!("component {i} is negative ({x})"),
            });
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total = canonical_sum(&mut c.clone());
    if (total - 1.0).abs() > tolerance {
        return Err(Error::NotOnSimplex {
            row: None,
            detail: format!("components sum to {total}"),
        });
    }
    c.iter_mut().for_each(|x| *x /= total);
    Ok(ProbabilityVector(c))
}

/// Classifier outputs for one data split, optionally with true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    vectors: Vec<ProbabilityVector>,
    labels: Option<Vec<usize>>,
    predicted: Vec<usize>,
}

impl PredictionSet {
    pub fn new(vectors: Vec<ProbabilityVector>, labels: Option<Vec<usize>>) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptyInput)?;
        let k = first.dim();
        for v in &vectors {
            if v.dim() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: v.dim(),
                });
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != vectors.len() {
                return Err(Error::InvalidConfig(format!(
                    "{} labels for {} vectors",
                    labels.len(),
                    vectors.len()
                )));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
                return Err(Error::LabelOutOfRange { label: bad, k });
            }
        }
        let predicted = vectors.iter().map(ProbabilityVector::argmax).collect();
        Ok(Self {
            vectors,
            labels,
            predicted,
        })
    }

    pub fn labeled(vectors: Vec<ProbabilityVector>, labels: Vec<usize>) -> Result<Self> {
        Self::new(vectors, Some(labels))
    }

    pub fn unlabeled(vectors: Vec<ProbabilityVector>) -> Result<Self> {
        Self::new(vectors, None)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    /// Always false: construction rejects empty sets.
    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of classes.
    pub fn k(&self) -> usize {
        self.vectors[0].dim()
    }

    pub fn vectors(&self) -> &[ProbabilityVector] {
        &self.vectors
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn predicted_labels(&self) -> &[usize] {
        &self.predicted
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    /// Drops the labels, e.g. to model an unlabeled target split.
    pub fn without_labels(&self) -> Self {
        Self {
            vectors: self.vectors.clone(),
            labels: None,
            predicted: self.predicted.clone(),
        }
    }

    /// Per-example correctness of the argmax prediction.
    pub fn correctness(&self) -> Result<Vec<bool>> {
        let labels = self.labels.as_ref().ok_or(Error::MissingLabels)?;
        Ok(labels
            .iter()
            .zip(&self.predicted)
            .map(|(l, p)| l == p)
            .collect())
    }

    pub fn correct_count(&self) -> Result<usize> {
        Ok(self.correctness()?.into_iter().filter(|&c| c).count())
    }

    /// Subset (with repetition) by index; labels travel with their vectors.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self {
            vectors: indices.iter().map(|&i| self.vectors[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            predicted: indices.iter().map(|&i| self.predicted[i]).collect(),
        })
    }

    /// Errors with [`Error::DimensionMismatch`] unless both sets share `k`.
    pub fn ensure_same_dim(&self, other: &PredictionSet) -> Result<()> {
        if self.k() != other.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                found: other.k(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Accuracy,
    Error,
}

impl FromStr for Convention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "accuracy" | "acc" => Ok(Convention::Accuracy),
            "error" | "err" => Ok(Convention::Error),
            other => Err(format!("unknown convention '{other}' (accuracy|error)")),
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::Accuracy => "accuracy",
            Convention::Error => "error",
        })
    }
}

/// A metric in `[0, 1]` tagged with its convention. Accuracy and error are
/// complements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    value: f64,
    convention: Convention,
}

impl MetricValue {
    pub fn new(value: f64, convention: Convention) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::MetricRange(value));
        }
        Ok(Self { value, convention })
    }

    pub fn accuracy(value: f64) -> Result<Self> {
        Self::new(value, Convention::Accuracy)
    }

    pub fn error(value: f64) -> Result<Self> {
        Self::new(value, Convention::Error)
    }

    /// Proportion `count / n`; `count <= n` and `n > 0` are the caller's job.
    pub(crate) fn proportion(count: usize, n: usize, convention: Convention) -> Self {
        debug_assert!(n > 0 && count <= n);
        Self {
            value: count as f64 / n as f64,
            convention,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn to(self, convention: Convention) -> Self {
        if convention == self.convention {
            self
        } else {
            Self {
                value: 1.0 - self.value,
                convention,
            }
        }
    }

    pub fn as_accuracy(self) -> f64 {
        self.to(Convention::Accuracy).value
    }

    pub fn as_error(self) -> f64 {
        self.to(Convention::Error).value
    }
}

/// Fraction of examples whose argmax equals the label.
pub fn true_accuracy(data: &PredictionSet) -> Result<MetricValue> {
    let correct = data.correct_count()?;
    Ok(MetricValue::proportion(
        correct,
        data.len(),
        Convention::Accuracy,
    ))
}

/// Fraction of misclassified examples, counted directly rather than as
/// `1 - accuracy`.
pub fn true_error(data: &PredictionSet) -> Result<MetricValue> {
    let correct = data.correct_count()?;
    Ok(MetricValue::proportion(
        data.len() - correct,
        data.len(),
        Convention::Error,
    ))
}
