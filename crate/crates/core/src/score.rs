//! Score functions mapping the probability simplex to the reals.
//!
//! Each function is minimized at the uniform vector and maximized at the
//! vertices. The L2 variants are evaluated in squared form and JS is the
//! divergence rather than its square root; both are strictly increasing
//! transforms of the textbook quantities, so every ATC estimate is the same
//! either way. Sums are taken in ascending term order, which makes every
//! score exactly invariant under permutation of the components.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::simplex::{canonical_sum, PredictionSet, ProbabilityVector};

/// Anything that maps a probability vector to a real confidence score.
pub trait ScoreFunction: Send + Sync {
    fn score(&self, v: &ProbabilityVector) -> f64;

    /// Short human-readable name.
    fn label(&self) -> String;
}

impl<S: ScoreFunction + ?Sized> ScoreFunction for &S {
    fn score(&self, v: &ProbabilityVector) -> f64 {
        (**self).score(v)
    }

    fn label(&self) -> String {
        (**self).label()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScoreFunctionId {
    #[serde(rename = "max")]
    MaxConf,
    #[serde(rename = "negent")]
    NegEntropy,
    #[serde(rename = "l2n")]
    L2Norm,
    #[serde(rename = "l1u")]
    L1ToUniform,
    #[serde(rename = "l2u")]
    L2ToUniform,
    #[serde(rename = "js")]
    JsToUniform,
}

impl ScoreFunctionId {
    pub const ALL: [ScoreFunctionId; 6] = [
        ScoreFunctionId::MaxConf,
        ScoreFunctionId::NegEntropy,
        ScoreFunctionId::L2Norm,
        ScoreFunctionId::L1ToUniform,
        ScoreFunctionId::L2ToUniform,
        ScoreFunctionId::JsToUniform,
    ];

    /// Canonical id used in CLI flags and report files.
    pub fn name(self) -> &'static str {
        match self {
            ScoreFunctionId::MaxConf => "max",
            ScoreFunctionId::NegEntropy => "negent",
            ScoreFunctionId::L2Norm => "l2n",
            ScoreFunctionId::L1ToUniform => "l1u",
            ScoreFunctionId::L2ToUniform => "l2u",
            ScoreFunctionId::JsToUniform => "js",
        }
    }

    /// Column heading in human-readable tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ScoreFunctionId::MaxConf => "ATC-Max",
            ScoreFunctionId::NegEntropy => "ATC-NE",
            ScoreFunctionId::L2Norm => "ATC-L2n",
            ScoreFunctionId::L1ToUniform => "ATC-L1",
            ScoreFunctionId::L2ToUniform => "ATC-L2",
            ScoreFunctionId::JsToUniform => "ATC-JS",
        }
    }
}

impl fmt::Display for ScoreFunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreFunctionId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScoreFunctionId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| format!("unknown score function '{s}' (max|negent|l2n|l1u|l2u|js)"))
    }
}

impl ScoreFunction for ScoreFunctionId {
    fn score(&self, v: &ProbabilityVector) -> f64 {
        score(v, *self)
    }

    fn label(&self) -> String {
        self.name().to_string()
    }
}

fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn sum_terms(v: &ProbabilityVector, term: impl Fn(f64) -> f64) -> f64 {
    let mut terms: Vec<f64> = v.components().iter().map(|&p| term(p)).collect();
    canonical_sum(&mut terms)
}

/// Evaluates one of the six registered score functions.
pub fn score(v: &ProbabilityVector, id: ScoreFunctionId) -> f64 {
    let u = 1.0 / v.dim() as f64;
    match id {
        ScoreFunctionId::MaxConf => v.max(),
        ScoreFunctionId::NegEntropy => sum_terms(v, xlnx),
        ScoreFunctionId::L2Norm => sum_terms(v, |p| p * p),
        ScoreFunctionId::L1ToUniform => sum_terms(v, |p| (p - u).abs()),
        ScoreFunctionId::L2ToUniform => sum_terms(v, |p| (p - u) * (p - u)),
        // 0.5 KL(p || m) + 0.5 KL(u || m), m = (p + u) / 2, per component.
        ScoreFunctionId::JsToUniform => sum_terms(v, |p| {
            let m = 0.5 * (p + u);
            let from_p = if p == 0.0 { 0.0 } else { p * (p / m).ln() };
            0.5 * (from_p + u * (u / m).ln())
        }),
    }
}

/// Scores every vector of `data`, preserving order.
pub fn score_batch<S: ScoreFunction + ?Sized>(data: &PredictionSet, f: &S) -> Vec<f64> {
    data.vectors().iter().map(|v| f.score(v)).collect()
}

/// Strictly increasing maps, restricted to a catalog that needs no runtime
/// monotonicity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Monotone {
    /// `a * x + b` with `a > 0`.
    Affine { a: f64, b: f64 },
    /// `x^n` for odd `n`.
    OddPower(u32),
}

impl Monotone {
    pub const IDENTITY: Monotone = Monotone::Affine { a: 1.0, b: 0.0 };

    pub fn affine(a: f64, b: f64) -> Option<Self> {
        (a > 0.0 && a.is_finite() && b.is_finite()).then_some(Monotone::Affine { a, b })
    }

    pub fn odd_power(n: u32) -> Option<Self> {
        (n % 2 == 1).then_some(Monotone::OddPower(n))
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Monotone::Affine { a, b } => a * x + b,
            Monotone::OddPower(n) => x.powi(n as i32),
        }
    }
}

impl fmt::Display for Monotone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Monotone::Affine { a, b } => write!(f, "{a}x+{b}"),
            Monotone::OddPower(n) => write!(f, "x^{n}"),
        }
    }
}

/// A base score function composed with a strictly increasing transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneTransform {
    pub base: ScoreFunctionId,
    pub transform: Monotone,
}

impl MonotoneTransform {
    pub fn new(base: ScoreFunctionId, transform: Monotone) -> Self {
        Self { base, transform }
    }
}

impl ScoreFunction for MonotoneTransform {
    fn score(&self, v: &ProbabilityVector) -> f64 {
        apply_transform(v, self)
    }

    fn label(&self) -> String {
        format!("{}({})", self.transform, self.base)
    }
}

pub fn apply_transform(v: &ProbabilityVector, t: &MonotoneTransform) -> f64 {
    t.transform.apply(score(v, t.base))
}

/// Squared Euclidean distance to a fixed reference vector. Only
/// order-isomorphic to the L2 norm when the reference is uniform; kept for
/// exhibiting that failure.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredDistanceTo(pub ProbabilityVector);

impl ScoreFunction for SquaredDistanceTo {
    fn score(&self, v: &ProbabilityVector) -> f64 {
        let mut terms: Vec<f64> = v
            .components()
            .iter()
            .zip(self.0.components())
            .map(|(p, r)| (p - r) * (p - r))
            .collect();
        canonical_sum(&mut terms)
    }

    fn label(&self) -> String {
        format!("l2-to{:?}", self.0.components())
    }
}
