//! Synthetic classifier outputs with known ground truth.
//!
//! Each example draws a true label, decides whether the classifier is right
//! on it, and then draws a Dirichlet vector whose argmax is forced onto the
//! designated class by rejection. A temperature shift rescales confidence
//! without touching any prediction.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::seed;
use crate::simplex::{PredictionSet, ProbabilityVector};

const MAX_REJECTIONS: usize = 1000;
const FALLBACK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub temperature: f64,
    #[serde(default)]
    pub label_prior: Option<Vec<f64>>,
}

impl Shift {
    pub fn temperature(t: f64) -> Self {
        Self {
            temperature: t,
            label_prior: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub k: usize,
    pub n: usize,
    /// Probability that an example's argmax is its true label.
    pub target_accuracy: f64,
    /// Dirichlet parameter of the winning class; every other class gets 1.
    pub concentration: f64,
    #[serde(default)]
    pub shift: Option<Shift>,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(k: usize, n: usize, target_accuracy: f64, seed: u64) -> Self {
        Self {
            k,
            n,
            target_accuracy,
            concentration: 5.0,
            shift: None,
            seed,
        }
    }

    pub fn with_concentration(mut self, c: f64) -> Self {
        self.concentration = c;
        self
    }

    pub fn with_shift(mut self, shift: Shift) -> Self {
        self.shift = Some(shift);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.k < 2 {
            return bad(format!("k must be >= 2, got {}", self.k));
        }
        if self.n == 0 {
            return bad("n must be >= 1".into());
        }
        if !(self.target_accuracy > 0.0 && self.target_accuracy <= 1.0) {
            return bad(format!(
                "target accuracy must be in (0, 1], got {}",
                self.target_accuracy
            ));
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return bad(format!(
                "concentration must be positive, got {}",
                self.concentration
            ));
        }
        if let Some(shift) = &self.shift {
            if !(shift.temperature > 0.0 && shift.temperature.is_finite()) {
                return bad(format!(
                    "temperature must be positive, got {}",
                    shift.temperature
                ));
            }
            if let Some(prior) = &shift.label_prior {
                if prior.len() != self.k {
                    return bad(format!(
                        "label prior has {} entries for {} classes",
                        prior.len(),
                        self.k
                    ));
                }
                if prior.iter().any(|&w| !(w >= 0.0 && w.is_finite()))
                    || prior.iter().sum::<f64>() <= 0.0
                {
                    return bad("label prior must be non-negative with positive mass".into());
                }
            }
        }
        Ok(())
    }
}

fn draw_vector<R: Rng>(rng: &mut R, k: usize, designated: usize, winner: &Gamma<f64>) -> Vec<f64> {
    let mut last = Vec::new();
    for _ in 0..MAX_REJECTIONS {
        let mut g: Vec<f64> = (0..k)
            .map(|i| {
                if i == designated {
                    winner.sample(rng)
                } else {
                    Exp1.sample(rng)
                }
            })
            .collect();
        let total: f64 = g.iter().sum();
        g.iter_mut().for_each(|x| *x /= total);
        let top = g[designated];
        if g.iter().enumerate().all(|(i, &x)| i == designated || x < top) {
            return g;
        }
        last = g;
    }
    // Out of retries: put 1/2 + margin on the designated class and spread
    // the rest in proportion to the last draw.
    let rest: f64 = last
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != designated)
        .map(|(_, &x)| x)
        .sum();
    let share = 0.5 - FALLBACK_MARGIN;
    last.iter()
        .enumerate()
        .map(|(i, &x)| {
            if i == designated {
                0.5 + FALLBACK_MARGIN
            } else if rest > 0.0 {
                share * x / rest
            } else {
                share / (k - 1) as f64
            }
        })
        .collect()
}

/// Draws a labeled prediction set according to `spec`.
pub fn generate(spec: &GeneratorSpec) -> Result<PredictionSet> {
    generate_with(spec, Execution::default())
}

pub fn generate_with(spec: &GeneratorSpec, exec: Execution) -> Result<PredictionSet> {
    spec.validate()?;
    let k = spec.k;
    let winner = Gamma::new(spec.concentration, 1.0)
        .map_err(|e| Error::InvalidConfig(format!("concentration: {e}")))?;
    let prior = match spec.shift.as_ref().and_then(|s| s.label_prior.as_ref()) {
        Some(p) => Some(
            WeightedIndex::new(p).map_err(|e| Error::InvalidConfig(format!("label prior: {e}")))?,
        ),
        None => None,
    };
    let temperature = spec.shift.as_ref().map_or(1.0, |s| s.temperature);

    let rows = exec.try_map_range(spec.n, |i| {
        let mut rng = seed::rng_for(&[spec.seed, i as u64]);
        let label = match &prior {
            Some(w) => w.sample(&mut rng),
            None => rng.random_range(0..k),
        };
        let correct = rng.random_bool(spec.target_accuracy);
        let designated = if correct {
            label
        } else {
            let r = rng.random_range(0..k - 1);
            if r >= label {
                r + 1
            } else {
                r
            }
        };
        let raw = draw_vector(&mut rng, k, designated, &winner);
        let v = ProbabilityVector::new(raw)?.tempered(temperature);
        Ok::<_, Error>((v, label))
    })?;
    let (vectors, labels) = rows.into_iter().unzip();
    PredictionSet::labeled(vectors, labels)
}

/// Source drawn from `spec` without any shift; target drawn from `spec` with
/// `shift` applied and an independent seed.
pub fn make_shift_pair(spec: &GeneratorSpec, shift: Shift) -> Result<(PredictionSet, PredictionSet)> {
    let mut source_spec = spec.clone();
    source_spec.shift = None;
    let target_spec = spec
        .clone()
        .with_shift(shift)
        .with_seed(seed::derive(&[spec.seed, 0x7461_7267_6574]));
    Ok((generate(&source_spec)?, generate(&target_spec)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::true_accuracy;

    #[test]
    fn perfect_accuracy() {
        for k in [2, 5, 30] {
            let s = generate(&GeneratorSpec::new(k, 300, 1.0, 7)).unwrap();
            assert_eq!(true_accuracy(&s).unwrap().value(), 1.0);
        }
    }

    #[test]
    fn binomial_accuracy_band() {
        // 3 sigma of Binomial(10^4, 0.8) / 10^4 = 3 * sqrt(0.16 / 10^4) = 0.012
        let s = generate(&GeneratorSpec::new(2, 10_000, 0.8, 11)).unwrap();
        let acc = true_accuracy(&s).unwrap().value();
        assert!((acc - 0.8).abs() <= 0.012, "acc {acc}");
    }

    #[test]
    fn deterministic_and_execution_independent() {
        let spec = GeneratorSpec::new(4, 500, 0.7, 3).with_shift(Shift::temperature(1.7));
        let a = generate_with(&spec, Execution::Sequential).unwrap();
        let b = generate_with(&spec, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, generate(&spec).unwrap());
    }

    #[test]
    fn unit_temperature_is_identity() {
        let spec = GeneratorSpec::new(3, 200, 0.9, 5);
        let plain = generate(&spec).unwrap();
        let shifted = generate(&spec.clone().with_shift(Shift::temperature(1.0))).unwrap();
        assert_eq!(plain, shifted);
    }

    #[test]
    fn temperature_keeps_predictions() {
        let spec = GeneratorSpec::new(5, 400, 0.6, 9);
        let plain = generate(&spec).unwrap();
        let hot = generate(&spec.clone().with_shift(Shift::temperature(2.5))).unwrap();
        assert_eq!(plain.predicted_labels(), hot.predicted_labels());
        assert_eq!(plain.labels(), hot.labels());
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(generate(&GeneratorSpec::new(1, 10, 0.5, 0)).is_err());
        assert!(generate(&GeneratorSpec::new(3, 0, 0.5, 0)).is_err());
        assert!(generate(&GeneratorSpec::new(3, 10, 0.0, 0)).is_err());
        assert!(generate(&GeneratorSpec::new(3, 10, 1.2, 0)).is_err());
        assert!(generate(&GeneratorSpec::new(3, 10, 0.5, 0).with_concentration(-1.0)).is_err());
        assert!(generate(&GeneratorSpec::new(3, 10, 0.5, 0).with_shift(Shift::temperature(0.0))).is_err());
        let bad_prior = Shift {
            temperature: 1.0,
            label_prior: Some(vec![1.0, 1.0]),
        };
        assert!(generate(&GeneratorSpec::new(3, 10, 0.5, 0).with_shift(bad_prior)).is_err());
    }

    #[test]
    fn fallback_keeps_designated_on_top() {
        // Concentration far below 1 makes rejection nearly always fail at k = 60.
        let spec = GeneratorSpec::new(60, 50, 1.0, 1).with_concentration(1e-3);
        let s = generate(&spec).unwrap();
        assert_eq!(true_accuracy(&s).unwrap().value(), 1.0);
    }
}
