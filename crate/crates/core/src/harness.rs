//! Bootstrap benchmark of accuracy estimators.
//!
//! For every dimension and bootstrap run the labeled validation split is
//! resampled with replacement, each method estimates accuracy on the test
//! split from that resample, and the absolute error against the true test
//! accuracy is recorded. All methods of one run share the same resample, so
//! per-run comparisons between methods are paired.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::atc::{atc_estimate, learn_threshold};
use crate::doc::{doc_estimate, fit_line, DocMode};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::score::{score_batch, ScoreFunctionId};
use crate::seed;
use crate::simplex::{true_accuracy, MetricValue, PredictionSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Atc(ScoreFunctionId),
    Doc(DocMode),
}

impl Method {
    /// The six ATC variants followed by naive DoC.
    pub fn default_set() -> Vec<Method> {
        let mut m: Vec<Method> = ScoreFunctionId::ALL.into_iter().map(Method::Atc).collect();
        m.push(Method::Doc(DocMode::Naive));
        m
    }

    pub fn all() -> Vec<Method> {
        let mut m = Self::default_set();
        m.push(Method::Doc(DocMode::Regression));
        m
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Atc(id) => id.name(),
            Method::Doc(DocMode::Naive) => "doc",
            Method::Doc(DocMode::Regression) => "doc-reg",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Method::Atc(id) => id.display_name(),
            Method::Doc(DocMode::Naive) => "DoC",
            Method::Doc(DocMode::Regression) => "DoC-reg",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "doc" => Ok(Method::Doc(DocMode::Naive)),
            "doc-reg" => Ok(Method::Doc(DocMode::Regression)),
            other => other
                .parse::<ScoreFunctionId>()
                .map(Method::Atc)
                .map_err(|_| format!("unknown method '{other}' (max|negent|l2n|l1u|l2u|js|doc|doc-reg)")),
        }
    }
}

/// Accuracy estimate of `method` for `target`, using `source` as the labeled
/// split. `calibration` is only read by regression DoC.
pub fn estimate_accuracy(
    method: Method,
    source: &PredictionSet,
    target: &PredictionSet,
    calibration: &[PredictionSet],
) -> Result<MetricValue> {
    match method {
        Method::Atc(id) => Ok(atc_estimate(source, target, &id)?.target_value.to(crate::Convention::Accuracy)),
        Method::Doc(mode) => doc_estimate(source, target, mode, calibration),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    pub n_boot: usize,
    pub ci_level: f64,
    pub master_seed: u64,
    pub execution: Execution,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            methods: Method::default_set(),
            n_boot: 1000,
            ci_level: 0.95,
            master_seed: 0,
            execution: Execution::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_boot == 0 {
            return Err(Error::InvalidConfig("n_boot must be >= 1".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "ci level must be in (0, 1), got {}",
                self.ci_level
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        Ok(())
    }

    fn canonical_methods(&self) -> Vec<Method> {
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        m
    }
}

/// Inputs for one class count: a labeled validation split, a labeled test
/// split and, for regression DoC, labeled calibration splits.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionData {
    pub validation: PredictionSet,
    pub test: PredictionSet,
    pub calibration: Vec<PredictionSet>,
}

impl DimensionData {
    pub fn new(validation: PredictionSet, test: PredictionSet) -> Self {
        Self {
            validation,
            test,
            calibration: Vec::new(),
        }
    }

    pub fn with_calibration(mut self, calibration: Vec<PredictionSet>) -> Self {
        self.calibration = calibration;
        self
    }

    pub fn dimension(&self) -> usize {
        self.validation.k()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunRecord {
    pub dimension: usize,
    pub method: Method,
    pub run_index: usize,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateRow {
    pub dimension: usize,
    pub method: Method,
    pub mean_abs_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Seed of bootstrap run `run_index` for class count `dimension`.
pub fn run_seed(master_seed: u64, dimension: usize, run_index: usize) -> u64 {
    seed::derive(&[master_seed, dimension as u64, run_index as u64])
}

/// `n` indices drawn uniformly with replacement from `0..n`.
pub fn bootstrap_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng_for(&[seed]);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Resample of `data` with replacement, same size; labels travel along.
pub fn bootstrap_resample(data: &PredictionSet, seed: u64) -> Result<PredictionSet> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    data.select(&bootstrap_indices(data.len(), seed))
}

/// Per-dimension quantities shared by every run.
struct Prepared {
    dimension: usize,
    n: usize,
    correct: Vec<bool>,
    max_conf: Vec<f64>,
    test_accuracy: f64,
    test_mean_conf: f64,
    /// Validation scores and sorted test scores per ATC method.
    atc: Vec<(usize, Vec<f64>, Vec<f64>)>,
    /// (mean max-conf, accuracy) per calibration split.
    calibration: Vec<(f64, f64)>,
}

fn mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    xs.sum::<f64>() / n as f64
}

impl Prepared {
    fn new(data: &DimensionData, methods: &[Method]) -> Result<Self> {
        data.validation.ensure_same_dim(&data.test)?;
        let correct = data.validation.correctness()?;
        let test_accuracy = true_accuracy(&data.test)?.value();
        let max_conf: Vec<f64> = data.validation.vectors().iter().map(|v| v.max()).collect();
        let test_mean_conf = mean(data.test.vectors().iter().map(|v| v.max()), data.test.len());
        let atc = methods
            .iter()
            .enumerate()
            .filter_map(|(slot, m)| match m {
                Method::Atc(id) => {
                    let mut t = score_batch(&data.test, id);
                    t.sort_unstable_by(f64::total_cmp);
                    Some((slot, score_batch(&data.validation, id), t))
                }
                _ => None,
            })
            .collect();
        let calibration = data
            .calibration
            .iter()
            .map(|c| {
                data.validation.ensure_same_dim(c)?;
                Ok((
                    mean(c.vectors().iter().map(|v| v.max()), c.len()),
                    true_accuracy(c)?.value(),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dimension: data.dimension(),
            n: data.validation.len(),
            correct,
            max_conf,
            test_accuracy,
            test_mean_conf,
            atc,
            calibration,
        })
    }

    /// Estimated test accuracy of every method (in `methods` order) from
    /// the resample `idx`. Matches [`estimate_accuracy`] on the resampled set.
    fn estimates(&self, methods: &[Method], idx: &[usize]) -> Result<Vec<f64>> {
        let n = self.n;
        let n_correct = idx.iter().filter(|&&i| self.correct[i]).count();
        let src_acc = n_correct as f64 / n as f64;
        let src_err = MetricValue::error((n - n_correct) as f64 / n as f64)?;
        let src_conf = mean(idx.iter().map(|&i| self.max_conf[i]), n);
        let gap = src_conf - self.test_mean_conf;

        let mut out = vec![0.0; methods.len()];
        for (slot, val_scores, sorted_test) in &self.atc {
            let scores: Vec<f64> = idx.iter().map(|&i| val_scores[i]).collect();
            let model = learn_threshold(&scores, src_err)?;
            let below = sorted_test.partition_point(|&s| model.threshold.is_below(s));
            out[*slot] = 1.0 - below as f64 / sorted_test.len() as f64;
        }
        for (slot, m) in methods.iter().enumerate() {
            if let Method::Doc(mode) = m {
                let (intercept, slope) = match mode {
                    DocMode::Naive => (0.0, 1.0),
                    DocMode::Regression => {
                        if self.calibration.len() < 2 {
                            return Err(Error::InsufficientCalibration {
                                got: self.calibration.len(),
                            });
                        }
                        let pts: Vec<(f64, f64)> = self
                            .calibration
                            .iter()
                            .map(|&(c_conf, c_acc)| (src_conf - c_conf, src_acc - c_acc))
                            .collect();
                        fit_line(&pts)?
                    }
                };
                out[slot] = (src_acc - (intercept + slope * gap)).clamp(0.0, 1.0);
            }
        }
        Ok(out)
    }
}

/// Runs every configured method `n_boot` times on every dimension. Records
/// come back ordered by (dimension, method, run) whatever the execution
/// mode.
pub fn run_benchmark(data: &[DimensionData], config: &BenchmarkConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let methods = config.canonical_methods();
    let mut records = Vec::with_capacity(data.len() * methods.len() * config.n_boot);
    for dim in data {
        let prep = Prepared::new(dim, &methods)?;
        let per_run = config.execution.try_map_range(config.n_boot, |r| {
            let idx = bootstrap_indices(prep.n, run_seed(config.master_seed, prep.dimension, r));
            prep.estimates(&methods, &idx)
        })?;
        for (slot, &method) in methods.iter().enumerate() {
            for (r, est) in per_run.iter().enumerate() {
                records.push(RunRecord {
                    dimension: prep.dimension,
                    method,
                    run_index: r,
                    abs_error: (prep.test_accuracy - est[slot]).abs(),
                });
            }
        }
    }
    Ok(records)
}

/// Recomputes one record from scratch through the public estimator API.
pub fn replay_record(data: &DimensionData, config: &BenchmarkConfig, method: Method, run_index: usize) -> Result<RunRecord> {
    let seed = run_seed(config.master_seed, data.dimension(), run_index);
    let resample = bootstrap_resample(&data.validation, seed)?;
    let est = estimate_accuracy(method, &resample, &data.test, &data.calibration)?;
    let truth = true_accuracy(&data.test)?.value();
    Ok(RunRecord {
        dimension: data.dimension(),
        method,
        run_index,
        abs_error: (truth - est.value()).abs(),
    })
}

/// Linearly interpolated quantile of sorted data (`h = (n - 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Central percentile interval at level `ci`.
pub fn percentile_interval(values: &[f64], ci: f64) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let alpha = (1.0 - ci) / 2.0;
    (quantile_sorted(&sorted, alpha), quantile_sorted(&sorted, 1.0 - alpha))
}

/// Mean and percentile interval of the absolute error per (dimension,
/// method).
pub fn aggregate(records: &[RunRecord], ci_level: f64) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(usize, Method), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry((r.dimension, r.method)).or_default().push(r.abs_error);
    }
    groups
        .into_iter()
        .map(|((dimension, method), errs)| {
            let (ci_low, ci_high) = percentile_interval(&errs, ci_level);
            AggregateRow {
                dimension,
                method,
                mean_abs_error: errs.iter().sum::<f64>() / errs.len() as f64,
                ci_low,
                ci_high,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    /// Win count per method; every method seen in the rows is listed.
    pub wins: BTreeMap<Method, usize>,
    /// Dimensions that took part in the comparison.
    pub dimensions: Vec<usize>,
}

/// Awards a win to every method reaching the lowest mean error of a
/// dimension, after rounding means to multiples of `precision`. Ties give
/// several wins, so counts can sum past the number of dimensions.
pub fn rank_methods(rows: &[AggregateRow], precision: f64, exclude_binary: bool) -> Ranking {
    let mut wins: BTreeMap<Method, usize> = rows.iter().map(|r| (r.method, 0)).collect();
    let mut by_dim: BTreeMap<usize, Vec<&AggregateRow>> = BTreeMap::new();
    for r in rows {
        if exclude_binary && r.dimension == 2 {
            continue;
        }
        by_dim.entry(r.dimension).or_default().push(r);
    }
    let rounded = |x: f64| (x / precision).round();
    for group in by_dim.values() {
        let best = group
            .iter()
            .map(|r| rounded(r.mean_abs_error))
            .fold(f64::INFINITY, f64::min);
        for r in group {
            if rounded(r.mean_abs_error) == best {
                *wins.get_mut(&r.method).unwrap() += 1;
            }
        }
    }
    if by_dim.is_empty() {
        wins.clear();
    }
    Ranking {
        wins,
        dimensions: by_dim.into_keys().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairDifference {
    pub dimension: usize,
    pub a: Method,
    pub b: Method,
    /// Mean of `err_a - err_b` over paired runs.
    pub mean_diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub excludes_zero: bool,
    pub runs: usize,
}

/// Paired difference `a - b` over the runs both methods share.
pub fn pair_difference(records: &[RunRecord], dimension: usize, a: Method, b: Method, ci_level: f64) -> Option<PairDifference> {
    let runs_of = |m: Method| -> BTreeMap<usize, f64> {
        records
            .iter()
            .filter(|r| r.dimension == dimension && r.method == m)
            .map(|r| (r.run_index, r.abs_error))
            .collect()
    };
    let ra = runs_of(a);
    let rb = runs_of(b);
    let diffs: Vec<f64> = ra
        .iter()
        .filter_map(|(run, ea)| rb.get(run).map(|eb| ea - eb))
        .collect();
    if diffs.is_empty() {
        return None;
    }
    let (ci_low, ci_high) = percentile_interval(&diffs, ci_level);
    Some(PairDifference {
        dimension,
        a,
        b,
        mean_diff: diffs.iter().sum::<f64>() / diffs.len() as f64,
        ci_low,
        ci_high,
        excludes_zero: ci_low > 0.0 || ci_high < 0.0,
        runs: diffs.len(),
    })
}

/// [`pair_difference`] for every unordered method pair in every dimension.
pub fn pairwise_difference_report(records: &[RunRecord], ci_level: f64) -> Vec<PairDifference> {
    let mut methods: BTreeMap<usize, Vec<Method>> = BTreeMap::new();
    for r in records {
        let ms = methods.entry(r.dimension).or_default();
        if !ms.contains(&r.method) {
            ms.push(r.method);
        }
    }
    let mut out = Vec::new();
    for (dim, mut ms) in methods {
        ms.sort();
        for i in 0..ms.len() {
            for j in i + 1..ms.len() {
                out.extend(pair_difference(records, dim, ms[i], ms[j], ci_level));
            }
        }
    }
    out
}

/// `mean [low, high]` in percent with two decimals.
pub fn format_percent_cell(mean: f64, low: f64, high: f64) -> String {
    format!("{:.2} [{:.2},{:.2}]", 100.0 * mean, 100.0 * low, 100.0 * high)
}

/// Dimension-by-method table of aggregate rows in percent.
pub fn format_aggregate_table(rows: &[AggregateRow]) -> String {
    let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    let mut dims: Vec<usize> = rows.iter().map(|r| r.dimension).collect();
    dims.dedup();
    let width = 22;
    let mut out = format!("{:>6}", "k");
    for m in &methods {
        out.push_str(&format!(" {:>width$}", m.display_name()));
    }
    out.push('\n');
    for d in dims {
        out.push_str(&format!("{d:>6}"));
        for m in &methods {
            let cell = rows
                .iter()
                .find(|r| r.dimension == d && r.method == *m)
                .map(|r| format_percent_cell(r.mean_abs_error, r.ci_low, r.ci_high))
                .unwrap_or_default();
            out.push_str(&format!(" {cell:>width$}"));
        }
        out.push('\n');
    }
    out
}

pub fn format_ranking(ranking: &Ranking) -> String {
    let mut out = format!("{:<10} {:>5}\n", "method", "wins");
    for (m, w) in &ranking.wins {
        out.push_str(&format!("{:<10} {:>5}\n", m.display_name(), w));
    }
    out.push_str(&format!("{:<10} {:>5}\n", "total", ranking.dimensions.len()));
    out
}

/// Bootstrap distribution of one method's accuracy estimate, resampling the
/// labeled source split. Run `r` uses `run_seed(seed, k, r)`.
pub fn bootstrap_estimates(
    method: Method,
    source: &PredictionSet,
    target: &PredictionSet,
    calibration: &[PredictionSet],
    n_boot: usize,
    seed: u64,
    execution: Execution,
) -> Result<Vec<f64>> {
    let k = source.k();
    execution.try_map_range(n_boot, |r| {
        let resample = bootstrap_resample(source, run_seed(seed, k, r))?;
        Ok(estimate_accuracy(method, &resample, target, calibration)?.value())
    })
}
