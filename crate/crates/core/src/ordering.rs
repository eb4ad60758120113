//! Sampling-based checks of order-isomorphism between score functions.
//!
//! Two score functions are order-isomorphic when they induce the same `<`,
//! `=`, `>` relations on every pair of simplex points. Such pairs always
//! produce the same ATC estimate. This module falsifies the property on
//! random and gridded points and returns re-checkable witnesses.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::score::{ScoreFunction, ScoreFunctionId};
use crate::seed;
use crate::simplex::ProbabilityVector;

pub const DEFAULT_EPS: f64 = 1e-12;
/// Default cap on sample size for the all-pairs check.
pub const DEFAULT_POINTS: usize = 2000;

const GRID_STEPS: usize = 10;
const GRID_MAX_POINTS: usize = 5000;
const RANDOM_CHUNK: u64 = 1024;

/// `-1`, `0` or `1`; `|d| <= eps` counts as zero.
pub fn sign_eps(d: f64, eps: f64) -> i8 {
    if d.abs() <= eps {
        0
    } else if d > 0.0 {
        1
    } else {
        -1
    }
}

/// True iff both functions order `p` and `q` the same way.
pub fn check_pair<A, B>(p: &ProbabilityVector, q: &ProbabilityVector, a: &A, b: &B, eps: f64) -> Result<bool>
where
    A: ScoreFunction + ?Sized,
    B: ScoreFunction + ?Sized,
{
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    Ok(agree(a.score(p), a.score(q), b.score(p), b.score(q), eps))
}

fn agree(a_p: f64, a_q: f64, b_p: f64, b_q: f64, eps: f64) -> bool {
    sign_eps(a_p - a_q, eps) == sign_eps(b_p - b_q, eps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub p: ProbabilityVector,
    pub q: ProbabilityVector,
    pub a_p: f64,
    pub a_q: f64,
    pub b_p: f64,
    pub b_q: f64,
}

impl Witness {
    fn new<A, B>(p: &ProbabilityVector, q: &ProbabilityVector, a: &A, b: &B) -> Self
    where
        A: ScoreFunction + ?Sized,
        B: ScoreFunction + ?Sized,
    {
        Self {
            p: p.clone(),
            q: q.clone(),
            a_p: a.score(p),
            a_q: a.score(q),
            b_p: b.score(p),
            b_q: b.score(q),
        }
    }

    /// Re-evaluates both functions on the pair and confirms the violation.
    pub fn reverify<A, B>(&self, a: &A, b: &B, eps: f64) -> bool
    where
        A: ScoreFunction + ?Sized,
        B: ScoreFunction + ?Sized,
    {
        matches!(check_pair(&self.p, &self.q, a, b, eps), Ok(false))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    ConsistentOnSample,
    Counterexample,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingVerdict {
    pub status: VerdictStatus,
    pub witness: Option<Witness>,
    pub pairs_checked: u64,
    pub equality_tolerance: f64,
}

impl OrderingVerdict {
    pub fn is_consistent(&self) -> bool {
        self.status == VerdictStatus::ConsistentOnSample
    }
}

/// Uniform draw from the simplex (Dirichlet(1, ..., 1)).
pub fn sample_simplex<R: Rng>(rng: &mut R, k: usize) -> ProbabilityVector {
    loop {
        let mut g: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = g.iter().sum();
        if total > 0.0 {
            g.iter_mut().for_each(|x| *x /= total);
            if let Ok(v) = ProbabilityVector::new(g) {
                return v;
            }
        }
    }
}

/// Simplex points whose components are multiples of 1/10. For large `k` the
/// grid is built on the first `m` coordinates only (largest `m` keeping the
/// grid under 5000 points), the rest being zero.
pub fn simplex_grid(k: usize) -> Vec<ProbabilityVector> {
    let mut m = k.max(2);
    while m > 2 && binomial(GRID_STEPS + m - 1, m - 1) > GRID_MAX_POINTS {
        m -= 1;
    }
    let mut out = Vec::new();
    let mut current = vec![0usize; m];
    compositions(GRID_STEPS, 0, &mut current, &mut |parts| {
        let mut c: Vec<f64> = parts.iter().map(|&x| x as f64 / GRID_STEPS as f64).collect();
        c.resize(k, 0.0);
        if let Ok(v) = ProbabilityVector::new(c) {
            out.push(v);
        }
    });
    out
}

fn binomial(n: usize, r: usize) -> usize {
    let r = r.min(n - r);
    (0..r).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn compositions(remaining: usize, idx: usize, current: &mut [usize], emit: &mut impl FnMut(&[usize])) {
    if idx == current.len() - 1 {
        current[idx] = remaining;
        emit(current);
        return;
    }
    for x in (0..=remaining).rev() {
        current[idx] = x;
        compositions(remaining - x, idx + 1, current, emit);
    }
}

/// Number of pairs `(i', j')`, `i' < j'`, that precede row `i` of an
/// `n`-point upper triangle.
fn row_offset(i: usize, n: usize) -> u64 {
    let (i, n) = (i as u64, n as u64);
    i * (n - 1) - i * i.saturating_sub(1) / 2
}

/// Checker configuration shared by all operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checker {
    pub eps: f64,
    pub execution: Execution,
}

impl Default for Checker {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            execution: Execution::default(),
        }
    }
}

impl Checker {
    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    fn verdict(&self, witness: Option<Witness>, pairs_checked: u64) -> OrderingVerdict {
        OrderingVerdict {
            status: if witness.is_some() {
                VerdictStatus::Counterexample
            } else {
                VerdictStatus::ConsistentOnSample
            },
            witness,
            pairs_checked,
            equality_tolerance: self.eps,
        }
    }

    /// Checks all pairs among `points`, at most `budget` of them in row-major
    /// upper-triangle order. Returns the first violation and the number of
    /// pairs examined up to and including it.
    fn scan_pairs<A, B>(&self, a: &A, b: &B, points: &[ProbabilityVector], budget: u64) -> (Option<Witness>, u64)
    where
        A: ScoreFunction + ?Sized,
        B: ScoreFunction + ?Sized,
    {
        let n = points.len();
        if n < 2 || budget == 0 {
            return (None, 0);
        }
        let sa = self.execution.map_range(n, |i| a.score(&points[i]));
        let sb = self.execution.map_range(n, |i| b.score(&points[i]));
        let total = (n as u64 * (n as u64 - 1) / 2).min(budget);
        let eps = self.eps;
        let found = self.execution.find_map_first(n - 1, |i| {
            let start = row_offset(i, n);
            if start >= total {
                return None;
            }
            let row_len = ((n - 1 - i) as u64).min(total - start) as usize;
            (i + 1..i + 1 + row_len)
                .find(|&j| !agree(sa[i], sa[j], sb[i], sb[j], eps))
                .map(|j| (i, j, start + (j - i) as u64))
        });
        match found {
            Some((i, j, idx)) => (Some(Witness::new(&points[i], &points[j], a, b)), idx),
            None => (None, total),
        }
    }

    /// All-pairs check on a fixed set of points.
    pub fn verify_on_points<A, B>(&self, a: &A, b: &B, points: &[ProbabilityVector]) -> OrderingVerdict
    where
        A: ScoreFunction + ?Sized,
        B: ScoreFunction + ?Sized,
    {
        let (w, checked) = self.scan_pairs(a, b, points, u64::MAX);
        self.verdict(w, checked)
    }

    /// `n_points` uniform simplex draws; point `i` is seeded by
    /// `(seed, k, i)`.
    pub fn sample_points(&self, k: usize, n_points: usize, seed: u64) -> Vec<ProbabilityVector> {
        self.execution.map_range(n_points, |i| {
            let mut rng = seed::rng_for(&[seed, k as u64, i as u64]);
            sample_simplex(&mut rng, k)
        })
    }

    pub fn verify_on_sample<A, B>(&self, a: &A, b: &B, k: usize, n_points: usize, seed: u64) -> Result<OrderingVerdict>
    where
        A: ScoreFunction + ?Sized,
        B: ScoreFunction + ?Sized,
    {
        if k < 2 {
            return Err(Error::Dimension { len: k });
        }
        if n_points < 2 {
            return Err(Error::InvalidConfig("need at least 2 points".into()));
        }
        let points = self.sample_points(k, n_points, seed);
        Ok(self.verify_on_points(a, b, &points))
    }

    /// Grid pairs first, then independent random pairs, `budget` pairs in
    /// total. Any returned witness re-verifies under [`check_pair`].
    pub fn search_counterexample<A, B>(&self, a: &A, b: &B, k: usize, budget: u64, seed: u64) -> Result<(Option<Witness>, u64)>
    where
        A: ScoreFunction + ?Sized,
        B: ScoreFunction + ?Sized,
    {
        if k < 2 {
            return Err(Error::Dimension { len: k });
        }
        if budget == 0 {
            return Err(Error::InvalidConfig("budget must be >= 1".into()));
        }
        let grid = simplex_grid(k);
        let (w, used) = self.scan_pairs(a, b, &grid, budget);
        if w.is_some() {
            return Ok((w, used));
        }
        let remaining = budget - used;
        let chunks = remaining.div_ceil(RANDOM_CHUNK);
        let eps = self.eps;
        let found = self.execution.find_map_first(chunks as usize, |c| {
            let mut rng = seed::rng_for(&[seed, k as u64, 0x7261_6e64, c as u64]);
            let len = RANDOM_CHUNK.min(remaining - c as u64 * RANDOM_CHUNK);
            (0..len).find_map(|t| {
                let p = sample_simplex(&mut rng, k);
                let q = sample_simplex(&mut rng, k);
                (!agree(a.score(&p), a.score(&q), b.score(&p), b.score(&q), eps))
                    .then(|| (Witness::new(&p, &q, a, b), c as u64 * RANDOM_CHUNK + t + 1))
            })
        });
        Ok(match found {
            Some((w, idx)) => (Some(w), used + idx),
            None => (None, budget),
        })
    }

    /// Sample check followed, if still consistent, by a counterexample
    /// search with `budget` extra pairs.
    pub fn compare<A, B>(&self, a: &A, b: &B, k: usize, n_points: usize, budget: u64, seed: u64) -> Result<OrderingVerdict>
    where
        A: ScoreFunction + ?Sized,
        B: ScoreFunction + ?Sized,
    {
        let sampled = self.verify_on_sample(a, b, k, n_points, seed)?;
        if !sampled.is_consistent() || budget == 0 {
            return Ok(sampled);
        }
        let (w, used) = self.search_counterexample(a, b, k, budget, seed)?;
        Ok(self.verdict(w, sampled.pairs_checked + used))
    }

    /// Checks reflexivity, symmetry and transitivity of "consistent on the
    /// sample" over `fns`, all evaluated on one shared sample.
    pub fn verify_equivalence_relation(
        &self,
        fns: &[&dyn ScoreFunction],
        k: usize,
        n_points: usize,
        seed: u64,
    ) -> Result<EquivalenceReport> {
        if fns.is_empty() {
            return Err(Error::EmptyInput);
        }
        if k < 2 {
            return Err(Error::Dimension { len: k });
        }
        let points = self.sample_points(k, n_points.max(2), seed);
        let m = fns.len();
        let consistent: Vec<Vec<bool>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| self.verify_on_points(fns[i], fns[j], &points).is_consistent())
                    .collect()
            })
            .collect();
        Ok(EquivalenceReport::from_matrix(
            fns.iter().map(|f| f.label()).collect(),
            consistent,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub labels: Vec<String>,
    pub consistent: Vec<Vec<bool>>,
    pub reflexive: bool,
    pub symmetric: bool,
    /// Triples `(a, b, c)` with `a ~ b`, `b ~ c` but not `a ~ c`.
    pub transitivity_violations: Vec<(usize, usize, usize)>,
    /// Connected components of the relation, as indices into `labels`.
    pub classes: Vec<Vec<usize>>,
}

impl EquivalenceReport {
    pub fn from_matrix(labels: Vec<String>, consistent: Vec<Vec<bool>>) -> Self {
        let m = labels.len();
        let reflexive = (0..m).all(|i| consistent[i][i]);
        let symmetric = (0..m).all(|i| (0..m).all(|j| consistent[i][j] == consistent[j][i]));
        let mut transitivity_violations = Vec::new();
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    if consistent[a][b] && consistent[b][c] && !consistent[a][c] {
                        transitivity_violations.push((a, b, c));
                    }
                }
            }
        }
        let classes = components(m, |i, j| consistent[i][j] || consistent[j][i]);
        Self {
            labels,
            consistent,
            reflexive,
            symmetric,
            transitivity_violations,
            classes,
        }
    }

    pub fn is_equivalence(&self) -> bool {
        self.reflexive && self.symmetric && self.transitivity_violations.is_empty()
    }

    pub fn class_labels(&self) -> Vec<Vec<String>> {
        self.classes
            .iter()
            .map(|c| c.iter().map(|&i| self.labels[i].clone()).collect())
            .collect()
    }
}

/// Connected components of the graph on `0..m` with the given edges, each
/// sorted, ordered by smallest member.
pub fn components(m: usize, linked: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..m {
        for j in i + 1..m {
            if linked(i, j) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; m];
    for i in 0..m {
        let r = find(&mut parent, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = classes.len();
            classes.push(Vec::new());
        }
        classes[root_slot[r]].push(i);
    }
    classes
}

/// Whether `a` and `b` are guaranteed order-isomorphic on the
/// `(k-1)`-simplex: always in the binary case, and for the L2 norm and L2
/// distance to uniform in every dimension.
pub fn predicted_isomorphic(a: ScoreFunctionId, b: ScoreFunctionId, k: usize) -> bool {
    use ScoreFunctionId::{L2Norm, L2ToUniform};
    a == b || k == 2 || matches!((a, b), (L2Norm, L2ToUniform) | (L2ToUniform, L2Norm))
}

/// The equivalence classes among the six registered functions that the
/// theory predicts for dimension `k`.
pub fn predicted_classes(k: usize) -> Vec<Vec<ScoreFunctionId>> {
    let ids = ScoreFunctionId::ALL;
    components(ids.len(), |i, j| predicted_isomorphic(ids[i], ids[j], k))
        .into_iter()
        .map(|c| c.into_iter().map(|i| ids[i]).collect())
        .collect()
}

pub fn verify_on_sample<A, B>(a: &A, b: &B, k: usize, n_points: usize, seed: u64) -> Result<OrderingVerdict>
where
    A: ScoreFunction + ?Sized,
    B: ScoreFunction + ?Sized,
{
    Checker::default().verify_on_sample(a, b, k, n_points, seed)
}

pub fn search_counterexample<A, B>(a: &A, b: &B, k: usize, budget: u64, seed: u64) -> Result<Option<Witness>>
where
    A: ScoreFunction + ?Sized,
    B: ScoreFunction + ?Sized,
{
    Ok(Checker::default().search_counterexample(a, b, k, budget, seed)?.0)
}

pub fn verify_equivalence_relation(
    fns: &[&dyn ScoreFunction],
    k: usize,
    n_points: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    Checker::default().verify_equivalence_relation(fns, k, n_points, seed)
}
