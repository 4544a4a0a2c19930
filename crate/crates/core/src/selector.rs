//! Annotation orderings: k-center greedy over a fixed feature space, the
//! uniform random baseline, and the retrain-per-round core-set baseline.
//!
//! Greedy picks maximise the distance to the nearest chosen center, ties
//! going to the lowest index. The nearest-center distances are maintained
//! incrementally: each new center costs one `O(n·d)` pass that both lowers
//! `min_dist` and finds the next farthest point.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::embedding_store::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Points per work unit in the fused update/argmax pass. Fixed so the
/// partitioning, and therefore the reduction, never depends on thread count.
const CHUNK: usize = 2048;
/// Below this many points the pass runs on the calling thread.
const PARALLEL_MIN_POINTS: usize = 4 * CHUNK;

/// Distinct point indices in labelling order; the first `seed_count` were
/// seeds rather than greedy picks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionOrder {
    order: Vec<usize>,
    seed_count: usize,
}

impl SelectionOrder {
    /// Checks distinctness and range against a pool of `n` points.
    pub fn new(order: Vec<usize>, seed_count: usize, n: usize) -> Result<Self> {
        if seed_count > order.len() {
            return Err(Error::MalformedOrder(format!(
                "seed_count {seed_count} exceeds order length {}",
                order.len()
            )));
        }
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::DuplicateSeed(i));
            }
        }
        Ok(Self { order, seed_count })
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }

    pub fn seed_count(&self) -> usize {
        self.seed_count
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The first `budget` entries (seeds count toward the budget).
    pub fn prefix(&self, budget: usize) -> Result<&[usize]> {
        self.order.get(..budget).ok_or(Error::BudgetExceedsOrder {
            budget,
            len: self.order.len(),
        })
    }

    /// Copy truncated to `budget` entries.
    pub fn truncated(&self, budget: usize) -> Result<SelectionOrder> {
        Ok(SelectionOrder {
            order: self.prefix(budget)?.to_vec(),
            seed_count: self.seed_count.min(budget),
        })
    }

    pub fn is_permutation_of(&self, n: usize) -> bool {
        if self.order.len() != n {
            return false;
        }
        let mut seen = vec![false; n];
        self.order
            .iter()
            .all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.order
    }
}

/// Working set of the greedy loop.
#[derive(Debug, Clone)]
pub struct SelectionState {
    centers: Vec<usize>,
    min_dist: Vec<f64>,
    is_center: Vec<bool>,
    metric: Metric,
}

impl SelectionState {
    pub fn new(n: usize, metric: Metric) -> Self {
        Self {
            centers: Vec::new(),
            min_dist: vec![f64::INFINITY; n],
            is_center: vec![false; n],
            metric,
        }
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    /// Distance from each point to its nearest center (`+inf` before any).
    pub fn min_dist(&self) -> &[f64] {
        &self.min_dist
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn is_center(&self, i: usize) -> bool {
        self.is_center[i]
    }

    /// The k-center objective: largest distance from any point to its
    /// nearest center.
    pub fn coverage_radius(&self) -> Result<f64> {
        if self.centers.is_empty() {
            return Err(Error::NoCenters);
        }
        Ok(self.min_dist.iter().copied().fold(0.0, f64::max))
    }

    /// Non-center with the largest `min_dist`, lowest index on ties.
    pub fn farthest(&self) -> Option<(usize, f64)> {
        scan_farthest(&self.min_dist, &self.is_center, 0)
    }

    /// Adds `c` as a center, lowers every `min_dist` accordingly, and returns
    /// the farthest remaining non-center in the same pass.
    ///
    /// `c` must be a valid, not-yet-chosen index into `points`; the matrix
    /// must already be admissible for the metric.
    pub fn add_center<T: Scalar>(
        &mut self,
        points: &EmbeddingMatrix<T>,
        c: usize,
    ) -> Option<(usize, f64)> {
        debug_assert_eq!(points.n(), self.min_dist.len());
        debug_assert!(!self.is_center[c]);
        self.is_center[c] = true;
        self.centers.push(c);
        let metric = self.metric;
        let center = points.row(c);
        let n = self.min_dist.len();

        let update = |offset: usize, dist: &mut [f64], mask: &[bool]| {
            let mut best: Option<(usize, f64)> = None;
            for (j, (slot, &taken)) in dist.iter_mut().zip(mask).enumerate() {
                let i = offset + j;
                let d = metric.eval_unchecked(points.row(i), center);
                if d < *slot {
                    *slot = d;
                }
                if taken {
                    continue;
                }
                match best {
                    Some((_, bd)) if *slot <= bd => {}
                    _ => best = Some((i, *slot)),
                }
            }
            best
        };

        let best = if n < PARALLEL_MIN_POINTS {
            update(0, &mut self.min_dist, &self.is_center)
        } else {
            let partials: Vec<Option<(usize, f64)>> = self
                .min_dist
                .par_chunks_mut(CHUNK)
                .zip(self.is_center.par_chunks(CHUNK))
                .enumerate()
                .map(|(k, (dist, mask))| update(k * CHUNK, dist, mask))
                .collect();
            // ascending partition order, strict comparison: same as one scan
            partials.into_iter().flatten().fold(None, |acc, cand| match acc {
                Some((_, bd)) if cand.1 <= bd => acc,
                _ => Some(cand),
            })
        };
        self.min_dist[c] = 0.0;
        best
    }
}

fn scan_farthest(min_dist: &[f64], is_center: &[bool], offset: usize) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&d, &taken)) in min_dist.iter().zip(is_center).enumerate() {
        if taken {
            continue;
        }
        match best {
            Some((_, bd)) if d <= bd => {}
            _ => best = Some((offset + j, d)),
        }
    }
    best
}

fn validate_seeds(n: usize, seeds: &[usize]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::NoCenters);
    }
    let mut seen = vec![false; n];
    for &s in seeds {
        if s >= n {
            return Err(Error::IndexOutOfRange { index: s, n });
        }
        if std::mem::replace(&mut seen[s], true) {
            return Err(Error::DuplicateSeed(s));
        }
    }
    Ok(())
}

/// Runs k-center greedy and also hands back the final working state.
pub fn kcenter_greedy_with_state<T: Scalar>(
    points: &EmbeddingMatrix<T>,
    initial_centers: &[usize],
    budget: usize,
    metric: Metric,
) -> Result<(SelectionOrder, SelectionState)> {
    let n = points.n();
    validate_seeds(n, initial_centers)?;
    let available = n - initial_centers.len();
    if budget > available {
        return Err(Error::BudgetExceedsPool {
            requested: budget,
            available,
        });
    }
    metric.validate_rows(points.rows())?;

    let mut state = SelectionState::new(n, metric);
    let mut next = None;
    for &c in initial_centers {
        next = state.add_center(points, c);
    }
    let mut order = initial_centers.to_vec();
    order.reserve(budget);
    for _ in 0..budget {
        let (pick, _) = next.expect("budget checked against pool size");
        order.push(pick);
        next = state.add_center(points, pick);
    }
    Ok((
        SelectionOrder {
            order,
            seed_count: initial_centers.len(),
        },
        state,
    ))
}

/// Seeds followed by exactly `budget` farthest-point picks.
pub fn kcenter_greedy<T: Scalar>(
    points: &EmbeddingMatrix<T>,
    initial_centers: &[usize],
    budget: usize,
    metric: Metric,
) -> Result<SelectionOrder> {
    kcenter_greedy_with_state(points, initial_centers, budget, metric).map(|(o, _)| o)
}

/// Uniform random permutation of `0..n` (seeded Fisher–Yates).
pub fn random_order(n: usize, rng_seed: u64) -> Result<SelectionOrder> {
    if n == 0 {
        return Err(Error::EmptyMatrix { n: 0, d: 0 });
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(rng_seed).shuffle(&mut order);
    Ok(SelectionOrder {
        order,
        seed_count: 0,
    })
}

/// `k` distinct seed indices drawn from the seeded RNG: the first `k`
/// entries of [`random_order`] with the same seed.
pub fn draw_seeds(n: usize, k: usize, rng_seed: u64) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::NoCenters);
    }
    if k > n {
        return Err(Error::BudgetExceedsPool {
            requested: k,
            available: n,
        });
    }
    let mut order = random_order(n, rng_seed)?.into_vec();
    order.truncate(k);
    Ok(order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionConfig {
    /// Number of random initial centers (at least one).
    pub seed_count: usize,
    pub rng_seed: u64,
    pub metric: Metric,
    /// Greedy picks beyond the seeds; `None` orders the whole pool.
    pub budget: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            seed_count: 1,
            rng_seed: 0,
            metric: Metric::SquaredL2,
            budget: None,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.seed_count == 0 {
            return Err(Error::InvalidConfig("seed_count must be at least 1".into()));
        }
        let total = self.seed_count.saturating_add(self.budget.unwrap_or(0));
        if total > n {
            return Err(Error::BudgetExceedsPool {
                requested: total,
                available: n,
            });
        }
        Ok(())
    }
}

/// Greedy ordering seeded from `cfg`. With `cfg.budget == None` this is the
/// full permutation whose prefixes serve every label budget.
pub fn select<T: Scalar>(points: &EmbeddingMatrix<T>, cfg: &SelectionConfig) -> Result<SelectionOrder> {
    cfg.validate(points.n())?;
    let seeds = draw_seeds(points.n(), cfg.seed_count, cfg.rng_seed)?;
    let budget = cfg.budget.unwrap_or(points.n() - cfg.seed_count);
    kcenter_greedy(points, &seeds, budget, cfg.metric)
}

/// Full permutation of `0..n` by k-center greedy; `cfg.budget` is ignored.
pub fn full_ordering<T: Scalar>(
    points: &EmbeddingMatrix<T>,
    cfg: &SelectionConfig,
) -> Result<SelectionOrder> {
    select(points, &SelectionConfig { budget: None, ..*cfg })
}

/// Supplies a feature space for the iterative baseline, typically by
/// training a model on the labelled indices and embedding every point.
pub trait FeatureProvider<T: Scalar> {
    /// Size of the pool; returned matrices must have this many rows.
    fn num_points(&self) -> usize;
    fn features(&mut self, labeled: &[usize]) -> Result<EmbeddingMatrix<T>>;
}

/// Provider whose features never change; reduces the iterative loop to
/// fixed-feature greedy selection.
pub struct FixedFeatures<'a, T: Scalar>(pub &'a EmbeddingMatrix<T>);

impl<T: Scalar> FeatureProvider<T> for FixedFeatures<'_, T> {
    fn num_points(&self) -> usize {
        self.0.n()
    }

    fn features(&mut self, _labeled: &[usize]) -> Result<EmbeddingMatrix<T>> {
        Ok(self.0.clone())
    }
}

/// Retrain-per-round core-set selection.
///
/// Round 0 labels `round_sizes[0]` points uniformly at random. Every later
/// round asks `provider` for a fresh feature space given the labelled set
/// and extends it by k-center greedy, using all labelled points as centers.
pub fn iterative_coreset<T: Scalar, P: FeatureProvider<T> + ?Sized>(
    provider: &mut P,
    round_sizes: &[usize],
    metric: Metric,
    rng_seed: u64,
) -> Result<SelectionOrder> {
    let n = provider.num_points();
    let (&first, rest) = round_sizes
        .split_first()
        .ok_or_else(|| Error::InvalidConfig("at least one round is required".into()))?;
    if first == 0 || rest.contains(&0) {
        return Err(Error::InvalidConfig("round sizes must be positive".into()));
    }
    let total = round_sizes.iter().try_fold(0usize, |a, &b| a.checked_add(b));
    match total {
        Some(t) if t <= n => {}
        _ => {
            return Err(Error::BudgetExceedsPool {
                requested: total.unwrap_or(usize::MAX),
                available: n,
            })
        }
    }

    let mut labeled = random_order(n, rng_seed)?.into_vec();
    labeled.truncate(first);
    for &size in rest {
        let feats = provider.features(&labeled).map_err(|e| match e {
            Error::TrainerFailure(_) => e,
            other => Error::TrainerFailure(other.to_string()),
        })?;
        if feats.n() != n {
            return Err(Error::TrainerFailure(format!(
                "provider returned {} feature rows for {n} points",
                feats.n()
            )));
        }
        labeled = kcenter_greedy(&feats, &labeled, size, metric)?.into_vec();
    }
    Ok(SelectionOrder {
        order: labeled,
        seed_count: first,
    })
}

/// `rounds` rounds of `per_round` points each.
pub fn iterative_coreset_uniform<T: Scalar, P: FeatureProvider<T> + ?Sized>(
    provider: &mut P,
    rounds: usize,
    per_round: usize,
    metric: Metric,
    rng_seed: u64,
) -> Result<SelectionOrder> {
    iterative_coreset(provider, &vec![per_round; rounds], metric, rng_seed)
}

/// Order file: `# seed_count=<k>` then one index per line.
pub fn format_order(order: &SelectionOrder) -> String {
    let mut s = String::with_capacity(8 * order.len() + 20);
    let _ = writeln!(s, "# seed_count={}", order.seed_count);
    for i in &order.order {
        let _ = writeln!(s, "{i}");
    }
    s
}

pub fn write_order(order: &SelectionOrder, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_order(order)).map_err(|source| Error::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_order(text: &str) -> Result<SelectionOrder> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MalformedOrder("empty order file".into()))?;
    let seed_count = header
        .trim()
        .strip_prefix("# seed_count=")
        .and_then(|v| v.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::MalformedOrder(format!("bad header line {header:?}")))?;
    let mut order = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let i = line
            .parse::<usize>()
            .map_err(|_| Error::MalformedOrder(format!("line {}: {line:?}", k + 2)))?;
        order.push(i);
    }
    let n = order.iter().max().map_or(0, |m| m + 1);
    SelectionOrder::new(order, seed_count, n)
}

pub fn read_order(path: impl AsRef<Path>) -> Result<SelectionOrder> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    parse_order(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::rng::Rng;

    fn square() -> EmbeddingMatrix<f32> {
        EmbeddingMatrix::from_rows(&[[0.0f32, 0.0], [10.0, 0.0], [0.0, 10.0], [1.0, 1.0]]).unwrap()
    }

    /// Exhaustive L2 table for `square()`, typed out by hand.
    fn square_table() -> [[f64; 4]; 4] {
        let s2 = 2f64.sqrt();
        let s200 = 200f64.sqrt();
        let s82 = 82f64.sqrt();
        [
            [0.0, 10.0, 10.0, s2],
            [10.0, 0.0, s200, s82],
            [10.0, s200, 0.0, s82],
            [s2, s82, s82, 0.0],
        ]
    }

    #[test]
    fn distance_table_matches_hand_values() {
        let e = square();
        let t = square_table();
        for i in 0..4 {
            for j in 0..4 {
                let d = Metric::L2.eval_unchecked(e.row(i), e.row(j));
                assert!((d - t[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let e = square();
        let order = kcenter_greedy(&e, &[0], 2, Metric::L2).unwrap();
        assert_eq!(order.as_slice(), &[0, 1, 2]);
        assert_eq!(order.seed_count(), 1);
        let order = kcenter_greedy(&e, &[0], 2, Metric::SquaredL2).unwrap();
        assert_eq!(order.as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn zero_budget_returns_seeds() {
        assert_eq!(kcenter_greedy(&square(), &[0], 0, Metric::L2).unwrap().as_slice(), &[0]);
    }

    #[test]
    fn coverage_after_three_centers() {
        let (_, state) = kcenter_greedy_with_state(&square(), &[0], 2, Metric::L2).unwrap();
        assert_eq!(state.coverage_radius().unwrap(), square_table()[3][0]);
        let (_, state) = kcenter_greedy_with_state(&square(), &[0], 3, Metric::L2).unwrap();
        assert_eq!(state.coverage_radius().unwrap(), 0.0);
    }

    #[test]
    fn coverage_of_identical_points_is_zero() {
        let e = EmbeddingMatrix::from_rows(&[[3.0f32, 3.0]; 5]).unwrap();
        let (order, state) = kcenter_greedy_with_state(&e, &[2], 2, Metric::L2).unwrap();
        assert_eq!(order.as_slice(), &[2, 0, 1]);
        assert_eq!(state.coverage_radius().unwrap(), 0.0);
    }

    #[test]
    fn coverage_without_centers_errors() {
        let s = SelectionState::new(3, Metric::L2);
        assert!(matches!(s.coverage_radius(), Err(Error::NoCenters)));
    }

    #[test]
    fn greedy_errors() {
        let e = square();
        assert!(matches!(
            kcenter_greedy(&e, &[0], 4, Metric::L2),
            Err(Error::BudgetExceedsPool { requested: 4, available: 3 })
        ));
        assert!(matches!(kcenter_greedy(&e, &[1, 1], 0, Metric::L2), Err(Error::DuplicateSeed(1))));
        assert!(matches!(
            kcenter_greedy(&e, &[7], 0, Metric::L2),
            Err(Error::IndexOutOfRange { index: 7, n: 4 })
        ));
        assert!(matches!(kcenter_greedy(&e, &[], 0, Metric::L2), Err(Error::NoCenters)));
        assert!(matches!(
            kcenter_greedy(&e, &[1], 1, Metric::Cosine),
            Err(Error::ZeroVector(0))
        ));
    }

    #[test]
    fn full_ordering_of_square_with_seed_zero() {
        let e = square();
        // rng seed chosen so that the single drawn seed is index 0
        let rng_seed = (0u64..)
            .find(|&s| draw_seeds(4, 1, s).unwrap() == [0])
            .unwrap();
        let cfg = SelectionConfig {
            rng_seed,
            ..Default::default()
        };
        let order = full_ordering(&e, &cfg).unwrap();
        assert_eq!(order.as_slice(), &[0, 1, 2, 3]);
        assert!(order.is_permutation_of(4));
    }

    #[test]
    fn single_point_ordering() {
        let e = EmbeddingMatrix::from_rows(&[[1.0f32]]).unwrap();
        let order = full_ordering(&e, &SelectionConfig::default()).unwrap();
        assert_eq!(order.as_slice(), &[0]);
    }

    #[test]
    fn budget_prefix_of_full_ordering() {
        let e = square();
        for rng_seed in 0..8 {
            let full = full_ordering(&e, &SelectionConfig { rng_seed, ..Default::default() }).unwrap();
            let part = select(
                &e,
                &SelectionConfig {
                    rng_seed,
                    budget: Some(2),
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(part.as_slice(), &full.as_slice()[..3]);
        }
    }

    #[test]
    fn config_validation() {
        let e = square();
        let bad_k = SelectionConfig { seed_count: 0, ..Default::default() };
        assert!(matches!(select(&e, &bad_k), Err(Error::InvalidConfig(_))));
        let too_many = SelectionConfig { seed_count: 2, budget: Some(3), ..Default::default() };
        assert!(matches!(select(&e, &too_many), Err(Error::BudgetExceedsPool { .. })));
        let big_k = SelectionConfig { seed_count: 5, ..Default::default() };
        assert!(matches!(full_ordering(&e, &big_k), Err(Error::BudgetExceedsPool { .. })));
    }

    #[test]
    fn random_order_contracts() {
        assert_eq!(random_order(1, 123).unwrap().as_slice(), &[0]);
        assert_eq!(random_order(5, 42).unwrap(), random_order(5, 42).unwrap());
        for s in 0..20 {
            assert!(random_order(4, s).unwrap().is_permutation_of(4));
        }
        assert!(random_order(0, 1).is_err());
    }

    #[test]
    fn iterative_single_round_is_random_prefix() {
        let e = square();
        for s in 0..10 {
            let it = iterative_coreset_uniform(&mut FixedFeatures(&e), 1, 2, Metric::L2, s).unwrap();
            assert_eq!(it.as_slice(), &random_order(4, s).unwrap().as_slice()[..2]);
        }
    }

    #[test]
    fn iterative_with_fixed_features_reduces_to_greedy() {
        let pts: Vec<[f32; 2]> = (0..30)
            .map(|i| [((i * 7) % 11) as f32, ((i * 5) % 13) as f32])
            .collect();
        let e = EmbeddingMatrix::from_rows(&pts).unwrap();
        for s in 0..5 {
            let it = iterative_coreset_uniform(&mut FixedFeatures(&e), 2, 4, Metric::SquaredL2, s).unwrap();
            let first = &it.as_slice()[..4];
            let greedy = kcenter_greedy(&e, first, 4, Metric::SquaredL2).unwrap();
            assert_eq!(it.as_slice(), greedy.as_slice());
            assert_eq!(it.seed_count(), 4);
        }
    }

    struct Failing;
    impl FeatureProvider<f32> for Failing {
        fn num_points(&self) -> usize {
            10
        }
        fn features(&mut self, _: &[usize]) -> Result<EmbeddingMatrix<f32>> {
            Err(Error::EmptySubset)
        }
    }

    #[test]
    fn iterative_errors() {
        assert!(matches!(
            iterative_coreset_uniform(&mut Failing, 2, 2, Metric::L2, 0),
            Err(Error::TrainerFailure(_))
        ));
        assert!(matches!(
            iterative_coreset_uniform(&mut Failing, 3, 4, Metric::L2, 0),
            Err(Error::BudgetExceedsPool { requested: 12, available: 10 })
        ));
    }

    #[test]
    fn order_file_round_trip() {
        let o = SelectionOrder::new(vec![3, 0, 2], 1, 4).unwrap();
        let text = format_order(&o);
        assert_eq!(text, "# seed_count=1\n3\n0\n2\n");
        assert_eq!(parse_order(&text).unwrap(), o);
        assert!(parse_order("3\n0\n").is_err());
        assert!(parse_order("# seed_count=0\n1\n1\n").is_err());
    }

    #[test]
    fn parallel_pass_matches_sequential_scan() {
        let n = PARALLEL_MIN_POINTS + 3 * CHUNK + 17;
        let mut rng = Rng::new(5);
        // coarse grid values force many exact ties across chunk boundaries
        let data: Vec<f32> = (0..n * 2).map(|_| rng.below(4) as f32).collect();
        let e = EmbeddingMatrix::new(n, 2, data).unwrap();
        let (order, state) = kcenter_greedy_with_state(&e, &[n - 1], 20, Metric::SquaredL2).unwrap();
        let mut seq = SelectionState::new(n, Metric::SquaredL2);
        let mut expect = vec![n - 1];
        for &c in &[n - 1] {
            seq.is_center[c] = true;
            seq.centers.push(c);
            for i in 0..n {
                seq.min_dist[i] = seq.min_dist[i].min(Metric::SquaredL2.eval_unchecked(e.row(i), e.row(c)));
            }
        }
        for _ in 0..20 {
            let (p, _) = seq.farthest().unwrap();
            expect.push(p);
            seq.is_center[p] = true;
            seq.centers.push(p);
            for i in 0..n {
                seq.min_dist[i] = seq.min_dist[i].min(Metric::SquaredL2.eval_unchecked(e.row(i), e.row(p)));
            }
        }
        assert_eq!(order.as_slice(), expect.as_slice());
        assert_eq!(state.min_dist(), seq.min_dist());
    }

    fn cloud() -> impl Strategy<Value = EmbeddingMatrix<f32>> {
        (2usize..60, 1usize..5).prop_flat_map(|(n, d)| {
            proptest::collection::vec(-20i8..20, n * d).prop_map(move |v| {
                EmbeddingMatrix::new(n, d, v.into_iter().map(|x| x as f32 * 0.5).collect()).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn coverage_radius_never_grows(e in cloud(), seed in 0usize..60) {
            let seed = seed % e.n();
            let mut state = SelectionState::new(e.n(), Metric::L2);
            let mut next = state.add_center(&e, seed);
            let mut last = state.coverage_radius().unwrap();
            while let Some((p, _)) = next {
                next = state.add_center(&e, p);
                let r = state.coverage_radius().unwrap();
                prop_assert!(r <= last);
                last = r;
            }
            prop_assert_eq!(last, 0.0);
        }

        #[test]
        fn prefix_consistency(e in cloud(), s in any::<u64>(), b1 in 0usize..60, b2 in 0usize..60) {
            let room = e.n() - 1;
            let (b1, b2) = (b1.min(b2) % (room + 1), b1.max(b2) % (room + 1));
            let (b1, b2) = (b1.min(b2), b1.max(b2));
            let seeds = draw_seeds(e.n(), 1, s).unwrap();
            let small = kcenter_greedy(&e, &seeds, b1, Metric::SquaredL2).unwrap();
            let large = kcenter_greedy(&e, &seeds, b2, Metric::SquaredL2).unwrap();
            prop_assert_eq!(small.as_slice(), &large.as_slice()[..b1 + 1]);
        }

        #[test]
        fn greedy_output_is_distinct_and_in_range(e in cloud(), s in any::<u64>()) {
            let o = full_ordering(&e, &SelectionConfig { rng_seed: s, ..Default::default() }).unwrap();
            prop_assert!(o.is_permutation_of(e.n()));
        }
    }
}
