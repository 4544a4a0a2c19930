//! Budget sweeps comparing selection methods by proxy-model test accuracy,
//! and class-frequency histograms of selections.
//!
//! Output files (UTF-8, LF):
//!
//! * results: `method,budget,trial,seed,accuracy`
//! * summary: `method,budget,mean_accuracy,std_accuracy`
//! * histogram: `class,count`
//!
//! Rows are always emitted in canonical `(method, budget, trial)` order, so
//! output bytes do not depend on job scheduling.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding_store::{EmbeddingMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::proxy_model::{accuracy, train, MlpFeatureProvider, TrainConfig};
use crate::scalar::Scalar;
use crate::selector::{iterative_coreset, random_order, select, SelectionConfig, SelectionOrder};

pub const RESULTS_HEADER: &str = "method,budget,trial,seed,accuracy";
pub const SUMMARY_HEADER: &str = "method,budget,mean_accuracy,std_accuracy";
pub const HISTOGRAM_HEADER: &str = "class,count";
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Uniformly random prefix.
    Random,
    /// Retrain the proxy every round and extend by greedy selection in its
    /// hidden-layer space.
    CoresetIterative,
    /// One greedy ordering over the given embeddings; budgets take prefixes.
    FixedFeature,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Random, Method::CoresetIterative, Method::FixedFeature];

    pub fn name(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::CoresetIterative => "coreset_iterative",
            Method::FixedFeature => "fixed_feature",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidConfig(format!("unknown method {s:?}; valid methods: {}", names.join(", ")))
            })
    }
}

/// Strictly increasing, positive label budgets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetSchedule {
    budgets: Vec<usize>,
}

impl BudgetSchedule {
    pub fn new(budgets: Vec<usize>) -> Result<Self> {
        if budgets.is_empty() {
            return Err(Error::InvalidSchedule("no budgets".into()));
        }
        if budgets[0] == 0 {
            return Err(Error::InvalidSchedule("budgets must be positive".into()));
        }
        if budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSchedule(format!(
                "budgets must be strictly increasing: {budgets:?}"
            )));
        }
        Ok(Self { budgets })
    }

    /// Nine budgets from 2% to 40% of `n`, evenly spaced (rounded, with
    /// duplicates from rounding removed).
    pub fn default_for(n: usize) -> Result<Self> {
        let mut budgets: Vec<usize> = (0..9)
            .map(|i| {
                let frac = 0.02 + 0.38 * i as f64 / 8.0;
                ((n as f64 * frac).round() as usize).max(1)
            })
            .collect();
        budgets.dedup();
        Self::new(budgets)
    }

    pub fn budgets(&self) -> &[usize] {
        &self.budgets
    }

    pub fn max(&self) -> usize {
        *self.budgets.last().unwrap()
    }

    /// First budget, then the gaps between consecutive budgets.
    pub fn increments(&self) -> Vec<usize> {
        let mut prev = 0;
        self.budgets
            .iter()
            .map(|&b| {
                let step = b - prev;
                prev = b;
                step
            })
            .collect()
    }

    pub fn check_pool(&self, n: usize) -> Result<()> {
        match self.budgets.iter().find(|&&b| b > n) {
            Some(&budget) => Err(Error::ScheduleExceedsPool { budget, n }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub method: Method,
    pub budget: usize,
    pub trial: usize,
    pub seed: u64,
    pub accuracy: f64,
}

impl SweepRow {
    fn key(&self) -> (Method, usize, usize) {
        (self.method, self.budget, self.trial)
    }

    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}\n",
            self.method, self.budget, self.trial, self.seed, self.accuracy
        )
    }

    fn parse(line: &str) -> Option<Self> {
        let mut f = line.split(',');
        let row = SweepRow {
            method: f.next()?.parse().ok()?,
            budget: f.next()?.parse().ok()?,
            trial: f.next()?.parse().ok()?,
            seed: f.next()?.parse().ok()?,
            accuracy: f.next()?.parse().ok()?,
        };
        (f.next().is_none() && (0.0..=1.0).contains(&row.accuracy)).then_some(row)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Sorts rows into canonical order.
    pub fn new(mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by_key(SweepRow::key);
        Self { rows }
    }

    pub fn rows(&self) -> &[SweepRow] {
        &self.rows
    }

    /// Accuracies of one (method, budget) cell, in trial order.
    pub fn accuracies(&self, method: Method, budget: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.budget == budget)
            .map(|r| r.accuracy)
            .collect()
    }

    pub fn mean_accuracy(&self, method: Method, budget: usize) -> Option<f64> {
        let acc = self.accuracies(method, budget);
        (!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64)
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut cells: BTreeMap<(Method, usize), Vec<f64>> = BTreeMap::new();
        for r in &self.rows {
            cells.entry((r.method, r.budget)).or_default().push(r.accuracy);
        }
        cells
            .into_iter()
            .map(|((method, budget), acc)| {
                let (mean, std) = mean_std(&acc);
                SummaryRow {
                    method,
                    budget,
                    mean_accuracy: mean,
                    std_accuracy: std,
                }
            })
            .collect()
    }

    pub fn results_csv(&self) -> String {
        let mut s = format!("{RESULTS_HEADER}\n");
        for r in &self.rows {
            s.push_str(&r.csv_line());
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = format!("{SUMMARY_HEADER}\n");
        for r in self.summary() {
            let _ = writeln!(s, "{},{},{},{}", r.method, r.budget, r.mean_accuracy, r.std_accuracy);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub budget: usize,
    pub mean_accuracy: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub std_accuracy: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Human-readable summary, one line per (method, budget).
pub fn format_summary_table(result: &SweepResult) -> String {
    let mut s = format!("{:<18} {:>8} {:>10} {:>10}\n", "method", "budget", "mean", "std");
    for r in result.summary() {
        let _ = writeln!(
            s,
            "{:<18} {:>8} {:>10.4} {:>10.4}",
            r.method.name(),
            r.budget,
            r.mean_accuracy,
            r.std_accuracy
        );
    }
    s
}

/// Points with labels.
#[derive(Debug, Clone, Copy)]
pub struct LabeledSet<'a, T: Scalar> {
    pub points: &'a EmbeddingMatrix<T>,
    pub labels: &'a LabelVector,
}

impl<'a, T: Scalar> LabeledSet<'a, T> {
    pub fn new(points: &'a EmbeddingMatrix<T>, labels: &'a LabelVector) -> Result<Self> {
        if points.n() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: points.n(),
                found: labels.len(),
            });
        }
        Ok(Self { points, labels })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub trials: usize,
    /// Trial `t` uses seed `base_seed + t` for selection and training.
    pub base_seed: u64,
    /// Random initial centers of the fixed-feature ordering.
    pub seed_count: usize,
    pub metric: Metric,
    /// Proxy hyperparameters; `rng_seed` is replaced by the trial seed.
    pub train: TrainConfig,
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
    /// Results CSV to append completed rows to and resume from.
    pub journal: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            trials: 20,
            base_seed: 0,
            seed_count: 1,
            metric: Metric::SquaredL2,
            train: TrainConfig::default(),
            jobs: 0,
            journal: None,
        }
    }
}

impl SweepConfig {
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }
}

/// One method's selection, long enough for the largest budget.
pub fn method_order<T: Scalar>(
    method: Method,
    train_set: LabeledSet<'_, T>,
    schedule: &BudgetSchedule,
    cfg: &SweepConfig,
    seed: u64,
) -> Result<SelectionOrder> {
    let n = train_set.points.n();
    let max = schedule.max();
    match method {
        Method::Random => random_order(n, seed)?.truncated(max),
        Method::FixedFeature => {
            let k = cfg.seed_count;
            let order = select(
                train_set.points,
                &SelectionConfig {
                    seed_count: k,
                    rng_seed: seed,
                    metric: cfg.metric,
                    budget: Some(max.saturating_sub(k)),
                },
            )?;
            order.truncated(max)
        }
        Method::CoresetIterative => {
            let mut provider = MlpFeatureProvider {
                points: train_set.points,
                labels: train_set.labels,
                cfg: TrainConfig {
                    rng_seed: seed,
                    ..cfg.train
                },
            };
            iterative_coreset(&mut provider, &schedule.increments(), cfg.metric, seed)
        }
    }
}

/// Trains a fresh proxy on the selected points and scores it on `test`.
pub fn evaluate_selection<T: Scalar>(
    train_set: LabeledSet<'_, T>,
    test: LabeledSet<'_, T>,
    selected: &[usize],
    train_cfg: &TrainConfig,
) -> Result<f64> {
    // sorted so that equal sets train identically regardless of pick order
    let mut subset = selected.to_vec();
    subset.sort_unstable();
    let model = train(train_set.points, train_set.labels, &subset, train_cfg)?;
    accuracy(&model, test.points, test.labels)
}

struct Journal {
    path: PathBuf,
    file: Mutex<File>,
}

impl Journal {
    /// Loads completed rows (dropping anything after the first malformed
    /// line) and rewrites the file to just those rows.
    fn open(path: &Path) -> Result<(Self, Vec<SweepRow>)> {
        let io = |source| Error::IoFailure {
            path: path.to_path_buf(),
            source,
        };
        let mut rows = Vec::new();
        if let Ok(text) = fs::read_to_string(path) {
            let mut lines = text.split_inclusive('\n');
            if lines.next() == Some(&format!("{RESULTS_HEADER}\n")) {
                for line in lines {
                    match line.strip_suffix('\n').and_then(SweepRow::parse) {
                        Some(r) => rows.push(r),
                        None => break,
                    }
                }
            }
        }
        let mut text = format!("{RESULTS_HEADER}\n");
        for r in &rows {
            text.push_str(&r.csv_line());
        }
        fs::write(path, text).map_err(io)?;
        let file = OpenOptions::new().append(true).open(path).map_err(io)?;
        Ok((
            Self {
                path: path.to_path_buf(),
                file: Mutex::new(file),
            },
            rows,
        ))
    }

    fn append(&self, row: &SweepRow) -> Result<()> {
        let mut f = self.file.lock().unwrap();
        f.write_all(row.csv_line().as_bytes())
            .and_then(|_| f.flush())
            .map_err(|source| Error::IoFailure {
                path: self.path.clone(),
                source,
            })
    }
}

/// Runs every `(method, budget, trial)` cell.
///
/// The random and fixed-feature methods compute one ordering per trial and
/// evaluate its prefixes; the iterative method runs rounds sized by the
/// schedule's increments so its labelled set hits every budget exactly.
/// With a journal, completed rows are appended as they finish and rows
/// already present are not recomputed.
pub fn run_budget_sweep<T: Scalar>(
    train_set: LabeledSet<'_, T>,
    test: LabeledSet<'_, T>,
    schedule: &BudgetSchedule,
    methods: &[Method],
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods selected".into()));
    }
    if cfg.trials == 0 {
        return Err(Error::InvalidConfig("trials must be positive".into()));
    }
    cfg.train.validate()?;
    schedule.check_pool(train_set.points.n())?;
    if methods.contains(&Method::FixedFeature) && cfg.seed_count == 0 {
        return Err(Error::InvalidConfig("seed_count must be at least 1".into()));
    }
    if cfg.seed_count > train_set.points.n() {
        return Err(Error::BudgetExceedsPool {
            requested: cfg.seed_count,
            available: train_set.points.n(),
        });
    }
    if train_set.points.d() != test.points.d() {
        return Err(Error::DimensionMismatch {
            expected: train_set.points.d(),
            found: test.points.d(),
        });
    }
    let classes = train_set.labels.num_classes().max(test.labels.num_classes());
    let train_labels = train_set.labels.clone().override_num_classes(classes)?;
    let train_set = LabeledSet {
        points: train_set.points,
        labels: &train_labels,
    };

    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();

    let (journal, done) = match &cfg.journal {
        Some(p) => {
            let (j, rows) = Journal::open(p)?;
            (Some(j), rows)
        }
        None => (None, Vec::new()),
    };
    let mut completed: BTreeMap<(Method, usize, usize), SweepRow> = BTreeMap::new();
    for r in done {
        let known = methods.contains(&r.method)
            && schedule.budgets().contains(&r.budget)
            && r.trial < cfg.trials;
        if !known || r.seed != cfg.trial_seed(r.trial) {
            return Err(Error::InvalidConfig(format!(
                "journal row {:?} does not belong to this sweep",
                r.key()
            )));
        }
        completed.insert(r.key(), r);
    }

    let pending: Vec<(Method, usize)> = methods
        .iter()
        .flat_map(|&m| (0..cfg.trials).map(move |t| (m, t)))
        .filter(|&(m, t)| {
            schedule
                .budgets()
                .iter()
                .any(|&b| !completed.contains_key(&(m, b, t)))
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;

    let fresh: Vec<SweepRow> = pool.install(|| -> Result<Vec<SweepRow>> {
        let orders: Vec<((Method, usize), SelectionOrder)> = pending
            .par_iter()
            .map(|&(m, t)| Ok(((m, t), method_order(m, train_set, schedule, cfg, cfg.trial_seed(t))?)))
            .collect::<Result<_>>()?;

        let cells: Vec<(&SelectionOrder, Method, usize, usize)> = orders
            .iter()
            .flat_map(|((m, t), order)| {
                schedule
                    .budgets()
                    .iter()
                    .filter(|&&b| !completed.contains_key(&(*m, b, *t)))
                    .map(move |&b| (order, *m, b, *t))
            })
            .collect();

        cells
            .par_iter()
            .map(|&(order, method, budget, trial)| {
                let seed = cfg.trial_seed(trial);
                let tcfg = TrainConfig {
                    rng_seed: seed,
                    ..cfg.train
                };
                let acc = evaluate_selection(train_set, test, order.prefix(budget)?, &tcfg)?;
                let row = SweepRow {
                    method,
                    budget,
                    trial,
                    seed,
                    accuracy: acc,
                };
                if let Some(j) = &journal {
                    j.append(&row)?;
                }
                Ok(row)
            })
            .collect()
    })?;

    let mut rows: Vec<SweepRow> = completed.into_values().collect();
    rows.extend(fresh);
    let result = SweepResult::new(rows);
    if let Some(j) = &journal {
        write_text(&j.path, &result.results_csv())?;
    }
    Ok(result)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `results.csv` and `summary.csv` into `dir` (created if needed).
pub fn emit_report(result: &SweepResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| Error::IoFailure {
        path: dir.to_path_buf(),
        source,
    })?;
    write_text(&dir.join(RESULTS_FILE), &result.results_csv())?;
    write_text(&dir.join(SUMMARY_FILE), &result.summary_csv())
}

/// Per-class counts among the first `budget` selected points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassHistogram {
    pub counts: Vec<usize>,
    pub budget: usize,
}

impl ClassHistogram {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{HISTOGRAM_HEADER}\n");
        for (c, n) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{c},{n}");
        }
        s
    }

    pub fn share(&self, class: usize) -> f64 {
        if self.budget == 0 {
            0.0
        } else {
            self.counts[class] as f64 / self.budget as f64
        }
    }
}

pub fn class_histogram(order: &[usize], labels: &LabelVector, budget: usize) -> Result<ClassHistogram> {
    let prefix = order.get(..budget).ok_or(Error::BudgetExceedsOrder {
        budget,
        len: order.len(),
    })?;
    let mut counts = vec![0usize; labels.num_classes()];
    for &i in prefix {
        if i >= labels.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                n: labels.len(),
            });
        }
        counts[labels.get(i) as usize] += 1;
    }
    Ok(ClassHistogram { counts, budget })
}

pub fn write_histogram(h: &ClassHistogram, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &h.to_csv())
}

/// Standard deviation of a class count when `draws` of `population` points
/// are taken without replacement and `successes` belong to the class.
pub fn hypergeometric_std(population: usize, successes: usize, draws: usize) -> f64 {
    if population < 2 {
        return 0.0;
    }
    let (n, k, b) = (population as f64, successes as f64, draws as f64);
    let p = k / n;
    (b * p * (1.0 - p) * (n - b) / (n - 1.0)).sqrt()
}
