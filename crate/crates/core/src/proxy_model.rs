//! One-hidden-layer ReLU classifier trained by plain mini-batch SGD on
//! softmax cross-entropy.
//!
//! It serves two roles: test accuracy for budget sweeps, and the hidden
//! activations `ReLU(W1·x + b1)` as the learned feature space of the
//! retrain-per-round core-set baseline. Parameters are stored as `T`;
//! forward and backward passes accumulate in `f64`.

use serde::{Deserialize, Serialize};

use crate::embedding_store::{EmbeddingMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::selector::FeatureProvider;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rng_seed: u64,
    /// Hidden width.
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            learning_rate: 0.05,
            rng_seed: 0,
            hidden: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::InvalidConfig(
                "epochs, batch_size and hidden must be positive".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T: Scalar = f32> {
    d: usize,
    h: usize,
    c: usize,
    /// `h x d`, row-major.
    w1: Vec<T>,
    b1: Vec<T>,
    /// `c x h`, row-major.
    w2: Vec<T>,
    b2: Vec<T>,
}

/// Gradients of the mean batch loss, laid out like [`MlpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    fn zeros(d: usize, h: usize, c: usize) -> Self {
        Self {
            w1: vec![0.0; h * d],
            b1: vec![0.0; h],
            w2: vec![0.0; c * h],
            b2: vec![0.0; c],
        }
    }

    fn scale(&mut self, s: f64) {
        for g in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            g.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Flattened in `w1, b1, w2, b2` order.
    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .copied()
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// `-log softmax(logits)[label]` via log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Index of the largest value, lowest index on ties.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

struct Activations {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

impl<T: Scalar> MlpModel<T> {
    /// Uniform init in `±1/sqrt(fan_in)` for every weight and bias, drawn in
    /// `w1, b1, w2, b2` order.
    pub fn init(d: usize, h: usize, c: usize, rng: &mut Rng) -> Self {
        let mut draw = |len: usize, fan_in: usize| -> Vec<T> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..len).map(|_| T::narrow(rng.uniform_in(-bound, bound))).collect()
        };
        let w1 = draw(h * d, d);
        let b1 = draw(h, d);
        let w2 = draw(c * h, h);
        let b2 = draw(c, h);
        Self { d, h, c, w1, b1, w2, b2 }
    }

    /// Builds a model from explicit parameters.
    pub fn from_parts(
        d: usize,
        h: usize,
        c: usize,
        w1: Vec<T>,
        b1: Vec<T>,
        w2: Vec<T>,
        b2: Vec<T>,
    ) -> Result<Self> {
        let check = |name: &str, v: &[T], len: usize| {
            if v.len() != len {
                return Err(Error::InvalidConfig(format!(
                    "{name} has {} entries, expected {len}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} is not finite")));
            }
            Ok(())
        };
        check("w1", &w1, h * d)?;
        check("b1", &b1, h)?;
        check("w2", &w2, c * h)?;
        check("b2", &b2, c)?;
        Ok(Self { d, h, c, w1, b1, w2, b2 })
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn hidden_dim(&self) -> usize {
        self.h
    }

    pub fn num_classes(&self) -> usize {
        self.c
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }

    /// Parameters flattened in `w1, b1, w2, b2` order.
    pub fn params(&self) -> impl Iterator<Item = T> + '_ {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .copied()
    }

    fn param_mut(&mut self, mut k: usize) -> &mut T {
        for v in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            if k < v.len() {
                return &mut v[k];
            }
            k -= v.len();
        }
        panic!("parameter index out of range");
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    fn forward(&self, x: &[T]) -> Activations {
        let mut pre = Vec::with_capacity(self.h);
        for (j, w) in self.w1.chunks_exact(self.d).enumerate() {
            let mut acc = 0.0f64;
            for (wk, xk) in w.iter().zip(x) {
                acc += wk.widen() * xk.widen();
            }
            pre.push(acc + self.b1[j].widen());
        }
        let hidden: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
        let mut logits = Vec::with_capacity(self.c);
        for (k, w) in self.w2.chunks_exact(self.h).enumerate() {
            let mut acc = 0.0f64;
            for (wj, aj) in w.iter().zip(&hidden) {
                acc += wj.widen() * aj;
            }
            logits.push(acc + self.b2[k].widen());
        }
        Activations { pre, hidden, logits }
    }

    pub fn logits(&self, x: &[T]) -> Vec<f64> {
        self.forward(x).logits
    }

    pub fn predict_proba(&self, x: &[T]) -> Vec<f64> {
        softmax(&self.forward(x).logits)
    }

    /// Predicted class, lowest index on tied logits.
    pub fn predict(&self, x: &[T]) -> usize {
        argmax(&self.forward(x).logits)
    }

    /// Hidden activations of one input.
    pub fn hidden(&self, x: &[T]) -> Vec<f64> {
        self.forward(x).hidden
    }

    fn check_inputs(&self, e: &EmbeddingMatrix<T>, labels: &LabelVector) -> Result<()> {
        if e.d() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: e.d(),
            });
        }
        if labels.len() != e.n() {
            return Err(Error::DimensionMismatch {
                expected: e.n(),
                found: labels.len(),
            });
        }
        if labels.num_classes() > self.c {
            if let Some(&label) = labels.as_slice().iter().find(|&&l| l as usize >= self.c) {
                return Err(Error::LabelOutOfRange {
                    label,
                    num_classes: self.c,
                });
            }
        }
        Ok(())
    }

    /// Mean cross-entropy over `batch` and its gradient.
    pub fn loss_and_gradients(
        &self,
        e: &EmbeddingMatrix<T>,
        labels: &LabelVector,
        batch: &[usize],
    ) -> (f64, Gradients) {
        let mut g = Gradients::zeros(self.d, self.h, self.c);
        let mut loss = 0.0;
        let mut dhidden = vec![0.0f64; self.h];
        for &i in batch {
            let x = e.row(i);
            let y = labels.get(i) as usize;
            let act = self.forward(x);
            loss += cross_entropy(&act.logits, y);
            let mut dlogits = softmax(&act.logits);
            dlogits[y] -= 1.0;

            dhidden.iter_mut().for_each(|v| *v = 0.0);
            for (k, &dz) in dlogits.iter().enumerate() {
                g.b2[k] += dz;
                let row = k * self.h;
                for j in 0..self.h {
                    g.w2[row + j] += dz * act.hidden[j];
                    dhidden[j] += self.w2[row + j].widen() * dz;
                }
            }
            for j in 0..self.h {
                if act.pre[j] <= 0.0 {
                    continue;
                }
                let dz = dhidden[j];
                g.b1[j] += dz;
                let row = j * self.d;
                for (k, xk) in x.iter().enumerate() {
                    g.w1[row + k] += dz * xk.widen();
                }
            }
        }
        let inv = 1.0 / batch.len() as f64;
        g.scale(inv);
        (loss * inv, g)
    }

    /// Mean cross-entropy over `batch`.
    pub fn loss(&self, e: &EmbeddingMatrix<T>, labels: &LabelVector, batch: &[usize]) -> f64 {
        let total: f64 = batch
            .iter()
            .map(|&i| cross_entropy(&self.forward(e.row(i)).logits, labels.get(i) as usize))
            .sum();
        total / batch.len() as f64
    }

    /// `param -= lr * grad`, computed in `f64` and rounded to storage.
    pub fn sgd_step(&mut self, g: &Gradients, lr: f64) {
        let pairs = [
            (&mut self.w1, &g.w1),
            (&mut self.b1, &g.b1),
            (&mut self.w2, &g.w2),
            (&mut self.b2, &g.b2),
        ];
        for (params, grads) in pairs {
            for (p, dg) in params.iter_mut().zip(grads) {
                *p = T::narrow(p.widen() - lr * dg);
            }
        }
    }
}

/// Per-epoch mean training loss alongside the trained model.
#[derive(Debug, Clone)]
pub struct TrainReport<T: Scalar> {
    pub model: MlpModel<T>,
    /// Loss of the initial model over the subset.
    pub initial_loss: f64,
    /// Loss over the subset after each epoch.
    pub epoch_losses: Vec<f64>,
}

fn validate_subset(n: usize, labels: &LabelVector, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if let Some(&i) = subset.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    Ok(())
}

/// Trains on `subset` (indices into `e`/`labels`); deterministic given
/// `cfg.rng_seed`, which drives initialisation and then per-epoch shuffles.
pub fn train<T: Scalar>(
    e: &EmbeddingMatrix<T>,
    labels: &LabelVector,
    subset: &[usize],
    cfg: &TrainConfig,
) -> Result<MlpModel<T>> {
    train_with_report(e, labels, subset, cfg, false).map(|r| r.model)
}

/// As [`train`], additionally recording full-subset losses per epoch.
pub fn train_with_history<T: Scalar>(
    e: &EmbeddingMatrix<T>,
    labels: &LabelVector,
    subset: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainReport<T>> {
    train_with_report(e, labels, subset, cfg, true)
}

fn train_with_report<T: Scalar>(
    e: &EmbeddingMatrix<T>,
    labels: &LabelVector,
    subset: &[usize],
    cfg: &TrainConfig,
    record: bool,
) -> Result<TrainReport<T>> {
    cfg.validate()?;
    validate_subset(e.n(), labels, subset)?;
    let mut rng = Rng::new(cfg.rng_seed);
    let mut model = MlpModel::init(e.d(), cfg.hidden, labels.num_classes(), &mut rng);
    model.check_inputs(e, labels)?;

    let initial_loss = if record { model.loss(e, labels, subset) } else { f64::NAN };
    let mut epoch_losses = Vec::new();
    let mut order = subset.to_vec();
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            let (_, g) = model.loss_and_gradients(e, labels, batch);
            model.sgd_step(&g, cfg.learning_rate);
        }
        if !model.is_finite() {
            return Err(Error::TrainerFailure(format!(
                "parameters became non-finite in epoch {epoch}"
            )));
        }
        if record {
            epoch_losses.push(model.loss(e, labels, subset));
        }
    }
    Ok(TrainReport {
        model,
        initial_loss,
        epoch_losses,
    })
}

/// Row `i` is `ReLU(W1·x_i + b1)`.
pub fn extract_features<T: Scalar>(m: &MlpModel<T>, e: &EmbeddingMatrix<T>) -> Result<EmbeddingMatrix<T>> {
    if e.d() != m.d {
        return Err(Error::DimensionMismatch {
            expected: m.d,
            found: e.d(),
        });
    }
    let mut data = Vec::with_capacity(e.n() * m.h);
    for x in e.rows() {
        data.extend(m.hidden(x).into_iter().map(T::narrow));
    }
    EmbeddingMatrix::new(e.n(), m.h, data)
}

/// Fraction of `indices` whose predicted class equals the label.
pub fn accuracy_on<T: Scalar>(
    m: &MlpModel<T>,
    e: &EmbeddingMatrix<T>,
    labels: &LabelVector,
    indices: &[usize],
) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    if e.d() != m.d {
        return Err(Error::DimensionMismatch {
            expected: m.d,
            found: e.d(),
        });
    }
    if labels.len() != e.n() {
        return Err(Error::DimensionMismatch {
            expected: e.n(),
            found: labels.len(),
        });
    }
    let mut correct = 0usize;
    for &i in indices {
        if i >= e.n() {
            return Err(Error::IndexOutOfRange { index: i, n: e.n() });
        }
        if m.predict(e.row(i)) == labels.get(i) as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / indices.len() as f64)
}

/// Accuracy over every point of `e`.
pub fn accuracy<T: Scalar>(m: &MlpModel<T>, e: &EmbeddingMatrix<T>, labels: &LabelVector) -> Result<f64> {
    let all: Vec<usize> = (0..e.n()).collect();
    accuracy_on(m, e, labels, &all)
}

/// Trains a fresh model on each labelled set and exposes its hidden layer as
/// the feature space of every point.
pub struct MlpFeatureProvider<'a, T: Scalar> {
    pub points: &'a EmbeddingMatrix<T>,
    pub labels: &'a LabelVector,
    pub cfg: TrainConfig,
}

impl<T: Scalar> FeatureProvider<T> for MlpFeatureProvider<'_, T> {
    fn num_points(&self) -> usize {
        self.points.n()
    }

    fn features(&mut self, labeled: &[usize]) -> Result<EmbeddingMatrix<T>> {
        let mut subset = labeled.to_vec();
        subset.sort_unstable();
        let model = train(self.points, self.labels, &subset, &self.cfg)?;
        extract_features(&model, self.points)
    }
}

/// Small labelled instance for gradient checking.
#[derive(Debug, Clone)]
pub struct Probe {
    pub points: EmbeddingMatrix<f64>,
    pub labels: LabelVector,
}

impl Probe {
    /// Random probe with `n ≤ 10` points, `d ≤ 5`, and `classes ≥ 2`.
    pub fn random(n: usize, d: usize, classes: usize, rng_seed: u64) -> Result<Self> {
        if n == 0 || n > 10 || d == 0 || d > 5 || classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "probe must have 1..=10 points, 1..=5 dims, >=2 classes (got {n}, {d}, {classes})"
            )));
        }
        let mut rng = Rng::new(rng_seed);
        let data = (0..n * d).map(|_| rng.normal()).collect();
        let labels: Vec<u32> = (0..n).map(|_| rng.below(classes as u64) as u32).collect();
        Ok(Self {
            points: EmbeddingMatrix::new(n, d, data)?,
            labels: LabelVector::with_num_classes(labels, classes)?,
        })
    }
}

/// Central finite-difference step.
pub const GRADIENT_CHECK_STEP: f64 = 1e-4;
/// Gradients smaller than this are compared absolutely rather than relatively.
const GRADIENT_CHECK_FLOOR: f64 = 1e-6;

/// Max relative error between analytic and central-difference gradients of
/// the mean probe loss, over every parameter of a model initialised from
/// `cfg` (`cfg.hidden ≤ 4`).
///
/// Coordinates whose ±step perturbation flips the sign of some hidden
/// pre-activation straddle a ReLU kink, where the finite difference is not a
/// derivative estimate; they are skipped.
pub fn gradient_check(cfg: &TrainConfig, probe: &Probe) -> Result<f64> {
    if cfg.hidden > 4 {
        return Err(Error::InvalidConfig("gradient check needs hidden <= 4".into()));
    }
    let mut rng = Rng::new(cfg.rng_seed);
    let model: MlpModel<f64> =
        MlpModel::init(probe.points.d(), cfg.hidden, probe.labels.num_classes(), &mut rng);
    let batch: Vec<usize> = (0..probe.points.n()).collect();
    let (_, analytic) = model.loss_and_gradients(&probe.points, &probe.labels, &batch);

    let signs = |m: &MlpModel<f64>| -> Vec<bool> {
        probe
            .points
            .rows()
            .flat_map(|x| m.forward(x).pre.into_iter().map(|z| z > 0.0))
            .collect()
    };

    let mut worst = 0.0f64;
    for (k, a) in analytic.flat().enumerate() {
        let mut plus = model.clone();
        *plus.param_mut(k) += GRADIENT_CHECK_STEP;
        let mut minus = model.clone();
        *minus.param_mut(k) -= GRADIENT_CHECK_STEP;
        if signs(&plus) != signs(&minus) {
            continue;
        }
        let lp = plus.loss(&probe.points, &probe.labels, &batch);
        let lm = minus.loss(&probe.points, &probe.labels, &batch);
        let numeric = (lp - lm) / (2.0 * GRADIENT_CHECK_STEP);
        let denom = a.abs().max(numeric.abs()).max(GRADIENT_CHECK_FLOOR);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
