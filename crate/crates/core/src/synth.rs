//! Labelled Gaussian-mixture datasets.
//!
//! Draw order from one [`Rng`] seeded with `rng_seed`:
//!
//! 1. centers, when not given: per class, `d` normals normalised to a unit
//!    direction and scaled by `separation`;
//! 2. points, class by class in class order, each coordinate
//!    `center + std_c * normal()`; when `sample_seed` is set these draws
//!    (and step 3) come from a fresh stream seeded with it instead;
//! 3. a Fisher–Yates shuffle of the point order.
//!
//! Train/test splits share the centers; the test points come from a
//! sibling sample stream.

use serde::{Deserialize, Serialize};

use crate::embedding_store::{EmbeddingMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub num_classes: usize,
    pub per_class_counts: Vec<usize>,
    pub d: usize,
    /// Explicit `C x d` centers; drawn on the unit sphere times
    /// `separation` when absent.
    #[serde(default)]
    pub centers: Option<Vec<Vec<f64>>>,
    /// One isotropic std per class.
    pub stds: Vec<f64>,
    #[serde(default)]
    pub separation: f64,
    #[serde(default)]
    pub rng_seed: u64,
    /// Separate stream for the point draws; lets sibling datasets share
    /// centers.
    #[serde(default)]
    pub sample_seed: Option<u64>,
}

impl MixtureSpec {
    /// `num_classes` equal classes with a shared std and random centers.
    pub fn balanced(num_classes: usize, per_class: usize, d: usize, separation: f64, std: f64, rng_seed: u64) -> Self {
        Self {
            num_classes,
            per_class_counts: vec![per_class; num_classes],
            d,
            centers: None,
            stds: vec![std; num_classes],
            separation,
            rng_seed,
            sample_seed: None,
        }
    }

    pub fn total(&self) -> usize {
        self.per_class_counts.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_classes == 0 {
            return bad("num_classes must be positive".into());
        }
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        if self.per_class_counts.len() != self.num_classes {
            return bad(format!(
                "{} per-class counts for {} classes",
                self.per_class_counts.len(),
                self.num_classes
            ));
        }
        if self.per_class_counts.contains(&0) {
            return bad("every class count must be at least 1".into());
        }
        if self.stds.len() != self.num_classes {
            return bad(format!("{} stds for {} classes", self.stds.len(), self.num_classes));
        }
        if self.stds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("stds must be finite and positive".into());
        }
        if !(self.separation.is_finite() && self.separation >= 0.0) {
            return bad("separation must be finite and non-negative".into());
        }
        if let Some(c) = &self.centers {
            if c.len() != self.num_classes || c.iter().any(|row| row.len() != self.d) {
                return bad(format!("centers must be {} x {}", self.num_classes, self.d));
            }
            if c.iter().flatten().any(|v| !v.is_finite()) {
                return bad("centers must be finite".into());
            }
        }
        Ok(())
    }

    /// Same mixture with the point draws taken from `sample_seed`.
    pub fn with_sample_seed(&self, sample_seed: u64) -> Self {
        Self {
            sample_seed: Some(sample_seed),
            ..self.clone()
        }
    }
}

/// A generated dataset plus the centers it was drawn around.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub points: EmbeddingMatrix<f32>,
    pub labels: LabelVector,
    pub centers: Vec<Vec<f64>>,
}

fn draw_centers(spec: &MixtureSpec, rng: &mut Rng) -> Vec<Vec<f64>> {
    if let Some(c) = &spec.centers {
        return c.clone();
    }
    (0..spec.num_classes)
        .map(|_| loop {
            let v: Vec<f64> = (0..spec.d).map(|_| rng.normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break v.iter().map(|x| x / norm * spec.separation).collect();
            }
        })
        .collect()
}

pub fn generate(spec: &MixtureSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = Rng::new(spec.rng_seed);
    let centers = draw_centers(spec, &mut rng);
    if let Some(s) = spec.sample_seed {
        rng = Rng::new(s);
    }

    let n = spec.total();
    let mut rows: Vec<(u32, Vec<f32>)> = Vec::with_capacity(n);
    for (class, (&count, &std)) in spec.per_class_counts.iter().zip(&spec.stds).enumerate() {
        let center = &centers[class];
        for _ in 0..count {
            let x = center.iter().map(|&m| (m + std * rng.normal()) as f32).collect();
            rows.push((class as u32, x));
        }
    }
    rng.shuffle(&mut rows);

    let mut data = Vec::with_capacity(n * spec.d);
    let mut labels = Vec::with_capacity(n);
    for (label, x) in rows {
        labels.push(label);
        data.extend(x);
    }
    Ok(Dataset {
        points: EmbeddingMatrix::new(n, spec.d, data)?,
        labels: LabelVector::with_num_classes(labels, spec.num_classes)?,
        centers,
    })
}

/// Train/test draws around the same centers. The train half is exactly
/// `generate(spec)`; the test half draws its points from a fresh stream
/// seeded with `sample_seed + 1` (or `rng_seed + 1` when unset).
pub fn generate_split(spec: &MixtureSpec) -> Result<(Dataset, Dataset)> {
    let sibling = spec.sample_seed.unwrap_or(spec.rng_seed).wrapping_add(1);
    let train = generate(spec)?;
    let test = generate(&spec.with_sample_seed(sibling))?;
    Ok((train, test))
}

/// Ten equal classes, 100 points each, `d = 16`, separation 6, std 1.
pub fn default_suite(rng_seed: u64) -> MixtureSpec {
    MixtureSpec::balanced(10, 100, 16, 6.0, 1.0, rng_seed)
}

/// Ten classes where class 0 holds 5% of the points with three times the
/// spread of the others.
pub fn imbalanced_suite(total: usize, rng_seed: u64) -> MixtureSpec {
    let hard = (total as f64 * 0.05).round().max(1.0) as usize;
    let rest = total - hard;
    let mut counts = vec![hard];
    counts.extend((0..9).map(|i| rest / 9 + usize::from(i < rest % 9)));
    let mut stds = vec![3.0];
    stds.extend([1.0; 9]);
    MixtureSpec {
        num_classes: 10,
        per_class_counts: counts,
        d: 16,
        centers: None,
        stds,
        separation: 6.0,
        rng_seed,
        sample_seed: None,
    }
}
