//! Labelled feature matrices and the seeded Gaussian-blob generator.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::attacks::attack_labelflip;
use crate::rng::{normal, stream, Purpose};
use crate::{Error, Result};

/// Row-major feature matrix with one integer label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dim: usize, num_classes: usize) -> Result<Self> {
        if dim == 0 || num_classes == 0 {
            return Err(Error::Precondition(format!(
                "dataset needs positive dimensions, got p = {dim}, C = {num_classes}"
            )));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::LengthMismatch {
                what: "features vs labels * dim",
                left: features.len(),
                right: labels.len() * dim,
            });
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Precondition(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            dim,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature dimension `p`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label_histogram(&self) -> Vec<usize> {
        let mut hist = alloc::vec![0; self.num_classes];
        for &l in &self.labels {
            hist[l] += 1;
        }
        hist
    }

    /// Copy with every label `l` replaced by `C - 1 - l`.
    pub fn label_flipped(&self) -> Self {
        let labels = self
            .labels
            .iter()
            .map(|&l| attack_labelflip(l, self.num_classes).unwrap_or(l))
            .collect();
        Self {
            labels,
            ..self.clone()
        }
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.sample(i));
            labels.push(self.labels[i]);
        }
        Self {
            features,
            labels,
            dim: self.dim,
            num_classes: self.num_classes,
        }
    }
}

/// Parameters of the synthetic classification task.
///
/// Class `c` has mean `offset · 1 + spread · z_c` with `z_c ~ N(0, I)`,
/// and samples add isotropic Gaussian noise of std `noise`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DataSpec {
    pub features: usize,
    pub classes: usize,
    /// Training samples per node; the pool is split evenly.
    pub samples_per_node: usize,
    pub test_samples: usize,
    pub offset: f64,
    pub spread: f64,
    pub noise: f64,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            features: 20,
            classes: 10,
            samples_per_node: 200,
            test_samples: 1000,
            offset: 2.0,
            spread: 5.0,
            noise: 2.0,
        }
    }
}

impl DataSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| {
            Err(Error::InvalidConfig {
                field,
                reason: reason.into(),
            })
        };
        if self.features == 0 {
            return bad("features", "must be positive");
        }
        if self.classes < 2 {
            return bad("classes", "need at least two classes");
        }
        if self.samples_per_node == 0 {
            return bad("samples_per_node", "must be positive");
        }
        if self.test_samples == 0 {
            return bad("test_samples", "must be positive");
        }
        if !self.offset.is_finite() {
            return bad("offset", "must be finite");
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            return bad("spread", "must be non-negative");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise", "must be non-negative");
        }
        Ok(())
    }
}

/// Per-node training shards plus the shared test set.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub shards: Vec<Dataset>,
    pub test: Dataset,
    pub class_means: Vec<Vec<f64>>,
}

fn draw_balanced(
    count: usize,
    means: &[Vec<f64>],
    noise: f64,
    rng: &mut crate::rng::StreamRng,
) -> (Vec<f64>, Vec<usize>) {
    let classes = means.len();
    let mut labels: Vec<usize> = (0..count).map(|i| i % classes).collect();
    labels.shuffle(rng);
    let mut features = Vec::with_capacity(count * means[0].len());
    for &l in &labels {
        features.extend(means[l].iter().map(|&m| normal(rng, m, noise)));
    }
    (features, labels)
}

/// Generates `nodes` IID shards of `spec.samples_per_node` samples each
/// and a balanced test set, all from `seed`.
pub fn gen_synthetic(spec: &DataSpec, nodes: usize, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    if nodes == 0 {
        return Err(Error::Precondition("need at least one node".into()));
    }
    let p = spec.features;
    let mut rng = stream(seed, 0, 0, Purpose::Data);
    let class_means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..p).map(|_| normal(&mut rng, spec.offset, spec.spread)).collect())
        .collect();

    let total = spec.samples_per_node * nodes;
    let (pool_x, pool_y) = draw_balanced(total, &class_means, spec.noise, &mut rng);
    let shards = (0..nodes)
        .map(|i| {
            let range = i * spec.samples_per_node..(i + 1) * spec.samples_per_node;
            Dataset::new(
                pool_x[range.start * p..range.end * p].to_vec(),
                pool_y[range].to_vec(),
                p,
                spec.classes,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut test_rng = stream(seed, 0, 1, Purpose::Data);
    let (test_x, test_y) = draw_balanced(spec.test_samples, &class_means, spec.noise, &mut test_rng);
    let test = Dataset::new(test_x, test_y, p, spec.classes)?;
    Ok(SyntheticData {
        shards,
        test,
        class_means,
    })
}

/// Splits `data` into `nodes` contiguous shards whose sizes differ by at
/// most one.
pub fn split_even(data: &Dataset, nodes: usize) -> Result<Vec<Dataset>> {
    if data.len() < nodes || nodes == 0 {
        return Err(Error::Precondition(format!(
            "cannot split {} samples across {nodes} nodes",
            data.len()
        )));
    }
    let base = data.len() / nodes;
    let extra = data.len() % nodes;
    let mut start = 0;
    Ok((0..nodes)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let idx: Vec<usize> = (start..start + len).collect();
            start += len;
            data.subset(&idx)
        })
        .collect())
}
