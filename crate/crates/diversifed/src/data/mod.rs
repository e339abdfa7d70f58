//! Labeled dataset sources and non-IID partitioning.
//!
//! A [`LabeledDataset`] is a flat pool of feature rows with class labels,
//! optionally split into a training region and a designated test region
//! (real datasets keep their published test split; synthetic pools hold
//! test samples out of the same pool). Partitioners assign disjoint
//! per-client train/test index lists into the pool.

mod idx;
mod partition;
mod synth;

pub use idx::{load_idx, load_idx_with_test};
pub use partition::{
    partition_dirichlet, partition_pathological, partition_practical, ClientIndices,
    PartitionScheme, PartitionSpec,
};
pub use synth::synth_blobs;

use crate::error::{Error, Result};
use crate::neural::Batch;
use crate::param::ClientId;

/// A labeled pool of samples: `len x feature_dim` inputs in `[0, 1]`-ish
/// range with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    inputs: Vec<f64>,
    feature_dim: usize,
    labels: Vec<usize>,
    num_classes: usize,
    /// Index of the first sample of the designated test split, when the
    /// source provides one. Samples before it are train-eligible, samples
    /// from it onward are test-eligible.
    designated_test_start: Option<usize>,
}

impl LabeledDataset {
    pub fn new(
        inputs: Vec<f64>,
        feature_dim: usize,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if feature_dim == 0 || inputs.len() % feature_dim != 0 {
            return Err(Error::Dataset(format!(
                "inputs of len {} not divisible into rows of {feature_dim}",
                inputs.len()
            )));
        }
        if inputs.len() / feature_dim != labels.len() {
            return Err(Error::Dataset(format!(
                "{} input rows but {} labels",
                inputs.len() / feature_dim,
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Dataset(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(LabeledDataset {
            inputs,
            feature_dim,
            labels,
            num_classes,
            designated_test_start: None,
        })
    }

    /// Concatenate a train pool and its published test split into one pool
    /// with a designated test region.
    pub fn with_test_split(train: LabeledDataset, test: LabeledDataset) -> Result<Self> {
        if train.feature_dim != test.feature_dim {
            return Err(Error::Dataset(format!(
                "train feature dim {} != test feature dim {}",
                train.feature_dim, test.feature_dim
            )));
        }
        let split = train.len();
        let mut inputs = train.inputs;
        inputs.extend(test.inputs);
        let mut labels = train.labels;
        labels.extend(test.labels);
        Ok(LabeledDataset {
            inputs,
            feature_dim: train.feature_dim,
            labels,
            num_classes: train.num_classes.max(test.num_classes),
            designated_test_start: Some(split),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn designated_test_start(&self) -> Option<usize> {
        self.designated_test_start
    }

    /// Per-class sample indices within `range`.
    pub(crate) fn class_indices(&self, range: std::ops::Range<usize>) -> Vec<Vec<usize>> {
        let mut pools = vec![Vec::new(); self.num_classes];
        for i in range {
            pools[self.labels[i]].push(i);
        }
        pools
    }
}

/// Gather one client's train and test shards from a partition spec.
/// Rows appear in ascending global-index order.
pub fn materialize(
    ds: &LabeledDataset,
    spec: &PartitionSpec,
    client: ClientId,
) -> Result<(Batch, Batch)> {
    let entry = spec
        .clients
        .iter()
        .find(|c| c.id == client)
        .ok_or(Error::UnknownClient(client))?;
    let gather = |indices: &[usize]| -> Result<Batch> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        let mut inputs = Vec::with_capacity(sorted.len() * ds.feature_dim);
        let mut labels = Vec::with_capacity(sorted.len());
        for &i in &sorted {
            if i >= ds.len() {
                return Err(Error::Dataset(format!(
                    "index {i} out of range for dataset of {}",
                    ds.len()
                )));
            }
            inputs.extend_from_slice(ds.row(i));
            labels.push(ds.labels[i]);
        }
        Batch::new(inputs, ds.feature_dim, labels)
    };
    Ok((gather(&entry.train_indices)?, gather(&entry.test_indices)?))
}

/// Round fractional class quotas to integers summing to `total`: floor each
/// quota, then hand out the remainder by largest fractional part, ties going
/// to the lower class index.
pub(crate) fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if total == 0 || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &c in order.iter().take(total - assigned) {
        counts[c] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn largest_remainder_exact_total_and_tie_break() {
        let counts = largest_remainder(&[1.0, 1.0, 1.0], 100);
        assert_eq!(counts.iter().sum::<usize>(), 100);
        // 33.33 each; remainder 1 goes to the lowest class index.
        assert_eq!(counts, vec![34, 33, 33]);
    }

    #[test]
    fn largest_remainder_respects_weights() {
        let counts = largest_remainder(&[0.8, 0.2, 0.0], 10);
        assert_eq!(counts, vec![8, 2, 0]);
    }

    #[test]
    fn dataset_validation() {
        assert!(LabeledDataset::new(vec![1.0, 2.0, 3.0], 2, vec![0], 2).is_err());
        assert!(LabeledDataset::new(vec![1.0, 2.0], 2, vec![5], 2).is_err());
        let ds = LabeledDataset::new(vec![1.0, 2.0, 3.0, 4.0], 2, vec![0, 1], 2).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.row(1), &[3.0, 4.0]);
    }
}
