//! The three non-IID partitioning schemes: pathological (fixed classes per
//! client), Dirichlet label skew, and grouped "practical" skew with
//! dominant class blocks.
//!
//! All schemes are deterministic functions of `(dataset, parameters, seed)`.
//! Pathological partitioning assigns globally disjoint sample indices and
//! fails loudly when a class runs dry. Dirichlet and practical sample
//! without replacement from global per-class pools while possible and fall
//! back to cross-client reuse when a pool is exhausted (recorded in the
//! spec); indices within one client are always distinct.

use super::{largest_remainder, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng::stream;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Which scheme produced a partition, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionScheme {
    Pathological {
        classes_per_client: usize,
    },
    Dirichlet {
        alpha: f64,
    },
    Practical {
        groups: usize,
        dominant_classes_per_group: usize,
        dominant_fraction: f64,
    },
}

/// One client's sample assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientIndices {
    pub id: usize,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// A full per-client assignment of dataset indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub scheme: PartitionScheme,
    pub seed: u64,
    pub clients: Vec<ClientIndices>,
    /// True when some class pool was exhausted and samples were reused
    /// across clients.
    #[serde(default)]
    pub replacement_fallback: bool,
}

/// Shuffled per-class index queues for train and (optionally separate) test
/// draws. Queues are popped from the back.
struct Pools {
    train: Vec<Vec<usize>>,
    /// Present only when the dataset has a designated test split; otherwise
    /// test draws share the train queues.
    test: Option<Vec<Vec<usize>>>,
    /// Full per-class index lists, for the exhaustion fallback.
    full_train: Vec<Vec<usize>>,
    full_test: Option<Vec<Vec<usize>>>,
    fallback_used: bool,
}

impl Pools {
    fn build(ds: &LabeledDataset, seed: u64) -> Pools {
        let mut rng = stream(seed, &[0x70]);
        let (train_range, test_range) = match ds.designated_test_start() {
            Some(s) => (0..s, Some(s..ds.len())),
            None => (0..ds.len(), None),
        };
        let mut train = ds.class_indices(train_range);
        for pool in &mut train {
            pool.shuffle(&mut rng);
        }
        let full_train = train.clone();
        let (test, full_test) = match test_range {
            Some(r) => {
                let mut t = ds.class_indices(r);
                for pool in &mut t {
                    pool.shuffle(&mut rng);
                }
                let full = t.clone();
                (Some(t), Some(full))
            }
            None => (None, None),
        };
        Pools {
            train,
            test,
            full_train,
            full_test,
            fallback_used: false,
        }
    }

    fn draw(
        &mut self,
        class: usize,
        count: usize,
        for_test: bool,
        taken: &mut HashSet<usize>,
        allow_fallback: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>> {
        let (queue, full) = if for_test && self.test.is_some() {
            (
                &mut self.test.as_mut().unwrap()[class],
                &self.full_test.as_ref().unwrap()[class],
            )
        } else {
            (&mut self.train[class], &self.full_train[class])
        };
        let mut out = Vec::with_capacity(count);
        let mut misses = 0usize;
        while out.len() < count {
            match queue.pop() {
                Some(idx) => {
                    if taken.insert(idx) {
                        out.push(idx);
                        misses = 0;
                    } else {
                        misses += 1;
                        if misses > full.len() {
                            return Err(Error::Dataset(format!(
                                "class {class} has only {} distinct samples; a client needs more",
                                full.len()
                            )));
                        }
                    }
                }
                None => {
                    if !allow_fallback {
                        return Err(Error::Dataset(format!(
                            "class {class} exhausted: not enough samples to satisfy all clients"
                        )));
                    }
                    if full.is_empty() {
                        return Err(Error::Dataset(format!(
                            "class {class} has no samples in the eligible pool"
                        )));
                    }
                    let mut refill = full.clone();
                    refill.shuffle(rng);
                    *queue = refill;
                    self.fallback_used = true;
                }
            }
        }
        Ok(out)
    }
}

/// Draw one client's train and test indices given per-class train counts.
/// Test counts are scaled from the train counts by largest remainder so the
/// two shards share one label distribution.
fn draw_client(
    pools: &mut Pools,
    id: usize,
    train_counts: &[usize],
    test_per_client: usize,
    allow_fallback: bool,
    rng: &mut ChaCha8Rng,
) -> Result<ClientIndices> {
    let weights: Vec<f64> = train_counts.iter().map(|&c| c as f64).collect();
    let test_counts = largest_remainder(&weights, test_per_client);
    let mut taken = HashSet::new();
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for (class, &n) in train_counts.iter().enumerate() {
        if n > 0 {
            train_indices.extend(pools.draw(class, n, false, &mut taken, allow_fallback, rng)?);
        }
    }
    for (class, &n) in test_counts.iter().enumerate() {
        if n > 0 {
            test_indices.extend(pools.draw(class, n, true, &mut taken, allow_fallback, rng)?);
        }
    }
    Ok(ClientIndices {
        id,
        train_indices,
        test_indices,
    })
}

/// Split `total` into `parts` integers differing by at most one, larger
/// counts first.
fn even_split(total: usize, parts: usize) -> Vec<usize> {
    let base = total / parts;
    let rem = total % parts;
    (0..parts).map(|i| base + usize::from(i < rem)).collect()
}

/// Each client holds exactly `classes_per_client` classes with equal
/// per-class sample counts (up to one). The class permutation is seeded and
/// clients cycle through it, so for `n_clients * classes_per_client`
/// divisible by the class count every class lands on the same number of
/// clients. Sample indices are globally disjoint.
pub fn partition_pathological(
    ds: &LabeledDataset,
    n_clients: usize,
    classes_per_client: usize,
    train_per_client: usize,
    test_per_client: usize,
    seed: u64,
) -> Result<PartitionSpec> {
    let c = ds.num_classes();
    if n_clients == 0 {
        return Err(Error::InvalidConfig("n_clients must be >= 1".into()));
    }
    if classes_per_client == 0 || classes_per_client > c {
        return Err(Error::InvalidConfig(format!(
            "classes_per_client must be in 1..={c}, got {classes_per_client}"
        )));
    }
    let mut pools = Pools::build(ds, seed);
    let mut assign_rng = stream(seed, &[0x71]);
    let mut perm: Vec<usize> = (0..c).collect();
    perm.shuffle(&mut assign_rng);

    let mut clients = Vec::with_capacity(n_clients);
    for k in 0..n_clients {
        let classes: Vec<usize> = (0..classes_per_client)
            .map(|r| perm[(k * classes_per_client + r) % c])
            .collect();
        let per_class_train = even_split(train_per_client, classes_per_client);
        let mut train_counts = vec![0usize; c];
        for (slot, &cls) in classes.iter().enumerate() {
            train_counts[cls] += per_class_train[slot];
        }
        let mut draw_rng = stream(seed, &[0x72, k as u64]);
        clients.push(draw_client(
            &mut pools,
            k,
            &train_counts,
            test_per_client,
            false,
            &mut draw_rng,
        )?);
    }
    Ok(PartitionSpec {
        scheme: PartitionScheme::Pathological { classes_per_client },
        seed,
        clients,
        replacement_fallback: pools.fallback_used,
    })
}

/// Sample a Dirichlet vector with concentration `alpha / C` per class (the
/// uniform prior scaled by `alpha`) via per-class Gamma draws. When every
/// Gamma draw underflows to zero — the concentration is far below one — the
/// limiting distribution is a point mass on a uniformly chosen class.
fn sample_dirichlet(num_classes: usize, alpha: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let shape = alpha / num_classes as f64;
    let gamma = Gamma::new(shape, 1.0).expect("shape > 0 validated by caller");
    let draws: Vec<f64> = (0..num_classes).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        draws.into_iter().map(|g| g / sum).collect()
    } else {
        let mut q = vec![0.0; num_classes];
        q[rng.random_range(0..num_classes)] = 1.0;
        q
    }
}

/// Per client, class proportions `q ~ Dir(alpha * uniform)`; train and test
/// counts are both rounded from `q` by largest remainder.
pub fn partition_dirichlet(
    ds: &LabeledDataset,
    n_clients: usize,
    alpha: f64,
    train_per_client: usize,
    test_per_client: usize,
    seed: u64,
) -> Result<PartitionSpec> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "partition.alpha must be > 0, got {alpha}"
        )));
    }
    if n_clients == 0 {
        return Err(Error::InvalidConfig("n_clients must be >= 1".into()));
    }
    let c = ds.num_classes();
    let mut pools = Pools::build(ds, seed);
    let mut clients = Vec::with_capacity(n_clients);
    for k in 0..n_clients {
        let mut rng = stream(seed, &[0x73, k as u64]);
        let q = sample_dirichlet(c, alpha, &mut rng);
        let train_counts = largest_remainder(&q, train_per_client);
        clients.push(draw_client(
            &mut pools,
            k,
            &train_counts,
            test_per_client,
            true,
            &mut rng,
        )?);
    }
    Ok(PartitionSpec {
        scheme: PartitionScheme::Dirichlet { alpha },
        seed,
        clients,
        replacement_fallback: pools.fallback_used,
    })
}

/// Grouped skew: clients are split into groups as evenly as possible
/// (remainder going to the last group), group `g` dominates the consecutive
/// class block `[g*k, (g+1)*k)`, and each client draws `dominant_fraction`
/// of its budget uniformly from its dominant block and the rest uniformly
/// from the other classes.
pub fn partition_practical(
    ds: &LabeledDataset,
    n_clients: usize,
    n_groups: usize,
    dominant_classes_per_group: usize,
    dominant_fraction: f64,
    train_per_client: usize,
    test_per_client: usize,
    seed: u64,
) -> Result<PartitionSpec> {
    let c = ds.num_classes();
    if n_groups == 0 || dominant_classes_per_group == 0 {
        return Err(Error::InvalidConfig(
            "partition.groups and dominant classes per group must be >= 1".into(),
        ));
    }
    if n_groups * dominant_classes_per_group > c {
        return Err(Error::InvalidConfig(format!(
            "{n_groups} groups x {dominant_classes_per_group} dominant classes exceed {c} classes"
        )));
    }
    if !(0.0..=1.0).contains(&dominant_fraction) {
        return Err(Error::InvalidConfig(format!(
            "partition.dominant_fraction must be in [0, 1], got {dominant_fraction}"
        )));
    }
    if n_clients == 0 {
        return Err(Error::InvalidConfig("n_clients must be >= 1".into()));
    }
    if n_groups > n_clients {
        return Err(Error::InvalidConfig(format!(
            "{n_groups} groups for only {n_clients} clients"
        )));
    }

    // First G-1 groups take floor(N/G) clients, the last takes the rest.
    let base = n_clients / n_groups;
    let mut group_of = Vec::with_capacity(n_clients);
    for g in 0..n_groups {
        let size = if g + 1 == n_groups {
            n_clients - base * (n_groups - 1)
        } else {
            base
        };
        group_of.extend(std::iter::repeat(g).take(size));
    }

    let dominant_count = (dominant_fraction * train_per_client as f64).round() as usize;
    let dominant_count = dominant_count.min(train_per_client);
    let other_count = train_per_client - dominant_count;

    let mut pools = Pools::build(ds, seed);
    let mut clients = Vec::with_capacity(n_clients);
    for (k, &g) in group_of.iter().enumerate() {
        let block: Vec<usize> =
            (g * dominant_classes_per_group..(g + 1) * dominant_classes_per_group).collect();
        let others: Vec<usize> = (0..c).filter(|cls| !block.contains(cls)).collect();
        if other_count > 0 && others.is_empty() {
            return Err(Error::InvalidConfig(
                "no non-dominant classes left for the non-dominant share".into(),
            ));
        }
        let mut rng = stream(seed, &[0x74, k as u64]);
        let mut train_counts = vec![0usize; c];
        for _ in 0..dominant_count {
            train_counts[block[rng.random_range(0..block.len())]] += 1;
        }
        for _ in 0..other_count {
            train_counts[others[rng.random_range(0..others.len())]] += 1;
        }
        clients.push(draw_client(
            &mut pools,
            k,
            &train_counts,
            test_per_client,
            true,
            &mut rng,
        )?);
    }
    Ok(PartitionSpec {
        scheme: PartitionScheme::Practical {
            groups: n_groups,
            dominant_classes_per_group,
            dominant_fraction,
        },
        seed,
        clients,
        replacement_fallback: pools.fallback_used,
    })
}
