//! Round-loop engines: the pull/push protocol, the FedAvg and Separate
//! baselines, and the frozen-snapshot pairwise pull/push toy experiment.
//!
//! One round of the main protocol: participants train locally (proximally
//! toward their stored anchor, plainly if they have none), upload their
//! models, and the server recomputes each participant's anchor with one
//! distance-loss gradient step over the round's pool. Anchors are kept per
//! client from the last round they participated in; a client that has never
//! participated trains plainly. When every combination weight for a center
//! vanishes (two-member pools, fully guarded pairs) the server stores no
//! anchor: such an anchor carries no information from other clients and the
//! proximal pull would only tether the client to its own round-start point.
//!
//! Per-client RNG streams are derived from `(seed, client, round, epoch)`,
//! never from execution order, so reports are identical under any worker
//! scheduling.

use crate::client::{initial_train_loss, local_update, local_update_with_extra_grad, ClientHyper, ClientState};
use crate::data::{
    load_idx, load_idx_with_test, materialize, partition_dirichlet, partition_pathological,
    partition_practical, synth_blobs, LabeledDataset, PartitionSpec,
};
use crate::distance::{combination_weights, server_step, ServerHyper};
use crate::error::{Error, Result};
use crate::neural::{evaluate_accuracy, init_params, AdamState, MlpSpec};
use crate::param::{ClientId, ModelPool, ParamVector};
use crate::rng::{derive_seed, stream, tags};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::time::Instant;

/// Training method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Diversifed,
    Fedavg,
    Separate,
    ToyPullpush,
}

impl Method {
    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "diversifed" => Ok(Method::Diversifed),
            "fedavg" => Ok(Method::Fedavg),
            "separate" => Ok(Method::Separate),
            "toy_pullpush" => Ok(Method::ToyPullpush),
            other => Err(Error::InvalidConfig(format!(
                "method must be diversifed|fedavg|separate|toy_pullpush, got {other}"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Diversifed => "diversifed",
            Method::Fedavg => "fedavg",
            Method::Separate => "separate",
            Method::ToyPullpush => "toy_pullpush",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKind {
    Pathological,
    Dirichlet,
    Practical,
}

impl PartitionKind {
    pub fn parse(s: &str) -> Result<PartitionKind> {
        match s {
            "pathological" => Ok(PartitionKind::Pathological),
            "dirichlet" => Ok(PartitionKind::Dirichlet),
            "practical" => Ok(PartitionKind::Practical),
            other => Err(Error::InvalidConfig(format!(
                "partition.scheme must be pathological|dirichlet|practical, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub scheme: PartitionKind,
    pub classes_per_client: usize,
    pub alpha: f64,
    pub groups: usize,
    pub dominant_classes_per_group: usize,
    pub dominant_fraction: f64,
    pub train_per_client: usize,
    pub test_per_client: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            scheme: PartitionKind::Pathological,
            classes_per_client: 2,
            alpha: 0.5,
            groups: 3,
            dominant_classes_per_group: 3,
            dominant_fraction: 0.8,
            train_per_client: 300,
            test_per_client: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Blobs,
    Idx,
}

impl DatasetKind {
    pub fn parse(s: &str) -> Result<DatasetKind> {
        match s {
            "blobs" => Ok(DatasetKind::Blobs),
            "idx" => Ok(DatasetKind::Idx),
            other => Err(Error::InvalidConfig(format!(
                "dataset.kind must be blobs|idx, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub feature_dim: usize,
    pub separation: f64,
    pub noise_sigma: f64,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            kind: DatasetKind::Blobs,
            num_classes: 10,
            samples_per_class: 2000,
            feature_dim: 20,
            separation: 1.8,
            noise_sigma: 1.0,
            images: None,
            labels: None,
            test_images: None,
            test_labels: None,
        }
    }
}

/// Everything a run needs. Defaults follow the standard experiment setup:
/// 40 clients, 500 rounds, 10 local epochs, batch 100, lambda 2, alpha_t 1,
/// Adam lr 0.001, full participation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: Method,
    pub n_clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub tau: f64,
    pub alpha_t: f64,
    pub lr: f64,
    pub epsilon_dist: f64,
    pub normalize_by_sqrt_dim: bool,
    pub participation_fraction: f64,
    pub seed: u64,
    /// Coefficient of the pairwise-norm term; only `toy_pullpush` reads it
    /// and it may be negative (negative pushes models apart).
    pub toy_lambda: f64,
    pub hidden_layers: Vec<usize>,
    pub partition: PartitionConfig,
    pub dataset: DatasetConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Diversifed,
            n_clients: 40,
            rounds: 500,
            local_epochs: 10,
            batch_size: 100,
            lambda: 2.0,
            tau: 1.0,
            alpha_t: 1.0,
            lr: 0.001,
            epsilon_dist: 1e-8,
            normalize_by_sqrt_dim: false,
            participation_fraction: 1.0,
            seed: 0,
            toy_lambda: 0.0,
            hidden_layers: vec![64],
            partition: PartitionConfig::default(),
            dataset: DatasetConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn client_hyper(&self) -> ClientHyper {
        ClientHyper {
            lambda: self.lambda,
            alpha_t: self.alpha_t,
            epochs: self.local_epochs,
            batch_size: self.batch_size,
        }
    }

    pub fn server_hyper(&self) -> ServerHyper {
        ServerHyper {
            tau: self.tau,
            alpha_t: self.alpha_t,
            epsilon_dist: self.epsilon_dist,
            normalize_by_sqrt_dim: self.normalize_by_sqrt_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_clients == 0 {
            return Err(Error::InvalidConfig("n_clients must be >= 1".into()));
        }
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be >= 1".into()));
        }
        if !(self.participation_fraction > 0.0 && self.participation_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "participation_fraction must be in (0, 1], got {}",
                self.participation_fraction
            )));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lr must be > 0, got {}",
                self.lr
            )));
        }
        if !self.toy_lambda.is_finite() {
            return Err(Error::InvalidConfig("toy_lambda must be finite".into()));
        }
        if self.partition.train_per_client == 0 || self.partition.test_per_client == 0 {
            return Err(Error::InvalidConfig(
                "partition.train_per_client and partition.test_per_client must be >= 1".into(),
            ));
        }
        self.client_hyper().validate()?;
        self.server_hyper().validate()?;
        if self.dataset.kind == DatasetKind::Idx
            && (self.dataset.images.is_none() || self.dataset.labels.is_none())
        {
            return Err(Error::InvalidConfig(
                "dataset.kind = idx requires dataset.images and dataset.labels".into(),
            ));
        }
        Ok(())
    }
}

/// Per-round metrics. Accuracy covers all clients every round, each
/// evaluated with its current model (the shared global model under FedAvg);
/// the mean is the plain arithmetic mean over all clients. `train_loss`
/// carries each client's most recent final local training loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub train_loss: Vec<f64>,
    pub participants: Vec<ClientId>,
}

/// A completed run: all round records plus the best mean accuracy and when
/// it happened (first round in case of ties).
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub rounds: Vec<RoundRecord>,
    pub best_mean_accuracy: f64,
    pub best_round: usize,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    fn new(config: RunConfig, rounds: Vec<RoundRecord>, started: Instant) -> RunReport {
        let (best_round, best_mean_accuracy) = rounds
            .iter()
            .map(|r| (r.round, r.mean_accuracy))
            .fold((0, f64::NEG_INFINITY), |acc, (round, mean)| {
                if mean > acc.1 {
                    (round, mean)
                } else {
                    acc
                }
            });
        RunReport {
            config,
            rounds,
            best_mean_accuracy,
            best_round,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        }
    }

    pub fn final_mean_accuracy(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.mean_accuracy)
    }

    /// Per-client maximum accuracy over all rounds.
    pub fn per_client_best(&self) -> Vec<f64> {
        let n = self.config.n_clients;
        let mut best = vec![0.0f64; n];
        for record in &self.rounds {
            for (b, &a) in best.iter_mut().zip(&record.accuracy) {
                if a > *b {
                    *b = a;
                }
            }
        }
        best
    }

    /// Bit-exact comparison of the recorded trajectories (configs and wall
    /// clock excluded).
    pub fn same_trajectory(&self, other: &RunReport) -> bool {
        self.rounds.len() == other.rounds.len()
            && self.rounds.iter().zip(&other.rounds).all(|(a, b)| {
                a.round == b.round
                    && a.participants == b.participants
                    && bits_eq(&a.accuracy, &b.accuracy)
                    && bits_eq(&a.train_loss, &b.train_loss)
                    && a.mean_accuracy.to_bits() == b.mean_accuracy.to_bits()
            })
    }
}

fn bits_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Uniformly sample `ceil(fraction * n)` distinct participants for a round,
/// deterministic in `(master_seed, round)`. Ids come back sorted.
pub fn sample_participants(
    n_clients: usize,
    fraction: f64,
    round: u64,
    master_seed: u64,
) -> Vec<ClientId> {
    let k = ((fraction * n_clients as f64).ceil() as usize).clamp(1, n_clients);
    let mut ids: Vec<ClientId> = (0..n_clients).collect();
    let mut rng = stream(master_seed, &[tags::PARTICIPATION, round]);
    for i in 0..k {
        let j = rng.random_range(i..n_clients);
        ids.swap(i, j);
    }
    let mut chosen = ids[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Build the dataset a config describes.
pub fn build_dataset(config: &RunConfig) -> Result<LabeledDataset> {
    match config.dataset.kind {
        DatasetKind::Blobs => synth_blobs(
            config.dataset.num_classes,
            config.dataset.samples_per_class,
            config.dataset.feature_dim,
            config.dataset.separation,
            config.dataset.noise_sigma,
            derive_seed(config.seed, &[tags::DATASET]),
        ),
        DatasetKind::Idx => {
            let images = config.dataset.images.as_ref().ok_or_else(|| {
                Error::InvalidConfig("dataset.images is required for idx".into())
            })?;
            let labels = config.dataset.labels.as_ref().ok_or_else(|| {
                Error::InvalidConfig("dataset.labels is required for idx".into())
            })?;
            match (&config.dataset.test_images, &config.dataset.test_labels) {
                (Some(ti), Some(tl)) => load_idx_with_test(images, labels, ti, tl),
                (None, None) => load_idx(images, labels),
                _ => Err(Error::InvalidConfig(
                    "dataset.test_images and dataset.test_labels must be given together".into(),
                )),
            }
        }
    }
}

/// Partition the dataset according to the config.
pub fn build_partition(config: &RunConfig, ds: &LabeledDataset) -> Result<PartitionSpec> {
    let seed = derive_seed(config.seed, &[tags::PARTITION]);
    let p = &config.partition;
    match p.scheme {
        PartitionKind::Pathological => partition_pathological(
            ds,
            config.n_clients,
            p.classes_per_client,
            p.train_per_client,
            p.test_per_client,
            seed,
        ),
        PartitionKind::Dirichlet => partition_dirichlet(
            ds,
            config.n_clients,
            p.alpha,
            p.train_per_client,
            p.test_per_client,
            seed,
        ),
        PartitionKind::Practical => partition_practical(
            ds,
            config.n_clients,
            p.groups,
            p.dominant_classes_per_group,
            p.dominant_fraction,
            p.train_per_client,
            p.test_per_client,
            seed,
        ),
    }
}

struct World {
    spec: MlpSpec,
    clients: Vec<ClientState>,
}

fn build_world(config: &RunConfig) -> Result<World> {
    let ds = build_dataset(config)?;
    let partition = build_partition(config, &ds)?;
    let mut sizes = Vec::with_capacity(config.hidden_layers.len() + 2);
    sizes.push(ds.feature_dim());
    sizes.extend_from_slice(&config.hidden_layers);
    sizes.push(ds.num_classes());
    let spec = MlpSpec::new(sizes)?;
    // Every client starts from one shared initial model, the usual federated
    // setup. Early pairwise distances then reflect data-driven drift rather
    // than unrelated random initializations, which is the signal the
    // distance loss keys on.
    let init = init_params(&spec, derive_seed(config.seed, &[tags::INIT]));
    let mut clients = Vec::with_capacity(config.n_clients);
    for id in 0..config.n_clients {
        let (train, test) = materialize(&ds, &partition, id)?;
        let adam = AdamState::new(spec.param_dim(), config.lr);
        clients.push(ClientState {
            id,
            params: init.clone(),
            adam,
            train,
            test,
        });
    }
    Ok(World { spec, clients })
}

type Observer<'a> = &'a mut dyn FnMut(&RoundRecord) -> Result<()>;

fn evaluate_round(
    round: usize,
    clients: &[ClientState],
    spec: &MlpSpec,
    shared_model: Option<&ParamVector>,
    last_loss: &[f64],
    participants: Vec<ClientId>,
) -> Result<RoundRecord> {
    let accuracy: Vec<f64> = clients
        .par_iter()
        .map(|c| evaluate_accuracy(shared_model.unwrap_or(&c.params), spec, &c.test))
        .collect::<Result<_>>()?;
    let mean_accuracy = accuracy.iter().sum::<f64>() / accuracy.len() as f64;
    Ok(RoundRecord {
        round,
        accuracy,
        mean_accuracy,
        train_loss: last_loss.to_vec(),
        participants,
    })
}

fn initial_losses(clients: &[ClientState], spec: &MlpSpec) -> Result<Vec<f64>> {
    clients
        .par_iter()
        .map(|c| initial_train_loss(c, spec))
        .collect()
}

/// Run participants' local updates in parallel, recording final losses.
fn run_local_round(
    clients: &mut [ClientState],
    in_round: &[bool],
    anchors: &[Option<ParamVector>],
    hyper: &ClientHyper,
    spec: &MlpSpec,
    seed: u64,
    round: u64,
    last_loss: &mut [f64],
) -> Result<()> {
    let losses: Vec<Option<Result<f64>>> = clients
        .par_iter_mut()
        .enumerate()
        .map(|(i, c)| {
            in_round[i]
                .then(|| local_update(c, anchors[i].as_ref(), hyper, spec, seed, round))
        })
        .collect();
    for (i, l) in losses.into_iter().enumerate() {
        if let Some(l) = l {
            last_loss[i] = l?;
        }
    }
    Ok(())
}

fn run_diversifed_engine(config: &RunConfig, observer: Observer) -> Result<RunReport> {
    let started = Instant::now();
    let World { spec, mut clients } = build_world(config)?;
    let c_hyper = config.client_hyper();
    let s_hyper = config.server_hyper();
    let n = config.n_clients;
    let mut anchors: Vec<Option<ParamVector>> = vec![None; n];
    let mut last_loss = initial_losses(&clients, &spec)?;
    let mut rounds = Vec::with_capacity(config.rounds);

    for round in 0..config.rounds {
        let participants =
            sample_participants(n, config.participation_fraction, round as u64, config.seed);
        let mut in_round = vec![false; n];
        for &i in &participants {
            in_round[i] = true;
        }
        run_local_round(
            &mut clients,
            &in_round,
            &anchors,
            &c_hyper,
            &spec,
            config.seed,
            round as u64,
            &mut last_loss,
        )?;

        // Server pass: anchors for this round's participants, from this
        // round's pool only.
        let pool = ModelPool::new(
            participants
                .iter()
                .map(|&i| (i, clients[i].params.clone()))
                .collect(),
        )?;
        for &i in &participants {
            if pool.len() < 2 {
                anchors[i] = None;
                continue;
            }
            let weights = combination_weights(&pool, i, &s_hyper)?;
            if weights.no_interaction() {
                anchors[i] = None;
            } else {
                let z = server_step(&pool, i, &s_hyper)?;
                #[cfg(debug_assertions)]
                {
                    let combined = weights.apply(&pool)?;
                    for (a, b) in z.values().iter().zip(combined.values()) {
                        debug_assert!(
                            (a - b).abs() < 1e-9,
                            "anchor/combination mismatch: {a} vs {b}"
                        );
                    }
                }
                anchors[i] = Some(z);
            }
        }

        let record = evaluate_round(round, &clients, &spec, None, &last_loss, participants)?;
        observer(&record)?;
        rounds.push(record);
    }
    Ok(RunReport::new(config.clone(), rounds, started))
}

fn run_separate_engine(config: &RunConfig, observer: Observer) -> Result<RunReport> {
    let started = Instant::now();
    let World { spec, mut clients } = build_world(config)?;
    let c_hyper = config.client_hyper();
    let n = config.n_clients;
    let anchors: Vec<Option<ParamVector>> = vec![None; n];
    let in_round = vec![true; n];
    let mut last_loss = initial_losses(&clients, &spec)?;
    let mut rounds = Vec::with_capacity(config.rounds);

    for round in 0..config.rounds {
        run_local_round(
            &mut clients,
            &in_round,
            &anchors,
            &c_hyper,
            &spec,
            config.seed,
            round as u64,
            &mut last_loss,
        )?;
        let record = evaluate_round(
            round,
            &clients,
            &spec,
            None,
            &last_loss,
            (0..n).collect(),
        )?;
        observer(&record)?;
        rounds.push(record);
    }
    Ok(RunReport::new(config.clone(), rounds, started))
}

fn run_fedavg_engine(config: &RunConfig, observer: Observer) -> Result<RunReport> {
    let started = Instant::now();
    let World { spec, mut clients } = build_world(config)?;
    let c_hyper = config.client_hyper();
    let n = config.n_clients;
    let dim = spec.param_dim();

    // The starting global model aggregates the clients' initial models, so
    // a single-client federation reduces exactly to that client training
    // alone.
    let mut global = {
        let mut acc = vec![0.0f64; dim];
        for c in &clients {
            for (a, v) in acc.iter_mut().zip(c.params.values()) {
                *a += v / n as f64;
            }
        }
        ParamVector::new(acc)
    };

    let mut last_loss = initial_losses(&clients, &spec)?;
    let mut rounds = Vec::with_capacity(config.rounds);
    let anchors: Vec<Option<ParamVector>> = vec![None; n];

    for round in 0..config.rounds {
        let participants =
            sample_participants(n, config.participation_fraction, round as u64, config.seed);
        let mut in_round = vec![false; n];
        for &i in &participants {
            in_round[i] = true;
            clients[i].params = global.clone();
        }
        run_local_round(
            &mut clients,
            &in_round,
            &anchors,
            &c_hyper,
            &spec,
            config.seed,
            round as u64,
            &mut last_loss,
        )?;

        // Aggregate participants weighted by train-set size.
        let total: f64 = participants
            .iter()
            .map(|&i| clients[i].train.rows() as f64)
            .sum();
        let mut acc = vec![0.0f64; dim];
        for &i in &participants {
            let w = clients[i].train.rows() as f64 / total;
            for (a, v) in acc.iter_mut().zip(clients[i].params.values()) {
                *a += w * v;
            }
        }
        global = ParamVector::new(acc);
        if !global.is_finite() {
            return Err(Error::NonFinite("fedavg aggregation"));
        }

        let record = evaluate_round(
            round,
            &clients,
            &spec,
            Some(&global),
            &last_loss,
            participants,
        )?;
        observer(&record)?;
        rounds.push(record);
    }
    Ok(RunReport::new(config.clone(), rounds, started))
}

fn run_toy_engine(config: &RunConfig, observer: Observer) -> Result<RunReport> {
    let started = Instant::now();
    let World { spec, mut clients } = build_world(config)?;
    let c_hyper = config.client_hyper();
    let n = config.n_clients;
    let toy_lambda = config.toy_lambda;
    let eps = config.epsilon_dist;
    let mut last_loss = initial_losses(&clients, &spec)?;
    let mut rounds = Vec::with_capacity(config.rounds);

    for round in 0..config.rounds {
        // Every client trains against a frozen snapshot of the others'
        // round-start models.
        let snapshot: Vec<ParamVector> = clients.iter().map(|c| c.params.clone()).collect();
        let losses: Vec<Result<f64>> = clients
            .par_iter_mut()
            .enumerate()
            .map(|(i, c)| {
                if toy_lambda == 0.0 {
                    local_update_with_extra_grad(
                        c,
                        &c_hyper,
                        &spec,
                        config.seed,
                        round as u64,
                        None,
                    )
                } else {
                    let snapshot = &snapshot;
                    let pull = move |w: &ParamVector, grad: &mut [f64]| {
                        for (j, other) in snapshot.iter().enumerate() {
                            if j == i {
                                continue;
                            }
                            let d = crate::param::euclidean_distance(w, other)
                                .expect("snapshot members share the model dim");
                            if d < eps {
                                continue;
                            }
                            let coeff = toy_lambda / d;
                            for ((g, wv), ov) in
                                grad.iter_mut().zip(w.values()).zip(other.values())
                            {
                                *g += coeff * (wv - ov);
                            }
                        }
                    };
                    local_update_with_extra_grad(
                        c,
                        &c_hyper,
                        &spec,
                        config.seed,
                        round as u64,
                        Some(&pull),
                    )
                }
            })
            .collect();
        for (i, l) in losses.into_iter().enumerate() {
            last_loss[i] = l?;
        }
        let record = evaluate_round(
            round,
            &clients,
            &spec,
            None,
            &last_loss,
            (0..n).collect(),
        )?;
        observer(&record)?;
        rounds.push(record);
    }
    Ok(RunReport::new(config.clone(), rounds, started))
}

/// Run a config with a per-round observer (records arrive in round order).
pub fn run_observed(config: &RunConfig, observer: Observer) -> Result<RunReport> {
    config.validate()?;
    match config.method {
        Method::Diversifed => run_diversifed_engine(config, observer),
        Method::Fedavg => run_fedavg_engine(config, observer),
        Method::Separate => run_separate_engine(config, observer),
        Method::ToyPullpush => run_toy_engine(config, observer),
    }
}

/// Run a config to completion.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    run_observed(config, &mut |_| Ok(()))
}

fn expect_method(config: &RunConfig, method: Method) -> Result<()> {
    if config.method != method {
        return Err(Error::InvalidConfig(format!(
            "expected method {}, config says {}",
            method.name(),
            config.method.name()
        )));
    }
    Ok(())
}

pub fn run_diversifed(config: &RunConfig) -> Result<RunReport> {
    expect_method(config, Method::Diversifed)?;
    run(config)
}

pub fn run_fedavg(config: &RunConfig) -> Result<RunReport> {
    expect_method(config, Method::Fedavg)?;
    run(config)
}

pub fn run_separate(config: &RunConfig) -> Result<RunReport> {
    expect_method(config, Method::Separate)?;
    run(config)
}

pub fn run_toy_pullpush(config: &RunConfig) -> Result<RunReport> {
    expect_method(config, Method::ToyPullpush)?;
    run(config)
}
