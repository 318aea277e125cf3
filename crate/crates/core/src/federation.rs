//! Fairness-regularized FedAvg with tracked prediction sets.
//!
//! Each round the server samples scores of the current global model from all
//! clients, broadcasts them with the model, and every selected client runs
//! `E` minibatch SGD steps on its task loss plus `lambda` times its share of
//! the tracked fairness function. The server then averages the returned
//! iterates.
//!
//! Server and clients only exchange the values in [`ServerMessage`] and
//! [`ClientMessage`]: parameter vectors, scalar scores and group counts.

use std::time::{Duration, Instant};

use log::warn;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{ClientShard, Federation, TabularDataset};
use crate::dp::{protect, DpMechanism};
use crate::error::{Error, Result};
use crate::fairness::{
    grad_fk_rows, mmd_regularizer, mmd_squared_grad_rows, mmd_unfairness, sp_unfairness, FairnessSpec,
    PredictionSets, ScoreSets,
};
use crate::kernels::Kernel;
use crate::models::{axpy, Model};
use crate::rng::{stream_rng, Stream};

/// How the server fills the prediction sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetSampling {
    /// `set_size` draws per (group, conditioning set): pick a client with
    /// probability proportional to its weight times its share of matching rows,
    /// then a uniform matching row of that client, with replacement.
    #[default]
    TwoStage,
    /// Every matching training row, in client then row order.
    Exhaustive,
}

fn default_set_size() -> usize {
    100
}
fn default_decay() -> f64 {
    0.99
}
fn default_eval_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedRunConfig {
    pub rounds: usize,
    /// Local SGD steps per round.
    pub local_steps: usize,
    pub local_lr: f64,
    pub global_lr: f64,
    /// Clients sampled per round; `None` means all.
    #[serde(default)]
    pub clients_per_round: Option<usize>,
    pub lambda: f64,
    /// Tracked scores per (group, conditioning set).
    #[serde(default = "default_set_size")]
    pub set_size: usize,
    pub batch_size: usize,
    /// Factor applied to the local step size after every round.
    #[serde(default = "default_decay")]
    pub step_decay: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fairness: FairnessSpec,
    pub kernel: Kernel,
    #[serde(default)]
    pub dp: DpMechanism,
    /// Weight the aggregate by client weights instead of the plain mean.
    #[serde(default)]
    pub weighted_aggregation: bool,
    #[serde(default)]
    pub set_sampling: SetSampling,
    /// Evaluate metrics every this many rounds (and always after the last).
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
}

impl Default for FedRunConfig {
    fn default() -> Self {
        FedRunConfig {
            rounds: 100,
            local_steps: 50,
            local_lr: 0.05,
            global_lr: 1.0,
            clients_per_round: None,
            lambda: 0.0,
            set_size: default_set_size(),
            batch_size: 100,
            step_decay: default_decay(),
            seed: 0,
            fairness: FairnessSpec::default(),
            kernel: Kernel::DistanceInduced,
            dp: DpMechanism::none(),
            weighted_aggregation: false,
            set_sampling: SetSampling::TwoStage,
            eval_every: 1,
        }
    }
}

impl FedRunConfig {
    pub fn validate(&self, n_clients: usize) -> Result<()> {
        let fail = |field: &str, why: String| Err(Error::Config(format!("`{field}`: {why}")));
        if self.rounds == 0 {
            return fail("rounds", "must be at least 1".into());
        }
        if self.local_steps == 0 {
            return fail("local_steps", "must be at least 1".into());
        }
        if !(self.local_lr > 0.0 && self.local_lr.is_finite()) {
            return fail("local_lr", format!("must be positive, got {}", self.local_lr));
        }
        if !(self.global_lr >= 1.0 && self.global_lr.is_finite()) {
            return fail("global_lr", format!("must be at least 1, got {}", self.global_lr));
        }
        if let Some(s) = self.clients_per_round {
            if s == 0 || s > n_clients {
                return fail("clients_per_round", format!("must lie in 1..={n_clients}, got {s}"));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail("lambda", format!("must be non-negative, got {}", self.lambda));
        }
        if self.set_size == 0 {
            return fail("set_size", "must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size", "must be at least 1".into());
        }
        if !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return fail("step_decay", format!("must lie in (0, 1], got {}", self.step_decay));
        }
        if self.eval_every == 0 {
            return fail("eval_every", "must be at least 1".into());
        }
        self.kernel.validate()?;
        self.dp.validate()?;
        Ok(())
    }

    pub fn clients_per_round(&self, n_clients: usize) -> usize {
        self.clients_per_round.unwrap_or(n_clients)
    }

    /// `E * local_lr * global_lr`.
    pub fn pseudo_stepsize(&self) -> f64 {
        self.local_steps as f64 * self.local_lr * self.global_lr
    }
}

/// Messages a client sends to the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClientMessage {
    /// Row counts per conditioning set and group; sent once before training.
    GroupCounts {
        client: usize,
        n_rows: usize,
        counts: Vec<[usize; 2]>,
    },
    /// Scores answering a [`ServerMessage::ScoreRequest`].
    Scores {
        client: usize,
        set: usize,
        group: u8,
        scores: Vec<f64>,
    },
    Update {
        client: usize,
        round: usize,
        params: Vec<f64>,
    },
}

/// Messages the server sends to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ServerMessage {
    Alpha { client: usize, alpha: Vec<[f64; 2]> },
    /// Request `count` scores of the current model drawn uniformly with
    /// replacement from the client's rows in `(group, set)`; `count = None`
    /// asks for all of them.
    ScoreRequest {
        round: usize,
        set: usize,
        group: u8,
        count: Option<usize>,
        params: Vec<f64>,
    },
    Broadcast {
        round: usize,
        params: Vec<f64>,
        sets: PredictionSets,
    },
}

/// Client-side handler: the only code with access to a client's rows.
struct ClientEndpoint<'a> {
    shard: &'a ClientShard,
}

impl ClientEndpoint<'_> {
    fn group_counts(&self, spec: &FairnessSpec) -> ClientMessage {
        let data = &self.shard.dataset;
        let rows: Vec<usize> = (0..data.len()).collect();
        let counts = spec
            .conditioning_sets()
            .iter()
            .map(|c| [0u8, 1].map(|a| FairnessSpec::cell_rows(data, &rows, c, a).len()))
            .collect();
        ClientMessage::GroupCounts {
            client: self.shard.client_id,
            n_rows: data.len(),
            counts,
        }
    }

    fn answer(&self, request: &ServerMessage, template: &Model, spec: &FairnessSpec, seed: u64) -> Result<ClientMessage> {
        let ServerMessage::ScoreRequest {
            round,
            set,
            group,
            count,
            params,
        } = request
        else {
            return Err(Error::Validation("client received a non-request message".into()));
        };
        let model = template.with_params(params.clone())?;
        let data = &self.shard.dataset;
        let all: Vec<usize> = (0..data.len()).collect();
        let cset = spec.conditioning_sets()[*set];
        let cell = FairnessSpec::cell_rows(data, &all, &cset, *group);
        let score = |i: usize| spec.score(&model, data.row(i), data.label(i));
        let scores = match count {
            None => cell.iter().map(|&i| score(i)).collect(),
            Some(0) => Vec::new(),
            Some(n) => {
                if cell.is_empty() {
                    return Err(Error::DegenerateGroup(format!(
                        "client {} has no rows in group {group} of set {set}",
                        self.shard.client_id
                    )));
                }
                let stream_id = ((self.shard.client_id as u64 + 1) << 16) | (*set as u64 * 2 + *group as u64);
                let mut rng = stream_rng(seed, Stream::PredictionSets, *round as u64, stream_id);
                (0..*n).map(|_| score(cell[rng.random_range(0..cell.len())])).collect()
            }
        };
        Ok(ClientMessage::Scores {
            client: self.shard.client_id,
            set: *set,
            group: *group,
            scores,
        })
    }
}

/// Correction weights `alpha_{k,j}^a`, indexed `[client][set][group]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaWeights {
    pub per_client: Vec<Vec<[f64; 2]>>,
    /// Conditioning sets in which a group has no rows anywhere; they are left
    /// out of the regularizer.
    pub excluded: Vec<bool>,
}

impl AlphaWeights {
    pub fn client(&self, index: usize) -> &[[f64; 2]] {
        &self.per_client[index]
    }
}

/// Computes the weights from the clients' group counts only.
pub fn compute_alpha(shards: &[ClientShard], spec: &FairnessSpec) -> Result<AlphaWeights> {
    if shards.is_empty() {
        return Err(Error::EmptyFederation("no clients".into()));
    }
    let n_sets = spec.n_sets();
    let reports: Vec<(f64, usize, Vec<[usize; 2]>)> = shards
        .iter()
        .map(|s| match (ClientEndpoint { shard: s }).group_counts(spec) {
            ClientMessage::GroupCounts { n_rows, counts, .. } => (s.weight, n_rows, counts),
            _ => unreachable!(),
        })
        .collect();
    let mut global = vec![[0.0f64; 2]; n_sets];
    for (nu, n, counts) in &reports {
        for j in 0..n_sets {
            for a in 0..2 {
                global[j][a] += nu * counts[j][a] as f64 / *n as f64;
            }
        }
    }
    let excluded: Vec<bool> = global.iter().map(|g| g[0] == 0.0 || g[1] == 0.0).collect();
    for (j, ex) in excluded.iter().enumerate() {
        if *ex {
            warn!("conditioning set {j} has an empty group across the federation; excluded from the regularizer");
        }
    }
    let per_client = reports
        .iter()
        .map(|(_, n, counts)| {
            (0..n_sets)
                .map(|j| {
                    [0, 1].map(|a| {
                        if excluded[j] {
                            0.0
                        } else {
                            (counts[j][a] as f64 / *n as f64) / global[j][a]
                        }
                    })
                })
                .collect()
        })
        .collect();
    Ok(AlphaWeights { per_client, excluded })
}

/// Samples the tracked score sets for the global model `model`.
pub fn build_prediction_sets(
    shards: &[ClientShard],
    model: &Model,
    round: usize,
    config: &FedRunConfig,
) -> Result<PredictionSets> {
    let spec = &config.fairness;
    let endpoints: Vec<ClientEndpoint> = shards.iter().map(|shard| ClientEndpoint { shard }).collect();
    let counts: Vec<(f64, usize, Vec<[usize; 2]>)> = endpoints
        .iter()
        .map(|e| match e.group_counts(spec) {
            ClientMessage::GroupCounts { n_rows, counts, .. } => (e.shard.weight, n_rows, counts),
            _ => unreachable!(),
        })
        .collect();

    let mut sets = Vec::with_capacity(spec.n_sets());
    for j in 0..spec.n_sets() {
        let mut groups: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut excluded = false;
        for a in 0..2u8 {
            let mass: Vec<f64> = counts
                .iter()
                .map(|(nu, n, c)| nu * c[j][a as usize] as f64 / *n as f64)
                .collect();
            if mass.iter().all(|&m| m == 0.0) {
                excluded = true;
                break;
            }
            let per_client: Vec<Option<usize>> = match config.set_sampling {
                SetSampling::Exhaustive => vec![None; shards.len()],
                SetSampling::TwoStage => {
                    let mut rng = stream_rng(config.seed, Stream::PredictionSets, round as u64, (j * 2) as u64 + a as u64);
                    let pick = WeightedIndex::new(&mass)
                        .map_err(|e| Error::Validation(format!("client sampling weights: {e}")))?;
                    let mut alloc = vec![0usize; shards.len()];
                    for _ in 0..config.set_size {
                        alloc[pick.sample(&mut rng)] += 1;
                    }
                    alloc.into_iter().map(Some).collect()
                }
            };
            for (endpoint, count) in endpoints.iter().zip(per_client) {
                if count == Some(0) {
                    continue;
                }
                let request = ServerMessage::ScoreRequest {
                    round,
                    set: j,
                    group: a,
                    count,
                    params: model.params().to_vec(),
                };
                if let ClientMessage::Scores { scores, .. } = endpoint.answer(&request, model, spec, config.seed)? {
                    groups[a as usize].extend(scores);
                }
            }
        }
        if excluded {
            warn!("round {round}: conditioning set {j} excluded (empty group)");
            sets.push(None);
        } else {
            let [group0, group1] = groups;
            sets.push(Some(ScoreSets { group0, group1 }));
        }
    }
    let sets = PredictionSets { round, sets };
    Ok(if config.dp.is_active() {
        protect(&sets, &config.dp)
    } else {
        sets
    })
}

/// Fairness term added to the local task gradient.
#[derive(Debug, Clone, Copy)]
pub(crate) enum LocalFairness<'a> {
    None,
    /// Tracked global regularizer: the client's share of the fairness
    /// function for the broadcast sets.
    Tracked {
        sets: &'a PredictionSets,
        alpha: &'a [[f64; 2]],
    },
    /// Exact squared MMD between the minibatch's own groups.
    Local,
}

#[derive(Debug, Clone)]
pub struct LocalOutcome {
    pub model: Model,
    pub max_grad_norm: f64,
    pub empty_cells: usize,
}

/// `params -= lr * (task + lambda * fair)`.
pub(crate) fn sgd_step(params: &mut [f64], lr: f64, mut task: Vec<f64>, lambda: f64, fair: Option<&[f64]>) -> f64 {
    if let Some(f) = fair {
        axpy(lambda, f, &mut task);
    }
    for (p, g) in params.iter_mut().zip(&task) {
        *p -= lr * g;
    }
    task.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Minibatch schedule: reshuffled epochs, or the whole shard in order when
/// one batch covers it.
struct Batches {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
    rng: rand_chacha::ChaCha8Rng,
}

impl Batches {
    fn new(n: usize, batch: usize, rng: rand_chacha::ChaCha8Rng) -> Self {
        Batches {
            order: (0..n).collect(),
            pos: n,
            batch,
            rng,
        }
    }

    fn next_batch(&mut self) -> &[usize] {
        let n = self.order.len();
        if self.batch >= n {
            return &self.order;
        }
        if self.pos >= n {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let start = self.pos;
        self.pos = (start + self.batch).min(n);
        &self.order[start..self.pos]
    }
}

pub(crate) fn local_update_with(
    shard: &ClientShard,
    global: &Model,
    fairness: LocalFairness<'_>,
    config: &FedRunConfig,
    local_lr: f64,
    round: usize,
) -> Result<LocalOutcome> {
    let data = &shard.dataset;
    let rng = stream_rng(config.seed, Stream::LocalSgd, round as u64, shard.client_id as u64);
    let mut batches = Batches::new(data.len(), config.batch_size, rng);
    let mut model = global.clone();
    let mut max_grad_norm = 0.0f64;
    let mut empty_cells = 0;
    let use_fairness = config.lambda > 0.0;
    for _ in 0..config.local_steps {
        let rows = batches.next_batch();
        let task = model.grad_task_loss_rows(data, rows);
        let fair = match fairness {
            _ if !use_fairness => None,
            LocalFairness::None => None,
            LocalFairness::Tracked { sets, alpha } => Some(grad_fk_rows(
                &model,
                data,
                rows,
                alpha,
                sets,
                &config.fairness,
                &config.kernel,
            )?),
            LocalFairness::Local => Some(mmd_squared_grad_rows(&model, data, rows, &config.fairness, &config.kernel)?),
        };
        if let Some(f) = &fair {
            empty_cells += f.empty_cells;
        }
        let norm = sgd_step(
            model.params_mut(),
            local_lr,
            task,
            config.lambda,
            fair.as_ref().map(|f| f.grad.as_slice()),
        );
        max_grad_norm = max_grad_norm.max(norm);
    }
    Ok(LocalOutcome {
        model,
        max_grad_norm,
        empty_cells,
    })
}

/// `E` local SGD steps on the client's task loss plus `lambda` times its
/// tracked fairness function.
pub fn local_update(
    shard: &ClientShard,
    global: &Model,
    sets: &PredictionSets,
    alpha: &[[f64; 2]],
    config: &FedRunConfig,
    local_lr: f64,
    round: usize,
) -> Result<LocalOutcome> {
    local_update_with(shard, global, LocalFairness::Tracked { sets, alpha }, config, local_lr, round)
}

/// `theta + global_lr * mean_k(theta_k - theta)`, or a weighted mean when
/// `weights` is given (weights are renormalized over the sampled clients).
pub fn aggregate(global: &Model, updates: &[Model], weights: Option<&[f64]>, global_lr: f64) -> Result<Model> {
    if updates.is_empty() {
        return Err(Error::Validation("no client updates to aggregate".into()));
    }
    if let Some(w) = weights {
        if w.len() != updates.len() {
            return Err(Error::DimensionMismatch {
                expected: updates.len(),
                got: w.len(),
            });
        }
    }
    let n = global.n_params();
    if let Some(bad) = updates.iter().find(|u| u.n_params() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bad.n_params(),
        });
    }
    let coef: Vec<f64> = match weights {
        None => vec![1.0 / updates.len() as f64; updates.len()],
        Some(w) => {
            let total: f64 = w.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Validation("aggregation weights sum to zero".into()));
            }
            w.iter().map(|v| v / total).collect()
        }
    };
    if updates.len() == 1 && global_lr == 1.0 {
        return Ok(updates[0].clone());
    }
    let theta = global.params();
    let mut out = vec![0.0; n];
    for (u, c) in updates.iter().zip(&coef) {
        for ((o, p), t) in out.iter_mut().zip(u.params()).zip(theta) {
            *o += c * (p - t);
        }
    }
    for (o, t) in out.iter_mut().zip(theta) {
        *o = t + global_lr * *o;
    }
    global.with_params(out)
}

/// Evaluation of a model on one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    /// Mean cross-entropy.
    pub loss: f64,
    /// Sum over conditioning sets of the squared MMD.
    pub mmd2: f64,
    /// Max over conditioning sets of the MMD.
    pub mmd: f64,
    /// `loss + lambda * mmd2`.
    pub objective: f64,
    pub accuracy: f64,
    pub sp_unfairness: f64,
}

pub fn evaluate(model: &Model, data: &TabularDataset, spec: &FairnessSpec, kernel: &Kernel, lambda: f64) -> Result<SplitMetrics> {
    let loss = model.task_loss(data)?;
    let mmd2 = mmd_regularizer(model, data, spec, kernel)?;
    Ok(SplitMetrics {
        loss,
        mmd2,
        mmd: mmd_unfairness(model, data, spec, kernel).unwrap_or(0.0),
        objective: loss + lambda * mmd2,
        accuracy: model.accuracy(data)?,
        sp_unfairness: sp_unfairness(model, data)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub train: SplitMetrics,
    pub test: SplitMetrics,
}

/// Per-round log line. Records are a pure function of data and config; wall
/// times are kept separately in [`RunOutput::timings`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub trainer: String,
    pub round: usize,
    /// Short digest of the global parameters after the round.
    pub theta_id: String,
    pub local_lr: f64,
    pub sampled_clients: Vec<usize>,
    pub empty_cells: usize,
    pub metrics: Option<RoundMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub trainer: String,
    pub n_clients: usize,
    pub n_params: usize,
    pub pseudo_stepsize: f64,
    pub alpha: Option<AlphaWeights>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub model: Model,
    pub metadata: RunMetadata,
    pub timings: Vec<Duration>,
}

impl RunOutput {
    pub fn final_metrics(&self) -> Option<&RoundMetrics> {
        self.records.iter().rev().find_map(|r| r.metrics.as_ref())
    }
}

/// A run that stopped early; `records` holds the completed rounds.
#[derive(Debug)]
pub struct RunFailure {
    pub records: Vec<RoundRecord>,
    pub error: Error,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run failed after {} rounds: {}", self.records.len(), self.error)
    }
}

impl std::error::Error for RunFailure {}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Self {
        Error::Round {
            round: f.records.len() + 1,
            source: Box::new(f.error),
        }
    }
}

pub fn params_digest(params: &[f64]) -> String {
    let mut h = Sha256::new();
    for p in params {
        h.update(p.to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

/// Which regularizer the FedAvg engine applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Regularizer {
    Global,
    Local,
    None,
}

impl Regularizer {
    fn trainer_name(self) -> &'static str {
        match self {
            Regularizer::Global => "mmd_fair_fedavg",
            Regularizer::Local => "local_fair",
            Regularizer::None => "fedavg",
        }
    }
}

fn sample_clients(n_clients: usize, per_round: usize, seed: u64, round: usize) -> Vec<usize> {
    if per_round == n_clients {
        return (0..n_clients).collect();
    }
    let mut rng = stream_rng(seed, Stream::ClientSampling, round as u64, 0);
    let mut chosen = rand::seq::index::sample(&mut rng, n_clients, per_round).into_vec();
    chosen.sort_unstable();
    chosen
}

pub(crate) fn run_engine(
    fed: &Federation,
    config: &FedRunConfig,
    init: Model,
    regularizer: Regularizer,
) -> std::result::Result<RunOutput, RunFailure> {
    let fail = |records: &[RoundRecord], error| RunFailure {
        records: records.to_vec(),
        error,
    };
    let k = fed.n_clients();
    config.validate(k).map_err(|e| fail(&[], e))?;
    config.fairness.validate(fed.dim()).map_err(|e| fail(&[], e))?;
    crate::data::validate_weights(&fed.train).map_err(|e| fail(&[], e))?;
    if init.input_dim() != fed.dim() {
        return Err(fail(
            &[],
            Error::DimensionMismatch {
                expected: fed.dim(),
                got: init.input_dim(),
            },
        ));
    }
    let alpha = match regularizer {
        Regularizer::Global => Some(compute_alpha(&fed.train, &config.fairness).map_err(|e| fail(&[], e))?),
        _ => None,
    };
    let pooled_train = fed.pooled_train();
    let pooled_test = fed.pooled_test();
    let per_round = config.clients_per_round(k);

    let mut global = init;
    let mut records = Vec::with_capacity(config.rounds);
    let mut timings = Vec::with_capacity(config.rounds);
    let mut local_lr = config.local_lr;
    for t in 1..=config.rounds {
        let started = Instant::now();
        let round_result = (|| -> Result<RoundRecord> {
            let sets = match (regularizer, config.lambda > 0.0) {
                (Regularizer::Global, true) => Some(build_prediction_sets(&fed.train, &global, t, config)?),
                _ => None,
            };
            let sampled = sample_clients(k, per_round, config.seed, t);
            let outcomes: Vec<LocalOutcome> = sampled
                .par_iter()
                .map(|&c| {
                    let fairness = match (&sets, &alpha, regularizer) {
                        (Some(sets), Some(alpha), _) => LocalFairness::Tracked {
                            sets,
                            alpha: alpha.client(c),
                        },
                        (_, _, Regularizer::Local) => LocalFairness::Local,
                        _ => LocalFairness::None,
                    };
                    local_update_with(&fed.train[c], &global, fairness, config, local_lr, t)
                })
                .collect::<Result<_>>()?;
            let empty_cells = outcomes.iter().map(|o| o.empty_cells).sum();
            let updates: Vec<Model> = outcomes.into_iter().map(|o| o.model).collect();
            let weights: Option<Vec<f64>> = config
                .weighted_aggregation
                .then(|| sampled.iter().map(|&c| fed.train[c].weight).collect());
            global = aggregate(&global, &updates, weights.as_deref(), config.global_lr)?;
            let metrics = if t % config.eval_every == 0 || t == config.rounds {
                Some(RoundMetrics {
                    train: evaluate(&global, &pooled_train, &config.fairness, &config.kernel, config.lambda)?,
                    test: evaluate(&global, &pooled_test, &config.fairness, &config.kernel, config.lambda)?,
                })
            } else {
                None
            };
            Ok(RoundRecord {
                trainer: regularizer.trainer_name().to_string(),
                round: t,
                theta_id: params_digest(global.params()),
                local_lr,
                sampled_clients: sampled,
                empty_cells,
                metrics,
            })
        })();
        match round_result {
            Ok(record) => records.push(record),
            Err(e) => return Err(fail(&records, e)),
        }
        timings.push(started.elapsed());
        local_lr *= config.step_decay;
    }
    Ok(RunOutput {
        records,
        metadata: RunMetadata {
            trainer: regularizer.trainer_name().to_string(),
            n_clients: k,
            n_params: global.n_params(),
            pseudo_stepsize: config.pseudo_stepsize(),
            alpha,
        },
        model: global,
        timings,
    })
}

/// Fairness-regularized FedAvg with tracked prediction sets. With the
/// statistical-parity criterion this is the single-set algorithm; other
/// criteria track one pair of sets per conditioning set.
pub fn run(fed: &Federation, config: &FedRunConfig, init: Model) -> std::result::Result<RunOutput, RunFailure> {
    run_engine(fed, config, init, Regularizer::Global)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, train_test_split, SyntheticSpec};
    use crate::fairness::Criterion;
    use crate::models::Architecture;

    fn shard(id: usize, weight: f64, rows: Vec<(f64, u8, u8)>) -> ClientShard {
        let (x, (y, a)): (Vec<Vec<f64>>, (Vec<u8>, Vec<u8>)) =
            rows.into_iter().map(|(x, y, a)| (vec![x], (y, a))).unzip();
        ClientShard {
            client_id: id,
            weight,
            dataset: TabularDataset::new(x, y, a).unwrap(),
        }
    }

    #[test]
    fn alpha_identical_proportions() {
        let rows = vec![(0.1, 0, 0), (0.2, 1, 1), (0.3, 0, 1), (0.4, 1, 0)];
        let shards = vec![shard(0, 0.5, rows.clone()), shard(1, 0.5, rows)];
        let alpha = compute_alpha(&shards, &FairnessSpec::default()).unwrap();
        for c in &alpha.per_client {
            assert_eq!(c[0], [1.0, 1.0]);
        }
    }

    #[test]
    fn alpha_fully_segregated_groups() {
        let shards = vec![
            shard(0, 0.5, vec![(0.1, 0, 0), (0.2, 1, 0)]),
            shard(1, 0.5, vec![(0.3, 0, 1), (0.4, 1, 1)]),
        ];
        let alpha = compute_alpha(&shards, &FairnessSpec::default()).unwrap();
        assert_eq!(alpha.per_client[0][0], [2.0, 0.0]);
        assert_eq!(alpha.per_client[1][0], [0.0, 2.0]);
        for a in 0..2 {
            let s: f64 = shards.iter().zip(&alpha.per_client).map(|(s, al)| s.weight * al[0][a]).sum();
            assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn alpha_missing_positive_labels() {
        let shards = vec![
            shard(0, 0.5, vec![(0.1, 0, 0), (0.2, 0, 1)]),
            shard(1, 0.5, vec![(0.3, 1, 0), (0.4, 1, 1)]),
        ];
        let eo = FairnessSpec::new(Criterion::EqualOpportunity);
        let alpha = compute_alpha(&shards, &eo).unwrap();
        assert_eq!(alpha.per_client[0][0], [0.0, 0.0]);
        assert_eq!(alpha.per_client[1][0], [2.0, 2.0]);
    }

    #[test]
    fn globally_empty_set_is_excluded() {
        let shards = vec![shard(0, 1.0, vec![(0.1, 0, 0), (0.2, 1, 0), (0.3, 1, 1)])];
        let eo = FairnessSpec::new(Criterion::EqualizedOdds);
        let alpha = compute_alpha(&shards, &eo).unwrap();
        assert_eq!(alpha.excluded, vec![true, false]);
        let config = FedRunConfig {
            fairness: eo,
            ..Default::default()
        };
        let model = Model::zeros(Architecture::Logistic, 1);
        let sets = build_prediction_sets(&shards, &model, 1, &config).unwrap();
        assert!(sets.sets[0].is_none());
        assert_eq!(sets.sets[1].as_ref().unwrap().group0.len(), 100);
    }

    #[test]
    fn exhaustive_single_client_sets() {
        let rows = vec![(0.1, 0, 0), (-0.2, 1, 1), (0.3, 0, 1), (0.9, 1, 0)];
        let shards = vec![shard(0, 1.0, rows)];
        let model = Model::from_params(Architecture::Logistic, 1, vec![2.0, 0.1]).unwrap();
        let config = FedRunConfig {
            set_sampling: SetSampling::Exhaustive,
            ..Default::default()
        };
        let sets = build_prediction_sets(&shards, &model, 1, &config).unwrap();
        let s = sets.sets[0].as_ref().unwrap();
        let score = |x: f64| model.predict(&[x]).unwrap();
        assert_eq!(s.group0, vec![score(0.1), score(0.9)]);
        assert_eq!(s.group1, vec![score(-0.2), score(0.3)]);
    }

    #[test]
    fn aggregate_examples() {
        let theta = Model::from_params(Architecture::Logistic, 1, vec![0.3, -0.1]).unwrap();
        let same = vec![theta.clone(), theta.clone(), theta.clone()];
        assert_eq!(aggregate(&theta, &same, None, 1.0).unwrap(), theta);
        assert_eq!(aggregate(&theta, &same, None, 3.0).unwrap(), theta);

        let upd = Model::from_params(Architecture::Logistic, 1, vec![0.7, 0.2]).unwrap();
        assert_eq!(aggregate(&theta, std::slice::from_ref(&upd), None, 1.0).unwrap(), upd);

        let delta = Model::from_params(Architecture::Logistic, 1, vec![0.5, 0.5]).unwrap();
        let moved = aggregate(&theta, &[delta], None, 2.0).unwrap();
        assert!((moved.params()[0] - (0.3 + 2.0 * 0.2)).abs() < 1e-15);
        assert!((moved.params()[1] - (-0.1 + 2.0 * 0.6)).abs() < 1e-15);

        let a = Model::from_params(Architecture::Logistic, 1, vec![1.0, 0.0]).unwrap();
        let b = Model::from_params(Architecture::Logistic, 1, vec![0.0, 1.0]).unwrap();
        let w = aggregate(&theta, &[a, b], Some(&[0.3, 0.1]), 1.0).unwrap();
        assert!((w.params()[0] - 0.75).abs() < 1e-15 && (w.params()[1] - 0.25).abs() < 1e-15);
        assert!(aggregate(&theta, &[], None, 1.0).is_err());
    }

    #[test]
    fn local_update_step_is_bounded() {
        let shards = generate_synthetic(&SyntheticSpec {
            n_clients: 2,
            samples_per_client: 60,
            dim: 3,
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        let config = FedRunConfig {
            local_steps: 7,
            batch_size: 16,
            lambda: 2.0,
            set_size: 20,
            ..Default::default()
        };
        let model = Model::init(Architecture::Logistic, 3, 2);
        let alpha = compute_alpha(&shards, &config.fairness).unwrap();
        let sets = build_prediction_sets(&shards, &model, 1, &config).unwrap();
        let out = local_update(&shards[0], &model, &sets, alpha.client(0), &config, 0.05, 1).unwrap();
        let moved: f64 = out
            .model
            .params()
            .iter()
            .zip(model.params())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(moved > 0.0);
        assert!(moved <= 7.0 * 0.05 * out.max_grad_norm + 1e-12);
    }

    #[test]
    fn config_validation_names_field() {
        let bad = FedRunConfig {
            lambda: -1.0,
            ..Default::default()
        };
        match bad.validate(3) {
            Err(Error::Config(msg)) => assert!(msg.contains("lambda")),
            other => panic!("{other:?}"),
        }
        let bad = FedRunConfig {
            clients_per_round: Some(4),
            ..Default::default()
        };
        assert!(bad.validate(3).is_err());
        assert_eq!(FedRunConfig::default().pseudo_stepsize(), 50.0 * 0.05);
    }

    #[test]
    fn client_sampling_is_reproducible_and_without_replacement() {
        let a = sample_clients(10, 4, 3, 7);
        assert_eq!(a, sample_clients(10, 4, 3, 7));
        let mut d = a.clone();
        d.dedup();
        assert_eq!(d.len(), 4);
        assert_eq!(sample_clients(5, 5, 0, 1), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn short_run_produces_records() {
        let shards = generate_synthetic(&SyntheticSpec {
            n_clients: 3,
            samples_per_client: 40,
            dim: 2,
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        let fed = train_test_split(shards, 0.25, 4).unwrap();
        let config = FedRunConfig {
            rounds: 3,
            local_steps: 2,
            batch_size: 10,
            lambda: 0.5,
            set_size: 10,
            clients_per_round: Some(2),
            eval_every: 2,
            ..Default::default()
        };
        let out = run(&fed, &config, Model::init(Architecture::Logistic, 2, 0)).unwrap();
        assert_eq!(out.records.len(), 3);
        assert!(out.records[0].metrics.is_none());
        assert!(out.records[1].metrics.is_some() && out.records[2].metrics.is_some());
        for r in &out.records {
            assert_eq!(r.sampled_clients.len(), 2);
            let m = r.metrics.as_ref();
            if let Some(m) = m {
                assert!((m.train.objective - (m.train.loss + 0.5 * m.train.mmd2)).abs() < 1e-9);
            }
        }
        assert_eq!(out.metadata.pseudo_stepsize, 2.0 * 0.05);
    }
}
