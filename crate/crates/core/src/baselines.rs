//! Reference trainers: centralized fairness-regularized gradient descent on
//! pooled data, FedAvg with a client-local MMD regularizer, and plain FedAvg.

use serde::{Deserialize, Serialize};

use crate::data::{Federation, TabularDataset};
use crate::error::{Error, Result};
use crate::fairness::{mmd_squared_grad_rows, FairnessSpec};
use crate::federation::{
    evaluate, params_digest, run_engine, sgd_step, FedRunConfig, Regularizer, RoundMetrics, RoundRecord,
    RunFailure, RunOutput,
};
use crate::kernels::Kernel;
use crate::models::Model;

fn default_eval_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralizedConfig {
    pub epochs: usize,
    pub lr: f64,
    pub lambda: f64,
    #[serde(default)]
    pub fairness: FairnessSpec,
    pub kernel: Kernel,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
}

impl Default for CentralizedConfig {
    fn default() -> Self {
        CentralizedConfig {
            epochs: 1000,
            lr: 0.05,
            lambda: 0.0,
            fairness: FairnessSpec::default(),
            kernel: Kernel::DistanceInduced,
            eval_every: 1,
        }
    }
}

impl CentralizedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("`epochs`: must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("`lr`: must be positive, got {}", self.lr)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("`lambda`: must be non-negative, got {}", self.lambda)));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("`eval_every`: must be at least 1".into()));
        }
        self.kernel.validate()
    }
}

#[derive(Debug, Clone)]
pub struct CentralizedOutput {
    pub model: Model,
    pub records: Vec<RoundRecord>,
}

/// Full-gradient descent on `loss + lambda * sum_j MMD^2_j` over the pooled
/// training split. Each epoch is one step. `test` defaults to `train`.
pub fn train_centralized(
    train: &TabularDataset,
    test: Option<&TabularDataset>,
    init: Model,
    config: &CentralizedConfig,
) -> Result<CentralizedOutput> {
    config.validate()?;
    config.fairness.validate(train.dim())?;
    if init.input_dim() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            got: init.input_dim(),
        });
    }
    let test = test.unwrap_or(train);
    let rows: Vec<usize> = (0..train.len()).collect();
    let mut model = init;
    let mut records = Vec::new();
    for epoch in 1..=config.epochs {
        let task = model.grad_task_loss_rows(train, &rows);
        let fair = if config.lambda > 0.0 {
            let g = mmd_squared_grad_rows(&model, train, &rows, &config.fairness, &config.kernel)?;
            if g.empty_cells == 2 * config.fairness.n_sets() {
                return Err(Error::DegenerateGroup("pooled data lacks a protected group".into()));
            }
            Some(g.grad)
        } else {
            None
        };
        sgd_step(model.params_mut(), config.lr, task, config.lambda, fair.as_deref());
        let metrics = if epoch % config.eval_every == 0 || epoch == config.epochs {
            Some(RoundMetrics {
                train: evaluate(&model, train, &config.fairness, &config.kernel, config.lambda)?,
                test: evaluate(&model, test, &config.fairness, &config.kernel, config.lambda)?,
            })
        } else {
            None
        };
        records.push(RoundRecord {
            trainer: "centralized".into(),
            round: epoch,
            theta_id: params_digest(model.params()),
            local_lr: config.lr,
            sampled_clients: Vec::new(),
            empty_cells: 0,
            metrics,
        });
    }
    Ok(CentralizedOutput { model, records })
}

/// FedAvg where each client regularizes the squared MMD between its own
/// minibatch groups. Clients whose batch lacks a group take task-only steps.
pub fn train_local_fair(fed: &Federation, config: &FedRunConfig, init: Model) -> std::result::Result<RunOutput, RunFailure> {
    run_engine(fed, config, init, Regularizer::Local)
}

/// FedAvg without any fairness term; `lambda` is ignored.
pub fn train_fedavg(fed: &Federation, config: &FedRunConfig, init: Model) -> std::result::Result<RunOutput, RunFailure> {
    run_engine(fed, config, init, Regularizer::None)
}
