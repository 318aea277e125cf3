//! Experiment configuration and the run / sweep / ablation drivers behind the
//! command-line tool.
//!
//! A run is described by one TOML file; see `configs/` in the repository for
//! annotated examples. Every output directory is named after a digest of the
//! resolved configuration and the seed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{train_centralized, train_fedavg, train_local_fair, CentralizedConfig};
use crate::data::{
    generate_synthetic, load_csv, partition_by_column, train_test_split, CsvColumns, Federation, ProtectedThreshold,
    Standardizer, SyntheticSpec,
};
use crate::dp::DpMechanism;
use crate::error::{Error, Result};
use crate::fairness::{Criterion, FairnessSpec};
use crate::federation::{run, FedRunConfig, RoundRecord, RunFailure, SetSampling};
use crate::kernels::Kernel;
use crate::models::{Architecture, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trainer {
    /// Statistical parity only.
    Algorithm1,
    /// Any supported criterion.
    Algorithm2,
    Centralized,
    LocalFair,
    Fedavg,
}

impl FromStr for Trainer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "algorithm1" => Trainer::Algorithm1,
            "algorithm2" => Trainer::Algorithm2,
            "centralized" => Trainer::Centralized,
            "local_fair" => Trainer::LocalFair,
            "fedavg" => Trainer::Fedavg,
            other => return Err(Error::Config(format!("`trainer`: unknown trainer `{other}`"))),
        })
    }
}

impl Trainer {
    pub fn as_str(&self) -> &'static str {
        match self {
            Trainer::Algorithm1 => "algorithm1",
            Trainer::Algorithm2 => "algorithm2",
            Trainer::Centralized => "centralized",
            Trainer::LocalFair => "local_fair",
            Trainer::Fedavg => "fedavg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic {
        n_clients: usize,
        samples_per_client: usize,
        dim: usize,
        #[serde(default = "one")]
        heterogeneity: f64,
    },
    Csv {
        path: PathBuf,
        features: Vec<String>,
        label: String,
        protected: String,
        #[serde(default)]
        protected_threshold: Option<ProtectedThreshold>,
        /// Column whose values define the clients; one client when absent.
        #[serde(default)]
        group: Option<String>,
        #[serde(default = "one_usize")]
        min_client_size: usize,
    },
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn quarter() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    #[serde(default = "quarter")]
    pub test_fraction: f64,
    #[serde(default)]
    pub standardize: bool,
}

/// Federated training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub rounds: usize,
    pub local_steps: usize,
    pub local_lr: f64,
    pub global_lr: f64,
    pub clients_per_round: Option<usize>,
    pub lambda: f64,
    pub set_size: usize,
    pub batch_size: usize,
    pub step_decay: f64,
    pub weighted_aggregation: bool,
    pub set_sampling: SetSampling,
    pub eval_every: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let d = FedRunConfig::default();
        TrainingConfig {
            rounds: d.rounds,
            local_steps: d.local_steps,
            local_lr: d.local_lr,
            global_lr: d.global_lr,
            clients_per_round: d.clients_per_round,
            lambda: d.lambda,
            set_size: d.set_size,
            batch_size: d.batch_size,
            step_decay: d.step_decay,
            weighted_aggregation: d.weighted_aggregation,
            set_sampling: d.set_sampling,
            eval_every: d.eval_every,
        }
    }
}

/// Settings of the centralized trainer; `lambda` comes from `[training]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CentralizedSettings {
    pub epochs: usize,
    pub lr: f64,
}

impl Default for CentralizedSettings {
    fn default() -> Self {
        CentralizedSettings { epochs: 1000, lr: 0.05 }
    }
}

pub const DEFAULT_KERNEL: Kernel = Kernel::Gaussian { bandwidth: 0.1 };

fn default_kernel() -> Kernel {
    DEFAULT_KERNEL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub trainer: Trainer,
    #[serde(default)]
    pub seed: u64,
    pub data: DataConfig,
    #[serde(default)]
    pub model: Architecture,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub centralized: CentralizedSettings,
    #[serde(default)]
    pub fairness: FairnessSpec,
    #[serde(default = "default_kernel")]
    pub kernel: Kernel,
    #[serde(default)]
    pub dp: DpMechanism,
}

impl ExperimentConfig {
    /// The synthetic experiment: ten clients with 200 points each in ten
    /// dimensions, logistic regression, energy-distance regularizer.
    pub fn synthetic(trainer: Trainer, lambda: f64, seed: u64) -> Self {
        ExperimentConfig {
            trainer,
            seed,
            data: DataConfig {
                source: DataSource::Synthetic {
                    n_clients: 10,
                    samples_per_client: 200,
                    dim: 10,
                    heterogeneity: 1.0,
                },
                test_fraction: 0.25,
                standardize: false,
            },
            model: Architecture::Logistic,
            training: TrainingConfig {
                lambda,
                ..TrainingConfig::default()
            },
            centralized: CentralizedSettings::default(),
            fairness: FairnessSpec::default(),
            kernel: Kernel::DistanceInduced,
            dp: DpMechanism::none(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let DataSource::Csv { path: csv, .. } = &mut config.data.source {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex digest of the resolved configuration.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..6])
    }

    pub fn run_dir_name(&self) -> String {
        format!("{}-s{}", self.digest(), self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.data.test_fraction >= 0.0 && self.data.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "`data.test_fraction`: must lie in [0, 1), got {}",
                self.data.test_fraction
            )));
        }
        if let DataSource::Synthetic {
            n_clients,
            samples_per_client,
            dim,
            heterogeneity,
        } = self.data.source
        {
            if n_clients == 0 || samples_per_client == 0 || dim == 0 {
                return Err(Error::Config("`data.source`: sizes must be at least 1".into()));
            }
            if !(0.5..=1.0).contains(&heterogeneity) {
                return Err(Error::Config(format!(
                    "`data.source.heterogeneity`: must lie in [0.5, 1], got {heterogeneity}"
                )));
            }
        }
        if self.trainer == Trainer::Algorithm1 && self.fairness.criterion != Criterion::StatisticalParity {
            return Err(Error::Config(
                "`fairness`: algorithm1 supports statistical parity only; use algorithm2".into(),
            ));
        }
        if let Architecture::Mlp { hidden: 0 } = self.model {
            return Err(Error::Config("`model.hidden`: must be at least 1".into()));
        }
        match self.trainer {
            Trainer::Centralized => self.centralized_config().validate(),
            _ => self.fed_run_config().validate(usize::MAX),
        }
    }

    pub fn fed_run_config(&self) -> FedRunConfig {
        let t = &self.training;
        FedRunConfig {
            rounds: t.rounds,
            local_steps: t.local_steps,
            local_lr: t.local_lr,
            global_lr: t.global_lr,
            clients_per_round: t.clients_per_round,
            lambda: t.lambda,
            set_size: t.set_size,
            batch_size: t.batch_size,
            step_decay: t.step_decay,
            seed: self.seed,
            fairness: self.fairness,
            kernel: self.kernel,
            dp: DpMechanism {
                seed: self.seed,
                ..self.dp
            },
            weighted_aggregation: t.weighted_aggregation,
            set_sampling: t.set_sampling,
            eval_every: t.eval_every,
        }
    }

    pub fn centralized_config(&self) -> CentralizedConfig {
        CentralizedConfig {
            epochs: self.centralized.epochs,
            lr: self.centralized.lr,
            lambda: self.training.lambda,
            fairness: self.fairness,
            kernel: self.kernel,
            eval_every: self.training.eval_every,
        }
    }

    pub fn build_federation(&self) -> Result<Federation> {
        let shards = match &self.data.source {
            DataSource::Synthetic {
                n_clients,
                samples_per_client,
                dim,
                heterogeneity,
            } => generate_synthetic(&SyntheticSpec {
                n_clients: *n_clients,
                samples_per_client: *samples_per_client,
                dim: *dim,
                heterogeneity: *heterogeneity,
                seed: self.seed,
            })?,
            DataSource::Csv {
                path,
                features,
                label,
                protected,
                protected_threshold,
                group,
                min_client_size,
            } => {
                let loaded = load_csv(
                    path,
                    &CsvColumns {
                        features: features.clone(),
                        label: label.clone(),
                        protected: protected.clone(),
                        protected_threshold: *protected_threshold,
                        group: group.clone(),
                    },
                )?;
                match loaded.groups {
                    Some(groups) => partition_by_column(&loaded.dataset, &groups, *min_client_size)?,
                    None => vec![crate::data::ClientShard {
                        client_id: 0,
                        weight: 1.0,
                        dataset: loaded.dataset,
                    }],
                }
            }
        };
        let fed = train_test_split(shards, self.data.test_fraction, self.seed)?;
        Ok(if self.data.standardize {
            Standardizer::standardize(&fed)
        } else {
            fed
        })
    }

    fn with_seed(&self, seed: u64) -> Self {
        ExperimentConfig { seed, ..self.clone() }
    }

    fn with_lambda(&self, lambda: f64) -> Self {
        let mut c = self.clone();
        c.training.lambda = lambda;
        c
    }

    /// Only the final round is evaluated; sweeps never read the others.
    fn final_eval_only(&self) -> Self {
        let mut c = self.clone();
        c.training.eval_every = match c.trainer {
            Trainer::Centralized => c.centralized.epochs,
            _ => c.training.rounds,
        };
        c
    }
}

#[derive(Debug, Clone)]
pub struct TrainerOutput {
    pub records: Vec<RoundRecord>,
    pub model: Model,
    pub pseudo_stepsize: Option<f64>,
    pub timings: Vec<Duration>,
}

impl TrainerOutput {
    pub fn final_record(&self) -> Option<&RoundRecord> {
        self.records.iter().rev().find(|r| r.metrics.is_some())
    }
}

/// Builds the federation and runs the configured trainer.
pub fn run_experiment(config: &ExperimentConfig) -> std::result::Result<TrainerOutput, RunFailure> {
    let early = |error| RunFailure {
        records: Vec::new(),
        error,
    };
    config.validate().map_err(early)?;
    let fed = config.build_federation().map_err(early)?;
    let init = Model::init(config.model, fed.dim(), config.seed);
    let fed_config = config.fed_run_config();
    let out = match config.trainer {
        Trainer::Algorithm1 | Trainer::Algorithm2 => run(&fed, &fed_config, init)?,
        Trainer::LocalFair => train_local_fair(&fed, &fed_config, init)?,
        Trainer::Fedavg => train_fedavg(&fed, &fed_config, init)?,
        Trainer::Centralized => {
            let out = train_centralized(&fed.pooled_train(), Some(&fed.pooled_test()), init, &config.centralized_config())
                .map_err(early)?;
            return Ok(TrainerOutput {
                records: out.records,
                model: out.model,
                pseudo_stepsize: None,
                timings: Vec::new(),
            });
        }
    };
    Ok(TrainerOutput {
        records: out.records,
        model: out.model,
        pseudo_stepsize: Some(out.metadata.pseudo_stepsize),
        timings: out.timings,
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub const SUMMARY_COLUMNS: [&str; 14] = [
    "trainer",
    "seed",
    "lambda",
    "rounds",
    "train_loss",
    "test_loss",
    "train_mmd2",
    "test_mmd2",
    "train_objective",
    "test_objective",
    "train_accuracy",
    "test_accuracy",
    "test_sp_unfairness",
    "test_mmd",
];

fn write_records(path: &Path, records: &[RoundRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_summary(path: &Path, config: &ExperimentConfig, records: &[RoundRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_COLUMNS)?;
    if let Some(r) = records.iter().rev().find(|r| r.metrics.is_some()) {
        let m = r.metrics.as_ref().expect("filtered");
        let mut row = vec![
            config.trainer.as_str().to_string(),
            config.seed.to_string(),
            config.training.lambda.to_string(),
            r.round.to_string(),
        ];
        row.extend(
            [
                m.train.loss,
                m.test.loss,
                m.train.mmd2,
                m.test.mmd2,
                m.train.objective,
                m.test.objective,
                m.train.accuracy,
                m.test.accuracy,
                m.test.sp_unfairness,
                m.test.mmd,
            ]
            .iter()
            .map(f64::to_string),
        );
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `records.jsonl`, `summary.csv`, `model.bin`, `config.toml` and
/// `timings.csv` into `dir`.
pub fn write_run(dir: &Path, config: &ExperimentConfig, out: &TrainerOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("config.toml"), config.to_toml())?;
    write_records(&dir.join("records.jsonl"), &out.records)?;
    write_summary(&dir.join("summary.csv"), config, &out.records)?;
    let model_path = dir.join("model.bin");
    let file = File::create(&model_path).map_err(|e| Error::io(&model_path, e))?;
    let mut w = BufWriter::new(file);
    out.model.write_checkpoint(&mut w).map_err(|e| Error::io(&model_path, e))?;
    w.flush().map_err(|e| Error::io(&model_path, e))?;
    let mut timings = String::from("round,seconds\n");
    for (i, t) in out.timings.iter().enumerate() {
        timings.push_str(&format!("{},{}\n", i + 1, t.as_secs_f64()));
    }
    write_file(&dir.join("timings.csv"), timings)?;
    if let Some(eta) = out.pseudo_stepsize {
        write_file(&dir.join("metadata.json"), format!("{{\"pseudo_stepsize\":{eta}}}\n"))?;
    }
    Ok(())
}

/// Runs one experiment and writes its outputs below `out_root`. A failed run
/// still writes the completed rounds before returning the error.
pub fn cmd_run(config: &ExperimentConfig, out_root: &Path) -> Result<PathBuf> {
    let dir = out_root.join(config.run_dir_name());
    match run_experiment(config) {
        Ok(out) => {
            write_run(&dir, config, &out)?;
            info!("wrote {}", dir.display());
            Ok(dir)
        }
        Err(failure) => {
            if !failure.records.is_empty() {
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                write_file(&dir.join("config.toml"), config.to_toml())?;
                write_records(&dir.join("records.jsonl"), &failure.records)?;
            }
            Err(failure.into())
        }
    }
}

/// Log-spaced grid `lo..=hi` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl FromStr for LambdaGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("`lambda-grid`: expected lo:hi:n, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let grid = LambdaGrid {
            lo: parts[0].trim().parse().map_err(|_| bad())?,
            hi: parts[1].trim().parse().map_err(|_| bad())?,
            n: parts[2].trim().parse().map_err(|_| bad())?,
        };
        grid.validate()?;
        Ok(grid)
    }
}

impl LambdaGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.hi >= self.lo && self.hi.is_finite()) || self.n == 0 {
            return Err(Error::Config(format!(
                "`lambda-grid`: need 0 < lo <= hi and n >= 1, got {}:{}:{}",
                self.lo, self.hi, self.n
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let (a, b) = (self.lo.log10(), self.hi.log10());
        (0..self.n)
            .map(|i| {
                if i == 0 {
                    self.lo
                } else if i == self.n - 1 {
                    self.hi
                } else {
                    10f64.powf(a + (b - a) * i as f64 / (self.n - 1) as f64)
                }
            })
            .collect()
    }
}

/// Final metrics of one sweep run, or the reason it failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRun {
    pub lambda: f64,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub sp_unfairness: Option<f64>,
    pub mmd: Option<f64>,
    pub error: Option<String>,
}

/// Mean and standard error over seeds at one lambda.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_se: f64,
    pub sp_mean: f64,
    pub sp_se: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub runs: Vec<SweepRun>,
    pub table: Vec<SweepPoint>,
    pub failures: usize,
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("`workers`: {e}")))
}

/// One run per `(lambda, seed)`, each evaluated at its final round only.
pub fn sweep(config: &ExperimentConfig, lambdas: &[f64], seeds: &[u64], workers: usize) -> Result<SweepResult> {
    let base = config.final_eval_only();
    let jobs: Vec<(f64, u64)> = lambdas
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&s| (l, s)))
        .collect();
    let runs: Vec<SweepRun> = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(lambda, seed)| {
                let c = base.with_lambda(lambda).with_seed(seed);
                match run_experiment(&c) {
                    Ok(out) => {
                        let m = out.final_record().and_then(|r| r.metrics.as_ref()).map(|m| m.test);
                        SweepRun {
                            lambda,
                            seed,
                            accuracy: m.map(|m| m.accuracy),
                            sp_unfairness: m.map(|m| m.sp_unfairness),
                            mmd: m.map(|m| m.mmd),
                            error: None,
                        }
                    }
                    Err(f) => {
                        warn!("run lambda={lambda} seed={seed} failed: {f}");
                        SweepRun {
                            lambda,
                            seed,
                            accuracy: None,
                            sp_unfairness: None,
                            mmd: None,
                            error: Some(f.to_string()),
                        }
                    }
                }
            })
            .collect()
    });
    let failures = runs.iter().filter(|r| r.error.is_some()).count();
    let table = lambdas
        .iter()
        .map(|&lambda| {
            let ok: Vec<&SweepRun> = runs.iter().filter(|r| r.lambda == lambda && r.error.is_none()).collect();
            let acc: Vec<f64> = ok.iter().filter_map(|r| r.accuracy).collect();
            let sp: Vec<f64> = ok.iter().filter_map(|r| r.sp_unfairness).collect();
            let (accuracy_mean, accuracy_se) = mean_and_se(&acc);
            let (sp_mean, sp_se) = mean_and_se(&sp);
            SweepPoint {
                lambda,
                runs: ok.len(),
                accuracy_mean,
                accuracy_se,
                sp_mean,
                sp_se,
            }
        })
        .collect();
    Ok(SweepResult { runs, table, failures })
}

/// Indices of the points `(accuracy, unfairness)` that no other point beats
/// on both axes, in input order.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let (acc, unf) = points[i];
            !points.iter().any(|&(a, u)| a >= acc && u <= unf && (a > acc || u < unf))
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const TABLE_HEADER: [&str; 6] = ["lambda", "runs", "accuracy_mean", "accuracy_se", "sp_mean", "sp_se"];

fn write_sweep(dir: &Path, tag: &str, result: &SweepResult) -> Result<()> {
    write_csv(
        &dir.join(format!("runs{tag}.csv")),
        &result.runs,
        &["lambda", "seed", "accuracy", "sp_unfairness", "mmd", "error"],
    )?;
    write_csv(&dir.join(format!("table{tag}.csv")), &result.table, &TABLE_HEADER)?;
    let valid: Vec<&SweepPoint> = result.table.iter().filter(|p| p.runs > 0).collect();
    let points: Vec<(f64, f64)> = valid.iter().map(|p| (p.accuracy_mean, p.sp_mean)).collect();
    let front: Vec<SweepPoint> = pareto_front(&points).into_iter().map(|i| *valid[i]).collect();
    write_csv(&dir.join(format!("pareto{tag}.csv")), &front, &TABLE_HEADER)
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub dir: PathBuf,
    pub result: SweepResult,
}

/// Sweep over `grid` and `seeds`; writes `runs.csv`, `table.csv` and
/// `pareto.csv`.
pub fn cmd_sweep(
    config: &ExperimentConfig,
    grid: &LambdaGrid,
    seeds: &[u64],
    workers: usize,
    out_root: &Path,
) -> Result<SweepReport> {
    grid.validate()?;
    config.validate()?;
    let dir = out_root.join(format!("sweep-{}", config.digest()));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_file(&dir.join("config.toml"), config.to_toml())?;
    let result = sweep(config, &grid.values(), seeds, workers)?;
    write_sweep(&dir, "", &result)?;
    Ok(SweepReport { dir, result })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    SetSize,
    Heterogeneity,
    Convergence,
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "set_size" | "set-size" => Ok(Ablation::SetSize),
            "heterogeneity" => Ok(Ablation::Heterogeneity),
            "convergence" => Ok(Ablation::Convergence),
            other => Err(Error::Config(format!("unknown ablation `{other}`"))),
        }
    }
}

pub const SET_SIZES: [usize; 3] = [20, 50, 100];
pub const HETEROGENEITY_GRID: [f64; 6] = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
pub const HETEROGENEITY_LAMBDA: f64 = 50.0;
pub const CONVERGENCE_LAMBDA: f64 = 0.5;

/// Mean `± 1.96 SE` over seeds at one heterogeneity level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeterogeneityRow {
    pub heterogeneity: f64,
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_ci: f64,
    pub sp_mean: f64,
    pub sp_ci: f64,
}

/// Per-round means over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub round: usize,
    pub train_ce: f64,
    pub train_mmd: f64,
    pub test_ce: f64,
    pub test_mmd: f64,
    pub train_objective: f64,
    pub test_objective: f64,
}

pub fn set_size_ablation(
    config: &ExperimentConfig,
    lambdas: &[f64],
    seeds: &[u64],
    workers: usize,
) -> Result<Vec<(usize, SweepResult)>> {
    SET_SIZES
        .iter()
        .map(|&size| {
            let mut c = config.clone();
            c.training.set_size = size;
            Ok((size, sweep(&c, lambdas, seeds, workers)?))
        })
        .collect()
}

pub fn heterogeneity_ablation(config: &ExperimentConfig, seeds: &[u64], workers: usize) -> Result<Vec<HeterogeneityRow>> {
    let DataSource::Synthetic { .. } = config.data.source else {
        return Err(Error::Config("heterogeneity ablation needs a synthetic data source".into()));
    };
    HETEROGENEITY_GRID
        .iter()
        .map(|&h| {
            let mut c = config.clone();
            if let DataSource::Synthetic { heterogeneity, .. } = &mut c.data.source {
                *heterogeneity = h;
            }
            let r = sweep(&c, &[HETEROGENEITY_LAMBDA], seeds, workers)?;
            let p = r.table[0];
            Ok(HeterogeneityRow {
                heterogeneity: h,
                runs: p.runs,
                accuracy_mean: p.accuracy_mean,
                accuracy_ci: 1.96 * p.accuracy_se,
                sp_mean: p.sp_mean,
                sp_ci: 1.96 * p.sp_se,
            })
        })
        .collect()
}

pub fn convergence_ablation(config: &ExperimentConfig, seeds: &[u64], workers: usize) -> Result<Vec<ConvergenceRow>> {
    let mut base = config.with_lambda(CONVERGENCE_LAMBDA);
    base.training.eval_every = 1;
    let outputs: Vec<TrainerOutput> = pool(workers)?.install(|| {
        seeds
            .par_iter()
            .map(|&s| run_experiment(&base.with_seed(s)).map_err(Error::from))
            .collect::<Result<_>>()
    })?;
    let rounds = outputs.iter().map(|o| o.records.len()).min().unwrap_or(0);
    Ok((0..rounds)
        .map(|i| {
            let mean = |f: &dyn Fn(&crate::federation::RoundMetrics) -> f64| {
                let v: Vec<f64> = outputs
                    .iter()
                    .filter_map(|o| o.records[i].metrics.as_ref().map(f))
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            ConvergenceRow {
                round: outputs[0].records[i].round,
                train_ce: mean(&|m| m.train.loss),
                train_mmd: mean(&|m| m.train.mmd2),
                test_ce: mean(&|m| m.test.loss),
                test_mmd: mean(&|m| m.test.mmd2),
                train_objective: mean(&|m| m.train.objective),
                test_objective: mean(&|m| m.test.objective),
            }
        })
        .collect())
}

/// Runs an ablation and writes its tables; returns the output directory and
/// the number of failed runs.
pub fn cmd_ablate(
    which: Ablation,
    config: &ExperimentConfig,
    grid: &LambdaGrid,
    seeds: &[u64],
    workers: usize,
    out_root: &Path,
) -> Result<(PathBuf, usize)> {
    config.validate()?;
    let name = serde_json::to_value(which)?.as_str().unwrap_or("ablation").to_string();
    let dir = out_root.join(format!("ablate-{name}-{}", config.digest()));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_file(&dir.join("config.toml"), config.to_toml())?;
    let failures = match which {
        Ablation::SetSize => {
            let results = set_size_ablation(config, &grid.values(), seeds, workers)?;
            for (size, r) in &results {
                write_sweep(&dir, &format!("_set{size}"), r)?;
            }
            results.iter().map(|(_, r)| r.failures).sum()
        }
        Ablation::Heterogeneity => {
            let rows = heterogeneity_ablation(config, seeds, workers)?;
            write_csv(
                &dir.join("heterogeneity.csv"),
                &rows,
                &["heterogeneity", "runs", "accuracy_mean", "accuracy_ci", "sp_mean", "sp_ci"],
            )?;
            rows.iter().map(|r| seeds.len() - r.runs).sum()
        }
        Ablation::Convergence => {
            let rows = convergence_ablation(config, seeds, workers)?;
            write_csv(
                &dir.join("convergence.csv"),
                &rows,
                &["round", "train_ce", "train_mmd", "test_ce", "test_mmd", "train_objective", "test_objective"],
            )?;
            0
        }
    };
    Ok((dir, failures))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_and_spacing() {
        let g: LambdaGrid = "1e-5:100:50".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 50);
        assert_eq!(v[0], 1e-5);
        assert_eq!(v[49], 100.0);
        let ratio = v[1] / v[0];
        for w in v.windows(2) {
            assert!((w[1] / w[0] - ratio).abs() < 1e-9);
        }
        assert_eq!("0.5:0.5:1".parse::<LambdaGrid>().unwrap().values(), vec![0.5]);
        assert!("1:2".parse::<LambdaGrid>().is_err());
        assert!("0:2:3".parse::<LambdaGrid>().is_err());
    }

    #[test]
    fn pareto_drops_dominated_point() {
        let pts = [(0.9, 0.1), (0.8, 0.2), (0.95, 0.3)];
        assert_eq!(pareto_front(&pts), vec![0, 2]);
        assert_eq!(pareto_front(&[(0.5, 0.5), (0.5, 0.5)]), vec![0, 1]);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = ExperimentConfig::synthetic(Trainer::Algorithm1, 0.3, 7);
        let back = ExperimentConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
    }

    #[test]
    fn negative_lambda_names_field() {
        let mut c = ExperimentConfig::synthetic(Trainer::Algorithm1, 0.3, 7);
        c.training.lambda = -1.0;
        let err = ExperimentConfig::from_toml_str(&c.to_toml()).unwrap_err().to_string();
        assert!(err.contains("lambda"), "{err}");
    }

    #[test]
    fn algorithm1_rejects_other_criteria() {
        let mut c = ExperimentConfig::synthetic(Trainer::Algorithm1, 0.3, 7);
        c.fairness = FairnessSpec::new(Criterion::EqualOpportunity);
        assert!(c.validate().is_err());
        c.trainer = Trainer::Algorithm2;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_and_se(&[2.0]), (2.0, 0.0));
    }
}
