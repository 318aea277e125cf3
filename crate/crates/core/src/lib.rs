//! Simulator for fairness-regularized federated learning with a global
//! maximum-mean-discrepancy penalty.
//!
//! Clients never share data. Each round the server broadcasts sampled scores
//! of the current model, which lets every client compute its share of the
//! gradient of the global (non-decomposable) MMD regularizer.
//!
//! ```no_run
//! use fairfl::{data, federation, models};
//!
//! let shards = data::generate_synthetic(&data::SyntheticSpec::default()).unwrap();
//! let fed = data::train_test_split(shards, 0.25, 0).unwrap();
//! let config = federation::FedRunConfig { lambda: 1.0, ..Default::default() };
//! let init = models::Model::init(models::Architecture::Logistic, fed.dim(), 0);
//! let out = federation::run(&fed, &config, init).unwrap();
//! println!("{:?}", out.final_metrics());
//! ```

pub mod baselines;
pub mod data;
pub mod dp;
pub mod error;
pub mod experiment;
pub mod fairness;
pub mod federation;
pub mod kernels;
pub mod models;
pub mod rng;

pub use error::{Error, Result};
