//! Harm-controlled prediction-set decision support.
//!
//! Decision support systems that show a human expert a *prediction set* — a
//! threshold-tuned subset of labels ranked by classifier scores — improve
//! average accuracy but can hurt individuals: an expert who would have been
//! right on their own may go wrong inside a set that drops the true label.
//! This crate calibrates the set-size threshold so that the expected
//! counterfactual harm of deploying the system stays below a user bound
//! `alpha`, using conformal risk control.
//!
//! The pieces:
//!
//! - [`data`]: domain types, CSV ingestion, joining, seeded instance-level
//!   splits;
//! - [`predictor`]: threshold and SAPS set-valued predictors with exact
//!   per-label critical thresholds;
//! - [`risk`]: exact piecewise-constant empirical harm and benefit-loss
//!   curves, plus harm bounds;
//! - [`calibrate`]: the certified threshold searches and harm-controlling
//!   sets (one-sided under counterfactual monotonicity, an interval under
//!   interventional monotonicity);
//! - [`mnl`]: the mixture-of-MNLs expert model used to estimate accuracy;
//! - [`scm`]: a synthetic structural causal model with frozen exogenous
//!   noise for exact counterfactual evaluation of the guarantees;
//! - [`experiment`]: repeated-split trade-off pipelines and the
//!   interventional-monotonicity report;
//! - [`cli`]: the `harmctl` binary.
//!
//! Start from the `examples/` directory: each file is a runnable walk
//! through one capability (`cargo run --example calibrate_harm_bound`).
//!
//! ```
//! use harmctl::calibrate::harm_controlling_set_cf;
//! use harmctl::predictor::SetPredictor;
//! use harmctl::scm::{generate_world, WorldConfig};
//!
//! let world = generate_world(&WorldConfig::counterfactual_default(7)).unwrap();
//! let calibration = world.to_dataset().unwrap();
//! let result = harm_controlling_set_cf(&calibration, &SetPredictor::Threshold, 0.1).unwrap();
//! assert!(result.feasible);
//! assert!(result.lower > 0.0 && result.lower <= 1.0);
//! ```

pub mod calibrate;
pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod mnl;
pub mod predictor;
pub mod risk;
pub mod scm;
pub mod stats;

pub use error::{Error, Result};
