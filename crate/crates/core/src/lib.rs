//! Qubit-sphere arithmetic, sphere-indexed arrival fields, a multiclass
//! batch queue simulator and heavy-traffic diffusion-limit experiments.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod engine;
pub mod fields;
pub mod limits;
pub mod qubit;
pub mod rng;
pub mod runner;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] runner::ConfigError),
    #[error(transparent)]
    Qubit(#[from] qubit::QubitError),
    #[error(transparent)]
    Field(#[from] fields::FieldError),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error(transparent)]
    Limit(#[from] limits::LimitError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
