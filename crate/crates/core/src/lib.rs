//! Simulation-trained hidden Markov models for tracking the progress of a
//! resource-constrained process and forecasting its remaining duration.
//!
//! The pipeline: [`model`] describes activities, precedence and resource
//! needs; [`sim`] executes a model tick by tick; [`hmm`] turns an ensemble
//! of traces into an HMM over active-activity sets and decodes noisy
//! resource observations; [`predict`] restarts the model from a decoded
//! state to forecast time to completion; [`experiments`] runs the density
//! sweeps over random model ensembles.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod experiments;
pub mod hmm;
pub mod model;
pub mod predict;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
