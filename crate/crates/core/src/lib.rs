//! Simulation of cluster-state quantum computation extended by a four-outcome
//! POVM on a two-photon resource.
//!
//! The crate covers the whole pipeline: dense qubit linear algebra
//! ([`linalg`], [`catalog`]), the POVM family and its optical realization
//! ([`povm`]), projective and POVM-driven measurement-based computation with
//! feedforward ([`mbqc`]), photon-count simulation and maximum-likelihood
//! tomography ([`tomography`], [`metrics`]), and the experiment harness that
//! scores many state-preparation settings ([`experiment`]).

pub mod catalog;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mbqc;
pub mod metrics;
pub mod optimize;
pub mod povm;
pub mod tomography;

pub use error::{Error, Result};
pub use experiment::{monte_carlo, run_experiment, ExperimentConfig, NoiseParams, RunReport};
pub use linalg::{c, conjugate_entrywise, partial_trace, psd_sqrt, DensityMatrix, Ket, Operator, Tensor, C64};
pub use povm::{OutcomeLabel, Povm};
