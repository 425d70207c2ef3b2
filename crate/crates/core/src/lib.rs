//! Simulation and analysis of randomized benchmarking with mid-circuit
//! measurement and feedforward.
//!
//! The protocol interleaves a dynamic block, a measurement on an ancilla
//! followed by classically conditioned gates, between groups of k random
//! single-qubit Cliffords on each data qubit. Every block variant reduces
//! to the identity on the data when hardware is perfect, so the fitted
//! decay of the ground-state survival isolates the error added by
//! measurement, feedforward, and the idling that surrounds them.
//!
//! Crate layout, bottom up:
//!
//! - [`qmath`]: dense operators, channels, superoperators on up to three
//!   qubits.
//! - [`circuit`]: a flat instruction list with mid-circuit measurement and
//!   classically conditioned gates, plus a text serialization.
//! - [`noise`]: the configurable error model (T1/T2, assignment errors,
//!   depolarizing gates, static ZZ and detuning phases) and its TOML
//!   schema.
//! - [`rbproto`]: the Clifford table, the six dynamic blocks, dynamical
//!   decoupling variants, and deterministic sequence construction.
//! - [`engine`]: density-matrix execution, either shot-sampled or by exact
//!   enumeration over measurement records.
//! - [`oracle`]: closed-form transfer-matrix predictions the simulation is
//!   checked against.
//! - [`analysis`]: exponential decay fitting and error-rate extraction.

pub mod analysis;
pub mod circuit;
pub mod engine;
mod error;
pub mod noise;
pub mod oracle;
pub mod qmath;
pub mod rbproto;

pub use analysis::{extract_epsilon, fit_exponential, CurveMeta, DecayCurve, FitOptions, FitResult};
pub use circuit::{Circuit, Instruction};
pub use engine::{enumerate_branches, run_experiment, run_shot, ExactDistribution, ExperimentResult};
pub use error::{Error, Result};
pub use noise::{
    CoherentCoupling, GateNoise, IdleNoise, NoiseConfig, NoiseModel, ReadoutError, Timing,
};
pub use qmath::{DensityMatrix, KrausChannel, Superoperator};
pub use rbproto::{BlockKind, BlockSpec, DdMode, RbConfig};
