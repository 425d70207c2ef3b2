//! The benchmarking protocol: single-qubit Clifford group bookkeeping,
//! builders for the six dynamic blocks, dynamical-decoupling schedules, and
//! assembly of full randomized sequences.

pub mod blocks;
pub mod clifford;
pub mod sequence;

pub use blocks::{append_block, apply_dd, block_fragment, BlockKind, BlockSpec, DdMode};
pub use clifford::{clifford_table, CliffordTable};
pub use sequence::{build_sequence, clifford_indices, sequence_rng, shot_rng, RbConfig};
