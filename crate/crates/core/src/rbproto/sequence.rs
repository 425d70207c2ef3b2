//! Assembly of full benchmarking sequences: k random Cliffords on each data
//! qubit, then the dynamic block, repeated `n` times, closed by a recovery
//! Clifford per data qubit and terminal readout of every qubit.
//!
//! Randomness is organized so results are reproducible bit for bit: one
//! master seed, with every consumer (Clifford draws per data-qubit position,
//! measurement sampling per shot) on its own counter-mode stream. Circuits
//! for a lone data qubit and for the same position inside a wider register
//! draw identical Clifford sequences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::noise::Timing;
use crate::qmath::check_n_qubits;

use super::blocks::{append_block, BlockKind, DdMode};
use super::clifford::clifford_table;

pub const MAX_LENGTHS: usize = 256;
pub const MAX_SEEDS: usize = 1 << 16;
pub const MAX_SHOTS: usize = 1 << 24;
pub const MAX_BLOCKS: usize = 4000;

/// Experiment layout: which sequence lengths to run, how many random
/// sequences ("seeds") per length, and how many shots per sequence.
/// `lengths` counts Cliffords per data qubit; a block is inserted after
/// every `k` of them, so each entry must be divisible by `k` and a
/// sequence of length `l` carries `l / k` blocks plus the recovery gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbConfig {
    pub lengths: Vec<usize>,
    pub k: usize,
    pub seeds: usize,
    pub shots: usize,
    pub data_qubits: usize,
    pub connected: bool,
    pub master_seed: u64,
}

impl Default for RbConfig {
    fn default() -> Self {
        Self {
            lengths: vec![0, 25, 50, 100, 150, 200, 300],
            k: 5,
            seeds: 20,
            shots: 300,
            data_qubits: 1,
            connected: true,
            master_seed: 0,
        }
    }
}

impl RbConfig {
    pub fn n_qubits(&self) -> usize {
        self.data_qubits + 1
    }

    pub fn measured_qubit(&self) -> usize {
        self.data_qubits
    }

    /// Blocks in the sequence at a given length index.
    pub fn n_blocks(&self, length_idx: usize) -> usize {
        self.lengths[length_idx] / self.k
    }

    /// Classical bits holding per-block outcomes for a length-`n` sequence.
    pub fn block_bits(&self, kind: BlockKind, n_blocks: usize) -> usize {
        if kind.uses_measurement() {
            n_blocks
        } else {
            0
        }
    }

    /// Classical bit holding data qubit `p`'s terminal readout.
    pub fn data_terminal_bit(&self, kind: BlockKind, n_blocks: usize, p: usize) -> usize {
        self.block_bits(kind, n_blocks) + p
    }

    /// Classical bit holding the ancilla's terminal readout.
    pub fn ancilla_terminal_bit(&self, kind: BlockKind, n_blocks: usize) -> usize {
        self.block_bits(kind, n_blocks) + self.data_qubits
    }

    pub fn validate(&self) -> Result<()> {
        check_n_qubits(self.n_qubits())?;
        if self.data_qubits == 0 {
            return Err(Error::Config("need at least one data qubit".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.lengths.is_empty() || self.lengths.len() > MAX_LENGTHS {
            return Err(Error::Config(format!(
                "need between 1 and {MAX_LENGTHS} sequence lengths"
            )));
        }
        if let Some(&l) = self.lengths.iter().find(|&&l| l % self.k != 0) {
            return Err(Error::Config(format!(
                "sequence length {l} is not divisible by k = {}",
                self.k
            )));
        }
        if let Some(&l) = self.lengths.iter().find(|&&l| l / self.k > MAX_BLOCKS) {
            return Err(Error::Config(format!(
                "sequence length {l} exceeds the {MAX_BLOCKS}-block limit at k = {}",
                self.k
            )));
        }
        if self.seeds == 0 || self.seeds > MAX_SEEDS {
            return Err(Error::Config(format!(
                "seeds must lie in 1..={MAX_SEEDS}"
            )));
        }
        if self.shots == 0 || self.shots > MAX_SHOTS {
            return Err(Error::Config(format!(
                "shots must lie in 1..={MAX_SHOTS}"
            )));
        }
        Ok(())
    }
}

// Stream id layout (64 bits): shot in 0..24, seed index in 24..40,
// data-qubit position in 40..48, length index in 48..56, bit 63 set on
// sequence-generation streams so they can never collide with shot streams.
fn stream_id(length_idx: usize, seed_idx: usize, qubit_pos: usize, shot: usize, tag: bool) -> u64 {
    assert!(shot < MAX_SHOTS, "shot index {shot} out of range");
    assert!(seed_idx < MAX_SEEDS, "seed index {seed_idx} out of range");
    assert!(qubit_pos < 256, "qubit position {qubit_pos} out of range");
    assert!(length_idx < MAX_LENGTHS, "length index {length_idx} out of range");
    (shot as u64)
        | (seed_idx as u64) << 24
        | (qubit_pos as u64) << 40
        | (length_idx as u64) << 48
        | (tag as u64) << 63
}

/// Generator stream for the Clifford draws of one data-qubit position.
pub fn sequence_rng(
    master_seed: u64,
    length_idx: usize,
    seed_idx: usize,
    qubit_pos: usize,
) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(length_idx, seed_idx, qubit_pos, 0, true));
    rng
}

/// Sampling stream for one shot of one sequence.
pub fn shot_rng(master_seed: u64, length_idx: usize, seed_idx: usize, shot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(length_idx, seed_idx, 0, shot, false));
    rng
}

/// The Clifford table indices drawn for one data-qubit position.
pub fn clifford_indices(
    master_seed: u64,
    length_idx: usize,
    seed_idx: usize,
    qubit_pos: usize,
    count: usize,
) -> Vec<usize> {
    let table = clifford_table();
    let mut rng = sequence_rng(master_seed, length_idx, seed_idx, qubit_pos);
    (0..count).map(|_| table.sample(&mut rng)).collect()
}

/// Build the full sequence circuit for one (length index, seed index) cell.
///
/// Layout of the classical register: per-block outcomes first (measuring
/// blocks only), then the terminal readout of each data qubit, then the
/// terminal readout of the ancilla.
pub fn build_sequence(
    cfg: &RbConfig,
    kind: BlockKind,
    dd: DdMode,
    length_idx: usize,
    seed_idx: usize,
    timing: &Timing,
) -> Result<Circuit> {
    cfg.validate()?;
    if length_idx >= cfg.lengths.len() {
        return Err(Error::Config(format!(
            "length index {length_idx} out of range for {} lengths",
            cfg.lengths.len()
        )));
    }
    if seed_idx >= cfg.seeds {
        return Err(Error::Config(format!(
            "seed index {seed_idx} out of range for {} seeds",
            cfg.seeds
        )));
    }
    if kind.needs_two_qubit_link() {
        if cfg.data_qubits != 1 {
            return Err(Error::Config(format!(
                "block {kind} runs on exactly one data qubit"
            )));
        }
        if !cfg.connected {
            return Err(Error::Config(format!(
                "block {kind} needs the ancilla directly connected to the data qubit"
            )));
        }
    }

    let n_blocks = cfg.n_blocks(length_idx);
    let table = clifford_table();
    let data: Vec<usize> = (0..cfg.data_qubits).collect();
    let ancilla = cfg.measured_qubit();
    let n_clbits = cfg.block_bits(kind, n_blocks) + cfg.data_qubits + 1;
    let mut circuit = Circuit::new(cfg.n_qubits(), n_clbits)?;

    let draws: Vec<Vec<usize>> = data
        .iter()
        .map(|&p| clifford_indices(cfg.master_seed, length_idx, seed_idx, p, n_blocks * cfg.k))
        .collect();

    for j in 0..n_blocks {
        for (p, &dq) in data.iter().enumerate() {
            for t in 0..cfg.k {
                let idx = draws[p][j * cfg.k + t];
                circuit.push_gate(&format!("cl{idx}"), table.matrix(idx).clone(), &[dq])?;
            }
        }
        circuit.push_barrier()?;
        append_block(&mut circuit, kind, dd, &data, ancilla, j, timing)?;
        circuit.push_barrier()?;
    }

    // Recovery: one Clifford per data qubit undoing all its draws. Emitted
    // even at length 0 (as the identity element) so every sequence ends in
    // a gate of the same cost.
    for (p, &dq) in data.iter().enumerate() {
        let rec = table.recovery(&draws[p]);
        circuit.push_gate(&format!("cl{rec}"), table.matrix(rec).clone(), &[dq])?;
    }
    for (p, &dq) in data.iter().enumerate() {
        circuit.push_measure(dq, cfg.data_terminal_bit(kind, n_blocks, p))?;
    }
    circuit.push_measure(ancilla, cfg.ancilla_terminal_bit(kind, n_blocks))?;
    Ok(circuit)
}
