//! Builders for the six dynamic blocks and the dynamical-decoupling
//! schedules that can replace their measurement and feedforward windows.
//!
//! Every block acts on one or two data qubits plus one measured qubit and is
//! an identity channel on the data when noise is off. The five measuring
//! blocks share a skeleton: optional preparation gates, a measurement of the
//! ancilla, the measurement window and feedforward window as two co-targeted
//! idles, a conditional X reset of the ancilla, then the conditional data
//! gate. All conditionals fire on a reported 1. The naming suffix says which
//! state the ancilla is prepared in, so `_c0` blocks idle through their
//! feedforward on the ideal path while `_c1` blocks exercise it every round.

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Instruction};
use crate::error::{Error, Result};
use crate::noise::Timing;
use crate::qmath::gates;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Entangle ancilla with the data via H + CNOT, measure, and correct
    /// both with conditional X gates (teleportation-style disentangling).
    HCnot,
    /// Ancilla stays in |0>; a reported 1 triggers the ancilla reset and a
    /// conditional Z on each data qubit.
    ZC0,
    /// Ancilla flipped to |1> and a Z applied to each data qubit up front;
    /// the ideal report of 1 resets the ancilla and cancels the Z.
    ZC1,
    /// Like ZC0 with the conditional Z replaced by an identity gate of the
    /// same duration.
    IC0,
    /// Like ZC1 with both Z gates replaced by identity gates.
    IC1,
    /// No measurement at all: just the two idle windows.
    Delay,
}

impl BlockKind {
    pub const ALL: [BlockKind; 6] = [
        BlockKind::HCnot,
        BlockKind::ZC0,
        BlockKind::ZC1,
        BlockKind::IC0,
        BlockKind::IC1,
        BlockKind::Delay,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BlockKind::HCnot => "h_cnot",
            BlockKind::ZC0 => "z_c0",
            BlockKind::ZC1 => "z_c1",
            BlockKind::IC0 => "i_c0",
            BlockKind::IC1 => "i_c1",
            BlockKind::Delay => "delay",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "h_cnot" => Ok(BlockKind::HCnot),
            "z_c0" => Ok(BlockKind::ZC0),
            "z_c1" => Ok(BlockKind::ZC1),
            "i_c0" => Ok(BlockKind::IC0),
            "i_c1" => Ok(BlockKind::IC1),
            "delay" => Ok(BlockKind::Delay),
            other => Err(Error::Config(format!(
                "unknown block '{other}' (expected h_cnot, z_c0, z_c1, i_c0, i_c1, delay)"
            ))),
        }
    }

    pub fn uses_measurement(&self) -> bool {
        !matches!(self, BlockKind::Delay)
    }

    /// Whether the block needs a two-qubit gate between the ancilla and the
    /// data qubit, and hence direct connectivity.
    pub fn needs_two_qubit_link(&self) -> bool {
        matches!(self, BlockKind::HCnot)
    }
}

impl std::fmt::Display for BlockKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BlockKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DdMode {
    /// Plain idling through both windows.
    #[default]
    None,
    /// XX echo inside the measurement window; the feedforward window idles.
    Mdd,
    /// Echo spanning both windows; needs tau_meas >= tau_ff.
    Ffdd,
}

impl DdMode {
    pub const ALL: [DdMode; 3] = [DdMode::None, DdMode::Mdd, DdMode::Ffdd];

    pub fn as_str(&self) -> &'static str {
        match self {
            DdMode::None => "none",
            DdMode::Mdd => "mdd",
            DdMode::Ffdd => "ffdd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(DdMode::None),
            "mdd" => Ok(DdMode::Mdd),
            "ffdd" => Ok(DdMode::Ffdd),
            other => Err(Error::Config(format!(
                "unknown decoupling mode '{other}' (expected none, mdd, ffdd)"
            ))),
        }
    }
}

impl std::fmt::Display for DdMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DdMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// A block choice paired with its decoupling schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockSpec {
    pub kind: BlockKind,
    pub dd: DdMode,
}

impl BlockSpec {
    pub fn new(kind: BlockKind, dd: DdMode) -> Self {
        Self { kind, dd }
    }

    /// Standalone single-block circuit: data qubits `0..n_data`, ancilla
    /// `n_data`, classical bit 0.
    pub fn fragment(&self, n_data: usize, timing: &Timing) -> Result<Circuit> {
        block_fragment(self.kind, self.dd, n_data, timing)
    }
}

impl std::fmt::Display for BlockSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}+{}", self.kind, self.dd)
    }
}

/// Append one block to `circuit`. The ancilla must carry the highest index
/// among `data + [measured]`; decoupling pulse placement relies on it.
pub fn append_block(
    circuit: &mut Circuit,
    kind: BlockKind,
    dd: DdMode,
    data: &[usize],
    measured: usize,
    bit: usize,
    timing: &Timing,
) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Circuit("block needs at least one data qubit".into()));
    }
    if data.contains(&measured) {
        return Err(Error::Circuit("ancilla cannot also be a data qubit".into()));
    }
    if data.iter().any(|&d| d > measured) {
        return Err(Error::Circuit(
            "ancilla must carry the highest qubit index in the block".into(),
        ));
    }
    if kind.needs_two_qubit_link() && data.len() != 1 {
        return Err(Error::Circuit(format!(
            "block {kind} couples the ancilla to exactly one data qubit"
        )));
    }

    let mut windows: Vec<usize> = data.to_vec();
    windows.push(measured);
    windows.sort_unstable();

    let mut block = Circuit::new(circuit.n_qubits(), circuit.n_clbits())?;
    match kind {
        BlockKind::Delay => {
            block.push_idle(timing.tau_meas, &windows)?;
            block.push_idle(timing.tau_ff, &windows)?;
        }
        BlockKind::HCnot => {
            let d = data[0];
            block.push_gate("h", gates::h(), &[measured])?;
            block.push_gate("cnot", gates::cnot(), &[measured, d])?;
            block.push_measure(measured, bit)?;
            block.push_idle(timing.tau_meas, &windows)?;
            block.push_idle(timing.tau_ff, &windows)?;
            block.push_conditional(bit, 1, "x", gates::x(), measured)?;
            block.push_conditional(bit, 1, "x", gates::x(), d)?;
        }
        BlockKind::ZC0 | BlockKind::IC0 => {
            block.push_measure(measured, bit)?;
            block.push_idle(timing.tau_meas, &windows)?;
            block.push_idle(timing.tau_ff, &windows)?;
            block.push_conditional(bit, 1, "x", gates::x(), measured)?;
            let (name, m) = data_gate(kind);
            for &d in data {
                block.push_conditional(bit, 1, name, m.clone(), d)?;
            }
        }
        BlockKind::ZC1 | BlockKind::IC1 => {
            block.push_gate("x", gates::x(), &[measured])?;
            let (name, m) = data_gate(kind);
            for &d in data {
                block.push_gate(name, m.clone(), &[d])?;
            }
            block.push_measure(measured, bit)?;
            block.push_idle(timing.tau_meas, &windows)?;
            block.push_idle(timing.tau_ff, &windows)?;
            block.push_conditional(bit, 1, "x", gates::x(), measured)?;
            for &d in data {
                block.push_conditional(bit, 1, name, m.clone(), d)?;
            }
        }
    }
    let block = apply_dd(&block, dd, timing)?;
    circuit.extend(&block)
}

fn data_gate(kind: BlockKind) -> (&'static str, crate::qmath::CMat) {
    match kind {
        BlockKind::ZC0 | BlockKind::ZC1 => ("z", gates::z()),
        BlockKind::IC0 | BlockKind::IC1 => ("id", gates::identity(1)),
        _ => unreachable!("only the conditional-gate blocks carry a data gate"),
    }
}

/// Standalone single-block circuit on `n_data + 1` qubits; see
/// [`BlockSpec::fragment`].
pub fn block_fragment(
    kind: BlockKind,
    dd: DdMode,
    n_data: usize,
    timing: &Timing,
) -> Result<Circuit> {
    let data: Vec<usize> = (0..n_data).collect();
    let mut circuit = Circuit::new(n_data + 1, 1)?;
    append_block(&mut circuit, kind, dd, &data, n_data, 0, timing)?;
    Ok(circuit)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 + 1e-9 * b.abs()
}

/// Replace every measurement-plus-feedforward window (a pair of consecutive
/// idles of durations `tau_meas` then `tau_ff` on the same targets) with the
/// decoupling schedule for `dd`. Pulses go on every window qubit except the
/// highest-indexed one, which is the ancilla by construction. Errors if the
/// circuit contains no such window.
pub fn apply_dd(circuit: &Circuit, dd: DdMode, timing: &Timing) -> Result<Circuit> {
    if dd == DdMode::None {
        return Ok(circuit.clone());
    }
    if dd == DdMode::Ffdd && timing.tau_meas < timing.tau_ff {
        return Err(Error::Config(format!(
            "ffdd needs tau_meas >= tau_ff, got {} < {}",
            timing.tau_meas, timing.tau_ff
        )));
    }
    let instrs = circuit.instructions();
    let mut out = Circuit::new(circuit.n_qubits(), circuit.n_clbits())?;
    let mut replaced = 0usize;
    let mut i = 0usize;
    while i < instrs.len() {
        if i + 1 < instrs.len() {
            if let (
                Instruction::Idle { duration: d1, targets: t1 },
                Instruction::Idle { duration: d2, targets: t2 },
            ) = (&instrs[i], &instrs[i + 1])
            {
                if t1 == t2
                    && t1.len() >= 2
                    && close(*d1, timing.tau_meas)
                    && close(*d2, timing.tau_ff)
                {
                    emit_dd_window(&mut out, dd, t1, timing)?;
                    replaced += 1;
                    i += 2;
                    continue;
                }
            }
        }
        out.append(instrs[i].clone())?;
        i += 1;
    }
    if replaced == 0 {
        return Err(Error::Circuit(
            "no measurement window found to decouple".into(),
        ));
    }
    Ok(out)
}

fn emit_dd_window(out: &mut Circuit, dd: DdMode, targets: &[usize], timing: &Timing) -> Result<()> {
    let ancilla = *targets.iter().max().expect("window has targets");
    let pulsed: Vec<usize> = targets.iter().copied().filter(|&q| q != ancilla).collect();
    let pulse = |out: &mut Circuit| -> Result<()> {
        for &q in &pulsed {
            // Scheduled as instantaneous; gate noise still applies.
            out.push_gate_timed("xdd", gates::x(), &[q], 0.0)?;
        }
        Ok(())
    };
    match dd {
        DdMode::None => unreachable!("handled by the caller"),
        DdMode::Mdd => {
            let m = timing.tau_meas;
            out.push_idle(0.25 * m, targets)?;
            pulse(out)?;
            out.push_idle(0.5 * m, targets)?;
            pulse(out)?;
            out.push_idle(0.25 * m, targets)?;
            out.push_idle(timing.tau_ff, targets)?;
        }
        DdMode::Ffdd => {
            let w = timing.tau_meas - timing.tau_ff;
            out.push_idle(0.25 * w, targets)?;
            pulse(out)?;
            out.push_idle(0.5 * w, targets)?;
            pulse(out)?;
            out.push_idle(0.25 * w, targets)?;
            out.push_idle(timing.tau_ff, targets)?;
            pulse(out)?;
            out.push_idle(timing.tau_ff, targets)?;
            pulse(out)?;
        }
    }
    Ok(())
}
