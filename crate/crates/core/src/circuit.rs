//! Circuit representation: a flat instruction list over a qubit register and
//! a classical bit register, with validation, duration accounting, and a
//! line-oriented text serialization.
//!
//! A `Measure` is the instantaneous projection and bit assignment only; the
//! time the measurement occupies is represented by explicit `Idle`
//! instructions emitted alongside it. This keeps idle windows first-class,
//! so dynamical-decoupling schedules can replace them wholesale without
//! touching anything else, and no window is ever double counted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::Timing;
use crate::qmath::{c, is_unitary, CMat, UNITARY_TOL};

/// Upper bound on classical register width. Long sequences store one bit
/// per block plus the terminal readouts.
pub const MAX_CLBITS: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub enum Instruction {
    /// Unitary gate. `duration: None` means "look up by arity in `Timing`";
    /// `Some(d)` overrides it (seconds). For multi-qubit gates the target
    /// order is significant: `targets[0]` is the first tensor factor of
    /// `matrix` (the control, for a controlled gate).
    Gate {
        name: String,
        matrix: CMat,
        targets: Vec<usize>,
        duration: Option<f64>,
    },
    /// Idle window of `duration` seconds on `targets` (kept sorted). Idle
    /// noise and coherent couplings act on exactly this set, with coupling
    /// terms active only when both endpoints are in it.
    Idle { duration: f64, targets: Vec<usize> },
    /// Z-basis measurement of `qubit` into classical `bit`. Instantaneous;
    /// its wall-clock window is emitted as separate `Idle` instructions.
    Measure { qubit: usize, bit: usize },
    /// One-qubit gate applied iff classical `bit` equals `value`.
    ConditionalGate {
        bit: usize,
        value: u8,
        name: String,
        matrix: CMat,
        target: usize,
    },
    /// Scheduling marker; no physical effect.
    Barrier,
}

impl Instruction {
    /// Resolved duration in seconds.
    pub fn duration(&self, timing: &Timing) -> f64 {
        match self {
            Instruction::Gate { duration: Some(d), .. } => *d,
            Instruction::Gate { targets, .. } => {
                if targets.len() == 1 {
                    timing.tau_1q
                } else {
                    timing.tau_2q
                }
            }
            Instruction::Idle { duration, .. } => *duration,
            Instruction::Measure { .. } => 0.0,
            Instruction::ConditionalGate { .. } => timing.tau_1q,
            Instruction::Barrier => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    n_clbits: usize,
    instructions: Vec<Instruction>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_clbits: usize) -> Result<Self> {
        crate::qmath::check_n_qubits(n_qubits)?;
        if n_clbits > MAX_CLBITS {
            return Err(Error::Resource(format!(
                "{n_clbits} classical bits requested, limit is {MAX_CLBITS}"
            )));
        }
        Ok(Self {
            n_qubits,
            n_clbits,
            instructions: Vec::new(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_clbits(&self) -> usize {
        self.n_clbits
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn count_measures(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| matches!(i, Instruction::Measure { .. }))
            .count()
    }

    fn check_targets(&self, targets: &[usize]) -> Result<()> {
        if targets.is_empty() {
            return Err(Error::Circuit("instruction needs at least one target".into()));
        }
        for &t in targets {
            if t >= self.n_qubits {
                return Err(Error::Circuit(format!(
                    "target qubit {t} out of range for {} qubits",
                    self.n_qubits
                )));
            }
        }
        for i in 0..targets.len() {
            for j in (i + 1)..targets.len() {
                if targets[i] == targets[j] {
                    return Err(Error::Circuit(format!("duplicate target qubit {}", targets[i])));
                }
            }
        }
        Ok(())
    }

    fn check_bit(&self, bit: usize) -> Result<()> {
        if bit >= self.n_clbits {
            return Err(Error::Circuit(format!(
                "classical bit {bit} out of range for {} bits",
                self.n_clbits
            )));
        }
        Ok(())
    }

    /// Validate and append one instruction.
    pub fn append(&mut self, instr: Instruction) -> Result<()> {
        match &instr {
            Instruction::Gate { name, matrix, targets, duration } => {
                self.check_targets(targets)?;
                let dim = 1usize << targets.len();
                if matrix.nrows() != dim || matrix.ncols() != dim {
                    return Err(Error::Dimension {
                        context: "gate matrix",
                        expected: dim,
                        got: matrix.nrows(),
                    });
                }
                if !is_unitary(matrix, UNITARY_TOL) {
                    return Err(Error::Circuit(format!("gate '{name}' is not unitary")));
                }
                if let Some(d) = duration {
                    if *d < 0.0 || !d.is_finite() {
                        return Err(Error::Parameter {
                            name: "duration",
                            value: *d,
                            reason: "must be finite and non-negative",
                        });
                    }
                }
            }
            Instruction::Idle { duration, targets } => {
                self.check_targets(targets)?;
                if *duration < 0.0 || !duration.is_finite() {
                    return Err(Error::Parameter {
                        name: "duration",
                        value: *duration,
                        reason: "must be finite and non-negative",
                    });
                }
            }
            Instruction::Measure { qubit, bit } => {
                self.check_targets(&[*qubit])?;
                self.check_bit(*bit)?;
            }
            Instruction::ConditionalGate { bit, value, name, matrix, target } => {
                self.check_bit(*bit)?;
                self.check_targets(&[*target])?;
                if *value > 1 {
                    return Err(Error::Circuit(format!(
                        "condition value must be 0 or 1, got {value}"
                    )));
                }
                if matrix.nrows() != 2 || matrix.ncols() != 2 {
                    return Err(Error::Dimension {
                        context: "conditional gate matrix",
                        expected: 2,
                        got: matrix.nrows(),
                    });
                }
                if !is_unitary(matrix, UNITARY_TOL) {
                    return Err(Error::Circuit(format!(
                        "conditional gate '{name}' is not unitary"
                    )));
                }
            }
            Instruction::Barrier => {}
        }
        // Idle target order carries no meaning; normalize for comparisons.
        let instr = match instr {
            Instruction::Idle { duration, mut targets } => {
                targets.sort_unstable();
                Instruction::Idle { duration, targets }
            }
            other => other,
        };
        self.instructions.push(instr);
        Ok(())
    }

    pub fn push_gate(&mut self, name: &str, matrix: CMat, targets: &[usize]) -> Result<()> {
        self.append(Instruction::Gate {
            name: name.to_string(),
            matrix,
            targets: targets.to_vec(),
            duration: None,
        })
    }

    pub fn push_gate_timed(
        &mut self,
        name: &str,
        matrix: CMat,
        targets: &[usize],
        duration: f64,
    ) -> Result<()> {
        self.append(Instruction::Gate {
            name: name.to_string(),
            matrix,
            targets: targets.to_vec(),
            duration: Some(duration),
        })
    }

    pub fn push_idle(&mut self, duration: f64, targets: &[usize]) -> Result<()> {
        self.append(Instruction::Idle {
            duration,
            targets: targets.to_vec(),
        })
    }

    pub fn push_measure(&mut self, qubit: usize, bit: usize) -> Result<()> {
        self.append(Instruction::Measure { qubit, bit })
    }

    pub fn push_conditional(
        &mut self,
        bit: usize,
        value: u8,
        name: &str,
        matrix: CMat,
        target: usize,
    ) -> Result<()> {
        self.append(Instruction::ConditionalGate {
            bit,
            value,
            name: name.to_string(),
            matrix,
            target,
        })
    }

    pub fn push_barrier(&mut self) -> Result<()> {
        self.append(Instruction::Barrier)
    }

    pub fn extend(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits || other.n_clbits != self.n_clbits {
            return Err(Error::Circuit(
                "cannot concatenate circuits with different register sizes".into(),
            ));
        }
        self.instructions.extend(other.instructions.iter().cloned());
        Ok(())
    }

    /// Total wall-clock duration, summing resolved instruction durations in
    /// program order. The schedule is sequential: parallelism across qubits
    /// is expressed by multi-target `Idle` windows, not by overlap analysis.
    pub fn total_duration(&self, timing: &Timing) -> f64 {
        self.instructions.iter().map(|i| i.duration(timing)).sum()
    }

    /// Serialize to the `dcrb circuit v1` text format: two header lines,
    /// then one JSON object per instruction. When `timing` is given, each
    /// timed instruction carries an informational `t` field (resolved
    /// duration, seconds) that parsing ignores.
    pub fn to_text(&self, timing: Option<&Timing>) -> String {
        let mut out = String::new();
        out.push_str("# dcrb circuit v1\n");
        out.push_str(&format!("# qubits={} clbits={}\n", self.n_qubits, self.n_clbits));
        for instr in &self.instructions {
            let mut rec = record::from_instruction(instr);
            if let Some(t) = timing {
                let d = instr.duration(t);
                if d > 0.0 {
                    rec.set_resolved(d);
                }
            }
            out.push_str(&serde_json::to_string(&rec).expect("instruction serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(l) if l.trim() == "# dcrb circuit v1" => {}
            other => {
                return Err(Error::Serialization(format!(
                    "expected '# dcrb circuit v1' header, got {other:?}"
                )))
            }
        }
        let sizes = lines.next().ok_or_else(|| {
            Error::Serialization("missing register header line".into())
        })?;
        let (n_qubits, n_clbits) = parse_register_header(sizes)?;
        let mut circuit = Circuit::new(n_qubits, n_clbits)?;
        for line in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let rec: record::Record = serde_json::from_str(line)
                .map_err(|e| Error::Serialization(format!("bad instruction line: {e}")))?;
            circuit.append(rec.into_instruction()?)?;
        }
        Ok(circuit)
    }
}

fn parse_register_header(line: &str) -> Result<(usize, usize)> {
    let err = || Error::Serialization(format!("bad register header: {line:?}"));
    let rest = line.trim().strip_prefix('#').ok_or_else(err)?.trim();
    let mut qubits = None;
    let mut clbits = None;
    for part in rest.split_whitespace() {
        if let Some(v) = part.strip_prefix("qubits=") {
            qubits = v.parse::<usize>().ok();
        } else if let Some(v) = part.strip_prefix("clbits=") {
            clbits = v.parse::<usize>().ok();
        }
    }
    match (qubits, clbits) {
        (Some(q), Some(c)) => Ok((q, c)),
        _ => Err(err()),
    }
}

/// Serde-friendly instruction records for the text format.
mod record {
    use super::*;

    type MatrixRepr = Vec<Vec<(f64, f64)>>;

    fn matrix_to_repr(m: &CMat) -> MatrixRepr {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| (m[(i, j)].re, m[(i, j)].im)).collect())
            .collect()
    }

    fn matrix_from_repr(r: &MatrixRepr) -> Result<CMat> {
        let n = r.len();
        if n == 0 || r.iter().any(|row| row.len() != n) {
            return Err(Error::Serialization("matrix must be square".into()));
        }
        let mut m = CMat::zeros(n, n);
        for (i, row) in r.iter().enumerate() {
            for (j, &(re, im)) in row.iter().enumerate() {
                m[(i, j)] = c(re, im);
            }
        }
        Ok(m)
    }

    #[derive(Serialize, Deserialize)]
    #[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
    pub(super) enum Record {
        Gate {
            name: String,
            targets: Vec<usize>,
            matrix: MatrixRepr,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            duration: Option<f64>,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            t: Option<f64>,
        },
        Idle {
            targets: Vec<usize>,
            duration: f64,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            t: Option<f64>,
        },
        Measure {
            qubit: usize,
            bit: usize,
        },
        Cond {
            bit: usize,
            value: u8,
            name: String,
            target: usize,
            matrix: MatrixRepr,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            t: Option<f64>,
        },
        Barrier,
    }

    impl Record {
        pub(super) fn set_resolved(&mut self, d: f64) {
            match self {
                Record::Gate { t, .. } | Record::Idle { t, .. } | Record::Cond { t, .. } => {
                    *t = Some(d)
                }
                _ => {}
            }
        }

        pub(super) fn into_instruction(self) -> Result<Instruction> {
            Ok(match self {
                Record::Gate { name, targets, matrix, duration, .. } => Instruction::Gate {
                    name,
                    matrix: matrix_from_repr(&matrix)?,
                    targets,
                    duration,
                },
                Record::Idle { targets, duration, .. } => Instruction::Idle { duration, targets },
                Record::Measure { qubit, bit } => Instruction::Measure { qubit, bit },
                Record::Cond { bit, value, name, target, matrix, .. } => {
                    Instruction::ConditionalGate {
                        bit,
                        value,
                        name,
                        matrix: matrix_from_repr(&matrix)?,
                        target,
                    }
                }
                Record::Barrier => Instruction::Barrier,
            })
        }
    }

    pub(super) fn from_instruction(instr: &Instruction) -> Record {
        match instr {
            Instruction::Gate { name, matrix, targets, duration } => Record::Gate {
                name: name.clone(),
                targets: targets.clone(),
                matrix: matrix_to_repr(matrix),
                duration: *duration,
                t: None,
            },
            Instruction::Idle { duration, targets } => Record::Idle {
                targets: targets.clone(),
                duration: *duration,
                t: None,
            },
            Instruction::Measure { qubit, bit } => Record::Measure {
                qubit: *qubit,
                bit: *bit,
            },
            Instruction::ConditionalGate { bit, value, name, matrix, target } => Record::Cond {
                bit: *bit,
                value: *value,
                name: name.clone(),
                target: *target,
                matrix: matrix_to_repr(matrix),
                t: None,
            },
            Instruction::Barrier => Record::Barrier,
        }
    }
}
