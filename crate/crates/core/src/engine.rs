//! Density-matrix execution of circuits under the noise model, two ways:
//! Monte Carlo shots with sampled measurements, and exact enumeration of
//! every measurement-record branch with its probability.
//!
//! Circuits are compiled once into a flat op list with embedded matrices
//! and closed-form channel parameters, then replayed per shot or per branch.

use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;

use crate::circuit::{Circuit, Instruction};
use crate::error::{Error, Result};
use crate::noise::{
    coherent_phases, damp_params, sample_measurement_raw, NoiseModel, ReadoutError,
};
use crate::qmath::{bit_of, cr, dagger, embed, CMat, DensityMatrix};
use crate::rbproto::{build_sequence, shot_rng, BlockKind, DdMode, RbConfig};

/// Branch enumeration doubles per measurement; cap it well before that
/// becomes unreasonable.
pub const MAX_ENUM_MEASURES: usize = 16;

const BRANCH_PRUNE: f64 = 1e-30;

enum Op {
    Unitary {
        u: CMat,
        udag: CMat,
    },
    /// rho -> q rho + (1 - q) (maximally mixed on targets (x) rest).
    Depol {
        q: f64,
        target_mask: usize,
    },
    /// Diagonal phase factors e^{-i phi_b}, one per basis state.
    Phases {
        factors: Vec<C64>,
    },
    /// T1/T2 idle decay of one qubit: excited decay `gamma`, off-diagonal
    /// factor `coh`.
    Damp {
        qubit: usize,
        gamma: f64,
        coh: f64,
    },
    Measure {
        qubit: usize,
        bit: usize,
        err: ReadoutError,
        /// Deterministic kick on spectator qubits, pre-exponentiated.
        phases: Option<Vec<C64>>,
    },
    Cond {
        bit: usize,
        value: u8,
        u: CMat,
        udag: CMat,
        depol_q: f64,
        target_mask: usize,
    },
}

/// A circuit lowered against a noise model, ready to execute.
pub struct CompiledCircuit {
    n_qubits: usize,
    n_clbits: usize,
    dim: usize,
    n_measures: usize,
    ops: Vec<Op>,
}

fn mask_of(targets: &[usize], n: usize) -> usize {
    targets.iter().map(|&t| 1usize << (n - 1 - t)).sum()
}

fn phase_factors(phases: &[f64]) -> Vec<C64> {
    phases.iter().map(|&p| C64::new(p.cos(), -p.sin())).collect()
}

impl CompiledCircuit {
    pub fn compile(circuit: &Circuit, noise: &NoiseModel) -> Result<Self> {
        noise.validate()?;
        let n = circuit.n_qubits();
        if noise.n_qubits != n {
            return Err(Error::Dimension {
                context: "noise model register",
                expected: n,
                got: noise.n_qubits,
            });
        }
        let dim = 1usize << n;
        let mut ops = Vec::with_capacity(circuit.len() * 2);
        let mut n_measures = 0usize;

        for instr in circuit.instructions() {
            match instr {
                Instruction::Gate { matrix, targets, .. } => {
                    let u = embed(matrix, targets, n)?;
                    let udag = dagger(&u);
                    ops.push(Op::Unitary { u, udag });
                    let p = if targets.len() == 1 {
                        noise.gate.depol_1q
                    } else {
                        noise.gate.depol_2q
                    };
                    if p > 0.0 {
                        ops.push(Op::Depol {
                            q: 1.0 - p,
                            target_mask: mask_of(targets, n),
                        });
                    }
                }
                Instruction::Idle { duration, targets } => {
                    if *duration == 0.0 {
                        continue;
                    }
                    let phases = coherent_phases(&noise.coupling, targets, *duration);
                    if phases.iter().any(|&p| p != 0.0) {
                        ops.push(Op::Phases {
                            factors: phase_factors(&phases),
                        });
                    }
                    for &q in targets {
                        let idle = &noise.idle[q];
                        let dp = damp_params(idle.t1, idle.t2, *duration);
                        if dp.gamma > 0.0 || dp.coh < 1.0 {
                            ops.push(Op::Damp {
                                qubit: q,
                                gamma: dp.gamma,
                                coh: dp.coh,
                            });
                        }
                    }
                }
                Instruction::Measure { qubit, bit } => {
                    n_measures += 1;
                    let kick = &noise.coupling.meas_induced_phase;
                    let phases = if kick.iter().enumerate().any(|(q, &p)| q != *qubit && p != 0.0)
                    {
                        let mut per_state = vec![0.0; dim];
                        for (b, ph) in per_state.iter_mut().enumerate() {
                            for (q, &p) in kick.iter().enumerate() {
                                if q != *qubit {
                                    *ph += p * bit_of(b, q, n) as f64;
                                }
                            }
                        }
                        Some(phase_factors(&per_state))
                    } else {
                        None
                    };
                    ops.push(Op::Measure {
                        qubit: *qubit,
                        bit: *bit,
                        err: noise.readout[*qubit],
                        phases,
                    });
                }
                Instruction::ConditionalGate { bit, value, matrix, target, .. } => {
                    let u = embed(matrix, &[*target], n)?;
                    let udag = dagger(&u);
                    ops.push(Op::Cond {
                        bit: *bit,
                        value: *value,
                        u,
                        udag,
                        depol_q: 1.0 - noise.gate.depol_1q,
                        target_mask: mask_of(&[*target], n),
                    });
                }
                Instruction::Barrier => {}
            }
        }
        Ok(Self {
            n_qubits: n,
            n_clbits: circuit.n_clbits(),
            dim,
            n_measures,
            ops,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_clbits(&self) -> usize {
        self.n_clbits
    }

    pub fn n_measures(&self) -> usize {
        self.n_measures
    }
}

fn apply_unitary(state: &mut CMat, tmp: &mut CMat, tmp2: &mut CMat, u: &CMat, udag: &CMat) {
    tmp.gemm(cr(1.0), u, state, cr(0.0));
    tmp2.gemm(cr(1.0), tmp, udag, cr(0.0));
    state.copy_from(tmp2);
}

fn apply_phases(state: &mut CMat, factors: &[C64]) {
    let dim = state.nrows();
    for j in 0..dim {
        for i in 0..dim {
            state[(i, j)] *= factors[i] * factors[j].conj();
        }
    }
}

fn apply_damp(state: &mut CMat, n: usize, qubit: usize, gamma: f64, coh: f64) {
    let dim = state.nrows();
    let mask = 1usize << (n - 1 - qubit);
    for i in 0..dim {
        for j in 0..dim {
            let (bi, bj) = (i & mask != 0, j & mask != 0);
            match (bi, bj) {
                (false, false) => {
                    let add = state[(i | mask, j | mask)] * cr(gamma);
                    state[(i, j)] += add;
                }
                (true, true) => state[(i, j)] *= cr(1.0 - gamma),
                _ => state[(i, j)] *= cr(coh),
            }
        }
    }
}

/// In-place `rho -> q rho + (1 - q) (I_t / 2^k (x) tr_t rho)`.
fn apply_depol(state: &mut CMat, scratch: &mut CMat, target_mask: usize, q: f64) {
    let dim = state.nrows();
    let k_dim = target_mask.count_ones();
    let norm = 1.0 / (1usize << k_dim) as f64;
    scratch.fill(C64::default());
    let keep = !target_mask & (dim - 1);
    for i0 in 0..dim {
        if i0 & target_mask != 0 {
            continue;
        }
        for j0 in 0..dim {
            if j0 & target_mask != 0 {
                continue;
            }
            let mut s = C64::default();
            for b in 0..dim {
                if b & keep == 0 && b & target_mask == b {
                    s += state[(i0 | b, j0 | b)];
                }
            }
            s *= cr(norm);
            for b in 0..dim {
                if b & keep == 0 && b & target_mask == b {
                    scratch[(i0 | b, j0 | b)] = s;
                }
            }
        }
    }
    let (q_c, p_c) = (cr(q), cr(1.0 - q));
    for j in 0..dim {
        for i in 0..dim {
            state[(i, j)] = state[(i, j)] * q_c + scratch[(i, j)] * p_c;
        }
    }
}

struct Scratch {
    tmp: CMat,
    tmp2: CMat,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Self {
            tmp: CMat::zeros(dim, dim),
            tmp2: CMat::zeros(dim, dim),
        }
    }
}

fn run_shot_with<R: Rng + ?Sized>(
    compiled: &CompiledCircuit,
    rng: &mut R,
    state: &mut CMat,
    scratch: &mut Scratch,
    record: &mut Vec<u8>,
) {
    let n = compiled.n_qubits;
    state.fill(C64::default());
    state[(0, 0)] = cr(1.0);
    record.clear();
    record.resize(compiled.n_clbits, 0);

    for op in &compiled.ops {
        match op {
            Op::Unitary { u, udag } => {
                apply_unitary(state, &mut scratch.tmp, &mut scratch.tmp2, u, udag)
            }
            Op::Depol { q, target_mask } => {
                apply_depol(state, &mut scratch.tmp, *target_mask, *q)
            }
            Op::Phases { factors } => apply_phases(state, factors),
            Op::Damp { qubit, gamma, coh } => apply_damp(state, n, *qubit, *gamma, *coh),
            Op::Measure { qubit, bit, err, phases } => {
                if let Some(f) = phases {
                    apply_phases(state, f);
                }
                record[*bit] = sample_measurement_raw(state, n, *qubit, err, rng);
            }
            Op::Cond { bit, value, u, udag, depol_q, target_mask } => {
                if record[*bit] == *value {
                    apply_unitary(state, &mut scratch.tmp, &mut scratch.tmp2, u, udag);
                    if *depol_q < 1.0 {
                        apply_depol(state, &mut scratch.tmp, *target_mask, *depol_q);
                    }
                }
            }
        }
    }
}

/// Run one shot from the all-zeros state; returns the classical record.
pub fn run_shot<R: Rng + ?Sized>(compiled: &CompiledCircuit, rng: &mut R) -> Vec<u8> {
    let mut state = CMat::zeros(compiled.dim, compiled.dim);
    let mut scratch = Scratch::new(compiled.dim);
    let mut record = Vec::new();
    run_shot_with(compiled, rng, &mut state, &mut scratch, &mut record);
    record
}

/// Exact outcome distribution of a circuit: one entry per measurement
/// record with nonvanishing probability, with the conditional state.
pub struct ExactDistribution {
    /// (classical record, probability), in deterministic branch order.
    pub outcomes: Vec<(Vec<u8>, f64)>,
    /// Normalized state conditioned on each record, aligned with `outcomes`.
    pub states: Vec<DensityMatrix>,
}

impl ExactDistribution {
    /// Total probability of records satisfying a predicate.
    pub fn probability_where<F: Fn(&[u8]) -> bool>(&self, pred: F) -> f64 {
        self.outcomes
            .iter()
            .filter(|(r, _)| pred(r))
            .map(|(_, w)| w)
            .sum()
    }

    pub fn total_probability(&self) -> f64 {
        self.outcomes.iter().map(|(_, w)| w).sum()
    }
}

fn project(mat: &CMat, n: usize, qubit: usize, value: u8) -> CMat {
    let dim = mat.nrows();
    let mask = 1usize << (n - 1 - qubit);
    let want = (value as usize) << (n - 1 - qubit);
    let mut out = CMat::zeros(dim, dim);
    for i in 0..dim {
        if i & mask != want {
            continue;
        }
        for j in 0..dim {
            if j & mask == want {
                out[(i, j)] = mat[(i, j)];
            }
        }
    }
    out
}

/// Walk every measurement branch of `circuit`, starting from `initial`,
/// and return the exact record distribution. Fails if the circuit has more
/// than [`MAX_ENUM_MEASURES`] measurements.
pub fn enumerate_branches(
    circuit: &Circuit,
    noise: &NoiseModel,
    initial: &DensityMatrix,
) -> Result<ExactDistribution> {
    if circuit.count_measures() > MAX_ENUM_MEASURES {
        return Err(Error::Resource(format!(
            "{} measurements to enumerate, limit is {MAX_ENUM_MEASURES}",
            circuit.count_measures()
        )));
    }
    if initial.n_qubits() != circuit.n_qubits() {
        return Err(Error::Dimension {
            context: "initial state",
            expected: circuit.n_qubits(),
            got: initial.n_qubits(),
        });
    }
    let compiled = CompiledCircuit::compile(circuit, noise)?;
    let n = compiled.n_qubits;
    let mut scratch = Scratch::new(compiled.dim);

    struct Branch {
        record: Vec<u8>,
        weight: f64,
        mat: CMat,
    }
    let mut branches = vec![Branch {
        record: vec![0; compiled.n_clbits],
        weight: 1.0,
        mat: initial.matrix().clone(),
    }];

    for op in &compiled.ops {
        match op {
            Op::Unitary { u, udag } => {
                for b in &mut branches {
                    apply_unitary(&mut b.mat, &mut scratch.tmp, &mut scratch.tmp2, u, udag);
                }
            }
            Op::Depol { q, target_mask } => {
                for b in &mut branches {
                    apply_depol(&mut b.mat, &mut scratch.tmp, *target_mask, *q);
                }
            }
            Op::Phases { factors } => {
                for b in &mut branches {
                    apply_phases(&mut b.mat, factors);
                }
            }
            Op::Damp { qubit, gamma, coh } => {
                for b in &mut branches {
                    apply_damp(&mut b.mat, n, *qubit, *gamma, *coh);
                }
            }
            Op::Cond { bit, value, u, udag, depol_q, target_mask } => {
                for b in &mut branches {
                    if b.record[*bit] == *value {
                        apply_unitary(&mut b.mat, &mut scratch.tmp, &mut scratch.tmp2, u, udag);
                        if *depol_q < 1.0 {
                            apply_depol(&mut b.mat, &mut scratch.tmp, *target_mask, *depol_q);
                        }
                    }
                }
            }
            Op::Measure { qubit, bit, err, phases } => {
                let mut next = Vec::with_capacity(branches.len() * 2);
                for b in &mut branches {
                    if let Some(f) = phases {
                        apply_phases(&mut b.mat, f);
                    }
                    let mut s0 = project(&b.mat, n, *qubit, 0);
                    let mut s1 = project(&b.mat, n, *qubit, 1);
                    if err.qnd_flip > 0.0 {
                        for s in [&mut s0, &mut s1] {
                            let mut flipped = s.clone();
                            crate::noise::flip_qubit_in_place(&mut flipped, n, *qubit);
                            *s = &*s * cr(1.0 - err.qnd_flip) + flipped * cr(err.qnd_flip);
                        }
                    }
                    for (reported, w0, w1) in [
                        (0u8, 1.0 - err.p01, err.p10),
                        (1u8, err.p01, 1.0 - err.p10),
                    ] {
                        let mix = &s0 * cr(w0) + &s1 * cr(w1);
                        let tr: f64 = (0..mix.nrows()).map(|i| mix[(i, i)].re).sum();
                        let weight = b.weight * tr;
                        if weight < BRANCH_PRUNE {
                            continue;
                        }
                        let mut record = b.record.clone();
                        record[*bit] = reported;
                        next.push(Branch {
                            record,
                            weight,
                            mat: mix / cr(tr),
                        });
                    }
                }
                branches = next;
            }
        }
    }

    let mut outcomes = Vec::with_capacity(branches.len());
    let mut states = Vec::with_capacity(branches.len());
    for b in branches {
        outcomes.push((b.record, b.weight));
        states.push(DensityMatrix::new(b.mat)?);
    }
    Ok(ExactDistribution { outcomes, states })
}

/// Survival statistics of one benchmarking experiment.
///
/// `seed_means[p][li][si]` is the fraction of shots where data qubit `p`
/// read out 0 at the end of sequence (length index `li`, seed `si`).
pub struct ExperimentResult {
    pub lengths: Vec<usize>,
    pub seeds: usize,
    pub shots: usize,
    pub seed_means: Vec<Vec<Vec<f64>>>,
    /// Fraction of shots whose ancilla terminal readout was 0.
    pub ancilla_zero: Vec<Vec<f64>>,
    /// Fraction of ones among all mid-circuit block outcomes (NaN when the
    /// block takes no measurement).
    pub block_ones: Vec<Vec<f64>>,
}

impl ExperimentResult {
    pub fn mean(&self, data_pos: usize, length_idx: usize) -> f64 {
        let s = &self.seed_means[data_pos][length_idx];
        s.iter().sum::<f64>() / s.len() as f64
    }

    /// Scatter of per-sequence means over sqrt(seeds); binomial when only
    /// one sequence was run.
    pub fn stderr(&self, data_pos: usize, length_idx: usize) -> f64 {
        let s = &self.seed_means[data_pos][length_idx];
        let m = self.mean(data_pos, length_idx);
        if s.len() < 2 {
            return (m * (1.0 - m) / self.shots as f64).sqrt();
        }
        let var = s.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (s.len() - 1) as f64;
        (var / s.len() as f64).sqrt()
    }

    /// (length, mean, stderr) triples for one data qubit.
    pub fn curve(&self, data_pos: usize) -> Vec<(usize, f64, f64)> {
        self.lengths
            .iter()
            .enumerate()
            .map(|(li, &n)| (n, self.mean(data_pos, li), self.stderr(data_pos, li)))
            .collect()
    }
}

/// Run the full experiment: every length, every random sequence, every
/// shot. `jobs` bounds the worker threads (0 picks the rayon default); the
/// result is bitwise independent of `jobs` because every shot draws from
/// its own counter-based stream and reduction order is fixed.
pub fn run_experiment(
    cfg: &RbConfig,
    kind: BlockKind,
    dd: DdMode,
    noise: &NoiseModel,
    jobs: usize,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    if noise.n_qubits != cfg.n_qubits() {
        return Err(Error::Dimension {
            context: "noise model register",
            expected: cfg.n_qubits(),
            got: noise.n_qubits,
        });
    }

    struct TaskOut {
        data_zero: Vec<f64>,
        anc_zero: f64,
        block_ones: f64,
    }

    let tasks: Vec<(usize, usize)> = (0..cfg.lengths.len())
        .flat_map(|li| (0..cfg.seeds).map(move |si| (li, si)))
        .collect();

    let run_task = |&(li, si): &(usize, usize)| -> Result<TaskOut> {
        let circuit = build_sequence(cfg, kind, dd, li, si, &noise.timing)?;
        let compiled = CompiledCircuit::compile(&circuit, noise)?;
        let n_blocks = cfg.n_blocks(li);
        let block_bits = cfg.block_bits(kind, n_blocks);
        let anc_bit = cfg.ancilla_terminal_bit(kind, n_blocks);

        let mut state = CMat::zeros(compiled.dim, compiled.dim);
        let mut scratch = Scratch::new(compiled.dim);
        let mut record = Vec::new();
        let mut data_zero = vec![0usize; cfg.data_qubits];
        let mut anc_zero = 0usize;
        let mut mid_ones = 0usize;

        for shot in 0..cfg.shots {
            let mut rng = shot_rng(cfg.master_seed, li, si, shot);
            run_shot_with(&compiled, &mut rng, &mut state, &mut scratch, &mut record);
            for (p, count) in data_zero.iter_mut().enumerate() {
                if record[cfg.data_terminal_bit(kind, n_blocks, p)] == 0 {
                    *count += 1;
                }
            }
            if record[anc_bit] == 0 {
                anc_zero += 1;
            }
            mid_ones += record[..block_bits].iter().filter(|&&b| b == 1).count();
        }
        let shots = cfg.shots as f64;
        Ok(TaskOut {
            data_zero: data_zero.iter().map(|&c| c as f64 / shots).collect(),
            anc_zero: anc_zero as f64 / shots,
            block_ones: if block_bits == 0 {
                f64::NAN
            } else {
                mid_ones as f64 / (shots * block_bits as f64)
            },
        })
    };

    let outs: Vec<TaskOut> = if jobs == 1 {
        tasks.iter().map(run_task).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
        pool.install(|| tasks.par_iter().map(run_task).collect::<Result<_>>())?
    };

    let mut seed_means =
        vec![vec![vec![0.0; cfg.seeds]; cfg.lengths.len()]; cfg.data_qubits];
    let mut ancilla_zero = vec![vec![0.0; cfg.seeds]; cfg.lengths.len()];
    let mut block_ones = vec![vec![0.0; cfg.seeds]; cfg.lengths.len()];
    for ((li, si), out) in tasks.iter().zip(outs) {
        for p in 0..cfg.data_qubits {
            seed_means[p][*li][*si] = out.data_zero[p];
        }
        ancilla_zero[*li][*si] = out.anc_zero;
        block_ones[*li][*si] = out.block_ones;
    }
    Ok(ExperimentResult {
        lengths: cfg.lengths.clone(),
        seeds: cfg.seeds,
        shots: cfg.shots,
        seed_means,
        ancilla_zero,
        block_ones,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseConfig, Timing};
    use crate::qmath::{gates, max_abs_diff, KrausChannel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn timing() -> Timing {
        Timing {
            tau_1q: 60e-9,
            tau_2q: 660e-9,
            tau_meas: 1512e-9,
            tau_ff: 1060e-9,
        }
    }

    fn noiseless(n: usize) -> NoiseModel {
        NoiseModel::noiseless(n, timing()).unwrap()
    }

    fn zeros(n: usize) -> DensityMatrix {
        DensityMatrix::basis(n, &vec![0; n]).unwrap()
    }

    #[test]
    fn bell_circuit_splits_evenly() {
        let mut c = Circuit::new(2, 2).unwrap();
        c.push_gate("h", gates::h(), &[0]).unwrap();
        c.push_gate("cnot", gates::cnot(), &[0, 1]).unwrap();
        c.push_measure(0, 0).unwrap();
        c.push_measure(1, 1).unwrap();
        let dist = enumerate_branches(&c, &noiseless(2), &zeros(2)).unwrap();
        assert!((dist.total_probability() - 1.0).abs() < 1e-12);
        assert_eq!(dist.outcomes.len(), 2);
        for (record, w) in &dist.outcomes {
            assert_eq!(record[0], record[1]);
            assert!((w - 0.5).abs() < 1e-12);
        }

        // Monte Carlo agrees and the two bits always match.
        let compiled = CompiledCircuit::compile(&c, &noiseless(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 4000;
        let mut ones = 0;
        for _ in 0..n {
            let r = run_shot(&compiled, &mut rng);
            assert_eq!(r[0], r[1]);
            ones += r[0] as usize;
        }
        let f = ones as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.04, "frequency {f}"); // 5 sigma
    }

    #[test]
    fn enumeration_matches_monte_carlo_with_noise() {
        let mut cfgn = NoiseConfig::default();
        cfgn.p01 = 0.15;
        cfgn.p10 = 0.05;
        cfgn.qnd_flip = 0.1;
        cfgn.depol_1q = 0.02;
        cfgn.zz_hz = -40e3;
        let noise = NoiseModel::uniform_pair(&cfgn).unwrap();

        let mut c = Circuit::new(2, 2).unwrap();
        c.push_gate("h", gates::h(), &[0]).unwrap();
        c.push_measure(1, 0).unwrap();
        c.push_idle(1512e-9, &[0, 1]).unwrap();
        c.push_conditional(0, 1, "x", gates::x(), 1).unwrap();
        c.push_gate("h", gates::h(), &[0]).unwrap();
        c.push_measure(0, 1).unwrap();

        let dist = enumerate_branches(&c, &noise, &zeros(2)).unwrap();
        assert!((dist.total_probability() - 1.0).abs() < 1e-12);

        let compiled = CompiledCircuit::compile(&c, &noise).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 40_000usize;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n {
            *counts.entry(run_shot(&compiled, &mut rng)).or_insert(0usize) += 1;
        }
        for (record, w) in &dist.outcomes {
            let f = *counts.get(record).unwrap_or(&0) as f64 / n as f64;
            let sigma = (w * (1.0 - w) / n as f64).sqrt().max(1e-4);
            assert!(
                (f - w).abs() < 5.0 * sigma,
                "record {record:?}: {f} vs {w}"
            );
        }
    }

    #[test]
    fn depol_op_matches_kraus_channel() {
        let mut cfgn = NoiseConfig::default();
        cfgn.depol_1q = 0.1;
        let noise = NoiseModel::from_config(&cfgn, 1).unwrap();
        let mut c = Circuit::new(1, 0).unwrap();
        c.push_gate("x", gates::x(), &[0]).unwrap();
        let dist = enumerate_branches(&c, &noise, &zeros(1)).unwrap();
        assert_eq!(dist.outcomes.len(), 1);
        let expect = KrausChannel::depolarizing_1q(0.1)
            .unwrap()
            .apply(
                &DensityMatrix::basis(1, &[1]).unwrap(),
                &[0],
            )
            .unwrap();
        assert!(max_abs_diff(dist.states[0].matrix(), expect.matrix()) < 1e-12);
    }

    #[test]
    fn two_qubit_depol_acts_on_the_pair() {
        let mut cfgn = NoiseConfig::default();
        cfgn.depol_2q = 0.2;
        let noise = NoiseModel::from_config(&cfgn, 2).unwrap();
        let mut c = Circuit::new(2, 0).unwrap();
        c.push_gate("cnot", gates::cnot(), &[0, 1]).unwrap();
        let dist = enumerate_branches(&c, &noise, &zeros(2)).unwrap();
        // |00><00| depolarized: (1 - p) |00><00| + p I/4.
        let m = dist.states[0].matrix();
        assert!((m[(0, 0)].re - (0.8 + 0.05)).abs() < 1e-12);
        for i in 1..4 {
            assert!((m[(i, i)].re - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn damp_op_matches_idle_kraus_channel() {
        let mut cfgn = NoiseConfig::default();
        cfgn.t1 = 120e-6;
        cfgn.t2 = 150e-6;
        let noise = NoiseModel::from_config(&cfgn, 2).unwrap();
        let tau = 3.3e-6;
        let mut c = Circuit::new(2, 0).unwrap();
        c.push_gate("h", gates::h(), &[0]).unwrap();
        c.push_gate("x", gates::x(), &[1]).unwrap();
        c.push_idle(tau, &[0, 1]).unwrap();
        // Gate depol off for an exact channel comparison.
        let mut clean = noise.clone();
        clean.gate.depol_1q = 0.0;
        let dist = enumerate_branches(&c, &clean, &zeros(2)).unwrap();

        let ch = crate::noise::idle_channel(120e-6, 150e-6, tau).unwrap();
        let mut expect = DensityMatrix::basis(2, &[0, 1]).unwrap();
        expect = expect
            .evolve(&embed(&gates::h(), &[0], 2).unwrap())
            .unwrap();
        expect = ch.apply(&expect, &[0]).unwrap();
        expect = ch.apply(&expect, &[1]).unwrap();
        assert!(max_abs_diff(dist.states[0].matrix(), expect.matrix()) < 1e-12);
    }

    #[test]
    fn conditional_fires_on_matching_record() {
        let mut c = Circuit::new(2, 2).unwrap();
        c.push_gate("x", gates::x(), &[1]).unwrap();
        c.push_measure(1, 0).unwrap();
        c.push_conditional(0, 1, "x", gates::x(), 0).unwrap();
        c.push_measure(0, 1).unwrap();
        let dist = enumerate_branches(&c, &noiseless(2), &zeros(2)).unwrap();
        assert_eq!(dist.outcomes.len(), 1);
        assert_eq!(dist.outcomes[0].0, vec![1, 1]);
        assert!((dist.outcomes[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measurement_kick_rotates_spectators() {
        let phi = 0.7;
        let mut noise = noiseless(2);
        noise.coupling.meas_induced_phase = vec![phi, phi];
        let mut c = Circuit::new(2, 1).unwrap();
        c.push_gate("h", gates::h(), &[0]).unwrap();
        c.push_measure(1, 0).unwrap();
        let dist = enumerate_branches(&c, &noise, &zeros(2)).unwrap();
        // Data coherence picked up e^{-i phi}; basis (data, ancilla) puts it
        // at (0, 2).
        let m = dist.states[0].matrix();
        let expect = 0.5 * C64::new(phi.cos(), phi.sin());
        assert!((m[(0, 2)] - expect).norm() < 1e-12);
    }

    #[test]
    fn enumeration_cap_and_trivial_cases() {
        let mut c = Circuit::new(1, 17).unwrap();
        for i in 0..17 {
            c.push_measure(0, i).unwrap();
        }
        assert!(enumerate_branches(&c, &noiseless(1), &zeros(1)).is_err());

        let mut plain = Circuit::new(1, 0).unwrap();
        plain.push_gate("h", gates::h(), &[0]).unwrap();
        let dist = enumerate_branches(&plain, &noiseless(1), &zeros(1)).unwrap();
        assert_eq!(dist.outcomes.len(), 1);
        assert!((dist.outcomes[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn register_mismatch_is_rejected() {
        let c = Circuit::new(2, 1).unwrap();
        assert!(CompiledCircuit::compile(&c, &noiseless(3)).is_err());
    }

    #[test]
    fn noiseless_experiment_survives_perfectly() {
        let cfg = RbConfig {
            lengths: vec![0, 2, 6],
            k: 2,
            seeds: 3,
            shots: 20,
            data_qubits: 1,
            connected: true,
            master_seed: 42,
        };
        for kind in [BlockKind::ZC0, BlockKind::ZC1, BlockKind::HCnot, BlockKind::Delay] {
            let res = run_experiment(&cfg, kind, DdMode::None, &noiseless(2), 1).unwrap();
            for li in 0..cfg.lengths.len() {
                assert_eq!(res.mean(0, li), 1.0, "{kind} length {li}");
            }
        }
    }

    #[test]
    fn experiment_is_deterministic_across_job_counts() {
        let cfg = RbConfig {
            lengths: vec![0, 4],
            k: 2,
            seeds: 3,
            shots: 25,
            data_qubits: 1,
            connected: true,
            master_seed: 5,
        };
        let mut noise_cfg = NoiseConfig::default();
        noise_cfg.p01 = 0.05;
        noise_cfg.p10 = 0.05;
        let noise = NoiseModel::uniform_pair(&noise_cfg).unwrap();
        let a = run_experiment(&cfg, BlockKind::ZC0, DdMode::None, &noise, 1).unwrap();
        let b = run_experiment(&cfg, BlockKind::ZC0, DdMode::None, &noise, 4).unwrap();
        assert_eq!(a.seed_means, b.seed_means);
        assert_eq!(a.ancilla_zero, b.ancilla_zero);
        let c = run_experiment(&cfg, BlockKind::ZC0, DdMode::None, &noise, 2).unwrap();
        assert_eq!(a.seed_means, c.seed_means);
    }

    #[test]
    fn assignment_errors_show_up_in_block_records() {
        let cfg = RbConfig {
            lengths: vec![4],
            k: 1,
            seeds: 2,
            shots: 400,
            data_qubits: 1,
            connected: true,
            master_seed: 1,
        };
        let mut noise_cfg = NoiseConfig {
            p01: 0.2,
            p10: 0.2,
            ..NoiseConfig::default()
        };
        noise_cfg.t1 = f64::INFINITY;
        noise_cfg.t2 = f64::INFINITY;
        noise_cfg.depol_1q = 0.0;
        noise_cfg.depol_2q = 0.0;
        let noise = NoiseModel::uniform_pair(&noise_cfg).unwrap();
        let res = run_experiment(&cfg, BlockKind::ZC0, DdMode::None, &noise, 1).unwrap();
        // A misreported 0 flips the ancilla through the conditional X, so
        // reported ones follow a two-state chain: rate p01 on the first
        // block, then p01 (1 - q) + (1 - p10) q with q = 0.2 settled after
        // one step. Mean over four blocks: (0.2 + 3 * 0.32) / 4 = 0.29.
        let ones = res.block_ones[0].iter().sum::<f64>() / cfg.seeds as f64;
        assert!((ones - 0.29).abs() < 0.04, "block ones {ones}");
    }
}
