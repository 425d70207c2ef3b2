//! Noise model: readout assignment errors, T1/T2 idle decay, static coherent
//! couplings, gate depolarizing, and hardware timing.
//!
//! All times are in seconds internally. The on-disk configuration uses
//! nanoseconds for gate/measurement durations (fields suffixed `_ns`) and
//! seconds for `t1`/`t2`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{bit_of, c, check_n_qubits, CMat, DensityMatrix, KrausChannel};

/// Durations of the primitive operations, in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Timing {
    pub tau_1q: f64,
    pub tau_2q: f64,
    pub tau_meas: f64,
    pub tau_ff: f64,
}

/// Assignment and QND errors of one qubit's measurement.
///
/// `p01` is the probability of reporting 1 given the true outcome 0, `p10`
/// the reverse. `qnd_flip` is the probability that the post-measurement
/// state is flipped, sampled independently of the reported bit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReadoutError {
    pub p01: f64,
    pub p10: f64,
    pub qnd_flip: f64,
}

/// Relaxation times of one qubit, in seconds. `t2 <= 2 t1` is required.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdleNoise {
    pub t1: f64,
    pub t2: f64,
}

/// Static coherent terms: per-qubit detuning (Hz), ZZ coupling per pair
/// (Hz, the two-excitation eigenvalue is `2 zz`), and a deterministic
/// Z-rotation (radians) applied to every other qubit once per measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherentCoupling {
    pub detuning: Vec<f64>,
    pub zz: Vec<(usize, usize, f64)>,
    pub meas_induced_phase: Vec<f64>,
}

/// Depolarizing error probabilities applied after each gate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateNoise {
    pub depol_1q: f64,
    pub depol_2q: f64,
}

/// Full noise model for an `n_qubits` register.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    pub n_qubits: usize,
    pub readout: Vec<ReadoutError>,
    pub idle: Vec<IdleNoise>,
    pub coupling: CoherentCoupling,
    pub gate: GateNoise,
    pub timing: Timing,
}

fn check_prob(name: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::Parameter {
            name,
            value: p,
            reason: "probability must lie in [0, 1]",
        });
    }
    Ok(())
}

fn check_relaxation(t1: f64, t2: f64) -> Result<()> {
    if t1 <= 0.0 || t1.is_nan() {
        return Err(Error::Parameter {
            name: "t1",
            value: t1,
            reason: "must be positive (may be infinite)",
        });
    }
    if t2 <= 0.0 || t2.is_nan() {
        return Err(Error::Parameter {
            name: "t2",
            value: t2,
            reason: "must be positive (may be infinite)",
        });
    }
    // Physical requirement; small tolerance for values computed from t1.
    if t2 > 2.0 * t1 * (1.0 + 1e-9) {
        return Err(Error::Parameter {
            name: "t2",
            value: t2,
            reason: "must satisfy t2 <= 2 t1",
        });
    }
    Ok(())
}

impl NoiseModel {
    /// A completely noise-free model with the given timing.
    pub fn noiseless(n_qubits: usize, timing: Timing) -> Result<Self> {
        check_n_qubits(n_qubits)?;
        Ok(Self {
            n_qubits,
            readout: vec![
                ReadoutError {
                    p01: 0.0,
                    p10: 0.0,
                    qnd_flip: 0.0
                };
                n_qubits
            ],
            idle: vec![
                IdleNoise {
                    t1: f64::INFINITY,
                    t2: f64::INFINITY
                };
                n_qubits
            ],
            coupling: CoherentCoupling {
                detuning: vec![0.0; n_qubits],
                zz: Vec::new(),
                meas_induced_phase: vec![0.0; n_qubits],
            },
            gate: GateNoise {
                depol_1q: 0.0,
                depol_2q: 0.0,
            },
            timing,
        })
    }

    /// Expand a uniform configuration over `n_qubits` qubits. ZZ coupling is
    /// placed on every qubit pair.
    pub fn from_config(cfg: &NoiseConfig, n_qubits: usize) -> Result<Self> {
        check_n_qubits(n_qubits)?;
        cfg.validate()?;
        let mut zz = Vec::new();
        if cfg.zz_hz != 0.0 {
            for i in 0..n_qubits {
                for j in (i + 1)..n_qubits {
                    zz.push((i, j, cfg.zz_hz));
                }
            }
        }
        Ok(Self {
            n_qubits,
            readout: vec![
                ReadoutError {
                    p01: cfg.p01,
                    p10: cfg.p10,
                    qnd_flip: cfg.qnd_flip
                };
                n_qubits
            ],
            idle: vec![IdleNoise { t1: cfg.t1, t2: cfg.t2 }; n_qubits],
            coupling: CoherentCoupling {
                detuning: vec![cfg.detuning_hz; n_qubits],
                zz,
                meas_induced_phase: vec![cfg.meas_phase_rad; n_qubits],
            },
            gate: GateNoise {
                depol_1q: cfg.depol_1q,
                depol_2q: cfg.depol_2q,
            },
            timing: cfg.timing(),
        })
    }

    /// The canonical (data qubit 0, measured qubit 1) pair model.
    pub fn uniform_pair(cfg: &NoiseConfig) -> Result<Self> {
        Self::from_config(cfg, 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.readout.len() != self.n_qubits
            || self.idle.len() != self.n_qubits
            || self.coupling.detuning.len() != self.n_qubits
            || self.coupling.meas_induced_phase.len() != self.n_qubits
        {
            return Err(Error::Config(
                "per-qubit noise lists must all have length n_qubits".into(),
            ));
        }
        for r in &self.readout {
            check_prob("p01", r.p01)?;
            check_prob("p10", r.p10)?;
            check_prob("qnd_flip", r.qnd_flip)?;
        }
        for idle in &self.idle {
            check_relaxation(idle.t1, idle.t2)?;
        }
        for &(i, j, _) in &self.coupling.zz {
            if i >= self.n_qubits || j >= self.n_qubits || i == j {
                return Err(Error::Config(format!("bad ZZ pair ({i}, {j})")));
            }
        }
        check_prob("depol_1q", self.gate.depol_1q)?;
        check_prob("depol_2q", self.gate.depol_2q)?;
        Ok(())
    }
}

/// On-disk noise configuration. Every field has a default, so a partial
/// file is fine; unknown keys are rejected.
///
/// `depol_1q`/`depol_2q` are depolarizing *probabilities*; the implied
/// average gate errors are `p/2` (one qubit) and `3p/4` (two qubits).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Relaxation time, seconds.
    pub t1: f64,
    /// Dephasing time, seconds.
    pub t2: f64,
    /// P(report 1 | prepared 0).
    pub p01: f64,
    /// P(report 0 | prepared 1).
    pub p10: f64,
    /// Probability the post-measurement state is flipped.
    pub qnd_flip: f64,
    /// Qubit detuning, Hz.
    pub detuning_hz: f64,
    /// Always-on ZZ coupling, Hz.
    pub zz_hz: f64,
    /// Measurement-induced Z rotation on spectator qubits, radians.
    pub meas_phase_rad: f64,
    /// Depolarizing probability after each one-qubit gate.
    pub depol_1q: f64,
    /// Depolarizing probability after each two-qubit gate.
    pub depol_2q: f64,
    /// One-qubit gate duration, ns.
    pub tau_1q_ns: f64,
    /// Two-qubit gate duration, ns.
    pub tau_2q_ns: f64,
    /// Measurement window duration, ns.
    pub tau_meas_ns: f64,
    /// Feedforward latency, ns.
    pub tau_ff_ns: f64,
}

impl Default for NoiseConfig {
    /// Median device parameters of the reference processor: T1 = 208 us,
    /// T2 = 97 us, symmetric 2.2e-2 readout assignment error, gate errors
    /// 2.4e-4 (1Q) and 9.7e-3 (2Q) expressed as depolarizing probabilities,
    /// and 60/660/1512/1060 ns timing.
    fn default() -> Self {
        Self {
            t1: 208e-6,
            t2: 97e-6,
            p01: 2.2e-2,
            p10: 2.2e-2,
            qnd_flip: 0.0,
            detuning_hz: 0.0,
            zz_hz: 0.0,
            meas_phase_rad: 0.0,
            depol_1q: 2.0 * 2.4e-4,
            depol_2q: 4.0 / 3.0 * 9.7e-3,
            tau_1q_ns: 60.0,
            tau_2q_ns: 660.0,
            tau_meas_ns: 1512.0,
            tau_ff_ns: 1060.0,
        }
    }
}

impl NoiseConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: NoiseConfig =
            toml::from_str(s).map_err(|e| Error::Config(format!("noise config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("noise config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        check_relaxation(self.t1, self.t2)?;
        check_prob("p01", self.p01)?;
        check_prob("p10", self.p10)?;
        check_prob("qnd_flip", self.qnd_flip)?;
        check_prob("depol_1q", self.depol_1q)?;
        check_prob("depol_2q", self.depol_2q)?;
        for (name, v) in [
            ("tau_1q_ns", self.tau_1q_ns),
            ("tau_2q_ns", self.tau_2q_ns),
            ("tau_meas_ns", self.tau_meas_ns),
            ("tau_ff_ns", self.tau_ff_ns),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Parameter {
                    name,
                    value: v,
                    reason: "duration must be finite and non-negative",
                });
            }
        }
        if !self.detuning_hz.is_finite() || !self.zz_hz.is_finite() || !self.meas_phase_rad.is_finite()
        {
            return Err(Error::Config("coherent terms must be finite".into()));
        }
        Ok(())
    }

    pub fn timing(&self) -> Timing {
        Timing {
            tau_1q: self.tau_1q_ns * 1e-9,
            tau_2q: self.tau_2q_ns * 1e-9,
            tau_meas: self.tau_meas_ns * 1e-9,
            tau_ff: self.tau_ff_ns * 1e-9,
        }
    }
}

/// Damping parameters of an idle window: excited-state decay probability and
/// the total coherence factor multiplying off-diagonals.
#[derive(Clone, Copy, Debug)]
pub(crate) struct DampParams {
    pub gamma: f64,
    pub coh: f64,
}

pub(crate) fn damp_params(t1: f64, t2: f64, tau: f64) -> DampParams {
    let gamma = if t1.is_infinite() { 0.0 } else { 1.0 - (-tau / t1).exp() };
    let coh = if t2.is_infinite() { 1.0 } else { (-tau / t2).exp() };
    DampParams { gamma, coh }
}

/// Single-qubit idle channel of duration `tau`: amplitude damping
/// `gamma = 1 - e^{-tau/T1}` composed with pure dephasing such that the
/// total off-diagonal decay factor is exactly `e^{-tau/T2}`.
pub fn idle_channel(t1: f64, t2: f64, tau: f64) -> Result<KrausChannel> {
    check_relaxation(t1, t2)?;
    if tau < 0.0 || !tau.is_finite() {
        return Err(Error::Parameter {
            name: "tau",
            value: tau,
            reason: "duration must be finite and non-negative",
        });
    }
    let DampParams { gamma, coh } = damp_params(t1, t2, tau);
    // Residual dephasing on top of the sqrt(1-gamma) factor from damping.
    let residual = (coh / (1.0 - gamma).sqrt()).min(1.0);
    let p = 0.5 * (1.0 - residual);
    KrausChannel::amplitude_damping(gamma)?.then(&KrausChannel::dephasing(p)?)
}

/// Phase (radians, positive sign convention `U = diag(e^{-i phi_b})`)
/// accumulated by each basis state of an `n`-qubit register when the
/// `qubits` subset idles for `tau` seconds.
///
/// Hamiltonian per basis state `b`:
/// `E(b)/h = sum_i detuning_i b_i + sum_{(i,j)} 2 zz_ij b_i b_j`,
/// with a coupling term active only when both of its qubits idle.
pub(crate) fn coherent_phases(coupling: &CoherentCoupling, qubits: &[usize], tau: f64) -> Vec<f64> {
    let n = coupling.detuning.len();
    let dim = 1 << n;
    let mut phases = vec![0.0; dim];
    let two_pi_tau = std::f64::consts::TAU * tau;
    for (b, phase) in phases.iter_mut().enumerate() {
        let mut e_hz = 0.0;
        for &q in qubits {
            e_hz += coupling.detuning[q] * bit_of(b, q, n) as f64;
        }
        for &(i, j, zz) in &coupling.zz {
            if qubits.contains(&i) && qubits.contains(&j) {
                e_hz += 2.0 * zz * (bit_of(b, i, n) * bit_of(b, j, n)) as f64;
            }
        }
        *phase = two_pi_tau * e_hz;
    }
    phases
}

/// Diagonal unitary for the coherent part of an idle window; see
/// [`coherent_phases`] for the Hamiltonian convention.
pub fn coherent_idle_unitary(coupling: &CoherentCoupling, qubits: &[usize], tau: f64) -> CMat {
    let phases = coherent_phases(coupling, qubits, tau);
    let dim = phases.len();
    let mut u = CMat::zeros(dim, dim);
    for (b, &phi) in phases.iter().enumerate() {
        u[(b, b)] = c(phi.cos(), -phi.sin());
    }
    u
}

/// Project-and-report measurement of `qubit`.
///
/// Returns the reported bit and the post-measurement state. Three random
/// draws are consumed in a fixed order (true outcome, assignment flip, QND
/// flip) regardless of the state, so random streams stay aligned.
pub fn sample_measurement<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    qubit: usize,
    err: &ReadoutError,
    rng: &mut R,
) -> Result<(u8, DensityMatrix)> {
    if qubit >= rho.n_qubits() {
        return Err(Error::Circuit(format!(
            "measured qubit {qubit} out of range for {} qubits",
            rho.n_qubits()
        )));
    }
    check_prob("p01", err.p01)?;
    check_prob("p10", err.p10)?;
    check_prob("qnd_flip", err.qnd_flip)?;
    let mut mat = rho.matrix().clone();
    let reported = sample_measurement_raw(&mut mat, rho.n_qubits(), qubit, err, rng);
    Ok((reported, DensityMatrix::new(mat)?))
}

/// In-place measurement on a raw density matrix; used by the hot path.
pub(crate) fn sample_measurement_raw<R: Rng + ?Sized>(
    mat: &mut CMat,
    n: usize,
    qubit: usize,
    err: &ReadoutError,
    rng: &mut R,
) -> u8 {
    let dim = mat.nrows();
    let mut p1 = 0.0;
    for i in 0..dim {
        if bit_of(i, qubit, n) == 1 {
            p1 += mat[(i, i)].re;
        }
    }
    let p1 = p1.clamp(0.0, 1.0);

    let u_outcome: f64 = rng.gen();
    let u_assign: f64 = rng.gen();
    let u_qnd: f64 = rng.gen();

    let true_bit: u8 = u8::from(u_outcome < p1);
    let keep = true_bit as usize;
    let p_keep = if true_bit == 1 { p1 } else { 1.0 - p1 };
    // Project onto the observed outcome and renormalize.
    let scale = if p_keep > 0.0 { 1.0 / p_keep } else { 0.0 };
    for i in 0..dim {
        for j in 0..dim {
            if bit_of(i, qubit, n) == keep && bit_of(j, qubit, n) == keep {
                mat[(i, j)] *= scale;
            } else {
                mat[(i, j)] = C64::default();
            }
        }
    }

    let flip_prob = if true_bit == 0 { err.p01 } else { err.p10 };
    let reported = if u_assign < flip_prob { 1 - true_bit } else { true_bit };

    if u_qnd < err.qnd_flip {
        flip_qubit_in_place(mat, n, qubit);
    }
    reported
}

/// Apply X on `qubit` to a raw density matrix in place.
pub(crate) fn flip_qubit_in_place(mat: &mut DMatrix<C64>, n: usize, qubit: usize) {
    let dim = mat.nrows();
    let mask = 1usize << (n - 1 - qubit);
    for i in 0..dim {
        if i & mask == 0 {
            for j in 0..dim {
                mat.swap((i, j), (i | mask, j));
            }
        }
    }
    for j in 0..dim {
        if j & mask == 0 {
            for i in 0..dim {
                mat.swap((i, j), (i, j | mask));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{
        average_gate_error, cr, gates, max_abs_diff, CVec, Superoperator,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn idle_channel_zero_duration_is_identity() {
        let ch = idle_channel(100e-6, 80e-6, 0.0).unwrap();
        let s = Superoperator::from_kraus(&ch);
        let id = Superoperator::identity(1).unwrap();
        assert!(max_abs_diff(s.matrix(), id.matrix()) < 1e-12);
    }

    #[test]
    fn idle_channel_half_life() {
        // tau = T1 ln 2 halves the excited population.
        let t1 = 150e-6;
        let ch = idle_channel(t1, 2.0 * t1, t1 * std::f64::consts::LN_2).unwrap();
        let rho = DensityMatrix::basis(1, &[1]).unwrap();
        let out = ch.apply(&rho, &[0]).unwrap();
        assert!((out.matrix()[(1, 1)].re - 0.5).abs() < 1e-12);
        assert!((out.matrix()[(0, 0)].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn idle_channel_off_diagonal_decay_is_exactly_t2() {
        let (t1, t2, tau) = (208e-6, 97e-6, 2.5e-6);
        let ch = idle_channel(t1, t2, tau).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityMatrix::pure(&CVec::from_vec(vec![cr(s), cr(s)])).unwrap();
        let out = ch.apply(&plus, &[0]).unwrap();
        let expect = 0.5 * (-tau / t2).exp();
        assert!((out.matrix()[(0, 1)].re - expect).abs() < 1e-14);
    }

    // Average error of the idle channel must reproduce
    // (2/3) (3/4 - e^{-tau/T1}/4 - e^{-tau/T2}/2) on a parameter grid.
    #[test]
    fn idle_channel_average_error_closed_form() {
        for (t1, t2) in [(100e-6, 100e-6), (208e-6, 97e-6), (250e-6, 400e-6)] {
            for tau in [0.0, 0.5e-6, 2e-6, 10e-6] {
                let ch = idle_channel(t1, t2, tau).unwrap();
                let s = Superoperator::from_kraus(&ch);
                let expect = (2.0 / 3.0)
                    * (0.75 - 0.25 * (-tau / t1).exp() - 0.5 * (-tau / t2).exp());
                assert!(
                    (average_gate_error(&s) - expect).abs() < 1e-10,
                    "t1={t1} t2={t2} tau={tau}"
                );
            }
        }
        // Spot value worked by hand: tau = 2us, T1 = T2 = 250us.
        let ch = idle_channel(250e-6, 250e-6, 2e-6).unwrap();
        let s = Superoperator::from_kraus(&ch);
        assert!((average_gate_error(&s) - 3.984042581470e-3).abs() < 1e-10);
    }

    #[test]
    fn idle_channel_rejects_bad_relaxation() {
        assert!(idle_channel(-1.0, 1.0, 1e-6).is_err());
        assert!(idle_channel(100e-6, 201e-6, 1e-6).is_err()); // t2 > 2 t1
        assert!(idle_channel(100e-6, 80e-6, -1e-9).is_err());
        assert!(idle_channel(f64::INFINITY, f64::INFINITY, 1e-3).is_ok());
    }

    fn single_qubit_coupling(detuning: f64) -> CoherentCoupling {
        CoherentCoupling {
            detuning: vec![detuning],
            zz: Vec::new(),
            meas_induced_phase: vec![0.0],
        }
    }

    fn pair_coupling(d0: f64, d1: f64, zz: f64) -> CoherentCoupling {
        CoherentCoupling {
            detuning: vec![d0, d1],
            zz: vec![(0, 1, zz)],
            meas_induced_phase: vec![0.0, 0.0],
        }
    }

    #[test]
    fn detuning_half_period_gives_z() {
        // detuning * tau = 1/2 -> diag(1, e^{-i pi}) = Z up to global phase.
        let u = coherent_idle_unitary(&single_qubit_coupling(250e3), &[0], 2e-6);
        assert!(max_abs_diff(&u, &gates::z()) < 1e-12);
    }

    #[test]
    fn zz_quarter_period_phase_on_11() {
        // zz * tau = 1/4 -> |11> picks up e^{-i 2 pi * 2 zz tau} = e^{-i pi}.
        let u = coherent_idle_unitary(&pair_coupling(0.0, 0.0, 125e3), &[0, 1], 2e-6);
        for b in 0..3 {
            assert!((u[(b, b)] - cr(1.0)).norm() < 1e-12);
        }
        assert!((u[(3, 3)] - cr(-1.0)).norm() < 1e-12);
    }

    #[test]
    fn coherent_unitary_is_diagonal_unitary_and_additive() {
        let cpl = pair_coupling(10e3, -3e3, -50e3);
        let u1 = coherent_idle_unitary(&cpl, &[0, 1], 1.3e-6);
        let u2 = coherent_idle_unitary(&cpl, &[0, 1], 0.9e-6);
        let u12 = coherent_idle_unitary(&cpl, &[0, 1], 2.2e-6);
        assert!(crate::qmath::is_unitary(&u1, 1e-12));
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(u1[(i, j)].norm() < 1e-15);
                }
            }
        }
        assert!(max_abs_diff(&(&u1 * &u2), &u12) < 1e-12);
    }

    #[test]
    fn zz_term_needs_both_qubits_idling() {
        let cpl = pair_coupling(0.0, 0.0, 77e3);
        let u = coherent_idle_unitary(&cpl, &[0], 1e-6);
        let id = gates::identity(2);
        assert!(max_abs_diff(&u, &id) < 1e-15);
    }

    // With zz = -detuning/2 and the measured qubit held in |1>, the data
    // qubit accumulates no conditional phase.
    #[test]
    fn echo_point_cancels_conditional_phase() {
        let delta = 10e3;
        let cpl = pair_coupling(delta, 0.0, -delta / 2.0);
        let u = coherent_idle_unitary(&cpl, &[0, 1], 3.7e-6);
        // States |01> (data 0, measured 1) and |11>: equal phase means the
        // data-qubit coherence is untouched in this subspace.
        let phase01 = u[(1, 1)];
        let phase11 = u[(3, 3)];
        assert!((phase01 - phase11).norm() < 1e-12);
    }

    #[test]
    fn measurement_deterministic_on_basis_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = ReadoutError { p01: 0.0, p10: 0.0, qnd_flip: 0.0 };
        let rho = DensityMatrix::basis(2, &[0, 1]).unwrap();
        for _ in 0..10 {
            let (bit, post) = sample_measurement(&rho, 1, &err, &mut rng).unwrap();
            assert_eq!(bit, 1);
            assert!(max_abs_diff(post.matrix(), rho.matrix()) < 1e-12);
        }
    }

    #[test]
    fn measurement_collapses_superposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let err = ReadoutError { p01: 0.0, p10: 0.0, qnd_flip: 0.0 };
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DensityMatrix::pure(&CVec::from_vec(vec![cr(s), cr(s)])).unwrap();
        let mut ones = 0usize;
        let n = 20000;
        for _ in 0..n {
            let (bit, post) = sample_measurement(&plus, 0, &err, &mut rng).unwrap();
            ones += bit as usize;
            assert!((post.purity() - 1.0).abs() < 1e-10);
            assert!((post.prob(0, bit) - 1.0).abs() < 1e-10);
        }
        let f = ones as f64 / n as f64;
        // 5 sigma of a fair coin at n = 20000 is 0.0177.
        assert!((f - 0.5).abs() < 0.018, "frequency {f}");
    }

    #[test]
    fn assignment_error_flips_report_not_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let err = ReadoutError { p01: 0.3, p10: 0.0, qnd_flip: 0.0 };
        let rho = DensityMatrix::basis(1, &[0]).unwrap();
        let n = 20000;
        let mut ones = 0usize;
        for _ in 0..n {
            let (bit, post) = sample_measurement(&rho, 0, &err, &mut rng).unwrap();
            ones += bit as usize;
            // State stays |0> regardless of the reported value.
            assert!((post.prob(0, 0) - 1.0).abs() < 1e-12);
        }
        let f = ones as f64 / n as f64;
        assert!((f - 0.3).abs() < 0.017, "frequency {f}"); // 5 sigma
    }

    #[test]
    fn qnd_flip_changes_state_not_report() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let err = ReadoutError { p01: 0.0, p10: 0.0, qnd_flip: 1.0 };
        let rho = DensityMatrix::basis(1, &[0]).unwrap();
        let (bit, post) = sample_measurement(&rho, 0, &err, &mut rng).unwrap();
        assert_eq!(bit, 0);
        assert!((post.prob(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_defaults_match_reference_device() {
        let cfg = NoiseConfig::default();
        assert_eq!(cfg.t1, 208e-6);
        assert_eq!(cfg.t2, 97e-6);
        assert_eq!(cfg.p01, 2.2e-2);
        assert_eq!(cfg.p10, 2.2e-2);
        assert_eq!(cfg.tau_meas_ns, 1512.0);
        assert_eq!(cfg.tau_2q_ns, 660.0);
        assert_eq!(cfg.tau_1q_ns, 60.0);
        assert_eq!(cfg.tau_ff_ns, 1060.0);
        // Depolarizing probabilities imply the reference gate errors.
        assert!((cfg.depol_1q / 2.0 - 2.4e-4).abs() < 1e-15);
        assert!((cfg.depol_2q * 0.75 - 9.7e-3).abs() < 1e-15);
        cfg.validate().unwrap();
    }

    #[test]
    fn config_round_trip_and_partial_parse() {
        let cfg = NoiseConfig::default();
        let text = cfg.to_toml_string();
        let back = NoiseConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);

        let partial = NoiseConfig::from_toml_str("p01 = 0.05\np10 = 0.01\n").unwrap();
        assert_eq!(partial.p01, 0.05);
        assert_eq!(partial.p10, 0.01);
        assert_eq!(partial.t1, 208e-6);
    }

    #[test]
    fn config_rejects_bad_values_and_unknown_keys() {
        assert!(NoiseConfig::from_toml_str("p01 = 1.5").is_err());
        assert!(NoiseConfig::from_toml_str("t1 = 50e-6\nt2 = 150e-6").is_err());
        assert!(NoiseConfig::from_toml_str("tau_meas_ns = -3.0").is_err());
        assert!(NoiseConfig::from_toml_str("no_such_knob = 1.0").is_err());
    }

    #[test]
    fn model_expansion_is_uniform() {
        let cfg = NoiseConfig {
            zz_hz: -55e3,
            ..NoiseConfig::default()
        };
        let nm = NoiseModel::uniform_pair(&cfg).unwrap();
        assert_eq!(nm.n_qubits, 2);
        assert_eq!(nm.readout[0], nm.readout[1]);
        assert_eq!(nm.coupling.zz, vec![(0, 1, -55e3)]);
        nm.validate().unwrap();
    }
}
