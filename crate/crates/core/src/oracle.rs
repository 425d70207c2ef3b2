//! Closed-form reference results for the benchmarking decays, derived by
//! tracking the twirled data channel jointly with the classical state of
//! the ancilla.
//!
//! The object of interest is an 8 x 8 transfer matrix acting on
//! (classical ancilla bit) (x) (vectorized data qubit). One application is
//! one block plus its Clifford twirl. Survival probabilities come from
//! iterating it on |0>> (x) vec(|0><0|) and contracting with the classical
//! sum functional and the ground-state projector.
//!
//! For the conditional-Z blocks the transfer matrix is not a product of
//! independent per-block channels: a single misreport damages two
//! consecutive rounds (a wrong conditional Z now, a wrong ancilla state
//! next round), which is exactly the non-Markovianity probed by
//! [`nonmarkov_deviation`].

use crate::noise::NoiseConfig;
use crate::qmath::{cr, kron, CMat, CVec, Superoperator};
use crate::rbproto::BlockKind;

/// Parameters the closed forms depend on. `eps_r` is the symmetric
/// assignment error, `eps_2q` the average two-qubit gate error, and `tau`
/// the total idle time per block (measurement plus feedforward window).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryParams {
    pub eps_r: f64,
    pub eps_2q: f64,
    pub t1: f64,
    pub t2: f64,
    pub tau: f64,
}

impl TheoryParams {
    pub fn from_noise(cfg: &NoiseConfig) -> Self {
        Self {
            eps_r: 0.5 * (cfg.p01 + cfg.p10),
            eps_2q: 0.75 * cfg.depol_2q,
            t1: cfg.t1,
            t2: cfg.t2,
            tau: (cfg.tau_meas_ns + cfg.tau_ff_ns) * 1e-9,
        }
    }

    pub fn eps_tau(&self) -> f64 {
        eps_tau(self.t1, self.t2, self.tau)
    }
}

/// 2 x 2 classical unit matrix |r><c|.
fn unit(r: usize, c: usize) -> CMat {
    let mut m = CMat::zeros(2, 2);
    m[(r, c)] = cr(1.0);
    m
}

fn depol(q: f64) -> CMat {
    Superoperator::depolarizing(q, 1)
        .expect("q in range")
        .matrix()
        .clone()
}

/// Transfer matrix of one twirled conditional-Z block (either preparation
/// variant, for symmetric assignment error).
///
/// Reading the classical index as the ancilla's true state entering the
/// round: a correct report leaves the data alone, and any round where the
/// conditional Z fires wrongly (misreport from |0>, or a correct report of
/// a stale |1>) lands the twirled Pauli weight -1/3 on the data.
pub fn transfer_zc(eps_r: f64) -> CMat {
    let id = CMat::identity(4, 4);
    let d = depol(-1.0 / 3.0);
    kron(&unit(0, 0), &id) * cr(1.0 - eps_r)
        + kron(&unit(0, 1), &d) * cr(1.0 - eps_r)
        + kron(&unit(1, 0), &d) * cr(eps_r)
        + kron(&unit(1, 1), &id) * cr(eps_r)
}

/// Transfer matrix of one twirled entangling block. The ancilla is
/// re-prepared fresh every round, so both classical columns act the same
/// way and the map composes memorylessly.
pub fn transfer_hcnot(eps_r: f64) -> CMat {
    let id = CMat::identity(4, 4);
    let d = depol(-1.0 / 3.0);
    let ones = unit(0, 0) + unit(0, 1);
    let ones_bottom = unit(1, 0) + unit(1, 1);
    kron(&ones, &id) * cr(1.0 - eps_r) + kron(&ones_bottom, &d) * cr(eps_r)
}

/// The entangling block's data channel after tracing the ancilla register:
/// (1 - eps) identity + eps depol(-1/3) = depol(1 - 4 eps / 3).
pub fn effective_hcnot(eps_r: f64) -> Superoperator {
    Superoperator::depolarizing(1.0 - 4.0 * eps_r / 3.0, 1).expect("weight in range")
}

fn survival(transfer: &CMat, n_blocks: usize) -> f64 {
    // |0>>_c (x) vec(|0><0|)_q
    let mut v = CVec::zeros(8);
    v[0] = cr(1.0);
    for _ in 0..n_blocks {
        v = transfer * v;
    }
    // <<1|_c (x) <<0|_q picks the data ground population in both classical
    // sectors: components 0 and 4.
    (v[0] + v[4]).re
}

/// Ground-state survival after `n` twirled conditional-Z blocks.
pub fn survival_zc(eps_r: f64, n_blocks: usize) -> f64 {
    survival(&transfer_zc(eps_r), n_blocks)
}

/// Ground-state survival after `n` twirled entangling blocks:
/// exactly (1 + (1 - 4 eps / 3)^n) / 2.
pub fn survival_hcnot(eps_r: f64, n_blocks: usize) -> f64 {
    0.5 * (1.0 + (1.0 - 4.0 * eps_r / 3.0).powi(n_blocks as i32))
}

/// Asymptotic per-block decay of the conditional-Z survival: the dominant
/// eigenvalue of the coherence sector,
/// (1 + sqrt(1 - (32/9) eps (1 - eps))) / 2 = 1 - (8/9) eps + O(eps^2).
pub fn zc_alpha(eps_r: f64) -> f64 {
    0.5 * (1.0 + (1.0 - 32.0 / 9.0 * eps_r * (1.0 - eps_r)).sqrt())
}

/// How far a transfer matrix is from composing as a memoryless channel:
/// max-abs difference between the ancilla-marginalized two-block channel
/// and the square of the one-block channel. Zero for the entangling block,
/// positive for the conditional-Z blocks whenever 0 < eps < 1.
pub fn nonmarkov_deviation(transfer: &CMat) -> f64 {
    // Marginal channel: start the classical register in |0>>, sum over the
    // classical output. M[a][b] collects the (a, b) quantum block of the
    // classical (r, 0) entries summed over r.
    let marginal = |t: &CMat| -> CMat {
        let mut m = CMat::zeros(4, 4);
        for r in 0..2 {
            for (i, mut row) in m.row_iter_mut().enumerate() {
                for j in 0..4 {
                    row[j] += t[(r * 4 + i, j)];
                }
            }
        }
        m
    };
    let one = marginal(transfer);
    let two = marginal(&(transfer * transfer));
    crate::qmath::max_abs_diff(&two, &(&one * &one))
}

/// Average error of the idle channel of duration `tau`:
/// (2/3) (3/4 - e^{-tau/T1}/4 - e^{-tau/T2}/2).
pub fn eps_tau(t1: f64, t2: f64, tau: f64) -> f64 {
    let e1 = if t1.is_infinite() { 1.0 } else { (-tau / t1).exp() };
    let e2 = if t2.is_infinite() { 1.0 } else { (-tau / t2).exp() };
    (2.0 / 3.0) * (0.75 - 0.25 * e1 - 0.5 * e2)
}

/// Predicted per-block error rate, combining the feedforward contribution
/// with idle decay (and the two-qubit gate error where one is involved).
pub fn predicted_error(kind: BlockKind, p: &TheoryParams) -> f64 {
    let idle = 1.0 - p.eps_tau();
    match kind {
        BlockKind::HCnot => {
            1.0 - (1.0 - 2.0 / 3.0 * p.eps_r) * idle * (1.0 - 2.0 / 3.0 * p.eps_2q)
        }
        BlockKind::ZC0 | BlockKind::ZC1 => 1.0 - (1.0 - 4.0 / 9.0 * p.eps_r) * idle,
        BlockKind::IC0 | BlockKind::IC1 | BlockKind::Delay => p.eps_tau(),
    }
}

/// Decay of the Clifford-only reference sequence per block: k gates, each
/// depolarizing with probability `depol_1q`.
pub fn reference_alpha(depol_1q: f64, k: usize) -> f64 {
    (1.0 - depol_1q).powi(k as i32)
}

/// Per-block error from a fitted decay, no reference.
pub fn raw_epsilon(alpha: f64) -> f64 {
    0.5 * (1.0 - alpha)
}

/// Interleaved extraction: error of the block alone given the combined
/// decay `alpha` and the reference decay of the interleaved Cliffords.
pub fn interleaved_epsilon(alpha: f64, alpha_ref: f64) -> f64 {
    0.5 * (1.0 - alpha / alpha_ref)
}
