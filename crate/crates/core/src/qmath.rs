//! Dense complex linear algebra for small open quantum systems.
//!
//! Everything here is specialized to at most [`MAX_QUBITS`] qubits, so all
//! matrices are small and dense. The vectorization convention is
//! column-stacking: `vec(rho)` stacks the columns of `rho`, so
//! `vec(A X B) = (B^T (x) A) vec(X)` and the superoperator of a unitary `U`
//! is `conj(U) (x) U`.
//!
//! Qubit index 0 is the leftmost (most significant) tensor factor: basis
//! state `|b0 b1 ... b_{n-1}>` has index `b0*2^{n-1} + ... + b_{n-1}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Hard cap on system size; one data qubit, one measured qubit, headroom.
pub const MAX_QUBITS: usize = 3;

/// Tolerance for Hermiticity and trace-preservation checks.
pub const HERM_TOL: f64 = 1e-10;
/// Tolerance for unit-trace and Kraus-completeness checks.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues of a density matrix may undershoot zero by this much.
pub const PSD_TOL: f64 = 1e-10;
/// Tolerance for unitarity checks on gate matrices.
pub const UNITARY_TOL: f64 = 1e-10;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub(crate) fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Value of `qubit`'s bit in basis-state index `index` of an `n`-qubit register.
#[inline]
pub(crate) fn bit_of(index: usize, qubit: usize, n: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}

pub(crate) fn check_n_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Resource(format!(
            "system size {n} qubits outside supported range 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

fn n_qubits_of_dim(dim: usize, context: &'static str) -> Result<usize> {
    let n = dim.trailing_zeros() as usize;
    if dim == 0 || dim != 1 << n {
        return Err(Error::Dimension {
            context,
            expected: 1 << n.max(1),
            got: dim,
        });
    }
    check_n_qubits(n)?;
    Ok(n)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn is_unitary(m: &CMat, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let d = m.nrows();
    let prod = m.adjoint() * m;
    let id = CMat::identity(d, d);
    (prod - id).iter().all(|z| z.norm() <= tol)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Embed `op` (acting on `targets.len()` qubits) into an `n`-qubit register.
///
/// `targets[j]` receives the j-th tensor factor of `op`; targets need not be
/// contiguous or ordered.
pub fn embed(op: &CMat, targets: &[usize], n: usize) -> Result<CMat> {
    check_n_qubits(n)?;
    let k = targets.len();
    if op.nrows() != (1 << k) || op.ncols() != (1 << k) {
        return Err(Error::Dimension {
            context: "embed operator",
            expected: 1 << k,
            got: op.nrows(),
        });
    }
    for (j, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(Error::Circuit(format!("target qubit {t} out of range for {n} qubits")));
        }
        if targets[..j].contains(&t) {
            return Err(Error::Circuit(format!("duplicate target qubit {t}")));
        }
    }
    let dim = 1 << n;
    let sub = |full: usize| -> usize {
        targets
            .iter()
            .fold(0, |acc, &t| (acc << 1) | bit_of(full, t, n))
    };
    let rest_mask = |full: usize| -> usize {
        let mut acc = 0;
        for q in 0..n {
            if !targets.contains(&q) {
                acc = (acc << 1) | bit_of(full, q, n);
            }
        }
        acc
    };
    let mut out = CMat::zeros(dim, dim);
    for r in 0..dim {
        for col in 0..dim {
            if rest_mask(r) == rest_mask(col) {
                out[(r, col)] = op[(sub(r), sub(col))];
            }
        }
    }
    Ok(out)
}

/// Common gate matrices.
pub mod gates {
    use super::{c, cr, CMat};

    pub fn identity(n_qubits: usize) -> CMat {
        let d = 1 << n_qubits;
        CMat::identity(d, d)
    }

    pub fn x() -> CMat {
        CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
    }

    pub fn y() -> CMat {
        CMat::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)])
    }

    pub fn z() -> CMat {
        CMat::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)])
    }

    pub fn h() -> CMat {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CMat::from_row_slice(2, 2, &[cr(s), cr(s), cr(s), cr(-s)])
    }

    pub fn s() -> CMat {
        CMat::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), c(0.0, 1.0)])
    }

    /// CNOT with the first tensor factor as control.
    pub fn cnot() -> CMat {
        let mut m = CMat::zeros(4, 4);
        m[(0, 0)] = cr(1.0);
        m[(1, 1)] = cr(1.0);
        m[(2, 3)] = cr(1.0);
        m[(3, 2)] = cr(1.0);
        m
    }

    /// Z-rotation `diag(1, e^{i phi})`.
    pub fn phase(phi: f64) -> CMat {
        CMat::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), c(phi.cos(), phi.sin())])
    }
}

/// Column-stacked vectorization of a density matrix.
pub fn vectorize(rho: &DensityMatrix) -> CVec {
    CVec::from_column_slice(rho.matrix().as_slice())
}

/// Inverse of [`vectorize`]; validates the result.
pub fn unvectorize(v: &CVec) -> Result<DensityMatrix> {
    let d2 = v.len();
    let d = (d2 as f64).sqrt().round() as usize;
    if d * d != d2 {
        return Err(Error::Dimension {
            context: "unvectorize",
            expected: d * d,
            got: d2,
        });
    }
    DensityMatrix::new(CMat::from_column_slice(d, d, v.as_slice()))
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: CMat,
}

impl DensityMatrix {
    /// Validates Hermiticity (`1e-10`), unit trace (`1e-10`) and positive
    /// semidefiniteness (eigenvalues above `-1e-10`).
    pub fn new(mat: CMat) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::Dimension {
                context: "density matrix",
                expected: mat.nrows(),
                got: mat.ncols(),
            });
        }
        n_qubits_of_dim(mat.nrows(), "density matrix")?;
        let herm_dev = max_abs_diff(&mat, &mat.adjoint());
        if herm_dev > HERM_TOL {
            return Err(Error::Validation(format!(
                "density matrix not Hermitian (deviation {herm_dev:.3e})"
            )));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Validation(format!("density matrix trace {tr} != 1")));
        }
        // Hermitize exactly before the eigenvalue check so roundoff in the
        // input cannot leak into downstream arithmetic.
        let herm = (&mat + mat.adjoint()).scale(0.5);
        let eigs = herm.clone().symmetric_eigenvalues();
        if let Some(min) = eigs.iter().cloned().reduce(f64::min) {
            if min < -PSD_TOL {
                return Err(Error::Validation(format!(
                    "density matrix has negative eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(Self { mat: herm })
    }

    pub fn pure(ket: &CVec) -> Result<Self> {
        let norm = ket.norm();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(Error::Validation(format!("ket norm {norm} != 1")));
        }
        n_qubits_of_dim(ket.len(), "pure state")?;
        Ok(Self {
            mat: ket * ket.adjoint(),
        })
    }

    /// Computational basis state `|b0 b1 ...>`.
    pub fn basis(n_qubits: usize, bits: &[u8]) -> Result<Self> {
        check_n_qubits(n_qubits)?;
        if bits.len() != n_qubits {
            return Err(Error::Dimension {
                context: "basis state bits",
                expected: n_qubits,
                got: bits.len(),
            });
        }
        let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b as usize & 1));
        let dim = 1 << n_qubits;
        let mut mat = CMat::zeros(dim, dim);
        mat[(idx, idx)] = cr(1.0);
        Ok(Self { mat })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_n_qubits(n_qubits)?;
        let dim = 1 << n_qubits;
        Ok(Self {
            mat: CMat::identity(dim, dim).scale(1.0 / dim as f64),
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        check_n_qubits(self.n_qubits() + other.n_qubits())?;
        Ok(Self {
            mat: kron(&self.mat, &other.mat),
        })
    }

    /// Trace out all qubits not in `keep`. `keep` must be strictly increasing;
    /// kept qubits retain their relative order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let n = self.n_qubits();
        if keep.is_empty() || keep.windows(2).any(|w| w[0] >= w[1]) || *keep.last().unwrap() >= n {
            return Err(Error::Circuit(format!(
                "partial_trace keep list {keep:?} invalid for {n} qubits"
            )));
        }
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let dk = 1 << keep.len();
        let dr = 1 << traced.len();
        // Scatter sub-indices back into a full register index.
        let full_index = |a: usize, r: usize| -> usize {
            let mut idx = 0;
            for (j, &q) in keep.iter().enumerate() {
                idx |= ((a >> (keep.len() - 1 - j)) & 1) << (n - 1 - q);
            }
            for (j, &q) in traced.iter().enumerate() {
                idx |= ((r >> (traced.len() - 1 - j)) & 1) << (n - 1 - q);
            }
            idx
        };
        let mut out = CMat::zeros(dk, dk);
        for a in 0..dk {
            for b in 0..dk {
                let mut acc = C64::default();
                for r in 0..dr {
                    acc += self.mat[(full_index(a, r), full_index(b, r))];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(Self { mat: out })
    }

    /// Probability that measuring `qubit` in the computational basis yields `value`.
    pub fn prob(&self, qubit: usize, value: u8) -> f64 {
        let n = self.n_qubits();
        let mut p = 0.0;
        for i in 0..self.dim() {
            if bit_of(i, qubit, n) == value as usize {
                p += self.mat[(i, i)].re;
            }
        }
        p.clamp(0.0, 1.0)
    }

    pub fn expectation(&self, op: &CMat) -> Result<C64> {
        if op.shape() != self.mat.shape() {
            return Err(Error::Dimension {
                context: "expectation operator",
                expected: self.dim(),
                got: op.nrows(),
            });
        }
        Ok((op * &self.mat).trace())
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    /// Overlap `<psi| rho |psi>` with a pure state.
    pub fn fidelity_pure(&self, ket: &CVec) -> Result<f64> {
        if ket.len() != self.dim() {
            return Err(Error::Dimension {
                context: "fidelity ket",
                expected: self.dim(),
                got: ket.len(),
            });
        }
        Ok((ket.adjoint() * &self.mat * ket)[(0, 0)].re)
    }

    /// Apply a unitary: `rho -> U rho U^dag`.
    pub fn evolve(&self, u: &CMat) -> Result<Self> {
        if u.shape() != self.mat.shape() {
            return Err(Error::Dimension {
                context: "evolve unitary",
                expected: self.dim(),
                got: u.nrows(),
            });
        }
        if !is_unitary(u, UNITARY_TOL) {
            return Err(Error::Validation("evolve: matrix is not unitary".into()));
        }
        Ok(Self {
            mat: u * &self.mat * u.adjoint(),
        })
    }
}

/// A quantum channel in Kraus form. Completeness `sum K^dag K = 1` is
/// enforced at construction within `1e-10`.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    ops: Vec<CMat>,
}

impl KrausChannel {
    pub fn new(ops: Vec<CMat>) -> Result<Self> {
        let first = ops.first().ok_or_else(|| {
            Error::Validation("Kraus channel needs at least one operator".into())
        })?;
        let d = first.nrows();
        n_qubits_of_dim(d, "Kraus operator")?;
        if ops.iter().any(|k| k.nrows() != d || k.ncols() != d) {
            return Err(Error::Dimension {
                context: "Kraus operators",
                expected: d,
                got: 0,
            });
        }
        let mut sum = CMat::zeros(d, d);
        for k in &ops {
            sum += k.adjoint() * k;
        }
        let dev = max_abs_diff(&sum, &CMat::identity(d, d));
        if dev > TRACE_TOL {
            return Err(Error::Validation(format!(
                "Kraus completeness violated (deviation {dev:.3e})"
            )));
        }
        Ok(Self { ops })
    }

    pub fn identity(n_qubits: usize) -> Result<Self> {
        check_n_qubits(n_qubits)?;
        Ok(Self {
            ops: vec![gates::identity(n_qubits)],
        })
    }

    /// Amplitude damping with decay probability `gamma`.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Parameter {
                name: "gamma",
                value: gamma,
                reason: "must lie in [0, 1]",
            });
        }
        let k0 = CMat::from_row_slice(
            2,
            2,
            &[cr(1.0), cr(0.0), cr(0.0), cr((1.0 - gamma).sqrt())],
        );
        let k1 = CMat::from_row_slice(2, 2, &[cr(0.0), cr(gamma.sqrt()), cr(0.0), cr(0.0)]);
        Self::new(vec![k0, k1])
    }

    /// Phase flip with probability `p`; off-diagonals shrink by `1 - 2p`.
    pub fn dephasing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Parameter {
                name: "p",
                value: p,
                reason: "must lie in [0, 1]",
            });
        }
        let k0 = gates::identity(1).scale((1.0 - p).sqrt());
        let k1 = gates::z().scale(p.sqrt());
        Self::new(vec![k0, k1])
    }

    /// Single-qubit depolarizing channel with error probability `p`:
    /// `rho -> (1-p) rho + p 1/2`.
    pub fn depolarizing_1q(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Parameter {
                name: "p",
                value: p,
                reason: "must lie in [0, 1]",
            });
        }
        let ops = vec![
            gates::identity(1).scale((1.0 - 0.75 * p).sqrt()),
            gates::x().scale((0.25 * p).sqrt()),
            gates::y().scale((0.25 * p).sqrt()),
            gates::z().scale((0.25 * p).sqrt()),
        ];
        Self::new(ops)
    }

    pub fn ops(&self) -> &[CMat] {
        &self.ops
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }

    /// Composition `other` after `self`; Kraus operators are all products.
    pub fn then(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension {
                context: "Kraus composition",
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let mut ops = Vec::with_capacity(self.ops.len() * other.ops.len());
        for b in &other.ops {
            for a in &self.ops {
                ops.push(b * a);
            }
        }
        Self::new(ops)
    }

    /// Apply to the given target qubits of `rho`.
    pub fn apply(&self, rho: &DensityMatrix, targets: &[usize]) -> Result<DensityMatrix> {
        let n = rho.n_qubits();
        let mut out = CMat::zeros(rho.dim(), rho.dim());
        for k in &self.ops {
            let kf = embed(k, targets, n)?;
            out += &kf * rho.matrix() * kf.adjoint();
        }
        DensityMatrix::new(out)
    }
}

/// A superoperator in column-stacking convention.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    dim: usize,
    mat: CMat,
}

impl Superoperator {
    pub fn identity(n_qubits: usize) -> Result<Self> {
        check_n_qubits(n_qubits)?;
        let dim = 1 << n_qubits;
        Ok(Self {
            dim,
            mat: CMat::identity(dim * dim, dim * dim),
        })
    }

    /// `S = conj(U) (x) U`.
    pub fn from_unitary(u: &CMat) -> Result<Self> {
        let dim = u.nrows();
        n_qubits_of_dim(dim, "superoperator unitary")?;
        if !is_unitary(u, UNITARY_TOL) {
            return Err(Error::Validation("from_unitary: matrix is not unitary".into()));
        }
        Ok(Self {
            dim,
            mat: kron(&u.map(|z| z.conj()), u),
        })
    }

    pub fn from_kraus(ch: &KrausChannel) -> Self {
        let dim = ch.dim();
        let mut mat = CMat::zeros(dim * dim, dim * dim);
        for k in ch.ops() {
            mat += kron(&k.map(|z| z.conj()), k);
        }
        Self { dim, mat }
    }

    /// Depolarizing map `D_q(X) = q X + (1-q)/2^n tr[X] 1`.
    ///
    /// `q` must lie in `[1/(1-4^n), 1]`; the lower end is the most negative
    /// value for which the map is still completely positive.
    pub fn depolarizing(q: f64, n_qubits: usize) -> Result<Self> {
        check_n_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        let q_min = 1.0 / (1.0 - (dim * dim) as f64);
        if !(q_min - 1e-12..=1.0 + 1e-12).contains(&q) {
            return Err(Error::Parameter {
                name: "q",
                value: q,
                reason: "depolarizing parameter outside completely positive range",
            });
        }
        let d2 = dim * dim;
        let id_vec = CVec::from_fn(d2, |i, _| {
            if i % dim == i / dim {
                cr(1.0)
            } else {
                cr(0.0)
            }
        });
        let mat = CMat::identity(d2, d2).scale(q)
            + (&id_vec * id_vec.transpose()).scale((1.0 - q) / dim as f64);
        Ok(Self { dim, mat })
    }

    /// Hilbert-space dimension the map acts on.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::Dimension {
                context: "superoperator apply",
                expected: self.dim,
                got: rho.dim(),
            });
        }
        let v = vectorize(rho);
        unvectorize(&(&self.mat * v))
    }

    /// `self` after `other` (matrix product `self * other`).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dimension {
                context: "superoperator compose",
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(Self {
            dim: self.dim,
            mat: &self.mat * &other.mat,
        })
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        let d2 = self.dim * self.dim;
        let id_row = CMat::from_fn(1, d2, |_, j| {
            if j % self.dim == j / self.dim {
                cr(1.0)
            } else {
                cr(0.0)
            }
        });
        let lhs = &id_row * &self.mat;
        max_abs_diff(&lhs, &id_row) <= tol
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }
}

/// Average gate error of a channel relative to the identity:
/// `1 - (tr S / d + 1) / (d + 1)`.
pub fn average_gate_error(s: &Superoperator) -> f64 {
    let d = s.dim() as f64;
    1.0 - (s.trace().re / d + 1.0) / (d + 1.0)
}
