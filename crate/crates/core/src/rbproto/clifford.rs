//! The 24-element single-qubit Clifford group, generated from {H, S} with
//! global phase quotiented out, plus dense multiplication and inverse tables
//! for sequence bookkeeping.

use std::collections::HashMap;
use std::sync::OnceLock;

use rand::Rng;

use crate::qmath::{dagger, gates, CMat};

pub const CLIFFORD_COUNT: usize = 24;

pub struct CliffordTable {
    elements: Vec<CMat>,
    words: Vec<String>,
    product: Vec<[u8; CLIFFORD_COUNT]>,
    inverse: [u8; CLIFFORD_COUNT],
    index: HashMap<String, usize>,
}

/// Strip global phase and quantize so equal-up-to-phase unitaries collide.
fn canonical_key(m: &CMat) -> String {
    let mut fixed = m.clone();
    // Some entry has modulus >= 1/sqrt(2); rotate it onto the positive reals.
    'outer: for j in 0..fixed.ncols() {
        for i in 0..fixed.nrows() {
            let v = fixed[(i, j)];
            if v.norm() > 0.3 {
                let phase = v / v.norm();
                fixed *= phase.conj();
                break 'outer;
            }
        }
    }
    // Round at 1e-6 (Clifford entries are separated by far more) and send
    // -0.0 to +0.0 so it cannot split a key.
    fn q(x: f64) -> f64 {
        let r = (x * 1e6).round() / 1e6;
        if r == 0.0 {
            0.0
        } else {
            r
        }
    }
    let mut key = String::new();
    for j in 0..fixed.ncols() {
        for i in 0..fixed.nrows() {
            let v = fixed[(i, j)];
            key.push_str(&format!("{:+.6}{:+.6}i;", q(v.re), q(v.im)));
        }
    }
    key
}

fn build_table() -> CliffordTable {
    let generators = [("H", gates::h()), ("S", gates::s())];
    let mut elements: Vec<CMat> = vec![gates::identity(1)];
    let mut words: Vec<String> = vec!["I".to_string()];
    let mut index: HashMap<String, usize> = HashMap::new();
    index.insert(canonical_key(&elements[0]), 0);

    // Breadth-first closure.
    let mut frontier = vec![0usize];
    while let Some(i) = frontier.pop() {
        for (g_name, g) in &generators {
            let candidate = &elements[i] * g;
            let key = canonical_key(&candidate);
            if !index.contains_key(&key) {
                index.insert(key, elements.len());
                words.push(if words[i] == "I" {
                    (*g_name).to_string()
                } else {
                    format!("{}{}", words[i], g_name)
                });
                elements.push(candidate);
                frontier.push(elements.len() - 1);
            }
        }
    }
    assert_eq!(elements.len(), CLIFFORD_COUNT, "closure of {{H, S}} has 24 elements");

    let mut product = vec![[0u8; CLIFFORD_COUNT]; CLIFFORD_COUNT];
    for a in 0..CLIFFORD_COUNT {
        for b in 0..CLIFFORD_COUNT {
            let key = canonical_key(&(&elements[a] * &elements[b]));
            product[a][b] = *index.get(&key).expect("group is closed") as u8;
        }
    }
    let mut inverse = [0u8; CLIFFORD_COUNT];
    for (a, inv) in inverse.iter_mut().enumerate() {
        let key = canonical_key(&dagger(&elements[a]));
        *inv = *index.get(&key).expect("group contains inverses") as u8;
    }

    CliffordTable {
        elements,
        words,
        product,
        inverse,
        index,
    }
}

/// Global table, built once on first use.
pub fn clifford_table() -> &'static CliffordTable {
    static TABLE: OnceLock<CliffordTable> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

impl CliffordTable {
    pub fn len(&self) -> usize {
        CLIFFORD_COUNT
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Unitary of element `i`, in the phase convention the table was built
    /// with (products may differ from table entries by a global phase).
    pub fn matrix(&self, i: usize) -> &CMat {
        &self.elements[i]
    }

    /// Generator word of element `i`, read left to right as a matrix
    /// product ("HS" is H * S).
    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    /// Index of `U_a * U_b`.
    pub fn product(&self, a: usize, b: usize) -> usize {
        self.product[a][b] as usize
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a] as usize
    }

    /// Look up a unitary, ignoring global phase.
    pub fn index_of(&self, u: &CMat) -> Option<usize> {
        self.index.get(&canonical_key(u)).copied()
    }

    /// Net element of a sequence applied in time order: the last entry ends
    /// up leftmost in the matrix product.
    pub fn compose_sequence(&self, seq: &[usize]) -> usize {
        seq.iter().fold(0usize, |acc, &i| self.product(i, acc))
    }

    /// Index of the recovery element undoing `seq`.
    pub fn recovery(&self, seq: &[usize]) -> usize {
        self.inverse(self.compose_sequence(seq))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.gen_range(0..CLIFFORD_COUNT)
    }
}
