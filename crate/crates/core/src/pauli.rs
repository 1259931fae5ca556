//! Pauli strings and weighted Pauli sums.
//!
//! Qubit `q` of an `n`-qubit register is stored at bit `n - 1 - q` of a
//! computational-basis index, so basis labels read left to right as
//! `|q0 q1 ... q(n-1)>`. Every dense routine in the crate uses this
//! big-endian layout.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Coefficients below this magnitude are dropped on canonicalization.
pub const DROP_TOLERANCE: f64 = 1e-14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn label(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_label(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    /// `self * other = phase * result`.
    pub fn mul(self, other: Pauli) -> (Complex64, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (ONE, p),
            (X, X) | (Y, Y) | (Z, Z) => (ONE, I),
            (X, Y) => (I_, Z),
            (Y, X) => (-I_, Z),
            (Y, Z) => (I_, X),
            (Z, Y) => (-I_, X),
            (Z, X) => (I_, Y),
            (X, Z) => (-I_, Y),
        }
    }

    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        match self {
            Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
            Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
            Pauli::Y => [[ZERO, -I], [I, ZERO]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }
}

// `I` is taken by the enum variant inside `Pauli::mul`.
const I_: Complex64 = I;

/// A tensor product of single-qubit Paulis, one label per qubit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        Self(vec![Pauli::I; n_qubits])
    }

    pub fn from_labels(labels: Vec<Pauli>) -> Self {
        Self(labels)
    }

    /// Identity everywhere except `ops`.
    pub fn from_ops(n_qubits: usize, ops: impl IntoIterator<Item = (usize, Pauli)>) -> Self {
        let mut s = Self::identity(n_qubits);
        for (q, p) in ops {
            s.0[q] = p;
        }
        s
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        self.0[qubit]
    }

    pub fn labels(&self) -> &[Pauli] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    /// Qubits carrying a non-identity label, ascending.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != Pauli::I)
            .map(|(q, _)| q)
    }

    pub fn weight(&self) -> usize {
        self.support().count()
    }

    pub fn mul(&self, other: &PauliString) -> (Complex64, PauliString) {
        debug_assert_eq!(self.len(), other.len());
        let mut phase = ONE;
        let labels = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| {
                let (ph, p) = a.mul(b);
                phase *= ph;
                p
            })
            .collect();
        (phase, PauliString(labels))
    }

    /// Bit masks for dense application, valid for at most 64 qubits.
    /// Returns `(x_mask, z_mask, y_count)` with `P = i^y X^x Z^z`.
    pub fn masks(&self) -> (u64, u64, u32) {
        let n = self.len();
        assert!(n <= 64, "dense masks need at most 64 qubits");
        let (mut x, mut z, mut y) = (0u64, 0u64, 0u32);
        for (q, &p) in self.0.iter().enumerate() {
            let bit = 1u64 << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => x |= bit,
                Pauli::Z => z |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                    y += 1;
                }
            }
        }
        (x, z, y)
    }

    /// Dense matrix of the labels on qubits `start..start + count`.
    pub fn local_matrix(&self, start: usize, count: usize) -> Array2<Complex64> {
        let mut m = Array2::from_elem((1, 1), ONE);
        for q in start..start + count {
            m = kron(&m, &pauli_array(self.0[q]));
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.label())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| {
                Pauli::from_label(c)
                    .ok_or_else(|| Error::Parse(format!("invalid Pauli label '{c}' in \"{s}\"")))
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }
}

pub(crate) fn pauli_array(p: Pauli) -> Array2<Complex64> {
    let m = p.matrix();
    Array2::from_shape_fn((2, 2), |(i, j)| m[i][j])
}

pub(crate) fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| {
        a[[i / br, j / bc]] * b[[i % br, j % bc]]
    })
}

/// Pauli sum with complex coefficients, used while composing fermionic
/// operators. Hermitian results are converted to [`PauliSumOperator`].
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: BTreeMap<PauliString, Complex64>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self::term(ONE, PauliString::identity(n_qubits))
    }

    pub fn term(coefficient: Complex64, string: PauliString) -> Self {
        let mut s = Self::zero(string.len());
        s.add_term(coefficient, string);
        s
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, coefficient: Complex64, string: PauliString) {
        assert_eq!(string.len(), self.n_qubits, "Pauli string length mismatch");
        *self.terms.entry(string).or_insert(ZERO) += coefficient;
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(s, c)| (s.clone(), c * factor)).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(s, c)| (s.clone(), c.conj())).collect(),
        }
    }

    pub fn mul(&self, other: &PauliSum) -> Self {
        let mut out = Self::zero(self.n_qubits);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let (phase, s) = a.mul(b);
                out.add_term(ca * cb * phase, s);
            }
        }
        out.prune();
        out
    }

    /// Removes coefficients below [`DROP_TOLERANCE`].
    pub fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() >= DROP_TOLERANCE);
    }

    /// Converts to a real-coefficient operator; fails if any imaginary
    /// part exceeds `tol`.
    pub fn to_hermitian(&self, tol: f64) -> Result<PauliSumOperator> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (s, c) in &self.terms {
            if c.im.abs() > tol {
                return Err(Error::NotHermitian {
                    string: s.to_string(),
                    imag: c.im,
                });
            }
            terms.push((c.re, s.clone()));
        }
        PauliSumOperator::from_terms(self.n_qubits, terms)
    }
}

impl std::ops::Add for PauliSum {
    type Output = PauliSum;

    fn add(mut self, rhs: PauliSum) -> PauliSum {
        self += rhs;
        self
    }
}

impl std::ops::AddAssign for PauliSum {
    fn add_assign(&mut self, rhs: PauliSum) {
        for (s, c) in rhs.terms {
            self.add_term(c, s);
        }
        self.prune();
    }
}

/// Hermitian qubit operator `sum_k c_k P_k` with real `c_k`.
///
/// Terms are kept in lexicographic string order with duplicates merged,
/// so two operators compare equal exactly when their canonical listings do.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSumOperator {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSumOperator {
    pub fn from_terms(
        n_qubits: usize,
        terms: impl IntoIterator<Item = (f64, PauliString)>,
    ) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("operator needs at least one qubit".into()));
        }
        let mut merged: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (c, s) in terms {
            if s.len() != n_qubits {
                return Err(Error::InvalidArgument(format!(
                    "string {s} has length {}, expected {n_qubits}",
                    s.len()
                )));
            }
            *merged.entry(s).or_insert(0.0) += c;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.abs() >= DROP_TOLERANCE)
            .map(|(s, c)| (c, s))
            .collect();
        Ok(Self { n_qubits, terms })
    }

    pub fn zero(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `sum_k |c_k|`, an upper bound on the spectral radius.
    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    pub fn to_pauli_sum(&self) -> PauliSum {
        let mut s = PauliSum::zero(self.n_qubits);
        for (c, p) in &self.terms {
            s.add_term(Complex64::new(*c, 0.0), p.clone());
        }
        s
    }

    pub fn add(&self, other: &PauliSumOperator) -> Result<Self> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Self::from_terms(
            self.n_qubits,
            self.terms.iter().chain(&other.terms).cloned(),
        )
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n_qubits: self.n_qubits,
            terms: self
                .terms
                .iter()
                .map(|(c, s)| (c * factor, s.clone()))
                .filter(|(c, _)| c.abs() >= DROP_TOLERANCE)
                .collect(),
        }
    }

    /// Embeds into a larger register, acting as identity on the extra
    /// trailing qubits.
    pub fn extend_identity(&self, extra_qubits: usize) -> Self {
        let n = self.n_qubits + extra_qubits;
        Self {
            n_qubits: n,
            terms: self
                .terms
                .iter()
                .map(|(c, s)| {
                    let mut labels = s.labels().to_vec();
                    labels.resize(n, Pauli::I);
                    (*c, PauliString::from_labels(labels))
                })
                .collect(),
        }
    }

    /// Plain-text listing, one `coefficient<TAB>string` line per term.
    pub fn to_listing(&self) -> String {
        let mut out = String::new();
        for (c, s) in &self.terms {
            out.push_str(&format!("{c:.17e}\t{s}\n"));
        }
        out
    }

    pub fn from_listing(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut n_qubits = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (c, s) = line.split_once('\t').ok_or_else(|| {
                Error::Parse(format!("line {}: expected coefficient<TAB>string", lineno + 1))
            })?;
            let c: f64 = c
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            let s: PauliString = s.trim().parse()?;
            n_qubits.get_or_insert(s.len());
            terms.push((c, s));
        }
        let n = n_qubits.ok_or_else(|| Error::Parse("empty operator listing".into()))?;
        Self::from_terms(n, terms)
    }
}

/// Pauli expansion of a `2^k x 2^k` matrix acting on qubits
/// `start..start + k` of an `n_qubits` register: `M = sum_P tr(P M)/2^k P`.
pub fn expand_local_matrix(
    matrix: &Array2<Complex64>,
    start: usize,
    n_qubits: usize,
) -> Result<PauliSum> {
    let dim = matrix.nrows();
    if dim != matrix.ncols() || !dim.is_power_of_two() {
        return Err(Error::InvalidArgument("local matrix must be square with power-of-two size".into()));
    }
    let k = dim.trailing_zeros() as usize;
    if start + k > n_qubits {
        return Err(Error::InvalidArgument("local matrix exceeds register".into()));
    }
    let mut out = PauliSum::zero(n_qubits);
    let all = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    for code in 0..(1usize << (2 * k)) {
        let labels: Vec<Pauli> = (0..k).map(|j| all[(code >> (2 * (k - 1 - j))) & 3]).collect();
        let local = PauliString::from_labels(labels.clone());
        let p = local.local_matrix(0, k);
        // tr(P M) with P Hermitian
        let mut tr = ZERO;
        for i in 0..dim {
            for j in 0..dim {
                tr += p[[i, j]] * matrix[[j, i]];
            }
        }
        let coeff = tr / dim as f64;
        if coeff.norm() >= DROP_TOLERANCE {
            let full = PauliString::from_ops(n_qubits, labels.into_iter().enumerate().map(|(j, p)| (start + j, p)));
            out.add_term(coeff, full);
        }
    }
    Ok(out)
}
