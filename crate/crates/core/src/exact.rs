//! Exact ground-truth engine: dense diagonalization, matrix-free Lanczos,
//! and exact time evolution for Pauli-sum operators.

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, LanczosOptions, LinearOperator, C64};
use crate::pauli::PauliSumOperator;

pub const DENSE_CAP: usize = 14;
pub const LANCZOS_CAP: usize = 24;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Pauli sum compiled for matrix-free application. Terms sharing an X-mask
/// are grouped so each group moves amplitudes along one permutation.
#[derive(Debug, Clone)]
pub struct PauliApplier {
    n_qubits: usize,
    groups: Vec<(u64, Vec<(u64, C64)>)>,
}

impl PauliApplier {
    pub fn new(op: &PauliSumOperator) -> Result<Self> {
        let n = op.n_qubits();
        if n > LANCZOS_CAP {
            return Err(Error::CapExceeded {
                qubits: n,
                cap: LANCZOS_CAP,
            });
        }
        let mut groups: Vec<(u64, Vec<(u64, C64)>)> = Vec::new();
        for (c, s) in op.terms() {
            let (x, z, y) = s.masks();
            let coeff = C64::new(0.0, 1.0).powu(y) * c;
            match groups.iter_mut().find(|(gx, _)| *gx == x) {
                Some((_, terms)) => terms.push((z, coeff)),
                None => groups.push((x, vec![(z, coeff)])),
            }
        }
        groups.sort_by_key(|(x, _)| *x);
        Ok(Self {
            n_qubits: n,
            groups,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }
}

impl LinearOperator for PauliApplier {
    fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = ZERO);
        for (xmask, terms) in &self.groups {
            for (b, &amp) in x.iter().enumerate() {
                if amp == ZERO {
                    continue;
                }
                let b = b as u64;
                let mut acc = ZERO;
                for &(z, c) in terms {
                    if (b & z).count_ones() % 2 == 0 {
                        acc += c;
                    } else {
                        acc -= c;
                    }
                }
                y[(b ^ xmask) as usize] += acc * amp;
            }
        }
    }
}

pub fn apply(op: &PauliSumOperator, state: &[C64]) -> Result<Vec<C64>> {
    let applier = PauliApplier::new(op)?;
    if state.len() != applier.dim() {
        return Err(Error::DimensionMismatch {
            expected: applier.dim(),
            found: state.len(),
        });
    }
    let mut out = vec![ZERO; state.len()];
    applier.apply(state, &mut out);
    Ok(out)
}

pub fn expectation(op: &PauliSumOperator, state: &[C64]) -> Result<f64> {
    let hv = apply(op, state)?;
    Ok(linalg::dot(state, &hv).re)
}

pub fn to_dense(op: &PauliSumOperator) -> Result<Array2<C64>> {
    to_dense_capped(op, DENSE_CAP)
}

pub fn to_dense_capped(op: &PauliSumOperator, cap: usize) -> Result<Array2<C64>> {
    let n = op.n_qubits();
    if n > cap {
        return Err(Error::CapExceeded { qubits: n, cap });
    }
    let applier = PauliApplier::new(op)?;
    let dim = 1usize << n;
    let mut m = Array2::zeros((dim, dim));
    for (xmask, terms) in &applier.groups {
        for b in 0..dim as u64 {
            let acc: C64 = terms
                .iter()
                .map(|&(z, c)| if (b & z).count_ones() % 2 == 0 { c } else { -c })
                .sum();
            m[[(b ^ xmask) as usize, b as usize]] += acc;
        }
    }
    Ok(m)
}

/// Full eigendecomposition `H = V diag(values) V^dagger`, values ascending,
/// each eigenvector phase-fixed so its first non-negligible amplitude is
/// real positive.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Array1<f64>,
    pub vectors: Array2<C64>,
}

impl Eigensystem {
    pub fn from_hermitian(matrix: &Array2<C64>) -> Result<Self> {
        let (values, mut vectors) = linalg::eigh(matrix)?;
        for mut col in vectors.axis_iter_mut(Axis(1)) {
            let mut v = col.to_owned();
            linalg::fix_phase_view(&mut v);
            col.assign(&v);
        }
        Ok(Self { values, vectors })
    }

    pub fn of_operator(op: &PauliSumOperator) -> Result<Self> {
        Self::from_hermitian(&to_dense(op)?)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Array1<C64> {
        self.vectors.column(k).to_owned()
    }

    /// Coefficients of `state` in the eigenbasis, `V^dagger state`.
    pub fn coefficients(&self, state: &[C64]) -> Array1<C64> {
        let s = Array1::from(state.to_vec());
        self.vectors.t().mapv(|x| x.conj()).dot(&s)
    }

    pub fn from_coefficients(&self, coeffs: &Array1<C64>) -> Vec<C64> {
        self.vectors.dot(coeffs).to_vec()
    }

    /// `exp(-i H t) state`.
    pub fn evolve(&self, time: f64, state: &[C64]) -> Vec<C64> {
        let mut c = self.coefficients(state);
        for (ci, e) in c.iter_mut().zip(self.values.iter()) {
            *ci *= C64::from_polar(1.0, -e * time);
        }
        self.from_coefficients(&c)
    }

    /// Number of eigenvalues within `tol` of the lowest.
    pub fn ground_multiplicity(&self, tol: f64) -> usize {
        let e0 = self.values[0];
        self.values.iter().take_while(|&&e| e - e0 <= tol).count()
    }

    pub fn spectrum(&self) -> SpectrumResult {
        let ground_energy = self.values[0];
        let first_excited_energy = if self.dim() > 1 {
            self.values[1]
        } else {
            ground_energy
        };
        SpectrumResult {
            ground_energy,
            first_excited_energy,
            gap: (first_excited_energy - ground_energy).max(0.0),
            ground_vector: self.vector(0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub ground_energy: f64,
    pub first_excited_energy: f64,
    pub gap: f64,
    pub ground_vector: Array1<C64>,
}

impl SpectrumResult {
    pub const CSV_HEADER: &'static str = "n_sites,ground_energy,first_excited,gap";

    pub fn csv_row(&self, n_sites: usize) -> String {
        format!(
            "{n_sites},{:.15e},{:.15e},{:.15e}",
            self.ground_energy, self.first_excited_energy, self.gap
        )
    }
}

pub fn ground_state_dense(op: &PauliSumOperator) -> Result<SpectrumResult> {
    ground_state_dense_capped(op, DENSE_CAP)
}

pub fn ground_state_dense_capped(op: &PauliSumOperator, cap: usize) -> Result<SpectrumResult> {
    Ok(Eigensystem::from_hermitian(&to_dense_capped(op, cap)?)?.spectrum())
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosConfig {
    pub krylov_dim: usize,
    pub max_restarts: usize,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self {
            krylov_dim: 80,
            max_restarts: 100,
        }
    }
}

pub fn ground_state_lanczos(op: &PauliSumOperator, tol: f64, seed: u64) -> Result<SpectrumResult> {
    ground_state_lanczos_with(op, tol, seed, LanczosConfig::default())
}

/// Ground pair by Lanczos, then the first excited level by a second run on
/// `H + shift |g><g|`, which lifts the ground state above the spectrum.
pub fn ground_state_lanczos_with(
    op: &PauliSumOperator,
    tol: f64,
    seed: u64,
    cfg: LanczosConfig,
) -> Result<SpectrumResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let applier = PauliApplier::new(op)?;
    let dim = applier.dim();
    let opts = LanczosOptions {
        tol,
        krylov_dim: cfg.krylov_dim,
        max_restarts: cfg.max_restarts,
    };
    let ground = linalg::lanczos_lowest(&applier, linalg::random_vector(dim, seed), opts)?;
    let mut g = ground.vector;
    linalg::fix_phase(&mut g);

    if dim == 1 {
        return Ok(SpectrumResult {
            ground_energy: ground.value,
            first_excited_energy: ground.value,
            gap: 0.0,
            ground_vector: Array1::from(g),
        });
    }

    let shift = 2.0 * op.one_norm() + 1.0;
    let deflated = (dim, |x: &[C64], y: &mut [C64]| {
        applier.apply(x, y);
        let overlap = linalg::dot(&g, x) * shift;
        linalg::axpy(overlap, &g, y);
    });
    let mut start = linalg::random_vector(dim, seed.wrapping_add(1));
    let c = linalg::dot(&g, &start);
    linalg::axpy(-c, &g, &mut start);
    let excited = linalg::lanczos_lowest(&deflated, start, opts)?;
    let first = excited.value.min(ground.value + shift);
    Ok(SpectrumResult {
        ground_energy: ground.value,
        first_excited_energy: first,
        gap: (first - ground.value).max(0.0),
        ground_vector: Array1::from(g),
    })
}

/// `exp(-i H t) state` through the eigendecomposition of `H`.
pub fn evolve_exact(op: &PauliSumOperator, time: f64, state: &[C64]) -> Result<Vec<C64>> {
    let dim = 1usize << op.n_qubits().min(63);
    if op.n_qubits() > DENSE_CAP {
        return Err(Error::CapExceeded {
            qubits: op.n_qubits(),
            cap: DENSE_CAP,
        });
    }
    if state.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: state.len(),
        });
    }
    let n = linalg::norm(state);
    if (n - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(n));
    }
    Ok(Eigensystem::of_operator(op)?.evolve(time, state))
}

/// Fidelity `|<a|b>|^2` between two pure states.
pub fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    linalg::dot(a, b).norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliString;

    fn op(terms: &[(f64, &str)]) -> PauliSumOperator {
        let n = terms[0].1.len();
        PauliSumOperator::from_terms(n, terms.iter().map(|(c, s)| (*c, s.parse().unwrap()))).unwrap()
    }

    #[test]
    fn single_z() {
        let s = ground_state_dense(&op(&[(1.0, "Z")])).unwrap();
        assert!((s.ground_energy + 1.0).abs() < 1e-15);
        assert!((s.gap - 2.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_zero_operator() {
        let zero = PauliSumOperator::zero(3);
        let s = ground_state_dense(&zero).unwrap();
        assert_eq!(s.gap, 0.0);
        assert!((linalg::norm(s.ground_vector.as_slice().unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dense_cap_enforced() {
        let big = PauliSumOperator::from_terms(15, [(1.0, PauliString::identity(15))]).unwrap();
        assert!(matches!(ground_state_dense(&big), Err(Error::CapExceeded { .. })));
        assert!(ground_state_lanczos(&op(&[(1.0, "Z")]), 0.0, 1).is_err());
    }

    #[test]
    fn diagonal_operator_gives_basis_state() {
        let h = op(&[(1.0, "ZII"), (0.5, "IZI"), (-0.25, "IIZ"), (0.3, "ZZI")]);
        let s = ground_state_lanczos(&h, 1e-10, 4).unwrap();
        let dense = ground_state_dense(&h).unwrap();
        assert!((s.ground_energy - dense.ground_energy).abs() < 1e-9);
        let peak = s.ground_vector.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_time_is_identity() {
        let h = op(&[(0.7, "XY"), (-1.1, "ZI"), (0.2, "YY")]);
        let psi = linalg::random_vector(4, 9);
        let out = evolve_exact(&h, 0.0, &psi).unwrap();
        for (a, b) in out.iter().zip(&psi) {
            assert!((a - b).norm() < 1e-13);
        }
        assert!(evolve_exact(&h, 1.0, &[C64::new(2.0, 0.0); 4]).is_err());
    }

    #[test]
    fn eigenstate_only_acquires_phase() {
        let h = op(&[(0.7, "XY"), (-1.1, "ZI"), (0.2, "YY")]);
        let s = ground_state_dense(&h).unwrap();
        let g = s.ground_vector.to_vec();
        let out = evolve_exact(&h, 1.3, &g).unwrap();
        let overlap = linalg::dot(&g, &out);
        assert!((overlap - C64::from_polar(1.0, -s.ground_energy * 1.3)).norm() < 1e-12);
    }

    #[test]
    fn csv_row_layout() {
        let s = ground_state_dense(&op(&[(1.0, "Z")])).unwrap();
        let row = s.csv_row(1);
        assert_eq!(row.split(',').count(), 4);
        assert!(row.starts_with("1,"));
    }
}
