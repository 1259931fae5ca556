use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{GammaRep, ModelSpec};
use crate::linalg::C64;
use crate::mps::MatrixProductState;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSeries {
    /// Separations `Δx`, in units of length.
    pub separations: Vec<f64>,
    /// `<ψ_0(x) ψ̄_0(y)>` for the centered pair at each separation.
    pub values: Vec<f64>,
    pub error_bars: Vec<f64>,
    /// Full spinor block `<ψ_α(x) ψ̄_β(y)>` per separation.
    pub blocks: Vec<[[C64; 2]; 2]>,
    /// Site pair `(x, y)` behind each entry.
    pub pairs: Vec<(usize, usize)>,
}

impl CorrelatorSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Site pair for separation `k` (in lattice units) placed as symmetrically
/// as possible about the chain midpoint.
pub fn centered_pair(n_sites: usize, k: usize) -> Option<(usize, usize)> {
    if k == 0 || k >= n_sites {
        return None;
    }
    let x = (n_sites - 1 - k) / 2;
    Some((x, x + k))
}

/// Local operator on each site for a product of fermion ladder operators,
/// `ops[0] ops[1] ...`, after the Jordan-Wigner map. Entries of `None` are
/// identities.
pub fn fermion_string_operators(
    spec: &ModelSpec,
    ladder: &[(usize, bool)],
) -> Result<Vec<Option<Array2<C64>>>> {
    let n_modes = spec.n_qubits();
    let sigma_minus = [[ZERO, ONE], [ZERO, ZERO]];
    let sigma_plus = [[ZERO, ZERO], [ONE, ZERO]];
    let z = [[ONE, ZERO], [ZERO, -ONE]];
    let id = [[ONE, ZERO], [ZERO, ONE]];
    let mut per_qubit = vec![id; n_modes];
    for &(mode, create) in ladder {
        if mode >= n_modes {
            return Err(Error::InvalidArgument(format!("mode {mode} out of range")));
        }
        for (q, m) in per_qubit.iter_mut().enumerate() {
            let factor = if q < mode {
                z
            } else if q == mode {
                if create {
                    sigma_plus
                } else {
                    sigma_minus
                }
            } else {
                continue;
            };
            *m = mul2(m, &factor);
        }
    }
    let q = spec.qubits_per_site();
    let mut sites = Vec::with_capacity(spec.n_sites);
    for s in 0..spec.n_sites {
        let qubits = &per_qubit[s * q..(s + 1) * q];
        if qubits.iter().all(|m| *m == id) {
            sites.push(None);
            continue;
        }
        let mut acc = Array2::from_elem((1, 1), ONE);
        for m in qubits {
            let m = Array2::from_shape_fn((2, 2), |(i, j)| m[i][j]);
            acc = kron(&acc, &m);
        }
        sites.push(Some(acc));
    }
    Ok(sites)
}

fn mul2(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let mut c = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

/// Spinor block `<ψ_α(x) ψ̄_β(y)>` of flavor `flavor`, with
/// `ψ = c / sqrt(a)` and `ψ̄ = ψ^† γ0`.
pub fn spinor_block(
    state: &MatrixProductState,
    spec: &ModelSpec,
    x: usize,
    y: usize,
    flavor: usize,
) -> Result<[[C64; 2]; 2]> {
    if x >= spec.n_sites || y >= spec.n_sites || flavor >= spec.flavors {
        return Err(Error::InvalidArgument(format!("pair ({x}, {y}) outside the lattice")));
    }
    let g0 = GammaRep::majorana().gamma0;
    let mut raw = [[ZERO; 2]; 2];
    for (alpha, row) in raw.iter_mut().enumerate() {
        for (gamma, entry) in row.iter_mut().enumerate() {
            let ops = fermion_string_operators(
                spec,
                &[(spec.mode(x, flavor, alpha), false), (spec.mode(y, flavor, gamma), true)],
            )?;
            *entry = state.expectation_product(&ops)?;
        }
    }
    let mut block = [[ZERO; 2]; 2];
    for alpha in 0..2 {
        for beta in 0..2 {
            block[alpha][beta] = (raw[alpha][0] * g0[0][beta] + raw[alpha][1] * g0[1][beta]) / spec.spacing;
        }
    }
    Ok(block)
}

/// Centered-pair correlator for separations `a, 2a, ..., (N/2) a`, with
/// error bars `2 sqrt(ε) / a` (the ladder products have unit norm).
pub fn two_point_correlator(
    state: &MatrixProductState,
    spec: &ModelSpec,
    epsilon: f64,
) -> Result<CorrelatorSeries> {
    two_point_correlator_upto(state, spec, epsilon, spec.n_sites / 2)
}

pub fn two_point_correlator_upto(
    state: &MatrixProductState,
    spec: &ModelSpec,
    epsilon: f64,
    max_separation: usize,
) -> Result<CorrelatorSeries> {
    if state.len() != spec.n_sites {
        return Err(Error::DimensionMismatch {
            expected: spec.n_sites,
            found: state.len(),
        });
    }
    if max_separation >= spec.n_sites {
        return Err(Error::InvalidArgument(format!(
            "separation {max_separation} does not fit in {} sites",
            spec.n_sites
        )));
    }
    let err = 2.0 * epsilon.max(0.0).sqrt() / spec.spacing;
    let mut series = CorrelatorSeries {
        separations: vec![],
        values: vec![],
        error_bars: vec![],
        blocks: vec![],
        pairs: vec![],
    };
    for k in 1..=max_separation {
        let (x, y) = centered_pair(spec.n_sites, k).expect("k checked above");
        let block = spinor_block(state, spec, x, y, 0)?;
        series.separations.push(k as f64 * spec.spacing);
        series.values.push(block[0][0].re);
        series.error_bars.push(err);
        series.blocks.push(block);
        series.pairs.push((x, y));
    }
    Ok(series)
}

/// Same correlator from a quadratic Hamiltonian by Wick's theorem: the
/// ground state fills every negative single-particle level, so
/// `<c_i c_j^†> = δ_ij - Σ_{occupied k} U_ik conj(U_jk)`.
pub fn free_fermion_block(
    single_particle: &Array2<C64>,
    spec: &ModelSpec,
    x: usize,
    y: usize,
) -> Result<[[C64; 2]; 2]> {
    let (e, u) = crate::linalg::eigh(single_particle)?;
    let g0 = GammaRep::majorana().gamma0;
    let green = |i: usize, j: usize| -> C64 {
        let mut v = if i == j { ONE } else { ZERO };
        for k in 0..e.len() {
            if e[k] < 0.0 {
                v -= u[[i, k]] * u[[j, k]].conj();
            }
        }
        v
    };
    let mut block = [[ZERO; 2]; 2];
    for alpha in 0..2 {
        for beta in 0..2 {
            let mut v = ZERO;
            for gamma in 0..2 {
                v += green(spec.mode(x, 0, alpha), spec.mode(y, 0, gamma)) * g0[gamma][beta];
            }
            block[alpha][beta] = v / spec.spacing;
        }
    }
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_are_centered() {
        assert_eq!(centered_pair(50, 1), Some((24, 25)));
        assert_eq!(centered_pair(50, 2), Some((23, 25)));
        assert_eq!(centered_pair(50, 25), Some((12, 37)));
        assert_eq!(centered_pair(6, 0), None);
        assert_eq!(centered_pair(6, 6), None);
    }

    #[test]
    fn number_operator_string() {
        let spec = crate::lattice::reference_spec(2, 0.5, 0.2, 1.5);
        // c_1^† c_1 is local: diag(0, 1) on qubit 1 of site 0
        let ops = fermion_string_operators(&spec, &[(1, true), (1, false)]).unwrap();
        let m = ops[0].as_ref().unwrap();
        let expected = [0.0, 1.0, 0.0, 1.0];
        for i in 0..4 {
            assert!((m[[i, i]].re - expected[i]).abs() < 1e-15);
        }
        assert!(ops[1].is_none());
    }
}
