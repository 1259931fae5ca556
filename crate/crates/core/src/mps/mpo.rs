use std::collections::BTreeMap;

use ndarray::{Array2, Array3, Array4, ArrayD};

use super::state::MatrixProductState;
use super::tensor::{permute, tensordot};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::pauli::{Pauli, PauliSumOperator};

const ONE: C64 = C64::new(1.0, 0.0);

/// Matrix product operator with tensors `W[left, right, s, s']` holding
/// `<s|W|s'>`. Each bond is laid out as `start | channels | done`: `start`
/// means no factor of a term has been placed yet, `done` means the whole
/// term has.
#[derive(Debug, Clone)]
pub struct MatrixProductOperator {
    tensors: Vec<Array4<C64>>,
}

#[derive(Default)]
struct Bond {
    start: bool,
    done: bool,
    channels: BTreeMap<Vec<Pauli>, usize>,
}

impl Bond {
    fn dim(&self) -> usize {
        self.start as usize + self.channels.len() + self.done as usize
    }
    fn start(&self) -> usize {
        0
    }
    fn channel(&self, key: &[Pauli]) -> usize {
        self.start as usize + self.channels[key]
    }
    fn done(&self) -> usize {
        self.dim() - 1
    }
}

/// Compiles a Pauli sum into an exact MPO with `qubits_per_site` qubits per
/// MPO site. Every term must act within two adjacent sites.
pub fn compile_mpo(op: &PauliSumOperator, qubits_per_site: usize) -> Result<MatrixProductOperator> {
    let nq = op.n_qubits();
    if qubits_per_site == 0 || nq % qubits_per_site != 0 {
        return Err(Error::InvalidArgument(format!(
            "{nq} qubits do not split into sites of {qubits_per_site}"
        )));
    }
    let q = qubits_per_site;
    let n = nq / q;
    let d = 1usize << q;
    let mut onsite = vec![Array2::<C64>::zeros((d, d)); n];
    let mut bonds: Vec<Bond> = (0..=n).map(|_| Bond::default()).collect();
    let mut pairs: Vec<(usize, Vec<Pauli>, Array2<C64>)> = Vec::new();
    // the identity part always lives on site 0, which also keeps every bond
    // nonempty for the zero operator
    let mut spans = vec![(0usize, 0usize)];

    for (c, p) in op.terms() {
        let sites: Vec<usize> = p.support().map(|i| i / q).collect();
        let lo = sites.iter().copied().min().unwrap_or(0);
        let hi = sites.iter().copied().max().unwrap_or(0);
        if hi > lo + 1 {
            return Err(Error::InvalidArgument(format!(
                "term {p} spans sites {lo}..={hi}; only nearest-neighbour terms compile"
            )));
        }
        spans.push((lo, hi));
        if lo == hi {
            onsite[lo].scaled_add(C64::new(*c, 0.0), &p.local_matrix(lo * q, q));
        } else {
            let key = p.labels()[lo * q..(lo + 1) * q].to_vec();
            let right = p.local_matrix(hi * q, q).mapv(|x| x * c);
            pairs.push((hi, key, right));
        }
    }
    for (b, bond) in bonds.iter_mut().enumerate() {
        bond.start = b < n && spans.iter().any(|&(lo, _)| lo >= b);
        bond.done = b > 0 && spans.iter().any(|&(_, hi)| hi < b);
    }
    for (hi, key, _) in &pairs {
        let bond = &mut bonds[*hi];
        let next = bond.channels.len();
        bond.channels.entry(key.clone()).or_insert(next);
    }
    let identity = Array2::<C64>::eye(d);

    let mut tensors = Vec::with_capacity(n);
    for k in 0..n {
        let (bl, br) = (&bonds[k], &bonds[k + 1]);
        let mut w = Array4::<C64>::zeros((bl.dim(), br.dim(), d, d));
        let mut put = |a: usize, b: usize, m: &Array2<C64>| {
            let mut slot = w.slice_mut(ndarray::s![a, b, .., ..]);
            slot += m;
        };
        if bl.start && br.start {
            put(bl.start(), br.start(), &identity);
        }
        if bl.done && br.done {
            put(bl.done(), br.done(), &identity);
        }
        if bl.start && br.done {
            put(bl.start(), br.done(), &onsite[k]);
        }
        for key in br.channels.keys() {
            let labels = crate::pauli::PauliString::from_labels(key.clone());
            put(bl.start(), br.channel(key), &labels.local_matrix(0, q));
        }
        for (hi, key, right) in &pairs {
            if *hi == k {
                put(bl.channel(key), br.done(), right);
            }
        }
        tensors.push(w);
    }
    Ok(MatrixProductOperator { tensors })
}

impl MatrixProductOperator {
    pub fn from_tensors(tensors: Vec<Array4<C64>>) -> Result<Self> {
        if tensors.is_empty() || tensors[0].shape()[0] != 1 || tensors[tensors.len() - 1].shape()[1] != 1 {
            return Err(Error::InvalidArgument("MPO outer bonds must have dimension 1".into()));
        }
        Ok(Self { tensors })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensor(&self, k: usize) -> &Array4<C64> {
        &self.tensors[k]
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.tensors.iter().map(|w| w.shape()[2]).collect()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.tensors.iter().map(|w| w.shape()[0]).collect();
        b.push(1);
        b
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    fn check(&self, state: &MatrixProductState) -> Result<()> {
        if state.phys_dims() != self.phys_dims() {
            return Err(Error::InvalidArgument("MPS and MPO physical dimensions differ".into()));
        }
        Ok(())
    }

    /// `<ψ|W|ψ>` for a (not necessarily normalized) state.
    pub fn expectation(&self, state: &MatrixProductState) -> Result<C64> {
        self.check(state)?;
        let mut env = unit_env(3);
        for k in 0..self.len() {
            env = left_env_step(&env, state.tensor(k), &self.tensors[k]);
        }
        Ok(env.iter().copied().sum())
    }

    /// `<ψ|W W|ψ>` by a double-layer contraction, exact up to rounding.
    pub fn expectation_sq(&self, state: &MatrixProductState) -> Result<C64> {
        self.check(state)?;
        let mut env = unit_env(4);
        for k in 0..self.len() {
            let a = state.tensor(k).clone().into_dyn();
            let w = self.tensors[k].clone().into_dyn();
            // env[a, w1, w2, a'] A[a', s'', b'] -> [a, w1, w2, s'', b']
            let t = tensordot(&env, &[3], &a, &[0]);
            // W[w2, v2, s', s''] -> [a, w1, b', v2, s']
            let t = tensordot(&t, &[2, 3], &w, &[0, 3]);
            // W[w1, v1, s, s'] -> [a, b', v2, v1, s]
            let t = tensordot(&t, &[1, 4], &w, &[0, 3]);
            let ac = a.mapv(|x| x.conj());
            // conj A[a, s, b] -> [b', v2, v1, b]
            let t = tensordot(&t, &[0, 4], &ac, &[0, 1]);
            env = permute(&t, &[3, 2, 1, 0]);
        }
        Ok(env.iter().copied().sum())
    }

    /// Dense matrix of the operator, for small checks.
    pub fn to_dense(&self) -> Array2<C64> {
        let mut acc = self.tensors[0].clone().into_dyn();
        // acc axes: [l, r, s.., s'..] folded as [l, r, S, S']
        for w in &self.tensors[1..] {
            let t = tensordot(&acc, &[1], &w.clone().into_dyn(), &[0]);
            // [l, S, S', r, s, s'] -> [l, r, S, s, S', s']
            let t = permute(&t, &[0, 3, 1, 4, 2, 5]);
            let sh = t.shape().to_vec();
            acc = super::tensor::reshape(t, &[sh[0], sh[1], sh[2] * sh[3], sh[4] * sh[5]]);
        }
        let sh = acc.shape().to_vec();
        acc.into_shape((sh[2], sh[3])).expect("outer bonds are trivial")
    }
}

pub(crate) fn unit_env(rank: usize) -> ArrayD<C64> {
    ArrayD::from_elem(vec![1; rank], ONE)
}

/// Absorbs site `A`, `W` into a left environment `E[bra, w, ket]`.
pub(crate) fn left_env_step(env: &ArrayD<C64>, a: &Array3<C64>, w: &Array4<C64>) -> ArrayD<C64> {
    let ad = a.clone().into_dyn();
    // E[a, w, a'] A[a', s', b'] -> [a, w, s', b']
    let t = tensordot(env, &[2], &ad, &[0]);
    // W[w, v, s, s'] -> [a, b', v, s]
    let t = tensordot(&t, &[1, 2], &w.clone().into_dyn(), &[0, 3]);
    let ac = ad.mapv(|x| x.conj());
    // conj A[a, s, b] -> [b', v, b]
    let t = tensordot(&t, &[0, 3], &ac, &[0, 1]);
    permute(&t, &[2, 1, 0])
}

/// Absorbs site `A`, `W` into a right environment `R[bra, w, ket]`.
pub(crate) fn right_env_step(env: &ArrayD<C64>, a: &Array3<C64>, w: &Array4<C64>) -> ArrayD<C64> {
    let ad = a.clone().into_dyn();
    // A[a', s', b'] R[b, u, b'] -> [a', s', b, u]
    let t = tensordot(&ad, &[2], env, &[2]);
    // W[w, u, s, s'] -> [a', b, w, s]
    let t = tensordot(&t, &[1, 3], &w.clone().into_dyn(), &[3, 1]);
    let ac = ad.mapv(|x| x.conj());
    // conj A[a, s, b] -> [a', w, a]
    let t = tensordot(&t, &[1, 3], &ac, &[2, 1]);
    permute(&t, &[2, 1, 0])
}

/// `H θ` for a two-site block `θ[a', s', t', b']`.
pub(crate) fn apply_two_site(
    left: &ArrayD<C64>,
    w1: &ArrayD<C64>,
    w2: &ArrayD<C64>,
    right: &ArrayD<C64>,
    theta: &ArrayD<C64>,
) -> ArrayD<C64> {
    // [a, w, s', t', b']
    let t = tensordot(left, &[2], theta, &[0]);
    // W1[w, v, s, s'] -> [a, t', b', v, s]
    let t = tensordot(&t, &[1, 2], w1, &[0, 3]);
    // W2[v, u, t, t'] -> [a, b', s, u, t]
    let t = tensordot(&t, &[3, 1], w2, &[0, 3]);
    // R[b, u, b'] -> [a, s, t, b]
    tensordot(&t, &[3, 1], right, &[1, 2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact;
    use crate::linalg;

    fn ising(n: usize, h: f64) -> PauliSumOperator {
        let mut terms = Vec::new();
        for i in 0..n {
            terms.push((-h, crate::pauli::PauliString::from_ops(n, [(i, Pauli::X)])));
            if i + 1 < n {
                terms.push((-1.0, crate::pauli::PauliString::from_ops(n, [(i, Pauli::Z), (i + 1, Pauli::Z)])));
            }
        }
        PauliSumOperator::from_terms(n, terms).unwrap()
    }

    #[test]
    fn identity_has_unit_bond() {
        let id = PauliSumOperator::from_terms(4, [(1.0, crate::pauli::PauliString::identity(4))]).unwrap();
        let mpo = compile_mpo(&id, 1).unwrap();
        assert_eq!(mpo.max_bond(), 1);
        let zero = compile_mpo(&PauliSumOperator::zero(4), 2).unwrap();
        assert!(zero.to_dense().iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn dense_equivalence_ising() {
        let h = ising(4, 0.7);
        let mpo = compile_mpo(&h, 1).unwrap();
        let dense = exact::to_dense(&h).unwrap();
        let diff = (&mpo.to_dense() - &dense).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-13);
        for seed in 0..5 {
            let v = linalg::random_vector(16, seed);
            let mps = MatrixProductState::from_statevector(&v, &[2; 4]).unwrap();
            let e = mpo.expectation(&mps).unwrap();
            let e_dense = exact::expectation(&h, &v).unwrap();
            assert!((e.re - e_dense).abs() < 1e-12);
            let e2 = mpo.expectation_sq(&mps).unwrap();
            let hv = exact::apply(&h, &v).unwrap();
            assert!((e2.re - linalg::norm(&hv).powi(2)).abs() < 1e-11);
        }
    }

    #[test]
    fn long_range_rejected() {
        let p: crate::pauli::PauliString = "ZIIZ".parse().unwrap();
        let op = PauliSumOperator::from_terms(4, [(1.0, p)]).unwrap();
        assert!(compile_mpo(&op, 1).is_err());
        assert!(compile_mpo(&op, 2).is_ok());
        assert!(compile_mpo(&op, 3).is_err());
    }
}
