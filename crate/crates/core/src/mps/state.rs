use std::io::{Read, Write};

use ndarray::{s, Array1, Array2, Array3, ArrayD, Axis};
use ndarray_linalg::{JobSvd, QR, SVDDC};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::tensor::tensordot;
use crate::error::{Error, Result};
use crate::linalg::{self, C64};

const ONE: C64 = C64::new(1.0, 0.0);

/// Largest state vector that `to_statevector` will materialize.
pub const STATEVECTOR_CAP: usize = 1 << 24;

/// Open-boundary matrix product state. Tensor `k` has axes
/// `(left bond, physical, right bond)`; the outer bonds have dimension 1.
/// A physical index enumerates the basis of one site big-endian over its
/// qubits, so the full amplitude index is the site indices concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProductState {
    tensors: Vec<Array3<C64>>,
    center: usize,
}

impl MatrixProductState {
    /// Validates bond consistency and wraps the tensors without
    /// canonicalizing them.
    pub fn from_tensors(tensors: Vec<Array3<C64>>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::InvalidArgument("an MPS needs at least one site".into()));
        }
        if tensors[0].shape()[0] != 1 || tensors[tensors.len() - 1].shape()[2] != 1 {
            return Err(Error::InvalidArgument("outer bonds must have dimension 1".into()));
        }
        for k in 1..tensors.len() {
            let (r, l) = (tensors[k - 1].shape()[2], tensors[k].shape()[0]);
            if r != l {
                return Err(Error::DimensionMismatch { expected: r, found: l });
            }
        }
        Ok(Self { tensors, center: 0 })
    }

    pub fn product_state(site_vectors: &[Array1<C64>]) -> Result<Self> {
        let tensors = site_vectors
            .iter()
            .map(|v| v.clone().into_shape((1, v.len(), 1)).expect("vector reshape"))
            .collect();
        let mut mps = Self::from_tensors(tensors)?;
        mps.canonicalize(0)?;
        Ok(mps)
    }

    /// Seeded random state with uniform interior bond dimension (capped by
    /// the exact Schmidt rank bound), right-canonical and normalized.
    pub fn random(phys_dims: &[usize], bond: usize, seed: u64) -> Result<Self> {
        if phys_dims.is_empty() || bond == 0 {
            return Err(Error::InvalidArgument("empty chain or zero bond".into()));
        }
        let n = phys_dims.len();
        let mut bonds = vec![1usize; n + 1];
        for k in 1..n {
            let left = phys_dims[..k].iter().fold(1usize, |p, &d| p.saturating_mul(d));
            let right = phys_dims[k..].iter().fold(1usize, |p, &d| p.saturating_mul(d));
            bonds[k] = bond.min(left).min(right);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = (0..n)
            .map(|k| {
                Array3::from_shape_simple_fn((bonds[k], phys_dims[k], bonds[k + 1]), || {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    C64::new(re, im)
                })
            })
            .collect();
        let mut mps = Self::from_tensors(tensors)?;
        mps.canonicalize(0)?;
        Ok(mps)
    }

    /// Exact MPS decomposition of a state vector by successive SVDs. Only
    /// singular values below `1e-14` of the largest are dropped.
    pub fn from_statevector(amplitudes: &[C64], phys_dims: &[usize]) -> Result<Self> {
        let total: usize = phys_dims.iter().product();
        if amplitudes.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                found: amplitudes.len(),
            });
        }
        let mut tensors = Vec::with_capacity(phys_dims.len());
        let mut rest = Array2::from_shape_vec((1, total), amplitudes.to_vec()).expect("shape");
        let mut left = 1;
        for &d in &phys_dims[..phys_dims.len() - 1] {
            let cols = rest.len() / (left * d);
            let m = rest.into_shape((left * d, cols)).expect("reshape");
            let (u, s, vt) = svd(&m)?;
            let keep = s.iter().filter(|&&x| x > 1e-14 * s[0]).count().max(1);
            let u = u.slice(s![.., ..keep]).to_owned();
            tensors.push(u.into_shape((left, d, keep)).expect("reshape"));
            let mut sv = vt.slice(s![..keep, ..]).to_owned();
            for (mut row, &x) in sv.axis_iter_mut(Axis(0)).zip(s.iter()) {
                row.mapv_inplace(|v| v * x);
            }
            rest = sv;
            left = keep;
        }
        let d = phys_dims[phys_dims.len() - 1];
        tensors.push(rest.into_shape((left, d, 1)).expect("reshape"));
        let mut mps = Self::from_tensors(tensors)?;
        mps.center = mps.len() - 1;
        let n = mps.norm();
        if n == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        mps.canonicalize(0)?;
        Ok(mps)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensors(&self) -> &[Array3<C64>] {
        &self.tensors
    }

    pub fn tensor(&self, k: usize) -> &Array3<C64> {
        &self.tensors[k]
    }

    pub(crate) fn set_tensor(&mut self, k: usize, t: Array3<C64>) {
        self.tensors[k] = t;
    }

    pub(crate) fn set_center(&mut self, k: usize) {
        self.center = k;
    }

    pub fn orthogonality_center(&self) -> usize {
        self.center
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.tensors.iter().map(|t| t.shape()[1]).collect()
    }

    /// Bond dimensions including the two trivial outer bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.tensors.iter().map(|t| t.shape()[0]).collect();
        b.push(1);
        b
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Brings the state into mixed-canonical form around `center` and
    /// normalizes it. QR factors are sign-fixed (positive diagonal of `R`)
    /// so repeated canonicalization is stable.
    pub fn canonicalize(&mut self, center: usize) -> Result<()> {
        let n = self.len();
        if center >= n {
            return Err(Error::InvalidArgument(format!("center {center} outside {n} sites")));
        }
        for k in 0..center {
            self.left_orthogonalize(k)?;
        }
        for k in (center + 1..n).rev() {
            self.right_orthogonalize(k)?;
        }
        let c = &mut self.tensors[center];
        let nrm = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        c.mapv_inplace(|x| x / nrm);
        self.center = center;
        Ok(())
    }

    fn left_orthogonalize(&mut self, k: usize) -> Result<()> {
        let t = &self.tensors[k];
        let (l, d, r) = t.dim();
        let m = t.to_owned().into_shape((l * d, r)).expect("reshape");
        let (q, rr) = positive_qr(&m)?;
        let kk = q.shape()[1];
        self.tensors[k] = q.into_shape((l, d, kk)).expect("reshape");
        let next = &self.tensors[k + 1];
        let (_, d2, r2) = next.dim();
        let nm = next.to_owned().into_shape((r, d2 * r2)).expect("reshape");
        self.tensors[k + 1] = rr.dot(&nm).into_shape((kk, d2, r2)).expect("reshape");
        Ok(())
    }

    fn right_orthogonalize(&mut self, k: usize) -> Result<()> {
        let t = &self.tensors[k];
        let (l, d, r) = t.dim();
        let m = t.to_owned().into_shape((l, d * r)).expect("reshape");
        let mh = m.t().mapv(|x| x.conj());
        let (q, rr) = positive_qr(&mh)?;
        let kk = q.shape()[1];
        let qh = q.t().mapv(|x| x.conj());
        self.tensors[k] = qh.as_standard_layout().into_owned().into_shape((kk, d, r)).expect("reshape");
        let rh = rr.t().mapv(|x| x.conj());
        let prev = &self.tensors[k - 1];
        let (l0, d0, _) = prev.dim();
        let pm = prev.to_owned().into_shape((l0 * d0, l)).expect("reshape");
        self.tensors[k - 1] = pm.dot(&rh).into_shape((l0, d0, kk)).expect("reshape");
        Ok(())
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &MatrixProductState) -> Result<C64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        if self.phys_dims() != other.phys_dims() {
            return Err(Error::InvalidArgument("physical dimensions differ".into()));
        }
        // contract in a canonical argument order so that swapping the
        // arguments conjugates the result bit for bit
        let ops: Vec<Option<Array2<C64>>> = vec![None; self.len()];
        if canonical_order(self, other) {
            Ok(transfer(self, other, &ops))
        } else {
            Ok(transfer(other, self, &ops).conj())
        }
    }

    pub fn norm(&self) -> f64 {
        let ops: Vec<Option<Array2<C64>>> = vec![None; self.len()];
        transfer(self, self, &ops).re.max(0.0).sqrt()
    }

    /// `<self| O_0 ⊗ O_1 ⊗ ... |self>` for per-site operators, `None`
    /// meaning identity.
    pub fn expectation_product(&self, ops: &[Option<Array2<C64>>]) -> Result<C64> {
        if ops.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: ops.len(),
            });
        }
        for (op, d) in ops.iter().zip(self.phys_dims()) {
            if let Some(o) = op {
                if o.dim() != (d, d) {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: o.shape()[0],
                    });
                }
            }
        }
        Ok(transfer(self, self, ops))
    }

    /// Returns `self ⊗ pad` with the pad as a new rightmost site.
    pub fn append_site(&self, pad: &[C64]) -> Result<Self> {
        let n = linalg::norm(pad);
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(n));
        }
        let mut tensors = self.tensors.clone();
        tensors.push(Array3::from_shape_vec((1, pad.len(), 1), pad.to_vec()).expect("shape"));
        Ok(Self {
            tensors,
            center: self.center,
        })
    }

    /// Schmidt coefficients across bond `bond` (between sites `bond-1` and
    /// `bond`).
    pub fn schmidt_values(&self, bond: usize) -> Result<Array1<f64>> {
        if bond == 0 || bond >= self.len() {
            return Ok(Array1::from(vec![1.0]));
        }
        let mut c = self.clone();
        c.canonicalize(bond)?;
        let t = &c.tensors[bond];
        let (l, d, r) = t.dim();
        let m = t.to_owned().into_shape((l, d * r)).expect("reshape");
        let (_, s, _) = svd(&m)?;
        Ok(s)
    }

    pub fn entanglement_entropy(&self, bond: usize) -> Result<f64> {
        let s = self.schmidt_values(bond)?;
        Ok(s.iter()
            .map(|x| x * x)
            .filter(|&p| p > 1e-300)
            .map(|p| -p * p.ln())
            .sum())
    }

    pub fn to_statevector(&self) -> Result<Vec<C64>> {
        let total = self.phys_dims().iter().fold(1usize, |p, &d| p.saturating_mul(d));
        if total > STATEVECTOR_CAP {
            return Err(Error::CapExceeded {
                qubits: (total as f64).log2().ceil() as usize,
                cap: 24,
            });
        }
        let mut acc = self.tensors[0].clone().into_dyn();
        for t in &self.tensors[1..] {
            let last = acc.ndim() - 1;
            acc = tensordot(&acc, &[last], &t.clone().into_dyn(), &[0]);
        }
        Ok(acc.iter().copied().collect())
    }

    /// Binary checkpoint, all integers and floats little-endian:
    /// `u64 n_sites`, `n_sites + 1` x `u64` bond dimensions, `n_sites` x
    /// `u64` physical dimensions, `u64` orthogonality center, then each
    /// tensor row-major over `(left, phys, right)` as `(re, im)` f64 pairs.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let put = |w: &mut W, x: u64| w.write_all(&x.to_le_bytes());
        put(&mut w, self.len() as u64)?;
        for b in self.bond_dims() {
            put(&mut w, b as u64)?;
        }
        for d in self.phys_dims() {
            put(&mut w, d as u64)?;
        }
        put(&mut w, self.center as u64)?;
        for t in &self.tensors {
            for x in t.iter() {
                w.write_all(&x.re.to_le_bytes())?;
                w.write_all(&x.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = [0u8; 8];
        let mut get = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut buf)?;
            Ok(u64::from_le_bytes(buf))
        };
        let n = get(&mut r)? as usize;
        if n == 0 || n > 1 << 20 {
            return Err(Error::Parse(format!("implausible site count {n}")));
        }
        let bonds = (0..=n).map(|_| get(&mut r).map(|x| x as usize)).collect::<Result<Vec<_>>>()?;
        let dims = (0..n).map(|_| get(&mut r).map(|x| x as usize)).collect::<Result<Vec<_>>>()?;
        let center = get(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(n);
        let mut fbuf = [0u8; 8];
        for k in 0..n {
            let shape = (bonds[k], dims[k], bonds[k + 1]);
            let count = shape.0 * shape.1 * shape.2;
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                r.read_exact(&mut fbuf)?;
                let re = f64::from_le_bytes(fbuf);
                r.read_exact(&mut fbuf)?;
                let im = f64::from_le_bytes(fbuf);
                data.push(C64::new(re, im));
            }
            tensors.push(Array3::from_shape_vec(shape, data).expect("shape"));
        }
        let mut mps = Self::from_tensors(tensors)?;
        if center >= n {
            return Err(Error::Parse(format!("center {center} outside {n} sites")));
        }
        mps.center = center;
        Ok(mps)
    }
}

/// Left-to-right transfer contraction of `<a| ops |b>`.
fn transfer(a: &MatrixProductState, b: &MatrixProductState, ops: &[Option<Array2<C64>>]) -> C64 {
    let mut env = ArrayD::from_elem(vec![1, 1], ONE);
    for k in 0..a.len() {
        let kb = b.tensors[k].clone().into_dyn();
        // env[bra, ket] . B[ket, s, r] -> [bra, s, r]
        let mut t = tensordot(&env, &[1], &kb, &[0]);
        if let Some(op) = &ops[k] {
            // [bra, s', r] with op[s, s'] -> [bra, r, s]
            t = tensordot(&t, &[1], &op.clone().into_dyn(), &[1]);
            t = super::tensor::permute(&t, &[0, 2, 1]);
        }
        let ka = a.tensors[k].mapv(|x| x.conj()).into_dyn();
        // conj(A)[bra, s, r'] with t[bra, s, r] -> [r', r]
        env = tensordot(&ka, &[0, 1], &t, &[0, 1]);
    }
    env.iter().copied().sum()
}

fn canonical_order(a: &MatrixProductState, b: &MatrixProductState) -> bool {
    let key = |m: &MatrixProductState| -> Vec<u64> {
        m.tensors
            .iter()
            .flat_map(|t| {
                t.shape()
                    .iter()
                    .map(|&x| x as u64)
                    .chain(t.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]))
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    key(a) <= key(b)
}

pub(crate) fn svd(m: &Array2<C64>) -> Result<(Array2<C64>, Array1<f64>, Array2<C64>)> {
    let (u, s, vt) = m.svddc(JobSvd::Some)?;
    Ok((u.expect("u requested"), s, vt.expect("vt requested")))
}

/// Thin QR with the diagonal of `R` made real nonnegative.
fn positive_qr(m: &Array2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let (mut q, mut r) = m.qr()?;
    let k = r.shape()[0].min(r.shape()[1]);
    for i in 0..k {
        let d = r[[i, i]];
        let nd = d.norm();
        if nd > 0.0 {
            let ph = d / nd;
            r.row_mut(i).mapv_inplace(|x| x * ph.conj());
            q.column_mut(i).mapv_inplace(|x| x * ph);
        }
    }
    Ok((q, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[C64], b: &[C64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn statevector_roundtrip() {
        let v = linalg::random_vector(64, 5);
        let mps = MatrixProductState::from_statevector(&v, &[4, 4, 4]).unwrap();
        let back = mps.to_statevector().unwrap();
        let ov = linalg::dot(&v, &back);
        assert!((ov.norm() - 1.0).abs() < 1e-12);
        assert!((mps.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let mut a = MatrixProductState::random(&[2, 2, 2, 2, 2], 3, 11).unwrap();
        a.canonicalize(2).unwrap();
        let mut b = a.clone();
        b.canonicalize(2).unwrap();
        for (x, y) in a.tensors().iter().zip(b.tensors()) {
            assert!(close(x.as_slice().unwrap(), y.as_slice().unwrap(), 1e-12));
        }
    }

    #[test]
    fn orthogonality_on_each_side() {
        let mut a = MatrixProductState::random(&[4, 4, 4, 4], 5, 3).unwrap();
        a.canonicalize(2).unwrap();
        for k in 0..2 {
            let t = a.tensor(k);
            let (l, d, r) = t.dim();
            let m = t.to_owned().into_shape((l * d, r)).unwrap();
            let g = m.t().mapv(|x| x.conj()).dot(&m);
            for i in 0..r {
                for j in 0..r {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((g[[i, j]] - C64::new(e, 0.0)).norm() < 1e-12);
                }
            }
        }
        let t = a.tensor(3);
        let (l, d, r) = t.dim();
        let m = t.to_owned().into_shape((l, d * r)).unwrap();
        let g = m.dot(&m.t().mapv(|x| x.conj()));
        for i in 0..l {
            assert!((g[[i, i]] - ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn overlap_is_conjugate_symmetric() {
        let a = MatrixProductState::random(&[2, 2, 2, 2], 2, 1).unwrap();
        let b = MatrixProductState::random(&[2, 2, 2, 2], 3, 2).unwrap();
        assert_eq!(a.overlap(&b).unwrap(), b.overlap(&a).unwrap().conj());
        let c = MatrixProductState::random(&[2, 2, 2], 2, 2).unwrap();
        assert!(a.overlap(&c).is_err());
    }

    #[test]
    fn append_and_checkpoint() {
        let a = MatrixProductState::random(&[4, 4, 4], 4, 9).unwrap();
        let pad = vec![C64::new(0.5, 0.0); 4];
        let b = a.append_site(&pad).unwrap();
        assert_eq!(b.bond_dims()[3], 1);
        assert!(b.entanglement_entropy(3).unwrap().abs() < 1e-12);
        assert!(a.append_site(&[ONE, ONE]).is_err());
        let mut bytes = Vec::new();
        b.write_checkpoint(&mut bytes).unwrap();
        let c = MatrixProductState::read_checkpoint(&bytes[..]).unwrap();
        assert_eq!(b, c);
        assert!(MatrixProductState::read_checkpoint(&bytes[..20]).is_err());
    }
}
