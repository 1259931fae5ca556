//! Small dense-vector helpers and a restarted Lanczos solver shared by the
//! exact solver and the DMRG local updates.

use ndarray::{Array1, Array2, ArrayView1, ShapeBuilder};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(a: &mut [C64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// `y += alpha * x`
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Rotates `v` so that its first non-negligible amplitude is real positive.
pub fn fix_phase(v: &mut [C64]) {
    let scale = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    if let Some(first) = v.iter().find(|x| x.norm() > 1e-8 * scale).copied() {
        let phase = first.conj() / first.norm();
        v.iter_mut().for_each(|x| *x *= phase);
    }
}

pub fn fix_phase_view(v: &mut Array1<C64>) {
    fix_phase(v.as_slice_mut().expect("contiguous vector"));
}

pub fn random_vector(dim: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> = (0..dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im)
        })
        .collect();
    normalize(&mut v);
    v
}

/// Hermitian matrix-vector products.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

impl<F: Fn(&[C64], &mut [C64])> LinearOperator for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        (self.1)(x, y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub tol: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            krylov_dim: 60,
            max_restarts: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub value: f64,
    pub vector: Vec<C64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Lowest eigenpair of a Hermitian operator by restarted Lanczos with full
/// reorthogonalization. Each restart continues from the current Ritz
/// vector; convergence is declared on the explicit residual
/// `||A v - theta v|| <= tol`.
pub fn lanczos_lowest<A: LinearOperator + ?Sized>(
    op: &A,
    start: Vec<C64>,
    opts: LanczosOptions,
) -> Result<LanczosResult> {
    let r = lanczos_best(op, start, opts)?;
    if r.converged {
        Ok(r)
    } else {
        Err(Error::NoConvergence {
            iterations: r.iterations,
            residual: r.residual,
        })
    }
}

/// Same iteration as [`lanczos_lowest`] but returns the last Ritz pair even
/// when the residual target was not met.
pub fn lanczos_best<A: LinearOperator + ?Sized>(
    op: &A,
    start: Vec<C64>,
    opts: LanczosOptions,
) -> Result<LanczosResult> {
    let dim = op.dim();
    let mut v0 = start;
    if normalize(&mut v0) == 0.0 {
        return Err(Error::InvalidArgument("Lanczos start vector is zero".into()));
    }
    let krylov = opts.krylov_dim.min(dim).max(1);
    let mut iterations = 0;
    let mut w = vec![C64::new(0.0, 0.0); dim];

    let restarts = opts.max_restarts.max(1);
    for restart in 0..restarts {
        let mut basis: Vec<Vec<C64>> = vec![v0.clone()];
        let mut alphas: Vec<f64> = Vec::with_capacity(krylov);
        let mut betas: Vec<f64> = Vec::with_capacity(krylov);
        for j in 0..krylov {
            op.apply(&basis[j], &mut w);
            iterations += 1;
            let alpha = dot(&basis[j], &w).re;
            alphas.push(alpha);
            // two passes of classical Gram-Schmidt
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &w);
                    axpy(-c, b, &mut w);
                }
            }
            let beta = norm(&w);
            if j + 1 == krylov || beta < 1e-14 * alpha.abs().max(1.0) {
                break;
            }
            betas.push(beta);
            basis.push(w.iter().map(|x| x / beta).collect());
        }

        let m = alphas.len();
        let mut t = Array2::<f64>::zeros((m, m));
        for i in 0..m {
            t[[i, i]] = alphas[i];
            if i + 1 < m {
                t[[i, i + 1]] = betas[i];
                t[[i + 1, i]] = betas[i];
            }
        }
        let (_, vecs) = t.eigh(UPLO::Lower)?;
        let mut ritz = vec![C64::new(0.0, 0.0); dim];
        for (k, b) in basis.iter().take(m).enumerate() {
            axpy(C64::new(vecs[[k, 0]], 0.0), b, &mut ritz);
        }
        normalize(&mut ritz);
        op.apply(&ritz, &mut w);
        iterations += 1;
        let rayleigh = dot(&ritz, &w).re;
        axpy(C64::new(-rayleigh, 0.0), &ritz, &mut w);
        let residual = norm(&w);
        let converged = residual <= opts.tol || m == dim;
        if converged || restart + 1 == restarts {
            return Ok(LanczosResult {
                value: rayleigh,
                vector: ritz,
                residual,
                iterations,
                converged,
            });
        }
        v0 = ritz;
    }
    unreachable!("loop returns on its final restart")
}

/// Eigenpairs of a Hermitian matrix, values ascending and eigenvectors in
/// columns. The input is copied to column-major order first: for row-major
/// input LAPACK would see the transpose, whose eigenvectors are the complex
/// conjugates.
pub fn eigh(matrix: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let mut f = Array2::zeros(matrix.raw_dim().f());
    f.assign(matrix);
    Ok(f.eigh(UPLO::Lower)?)
}

/// Expectation `<v|A|v>` for a dense Hermitian matrix.
pub fn expectation_dense(a: &Array2<C64>, v: ArrayView1<C64>) -> f64 {
    let av = a.dot(&v);
    v.iter().zip(av.iter()).map(|(x, y)| x.conj() * y).sum::<C64>().re
}
