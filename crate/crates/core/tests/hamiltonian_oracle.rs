//! The qubit Hamiltonian against a Kronecker-product construction from
//! explicit fermion matrices, and dense energies against a Jacobi solver.

use ndarray::{s, Array2};
use num_complex::Complex64 as C64;
use siteprep::exact::{self, to_dense};
use siteprep::lattice::{build_hamiltonian, Boundary, ModelSpec};

const O: C64 = C64::new(0.0, 0.0);
const L: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    Array2::from_shape_fn((ra * rb, ca * cb), |(i, j)| a[[i / rb, j / cb]] * b[[i % rb, j % cb]])
}

fn m2(v: [[C64; 2]; 2]) -> Array2<C64> {
    Array2::from_shape_fn((2, 2), |(i, j)| v[i][j])
}

/// `c_k` on `n` modes: Z on earlier modes, `[[0,1],[0,0]]` on mode k.
fn annihilator(k: usize, n: usize) -> Array2<C64> {
    let z = m2([[L, O], [O, -L]]);
    let lower = m2([[O, L], [O, O]]);
    let id = Array2::<C64>::eye(2);
    (0..n).fold(Array2::eye(1), |acc, q| {
        let f = if q < k {
            &z
        } else if q == k {
            &lower
        } else {
            &id
        };
        kron(&acc, f)
    })
}

fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|x| x.conj())
}

/// `ψ̄ = ψ† γ0`; kinetic `ψ̄ (-i γ1) ∂ψ`, mass and Wilson terms `ψ̄ (m0 - r a/2 ∂²) ψ`,
/// interaction `-(g²/2a) (ψ̄ψ)²`.
fn kronecker_hamiltonian(spec: &ModelSpec) -> Array2<C64> {
    let nq = spec.n_qubits();
    let dim = 1 << nq;
    let c: Vec<Array2<C64>> = (0..nq).map(|k| annihilator(k, nq)).collect();
    let cd: Vec<Array2<C64>> = c.iter().map(adjoint).collect();
    let g0 = [[O, -I], [I, O]];
    let g1 = [[O, -I], [-I, O]];
    let mut kin = [[O; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            kin[a][b] = (0..2).map(|k| g0[a][k] * (-I) * g1[k][b]).sum();
        }
    }
    let a = spec.spacing;
    let n = spec.n_sites as isize;
    let site = |x: isize| -> Option<usize> {
        match spec.boundary {
            Boundary::Periodic => Some(x.rem_euclid(n) as usize),
            Boundary::Dirichlet => (0..n).contains(&x).then_some(x as usize),
        }
    };
    let mut h = Array2::<C64>::zeros((dim, dim));
    for x in 0..n {
        for f in 0..spec.flavors {
            for al in 0..2 {
                for be in 0..2 {
                    let i = spec.mode(x as usize, f, al);
                    let mut add = |coef: C64, y: usize| {
                        let j = spec.mode(y, f, be);
                        h.scaled_add(coef, &cd[i].dot(&c[j]));
                    };
                    if let Some(y) = site(x + 1) {
                        add(kin[al][be] / (2.0 * a), y);
                        add(-g0[al][be] * spec.wilson_r / (2.0 * a), y);
                    }
                    if let Some(y) = site(x - 1) {
                        add(-kin[al][be] / (2.0 * a), y);
                        add(-g0[al][be] * spec.wilson_r / (2.0 * a), y);
                    }
                    add(g0[al][be] * (spec.bare_mass + spec.wilson_r / a), x as usize);
                }
            }
        }
        let mut scalar = Array2::<C64>::zeros((dim, dim));
        for f in 0..spec.flavors {
            for al in 0..2 {
                for be in 0..2 {
                    let (i, j) = (spec.mode(x as usize, f, al), spec.mode(x as usize, f, be));
                    scalar.scaled_add(g0[al][be], &cd[i].dot(&c[j]));
                }
            }
        }
        h.scaled_add(C64::new(-spec.coupling_sq / (2.0 * a), 0.0), &scalar.dot(&scalar));
    }
    h
}

fn spec(n_sites: usize, flavors: usize, boundary: Boundary) -> ModelSpec {
    ModelSpec {
        n_sites,
        spacing: 0.1,
        bare_mass: 0.3,
        coupling_sq: 1.2,
        wilson_r: 0.8,
        flavors,
        boundary,
    }
}

#[test]
fn pauli_hamiltonian_matches_kronecker_construction() {
    for s in [
        spec(2, 1, Boundary::Dirichlet),
        spec(3, 1, Boundary::Dirichlet),
        spec(3, 1, Boundary::Periodic),
        spec(2, 2, Boundary::Dirichlet),
    ] {
        let got = to_dense(&build_hamiltonian(&s).unwrap()).unwrap();
        let want = kronecker_hamiltonian(&s);
        let diff = (&got - &want).mapv(|x| x.norm()).fold(0f64, |m, &x| m.max(x));
        assert!(diff < 1e-10, "{s:?}: max entry difference {diff}");
    }
}

/// Cyclic Jacobi sweeps on a real symmetric matrix.
fn jacobi_eigenvalues(mut a: Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[[i, j]].powi(2)).sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let (c, s) = (1.0 / (t * t + 1.0).sqrt(), t / (t * t + 1.0).sqrt());
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut d: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    d.sort_by(f64::total_cmp);
    d
}

#[test]
fn dense_ground_energy_matches_jacobi() {
    for s in [spec(2, 1, Boundary::Dirichlet), spec(2, 1, Boundary::Periodic)] {
        let op = build_hamiltonian(&s).unwrap();
        let h = to_dense(&op).unwrap();
        let d = h.nrows();
        // real embedding [[Re, -Im], [Im, Re]] doubles every eigenvalue
        let mut real = Array2::<f64>::zeros((2 * d, 2 * d));
        real.slice_mut(s![..d, ..d]).assign(&h.mapv(|x| x.re));
        real.slice_mut(s![d.., d..]).assign(&h.mapv(|x| x.re));
        real.slice_mut(s![..d, d..]).assign(&h.mapv(|x| -x.im));
        real.slice_mut(s![d.., ..d]).assign(&h.mapv(|x| x.im));
        let levels = jacobi_eigenvalues(real);
        let res = exact::ground_state_dense(&op).unwrap();
        assert!((levels[0] - res.ground_energy).abs() < 1e-9 * res.ground_energy.abs());
        assert!((levels[1] - levels[0]).abs() < 1e-9 * res.ground_energy.abs());
        let first_excited = levels[2];
        assert!((first_excited - res.first_excited_energy).abs() < 1e-8 * res.ground_energy.abs());
    }
}
