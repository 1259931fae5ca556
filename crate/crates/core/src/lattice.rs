//! Discretized massive Gross-Neveu Hamiltonian with Wilson fermions.
//!
//! Lattice fermion operators are dimensionless, `psi(x) = c_x / sqrt(a)`,
//! and every term carries its explicit factor of the spacing `a`. Each site
//! holds `2 * flavors` fermionic modes, ordered site-major:
//! `mode = site * 2 * flavors + 2 * flavor + spinor`, and the Jordan-Wigner
//! map sends mode `k` to qubit `k`.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum, PauliSumOperator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Periodic,
}

/// Lattice and coupling parameters of one Hamiltonian instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n_sites: usize,
    pub spacing: f64,
    pub bare_mass: f64,
    pub coupling_sq: f64,
    pub wilson_r: f64,
    pub flavors: usize,
    pub boundary: Boundary,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_sites must be at least 2, got {}",
                self.n_sites
            )));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "spacing must be positive, got {}",
                self.spacing
            )));
        }
        if !(self.wilson_r > 0.0 && self.wilson_r <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "wilson_r must lie in (0, 1], got {}",
                self.wilson_r
            )));
        }
        if self.coupling_sq < 0.0 {
            return Err(Error::InvalidArgument("coupling_sq must be nonnegative".into()));
        }
        if self.flavors == 0 {
            return Err(Error::InvalidArgument("flavors must be positive".into()));
        }
        Ok(())
    }

    pub fn with_sites(&self, n_sites: usize) -> Self {
        Self { n_sites, ..*self }
    }

    pub fn qubits_per_site(&self) -> usize {
        2 * self.flavors
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits_per_site() * self.n_sites
    }

    /// Physical dimension of one grouped site, `4^flavors`.
    pub fn site_dim(&self) -> usize {
        1 << self.qubits_per_site()
    }

    pub fn mode(&self, site: usize, flavor: usize, spinor: usize) -> usize {
        site * self.qubits_per_site() + 2 * flavor + spinor
    }

    /// System length `N * a`.
    pub fn length(&self) -> f64 {
        self.n_sites as f64 * self.spacing
    }

    fn neighbor(&self, site: usize, step: isize) -> Option<usize> {
        let n = self.n_sites as isize;
        let y = site as isize + step;
        match self.boundary {
            Boundary::Periodic => Some(y.rem_euclid(n) as usize),
            Boundary::Dirichlet => (0..n).contains(&y).then_some(y as usize),
        }
    }
}

/// Majorana representation of the two-dimensional gamma matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaRep {
    pub gamma0: [[Complex64; 2]; 2],
    pub gamma1: [[Complex64; 2]; 2],
}

impl GammaRep {
    /// `gamma0 = i [[0, -1], [1, 0]]`, `gamma1 = -i [[0, 1], [1, 0]]`.
    pub fn majorana() -> Self {
        Self {
            gamma0: [[ZERO, -I], [I, ZERO]],
            gamma1: [[ZERO, -I], [-I, ZERO]],
        }
    }

    /// `gamma0 * (-i gamma1)`, the spinor matrix of the hopping term.
    pub fn hopping(&self) -> [[Complex64; 2]; 2] {
        let mut m = [[ZERO; 2]; 2];
        for (a, row) in m.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = (0..2)
                    .map(|k| self.gamma0[a][k] * (-I) * self.gamma1[k][b])
                    .sum();
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Create,
    Annihilate,
}

/// Jordan-Wigner image of `c_k` or `c_k^dagger`: `Z` on modes below `k`
/// and `(X + iY)/2` (annihilate) or `(X - iY)/2` (create) on mode `k`.
pub fn jordan_wigner(mode_index: usize, kind: Ladder, n_modes: usize) -> Result<PauliSum> {
    if mode_index >= n_modes {
        return Err(Error::InvalidArgument(format!(
            "mode {mode_index} out of range for {n_modes} modes"
        )));
    }
    let zs = (0..mode_index).map(|q| (q, Pauli::Z));
    let x = PauliString::from_ops(n_modes, zs.clone().chain([(mode_index, Pauli::X)]));
    let y = PauliString::from_ops(n_modes, zs.chain([(mode_index, Pauli::Y)]));
    let y_coeff = match kind {
        Ladder::Annihilate => Complex64::new(0.0, 0.5),
        Ladder::Create => Complex64::new(0.0, -0.5),
    };
    let mut s = PauliSum::zero(n_modes);
    s.add_term(Complex64::new(0.5, 0.0), x);
    s.add_term(y_coeff, y);
    Ok(s)
}

struct Modes {
    create: Vec<PauliSum>,
    annihilate: Vec<PauliSum>,
}

impl Modes {
    fn new(n: usize) -> Result<Self> {
        let annihilate = (0..n)
            .map(|k| jordan_wigner(k, Ladder::Annihilate, n))
            .collect::<Result<Vec<_>>>()?;
        let create = annihilate.iter().map(PauliSum::adjoint).collect();
        Ok(Self { create, annihilate })
    }

    /// `coeff * c_i^dagger c_j`
    fn bilinear(&self, coeff: Complex64, i: usize, j: usize) -> PauliSum {
        self.create[i].mul(&self.annihilate[j]).scale(coeff)
    }
}

/// `H = H0 + Hg + HW` mapped to qubits.
pub fn build_hamiltonian(spec: &ModelSpec) -> Result<PauliSumOperator> {
    spec.validate()?;
    let n = spec.n_qubits();
    let modes = Modes::new(n)?;
    let gamma = GammaRep::majorana();
    let hop = gamma.hopping();
    let a = spec.spacing;
    let mut h = PauliSum::zero(n);

    for x in 0..spec.n_sites {
        for f in 0..spec.flavors {
            for al in 0..2 {
                for be in 0..2 {
                    let i = spec.mode(x, f, al);
                    // kinetic: symmetric difference (psi(x+a) - psi(x-a)) / 2a
                    for (step, sign) in [(1isize, 1.0), (-1, -1.0)] {
                        if let Some(y) = spec.neighbor(x, step) {
                            let c = hop[al][be] * (sign / (2.0 * a));
                            if c != ZERO {
                                h += modes.bilinear(c, i, spec.mode(y, f, be));
                            }
                        }
                    }
                    let g0 = gamma.gamma0[al][be];
                    if g0 == ZERO {
                        continue;
                    }
                    // mass plus the on-site part of the Wilson Laplacian
                    let onsite = g0 * (spec.bare_mass + spec.wilson_r / a);
                    h += modes.bilinear(onsite, i, spec.mode(x, f, be));
                    for step in [1isize, -1] {
                        if let Some(y) = spec.neighbor(x, step) {
                            let c = g0 * (-spec.wilson_r / (2.0 * a));
                            h += modes.bilinear(c, i, spec.mode(y, f, be));
                        }
                    }
                }
            }
        }

        if spec.coupling_sq != 0.0 {
            let mut scalar = PauliSum::zero(n);
            for f in 0..spec.flavors {
                for al in 0..2 {
                    for be in 0..2 {
                        let g0 = gamma.gamma0[al][be];
                        if g0 != ZERO {
                            scalar += modes.bilinear(g0, spec.mode(x, f, al), spec.mode(x, f, be));
                        }
                    }
                }
            }
            let coeff = Complex64::new(-spec.coupling_sq / (2.0 * a), 0.0);
            h += scalar.mul(&scalar).scale(coeff);
        }
    }
    h.to_hermitian(1e-12)
}

/// Continuum-normalized free Wilson dispersion
/// `sqrt((m0 + (2r/a) sin^2(|p| a / 2))^2 + sin^2(|p| a) / a^2)`.
pub fn free_dispersion(spec: &ModelSpec, momentum: f64) -> f64 {
    let a = spec.spacing;
    let p = momentum.abs();
    let s = (p * a / 2.0).sin();
    let mass = spec.bare_mass + 2.0 * spec.wilson_r / a * s * s;
    let kinetic = (p * a).sin() / a;
    (mass * mass + kinetic * kinetic).sqrt()
}

/// Allowed momenta `2 pi k / (N a)`, `k = 0..N`, of a periodic chain.
pub fn periodic_momenta(spec: &ModelSpec) -> Vec<f64> {
    let l = spec.length();
    (0..spec.n_sites)
        .map(|k| 2.0 * PI * k as f64 / l)
        .collect()
}

/// Hermitian single-particle matrix `h_ij` of a number-conserving
/// quadratic operator, `H = sum_ij h_ij c_i^dagger c_j + const`, read off
/// from the vacuum and one-particle basis states.
pub fn single_particle_matrix(op: &PauliSumOperator) -> Result<Array2<Complex64>> {
    let n = op.n_qubits();
    if n > 64 {
        return Err(Error::CapExceeded { qubits: n, cap: 64 });
    }
    let basis = |k: Option<usize>| k.map_or(0u64, |k| 1u64 << (n - 1 - k));
    let vacuum_energy = apply_to_basis(op, 0)
        .get(&0)
        .copied()
        .unwrap_or(ZERO)
        .re;
    let mut h = Array2::zeros((n, n));
    for j in 0..n {
        let image = apply_to_basis(op, basis(Some(j)));
        for i in 0..n {
            let amp = image.get(&basis(Some(i))).copied().unwrap_or(ZERO);
            h[[i, j]] = amp;
        }
        h[[j, j]] -= vacuum_energy;
    }
    Ok(h)
}

/// `op |b>` for a single computational basis state, as a sparse map.
pub fn apply_to_basis(op: &PauliSumOperator, b: u64) -> BTreeMap<u64, Complex64> {
    let mut out = BTreeMap::new();
    for (c, s) in op.terms() {
        let (x, z, y) = s.masks();
        let sign = if (b & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        let phase = I.powu(y) * (c * sign);
        *out.entry(b ^ x).or_insert(ZERO) += phase;
    }
    out
}

/// Deterministic growth order of a `D`-dimensional lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteOrder {
    pub dims: Vec<usize>,
    pub order: Vec<Vec<usize>>,
}

/// Shell-by-shell growth: shell `k` holds the points whose largest
/// coordinate is `k`, and points inside a shell are visited row-major with
/// the last coordinate most significant. In one dimension this is
/// left-to-right.
pub fn site_order(dims: &[usize]) -> Result<SiteOrder> {
    if dims.is_empty() {
        return Err(Error::InvalidArgument("site_order needs at least one dimension".into()));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument("every dimension must be at least 1".into()));
    }
    let total: usize = dims.iter().product();
    let mut points: Vec<Vec<usize>> = (0..total)
        .map(|mut idx| {
            dims.iter()
                .map(|&d| {
                    let c = idx % d;
                    idx /= d;
                    c
                })
                .collect()
        })
        .collect();
    points.sort_by(|p, q| {
        let shell = |v: &Vec<usize>| *v.iter().max().unwrap();
        shell(p)
            .cmp(&shell(q))
            .then_with(|| p.iter().rev().cmp(q.iter().rev()))
    });
    Ok(SiteOrder {
        dims: dims.to_vec(),
        order: points,
    })
}

impl SiteOrder {
    /// True when the first `len` points form one nearest-neighbor cluster.
    pub fn prefix_connected(&self, len: usize) -> bool {
        let prefix = &self.order[..len];
        if prefix.is_empty() {
            return true;
        }
        let mut seen = vec![false; len];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for (j, q) in prefix.iter().enumerate() {
                if !seen[j] && manhattan(&prefix[i], q) == 1 {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Side lengths of the bounding box of the first `len` points.
    pub fn prefix_bounding_box(&self, len: usize) -> Vec<usize> {
        (0..self.dims.len())
            .map(|d| {
                let coords = self.order[..len].iter().map(|p| p[d]);
                let lo = coords.clone().min().unwrap_or(0);
                let hi = coords.max().unwrap_or(0);
                hi - lo + 1
            })
            .collect()
    }
}

fn manhattan(p: &[usize], q: &[usize]) -> usize {
    p.iter().zip(q).map(|(a, b)| a.abs_diff(*b)).sum()
}

/// Proportionality constant in `a = k * precision / momentum`.
pub const SPACING_CONSTANT: f64 = 1.0;

pub fn lattice_spacing_for(precision: f64, momentum_scale: f64) -> Result<f64> {
    lattice_spacing_with(precision, momentum_scale, SPACING_CONSTANT)
}

pub fn lattice_spacing_with(precision: f64, momentum_scale: f64, k: f64) -> Result<f64> {
    if !(precision > 0.0 && momentum_scale > 0.0 && k > 0.0) {
        return Err(Error::InvalidArgument(
            "precision, momentum scale and k must all be positive".into(),
        ));
    }
    Ok(k * precision / momentum_scale)
}

/// The two parameter points used throughout the numerical study.
pub const REFERENCE_POINTS: [(f64, f64); 2] = [(0.2, 1.5), (0.4, 1.0)];

pub fn reference_spec(n_sites: usize, spacing: f64, bare_mass: f64, coupling_sq: f64) -> ModelSpec {
    ModelSpec {
        n_sites,
        spacing,
        bare_mass,
        coupling_sq,
        wilson_r: 1.0,
        flavors: 1,
        boundary: Boundary::Dirichlet,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_mul(a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
        let mut m = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        m
    }

    #[test]
    fn gamma_matrices_obey_clifford_algebra() {
        let g = GammaRep::majorana();
        let g00 = mat_mul(g.gamma0, g.gamma0);
        let g11 = mat_mul(g.gamma1, g.gamma1);
        let a = mat_mul(g.gamma0, g.gamma1);
        let b = mat_mul(g.gamma1, g.gamma0);
        for i in 0..2 {
            for j in 0..2 {
                let delta = if i == j { Complex64::new(1.0, 0.0) } else { ZERO };
                assert_eq!(g00[i][j], delta);
                assert_eq!(g11[i][j], -delta);
                assert_eq!(a[i][j] + b[i][j], ZERO);
            }
        }
    }

    #[test]
    fn jordan_wigner_first_mode() {
        let c = jordan_wigner(0, Ladder::Create, 2).unwrap();
        let terms: Vec<_> = c.terms().map(|(s, v)| (s.to_string(), *v)).collect();
        assert_eq!(
            terms,
            vec![
                ("XI".to_string(), Complex64::new(0.5, 0.0)),
                ("YI".to_string(), Complex64::new(0.0, -0.5)),
            ]
        );
    }

    #[test]
    fn number_operator() {
        for k in 0..4 {
            let cd = jordan_wigner(k, Ladder::Create, 4).unwrap();
            let c = jordan_wigner(k, Ladder::Annihilate, 4).unwrap();
            let n = cd.mul(&c).to_hermitian(1e-15).unwrap();
            let expected = PauliSumOperator::from_terms(
                4,
                vec![
                    (0.5, PauliString::identity(4)),
                    (-0.5, PauliString::from_ops(4, [(k, Pauli::Z)])),
                ],
            )
            .unwrap();
            assert_eq!(n, expected);
        }
    }

    #[test]
    fn mode_out_of_range() {
        assert!(jordan_wigner(3, Ladder::Create, 3).is_err());
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut spec = reference_spec(4, 0.25, 0.2, 1.5);
        spec.n_sites = 1;
        assert!(build_hamiltonian(&spec).is_err());
        let mut spec = reference_spec(4, 0.25, 0.2, 1.5);
        spec.spacing = 0.0;
        assert!(build_hamiltonian(&spec).is_err());
        let mut spec = reference_spec(4, 0.25, 0.2, 1.5);
        spec.wilson_r = 1.5;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn two_site_hamiltonian_is_local() {
        for &(m0, g2) in &REFERENCE_POINTS {
            let h = build_hamiltonian(&reference_spec(2, 0.5, m0, g2)).unwrap();
            assert_eq!(h.n_qubits(), 4);
            assert!(h.terms().iter().all(|(_, s)| s.weight() <= 4));
        }
    }

    #[test]
    fn dispersion_at_rest_is_bare_mass() {
        let spec = ModelSpec {
            coupling_sq: 0.0,
            ..reference_spec(50, 1.0 / 50.0, 1.0, 0.0)
        };
        assert_eq!(free_dispersion(&spec, 0.0), 1.0);
        let spec = ModelSpec { bare_mass: 0.37, ..spec };
        assert!((free_dispersion(&spec, 0.0) - 0.37).abs() < 1e-15);
    }

    #[test]
    fn wilson_term_lifts_doubler() {
        let a = 0.1;
        let base = ModelSpec {
            wilson_r: 1.0,
            ..reference_spec(10, a, 1.0, 0.0)
        };
        let p = PI / a;
        assert!((free_dispersion(&base, p) - (1.0 + 2.0 / a)).abs() < 1e-9);
        let tiny = ModelSpec { wilson_r: 1e-9, ..base };
        assert!((free_dispersion(&tiny, p) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn one_dimensional_order_is_linear() {
        let o = site_order(&[5]).unwrap();
        let flat: Vec<usize> = o.order.iter().map(|p| p[0]).collect();
        assert_eq!(flat, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn two_by_two_order() {
        let o = site_order(&[2, 2]).unwrap();
        assert_eq!(o.order, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]);
    }

    #[test]
    fn square_prefixes_stay_near_cubic_and_connected() {
        for dims in [vec![3, 3], vec![4, 4], vec![3, 3, 3]] {
            let o = site_order(&dims).unwrap();
            for len in 1..=o.order.len() {
                let bb = o.prefix_bounding_box(len);
                let (lo, hi) = (bb.iter().min().unwrap(), bb.iter().max().unwrap());
                assert!(hi - lo <= 1, "{dims:?} prefix {len}: {bb:?}");
                assert!(o.prefix_connected(len));
            }
        }
    }

    #[test]
    fn site_order_errors() {
        assert!(site_order(&[]).is_err());
        assert!(site_order(&[3, 0]).is_err());
    }

    #[test]
    fn spacing_helper() {
        assert!((lattice_spacing_for(0.1, 1.0).unwrap() - 0.1).abs() < 1e-15);
        assert!((lattice_spacing_for(0.1, 2.0).unwrap() - 0.05).abs() < 1e-15);
        let a = lattice_spacing_for(0.1, 3.0).unwrap();
        let b = lattice_spacing_for(0.05, 3.0).unwrap();
        assert!((a / b - 2.0).abs() < 1e-14);
        assert!(lattice_spacing_for(0.0, 1.0).is_err());
        assert!(lattice_spacing_for(0.1, -1.0).is_err());
    }

    #[test]
    fn spec_toml_section_is_strict() {
        let text = "n_sites = 4\nspacing = 0.25\nbare_mass = 0.2\ncoupling_sq = 1.5\nwilson_r = 1.0\nflavors = 1\nboundary = \"dirichlet\"\n";
        let spec: ModelSpec = toml::from_str(text).unwrap();
        assert_eq!(spec, reference_spec(4, 0.25, 0.2, 1.5));
        assert!(toml::from_str::<ModelSpec>(&format!("{text}colour = 1\n")).is_err());
    }
}
