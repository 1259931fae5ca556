use ndarray::{s, Array2, Array3, ArrayD, Axis};
use serde::{Deserialize, Serialize};

use super::mpo::{apply_two_site, left_env_step, right_env_step, unit_env, MatrixProductOperator};
use super::state::{svd, MatrixProductState};
use super::tensor::{reshape, tensordot};
use crate::error::{Error, Result};
use crate::linalg::{self, LanczosOptions, LinearOperator, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmrgConfig {
    pub epsilon_goal: f64,
    pub max_bond: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    /// Discarded-weight threshold of each two-site truncation.
    pub cutoff: f64,
    pub initial_bond: usize,
    pub krylov_dim: usize,
    pub lanczos_restarts: usize,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self {
            epsilon_goal: 1e-8,
            max_bond: 64,
            seed: 0,
            max_sweeps: 40,
            cutoff: 1e-12,
            initial_bond: 2,
            krylov_dim: 24,
            lanczos_restarts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmrgReport {
    pub energy: f64,
    pub epsilon: f64,
    pub sweeps: usize,
    pub max_bond: usize,
    pub converged: bool,
    /// Energy after each full sweep.
    pub sweep_energies: Vec<f64>,
}

impl DmrgReport {
    pub const CSV_HEADER: &'static str = "n_sites,energy,epsilon,sweeps,max_bond";

    pub fn csv_row(&self, n_sites: usize) -> String {
        format!(
            "{n_sites},{:.15e},{:.6e},{},{}",
            self.energy, self.epsilon, self.sweeps, self.max_bond
        )
    }
}

/// Relative energy variance `(<H^2> - <H>^2) / <H>^2` of a normalized state.
pub fn epsilon_measure(state: &MatrixProductState, mpo: &MatrixProductOperator) -> Result<f64> {
    Ok(energy_and_epsilon(state, mpo)?.1)
}

pub(crate) fn energy_and_epsilon(state: &MatrixProductState, mpo: &MatrixProductOperator) -> Result<(f64, f64)> {
    let nrm = state.norm();
    if (nrm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(nrm));
    }
    let h = mpo.expectation(state)?.re;
    if h.abs() < 1e-12 {
        return Err(Error::VanishingEnergy(h));
    }
    let h2 = mpo.expectation_sq(state)?.re;
    Ok((h, ((h2.abs() - h * h) / (h * h)).max(0.0)))
}

pub fn dmrg_ground_state(
    mpo: &MatrixProductOperator,
    epsilon_goal: f64,
    max_bond: usize,
    seed: u64,
) -> Result<(MatrixProductState, DmrgReport)> {
    dmrg_with(
        mpo,
        &DmrgConfig {
            epsilon_goal,
            max_bond,
            seed,
            ..DmrgConfig::default()
        },
    )
}

/// Two-site DMRG. Each full sweep runs left-to-right then right-to-left;
/// afterwards the exact energy and variance measure are evaluated and the
/// run stops once the measure drops below the goal, or once the bond cap is
/// saturated and the energy has stalled.
pub fn dmrg_with(mpo: &MatrixProductOperator, cfg: &DmrgConfig) -> Result<(MatrixProductState, DmrgReport)> {
    if !(cfg.epsilon_goal > 0.0) {
        return Err(Error::InvalidArgument("epsilon_goal must be positive".into()));
    }
    if cfg.max_bond < 2 {
        return Err(Error::InvalidArgument("max_bond must be at least 2".into()));
    }
    let n = mpo.len();
    if n < 2 {
        return Err(Error::InvalidArgument("DMRG needs at least two sites".into()));
    }
    let dims = mpo.phys_dims();
    let mut state = MatrixProductState::random(&dims, cfg.initial_bond.min(cfg.max_bond), cfg.seed)?;
    let ws: Vec<ArrayD<C64>> = (0..n).map(|k| mpo.tensor(k).clone().into_dyn()).collect();

    let mut left: Vec<ArrayD<C64>> = vec![unit_env(3); n + 1];
    let mut right: Vec<ArrayD<C64>> = vec![unit_env(3); n + 1];
    for k in (1..n).rev() {
        right[k] = right_env_step(&right[k + 1], state.tensor(k), mpo.tensor(k));
    }

    let mut sweep_energies = Vec::new();
    let mut previous = f64::INFINITY;
    let mut epsilon = f64::INFINITY;
    let mut energy = f64::NAN;
    let mut converged = false;

    for sweep in 1..=cfg.max_sweeps {
        for k in 0..n - 1 {
            let theta = local_ground(&state, k, &left[k], &ws[k], &ws[k + 1], &right[k + 2], cfg)?;
            let (a, b) = split(theta, cfg, true)?;
            state.set_tensor(k, a);
            state.set_tensor(k + 1, b);
            left[k + 1] = left_env_step(&left[k], state.tensor(k), mpo.tensor(k));
        }
        for k in (0..n - 1).rev() {
            let theta = local_ground(&state, k, &left[k], &ws[k], &ws[k + 1], &right[k + 2], cfg)?;
            let (a, b) = split(theta, cfg, false)?;
            state.set_tensor(k, a);
            state.set_tensor(k + 1, b);
            right[k + 1] = right_env_step(&right[k + 2], state.tensor(k + 1), mpo.tensor(k + 1));
        }
        state.set_center(0);

        let (e, eps) = energy_and_epsilon(&state, mpo)?;
        energy = e;
        epsilon = eps;
        sweep_energies.push(e);
        let slack = 1e-9 * e.abs() + 1e-12;
        if e > previous + slack {
            return Err(Error::EnergyIncrease { before: previous, after: e });
        }
        let saturated = state.max_bond() >= cfg.max_bond;
        let stalled = (previous - e).abs() <= 1e-13 * e.abs();
        if epsilon < cfg.epsilon_goal || (saturated && stalled) {
            converged = true;
            let report = DmrgReport {
                energy,
                epsilon,
                sweeps: sweep,
                max_bond: state.max_bond(),
                converged,
                sweep_energies,
            };
            return Ok((state, report));
        }
        previous = e;
    }
    let report = DmrgReport {
        energy,
        epsilon,
        sweeps: cfg.max_sweeps,
        max_bond: state.max_bond(),
        converged,
        sweep_energies,
    };
    Ok((state, report))
}

fn local_ground(
    state: &MatrixProductState,
    k: usize,
    left: &ArrayD<C64>,
    w1: &ArrayD<C64>,
    w2: &ArrayD<C64>,
    right: &ArrayD<C64>,
    cfg: &DmrgConfig,
) -> Result<ArrayD<C64>> {
    let a = state.tensor(k).clone().into_dyn();
    let b = state.tensor(k + 1).clone().into_dyn();
    let theta = tensordot(&a, &[2], &b, &[0]);
    let shape = theta.shape().to_vec();
    let dim = theta.len();
    let op = (dim, |x: &[C64], y: &mut [C64]| {
        let t = ArrayD::from_shape_vec(shape.clone(), x.to_vec()).expect("block shape");
        let ht = apply_two_site(left, w1, w2, right, &t);
        for (yi, v) in y.iter_mut().zip(ht.iter()) {
            *yi = *v;
        }
    });
    let mut start: Vec<C64> = theta.iter().copied().collect();
    if linalg::normalize(&mut start) == 0.0 {
        start = linalg::random_vector(dim, cfg.seed);
    }
    let mut h_start = vec![C64::new(0.0, 0.0); dim];
    op.apply(&start, &mut h_start);
    let scale = linalg::dot(&start, &h_start).re.abs().max(1.0);
    let opts = LanczosOptions {
        tol: 1e-8 * scale,
        krylov_dim: cfg.krylov_dim,
        max_restarts: cfg.lanczos_restarts,
    };
    let r = linalg::lanczos_best(&op, start, opts)?;
    Ok(ArrayD::from_shape_vec(shape, r.vector).expect("block shape"))
}

/// Splits a two-site block by truncated SVD. Moving right the singular
/// values go into the right tensor; moving left into the left one.
fn split(theta: ArrayD<C64>, cfg: &DmrgConfig, moving_right: bool) -> Result<(Array3<C64>, Array3<C64>)> {
    let sh = theta.shape().to_vec();
    let (l, d1, d2, r) = (sh[0], sh[1], sh[2], sh[3]);
    let m = reshape(theta, &[l * d1, d2 * r])
        .into_dimensionality::<ndarray::Ix2>()
        .expect("matrix");
    let (u, sv, vt) = svd(&m)?;
    let total: f64 = sv.iter().map(|x| x * x).sum();
    let mut keep = sv.len();
    let mut discarded = 0.0;
    while keep > 1 {
        let w = sv[keep - 1] * sv[keep - 1];
        if discarded + w > cfg.cutoff * total {
            break;
        }
        discarded += w;
        keep -= 1;
    }
    keep = keep.min(cfg.max_bond);
    let kept: f64 = sv.iter().take(keep).map(|x| x * x).sum::<f64>().sqrt();
    let u = u.slice(s![.., ..keep]).to_owned();
    let mut vt = vt.slice(s![..keep, ..]).to_owned();
    let sv: Vec<f64> = sv.iter().take(keep).map(|x| x / kept).collect();
    if moving_right {
        for (mut row, &x) in vt.axis_iter_mut(Axis(0)).zip(&sv) {
            row.mapv_inplace(|v| v * x);
        }
        Ok((to3(u, l, d1, keep), to3(vt, keep, d2, r)))
    } else {
        let mut u = u;
        for (mut col, &x) in u.axis_iter_mut(Axis(1)).zip(&sv) {
            col.mapv_inplace(|v| v * x);
        }
        Ok((to3(u, l, d1, keep), to3(vt, keep, d2, r)))
    }
}

fn to3(m: Array2<C64>, a: usize, b: usize, c: usize) -> Array3<C64> {
    m.as_standard_layout()
        .into_owned()
        .into_shape((a, b, c))
        .expect("reshape")
}
