use ndarray::{Array1, Array2};
use ndarray_linalg::{LeastSquaresSvd, Solve};
use serde::{Deserialize, Serialize};

use super::bessel::{k0, k1};
use super::correlator::CorrelatorSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when every relative parameter step falls below this.
    pub step_tol: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            step_tol: 1e-13,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    pub cost: f64,
    /// `(J^T J)^{-1}` at the solution, scaled by the residual variance.
    pub covariance: Array2<f64>,
    pub iterations: usize,
}

/// Levenberg-Marquardt for `min Σ r_i(p)^2`. `model` returns residuals and
/// the Jacobian rows `∂r_i/∂p`, or `None` when `p` is outside the domain
/// (the step is then rejected like an uphill one). Marquardt scaling
/// `λ diag(J^T J)` is used.
pub fn levenberg_marquardt<F>(start: &[f64], model: F, opts: LmOptions) -> Result<LmResult>
where
    F: Fn(&[f64]) -> Option<(Vec<f64>, Vec<Vec<f64>>)>,
{
    let np = start.len();
    let mut p = start.to_vec();
    let (mut r, mut jac) = model(&p).ok_or_else(|| Error::InvalidArgument("start outside model domain".into()))?;
    let mut cost: f64 = r.iter().map(|x| x * x).sum();
    let mut lambda = opts.initial_damping;
    for it in 1..=opts.max_iterations {
        let (jtj, jtr) = normal_equations(&r, &jac, np);
        let mut a = jtj.clone();
        for i in 0..np {
            a[[i, i]] += lambda * jtj[[i, i]].max(1e-300);
        }
        let step = match a.solve(&jtr.mapv(|x| -x)) {
            Ok(s) => s,
            Err(_) => {
                lambda *= 10.0;
                continue;
            }
        };
        let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
        let accepted = model(&trial).and_then(|(rt, jt)| {
            let ct: f64 = rt.iter().map(|x| x * x).sum();
            (ct.is_finite() && ct <= cost).then_some((rt, jt, ct))
        });
        let small_step = step
            .iter()
            .zip(&p)
            .all(|(d, x)| d.abs() <= opts.step_tol * x.abs().max(1e-300));
        match accepted {
            Some((rt, jt, ct)) => {
                p = trial;
                r = rt;
                jac = jt;
                let improvement = cost - ct;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-15);
                if small_step || improvement <= 1e-30 * cost.max(1e-300) {
                    return Ok(finish(p, r, jac, cost, it));
                }
            }
            None => {
                if small_step {
                    return Ok(finish(p, r, jac, cost, it));
                }
                lambda *= 4.0;
                if lambda > 1e20 {
                    return Ok(finish(p, r, jac, cost, it));
                }
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual: cost.sqrt(),
    })
}

fn normal_equations(r: &[f64], jac: &[Vec<f64>], np: usize) -> (Array2<f64>, Array1<f64>) {
    let mut jtj = Array2::zeros((np, np));
    let mut jtr = Array1::zeros(np);
    for (ri, row) in r.iter().zip(jac) {
        for a in 0..np {
            jtr[a] += row[a] * ri;
            for b in 0..np {
                jtj[[a, b]] += row[a] * row[b];
            }
        }
    }
    (jtj, jtr)
}

fn finish(params: Vec<f64>, residuals: Vec<f64>, jac: Vec<Vec<f64>>, cost: f64, iterations: usize) -> LmResult {
    let np = params.len();
    let (jtj, _) = normal_equations(&residuals, &jac, np);
    let dof = residuals.len().saturating_sub(np).max(1) as f64;
    let covariance = ndarray_linalg::Inverse::inv(&jtj)
        .map(|m| m * (cost / dof))
        .unwrap_or_else(|_| Array2::from_elem((np, np), f64::NAN));
    LmResult {
        params,
        residuals,
        cost,
        covariance,
        iterations,
    }
}

/// Linear least squares `min ||A x - y||` via SVD.
pub fn linear_least_squares(a: &Array2<f64>, y: &Array1<f64>) -> Result<Array1<f64>> {
    Ok(a.least_squares(y)?.solution)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFit {
    pub amplitude_b: f64,
    pub corr_length_chi: f64,
    pub fit_window: (f64, f64),
    /// Weighted residual norm `||(f - y)/σ||` (unweighted when no error bars).
    pub residual_norm: f64,
    /// Unweighted `||f - y|| / ||y||` over the window.
    pub relative_residual: f64,
    pub points: usize,
    pub covariance: [[f64; 2]; 2],
}

/// Default window `[3a, L/4]`.
pub fn default_window(spacing: f64, n_sites: usize) -> (f64, f64) {
    (3.0 * spacing, n_sites as f64 * spacing / 4.0)
}

/// Fits `b K0(Δx/χ)` over the separations inside `window` (inclusive, with
/// a small tolerance for rounding of `k a`). Initialization is fixed:
/// `χ0 = a N / 10` and `b0 = y_first / K0(x_first/χ0)`.
pub fn fit_correlation_length(
    series: &CorrelatorSeries,
    window: (f64, f64),
    spacing: f64,
    n_sites: usize,
) -> Result<CorrelationFit> {
    let slack = 1e-9 * spacing;
    let idx: Vec<usize> = (0..series.len())
        .filter(|&i| series.separations[i] >= window.0 - slack && series.separations[i] <= window.1 + slack)
        .collect();
    if idx.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "fit window [{}, {}] holds {} points; at least 4 are needed",
            window.0,
            window.1,
            idx.len()
        )));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| series.separations[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| series.values[i]).collect();
    let weighted = idx.iter().all(|&i| series.error_bars[i] > 0.0);
    let ws: Vec<f64> = idx
        .iter()
        .map(|&i| if weighted { 1.0 / series.error_bars[i] } else { 1.0 })
        .collect();
    let fit = fit_k0(&xs, &ys, &ws, spacing * n_sites as f64 / 10.0)?;
    let (b, chi) = (fit.params[0], fit.params[1]);
    let model: Vec<f64> = xs.iter().map(|x| b * k0(x / chi).unwrap_or(f64::NAN)).collect();
    let diff: f64 = model.iter().zip(&ys).map(|(m, y)| (m - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = ys.iter().map(|y| y * y).sum::<f64>().sqrt();
    let c = &fit.covariance;
    Ok(CorrelationFit {
        amplitude_b: b,
        corr_length_chi: chi,
        fit_window: window,
        residual_norm: fit.cost.sqrt(),
        relative_residual: if scale > 0.0 { diff / scale } else { f64::INFINITY },
        points: xs.len(),
        covariance: [[c[[0, 0]], c[[0, 1]]], [c[[1, 0]], c[[1, 1]]]],
    })
}

/// Weighted fit of `b K0(x/χ)`; `d/dχ K0(x/χ) = K1(x/χ) x/χ²`.
pub fn fit_k0(xs: &[f64], ys: &[f64], weights: &[f64], chi0: f64) -> Result<LmResult> {
    if !(chi0 > 0.0) {
        return Err(Error::InvalidArgument("initial correlation length must be positive".into()));
    }
    let b0 = ys[0] / k0(xs[0] / chi0)?;
    let model = |p: &[f64]| {
        let (b, chi) = (p[0], p[1]);
        if !(chi > 0.0) || !b.is_finite() {
            return None;
        }
        let mut r = Vec::with_capacity(xs.len());
        let mut jac = Vec::with_capacity(xs.len());
        for ((&x, &y), &w) in xs.iter().zip(ys).zip(weights) {
            let u = x / chi;
            let kv = k0(u).ok()?;
            let kd = k1(u).ok()?;
            r.push(w * (b * kv - y));
            jac.push(vec![w * kv, w * b * kd * x / (chi * chi)]);
        }
        Some((r, jac))
    };
    levenberg_marquardt(&[b0, chi0], model, LmOptions::default())
}
