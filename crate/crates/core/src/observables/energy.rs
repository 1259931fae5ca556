use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::bessel::k2;
use super::fit::{levenberg_marquardt, linear_least_squares, LmOptions};
use crate::error::{Error, Result};

/// Number of image terms kept in the Casimir sum.
pub const CASIMIR_TERMS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyModel {
    /// `c0 + c1 L`
    Linear,
    /// `c0 + c1 L + c2/L + c3/L² + c4/L³`
    InverseSeries,
    /// `C0 + C1 L + C2 Σ_{h=1..10} K2(C3 h L) / h²`
    Casimir,
}

impl EnergyModel {
    pub fn n_coefficients(self) -> usize {
        match self {
            EnergyModel::Linear => 2,
            EnergyModel::InverseSeries => 5,
            EnergyModel::Casimir => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EnergyModel::Linear => "linear",
            EnergyModel::InverseSeries => "inverse_series",
            EnergyModel::Casimir => "casimir",
        }
    }

    pub fn evaluate(self, coefficients: &[f64], l: f64) -> f64 {
        let c = coefficients;
        match self {
            EnergyModel::Linear => c[0] + c[1] * l,
            EnergyModel::InverseSeries => c[0] + c[1] * l + c[2] / l + c[3] / (l * l) + c[4] / l.powi(3),
            EnergyModel::Casimir => c[0] + c[1] * l + c[2] * casimir_sum(c[3], l),
        }
    }
}

impl std::str::FromStr for EnergyModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(EnergyModel::Linear),
            "inverse_series" => Ok(EnergyModel::InverseSeries),
            "casimir" => Ok(EnergyModel::Casimir),
            _ => Err(Error::Parse(format!("unknown energy model '{s}'"))),
        }
    }
}

/// `Σ_{h=1..10} K2(c3 h L) / h²`; zero where the Bessel argument underflows.
pub fn casimir_sum(c3: f64, l: f64) -> f64 {
    (1..=CASIMIR_TERMS)
        .map(|h| {
            let h = h as f64;
            k2(c3 * h * l).map(|k| k / (h * h)).unwrap_or(f64::NAN)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyFit {
    pub model: EnergyModel,
    /// Coefficients fitted to every data point.
    pub coefficients: Vec<f64>,
    pub sizes: Vec<usize>,
    pub energies: Vec<f64>,
    /// Prediction for each size from strictly smaller sizes only; `None`
    /// while too few smaller sizes exist.
    pub predictions: Vec<Option<f64>>,
    pub prediction_errors: Vec<Option<f64>>,
    pub half_gap: f64,
    /// RMS in-sample residual of the all-data fit.
    pub residual_rms: f64,
    /// Smallest size from which every later prediction lies within the
    /// half gap.
    pub threshold_size: Option<usize>,
}

impl EnergyFit {
    pub const CSV_HEADER: &'static str = "n_sites,energy,model,prediction,abs_error,half_gap";

    pub fn csv_rows(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.15e}")).unwrap_or_default();
        (0..self.sizes.len())
            .map(|i| {
                format!(
                    "{},{:.15e},{},{},{},{:.15e}",
                    self.sizes[i],
                    self.energies[i],
                    self.model.label(),
                    opt(self.predictions[i]),
                    opt(self.prediction_errors[i]),
                    self.half_gap
                )
            })
            .collect()
    }
}

/// Fits `model` with `L = N` (the number of sites) and records, for each
/// size, the error of predicting it from strictly smaller sizes. `gap` is
/// the mass gap, so the tolerance reported is `gap / 2`.
pub fn fit_energy_extrapolation(energies: &[(usize, f64)], model: EnergyModel, gap: f64) -> Result<EnergyFit> {
    if !(gap > 0.0) {
        return Err(Error::InvalidArgument("gap must be positive".into()));
    }
    let need = model.n_coefficients() + 1;
    if energies.len() < need {
        return Err(Error::InvalidArgument(format!(
            "{} model needs at least {need} points, got {}",
            model.label(),
            energies.len()
        )));
    }
    let mut data = energies.to_vec();
    data.sort_by_key(|&(n, _)| n);
    if data.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidArgument("duplicate system sizes".into()));
    }
    let coefficients = fit_model(&data, model)?;
    let residual_rms = rms_residual(&data, model, &coefficients);

    let mut predictions = Vec::with_capacity(data.len());
    let mut prediction_errors = Vec::with_capacity(data.len());
    for k in 0..data.len() {
        // only sizes strictly below data[k].0 enter the fit
        let history = &data[..k];
        if history.len() < need {
            predictions.push(None);
            prediction_errors.push(None);
            continue;
        }
        let c = fit_model(history, model)?;
        let p = model.evaluate(&c, data[k].0 as f64);
        predictions.push(Some(p));
        prediction_errors.push(Some((p - data[k].1).abs()));
    }
    let half_gap = gap / 2.0;
    let threshold_size = threshold(&data, &prediction_errors, half_gap);
    Ok(EnergyFit {
        model,
        coefficients,
        sizes: data.iter().map(|d| d.0).collect(),
        energies: data.iter().map(|d| d.1).collect(),
        predictions,
        prediction_errors,
        half_gap,
        residual_rms,
        threshold_size,
    })
}

fn threshold(data: &[(usize, f64)], errors: &[Option<f64>], half_gap: f64) -> Option<usize> {
    let mut start = None;
    for (i, e) in errors.iter().enumerate() {
        match e {
            Some(e) if *e < half_gap => {
                if start.is_none() {
                    start = Some(data[i].0);
                }
            }
            _ => start = None,
        }
    }
    start
}

pub fn rms_residual(data: &[(usize, f64)], model: EnergyModel, c: &[f64]) -> f64 {
    let ss: f64 = data
        .iter()
        .map(|&(n, e)| (model.evaluate(c, n as f64) - e).powi(2))
        .sum();
    (ss / data.len() as f64).sqrt()
}

fn fit_model(data: &[(usize, f64)], model: EnergyModel) -> Result<Vec<f64>> {
    match model {
        EnergyModel::Linear | EnergyModel::InverseSeries => {
            let nc = model.n_coefficients();
            let a = Array2::from_shape_fn((data.len(), nc), |(i, j)| {
                let l = data[i].0 as f64;
                match j {
                    0 => 1.0,
                    1 => l,
                    _ => l.powi(-(j as i32 - 1)),
                }
            });
            let y = Array1::from_iter(data.iter().map(|d| d.1));
            Ok(linear_least_squares(&a, &y)?.to_vec())
        }
        EnergyModel::Casimir => fit_casimir(data),
    }
}

/// Variable projection: for fixed `C3` the model is linear in `C0..C2`, so
/// the profile cost is scanned over a log grid of `C3`, refined by golden
/// section, then all four parameters are polished jointly. The plain linear
/// fit (`C2 = 0`) is kept as a candidate so the result never fits worse
/// than a straight line.
fn fit_casimir(data: &[(usize, f64)]) -> Result<Vec<f64>> {
    let profile = |log_c3: f64| -> Option<(f64, Vec<f64>)> {
        let c3 = log_c3.exp();
        let a = Array2::from_shape_fn((data.len(), 3), |(i, j)| {
            let l = data[i].0 as f64;
            match j {
                0 => 1.0,
                1 => l,
                _ => casimir_sum(c3, l),
            }
        });
        if a.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let y = Array1::from_iter(data.iter().map(|d| d.1));
        let x = linear_least_squares(&a, &y).ok()?;
        let c = vec![x[0], x[1], x[2], c3];
        Some((rms_residual(data, EnergyModel::Casimir, &c), c))
    };

    let grid: Vec<f64> = (0..=240).map(|i| (1e-4f64).ln() + i as f64 * (1e6f64).ln() / 240.0).collect();
    let mut best: Option<(f64, usize)> = None;
    let values: Vec<Option<f64>> = grid.iter().map(|&g| profile(g).map(|p| p.0)).collect();
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = v {
            if best.map_or(true, |(b, _)| *v < b) {
                best = Some((*v, i));
            }
        }
    }
    let linear = fit_model(data, EnergyModel::Linear)?;
    let linear_c = vec![linear[0], linear[1], 0.0, 1.0];
    let linear_cost = rms_residual(data, EnergyModel::Casimir, &linear_c);
    let Some((_, i)) = best else {
        return Ok(linear_c);
    };
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let log_c3 = golden_section(|g| profile(g).map_or(f64::INFINITY, |p| p.0), lo, hi, 1e-12);
    let (mut cost, mut c) = profile(log_c3).unwrap_or((f64::INFINITY, linear_c.clone()));

    // joint polish in (C0, C1, C2, ln C3)
    let model = |p: &[f64]| {
        let c3 = p[3].exp();
        let mut r = Vec::with_capacity(data.len());
        let mut jac = Vec::with_capacity(data.len());
        for &(n, e) in data {
            let l = n as f64;
            let s = casimir_sum(c3, l);
            // d/dC3 K2(C3 h L) = -h L (K1 + 2 K2/(C3 h L)), via K2' = -K1 - 2K2/z
            let mut ds = 0.0;
            for h in 1..=CASIMIR_TERMS {
                let hf = h as f64;
                let z = c3 * hf * l;
                let k1 = super::bessel::k1(z).ok()?;
                let k2v = k2(z).ok()?;
                ds += -(hf * l) * (k1 + 2.0 * k2v / z) / (hf * hf);
            }
            if !s.is_finite() {
                return None;
            }
            r.push(p[0] + p[1] * l + p[2] * s - e);
            jac.push(vec![1.0, l, s, p[2] * ds * c3]);
        }
        Some((r, jac))
    };
    if cost.is_finite() {
        if let Ok(res) = levenberg_marquardt(&[c[0], c[1], c[2], c[3].ln()], model, LmOptions::default()) {
            let polished = vec![res.params[0], res.params[1], res.params[2], res.params[3].exp()];
            let pc = rms_residual(data, EnergyModel::Casimir, &polished);
            if pc <= cost {
                cost = pc;
                c = polished;
            }
        }
    }
    if !(cost <= linear_cost) {
        return Ok(linear_c);
    }
    if !(c[3] > 0.0) {
        return Err(Error::InvalidArgument("Casimir fit produced a nonpositive C3".into()));
    }
    Ok(c)
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}
