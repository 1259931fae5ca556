use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveBound {
    SqrtEpsilon,
    Conditioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub epsilon: f64,
    /// `sqrt(ε)`, always valid.
    pub delta_bound: f64,
    /// `κ = E_max / E_0` when the spectrum extremes were supplied.
    pub condition_kappa: Option<f64>,
    /// `sqrt(ε) / |κ² - 2κ|` when defined.
    pub conditioned_bound: Option<f64>,
    pub active: ActiveBound,
}

impl ErrorBudget {
    /// The tighter of the available bounds on the ground-state admixture δ.
    pub fn delta(&self) -> f64 {
        match (self.active, self.conditioned_bound) {
            (ActiveBound::Conditioned, Some(b)) => b,
            _ => self.delta_bound,
        }
    }
}

/// Bounds on the admixture δ of `|ψ> = |g> + δ|g⊥>` given the relative
/// variance ε. `extremes = (E_0, E_max)` enables the conditioned bound.
pub fn error_budget(epsilon: f64, extremes: Option<(f64, f64)>) -> Result<ErrorBudget> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let delta_bound = epsilon.sqrt();
    let kappa = match extremes {
        Some((e0, emax)) if e0 != 0.0 => Some(emax / e0),
        _ => None,
    };
    let conditioned_bound = kappa.and_then(|k| {
        let denom = (k * k - 2.0 * k).abs();
        (denom > 1e-12).then(|| delta_bound / denom)
    });
    let active = match conditioned_bound {
        Some(b) if b < delta_bound => ActiveBound::Conditioned,
        _ => ActiveBound::SqrtEpsilon,
    };
    Ok(ErrorBudget {
        epsilon,
        delta_bound,
        condition_kappa: kappa,
        conditioned_bound,
        active,
    })
}
