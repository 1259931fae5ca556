//! Correlators, special functions, fits and the variance error budget.

pub mod bessel;
pub mod correlator;
pub mod energy;
pub mod error_budget;
pub mod fit;

pub use bessel::bessel_k;
pub use correlator::{two_point_correlator, CorrelatorSeries};
pub use energy::{fit_energy_extrapolation, EnergyFit, EnergyModel};
pub use error_budget::{error_budget, ActiveBound, ErrorBudget};
pub use fit::{default_window, fit_correlation_length, CorrelationFit};
