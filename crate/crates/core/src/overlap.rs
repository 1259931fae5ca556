//! Padded inner products between ground states of consecutive lattice sizes.
//!
//! The ground state on `j` sites is extended by one site in the pad state
//! `|Q>` on the right and compared with the ground state on `j + 1` sites.
//! The plateau of `|<g_j ⊗ Q | g_{j+1}>|` estimates the asymptotic overlap.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, DENSE_CAP, LANCZOS_CAP};
use crate::lattice::{build_hamiltonian, ModelSpec};
use crate::linalg::{self, C64};
use crate::mps::{compile_mpo, dmrg_with, DmrgConfig, MatrixProductState};
use crate::observables::CorrelationFit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PadKind {
    Uniform,
    SymmetryAdapted,
    Custom,
}

impl PadKind {
    pub fn label(self) -> &'static str {
        match self {
            PadKind::Uniform => "uniform",
            PadKind::SymmetryAdapted => "symmetry-adapted",
            PadKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for PadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PadKind::Uniform),
            "symmetry-adapted" => Ok(PadKind::SymmetryAdapted),
            "custom" => Ok(PadKind::Custom),
            other => Err(Error::Parse(format!("unknown pad kind '{other}'"))),
        }
    }
}

/// A single-site pad: its kind and amplitudes over the `4^flavors` site basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Pad {
    pub kind: PadKind,
    pub amplitudes: Vec<C64>,
}

/// Built-in pad for `kind`. `Custom` has no built-in amplitudes; use
/// [`custom_pad`].
pub fn pad_state(kind: PadKind, flavors: usize) -> Result<Pad> {
    if flavors == 0 {
        return Err(Error::InvalidArgument("flavors must be positive".into()));
    }
    // One flavor occupies two qubits; the site pad is the product over flavors.
    let per_flavor = match kind {
        PadKind::Uniform => [0.5; 4],
        PadKind::SymmetryAdapted => [0.0, std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2, 0.0],
        PadKind::Custom => {
            return Err(Error::InvalidArgument("custom pads need explicit amplitudes".into()));
        }
    };
    let mut amps = vec![C64::new(1.0, 0.0)];
    for _ in 0..flavors {
        amps = amps
            .iter()
            .flat_map(|a| per_flavor.iter().map(move |b| a * b))
            .collect();
    }
    Ok(Pad { kind, amplitudes: amps })
}

pub fn custom_pad(amplitudes: Vec<C64>, flavors: usize) -> Result<Pad> {
    let dim = 1usize << (2 * flavors);
    if amplitudes.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: amplitudes.len(),
        });
    }
    let n = linalg::norm(&amplitudes);
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(n));
    }
    Ok(Pad {
        kind: PadKind::Custom,
        amplitudes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Dense,
    Dmrg,
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Engine::Dense),
            "dmrg" => Ok(Engine::Dmrg),
            other => Err(Error::Parse(format!("unknown engine '{other}'; use dense or dmrg"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OverlapOptions {
    pub dmrg: DmrgConfig,
    /// Residual tolerance of the Lanczos solver used by the dense engine
    /// beyond the dense-diagonalization cap.
    pub lanczos_tol: f64,
    pub seed: u64,
}

impl Default for OverlapOptions {
    fn default() -> Self {
        Self {
            dmrg: DmrgConfig::default(),
            lanczos_tol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSeries {
    pub bare_mass: f64,
    pub coupling_sq: f64,
    pub sizes: Vec<usize>,
    pub overlaps: Vec<f64>,
    pub pad_label: PadKind,
    pub eta_estimate: f64,
    pub eta_spread: f64,
    /// Ground-state quality per size in `sizes`: `ε` of the larger state for
    /// DMRG, zero for the exact engine.
    pub epsilons: Vec<f64>,
    /// Set when a solve failed; the series then stops before that size.
    pub failure: Option<String>,
}

impl OverlapSeries {
    pub const CSV_HEADER: &'static str = "m0,g0_sq,j,overlap,pad_kind";
    pub const SUMMARY_HEADER: &'static str = "m0,g0_sq,eta,spread";

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (j, o) in self.sizes.iter().zip(&self.overlaps) {
            let _ = writeln!(
                out,
                "{},{},{},{:.15e},{}",
                self.bare_mass,
                self.coupling_sq,
                j,
                o,
                self.pad_label.label()
            );
        }
        out
    }

    pub fn summary_row(&self) -> String {
        format!(
            "{},{},{:.15e},{:.15e}",
            self.bare_mass, self.coupling_sq, self.eta_estimate, self.eta_spread
        )
    }
}

/// Mean over the final `ceil(len/4)` entries and their max-min spread.
pub fn plateau(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let k = values.len().div_ceil(4);
    let tail = &values[values.len() - k..];
    let mean = tail.iter().sum::<f64>() / k as f64;
    let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    (mean, max - min)
}

enum Ground {
    Vector(Vec<C64>),
    Mps(MatrixProductState, f64),
}

fn solve(spec: &ModelSpec, engine: Engine, opts: &OverlapOptions) -> Result<Ground> {
    let h = build_hamiltonian(spec)?;
    match engine {
        Engine::Dense => {
            let n = h.n_qubits();
            let res = if n <= DENSE_CAP {
                exact::ground_state_dense(&h)?
            } else if n <= LANCZOS_CAP {
                exact::ground_state_lanczos(&h, opts.lanczos_tol, opts.seed)?
            } else {
                return Err(Error::CapExceeded {
                    qubits: n,
                    cap: LANCZOS_CAP,
                });
            };
            Ok(Ground::Vector(res.ground_vector.to_vec()))
        }
        Engine::Dmrg => {
            let mpo = compile_mpo(&h, spec.qubits_per_site())?;
            let cfg = DmrgConfig {
                seed: opts.seed,
                ..opts.dmrg
            };
            let (state, report) = dmrg_with(&mpo, &cfg)?;
            Ok(Ground::Mps(state, report.epsilon))
        }
    }
}

/// `|<small ⊗ pad | large>|`.
fn padded_overlap(small: &Ground, pad: &[C64], large: &Ground) -> Result<f64> {
    match (small, large) {
        (Ground::Vector(s), Ground::Vector(l)) => {
            let d = pad.len();
            if s.len() * d != l.len() {
                return Err(Error::DimensionMismatch {
                    expected: s.len() * d,
                    found: l.len(),
                });
            }
            let mut acc = C64::new(0.0, 0.0);
            for (i, si) in s.iter().enumerate() {
                let block = &l[i * d..(i + 1) * d];
                acc += si.conj() * linalg::dot(pad, block);
            }
            Ok(acc.norm())
        }
        (Ground::Mps(s, _), Ground::Mps(l, _)) => Ok(s.append_site(pad)?.overlap(l)?.norm()),
        _ => unreachable!("both states come from the same engine"),
    }
}

/// Overlaps `|<g_j ⊗ Q | g_{j+1}>|` for each `j` in `sizes`, with the ground
/// states of `template` resized to `j` and `j + 1` sites. A solver failure
/// ends the series early and is recorded in [`OverlapSeries::failure`].
pub fn consecutive_overlaps(
    template: &ModelSpec,
    sizes: RangeInclusive<usize>,
    pad: &Pad,
    engine: Engine,
    opts: &OverlapOptions,
) -> Result<OverlapSeries> {
    if *sizes.start() < 2 || sizes.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "sizes {}..={} must be a nonempty range starting at 2 or more",
            sizes.start(),
            sizes.end()
        )));
    }
    template.with_sites(*sizes.start()).validate()?;
    if pad.amplitudes.len() != template.site_dim() {
        return Err(Error::DimensionMismatch {
            expected: template.site_dim(),
            found: pad.amplitudes.len(),
        });
    }
    let mut series = OverlapSeries {
        bare_mass: template.bare_mass,
        coupling_sq: template.coupling_sq,
        sizes: vec![],
        overlaps: vec![],
        pad_label: pad.kind,
        eta_estimate: f64::NAN,
        eta_spread: f64::NAN,
        epsilons: vec![],
        failure: None,
    };
    let mut previous = match solve(&template.with_sites(*sizes.start()), engine, opts) {
        Ok(g) => g,
        Err(e) => {
            series.failure = Some(format!("size {}: {e}", sizes.start()));
            return Ok(series);
        }
    };
    for j in sizes {
        let next = match solve(&template.with_sites(j + 1), engine, opts) {
            Ok(g) => g,
            Err(e) => {
                series.failure = Some(format!("size {}: {e}", j + 1));
                break;
            }
        };
        let overlap = padded_overlap(&previous, &pad.amplitudes, &next)?;
        let eps = match (&previous, &next) {
            (Ground::Mps(_, a), Ground::Mps(_, b)) => a.max(*b),
            _ => 0.0,
        };
        series.sizes.push(j);
        series.overlaps.push(overlap.min(1.0));
        series.epsilons.push(eps);
        previous = next;
    }
    let (eta, spread) = plateau(&series.overlaps);
    series.eta_estimate = eta;
    series.eta_spread = spread;
    Ok(series)
}

/// `(m0, g0²)` key with a total order, for parameter-grid maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub bare_mass: f64,
    pub coupling_sq: f64,
}

impl Eq for ParamPoint {}

impl PartialOrd for ParamPoint {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ParamPoint {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bare_mass
            .total_cmp(&other.bare_mass)
            .then(self.coupling_sq.total_cmp(&other.coupling_sq))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaRow {
    pub point: ParamPoint,
    pub chi_over_a: f64,
    pub eta: f64,
    pub spread: f64,
    /// `exp(-χ/a)`, the naive exponential expectation.
    pub exponential_model: f64,
}

impl EtaRow {
    pub const CSV_HEADER: &'static str = "m0,g0_sq,chi_over_a,eta,spread,exp_minus_chi_over_a";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.15e},{:.15e},{:.15e},{:.15e}",
            self.point.bare_mass,
            self.point.coupling_sq,
            self.chi_over_a,
            self.eta,
            self.spread,
            self.exponential_model
        )
    }
}

/// Joins plateau estimates with correlation lengths measured at lattice
/// spacing `spacing`. Rows come out in key order.
pub fn eta_vs_correlation(
    series: &BTreeMap<ParamPoint, OverlapSeries>,
    fits: &BTreeMap<ParamPoint, CorrelationFit>,
    spacing: f64,
) -> Result<Vec<EtaRow>> {
    if let Some(k) = series.keys().find(|k| !fits.contains_key(k)).or(fits.keys().find(|k| !series.contains_key(k))) {
        return Err(Error::InvalidArgument(format!(
            "parameter point (m0 = {}, g0^2 = {}) is missing from one of the maps",
            k.bare_mass, k.coupling_sq
        )));
    }
    Ok(series
        .iter()
        .map(|(k, s)| {
            let chi_over_a = fits[k].corr_length_chi / spacing;
            EtaRow {
                point: *k,
                chi_over_a,
                eta: s.eta_estimate,
                spread: s.eta_spread,
                exponential_model: (-chi_over_a).exp(),
            }
        })
        .collect())
}
