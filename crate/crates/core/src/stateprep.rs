//! Statevector simulation of site-by-site ground-state preparation.
//!
//! Phase estimation is simulated in the eigenbasis of the Hamiltonian: an
//! eigenstate with energy `E` has eigenphase `θ = (E + W) / (2W + m)`, where
//! `W` bounds the spectral radius (the Pauli 1-norm) and `m` is the gap
//! bound, so the whole spectrum lands in `[0, 1)` without wraparound. A
//! `b`-bit register then reads outcome `y` with amplitude
//! `A_y(θ) = 2^-b Σ_x exp(2πi x (θ - y/2^b))`.

use std::cell::Cell;
use std::f64::consts::PI;
use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, Eigensystem};
use crate::lattice::{build_hamiltonian, ModelSpec};
use crate::linalg::{self, C64};
use crate::mps::STATEVECTOR_CAP;
use crate::observables::EnergyFit;
use crate::overlap::Pad;
use crate::pauli::PauliSumOperator;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Outcome resolution as a fraction of the gap bound chosen by
/// [`PhaseEstimationConfig::for_bound`].
pub const RESOLUTION_FRACTION: f64 = 1.0 / 16.0;

/// Per-repetition error rate assumed when sizing the majority vote. The
/// Dirichlet kernel puts at most `1/(2(d-1))` outside `d` resolution steps,
/// so this holds once both window edges are three steps from the level.
pub const SHOT_ERROR: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimationConfig {
    pub ancilla_bits: u32,
    pub energy_estimate: f64,
    pub gap_bound: f64,
    pub repetitions: usize,
    pub failure_prob: f64,
}

impl PhaseEstimationConfig {
    /// Smallest register with resolution at most `m/16` and the odd vote
    /// count `R >= ln(1/ε) / (2 (1/2 - 1/4)^2)` from the Hoeffding bound.
    pub fn for_bound(spectral_bound: f64, energy_estimate: f64, gap_bound: f64, failure_prob: f64) -> Result<Self> {
        if !(gap_bound > 0.0) || !(failure_prob > 0.0 && failure_prob < 1.0) || !(spectral_bound >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need m > 0, 0 < ε < 1 and W >= 0 (got m = {gap_bound}, ε = {failure_prob}, W = {spectral_bound})"
            )));
        }
        let span = 2.0 * spectral_bound + gap_bound;
        let bits = (span / (RESOLUTION_FRACTION * gap_bound)).log2().ceil().max(1.0) as u32;
        let r = ((1.0 / failure_prob).ln() / (2.0 * (0.5 - SHOT_ERROR).powi(2))).ceil().max(1.0) as usize;
        Ok(Self {
            ancilla_bits: bits,
            energy_estimate,
            gap_bound,
            repetitions: r | 1,
            failure_prob,
        })
    }

    pub fn for_operator(op: &PauliSumOperator, energy_estimate: f64, gap_bound: f64, failure_prob: f64) -> Result<Self> {
        Self::for_bound(op.one_norm(), energy_estimate, gap_bound, failure_prob)
    }

    pub fn validate(&self, spectral_bound: f64) -> Result<()> {
        if self.repetitions % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "repetitions must be odd, got {}",
                self.repetitions
            )));
        }
        if !(self.gap_bound > 0.0) || !(self.failure_prob > 0.0 && self.failure_prob < 1.0) {
            return Err(Error::InvalidArgument("need gap_bound > 0 and 0 < failure_prob < 1".into()));
        }
        if self.ancilla_bits == 0 || self.ancilla_bits > 30 {
            return Err(Error::InvalidArgument(format!(
                "ancilla_bits must lie in 1..=30, got {}",
                self.ancilla_bits
            )));
        }
        let scale = PhaseScale::new(spectral_bound, self);
        if scale.resolution() > self.gap_bound / 2.0 {
            return Err(Error::InvalidArgument(format!(
                "resolution {:e} of {} ancilla bits is coarser than m/2 = {:e}",
                scale.resolution(),
                self.ancilla_bits,
                self.gap_bound / 2.0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct PhaseScale {
    offset: f64,
    span: f64,
    levels: usize,
}

impl PhaseScale {
    fn new(spectral_bound: f64, cfg: &PhaseEstimationConfig) -> Self {
        Self {
            offset: spectral_bound,
            span: 2.0 * spectral_bound + cfg.gap_bound,
            levels: 1usize << cfg.ancilla_bits,
        }
    }

    fn phase(&self, energy: f64) -> f64 {
        (energy + self.offset) / self.span
    }

    fn energy(&self, outcome: usize) -> f64 {
        outcome as f64 * self.span / self.levels as f64 - self.offset
    }

    fn resolution(&self) -> f64 {
        self.span / self.levels as f64
    }

    /// `A_y(θ)`, periodic in `θ - y/M` with period one.
    fn amplitude(&self, theta: f64, outcome: usize) -> C64 {
        let m = self.levels as f64;
        let mut u = theta - outcome as f64 / m;
        u -= u.round();
        let s = (PI * u).sin();
        if s.abs() < 1e-14 {
            return ONE;
        }
        C64::from_polar((PI * m * u).sin() / (m * s), PI * (m - 1.0) * u)
    }

    fn in_window(&self, outcome: usize, cfg: &PhaseEstimationConfig) -> bool {
        (self.energy(outcome) - cfg.energy_estimate).abs() < cfg.gap_bound / 2.0
    }

    fn window(&self, cfg: &PhaseEstimationConfig) -> Vec<usize> {
        (0..self.levels).filter(|&y| self.in_window(y, cfg)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Ground,
    NotGround,
}

#[derive(Debug, Clone)]
pub struct PhaseEstimate {
    pub decision: Decision,
    pub post_state: Vec<C64>,
    /// Median of the per-repetition energy readouts.
    pub energy_sample: f64,
    pub votes_ground: usize,
}

fn check_state(state: &[C64], dim: usize) -> Result<()> {
    if state.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: state.len(),
        });
    }
    let n = linalg::norm(state);
    if (n - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

fn check_cap(dim: usize, cfg: &PhaseEstimationConfig) -> Result<()> {
    let system = dim.next_power_of_two().trailing_zeros() as usize;
    let cap = STATEVECTOR_CAP.trailing_zeros() as usize;
    if system + cfg.ancilla_bits as usize > cap {
        return Err(Error::CapExceeded {
            qubits: system + cfg.ancilla_bits as usize,
            cap,
        });
    }
    Ok(())
}

/// Repeated phase estimation with a majority vote. Each repetition samples
/// an outcome by the Born rule and collapses the system accordingly.
pub fn phase_estimate(
    op: &PauliSumOperator,
    state: &[C64],
    cfg: &PhaseEstimationConfig,
    seed: u64,
) -> Result<PhaseEstimate> {
    let dim = 1usize << op.n_qubits();
    check_cap(dim, cfg)?;
    cfg.validate(op.one_norm())?;
    check_state(state, dim)?;
    let eig = Eigensystem::of_operator(op)?;
    phase_estimate_in(&eig, op.one_norm(), state, cfg, seed)
}

/// [`phase_estimate`] on a precomputed eigensystem with spectral bound `w`.
pub fn phase_estimate_in(
    eig: &Eigensystem,
    w: f64,
    state: &[C64],
    cfg: &PhaseEstimationConfig,
    seed: u64,
) -> Result<PhaseEstimate> {
    check_cap(eig.dim(), cfg)?;
    cfg.validate(w)?;
    check_state(state, eig.dim())?;
    let scale = PhaseScale::new(w, cfg);
    let thetas: Vec<f64> = eig.values.iter().map(|&e| scale.phase(e)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = eig.coefficients(state);
    let mut readouts = Vec::with_capacity(cfg.repetitions);
    let mut votes = 0;
    let mut probs = vec![0.0; scale.levels];
    for _ in 0..cfg.repetitions {
        let k = sample(&mut rng, coeffs.iter().map(|c| c.norm_sqr()));
        for (y, p) in probs.iter_mut().enumerate() {
            *p = scale.amplitude(thetas[k], y).norm_sqr();
        }
        let y = sample(&mut rng, probs.iter().copied());
        for (c, &t) in coeffs.iter_mut().zip(&thetas) {
            *c *= scale.amplitude(t, y);
        }
        let n = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        coeffs.mapv_inplace(|c| c / n);
        if scale.in_window(y, cfg) {
            votes += 1;
        }
        readouts.push(scale.energy(y));
    }
    readouts.sort_by(f64::total_cmp);
    Ok(PhaseEstimate {
        decision: if 2 * votes > cfg.repetitions {
            Decision::Ground
        } else {
            Decision::NotGround
        },
        post_state: eig.from_coefficients(&coeffs),
        energy_sample: readouts[readouts.len() / 2],
        votes_ground: votes,
    })
}

/// Index drawn with probability proportional to `weights`.
fn sample<R: Rng, I: Iterator<Item = f64> + Clone>(rng: &mut R, weights: I) -> usize {
    let total: f64 = weights.clone().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = i;
            if u < w {
                return i;
            }
            u -= w;
        }
    }
    last
}

/// `P(Bin(r, p) > r/2)` for odd `r`.
pub fn majority_probability(r: usize, p: f64) -> f64 {
    if p > 0.5 {
        return 1.0 - majority_probability(r, 1.0 - p);
    }
    let q = 1.0 - p;
    let mut pmf = q.powi(r as i32);
    let mut cdf = 0.0;
    for k in 0..r {
        if 2 * k > r {
            break;
        }
        cdf += pmf;
        pmf *= (r - k) as f64 / (k + 1) as f64 * p / q;
    }
    (1.0 - cdf).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    Ideal,
    PhaseEstimationBased,
}

impl std::str::FromStr for OracleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(OracleMode::Ideal),
            "phase-estimation-based" | "pe" => Ok(OracleMode::PhaseEstimationBased),
            other => Err(Error::Parse(format!("unknown oracle mode '{other}'"))),
        }
    }
}

impl OracleMode {
    pub fn label(self) -> &'static str {
        match self {
            OracleMode::Ideal => "ideal",
            OracleMode::PhaseEstimationBased => "phase-estimation-based",
        }
    }
}

/// Phase oracle `I + (e^{iφ} - 1) P` on the ground space of a Hamiltonian.
///
/// In phase-estimation mode the projector is replaced by the coherent
/// majority vote: phase estimation runs on `R` fresh registers, the phase
/// is applied when the vote accepts, and the registers are uncomputed. On
/// the branch where the registers return to zero the system picks up
/// `1 + (e^{iφ} - 1) P_k` on eigenstate `k`, with `P_k` the acceptance
/// probability. [`ReflectionOracle::apply`] follows that branch; its norm
/// deficit is the weight left entangled with the registers, so overlaps it
/// reports are lower bounds for the full channel, which
/// [`ReflectionOracle::channel`] evaluates exactly.
#[derive(Debug)]
pub struct ReflectionOracle {
    eig: Eigensystem,
    mode: OracleMode,
    acceptance: Vec<f64>,
    pe: Option<(PhaseEstimationConfig, PhaseScale)>,
    calls: Cell<usize>,
}

impl ReflectionOracle {
    pub fn from_eigensystem(
        eig: Eigensystem,
        spectral_bound: f64,
        cfg: &PhaseEstimationConfig,
        mode: OracleMode,
    ) -> Result<Self> {
        check_cap(eig.dim(), cfg)?;
        let (acceptance, pe) = match mode {
            OracleMode::Ideal => {
                let e0 = eig.values[0];
                let tol = 1e-9 * e0.abs().max(1.0);
                (eig.values.iter().map(|&e| if e - e0 <= tol { 1.0 } else { 0.0 }).collect(), None)
            }
            OracleMode::PhaseEstimationBased => {
                cfg.validate(spectral_bound)?;
                let scale = PhaseScale::new(spectral_bound, cfg);
                let window = scale.window(cfg);
                let acc = eig
                    .values
                    .iter()
                    .map(|&e| {
                        let t = scale.phase(e);
                        let p: f64 = window.iter().map(|&y| scale.amplitude(t, y).norm_sqr()).sum();
                        majority_probability(cfg.repetitions, p.min(1.0))
                    })
                    .collect();
                (acc, Some((*cfg, scale)))
            }
        };
        Ok(Self {
            eig,
            mode,
            acceptance,
            pe,
            calls: Cell::new(0),
        })
    }

    pub fn from_hermitian(matrix: &Array2<C64>, spectral_bound: f64, cfg: &PhaseEstimationConfig, mode: OracleMode) -> Result<Self> {
        Self::from_eigensystem(Eigensystem::from_hermitian(matrix)?, spectral_bound, cfg, mode)
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.eig.dim()
    }

    pub fn calls(&self) -> usize {
        self.calls.get()
    }

    pub fn reset_calls(&self) {
        self.calls.set(0)
    }

    pub fn eigensystem(&self) -> &Eigensystem {
        &self.eig
    }

    /// Acceptance probability per eigenstate, ascending energy.
    pub fn acceptance(&self) -> &[f64] {
        &self.acceptance
    }

    pub fn apply(&self, state: &[C64], phi: f64) -> Result<Vec<C64>> {
        if state.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: state.len(),
            });
        }
        self.calls.set(self.calls.get() + 1);
        let c = C64::from_polar(1.0, phi) - ONE;
        let mut coeffs = self.eig.coefficients(state);
        for (x, p) in coeffs.iter_mut().zip(&self.acceptance) {
            *x *= ONE + c * p;
        }
        Ok(self.eig.from_coefficients(&coeffs))
    }

    /// Exact action on a density matrix. Entry `(k, l)` in the eigenbasis is
    /// multiplied by `1 + c P_k + conj(c) P_l + |c|^2 Q_kl`, `c = e^{iφ} - 1`,
    /// where `Q_kl` is the overlap of the accepted register branches after
    /// uncomputation. Costs `O(dim^2 (2^b + R^3))`.
    pub fn channel(&self, rho: &Array2<C64>, phi: f64) -> Result<Array2<C64>> {
        let d = self.dim();
        if rho.dim() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rho.nrows(),
            });
        }
        self.calls.set(self.calls.get() + 1);
        let c = C64::from_polar(1.0, phi) - ONE;
        let v = &self.eig.vectors;
        let vh = v.t().mapv(|x| x.conj());
        let mut r = vh.dot(rho).dot(v);
        let q = match &self.pe {
            None => None,
            Some((cfg, scale)) => Some(self.accepted_overlaps(cfg, scale)),
        };
        for k in 0..d {
            for l in 0..d {
                let (pk, pl) = (self.acceptance[k], self.acceptance[l]);
                let qkl = match &q {
                    None => C64::new(pk * pl, 0.0),
                    Some(q) => q[[k, l]],
                };
                r[[k, l]] *= ONE + c * pk + c.conj() * pl + c.norm_sqr() * qkl;
            }
        }
        Ok(v.dot(&r).dot(&vh))
    }

    /// `Q_kl` by a dynamic program over the `R` registers, tracking how many
    /// registers accept on the bra and on the ket side.
    fn accepted_overlaps(&self, cfg: &PhaseEstimationConfig, scale: &PhaseScale) -> Array2<C64> {
        let d = self.dim();
        let m = scale.levels;
        let window = scale.window(cfg);
        let thetas: Vec<f64> = self.eig.values.iter().map(|&e| scale.phase(e)).collect();
        let norm = 1.0 / (m as f64).sqrt();
        // Register state after the forward transform, split into accepted
        // and rejected parts and mapped back to the time register.
        let mut accepted = Array2::<C64>::zeros((d, m));
        let mut rejected = Array2::<C64>::zeros((d, m));
        for k in 0..d {
            let amps: Vec<C64> = window.iter().map(|&y| scale.amplitude(thetas[k], y)).collect();
            for x in 0..m {
                let mut w = ZERO;
                for (&y, a) in window.iter().zip(&amps) {
                    w += C64::from_polar(norm, 2.0 * PI * (x * y % m) as f64 / m as f64) * a;
                }
                accepted[[k, x]] = w;
                rejected[[k, x]] = C64::from_polar(norm, 2.0 * PI * (x as f64 * thetas[k]).fract()) - w;
            }
        }
        let r = cfg.repetitions;
        let half = r / 2;
        let mut q = Array2::<C64>::zeros((d, d));
        for k in 0..d {
            for l in 0..d {
                let mut s = [[ZERO; 2]; 2];
                for x in 0..m {
                    let ph = C64::from_polar(1.0, 2.0 * PI * (x as f64 * (thetas[l] - thetas[k])).fract());
                    let parts = [
                        (accepted[[l, x]].conj(), accepted[[k, x]]),
                        (rejected[[l, x]].conj(), rejected[[k, x]]),
                    ];
                    for (a, pa) in parts.iter().enumerate() {
                        for (b, pb) in parts.iter().enumerate() {
                            s[a][b] += pa.0 * ph * pb.1;
                        }
                    }
                }
                // table[na][nb]: amplitude with na bra and nb ket acceptances
                let mut table = vec![vec![ZERO; r + 1]; r + 1];
                table[0][0] = ONE;
                for step in 0..r {
                    let mut next = vec![vec![ZERO; r + 1]; r + 1];
                    for na in 0..=step {
                        for nb in 0..=step {
                            let t = table[na][nb];
                            if t == ZERO {
                                continue;
                            }
                            next[na + 1][nb + 1] += t * s[0][0];
                            next[na + 1][nb] += t * s[0][1];
                            next[na][nb + 1] += t * s[1][0];
                            next[na][nb] += t * s[1][1];
                        }
                    }
                    table = next;
                }
                let mut acc = ZERO;
                for na in half + 1..=r {
                    for nb in half + 1..=r {
                        acc += table[na][nb];
                    }
                }
                q[[k, l]] = acc;
            }
        }
        q
    }
}

/// Builds the ground-space oracle for `op`. The spectral bound is the Pauli
/// 1-norm.
pub fn ground_oracle_reflection(
    op: &PauliSumOperator,
    cfg: &PhaseEstimationConfig,
    mode: OracleMode,
) -> Result<ReflectionOracle> {
    ReflectionOracle::from_eigensystem(Eigensystem::of_operator(op)?, op.one_norm(), cfg, mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    pub overlap_lower_bound: f64,
    pub target_infidelity: f64,
    pub derived_query_count: usize,
}

impl FixedPointConfig {
    /// Schedule length `L`: the smallest odd integer with
    /// `L >= ln(2/δ) / η`, `δ = sqrt(ε)`.
    pub fn new(eta: f64, epsilon: f64) -> Result<Self> {
        let cfg = Self {
            overlap_lower_bound: eta,
            target_infidelity: epsilon,
            derived_query_count: 0,
        };
        let l = cfg.minimum_length()?;
        Ok(Self {
            derived_query_count: l,
            ..cfg
        })
    }

    pub fn minimum_length(&self) -> Result<usize> {
        let (eta, eps) = (self.overlap_lower_bound, self.target_infidelity);
        if !(eta > 0.0 && eta <= 1.0) || !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < η <= 1 and 0 < ε < 1, got η = {eta}, ε = {eps}"
            )));
        }
        let raw = (2.0 / eps.sqrt()).ln() / eta;
        let l = (raw - 1e-12).ceil().max(1.0) as usize;
        Ok(l | 1)
    }

    /// Oracle queries used by the schedule: one target and one start
    /// reflection per iterate.
    pub fn calls(&self) -> usize {
        self.derived_query_count - 1
    }

    /// `ceil(ln(2/δ) / η)`.
    pub fn schedule_bound(&self) -> usize {
        ((2.0 / self.target_infidelity.sqrt()).ln() / self.overlap_lower_bound - 1e-12).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let min = self.minimum_length()?;
        if self.derived_query_count % 2 == 0 || self.derived_query_count < min {
            return Err(Error::InvalidArgument(format!(
                "schedule length {} must be odd and at least {min}",
                self.derived_query_count
            )));
        }
        Ok(())
    }

    /// Phases `(α_j, β_j)`, `j = 1..l`, with
    /// `α_j = -β_{l-j+1} = 2 acot(tan(2πj/L) sqrt(1 - γ^2))` and
    /// `1/γ = cosh(acosh(1/δ) / L)`.
    pub fn phases(&self) -> Vec<(f64, f64)> {
        let big_l = self.derived_query_count;
        let l = (big_l - 1) / 2;
        let delta = self.target_infidelity.sqrt();
        let gamma = 1.0 / ((1.0 / delta).acosh() / big_l as f64).cosh();
        let root = (1.0 - gamma * gamma).max(0.0).sqrt();
        let alpha: Vec<f64> = (1..=l)
            .map(|j| {
                let t = (2.0 * PI * j as f64 / big_l as f64).tan() * root;
                2.0 * (1.0 / t).atan()
            })
            .collect();
        (0..l).map(|j| (alpha[j], -alpha[l - 1 - j])).collect()
    }
}

/// Fixed-point search from `start` toward the target oracle's ground space.
/// Iterate `j` applies the target reflection with phase `β_j`, then the
/// start reflection with phase `-α_j`. Returns the state and the number of
/// oracle calls made.
pub fn fixed_point_amplify(
    start: &[C64],
    target: &ReflectionOracle,
    start_oracle: &ReflectionOracle,
    cfg: &FixedPointConfig,
) -> Result<(Vec<C64>, usize)> {
    cfg.validate()?;
    if target.dim() != start.len() || start_oracle.dim() != start.len() {
        return Err(Error::DimensionMismatch {
            expected: start.len(),
            found: target.dim(),
        });
    }
    let mut state = start.to_vec();
    let mut calls = 0;
    for (alpha, beta) in cfg.phases() {
        state = target.apply(&state, beta)?;
        state = start_oracle.apply(&state, -alpha)?;
        calls += 2;
    }
    Ok((state, calls))
}

/// Source of the energy estimates `Ẽ` handed to the phase-estimation oracles.
#[derive(Debug, Clone)]
pub enum EnergyPredictor {
    /// Exact ground energies from the exact solver.
    Exact,
    /// Extrapolation model evaluated at `L = N`.
    Fit(EnergyFit),
}

impl EnergyPredictor {
    pub fn predict(&self, n_sites: usize, exact_energy: f64) -> f64 {
        match self {
            EnergyPredictor::Exact => exact_energy,
            EnergyPredictor::Fit(f) => f.model.evaluate(&f.coefficients, n_sites as f64),
        }
    }

    pub fn label(&self) -> String {
        match self {
            EnergyPredictor::Exact => "exact".into(),
            EnergyPredictor::Fit(f) => format!("fit-{}", f.model.label()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepOptions {
    /// Overlap floor `η` used for every step's schedule; a step whose start
    /// overlap falls below it aborts the run.
    pub eta_floor: f64,
    /// Gap bound handed to phase estimation, as a fraction of the exact gap.
    pub gap_fraction: f64,
}

impl Default for PrepOptions {
    fn default() -> Self {
        Self {
            eta_floor: 0.25,
            gap_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepStep {
    /// Size before the step; the step prepares `j + 1` sites.
    pub j: usize,
    pub overlap_before: f64,
    pub oracle_calls: usize,
    pub fidelity_after: f64,
    pub energy_estimate: f64,
    pub schedule_bound: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepTrace {
    pub steps: Vec<PrepStep>,
    pub oracle_calls_total: usize,
    pub final_fidelity: f64,
    /// Squared norm of the tracked branch (one for the ideal oracle).
    pub branch_weight: f64,
    pub step_infidelity: f64,
    pub mode: OracleMode,
    pub aborted: Option<String>,
}

impl PrepTrace {
    pub const CSV_HEADER: &'static str = "step_j,overlap_before,oracle_calls,fidelity_after,energy_estimate";

    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{},{:.15e},{},{:.15e},{:.15e}",
                s.j, s.overlap_before, s.oracle_calls, s.fidelity_after, s.energy_estimate
            );
        }
        out
    }

    pub fn schedule_bound_total(&self) -> usize {
        self.steps.iter().map(|s| s.schedule_bound).sum()
    }
}

fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// `H ⊗ I + λ I ⊗ (I - |Q><Q|)`: ground state `|g> ⊗ |Q>` with gap
/// `min(gap(H), λ)`.
pub fn padded_start_hamiltonian(h: &Array2<C64>, pad: &[C64], lambda: f64) -> Array2<C64> {
    let (n, d) = (h.nrows(), pad.len());
    Array2::from_shape_fn((n * d, n * d), |(i, j)| {
        let (i1, i2) = (i / d, i % d);
        let (j1, j2) = (j / d, j % d);
        let mut v = if i2 == j2 { h[[i1, j1]] } else { ZERO };
        if i1 == j1 {
            let id = if i2 == j2 { ONE } else { ZERO };
            v += (id - pad[i2] * pad[j2].conj()) * lambda;
        }
        v
    })
}

/// Grows the vacuum one site at a time from the exact `n0`-site ground state.
///
/// Each step appends the pad and runs [`fixed_point_amplify`] toward the
/// `j+1`-site ground state with per-step infidelity budget
/// `ε / (n_final - n0)`. The start reflection is the ground-space oracle of
/// `H_j ⊗ I + λ I ⊗ (I - |Q><Q|)` with `λ` the gap of `H_j`. In
/// phase-estimation mode each call is given failure probability
/// `ε_step / (4 calls)`. A step whose starting overlap with the target is
/// below `opts.eta_floor` stops the run; the trace then records why.
#[allow(clippy::too_many_arguments)]
pub fn prepare_vacuum(
    template: &ModelSpec,
    n0: usize,
    n_final: usize,
    pad: &Pad,
    predictor: &EnergyPredictor,
    eps: f64,
    mode: OracleMode,
    opts: &PrepOptions,
) -> Result<(Vec<C64>, PrepTrace)> {
    if n0 < 2 || n_final < n0 {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= n0 <= n_final, got n0 = {n0}, n_final = {n_final}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("ε must lie in (0, 1), got {eps}")));
    }
    if pad.amplitudes.len() != template.site_dim() {
        return Err(Error::DimensionMismatch {
            expected: template.site_dim(),
            found: pad.amplitudes.len(),
        });
    }
    let mut hams = Vec::new();
    let mut dense = Vec::new();
    let mut eigs = Vec::new();
    for n in n0..=n_final {
        let spec = template.with_sites(n);
        spec.validate()?;
        let h = build_hamiltonian(&spec)?;
        let m = exact::to_dense(&h)?;
        eigs.push(Eigensystem::from_hermitian(&m)?);
        dense.push(m);
        hams.push(h);
    }
    let gaps: Vec<f64> = eigs.iter().map(|e| e.spectrum().gap).collect();
    let estimates: Vec<f64> = (n0..=n_final)
        .zip(&eigs)
        .map(|(n, e)| predictor.predict(n, e.values[0]))
        .collect();
    for (i, n) in (n0..=n_final).enumerate() {
        if !(gaps[i] > 0.0) {
            return Err(Error::InvalidArgument(format!("{n}-site ground state is degenerate")));
        }
        let miss = (estimates[i] - eigs[i].values[0]).abs();
        if miss >= gaps[i] * opts.gap_fraction / 2.0 {
            return Err(Error::InvalidArgument(format!(
                "energy estimate for {n} sites misses by {miss:e}, not within half the gap bound {:e}",
                gaps[i] * opts.gap_fraction / 2.0
            )));
        }
    }

    let steps_total = n_final - n0;
    let step_eps = if steps_total > 0 { eps / steps_total as f64 } else { eps };
    let mut trace = PrepTrace {
        steps: vec![],
        oracle_calls_total: 0,
        final_fidelity: 1.0,
        branch_weight: 1.0,
        step_infidelity: step_eps,
        mode,
        aborted: None,
    };
    let mut state = eigs[0].vector(0).to_vec();
    for (i, j) in (n0..n_final).enumerate() {
        let start = kron_vec(&state, &pad.amplitudes);
        let target_ground = eigs[i + 1].vector(0);
        let weight = linalg::norm(&start);
        let overlap_before = linalg::dot(target_ground.as_slice().expect("contiguous"), &start).norm() / weight;
        if overlap_before < opts.eta_floor {
            trace.aborted = Some(format!(
                "step {j} -> {}: overlap {overlap_before:.6} below floor {}",
                j + 1,
                opts.eta_floor
            ));
            break;
        }
        let fp = FixedPointConfig::new(opts.eta_floor, step_eps)?;
        let pe_eps = step_eps / (4.0 * fp.calls().max(1) as f64);
        let target_cfg = PhaseEstimationConfig::for_operator(
            &hams[i + 1],
            estimates[i + 1],
            opts.gap_fraction * gaps[i + 1],
            pe_eps,
        )?;
        let lambda = gaps[i];
        let start_h = padded_start_hamiltonian(&dense[i], &pad.amplitudes, lambda);
        let start_w = hams[i].one_norm() + lambda;
        let start_cfg = PhaseEstimationConfig::for_bound(start_w, estimates[i], opts.gap_fraction * lambda, pe_eps)?;
        let target = ReflectionOracle::from_eigensystem(eigs[i + 1].clone(), hams[i + 1].one_norm(), &target_cfg, mode)?;
        let start_oracle = ReflectionOracle::from_hermitian(&start_h, start_w, &start_cfg, mode)?;
        let (next, calls) = fixed_point_amplify(&start, &target, &start_oracle, &fp)?;
        let fidelity = linalg::dot(target_ground.as_slice().expect("contiguous"), &next).norm_sqr();
        trace.steps.push(PrepStep {
            j,
            overlap_before,
            oracle_calls: calls,
            fidelity_after: fidelity.min(1.0),
            energy_estimate: estimates[i + 1],
            schedule_bound: fp.schedule_bound(),
        });
        trace.oracle_calls_total += calls;
        state = next;
    }
    let reached = n0 + trace.steps.len();
    let final_ground = eigs[reached - n0].vector(0);
    trace.final_fidelity = linalg::dot(final_ground.as_slice().expect("contiguous"), &state)
        .norm_sqr()
        .min(1.0);
    trace.branch_weight = linalg::norm(&state).powi(2);
    Ok((state, trace))
}

/// Pure state as a density matrix.
pub fn density(state: &[C64]) -> Array2<C64> {
    let v = Array1::from(state.to_vec());
    Array2::from_shape_fn((v.len(), v.len()), |(i, j)| v[i] * v[j].conj())
}

/// Trace distance `||a - b||_1 / 2` between Hermitian matrices.
pub fn trace_distance(a: &Array2<C64>, b: &Array2<C64>) -> Result<f64> {
    use ndarray_linalg::{EigValsh, UPLO};
    let diff = a - b;
    let vals = diff.eigvalsh(UPLO::Lower)?;
    Ok(vals.iter().map(|x| x.abs()).sum::<f64>() / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn projector_hamiltonian(target: &[C64]) -> Array2<C64> {
        let d = target.len();
        Array2::from_shape_fn((d, d), |(i, j)| {
            let id = if i == j { ONE } else { ZERO };
            id - target[i] * target[j].conj()
        })
    }

    fn ideal(target: &[C64]) -> ReflectionOracle {
        let cfg = PhaseEstimationConfig::for_bound(1.0, 0.0, 1.0, 0.1).unwrap();
        ReflectionOracle::from_hermitian(&projector_hamiltonian(target), 1.0, &cfg, OracleMode::Ideal).unwrap()
    }

    fn basis(d: usize, k: usize) -> Vec<C64> {
        let mut v = vec![ZERO; d];
        v[k] = ONE;
        v
    }

    #[test]
    fn majority_tail() {
        assert!((majority_probability(1, 0.3) - 0.3).abs() < 1e-15);
        // 3 votes: 3 p^2 (1-p) + p^3
        let p: f64 = 0.2;
        assert!((majority_probability(3, p) - (3.0 * p * p * (1.0 - p) + p.powi(3))).abs() < 1e-15);
        assert!((majority_probability(5, 0.5) - 0.5).abs() < 1e-14);
        assert!(majority_probability(101, 0.999) > 1.0 - 1e-100_f64.max(1e-15));
    }

    #[test]
    fn dirichlet_amplitudes_are_normalized() {
        let cfg = PhaseEstimationConfig {
            ancilla_bits: 6,
            energy_estimate: 0.0,
            gap_bound: 1.0,
            repetitions: 1,
            failure_prob: 0.1,
        };
        let s = PhaseScale::new(3.0, &cfg);
        for &t in &[0.0, 0.1234, 0.5, 0.99] {
            let total: f64 = (0..s.levels).map(|y| s.amplitude(t, y).norm_sqr()).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        // exact phases read out deterministically
        assert!((s.amplitude(5.0 / 64.0, 5).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ideal_reflection_flips_ground() {
        let g = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), ZERO, ZERO];
        let o = ideal(&g);
        let out = o.apply(&g, PI).unwrap();
        for (a, b) in out.iter().zip(&g) {
            assert!((a + b).norm() < 1e-12);
        }
        let orth = vec![C64::new(0.8, 0.0), C64::new(0.0, -0.6), ZERO, ZERO];
        let out = o.apply(&orth, PI).unwrap();
        for (a, b) in out.iter().zip(&orth) {
            assert!((a - b).norm() < 1e-12);
        }
        assert_eq!(o.calls(), 2);
    }

    #[test]
    fn opposite_phases_cancel() {
        let g = vec![C64::new(0.5, 0.5), C64::new(0.5, -0.5), ZERO, ZERO];
        let o = ideal(&g);
        let psi = linalg::random_vector(4, 3);
        let out = o.apply(&o.apply(&psi, 0.7).unwrap(), -0.7).unwrap();
        for (a, b) in out.iter().zip(&psi) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn schedule_length_is_odd_and_sufficient() {
        let c = FixedPointConfig::new(0.5, 1e-3).unwrap();
        let raw = (2.0 / 1e-3f64.sqrt()).ln() / 0.5;
        assert!(c.derived_query_count % 2 == 1 && c.derived_query_count as f64 >= raw);
        assert!(c.derived_query_count as f64 <= raw + 2.0);
        let bad = FixedPointConfig {
            derived_query_count: 3,
            ..c
        };
        assert!(bad.validate().is_err());
        assert!(FixedPointConfig::new(0.0, 0.1).is_err());
    }

    #[test]
    fn fixed_point_reaches_target() {
        // start |0>, target with overlap 1/2
        let target = vec![C64::new(0.5, 0.0), C64::new(0.5, 0.0), C64::new(0.5, 0.0), C64::new(0.0, 0.5)];
        let start = basis(4, 0);
        let cfg = FixedPointConfig::new(0.5, 1e-3).unwrap();
        let (out, calls) = fixed_point_amplify(&start, &ideal(&target), &ideal(&start), &cfg).unwrap();
        assert!(exact::fidelity(&target, &out) >= 1.0 - 1e-3);
        assert_eq!(calls, cfg.calls());
        assert!((linalg::norm(&out) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unit_overlap_is_fixed() {
        let start = basis(4, 2);
        for eta in [1.0, 0.3] {
            let cfg = FixedPointConfig::new(eta, 1e-2).unwrap();
            let (out, _) = fixed_point_amplify(&start, &ideal(&start), &ideal(&start), &cfg).unwrap();
            assert!((exact::fidelity(&start, &out) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn pe_channel_matches_branch_on_diagonal() {
        // 2-level Hamiltonian diag(0, 1); gap bound 0.9
        let h = Array2::from_shape_fn((2, 2), |(i, j)| if i == j && i == 1 { ONE } else { ZERO });
        let cfg = PhaseEstimationConfig::for_bound(1.0, 0.0, 0.9, 0.05).unwrap();
        let o = ReflectionOracle::from_hermitian(&h, 1.0, &cfg, OracleMode::PhaseEstimationBased).unwrap();
        let rho = density(&basis(2, 0));
        let out = o.channel(&rho, PI).unwrap();
        let trace: C64 = (0..2).map(|i| out[[i, i]]).sum();
        assert!((trace - ONE).norm() < 1e-10);
        assert!(o.acceptance()[0] > 0.95 && o.acceptance()[1] < 0.05);
    }

    #[test]
    fn padded_start_has_pad_ground_state() {
        let h = Array2::from_shape_fn((2, 2), |(i, j)| if i == j { C64::new(i as f64, 0.0) } else { ZERO });
        let pad = vec![C64::new(0.6, 0.0), C64::new(0.8, 0.0)];
        let hs = padded_start_hamiltonian(&h, &pad, 0.5);
        let e = Eigensystem::from_hermitian(&hs).unwrap();
        assert!(e.values[0].abs() < 1e-12 && (e.values[1] - 0.5).abs() < 1e-12);
        let g = e.vector(0);
        let expected = kron_vec(&basis(2, 0), &pad);
        assert!((exact::fidelity(g.as_slice().unwrap(), &expected) - 1.0).abs() < 1e-12);
    }
}
