use std::process::ExitCode;
use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use siteprep::exact::{self, Eigensystem};
use siteprep::lattice::{
    build_hamiltonian, free_dispersion, periodic_momenta, reference_spec, single_particle_matrix, Boundary, ModelSpec,
    REFERENCE_POINTS,
};
use siteprep::linalg;
use siteprep::mps::{compile_mpo, dmrg_with, epsilon_measure, DmrgConfig, MatrixProductState};
use siteprep::observables::correlator::two_point_correlator;
use siteprep::observables::energy::{fit_energy_extrapolation, EnergyModel};
use siteprep::observables::fit::{default_window, fit_correlation_length, CorrelationFit};
use siteprep::overlap::{consecutive_overlaps, pad_state, Engine, OverlapOptions, PadKind};
use siteprep::pauli::{Pauli, PauliString, PauliSumOperator};
use siteprep::stateprep::{
    fixed_point_amplify, phase_estimate_in, prepare_vacuum, Decision, EnergyPredictor, FixedPointConfig, OracleMode,
    PhaseEstimationConfig, PrepOptions, ReflectionOracle,
};

const SPACING: f64 = 0.02;

type Outcome = Result<(bool, String), String>;

fn solve(spec: &ModelSpec, max_bond: usize) -> Result<(MatrixProductState, f64, f64), String> {
    let op = build_hamiltonian(spec).map_err(|e| e.to_string())?;
    let mpo = compile_mpo(&op, spec.qubits_per_site()).map_err(|e| e.to_string())?;
    let cfg = DmrgConfig {
        epsilon_goal: 1e-12,
        max_bond,
        ..DmrgConfig::default()
    };
    let (state, report) = dmrg_with(&mpo, &cfg).map_err(|e| e.to_string())?;
    Ok((state, report.energy, report.epsilon))
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for (m0, g2) in REFERENCE_POINTS {
        for n in 2..=5 {
            let t = Instant::now();
            let spec = reference_spec(n, SPACING, m0, g2);
            let op = build_hamiltonian(&spec).map_err(|e| e.to_string())?;
            let dense = exact::ground_state_dense(&op).map_err(|e| e.to_string())?;
            let (_, e, _) = solve(&spec, 64)?;
            worst = worst.max(((e - dense.ground_energy) / dense.ground_energy).abs());
            slowest = slowest.max(t.elapsed().as_secs_f64());
        }
    }
    Ok((
        worst <= 1e-8 && slowest < 60.0,
        format!("max relative difference {worst:.2e} (tol 1e-8), slowest instance {slowest:.2}s"),
    ))
}

fn free_dispersion_check() -> Outcome {
    let mut worst: f64 = 0.0;
    for r in [0.25, 0.5, 1.0] {
        let spec = ModelSpec {
            n_sites: 6,
            spacing: 0.1,
            bare_mass: 0.3,
            coupling_sq: 0.0,
            wilson_r: r,
            flavors: 1,
            boundary: Boundary::Periodic,
        };
        let op = build_hamiltonian(&spec).map_err(|e| e.to_string())?;
        let h = single_particle_matrix(&op).map_err(|e| e.to_string())?;
        let (levels, _) = linalg::eigh(&h).map_err(|e| e.to_string())?;
        let mut expected: Vec<f64> = periodic_momenta(&spec)
            .iter()
            .flat_map(|&p| {
                let w = free_dispersion(&spec, p);
                [-w, w]
            })
            .collect();
        expected.sort_by(f64::total_cmp);
        for (got, want) in levels.iter().zip(&expected) {
            worst = worst.max((got - want).abs());
        }
    }
    Ok((worst <= 1e-10, format!("12 modes, r in {{0.25, 0.5, 1}}: max level error {worst:.2e} (tol 1e-10)")))
}

fn correlation_fits() -> Result<Vec<CorrelationFit>, String> {
    correlation_fits_at(50)
}

fn correlation_fits_at(n: usize) -> Result<Vec<CorrelationFit>, String> {
    REFERENCE_POINTS
        .iter()
        .map(|&(m0, g2)| {
            let spec = reference_spec(n, SPACING, m0, g2);
            let (state, _, eps) = solve(&spec, 48)?;
            let series = two_point_correlator(&state, &spec, eps).map_err(|e| e.to_string())?;
            fit_correlation_length(&series, default_window(SPACING, n), SPACING, n).map_err(|e| e.to_string())
        })
        .collect()
}

fn correlator_form(fits: &[CorrelationFit]) -> Outcome {
    let l = 50.0 * SPACING;
    let mut ok = true;
    let mut detail = String::new();
    for (&(m0, g2), f) in REFERENCE_POINTS.iter().zip(fits) {
        let chi = f.corr_length_chi;
        ok &= f.relative_residual <= 0.05 && chi >= 2.0 * SPACING && chi <= l / 3.0;
        detail += &format!(
            "({m0}, {g2}) chi/a {:.3} rel {:.2e}; ",
            chi / SPACING,
            f.relative_residual
        );
    }
    let ordered = fits[1].corr_length_chi < fits[0].corr_length_chi;
    detail += &format!("larger m0 gives smaller chi: {ordered}");
    Ok((ok && ordered, detail))
}

fn overlap_plateau() -> Outcome {
    let uniform = pad_state(PadKind::Uniform, 1).map_err(|e| e.to_string())?;
    let adapted = pad_state(PadKind::SymmetryAdapted, 1).map_err(|e| e.to_string())?;
    let opts = OverlapOptions {
        dmrg: DmrgConfig {
            epsilon_goal: 1e-12,
            max_bond: 48,
            ..DmrgConfig::default()
        },
        ..OverlapOptions::default()
    };
    let mut ok = true;
    let mut detail = String::new();
    for (m0, g2) in REFERENCE_POINTS {
        let template = reference_spec(2, SPACING, m0, g2);
        let s = consecutive_overlaps(&template, 2..=16, &uniform, Engine::Dmrg, &opts).map_err(|e| e.to_string())?;
        if let Some(why) = &s.failure {
            return Err(why.clone());
        }
        ok &= s.eta_estimate > 0.0 && s.eta_spread <= 0.1 * s.eta_estimate;
        detail += &format!("({m0}, {g2}) eta {:.5} spread {:.1e}; ", s.eta_estimate, s.eta_spread);

        let u = consecutive_overlaps(&template, 4..=4, &uniform, Engine::Dense, &opts).map_err(|e| e.to_string())?;
        let a = consecutive_overlaps(&template, 4..=4, &adapted, Engine::Dense, &opts).map_err(|e| e.to_string())?;
        let ratio = a.overlaps[0] / u.overlaps[0];
        ok &= (ratio - 2f64.sqrt()).abs() <= 1e-6;
        detail += &format!("ratio at N=4 {ratio:.9}; ");
    }
    Ok((ok, detail))
}

fn energy_predictability(fits: &[CorrelationFit]) -> Outcome {
    let mut ok = true;
    let mut detail = String::new();
    for (&(m0, g2), f) in REFERENCE_POINTS.iter().zip(fits) {
        let mut energies = Vec::new();
        for n in 2..=16 {
            energies.push((n, solve(&reference_spec(n, SPACING, m0, g2), 48)?.1));
        }
        let gap = 1.0 / f.corr_length_chi;
        let lin = fit_energy_extrapolation(&energies, EnergyModel::Linear, gap).map_err(|e| e.to_string())?;
        let cas = fit_energy_extrapolation(&energies, EnergyModel::Casimir, gap).map_err(|e| e.to_string())?;
        ok &= lin.threshold_size.is_some() && cas.threshold_size.is_some() && cas.residual_rms <= lin.residual_rms;
        detail += &format!(
            "({m0}, {g2}) thresholds {:?}/{:?} rms {:.2e}/{:.2e}; ",
            lin.threshold_size, cas.threshold_size, lin.residual_rms, cas.residual_rms
        );
    }
    Ok((ok, detail))
}

fn error_bound() -> Outcome {
    let spec = reference_spec(4, SPACING, 0.2, 1.5);
    let op = build_hamiltonian(&spec).map_err(|e| e.to_string())?;
    let mpo = compile_mpo(&op, spec.qubits_per_site()).map_err(|e| e.to_string())?;
    let eig = Eigensystem::of_operator(&op).map_err(|e| e.to_string())?;
    let (g, top) = (eig.vector(0), eig.vector(eig.dim() - 1));
    let mut ok = true;
    let mut ratios = Vec::new();
    for delta in [1e-2, 1e-3, 1e-4] {
        let mut psi: Vec<C64> = g.iter().zip(top.iter()).map(|(a, b)| a + b * delta).collect();
        linalg::normalize(&mut psi);
        let state = MatrixProductState::from_statevector(&psi, &spec_dims(&spec)).map_err(|e| e.to_string())?;
        let eps = epsilon_measure(&state, &mpo).map_err(|e| e.to_string())?;
        ok &= delta <= eps.sqrt();
        ratios.push(eps / (delta * delta));
    }
    let (lo, hi) = ratios.iter().fold((f64::MAX, 0f64), |(l, h), &r| (l.min(r), h.max(r)));
    ok &= hi <= 2.0 * lo;
    Ok((ok, format!("eps/delta^2 = {ratios:.4?}")))
}

fn spec_dims(spec: &ModelSpec) -> Vec<usize> {
    vec![spec.site_dim(); spec.n_sites]
}

/// Transverse-field chain on 4 qubits.
fn four_qubit_instance() -> PauliSumOperator {
    let mut terms = Vec::new();
    for q in 0..4 {
        terms.push((0.7 + 0.1 * q as f64, PauliString::from_ops(4, [(q, Pauli::X)])));
        if q < 3 {
            terms.push((1.0, PauliString::from_ops(4, [(q, Pauli::Z), (q + 1, Pauli::Z)])));
        }
    }
    PauliSumOperator::from_terms(4, terms).expect("valid operator")
}

fn phase_estimation_decisions() -> Outcome {
    let op = four_qubit_instance();
    let eig = Eigensystem::of_operator(&op).map_err(|e| e.to_string())?;
    let gap = eig.values[1] - eig.values[0];
    let w = op.one_norm();
    let trials = 1000;
    let mut ok = true;
    let mut detail = format!("gap {gap:.3}; ");
    for eps in [0.1, 0.01] {
        let cfg = PhaseEstimationConfig::for_bound(w, eig.values[0], 0.9 * gap, eps).map_err(|e| e.to_string())?;
        let mut errors = 0;
        for t in 0..trials {
            let k = t % 4;
            let state: Vec<C64> = eig.vector(k).to_vec();
            let pe = phase_estimate_in(&eig, w, &state, &cfg, t as u64).map_err(|e| e.to_string())?;
            let want = if k == 0 { Decision::Ground } else { Decision::NotGround };
            errors += usize::from(pe.decision != want);
        }
        let rate = errors as f64 / trials as f64;
        ok &= rate <= eps;
        detail += &format!("eps {eps}: error rate {rate:.4} over {trials} trials; ");
    }
    Ok((ok, detail))
}

fn projector_oracle(target: &[C64]) -> Result<ReflectionOracle, String> {
    let d = target.len();
    let h = Array2::from_shape_fn((d, d), |(i, j)| {
        let id = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        id - target[i] * target[j].conj()
    });
    let cfg = PhaseEstimationConfig::for_bound(1.0, 0.0, 1.0, 0.1).map_err(|e| e.to_string())?;
    ReflectionOracle::from_hermitian(&h, 1.0, &cfg, OracleMode::Ideal).map_err(|e| e.to_string())
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn fixed_point_search() -> Outcome {
    let d = 16;
    let target = linalg::random_vector(d, 11);
    let mut ok = true;
    let mut detail = String::new();
    for eta in [0.1f64, 0.2, 0.4] {
        // start = cos θ |t> + sin θ |t⊥> with |<t|s>| = eta
        let mut perp = linalg::random_vector(d, 12);
        let proj = linalg::dot(&target, &perp);
        linalg::axpy(-proj, &target, &mut perp);
        linalg::normalize(&mut perp);
        let s = (1.0 - eta * eta).sqrt();
        let start: Vec<C64> = target.iter().zip(&perp).map(|(t, p)| t * eta + p * s).collect();
        let (t_oracle, s_oracle) = (projector_oracle(&target)?, projector_oracle(&start)?);
        let epsilons = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
        let (mut logs, mut calls) = (Vec::new(), Vec::new());
        let mut worst_gap: f64 = f64::MAX;
        for eps in epsilons {
            let cfg = FixedPointConfig::new(eta, eps).map_err(|e| e.to_string())?;
            let (out, c) = fixed_point_amplify(&start, &t_oracle, &s_oracle, &cfg).map_err(|e| e.to_string())?;
            let infidelity = 1.0 - exact::fidelity(&target, &out);
            ok &= infidelity <= eps;
            worst_gap = worst_gap.min(eps - infidelity);
            logs.push((1.0 / eps).ln());
            calls.push(c as f64);
        }
        let whole = slope(&logs, &calls);
        let (lo, hi) = (slope(&logs[..5], &calls[..5]), slope(&logs[3..], &calls[3..]));
        // calls = L - 1 with L ≈ ln(2/sqrt ε)/η, so d calls / d ln(1/ε) = 1/(2η)
        let predicted = 0.5 / eta;
        let within = |s: f64| (s / predicted - 1.0).abs() <= 0.2;
        ok &= within(whole) && within(lo) && within(hi);
        detail += &format!("eta {eta}: slope {whole:.2} (low {lo:.2}, high {hi:.2}, ideal {predicted:.2}); ");
    }
    Ok((ok, detail))
}

fn end_to_end() -> Outcome {
    let pad = pad_state(PadKind::Uniform, 1).map_err(|e| e.to_string())?;
    let eps = 1e-3;
    let mut ok = true;
    let mut detail = String::new();
    let started = Instant::now();
    for (m0, g2) in REFERENCE_POINTS {
        let template = reference_spec(2, SPACING, m0, g2);
        for (mode, factor) in [(OracleMode::Ideal, 1.0), (OracleMode::PhaseEstimationBased, 5.0)] {
            let (_, trace) = prepare_vacuum(
                &template,
                2,
                5,
                &pad,
                &EnergyPredictor::Exact,
                eps,
                mode,
                &PrepOptions::default(),
            )
            .map_err(|e| e.to_string())?;
            let bound = trace.schedule_bound_total();
            ok &= trace.aborted.is_none()
                && trace.final_fidelity >= 1.0 - factor * eps
                && trace.oracle_calls_total <= 2 * bound;
            detail += &format!(
                "({m0}, {g2}) {}: fidelity {:.6} calls {}/{}; ",
                mode.label(),
                trace.final_fidelity,
                trace.oracle_calls_total,
                bound
            );
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ok &= secs < 600.0;
    detail += &format!("{secs:.1}s");
    Ok((ok, detail))
}

fn determinism() -> Outcome {
    let (fits, again) = (correlation_fits_at(24)?, correlation_fits_at(24)?);
    let same = fits
        .iter()
        .zip(&again)
        .all(|(a, b)| a.corr_length_chi.to_bits() == b.corr_length_chi.to_bits() && a.amplitude_b.to_bits() == b.amplitude_b.to_bits());
    let pad = pad_state(PadKind::Uniform, 1).map_err(|e| e.to_string())?;
    let template = reference_spec(2, SPACING, 0.2, 1.5);
    let run = || -> Result<String, String> {
        let (_, t) = prepare_vacuum(
            &template,
            2,
            4,
            &pad,
            &EnergyPredictor::Exact,
            1e-3,
            OracleMode::PhaseEstimationBased,
            &PrepOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        Ok(t.csv_rows())
    };
    let trace_same = run()? == run()?;
    Ok((
        same && trace_same,
        format!("N=24 fits bitwise equal: {same}; preparation trace rows equal: {trace_same}"),
    ))
}

fn report(criterion: u32, title: &str, outcome: Outcome, started: Instant) -> bool {
    let secs = started.elapsed().as_secs_f64();
    let (status, detail, pass) = match outcome {
        Ok((true, d)) => ("PASS", d, true),
        Ok((false, d)) => ("FAIL", d, false),
        Err(e) => ("FAIL", format!("error: {e}"), false),
    };
    println!("criterion {criterion:>2} [{status}] {title} ({secs:.1}s): {detail}");
    pass
}

fn main() -> ExitCode {
    // libtest flags such as --list are not supported; a listing request
    // gets an empty list so that tooling does not run the suite twice
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut all = true;
    let t = Instant::now();
    all &= report(1, "oracle equivalence", oracle_equivalence(), t);
    let t = Instant::now();
    all &= report(2, "free-theory dispersion", free_dispersion_check(), t);
    let t = Instant::now();
    let fits = correlation_fits();
    let fits_outcome = |f: fn(&[CorrelationFit]) -> Outcome| match &fits {
        Ok(v) => f(v),
        Err(e) => Err(e.clone()),
    };
    all &= report(3, "correlator form", fits_outcome(correlator_form), t);
    let t = Instant::now();
    all &= report(4, "overlap plateau", overlap_plateau(), t);
    let t = Instant::now();
    all &= report(5, "energy predictability", fits_outcome(energy_predictability), t);
    let t = Instant::now();
    all &= report(6, "error-analysis bound", error_bound(), t);
    let t = Instant::now();
    all &= report(7, "phase-estimation decisions", phase_estimation_decisions(), t);
    let t = Instant::now();
    all &= report(8, "fixed-point amplification", fixed_point_search(), t);
    let t = Instant::now();
    all &= report(9, "end-to-end preparation", end_to_end(), t);
    let t = Instant::now();
    all &= report(10, "determinism", determinism(), t);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
