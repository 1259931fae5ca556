//! Phase-estimation statistics, the exact oracle channel and the
//! fixed-point schedule.

use num_complex::Complex64 as C64;
use siteprep::exact::Eigensystem;
use siteprep::linalg::{self, random_vector};
use siteprep::pauli::{Pauli, PauliString, PauliSumOperator};
use siteprep::stateprep::{
    density, ground_oracle_reflection, phase_estimate_in, trace_distance, Decision, FixedPointConfig, OracleMode,
    PhaseEstimationConfig,
};

fn chain(n: usize) -> PauliSumOperator {
    let mut terms = Vec::new();
    for q in 0..n {
        terms.push((0.9, PauliString::from_ops(n, [(q, Pauli::X)])));
        terms.push((0.2 * q as f64, PauliString::from_ops(n, [(q, Pauli::Z)])));
        if q + 1 < n {
            terms.push((1.0, PauliString::from_ops(n, [(q, Pauli::Z), (q + 1, Pauli::Z)])));
        }
    }
    PauliSumOperator::from_terms(n, terms).unwrap()
}

#[test]
fn ground_decisions_follow_born_rule() {
    let op = chain(3);
    let eig = Eigensystem::of_operator(&op).unwrap();
    let gap = eig.values[1] - eig.values[0];
    let cfg = PhaseEstimationConfig::for_operator(&op, eig.values[0], 0.9 * gap, 1e-3).unwrap();
    let mut state = random_vector(8, 3);
    linalg::normalize(&mut state);
    let p0 = eig.coefficients(&state)[0].norm_sqr();
    let trials = 2000;
    let hits = (0..trials)
        .filter(|&s| {
            let pe = phase_estimate_in(&eig, op.one_norm(), &state, &cfg, s).unwrap();
            pe.decision == Decision::Ground
        })
        .count();
    let freq = hits as f64 / trials as f64;
    // five binomial standard deviations
    let sigma = (p0 * (1.0 - p0) / trials as f64).sqrt();
    assert!((freq - p0).abs() < 5.0 * sigma + 2e-3, "freq {freq} vs {p0}");
}

#[test]
fn post_state_of_ground_decision_is_ground() {
    let op = chain(3);
    let eig = Eigensystem::of_operator(&op).unwrap();
    let cfg = PhaseEstimationConfig::for_operator(&op, eig.values[0], 0.9 * (eig.values[1] - eig.values[0]), 1e-3)
        .unwrap();
    let mut state = random_vector(8, 4);
    linalg::normalize(&mut state);
    for seed in 0..20 {
        let pe = phase_estimate_in(&eig, op.one_norm(), &state, &cfg, seed).unwrap();
        if pe.decision == Decision::Ground {
            let c = eig.coefficients(&pe.post_state);
            assert!(c[0].norm_sqr() > 1.0 - 1e-9);
        }
    }
}

#[test]
fn exact_channel_is_close_to_ideal_reflection() {
    let op = chain(4);
    let eig = Eigensystem::of_operator(&op).unwrap();
    let gap = eig.values[1] - eig.values[0];
    let eps = 1e-2;
    let cfg = PhaseEstimationConfig::for_operator(&op, eig.values[0], 0.9 * gap, eps).unwrap();
    let pe = ground_oracle_reflection(&op, &cfg, OracleMode::PhaseEstimationBased).unwrap();
    let ideal = ground_oracle_reflection(&op, &cfg, OracleMode::Ideal).unwrap();
    let mut state = random_vector(16, 8);
    linalg::normalize(&mut state);
    for phi in [std::f64::consts::PI, 1.1] {
        let out = pe.channel(&density(&state), phi).unwrap();
        let want = density(&ideal.apply(&state, phi).unwrap());
        let d = trace_distance(&out, &want).unwrap();
        assert!(d <= 2.0 * eps, "phi {phi}: distance {d}");
    }
}

#[test]
fn branch_fidelity_lower_bounds_channel() {
    let op = chain(3);
    let eig = Eigensystem::of_operator(&op).unwrap();
    let cfg = PhaseEstimationConfig::for_operator(&op, eig.values[0], 0.9 * (eig.values[1] - eig.values[0]), 0.2)
        .unwrap();
    let pe = ground_oracle_reflection(&op, &cfg, OracleMode::PhaseEstimationBased).unwrap();
    let ideal = ground_oracle_reflection(&op, &cfg, OracleMode::Ideal).unwrap();
    let mut state = random_vector(8, 21);
    linalg::normalize(&mut state);
    let phi = 0.8;
    let target = ideal.apply(&state, phi).unwrap();
    let branch = pe.apply(&state, phi).unwrap();
    let f_branch: f64 = target.iter().zip(&branch).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr();
    let rho = pe.channel(&density(&state), phi).unwrap();
    let f_channel: f64 = (0..8)
        .flat_map(|i| (0..8).map(move |j| (i, j)))
        .map(|(i, j)| (target[i].conj() * rho[[i, j]] * target[j]).re)
        .sum();
    assert!(f_branch <= f_channel + 1e-10, "{f_branch} > {f_channel}");
}

#[test]
fn call_count_grows_as_epsilon_shrinks() {
    for eta in [0.05, 0.3, 0.9] {
        let calls: Vec<usize> = [0.5, 1e-1, 1e-2, 1e-4, 1e-8]
            .iter()
            .map(|&e| FixedPointConfig::new(eta, e).unwrap().calls())
            .collect();
        assert!(calls.windows(2).all(|w| w[0] <= w[1]), "{calls:?}");
    }
}
