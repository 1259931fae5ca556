use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter};

use serde::Serialize;
use siteprep::exact::{self, SpectrumResult, LANCZOS_CAP};
use siteprep::lattice::{build_hamiltonian, ModelSpec};
use siteprep::mps::{compile_mpo, dmrg_with, epsilon_measure, DmrgConfig, DmrgReport, MatrixProductState};
use siteprep::observables::{
    default_window, fit_correlation_length, fit_energy_extrapolation, two_point_correlator, CorrelationFit, EnergyModel,
};
use siteprep::overlap::{
    consecutive_overlaps, eta_vs_correlation, pad_state, Engine, EtaRow, OverlapOptions, OverlapSeries, PadKind,
    ParamPoint,
};
use siteprep::stateprep::{prepare_vacuum, EnergyPredictor, PrepOptions, PrepTrace};

use crate::config::{ExperimentConfig, ModelSection};
use crate::output::{field, read_table, tag, OutputDir};
use crate::CliError;

pub const CORRELATOR_HEADER: &str = "separation,value,error_bar,x,y";
pub const FIT_HEADER: &str =
    "m0,g0_sq,n_sites,spacing,amplitude_b,chi,chi_over_a,window_lo,window_hi,relative_residual,points,epsilon";
pub const ENERGY_SUMMARY_HEADER: &str = "model,residual_rms,threshold_size,half_gap,n_points";
pub const PREP_SUMMARY_HEADER: &str =
    "m0,g0_sq,n0,n_final,eps,mode,oracle_calls_total,schedule_bound_total,final_fidelity,branch_weight,aborted";

fn numerical(e: siteprep::Error) -> CliError {
    CliError::Numerical(e.to_string())
}

fn dmrg_config(cfg: &ExperimentConfig) -> DmrgConfig {
    DmrgConfig {
        epsilon_goal: cfg.solver.epsilon_goal,
        max_bond: cfg.solver.max_bond,
        seed: cfg.solver.seed,
        ..DmrgConfig::default()
    }
}

fn at_point(model: &ModelSection, m0: f64, g2: f64) -> ModelSpec {
    ModelSpec {
        bare_mass: m0,
        coupling_sq: g2,
        ..model.spec()
    }
}

fn checkpoint_name(spec: &ModelSpec) -> String {
    format!("state_{}_n={}.mps", tag(spec.bare_mass, spec.coupling_sq), spec.n_sites)
}

enum Solved {
    Dense(SpectrumResult),
    Dmrg(DmrgReport),
}

fn solve_one(spec: &ModelSpec, cfg: &ExperimentConfig) -> Result<(Solved, MatrixProductState), siteprep::Error> {
    let h = build_hamiltonian(spec)?;
    match cfg.solver.engine {
        Engine::Dense => {
            let n = h.n_qubits();
            let res = if n <= cfg.solver.dense_cap {
                exact::ground_state_dense_capped(&h, cfg.solver.dense_cap)?
            } else if n <= LANCZOS_CAP {
                exact::ground_state_lanczos(&h, 1e-10, cfg.solver.seed)?
            } else {
                return Err(siteprep::Error::CapExceeded {
                    qubits: n,
                    cap: LANCZOS_CAP,
                });
            };
            let state = MatrixProductState::from_statevector(
                res.ground_vector.as_slice().expect("contiguous"),
                &vec![spec.site_dim(); spec.n_sites],
            )?;
            Ok((Solved::Dense(res), state))
        }
        Engine::Dmrg => {
            let mpo = compile_mpo(&h, spec.qubits_per_site())?;
            let (state, report) = dmrg_with(&mpo, &dmrg_config(cfg))?;
            Ok((Solved::Dmrg(report), state))
        }
    }
}

fn write_checkpoint(out: &OutputDir, spec: &ModelSpec, state: &MatrixProductState) -> Result<(), CliError> {
    let p = out.path(&checkpoint_name(spec));
    let f = File::create(&p).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display())))?;
    state.write_checkpoint(BufWriter::new(f)).map_err(numerical)
}

/// Ground states for each size in range: one table row and one checkpoint
/// per size.
pub fn solve(cfg: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let template = cfg.model.spec();
    let (first, last) = cfg.sizes();
    let t = tag(template.bare_mass, template.coupling_sq);
    let (name, header) = match cfg.solver.engine {
        Engine::Dense => (format!("spectrum_{t}.csv"), SpectrumResult::CSV_HEADER),
        Engine::Dmrg => (format!("dmrg_{t}.csv"), DmrgReport::CSV_HEADER),
    };
    let mut body = String::new();
    let mut failure = None;
    for n in first..=last {
        let spec = template.with_sites(n);
        match solve_one(&spec, cfg) {
            Ok((solved, state)) => {
                let row = match solved {
                    Solved::Dense(r) => r.csv_row(n),
                    Solved::Dmrg(r) => r.csv_row(n),
                };
                let _ = writeln!(body, "{row}");
                write_checkpoint(out, &spec, &state)?;
            }
            Err(e) => {
                failure = Some(format!("size {n}: {e}"));
                break;
            }
        }
    }
    if let Some(f) = &failure {
        let _ = writeln!(body, "# failed {f}");
    }
    out.write_csv(&name, header, &body)?;
    match failure {
        Some(f) => Err(CliError::Numerical(format!("solve stopped early at {f}"))),
        None => Ok(()),
    }
}

fn grid_or(cfg: &ExperimentConfig, fallback: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    cfg.analysis.grid.clone().unwrap_or(fallback)
}

/// Default correlate grid: `m0 ∈ {0.2, 0.3, 0.4}`, `g0² ∈ {0, 0.5, ..., 2}`.
pub fn default_correlate_grid() -> Vec<[f64; 2]> {
    let mut g = Vec::new();
    for m0 in [0.2, 0.3, 0.4] {
        for g2 in [0.0, 0.5, 1.0, 1.5, 2.0] {
            g.push([m0, g2]);
        }
    }
    g
}

fn load_or_solve(
    spec: &ModelSpec,
    cfg: &ExperimentConfig,
    out: &OutputDir,
) -> Result<(MatrixProductState, f64), siteprep::Error> {
    let h = build_hamiltonian(spec)?;
    let mpo = compile_mpo(&h, spec.qubits_per_site())?;
    let p = out.path(&checkpoint_name(spec));
    let state = if p.exists() {
        MatrixProductState::read_checkpoint(BufReader::new(File::open(&p)?))?
    } else {
        solve_one(spec, cfg)?.1
    };
    let eps = epsilon_measure(&state, &mpo)?;
    Ok((state, eps))
}

/// Correlators and `b K0(Δx/χ)` fits over the parameter grid.
pub fn correlate(cfg: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let grid = grid_or(cfg, default_correlate_grid());
    let mut summary = String::new();
    let mut failures = Vec::new();
    for [m0, g2] in grid {
        let spec = at_point(&cfg.model, m0, g2);
        let window = cfg
            .analysis
            .fit_window
            .map(|[a, b]| (a, b))
            .unwrap_or_else(|| default_window(spec.spacing, spec.n_sites));
        let result = load_or_solve(&spec, cfg, out).and_then(|(state, eps)| {
            let series = two_point_correlator(&state, &spec, eps)?;
            Ok((series, eps))
        });
        let (series, eps) = match result {
            Ok(x) => x,
            Err(e) => {
                failures.push(format!("({m0}, {g2}): {e}"));
                continue;
            }
        };
        let mut body = String::new();
        for i in 0..series.len() {
            let (x, y) = series.pairs[i];
            let _ = writeln!(
                body,
                "{:.15e},{:.15e},{:.15e},{x},{y}",
                series.separations[i], series.values[i], series.error_bars[i]
            );
        }
        out.write_csv(&format!("correlator_{}.csv", tag(m0, g2)), CORRELATOR_HEADER, &body)?;
        match fit_correlation_length(&series, window, spec.spacing, spec.n_sites) {
            Ok(f) => {
                let _ = writeln!(
                    summary,
                    "{m0},{g2},{},{},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{},{:.6e}",
                    spec.n_sites,
                    spec.spacing,
                    f.amplitude_b,
                    f.corr_length_chi,
                    f.corr_length_chi / spec.spacing,
                    window.0,
                    window.1,
                    f.relative_residual,
                    f.points,
                    eps
                );
            }
            Err(e) => failures.push(format!("fit at ({m0}, {g2}): {e}")),
        }
    }
    for f in &failures {
        let _ = writeln!(summary, "# failed {f}");
    }
    out.write_csv("correlation_fits.csv", FIT_HEADER, &summary)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(failures.join("; ")))
    }
}

fn read_fits(out: &OutputDir) -> Result<BTreeMap<ParamPoint, (CorrelationFit, f64)>, String> {
    let rows = read_table(&out.path("correlation_fits.csv"))?;
    let mut map = BTreeMap::new();
    for r in rows {
        let point = ParamPoint {
            bare_mass: field(&r, "m0")?,
            coupling_sq: field(&r, "g0_sq")?,
        };
        let fit = CorrelationFit {
            amplitude_b: field(&r, "amplitude_b")?,
            corr_length_chi: field(&r, "chi")?,
            fit_window: (field(&r, "window_lo")?, field(&r, "window_hi")?),
            residual_norm: f64::NAN,
            relative_residual: field(&r, "relative_residual")?,
            points: field(&r, "points")? as usize,
            covariance: [[f64::NAN; 2]; 2],
        };
        map.insert(point, (fit, field(&r, "spacing")?));
    }
    Ok(map)
}

fn pad_for(cfg: &ExperimentConfig, kind: PadKind) -> Result<siteprep::overlap::Pad, CliError> {
    pad_state(kind, cfg.model.flavors)
        .map_err(|e| CliError::Config(format!("[analysis] pad: {e}")))
}

/// Padded consecutive overlaps per grid point, their plateau summary, and
/// the η-versus-χ table when correlation fits are present.
pub fn overlap(cfg: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let grid = grid_or(cfg, vec![[cfg.model.bare_mass, cfg.model.coupling_sq]]);
    let (first, last) = cfg.sizes();
    let pad = pad_for(cfg, cfg.analysis.pad)?;
    let opts = OverlapOptions {
        dmrg: dmrg_config(cfg),
        lanczos_tol: 1e-10,
        seed: cfg.solver.seed,
    };
    let mut rows = String::new();
    let mut summary = String::new();
    let mut failures = Vec::new();
    let mut by_point = BTreeMap::new();
    for [m0, g2] in grid {
        let spec = at_point(&cfg.model, m0, g2);
        let series = consecutive_overlaps(&spec, first..=last, &pad, cfg.solver.engine, &opts).map_err(numerical)?;
        rows.push_str(&series.csv_rows());
        let _ = writeln!(summary, "{}", series.summary_row());
        if let Some(f) = &series.failure {
            failures.push(format!("({m0}, {g2}) {f}"));
        }
        by_point.insert(
            ParamPoint {
                bare_mass: m0,
                coupling_sq: g2,
            },
            series,
        );
    }
    for f in &failures {
        let _ = writeln!(summary, "# failed {f}");
    }
    let pad_label = cfg.analysis.pad.label();
    out.write_csv(&format!("overlaps_{pad_label}.csv"), OverlapSeries::CSV_HEADER, &rows)?;
    out.write_csv(
        &format!("overlap_summary_{pad_label}.csv"),
        OverlapSeries::SUMMARY_HEADER,
        &summary,
    )?;

    if out.path("correlation_fits.csv").exists() {
        let fits = read_fits(out).map_err(CliError::Runtime)?;
        let shared: BTreeMap<ParamPoint, OverlapSeries> = by_point
            .into_iter()
            .filter(|(k, _)| fits.contains_key(k))
            .collect();
        let mut table = String::new();
        for (k, s) in &shared {
            let (fit, spacing) = &fits[k];
            let one_series = BTreeMap::from([(*k, s.clone())]);
            let one_fit = BTreeMap::from([(*k, fit.clone())]);
            for row in eta_vs_correlation(&one_series, &one_fit, *spacing).map_err(numerical)? {
                let _ = writeln!(table, "{}", row.csv_row());
            }
        }
        out.write_csv(&format!("eta_vs_chi_{pad_label}.csv"), EtaRow::CSV_HEADER, &table)?;
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(failures.join("; ")))
    }
}

fn energy_table(cfg: &ExperimentConfig, out: &OutputDir) -> Result<Vec<(usize, f64)>, CliError> {
    let t = tag(cfg.model.bare_mass, cfg.model.coupling_sq);
    let path = match &cfg.analysis.energies {
        Some(p) => p.clone(),
        None => {
            let order = match cfg.solver.engine {
                Engine::Dmrg => [format!("dmrg_{t}.csv"), format!("spectrum_{t}.csv")],
                Engine::Dense => [format!("spectrum_{t}.csv"), format!("dmrg_{t}.csv")],
            };
            order
                .iter()
                .map(|n| out.path(n))
                .find(|p| p.exists())
                .ok_or_else(|| CliError::Config(format!("no energy table for {t}; run solve first or set [analysis] energies")))?
        }
    };
    let rows = read_table(&path).map_err(CliError::Config)?;
    rows.iter()
        .map(|r| {
            let n = field(r, "n_sites")? as usize;
            let e = field(r, "energy").or_else(|_| field(r, "ground_energy"))?;
            Ok((n, e))
        })
        .collect::<Result<_, String>>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Finite-size energy extrapolations for each configured model.
pub fn energy_fit(cfg: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let data = energy_table(cfg, out)?;
    let t = tag(cfg.model.bare_mass, cfg.model.coupling_sq);
    let gap = match cfg.analysis.gap {
        Some(g) => g,
        None => {
            let fits = read_fits(out).map_err(|e| {
                CliError::Config(format!("no [analysis] gap and no correlation fit to derive 1/chi from: {e}"))
            })?;
            let key = ParamPoint {
                bare_mass: cfg.model.bare_mass,
                coupling_sq: cfg.model.coupling_sq,
            };
            let (fit, _) = fits
                .get(&key)
                .ok_or_else(|| CliError::Config("correlation_fits.csv lacks the model point".into()))?;
            1.0 / fit.corr_length_chi
        }
    };
    let mut summary = String::new();
    for label in &cfg.analysis.models {
        let model: EnergyModel = label.parse().map_err(|e: siteprep::Error| CliError::Config(e.to_string()))?;
        let fit = fit_energy_extrapolation(&data, model, gap).map_err(numerical)?;
        out.write_csv(
            &format!("energy_fit_{t}_{}.csv", model.label()),
            siteprep::observables::EnergyFit::CSV_HEADER,
            &fit.csv_rows().join("\n"),
        )?;
        let _ = writeln!(
            summary,
            "{},{:.15e},{},{:.15e},{}",
            model.label(),
            fit.residual_rms,
            fit.threshold_size.map(|t| t.to_string()).unwrap_or_else(|| "none".into()),
            fit.half_gap,
            fit.sizes.len()
        );
    }
    out.write_csv(&format!("energy_fit_summary_{t}.csv"), ENERGY_SUMMARY_HEADER, &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct PrepManifest<'a> {
    config_hash: &'a str,
    seed: u64,
    version: &'a str,
    model: &'a ModelSection,
    n0: usize,
    n_final: usize,
    eps: f64,
    oracle: &'a str,
    pad: &'a str,
    predictor: String,
    eta_floor: f64,
    gap_fraction: f64,
    dense_cap: usize,
    statevector_cap: usize,
}

/// Site-by-site preparation with its trace, summary and run manifest.
pub fn prepare(cfg: &ExperimentConfig, out: &OutputDir) -> Result<(), CliError> {
    let prep = cfg
        .prep
        .as_ref()
        .ok_or_else(|| CliError::Config("prepare needs a [prep] section".into()))?;
    let pad = pad_for(cfg, cfg.analysis.pad)?;
    let opts = PrepOptions {
        eta_floor: prep.eta_floor,
        gap_fraction: prep.gap_fraction,
    };
    let predictor = EnergyPredictor::Exact;
    let spec = cfg.model.spec();
    let (_, trace): (_, PrepTrace) = prepare_vacuum(
        &spec,
        prep.n0,
        prep.n_final,
        &pad,
        &predictor,
        prep.eps,
        prep.oracle,
        &opts,
    )
    .map_err(numerical)?;
    let stem = format!("prep_{}_{}", tag(spec.bare_mass, spec.coupling_sq), prep.oracle.label());
    out.write_csv(&format!("{stem}_trace.csv"), PrepTrace::CSV_HEADER, &trace.csv_rows())?;
    let summary = format!(
        "{},{},{},{},{},{},{},{},{:.15e},{:.15e},{}\n",
        spec.bare_mass,
        spec.coupling_sq,
        prep.n0,
        prep.n_final,
        prep.eps,
        prep.oracle.label(),
        trace.oracle_calls_total,
        trace.schedule_bound_total(),
        trace.final_fidelity,
        trace.branch_weight,
        trace.aborted.as_deref().unwrap_or("").replace(',', ";")
    );
    out.write_csv(&format!("{stem}_summary.csv"), PREP_SUMMARY_HEADER, &summary)?;
    let manifest = PrepManifest {
        config_hash: &out.manifest.config_hash,
        seed: out.manifest.seed,
        version: env!("CARGO_PKG_VERSION"),
        model: &cfg.model,
        n0: prep.n0,
        n_final: prep.n_final,
        eps: prep.eps,
        oracle: prep.oracle.label(),
        pad: cfg.analysis.pad.label(),
        predictor: predictor.label(),
        eta_floor: prep.eta_floor,
        gap_fraction: prep.gap_fraction,
        dense_cap: siteprep::exact::DENSE_CAP,
        statevector_cap: siteprep::mps::STATEVECTOR_CAP,
    };
    let text = format!(
        "{}\n{}",
        out.manifest.line(),
        toml::to_string(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?
    );
    out.write_raw(&format!("{stem}_manifest.toml"), &text)?;
    match trace.aborted {
        Some(why) => Err(CliError::Numerical(format!("preparation aborted: {why}"))),
        None => Ok(()),
    }
}
