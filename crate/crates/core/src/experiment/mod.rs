//! Experiment runner behind the `blockade-sim` CLI.

mod config;
mod output;

pub use config::{
    AxisRange, ExperimentConfig, ExperimentKind, ModelKind, Numerics, OutputFormat, OutputSpec, SweepAxes, Tuning,
    SPEC_VERSION,
};
pub use output::{
    complex_cells, complex_columns, read_table_csv, write_table_csv, Observable, RunOutput, SweepResult, Table,
};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::circuit_model::{
    derive_supermodes, lossless_levels, multiphoton_coefficient, multiphoton_rate, supermode_state,
    supermode_to_bare, CircuitParams, ModeBasis, Multiphoton, SupermodeParams, SupermodeState,
};
use crate::error::{Error, Result};
use crate::fockspace::{expectation, partial_trace, DensityMatrix, StateVector};
use crate::lindblad_dynamics::{
    evolve, g2_tau, EffectiveSteadyState, IntegratorOptions, LindbladModel, PortStatistics, Ports,
    SteadyStateOptions,
};
use crate::phase_space::{
    logarithmic_negativity, max_multiphoton_probability, nonclassical_depth_qubit, photon_probabilities, qpd,
    reduced_mode, PhotonStatistics, QubitDepth,
};

/// Output of [`run`] plus the warnings raised along the way.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output: RunOutput,
    pub warnings: Vec<String>,
}

/// Steady-state observables of the effective model.
#[derive(Debug, Clone)]
pub struct SteadyAnalysis {
    pub supermodes: SupermodeParams,
    pub state: EffectiveSteadyState,
    pub ports: PortStatistics,
    /// `(qubit, mode1, mode2)` in the bare basis, `2N - 1` levels per mode.
    pub bare: DensityMatrix,
    pub photons: PhotonStatistics,
    pub depth1: QubitDepth,
    pub negativity: f64,
}

/// Solve the steady state with `levels` per supermode and derive the
/// bare-basis statistics.
pub fn analyze_steady(p: &CircuitParams, levels: usize) -> Result<SteadyAnalysis> {
    let sp = derive_supermodes(p)?;
    let state = EffectiveSteadyState::solve(p, &sp, levels)?;
    let ports = state.port_statistics(p.gamma1, p.gamma2)?;
    let bare = supermode_to_bare(&state.joint(levels)?, &sp, lossless_levels(levels))?;
    let photons = photon_probabilities(&bare, &sp)?;
    let depth1 = nonclassical_depth_qubit(&reduced_mode(&bare, 1)?, 1.0)?;
    let negativity = logarithmic_negativity(&partial_trace(&bare, &[1, 2])?)?;
    Ok(SteadyAnalysis { supermodes: sp, state, ports, bare, photons, depth1, negativity })
}

/// Port statistics at one `(delta_plus, theta_drive)` point, keeping the
/// drive magnitudes of `p`.
pub fn sweep_point(p: &CircuitParams, delta_plus: f64, theta: f64, levels: usize) -> Result<PortStatistics> {
    let q = p.clone().with_drive_phase(p.eps1.norm(), p.eps2.norm(), theta).tuned(delta_plus);
    let sp = derive_supermodes(&q)?;
    EffectiveSteadyState::solve(&q, &sp, levels)?.port_statistics(q.gamma1, q.gamma2)
}

/// `(delta_plus, theta_drive)` map of `N1, N2, N3` and `g2_i(0)`. A failed
/// point is recorded as missing and reported in `warnings`.
pub fn sweep2d(p: &CircuitParams, axes: &SweepAxes, levels: usize, warnings: &mut Vec<String>) -> SweepResult {
    let a1 = axes.delta_plus.values();
    let a2 = axes.theta_drive.values();
    let points: Vec<(usize, usize)> = (0..a1.len()).flat_map(|i| (0..a2.len()).map(move |j| (i, j))).collect();
    let results: Vec<Result<PortStatistics>> =
        points.par_iter().map(|&(i, j)| sweep_point(p, a1[i], a2[j], levels)).collect();

    let names = ["N1", "N2", "N3", "g2_1", "g2_2", "g2_3"];
    let mut obs: Vec<Observable> =
        names.iter().map(|n| Observable { name: (*n).into(), values: Vec::with_capacity(points.len()) }).collect();
    for (&(i, j), r) in points.iter().zip(results) {
        let row: [Option<f64>; 6] = match r {
            Ok(s) => [Some(s.flux[0]), Some(s.flux[1]), Some(s.flux[2]), s.g2[0], s.g2[1], s.g2[2]],
            Err(e) => {
                let msg = format!("point delta_plus = {}, theta_drive = {}: {e}", a1[i], a2[j]);
                log::warn!("{msg}");
                warnings.push(msg);
                [None; 6]
            }
        };
        for (o, v) in obs.iter_mut().zip(row) {
            o.values.push(v);
        }
    }
    SweepResult {
        axis1_name: "delta_plus".into(),
        axis1: a1,
        axis2_name: "theta_drive".into(),
        axis2: a2,
        observables: obs,
    }
}

/// `E_c` of the steady state at coupling ratio `beta` with `Gbar` held
/// fixed and the hopping re-solved for splitting `delta2`.
pub fn negativity_at_beta(p: &CircuitParams, beta: f64, delta2: f64, delta_plus: f64, levels: usize) -> Result<f64> {
    Ok(analyze_steady(&circuit_at_beta(p, beta, delta2, delta_plus)?, levels)?.negativity)
}

pub fn circuit_at_beta(p: &CircuitParams, beta: f64, delta2: f64, delta_plus: f64) -> Result<CircuitParams> {
    let gbar = p.coupling1.hypot(p.coupling2);
    let norm = (1.0 + beta * beta).sqrt();
    let mut q = p.clone();
    q.coupling1 = gbar * beta / norm;
    q.coupling2 = gbar / norm;
    Ok(crate::circuit_model::hopping_for_splitting(&q, delta2)?.tuned(delta_plus))
}

/// One-drive variant: `eps2 = 0` with the capacitor removed (`g = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleDriveReport {
    pub delta2: f64,
    pub flux: [f64; 3],
    pub g2: [f64; 3],
    /// All three `g2_i(0)` below the blockade band `0.1`.
    pub blockaded: bool,
}

pub const BLOCKADE_BAND: f64 = 0.1;

pub fn single_drive_check(p: &CircuitParams, levels: usize) -> Result<SingleDriveReport> {
    let sp = derive_supermodes(p)?;
    single_drive_check_with(p, &sp, levels)
}

/// As [`single_drive_check`] with explicit supermode parameters, so the
/// splitting can be overridden for control runs.
pub fn single_drive_check_with(p: &CircuitParams, sp: &SupermodeParams, levels: usize) -> Result<SingleDriveReport> {
    let mut problems = Vec::new();
    if p.eps2.norm() != 0.0 {
        problems.push(format!("eps2 must be 0 for the single-drive check (got {})", p.eps2));
    }
    if p.hopping != 0.0 {
        problems.push(format!("g must be 0 for the single-drive check (got {})", p.hopping));
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let stats = EffectiveSteadyState::solve(p, sp, levels)?.port_statistics(p.gamma1, p.gamma2)?;
    let mut g2 = [0.0; 3];
    for k in 0..3 {
        g2[k] = stats.g2[k].ok_or(Error::UndefinedCorrelation { port: k + 1, flux: stats.flux[k] })?;
    }
    Ok(SingleDriveReport {
        delta2: sp.delta2,
        flux: stats.flux,
        g2,
        blockaded: g2.iter().all(|g| *g < BLOCKADE_BAND),
    })
}

fn integrator_options(cfg: &ExperimentConfig) -> IntegratorOptions {
    IntegratorOptions::with_tolerances(cfg.numerics.rtol, cfg.numerics.atol)
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| (*s).to_owned()).collect()
}

fn run_evolve(cfg: &ExperimentConfig, p: &CircuitParams) -> Result<Table> {
    let levels = cfg.numerics.fock_cutoff;
    let sp = derive_supermodes(p)?;
    let (model, ops) = match cfg.numerics.model {
        ModelKind::Effective => LindbladModel::effective(p, &sp, levels)?,
        ModelKind::Lab => LindbladModel::lab(p, levels)?,
    };
    let space = model.space().clone();
    let ground = StateVector::basis(&space, &[1, 0, 0])?;
    let psi1 = match ops.basis {
        ModeBasis::Supermode => StateVector::basis(&space, &[1, 1, 0])?,
        ModeBasis::Bare => supermode_state(&sp, &space, SupermodeState::Psi1Plus)?,
    };
    let times = cfg.numerics.t_grid.expect("validated").values();
    let traj = evolve(&model, &DensityMatrix::from_pure(&ground), &times, &integrator_options(cfg))?;

    let n_plus = &ops.a_plus.dagger() * &ops.a_plus;
    let n_minus = &ops.a_minus.dagger() * &ops.a_minus;
    let mut names = cols(&["t", "p_g00", "p_psi1_plus", "p_excited", "n_plus", "n_minus"]);
    names.extend(complex_columns("a_plus"));
    let mut table = Table::new(names);
    for (t, rho) in traj.times.iter().zip(&traj.states) {
        let excited = 0.5 * (1.0 + expectation(rho, &ops.sigma_z)?.re);
        let mut row = vec![
            Some(*t),
            Some(rho.population(&ground)),
            Some(rho.population(&psi1)),
            Some(excited),
            Some(expectation(rho, &n_plus)?.re),
            Some(expectation(rho, &n_minus)?.re),
        ];
        row.extend(complex_cells(expectation(rho, &ops.a_plus)?));
        table.push(row);
    }
    Ok(table)
}

fn run_steady(cfg: &ExperimentConfig, p: &CircuitParams) -> Result<Table> {
    let a = analyze_steady(p, cfg.numerics.fock_cutoff)?;
    let mut table = Table::new(cols(&[
        "N1",
        "N2",
        "N3",
        "g2_1",
        "g2_2",
        "g2_3",
        "p_g00",
        "p_psi1_plus",
        "max_p_multiphoton",
        "p1_ge2",
        "p2_ge2",
        "tau1",
        "s0_1",
        "E_c",
    ]));
    let f = a.ports.flux;
    let g00 = a.bare.diagonal(&[1, 0, 0]);
    table.push(vec![
        Some(f[0]),
        Some(f[1]),
        Some(f[2]),
        a.ports.g2[0],
        a.ports.g2[1],
        a.ports.g2[2],
        Some(g00),
        Some(a.photons.psi1_plus),
        Some(max_multiphoton_probability(&a.photons)),
        Some(a.photons.mode_multiphoton(1)),
        Some(a.photons.mode_multiphoton(2)),
        Some(a.depth1.tau),
        Some(a.depth1.s0),
        Some(a.negativity),
    ]);
    Ok(table)
}

fn run_g2tau(cfg: &ExperimentConfig, p: &CircuitParams, warnings: &mut Vec<String>) -> Result<Table> {
    let levels = cfg.numerics.fock_cutoff;
    let sp = derive_supermodes(p)?;
    let rho = EffectiveSteadyState::solve(p, &sp, levels)?.joint(levels)?;
    let (model, ops) = LindbladModel::effective(p, &sp, levels)?;
    let ports = Ports::new(&ops, p.gamma1, p.gamma2);
    let taus = cfg.numerics.tau_grid.expect("validated").values();
    let opts = integrator_options(cfg);
    let curves: Vec<Result<Vec<f64>>> =
        (1..=3).into_par_iter().map(|k| g2_tau(&model, &rho, &ports, k, &taus, &opts)).collect();
    let mut columns: Vec<Vec<Option<f64>>> = Vec::new();
    for (k, c) in curves.into_iter().enumerate() {
        match c {
            Ok(v) => columns.push(v.into_iter().map(Some).collect()),
            Err(e @ Error::UndefinedCorrelation { .. }) => {
                let msg = format!("port {}: {e}", k + 1);
                log::warn!("{msg}");
                warnings.push(msg);
                columns.push(vec![None; taus.len()]);
            }
            Err(e) => return Err(e),
        }
    }
    let mut table = Table::new(cols(&["tau", "g2_1", "g2_2", "g2_3"]));
    for (i, t) in taus.iter().enumerate() {
        table.push(vec![Some(*t), columns[0][i], columns[1][i], columns[2][i]]);
    }
    Ok(table)
}

fn run_qpd(cfg: &ExperimentConfig, p: &CircuitParams) -> Result<Table> {
    let a = analyze_steady(p, cfg.numerics.fock_cutoff)?;
    let rho = reduced_mode(&a.bare, cfg.numerics.mode)?;
    let mut table = Table::new(cols(&["s", "re_alpha", "im_alpha", "w"]));
    for &s in &cfg.numerics.s_values {
        let g = qpd(&rho, s, &cfg.numerics.qpd_grid)?;
        for (i, im) in g.im_axis.iter().enumerate() {
            for (j, re) in g.re_axis.iter().enumerate() {
                table.push(vec![Some(s), Some(*re), Some(*im), Some(g.values[(i, j)])]);
            }
        }
    }
    Ok(table)
}

fn run_negativity(cfg: &ExperimentConfig, warnings: &mut Vec<String>) -> Result<Table> {
    let tuning = cfg.tuning.unwrap_or(Tuning { delta_plus: 0.0, delta2: None });
    let delta2 = match tuning.delta2 {
        Some(d) => d,
        None => derive_supermodes(&cfg.circuit)?.delta2,
    };
    let levels = cfg.numerics.fock_cutoff;
    let rows: Vec<(f64, Result<(CircuitParams, f64)>)> = cfg
        .numerics
        .betas
        .par_iter()
        .map(|&b| {
            let r = circuit_at_beta(&cfg.circuit, b, delta2, tuning.delta_plus)
                .and_then(|q| analyze_steady(&q, levels).map(|a| (q, a.negativity)));
            (b, r)
        })
        .collect();
    let mut table = Table::new(cols(&["beta", "g", "G1", "G2", "E_c"]));
    for (b, r) in rows {
        match r {
            Ok((q, e)) => table.push(vec![Some(b), Some(q.hopping), Some(q.coupling1), Some(q.coupling2), Some(e)]),
            Err(e) => {
                let msg = format!("beta = {b}: {e}");
                log::warn!("{msg}");
                warnings.push(msg);
                table.push(vec![Some(b), None, None, None, None]);
            }
        }
    }
    Ok(table)
}

/// `|Gx B2(0, n)|` and `B1(1, n)` for `n = 1..=max_order`; `rate_mhz`
/// scales by `omega/2pi = 2500 MHz` for resonator 2.
fn run_rates(cfg: &ExperimentConfig) -> Result<Table> {
    let p = &cfg.circuit;
    let sp = derive_supermodes(p)?;
    let mhz_per_unit = 2500.0 / p.omega2;
    let mut table = Table::new(cols(&["n", "B1_1n", "B2_0n", "rate", "rate_mhz"]));
    for n in 1..=cfg.numerics.max_photon_order {
        let rate = multiphoton_rate(sp.g_x, sp.lambda, n)?;
        table.push(vec![
            Some(f64::from(n)),
            Some(multiphoton_coefficient(Multiphoton::B1, 1, n, sp.lambda)?),
            Some(multiphoton_coefficient(Multiphoton::B2, 0, n, sp.lambda)?),
            Some(rate),
            Some(rate * mhz_per_unit),
        ]);
    }
    Ok(table)
}

/// Execute a validated configuration on `jobs` worker threads.
pub fn run(cfg: &ExperimentConfig, jobs: usize) -> Result<RunReport> {
    let mut warnings = cfg.validate()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    pool.install(|| {
        let output = match cfg.experiment {
            ExperimentKind::RatesTable => RunOutput::Table(run_rates(cfg)?),
            ExperimentKind::NegativityVsBeta => RunOutput::Table(run_negativity(cfg, &mut warnings)?),
            kind => {
                let p = cfg.tuned_circuit()?;
                match kind {
                    ExperimentKind::Evolve => RunOutput::Table(run_evolve(cfg, &p)?),
                    ExperimentKind::Steady => RunOutput::Table(run_steady(cfg, &p)?),
                    ExperimentKind::G2tau => RunOutput::Table(run_g2tau(cfg, &p, &mut warnings)?),
                    ExperimentKind::Qpd => RunOutput::Table(run_qpd(cfg, &p)?),
                    ExperimentKind::Sweep2d => {
                        let axes = cfg.numerics.sweep.expect("validated");
                        RunOutput::Sweep(sweep2d(&p, &axes, cfg.numerics.fock_cutoff, &mut warnings))
                    }
                    _ => unreachable!(),
                }
            }
        };
        Ok(RunReport { output, warnings })
    })
}

#[derive(Debug, Serialize)]
struct SolverSettings {
    fock_cutoff: usize,
    rtol: f64,
    atol: f64,
    integrator: &'static str,
    steady_state: &'static str,
    steady_shift: f64,
    steady_tolerance: f64,
    steady_max_iter: usize,
}

/// Contents of `manifest.json`.
#[derive(Debug, Serialize)]
pub struct Manifest {
    tool: &'static str,
    version: &'static str,
    spec_version: u32,
    experiment: &'static str,
    config_sha256: String,
    output: PathBuf,
    format: OutputFormat,
    solver: SolverSettings,
    warnings: Vec<String>,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, output: &Path, warnings: &[String]) -> Self {
        let steady = SteadyStateOptions::default();
        Self {
            tool: "blockade-sim",
            version: env!("CARGO_PKG_VERSION"),
            spec_version: cfg.spec_version,
            experiment: cfg.experiment.name(),
            config_sha256: cfg.hash(),
            output: output.to_path_buf(),
            format: cfg.output.format,
            solver: SolverSettings {
                fock_cutoff: cfg.numerics.fock_cutoff,
                rtol: cfg.numerics.rtol,
                atol: cfg.numerics.atol,
                integrator: "Dormand-Prince 5(4), adaptive, dense output",
                steady_state: "shifted inverse iteration on a sparse LU of the Liouvillian",
                steady_shift: steady.shift,
                steady_tolerance: steady.tolerance,
                steady_max_iter: steady.max_iter,
            },
            warnings: warnings.to_vec(),
        }
    }
}

/// Write the result to `path` in `format` and `manifest.json` next to it.
/// Returns the manifest path.
pub fn write_outputs(cfg: &ExperimentConfig, report: &RunReport, path: &Path) -> Result<PathBuf> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match cfg.output.format {
        OutputFormat::Csv => write_table_csv(&report.output.to_table(), file)?,
        OutputFormat::Json => {
            let mut file = file;
            serde_json::to_writer_pretty(&mut file, &report.output)?;
            use std::io::Write;
            file.write_all(b"\n")?;
        }
    }
    let manifest_path = path.parent().unwrap_or(Path::new("")).join("manifest.json");
    let mut text = serde_json::to_string_pretty(&Manifest::new(cfg, path, &report.warnings))?;
    text.push('\n');
    std::fs::write(&manifest_path, text)?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::C64;

    fn sweep_config(count: usize) -> ExperimentConfig {
        let circuit = serde_json::to_string(&CircuitParams::reference()).unwrap();
        let text = format!(
            r#"{{"spec_version": 1, "experiment": "sweep2d", "circuit": {circuit},
                "tuning": {{"delta_plus": 0, "delta2": 10}},
                "numerics": {{"fock_cutoff": 4, "sweep": {{
                    "delta_plus": {{"start": -20, "stop": 20, "count": {count}}},
                    "theta_drive": {{"start": -3.141592653589793, "stop": 3.141592653589793, "count": {count}}}}}}},
                "output": {{"path": "sweep.csv"}}}}"#
        );
        ExperimentConfig::from_json_str(&text).unwrap()
    }

    #[test]
    fn serial_and_parallel_sweeps_agree_bitwise() {
        let cfg = sweep_config(4);
        let a = run(&cfg, 1).unwrap();
        let b = run(&cfg, 3).unwrap();
        assert_eq!(a.output, b.output);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_table_csv(&a.output.to_table(), &mut x).unwrap();
        write_table_csv(&b.output.to_table(), &mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn failed_point_becomes_null_and_a_warning() {
        let mut p = CircuitParams::reference();
        p.omega1 += 1.0; // breaks the frequency constraint at every point
        let axes = sweep_config(2).numerics.sweep.unwrap();
        let mut warnings = Vec::new();
        let s = sweep2d(&p, &axes, 3, &mut warnings);
        assert_eq!(warnings.len(), 4);
        assert!(s.observables.iter().all(|o| o.values.iter().all(Option::is_none)));
    }

    #[test]
    fn single_drive_preconditions() {
        let p = CircuitParams::reference();
        assert!(matches!(single_drive_check(&p, 4), Err(Error::Validation(v)) if v.len() == 2));
    }

    fn single_drive_circuit(eps1: f64) -> CircuitParams {
        let mut p = CircuitParams::reference();
        p.hopping = 0.0;
        p.omega1 = p.omega2;
        p.eps1 = C64::new(eps1, 0.0);
        p.eps2 = C64::new(0.0, 0.0);
        p.tuned(0.0)
    }

    #[test]
    fn single_drive_blockades_all_ports() {
        let p = single_drive_circuit(1.0);
        let r = single_drive_check(&p, 6).unwrap();
        // Delta2 = 4 Gx^2 / (3 Omega+) without hopping
        let sp = derive_supermodes(&p).unwrap();
        let expected = 4.0 * sp.g_x * sp.g_x / (3.0 * sp.omega_plus);
        assert!((r.delta2 - expected).abs() < 1e-12);
        assert!(r.blockaded, "{r:?}");
    }

    #[test]
    fn single_drive_without_drive_is_undefined() {
        let p = single_drive_circuit(0.0);
        assert!(matches!(single_drive_check(&p, 4), Err(Error::UndefinedCorrelation { .. })));
    }

    #[test]
    fn single_drive_without_splitting_loses_blockade() {
        let p = single_drive_circuit(1.0);
        let mut sp = derive_supermodes(&p).unwrap();
        sp.delta2 = 0.0;
        let dp = sp.delta_plus;
        let sp = sp.with_delta_plus(dp);
        let r = single_drive_check_with(&p, &sp, 6).unwrap();
        assert!(r.g2.iter().any(|g| *g > BLOCKADE_BAND), "{r:?}");
    }

    #[test]
    fn rates_table_lists_each_order() {
        let circuit = serde_json::to_string(&CircuitParams::reference()).unwrap();
        let cfg = ExperimentConfig::from_json_str(&format!(
            r#"{{"spec_version": 1, "experiment": "rates_table", "circuit": {circuit},
                "numerics": {{"max_photon_order": 3}}, "output": {{"path": "r.csv"}}}}"#
        ))
        .unwrap();
        let t = match run(&cfg, 1).unwrap().output {
            RunOutput::Table(t) => t,
            _ => panic!(),
        };
        let rate = t.column("rate_mhz").unwrap();
        assert_eq!(rate.len(), 3);
        assert!(rate[0] > rate[1] && rate[1] > rate[2]);
    }
}
