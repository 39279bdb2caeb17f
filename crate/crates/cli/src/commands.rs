//! The six batch commands. Each writes its files into `out` and returns the
//! data it wrote.

use std::f64::consts::PI;
use std::path::Path;

use binlattice::dynamics::{
    default_cycles, evolve_intensity_spectral, extract_period, jump_fidelity, transfer_max_from, uniform_grid,
    Direction, MapSource, TransferPeak,
};
use binlattice::lattice::build_hamiltonian;
use binlattice::linalg::{apply, eig_hermitian, integrate_schrodinger, propagator};
use binlattice::mesh::{mesh_decompose, program_error, quantize_program, random_unitary};
use binlattice::protocols::{plan_cascade, run_cascade, run_floquet, CascadeRun, FloquetRun, DEFAULT_SUBSTEPS};
use binlattice::rabi_map::{lattice_equivalence_check, pin_coupling_factor, CouplingFactor};
use binlattice::spectrum::{delta_min, delta_min_pair};
use binlattice::{
    CascadeSchedule, FloquetPlan, IntensityMap, LatticeParams, MeshProgram, PeriodEstimate, StateVector, UnitaryMatrix,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AutoOr, Command, MeshSource, RunConfig};
use crate::error::{CliError, CliResult};
use crate::figures::{figure_operating_points, scan_point, ScanRow, SCAN_COUPLING_RATIOS, SCAN_FORCES, SCAN_ORDERS};
use crate::output::{ensure_dir, fmt_sig, intensity_csv, write_heatmap, write_json, write_text};

pub const DEFAULT_PERIODS: f64 = 4.0;
pub const DEFAULT_STEPS: usize = 2048;
pub const DEFAULT_SAMPLES_PER_STAGE: usize = 512;
pub const DEFAULT_ORACLE_TIME: f64 = 10.0;
pub const ORACLE_DT: f64 = 1e-3;
pub const ORACLE_TOLERANCE: f64 = 1e-8;
pub const RABI_TOLERANCE: f64 = 1e-12;
pub const MESH_TOLERANCE: f64 = 1e-10;
/// Quantization steps (units of π) reported by `mesh-compile`, coarse to fine.
pub const REPORT_STEPS_PI: [f64; 3] = [0.04, 0.02, 0.01];

#[derive(Debug)]
pub enum Outcome {
    Simulate(SimulateManifest, IntensityMap),
    Scan(Vec<ScanRow>),
    Cascade(CascadeManifest, CascadeRun),
    Floquet(FloquetManifest, FloquetRun),
    MeshCompile(MeshReport, MeshProgram),
    Verify(VerifyReport),
}

impl Outcome {
    /// Intensity maps written by the command.
    pub fn maps(&self) -> Vec<&IntensityMap> {
        match self {
            Outcome::Simulate(_, m) => vec![m],
            Outcome::Cascade(_, r) => vec![&r.map],
            Outcome::Floquet(_, r) => vec![&r.map],
            _ => Vec::new(),
        }
    }
}

pub fn run(command: Command, cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    if let Some(c) = cfg.command {
        if c != command {
            return Err(CliError::Config(format!("config is for `{}`, not `{}`", c.name(), command.name())));
        }
    }
    ensure_dir(out)?;
    match command {
        Command::Simulate => simulate(cfg, out).map(|(m, map)| Outcome::Simulate(m, map)),
        Command::Scan => scan(cfg, out).map(Outcome::Scan),
        Command::Cascade => cascade(cfg, out).map(|(m, r)| Outcome::Cascade(m, r)),
        Command::Floquet => floquet(cfg, out).map(|(m, r)| Outcome::Floquet(m, r)),
        Command::MeshCompile => mesh_compile(cfg, out).map(|(r, p)| Outcome::MeshCompile(r, p)),
        Command::Verify => verify(cfg, out).map(Outcome::Verify),
    }
}

fn emit_map(cfg: &RunConfig, out: &Path, map: &IntensityMap, extra: Option<(&str, &[usize])>) -> CliResult<()> {
    write_text(&out.join("intensity.csv"), &intensity_csv(map, cfg.lattice.site_origin, extra))?;
    if cfg.emit_heatmap {
        write_heatmap(&out.join("heatmap.pgm"), map)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateManifest {
    pub command: &'static str,
    pub config: RunConfig,
    pub params: LatticeParams,
    pub input_site: i64,
    pub monitor_site: i64,
    pub direction: Direction,
    pub delta_min_global: f64,
    pub delta_min_pair: f64,
    pub pair_ambiguous: bool,
    pub period: f64,
    pub cycles: usize,
    pub fidelity: Option<f64>,
    pub transfer: TransferPeak,
    pub fitted_period: Option<PeriodEstimate>,
    pub fit_error: Option<String>,
    pub max_row_sum_error: f64,
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> CliResult<(SimulateManifest, IntensityMap)> {
    let input = cfg.input_index()?;
    let partner = cfg.partner_of(input)?;
    let params = cfg.resolve_params(input, partner)?;
    let spec = eig_hermitian(&build_hamiltonian(&params)?);
    let global = delta_min(&spec, None)?;
    let pair = delta_min_pair(&spec, input, partner)?;
    let t_max = match cfg.t_max {
        AutoOr::Value(t) => t,
        AutoOr::Auto(_) => DEFAULT_PERIODS * global.period,
    };
    let n_steps = match cfg.n_steps {
        AutoOr::Value(n) => n,
        AutoOr::Auto(_) => DEFAULT_STEPS,
    };
    let grid = uniform_grid(t_max, n_steps);
    let map = evolve_intensity_spectral(&spec, input, &grid)?.with_source(MapSource::Lattice(params));
    let direction = if partner > input { Direction::Right } else { Direction::Left };
    let m = cfg.order()?;
    let cycles = default_cycles(&map, global.period);
    let fidelity =
        if cycles > 0 { Some(jump_fidelity(&map, input, m, direction, global.period, cycles)?) } else { None };
    let transfer = transfer_max_from(&spec, &StateVector::basis(params.n_sites, input)?, partner, t_max)?;
    let (fitted_period, fit_error) = match extract_period(&map.trace(input), &grid) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let manifest = SimulateManifest {
        command: "simulate",
        config: cfg.resolved(&params, t_max, n_steps),
        params,
        input_site: cfg.label_of(input),
        monitor_site: cfg.label_of(partner),
        direction,
        delta_min_global: global.delta_min,
        delta_min_pair: pair.delta_min,
        pair_ambiguous: pair.ambiguous,
        period: global.period,
        cycles,
        fidelity,
        transfer,
        fitted_period,
        fit_error,
        max_row_sum_error: map.max_row_sum_error(),
    };
    emit_map(cfg, out, &map, None)?;
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok((manifest, map))
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut s = String::from("m,F,V,epsilon_star,delta_min_global,delta_min_pair,T_theory,T_fitted,rel_error,status\n");
    for r in rows {
        let nums =
            [r.f, r.v, r.epsilon_star, r.delta_min_global, r.delta_min_pair, r.t_theory, r.t_fitted, r.rel_error];
        s.push_str(&r.m.to_string());
        for x in nums {
            s.push(',');
            s.push_str(&fmt_sig(x));
        }
        s.push(',');
        s.push_str(&r.status.replace([',', '\n'], ";"));
        s.push('\n');
    }
    s
}

pub fn scan(cfg: &RunConfig, out: &Path) -> CliResult<Vec<ScanRow>> {
    let orders = cfg.extras.orders.clone().unwrap_or_else(|| SCAN_ORDERS.to_vec());
    let ratios = match &cfg.extras.coupling_ratios {
        Some(r) => r.clone(),
        None => orders
            .iter()
            .map(|&m| {
                SCAN_ORDERS.iter().position(|&o| o == m).map(|k| SCAN_COUPLING_RATIOS[k]).ok_or_else(|| {
                    CliError::Config(format!("no default V/F for order {m}; give extras.coupling_ratios"))
                })
            })
            .collect::<CliResult<Vec<_>>>()?,
    };
    if ratios.len() != orders.len() {
        return Err(CliError::Config("extras.coupling_ratios must match extras.orders in length".into()));
    }
    let forces = cfg.extras.forces.clone().unwrap_or_else(|| SCAN_FORCES.to_vec());
    let input = cfg.input_index()?;
    let points: Vec<(u32, f64, f64)> =
        orders.iter().zip(&ratios).flat_map(|(&m, &r)| forces.iter().map(move |&f| (m, f, r))).collect();
    let (n, origin) = (cfg.lattice.n_sites, cfg.lattice.site_origin);
    let rows: Vec<ScanRow> = points.par_iter().map(|&(m, f, r)| scan_point(m, f, r, n, origin, input)).collect();
    write_text(&out.join("scan.csv"), &scan_csv(&rows))?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub stage: usize,
    pub source_site: i64,
    pub target_site: i64,
    pub epsilon: f64,
    pub t_star: f64,
    pub predicted_intensity: f64,
    pub fidelity: f64,
    pub reverse_leakage: f64,
    pub at_boundary: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CascadeManifest {
    pub command: &'static str,
    pub config: RunConfig,
    pub params: LatticeParams,
    pub order_m: u32,
    pub direction: Direction,
    pub stages: Vec<StageReport>,
    pub flip_times: Vec<f64>,
    pub total_time: f64,
    pub max_row_sum_error: f64,
}

pub fn cascade(cfg: &RunConfig, out: &Path) -> CliResult<(CascadeManifest, CascadeRun)> {
    let chain_labels = cfg.extras.chain.as_ref().ok_or_else(|| CliError::Config("extras.chain is required".into()))?;
    let chain = chain_labels.iter().map(|&s| cfg.index_of(s)).collect::<CliResult<Vec<_>>>()?;
    if chain.len() < 2 {
        return Err(CliError::Config("extras.chain needs at least two sites".into()));
    }
    let params = cfg.resolve_params(chain[0], chain[1])?;
    let schedule: CascadeSchedule = plan_cascade(&params, &chain, None)?;
    let samples = cfg.extras.samples_per_stage.unwrap_or(DEFAULT_SAMPLES_PER_STAGE);
    let run = run_cascade(&schedule, samples)?;
    let stages = schedule
        .stages
        .iter()
        .enumerate()
        .map(|(k, st)| StageReport {
            stage: k,
            source_site: cfg.label_of(st.source),
            target_site: cfg.label_of(st.target),
            epsilon: st.params.epsilon,
            t_star: st.t_star,
            predicted_intensity: st.predicted_intensity,
            fidelity: run.per_stage_fidelity[k],
            reverse_leakage: run.reverse_leakage[k],
            at_boundary: st.at_boundary,
        })
        .collect();
    let total = schedule.total_time();
    let manifest = CascadeManifest {
        command: "cascade",
        config: cfg.resolved(&params, total, run.map.rows() - 1),
        params,
        order_m: schedule.order_m,
        direction: schedule.direction,
        stages,
        flip_times: run.flip_times.clone(),
        total_time: total,
        max_row_sum_error: run.map.max_row_sum_error(),
    };
    emit_map(cfg, out, &run.map, Some(("stage", &run.stage_of_row)))?;
    write_json(&out.join("schedule.json"), &manifest)?;
    Ok((manifest, run))
}

#[derive(Debug, Clone, Serialize)]
pub struct FloquetManifest {
    pub command: &'static str,
    pub config: RunConfig,
    pub plan: FloquetPlan,
    pub input_site: i64,
    pub block_periods: Vec<f64>,
    pub boundary_times: Vec<f64>,
    pub input_intensity_at_boundaries: Vec<f64>,
    /// Intensity-weighted mean site label at row 0 and after each block.
    pub centroid_at_boundaries: Vec<f64>,
    pub max_row_sum_error: f64,
}

pub fn floquet(cfg: &RunConfig, out: &Path) -> CliResult<(FloquetManifest, FloquetRun)> {
    let input = cfg.input_index()?;
    let params = cfg.resolve_for_input()?;
    let r = cfg.extras.r.ok_or_else(|| CliError::Config("extras.r is required".into()))?;
    let plan = FloquetPlan {
        order_m: cfg.order()?,
        r,
        n_blocks: cfg.extras.n_blocks.unwrap_or(4),
        substeps_per_block: cfg.extras.substeps.unwrap_or(DEFAULT_SUBSTEPS),
        params,
        alternate_sign: cfg.extras.alternate_sign.unwrap_or(false),
        block_orders: cfg.extras.block_orders.clone(),
    };
    plan.validate()?;
    let run = run_floquet(&plan, input)?;
    let rows: Vec<usize> = std::iter::once(0).chain(run.boundary_rows.iter().copied()).collect();
    let origin = cfg.lattice.site_origin as f64;
    let manifest = FloquetManifest {
        command: "floquet",
        config: cfg.resolved(&params, run.map.horizon(), run.map.rows() - 1),
        input_site: cfg.label_of(input),
        block_periods: run.block_periods.clone(),
        boundary_times: rows.iter().map(|&k| run.map.times[k]).collect(),
        input_intensity_at_boundaries: rows.iter().map(|&k| run.map.intensities[[k, input]]).collect(),
        centroid_at_boundaries: rows.iter().map(|&k| run.map.centroid(k) + origin).collect(),
        max_row_sum_error: run.map.max_row_sum_error(),
        plan,
    };
    emit_map(cfg, out, &run.map, None)?;
    write_json(&out.join("plan.json"), &manifest)?;
    Ok((manifest, run))
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantizationPoint {
    pub step_pi: f64,
    pub program_error: f64,
    /// max over (i, j) of ||U_ij|² − |Uq_ij|²|.
    pub intensity_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshReport {
    pub command: &'static str,
    pub config: RunConfig,
    pub source: String,
    pub n_channels: usize,
    pub settings: usize,
    pub depth: usize,
    pub program_error: f64,
    pub quantization: Vec<QuantizationPoint>,
    /// Intensity error is non-increasing as the step shrinks.
    pub intensity_monotone: bool,
    /// Program error is non-increasing as the step shrinks.
    pub program_error_monotone: bool,
}

/// Quantization errors at each step (units of π), in the given order.
pub fn quantization_sweep(
    u: &UnitaryMatrix,
    program: &MeshProgram,
    steps_pi: &[f64],
) -> CliResult<Vec<QuantizationPoint>> {
    let ideal = u.entries().mapv(|z| z.norm_sqr());
    steps_pi
        .iter()
        .map(|&s| {
            let q = quantize_program(program, s * PI)?;
            let rec = binlattice::mesh::mesh_reconstruct(&q)?;
            let intensity_error =
                ideal.iter().zip(rec.entries().iter()).map(|(a, z)| (a - z.norm_sqr()).abs()).fold(0.0, f64::max);
            Ok(QuantizationPoint { step_pi: s, program_error: program_error(u, &q)?, intensity_error })
        })
        .collect()
}

/// Whether `metric` is non-increasing as the step shrinks.
pub fn is_monotone(points: &[QuantizationPoint], metric: impl Fn(&QuantizationPoint) -> f64) -> bool {
    let mut sorted: Vec<&QuantizationPoint> = points.iter().collect();
    sorted.sort_by(|a, b| b.step_pi.total_cmp(&a.step_pi));
    sorted.windows(2).all(|w| metric(w[1]) <= metric(w[0]))
}

pub fn mesh_compile(cfg: &RunConfig, out: &Path) -> CliResult<(MeshReport, MeshProgram)> {
    let (u, source, params) = match cfg.extras.mesh_source.unwrap_or(MeshSource::Propagator) {
        MeshSource::Random => {
            let seed = cfg.extras.seed.unwrap_or(0);
            (random_unitary(cfg.lattice.n_sites, seed), format!("random seed={seed}"), cfg.base_params()?)
        }
        MeshSource::Propagator => {
            let params = cfg.resolve_for_input()?;
            let spec = eig_hermitian(&build_hamiltonian(&params)?);
            let periods = cfg.extras.mesh_time_periods.unwrap_or(0.5);
            let t = periods * delta_min(&spec, None)?.period;
            (propagator(&spec, t), format!("propagator t={periods}T"), params)
        }
    };
    let program = mesh_decompose(&u)?;
    let mut steps = REPORT_STEPS_PI.to_vec();
    if let Some(s) = cfg.extras.quantization_step_pi {
        if !(s > 0.0) {
            return Err(CliError::Config(format!("extras.quantization_step_pi must be positive, got {s}")));
        }
        if !steps.contains(&s) {
            steps.push(s);
        }
    }
    let quantization = quantization_sweep(&u, &program, &steps)?;
    let report = MeshReport {
        command: "mesh-compile",
        config: cfg.resolved(&params, 1.0, 1),
        source,
        n_channels: program.n_channels,
        settings: program.settings.len(),
        depth: program.depth(),
        program_error: program_error(&u, &program)?,
        intensity_monotone: is_monotone(&quantization, |q| q.intensity_error),
        program_error_monotone: is_monotone(&quantization, |q| q.program_error),
        quantization,
    };
    write_json(&out.join("program.json"), &program)?;
    if let Some(s) = cfg.extras.quantization_step_pi {
        write_json(&out.join("program_quantized.json"), &quantize_program(&program, s * PI)?)?;
    }
    write_json(&out.join("error_report.json"), &report)?;
    Ok((report, program))
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub command: &'static str,
    pub properties: Vec<PropertyResult>,
    pub all_passed: bool,
}

fn property(name: &str, value: f64, tolerance: f64, detail: String) -> PropertyResult {
    PropertyResult { name: name.into(), passed: value < tolerance, value, tolerance, detail }
}

/// Worst deviation between fourth-order integration and spectral propagation.
pub fn oracle_deviation(params: &LatticeParams, input: usize, t: f64) -> CliResult<f64> {
    let h = build_hamiltonian(params)?;
    let psi0 = StateVector::basis(params.n_sites, input)?;
    let exact = apply(&propagator(&eig_hermitian(&h), t), &psi0)?;
    let rk = integrate_schrodinger(&h, &psi0, t, ORACLE_DT)?;
    let raw = rk.state.amplitudes().iter().map(|z| z * rk.raw_norm);
    Ok(raw.zip(exact.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}

pub fn verify(cfg: &RunConfig, out: &Path) -> CliResult<VerifyReport> {
    let points = figure_operating_points()?;
    let oracle_t = cfg.extras.oracle_time.unwrap_or(DEFAULT_ORACLE_TIME);
    let mut properties = Vec::new();

    let devs =
        points.par_iter().map(|p| oracle_deviation(&p.params, p.input, oracle_t)).collect::<CliResult<Vec<_>>>()?;
    let (worst_k, worst) =
        devs.iter().copied().enumerate().fold((0, 0.0), |a, (k, d)| if d > a.1 { (k, d) } else { a });
    properties.push(property(
        "integrator_agreement",
        worst,
        ORACLE_TOLERANCE,
        format!("t = {oracle_t}, dt = {ORACLE_DT}, {} lattices, worst: {}", points.len(), points[worst_k].name),
    ));

    let factor = pin_coupling_factor()?;
    let mut rabi_worst = if factor == CouplingFactor::Full { 0.0 } else { f64::INFINITY };
    for p in points.iter().filter(|p| p.name.starts_with("cascade")) {
        rabi_worst = f64::max(rabi_worst, lattice_equivalence_check(&p.params, p.params.n_sites, factor)?);
    }
    properties.push(property("rabi_equivalence", rabi_worst, RABI_TOLERANCE, format!("coupling factor {factor:?}")));

    let n_random = cfg.extras.n_random.unwrap_or(100);
    let seed = cfg.extras.seed.unwrap_or(0);
    let n = cfg.lattice.n_sites;
    let random_worst = (0..n_random as u64)
        .into_par_iter()
        .map(|k| {
            let u = random_unitary(n, seed + k);
            program_error(&u, &mesh_decompose(&u)?)
        })
        .collect::<binlattice::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let figure_worst = points
        .par_iter()
        .map(|p| -> CliResult<f64> {
            let spec = eig_hermitian(&build_hamiltonian(&p.params)?);
            let u = propagator(&spec, 0.5 * delta_min(&spec, None)?.period);
            Ok(program_error(&u, &mesh_decompose(&u)?)?)
        })
        .collect::<CliResult<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    properties.push(property(
        "mesh_round_trip",
        random_worst.max(figure_worst),
        MESH_TOLERANCE,
        format!("{n_random} random {n}x{n} unitaries (seed {seed}) and {} half-period propagators", points.len()),
    ));

    let all_passed = properties.iter().all(|p| p.passed);
    let report = VerifyReport { command: "verify", properties, all_passed };
    write_json(&out.join("verify.json"), &report)?;
    Ok(report)
}
