//! One function per subcommand. Each resolves the config into library calls,
//! writes its artifacts and prints a short summary.

use std::f64::consts::PI;

use ionkick::crosstalk::{analytic_crosstalk_per_gate, build_block_schedule, crosstalk_map, parallel_crosstalk_per_gate};
use ionkick::design::solve_design;
use ionkick::fit::{power_law_fit, PowerLawFit};
use ionkick::lattice::{dispersion_grid, normal_modes, potential_matrix};
use ionkick::propagation::{evolve_disturbance, max_group_velocity, velocity_field};
use ionkick::pulses::{build_pulse_sequence, gate_infidelity, trajectory, TrajectoryOptions};
use ionkick::{FidelityReport, GateDesign, IonSpecies, LatticeGeometry, ModeSpectrum, PulseSequence};
use serde::Serialize;

use crate::config::{RunConfig, SweepVariable};
use crate::output::{Cell, OutputDir};
use crate::{row, say, CliError};

const MHZ: f64 = 2.0 * PI * 1e6;

/// Per-gate analytic crosstalk budget that sets the minimal block size.
pub const CROSSTALK_BUDGET: f64 = 1e-3;

struct Setup {
    species: IonSpecies,
    design: GateDesign,
    omega_z: f64,
    geometry: LatticeGeometry,
    modes: ModeSpectrum,
}

impl Setup {
    fn new(config: &RunConfig) -> Result<Self, CliError> {
        let species = config.species()?;
        let design = config.design()?;
        let omega_z = config.omega_z(&design)?;
        let geometry = config.geometry()?;
        let v = potential_matrix(&geometry, species.mass(), omega_z)?;
        let modes = normal_modes(&v)?;
        Ok(Setup { species, design, omega_z, geometry, modes })
    }

    fn sequence(&self, config: &RunConfig) -> Result<PulseSequence, CliError> {
        Ok(build_pulse_sequence(
            &config.pattern(&self.design),
            self.species.repetition_rate(),
            self.species.delta_k(),
        )?)
    }
}

fn design_rows(d: &GateDesign) -> Vec<(&'static str, String)> {
    vec![
        ("species", d.species.name().to_string()),
        ("d (μm)", format!("{:.3}", d.spacing * 1e6)),
        ("rounding", format!("{:?}", d.rounding).to_lowercase()),
        ("M (fractional)", format!("{:.6}", d.fractional_kicks)),
        ("M", d.kicks_per_arm.to_string()),
        ("ω_z/2π (MHz)", format!("{:.6}", d.omega_z / MHZ)),
        ("T (μs)", format!("{:.6}", d.gate_time * 1e6)),
        ("ε", format!("{:.4e}", d.epsilon)),
        ("Δφ (rad)", format!("{:.6}", d.delta_phi)),
        ("(5π/8M)²", format!("{:.4e}", d.roundoff_bound)),
    ]
}

fn print_table(rows: &[(&str, String)]) {
    let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    for (k, v) in rows {
        say!("{k:<width$}  {v}", width = width);
    }
}

#[derive(Serialize)]
struct DesignResult<'a> {
    design: &'a GateDesign,
    trap_frequency_mhz: f64,
    gate_time_us: f64,
}

pub fn design(config: &RunConfig, force: bool) -> Result<(), CliError> {
    let design = config.design()?;
    let out = OutputDir::create(config, "design", force)?;
    out.write_json(
        "design.json",
        &DesignResult { design: &design, trap_frequency_mhz: design.omega_z / MHZ, gate_time_us: design.gate_time * 1e6 },
    )?;
    out.finish()?;
    print_table(&design_rows(&design));
    for w in &design.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

pub fn modes(config: &RunConfig, force: bool) -> Result<(), CliError> {
    let s = Setup::new(config)?;
    let mut out = OutputDir::create(config, "modes", force)?;
    out.write_json("modes.json", &s.modes.to_document())?;
    let rows: Vec<Vec<Cell>> = s
        .modes
        .frequencies()
        .iter()
        .enumerate()
        .map(|(k, w)| row![k, w / (2.0 * PI), w / s.omega_z])
        .collect();
    out.write_csv("frequencies.csv", &["mode", "frequency_hz", "ratio_to_trap"], &rows)?;
    out.finish()?;

    let f = s.modes.frequencies();
    say!("{} modes, ε = {:.4e}", f.len(), s.modes.epsilon());
    say!("lowest  {:.6} MHz", f[0] / MHZ);
    say!("highest {:.6} MHz", f[f.len() - 1] / MHZ);
    if f.len() == 2 {
        say!("ω_r/ω_z = {:.12}, √(1−2ε) = {:.12}", f[0] / f[1], (1.0 - 2.0 * s.modes.epsilon()).sqrt());
    }
    Ok(())
}

#[derive(Serialize)]
struct FidelityResult<'a> {
    design: &'a GateDesign,
    trap_frequency_mhz: f64,
    sequence: String,
    kicks: usize,
    report: &'a FidelityReport,
}

pub fn fidelity(config: &RunConfig, force: bool) -> Result<(), CliError> {
    let s = Setup::new(config)?;
    let (i, j) = config.gate_pair(&s.geometry)?;
    let seq = s.sequence(config)?;
    let temperature = config.temperature_kelvin(&s.species)?;
    let report = gate_infidelity(&s.modes, &seq, i, j, s.species.mass(), temperature)?;

    let mut out = OutputDir::create(config, "fidelity", force)?;
    out.write_json(
        "fidelity.json",
        &FidelityResult {
            design: &s.design,
            trap_frequency_mhz: s.omega_z / MHZ,
            sequence: seq.descriptor(),
            kicks: seq.len(),
            report: &report,
        },
    )?;
    let rows: Vec<Vec<Cell>> = report
        .per_mode_breakdown
        .iter()
        .map(|&(k, contribution)| {
            row![
                k,
                s.modes.frequencies()[k] / (2.0 * PI),
                report.alphas_i[k].norm_sqr(),
                report.alphas_j[k].norm_sqr(),
                contribution
            ]
        })
        .collect();
    out.write_csv("per_mode.csv", &["mode", "frequency_hz", "alpha_i_sq", "alpha_j_sq", "contribution"], &rows)?;
    out.finish()?;

    print_table(&[
        ("ions", format!("({i}, {j})")),
        ("sequence", seq.descriptor()),
        ("temperature (K)", format!("{temperature:.4e}")),
        ("Θ (rad)", format!("{:.9}", report.theta)),
        ("rotation error", format!("{:.4e}", report.rotation_error)),
        ("displacement error", format!("{:.4e}", report.displacement_error)),
        ("δF", format!("{:.4e}", report.worst_case_infidelity)),
    ]);
    Ok(())
}

/// Rows sorted by the abscissa with duplicates dropped.
fn sorted_unique(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

fn sweep_abscissae(config: &RunConfig) -> Result<Vec<f64>, CliError> {
    let sw = &config.sweep;
    if sw.points == 0 {
        return Err(CliError::Usage("sweep needs at least one point".into()));
    }
    if !(sw.start.is_finite() && sw.stop.is_finite() && sw.start <= sw.stop) {
        return Err(CliError::Usage(format!("empty sweep range [{}, {}]", sw.start, sw.stop)));
    }
    if sw.points == 1 {
        return Ok(vec![sw.start]);
    }
    let step = (sw.stop - sw.start) / (sw.points - 1) as f64;
    Ok(sorted_unique(
        (0..sw.points)
            .map(|p| if p + 1 == sw.points { sw.stop } else { sw.start + step * p as f64 })
            .collect(),
    ))
}

pub fn sweep(config: &RunConfig, force: bool) -> Result<(), CliError> {
    match config.sweep.variable {
        SweepVariable::D => sweep_spacing(config, force),
        SweepVariable::N => sweep_block(config, force),
    }
}

fn sweep_spacing(config: &RunConfig, force: bool) -> Result<(), CliError> {
    let species = config.species()?;
    let temperature = config.temperature_kelvin(&species)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for d in sweep_abscissae(config)? {
        let mut point = config.clone();
        point.lattice.spacing = d;
        let design = solve_design(&species, d, config.rounding)?;
        let geometry = point.geometry()?;
        let omega_z = point.omega_z(&design)?;
        let modes = normal_modes(&potential_matrix(&geometry, species.mass(), omega_z)?)?;
        let seq = build_pulse_sequence(&point.pattern(&design), species.repetition_rate(), species.delta_k())?;
        let (i, j) = point.gate_pair(&geometry)?;
        let r = gate_infidelity(&modes, &seq, i, j, species.mass(), temperature)?;
        worst = worst.max(r.worst_case_infidelity);
        rows.push(row![
            d,
            omega_z / (2.0 * PI),
            design.kicks_per_arm,
            design.gate_time,
            design.epsilon,
            r.theta,
            r.rotation_error,
            r.displacement_error,
            r.worst_case_infidelity,
            design.roundoff_bound
        ]);
    }
    let mut out = OutputDir::create(config, "sweep", force)?;
    out.write_csv(
        "sweep_d.csv",
        &[
            "d_m",
            "trap_frequency_hz",
            "kicks_per_arm",
            "gate_time_s",
            "epsilon",
            "theta",
            "rotation_error",
            "displacement_error",
            "infidelity",
            "roundoff_bound",
        ],
        &rows,
    )?;
    out.finish()?;
    say!("{} points, max δF = {worst:.4e}", rows.len());
    Ok(())
}

fn sweep_block(config: &RunConfig, force: bool) -> Result<(), CliError> {
    let sw = &config.sweep;
    let whole = |x: f64| x.is_finite() && x >= 1.0 && x.fract() == 0.0;
    if !(whole(sw.start) && whole(sw.stop) && sw.start <= sw.stop) {
        return Err(CliError::Usage(format!(
            "block sweep needs integers 1 ≤ start ≤ stop, got [{}, {}]",
            sw.start, sw.stop
        )));
    }
    let (lo, hi) = (sw.start as usize, sw.stop as usize);

    // one design at the configured spacing; each n gets its own (3n+1)² array
    let species = config.species()?;
    let design = config.design()?;
    let omega_z = config.omega_z(&design)?;
    let seq = build_pulse_sequence(&config.pattern(&design), species.repetition_rate(), species.delta_k())?;

    let mut rows = Vec::new();
    let mut minimal = None;
    for n in lo..=hi {
        let analytic = analytic_crosstalk_per_gate(n)?;
        if minimal.is_none() && analytic < CROSSTALK_BUDGET {
            minimal = Some(n);
        }
        let (numeric, ratio) = if sw.numeric && n >= 2 {
            let side = 3 * n + 1;
            let geometry = LatticeGeometry::square(side, side, config.lattice.spacing)?;
            let modes = normal_modes(&potential_matrix(&geometry, species.mass(), omega_z)?)?;
            let p = parallel_crosstalk_per_gate(n, &geometry, &modes, &seq, species.mass(), config.include_boundary)?;
            (Cell::from(p.numeric), Cell::from(p.ratio))
        } else {
            (Cell::Text(String::new()), Cell::Text(String::new()))
        };
        rows.push(vec![Cell::from(n), Cell::from(analytic), numeric, ratio]);
    }
    let mut out = OutputDir::create(config, "sweep", force)?;
    out.write_csv("sweep_n.csv", &["block_size", "analytic", "numeric", "ratio"], &rows)?;
    out.finish()?;
    match minimal {
        Some(n) => say!("smallest block size with analytic crosstalk < {CROSSTALK_BUDGET:e}: n = {n}"),
        None => say!("no block size in range meets {CROSSTALK_BUDGET:e}"),
    }
    Ok(())
}

pub fn dispersion(config: &RunConfig, force: bool) -> Result<(), CliError> {
    let design = config.design()?;
    let omega_z = config.omega_z(&design)?;
    let d = config.lattice.spacing;
    let eps = ionkick::design::epsilon(&design.species, omega_z, d)?;
    let grid = dispersion_grid(config.numeric.dispersion_grid, omega_z, eps, d, config.numeric.dispersion_radius)?;
    let rows: Vec<Vec<Cell>> = grid
        .iter()
        .map(|p| row![p.k1 * d, p.k2 * d, p.omega / (2.0 * PI), p.omega_first_order / (2.0 * PI)])
        .collect();
    let mut out = OutputDir::create(config, "dispersion", force)?;
    out.write_csv("dispersion.csv", &["k1_d", "k2_d", "frequency_hz", "frequency_first_order_hz"], &rows)?;
    out.finish()?;
    let lo = grid.iter().map(|p| p.omega).fold(f64::INFINITY, f64::min);
    let hi = grid.iter().map(|p| p.omega).fold(0.0, f64::max);
    say!("band {:.6}–{:.6} MHz over {} points", lo / MHZ, hi / MHZ, grid.len());
    Ok(())
}

#[derive(Serialize)]
struct VelocitySummary {
    grid: usize,
    radius: usize,
    epsilon: f64,
    trap_frequency_hz: f64,
    max_speed: f64,
    normalized_max: f64,
    argmax_k_d: (f64, f64),
}

pub fn velocity(config: &RunConfig, force: bool) -> Result<(), CliError> {
    let design = config.design()?;
    let omega_z = config.omega_z(&design)?;
    let d = config.lattice.spacing;
    let eps = ionkick::design::epsilon(&design.species, omega_z, d)?;
    let grid = config.numeric.velocity_grid;
    if grid < 3 {
        return Err(CliError::Usage(format!("velocity grid needs at least 3 points, got {grid}")));
    }
    let radius = config.numeric.velocity_radius.unwrap_or((grid - 1) / 2);
    let field = velocity_field(eps, omega_z, d, grid, radius)?;

    let mut rows = Vec::with_capacity(grid * grid);
    for a in 0..grid {
        for b in 0..grid {
            let v = field.at(a, b);
            rows.push(row![field.k_values[a], field.k_values[b], v[0], v[1], v[0].hypot(v[1])]);
        }
    }
    let mut out = OutputDir::create(config, "velocity", force)?;
    out.write_csv("velocity.csv", &["k1_d", "k2_d", "v_x", "v_y", "speed"], &rows)?;
    out.write_json(
        "summary.json",
        &VelocitySummary {
            grid,
            radius,
            epsilon: eps,
            trap_frequency_hz: omega_z / (2.0 * PI),
            max_speed: field.max_speed,
            normalized_max: field.normalized_max,
            argmax_k_d: field.argmax,
        },
    )?;
    out.finish()?;
    say!(
        "max |v_g| = {:.6} m/s = {:.4} εω_z d on a {grid}×{grid} grid (radius {radius})",
        field.max_speed, field.normalized_max
    );
    Ok(())
}

#[derive(Serialize)]
struct PropagationSummary {
    source: usize,
    window_s: f64,
    epsilon: f64,
    normalized_velocity: f64,
    /// Lattice units.
    cone_radius: f64,
    exterior_ratio: f64,
    radial_fit: Option<PowerLawFit>,
    energy_drift: f64,
}

pub fn propagate(config: &RunConfig, force: bool) -> Result<(), CliError> {
    let s = Setup::new(config)?;
    let source = config.disturbance.source.unwrap_or_else(|| s.geometry.central_ion());
    let n = &config.numeric;
    if n.propagate_steps == 0 || !(n.propagate_periods.is_finite() && n.propagate_periods > 0.0) {
        return Err(CliError::Usage("propagation needs a positive window and at least one step".into()));
    }
    let window = n.propagate_periods * 2.0 * PI / s.omega_z;
    let times: Vec<f64> = (0..=n.propagate_steps).map(|k| window * k as f64 / n.propagate_steps as f64).collect();
    let resp = evolve_disturbance(&s.modes, source, config.disturbance.z0, config.disturbance.v0, &times)?;

    let eps = s.modes.epsilon();
    let (_, vnorm) = max_group_velocity(eps, s.omega_z, s.geometry.spacing(), n.velocity_grid)?;
    let cone = vnorm * eps * s.omega_z * window + 3.0;
    let exterior_ratio = resp.exterior_ratio(&s.geometry, cone)?;
    let reach = (0..s.geometry.len()).map(|i| s.geometry.distance(source, i)).fold(0.0, f64::max) / s.geometry.spacing();
    let radial_fit = if reach > cone + 1.0 { resp.radial_fit(&s.geometry, cone.ceil(), reach).ok() } else { None };

    let rows: Vec<Vec<Cell>> = (0..s.geometry.len())
        .map(|i| {
            let [x, y] = s.geometry.positions()[i];
            let d = s.geometry.spacing();
            row![i, x / d, y / d, s.geometry.distance(source, i) / d, resp.envelopes[i]]
        })
        .collect();
    let mut out = OutputDir::create(config, "propagate", force)?;
    out.write_csv("envelopes.csv", &["ion", "x", "y", "r", "max_envelope_m"], &rows)?;
    out.write_json(
        "summary.json",
        &PropagationSummary {
            source,
            window_s: window,
            epsilon: eps,
            normalized_velocity: vnorm,
            cone_radius: cone,
            exterior_ratio,
            radial_fit,
            energy_drift: resp.energy_drift(),
        },
    )?;
    out.finish()?;
    say!("cone radius {cone:.3} d, exterior/source = {exterior_ratio:.4e} (ε = {eps:.4e})");
    if let Some(f) = radial_fit {
        say!("envelope ∝ r^{:.3} beyond the cone", f.exponent);
    }
    say!("energy drift {:.3e}", resp.energy_drift());
    Ok(())
}

#[derive(Serialize)]
struct CrosstalkSummary {
    source: usize,
    slope_fit: Option<PowerLawFit>,
    fit_range: (f64, f64),
    parallel: Option<ParallelSummary>,
}

#[derive(Clone, Serialize)]
struct ParallelSummary {
    block_size: usize,
    include_boundary: bool,
    gates: usize,
    numeric: f64,
    analytic: f64,
    ratio: f64,
}

pub const CROSSTALK_FIT_RANGE: (f64, f64) = (3.0, 10.0);

pub fn crosstalk(config: &RunConfig, force: bool) -> Result<(), CliError> {
    let s = Setup::new(config)?;
    let seq = s.sequence(config)?;
    let source = s.geometry.central_ion();
    let map = crosstalk_map(&s.modes, &seq, &s.geometry, source, s.species.mass())?;

    let d = s.geometry.spacing();
    let (xs, ys): (Vec<f64>, Vec<f64>) = map
        .iter()
        .filter(|e| e.separation >= CROSSTALK_FIT_RANGE.0 && e.separation <= CROSSTALK_FIT_RANGE.1)
        .map(|e| (e.separation, e.theta))
        .unzip();
    let slope_fit = power_law_fit(&xs, &ys).ok();

    let n = config.block_size;
    let parallel = match s.geometry.shape() {
        Some((rows, cols)) if n >= 2 && rows > 3 * n && cols > 3 * n => {
            let p = parallel_crosstalk_per_gate(n, &s.geometry, &s.modes, &seq, s.species.mass(), config.include_boundary)?;
            Some(ParallelSummary {
                block_size: n,
                include_boundary: p.include_boundary,
                gates: p.gates.len(),
                numeric: p.numeric,
                analytic: p.analytic,
                ratio: p.ratio,
            })
        }
        _ => None,
    };

    let rows: Vec<Vec<Cell>> = map
        .iter()
        .map(|e| {
            let [x, y] = s.geometry.positions()[e.pair.1];
            row![e.pair.1, x / d, y / d, e.separation, e.theta, e.theta * e.theta]
        })
        .collect();
    let mut out = OutputDir::create(config, "crosstalk", force)?;
    out.write_csv("crosstalk.csv", &["ion", "x", "y", "r", "theta", "theta_sq"], &rows)?;
    out.write_json("summary.json", &CrosstalkSummary { source, slope_fit, fit_range: CROSSTALK_FIT_RANGE, parallel: parallel.clone() })?;
    out.finish()?;

    match slope_fit {
        Some(f) => say!("log|Θ| vs log r slope {:.4} over r ∈ [3, 10] ({} ions)", f.exponent, f.points),
        None => say!("too few ions in r ∈ [3, 10] for a slope fit"),
    }
    if let Some(p) = parallel {
        say!("parallel n = {}: {:.4e} per gate (analytic {:.4e}, ratio {:.3})", p.block_size, p.numeric, p.analytic, p.ratio);
    }
    Ok(())
}

pub fn schedule(config: &RunConfig, force: bool) -> Result<(), CliError> {
    let (rows, cols) = (config.lattice.rows, config.lattice.cols);
    let schedule = build_block_schedule(rows, cols, config.block_size)?;
    let out = OutputDir::create(config, "schedule", force)?;
    out.write_json("schedule.json", &schedule)?;
    out.finish()?;
    let gates: usize = schedule.groups.iter().map(|g| g.gates.len()).sum();
    say!(
        "{gates} gates in {} parallel groups (block size {}, serial depth {})",
        schedule.groups.len(),
        schedule.block_size,
        schedule.serial_depth
    );
    Ok(())
}

pub fn trajectory_cmd(config: &RunConfig, force: bool) -> Result<(), CliError> {
    let s = Setup::new(config)?;
    let (i, j) = config.gate_pair(&s.geometry)?;
    let seq = s.sequence(config)?;
    let n = s.modes.len();
    let tracked_modes: Vec<usize> = if n <= 4 { (0..n).collect() } else { vec![0, n - 1] };
    let options = TrajectoryOptions {
        driven: vec![i, j],
        tracked_ions: vec![i, j],
        tracked_modes: tracked_modes.clone(),
        samples_per_interval: config.numeric.samples_per_interval,
    };
    let samples = trajectory(&s.modes, &seq, &options, s.species.mass())?;

    let mut header = vec!["time_s".to_string()];
    header.extend(options.tracked_ions.iter().map(|ion| format!("dkz_{ion}")));
    for k in &tracked_modes {
        header.push(format!("x_{k}"));
        header.push(format!("p_{k}"));
    }
    let rows: Vec<Vec<Cell>> = samples
        .iter()
        .map(|smp| {
            let mut r = vec![Cell::from(smp.time)];
            r.extend(smp.displacements.iter().map(|x| Cell::from(*x)));
            for (x, p) in &smp.quadratures {
                r.push(Cell::from(*x));
                r.push(Cell::from(*p));
            }
            r
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = OutputDir::create(config, "trajectory", force)?;
    out.write_csv("trajectory.csv", &header, &rows)?;
    out.finish()?;
    let peak = samples.iter().flat_map(|smp| smp.displacements.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
    say!("{} samples over {:.4} μs, peak |Δk·z| = {peak:.4}", samples.len(), seq.duration() * 1e6);
    Ok(())
}
