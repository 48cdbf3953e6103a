//! `ionkick`: design, verify and characterize kick-based gates on 2D ion lattices.
//!
//! Precedence: built-in defaults, then `--config <file>`, then flags.
//! Exit codes: 0 success, 1 numerical failure, 2 usage or config error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ionkick::Rounding;

use config::{RunConfig, SpeciesOverrides, SpeciesSpec, SweepVariable, Temperature};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<ionkick::Error> for CliError {
    fn from(e: ionkick::Error) -> Self {
        if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "ionkick", version, about, allow_negative_numbers = true)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in species (Yb171, Be9, Ca40).
    #[arg(long, global = true)]
    species: Option<String>,
    /// Ion mass in atomic mass units.
    #[arg(long, global = true, allow_negative_numbers = true)]
    mass_u: Option<f64>,
    /// Raman wavelength (m).
    #[arg(long, global = true, allow_negative_numbers = true)]
    wavelength: Option<f64>,
    /// Pulse repetition rate (Hz).
    #[arg(long, global = true, allow_negative_numbers = true)]
    rep_rate: Option<f64>,
    /// Cooling-transition linewidth Γ/2π (Hz).
    #[arg(long, global = true, allow_negative_numbers = true)]
    linewidth: Option<f64>,
    /// Ion spacing (m).
    #[arg(long, global = true, allow_negative_numbers = true)]
    d: Option<f64>,
    /// Lattice rows.
    #[arg(long, global = true)]
    rows: Option<usize>,
    /// Lattice columns; ion `i` sits at row `i / cols`, column `i % cols`.
    #[arg(long, global = true)]
    cols: Option<usize>,
    /// nearest, up or down.
    #[arg(long, global = true)]
    rounding: Option<Rounding>,
    /// Trap frequency ω_z/2π (Hz), replacing the designed value.
    #[arg(long, global = true, allow_negative_numbers = true)]
    trap_frequency: Option<f64>,
    /// Signed arm lengths, e.g. `--pattern=147,-147`.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pattern: Option<Vec<i64>>,
    /// doppler, zero or a temperature in kelvin.
    #[arg(long, global = true, allow_negative_numbers = true)]
    temperature: Option<Temperature>,
    /// Gate ions as `i,j`.
    #[arg(long, global = true, value_delimiter = ',', num_args = 2)]
    pair: Option<Vec<usize>>,
    /// Block size for schedules and parallel crosstalk.
    #[arg(long, global = true)]
    block: Option<usize>,
    /// Average parallel crosstalk over boundary gates as well.
    #[arg(long, global = true)]
    include_boundary: bool,
    /// Output root; each command writes to `<out>/<command>/`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replace existing output.
    #[arg(long, global = true)]
    force: bool,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the trap frequency and kick count.
    Design,
    /// Transverse normal modes of the lattice.
    Modes,
    /// Gate infidelity of one pair, with a per-mode breakdown.
    Fidelity,
    /// Infidelity against spacing, or crosstalk against block size.
    Sweep(SweepArgs),
    /// Infinite-lattice band on a zone grid.
    Dispersion(GridArgs),
    /// Group-velocity field and its maximum.
    Velocity(VelocityArgs),
    /// Response of the lattice to a disturbed ion.
    Propagate(PropagateArgs),
    /// Θ from the central ion to every other ion, plus parallel crosstalk.
    Crosstalk,
    /// Mean-field phase-space trajectory of the gate.
    Trajectory(TrajectoryArgs),
    /// Parallel gate groups for a block layout.
    Schedule,
}

#[derive(Args)]
struct SweepArgs {
    /// `d` (spacing in m) or `n` (block size).
    #[arg(long)]
    variable: Option<SweepVariable>,
    #[arg(long, allow_negative_numbers = true)]
    start: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    stop: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Skip the finite-lattice crosstalk in an `n` sweep.
    #[arg(long)]
    analytic_only: bool,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    radius: Option<usize>,
}

#[derive(Args)]
struct VelocityArgs {
    #[arg(long)]
    grid: Option<usize>,
    /// Lattice-sum truncation; default `(grid − 1)/2`.
    #[arg(long)]
    radius: Option<usize>,
}

#[derive(Args)]
struct PropagateArgs {
    #[arg(long)]
    source: Option<usize>,
    /// Initial displacement (m).
    #[arg(long, allow_negative_numbers = true)]
    z0: Option<f64>,
    /// Initial velocity (m/s).
    #[arg(long, allow_negative_numbers = true)]
    v0: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Window length in trap periods.
    #[arg(long, allow_negative_numbers = true)]
    periods: Option<f64>,
}

#[derive(Args)]
struct TrajectoryArgs {
    #[arg(long)]
    samples_per_interval: Option<usize>,
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &c.species {
        cfg.species = SpeciesSpec::Builtin(s.clone());
    }
    cfg.apply_species_overrides(&SpeciesOverrides {
        mass_u: c.mass_u,
        wavelength: c.wavelength,
        repetition_rate_hz: c.rep_rate,
        linewidth_hz: c.linewidth,
    })?;
    if let Some(d) = c.d {
        cfg.lattice.spacing = d;
    }
    if let Some(r) = c.rows {
        cfg.lattice.rows = r;
    }
    if let Some(r) = c.cols {
        cfg.lattice.cols = r;
    }
    if let Some(r) = c.rounding {
        cfg.rounding = r;
    }
    if let Some(f) = c.trap_frequency {
        cfg.trap_frequency = Some(f);
    }
    if let Some(p) = &c.pattern {
        cfg.pattern = Some(p.clone());
    }
    if let Some(t) = c.temperature {
        cfg.temperature = t;
    }
    if let Some(p) = &c.pair {
        cfg.pair = Some((p[0], p[1]));
    }
    if let Some(n) = c.block {
        cfg.block_size = n;
    }
    cfg.include_boundary |= c.include_boundary;
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }

    match &cli.command {
        Command::Sweep(a) => {
            let sw = &mut cfg.sweep;
            if let Some(v) = a.variable {
                if v != sw.variable && a.start.is_none() && a.stop.is_none() && v == SweepVariable::N {
                    (sw.start, sw.stop, sw.points) = (1.0, 10.0, 10);
                }
                sw.variable = v;
            }
            sw.start = a.start.unwrap_or(sw.start);
            sw.stop = a.stop.unwrap_or(sw.stop);
            sw.points = a.points.unwrap_or(sw.points);
            sw.numeric &= !a.analytic_only;
        }
        Command::Dispersion(a) => {
            cfg.numeric.dispersion_grid = a.grid.unwrap_or(cfg.numeric.dispersion_grid);
            cfg.numeric.dispersion_radius = a.radius.unwrap_or(cfg.numeric.dispersion_radius);
        }
        Command::Velocity(a) => {
            cfg.numeric.velocity_grid = a.grid.unwrap_or(cfg.numeric.velocity_grid);
            if a.radius.is_some() {
                cfg.numeric.velocity_radius = a.radius;
            }
        }
        Command::Propagate(a) => {
            if a.source.is_some() {
                cfg.disturbance.source = a.source;
            }
            cfg.disturbance.z0 = a.z0.unwrap_or(cfg.disturbance.z0);
            cfg.disturbance.v0 = a.v0.unwrap_or(cfg.disturbance.v0);
            cfg.numeric.propagate_steps = a.steps.unwrap_or(cfg.numeric.propagate_steps);
            cfg.numeric.propagate_periods = a.periods.unwrap_or(cfg.numeric.propagate_periods);
        }
        Command::Trajectory(a) => {
            cfg.numeric.samples_per_interval = a.samples_per_interval.unwrap_or(cfg.numeric.samples_per_interval);
        }
        Command::Design | Command::Modes | Command::Fidelity | Command::Crosstalk | Command::Schedule => {}
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli)?;
    if cli.common.print_config {
        say!("{}", serde_json::to_string_pretty(&cfg).map_err(|e| CliError::Io(e.to_string()))?);
        return Ok(());
    }
    let force = cli.common.force;
    match cli.command {
        Command::Design => commands::design(&cfg, force),
        Command::Modes => commands::modes(&cfg, force),
        Command::Fidelity => commands::fidelity(&cfg, force),
        Command::Sweep(_) => commands::sweep(&cfg, force),
        Command::Dispersion(_) => commands::dispersion(&cfg, force),
        Command::Velocity(_) => commands::velocity(&cfg, force),
        Command::Propagate(_) => commands::propagate(&cfg, force),
        Command::Crosstalk => commands::crosstalk(&cfg, force),
        Command::Trajectory(_) => commands::trajectory_cmd(&cfg, force),
        Command::Schedule => commands::schedule(&cfg, force),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
