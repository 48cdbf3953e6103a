//! Run configuration: a JSON document whose fields command-line flags override.

use std::path::{Path, PathBuf};

use ionkick::design::{solve_design, Rounding};
use ionkick::{builtin_species, GateDesign, IonSpecies, LatticeGeometry};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpeciesSpec {
    Builtin(String),
    Custom(IonSpecies),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Temperature {
    Doppler,
    Zero,
    Kelvin(f64),
}

impl std::str::FromStr for Temperature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "doppler" => Ok(Temperature::Doppler),
            "zero" => Ok(Temperature::Zero),
            other => other
                .parse::<f64>()
                .map(Temperature::Kelvin)
                .map_err(|_| format!("temperature must be `doppler`, `zero` or kelvin, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    /// m
    pub spacing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    D,
    N,
}

impl std::str::FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "d" => Ok(SweepVariable::D),
            "n" => Ok(SweepVariable::N),
            other => Err(format!("sweep variable must be `d` or `n`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    /// m for `d`, block size for `n`
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// Also evaluate the finite-lattice crosstalk in an `n` sweep.
    pub numeric: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { variable: SweepVariable::D, start: 30e-6, stop: 250e-6, points: 23, numeric: true }
    }
}

/// Initial condition on the source ion for `propagate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceSpec {
    /// `None` means the central ion.
    pub source: Option<usize>,
    /// m
    pub z0: f64,
    /// m/s
    pub v0: f64,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        DisturbanceSpec { source: None, z0: 1e-8, v0: 0.0 }
    }
}

/// Truncation radii, grid sizes and sampling densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericOptions {
    pub lattice_sum_radius: usize,
    pub dispersion_radius: usize,
    pub dispersion_grid: usize,
    pub velocity_grid: usize,
    /// Defaults to `(velocity_grid − 1)/2`.
    pub velocity_radius: Option<usize>,
    pub samples_per_interval: usize,
    /// Time steps across the propagation window.
    pub propagate_steps: usize,
    /// Propagation window in trap periods `2π/ω_z`.
    pub propagate_periods: f64,
}

impl Default for NumericOptions {
    fn default() -> Self {
        NumericOptions {
            lattice_sum_radius: 1000,
            dispersion_radius: 200,
            dispersion_grid: 41,
            velocity_grid: 201,
            velocity_radius: None,
            samples_per_interval: 8,
            propagate_steps: 64,
            propagate_periods: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub species: SpeciesSpec,
    pub lattice: LatticeSpec,
    /// Signed arm lengths; `None` means `(+M, −M)` from the design.
    pub pattern: Option<Vec<i64>>,
    pub rounding: Rounding,
    /// Trap frequency ω_z/2π (Hz); `None` means the designed value.
    pub trap_frequency: Option<f64>,
    pub temperature: Temperature,
    /// Gate ions; `None` means the central horizontal pair.
    pub pair: Option<(usize, usize)>,
    /// Block size for parallel crosstalk and schedules.
    pub block_size: usize,
    /// Average parallel crosstalk over boundary gates too.
    pub include_boundary: bool,
    pub disturbance: DisturbanceSpec,
    pub output_dir: PathBuf,
    pub sweep: SweepSpec,
    pub numeric: NumericOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            species: SpeciesSpec::Builtin("Yb171".into()),
            lattice: LatticeSpec { rows: 1, cols: 2, spacing: 50e-6 },
            pattern: None,
            rounding: Rounding::Nearest,
            trap_frequency: None,
            temperature: Temperature::Doppler,
            pair: None,
            block_size: 5,
            include_boundary: false,
            disturbance: DisturbanceSpec::default(),
            output_dir: PathBuf::from("out"),
            sweep: SweepSpec::default(),
            numeric: NumericOptions::default(),
        }
    }
}

/// Per-field replacements for a named or inline species.
#[derive(Debug, Clone, Default)]
pub struct SpeciesOverrides {
    pub mass_u: Option<f64>,
    pub wavelength: Option<f64>,
    pub repetition_rate_hz: Option<f64>,
    pub linewidth_hz: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn apply_species_overrides(&mut self, o: &SpeciesOverrides) -> Result<(), CliError> {
        if o.mass_u.is_none() && o.wavelength.is_none() && o.repetition_rate_hz.is_none() && o.linewidth_hz.is_none() {
            return Ok(());
        }
        let base = self.species()?;
        let tau = 2.0 * std::f64::consts::PI;
        let species = IonSpecies::new(
            base.name(),
            o.mass_u.map_or(base.mass(), |u| u * ionkick::CODATA_2018.atomic_mass_unit),
            o.wavelength.unwrap_or(base.raman_wavelength()),
            o.repetition_rate_hz.map_or(base.repetition_rate(), |f| tau * f),
            o.linewidth_hz.map_or(base.linewidth(), |f| tau * f),
        )?;
        self.species = SpeciesSpec::Custom(species);
        Ok(())
    }

    pub fn species(&self) -> Result<IonSpecies, CliError> {
        match &self.species {
            SpeciesSpec::Builtin(name) => Ok(builtin_species(name)?),
            SpeciesSpec::Custom(s) => Ok(s.clone()),
        }
    }

    pub fn geometry(&self) -> Result<LatticeGeometry, CliError> {
        let l = &self.lattice;
        Ok(LatticeGeometry::square(l.rows, l.cols, l.spacing)?)
    }

    pub fn design(&self) -> Result<GateDesign, CliError> {
        Ok(solve_design(&self.species()?, self.lattice.spacing, self.rounding)?)
    }

    /// ω_z (rad/s): the override if set, otherwise the designed value.
    pub fn omega_z(&self, design: &GateDesign) -> Result<f64, CliError> {
        match self.trap_frequency {
            Some(f) if f.is_finite() && f > 0.0 => Ok(2.0 * std::f64::consts::PI * f),
            Some(f) => Err(CliError::Usage(format!("trap frequency must be positive, got {f}"))),
            None => Ok(design.omega_z),
        }
    }

    pub fn pattern(&self, design: &GateDesign) -> Vec<i64> {
        self.pattern.clone().unwrap_or_else(|| design.pattern().to_vec())
    }

    pub fn temperature_kelvin(&self, species: &IonSpecies) -> Result<f64, CliError> {
        match self.temperature {
            Temperature::Doppler => Ok(species.doppler_temperature()),
            Temperature::Zero => Ok(0.0),
            Temperature::Kelvin(t) if t.is_finite() && t >= 0.0 => Ok(t),
            Temperature::Kelvin(t) => Err(CliError::Usage(format!("temperature must be nonnegative, got {t}"))),
        }
    }

    /// The configured pair, or the horizontally adjacent pair at the centre.
    pub fn gate_pair(&self, geometry: &LatticeGeometry) -> Result<(usize, usize), CliError> {
        let (i, j) = match self.pair {
            Some(p) => p,
            None => {
                let (rows, cols) = (self.lattice.rows, self.lattice.cols);
                if cols >= 2 {
                    let (r, c) = ((rows - 1) / 2, (cols - 1) / 2);
                    (r * cols + c, r * cols + c + 1)
                } else if rows >= 2 {
                    let r = (rows - 1) / 2;
                    (r * cols, (r + 1) * cols)
                } else {
                    return Err(CliError::Usage("a gate needs at least two ions".into()));
                }
            }
        };
        let n = geometry.len();
        if i >= n || j >= n || i == j {
            return Err(CliError::Usage(format!("invalid ion pair ({i}, {j}) for {n} ions")));
        }
        Ok((i, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let c = RunConfig::default();
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let c: RunConfig =
            serde_json::from_str(r#"{"species": "Ca40", "temperature": {"kelvin": 0.001}, "lattice": {"rows": 10, "cols": 10, "spacing": 5e-5}}"#)
                .unwrap();
        assert_eq!(c.species, SpeciesSpec::Builtin("Ca40".into()));
        assert_eq!(c.temperature, Temperature::Kelvin(0.001));
        assert_eq!(c.numeric, NumericOptions::default());
        assert!(serde_json::from_str::<RunConfig>(r#"{"speices": "Ca40"}"#).is_err());
    }

    #[test]
    fn inline_species() {
        let c: RunConfig = serde_json::from_str(
            r#"{"species": {"name": "Sr88", "mass": 1.46e-25, "raman_wavelength": 4.2e-7, "repetition_rate": 5.0e8, "linewidth": 2.0e8}}"#,
        )
        .unwrap();
        let s = c.species().unwrap();
        assert_eq!(s.name(), "Sr88");
        assert!((s.delta_k() - 4.0 * std::f64::consts::PI / 4.2e-7).abs() < 1e-3);
    }

    #[test]
    fn overrides_replace_single_fields() {
        let mut c = RunConfig::default();
        c.apply_species_overrides(&SpeciesOverrides { wavelength: Some(400e-9), ..Default::default() }).unwrap();
        let s = c.species().unwrap();
        assert_eq!(s.raman_wavelength(), 400e-9);
        assert_eq!(s.mass(), builtin_species("Yb171").unwrap().mass());
    }

    #[test]
    fn central_pair() {
        let mut c = RunConfig { lattice: LatticeSpec { rows: 10, cols: 10, spacing: 5e-5 }, ..RunConfig::default() };
        assert_eq!(c.gate_pair(&c.geometry().unwrap()).unwrap(), (44, 45));
        c.lattice = LatticeSpec { rows: 1, cols: 2, spacing: 5e-5 };
        assert_eq!(c.gate_pair(&c.geometry().unwrap()).unwrap(), (0, 1));
        c.pair = Some((0, 0));
        assert!(c.gate_pair(&c.geometry().unwrap()).is_err());
    }

    #[test]
    fn temperature_parsing() {
        assert_eq!("doppler".parse::<Temperature>().unwrap(), Temperature::Doppler);
        assert_eq!("1e-3".parse::<Temperature>().unwrap(), Temperature::Kelvin(1e-3));
        assert!("warm".parse::<Temperature>().is_err());
    }
}
