//! Physical constants and the ion-species database.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fundamental constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalConstants {
    /// Elementary charge (C).
    pub elementary_charge: f64,
    /// Vacuum permittivity (F/m).
    pub vacuum_permittivity: f64,
    /// Reduced Planck constant (J s).
    pub reduced_planck: f64,
    /// Boltzmann constant (J/K).
    pub boltzmann: f64,
    /// Unified atomic mass unit (kg).
    pub atomic_mass_unit: f64,
}

/// CODATA 2018 recommended values.
pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
    elementary_charge: 1.602_176_634e-19,
    vacuum_permittivity: 8.854_187_812_8e-12,
    reduced_planck: 1.054_571_817e-34,
    boltzmann: 1.380_649e-23,
    atomic_mass_unit: 1.660_539_066_60e-27,
};

impl PhysicalConstants {
    /// Coulomb constant times e², `e²/4πε₀` (J m).
    pub fn coulomb(&self) -> f64 {
        self.elementary_charge * self.elementary_charge / (4.0 * PI * self.vacuum_permittivity)
    }
}

pub(crate) const HBAR: f64 = CODATA_2018.reduced_planck;
pub(crate) const KB: f64 = CODATA_2018.boltzmann;

/// `e²/4πε₀` with the CODATA 2018 constants (J m).
pub fn coulomb_constant() -> f64 {
    CODATA_2018.coulomb()
}

/// An ion species together with the laser parameters used to kick it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpeciesParams", into = "SpeciesParams")]
pub struct IonSpecies {
    name: String,
    mass: f64,
    raman_wavelength: f64,
    repetition_rate: f64,
    linewidth: f64,
    delta_k: f64,
}

/// Serialized form of [`IonSpecies`]; `delta_k` is always re-derived.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpeciesParams {
    name: String,
    /// kg
    mass: f64,
    /// m
    raman_wavelength: f64,
    /// rad/s
    repetition_rate: f64,
    /// rad/s
    linewidth: f64,
    #[serde(default, skip_deserializing)]
    delta_k: f64,
}

impl TryFrom<SpeciesParams> for IonSpecies {
    type Error = Error;

    fn try_from(p: SpeciesParams) -> Result<Self> {
        IonSpecies::new(p.name, p.mass, p.raman_wavelength, p.repetition_rate, p.linewidth)
    }
}

impl From<IonSpecies> for SpeciesParams {
    fn from(s: IonSpecies) -> Self {
        SpeciesParams {
            name: s.name,
            mass: s.mass,
            raman_wavelength: s.raman_wavelength,
            repetition_rate: s.repetition_rate,
            linewidth: s.linewidth,
            delta_k: s.delta_k,
        }
    }
}

impl IonSpecies {
    /// Builds a species; the kick wave vector is `Δk = 4π/λ` for
    /// counter-propagating Raman beams.
    pub fn new(
        name: impl Into<String>,
        mass: f64,
        raman_wavelength: f64,
        repetition_rate: f64,
        linewidth: f64,
    ) -> Result<Self> {
        let name = name.into();
        for (what, v) in [
            ("mass", mass),
            ("raman wavelength", raman_wavelength),
            ("repetition rate", repetition_rate),
            ("linewidth", linewidth),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("species {name}: {what} must be positive, got {v}")));
            }
        }
        Ok(IonSpecies {
            name,
            mass,
            raman_wavelength,
            repetition_rate,
            linewidth,
            delta_k: 4.0 * PI / raman_wavelength,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Ion mass (kg).
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Raman laser wavelength (m).
    pub fn raman_wavelength(&self) -> f64 {
        self.raman_wavelength
    }

    /// Pulsed-laser repetition rate ω_rep (rad/s).
    pub fn repetition_rate(&self) -> f64 {
        self.repetition_rate
    }

    /// Cooling-transition linewidth Γ (rad/s).
    pub fn linewidth(&self) -> f64 {
        self.linewidth
    }

    /// Momentum transfer per kick Δk (rad/m).
    pub fn delta_k(&self) -> f64 {
        self.delta_k
    }

    /// Doppler temperature of this species (K).
    pub fn doppler_temperature(&self) -> f64 {
        // linewidth is validated positive at construction
        HBAR * self.linewidth / (2.0 * KB)
    }
}

/// Names accepted by [`builtin_species`].
pub const BUILTIN_SPECIES: [&str; 3] = ["Yb171", "Be9", "Ca40"];

/// Looks up one of the builtin species. All of them use an 80 MHz pulsed
/// laser and a 20 MHz cooling linewidth.
pub fn builtin_species(name: &str) -> Result<IonSpecies> {
    let (mass_u, wavelength) = match name {
        "Yb171" => (170.936, 355e-9),
        "Be9" => (9.012, 318e-9),
        "Ca40" => (39.963, 400e-9),
        other => return Err(Error::UnknownSpecies(other.to_string())),
    };
    IonSpecies::new(
        name,
        mass_u * CODATA_2018.atomic_mass_unit,
        wavelength,
        2.0 * PI * 80e6,
        2.0 * PI * 20e6,
    )
}

/// Doppler temperature `T_D = ħΓ/2k_B` (K) for a linewidth Γ in rad/s.
pub fn doppler_temperature(linewidth: f64) -> Result<f64> {
    if !(linewidth.is_finite() && linewidth > 0.0) {
        return Err(Error::domain(format!("linewidth must be positive, got {linewidth}")));
    }
    Ok(HBAR * linewidth / (2.0 * KB))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_parameters() {
        let yb = builtin_species("Yb171").unwrap();
        assert_eq!(yb.raman_wavelength(), 355e-9);
        assert_eq!(yb.repetition_rate(), 2.0 * PI * 80e6);
        assert_eq!(yb.linewidth(), 2.0 * PI * 20e6);
        assert_eq!(builtin_species("Be9").unwrap().raman_wavelength(), 318e-9);
        assert_eq!(builtin_species("Ca40").unwrap().raman_wavelength(), 400e-9);
        assert!((yb.mass() / CODATA_2018.atomic_mass_unit - 170.936).abs() < 1e-9);
    }

    #[test]
    fn unknown_species_is_a_lookup_error() {
        assert_eq!(builtin_species("Sr88"), Err(Error::UnknownSpecies("Sr88".into())));
    }

    #[test]
    fn delta_k_is_four_pi_over_lambda() {
        for name in BUILTIN_SPECIES {
            let s = builtin_species(name).unwrap();
            let expected = 4.0 * PI / s.raman_wavelength();
            assert!((s.delta_k() - expected).abs() <= f64::EPSILON * expected);
        }
    }

    #[test]
    fn doppler_temperature_values() {
        // ħ·2π·20e6 / 2k_B = 4.799243...e-4 K
        let t = doppler_temperature(2.0 * PI * 20e6).unwrap();
        assert!((t - 4.799_243_07e-4).abs() < 1e-12, "{t}");
        let t1 = doppler_temperature(2.0 * KB / HBAR).unwrap();
        assert!((t1 - 1.0).abs() < 1e-15);
        assert!(doppler_temperature(1e-300).unwrap() < 1e-300);
        assert!(doppler_temperature(0.0).is_err());
        assert!(doppler_temperature(-1.0).is_err());
    }

    #[test]
    fn doppler_temperature_is_linear() {
        let g = 2.0 * PI * 13.7e6;
        for a in [0.1, 2.0, 17.5] {
            let lhs = doppler_temperature(a * g).unwrap();
            let rhs = a * doppler_temperature(g).unwrap();
            assert!((lhs - rhs).abs() <= 1e-15 * rhs);
        }
    }

    #[test]
    fn species_validation_and_serde() {
        assert!(IonSpecies::new("x", 0.0, 1e-7, 1.0, 1.0).is_err());
        let yb = builtin_species("Yb171").unwrap();
        let json = serde_json::to_string(&yb).unwrap();
        let back: IonSpecies = serde_json::from_str(&json).unwrap();
        assert_eq!(back, yb);
    }
}
