//! Gate-parameter design: trap frequency, kick count and gate time for a
//! `(+M, −M)` kick sequence on nearest neighbours at spacing `d`.
//!
//! The target phase difference between the relative and centre-of-mass
//! loops is `Δφ = 3εħΔk²ω_rep²/(2π m ω_z³) = π/4`, which fixes an initial
//! trap frequency. The kick count `M = (1 + ε/2) ω_rep/ω_z` must be an integer,
//! so `M` is rounded and `ω_z` re-solved self-consistently.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{coulomb_constant, IonSpecies, HBAR};
use crate::{Error, Result};

/// Direction in which the real-valued kick count is rounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    #[default]
    Nearest,
    Up,
    Down,
}

impl Rounding {
    fn apply(self, x: f64) -> f64 {
        match self {
            Rounding::Nearest => (x + 0.5).floor(),
            Rounding::Up => x.ceil(),
            Rounding::Down => x.floor(),
        }
    }
}

impl std::str::FromStr for Rounding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(Rounding::Nearest),
            "up" => Ok(Rounding::Up),
            "down" => Ok(Rounding::Down),
            other => Err(Error::domain(format!("unknown rounding mode `{other}` (nearest|up|down)"))),
        }
    }
}

/// Above this ε the small-coupling picture behind the design is doubtful.
pub const EPSILON_WARNING: f64 = 0.01;

/// Target rotation angle of the maximally entangling gate.
pub const TARGET_THETA: f64 = PI / 4.0;

/// A solved gate design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDesign {
    pub species: IonSpecies,
    /// Ion spacing d (m).
    pub spacing: f64,
    /// Final transverse trap frequency ω_z (rad/s).
    pub omega_z: f64,
    /// Trap frequency before the integer adjustment (rad/s).
    pub initial_omega_z: f64,
    /// Real-valued kick count at the initial trap frequency.
    pub fractional_kicks: f64,
    pub rounding: Rounding,
    /// Kicks per arm M of the `(+M, −M)` sequence.
    pub kicks_per_arm: u32,
    pub epsilon: f64,
    /// Gate duration `2M·2π/ω_rep` (s).
    pub gate_time: f64,
    /// Phase difference Δφ at the final trap frequency (rad).
    pub delta_phi: f64,
    /// `(5π/8M)²`.
    pub roundoff_bound: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must be positive, got {v}")))
    }
}

/// `ε = e²/(4πε₀ m ω_z² d³)`.
pub fn epsilon(species: &IonSpecies, omega_z: f64, spacing: f64) -> Result<f64> {
    check_positive("trap frequency", omega_z)?;
    check_positive("ion spacing", spacing)?;
    Ok(coulomb_constant() / (species.mass() * omega_z * omega_z * spacing.powi(3)))
}

/// Trap frequency at which `Δφ = π/4` exactly:
/// `(3e²ħΔk²ω_rep² / 2π³ε₀m²d³)^{1/5}`.
pub fn initial_omega_z(species: &IonSpecies, spacing: f64) -> Result<f64> {
    check_positive("ion spacing", spacing)?;
    let c = crate::CODATA_2018;
    let e2 = c.elementary_charge * c.elementary_charge;
    let num = 3.0 * e2 * HBAR * species.delta_k().powi(2) * species.repetition_rate().powi(2);
    let den = 2.0 * PI.powi(3) * c.vacuum_permittivity * species.mass().powi(2) * spacing.powi(3);
    Ok((num / den).powf(0.2))
}

/// Phase difference `Δφ = 3εħΔk²ω_rep²/(2π m ω_z³)` (rad).
pub fn delta_phi(species: &IonSpecies, omega_z: f64, spacing: f64) -> Result<f64> {
    let eps = epsilon(species, omega_z, spacing)?;
    Ok(3.0 * eps * HBAR * species.delta_k().powi(2) * species.repetition_rate().powi(2)
        / (2.0 * PI * species.mass() * omega_z.powi(3)))
}

/// Upper bound `(5π/8M)²` on the infidelity from rounding M.
pub fn roundoff_bound(kicks_per_arm: u32) -> Result<f64> {
    if kicks_per_arm == 0 {
        return Err(Error::domain("kick count must be at least 1"));
    }
    Ok((5.0 * PI / (8.0 * kicks_per_arm as f64)).powi(2))
}

/// Real-valued kick count `(1 + ε/2) ω_rep/ω_z`.
pub fn kick_count(species: &IonSpecies, omega_z: f64, spacing: f64) -> Result<f64> {
    let eps = epsilon(species, omega_z, spacing)?;
    Ok((1.0 + eps / 2.0) * species.repetition_rate() / omega_z)
}

const MAX_ITERATIONS: usize = 100;

/// Solves the design for `species` at spacing `d`.
pub fn solve_design(species: &IonSpecies, spacing: f64, rounding: Rounding) -> Result<GateDesign> {
    let w0 = initial_omega_z(species, spacing)?;
    let m_real = kick_count(species, w0, spacing)?;
    let m = rounding.apply(m_real);
    if !(m >= 1.0 && m <= u32::MAX as f64) {
        return Err(Error::domain(format!("kick count {m_real} rounds to {m}, outside the supported range")));
    }
    let kicks = m as u32;
    let w_rep = species.repetition_rate();

    // ω ← (1 + ε(ω)/2) ω_rep / M; contraction factor O(ε)
    let mut w = w_rep / m;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let next = (1.0 + epsilon(species, w, spacing)? / 2.0) * w_rep / m;
        let change = (next - w).abs() / next;
        w = next;
        if change < 1e-14 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { what: "trap-frequency fixed point", iterations: MAX_ITERATIONS });
    }

    let eps = epsilon(species, w, spacing)?;
    let mut warnings = Vec::new();
    if eps >= EPSILON_WARNING {
        warnings.push(format!("epsilon = {eps:.3e} is not small; the design assumes epsilon << 1"));
    }
    Ok(GateDesign {
        species: species.clone(),
        spacing,
        omega_z: w,
        initial_omega_z: w0,
        fractional_kicks: m_real,
        rounding,
        kicks_per_arm: kicks,
        epsilon: eps,
        gate_time: 2.0 * m / (w_rep / (2.0 * PI)),
        delta_phi: delta_phi(species, w, spacing)?,
        roundoff_bound: roundoff_bound(kicks)?,
        warnings,
    })
}

/// Infidelity estimates for a trap-frequency error δω_z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub delta_omega_rel: f64,
    /// `(5π δω_z / 4ω_z)²`
    pub rotation_infidelity: f64,
    /// `8π² η_z² M² (δω_z/ω_z)⁴`
    pub displacement_infidelity: f64,
}

pub fn sensitivity(design: &GateDesign, delta_omega: f64) -> Result<SensitivityReport> {
    let rel = delta_omega / design.omega_z;
    if !(rel.abs() < 1.0) {
        return Err(Error::domain(format!("|δω_z| must be below ω_z, got relative shift {rel}")));
    }
    let species = &design.species;
    let eta = species.delta_k() * (HBAR / (2.0 * species.mass() * design.omega_z)).sqrt();
    let m = design.kicks_per_arm as f64;
    Ok(SensitivityReport {
        delta_omega_rel: rel,
        rotation_infidelity: (5.0 * PI * rel / 4.0).powi(2),
        displacement_infidelity: 8.0 * PI * PI * eta * eta * m * m * rel.powi(4),
    })
}

impl GateDesign {
    /// Signed arm lengths of the `(+M, −M)` sequence.
    pub fn pattern(&self) -> [i64; 2] {
        let m = self.kicks_per_arm as i64;
        [m, -m]
    }

    /// Lamb-Dicke parameter at the trap frequency.
    pub fn eta_z(&self) -> f64 {
        self.species.delta_k() * (HBAR / (2.0 * self.species.mass() * self.omega_z)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin_species;

    fn yb() -> IonSpecies {
        builtin_species("Yb171").unwrap()
    }

    #[test]
    fn epsilon_values() {
        let e = epsilon(&yb(), 2.0 * PI * 0.5444e6, 50e-6).unwrap();
        assert!((e - 0.00056).abs() < 0.000005, "{e}");
        let e = epsilon(&yb(), 2.0 * PI * 0.2073e6, 250e-6).unwrap();
        assert!((e / 3.1e-5 - 1.0).abs() < 0.02, "{e}");
        let a = epsilon(&yb(), 1e6, 40e-6).unwrap();
        let b = epsilon(&yb(), 1e6, 80e-6).unwrap();
        assert!((a / b - 8.0).abs() < 1e-12);
        assert!(epsilon(&yb(), 0.0, 1e-5).is_err());
    }

    #[test]
    fn initial_frequency_power_law() {
        let s = yb();
        let a = initial_omega_z(&s, 30e-6).unwrap();
        let b = initial_omega_z(&s, 240e-6).unwrap();
        assert!((b / a - 8f64.powf(-0.6)).abs() < 1e-13);
        let slope = (b.ln() - a.ln()) / (240e-6f64.ln() - 30e-6f64.ln());
        assert!((slope + 0.6).abs() < 1e-10);
    }

    #[test]
    fn delta_phi_inverts_initial_frequency() {
        for name in ["Yb171", "Be9", "Ca40"] {
            let s = builtin_species(name).unwrap();
            for d in [30e-6, 77e-6, 250e-6] {
                let w = initial_omega_z(&s, d).unwrap();
                let dp = delta_phi(&s, w, d).unwrap();
                assert!((dp / (PI / 4.0) - 1.0).abs() < 1e-12);
                let ratio = delta_phi(&s, 2.0 * w, d).unwrap() / dp;
                assert!((ratio - 1.0 / 32.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn roundoff_bound_values() {
        // (5π/1176)², (5π/3088)²
        assert!((roundoff_bound(147).unwrap() - 1.784_124_308_9e-4).abs() < 1e-13);
        assert!((roundoff_bound(386).unwrap() - 2.587_528_671_4e-5).abs() < 1e-14);
        let r = roundoff_bound(21).unwrap() / roundoff_bound(42).unwrap();
        assert!((r - 4.0).abs() < 1e-13);
        assert!(roundoff_bound(0).is_err());
    }

    #[test]
    fn yb_50um_design() {
        let g = solve_design(&yb(), 50e-6, Rounding::Nearest).unwrap();
        assert_eq!(g.kicks_per_arm, 147);
        assert!((g.omega_z / (2.0 * PI) / 0.5444e6 - 1.0).abs() < 1e-3);
        assert!((g.gate_time - 3.675e-6).abs() < 1e-15);
        assert!(g.warnings.is_empty());
        // relative Δφ change bounded by 5/2M
        assert!((g.delta_phi / (PI / 4.0) - 1.0).abs() <= 5.0 / (2.0 * 147.0));
    }

    #[test]
    fn design_self_consistency() {
        for name in ["Yb171", "Be9", "Ca40"] {
            let s = builtin_species(name).unwrap();
            for rounding in [Rounding::Nearest, Rounding::Up, Rounding::Down] {
                for d in [30e-6, 50e-6, 120e-6, 250e-6] {
                    let g = solve_design(&s, d, rounding).unwrap();
                    let m = kick_count(&s, g.omega_z, d).unwrap();
                    assert!((m / g.kicks_per_arm as f64 - 1.0).abs() < 1e-12);
                    let f_rep = s.repetition_rate() / (2.0 * PI);
                    assert_eq!(g.gate_time, 2.0 * g.kicks_per_arm as f64 / f_rep);
                    if rounding == Rounding::Nearest {
                        let shift = (g.omega_z - g.initial_omega_z).abs() / g.initial_omega_z;
                        assert!(shift <= 1.0 / (2.0 * g.kicks_per_arm as f64) + 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn rounding_modes_bracket_the_real_count() {
        let s = yb();
        let up = solve_design(&s, 250e-6, Rounding::Up).unwrap();
        let down = solve_design(&s, 250e-6, Rounding::Down).unwrap();
        assert_eq!(up.kicks_per_arm, down.kicks_per_arm + 1);
        assert!(up.omega_z < down.omega_z);
        assert_eq!("down".parse::<Rounding>().unwrap(), Rounding::Down);
        assert!("sideways".parse::<Rounding>().is_err());
    }

    #[test]
    fn monotone_in_spacing() {
        for name in ["Yb171", "Be9", "Ca40"] {
            let s = builtin_species(name).unwrap();
            let designs: Vec<GateDesign> = (0..=22)
                .map(|i| solve_design(&s, (30.0 + 10.0 * i as f64) * 1e-6, Rounding::Nearest).unwrap())
                .collect();
            for w in designs.windows(2) {
                assert!(w[1].omega_z < w[0].omega_z);
                assert!(w[1].kicks_per_arm > w[0].kicks_per_arm);
            }
        }
    }

    #[test]
    fn epsilon_warning() {
        // very small spacing pushes ε up
        let g = solve_design(&yb(), 1e-6, Rounding::Nearest).unwrap();
        assert!(g.epsilon >= EPSILON_WARNING);
        assert_eq!(g.warnings.len(), 1);
    }

    #[test]
    fn sensitivity_laws() {
        let g = solve_design(&yb(), 50e-6, Rounding::Nearest).unwrap();
        let zero = sensitivity(&g, 0.0).unwrap();
        assert_eq!(zero.rotation_infidelity, 0.0);
        assert_eq!(zero.displacement_infidelity, 0.0);
        let r = sensitivity(&g, 1e-3 * g.omega_z).unwrap();
        // (5π·1e-3/4)² = 1.5421e-5
        assert!((r.rotation_infidelity - 1.542_125_7e-5).abs() < 1e-12);
        let r2 = sensitivity(&g, 2e-3 * g.omega_z).unwrap();
        assert!((r2.displacement_infidelity / r.displacement_infidelity - 16.0).abs() < 1e-9);
        assert!((r2.rotation_infidelity / r.rotation_infidelity - 4.0).abs() < 1e-12);
        assert!(sensitivity(&g, -2.0 * g.omega_z).is_err());
    }

    #[test]
    fn bad_spacing() {
        assert!(solve_design(&yb(), -1.0, Rounding::Nearest).is_err());
        assert!(solve_design(&yb(), 0.0, Rounding::Nearest).is_err());
    }
}
