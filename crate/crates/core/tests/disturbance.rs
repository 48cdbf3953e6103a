use std::f64::consts::PI;

use ionkick::design::{solve_design, Rounding};
use ionkick::lattice::{normal_modes, potential_matrix};
use ionkick::propagation::{evolve_disturbance, max_group_velocity};
use ionkick::{builtin_species, LatticeGeometry};

fn yb_41() -> (LatticeGeometry, ionkick::ModeSpectrum) {
    let yb = builtin_species("Yb171").unwrap();
    let design = solve_design(&yb, 50e-6, Rounding::Nearest).unwrap();
    let geom = LatticeGeometry::square(41, 41, 50e-6).unwrap();
    let v = potential_matrix(&geom, yb.mass(), design.omega_z).unwrap();
    (geom, normal_modes(&v).unwrap())
}

#[test]
fn light_cone_on_41x41() {
    let (geom, modes) = yb_41();
    let wz = modes.omega_z();
    let window = 2.0 * PI / wz;
    let times: Vec<f64> = (0..=128).map(|s| window * s as f64 / 128.0).collect();
    let source = geom.central_ion();
    let resp = evolve_disturbance(&modes, source, 1e-8, 0.0, &times).unwrap();

    let drift = resp.energy_drift();
    assert!(drift < 1e-9, "energy drift {drift:e}");

    // exterior decay follows the dipole coupling
    let fit = resp.radial_fit(&geom, 4.0, 14.0).unwrap();
    assert!((fit.exponent + 3.0).abs() < 0.5, "exponent {}", fit.exponent);

    // ions beyond the cone carry O(ε) of the source response
    let eps = modes.epsilon();
    let (_, vnorm) = max_group_velocity(eps, wz, 50e-6, 201).unwrap();
    let cone = vnorm * eps * wz * window + 3.0;
    let ratio = resp.exterior_ratio(&geom, cone).unwrap();
    assert!(ratio < eps, "exterior ratio {ratio:e} vs ε = {eps:e}");
}

#[test]
fn velocity_kick_conserves_energy() {
    let (_, modes) = yb_41();
    let times: Vec<f64> = (0..50).map(|s| s as f64 * 3.7e-7).collect();
    let resp = evolve_disturbance(&modes, 0, 0.0, 1e-3, &times).unwrap();
    assert!(resp.energy_drift() < 1e-9);
    assert_eq!(resp.envelopes.len(), 41 * 41);
}
