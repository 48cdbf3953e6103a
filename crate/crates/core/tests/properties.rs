use std::f64::consts::PI;

use ionkick::crosstalk::build_block_schedule;
use ionkick::design::{kick_count, solve_design, Rounding};
use ionkick::lattice::{dispersion, normal_modes, potential_matrix};
use ionkick::pulses::{build_pulse_sequence, gate_infidelity, rotation_angle};
use ionkick::{builtin_species, LatticeGeometry};
use proptest::prelude::*;

const W_REP: f64 = 2.0 * PI * 80e6;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_rows_sum_to_trap_stiffness(rows in 1usize..6, cols in 1usize..6, d_um in 5.0f64..300.0, f_mhz in 0.1f64..3.0) {
        let yb = builtin_species("Yb171").unwrap();
        let wz = 2.0 * PI * f_mhz * 1e6;
        let geom = LatticeGeometry::square(rows, cols, d_um * 1e-6).unwrap();
        let v = potential_matrix(&geom, yb.mass(), wz).unwrap();
        let target = yb.mass() * wz * wz;
        for i in 0..v.dim() {
            prop_assert!((v.row_sum(i) / target - 1.0).abs() < 1e-12);
            for j in 0..v.dim() {
                prop_assert_eq!(v.entry(i, j), v.entry(j, i));
                if i != j {
                    prop_assert!(v.entry(i, j) > 0.0);
                }
            }
        }
    }

    #[test]
    fn modes_are_orthonormal(rows in 1usize..7, cols in 1usize..7, d_um in 20.0f64..300.0) {
        let yb = builtin_species("Yb171").unwrap();
        let geom = LatticeGeometry::square(rows, cols, d_um * 1e-6).unwrap();
        let modes = normal_modes(&potential_matrix(&geom, yb.mass(), 2.0 * PI * 0.5e6).unwrap()).unwrap();
        prop_assert!(modes.orthonormality_error() < 1e-10);
        prop_assert!(modes.frequencies().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn dispersion_even_and_bounded(x in -0.999f64..0.999, y in -0.999f64..0.999, eps in 0.0f64..1e-2) {
        let (wz, d) = (1e6, 1e-5);
        let a = dispersion(x * PI / d, y * PI / d, wz, eps, d, 20).unwrap();
        let b = dispersion(-x * PI / d, -y * PI / d, wz, eps, d, 20).unwrap();
        prop_assert_eq!(a.omega, b.omega);
        prop_assert!(a.omega <= wz);
        prop_assert!(a.omega_first_order <= wz);
    }

    #[test]
    fn designs_are_self_consistent(d_um in 30.0f64..250.0, species in 0usize..3, rounding in 0usize..3) {
        let s = builtin_species(["Yb171", "Be9", "Ca40"][species]).unwrap();
        let r = [Rounding::Nearest, Rounding::Up, Rounding::Down][rounding];
        let g = solve_design(&s, d_um * 1e-6, r).unwrap();
        let m = kick_count(&s, g.omega_z, d_um * 1e-6).unwrap();
        prop_assert!((m / g.kicks_per_arm as f64 - 1.0).abs() < 1e-12);
        prop_assert!(g.epsilon < 0.01);
        prop_assert!((g.fractional_kicks - g.kicks_per_arm as f64).abs() <= 1.0);
    }

    #[test]
    fn sequence_length_is_the_arm_total(arms in proptest::collection::vec((1i64..20, any::<bool>()), 1..6)) {
        let pattern: Vec<i64> = arms.iter().map(|(a, s)| if *s { *a } else { -*a }).collect();
        let seq = build_pulse_sequence(&pattern, W_REP, 3e7).unwrap();
        prop_assert_eq!(seq.len() as i64, pattern.iter().map(|a| a.abs()).sum::<i64>());
        prop_assert!(seq.kick_times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn theta_is_symmetric_and_infidelity_bounded(m in 1i64..60, d_um in 30.0f64..200.0, t in 0.0f64..1e-3) {
        let yb = builtin_species("Yb171").unwrap();
        let geom = LatticeGeometry::square(2, 2, d_um * 1e-6).unwrap();
        let modes = normal_modes(&potential_matrix(&geom, yb.mass(), 2.0 * PI * 0.5e6).unwrap()).unwrap();
        let seq = build_pulse_sequence(&[m, -m], W_REP, yb.delta_k()).unwrap();
        prop_assert_eq!(
            rotation_angle(&modes, &seq, 0, 3, yb.mass()).unwrap(),
            rotation_angle(&modes, &seq, 3, 0, yb.mass()).unwrap()
        );
        let r = gate_infidelity(&modes, &seq, 0, 1, yb.mass(), t).unwrap();
        prop_assert!(r.worst_case_infidelity >= (r.theta - PI / 4.0).powi(2));
        prop_assert_eq!(r.average_infidelity, 0.8 * r.worst_case_infidelity);
    }

    #[test]
    fn schedules_partition_the_edges(n in 1usize..6, extra_r in 0usize..7, extra_c in 0usize..7) {
        let (rows, cols) = (n + 2 + extra_r, n + 2 + extra_c);
        let s = build_block_schedule(rows, cols, n).unwrap();
        let mut seen = std::collections::HashSet::new();
        for g in &s.groups {
            let mut ions = std::collections::HashSet::new();
            for &(a, b) in &g.gates {
                prop_assert!(ions.insert(a) && ions.insert(b));
                prop_assert!(seen.insert((a, b)));
            }
        }
        prop_assert_eq!(seen.len(), rows * (cols - 1) + cols * (rows - 1));
    }
}
