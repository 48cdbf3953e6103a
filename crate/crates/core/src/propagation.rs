//! How fast a local disturbance spreads through the crystal.
//!
//! To first order in ε the transverse band has group velocity
//! `v_g(k) = −(εω_z d/2) Σ' sin(αk₁d + βk₂d) (α, β)/(α²+β²)^{3/2}`, which
//! bounds the speed of the light cone. On a finite lattice the exact response
//! to a kicked ion is a superposition of normal modes.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::fit::{power_law_fit, PowerLawFit};
use crate::lattice::{check_band_args, check_zone, DipoleTable, LatticeGeometry, ModeSpectrum};
use crate::{Error, Result};

/// Truncation radius of the direct group-velocity sum.
pub const DEFAULT_VELOCITY_RADIUS: usize = 200;

/// `v_g(k)` (m/s) from the dipole sum truncated at `|α|, |β| ≤ radius`.
pub fn group_velocity(k1: f64, k2: f64, epsilon: f64, omega_z: f64, spacing: f64, radius: usize) -> Result<[f64; 2]> {
    check_band_args(omega_z, epsilon, spacing, radius)?;
    check_zone(k1, k2, spacing)?;
    let s = DipoleTable::new(radius).sine_sum(k1 * spacing, k2 * spacing);
    let scale = -epsilon * omega_z * spacing / 2.0;
    Ok([scale * s[0], scale * s[1]])
}

/// Grid coordinates `k·d = 2π(i − ⌊(n−1)/2⌋)/n`, all in `(−π, π]`.
pub fn zone_grid(points: usize) -> Vec<f64> {
    let shift = (points as i64 - 1) / 2;
    (0..points as i64).map(|i| 2.0 * PI * (i - shift) as f64 / points as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupVelocityField {
    pub grid: usize,
    pub radius: usize,
    pub spacing: f64,
    pub epsilon: f64,
    pub omega_z: f64,
    /// Dimensionless `k·d` values along each axis.
    pub k_values: Vec<f64>,
    /// Row-major: entry `i·grid + j` is `v_g(k_values[i], k_values[j])` (m/s).
    pub velocities: Vec<[f64; 2]>,
    pub max_speed: f64,
    /// `max_speed / (εω_z d)`
    pub normalized_max: f64,
    /// `(k₁d, k₂d)` where the maximum is attained.
    pub argmax: (f64, f64),
}

impl GroupVelocityField {
    pub fn at(&self, i: usize, j: usize) -> [f64; 2] {
        self.velocities[i * self.grid + j]
    }
}

/// `v_g` over the `grid × grid` zone sample. Uses
/// `sin(αx + βy) = sin αx cos βy + cos αx sin βy` so the cost is
/// `O(grid·radius² + grid²·radius)`.
pub fn velocity_field(epsilon: f64, omega_z: f64, spacing: f64, grid: usize, radius: usize) -> Result<GroupVelocityField> {
    check_band_args(omega_z, epsilon, spacing, radius)?;
    if grid < 3 {
        return Err(Error::domain(format!("velocity grid needs at least 3 points per axis, got {grid}")));
    }
    let ks = zone_grid(grid);
    let r = radius as i64;
    let width = 2 * radius + 1;
    let idx = |a: i64| (a + r) as usize;
    // sin/cos(α k_i) for α ∈ [−R, R]
    let mut sin_t = vec![0.0; grid * width];
    let mut cos_t = vec![0.0; grid * width];
    for (i, k) in ks.iter().enumerate() {
        for a in -r..=r {
            let (s, c) = (a as f64 * k).sin_cos();
            sin_t[i * width + idx(a)] = s;
            cos_t[i * width + idx(a)] = c;
        }
    }
    let weight = |a: i64, b: i64| {
        if a == 0 && b == 0 {
            0.0
        } else {
            let q = (a * a + b * b) as f64;
            1.0 / (q * q.sqrt())
        }
    };
    // partial sums over β for each (α, j):
    //   gc[α][j] = Σ_β w cos βk_j,  gs[α][j] = Σ_β w sin βk_j,
    //   hc[α][j] = Σ_β β w cos βk_j, hs[α][j] = Σ_β β w sin βk_j
    let partial: Vec<[Vec<f64>; 4]> = (-r..=r)
        .into_par_iter()
        .map(|a| {
            let mut out = [vec![0.0; grid], vec![0.0; grid], vec![0.0; grid], vec![0.0; grid]];
            for j in 0..grid {
                let (mut gc, mut gs, mut hc, mut hs) = (0.0, 0.0, 0.0, 0.0);
                for b in -r..=r {
                    let w = weight(a, b);
                    let (s, c) = (sin_t[j * width + idx(b)], cos_t[j * width + idx(b)]);
                    gc += w * c;
                    gs += w * s;
                    hc += b as f64 * w * c;
                    hs += b as f64 * w * s;
                }
                out[0][j] = gc;
                out[1][j] = gs;
                out[2][j] = hc;
                out[3][j] = hs;
            }
            out
        })
        .collect();

    let scale = -epsilon * omega_z * spacing / 2.0;
    let velocities: Vec<[f64; 2]> = (0..grid * grid)
        .into_par_iter()
        .map(|p| {
            let (i, j) = (p / grid, p % grid);
            let (mut vx, mut vy) = (0.0, 0.0);
            for a in -r..=r {
                let (s, c) = (sin_t[i * width + idx(a)], cos_t[i * width + idx(a)]);
                let g = &partial[idx(a)];
                // Σ_β w sin(αx + βy) and Σ_β β w sin(αx + βy)
                let plain = s * g[0][j] + c * g[1][j];
                let beta = s * g[2][j] + c * g[3][j];
                vx += a as f64 * plain;
                vy += beta;
            }
            [scale * vx, scale * vy]
        })
        .collect();

    let (best, max_speed) = velocities
        .iter()
        .enumerate()
        .map(|(p, v)| (p, v[0].hypot(v[1])))
        .fold((0, 0.0f64), |acc, x| if x.1 > acc.1 { x } else { acc });
    let unit = epsilon * omega_z * spacing;
    Ok(GroupVelocityField {
        grid,
        radius,
        spacing,
        epsilon,
        omega_z,
        argmax: (ks[best / grid], ks[best % grid]),
        k_values: ks,
        velocities,
        max_speed,
        normalized_max: if unit > 0.0 { max_speed / unit } else { 0.0 },
    })
}

/// Maximum `|v_g|` over the `grid × grid` zone sample with the sum truncated
/// at radius `(grid − 1)/2`. Returns `(m/s, in units of εω_z d)`.
pub fn max_group_velocity(epsilon: f64, omega_z: f64, spacing: f64, grid: usize) -> Result<(f64, f64)> {
    if grid < 3 {
        return Err(Error::domain(format!("velocity grid needs at least 3 points per axis, got {grid}")));
    }
    let f = velocity_field(epsilon, omega_z, spacing, grid, (grid - 1) / 2)?;
    Ok((f.max_speed, f.normalized_max))
}

/// Exact finite-lattice response to a displaced and/or moving source ion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisturbanceResponse {
    pub source: usize,
    /// m
    pub z0: f64,
    /// m/s
    pub v0: f64,
    /// s
    pub times: Vec<f64>,
    /// Per ion, `max_t |z_i(t)|` over the time grid (m).
    pub envelopes: Vec<f64>,
    /// `Σ_k (q̇_k² + ω_k² q_k²)` per time, from the reconstructed ion motion.
    pub energies: Vec<f64>,
    /// `z_i` at the last time (m).
    pub final_displacements: Vec<f64>,
}

/// Evolves `z_source(0) = z0`, `ż_source(0) = v0`, all other ions at rest.
pub fn evolve_disturbance(modes: &ModeSpectrum, source: usize, z0: f64, v0: f64, times: &[f64]) -> Result<DisturbanceResponse> {
    let n = modes.len();
    if source >= n {
        return Err(Error::domain(format!("source ion {source} out of range ({n} ions)")));
    }
    if times.is_empty() {
        return Err(Error::domain("time grid is empty"));
    }
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::domain(format!("times must be finite and nonnegative, got {t}")));
    }
    if !(z0.is_finite() && v0.is_finite()) {
        return Err(Error::domain("initial conditions must be finite"));
    }
    let w = modes.frequencies();
    let q0: Vec<f64> = (0..n).map(|k| modes.participation(source, k) * z0).collect();
    let p0: Vec<f64> = (0..n).map(|k| modes.participation(source, k) * v0).collect();

    // per time: ion displacements and velocities, then the re-projected energy
    let frames: Vec<(Vec<f64>, f64)> = times
        .par_iter()
        .map(|&t| {
            let mut q = vec![0.0; n];
            let mut qd = vec![0.0; n];
            for k in 0..n {
                let (s, c) = (w[k] * t).sin_cos();
                q[k] = q0[k] * c + p0[k] / w[k] * s;
                qd[k] = -q0[k] * w[k] * s + p0[k] * c;
            }
            let mut z = vec![0.0; n];
            let mut zd = vec![0.0; n];
            for i in 0..n {
                let row = &modes.mode_matrix()[i * n..(i + 1) * n];
                z[i] = row.iter().zip(&q).map(|(b, x)| b * x).sum();
                zd[i] = row.iter().zip(&qd).map(|(b, x)| b * x).sum();
            }
            let mut energy = 0.0;
            for (k, wk) in w.iter().enumerate() {
                let (mut a, mut b) = (0.0, 0.0);
                for i in 0..n {
                    let bik = modes.participation(i, k);
                    a += bik * z[i];
                    b += bik * zd[i];
                }
                energy += b * b + wk * wk * a * a;
            }
            (z, energy)
        })
        .collect();

    let mut envelopes = vec![0.0f64; n];
    for (z, _) in &frames {
        for (e, x) in envelopes.iter_mut().zip(z) {
            *e = e.max(x.abs());
        }
    }
    Ok(DisturbanceResponse {
        source,
        z0,
        v0,
        times: times.to_vec(),
        energies: frames.iter().map(|f| f.1).collect(),
        final_displacements: frames.last().map(|f| f.0.clone()).unwrap_or_default(),
        envelopes,
    })
}

impl DisturbanceResponse {
    /// `Σ_{r > radius} envelope² / envelope_source²`, with `r` in lattice units.
    pub fn exterior_ratio(&self, geometry: &LatticeGeometry, radius: f64) -> Result<f64> {
        self.check_geometry(geometry)?;
        let src = self.envelopes[self.source];
        if src == 0.0 {
            return Err(Error::domain("source ion never moves"));
        }
        let outside: f64 = (0..geometry.len())
            .filter(|i| geometry.distance(self.source, *i) / geometry.spacing() > radius)
            .map(|i| self.envelopes[i].powi(2))
            .sum();
        Ok(outside / (src * src))
    }

    /// Power-law fit of envelope against distance over ions with
    /// `r_min ≤ r ≤ r_max` (lattice units).
    pub fn radial_fit(&self, geometry: &LatticeGeometry, r_min: f64, r_max: f64) -> Result<PowerLawFit> {
        self.check_geometry(geometry)?;
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..geometry.len())
            .map(|i| (geometry.distance(self.source, i) / geometry.spacing(), self.envelopes[i]))
            .filter(|(r, _)| *r >= r_min && *r <= r_max)
            .unzip();
        power_law_fit(&xs, &ys)
    }

    /// Largest relative deviation of the energy from its initial value.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energies[0];
        self.energies.iter().map(|e| ((e - e0) / e0).abs()).fold(0.0, f64::max)
    }

    fn check_geometry(&self, geometry: &LatticeGeometry) -> Result<()> {
        if geometry.len() != self.envelopes.len() {
            return Err(Error::domain("geometry does not match the response"));
        }
        Ok(())
    }
}
