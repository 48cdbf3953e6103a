//! Ion geometries, the transverse potential matrix and its normal modes, and
//! the infinite square-lattice dispersion relation.
//!
//! The transverse potential matrix of `N` ions with a uniform trap frequency
//! `ω_z` is
//!
//! ```text
//! V_ij = (e²/4πε₀) / r_ij³                       (i ≠ j)
//! V_ii = m ω_z² − Σ_{k≠i} (e²/4πε₀) / r_ik³
//! ```
//!
//! Internally it is stored as `m ω_z² · 1 + (e²/4πε₀d³) · K`, with `K` the
//! dimensionless dipole coupling matrix in units of the lattice spacing `d`.
//! The modes are computed from `K`, whose entries are O(1), so the O(ε)
//! splitting of the transverse band keeps full relative precision.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::coulomb_constant;
use crate::{Error, Result};

/// Equilibrium positions of a planar ion crystal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    positions: Vec<[f64; 2]>,
    spacing: f64,
    shape: Option<(usize, usize)>,
}

impl LatticeGeometry {
    /// A `rows × cols` square lattice. Ion `(α, β)` sits at `(αd, βd)` and has
    /// index `α·cols + β`.
    pub fn square(rows: usize, cols: usize, spacing: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::domain(format!("lattice needs at least one row and column, got {rows}x{cols}")));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::domain(format!("lattice spacing must be positive, got {spacing}")));
        }
        let positions = (0..rows)
            .flat_map(|a| (0..cols).map(move |b| [a as f64 * spacing, b as f64 * spacing]))
            .collect();
        Ok(LatticeGeometry { positions, spacing, shape: Some((rows, cols)) })
    }

    /// An arbitrary planar arrangement. The spacing is the minimum pairwise
    /// distance (or 1 m for a single ion).
    pub fn from_positions(positions: Vec<[f64; 2]>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::domain("geometry needs at least one ion"));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::domain("ion positions must be finite"));
        }
        let mut spacing = f64::INFINITY;
        for i in 0..positions.len() {
            for j in 0..i {
                let r = dist(positions[i], positions[j]);
                if r <= 0.0 {
                    return Err(Error::domain(format!("ions {j} and {i} coincide")));
                }
                spacing = spacing.min(r);
            }
        }
        if positions.len() == 1 {
            spacing = 1.0;
        }
        Ok(LatticeGeometry { positions, spacing, shape: None })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    /// Lattice constant `d` (m).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `(rows, cols)` for square lattices.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.shape
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        dist(self.positions[i], self.positions[j])
    }

    /// Index of site `(row, col)` of a square lattice.
    pub fn index(&self, row: usize, col: usize) -> Option<usize> {
        let (rows, cols) = self.shape?;
        (row < rows && col < cols).then_some(row * cols + col)
    }

    /// Inverse of [`index`](Self::index).
    pub fn site(&self, index: usize) -> Option<(usize, usize)> {
        let (_, cols) = self.shape?;
        (index < self.len()).then_some((index / cols, index % cols))
    }

    /// The ion closest to the centre of the crystal's bounding box, ties
    /// going to the lowest index.
    pub fn central_ion(&self) -> usize {
        let (lo, hi) = self.positions.iter().fold(
            ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
            |(lo, hi), p| ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])]),
        );
        let centre = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        let mut best = 0;
        for (i, p) in self.positions.iter().enumerate() {
            if dist(*p, centre) < dist(self.positions[best], centre) - 1e-12 * self.spacing {
                best = i;
            }
        }
        best
    }

    pub fn max_pairwise_distance(&self) -> f64 {
        let mut max = 0.0f64;
        for i in 0..self.len() {
            for j in 0..i {
                max = max.max(self.distance(i, j));
            }
        }
        max
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Transverse potential matrix `V` (N/m).
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialMatrix {
    n: usize,
    /// Dimensionless dipole couplings `K`, row-major; rows sum to zero.
    coupling: Vec<f64>,
    /// `e²/4πε₀d³` (N/m).
    coulomb_scale: f64,
    spacing: f64,
    mass: f64,
    omega_z: f64,
}

/// Builds the transverse potential matrix of `geometry` for ions of mass
/// `mass` (kg) in a trap of frequency `omega_z` (rad/s).
pub fn potential_matrix(geometry: &LatticeGeometry, mass: f64, omega_z: f64) -> Result<PotentialMatrix> {
    if !(omega_z.is_finite() && omega_z > 0.0) {
        return Err(Error::domain(format!("trap frequency must be positive, got {omega_z}")));
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::domain(format!("ion mass must be positive, got {mass}")));
    }
    let n = geometry.len();
    let d = geometry.spacing();
    let mut coupling = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let r = geometry.distance(i, j) / d;
            if r <= 0.0 {
                return Err(Error::domain(format!("ions {j} and {i} coincide")));
            }
            let k = 1.0 / (r * r * r);
            coupling[i * n + j] = k;
            coupling[j * n + i] = k;
        }
    }
    let mut v = PotentialMatrix {
        n,
        coupling,
        coulomb_scale: coulomb_constant() / (d * d * d),
        spacing: d,
        mass,
        omega_z,
    };
    v.refresh_diagonal();
    Ok(v)
}

impl PotentialMatrix {
    fn refresh_diagonal(&mut self) {
        let n = self.n;
        for i in 0..n {
            self.coupling[i * n + i] = 0.0;
            let off: f64 = self.coupling[i * n..(i + 1) * n].iter().sum();
            self.coupling[i * n + i] = -off;
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn omega_z(&self) -> f64 {
        self.omega_z
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `e²/4πε₀d³` (N/m).
    pub fn coulomb_scale(&self) -> f64 {
        self.coulomb_scale
    }

    /// `ε = e²/4πε₀mω_z²d³`.
    pub fn epsilon(&self) -> f64 {
        self.coulomb_scale / (self.mass * self.omega_z * self.omega_z)
    }

    /// Entry `V_ij` (N/m).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let k = self.coulomb_scale * self.coupling[i * self.n + j];
        if i == j {
            self.mass * self.omega_z * self.omega_z + k
        } else {
            k
        }
    }

    /// Dimensionless coupling `K_ij`, with `V = mω_z² 1 + (e²/4πε₀d³) K`.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.entry(i, j)).collect()).collect()
    }

    /// Σ_j V_ij.
    pub fn row_sum(&self, i: usize) -> f64 {
        let k: f64 = self.coupling[i * self.n..(i + 1) * self.n].iter().sum();
        self.mass * self.omega_z * self.omega_z + self.coulomb_scale * k
    }

    /// A copy in which every Coulomb coupling between an ion of `group` and
    /// an ion outside it is removed (diagonal updated accordingly).
    pub fn decoupled(&self, group: &[usize]) -> Result<PotentialMatrix> {
        let n = self.n;
        let mut inside = vec![false; n];
        for &g in group {
            if g >= n {
                return Err(Error::domain(format!("ion {g} out of range for {n} ions")));
            }
            inside[g] = true;
        }
        let mut v = self.clone();
        for i in 0..n {
            for j in 0..n {
                if i != j && inside[i] != inside[j] {
                    v.coupling[i * n + j] = 0.0;
                }
            }
        }
        v.refresh_diagonal();
        Ok(v)
    }

    /// ‖V‖_F (N/m).
    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.entry(i, j).powi(2);
            }
        }
        s.sqrt()
    }
}

/// Transverse normal modes of a finite crystal.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    frequencies: Vec<f64>,
    /// Row-major N×N; column `k` is mode `k`, so entry `(j, k)` is `b_j^k`.
    modes: Vec<f64>,
    epsilon: f64,
    omega_z: f64,
}

/// Relative eigenvalue gap below which modes count as degenerate.
const DEGENERACY_TOL: f64 = 1e-10;

/// Diagonalizes `V/m`. Frequencies are ascending; each mode vector has its
/// largest-magnitude entry positive (ties go to the lowest index), and
/// vectors inside a degenerate cluster are ordered lexicographically.
pub fn normal_modes(v: &PotentialMatrix) -> Result<ModeSpectrum> {
    let n = v.dim();
    let k = faer::Mat::<f64>::from_fn(n, n, |i, j| v.coupling(i, j));
    let evd = k.self_adjoint_eigen(faer::Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let (s, u) = (evd.S(), evd.U());

    let eps = v.epsilon();
    let wz2 = v.omega_z() * v.omega_z();
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n);
    for c in 0..n {
        let mu = s[c];
        let radicand = 1.0 + eps * mu;
        if !(radicand > 0.0) {
            return Err(Error::Instability { mode: c, eigenvalue: v.mass() * wz2 * radicand });
        }
        let mut col: Vec<f64> = (0..n).map(|r| u[(r, c)]).collect();
        fix_sign(&mut col);
        pairs.push((mu, col));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // order degenerate clusters by their (sign-fixed) vectors
    let scale = pairs.iter().map(|p| p.0.abs()).fold(1.0, f64::max);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pairs[end].0 - pairs[end - 1].0 <= DEGENERACY_TOL * scale {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|a, b| lexicographic(&a.1, &b.1));
        }
        start = end;
    }

    let mut modes = vec![0.0; n * n];
    let mut frequencies = Vec::with_capacity(n);
    for (c, (mu, col)) in pairs.iter().enumerate() {
        frequencies.push(v.omega_z() * (1.0 + eps * mu).sqrt());
        for (r, x) in col.iter().enumerate() {
            modes[r * n + c] = *x;
        }
    }
    Ok(ModeSpectrum { frequencies, modes, epsilon: eps, omega_z: v.omega_z() })
}

fn fix_sign(col: &mut [f64]) {
    let max = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(lead) = col.iter().position(|x| x.abs() >= max * (1.0 - 1e-9)) {
        if col[lead] < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

impl ModeSpectrum {
    /// Assembles a spectrum from explicit data; the mode matrix is row-major
    /// with column `k` holding mode `k`.
    pub fn from_parts(frequencies: Vec<f64>, mode_matrix: Vec<f64>, epsilon: f64, omega_z: f64) -> Result<Self> {
        let n = frequencies.len();
        if mode_matrix.len() != n * n {
            return Err(Error::domain(format!("mode matrix has {} entries, expected {}", mode_matrix.len(), n * n)));
        }
        if frequencies.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::domain("mode frequencies must be positive"));
        }
        Ok(ModeSpectrum { frequencies, modes: mode_matrix, epsilon, omega_z })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Mode frequencies ω_k (rad/s), ascending.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn omega_z(&self) -> f64 {
        self.omega_z
    }

    /// Participation `b_ion^mode`.
    pub fn participation(&self, ion: usize, mode: usize) -> f64 {
        self.modes[ion * self.len() + mode]
    }

    /// Row-major mode matrix.
    pub fn mode_matrix(&self) -> &[f64] {
        &self.modes
    }

    /// Column `mode` as a vector over ions.
    pub fn mode_vector(&self, mode: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.participation(i, mode)).collect()
    }

    /// max |bᵀb − 1|.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..=a {
                let dot: f64 = (0..n).map(|i| self.participation(i, a) * self.participation(i, b)).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    pub fn to_document(&self) -> ModeSpectrumDocument {
        let n = self.len();
        ModeSpectrumDocument {
            schema_version: MODE_SCHEMA_VERSION,
            omega_z_hz: self.omega_z / (2.0 * PI),
            epsilon: self.epsilon,
            frequencies_hz: self.frequencies.iter().map(|w| w / (2.0 * PI)).collect(),
            mode_matrix: (0..n).map(|r| self.modes[r * n..(r + 1) * n].to_vec()).collect(),
        }
    }

    pub fn from_document(doc: &ModeSpectrumDocument) -> Result<Self> {
        if doc.schema_version != MODE_SCHEMA_VERSION {
            return Err(Error::domain(format!("unsupported mode schema version {}", doc.schema_version)));
        }
        let n = doc.frequencies_hz.len();
        if doc.mode_matrix.len() != n || doc.mode_matrix.iter().any(|r| r.len() != n) {
            return Err(Error::domain("mode matrix must be square and match the frequency count"));
        }
        Self::from_parts(
            doc.frequencies_hz.iter().map(|f| f * 2.0 * PI).collect(),
            doc.mode_matrix.concat(),
            doc.epsilon,
            doc.omega_z_hz * 2.0 * PI,
        )
    }
}

pub const MODE_SCHEMA_VERSION: u32 = 1;

/// Serialized [`ModeSpectrum`]: frequencies as ω/2π, mode matrix row-major
/// (row = ion, column = mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrumDocument {
    pub schema_version: u32,
    pub omega_z_hz: f64,
    pub epsilon: f64,
    pub frequencies_hz: Vec<f64>,
    pub mode_matrix: Vec<Vec<f64>>,
}

/// Square-cutoff lattice sum split into the direct part and the continuum
/// tail estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSum {
    pub direct: f64,
    pub tail: f64,
}

impl LatticeSum {
    pub fn total(&self) -> f64 {
        self.direct + self.tail
    }
}

/// `Σ' 1/(α²+β²)^p` over all integer pairs except the origin.
pub fn lattice_sum(p: f64, radius: usize) -> Result<f64> {
    lattice_sum_parts(p, radius).map(|s| s.total())
}

/// Direct summation over `|α|, |β| ≤ radius` plus the integral of `r^(-2p)`
/// outside the square of half-width `radius + 1/2` covered by those sites.
pub fn lattice_sum_parts(p: f64, radius: usize) -> Result<LatticeSum> {
    if !(p > 1.0) {
        return Err(Error::Divergence { p });
    }
    if radius == 0 {
        return Err(Error::domain("lattice-sum radius must be at least 1"));
    }
    // one quadrant (α ≥ 1, β ≥ 0) times four, small terms first
    let r = radius as i64;
    let mut direct = 0.0;
    for a in (1..=r).rev() {
        let mut row = 0.0;
        for b in (0..=r).rev() {
            let q = (a * a + b * b) as f64;
            row += q.powf(-p);
        }
        direct += row;
    }
    direct *= 4.0;

    let half_width = radius as f64 + 0.5;
    let tail = half_width.powf(2.0 - 2.0 * p) * 8.0 / (2.0 * p - 2.0) * cos_power_integral(2.0 * p - 2.0);
    Ok(LatticeSum { direct, tail })
}

/// ∫₀^{π/4} cos^q θ dθ by composite Simpson.
fn cos_power_integral(q: f64) -> f64 {
    let n = 512;
    let h = PI / 4.0 / n as f64;
    let f = |t: f64| t.cos().powf(q);
    let mut s = f(0.0) + f(PI / 4.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

/// Half-plane table of `1/(α²+β²)^{3/2}` for the dipole sums of the
/// dispersion relation and its gradient.
pub(crate) struct DipoleTable {
    /// (α, β, weight) with (α, β) in the half plane α > 0, or α = 0 and β > 0.
    pub(crate) terms: Vec<(f64, f64, f64)>,
}

impl DipoleTable {
    pub(crate) fn new(radius: usize) -> Self {
        let r = radius as i64;
        let mut terms = Vec::with_capacity((2 * radius + 1) * (2 * radius + 1) / 2);
        for a in (0..=r).rev() {
            for b in (-r..=r).rev() {
                if a == 0 && b <= 0 {
                    continue;
                }
                let q = (a * a + b * b) as f64;
                terms.push((a as f64, b as f64, 1.0 / (q * q.sqrt())));
            }
        }
        DipoleTable { terms }
    }

    /// `Σ' [1 − cos(αx + βy)] / (α²+β²)^{3/2}` for dimensionless `x = k₁d`,
    /// `y = k₂d`.
    pub(crate) fn band_sum(&self, x: f64, y: f64) -> f64 {
        2.0 * self.terms.iter().map(|&(a, b, w)| w * (1.0 - (a * x + b * y).cos())).sum::<f64>()
    }

    /// `Σ' sin(αx + βy) (α, β) / (α²+β²)^{3/2}`.
    pub(crate) fn sine_sum(&self, x: f64, y: f64) -> [f64; 2] {
        let mut s = [0.0; 2];
        for &(a, b, w) in &self.terms {
            let t = w * (a * x + b * y).sin();
            s[0] += t * a;
            s[1] += t * b;
        }
        [2.0 * s[0], 2.0 * s[1]]
    }
}

/// One point of the infinite-lattice transverse band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionPoint {
    /// rad/m
    pub k1: f64,
    /// rad/m
    pub k2: f64,
    /// ω(k) from the square-root form (rad/s).
    pub omega: f64,
    /// First-order expansion in ε (rad/s).
    pub omega_first_order: f64,
}

/// Transverse dispersion `ω(k) = ω_z √(1 − ε Σ' [1 − cos(k·r)]/|r/d|³)` of an
/// infinite square lattice, truncated at `|α|, |β| ≤ radius`.
pub fn dispersion(k1: f64, k2: f64, omega_z: f64, epsilon: f64, spacing: f64, radius: usize) -> Result<DispersionPoint> {
    let table = DipoleTable::new(check_band_args(omega_z, epsilon, spacing, radius)?);
    dispersion_with(&table, k1, k2, omega_z, epsilon, spacing)
}

/// `dispersion` on every point of `zone_grid(points)²`, row-major in `(k₁, k₂)`.
pub fn dispersion_grid(points: usize, omega_z: f64, epsilon: f64, spacing: f64, radius: usize) -> Result<Vec<DispersionPoint>> {
    if points < 2 {
        return Err(Error::domain(format!("dispersion grid needs at least 2 points per axis, got {points}")));
    }
    let table = DipoleTable::new(check_band_args(omega_z, epsilon, spacing, radius)?);
    let ks: Vec<f64> = crate::propagation::zone_grid(points).into_iter().map(|x| x / spacing).collect();
    let pairs: Vec<(f64, f64)> = ks.iter().flat_map(|a| ks.iter().map(move |b| (*a, *b))).collect();
    pairs.par_iter().map(|&(k1, k2)| dispersion_with(&table, k1, k2, omega_z, epsilon, spacing)).collect()
}

pub(crate) fn check_band_args(omega_z: f64, epsilon: f64, spacing: f64, radius: usize) -> Result<usize> {
    if !(omega_z.is_finite() && omega_z > 0.0) {
        return Err(Error::domain(format!("trap frequency must be positive, got {omega_z}")));
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::domain(format!("epsilon must be non-negative, got {epsilon}")));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::domain(format!("spacing must be positive, got {spacing}")));
    }
    if radius == 0 {
        return Err(Error::domain("truncation radius must be at least 1"));
    }
    Ok(radius)
}

pub(crate) fn check_zone(k1: f64, k2: f64, spacing: f64) -> Result<()> {
    let edge = PI / spacing;
    let inside = |k: f64| k > -edge * (1.0 + 1e-12) && k <= edge * (1.0 + 1e-12);
    if !(inside(k1) && inside(k2)) {
        return Err(Error::domain(format!("wave vector ({k1}, {k2}) outside the first Brillouin zone")));
    }
    Ok(())
}

pub(crate) fn dispersion_with(
    table: &DipoleTable,
    k1: f64,
    k2: f64,
    omega_z: f64,
    epsilon: f64,
    spacing: f64,
) -> Result<DispersionPoint> {
    check_zone(k1, k2, spacing)?;
    let s = table.band_sum(k1 * spacing, k2 * spacing);
    let radicand = 1.0 - epsilon * s;
    if !(radicand > 0.0) {
        return Err(Error::Instability { mode: 0, eigenvalue: radicand * omega_z * omega_z });
    }
    Ok(DispersionPoint {
        k1,
        k2,
        omega: omega_z * radicand.sqrt(),
        omega_first_order: omega_z * (1.0 - epsilon * s / 2.0),
    })
}
