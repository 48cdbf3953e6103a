//! Spin-dependent kick sequences acting on a crystal's normal modes.
//!
//! For mode `k` with Lamb-Dicke parameter `η_k = Δk√(ħ/2mω_k)` the kicks leave
//! a residual displacement `α_j^k = iη_k b_j^k Σ_l s_l e^{iω_k t_l}` and imprint
//! the two-qubit angle
//! `Θ_ij = −2 Σ_k η_k² b_i^k b_j^k Σ_{l>m} s_l s_m sin ω_k(t_l − t_m)`.
//! Both depend on the sequence only through the per-mode sums held by
//! [`GateKernel`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::constants::{HBAR, KB};
use crate::design::TARGET_THETA;
use crate::lattice::ModeSpectrum;
use crate::{Error, Result};

/// Kick arrival times and directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    kick_times: Vec<f64>,
    signs: Vec<i8>,
    delta_k: f64,
    repetition_rate: f64,
    pattern: Vec<i64>,
    /// Set when kick `l` arrives at exactly `origin + l·period`.
    #[serde(default)]
    grid_origin: Option<f64>,
}

/// Builds the sequence for signed arm lengths, e.g. `[M, -M]` or
/// `[M, -2M, M]`. Kicks arrive at `t_l = l/f_rep` from `t = 0`.
pub fn build_pulse_sequence(pattern: &[i64], repetition_rate: f64, delta_k: f64) -> Result<PulseSequence> {
    if pattern.is_empty() {
        return Err(Error::domain("kick pattern is empty"));
    }
    if let Some(bad) = pattern.iter().find(|a| **a == 0) {
        return Err(Error::domain(format!("arm length must be nonzero, got {bad}")));
    }
    check_rates(repetition_rate, delta_k)?;
    let period = 2.0 * PI / repetition_rate;
    let mut signs = Vec::new();
    for &arm in pattern {
        let s = if arm > 0 { 1 } else { -1 };
        signs.extend(std::iter::repeat_n(s, arm.unsigned_abs() as usize));
    }
    let kick_times = (0..signs.len()).map(|l| l as f64 * period).collect();
    Ok(PulseSequence { kick_times, signs, delta_k, repetition_rate, pattern: pattern.to_vec(), grid_origin: Some(0.0) })
}

fn check_rates(repetition_rate: f64, delta_k: f64) -> Result<()> {
    if !(repetition_rate.is_finite() && repetition_rate > 0.0) {
        return Err(Error::domain(format!("repetition rate must be positive, got {repetition_rate}")));
    }
    if !(delta_k.is_finite() && delta_k > 0.0) {
        return Err(Error::domain(format!("Δk must be positive, got {delta_k}")));
    }
    Ok(())
}

impl PulseSequence {
    /// A sequence with no kicks.
    pub fn empty(repetition_rate: f64, delta_k: f64) -> Result<Self> {
        check_rates(repetition_rate, delta_k)?;
        Ok(PulseSequence {
            kick_times: Vec::new(),
            signs: Vec::new(),
            delta_k,
            repetition_rate,
            pattern: Vec::new(),
            grid_origin: Some(0.0),
        })
    }

    /// Arbitrary kicks; times must be strictly increasing and signs ±1.
    pub fn from_kicks(kick_times: Vec<f64>, signs: Vec<i8>, repetition_rate: f64, delta_k: f64) -> Result<Self> {
        check_rates(repetition_rate, delta_k)?;
        if kick_times.len() != signs.len() {
            return Err(Error::domain("kick times and signs differ in length"));
        }
        if kick_times.iter().any(|t| !t.is_finite()) || kick_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("kick times must be finite and strictly increasing"));
        }
        if signs.iter().any(|s| s.abs() != 1) {
            return Err(Error::domain("kick signs must be +1 or -1"));
        }
        Ok(PulseSequence { kick_times, signs, delta_k, repetition_rate, pattern: Vec::new(), grid_origin: None })
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    /// t_l (s).
    pub fn kick_times(&self) -> &[f64] {
        &self.kick_times
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn delta_k(&self) -> f64 {
        self.delta_k
    }

    pub fn repetition_rate(&self) -> f64 {
        self.repetition_rate
    }

    /// Pulse period `2π/ω_rep` (s).
    pub fn period(&self) -> f64 {
        2.0 * PI / self.repetition_rate
    }

    /// Time from the first kick to one period after the last.
    pub fn duration(&self) -> f64 {
        match (self.kick_times.first(), self.kick_times.last()) {
            (Some(a), Some(b)) => b - a + self.period(),
            _ => 0.0,
        }
    }

    /// Arm lengths this sequence was built from; empty for explicit kicks.
    pub fn pattern(&self) -> &[i64] {
        &self.pattern
    }

    /// `"(+147,-147)"`, or `"custom"` for explicit kicks.
    pub fn descriptor(&self) -> String {
        if self.pattern.is_empty() {
            return if self.signs.is_empty() { "()".into() } else { "custom".into() };
        }
        let arms: Vec<String> = self.pattern.iter().map(|a| format!("{a:+}")).collect();
        format!("({})", arms.join(","))
    }

    /// The same kicks delayed by `t0`.
    pub fn shifted(&self, t0: f64) -> Self {
        let mut out = self.clone();
        out.kick_times.iter_mut().for_each(|t| *t += t0);
        out.grid_origin = out.grid_origin.map(|o| o + t0);
        out
    }
}

/// Lamb-Dicke parameter `Δk√(ħ/2mω)`.
pub fn lamb_dicke(delta_k: f64, mass: f64, omega: f64) -> f64 {
    delta_k * (HBAR / (2.0 * mass * omega)).sqrt()
}

fn reduce(x: TwoFloat) -> TwoFloat {
    let k = (x.hi() / (2.0 * PI)).round();
    x - twofloat::consts::TAU * k
}

/// `Σ_l s_l e^{iωt_l}` and `Σ_{l>m} s_l s_m sin ω(t_l − t_m)`, accumulated in
/// double-double. Near-closed loops cancel to a few 1e-5 of the term size, so
/// plain f64 terms would cost about five digits. On the pulse grid the phases
/// are `ω·origin + l·(ω·period)` with `ω·period` taken as exact.
fn sequence_sums(seq: &PulseSequence, omega: f64) -> (Complex64, f64) {
    let theta = omega * seq.period();
    let phase_at = |l: usize| match seq.grid_origin {
        Some(origin) => reduce(TwoFloat::new_mul(l as f64, theta)) + reduce(TwoFloat::new_mul(omega, origin)),
        None => reduce(TwoFloat::new_mul(omega, seq.kick_times[l])),
    };
    let zero = TwoFloat::from(0.0);
    let (mut re, mut im, mut area) = (zero, zero, zero);
    for (l, s) in seq.signs.iter().enumerate() {
        let (sin, cos) = phase_at(l).sin_cos();
        let (zr, zi) = if *s > 0 { (cos, sin) } else { (-cos, -sin) };
        // Im(z · conj(P))
        area += zi * re - zr * im;
        re += zr;
        im += zi;
    }
    (Complex64::new(re.hi() + re.lo(), im.hi() + im.lo()), area.hi() + area.lo())
}

fn check_mass(mass: f64) -> Result<()> {
    if mass.is_finite() && mass > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("mass must be positive, got {mass}")))
    }
}

/// `α_j^k` for a single mode given its frequency and participation `b_j^k`.
pub fn mode_displacement(omega: f64, participation: f64, seq: &PulseSequence, mass: f64) -> Result<Complex64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::domain(format!("mode frequency must be positive, got {omega}")));
    }
    check_mass(mass)?;
    let eta = lamb_dicke(seq.delta_k, mass, omega);
    Ok(Complex64::i() * eta * participation * sequence_sums(seq, omega).0)
}

/// Per-mode sums of a sequence over a spectrum. `weights[k] = −2η_k²A_k` so
/// that `Θ_ij = Σ_k weights[k] b_i^k b_j^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateKernel {
    pub eta: Vec<f64>,
    pub displacement_sums: Vec<Complex64>,
    pub phase_sums: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GateKernel {
    pub fn new(modes: &ModeSpectrum, seq: &PulseSequence, mass: f64) -> Result<Self> {
        check_mass(mass)?;
        let per_mode: Vec<(f64, Complex64, f64)> = modes
            .frequencies()
            .par_iter()
            .map(|&w| {
                let (s, a) = sequence_sums(seq, w);
                (lamb_dicke(seq.delta_k, mass, w), s, a)
            })
            .collect();
        let mut kernel = GateKernel {
            eta: Vec::with_capacity(per_mode.len()),
            displacement_sums: Vec::with_capacity(per_mode.len()),
            phase_sums: Vec::with_capacity(per_mode.len()),
            weights: Vec::with_capacity(per_mode.len()),
        };
        for (eta, s, a) in per_mode {
            kernel.eta.push(eta);
            kernel.displacement_sums.push(s);
            kernel.phase_sums.push(a);
            kernel.weights.push(-2.0 * eta * eta * a);
        }
        Ok(kernel)
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    /// `α_ion^k`.
    pub fn alpha(&self, modes: &ModeSpectrum, ion: usize, mode: usize) -> Complex64 {
        Complex64::i() * self.eta[mode] * modes.participation(ion, mode) * self.displacement_sums[mode]
    }

    /// `Θ_ij`; symmetric in `i, j` by construction.
    pub fn theta(&self, modes: &ModeSpectrum, i: usize, j: usize) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * (modes.participation(i, k) * modes.participation(j, k)))
            .sum()
    }
}

fn check_pair(modes: &ModeSpectrum, i: usize, j: usize) -> Result<()> {
    let n = modes.len();
    if i >= n || j >= n {
        return Err(Error::domain(format!("ion index out of range: ({i}, {j}) with {n} ions")));
    }
    if i == j {
        return Err(Error::domain(format!("gate needs two distinct ions, got ({i}, {j})")));
    }
    Ok(())
}

pub fn rotation_angle(modes: &ModeSpectrum, seq: &PulseSequence, i: usize, j: usize, mass: f64) -> Result<f64> {
    check_pair(modes, i, j)?;
    Ok(GateKernel::new(modes, seq, mass)?.theta(modes, i, j))
}

/// `coth(ħω/2k_BT)`; 1 at `T = 0`.
pub fn thermal_factor(omega: f64, temperature: f64) -> Result<f64> {
    if !(temperature.is_finite() && temperature >= 0.0) {
        return Err(Error::domain(format!("temperature must be nonnegative, got {temperature}")));
    }
    if temperature == 0.0 {
        return Ok(1.0);
    }
    let x = HBAR * omega / (2.0 * KB * temperature);
    if x < 1e-8 {
        return Err(Error::domain(format!("ħω/2k_BT = {x:e} is in the classical limit")));
    }
    Ok(1.0 + 2.0 / (2.0 * x).exp_m1())
}

/// Infidelity of the gate on ions `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    pub ions: (usize, usize),
    pub theta: f64,
    /// `α_i^k` per mode.
    pub alphas_i: Vec<Complex64>,
    /// `α_j^k` per mode.
    pub alphas_j: Vec<Complex64>,
    pub rotation_error: f64,
    pub displacement_error: f64,
    /// δF
    pub worst_case_infidelity: f64,
    /// `4δF/5`
    pub average_infidelity: f64,
    /// K
    pub temperature: f64,
    /// `(k, (|α_i^k|² + |α_j^k|²) coth(ħω_k/2k_BT))`
    pub per_mode_breakdown: Vec<(usize, f64)>,
}

pub fn gate_infidelity(
    modes: &ModeSpectrum,
    seq: &PulseSequence,
    i: usize,
    j: usize,
    mass: f64,
    temperature: f64,
) -> Result<FidelityReport> {
    check_pair(modes, i, j)?;
    let kernel = GateKernel::new(modes, seq, mass)?;
    fidelity_from_kernel(&kernel, modes, i, j, temperature)
}

pub fn fidelity_from_kernel(
    kernel: &GateKernel,
    modes: &ModeSpectrum,
    i: usize,
    j: usize,
    temperature: f64,
) -> Result<FidelityReport> {
    check_pair(modes, i, j)?;
    let theta = kernel.theta(modes, i, j);
    let mut alphas_i = Vec::with_capacity(kernel.len());
    let mut alphas_j = Vec::with_capacity(kernel.len());
    let mut breakdown = Vec::with_capacity(kernel.len());
    for (k, &w) in modes.frequencies().iter().enumerate() {
        let ai = kernel.alpha(modes, i, k);
        let aj = kernel.alpha(modes, j, k);
        breakdown.push((k, (ai.norm_sqr() + aj.norm_sqr()) * thermal_factor(w, temperature)?));
        alphas_i.push(ai);
        alphas_j.push(aj);
    }
    let rotation_error = (theta - TARGET_THETA).powi(2);
    let displacement_error: f64 = breakdown.iter().map(|(_, x)| x).sum();
    let worst = rotation_error + displacement_error;
    Ok(FidelityReport {
        ions: (i, j),
        theta,
        alphas_i,
        alphas_j,
        rotation_error,
        displacement_error,
        worst_case_infidelity: worst,
        average_infidelity: 0.8 * worst,
        temperature,
        per_mode_breakdown: breakdown,
    })
}

/// What to drive and record in a mean-field trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    /// Ions that receive the kicks (all in the `+Δk` spin state).
    pub driven: Vec<usize>,
    pub tracked_ions: Vec<usize>,
    pub tracked_modes: Vec<usize>,
    pub samples_per_interval: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySample {
    /// s
    pub time: f64,
    /// `Δk·z` per tracked ion.
    pub displacements: Vec<f64>,
    /// Interaction-picture quadratures `(x, p) = √2 (Re α̃, Im α̃)` per
    /// tracked mode.
    pub quadratures: Vec<(f64, f64)>,
}

/// Classical (mean-field) motion from rest. Samples run from `t = 0` to the
/// end of the sequence; a kick at `t_l` shows up in samples with `t > t_l`.
pub fn trajectory(
    modes: &ModeSpectrum,
    seq: &PulseSequence,
    options: &TrajectoryOptions,
    mass: f64,
) -> Result<Vec<TrajectorySample>> {
    check_mass(mass)?;
    if options.samples_per_interval == 0 {
        return Err(Error::domain("samples per kick interval must be at least 1"));
    }
    let n = modes.len();
    if let Some(bad) = options.driven.iter().chain(&options.tracked_ions).find(|i| **i >= n) {
        return Err(Error::domain(format!("ion index {bad} out of range ({n} ions)")));
    }
    if let Some(bad) = options.tracked_modes.iter().find(|k| **k >= n) {
        return Err(Error::domain(format!("mode index {bad} out of range ({n} modes)")));
    }

    let omega = modes.frequencies();
    let eta: Vec<f64> = omega.iter().map(|w| lamb_dicke(seq.delta_k, mass, *w)).collect();
    let drive: Vec<f64> =
        (0..n).map(|k| options.driven.iter().map(|i| modes.participation(*i, k)).sum()).collect();

    let t0 = seq.kick_times.first().map_or(0.0, |t| t.min(0.0));
    let end = seq.kick_times.last().map_or(0.0, |t| t.max(0.0)) + seq.period();
    let dt = seq.period() / options.samples_per_interval as f64;
    let steps = ((end - t0) / dt).round() as usize;

    let mut amp = vec![Complex64::new(0.0, 0.0); n];
    let mut next_kick = 0;
    let mut out = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let t = t0 + step as f64 * dt;
        while next_kick < seq.len() && seq.kick_times[next_kick] < t - 1e-9 * dt {
            let tl = seq.kick_times[next_kick];
            let s = seq.signs[next_kick] as f64;
            for k in 0..n {
                amp[k] += Complex64::i() * eta[k] * s * drive[k] * Complex64::from_polar(1.0, omega[k] * tl);
            }
            next_kick += 1;
        }
        let lab: Vec<Complex64> = (0..n).map(|k| amp[k] * Complex64::from_polar(1.0, -omega[k] * t)).collect();
        let displacements = options
            .tracked_ions
            .iter()
            .map(|&i| (0..n).map(|k| modes.participation(i, k) * 2.0 * eta[k] * lab[k].re).sum())
            .collect();
        let quadratures = options
            .tracked_modes
            .iter()
            .map(|&k| (2f64.sqrt() * amp[k].re, 2f64.sqrt() * amp[k].im))
            .collect();
        out.push(TrajectorySample { time: t, displacements, quadratures });
    }
    Ok(out)
}
