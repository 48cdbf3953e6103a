//! Crosstalk between gates that run at the same time, and the block schedule
//! that decides which gates do.
//!
//! Running one kick sequence on several nearest-neighbour pairs at once also
//! entangles ions belonging to different gates. The spurious angle falls off
//! as `1/r³`. Gates are scheduled in translate classes: two gates run together
//! only if one is the other shifted by a multiple of `n` sites along both axes.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::lattice::{lattice_sum, LatticeGeometry, ModeSpectrum};
use crate::pulses::{GateKernel, PulseSequence};
use crate::{Error, Result};

/// Spurious rotation between two ions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrosstalkEntry {
    pub pair: (usize, usize),
    /// In units of the lattice spacing.
    pub separation: f64,
    pub theta: f64,
    /// `Θ²`
    pub infidelity: f64,
}

fn entry(kernel: &GateKernel, modes: &ModeSpectrum, geometry: &LatticeGeometry, i: usize, j: usize) -> CrosstalkEntry {
    let theta = kernel.theta(modes, i, j);
    CrosstalkEntry {
        pair: (i, j),
        separation: geometry.distance(i, j) / geometry.spacing(),
        theta,
        infidelity: theta * theta,
    }
}

fn check_sizes(modes: &ModeSpectrum, geometry: &LatticeGeometry) -> Result<()> {
    if modes.len() != geometry.len() {
        return Err(Error::domain(format!(
            "mode spectrum has {} ions but the geometry has {}",
            modes.len(),
            geometry.len()
        )));
    }
    Ok(())
}

/// Θ between ions `i` and `j` when the sequence drives both.
pub fn crosstalk_angle(
    modes: &ModeSpectrum,
    seq: &PulseSequence,
    geometry: &LatticeGeometry,
    pair: (usize, usize),
    mass: f64,
) -> Result<CrosstalkEntry> {
    check_sizes(modes, geometry)?;
    let (i, j) = pair;
    if i >= geometry.len() || j >= geometry.len() || i == j {
        return Err(Error::domain(format!("invalid ion pair ({i}, {j})")));
    }
    let kernel = GateKernel::new(modes, seq, mass)?;
    Ok(entry(&kernel, modes, geometry, i, j))
}

/// Θ between `source` and every other ion, ordered by ion index.
pub fn crosstalk_map(
    modes: &ModeSpectrum,
    seq: &PulseSequence,
    geometry: &LatticeGeometry,
    source: usize,
    mass: f64,
) -> Result<Vec<CrosstalkEntry>> {
    check_sizes(modes, geometry)?;
    if source >= geometry.len() {
        return Err(Error::domain(format!("source ion {source} out of range")));
    }
    let kernel = GateKernel::new(modes, seq, mass)?;
    Ok((0..geometry.len())
        .into_par_iter()
        .filter(|j| *j != source)
        .map(|j| entry(&kernel, modes, geometry, source, j))
        .collect())
}

/// One set of gates that run simultaneously.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScheduleGroup {
    /// 0 for edges along the row index, 1 along the column index.
    pub orientation: u8,
    /// Lower site of the edge modulo the translation periods.
    pub offset: (usize, usize),
    /// Ion pairs `(lower, upper)`, sorted.
    pub gates: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockSchedule {
    pub block_size: usize,
    pub rows: usize,
    pub cols: usize,
    pub groups: Vec<ScheduleGroup>,
    pub serial_depth: usize,
}

/// Partitions all nearest-neighbour edges of a `rows × cols` lattice into
/// groups of mutual translates by multiples of `n`. Along the edge direction
/// the period is 2 when `n = 1` so that no ion is used twice.
pub fn build_block_schedule(rows: usize, cols: usize, n: usize) -> Result<BlockSchedule> {
    if n == 0 {
        return Err(Error::domain("block size must be at least 1"));
    }
    if rows < n + 1 || cols < n + 1 {
        return Err(Error::domain(format!("a {rows}×{cols} lattice is smaller than one {0}×{0} block", n + 1)));
    }
    let along = if n == 1 { 2 } else { n };
    let mut classes: BTreeMap<(u8, usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for a in 0..rows {
        for b in 0..cols {
            let here = a * cols + b;
            if a + 1 < rows {
                classes.entry((0, a % along, b % n)).or_default().push((here, here + cols));
            }
            if b + 1 < cols {
                classes.entry((1, a % n, b % along)).or_default().push((here, here + 1));
            }
        }
    }
    let groups: Vec<ScheduleGroup> = classes
        .into_iter()
        .map(|((orientation, oa, ob), mut gates)| {
            gates.sort_unstable();
            ScheduleGroup { orientation, offset: (oa, ob), gates }
        })
        .collect();
    Ok(BlockSchedule { block_size: n, rows, cols, serial_depth: groups.len(), groups })
}

/// `(π/4)² · 4 · ½ · S(3) / n⁶`: four equidistant ion pairs per neighbouring
/// gate, each error shared by two gates.
pub fn analytic_crosstalk_per_gate(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("block size must be at least 1"));
    }
    Ok((PI / 4.0).powi(2) * 2.0 * lattice_sum(3.0, ANALYTIC_RADIUS)? / (n as f64).powi(6))
}

const ANALYTIC_RADIUS: usize = 200;

/// Crosstalk charged to one gate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateCrosstalk {
    pub gate: (usize, usize),
    pub group: usize,
    /// `(ion in this gate, ion in another gate, ½Θ²)`.
    pub terms: Vec<(usize, usize, f64)>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelCrosstalk {
    pub block_size: usize,
    pub include_boundary: bool,
    /// Mean per-gate error over the averaged gates.
    pub numeric: f64,
    pub analytic: f64,
    pub ratio: f64,
    pub gates: Vec<GateCrosstalk>,
}

/// Whether all eight translates of `gate` by `(±n, ±n)` fit in the lattice.
fn is_interior(gate: (usize, usize), rows: usize, cols: usize, n: usize) -> bool {
    let site = |i: usize| ((i / cols) as i64, (i % cols) as i64);
    let (a, b) = (site(gate.0), site(gate.1));
    let n = n as i64;
    let inside = |(r, c): (i64, i64)| r >= 0 && c >= 0 && r < rows as i64 && c < cols as i64;
    (-1..=1).all(|u| {
        (-1..=1).all(|v| {
            let shift = |(r, c): (i64, i64)| (r + u * n, c + v * n);
            inside(shift(a)) && inside(shift(b))
        })
    })
}

/// Per-gate crosstalk when every group of the block schedule runs in
/// parallel. Each gate is charged half of `Θ²` for each of the four ion pairs
/// it forms with every other gate of its group. Without `include_boundary`
/// only gates whose eight neighbouring translates exist are averaged.
pub fn parallel_crosstalk_per_gate(
    n: usize,
    geometry: &LatticeGeometry,
    modes: &ModeSpectrum,
    seq: &PulseSequence,
    mass: f64,
    include_boundary: bool,
) -> Result<ParallelCrosstalk> {
    if n < 2 {
        return Err(Error::domain("parallel crosstalk needs block size n ≥ 2"));
    }
    check_sizes(modes, geometry)?;
    let (rows, cols) = geometry
        .shape()
        .ok_or_else(|| Error::domain("parallel crosstalk needs a rectangular lattice"))?;
    if rows < 3 * n + 1 || cols < 3 * n + 1 {
        return Err(Error::domain(format!(
            "a {rows}×{cols} lattice cannot host 3×3 blocks of size n = {n} (needs {0}×{0})",
            3 * n + 1
        )));
    }
    let schedule = build_block_schedule(rows, cols, n)?;
    let kernel = GateKernel::new(modes, seq, mass)?;

    let selected: Vec<(usize, (usize, usize))> = schedule
        .groups
        .iter()
        .enumerate()
        .flat_map(|(g, group)| group.gates.iter().map(move |gate| (g, *gate)))
        .filter(|(_, gate)| include_boundary || is_interior(*gate, rows, cols, n))
        .collect();
    if selected.is_empty() {
        return Err(Error::domain("no gates to average"));
    }

    let gates: Vec<GateCrosstalk> = selected
        .par_iter()
        .map(|&(g, gate)| {
            let mut terms = Vec::new();
            for other in schedule.groups[g].gates.iter().filter(|o| **o != gate) {
                for x in [gate.0, gate.1] {
                    for y in [other.0, other.1] {
                        let theta = kernel.theta(modes, x, y);
                        terms.push((x, y, 0.5 * theta * theta));
                    }
                }
            }
            let total = terms.iter().map(|t| t.2).sum();
            GateCrosstalk { gate, group: g, terms, total }
        })
        .collect();

    let numeric = gates.iter().map(|g| g.total).sum::<f64>() / gates.len() as f64;
    let analytic = analytic_crosstalk_per_gate(n)?;
    Ok(ParallelCrosstalk { block_size: n, include_boundary, numeric, analytic, ratio: numeric / analytic, gates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn analytic_coefficient() {
        let c = analytic_crosstalk_per_gate(1).unwrap();
        assert!((c - 5.75).abs() < 0.01, "{c}");
        assert!((analytic_crosstalk_per_gate(10).unwrap() - c * 1e-6).abs() < 1e-18);
    }

    fn check_partition(rows: usize, cols: usize, n: usize) -> BlockSchedule {
        let s = build_block_schedule(rows, cols, n).unwrap();
        let mut seen = HashSet::new();
        for group in &s.groups {
            let mut ions = HashSet::new();
            for &(a, b) in &group.gates {
                assert!(ions.insert(a) && ions.insert(b), "ion reused in group {group:?}");
                assert!(seen.insert((a, b)));
                let ((ra, ca), (rb, cb)) = ((a / cols, a % cols), (b / cols, b % cols));
                assert_eq!(ra.abs_diff(rb) + ca.abs_diff(cb), 1);
            }
            // all gates are translates of the first by multiples of n
            let (a0, b0) = group.gates[0];
            for &(a, b) in &group.gates {
                let dr = (a / cols) as i64 - (a0 / cols) as i64;
                let dc = (a % cols) as i64 - (a0 % cols) as i64;
                assert_eq!(b as i64 - a as i64, b0 as i64 - a0 as i64);
                assert_eq!(dr % n as i64, 0);
                assert_eq!(dc % n as i64, 0);
            }
        }
        let edges = rows * (cols - 1) + cols * (rows - 1);
        assert_eq!(seen.len(), edges);
        assert_eq!(s.serial_depth, s.groups.len());
        s
    }

    #[test]
    fn schedule_n1_on_4x4() {
        let s = check_partition(4, 4, 1);
        assert_eq!(s.serial_depth, 4);
    }

    #[test]
    fn schedule_partitions_and_is_size_independent() {
        for n in 1..=5 {
            let depth = check_partition(3 * n + 1, 3 * n + 1, n).serial_depth;
            assert_eq!(depth, if n == 1 { 4 } else { 2 * n * n });
            for (r, c) in [(3 * n + 4, 3 * n + 1), (5 * n + 2, 4 * n + 3)] {
                assert_eq!(check_partition(r, c, n).serial_depth, depth);
            }
        }
    }

    #[test]
    fn corresponding_gates_share_a_group() {
        let (rows, cols, n) = (13, 13, 4);
        let s = build_block_schedule(rows, cols, n).unwrap();
        let group_of = |gate: (usize, usize)| s.groups.iter().position(|g| g.gates.contains(&gate)).unwrap();
        let at = |r: usize, c: usize| r * cols + c;
        // same edge in blocks (0,0), (1,0), (0,2)
        let g = group_of((at(1, 2), at(1, 3)));
        assert_eq!(group_of((at(1 + n, 2), at(1 + n, 3))), g);
        assert_eq!(group_of((at(1, 2 + 2 * n), at(1, 3 + 2 * n))), g);
        assert_ne!(group_of((at(2, 2), at(2, 3))), g);
    }

    #[test]
    fn schedule_errors() {
        assert!(build_block_schedule(4, 4, 0).is_err());
        assert!(build_block_schedule(3, 10, 3).is_err());
    }

    #[test]
    fn interior_test() {
        let (rows, cols, n) = (7, 7, 2);
        let at = |r: usize, c: usize| r * cols + c;
        assert!(is_interior((at(2, 2), at(2, 3)), rows, cols, n));
        assert!(!is_interior((at(1, 2), at(1, 3)), rows, cols, n));
        assert!(!is_interior((at(2, 4), at(2, 5)), rows, cols, n));
    }
}
