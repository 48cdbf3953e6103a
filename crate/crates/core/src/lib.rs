//! Design and verification of fast spin-dependent-kick (SDK) entangling gates
//! on two-dimensional trapped-ion lattices.
//!
//! The crate is organised bottom-up:
//!
//! * [`constants`]: CODATA constants and the ion-species database.
//! * [`lattice`]: geometries, the transverse potential matrix, normal modes,
//!   lattice sums and the infinite-lattice dispersion relation.
//! * [`design`]: the self-consistent trap frequency / kick count solver.
//! * [`pulses`]: kick sequences, residual displacements, the two-qubit
//!   rotation angle, thermal infidelity and mean-field trajectories.
//! * [`crosstalk`]: crosstalk of parallel gates and the block schedule.
//! * [`propagation`]: group velocities and exact disturbance evolution.
//!
//! All quantities are SI; angular frequencies are in rad/s.

// `!(x > 0.0)` guards reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod crosstalk;
pub mod design;
mod error;
pub mod fit;
pub mod lattice;
pub mod propagation;
pub mod pulses;

pub use constants::{builtin_species, doppler_temperature, IonSpecies, PhysicalConstants, CODATA_2018};
pub use crosstalk::{BlockSchedule, CrosstalkEntry, ParallelCrosstalk};
pub use design::{GateDesign, Rounding, SensitivityReport};
pub use error::{Error, Result};
pub use lattice::{DispersionPoint, LatticeGeometry, ModeSpectrum, PotentialMatrix};
pub use propagation::{DisturbanceResponse, GroupVelocityField};
pub use pulses::{FidelityReport, GateKernel, PulseSequence, TrajectorySample};
