//! Numerical toolkit for spin-3/2 color-center ensembles.
//!
//! The crate covers the full chain from the axial spin Hamiltonian to the
//! observables of two-frequency ODMR and pulsed experiments:
//!
//! * [`spin`]: spin-3/2 operators, Hamiltonian, exact and perturbative levels.
//! * [`multipole`]: 16-element multipole basis and Δm = ±1 population relaxation.
//! * [`ensemble`]: inhomogeneous broadening as weighted homogeneous spin packets.
//! * [`odmr`]: CW rate-equation steady states, hole burning, qudit modes, field maps.
//! * [`pulse`]: lab-frame density-matrix propagation, Rabi and two-frequency Ramsey.
//! * [`analysis`]: fringe fitting, FFT/Lorentzian peaks, field inversion.
//! * [`signal`]: spectrum and time-trace containers.
//!
//! Units throughout: MHz for energies and frequencies, µT for fields,
//! MHz/mT for the gyromagnetic ratio, µs for relaxation times and ns for
//! pulse timings.

pub mod analysis;
pub mod ensemble;
pub mod error;
pub mod multipole;
pub mod odmr;
pub mod params;
pub mod pulse;
pub mod signal;
pub mod spin;

pub use error::{QuditError, Result};
pub use params::{CenterParams, FieldConfig};
pub use signal::{Spectrum, TimeTrace};

/// 4×4 complex matrix in the m_S = (+3/2, +1/2, −1/2, −3/2) basis.
pub type CMat4 = nalgebra::Matrix4<num_complex::Complex64>;
/// 4×4 real matrix (population kinetics).
pub type RMat4 = nalgebra::Matrix4<f64>;
