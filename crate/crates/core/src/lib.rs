//! Shape resonances of two-dimensional magnetic Stark Hamiltonians
//!
//! `P = ½(hD_x + By)² + ½(hD_y)² + x + V(x, y)`
//!
//! computed as discrete eigenvalues of an exterior complex translation of `P`,
//! together with the self-adjoint reference operator obtained by flattening
//! the potential outside the well, the filled-well operator, the classical
//! trapped-set volume and the harmonic model of the well bottom.

pub mod assembly;
pub mod classical;
pub mod distortion;
pub mod eig;
pub mod harness;
pub mod potential;
pub mod wellops;

pub type C64 = num_complex::Complex64;

pub use assembly::{assemble_operator, make_grid, ComplexSparseMatrix, Grid2D, OperatorKind, SymmetryTag};
pub use distortion::{CutoffGeometry, CutoffProfile, DistortionParams};
pub use potential::{ClassicalState, CriticalPoint, HamiltonianParams, PotentialSpec, Term, TotalPotential};
pub use wellops::{HarmonicModel, Region, SurgeryMode, WellSurgerySpec};
