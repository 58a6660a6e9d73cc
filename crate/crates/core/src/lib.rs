//! Simulation and numerical verification of a QMA protocol whose verifier is
//! allowed superposition detection, for example through one non-collapsing
//! measurement.
//!
//! The crate is organised bottom-up:
//!
//! * [`quantum`]: pure states, collapsing / non-collapsing / Fourier
//!   measurements, density matrices and trace-distance utilities;
//! * [`supdetect`]: superposition detectors and their exact acceptance
//!   probabilities;
//! * [`csp`]: explicit constraint systems, brute-force values and promise-gap
//!   instance generators;
//! * [`verifier`]: the Density, QuasiCheck and ConstraintCheck tests, the
//!   constant selection and the three-way probability mixture;
//! * [`analysis`]: executable forms of the rigidity bounds, the soundness case
//!   classifier and a witness optimizer on the unit sphere.

pub mod analysis;
pub mod csp;
pub mod error;
pub mod quantum;
pub mod supdetect;
pub mod verifier;

pub use error::{Error, Result};
pub use quantum::{DensityMatrix, MeasurementRecord, RegisterSplit, StateVector, C64};
pub use supdetect::{DetectorKind, DetectorSpec};
