//! Star-topology Davies probes: generator assembly, exact and numerical spectra,
//! thermometric distinguishability, Mpemba exceedance detection and Haar sampling.

pub mod error;
pub mod linalg;
pub mod lemmas;
pub mod model;
pub mod montecarlo;
pub mod mpemba;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod thermometry;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
pub use model::{BathSpec, Liouvillian, ProbeSpec, SpectralDensity};
pub use thermometry::ProbeState;
pub use num_complex::Complex64 as C64;
