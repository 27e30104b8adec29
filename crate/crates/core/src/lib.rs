//! Resonance analysis of a transmission line energized from one end.
//!
//! The line is a cascade of `n` π-sections ([`line_model`]) whose state
//! matrix is tridiagonal and, without a load, 2-Toeplitz. Its spectrum is
//! available in closed form through Chebyshev polynomials
//! ([`polynomials`], [`spectra`]); a single shunt load breaks the Toeplitz
//! structure, and [`sensitivity`] quantifies how the first resonance moves
//! as a function of where that load sits. [`sweeps`] reproduces the
//! placement and root-locus experiments and [`timesim`] checks everything
//! against a time-domain energization.
//!
//! ```
//! use line_resonance::{line_model, sensitivity};
//!
//! let sec = line_model::section_params(&line_model::LineParams::reference_110kv(9)).unwrap();
//! let best = sensitivity::optimal_location(&sec, 1).unwrap();
//! assert_eq!(best.z, 5);
//! ```

pub mod eigen;
pub mod error;
pub mod export;
pub mod line_model;
pub mod polynomials;
pub mod sensitivity;
pub mod spectra;
pub mod sweeps;
pub mod timesim;
pub mod validation;

pub use error::{Error, Result};
pub use line_model::{LineParams, LoadSpec, SectionParams, StateSpaceModel};
pub use num_complex::Complex64;
pub use spectra::{ResonanceMode, Spectrum, SpectrumMethod};
