//! Deep-zero generator toolkit.
//!
//! A smooth, even, rapidly decaying generator that vanishes to infinite
//! order at every integer; its Fourier transform; exponentially perturbed
//! integer lattices; mollifier machinery for pairing integrals; and
//! weighted best-approximation by generator translates.

pub mod approx;
pub mod error;
pub mod generator;
pub mod lattice;
pub mod mollifier;
pub mod numeric;
pub mod spectrum;

pub use error::{Error, Result};
pub use generator::{
    amplitude_peak, fit_envelope, fit_envelope_to_samples, verify_deep_zero, DeepZeroReport,
    Envelope, Generator, MAX_DERIVATIVE_ORDER, SNAP_TOLERANCE,
};
pub use spectrum::{gaussian_transform, QuadratureSpec, Spectrum};
