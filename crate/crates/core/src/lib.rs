//! Array imaging of point scatterers through homogeneous and weakly random
//! media, with the interferometric data matrix recovered from intensity-only
//! measurements.
//!
//! The crate is organized around the lifecycle of one imaging experiment:
//!
//! * [`scene`] — array geometry, frequency grid, image window and scatterer
//!   scene, plus the composite source/frequency index convention and the
//!   experiment configuration format.
//! * [`medium`] — Green's functions for the homogeneous reference medium and
//!   for a random-phase medium built on Gaussian travel-time perturbations,
//!   together with their closed-form statistical moments and Monte Carlo
//!   estimators.
//! * [`forward`] — Born-approximation response matrices, illumination data
//!   and intensity measurements, and the linearized homogeneous model
//!   operator.
//! * [`recovery`] — the illumination protocol that rebuilds interferometric
//!   matrices from intensities alone via the polarization identity, and the
//!   reciprocity-based assembly of the full data matrix.
//! * [`imaging`] — migration and subspace imaging functionals (KM, Interf,
//!   SRINT, CINT, MUSIC, SIGNAL), coherence masks, peak extraction and
//!   resolution metrics.
//! * [`io`] — flat binary and CSV serialization of matrices, images, fields
//!   and measurement records.
//!
//! All lengths are stored internally in units of the central wavelength and
//! all frequencies in units of the central angular frequency; conversions
//! from physical units happen at the configuration boundary only.
//!
//! Heavy kernels fan out over pixels or matrix entries with rayon. Each
//! output element is accumulated sequentially, so results are byte-identical
//! regardless of thread count; the embedding application owns the thread
//! pool configuration.

pub mod forward;
pub mod imaging;
pub mod io;
pub mod medium;
pub mod recovery;
pub mod scene;

use num_complex::Complex;

/// Complex scalar used throughout the crate.
pub type C64 = Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;

/// Wave speed in internal units (lengths in central wavelengths, angular
/// frequencies in units of the central angular frequency). With these units
/// the free-space phase is `2 pi * omega * distance`.
pub const C0_INTERNAL: f64 = 1.0 / (2.0 * std::f64::consts::PI);

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed configuration document; the message carries the key path.
    #[error("config error: {0}")]
    Config(String),

    /// A constructed value violates a type invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix/vector shapes do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An index is outside its documented range.
    #[error("index out of range: {0}")]
    Index(String),

    /// A reciprocity-quotient reference entry is too small to divide by.
    /// Carries the 1-based transducer pair whose reference product vanished.
    #[error(
        "singular reference entry for transducer pair (i={i}, j={j}): \
         |m| = {magnitude:.3e} is below tolerance {tolerance:.3e}; \
         choose a different reference index"
    )]
    SingularReference {
        i: usize,
        j: usize,
        magnitude: f64,
        tolerance: f64,
    },

    /// A replayed measurement set is incomplete. Lists every missing
    /// illumination, as `(kind, i, j)` descriptors.
    #[error("missing measurements: {} gaps, first {:?}", .0.len(), .0.first())]
    MissingMeasurements(Vec<(String, usize, usize)>),

    /// Intensity oracle failure, tagged with the illumination that caused it.
    #[error("oracle failure on illumination {illumination}: {source}")]
    Oracle {
        illumination: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A binary or CSV payload does not match the expected format.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
