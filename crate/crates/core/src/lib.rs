//! Certified asymptotic secret-key rates for the three-state, two-decoy
//! phase-encoding QKD protocol when Alice's phase and intensity modulation
//! fluctuate in a possibly correlated, non-I.I.D. way.
//!
//! The pipeline is:
//!
//! 1. [`channel`] simulates the observable gains for a fiber link.
//! 2. [`decoy`] turns observed gains into certified bounds on untagged
//!    single-photon and vacuum yields.
//! 3. [`virtual_bounds`] converts X-basis single-photon yields into an upper
//!    bound on the virtual (phase-error) yields.
//! 4. [`keyrate`] assembles the phase-error bound and the key rate, and
//!    optimizes the decoy intensities.

pub mod channel;
pub mod decoy;
pub mod error;
pub mod keyrate;
pub mod source;
pub mod virtual_bounds;

#[cfg(feature = "cli")]
pub mod output;
#[cfg(feature = "cli")]
pub mod sweep;

pub use error::{Error, Result};
