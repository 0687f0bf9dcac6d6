//! FMCW radar attack laboratory.
//!
//! A victim radar pipeline (dechirp, Range-Doppler, CA-CFAR, DBSCAN), an
//! attacker that estimates the victim's waveform from its emissions and
//! synthesizes spoofing/jamming chirps, and a seeded Monte-Carlo harness.

pub mod attacks;
pub mod channel;
pub mod estimation;
pub mod harness;
pub mod ifsim;
pub mod par;
pub mod rng;
pub mod stats;
pub mod victim;
pub mod waveforms;

pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const C: f64 = 299_792_458.0;
