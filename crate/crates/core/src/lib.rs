//! Simulation and classical reconstruction for diffractive full-Stokes
//! spectro-polarimetric imaging.
//!
//! The crate is `no_std` (with `alloc`). A rotationally symmetric
//! diffractive element is described by a radial height profile
//! ([`doe`]); its per-wavelength point spread functions come from a scalar
//! wave-optics model ([`optics`]); scenes are encoded into RGB
//! measurements ([`encoder`]) under four analyzer configurations
//! ([`polarimetry`]), decoded by regularized deconvolution ([`decoder`]),
//! and the radial profile itself can be designed by adjoint gradient
//! descent ([`optimizer`]).
//!
//! Enable the `parallel` feature to evaluate bands concurrently with rayon.

#![no_std]

extern crate alloc;

pub mod conv;
pub mod datamodel;
pub mod decoder;
pub mod doe;
pub mod encoder;
mod error;
pub mod fft;
pub mod metrics;
pub mod optics;
pub mod optimizer;
mod par;
pub mod polarimetry;
pub mod synth;

pub use datamodel::{
    AnalyzerConfig, CubeReport, Plane, ResponseTable, RgbImage, SpectralCube, StokesCube,
    WavelengthGrid,
};
pub use error::{Error, Result};
