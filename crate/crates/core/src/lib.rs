//! Frequency response identification of fast-sampled LTI systems from
//! slow-sampled outputs.
//!
//! A fast-rate input `u_h` drives the plant; only every `F`-th output sample
//! is measured. Downsampling folds `F` fast bins onto each slow bin. The
//! multiband local polynomial estimator in [`estimators::lpm`] separates those
//! contributions by assuming the FRF and transient are smooth over a local
//! window, which recovers `G` on the full fast grid, above the slow Nyquist
//! frequency included.
//!
//! Modules:
//! - [`spectra`]: DFTs, frequency grids, decimation and its frequency-domain
//!   aliasing counterpart.
//! - [`excitation`]: random-phase and sparse multisines.
//! - [`plantsim`]: rational LTI plant/noise simulation and exact FRFs.
//! - [`estimators`]: multiband LPM with variance, sparse multisine estimate,
//!   naive ETFE.
//! - [`export`]: CSV formats.

pub mod error;
pub mod estimators;
pub mod excitation;
pub mod export;
pub mod plantsim;
pub mod seed;
pub mod spectra;

pub use error::{Error, Result};
pub use estimators::{
    estimate_frf_lpm, estimate_sparse, estimate_variance, etfe_baseline, BinStatus, EtfeEstimate, FrfEstimate,
    LocalEstimate, LpmConfig, SparseEstimate, SparseStatus, VarianceEstimate,
};
pub use excitation::{random_phase_multisine, sparse_multisine_bins, ExcitationKind, ExcitationSpec, Multisine};
pub use num_complex::Complex64;
pub use plantsim::{NoiseModel, PlantModel, TransferFunction};
pub use spectra::{FrequencyGrid, Rate, Spectrum};
