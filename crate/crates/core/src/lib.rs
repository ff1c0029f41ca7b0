//! Direction-of-arrival estimation with sparse and uniform linear arrays.
//!
//! The crate models arrays of directive elements (dipole, patch, Vivaldi or
//! tabulated patterns) on integer half-wavelength grids, synthesises
//! snapshots at a given element-level isotropic SNR, and runs element-space
//! MUSIC or coarray MUSIC inside a seeded Monte Carlo harness.

pub mod config;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod geometry;
pub mod manifold;
pub mod patterns;
pub mod plot;
pub mod results;
pub mod rng;

pub use error::{Error, Result};
pub use estimators::{
    coarray_covariance, coarray_music, hermitian_eig, music_pseudospectrum, pick_peaks,
    AzimuthGrid, DoaEstimateSet, Pseudospectrum,
};
pub use geometry::{difference_coarray, is_perfect, make_mra, make_ula, ArrayGeometry, Coarray};
pub use manifold::{
    generate_snapshots, sample_covariance, ArrayManifold, SnapshotSet, SourceScenario,
};
pub use patterns::{ElementPattern, PatternKind, PatternPerturbation, PatternTable};
