//! Random Laplacian matrices, rank-one dual certificates for semidefinite
//! relaxations, and Monte Carlo phase-transition sweeps.
//!
//! The crate is organised bottom-up:
//!
//! * [`symm_eig`]: dense symmetric eigensolver (Householder + implicit QL,
//!   Sturm bisection for single eigenvalues).
//! * [`ensembles`]: seeded samplers for Wigner, Erdős–Rényi, two-community
//!   SBM and Z2 synchronization instances.
//! * [`laplacian`]: `L_X = D_X - X` and the model-specific Laplacians.
//! * [`certificates`]: the λ2-positivity certificate and the per-instance
//!   degree oracles.
//! * [`sdp`]: Burer–Monteiro cross-check of certificate verdicts.
//! * [`tail`]: tail bounds, exact tail DP, closed-form thresholds.
//! * [`experiments`]: deterministic parallel sweeps and CSV output.

pub mod certificates;
pub mod ensembles;
pub mod error;
pub mod experiments;
pub mod laplacian;
pub mod sdp;
pub mod symm_eig;
pub mod tail;

pub use certificates::{CertificateReport, OracleVerdict, RecoveryVerdict, ThresholdSide};
pub use ensembles::{EnsembleProfile, GraphSample, RngStream, SyncInstance};
pub use error::{Error, Result};
pub use experiments::{Experiment, PhaseCell, SweepConfig, SweepResult};
pub use symm_eig::{Spectrum, SymmetricMatrix, TriDiagonal};

/// Sign vector with entries in {-1, +1}.
pub type Signs = Vec<i8>;
