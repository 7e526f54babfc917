//! Simulation and estimation toolkit for true-velocity sensing with a base
//! station assisted by an intelligent reflecting surface (IRS).
//!
//! A point target moving in the plane is observed twice: along the direct
//! BS-target-BS path and along the BS-IRS-target-BS path. The two Doppler
//! shifts together pin down the full 2-D velocity vector. The crate covers
//! the whole chain:
//!
//! * [`geometry`]: scene angles, forward velocity-to-Doppler maps and their
//!   closed-form inverse.
//! * [`signal`]: steering vectors, the Rician BS-IRS channel and combined
//!   echo snapshots for both pilot stages.
//! * [`coarse`]: matched-filter grid search for the direct-link Doppler.
//! * [`subspace`] and [`mode`]: Hankel stacking, sample covariance
//!   eigendecomposition and the iterative weighted least squares estimator.
//! * [`baselines`]: root-MUSIC and ESPRIT on the same subspaces.
//! * [`harness`]: per-trial pipeline, Monte-Carlo sweeps and NMSE.

pub mod baselines;
pub mod coarse;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod mode;
pub mod poly;
pub mod signal;
pub mod subspace;

pub use num_complex::Complex64;

pub use error::{Error, Result};
pub use geometry::{DopplerPair, Point, SceneGeometry, VelocityVector};
pub use harness::{ExperimentConfig, Method, TrialRecord};
pub use mode::{ModeOptions, ModeOutcome, PolyCoeffs};
pub use signal::{ChannelRealization, SnapshotSet, Stage, SystemParams};
pub use subspace::{StackedSnapshots, SubspaceDecomposition};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
