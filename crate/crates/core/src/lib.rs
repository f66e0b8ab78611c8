//! Coordinated SSB beam-sweeping drone surveillance in multistatic MIMO-ISAC
//! networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`scene`]: array geometry, AP layout, SSB codebook, voxel grid and the
//!   symbol schedule.
//! - [`channel`]: bistatic sensing channels, direct links, RCS/clutter/noise
//!   draws and received-signal assembly.
//! - [`precoder`]: SSB power allocation and the sensing precoders, both the
//!   coordinated one (closed form, checked by an SDR-bisection oracle) and
//!   the non-coordinated benchmark.
//! - [`metrics`]: sensing and user SINR, analytic and Monte Carlo.
//! - [`detector`]: per-voxel Neyman-Pearson test and ROC estimation.
//! - [`harness`]: configuration, experiments, CSV output and validation.

pub mod channel;
pub mod detector;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod precoder;
pub mod rng;
pub mod scene;
pub mod units;

pub use error::{Error, Result};

/// Complex column vector.
pub type CVector = nalgebra::DVector<num_complex::Complex64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;
/// Cartesian position in meters.
pub type Point3 = nalgebra::Vector3<f64>;

/// Speed of light used for propagation delays, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;
